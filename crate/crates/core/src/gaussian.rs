//! Gaussian block factors.
//!
//! A radius-`n` block factor assigns to vertex `x` the normalised sum
//! `c * sum_{dist(x, y) < n} w(dist(x, y)) Z_y` of IID standard normals, with
//! weights `w(k) = s^k (d - 1)^(-k/2)` for a sign `s = ±1` and
//! `c = 1 / sqrt(1 + (n - 1) d / (d - 1))`, which makes each value standard
//! normal. Adjacent values have correlation `-rho_d / (1 + (d - 1) / (d (n - 1)))`
//! for alternating weights and the opposite for constant-sign weights.
//!
//! On a finite graph the factor is applied only at vertices whose radius
//! `n - 1` ball is tree-like; elsewhere the value is 0 and the vertex is
//! marked undefined.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{tree_like_report, BallScanner, Graph, TreeLikeReport};
use crate::math::{block_factor_correlation, sphere_size_f64};
use crate::processes::SpinField;
use crate::rng::{rng_from_seed, SimRng};
use crate::tree::TreeBall;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockSign {
    /// Constant-sign weights; positively correlated neighbours.
    Plus,
    /// Alternating weights; negatively correlated neighbours.
    Minus,
}

impl BlockSign {
    fn unit(self) -> f64 {
        match self {
            BlockSign::Plus => 1.0,
            BlockSign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockFactorSpec {
    d: u32,
    n: u32,
    sign: BlockSign,
}

impl BlockFactorSpec {
    pub fn new(d: u32, n: u32, sign: BlockSign) -> Result<Self> {
        if d < 3 {
            return Err(Error::domain(format!("block factor degree must be at least 3, got {d}")));
        }
        if n < 2 {
            return Err(Error::domain(format!("block factor radius must be at least 2, got {n}")));
        }
        Ok(Self { d, n, sign })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn sign(&self) -> BlockSign {
        self.sign
    }

    /// Weight of a label at distance `k < n`.
    pub fn weight(&self, k: u32) -> f64 {
        self.sign.unit().powi(k as i32) * f64::from(self.d - 1).powf(-f64::from(k) / 2.0)
    }

    /// Weights for distances `0..n`.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.weight(k)).collect()
    }

    pub fn normalization(&self) -> f64 {
        let d = f64::from(self.d);
        1.0 / (1.0 + f64::from(self.n - 1) * d / (d - 1.0)).sqrt()
    }

    /// `normalization^2 * sum_k |S_k| w(k)^2`; equals 1 up to rounding.
    pub fn variance(&self) -> f64 {
        let sum: f64 = (0..self.n).map(|k| sphere_size_f64(self.d, k) * self.weight(k).powi(2)).sum();
        self.normalization().powi(2) * sum
    }

    /// Closed-form correlation of the values at two adjacent tree vertices.
    pub fn neighbor_correlation(&self) -> f64 {
        let c = block_factor_correlation(self.d, self.n).expect("validated at construction");
        match self.sign {
            BlockSign::Minus => c,
            BlockSign::Plus => -c,
        }
    }

    /// Radius of the ball a vertex must see as a tree.
    pub fn support_radius(&self) -> u32 {
        self.n - 1
    }
}

/// Real values on vertices, with a mask of the vertices where the factor applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussField {
    pub values: Vec<f64>,
    pub defined_mask: Vec<bool>,
}

impl GaussField {
    pub fn defined_count(&self) -> usize {
        self.defined_mask.iter().filter(|&&b| b).count()
    }
}

fn standard_normals<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| rng.sample(StandardNormal)).collect()
}

/// Block factor on a tree ball with precomputed per-vertex stencils, for
/// repeated sampling.
#[derive(Debug, Clone)]
pub struct TreeBlockFactor {
    vertex_count: usize,
    eligible: Vec<usize>,
    stencils: Vec<Vec<(u32, f64)>>,
}

impl TreeBlockFactor {
    /// Eligible vertices are those whose radius `n - 1` ball fits inside the
    /// tree ball: depth at most `radius - (n - 1)`.
    pub fn new(ball: &TreeBall, spec: &BlockFactorSpec) -> Result<Self> {
        if spec.d() != ball.d() {
            return Err(Error::domain(format!("spec degree {} differs from ball degree {}", spec.d(), ball.d())));
        }
        let reach = spec.support_radius();
        if ball.radius() < reach {
            return Err(Error::domain(format!(
                "a ball of radius {} has no vertex whose radius-{reach} neighbourhood fits inside",
                ball.radius()
            )));
        }
        let g = ball.to_graph();
        let weights = spec.weights();
        let norm = spec.normalization();
        let eligible: Vec<usize> = ball.inner_ball(ball.radius() - reach).collect();
        let mut scanner = BallScanner::new(g.vertex_count());
        let stencils = eligible
            .iter()
            .map(|&x| {
                scanner.scan(&g, x, reach);
                scanner
                    .visited()
                    .iter()
                    .map(|&y| (y, norm * weights[scanner.distance(y as usize).unwrap() as usize]))
                    .collect()
            })
            .collect();
        Ok(Self { vertex_count: ball.vertex_count(), eligible, stencils })
    }

    pub fn eligible(&self) -> &[usize] {
        &self.eligible
    }

    /// Applies the factor to given labels.
    pub fn apply(&self, z: &[f64]) -> GaussField {
        let mut values = vec![0.0; self.vertex_count];
        let mut defined_mask = vec![false; self.vertex_count];
        for (&x, stencil) in self.eligible.iter().zip(&self.stencils) {
            values[x] = stencil.iter().map(|&(y, w)| w * z[y as usize]).sum();
            defined_mask[x] = true;
        }
        GaussField { values, defined_mask }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GaussField {
        self.apply(&standard_normals(self.vertex_count, rng))
    }
}

/// Draws IID normals on every vertex of `ball` and applies the block factor at
/// each eligible vertex.
pub fn evaluate_on_tree<R: Rng + ?Sized>(ball: &TreeBall, spec: &BlockFactorSpec, rng: &mut R) -> Result<GaussField> {
    Ok(TreeBlockFactor::new(ball, spec)?.sample(rng))
}

/// Block factor emulated on a graph. The tree-likeness mask is computed once.
#[derive(Debug, Clone)]
pub struct GraphEmulator<'g> {
    graph: &'g Graph,
    spec: BlockFactorSpec,
    report: TreeLikeReport,
}

impl<'g> GraphEmulator<'g> {
    pub fn new(graph: &'g Graph, spec: BlockFactorSpec) -> Self {
        let report = tree_like_report(graph, spec.support_radius(), spec.d() as usize);
        Self { graph, spec, report }
    }

    pub fn spec(&self) -> &BlockFactorSpec {
        &self.spec
    }

    pub fn tree_like(&self) -> &TreeLikeReport {
        &self.report
    }

    /// Applies the factor to given labels, one per vertex.
    pub fn apply(&self, z: &[f64]) -> GaussField {
        let weights = self.spec.weights();
        let norm = self.spec.normalization();
        let spheres = sphere_sums_by_recurrence(self.graph, z, self.spec.support_radius());
        let mask = &self.report.tree_like_mask;
        let values = (0..self.graph.vertex_count())
            .into_par_iter()
            .map(|x| {
                if !mask[x] {
                    return 0.0;
                }
                norm * spheres.iter().zip(&weights).map(|(s, w)| w * s[x]).sum::<f64>()
            })
            .collect();
        GaussField { values, defined_mask: mask.clone() }
    }

    /// Labels come from a single stream seeded with `seed`, in vertex order.
    pub fn sample(&self, seed: u64) -> GaussField {
        let mut rng = rng_from_seed(seed);
        self.apply(&standard_normals(self.graph.vertex_count(), &mut rng))
    }
}

pub fn emulate_on_graph(g: &Graph, spec: &BlockFactorSpec, seed: u64) -> GaussField {
    GraphEmulator::new(g, *spec).sample(seed)
}

/// `sum_{dist(x, y) <= radius} weights[dist] * z[y]` by breadth-first search.
///
/// The ball of the given radius around `x` must be tree-like for degree `d`.
pub fn distance_weighted_sum(g: &Graph, x: usize, z: &[f64], weights: &[f64], radius: u32, d: usize) -> Result<f64> {
    if weights.len() <= radius as usize {
        return Err(Error::Contract(format!("{} weights do not reach radius {radius}", weights.len())));
    }
    let mut scanner = BallScanner::new(g.vertex_count());
    if !scanner.is_tree_like(g, x, radius, d) {
        return Err(Error::Contract(format!("ball of radius {radius} around {x} is not tree-like")));
    }
    scanner.scan(g, x, radius);
    Ok(scanner.visited().iter().map(|&y| weights[scanner.distance(y as usize).unwrap() as usize] * z[y as usize]).sum())
}

/// Non-backtracking walk sums `V_0..=V_radius` for every vertex:
/// `V_0 = z`, `V_1 = A z`, `V_2 = A V_1 - D V_0` and
/// `V_{k+1} = A V_k - (D - I) V_{k-1}`.
///
/// Where the radius-`k` ball around `x` is a tree, `V_k[x]` is exactly the sum
/// of `z` over the sphere of radius `k`.
pub fn sphere_sums_by_recurrence(g: &Graph, z: &[f64], radius: u32) -> Vec<Vec<f64>> {
    let n = g.vertex_count();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(radius as usize + 1);
    out.push(z.to_vec());
    for k in 1..=radius as usize {
        let cur = &out[k - 1];
        let prev = (k >= 2).then(|| &out[k - 2]);
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|x| {
                let applied: f64 = g.neighbors(x).iter().map(|&y| cur[y as usize]).sum();
                match prev {
                    None => applied,
                    Some(prev) => {
                        let back = if k == 2 { g.degree(x) } else { g.degree(x) - 1 };
                        applied - back as f64 * prev[x]
                    }
                }
            })
            .collect();
        out.push(next);
    }
    out
}

/// Rounds a field to signs; exact zeros (including undefined vertices) get an
/// independent fair sign drawn in vertex order from `tie_seed`.
pub fn sign_field(field: &GaussField, tie_seed: u64) -> SpinField {
    let mut rng: SimRng = rng_from_seed(tie_seed);
    let values = field
        .values
        .iter()
        .map(|&v| {
            if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else if rng.random::<bool>() {
                1
            } else {
                -1
            }
        })
        .collect();
    SpinField { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_regular;
    use crate::math::sign_flip_probability;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spec_validation() {
        assert!(BlockFactorSpec::new(2, 3, BlockSign::Plus).is_err());
        assert!(BlockFactorSpec::new(3, 1, BlockSign::Plus).is_err());
        let spec = BlockFactorSpec::new(3, 3, BlockSign::Minus).unwrap();
        assert_eq!(spec.weight(0), 1.0);
        assert_abs_diff_eq!(spec.weight(1), -1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(spec.weight(2), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn unit_variance() {
        for d in [3, 4] {
            for n in [2, 3, 5] {
                for sign in [BlockSign::Plus, BlockSign::Minus] {
                    let spec = BlockFactorSpec::new(d, n, sign).unwrap();
                    assert!((spec.variance() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn root_stencil_size() {
        let ball = TreeBall::new(3, 2).unwrap();
        let spec = BlockFactorSpec::new(3, 2, BlockSign::Minus).unwrap();
        let f = TreeBlockFactor::new(&ball, &spec).unwrap();
        assert_eq!(f.stencils[0].len(), 4);
        assert_eq!(f.eligible(), &[0, 1, 2, 3]);
        // a radius-0 ball cannot host a radius-2 factor
        assert!(TreeBlockFactor::new(&TreeBall::new(3, 0).unwrap(), &spec).is_err());
    }

    #[test]
    fn tree_values_follow_stencil() {
        let ball = TreeBall::new(3, 3).unwrap();
        let spec = BlockFactorSpec::new(3, 2, BlockSign::Minus).unwrap();
        let z: Vec<f64> = (0..ball.vertex_count()).map(|i| i as f64 * 0.1).collect();
        let field = TreeBlockFactor::new(&ball, &spec).unwrap().apply(&z);
        let c = spec.normalization();
        let w1 = spec.weight(1);
        assert_abs_diff_eq!(field.values[0], c * (z[0] + w1 * (z[1] + z[2] + z[3])), epsilon = 1e-12);
        assert!(field.defined_mask[..10].iter().all(|&b| b));
        assert!(field.defined_mask[10..].iter().all(|&b| !b));
        assert!(field.values[10..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tree_moments() {
        let ball = TreeBall::new(3, 2).unwrap();
        let spec = BlockFactorSpec::new(3, 2, BlockSign::Minus).unwrap();
        let f = TreeBlockFactor::new(&ball, &spec).unwrap();
        let mut rng = rng_from_seed(11);
        let samples = 100_000;
        let (mut s00, mut s01) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
        for _ in 0..samples {
            let field = f.sample(&mut rng);
            s00.push(field.values[0] * field.values[0]);
            s01.push(field.values[0] * field.values[1]);
        }
        let (var, var_se) = crate::stats::mean_se(&s00);
        assert!((var - 1.0).abs() < 4.0 * var_se, "var {var}");
        let (cov, cov_se) = crate::stats::mean_se(&s01);
        assert!((cov - spec.neighbor_correlation()).abs() < 4.0 * cov_se, "cov {cov}");
        assert_abs_diff_eq!(spec.neighbor_correlation(), -0.565_685_4, epsilon = 1e-7);
    }

    #[test]
    fn emulation_on_k4_is_undefined() {
        let spec = BlockFactorSpec::new(3, 2, BlockSign::Plus).unwrap();
        let field = emulate_on_graph(&Graph::complete(4), &spec, 1);
        assert!(field.defined_mask.iter().all(|&b| !b));
        assert!(field.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn emulation_on_tree_ball_matches_tree_evaluation() {
        let ball = TreeBall::new(3, 5).unwrap();
        let g = ball.to_graph();
        for n in [2, 3, 4] {
            let spec = BlockFactorSpec::new(3, n, BlockSign::Minus).unwrap();
            let z: Vec<f64> = (0..g.vertex_count()).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
            let on_graph = GraphEmulator::new(&g, spec).apply(&z);
            let on_tree = TreeBlockFactor::new(&ball, &spec).unwrap().apply(&z);
            assert_eq!(on_graph.defined_mask, on_tree.defined_mask);
            for (a, b) in on_graph.values.iter().zip(&on_tree.values) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn weighted_sum_small_cases() {
        let g = Graph::cycle(8);
        let z: Vec<f64> = (0..8).map(|i| i as f64 + 1.0).collect();
        assert_eq!(distance_weighted_sum(&g, 3, &z, &[2.0], 0, 2).unwrap(), 8.0);
        assert_eq!(distance_weighted_sum(&g, 3, &z, &[1.0, 1.0], 1, 2).unwrap(), 4.0 + 3.0 + 5.0);
        assert!(matches!(distance_weighted_sum(&g, 3, &z, &[1.0; 5], 4, 2), Err(Error::Contract(_))));
        assert!(distance_weighted_sum(&Graph::complete(4), 0, &[0.0; 4], &[1.0; 2], 1, 3).is_err());
    }

    #[test]
    fn recurrence_matches_bfs() {
        let g = random_regular(2000, 3, 4).unwrap();
        let radius = 3;
        let mut rng = rng_from_seed(12);
        let z = standard_normals(g.vertex_count(), &mut rng);
        let weights = [1.0, -0.7, 0.5, -0.35];
        let spheres = sphere_sums_by_recurrence(&g, &z, radius);
        let report = tree_like_report(&g, radius, 3);
        let mut checked = 0;
        for x in (0..g.vertex_count()).filter(|&x| report.tree_like_mask[x]).take(100) {
            let bfs = distance_weighted_sum(&g, x, &z, &weights, radius, 3).unwrap();
            let rec: f64 = (0..=radius as usize).map(|k| weights[k] * spheres[k][x]).sum();
            assert!((bfs - rec).abs() < 1e-9);
            checked += 1;
        }
        assert_eq!(checked, 100);
    }

    #[test]
    fn signs() {
        let field = GaussField { values: vec![1.0, -2.0, 0.0, 3.0], defined_mask: vec![true; 4] };
        let s = sign_field(&field, 5);
        assert_eq!(&s.values[..2], &[1, -1]);
        assert_eq!(s.values[3], 1);
        assert_eq!(sign_field(&field, 5), s);

        let zeros = GaussField { values: vec![0.0; 40_000], defined_mask: vec![false; 40_000] };
        let s = sign_field(&zeros, 6);
        let plus = s.values.iter().filter(|&&v| v == 1).count() as f64 / 40_000.0;
        assert!((plus - 0.5).abs() < 4.0 * 0.5 / 200.0);
    }

    #[test]
    fn emulation_is_reproducible() {
        let g = random_regular(500, 3, 2).unwrap();
        let spec = BlockFactorSpec::new(3, 3, BlockSign::Plus).unwrap();
        assert_eq!(emulate_on_graph(&g, &spec, 9), emulate_on_graph(&g, &spec, 9));
        let p = sign_flip_probability(spec.neighbor_correlation()).unwrap();
        assert!(p < 0.5);
    }
}
