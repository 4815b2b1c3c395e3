//! Invariant processes sampled on tree balls.
//!
//! All samplers work outwards from the root, so the law on `B_r` is the exact
//! restriction of the law on the infinite tree. Depth-`r` vertices may be left
//! unmatched or see fewer than `d` colours: the rest of their structure lies
//! outside the ball.
//!
//! Per-edge arrays use the ball's edge indexing (edge `v - 1` joins `v` to its
//! parent).

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::MarkovParams;
use crate::tree::TreeBall;

/// A `±1` configuration on the vertices of a ball.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct SpinField {
    pub values: Vec<i8>,
}

impl SpinField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, v: usize) -> i8 {
        self.values[v]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&s| f64::from(s)).collect()
    }
}

/// Independent uniform `[0, 1)` labels: two per vertex and one per edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformLabelField {
    pub vertex_labels_1: Vec<f64>,
    pub vertex_labels_2: Vec<f64>,
    pub edge_labels: Vec<f64>,
}

impl UniformLabelField {
    pub fn sample<R: Rng + ?Sized>(ball: &TreeBall, rng: &mut R) -> Self {
        let n = ball.vertex_count();
        let mut draw = |len: usize| (0..len).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
        let vertex_labels_1 = draw(n);
        let vertex_labels_2 = draw(n);
        let edge_labels = draw(ball.edge_count());
        Self { vertex_labels_1, vertex_labels_2, edge_labels }
    }
}

fn require_radius(ball: &TreeBall) -> Result<()> {
    if ball.radius() == 0 {
        return Err(Error::domain("the sampler needs a ball of radius at least 1"));
    }
    Ok(())
}

fn random_spin<R: Rng + ?Sized>(rng: &mut R) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// IID uniform spins.
pub fn sample_iid_spins<R: Rng + ?Sized>(ball: &TreeBall, rng: &mut R) -> SpinField {
    SpinField { values: (0..ball.vertex_count()).map(|_| random_spin(rng)).collect() }
}

/// Tree-indexed Markov chain: a uniform root spin, then every child copies its
/// parent with probability `(1 + theta) / 2` and flips otherwise.
pub fn sample_mc_direct<R: Rng + ?Sized>(ball: &TreeBall, params: &MarkovParams, rng: &mut R) -> SpinField {
    let keep = params.keep_probability();
    let mut values = vec![0i8; ball.vertex_count()];
    values[0] = random_spin(rng);
    for v in 1..values.len() {
        let p = ball.parent(v).unwrap();
        values[v] = if rng.random::<f64>() < keep { values[p] } else { -values[p] };
    }
    SpinField { values }
}

/// Tree-indexed Markov chain built from Bernoulli(|theta|) bond percolation.
///
/// An edge is open when its label is at most `|theta|`. In each open cluster
/// the vertex with the smallest first label picks the cluster's spin from the
/// sign of its second label minus one half. For `theta < 0` the cluster gets
/// the alternating colouring through that vertex instead of a constant spin.
pub fn sample_mc_cluster(ball: &TreeBall, params: &MarkovParams, labels: &UniformLabelField) -> SpinField {
    let n = ball.vertex_count();
    let threshold = params.theta().abs();
    // clusters are subtrees; each is named by its topmost vertex
    let mut top = vec![0usize; n];
    for v in 1..n {
        let p = ball.parent(v).unwrap();
        top[v] = if labels.edge_labels[v - 1] <= threshold { top[p] } else { v };
    }
    // BFS order visits lower indices first, so strict `<` breaks label ties by index
    let mut leader: Vec<usize> = (0..n).collect();
    for (v, &c) in top.iter().enumerate() {
        if labels.vertex_labels_1[v] < labels.vertex_labels_1[leader[c]] {
            leader[c] = v;
        }
    }
    let values = (0..n)
        .map(|v| {
            let x = leader[top[v]];
            // a label of exactly 1/2 has probability zero; it maps to +1
            let s: i8 = if labels.vertex_labels_2[x] < 0.5 { -1 } else { 1 };
            if params.theta() >= 0.0 || (ball.depth(v) + ball.depth(x)).is_multiple_of(2) {
                s
            } else {
                -s
            }
        })
        .collect();
    SpinField { values }
}

/// A set of edges of a ball, one flag per edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchingConfig {
    pub in_matching: Vec<bool>,
}

impl MatchingConfig {
    pub fn edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.in_matching.iter().enumerate().filter(|(_, &m)| m).map(|(e, _)| e)
    }

    /// Number of matching edges at each vertex.
    pub fn coverage(&self, ball: &TreeBall) -> Vec<u32> {
        let mut cover = vec![0u32; ball.vertex_count()];
        for e in self.edges() {
            let (a, b) = ball.edge_endpoints(e);
            cover[a] += 1;
            cover[b] += 1;
        }
        cover
    }

    /// Interior vertices are covered exactly once, boundary vertices at most once.
    pub fn validate(&self, ball: &TreeBall) -> Result<()> {
        if self.in_matching.len() != ball.edge_count() {
            return Err(Error::Contract("matching has the wrong number of edges".into()));
        }
        for (v, &c) in self.coverage(ball).iter().enumerate() {
            let interior = ball.depth(v) < ball.radius();
            if c > 1 || (interior && c != 1) {
                return Err(Error::Contract(format!("vertex {v} is covered {c} times")));
            }
        }
        Ok(())
    }
}

/// Outward matching on the edges flagged in `available`: an uncovered interior
/// vertex takes one of its available child edges uniformly at random.
fn sample_matching_on<R: Rng + ?Sized>(ball: &TreeBall, available: &[bool], rng: &mut R) -> Vec<bool> {
    let mut chosen = vec![false; ball.edge_count()];
    let mut options = Vec::with_capacity(ball.d() as usize);
    for v in ball.inner_ball(ball.radius().saturating_sub(1)) {
        if ball.depth(v) == ball.radius() {
            break;
        }
        if ball.parent_edge(v).is_some_and(|e| chosen[e]) {
            continue;
        }
        options.clear();
        options.extend(ball.children(v).map(|c| c - 1).filter(|&e| available[e]));
        if let Some(&e) = options.choose(rng) {
            chosen[e] = true;
        }
    }
    chosen
}

/// Perfect matching of the d-regular tree restricted to the ball: the root
/// matches along a uniform edge, and each unmatched vertex further out matches
/// to a uniform child.
pub fn sample_perfect_matching<R: Rng + ?Sized>(ball: &TreeBall, rng: &mut R) -> Result<MatchingConfig> {
    require_radius(ball)?;
    let available = vec![true; ball.edge_count()];
    Ok(MatchingConfig { in_matching: sample_matching_on(ball, &available, rng) })
}

/// Proper edge colouring with colours `1..=d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColoringConfig {
    pub color: Vec<u8>,
}

impl ColoringConfig {
    pub fn validate(&self, ball: &TreeBall) -> Result<()> {
        let d = ball.d() as u8;
        for v in 0..ball.vertex_count() {
            let mut seen = 0u64;
            for e in ball.parent_edge(v).into_iter().chain(ball.children(v).map(|c| c - 1)) {
                let c = self.color[e];
                if c == 0 || c > d {
                    return Err(Error::Contract(format!("edge {e} has colour {c} outside 1..={d}")));
                }
                if seen & (1 << c) != 0 {
                    return Err(Error::Contract(format!("colour {c} repeats at vertex {v}")));
                }
                seen |= 1 << c;
            }
            if ball.depth(v) < ball.radius() && seen.count_ones() != u32::from(d) {
                return Err(Error::Contract(format!("interior vertex {v} misses a colour")));
            }
        }
        Ok(())
    }
}

/// The root's edges get a uniform bijection onto `1..=d`; each further vertex
/// gives its child edges a uniform bijection onto the colours missing from its
/// parent edge.
pub fn sample_proper_coloring<R: Rng + ?Sized>(ball: &TreeBall, rng: &mut R) -> Result<ColoringConfig> {
    require_radius(ball)?;
    if ball.d() > 63 {
        return Err(Error::domain("colourings support degrees up to 63"));
    }
    let d = ball.d() as u8;
    let mut color = vec![0u8; ball.edge_count()];
    let mut palette = Vec::with_capacity(d as usize);
    for v in 0..ball.vertex_count() {
        if ball.child_count(v) == 0 {
            continue;
        }
        let used = ball.parent_edge(v).map(|e| color[e]);
        palette.clear();
        palette.extend((1..=d).filter(|&c| Some(c) != used));
        palette.shuffle(rng);
        for (c, &col) in ball.children(v).zip(&palette) {
            color[c - 1] = col;
        }
    }
    Ok(ColoringConfig { color })
}

/// `d - 2` disjoint matchings plus an unordered pair of matchings covering the
/// remaining paths.
///
/// The remaining edges form paths. Each path splits into two alternating
/// matchings, tagged by `parity` 0 and 1. `pair_class[c]` is the class (1 or
/// 2) of the parity-0 matching of path component `c`; the parity-1 matching
/// gets the other class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchingListConfig {
    pub matchings: Vec<MatchingConfig>,
    /// Path component of each remaining edge, `None` for edges in `matchings`.
    pub component: Vec<Option<usize>>,
    /// Alternation parity of each remaining edge within its path.
    pub parity: Vec<u8>,
    pub pair_class: Vec<u8>,
}

impl MatchingListConfig {
    /// Class (1 or 2) of the pair matching that contains edge `e`.
    pub fn q_class(&self, e: usize) -> Option<u8> {
        self.component[e].map(|c| if self.parity[e] == 0 { self.pair_class[c] } else { 3 - self.pair_class[c] })
    }

    pub fn validate(&self, ball: &TreeBall) -> Result<()> {
        let m = ball.edge_count();
        if self.matchings.len() != ball.d() as usize - 2 {
            return Err(Error::Contract("wrong number of matchings".into()));
        }
        let mut used = vec![false; m];
        for (i, p) in self.matchings.iter().enumerate() {
            for e in p.edges() {
                if used[e] {
                    return Err(Error::Contract(format!("edge {e} lies in two matchings (second is P{})", i + 1)));
                }
                used[e] = true;
            }
            // once earlier matchings are removed each stage must still cover every interior vertex
            let cover = p.coverage(ball);
            if (0..ball.vertex_count()).any(|v| cover[v] > 1 || (ball.depth(v) < ball.radius() && cover[v] != 1)) {
                return Err(Error::Contract(format!("P{} is not a matching of the interior", i + 1)));
            }
        }
        let mut degree = vec![0u32; ball.vertex_count()];
        for e in (0..m).filter(|&e| !used[e]) {
            if self.component[e].is_none() {
                return Err(Error::Contract(format!("remaining edge {e} has no component")));
            }
            let (a, b) = ball.edge_endpoints(e);
            degree[a] += 1;
            degree[b] += 1;
        }
        for (v, &deg) in degree.iter().enumerate() {
            let ok = if ball.depth(v) < ball.radius() { deg == 2 } else { deg <= 2 };
            if !ok {
                return Err(Error::Contract(format!("vertex {v} has {deg} remaining edges")));
            }
        }
        // adjacent path edges alternate, so each path's two matchings are distinct and get distinct classes
        for v in 0..ball.vertex_count() {
            let rest: Vec<usize> =
                ball.parent_edge(v).into_iter().chain(ball.children(v).map(|c| c - 1)).filter(|&e| !used[e]).collect();
            if let [e, f] = rest[..] {
                if self.parity[e] == self.parity[f] || self.q_class(e) == self.q_class(f) {
                    return Err(Error::Contract(format!("path edges {e} and {f} at vertex {v} share a matching")));
                }
            }
        }
        if self.pair_class.iter().any(|&c| c != 1 && c != 2) {
            return Err(Error::Contract("pair classes must be 1 or 2".into()));
        }
        Ok(())
    }
}

/// Peels `d - 2` outward matchings, splits the remaining paths into their two
/// matchings, and decides which matchings of neighbouring paths share a class.
///
/// Two paths joined by a removed edge `e = ab` are compared through the labels
/// of their two edges at `a` and at `b`: the matching containing the
/// higher-labelled edge at `a` joins the class of the matching containing the
/// higher-labelled edge at `b`. This is the rule "same class iff
/// `(U1 - U2)(U1' - U2') > 0`" with `e1`, `e1'` chosen as the larger labels.
/// Equal labels fall back to the lower edge index. Paths with no usable link to
/// an already classified path take their class from a fair coin.
pub fn sample_matching_list<R: Rng + ?Sized>(
    ball: &TreeBall,
    labels: &UniformLabelField,
    rng: &mut R,
) -> Result<MatchingListConfig> {
    require_radius(ball)?;
    let m = ball.edge_count();
    let n = ball.vertex_count();
    let mut available = vec![true; m];
    let mut matchings = Vec::with_capacity(ball.d() as usize - 2);
    for _ in 0..ball.d() - 2 {
        let chosen = sample_matching_on(ball, &available, rng);
        for (a, &c) in available.iter_mut().zip(&chosen) {
            *a &= !c;
        }
        matchings.push(MatchingConfig { in_matching: chosen });
    }

    // remaining edges at each vertex (at most two)
    let mut incident: Vec<Vec<usize>> = vec![Vec::with_capacity(2); n];
    for e in (0..m).filter(|&e| available[e]) {
        let (a, b) = ball.edge_endpoints(e);
        incident[a].push(e);
        incident[b].push(e);
    }

    // label path components with alternating parity
    let mut component = vec![None; m];
    let mut parity = vec![0u8; m];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in (0..m).filter(|&e| available[e]) {
        if component[start].is_some() {
            continue;
        }
        component[start] = Some(components);
        stack.push(start);
        while let Some(e) = stack.pop() {
            let (a, b) = ball.edge_endpoints(e);
            for &f in incident[a].iter().chain(&incident[b]) {
                if component[f].is_none() {
                    component[f] = Some(components);
                    parity[f] = 1 - parity[e];
                    stack.push(f);
                }
            }
        }
        components += 1;
    }

    // links between components across removed edges: (other component, flip)
    let preferred = |v: usize| -> Option<usize> {
        match incident[v][..] {
            [e, f] => {
                let (ue, uf) = (labels.edge_labels[e], labels.edge_labels[f]);
                Some(if ue > uf || (ue == uf && e < f) { e } else { f })
            }
            _ => None,
        }
    };
    let mut links: Vec<Vec<(usize, bool)>> = vec![Vec::new(); components];
    for e in (0..m).filter(|&e| !available[e]) {
        let (a, b) = ball.edge_endpoints(e);
        if let (Some(ea), Some(eb)) = (preferred(a), preferred(b)) {
            let (ca, cb) = (component[ea].unwrap(), component[eb].unwrap());
            let flip = parity[ea] != parity[eb];
            links[ca].push((cb, flip));
            links[cb].push((ca, flip));
        }
    }

    let mut pair_class = vec![0u8; components];
    for root in 0..components {
        if pair_class[root] != 0 {
            continue;
        }
        pair_class[root] = if rng.random::<bool>() { 1 } else { 2 };
        stack.push(root);
        while let Some(c) = stack.pop() {
            for &(other, flip) in &links[c] {
                if pair_class[other] == 0 {
                    pair_class[other] = if flip { 3 - pair_class[c] } else { pair_class[c] };
                    stack.push(other);
                }
            }
        }
    }

    Ok(MatchingListConfig { matchings, component, parity, pair_class })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn direct_extremes() {
        let ball = TreeBall::new(3, 4).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..20 {
            let s = sample_mc_direct(&ball, &MarkovParams::new(3, 1.0).unwrap(), &mut rng);
            assert!(s.values.iter().all(|&x| x == s.values[0]));
            let s = sample_mc_direct(&ball, &MarkovParams::new(3, -1.0).unwrap(), &mut rng);
            for v in 0..ball.vertex_count() {
                let sign = if ball.depth(v).is_multiple_of(2) { 1 } else { -1 };
                assert_eq!(s.get(v), sign * s.get(0));
            }
        }
    }

    #[test]
    fn direct_keep_frequency() {
        let ball = TreeBall::new(3, 1).unwrap();
        let params = MarkovParams::new(3, 0.5).unwrap();
        let mut rng = rng_from_seed(2);
        let samples = 100_000;
        let mut same = 0;
        for _ in 0..samples {
            let s = sample_mc_direct(&ball, &params, &mut rng);
            same += usize::from(s.get(0) == s.get(1));
        }
        let p = same as f64 / samples as f64;
        let se = (0.75 * 0.25 / samples as f64).sqrt();
        assert!((p - 0.75).abs() < 3.0 * se, "p = {p}");
    }

    #[test]
    fn cluster_extremes() {
        let ball = TreeBall::new(3, 3).unwrap();
        let mut rng = rng_from_seed(3);
        let labels = UniformLabelField::sample(&ball, &mut rng);
        let one = sample_mc_cluster(&ball, &MarkovParams::new(3, 1.0).unwrap(), &labels);
        assert!(one.values.iter().all(|&x| x == one.values[0]));
        // theta = 0: every vertex is its own cluster and reads its own label
        let zero = sample_mc_cluster(&ball, &MarkovParams::new(3, 0.0).unwrap(), &labels);
        for v in 0..ball.vertex_count() {
            assert_eq!(zero.get(v), if labels.vertex_labels_2[v] < 0.5 { -1 } else { 1 });
        }
        let minus = sample_mc_cluster(&ball, &MarkovParams::new(3, -1.0).unwrap(), &labels);
        for v in 1..ball.vertex_count() {
            assert_eq!(minus.get(v), -minus.get(ball.parent(v).unwrap()));
        }
    }

    #[test]
    fn cluster_leader_is_minimum_label() {
        let ball = TreeBall::new(3, 2).unwrap();
        let mut labels = UniformLabelField::sample(&ball, &mut rng_from_seed(4));
        labels.edge_labels.fill(0.0);
        labels.vertex_labels_1.fill(0.9);
        labels.vertex_labels_1[7] = 0.1;
        labels.vertex_labels_2.fill(0.9);
        labels.vertex_labels_2[7] = 0.2;
        let s = sample_mc_cluster(&ball, &MarkovParams::new(3, 0.5).unwrap(), &labels);
        assert!(s.values.iter().all(|&x| x == -1));
        let s = sample_mc_cluster(&ball, &MarkovParams::new(3, -0.5).unwrap(), &labels);
        // vertex 7 has depth 2
        for v in 0..ball.vertex_count() {
            assert_eq!(s.get(v), if ball.depth(v).is_multiple_of(2) { -1 } else { 1 });
        }
    }

    #[test]
    fn perfect_matching_invariants() {
        let mut rng = rng_from_seed(5);
        for d in 3..6 {
            for r in 1..5 {
                let ball = TreeBall::new(d, r).unwrap();
                for _ in 0..50 {
                    sample_perfect_matching(&ball, &mut rng).unwrap().validate(&ball).unwrap();
                }
            }
        }
        assert!(sample_perfect_matching(&TreeBall::new(3, 0).unwrap(), &mut rng).is_err());
    }

    #[test]
    fn perfect_matching_second_level_marginal() {
        // the first child edge of vertex 1: P = (2/3) * (1/2) = 1/3
        let ball = TreeBall::new(3, 2).unwrap();
        let e = ball.children(1).start - 1;
        let mut rng = rng_from_seed(6);
        let samples = 60_000;
        let hits = (0..samples).filter(|_| sample_perfect_matching(&ball, &mut rng).unwrap().in_matching[e]).count();
        let p = hits as f64 / samples as f64;
        let se = (1.0 / 3.0 * 2.0 / 3.0 / samples as f64).sqrt();
        assert!((p - 1.0 / 3.0).abs() < 4.0 * se, "p = {p}");
    }

    #[test]
    fn coloring_invariants() {
        let mut rng = rng_from_seed(7);
        for d in 3..7 {
            let ball = TreeBall::new(d, 3).unwrap();
            for _ in 0..50 {
                sample_proper_coloring(&ball, &mut rng).unwrap().validate(&ball).unwrap();
            }
        }
        let ball = TreeBall::new(3, 1).unwrap();
        let bad = ColoringConfig { color: vec![1, 1, 2] };
        assert!(bad.validate(&ball).is_err());
    }

    #[test]
    fn coloring_second_level_marginal() {
        let ball = TreeBall::new(3, 2).unwrap();
        let e = ball.children(1).start - 1;
        let mut rng = rng_from_seed(8);
        let samples = 60_000;
        let mut counts = [0usize; 3];
        for _ in 0..samples {
            counts[sample_proper_coloring(&ball, &mut rng).unwrap().color[e] as usize - 1] += 1;
        }
        let se = (1.0 / 3.0 * 2.0 / 3.0 / samples as f64).sqrt();
        for c in counts {
            assert!((c as f64 / samples as f64 - 1.0 / 3.0).abs() < 4.0 * se, "{counts:?}");
        }
    }

    #[test]
    fn matching_list_invariants() {
        let mut rng = rng_from_seed(9);
        for &(d, r) in &[(3, 1), (3, 3), (4, 3), (5, 3), (6, 2)] {
            let ball = TreeBall::new(d, r).unwrap();
            for _ in 0..30 {
                let labels = UniformLabelField::sample(&ball, &mut rng);
                let config = sample_matching_list(&ball, &labels, &mut rng).unwrap();
                config.validate(&ball).unwrap();
            }
        }
    }

    #[test]
    fn matching_list_pairing_rule() {
        // whenever both ends of a removed edge see two path edges, the
        // higher-labelled edges on each side must share a class
        let ball = TreeBall::new(3, 4).unwrap();
        let mut rng = rng_from_seed(10);
        for _ in 0..50 {
            let labels = UniformLabelField::sample(&ball, &mut rng);
            let config = sample_matching_list(&ball, &labels, &mut rng).unwrap();
            let path_edges = |v: usize| -> Vec<usize> {
                ball.parent_edge(v)
                    .into_iter()
                    .chain(ball.children(v).map(|c| c - 1))
                    .filter(|&e| config.component[e].is_some())
                    .collect()
            };
            for e in config.matchings[0].edges() {
                let (a, b) = ball.edge_endpoints(e);
                if let ([a1, a2], [b1, b2]) = (&path_edges(a)[..], &path_edges(b)[..]) {
                    let u = labels.edge_labels[*a1] - labels.edge_labels[*a2];
                    let w = labels.edge_labels[*b1] - labels.edge_labels[*b2];
                    let same = config.q_class(*a1) == config.q_class(*b1);
                    assert_eq!(same, u * w > 0.0);
                }
            }
        }
    }
}
