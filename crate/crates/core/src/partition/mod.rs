//! Cuts, bisections and the two graph experiments built on the Gaussian block
//! factor.
//!
//! A side assignment is a `Vec<bool>` with `true` meaning "in S". Edges are
//! indexed in the order of [`Graph::edges`].

mod multilevel;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{sign_field, BlockFactorSpec, BlockSign, GraphEmulator};
use crate::graph::{girth, Graph};
use crate::math::{bisection_bound, sign_flip_probability, CutMode};
use crate::rng::derive_substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Raw,
    Rebalanced,
    Improved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutResult {
    pub side: Vec<bool>,
    pub cut_size: usize,
    /// `cut_size / n`.
    pub fraction: f64,
    pub balance_defect: usize,
    pub mode: CutMode,
    pub stage: Stage,
}

impl CutResult {
    pub fn new(g: &Graph, side: Vec<bool>, mode: CutMode, stage: Stage) -> Self {
        let cut = cut_size(g, &side);
        let n = g.vertex_count().max(1);
        Self {
            balance_defect: balance_defect(&side),
            cut_size: cut,
            fraction: cut as f64 / n as f64,
            side,
            mode,
            stage,
        }
    }
}

/// Number of edges with endpoints on opposite sides, by edge scan.
pub fn cut_size(g: &Graph, side: &[bool]) -> usize {
    g.edges().filter(|&(u, v)| side[u] != side[v]).count()
}

/// Number of cut edges as half the sum of per-vertex boundary degrees.
pub fn cut_size_by_boundary(g: &Graph, side: &[bool]) -> usize {
    let twice: usize = (0..g.vertex_count()).map(|v| cross_degree(g, side, v)).sum();
    twice / 2
}

/// `||S| - |V \ S||`.
pub fn balance_defect(side: &[bool]) -> usize {
    let inside = side.iter().filter(|&&s| s).count();
    inside.abs_diff(side.len() - inside)
}

fn cross_degree(g: &Graph, side: &[bool], v: usize) -> usize {
    g.neighbors(v).iter().filter(|&&u| side[u as usize] != side[v]).count()
}

/// Change in cut size when `v` switches sides.
fn flip_delta(g: &Graph, side: &[bool], v: usize) -> i64 {
    let cross = cross_degree(g, side, v) as i64;
    g.degree(v) as i64 - 2 * cross
}

/// Improvement in the mode's direction when `v` switches sides.
fn flip_gain(g: &Graph, side: &[bool], v: usize, mode: CutMode) -> i64 {
    match mode {
        CutMode::Min => -flip_delta(g, side, v),
        CutMode::Max => flip_delta(g, side, v),
    }
}

/// Moves vertices from the larger side until the defect is at most one.
///
/// Each step considers only the smallest-degree vertices of the larger side
/// and flips the one whose cut change is best for the mode, ties by index.
pub fn rebalance(g: &Graph, side: &[bool], mode: CutMode) -> Vec<bool> {
    let mut side = side.to_vec();
    let mut inside = side.iter().filter(|&&s| s).count();
    let n = side.len();
    while inside.abs_diff(n - inside) > 1 {
        let larger = inside > n - inside;
        let min_degree = (0..n).filter(|&v| side[v] == larger).map(|v| g.degree(v)).min().unwrap();
        let mut best: Option<(i64, usize)> = None;
        for v in (0..n).filter(|&v| side[v] == larger && g.degree(v) == min_degree) {
            let gain = flip_gain(g, &side, v, mode);
            if best.is_none_or(|(b, _)| gain > b) {
                best = Some((gain, v));
            }
        }
        let (_, v) = best.unwrap();
        side[v] = !side[v];
        if larger {
            inside -= 1;
        } else {
            inside += 1;
        }
    }
    side
}

const NIL: usize = usize::MAX;

/// Unlocked vertices of both sides bucketed by gain, for constant-time access
/// to the best candidates.
struct GainBuckets {
    offset: i64,
    width: usize,
    /// `heads[s * width + (gain + offset)]`
    heads: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    gain: Vec<i64>,
    present: Vec<bool>,
    top: [i64; 2],
}

impl GainBuckets {
    fn new(n: usize, max_degree: usize) -> Self {
        let offset = max_degree as i64;
        let width = 2 * max_degree + 1;
        Self {
            offset,
            width,
            heads: vec![NIL; 2 * width],
            next: vec![NIL; n],
            prev: vec![NIL; n],
            gain: vec![0; n],
            present: vec![false; n],
            top: [-offset; 2],
        }
    }

    fn slot(&self, s: usize, gain: i64) -> usize {
        s * self.width + (gain + self.offset) as usize
    }

    fn insert(&mut self, v: usize, s: usize, gain: i64) {
        let slot = self.slot(s, gain);
        let head = self.heads[slot];
        self.next[v] = head;
        self.prev[v] = NIL;
        if head != NIL {
            self.prev[head] = v;
        }
        self.heads[slot] = v;
        self.gain[v] = gain;
        self.present[v] = true;
        self.top[s] = self.top[s].max(gain);
    }

    fn remove(&mut self, v: usize, s: usize) {
        let slot = self.slot(s, self.gain[v]);
        let (p, nx) = (self.prev[v], self.next[v]);
        if p == NIL {
            self.heads[slot] = nx;
        } else {
            self.next[p] = nx;
        }
        if nx != NIL {
            self.prev[nx] = p;
        }
        self.present[v] = false;
    }

    fn best(&mut self, s: usize) -> Option<usize> {
        self.descending(s).next()
    }

    /// Unlocked vertices of side `s` in decreasing gain order.
    fn descending(&mut self, s: usize) -> impl Iterator<Item = usize> + '_ {
        while self.top[s] > -self.offset && self.heads[self.slot(s, self.top[s])] == NIL {
            self.top[s] -= 1;
        }
        let top = self.top[s];
        let (heads, next, offset, width) = (&self.heads, &self.next, self.offset, self.width);
        (-offset..=top).rev().flat_map(move |g| {
            let mut v = heads[s * width + (g + offset) as usize];
            std::iter::from_fn(move || {
                (v != NIL).then(|| {
                    let out = v;
                    v = next[v];
                    out
                })
            })
        })
    }
}

fn side_index(side: &[bool], v: usize) -> usize {
    usize::from(side[v])
}

/// Best partner for `x` on the other side: the gain of the swap beyond `x`'s
/// own gain, together with the partner.
fn best_partner(g: &Graph, side: &[bool], buckets: &mut GainBuckets, x: usize, mode: CutMode) -> Option<(i64, usize)> {
    let other = 1 - side_index(side, x);
    // an edge between the two swapped vertices stays cut but is counted by both gains
    let adjacent_correction = match mode {
        CutMode::Min => -2,
        CutMode::Max => 2,
    };
    let nbrs = g.neighbors(x);
    let mut best: Option<(i64, usize)> = None;
    let free = buckets.descending(other).find(|&y| !nbrs.contains(&(y as u32)));
    if let Some(y) = free {
        best = Some((buckets.gain[y], y));
    }
    for &y in nbrs {
        let y = y as usize;
        if buckets.present[y] && side_index(side, y) == other {
            let cand = buckets.gain[y] + adjacent_correction;
            if best.is_none_or(|(b, bv)| cand > b || (cand == b && y < bv)) {
                best = Some((cand, y));
            }
        }
    }
    best
}

/// Strictly improving single flips from the larger side; only possible when
/// the defect is one.
fn single_flip_sweep(g: &Graph, side: &mut [bool], mode: CutMode) -> usize {
    let n = side.len();
    let mut inside = side.iter().filter(|&&s| s).count();
    let mut applied = 0;
    for v in 0..n {
        if inside.abs_diff(n - inside) != 1 {
            break;
        }
        let larger = inside > n - inside;
        if side[v] == larger && flip_gain(g, side, v, mode) > 0 {
            side[v] = !side[v];
            if larger {
                inside -= 1;
            } else {
                inside += 1;
            }
            applied += 1;
        }
    }
    applied
}

/// One chain of tentative swaps; keeps the prefix with the largest strictly
/// positive total gain and undoes the rest. Returns the number of swaps kept.
fn swap_chain(g: &Graph, side: &mut [bool], mode: CutMode) -> usize {
    let n = side.len();
    let mut buckets = GainBuckets::new(n, g.max_degree());
    for v in 0..n {
        buckets.insert(v, side_index(side, v), flip_gain(g, side, v, mode));
    }
    let mut moves: Vec<(usize, usize)> = Vec::new();
    let (mut total, mut best_total, mut best_len) = (0i64, 0i64, 0usize);
    loop {
        let mut choice: Option<(i64, usize, usize)> = None;
        for s in 0..2 {
            let Some(x) = buckets.best(s) else { continue };
            if let Some((pg, y)) = best_partner(g, side, &mut buckets, x, mode) {
                let cand = buckets.gain[x] + pg;
                if choice.is_none_or(|(b, _, _)| cand > b) {
                    choice = Some((cand, x, y));
                }
            }
        }
        let Some((gain, x, y)) = choice else { break };
        for v in [x, y] {
            buckets.remove(v, side_index(side, v));
        }
        side[x] = !side[x];
        side[y] = !side[y];
        for v in [x, y] {
            for &u in g.neighbors(v) {
                let u = u as usize;
                if buckets.present[u] {
                    let s = side_index(side, u);
                    buckets.remove(u, s);
                    buckets.insert(u, s, flip_gain(g, side, u, mode));
                }
            }
        }
        moves.push((x, y));
        total += gain;
        if total > best_total {
            best_total = total;
            best_len = moves.len();
        }
    }
    for &(x, y) in &moves[best_len..] {
        side[x] = !side[x];
        side[y] = !side[y];
    }
    best_len
}

/// One chain of tentative single moves, each vertex at most once, with the
/// size difference allowed to drift up to `slack` in between. Keeps the best
/// strictly improving prefix that ends with defect at most one.
fn move_chain(g: &Graph, side: &mut [bool], mode: CutMode, slack: usize) -> usize {
    let n = side.len();
    let mut buckets = GainBuckets::new(n, g.max_degree());
    for v in 0..n {
        buckets.insert(v, side_index(side, v), flip_gain(g, side, v, mode));
    }
    let mut inside = side.iter().filter(|&&s| s).count() as i64;
    let n_i = n as i64;
    let mut moves: Vec<usize> = Vec::new();
    let (mut total, mut best_total, mut best_len) = (0i64, 0i64, 0usize);
    loop {
        let mut choice: Option<(i64, usize)> = None;
        for s in 0..2 {
            // moving out of side s changes |S| by -1 for s = 1, +1 for s = 0
            let after = if s == 1 { inside - 1 } else { inside + 1 };
            if (2 * after - n_i).unsigned_abs() as usize > slack.max(1) {
                continue;
            }
            if let Some(x) = buckets.best(s) {
                let gain = buckets.gain[x];
                if choice.is_none_or(|(b, _)| gain > b) {
                    choice = Some((gain, x));
                }
            }
        }
        let Some((gain, x)) = choice else { break };
        let s = side_index(side, x);
        buckets.remove(x, s);
        side[x] = !side[x];
        inside += if s == 1 { -1 } else { 1 };
        for &u in g.neighbors(x) {
            let u = u as usize;
            if buckets.present[u] {
                let su = side_index(side, u);
                buckets.remove(u, su);
                buckets.insert(u, su, flip_gain(g, side, u, mode));
            }
        }
        moves.push(x);
        total += gain;
        if total > best_total && (2 * inside - n_i).abs() <= 1 {
            best_total = total;
            best_len = moves.len();
        }
    }
    for &x in &moves[best_len..] {
        side[x] = !side[x];
    }
    best_len
}

/// Balanced local search.
///
/// Each pass runs, in order: a sweep of strictly improving single flips (only
/// possible when the defect is one); a chain of cross-pair swaps; a chain of
/// single moves with bounded drift in between; and one multilevel cycle that
/// moves oriented clusters of vertices. Every chain keeps only its best
/// strictly improving prefix that ends with defect at most one, so the cut
/// never gets worse. Cycles draw fresh random coarsenings, so the search
/// continues until `STALL_PASSES` consecutive passes change nothing, or for
/// at most `max_passes` passes.
/// Consecutive passes without change after which the search stops.
pub const STALL_PASSES: usize = 10;

pub fn local_improve(g: &Graph, side: &[bool], mode: CutMode, max_passes: usize) -> Result<Vec<bool>> {
    if side.len() != g.vertex_count() {
        return Err(Error::Contract(format!("side has {} entries for {} vertices", side.len(), g.vertex_count())));
    }
    if balance_defect(side) > 1 {
        return Err(Error::Contract("local search needs a bisection (balance defect at most 1)".into()));
    }
    let mut side = side.to_vec();
    let weighted = multilevel::ClusterGraph::from_graph(g);
    let mut stalled = 0;
    for pass in 0..max_passes {
        let flips = single_flip_sweep(g, &mut side, mode);
        let swaps = swap_chain(g, &mut side, mode);
        let moves = move_chain(g, &mut side, mode, 2);
        let gained = multilevel::v_cycle(&weighted, &mut side, mode, pass as u64);
        if flips + swaps + moves == 0 && gained == 0 {
            stalled += 1;
            if stalled == STALL_PASSES {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok(side)
}

/// The three stages of one bisection run, with the quantities needed to judge
/// the raw stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionRun {
    pub raw: CutResult,
    pub rebalanced: CutResult,
    pub improved: CutResult,
    /// Fraction of vertices where the block factor applied.
    pub tree_like_fraction: f64,
    /// Fraction of edges whose endpoints both applied it.
    pub tree_like_edge_fraction: f64,
    /// Expected raw fraction: tree-like edges are cut with the finite-radius
    /// sign-flip probability, the others with probability one half.
    pub predicted_raw_fraction: f64,
    /// Limit of the raw fraction as the radius grows on graphs of large girth.
    pub asymptotic_bound: f64,
    pub warnings: Vec<String>,
}

pub const DEFAULT_MAX_PASSES: usize = 200;

/// Sign-rounds the emulated block factor (constant-sign weights for `min`,
/// alternating for `max`), rebalances and improves locally.
pub fn bisection_heuristic(
    g: &Graph,
    d: u32,
    n_radius: u32,
    mode: CutMode,
    seed: u64,
    max_passes: usize,
) -> Result<BisectionRun> {
    let sign = match mode {
        CutMode::Min => BlockSign::Plus,
        CutMode::Max => BlockSign::Minus,
    };
    let spec = BlockFactorSpec::new(d, n_radius, sign)?;
    let mut warnings = Vec::new();
    let avg = g.average_degree();
    if (avg - f64::from(d)).abs() > 0.5 {
        warnings.push(format!("average degree {avg:.3} is far from d = {d}"));
    }
    let emulator = GraphEmulator::new(g, spec);
    let field = emulator.sample(derive_substream(seed, 0));
    let spins = sign_field(&field, derive_substream(seed, 1));
    let side: Vec<bool> = spins.values.iter().map(|&s| s > 0).collect();

    let raw = CutResult::new(g, side, mode, Stage::Raw);
    let rebalanced = CutResult::new(g, rebalance(g, &raw.side, mode), mode, Stage::Rebalanced);
    let improved = CutResult::new(g, local_improve(g, &rebalanced.side, mode, max_passes)?, mode, Stage::Improved);

    let tree_like = emulator.tree_like();
    let edge_fraction = tree_like.edge_fraction(g);
    let p = sign_flip_probability(spec.neighbor_correlation())?;
    let per_vertex = g.edge_count() as f64 / g.vertex_count().max(1) as f64;
    Ok(BisectionRun {
        raw,
        rebalanced,
        improved,
        tree_like_fraction: tree_like.fraction,
        tree_like_edge_fraction: edge_fraction,
        predicted_raw_fraction: per_vertex * (edge_fraction * p + (1.0 - edge_fraction) * 0.5),
        asymptotic_bound: bisection_bound(d, mode)?,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeCutSample {
    /// Cut of the first replica: edges whose endpoints got opposite signs.
    pub in_cut: Vec<bool>,
    pub per_edge_frequency: Vec<f64>,
    pub replicas: usize,
    /// Edges whose endpoints both lie where the block factor applied.
    pub defined_edges: Vec<bool>,
    /// Minimum frequency over defined edges, if any.
    pub min_defined_frequency: Option<f64>,
    /// `arccos(block_factor_correlation(d, n)) / pi`.
    pub theoretical_bound: f64,
    pub girth: Option<u32>,
    /// `girth >= 2n + 1`, under which the bound holds on every edge.
    pub girth_sufficient: bool,
}

/// Repeats the alternating-weight block factor `replicas` times on
/// independent substreams and records how often each edge is cut.
pub fn edge_cut_experiment(g: &Graph, d: u32, n_radius: u32, replicas: usize, seed: u64) -> Result<EdgeCutSample> {
    if replicas == 0 {
        return Err(Error::domain("need at least one replica"));
    }
    let spec = BlockFactorSpec::new(d, n_radius, BlockSign::Minus)?;
    let emulator = GraphEmulator::new(g, spec);
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let cut_of = |r: usize| -> Vec<bool> {
        let r = r as u64;
        let field = emulator.sample(derive_substream(seed, 2 * r));
        let spins = sign_field(&field, derive_substream(seed, 2 * r + 1));
        edges.iter().map(|&(u, v)| spins.values[u] != spins.values[v]).collect()
    };
    let in_cut = cut_of(0);
    let counts = (1..replicas)
        .into_par_iter()
        .fold(
            || vec![0u64; edges.len()],
            |mut acc, r| {
                for (a, c) in acc.iter_mut().zip(cut_of(r)) {
                    *a += u64::from(c);
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; edges.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let per_edge_frequency: Vec<f64> =
        counts.iter().zip(&in_cut).map(|(&c, &first)| (c + u64::from(first)) as f64 / replicas as f64).collect();
    let mask = &emulator.tree_like().tree_like_mask;
    let defined_edges: Vec<bool> = edges.iter().map(|&(u, v)| mask[u] && mask[v]).collect();
    let min_defined_frequency =
        per_edge_frequency.iter().zip(&defined_edges).filter(|(_, &def)| def).map(|(&f, _)| f).min_by(f64::total_cmp);
    let girth = girth(g);
    Ok(EdgeCutSample {
        in_cut,
        per_edge_frequency,
        replicas,
        defined_edges,
        min_defined_frequency,
        theoretical_bound: sign_flip_probability(spec.neighbor_correlation())?,
        girth,
        girth_sufficient: girth.is_none_or(|girth| girth > 2 * n_radius),
    })
}
