//! Partition-preserving multilevel refinement.
//!
//! A coarse vertex is a cluster of fine vertices together with a fixed
//! orientation of each member: a member lies on the cluster's side, or on the
//! opposite one when its orientation bit is set. Moving a cluster flips every
//! member. Contractions always follow an edge that is currently good for the
//! mode (uncut for `min`, cut for `max`), so the coarse partition is exactly the
//! current one. Each accepted move sequence keeps the defect at most one and
//! strictly improves the cut.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use crate::graph::Graph;
use crate::math::CutMode;
use crate::rng::substream_rng;

/// Weighted graph of oriented clusters in CSR form.
///
/// A coarse edge has weight `cut_if_differ` for fine edges cut when the two
/// clusters sit on different sides and `cut_if_equal` for those cut when they
/// sit on the same side.
#[derive(Debug, Clone)]
pub(super) struct ClusterGraph {
    offsets: Vec<usize>,
    nbrs: Vec<u32>,
    cut_if_differ: Vec<u32>,
    cut_if_equal: Vec<u32>,
    /// Members on the cluster's side.
    aligned: Vec<u32>,
    /// Members on the opposite side.
    opposed: Vec<u32>,
}

/// Fine-to-coarse map of one contraction.
struct Contraction {
    cluster: Vec<u32>,
    /// Set when the vertex lies opposite to its cluster's side.
    flipped: Vec<bool>,
}

impl ClusterGraph {
    pub(super) fn from_graph(g: &Graph) -> Self {
        let n = g.vertex_count();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut nbrs = Vec::new();
        for v in 0..n {
            nbrs.extend_from_slice(g.neighbors(v));
            offsets.push(nbrs.len());
        }
        let m = nbrs.len();
        Self {
            offsets,
            nbrs,
            cut_if_differ: vec![1; m],
            cut_if_equal: vec![0; m],
            aligned: vec![1; n],
            opposed: vec![0; n],
        }
    }

    fn len(&self) -> usize {
        self.aligned.len()
    }

    fn size(&self, v: usize) -> u32 {
        self.aligned[v] + self.opposed[v]
    }

    /// `(neighbour, cut weight now, cut weight after flipping either end)`.
    fn adjacent<'a>(&'a self, side: &'a [bool], v: usize) -> impl Iterator<Item = (usize, i64, i64)> + 'a {
        (self.offsets[v]..self.offsets[v + 1]).map(move |i| {
            let u = self.nbrs[i] as usize;
            let (d, e) = (i64::from(self.cut_if_differ[i]), i64::from(self.cut_if_equal[i]));
            if side[u] != side[v] {
                (u, d, e)
            } else {
                (u, e, d)
            }
        })
    }

    fn gain(&self, side: &[bool], v: usize, mode: CutMode) -> i64 {
        let delta: i64 = self.adjacent(side, v).map(|(_, now, flipped)| flipped - now).sum();
        match mode {
            CutMode::Min => -delta,
            CutMode::Max => delta,
        }
    }

    /// Fine vertices in S.
    fn inside(&self, side: &[bool]) -> i64 {
        (0..self.len()).map(|v| i64::from(if side[v] { self.aligned[v] } else { self.opposed[v] })).sum()
    }

    /// Change of `inside` when `v` switches sides.
    fn inside_shift(&self, side: &[bool], v: usize) -> i64 {
        let net = i64::from(self.aligned[v]) - i64::from(self.opposed[v]);
        if side[v] {
            -net
        } else {
            net
        }
    }

    /// Contracts a matching along edges that are good for the mode, visiting
    /// vertices in an order drawn from `seed`.
    fn coarsen(
        &self,
        side: &[bool],
        mode: CutMode,
        seed: u64,
        max_size: u32,
    ) -> (ClusterGraph, Vec<bool>, Contraction) {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut substream_rng(seed, n as u64));
        let mut cluster = vec![u32::MAX; n];
        let mut reps = Vec::new();
        for &v in &order {
            if cluster[v] != u32::MAX {
                continue;
            }
            let mut best: Option<(i64, u32, usize)> = None;
            for (u, now, flipped) in self.adjacent(side, v) {
                if cluster[u] != u32::MAX || self.size(u) + self.size(v) > max_size {
                    continue;
                }
                let good = match mode {
                    CutMode::Min => flipped,
                    CutMode::Max => now,
                };
                if good == 0 {
                    continue;
                }
                // heaviest good edge, then smallest partner, then lowest index
                if best.is_none_or(|(bg, bs, bu)| {
                    (good, std::cmp::Reverse(self.size(u)), std::cmp::Reverse(u))
                        > (bg, std::cmp::Reverse(bs), std::cmp::Reverse(bu))
                }) {
                    best = Some((good, self.size(u), u));
                }
            }
            let c = reps.len() as u32;
            cluster[v] = c;
            if let Some((_, _, u)) = best {
                cluster[u] = c;
            }
            reps.push(v);
        }
        let m = reps.len();
        // a member is flipped when it sits opposite to its cluster's representative
        let flipped: Vec<bool> = (0..n).map(|v| side[v] != side[reps[cluster[v] as usize]]).collect();
        let coarse_side: Vec<bool> = reps.iter().map(|&r| side[r]).collect();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
        for v in 0..n {
            members[cluster[v] as usize].push(v);
        }
        let mut offsets = Vec::with_capacity(m + 1);
        offsets.push(0);
        let (mut nbrs, mut cut_if_differ, mut cut_if_equal) = (Vec::new(), Vec::new(), Vec::new());
        let (mut aligned, mut opposed) = (Vec::with_capacity(m), Vec::with_capacity(m));
        let mut slot = vec![usize::MAX; m];
        for (c, group) in members.iter().enumerate() {
            let start = nbrs.len();
            let (mut a, mut b) = (0, 0);
            for &v in group {
                if flipped[v] {
                    a += self.opposed[v];
                    b += self.aligned[v];
                } else {
                    a += self.aligned[v];
                    b += self.opposed[v];
                }
                for i in self.offsets[v]..self.offsets[v + 1] {
                    let u = self.nbrs[i] as usize;
                    let cu = cluster[u] as usize;
                    if cu == c {
                        continue;
                    }
                    let (mut d, mut e) = (self.cut_if_differ[i], self.cut_if_equal[i]);
                    if flipped[v] != flipped[u] {
                        std::mem::swap(&mut d, &mut e);
                    }
                    if slot[cu] == usize::MAX || slot[cu] < start {
                        slot[cu] = nbrs.len();
                        nbrs.push(cu as u32);
                        cut_if_differ.push(d);
                        cut_if_equal.push(e);
                    } else {
                        cut_if_differ[slot[cu]] += d;
                        cut_if_equal[slot[cu]] += e;
                    }
                }
            }
            aligned.push(a);
            opposed.push(b);
            offsets.push(nbrs.len());
        }
        let coarse = ClusterGraph { offsets, nbrs, cut_if_differ, cut_if_equal, aligned, opposed };
        (coarse, coarse_side, Contraction { cluster, flipped })
    }

    /// Move chains repeated while they improve. Returns the total improvement.
    fn refine(&self, side: &mut [bool], mode: CutMode, slack: i64, max_chains: usize) -> i64 {
        let mut improved = 0;
        for _ in 0..max_chains {
            let gain = self.chain(side, mode, slack);
            if gain == 0 {
                break;
            }
            improved += gain;
        }
        improved
    }

    /// Tentative moves, each vertex at most once, with the fine defect allowed
    /// up to `slack` in between; keeps the best strictly improving prefix that
    /// ends with defect at most one.
    fn chain(&self, side: &mut [bool], mode: CutMode, slack: i64) -> i64 {
        let n = self.len();
        let total: i64 = (0..n).map(|v| i64::from(self.size(v))).sum();
        let mut inside = self.inside(side);
        let mut gain: Vec<i64> = (0..n).map(|v| self.gain(side, v, mode)).collect();
        // keys (-gain, v): the first entry is the best move, ties by index
        let mut queues = [BTreeSet::new(), BTreeSet::new()];
        for v in 0..n {
            queues[usize::from(side[v])].insert((-gain[v], v));
        }
        let mut locked = vec![false; n];
        let mut moves = Vec::new();
        let (mut sum, mut best_sum, mut best_len) = (0i64, 0i64, 0usize);
        let patience = 64.max(n / 20);
        loop {
            let mut choice: Option<(i64, usize)> = None;
            for queue in &queues {
                let fits = queue
                    .iter()
                    .take(8)
                    .find(|&&(_, v)| (2 * (inside + self.inside_shift(side, v)) - total).abs() <= slack);
                if let Some(&(g, v)) = fits {
                    if choice.is_none_or(|(b, _)| -g > b) {
                        choice = Some((-g, v));
                    }
                }
            }
            let Some((g, v)) = choice else { break };
            queues[usize::from(side[v])].remove(&(-gain[v], v));
            locked[v] = true;
            inside += self.inside_shift(side, v);
            side[v] = !side[v];
            for i in self.offsets[v]..self.offsets[v + 1] {
                let u = self.nbrs[i] as usize;
                if !locked[u] {
                    let su = usize::from(side[u]);
                    queues[su].remove(&(-gain[u], u));
                    gain[u] = self.gain(side, u, mode);
                    queues[su].insert((-gain[u], u));
                }
            }
            moves.push(v);
            sum += g;
            if sum > best_sum && (2 * inside - total).abs() <= 1 {
                best_sum = sum;
                best_len = moves.len();
            }
            if moves.len() - best_len > patience {
                break;
            }
        }
        for &v in &moves[best_len..] {
            side[v] = !side[v];
        }
        best_sum
    }
}

/// One V-cycle: coarsen along the current partition, then refine from the
/// coarsest level back to the input graph. Returns the improvement.
pub(super) fn v_cycle(g: &ClusterGraph, side: &mut [bool], mode: CutMode, seed: u64) -> i64 {
    let n = g.len();
    let max_size = (n / 100).max(2) as u32;
    let slack = (n as i64 / 100).max(4);
    let mut graphs = vec![g.clone()];
    let mut sides = vec![side.to_vec()];
    let mut maps = Vec::new();
    while graphs.last().unwrap().len() > 64 {
        let level = maps.len() as u64;
        let (coarse, coarse_side, map) =
            graphs.last().unwrap().coarsen(sides.last().unwrap(), mode, seed.wrapping_add(level << 32), max_size);
        if coarse.len() * 10 > graphs.last().unwrap().len() * 9 {
            break;
        }
        graphs.push(coarse);
        sides.push(coarse_side);
        maps.push(map);
    }
    let mut improved = graphs.last().unwrap().refine(sides.last_mut().unwrap(), mode, slack, 8);
    while let Some(map) = maps.pop() {
        graphs.pop();
        let coarse_side = sides.pop().unwrap();
        let fine_side = sides.last_mut().unwrap();
        for v in 0..fine_side.len() {
            fine_side[v] = coarse_side[map.cluster[v] as usize] != map.flipped[v];
        }
        improved += graphs.last().unwrap().refine(fine_side, mode, slack, 8);
    }
    side.copy_from_slice(&sides[0]);
    improved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_regular;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn fine_cut(g: &Graph, side: &[bool]) -> i64 {
        g.edges().filter(|&(u, v)| side[u] != side[v]).count() as i64
    }

    fn coarse_cut(cg: &ClusterGraph, side: &[bool]) -> i64 {
        let twice: i64 = (0..cg.len()).flat_map(|v| cg.adjacent(side, v).map(|(_, now, _)| now)).sum();
        twice / 2
    }

    #[test]
    fn contraction_preserves_cut_and_side_counts() {
        let g = random_regular(400, 3, 8).unwrap();
        let mut rng = rng_from_seed(2);
        let side: Vec<bool> = (0..400).map(|_| rng.random()).collect();
        for mode in [CutMode::Min, CutMode::Max] {
            let fine = ClusterGraph::from_graph(&g);
            let (coarse, coarse_side, map) = fine.coarsen(&side, mode, 5, 4);
            assert!(coarse.len() < fine.len());
            let projected: Vec<bool> =
                (0..400).map(|v| coarse_side[map.cluster[v] as usize] != map.flipped[v]).collect();
            assert_eq!(projected, side);
            // internal edges are good for the mode, so they are not counted
            let internal = g.edges().filter(|&(u, v)| map.cluster[u] == map.cluster[v]).count() as i64;
            let expected = match mode {
                CutMode::Min => fine_cut(&g, &side),
                CutMode::Max => fine_cut(&g, &side) - internal,
            };
            assert_eq!(coarse_cut(&coarse, &coarse_side), expected);
            assert_eq!(coarse.inside(&coarse_side), side.iter().filter(|&&s| s).count() as i64);
        }
    }

    #[test]
    fn v_cycle_is_monotone_and_balanced() {
        for seed in 0..6 {
            let g = random_regular(1000, 3, seed).unwrap();
            let cg = ClusterGraph::from_graph(&g);
            for mode in [CutMode::Min, CutMode::Max] {
                let mut side: Vec<bool> = (0..1000).map(|v| v % 2 == 0).collect();
                let before = fine_cut(&g, &side);
                let gained = v_cycle(&cg, &mut side, mode, seed);
                let after = fine_cut(&g, &side);
                assert_eq!(side.iter().filter(|&&s| s).count(), 500);
                let change = match mode {
                    CutMode::Min => before - after,
                    CutMode::Max => after - before,
                };
                assert_eq!(change, gained);
                assert!(gained >= 0);
            }
        }
    }
}
