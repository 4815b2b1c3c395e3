//! Finite simple graphs.
//!
//! Adjacency is stored in compressed rows with each row sorted. The text
//! format is an edge list: a header line `n m`, then `m` lines `u v` with
//! `u < v`, sorted lexicographically, 0-based.

use std::fmt::Write as _;
use std::io;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Default cap on whole-graph rejections in [`random_regular`].
pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    nbrs: Vec<u32>,
}

impl Graph {
    /// Builds a graph from undirected edges, rejecting loops and repeated edges.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(Error::Resource(format!("{n} vertices exceed the u32 index space")));
        }
        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::domain(format!("edge ({u}, {v}) references a vertex outside 0..{n}")));
            }
            if u == v {
                return Err(Error::domain(format!("self-loop at vertex {u}")));
            }
            lists[u].push(v as u32);
            lists[v].push(u as u32);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut nbrs = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        offsets.push(0);
        for (u, mut list) in lists.into_iter().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::domain(format!("repeated edge ({u}, {})", w[0])));
            }
            nbrs.extend_from_slice(&list);
            offsets.push(nbrs.len());
        }
        Ok(Self { offsets, nbrs })
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a simple cycle needs at least 3 vertices");
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Self::from_edges(n, edges).unwrap()
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.nbrs.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.nbrs[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.vertex_count()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn average_degree(&self) -> f64 {
        if self.vertex_count() == 0 {
            0.0
        } else {
            self.nbrs.len() as f64 / self.vertex_count() as f64
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    pub fn is_regular(&self, d: usize) -> bool {
        (0..self.vertex_count()).all(|v| self.degree(v) == d)
    }

    /// Edges `(u, v)` with `u < v` in lexicographic order. Position in this
    /// iterator is the edge index used by per-edge arrays.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.vertex_count()).flat_map(move |u| {
            self.neighbors(u).iter().map(|&v| v as usize).filter(move |&v| v > u).map(move |v| (u, v))
        })
    }

    /// Checks the structural invariants: sorted rows, no loops or repeats, symmetry.
    pub fn validate(&self) -> Result<()> {
        for u in 0..self.vertex_count() {
            let row = self.neighbors(u);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Contract(format!("row {u} is not strictly increasing")));
            }
            for &v in row {
                if v as usize == u {
                    return Err(Error::Contract(format!("self-loop at {u}")));
                }
                if !self.has_edge(v as usize, u) {
                    return Err(Error::Contract(format!("edge ({u}, {v}) is not symmetric")));
                }
            }
        }
        Ok(())
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(12 * (self.edge_count() + 1));
        writeln!(out, "{} {}", self.vertex_count(), self.edge_count()).unwrap();
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }

    pub fn write_edge_list<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_edge_list().as_bytes())
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (line, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let (n, m) = parse_pair(header, line + 1)?;
        let mut edges = Vec::with_capacity(m);
        for (line, text) in lines {
            let (u, v) = parse_pair(text, line + 1)?;
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(Error::Parse { line: 1, msg: format!("header announces {m} edges, found {}", edges.len()) });
        }
        Self::from_edges(n, edges)
    }
}

fn parse_pair(text: &str, line: usize) -> Result<(usize, usize)> {
    let mut it = text.split_whitespace().map(str::parse::<usize>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(Error::Parse { line, msg: format!("expected two non-negative integers, got `{text}`") }),
    }
}

/// Uniformly random simple `d`-regular graph on `n` vertices.
///
/// Uses the pairing model: the `n d` half-edges are matched uniformly at random
/// and any outcome with a loop or a repeated edge is thrown away in full.
/// Conditioned on acceptance the result is uniform over simple graphs.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    random_regular_with_attempts(n, d, seed, DEFAULT_MAX_ATTEMPTS)
}

pub fn random_regular_with_attempts(n: usize, d: usize, seed: u64, max_attempts: u64) -> Result<Graph> {
    if (n * d) % 2 == 1 {
        return Err(Error::domain(format!("n*d = {} is odd", n * d)));
    }
    if n <= d {
        return Err(Error::domain(format!("no simple {d}-regular graph on {n} vertices")));
    }
    let mut rng = rng_from_seed(seed);
    let mut points: Vec<u32> = (0..n).flat_map(|v| std::iter::repeat_n(v as u32, d)).collect();
    let mut adj: Vec<Vec<u32>> = vec![Vec::with_capacity(d); n];
    'attempt: for _ in 0..max_attempts {
        points.shuffle(&mut rng);
        adj.iter_mut().for_each(Vec::clear);
        for pair in points.chunks_exact(2) {
            let (u, v) = (pair[0], pair[1]);
            if u == v || adj[u as usize].contains(&v) {
                continue 'attempt;
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        let edges = adj
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&v| (u, v as usize)).filter(|&(u, v)| u < v));
        return Graph::from_edges(n, edges);
    }
    Err(Error::Resource(format!("no simple pairing within {max_attempts} attempts (n={n}, d={d})")))
}

/// Length of a shortest cycle, or `None` for a forest.
pub fn girth(g: &Graph) -> Option<u32> {
    let n = g.vertex_count();
    let mut dist = vec![u32::MAX; n];
    let mut parent = vec![u32::MAX; n];
    let mut queue = Vec::with_capacity(n);
    let mut best = u32::MAX;
    for root in 0..n {
        queue.clear();
        queue.push(root as u32);
        dist[root] = 0;
        let mut head = 0;
        'bfs: while head < queue.len() {
            let u = queue[head] as usize;
            head += 1;
            // any cycle found deeper than this cannot beat `best`
            if 2 * dist[u] + 1 >= best {
                break;
            }
            for &w in g.neighbors(u) {
                let w = w as usize;
                if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    parent[w] = u as u32;
                    queue.push(w as u32);
                } else if parent[u] != w as u32 {
                    best = best.min(dist[u] + dist[w] + 1);
                    if best == 3 {
                        break 'bfs;
                    }
                }
            }
        }
        for &v in &queue {
            dist[v as usize] = u32::MAX;
            parent[v as usize] = u32::MAX;
        }
        if best == 3 {
            break;
        }
    }
    (best != u32::MAX).then_some(best)
}

/// Reusable scratch space for bounded breadth-first searches.
#[derive(Debug, Clone)]
pub struct BallScanner {
    stamp: Vec<u32>,
    dist: Vec<u32>,
    parent: Vec<u32>,
    current: u32,
    pub(crate) order: Vec<u32>,
}

impl BallScanner {
    pub fn new(n: usize) -> Self {
        Self { stamp: vec![0; n], dist: vec![0; n], parent: vec![0; n], current: 0, order: Vec::new() }
    }

    fn next_stamp(&mut self) {
        self.current = self.current.wrapping_add(1);
        if self.current == 0 {
            self.stamp.fill(0);
            self.current = 1;
        }
    }

    #[inline]
    fn seen(&self, v: usize) -> bool {
        self.stamp[v] == self.current
    }

    /// Distance from the centre of the last scan, if `v` was reached.
    pub fn distance(&self, v: usize) -> Option<u32> {
        self.seen(v).then(|| self.dist[v])
    }

    /// Vertices of the last scan in breadth-first order.
    pub fn visited(&self) -> &[u32] {
        &self.order
    }

    /// Breadth-first search from `x` to depth `r`, recording the visit order.
    pub fn scan(&mut self, g: &Graph, x: usize, r: u32) {
        self.next_stamp();
        self.order.clear();
        self.order.push(x as u32);
        self.stamp[x] = self.current;
        self.dist[x] = 0;
        let mut head = 0;
        while head < self.order.len() {
            let u = self.order[head] as usize;
            head += 1;
            if self.dist[u] == r {
                continue;
            }
            for &w in g.neighbors(u) {
                let w = w as usize;
                if !self.seen(w) {
                    self.stamp[w] = self.current;
                    self.dist[w] = self.dist[u] + 1;
                    self.order.push(w as u32);
                }
            }
        }
    }

    /// See [`ball_is_tree_like`].
    pub fn is_tree_like(&mut self, g: &Graph, x: usize, r: u32, d: usize) -> bool {
        self.next_stamp();
        self.order.clear();
        self.order.push(x as u32);
        self.stamp[x] = self.current;
        self.dist[x] = 0;
        self.parent[x] = u32::MAX;
        let mut head = 0;
        while head < self.order.len() {
            let u = self.order[head] as usize;
            head += 1;
            if self.dist[u] == r {
                // only edges inside the outer sphere remain unchecked
                for &w in g.neighbors(u) {
                    if self.seen(w as usize) && self.parent[u] != w {
                        return false;
                    }
                }
                continue;
            }
            if g.degree(u) != d {
                return false;
            }
            for &w in g.neighbors(u) {
                let w = w as usize;
                if self.parent[u] == w as u32 {
                    continue;
                }
                if self.seen(w) {
                    return false;
                }
                self.stamp[w] = self.current;
                self.dist[w] = self.dist[u] + 1;
                self.parent[w] = u as u32;
                self.order.push(w as u32);
            }
        }
        true
    }
}

/// Whether the ball of radius `r` around `x`, as an induced subgraph, is
/// rooted-isomorphic to the radius-`r` ball of the d-regular tree: it must be
/// a tree in which every vertex closer than `r` to `x` has degree `d`.
pub fn ball_is_tree_like(g: &Graph, x: usize, r: u32, d: usize) -> bool {
    BallScanner::new(g.vertex_count()).is_tree_like(g, x, r, d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeLikeReport {
    pub r: u32,
    pub tree_like_mask: Vec<bool>,
    /// Empirical `p_{n,r}`.
    pub fraction: f64,
}

impl TreeLikeReport {
    /// Fraction of edges whose endpoints are both tree-like.
    pub fn edge_fraction(&self, g: &Graph) -> f64 {
        let m = g.edge_count();
        if m == 0 {
            return 0.0;
        }
        let both = g.edges().filter(|&(u, v)| self.tree_like_mask[u] && self.tree_like_mask[v]).count();
        both as f64 / m as f64
    }
}

pub fn tree_like_report(g: &Graph, r: u32, d: usize) -> TreeLikeReport {
    let n = g.vertex_count();
    let mask: Vec<bool> = (0..n)
        .into_par_iter()
        .map_init(|| BallScanner::new(n), |scanner, x| scanner.is_tree_like(g, x, r, d))
        .collect();
    let count = mask.iter().filter(|&&b| b).count();
    let fraction = if n == 0 { 0.0 } else { count as f64 / n as f64 };
    TreeLikeReport { r, tree_like_mask: mask, fraction }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    #[test]
    fn construction_rejects_bad_edges() {
        assert!(Graph::from_edges(3, [(0, 0)]).is_err());
        assert!(Graph::from_edges(3, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, [(0, 5)]).is_err());
        let g = Graph::complete(5);
        assert_eq!(g.edge_count(), 10);
        g.validate().unwrap();
    }

    #[test]
    fn random_regular_small() {
        let k4 = random_regular(4, 3, 1).unwrap();
        assert_eq!(k4, Graph::complete(4));
        assert!(matches!(random_regular(2, 3, 1), Err(Error::Domain(_))));
        assert!(matches!(random_regular(5, 3, 1), Err(Error::Domain(_))));
        let g = random_regular(6, 3, 7).unwrap();
        assert_eq!(g.edge_count(), 9);
        assert!(g.is_regular(3));
    }

    #[test]
    fn random_regular_many_seeds() {
        for seed in 0..100 {
            for &(n, d) in &[(20, 3), (50, 4)] {
                let g = random_regular(n, d, seed).unwrap();
                g.validate().unwrap();
                assert!(g.is_regular(d));
                assert_eq!(g.edge_count(), n * d / 2);
            }
        }
    }

    #[test]
    fn random_regular_is_reproducible() {
        assert_eq!(random_regular(100, 3, 5).unwrap(), random_regular(100, 3, 5).unwrap());
        assert_ne!(random_regular(100, 3, 5).unwrap(), random_regular(100, 3, 6).unwrap());
    }

    #[test]
    fn rejection_cap() {
        // K_{6} minus a perfect matching is the only simple 4-regular graph on 6
        // vertices, so a single attempt is very unlikely to find it
        let err = (0..20).find_map(|s| random_regular_with_attempts(6, 4, s, 1).err());
        assert!(matches!(err, Some(Error::Resource(_))));
    }

    #[test]
    fn girth_examples() {
        assert_eq!(girth(&Graph::complete(4)), Some(3));
        assert_eq!(girth(&Graph::cycle(6)), Some(6));
        assert_eq!(girth(&Graph::cycle(11)), Some(11));
        assert_eq!(girth(&path(8)), None);
        // Petersen graph
        let outer = (0..5).map(|i| (i, (i + 1) % 5));
        let spokes = (0..5).map(|i| (i, i + 5));
        let inner = (0..5).map(|i| (5 + i, 5 + (i + 2) % 5));
        let petersen = Graph::from_edges(10, outer.chain(spokes).chain(inner)).unwrap();
        assert_eq!(girth(&petersen), Some(5));
    }

    #[test]
    fn tree_likeness_examples() {
        assert!(!ball_is_tree_like(&Graph::complete(4), 0, 1, 3));
        assert!(ball_is_tree_like(&Graph::cycle(6), 0, 2, 2));
        assert!(!ball_is_tree_like(&Graph::cycle(6), 0, 3, 2));
        // odd cycle: the two far vertices are adjacent inside the outer sphere
        assert!(!ball_is_tree_like(&Graph::cycle(5), 0, 2, 2));
        assert!(ball_is_tree_like(&Graph::cycle(5), 0, 1, 2));
        assert!(ball_is_tree_like(&Graph::complete(4), 0, 0, 3));
        // degree check applies strictly inside the ball
        assert!(ball_is_tree_like(&path(5), 2, 2, 2));
        assert!(!ball_is_tree_like(&path(5), 1, 2, 2));

        assert_eq!(tree_like_report(&Graph::complete(4), 1, 3).fraction, 0.0);
        assert_eq!(tree_like_report(&Graph::cycle(6), 2, 2).fraction, 1.0);
    }

    #[test]
    fn tree_like_on_tree_ball() {
        let ball = crate::tree::TreeBall::new(3, 5).unwrap();
        let g = ball.to_graph();
        for r in 0..4 {
            let report = tree_like_report(&g, r, 3);
            for v in 0..g.vertex_count() {
                // degree d is required up to distance r - 1
                let expected = ball.depth(v) + r <= 5;
                assert_eq!(report.tree_like_mask[v], expected, "v={v} r={r}");
            }
        }
    }

    #[test]
    fn large_girth_means_everywhere_tree_like() {
        // cycles are 2-regular with girth n
        for n in 8..20 {
            let g = Graph::cycle(n);
            let girth = girth(&g).unwrap();
            for r in 0..n as u32 {
                if girth > 2 * r + 1 {
                    assert_eq!(tree_like_report(&g, r, 2).fraction, 1.0);
                }
            }
        }
        // and for cubic graphs found by search
        let mut found = 0;
        for seed in 0..200 {
            let g = random_regular(40, 3, seed).unwrap();
            if girth(&g).unwrap() >= 4 {
                assert_eq!(tree_like_report(&g, 1, 3).fraction, 1.0);
                found += 1;
            }
        }
        assert!(found > 0);
    }

    #[test]
    fn edge_list_roundtrip() {
        let g = random_regular(30, 3, 11).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("30 45\n"));
        let back = Graph::parse_edge_list(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_edge_list(), text);
        assert_eq!(Graph::complete(3).to_edge_list(), "3 3\n0 1\n0 2\n1 2\n");
    }

    #[test]
    fn edge_list_errors() {
        assert!(matches!(Graph::parse_edge_list(""), Err(Error::Parse { .. })));
        assert!(matches!(Graph::parse_edge_list("3 2\n0 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(Graph::parse_edge_list("3 1\n0 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(Graph::parse_edge_list("3 2\n0 1\n1 0\n").is_err());
    }
}
