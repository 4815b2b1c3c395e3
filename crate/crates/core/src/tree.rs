//! Finite balls `B_r` of the d-regular tree.
//!
//! Vertices are numbered breadth-first, so each sphere is a contiguous index
//! range and `depth` is nondecreasing in the index. Every non-root vertex `v`
//! owns the edge to its parent, which gets edge index `v - 1`.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::math::sphere_size;

/// Largest ball built by [`TreeBall::new`].
pub const DEFAULT_VERTEX_BUDGET: u64 = 1 << 26;

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeBall {
    d: u32,
    radius: u32,
    parent: Vec<u32>,
    depth: Vec<u32>,
    first_child: Vec<u32>,
    sphere_start: Vec<usize>,
}

impl TreeBall {
    pub fn new(d: u32, radius: u32) -> Result<Self> {
        Self::with_budget(d, radius, DEFAULT_VERTEX_BUDGET)
    }

    pub fn with_budget(d: u32, radius: u32, max_vertices: u64) -> Result<Self> {
        if d < 3 {
            return Err(Error::domain(format!("tree degree must be at least 3, got {d}")));
        }
        let mut total: u64 = 0;
        for k in 0..=radius {
            total =
                sphere_size(d, k).ok().and_then(|s| total.checked_add(s)).filter(|&t| t <= max_vertices).ok_or_else(
                    || {
                        Error::Resource(format!(
                            "ball B_{radius} of the {d}-regular tree exceeds the budget of {max_vertices} vertices"
                        ))
                    },
                )?;
        }
        let count = total as usize;

        let mut parent = Vec::with_capacity(count);
        let mut depth = Vec::with_capacity(count);
        let mut first_child = Vec::with_capacity(count);
        let mut sphere_start = Vec::with_capacity(radius as usize + 2);
        parent.push(NO_PARENT);
        depth.push(0);
        sphere_start.push(0);
        sphere_start.push(1);
        let mut next = 1u32;
        for k in 0..radius {
            let range = sphere_start[k as usize]..sphere_start[k as usize + 1];
            let kids = if k == 0 { d } else { d - 1 };
            for v in range {
                first_child.push(next);
                for _ in 0..kids {
                    parent.push(v as u32);
                    depth.push(k + 1);
                }
                next += kids;
            }
            sphere_start.push(next as usize);
        }
        first_child.resize(count, next);
        debug_assert_eq!(parent.len(), count);

        Ok(Self { d, radius, parent, depth, first_child, sphere_start })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    pub fn edge_count(&self) -> usize {
        self.vertex_count() - 1
    }

    pub fn depth(&self, v: usize) -> u32 {
        self.depth[v]
    }

    pub fn depths(&self) -> &[u32] {
        &self.depth
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        match self.parent[v] {
            NO_PARENT => None,
            p => Some(p as usize),
        }
    }

    pub fn child_count(&self, v: usize) -> usize {
        match self.depth[v] {
            k if k == self.radius => 0,
            0 => self.d as usize,
            _ => self.d as usize - 1,
        }
    }

    pub fn children(&self, v: usize) -> Range<usize> {
        let start = self.first_child[v] as usize;
        start..start + self.child_count(v)
    }

    /// Parent first, then children.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent(v).into_iter().chain(self.children(v))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.child_count(v) + usize::from(v != 0)
    }

    /// The edge joining `v` to its parent.
    pub fn parent_edge(&self, v: usize) -> Option<usize> {
        (v != 0).then(|| v - 1)
    }

    /// `(parent, child)` endpoints of edge `e`.
    pub fn edge_endpoints(&self, e: usize) -> (usize, usize) {
        let child = e + 1;
        (self.parent[child] as usize, child)
    }

    /// Index range of the vertices at distance `n` from the root.
    pub fn sphere(&self, n: u32) -> Result<Range<usize>> {
        if n > self.radius {
            return Err(Error::domain(format!("sphere {n} lies outside a ball of radius {}", self.radius)));
        }
        Ok(self.sphere_start[n as usize]..self.sphere_start[n as usize + 1])
    }

    pub fn sphere_vertices(&self, n: u32) -> Result<Vec<usize>> {
        Ok(self.sphere(n)?.collect())
    }

    /// Vertices at depth at most `k` (a prefix of the index order).
    pub fn inner_ball(&self, k: u32) -> Range<usize> {
        0..self.sphere_start[k.min(self.radius) as usize + 1]
    }

    pub fn tree_distance(&self, x: usize, y: usize) -> Result<u32> {
        let n = self.vertex_count();
        if x >= n || y >= n {
            return Err(Error::domain(format!("vertex index out of range 0..{n}")));
        }
        let (mut a, mut b) = (x, y);
        let mut dist = 0;
        while self.depth[a] > self.depth[b] {
            a = self.parent[a] as usize;
            dist += 1;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b] as usize;
            dist += 1;
        }
        while a != b {
            a = self.parent[a] as usize;
            b = self.parent[b] as usize;
            dist += 2;
        }
        Ok(dist)
    }

    /// The ball as an ordinary graph with the same vertex numbering.
    pub fn to_graph(&self) -> Graph {
        let edges = (0..self.edge_count()).map(|e| self.edge_endpoints(e));
        Graph::from_edges(self.vertex_count(), edges).expect("tree balls are simple graphs")
    }
}
