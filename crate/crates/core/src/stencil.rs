//! Nearest-neighbor stencils and retention balls.

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::nodeset::NodeSet;

/// Spatial index over every node of a [`NodeSet`], in global index order.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    tree: KdTree,
    n_interior: usize,
}

pub fn build_index(ns: &NodeSet) -> NeighborIndex {
    NeighborIndex {
        tree: KdTree::new(ns.dim(), &ns.coords()),
        n_interior: ns.n_interior(),
    }
}

impl NeighborIndex {
    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.tree.point(i)
    }

    /// `k` nearest nodes to an arbitrary point as `(index, squared distance)`.
    pub fn nearest(&self, query: &[f64], k: usize) -> Vec<(usize, f64)> {
        self.tree.knn(query, k)
    }
}

/// A seed node and its nearest neighbors, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    seed: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
    width: f64,
    n_interior: usize,
}

impl Stencil {
    pub fn seed(&self) -> usize {
        self.seed
    }

    /// Global indices; the first entry is the seed.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Distance of each stencil node from the seed.
    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// Distance to the farthest stencil node.
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn build_stencil(idx: &NeighborIndex, k: usize, n: usize) -> Result<Stencil> {
    let total = idx.len();
    if n == 0 || n > total || k >= total {
        return Err(Error::InvalidSize { n, available: total });
    }
    let seed_point = idx.point(k);
    let mut found = idx.nearest(seed_point, n);
    // a coincident node with a smaller index could outrank the seed
    if found[0].0 != k {
        match found.iter().position(|&(i, _)| i == k) {
            Some(p) => {
                let s = found.remove(p);
                found.insert(0, s);
            }
            None => {
                found.pop();
                found.insert(0, (k, 0.0));
            }
        }
    }
    let indices: Vec<usize> = found.iter().map(|&(i, _)| i).collect();
    let distances: Vec<f64> = found.iter().map(|&(_, d2)| d2.sqrt()).collect();
    let width = distances.iter().copied().fold(0.0, f64::max);
    Ok(Stencil {
        seed: k,
        indices,
        distances,
        width,
        n_interior: idx.n_interior,
    })
}

/// Nodes a stencil may supply rows for.
#[derive(Debug, Clone, PartialEq)]
pub struct RetentionBall {
    pub radius: f64,
    /// Global indices in stencil order; the seed comes first.
    pub indices: Vec<usize>,
}

impl RetentionBall {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Unclaimed stencil nodes within `(1 - delta) * width` of the seed. The seed
/// is always included. `claimed` is indexed by global node index.
pub fn retention_candidates(
    st: &Stencil,
    delta: f64,
    claimed: &[bool],
    interior_only: bool,
) -> RetentionBall {
    let radius = (1.0 - delta) * st.width;
    let mut indices = vec![st.seed];
    for (&i, &d) in st.indices.iter().zip(&st.distances).skip(1) {
        if d <= radius && !claimed[i] && !(interior_only && i >= st.n_interior) {
            indices.push(i);
        }
    }
    RetentionBall { radius, indices }
}
