//! Overlapped assembly of the global differentiation blocks.
//!
//! Interior seeds are visited in ascending index. A seed's stencil supplies
//! rows for every unclaimed interior node inside its retention ball, and those
//! rows are never recomputed. Boundary rows come from one stencil per boundary
//! node.

use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{write_matrix_market, CsrMatrix};
use crate::local_weights::{
    assemble_saddle, operator_rhs, poly_degree_for_stencil, solve_weight_block, LinOperator,
    OperatorKind, PhsKernel, PolyBasis, WeightBlock,
};
use crate::nodeset::NodeSet;
use crate::stencil::{build_index, build_stencil, retention_candidates, NeighborIndex, Stencil};

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyParams {
    /// Stencil size.
    pub n: usize,
    /// Overlap parameter in (0, 1]; 1 gives one stencil per row.
    pub delta: f64,
    pub kernel: PhsKernel,
    pub interior_op: LinOperator,
    pub boundary_op: LinOperator,
    pub stabilize: bool,
}

impl AssemblyParams {
    /// Laplacian interior rows and identity boundary rows.
    pub fn new(n: usize, delta: f64) -> Self {
        Self {
            n,
            delta,
            kernel: PhsKernel::default(),
            interior_op: LinOperator::laplacian(),
            boundary_op: LinOperator::identity(),
            stabilize: false,
        }
    }

    pub fn with_boundary_op(mut self, op: LinOperator) -> Self {
        self.boundary_op = op;
        self
    }

    pub fn with_interior_op(mut self, op: LinOperator) -> Self {
        self.interior_op = op;
        self
    }

    pub fn with_kernel(mut self, kernel: PhsKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_stabilization(mut self, on: bool) -> Self {
        self.stabilize = on;
        self
    }

    fn validate(&self, ns: &NodeSet) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "overlap delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if self.n < 2 || self.n > ns.len() {
            return Err(Error::InvalidSize {
                n: self.n,
                available: ns.len(),
            });
        }
        Ok(())
    }
}

/// Interior rows `[L_ii L_ib]` and boundary rows `[B_bi B_bb]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOperator {
    pub l_ii: CsrMatrix,
    pub l_ib: CsrMatrix,
    pub b_bi: CsrMatrix,
    pub b_bb: CsrMatrix,
    pub interior_op: LinOperator,
    pub boundary_op: LinOperator,
}

impl DiffOperator {
    pub fn n_interior(&self) -> usize {
        self.l_ii.nrows()
    }

    pub fn n_boundary(&self) -> usize {
        self.b_bb.nrows()
    }

    /// Writes `L_ii.mtx`, `L_ib.mtx`, `B_bi.mtx` and `B_bb.mtx` into `dir`.
    pub fn write_matrix_market(&self, dir: &Path) -> Result<()> {
        for (name, m) in [
            ("L_ii", &self.l_ii),
            ("L_ib", &self.l_ib),
            ("B_bi", &self.b_bi),
            ("B_bb", &self.b_bb),
        ] {
            write_matrix_market(m, &dir.join(format!("{name}.mtx")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyStats {
    /// Number of interior stencils.
    pub stencil_count: usize,
    /// Retention-ball size of each interior stencil.
    pub candidates: Vec<usize>,
    /// Rows each interior stencil actually supplied.
    pub retained: Vec<usize>,
    pub interior_seconds: f64,
    pub boundary_seconds: f64,
}

impl AssemblyStats {
    /// Fraction of retention-ball candidates kept after stabilization.
    pub fn gamma_obs(&self) -> f64 {
        let p: usize = self.candidates.iter().sum();
        let q: usize = self.retained.iter().sum();
        if p == 0 {
            1.0
        } else {
            q as f64 / p as f64
        }
    }

    pub fn mean_retained(&self) -> f64 {
        if self.retained.is_empty() {
            0.0
        } else {
            self.retained.iter().sum::<usize>() as f64 / self.retained.len() as f64
        }
    }

    pub fn total_seconds(&self) -> f64 {
        self.interior_seconds + self.boundary_seconds
    }
}

type Rows = Vec<Vec<(usize, f64)>>;

/// Stencil node closest to the centroid, first in stencil order on ties.
fn centroid_node(ns: &NodeSet, st: &Stencil, basis: &PolyBasis) -> usize {
    let c = basis.center();
    let mut best = (f64::INFINITY, st.seed());
    for &i in st.indices() {
        let d = crate::kdtree::dist2(ns.point(i), c);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

fn local_block(
    ns: &NodeSet,
    st: &Stencil,
    kernel: PhsKernel,
    op: &LinOperator,
    eval: &[usize],
) -> Result<(WeightBlock, PolyBasis)> {
    let (s, _) = poly_degree_for_stencil(st.len(), ns.dim());
    let basis = PolyBasis::for_stencil(ns, st, s);
    let sys = assemble_saddle(st, kernel, &basis, ns)?;
    let rhs = operator_rhs(op, &sys, eval, ns)?;
    Ok((solve_weight_block(&sys, &rhs)?, basis))
}

fn row_from(st: &Stencil, w: &WeightBlock, c: usize) -> Vec<(usize, f64)> {
    let m = w.weights();
    st.indices().iter().enumerate().map(|(j, &g)| (g, m[(j, c)])).collect()
}

fn boundary_rows(ns: &NodeSet, idx: &NeighborIndex, p: &AssemblyParams) -> Result<Rows> {
    let ni = ns.n_interior();
    (ni..ns.len())
        .map(|b| {
            let st = build_stencil(idx, b, p.n)?;
            let (w, _) = local_block(ns, &st, p.kernel, &p.boundary_op, &[b])?;
            Ok(row_from(&st, &w, 0))
        })
        .collect()
}

fn split_blocks(rows: Rows, ni: usize, nb: usize) -> (CsrMatrix, CsrMatrix) {
    let mut left = Vec::with_capacity(rows.len());
    let mut right = Vec::with_capacity(rows.len());
    for row in rows {
        let (a, b): (Vec<_>, Vec<_>) = row.into_iter().partition(|&(c, _)| c < ni);
        left.push(a);
        right.push(b.into_iter().map(|(c, v)| (c - ni, v)).collect());
    }
    (CsrMatrix::from_rows(ni, left), CsrMatrix::from_rows(nb, right))
}

fn finish(ns: &NodeSet, p: &AssemblyParams, interior: Rows, boundary: Rows) -> DiffOperator {
    let (ni, nb) = (ns.n_interior(), ns.n_boundary());
    let (l_ii, l_ib) = split_blocks(interior, ni, nb);
    let (b_bi, b_bb) = split_blocks(boundary, ni, nb);
    DiffOperator {
        l_ii,
        l_ib,
        b_bi,
        b_bb,
        interior_op: p.interior_op.clone(),
        boundary_op: p.boundary_op.clone(),
    }
}

/// Overlapped assembly.
pub fn assemble(ns: &NodeSet, p: &AssemblyParams) -> Result<(DiffOperator, AssemblyStats)> {
    p.validate(ns)?;
    let idx = build_index(ns);
    let ni = ns.n_interior();
    let start = Instant::now();
    let mut claimed = vec![false; ns.len()];
    let mut rows: Rows = vec![Vec::new(); ni];
    let mut candidates = Vec::new();
    let mut retained = Vec::new();
    for k in 0..ni {
        if claimed[k] {
            continue;
        }
        let st = build_stencil(&idx, k, p.n)?;
        let ball = retention_candidates(&st, p.delta, &claimed, true);
        let mut eval = ball.indices.clone();
        let (s, _) = poly_degree_for_stencil(st.len(), ns.dim());
        let basis = PolyBasis::for_stencil(ns, &st, s);
        let center = if p.stabilize {
            let c = centroid_node(ns, &st, &basis);
            let pos = eval.iter().position(|&e| e == c).unwrap_or_else(|| {
                eval.push(c);
                eval.len() - 1
            });
            Some(pos)
        } else {
            None
        };
        let sys = assemble_saddle(&st, p.kernel, &basis, ns)?;
        let rhs = operator_rhs(&p.interior_op, &sys, &eval, ns)?;
        let w = solve_weight_block(&sys, &rhs)?;
        let threshold = center.map(|c| w.lebesgue(c));
        let mut kept = 0;
        for (c, &node) in ball.indices.iter().enumerate() {
            let keep = c == 0 || threshold.map_or(true, |t| w.lebesgue(c) <= t);
            if keep {
                rows[node] = row_from(&st, &w, c);
                claimed[node] = true;
                kept += 1;
            }
        }
        candidates.push(ball.len());
        retained.push(kept);
    }
    let interior_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let boundary = boundary_rows(ns, &idx, p)?;
    let boundary_seconds = start.elapsed().as_secs_f64();
    let stats = AssemblyStats {
        stencil_count: retained.len(),
        candidates,
        retained,
        interior_seconds,
        boundary_seconds,
    };
    Ok((finish(ns, p, rows, boundary), stats))
}

/// Standard RBF-FD: one stencil and one weight column per row, no overlap.
pub fn assemble_reference(ns: &NodeSet, p: &AssemblyParams) -> Result<DiffOperator> {
    p.validate(ns)?;
    let idx = build_index(ns);
    let interior = (0..ns.n_interior())
        .map(|k| {
            let st = build_stencil(&idx, k, p.n)?;
            let (w, _) = local_block(ns, &st, p.kernel, &p.interior_op, &[k])?;
            Ok(row_from(&st, &w, 0))
        })
        .collect::<Result<Rows>>()?;
    let boundary = boundary_rows(ns, &idx, p)?;
    Ok(finish(ns, p, interior, boundary))
}

/// Local Lebesgue values over one stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilLebesgue {
    pub seed: usize,
    /// Stencil indices, nearest first.
    pub nodes: Vec<usize>,
    /// Lebesgue value at each stencil node.
    pub values: Vec<f64>,
    /// Stencil node closest to the centroid.
    pub centroid_node: usize,
    /// Lebesgue value at `centroid_node`.
    pub threshold: f64,
}

impl StencilLebesgue {
    /// Stencil node with the largest value, first on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = j;
            }
        }
        self.nodes[best]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LebesgueReport {
    pub stencils: Vec<StencilLebesgue>,
}

/// Lebesgue values at every node of each seed's stencil, without claiming.
/// A normal derivative without a fixed direction uses the seed's normal at
/// every stencil node.
pub fn lebesgue_field(
    ns: &NodeSet,
    n: usize,
    op: &LinOperator,
    kernel: PhsKernel,
    seeds: &[usize],
) -> Result<LebesgueReport> {
    if n < ns.dim() + 1 || n > ns.len() {
        return Err(Error::InvalidSize {
            n,
            available: ns.len(),
        });
    }
    let idx = build_index(ns);
    let mut stencils = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        if seed >= ns.len() {
            return Err(Error::InvalidParameter(format!("seed {seed} out of range")));
        }
        let local_op = match op.kind {
            OperatorKind::NormalDerivative(None) => {
                let nv = ns.normal(seed).ok_or_else(|| {
                    Error::InvalidOperator(format!("seed {seed} has no normal"))
                })?;
                LinOperator::directional(nv.to_vec())?.scaled(op.coeff)
            }
            _ => op.clone(),
        };
        let st = build_stencil(&idx, seed, n)?;
        let (w, basis) = local_block(ns, &st, kernel, &local_op, st.indices())?;
        let values: Vec<f64> = (0..st.len()).map(|c| w.lebesgue(c)).collect();
        let c = centroid_node(ns, &st, &basis);
        let pos = st.indices().iter().position(|&i| i == c).unwrap();
        stencils.push(StencilLebesgue {
            seed,
            nodes: st.indices().to_vec(),
            threshold: values[pos],
            values,
            centroid_node: c,
        });
    }
    Ok(LebesgueReport { stencils })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GershgorinRow {
    pub diagonal: f64,
    /// Sum of off-diagonal magnitudes.
    pub radius: f64,
    /// The whole disk lies in the closed left half-plane, `L_kk + radius <= 0`.
    pub sufficient: bool,
}

impl GershgorinRow {
    pub fn from_row(diagonal: f64, radius: f64) -> Self {
        Self {
            diagonal,
            radius,
            sufficient: diagonal + radius <= 0.0,
        }
    }

    pub fn contains(&self, re: f64, im: f64, slack: f64) -> bool {
        (re - self.diagonal).hypot(im) <= self.radius + slack
    }
}

/// Gershgorin disks of the square interior block `L_ii`.
pub fn gershgorin_report(l_ii: &CsrMatrix) -> Vec<GershgorinRow> {
    (0..l_ii.nrows())
        .map(|k| {
            let (cols, vals) = l_ii.row(k);
            let mut diag = 0.0;
            let mut radius = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                if c == k {
                    diag += v;
                } else {
                    radius += v.abs();
                }
            }
            GershgorinRow::from_row(diag, radius)
        })
        .collect()
}
