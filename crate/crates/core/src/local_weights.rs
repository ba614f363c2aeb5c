//! Per-stencil augmented PHS interpolation and RBF-FD weights.
//!
//! Every local system is formed in stencil coordinates `xi = (x - c) / rho`,
//! with `c` the stencil centroid and `rho` the stencil width. Augmented PHS
//! interpolation is invariant under translation and uniform scaling, so
//! weights for an operator of derivative order `k` are the scaled-space
//! weights times `rho^-k`. That factor is folded into the right-hand side.

use crate::error::{Error, Result};
use crate::linalg::{lu_factor, DenseMatrix, LuFactors};
use crate::nodeset::NodeSet;
use crate::stencil::Stencil;

/// Polyharmonic spline `phi(r) = r^m` with odd `m >= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhsKernel {
    order: u32,
}

impl PhsKernel {
    pub fn new(order: u32) -> Result<Self> {
        if order < 3 || order % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "PHS order must be odd and at least 3, got {order}"
            )));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        r.powi(self.order as i32)
    }
}

impl Default for PhsKernel {
    fn default() -> Self {
        Self { order: 7 }
    }
}

/// Polynomial degree and term count for a stencil of `n` nodes: the largest
/// `s` with `C(s+d, d) <= floor(n/2)`. In 2D this is the closed form
/// `floor((sqrt(4n+1) - 3) / 2)`.
pub fn poly_degree_for_stencil(n: usize, d: usize) -> (usize, usize) {
    let half = n / 2;
    let mut s = 0;
    while binomial(s + 1 + d, d) <= half {
        s += 1;
    }
    (s, binomial(s + d, d))
}

fn binomial(n: usize, k: usize) -> usize {
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Monomials of total degree `<= s` in shifted, scaled coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyBasis {
    dim: usize,
    degree: usize,
    exponents: Vec<[u32; 3]>,
    center: Vec<f64>,
    scale: f64,
}

impl PolyBasis {
    /// Exponents are listed by total degree, then in decreasing powers of
    /// the leading coordinates.
    pub fn new(dim: usize, degree: usize, center: Vec<f64>, scale: f64) -> Self {
        assert_eq!(center.len(), dim);
        let mut exponents = Vec::new();
        for t in 0..=degree as u32 {
            if dim == 2 {
                for a in (0..=t).rev() {
                    exponents.push([a, t - a, 0]);
                }
            } else {
                for a in (0..=t).rev() {
                    for b in (0..=t - a).rev() {
                        exponents.push([a, b, t - a - b]);
                    }
                }
            }
        }
        Self {
            dim,
            degree,
            exponents,
            center,
            scale,
        }
    }

    /// Basis centered at the stencil centroid and scaled by its width.
    pub fn for_stencil(ns: &NodeSet, st: &Stencil, degree: usize) -> Self {
        let d = ns.dim();
        let mut c = vec![0.0; d];
        for &i in st.indices() {
            for (ca, xa) in c.iter_mut().zip(ns.point(i)) {
                *ca += xa;
            }
        }
        c.iter_mut().for_each(|v| *v /= st.len() as f64);
        Self::new(d, degree, c, st.width())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[[u32; 3]] {
        &self.exponents
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Maps a physical point to stencil coordinates.
    pub fn to_local(&self, x: &[f64]) -> [f64; 3] {
        let mut xi = [0.0; 3];
        for a in 0..self.dim {
            xi[a] = (x[a] - self.center[a]) / self.scale;
        }
        xi
    }

    /// Monomial `i` evaluated at the physical point `x`.
    pub fn eval(&self, i: usize, x: &[f64]) -> f64 {
        monomial(&self.exponents[i], &self.to_local(x), self.dim)
    }
}

#[inline]
fn monomial(e: &[u32; 3], xi: &[f64; 3], dim: usize) -> f64 {
    let mut v = 1.0;
    for a in 0..dim {
        v *= xi[a].powi(e[a] as i32);
    }
    v
}

/// `d/dxi_a` of a monomial.
fn monomial_d1(e: &[u32; 3], xi: &[f64; 3], dim: usize, a: usize) -> f64 {
    if e[a] == 0 {
        return 0.0;
    }
    let mut f = *e;
    f[a] -= 1;
    e[a] as f64 * monomial(&f, xi, dim)
}

fn monomial_laplacian(e: &[u32; 3], xi: &[f64; 3], dim: usize) -> f64 {
    let mut total = 0.0;
    for a in 0..dim {
        if e[a] >= 2 {
            let mut f = *e;
            f[a] -= 2;
            total += (e[a] * (e[a] - 1)) as f64 * monomial(&f, xi, dim);
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    Identity,
    Laplacian,
    /// With `None` the outward normal of each evaluation node is used.
    NormalDerivative(Option<Vec<f64>>),
    Gradient(usize),
}

/// A scalar multiple of a linear differential operator.
#[derive(Debug, Clone, PartialEq)]
pub struct LinOperator {
    pub kind: OperatorKind,
    pub coeff: f64,
}

impl LinOperator {
    pub fn identity() -> Self {
        Self {
            kind: OperatorKind::Identity,
            coeff: 1.0,
        }
    }

    pub fn laplacian() -> Self {
        Self {
            kind: OperatorKind::Laplacian,
            coeff: 1.0,
        }
    }

    /// Derivative along each evaluation node's own outward normal.
    pub fn normal_derivative() -> Self {
        Self {
            kind: OperatorKind::NormalDerivative(None),
            coeff: 1.0,
        }
    }

    /// Derivative along a fixed direction, which must be a unit vector.
    pub fn directional(n: Vec<f64>) -> Result<Self> {
        let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidOperator(format!("direction has length {norm}")));
        }
        Ok(Self {
            kind: OperatorKind::NormalDerivative(Some(n)),
            coeff: 1.0,
        })
    }

    pub fn gradient(axis: usize) -> Self {
        Self {
            kind: OperatorKind::Gradient(axis),
            coeff: 1.0,
        }
    }

    pub fn scaled(mut self, coeff: f64) -> Self {
        self.coeff = coeff;
        self
    }

    /// Number of derivatives taken.
    pub fn derivative_order(&self) -> i32 {
        match self.kind {
            OperatorKind::Identity => 0,
            OperatorKind::Laplacian => 2,
            OperatorKind::NormalDerivative(_) | OperatorKind::Gradient(_) => 1,
        }
    }
}

/// The factored saddle matrix `[A P; P^T 0]` of one stencil, in stencil
/// coordinates.
#[derive(Debug, Clone)]
pub struct LocalSystem {
    seed: usize,
    kernel: PhsKernel,
    basis: PolyBasis,
    local: Vec<[f64; 3]>,
    matrix: DenseMatrix,
    lu: LuFactors,
}

impl LocalSystem {
    pub fn seed(&self) -> usize {
        self.seed
    }

    /// Number of stencil nodes.
    pub fn n(&self) -> usize {
        self.local.len()
    }

    pub fn basis(&self) -> &PolyBasis {
        &self.basis
    }

    pub fn kernel(&self) -> PhsKernel {
        self.kernel
    }

    /// Unfactored saddle matrix. Its kernel block holds `(r_ij / rho)^m`.
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
}

pub fn assemble_saddle(
    st: &Stencil,
    kernel: PhsKernel,
    basis: &PolyBasis,
    ns: &NodeSet,
) -> Result<LocalSystem> {
    let n = st.len();
    let m = basis.len();
    let dim = ns.dim();
    if !(basis.scale() > 0.0) {
        return Err(Error::DegenerateStencil { seed: st.seed() });
    }
    let local: Vec<[f64; 3]> = st.indices().iter().map(|&i| basis.to_local(ns.point(i))).collect();
    let size = n + m;
    let mut a = DenseMatrix::zeros(size, size);
    for i in 0..n {
        for j in 0..i {
            let mut r2 = 0.0;
            for c in 0..dim {
                let t = local[i][c] - local[j][c];
                r2 += t * t;
            }
            let v = kernel.eval(r2.sqrt());
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        for (k, e) in basis.exponents().iter().enumerate() {
            let v = monomial(e, &local[i], dim);
            a[(i, n + k)] = v;
            a[(n + k, i)] = v;
        }
    }
    let lu = lu_factor(a.clone()).map_err(|_| Error::DegenerateStencil { seed: st.seed() })?;
    Ok(LocalSystem {
        seed: st.seed(),
        kernel,
        basis: basis.clone(),
        local,
        matrix: a,
        lu,
    })
}

/// Right-hand sides for evaluating `op` at the global nodes `eval`.
#[derive(Debug, Clone)]
pub struct OperatorRhs {
    pub values: DenseMatrix,
    pub eval: Vec<usize>,
}

pub fn operator_rhs(
    op: &LinOperator,
    sys: &LocalSystem,
    eval: &[usize],
    ns: &NodeSet,
) -> Result<OperatorRhs> {
    let n = sys.n();
    let basis = &sys.basis;
    let m = basis.len();
    let dim = ns.dim();
    let mo = sys.kernel.order() as i32;
    let mf = mo as f64;
    let factor = op.coeff / basis.scale().powi(op.derivative_order());
    let mut b = DenseMatrix::zeros(n + m, eval.len());
    for (c, &e) in eval.iter().enumerate() {
        let y = basis.to_local(ns.point(e));
        let dir: Option<&[f64]> = match &op.kind {
            OperatorKind::NormalDerivative(Some(v)) => {
                if v.len() != dim {
                    return Err(Error::InvalidOperator("direction has the wrong dimension".into()));
                }
                Some(v)
            }
            OperatorKind::NormalDerivative(None) => Some(ns.normal(e).ok_or_else(|| {
                Error::InvalidOperator(format!("node {e} has no normal for a normal derivative"))
            })?),
            _ => None,
        };
        if let OperatorKind::Gradient(axis) = op.kind {
            if axis >= dim {
                return Err(Error::InvalidOperator(format!("gradient axis {axis} out of range")));
            }
        }
        for (i, x) in sys.local.iter().enumerate() {
            let mut diff = [0.0; 3];
            let mut r2 = 0.0;
            for a in 0..dim {
                diff[a] = y[a] - x[a];
                r2 += diff[a] * diff[a];
            }
            let r = r2.sqrt();
            let v = match op.kind {
                OperatorKind::Identity => r.powi(mo),
                OperatorKind::Laplacian => mf * (mf + dim as f64 - 2.0) * r.powi(mo - 2),
                OperatorKind::Gradient(axis) => mf * r.powi(mo - 2) * diff[axis],
                OperatorKind::NormalDerivative(_) => {
                    let nv = dir.unwrap();
                    let dot: f64 = (0..dim).map(|a| diff[a] * nv[a]).sum();
                    mf * r.powi(mo - 2) * dot
                }
            };
            b[(i, c)] = factor * v;
        }
        for (k, ex) in basis.exponents().iter().enumerate() {
            let v = match op.kind {
                OperatorKind::Identity => monomial(ex, &y, dim),
                OperatorKind::Laplacian => monomial_laplacian(ex, &y, dim),
                OperatorKind::Gradient(axis) => monomial_d1(ex, &y, dim, axis),
                OperatorKind::NormalDerivative(_) => {
                    let nv = dir.unwrap();
                    (0..dim).map(|a| nv[a] * monomial_d1(ex, &y, dim, a)).sum()
                }
            };
            b[(n + k, c)] = factor * v;
        }
    }
    Ok(OperatorRhs {
        values: b,
        eval: eval.to_vec(),
    })
}

/// RBF-FD weights: column `c` holds the stencil weights for evaluation node
/// `eval[c]`, row `j` pairs with stencil node `j`.
#[derive(Debug, Clone)]
pub struct WeightBlock {
    weights: DenseMatrix,
    eval: Vec<usize>,
}

impl WeightBlock {
    pub fn weights(&self) -> &DenseMatrix {
        &self.weights
    }

    pub fn eval(&self) -> &[usize] {
        &self.eval
    }

    /// Weights for evaluation column `c`.
    pub fn column(&self, c: usize) -> Vec<f64> {
        self.weights.column(c)
    }

    /// Local Lebesgue value of column `c`: the l1 norm of its weights.
    pub fn lebesgue(&self, c: usize) -> f64 {
        (0..self.weights.rows()).map(|j| self.weights[(j, c)].abs()).sum()
    }
}

pub fn solve_weight_block(sys: &LocalSystem, rhs: &OperatorRhs) -> Result<WeightBlock> {
    let n = sys.n();
    let size = sys.matrix.rows();
    if rhs.values.rows() != size {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side has {} rows, saddle system has {size}",
            rhs.values.rows()
        )));
    }
    let x = sys.lu.solve(&rhs.values);
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateStencil { seed: sys.seed });
    }
    let p = rhs.values.cols();
    let weights = DenseMatrix::from_row_major(n, p, x.as_slice()[..n * p].to_vec());
    Ok(WeightBlock {
        weights,
        eval: rhs.eval.clone(),
    })
}

/// Builds the saddle system for a stencil and solves for `op` at `eval`.
pub fn stencil_weights(
    ns: &NodeSet,
    st: &Stencil,
    kernel: PhsKernel,
    op: &LinOperator,
    eval: &[usize],
) -> Result<WeightBlock> {
    let (s, _) = poly_degree_for_stencil(st.len(), ns.dim());
    let basis = PolyBasis::for_stencil(ns, st, s);
    let sys = assemble_saddle(st, kernel, &basis, ns)?;
    let rhs = operator_rhs(op, &sys, eval, ns)?;
    solve_weight_block(&sys, &rhs)
}
