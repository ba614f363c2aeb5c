//! Error norms, convergence fits, the error decomposition, the speedup model,
//! spectra and global interpolation error maps.

use nalgebra::DMatrix;

use crate::assembly::GershgorinRow;
use crate::error::{Error, Result};
use crate::linalg::{lu_factor, CsrMatrix, DenseMatrix};
use crate::local_weights::{PhsKernel, PolyBasis};
use crate::nodeset::NodeSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub l2_rel: f64,
    pub linf_rel: f64,
}

/// Errors of `approx` relative to the reference `exact`.
pub fn error_norms(exact: &[f64], approx: &[f64]) -> Result<ErrorReport> {
    if exact.len() != approx.len() {
        return Err(Error::ShapeMismatch(format!(
            "reference has {} values, approximation {}",
            exact.len(),
            approx.len()
        )));
    }
    let ref2: f64 = exact.iter().map(|v| v * v).sum();
    let refmax = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if ref2 == 0.0 {
        return Err(Error::ZeroReference);
    }
    let mut e2 = 0.0;
    let mut emax = 0.0f64;
    for (q, a) in exact.iter().zip(approx) {
        let d = q - a;
        e2 += d * d;
        emax = emax.max(d.abs());
    }
    Ok(ErrorReport {
        l2_rel: (e2 / ref2).sqrt(),
        linf_rel: emax / refmax,
    })
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn fit_convergence_order(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() != err.len() || h.len() < 2 {
        return Err(Error::InvalidParameter("need at least two (h, error) pairs".into()));
    }
    if h.iter().chain(err).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("spacings and errors must be positive".into()));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all spacings are equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionReport {
    pub dissipation: f64,
    pub dispersion: f64,
    /// Pearson correlation of the two fields.
    pub correlation: f64,
    pub mean_exact: f64,
    pub mean_approx: f64,
    pub std_exact: f64,
    pub std_approx: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Splits the relative l2 error into an amplitude/mean part and an
/// uncorrelated part, using population moments over the samples.
pub fn dissipation_dispersion(exact: &[f64], approx: &[f64]) -> Result<DecompositionReport> {
    if exact.len() != approx.len() || exact.len() < 2 {
        return Err(Error::ShapeMismatch("need two equal-length fields of at least two values".into()));
    }
    let qnorm = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
    if qnorm == 0.0 {
        return Err(Error::ZeroReference);
    }
    let n = exact.len() as f64;
    let (mq, sq) = mean_std(exact);
    let (ma, sa) = mean_std(approx);
    let correlation = if sq == 0.0 || sa == 0.0 {
        1.0
    } else {
        let cov = exact
            .iter()
            .zip(approx)
            .map(|(q, a)| (q - mq) * (a - ma))
            .sum::<f64>()
            / n;
        (cov / (sq * sa)).clamp(-1.0, 1.0)
    };
    let scale = n.sqrt() / qnorm;
    let dissipation = scale * ((sq - sa).powi(2) + (mq - ma).powi(2)).sqrt();
    // 2(1 - rho) sq sa = sq sa |u - v|^2 / N for the standardized fields u, v.
    // Forming the norm directly avoids the cancellation in 1 - rho. The
    // correlation is signed: with |rho| the split stops being an upper bound
    // once the fields are anti-correlated.
    let dispersion = if sq == 0.0 || sa == 0.0 {
        0.0
    } else {
        let d2: f64 = exact
            .iter()
            .zip(approx)
            .map(|(q, a)| ((q - mq) / sq - (a - ma) / sa).powi(2))
            .sum();
        scale * (sq * sa * d2 / n).sqrt()
    };
    Ok(DecompositionReport {
        dissipation,
        dispersion,
        correlation,
        mean_exact: mq,
        mean_approx: ma,
        std_exact: sq,
        std_approx: sa,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupEstimate {
    pub eta: f64,
    /// The same model without polynomial terms.
    pub eta_unaugmented: f64,
    pub delta: f64,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub gamma: f64,
    pub c: f64,
    /// Modelled retention-ball size.
    pub p: f64,
    /// Modelled retained count `gamma * p`.
    pub q: f64,
}

fn eta(c: f64, gamma: f64, p: f64, n: usize, m: usize) -> f64 {
    let nm = (n + m) as f64;
    c * gamma * p * (nm + 1.0) / (nm + gamma * p)
}

/// A priori assembly speedup of overlap `delta` over one stencil per node.
pub fn speedup_estimate(delta: f64, n: usize, m: usize, d: usize, gamma: f64, c: f64) -> Result<SpeedupEstimate> {
    if !(delta > 0.0 && delta <= 1.0) || !(gamma > 0.0 && gamma <= 1.0) || !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "speedup model needs delta, gamma in (0, 1] and C > 0 (got {delta}, {gamma}, {c})"
        )));
    }
    let p = ((1.0 - delta).powi(d as i32) * n as f64).max(1.0);
    Ok(SpeedupEstimate {
        eta: eta(c, gamma, p, n, m),
        eta_unaugmented: eta(c, gamma, p, n, 0),
        delta,
        n,
        m,
        d,
        gamma,
        c,
        p,
        q: gamma * p,
    })
}

/// Overlap that retains about a fraction `t` of each stencil.
pub fn delta_for_fraction(t: f64, d: usize) -> f64 {
    1.0 - t.powf(1.0 / d as f64)
}

/// Largest interior block handed to the dense eigensolver.
pub const SPECTRUM_LIMIT: usize = 2500;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// `(re, im)` pairs.
    pub eigenvalues: Vec<(f64, f64)>,
    pub max_real: f64,
    pub max_abs: f64,
    /// Eigenvalues with real part above `tolerance`.
    pub spurious: usize,
    pub tolerance: f64,
}

pub fn spectrum(a: &CsrMatrix) -> Result<SpectrumReport> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::ShapeMismatch("spectrum needs a square matrix".into()));
    }
    if n > SPECTRUM_LIMIT {
        return Err(Error::TooLarge {
            size: n,
            limit: SPECTRUM_LIMIT,
        });
    }
    let dense = a.to_dense();
    let m = DMatrix::from_row_slice(n, n, dense.as_slice());
    let schur = m
        .try_schur(f64::EPSILON, 0)
        .ok_or_else(|| Error::DegenerateFit("Schur iteration did not converge".into()))?;
    let eigenvalues: Vec<(f64, f64)> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect();
    let max_real = eigenvalues.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let max_abs = eigenvalues.iter().map(|e| e.0.hypot(e.1)).fold(0.0, f64::max);
    let tolerance = 1e-8 * max_abs;
    let spurious = eigenvalues.iter().filter(|e| e.0 > tolerance).count();
    Ok(SpectrumReport {
        eigenvalues,
        max_real,
        max_abs,
        spurious,
        tolerance,
    })
}

/// Eigenvalues lying outside every Gershgorin disk (beyond `slack`).
pub fn outside_gershgorin(eigenvalues: &[(f64, f64)], rows: &[GershgorinRow], slack: f64) -> Vec<(f64, f64)> {
    eigenvalues
        .iter()
        .copied()
        .filter(|&(re, im)| !rows.iter().any(|r| r.contains(re, im, slack)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMapMethod {
    /// Heptic PHS interpolation without polynomial terms.
    Rbf,
    /// Heptic PHS plus all monomials up to the given degree.
    AugmentedRbf { degree: usize },
    /// Least-squares fit by all monomials up to the given degree.
    PolyLeastSquares { degree: usize },
}

/// `m x m` tensor grid on `[-1, 1]^2`, flattened.
pub fn square_grid(m: usize) -> Vec<f64> {
    let g = |i: usize| if m == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (m - 1) as f64 };
    let mut out = Vec::with_capacity(2 * m * m);
    for j in 0..m {
        for i in 0..m {
            out.extend_from_slice(&[g(i), g(j)]);
        }
    }
    out
}

/// Builds one global approximant of `f` on all nodes of `ns` and returns
/// `|approximant - f|` at each point of `grid` (flattened, same dimension).
pub fn error_map(
    ns: &NodeSet,
    method: ErrorMapMethod,
    f: &dyn Fn(&[f64]) -> f64,
    grid: &[f64],
) -> Result<Vec<f64>> {
    let d = ns.dim();
    let n = ns.len();
    let values: Vec<f64> = (0..n).map(|i| f(ns.point(i))).collect();
    let kernel = PhsKernel::default();
    let basis = |degree| PolyBasis::new(d, degree, vec![0.0; d], 1.0);
    let approx: Box<dyn Fn(&[f64]) -> f64> = match method {
        ErrorMapMethod::Rbf | ErrorMapMethod::AugmentedRbf { .. } => {
            let b = match method {
                ErrorMapMethod::AugmentedRbf { degree } => Some(basis(degree)),
                _ => None,
            };
            let m = b.as_ref().map_or(0, |b| b.len());
            let size = n + m;
            let mut a = DenseMatrix::zeros(size, size);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = kernel.eval(crate::kdtree::dist2(ns.point(i), ns.point(j)).sqrt());
                }
                if let Some(b) = &b {
                    for k in 0..m {
                        let v = b.eval(k, ns.point(i));
                        a[(i, n + k)] = v;
                        a[(n + k, i)] = v;
                    }
                }
            }
            let lu = lu_factor(a).map_err(|e| Error::DegenerateFit(e.to_string()))?;
            let mut rhs = values.clone();
            rhs.resize(size, 0.0);
            let coef = lu.solve_vec(&rhs);
            let pts: Vec<f64> = ns.coords();
            Box::new(move |x: &[f64]| {
                let mut s = 0.0;
                for (j, p) in pts.chunks(d).enumerate() {
                    s += coef[j] * kernel.eval(crate::kdtree::dist2(x, p).sqrt());
                }
                if let Some(b) = &b {
                    for k in 0..b.len() {
                        s += coef[n + k] * b.eval(k, x);
                    }
                }
                s
            })
        }
        ErrorMapMethod::PolyLeastSquares { degree } => {
            let b = basis(degree);
            let m = b.len();
            if m > n {
                return Err(Error::DegenerateFit(format!("{m} monomials for {n} nodes")));
            }
            let p = DMatrix::from_fn(n, m, |i, k| b.eval(k, ns.point(i)));
            let qr = p.qr();
            let r = qr.r();
            let rmax = r.diagonal().amax();
            if r.diagonal().iter().any(|v| v.abs() <= 1e-12 * rmax) {
                return Err(Error::DegenerateFit("rank-deficient least-squares system".into()));
            }
            let qtb = qr.q().transpose() * nalgebra::DVector::from_vec(values.clone());
            let coef = r
                .solve_upper_triangular(&qtb)
                .ok_or_else(|| Error::DegenerateFit("triangular solve failed".into()))?;
            Box::new(move |x: &[f64]| (0..m).map(|k| coef[k] * b.eval(k, x)).sum())
        }
    };
    Ok(grid.chunks(d).map(|x| (approx(x) - f(x)).abs()).collect())
}
