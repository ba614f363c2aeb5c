//! Right-preconditioned GMRES(m) and BiCGSTAB.
//!
//! Both solvers monitor the true (unpreconditioned) relative residual
//! `‖b − A x‖ / ‖b‖`, so a converged result satisfies the tolerance without a
//! separate check.

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Preconditioner};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// GMRES restart length; ignored by BiCGSTAB.
    pub restart: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 500,
            restart: 50,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || self.restart == 0 {
            return Err(Error::InvalidParameter(format!(
                "Krylov config needs tol > 0, max_iter > 0, restart > 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveInfo {
    pub iterations: usize,
    /// Relative residual after each iteration; entry 0 is the initial residual.
    pub residual_history: Vec<f64>,
}

impl SolveInfo {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) -> Result<()> {
    a.spmv_into(x, r)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(())
}

fn check_shapes(a: &CsrMatrix, b: &[f64], x0: &[f64]) -> Result<()> {
    if a.nrows() != a.ncols() || b.len() != a.nrows() || x0.len() != a.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "Krylov solve: matrix {}x{}, b {}, x0 {}",
            a.nrows(),
            a.ncols(),
            b.len(),
            x0.len()
        )));
    }
    Ok(())
}

/// Restarted GMRES with right preconditioning and a warm start `x0`.
pub fn gmres(
    a: &CsrMatrix,
    m: &dyn Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, SolveInfo)> {
    cfg.validate()?;
    check_shapes(a, b, x0)?;
    let n = b.len();
    let mut x = x0.to_vec();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveInfo {
                iterations: 0,
                residual_history: vec![0.0],
            },
        ));
    }

    let restart = cfg.restart.min(n.max(1));
    let mut r = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    // Krylov basis, Hessenberg columns, Givens rotations
    let mut v: Vec<Vec<f64>> = vec![vec![0.0; n]; restart + 1];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut h = vec![vec![0.0; restart + 1]; restart];
    let mut cs = vec![0.0; restart];
    let mut sn = vec![0.0; restart];
    let mut g = vec![0.0; restart + 1];

    loop {
        residual(a, b, &x, &mut r)?;
        let beta = norm(&r);
        let rel = beta / bnorm;
        history.push(rel);
        if rel <= cfg.tol {
            return Ok((
                x,
                SolveInfo {
                    iterations,
                    residual_history: history,
                },
            ));
        }
        if iterations >= cfg.max_iter {
            return Err(Error::SolverFailure {
                solver: "GMRES",
                iterations,
                residual: rel,
                reason: "iteration limit reached".into(),
                history,
            });
        }

        for (vi, ri) in v[0].iter_mut().zip(&r) {
            *vi = ri / beta;
        }
        g.iter_mut().for_each(|gi| *gi = 0.0);
        g[0] = beta;

        let mut k = 0;
        while k < restart && iterations < cfg.max_iter {
            m.apply(&v[k], &mut z);
            a.spmv_into(&z, &mut w)?;
            // modified Gram-Schmidt
            for i in 0..=k {
                let hik = dot(&w, &v[i]);
                h[k][i] = hik;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= hik * vj;
                }
            }
            let hnext = norm(&w);
            h[k][k + 1] = hnext;
            if hnext > 0.0 {
                for (vj, wj) in v[k + 1].iter_mut().zip(&w) {
                    *vj = wj / hnext;
                }
            }
            for i in 0..k {
                let t = cs[i] * h[k][i] + sn[i] * h[k][i + 1];
                h[k][i + 1] = -sn[i] * h[k][i] + cs[i] * h[k][i + 1];
                h[k][i] = t;
            }
            let denom = h[k][k].hypot(h[k][k + 1]);
            if denom == 0.0 {
                return Err(Error::SolverFailure {
                    solver: "GMRES",
                    iterations,
                    residual: g[k].abs() / bnorm,
                    reason: "breakdown: zero Hessenberg column".into(),
                    history,
                });
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k][k + 1] / denom;
            h[k][k] = denom;
            h[k][k + 1] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];

            iterations += 1;
            k += 1;
            let est = g[k].abs() / bnorm;
            history.push(est);
            if est <= cfg.tol || hnext == 0.0 {
                break;
            }
        }

        // back substitution for the cycle's coefficients, then x += M^{-1} V y
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        w.iter_mut().for_each(|wi| *wi = 0.0);
        for (j, yj) in y.iter().enumerate() {
            for (wi, vi) in w.iter_mut().zip(&v[j]) {
                *wi += yj * vi;
            }
        }
        m.apply(&w, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        // the cycle's estimate is replaced by the true residual at the loop head
        history.pop();
    }
}

/// BiCGSTAB with right preconditioning and a warm start `x0`.
pub fn bicgstab(
    a: &CsrMatrix,
    m: &dyn Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, SolveInfo)> {
    cfg.validate()?;
    check_shapes(a, b, x0)?;
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveInfo {
                iterations: 0,
                residual_history: vec![0.0],
            },
        ));
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    residual(a, b, &x, &mut r)?;
    let mut history = vec![norm(&r) / bnorm];
    if history[0] <= cfg.tol {
        return Ok((
            x,
            SolveInfo {
                iterations: 0,
                residual_history: history,
            },
        ));
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];

    let fail = |iterations: usize, history: Vec<f64>, reason: &str| Error::SolverFailure {
        solver: "BiCGSTAB",
        iterations,
        residual: *history.last().unwrap(),
        reason: reason.into(),
        history,
    };

    for it in 1..=cfg.max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(fail(it - 1, history, "breakdown: rho = 0"));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        m.apply(&p, &mut p_hat);
        a.spmv_into(&p_hat, &mut v)?;
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            return Err(fail(it - 1, history, "breakdown: <r_hat, v> = 0"));
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let s_rel = norm(&s) / bnorm;
        if s_rel <= cfg.tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            residual(a, b, &x, &mut r)?;
            let rel = norm(&r) / bnorm;
            history.push(rel);
            if rel <= cfg.tol {
                return Ok((
                    x,
                    SolveInfo {
                        iterations: it,
                        residual_history: history,
                    },
                ));
            }
            continue;
        }
        m.apply(&s, &mut s_hat);
        a.spmv_into(&s_hat, &mut t)?;
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(fail(it, history, "breakdown: t = 0"));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        let rel = norm(&r) / bnorm;
        history.push(rel);
        if rel <= cfg.tol {
            // guard against drift between the recursive and true residual
            residual(a, b, &x, &mut r)?;
            let true_rel = norm(&r) / bnorm;
            *history.last_mut().unwrap() = true_rel;
            if true_rel <= cfg.tol {
                return Ok((
                    x,
                    SolveInfo {
                        iterations: it,
                        residual_history: history,
                    },
                ));
            }
        }
        if omega == 0.0 {
            return Err(fail(it, history, "breakdown: omega = 0"));
        }
    }
    Err(fail(cfg.max_iter, history, "iteration limit reached"))
}
