use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Anything that approximately applies `A^{-1}`.
pub trait Preconditioner {
    /// Writes `M^{-1} r` into `z`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// No preconditioning.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Incomplete LU factors with zero fill-in. `L` (unit diagonal implied) and
/// `U` share the sparsity pattern of the factored matrix.
#[derive(Debug, Clone)]
pub struct Ilu0Factors {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

/// ILU(0) in the natural row order of `a`.
pub fn ilu0(a: &CsrMatrix) -> Result<Ilu0Factors> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::ShapeMismatch("ILU(0) needs a square matrix".into()));
    }
    let indptr = a.indptr().to_vec();
    let indices = a.indices().to_vec();
    let mut values = a.values().to_vec();

    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        let cols = &indices[indptr[i]..indptr[i + 1]];
        match cols.binary_search(&i) {
            Ok(p) => diag.push(indptr[i] + p),
            Err(_) => {
                return Err(Error::PreconditionerFailure {
                    row: i,
                    reason: "no diagonal entry in the sparsity pattern".into(),
                })
            }
        }
    }

    // position of column j within the current row, usize::MAX if absent
    let mut pos = vec![usize::MAX; n];
    for i in 0..n {
        let (start, end) = (indptr[i], indptr[i + 1]);
        for p in start..end {
            pos[indices[p]] = p;
        }
        for p in start..end {
            let k = indices[p];
            if k >= i {
                break;
            }
            let pivot = values[diag[k]];
            let lik = values[p] / pivot;
            values[p] = lik;
            for q in diag[k] + 1..indptr[k + 1] {
                let j = indices[q];
                let target = pos[j];
                if target != usize::MAX {
                    values[target] -= lik * values[q];
                }
            }
        }
        for p in start..end {
            pos[indices[p]] = usize::MAX;
        }
        let d = values[diag[i]];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::PreconditionerFailure {
                row: i,
                reason: format!("pivot {d}"),
            });
        }
    }
    let lu = CsrMatrix::new(n, n, indptr, indices, values)?;
    Ok(Ilu0Factors { lu, diag })
}

impl Ilu0Factors {
    /// Combined `L\U` values on the original pattern.
    pub fn factors(&self) -> &CsrMatrix {
        &self.lu
    }

    pub fn solve_into(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag.len();
        let indptr = self.lu.indptr();
        let indices = self.lu.indices();
        let values = self.lu.values();
        for i in 0..n {
            let mut s = r[i];
            for p in indptr[i]..self.diag[i] {
                s -= values[p] * z[indices[p]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for p in self.diag[i] + 1..indptr[i + 1] {
                s -= values[p] * z[indices[p]];
            }
            z[i] = s / values[self.diag[i]];
        }
    }
}

impl Preconditioner for Ilu0Factors {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.solve_into(r, z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::lu_factor;

    #[test]
    fn diagonal_matrix_is_inverted_exactly() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, -4.0), (2, 2, 0.5)]);
        let f = ilu0(&a).unwrap();
        let mut z = vec![0.0; 3];
        f.apply(&[2.0, 2.0, 2.0], &mut z);
        assert_eq!(z, vec![1.0, -0.5, 4.0]);
    }

    #[test]
    fn tridiagonal_matches_dense_lu() {
        let n = 8;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let f = ilu0(&a).unwrap();
        let dense = lu_factor(a.to_dense()).unwrap();
        // diagonally dominant: partial pivoting never swaps
        assert_eq!(dense.permutation(), (0..n).collect::<Vec<_>>().as_slice());
        let packed = dense.packed();
        for i in 0..n {
            let (cols, vals) = f.factors().row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                assert!((packed[(i, c)] - v).abs() <= 1e-12);
            }
        }
        // and the preconditioner is the exact inverse
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut z = vec![0.0; n];
        f.apply(&b, &mut z);
        let x = dense.solve_vec(&b);
        for (a, b) in z.iter().zip(&x) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn missing_diagonal_fails() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]);
        assert!(matches!(
            ilu0(&a),
            Err(Error::PreconditionerFailure { row: 1, .. })
        ));
    }

    #[test]
    fn zero_pivot_fails() {
        let a = CsrMatrix::from_triplets(
            2,
            2,
            &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)],
        );
        assert!(matches!(
            ilu0(&a),
            Err(Error::PreconditionerFailure { row: 1, .. })
        ));
    }
}
