use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length does not match.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has the wrong length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Packed LU factors with a row permutation: `P A = L U`, `L` unit lower triangular.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

/// Pivots smaller than this multiple of the largest matrix entry are treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// LU factorization with partial pivoting.
pub fn lu_factor(a: DenseMatrix) -> Result<LuFactors> {
    if a.rows != a.cols {
        return Err(Error::ShapeMismatch(format!(
            "LU needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let scale = a.max_abs();
    let threshold = PIVOT_TOLERANCE * if scale > 0.0 { scale } else { 1.0 };
    let mut lu = a;
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best < threshold || !best.is_finite() {
            return Err(Error::SingularMatrix { col: k, pivot: best });
        }
        if p != k {
            perm.swap(p, k);
            let (lo, hi) = lu.data.split_at_mut(p * n);
            lo[k * n..(k + 1) * n].swap_with_slice(&mut hi[..n]);
        }
        let pivot = lu[(k, k)];
        let (top, bottom) = lu.data.split_at_mut((k + 1) * n);
        let pivot_row = &top[k * n + k + 1..(k + 1) * n];
        for row in bottom.chunks_exact_mut(n) {
            let l = row[k] / pivot;
            row[k] = l;
            if l != 0.0 {
                for (r, u) in row[k + 1..].iter_mut().zip(pivot_row) {
                    *r -= l * u;
                }
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Packed factors: strictly lower part is `L` (unit diagonal implied), upper part is `U`.
    pub fn packed(&self) -> &DenseMatrix {
        &self.lu
    }

    /// Solves `A x = b` for a single right-hand side.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = 0.0;
            for (l, v) in self.lu.row(i)[..i].iter().zip(&x[..i]) {
                s += l * v;
            }
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = 0.0;
            for (u, v) in row[i + 1..].iter().zip(&x[i + 1..]) {
                s += u * v;
            }
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solves `A X = B`. Columns are processed together, but each one sees
    /// exactly the arithmetic of [`LuFactors::solve_vec`].
    pub fn solve(&self, b: &DenseMatrix) -> DenseMatrix {
        let n = self.dim();
        assert_eq!(b.rows(), n);
        let p = b.cols();
        let mut x = DenseMatrix::zeros(n, p);
        for (i, &src) in self.perm.iter().enumerate() {
            x.row_mut(i).copy_from_slice(b.row(src));
        }
        let mut acc = vec![0.0; p];
        for i in 1..n {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let (done, rest) = x.data.split_at_mut(i * p);
            for (j, &l) in self.lu.row(i)[..i].iter().enumerate() {
                for (a, v) in acc.iter_mut().zip(&done[j * p..(j + 1) * p]) {
                    *a += l * v;
                }
            }
            for (r, a) in rest[..p].iter_mut().zip(&acc) {
                *r -= a;
            }
        }
        for i in (0..n).rev() {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let row = self.lu.row(i);
            let (head, done) = x.data.split_at_mut((i + 1) * p);
            for (k, &u) in row[i + 1..].iter().enumerate() {
                for (a, v) in acc.iter_mut().zip(&done[k * p..(k + 1) * p]) {
                    *a += u * v;
                }
            }
            let d = row[i];
            for (r, a) in head[i * p..].iter_mut().zip(&acc) {
                *r = (*r - a) / d;
            }
        }
        x
    }
}

/// Convenience wrapper: factor then solve.
pub fn lu_solve(factors: &LuFactors, b: &DenseMatrix) -> DenseMatrix {
    factors.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_solve_returns_rhs() {
        let lu = lu_factor(DenseMatrix::identity(4)).unwrap();
        let b = DenseMatrix::from_fn(4, 2, |i, j| (i * 3 + j) as f64);
        assert_eq!(lu.solve(&b), b);
    }

    #[test]
    fn permutation_matrix_needs_pivoting() {
        let a = DenseMatrix::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let lu = lu_factor(a).unwrap();
        assert_eq!(lu.solve_vec(&[3.0, 5.0]), vec![5.0, 3.0]);
    }

    #[test]
    fn random_well_conditioned_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20;
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            rng.gen_range(-1.0..1.0) + if i == j { 10.0 } else { 0.0 }
        });
        let b = DenseMatrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0));
        let x = lu_factor(a.clone()).unwrap().solve(&b);
        let r = a.matmul(&x);
        for i in 0..n {
            for j in 0..3 {
                assert!((r[(i, j)] - b[(i, j)]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn reconstruction_pa_equals_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 12;
        let a = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let f = lu_factor(a.clone()).unwrap();
        let p = f.packed();
        let l = DenseMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => p[(i, j)],
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        });
        let u = DenseMatrix::from_fn(n, n, |i, j| if i <= j { p[(i, j)] } else { 0.0 });
        let lu = l.matmul(&u);
        let scale = a.max_abs();
        for i in 0..n {
            for j in 0..n {
                let pa = a[(f.permutation()[i], j)];
                assert!((lu[(i, j)] - pa).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn block_solve_matches_single_columns_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 17;
        let a = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = DenseMatrix::from_fn(n, 5, |_, _| rng.gen_range(-1.0..1.0));
        let f = lu_factor(a).unwrap();
        let x = f.solve(&b);
        for c in 0..5 {
            assert_eq!(x.column(c), f.solve_vec(&b.column(c)));
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(lu_factor(a), Err(Error::SingularMatrix { col: 1, .. })));
    }
}
