//! Householder QR with column pivoting (Businger–Golub).
//!
//! nalgebra's `ColPivQR` pivots on the largest entry rather than the largest
//! remaining column norm, which is not rank revealing, so the least-squares
//! kernels use this small column-major implementation instead.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Relative singular-value floor below which a design is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct PivotedQr {
    rows: usize,
    cols: usize,
    /// Column-major storage: `R` on and above the diagonal, Householder
    /// vectors (implicit leading 1) below it.
    data: Vec<f64>,
    tau: Vec<f64>,
    /// `perm[j]` is the original column placed at position `j`.
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (n, m) = a.shape();
        let mut data = a.as_slice().to_vec();
        let steps = n.min(m);
        let mut tau = vec![0.0; steps];
        let mut perm: Vec<usize> = (0..m).collect();

        for j in 0..steps {
            // Pivot: largest remaining column norm.
            let mut best = j;
            let mut best_norm = -1.0;
            for c in j..m {
                let col = &data[c * n + j..(c + 1) * n];
                let s: f64 = col.iter().map(|v| v * v).sum();
                if s > best_norm {
                    best_norm = s;
                    best = c;
                }
            }
            if best != j {
                for i in 0..n {
                    data.swap(j * n + i, best * n + i);
                }
                perm.swap(j, best);
            }

            let x0 = data[j * n + j];
            let tail: f64 = data[j * n + j + 1..(j + 1) * n].iter().map(|v| v * v).sum();
            if tail == 0.0 {
                tau[j] = 0.0;
                continue;
            }
            let beta = -x0.signum() * (x0 * x0 + tail).sqrt();
            let beta = if beta == 0.0 { -(tail.sqrt()) } else { beta };
            tau[j] = (beta - x0) / beta;
            let scale = 1.0 / (x0 - beta);
            for v in &mut data[j * n + j + 1..(j + 1) * n] {
                *v *= scale;
            }
            data[j * n + j] = beta;

            for c in j + 1..m {
                let (head, rest) = data.split_at_mut(c * n);
                let v = &head[j * n + j + 1..(j + 1) * n];
                let col = &mut rest[j..n];
                let mut w = col[0];
                for (vi, ci) in v.iter().zip(&col[1..]) {
                    w += vi * ci;
                }
                w *= tau[j];
                col[0] -= w;
                for (vi, ci) in v.iter().zip(&mut col[1..]) {
                    *ci -= w * vi;
                }
            }
        }

        PivotedQr { rows: n, cols: m, data, tau, perm }
    }

    /// Leading `cols × cols` block of `R` (columns in pivoted order).
    pub fn r(&self) -> DMatrix<f64> {
        let m = self.cols;
        let n = self.rows;
        DMatrix::from_fn(m.min(n), m, |i, j| if i <= j { self.data[j * n + i] } else { 0.0 })
    }

    /// Errors when the smallest singular value of the design is below
    /// [`RANK_TOLERANCE`] times the largest.
    pub fn check_rank(&self) -> Result<()> {
        if self.rows < self.cols {
            return Err(Error::RankDeficient { ratio: 0.0, tolerance: RANK_TOLERANCE });
        }
        if self.cols == 0 {
            return Ok(());
        }
        let sv = SVD::new(self.r(), false, false).singular_values;
        let max = sv.max();
        let min = sv.min();
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        if ratio < RANK_TOLERANCE {
            return Err(Error::RankDeficient { ratio, tolerance: RANK_TOLERANCE });
        }
        Ok(())
    }

    fn apply_qt(&self, b: &mut [f64]) {
        let n = self.rows;
        for (j, &t) in self.tau.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let v = &self.data[j * n + j + 1..(j + 1) * n];
            let mut w = b[j];
            for (vi, bi) in v.iter().zip(&b[j + 1..]) {
                w += vi * bi;
            }
            w *= t;
            b[j] -= w;
            for (vi, bi) in v.iter().zip(&mut b[j + 1..]) {
                *bi -= w * vi;
            }
        }
    }

    /// Diagonal of `(A'A)^{-1}` in original column order. Assumes full rank.
    pub fn inverse_gram_diagonal(&self) -> DVector<f64> {
        let m = self.cols;
        let r = self.r();
        let rinv = r.solve_upper_triangular(&DMatrix::identity(m, m)).expect("full-rank R");
        let mut out = DVector::zeros(m);
        for (a, &p) in self.perm.iter().enumerate() {
            out[p] = rinv.row(a).norm_squared();
        }
        out
    }

    /// Least-squares solution for one right-hand side. Assumes full rank.
    pub fn solve_vec(&self, b: &[f64]) -> DVector<f64> {
        assert_eq!(b.len(), self.rows);
        let n = self.rows;
        let m = self.cols;
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let mut z = vec![0.0; m];
        for i in (0..m).rev() {
            let mut s = qtb[i];
            for (j, zj) in z.iter().enumerate().skip(i + 1) {
                s -= self.data[j * n + i] * zj;
            }
            z[i] = s / self.data[i * n + i];
        }
        let mut x = DVector::zeros(m);
        for (j, &p) in self.perm.iter().enumerate() {
            x[p] = z[j];
        }
        x
    }

    /// Least-squares solutions for every column of `b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.cols, b.ncols());
        for (c, col) in b.column_iter().enumerate() {
            let x = self.solve_vec(col.as_slice());
            out.set_column(c, &x);
        }
        out
    }
}

/// Full-rank least squares `min ‖A·X − B‖` column by column.
pub(crate) fn least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let qr = PivotedQr::new(a);
    qr.check_rank()?;
    Ok(qr.solve(b))
}
