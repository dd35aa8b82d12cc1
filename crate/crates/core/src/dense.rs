//! Small dense symmetric positive definite helpers (regression and
//! parameter blocks of a handful of columns).

use serde::{Deserialize, Serialize};

use crate::Scalar;

/// Row-major dense matrix used for covariate designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    /// Single column of ones.
    pub fn ones(rows: usize) -> Self {
        Self { rows, cols: 1, data: vec![T::one(); rows] }
    }

    /// Builds from row vectors, which must share a length.
    pub fn from_rows(rows: &[Vec<T>]) -> Option<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn from_columns(cols: &[Vec<T>]) -> Option<Self> {
        let rows = cols.first().map_or(0, |c| c.len());
        if cols.iter().any(|c| c.len() != rows) {
            return None;
        }
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Some(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }

    /// `M x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Mᵀ y`.
    pub fn transpose_mul(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate().take(self.rows) {
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += m * yi;
            }
        }
        out
    }

    /// `Mᵀ diag(d) N`; `d = None` means the identity.
    pub fn weighted_cross(&self, d: Option<&[T]>, other: &Self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); other.cols]; self.cols];
        for i in 0..self.rows {
            let w = d.map_or(T::one(), |d| d[i]);
            for (a, &ma) in self.row(i).iter().enumerate() {
                let s = w * ma;
                for (b, &nb) in other.row(i).iter().enumerate() {
                    out[a][b] += s * nb;
                }
            }
        }
        out
    }

    /// `Mᵀ M`.
    pub fn gram(&self) -> Vec<Vec<T>> {
        self.weighted_cross(None, self)
    }
}

/// Lower Cholesky factor of a dense SPD matrix given as rows.
pub fn cholesky<T: Scalar>(a: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = a.len();
    let mut l = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` for a factor from [`cholesky`].
pub fn cholesky_solve<T: Scalar>(l: &[Vec<T>], b: &[T]) -> Vec<T> {
    let n = l.len();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = l[i][k] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i][i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = l[k][i] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i][i];
    }
    y
}

pub fn solve_spd<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    cholesky(a).map(|l| cholesky_solve(&l, b))
}

pub fn log_det_spd<T: Scalar>(a: &[Vec<T>]) -> Option<T> {
    let l = cholesky(a)?;
    Some(l.iter().enumerate().map(|(i, r)| r[i].ln()).sum::<T>() * T::lit(2.0))
}

pub fn inverse_spd<T: Scalar>(a: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let l = cholesky(a)?;
    let n = a.len();
    let mut inv = vec![vec![T::zero(); n]; n];
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        let col = cholesky_solve(&l, &e);
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![4.0f64, 2.0], vec![2.0, 3.0]];
        let x = solve_spd(&a, &[2.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1].abs() < 1e-15);
        assert!((log_det_spd(&a).unwrap() - 8f64.ln()).abs() < 1e-14);
        let inv = inverse_spd(&a).unwrap();
        assert!((inv[0][1] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_singular() {
        assert!(cholesky(&[vec![1.0, 1.0], vec![1.0, 1.0]]).is_none());
    }
}
