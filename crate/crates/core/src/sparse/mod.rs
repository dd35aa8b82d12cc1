//! Sparse symmetric matrices, simplicial Cholesky and the selected inverse.
//!
//! Matrices store only their upper triangle in compressed-column form. All
//! values are immutable once built except through [`SparseSym::values_mut`],
//! which keeps the structure fixed and is what the Gibbs sampler uses to
//! refill a precision matrix in place.

mod cholesky;
mod selinv;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::Scalar;

pub use cholesky::{CholFactor, SymbolicCholesky, DENSE_FALLBACK_ORDER, PIVOT_TOLERANCE};

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index ({row}, {col}) out of range for order {order}")]
    IndexOutOfRange { row: usize, col: usize, order: usize },
    #[error("structure of the matrix does not match the symbolic analysis")]
    PatternMismatch,
    #[error("matrix market: {0}")]
    MatrixMarket(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Symmetric sparse matrix; only entries with `row <= col` are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym<T> {
    order: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseSym<T> {
    /// Builds a matrix from `(i, j, value)` triplets. Either triangle may be
    /// given; duplicates are summed and entries summing to exactly zero are
    /// dropped (off-diagonal only).
    pub fn from_triplets<I>(order: usize, triplets: I) -> Result<Self, SparseError>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut acc: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for (i, j, v) in triplets {
            if i >= order || j >= order {
                return Err(SparseError::IndexOutOfRange { row: i, col: j, order });
            }
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            // keyed (col, row) so iteration is column-major
            *acc.entry((c, r)).or_insert_with(T::zero) += v;
        }
        let mut col_ptr = vec![0usize; order + 1];
        let mut row_idx = Vec::with_capacity(acc.len());
        let mut values = Vec::with_capacity(acc.len());
        for ((c, r), v) in acc {
            if v == T::zero() && r != c {
                continue;
            }
            col_ptr[c + 1] += 1;
            row_idx.push(r);
            values.push(v);
        }
        for c in 0..order {
            col_ptr[c + 1] += col_ptr[c];
        }
        Ok(Self { order, col_ptr, row_idx, values })
    }

    /// Assembles from raw compressed-column parts of the upper triangle.
    /// Row indices in each column must be strictly increasing and `<= col`.
    pub fn from_upper_csc(
        order: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, SparseError> {
        if col_ptr.len() != order + 1 {
            return Err(SparseError::DimensionMismatch { expected: order + 1, found: col_ptr.len() });
        }
        if row_idx.len() != values.len() || col_ptr[order] != values.len() {
            return Err(SparseError::DimensionMismatch { expected: col_ptr[order], found: values.len() });
        }
        for c in 0..order {
            let rows = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            for (k, &r) in rows.iter().enumerate() {
                if r > c || (k > 0 && rows[k - 1] >= r) {
                    return Err(SparseError::IndexOutOfRange { row: r, col: c, order });
                }
            }
        }
        Ok(Self { order, col_ptr, row_idx, values })
    }

    pub fn identity(order: usize) -> Self {
        Self::diagonal(&vec![T::one(); order])
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let order = diag.len();
        Self {
            order,
            col_ptr: (0..=order).collect(),
            row_idx: (0..order).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored (upper-triangle) entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Mutable access to the stored values; the structure stays fixed.
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Position of entry `(i, j)` (either triangle) in the value array.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        if c >= self.order {
            return None;
        }
        let lo = self.col_ptr[c];
        let hi = self.col_ptr[c + 1];
        self.row_idx[lo..hi].binary_search(&r).ok().map(|k| lo + k)
    }

    /// Entry `(i, j)`; structural zeros read as zero.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.position(i, j).map_or(T::zero(), |p| self.values[p])
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.order).map(|i| self.get(i, i)).collect()
    }

    /// Iterates stored upper-triangle entries as `(row, col, value)`.
    pub fn iter_upper(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.order).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |p| (self.row_idx[p], c, self.values[p]))
        })
    }

    /// Full symmetric adjacency: for each column, `(row, value)` pairs for
    /// both triangles, rows ascending.
    pub fn full_columns(&self) -> Vec<Vec<(usize, T)>> {
        let mut cols: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.order];
        for (r, c, v) in self.iter_upper() {
            cols[c].push((r, v));
            if r != c {
                cols[r].push((c, v));
            }
        }
        for col in &mut cols {
            col.sort_by_key(|e| e.0);
        }
        cols
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>, SparseError> {
        if x.len() != self.order {
            return Err(SparseError::DimensionMismatch { expected: self.order, found: x.len() });
        }
        let mut y = vec![T::zero(); self.order];
        for (r, c, v) in self.iter_upper() {
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
        Ok(y)
    }

    /// `a * self + b * other` over the union of both patterns.
    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Result<Self, SparseError> {
        if other.order != self.order {
            return Err(SparseError::DimensionMismatch { expected: self.order, found: other.order });
        }
        let trip = self
            .iter_upper()
            .map(|(r, c, v)| (r, c, a * v))
            .chain(other.iter_upper().map(|(r, c, v)| (r, c, b * v)));
        Self::from_triplets(self.order, trip)
    }

    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= a;
        }
        out
    }

    /// `self · diag(d) · self`, the congruence used for `K C⁻¹ K` and
    /// `K diag(V)⁻¹ K`.
    pub fn congruence_diag(&self, d: &[T]) -> Result<Self, SparseError> {
        if d.len() != self.order {
            return Err(SparseError::DimensionMismatch { expected: self.order, found: d.len() });
        }
        let cols = self.full_columns();
        let mut trip = Vec::new();
        for (k, col) in cols.iter().enumerate() {
            for &(i, aik) in col {
                for &(j, akj) in col {
                    if i <= j {
                        trip.push((i, j, aik * d[k] * akj));
                    }
                }
            }
        }
        Self::from_triplets(self.order, trip)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut m = vec![vec![T::zero(); self.order]; self.order];
        for (r, c, v) in self.iter_upper() {
            m[r][c] = v;
            m[c][r] = v;
        }
        m
    }

    /// Largest entrywise absolute difference between two matrices.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        let lhs = self.to_dense();
        let rhs = other.to_dense();
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                worst = worst.max((*x - *y).abs());
            }
        }
        worst
    }

    /// Writes Matrix Market coordinate format (symmetric, lower triangle,
    /// 1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<(), SparseError> {
        writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(out, "{} {} {}", self.order, self.order, self.nnz())?;
        let mut entries: Vec<(usize, usize, T)> = self.iter_upper().map(|(r, c, v)| (c, r, v)).collect();
        entries.sort_by_key(|e| (e.1, e.0));
        for (i, j, v) in entries {
            writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }

    pub fn read_matrix_market<R: BufRead>(input: R) -> Result<Self, SparseError> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| SparseError::MatrixMarket("empty input".into()))??;
        let lower = header.to_ascii_lowercase();
        if !lower.starts_with("%%matrixmarket matrix coordinate") || !lower.contains("symmetric") {
            return Err(SparseError::MatrixMarket(format!("unsupported header: {header}")));
        }
        let mut size: Option<(usize, usize)> = None;
        let mut trip = Vec::new();
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            match size {
                None => {
                    if fields.len() != 3 {
                        return Err(SparseError::MatrixMarket(format!("bad size line: {t}")));
                    }
                    let parse = |s: &str| {
                        s.parse::<usize>()
                            .map_err(|_| SparseError::MatrixMarket(format!("bad integer: {s}")))
                    };
                    let (r, c, nz) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                    if r != c {
                        return Err(SparseError::MatrixMarket("matrix is not square".into()));
                    }
                    size = Some((r, nz));
                }
                Some(_) => {
                    if fields.len() != 3 {
                        return Err(SparseError::MatrixMarket(format!("bad entry line: {t}")));
                    }
                    let i: usize = fields[0]
                        .parse()
                        .map_err(|_| SparseError::MatrixMarket(format!("bad index: {}", fields[0])))?;
                    let j: usize = fields[1]
                        .parse()
                        .map_err(|_| SparseError::MatrixMarket(format!("bad index: {}", fields[1])))?;
                    let v: f64 = fields[2]
                        .parse()
                        .map_err(|_| SparseError::MatrixMarket(format!("bad value: {}", fields[2])))?;
                    if i == 0 || j == 0 {
                        return Err(SparseError::MatrixMarket("indices are 1-based".into()));
                    }
                    trip.push((i - 1, j - 1, T::lit(v)));
                }
            }
        }
        let (order, nz) = size.ok_or_else(|| SparseError::MatrixMarket("missing size line".into()))?;
        if trip.len() != nz {
            return Err(SparseError::MatrixMarket(format!("expected {nz} entries, found {}", trip.len())));
        }
        Self::from_triplets(order, trip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_mirror() {
        let m = SparseSym::from_triplets(3, vec![(0, 1, 1.0), (1, 0, 2.0), (2, 2, 5.0), (0, 2, 0.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.position(0, 2), None);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        let r = SparseSym::<f64>::from_triplets(2, vec![(0, 2, 1.0)]);
        assert!(matches!(r, Err(SparseError::IndexOutOfRange { .. })));
    }

    #[test]
    fn mul_vec_uses_both_triangles() {
        let m = SparseSym::from_triplets(2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 1, 2.0)]).unwrap();
        assert_eq!(m.mul_vec(&[1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
        assert!(m.mul_vec(&[1.0]).is_err());
    }

    #[test]
    fn congruence_matches_dense_product() {
        let k = SparseSym::from_triplets(3, vec![(0, 0, 3.0), (0, 1, -1.0), (1, 1, 3.0), (1, 2, -1.0), (2, 2, 3.0)])
            .unwrap();
        let d = [0.5, 2.0, 4.0];
        let kdk = k.congruence_diag(&d).unwrap();
        let kd = k.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let expect: f64 = (0..3).map(|m| kd[i][m] * d[m] * kd[m][j]).sum();
                assert!((kdk.get(i, j) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn matrix_market_round_trip() {
        let m = SparseSym::from_triplets(3, vec![(0, 0, 4.0), (0, 2, -0.25), (1, 1, 1.0 / 3.0), (2, 2, 9.0)]).unwrap();
        let mut buf = Vec::new();
        m.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n"));
        assert!(text.contains("\n3 1 "));
        let back = SparseSym::<f64>::read_matrix_market(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_market_rejects_zero_index() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n0 1 1.0\n";
        assert!(SparseSym::<f64>::read_matrix_market(text.as_bytes()).is_err());
    }
}
