use rand::Rng;

use super::{SparseError, SparseSym};
use crate::Scalar;

/// Matrices of at most this order are factored with a dense lower factor
/// and no permutation.
pub const DENSE_FALLBACK_ORDER: usize = 64;

/// Pivots at or below this value abort the factorization.
pub const PIVOT_TOLERANCE: f64 = 1e-300;

const NONE: usize = usize::MAX;

/// Ordering, elimination tree and factor pattern for one sparsity structure.
///
/// The analysis depends only on the pattern, so it is computed once and
/// reused for every refactorization of matrices sharing that pattern.
#[derive(Debug, Clone)]
pub struct SymbolicCholesky {
    n: usize,
    /// `perm[k]` is the original index eliminated at step `k`.
    perm: Vec<usize>,
    /// Upper-triangle pattern of the input this analysis was built for.
    src_col_ptr: Vec<usize>,
    src_row_idx: Vec<usize>,
    /// Permuted upper triangle `C = P A Pᵀ`: column pointers, rows, and for
    /// each entry the index of the source value it copies.
    c_col_ptr: Vec<usize>,
    c_row_idx: Vec<usize>,
    c_src: Vec<usize>,
    /// Column-compressed pattern of `L`; the diagonal is first in each column.
    l_col_ptr: Vec<usize>,
    l_row_idx: Vec<usize>,
    /// Row patterns of `L` (strictly lower part), in a valid elimination order.
    row_ptr: Vec<usize>,
    row_cols: Vec<usize>,
    dense: bool,
}

impl SymbolicCholesky {
    /// Analyses the pattern of `m`: approximate-minimum-degree ordering for
    /// large matrices, identity ordering with a full factor for small ones.
    pub fn analyse<T: Scalar>(m: &SparseSym<T>) -> Self {
        let n = m.order();
        let dense = n <= DENSE_FALLBACK_ORDER;
        let perm = if dense || n == 0 {
            (0..n).collect()
        } else {
            amd_ordering(m)
        };
        Self::with_ordering(m, perm, dense)
    }

    fn with_ordering<T: Scalar>(m: &SparseSym<T>, perm: Vec<usize>, dense: bool) -> Self {
        let n = m.order();
        let mut inv_perm = vec![0usize; n];
        for (k, &i) in perm.iter().enumerate() {
            inv_perm[i] = k;
        }

        // permuted upper triangle
        let mut counts = vec![0usize; n + 1];
        for (r, c, _) in m.iter_upper() {
            let (pr, pc) = (inv_perm[r], inv_perm[c]);
            counts[pr.max(pc) + 1] += 1;
        }
        for c in 0..n {
            counts[c + 1] += counts[c];
        }
        let c_col_ptr = counts.clone();
        let mut next = counts;
        let nnz = m.nnz();
        let mut c_row_idx = vec![0usize; nnz];
        let mut c_src = vec![0usize; nnz];
        for (src, (r, c, _)) in m.iter_upper().enumerate() {
            let (pr, pc) = (inv_perm[r], inv_perm[c]);
            let (rr, cc) = if pr <= pc { (pr, pc) } else { (pc, pr) };
            c_row_idx[next[cc]] = rr;
            c_src[next[cc]] = src;
            next[cc] += 1;
        }
        for c in 0..n {
            let lo = c_col_ptr[c];
            let hi = c_col_ptr[c + 1];
            let mut pairs: Vec<(usize, usize)> = (lo..hi).map(|p| (c_row_idx[p], c_src[p])).collect();
            pairs.sort_unstable();
            for (off, (r, s)) in pairs.into_iter().enumerate() {
                c_row_idx[lo + off] = r;
                c_src[lo + off] = s;
            }
        }

        // row patterns of L
        let mut row_ptr = vec![0usize; n + 1];
        let mut row_cols = Vec::new();
        if dense {
            for k in 0..n {
                row_cols.extend(0..k);
                row_ptr[k + 1] = row_cols.len();
            }
        } else {
            let parent = etree(n, &c_col_ptr, &c_row_idx);
            let mut mark = vec![NONE; n];
            let mut stack = Vec::with_capacity(n);
            let mut pattern = Vec::with_capacity(n);
            for k in 0..n {
                pattern.clear();
                mark[k] = k;
                for p in c_col_ptr[k]..c_col_ptr[k + 1] {
                    let mut i = c_row_idx[p];
                    if i > k {
                        continue;
                    }
                    stack.clear();
                    while mark[i] != k {
                        stack.push(i);
                        mark[i] = k;
                        i = parent[i];
                        if i == NONE {
                            break;
                        }
                    }
                    while let Some(s) = stack.pop() {
                        pattern.push(s);
                    }
                }
                // every node now precedes its ancestors
                pattern.reverse();
                row_cols.extend_from_slice(&pattern);
                row_ptr[k + 1] = row_cols.len();
            }
        }

        // column counts from the row patterns
        let mut l_col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            l_col_ptr[k + 1] += 1;
            for &i in &row_cols[row_ptr[k]..row_ptr[k + 1]] {
                l_col_ptr[i + 1] += 1;
            }
        }
        for c in 0..n {
            l_col_ptr[c + 1] += l_col_ptr[c];
        }
        let mut fill = l_col_ptr.clone();
        let mut l_row_idx = vec![0usize; l_col_ptr[n]];
        for k in 0..n {
            for &i in &row_cols[row_ptr[k]..row_ptr[k + 1]] {
                l_row_idx[fill[i]] = k;
                fill[i] += 1;
            }
            l_row_idx[fill[k]] = k;
            fill[k] += 1;
        }

        Self {
            n,
            perm,
            src_col_ptr: m.col_ptr().to_vec(),
            src_row_idx: m.row_idx().to_vec(),
            c_col_ptr,
            c_row_idx,
            c_src,
            l_col_ptr,
            l_row_idx,
            row_ptr,
            row_cols,
            dense,
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Number of stored entries of `L`, diagonal included.
    pub fn factor_nnz(&self) -> usize {
        self.l_col_ptr[self.n]
    }

    pub fn is_dense(&self) -> bool {
        self.dense
    }

    fn matches<T: Scalar>(&self, m: &SparseSym<T>) -> bool {
        m.order() == self.n && m.col_ptr() == self.src_col_ptr.as_slice() && m.row_idx() == self.src_row_idx.as_slice()
    }

    fn factor_into<T: Scalar>(&self, m: &SparseSym<T>, lx: &mut [T]) -> Result<(), SparseError> {
        if !self.matches(m) {
            return Err(SparseError::PatternMismatch);
        }
        let n = self.n;
        let src = m.values();
        let mut x = vec![T::zero(); n];
        let mut next: Vec<usize> = self.l_col_ptr[..n].to_vec();
        let tol = T::lit(PIVOT_TOLERANCE);
        for k in 0..n {
            for p in self.c_col_ptr[k]..self.c_col_ptr[k + 1] {
                x[self.c_row_idx[p]] = src[self.c_src[p]];
            }
            let mut d = x[k];
            x[k] = T::zero();
            for &i in &self.row_cols[self.row_ptr[k]..self.row_ptr[k + 1]] {
                let lki = x[i] / lx[self.l_col_ptr[i]];
                x[i] = T::zero();
                for p in (self.l_col_ptr[i] + 1)..next[i] {
                    x[self.l_row_idx[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                lx[next[i]] = lki;
                next[i] += 1;
            }
            if !(d > tol) {
                return Err(SparseError::NotPositiveDefinite { column: self.perm[k], pivot: d.as_f64() });
            }
            lx[next[k]] = d.sqrt();
            next[k] += 1;
        }
        Ok(())
    }
}

/// Elimination tree of the permuted upper triangle (cs_etree without the
/// AᵀA option).
fn etree(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for p in col_ptr[k]..col_ptr[k + 1] {
            let mut i = row_idx[p];
            while i != NONE && i < k {
                let inext = ancestor[i];
                ancestor[i] = k;
                if inext == NONE {
                    parent[i] = k;
                }
                i = inext;
            }
        }
    }
    parent
}

fn amd_ordering<T: Scalar>(m: &SparseSym<T>) -> Vec<usize> {
    let n = m.order();
    // AMD wants both triangles without the diagonal being required; give it
    // the full symmetric pattern.
    let cols = m.full_columns();
    let mut ap = Vec::with_capacity(n + 1);
    let mut ai = Vec::new();
    ap.push(0usize);
    for col in &cols {
        ai.extend(col.iter().map(|e| e.0));
        ap.push(ai.len());
    }
    match amd::order(n, &ap, &ai, &amd::Control::default()) {
        Ok((p, _, _)) => p,
        Err(_) => (0..n).collect(),
    }
}

/// Numeric Cholesky factor `P A Pᵀ = L Lᵀ` sharing its symbolic analysis.
#[derive(Debug, Clone)]
pub struct CholFactor<T> {
    symbolic: std::sync::Arc<SymbolicCholesky>,
    values: Vec<T>,
}

impl<T: Scalar> CholFactor<T> {
    /// Analyses and factors `m` in one go.
    pub fn new(m: &SparseSym<T>) -> Result<Self, SparseError> {
        let symbolic = std::sync::Arc::new(SymbolicCholesky::analyse(m));
        Self::with_symbolic(symbolic, m)
    }

    /// Factors `m` reusing a shared analysis.
    pub fn with_symbolic(symbolic: std::sync::Arc<SymbolicCholesky>, m: &SparseSym<T>) -> Result<Self, SparseError> {
        let mut values = vec![T::zero(); symbolic.factor_nnz()];
        symbolic.factor_into(m, &mut values)?;
        Ok(Self { symbolic, values })
    }

    /// Refactors in place; `m` must have the analysed pattern.
    pub fn refactor(&mut self, m: &SparseSym<T>) -> Result<(), SparseError> {
        let sym = std::sync::Arc::clone(&self.symbolic);
        sym.factor_into(m, &mut self.values)
    }

    pub fn symbolic(&self) -> &std::sync::Arc<SymbolicCholesky> {
        &self.symbolic
    }

    pub fn order(&self) -> usize {
        self.symbolic.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.symbolic.perm
    }

    pub(crate) fn l_col_ptr(&self) -> &[usize] {
        &self.symbolic.l_col_ptr
    }

    pub(crate) fn l_row_idx(&self) -> &[usize] {
        &self.symbolic.l_row_idx
    }

    pub(crate) fn l_values(&self) -> &[T] {
        &self.values
    }

    /// The factor `L` (in permuted ordering) as dense rows.
    pub fn lower_dense(&self) -> Vec<Vec<T>> {
        let n = self.order();
        let mut l = vec![vec![T::zero(); n]; n];
        for j in 0..n {
            for p in self.symbolic.l_col_ptr[j]..self.symbolic.l_col_ptr[j + 1] {
                l[self.symbolic.l_row_idx[p]][j] = self.values[p];
            }
        }
        l
    }

    /// `log |A|` as twice the sum of the log diagonal of `L`.
    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.order())
            .map(|j| self.values[self.symbolic.l_col_ptr[j]].ln())
            .sum::<T>()
            * two
    }

    fn check_len(&self, len: usize) -> Result<(), SparseError> {
        if len != self.order() {
            Err(SparseError::DimensionMismatch { expected: self.order(), found: len })
        } else {
            Ok(())
        }
    }

    /// In-place `L y = b` on a permuted vector.
    fn forward(&self, y: &mut [T]) {
        let cp = &self.symbolic.l_col_ptr;
        let ri = &self.symbolic.l_row_idx;
        for j in 0..self.order() {
            let yj = y[j] / self.values[cp[j]];
            y[j] = yj;
            for p in (cp[j] + 1)..cp[j + 1] {
                y[ri[p]] -= self.values[p] * yj;
            }
        }
    }

    /// In-place `Lᵀ x = y` on a permuted vector.
    fn backward(&self, x: &mut [T]) {
        let cp = &self.symbolic.l_col_ptr;
        let ri = &self.symbolic.l_row_idx;
        for j in (0..self.order()).rev() {
            let mut s = x[j];
            for p in (cp[j] + 1)..cp[j + 1] {
                s -= self.values[p] * x[ri[p]];
            }
            x[j] = s / self.values[cp[j]];
        }
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>, SparseError> {
        self.check_len(rhs.len())?;
        let perm = &self.symbolic.perm;
        let mut work: Vec<T> = perm.iter().map(|&i| rhs[i]).collect();
        self.forward(&mut work);
        self.backward(&mut work);
        let mut out = vec![T::zero(); rhs.len()];
        for (k, &i) in perm.iter().enumerate() {
            out[i] = work[k];
        }
        Ok(out)
    }

    /// Draws from `N(mean, A⁻¹)` treating the factored matrix as a precision.
    pub fn sample_gaussian<R: Rng + ?Sized>(&self, mean: &[T], rng: &mut R) -> Result<Vec<T>, SparseError> {
        self.check_len(mean.len())?;
        let z: Vec<T> = (0..self.order()).map(|_| T::standard_normal(rng)).collect();
        self.sample_with_noise(mean, z)
    }

    /// `mean + P L⁻ᵀ z` for a caller-provided standard-normal vector.
    pub fn sample_with_noise(&self, mean: &[T], mut z: Vec<T>) -> Result<Vec<T>, SparseError> {
        self.check_len(mean.len())?;
        self.check_len(z.len())?;
        self.backward(&mut z);
        let mut out = mean.to_vec();
        for (k, &i) in self.symbolic.perm.iter().enumerate() {
            out[i] += z[k];
        }
        Ok(out)
    }
}
