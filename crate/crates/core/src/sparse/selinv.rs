use std::collections::BTreeMap;

use super::{CholFactor, SparseSym};
use crate::Scalar;

impl<T: Scalar> CholFactor<T> {
    /// Entries of `A⁻¹` on the pattern of `L + Lᵀ`, returned in the original
    /// ordering. The pattern always contains the pattern of `A` itself.
    pub fn selected_inverse(&self) -> SparseSym<T> {
        let n = self.order();
        let cp = self.l_col_ptr();
        let ri = self.l_row_idx();
        let lx = self.l_values();
        let mut z = vec![T::zero(); lx.len()];

        // (row, col) lookup inside the lower pattern, row >= col
        let find = |row: usize, col: usize| -> usize {
            let lo = cp[col];
            let hi = cp[col + 1];
            lo + ri[lo..hi]
                .binary_search(&row)
                .expect("selected inverse lookup outside the factor pattern")
        };

        let mut acc = Vec::new();
        for j in (0..n).rev() {
            let dj = lx[cp[j]];
            let inv_d = T::one() / dj;
            let below = (cp[j] + 1)..cp[j + 1];
            acc.clear();
            for a in below.clone() {
                let ra = ri[a];
                let mut s = T::zero();
                for b in below.clone() {
                    let rb = ri[b];
                    let zab = if rb >= ra { z[find(rb, ra)] } else { z[find(ra, rb)] };
                    s += lx[b] * zab;
                }
                acc.push(-inv_d * s);
            }
            let mut diag = inv_d;
            for (k, a) in below.clone().enumerate() {
                z[a] = acc[k];
                diag -= lx[a] * acc[k];
            }
            z[cp[j]] = diag * inv_d;
        }

        let perm = self.permutation();
        let mut upper: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for j in 0..n {
            for p in cp[j]..cp[j + 1] {
                let (a, b) = (perm[ri[p]], perm[j]);
                let (r, c) = if a <= b { (a, b) } else { (b, a) };
                upper.insert((c, r), z[p]);
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(upper.len());
        let mut values = Vec::with_capacity(upper.len());
        for ((c, r), v) in upper {
            col_ptr[c + 1] += 1;
            row_idx.push(r);
            values.push(v);
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        SparseSym::from_upper_csc(n, col_ptr, row_idx, values).expect("selected inverse assembly")
    }
}
