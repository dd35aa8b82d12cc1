use super::{Mesh, MeshError};
use crate::sparse::SparseSym;
use crate::Scalar;

/// Lumped mass `h`, its diagonal matrix `C` and the stiffness matrix `G`.
#[derive(Debug, Clone)]
pub struct FemOperators<T> {
    pub h: Vec<T>,
    pub c_lumped: SparseSym<T>,
    pub g: SparseSym<T>,
}

impl<T: Scalar> FemOperators<T> {
    /// Assembles linear-element operators element by element.
    pub fn assemble(mesh: &Mesh<T>) -> Result<Self, MeshError> {
        let n = mesh.n_nodes();
        let mut h = vec![T::zero(); n];
        let mut trip = Vec::with_capacity(mesh.n_elements() * 6 + n);
        for i in 0..n {
            trip.push((i, i, T::zero()));
        }
        for e in 0..mesh.n_elements() {
            let idx = mesh.element(e);
            let meas = mesh.signed_measure(e);
            if !(meas.abs() > T::zero()) {
                return Err(MeshError::DegenerateElement { element: e });
            }
            if mesh.dim() == 1 {
                let len = meas.abs();
                let half = len * T::lit(0.5);
                h[idx[0]] += half;
                h[idx[1]] += half;
                let s = T::one() / len;
                trip.push((idx[0], idx[0], s));
                trip.push((idx[1], idx[1], s));
                trip.push((idx[0], idx[1], -s));
            } else {
                let area = meas.abs();
                let third = area / T::lit(3.0);
                let p: Vec<[T; 2]> = idx.iter().map(|&i| mesh.node(i)).collect();
                // gradients of the barycentric coordinates times 2 * signed area
                let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
                let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
                let scale = T::one() / (T::lit(4.0) * area);
                for a in 0..3 {
                    h[idx[a]] += third;
                    for bb in a..3 {
                        let v = (b[a] * b[bb] + c[a] * c[bb]) * scale;
                        trip.push((idx[a], idx[bb], v));
                    }
                }
            }
        }
        let g = SparseSym::from_triplets(n, trip).expect("element indices validated by the mesh");
        let c_lumped = SparseSym::diagonal(&h);
        Ok(Self { h, c_lumped, g })
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }
}

/// `K = κ² C + G`, stored on the pattern of `G`.
pub fn build_k<T: Scalar>(ops: &FemOperators<T>, kappa: T) -> Result<SparseSym<T>, MeshError> {
    if !(kappa > T::zero()) {
        return Err(MeshError::NonPositiveKappa);
    }
    let k2 = kappa * kappa;
    let mut k = ops.g.clone();
    for (i, &hi) in ops.h.iter().enumerate() {
        let p = k.position(i, i).expect("stiffness pattern holds the diagonal");
        k.values_mut()[p] += k2 * hi;
    }
    Ok(k)
}

/// `K_α` for α = 2 (`K`) or α = 4 (`K C⁻¹ K`).
pub fn build_k_alpha<T: Scalar>(ops: &FemOperators<T>, kappa: T, alpha: u32) -> Result<SparseSym<T>, MeshError> {
    let k = build_k(ops, kappa)?;
    match alpha {
        2 => Ok(k),
        4 => {
            let inv_h: Vec<T> = ops.h.iter().map(|&v| T::one() / v).collect();
            Ok(k.congruence_diag(&inv_h).expect("dimensions agree"))
        }
        other => Err(MeshError::UnsupportedAlpha(other)),
    }
}
