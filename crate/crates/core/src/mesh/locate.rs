use super::{Mesh, MeshError};
use crate::Scalar;

const SNAP: f64 = 1e-12;

fn snap_tol<T: Scalar>() -> T {
    T::lit(SNAP).max(T::epsilon() * T::lit(8.0))
}

/// Sparse observation matrix with rows of `(node, weight)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix<T> {
    n_nodes: usize,
    rows: Vec<Vec<(usize, T)>>,
}

/// Observation rows for the locations that fall inside the mesh, plus the
/// indices of those that do not.
#[derive(Debug, Clone)]
pub struct PartialObservation<T> {
    pub matrix: ObservationMatrix<T>,
    /// Original index of each row of `matrix`.
    pub inside: Vec<usize>,
    pub outside: Vec<usize>,
}

impl<T: Scalar> ObservationMatrix<T> {
    pub fn from_rows(n_nodes: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        Self { n_nodes, rows }
    }

    /// Basis-function values at each location; fails on the first location
    /// outside the mesh.
    pub fn build(mesh: &Mesh<T>, locations: &[[T; 2]]) -> Result<Self, MeshError> {
        let loc = Locator::new(mesh);
        let rows = locations
            .iter()
            .enumerate()
            .map(|(i, p)| loc.weights(*p).ok_or(MeshError::LocationOutsideMesh { index: i }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { n_nodes: mesh.n_nodes(), rows })
    }

    /// Like [`ObservationMatrix::build`] but keeps going past locations
    /// outside the mesh and reports them.
    pub fn build_partial(mesh: &Mesh<T>, locations: &[[T; 2]]) -> PartialObservation<T> {
        let loc = Locator::new(mesh);
        let mut rows = Vec::new();
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for (i, p) in locations.iter().enumerate() {
            match loc.weights(*p) {
                Some(r) => {
                    rows.push(r);
                    inside.push(i);
                }
                None => outside.push(i),
            }
        }
        PartialObservation { matrix: Self { n_nodes: mesh.n_nodes(), rows }, inside, outside }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<(usize, T)>] {
        &self.rows
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self { n_nodes: self.n_nodes, rows: idx.iter().map(|&i| self.rows[i].clone()).collect() }
    }

    /// `A w`.
    pub fn mul_vec(&self, w: &[T]) -> Vec<T> {
        self.rows.iter().map(|r| r.iter().map(|&(j, a)| a * w[j]).sum()).collect()
    }

    /// `Aᵀ y`.
    pub fn transpose_mul(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_nodes];
        for (r, &yi) in self.rows.iter().zip(y) {
            for &(j, a) in r {
                out[j] += a * yi;
            }
        }
        out
    }

    /// Upper-triangle triplets of `Aᵀ A` scaled by `s`.
    pub fn gram_triplets(&self, s: T) -> Vec<(usize, usize, T)> {
        let mut out = Vec::new();
        for r in &self.rows {
            for &(i, a) in r {
                for &(j, b) in r {
                    if i <= j {
                        out.push((i, j, s * a * b));
                    }
                }
            }
        }
        out
    }
}

/// Uniform background grid over element bounding boxes.
struct Locator<'a, T> {
    mesh: &'a Mesh<T>,
    origin: [T; 2],
    cell: [T; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'a, T: Scalar> Locator<'a, T> {
    fn new(mesh: &'a Mesh<T>) -> Self {
        let mut lo = [T::infinity(); 2];
        let mut hi = [T::neg_infinity(); 2];
        for p in mesh.nodes() {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let ne = mesh.n_elements();
        let per_axis = if mesh.dim() == 1 { ne } else { (ne as f64).sqrt().ceil() as usize };
        let mut dims = [per_axis.max(1), if mesh.dim() == 1 { 1 } else { per_axis.max(1) }];
        let mut cell = [T::one(); 2];
        for d in 0..2 {
            let span = hi[d] - lo[d];
            if span > T::zero() {
                cell[d] = span / T::from_count(dims[d]);
            } else {
                dims[d] = 1;
            }
        }
        let mut loc = Self { mesh, origin: lo, cell, dims, buckets: vec![Vec::new(); dims[0] * dims[1]] };
        for e in 0..ne {
            let mut blo = [T::infinity(); 2];
            let mut bhi = [T::neg_infinity(); 2];
            for &i in mesh.element(e) {
                let p = mesh.node(i);
                for d in 0..2 {
                    blo[d] = blo[d].min(p[d]);
                    bhi[d] = bhi[d].max(p[d]);
                }
            }
            let (i0, j0) = loc.cell_of(blo);
            let (i1, j1) = loc.cell_of(bhi);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    loc.buckets[j * loc.dims[0] + i].push(e);
                }
            }
        }
        loc
    }

    fn cell_of(&self, p: [T; 2]) -> (usize, usize) {
        let idx = |d: usize| {
            let t = ((p[d] - self.origin[d]) / self.cell[d]).floor();
            let t = t.max(T::zero()).to_usize().unwrap_or(0);
            t.min(self.dims[d] - 1)
        };
        (idx(0), idx(1))
    }

    fn weights(&self, p: [T; 2]) -> Option<Vec<(usize, T)>> {
        let tol = snap_tol::<T>();
        if !p[0].is_finite() || !p[1].is_finite() {
            return None;
        }
        for d in 0..self.mesh.dim() {
            let lo = self.origin[d];
            let hi = self.origin[d] + self.cell[d] * T::from_count(self.dims[d]);
            let slack = tol * (hi - lo).abs().max(T::one());
            if p[d] < lo - slack || p[d] > hi + slack {
                return None;
            }
        }
        let (ci, cj) = self.cell_of(p);
        for &e in &self.buckets[cj * self.dims[0] + ci] {
            let lam = self.barycentric(e, p);
            if lam.iter().all(|&l| l >= -tol) {
                return Some(snap(self.mesh.element(e), &lam));
            }
        }
        None
    }

    fn barycentric(&self, e: usize, p: [T; 2]) -> Vec<T> {
        let idx = self.mesh.element(e);
        if self.mesh.dim() == 1 {
            let (a, b) = (self.mesh.node(idx[0])[0], self.mesh.node(idx[1])[0]);
            let t = (p[0] - a) / (b - a);
            vec![T::one() - t, t]
        } else {
            let [a, b, c] = [self.mesh.node(idx[0]), self.mesh.node(idx[1]), self.mesh.node(idx[2])];
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
            vec![T::one() - l1 - l2, l1, l2]
        }
    }
}

fn snap<T: Scalar>(idx: &[usize], lam: &[T]) -> Vec<(usize, T)> {
    let tol = snap_tol::<T>();
    if let Some(k) = lam.iter().position(|&l| l > T::one() - tol) {
        return vec![(idx[k], T::one())];
    }
    let kept: Vec<(usize, T)> = idx
        .iter()
        .zip(lam)
        .filter(|(_, &l)| l > tol)
        .map(|(&i, &l)| (i, l))
        .collect();
    let total: T = kept.iter().map(|e| e.1).sum();
    kept.into_iter().map(|(i, l)| (i, l / total)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh_1d, build_mesh_2d, Rect};

    #[test]
    fn node_midpoint_and_centroid() {
        let m = build_mesh_1d(0.0f64, 1.0, 3).unwrap();
        let a = ObservationMatrix::build(&m, &[[0.5, 0.0], [0.25, 0.0]]).unwrap();
        assert_eq!(a.row(0), &[(1, 1.0)]);
        assert_eq!(a.row(1), &[(0, 0.5), (1, 0.5)]);

        let m = Mesh::new(2, vec![[0.0f64, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![true; 3]).unwrap();
        let a = ObservationMatrix::build(&m, &[[1.0 / 3.0, 1.0 / 3.0]]).unwrap();
        assert_eq!(a.row(0).len(), 3);
        for &(_, w) in a.row(0) {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn outside_is_reported_per_location() {
        let m = build_mesh_2d(Rect::new(0.0f64, 1.0, 0.0, 1.0), 0.25, 0.0, 0.0).unwrap();
        let locs = [[0.5, 0.5], [1.5, 0.5], [0.2, 0.9], [-0.1, 0.0]];
        assert!(matches!(ObservationMatrix::build(&m, &locs), Err(MeshError::LocationOutsideMesh { index: 1 })));
        let part = ObservationMatrix::build_partial(&m, &locs);
        assert_eq!(part.inside, vec![0, 2]);
        assert_eq!(part.outside, vec![1, 3]);
    }

    #[test]
    fn rows_sum_to_one_and_interpolate_linear() {
        let m = build_mesh_2d(Rect::new(0.0f64, 3.0, 0.0, 2.0), 0.3, 1.0, 0.7).unwrap();
        let u: Vec<f64> = m.nodes().iter().map(|p| 1.0 + 2.0 * p[0] - 0.5 * p[1]).collect();
        let locs: Vec<[f64; 2]> = (0..200).map(|i| [-1.0 + 5.0 * ((i * 37 % 200) as f64 / 199.0), -1.0 + 4.0 * (i as f64 / 199.0)]).collect();
        let a = ObservationMatrix::build(&m, &locs).unwrap();
        let au = a.mul_vec(&u);
        for (r, (p, v)) in a.rows().iter().zip(locs.iter().zip(&au)) {
            let s: f64 = r.iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(r.iter().all(|e| e.1 >= 0.0));
            assert!((v - (1.0 + 2.0 * p[0] - 0.5 * p[1])).abs() < 1e-10);
        }
    }

    #[test]
    fn transpose_matches_rows() {
        let m = build_mesh_1d(0.0f64, 2.0, 5).unwrap();
        let a = ObservationMatrix::build(&m, &[[0.25, 0.0], [1.9, 0.0]]).unwrap();
        let aty = a.transpose_mul(&[1.0, 2.0]);
        assert!((aty[0] - 0.5).abs() < 1e-15 && (aty[1] - 0.5).abs() < 1e-15);
        assert!((aty[3] - 0.4).abs() < 1e-12 && (aty[4] - 1.6).abs() < 1e-12);
    }
}
