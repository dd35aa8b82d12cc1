//! Piecewise-linear finite element meshes in one and two dimensions.

mod fem;
mod locate;

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::Scalar;

pub use fem::{build_k, build_k_alpha, FemOperators};
pub use locate::{ObservationMatrix, PartialObservation};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid interval: need a < b and at least 2 nodes")]
    InvalidInterval,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("element {element} has zero or negative measure")]
    DegenerateElement { element: usize },
    #[error("kappa must be positive")]
    NonPositiveKappa,
    #[error("alpha must be 2 or 4, got {0}")]
    UnsupportedAlpha(u32),
    #[error("location {index} lies outside the mesh")]
    LocationOutsideMesh { index: usize },
    #[error("mesh file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub x0: T,
    pub x1: T,
    pub y0: T,
    pub y1: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(x0: T, x1: T, y0: T, y1: T) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn contains(&self, p: [T; 2], slack: T) -> bool {
        p[0] >= self.x0 - slack && p[0] <= self.x1 + slack && p[1] >= self.y0 - slack && p[1] <= self.y1 + slack
    }
}

/// Triangulation (or segment mesh) with per-node interior flags.
///
/// Nodes always carry two coordinates; the second is zero for 1D meshes.
/// Elements always carry three indices; the third repeats the second for
/// 1D segments and is never read.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    dim: usize,
    nodes: Vec<[T; 2]>,
    elements: Vec<[usize; 3]>,
    interior: Vec<bool>,
}

impl<T: Scalar> Mesh<T> {
    /// Checks the structural invariants and builds a mesh.
    pub fn new(dim: usize, nodes: Vec<[T; 2]>, elements: Vec<[usize; 3]>, interior: Vec<bool>) -> Result<Self, MeshError> {
        if dim != 1 && dim != 2 {
            return Err(MeshError::InvalidGeometry(format!("dimension {dim}")));
        }
        if interior.len() != nodes.len() {
            return Err(MeshError::InvalidGeometry("interior flag count differs from node count".into()));
        }
        if nodes.is_empty() || elements.is_empty() {
            return Err(MeshError::InvalidGeometry("empty mesh".into()));
        }
        let mesh = Self { dim, nodes, elements, interior };
        let n = mesh.nodes.len();
        for e in 0..mesh.elements.len() {
            let idx = mesh.element(e);
            for (a, &i) in idx.iter().enumerate() {
                if i >= n {
                    return Err(MeshError::InvalidGeometry(format!("element {e} references node {i}")));
                }
                if idx[..a].contains(&i) {
                    return Err(MeshError::InvalidGeometry(format!("element {e} repeats node {i}")));
                }
            }
            if !(mesh.signed_measure(e).abs() > T::zero()) {
                return Err(MeshError::DegenerateElement { element: e });
            }
        }
        if !mesh.is_connected() {
            return Err(MeshError::InvalidGeometry("elements do not form a connected mesh".into()));
        }
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node(&self, i: usize) -> [T; 2] {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[[T; 2]] {
        &self.nodes
    }

    /// Node indices of element `e` (2 or 3 of them).
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim + 1]
    }

    pub fn interior(&self) -> &[bool] {
        &self.interior
    }

    /// Length of a segment or signed area of a triangle.
    pub fn signed_measure(&self, e: usize) -> T {
        let idx = self.element(e);
        if self.dim == 1 {
            (self.nodes[idx[1]][0] - self.nodes[idx[0]][0]).abs()
        } else {
            let [a, b, c] = [self.nodes[idx[0]], self.nodes[idx[1]], self.nodes[idx[2]]];
            ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])) * T::lit(0.5)
        }
    }

    /// Sum of element measures.
    pub fn total_measure(&self) -> T {
        (0..self.n_elements()).map(|e| self.signed_measure(e).abs()).sum()
    }

    fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut used = vec![false; n];
        for e in 0..self.elements.len() {
            let idx = self.element(e);
            for &i in idx {
                used[i] = true;
            }
            for w in idx.windows(2) {
                let (a, b) = (root(&mut parent, w[0]), root(&mut parent, w[1]));
                parent[a] = b;
            }
        }
        if used.iter().any(|u| !u) {
            return false;
        }
        let r0 = root(&mut parent, 0);
        (0..n).all(|i| root(&mut parent, i) == r0)
    }

    /// Writes the plain-text mesh format: a `dim n_nodes n_elements` header,
    /// one coordinate line per node, one 0-based index line per element.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<(), MeshError> {
        writeln!(out, "{} {} {}", self.dim, self.n_nodes(), self.n_elements())?;
        for p in &self.nodes {
            if self.dim == 1 {
                writeln!(out, "{:.16e}", p[0])?;
            } else {
                writeln!(out, "{:.16e} {:.16e}", p[0], p[1])?;
            }
        }
        for e in 0..self.n_elements() {
            let line: Vec<String> = self.element(e).iter().map(|i| i.to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Reads the plain-text mesh format. Imported meshes have every node
    /// flagged interior.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self, MeshError> {
        let mut lines = input.lines().filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let header = lines.next().ok_or_else(|| MeshError::Format("missing header".into()))??;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| MeshError::Format(format!("bad header token '{t}'"))))
            .collect::<Result<_, _>>()?;
        if head.len() != 3 {
            return Err(MeshError::Format("header must be 'dim n_nodes n_elements'".into()));
        }
        let (dim, nn, ne) = (head[0], head[1], head[2]);
        if dim != 1 && dim != 2 {
            return Err(MeshError::Format(format!("unsupported dimension {dim}")));
        }
        let mut nodes = Vec::with_capacity(nn);
        for i in 0..nn {
            let line = lines.next().ok_or_else(|| MeshError::Format(format!("missing node line {i}")))??;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| MeshError::Format(format!("bad coordinate '{t}'"))))
                .collect::<Result<_, _>>()?;
            if vals.len() != dim {
                return Err(MeshError::Format(format!("node line {i} needs {dim} coordinates")));
            }
            nodes.push([T::lit(vals[0]), if dim == 2 { T::lit(vals[1]) } else { T::zero() }]);
        }
        let mut elements = Vec::with_capacity(ne);
        for e in 0..ne {
            let line = lines.next().ok_or_else(|| MeshError::Format(format!("missing element line {e}")))??;
            let idx: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| MeshError::Format(format!("bad index '{t}'"))))
                .collect::<Result<_, _>>()?;
            if idx.len() != dim + 1 {
                return Err(MeshError::Format(format!("element line {e} needs {} indices", dim + 1)));
            }
            elements.push([idx[0], idx[1], *idx.last().unwrap()]);
        }
        let interior = vec![true; nodes.len()];
        Self::new(dim, nodes, elements, interior)
    }
}

/// Uniform segment mesh of `[a, b]` with `n` nodes.
pub fn build_mesh_1d<T: Scalar>(a: T, b: T, n: usize) -> Result<Mesh<T>, MeshError> {
    if !(a < b) || n < 2 {
        return Err(MeshError::InvalidInterval);
    }
    let step = (b - a) / T::from_count(n - 1);
    let nodes: Vec<[T; 2]> = (0..n)
        .map(|i| {
            let x = if i == n - 1 { b } else { a + step * T::from_count(i) };
            [x, T::zero()]
        })
        .collect();
    let elements = (0..n - 1).map(|i| [i, i + 1, i + 1]).collect();
    Mesh::new(1, nodes, elements, vec![true; n])
}

/// Grid coordinates on `[lo, hi]` with at most `edge` spacing.
fn ticks<T: Scalar>(lo: T, hi: T, edge: T) -> Vec<T> {
    let cells = ((hi - lo) / edge).ceil().to_usize().unwrap_or(1).max(1);
    let step = (hi - lo) / T::from_count(cells);
    (0..=cells)
        .map(|i| if i == cells { hi } else { lo + step * T::from_count(i) })
        .collect()
}

fn axis<T: Scalar>(lo: T, hi: T, edge: T, width: T, band_edge: T) -> Vec<T> {
    let mut out = Vec::new();
    if width > T::zero() {
        let left = ticks(lo - width, lo, band_edge);
        out.extend_from_slice(&left[..left.len() - 1]);
    }
    out.extend(ticks(lo, hi, edge));
    if width > T::zero() {
        out.extend(ticks(hi, hi + width, band_edge).into_iter().skip(1));
    }
    out
}

/// Structured triangulation of `domain` at spacing `target_edge`, padded by
/// a band of width `extension_width` meshed at spacing `extension_edge`.
/// Nodes inside the original rectangle are flagged interior.
pub fn build_mesh_2d<T: Scalar>(
    domain: Rect<T>,
    target_edge: T,
    extension_width: T,
    extension_edge: T,
) -> Result<Mesh<T>, MeshError> {
    if !(target_edge > T::zero()) || !(extension_width >= T::zero()) {
        return Err(MeshError::InvalidGeometry("edge must be positive and band width nonnegative".into()));
    }
    if extension_width > T::zero() && !(extension_edge > T::zero()) {
        return Err(MeshError::InvalidGeometry("band edge must be positive".into()));
    }
    if !(domain.x0 < domain.x1) || !(domain.y0 < domain.y1) {
        return Err(MeshError::InvalidGeometry("empty rectangle".into()));
    }
    let xs = axis(domain.x0, domain.x1, target_edge, extension_width, extension_edge);
    let ys = axis(domain.y0, domain.y1, target_edge, extension_width, extension_edge);
    let (nx, ny) = (xs.len(), ys.len());
    let slack = target_edge * T::lit(1e-9);
    let mut nodes = Vec::with_capacity(nx * ny);
    let mut interior = Vec::with_capacity(nx * ny);
    for &y in &ys {
        for &x in &xs {
            nodes.push([x, y]);
            interior.push(domain.contains([x, y], slack));
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut elements = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elements.push([a, b, c]);
            elements.push([a, c, d]);
        }
    }
    Mesh::new(2, nodes, elements, interior)
}

/// Reads observation locations from a CSV with columns `x[,y]` (header
/// required).
pub fn read_locations<T: Scalar, R: std::io::Read>(input: R, dim: usize) -> Result<Vec<[T; 2]>, MeshError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| MeshError::Format(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let xi = col("x").ok_or_else(|| MeshError::Format("missing column 'x'".into()))?;
    let yi = if dim == 2 {
        Some(col("y").ok_or_else(|| MeshError::Format("missing column 'y'".into()))?)
    } else {
        None
    };
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| MeshError::Format(e.to_string()))?;
        let parse = |k: usize| -> Result<T, MeshError> {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .map(T::lit)
                .ok_or_else(|| MeshError::Format(format!("bad coordinate on data line {}", line + 1)))
        };
        let x = parse(xi)?;
        let y = match yi {
            Some(k) => parse(k)?,
            None => T::zero(),
        };
        out.push([x, y]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_meshes() {
        let m = build_mesh_1d(0.0f64, 1.0, 3).unwrap();
        assert_eq!(m.nodes().iter().map(|p| p[0]).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        assert_eq!(m.element(0), &[0, 1]);
        assert_eq!(m.element(1), &[1, 2]);
        assert_eq!(build_mesh_1d(0.0f64, 1.0, 2).unwrap().n_elements(), 1);
        let m = build_mesh_1d(0.0f64, 10.0, 101).unwrap();
        assert!((m.node(1)[0] - 0.1).abs() < 1e-15);
        assert!((m.total_measure() - 10.0).abs() < 1e-12);
        assert!(matches!(build_mesh_1d(1.0f64, 1.0, 3), Err(MeshError::InvalidInterval)));
    }

    #[test]
    fn unit_square_counts() {
        let m = build_mesh_2d(Rect::new(0.0f64, 1.0, 0.0, 1.0), 0.5, 0.0, 0.0).unwrap();
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.n_elements(), 8);
        assert!(m.interior().iter().all(|&f| f));
    }

    #[test]
    fn band_flags_and_area() {
        let m = build_mesh_2d(Rect::new(0.0f64, 1.0, 0.0, 1.0), 0.5, 1.0, 1.0).unwrap();
        assert_eq!(m.n_nodes(), 25);
        for (p, &f) in m.nodes().iter().zip(m.interior()) {
            let inside = (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]);
            assert_eq!(inside, f);
        }
        assert_eq!(m.interior().iter().filter(|&&f| f).count(), 9);
        assert!((m.total_measure() - 9.0).abs() < 1e-10);
    }

    #[test]
    fn halving_edge_quadruples_triangles() {
        let r = Rect::new(0.0f64, 2.0, 0.0, 1.0);
        let a = build_mesh_2d(r, 0.5, 0.0, 0.0).unwrap().n_elements();
        let b = build_mesh_2d(r, 0.25, 0.0, 0.0).unwrap().n_elements();
        assert_eq!(b, 4 * a);
    }

    #[test]
    fn text_round_trip() {
        let m = build_mesh_2d(Rect::new(0.0f64, 1.0, 0.0, 2.0), 0.5, 0.0, 0.0).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = Mesh::<f64>::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_degenerate_and_disconnected() {
        let nodes = vec![[0.0f64, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let e = Mesh::new(2, nodes, vec![[0, 1, 2]], vec![true; 3]);
        assert!(matches!(e, Err(MeshError::DegenerateElement { element: 0 })));
        let nodes = vec![[0.0f64, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        let e = Mesh::new(1, nodes, vec![[0, 1, 1], [2, 3, 3]], vec![true; 4]);
        assert!(matches!(e, Err(MeshError::InvalidGeometry(_))));
    }

    #[test]
    fn reads_location_csv() {
        let locs: Vec<[f64; 2]> = read_locations("x,y\n0.5,1\n2,3\n".as_bytes(), 2).unwrap();
        assert_eq!(locs, vec![[0.5, 1.0], [2.0, 3.0]]);
        assert!(read_locations::<f64, _>("a,b\n1,2\n".as_bytes(), 2).is_err());
    }
}
