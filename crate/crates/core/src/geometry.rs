//! P1 meshes and their bulk/boundary matrices.
//!
//! Two backends are available: the interval `[0, L]`, whose boundary is the
//! two endpoints with counting measure (so the boundary stiffness vanishes),
//! and the disk of radius `R`, meshed by uniform refinement of an inscribed
//! hexagon with boundary nodes projected onto the circle.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sparse::CsrMatrix;

/// Deepest disk refinement accepted by [`build_disk`].
pub const MAX_DISK_REFINE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Interval,
    Disk,
}

#[derive(Debug, Clone)]
pub struct Geometry {
    backend: Backend,
    size: f64,
    level: usize,
    nodes: Vec<[f64; 2]>,
    cells: Vec<Vec<usize>>,
    boundary_nodes: Vec<usize>,
    /// Boundary elements as pairs of boundary-local indices.
    boundary_cells: Vec<[usize; 2]>,
    boundary_slot: Vec<Option<usize>>,
    bulk_mass: CsrMatrix,
    bulk_stiffness: CsrMatrix,
    boundary_mass: CsrMatrix,
    boundary_stiffness: CsrMatrix,
    volume: f64,
    surface: f64,
    poincare: OnceLock<std::result::Result<f64, Error>>,
}

/// P1 discretization of `[0, length]` with `n_cells` uniform cells.
pub fn build_interval(length: f64, n_cells: usize) -> Result<Geometry> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::Config(format!("interval length must be positive, got {length}")));
    }
    if n_cells == 0 {
        return Err(Error::Config("interval needs at least one cell".into()));
    }
    let n = n_cells + 1;
    let h = length / n_cells as f64;
    let nodes: Vec<[f64; 2]> = (0..n).map(|i| [i as f64 * h, 0.0]).collect();
    let cells: Vec<Vec<usize>> = (0..n_cells).map(|i| vec![i, i + 1]).collect();

    let mut mass = Vec::with_capacity(4 * n_cells);
    let mut stiff = Vec::with_capacity(4 * n_cells);
    for c in &cells {
        let (a, b) = (c[0], c[1]);
        mass.extend([(a, a, h / 3.0), (b, b, h / 3.0), (a, b, h / 6.0), (b, a, h / 6.0)]);
        stiff.extend([(a, a, 1.0 / h), (b, b, 1.0 / h), (a, b, -1.0 / h), (b, a, -1.0 / h)]);
    }
    let boundary_nodes = vec![0, n - 1];
    Ok(Geometry::finish(
        Backend::Interval,
        length,
        n_cells,
        nodes,
        cells,
        boundary_nodes,
        Vec::new(),
        CsrMatrix::from_triplets(n, n, &mass),
        CsrMatrix::from_triplets(n, n, &stiff),
        CsrMatrix::identity(2),
        CsrMatrix::zeros(2, 2),
    ))
}

/// P1 triangulation of the disk of `radius` after `n_refine` uniform
/// refinements of the inscribed hexagon.
pub fn build_disk(radius: f64, n_refine: usize) -> Result<Geometry> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Config(format!("disk radius must be positive, got {radius}")));
    }
    if n_refine > MAX_DISK_REFINE {
        return Err(Error::Resource(format!(
            "disk refinement {n_refine} exceeds the limit of {MAX_DISK_REFINE}"
        )));
    }

    let mut nodes: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    for j in 0..6 {
        let theta = 2.0 * PI * j as f64 / 6.0;
        nodes.push([radius * theta.cos(), radius * theta.sin()]);
    }
    let mut tris: Vec<[usize; 3]> = (0..6).map(|j| [0, 1 + j, 1 + (j + 1) % 6]).collect();
    let mut bedges: Vec<[usize; 2]> = (0..6).map(|j| [1 + j, 1 + (j + 1) % 6]).collect();

    for _ in 0..n_refine {
        let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let (pa, pb) = (nodes[a], nodes[b]);
                nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                nodes.len() - 1
            })
        };
        let mut new_tris = Vec::with_capacity(4 * tris.len());
        for &[a, b, c] in &tris {
            let mab = midpoint(a, b, &mut nodes);
            let mbc = midpoint(b, c, &mut nodes);
            let mca = midpoint(c, a, &mut nodes);
            new_tris.push([a, mab, mca]);
            new_tris.push([mab, b, mbc]);
            new_tris.push([mca, mbc, c]);
            new_tris.push([mab, mbc, mca]);
        }
        let mut new_edges = Vec::with_capacity(2 * bedges.len());
        for &[a, b] in &bedges {
            let m = midpoint(a, b, &mut nodes);
            let p = nodes[m];
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            nodes[m] = [p[0] * radius / r, p[1] * radius / r];
            new_edges.push([a, m]);
            new_edges.push([m, b]);
        }
        tris = new_tris;
        bedges = new_edges;
    }

    let n = nodes.len();
    let mut mass = Vec::with_capacity(9 * tris.len());
    let mut stiff = Vec::with_capacity(9 * tris.len());
    for t in &tris {
        let p: Vec<[f64; 2]> = t.iter().map(|&i| nodes[i]).collect();
        let signed = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let area = signed.abs();
        let b: Vec<f64> = (0..3).map(|i| p[(i + 1) % 3][1] - p[(i + 2) % 3][1]).collect();
        let c: Vec<f64> = (0..3).map(|i| p[(i + 2) % 3][0] - p[(i + 1) % 3][0]).collect();
        for i in 0..3 {
            for j in 0..3 {
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                mass.push((t[i], t[j], m));
                stiff.push((t[i], t[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * area)));
            }
        }
    }

    let mut on_boundary: Vec<usize> = bedges.iter().flatten().copied().collect();
    on_boundary.sort_unstable();
    on_boundary.dedup();
    let angle = |i: usize| {
        let a = nodes[i][1].atan2(nodes[i][0]);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    };
    on_boundary.sort_by(|&i, &j| angle(i).total_cmp(&angle(j)));
    let mut slot = vec![usize::MAX; n];
    for (k, &i) in on_boundary.iter().enumerate() {
        slot[i] = k;
    }
    let nb = on_boundary.len();
    let local_edges: Vec<[usize; 2]> = bedges.iter().map(|&[a, b]| [slot[a], slot[b]]).collect();
    let mut bmass = Vec::with_capacity(4 * nb);
    let mut bstiff = Vec::with_capacity(4 * nb);
    for &[a, b] in &local_edges {
        let (pa, pb) = (nodes[on_boundary[a]], nodes[on_boundary[b]]);
        let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        bmass.extend([
            (a, a, len / 3.0),
            (b, b, len / 3.0),
            (a, b, len / 6.0),
            (b, a, len / 6.0),
        ]);
        bstiff.extend([
            (a, a, 1.0 / len),
            (b, b, 1.0 / len),
            (a, b, -1.0 / len),
            (b, a, -1.0 / len),
        ]);
    }

    let cells = tris.iter().map(|t| t.to_vec()).collect();
    Ok(Geometry::finish(
        Backend::Disk,
        radius,
        n_refine,
        nodes,
        cells,
        on_boundary,
        local_edges,
        CsrMatrix::from_triplets(n, n, &mass),
        CsrMatrix::from_triplets(n, n, &stiff),
        CsrMatrix::from_triplets(nb, nb, &bmass),
        CsrMatrix::from_triplets(nb, nb, &bstiff),
    ))
}

/// Builds either backend; `refine` is the cell count for the interval and
/// the refinement depth for the disk.
pub fn build(backend: Backend, size: f64, refine: usize) -> Result<Geometry> {
    match backend {
        Backend::Interval => build_interval(size, refine),
        Backend::Disk => build_disk(size, refine),
    }
}

impl Geometry {
    #[allow(clippy::too_many_arguments)]
    fn finish(
        backend: Backend,
        size: f64,
        level: usize,
        nodes: Vec<[f64; 2]>,
        cells: Vec<Vec<usize>>,
        boundary_nodes: Vec<usize>,
        boundary_cells: Vec<[usize; 2]>,
        bulk_mass: CsrMatrix,
        bulk_stiffness: CsrMatrix,
        boundary_mass: CsrMatrix,
        boundary_stiffness: CsrMatrix,
    ) -> Self {
        let mut boundary_slot = vec![None; nodes.len()];
        for (k, &i) in boundary_nodes.iter().enumerate() {
            boundary_slot[i] = Some(k);
        }
        let volume = bulk_mass.sum_entries();
        let surface = boundary_mass.sum_entries();
        Self {
            backend,
            size,
            level,
            nodes,
            cells,
            boundary_nodes,
            boundary_cells,
            boundary_slot,
            bulk_mass,
            bulk_stiffness,
            boundary_mass,
            boundary_stiffness,
            volume,
            surface,
            poincare: OnceLock::new(),
        }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Interval length or disk radius.
    pub fn size(&self) -> f64 {
        self.size
    }

    /// Cell count (interval) or refinement depth (disk).
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn boundary_cells(&self) -> &[[usize; 2]] {
        &self.boundary_cells
    }

    /// Position of bulk node `i` in the boundary numbering, if it lies on Γ.
    pub fn boundary_slot(&self, i: usize) -> Option<usize> {
        self.boundary_slot[i]
    }

    pub fn bulk_mass(&self) -> &CsrMatrix {
        &self.bulk_mass
    }

    pub fn bulk_stiffness(&self) -> &CsrMatrix {
        &self.bulk_stiffness
    }

    pub fn boundary_mass(&self) -> &CsrMatrix {
        &self.boundary_mass
    }

    pub fn boundary_stiffness(&self) -> &CsrMatrix {
        &self.boundary_stiffness
    }

    /// `|Ω|`, the total mass of the bulk mass matrix.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// `|Γ|`, the total mass of the boundary mass matrix.
    pub fn surface(&self) -> f64 {
        self.surface
    }

    /// Mesh width: cell length for the interval, longest edge for the disk.
    pub fn mesh_width(&self) -> f64 {
        let mut h: f64 = 0.0;
        for c in &self.cells {
            for i in 0..c.len() {
                let (a, b) = (self.nodes[c[i]], self.nodes[c[(i + 1) % c.len()]]);
                h = h.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        h
    }

    /// Restriction of bulk nodal values to the boundary nodes.
    pub fn trace(&self, u_bulk: &DVector<f64>) -> Result<DVector<f64>> {
        if u_bulk.len() != self.n_nodes() {
            return Err(Error::shape("trace", self.n_nodes(), u_bulk.len()));
        }
        Ok(DVector::from_iterator(
            self.n_boundary(),
            self.boundary_nodes.iter().map(|&i| u_bulk[i]),
        ))
    }

    /// Transpose of the trace: scatters boundary values into a bulk-sized
    /// vector, zero away from Γ.
    pub fn extend_boundary(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.n_boundary() {
            return Err(Error::shape("boundary extension", self.n_boundary(), v.len()));
        }
        let mut out = DVector::zeros(self.n_nodes());
        for (k, &i) in self.boundary_nodes.iter().enumerate() {
            out[i] += v[k];
        }
        Ok(out)
    }

    /// Evaluates a function of the node coordinates.
    pub fn nodal<F: Fn([f64; 2]) -> f64>(&self, f: F) -> DVector<f64> {
        DVector::from_iterator(self.n_nodes(), self.nodes.iter().map(|p| f(*p)))
    }

    /// Evaluates a function of the boundary node coordinates.
    pub fn boundary_nodal<F: Fn([f64; 2]) -> f64>(&self, f: F) -> DVector<f64> {
        DVector::from_iterator(self.n_boundary(), self.boundary_nodes.iter().map(|&i| f(self.nodes[i])))
    }

    /// For each node of `self`, the index of the coincident node of `fine`.
    /// Fails when the meshes are not nested.
    pub fn restriction_map(&self, fine: &Geometry) -> Result<Vec<usize>> {
        let key = |p: [f64; 2]| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        let lookup: HashMap<(i64, i64), usize> = fine.nodes.iter().enumerate().map(|(i, p)| (key(*p), i)).collect();
        self.nodes
            .iter()
            .map(|p| {
                lookup
                    .get(&key(*p))
                    .copied()
                    .ok_or_else(|| Error::Config("meshes are not nested".into()))
            })
            .collect()
    }

    /// Best constant `C` in `‖u − ⟨u⟩_Γ‖ ≤ C ‖∇u‖` over the discrete space,
    /// where `⟨u⟩_Γ` is the boundary average. Computed once and cached.
    pub fn poincare_constant(&self) -> Result<f64> {
        self.poincare.get_or_init(|| self.compute_poincare()).clone()
    }

    fn compute_poincare(&self) -> Result<f64> {
        let n = self.n_nodes();
        if n < 2 {
            return Err(Error::Numerical("Poincaré constant needs at least two nodes".into()));
        }
        // Boundary-average functional c·x = ∫_Γ x dσ; minimise on its kernel.
        let ones = DVector::from_element(self.n_boundary(), 1.0);
        let c = self.extend_boundary(&self.boundary_mass.mul_vec(&ones))?;
        let p = c.iamax();
        let mut z = DMatrix::zeros(n, n - 1);
        for (col, j) in (0..n).filter(|&j| j != p).enumerate() {
            z[(j, col)] = 1.0;
            z[(p, col)] = -c[j] / c[p];
        }
        let k = self.bulk_stiffness.mul_dense(&z);
        let m = self.bulk_mass.mul_dense(&z);
        let mut kr = z.transpose() * k;
        let mut mr = z.transpose() * m;
        linalg::symmetrize(&mut kr);
        linalg::symmetrize(&mut mr);
        let (vals, _) = linalg::generalized_eigen(&kr, &mr)?;
        let lambda = vals[0];
        if !(lambda > 0.0) {
            return Err(Error::Numerical(format!(
                "Poincaré eigenproblem has non-positive minimum {lambda:e}"
            )));
        }
        Ok(1.0 / lambda.sqrt())
    }

    /// Node table as CSV: `index,x,y,boundary_slot` (slot empty off Γ).
    pub fn nodes_csv(&self) -> String {
        let mut out = String::from("index,x,y,boundary_slot\n");
        for (i, p) in self.nodes.iter().enumerate() {
            let slot = self.boundary_slot[i].map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{i},{:.16e},{:.16e},{slot}", p[0], p[1]);
        }
        out
    }

    /// Cell table as CSV: `index,v0,v1[,v2]`.
    pub fn cells_csv(&self) -> String {
        let width = self.cells.first().map_or(0, |c| c.len());
        let mut out = String::from("index");
        for k in 0..width {
            let _ = write!(out, ",v{k}");
        }
        out.push('\n');
        for (i, c) in self.cells.iter().enumerate() {
            let _ = write!(out, "{i}");
            for v in c {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_interval() {
        let g = build_interval(1.0, 1).unwrap();
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.boundary_mass().to_dense(), DMatrix::identity(2, 2));
        assert_eq!(g.boundary_stiffness().nnz(), 0);
        assert_eq!(g.surface(), 2.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(build_interval(0.0, 4), Err(Error::Config(_))));
        assert!(matches!(build_interval(1.0, 0), Err(Error::Config(_))));
        assert!(matches!(build_disk(1.0, 9), Err(Error::Resource(_))));
        assert!(matches!(build_disk(-1.0, 1), Err(Error::Config(_))));
    }

    #[test]
    fn disk_boundary_is_on_circle_and_sorted() {
        let g = build_disk(2.0, 2).unwrap();
        assert_eq!(g.n_boundary(), 24);
        let mut last = -1.0;
        for &i in g.boundary_nodes() {
            let p = g.nodes()[i];
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 2.0).abs() < 1e-14);
            let a = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
            assert!(a > last);
            last = a;
        }
        assert_eq!(g.boundary_cells().len(), 24);
    }

    #[test]
    fn trace_shape_error() {
        let g = build_interval(1.0, 3).unwrap();
        let err = g.trace(&DVector::zeros(3)).unwrap_err();
        assert!(matches!(
            err,
            Error::Shape {
                expected: 4,
                got: 3,
                ..
            }
        ));
    }

    #[test]
    fn nested_restriction() {
        let coarse = build_disk(1.0, 1).unwrap();
        let fine = build_disk(1.0, 2).unwrap();
        let map = coarse.restriction_map(&fine).unwrap();
        assert_eq!(map, (0..coarse.n_nodes()).collect::<Vec<_>>());
        let ic = build_interval(1.0, 4).unwrap();
        let ifine = build_interval(1.0, 8).unwrap();
        assert_eq!(ic.restriction_map(&ifine).unwrap(), vec![0, 2, 4, 6, 8]);
    }

    #[test]
    fn csv_tables() {
        let g = build_interval(1.0, 2).unwrap();
        let nodes = g.nodes_csv();
        assert!(nodes.starts_with("index,x,y,boundary_slot\n0,"));
        assert_eq!(nodes.lines().count(), 4);
        assert_eq!(g.cells_csv(), "index,v0,v1\n0,0,1\n1,1,2\n");
    }
}
