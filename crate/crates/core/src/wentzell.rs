//! The Wentzell Laplacian on the trace-consistent space, its eigenbasis and
//! the static bulk-surface elliptic problem.
//!
//! Boundary degrees of freedom are shared with the bulk (one unknown per
//! node), so the native discrete space is V¹ with dimension equal to the
//! number of bulk nodes. Boundary matrices enter through the trace map:
//! `M = M_Ω + Eᵀ M_Γ E` and so on, where `E` restricts to boundary nodes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::linalg;
use crate::memory::HistoryMetric;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceTag {
    /// Independent bulk and boundary components.
    X2,
    /// Boundary component equal to the trace of the bulk component.
    V1,
}

/// A pair `(u, v)` of bulk and boundary nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkBoundaryField {
    u: DVector<f64>,
    v: DVector<f64>,
    tag: SpaceTag,
}

impl BulkBoundaryField {
    /// Trace-consistent field built from bulk values.
    pub fn from_bulk(geom: &Geometry, u: DVector<f64>) -> Result<Self> {
        let v = geom.trace(&u)?;
        Ok(Self {
            u,
            v,
            tag: SpaceTag::V1,
        })
    }

    /// Unconstrained pair; `v` need not be the trace of `u`.
    pub fn pair(geom: &Geometry, u: DVector<f64>, v: DVector<f64>) -> Result<Self> {
        if u.len() != geom.n_nodes() {
            return Err(Error::shape("bulk component", geom.n_nodes(), u.len()));
        }
        if v.len() != geom.n_boundary() {
            return Err(Error::shape("boundary component", geom.n_boundary(), v.len()));
        }
        Ok(Self {
            u,
            v,
            tag: SpaceTag::X2,
        })
    }

    pub(crate) fn from_parts(u: DVector<f64>, v: DVector<f64>, tag: SpaceTag) -> Self {
        Self { u, v, tag }
    }

    pub fn zeros(geom: &Geometry) -> Self {
        Self {
            u: DVector::zeros(geom.n_nodes()),
            v: DVector::zeros(geom.n_boundary()),
            tag: SpaceTag::V1,
        }
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn into_parts(self) -> (DVector<f64>, DVector<f64>) {
        (self.u, self.v)
    }

    /// Squared norm in `L²(Ω) ⊕ L²(Γ)`.
    pub fn x2_norm_sq(&self, geom: &Geometry) -> f64 {
        geom.bulk_mass().quad_form(&self.u) + geom.boundary_mass().quad_form(&self.v)
    }

    /// The X² inner product against every column of `basis`, i.e. the load
    /// vector `M_Ω u + Eᵀ M_Γ v` tested with V¹ functions.
    pub fn load(&self, geom: &Geometry) -> Result<DVector<f64>> {
        let bulk = geom.bulk_mass().try_mul_vec(&self.u, "bulk component")?;
        let bnd = geom.boundary_mass().try_mul_vec(&self.v, "boundary component")?;
        Ok(bulk + geom.extend_boundary(&bnd)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub omega: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            problems.push(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            problems.push(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            problems.push(format!("omega must lie in (0,1), got {}", self.omega));
        }
        if self.nu <= 0.0 {
            return Err(Error::UnsupportedParameter(format!(
                "nu must lie in (0,1), got {}; the nu = 0 boundary operator is not supported",
                self.nu
            )));
        }
        if !(self.nu < 1.0) {
            problems.push(format!("nu must lie in (0,1), got {}", self.nu));
        }
        match problems.len() {
            0 => Ok(()),
            1 => Err(Error::Config(problems.remove(0))),
            _ => Err(Error::Validation(problems)),
        }
    }
}

/// Matrices of the Wentzell Laplacian on V¹.
#[derive(Debug, Clone)]
pub struct WentzellOperator {
    params: ModelParams,
    geom: Geometry,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    a0: CsrMatrix,
    c_mat: CsrMatrix,
}

/// Assembles the operator after validating `α, β > 0` and `ω, ν ∈ (0,1)`.
pub fn assemble(geom: &Geometry, alpha: f64, beta: f64, omega: f64, nu: f64) -> Result<WentzellOperator> {
    let params = ModelParams { alpha, beta, nu, omega };
    params.validate()?;
    Ok(WentzellOperator::build(geom, params))
}

impl WentzellOperator {
    /// Assembly without parameter checks; used for the memoryless limit
    /// system where `ω = ν = 1`.
    pub(crate) fn build(geom: &Geometry, params: ModelParams) -> Self {
        let n = geom.n_nodes();
        let map = geom.boundary_nodes();
        let bmass = geom.boundary_mass().embed(map, n);
        let bstiff = geom.boundary_stiffness().embed(map, n);
        let ModelParams { alpha, beta, nu, omega } = params;
        let mass = CsrMatrix::linear_combination(&[(1.0, geom.bulk_mass()), (1.0, &bmass)]);
        let a0 = CsrMatrix::linear_combination(&[(omega, geom.bulk_stiffness()), (alpha * omega, geom.bulk_mass())]);
        let c_mat = CsrMatrix::linear_combination(&[(1.0, &bstiff), (beta, &bmass)]);
        let stiffness = CsrMatrix::linear_combination(&[(1.0, &a0), (nu, &c_mat)]);
        Self {
            params,
            geom: geom.clone(),
            mass,
            stiffness,
            a0,
            c_mat,
        }
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    /// Dimension of the trace-consistent space (number of bulk nodes).
    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    /// `M = M_Ω + Eᵀ M_Γ E`.
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// `A = ω K_Ω + αω M_Ω + ν Eᵀ (K_Γ + β M_Γ) E`.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Bulk block `ω K_Ω + αω M_Ω`.
    pub fn a0(&self) -> &CsrMatrix {
        &self.a0
    }

    /// Boundary operator `Eᵀ (K_Γ + β M_Γ) E`, independent of ν.
    pub fn c_mat(&self) -> &CsrMatrix {
        &self.c_mat
    }

    /// `A − αω M_Ω = ω K_Ω + ν Eᵀ (K_Γ + β M_Γ) E`, the part of the operator
    /// that acts instantaneously once the reaction absorbs `νβ s`. Its
    /// quadratic form is the squared V¹ norm.
    pub fn instantaneous(&self) -> CsrMatrix {
        let p = self.params;
        CsrMatrix::linear_combination(&[(1.0, &self.stiffness), (-p.alpha * p.omega, self.geom.bulk_mass())])
    }

    /// Squared V¹ norm `ω‖∇u‖² + ν‖∇_Γu‖² + βν‖u‖²_Γ` of nodal values.
    pub fn v1_norm_sq(&self, u: &DVector<f64>) -> f64 {
        let p = self.params;
        p.omega * self.geom.bulk_stiffness().quad_form(u) + p.nu * self.c_mat.quad_form(u)
    }

    /// Leading `n_modes` eigenpairs of `A Ψ = λ M Ψ`.
    pub fn eigenbasis(&self, n_modes: usize) -> Result<EigenBasis> {
        eigenbasis(self, n_modes)
    }
}

impl HistoryMetric for WentzellOperator {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn bulk_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a0.mul_vec(x)
    }

    fn boundary_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.c_mat.mul_vec(x) * self.params.nu
    }
}

/// M-orthonormal eigenvectors of the Wentzell operator, ascending.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    residuals: Vec<f64>,
}

/// Computes the leading `n_modes` eigenpairs by a dense generalized solve.
pub fn eigenbasis(op: &WentzellOperator, n_modes: usize) -> Result<EigenBasis> {
    let n = op.dim();
    if n_modes == 0 || n_modes > n {
        return Err(Error::Config(format!(
            "n_modes must lie in 1..={n} for this geometry, got {n_modes}"
        )));
    }
    let a = op.stiffness.to_dense();
    let m = op.mass.to_dense();
    let (vals, vecs) = linalg::generalized_eigen(&a, &m)?;
    let values = vals.rows(0, n_modes).into_owned();
    let vectors = vecs.columns(0, n_modes).into_owned();
    let mut residuals = Vec::with_capacity(n_modes);
    for i in 0..n_modes {
        let psi = vectors.column(i).into_owned();
        let a_psi = op.stiffness.mul_vec(&psi);
        let r = &a_psi - op.mass.mul_vec(&psi) * values[i];
        let rel = r.norm() / a_psi.norm().max(f64::MIN_POSITIVE);
        if !(rel <= 1e-9) {
            return Err(Error::Numerical(format!(
                "eigenpair {} has relative residual {rel:e} above 1e-9",
                i + 1
            )));
        }
        residuals.push(rel);
    }
    Ok(EigenBasis {
        values,
        vectors,
        residuals,
    })
}

impl EigenBasis {
    pub fn n_modes(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Eigenvectors as columns (nodal values on V¹).
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Relative residuals `‖AΨᵢ − λᵢMΨᵢ‖ / ‖AΨᵢ‖`.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Nodal values of `Σ aᵢ Ψᵢ`.
    pub fn synthesize(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.vectors * a
    }

    /// Basis restricted to its first `n` modes.
    pub fn truncated(&self, n: usize) -> Result<EigenBasis> {
        if n == 0 || n > self.n_modes() {
            return Err(Error::Config(format!(
                "cannot truncate {} modes to {n}",
                self.n_modes()
            )));
        }
        Ok(EigenBasis {
            values: self.values.rows(0, n).into_owned(),
            vectors: self.vectors.columns(0, n).into_owned(),
            residuals: self.residuals[..n].to_vec(),
        })
    }
}

/// Solution of the static bulk-surface problem with the monitored
/// regularity ratio.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub field: BulkBoundaryField,
    /// `(‖U‖ + ‖M⁻¹S₀U‖) / (‖p₁‖ + ‖p₂‖)`, where `S₀` is the discrete bulk
    /// plus surface Laplacian; a bounded proxy for second-order regularity.
    pub regularity_ratio: f64,
}

/// Solves `−Δu = p₁` in Ω with `−Δ_Γu + ∂_n u + βu = p₂` on Γ.
pub fn solve_bvp(geom: &Geometry, p1: &DVector<f64>, p2: &DVector<f64>, beta: f64) -> Result<BvpSolution> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::UnsupportedParameter(format!(
            "beta must be positive for a nonsingular boundary value problem, got {beta}"
        )));
    }
    if p1.len() != geom.n_nodes() {
        return Err(Error::shape("bulk data", geom.n_nodes(), p1.len()));
    }
    if p2.len() != geom.n_boundary() {
        return Err(Error::shape("boundary data", geom.n_boundary(), p2.len()));
    }
    let op = WentzellOperator::build(
        geom,
        ModelParams {
            alpha: 0.0,
            beta,
            nu: 1.0,
            omega: 1.0,
        },
    );
    let data = BulkBoundaryField::pair(geom, p1.clone(), p2.clone())?;
    let rhs = data.load(geom)?;
    let n = geom.n_nodes();
    let u = linalg::pcg(op.stiffness(), &rhs, 1e-14, 20 * n + 200)?;

    let laplacian = CsrMatrix::linear_combination(&[
        (1.0, geom.bulk_stiffness()),
        (1.0, &geom.boundary_stiffness().embed(geom.boundary_nodes(), n)),
    ]);
    let strong = laplacian.mul_vec(&u);
    let strong_m = linalg::pcg(op.mass(), &strong, 1e-14, 20 * n + 200)?;
    let u_norm = op.mass().quad_form(&u).max(0.0).sqrt();
    let strong_norm = op.mass().quad_form(&strong_m).max(0.0).sqrt();
    let data_norm = geom.bulk_mass().quad_form(p1).max(0.0).sqrt() + geom.boundary_mass().quad_form(p2).max(0.0).sqrt();
    let regularity_ratio = if data_norm > 0.0 {
        (u_norm + strong_norm) / data_norm
    } else {
        0.0
    };
    Ok(BvpSolution {
        field: BulkBoundaryField::from_bulk(geom, u)?,
        regularity_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_interval;

    #[test]
    fn parameter_ranges() {
        let g = build_interval(1.0, 4).unwrap();
        assert!(matches!(
            assemble(&g, 1.0, 1.0, 0.5, 0.0),
            Err(Error::UnsupportedParameter(_))
        ));
        let err = assemble(&g, 1.0, 1.0, 0.5, 1.0).unwrap_err();
        assert!(err.to_string().contains("nu must lie in (0,1)"));
        assert!(matches!(assemble(&g, 1.0, 1.0, 1.5, 0.5), Err(Error::Config(_))));
        assert!(matches!(assemble(&g, -1.0, 0.0, 0.5, 0.5), Err(Error::Validation(v)) if v.len() == 2));
    }

    #[test]
    fn splitting_identity() {
        let g = build_interval(1.0, 6).unwrap();
        let op = assemble(&g, 2.0, 3.0, 0.3, 0.7).unwrap();
        let rebuilt = CsrMatrix::linear_combination(&[(1.0, op.a0()), (0.7, op.c_mat())]);
        assert!((rebuilt.to_dense() - op.stiffness().to_dense()).amax() < 1e-14);
    }

    #[test]
    fn mode_count_is_checked() {
        let g = build_interval(1.0, 4).unwrap();
        let op = assemble(&g, 1.0, 1.0, 0.5, 0.5).unwrap();
        assert!(op.eigenbasis(0).is_err());
        assert!(op.eigenbasis(6).is_err());
        assert_eq!(op.eigenbasis(5).unwrap().n_modes(), 5);
    }

    #[test]
    fn field_constructors() {
        let g = build_interval(1.0, 2).unwrap();
        let f = BulkBoundaryField::from_bulk(&g, DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(f.tag(), SpaceTag::V1);
        assert_eq!(f.v().as_slice(), &[1.0, 3.0]);
        let p = BulkBoundaryField::pair(&g, DVector::zeros(3), DVector::from_vec(vec![5.0, 6.0])).unwrap();
        assert_eq!(p.tag(), SpaceTag::X2);
        assert!(BulkBoundaryField::pair(&g, DVector::zeros(2), DVector::zeros(2)).is_err());
    }
}
