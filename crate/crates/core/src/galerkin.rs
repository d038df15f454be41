//! Modal Galerkin discretization on the Wentzell eigenbasis.
//!
//! With `U = Ψa` for `M`-orthonormal eigenvectors `Ψ`, the weak form becomes
//!
//! ```text
//! a′ + L a + Σ_k Q_k b_k + Ψᵀ F(Ψa) = 0,     ∂_t b + ∂_s b = a,
//! ```
//!
//! where `L = Ψᵀ(A − αωM_Ω)Ψ = diag(λ) − αω ΨᵀM_ΩΨ`, `b_k` are the modal
//! history samples and `Q_k = w_k(μ_Ω(s_k) G_Ω + μ_Γ(s_k) G_Γ)` with
//! `G_Ω = ΨᵀA0Ψ`, `G_Γ = νΨᵀCΨ`.
//!
//! Time stepping treats `L` and the memory response to the newest input
//! implicitly (a small dense SPD solve with a matrix factored once), while
//! the reaction and the shifted old history are explicit. For `F = 0` the
//! Euler variant is unconditionally energy-nonincreasing.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::analysis::{self, EnergyRow};
use crate::error::{Error, Result};
use crate::geometry::{self, Backend, Geometry};
use crate::linalg;
use crate::memory::{default_s_max, AgeGrid, HistoryMetric, HistoryWeights, MemoryKernel, MemoryState, Side};
use crate::nonlinear::{self, Classification, NonlinearitySpec, Reaction};
use crate::wentzell::{BulkBoundaryField, EigenBasis, ModelParams, WentzellOperator};

/// Nodal magnitude beyond which a run is declared unstable.
pub const INSTABILITY_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ImexEuler,
    ImexBdf2,
}

impl Scheme {
    pub fn order(self) -> f64 {
        match self {
            Scheme::ImexEuler => 1.0,
            Scheme::ImexBdf2 => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub backend: Backend,
    /// Interval length or disk radius.
    pub size: f64,
    /// Cell count (interval) or refinement depth (disk).
    pub refine: usize,
}

impl GeometrySpec {
    pub fn build(&self) -> Result<Geometry> {
        geometry::build(self.backend, self.size, self.refine)
    }
}

/// Recipe for a nodal field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldInit {
    Zero,
    Constant(f64),
    /// `amplitude · Ψ_index` with a 1-based mode index.
    Mode {
        index: usize,
        amplitude: f64,
    },
    /// `Σ cᵢ Ψᵢ`.
    Modal(Vec<f64>),
    /// `scale · x` (first coordinate).
    Coordinate {
        scale: f64,
    },
    /// `amplitude · exp(−|x − centre|² / width²)` about the domain centre.
    Gaussian {
        amplitude: f64,
        width: f64,
    },
    /// Explicit nodal values (bulk-sized for `u0`, boundary-sized for `v0`).
    Nodal(Vec<f64>),
}

impl FieldInit {
    /// Nodal values on the bulk mesh, or on the boundary nodes when
    /// `boundary` is set. Modal recipes need `basis`.
    pub fn evaluate(&self, geom: &Geometry, basis: Option<&EigenBasis>, boundary: bool) -> Result<DVector<f64>> {
        let n = if boundary { geom.n_boundary() } else { geom.n_nodes() };
        let from_bulk = |u: DVector<f64>| if boundary { geom.trace(&u) } else { Ok(u) };
        let centre = match geom.backend() {
            Backend::Interval => [0.5 * geom.size(), 0.0],
            Backend::Disk => [0.0, 0.0],
        };
        let eval = |f: &dyn Fn([f64; 2]) -> f64| {
            if boundary {
                geom.boundary_nodal(f)
            } else {
                geom.nodal(f)
            }
        };
        let need_basis = || basis.ok_or_else(|| Error::Config("modal field recipes need an eigenbasis".into()));
        Ok(match self {
            FieldInit::Zero => DVector::zeros(n),
            FieldInit::Constant(c) => DVector::from_element(n, *c),
            FieldInit::Mode { index, amplitude } => {
                let basis = need_basis()?;
                if *index == 0 || *index > basis.n_modes() {
                    return Err(Error::Config(format!(
                        "mode index {index} outside 1..={}",
                        basis.n_modes()
                    )));
                }
                from_bulk(basis.vectors().column(index - 1) * *amplitude)?
            }
            FieldInit::Modal(c) => {
                let basis = need_basis()?;
                if c.len() > basis.n_modes() {
                    return Err(Error::shape("modal initial data", basis.n_modes(), c.len()));
                }
                let mut a = DVector::zeros(basis.n_modes());
                a.rows_mut(0, c.len()).copy_from_slice(c);
                from_bulk(basis.synthesize(&a))?
            }
            FieldInit::Coordinate { scale } => eval(&|p| scale * p[0]),
            FieldInit::Gaussian { amplitude, width } => eval(&|p| {
                let r2 = (p[0] - centre[0]).powi(2) + (p[1] - centre[1]).powi(2);
                amplitude * (-r2 / (width * width)).exp()
            }),
            FieldInit::Nodal(values) => {
                if values.len() != n {
                    return Err(Error::shape("nodal initial data", n, values.len()));
                }
                DVector::from_column_slice(values)
            }
        })
    }
}

/// Age profile of the initial history `Φ₀(s) = p(s) · field`.
#[derive(Debug, Clone, PartialEq)]
pub enum HistoryInit {
    Zero,
    /// `p(s) = s`.
    Linear(FieldInit),
    /// `p(s) = 1 − e^{−rate·s}`.
    Saturating {
        field: FieldInit,
        rate: f64,
    },
    /// `p(s) = min(s, 1)`.
    Window(FieldInit),
}

/// Age profile multiplying a spatial field.
type AgeProfile<'a> = Box<dyn Fn(f64) -> f64 + 'a>;

impl HistoryInit {
    fn parts(&self) -> Option<(&FieldInit, AgeProfile<'_>)> {
        match self {
            HistoryInit::Zero => None,
            HistoryInit::Linear(f) => Some((f, Box::new(|s| s))),
            HistoryInit::Saturating { field, rate } => Some((field, Box::new(move |s| 1.0 - (-rate * s).exp()))),
            HistoryInit::Window(f) => Some((f, Box::new(|s: f64| s.min(1.0)))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: FieldInit,
    /// Boundary data; `None` means the trace of `u0`.
    pub v0: Option<FieldInit>,
    pub phi0: HistoryInit,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            u0: FieldInit::Zero,
            v0: None,
            phi0: HistoryInit::Zero,
        }
    }
}

/// Complete description of a run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub geometry: GeometrySpec,
    pub model: ModelParams,
    pub kernel_omega: MemoryKernel,
    pub kernel_gamma: MemoryKernel,
    pub nonlinearity: NonlinearitySpec,
    pub n_modes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Age horizon; defaults to [`default_s_max`] of the kernels.
    pub s_max: Option<f64>,
    pub initial: InitialData,
    /// Record every `stride`-th step (the final step is always recorded).
    pub stride: usize,
    /// Also record the second-order history proxy.
    pub strong_diagnostics: bool,
    /// Run even if kernel or nonlinearity validation fails.
    pub force: bool,
}

impl SimConfig {
    /// Number of time steps, checking that `dt` divides `t_end`.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-12 * self.t_end.max(1.0) {
            return Err(Error::Config(format!(
                "dt = {} does not divide t_end = {}",
                self.dt, self.t_end
            )));
        }
        Ok(n as usize)
    }

    pub fn resolved_s_max(&self) -> f64 {
        if let Some(s) = self.s_max {
            return s;
        }
        if self.kernel_omega.is_zero() && self.kernel_gamma.is_zero() {
            return self.dt;
        }
        default_s_max(&[&self.kernel_omega, &self.kernel_gamma])
    }

    /// Every reason the configuration would be rejected, ignoring `force`.
    pub fn validation_problems(&self, geom: &Geometry) -> Result<Vec<String>> {
        let mut problems = Vec::new();
        for (name, k) in [
            ("kernel_omega", &self.kernel_omega),
            ("kernel_gamma", &self.kernel_gamma),
        ] {
            let r = k.report();
            if !r.miu1 {
                problems.push(format!("{name}: kernel is not continuous and integrable"));
            }
            if !r.miu2 {
                problems.push(format!("{name}: kernel is negative somewhere"));
            }
            if !r.miu3 {
                problems.push(format!("{name}: kernel is increasing somewhere (mu' > 0)"));
            }
        }
        let sg = nonlinear::validate_sign_growth(&self.nonlinearity);
        problems.extend(sg.reasons.iter().map(|r| format!("nonlinearity: {r}")));
        let gt = nonlinear::g_tilde(&self.nonlinearity, self.model.nu, self.model.beta);
        // Linearly growing reactions are covered by the sign conditions
        // alone; the balance condition only matters for superlinear growth.
        let superlinear = self.nonlinearity.f.growth_exponent() > 2.0 || gt.growth_exponent() > 2.0;
        if superlinear {
            let b = nonlinear::check_balance(
                &self.nonlinearity,
                self.model.nu,
                self.model.beta,
                geom,
                self.model.omega,
            )?;
            if b.classification == Classification::SignOnly {
                problems.push(format!(
                    "nonlinearity: balance condition fails ({})",
                    b.reason.unwrap_or_default()
                ));
            }
        }
        Ok(problems)
    }

    /// Non-fatal findings: strong diagnostics requested with a kernel that
    /// lacks certified exponential decay.
    pub fn warnings(&self) -> Vec<String> {
        if !self.strong_diagnostics {
            return Vec::new();
        }
        [("kernel_omega", &self.kernel_omega), ("kernel_gamma", &self.kernel_gamma)]
            .into_iter()
            .filter(|(_, k)| !k.is_zero() && !k.report().fading)
            .map(|(name, _)| {
                format!("{name}: exponential decay condition mu' + delta mu <= 0 fails; strong diagnostics are not backed by decay")
            })
            .collect()
    }
}

/// Modal quadratic forms `G_Ω` and `G_Γ` for the history norm.
#[derive(Debug, Clone)]
pub struct ModalMetric {
    pub g_omega: DMatrix<f64>,
    pub g_gamma: DMatrix<f64>,
}

impl HistoryMetric for ModalMetric {
    fn dim(&self) -> usize {
        self.g_omega.nrows()
    }

    fn bulk_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.g_omega * x
    }

    fn boundary_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.g_gamma * x
    }
}

/// Modal coefficients plus modal history.
#[derive(Debug, Clone)]
pub struct GalerkinState {
    pub t: f64,
    pub step: usize,
    pub a: DVector<f64>,
    pub history: MemoryState,
    /// Nodal values `Ψa`.
    pub u_nodal: DVector<f64>,
    a_prev: Option<DVector<f64>>,
    f_prev: Option<DVector<f64>>,
}

impl GalerkinState {
    /// The current solution as a trace-consistent field.
    pub fn field(&self, geom: &Geometry) -> Result<BulkBoundaryField> {
        BulkBoundaryField::from_bulk(geom, self.u_nodal.clone())
    }
}

/// Recorded output of a run.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub dt: f64,
    pub stride: usize,
    pub times: Vec<f64>,
    /// Modal coefficients at each recorded time.
    pub states: Vec<DVector<f64>>,
    pub rows: Vec<EnergyRow>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&DVector<f64>> {
        self.states.last()
    }
}

/// Everything needed to advance a run, precomputed once.
pub struct GalerkinSystem {
    config: SimConfig,
    op: WentzellOperator,
    basis: EigenBasis,
    lmat: DMatrix<f64>,
    metric: ModalMetric,
    grid: AgeGrid,
    weights: HistoryWeights,
    w_total: DMatrix<f64>,
    /// `L` minus the boundary shift: the matrix treated implicitly.
    implicit: DMatrix<f64>,
    euler: Cholesky<f64, Dyn>,
    bdf2: Cholesky<f64, Dyn>,
    crank_nicolson: Cholesky<f64, Dyn>,
    f: Reaction,
    g_tilde: Reaction,
    /// Boundary reaction without the linear shift `−νβs`, which is treated
    /// implicitly.
    g_explicit: Reaction,
    reactive: bool,
    n_steps: usize,
    warnings: Vec<String>,
}

/// Projects `U₀ = (u₀, v₀)` and a nodal history onto the span of the basis,
/// orthogonally in X² and in the `M` inner product respectively.
pub fn project_initial(
    u0: &BulkBoundaryField,
    phi0: &MemoryState,
    op: &WentzellOperator,
    basis: &EigenBasis,
) -> Result<(DVector<f64>, MemoryState)> {
    let geom = op.geometry();
    let load = u0.load(geom)?;
    let a = basis.vectors().tr_mul(&load);
    if phi0.dim() != op.dim() {
        return Err(Error::shape("initial history", op.dim(), phi0.dim()));
    }
    let psi = basis.vectors();
    let b = phi0.map(|x| psi.tr_mul(&op.mass().mul_vec(x)));
    Ok((a, b))
}

impl GalerkinSystem {
    /// Validates the configuration and precomputes the modal system.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.model.validate()?;
        let geom = config.geometry.build()?;
        let problems = config.validation_problems(&geom)?;
        let mut warnings = Vec::new();
        if !problems.is_empty() {
            if config.force {
                warnings.extend(problems.iter().map(|p| format!("forced past: {p}")));
            } else {
                return Err(Error::Validation(problems));
            }
        }
        warnings.extend(config.warnings());
        let op = crate::wentzell::assemble(
            &geom,
            config.model.alpha,
            config.model.beta,
            config.model.omega,
            config.model.nu,
        )?;
        let f = config.nonlinearity.f.clone();
        let g = config.nonlinearity.g.clone();
        let shift = config.model.nu * config.model.beta;
        Self::build(config, op, f, g, shift, warnings)
    }

    /// The memoryless limit system `∂_tU − ΔU + (f̄, ḡ)(U) = 0` with the
    /// shifted reactions, solved with the same machinery (`ω = ν = 1`, zero
    /// kernels).
    pub fn memoryless_limit(config: &SimConfig) -> Result<Self> {
        config.model.validate()?;
        let geom = config.geometry.build()?;
        let p = config.model;
        let shifted = nonlinear::limit_shifted(&config.nonlinearity, p.alpha, p.beta, p.omega, p.nu);
        let params = ModelParams {
            alpha: p.alpha,
            beta: p.beta,
            nu: 1.0,
            omega: 1.0,
        };
        let op = WentzellOperator::build(&geom, params);
        let mut cfg = config.clone();
        cfg.model = params;
        cfg.kernel_omega = MemoryKernel::zero(Side::Omega);
        cfg.kernel_gamma = MemoryKernel::zero(Side::Gamma);
        cfg.s_max = None;
        cfg.initial.phi0 = HistoryInit::Zero;
        cfg.nonlinearity = shifted.clone();
        Self::build(cfg, op, shifted.f, shifted.g, p.beta, Vec::new())
    }

    /// `g̃ = g − shift·s`; the shift cancels part of the operator and is
    /// handled implicitly so that linear runs inherit the energy estimate.
    fn build(
        config: SimConfig,
        op: WentzellOperator,
        f: Reaction,
        g: Reaction,
        shift: f64,
        warnings: Vec<String>,
    ) -> Result<Self> {
        let n_steps = config.n_steps()?;
        if config.stride == 0 {
            return Err(Error::Config("output stride must be at least 1".into()));
        }
        let basis = op.eigenbasis(config.n_modes)?;
        let psi = basis.vectors();
        let p = op.params();
        let n = basis.n_modes();

        let bulk_mass = op.geometry().bulk_mass().mul_dense(psi);
        let mut lmat = DMatrix::from_diagonal(basis.values()) - psi.tr_mul(&bulk_mass) * (p.alpha * p.omega);
        linalg::symmetrize(&mut lmat);
        let mut g_omega = psi.tr_mul(&op.a0().mul_dense(psi));
        let mut g_gamma = psi.tr_mul(&op.c_mat().mul_dense(psi)) * p.nu;
        linalg::symmetrize(&mut g_omega);
        linalg::symmetrize(&mut g_gamma);

        let grid = AgeGrid::new(config.dt, config.resolved_s_max())?;
        if (grid.len() as f64) * (n as f64) > 2e8 {
            return Err(Error::Resource(format!(
                "history of {} ages x {n} modes is too large",
                grid.len()
            )));
        }
        let weights = HistoryWeights::new(&grid, &config.kernel_omega, &config.kernel_gamma);
        let sum_o: f64 = weights.omega.iter().skip(1).sum();
        let sum_g: f64 = weights.gamma.iter().skip(1).sum();
        let w_total = &g_omega * sum_o + &g_gamma * sum_g;

        let geom = op.geometry();
        let psi_trace = DMatrix::from_fn(geom.n_boundary(), n, |i, j| psi[(geom.boundary_nodes()[i], j)]);
        let mut implicit = &lmat - psi_trace.tr_mul(&geom.boundary_mass().mul_dense(&psi_trace)) * shift;
        linalg::symmetrize(&mut implicit);

        let dt = config.dt;
        let id = DMatrix::<f64>::identity(n, n);
        let euler = linalg::cholesky(&(&id + &implicit * dt + &w_total * (dt * dt)), "implicit Euler matrix")?;
        let bdf2 = linalg::cholesky(
            &(&id * 3.0 + &implicit * (2.0 * dt) + &w_total * (dt * dt)),
            "BDF2 matrix",
        )?;
        let crank_nicolson = linalg::cholesky(
            &(&id + &implicit * (0.5 * dt) + &w_total * (0.25 * dt * dt)),
            "Crank-Nicolson matrix",
        )?;
        let g_tilde = g.plus_linear(-shift);
        let reactive = !(f.degree().is_none() && f.arctan == 0.0 && g.degree().is_none() && g.arctan == 0.0);

        Ok(Self {
            config,
            op,
            basis,
            lmat,
            metric: ModalMetric { g_omega, g_gamma },
            grid,
            weights,
            w_total,
            euler,
            bdf2,
            crank_nicolson,
            f,
            g_tilde,
            g_explicit: g,
            implicit,
            reactive,
            n_steps,
            warnings,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn operator(&self) -> &WentzellOperator {
        &self.op
    }

    pub fn geometry(&self) -> &Geometry {
        self.op.geometry()
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    /// `L = Ψᵀ(A − αωM_Ω)Ψ`; its quadratic form is the squared V¹ norm.
    pub fn lmat(&self) -> &DMatrix<f64> {
        &self.lmat
    }

    pub fn metric(&self) -> &ModalMetric {
        &self.metric
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn weights(&self) -> &HistoryWeights {
        &self.weights
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Validation problems overridden by `force`, plus advisory notes.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Bulk/boundary reactions actually applied (`f` and `g̃`).
    pub fn reactions(&self) -> (&Reaction, &Reaction) {
        (&self.f, &self.g_tilde)
    }

    fn field_nodal(&self, init: &FieldInit, boundary: bool) -> Result<DVector<f64>> {
        init.evaluate(self.geometry(), Some(&self.basis), boundary)
    }

    /// Initial state for the configured data.
    pub fn initial_state(&self) -> Result<GalerkinState> {
        self.state_from(&self.config.initial)
    }

    /// Projects the given initial data.
    pub fn state_from(&self, init: &InitialData) -> Result<GalerkinState> {
        let geom = self.geometry();
        let u = self.field_nodal(&init.u0, false)?;
        let v = match &init.v0 {
            Some(f) => self.field_nodal(f, true)?,
            None => geom.trace(&u)?,
        };
        let pair = BulkBoundaryField::pair(geom, u, v)?;
        let a = self.basis.vectors().tr_mul(&pair.load(geom)?);
        let n = self.basis.n_modes();
        let history = match init.phi0.parts() {
            None => MemoryState::zeros(self.grid.clone(), n),
            Some((field, profile)) => {
                let nodal = self.field_nodal(field, false)?;
                let c = self.basis.vectors().tr_mul(&self.op.mass().mul_vec(&nodal));
                MemoryState::from_profile(self.grid.clone(), n, |s| &c * profile(s))?
            }
        };
        self.state_from_modal(a, history)
    }

    /// State with the given modal coefficients and modal history.
    pub fn state_from_modal(&self, a: DVector<f64>, history: MemoryState) -> Result<GalerkinState> {
        let n = self.basis.n_modes();
        if a.len() != n {
            return Err(Error::shape("modal coefficients", n, a.len()));
        }
        if history.dim() != n || history.grid() != &self.grid {
            return Err(Error::shape("modal history", n, history.dim()));
        }
        Ok(GalerkinState {
            t: 0.0,
            step: 0,
            u_nodal: self.basis.synthesize(&a),
            a,
            history,
            a_prev: None,
            f_prev: None,
        })
    }

    /// Modal reaction `Ψᵀ(M_Ω f(u) + Eᵀ M_Γ g̃(v))` at nodal values `u`.
    pub fn reaction_modal(&self, u_nodal: &DVector<f64>) -> Result<DVector<f64>> {
        self.project_reactions(u_nodal, &self.g_tilde, true)
    }

    /// The explicitly treated part of the reaction (`g` in place of `g̃`).
    fn explicit_reaction(&self, u_nodal: &DVector<f64>) -> Result<DVector<f64>> {
        self.project_reactions(u_nodal, &self.g_explicit, self.reactive)
    }

    fn project_reactions(&self, u_nodal: &DVector<f64>, g: &Reaction, active: bool) -> Result<DVector<f64>> {
        if !active {
            return Ok(DVector::zeros(self.basis.n_modes()));
        }
        let geom = self.geometry();
        let spec = NonlinearitySpec {
            f: self.f.clone(),
            g: g.clone(),
        };
        let field = BulkBoundaryField::from_bulk(geom, u_nodal.clone())?;
        // Any boundary shift is already folded into `g`.
        let pair = nonlinear::evaluate_reaction_pair(&field, &spec, 0.0, 0.0)?;
        Ok(self.basis.vectors().tr_mul(&pair.load(geom)?))
    }

    /// Memory term `Σ_k Q_k b_k` at the current state.
    pub fn memory_term(&self, state: &GalerkinState) -> Result<DVector<f64>> {
        crate::memory::memory_load(&state.history, &self.weights, &self.metric)
    }

    /// `da/dt = −L a − Σ_k Q_k b_k − Ψᵀ F(Ψa)`.
    pub fn rhs(&self, state: &GalerkinState) -> Result<DVector<f64>> {
        let mem = self.memory_term(state)?;
        let react = self.reaction_modal(&state.u_nodal)?;
        Ok(-(&self.lmat * &state.a) - mem - react)
    }

    /// `S = Σ_{k≥1} Q_k b_{k−1}`: the memory term of the shifted history.
    fn shifted_memory(&self, history: &MemoryState) -> DVector<f64> {
        let n = history.dim();
        let mut so = DVector::zeros(n);
        let mut sg = DVector::zeros(n);
        for k in 1..self.grid.len() {
            let prev = history.sample(k - 1);
            if self.weights.omega[k] != 0.0 {
                so.axpy(self.weights.omega[k], prev, 1.0);
            }
            if self.weights.gamma[k] != 0.0 {
                sg.axpy(self.weights.gamma[k], prev, 1.0);
            }
        }
        &self.metric.g_omega * so + &self.metric.g_gamma * sg
    }

    /// Advances the state by one time step.
    pub fn step(&self, state: &mut GalerkinState) -> Result<()> {
        let dt = self.config.dt;
        let a = state.a.clone();
        let react = self.explicit_reaction(&state.u_nodal)?;
        let shifted = self.shifted_memory(&state.history);
        let (a_new, input) = match (self.config.scheme, &state.a_prev) {
            (Scheme::ImexEuler, _) => {
                let rhs = &a - (&shifted + &react) * dt;
                let a_new = self.euler.solve(&rhs);
                (a_new.clone(), a_new)
            }
            (Scheme::ImexBdf2, None) => {
                let mem = self.memory_term(state)?;
                let rhs = &a
                    - (&self.implicit * &a) * (0.5 * dt)
                    - mem * (0.5 * dt)
                    - (&shifted + &self.w_total * &a * (0.5 * dt)) * (0.5 * dt)
                    - &react * dt;
                let a_new = self.crank_nicolson.solve(&rhs);
                let input = (&a + &a_new) * 0.5;
                (a_new, input)
            }
            (Scheme::ImexBdf2, Some(a_prev)) => {
                let f_prev = state.f_prev.as_ref().expect("BDF2 keeps the previous reaction");
                let explicit = &shifted + &self.w_total * &a * (0.5 * dt) + &react * 2.0 - f_prev;
                let rhs = &a * 4.0 - a_prev - explicit * (2.0 * dt);
                let a_new = self.bdf2.solve(&rhs);
                let input = (&a + &a_new) * 0.5;
                (a_new, input)
            }
        };
        state.history.advance(&input, dt)?;
        state.step += 1;
        state.t = state.step as f64 * dt;
        state.u_nodal = self.basis.synthesize(&a_new);
        state.a_prev = Some(a);
        state.f_prev = Some(react);
        state.a = a_new;

        let magnitude = state.u_nodal.iter().fold(
            0.0f64,
            |m, x| if x.is_finite() { m.max(x.abs()) } else { f64::INFINITY },
        );
        if magnitude > INSTABILITY_THRESHOLD {
            return Err(Error::Instability { t: state.t, magnitude });
        }
        Ok(())
    }

    /// Runs from the configured initial data to `t_end`.
    pub fn run(&self) -> Result<Trajectory> {
        let state = self.initial_state()?;
        self.run_from(state)
    }

    /// Runs from `state` for the configured number of steps.
    pub fn run_from(&self, mut state: GalerkinState) -> Result<Trajectory> {
        let stride = self.config.stride;
        let mut traj = Trajectory {
            dt: self.config.dt,
            stride,
            ..Default::default()
        };
        self.record(&mut traj, &state)?;
        for k in 1..=self.n_steps {
            self.step(&mut state)?;
            if k % stride == 0 || k == self.n_steps {
                self.record(&mut traj, &state)?;
            }
        }
        Ok(traj)
    }

    fn record(&self, traj: &mut Trajectory, state: &GalerkinState) -> Result<()> {
        traj.times.push(state.t);
        traj.states.push(state.a.clone());
        traj.rows.push(analysis::energy(self, state)?);
        Ok(())
    }
}

/// Builds the system for `config` and runs it.
pub fn run(config: SimConfig) -> Result<Trajectory> {
    GalerkinSystem::new(config)?.run()
}
