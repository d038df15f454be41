//! Energies, inequality monitors and convergence studies.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{GalerkinState, GalerkinSystem, HistoryInit, SimConfig, Trajectory};
use crate::linalg::ls_slope;
use crate::memory::{self, from_m_kernel, MKernel, Side};
use crate::nonlinear;

/// Diagnostics at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub t: f64,
    /// `‖U‖²_{X²}`.
    pub x2: f64,
    /// `‖U‖²_{V¹} = ω‖∇u‖² + ν‖∇_Γu‖² + βν‖u‖²_Γ`.
    pub v1: f64,
    /// `‖Φ‖²_{M¹}`.
    pub m1: f64,
    /// `‖U‖²_{X²} + ‖Φ‖²_{M¹}`.
    pub energy: f64,
    /// `½ ∫ μ′ ‖Φ(s)‖² ds`, nonpositive for admissible kernels.
    pub dissipation: f64,
    /// `⟨F(U), U⟩_{X²}`.
    pub forcing: f64,
    /// Lumped `L^{r₁}(Ω)` norm of the bulk component.
    pub lr_norm: f64,
    /// M¹ norm of the operator applied to the history (only with strong
    /// diagnostics enabled).
    pub m2_proxy: Option<f64>,
}

/// Exact discrete norms of `state` in the weighted inner products.
pub fn energy(sys: &GalerkinSystem, state: &GalerkinState) -> Result<EnergyRow> {
    let a = &state.a;
    let x2 = a.norm_squared();
    let v1 = a.dot(&(sys.lmat() * a));
    let m1 = memory::m1_norm_sq(&state.history, sys.weights(), sys.metric())?;
    let dissipation = memory::t_dissipation(&state.history, sys.weights(), sys.metric())?;
    let forcing = a.dot(&sys.reaction_modal(&state.u_nodal)?);
    let r = sys.reactions().0.growth_exponent();
    let lumped = sys.geometry().bulk_mass().row_sums();
    let lr_norm = lumped
        .iter()
        .zip(state.u_nodal.iter())
        .map(|(w, u)| w * u.abs().powf(r))
        .sum::<f64>()
        .powf(1.0 / r);
    let m2_proxy = if sys.config().strong_diagnostics {
        let lambda = sys.basis().values();
        let lifted = state.history.map(|b| b.component_mul(lambda));
        Some(memory::m1_norm_sq(&lifted, sys.weights(), sys.metric())?)
    } else {
        None
    };
    Ok(EnergyRow {
        t: state.t,
        x2,
        v1,
        m1,
        energy: x2 + m1,
        dissipation,
        forcing,
        lr_norm,
        m2_proxy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Envelope {
    /// `E(0) + C t`.
    Linear,
    /// `(E(0) + 1) e^{Ct} − 1`.
    #[default]
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub verdict: Verdict,
    /// Smallest relative slack `(bound − R) / bound` over the run; the
    /// monitor passes while it stays above `−MONITOR_TOLERANCE`.
    pub margin: f64,
    /// Growth constant `C = sup max(0, −2⟨F(U),U⟩)`.
    pub growth_constant: f64,
    pub max_dissipation: f64,
    pub reasons: Vec<String>,
}

/// Relative excess over the a-priori bound that the monitor tolerates.
pub const MONITOR_TOLERANCE: f64 = 0.01;

/// Integrated a-priori monitor. With
/// `R(t) = E(t) + 2∫₀ᵗ (‖U‖²_{V¹} − ½∫μ′‖Φ‖²)`, checks
/// `R(t) ≤ (1 + MONITOR_TOLERANCE) · (E(0) + envelope(t))` at every
/// recorded time.
///
/// The V¹ term is integrated with the right-endpoint rule and the
/// dissipation with the left-endpoint rule, matching the implicit and
/// explicit halves of the time stepper.
pub fn monitor_apriori(traj: &Trajectory, envelope: Envelope) -> MonitorReport {
    let mut report = MonitorReport {
        verdict: Verdict::Pass,
        margin: f64::INFINITY,
        growth_constant: 0.0,
        max_dissipation: f64::NEG_INFINITY,
        reasons: Vec::new(),
    };
    if traj.stride != 1 || traj.rows.len() < 2 {
        report.verdict = Verdict::Inconclusive;
        report.reasons.push("monitor needs every time step recorded".into());
        return report;
    }
    let rows = &traj.rows;
    let c = rows.iter().map(|r| (-2.0 * r.forcing).max(0.0)).fold(0.0, f64::max);
    report.growth_constant = c;
    report.max_dissipation = rows.iter().map(|r| r.dissipation).fold(f64::NEG_INFINITY, f64::max);
    for r in rows {
        if r.dissipation > 1e-12 * (1.0 + r.m1) {
            report.verdict = Verdict::Fail;
            report.reasons.push(format!(
                "memory dissipation is positive ({:e}) at t = {}",
                r.dissipation, r.t
            ));
            break;
        }
    }
    let e0 = rows[0].energy;
    let mut integral = 0.0;
    for k in 0..rows.len() {
        if k > 0 {
            let dt = rows[k].t - rows[k - 1].t;
            integral += dt * (rows[k].v1 - rows[k - 1].dissipation);
        }
        let t = rows[k].t;
        let lhs = rows[k].energy + 2.0 * integral;
        let bound = match envelope {
            Envelope::Linear => e0 + c * t,
            Envelope::Exponential => (e0 + 1.0) * (c * t).exp() - 1.0,
        };
        let scale = bound.abs().max(f64::MIN_POSITIVE);
        let slack = (bound - lhs) / scale;
        report.margin = report.margin.min(slack);
        if slack < -MONITOR_TOLERANCE && report.verdict != Verdict::Fail {
            report.verdict = Verdict::Fail;
            report
                .reasons
                .push(format!("integrated energy {lhs:e} exceeds bound {bound:e} at t = {t}"));
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub pass: bool,
    /// `C = 2 max(M_f, M_g + νβ)`.
    pub rate_bound: f64,
    /// Least-squares slope of `ln ‖diff(t)‖`; `None` if the difference
    /// vanishes somewhere.
    pub fitted_rate: Option<f64>,
    pub times: Vec<f64>,
    /// `‖ΔU(t)‖_{X²} + ‖ΔΦᵗ‖_{M¹}`.
    pub differences: Vec<f64>,
}

/// Runs from `U₀` and `U₀ + δ₀Ψ₁` in lockstep and checks
/// `‖ΔU(t)‖ + ‖ΔΦᵗ‖ ≤ ‖ΔU(0)‖ e^{Ct}` at every step.
pub fn continuous_dependence(config: &SimConfig, delta0: f64) -> Result<ContinuityReport> {
    let sg = nonlinear::validate_sign_growth(&config.nonlinearity);
    let (m_f, m_g) = match (sg.m_f, sg.m_g) {
        (Some(f), Some(g)) => (f, g),
        _ => return Err(Error::Validation(sg.reasons)),
    };
    let sys = GalerkinSystem::new(config.clone())?;
    let first = sys.initial_state()?;
    let mut a2 = first.a.clone();
    a2[0] += delta0;
    let second = sys.state_from_modal(a2, first.history.clone())?;
    continuous_dependence_between(
        &sys,
        first,
        second,
        2.0 * m_f.max(m_g + config.model.nu * config.model.beta),
    )
}

/// Lockstep comparison of two states of the same system.
pub fn continuous_dependence_between(
    sys: &GalerkinSystem,
    mut first: GalerkinState,
    mut second: GalerkinState,
    rate_bound: f64,
) -> Result<ContinuityReport> {
    let distance = |x: &GalerkinState, y: &GalerkinState| -> Result<f64> {
        let hist = x.history.difference(&y.history)?;
        let m1 = memory::m1_norm_sq(&hist, sys.weights(), sys.metric())?;
        Ok((&x.a - &y.a).norm() + m1.max(0.0).sqrt())
    };
    let initial = distance(&first, &second)?;
    let mut times = vec![0.0];
    let mut differences = vec![initial];
    let mut pass = true;
    for _ in 0..sys.n_steps() {
        sys.step(&mut first)?;
        sys.step(&mut second)?;
        let d = distance(&first, &second)?;
        let bound = initial * (rate_bound * first.t).exp();
        if d > bound * (1.0 + 1e-9) {
            pass = false;
        }
        times.push(first.t);
        differences.push(d);
    }
    let fitted_rate = if differences.iter().all(|d| *d > 0.0) && times.len() > 1 {
        let logs: Vec<f64> = differences.iter().map(|d| d.ln()).collect();
        Some(ls_slope(&times, &logs))
    } else {
        None
    };
    Ok(ContinuityReport {
        pass,
        rate_bound,
        fitted_rate,
        times,
        differences,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// Levels are time steps.
    Dt,
    /// Levels are mode counts.
    Modes,
    /// Levels are refinement parameters (interval cells or disk depth).
    Mesh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub axis: Axis,
    /// Level values as given.
    pub levels: Vec<f64>,
    /// Resolution per level: dt, 1/n_modes or mesh width.
    pub widths: Vec<f64>,
    /// Error per level against the reference (the finest level is its own
    /// reference when no oracle is supplied and then reports 0).
    pub errors: Vec<f64>,
    /// Pairwise orders between consecutive levels.
    pub orders: Vec<f64>,
    /// Least-squares slope of `log error` against `log width`.
    pub observed_order: f64,
    /// Set when the errors do not decrease strictly.
    pub non_monotone: bool,
}

/// Least-squares order of `errors` against `widths` on a log-log scale.
pub fn observed_order(widths: &[f64], errors: &[f64]) -> f64 {
    let x: Vec<f64> = widths.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    ls_slope(&x, &y)
}

fn level_config(base: &SimConfig, axis: Axis, level: f64) -> SimConfig {
    let mut c = base.clone();
    match axis {
        Axis::Dt => c.dt = level,
        Axis::Modes => c.n_modes = level as usize,
        Axis::Mesh => c.geometry.refine = level as usize,
    }
    c.stride = usize::MAX;
    c.strong_diagnostics = false;
    c
}

/// Final nodal solution and final modal coefficients of a run.
fn final_solution(config: SimConfig) -> Result<(GalerkinSystem, DVector<f64>)> {
    let sys = GalerkinSystem::new(config)?;
    let mut state = sys.initial_state()?;
    for _ in 0..sys.n_steps() {
        sys.step(&mut state)?;
    }
    Ok((sys, state.a))
}

/// Refinement study along `axis`. Levels must be ordered from coarse to
/// fine; errors are measured against the finest level, or against `oracle`
/// modal coefficients when given (dt and modes axes only).
pub fn convergence_study(
    base: &SimConfig,
    axis: Axis,
    levels: &[f64],
    oracle: Option<&DVector<f64>>,
) -> Result<ConvergenceReport> {
    if levels.len() < 3 {
        return Err(Error::Config("a convergence study needs at least three levels".into()));
    }
    if axis == Axis::Mesh && oracle.is_some() {
        return Err(Error::Config(
            "mesh studies compare against the finest level only".into(),
        ));
    }
    let runs: Vec<Result<(GalerkinSystem, DVector<f64>)>> = levels
        .par_iter()
        .map(|&l| final_solution(level_config(base, axis, l)))
        .collect();
    let runs: Vec<(GalerkinSystem, DVector<f64>)> = runs.into_iter().collect::<Result<_>>()?;

    let widths: Vec<f64> = runs
        .iter()
        .zip(levels)
        .map(|((sys, _), &l)| match axis {
            Axis::Dt => l,
            Axis::Modes => 1.0 / l,
            Axis::Mesh => sys.geometry().mesh_width(),
        })
        .collect();
    let (fine_sys, fine_a) = runs.last().expect("at least three levels");
    let errors: Vec<f64> = match axis {
        Axis::Dt | Axis::Modes => {
            let reference = oracle.unwrap_or(fine_a);
            runs.iter()
                .map(|(_, a)| {
                    let n = a.len().max(reference.len());
                    let mut d = DVector::zeros(n);
                    d.rows_mut(0, a.len()).copy_from(a);
                    let mut r = DVector::zeros(n);
                    r.rows_mut(0, reference.len()).copy_from(reference);
                    (d - r).norm()
                })
                .collect()
        }
        Axis::Mesh => {
            let fine_u = fine_sys.basis().synthesize(fine_a);
            runs.iter()
                .map(|(sys, a)| {
                    let map = sys.geometry().restriction_map(fine_sys.geometry())?;
                    let u = sys.basis().synthesize(a);
                    let d = DVector::from_iterator(u.len(), u.iter().zip(&map).map(|(x, &i)| x - fine_u[i]));
                    Ok(sys.operator().mass().quad_form(&d).max(0.0).sqrt())
                })
                .collect::<Result<_>>()?
        }
    };

    // Without an oracle the finest level has zero error and is left out of
    // the order estimates.
    let used = if oracle.is_some() {
        errors.len()
    } else {
        errors.len() - 1
    };
    let orders: Vec<f64> = (1..used)
        .map(|i| (errors[i - 1] / errors[i]).ln() / (widths[i - 1] / widths[i]).ln())
        .collect();
    let non_monotone = (1..used).any(|i| !(errors[i] < errors[i - 1]));
    let observed = observed_order(&widths[..used], &errors[..used]);
    Ok(ConvergenceReport {
        axis,
        levels: levels.to_vec(),
        widths,
        errors,
        orders,
        observed_order: observed,
        non_monotone,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongReport {
    pub times: Vec<f64>,
    /// `‖U‖_{V¹}`.
    pub v1_norm: Vec<f64>,
    /// `‖∂_tU‖_{X²}` by central differences (one-sided at the ends).
    pub dt_norm: Vec<f64>,
    pub m2_proxy: Vec<Option<f64>>,
    /// Whether the bulk and boundary kernels coincide.
    pub cancellation: bool,
    pub bounded: bool,
}

/// Higher-regularity channels of a trajectory.
pub fn strong_diagnostics(traj: &Trajectory, config: &SimConfig) -> StrongReport {
    let n = traj.len();
    let v1_norm: Vec<f64> = traj.rows.iter().map(|r| r.v1.max(0.0).sqrt()).collect();
    let dt_norm: Vec<f64> = (0..n)
        .map(|k| {
            if n < 2 {
                return 0.0;
            }
            let (i, j) = if k == 0 {
                (0, 1)
            } else if k == n - 1 {
                (n - 2, n - 1)
            } else {
                (k - 1, k + 1)
            };
            (&traj.states[j] - &traj.states[i]).norm() / (traj.times[j] - traj.times[i])
        })
        .collect();
    let m2_proxy: Vec<Option<f64>> = traj.rows.iter().map(|r| r.m2_proxy).collect();
    let bounded =
        v1_norm.iter().chain(&dt_norm).all(|x| x.is_finite()) && m2_proxy.iter().flatten().all(|x| x.is_finite());
    StrongReport {
        times: traj.times.clone(),
        v1_norm,
        dt_norm,
        m2_proxy,
        cancellation: config.kernel_omega.family() == config.kernel_gamma.family(),
        bounded,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub epsilons: Vec<f64>,
    /// Final-time X² distance between the memory run and the limit run.
    pub distances: Vec<f64>,
    pub strictly_decreasing: bool,
}

/// Compares runs with concentrating kernels `m_ε(s) = ε⁻¹e^{−s/ε}` against
/// the memoryless limit system with shifted reactions.
pub fn limit_study(base: &SimConfig, epsilons: &[f64]) -> Result<LimitReport> {
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("limit study needs positive epsilons".into()));
    }
    let limit = GalerkinSystem::memoryless_limit(base)?;
    let mut lstate = limit.initial_state()?;
    for _ in 0..limit.n_steps() {
        limit.step(&mut lstate)?;
    }
    let target = lstate.u_nodal.clone();

    let distances: Vec<Result<f64>> = epsilons
        .par_iter()
        .map(|&eps| {
            let mut c = base.clone();
            let m = MKernel::Exponential {
                amplitude: 1.0 / eps,
                rate: 1.0 / eps,
            };
            c.kernel_omega = from_m_kernel(&m, c.model.omega, Side::Omega)?;
            c.kernel_gamma = from_m_kernel(&m, c.model.nu, Side::Gamma)?;
            c.s_max = None;
            c.initial.phi0 = HistoryInit::Zero;
            c.stride = usize::MAX;
            let (sys, a) = final_solution(c)?;
            let d = sys.basis().synthesize(&a) - &target;
            Ok(sys.operator().mass().quad_form(&d).max(0.0).sqrt())
        })
        .collect();
    let distances: Vec<f64> = distances.into_iter().collect::<Result<_>>()?;
    let strictly_decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    Ok(LimitReport {
        epsilons: epsilons.to_vec(),
        distances,
        strictly_decreasing,
    })
}
