//! Fading-memory kernels, the sampled past-history state and the
//! kernel-weighted functionals built on it.
//!
//! The history `Φ(s)` is stored on a uniform age grid `s_k = k·Δs` whose
//! spacing equals the time step, so the transport `∂_tΦ + ∂_sΦ = U` is
//! advanced exactly along characteristics by shifting samples one slot.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::logspace;

/// Smallest certified decay rate: below this the exponential-decay
/// condition is reported as failing.
pub const FADING_FLOOR: f64 = 1e-6;

/// Age horizon used when no decay rate is certified.
pub const DEFAULT_S_MAX: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Omega,
    Gamma,
}

/// Parametric form of a kernel `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `λ₀ e^{−δs}`.
    Exponential { lambda0: f64, delta: f64 },
    /// `a₁ e^{−δ₁s} + a₂ e^{−δ₂s}`.
    BiExponential { a1: f64, delta1: f64, a2: f64, delta2: f64 },
    /// `c (1+s)^{−p}`.
    PowerLaw { coeff: f64, exponent: f64 },
    /// Piecewise-linear table, zero beyond the last node.
    Tabulated { s: Vec<f64>, mu: Vec<f64>, dmu: Vec<f64> },
}

/// A kernel `m` from which `μ = −c⁻¹(1−c) m′` is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MKernel {
    /// `a e^{−rs}`.
    Exponential { amplitude: f64, rate: f64 },
    /// `a (1+s)^{−q}`.
    PowerLaw { amplitude: f64, exponent: f64 },
    /// Tabulated `m` with optional derivative (central differences if absent).
    Tabulated {
        s: Vec<f64>,
        m: Vec<f64>,
        dm: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// Continuity and integrability.
    pub miu1: bool,
    /// Nonnegativity.
    pub miu2: bool,
    /// Monotone decrease.
    pub miu3: bool,
    /// `μ′ + δμ ≤ 0` for some `δ ≥` [`FADING_FLOOR`].
    pub fading: bool,
    pub delta: Option<f64>,
    pub mu0: f64,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.miu1 && self.miu2 && self.miu3
    }
}

/// Sample points for the admissibility checks.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub points: Vec<f64>,
}

impl Default for SamplingPlan {
    /// `s = 0` followed by 4001 log-spaced points in `[1e-6, 1e8]`.
    fn default() -> Self {
        let mut points = vec![0.0];
        points.extend(logspace(1e-6, 1e8, 4001));
        Self { points }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryKernel {
    family: KernelFamily,
    side: Side,
    report: AdmissibilityReport,
}

fn central_differences(s: &[f64], y: &[f64]) -> Vec<f64> {
    let n = s.len();
    (0..n)
        .map(|i| {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            (y[b] - y[a]) / (s[b] - s[a])
        })
        .collect()
}

fn check_table(s: &[f64], values: &[f64], what: &str) -> Result<()> {
    if s.len() < 2 || s.len() != values.len() {
        return Err(Error::Config(format!(
            "tabulated {what} needs at least two points and matching lengths"
        )));
    }
    if s[0] != 0.0 || s.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(format!(
            "tabulated {what} ages must start at 0 and increase strictly"
        )));
    }
    if values.iter().chain(s).any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("tabulated {what} contains non-finite values")));
    }
    Ok(())
}

fn interpolate(s: &[f64], y: &[f64], x: f64) -> f64 {
    let last = s.len() - 1;
    if x < 0.0 || x > s[last] {
        return 0.0;
    }
    let j = match s.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(j) => return y[j],
        Err(j) => j,
    };
    let t = (x - s[j - 1]) / (s[j] - s[j - 1]);
    y[j - 1] + t * (y[j] - y[j - 1])
}

impl MemoryKernel {
    /// Validates the parameters and caches the admissibility report.
    /// Inadmissible kernels are accepted here; callers decide whether to
    /// reject them.
    pub fn new(family: KernelFamily, side: Side) -> Result<Self> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match &family {
            KernelFamily::Exponential { lambda0, delta } => {
                if !finite(&[*lambda0, *delta]) || *lambda0 < 0.0 || !(*delta > 0.0) {
                    return Err(Error::Config(format!(
                        "exponential kernel needs lambda0 >= 0 and delta > 0, got {lambda0}, {delta}"
                    )));
                }
            }
            KernelFamily::BiExponential { a1, delta1, a2, delta2 } => {
                if !finite(&[*a1, *delta1, *a2, *delta2]) || !(*delta1 > 0.0) || !(*delta2 > 0.0) {
                    return Err(Error::Config(
                        "bi-exponential kernel needs finite amplitudes and positive rates".into(),
                    ));
                }
            }
            KernelFamily::PowerLaw { coeff, exponent } => {
                if !finite(&[*coeff, *exponent]) {
                    return Err(Error::Config("power-law kernel parameters must be finite".into()));
                }
                if !(*exponent > 1.0) {
                    return Err(Error::InadmissibleKernel(format!(
                        "power law (1+s)^-{exponent} is not integrable; exponent must exceed 1"
                    )));
                }
            }
            KernelFamily::Tabulated { s, mu, dmu } => {
                check_table(s, mu, "kernel")?;
                if dmu.len() != s.len() || !finite(dmu) {
                    return Err(Error::Config("tabulated kernel derivative has wrong length".into()));
                }
            }
        }
        let mut kernel = Self {
            family,
            side,
            report: AdmissibilityReport {
                miu1: false,
                miu2: false,
                miu3: false,
                fading: false,
                delta: None,
                mu0: 0.0,
            },
        };
        kernel.report = check_admissible(&kernel, &kernel.default_plan());
        Ok(kernel)
    }

    /// Tabulated kernel whose derivative is approximated by central
    /// differences (one-sided at the ends).
    pub fn tabulated(s: Vec<f64>, mu: Vec<f64>, side: Side) -> Result<Self> {
        check_table(&s, &mu, "kernel")?;
        let dmu = central_differences(&s, &mu);
        Self::new(KernelFamily::Tabulated { s, mu, dmu }, side)
    }

    /// The identically zero kernel (no memory).
    pub fn zero(side: Side) -> Self {
        Self::new(
            KernelFamily::Exponential {
                lambda0: 0.0,
                delta: 1.0,
            },
            side,
        )
        .expect("zero kernel is valid")
    }

    fn default_plan(&self) -> SamplingPlan {
        let mut plan = SamplingPlan::default();
        if let KernelFamily::Tabulated { s, .. } = &self.family {
            plan.points.extend(s.iter().copied());
            plan.points.sort_by(f64::total_cmp);
            plan.points.dedup();
        }
        plan
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn report(&self) -> &AdmissibilityReport {
        &self.report
    }

    /// `μ⁰ = ∫₀^∞ μ(s) ds`.
    pub fn mass(&self) -> f64 {
        self.report.mu0
    }

    /// Certified decay rate, present iff the exponential-decay check passed.
    pub fn decay(&self) -> Option<f64> {
        self.report.delta
    }

    pub fn is_zero(&self) -> bool {
        match &self.family {
            KernelFamily::Exponential { lambda0, .. } => *lambda0 == 0.0,
            KernelFamily::BiExponential { a1, a2, .. } => *a1 == 0.0 && *a2 == 0.0,
            KernelFamily::PowerLaw { coeff, .. } => *coeff == 0.0,
            KernelFamily::Tabulated { mu, .. } => mu.iter().all(|m| *m == 0.0),
        }
    }

    pub fn mu(&self, s: f64) -> f64 {
        match &self.family {
            KernelFamily::Exponential { lambda0, delta } => lambda0 * (-delta * s).exp(),
            KernelFamily::BiExponential { a1, delta1, a2, delta2 } => {
                a1 * (-delta1 * s).exp() + a2 * (-delta2 * s).exp()
            }
            KernelFamily::PowerLaw { coeff, exponent } => coeff * (1.0 + s).powf(-exponent),
            KernelFamily::Tabulated { s: ts, mu, .. } => interpolate(ts, mu, s),
        }
    }

    pub fn dmu(&self, s: f64) -> f64 {
        match &self.family {
            KernelFamily::Exponential { lambda0, delta } => -delta * lambda0 * (-delta * s).exp(),
            KernelFamily::BiExponential { a1, delta1, a2, delta2 } => {
                -delta1 * a1 * (-delta1 * s).exp() - delta2 * a2 * (-delta2 * s).exp()
            }
            KernelFamily::PowerLaw { coeff, exponent } => -exponent * coeff * (1.0 + s).powf(-exponent - 1.0),
            KernelFamily::Tabulated { s: ts, dmu, .. } => interpolate(ts, dmu, s),
        }
    }

    fn closed_form_mass(&self) -> f64 {
        match &self.family {
            KernelFamily::Exponential { lambda0, delta } => lambda0 / delta,
            KernelFamily::BiExponential { a1, delta1, a2, delta2 } => a1 / delta1 + a2 / delta2,
            KernelFamily::PowerLaw { coeff, exponent } => coeff / (exponent - 1.0),
            KernelFamily::Tabulated { s, mu, .. } => s
                .windows(2)
                .zip(mu.windows(2))
                .map(|(w, m)| 0.5 * (w[1] - w[0]) * (m[0] + m[1]))
                .sum(),
        }
    }
}

/// Derives `μ = −c⁻¹(1−c) m′` from a kernel `m`, where `c` is ω (bulk) or
/// ν (boundary).
pub fn from_m_kernel(m: &MKernel, coeff: f64, side: Side) -> Result<MemoryKernel> {
    if !(coeff > 0.0 && coeff < 1.0) {
        return Err(Error::Config(format!(
            "memory coefficient must lie in (0,1), got {coeff}"
        )));
    }
    let factor = (1.0 - coeff) / coeff;
    let increasing =
        |what: &str| Error::InadmissibleKernel(format!("m is increasing somewhere ({what}); m' must be <= 0"));
    let family = match m {
        MKernel::Exponential { amplitude, rate } => {
            if !(*rate > 0.0) {
                return Err(Error::Config(format!("m rate must be positive, got {rate}")));
            }
            if amplitude * rate < 0.0 {
                return Err(increasing("negative amplitude"));
            }
            KernelFamily::Exponential {
                lambda0: factor * amplitude * rate,
                delta: *rate,
            }
        }
        MKernel::PowerLaw { amplitude, exponent } => {
            if !(*exponent > 0.0) {
                return Err(Error::Config(format!("m exponent must be positive, got {exponent}")));
            }
            if *amplitude < 0.0 {
                return Err(increasing("negative amplitude"));
            }
            KernelFamily::PowerLaw {
                coeff: factor * amplitude * exponent,
                exponent: exponent + 1.0,
            }
        }
        MKernel::Tabulated { s, m, dm } => {
            check_table(s, m, "m kernel")?;
            let dm = match dm {
                Some(d) if d.len() == s.len() => d.clone(),
                Some(_) => return Err(Error::Config("tabulated m derivative has wrong length".into())),
                None => central_differences(s, m),
            };
            if let Some(i) = dm.iter().position(|d| *d > 0.0) {
                return Err(increasing(&format!("m'({}) = {} > 0", s[i], dm[i])));
            }
            let mu: Vec<f64> = dm.iter().map(|d| -factor * d).collect();
            let dmu = central_differences(s, &mu);
            KernelFamily::Tabulated { s: s.clone(), mu, dmu }
        }
    };
    MemoryKernel::new(family, side)
}

/// Samples `μ` and `μ′` on `plan` and reports the kernel conditions.
pub fn check_admissible(kernel: &MemoryKernel, plan: &SamplingPlan) -> AdmissibilityReport {
    let mu0 = kernel.closed_form_mass();
    let mut miu1 = mu0.is_finite();
    let mut miu2 = true;
    let mut miu3 = true;
    let mut inf_rate = f64::INFINITY;
    let mut any_positive = false;
    for &s in &plan.points {
        let (m, dm) = (kernel.mu(s), kernel.dmu(s));
        if !m.is_finite() || !dm.is_finite() {
            miu1 = false;
            continue;
        }
        miu2 &= m >= 0.0;
        miu3 &= dm <= 0.0;
        // Points where μ has underflowed carry no information on the rate.
        if m > 1e-250 {
            any_positive = true;
            inf_rate = inf_rate.min(-dm / m);
        }
    }
    let fading = miu2 && miu3 && any_positive && inf_rate >= FADING_FLOOR;
    AdmissibilityReport {
        miu1,
        miu2,
        miu3,
        fading,
        delta: fading.then_some(0.99 * inf_rate),
        mu0,
    }
}

/// Default age horizon: `20/δ` for the slowest certified decay, or
/// [`DEFAULT_S_MAX`] if either kernel lacks a certified rate.
pub fn default_s_max(kernels: &[&MemoryKernel]) -> f64 {
    let mut s_max: f64 = 0.0;
    for k in kernels {
        if k.is_zero() {
            continue;
        }
        match k.decay() {
            Some(d) => s_max = s_max.max(20.0 / d),
            None => return DEFAULT_S_MAX,
        }
    }
    if s_max == 0.0 {
        DEFAULT_S_MAX
    } else {
        s_max
    }
}

/// Uniform age grid `s_k = kΔs`, `k = 0..=K`, with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeGrid {
    ds: f64,
    weights: Vec<f64>,
}

impl AgeGrid {
    /// Grid reaching at least `s_max` (`K = ⌈s_max/Δs⌉`, at least one step).
    pub fn new(ds: f64, s_max: f64) -> Result<Self> {
        if !(ds > 0.0) || !ds.is_finite() || !(s_max > 0.0) || !s_max.is_finite() {
            return Err(Error::Config(format!(
                "age grid needs positive spacing and horizon, got ds = {ds}, s_max = {s_max}"
            )));
        }
        let k = ((s_max / ds) * (1.0 - 1e-12)).ceil().max(1.0);
        if k > 5e7 {
            return Err(Error::Resource(format!(
                "age grid with {k} nodes is too large; increase dt or reduce s_max"
            )));
        }
        let k = k as usize;
        let mut weights = vec![ds; k + 1];
        weights[0] = 0.5 * ds;
        weights[k] = 0.5 * ds;
        Ok(Self { ds, weights })
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    /// Number of nodes `K + 1`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn s(&self, k: usize) -> f64 {
        k as f64 * self.ds
    }

    pub fn s_max(&self) -> f64 {
        self.s(self.len() - 1)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Quadratic forms defining the history norm: the bulk form `A0` and the
/// boundary form `ν C`.
pub trait HistoryMetric {
    fn dim(&self) -> usize;
    fn bulk_apply(&self, x: &DVector<f64>) -> DVector<f64>;
    fn boundary_apply(&self, x: &DVector<f64>) -> DVector<f64>;

    fn bulk_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.bulk_apply(x))
    }

    fn boundary_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.boundary_apply(x))
    }
}

/// Kernel values multiplied by quadrature weights at each age node.
#[derive(Debug, Clone)]
pub struct HistoryWeights {
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    pub omega_prime: Vec<f64>,
    pub gamma_prime: Vec<f64>,
}

impl HistoryWeights {
    pub fn new(grid: &AgeGrid, kernel_omega: &MemoryKernel, kernel_gamma: &MemoryKernel) -> Self {
        let tab = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
            grid.weights()
                .iter()
                .enumerate()
                .map(|(k, w)| w * f(grid.s(k)))
                .collect()
        };
        Self {
            omega: tab(&|s| kernel_omega.mu(s)),
            gamma: tab(&|s| kernel_gamma.mu(s)),
            omega_prime: tab(&|s| kernel_omega.dmu(s)),
            gamma_prime: tab(&|s| kernel_gamma.dmu(s)),
        }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// Past history sampled on an [`AgeGrid`]; sample 0 (age zero) is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    grid: AgeGrid,
    samples: VecDeque<DVector<f64>>,
}

impl MemoryState {
    pub fn zeros(grid: AgeGrid, dim: usize) -> Self {
        let samples = (0..grid.len()).map(|_| DVector::zeros(dim)).collect();
        Self { grid, samples }
    }

    /// Samples `profile(s_k)` at `k ≥ 1`; the age-zero sample is forced to 0.
    pub fn from_profile<F: Fn(f64) -> DVector<f64>>(grid: AgeGrid, dim: usize, profile: F) -> Result<Self> {
        let mut samples = VecDeque::with_capacity(grid.len());
        samples.push_back(DVector::zeros(dim));
        for k in 1..grid.len() {
            let v = profile(grid.s(k));
            if v.len() != dim {
                return Err(Error::shape("history sample", dim, v.len()));
            }
            samples.push_back(v);
        }
        Ok(Self { grid, samples })
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn sample(&self, k: usize) -> &DVector<f64> {
        &self.samples[k]
    }

    pub fn samples(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.samples.iter()
    }

    /// Applies a linear map to every sample.
    pub fn map<F: Fn(&DVector<f64>) -> DVector<f64>>(&self, f: F) -> Self {
        Self {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(f).collect(),
        }
    }

    /// Sample-wise difference `self − other`.
    pub fn difference(&self, other: &MemoryState) -> Result<MemoryState> {
        if self.grid != other.grid {
            return Err(Error::Config("history states live on different age grids".into()));
        }
        if self.dim() != other.dim() {
            return Err(Error::shape("history difference", self.dim(), other.dim()));
        }
        Ok(Self {
            grid: self.grid.clone(),
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect(),
        })
    }

    /// One step of exact transport: `Φ(s_k) ← Φ(s_{k−1}) + Δt·input` for
    /// `k ≥ 1`, dropping the sample that leaves the grid.
    pub fn advance(&mut self, input: &DVector<f64>, dt: f64) -> Result<()> {
        let ds = self.grid.ds;
        if (dt - ds).abs() > 1e-12 * ds {
            return Err(Error::GridMismatch { dt, ds });
        }
        if input.len() != self.dim() {
            return Err(Error::shape("history input", self.dim(), input.len()));
        }
        let mut recycled = self.samples.pop_back().expect("grid has at least two nodes");
        recycled.fill(0.0);
        self.samples.push_front(recycled);
        for sample in self.samples.iter_mut().skip(1) {
            sample.axpy(dt, input, 1.0);
        }
        Ok(())
    }

    /// `Σ_k w_k μ(s_k) Φ(s_k)` for both kernels, skipping sample 0.
    pub(crate) fn weighted_sums(&self, weights: &HistoryWeights) -> (DVector<f64>, DVector<f64>) {
        let dim = self.dim();
        let mut bulk = DVector::zeros(dim);
        let mut bnd = DVector::zeros(dim);
        for (k, sample) in self.samples.iter().enumerate().skip(1) {
            bulk.axpy(weights.omega[k], sample, 1.0);
            bnd.axpy(weights.gamma[k], sample, 1.0);
        }
        (bulk, bnd)
    }

    fn check(&self, weights: &HistoryWeights, metric: &dyn HistoryMetric) -> Result<()> {
        if weights.len() != self.grid.len() {
            return Err(Error::shape("history weights", self.grid.len(), weights.len()));
        }
        if metric.dim() != self.dim() {
            return Err(Error::shape("history metric", self.dim(), metric.dim()));
        }
        Ok(())
    }
}

/// Memory contribution `Σ_k w_k [μ_Ω(s_k) A0 η_k + ν μ_Γ(s_k) C ξ_k]` to the
/// evolution equation.
pub fn memory_load(state: &MemoryState, weights: &HistoryWeights, metric: &dyn HistoryMetric) -> Result<DVector<f64>> {
    state.check(weights, metric)?;
    let (bulk, bnd) = state.weighted_sums(weights);
    Ok(metric.bulk_apply(&bulk) + metric.boundary_apply(&bnd))
}

/// `½ Σ_k w_k [μ_Ω′(s_k) ‖η_k‖²_{A0} + μ_Γ′(s_k) ‖ξ_k‖²_{νC}]`, nonpositive
/// for nonincreasing kernels.
pub fn t_dissipation(state: &MemoryState, weights: &HistoryWeights, metric: &dyn HistoryMetric) -> Result<f64> {
    state.check(weights, metric)?;
    Ok(0.5 * weighted_form(state, &weights.omega_prime, &weights.gamma_prime, metric))
}

/// Squared M¹ norm `Σ_k w_k [μ_Ω(s_k) ‖η_k‖²_{A0} + μ_Γ(s_k) ‖ξ_k‖²_{νC}]`.
pub fn m1_norm_sq(state: &MemoryState, weights: &HistoryWeights, metric: &dyn HistoryMetric) -> Result<f64> {
    state.check(weights, metric)?;
    Ok(weighted_form(state, &weights.omega, &weights.gamma, metric))
}

fn weighted_form(state: &MemoryState, wo: &[f64], wg: &[f64], metric: &dyn HistoryMetric) -> f64 {
    state
        .samples
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, x)| {
            let mut acc = 0.0;
            if wo[k] != 0.0 {
                acc += wo[k] * metric.bulk_form(x);
            }
            if wg[k] != 0.0 {
                acc += wg[k] * metric.boundary_form(x);
            }
            acc
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_kernel(lambda0: f64, delta: f64) -> MemoryKernel {
        MemoryKernel::new(KernelFamily::Exponential { lambda0, delta }, Side::Omega).unwrap()
    }

    #[test]
    fn exponential_report() {
        let k = exp_kernel(1.0, 1.0);
        let r = k.report();
        assert!(r.miu1 && r.miu2 && r.miu3 && r.fading);
        assert!((r.delta.unwrap() - 0.99).abs() < 1e-12);
        assert_eq!(r.mu0, 1.0);
    }

    #[test]
    fn power_law_does_not_fade() {
        let k = MemoryKernel::new(
            KernelFamily::PowerLaw {
                coeff: 2.0,
                exponent: 3.0,
            },
            Side::Gamma,
        )
        .unwrap();
        let r = k.report();
        assert!(r.admissible());
        assert!(!r.fading);
        assert!(r.delta.is_none());
        assert!((r.mu0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn power_law_must_be_integrable() {
        let err = MemoryKernel::new(
            KernelFamily::PowerLaw {
                coeff: 1.0,
                exponent: 1.0,
            },
            Side::Omega,
        );
        assert!(matches!(err, Err(Error::InadmissibleKernel(_))));
    }

    #[test]
    fn m_kernel_translation() {
        let k = from_m_kernel(
            &MKernel::Exponential {
                amplitude: 1.0,
                rate: 2.0,
            },
            0.25,
            Side::Gamma,
        )
        .unwrap();
        assert_eq!(
            k.family(),
            &KernelFamily::Exponential {
                lambda0: 6.0,
                delta: 2.0
            }
        );
        let p = from_m_kernel(
            &MKernel::PowerLaw {
                amplitude: 1.0,
                exponent: 2.0,
            },
            0.5,
            Side::Omega,
        )
        .unwrap();
        assert_eq!(
            p.family(),
            &KernelFamily::PowerLaw {
                coeff: 2.0,
                exponent: 3.0
            }
        );
        let bad = from_m_kernel(
            &MKernel::Exponential {
                amplitude: -1.0,
                rate: 1.0,
            },
            0.5,
            Side::Omega,
        );
        assert!(matches!(bad, Err(Error::InadmissibleKernel(_))));
    }

    #[test]
    fn default_horizon() {
        let fast = exp_kernel(1.0, 2.0);
        let slow = exp_kernel(1.0, 0.5);
        let s = default_s_max(&[&fast, &slow]);
        assert!((s - 20.0 / (0.99 * 0.5)).abs() < 1e-9);
        let p = MemoryKernel::new(
            KernelFamily::PowerLaw {
                coeff: 1.0,
                exponent: 3.0,
            },
            Side::Gamma,
        )
        .unwrap();
        assert_eq!(default_s_max(&[&fast, &p]), DEFAULT_S_MAX);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let grid = AgeGrid::new(0.1, 1.0).unwrap();
        assert_eq!(grid.len(), 11);
        let mut st = MemoryState::zeros(grid, 1);
        let err = st.advance(&DVector::from_element(1, 1.0), 0.2).unwrap_err();
        assert!(matches!(err, Error::GridMismatch { .. }));
        assert!(st.advance(&DVector::zeros(2), 0.1).is_err());
    }

    #[test]
    fn anchor_stays_zero() {
        let grid = AgeGrid::new(0.5, 2.0).unwrap();
        let mut st = MemoryState::from_profile(grid, 1, |s| DVector::from_element(1, s + 1.0)).unwrap();
        assert_eq!(st.sample(0)[0], 0.0);
        st.advance(&DVector::from_element(1, 3.0), 0.5).unwrap();
        assert_eq!(st.sample(0)[0], 0.0);
        assert_eq!(st.sample(1)[0], 1.5);
        assert_eq!(st.sample(2)[0], 1.5 + 1.5);
    }

    #[test]
    fn tabulated_interpolation() {
        let k = MemoryKernel::tabulated(vec![0.0, 1.0, 2.0], vec![2.0, 1.0, 0.0], Side::Omega).unwrap();
        assert_eq!(k.mu(0.5), 1.5);
        assert_eq!(k.mu(3.0), 0.0);
        assert_eq!(k.dmu(0.25), -1.0);
        assert_eq!(k.mass(), 2.0);
    }
}
