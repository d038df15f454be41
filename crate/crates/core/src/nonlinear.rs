//! Bulk and boundary reactions with their sign, growth and balance checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::linalg::logspace;
use crate::wentzell::{BulkBoundaryField, SpaceTag};

/// Scalar reaction `r(s) = Σᵢ cᵢ sⁱ + a·arctan(s)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Reaction {
    /// Polynomial coefficients, constant term first.
    #[serde(default)]
    pub poly: Vec<f64>,
    #[serde(default)]
    pub arctan: f64,
}

impl Reaction {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn polynomial(poly: Vec<f64>) -> Self {
        Self { poly, arctan: 0.0 }
    }

    pub fn arctan(a: f64) -> Self {
        Self {
            poly: Vec::new(),
            arctan: a,
        }
    }

    /// `r(s) + c·s`.
    pub fn plus_linear(&self, c: f64) -> Self {
        let mut poly = self.poly.clone();
        if poly.len() < 2 {
            poly.resize(2, 0.0);
        }
        poly[1] += c;
        Self {
            poly,
            arctan: self.arctan,
        }
    }

    /// Degree of the polynomial part; `None` if it vanishes.
    pub fn degree(&self) -> Option<usize> {
        self.poly.iter().rposition(|c| *c != 0.0)
    }

    fn leading(&self) -> f64 {
        self.degree().map_or(0.0, |d| self.poly[d])
    }

    pub fn is_finite(&self) -> bool {
        self.arctan.is_finite() && self.poly.iter().all(|c| c.is_finite())
    }

    pub fn eval(&self, s: f64) -> f64 {
        let p = self.poly.iter().rev().fold(0.0, |acc, c| acc * s + c);
        p + self.arctan * s.atan()
    }

    pub fn deriv(&self, s: f64) -> f64 {
        let p = self
            .poly
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, c)| acc * s + i as f64 * c);
        p + self.arctan / (1.0 + s * s)
    }

    /// `∫₀ˢ r′(τ) τ dτ` in closed form.
    pub fn primitive(&self, s: f64) -> f64 {
        let p: f64 = self
            .poly
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| i as f64 * c * s.powi(i as i32 + 1) / (i as f64 + 1.0))
            .sum();
        p + 0.5 * self.arctan * (1.0 + s * s).ln()
    }

    /// Growth exponent `r = max(2, deg + 1)`.
    pub fn growth_exponent(&self) -> f64 {
        self.degree().map_or(2.0, |d| (d as f64 + 1.0).max(2.0))
    }

    /// `ℓ` with `|r(s)| ≤ ℓ (1 + |s|^{r−1})`.
    pub fn growth_constant(&self) -> f64 {
        self.poly.iter().map(|c| c.abs()).sum::<f64>() + self.arctan.abs() * std::f64::consts::FRAC_PI_2
    }

    /// `inf r′` over ℝ, or `None` if `r′` is unbounded below.
    pub fn derivative_infimum(&self) -> Option<f64> {
        let d = self.degree().unwrap_or(0);
        if d >= 2 && (d % 2 == 0 || self.poly[d] < 0.0) {
            return None;
        }
        // Roots of r″ lie within the Cauchy bound of its polynomial part.
        let mut radius: f64 = 100.0;
        if d >= 3 {
            let lead = (d * (d - 1)) as f64 * self.poly[d];
            let bound = (2..d)
                .map(|i| ((i * (i - 1)) as f64 * self.poly[i] / lead).abs())
                .fold(0.0, f64::max);
            radius = radius.max(1.0 + bound);
        }
        let n = 20_001;
        let grid: Vec<f64> = (0..n)
            .map(|i| -radius + 2.0 * radius * i as f64 / (n - 1) as f64)
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&s| self.deriv(s)).collect();
        let mut best = vals.iter().copied().fold(f64::INFINITY, f64::min);
        for i in 1..n - 1 {
            if vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] {
                best = best.min(golden_min(|s| self.deriv(s), grid[i - 1], grid[i + 1]));
            }
        }
        // The bounded arctan part may leave the infimum at infinity.
        for s in logspace(radius, 1e6, 200) {
            best = best.min(self.deriv(s)).min(self.deriv(-s));
        }
        if d <= 1 && self.arctan > 0.0 {
            best = best.min(self.poly.get(1).copied().unwrap_or(0.0));
        }
        Some(best)
    }
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    f1.min(f2)
}

/// The pair of reactions: `f` in the bulk and `g` on the boundary.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub f: Reaction,
    pub g: Reaction,
}

impl NonlinearitySpec {
    pub fn linear() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.f.degree().is_none() && self.f.arctan == 0.0 && self.g.degree().is_none() && self.g.arctan == 0.0
    }
}

/// `g̃(s) = g(s) − νβ s`.
pub fn g_tilde(spec: &NonlinearitySpec, nu: f64, beta: f64) -> Reaction {
    spec.g.plus_linear(-nu * beta)
}

/// Nodal evaluation of `F(U) = (f(u), g̃(v))`.
pub fn evaluate_reaction_pair(
    u: &BulkBoundaryField,
    spec: &NonlinearitySpec,
    nu: f64,
    beta: f64,
) -> Result<BulkBoundaryField> {
    let gt = g_tilde(spec, nu, beta);
    let fu = u.u().map(|x| spec.f.eval(x));
    if let Some(i) = fu.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!(
            "bulk reaction is not finite at node {i} (u = {:e})",
            u.u()[i]
        )));
    }
    let gv = u.v().map(|x| gt.eval(x));
    if let Some(k) = gv.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!(
            "boundary reaction is not finite at boundary node {k} (v = {:e})",
            u.v()[k]
        )));
    }
    Ok(BulkBoundaryField::from_parts(fu, gv, SpaceTag::X2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignGrowthReport {
    /// `M_f` with `f′ ≥ −M_f`; `None` if no finite constant exists.
    pub m_f: Option<f64>,
    pub m_g: Option<f64>,
    pub ell1: f64,
    pub ell2: f64,
    pub r1: f64,
    pub r2: f64,
    pub pass: bool,
    pub reasons: Vec<String>,
}

/// Sign and growth constants of both reactions.
pub fn validate_sign_growth(spec: &NonlinearitySpec) -> SignGrowthReport {
    let mut reasons = Vec::new();
    let mut side = |r: &Reaction, name: &str| -> Option<f64> {
        if !r.is_finite() {
            reasons.push(format!("{name} has non-finite coefficients"));
            return None;
        }
        match r.derivative_infimum() {
            Some(inf) => Some((-inf).max(0.0)),
            None => {
                reasons.push(format!("{name}' is unbounded below, no finite sign constant"));
                None
            }
        }
    };
    let m_f = side(&spec.f, "f");
    let m_g = side(&spec.g, "g");
    SignGrowthReport {
        pass: m_f.is_some() && m_g.is_some(),
        m_f,
        m_g,
        ell1: spec.f.growth_constant(),
        ell2: spec.g.growth_constant(),
        r1: spec.f.growth_exponent(),
        r2: spec.g.growth_exponent(),
        reasons,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    /// Both reactions dissipative at infinity; no balance needed.
    Dissipative,
    /// The balance condition holds.
    BalanceCondition,
    /// Only the sign conditions hold.
    SignOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub pass: bool,
    pub classification: Classification,
    /// ε achieving the largest sampled infimum.
    pub witness_eps: Option<f64>,
    /// Largest (over ε) sampled infimum of the balance quotient.
    pub liminf_estimate: f64,
    /// Verdict of the closed-form polynomial casework, when it applies.
    pub closed_form: Option<bool>,
    pub r1: f64,
    pub r2: f64,
    pub poincare: f64,
    pub reason: Option<String>,
}

/// Whether `r(s)s ≥ C|s|^{deg+1}` for large `|s|`: odd degree, positive lead.
fn dissipative_at_infinity(r: &Reaction) -> bool {
    matches!(r.degree(), Some(d) if d % 2 == 1 && r.poly[d] > 0.0)
}

/// Samples the balance quotient
/// `[f(s)s + (|Γ|/|Ω|) g̃(s)s − C²|Γ|²/(4ε|Ω|²) (g̃′(s)s + g̃(s))²] / |s|^{r₁}`
/// for `|s| ∈ [10, 1e6]` and ε on 32 log-spaced values in `(1e-4ω, 0.99ω)`.
pub fn check_balance(
    spec: &NonlinearitySpec,
    nu: f64,
    beta: f64,
    geom: &Geometry,
    omega: f64,
) -> Result<BalanceReport> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::Config(format!("omega must lie in (0,1), got {omega}")));
    }
    let f = &spec.f;
    let gt = g_tilde(spec, nu, beta);
    let r1 = f.growth_exponent();
    let r2 = gt.growth_exponent();
    let poincare = geom.poincare_constant()?;
    let ratio = geom.surface() / geom.volume();
    let mut report = BalanceReport {
        pass: false,
        classification: Classification::SignOnly,
        witness_eps: None,
        liminf_estimate: f64::NAN,
        closed_form: None,
        r1,
        r2,
        poincare,
        reason: None,
    };

    if dissipative_at_infinity(f) && dissipative_at_infinity(&gt) {
        report.pass = true;
        report.classification = Classification::Dissipative;
        return Ok(report);
    }
    if r1 < r2.max(2.0 * (r2 - 1.0)) {
        report.reason = Some(format!(
            "exponent precondition r1 >= max(r2, 2(r2-1)) violated: r1 = {r1}, r2 = {r2}"
        ));
        return Ok(report);
    }

    let k = poincare * poincare * ratio * ratio / 4.0;
    let mut samples = logspace(10.0, 1e6, 400);
    samples.extend(samples.clone().iter().map(|s| -s));
    let quotient = |s: f64, eps: f64| {
        let g = gt.eval(s);
        let cross = gt.deriv(s) * s + g;
        (f.eval(s) * s + ratio * g * s - k / eps * cross * cross) / s.abs().powf(r1)
    };
    let mut best = f64::NEG_INFINITY;
    let mut witness = None;
    for eps in logspace(1e-4 * omega, 0.99 * omega, 32) {
        let inf = samples.iter().map(|&s| quotient(s, eps)).fold(f64::INFINITY, f64::min);
        if inf > best {
            best = inf;
            witness = Some(eps);
        }
    }
    let scale = 1.0 + f.leading().abs() + ratio * gt.leading().abs();
    report.liminf_estimate = best;
    report.pass = best.is_finite() && best >= 1e-12 * scale;
    report.witness_eps = report.pass.then_some(witness).flatten();
    report.classification = if report.pass {
        Classification::BalanceCondition
    } else {
        Classification::SignOnly
    };
    if !report.pass {
        report.reason = Some(format!(
            "balance quotient infimum {best:e} is not positive for any sampled epsilon"
        ));
    }
    report.closed_form = closed_form_balance(f, &gt, r1, r2, poincare, ratio, 0.99 * omega);
    Ok(report)
}

/// Closed-form sufficient conditions for polynomial-like reactions with
/// leading behaviour `r(y)y ~ c|y|^{r}`, evaluated at the given ε.
fn closed_form_balance(
    f: &Reaction,
    gt: &Reaction,
    r1: f64,
    r2: f64,
    poincare: f64,
    ratio: f64,
    eps: f64,
) -> Option<bool> {
    let regular = |r: &Reaction| match r.degree() {
        Some(d) => d <= 1 || d % 2 == 1,
        None => true,
    };
    if !regular(f) || !regular(gt) {
        return None;
    }
    let lead = |r: &Reaction| match r.degree() {
        Some(d) if d >= 1 => r.poly[d],
        _ => 0.0,
    };
    let (cf, cg) = (lead(f), lead(gt));
    if r1 == 2.0 && r2 == 2.0 {
        let rhs = (poincare * ratio * cg).powi(2) / eps;
        return Some(cf + ratio * cg > rhs);
    }
    if cf > 0.0 && cg < 0.0 && r1 > r2.max(2.0 * (r2 - 1.0)) {
        return Some(true);
    }
    if r2 > 2.0 && r1 == 2.0 * (r2 - 1.0) {
        let rhs = (poincare * ratio * cg * r2).powi(2) / (4.0 * eps);
        return Some(cf > rhs);
    }
    None
}

/// `h_f(s) = ∫₀ˢ f′(τ)τ dτ` and `h_g(s) = ∫₀ˢ g̃′(τ)τ dτ`.
#[derive(Debug, Clone)]
pub struct Primitives {
    f: Reaction,
    g_tilde: Reaction,
}

impl Primitives {
    pub fn h_f(&self, s: f64) -> f64 {
        self.f.primitive(s)
    }

    pub fn h_g(&self, s: f64) -> f64 {
        self.g_tilde.primitive(s)
    }
}

pub fn primitives(spec: &NonlinearitySpec, nu: f64, beta: f64) -> Primitives {
    Primitives {
        f: spec.f.clone(),
        g_tilde: g_tilde(spec, nu, beta),
    }
}

/// Reactions of the memoryless limit system:
/// `f̄(x) = f(x) + (1−ω)αx`, `ḡ(x) = g(x) + (1−ν)βx`.
pub fn limit_shifted(spec: &NonlinearitySpec, alpha: f64, beta: f64, omega: f64, nu: f64) -> NonlinearitySpec {
    NonlinearitySpec {
        f: spec.f.plus_linear((1.0 - omega) * alpha),
        g: spec.g.plus_linear((1.0 - nu) * beta),
    }
}
