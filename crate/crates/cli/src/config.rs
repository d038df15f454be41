//! Run configuration files: strict TOML schema and conversion into a
//! [`SimConfig`].
//!
//! All quantities are nondimensional. Every section is a flat table of
//! optional keys; presence, family-specific keys and unknown keys are checked
//! by hand so that one pass reports every offending key.

use std::path::Path;

use cogur_core::analysis::{Axis, Envelope};
use cogur_core::galerkin::{FieldInit, GeometrySpec, HistoryInit, InitialData, Scheme, SimConfig};
use cogur_core::memory::{from_m_kernel, KernelFamily, MKernel, MemoryKernel, Side};
use cogur_core::nonlinear::{NonlinearitySpec, Reaction};
use cogur_core::wentzell::ModelParams;
use cogur_core::Backend;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunConfigFile {
    pub geometry: Option<GeometrySection>,
    pub model: Option<ModelSection>,
    pub kernel_omega: Option<KernelSection>,
    pub kernel_gamma: Option<KernelSection>,
    pub nonlinearity: Option<NonlinearitySection>,
    pub discretization: Option<DiscretizationSection>,
    pub initial: Option<InitialSection>,
    pub output: Option<OutputSection>,
    pub study: Option<StudySection>,
    pub limit: Option<LimitSection>,
    pub bvp: Option<BvpSection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GeometrySection {
    pub backend: Option<String>,
    pub size: Option<f64>,
    pub refine: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModelSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub nu: Option<f64>,
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct KernelSection {
    pub family: Option<String>,
    pub lambda0: Option<f64>,
    pub delta: Option<f64>,
    pub a1: Option<f64>,
    pub delta1: Option<f64>,
    pub a2: Option<f64>,
    pub delta2: Option<f64>,
    pub coeff: Option<f64>,
    pub exponent: Option<f64>,
    pub amplitude: Option<f64>,
    pub rate: Option<f64>,
    pub s: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NonlinearitySection {
    pub f: Option<ReactionSection>,
    pub g: Option<ReactionSection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReactionSection {
    pub family: Option<String>,
    pub coeffs: Option<Vec<f64>>,
    pub amplitude: Option<f64>,
    pub linear: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DiscretizationSection {
    pub n_modes: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub scheme: Option<String>,
    pub s_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InitialSection {
    pub u0: Option<FieldSection>,
    pub v0: Option<FieldSection>,
    pub phi0: Option<HistorySection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FieldSection {
    pub preset: Option<String>,
    pub value: Option<f64>,
    pub index: Option<usize>,
    pub amplitude: Option<f64>,
    pub coeffs: Option<Vec<f64>>,
    pub scale: Option<f64>,
    pub width: Option<f64>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HistorySection {
    pub preset: Option<String>,
    pub field: Option<FieldSection>,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub stride: Option<usize>,
    pub channels: Option<Vec<String>>,
    pub coefficients: Option<bool>,
    pub strong_diagnostics: Option<bool>,
    pub envelope: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StudySection {
    pub axis: Option<String>,
    pub levels: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LimitSection {
    pub epsilons: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BvpSection {
    pub p1: Option<FieldSection>,
    pub p2: Option<FieldSection>,
}

/// Plot and table channels understood by `run`.
pub const CHANNELS: [&str; 7] = [
    "energy",
    "energy_x2",
    "energy_m1",
    "dissipation",
    "v1_norm",
    "lr_norm",
    "m2_proxy",
];
const DEFAULT_CHANNELS: [&str; 5] = ["energy", "energy_x2", "energy_m1", "dissipation", "v1_norm"];

#[derive(Debug, Clone)]
pub struct OutputSettings {
    pub dir: String,
    pub channels: Vec<String>,
    pub coefficients: bool,
    pub envelope: Envelope,
}

#[derive(Debug, Clone)]
pub struct StudySettings {
    pub axis: Axis,
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BvpSettings {
    pub p1: FieldInit,
    pub p2: FieldInit,
}

/// A fully checked configuration.
#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub file: RunConfigFile,
    pub sim: SimConfig,
    pub output: OutputSettings,
    pub study: Option<StudySettings>,
    pub limit: Option<Vec<f64>>,
    pub bvp: Option<BvpSettings>,
    /// Kernel and nonlinearity validator failures.
    pub problems: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io(String),
    /// Every offending key or value, one message each.
    Schema(Vec<String>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "{m}"),
            ConfigError::Schema(list) => {
                writeln!(f, "invalid configuration:")?;
                for m in list {
                    writeln!(f, "  - {m}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_config(path: &Path) -> Result<ParsedConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ParsedConfig, ConfigError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Schema(vec![e.to_string()]))?;
    let file: RunConfigFile = toml::Value::Table(table.clone())
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Schema(vec![e.to_string()]))?;
    let mut errors = Vec::new();
    let known = serde_json::to_value(&file).expect("config sections serialize");
    unknown_keys("", &toml_to_json(&toml::Value::Table(table)), &known, &mut errors);
    let parsed = build(file, &mut errors);
    match parsed {
        Some(p) if errors.is_empty() => Ok(p),
        _ => Err(ConfigError::Schema(errors)),
    }
}

fn toml_to_json(v: &toml::Value) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Keys present in `raw` that the typed schema dropped.
fn unknown_keys(prefix: &str, raw: &Value, known: &Value, errors: &mut Vec<String>) {
    let (Value::Object(raw), Value::Object(known)) = (raw, known) else {
        return;
    };
    for (key, value) in raw {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match known.get(key) {
            None => errors.push(format!("{path}: unknown key")),
            Some(k) => unknown_keys(&path, value, k, errors),
        }
    }
}

/// Names of the keys set in a flat section.
fn present<T: Serialize>(section: &T) -> Vec<String> {
    match serde_json::to_value(section) {
        Ok(Value::Object(m)) => m.into_iter().filter(|(_, v)| !v.is_null()).map(|(k, _)| k).collect(),
        _ => Vec::new(),
    }
}

/// Reports missing required keys and keys not used by the chosen variant.
fn check_keys(path: &str, keys: &[String], required: &[&str], optional: &[&str], errors: &mut Vec<String>) {
    for r in required {
        if !keys.iter().any(|k| k == r) {
            errors.push(format!("{path}.{r}: missing required key"));
        }
    }
    for k in keys {
        if !required.contains(&k.as_str()) && !optional.contains(&k.as_str()) {
            errors.push(format!("{path}.{k}: not used here"));
        }
    }
}

fn required<'a, T>(section: &'a Option<T>, name: &str, errors: &mut Vec<String>) -> Option<&'a T> {
    if section.is_none() {
        errors.push(format!("[{name}]: missing required section"));
    }
    section.as_ref()
}

fn build(file: RunConfigFile, errors: &mut Vec<String>) -> Option<ParsedConfig> {
    let geometry = required(&file.geometry, "geometry", errors).and_then(|g| geometry(g, errors));
    let model = required(&file.model, "model", errors).and_then(|m| model(m, errors));
    let disc = required(&file.discretization, "discretization", errors).and_then(|d| discretization(d, errors));
    let ko = required(&file.kernel_omega, "kernel_omega", errors);
    let kg = required(&file.kernel_gamma, "kernel_gamma", errors);
    let kernel_omega = ko
        .zip(model)
        .and_then(|(k, m)| kernel("kernel_omega", k, m.omega, Side::Omega, errors));
    let kernel_gamma = kg
        .zip(model)
        .and_then(|(k, m)| kernel("kernel_gamma", k, m.nu, Side::Gamma, errors));
    let nonlinearity = match &file.nonlinearity {
        None => Some(NonlinearitySpec::linear()),
        Some(n) => {
            check_keys("nonlinearity", &present(n), &[], &["f", "g"], errors);
            let f =
                n.f.as_ref()
                    .map_or(Some(Reaction::zero()), |r| reaction("nonlinearity.f", r, errors));
            let g =
                n.g.as_ref()
                    .map_or(Some(Reaction::zero()), |r| reaction("nonlinearity.g", r, errors));
            f.zip(g).map(|(f, g)| NonlinearitySpec { f, g })
        }
    };
    let initial = match &file.initial {
        None => Some(InitialData::default()),
        Some(i) => initial(i, errors),
    };
    let out = file.output.clone().unwrap_or_default();
    check_keys(
        "output",
        &present(&out),
        &[],
        &[
            "dir",
            "stride",
            "channels",
            "coefficients",
            "strong_diagnostics",
            "envelope",
        ],
        errors,
    );
    let channels: Vec<String> = out
        .channels
        .clone()
        .unwrap_or_else(|| DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect());
    for c in &channels {
        if !CHANNELS.contains(&c.as_str()) {
            errors.push(format!(
                "output.channels: unknown channel {c:?} (expected one of {})",
                CHANNELS.join(", ")
            ));
        }
    }
    let envelope = match out.envelope.as_deref() {
        None | Some("exponential") => Envelope::Exponential,
        Some("linear") => Envelope::Linear,
        Some(other) => {
            errors.push(format!(
                "output.envelope: unknown envelope {other:?} (expected linear or exponential)"
            ));
            Envelope::Exponential
        }
    };
    let stride = out.stride.unwrap_or(1);
    if stride == 0 {
        errors.push("output.stride: must be at least 1".into());
    }
    let study = file.study.as_ref().and_then(|s| study(s, errors));
    let limit = file.limit.as_ref().and_then(|l| {
        check_keys("limit", &present(l), &["epsilons"], &[], errors);
        let eps = l.epsilons.clone()?;
        if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
            errors.push("limit.epsilons: need at least one positive value".into());
        }
        Some(eps)
    });
    let bvp = file.bvp.as_ref().and_then(|b| {
        check_keys("bvp", &present(b), &["p1", "p2"], &[], errors);
        let p1 = field("bvp.p1", b.p1.as_ref()?, errors)?;
        let p2 = field("bvp.p2", b.p2.as_ref()?, errors)?;
        Some(BvpSettings { p1, p2 })
    });

    let (geometry, model, (n_modes, dt, t_end, scheme, s_max)) = (geometry?, model?, disc?);
    let sim = SimConfig {
        geometry,
        model,
        kernel_omega: kernel_omega?,
        kernel_gamma: kernel_gamma?,
        nonlinearity: nonlinearity?,
        n_modes,
        dt,
        t_end,
        scheme,
        s_max,
        initial: initial?,
        stride,
        strong_diagnostics: out.strong_diagnostics.unwrap_or(false),
        force: false,
    };
    if let Err(e) = sim.model.validate() {
        match e {
            cogur_core::Error::Validation(list) => errors.extend(list.into_iter().map(|m| format!("model: {m}"))),
            other => errors.push(format!("model: {other}")),
        }
        return None;
    }
    if let Err(e) = sim.n_steps() {
        errors.push(format!("discretization: {e}"));
    }
    let problems = match sim.geometry.build().and_then(|g| sim.validation_problems(&g)) {
        Ok(p) => p,
        Err(e) => {
            errors.push(format!("geometry: {e}"));
            return None;
        }
    };
    let warnings = sim.warnings();
    Some(ParsedConfig {
        file,
        sim,
        output: OutputSettings {
            dir: out.dir.unwrap_or_else(|| "out".into()),
            channels,
            coefficients: out.coefficients.unwrap_or(false),
            envelope,
        },
        study,
        limit,
        bvp,
        problems,
        warnings,
    })
}

fn geometry(g: &GeometrySection, errors: &mut Vec<String>) -> Option<GeometrySpec> {
    check_keys("geometry", &present(g), &["backend", "refine"], &["size"], errors);
    let backend = match g.backend.as_deref()? {
        "interval" => Backend::Interval,
        "disk" => Backend::Disk,
        other => {
            errors.push(format!(
                "geometry.backend: unknown backend {other:?} (expected interval or disk)"
            ));
            return None;
        }
    };
    Some(GeometrySpec {
        backend,
        size: g.size.unwrap_or(1.0),
        refine: g.refine?,
    })
}

fn model(m: &ModelSection, errors: &mut Vec<String>) -> Option<ModelParams> {
    check_keys("model", &present(m), &["alpha", "beta", "nu", "omega"], &[], errors);
    Some(ModelParams {
        alpha: m.alpha?,
        beta: m.beta?,
        nu: m.nu?,
        omega: m.omega?,
    })
}

type Discretization = (usize, f64, f64, Scheme, Option<f64>);

fn discretization(d: &DiscretizationSection, errors: &mut Vec<String>) -> Option<Discretization> {
    check_keys(
        "discretization",
        &present(d),
        &["n_modes", "dt", "t_end"],
        &["scheme", "s_max"],
        errors,
    );
    let scheme = match d.scheme.as_deref() {
        None | Some("imex-euler") => Scheme::ImexEuler,
        Some("imex-bdf2") => Scheme::ImexBdf2,
        Some(other) => {
            errors.push(format!(
                "discretization.scheme: unknown scheme {other:?} (expected imex-euler or imex-bdf2)"
            ));
            return None;
        }
    };
    if let Some(s) = d.s_max {
        if !(s > 0.0) {
            errors.push("discretization.s_max: must be positive".into());
        }
    }
    Some((d.n_modes?, d.dt?, d.t_end?, scheme, d.s_max))
}

fn kernel(path: &str, k: &KernelSection, coeff: f64, side: Side, errors: &mut Vec<String>) -> Option<MemoryKernel> {
    let keys = present(k);
    let family = k.family.as_deref().unwrap_or_default();
    let (req, opt): (&[&str], &[&str]) = match family {
        "zero" => (&["family"], &[]),
        "exponential" => (&["family", "lambda0", "delta"], &[]),
        "bi-exponential" => (&["family", "a1", "delta1", "a2", "delta2"], &[]),
        "power-law" => (&["family", "coeff", "exponent"], &[]),
        "tabulated" => (&["family", "s", "mu"], &[]),
        "m-exponential" => (&["family", "amplitude", "rate"], &[]),
        "m-power-law" => (&["family", "amplitude", "exponent"], &[]),
        "" => {
            errors.push(format!("{path}.family: missing required key"));
            return None;
        }
        other => {
            errors.push(format!(
                "{path}.family: unknown family {other:?} (expected zero, exponential, bi-exponential, power-law, tabulated, m-exponential or m-power-law)"
            ));
            return None;
        }
    };
    let before = errors.len();
    check_keys(path, &keys, req, opt, errors);
    if errors.len() > before {
        return None;
    }
    let made = match family {
        "zero" => Ok(MemoryKernel::zero(side)),
        "exponential" => MemoryKernel::new(
            KernelFamily::Exponential {
                lambda0: k.lambda0?,
                delta: k.delta?,
            },
            side,
        ),
        "bi-exponential" => MemoryKernel::new(
            KernelFamily::BiExponential {
                a1: k.a1?,
                delta1: k.delta1?,
                a2: k.a2?,
                delta2: k.delta2?,
            },
            side,
        ),
        "power-law" => MemoryKernel::new(
            KernelFamily::PowerLaw {
                coeff: k.coeff?,
                exponent: k.exponent?,
            },
            side,
        ),
        "tabulated" => MemoryKernel::tabulated(k.s.clone()?, k.mu.clone()?, side),
        "m-exponential" => from_m_kernel(
            &MKernel::Exponential {
                amplitude: k.amplitude?,
                rate: k.rate?,
            },
            coeff,
            side,
        ),
        _ => from_m_kernel(
            &MKernel::PowerLaw {
                amplitude: k.amplitude?,
                exponent: k.exponent?,
            },
            coeff,
            side,
        ),
    };
    made.map_err(|e| errors.push(format!("{path}: {e}"))).ok()
}

fn reaction(path: &str, r: &ReactionSection, errors: &mut Vec<String>) -> Option<Reaction> {
    let keys = present(r);
    let (req, opt): (&[&str], &[&str]) = match r.family.as_deref().unwrap_or_default() {
        "zero" => (&["family"], &[]),
        "polynomial" => (&["family", "coeffs"], &[]),
        "arctan" => (&["family", "amplitude"], &["linear"]),
        "" => {
            errors.push(format!("{path}.family: missing required key"));
            return None;
        }
        other => {
            errors.push(format!(
                "{path}.family: unknown family {other:?} (expected zero, polynomial or arctan)"
            ));
            return None;
        }
    };
    let before = errors.len();
    check_keys(path, &keys, req, opt, errors);
    if errors.len() > before {
        return None;
    }
    let out = match r.family.as_deref()? {
        "zero" => Reaction::zero(),
        "polynomial" => Reaction::polynomial(r.coeffs.clone()?),
        _ => Reaction::arctan(r.amplitude?).plus_linear(r.linear.unwrap_or(0.0)),
    };
    if !out.is_finite() {
        errors.push(format!("{path}: coefficients must be finite"));
        return None;
    }
    Some(out)
}

fn field(path: &str, f: &FieldSection, errors: &mut Vec<String>) -> Option<FieldInit> {
    let keys = present(f);
    let (req, opt): (&[&str], &[&str]) = match f.preset.as_deref().unwrap_or_default() {
        "zero" => (&["preset"], &[]),
        "constant" => (&["preset", "value"], &[]),
        "mode" => (&["preset", "index"], &["amplitude"]),
        "modal" => (&["preset", "coeffs"], &[]),
        "coordinate" => (&["preset"], &["scale"]),
        "gaussian" => (&["preset", "amplitude", "width"], &[]),
        "nodal" => (&["preset", "values"], &[]),
        "" => {
            errors.push(format!("{path}.preset: missing required key"));
            return None;
        }
        other => {
            errors.push(format!(
                "{path}.preset: unknown preset {other:?} (expected zero, constant, mode, modal, coordinate, gaussian or nodal)"
            ));
            return None;
        }
    };
    let before = errors.len();
    check_keys(path, &keys, req, opt, errors);
    if errors.len() > before {
        return None;
    }
    Some(match f.preset.as_deref()? {
        "zero" => FieldInit::Zero,
        "constant" => FieldInit::Constant(f.value?),
        "mode" => FieldInit::Mode {
            index: f.index?,
            amplitude: f.amplitude.unwrap_or(1.0),
        },
        "modal" => FieldInit::Modal(f.coeffs.clone()?),
        "coordinate" => FieldInit::Coordinate {
            scale: f.scale.unwrap_or(1.0),
        },
        "gaussian" => FieldInit::Gaussian {
            amplitude: f.amplitude?,
            width: f.width?,
        },
        _ => FieldInit::Nodal(f.values.clone()?),
    })
}

fn history(path: &str, h: &HistorySection, errors: &mut Vec<String>) -> Option<HistoryInit> {
    let keys = present(h);
    let (req, opt): (&[&str], &[&str]) = match h.preset.as_deref().unwrap_or_default() {
        "zero" => (&["preset"], &[]),
        "linear" | "window" => (&["preset", "field"], &[]),
        "saturating" => (&["preset", "field", "rate"], &[]),
        "" => {
            errors.push(format!("{path}.preset: missing required key"));
            return None;
        }
        other => {
            errors.push(format!(
                "{path}.preset: unknown preset {other:?} (expected zero, linear, saturating or window)"
            ));
            return None;
        }
    };
    let before = errors.len();
    check_keys(path, &keys, req, opt, errors);
    if errors.len() > before {
        return None;
    }
    let inner = |errors: &mut Vec<String>| field(&format!("{path}.field"), h.field.as_ref()?, errors);
    Some(match h.preset.as_deref()? {
        "zero" => HistoryInit::Zero,
        "linear" => HistoryInit::Linear(inner(errors)?),
        "window" => HistoryInit::Window(inner(errors)?),
        _ => HistoryInit::Saturating {
            field: inner(errors)?,
            rate: h.rate?,
        },
    })
}

fn initial(i: &InitialSection, errors: &mut Vec<String>) -> Option<InitialData> {
    check_keys("initial", &present(i), &[], &["u0", "v0", "phi0"], errors);
    let u0 =
        i.u0.as_ref()
            .map_or(Some(FieldInit::Zero), |f| field("initial.u0", f, errors));
    let v0 = match &i.v0 {
        None => Some(None),
        Some(f) => field("initial.v0", f, errors).map(Some),
    };
    let phi0 = i
        .phi0
        .as_ref()
        .map_or(Some(HistoryInit::Zero), |h| history("initial.phi0", h, errors));
    Some(InitialData {
        u0: u0?,
        v0: v0?,
        phi0: phi0?,
    })
}

fn study(s: &StudySection, errors: &mut Vec<String>) -> Option<StudySettings> {
    check_keys("study", &present(s), &["axis", "levels"], &[], errors);
    let axis = match s.axis.as_deref()? {
        "dt" => Axis::Dt,
        "modes" => Axis::Modes,
        "mesh" => Axis::Mesh,
        other => {
            errors.push(format!(
                "study.axis: unknown axis {other:?} (expected dt, modes or mesh)"
            ));
            return None;
        }
    };
    let levels = s.levels.clone()?;
    if levels.len() < 3 || levels.iter().any(|l| !(*l > 0.0)) {
        errors.push("study.levels: need at least three positive levels".into());
    }
    Some(StudySettings { axis, levels })
}

/// Canonical serialization hashed into the manifest.
pub fn canonical_json(file: &RunConfigFile) -> String {
    let mut copy = file.clone();
    // The output location does not change results.
    if let Some(o) = copy.output.as_mut() {
        o.dir = None;
    }
    serde_json::to_string(&copy).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
[geometry]
backend = "interval"
refine = 8

[model]
alpha = 1.0
beta = 1.0
nu = 0.5
omega = 0.5

[kernel_omega]
family = "exponential"
lambda0 = 1.0
delta = 1.0

[kernel_gamma]
family = "zero"

[discretization]
n_modes = 4
dt = 0.01
t_end = 0.1
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let p = parse_config_str(MINIMAL).unwrap();
        assert_eq!(p.sim.scheme, Scheme::ImexEuler);
        assert_eq!(p.sim.stride, 1);
        assert_eq!(p.output.dir, "out");
        assert!(p.problems.is_empty());
    }

    #[test]
    fn every_unknown_key_is_listed() {
        let text = MINIMAL
            .replace("refine = 8", "refine = 8\nrefin = 3")
            .replace("dt = 0.01", "dt = 0.01\nschem = 1")
            + "\n[outptu]\ndir = \"x\"\n";
        let ConfigError::Schema(list) = parse_config_str(&text).unwrap_err() else {
            panic!("expected schema error");
        };
        for key in ["geometry.refin", "discretization.schem", "outptu"] {
            assert!(list.iter().any(|m| m.starts_with(key)), "{key} missing from {list:?}");
        }
    }

    #[test]
    fn family_specific_keys_are_checked() {
        let text = MINIMAL.replace("lambda0 = 1.0\ndelta = 1.0", "lambda0 = 1.0\nexponent = 2.0");
        let ConfigError::Schema(list) = parse_config_str(&text).unwrap_err() else {
            panic!("expected schema error");
        };
        assert!(list.iter().any(|m| m.contains("kernel_omega.delta: missing")));
        assert!(list.iter().any(|m| m.contains("kernel_omega.exponent: not used")));
    }

    #[test]
    fn nu_out_of_range_is_rejected() {
        let err = parse_config_str(&MINIMAL.replace("nu = 0.5", "nu = 0.0")).unwrap_err();
        assert!(err.to_string().contains("nu must lie in (0,1)"), "{err}");
    }

    #[test]
    fn slow_kernel_with_strong_diagnostics_warns() {
        let text = MINIMAL.replace(
            "family = \"exponential\"\nlambda0 = 1.0\ndelta = 1.0",
            "family = \"power-law\"\ncoeff = 1.0\nexponent = 3.0",
        ) + "\n[output]\nstrong_diagnostics = true\n";
        let p = parse_config_str(&text).unwrap();
        assert!(p.problems.is_empty());
        assert!(p.warnings.iter().any(|w| w.contains("kernel_omega")));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = parse_config_str(&(MINIMAL.to_string() + "\n[output]\ndir = \"a\"\n")).unwrap();
        let b = parse_config_str(&(MINIMAL.to_string() + "\n[output]\ndir = \"b\"\n")).unwrap();
        assert_eq!(canonical_json(&a.file), canonical_json(&b.file));
    }
}
