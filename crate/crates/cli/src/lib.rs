//! Command-line driver: configuration ingestion, subcommand dispatch and
//! artifact emission.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use cogur_core::analysis::{self, Verdict};
use cogur_core::galerkin::GalerkinSystem;
use cogur_core::nonlinear;
use cogur_core::wentzell::{self, assemble};
use cogur_core::Error;
use serde_json::json;

use artifacts::{num, OutputSet, RunManifest};
use config::{canonical_json, parse_config, ConfigError, ParsedConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable that overrides `[output].dir`.
pub const OUT_ENV: &str = "COGUR_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "cogur",
    version,
    about = "Heat conduction with fading memory in the bulk and on a Wentzell boundary"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, clap::Args)]
struct Force {
    /// Run even if the kernel or nonlinearity validators reject the config.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time-step the configured problem and write the trajectory.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[command(flatten)]
        force: Force,
        /// Append modal coefficient columns to the trajectory table.
        #[arg(long)]
        coefficients: bool,
    },
    /// Write the lowest `n_modes` eigenvalues of the Wentzell operator.
    Eig {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Solve the static bulk-surface problem from the [bvp] section.
    Bvp {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Report kernel admissibility as JSON.
    CheckKernel {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Report the sign, growth and balance validators as JSON.
    CheckNonlinearity {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Refinement study from the [study] section.
    Study {
        #[arg(short, long)]
        config: PathBuf,
        #[command(flatten)]
        force: Force,
    },
    /// Distance to the memoryless limit for the [limit] epsilons.
    Limit {
        #[arg(short, long)]
        config: PathBuf,
        #[command(flatten)]
        force: Force,
    },
}

#[derive(Debug)]
enum Failure {
    Rejected(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Validation(_) | Error::InadmissibleKernel(_) | Error::UnsupportedParameter(_) => {
                Failure::Rejected(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Rejected(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Rejected(format!("cannot write output: {e}"))
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit status.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let out_override = std::env::var_os(OUT_ENV).map(PathBuf::from);
    match execute(cli.command, out_override.as_deref()) {
        Ok(()) => EXIT_OK,
        Err(Failure::Rejected(m)) => {
            eprintln!("error: {m}");
            EXIT_REJECTED
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            EXIT_NUMERICAL
        }
    }
}

fn load(path: &Path, force: bool) -> Result<ParsedConfig, Failure> {
    let mut parsed = parse_config(path)?;
    if !parsed.problems.is_empty() && !force {
        return Err(Failure::Rejected(format!(
            "configuration rejected by validators:\n  - {}",
            parsed.problems.join("\n  - ")
        )));
    }
    parsed.sim.force = force;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed)
}

fn manifest(parsed: &ParsedConfig, command: &str, notes: Vec<String>) -> RunManifest {
    RunManifest {
        tool: "cogur".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config_hash: artifacts::sha256_hex(canonical_json(&parsed.file).as_bytes()),
        forced: parsed.sim.force,
        validation: parsed.problems.clone(),
        warnings: parsed.warnings.clone(),
        notes,
        files: Vec::new(),
    }
}

fn out_dir(parsed: &ParsedConfig, over: Option<&Path>) -> PathBuf {
    over.map_or_else(|| PathBuf::from(&parsed.output.dir), Path::to_path_buf)
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes") + "\n"
}

fn execute(command: Command, over: Option<&Path>) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            force,
            coefficients,
        } => run(&config, force.force, coefficients, over),
        Command::Eig { config } => eig(&config, over),
        Command::Bvp { config } => bvp(&config, over),
        Command::CheckKernel { config } => check_kernel(&config, over),
        Command::CheckNonlinearity { config } => check_nonlinearity(&config, over),
        Command::Study { config, force } => study(&config, force.force, over),
        Command::Limit { config, force } => limit(&config, force.force, over),
    }
}

fn run(path: &Path, force: bool, coefficients: bool, over: Option<&Path>) -> Result<(), Failure> {
    let parsed = load(path, force)?;
    let sys = GalerkinSystem::new(parsed.sim.clone())?;
    let traj = sys.run()?;
    let monitor = analysis::monitor_apriori(&traj, parsed.output.envelope);
    let mut out = OutputSet::create(&out_dir(&parsed, over))?;
    out.write(
        "trajectory.csv",
        &artifacts::trajectory_csv(&traj, coefficients || parsed.output.coefficients),
    )?;
    out.write(
        "monitor.json",
        &pretty(&serde_json::to_value(&monitor).expect("report serializes")),
    )?;
    if parsed.sim.strong_diagnostics {
        let strong = analysis::strong_diagnostics(&traj, &parsed.sim);
        let mut csv = String::from("t,V1_norm,dt_norm,M2_proxy\n");
        for i in 0..strong.times.len() {
            let m2 = strong.m2_proxy[i].map_or_else(String::new, num);
            csv.push_str(&format!(
                "{},{},{},{}\n",
                num(strong.times[i]),
                num(strong.v1_norm[i]),
                num(strong.dt_norm[i]),
                m2
            ));
        }
        out.write("strong.csv", &csv)?;
    }
    let (plots, mut notes) = artifacts::emit_plots(&traj, &parsed.output.channels);
    for (name, svg) in &plots {
        out.write(name, svg)?;
    }
    notes.extend(sys.warnings().iter().cloned());
    if monitor.verdict != Verdict::Pass {
        notes.push(format!("a-priori monitor verdict: {:?}", monitor.verdict).to_lowercase());
    }
    let path = out.finish(manifest(&parsed, "run", notes))?;
    let last = traj.rows.last().expect("trajectory has the initial row");
    println!(
        "run: {} steps, final energy {:.6e}, monitor {:?}; manifest {}",
        sys.n_steps(),
        last.energy,
        monitor.verdict,
        path.display()
    );
    Ok(())
}

fn eig(path: &Path, over: Option<&Path>) -> Result<(), Failure> {
    let parsed = load(path, true)?;
    let p = parsed.sim.model;
    let geom = parsed.sim.geometry.build()?;
    let op = assemble(&geom, p.alpha, p.beta, p.omega, p.nu)?;
    let basis = op.eigenbasis(parsed.sim.n_modes)?;
    let mut csv = String::from("index,lambda,residual\n");
    for (i, (l, r)) in basis.values().iter().zip(basis.residuals()).enumerate() {
        csv.push_str(&format!("{},{},{}\n", i + 1, num(*l), num(*r)));
    }
    let mut out = OutputSet::create(&out_dir(&parsed, over))?;
    out.write("eigenvalues.csv", &csv)?;
    out.write("nodes.csv", &geom.nodes_csv())?;
    out.write("cells.csv", &geom.cells_csv())?;
    out.finish(manifest(&parsed, "eig", Vec::new()))?;
    println!("eig: {} eigenvalues, lowest {:.6e}", basis.n_modes(), basis.values()[0]);
    Ok(())
}

fn bvp(path: &Path, over: Option<&Path>) -> Result<(), Failure> {
    let parsed = load(path, true)?;
    let settings = parsed
        .bvp
        .clone()
        .ok_or_else(|| Failure::Rejected("bvp needs a [bvp] section with p1 and p2".into()))?;
    let geom = parsed.sim.geometry.build()?;
    let p1 = settings.p1.evaluate(&geom, None, false)?;
    let p2 = settings.p2.evaluate(&geom, None, true)?;
    let sol = wentzell::solve_bvp(&geom, &p1, &p2, parsed.sim.model.beta)?;
    let mut csv = String::from("node,x,y,u\n");
    for (i, (p, u)) in geom.nodes().iter().zip(sol.field.u().iter()).enumerate() {
        csv.push_str(&format!("{i},{},{},{}\n", num(p[0]), num(p[1]), num(*u)));
    }
    let mut out = OutputSet::create(&out_dir(&parsed, over))?;
    out.write("bvp.csv", &csv)?;
    out.write(
        "bvp.json",
        &pretty(&json!({ "regularity_ratio": sol.regularity_ratio })),
    )?;
    out.finish(manifest(&parsed, "bvp", Vec::new()))?;
    println!(
        "bvp: solved on {} nodes, regularity ratio {:.6e}",
        geom.n_nodes(),
        sol.regularity_ratio
    );
    Ok(())
}

fn check_kernel(path: &Path, over: Option<&Path>) -> Result<(), Failure> {
    let parsed = load(path, true)?;
    let describe = |k: &cogur_core::memory::MemoryKernel| {
        json!({
            "family": k.family(),
            "report": k.report(),
            "admissible": k.report().admissible(),
            "mass": k.mass(),
            "decay": k.decay(),
        })
    };
    let report = json!({
        "kernel_omega": describe(&parsed.sim.kernel_omega),
        "kernel_gamma": describe(&parsed.sim.kernel_gamma),
        "s_max": parsed.sim.resolved_s_max(),
    });
    let text = pretty(&report);
    let mut out = OutputSet::create(&out_dir(&parsed, over))?;
    out.write("kernels.json", &text)?;
    out.finish(manifest(&parsed, "check-kernel", Vec::new()))?;
    print!("{text}");
    let bad: Vec<&str> = [
        ("kernel_omega", &parsed.sim.kernel_omega),
        ("kernel_gamma", &parsed.sim.kernel_gamma),
    ]
    .iter()
    .filter(|(_, k)| !k.report().admissible())
    .map(|(n, _)| *n)
    .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Rejected(format!("inadmissible kernel: {}", bad.join(", "))))
    }
}

fn check_nonlinearity(path: &Path, over: Option<&Path>) -> Result<(), Failure> {
    let parsed = load(path, true)?;
    let sim = &parsed.sim;
    let geom = sim.geometry.build()?;
    let sign = nonlinear::validate_sign_growth(&sim.nonlinearity);
    let balance = nonlinear::check_balance(&sim.nonlinearity, sim.model.nu, sim.model.beta, &geom, sim.model.omega)?;
    let report = json!({ "sign_growth": sign, "balance": balance });
    let text = pretty(&report);
    let mut out = OutputSet::create(&out_dir(&parsed, over))?;
    out.write("nonlinearity.json", &text)?;
    out.finish(manifest(&parsed, "check-nonlinearity", Vec::new()))?;
    print!("{text}");
    let failures: Vec<&String> = parsed
        .problems
        .iter()
        .filter(|p| p.starts_with("nonlinearity"))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Rejected(
            failures.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("; "),
        ))
    }
}

fn study(path: &Path, force: bool, over: Option<&Path>) -> Result<(), Failure> {
    let parsed = load(path, force)?;
    let settings = parsed
        .study
        .clone()
        .ok_or_else(|| Failure::Rejected("study needs a [study] section with axis and levels".into()))?;
    let report = analysis::convergence_study(&parsed.sim, settings.axis, &settings.levels, None)?;
    // `order` compares a level with the previous one; empty where undefined.
    let mut csv = String::from("level,width,error,order\n");
    for i in 0..report.levels.len() {
        let order = i
            .checked_sub(1)
            .and_then(|j| report.orders.get(j))
            .map_or_else(String::new, |o| num(*o));
        csv.push_str(&format!(
            "{},{},{},{}\n",
            num(report.levels[i]),
            num(report.widths[i]),
            num(report.errors[i]),
            order
        ));
    }
    let mut out = OutputSet::create(&out_dir(&parsed, over))?;
    out.write("convergence.csv", &csv)?;
    out.write(
        "convergence.json",
        &pretty(&serde_json::to_value(&report).expect("report serializes")),
    )?;
    let notes = if report.non_monotone {
        vec!["errors are not monotone across levels".into()]
    } else {
        Vec::new()
    };
    out.finish(manifest(&parsed, "study", notes))?;
    println!("study: observed order {:.3}", report.observed_order);
    Ok(())
}

fn limit(path: &Path, force: bool, over: Option<&Path>) -> Result<(), Failure> {
    let parsed = load(path, force)?;
    let eps = parsed
        .limit
        .clone()
        .ok_or_else(|| Failure::Rejected("limit needs a [limit] section with epsilons".into()))?;
    let report = analysis::limit_study(&parsed.sim, &eps)?;
    let mut csv = String::from("epsilon,final_distance\n");
    for (e, d) in report.epsilons.iter().zip(&report.distances) {
        csv.push_str(&format!("{},{}\n", num(*e), num(*d)));
    }
    let mut out = OutputSet::create(&out_dir(&parsed, over))?;
    out.write("limit.csv", &csv)?;
    let notes = if report.strictly_decreasing {
        Vec::new()
    } else {
        vec!["distances are not strictly decreasing in epsilon".into()]
    };
    out.finish(manifest(&parsed, "limit", notes))?;
    println!("limit: distances {:?}", report.distances);
    Ok(())
}
