//! Deterministic CSV, SVG and manifest output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cogur_core::analysis::EnergyRow;
use cogur_core::galerkin::Trajectory;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Float formatting for every CSV cell: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Trajectory table: `t, energy_X2, energy_M1, dissipation, V1_norm`, then
/// `a_1..a_n` when `coefficients` is set.
pub fn trajectory_csv(traj: &Trajectory, coefficients: bool) -> String {
    let mut out = String::from("t,energy_X2,energy_M1,dissipation,V1_norm");
    let n = traj.states.first().map_or(0, |a| a.len());
    if coefficients {
        for i in 1..=n {
            let _ = write!(out, ",a_{i}");
        }
    }
    out.push('\n');
    for (row, a) in traj.rows.iter().zip(&traj.states) {
        let cells = [row.t, row.x2, row.m1, row.dissipation, row.v1.max(0.0).sqrt()];
        out.push_str(&cells.map(num).join(","));
        if coefficients {
            for x in a.iter() {
                out.push(',');
                out.push_str(&num(*x));
            }
        }
        out.push('\n');
    }
    out
}

/// Values of a named channel, or `None` when the channel has no data.
pub fn channel(rows: &[EnergyRow], name: &str) -> Option<Vec<f64>> {
    let pick: fn(&EnergyRow) -> Option<f64> = match name {
        "energy" => |r| Some(r.energy),
        "energy_x2" => |r| Some(r.x2),
        "energy_m1" => |r| Some(r.m1),
        "dissipation" => |r| Some(r.dissipation),
        "v1_norm" => |r| Some(r.v1.max(0.0).sqrt()),
        "lr_norm" => |r| Some(r.lr_norm),
        "m2_proxy" => |r| r.m2_proxy,
        _ => return None,
    };
    let values: Option<Vec<f64>> = rows.iter().map(pick).collect();
    values.filter(|v| !v.is_empty())
}

/// Self-contained line plot of `ys` against `xs`.
pub fn svg_plot(title: &str, xs: &[f64], ys: &[f64]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 90.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 50.0;
    let finite = |v: &[f64]| -> (f64, f64) {
        v.iter()
            .filter(|x| x.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            })
    };
    let (mut x0, mut x1) = finite(xs);
    let (mut y0, mut y1) = finite(ys);
    if !(x0 < x1) {
        x0 = if x0.is_finite() { x0 - 0.5 } else { 0.0 };
        x1 = x0 + 1.0;
    }
    if !(y0 < y1) {
        let c = if y0.is_finite() { y0 } else { 0.0 };
        let pad = if c == 0.0 { 1.0 } else { 0.1 * c.abs() };
        y0 = c - pad;
        y1 = c + pad;
    }
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let (bx0, bx1, by0, by1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        s,
        r#"<path d="M{bx0} {by0} L{bx0} {by1} L{bx1} {by1}" fill="none" stroke="black"/>"#
    );
    if y0 < 0.0 && y1 > 0.0 {
        let z = py(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{bx0}" y1="{z:.3}" x2="{bx1}" y2="{z:.3}" stroke="#999" stroke-dasharray="4 3"/>"##
        );
    }
    let label = |s: &mut String, x: f64, y: f64, anchor: &str, text: String| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.3}" y="{y:.3}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{text}</text>"#
        );
    };
    label(&mut s, bx0, by1 + 16.0, "middle", format!("{x0:.4e}"));
    label(&mut s, bx1, by1 + 16.0, "end", format!("{x1:.4e}"));
    label(&mut s, bx0 - 6.0, by1, "end", format!("{y0:.4e}"));
    label(&mut s, bx0 - 6.0, by0 + 4.0, "end", format!("{y1:.4e}"));
    label(&mut s, (bx0 + bx1) / 2.0, H - 12.0, "middle", "t".into());
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.3}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.3})">{}</text>"#,
        (by0 + by1) / 2.0,
        (by0 + by1) / 2.0,
        escape(title)
    );
    let points: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| format!("{:.3},{:.3}", px(x), py(y)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>"##,
        points.join(" ")
    );
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One SVG per requested channel; channels without data are skipped and
/// reported in the returned notes.
pub fn emit_plots(traj: &Trajectory, channels: &[String]) -> (Vec<(String, String)>, Vec<String>) {
    let mut plots = Vec::new();
    let mut notes = Vec::new();
    if traj.is_empty() {
        notes.push("trajectory is empty; no plots written".into());
        return (plots, notes);
    }
    for name in channels {
        match channel(&traj.rows, name) {
            Some(ys) => plots.push((format!("{name}.svg"), svg_plot(name, &traj.times, &ys))),
            None => notes.push(format!("channel {name} has no data; plot skipped")),
        }
    }
    (plots, notes)
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub forced: bool,
    pub validation: Vec<String>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    pub files: Vec<FileEntry>,
}

/// Collects output files and writes them, with a manifest, under `dir`.
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputSet {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: contents.len(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    pub fn finish(mut self, mut manifest: RunManifest) -> std::io::Result<PathBuf> {
        manifest.files = std::mem::take(&mut self.files);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn flat_zero_plot_sits_on_axis() {
        let svg = svg_plot("zero", &[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]);
        // Range [-1, 1]: zero maps to the vertical middle of the plot area.
        assert!(
            svg.contains("points=\"90.000,195.000 355.000,195.000 620.000,195.000\""),
            "{svg}"
        );
        assert_eq!(svg, svg_plot("zero", &[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]));
    }

    #[test]
    fn empty_channel_is_skipped() {
        let traj = Trajectory {
            times: vec![0.0],
            states: vec![cogur_core::DVector::zeros(1)],
            rows: vec![EnergyRow {
                t: 0.0,
                x2: 0.0,
                v1: 0.0,
                m1: 0.0,
                energy: 0.0,
                dissipation: 0.0,
                forcing: 0.0,
                lr_norm: 0.0,
                m2_proxy: None,
            }],
            ..Default::default()
        };
        let (plots, notes) = emit_plots(&traj, &["energy".into(), "m2_proxy".into()]);
        assert_eq!(plots.len(), 1);
        assert!(notes[0].contains("m2_proxy"));
    }
}
