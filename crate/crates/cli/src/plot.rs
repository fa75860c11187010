//! SVG rendering of the CSV artifacts. Output depends only on the CSV
//! contents: fixed canvas, fixed three-decimal coordinates, no timestamps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{io_err, CliError};
use crate::table::Table;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
pub const STABLE_COLOR: &str = "#1f4fd1";
pub const UNSTABLE_COLOR: &str = "#d12a1f";
const NEUTRAL_COLOR: &str = "#222222";
const TRAJECTORY_COLOR: &str = "#2a8f3a";

#[derive(Debug, Clone)]
struct Line {
    points: Vec<(f64, f64)>,
    color: &'static str,
    dashed: bool,
    class: &'static str,
}

#[derive(Debug, Clone)]
struct Marker {
    at: (f64, f64),
    label: String,
    class: &'static str,
}

#[derive(Debug, Clone, Default)]
struct Figure {
    title: String,
    x_label: String,
    y_label: String,
    lines: Vec<Line>,
    markers: Vec<Marker>,
}

/// Round step of 1, 2 or 5 times a power of ten giving about `n` ticks.
fn tick_step(span: f64, n: f64) -> f64 {
    let raw = span / n;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let f = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Figure {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self
            .lines
            .iter()
            .flat_map(|l| l.points.iter())
            .chain(self.markers.iter().map(|m| &m.at));
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for &(x, y) in pts.filter(|p| p.0.is_finite() && p.1.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            let s = if hi > lo {
                0.05 * (hi - lo)
            } else {
                0.5 * lo.abs().max(1.0)
            };
            (lo - s, hi + s)
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        (x0, x1, y0, y1)
    }

    fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            s,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        // Frame and ticks.
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            s,
            r#"<rect class="frame" x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="{NEUTRAL_COLOR}"/>"#,
            r - l,
            b - t
        );
        let xs = tick_step(x1 - x0, 6.0);
        let mut x = (x0 / xs).ceil() * xs;
        while x <= x1 {
            let px = sx(x);
            let _ = writeln!(
                s,
                r#"<line x1="{px:.3}" y1="{b}" x2="{px:.3}" y2="{:.3}" stroke="{NEUTRAL_COLOR}"/>"#,
                b + 5.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{px:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
                b + 18.0,
                fmt_tick(x, xs)
            );
            x += xs;
        }
        let ys = tick_step(y1 - y0, 6.0);
        let mut y = (y0 / ys).ceil() * ys;
        while y <= y1 {
            let py = sy(y);
            let _ = writeln!(
                s,
                r#"<line x1="{:.3}" y1="{py:.3}" x2="{l}" y2="{py:.3}" stroke="{NEUTRAL_COLOR}"/>"#,
                l - 5.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{}</text>"#,
                l - 8.0,
                py + 4.0,
                fmt_tick(y, ys)
            );
            y += ys;
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for line in &self.lines {
            // NaN breaks a line into separate pieces.
            for piece in line.points.split(|p| !(p.0.is_finite() && p.1.is_finite())) {
                if piece.len() < 2 {
                    continue;
                }
                let pts: Vec<String> = piece
                    .iter()
                    .map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y)))
                    .collect();
                let dash = if line.dashed {
                    r#" stroke-dasharray="6 4""#
                } else {
                    ""
                };
                let _ = writeln!(
                    s,
                    r#"<polyline class="{}" fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                    line.class,
                    line.color,
                    pts.join(" ")
                );
            }
        }
        for m in &self.markers {
            let (px, py) = (sx(m.at.0), sy(m.at.1));
            let _ = writeln!(
                s,
                r#"<circle class="{}" cx="{px:.3}" cy="{py:.3}" r="4" fill="black"/>"#,
                m.class
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.3}" y="{:.3}">{}</text>"#,
                px + 6.0,
                py - 6.0,
                escape(&m.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(v: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    let v = if v.abs() < 0.5 * step { 0.0 } else { v };
    format!("{v:.digits$}")
}

/// Consecutive runs of equal style as separate lines.
fn styled_runs(
    xs: &[f64],
    ys: &[f64],
    style: &[String],
    pick: impl Fn(&str) -> (&'static str, bool),
    class: &'static str,
) -> Vec<Line> {
    let mut out: Vec<Line> = Vec::new();
    let mut prev: Option<&str> = None;
    for i in 0..xs.len() {
        let st = style[i].as_str();
        if prev != Some(st) {
            let (color, dashed) = pick(st);
            let mut points = Vec::new();
            // Overlap by one point so runs join up.
            if i > 0 {
                points.push((xs[i - 1], ys[i - 1]));
            }
            out.push(Line {
                points,
                color,
                dashed,
                class,
            });
            prev = Some(st);
        }
        out.last_mut().expect("pushed").points.push((xs[i], ys[i]));
    }
    out
}

fn stability_style(s: &str) -> (&'static str, bool) {
    match s {
        "stable" | "attracting" => (STABLE_COLOR, false),
        "unstable" | "repelling" => (UNSTABLE_COLOR, true),
        _ => (NEUTRAL_COLOR, false),
    }
}

fn manifold_style(s: &str) -> (&'static str, bool) {
    match s {
        "attracting" => (NEUTRAL_COLOR, false),
        _ => (NEUTRAL_COLOR, true),
    }
}

/// Phase plane: trajectory over the critical manifold, solid where attracting.
pub fn phase_plane(trajectory: &Table, manifold: &Table) -> String {
    let mut fig = Figure {
        title: "phase plane".into(),
        x_label: "p1".into(),
        y_label: "p2".into(),
        ..Default::default()
    };
    let branches = manifold.strings("branch");
    let (p1, p2, st) = (
        manifold.floats("p1"),
        manifold.floats("p2"),
        manifold.strings("stability"),
    );
    for name in ["quartic", "axis"] {
        let idx: Vec<usize> = (0..branches.len())
            .filter(|&i| branches[i] == name)
            .collect();
        let xs: Vec<f64> = idx.iter().map(|&i| p1[i]).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| p2[i]).collect();
        let ss: Vec<String> = idx.iter().map(|&i| st[i].clone()).collect();
        let class = if name == "quartic" { "quartic" } else { "axis" };
        fig.lines
            .extend(styled_runs(&xs, &ys, &ss, manifold_style, class));
    }
    let points = trajectory
        .floats("p1")
        .into_iter()
        .zip(trajectory.floats("p2"))
        .collect();
    fig.lines.push(Line {
        points,
        color: TRAJECTORY_COLOR,
        dashed: false,
        class: "trajectory",
    });
    fig.render()
}

pub fn time_series(trajectory: &Table, column: &str) -> String {
    let mut fig = Figure {
        title: format!("{column} against time"),
        x_label: "t".into(),
        y_label: column.into(),
        ..Default::default()
    };
    let points = trajectory
        .floats("t")
        .into_iter()
        .zip(trajectory.floats(column))
        .collect();
    fig.lines.push(Line {
        points,
        color: TRAJECTORY_COLOR,
        dashed: false,
        class: "series",
    });
    fig.render()
}

/// Equilibria (solid stable, dashed unstable), cycle extrema coloured by
/// stability, and one marker per Hopf point.
pub fn bifurcation(equilibria: &Table, cycles: &[Table], markers: Option<&Table>) -> String {
    let mut fig = Figure {
        title: "bifurcation diagram".into(),
        x_label: "alpha".into(),
        y_label: "p1".into(),
        ..Default::default()
    };
    let alpha = equilibria.floats("alpha");
    fig.lines.extend(styled_runs(
        &alpha,
        &equilibria.floats("p1_max"),
        &equilibria.strings("stability"),
        stability_style,
        "equilibria",
    ));
    for c in cycles {
        let a = c.floats("alpha");
        let st = c.strings("stability");
        let color = |s: &str| (stability_style(s).0, false);
        fig.lines.extend(styled_runs(
            &a,
            &c.floats("p1_max"),
            &st,
            color,
            "cycle_max",
        ));
        fig.lines.extend(styled_runs(
            &a,
            &c.floats("p1_min"),
            &st,
            color,
            "cycle_min",
        ));
    }
    if let Some(m) = markers {
        let (kind, label, a, p1) = (
            m.strings("kind"),
            m.strings("label"),
            m.floats("alpha"),
            m.floats("p1"),
        );
        for i in 0..kind.len() {
            let class = if kind[i] == "hopf" {
                "hopf"
            } else {
                "fold_of_cycles"
            };
            fig.markers.push(Marker {
                at: (a[i], p1[i]),
                label: label[i].clone(),
                class,
            });
        }
    }
    fig.render()
}

/// Render every plot whose inputs are present in `dir`; a plot with only
/// part of its inputs present is an error.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let mut write = |name: &str, svg: String| -> Result<(), CliError> {
        let path = dir.join(name);
        std::fs::write(&path, svg).map_err(io_err(&path))?;
        written.push(path);
        Ok(())
    };
    let traj = dir.join("trajectory.csv");
    if traj.is_file() {
        let t = Table::read(&traj)?;
        let m = Table::read(&dir.join("critical_manifold.csv"))?;
        write("phase_plane.svg", phase_plane(&t, &m))?;
        write("time_series.svg", time_series(&t, "p2"))?;
    }
    let full = dir.join("trajectory_full.csv");
    if full.is_file() {
        write(
            "time_series_full.svg",
            time_series(&Table::read(&full)?, "v"),
        )?;
    }
    let eq = dir.join("equilibrium_branch.csv");
    if eq.is_file() {
        let e = Table::read(&eq)?;
        let markers = Table::read(&dir.join("markers.csv"))?;
        let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io_err(dir))?
            .filter_map(|d| d.ok().map(|d| d.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("cycles_") && n.ends_with(".csv"))
            })
            .collect();
        names.sort();
        let cycles = names
            .iter()
            .map(|p| Table::read(p))
            .collect::<Result<Vec<_>, _>>()?;
        write("bifurcation.svg", bifurcation(&e, &cycles, Some(&markers)))?;
    }
    Ok(written)
}
