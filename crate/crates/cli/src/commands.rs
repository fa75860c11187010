//! Command implementations. Each writes its CSV/JSON artifacts into the
//! output directory; plots and the manifest are added by [`crate::run`].

use std::path::{Path, PathBuf};

use qsf_core::classify::slow_passages;
use qsf_core::continuation::{
    continue_all, default_alpha_range, equilibrium_branch, r1_sweep, topology_changes, Branch,
    BranchPoint, HopfPoint, Origin,
};
use qsf_core::entry_exit::{exit_point_with, simulated_exit, upper_branch_accessible, ExitMethod};
use qsf_core::equilibria::find_equilibria;
use qsf_core::model::full_rest_state;
use qsf_core::simulate::{simulate_core, simulate_full, SimOptions};
use qsf_core::{
    classify_asymptotics, BranchStability, ModelParams, SlowFastState, Timescale, Trajectory,
};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{io_err, CliError};
use crate::table::{num, opt, Table};

/// Output directory and the files written so far, in order.
pub struct Artifacts {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(io_err(&path))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn table(&mut self, name: &str, t: &Table) -> Result<(), CliError> {
        self.write(name, &t.render())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
        s.push('\n');
        self.write(name, &s)
    }
}

/// Lower-case name of a unit-like enum value as it appears in JSON.
fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn trajectory_table(traj: &Trajectory, names: &[&str]) -> Table {
    let mut header = vec!["t"];
    header.extend_from_slice(names);
    let mut t = Table::new(&header);
    for (time, state) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![num(*time)];
        row.extend(state.iter().map(|x| num(*x)));
        t.push(row);
    }
    t
}

fn events_table(traj: &Trajectory) -> Table {
    let mut t = Table::new(&["kind", "t", "p1", "p2"]);
    for e in &traj.events {
        t.push(vec![
            e.kind.as_str().to_string(),
            num(e.time),
            num(e.state[0]),
            num(e.state[1]),
        ]);
    }
    t
}

/// Quartic and axis samples with their stability for the fast flow.
fn manifold_table(params: &ModelParams, traj: &Trajectory) -> Result<Table, CliError> {
    let folds = params.quartic.fold_points()?;
    let top = traj
        .states
        .iter()
        .map(|s| s[1])
        .fold(folds[2].p2 + 0.3, f64::max)
        * 1.05;
    let mut t = Table::new(&["branch", "p1", "p2", "stability"]);
    let n = 600;
    for k in 1..=n {
        let p2 = top * k as f64 / n as f64;
        let st = match params.quartic.fast_branch_stability(p2)? {
            BranchStability::Attracting => "attracting",
            BranchStability::Repelling | BranchStability::Fold => "repelling",
        };
        t.push(vec![
            "quartic".into(),
            num(params.quartic.eval(p2)),
            num(p2),
            st.into(),
        ]);
    }
    let g0 = params.gamma0();
    let (lo, hi) = traj
        .states
        .iter()
        .map(|s| s[0])
        .fold((g0 - 1.0, g0 + 1.0), |(a, b), x| (a.min(x), b.max(x)));
    for k in 0..=n {
        let p1 = lo + (hi - lo) * k as f64 / n as f64;
        let st = if p1 < g0 { "attracting" } else { "repelling" };
        t.push(vec!["axis".into(), num(p1), num(0.0), st.into()]);
    }
    Ok(t)
}

pub fn simulate(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let p = &cfg.model;
    let sim = &cfg.simulate;
    let start = sim
        .initial_state
        .unwrap_or_else(|| SlowFastState::new(-p.b / p.a, p.epsilon));
    let opts = SimOptions {
        timescale: sim.timescale,
        tol: cfg.tol,
        ..SimOptions::default()
    };
    let traj = simulate_core(p, start, (0.0, sim.t_end), &opts)?;
    out.table("trajectory.csv", &trajectory_table(&traj, &["p1", "p2"]))?;
    out.table("events.csv", &events_table(&traj))?;
    out.table("critical_manifold.csv", &manifold_table(p, &traj)?)?;
    let class = classify_asymptotics(p, &traj);
    let passages = slow_passages(p, &traj)?;
    out.json(
        "classification.json",
        &json!({ "classification": class, "slow_passages": passages }),
    )?;

    if sim.full {
        let mut s0 = full_rest_state(p);
        s0.p2 = p.epsilon;
        let s0 = sim.initial_full_state.unwrap_or(s0);
        // The full model runs in slow time.
        let span = match sim.timescale {
            Timescale::Fast => sim.t_end * p.epsilon,
            Timescale::Slow => sim.t_end,
        };
        let full = simulate_full(
            p,
            s0,
            (0.0, span),
            &SimOptions {
                tol: cfg.tol,
                ..SimOptions::default()
            },
        )?;
        out.table(
            "trajectory_full.csv",
            &trajectory_table(&full, &["p1", "p2", "d", "f", "g_syn", "v"]),
        )?;
        out.table("events_full.csv", &events_table(&full))?;
    }
    Ok(())
}

/// Entries spread over the interior of `(-b̃/ã, Γ(0))`.
pub fn entry_grid(params: &ModelParams, n: usize, margin: f64) -> Vec<f64> {
    let lo = -params.b_tilde / params.a_tilde + margin;
    let hi = params.gamma0() - margin;
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

pub fn entry_exit(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let p = &cfg.model;
    let block = &cfg.entry_exit;
    let entries = block
        .p10
        .clone()
        .unwrap_or_else(|| entry_grid(p, block.n, block.margin));
    let delta = block.delta.unwrap_or(p.epsilon);
    let mut t = Table::new(&[
        "p10",
        "p11_closed_form",
        "p11_quadrature",
        "p11_simulation",
        "upper_branch_accessible",
        "status",
    ]);
    for p10 in entries {
        let closed = exit_point_with(p, p10, ExitMethod::ClosedForm, block.p11_max);
        let quad = exit_point_with(p, p10, ExitMethod::Quadrature, block.p11_max);
        let sim = block.simulate.then(|| simulated_exit(p, p10, delta));
        let accessible = upper_branch_accessible(p, p10).ok();
        let mut status = Vec::new();
        for (name, r) in [("closed_form", &closed), ("quadrature", &quad)] {
            if let Err(e) = r {
                status.push(format!("{name}: {e}"));
            }
        }
        if let Some(Err(e)) = &sim {
            status.push(format!("simulation: {e}"));
        }
        t.push(vec![
            num(p10),
            opt(closed.as_ref().ok().map(|r| r.p11)),
            opt(quad.as_ref().ok().map(|r| r.p11)),
            opt(sim.as_ref().and_then(|r| r.as_ref().ok()).map(|r| r.p11)),
            accessible.map(|b| b.to_string()).unwrap_or_default(),
            if status.is_empty() {
                "ok".into()
            } else {
                status.join("; ")
            },
        ]);
    }
    out.table("entry_exit.csv", &t)
}

pub fn folds(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let q = cfg.model.quartic;
    let folds = q.fold_points()?;
    let mut t = Table::new(&["index", "p2", "p1", "kind"]);
    for (k, f) in folds.iter().enumerate() {
        t.push(vec![
            (k + 1).to_string(),
            num(f.p2),
            num(f.p1),
            label(&f.kind),
        ]);
    }
    out.table("folds.csv", &t)?;
    let tc = q.tc_point(cfg.model.a_tilde, cfg.model.b_tilde);
    out.json(
        "quartic.json",
        &json!({ "zeros": q.zeros()?, "folds": folds, "tc": tc }),
    )
}

pub fn equilibria(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let eqs = find_equilibria(&cfg.model)?;
    let mut t = Table::new(&[
        "label",
        "p1",
        "p2",
        "eig1_re",
        "eig1_im",
        "eig2_re",
        "eig2_im",
        "classification",
    ]);
    for e in &eqs {
        let [l1, l2] = e.eigenvalues;
        t.push(vec![
            label(&e.label),
            num(e.location.p1),
            num(e.location.p2),
            num(l1.re),
            num(l1.im),
            num(l2.re),
            num(l2.im),
            label(&e.classification),
        ]);
    }
    out.table("equilibria.csv", &t)
}

fn branch_table(br: &Branch) -> Table {
    let mut t = Table::new(&[
        "alpha",
        "p1_max",
        "p1_min",
        "period",
        "stability",
        "n_segments",
    ]);
    for pt in &br.points {
        t.push(point_row(pt));
    }
    t
}

fn point_row(pt: &BranchPoint) -> Vec<String> {
    vec![
        num(pt.alpha),
        num(pt.p1_max),
        num(pt.p1_min),
        opt(pt.period),
        label(&pt.stability),
        pt.n_segments.to_string(),
    ]
}

fn markers_table(hopf: &[HopfPoint], cycles: &[Branch]) -> Table {
    let mut t = Table::new(&["kind", "label", "alpha", "p1", "p2", "frequency"]);
    for h in hopf {
        t.push(vec![
            "hopf".into(),
            h.name(),
            num(h.alpha),
            num(h.location.p1),
            num(h.location.p2),
            num(h.frequency),
        ]);
    }
    for br in cycles {
        let from = match br.origin {
            Origin::Hopf(k) => format!("H{k}"),
            Origin::Seed => "seed".into(),
        };
        for (k, pt) in br
            .points
            .iter()
            .enumerate()
            .filter(|(_, pt)| pt.fold_of_cycles)
        {
            let name = format!("LPC_{from}_{k}");
            t.push(vec![
                "fold_of_cycles".into(),
                name,
                num(pt.alpha),
                num(pt.p1_max),
                opt(None),
                opt(None),
            ]);
        }
    }
    t
}

pub fn continue_eq(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let p = &cfg.model;
    let range = match cfg.equilibria.alpha_range {
        Some(r) => r,
        None => default_alpha_range(p)?,
    };
    let br = equilibrium_branch(p, range)?;
    out.table("equilibrium_branch.csv", &branch_table(&br))?;
    out.table("markers.csv", &markers_table(&br.hopf, &[]))
}

pub fn continue_lc(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let p = &cfg.model;
    let mut settings = cfg.continuation.settings;
    if settings.alpha_range.is_none() {
        settings.alpha_range = cfg.equilibria.alpha_range;
    }
    let d = continue_all(p, &settings)?;
    out.table("equilibrium_branch.csv", &branch_table(&d.equilibria))?;
    let mut summary = Vec::new();
    for br in &d.cycles {
        let name = match br.origin {
            Origin::Hopf(k) => format!("cycles_H{k}.csv"),
            Origin::Seed => "cycles_seed.csv".into(),
        };
        out.table(&name, &branch_table(br))?;
        summary.push(json!({
            "file": name,
            "origin": br.origin,
            "termination": br.termination.to_string(),
            "points": br.points.len(),
            "t_max": br.t_max,
            "ds_min": br.ds_min,
        }));
    }
    out.table("markers.csv", &markers_table(&d.equilibria.hopf, &d.cycles))?;
    out.json(
        "topology.json",
        &json!({ "report": d.topology, "summary": d.topology.describe(), "branches": summary }),
    )
}

pub fn sweep(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let entries = r1_sweep(
        &cfg.model,
        &cfg.continuation.r1_values,
        &cfg.continuation.settings,
    )?;
    let mut t = Table::new(&["r1", "connected", "toward_small_alpha", "inconclusive"]);
    let join = |v: Vec<String>| v.join(";");
    for e in &entries {
        t.push(vec![
            num(e.r1),
            join(
                e.topology
                    .connected
                    .iter()
                    .map(|c| format!("H{}-H{}", c.0, c.1))
                    .collect(),
            ),
            join(
                e.topology
                    .toward_small_alpha
                    .iter()
                    .map(|h| format!("H{h}"))
                    .collect(),
            ),
            join(
                e.topology
                    .inconclusive
                    .iter()
                    .map(|h| format!("H{h}"))
                    .collect(),
            ),
        ]);
    }
    out.table("sweep.csv", &t)?;
    let changes: Vec<_> = topology_changes(&entries)
        .into_iter()
        .map(|(a, b)| json!({ "from": a, "to": b }))
        .collect();
    out.json(
        "sweep.json",
        &json!({ "entries": entries, "topology_changes": changes }),
    )
}
