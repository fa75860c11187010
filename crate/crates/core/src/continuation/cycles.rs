//! Limit-cycle branches: seeding from a Hopf point and pseudo-arclength
//! continuation of the periodic boundary-value problem.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::shooting::{self, correct, floquet, Corrected, LinearRow, NewtonOptions, PeriodicOrbit};
use super::{
    default_alpha_range, hopf_points, Branch, BranchKind, BranchPoint, HopfPoint, Origin,
    Termination,
};
use crate::equilibria::{jacobian, Eigenvalue, Stability};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Stimulus};

/// Radius of the linear seed in `(p1, p2)`.
pub const SEED_RADIUS: f64 = 1e-3;
/// Endpoint matching: `|Δα|` bound.
pub const CONNECT_ALPHA_TOL: f64 = 1e-3;
/// Endpoint matching: relative `(p1_max, p1_min)` bound.
pub const CONNECT_SUMMARY_TOL: f64 = 1e-2;
const SEED_RESIDUAL_TOL: f64 = 1e-10;
const SEED_SEGMENTS: usize = 32;
/// Cosine between consecutive tangents below which a step is retried.
const MIN_TANGENT_COS: f64 = 0.9;
const REMESH_RATIO: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaDirection {
    Decreasing,
    Increasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSettings {
    /// Periods above this end the branch (fast-time units).
    pub t_max: f64,
    pub ds_init: f64,
    /// Arclength floor.
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_points: usize,
    /// Defaults to the fold range of the quartic.
    pub alpha_range: Option<(f64, f64)>,
    /// Integrator tolerance on each shooting segment.
    pub tol: f64,
    pub residual_tol: f64,
    pub min_segments: usize,
    pub max_segments: usize,
    /// Target duration of one shooting segment.
    pub segment_time: f64,
    pub max_newton: usize,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            t_max: 1e4,
            ds_init: 1e-3,
            ds_min: 1e-8,
            ds_max: 0.1,
            max_points: 3000,
            alpha_range: None,
            tol: 1e-10,
            residual_tol: 1e-9,
            min_segments: 32,
            max_segments: 256,
            segment_time: 2.0,
            max_newton: 10,
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_max > 0.0
            && self.ds_min > 0.0
            && self.ds_init >= self.ds_min
            && self.ds_max >= self.ds_init
            && self.tol > 0.0
            && self.residual_tol > 0.0
            && self.min_segments >= 2
            && self.max_segments >= self.min_segments
            && self.segment_time > 0.0
            && self.max_newton > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "inconsistent continuation settings {self:?}"
            )))
        }
    }

    fn segments_for(&self, period: f64) -> usize {
        ((period / self.segment_time).ceil() as usize).clamp(self.min_segments, self.max_segments)
    }
}

/// Corrected small cycle next to a Hopf point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSeed {
    pub orbit: PeriodicOrbit,
    pub hopf: Option<HopfPoint>,
    /// `2π / frequency` of the linearization.
    pub linear_period: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn autonomous(params: &ModelParams) -> ModelParams {
    ModelParams {
        stimulus: Stimulus::none(),
        ..*params
    }
}

/// Row fixing the projection of `x_0 - center` onto the seed displacement.
fn amplitude_row(orbit: &PeriodicOrbit, center: [f64; 2]) -> LinearRow {
    let n = 2 * orbit.segments() + 2;
    let d = [orbit.nodes[0][0] - center[0], orbit.nodes[0][1] - center[1]];
    let nd = d[0] * d[0] + d[1] * d[1];
    let mut row = DVector::zeros(n);
    row[0] = d[0] / nd;
    row[1] = d[1] / nd;
    let rhs = row.dot(&orbit.pack());
    LinearRow { row, rhs }
}

fn hopf_center(hopf: &HopfPoint) -> [f64; 2] {
    [hopf.location.p1, hopf.location.p2.ln()]
}

/// Cycle of radius [`SEED_RADIUS`] built from the critical eigenvector and
/// corrected with `α` and the period free.
pub fn lc_seed_near_hopf(params: &ModelParams, hopf: &HopfPoint) -> Result<CycleSeed> {
    params.validate()?;
    let p = autonomous(params).with_alpha(hopf.alpha);
    if !(hopf.frequency > 0.0 && hopf.location.p2 > 0.0) {
        return Err(Error::SeedCorrectionFailed(format!(
            "{} has no oscillatory linearization",
            hopf.name()
        )));
    }
    let j = jacobian(&p, hopf.location);
    let w = hopf.frequency;
    // Eigenvector (v0, v1) for iω from the first row, or the second if degenerate.
    let (v0, v1) = if j[0][1].abs() >= j[1][0].abs() {
        ((j[0][1], 0.0), (-j[0][0], w))
    } else {
        ((-j[1][1], w), (j[1][0], 0.0))
    };
    let norm = (v0.0 * v0.0 + v0.1 * v0.1 + v1.0 * v1.0 + v1.1 * v1.1).sqrt();
    let period = 2.0 * std::f64::consts::PI / w;
    let m = SEED_SEGMENTS;
    let nodes = (0..m)
        .map(|i| {
            let th = w * period * i as f64 / m as f64;
            let (c, s) = (th.cos(), th.sin());
            let dp1 = SEED_RADIUS * (v0.0 * c - v0.1 * s) / norm;
            let dp2 = SEED_RADIUS * (v1.0 * c - v1.1 * s) / norm;
            [hopf.location.p1 + dp1, (hopf.location.p2 + dp2).ln()]
        })
        .collect();
    let guess = PeriodicOrbit {
        alpha: hopf.alpha,
        period,
        nodes,
    };
    let phase = LinearRow::phase(&p, &guess);
    let amp = amplitude_row(&guess, hopf_center(hopf));
    let opts = NewtonOptions {
        tol: 1e-11,
        residual_tol: SEED_RESIDUAL_TOL,
        max_iter: 30,
    };
    let mut hints = Vec::new();
    let c = correct(&p, guess, [&phase, &amp], &opts, &mut hints)?;
    Ok(CycleSeed {
        residual: c.eval.residual,
        iterations: c.iterations,
        orbit: c.orbit,
        hopf: Some(*hopf),
        linear_period: period,
    })
}

/// Diagonal weights of the arclength inner product: node values averaged
/// over the mesh, `ln p2` and `T` relative to their size, `α` absolute.
fn weights(orbit: &PeriodicOrbit) -> DVector<f64> {
    let m = orbit.segments();
    let rms_u = (orbit.nodes.iter().map(|x| x[1] * x[1]).sum::<f64>() / m as f64)
        .sqrt()
        .max(1.0);
    let mut w = DVector::zeros(2 * m + 2);
    for i in 0..m {
        w[2 * i] = 1.0 / m as f64;
        w[2 * i + 1] = 1.0 / (m as f64 * rms_u * rms_u);
    }
    w[2 * m] = 1.0 / orbit.period.max(1.0).powi(2);
    w[2 * m + 1] = 1.0;
    w
}

fn wnorm(w: &DVector<f64>, t: &DVector<f64>) -> f64 {
    t.iter()
        .zip(w.iter())
        .map(|(x, wi)| wi * x * x)
        .sum::<f64>()
        .sqrt()
}

/// Unit tangent solving `J t = 0, c·t = 1`.
fn tangent(
    c: &Corrected,
    phase: &LinearRow,
    dir: &DVector<f64>,
    w: &DVector<f64>,
) -> Option<DVector<f64>> {
    let last = LinearRow {
        row: dir.clone(),
        rhs: 0.0,
    };
    let j = shooting::newton_matrix(&c.orbit, &c.eval, &[phase, &last]);
    let mut e = DVector::zeros(j.nrows());
    e[j.nrows() - 1] = 1.0;
    let t = j.lu().solve(&e)?;
    let n = wnorm(w, &t);
    (n.is_finite() && n > 0.0).then(|| t / n)
}

fn stability_of(nontrivial: f64) -> Stability {
    let r = nontrivial.abs();
    if (r - 1.0).abs() < 1e-9 {
        Stability::NonHyperbolic
    } else if r < 1.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

fn cycle_point(params: &ModelParams, c: &Corrected, prev: Option<&BranchPoint>) -> BranchPoint {
    let (trivial, nontrivial) = floquet(params, &c.orbit, &c.eval);
    let stability = stability_of(nontrivial);
    BranchPoint {
        alpha: c.orbit.alpha,
        p1_max: c.eval.p1_max,
        p1_min: c.eval.p1_min,
        p2_max: c.eval.p2_max,
        period: Some(c.orbit.period),
        stability,
        floquet: vec![
            Eigenvalue {
                re: trivial,
                im: 0.0,
            },
            Eigenvalue {
                re: nontrivial,
                im: 0.0,
            },
        ],
        residual: c.eval.residual,
        n_segments: c.orbit.segments(),
        fold_of_cycles: prev.is_some_and(|q| q.stability != stability && q.period.is_some()),
    }
}

pub(crate) fn near_hopf(pt: &BranchPoint, h: &HopfPoint) -> bool {
    let scale = h.location.p1.abs().max(1.0);
    (pt.alpha - h.alpha).abs() < CONNECT_ALPHA_TOL
        && (pt.p1_max - h.location.p1).abs() < CONNECT_SUMMARY_TOL * scale
        && (pt.p1_min - h.location.p1).abs() < CONNECT_SUMMARY_TOL * scale
}

/// Pseudo-arclength continuation of a cycle branch. Branches born at a Hopf
/// point start in the direction of growing amplitude; `alpha_direction`
/// orients branches started from other seeds.
pub fn lc_continue(
    params: &ModelParams,
    seed: &CycleSeed,
    alpha_direction: Option<AlphaDirection>,
    settings: &ContinuationSettings,
) -> Result<Branch> {
    params.validate()?;
    settings.validate()?;
    let p = autonomous(params);
    let range = match settings.alpha_range {
        Some(r) => r,
        None => default_alpha_range(&p)?,
    };
    let hopf = hopf_points(&p, range)?;
    let newton = NewtonOptions {
        tol: settings.tol,
        residual_tol: settings.residual_tol,
        max_iter: settings.max_newton,
    };
    let mut hints = Vec::new();

    // Re-correct the seed under the branch settings.
    let m0 = settings.segments_for(seed.orbit.period);
    let start = if m0 == seed.orbit.segments() {
        seed.orbit.clone()
    } else {
        seed.orbit.remeshed(&p, m0, settings.tol)?
    };
    let center = match &seed.hopf {
        Some(h) => hopf_center(h),
        None => {
            let u: f64 = start.nodes.iter().map(|x| x[1]).sum::<f64>() / start.segments() as f64;
            let p1: f64 = start.nodes.iter().map(|x| x[0]).sum::<f64>() / start.segments() as f64;
            [p1, u]
        }
    };
    let phase0 = LinearRow::phase(&p, &start);
    let amp = amplitude_row(&start, center);
    let mut cur = correct(&p, start, [&phase0, &amp], &newton, &mut hints).map_err(|_| {
        Error::CorrectorDiverged {
            alpha: seed.orbit.alpha,
            step: 0.0,
        }
    })?;

    let mut w = weights(&cur.orbit);
    let mut tan = tangent(&cur, &phase0, &amp.row, &w).ok_or(Error::CorrectorDiverged {
        alpha: cur.orbit.alpha,
        step: 0.0,
    })?;
    let m = cur.orbit.segments();
    if seed.hopf.is_none() {
        if let Some(dir) = alpha_direction {
            let want = if dir == AlphaDirection::Increasing {
                1.0
            } else {
                -1.0
            };
            if tan[2 * m + 1] * want < 0.0 {
                tan = -tan;
            }
        }
    }

    let origin = seed.hopf.map_or(Origin::Seed, |h| Origin::Hopf(h.label));
    let mut points = vec![cycle_point(&p, &cur, None)];
    let mut orbits = vec![cur.orbit.clone()];
    let mut max_amp = points[0].amplitude();
    let mut ds = settings.ds_init;
    let termination = loop {
        if points.len() >= settings.max_points {
            break Termination::PointLimit;
        }
        let z = cur.orbit.pack();
        let pred = PeriodicOrbit::unpack(&(&z + &tan * ds));
        let phase = LinearRow::phase(&p, &cur.orbit);
        let dir = tan.component_mul(&w);
        let arc = LinearRow {
            rhs: dir.dot(&z) + ds,
            row: dir.clone(),
        };
        let step = correct(&p, pred, [&phase, &arc], &newton, &mut hints)
            .ok()
            .and_then(|c| tangent(&c, &phase, &dir, &w).map(|t| (c, t)))
            .filter(|(_, t)| dir.dot(t) >= MIN_TANGENT_COS);
        let Some((next, t_next)) = step else {
            ds *= 0.5;
            if ds < settings.ds_min {
                break Termination::StepUnderflow;
            }
            continue;
        };
        let iters = next.iterations;
        let pt = cycle_point(&p, &next, points.last());
        max_amp = max_amp.max(pt.amplitude());
        points.push(pt);
        orbits.push(next.orbit.clone());
        cur = next;
        tan = t_next;
        ds = if iters <= 3 {
            (ds * 1.5).min(settings.ds_max)
        } else if iters >= 6 {
            ds * 0.7
        } else {
            ds
        };

        let last = points.last().expect("non-empty");
        if cur.orbit.period > settings.t_max {
            break Termination::PeriodOverflow;
        }
        if last.alpha < range.0 || last.alpha > range.1 {
            break Termination::DomainEdge;
        }
        if let Some(h) = hopf.iter().find(|h| near_hopf(last, h)) {
            let scale = h.location.p1.abs().max(1.0);
            if max_amp > 4.0 * CONNECT_SUMMARY_TOL * scale {
                break match origin {
                    Origin::Hopf(k) if k == h.label => Termination::FoldTurnaround,
                    _ => Termination::ConnectsTo(h.label),
                };
            }
        }

        let m_old = cur.orbit.segments();
        let m_new = settings.segments_for(cur.orbit.period);
        let ratio = m_new as f64 / m_old as f64;
        w = weights(&cur.orbit);
        if !(1.0 / REMESH_RATIO..=REMESH_RATIO).contains(&ratio) {
            let old_tan = tan.clone();
            let orbit = cur.orbit.remeshed(&p, m_new, settings.tol)?;
            let phase = LinearRow::phase(&p, &orbit);
            let pin = LinearRow {
                row: DVector::zeros(2 * m_new + 2),
                rhs: 0.0,
            };
            let mut pin = pin;
            // Pin the period to keep the remeshed orbit in place.
            pin.row[2 * m_new] = 1.0;
            pin.rhs = orbit.period;
            cur = correct(&p, orbit, [&phase, &pin], &newton, &mut hints).map_err(|_| {
                Error::CorrectorDiverged {
                    alpha: cur.orbit.alpha,
                    step: ds,
                }
            })?;
            w = weights(&cur.orbit);
            let mut c = DVector::zeros(2 * m_new + 2);
            c[0] = old_tan[0] * w[0];
            c[1] = old_tan[1] * w[1];
            c[2 * m_new] = old_tan[2 * m_old] * w[2 * m_new];
            c[2 * m_new + 1] = old_tan[2 * m_old + 1] * w[2 * m_new + 1];
            tan = tangent(&cur, &phase, &c, &w).ok_or(Error::CorrectorDiverged {
                alpha: cur.orbit.alpha,
                step: ds,
            })?;
        } else {
            let n = wnorm(&w, &tan);
            tan /= n;
        }
    };

    Ok(Branch {
        kind: BranchKind::LimitCycle,
        origin,
        termination,
        points,
        hopf,
        orbits,
        t_max: settings.t_max,
        ds_min: settings.ds_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{solve, Control, Piece, Sensitivity, SolverOptions};
    use crate::scenario::Scenario;

    fn hopf_of(sc: Scenario) -> (ModelParams, Vec<HopfPoint>) {
        let p = sc.params();
        let h = hopf_points(&p, default_alpha_range(&p).unwrap()).unwrap();
        (p, h)
    }

    #[test]
    fn seeds_match_linearization() {
        for sc in [Scenario::Fig3, Scenario::Fig6] {
            let (p, hopf) = hopf_of(sc);
            for h in &hopf {
                let s = lc_seed_near_hopf(&p, h).unwrap();
                assert!(
                    (s.orbit.period - s.linear_period).abs() < 0.2 * s.linear_period,
                    "{}",
                    h.name()
                );
                assert!(
                    s.residual <= 1e-10,
                    "{} residual {:e}",
                    h.name(),
                    s.residual
                );
                let p2: Vec<f64> = s.orbit.nodes.iter().map(|x| x[1].exp()).collect();
                let spread = p2.iter().cloned().fold(f64::MIN, f64::max)
                    - p2.iter().cloned().fold(f64::MAX, f64::min);
                assert!(
                    spread < 1e-2 && spread > 0.0,
                    "{} p2 spread {spread}",
                    h.name()
                );
                assert!((s.orbit.alpha - h.alpha).abs() < CONNECT_ALPHA_TOL);

                let mut hints = Vec::new();
                let ev = shooting::evaluate(&p, &s.orbit, 1e-11, &mut hints).unwrap();
                let (trivial, _) = floquet(&p, &s.orbit, &ev);
                assert!(
                    (trivial - 1.0).abs() < 1e-4,
                    "{} trivial {trivial}",
                    h.name()
                );
            }
        }
    }

    /// Growth of a normal perturbation of node 0 over `k` periods, per period.
    fn simulated_multiplier(p: &ModelParams, orbit: &PeriodicOrbit, k: usize) -> f64 {
        let sys = shooting::system(p, orbit.alpha);
        let x0 = orbit.nodes[0];
        let f = shooting::field(&sys, x0);
        let n = [-f[1] / f.norm(), f[0] / f.norm()];
        let delta = 1e-6;
        let y0 = [x0[0] + delta * n[0], x0[1] + delta * n[1]];
        let mut y = y0.to_vec();
        let opts = SolverOptions::with_tol(1e-12);
        let mut growth = 1.0;
        for _ in 0..k {
            let o = solve(
                &sys,
                &[Piece::autonomous(0.0, orbit.period)],
                &y,
                &opts,
                Sensitivity::None,
                &mut |_| Control::Continue,
            )
            .unwrap();
            let e = [o.y[0] - x0[0], o.y[1] - x0[1]];
            let normal = e[0] * n[0] + e[1] * n[1];
            growth *= normal / delta;
            // Restart from a fresh small perturbation to stay linear.
            y = y0.to_vec();
            y[0] = x0[0] + delta * n[0] * normal.signum();
            y[1] = x0[1] + delta * n[1] * normal.signum();
        }
        growth.abs().powf(1.0 / k as f64)
    }

    #[test]
    fn fig6_h1_branch_reaches_h2_and_floquet_matches_simulation() {
        let (p, hopf) = hopf_of(Scenario::Fig6);
        let seed = lc_seed_near_hopf(&p, &hopf[0]).unwrap();
        let br = lc_continue(&p, &seed, None, &ContinuationSettings::default()).unwrap();
        assert_eq!(br.termination, Termination::ConnectsTo(2));
        assert_eq!(br.points.len(), br.orbits.len());
        for pt in &br.points {
            assert!(pt.residual <= 1e-8 && pt.period.unwrap() > 0.0 && pt.p1_max >= pt.p1_min);
            assert!((pt.floquet[0].re - 1.0).abs() < 1e-4);
            assert_eq!(pt.stability, stability_of(pt.floquet[1].re));
        }
        // Amplitude vanishes at both Hopf ends.
        let (first, last) = (&br.points[0], br.points.last().unwrap());
        assert!(
            first.amplitude() < 0.05 && (first.alpha - hopf[0].alpha).abs() < CONNECT_ALPHA_TOL
        );
        assert!(last.amplitude() < 0.05 && (last.alpha - hopf[1].alpha).abs() < CONNECT_ALPHA_TOL);
        assert!(br.points.iter().any(|q| q.amplitude() > 0.5));

        // Both stabilities occur; a fold of cycles separates them.
        let moderate: Vec<usize> = (0..br.points.len())
            .filter(|&i| {
                let m = br.points[i].floquet[1].re.abs();
                (1e-3..1e3).contains(&m) && (m - 1.0).abs() > 1e-5
            })
            .collect();
        let by_mu = |i: &usize| br.points[*i].floquet[1].re.abs();
        let lo = *moderate
            .iter()
            .min_by(|a, b| by_mu(a).total_cmp(&by_mu(b)))
            .unwrap();
        let hi = *moderate
            .iter()
            .max_by(|a, b| by_mu(a).total_cmp(&by_mu(b)))
            .unwrap();
        let mid = moderate[moderate.len() / 2];
        assert!(
            br.points[hi].stability == Stability::Unstable
                && br.points[lo].stability == Stability::Stable
        );
        assert!(br.points.iter().any(|q| q.fold_of_cycles));
        for i in [lo, mid, hi] {
            let mu = by_mu(&i);
            let k = ((10f64.ln() / mu.ln().abs()).ceil() as usize).clamp(1, 400);
            let sim = simulated_multiplier(&p, &br.orbits[i], k);
            assert_eq!(
                sim < 1.0,
                mu < 1.0,
                "point {i}: floquet {mu}, simulated {sim}"
            );
            assert!(
                (sim.ln() - mu.ln()).abs() < 0.1 * mu.ln().abs() + 1e-5,
                "point {i}: {mu} vs {sim}"
            );
        }
    }

    #[test]
    fn settings_are_checked() {
        let mut s = ContinuationSettings::default();
        assert!(s.validate().is_ok());
        s.ds_min = 1.0;
        assert!(s.validate().is_err());
        let s = ContinuationSettings {
            min_segments: 64,
            max_segments: 32,
            ..Default::default()
        };
        assert!(s.validate().is_err());
        let s = ContinuationSettings::default();
        assert_eq!(s.segments_for(1.0), 32);
        assert_eq!(s.segments_for(100.0), 50);
        assert_eq!(s.segments_for(1e5), s.max_segments);
    }
}
