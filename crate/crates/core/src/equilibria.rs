//! Equilibria of the planar core, the analytic Jacobian and linear stability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, SlowFastState};

/// Real parts below this magnitude count as zero.
pub const HYPERBOLICITY_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-12;
const LINE_GRID: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumLabel {
    S,
    U,
    #[serde(rename = "U_tilde")]
    UTilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    NonHyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub location: SlowFastState,
    pub label: EquilibriumLabel,
    pub eigenvalues: [Eigenvalue; 2],
    pub classification: Stability,
}

/// Jacobian of the fast-time field with the stimulus switched off.
pub fn jacobian(params: &ModelParams, state: SlowFastState) -> [[f64; 2]; 2] {
    let (gp1, gp2, _) = params.slow_product_grad(state.p1, state.p2);
    let q = &params.quartic;
    let eps = params.epsilon;
    [
        [eps * gp1, eps * gp2],
        [
            state.p2,
            state.p1 - q.eval(state.p2) - state.p2 * q.deriv(state.p2),
        ],
    ]
}

/// Eigenvalues of a real 2×2 matrix, ordered by decreasing real part.
pub fn eigenvalues_2x2(m: [[f64; 2]; 2]) -> [Eigenvalue; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = 0.5 * tr;
    // Discriminant written to avoid cancellation in tr² - 4 det.
    let disc = 0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[1][0];
    if disc >= 0.0 {
        let s = disc.sqrt();
        let big = if half >= 0.0 { half + s } else { half - s };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (hi, lo) = if big >= small {
            (big, small)
        } else {
            (small, big)
        };
        [
            Eigenvalue { re: hi, im: 0.0 },
            Eigenvalue { re: lo, im: 0.0 },
        ]
    } else {
        let w = (-disc).sqrt();
        [
            Eigenvalue { re: half, im: w },
            Eigenvalue { re: half, im: -w },
        ]
    }
}

pub fn stability_from(eigs: &[Eigenvalue]) -> Stability {
    if eigs.iter().any(|e| e.re.abs() < HYPERBOLICITY_TOL) {
        Stability::NonHyperbolic
    } else if eigs.iter().all(|e| e.re < 0.0) {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

pub fn classify_equilibrium(params: &ModelParams, location: SlowFastState) -> Result<Equilibrium> {
    let f =
        crate::model::core_field_with_input(params, location, 0.0, crate::model::Timescale::Fast);
    let residual = f[0].hypot(f[1]);
    let scale = 1.0f64.max(location.p1.abs()).max(location.p2.abs());
    if !(residual <= RESIDUAL_TOL * scale) {
        return Err(Error::NotAnEquilibrium { residual });
    }
    let dist = |q: SlowFastState| (q.p1 - location.p1).hypot(q.p2 - location.p2);
    let candidates = [
        (EquilibriumLabel::S, dist(params.s_point())),
        (EquilibriumLabel::U, dist(params.u_point())),
        (EquilibriumLabel::UTilde, dist(params.u_tilde_point())),
    ];
    let label = candidates
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|c| c.0)
        .unwrap_or(EquilibriumLabel::S);
    let eigenvalues = eigenvalues_2x2(jacobian(params, location));
    Ok(Equilibrium {
        location,
        label,
        eigenvalues,
        classification: stability_from(&eigenvalues),
    })
}

/// The three equilibria `S`, `U`, `Ũ`, after checking that neither oblique
/// line meets the quartic in the half plane `p2 ≥ 0`.
pub fn find_equilibria(params: &ModelParams) -> Result<Vec<Equilibrium>> {
    check_lines_miss_quartic(params)?;
    [params.s_point(), params.u_point(), params.u_tilde_point()]
        .into_iter()
        .map(|x| classify_equilibrium(params, x))
        .collect()
}

fn check_lines_miss_quartic(params: &ModelParams) -> Result<()> {
    let zeros = params.quartic.zeros()?;
    let top = 2.0 * zeros[3] + 1.0;
    for (slope, offset) in [(params.a, params.b), (params.a_tilde, params.b_tilde)] {
        // p1 on the line at height p2 minus p1 on the quartic.
        let gap = |p2: f64| (p2 - offset) / slope - params.quartic.eval(p2);
        let mut x0 = 0.0;
        let mut g0 = gap(x0);
        if g0 == 0.0 {
            return Err(Error::AssumptionViolated {
                slope,
                offset,
                p2: 0.0,
            });
        }
        for i in 1..=LINE_GRID {
            let x1 = top * i as f64 / LINE_GRID as f64;
            let g1 = gap(x1);
            if g1 == 0.0 || g0.signum() != g1.signum() {
                let p2 = if g1 == 0.0 {
                    x1
                } else {
                    crate::roots::illinois(gap, x0, x1, g0, g1, 1e-12)
                };
                return Err(Error::AssumptionViolated { slope, offset, p2 });
            }
            x0 = x1;
            g0 = g1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{core_field, Timescale};
    use crate::scenario::Scenario;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig3() -> ModelParams {
        Scenario::Fig3.params()
    }

    #[test]
    fn fig3_equilibria() {
        let p = fig3();
        let eqs = find_equilibria(&p).unwrap();
        assert_eq!(eqs.len(), 3);
        assert_eq!(eqs[0].label, EquilibriumLabel::S);
        assert_eq!((eqs[0].location.p1, eqs[0].location.p2), (-2.3, 0.0));
        assert_eq!(eqs[0].classification, Stability::Stable);
        assert_eq!(eqs[1].label, EquilibriumLabel::U);
        assert_eq!((eqs[1].location.p1, eqs[1].location.p2), (-2.2, 0.0));
        assert_eq!(eqs[1].classification, Stability::Unstable);
        assert_eq!(eqs[2].label, EquilibriumLabel::UTilde);
        assert_relative_eq!(eqs[2].location.p1, p.quartic.eval(0.22));
        assert_eq!(eqs[2].classification, Stability::Unstable);
    }

    #[test]
    fn u_tilde_entry_and_determinant() {
        let p = fig3();
        let x = p.u_tilde_point();
        let j = jacobian(&p, x);
        assert_eq!(j[0][0], 0.0);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let g = p.quartic.eval(p.alpha);
        let expected = p.epsilon
            * p.alpha
            * (p.alpha - (p.a * g + p.b))
            * (p.alpha - (p.a_tilde * g + p.b_tilde));
        assert!(det > 0.0);
        assert_relative_eq!(det, expected, max_relative = 1e-12);
        let tr = j[0][0] + j[1][1];
        assert_relative_eq!(
            tr,
            -p.alpha * p.quartic.deriv(p.alpha),
            max_relative = 1e-12
        );
    }

    #[test]
    fn u_tilde_between_first_folds_is_stable() {
        let p = fig3().with_alpha(0.6);
        let e = classify_equilibrium(&p, p.u_tilde_point()).unwrap();
        assert_eq!(e.classification, Stability::Stable);
    }

    #[test]
    fn u_tilde_at_fold_is_non_hyperbolic() {
        let p = fig3();
        let folds = p.quartic.fold_points().unwrap();
        for f in folds {
            let q = p.with_alpha(f.p2);
            let e = classify_equilibrium(&q, q.u_tilde_point()).unwrap();
            assert_eq!(e.classification, Stability::NonHyperbolic);
            assert!(e.eigenvalues[0].im > 0.0);
        }
    }

    #[test]
    fn non_equilibrium_rejected() {
        let p = fig3();
        assert!(matches!(
            classify_equilibrium(&p, SlowFastState::new(0.0, 0.5)),
            Err(Error::NotAnEquilibrium { .. })
        ));
    }

    #[test]
    fn crossing_line_rejected() {
        let mut p = fig3();
        // p2 = -p1 - 0.5 meets the lower quartic branch.
        p.b_tilde = 0.5;
        p.b = 0.6;
        let r = find_equilibria(&p);
        assert!(matches!(r, Err(Error::AssumptionViolated { .. })), "{r:?}");
    }

    #[test]
    fn eigen_2x2_cases() {
        let e = eigenvalues_2x2([[0.0, 1.0], [-4.0, 0.0]]);
        assert_relative_eq!(e[0].im, 2.0);
        assert_eq!(e[0].re, 0.0);
        let e = eigenvalues_2x2([[3.0, 0.0], [0.0, -1.0]]);
        assert_eq!((e[0].re, e[1].re), (3.0, -1.0));
        let e = eigenvalues_2x2([[-1e-8, 1.0], [0.0, -5.0]]);
        assert_relative_eq!(e[0].re, -1e-8, max_relative = 1e-12);
    }

    fn fd_jacobian(p: &ModelParams, x: SlowFastState) -> [[f64; 2]; 2] {
        let mut j = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-6 * (1.0 + if k == 0 { x.p1.abs() } else { x.p2.abs() });
            let mut xp = x;
            let mut xm = x;
            if k == 0 {
                xp.p1 += h;
                xm.p1 -= h;
            } else {
                xp.p2 += h;
                xm.p2 -= h;
            }
            let fp = core_field(p, xp, 1.0, Timescale::Fast);
            let fm = core_field(p, xm, 1.0, Timescale::Fast);
            for i in 0..2 {
                j[i][k] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        j
    }

    proptest! {
        #[test]
        fn jacobian_matches_differences(p1 in -3.0f64..3.0, p2 in 0.0f64..2.5) {
            let p = fig3();
            let x = SlowFastState::new(p1, p2);
            let ja = jacobian(&p, x);
            let jf = fd_jacobian(&p, x);
            let scale = ja.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..2 {
                for k in 0..2 {
                    prop_assert!((ja[i][k] - jf[i][k]).abs() <= 1e-6 * scale.max(1e-3),
                        "entry {i}{k}: {} vs {}", ja[i][k], jf[i][k]);
                }
            }
        }

        #[test]
        fn stability_flips_at_folds(alpha in 0.01f64..2.5) {
            let p = fig3().with_alpha(alpha);
            let e = classify_equilibrium(&p, p.u_tilde_point()).unwrap();
            let tr = -alpha * p.quartic.deriv(alpha);
            let want = if tr.abs() < HYPERBOLICITY_TOL { Stability::NonHyperbolic }
                else if tr < 0.0 { Stability::Stable } else { Stability::Unstable };
            prop_assert_eq!(e.classification, want);
            let prod = e.eigenvalues[0].re * e.eigenvalues[1].re - e.eigenvalues[0].im * e.eigenvalues[1].im;
            let g = p.quartic.eval(alpha);
            let det = p.epsilon * alpha * (alpha - (p.a * g + p.b)) * (alpha - (p.a_tilde * g + p.b_tilde));
            prop_assert!((prod - det).abs() <= 1e-10 * det.abs());
            prop_assert!(e.eigenvalues[0].re.signum() == e.eigenvalues[1].re.signum());
        }
    }
}
