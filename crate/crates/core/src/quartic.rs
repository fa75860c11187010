//! The quartic fast nullcline `p1 = Γ(p2) = Q·∏(c_i·p2 + r_i)` and its geometry.
//!
//! The quartic has four distinct non-negative zeros and, between consecutive zeros,
//! exactly one critical point. With a positive leading coefficient these are a local
//! minimum, a local maximum and a local minimum (in increasing `p2`). The critical
//! points are the folds of the critical manifold; the branch between two folds is
//! attracting for the layer equation where `Γ' > 0` and repelling where `Γ' < 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::newton_bisect;

/// Relative tolerance for distinct zeros.
const ZERO_SEPARATION: f64 = 1e-12;
/// Relative residual accepted for a fold, in units of the largest cubic coefficient of `Γ'`.
pub const FOLD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticSpec {
    #[serde(rename = "Q")]
    pub q: f64,
    pub c: [f64; 4],
    pub r: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldKind {
    LocalMin,
    LocalMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldPoint {
    pub p2: f64,
    pub p1: f64,
    pub kind: FoldKind,
}

/// Transcritical point `(Γ(0), 0)` of the layer equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcPoint {
    pub p1: f64,
    pub p2: f64,
    /// `Γ(0) ≥ -b̃/ã`: the unstable axis equilibrium lies left of the transcritical point.
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchStability {
    Attracting,
    Repelling,
    Fold,
}

impl QuarticSpec {
    /// Builds and validates a quartic.
    pub fn new(q: f64, c: [f64; 4], r: [f64; 4]) -> Result<Self> {
        let spec = Self { q, c, r };
        spec.validate()?;
        Ok(spec)
    }

    /// The family used throughout: `Q = 0.05`, `c_i = -3`, `r = (r1, 4, 2, 0)`.
    pub fn standard(r1: f64) -> Result<Self> {
        Self::new(0.05, [-3.0; 4], [r1, 4.0, 2.0, 0.0])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0) || !self.q.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Q must be positive, got {}",
                self.q
            )));
        }
        if let Some(i) = self.c.iter().position(|&c| c == 0.0 || !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "c[{i}] = {} (every linear coefficient must be non-zero)",
                self.c[i]
            )));
        }
        if self.r.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidParameter("non-finite offset r".into()));
        }
        if self.leading_coefficient() <= 0.0 {
            return Err(Error::InvalidParameter(
                "leading coefficient Q·∏c_i must be positive (minimum, maximum, minimum fold pattern)"
                    .into(),
            ));
        }
        self.zeros().map(|_| ())
    }

    pub fn leading_coefficient(&self) -> f64 {
        self.q * self.c.iter().product::<f64>()
    }

    /// `Γ(p2)` in factored form.
    pub fn eval(&self, p2: f64) -> f64 {
        self.q
            * self
                .c
                .iter()
                .zip(&self.r)
                .map(|(c, r)| c * p2 + r)
                .product::<f64>()
    }

    /// `Γ'(p2)` by the product rule over the four factors.
    pub fn deriv(&self, p2: f64) -> f64 {
        let f = self.factors(p2);
        let mut sum = 0.0;
        for i in 0..4 {
            let mut term = self.c[i];
            for (j, fj) in f.iter().enumerate() {
                if j != i {
                    term *= fj;
                }
            }
            sum += term;
        }
        self.q * sum
    }

    /// `Γ''(p2)`.
    pub fn second_deriv(&self, p2: f64) -> f64 {
        let f = self.factors(p2);
        let mut sum = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                let mut term = self.c[i] * self.c[j];
                for (k, fk) in f.iter().enumerate() {
                    if k != i && k != j {
                        term *= fk;
                    }
                }
                sum += term;
            }
        }
        2.0 * self.q * sum
    }

    fn factors(&self, p2: f64) -> [f64; 4] {
        std::array::from_fn(|i| self.c[i] * p2 + self.r[i])
    }

    /// Monomial coefficients of `Γ`, constant term first.
    pub fn coefficients(&self) -> [f64; 5] {
        let mut poly = [0.0; 5];
        poly[0] = self.q;
        for (deg, (c, r)) in self.c.iter().zip(&self.r).enumerate() {
            for k in (0..=deg + 1).rev() {
                let shifted = if k > 0 { poly[k - 1] * c } else { 0.0 };
                poly[k] = poly[k] * r + shifted;
            }
        }
        poly
    }

    /// Largest magnitude among the cubic coefficients of `Γ'`.
    pub fn deriv_scale(&self) -> f64 {
        let p = self.coefficients();
        (1..5).map(|k| (k as f64 * p[k]).abs()).fold(0.0, f64::max)
    }

    /// The four zeros `-r_i/c_i`, ascending.
    pub fn zeros(&self) -> Result<[f64; 4]> {
        let mut z: [f64; 4] = std::array::from_fn(|i| -self.r[i] / self.c[i]);
        z.sort_by(f64::total_cmp);
        for w in z.windows(2) {
            if (w[1] - w[0]).abs() <= ZERO_SEPARATION * w[1].abs().max(1.0) {
                return Err(Error::DuplicateZero(w[0], w[1]));
            }
        }
        if z[0] < 0.0 {
            return Err(Error::NonNegativityViolation(z[0]));
        }
        Ok(z)
    }

    /// The three folds, one between each pair of consecutive zeros.
    pub fn fold_points(&self) -> Result<[FoldPoint; 3]> {
        let z = self.zeros()?;
        let ftol = FOLD_TOL * self.deriv_scale();
        let mut out = [FoldPoint {
            p2: 0.0,
            p1: 0.0,
            kind: FoldKind::LocalMin,
        }; 3];
        for k in 0..3 {
            let (lo, hi) = (z[k], z[k + 1]);
            let root = newton_bisect(
                |x| (self.deriv(x), self.second_deriv(x)),
                lo,
                hi,
                f64::EPSILON * hi.abs().max(1.0),
                ftol,
            )
            .ok_or(Error::FoldNotFound { lo, hi })?;
            let curvature = self.second_deriv(root);
            let kind = if curvature > 0.0 {
                FoldKind::LocalMin
            } else if curvature < 0.0 {
                FoldKind::LocalMax
            } else {
                return Err(Error::FoldNotFound { lo, hi });
            };
            out[k] = FoldPoint {
                p2: root,
                p1: self.eval(root),
                kind,
            };
        }
        Ok(out)
    }

    /// Transcritical point and the validity of `Γ(0) ≥ -b̃/ã`.
    pub fn tc_point(&self, a_tilde: f64, b_tilde: f64) -> TcPoint {
        let p1 = self.eval(0.0);
        TcPoint {
            p1,
            p2: 0.0,
            valid: p1 >= -b_tilde / a_tilde,
        }
    }

    /// Stability of the quartic branch at `p2 > 0` for the layer equation,
    /// from the sign of the linearization `-p2·Γ'(p2)`.
    pub fn fast_branch_stability(&self, p2: f64) -> Result<BranchStability> {
        if !(p2 > 0.0) {
            return Err(Error::Precondition(format!(
                "branch stability needs p2 > 0, got {p2}"
            )));
        }
        let slope = self.deriv(p2);
        if slope.abs() <= 1e-9 * self.deriv_scale() {
            return Ok(BranchStability::Fold);
        }
        Ok(if -p2 * slope < 0.0 {
            BranchStability::Attracting
        } else {
            BranchStability::Repelling
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn upper() -> QuarticSpec {
        QuarticSpec::standard(6.4).unwrap()
    }

    #[test]
    fn eval_at_factor_zeros() {
        let q = upper();
        assert_eq!(q.eval(0.0), 0.0);
        assert!(q.eval(2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn eval_matches_direct_product_at_local_max() {
        let q = upper();
        let x = 1.00595;
        let direct = 0.05 * (-3.0 * x + 6.4) * (-3.0 * x + 4.0) * (-3.0 * x + 2.0) * (-3.0 * x);
        assert_relative_eq!(q.eval(x), direct, max_relative = 1e-14);
        assert!((q.eval(x) - 0.5102).abs() < 1e-3);
    }

    #[test]
    fn deriv_at_origin() {
        // Only the term differentiating the vanishing factor survives: Q·c4·r1·r2·r3.
        assert_relative_eq!(upper().deriv(0.0), -7.68, max_relative = 1e-14);
    }

    #[test]
    fn coefficients_reproduce_eval() {
        let q = upper();
        let p = q.coefficients();
        for &x in &[0.0, 0.3, 1.1, 2.5] {
            let horner = p.iter().rev().fold(0.0, |acc, c| acc * x + c);
            assert_relative_eq!(horner, q.eval(x), epsilon = 1e-12);
        }
        assert_relative_eq!(p[4], q.leading_coefficient(), max_relative = 1e-14);
    }

    #[test]
    fn zeros_sorted() {
        let z = upper().zeros().unwrap();
        let expect = [0.0, 2.0 / 3.0, 4.0 / 3.0, 32.0 / 15.0];
        for (a, b) in z.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        let z5 = QuarticSpec::standard(5.0).unwrap().zeros().unwrap();
        assert_relative_eq!(z5[3], 5.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn duplicate_zero_rejected() {
        let err = QuarticSpec::new(0.05, [-3.0; 4], [4.0, 4.0, 2.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::DuplicateZero(..)));
    }

    #[test]
    fn negative_zero_rejected() {
        let err = QuarticSpec::new(0.05, [-3.0; 4], [6.4, 4.0, 2.0, -1.0]).unwrap_err();
        assert!(matches!(err, Error::NonNegativityViolation(_)));
    }

    #[test]
    fn vanishing_coefficient_rejected() {
        assert!(QuarticSpec::new(0.05, [-3.0, 0.0, -3.0, -3.0], [6.4, 4.0, 2.0, 0.0]).is_err());
        assert!(QuarticSpec::new(0.05, [0.0, 0.0, -3.0, -3.0], [6.4, 4.0, 2.0, 0.0]).is_err());
        assert!(QuarticSpec::new(-0.05, [-3.0; 4], [6.4, 4.0, 2.0, 0.0]).is_err());
    }

    #[test]
    fn folds_of_both_configurations() {
        let f = upper().fold_points().unwrap();
        for (fp, want) in f.iter().zip([0.2565, 1.00595, 1.8376]) {
            assert!((fp.p2 - want).abs() < 5e-4, "{} vs {}", fp.p2, want);
        }
        let f = QuarticSpec::standard(5.0).unwrap().fold_points().unwrap();
        for (fp, want) in f.iter().zip([0.24875, 0.976512, 1.52474]) {
            assert!((fp.p2 - want).abs() < 5e-4, "{} vs {}", fp.p2, want);
        }
    }

    #[test]
    fn fold_kinds_and_signs() {
        let f = upper().fold_points().unwrap();
        assert_eq!(
            f.map(|p| p.kind),
            [FoldKind::LocalMin, FoldKind::LocalMax, FoldKind::LocalMin]
        );
        assert!(f[0].p1 < 0.0 && f[1].p1 > 0.0 && f[2].p1 < 0.0);
        assert!((f[0].p1 + 0.861).abs() < 1e-3);
        assert!((f[1].p1 - 0.5102).abs() < 1e-3);
    }

    #[test]
    fn tc_point_cases() {
        let tc = upper().tc_point(-1.0, -2.2);
        assert_eq!((tc.p1, tc.p2), (0.0, 0.0));
        assert!(tc.valid);
        let shifted = QuarticSpec {
            q: 0.05,
            c: [-3.0; 4],
            r: [6.4, 4.0, 2.0, 1.0],
        };
        assert_relative_eq!(shifted.tc_point(-1.0, -2.2).p1, 2.56, max_relative = 1e-14);
        assert!(!upper().tc_point(-1.0, 0.5).valid);
    }

    #[test]
    fn branch_stability() {
        let q = upper();
        assert!(-0.1 * q.deriv(0.1) > 0.0);
        assert_eq!(
            q.fast_branch_stability(0.1).unwrap(),
            BranchStability::Repelling
        );
        assert_eq!(
            q.fast_branch_stability(0.6).unwrap(),
            BranchStability::Attracting
        );
        assert_eq!(
            q.fast_branch_stability(1.5).unwrap(),
            BranchStability::Repelling
        );
        assert_eq!(
            q.fast_branch_stability(2.0).unwrap(),
            BranchStability::Attracting
        );
        let folds = q.fold_points().unwrap();
        for f in folds {
            assert_eq!(
                q.fast_branch_stability(f.p2).unwrap(),
                BranchStability::Fold
            );
        }
        assert!(q.fast_branch_stability(0.0).is_err());
    }

    fn arb_spec() -> impl Strategy<Value = QuarticSpec> {
        // Four ordered, well separated non-negative zeros; c_i < 0 keeps the leading
        // coefficient positive.
        (
            0.01f64..1.0,
            prop::array::uniform4(-4.0f64..-0.5),
            0.0f64..0.5,
            prop::array::uniform3(0.2f64..1.5),
        )
            .prop_map(|(q, c, z0, gaps)| {
                let z = [
                    z0,
                    z0 + gaps[0],
                    z0 + gaps[0] + gaps[1],
                    z0 + gaps[0] + gaps[1] + gaps[2],
                ];
                let r = std::array::from_fn(|i| -c[i] * z[i]);
                QuarticSpec { q, c, r }
            })
    }

    proptest! {
        #[test]
        fn folds_interleave_zeros(spec in arb_spec()) {
            let z = spec.zeros().unwrap();
            let f = spec.fold_points().unwrap();
            for k in 0..3 {
                prop_assert!(z[k] < f[k].p2 && f[k].p2 < z[k + 1]);
            }
            prop_assert!(z.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(f.map(|p| p.kind), [FoldKind::LocalMin, FoldKind::LocalMax, FoldKind::LocalMin]);
            prop_assert!(f[0].p1 < 0.0 && f[1].p1 > 0.0 && f[2].p1 < 0.0);
            for fp in f {
                prop_assert!(spec.deriv(fp.p2).abs() <= 1e-10 * spec.deriv_scale());
            }
        }

        #[test]
        fn deriv_matches_central_difference(spec in arb_spec(), x in 0.0f64..3.0) {
            let h = 1e-6;
            let fd = (spec.eval(x + h) - spec.eval(x - h)) / (2.0 * h);
            let exact = spec.deriv(x);
            let scale = exact.abs().max(1e-3 * spec.deriv_scale());
            prop_assert!((fd - exact).abs() <= 1e-6 * scale, "fd {} exact {}", fd, exact);
        }
    }
}
