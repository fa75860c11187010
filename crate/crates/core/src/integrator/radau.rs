//! Three-stage Radau IIA (order 5) with simplified Newton iteration, an embedded
//! error estimate, predictive step control and cubic dense output.
//!
//! Optionally propagates the derivative of the discrete step map with respect
//! to the initial state and to a scalar parameter (internal differentiation).

use nalgebra::DMatrix;

use super::{Control, OdeSystem, Piece, Sensitivity, SolverOptions};
use crate::error::{Error, Result};

const SQ6: f64 = 2.449_489_742_783_178;
const C1: f64 = (4.0 - SQ6) / 10.0;
const C2: f64 = (4.0 + SQ6) / 10.0;
const C1M1: f64 = C1 - 1.0;
const C2M1: f64 = C2 - 1.0;
const C1MC2: f64 = C1 - C2;
const A: [[f64; 3]; 3] = [
    [
        (88.0 - 7.0 * SQ6) / 360.0,
        (296.0 - 169.0 * SQ6) / 1800.0,
        (-2.0 + 3.0 * SQ6) / 225.0,
    ],
    [
        (296.0 + 169.0 * SQ6) / 1800.0,
        (88.0 + 7.0 * SQ6) / 360.0,
        (-2.0 - 3.0 * SQ6) / 225.0,
    ],
    [(16.0 - SQ6) / 36.0, (16.0 + SQ6) / 36.0, 1.0 / 9.0],
];
const DD: [f64; 3] = [
    -(13.0 + 7.0 * SQ6) / 3.0,
    (-13.0 + 7.0 * SQ6) / 3.0,
    -1.0 / 3.0,
];
const NIT: usize = 7;
const SAFE: f64 = 0.9;
const FACL: f64 = 5.0;
const FACR: f64 = 0.125;
const UROUND: f64 = 1e-16;

/// Reciprocal of the real eigenvalue of `A⁻¹`.
fn gamma0() -> f64 {
    let u1 = 30.0 / (6.0 + 81f64.cbrt() - 9f64.cbrt());
    1.0 / u1
}

/// One accepted step, with its dense-output polynomial.
pub struct StepView<'a> {
    pub t0: f64,
    pub t1: f64,
    pub y0: &'a [f64],
    pub y1: &'a [f64],
    cont: &'a [f64],
}

impl StepView<'_> {
    /// Dense output at `t ∈ [t0, t1]`.
    pub fn dense(&self, t: f64, out: &mut [f64]) {
        let n = self.y1.len();
        let h = self.t1 - self.t0;
        if t == self.t1 || h == 0.0 {
            out.copy_from_slice(self.y1);
            return;
        }
        let s = (t - self.t1) / h;
        for i in 0..n {
            out[i] = self.y1[i]
                + s * (self.cont[i]
                    + (s - C2M1) * (self.cont[n + i] + (s - C1M1) * self.cont[2 * n + i]));
        }
    }
}

pub struct Outcome {
    pub t: f64,
    pub y: Vec<f64>,
    pub steps: usize,
    pub rejected: usize,
    /// The observer asked to stop before the last piece ended.
    pub stopped: bool,
    /// `∂y(t)/∂y(t0)`; absent when not requested or when stopped early.
    pub stm: Option<DMatrix<f64>>,
    /// `∂y(t)/∂α`; absent when not requested or when stopped early.
    pub param_sens: Option<Vec<f64>>,
    /// `ln |det stm|` summed step by step, which stays accurate when the
    /// product matrix is nearly singular.
    pub stm_log_det: Option<f64>,
    pub h_next: f64,
}

struct Work {
    jac: DMatrix<f64>,
    f0: Vec<f64>,
    z: Vec<f64>,
    fz: Vec<f64>,
    tmp: Vec<f64>,
    scal: Vec<f64>,
}

/// Integrate over consecutive `pieces`, each with a constant input. No step
/// crosses a piece boundary.
pub fn solve<S: OdeSystem + ?Sized>(
    sys: &S,
    pieces: &[Piece],
    y0: &[f64],
    opts: &SolverOptions,
    sens: Sensitivity,
    observer: &mut dyn FnMut(&StepView) -> Control,
) -> Result<Outcome> {
    let n = sys.dim();
    assert_eq!(y0.len(), n, "initial state has wrong dimension");
    assert!(!pieces.is_empty(), "no integration pieces");
    let (rtol, atol) = (opts.rtol, opts.atol);
    let fnewt = (10.0 * UROUND / rtol).max(0.03f64.min(rtol.sqrt()));
    let g0 = gamma0();
    let cfac = SAFE * (1.0 + 2.0 * NIT as f64);

    let mut w = Work {
        jac: DMatrix::zeros(n, n),
        f0: vec![0.0; n],
        z: vec![0.0; 3 * n],
        fz: vec![0.0; 3 * n],
        tmp: vec![0.0; n],
        scal: vec![0.0; n],
    };
    let mut y = y0.to_vec();
    let mut y1 = vec![0.0; n];
    let mut cont = vec![0.0; 3 * n];
    let mut have_cont = false;
    let mut hold = 0.0;
    let mut t = pieces[0].t0;
    let mut h = opts.h_init.unwrap_or(1e-6).min(opts.h_max);
    let mut stm = (sens != Sensitivity::None).then(|| DMatrix::<f64>::identity(n, n));
    let mut psens = (sens == Sensitivity::StateAndParameter).then(|| vec![0.0; n]);
    let mut log_det = (sens != Sensitivity::None).then_some(0.0f64);
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut faccon = 1.0f64;
    let mut first = true;
    let mut reject = false;
    let mut hacc = 0.0f64;
    let mut erracc = 1e-2f64;
    let mut naccpt = 0usize;

    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t });
    }

    for piece in pieces {
        t = piece.t0;
        let input = piece.input;
        while t < piece.t1 {
            if steps + rejected >= opts.max_steps {
                return Err(Error::MaxStepsExceeded {
                    t,
                    steps: steps + rejected,
                });
            }
            let remaining = piece.t1 - t;
            let mut hs = h.min(opts.h_max);
            let mut last = false;
            if 1.0001 * hs >= remaining {
                hs = remaining;
                last = true;
            }
            if hs < 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::StepSizeUnderflow { t, h: hs });
            }

            sys.rhs(&y, input, &mut w.f0);
            sys.jacobian(&y, input, &mut w.jac);
            if let Some(c) = opts.growth_limit {
                let growth = max_growth_rate(&w.jac);
                if growth > 0.0 && hs * growth > c {
                    hs = c / growth;
                    last = false;
                }
            }
            for i in 0..n {
                w.scal[i] = atol + rtol * y[i].abs();
            }
            let Some(lu) = newton_matrix(&w.jac, hs, n) else {
                h = 0.5 * hs;
                reject = true;
                rejected += 1;
                continue;
            };

            // Starting values for the stage increments.
            if have_cont && !first {
                let c3q = hs / hold;
                let c1q = C1 * c3q;
                let c2q = C2 * c3q;
                for i in 0..n {
                    let (ak1, ak2, ak3) = (cont[i], cont[n + i], cont[2 * n + i]);
                    w.z[i] = c1q * (ak1 + (c1q - C2M1) * (ak2 + (c1q - C1M1) * ak3));
                    w.z[n + i] = c2q * (ak1 + (c2q - C2M1) * (ak2 + (c2q - C1M1) * ak3));
                    w.z[2 * n + i] = c3q * (ak1 + (c3q - C2M1) * (ak2 + (c3q - C1M1) * ak3));
                }
            } else {
                w.z.fill(0.0);
            }

            // Simplified Newton iteration.
            faccon = faccon.max(UROUND).powf(0.8);
            let mut thqold = 0.0;
            let mut dynold = 0.0f64;
            let mut newt = 0usize;
            let mut newton_ok = true;
            let mut h_retry = None;
            loop {
                if newt >= NIT {
                    newton_ok = false;
                    break;
                }
                for s in 0..3 {
                    for i in 0..n {
                        w.tmp[i] = y[i] + w.z[s * n + i];
                    }
                    let (lo, hi) = (s * n, (s + 1) * n);
                    sys.rhs(&w.tmp, input, &mut w.fz[lo..hi]);
                }
                if w.fz.iter().any(|v| !v.is_finite()) {
                    newton_ok = false;
                    break;
                }
                let mut rhs = nalgebra::DVector::<f64>::zeros(3 * n);
                for s in 0..3 {
                    for i in 0..n {
                        let mut acc = -w.z[s * n + i];
                        for j in 0..3 {
                            acc += hs * A[s][j] * w.fz[j * n + i];
                        }
                        rhs[s * n + i] = acc;
                    }
                }
                let dz = lu.solve(&rhs).unwrap_or(rhs);
                newt += 1;
                let mut sum = 0.0;
                for s in 0..3 {
                    for i in 0..n {
                        let q = dz[s * n + i] / w.scal[i];
                        sum += q * q;
                    }
                }
                let dyno = (sum / (3 * n) as f64).sqrt();
                if !dyno.is_finite() {
                    newton_ok = false;
                    break;
                }
                if newt > 1 && newt < NIT {
                    let thq = dyno / dynold;
                    let theta = if newt == 2 {
                        thq
                    } else {
                        (thq * thqold).sqrt()
                    };
                    thqold = thq;
                    if theta < 0.99 {
                        faccon = theta / (1.0 - theta);
                        let dyth = faccon * dyno * theta.powi((NIT - 1 - newt) as i32) / fnewt;
                        if dyth >= 1.0 {
                            let qnewt = dyth.clamp(1e-4, 20.0);
                            let hhfac =
                                0.8 * qnewt.powf(-1.0 / (4.0 + NIT as f64 - 1.0 - newt as f64));
                            h_retry = Some(hhfac * hs);
                            break;
                        }
                    } else {
                        newton_ok = false;
                        break;
                    }
                }
                dynold = dyno.max(UROUND);
                for k in 0..3 * n {
                    w.z[k] += dz[k];
                }
                if faccon * dyno <= fnewt {
                    break;
                }
            }
            if let Some(hn) = h_retry {
                h = hn;
                reject = true;
                rejected += 1;
                check_underflow(t, h)?;
                continue;
            }
            if !newton_ok {
                h = 0.5 * hs;
                reject = true;
                rejected += 1;
                check_underflow(t, h)?;
                continue;
            }

            // Embedded error estimate.
            let Some(elu) = error_matrix(&w.jac, hs * g0, n) else {
                h = 0.5 * hs;
                reject = true;
                rejected += 1;
                continue;
            };
            let mut f2 = vec![0.0; n];
            let mut e = nalgebra::DVector::<f64>::zeros(n);
            for i in 0..n {
                f2[i] = g0 * (DD[0] * w.z[i] + DD[1] * w.z[n + i] + DD[2] * w.z[2 * n + i]);
                e[i] = f2[i] + hs * g0 * w.f0[i];
            }
            let mut e = elu.solve(&e).unwrap_or(e);
            for i in 0..n {
                y1[i] = y[i] + w.z[2 * n + i];
            }
            let mut err = error_norm(&e, &y, &y1, atol, rtol);
            if err >= 1.0 && (first || reject) {
                for i in 0..n {
                    w.tmp[i] = y[i] + e[i];
                }
                let mut ft = vec![0.0; n];
                sys.rhs(&w.tmp, input, &mut ft);
                let mut e2 = nalgebra::DVector::<f64>::zeros(n);
                for i in 0..n {
                    e2[i] = f2[i] + hs * g0 * ft[i];
                }
                e = elu.solve(&e2).unwrap_or(e2);
                err = error_norm(&e, &y, &y1, atol, rtol);
            }
            if !err.is_finite() {
                err = 1e10;
            }
            let err = err.max(1e-10);

            let fac = SAFE.min(cfac / (newt as f64 + 2.0 * NIT as f64));
            let mut quot = FACR.max(FACL.min(err.powf(0.25) / fac));
            let mut hnew = hs / quot;

            if err < 1.0 {
                first = false;
                naccpt += 1;
                if naccpt > 1 {
                    let facgus = (hacc / hs) * (err * err / erracc).powf(0.25) / SAFE;
                    let facgus = FACR.max(FACL.min(facgus));
                    quot = quot.max(facgus);
                    hnew = hs / quot;
                }
                hacc = hs;
                erracc = err.max(1e-2);

                if let Some(phi) = stm.as_mut() {
                    let (dphi, dpar) =
                        step_sensitivity(sys, &y, &w.z, hs, input, n, psens.is_some());
                    let new_phi = &dphi * &*phi;
                    if let Some(ps) = psens.as_mut() {
                        let dpar = dpar.expect("parameter sensitivity requested");
                        let psv = nalgebra::DVector::from_column_slice(ps);
                        let upd = &dphi * psv;
                        for i in 0..n {
                            ps[i] = upd[i] + dpar[i];
                        }
                    }
                    *phi = new_phi;
                    if let Some(ld) = log_det.as_mut() {
                        *ld += dphi.determinant().abs().ln();
                    }
                }

                // Dense-output coefficients.
                for i in 0..n {
                    let (z1, z2, z3) = (w.z[i], w.z[n + i], w.z[2 * n + i]);
                    cont[i] = (z2 - z3) / C2M1;
                    let ak = (z1 - z2) / C1MC2;
                    let acont3 = (ak - z1 / C1) / C2;
                    cont[n + i] = (ak - cont[i]) / C1M1;
                    cont[2 * n + i] = cont[n + i] - acont3;
                }
                have_cont = true;
                hold = hs;
                if y1.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { t: t + hs });
                }
                let t_new = if last { piece.t1 } else { t + hs };
                steps += 1;
                let view = StepView {
                    t0: t,
                    t1: t_new,
                    y0: &y,
                    y1: &y1,
                    cont: &cont,
                };
                if let Control::Stop(ts) = observer(&view) {
                    let ts = ts.clamp(t, t_new);
                    let mut ys = vec![0.0; n];
                    view.dense(ts, &mut ys);
                    return Ok(Outcome {
                        t: ts,
                        y: ys,
                        steps,
                        rejected,
                        stopped: true,
                        stm: None,
                        param_sens: None,
                        stm_log_det: None,
                        h_next: hnew,
                    });
                }
                y.copy_from_slice(&y1);
                t = t_new;
                if reject {
                    hnew = hnew.min(hs);
                }
                reject = false;
                // A step truncated at a piece end keeps the longer proposal.
                h = if last { hnew.max(h) } else { hnew };
            } else {
                reject = true;
                rejected += 1;
                h = if first { 0.1 * hs } else { hnew };
                check_underflow(t, h)?;
            }
        }
    }
    Ok(Outcome {
        t,
        y,
        steps,
        rejected,
        stopped: false,
        stm,
        param_sens: psens,
        stm_log_det: log_det,
        h_next: h,
    })
}

fn check_underflow(t: f64, h: f64) -> Result<()> {
    if h < 1e-14 * t.abs().max(1.0) {
        Err(Error::StepSizeUnderflow { t, h })
    } else {
        Ok(())
    }
}

fn error_norm(e: &nalgebra::DVector<f64>, y0: &[f64], y1: &[f64], atol: f64, rtol: f64) -> f64 {
    let n = y0.len();
    let mut sum = 0.0;
    for i in 0..n {
        let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
        let q = e[i] / sc;
        sum += q * q;
    }
    (sum / n as f64).sqrt()
}

/// LU of `I - h·(A ⊗ J)`.
fn newton_matrix(
    jac: &DMatrix<f64>,
    h: f64,
    n: usize,
) -> Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let mut m = DMatrix::<f64>::identity(3 * n, 3 * n);
    for s in 0..3 {
        for j in 0..3 {
            let c = h * A[s][j];
            for r in 0..n {
                for k in 0..n {
                    m[(s * n + r, j * n + k)] -= c * jac[(r, k)];
                }
            }
        }
    }
    let lu = m.lu();
    lu.is_invertible().then_some(lu)
}

/// LU of `I - hγ·J`.
fn error_matrix(
    jac: &DMatrix<f64>,
    hg: f64,
    n: usize,
) -> Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let m = DMatrix::<f64>::identity(n, n) - jac * hg;
    let lu = m.lu();
    lu.is_invertible().then_some(lu)
}

/// Derivative of one converged step with respect to the step's initial state,
/// and optionally with respect to the parameter.
/// Largest positive real part among the eigenvalues of `jac`, or zero.
fn max_growth_rate(jac: &DMatrix<f64>) -> f64 {
    if jac.nrows() == 2 {
        let (a, b, c, d) = (jac[(0, 0)], jac[(0, 1)], jac[(1, 0)], jac[(1, 1)]);
        let half = 0.5 * (a + d);
        let disc = 0.25 * (a - d) * (a - d) + b * c;
        let re = if disc >= 0.0 {
            half + disc.sqrt()
        } else {
            half
        };
        return re.max(0.0);
    }
    jac.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(0.0, f64::max)
}

fn step_sensitivity<S: OdeSystem + ?Sized>(
    sys: &S,
    y: &[f64],
    z: &[f64],
    h: f64,
    input: f64,
    n: usize,
    with_param: bool,
) -> (DMatrix<f64>, Option<Vec<f64>>) {
    let mut jacs = Vec::with_capacity(3);
    let mut fps = Vec::with_capacity(3);
    let mut ys = vec![0.0; n];
    for s in 0..3 {
        for i in 0..n {
            ys[i] = y[i] + z[s * n + i];
        }
        let mut j = DMatrix::zeros(n, n);
        sys.jacobian(&ys, input, &mut j);
        jacs.push(j);
        if with_param {
            let mut fp = vec![0.0; n];
            sys.rhs_param(&ys, input, &mut fp);
            fps.push(fp);
        }
    }
    let cols = n + usize::from(with_param);
    let mut k = DMatrix::<f64>::identity(3 * n, 3 * n);
    let mut rhs = DMatrix::<f64>::zeros(3 * n, cols);
    for s in 0..3 {
        for j in 0..3 {
            let c = h * A[s][j];
            for r in 0..n {
                for q in 0..n {
                    let v = c * jacs[j][(r, q)];
                    k[(s * n + r, j * n + q)] -= v;
                    rhs[(s * n + r, q)] += v;
                }
                if with_param {
                    rhs[(s * n + r, n)] += c * fps[j][r];
                }
            }
        }
    }
    let sol = k.lu().solve(&rhs).unwrap_or(rhs);
    let mut phi = DMatrix::<f64>::identity(n, n);
    for r in 0..n {
        for q in 0..n {
            phi[(r, q)] += sol[(2 * n + r, q)];
        }
    }
    let par = with_param.then(|| (0..n).map(|r| sol[(2 * n + r, n)]).collect());
    (phi, par)
}
