//! Bracketed scalar root finders shared by the geometry, entry-exit and event code.

/// Newton iteration safeguarded by bisection on a sign-changing bracket.
///
/// `f` returns the value and the derivative. Stops when the bracket is narrower than
/// `xtol` or `|f| <= ftol`. Returns `None` when the bracket does not change sign.
pub(crate) fn newton_bisect<F>(mut f: F, lo: f64, hi: f64, xtol: f64, ftol: f64) -> Option<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo, hi);
    let (fa, _) = f(a);
    let (fb, _) = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let sa = fa.signum();
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx.abs() <= ftol {
            return Some(x);
        }
        if fx.signum() == sa {
            a = x;
        } else {
            b = x;
        }
        if (b - a).abs() <= xtol {
            return Some(0.5 * (a + b));
        }
        let newton = x - fx / dfx;
        x = if dfx != 0.0 && newton.is_finite() && newton > a.min(b) && newton < a.max(b) {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    Some(x)
}

/// Illinois-modified regula falsi. `fa` and `fb` must have opposite signs (or one be zero).
pub(crate) fn illinois<F>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol: f64,
) -> f64
where
    F: FnMut(f64) -> f64,
{
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    // The bracket end nearest the sign change from the left.
    if fb.abs() < fa.abs() {
        b
    } else {
        a
    }
}
