//! Bracketed scalar root finding.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("non-finite function value at {x}")]
    NonFinite { x: f64 },
}

/// Bisection on a bracket with a sign change. Stops once the bracket is
/// narrower than `rel_tol * |x|` (or `abs_tol`) and `|f| <= residual`, or when
/// the bracket cannot be split further in floating point. Returns the bracket
/// end with the smaller residual.
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
    residual: f64,
) -> Result<f64, RootError> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(RootError::NonFinite { x: a });
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite { x: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if (fa < 0.0) == (fb < 0.0) {
        return Err(RootError::NoSignChange { lo, hi });
    }
    for _ in 0..2000 {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let fm = f(m);
        if !fm.is_finite() {
            return Err(RootError::NonFinite { x: m });
        }
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
        let width = (b - a).abs();
        let scale = abs_tol.max(rel_tol * a.abs().max(b.abs()));
        if width <= scale && fa.abs().min(fb.abs()) <= residual {
            break;
        }
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

/// Newton's method safeguarded by a bracket: any step that leaves the current
/// bracket is replaced by a bisection step.
pub fn safeguarded_newton<F>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64, RootError>
where
    F: Fn(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (fa, _) = f(a);
    let (fb, _) = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if (fa < 0.0) == (fb < 0.0) {
        return Err(RootError::NoSignChange { lo, hi });
    }
    let a_negative = fa < 0.0;
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if !fx.is_finite() {
            return Err(RootError::NonFinite { x });
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == a_negative {
            a = x;
        } else {
            b = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= rel_tol * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}
