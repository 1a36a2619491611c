//! The rectifying chart `t = -1/x - a ln|x|` of the model field `u_a`.

use super::GermError;
use crate::numeric::roots;

/// `t(x) = -1/x - a ln|x|`. Requires `x != 0` and `1 - a x > 0`, where the
/// chart is increasing.
pub fn rectify(x: f64, a: f64) -> Result<f64, GermError> {
    if x == 0.0 || !x.is_finite() {
        return Err(GermError::OutOfDomain { x });
    }
    if 1.0 - a * x <= 0.0 {
        return Err(GermError::NonMonotone { value: x });
    }
    Ok(-1.0 / x - a * x.abs().ln())
}

/// `dt/dx = (1 - a x) / x^2 = 1 / u_a(x)`.
pub fn chart_derivative(x: f64, a: f64) -> f64 {
    (1.0 - a * x) / (x * x)
}

/// Inverse of [`rectify`]. The branch follows the sign of `t`: `t > 0` comes
/// from `x < 0` and `t < 0` from `x > 0`.
///
/// With `w = -1/x` the chart reads `w + a ln|w| = t`; on either branch this is
/// `s + c ln s = |t|` for `s = |w|` and `c = a sign(t)`.
pub fn unrectify(t: f64, a: f64) -> Result<f64, GermError> {
    if t == 0.0 || !t.is_finite() {
        return Err(GermError::OutOfDomain { x: t });
    }
    let target = t.abs();
    let c = a * t.signum();
    if c == 0.0 {
        return Ok(-1.0 / t);
    }
    let g = |s: f64| (s + c * s.ln() - target, 1.0 + c / s);
    // monotone on s > max(0, -c)
    let lo = if c < 0.0 { -c * (1.0 + 1e-12) } else { f64::MIN_POSITIVE };
    if g(lo).0 > 0.0 {
        return Err(GermError::NonMonotone { value: t });
    }
    let mut hi = target + c.abs() * target.ln().abs() + 1.0;
    while g(hi).0 <= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(GermError::OutOfDomain { x: t });
        }
    }
    let s = roots::safeguarded_newton(g, lo, hi, 1e-16)?;
    Ok(-t.signum() / s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficient_closed_form() {
        assert_eq!(rectify(0.1, 0.0).unwrap(), -10.0);
        assert!((unrectify(-10.0, 0.0).unwrap() - 0.1).abs() < 1e-17);
        assert_eq!(rectify(0.01, 0.0).unwrap(), -100.0);
        assert_eq!(unrectify(-100.0, 0.0).unwrap(), 0.01);
    }

    #[test]
    fn round_trip_both_branches() {
        for a in [0.5, -0.3, 0.4, -1.2] {
            for x in [0.1, 0.02, 1e-4, -0.1, -0.02, -1e-5] {
                if 1.0 - a * x <= 0.0 {
                    continue;
                }
                let t = rectify(x, a).unwrap();
                let back = unrectify(t, a).unwrap();
                assert!(((back - x) / x).abs() < 1e-12, "a={a} x={x} back={back}");
            }
        }
    }

    #[test]
    fn chart_errors() {
        assert!(matches!(rectify(0.0, 0.1), Err(GermError::OutOfDomain { .. })));
        assert!(matches!(rectify(3.0, 0.5), Err(GermError::NonMonotone { .. })));
    }
}
