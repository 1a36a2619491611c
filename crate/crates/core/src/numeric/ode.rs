//! Dormand–Prince 5(4) integrator with step-size control and event location.
//!
//! Events are bracketed on accepted steps, located on the cubic Hermite
//! interpolant of the step, then polished by re-stepping from the start of the
//! step to the located time and applying one Newton correction on the crossing
//! equation. The re-step is a sub-step of an accepted step, so the crossing state
//! carries the integrator's accuracy rather than the interpolant's.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

/// Sign-change direction that triggers an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

impl Direction {
    fn triggers(self, before: f64, after: f64) -> bool {
        let rising = before < 0.0 && after >= 0.0;
        let falling = before > 0.0 && after <= 0.0;
        match self {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Either => rising || falling,
        }
    }
}

/// Scalar function of the state whose zero marks an event.
pub trait EventFunction<const D: usize> {
    fn value(&self, t: f64, y: &[f64; D]) -> f64;
    /// Derivative of `value` along the flow.
    fn rate(&self, t: f64, y: &[f64; D], dy: &[f64; D]) -> f64;
}

/// Event `y[index] == level`.
#[derive(Debug, Clone, Copy)]
pub struct Level {
    pub index: usize,
    pub level: f64,
}

impl<const D: usize> EventFunction<D> for Level {
    fn value(&self, _t: f64, y: &[f64; D]) -> f64 {
        y[self.index] - self.level
    }
    fn rate(&self, _t: f64, _y: &[f64; D], dy: &[f64; D]) -> f64 {
        dy[self.index]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing<const D: usize> {
    pub t: f64,
    pub y: [f64; D],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome<const D: usize> {
    /// The end time was reached without an event.
    Reached { t: f64, y: [f64; D] },
    Event(Crossing<D>),
}

/// Embedded Runge–Kutta pair of orders 5 and 4 (Dormand & Prince).
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Step<const D: usize> {
    y: [f64; D],
    dy: [f64; D],
    err: [f64; D],
}

fn combine<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

fn rk_step<F, const D: usize>(f: &F, t: f64, y: &[f64; D], k1: &[f64; D], h: f64) -> Step<D>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let k2 = f(t + C2 * h, &combine(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &combine(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &combine(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(
        t + C5 * h,
        &combine(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = f(
        t + h,
        &combine(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y_new = combine(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y_new);
    let mut err = [0.0; D];
    for i in 0..D {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Step { y: y_new, dy: k7, err }
}

fn hermite<const D: usize>(
    t0: f64,
    y0: &[f64; D],
    f0: &[f64; D],
    t1: f64,
    y1: &[f64; D],
    f1: &[f64; D],
    t: f64,
) -> [f64; D] {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let mut out = [0.0; D];
    for i in 0..D {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
    out
}

impl Dopri5 {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: tol,
            ..Self::default()
        }
    }

    fn error_norm<const D: usize>(&self, y: &[f64; D], y_new: &[f64; D], err: &[f64; D]) -> f64 {
        let mut acc = 0.0;
        for i in 0..D {
            let scale = self.abs_tol + self.rel_tol * y[i].abs().max(y_new[i].abs());
            acc += (err[i] / scale).powi(2);
        }
        (acc / D as f64).sqrt()
    }

    /// Integrates from `t0` to `t_end` (either direction).
    pub fn integrate<F, const D: usize>(
        &self,
        f: F,
        t0: f64,
        y0: [f64; D],
        t_end: f64,
    ) -> Result<[f64; D], OdeError>
    where
        F: Fn(f64, &[f64; D]) -> [f64; D],
    {
        match self.run(&f, t0, y0, t_end, None::<(&Level, Direction)>)? {
            Outcome::Reached { y, .. } => Ok(y),
            Outcome::Event(c) => Ok(c.y),
        }
    }

    /// Integrates until `event` changes sign in `direction`, or until `t_end`.
    /// A zero of the event function at `t0` itself is not reported.
    pub fn integrate_until<F, E, const D: usize>(
        &self,
        f: F,
        t0: f64,
        y0: [f64; D],
        t_end: f64,
        event: &E,
        direction: Direction,
    ) -> Result<Outcome<D>, OdeError>
    where
        F: Fn(f64, &[f64; D]) -> [f64; D],
        E: EventFunction<D>,
    {
        self.run(&f, t0, y0, t_end, Some((event, direction)))
    }

    fn run<F, E, const D: usize>(
        &self,
        f: &F,
        t0: f64,
        y0: [f64; D],
        t_end: f64,
        event: Option<(&E, Direction)>,
    ) -> Result<Outcome<D>, OdeError>
    where
        F: Fn(f64, &[f64; D]) -> [f64; D],
        E: EventFunction<D>,
    {
        let span = t_end - t0;
        if span == 0.0 {
            return Ok(Outcome::Reached { t: t0, y: y0 });
        }
        let dir = span.signum();
        let mut t = t0;
        let mut y = y0;
        let mut dy = f(t, &y);
        let mut h = span.abs().min(self.max_step) * dir;
        let mut g_prev = event.map(|(e, _)| e.value(t, &y));
        let mut steps = 0usize;

        loop {
            if steps >= self.max_steps {
                return Err(OdeError::TooManySteps {
                    t,
                    max_steps: self.max_steps,
                });
            }
            let remaining = t_end - t;
            let last = h.abs() >= remaining.abs();
            if last {
                h = remaining;
            }
            let step = rk_step(f, t, &y, &dy, h);
            steps += 1;
            let err = self.error_norm(&y, &step.y, &step.err);
            if !err.is_finite() || step.y.iter().any(|v| !v.is_finite()) {
                // Shrink aggressively; a blow-up on a huge trial step is common.
                h *= 0.1;
                if h.abs() < 1e-14 * t.abs().max(1.0) {
                    return Err(OdeError::NonFinite { t });
                }
                continue;
            }
            if err > 1.0 {
                let fac = (0.9 * err.powf(-0.2)).max(0.2);
                h *= fac;
                if h.abs() < 1e-14 * t.abs().max(1.0) {
                    return Err(OdeError::StepSizeUnderflow { t });
                }
                continue;
            }

            let t_new = if last { t_end } else { t + h };
            if let Some((ev, direction)) = event {
                let g_new = ev.value(t_new, &step.y);
                let g_old = g_prev.unwrap_or(0.0);
                if g_old != 0.0 && direction.triggers(g_old, g_new) {
                    let crossing = self.locate(f, ev, t, &y, &dy, t_new, &step.y, &step.dy);
                    return Ok(Outcome::Event(crossing));
                }
                g_prev = Some(g_new);
            }

            t = t_new;
            y = step.y;
            dy = step.dy;
            if last {
                return Ok(Outcome::Reached { t, y });
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * fac).abs().min(self.max_step) * dir;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn locate<F, E, const D: usize>(
        &self,
        f: &F,
        ev: &E,
        t0: f64,
        y0: &[f64; D],
        f0: &[f64; D],
        t1: f64,
        y1: &[f64; D],
        f1: &[f64; D],
    ) -> Crossing<D>
    where
        F: Fn(f64, &[f64; D]) -> [f64; D],
        E: EventFunction<D>,
    {
        let g = |t: f64| ev.value(t, &hermite(t0, y0, f0, t1, y1, f1, t));
        let (mut lo, mut hi) = (t0, t1);
        let g_lo = g(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if (g(mid) < 0.0) == (g_lo < 0.0) && g(mid) != 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut ts = 0.5 * (lo + hi);
        // Re-step from the accepted step's start, then one Newton correction.
        let restep = |ts: f64| -> [f64; D] {
            if ts == t0 {
                *y0
            } else {
                rk_step(f, t0, y0, f0, ts - t0).y
            }
        };
        let mut ys = restep(ts);
        let dys = f(ts, &ys);
        let rate = ev.rate(ts, &ys, &dys);
        if rate != 0.0 && rate.is_finite() {
            let dt = -ev.value(ts, &ys) / rate;
            if dt.abs() <= (t1 - t0).abs() {
                ts += dt;
                ys = restep(ts);
            }
        }
        Crossing { t: ts, y: ys }
    }
}
