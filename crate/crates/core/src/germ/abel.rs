//! Rectified germs `P^(t) = t + 1 + R^(t)` and truncated series solutions of
//! the Abel equation `h = h o P^ + R^`.

use std::fmt;
use std::sync::Arc;

use super::chart::{chart_derivative, rectify, unrectify};
use super::{normal_form_coefficient, GermError, ParabolicGerm};
use crate::numeric::fd;

/// Which end of the chart the series lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TSide {
    /// `t >> 0`, i.e. `x < 0`; the forward orbit goes to `+inf`.
    Positive,
    /// `t << 0`, i.e. `x > 0`; the backward orbit goes to `-inf`.
    Negative,
}

impl TSide {
    pub fn of_x(x: f64) -> Self {
        if x < 0.0 {
            TSide::Positive
        } else {
            TSide::Negative
        }
    }

    pub fn of_t(t: f64) -> Self {
        if t > 0.0 {
            TSide::Positive
        } else {
            TSide::Negative
        }
    }
}

/// One orbit point entering the Abel series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitTerm {
    pub t: f64,
    pub r_hat: f64,
    pub r_hat_prime: f64,
    pub p_hat_prime: f64,
}

type Map = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Source {
    Germ { germ: ParabolicGerm, a: f64 },
    Synthetic {
        p_hat: Map,
        r_hat: Map,
        p_hat_inverse: Option<Map>,
    },
}

/// A germ written in the rectifying chart.
#[derive(Clone)]
pub struct RectifiedGerm {
    source: Source,
    noise: f64,
}

impl fmt::Debug for RectifiedGerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Source::Germ { a, .. } => write!(f, "RectifiedGerm {{ a: {a} }}"),
            Source::Synthetic { .. } => write!(f, "RectifiedGerm {{ synthetic }}"),
        }
    }
}

impl RectifiedGerm {
    /// Rectifies `germ` with the chart of coefficient `a`.
    pub fn new(germ: ParabolicGerm, a: f64) -> Self {
        let noise = germ.accuracy();
        Self {
            source: Source::Germ { germ, a },
            noise,
        }
    }

    /// Rectifies `germ` with its estimated normal-form coefficient.
    pub fn from_germ(germ: ParabolicGerm) -> Result<Self, GermError> {
        let a = normal_form_coefficient(&germ)?;
        Ok(Self::new(germ, a))
    }

    /// A map given directly in the chart. The series is summed over orbits
    /// of `p_hat` with terms `r_hat`; the two need not be consistent, which
    /// lets the series machinery be checked in isolation. The negative side
    /// needs `P^^{-1}`.
    pub fn synthetic<P, R>(p_hat: P, r_hat: R, p_hat_inverse: Option<Map>) -> Self
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
        R: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            source: Source::Synthetic {
                p_hat: Arc::new(p_hat),
                r_hat: Arc::new(r_hat),
                p_hat_inverse,
            },
            noise: 4.0 * f64::EPSILON,
        }
    }

    pub fn a(&self) -> Option<f64> {
        match &self.source {
            Source::Germ { a, .. } => Some(*a),
            Source::Synthetic { .. } => None,
        }
    }

    pub fn germ(&self) -> Option<&ParabolicGerm> {
        match &self.source {
            Source::Germ { germ, .. } => Some(germ),
            Source::Synthetic { .. } => None,
        }
    }

    /// `P^(t)`.
    pub fn p_hat(&self, t: f64) -> Result<f64, GermError> {
        match &self.source {
            Source::Germ { germ, a } => rectify(germ.eval(unrectify(t, *a)?), *a),
            Source::Synthetic { p_hat, .. } => Ok(p_hat(t)),
        }
    }

    /// `R^(t) = P^(t) - t - 1`, evaluated without cancellation.
    pub fn r_hat(&self, t: f64) -> Result<f64, GermError> {
        match &self.source {
            Source::Germ { germ, a } => {
                let x = unrectify(t, *a)?;
                Ok(remainder(x, germ.eval(x), *a))
            }
            Source::Synthetic { r_hat, .. } => Ok(r_hat(t)),
        }
    }

    /// Absolute noise level of `R^` near `t`; smaller values are treated as 0.
    fn noise_floor(&self, t: f64) -> f64 {
        16.0 * self.noise * (t.abs() + 1.0)
    }

    /// Orbit terms of the series for `h` at `t`: `t_0..t_{n-1}` forward on
    /// the positive side, `t_{-1}..t_{-n}` backward on the negative side.
    pub fn terms(&self, t: f64, side: TSide, n: usize) -> Result<Vec<OrbitTerm>, GermError> {
        match &self.source {
            Source::Germ { a, .. } => self.terms_from_x(unrectify(t, *a)?, side, n),
            Source::Synthetic {
                p_hat,
                r_hat,
                p_hat_inverse,
            } => {
                let term = |s: f64| {
                    let h = 1e-3 * s.abs().max(1.0);
                    OrbitTerm {
                        t: s,
                        r_hat: r_hat(s),
                        r_hat_prime: fd::d1(&|v| r_hat(v), s, h),
                        p_hat_prime: fd::d1(&|v| p_hat(v), s, h),
                    }
                };
                let mut out = Vec::with_capacity(n);
                let mut s = t;
                match side {
                    TSide::Positive => {
                        for _ in 0..n {
                            out.push(term(s));
                            s = p_hat(s);
                        }
                    }
                    TSide::Negative => {
                        let inv = p_hat_inverse
                            .as_ref()
                            .ok_or(GermError::NoInverse { x: t })?;
                        for _ in 0..n {
                            s = inv(s);
                            out.push(term(s));
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Same as [`RectifiedGerm::terms`] but started from the germ coordinate
    /// `x`, which avoids a round trip through the chart.
    pub(crate) fn terms_from_x(&self, x: f64, side: TSide, n: usize) -> Result<Vec<OrbitTerm>, GermError> {
        let Source::Germ { germ, a } = &self.source else {
            unreachable!("x-coordinates exist only for germ-based charts")
        };
        let a = *a;
        let term = |x: f64, y: f64| -> Result<OrbitTerm, GermError> {
            let dp = chart_derivative(y, a) * germ.derivative(x) / chart_derivative(x, a);
            Ok(OrbitTerm {
                t: rectify(x, a)?,
                r_hat: remainder(x, y, a),
                r_hat_prime: dp - 1.0,
                p_hat_prime: dp,
            })
        };
        let mut out = Vec::with_capacity(n);
        let mut cur = x;
        match side {
            TSide::Positive => {
                for _ in 0..n {
                    let next = germ.eval(cur);
                    if !next.is_finite() {
                        return Err(GermError::OutOfDomain { x: cur });
                    }
                    out.push(term(cur, next)?);
                    cur = next;
                }
            }
            TSide::Negative => {
                for _ in 0..n {
                    let prev = germ.inverse(cur)?;
                    out.push(term(prev, cur)?);
                    cur = prev;
                }
            }
        }
        Ok(out)
    }
}

/// `t(y) - t(x) - 1` for `y = P(x)`, written so the leading 1 cancels
/// against `(y - x)/(x y)` rather than against the large chart values.
fn remainder(x: f64, y: f64, a: f64) -> f64 {
    let d = y - x;
    d / (x * y) - 1.0 - a * (d / x).ln_1p()
}

/// What the truncation index must control.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbelTarget {
    /// The tail of the series for `h` is below the tolerance.
    Value,
    /// The tail of the series for `h'` and the Abel residual `R^(t_N)` are
    /// below the tolerance; this is what a generator needs.
    Derivative,
}

/// Truncated solution of the Abel equation on one side of the chart.
#[derive(Debug, Clone)]
pub struct AbelSolution {
    germ: RectifiedGerm,
    side: TSide,
    t0: f64,
    truncation_index: usize,
    tail_bound: f64,
    derivative_tail_bound: f64,
    c1: f64,
    c1_prime: f64,
    min_increment: f64,
}

const DEFAULT_BUDGET: usize = 1_000_000;

/// Solves the Abel equation by the orbit series on `side`, valid for
/// `|t| >= |t0|`, truncated when the tail of the series for `h` is below `tol`.
pub fn abel_solution(germ: &RectifiedGerm, side: TSide, t0: f64, tol: f64) -> Result<AbelSolution, GermError> {
    AbelSolution::solve(germ, side, t0, tol, AbelTarget::Value, DEFAULT_BUDGET)
}

impl AbelSolution {
    pub fn solve(
        germ: &RectifiedGerm,
        side: TSide,
        t0: f64,
        tol: f64,
        target: AbelTarget,
        budget: usize,
    ) -> Result<Self, GermError> {
        if TSide::of_t(t0) != side {
            return Err(GermError::OutOfDomain { x: t0 });
        }
        let sample_len = (8.0 * t0.abs().ceil()).clamp(64.0, 4096.0) as usize;
        let terms = germ.terms(t0, side, sample_len)?;

        let mut min_increment = f64::INFINITY;
        let mut scaled = Vec::with_capacity(terms.len());
        let mut c1_prime: f64 = 0.0;
        for w in terms.windows(2) {
            min_increment = min_increment.min((w[1].t - w[0].t).abs());
        }
        for term in &terms {
            let floor = germ.noise_floor(term.t);
            let r = if term.r_hat.abs() <= floor { 0.0 } else { term.r_hat.abs() };
            let dr = if term.r_hat_prime.abs() <= floor { 0.0 } else { term.r_hat_prime.abs() };
            scaled.push(r * term.t * term.t);
            c1_prime = c1_prime.max(dr * term.t.abs().powi(3));
        }
        if min_increment < 0.5 {
            return Err(GermError::SlowOrbit {
                increment: min_increment,
            });
        }
        let half = scaled.len() / 2;
        let early = scaled[..half].iter().cloned().fold(0.0, f64::max);
        let late = scaled[half..].iter().cloned().fold(0.0, f64::max);
        let last_t = terms.last().map_or(t0, |t| t.t);
        let late_floor = germ.noise_floor(last_t) * last_t * last_t;
        if late > 1.5 * early + late_floor {
            return Err(GermError::DecayViolation { early, late });
        }
        let c1 = 2.0 * early.max(late);
        let c1_prime = 2.0 * c1_prime;
        let c = min_increment;
        let t_abs = t0.abs();

        let value_tail = |n: usize| {
            let s = t_abs + n as f64 * c;
            c1 / (s * s) + c1 / (c * s)
        };
        let derivative_tail = |n: usize| {
            let s = t_abs + n as f64 * c;
            // the orbit-derivative products stay within a factor 2 of 1
            2.0 * (c1_prime / (s * s * s) + c1_prime / (2.0 * c * s * s))
        };
        let residual = |n: usize| {
            let s = t_abs + n as f64 * c;
            c1 / (s * s)
        };
        let ok = |n: usize| match target {
            AbelTarget::Value => value_tail(n) <= tol,
            AbelTarget::Derivative => derivative_tail(n) <= tol && residual(n) <= tol,
        };

        let n = if c1 == 0.0 && c1_prime == 0.0 {
            0
        } else {
            let mut hi = 1usize;
            while !ok(hi) {
                hi *= 2;
                if hi > 4 * budget.max(1) {
                    break;
                }
            }
            let mut lo = 0usize;
            if ok(0) {
                hi = 0;
            }
            while lo + 1 < hi {
                let mid = (lo + hi) / 2;
                if ok(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            if hi > budget || !ok(hi) {
                return Err(GermError::TruncationTooLong { needed: hi, budget });
            }
            hi
        };

        Ok(Self {
            germ: germ.clone(),
            side,
            t0,
            truncation_index: n,
            tail_bound: if c1 == 0.0 { 0.0 } else { value_tail(n) },
            derivative_tail_bound: if c1_prime == 0.0 { 0.0 } else { derivative_tail(n) },
            c1,
            c1_prime,
            min_increment: c,
        })
    }

    pub fn side(&self) -> TSide {
        self.side
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn truncation_index(&self) -> usize {
        self.truncation_index
    }

    /// Bound on the omitted tail of the series for `h`.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Bound on the omitted tail of the series for `h'`.
    pub fn derivative_tail_bound(&self) -> f64 {
        self.derivative_tail_bound
    }

    /// `C_1` with `|R^(t)| <= C_1 t^-2` on the sampled orbit.
    pub fn decay_constant(&self) -> f64 {
        self.c1
    }

    pub fn derivative_decay_constant(&self) -> f64 {
        self.c1_prime
    }

    pub fn min_increment(&self) -> f64 {
        self.min_increment
    }

    fn sum(&self, terms: &[OrbitTerm]) -> (f64, f64) {
        let mut h = 0.0;
        let mut dh = 0.0;
        match self.side {
            TSide::Positive => {
                let mut prod = 1.0;
                for term in terms {
                    h += term.r_hat;
                    dh += term.r_hat_prime * prod;
                    prod *= term.p_hat_prime;
                }
                (h, dh)
            }
            TSide::Negative => {
                let mut prod = 1.0;
                for term in terms {
                    prod /= term.p_hat_prime;
                    h -= term.r_hat;
                    dh -= term.r_hat_prime * prod;
                }
                (h, dh)
            }
        }
    }

    /// `(h(t), h'(t))`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64), GermError> {
        if self.truncation_index == 0 {
            return Ok((0.0, 0.0));
        }
        let terms = self.germ.terms(t, self.side, self.truncation_index)?;
        Ok(self.sum(&terms))
    }

    pub fn h(&self, t: f64) -> Result<f64, GermError> {
        Ok(self.eval(t)?.0)
    }

    pub fn h_prime(&self, t: f64) -> Result<f64, GermError> {
        Ok(self.eval(t)?.1)
    }

    /// `(h, h')` at `t(x)`, started from the germ coordinate.
    pub(crate) fn eval_at_x(&self, x: f64) -> Result<(f64, f64), GermError> {
        if self.truncation_index == 0 {
            return Ok((0.0, 0.0));
        }
        let terms = self.germ.terms_from_x(x, self.side, self.truncation_index)?;
        Ok(self.sum(&terms))
    }

    /// `h(P^(t)) + R^(t) - h(t)`.
    pub fn residual(&self, t: f64) -> Result<f64, GermError> {
        let pt = self.germ.p_hat(t)?;
        Ok(self.h(pt)? + self.germ.r_hat(t)? - self.h(t)?)
    }
}
