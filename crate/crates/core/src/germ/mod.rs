//! Parabolic germs `P(x) = x + x^2 + ...`, their normal-form coefficient,
//! rectifying chart, Abel-series conjugacy and the recovered generator.

mod abel;
mod chart;
mod generator;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::numeric::ode::{Dopri5, OdeError};
use crate::numeric::quad::{self, QuadError};
use crate::numeric::roots::{self, RootError};
use crate::numeric::fd;

pub use abel::{abel_solution, AbelSolution, OrbitTerm, RectifiedGerm, TSide};
pub use chart::{chart_derivative, rectify, unrectify};
pub use generator::{generator, Generator, GeneratorOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GermError {
    #[error("germ is not normalized: P''(0)/2 = {half_second}")]
    NotNormalized { half_second: f64 },
    #[error("point {x} is outside the chart domain")]
    OutOfDomain { x: f64 },
    #[error("chart is not monotone at {value}")]
    NonMonotone { value: f64 },
    #[error("remainder does not decay like t^-2: scaled maxima {early} then {late}")]
    DecayViolation { early: f64, late: f64 },
    #[error("orbit increment {increment} is below 0.5")]
    SlowOrbit { increment: f64 },
    #[error("series needs {needed} terms, budget is {budget}")]
    TruncationTooLong { needed: usize, budget: usize },
    #[error("time-one flow misses the germ by {error} at x = {x}")]
    FlowMismatch { x: f64, error: f64 },
    #[error("endpoints {a} and {b} lie on different sides of 0")]
    SignMismatch { a: f64, b: f64 },
    #[error("integration interval contains a zero of the field")]
    SingularIntegrand,
    #[error("inverse germ unavailable at {x}")]
    NoInverse { x: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Root(#[from] RootError),
}

/// A smooth vector field on a neighbourhood of `0` in `R`.
pub trait Field1d: Send + Sync {
    fn value(&self, x: f64) -> f64;
}

impl<F> Field1d for F
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

/// `u_a(x) = x^2 / (1 - a x)`, the model field with normal-form coefficient `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelField {
    pub a: f64,
}

impl Field1d for ModelField {
    fn value(&self, x: f64) -> f64 {
        x * x / (1.0 - self.a * x)
    }
}

type Map = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A germ of a map `P(x) = x + x^2 + ...` near `0`, given by an evaluator.
#[derive(Clone)]
pub struct ParabolicGerm {
    map: Map,
    inverse: Option<Map>,
    derivative: Option<Map>,
    domain_radius: f64,
    derivative_order: u32,
    accuracy: f64,
}

impl fmt::Debug for ParabolicGerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParabolicGerm")
            .field("domain_radius", &self.domain_radius)
            .field("derivative_order", &self.derivative_order)
            .field("explicit_inverse", &self.inverse.is_some())
            .field("explicit_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl ParabolicGerm {
    pub fn new<F>(map: F, domain_radius: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            map: Arc::new(map),
            inverse: None,
            derivative: None,
            domain_radius,
            derivative_order: 4,
            accuracy: 4.0 * f64::EPSILON,
        }
    }

    pub fn with_inverse<F>(mut self, inverse: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.inverse = Some(Arc::new(inverse));
        self
    }

    /// Relative accuracy of the evaluator; remainders below the matching
    /// noise level are treated as zero.
    pub fn with_accuracy(mut self, accuracy: f64) -> Self {
        self.accuracy = accuracy;
        self
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    pub fn with_derivative<F>(mut self, derivative: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    /// `P(x) = x / (1 - x)`, the time-one flow of `x^2`.
    pub fn moebius() -> Self {
        Self::new(|x| x / (1.0 - x), 0.5)
            .with_inverse(|x| x / (1.0 + x))
            .with_derivative(|x| 1.0 / ((1.0 - x) * (1.0 - x)))
    }

    /// Time-one flow of `field`, integrated numerically. The derivative uses
    /// the exact identity `P'(x) = u(P(x)) / u(x)`.
    pub fn time_one_flow(field: Arc<dyn Field1d>, domain_radius: f64) -> Self {
        let ode = Dopri5 {
            abs_tol: 1e-16,
            rel_tol: 1e-13,
            ..Dopri5::default()
        };
        let flow = |field: Arc<dyn Field1d>, time: f64| {
            move |x: f64| {
                if x == 0.0 {
                    return 0.0;
                }
                let f = |_t: f64, y: &[f64; 1]| [field.value(y[0])];
                ode.integrate(f, 0.0, [x], time).map(|y| y[0]).unwrap_or(f64::NAN)
            }
        };
        let forward = flow(field.clone(), 1.0);
        let backward = flow(field.clone(), -1.0);
        let forward_for_derivative = flow(field.clone(), 1.0);
        Self::new(forward, domain_radius)
            .with_inverse(backward)
            .with_derivative(move |x| {
                if x == 0.0 {
                    1.0
                } else {
                    field.value(forward_for_derivative(x)) / field.value(x)
                }
            })
            .with_accuracy(1e-12)
    }

    /// Time-one flow of the model field `u_a`.
    pub fn model_flow(a: f64) -> Self {
        Self::time_one_flow(Arc::new(ModelField { a }), 0.3)
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn derivative_order(&self) -> u32 {
        self.derivative_order
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.map)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match &self.derivative {
            Some(d) => d(x),
            None => {
                let h = 1e-3 * x.abs().max(1e-3 * self.domain_radius);
                fd::d1(&|s| (self.map)(s), x, h)
            }
        }
    }

    /// `P^{-1}(x)`, from the explicit inverse when one was supplied, else by
    /// safeguarded Newton on `P(y) = x`.
    pub fn inverse(&self, x: f64) -> Result<f64, GermError> {
        if let Some(inv) = &self.inverse {
            let y = inv(x);
            return if y.is_finite() {
                Ok(y)
            } else {
                Err(GermError::NoInverse { x })
            };
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        // P(y) - y ~ y^2, so the preimage sits within 2 x^2 below x.
        let spread = 2.0 * x * x + 4.0 * f64::EPSILON * x.abs();
        let (mut lo, mut hi) = (x - spread, x + spread);
        for _ in 0..60 {
            if self.eval(lo) < x && self.eval(hi) > x {
                break;
            }
            let w = hi - lo;
            lo -= w;
            hi += w;
        }
        let g = |y: f64| (self.eval(y) - x, self.derivative(y));
        roots::safeguarded_newton(g, lo, hi, 1e-16).map_err(|_| GermError::NoInverse { x })
    }

    /// Checks `P(0) = 0`, `P'(0) = 1`, `P''(0)/2 = 1` with finite differences.
    pub fn check_normalized(&self) -> Result<(), GermError> {
        let h = 1e-3 * self.domain_radius;
        let f = |s: f64| self.eval(s);
        let half_second = 0.5 * fd::d2(&f, 0.0, h);
        let first = fd::d1(&f, 0.0, h);
        if f(0.0).abs() > 1e-10 || (first - 1.0).abs() > 1e-6 || (half_second - 1.0).abs() > 1e-4 {
            return Err(GermError::NotNormalized { half_second });
        }
        Ok(())
    }
}

/// `a = P'''(0)/6 - 1`. The cubic coefficient is read from the odd part
/// `(P(h) - P(-h))/2 = h + (a+1) h^3 + O(h^5)` with Richardson extrapolation in
/// `h^2` over four halvings.
pub fn normal_form_coefficient(germ: &ParabolicGerm) -> Result<f64, GermError> {
    germ.check_normalized()?;
    let h0 = 0.05 * germ.domain_radius;
    const LEVELS: usize = 4;
    let mut table = [0.0; LEVELS];
    for (j, slot) in table.iter_mut().enumerate() {
        let h = h0 / (1 << j) as f64;
        let odd = 0.5 * (germ.eval(h) - germ.eval(-h));
        *slot = (odd - h) / (h * h * h);
    }
    for level in 1..LEVELS {
        let factor = 4f64.powi(level as i32);
        for j in (level..LEVELS).rev() {
            table[j] = (factor * table[j] - table[j - 1]) / (factor - 1.0);
        }
    }
    Ok(table[LEVELS - 1] - 1.0)
}

/// `T = \int_{b_ref}^{b} dx / u(x)` by adaptive quadrature.
pub fn time_function<U: Field1d + ?Sized>(u: &U, b_ref: f64, b: f64) -> Result<f64, GermError> {
    if b_ref == b {
        return Ok(0.0);
    }
    if b_ref == 0.0 || b == 0.0 {
        return Err(GermError::SingularIntegrand);
    }
    if (b_ref < 0.0) != (b < 0.0) {
        return Err(GermError::SignMismatch { a: b_ref, b });
    }
    let value = quad::integrate(|x| 1.0 / u.value(x), b_ref, b, 0.0, 1e-13).map_err(|e| match e {
        QuadError::NonFinite { .. } => GermError::SingularIntegrand,
        other => GermError::Quad(other),
    })?;
    Ok(value)
}
