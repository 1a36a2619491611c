//! Recovery of the generating vector field of a parabolic germ.
//!
//! With `H = id + h` solving the Abel equation on each side, `H o t` is a
//! Fatou coordinate of `P` and the generator is the push-forward of the unit
//! field: `u(x) = 1 / (t'(x) (1 + h'(t(x))))`.

use super::abel::{AbelSolution, AbelTarget, RectifiedGerm, TSide};
use super::chart::{chart_derivative, rectify};
use super::{Field1d, GermError, ParabolicGerm};
use crate::numeric::ode::Dopri5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorOptions {
    /// Target accuracy of the time-one flow of the generator against `P`.
    pub tol: f64,
    /// Inner radius of the verification annulus.
    pub inner: f64,
    /// Outer radius of the verification annulus.
    pub outer: f64,
    /// Radius from which the series bounds are established; at least `outer`.
    pub chart_radius: f64,
    /// Verify the time-one flow on the annulus before returning.
    pub verify: bool,
    pub verify_samples: usize,
    /// Maximum number of series terms.
    pub budget: usize,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            inner: 0.02,
            outer: 0.2,
            chart_radius: 0.25,
            verify: true,
            verify_samples: 12,
            budget: 1_000_000,
        }
    }
}

/// Generator of a germ, evaluated through the Abel series on each side.
#[derive(Debug, Clone)]
pub struct Generator {
    a: f64,
    rectified: RectifiedGerm,
    positive: AbelSolution,
    negative: AbelSolution,
    flow_error: Option<f64>,
}

/// Recovers the generator of `germ` with the default annulus.
pub fn generator(germ: &ParabolicGerm, tol: f64) -> Result<Generator, GermError> {
    Generator::recover(
        germ,
        &GeneratorOptions {
            tol,
            ..GeneratorOptions::default()
        },
    )
}

impl Generator {
    pub fn recover(germ: &ParabolicGerm, options: &GeneratorOptions) -> Result<Self, GermError> {
        let rectified = RectifiedGerm::from_germ(germ.clone())?;
        let a = rectified.a().expect("germ-based chart");
        let radius = options.chart_radius.max(options.outer);
        let solve = |side: TSide, x: f64| -> Result<AbelSolution, GermError> {
            let t0 = rectify(x, a)?;
            AbelSolution::solve(&rectified, side, t0, options.tol, AbelTarget::Derivative, options.budget)
        };
        let positive = solve(TSide::Positive, -radius)?;
        let negative = solve(TSide::Negative, radius)?;
        let mut out = Self {
            a,
            rectified,
            positive,
            negative,
            flow_error: None,
        };
        if options.verify {
            out.flow_error = Some(out.verify(germ, options)?);
        }
        Ok(out)
    }

    /// Sup distance between the time-one flow of `u` and `P` on the
    /// annulus `inner <= |x| <= outer`; fails with `FlowMismatch` above `tol`.
    fn verify(&self, germ: &ParabolicGerm, options: &GeneratorOptions) -> Result<f64, GermError> {
        let ode = Dopri5::with_tolerance(1e-13);
        let n = options.verify_samples.max(2);
        let mut worst: f64 = 0.0;
        for sign in [-1.0, 1.0] {
            for i in 0..n {
                let r = options.inner + (options.outer - options.inner) * i as f64 / (n - 1) as f64;
                let x = sign * r;
                let f = |_s: f64, y: &[f64; 1]| [self.value(y[0])];
                let y = ode.integrate(f, 0.0, [x], 1.0)?[0];
                let err = (y - germ.eval(x)).abs();
                if !(err <= options.tol) {
                    return Err(GermError::FlowMismatch { x, error: err });
                }
                worst = worst.max(err);
            }
        }
        Ok(worst)
    }

    pub fn normal_coefficient(&self) -> f64 {
        self.a
    }

    /// Sup error of the time-one flow measured during verification.
    pub fn flow_error(&self) -> Option<f64> {
        self.flow_error
    }

    pub fn abel(&self, side: TSide) -> &AbelSolution {
        match side {
            TSide::Positive => &self.positive,
            TSide::Negative => &self.negative,
        }
    }

    pub fn rectified(&self) -> &RectifiedGerm {
        &self.rectified
    }

    /// `u(x)`.
    pub fn try_value(&self, x: f64) -> Result<f64, GermError> {
        if x == 0.0 {
            return Ok(0.0);
        }
        let (_, dh) = self.abel(TSide::of_x(x)).eval_at_x(x)?;
        Ok(1.0 / (chart_derivative(x, self.a) * (1.0 + dh)))
    }

    /// Fatou coordinate `t(x) + h(t(x))`, on the side of `x`.
    pub fn fatou_coordinate(&self, x: f64) -> Result<f64, GermError> {
        let (h, _) = self.abel(TSide::of_x(x)).eval_at_x(x)?;
        Ok(rectify(x, self.a)? + h)
    }
}

impl Field1d for Generator {
    fn value(&self, x: f64) -> f64 {
        self.try_value(x).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::germ::ModelField;

    fn sup_error(u: &Generator, exact: impl Fn(f64) -> f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..=40 {
            let r = 0.02 + 0.18 * i as f64 / 40.0;
            for x in [r, -r] {
                worst = worst.max((u.value(x) - exact(x)).abs());
            }
        }
        worst
    }

    #[test]
    fn moebius_generator_is_x_squared() {
        let u = generator(&ParabolicGerm::moebius(), 1e-8).unwrap();
        assert!(sup_error(&u, |x| x * x) < 1e-8);
        assert!(u.flow_error().unwrap() < 1e-8);
    }

    #[test]
    fn model_flow_generator_matches_field() {
        let a = 0.4;
        let u = generator(&ParabolicGerm::model_flow(a), 1e-8).unwrap();
        let model = ModelField { a };
        assert!(sup_error(&u, |x| model.value(x)) < 1e-6);
    }

    #[test]
    fn perturbed_germ_flow_reproduces_germ() {
        let delta = 1e-3;
        let germ = ParabolicGerm::new(move |x| x / (1.0 - x) + delta * x.powi(4), 0.5)
            .with_derivative(move |x| 1.0 / ((1.0 - x) * (1.0 - x)) + 4.0 * delta * x.powi(3));
        let u = generator(&germ, 1e-9).unwrap();
        assert!(u.abel(TSide::Positive).truncation_index() > 0);
        assert!(u.flow_error().unwrap() <= 1e-9);
    }
}
