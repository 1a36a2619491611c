//! Direct simulation of the model annulus flow around the parabolic cycle.
//!
//! State `(alpha, x)` with `alpha' = 1` and `x' = u_eps(x) / (2 pi)`, so the
//! first-return map to the cross-section `Gamma = {alpha = 0 mod 2 pi}` is the
//! time-one flow of `u_eps`. The transversal loops are `C- = {x = -1}` and
//! `C+ = {x = 1}`; their intersections with `Gamma` are the base points
//! `b± = ±1`. A point on a loop is given by its angle `theta` in turns,
//! measured against the flow: it sits at `alpha = -2 pi theta`.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::circle::Coordinate;
use crate::numeric::ode::{Direction, Dopri5, Level, OdeError, Outcome};
use crate::numeric::roots::{self, RootError};
use crate::unfolding::{self, ModelUnfolding, Side, UnfoldingError};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnulusError {
    #[error("orbit from {start:?} never crossed the cross-section")]
    NoCrossing { start: LoopPoint },
    #[error("orbit is trapped near the cycle at x = {x} (eps = {eps})")]
    Stuck { eps: f64, x: f64 },
    #[error("grid too coarse near eps = {eps}: detection function jumps by {jump}")]
    GridTooCoarse { eps: f64, jump: f64 },
    #[error("expected a point on {expected:?}")]
    WrongLoop { expected: Side },
    #[error("invalid annulus field: {0}")]
    InvalidField(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Unfolding(#[from] UnfoldingError),
    #[error(transparent)]
    Root(#[from] RootError),
}

/// The suspension flow for one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusField {
    pub eps: f64,
    pub a_coeff: f64,
    pub tolerance: f64,
}

impl AnnulusField {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            a_coeff: 0.0,
            tolerance: 1e-12,
        }
    }

    pub fn with_coefficient(mut self, a: f64) -> Self {
        self.a_coeff = a;
        self
    }

    pub fn at(&self, eps: f64) -> Self {
        Self { eps, ..*self }
    }

    fn check(&self) -> Result<(), AnnulusError> {
        if !(self.a_coeff.abs() < 1.0) {
            return Err(AnnulusError::InvalidField(format!(
                "|a| must be below 1 so that 1 + a x > 0 on the annulus, got {}",
                self.a_coeff
            )));
        }
        if !self.eps.is_finite() {
            return Err(AnnulusError::InvalidField("eps must be finite".into()));
        }
        Ok(())
    }

    /// The unfolding whose time charts give the canonical coordinates.
    pub fn model(&self) -> ModelUnfolding {
        ModelUnfolding::standard(self.a_coeff)
    }

    fn u(&self, x: f64) -> f64 {
        (x * x + self.eps) / (1.0 + self.a_coeff * x)
    }

    fn rhs(&self) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
        move |_t, y| [1.0, self.u(y[1]) / TWO_PI]
    }

    fn ode(&self) -> Dopri5 {
        Dopri5::with_tolerance(self.tolerance)
    }
}

/// A point on one of the transversal loops.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LoopPoint {
    #[serde(rename = "loop")]
    pub side: Side,
    /// Turns in `[0, 1)`.
    pub angle: f64,
}

impl LoopPoint {
    pub fn new(side: Side, angle: f64) -> Self {
        Self {
            side,
            angle: angle.frac(),
        }
    }

    pub fn minus(angle: f64) -> Self {
        Self::new(Side::Minus, angle)
    }

    pub fn plus(angle: f64) -> Self {
        Self::new(Side::Plus, angle)
    }

    fn alpha(&self) -> f64 {
        -TWO_PI * self.angle
    }

    fn loop_x(&self) -> f64 {
        match self.side {
            Side::Minus => -1.0,
            Side::Plus => 1.0,
        }
    }
}

/// `phi = T^±_eps(b) mod 1` at a loop point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CanonicalCoordinate {
    #[serde(rename = "loop")]
    pub side: Side,
    pub phi: f64,
    /// `T^±_eps(b)` before reduction mod 1.
    pub time: f64,
}

/// Coordinate `x` where the orbit through `start` first meets `Gamma`:
/// forward from `C-`, backward from `C+`.
pub fn first_hit(field: &AnnulusField, start: LoopPoint) -> Result<f64, AnnulusError> {
    field.check()?;
    if start.angle == 0.0 {
        return Ok(start.loop_x());
    }
    let alpha0 = start.alpha();
    let (target, end, direction) = match start.side {
        Side::Minus => (0.0, alpha0 + 2.0 * TWO_PI, Direction::Rising),
        Side::Plus => (-TWO_PI, alpha0 - 2.0 * TWO_PI, Direction::Falling),
    };
    let event = Level {
        index: 0,
        level: target,
    };
    match field
        .ode()
        .integrate_until(field.rhs(), alpha0, [alpha0, start.loop_x()], end, &event, direction)?
    {
        Outcome::Event(c) => Ok(c.y[1]),
        Outcome::Reached { .. } => Err(AnnulusError::NoCrossing { start }),
    }
}

/// Canonical coordinate of a loop point.
pub fn canonical_coordinate(field: &AnnulusField, p: LoopPoint) -> Result<CanonicalCoordinate, AnnulusError> {
    let b = first_hit(field, p)?;
    let time = unfolding::time_function_eps(&field.model(), field.eps.max(0.0), p.side, b)?;
    Ok(CanonicalCoordinate {
        side: p.side,
        phi: time.frac(),
        time,
    })
}

/// Passage of an orbit from `C-` to `C+`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Transit {
    pub landing: LoopPoint,
    /// `alpha` at the landing point.
    pub alpha_end: f64,
    /// Elapsed angle in turns.
    pub turns: f64,
}

/// `Delta_eps`: follows the orbit from `a` on `C-` to its first crossing of `C+`.
pub fn transition_map(field: &AnnulusField, a: LoopPoint) -> Result<Transit, AnnulusError> {
    field.check()?;
    if a.side != Side::Minus {
        return Err(AnnulusError::WrongLoop { expected: Side::Minus });
    }
    let alpha0 = a.alpha();
    let ode = field.ode();
    if field.eps < 0.0 {
        return Err(AnnulusError::Stuck {
            eps: field.eps,
            x: -(-field.eps).sqrt(),
        });
    }
    if field.eps == 0.0 {
        // Asymptotic to the cycle; integrate until |x| < 1e-6 and report.
        let event = Level { index: 1, level: -1e-6 };
        let out = ode.integrate_until(field.rhs(), alpha0, [alpha0, -1.0], alpha0 + 1e9, &event, Direction::Rising)?;
        let x = match out {
            Outcome::Event(c) => c.y[1],
            Outcome::Reached { y, .. } => y[1],
        };
        return Err(AnnulusError::Stuck { eps: 0.0, x });
    }
    let total = unfolding::tau(&field.model(), field.eps)?;
    let end = alpha0 + TWO_PI * (2.0 * total + 10.0);
    let event = Level { index: 1, level: 1.0 };
    match ode.integrate_until(field.rhs(), alpha0, [alpha0, -1.0], end, &event, Direction::Rising)? {
        Outcome::Event(c) => {
            let alpha_end = c.y[0];
            Ok(Transit {
                landing: LoopPoint::plus(-alpha_end / TWO_PI),
                alpha_end,
                turns: (alpha_end - alpha0) / TWO_PI,
            })
        }
        Outcome::Reached { y, .. } => Err(AnnulusError::Stuck { eps: field.eps, x: y[1] }),
    }
}

/// First-return map to `Gamma`: `x -> x(2 pi)` from `(0, x)`.
pub fn return_map(field: &AnnulusField, x: f64) -> Result<f64, AnnulusError> {
    field.check()?;
    Ok(field.ode().integrate(field.rhs(), 0.0, [0.0, x], TWO_PI)?[1])
}

/// Fixed point of the return map with its multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub x: f64,
    pub multiplier: f64,
}

/// Fixed points of the return map in `[-0.9, 0.9]`, located by sign changes of
/// `R(x) - x` on a uniform grid.
pub fn return_map_fixed_points(field: &AnnulusField) -> Result<Vec<FixedPoint>, AnnulusError> {
    const GRID: usize = 361;
    let displacement = |x: f64| return_map(field, x).map(|y| y - x);
    let xs: Vec<f64> = (0..GRID).map(|i| -0.9 + 1.8 * i as f64 / (GRID - 1) as f64).collect();
    let values = xs
        .iter()
        .map(|&x| displacement(x))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for i in 0..GRID - 1 {
        // a zero on a node belongs to the interval it starts
        if values[i] == 0.0 || (values[i + 1] != 0.0 && (values[i] < 0.0) != (values[i + 1] < 0.0)) {
            let x = roots::bisect(
                |x| displacement(x).unwrap_or(f64::NAN),
                xs[i],
                xs[i + 1],
                1e-14,
                1e-13,
                f64::INFINITY,
            )?;
            let h = 1e-5;
            let multiplier = (return_map(field, x + h)? - return_map(field, x - h)?) / (2.0 * h);
            out.push(FixedPoint { x, multiplier });
        }
    }
    Ok(out)
}

/// A simulated sparkling connection for one pair of marked points.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Detection {
    pub n: i64,
    pub epsilon: f64,
}

/// Simulated `tau_km + tau(eps)` for the marked points `s_minus`, `s_plus`:
/// the canonical coordinates of both points and of the landing point of the
/// orbit from `s_minus`, lifted by the number of cross-section turns. Its
/// integer values are the sparkling connections.
pub fn connection_function(field: &AnnulusField, s_minus: LoopPoint, s_plus: LoopPoint) -> Result<f64, AnnulusError> {
    let phi_minus = canonical_coordinate(field, s_minus)?;
    let phi_plus = canonical_coordinate(field, s_plus)?;
    let transit = transition_map(field, s_minus)?;
    let q = transit.alpha_end / TWO_PI;
    let floor = q.floor();
    // landing time coordinate in (-1, 0], continuous with the turn count
    let back = TWO_PI * (q - floor);
    let landing_time = if back == 0.0 {
        0.0
    } else {
        let alpha = transit.alpha_end;
        let event = Level {
            index: 0,
            level: TWO_PI * floor,
        };
        let b = match field.ode().integrate_until(
            field.rhs(),
            alpha,
            [alpha, 1.0],
            alpha - 2.0 * TWO_PI,
            &event,
            Direction::Falling,
        )? {
            Outcome::Event(c) => c.y[1],
            Outcome::Reached { .. } => return Err(AnnulusError::NoCrossing { start: transit.landing }),
        };
        unfolding::time_function_eps(&field.model(), field.eps, Side::Plus, b)?
    };
    let passage = phi_minus.time + floor - landing_time;
    let tau_km = (phi_plus.phi - phi_minus.phi).frac();
    Ok(tau_km + passage)
}

/// Roots of the simulated connection equation for `eps` in `[eps_lo, eps_hi]`.
///
/// The detection function is sampled on `grid` points uniform in
/// `1/sqrt(eps)`, each integer crossing between neighbours is bisected, and
/// the roots are returned in decreasing `eps`.
pub fn detect_sparkling_connections(
    template: &AnnulusField,
    s_minus: LoopPoint,
    s_plus: LoopPoint,
    eps_range: (f64, f64),
    grid: usize,
) -> Result<Vec<Detection>, AnnulusError> {
    if s_minus.side != Side::Minus {
        return Err(AnnulusError::WrongLoop { expected: Side::Minus });
    }
    if s_plus.side != Side::Plus {
        return Err(AnnulusError::WrongLoop { expected: Side::Plus });
    }
    let (lo, hi) = eps_range;
    if !(lo > 0.0 && hi > lo) || grid < 2 {
        return Err(AnnulusError::InvalidField(format!(
            "need 0 < eps_lo < eps_hi and grid >= 2, got [{lo}, {hi}] with {grid} points"
        )));
    }
    let k_of = |eps: f64| connection_function(&template.at(eps), s_minus, s_plus);
    let (v_lo, v_hi) = (1.0 / hi.sqrt(), 1.0 / lo.sqrt());
    let eps_grid: Vec<f64> = (0..grid)
        .map(|i| {
            let v = v_lo + (v_hi - v_lo) * i as f64 / (grid - 1) as f64;
            let e = 1.0 / (v * v);
            if i == 0 {
                hi
            } else if i == grid - 1 {
                lo
            } else {
                e
            }
        })
        .collect();
    let values = eps_grid
        .par_iter()
        .map(|&e| k_of(e))
        .collect::<Result<Vec<f64>, _>>()?;

    let mut cells = Vec::new();
    for i in 0..grid - 1 {
        // eps decreases along the grid, the detection function increases
        let (k_big, k_small) = (values[i], values[i + 1]);
        let jump = k_small - k_big;
        if jump.abs() > 0.5 {
            return Err(AnnulusError::GridTooCoarse { eps: eps_grid[i], jump });
        }
        let (low, high) = (k_big.min(k_small), k_big.max(k_small));
        let mut n = low.ceil() as i64;
        if (n as f64) == low && i > 0 {
            n += 1;
        }
        while (n as f64) <= high {
            cells.push((n, eps_grid[i + 1], eps_grid[i], values[i + 1], values[i]));
            n += 1;
        }
    }
    let mut found = cells
        .par_iter()
        .map(|&(n, e_small, e_big, k_small, k_big)| {
            let target = n as f64;
            let epsilon = if k_small == target {
                e_small
            } else if k_big == target {
                e_big
            } else {
                roots::bisect(
                    |e| k_of(e).map(|v| v - target).unwrap_or(f64::NAN),
                    e_small,
                    e_big,
                    0.0,
                    1e-11,
                    f64::INFINITY,
                )?
            };
            Ok(Detection { n, epsilon })
        })
        .collect::<Result<Vec<Detection>, AnnulusError>>()?;
    found.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    found.dedup_by(|a, b| a.n == b.n && (a.epsilon - b.epsilon).abs() <= 1e-12 * b.epsilon);
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_on_section_is_immediate() {
        let f = AnnulusField::new(0.01);
        assert_eq!(first_hit(&f, LoopPoint::minus(0.0)).unwrap(), -1.0);
        assert_eq!(first_hit(&f, LoopPoint::plus(0.0)).unwrap(), 1.0);
    }

    #[test]
    fn half_turn_matches_closed_form() {
        // 0.1 tan(0.05 + atan(-10)): flow of x^2 + 0.01 for unit-time 1/2 from -1
        let b = first_hit(&AnnulusField::new(0.01), LoopPoint::minus(0.5)).unwrap();
        assert!((b - -0.663_146_161_114_131_7).abs() < 1e-10, "{b}");
    }

    #[test]
    fn parabolic_case_stays_on_its_side() {
        let b = first_hit(&AnnulusField::new(0.0), LoopPoint::minus(0.25)).unwrap();
        assert!(b > -1.0 && b < 0.0);
    }

    #[test]
    fn base_point_has_zero_coordinate() {
        let c = canonical_coordinate(&AnnulusField::new(0.05), LoopPoint::minus(0.0)).unwrap();
        assert_eq!(c.phi, 0.0);
    }

    #[test]
    fn canonical_coordinate_is_monotone_degree_one() {
        let f = AnnulusField::new(0.05);
        for side in [Side::Minus, Side::Plus] {
            let phis: Vec<f64> = (0..256)
                .map(|i| canonical_coordinate(&f, LoopPoint::new(side, i as f64 / 256.0)).unwrap().phi)
                .collect();
            let mut wraps = 0;
            for i in 0..256 {
                let step = phis[(i + 1) % 256] - phis[i];
                if step < 0.0 {
                    wraps += 1;
                }
            }
            assert_eq!(wraps, 1, "{side:?}");
        }
    }

    #[test]
    fn rotation_by_minus_tau() {
        for eps in [0.1, 0.01] {
            let f = AnnulusField::new(eps);
            let tau = unfolding::tau(&f.model(), eps).unwrap();
            for i in 0..8 {
                let a = LoopPoint::minus(i as f64 / 8.0 + 0.01);
                let before = canonical_coordinate(&f, a).unwrap().phi;
                let landing = transition_map(&f, a).unwrap().landing;
                let after = canonical_coordinate(&f, landing).unwrap().phi;
                let d = (after - before + tau).frac();
                assert!(d.min(1.0 - d) < 1e-7, "eps {eps} i {i} d {d}");
            }
        }
    }

    #[test]
    fn winding_count_tracks_tau() {
        let f = AnnulusField::new(0.01);
        let t = transition_map(&f, LoopPoint::minus(0.3)).unwrap();
        let tau = unfolding::tau(&f.model(), 0.01).unwrap();
        assert!((t.turns - tau).abs() < 1e-8);
    }

    #[test]
    fn parabolic_return_map_is_time_one_flow() {
        let f = AnnulusField::new(0.0);
        for i in 0..=19 {
            let x = -1.0 + 0.95 * i as f64 / 19.0;
            let y = return_map(&f, x).unwrap();
            assert!((y - x / (1.0 - x)).abs() < 1e-9, "{x}");
        }
    }

    #[test]
    fn twin_cycles_for_negative_eps() {
        let f = AnnulusField::new(-0.04);
        let fps = return_map_fixed_points(&f).unwrap();
        assert_eq!(fps.len(), 2);
        assert!((fps[0].x + 0.2).abs() < 1e-8);
        assert!((fps[1].x - 0.2).abs() < 1e-8);
        assert!(fps[0].multiplier < 1.0 && fps[1].multiplier > 1.0);
        // +-0.1 are scan nodes
        let fps = return_map_fixed_points(&AnnulusField::new(-0.01)).unwrap();
        assert_eq!(fps.len(), 2);
    }

    #[test]
    fn transit_errors() {
        assert!(matches!(
            transition_map(&AnnulusField::new(0.0), LoopPoint::minus(0.2)),
            Err(AnnulusError::Stuck { .. })
        ));
        assert!(matches!(
            transition_map(&AnnulusField::new(0.01), LoopPoint::plus(0.2)),
            Err(AnnulusError::WrongLoop { .. })
        ));
    }

    #[test]
    fn detection_matches_connection_roots() {
        let model = ModelUnfolding::default();
        let (theta_minus, theta_plus) = (0.1, 0.4);
        let tau_km = 0.3;
        let template = AnnulusField::new(0.1);
        let range = (0.02, 0.2);
        let found = detect_sparkling_connections(
            &template,
            LoopPoint::minus(theta_minus),
            LoopPoint::plus(theta_plus),
            range,
            64,
        )
        .unwrap();
        let tau_lo = unfolding::tau(&model, range.0).unwrap();
        let tau_hi = unfolding::tau(&model, range.1).unwrap();
        let expected = (tau_lo + tau_km).floor() as i64 - (tau_hi + tau_km).ceil() as i64 + 1;
        assert_eq!(found.len() as i64, expected);
        for d in &found {
            let analytic = unfolding::solve_connection(&model, |_| tau_km, d.n, 1.0).unwrap();
            assert!(((d.epsilon - analytic) / analytic).abs() < 1e-6, "{d:?} vs {analytic}");
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let r = detect_sparkling_connections(
            &AnnulusField::new(0.1),
            LoopPoint::minus(0.1),
            LoopPoint::plus(0.4),
            (0.001, 0.2),
            3,
        );
        assert!(matches!(r, Err(AnnulusError::GridTooCoarse { .. })));
    }
}
