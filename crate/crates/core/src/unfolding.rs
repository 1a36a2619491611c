//! The model unfolding `u_eps(x) = (x^2 + eps) / (1 + a(eps) x)`: the passage
//! time `tau(eps)`, the time charts `T^±_eps`, roots of the connection
//! equation `tau_km(eps) + tau(eps) = n`, and the resulting scenario.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::circle::{circle_distance, difference_table, is_non_synchronized, CharacteristicPair, Coordinate};
use crate::numeric::roots::{self, RootError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnfoldingError {
    #[error("epsilon must be positive, got {0}")]
    NonpositiveEpsilon(f64),
    #[error("integration interval contains the zero of u_0")]
    SingularIntegrand,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("no root below eps_max = {eps_max} for n = {n}: left side exceeds n by {excess}")]
    NoBracket { n: i64, eps_max: f64, excess: f64 },
    #[error("{sign_changes} sign changes for n = {n}; eps_max is outside the monotone regime")]
    MultipleRoots { n: i64, sign_changes: usize },
    #[error("tau_{k}{m} vanishes and the base-point shift is disabled")]
    ZeroTau { k: usize, m: usize },
    #[error("pair is synchronized: tau{first:?} and tau{second:?} collide")]
    SynchronizedInput { first: (usize, usize), second: (usize, usize) },
    #[error("pivot ({i}, {j}) is out of range for K = {k}, M = {m}")]
    PivotOutOfRange { i: usize, j: usize, k: usize, m: usize },
    #[error("pivot event for winding {n} is missing from the scenario")]
    MissingPivot { n: i64 },
    #[error("scenario ordering violated: {interleaving} interleaving and {order} order failures")]
    InvariantViolation { interleaving: usize, order: usize },
    #[error(transparent)]
    Root(#[from] RootError),
}

/// Loop / side of the parabolic cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Side {
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+")]
    Plus,
}

type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Chart = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Normal-form family with base points `b_minus < 0 < b_plus`.
#[derive(Clone)]
pub struct ModelUnfolding {
    a: Coefficient,
    a_constant: Option<f64>,
    chart: Option<Chart>,
    b_minus: f64,
    b_plus: f64,
}

impl fmt::Debug for ModelUnfolding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelUnfolding")
            .field("a", &self.a_constant)
            .field("identity_chart", &self.chart.is_none())
            .field("b_minus", &self.b_minus)
            .field("b_plus", &self.b_plus)
            .finish()
    }
}

impl Default for ModelUnfolding {
    fn default() -> Self {
        Self::standard(0.0)
    }
}

impl ModelUnfolding {
    /// Constant coefficient `a`, identity chart, `b± = ±1`.
    pub fn standard(a: f64) -> Self {
        Self {
            a: Arc::new(move |_| a),
            a_constant: Some(a),
            chart: None,
            b_minus: -1.0,
            b_plus: 1.0,
        }
    }

    pub fn new(a: f64, b_minus: f64, b_plus: f64) -> Result<Self, UnfoldingError> {
        Self::standard(a).with_base_points(b_minus, b_plus)
    }

    pub fn with_base_points(mut self, b_minus: f64, b_plus: f64) -> Result<Self, UnfoldingError> {
        if !(b_minus < 0.0 && b_plus > 0.0) {
            return Err(UnfoldingError::InvalidModel(format!(
                "base points must satisfy b- < 0 < b+, got {b_minus}, {b_plus}"
            )));
        }
        self.b_minus = b_minus;
        self.b_plus = b_plus;
        Ok(self)
    }

    /// Replaces the constant coefficient by a function of `eps`.
    pub fn with_coefficient<F>(mut self, a: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.a = Arc::new(a);
        self.a_constant = None;
        self
    }

    /// Normalizing chart `(eps, b) -> x_eps(b)`; the identity when unset.
    pub fn with_chart<F>(mut self, chart: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.chart = Some(Arc::new(chart));
        self
    }

    pub fn b_minus(&self) -> f64 {
        self.b_minus
    }

    pub fn b_plus(&self) -> f64 {
        self.b_plus
    }

    pub fn base_point(&self, side: Side) -> f64 {
        match side {
            Side::Minus => self.b_minus,
            Side::Plus => self.b_plus,
        }
    }

    /// The constant coefficient, if the model has one.
    pub fn a_constant(&self) -> Option<f64> {
        self.a_constant
    }

    pub fn a(&self, eps: f64) -> f64 {
        (self.a)(eps)
    }

    pub fn x(&self, eps: f64, b: f64) -> f64 {
        match &self.chart {
            Some(c) => c(eps, b),
            None => b,
        }
    }

    /// `u_eps(x)`.
    pub fn field(&self, eps: f64, x: f64) -> f64 {
        (x * x + eps) / (1.0 + self.a(eps) * x)
    }

    /// `F(x) - F(x_ref)` for the antiderivative `F` of `1/u_eps`.
    fn primitive_difference(&self, eps: f64, x_ref: f64, x: f64) -> f64 {
        let a = self.a(eps);
        if eps == 0.0 {
            return (1.0 / x_ref - 1.0 / x) + a * (x / x_ref).abs().ln();
        }
        let s = eps.sqrt();
        let (p, q) = (x / s, x_ref / s);
        let angle = if p * q >= 0.0 {
            ((p - q) / (1.0 + p * q)).atan()
        } else {
            p.atan() - q.atan()
        };
        angle / s + 0.5 * a * ((x * x + eps) / (x_ref * x_ref + eps)).ln()
    }
}

/// `tau(eps) = T^-_eps(b^+)`, the time from `b^-` to `b^+`.
pub fn tau(model: &ModelUnfolding, eps: f64) -> Result<f64, UnfoldingError> {
    if !(eps > 0.0) {
        return Err(UnfoldingError::NonpositiveEpsilon(eps));
    }
    Ok(model.primitive_difference(eps, model.x(eps, model.b_minus), model.x(eps, model.b_plus)))
}

/// `T^±_eps(b)`, the time from the base point of `side` to `b`. At `eps = 0`
/// both points must lie on the same side of `0`.
pub fn time_function_eps(model: &ModelUnfolding, eps: f64, side: Side, b: f64) -> Result<f64, UnfoldingError> {
    if eps < 0.0 || !eps.is_finite() {
        return Err(UnfoldingError::NonpositiveEpsilon(eps));
    }
    let x_ref = model.x(eps, model.base_point(side));
    let x = model.x(eps, b);
    if eps == 0.0 && (x == 0.0 || (x < 0.0) != (x_ref < 0.0)) {
        return Err(UnfoldingError::SingularIntegrand);
    }
    Ok(model.primitive_difference(eps, x_ref, x))
}

/// Root in `(0, eps_max]` of `tau_km(eps) + tau(eps) = n`.
pub fn solve_connection<F>(model: &ModelUnfolding, tau_km: F, n: i64, eps_max: f64) -> Result<f64, UnfoldingError>
where
    F: Fn(f64) -> f64,
{
    if !(eps_max > 0.0) {
        return Err(UnfoldingError::NonpositiveEpsilon(eps_max));
    }
    let g = |eps: f64| -> f64 { tau_km(eps) + tau(model, eps).unwrap_or(f64::NAN) - n as f64 };
    let top = g(eps_max);
    if !(top < 0.0) {
        return Err(UnfoldingError::NoBracket {
            n,
            eps_max,
            excess: top,
        });
    }
    // Geometric scan downward: keep going past the first sign change to make
    // sure the left side stays above n.
    const RATIO: f64 = 0.8;
    const CONFIRM: usize = 16;
    let mut prev = (eps_max, top);
    let mut bracket = None;
    let mut sign_changes = 0usize;
    let mut positive_run = 0usize;
    let mut eps = eps_max;
    while positive_run < CONFIRM {
        eps *= RATIO;
        if eps < 1e-300 {
            break;
        }
        let v = g(eps);
        if !v.is_finite() {
            break;
        }
        if (v > 0.0) != (prev.1 > 0.0) {
            sign_changes += 1;
            if bracket.is_none() {
                bracket = Some((eps, prev.0));
            }
        }
        positive_run = if v > 0.0 { positive_run + 1 } else { 0 };
        prev = (eps, v);
    }
    if sign_changes > 1 {
        return Err(UnfoldingError::MultipleRoots { n, sign_changes });
    }
    let Some((lo, hi)) = bracket else {
        return Err(UnfoldingError::NoBracket {
            n,
            eps_max,
            excess: prev.1,
        });
    };
    Ok(roots::bisect(g, lo, hi, 0.0, 1e-12, 1e-10)?)
}

/// One sparkling-connection parameter `eps_kmn` (indices 0-based).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BifurcationEvent {
    pub k: usize,
    pub m: usize,
    pub n: i64,
    pub epsilon: f64,
}

/// `tau_km` as a function of `eps`; receives `(k, m, eps)`.
pub type Drift = Arc<dyn Fn(usize, usize, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ScenarioOptions {
    /// Upper end of the root search; when unset, the smallest `0.2 * 2^j`
    /// with `tau(eps_max) + 1 <= n_lo` is used.
    pub eps_max: Option<f64>,
    /// Shift `b^-` when some `tau_km` vanishes.
    pub auto_shift: bool,
    /// Distinctness tolerance for the synchronization gate and zero test.
    pub tolerance: f64,
    /// `tau_km(eps)`; constant `tau_km` when unset.
    pub drift: Option<Drift>,
    /// Fail when the ordering invariants do not hold.
    pub verify: bool,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            eps_max: None,
            auto_shift: true,
            tolerance: 1e-12,
            drift: None,
            verify: true,
        }
    }
}

impl fmt::Debug for ScenarioOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScenarioOptions")
            .field("eps_max", &self.eps_max)
            .field("auto_shift", &self.auto_shift)
            .field("tolerance", &self.tolerance)
            .field("drift", &self.drift.is_some())
            .field("verify", &self.verify)
            .finish()
    }
}

/// Amount subtracted from the minus-side coordinates when some `tau_km = 0`.
pub const MINUS_SHIFT_STEP: f64 = 1e-3;

/// Ordering checks on a scenario.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OrderReport {
    pub interleaving_violations: usize,
    pub order_violations: usize,
    pub max_residual: f64,
}

impl OrderReport {
    pub fn passed(&self) -> bool {
        self.interleaving_violations == 0 && self.order_violations == 0
    }
}

/// All events for the requested windings, sorted by decreasing `eps`.
#[derive(Debug, Clone)]
pub struct Scenario {
    events: Vec<BifurcationEvent>,
    pair: CharacteristicPair<f64>,
    dims: (usize, usize),
    n_range: (i64, i64),
    tau_table: Vec<f64>,
    minus_shift: f64,
    eps_max: f64,
    max_residual: f64,
}

impl Scenario {
    pub fn events(&self) -> &[BifurcationEvent] {
        &self.events
    }

    pub fn pair(&self) -> &CharacteristicPair<f64> {
        &self.pair
    }

    pub fn n_range(&self) -> (i64, i64) {
        self.n_range
    }

    /// `(K, M)`.
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// `tau_km` at `eps = 0` after any base-point shift.
    pub fn tau_km(&self, k: usize, m: usize) -> f64 {
        self.tau_table[k * self.dims.1 + m]
    }

    /// Total amount subtracted from the minus-side coordinates.
    pub fn minus_shift(&self) -> f64 {
        self.minus_shift
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn event(&self, k: usize, m: usize, n: i64) -> Option<&BifurcationEvent> {
        self.events.iter().find(|e| e.k == k && e.m == m && e.n == n)
    }

    /// Interleaving of consecutive windings and agreement of the within-`n`
    /// order with the order of `tau_km`.
    pub fn check_order(&self) -> OrderReport {
        let (lo, hi) = self.n_range;
        let mut interleaving = 0;
        let mut order = 0;
        let by_n = |n: i64| -> Vec<&BifurcationEvent> { self.events.iter().filter(|e| e.n == n).collect() };
        let mut expected: Vec<(usize, usize)> = (0..self.dims.0)
            .flat_map(|k| (0..self.dims.1).map(move |m| (k, m)))
            .collect();
        expected.sort_by(|a, b| self.tau_km(a.0, a.1).total_cmp(&self.tau_km(b.0, b.1)));
        for n in lo..=hi {
            let current = by_n(n);
            if n > lo {
                let prev = by_n(n - 1);
                let max_here = current.iter().map(|e| e.epsilon).fold(f64::NEG_INFINITY, f64::max);
                let min_prev = prev.iter().map(|e| e.epsilon).fold(f64::INFINITY, f64::min);
                if !(max_here < min_prev) {
                    interleaving += 1;
                }
            }
            let mut sorted = current.clone();
            sorted.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
            let got: Vec<(usize, usize)> = sorted.iter().map(|e| (e.k, e.m)).collect();
            if got != expected {
                order += 1;
            }
        }
        OrderReport {
            interleaving_violations: interleaving,
            order_violations: order,
            max_residual: self.max_residual,
        }
    }
}

/// Scenario for windings `n_lo..=n_hi` with default options.
pub fn scenario(
    model: &ModelUnfolding,
    pair: &CharacteristicPair<f64>,
    n_lo: i64,
    n_hi: i64,
) -> Result<Scenario, UnfoldingError> {
    scenario_with(model, pair, n_lo, n_hi, &ScenarioOptions::default())
}

/// Smallest `0.2 * 2^j` with `tau(eps_max) + 1 <= n`.
pub fn default_eps_max(model: &ModelUnfolding, n: i64) -> Result<f64, UnfoldingError> {
    let mut eps = 0.2;
    for _ in 0..64 {
        if tau(model, eps)? + 1.0 <= n as f64 {
            return Ok(eps);
        }
        eps *= 2.0;
    }
    Err(UnfoldingError::NoBracket {
        n,
        eps_max: eps,
        excess: tau(model, eps)? + 1.0 - n as f64,
    })
}

pub fn scenario_with(
    model: &ModelUnfolding,
    pair: &CharacteristicPair<f64>,
    n_lo: i64,
    n_hi: i64,
    options: &ScenarioOptions,
) -> Result<Scenario, UnfoldingError> {
    let verdict = is_non_synchronized(pair, options.tolerance);
    if let Some((first, second)) = verdict.witness {
        return Err(UnfoldingError::SynchronizedInput { first, second });
    }
    let (k_dim, m_dim) = pair.sizes();
    let table = difference_table(pair);
    let mut tau_table: Vec<f64> = table.iter().map(|(_, v)| v).collect();
    let mut minus_shift = 0.0;
    if options.drift.is_none() {
        for _ in 0..1000 {
            let zero = table
                .iter()
                .zip(&tau_table)
                .find(|(_, &v)| circle_distance(v, 0.0) <= options.tolerance)
                .map(|(((k, m), _), _)| (k, m));
            let Some((k, m)) = zero else { break };
            if !options.auto_shift {
                return Err(UnfoldingError::ZeroTau { k, m });
            }
            minus_shift += MINUS_SHIFT_STEP;
            for v in tau_table.iter_mut() {
                *v = (*v + MINUS_SHIFT_STEP).frac();
            }
        }
    }
    let eps_max = match options.eps_max {
        Some(e) => e,
        None => default_eps_max(model, n_lo)?,
    };

    let mut jobs = Vec::new();
    for n in n_lo..=n_hi {
        for k in 0..k_dim {
            for m in 0..m_dim {
                jobs.push((k, m, n));
            }
        }
    }
    let results: Result<Vec<(BifurcationEvent, f64)>, UnfoldingError> = jobs
        .par_iter()
        .map(|&(k, m, n)| {
            let base = tau_table[k * m_dim + m];
            let f = |eps: f64| match &options.drift {
                Some(d) => d(k, m, eps),
                None => base,
            };
            let epsilon = solve_connection(model, f, n, eps_max)?;
            let residual = (f(epsilon) + tau(model, epsilon)? - n as f64).abs();
            Ok((BifurcationEvent { k, m, n, epsilon }, residual))
        })
        .collect();
    let results = results?;
    let max_residual = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut events: Vec<BifurcationEvent> = results.into_iter().map(|r| r.0).collect();
    sort_events(&mut events);

    if let Some(d) = &options.drift {
        for (i, v) in tau_table.iter_mut().enumerate() {
            *v = d(i / m_dim.max(1), i % m_dim.max(1), 0.0);
        }
    }

    let out = Scenario {
        events,
        pair: pair.clone(),
        dims: (k_dim, m_dim),
        n_range: (n_lo, n_hi),
        tau_table,
        minus_shift,
        eps_max,
        max_residual,
    };
    if options.verify {
        let report = out.check_order();
        if !report.passed() {
            return Err(UnfoldingError::InvariantViolation {
                interleaving: report.interleaving_violations,
                order: report.order_violations,
            });
        }
    }
    Ok(out)
}

fn sort_events(events: &mut [BifurcationEvent]) {
    events.sort_by(|a, b| {
        b.epsilon
            .total_cmp(&a.epsilon)
            .then(a.n.cmp(&b.n))
            .then(a.k.cmp(&b.k))
            .then(a.m.cmp(&b.m))
    });
}

/// Relabels windings: `eps_kmn` becomes `km(n+N)` when `eps_kmn < eps_ijn`
/// and `km(n+N-1)` otherwise. Parameter values do not change.
pub fn renumber_cyclic_shift(scenario: &Scenario, pivot: (usize, usize), shift: i64) -> Result<Scenario, UnfoldingError> {
    let (k_dim, m_dim) = scenario.dims;
    let (i, j) = pivot;
    if i >= k_dim || j >= m_dim {
        return Err(UnfoldingError::PivotOutOfRange {
            i,
            j,
            k: k_dim,
            m: m_dim,
        });
    }
    let mut events = Vec::with_capacity(scenario.events.len());
    for e in &scenario.events {
        let p = scenario.event(i, j, e.n).ok_or(UnfoldingError::MissingPivot { n: e.n })?;
        let n = if e.epsilon < p.epsilon { e.n + shift } else { e.n + shift - 1 };
        events.push(BifurcationEvent { n, ..*e });
    }
    sort_events(&mut events);
    let lo = events.iter().map(|e| e.n).min().unwrap_or(scenario.n_range.0);
    let hi = events.iter().map(|e| e.n).max().unwrap_or(scenario.n_range.1);
    Ok(Scenario {
        events,
        n_range: (lo, hi),
        ..scenario.clone()
    })
}

/// Searches for a pivot and shift `N` whose cyclic renumbering of `old`
/// reproduces the labels of `new`. Events are matched by `(k, m)` and
/// parameter value within relative tolerance `rel_tol`; every event of `old`
/// must have a counterpart in `new`.
pub fn find_cyclic_shift(old: &Scenario, new: &Scenario, rel_tol: f64) -> Option<((usize, usize), i64)> {
    let counterpart = |e: &BifurcationEvent| {
        new.events
            .iter()
            .find(|f| f.k == e.k && f.m == e.m && (f.epsilon - e.epsilon).abs() <= rel_tol * e.epsilon)
    };
    let first = old.events.first()?;
    let d = counterpart(first)?.n - first.n;
    let (k_dim, m_dim) = old.dims;
    for shift in [d, d + 1] {
        for i in 0..k_dim {
            for j in 0..m_dim {
                let Ok(relabeled) = renumber_cyclic_shift(old, (i, j), shift) else {
                    continue;
                };
                let all = relabeled
                    .events
                    .iter()
                    .all(|e| counterpart(e).is_some_and(|f| f.n == e.n));
                if all {
                    return Some(((i, j), shift));
                }
            }
        }
    }
    None
}
