//! End-to-end check of a characteristic pair: analytic scenario, sphere
//! realization, simulated detection on the annulus, and cross-validation.

use serde::Serialize;
use thiserror::Error;

use crate::annulus::{detect_sparkling_connections, AnnulusError, AnnulusField, LoopPoint};
use crate::circle::{CharacteristicPair, CircleError};
use crate::realization::{read_back, realize_sphere, validate_skeleton, SphereRealization};
use crate::unfolding::{self, ModelUnfolding, OrderReport, Scenario, UnfoldingError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Circle(#[from] CircleError),
    #[error(transparent)]
    Unfolding(#[from] UnfoldingError),
    #[error(transparent)]
    Annulus(#[from] AnnulusError),
}

impl PipelineError {
    /// 1 for invalid input, 2 for numerical failure, 3 for a violated invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Circle(_) => 1,
            PipelineError::Unfolding(
                UnfoldingError::SynchronizedInput { .. }
                | UnfoldingError::InvalidModel(_)
                | UnfoldingError::NonpositiveEpsilon(_)
                | UnfoldingError::PivotOutOfRange { .. },
            ) => 1,
            PipelineError::Unfolding(UnfoldingError::InvariantViolation { .. }) => 3,
            PipelineError::Annulus(AnnulusError::InvalidField(_) | AnnulusError::WrongLoop { .. }) => 1,
            _ => 2,
        }
    }
}

/// A simulated connection for the channel `(k, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelDetection {
    pub k: usize,
    pub m: usize,
    pub n: i64,
    pub epsilon: f64,
}

/// Grid size keeping the detection function steps near 0.3 on
/// `[eps_lo, eps_hi]`, where it grows like `pi / sqrt(eps)`.
pub fn auto_grid(eps_lo: f64, eps_hi: f64) -> usize {
    let span = 1.0 / eps_lo.sqrt() - 1.0 / eps_hi.sqrt();
    ((std::f64::consts::PI * span / 0.3).ceil() as usize + 2).max(16)
}

/// Runs the detector on every channel of the annulus. `minus_shift` is
/// subtracted from the minus-side angles, matching a shifted scenario.
pub fn detect_channels(
    annulus: &crate::realization::AnnulusDescriptor,
    minus_shift: f64,
    eps_range: (f64, f64),
    grid: usize,
) -> Result<Vec<ChannelDetection>, AnnulusError> {
    let template = AnnulusField::new(eps_range.1).with_coefficient(annulus.a_coeff);
    let mut out = Vec::new();
    for (k, &plus) in annulus.plus_angles.iter().enumerate() {
        for (m, &minus) in annulus.minus_angles.iter().enumerate() {
            let found = detect_sparkling_connections(
                &template,
                LoopPoint::minus(minus - minus_shift),
                LoopPoint::plus(plus),
                eps_range,
                grid,
            )?;
            out.extend(found.into_iter().map(|d| ChannelDetection {
                k,
                m,
                n: d.n,
                epsilon: d.epsilon,
            }));
        }
    }
    out.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon).then(a.n.cmp(&b.n)));
    Ok(out)
}

/// One analytic event next to its simulated counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossCheck {
    pub k: usize,
    pub m: usize,
    pub n: i64,
    pub epsilon_analytic: f64,
    pub epsilon_detected: Option<f64>,
    pub rel_err: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineOptions {
    pub n_lo: i64,
    pub n_hi: i64,
    /// Relative error accepted between analytic and simulated roots.
    pub rel_tol: f64,
    /// Detection grid; chosen from the range when unset.
    pub grid: Option<usize>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            n_lo: 5,
            n_hi: 20,
            rel_tol: 1e-6,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RealizationVerdict {
    pub skeletons_valid: bool,
    pub read_back_matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub options: PipelineOptions,
    pub minus_shift: f64,
    pub eps_range: (f64, f64),
    pub grid: usize,
    pub events: Vec<CrossCheck>,
    /// Detections with a winding in range but no analytic partner.
    pub unmatched_detections: usize,
    pub max_rel_err: f64,
    pub order: OrderReport,
    pub realization: RealizationVerdict,
    pub passed: bool,
}

fn realization_verdict(pair: &CharacteristicPair<f64>, sphere: &SphereRealization) -> RealizationVerdict {
    let skeletons_valid = validate_skeleton(&sphere.disc_minus).passed() && validate_skeleton(&sphere.disc_plus).passed();
    let read_back_matches = read_back(&sphere.disc_minus).ok().as_ref() == Some(&pair.minus)
        && read_back(&sphere.disc_plus).ok().as_ref() == Some(&pair.plus);
    RealizationVerdict {
        skeletons_valid,
        read_back_matches,
    }
}

/// Scenario, realization, detection and comparison for windings
/// `n_lo..=n_hi` on the model with `a = 0` and base points `±1`.
pub fn run_pipeline(pair: &CharacteristicPair<f64>, options: &PipelineOptions) -> Result<PipelineReport, PipelineError> {
    let sphere = realize_sphere(pair)?;
    let model = ModelUnfolding::standard(sphere.annulus.a_coeff);
    let scenario: Scenario = unfolding::scenario(&model, pair, options.n_lo, options.n_hi)?;
    let order = scenario.check_order();
    let realization = realization_verdict(pair, &sphere);

    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for e in scenario.events() {
        lo = lo.min(e.epsilon);
        hi = hi.max(e.epsilon);
    }
    let mut events = Vec::with_capacity(scenario.events().len());
    let (mut eps_range, mut grid, mut unmatched, mut max_rel_err) = ((0.0, 0.0), 0, 0, 0.0_f64);
    if !scenario.events().is_empty() {
        eps_range = (0.97 * lo, 1.03 * hi);
        grid = options.grid.unwrap_or_else(|| auto_grid(eps_range.0, eps_range.1));
        let detected = detect_channels(&sphere.annulus, scenario.minus_shift(), eps_range, grid)?;
        let in_range: Vec<&ChannelDetection> = detected
            .iter()
            .filter(|d| (options.n_lo..=options.n_hi).contains(&d.n))
            .collect();
        for e in scenario.events() {
            let hit = in_range.iter().find(|d| (d.k, d.m, d.n) == (e.k, e.m, e.n));
            let rel_err = hit.map(|d| ((d.epsilon - e.epsilon) / e.epsilon).abs());
            if let Some(r) = rel_err {
                max_rel_err = max_rel_err.max(r);
            }
            events.push(CrossCheck {
                k: e.k,
                m: e.m,
                n: e.n,
                epsilon_analytic: e.epsilon,
                epsilon_detected: hit.map(|d| d.epsilon),
                rel_err,
            });
        }
        unmatched = in_range.len().saturating_sub(events.iter().filter(|c| c.epsilon_detected.is_some()).count());
    }
    let all_matched = events.iter().all(|c| c.rel_err.is_some_and(|r| r < options.rel_tol));
    let passed = all_matched
        && unmatched == 0
        && order.passed()
        && realization.skeletons_valid
        && realization.read_back_matches;
    Ok(PipelineReport {
        options: *options,
        minus_shift: scenario.minus_shift(),
        eps_range,
        grid,
        events,
        unmatched_detections: unmatched,
        max_rel_err,
        order,
        realization,
        passed,
    })
}
