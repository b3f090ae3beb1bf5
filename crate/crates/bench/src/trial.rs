//! One simulated relocation run from start to goal.

use std::sync::Arc;
use std::time::Instant;

use incransac::preemption::classify;
use incransac::rng::{stream, Stream};
use incransac::{
    generate_world, GlobalMap, OdometryModel, Pose2, Relocalizer, Scheme, SchemeConfig, SensorModel,
    TrajectoryParams, World, WorldParams,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
}

impl TrialError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        TrialError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub world: WorldParams,
    pub trajectory: TrajectoryParams,
    pub sensor: SensorModel,
    pub odometry: OdometryModel,
    pub scheme: SchemeConfig,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            world: WorldParams::default(),
            trajectory: TrajectoryParams::default(),
            sensor: SensorModel::default(),
            odometry: OdometryModel::default(),
            scheme: SchemeConfig::default(),
            seed: 1,
        }
    }
}

impl TrialConfig {
    /// Reduced world and trajectory for fast runs.
    pub fn quick() -> Self {
        Self {
            world: WorldParams::quick(),
            trajectory: TrajectoryParams::quick(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrialError> {
        self.world.validate().map_err(|e| match e {
            incransac::environment::EnvironmentError::InvalidParams { field, reason } => {
                TrialError::config(format!("world.{field}"), reason)
            }
        })?;
        self.scheme
            .validate()
            .map_err(|(field, reason)| TrialError::config(format!("scheme.{field}"), reason))?;
        let t = &self.trajectory;
        if !(t.step > 0.0) || !t.start.is_finite() || !t.goal.is_finite() {
            return Err(TrialError::config("trajectory", "step must be positive and endpoints finite"));
        }
        if !(self.sensor.max_range > 0.0) || self.sensor.range_sigma < 0.0 || self.sensor.bearing_sigma < 0.0 {
            return Err(TrialError::config("sensor", "range must be positive and sigmas non-negative"));
        }
        if !(self.odometry.relative_sigma >= 0.0) {
            return Err(TrialError::config("odometry.relative_sigma", "must be non-negative"));
        }
        Ok(())
    }
}

/// Per-viewpoint instrumentation. Everything except `step_nanos` is
/// deterministic in the trial seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointRecord {
    pub viewpoint: u32,
    pub new_features: usize,
    pub new_hypotheses: usize,
    pub consumed: usize,
    pub scored: usize,
    pub skipped: usize,
    pub inliers: usize,
    pub pair_memory_peak: usize,
    pub features: usize,
    pub hypotheses: usize,
    pub live_hypotheses: usize,
    pub best_ratio: Option<f64>,
    pub best_group: Option<usize>,
    pub error: Option<f64>,
    pub group_sizes: Vec<usize>,
    pub allocation: Vec<usize>,
    pub step_nanos: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub change_ratio: f64,
    pub scheme: Scheme,
    pub seed: u64,
    /// Distance between the estimated and true goal position; `None` when no
    /// estimate exists.
    pub error_at_goal: Option<f64>,
    pub heading_error: Option<f64>,
    pub features: usize,
    pub hypotheses: usize,
    pub live_hypotheses: usize,
    /// Hypotheses within 0.5 m / 1° of the true local-to-global transform.
    pub near_truth_hypotheses: usize,
    pub viewpoints: Vec<ViewpointRecord>,
}

impl TrialResult {
    /// Equality ignoring wall-clock timings.
    pub fn same_outcome(&self, other: &TrialResult) -> bool {
        let strip = |r: &TrialResult| {
            let mut r = r.clone();
            r.viewpoints.iter_mut().for_each(|v| v.step_nanos = 0);
            r
        };
        strip(self) == strip(other)
    }

    /// Error used for ranking; a missing estimate counts as infinitely bad.
    pub fn error_or_inf(&self) -> f64 {
        self.error_at_goal.unwrap_or(f64::INFINITY)
    }
}

pub fn build_world(cfg: &TrialConfig) -> Result<World, TrialError> {
    cfg.validate()?;
    generate_world(cfg.seed, &cfg.world).map_err(|e| TrialError::config("world", e.to_string()))
}

pub fn run_trial(cfg: &TrialConfig) -> Result<TrialResult, TrialError> {
    let world = build_world(cfg)?;
    run_trial_on_world(cfg, &world)
}

/// Runs the trajectory on an existing world, e.g. one loaded from disk.
pub fn run_trial_on_world(cfg: &TrialConfig, world: &World) -> Result<TrialResult, TrialError> {
    cfg.validate()?;
    let map = GlobalMap::new(world.mapped_prior_landmarks(), world.mapped_region())
        .map_err(|e| TrialError::config("world.mapped_region", e.to_string()))?;
    let map = Arc::new(map);

    let mut sensor_rng = stream(cfg.seed, Stream::Sensor);
    let mut odo_rng = stream(cfg.seed, Stream::Odometry);
    let scheme_rng = stream(cfg.seed, Stream::Scheme(cfg.scheme.scheme.stream_slot()));
    let mut reloc = Relocalizer::new(cfg.scheme.clone(), map, cfg.sensor, scheme_rng);

    let start = cfg.trajectory.start_pose();
    let mut pose = start;
    let mut viewpoints = Vec::new();

    let mut observe = |reloc: &mut Relocalizer, pose: &Pose2, odo: incransac::OdometryMeasurement| {
        let obs = cfg.sensor.sense(world, pose, &mut sensor_rng);
        let t0 = Instant::now();
        let report = reloc.step(&odo, &obs);
        let step_nanos = t0.elapsed().as_nanos() as u64;
        let est = reloc.estimate();
        let best = est.map(|e| &reloc.hypotheses()[e.hypothesis.index()]);
        let plan = reloc.scheme_state().plan().unwrap_or_default();
        ViewpointRecord {
            viewpoint: report.viewpoint,
            new_features: report.new_features,
            new_hypotheses: report.new_hypotheses,
            consumed: report.consumed,
            scored: report.scored,
            skipped: report.skipped,
            inliers: report.inliers,
            pair_memory_peak: report.pair_memory_peak,
            features: reloc.local_map().len(),
            hypotheses: reloc.hypotheses().len(),
            live_hypotheses: reloc.live_hypotheses(),
            best_ratio: best.and_then(|h| h.ratio()),
            best_group: best.map(|h| classify(h.s, h.q, cfg.scheme.groups)),
            error: est.map(|e| e.pose.translation().distance(pose.translation())),
            group_sizes: plan.sizes,
            allocation: plan.allocation,
            step_nanos,
        }
    };

    // First look from the start pose, then one per move.
    viewpoints.push(observe(&mut reloc, &pose, Default::default()));
    for cmd in cfg.trajectory.commands() {
        let (next, odo) = cfg.odometry.step(&pose, cmd, &mut odo_rng);
        pose = next;
        viewpoints.push(observe(&mut reloc, &pose, odo));
    }

    let estimate = reloc.estimate();
    let near_truth_hypotheses = reloc
        .hypotheses()
        .iter()
        .filter(|h| {
            let (dt, dr) = h.psi.error_to(&start);
            dt < 0.5 && dr < 1f64.to_radians()
        })
        .count();
    Ok(TrialResult {
        change_ratio: cfg.world.change_ratio,
        scheme: cfg.scheme.scheme,
        seed: cfg.seed,
        error_at_goal: estimate.map(|e| e.pose.translation().distance(pose.translation())),
        heading_error: estimate.map(|e| e.pose.error_to(&pose).1),
        features: reloc.local_map().len(),
        hypotheses: reloc.hypotheses().len(),
        live_hypotheses: reloc.live_hypotheses(),
        near_truth_hypotheses,
        viewpoints,
    })
}
