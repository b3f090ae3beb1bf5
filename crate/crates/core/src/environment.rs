//! Simulated ground truth: landmark world with churn, robot motion, and a
//! range-bearing sensor.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::geometry::{normalize_angle, Point2, Pose2, Rect};
use crate::quadtree::{Entry, Quadtree};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvironmentError {
    #[error("invalid world parameter `{field}`: {reason}")]
    InvalidParams {
        field: &'static str,
        reason: &'static str,
    },
}

fn invalid(field: &'static str, reason: &'static str) -> EnvironmentError {
    EnvironmentError::InvalidParams { field, reason }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldParams {
    pub bounds: Rect,
    pub mapped_region: Rect,
    pub landmark_count: usize,
    /// Probability that a landmark was relocated after the map was recorded.
    pub change_ratio: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            bounds: Rect::new(-400.0, -100.0, 400.0, 100.0),
            mapped_region: Rect::new(-400.0, -20.0, 400.0, 20.0),
            landmark_count: 20_000,
            change_ratio: 0.0,
        }
    }
}

impl WorldParams {
    /// A 200 m x 50 m world at the default landmark density.
    pub fn quick() -> Self {
        Self {
            bounds: Rect::new(-100.0, -25.0, 100.0, 25.0),
            mapped_region: Rect::new(-100.0, -5.0, 100.0, 5.0),
            landmark_count: 1_250,
            change_ratio: 0.0,
        }
    }

    pub fn with_change_ratio(mut self, change_ratio: f64) -> Self {
        self.change_ratio = change_ratio;
        self
    }

    pub fn validate(&self) -> Result<(), EnvironmentError> {
        self.bounds
            .validate()
            .map_err(|_| invalid("bounds", "must be a finite rectangle with positive area"))?;
        self.mapped_region
            .validate()
            .map_err(|_| invalid("mapped_region", "must be a finite rectangle with positive area"))?;
        if !self.bounds.contains_rect(&self.mapped_region) {
            return Err(invalid("mapped_region", "must lie inside bounds"));
        }
        if !(0.0..=1.0).contains(&self.change_ratio) {
            return Err(invalid("change_ratio", "must be in [0, 1]"));
        }
        if self.landmark_count > u32::MAX as usize {
            return Err(invalid("landmark_count", "exceeds u32 id space"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub id: u32,
    /// Position when the global map was recorded.
    pub prior: Point2,
    /// Position at run time.
    pub truth: Point2,
}

impl Landmark {
    pub fn moved(&self) -> bool {
        self.prior != self.truth
    }
}

/// Ground-truth world. Immutable once built.
#[derive(Debug, Clone)]
pub struct World {
    params: WorldParams,
    seed: u64,
    landmarks: Vec<Landmark>,
    truth_index: Quadtree,
}

impl World {
    /// Assembles a world from explicit landmarks, e.g. when loading a saved
    /// world. Prior positions must lie inside the bounds.
    pub fn from_landmarks(
        params: WorldParams,
        seed: u64,
        landmarks: Vec<Landmark>,
    ) -> Result<Self, EnvironmentError> {
        params.validate()?;
        if landmarks.iter().any(|l| !params.bounds.contains(l.prior)) {
            return Err(invalid("landmarks", "prior position outside bounds"));
        }
        if landmarks.iter().any(|l| !l.truth.is_finite()) {
            return Err(invalid("landmarks", "non-finite position"));
        }
        let mut truth_index = Quadtree::new(params.bounds);
        for l in &landmarks {
            truth_index.insert(l.truth, l.id);
        }
        Ok(Self {
            params: WorldParams {
                landmark_count: landmarks.len(),
                ..params
            },
            seed,
            landmarks,
            truth_index,
        })
    }

    pub fn params(&self) -> &WorldParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn bounds(&self) -> Rect {
        self.params.bounds
    }

    pub fn mapped_region(&self) -> Rect {
        self.params.mapped_region
    }

    pub fn change_ratio(&self) -> f64 {
        self.params.change_ratio
    }

    pub fn moved_count(&self) -> usize {
        self.landmarks.iter().filter(|l| l.moved()).count()
    }

    /// Prior positions inside the mapped region: the content of the global map.
    pub fn mapped_prior_landmarks(&self) -> Vec<Point2> {
        self.landmarks
            .iter()
            .map(|l| l.prior)
            .filter(|p| self.params.mapped_region.contains(*p))
            .collect()
    }

    pub(crate) fn truth_index(&self) -> &Quadtree {
        &self.truth_index
    }
}

/// Uniform landmarks over the bounds; each one independently relocated to a
/// fresh uniform position with probability `change_ratio`.
pub fn generate_world_with_rng<R: Rng + ?Sized>(
    seed_rng: &mut R,
    seed: u64,
    params: &WorldParams,
) -> Result<World, EnvironmentError> {
    params.validate()?;
    let bounds = params.bounds;
    let landmarks = (0..params.landmark_count as u32)
        .map(|id| {
            let prior = bounds.sample_uniform(seed_rng);
            let truth = if seed_rng.random::<f64>() < params.change_ratio {
                bounds.sample_uniform(seed_rng)
            } else {
                prior
            };
            Landmark { id, prior, truth }
        })
        .collect();
    World::from_landmarks(*params, seed, landmarks)
}

/// Convenience wrapper drawing from the world-generation stream of `seed`.
pub fn generate_world(seed: u64, params: &WorldParams) -> Result<World, EnvironmentError> {
    let mut rng = crate::rng::stream(seed, crate::rng::Stream::WorldGen);
    generate_world_with_rng(&mut rng, seed, params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub track_id: u32,
    pub range: f64,
    /// Relative to the robot heading, in `(-π, π]`.
    pub bearing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OdometryMeasurement {
    pub d_trans: f64,
    pub d_rot: f64,
}

impl OdometryMeasurement {
    /// Motion increment in the robot frame: drive `d_trans` along the heading,
    /// then turn by `d_rot`.
    pub fn as_pose(&self) -> Pose2 {
        Pose2::new(self.d_rot, Point2::new(self.d_trans, 0.0))
    }
}

/// Exact commanded motion between two viewpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub d_trans: f64,
    pub d_rot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub max_range: f64,
    pub range_sigma: f64,
    /// Radians.
    pub bearing_sigma: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            max_range: 10.0,
            range_sigma: 0.01,
            bearing_sigma: 0.5_f64.to_radians(),
        }
    }
}

impl SensorModel {
    pub fn noiseless(self) -> Self {
        Self {
            range_sigma: 0.0,
            bearing_sigma: 0.0,
            ..self
        }
    }

    /// One observation per true landmark within `max_range` of the pose,
    /// ordered by track id. The measured range is clamped to `[0, max_range]`.
    pub fn sense<R: Rng + ?Sized>(&self, world: &World, pose: &Pose2, rng: &mut R) -> Vec<Observation> {
        let center = pose.translation();
        let visible = world.truth_index().within(center, self.max_range);
        visible
            .iter()
            .map(|Entry { pos, id }| {
                let rel = *pos - center;
                let n_r: f64 = StandardNormal.sample(rng);
                let n_b: f64 = StandardNormal.sample(rng);
                let range = (rel.norm() + self.range_sigma * n_r).clamp(0.0, self.max_range);
                let bearing = normalize_angle(rel.angle() - pose.theta() + self.bearing_sigma * n_b);
                Observation {
                    track_id: *id,
                    range,
                    bearing,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryModel {
    /// Standard deviation as a fraction of the commanded magnitude.
    pub relative_sigma: f64,
}

impl Default for OdometryModel {
    fn default() -> Self {
        Self {
            relative_sigma: 0.01,
        }
    }
}

impl OdometryModel {
    /// Advances the true pose by the exact command and reports the command
    /// corrupted by multiplicative Gaussian noise.
    pub fn step<R: Rng + ?Sized>(
        &self,
        pose: &Pose2,
        command: Command,
        rng: &mut R,
    ) -> (Pose2, OdometryMeasurement) {
        let exact = OdometryMeasurement {
            d_trans: command.d_trans,
            d_rot: command.d_rot,
        };
        let next = pose.compose(&exact.as_pose());
        let n_t: f64 = StandardNormal.sample(rng);
        let n_r: f64 = StandardNormal.sample(rng);
        let odo = OdometryMeasurement {
            d_trans: command.d_trans * (1.0 + self.relative_sigma * n_t),
            d_rot: command.d_rot * (1.0 + self.relative_sigma * n_r),
        };
        (next, odo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryParams {
    pub start: Point2,
    pub goal: Point2,
    pub step: f64,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self {
            start: Point2::new(0.0, -100.0),
            goal: Point2::new(0.0, 100.0),
            step: 0.5,
        }
    }
}

impl TrajectoryParams {
    pub fn quick() -> Self {
        Self {
            start: Point2::new(0.0, -25.0),
            goal: Point2::new(0.0, 25.0),
            step: 0.5,
        }
    }

    /// Start pose, already facing the goal.
    pub fn start_pose(&self) -> Pose2 {
        let heading = if self.goal == self.start {
            0.0
        } else {
            (self.goal - self.start).angle()
        };
        Pose2::new(heading, self.start)
    }

    /// Straight-line drive from start to goal in `step`-sized moves. The last
    /// move is shortened when the distance is not a multiple of `step`.
    pub fn commands(&self) -> Vec<Command> {
        let dist = self.start.distance(self.goal);
        if !(self.step > 0.0) || dist == 0.0 {
            return Vec::new();
        }
        let full = libm::floor(dist / self.step + 1e-9) as usize;
        let mut out: Vec<Command> = (0..full)
            .map(|_| Command {
                d_trans: self.step,
                d_rot: 0.0,
            })
            .collect();
        let rest = dist - full as f64 * self.step;
        if rest > 1e-9 {
            out.push(Command {
                d_trans: rest,
                d_rot: 0.0,
            });
        }
        out
    }
}
