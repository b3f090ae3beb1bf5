//! Per-viewpoint orchestration: local mapping, hypothesis generation, and a
//! fixed budget of scored pairs under the configured order rule.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::config::SchemeConfig;
use crate::environment::{Observation, OdometryMeasurement, SensorModel};
use crate::geometry::Pose2;
use crate::global_map::GlobalMap;
use crate::hypothesis::{best_hypothesis, generate_hypotheses, GenerationStats, Hypothesis, HypothesisId};
use crate::local_map::LocalMap;
use crate::preemption::SchemeState;

/// What one call to [`Relocalizer::step`] did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepReport {
    pub viewpoint: u32,
    pub new_features: usize,
    pub new_hypotheses: usize,
    /// Budget slots used: `budget` once any hypothesis exists, else 0.
    pub consumed: usize,
    pub scored: usize,
    pub skipped: usize,
    pub inliers: usize,
    /// Largest pair-memory size seen during the viewpoint.
    pub pair_memory_peak: usize,
    pub generation: GenerationStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub pose: Pose2,
    pub psi: Pose2,
    pub hypothesis: HypothesisId,
    /// Inlier ratio of the selected hypothesis; 0 when unscored.
    pub confidence: f64,
}

#[derive(Debug, Clone)]
pub struct Relocalizer {
    config: SchemeConfig,
    map: Arc<GlobalMap>,
    local: LocalMap,
    hypotheses: Vec<Hypothesis>,
    scheme: SchemeState,
    viewpoint: u32,
    next_id: u32,
    rng: ChaCha8Rng,
}

impl Relocalizer {
    pub fn new(config: SchemeConfig, map: Arc<GlobalMap>, sensor: SensorModel, rng: ChaCha8Rng) -> Self {
        let scheme = SchemeState::new(config.scheme, config.groups);
        Self {
            config,
            map,
            local: LocalMap::new(sensor),
            hypotheses: Vec::new(),
            scheme,
            viewpoint: 0,
            next_id: 0,
            rng,
        }
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn local_map(&self) -> &LocalMap {
        &self.local
    }

    pub fn global_map(&self) -> &GlobalMap {
        &self.map
    }

    /// Every hypothesis ever generated, indexed by id.
    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn live_hypotheses(&self) -> usize {
        self.hypotheses.iter().filter(|h| !h.retired).count()
    }

    pub fn scheme_state(&self) -> &SchemeState {
        &self.scheme
    }

    pub fn viewpoint(&self) -> u32 {
        self.viewpoint
    }

    pub fn step(&mut self, odo: &OdometryMeasurement, obs: &[Observation]) -> StepReport {
        self.step_with(odo, obs, |_, _| {})
    }

    /// Like [`step`](Self::step), calling `on_pair` after each scored pair
    /// with the pair-memory size and the scored hypothesis.
    pub fn step_with(
        &mut self,
        odo: &OdometryMeasurement,
        obs: &[Observation],
        mut on_pair: impl FnMut(usize, &Hypothesis),
    ) -> StepReport {
        self.viewpoint += 1;
        let mut report = StepReport {
            viewpoint: self.viewpoint,
            ..StepReport::default()
        };

        self.local.update(odo, obs);
        let new_features = self.local.new_feature_ids().to_vec();
        report.new_features = new_features.len();

        let limits = self.config.generation_limits();
        let first_new = self.hypotheses.len();
        for &f in &new_features {
            let born = generate_hypotheses(
                &self.local,
                &self.map,
                f,
                &limits,
                &mut self.next_id,
                self.viewpoint,
                &mut self.rng,
                &mut report.generation,
            );
            self.hypotheses.extend(born);
        }
        let new_ids: Vec<HypothesisId> = self.hypotheses[first_new..].iter().map(|h| h.id).collect();
        report.new_hypotheses = new_ids.len();

        self.scheme
            .begin_viewpoint(&new_features, &new_ids, &self.hypotheses, &self.config, &mut self.rng);

        if self.hypotheses.is_empty() || self.local.is_empty() {
            return report;
        }
        for _ in 0..self.config.budget {
            report.consumed += 1;
            let next = self
                .scheme
                .next_pair(&self.hypotheses, &self.local, &self.map, &self.config, &mut self.rng);
            let Some((f, h)) = next else {
                report.skipped += 1;
                continue;
            };
            let hyp = &mut self.hypotheses[h.index()];
            if hyp.score(self.local.position(f), &self.map, self.config.gate) {
                report.inliers += 1;
            }
            self.scheme.record(f, hyp, &self.config);
            report.scored += 1;
            let memory = self.scheme.pair_memory_len();
            report.pair_memory_peak = report.pair_memory_peak.max(memory);
            on_pair(memory, hyp);
        }
        report
    }

    /// Current global pose: the preferred hypothesis composed with the local
    /// robot pose. `None` until a hypothesis exists.
    pub fn estimate(&self) -> Option<Estimate> {
        let best = best_hypothesis(&self.hypotheses, self.config.q_min)?;
        Some(Estimate {
            pose: best.psi.compose(&self.local.robot_pose()),
            psi: best.psi,
            hypothesis: best.id,
            confidence: best.ratio().unwrap_or(0.0),
        })
    }
}
