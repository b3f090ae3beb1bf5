//! Incremental local feature map built from scratch in the robot's own frame.
//!
//! Odometry dead-reckons the robot pose. Every observation is back-projected
//! from that pose; each feature keeps an inverse-trace weighted running mean
//! of its back-projections. Features are associated by sensor track id.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::environment::{Observation, OdometryMeasurement, SensorModel};
use crate::geometry::{Point2, Pose2, Rect};
use crate::quadtree::Quadtree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(pub u32);

impl FeatureId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LocalMapError {
    #[error("feature {0:?} does not exist")]
    UnknownFeature(FeatureId),
    #[error("feature {anchor:?} has {partners} covisible partners, need 2")]
    NotEnough { anchor: FeatureId, partners: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub id: FeatureId,
    pub track_id: u32,
    pub pos: Point2,
    pub obs_count: u32,
    weight: f64,
}

#[derive(Debug, Clone)]
pub struct LocalMap {
    robot: Pose2,
    features: Vec<Feature>,
    by_track: BTreeMap<u32, FeatureId>,
    // sorted, deduplicated partner lists
    covisibility: Vec<Vec<FeatureId>>,
    new_features: Vec<FeatureId>,
    index: Quadtree,
    sensor: SensorModel,
    viewpoints: u32,
    // grows monotonically; may be slightly loose after position updates
    extent: Option<Rect>,
}

impl Default for LocalMap {
    fn default() -> Self {
        Self::new(SensorModel::default())
    }
}

impl LocalMap {
    /// Empty map with the robot at the local origin. `sensor` supplies the
    /// noise levels used to weight observations.
    pub fn new(sensor: SensorModel) -> Self {
        Self {
            robot: Pose2::IDENTITY,
            features: Vec::new(),
            by_track: BTreeMap::new(),
            covisibility: Vec::new(),
            new_features: Vec::new(),
            index: Quadtree::new(Rect::new(-64.0, -64.0, 64.0, 64.0)),
            sensor,
            viewpoints: 0,
            extent: None,
        }
    }

    pub fn robot_pose(&self) -> Pose2 {
        self.robot
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, id: FeatureId) -> Option<&Feature> {
        self.features.get(id.index())
    }

    pub fn position(&self, id: FeatureId) -> Point2 {
        self.features[id.index()].pos
    }

    pub fn covisible(&self, id: FeatureId) -> &[FeatureId] {
        self.covisibility.get(id.index()).map_or(&[], Vec::as_slice)
    }

    /// Features first seen at the latest viewpoint.
    pub fn new_feature_ids(&self) -> &[FeatureId] {
        &self.new_features
    }

    pub fn viewpoints(&self) -> u32 {
        self.viewpoints
    }

    /// Rectangle enclosing every feature position the map has held.
    pub fn extent(&self) -> Option<Rect> {
        self.extent
    }

    /// Dead-reckons the robot with `odo`, then folds in this viewpoint's
    /// observations.
    pub fn update(&mut self, odo: &OdometryMeasurement, obs: &[Observation]) {
        self.new_features.clear();
        self.viewpoints += 1;
        self.robot = self.robot.compose(&odo.as_pose());

        let mut seen: Vec<FeatureId> = Vec::with_capacity(obs.len());
        for o in obs {
            let p = self.robot.apply(Point2::from_polar(o.range, o.bearing));
            let w = self.observation_weight(o.range);
            let id = match self.by_track.get(&o.track_id) {
                Some(&id) => {
                    let f = &mut self.features[id.index()];
                    let old = f.pos;
                    let total = f.weight + w;
                    f.pos = Point2::new(
                        (old.x * f.weight + p.x * w) / total,
                        (old.y * f.weight + p.y * w) / total,
                    );
                    f.weight = total;
                    f.obs_count += 1;
                    if f.pos != old {
                        let new_pos = f.pos;
                        self.index.remove(old, id.0);
                        self.index.insert(new_pos, id.0);
                    }
                    id
                }
                None => {
                    let id = FeatureId(self.features.len() as u32);
                    self.features.push(Feature {
                        id,
                        track_id: o.track_id,
                        pos: p,
                        obs_count: 1,
                        weight: w,
                    });
                    self.covisibility.push(Vec::new());
                    self.by_track.insert(o.track_id, id);
                    self.index.insert(p, id.0);
                    self.new_features.push(id);
                    id
                }
            };
            let pos = self.features[id.index()].pos;
            self.extent = Some(match self.extent {
                Some(r) => r.expanded_to(pos),
                None => Rect::new(pos.x, pos.y, pos.x, pos.y),
            });
            seen.push(id);
        }

        seen.sort_unstable();
        seen.dedup();
        for (i, &a) in seen.iter().enumerate() {
            for &b in &seen[i + 1..] {
                insert_sorted(&mut self.covisibility[a.index()], b);
                insert_sorted(&mut self.covisibility[b.index()], a);
            }
        }
    }

    /// `anchor` plus two distinct partners drawn uniformly from its
    /// covisibility set.
    pub fn covisible_triple<R: Rng + ?Sized>(
        &self,
        anchor: FeatureId,
        rng: &mut R,
    ) -> Result<(FeatureId, FeatureId, FeatureId), LocalMapError> {
        let partners = self
            .covisibility
            .get(anchor.index())
            .ok_or(LocalMapError::UnknownFeature(anchor))?;
        if partners.len() < 2 {
            return Err(LocalMapError::NotEnough {
                anchor,
                partners: partners.len(),
            });
        }
        let pick = index::sample(rng, partners.len(), 2);
        Ok((anchor, partners[pick.index(0)], partners[pick.index(1)]))
    }

    /// Feature nearest to `p` in the local frame; ties go to the lower id.
    pub fn nearest_feature(&self, p: Point2) -> Option<FeatureId> {
        self.index.nearest(p).map(|(e, _)| FeatureId(e.id))
    }

    fn observation_weight(&self, range: f64) -> f64 {
        let lateral = range * self.sensor.bearing_sigma;
        let trace = self.sensor.range_sigma * self.sensor.range_sigma + lateral * lateral;
        if trace > 0.0 {
            1.0 / trace
        } else {
            1.0
        }
    }
}

fn insert_sorted(v: &mut Vec<FeatureId>, id: FeatureId) {
    if let Err(pos) = v.binary_search(&id) {
        v.insert(pos, id);
    }
}
