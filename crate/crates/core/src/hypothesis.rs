//! Global-position hypotheses: generation from covisible feature triples,
//! pair scoring, and the normalized preference rule.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::geometry::{transform_from_two_correspondences, Point2, Pose2, MIN_PAIR_SEPARATION};
use crate::global_map::GlobalMap;
use crate::local_map::{FeatureId, LocalMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HypothesisId(pub u32);

impl HypothesisId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A candidate local-to-global transform and its scoring history.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub id: HypothesisId,
    pub psi: Pose2,
    /// Inlier count.
    pub s: u32,
    /// Number of times scored.
    pub q: u32,
    pub born_at: u32,
    /// Features of the minimal sample this hypothesis was built from. They
    /// fit by construction and are never scored against it.
    pub sample: [FeatureId; 3],
    /// Frozen out of group sampling; still counts for bookkeeping.
    pub retired: bool,
}

impl Hypothesis {
    pub fn new(id: HypothesisId, psi: Pose2, born_at: u32, sample: [FeatureId; 3]) -> Self {
        Self {
            id,
            psi,
            s: 0,
            q: 0,
            born_at,
            sample,
            retired: false,
        }
    }

    pub fn in_sample(&self, feature: FeatureId) -> bool {
        self.sample.contains(&feature)
    }

    /// Inlier ratio `s / q`, undefined before the first score.
    pub fn ratio(&self) -> Option<f64> {
        (self.q > 0).then(|| f64::from(self.s) / f64::from(self.q))
    }

    /// Scores the local feature at `feature_pos` against this hypothesis. The
    /// pair is an inlier when the transformed feature lies within `gate` of
    /// some global landmark.
    pub fn score(&mut self, feature_pos: Point2, map: &GlobalMap, gate: f64) -> bool {
        let inlier = map.has_landmark_within(self.psi.apply(feature_pos), gate);
        self.q += 1;
        if inlier {
            self.s += 1;
        }
        inlier
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationLimits {
    /// Maximum hypotheses emitted per new feature.
    pub max_new: usize,
    /// Covisible triples tried before giving up.
    pub max_triples: usize,
    /// Cap on congruent landmark pairs examined per triple.
    pub max_candidates: usize,
    /// Allowed mismatch between feature and landmark pair separation.
    pub pair_tolerance: f64,
    /// Verification radius for the third feature.
    pub gate: f64,
}

impl Default for GenerationLimits {
    fn default() -> Self {
        Self {
            max_new: 8,
            max_triples: 4,
            max_candidates: 4096,
            pair_tolerance: 0.05,
            gate: 0.5,
        }
    }
}

/// Counters from one generation call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerationStats {
    pub triples: u32,
    pub candidates: u32,
    pub verified: u32,
}

/// Generates hypotheses from covisible triples anchored at `anchor`.
///
/// The widest indexable pair of the triple is matched against congruent
/// landmark pairs; the remaining feature must land within the gate of a
/// landmark for a candidate to survive. When more than `max_new` survive,
/// the ones whose third feature lands closest to a landmark are kept. Ids
/// are taken from `next_id`.
#[allow(clippy::too_many_arguments)]
pub fn generate_hypotheses<R: Rng + ?Sized>(
    lm: &LocalMap,
    map: &GlobalMap,
    anchor: FeatureId,
    limits: &GenerationLimits,
    next_id: &mut u32,
    viewpoint: u32,
    rng: &mut R,
    stats: &mut GenerationStats,
) -> Vec<Hypothesis> {
    let mut out = Vec::new();
    if limits.max_new == 0 || map.is_empty() {
        return out;
    }
    for _ in 0..limits.max_triples {
        let Ok((a, b, c)) = lm.covisible_triple(anchor, rng) else {
            return out;
        };
        stats.triples += 1;
        let [pa, pb, pc] = [a, b, c].map(|f| lm.position(f));
        let Some((fa, fb, verify)) = widest_pair(pa, pb, pc, map.max_pair_separation()) else {
            continue;
        };
        let candidates = map.congruent_pairs(fa.distance(fb), limits.pair_tolerance, limits.max_candidates, rng);
        stats.candidates += candidates.len() as u32;
        // (residual of the third feature, transform), best fits kept
        let mut verified: Vec<(f64, Pose2)> = Vec::new();
        for (la, lb) in candidates {
            let Ok(psi) = transform_from_two_correspondences(fa, fb, la, lb) else {
                continue;
            };
            if let Ok((_, residual)) = map.nearest_landmark(psi.apply(verify)) {
                if residual <= limits.gate {
                    verified.push((residual, psi));
                }
            }
        }
        stats.verified += verified.len() as u32;
        verified.sort_by(|l, r| l.0.total_cmp(&r.0));
        for (_, psi) in verified.into_iter().take(limits.max_new) {
            out.push(Hypothesis::new(HypothesisId(*next_id), psi, viewpoint, [a, b, c]));
            *next_id += 1;
        }
        if !out.is_empty() {
            return out;
        }
    }
    out
}

/// The pair with the largest separation that the map's pair index can
/// match, plus the leftover point.
fn widest_pair(a: Point2, b: Point2, c: Point2, max_sep: f64) -> Option<(Point2, Point2, Point2)> {
    [(a, b, c), (a, c, b), (b, c, a)]
        .into_iter()
        .map(|(x, y, z)| (x.distance(y), x, y, z))
        .filter(|(d, ..)| *d > MIN_PAIR_SEPARATION && *d <= max_sep)
        .max_by(|l, r| l.0.total_cmp(&r.0))
        .map(|(_, x, y, z)| (x, y, z))
}

/// Ordering used by the preference rule: larger ratio, then more scores,
/// then smaller id. Ratios are compared exactly by cross-multiplication.
fn prefer_by_ratio(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    let lhs = u64::from(a.s) * u64::from(b.q);
    let rhs = u64::from(b.s) * u64::from(a.q);
    lhs.cmp(&rhs)
        .then(a.q.cmp(&b.q))
        .then(b.id.cmp(&a.id))
}

fn prefer_by_score(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    a.s.cmp(&b.s).then(a.q.cmp(&b.q)).then(b.id.cmp(&a.id))
}

/// Normalized preference rule: the hypothesis maximizing `s / q` among those
/// scored at least `q_min` times, falling back to the highest raw score when
/// none qualifies. `None` when there are no hypotheses.
pub fn best_hypothesis<'a, I>(hypotheses: I, q_min: u32) -> Option<&'a Hypothesis>
where
    I: IntoIterator<Item = &'a Hypothesis>,
{
    let q_min = q_min.max(1);
    let mut by_ratio: Option<&Hypothesis> = None;
    let mut by_score: Option<&Hypothesis> = None;
    for h in hypotheses {
        if h.q >= q_min && by_ratio.is_none_or(|b| prefer_by_ratio(h, b) == Ordering::Greater) {
            by_ratio = Some(h);
        }
        if by_score.is_none_or(|b| prefer_by_score(h, b) == Ordering::Greater) {
            by_score = Some(h);
        }
    }
    by_ratio.or(by_score)
}
