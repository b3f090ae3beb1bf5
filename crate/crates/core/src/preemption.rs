//! Order rules for the incremental scheme.
//!
//! Every viewpoint starts with [`SchemeState::begin_viewpoint`], which folds
//! the newly arrived features and hypotheses into the pending lists, shuffles
//! them, and clears the per-viewpoint pair memory. The caller then consumes
//! exactly `budget` slots with [`SchemeState::next_pair`]; a slot either
//! yields a pair to score or is skipped.
//!
//! The hybrid rule classifies hypotheses into preference groups by inlier
//! ratio and spends the budget across groups in proportion to
//! `n(i)·2^(m·i)`.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::config::{Scheme, SchemeConfig};
use crate::geometry::{clip_convex, sample_convex, ClippedQuad, Pose2, Rect};
use crate::global_map::GlobalMap;
use crate::hypothesis::{best_hypothesis, Hypothesis, HypothesisId};
use crate::local_map::{FeatureId, LocalMap};

/// Preference group of a hypothesis with `s` inliers out of `q` scores.
/// Unscored hypotheses fall in group 0; a perfect ratio maps to the top group.
pub fn classify(s: u32, q: u32, groups: usize) -> usize {
    debug_assert!(groups >= 1);
    if q == 0 {
        return 0;
    }
    if s >= q {
        return groups - 1;
    }
    ((groups as u64 * u64::from(s)) / u64::from(q)) as usize
}

/// Same rule on a real-valued ratio `r ∈ [0, 1]`.
pub fn group_of_ratio(r: f64, groups: usize) -> usize {
    if r >= 1.0 {
        groups - 1
    } else {
        (libm::floor(groups as f64 * r.max(0.0)) as usize).min(groups - 1)
    }
}

/// Preemption weight of group `i`: `2^(m·i)`.
pub fn preemption_weight(group: usize, exponent: u32) -> f64 {
    libm::exp2(f64::from(exponent) * group as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocationError {
    #[error("no hypotheses to allocate budget to")]
    NoHypotheses,
    #[error("budget {budget} cannot give one pair to each of {nonempty} nonempty groups")]
    InvalidBudget { budget: usize, nonempty: usize },
}

/// Splits `budget` across groups as `n'(i) = ⌈α·n(i)·2^(m·i)⌉`.
///
/// α is the smallest value (found by 64 rounds of bisection) at which the
/// ceilings reach the budget; any excess from simultaneous ceiling jumps is
/// removed one at a time from the currently largest allocation. Every
/// nonempty group keeps at least one pair.
pub fn allocate(sizes: &[usize], budget: usize, exponent: u32) -> Result<Vec<usize>, AllocationError> {
    let nonempty = sizes.iter().filter(|&&n| n > 0).count();
    if nonempty == 0 {
        return Err(AllocationError::NoHypotheses);
    }
    if budget < nonempty {
        return Err(AllocationError::InvalidBudget { budget, nonempty });
    }
    let weights: Vec<f64> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| n as f64 * preemption_weight(i, exponent))
        .collect();
    let total_at = |alpha: f64| -> usize {
        weights
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| libm::ceil(alpha * w) as usize)
            .sum()
    };
    let (mut lo, mut hi) = (0.0f64, budget as f64);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if total_at(mid) >= budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut alloc: Vec<usize> = weights
        .iter()
        .map(|&w| if w > 0.0 { libm::ceil(hi * w) as usize } else { 0 })
        .collect();
    let mut excess = alloc.iter().sum::<usize>() - budget;
    while excess > 0 {
        // largest allocation, lowest index on ties
        let (i, _) = alloc
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 1)
            .fold((usize::MAX, 0), |best, (i, &a)| if a > best.1 { (i, a) } else { best });
        alloc[i] -= 1;
        excess -= 1;
    }
    Ok(alloc)
}

/// Fallback when the budget is too small for one pair per nonempty group:
/// shares proportional to `n(i)·2^(m·i)`, rounded by largest remainders
/// (ties to the higher group).
pub fn allocate_largest_remainder(sizes: &[usize], budget: usize, exponent: u32) -> Vec<usize> {
    let weights: Vec<f64> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| n as f64 * preemption_weight(i, exponent))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return vec![0; sizes.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / total * budget as f64).collect();
    let mut alloc: Vec<usize> = exact.iter().map(|e| libm::floor(*e) as usize).collect();
    let mut rest = budget - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - alloc[a] as f64;
        let rb = exact[b] - alloc[b] as f64;
        rb.total_cmp(&ra).then(b.cmp(&a))
    });
    for i in order {
        if rest == 0 {
            break;
        }
        if sizes[i] > 0 {
            alloc[i] += 1;
            rest -= 1;
        }
    }
    alloc
}

/// Hypotheses partitioned by preference group with O(1) moves.
#[derive(Debug, Clone)]
pub struct GroupTable {
    members: Vec<Vec<HypothesisId>>,
    // hypothesis index -> (group, position within group)
    slots: Vec<Option<(u32, u32)>>,
}

impl GroupTable {
    pub fn new(groups: usize) -> Self {
        Self {
            members: vec![Vec::new(); groups],
            slots: Vec::new(),
        }
    }

    pub fn group_count(&self) -> usize {
        self.members.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn members(&self, group: usize) -> &[HypothesisId] {
        &self.members[group]
    }

    pub fn group_of(&self, id: HypothesisId) -> Option<usize> {
        self.slots.get(id.index()).copied().flatten().map(|(g, _)| g as usize)
    }

    pub fn len(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Places `id` in `group`, moving it if already present.
    pub fn assign(&mut self, id: HypothesisId, group: usize) {
        if self.group_of(id) == Some(group) {
            return;
        }
        self.remove(id);
        if self.slots.len() <= id.index() {
            self.slots.resize(id.index() + 1, None);
        }
        let list = &mut self.members[group];
        self.slots[id.index()] = Some((group as u32, list.len() as u32));
        list.push(id);
    }

    pub fn remove(&mut self, id: HypothesisId) -> bool {
        let Some((g, pos)) = self.slots.get(id.index()).copied().flatten() else {
            return false;
        };
        let list = &mut self.members[g as usize];
        list.swap_remove(pos as usize);
        if let Some(&moved) = list.get(pos as usize) {
            self.slots[moved.index()] = Some((g, pos));
        }
        self.slots[id.index()] = None;
        true
    }
}

/// An ordered id list with O(1) removal by id. Removed ids are dropped
/// lazily at the next permutation.
#[derive(Debug, Clone, Default)]
pub struct PendingList {
    order: Vec<u32>,
    member: Vec<bool>,
    live: usize,
}

impl PendingList {
    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn contains(&self, id: u32) -> bool {
        self.member.get(id as usize).copied().unwrap_or(false)
    }

    pub fn extend(&mut self, ids: impl IntoIterator<Item = u32>) {
        for id in ids {
            if self.member.len() <= id as usize {
                self.member.resize(id as usize + 1, false);
            }
            if !self.member[id as usize] {
                self.member[id as usize] = true;
                self.order.push(id);
                self.live += 1;
            }
        }
    }

    pub fn remove(&mut self, id: u32) -> bool {
        if self.contains(id) {
            self.member[id as usize] = false;
            self.live -= 1;
            true
        } else {
            false
        }
    }

    pub fn permute<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let member = &self.member;
        self.order.retain(|&id| member[id as usize]);
        self.order.shuffle(rng);
    }

    /// Live ids in list order.
    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.order.iter().copied().filter(|&id| self.member[id as usize])
    }
}

#[derive(Debug, Clone, Default)]
struct DepthCursor {
    hypotheses: Vec<HypothesisId>,
    features: Vec<FeatureId>,
    hyp_pos: usize,
    feat_pos: usize,
}

impl DepthCursor {
    fn next(&mut self) -> Option<(FeatureId, HypothesisId)> {
        while self.hyp_pos < self.hypotheses.len() {
            if self.feat_pos < self.features.len() {
                let pair = (self.features[self.feat_pos], self.hypotheses[self.hyp_pos]);
                self.feat_pos += 1;
                return Some(pair);
            }
            self.hyp_pos += 1;
            self.feat_pos = 0;
        }
        None
    }
}

#[derive(Debug, Clone, Default)]
struct BreadthCursor {
    hypotheses: Vec<HypothesisId>,
    // stack; the top holds the newest feature
    waiting: Vec<FeatureId>,
    current: Option<FeatureId>,
    hyp_pos: usize,
}

impl BreadthCursor {
    fn next(&mut self) -> Option<(FeatureId, HypothesisId)> {
        loop {
            let feature = match self.current {
                Some(f) => f,
                None => {
                    let f = self.waiting.pop()?;
                    self.current = Some(f);
                    self.hyp_pos = 0;
                    f
                }
            };
            if self.hyp_pos < self.hypotheses.len() {
                let h = self.hypotheses[self.hyp_pos];
                self.hyp_pos += 1;
                return Some((feature, h));
            }
            self.current = None;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Planned {
    /// Pending hypothesis scored against a mapped-area feature.
    Hypothesis(HypothesisId),
    /// Pending feature scored against the current best hypothesis.
    Feature(FeatureId, HypothesisId),
}

#[derive(Debug, Clone)]
struct HybridPlan {
    groups: GroupTable,
    priming: Vec<Planned>,
    draws: Vec<HypothesisId>,
    cursor: usize,
    sizes: Vec<usize>,
    allocation: Vec<usize>,
}

impl HybridPlan {
    fn new(groups: usize) -> Self {
        Self {
            groups: GroupTable::new(groups),
            priming: Vec::new(),
            draws: Vec::new(),
            cursor: 0,
            sizes: vec![0; groups],
            allocation: vec![0; groups],
        }
    }
}

#[derive(Debug, Clone)]
enum Order {
    Depth(DepthCursor),
    Breadth(BreadthCursor),
    Hybrid(HybridPlan),
}

/// Budget bookkeeping for the hybrid rule at the start of a viewpoint.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ViewpointPlan {
    /// Group sizes n(i) before allocation.
    pub sizes: Vec<usize>,
    /// Allocation n'(i) over the post-priming budget.
    pub allocation: Vec<usize>,
    pub priming: usize,
}

#[derive(Debug, Clone)]
pub struct SchemeState {
    scheme: Scheme,
    pending_features: PendingList,
    pending_hypotheses: PendingList,
    pair_memory: BTreeSet<(u32, u32)>,
    order: Order,
}

impl SchemeState {
    pub fn new(scheme: Scheme, groups: usize) -> Self {
        let order = match scheme {
            Scheme::DepthFirst => Order::Depth(DepthCursor::default()),
            Scheme::BreadthFirst => Order::Breadth(BreadthCursor::default()),
            Scheme::Hybrid => Order::Hybrid(HybridPlan::new(groups)),
        };
        Self {
            scheme,
            pending_features: PendingList::default(),
            pending_hypotheses: PendingList::default(),
            pair_memory: BTreeSet::new(),
            order,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Features that arrived but were never scored.
    pub fn pending_features(&self) -> &PendingList {
        &self.pending_features
    }

    /// Hypotheses that were generated but never scored.
    pub fn pending_hypotheses(&self) -> &PendingList {
        &self.pending_hypotheses
    }

    pub fn pair_memory_len(&self) -> usize {
        self.pair_memory.len()
    }

    pub fn groups(&self) -> Option<&GroupTable> {
        match &self.order {
            Order::Hybrid(plan) => Some(&plan.groups),
            _ => None,
        }
    }

    /// Hybrid budget plan of the current viewpoint.
    pub fn plan(&self) -> Option<ViewpointPlan> {
        match &self.order {
            Order::Hybrid(p) => Some(ViewpointPlan {
                sizes: p.sizes.clone(),
                allocation: p.allocation.clone(),
                priming: p.priming.len(),
            }),
            _ => None,
        }
    }

    /// Folds in this viewpoint's arrivals and prepares the slot schedule.
    pub fn begin_viewpoint<R: Rng + ?Sized>(
        &mut self,
        new_features: &[FeatureId],
        new_hypotheses: &[HypothesisId],
        hypotheses: &[Hypothesis],
        config: &SchemeConfig,
        rng: &mut R,
    ) {
        self.pair_memory.clear();

        self.pending_features.extend(new_features.iter().map(|f| f.0));
        self.pending_features.permute(rng);
        self.pending_hypotheses.extend(new_hypotheses.iter().map(|h| h.0));
        self.pending_hypotheses.permute(rng);

        let mut fresh_features = new_features.to_vec();
        fresh_features.shuffle(rng);
        let mut fresh_hypotheses = new_hypotheses.to_vec();
        fresh_hypotheses.shuffle(rng);

        match &mut self.order {
            Order::Depth(c) => {
                c.features.extend(fresh_features);
                c.hypotheses.extend(fresh_hypotheses);
            }
            Order::Breadth(c) => {
                c.waiting.extend(fresh_features);
                c.hypotheses.extend(fresh_hypotheses);
            }
            Order::Hybrid(plan) => {
                for &h in new_hypotheses {
                    if !hypotheses[h.index()].retired {
                        plan.groups.assign(h, 0);
                    }
                }
                plan.priming.clear();
                plan.draws.clear();
                plan.cursor = 0;

                let prime_budget = config.priming_budget().min(config.budget);
                plan.priming.extend(
                    self.pending_hypotheses
                        .iter()
                        .take(prime_budget)
                        .map(|h| Planned::Hypothesis(HypothesisId(h))),
                );
                if plan.priming.len() < prime_budget {
                    if let Some(best) = best_hypothesis(hypotheses, config.q_min) {
                        let room = prime_budget - plan.priming.len();
                        plan.priming.extend(
                            self.pending_features
                                .iter()
                                .take(room)
                                .map(|f| Planned::Feature(FeatureId(f), best.id)),
                        );
                    }
                }

                let remaining = config.budget - plan.priming.len();
                plan.sizes = plan.groups.sizes();
                plan.allocation = if remaining == 0 {
                    vec![0; plan.sizes.len()]
                } else {
                    match allocate(&plan.sizes, remaining, config.exponent) {
                        Ok(a) => a,
                        Err(AllocationError::InvalidBudget { .. }) => {
                            allocate_largest_remainder(&plan.sizes, remaining, config.exponent)
                        }
                        Err(AllocationError::NoHypotheses) => vec![0; plan.sizes.len()],
                    }
                };
                for (g, &count) in plan.allocation.iter().enumerate() {
                    let members = plan.groups.members(g);
                    for _ in 0..count {
                        plan.draws.push(members[rng.random_range(0..members.len())]);
                    }
                }
                plan.draws.shuffle(rng);
            }
        }
    }

    /// Next pair to score, or `None` when this slot is skipped.
    pub fn next_pair<R: Rng + ?Sized>(
        &mut self,
        hypotheses: &[Hypothesis],
        lm: &LocalMap,
        map: &GlobalMap,
        config: &SchemeConfig,
        rng: &mut R,
    ) -> Option<(FeatureId, HypothesisId)> {
        if lm.is_empty() || hypotheses.is_empty() {
            return None;
        }
        match &mut self.order {
            // Sample members are passed over without spending the slot.
            Order::Depth(c) => core::iter::from_fn(|| c.next())
                .find(|(f, h)| !hypotheses[h.index()].in_sample(*f)),
            Order::Breadth(c) => core::iter::from_fn(|| c.next())
                .find(|(f, h)| !hypotheses[h.index()].in_sample(*f)),
            Order::Hybrid(plan) => {
                let slot = plan.cursor;
                plan.cursor += 1;
                let h = if slot < plan.priming.len() {
                    match plan.priming[slot] {
                        Planned::Feature(f, h) => {
                            let fresh = !self.pair_memory.contains(&(f.0, h.0))
                                && !hypotheses[h.index()].in_sample(f);
                            return fresh.then_some((f, h));
                        }
                        Planned::Hypothesis(h) => h,
                    }
                } else {
                    *plan.draws.get(slot - plan.priming.len())?
                };
                let hyp = &hypotheses[h.index()];
                let footprint = Footprint::new(lm, map, &hyp.psi);
                for _ in 0..=config.feature_retries {
                    let f = footprint.feature(lm, rng)?;
                    if !self.pair_memory.contains(&(f.0, h.0)) && !hyp.in_sample(f) {
                        return Some((f, h));
                    }
                }
                None
            }
        }
    }

    /// Records a scored pair: pair memory, pending-list elimination, group
    /// reassignment, and (hybrid only) retirement.
    pub fn record(
        &mut self,
        feature: FeatureId,
        hypothesis: &mut Hypothesis,
        config: &SchemeConfig,
    ) {
        self.pair_memory.insert((feature.0, hypothesis.id.0));
        self.pending_features.remove(feature.0);
        self.pending_hypotheses.remove(hypothesis.id.0);
        if let Order::Hybrid(plan) = &mut self.order {
            if hypothesis.retired {
                return;
            }
            if let Some(r) = config.retirement {
                if hypothesis.q >= r.min_scores && hypothesis.ratio().unwrap_or(0.0) < r.max_ratio {
                    hypothesis.retired = true;
                    plan.groups.remove(hypothesis.id);
                    return;
                }
            }
            plan.groups
                .assign(hypothesis.id, classify(hypothesis.s, hypothesis.q, config.groups));
        }
    }
}

/// Where locations `l` are drawn for one hypothesis: the part of the
/// mapped region that the local map's extent covers under `psi`.
///
/// Uniform `l` over the whole region would mostly fall far from the local
/// map and pick the same few boundary features again and again. When the
/// two do not overlap, the whole region is used.
#[derive(Debug, Clone)]
pub struct Footprint {
    to_local: Pose2,
    covered: ClippedQuad,
    region: Rect,
}

impl Footprint {
    pub fn new(lm: &LocalMap, map: &GlobalMap, psi: &Pose2) -> Self {
        let to_local = psi.inverse();
        let region = map.mapped_region();
        let covered = match lm.extent() {
            Some(extent) => clip_convex(&region.corners().map(|c| to_local.apply(c)), &extent),
            None => ClippedQuad::new(),
        };
        Self {
            to_local,
            covered,
            region,
        }
    }

    /// Samples `l`, maps it into the local frame through `psi⁻¹`, and
    /// returns the nearest local feature.
    pub fn feature<R: Rng + ?Sized>(&self, lm: &LocalMap, rng: &mut R) -> Option<FeatureId> {
        let p = sample_convex(&self.covered, rng)
            .unwrap_or_else(|| self.to_local.apply(self.region.sample_uniform(rng)));
        lm.nearest_feature(p)
    }
}

/// One mapped-area feature draw for `psi`; see [`Footprint`].
pub fn mapped_area_feature<R: Rng + ?Sized>(
    lm: &LocalMap,
    map: &GlobalMap,
    psi: &Pose2,
    rng: &mut R,
) -> Option<FeatureId> {
    Footprint::new(lm, map, psi).feature(lm, rng)
}
