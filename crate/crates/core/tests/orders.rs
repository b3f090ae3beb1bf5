//! Order-rule behaviour observed through the public scheme interface.

use std::collections::{BTreeMap, BTreeSet};

use incransac::environment::{Observation, OdometryMeasurement};
use incransac::geometry::{Point2, Pose2, Rect};
use incransac::hypothesis::{Hypothesis, HypothesisId};
use incransac::preemption::SchemeState;
use incransac::rng::{stream, Stream};
use incransac::{FeatureId, GlobalMap, LocalMap, Scheme, SchemeConfig};
use rand::Rng;

/// Local map whose features sit at `points` (robot at the origin).
fn local_map(points: &[Point2]) -> LocalMap {
    let obs: Vec<Observation> = points
        .iter()
        .enumerate()
        .map(|(i, p)| Observation {
            track_id: i as u32,
            range: p.norm(),
            bearing: p.angle(),
        })
        .collect();
    let mut lm = LocalMap::default();
    lm.update(&OdometryMeasurement::default(), &obs);
    lm
}

fn ring(n: usize, radius: f64) -> Vec<Point2> {
    (0..n)
        .map(|i| Point2::from_polar(radius, i as f64 * core::f64::consts::TAU / n as f64))
        .collect()
}

fn hypotheses(n: usize) -> Vec<Hypothesis> {
    (0..n)
        .map(|i| {
            let psi = Pose2::from_xy_theta(i as f64 * 0.1, 0.0, 0.0);
            // sample ids outside the feature range, so no pair is excluded
            Hypothesis::new(HypothesisId(i as u32), psi, 0, [FeatureId(u32::MAX); 3])
        })
        .collect()
}

fn map() -> GlobalMap {
    GlobalMap::new(ring(12, 3.0), Rect::new(-20.0, -20.0, 20.0, 20.0)).unwrap()
}

/// Runs one viewpoint and returns the emitted pairs (skips as `None`).
fn viewpoint(
    st: &mut SchemeState,
    hs: &mut [Hypothesis],
    lm: &LocalMap,
    new_f: &[FeatureId],
    new_h: &[HypothesisId],
    config: &SchemeConfig,
    seed: u64,
) -> Vec<Option<(FeatureId, HypothesisId)>> {
    let mut rng = stream(seed, Stream::Scheme(config.scheme.stream_slot()));
    let gm = map();
    st.begin_viewpoint(new_f, new_h, hs, config, &mut rng);
    (0..config.budget)
        .map(|_| {
            let pair = st.next_pair(hs, lm, &gm, config, &mut rng);
            if let Some((f, h)) = pair {
                let hyp = &mut hs[h.index()];
                hyp.score(lm.position(f), &gm, config.gate);
                st.record(f, hyp, config);
            }
            pair
        })
        .collect()
}

fn ids<T, F: Fn(u32) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n as u32).map(f).collect()
}

/// Each key's occurrences form one contiguous run.
fn contiguous<K: Ord + Copy>(seq: &[K]) -> bool {
    let mut finished = BTreeSet::new();
    for w in seq.windows(2) {
        if w[0] != w[1] && !finished.insert(w[0]) {
            return false;
        }
    }
    seq.last().is_none_or(|last| !finished.contains(last))
}

#[test]
fn depth_first_exhausts_each_hypothesis() {
    let lm = local_map(&ring(6, 4.0));
    let mut hs = hypotheses(4);
    let config = SchemeConfig {
        scheme: Scheme::DepthFirst,
        budget: 15,
        ..SchemeConfig::default()
    };
    let mut st = SchemeState::new(Scheme::DepthFirst, config.groups);
    let pairs: Vec<_> = viewpoint(&mut st, &mut hs, &lm, &ids(6, FeatureId), &ids(4, HypothesisId), &config, 1)
        .into_iter()
        .flatten()
        .collect();
    assert_eq!(pairs.len(), 15);
    let hyp_seq: Vec<_> = pairs.iter().map(|p| p.1).collect();
    assert!(contiguous(&hyp_seq));
    let mut per_h: BTreeMap<HypothesisId, usize> = BTreeMap::new();
    for p in &pairs {
        *per_h.entry(p.1).or_default() += 1;
    }
    let mut counts: Vec<usize> = per_h.values().copied().collect();
    counts.sort_unstable();
    assert_eq!(counts, [3, 6, 6]);
}

#[test]
fn breadth_first_exhausts_each_feature_newest_first() {
    let lm = local_map(&ring(6, 4.0));
    let mut hs = hypotheses(4);
    let config = SchemeConfig {
        scheme: Scheme::BreadthFirst,
        budget: 10,
        ..SchemeConfig::default()
    };
    let mut st = SchemeState::new(Scheme::BreadthFirst, config.groups);
    let mut pairs: Vec<_> = viewpoint(&mut st, &mut hs, &lm, &ids(6, FeatureId), &ids(4, HypothesisId), &config, 2)
        .into_iter()
        .flatten()
        .collect();
    assert_eq!(pairs.len(), 10);
    assert!(contiguous(&pairs.iter().map(|p| p.0).collect::<Vec<_>>()));

    // The unfinished feature is completed, then the newest arrival goes next.
    let in_progress = pairs.last().unwrap().0;
    let lm2 = local_map(&ring(7, 4.0));
    pairs = viewpoint(&mut st, &mut hs, &lm2, &[FeatureId(6)], &[], &config, 3)
        .into_iter()
        .flatten()
        .collect();
    assert_eq!(pairs[0].0, in_progress);
    let next = pairs.iter().map(|p| p.0).find(|&f| f != in_progress);
    assert_eq!(next, Some(FeatureId(6)));
    assert!(contiguous(&pairs.iter().map(|p| p.0).collect::<Vec<_>>()));
}

#[test]
fn pairs_are_unique_within_a_viewpoint() {
    let lm = local_map(&ring(9, 5.0));
    for scheme in Scheme::ALL {
        let mut hs = hypotheses(30);
        let config = SchemeConfig {
            scheme,
            budget: 200,
            ..SchemeConfig::default()
        };
        let mut st = SchemeState::new(scheme, config.groups);
        let mut new_f = ids(9, FeatureId);
        let mut new_h = ids(30, HypothesisId);
        for vp in 0..5 {
            let emitted = viewpoint(&mut st, &mut hs, &lm, &new_f, &new_h, &config, 10 + vp);
            assert_eq!(emitted.len(), config.budget);
            let scored: Vec<_> = emitted.iter().flatten().collect();
            let distinct: BTreeSet<_> = scored.iter().collect();
            assert_eq!(distinct.len(), scored.len(), "{scheme} repeated a pair at viewpoint {vp}");
            assert!(st.pair_memory_len() <= config.budget);
            new_f.clear();
            new_h.clear();
        }
        assert!(hs.iter().all(|h| h.s <= h.q));
    }
}

#[test]
fn begin_viewpoint_permutes_uniformly() {
    // 5! = 120 orderings over 1000 trials: expected 8.33 each, sigma ~2.88.
    let mut counts: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    let hs = hypotheses(5);
    let config = SchemeConfig::default();
    let mut rng = stream(77, Stream::Scheme(2));
    let trials = 1000;
    for _ in 0..trials {
        let mut st = SchemeState::new(Scheme::Hybrid, config.groups);
        st.begin_viewpoint(&[], &ids(5, HypothesisId), &hs, &config, &mut rng);
        *counts.entry(st.pending_hypotheses().iter().collect()).or_default() += 1;
    }
    let p = 1.0 / 120.0;
    let mean = trials as f64 * p;
    let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
    for (order, &c) in &counts {
        assert!((c as f64 - mean).abs() <= 4.0 * sigma, "{order:?} seen {c} times");
    }
}

#[test]
fn nearest_feature_matches_scan_under_transform() {
    let mut rng = stream(5, Stream::Scheme(0));
    let points: Vec<Point2> = (0..300)
        .map(|_| Point2::new(rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0)))
        .filter(|p| p.norm() <= 9.9)
        .collect();
    let lm = local_map(&points);
    for _ in 0..10_000 {
        let psi = Pose2::from_xy_theta(
            rng.random_range(-200.0..200.0),
            rng.random_range(-200.0..200.0),
            rng.random_range(-3.2..3.2),
        );
        let l = psi.apply(Point2::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0)));
        let got = lm.nearest_feature(psi.inverse().apply(l)).unwrap();
        let best = lm
            .features()
            .iter()
            .map(|f| (psi.apply(f.pos).distance(l), f.id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .unwrap();
        let got_d = psi.apply(lm.position(got)).distance(l);
        assert!(got == best.1 || (got_d - best.0).abs() < 1e-9, "{got:?} vs {best:?}");
    }
}
