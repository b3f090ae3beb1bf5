//! The a-priori landmark map of the mapped region.
//!
//! Besides nearest-landmark queries the map keeps every landmark pair within
//! sensor range, bucketed by separation, so congruent pairs for a measured
//! feature distance can be found without an O(n²) scan.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::geometry::{GeometryError, Point2, Rect, MIN_PAIR_SEPARATION};
use crate::quadtree::{Entry, Quadtree};

pub const PAIR_BUCKET_WIDTH: f64 = 0.25;
pub const DEFAULT_MAX_PAIR_SEPARATION: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("the global map has no landmarks")]
    NoLandmark,
    #[error("mapped region: {0}")]
    Region(#[from] GeometryError),
    #[error("landmark {index} at ({x}, {y}) lies outside the mapped region")]
    OutsideRegion { index: usize, x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct IndexedPair {
    a: u32,
    b: u32,
    separation: f64,
}

#[derive(Debug, Clone)]
pub struct GlobalMap {
    landmarks: Vec<Point2>,
    region: Rect,
    index: Quadtree,
    max_pair_separation: f64,
    // pair_buckets[k] holds pairs with separation in [k·w, (k+1)·w)
    pair_buckets: Vec<Vec<IndexedPair>>,
}

impl GlobalMap {
    pub fn new(landmarks: Vec<Point2>, region: Rect) -> Result<Self, MapError> {
        Self::with_pair_range(landmarks, region, DEFAULT_MAX_PAIR_SEPARATION)
    }

    /// Builds the map, indexing pairs with separation in
    /// `(MIN_PAIR_SEPARATION, max_pair_separation]`.
    pub fn with_pair_range(
        landmarks: Vec<Point2>,
        region: Rect,
        max_pair_separation: f64,
    ) -> Result<Self, MapError> {
        region.validate()?;
        if let Some((index, p)) = landmarks.iter().enumerate().find(|(_, p)| !region.contains(**p)) {
            return Err(MapError::OutsideRegion { index, x: p.x, y: p.y });
        }
        let mut tree = Quadtree::new(region);
        for (i, p) in landmarks.iter().enumerate() {
            tree.insert(*p, i as u32);
        }

        let bucket_count = libm::ceil(max_pair_separation / PAIR_BUCKET_WIDTH).max(1.0) as usize;
        let mut pair_buckets = alloc::vec![Vec::new(); bucket_count];
        for (i, p) in landmarks.iter().enumerate() {
            let i = i as u32;
            tree.for_each_within(*p, max_pair_separation, |e| {
                if e.id > i {
                    let separation = p.distance(e.pos);
                    if separation > MIN_PAIR_SEPARATION && separation <= max_pair_separation {
                        let k = bucket_of(separation, bucket_count);
                        pair_buckets[k].push(IndexedPair { a: i, b: e.id, separation });
                    }
                }
            });
        }
        for bucket in &mut pair_buckets {
            bucket.sort_by_key(|p| (p.a, p.b));
        }

        Ok(Self {
            landmarks,
            region,
            index: tree,
            max_pair_separation,
            pair_buckets,
        })
    }

    pub fn landmarks(&self) -> &[Point2] {
        &self.landmarks
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn mapped_region(&self) -> Rect {
        self.region
    }

    pub fn max_pair_separation(&self) -> f64 {
        self.max_pair_separation
    }

    pub fn pair_count(&self) -> usize {
        self.pair_buckets.iter().map(Vec::len).sum()
    }

    /// Nearest landmark and its distance. Ties go to the lower landmark index.
    pub fn nearest_landmark(&self, p: Point2) -> Result<(Point2, f64), MapError> {
        self.index
            .nearest(p)
            .map(|(e, d)| (e.pos, d))
            .ok_or(MapError::NoLandmark)
    }

    /// Whether some landmark lies within `radius` of `p`. Equivalent to
    /// `nearest_landmark(p).1 <= radius`.
    pub fn has_landmark_within(&self, p: Point2, radius: f64) -> bool {
        self.index.any_within(p, radius)
    }

    pub fn sample_mapped_location<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        self.region.sample_uniform(rng)
    }

    /// All ordered landmark-index pairs whose separation lies in
    /// `[d - tol, d + tol]`, in a deterministic order. Both orientations of
    /// every unordered pair are listed.
    pub fn congruent_pair_indices(&self, d: f64, tol: f64) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        if !(d > 0.0) || !(tol >= 0.0) {
            return out;
        }
        let lo = d - tol;
        let hi = d + tol;
        let n = self.pair_buckets.len();
        if hi < 0.0 {
            return out;
        }
        let first = bucket_of(lo.max(0.0), n);
        let last = bucket_of(hi.min(self.max_pair_separation), n);
        for bucket in &self.pair_buckets[first..=last] {
            for p in bucket {
                if p.separation >= lo && p.separation <= hi {
                    out.push((p.a, p.b));
                    out.push((p.b, p.a));
                }
            }
        }
        out
    }

    /// Up to `max_out` landmark pairs sampled uniformly without replacement
    /// from [`congruent_pair_indices`](Self::congruent_pair_indices).
    pub fn congruent_pairs<R: Rng + ?Sized>(
        &self,
        d: f64,
        tol: f64,
        max_out: usize,
        rng: &mut R,
    ) -> Vec<(Point2, Point2)> {
        let all = self.congruent_pair_indices(d, tol);
        let picked: Vec<(u32, u32)> = if all.len() <= max_out {
            all
        } else {
            index::sample(rng, all.len(), max_out)
                .into_iter()
                .map(|i| all[i])
                .collect()
        };
        picked
            .into_iter()
            .map(|(a, b)| (self.landmarks[a as usize], self.landmarks[b as usize]))
            .collect()
    }

    /// Every indexed landmark, e.g. for dumping.
    pub fn entries(&self) -> impl Iterator<Item = &Entry> {
        self.index.entries()
    }
}

fn bucket_of(separation: f64, bucket_count: usize) -> usize {
    ((separation / PAIR_BUCKET_WIDTH) as usize).min(bucket_count - 1)
}
