use core::fmt;
use core::str::FromStr;

use crate::hypothesis::GenerationLimits;

/// Order rule used to pick the next feature-hypothesis pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    DepthFirst,
    BreadthFirst,
    Hybrid,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::DepthFirst, Scheme::BreadthFirst, Scheme::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::DepthFirst => "depth",
            Scheme::BreadthFirst => "breadth",
            Scheme::Hybrid => "hybrid",
        }
    }

    /// Slot for the scheme's random stream.
    pub fn stream_slot(self) -> u8 {
        match self {
            Scheme::DepthFirst => 0,
            Scheme::BreadthFirst => 1,
            Scheme::Hybrid => 2,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownScheme;

impl fmt::Display for UnknownScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("expected one of: depth, breadth, hybrid")
    }
}

impl FromStr for Scheme {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "depth" | "depth-first" => Ok(Scheme::DepthFirst),
            "breadth" | "breadth-first" => Ok(Scheme::BreadthFirst),
            "hybrid" => Ok(Scheme::Hybrid),
            _ => Err(UnknownScheme),
        }
    }
}

/// Hypotheses scored at least `min_scores` times with inlier ratio below
/// `max_ratio` are frozen out of group sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Retirement {
    pub min_scores: u32,
    pub max_ratio: f64,
}

impl Default for Retirement {
    fn default() -> Self {
        Self {
            min_scores: 50,
            max_ratio: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// Pairs consumed per viewpoint (N_p).
    pub budget: usize,
    /// Inlier gate, meters.
    pub gate: f64,
    /// Allowed separation mismatch when matching feature pairs, meters.
    pub pair_tolerance: f64,
    pub max_candidates: usize,
    /// Hypotheses emitted per new feature at most.
    pub max_new: usize,
    pub max_triples: usize,
    /// Scores needed before a hypothesis competes on inlier ratio.
    pub q_min: u32,
    /// Number of preference groups.
    pub groups: usize,
    /// Preemption exponent: group `i` weighs `2^(exponent·i)`.
    pub exponent: u32,
    /// Fraction of the budget reserved for first-scoring pending items.
    pub priming_fraction: f64,
    /// Feature resamples before a duplicate pair is skipped.
    pub feature_retries: usize,
    pub retirement: Option<Retirement>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Hybrid,
            budget: 1000,
            gate: 0.5,
            pair_tolerance: 0.05,
            max_candidates: 4096,
            max_new: 8,
            max_triples: 4,
            q_min: 10,
            groups: 10,
            exponent: 1,
            priming_fraction: 0.2,
            feature_retries: 3,
            retirement: Some(Retirement::default()),
        }
    }
}

impl SchemeConfig {
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn generation_limits(&self) -> GenerationLimits {
        GenerationLimits {
            max_new: self.max_new,
            max_triples: self.max_triples,
            max_candidates: self.max_candidates,
            pair_tolerance: self.pair_tolerance,
            gate: self.gate,
        }
    }

    pub fn priming_budget(&self) -> usize {
        libm::floor(self.priming_fraction.clamp(0.0, 1.0) * self.budget as f64) as usize
    }

    /// First offending field, if any.
    pub fn validate(&self) -> Result<(), (&'static str, &'static str)> {
        if self.budget == 0 {
            return Err(("budget", "must be at least 1"));
        }
        if !(self.gate > 0.0) {
            return Err(("gate", "must be positive"));
        }
        if !(self.pair_tolerance >= 0.0) {
            return Err(("pair_tolerance", "must be non-negative"));
        }
        if self.groups == 0 || self.groups > 64 {
            return Err(("groups", "must be in 1..=64"));
        }
        if self.exponent > 16 {
            return Err(("exponent", "must be at most 16"));
        }
        if !(0.0..=1.0).contains(&self.priming_fraction) {
            return Err(("priming_fraction", "must be in [0, 1]"));
        }
        if let Some(r) = self.retirement {
            if !(0.0..=1.0).contains(&r.max_ratio) {
                return Err(("retire_max_ratio", "must be in [0, 1]"));
            }
        }
        Ok(())
    }
}
