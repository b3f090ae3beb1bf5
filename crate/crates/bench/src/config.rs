//! Flat key-value run configuration.
//!
//! A config file is TOML with top-level keys only. Every key is optional;
//! absent keys keep the defaults of the selected profile (`quick = true`
//! starts from the reduced world). Unknown keys are rejected so typos
//! surface as config errors instead of silently running the defaults.

use std::path::Path;

use incransac::geometry::{Point2, Rect};
use incransac::{Retirement, Scheme};
use serde::Deserialize;

use crate::trial::{TrialConfig, TrialError};

/// Change ratios of the default sweep grid.
pub const DEFAULT_RATIOS: [f64; 12] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];
pub const DEFAULT_SEEDS_PER_CELL: u64 = 5;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub quick: Option<bool>,
    /// Master seed; trial `k` of a grid cell uses `seed + k`.
    pub seed: Option<u64>,
    pub seeds_per_cell: Option<u64>,
    pub change_ratio: Option<f64>,
    pub ratios: Option<Vec<f64>>,
    pub scheme: Option<String>,
    pub schemes: Option<Vec<String>>,
    pub jobs: Option<usize>,

    pub bounds: Option<[f64; 4]>,
    pub mapped_region: Option<[f64; 4]>,
    pub landmark_count: Option<usize>,

    pub start: Option<[f64; 2]>,
    pub goal: Option<[f64; 2]>,
    pub step: Option<f64>,

    pub max_range: Option<f64>,
    pub range_sigma: Option<f64>,
    pub bearing_sigma_deg: Option<f64>,
    pub odometry_sigma: Option<f64>,

    pub budget: Option<usize>,
    pub gate: Option<f64>,
    pub pair_tolerance: Option<f64>,
    pub max_candidates: Option<usize>,
    pub max_new: Option<usize>,
    pub max_triples: Option<usize>,
    pub q_min: Option<u32>,
    pub groups: Option<usize>,
    pub exponent: Option<u32>,
    pub priming_fraction: Option<f64>,
    pub feature_retries: Option<usize>,
    pub retirement: Option<bool>,
    pub retire_min_scores: Option<u32>,
    pub retire_max_ratio: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, TrialError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrialError::config("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, TrialError> {
        toml::from_str(text).map_err(|e| TrialError::config("config", e.message().to_string()))
    }
}

/// Everything a `trial` or `sweep` needs: the base trial plus the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub trial: TrialConfig,
    pub quick: bool,
    pub ratios: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub seeds_per_cell: u64,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn new(quick: bool) -> Self {
        Self {
            trial: if quick { TrialConfig::quick() } else { TrialConfig::default() },
            quick,
            ratios: DEFAULT_RATIOS.to_vec(),
            schemes: Scheme::ALL.to_vec(),
            seeds_per_cell: DEFAULT_SEEDS_PER_CELL,
            jobs: None,
        }
    }

    /// Builds from a parsed file. `force_quick` selects the quick profile
    /// even when the file does not.
    pub fn from_file(file: &FileConfig, force_quick: bool) -> Result<Self, TrialError> {
        let mut run = Self::new(force_quick || file.quick.unwrap_or(false));
        run.apply(file)?;
        Ok(run)
    }

    fn apply(&mut self, f: &FileConfig) -> Result<(), TrialError> {
        let t = &mut self.trial;
        if let Some(v) = f.seed {
            t.seed = v;
        }
        if let Some(v) = f.seeds_per_cell {
            self.seeds_per_cell = v;
        }
        if let Some(v) = f.change_ratio {
            t.world.change_ratio = v;
        }
        if let Some(v) = &f.ratios {
            self.ratios = v.clone();
        }
        if let Some(v) = &f.scheme {
            t.scheme.scheme = parse_scheme("scheme", v)?;
        }
        if let Some(v) = &f.schemes {
            self.schemes = v.iter().map(|s| parse_scheme("schemes", s)).collect::<Result<_, _>>()?;
        }
        if f.jobs.is_some() {
            self.jobs = f.jobs;
        }

        if let Some([a, b, c, d]) = f.bounds {
            t.world.bounds = Rect::new(a, b, c, d);
        }
        if let Some([a, b, c, d]) = f.mapped_region {
            t.world.mapped_region = Rect::new(a, b, c, d);
        }
        if let Some(v) = f.landmark_count {
            t.world.landmark_count = v;
        }

        if let Some([x, y]) = f.start {
            t.trajectory.start = Point2::new(x, y);
        }
        if let Some([x, y]) = f.goal {
            t.trajectory.goal = Point2::new(x, y);
        }
        if let Some(v) = f.step {
            t.trajectory.step = v;
        }

        if let Some(v) = f.max_range {
            t.sensor.max_range = v;
        }
        if let Some(v) = f.range_sigma {
            t.sensor.range_sigma = v;
        }
        if let Some(v) = f.bearing_sigma_deg {
            t.sensor.bearing_sigma = v.to_radians();
        }
        if let Some(v) = f.odometry_sigma {
            t.odometry.relative_sigma = v;
        }

        let s = &mut t.scheme;
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = f.$field {
                    s.$field = v;
                }
            )*};
        }
        take!(
            budget,
            gate,
            pair_tolerance,
            max_candidates,
            max_new,
            max_triples,
            q_min,
            groups,
            exponent,
            priming_fraction,
            feature_retries
        );
        let mut retirement = s.retirement.unwrap_or_default();
        if let Some(v) = f.retire_min_scores {
            retirement.min_scores = v;
        }
        if let Some(v) = f.retire_max_ratio {
            retirement.max_ratio = v;
        }
        s.retirement = match f.retirement {
            Some(false) => None,
            Some(true) => Some(retirement),
            None => s.retirement.map(|_| retirement),
        };
        Ok(())
    }

    pub fn validate(&self) -> Result<(), TrialError> {
        self.trial.validate()?;
        if self.ratios.is_empty() {
            return Err(TrialError::config("ratios", "grid needs at least one ratio"));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(TrialError::config("ratios", format!("{r} is outside [0, 1]")));
        }
        if self.schemes.is_empty() {
            return Err(TrialError::config("schemes", "grid needs at least one scheme"));
        }
        if self.seeds_per_cell == 0 {
            return Err(TrialError::config("seeds_per_cell", "must be at least 1"));
        }
        if self.jobs == Some(0) {
            return Err(TrialError::config("jobs", "must be at least 1"));
        }
        Ok(())
    }

    /// Retirement thresholds in force, if enabled.
    pub fn retirement(&self) -> Option<Retirement> {
        self.trial.scheme.retirement
    }
}

fn parse_scheme(field: &str, text: &str) -> Result<Scheme, TrialError> {
    text.parse()
        .map_err(|e: incransac::config::UnknownScheme| TrialError::config(field, format!("`{text}`: {e}")))
}
