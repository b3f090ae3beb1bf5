//! Ratio × scheme × seed grids run in parallel.

use std::panic::{self, AssertUnwindSafe};

use incransac::Scheme;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::results::{scheme_rank, summarize, ResultRow, SummaryRow};
use crate::trial::{run_trial, TrialConfig, TrialResult};

/// Coordinates of one trial in the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSpec {
    pub change_ratio: f64,
    pub scheme: Scheme,
    pub seed: u64,
}

impl TrialSpec {
    pub fn config(&self, base: &TrialConfig) -> TrialConfig {
        let mut cfg = base.clone();
        cfg.world.change_ratio = self.change_ratio;
        cfg.scheme.scheme = self.scheme;
        cfg.seed = self.seed;
        cfg
    }

    fn key(&self) -> (f64, usize, u64) {
        (self.change_ratio, scheme_rank(self.scheme), self.seed)
    }
}

fn by_key(a: (f64, usize, u64), b: (f64, usize, u64)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// Every trial of the grid in emission order. Seeds run from the master
/// seed upward, so all schemes of a cell see the same worlds.
pub fn grid(run: &RunConfig) -> Vec<TrialSpec> {
    let mut specs = Vec::new();
    for &change_ratio in &run.ratios {
        for &scheme in &run.schemes {
            for k in 0..run.seeds_per_cell {
                specs.push(TrialSpec {
                    change_ratio,
                    scheme,
                    seed: run.trial.seed.wrapping_add(k),
                });
            }
        }
    }
    specs.sort_by(|a, b| by_key(a.key(), b.key()));
    specs.dedup_by(|a, b| a.key() == b.key());
    specs
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub spec: TrialSpec,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Completed trials sorted by (ratio, scheme, seed).
    pub results: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
}

impl SweepOutcome {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.results.iter().map(ResultRow::from).collect()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let failed: Vec<(f64, Scheme)> = self
            .failures
            .iter()
            .map(|f| (f.spec.change_ratio, f.spec.scheme))
            .collect();
        summarize(&self.rows(), &failed)
    }
}

fn run_one(base: &TrialConfig, spec: TrialSpec) -> Result<TrialResult, TrialFailure> {
    let cfg = spec.config(base);
    let fail = |reason: String| TrialFailure { spec, reason };
    match panic::catch_unwind(AssertUnwindSafe(|| run_trial(&cfg))) {
        Ok(Ok(result)) => Ok(result),
        Ok(Err(e)) => Err(fail(e.to_string())),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "trial panicked".to_string());
            Err(fail(msg))
        }
    }
}

/// Runs `specs` on `jobs` worker threads (all cores when `None`). A failing
/// trial is recorded and the rest continue.
pub fn run_specs(base: &TrialConfig, specs: &[TrialSpec], jobs: Option<usize>) -> SweepOutcome {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .expect("thread pool");
    let outcomes: Vec<Result<TrialResult, TrialFailure>> =
        pool.install(|| specs.par_iter().map(|&spec| run_one(base, spec)).collect());

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    let key = |r: &TrialResult| (r.change_ratio, scheme_rank(r.scheme), r.seed);
    results.sort_by(|a, b| by_key(key(a), key(b)));
    failures.sort_by(|a, b| by_key(a.spec.key(), b.spec.key()));
    SweepOutcome { results, failures }
}

pub fn run_sweep(run: &RunConfig) -> SweepOutcome {
    run_specs(&run.trial, &grid(run), run.jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts_and_order() {
        let mut run = RunConfig::new(true);
        run.ratios = vec![0.5, 0.0, 0.25];
        run.seeds_per_cell = 3;
        run.trial.seed = 10;
        let g = grid(&run);
        assert_eq!(g.len(), 27);
        assert_eq!(g[0].change_ratio, 0.0);
        assert_eq!(g[0].scheme, Scheme::DepthFirst);
        assert_eq!(g.iter().take(3).map(|s| s.seed).collect::<Vec<_>>(), [10, 11, 12]);
        assert!(g.windows(2).all(|w| by_key(w[0].key(), w[1].key()).is_lt()));
    }

    #[test]
    fn failures_are_collected() {
        let mut base = TrialConfig::quick();
        base.world.landmark_count = 50;
        base.trajectory.goal = base.trajectory.start;
        let good = TrialSpec {
            change_ratio: 0.0,
            scheme: Scheme::Hybrid,
            seed: 1,
        };
        let bad = TrialSpec { change_ratio: 2.0, ..good };
        let out = run_specs(&base, &[bad, good], Some(1));
        assert_eq!(out.results.len(), 1);
        assert_eq!(out.failures.len(), 1);
        assert!(out.failures[0].reason.contains("change_ratio"), "{}", out.failures[0].reason);
        let summary = out.summary();
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[1].failed, 1);
    }
}
