use incransac::Scheme;
use incransac_bench::config::RunConfig;
use incransac_bench::results::{read_results, read_summary, write_diagnostics, write_results, write_summary};
use incransac_bench::sweep::{grid, run_specs};
use incransac_bench::trial::{build_world, run_trial, run_trial_on_world, TrialConfig};
use incransac_bench::world_io::{world_from_str, world_to_string};

fn small_grid() -> RunConfig {
    let mut run = RunConfig::new(true);
    run.ratios = vec![0.0, 0.5];
    run.seeds_per_cell = 2;
    run.trial.seed = 20;
    run
}

#[test]
fn parallel_sweep_matches_sequential() {
    let run = small_grid();
    let specs = grid(&run);
    assert_eq!(specs.len(), 12);
    let one = run_specs(&run.trial, &specs, Some(1));
    let many = run_specs(&run.trial, &specs, Some(4));
    assert!(one.failures.is_empty() && many.failures.is_empty());
    assert_eq!(one.rows(), many.rows());
    assert!(one
        .results
        .iter()
        .zip(&many.results)
        .all(|(a, b)| a.same_outcome(b)));
}

#[test]
fn csv_round_trips_real_results() {
    let run = small_grid();
    let out = run_specs(&run.trial, &grid(&run), None);
    let rows = out.rows();
    let mut buf = Vec::new();
    write_results(&mut buf, &rows).unwrap();
    assert_eq!(read_results(buf.as_slice()).unwrap(), rows);

    let summary = out.summary();
    assert_eq!(summary.len(), 6);
    assert_eq!(summary.iter().map(|s| s.trials).sum::<usize>(), 12);
    let mut buf = Vec::new();
    write_summary(&mut buf, &summary).unwrap();
    assert_eq!(read_summary(buf.as_slice()).unwrap(), summary);
}

#[test]
fn diagnostics_have_one_row_per_viewpoint() {
    let cfg = TrialConfig::quick();
    let r = run_trial(&cfg).unwrap();
    let mut buf = Vec::new();
    write_diagnostics(&mut buf, cfg.scheme.groups, &r.viewpoints).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let body = text.split_once('\n').unwrap().1;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers().unwrap().clone();
    assert_eq!(header.len(), 14 + 2 * cfg.scheme.groups);
    let records: Vec<_> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), r.viewpoints.len());
    for (rec, v) in records.iter().zip(&r.viewpoints) {
        assert_eq!(rec[3].parse::<usize>().unwrap(), v.consumed);
        let alloc: usize = (0..cfg.scheme.groups)
            .map(|i| rec[14 + cfg.scheme.groups + i].parse::<usize>().unwrap_or(0))
            .sum();
        assert!(alloc <= cfg.scheme.budget);
    }
}

#[test]
fn saved_world_reproduces_the_trial() {
    let mut cfg = TrialConfig::quick();
    cfg.world.change_ratio = 0.4;
    cfg.scheme.scheme = Scheme::BreadthFirst;
    let world = build_world(&cfg).unwrap();
    let loaded = world_from_str(&world_to_string(&world)).unwrap();
    assert_eq!(loaded.landmarks(), world.landmarks());
    let a = run_trial(&cfg).unwrap();
    let b = run_trial_on_world(&cfg, &loaded).unwrap();
    assert!(a.same_outcome(&b));
}
