use std::fs::{self, File};
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use incransac::Scheme;
use incransac_bench::config::{FileConfig, RunConfig};
use incransac_bench::results::{self, ResultRow};
use incransac_bench::sweep::run_sweep;
use incransac_bench::trial::{build_world, run_trial_on_world, TrialResult};
use incransac_bench::world_io;

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "incransac-bench", version, about = "Incremental RANSAC relocation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one trial and print its outcome.
    Trial(Common),
    /// Run the ratio × scheme × seed grid.
    Sweep(Common),
    /// Rerun a trial on a saved world file.
    Replay {
        /// World file written by `dump-world` or `trial --out`.
        world: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a world and write it in the text format.
    DumpWorld(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key-value TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// depth, breadth or hybrid. Restricts a sweep to this scheme.
    #[arg(long)]
    scheme: Option<String>,
    /// Fraction of relocated landmarks. Restricts a sweep to this ratio.
    #[arg(long)]
    change_ratio: Option<f64>,
    /// Output directory (file for dump-world). Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the reduced world.
    #[arg(long)]
    quick: bool,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Partial(String),
}

impl From<incransac_bench::trial::TrialError> for Failure {
    fn from(e: incransac_bench::trial::TrialError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

fn resolve(common: &Common, sweep: bool) -> Result<RunConfig, Failure> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut run = RunConfig::from_file(&file, common.quick)?;
    if let Some(seed) = common.seed {
        run.trial.seed = seed;
    }
    if let Some(text) = &common.scheme {
        let scheme: Scheme = text
            .parse()
            .map_err(|e| Failure::Config(format!("--scheme `{text}`: {e}")))?;
        run.trial.scheme.scheme = scheme;
        if sweep {
            run.schemes = vec![scheme];
        }
    }
    if let Some(ratio) = common.change_ratio {
        run.trial.world.change_ratio = ratio;
        if sweep {
            run.ratios = vec![ratio];
        }
    }
    if common.jobs.is_some() {
        run.jobs = common.jobs;
    }
    run.validate()?;
    Ok(run)
}

fn create(path: &Path) -> Result<File, Failure> {
    File::create(path).map_err(|e| io_failure(path, e))
}

fn out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn print_trial(r: &TrialResult) {
    let err = r.error_at_goal.map_or("none".to_string(), |e| format!("{e:.3} m"));
    println!(
        "scheme={} change_ratio={} seed={} error_at_goal={} features={} hypotheses={} live={}",
        r.scheme, r.change_ratio, r.seed, err, r.features, r.hypotheses, r.live_hypotheses
    );
}

fn write_trial_outputs(dir: &Path, run: &RunConfig, r: &TrialResult) -> Result<(), Failure> {
    let results_path = dir.join("results.csv");
    results::write_results(create(&results_path)?, &[ResultRow::from(r)])
        .map_err(|e| io_failure(&results_path, e))?;
    let diag_path = dir.join("diagnostics.csv");
    results::write_diagnostics(create(&diag_path)?, run.trial.scheme.groups, &r.viewpoints)
        .map_err(|e| io_failure(&diag_path, e))
}

fn trial(common: &Common) -> Result<(), Failure> {
    let run = resolve(common, false)?;
    let world = build_world(&run.trial)?;
    let result = run_trial_on_world(&run.trial, &world)?;
    print_trial(&result);
    if let Some(dir) = &common.out {
        out_dir(dir)?;
        let world_path = dir.join("world.txt");
        world_io::write_world(&world, create(&world_path)?).map_err(|e| io_failure(&world_path, e))?;
        write_trial_outputs(dir, &run, &result)?;
    }
    Ok(())
}

fn replay(path: &Path, common: &Common) -> Result<(), Failure> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    let world = world_io::read_world(BufReader::new(file)).map_err(|e| io_failure(path, e))?;
    let mut run = resolve(common, false)?;
    if common.seed.is_none() {
        run.trial.seed = world.seed();
    }
    run.trial.world = *world.params();
    let result = run_trial_on_world(&run.trial, &world)?;
    print_trial(&result);
    if let Some(dir) = &common.out {
        out_dir(dir)?;
        write_trial_outputs(dir, &run, &result)?;
    }
    Ok(())
}

fn sweep(common: &Common) -> Result<(), Failure> {
    let run = resolve(common, true)?;
    let outcome = run_sweep(&run);
    for f in &outcome.failures {
        eprintln!(
            "trial failed: change_ratio={} scheme={} seed={}: {}",
            f.spec.change_ratio, f.spec.scheme, f.spec.seed, f.reason
        );
    }
    let rows = outcome.rows();
    let summary = outcome.summary();
    match &common.out {
        Some(dir) => {
            out_dir(dir)?;
            let path = dir.join("results.csv");
            results::write_results(create(&path)?, &rows).map_err(|e| io_failure(&path, e))?;
            let path = dir.join("summary.csv");
            results::write_summary(create(&path)?, &summary).map_err(|e| io_failure(&path, e))?;
        }
        None => {
            results::write_results(io::stdout().lock(), &rows).map_err(|e| Failure::Config(e.to_string()))?;
        }
    }
    for s in &summary {
        let median = s.median_error.map_or("-".to_string(), |m| format!("{m:.3}"));
        eprintln!(
            "change_ratio={:<5} scheme={:<8} median_error={median} relocated={}/{}",
            s.change_ratio, s.scheme, s.relocated, s.trials
        );
    }
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(format!(
            "{} of {} trials failed",
            outcome.failures.len(),
            outcome.failures.len() + outcome.results.len()
        )))
    }
}

fn dump_world(common: &Common) -> Result<(), Failure> {
    let run = resolve(common, false)?;
    let world = build_world(&run.trial)?;
    match &common.out {
        Some(path) => world_io::write_world(&world, create(path)?).map_err(|e| io_failure(path, e)),
        None => world_io::write_world(&world, io::stdout().lock()).map_err(|e| Failure::Config(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Trial(c) => trial(c),
        Command::Sweep(c) => sweep(c),
        Command::Replay { world, common } => replay(world, common),
        Command::DumpWorld(c) => dump_world(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Partial(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PARTIAL)
        }
    }
}
