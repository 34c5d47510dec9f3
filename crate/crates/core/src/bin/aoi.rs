use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aoi_core::experiments::{
    compare_files, preset, run_scenario, DeviationKind, Manifest, MetricPair, Mode, Scenario, PRESETS,
};
use aoi_core::AoiError;

#[derive(Parser)]
#[command(name = "aoi", version, about = "Age-of-information experiments for Poisson bipolar networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every grid point.
    Simulate(RunArgs),
    /// Solve the analysis at every grid point.
    Analyze(RunArgs),
    /// Compare the adaptive access policy with constant-probability ALOHA.
    Policy(RunArgs),
    /// Run a scenario in its configured mode, or re-run a manifest.
    Sweep(SweepArgs),
    /// Compare two CSV files joined on their key columns.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long, short, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario: fig4 ... fig9.
    #[arg(long, short)]
    preset: Option<String>,
    /// Output directory; overrides the scenario's.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Master seed; overrides the scenario's.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    slots: Option<u64>,
    /// Use a 1 km square region.
    #[arg(long)]
    full_scale: bool,
    /// Print the resolved scenario as TOML and exit.
    #[arg(long)]
    dump_config: bool,
    /// Exit with status 1 when the deviation report has failures.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Manifest of an earlier run to reproduce.
    #[arg(long, conflicts_with_all = ["config", "preset"])]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    left: PathBuf,
    right: PathBuf,
    /// Column pair `left[:right[:kind[:tol]]]`; repeatable. Without pairs
    /// every shared column is compared with itself.
    #[arg(long = "pair")]
    pairs: Vec<String>,
    /// Default deviation kind: rel, abs or sup.
    #[arg(long, default_value = "rel")]
    kind: String,
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    /// Write the report here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

enum Outcome {
    Done,
    Failed,
}

fn load(args: &RunArgs, manifest: Option<&Path>) -> Result<Scenario, AoiError> {
    let mut s = match (manifest, &args.config, &args.preset) {
        (Some(m), _, _) => Manifest::read(m)?.scenario,
        (None, Some(path), _) => Scenario::from_file(path)?,
        (None, None, Some(name)) => preset(name)?,
        (None, None, None) => {
            return Err(AoiError::Config(format!(
                "one of --config, --preset ({}) or --manifest is required",
                PRESETS.join(", ")
            )))
        }
    };
    if let Some(seed) = args.seed {
        s.run.seed = seed;
        s.run.seeds = None;
    }
    if let Some(n) = args.replications {
        s.run.replications = n;
        s.run.seeds = None;
    }
    if let Some(n) = args.slots {
        s.run.slots = n;
    }
    if args.full_scale {
        s.run.full_scale = true;
    }
    if let Some(out) = &args.out {
        s.output_dir = Some(out.clone());
    }
    s.validate()?;
    Ok(s)
}

fn execute(mut scenario: Scenario, args: &RunArgs, mode: Option<Mode>) -> Result<Outcome, AoiError> {
    if let Some(m) = mode {
        scenario.mode = m;
    }
    if args.dump_config {
        print!("{}", scenario.to_toml()?);
        return Ok(Outcome::Done);
    }
    let out = scenario
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    let result = run_scenario(&scenario, Some(&out), args.threads)?;
    println!("{} grid points written to {}", result.points.len(), out.display());
    if let Some(report) = &result.report {
        let verdict = if report.pass() { "pass" } else { "fail" };
        println!(
            "deviation report: {verdict} ({} of {} checks failed)",
            report.failures(),
            report.rows.len()
        );
        if args.strict && !report.pass() {
            return Ok(Outcome::Failed);
        }
    }
    Ok(Outcome::Done)
}

fn compare(args: &CompareArgs) -> Result<Outcome, AoiError> {
    let kind: DeviationKind = args.kind.parse()?;
    let pairs = args
        .pairs
        .iter()
        .map(|p| MetricPair::parse(p, kind, args.tol))
        .collect::<Result<Vec<_>, _>>()?;
    let report = compare_files(&args.left, &args.right, &pairs, kind, args.tol)?;
    match &args.out {
        Some(path) => report.write_csv(path)?,
        None => report.write_to(std::io::stdout().lock())?,
    }
    eprintln!(
        "{}: {} checks, {} failed, max deviation {:e}",
        if report.pass() { "pass" } else { "fail" },
        report.rows.len(),
        report.failures(),
        report.max_deviation()
    );
    Ok(if report.pass() { Outcome::Done } else { Outcome::Failed })
}

fn error_record(err: &AoiError, out: Option<&Path>) {
    let record = serde_json::json!({ "error": err.kind(), "message": err.to_string() });
    eprintln!("{record}");
    if let Some(dir) = out.filter(|d| d.is_dir()) {
        let _ = std::fs::write(dir.join("error.json"), format!("{record}\n"));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out) = match &cli.command {
        Command::Simulate(a) => (load(a, None).and_then(|s| execute(s, a, Some(Mode::Simulate))), a.out.clone()),
        Command::Analyze(a) => (load(a, None).and_then(|s| execute(s, a, Some(Mode::Analyze))), a.out.clone()),
        Command::Policy(a) => (load(a, None).and_then(|s| execute(s, a, Some(Mode::Policy))), a.out.clone()),
        Command::Sweep(a) => (
            load(&a.run, a.manifest.as_deref()).and_then(|s| execute(s, &a.run, None)),
            a.run.out.clone(),
        ),
        Command::Compare(a) => (compare(a), None),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            error_record(&e, out.as_deref());
            ExitCode::from(2)
        }
    }
}
