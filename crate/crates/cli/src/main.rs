use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ddctl::config::{Overrides, ScenarioConfig};
use ddctl::error::CliError;
use ddctl::report::export_report;
use ddctl::run::{run_scenario, Mode, RunOptions, RunOutcome};
use ddctl::scenarios::{list_scenarios, load_file, resolve, search_path, Source, SCENARIO_PATH_VAR};
use ddctl_core::par::{map_slice, with_threads, Parallelism};

#[derive(Parser)]
#[command(name = "ddctl", version, about = "Data-driven output-feedback design from recorded input/output data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design and certify a controller (stabilization unless --mode says otherwise).
    Synth {
        #[arg(long, value_enum, default_value = "stabilize")]
        mode: ModeArg,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Design a regulator with an internal model and check the regulated error.
    Regulate(RunArgs),
    /// Estimate the observability index from data.
    EstimateIndex(RunArgs),
    /// Collect and filter data only.
    Simulate(RunArgs),
    /// Write a consolidated report for a finished run directory.
    Report { dir: PathBuf },
    /// List built-in scenarios and those found on the search path.
    List {
        /// Extra directory to search (repeatable).
        #[arg(long = "dir")]
        dirs: Vec<PathBuf>,
    },
    /// Print the JSON schema of scenario files.
    Schema,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Stabilize,
    Regulate,
    EstimateIndex,
    Simulate,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Stabilize => Mode::Stabilize,
            ModeArg::Regulate => Mode::Regulate,
            ModeArg::EstimateIndex => Mode::EstimateIndex,
            ModeArg::Simulate => Mode::Simulate,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Built-in or search-path scenario name (repeatable).
    #[arg(long)]
    scenario: Vec<String>,
    /// Scenario file, JSON or TOML (repeatable).
    #[arg(long)]
    config: Vec<PathBuf>,
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Treat data-quality and solvability warnings as errors (default).
    #[arg(long, overrides_with = "no_strict")]
    strict: bool,
    #[arg(long, overrides_with = "strict")]
    no_strict: bool,
    /// Number of scenarios run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write SVG charts of the closed-loop response.
    #[arg(long)]
    svg: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Synth { mode, run } => run_many(&run, mode.into()),
        Command::Regulate(run) => run_many(&run, Mode::Regulate),
        Command::EstimateIndex(run) => run_many(&run, Mode::EstimateIndex),
        Command::Simulate(run) => run_many(&run, Mode::Simulate),
        Command::Report { dir } => match export_report(&dir) {
            Ok(r) => {
                print!("{}", r.to_text());
                0
            }
            Err(e) => report_error(&e),
        },
        Command::List { dirs } => {
            let mut all = search_path();
            all.extend(dirs);
            for e in list_scenarios(&all) {
                let src = match &e.source {
                    Source::BuiltIn => "built-in".to_string(),
                    Source::File(p) => p.display().to_string(),
                };
                match &e.problem {
                    Some(p) => println!("{:<24} {:<10} [invalid: {p}]", e.name, src),
                    None => println!("{:<24} {:<10} {}", e.name, src, e.description),
                }
            }
            0
        }
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&ScenarioConfig::schema()).unwrap_or_default());
            0
        }
    };
    ExitCode::from(code.clamp(0, 255) as u8)
}

fn report_error(e: &CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn run_many(args: &RunArgs, mode: Mode) -> i32 {
    let overrides = Overrides { samples: args.samples, horizon: args.horizon, seed: args.seed };
    let dirs = search_path();
    let mut jobs: Vec<(ScenarioConfig, PathBuf)> = Vec::new();
    for name in &args.scenario {
        match resolve(name, &dirs) {
            Ok(j) => jobs.push(j),
            Err(e) => return report_error(&e),
        }
    }
    for path in &args.config {
        match load_file(path) {
            Ok(j) => jobs.push(j),
            Err(e) => return report_error(&e),
        }
    }
    if jobs.is_empty() {
        return report_error(&CliError::Config(format!(
            "no scenario given; use --scenario NAME or --config PATH (search path: ${SCENARIO_PATH_VAR})"
        )));
    }
    let mut names: Vec<&str> = jobs.iter().map(|(c, _)| c.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return report_error(&CliError::Config("the same scenario name appears twice".into()));
    }
    for (cfg, _) in &mut jobs {
        cfg.apply(&overrides);
    }
    let opts = RunOptions { out_dir: args.out_dir.clone(), strict: !args.no_strict, svg: args.svg };
    let jobs_n = args.jobs.max(1);
    let mode_par = if jobs_n > 1 { Parallelism::Auto } else { Parallelism::Sequential };
    let outcomes: Vec<RunOutcome> =
        with_threads(jobs_n, || map_slice(&jobs, mode_par, |(cfg, base)| run_scenario(cfg, base, mode, &opts)));
    let mut code = 0;
    for o in &outcomes {
        if o.exit_code == 0 {
            println!("{} [{}]: {}", o.scenario, o.mode.as_str(), o.summary);
        } else {
            eprintln!("{} [{}]: {}", o.scenario, o.mode.as_str(), o.summary);
        }
        println!("  artifacts: {}", o.dir.display());
        if code == 0 {
            code = o.exit_code;
        }
    }
    code
}
