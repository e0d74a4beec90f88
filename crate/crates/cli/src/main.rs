use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use delaybound::lmi::HierarchyParams;
use delaybound::projection::crosscheck_closed_forms;
use delaybound::sdp::SolverOptions;
use delaybound::search::{bounds_report, hierarchy_sweep, Direction, SearchOptions};
use delaybound::system::{bundled, SystemFile};
use delaybound::verify::{run_all, VerifyConfig};
use delaybound::Error;

const EXIT_INPUT: u8 = 1;
const EXIT_NO_FEASIBLE: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const EXIT_MONOTONICITY: u8 = 4;
const EXIT_VERIFY_FAILED: u8 = 5;

/// Delay-stability bounds from a hierarchy of LMI conditions.
///
/// Solver thresholds can be overridden with DELAYBOUND_FEAS_THRESHOLD,
/// DELAYBOUND_GAP_TOL, DELAYBOUND_BOX_BOUND and DELAYBOUND_MAX_ITER.
/// DELAYBOUND_SOLVER_LOG=1 prints solver iterations to stderr.
#[derive(Parser)]
#[command(name = "delaybound", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Upper, lower or interval delay bounds for one (M, m).
    Bounds(BoundsArgs),
    /// Upper bounds over M = 1..=M and m = 0..=m, with monotonicity checks.
    Sweep(SweepArgs),
    /// Randomized property suites for the polynomial and inequality layers.
    Verify(VerifyArgs),
    /// Compare the printed closed forms against the basis-change matrices.
    Crosscheck(CrosscheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Upper,
    Lower,
    Interval,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Upper => Direction::Upper,
            DirectionArg::Lower => Direction::Lower,
            DirectionArg::Interval => Direction::Interval,
        }
    }
}

#[derive(Args)]
struct SystemArgs {
    /// JSON system file, or the name of a bundled example (example1, example2, example3).
    #[arg(long)]
    system: String,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[arg(long = "M", default_value_t = 1)]
    big_m: usize,
    #[arg(long = "m", default_value_t = 1)]
    m: usize,
    #[arg(long, value_enum, default_value = "upper")]
    direction: DirectionArg,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Largest M.
    #[arg(long = "M", default_value_t = 3)]
    big_m: usize,
    /// Largest m.
    #[arg(long = "m", default_value_t = 1)]
    m: usize,
    /// Smallest m.
    #[arg(long = "m-min", default_value_t = 0)]
    m_min: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 2017)]
    seed: u64,
    /// Randomized soundness cases.
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    #[arg(long = "max-m", default_value_t = 3)]
    max_m: usize,
    #[arg(long = "max-M", default_value_t = 6)]
    max_big_m: usize,
    #[arg(long = "max-dim", default_value_t = 3)]
    max_dim: usize,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long = "corrupt-xi", hide = true)]
    corrupt_xi: bool,
}

#[derive(Args)]
struct CrosscheckArgs {
    #[arg(long = "m", default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    nu: usize,
    #[arg(long = "M", default_value_t = 3)]
    big_m: usize,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoFeasiblePoint { .. } => EXIT_NO_FEASIBLE,
            _ => EXIT_INPUT,
        };
        Failure(code, e.to_string())
    }
}

fn load_system(spec: &str) -> Result<SystemFile, Failure> {
    let path = PathBuf::from(spec);
    if path.exists() {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Failure(EXIT_INPUT, format!("cannot read {}: {e}", path.display())))?;
        let mut file = SystemFile::from_json(&text).map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))?;
        if file.name.is_none() {
            file.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(file)
    } else {
        bundled(spec).map_err(|_| Failure(EXIT_INPUT, format!("{spec}: no such file or bundled system")))
    }
}

fn search_options(tol: f64) -> Result<SearchOptions, Failure> {
    let opts = SearchOptions {
        tol,
        solver: SolverOptions::from_env()?,
        ..Default::default()
    };
    opts.validate()?;
    Ok(opts)
}

fn bounds(args: BoundsArgs) -> Result<u8, Failure> {
    let file = load_system(&args.sys.system)?;
    let sys = file.to_system()?;
    let params = HierarchyParams::new(args.big_m, args.m)?;
    let opts = search_options(args.sys.tol)?;
    let report = bounds_report(&file.display_name(), &sys, params, args.direction.into(), &opts)?;
    print!(
        "{}",
        match args.sys.format {
            Format::Text => report.to_text(),
            Format::Json => report.to_json() + "\n",
            Format::Csv => report.to_csv(),
        }
    );
    if report.range_certified == Some(false) {
        eprintln!("warning: the interval is not certified by the delay-range conditions");
    }
    if 2 * report.inconclusive_probes > report.probes.len() {
        eprintln!(
            "{} of {} probes were numerically inconclusive",
            report.inconclusive_probes,
            report.probes.len()
        );
        return Ok(EXIT_INCONCLUSIVE);
    }
    Ok(0)
}

fn sweep(args: SweepArgs) -> Result<u8, Failure> {
    let file = load_system(&args.sys.system)?;
    let sys = file.to_system()?;
    if args.big_m == 0 || args.m_min > args.m {
        return Err(Failure(EXIT_INPUT, "sweep needs M >= 1 and m-min <= m".into()));
    }
    let opts = search_options(args.sys.tol)?;
    let result = hierarchy_sweep(&file.display_name(), &sys, 1..=args.big_m, args.m_min..=args.m, &opts)?;
    print!(
        "{}",
        match args.sys.format {
            Format::Text => result.to_text(),
            Format::Json => result.to_json() + "\n",
            Format::Csv => result.to_csv(),
        }
    );
    if !result.violations.is_empty() {
        return Ok(EXIT_MONOTONICITY);
    }
    if result.cells.iter().any(|c| c.error.is_some()) {
        return Ok(EXIT_NO_FEASIBLE);
    }
    let (inconclusive, total) = result
        .cells
        .iter()
        .fold((0, 0), |(i, t), c| (i + c.inconclusive_probes, t + c.probes));
    if 2 * inconclusive > total {
        return Ok(EXIT_INCONCLUSIVE);
    }
    Ok(0)
}

fn verify(args: VerifyArgs) -> Result<u8, Failure> {
    let cfg = VerifyConfig {
        seed: args.seed,
        soundness_cases: args.cases,
        max_m: args.max_m,
        max_big_m: args.max_big_m,
        max_dim: args.max_dim,
        corrupt_xi: args.corrupt_xi,
    };
    if cfg.max_big_m == 0 || cfg.max_dim == 0 {
        return Err(Failure(EXIT_INPUT, "max-M and max-dim must be positive".into()));
    }
    let report = run_all(&cfg)?;
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("reports serialize")),
        _ => print!("{}", report.to_text()),
    }
    Ok(if report.passed() { 0 } else { EXIT_VERIFY_FAILED })
}

fn crosscheck(args: CrosscheckArgs) -> Result<u8, Failure> {
    let report = crosscheck_closed_forms(args.m, args.nu, args.big_m)?;
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("reports serialize")),
        Format::Csv => {
            println!("item,agrees,detail");
            for e in &report.entries {
                println!("{},{},{}", e.item, e.agrees, e.detail.replace(',', ";"));
            }
        }
        Format::Text => {
            println!("m={}, nu={}, M={}", report.m, report.nu, report.big_m);
            for e in &report.entries {
                println!("{:<10} {:<24} {}", if e.agrees { "agrees" } else { "DIFFERS" }, e.item, e.detail);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Bounds(a) => bounds(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify(a),
        Command::Crosscheck(a) => crosscheck(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
