mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use disclab::experiments::{self, Claim};
use disclab::full_coloring::{self, FullColoringParams};
use disclab::{beck_fiala, oracle, Error, SetSystem};
use serde::Serialize;

use report::{AlgorithmInfo, BenchReport, Details, InstanceInfo, Outcome, RunReport, Verification, REPORT_VERSION};

/// Exit status for malformed input or arguments.
const EXIT_INPUT: u8 = 1;
/// A solver gave up or a suite claim failed.
const EXIT_ALGORITHM: u8 = 2;
/// An internal consistency check failed.
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "disc-lab", version, about = "Set-system discrepancy solvers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Color a set system read from a file ("-" for stdin).
    Solve(SolveArgs),
    /// Write a random instance.
    Gen(GenArgs),
    /// Run a seeded experiment suite and check its claims.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Algo {
    /// Iterated partial coloring by constrained Gaussian walks.
    Lm,
    /// Null-space elimination, discrepancy at most 2t - 1.
    BeckFiala,
    /// Exhaustive search (n <= 20).
    Brute,
}

#[derive(Args, Debug)]
struct SolveArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Algo::Lm)]
    algo: Algo,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Band width for lm; defaults to min(0.099, 1/(8 ln m)).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, conflicts_with = "text")]
    json: bool,
    #[arg(long)]
    text: bool,
    /// Recount the discrepancy independently and, for n <= 20, compare with the optimum.
    #[arg(long)]
    verify: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Random,
    BoundedDegree,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Inclusion probability (random).
    #[arg(long)]
    p: Option<f64>,
    /// Sets per point (bounded-degree).
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Suite {
    Spencer,
    BeckFiala,
    WalkClaims,
    Oracle,
    Sampler,
    Rounding,
}

impl Suite {
    fn default_trials(self) -> usize {
        match self {
            Suite::Spencer => 50,
            Suite::BeckFiala => 208,
            Suite::WalkClaims => 200,
            Suite::Oracle => 100,
            Suite::Sampler => 20,
            Suite::Rounding => 10_000,
        }
    }
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// Trials (per size for spencer, draws per value for rounding).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Solve(args) => solve(args),
        Command::Gen(args) => generate(args),
        Command::Bench(args) => bench(args),
    });
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::SolverFailure(_)) => EXIT_ALGORITHM,
        Some(Error::Invariant(_)) => EXIT_INVARIANT,
        _ => EXIT_INPUT,
    }
}

/// `DISC_LAB_THREADS` caps the worker pool; unset or 0 lets rayon decide.
fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("DISC_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .with_context(|| format!("DISC_LAB_THREADS={value:?} is not a non-negative integer"))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn read_input(path: &Path) -> anyhow::Result<SetSystem> {
    let text = if path == Path::new("-") {
        std::io::read_to_string(std::io::stdin()).context("reading stdin")?
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    SetSystem::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn solve(args: SolveArgs) -> anyhow::Result<u8> {
    if args.delta.is_some() && !matches!(args.algo, Algo::Lm) {
        bail!(Error::Contract("--delta only applies to --algo lm".into()));
    }
    let sys = read_input(&args.input)?;
    let started = Instant::now();
    let (algorithm, achieved_disc, bound, coloring, details) = match args.algo {
        Algo::Lm => {
            let params = FullColoringParams {
                k_target: experiments::K_EMP,
                delta_override: args.delta,
                ..FullColoringParams::with_seed(args.seed)
            };
            let r = full_coloring::full_color(&sys, &params)?;
            let algorithm = AlgorithmInfo::Lm {
                seed: args.seed,
                delta: r.delta,
                max_restarts: params.max_restarts,
                phase_retries: full_coloring::PHASE_RETRIES,
                active_floor: full_coloring::ACTIVE_FLOOR,
                k_target: params.k_target,
                thresholds: r.phases.iter().map(|p| p.threshold).collect(),
                gammas: r.phases.iter().map(|p| p.gamma).collect(),
                horizons: r.phases.iter().map(|p| p.steps).collect(),
            };
            (algorithm, r.achieved_disc, r.bound, r.coloring, Details::Lm { phases: r.phases, rounding: r.rounding })
        }
        Algo::BeckFiala => {
            let r = beck_fiala::beck_fiala_color(&sys)?;
            let algorithm = AlgorithmInfo::BeckFiala { max_degree: r.trace.max_degree };
            let bound = r.bound() as f64;
            (algorithm, r.disc, bound, r.coloring, Details::BeckFiala { iterations: r.trace.iterations })
        }
        Algo::Brute => {
            let r = oracle::min_discrepancy_bruteforce(&sys, oracle::DEFAULT_LIMIT)?;
            let algorithm = AlgorithmInfo::Brute { limit: oracle::DEFAULT_LIMIT };
            let details = Details::Brute { colorings_examined: r.colorings_examined };
            (algorithm, r.min_disc, r.min_disc as f64, r.witness, details)
        }
    };
    let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;

    let verification = if args.verify {
        let recounted_disc = oracle::recount_discrepancy(&sys, &coloring)?;
        let optimum = if sys.n() <= oracle::DEFAULT_LIMIT {
            Some(oracle::min_discrepancy_bruteforce(&sys, oracle::DEFAULT_LIMIT)?.min_disc)
        } else {
            None
        };
        Some(Verification { recounted_disc, matches: recounted_disc == achieved_disc, optimum })
    } else {
        None
    };

    let bound_satisfied = achieved_disc as f64 <= bound;
    let report = RunReport {
        report_version: REPORT_VERSION,
        instance: InstanceInfo {
            n: sys.n(),
            m: sys.m(),
            max_degree: sys.max_degree(),
            source: args.input.display().to_string(),
        },
        algorithm,
        outcome: Outcome { achieved_disc, bound, bound_satisfied, coloring: coloring.values().to_vec(), wall_time_ms },
        details,
        verification,
    };

    if args.json || !args.text {
        print_json(&report)?;
    } else {
        print_solve_text(&report);
    }

    if let Some(v) = &report.verification {
        if !v.matches || v.optimum.is_some_and(|opt| opt > achieved_disc) {
            eprintln!("error: verification failed");
            return Ok(EXIT_INVARIANT);
        }
    }
    if !bound_satisfied {
        eprintln!("error: discrepancy {achieved_disc} exceeds bound {bound:.3}");
        return Ok(EXIT_ALGORITHM);
    }
    Ok(0)
}

fn print_solve_text(report: &RunReport) {
    let name = match report.algorithm {
        AlgorithmInfo::Lm { .. } => "lm",
        AlgorithmInfo::BeckFiala { .. } => "beck-fiala",
        AlgorithmInfo::Brute { .. } => "brute",
    };
    let i = &report.instance;
    println!("instance   {} (n = {}, m = {}, max degree {})", i.source, i.n, i.m, i.max_degree);
    println!("algorithm  {name}");
    println!("disc       {}", report.outcome.achieved_disc);
    println!("bound      {:.3}", report.outcome.bound);
    if let Details::Lm { phases, rounding } = &report.details {
        for p in phases {
            println!(
                "phase {:>2}   active {:>4}  c = {:.3}  steps {}/{}  frozen {}  restarts {}",
                p.phase, p.active, p.threshold, p.steps_taken, p.steps, p.frozen_var_count, p.restarts
            );
        }
        println!("rounding   {} rounded, {} flipped, {} exact", rounding.rounded, rounding.flipped, rounding.finished_exactly);
    }
    if let Some(v) = &report.verification {
        print!("verify     recount {} ({})", v.recounted_disc, if v.matches { "ok" } else { "MISMATCH" });
        match v.optimum {
            Some(opt) => println!(", optimum {opt}"),
            None => println!(),
        }
    }
    println!("time       {:.1} ms", report.outcome.wall_time_ms);
    let coloring: String = report.outcome.coloring.iter().map(|&c| if c > 0 { '+' } else { '-' }).collect();
    println!("coloring   {coloring}");
}

fn generate(args: GenArgs) -> anyhow::Result<u8> {
    let (sys, spec) = match args.kind {
        Kind::Random => {
            let Some(p) = args.p else { bail!(Error::Contract("--kind random needs --p".into())) };
            let sys = SetSystem::generate_random(args.n, args.m, p, args.seed)?;
            (sys, format!("random n={} m={} p={p} seed={}", args.n, args.m, args.seed))
        }
        Kind::BoundedDegree => {
            let Some(t) = args.t else { bail!(Error::Contract("--kind bounded-degree needs --t".into())) };
            let sys = SetSystem::generate_bounded_degree(args.n, args.m, t, args.seed)?;
            (sys, format!("bounded-degree n={} m={} t={t} seed={}", args.n, args.m, args.seed))
        }
    };
    let text = format!("# {spec}\n{}", sys.to_text());
    match &args.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(0)
}

fn bench(args: BenchArgs) -> anyhow::Result<u8> {
    let trials = args.trials.unwrap_or(args.suite.default_trials());
    if trials == 0 {
        bail!(Error::Contract("--trials must be at least 1".into()));
    }
    let seed = args.seed;
    let started = Instant::now();
    match args.suite {
        Suite::Spencer => {
            let s = experiments::spencer_suite(trials, seed)?;
            finish_bench("spencer", trials, seed, started, s.claims.clone(), s, args.json)
        }
        Suite::BeckFiala => {
            let s = experiments::beck_fiala_suite(trials, seed)?;
            finish_bench("beck-fiala", trials, seed, started, s.claims.clone(), s, args.json)
        }
        Suite::WalkClaims => {
            let s = experiments::walk_suite(trials, seed)?;
            finish_bench("walk-claims", trials, seed, started, s.claims.clone(), s, args.json)
        }
        Suite::Oracle => {
            let s = experiments::oracle_dominance_suite(trials, seed)?;
            finish_bench("oracle", trials, seed, started, s.claims.clone(), s, args.json)
        }
        Suite::Sampler => {
            let s = experiments::sampler_suite(trials, 10_000, seed)?;
            finish_bench("sampler", trials, seed, started, s.claims.clone(), s, args.json)
        }
        Suite::Rounding => {
            let s = experiments::rounding_suite(trials, 1000, 64, seed)?;
            finish_bench("rounding", trials, seed, started, s.claims.clone(), s, args.json)
        }
    }
}

fn finish_bench<T: Serialize>(
    suite: &str,
    trials: usize,
    seed: u64,
    started: Instant,
    claims: Vec<Claim>,
    results: T,
    json: bool,
) -> anyhow::Result<u8> {
    let passed = experiments::all_passed(&claims);
    let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    if json {
        let report = BenchReport {
            report_version: REPORT_VERSION,
            suite: suite.into(),
            trials,
            seed,
            passed,
            claims,
            wall_time_ms,
            results,
        };
        print_json(&report)?;
    } else {
        println!("suite {suite}: {trials} trials, seed {seed}, {:.1} s", wall_time_ms / 1e3);
        for claim in &claims {
            println!("{}", claim.line());
        }
    }
    Ok(if passed { 0 } else { EXIT_ALGORITHM })
}
