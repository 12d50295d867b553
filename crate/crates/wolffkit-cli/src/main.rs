//! `wolffkit` command line: classification, potential evaluation,
//! construction verification, iteration traces and parameter atlases.
//!
//! Exit codes: 0 success, 2 bad arguments, 3 quadrature failure,
//! 4 construction mode unavailable, 5 verification failed.

mod config;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::Config;
use rayon::prelude::*;
use report::{to_json, ClassifyReport, IterateReport, ParamsEcho, VerifyReport};
use std::path::PathBuf;
use wolffkit::asymptotics::{iterate_liouville, DEFAULT_MAX_ITER};
use wolffkit::constructions::{
    build_pair, coefficient_ratios, default_ratio_radii, verify_decay_class,
    BoundednessVerdict, ConstructionError, PairMode,
};
use wolffkit::system::{classify, criticality_gap, slow_rates, CoreError};
use wolffkit::wolff::{power_pair_density, wolff_potential, WolffError};
use wolffkit::{QuadratureSpec, SystemParams};

const EXIT_BAD_ARGS: i32 = 2;
const EXIT_QUADRATURE: i32 = 3;
const EXIT_MODE_UNAVAILABLE: i32 = 4;
const EXIT_VERIFICATION_FAILED: i32 = 5;

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "wolffkit",
    version,
    about = "Wolff potentials of radial densities: regime classification, evaluation, explicit constructions and decay-rate checks"
)]
struct Cli {
    /// Key-value config file supplying defaults for omitted flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (fallback: WOLFFKIT_THREADS, then all cores). Output is
    /// byte-identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify parameters into non-existence / admissible regimes.
    Classify(ClassifyArgs),
    /// Evaluate the Wolff potential of a power-pair density on a radius grid.
    Eval(EvalArgs),
    /// Build an explicit solution pair and certify double-boundedness and
    /// decay rates numerically.
    Verify(VerifyArgs),
    /// Run the exponent iteration and report its trace.
    Iterate(IterateArgs),
    /// Classify a (p, q) grid and emit one CSV row per cell.
    Atlas(AtlasArgs),
}

#[derive(Args, Clone)]
struct SystemArgs {
    /// Dimension (integer >= 3).
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    q: Option<f64>,
    /// Hardy weight exponent of the first equation.
    #[arg(long, allow_negative_numbers = true)]
    s1: Option<f64>,
    /// Hardy weight exponent of the second equation.
    #[arg(long, allow_negative_numbers = true)]
    s2: Option<f64>,
    /// Accept sigma values at or below -beta*gamma (still above -n); the
    /// classifier then skips clauses whose justification needs the convention.
    #[arg(long)]
    allow_nonconvention: bool,
}

impl SystemArgs {
    fn resolve(&self, cfg: &Config) -> Result<SystemParams, Failure> {
        let bad = |m: String| Failure::new(EXIT_BAD_ARGS, m);
        let n = require(self.n, "n", cfg)?;
        let beta = require(self.beta, "beta", cfg)?;
        let gamma = require(self.gamma, "gamma", cfg)?;
        let p = require(self.p, "p", cfg)?;
        let q = require(self.q, "q", cfg)?;
        let s1 = require(self.s1, "s1", cfg)?;
        let s2 = require(self.s2, "s2", cfg)?;
        let allow = self.allow_nonconvention
            || cfg.get::<bool>("allow-nonconvention").map_err(bad)?.unwrap_or(false);
        let built = if allow {
            SystemParams::new_relaxed(n, beta, gamma, p, q, s1, s2)
        } else {
            SystemParams::new(n, beta, gamma, p, q, s1, s2)
        };
        built.map_err(|e: CoreError| Failure::new(EXIT_BAD_ARGS, format!("invalid parameters: {e}")))
    }
}

fn require<T: std::str::FromStr + Copy>(
    flag: Option<T>,
    key: &str,
    cfg: &Config,
) -> Result<T, Failure> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get::<T>(key) {
        Ok(Some(v)) => Ok(v),
        Ok(None) => Err(Failure::new(
            EXIT_BAD_ARGS,
            format!("missing required parameter --{key} (flag or config entry)"),
        )),
        Err(m) => Err(Failure::new(EXIT_BAD_ARGS, m)),
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Table,
    Json,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum DataFormat {
    Csv,
    Json,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Slow,
    Fast,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, value_enum, default_value = "table")]
    format: TableFormat,
}

#[derive(Args)]
struct EvalArgs {
    /// Dimension (integer >= 3).
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Profile exponent: density r^sigma (1+r^2)^{-theta*power}.
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Power applied to the profile (q or p in the system).
    #[arg(long, allow_negative_numbers = true)]
    power: Option<f64>,
    /// Comma-separated radii, e.g. --radii 0.5,1,2 (alternative to a range).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    radii: Vec<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    /// Number of log-spaced radii between --r-min and --r-max.
    #[arg(long)]
    r_count: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: DataFormat,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Relative tolerance on fitted decay exponents.
    #[arg(long, default_value_t = 0.02)]
    rate_tol: f64,
    /// Absolute tolerance on fitted log-correction exponents.
    #[arg(long, default_value_t = 0.10)]
    log_tol: f64,
    #[arg(long)]
    rel_tol: Option<f64>,
}

#[derive(Args)]
struct IterateArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Starting exponent; defaults to the fast rate a0.
    #[arg(long, allow_negative_numbers = true)]
    a_start: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
}

#[derive(Args)]
struct AtlasArgs {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    s1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    s2: Option<f64>,
    #[arg(long)]
    allow_nonconvention: bool,
    #[arg(long)]
    p_min: Option<f64>,
    #[arg(long)]
    p_max: Option<f64>,
    #[arg(long)]
    p_steps: Option<usize>,
    #[arg(long)]
    q_min: Option<f64>,
    #[arg(long)]
    q_max: Option<f64>,
    #[arg(long)]
    q_steps: Option<usize>,
}

fn main() {
    let cli = Cli::parse();

    let cfg = match &cli.config {
        Some(path) => match Config::load(path) {
            Ok(c) => c,
            Err(m) => {
                eprintln!("error: {m}");
                std::process::exit(EXIT_BAD_ARGS);
            }
        },
        None => Config::default(),
    };

    let threads = cli
        .threads
        .or_else(|| cfg.get::<usize>("threads").ok().flatten())
        .or_else(|| std::env::var("WOLFFKIT_THREADS").ok().and_then(|s| s.parse().ok()))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool");

    let outcome = pool.install(|| match &cli.command {
        Command::Classify(args) => cmd_classify(args, &cfg),
        Command::Eval(args) => cmd_eval(args, &cfg),
        Command::Verify(args) => cmd_verify(args, &cfg),
        Command::Iterate(args) => cmd_iterate(args, &cfg),
        Command::Atlas(args) => cmd_atlas(args, &cfg),
    });

    if let Err(f) = outcome {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}

/// Shortest round-trip float text with stable nan/inf spellings.
fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), fmt_f64)
}

fn cmd_classify(args: &ClassifyArgs, cfg: &Config) -> CmdResult {
    let params = args.system.resolve(cfg)?;
    let r = classify(&params);
    match args.format {
        TableFormat::Json => {
            let payload = ClassifyReport {
                kind: "classify",
                params: ParamsEcho::from(&params),
                regime: r.regime.as_str().to_string(),
                criterion: r.criterion.to_string(),
                q0: r.q0,
                p0: r.p0,
                a0: r.a0,
                max_slow_rate: r.max_slow_rate,
                criticality_gap: r.criticality_gap,
                convention: r.convention,
            };
            print!("{}", to_json(&payload));
        }
        TableFormat::Table => {
            println!("regime = {}", r.regime.as_str());
            println!("criterion = {}", r.criterion);
            println!("q0 = {}", fmt_opt(r.q0));
            println!("p0 = {}", fmt_opt(r.p0));
            println!("a0 = {}", fmt_f64(r.a0));
            println!("max_slow_rate = {}", fmt_opt(r.max_slow_rate));
            println!("criticality_gap = {}", fmt_opt(r.criticality_gap));
            println!("convention = {}", r.convention);
        }
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs, cfg: &Config) -> CmdResult {
    let n = require(args.n, "n", cfg)?;
    let beta = require(args.beta, "beta", cfg)?;
    let gamma = require(args.gamma, "gamma", cfg)?;
    let theta = require(args.theta, "theta", cfg)?;
    let sigma = require(args.sigma, "sigma", cfg)?;
    let power = require(args.power, "power", cfg)?;

    let radii: Vec<f64> = if !args.radii.is_empty() {
        if args.r_min.is_some() || args.r_max.is_some() || args.r_count.is_some() {
            return Err(Failure::new(
                EXIT_BAD_ARGS,
                "give either --radii or the --r-min/--r-max/--r-count range, not both",
            ));
        }
        args.radii.clone()
    } else {
        let lo = require(args.r_min, "r-min", cfg)?;
        let hi = require(args.r_max, "r-max", cfg)?;
        let count = require(args.r_count, "r-count", cfg)?;
        if !(lo > 0.0 && hi > lo && count >= 2) {
            return Err(Failure::new(
                EXIT_BAD_ARGS,
                "need 0 < --r-min < --r-max and --r-count >= 2",
            ));
        }
        wolffkit::constructions::log_spaced(lo, hi, count)
    };
    if radii.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Failure::new(EXIT_BAD_ARGS, "radii must be finite and nonnegative"));
    }

    let mut spec = QuadratureSpec::default();
    if let Some(t) = args.rel_tol.or(cfg.get("rel-tol").map_err(|m| Failure::new(2, m))?) {
        spec.rel_tol = t;
    }
    let density = power_pair_density(theta, sigma, power);

    let rows: Vec<Result<(f64, f64), (f64, WolffError)>> = radii
        .par_iter()
        .map(|&r| {
            wolff_potential(&density, n, beta, gamma, r, &spec)
                .map(|w| (r, w))
                .map_err(|e| (r, e))
        })
        .collect();

    let mut values = Vec::with_capacity(rows.len());
    for row in rows {
        match row {
            Ok(pair) => values.push(pair),
            Err((r, e @ WolffError::Quadrature(_))) => {
                return Err(Failure::new(
                    EXIT_QUADRATURE,
                    format!("quadrature failure at radius r = {r}: {e}"),
                ))
            }
            Err((r, e)) => {
                return Err(Failure::new(EXIT_BAD_ARGS, format!("at radius r = {r}: {e}")))
            }
        }
    }

    match args.format {
        DataFormat::Csv => {
            let mut out = String::from("r,value\n");
            for (r, w) in &values {
                out.push_str(&format!("{r:.16e},{w:.16e}\n"));
            }
            print!("{out}");
        }
        DataFormat::Json => {
            #[derive(serde::Serialize)]
            struct Row {
                r: f64,
                value: f64,
            }
            let rows: Vec<Row> = values.into_iter().map(|(r, value)| Row { r, value }).collect();
            print!("{}", to_json(&rows));
        }
    }
    Ok(())
}

fn construction_failure(e: ConstructionError) -> Failure {
    match e {
        ConstructionError::NotAdmissible { regime } => Failure::new(
            EXIT_MODE_UNAVAILABLE,
            format!("no explicit pair exists: parameters classify as {}", regime.as_str()),
        ),
        ConstructionError::ModeUnavailable { reason } => {
            Failure::new(EXIT_MODE_UNAVAILABLE, reason)
        }
        ConstructionError::Wolff(WolffError::Quadrature(q)) => {
            Failure::new(EXIT_QUADRATURE, q.to_string())
        }
        ConstructionError::Wolff(w) => Failure::new(EXIT_BAD_ARGS, w.to_string()),
        ConstructionError::Core(c) => Failure::new(EXIT_BAD_ARGS, c.to_string()),
        ConstructionError::WindowTooNarrow { .. } => Failure::new(EXIT_BAD_ARGS, e.to_string()),
        ConstructionError::Fit(f) => Failure::new(EXIT_VERIFICATION_FAILED, f.to_string()),
    }
}

fn cmd_verify(args: &VerifyArgs, cfg: &Config) -> CmdResult {
    let params = args.system.resolve(cfg)?;
    let mode = match args.mode {
        ModeArg::Slow => PairMode::Slow,
        ModeArg::Fast => PairMode::Fast,
    };
    let mut spec = QuadratureSpec::default();
    if let Some(t) = args.rel_tol.or(cfg.get("rel-tol").map_err(|m| Failure::new(2, m))?) {
        spec.rel_tol = t;
    }

    let pair = build_pair(&params, mode).map_err(construction_failure)?;
    let bounded =
        coefficient_ratios(&pair, &default_ratio_radii(), &spec).map_err(construction_failure)?;
    let decay = verify_decay_class(&pair, &spec).map_err(construction_failure)?;

    let rate_ok = |fit: f64, want: f64| (fit - want).abs() <= args.rate_tol * want.abs();
    let rates_ok = rate_ok(decay.u_fit.theta, decay.expected_theta_u)
        && rate_ok(decay.v_fit.theta, decay.expected_theta_v)
        && (decay.v_fit.kappa - decay.expected_kappa_v).abs() <= args.log_tol;
    let verdict_str = match bounded.verdict {
        BoundednessVerdict::DoubleBounded { .. } => "double_bounded",
        BoundednessVerdict::SpreadExceeded => "spread_exceeded",
    };

    let payload = VerifyReport {
        kind: "verify",
        params: ParamsEcho::from(&params),
        mode: match mode {
            PairMode::Slow => "slow".to_string(),
            PairMode::Fast => "fast".to_string(),
        },
        theta1: pair.theta1,
        theta2: pair.theta2,
        spread_c1: bounded.spread_c1,
        spread_c2: bounded.spread_c2,
        outer_spread_c1: bounded.outer_spread_c1,
        outer_spread_c2: bounded.outer_spread_c2,
        theta_u: decay.u_fit.theta,
        theta_v: decay.v_fit.theta,
        kappa_u: decay.u_fit.kappa,
        kappa_v: decay.v_fit.kappa,
        expected_theta_u: decay.expected_theta_u,
        expected_theta_v: decay.expected_theta_v,
        expected_kappa_v: decay.expected_kappa_v,
        verdict: verdict_str.to_string(),
        rates_within_tolerance: rates_ok,
    };
    print!("{}", to_json(&payload));

    if bounded.verdict == BoundednessVerdict::SpreadExceeded || !rates_ok {
        return Err(Failure::new(
            EXIT_VERIFICATION_FAILED,
            format!(
                "verification failed: verdict {verdict_str}, rates_within_tolerance {rates_ok}"
            ),
        ));
    }
    Ok(())
}

fn cmd_iterate(args: &IterateArgs, cfg: &Config) -> CmdResult {
    let params = args.system.resolve(cfg)?;
    if args.max_iter == 0 {
        return Err(Failure::new(EXIT_BAD_ARGS, "--max-iter must be >= 1"));
    }
    let a_start = args.a_start.unwrap_or_else(|| wolffkit::system::fast_rate(&params));
    let trace = iterate_liouville(&params, a_start, args.max_iter);
    let payload = IterateReport {
        kind: "iterate",
        params: ParamsEcho::from(&params),
        a_start,
        max_iter: args.max_iter,
        a: trace.a,
        b: trace.b,
        verdict: trace.verdict,
        closed_form_check: trace.closed_form_check,
    };
    print!("{}", to_json(&payload));
    Ok(())
}

fn cmd_atlas(args: &AtlasArgs, cfg: &Config) -> CmdResult {
    let n = require(args.n, "n", cfg)?;
    let beta = require(args.beta, "beta", cfg)?;
    let gamma = require(args.gamma, "gamma", cfg)?;
    let s1 = require(args.s1, "s1", cfg)?;
    let s2 = require(args.s2, "s2", cfg)?;
    let p_min = require(args.p_min, "p-min", cfg)?;
    let p_max = require(args.p_max, "p-max", cfg)?;
    let p_steps = require(args.p_steps, "p-steps", cfg)?;
    let q_min = require(args.q_min, "q-min", cfg)?;
    let q_max = require(args.q_max, "q-max", cfg)?;
    let q_steps = require(args.q_steps, "q-steps", cfg)?;

    for (name, lo, hi, steps) in [("p", p_min, p_max, p_steps), ("q", q_min, q_max, q_steps)] {
        if !(lo > 0.0 && lo < hi && steps >= 2) {
            return Err(Failure::new(
                EXIT_BAD_ARGS,
                format!("invalid {name} range: need 0 < {name}-min < {name}-max and {name}-steps >= 2"),
            ));
        }
    }
    let allow = args.allow_nonconvention;

    let grid_value = |lo: f64, hi: f64, steps: usize, i: usize| {
        lo + (hi - lo) * i as f64 / (steps - 1) as f64
    };

    // cells evaluate independently; the collected order is the row order, so
    // output does not depend on the thread count
    let cells: Vec<String> = (0..p_steps * q_steps)
        .into_par_iter()
        .map(|idx| {
            let i = idx / q_steps;
            let j = idx % q_steps;
            let p = grid_value(p_min, p_max, p_steps, i);
            let q = grid_value(q_min, q_max, q_steps, j);
            let built = if allow {
                SystemParams::new_relaxed(n, beta, gamma, p, q, s1, s2)
            } else {
                SystemParams::new(n, beta, gamma, p, q, s1, s2)
            };
            match built {
                Ok(params) => {
                    let rep = classify(&params);
                    let (q0, p0) = slow_rates(&params).map_or((None, None), |(a, b)| (Some(a), Some(b)));
                    let gap = criticality_gap(&params).ok().map(|g| g.gap);
                    format!(
                        "{},{},{},{},{},{},{}",
                        fmt_f64(p),
                        fmt_f64(q),
                        rep.regime.as_str(),
                        fmt_opt(q0),
                        fmt_opt(p0),
                        fmt_f64(rep.a0),
                        fmt_opt(gap)
                    )
                }
                Err(e) => format!("{},{},invalid({e}),nan,nan,nan,nan", fmt_f64(p), fmt_f64(q)),
            }
        })
        .collect();

    let mut out = String::from("p,q,regime,q0,p0,a0,criticality_gap\n");
    for line in cells {
        out.push_str(&line);
        out.push('\n');
    }
    print!("{out}");

    let admissible = out.matches(",admissible,").count();
    eprintln!(
        "atlas: {} cells, {} admissible, {} nonexistence",
        p_steps * q_steps,
        admissible,
        out.matches(",nonexistence_").count()
    );
    Ok(())
}
