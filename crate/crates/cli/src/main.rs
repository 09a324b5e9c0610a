//! `cmforge`: CM value norms, cross-checks and class polynomials on X_0(p)+.
//!
//! Exit codes: 0 success, 2 invalid input, 3 internal error, 4 crosscheck
//! failure, 5 infeasible class polynomial, 6 interpolation data rejected.

mod commands;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cmforge::gzrhs::RamifiedExponent;
use cmforge::hauptmodul::PrecisionConfig;

use commands::{exit, CliError, ClassPolyArgs, GridArgs, GzArgs, InterpolateArgs, Outcome, RunConfig, StrategyArg};
use report::Format;

const PRECISION_ENV: &str = "CMFORGE_PRECISION";

#[derive(Debug, Parser)]
#[command(name = "cmforge", version, about = "CM value norms and class polynomials on X_0(p)+")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,

    /// Decimal digits for numeric work [default: $CMFORGE_PRECISION or 80].
    #[arg(long, global = true)]
    digits: Option<u32>,

    /// Extra guard digits carried internally.
    #[arg(long, global = true, default_value_t = 10)]
    guard: u32,

    /// Maximum number of series terms per evaluation.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    max_terms: usize,

    /// Exponent for ramified primes: of_mD (ord_q(mD)) or of_m (ord_q(m)).
    #[arg(long, global = true, default_value = "of_mD")]
    ramified_exponent: RamifiedExponent,

    /// q-expansion file for p without a built-in eta quotient.
    #[arg(long, global = true)]
    series: Option<PathBuf>,
}

/// Discriminants may be given as `39` or `-39`.
#[derive(Debug, Args)]
struct PairArgs {
    /// Level p.
    #[arg(long)]
    p: u64,
    /// Discriminant -d (sign optional).
    #[arg(long, allow_negative_numbers = true)]
    d: i64,
    /// Discriminant -D (sign optional).
    #[arg(long = "D", value_name = "D", allow_negative_numbers = true)]
    big_d: i64,
    /// Residue for d [default: smallest admissible].
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<i64>,
    /// Residue for D [default: smallest admissible].
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<i64>,
}

impl PairArgs {
    fn to_gz(&self, breakdown: bool) -> GzArgs {
        GzArgs {
            p: self.p,
            d: self.d.unsigned_abs(),
            big_d: self.big_d.unsigned_abs(),
            beta: self.beta,
            mu: self.mu,
            breakdown,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Strategy {
    Search,
    Numeric,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact prime factorization of the CM value norm.
    Gznorm {
        #[command(flatten)]
        pair: PairArgs,
        /// Per-term table.
        #[arg(long)]
        breakdown: bool,
    },
    /// Exact norm against the numeric Hauptmodul product.
    Crosscheck {
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Crosscheck over a range of discriminant pairs.
    Grid {
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 5)]
        min: u64,
        #[arg(long, default_value_t = 500)]
        max: u64,
        /// Number of pairs.
        #[arg(long, default_value_t = 8)]
        count: usize,
    },
    /// Class polynomial of j*_p at the Heegner points of discriminant -d.
    Classpoly {
        #[arg(long)]
        p: u64,
        #[arg(long, allow_negative_numbers = true)]
        d: i64,
        /// Base discriminant in S(p) (sign optional).
        #[arg(long, allow_negative_numbers = true)]
        base: Option<i64>,
        #[arg(long, value_enum, default_value = "search")]
        strategy: Strategy,
    },
    /// Monic integer polynomial through explicit (X, Y) pairs.
    Interpolate {
        /// Pairs as "x1,y1;x2,y2;...".
        #[arg(long, allow_hyphen_values = true)]
        pairs: String,
        #[arg(long)]
        degree: usize,
        /// Discriminant label (sign optional).
        #[arg(long, allow_negative_numbers = true, default_value_t = 0)]
        d: i64,
    },
    /// Heegner forms and points.
    Heegner {
        #[arg(long, allow_negative_numbers = true)]
        d: i64,
        #[arg(long)]
        p: u64,
        #[arg(long, allow_negative_numbers = true)]
        beta: Option<i64>,
    },
    /// Class-number-one discriminants usable for level p.
    Sset {
        #[arg(long)]
        p: u64,
    },
    /// j*_p at a point of the upper half-plane.
    Eval {
        #[arg(long)]
        p: u64,
        /// tau as "re+im i", e.g. 0.0+1.0i.
        #[arg(long, allow_hyphen_values = true)]
        tau: String,
    },
}

fn default_digits() -> Result<u32, CliError> {
    match std::env::var(PRECISION_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u32>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| CliError::Invalid(format!("{PRECISION_ENV}='{v}' is not a positive integer"))),
        Err(_) => Ok(PrecisionConfig::default().decimal_digits),
    }
}

fn config(cli: &Cli) -> Result<RunConfig, CliError> {
    let base = match &cli.command {
        Command::Classpoly { base, .. } => *base,
        _ => None,
    };
    let digits = match cli.digits {
        Some(d) => d,
        None => default_digits()?,
    };
    let precision = PrecisionConfig::new(digits, cli.guard, cli.max_terms)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok(RunConfig {
        precision,
        ramified_exponent: cli.ramified_exponent,
        base_discriminant: base.map(i64::unsigned_abs),
        output_format: cli.format,
        series_path: cli.series.clone(),
    })
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Gznorm { pair, breakdown } => commands::gznorm(&pair.to_gz(*breakdown), cfg),
        Command::Crosscheck { pair } => commands::crosscheck(&pair.to_gz(false), cfg),
        Command::Grid { p, min, max, count } => commands::grid(
            &GridArgs { p: *p, min: *min, max: *max, count: *count },
            cfg,
        ),
        Command::Classpoly { p, d, strategy, .. } => commands::classpoly(
            &ClassPolyArgs {
                p: *p,
                d: d.unsigned_abs(),
                strategy: match strategy {
                    Strategy::Search => StrategyArg::Search,
                    Strategy::Numeric => StrategyArg::Numeric,
                },
            },
            cfg,
        ),
        Command::Interpolate { pairs, degree, d } => commands::interpolate_cmd(&InterpolateArgs {
            pairs: pairs.clone(),
            degree: *degree,
            d: d.unsigned_abs(),
        }),
        Command::Heegner { d, p, beta } => commands::heegner(d.unsigned_abs(), *p, *beta, cfg),
        Command::Sset { p } => commands::sset(*p),
        Command::Eval { p, tau } => commands::eval(*p, tau, cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("cmforge: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let format = cfg.output_format;
    let outcome = std::panic::catch_unwind(|| run(&cli, &cfg));
    match outcome {
        Ok(Ok(Outcome { report, exit: code })) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(report.render(format).as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(exit::INTERNAL);
            }
            if code == exit::CROSSCHECK_FAIL {
                eprintln!("cmforge: crosscheck FAILED");
            }
            ExitCode::from(code)
        }
        Ok(Err(e)) => {
            eprintln!("cmforge: {e}");
            ExitCode::from(e.exit_code())
        }
        // the panic hook has already printed the message
        Err(_) => ExitCode::from(exit::INTERNAL),
    }
}
