//! Subcommand bodies. Each returns a [`Report`] plus the exit status it
//! implies, or a [`CliError`] when nothing useful can be printed.

use std::path::PathBuf;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use thiserror::Error;

use cmforge::arith::is_fundamental_discriminant;
use cmforge::gzrhs::{
    evaluate, smallest_residue, GzError, GzEvaluation, GzParams, PrimeLogSum, RamifiedExponent,
};
use cmforge::hauptmodul::{
    hauptmodul_value_with_bound, heegner_tau, lhs_log_norm, reduce_point, HauptError,
    PrecisionConfig, QSeries, ETA_PRIMES,
};
use cmforge::hcp::{
    class_polynomial, interpolate, s_set, usable_s_set, ClassPolynomial, HcpError, HcpProblem,
    InterpolationPair, Irreducibility, SignStrategy, GENUS_ZERO_PRIMES,
};
use cmforge::highprec::{Complex, Real};
use cmforge::quadforms::{admissible_residues, class_number, heegner_point, heegner_reps, FormError};

use crate::report::{int_value, log_sum_value, rational_string, Format, Report};

/// Relative tolerance for the RHS/LHS comparison.
pub const CROSSCHECK_TOLERANCE: f64 = 1e-8;

/// Below this many digits the comparison at [`CROSSCHECK_TOLERANCE`] is
/// not meaningful.
pub const MIN_CROSSCHECK_DIGITS: u32 = 30;

pub mod exit {
    pub const OK: u8 = 0;
    pub const INVALID: u8 = 2;
    pub const INTERNAL: u8 = 3;
    pub const CROSSCHECK_FAIL: u8 = 4;
    pub const INFEASIBLE: u8 = 5;
    pub const REJECTED: u8 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("interpolation data rejected: {0}")]
    Rejected(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => exit::INVALID,
            CliError::Internal(_) => exit::INTERNAL,
            CliError::Infeasible(_) => exit::INFEASIBLE,
            CliError::Rejected(_) => exit::REJECTED,
        }
    }
}

impl From<GzError> for CliError {
    fn from(e: GzError) -> Self {
        if e.is_invalid_input() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl From<FormError> for CliError {
    fn from(e: FormError) -> Self {
        match e {
            FormError::SearchExhausted { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<HauptError> for CliError {
    fn from(e: HauptError) -> Self {
        match e {
            HauptError::NotInUpperHalfPlane(_)
            | HauptError::SeriesRequired(_)
            | HauptError::SeriesMismatch { .. }
            | HauptError::Precision(_)
            | HauptError::Series(_) => CliError::Invalid(e.to_string()),
            HauptError::Form(f) => f.into(),
            HauptError::Params(g) => g.into(),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<HcpError> for CliError {
    fn from(e: HcpError) -> Self {
        match e {
            HcpError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            _ if e.is_invalid_input() => CliError::Invalid(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub precision: PrecisionConfig,
    pub ramified_exponent: RamifiedExponent,
    pub base_discriminant: Option<u64>,
    pub output_format: Format,
    pub series_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn digits(&self) -> u32 {
        self.precision.decimal_digits
    }

    fn series(&self, p: u64) -> Result<Option<QSeries>, CliError> {
        let Some(path) = &self.series_path else {
            return Ok(None);
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        let s = QSeries::parse(&text)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        if s.p() != p {
            return Err(HauptError::SeriesMismatch { expected: p, found: s.p() }.into());
        }
        Ok(Some(s))
    }

    /// Series data, or an error when `p` has no built-in eta quotient.
    fn numeric_source(&self, p: u64) -> Result<Option<QSeries>, CliError> {
        let s = self.series(p)?;
        if s.is_none() && !ETA_PRIMES.contains(&p) {
            return Err(HauptError::SeriesRequired(p).into());
        }
        Ok(s)
    }

    fn params_json(&self, r: &mut Report) {
        r.param("digits", self.digits());
        r.param("ramified_exponent", self.ramified_exponent.name());
    }
}

pub struct Outcome {
    pub report: Report,
    pub exit: u8,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Outcome { report, exit: exit::OK }
    }
}

fn genus_warning(p: u64, r: &mut Report) {
    if cmforge::arith::is_prime(p) && !GENUS_ZERO_PRIMES.contains(&p) {
        r.warnings.push(format!("X_0({p})+ does not have genus zero; j*_{p} is not a Hauptmodul"));
    }
}

fn real_string(x: &Real, digits: u32) -> String {
    x.to_sci_string(digits)
}

fn resolve_params(
    p: u64,
    d: u64,
    big_d: u64,
    beta: Option<i64>,
    mu: Option<i64>,
) -> Result<GzParams, CliError> {
    let pick = |x: u64, given: Option<i64>| -> Result<i64, CliError> {
        match given {
            Some(v) => Ok(v),
            None => smallest_residue(x, p)
                .map(|r| r as i64)
                .ok_or_else(|| GzError::NoResidue(x, 4 * p).into()),
        }
    };
    if !cmforge::arith::is_prime(p) {
        return Err(GzError::NotPrime(p).into());
    }
    // validate discriminants before looking for residues
    for x in [d, big_d] {
        if !is_fundamental_discriminant(-(x as i64)) {
            return Err(GzError::NotFundamental(x).into());
        }
        if x <= 4 {
            return Err(GzError::SmallDiscriminant(x).into());
        }
    }
    if d == big_d {
        return Err(GzError::EqualDiscriminants.into());
    }
    Ok(GzParams::new(p, d, big_d, pick(big_d, mu)?, pick(d, beta)?)?)
}

fn gz_params_json(params: &GzParams, r: &mut Report) {
    r.param("p", params.p());
    r.param("d", params.d());
    r.param("beta", params.beta());
    r.param("D", params.big_d());
    r.param("mu", params.mu());
}

fn magnitude_value(total: &PrimeLogSum) -> Value {
    let n = total.eighth_root();
    match n.to_integer() {
        Some(v) => int_value(&BigInt::from(v)),
        None => json!(n.to_string()),
    }
}

fn breakdown_json(eval: &GzEvaluation) -> Value {
    Value::Array(
        eval.contributions
            .iter()
            .map(|c| {
                json!({
                    "sign": c.term.sign.to_string(),
                    "y": c.term.y,
                    "n": c.term.n,
                    "t": int_value(&BigInt::from(c.term.t)),
                    "m": rational_string(&c.term.m),
                    "diff": c.diff.iter().collect::<Vec<_>>(),
                    "o": c.o,
                    "contribution": log_sum_value(&c.as_log_sum()),
                })
            })
            .collect(),
    )
}

fn breakdown_text(eval: &GzEvaluation) -> String {
    let mut out = String::from("sign      y      n            m  Diff(m)  o  contribution\n");
    for c in &eval.contributions {
        let diff: Vec<String> = c.diff.iter().map(|q| q.to_string()).collect();
        let contrib = match c.weight {
            Some((q, k)) => format!("{k}*log({q})"),
            None => "0".to_string(),
        };
        out.push_str(&format!(
            "{:>4} {:>6} {:>6} {:>12}  {:>7} {:>2}  {}\n",
            c.term.sign.to_string(),
            c.term.y,
            c.term.n,
            c.term.m.to_string(),
            format!("{{{}}}", diff.join(",")),
            c.o,
            contrib
        ));
    }
    out
}

pub struct GzArgs {
    pub p: u64,
    pub d: u64,
    pub big_d: u64,
    pub beta: Option<i64>,
    pub mu: Option<i64>,
    pub breakdown: bool,
}

pub fn gznorm(args: &GzArgs, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = resolve_params(args.p, args.d, args.big_d, args.beta, args.mu)?;
    let eval = evaluate(&params, cfg.ramified_exponent)?;
    let total = &eval.total;
    if !total.is_nonnegative_integral() {
        return Err(CliError::Internal(format!("log norm {total} has a negative or fractional exponent")));
    }
    let digits = cfg.digits();
    let value = total.to_real(cfg.precision.working_bits());
    let magnitude = total.eighth_root();

    let mut r = Report::new("gznorm");
    gz_params_json(&params, &mut r);
    cfg.params_json(&mut r);
    genus_warning(params.p(), &mut r);
    let mut result = Map::new();
    result.insert("log_norm".into(), log_sum_value(total));
    result.insert("value".into(), json!(real_string(&value, digits)));
    result.insert("norm".into(), magnitude_value(total));
    result.insert(
        "norm_factors".into(),
        Value::Object(
            magnitude
                .factors
                .iter()
                .map(|(q, e)| (q.to_string(), json!(rational_string(e))))
                .collect(),
        ),
    );
    result.insert("terms".into(), json!(eval.contributions.len()));
    if args.breakdown {
        result.insert("breakdown".into(), breakdown_json(&eval));
    }
    r.result = Value::Object(result);

    r.text = format!(
        "p = {}, d = {} (beta = {}), D = {} (mu = {}), ramified exponent {}\n\
         log N^8 = {}\nvalue   = {}\nnorm    = {}\n",
        params.p(),
        params.d(),
        params.beta(),
        params.big_d(),
        params.mu(),
        cfg.ramified_exponent.name(),
        total,
        real_string(&value, digits.min(30)),
        magnitude
    );
    if args.breakdown {
        r.text.push_str(&breakdown_text(&eval));
    }
    r.csv_header = "p,d,beta,D,mu,prime,exponent";
    r.csv_rows = total
        .exponents()
        .iter()
        .map(|(q, e)| {
            format!(
                "{},{},{},{},{},{},{}",
                params.p(),
                params.d(),
                params.beta(),
                params.big_d(),
                params.mu(),
                q,
                rational_string(e)
            )
        })
        .collect();
    Ok(r.into())
}

/// RHS against LHS for one variant.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub variant: RamifiedExponent,
    pub rhs: Real,
    pub abs_diff: Real,
    pub rel_diff: Real,
    pub pass: bool,
}

fn compare(rhs: Real, lhs: &Real, variant: RamifiedExponent, bits: u32) -> Comparison {
    let abs_diff = (&rhs - lhs).abs();
    let one = Real::from_i64(1, bits);
    let scale = lhs.abs().max(one);
    let rel_diff = abs_diff.quotient(&scale);
    let pass = rel_diff.to_f64() < CROSSCHECK_TOLERANCE;
    Comparison { variant, rhs, abs_diff, rel_diff, pass }
}

/// Outcome of one crosscheck, with every variant whose RHS differs.
#[derive(Debug, Clone)]
pub struct CrosscheckRow {
    pub params: GzParams,
    pub lhs: Real,
    pub lhs_error_bound: f64,
    pub selected: Comparison,
    pub others: Vec<Comparison>,
}

impl CrosscheckRow {
    fn to_json(&self, digits: u32) -> Value {
        let cmp = |c: &Comparison| {
            json!({
                "variant": c.variant.name(),
                "rhs": real_string(&c.rhs, digits),
                "abs_diff": real_string(&c.abs_diff, 6),
                "rel_diff": real_string(&c.rel_diff, 6),
                "status": status(c.pass),
            })
        };
        json!({
            "p": self.params.p(),
            "d": self.params.d(),
            "beta": self.params.beta(),
            "D": self.params.big_d(),
            "mu": self.params.mu(),
            "lhs": real_string(&self.lhs, digits),
            "lhs_error_bound": format!("{:e}", self.lhs_error_bound),
            "rhs": real_string(&self.selected.rhs, digits),
            "abs_diff": real_string(&self.selected.abs_diff, 6),
            "rel_diff": real_string(&self.selected.rel_diff, 6),
            "status": status(self.selected.pass),
            "variant": self.selected.variant.name(),
            "variants": std::iter::once(&self.selected).chain(&self.others).map(cmp).collect::<Vec<_>>(),
        })
    }

    fn csv_row(&self, digits: u32) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.params.p(),
            self.params.d(),
            self.params.beta(),
            self.params.big_d(),
            self.params.mu(),
            real_string(&self.selected.rhs, digits),
            real_string(&self.lhs, digits),
            real_string(&self.selected.rel_diff, 6),
            status(self.selected.pass)
        )
    }

    fn text(&self, digits: u32) -> String {
        let shown = digits.min(30);
        let mut out = format!(
            "p = {}, d = {} (beta = {}), D = {} (mu = {})\n  RHS [{}] = {}\n  LHS       = {}\n  |diff| = {}, relative {}  {}\n",
            self.params.p(),
            self.params.d(),
            self.params.beta(),
            self.params.big_d(),
            self.params.mu(),
            self.selected.variant.name(),
            real_string(&self.selected.rhs, shown),
            real_string(&self.lhs, shown),
            real_string(&self.selected.abs_diff, 3),
            real_string(&self.selected.rel_diff, 3),
            status(self.selected.pass)
        );
        for c in &self.others {
            out.push_str(&format!(
                "  RHS [{}] = {}  relative {}  {}\n",
                c.variant.name(),
                real_string(&c.rhs, shown),
                real_string(&c.rel_diff, 3),
                status(c.pass)
            ));
        }
        out
    }
}

fn status(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub const CROSSCHECK_CSV: &str = "p,d,beta,D,mu,rhs,lhs,rel_diff,status";

pub fn crosscheck_row(
    params: &GzParams,
    cfg: &RunConfig,
    series: Option<&QSeries>,
) -> Result<CrosscheckRow, CliError> {
    let bits = cfg.precision.working_bits();
    let selected_variant = cfg.ramified_exponent;
    let exact = evaluate(params, selected_variant)?.total;
    let lhs = lhs_log_norm(params, &cfg.precision, series)?;
    let selected = compare(exact.to_real(bits), &lhs.value, selected_variant, bits);
    let mut others = Vec::new();
    for v in [RamifiedExponent::OfMD, RamifiedExponent::OfM] {
        if v == selected_variant {
            continue;
        }
        let alt = evaluate(params, v)?.total;
        if alt != exact {
            others.push(compare(alt.to_real(bits), &lhs.value, v, bits));
        }
    }
    Ok(CrosscheckRow { params: *params, lhs: lhs.value, lhs_error_bound: lhs.error_bound, selected, others })
}

fn check_crosscheck_digits(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.digits() < MIN_CROSSCHECK_DIGITS {
        return Err(CliError::Invalid(format!(
            "--digits {} is too low for a 1e-8 comparison (need at least {MIN_CROSSCHECK_DIGITS})",
            cfg.digits()
        )));
    }
    Ok(())
}

pub fn crosscheck(args: &GzArgs, cfg: &RunConfig) -> Result<Outcome, CliError> {
    check_crosscheck_digits(cfg)?;
    let params = resolve_params(args.p, args.d, args.big_d, args.beta, args.mu)?;
    let series = cfg.numeric_source(params.p())?;
    let row = crosscheck_row(&params, cfg, series.as_ref())?;
    let digits = cfg.digits();

    let mut r = Report::new("crosscheck");
    gz_params_json(&params, &mut r);
    cfg.params_json(&mut r);
    r.param("tolerance", format!("{CROSSCHECK_TOLERANCE:e}"));
    r.param("series", if series.is_some() { "file" } else { "eta" });
    genus_warning(params.p(), &mut r);
    for c in &row.others {
        r.warnings.push(format!(
            "ramified exponent variants differ: {} {}, {} {}",
            row.selected.variant.name(),
            status(row.selected.pass),
            c.variant.name(),
            status(c.pass)
        ));
    }
    r.result = row.to_json(digits);
    r.text = row.text(digits);
    r.csv_header = CROSSCHECK_CSV;
    r.csv_rows = vec![row.csv_row(digits)];
    let exit = if row.selected.pass { exit::OK } else { exit::CROSSCHECK_FAIL };
    Ok(Outcome { report: r, exit })
}

/// Admissible fundamental discriminants `|x|` in `[min, max]`.
pub fn admissible_discriminants(p: u64, min: u64, max: u64) -> Vec<u64> {
    (min.max(5)..=max)
        .filter(|&x| is_fundamental_discriminant(-(x as i64)) && smallest_residue(x, p).is_some())
        .collect()
}

/// Pairs `(A[i], A[n-1-i])` over the admissible discriminants, at most
/// `count` of them.
pub fn grid_pairs(p: u64, min: u64, max: u64, count: usize) -> Vec<(u64, u64)> {
    let a = admissible_discriminants(p, min, max);
    let n = a.len();
    (0..n / 2)
        .map(|i| (a[i], a[n - 1 - i]))
        .take(count)
        .collect()
}

pub struct GridArgs {
    pub p: u64,
    pub min: u64,
    pub max: u64,
    pub count: usize,
}

pub fn grid(args: &GridArgs, cfg: &RunConfig) -> Result<Outcome, CliError> {
    check_crosscheck_digits(cfg)?;
    if !cmforge::arith::is_prime(args.p) {
        return Err(GzError::NotPrime(args.p).into());
    }
    if args.min > args.max {
        return Err(CliError::Invalid(format!("--min {} exceeds --max {}", args.min, args.max)));
    }
    let series = cfg.numeric_source(args.p)?;
    let pairs = grid_pairs(args.p, args.min, args.max, args.count);
    if pairs.is_empty() {
        return Err(CliError::Invalid(format!(
            "no admissible discriminant pairs for p = {} in [{}, {}]",
            args.p, args.min, args.max
        )));
    }
    let mut rows = pairs
        .par_iter()
        .map(|&(d, big_d)| {
            let params = GzParams::with_smallest_residues(args.p, d, big_d)?;
            crosscheck_row(&params, cfg, series.as_ref())
        })
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by_key(|row| (row.params.d(), row.params.big_d()));
    let digits = cfg.digits();
    let failures = rows.iter().filter(|row| !row.selected.pass).count();

    let mut r = Report::new("grid");
    r.param("p", args.p);
    r.param("min", args.min);
    r.param("max", args.max);
    r.param("count", args.count);
    cfg.params_json(&mut r);
    r.param("tolerance", format!("{CROSSCHECK_TOLERANCE:e}"));
    genus_warning(args.p, &mut r);
    let differing: Vec<String> = rows
        .iter()
        .filter(|row| !row.others.is_empty())
        .map(|row| format!("(d = {}, D = {})", row.params.d(), row.params.big_d()))
        .collect();
    if !differing.is_empty() {
        r.warnings.push(format!("ramified exponent variants differ on {}", differing.join(", ")));
    }
    r.result = json!({
        "rows": rows.iter().map(|row| row.to_json(digits)).collect::<Vec<_>>(),
        "passed": rows.len() - failures,
        "failed": failures,
        "status": status(failures == 0),
    });
    r.text = rows.iter().map(|row| row.text(digits)).collect::<String>();
    r.text.push_str(&format!("{} of {} pairs pass\n", rows.len() - failures, rows.len()));
    r.csv_header = CROSSCHECK_CSV;
    r.csv_rows = rows.iter().map(|row| row.csv_row(digits)).collect();
    let exit = if failures == 0 { exit::OK } else { exit::CROSSCHECK_FAIL };
    Ok(Outcome { report: r, exit })
}

fn pair_json(p: &InterpolationPair) -> Value {
    let signed = |v: Option<BigInt>| v.map(|v| int_value(&v)).unwrap_or(Value::Null);
    json!({
        "D": p.big_d,
        "x": signed(p.x()),
        "y": signed(p.y()),
        "x_magnitude": int_value(&BigInt::from(p.x_mag.clone())),
        "y_magnitude": int_value(&BigInt::from(p.y_mag.clone())),
    })
}

fn polynomial_json(poly: &ClassPolynomial) -> Value {
    json!({
        "polynomial": poly.to_string(),
        "degree": poly.degree(),
        "coefficients": poly.coefficients.iter().map(int_value).collect::<Vec<_>>(),
        "irreducible": match poly.irreducibility() {
            Irreducibility::Irreducible { .. } => json!(true),
            Irreducibility::Reducible { .. } => json!(false),
            Irreducibility::Undetermined => Value::Null,
        },
    })
}

pub enum StrategyArg {
    Search,
    Numeric,
}

pub struct ClassPolyArgs {
    pub p: u64,
    pub d: u64,
    pub strategy: StrategyArg,
}

pub fn classpoly(args: &ClassPolyArgs, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let problem = HcpProblem::new(args.p, args.d, cfg.base_discriminant, cfg.ramified_exponent)?;
    let strategy = match args.strategy {
        StrategyArg::Search => SignStrategy::Search,
        StrategyArg::Numeric => SignStrategy::Numeric {
            prec: cfg.precision,
            series: cfg.series(args.p)?,
        },
    };
    let res = class_polynomial(&problem, &strategy)?;
    let poly = &res.resolution.polynomial;

    let mut r = Report::new("classpoly");
    r.param("p", problem.p);
    r.param("d", problem.d);
    r.param("beta", problem.beta);
    r.param("base", problem.base_d);
    r.param("strategy", strategy.name());
    r.param("ramified_exponent", problem.variant.name());
    if matches!(strategy, SignStrategy::Numeric { .. }) {
        r.param("digits", cfg.digits());
    }
    let mut result = match polynomial_json(poly) {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    result.insert("class_number".into(), json!(problem.class_number));
    result.insert("s_set".into(), json!(problem.s_set.iter().map(|&x| -(x as i64)).collect::<Vec<_>>()));
    result.insert("usable".into(), json!(problem.usable().iter().map(|&x| -(x as i64)).collect::<Vec<_>>()));
    result.insert("pairs".into(), Value::Array(res.resolution.pairs.iter().map(pair_json).collect()));
    r.result = Value::Object(result);

    let neg = |v: &[u64]| v.iter().map(|x| format!("-{x}")).collect::<Vec<_>>().join(", ");
    let mut text = format!(
        "class polynomial of -{} on X_0({})+ (beta = {}, base D = -{}, h = {})\n\
         S({}) = {{{}}}\n\n   D        X        Y\n",
        problem.d,
        problem.p,
        problem.beta,
        problem.base_d,
        problem.class_number,
        problem.p,
        neg(&problem.s_set)
    );
    for pair in &res.resolution.pairs {
        let show = |v: Option<BigInt>| v.map(|v| v.to_string()).unwrap_or_else(|| "?".into());
        text.push_str(&format!("{:>4} {:>8} {:>8}\n", format!("-{}", pair.big_d), show(pair.x()), show(pair.y())));
    }
    text.push_str(&format!("\nH(X) = {poly}\n"));
    r.text = text;
    r.csv_header = "D,X,Y";
    r.csv_rows = res
        .resolution
        .pairs
        .iter()
        .map(|p| {
            let show = |v: Option<BigInt>| v.map(|v| v.to_string()).unwrap_or_default();
            format!("-{},{},{}", p.big_d, show(p.x()), show(p.y()))
        })
        .collect();
    Ok(r.into())
}

/// Parses `"x1,y1;x2,y2;..."`.
pub fn parse_points(s: &str) -> Result<Vec<(BigInt, BigInt)>, CliError> {
    s.split(';')
        .map(str::trim)
        .filter(|chunk| !chunk.is_empty())
        .map(|chunk| {
            let (x, y) = chunk
                .split_once(',')
                .ok_or_else(|| CliError::Invalid(format!("pair '{chunk}' is not of the form X,Y")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<BigInt>()
                    .map_err(|_| CliError::Invalid(format!("'{}' is not an integer", v.trim())))
            };
            Ok((parse(x)?, parse(y)?))
        })
        .collect()
}

pub struct InterpolateArgs {
    pub pairs: String,
    pub degree: usize,
    pub d: u64,
}

pub fn interpolate_cmd(args: &InterpolateArgs) -> Result<Outcome, CliError> {
    let points = parse_points(&args.pairs)?;
    if points.is_empty() {
        return Err(CliError::Invalid("no interpolation pairs given".into()));
    }
    if args.degree == 0 {
        return Err(CliError::Invalid("--degree must be positive".into()));
    }
    let poly = interpolate(&points, args.degree, args.d).map_err(|e| match e {
        HcpError::TooFewPairs { .. } | HcpError::DuplicateX(_) | HcpError::SignResolutionFailed(_) => {
            CliError::Rejected(e.to_string())
        }
        other => other.into(),
    })?;
    let mut r = Report::new("interpolate");
    r.param("degree", args.degree);
    r.param("d", args.d);
    r.param(
        "pairs",
        Value::Array(points.iter().map(|(x, y)| json!([int_value(x), int_value(y)])).collect()),
    );
    r.result = polynomial_json(&poly);
    r.text = format!("H(X) = {poly}\n");
    r.csv_header = "degree,coefficient";
    r.csv_rows = poly.coefficients.iter().enumerate().map(|(k, c)| format!("{k},{c}")).collect();
    Ok(r.into())
}

pub fn heegner(d: u64, p: u64, beta: Option<i64>, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let disc = -(d as i64);
    if !cmforge::arith::is_prime(p) {
        return Err(FormError::NotPrime(p).into());
    }
    if !is_fundamental_discriminant(disc) {
        return Err(FormError::NotFundamental(disc).into());
    }
    let beta = match beta {
        Some(b) => b.rem_euclid(2 * p as i64),
        None => *admissible_residues(disc, p)
            .first()
            .ok_or_else(|| CliError::Invalid(format!("{disc} is not a square mod {}", 4 * p)))? as i64,
    };
    let forms = heegner_reps(disc, p, beta)?;
    let h = class_number(disc)?;
    let bits = cfg.precision.working_bits();
    let digits = cfg.digits().min(30);

    let mut r = Report::new("heegner");
    r.param("d", d);
    r.param("p", p);
    r.param("beta", beta);
    genus_warning(p, &mut r);
    let entries: Vec<Value> = forms
        .iter()
        .map(|f| {
            let pt = heegner_point(f);
            let tau = heegner_tau(&pt, bits);
            json!({
                "form": [f.a, f.b, f.c],
                "tau": pt.to_string(),
                "re": real_string(&tau.re, digits),
                "im": real_string(&tau.im, digits),
            })
        })
        .collect();
    r.result = json!({
        "class_number": h,
        "admissible_residues": admissible_residues(disc, p),
        "forms": entries,
    });
    let mut text = format!("Heegner forms of discriminant {disc} for p = {p}, beta = {beta} (h = {h})\n");
    for f in &forms {
        text.push_str(&format!("  {f}  tau = {}\n", heegner_point(f)));
    }
    r.text = text;
    r.csv_header = "a,b,c,tau";
    r.csv_rows = forms.iter().map(|f| format!("{},{},{},{}", f.a, f.b, f.c, heegner_point(f))).collect();
    Ok(r.into())
}

pub fn sset(p: u64) -> Result<Outcome, CliError> {
    let s = s_set(p)?;
    let usable = usable_s_set(p)?;
    let mut r = Report::new("sset");
    r.param("p", p);
    let neg: Vec<i64> = s.iter().map(|&x| -(x as i64)).collect();
    r.result = json!({
        "s_set": neg,
        "usable": usable.iter().map(|&x| -(x as i64)).collect::<Vec<_>>(),
        "residues": s.iter().map(|&x| (format!("-{x}"), json!(smallest_residue(x, p)))).collect::<Map<_, _>>(),
        "max_class_number": usable.len().saturating_sub(1),
    });
    let shown: Vec<String> = neg.iter().map(|x| x.to_string()).collect();
    r.text = format!(
        "S({p}) = {{{}}}\nclass polynomials reachable for h(-d) <= {}\n",
        shown.join(", "),
        usable.len().saturating_sub(1)
    );
    r.csv_header = "D,residue";
    r.csv_rows = s
        .iter()
        .map(|&x| format!("-{x},{}", smallest_residue(x, p).map(|v| v.to_string()).unwrap_or_default()))
        .collect();
    Ok(r.into())
}

/// Parses `"re+im i"` style input: `0.1+1.5i`, `-0.5-2i`, `2i`, `1e-3+0.7i`.
pub fn parse_tau(s: &str, bits: u32) -> Result<Complex, CliError> {
    let bad = || CliError::Invalid(format!("cannot parse tau '{s}': expected re+im i, e.g. 0.0+1.0i"));
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let body = t.strip_suffix('i').ok_or_else(bad)?;
    // split at the last sign that is not at the start or after an exponent marker
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "+" | "" => "1",
        "-" => "-1",
        other => other,
    };
    let re = Real::parse_decimal(re, bits).ok_or_else(bad)?;
    let im = Real::parse_decimal(im, bits).ok_or_else(bad)?;
    Ok(Complex::new(re, im))
}

pub fn eval(p: u64, tau_text: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    if !cmforge::arith::is_prime(p) {
        return Err(GzError::NotPrime(p).into());
    }
    let bits = cfg.precision.working_bits() + 32;
    let tau = parse_tau(tau_text, bits)?;
    if tau.im.is_negative() || tau.im.is_zero() {
        return Err(HauptError::NotInUpperHalfPlane(tau.im.to_f64()).into());
    }
    let series = cfg.numeric_source(p)?;
    let (value, bound) = hauptmodul_value_with_bound(p, &tau, &cfg.precision, series.as_ref())?;
    let reduced = reduce_point(p, &tau);
    let digits = cfg.digits();

    let mut r = Report::new("eval");
    r.param("p", p);
    r.param("tau", tau_text);
    r.param("digits", digits);
    r.param("series", if series.is_some() { "file" } else { "eta" });
    genus_warning(p, &mut r);
    r.result = json!({
        "re": real_string(&value.re, digits),
        "im": real_string(&value.im, digits),
        "error_bound": format!("{bound:e}"),
        "reduced_tau": {
            "re": real_string(&reduced.re, 20),
            "im": real_string(&reduced.im, 20),
        },
    });
    r.text = format!(
        "j*_{p}({tau_text}) = {}\n  error bound {bound:e}, evaluated at tau' = {:.20}\n",
        format_args!("{value:.width$}", width = digits.min(40) as usize),
        reduced
    );
    r.csv_header = "re,im";
    r.csv_rows = vec![format!("{},{}", real_string(&value.re, digits), real_string(&value.im, digits))];
    Ok(r.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BITS: u32 = 200;

    fn parts(s: &str) -> (f64, f64) {
        let t = parse_tau(s, BITS).unwrap();
        (t.re.to_f64(), t.im.to_f64())
    }

    #[test]
    fn tau_syntax() {
        assert_eq!(parts("0.0+1.0i"), (0.0, 1.0));
        assert_eq!(parts("-0.5-2i"), (-0.5, -2.0));
        assert_eq!(parts("2i"), (0.0, 2.0));
        assert_eq!(parts("1e-3+0.7i"), (1e-3, 0.7));
        assert_eq!(parts("0.25 - 1.5e-1 i"), (0.25, -0.15));
        assert_eq!(parts("1+i"), (1.0, 1.0));
        assert_eq!(parts("-i"), (0.0, -1.0));
        for bad in ["", "0.5", "i2", "a+bi", "1++2i"] {
            assert!(parse_tau(bad, BITS).is_err(), "{bad}");
        }
    }

    #[test]
    fn point_syntax() {
        let pts = parse_points("0,1; -1,7 ;4,217;").unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[1], (BigInt::from(-1), BigInt::from(7)));
        assert!(parse_points("0;1").is_err());
        assert!(parse_points("0,1.5").is_err());
    }

    #[test]
    fn grid_pairs_mirror_the_admissible_list() {
        let a = admissible_discriminants(7, 5, 100);
        let pairs = grid_pairs(7, 5, 100, 3);
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0], (a[0], *a.last().unwrap()));
        for (d, big_d) in pairs {
            assert!(d < big_d);
            assert!(GzParams::with_smallest_residues(7, d, big_d).is_ok());
        }
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(GzError::EqualDiscriminants).exit_code(), exit::INVALID);
        assert_eq!(
            CliError::from(HcpError::Infeasible { d: 151, p: 47, needed: 8, available: 5 }).exit_code(),
            exit::INFEASIBLE
        );
        assert_eq!(CliError::from(HauptError::SeriesRequired(47)).exit_code(), exit::INVALID);
        assert_eq!(
            CliError::from(HauptError::IllConditioned { diff: "0".into(), threshold: 40 }).exit_code(),
            exit::INTERNAL
        );
        assert_eq!(
            CliError::from(HcpError::SignResolutionFailed("x".into())).exit_code(),
            exit::INTERNAL
        );
    }

    #[test]
    fn resolve_params_defaults_to_smallest_residues() {
        let p = resolve_params(47, 39, 163, None, None).unwrap();
        assert_eq!((p.beta(), p.mu()), (33, 5));
        let p = resolve_params(47, 39, 163, Some(-33), None).unwrap();
        assert_eq!(p.beta(), 61);
        assert!(matches!(resolve_params(47, 39, 39, None, None), Err(CliError::Invalid(_))));
        assert!(matches!(resolve_params(47, 39, 151 * 4, None, None), Err(CliError::Invalid(_))));
    }
}
