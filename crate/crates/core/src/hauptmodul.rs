//! Numeric Hauptmoduls `j*_p` on `Gamma_0(p)+` and the numeric left-hand side
//! `8 * sum log |j*_p(tau_D) - j*_p(tau_d)|`.
//!
//! For `p` in [`ETA_PRIMES`] the Hauptmodul is `t + p^(12/(p-1)) / t` with
//! `t = (eta(tau) / eta(p tau))^(24/(p-1))`; for other primes a [`QSeries`]
//! must be supplied.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::arith::is_prime;
use crate::gzrhs::{GzError, GzParams};
use crate::highprec::{bits_for_digits, Complex, Real};
use crate::quadforms::{heegner_point, heegner_reps, FormError, HeegnerPoint};

/// Primes whose Hauptmodul is an eta quotient.
pub const ETA_PRIMES: [u64; 5] = [2, 3, 5, 7, 13];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HauptError {
    #[error("Im tau = {0} must be positive")]
    NotInUpperHalfPlane(f64),
    #[error("eta series needs {needed} terms at Im tau = {im}, limit is {max_terms}")]
    TermLimit { im: f64, needed: usize, max_terms: usize },
    #[error("series data required for p = {0}")]
    SeriesRequired(u64),
    #[error("series is for p = {found}, expected p = {expected}")]
    SeriesMismatch { expected: u64, found: u64 },
    #[error("series truncation bound {bound:e} exceeds requested precision 1e-{digits}")]
    TruncationBound { bound: f64, digits: u32 },
    #[error("ill-conditioned: |j*(tau_D) - j*(tau_d)| = {diff} is below 1e-{threshold}")]
    IllConditioned { diff: String, threshold: u32 },
    #[error("invalid precision: {0}")]
    Precision(String),
    #[error(transparent)]
    Series(#[from] QSeriesError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Params(#[from] GzError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QSeriesError {
    #[error("missing header field '{0}'")]
    MissingHeader(&'static str),
    #[error("line {line}: cannot parse '{text}'")]
    BadLine { line: usize, text: String },
    #[error("header declares {expected} coefficients, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("leading coefficient c(-1) must be 1, found {0}")]
    BadLeading(String),
    #[error("series needs at least c(-1) and c(0)")]
    TooShort,
    #[error("p = {0} is not prime")]
    NotPrime(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionConfig {
    pub decimal_digits: u32,
    pub guard_digits: u32,
    pub max_terms: usize,
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        Self { decimal_digits: 80, guard_digits: 10, max_terms: 1_000_000 }
    }
}

impl PrecisionConfig {
    pub fn new(decimal_digits: u32, guard_digits: u32, max_terms: usize) -> Result<Self, HauptError> {
        if decimal_digits == 0 || guard_digits == 0 || max_terms == 0 {
            return Err(HauptError::Precision(
                "digits, guard digits and max terms must be positive".into(),
            ));
        }
        Ok(Self { decimal_digits, guard_digits, max_terms })
    }

    pub fn with_digits(self, decimal_digits: u32) -> Self {
        Self { decimal_digits, ..self }
    }

    /// Binary precision of intermediate values.
    pub fn working_bits(&self) -> u32 {
        bits_for_digits(self.decimal_digits + self.guard_digits) + 16
    }

    fn truncation_digits(&self) -> f64 {
        (self.decimal_digits + self.guard_digits) as f64
    }
}

fn im_f64(tau: &Complex) -> Result<f64, HauptError> {
    let y = tau.im.to_f64();
    if tau.im.is_zero() || tau.im.is_negative() || !y.is_finite() {
        return Err(HauptError::NotInUpperHalfPlane(y));
    }
    Ok(y)
}

/// Extra bits lost to cancellation in `prod (1 - q^n)` near the real axis.
fn cancellation_bits(y: f64) -> u32 {
    (0.5 / y).ceil().min(1e6) as u32
}

fn two_pi_i_times(tau: &Complex, bits: u32) -> Complex {
    let two_pi = Real::pi(bits).mul_2k(1);
    Complex::new(-(&tau.im * &two_pi), &tau.re * &two_pi)
}

/// `prod_{n >= 1} (1 - q^n)` at `q = exp(2 pi i tau)` by the pentagonal
/// number series, with an absolute bound on the dropped tail.
fn euler_product(tau: &Complex, prec: &PrecisionConfig) -> Result<(Complex, f64), HauptError> {
    let y = im_f64(tau)?;
    let w = prec.working_bits() + cancellation_bits(y);
    // log10 |q|^n = -n * decay
    let decay = 2.0 * std::f64::consts::PI * y * std::f64::consts::LOG10_E;
    let target = prec.truncation_digits();
    let pent = |k: f64| k * (3.0 * k - 1.0) / 2.0;
    let needed_k = {
        // smallest k with pent(k) * decay > target
        let k = ((1.0 + (1.0 + 24.0 * target / decay).sqrt()) / 6.0).ceil();
        if pent(k) * decay > target { k } else { k + 1.0 }
    };
    let needed = 2.0 * needed_k;
    if !needed.is_finite() || needed > prec.max_terms as f64 {
        return Err(HauptError::TermLimit {
            im: y,
            needed: if needed.is_finite() { needed as usize } else { usize::MAX },
            max_terms: prec.max_terms,
        });
    }
    let k_max = needed_k as u64 - 1;
    let tau = tau.with_prec(w);
    let q = two_pi_i_times(&tau, w).exp();
    let q3 = &q * &(&q * &q);
    let one = Complex::from_real(Real::from_i64(1, w));
    let mut sum = one.clone();
    // a = q^(k(3k-1)/2), r = q^(3k+1)
    let mut a = one.clone();
    let mut r = q.clone();
    for k in 1..=k_max {
        a = &a * &r;
        r = &r * &q3;
        // q^(k(3k+1)/2) = a * q^k
        let b = &a * &q.powi(k as i64);
        let pair = &a + &b;
        sum = if k % 2 == 1 { &sum - &pair } else { &sum + &pair };
    }
    let abs_q = (-2.0 * std::f64::consts::PI * y).exp();
    let tail = 2.0 * 10f64.powf(-pent(needed_k) * decay) / (1.0 - abs_q).max(f64::MIN_POSITIVE);
    Ok((sum, tail))
}

/// Dedekind eta `q^(1/24) prod (1 - q^n)`.
pub fn eta(tau: &Complex, prec: &PrecisionConfig) -> Result<Complex, HauptError> {
    Ok(eta_with_bound(tau, prec)?.0)
}

/// Eta together with an absolute truncation bound.
pub fn eta_with_bound(tau: &Complex, prec: &PrecisionConfig) -> Result<(Complex, f64), HauptError> {
    let (e, tail) = euler_product(tau, prec)?;
    let w = e.prec();
    let q24 = two_pi_i_times(&tau.with_prec(w), w).mul_2k(-3).scale(&Real::from_i64(3, w).powi(-1)).exp();
    let scale = q24.abs().to_f64();
    Ok((&q24 * &e, tail * scale))
}

/// `p^(12/(p-1))` for the eta-quotient primes.
pub fn eta_quotient_constant(p: u64) -> Option<u64> {
    ETA_PRIMES.contains(&p).then(|| p.pow(12 / (p as u32 - 1)))
}

/// `SL_2(Z)`-type or Atkin-Lehner-type matrix `(a b; c d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transform {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Transform {
    pub fn apply(&self, tau: &Complex) -> Complex {
        let w = tau.prec();
        let r = |v: i64| Real::from_i64(v, w);
        let num = Complex::new(&tau.re * &r(self.a) + r(self.b), &tau.im * &r(self.a));
        let den = Complex::new(&tau.re * &r(self.c) + r(self.d), &tau.im * &r(self.c));
        &num / &den
    }
}

/// Moves `tau` within its `Gamma_0(p)+` orbit to a point of maximal
/// imaginary part with `|Re| <= 1/2`.
pub fn reduce_point(p: u64, tau: &Complex) -> Complex {
    let mut cur = tau.clone();
    for _ in 0..8 {
        let (x, y) = (cur.re.to_f64(), cur.im.to_f64());
        // minimize weight(c) |c tau + d|^2, weight = 1 if p | c else p
        let mut best = 1.0f64;
        let mut best_cd: Option<(i64, i64)> = None;
        let pf = p as f64;
        let mut c = 1i64;
        while (c as f64 * y).powi(2) < best {
            let weight = if c % p as i64 == 0 { 1.0 } else { pf };
            let room = best / weight - (c as f64 * y).powi(2);
            if room > 0.0 {
                let centre = -(c as f64) * x;
                let span = room.sqrt();
                let lo = (centre - span).ceil() as i64;
                let hi = (centre + span).floor() as i64;
                for d in lo..=hi {
                    if c.gcd(&d) != 1 {
                        continue;
                    }
                    let v = weight * ((c as f64 * x + d as f64).powi(2) + (c as f64 * y).powi(2));
                    if v < best * (1.0 - 1e-12) {
                        best = v;
                        best_cd = Some((c, d));
                    }
                }
            }
            c += 1;
        }
        if let Some((c, d)) = best_cd {
            let m = if c % p as i64 == 0 {
                let g = c.extended_gcd(&d);
                // a d - b c = 1
                Transform { a: g.y * g.gcd, b: -g.x * g.gcd, c, d }
            } else {
                let pi = p as i64;
                let g = (pi * d).extended_gcd(&c);
                // p a d - b c = 1
                Transform { a: pi * g.x * g.gcd, b: -g.y * g.gcd, c: pi * c, d: pi * d }
            };
            cur = m.apply(&cur);
        }
        let shift = cur.re.round();
        if !shift.is_zero() {
            cur.re = &cur.re - &Real::from_bigint(shift, cur.re.prec());
        }
        if best_cd.is_none() {
            break;
        }
    }
    cur
}

/// Eta-quotient or series value at `tau` without any reduction, with an
/// absolute error estimate.
pub fn hauptmodul_value_unreduced(
    p: u64,
    tau: &Complex,
    prec: &PrecisionConfig,
    series: Option<&QSeries>,
) -> Result<(Complex, f64), HauptError> {
    im_f64(tau)?;
    if let Some(s) = series {
        if s.p != p {
            return Err(HauptError::SeriesMismatch { expected: p, found: s.p });
        }
        return s.eval(tau, prec);
    }
    let Some(constant) = eta_quotient_constant(p) else {
        return Err(HauptError::SeriesRequired(p));
    };
    let w = prec.working_bits() + cancellation_bits(tau.im.to_f64());
    let tau = tau.with_prec(w);
    let p_tau = Complex::new(&tau.re * &Real::from_i64(p as i64, w), &tau.im * &Real::from_i64(p as i64, w));
    let (e1, b1) = eta_with_bound(&tau, prec)?;
    let (e2, b2) = eta_with_bound(&p_tau, prec)?;
    let r = 24 / (p as i64 - 1);
    let t = (&e1 / &e2).powi(r);
    let c = Real::from_i64(constant as i64, w);
    let value = &t + &t.recip().scale(&c);
    let rel = r as f64 * (b1 / e1.abs().to_f64() + b2 / e2.abs().to_f64())
        + 2f64.powi(-(prec.working_bits() as i32) + 24);
    let t_abs = t.abs().to_f64();
    let err = (t_abs + constant as f64 / t_abs) * rel;
    Ok((value, err))
}

/// `j*_p(tau)`, evaluated at a reduced point of the orbit of `tau`.
pub fn hauptmodul_value(
    p: u64,
    tau: &Complex,
    prec: &PrecisionConfig,
    series: Option<&QSeries>,
) -> Result<Complex, HauptError> {
    Ok(hauptmodul_value_with_bound(p, tau, prec, series)?.0)
}

pub fn hauptmodul_value_with_bound(
    p: u64,
    tau: &Complex,
    prec: &PrecisionConfig,
    series: Option<&QSeries>,
) -> Result<(Complex, f64), HauptError> {
    im_f64(tau)?;
    if !is_prime(p) {
        return Err(HauptError::Params(GzError::NotPrime(p)));
    }
    let reduced = reduce_point(p, &tau.with_prec(prec.working_bits() + 32));
    hauptmodul_value_unreduced(p, &reduced, prec, series)
}

/// `(-b + i sqrt|disc|) / (2a)` at `bits` of precision.
pub fn heegner_tau(point: &HeegnerPoint, bits: u32) -> Complex {
    let two_a = Real::from_i64(2 * point.a, bits);
    let re = Real::from_i64(-point.b, bits).quotient(&two_a);
    let im = Real::from_i64(-point.disc, bits).sqrt().quotient(&two_a);
    Complex::new(re, im)
}

/// Numeric left-hand side with an error estimate.
#[derive(Debug, Clone)]
pub struct LhsValue {
    pub value: Real,
    pub error_bound: f64,
    pub pairs: usize,
}

impl LhsValue {
    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }
}

/// Values of `j*_p` at the Heegner points of `(disc, residue)`.
pub fn heegner_values(
    p: u64,
    disc_abs: u64,
    residue: u64,
    prec: &PrecisionConfig,
    series: Option<&QSeries>,
) -> Result<Vec<(Complex, f64)>, HauptError> {
    let forms = heegner_reps(-(disc_abs as i64), p, residue as i64)?;
    let bits = prec.working_bits() + 32;
    forms
        .par_iter()
        .map(|f| hauptmodul_value_with_bound(p, &heegner_tau(&heegner_point(f), bits), prec, series))
        .collect()
}

/// `8 * sum_{Q_D, Q_d} log |j*_p(tau_{Q_D}) - j*_p(tau_{Q_d})|`.
pub fn lhs_log_norm(
    params: &GzParams,
    prec: &PrecisionConfig,
    series: Option<&QSeries>,
) -> Result<LhsValue, HauptError> {
    let p = params.p();
    let vd = heegner_values(p, params.big_d(), params.mu(), prec, series)?;
    let vs = heegner_values(p, params.d(), params.beta(), prec, series)?;
    lhs_from_values(&vd, &vs, prec)
}

pub(crate) fn lhs_from_values(
    vd: &[(Complex, f64)],
    vs: &[(Complex, f64)],
    prec: &PrecisionConfig,
) -> Result<LhsValue, HauptError> {
    let w = prec.working_bits();
    let threshold = prec.decimal_digits / 2;
    let tiny = Real::from_i64(10, w).powi(-(threshold as i64));
    let mut sum = Real::zero(w);
    let mut err = 0.0;
    for (jd, ed) in vd {
        for (js, es) in vs {
            let diff = (jd - js).abs();
            if diff < tiny {
                return Err(HauptError::IllConditioned { diff: diff.to_sci_string(6), threshold });
            }
            sum = &sum + &diff.ln();
            err += (ed + es) / diff.to_f64();
        }
    }
    Ok(LhsValue { value: sum.mul_2k(3), error_bound: 8.0 * err, pairs: vd.len() * vs.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesSource {
    EtaClosedForm,
    DataFile,
}

/// Fourier expansion `q^-1 + c(0) + c(1) q + ...` with integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QSeries {
    p: u64,
    coefficients: Vec<BigInt>,
    source: SeriesSource,
}

impl QSeries {
    /// `coefficients[0]` is `c(-1)`.
    pub fn new(p: u64, coefficients: Vec<BigInt>, source: SeriesSource) -> Result<Self, QSeriesError> {
        if !is_prime(p) {
            return Err(QSeriesError::NotPrime(p));
        }
        if coefficients.len() < 2 {
            return Err(QSeriesError::TooShort);
        }
        if !coefficients[0].is_one() {
            return Err(QSeriesError::BadLeading(coefficients[0].to_string()));
        }
        Ok(Self { p, coefficients, source })
    }

    /// Reads `p <prime>`, `count <n>` and then `n` integers, one per line;
    /// blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, QSeriesError> {
        let mut p = None;
        let mut count = None;
        let mut coefficients = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || QSeriesError::BadLine { line: i + 1, text: raw.to_string() };
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap();
            match head {
                "p" | "count" => {
                    let v: u64 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
                    if parts.next().is_some() || !coefficients.is_empty() {
                        return Err(bad());
                    }
                    if head == "p" {
                        p = Some(v);
                    } else {
                        count = Some(v as usize);
                    }
                }
                _ => {
                    if parts.next().is_some() {
                        return Err(bad());
                    }
                    coefficients.push(head.parse::<BigInt>().map_err(|_| bad())?);
                }
            }
        }
        let p = p.ok_or(QSeriesError::MissingHeader("p"))?;
        let count = count.ok_or(QSeriesError::MissingHeader("count"))?;
        if count != coefficients.len() {
            return Err(QSeriesError::CountMismatch { expected: count, found: coefficients.len() });
        }
        Self::new(p, coefficients, SeriesSource::DataFile)
    }

    /// The eta-quotient Hauptmodul expanded to `len` coefficients.
    pub fn from_eta_quotient(p: u64, len: usize) -> Option<Self> {
        let constant = eta_quotient_constant(p)?;
        let n = len.max(2) + 1;
        let r = 24 / (p as usize - 1);
        let e1 = euler_series(1, n);
        let e2 = euler_series(p as usize, n);
        let ratio = series_mul(&e1, &series_inverse(&e2, n), n);
        let up = series_pow(&ratio, r, n);
        let down = series_pow(&series_inverse(&ratio, n), r, n);
        let coefficients = (0..len.max(2))
            .map(|i| {
                // c(i - 1) = [R^r]_i + constant [R^-r]_(i - 2)
                let mut c = up[i].clone();
                if i >= 2 {
                    c += &down[i - 2] * BigInt::from(constant);
                }
                c
            })
            .collect();
        Some(Self { p, coefficients, source: SeriesSource::EtaClosedForm })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn start_exponent(&self) -> i32 {
        -1
    }

    /// `c(-1), c(0), c(1), ...`
    pub fn coefficients(&self) -> &[BigInt] {
        &self.coefficients
    }

    pub fn source(&self) -> SeriesSource {
        self.source
    }

    /// Value at `tau` (no reduction) and an estimate of the truncation error,
    /// assuming coefficient ratios stay below the largest ratio seen among
    /// the last few known coefficients.
    pub fn eval(&self, tau: &Complex, prec: &PrecisionConfig) -> Result<(Complex, f64), HauptError> {
        let y = im_f64(tau)?;
        let w = prec.working_bits();
        let q = two_pi_i_times(&tau.with_prec(w), w).exp();
        let mut sum = Complex::from_real(Real::zero(w));
        let mut pow = q.recip();
        for c in &self.coefficients {
            if !c.is_zero() {
                sum = &sum + &pow.scale(&Real::from_bigint(c.clone(), w));
            }
            pow = &pow * &q;
        }
        let abs_q = (-2.0 * std::f64::consts::PI * y).exp();
        let tail = self.tail_bound(abs_q);
        let limit = 10f64.powi(-(prec.decimal_digits as i32)) * sum.abs().to_f64().max(1.0);
        if !(tail <= limit) {
            return Err(HauptError::TruncationBound { bound: tail, digits: prec.decimal_digits });
        }
        Ok((sum, tail))
    }

    fn tail_bound(&self, abs_q: f64) -> f64 {
        let n = self.coefficients.len();
        let mags: Vec<f64> = self
            .coefficients
            .iter()
            .map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY))
            .collect();
        let window = &mags[n.saturating_sub(6)..];
        let mut ratio: f64 = 1.0;
        for pair in window.windows(2) {
            if pair[0] > 0.0 {
                ratio = ratio.max(pair[1] / pair[0]);
            }
        }
        let last = window.iter().cloned().fold(0.0, f64::max).max(1.0);
        let x = ratio * abs_q;
        if x >= 1.0 {
            return f64::INFINITY;
        }
        // sum_{j >= 1} last * x^j * |q|^(n - 2)
        last * x / (1.0 - x) * abs_q.powi(n as i32 - 2)
    }
}

impl fmt::Display for QSeries {
    /// The data-file format accepted by [`QSeries::parse`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p {}", self.p)?;
        writeln!(f, "count {}", self.coefficients.len())?;
        for c in &self.coefficients {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// `prod_{n >= 1} (1 - q^(step n))` to `n` coefficients.
fn euler_series(step: usize, n: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); n];
    out[0] = BigInt::one();
    let mut k = 1i64;
    loop {
        let mut any = false;
        for e in [k * (3 * k - 1) / 2, k * (3 * k + 1) / 2] {
            let idx = e as usize * step;
            if idx < n {
                any = true;
                out[idx] += if k % 2 == 1 { -1 } else { 1 };
            }
        }
        if !any {
            break;
        }
        k += 1;
    }
    out
}

fn series_mul(a: &[BigInt], b: &[BigInt], n: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); n];
    for (i, x) in a.iter().enumerate().take(n) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(n - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Inverse of a series with constant term 1.
fn series_inverse(a: &[BigInt], n: usize) -> Vec<BigInt> {
    debug_assert!(a[0].is_one());
    let mut out = vec![BigInt::zero(); n];
    out[0] = BigInt::one();
    for k in 1..n {
        let mut s = BigInt::zero();
        for j in 1..=k.min(a.len() - 1) {
            s += &a[j] * &out[k - j];
        }
        out[k] = -s;
    }
    out
}

fn series_pow(a: &[BigInt], r: usize, n: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); n];
    out[0] = BigInt::one();
    for _ in 0..r {
        out = series_mul(&out, a, n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::default()
    }

    fn cx(re: f64, im: f64) -> Complex {
        Complex::from_f64(re, im, cfg().working_bits() + 32)
    }

    fn rel_diff(a: &Complex, b: &Complex) -> f64 {
        let d = (a - b).abs();
        let scale = a.abs().to_f64().max(1.0);
        // log10 of the relative difference, avoiding f64 underflow
        match d.magnitude_bits() {
            None => f64::NEG_INFINITY,
            Some(bits) => bits as f64 * std::f64::consts::LOG10_2 - scale.log10(),
        }
    }

    #[test]
    fn eta_at_i_matches_gamma_closed_form() {
        // Gamma(1/4) / (2 pi^(3/4)), Gamma(1/4) to 60 digits
        let gamma = "3.625609908221908311930685155867672002995167682880065467433378";
        let bits = cfg().working_bits();
        let g = Real::parse_decimal(gamma, bits).unwrap();
        let pi = Real::pi(bits);
        let expected = g.quotient(&(pi.ln() * Real::parse_decimal("0.75", bits).unwrap()).exp().mul_2k(1));
        let got = eta(&cx(0.0, 1.0), &cfg()).unwrap();
        assert!(got.im.abs().magnitude_bits().unwrap_or(-1000) < -250);
        let diff = (&got.re - &expected).abs();
        assert!(diff.magnitude_bits().unwrap() < -180, "eta(i) = {}", got.re);
        assert_eq!(got.re.to_sci_string(20), "7.6822542232605665900e-1");
    }

    #[test]
    fn eta_functional_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let prec = cfg();
        let bits = prec.working_bits() + 32;
        for _ in 0..10 {
            let tau = cx(rng.gen_range(-0.5..0.5), rng.gen_range(0.2..2.0));
            let e = eta(&tau, &prec).unwrap();
            // eta(tau + 1) = exp(i pi / 12) eta(tau)
            let shifted = Complex::new(&tau.re + &Real::from_i64(1, bits), tau.im.clone());
            let rot = Complex::cis(&Real::pi(bits).quotient(&Real::from_i64(12, bits)));
            assert!(rel_diff(&eta(&shifted, &prec).unwrap(), &(&rot * &e)) < -75.0);
            // eta(-1/tau) = sqrt(-i tau) eta(tau), principal branch
            let inv = (&Complex::from_real(Real::from_i64(-1, bits)) / &tau).with_prec(bits);
            // principal sqrt(z) for z = -i tau, Re z > 0
            let z = Complex::new(tau.im.clone(), -&tau.re);
            let s = (&z.re + &z.abs()).mul_2k(-1).sqrt();
            let half = Complex::new(s.clone(), z.im.quotient(&s.mul_2k(1)));
            assert!(rel_diff(&eta(&inv, &prec).unwrap(), &(&half * &e)) < -75.0);
        }
    }

    #[test]
    fn eta_converges_near_real_axis() {
        let tau = cx(0.3, 0.05);
        assert!(eta(&tau, &cfg()).is_ok());
        let tight = PrecisionConfig { max_terms: 10, ..cfg() };
        assert!(matches!(eta(&tau, &tight), Err(HauptError::TermLimit { .. })));
        assert!(matches!(eta(&cx(0.3, 0.0), &cfg()), Err(HauptError::NotInUpperHalfPlane(_))));
    }

    #[test]
    fn constants() {
        assert_eq!(eta_quotient_constant(2), Some(4096));
        assert_eq!(eta_quotient_constant(3), Some(729));
        assert_eq!(eta_quotient_constant(5), Some(125));
        assert_eq!(eta_quotient_constant(7), Some(49));
        assert_eq!(eta_quotient_constant(13), Some(13));
        assert_eq!(eta_quotient_constant(11), None);
    }

    #[test]
    fn invariance_under_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let prec = cfg();
        let bits = prec.working_bits() + 32;
        for &p in &ETA_PRIMES {
            for _ in 0..3 {
                let tau = cx(rng.gen_range(-0.5..0.5), rng.gen_range(0.3..1.5));
                let (v, _) = hauptmodul_value_unreduced(p, &tau, &prec, None).unwrap();
                let shifted = Complex::new(&tau.re + &Real::from_i64(1, bits), tau.im.clone());
                let (v1, _) = hauptmodul_value_unreduced(p, &shifted, &prec, None).unwrap();
                let ptau = tau.scale(&Real::from_i64(p as i64, bits));
                let fricke = &Complex::from_real(Real::from_i64(-1, bits)) / &ptau;
                let (v2, _) = hauptmodul_value_unreduced(p, &fricke, &prec, None).unwrap();
                assert!(rel_diff(&v, &v1) < -75.0, "p={p}");
                assert!(rel_diff(&v, &v2) < -75.0, "p={p}");
            }
        }
    }

    #[test]
    fn reduction_preserves_value_and_raises_im() {
        let prec = cfg();
        for &p in &[2u64, 5, 13] {
            let tau = cx(0.37, 0.04);
            let red = reduce_point(p, &tau);
            assert!(red.im.to_f64() > 0.04);
            assert!(red.re.to_f64().abs() <= 0.5 + 1e-12);
            let (a, _) = hauptmodul_value_unreduced(p, &tau, &prec, None).unwrap();
            let b = hauptmodul_value(p, &tau, &prec, None).unwrap();
            assert!(rel_diff(&a, &b) < -70.0, "p={p}");
        }
    }

    #[test]
    fn series_matches_eta_quotient() {
        let prec = PrecisionConfig { decimal_digits: 40, ..cfg() };
        for &p in &ETA_PRIMES {
            let s = QSeries::from_eta_quotient(p, 400).unwrap();
            assert!(s.coefficients()[0].is_one());
            let tau = cx(0.1, 0.9);
            let (a, _) = s.eval(&tau, &prec).unwrap();
            let (b, _) = hauptmodul_value_unreduced(p, &tau, &prec, None).unwrap();
            assert!(rel_diff(&a, &b) < -38.0, "p={p}");
        }
        // p = 2: q^-1 prod (1 + q^n)^-24 + 4096 q prod (1 + q^n)^24
        let s = QSeries::from_eta_quotient(2, 4).unwrap();
        let c: Vec<i64> = s.coefficients().iter().map(|c| c.to_i64().unwrap()).collect();
        assert_eq!(c[0..3], [1, -24, 276 + 4096]);
    }

    #[test]
    fn leading_coefficient_is_one_numerically() {
        // q * j*(tau) -> 1 as Im tau grows
        let prec = cfg();
        for &p in &ETA_PRIMES {
            for (y, tol) in [(6.0, 1e-13), (9.0, 1e-20)] {
                let tau = cx(0.0, y);
                let (v, _) = hauptmodul_value_unreduced(p, &tau, &prec, None).unwrap();
                let q = two_pi_i_times(&tau, prec.working_bits()).exp();
                let lead = (&v * &q).re.to_f64();
                assert!((lead - 1.0).abs() < tol, "p={p} y={y} lead={lead}");
            }
        }
    }

    #[test]
    fn qseries_file_round_trip_and_validation() {
        let s = QSeries::from_eta_quotient(5, 12).unwrap();
        let text = s.to_string();
        let back = QSeries::parse(&format!("# generated\n{text}")).unwrap();
        assert_eq!(back.coefficients(), s.coefficients());
        assert_eq!(back.source(), SeriesSource::DataFile);
        assert_eq!(QSeries::parse("p 47\ncount 2\n2\n0\n"), Err(QSeriesError::BadLeading("2".into())));
        assert_eq!(
            QSeries::parse("p 47\ncount 3\n1\n0\n"),
            Err(QSeriesError::CountMismatch { expected: 3, found: 2 })
        );
        assert_eq!(QSeries::parse("count 2\n1\n0\n"), Err(QSeriesError::MissingHeader("p")));
        assert!(matches!(QSeries::parse("p 47\ncount 2\n1\nx\n"), Err(QSeriesError::BadLine { line: 4, .. })));
        assert_eq!(QSeries::parse("p 46\ncount 2\n1\n0\n"), Err(QSeriesError::NotPrime(46)));
    }

    #[test]
    fn missing_series_is_reported() {
        let r = hauptmodul_value(47, &cx(0.0, 1.0), &cfg(), None);
        assert_eq!(r.unwrap_err(), HauptError::SeriesRequired(47));
        let s = QSeries::from_eta_quotient(5, 50).unwrap();
        let r = hauptmodul_value(7, &cx(0.0, 1.0), &cfg(), Some(&s));
        assert_eq!(r.unwrap_err(), HauptError::SeriesMismatch { expected: 7, found: 5 });
    }

    #[test]
    fn short_series_fails_precision_check() {
        let s = QSeries::from_eta_quotient(2, 10).unwrap();
        let r = s.eval(&cx(0.0, 0.5), &cfg());
        assert!(matches!(r, Err(HauptError::TruncationBound { .. })));
    }

    #[test]
    fn lhs_matches_rhs_small_case() {
        use crate::gzrhs::{gz_log_norm, RamifiedExponent};
        let params = GzParams::with_smallest_residues(2, 7, 15).unwrap();
        let lhs = lhs_log_norm(&params, &cfg(), None).unwrap();
        let rhs = gz_log_norm(&params, RamifiedExponent::OfMD).unwrap().to_f64();
        assert!((lhs.to_f64() - rhs).abs() / rhs.abs().max(1.0) < 1e-12, "{} vs {rhs}", lhs.to_f64());
        assert!(lhs.error_bound < 1e-50);
    }

    #[test]
    fn heegner_tau_value() {
        let pt = HeegnerPoint { b: 41, a: 47, disc: -11 };
        let tau = heegner_tau(&pt, 200);
        assert!((tau.re.to_f64() + 41.0 / 94.0).abs() < 1e-15);
        assert!((tau.im.to_f64() - 11f64.sqrt() / 94.0).abs() < 1e-15);
    }
}
