//! Exact evaluation of the CM value formula: enumerate lattice terms, weight
//! each by its local data, and collect the result as a formal sum
//! `sum_q e_q log q`, i.e. the prime factorization of
//! `prod |j*(tau_D) - j*(tau_d)|^8` over both Heegner class sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::arith::{is_fundamental_discriminant, is_prime, is_square, isqrt, ord_q, Rational};
use crate::cmvalue::{diff_set, o_of_m, rho_scaled, splitting, CmError, KappaContext, Splitting};
use crate::highprec::Real;
use crate::quadforms::is_admissible;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GzError {
    #[error("p = {0} is not prime")]
    NotPrime(u64),
    #[error("-{0} is not a fundamental discriminant")]
    NotFundamental(u64),
    #[error("discriminant -{0} is excluded: need |disc| > 4")]
    SmallDiscriminant(u64),
    #[error("d and D must be distinct")]
    EqualDiscriminants,
    #[error("{name} = {residue} is not admissible: {name}^2 != -{disc} mod {modulus}")]
    Inadmissible { name: &'static str, residue: u64, disc: u64, modulus: u64 },
    #[error("-{0} is not a square mod {1}")]
    NoResidue(u64, u64),
    #[error("d*D = {0} is a perfect square")]
    SquareProduct(u128),
    #[error("lattice term (y = {y}, n = {n}) has m = {m} <= 0")]
    NonPositiveM { y: i64, n: i64, m: Rational },
    #[error("lattice term (y = {y}, n = {n}, m = {m}): {source}")]
    Term { y: i64, n: i64, m: Rational, source: CmError },
    #[error("split prime {q} in Diff(m) for m = {m}")]
    SplitInDiff { q: u64, m: Rational },
}

impl GzError {
    /// Errors caused by the caller's parameters rather than by a broken
    /// internal invariant.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            GzError::NotPrime(_)
                | GzError::NotFundamental(_)
                | GzError::SmallDiscriminant(_)
                | GzError::EqualDiscriminants
                | GzError::Inadmissible { .. }
                | GzError::NoResidue(..)
        )
    }
}

/// Exponent used for a ramified prime `q | D` in `Diff(m)`.
///
/// `OfMD` weights by `ord_q(m D)` and agrees with high-precision evaluation
/// of the Hauptmodul side; `OfM` weights by `ord_q(m)` and is kept for
/// comparison (it disagrees whenever such a term occurs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum RamifiedExponent {
    OfM,
    #[default]
    OfMD,
}

impl RamifiedExponent {
    pub fn name(&self) -> &'static str {
        match self {
            RamifiedExponent::OfM => "of_m",
            RamifiedExponent::OfMD => "of_mD",
        }
    }
}

impl FromStr for RamifiedExponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "of_m" | "of-m" => Ok(RamifiedExponent::OfM),
            "of_mD" | "of-mD" | "of_md" | "of-md" => Ok(RamifiedExponent::OfMD),
            _ => Err(format!("unknown ramified exponent variant '{s}' (of_m | of_mD)")),
        }
    }
}

/// Validated parameters `(p, d, D, mu, beta)` with `g = gcd(mu, 2p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GzParams {
    p: u64,
    d: u64,
    big_d: u64,
    mu: u64,
    beta: u64,
    g: u64,
}

fn check_disc(x: u64) -> Result<(), GzError> {
    if !is_fundamental_discriminant(-(x as i64)) {
        return Err(GzError::NotFundamental(x));
    }
    if x <= 4 {
        return Err(GzError::SmallDiscriminant(x));
    }
    Ok(())
}

/// Smallest `r` in `[0, 2p)` with `r^2 = -x (mod 4p)`.
pub fn smallest_residue(x: u64, p: u64) -> Option<u64> {
    crate::quadforms::admissible_residues(-(x as i64), p).first().copied()
}

impl GzParams {
    pub fn new(p: u64, d: u64, big_d: u64, mu: i64, beta: i64) -> Result<Self, GzError> {
        if !is_prime(p) {
            return Err(GzError::NotPrime(p));
        }
        check_disc(d)?;
        check_disc(big_d)?;
        if d == big_d {
            return Err(GzError::EqualDiscriminants);
        }
        let two_p = 2 * p as i64;
        let mu = mu.rem_euclid(two_p) as u64;
        let beta = beta.rem_euclid(two_p) as u64;
        if !is_admissible(-(big_d as i64), p, mu as i64) {
            return Err(GzError::Inadmissible { name: "mu", residue: mu, disc: big_d, modulus: 4 * p });
        }
        if !is_admissible(-(d as i64), p, beta as i64) {
            return Err(GzError::Inadmissible { name: "beta", residue: beta, disc: d, modulus: 4 * p });
        }
        let g = mu.gcd(&(2 * p));
        Ok(Self { p, d, big_d, mu, beta, g })
    }

    /// Parameters with the smallest admissible `mu` and `beta`.
    pub fn with_smallest_residues(p: u64, d: u64, big_d: u64) -> Result<Self, GzError> {
        if !is_prime(p) {
            return Err(GzError::NotPrime(p));
        }
        check_disc(d)?;
        check_disc(big_d)?;
        let beta = smallest_residue(d, p).ok_or(GzError::NoResidue(d, 4 * p))?;
        let mu = smallest_residue(big_d, p).ok_or(GzError::NoResidue(big_d, 4 * p))?;
        Self::new(p, d, big_d, mu as i64, beta as i64)
    }

    /// Exchanges the roles of `(d, beta)` and `(D, mu)`.
    pub fn swapped(&self) -> Result<Self, GzError> {
        Self::new(self.p, self.big_d, self.d, self.beta as i64, self.mu as i64)
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn d(&self) -> u64 {
        self.d
    }
    pub fn big_d(&self) -> u64 {
        self.big_d
    }
    pub fn mu(&self) -> u64 {
        self.mu
    }
    pub fn beta(&self) -> u64 {
        self.beta
    }
    pub fn g(&self) -> u64 {
        self.g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BetaSign {
    Plus,
    Minus,
}

impl fmt::Display for BetaSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BetaSign::Plus => "+",
            BetaSign::Minus => "-",
        })
    }
}

/// One admissible `(sign, y, n)` with `t = g mu (+-beta) - 2npD - 2gpy`,
/// `|t| < g sqrt(dD)` and `m = d/(4p) - t^2/(4 g^2 p D)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeTerm {
    pub sign: BetaSign,
    pub y: i64,
    pub n: i64,
    pub t: i128,
    pub m: Rational,
}

/// All lattice terms of both sums, ordered by `(sign, y, n)`.
pub fn enumerate_terms(params: &GzParams) -> Result<Vec<LatticeTerm>, GzError> {
    let (p, d, big_d, g) = (
        params.p as i128,
        params.d as i128,
        params.big_d as i128,
        params.g as i128,
    );
    let bound_sq = g * g * d * big_d;
    if is_square(d * big_d) {
        return Err(GzError::SquareProduct((d * big_d) as u128));
    }
    let root = isqrt(bound_sq);
    let step = 2 * p * big_d;
    assert_eq!(big_d % g, 0, "g must divide D");
    let y_count = (big_d / g) as i64;
    let denom = 4 * g * g * p * big_d;

    let mut terms = Vec::new();
    for (sign, b) in [
        (BetaSign::Plus, params.beta as i128),
        (BetaSign::Minus, -(params.beta as i128)),
    ] {
        for y in 0..y_count {
            let base = g * params.mu as i128 * b - 2 * g * p * y as i128;
            // |base - step n| <= root  (bound_sq is not a square)
            let n_lo = Integer::div_ceil(&(base - root), &step);
            let n_hi = Integer::div_floor(&(base + root), &step);
            for n in n_lo..=n_hi {
                let t = base - step * n;
                debug_assert!(t * t < bound_sq);
                let m = Rational::new(bound_sq - t * t, denom);
                let n = n as i64;
                if !m.is_positive() {
                    return Err(GzError::NonPositiveM { y, n, m });
                }
                terms.push(LatticeTerm { sign, y, n, t, m });
            }
        }
    }
    Ok(terms)
}

/// Local data and weight of one lattice term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermContribution {
    pub term: LatticeTerm,
    pub diff: BTreeSet<u64>,
    pub o: u32,
    /// `(q, coefficient)` of `coefficient * log q`; `None` when the term
    /// vanishes because `|Diff(m)| != 1`.
    pub weight: Option<(u64, i64)>,
}

impl TermContribution {
    pub fn as_log_sum(&self) -> PrimeLogSum {
        let mut s = PrimeLogSum::zero();
        if let Some((q, c)) = self.weight {
            s.add_term(q, Rational::from(c as i128));
        }
        s
    }
}

pub fn term_contribution(
    term: &LatticeTerm,
    params: &GzParams,
    variant: RamifiedExponent,
) -> Result<TermContribution, GzError> {
    let wrap = |source: CmError| GzError::Term { y: term.y, n: term.n, m: term.m, source };
    let ctx = KappaContext::new(params.big_d, params.p).map_err(wrap)?;
    let m = term.m;
    let big_d = params.big_d;
    // every term must have m D integral, whether or not it contributes
    rho_scaled(&m, big_d, 1, "mD").map_err(wrap)?;
    let diff = diff_set(&m, &ctx).map_err(wrap)?;
    let o = o_of_m(&m, big_d).map_err(wrap)?;
    if diff.len() != 1 {
        return Ok(TermContribution { term: *term, diff, o, weight: None });
    }
    let q = *diff.iter().next().unwrap();
    let exponent: i64 = match splitting(q, big_d) {
        Splitting::Inert => {
            let ord = ord_q(&m, q).map_err(|e| wrap(e.into()))? as i64;
            (ord + 1) * rho_scaled(&m, big_d, q, "mD/q").map_err(wrap)? as i64
        }
        Splitting::Ramified => {
            let md = m * Rational::from(big_d as i128);
            let ord = match variant {
                RamifiedExponent::OfM => ord_q(&m, q),
                RamifiedExponent::OfMD => ord_q(&md, q),
            }
            .map_err(|e| wrap(e.into()))? as i64;
            ord * rho_scaled(&m, big_d, 1, "mD").map_err(wrap)? as i64
        }
        Splitting::Split => return Err(GzError::SplitInDiff { q, m }),
    };
    // Weight 2^(o(m)+1); with 2^o(m) alone the total is the log of the
    // fourth power of the norm rather than the eighth.
    let coefficient = (1i64 << (o + 1)) * exponent;
    Ok(TermContribution { term: *term, diff, o, weight: Some((q, coefficient)) })
}

/// Every term with its contribution, plus their sum.
#[derive(Debug, Clone)]
pub struct GzEvaluation {
    pub params: GzParams,
    pub variant: RamifiedExponent,
    pub contributions: Vec<TermContribution>,
    pub total: PrimeLogSum,
}

pub fn evaluate(params: &GzParams, variant: RamifiedExponent) -> Result<GzEvaluation, GzError> {
    let terms = enumerate_terms(params)?;
    let contributions = terms
        .par_iter()
        .map(|t| term_contribution(t, params, variant))
        .collect::<Result<Vec<_>, _>>()?;
    let total = contributions
        .iter()
        .fold(PrimeLogSum::zero(), |acc, c| acc + c.as_log_sum());
    Ok(GzEvaluation { params: *params, variant, contributions, total })
}

/// `log prod |j*(tau_D) - j*(tau_d)|^8` as an exact prime-log sum.
pub fn gz_log_norm(params: &GzParams, variant: RamifiedExponent) -> Result<PrimeLogSum, GzError> {
    Ok(evaluate(params, variant)?.total)
}

/// Unsigned norm `prod |j*(tau_D) - j*(tau_d)|`.
pub fn norm_magnitude(params: &GzParams, variant: RamifiedExponent) -> Result<NormMagnitude, GzError> {
    Ok(gz_log_norm(params, variant)?.eighth_root())
}

/// Formal sum `sum_q e_q log q` with rational exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PrimeLogSum {
    terms: BTreeMap<u64, Rational>,
}

impl PrimeLogSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn add_term(&mut self, q: u64, e: Rational) {
        let entry = self.terms.entry(q).or_insert_with(Rational::zero);
        *entry += e;
        if entry.is_zero() {
            self.terms.remove(&q);
        }
    }

    /// Nonzero exponents by increasing prime.
    pub fn exponents(&self) -> &BTreeMap<u64, Rational> {
        &self.terms
    }

    pub fn exponent(&self, q: u64) -> Rational {
        self.terms.get(&q).copied().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_nonnegative_integral(&self) -> bool {
        self.terms.values().all(|e| e.is_integer() && !e.is_negative())
    }

    pub fn scale(&self, k: Rational) -> Self {
        let mut out = Self::zero();
        for (&q, &e) in &self.terms {
            out.add_term(q, e * k);
        }
        out
    }

    pub fn to_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(&q, e)| e.to_f64().unwrap_or(f64::NAN) * (q as f64).ln())
            .sum()
    }

    /// `sum_q e_q log q` at `bits` of precision.
    pub fn to_real(&self, bits: u32) -> Real {
        let w = bits + 16;
        let mut acc = Real::zero(w);
        for (&q, e) in &self.terms {
            let log_q = Real::from_i64(q as i64, w).ln();
            let e = Real::from_ratio(&BigInt::from(*e.numer()), &BigInt::from(*e.denom()), w);
            acc = acc + log_q * e;
        }
        acc.with_prec(bits)
    }

    /// Reads the sum as `log N^8` and returns `N`.
    pub fn eighth_root(&self) -> NormMagnitude {
        NormMagnitude {
            factors: self
                .terms
                .iter()
                .map(|(&q, &e)| (q, e / Rational::from(8)))
                .collect(),
        }
    }
}

impl std::ops::Add for PrimeLogSum {
    type Output = PrimeLogSum;

    fn add(mut self, rhs: PrimeLogSum) -> PrimeLogSum {
        for (q, e) in rhs.terms {
            self.add_term(q, e);
        }
        self
    }
}

impl fmt::Display for PrimeLogSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(q, e)| format!("{e}*log({q})"))
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

/// `prod q^(e_q)` with rational exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NormMagnitude {
    pub factors: Vec<(u64, Rational)>,
}

impl NormMagnitude {
    pub fn one() -> Self {
        Self { factors: Vec::new() }
    }

    pub fn is_integral(&self) -> bool {
        self.factors.iter().all(|(_, e)| e.is_integer() && !e.is_negative())
    }

    /// The exact value when every exponent is a nonnegative integer.
    pub fn to_integer(&self) -> Option<BigUint> {
        if !self.is_integral() {
            return None;
        }
        let mut v = BigUint::one();
        for &(q, e) in &self.factors {
            v *= BigUint::from(q).pow(e.to_integer() as u32);
        }
        Some(v)
    }

    pub fn to_f64(&self) -> f64 {
        self.factors
            .iter()
            .map(|&(q, e)| (q as f64).powf(e.to_f64().unwrap_or(f64::NAN)))
            .product()
    }
}

impl fmt::Display for NormMagnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(v) = self.to_integer() {
            return write!(f, "{v}");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|(q, e)| {
                if e.is_one() {
                    q.to_string()
                } else if e.is_integer() {
                    format!("{q}^{e}")
                } else {
                    format!("{q}^({e})")
                }
            })
            .collect();
        f.write_str(&parts.join(" * "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(p: u64, d: u64, big_d: u64) -> NormMagnitude {
        let params = GzParams::with_smallest_residues(p, d, big_d).unwrap();
        norm_magnitude(&params, RamifiedExponent::default()).unwrap()
    }

    #[test]
    fn params_validation() {
        assert_eq!(GzParams::with_smallest_residues(47, 39, 39), Err(GzError::EqualDiscriminants));
        assert_eq!(GzParams::with_smallest_residues(46, 39, 163), Err(GzError::NotPrime(46)));
        assert_eq!(GzParams::with_smallest_residues(47, 39, 4), Err(GzError::SmallDiscriminant(4)));
        assert_eq!(GzParams::with_smallest_residues(47, 12, 11), Err(GzError::NotFundamental(12)));
        assert!(matches!(
            GzParams::new(47, 11, 19, 1, 40),
            Err(GzError::Inadmissible { .. })
        ));
        // -3 mod 8 = 5 is not a square
        assert_eq!(GzParams::with_smallest_residues(2, 7, 35), Err(GzError::NoResidue(35, 8)));
    }

    #[test]
    fn g_is_gcd_with_zero_convention() {
        let p = GzParams::with_smallest_residues(2, 7, 8).unwrap();
        assert_eq!((p.mu(), p.g()), (0, 4));
        let p = GzParams::with_smallest_residues(47, 39, 163).unwrap();
        assert_eq!(p.g(), 1);
    }

    #[test]
    fn worked_example_norms() {
        assert_eq!(norm(47, 11, 19).to_integer(), Some(1u32.into()));
        assert_eq!(norm(47, 11, 43).to_integer(), Some(1u32.into()));
        assert_eq!(norm(47, 11, 67).to_integer(), Some(2u32.into()));
        assert_eq!(norm(47, 11, 163).to_integer(), Some(4u32.into()));
        assert_eq!(norm(47, 39, 11).to_integer(), Some(1u32.into()));
        assert_eq!(norm(47, 39, 19).to_integer(), Some(1u32.into()));
        assert_eq!(norm(47, 39, 43).to_integer(), Some(7u32.into()));
        assert_eq!(norm(47, 39, 67).to_integer(), Some(13u32.into()));
        assert_eq!(norm(47, 39, 163).to_integer(), Some(217u32.into()));
    }

    #[test]
    fn log_norm_for_163_and_39() {
        let params = GzParams::with_smallest_residues(47, 39, 163).unwrap();
        let s = gz_log_norm(&params, RamifiedExponent::OfMD).unwrap();
        assert_eq!(s.to_string(), "8*log(7) + 8*log(31)");
        assert!((s.to_f64() - 8.0 * 217f64.ln()).abs() < 1e-12);
        let exact = Real::from_i64(217, 300).ln().mul_2k(3);
        assert!((s.to_real(300) - exact).magnitude_bits().is_none_or(|b| b < -280));
    }

    #[test]
    fn empty_sum_gives_one() {
        let params = GzParams::with_smallest_residues(47, 11, 19).unwrap();
        let eval = evaluate(&params, RamifiedExponent::OfMD).unwrap();
        assert!(eval.total.is_zero());
        assert_eq!(eval.total.eighth_root().to_string(), "1");
    }

    #[test]
    fn terms_are_ordered_and_valid() {
        let params = GzParams::with_smallest_residues(47, 39, 163).unwrap();
        let terms = enumerate_terms(&params).unwrap();
        assert!(!terms.is_empty());
        let keys: Vec<_> = terms.iter().map(|t| (t.sign, t.y, t.n)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        let cap = Rational::new(39, 4 * 47);
        for t in &terms {
            assert!(t.m.is_positive() && t.m <= cap);
            assert!((t.m * Rational::from(163)).is_integer());
        }
    }

    #[test]
    fn vanishing_rules() {
        let params = GzParams::with_smallest_residues(47, 39, 163).unwrap();
        for t in enumerate_terms(&params).unwrap() {
            let c = term_contribution(&t, &params, RamifiedExponent::OfMD).unwrap();
            if c.diff.len() != 1 {
                assert_eq!(c.weight, None);
                assert!(c.as_log_sum().is_zero());
            }
            assert_eq!(c.diff.len() % 2, 1);
        }
    }

    #[test]
    fn variants_differ_on_ramified_terms() {
        // p = 2, d = 7, D = 15 has ramified primes in Diff(m)
        let params = GzParams::with_smallest_residues(2, 7, 15).unwrap();
        let a = gz_log_norm(&params, RamifiedExponent::OfMD).unwrap();
        let b = gz_log_norm(&params, RamifiedExponent::OfM).unwrap();
        assert_ne!(a, b);
        assert!(a.is_nonnegative_integral());
    }

    #[test]
    fn symmetric_in_the_two_discriminants() {
        for &(p, d, big_d) in &[(47u64, 39u64, 163u64), (2, 7, 15), (5, 11, 31), (13, 23, 52)] {
            let params = GzParams::with_smallest_residues(p, d, big_d).unwrap();
            let a = gz_log_norm(&params, RamifiedExponent::OfMD).unwrap();
            let b = gz_log_norm(&params.swapped().unwrap(), RamifiedExponent::OfMD).unwrap();
            assert_eq!(a, b, "p={p} d={d} D={big_d}");
        }
    }

    #[test]
    fn radical_display() {
        let mut s = PrimeLogSum::zero();
        s.add_term(2, Rational::from(4));
        s.add_term(3, Rational::from(8));
        let n = s.eighth_root();
        assert!(!n.is_integral());
        assert_eq!(n.to_string(), "2^(1/2) * 3");
        assert!((n.to_f64() - 3.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ramified_exponent_parse() {
        assert_eq!("of_m".parse(), Ok(RamifiedExponent::OfM));
        assert_eq!("of-mD".parse(), Ok(RamifiedExponent::OfMD));
        assert!("x".parse::<RamifiedExponent>().is_err());
    }
}
