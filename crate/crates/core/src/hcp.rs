//! Class polynomials from CM value norms: pick the class-number-one
//! discriminants admissible for `p`, compute `|X_D|` and `|Y_D|` exactly,
//! fix signs, and interpolate `Y = prod (X - j*_p(tau_d))` with the
//! Hauptmodul normalized to vanish at a base discriminant.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::arith::{factorize, is_fundamental_discriminant, is_prime};
use crate::gzrhs::{norm_magnitude, smallest_residue, GzError, GzParams, RamifiedExponent};
use crate::hauptmodul::{heegner_values, HauptError, PrecisionConfig, QSeries, ETA_PRIMES};
use crate::highprec::{Complex, Real};
use crate::quadforms::{class_number, is_admissible, FormError};

/// Primes `p` for which `X_0(p)+` has genus zero.
pub const GENUS_ZERO_PRIMES: [u64; 15] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 41, 47, 59, 71];

/// `|D|` for the imaginary quadratic fields of class number one.
pub const CLASS_NUMBER_ONE: [u64; 9] = [3, 4, 7, 8, 11, 19, 43, 67, 163];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HcpError {
    #[error("p = {0} is not prime")]
    NotPrime(u64),
    #[error("p = {0} is unsupported: X_0(p)+ does not have genus zero")]
    Unsupported(u64),
    #[error("-{0} is not a fundamental discriminant")]
    NotFundamental(u64),
    #[error("discriminant -{0} is excluded: need |d| > 4")]
    SmallDiscriminant(u64),
    #[error("-{d} is not a square mod {modulus}")]
    Inadmissible { d: u64, modulus: u64 },
    #[error("base discriminant -{base} is not a usable member of S({p})")]
    BadBase { base: u64, p: u64 },
    #[error("infeasible: h(-{d}) + 1 = {needed} exceeds |S({p})| = {available} usable discriminants")]
    Infeasible { d: u64, p: u64, needed: usize, available: usize },
    #[error("norm for D = {big_d} against {other} is not an integer: {value}")]
    NonIntegralMagnitude { big_d: u64, other: u64, value: String },
    #[error("need {needed} pairs, have {found}")]
    TooFewPairs { needed: usize, found: usize },
    #[error("degenerate data: duplicate X value {0}")]
    DuplicateX(BigInt),
    #[error("sign resolution failed: {0}")]
    SignResolutionFailed(String),
    #[error("ambiguous sign search: candidates {}", .0.join(" | "))]
    Ambiguous(Vec<String>),
    #[error("numeric sign resolution needs series data for p = {0}")]
    NumericUnsupported(u64),
    #[error("numeric value for D = {big_d} inconsistent with exact data: {detail}")]
    NumericMismatch { big_d: u64, detail: String },
    #[error(transparent)]
    Gz(#[from] GzError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Haupt(#[from] HauptError),
}

impl HcpError {
    /// Errors caused by the caller's parameters.
    pub fn is_invalid_input(&self) -> bool {
        match self {
            HcpError::NotPrime(_)
            | HcpError::Unsupported(_)
            | HcpError::NotFundamental(_)
            | HcpError::SmallDiscriminant(_)
            | HcpError::Inadmissible { .. }
            | HcpError::BadBase { .. }
            | HcpError::NumericUnsupported(_) => true,
            HcpError::Gz(e) => e.is_invalid_input(),
            HcpError::Haupt(HauptError::SeriesRequired(_) | HauptError::SeriesMismatch { .. }) => true,
            _ => false,
        }
    }
}

/// `|D|` of the class-number-one discriminants that are squares mod `4p`,
/// ascending.
pub fn s_set(p: u64) -> Result<Vec<u64>, HcpError> {
    if !is_prime(p) {
        return Err(HcpError::NotPrime(p));
    }
    if !GENUS_ZERO_PRIMES.contains(&p) {
        return Err(HcpError::Unsupported(p));
    }
    Ok(CLASS_NUMBER_ONE
        .iter()
        .copied()
        .filter(|&d| smallest_residue(d, p).is_some())
        .collect())
}

/// Members of `S(p)` with `|D| > 4`.
pub fn usable_s_set(p: u64) -> Result<Vec<u64>, HcpError> {
    Ok(s_set(p)?.into_iter().filter(|&d| d > 4).collect())
}

/// Whether `h(-d) + 1 <= |usable S(p)|`; `false` for unsupported `p`.
pub fn feasible(d: u64, p: u64) -> bool {
    match (usable_s_set(p), class_number(-(d as i64))) {
        (Ok(s), Ok(h)) => h + 1 <= s.len(),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairSign {
    Plus,
    Minus,
    Unresolved,
}

impl PairSign {
    fn apply(&self, mag: &BigUint) -> Option<BigInt> {
        let v = BigInt::from(mag.clone());
        match self {
            _ if mag.is_zero() => Some(v),
            PairSign::Plus => Some(v),
            PairSign::Minus => Some(-v),
            PairSign::Unresolved => None,
        }
    }
}

/// `(X_D, Y_D)` with `|X_D| = |j*(tau_D)|` (zero at the base) and
/// `|Y_D| = prod |j*(tau_D) - j*(tau_d)|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterpolationPair {
    pub big_d: u64,
    pub x_mag: BigUint,
    pub y_mag: BigUint,
    pub x_sign: PairSign,
    pub y_sign: PairSign,
}

impl InterpolationPair {
    /// Signed `X_D`; zero counts as resolved.
    pub fn x(&self) -> Option<BigInt> {
        self.x_sign.apply(&self.x_mag)
    }

    pub fn y(&self) -> Option<BigInt> {
        self.y_sign.apply(&self.y_mag)
    }
}

impl fmt::Display for InterpolationPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<BigInt>, mag: &BigUint| match v {
            Some(v) => v.to_string(),
            None => format!("+-{mag}"),
        };
        write!(f, "({}, {})", show(self.x(), &self.x_mag), show(self.y(), &self.y_mag))
    }
}

fn exact_norm(params: &GzParams, variant: RamifiedExponent) -> Result<BigUint, HcpError> {
    let n = norm_magnitude(params, variant)?;
    n.to_integer().ok_or_else(|| HcpError::NonIntegralMagnitude {
        big_d: params.big_d(),
        other: params.d(),
        value: n.to_string(),
    })
}

/// A validated class-polynomial computation for `-d` and `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HcpProblem {
    pub p: u64,
    pub d: u64,
    pub beta: u64,
    pub base_d: u64,
    pub class_number: usize,
    pub s_set: Vec<u64>,
    pub variant: RamifiedExponent,
}

impl HcpProblem {
    /// Uses the smallest admissible `beta` and, unless given, the smallest
    /// usable member of `S(p)` as base.
    pub fn new(p: u64, d: u64, base_d: Option<u64>, variant: RamifiedExponent) -> Result<Self, HcpError> {
        let s = s_set(p)?;
        if !is_fundamental_discriminant(-(d as i64)) {
            return Err(HcpError::NotFundamental(d));
        }
        if d <= 4 {
            return Err(HcpError::SmallDiscriminant(d));
        }
        let beta = smallest_residue(d, p).ok_or(HcpError::Inadmissible { d, modulus: 4 * p })?;
        let usable: Vec<u64> = s.iter().copied().filter(|&x| x > 4).collect();
        let base_d = match base_d {
            Some(b) if usable.contains(&b) => b,
            Some(b) => return Err(HcpError::BadBase { base: b, p }),
            None => *usable.first().ok_or(HcpError::Infeasible {
                d,
                p,
                needed: 2,
                available: 0,
            })?,
        };
        let h = class_number(-(d as i64))?;
        if h + 1 > usable.len() {
            return Err(HcpError::Infeasible { d, p, needed: h + 1, available: usable.len() });
        }
        Ok(Self { p, d, beta, base_d, class_number: h, s_set: s, variant })
    }

    pub fn usable(&self) -> Vec<u64> {
        self.s_set.iter().copied().filter(|&x| x > 4).collect()
    }

    /// Exact magnitudes for every usable `D`, ascending, signs unresolved.
    pub fn build_pairs(&self) -> Result<Vec<InterpolationPair>, HcpError> {
        build_pairs(self.d, self.beta, self.p, self.base_d, self.variant)
    }
}

pub fn build_pairs(
    d: u64,
    beta: u64,
    p: u64,
    base_d: u64,
    variant: RamifiedExponent,
) -> Result<Vec<InterpolationPair>, HcpError> {
    let usable = usable_s_set(p)?;
    if !usable.contains(&base_d) {
        return Err(HcpError::BadBase { base: base_d, p });
    }
    if !is_admissible(-(d as i64), p, beta as i64) {
        return Err(HcpError::Inadmissible { d, modulus: 4 * p });
    }
    usable
        .par_iter()
        .map(|&big_d| {
            let x_mag = if big_d == base_d {
                BigUint::zero()
            } else {
                exact_norm(&GzParams::with_smallest_residues(p, base_d, big_d)?, variant)?
            };
            let y_mag = if big_d == d {
                BigUint::zero()
            } else {
                let mu = smallest_residue(big_d, p).expect("member of S(p)");
                exact_norm(&GzParams::new(p, d, big_d, mu as i64, beta as i64)?, variant)?
            };
            Ok(InterpolationPair {
                big_d,
                x_mag,
                y_mag,
                x_sign: PairSign::Unresolved,
                y_sign: PairSign::Unresolved,
            })
        })
        .collect()
}

/// Monic integer polynomial, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassPolynomial {
    pub d: u64,
    pub coefficients: Vec<BigInt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Irreducibility {
    /// Proven: irreducible modulo `witness`, or degree at most 3 with no
    /// rational root (`witness = None`).
    Irreducible { witness: Option<u64> },
    Reducible { root: BigInt },
    Undetermined,
}

impl ClassPolynomial {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, x: &BigInt) -> BigInt {
        self.coefficients
            .iter()
            .rev()
            .fold(BigInt::zero(), |acc, c| acc * x + c)
    }

    /// `(-1)^h P(-X)`: the polynomial matching the pairs `(-X, (-1)^h Y)`.
    pub fn reflect(&self) -> ClassPolynomial {
        let h = self.degree();
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| if (h - i) % 2 == 1 { -c } else { c.clone() })
            .collect();
        ClassPolynomial { d: self.d, coefficients }
    }

    pub fn max_abs_coefficient(&self) -> BigInt {
        self.coefficients.iter().map(|c| c.abs()).max().unwrap_or_default()
    }

    pub fn irreducibility(&self) -> Irreducibility {
        let n = self.degree();
        if n <= 1 {
            return Irreducibility::Irreducible { witness: None };
        }
        let c0 = &self.coefficients[0];
        if c0.is_zero() {
            return Irreducibility::Reducible { root: BigInt::zero() };
        }
        if let Some(c) = c0.abs().to_u64() {
            for t in factorize(c).divisors() {
                for r in [BigInt::from(t), -BigInt::from(t)] {
                    if self.eval(&r).is_zero() {
                        return Irreducibility::Reducible { root: r };
                    }
                }
            }
            if n <= 3 {
                return Irreducibility::Irreducible { witness: None };
            }
        }
        for ell in (3u64..400).filter(|&l| is_prime(l)) {
            if irreducible_mod(&self.coefficients, ell) == Some(true) {
                return Irreducibility::Irreducible { witness: Some(ell) };
            }
        }
        Irreducibility::Undetermined
    }
}

/// `Some(true)` if the monic polynomial has no monic factor of degree
/// `1..=n/2` modulo `ell`; `None` when the search is too large.
fn irreducible_mod(coeffs: &[BigInt], ell: u64) -> Option<bool> {
    let n = coeffs.len() - 1;
    let big_ell = BigInt::from(ell);
    let f: Vec<u64> = coeffs
        .iter()
        .map(|c| (((c % &big_ell) + &big_ell) % &big_ell).to_u64().unwrap())
        .collect();
    for k in 1..=n / 2 {
        let count = (ell as u128).checked_pow(k as u32)?;
        if count > 200_000 {
            return None;
        }
        for idx in 0..count as u64 {
            let mut g = Vec::with_capacity(k + 1);
            let mut v = idx;
            for _ in 0..k {
                g.push(v % ell);
                v /= ell;
            }
            g.push(1);
            if rem_mod(&f, &g, ell).iter().all(|&c| c == 0) {
                return Some(false);
            }
        }
    }
    Some(true)
}

fn rem_mod(f: &[u64], g: &[u64], ell: u64) -> Vec<u64> {
    let mut r = f.to_vec();
    let k = g.len() - 1;
    while r.len() > k {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - k;
        for (i, &gi) in g.iter().enumerate() {
            r[shift + i] = (r[shift + i] + ell - lead * gi % ell) % ell;
        }
        r.pop();
    }
    r
}

impl fmt::Display for ClassPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for (i, c) in self.coefficients.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mono = match i {
                0 => String::new(),
                1 => "X".to_string(),
                _ => format!("X^{i}"),
            };
            if i == 0 {
                out.push_str(&mag.to_string());
            } else if mag.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&format!("{mag}*{mono}"));
            }
        }
        if out.is_empty() {
            out.push('0');
        }
        f.write_str(&out)
    }
}

fn poly_mul_linear(p: &[BigRational], root: &BigRational) -> Vec<BigRational> {
    // p * (X - root)
    let mut out = vec![BigRational::zero(); p.len() + 1];
    for (i, c) in p.iter().enumerate() {
        out[i + 1] += c;
        out[i] -= c * root;
    }
    out
}

/// Lagrange interpolation through the first `degree + 1` points, checked
/// against every point; the result must be monic of exact degree with
/// integer coefficients.
pub fn interpolate(points: &[(BigInt, BigInt)], degree: usize, d: u64) -> Result<ClassPolynomial, HcpError> {
    if points.len() < degree + 1 {
        return Err(HcpError::TooFewPairs { needed: degree + 1, found: points.len() });
    }
    let mut seen = std::collections::BTreeSet::new();
    for (x, _) in points {
        if !seen.insert(x.clone()) {
            return Err(HcpError::DuplicateX(x.clone()));
        }
    }
    let used = &points[..degree + 1];
    let xs: Vec<BigRational> = used.iter().map(|(x, _)| BigRational::from(x.clone())).collect();
    let mut acc = vec![BigRational::zero(); degree + 1];
    for (i, (_, y)) in used.iter().enumerate() {
        let mut basis = vec![BigRational::one()];
        let mut denom = BigRational::one();
        for (j, xj) in xs.iter().enumerate() {
            if i != j {
                basis = poly_mul_linear(&basis, xj);
                denom *= &xs[i] - xj;
            }
        }
        let scale = BigRational::from(y.clone()) / denom;
        for (k, c) in basis.iter().enumerate() {
            acc[k] += c * &scale;
        }
    }
    if !acc[degree].is_one() {
        return Err(HcpError::SignResolutionFailed(format!(
            "interpolant is not monic of degree {degree} (leading coefficient {})",
            acc[degree]
        )));
    }
    if let Some(c) = acc.iter().find(|c| !c.is_integer()) {
        return Err(HcpError::SignResolutionFailed(format!("non-integer coefficient {c}")));
    }
    let poly = ClassPolynomial { d, coefficients: acc.iter().map(|c| c.to_integer()).collect() };
    for (x, y) in points {
        if &poly.eval(x) != y {
            return Err(HcpError::SignResolutionFailed(format!(
                "interpolant {poly} misses the point ({x}, {y})"
            )));
        }
    }
    Ok(poly)
}

#[derive(Debug, Clone)]
pub enum SignStrategy {
    /// Keep the sign choices that interpolate to a monic integer polynomial.
    Search,
    /// Read signs off numeric Hauptmodul values.
    Numeric { prec: PrecisionConfig, series: Option<QSeries> },
}

impl SignStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SignStrategy::Search => "search",
            SignStrategy::Numeric { .. } => "numeric",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SignResolution {
    pub pairs: Vec<InterpolationPair>,
    pub polynomial: ClassPolynomial,
}

fn signed_points(pairs: &[InterpolationPair]) -> Option<Vec<(BigInt, BigInt)>> {
    pairs.iter().map(|p| Some((p.x()?, p.y()?))).collect()
}

pub fn resolve_signs(
    problem: &HcpProblem,
    pairs: &[InterpolationPair],
    strategy: &SignStrategy,
) -> Result<SignResolution, HcpError> {
    let h = problem.class_number;
    if pairs.len() < h + 1 {
        return Err(HcpError::TooFewPairs { needed: h + 1, found: pairs.len() });
    }
    match strategy {
        SignStrategy::Search => search_signs(problem, pairs),
        SignStrategy::Numeric { prec, series } => numeric_signs(problem, pairs, prec, series.as_ref()),
    }
}

fn search_signs(problem: &HcpProblem, pairs: &[InterpolationPair]) -> Result<SignResolution, HcpError> {
    let h = problem.class_number;
    // (pair index, is_x) for each magnitude whose sign is free
    let free: Vec<(usize, bool)> = pairs
        .iter()
        .enumerate()
        .flat_map(|(i, p)| [(i, true, &p.x_mag), (i, false, &p.y_mag)])
        .filter(|(_, _, m)| !m.is_zero())
        .map(|(i, is_x, _)| (i, is_x))
        .collect();
    assert!(free.len() < 32, "sign search over {} magnitudes", free.len());
    let mut found: BTreeMap<ClassPolynomial, Vec<InterpolationPair>> = BTreeMap::new();
    for mask in 0u64..(1u64 << free.len()) {
        let mut signed = pairs.to_vec();
        for p in signed.iter_mut() {
            p.x_sign = PairSign::Plus;
            p.y_sign = PairSign::Plus;
        }
        for (bit, &(i, is_x)) in free.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                if is_x {
                    signed[i].x_sign = PairSign::Minus;
                } else {
                    signed[i].y_sign = PairSign::Minus;
                }
            }
        }
        let points = signed_points(&signed).expect("all signs set");
        if let Ok(poly) = interpolate(&points, h, problem.d) {
            found.entry(poly).or_insert(signed);
        }
    }
    if found.is_empty() {
        return Err(HcpError::SignResolutionFailed(
            "no sign assignment interpolates to a monic integer polynomial".into(),
        ));
    }
    let first = found.keys().next().unwrap().clone();
    let reflected = first.reflect();
    if found.keys().any(|k| *k != first && *k != reflected) {
        return Err(HcpError::Ambiguous(found.keys().map(|k| k.to_string()).collect()));
    }
    // X -> -X is a symmetry of the magnitude data; take the branch whose
    // first nonzero X is positive.
    let canonical = |signed: &[InterpolationPair]| {
        signed
            .iter()
            .find(|p| !p.x_mag.is_zero())
            .is_none_or(|p| p.x_sign == PairSign::Plus)
    };
    let (polynomial, signed) = found
        .into_iter()
        .find(|(_, s)| canonical(s))
        .expect("the reflected solution is also found");
    Ok(SignResolution { pairs: signed, polynomial })
}

fn numeric_signs(
    problem: &HcpProblem,
    pairs: &[InterpolationPair],
    prec: &PrecisionConfig,
    series: Option<&QSeries>,
) -> Result<SignResolution, HcpError> {
    let p = problem.p;
    if series.is_none() && !ETA_PRIMES.contains(&p) {
        return Err(HcpError::NumericUnsupported(p));
    }
    let single = |big_d: u64| -> Result<Complex, HcpError> {
        let mu = smallest_residue(big_d, p).expect("member of S(p)");
        let mut v = heegner_values(p, big_d, mu, prec, series)?;
        Ok(v.remove(0).0)
    };
    let base = single(problem.base_d)?;
    let roots: Vec<Complex> = heegner_values(p, problem.d, problem.beta, prec, series)?
        .into_iter()
        .map(|(v, _)| v)
        .collect();
    let digits = prec.decimal_digits / 2;
    let tol = Real::from_i64(10, prec.working_bits()).powi(-(digits as i64));
    let check = |big_d: u64, what: &str, v: &Complex, mag: &BigUint| -> Result<PairSign, HcpError> {
        let scale = v.abs().max(Real::from_i64(1, prec.working_bits()));
        if v.im.abs() > &tol * &scale {
            return Err(HcpError::NumericMismatch {
                big_d,
                detail: format!("{what} = {v:.12} is not real"),
            });
        }
        let exact = Real::from_bigint(BigInt::from(mag.clone()), prec.working_bits());
        if (&v.re.abs() - &exact).abs() > &tol * &scale {
            return Err(HcpError::NumericMismatch {
                big_d,
                detail: format!("|{what}| = {} but exact magnitude is {mag}", v.re.abs().to_sci_string(20)),
            });
        }
        Ok(if mag.is_zero() || !v.re.is_negative() { PairSign::Plus } else { PairSign::Minus })
    };
    let mut signed = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let j = single(pair.big_d)?;
        let x = &j - &base;
        let mut y = Complex::from_real(Real::from_i64(1, prec.working_bits()));
        for r in &roots {
            y = &y * &(&j - r);
        }
        signed.push(InterpolationPair {
            x_sign: check(pair.big_d, "X", &x, &pair.x_mag)?,
            y_sign: check(pair.big_d, "Y", &y, &pair.y_mag)?,
            ..pair.clone()
        });
    }
    let points = signed_points(&signed).expect("all signs set");
    let polynomial = interpolate(&points, problem.class_number, problem.d)?;
    Ok(SignResolution { pairs: signed, polynomial })
}

/// Full pipeline output.
#[derive(Debug, Clone)]
pub struct HcpResult {
    pub problem: HcpProblem,
    pub unsigned_pairs: Vec<InterpolationPair>,
    pub resolution: SignResolution,
}

pub fn class_polynomial(problem: &HcpProblem, strategy: &SignStrategy) -> Result<HcpResult, HcpError> {
    let unsigned_pairs = problem.build_pairs()?;
    let resolution = resolve_signs(problem, &unsigned_pairs, strategy)?;
    Ok(HcpResult { problem: problem.clone(), unsigned_pairs, resolution })
}
