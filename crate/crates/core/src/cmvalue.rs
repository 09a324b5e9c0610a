//! Arithmetic ingredients of the CM value formula over `k = Q(sqrt(-D))`:
//! ideal counts `rho`, the ramification count `o(m)`, and the local
//! obstruction set `Diff(m)`.

use std::collections::BTreeSet;

use num_traits::Signed;
use thiserror::Error;

use crate::arith::{
    factorize, hilbert_symbol, is_fundamental_discriminant, kronecker, ord_q, rational_support,
    ArithError, Place, Rational,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CmError {
    #[error("rho needs a positive integer argument")]
    ZeroArgument,
    #[error("m = {0} must be positive")]
    NonPositive(Rational),
    #[error("-{0} is not a fundamental discriminant")]
    NotFundamental(u64),
    #[error("D = {0} <= 4 is excluded (unit group larger than +-1)")]
    SmallDiscriminant(u64),
    #[error("integrality failure: {what} = {value} is not an integer")]
    NotIntegral { what: &'static str, value: Rational },
    #[error(transparent)]
    Arith(#[from] ArithError),
}

/// How a rational prime behaves in `Q(sqrt(-D))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Splitting {
    Split,
    Inert,
    Ramified,
}

pub fn splitting(q: u64, d_abs: u64) -> Splitting {
    match kronecker(-(d_abs as i64), q as i64) {
        1 => Splitting::Split,
        -1 => Splitting::Inert,
        _ => Splitting::Ramified,
    }
}

/// The imaginary quadratic field `Q(sqrt(-D))` together with the norm of the
/// ideal used as lattice (here always `p`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KappaContext {
    d_abs: u64,
    ideal_norm: u64,
}

impl KappaContext {
    pub fn new(d_abs: u64, ideal_norm: u64) -> Result<Self, CmError> {
        if !is_fundamental_discriminant(-(d_abs as i64)) {
            return Err(CmError::NotFundamental(d_abs));
        }
        if d_abs <= 4 {
            return Err(CmError::SmallDiscriminant(d_abs));
        }
        Ok(Self { d_abs, ideal_norm })
    }

    pub fn d_abs(&self) -> u64 {
        self.d_abs
    }

    pub fn ideal_norm(&self) -> u64 {
        self.ideal_norm
    }

    /// Number of roots of unity in `k`; `D > 4` is enforced at construction.
    pub fn units(&self) -> u32 {
        2
    }
}

/// Number of integral ideals of norm `n` in `Q(sqrt(-D))`.
pub fn rho(n: u64, d_abs: u64) -> Result<u64, CmError> {
    if n == 0 {
        return Err(CmError::ZeroArgument);
    }
    let mut count = 1u64;
    for &(q, e) in factorize(n).factors() {
        count *= match splitting(q, d_abs) {
            Splitting::Split => e as u64 + 1,
            Splitting::Inert if e % 2 == 0 => 1,
            Splitting::Inert => return Ok(0),
            Splitting::Ramified => 1,
        };
    }
    Ok(count)
}

/// Converts a rational known to be a positive integer.
pub fn checked_integer(value: Rational, what: &'static str) -> Result<u64, CmError> {
    if !value.is_integer() || value.is_negative() {
        return Err(CmError::NotIntegral { what, value });
    }
    u64::try_from(*value.numer()).map_err(|_| CmError::NotIntegral { what, value })
}

/// `rho(m * D / divisor)`, verifying that the argument is integral.
pub fn rho_scaled(m: &Rational, d_abs: u64, divisor: u64, what: &'static str) -> Result<u64, CmError> {
    let arg = m * Rational::from(d_abs as i128) / Rational::from(divisor as i128);
    rho(checked_integer(arg, what)?, d_abs)
}

/// Number of primes `q | D` with `ord_q(m D) > 0`.
pub fn o_of_m(m: &Rational, d_abs: u64) -> Result<u32, CmError> {
    if !m.is_positive() {
        return Err(CmError::NonPositive(*m));
    }
    let md = m * Rational::from(d_abs as i128);
    let mut count = 0;
    for q in factorize(d_abs).primes() {
        if ord_q(&md, q)? > 0 {
            count += 1;
        }
    }
    Ok(count)
}

/// Finite primes `q` with `(-m N(a), -D)_q = -1`.
///
/// Only `2` and primes dividing `D * num(m) * den(m) * N(a)` can occur; the
/// symbol is `+1` everywhere else.
pub fn diff_set(m: &Rational, ctx: &KappaContext) -> Result<BTreeSet<u64>, CmError> {
    if !m.is_positive() {
        return Err(CmError::NonPositive(*m));
    }
    let x = -m * Rational::from(ctx.ideal_norm as i128);
    let minus_d = Rational::from(-(ctx.d_abs as i128));
    let mut candidates: BTreeSet<u64> = rational_support(m)?.into_iter().collect();
    candidates.insert(2);
    candidates.extend(factorize(ctx.d_abs).primes());
    if ctx.ideal_norm > 1 {
        candidates.extend(factorize(ctx.ideal_norm).primes());
    }
    let mut out = BTreeSet::new();
    for q in candidates {
        if hilbert_symbol(&x, &minus_d, Place::Prime(q))? == -1 {
            out.insert(q);
        }
    }
    Ok(out)
}
