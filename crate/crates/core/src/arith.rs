//! Exact integer and rational primitives: factorization, valuations,
//! Kronecker symbols and local Hilbert symbols.

use std::fmt;

use num_integer::{Integer, Roots};
use num_rational::Ratio;
use num_traits::Zero;
use thiserror::Error;

/// Exact rational number with a positive denominator in lowest terms.
pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("valuation of zero is undefined")]
    ZeroValuation,
    #[error("Hilbert symbol needs nonzero arguments")]
    ZeroHilbertArgument,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("value {0} does not fit the integer range used for factorization")]
    OutOfRange(i128),
}

/// A place of the rationals: the real place or a finite prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Place {
    Infinity,
    Prime(u64),
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Place::Infinity => write!(f, "inf"),
            Place::Prime(q) => write!(f, "{q}"),
        }
    }
}

/// Prime factorization of a positive integer, primes strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Factorization {
    value: u64,
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(q, _)| q)
    }

    /// Multiplies the factors back together.
    pub fn reconstruct(&self) -> u128 {
        self.factors
            .iter()
            .fold(1u128, |acc, &(q, e)| acc * (q as u128).pow(e))
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    /// All positive divisors, unsorted.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(q, e) in &self.factors {
            let len = divs.len();
            let mut pw = 1u64;
            for _ in 0..e {
                pw *= q;
                for i in 0..len {
                    divs.push(divs[i] * pw);
                }
            }
        }
        divs
    }
}

impl fmt::Display for Factorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|&(q, e)| if e == 1 { q.to_string() } else { format!("{q}^{e}") })
            .collect();
        write!(f, "{}", parts.join(" * "))
    }
}

const TRIAL_LIMIT: u64 = 1_000_000;

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for the full `u64` range.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &b in &BASES {
        if n % b == 0 {
            return n == b;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

// Brent's variant; the constant walks 1, 2, 3, ... so runs are reproducible.
fn pollard_rho(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    for c in 1u64.. {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut g) = (2u64, 2u64, 1u64);
        let mut q = 1u64;
        let mut r = 1u64;
        let mut ys = y;
        const BLOCK: u64 = 64;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..BLOCK.min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = q.gcd(&n);
                k += BLOCK;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = x.abs_diff(ys).gcd(&n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
    }
    unreachable!()
}

fn split_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let f = pollard_rho(n);
    split_into(f, out);
    split_into(n / f, out);
}

/// Certified prime factorization. `factorize(1)` has no factors.
///
/// # Panics
/// Panics on `n == 0`.
pub fn factorize(n: u64) -> Factorization {
    assert!(n >= 1, "factorize needs n >= 1");
    let mut rest = n;
    let mut factors = Vec::new();
    let mut push = |q: u64, rest: &mut u64| {
        let mut e = 0;
        while *rest % q == 0 {
            *rest /= q;
            e += 1;
        }
        if e > 0 {
            factors.push((q, e));
        }
    };
    push(2, &mut rest);
    let mut q = 3u64;
    while q <= TRIAL_LIMIT && q * q <= rest {
        push(q, &mut rest);
        q += 2;
    }
    if rest > 1 {
        let mut big = Vec::new();
        split_into(rest, &mut big);
        big.sort_unstable();
        for chunk in big.chunk_by(|a, b| a == b) {
            factors.push((chunk[0], chunk.len() as u32));
        }
    }
    Factorization { value: n, factors }
}

/// Factors `|n|` for a nonzero `i128` that fits in `u64`.
pub fn factorize_i128(n: i128) -> Result<Factorization, ArithError> {
    let abs = n.unsigned_abs();
    if abs == 0 || abs > u64::MAX as u128 {
        return Err(ArithError::OutOfRange(n));
    }
    Ok(factorize(abs as u64))
}

/// Kronecker symbol `(a | n)`.
pub fn kronecker(a: i64, n: i64) -> i8 {
    kronecker_i128(a as i128, n as i128)
}

pub(crate) fn kronecker_i128(mut a: i128, mut n: i128) -> i8 {
    if n == 0 {
        return if a.abs() == 1 { 1 } else { 0 };
    }
    if a.is_even() && n.is_even() {
        return 0;
    }
    let mut sign = 1i8;
    let v = n.trailing_zeros();
    n >>= v;
    if v % 2 == 1 && matches!(a.rem_euclid(8), 3 | 5) {
        sign = -sign;
    }
    if n < 0 {
        n = -n;
        if a < 0 {
            sign = -sign;
        }
    }
    // Jacobi symbol (a | n) for odd positive n.
    a = a.rem_euclid(n);
    while a != 0 {
        let tz = a.trailing_zeros();
        a >>= tz;
        if tz % 2 == 1 && matches!(n % 8, 3 | 5) {
            sign = -sign;
        }
        if a % 4 == 3 && n % 4 == 3 {
            sign = -sign;
        }
        std::mem::swap(&mut a, &mut n);
        a %= n;
    }
    if n == 1 {
        sign
    } else {
        0
    }
}

fn ord_int(mut n: i128, q: u64) -> u32 {
    debug_assert!(n != 0);
    let q = q as i128;
    let mut v = 0;
    while n % q == 0 {
        n /= q;
        v += 1;
    }
    v
}

/// `q`-adic valuation of a nonzero rational.
pub fn ord_q(x: &Rational, q: u64) -> Result<i32, ArithError> {
    if x.is_zero() {
        return Err(ArithError::ZeroValuation);
    }
    if !is_prime(q) {
        return Err(ArithError::NotPrime(q));
    }
    Ok(ord_int(*x.numer(), q) as i32 - ord_int(*x.denom(), q) as i32)
}

/// Splits `n = q^v * u` with `q` not dividing `u`.
fn split_power(mut n: i128, q: u64) -> (u32, i128) {
    let qq = q as i128;
    let mut v = 0;
    while n % qq == 0 {
        n /= qq;
        v += 1;
    }
    (v, n)
}

/// Local Hilbert symbol `(a, b)_v` of two nonzero rationals.
pub fn hilbert_symbol(a: &Rational, b: &Rational, place: Place) -> Result<i8, ArithError> {
    if a.is_zero() || b.is_zero() {
        return Err(ArithError::ZeroHilbertArgument);
    }
    // num/den and num*den differ by the square den^2.
    let a = a.numer() * a.denom();
    let b = b.numer() * b.denom();
    match place {
        Place::Infinity => Ok(if a < 0 && b < 0 { -1 } else { 1 }),
        Place::Prime(q) => {
            if !is_prime(q) {
                return Err(ArithError::NotPrime(q));
            }
            Ok(hilbert_at_prime(a, b, q))
        }
    }
}

fn hilbert_at_prime(a: i128, b: i128, q: u64) -> i8 {
    let (alpha, u) = split_power(a, q);
    let (beta, v) = split_power(b, q);
    if q == 2 {
        let eps = |x: i128| ((x.rem_euclid(4) - 1) / 2) as u32;
        let omega = |x: i128| {
            let r = x.rem_euclid(8);
            ((r * r - 1) / 8 % 2) as u32
        };
        let e = eps(u) * eps(v) + alpha * omega(v) + beta * omega(u);
        return if e % 2 == 0 { 1 } else { -1 };
    }
    let qi = q as i128;
    let mut s: i8 = if (alpha * beta) % 2 == 1 && qi % 4 == 3 { -1 } else { 1 };
    if beta % 2 == 1 {
        s *= kronecker_i128(u, qi);
    }
    if alpha % 2 == 1 {
        s *= kronecker_i128(v, qi);
    }
    s
}

/// True for negative fundamental discriminants.
pub fn is_fundamental_discriminant(disc: i64) -> bool {
    if disc >= 0 {
        return false;
    }
    let r = disc.rem_euclid(4);
    if r == 1 {
        return factorize(disc.unsigned_abs()).is_squarefree();
    }
    if r == 0 {
        let m = disc / 4;
        return matches!(m.rem_euclid(4), 2 | 3) && factorize(m.unsigned_abs()).is_squarefree();
    }
    false
}

/// Integer square root of a nonnegative `i128`.
pub(crate) fn isqrt(n: i128) -> i128 {
    debug_assert!(n >= 0);
    n.sqrt()
}

pub(crate) fn is_square(n: i128) -> bool {
    n >= 0 && {
        let s = isqrt(n);
        s * s == n
    }
}

/// Numerator/denominator as `u64`-factorable integers.
pub(crate) fn rational_support(x: &Rational) -> Result<Vec<u64>, ArithError> {
    let mut primes: Vec<u64> = factorize_i128(*x.numer())?
        .primes()
        .chain(factorize_i128(*x.denom())?.primes())
        .collect();
    primes.sort_unstable();
    primes.dedup();
    Ok(primes)
}
