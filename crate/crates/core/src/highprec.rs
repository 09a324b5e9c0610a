//! Binary floating point on top of `num-bigint`.
//!
//! A [`Real`] is `m * 2^e` with `|m| < 2^prec`; every operation rounds its
//! result to the larger of the operand precisions. Only what the Hauptmodul
//! evaluation needs is provided: field operations, `sqrt`, `exp`, `ln`, `pi`
//! and complex `exp`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_integer::Roots;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Bits needed to hold `digits` decimal digits.
pub fn bits_for_digits(digits: u32) -> u32 {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as u32 + 1
}

#[derive(Clone, Debug)]
pub struct Real {
    m: BigInt,
    e: i64,
    prec: u32,
}

fn round_shift(m: &BigInt, shift: u64) -> BigInt {
    let (sign, mag) = (m.sign(), m.magnitude());
    let half = BigUint::one() << (shift - 1);
    BigInt::from_biguint(sign, (mag + half) >> shift)
}

impl Real {
    fn normalized(m: BigInt, e: i64, prec: u32) -> Real {
        let bits = m.bits();
        if bits <= prec as u64 {
            return Real { m, e, prec };
        }
        let shift = bits - prec as u64;
        let mut m = round_shift(&m, shift);
        let mut e = e + shift as i64;
        if m.bits() > prec as u64 {
            // rounding carried into a new bit; m is a power of two
            m >>= 1;
            e += 1;
        }
        Real { m, e, prec }
    }

    pub fn zero(prec: u32) -> Real {
        Real { m: BigInt::zero(), e: 0, prec }
    }

    pub fn from_i64(v: i64, prec: u32) -> Real {
        Real::normalized(BigInt::from(v), 0, prec)
    }

    pub fn from_bigint(v: BigInt, prec: u32) -> Real {
        Real::normalized(v, 0, prec)
    }

    /// `num / den`, correctly rounded up to one ulp.
    pub fn from_ratio(num: &BigInt, den: &BigInt, prec: u32) -> Real {
        Real::from_bigint(num.clone(), prec + 2).quotient(&Real::from_bigint(den.clone(), prec + 2)).with_prec(prec)
    }

    /// Exact conversion; panics on NaN or infinity.
    pub fn from_f64(x: f64, prec: u32) -> Real {
        assert!(x.is_finite(), "cannot convert {x} to Real");
        if x == 0.0 {
            return Real::zero(prec);
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
        Real::normalized(BigInt::from(mant) * sign, e, prec.max(53))
            .with_prec(prec)
    }

    /// Parses decimal text such as `-12.5e-3`.
    pub fn parse_decimal(s: &str, prec: u32) -> Option<Real> {
        let s = s.trim();
        let (mant, exp10) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
            None => (s, 0),
        };
        let (neg, mant) = match mant.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, mant.strip_prefix('+').unwrap_or(mant)),
        };
        let (int_part, frac_part) = match mant.split_once('.') {
            Some((a, b)) => (a, b),
            None => (mant, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits: BigInt = format!("0{int_part}{frac_part}").parse().ok()?;
        let digits = if neg { -digits } else { digits };
        let scale = exp10 - frac_part.len() as i64;
        let ten = BigInt::from(10);
        let v = if scale >= 0 {
            Real::from_bigint(digits * ten.pow(scale as u32), prec)
        } else {
            Real::from_ratio(&digits, &ten.pow((-scale) as u32), prec)
        };
        Some(v)
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn with_prec(&self, prec: u32) -> Real {
        Real::normalized(self.m.clone(), self.e, prec)
    }

    pub fn is_zero(&self) -> bool {
        self.m.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.m.is_negative()
    }

    pub fn abs(&self) -> Real {
        Real { m: self.m.abs(), e: self.e, prec: self.prec }
    }

    /// `self * 2^k`, exact.
    pub fn mul_2k(&self, k: i64) -> Real {
        Real { m: self.m.clone(), e: self.e + k, prec: self.prec }
    }

    /// `floor(log2 |x|) + 1`, or `None` for zero.
    pub fn magnitude_bits(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.e + self.m.bits() as i64)
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.m.bits();
        let (m, e) = if bits > 64 {
            let s = bits - 64;
            (&self.m >> s, self.e + s as i64)
        } else {
            (self.m.clone(), self.e)
        };
        let mf = m.to_f64().unwrap_or(f64::NAN);
        if e > 2000 {
            return mf.signum() * f64::INFINITY;
        }
        if e < -2200 {
            return 0.0;
        }
        // split to avoid overflow of 2^e for subnormal-range results
        let half = e / 2;
        mf * 2f64.powi(half as i32) * 2f64.powi((e - half) as i32)
    }

    /// Nearest integer, ties away from zero.
    pub fn round(&self) -> BigInt {
        if self.e >= 0 {
            return &self.m << self.e as u64;
        }
        round_shift(&self.m, (-self.e) as u64)
    }

    pub fn sqrt(&self) -> Real {
        assert!(!self.is_negative(), "sqrt of a negative Real");
        if self.is_zero() {
            return self.clone();
        }
        let target = 2 * self.prec as i64 + 4;
        let mut s = target - self.m.bits() as i64;
        if (self.e - s) % 2 != 0 {
            s += 1;
        }
        let m = if s >= 0 { &self.m << s as u64 } else { &self.m >> (-s) as u64 };
        Real::normalized(Roots::sqrt(&m), (self.e - s) / 2, self.prec)
    }

    pub fn powi(&self, n: i64) -> Real {
        let mut base = if n < 0 { Real::from_i64(1, self.prec).div(self) } else { self.clone() };
        let mut n = n.unsigned_abs();
        let mut acc = Real::from_i64(1, self.prec);
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            n >>= 1;
        }
        acc
    }

    pub fn pi(prec: u32) -> Real {
        cached_constant("pi", prec, |bits| {
            // 16 atan(1/5) - 4 atan(1/239)
            BigInt::from(16) * atan_inv(5, bits) - BigInt::from(4) * atan_inv(239, bits)
        })
    }

    pub fn ln2(prec: u32) -> Real {
        cached_constant("ln2", prec, |bits| {
            // 2 atanh(1/3)
            BigInt::from(2) * atanh_inv(3, bits)
        })
    }

    pub fn exp(&self) -> Real {
        let prec = self.prec;
        if self.is_zero() {
            return Real::from_i64(1, prec);
        }
        let xf = self.to_f64();
        assert!(xf.abs() < 1e15, "exp argument {xf} out of range");
        let k = (xf / std::f64::consts::LN_2).round() as i64;
        let halvings = (prec as f64).sqrt() as i64 + 1;
        let w = prec + halvings as u32 + 20;
        let kbits = 64 - k.unsigned_abs().leading_zeros();
        let r = self.with_prec(w + kbits) - Real::ln2(w + kbits) * Real::from_i64(k, w + kbits);
        let r = r.with_prec(w).mul_2k(-halvings);
        let mut sum = Real::from_i64(1, w);
        let mut term = Real::from_i64(1, w);
        for n in 1.. {
            term = (&term * &r).quotient(&Real::from_i64(n, w));
            match term.magnitude_bits() {
                Some(b) if b > -(w as i64) - 4 => sum = &sum + &term,
                _ => break,
            }
        }
        for _ in 0..halvings {
            sum = &sum * &sum;
        }
        sum.mul_2k(k).with_prec(prec)
    }

    /// Natural logarithm; panics unless `self > 0`.
    pub fn ln(&self) -> Real {
        assert!(!self.is_zero() && !self.is_negative(), "ln of a non-positive Real");
        let prec = self.prec;
        let w = prec + 20;
        // self = y * 2^k with y in [1/2, 1)
        let k = self.magnitude_bits().unwrap();
        let y = self.with_prec(w).mul_2k(-k);
        let one = Real::from_i64(1, w);
        let u = (&y - &one).quotient(&(&y + &one));
        let u2 = &u * &u;
        let mut pow = u.clone();
        let mut sum = u.clone();
        for n in 1.. {
            pow = &pow * &u2;
            let term = pow.quotient(&Real::from_i64(2 * n + 1, w));
            match term.magnitude_bits() {
                Some(b) if b > -(w as i64) - 4 => sum = &sum + &term,
                _ => break,
            }
        }
        let kbits = 64 - k.unsigned_abs().leading_zeros();
        let ln2 = Real::ln2(w + kbits);
        (sum.mul_2k(1) + ln2 * Real::from_i64(k, w + kbits)).with_prec(prec)
    }

    pub fn quotient(&self, rhs: &Real) -> Real {
        assert!(!rhs.is_zero(), "division by zero");
        let prec = self.prec.max(rhs.prec);
        if self.is_zero() {
            return Real::zero(prec);
        }
        let s = (prec as i64 + 2 + rhs.m.bits() as i64 - self.m.bits() as i64).max(0);
        let q = (&self.m << s as u64) / &rhs.m;
        Real::normalized(q, self.e - s - rhs.e, prec)
    }

    /// Scientific notation with `digits` significant digits.
    pub fn to_sci_string(&self, digits: u32) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let digits = digits.max(1);
        let log10 = (self.magnitude_bits().unwrap() as f64 - 1.0) * std::f64::consts::LOG10_2;
        let mut e10 = log10.floor() as i64;
        let w = self.prec.max(bits_for_digits(digits)) + 16;
        let ten = BigInt::from(10);
        loop {
            let shift = digits as i64 - 1 - e10;
            let scaled = if shift >= 0 {
                self.with_prec(w) * Real::from_bigint(ten.pow(shift as u32), w)
            } else {
                self.with_prec(w).quotient(&Real::from_bigint(ten.pow((-shift) as u32), w))
            };
            let n = scaled.round().abs();
            let s = n.to_string();
            if s.len() as u32 > digits {
                e10 += 1;
                continue;
            }
            if (s.len() as u32) < digits {
                e10 -= 1;
                continue;
            }
            let sign = if self.is_negative() { "-" } else { "" };
            let (head, tail) = s.split_at(1);
            return if tail.is_empty() {
                format!("{sign}{head}e{e10}")
            } else {
                format!("{sign}{head}.{tail}e{e10}")
            };
        }
    }
}

fn cached_constant(name: &'static str, prec: u32, f: impl Fn(u64) -> BigInt) -> Real {
    static CACHE: OnceLock<Mutex<HashMap<(&'static str, u32), Real>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&(name, prec)) {
        return v.clone();
    }
    let bits = prec as u64 + 32;
    let v = Real::normalized(f(bits), -(bits as i64), prec);
    cache.lock().unwrap().insert((name, prec), v.clone());
    v
}

/// `atan(1/x) * 2^bits`, truncated.
fn atan_inv(x: u64, bits: u64) -> BigInt {
    let x2 = BigInt::from(x * x);
    let mut power = (BigInt::one() << bits) / BigInt::from(x);
    let mut sum = BigInt::zero();
    let mut k = 0u64;
    while !power.is_zero() {
        let term = &power / BigInt::from(2 * k + 1);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        power /= &x2;
        k += 1;
    }
    sum
}

/// `atanh(1/x) * 2^bits`, truncated.
fn atanh_inv(x: u64, bits: u64) -> BigInt {
    let x2 = BigInt::from(x * x);
    let mut power = (BigInt::one() << bits) / BigInt::from(x);
    let mut sum = BigInt::zero();
    let mut k = 0u64;
    while !power.is_zero() {
        sum += &power / BigInt::from(2 * k + 1);
        power /= &x2;
        k += 1;
    }
    sum
}

fn add_reals(a: &Real, b: &Real) -> Real {
    let prec = a.prec.max(b.prec);
    if a.is_zero() {
        return b.with_prec(prec);
    }
    if b.is_zero() {
        return a.with_prec(prec);
    }
    let (ta, tb) = (a.magnitude_bits().unwrap(), b.magnitude_bits().unwrap());
    let gap = prec as i64 + 4;
    if ta > tb + gap {
        return a.with_prec(prec);
    }
    if tb > ta + gap {
        return b.with_prec(prec);
    }
    let e = a.e.min(b.e);
    let m = (&a.m << (a.e - e) as u64) + (&b.m << (b.e - e) as u64);
    Real::normalized(m, e, prec)
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Real {}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Real {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.e.min(other.e);
        let a = &self.m << (self.e - e) as u64;
        let b = &other.m << (other.e - e) as u64;
        a.cmp(&b)
    }
}

macro_rules! real_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl<'a> $tr<&'a Real> for &'a Real {
            type Output = Real;
            fn $method(self, rhs: &'a Real) -> Real {
                let f: fn(&Real, &Real) -> Real = $body;
                f(self, rhs)
            }
        }
        impl $tr<Real> for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $tr<&'a Real> for Real {
            type Output = Real;
            fn $method(self, rhs: &'a Real) -> Real {
                (&self).$method(rhs)
            }
        }
    };
}

real_binop!(Add, add, add_reals);
real_binop!(Sub, sub, |a, b| add_reals(a, &-b));
real_binop!(Mul, mul, |a, b| Real::normalized(&a.m * &b.m, a.e + b.e, a.prec.max(b.prec)));
real_binop!(Div, div, |a, b| Real::quotient(a, b));

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real { m: -&self.m, e: self.e, prec: self.prec }
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        -&self
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().map(|p| p as u32).unwrap_or_else(|| {
            (self.prec as f64 * std::f64::consts::LOG10_2).floor() as u32
        });
        f.write_str(&self.to_sci_string(digits))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl Complex {
    pub fn new(re: Real, im: Real) -> Complex {
        Complex { re, im }
    }

    pub fn from_real(re: Real) -> Complex {
        let prec = re.prec;
        Complex { re, im: Real::zero(prec) }
    }

    pub fn from_f64(re: f64, im: f64, prec: u32) -> Complex {
        Complex { re: Real::from_f64(re, prec), im: Real::from_f64(im, prec) }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec.max(self.im.prec)
    }

    pub fn with_prec(&self, prec: u32) -> Complex {
        Complex { re: self.re.with_prec(prec), im: self.im.with_prec(prec) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Complex {
        Complex { re: self.re.clone(), im: -&self.im }
    }

    pub fn norm_sqr(&self) -> Real {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn abs(&self) -> Real {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, k: &Real) -> Complex {
        Complex { re: &self.re * k, im: &self.im * k }
    }

    pub fn mul_2k(&self, k: i64) -> Complex {
        Complex { re: self.re.mul_2k(k), im: self.im.mul_2k(k) }
    }

    pub fn recip(&self) -> Complex {
        let n = self.norm_sqr();
        Complex { re: self.re.quotient(&n), im: (-&self.im).quotient(&n) }
    }

    pub fn powi(&self, n: i64) -> Complex {
        let mut base = if n < 0 { self.recip() } else { self.clone() };
        let mut n = n.unsigned_abs();
        let mut acc = Complex::from_real(Real::from_i64(1, self.prec()));
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            n >>= 1;
        }
        acc
    }

    /// `exp(i theta)` for real `theta`.
    pub fn cis(theta: &Real) -> Complex {
        let prec = theta.prec;
        let halvings = (prec as f64).sqrt() as i64 + 1;
        let w = prec + halvings as u32 + 20;
        let two_pi_f = 2.0 * std::f64::consts::PI;
        let n = (theta.to_f64() / two_pi_f).round() as i64;
        let nbits = 64 - n.unsigned_abs().leading_zeros();
        let two_pi = Real::pi(w + nbits).mul_2k(1);
        let r = (theta.with_prec(w + nbits) - two_pi * Real::from_i64(n, w + nbits))
            .with_prec(w)
            .mul_2k(-halvings);
        let mut sum = Complex::from_real(Real::from_i64(1, w));
        let mut term = sum.clone();
        for k in 1.. {
            // term *= i r / k
            let kk = Real::from_i64(k, w);
            term = Complex { re: (-&term.im * &r).quotient(&kk), im: (&term.re * &r).quotient(&kk) };
            let big = term.re.magnitude_bits().into_iter().chain(term.im.magnitude_bits()).max();
            match big {
                Some(b) if b > -(w as i64) - 4 => sum = &sum + &term,
                _ => break,
            }
        }
        for _ in 0..halvings {
            sum = &sum * &sum;
        }
        sum.with_prec(prec)
    }

    pub fn exp(&self) -> Complex {
        Complex::cis(&self.im).scale(&self.re.exp())
    }
}

impl<'a> Add<&'a Complex> for &'a Complex {
    type Output = Complex;
    fn add(self, rhs: &'a Complex) -> Complex {
        Complex { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl<'a> Sub<&'a Complex> for &'a Complex {
    type Output = Complex;
    fn sub(self, rhs: &'a Complex) -> Complex {
        Complex { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl<'a> Mul<&'a Complex> for &'a Complex {
    type Output = Complex;
    fn mul(self, rhs: &'a Complex) -> Complex {
        Complex {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl<'a> Div<&'a Complex> for &'a Complex {
    type Output = Complex;
    fn div(self, rhs: &'a Complex) -> Complex {
        let n = rhs.norm_sqr();
        let num = self * &rhs.conj();
        Complex { re: num.re.quotient(&n), im: num.im.quotient(&n) }
    }
}

impl Neg for &Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex { re: -&self.re, im: -&self.im }
    }
}

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision();
        let show = |x: &Real| match digits {
            Some(d) => x.to_sci_string(d as u32),
            None => x.to_string(),
        };
        if self.im.is_negative() {
            write!(f, "{} - {}i", show(&self.re), show(&self.im.abs()))
        } else {
            write!(f, "{} + {}i", show(&self.re), show(&self.im))
        }
    }
}
