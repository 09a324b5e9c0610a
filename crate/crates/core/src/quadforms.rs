//! Positive-definite binary quadratic forms, Heegner representatives for
//! `Gamma_0(p)` and their CM points.

use std::collections::BTreeSet;
use std::fmt;

use num_integer::Integer;
use thiserror::Error;

use crate::arith::{is_fundamental_discriminant, is_prime, isqrt};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormError {
    #[error("form {0} is not positive definite")]
    NotPositiveDefinite(QuadraticForm),
    #[error("{0} is not a negative fundamental discriminant")]
    NotFundamental(i64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("beta = {beta} is not admissible: beta^2 != {disc} mod {modulus}")]
    InadmissibleResidue { disc: i64, beta: i64, modulus: u64 },
    #[error("Heegner search for disc {disc}, p = {p} exhausted a <= {bound} with {found} of {expected} classes")]
    SearchExhausted { disc: i64, p: u64, bound: i64, found: usize, expected: usize },
}

/// Integral binary quadratic form `a X^2 + b XY + c Y^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuadraticForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl QuadraticForm {
    pub const fn new(a: i64, b: i64, c: i64) -> Self {
        Self { a, b, c }
    }

    pub fn discriminant(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a > 0 && self.discriminant() < 0
    }

    pub fn is_primitive(&self) -> bool {
        self.a.gcd(&self.b).gcd(&self.c) == 1
    }

    pub fn is_reduced(&self) -> bool {
        let Self { a, b, c } = *self;
        b.abs() <= a && a <= c && !((b.abs() == a || a == c) && b < 0)
    }

    /// Gauss reduction to the unique reduced form in the `SL_2(Z)`-class.
    pub fn reduce(&self) -> Result<QuadraticForm, FormError> {
        if !self.is_positive_definite() {
            return Err(FormError::NotPositiveDefinite(*self));
        }
        let (mut a, mut b, mut c) = (self.a as i128, self.b as i128, self.c as i128);
        loop {
            if b > a || b <= -a {
                // translate so that -a < b <= a
                let k = Integer::div_floor(&(a - b), &(2 * a));
                c += k * (a * k + b);
                b += 2 * a * k;
            } else if c < a {
                (a, b, c) = (c, -b, a);
            } else {
                if a == c && b < 0 {
                    b = -b;
                }
                return Ok(QuadraticForm::new(a as i64, b as i64, c as i64));
            }
        }
    }
}

impl fmt::Display for QuadraticForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

/// All reduced primitive positive-definite forms of discriminant `disc`.
pub fn reduced_forms(disc: i64) -> Vec<QuadraticForm> {
    assert!(disc < 0);
    let n = -(disc as i128);
    let mut out = Vec::new();
    let mut a: i128 = 1;
    while 3 * a * a <= n {
        for b in (-a + 1)..=a {
            if (b * b + n) % (4 * a) != 0 {
                continue;
            }
            let c = (b * b + n) / (4 * a);
            let f = QuadraticForm::new(a as i64, b as i64, c as i64);
            if f.is_reduced() && f.is_primitive() {
                out.push(f);
            }
        }
        a += 1;
    }
    out
}

/// Class number of a negative fundamental discriminant.
pub fn class_number(disc: i64) -> Result<usize, FormError> {
    if !is_fundamental_discriminant(disc) {
        return Err(FormError::NotFundamental(disc));
    }
    Ok(reduced_forms(disc).len())
}

/// Residues `beta` in `[0, 2p)` with `beta^2 = disc (mod 4p)`.
pub fn admissible_residues(disc: i64, p: u64) -> Vec<u64> {
    let m = 4 * p as i128;
    (0..2 * p)
        .filter(|&b| ((b as i128) * (b as i128) - disc as i128).rem_euclid(m) == 0)
        .collect()
}

pub fn is_admissible(disc: i64, p: u64, beta: i64) -> bool {
    let b = beta as i128;
    (b * b - disc as i128).rem_euclid(4 * p as i128) == 0
}

/// One primitive form `(a, b, c)` of discriminant `disc` with `p | a` and
/// `b = beta (mod 2p)` per `SL_2(Z)`-class, hence one per `Gamma_0(p)`-class
/// of Heegner forms.
///
/// Candidates are scanned with `a = p, 2p, 3p, ...` and, for each `a`, `b`
/// increasing through `(-a, a]`; the first candidate met in each class is
/// kept, so the output is deterministic and the leading coefficients are as
/// small as possible.
pub fn heegner_reps(disc: i64, p: u64, beta: i64) -> Result<Vec<QuadraticForm>, FormError> {
    if !is_prime(p) {
        return Err(FormError::NotPrime(p));
    }
    let h = class_number(disc)?;
    if !is_admissible(disc, p, beta) {
        return Err(FormError::InadmissibleResidue { disc, beta, modulus: 4 * p });
    }
    let pi = p as i64;
    let step = 2 * pi;
    let root = isqrt(-(disc as i128)) as i64 + 1;
    let max_k = 2 * (h as i64) * root + 2 * pi;
    let mut seen = BTreeSet::new();
    let mut reps = Vec::with_capacity(h);
    for k in 1..=max_k {
        let a = pi * k;
        // smallest b > -a with b = beta mod 2p
        let mut b = -a + 1 + (beta - (-a + 1)).rem_euclid(step);
        while b <= a {
            let num = b as i128 * b as i128 - disc as i128;
            if num % (4 * a as i128) == 0 {
                let f = QuadraticForm::new(a, b, (num / (4 * a as i128)) as i64);
                if f.is_primitive() {
                    let red = f.reduce()?;
                    if seen.insert(red) {
                        reps.push(f);
                        if reps.len() == h {
                            return Ok(reps);
                        }
                    }
                }
            }
            b += step;
        }
    }
    Err(FormError::SearchExhausted {
        disc,
        p,
        bound: pi * max_k,
        found: reps.len(),
        expected: h,
    })
}

/// Exact CM point `(-b + sqrt(disc)) / (2a)` of a positive-definite form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeegnerPoint {
    pub b: i64,
    pub a: i64,
    pub disc: i64,
}

impl HeegnerPoint {
    pub fn form(&self) -> QuadraticForm {
        let c = (self.b as i128 * self.b as i128 - self.disc as i128) / (4 * self.a as i128);
        QuadraticForm::new(self.a, self.b, c as i64)
    }

    pub fn real_part(&self) -> (i64, i64) {
        (-self.b, 2 * self.a)
    }

    pub fn to_f64(&self) -> (f64, f64) {
        let den = 2.0 * self.a as f64;
        (-(self.b as f64) / den, (-(self.disc as f64)).sqrt() / den)
    }

    /// Moves the point inside its `Gamma_0^*(p)`-orbit to minimize `a`
    /// (maximize the imaginary part): translations bring `b` into `(-a, a]`,
    /// the Fricke involution sends `(pA, b, c)` to `(pc, -b, A)`.
    ///
    /// Requires `p | a`, which every Heegner form satisfies and both moves
    /// preserve.
    pub fn fricke_reduce(&self, p: u64) -> HeegnerPoint {
        let p = p as i64;
        debug_assert_eq!(self.a % p, 0);
        let mut f = self.form();
        loop {
            let k = Integer::div_floor(&(f.a - f.b), &(2 * f.a));
            f = QuadraticForm::new(f.a, f.b + 2 * f.a * k, f.c + k * (f.a * k + f.b));
            if p * f.c < f.a {
                f = QuadraticForm::new(p * f.c, -f.b, f.a / p);
            } else {
                return heegner_point(&f);
            }
        }
    }
}

impl fmt::Display for HeegnerPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}+sqrt({}))/{}", -self.b, self.disc, 2 * self.a)
    }
}

pub fn heegner_point(f: &QuadraticForm) -> HeegnerPoint {
    HeegnerPoint { b: f.b, a: f.a, disc: f.discriminant() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_examples() {
        let q = QuadraticForm::new;
        assert_eq!(q(1, 0, 1).reduce(), Ok(q(1, 0, 1)));
        assert_eq!(q(1, 1, 10).reduce(), Ok(q(1, 1, 10)));
        assert_eq!(q(2, 1, 5).reduce(), Ok(q(2, 1, 5)));
        assert_eq!(q(47, 41, 9).reduce(), Ok(q(1, 1, 3)));
        assert_eq!(q(3, -3, 4).reduce(), Ok(q(3, 3, 4)));
        assert_eq!(q(5, 0, 5).reduce(), Ok(q(5, 0, 5)));
        assert!(matches!(q(1, 3, 1).reduce(), Err(FormError::NotPositiveDefinite(_))));
        assert!(matches!(q(-1, 0, -1).reduce(), Err(FormError::NotPositiveDefinite(_))));
    }

    #[test]
    fn class_list_for_minus_39() {
        let q = QuadraticForm::new;
        assert_eq!(reduced_forms(-39), vec![q(1, 1, 10), q(2, -1, 5), q(2, 1, 5), q(3, 3, 4)]);
    }

    #[test]
    fn class_numbers() {
        assert_eq!(class_number(-39), Ok(4));
        assert_eq!(class_number(-11), Ok(1));
        assert_eq!(class_number(-47), Ok(5));
        assert_eq!(class_number(-163), Ok(1));
        assert_eq!(class_number(-3), Ok(1));
        assert_eq!(class_number(-4), Ok(1));
        assert_eq!(class_number(-12), Err(FormError::NotFundamental(-12)));
    }

    #[test]
    fn admissible_examples() {
        assert!(admissible_residues(-11, 47).contains(&41));
        assert!(admissible_residues(-3, 2).is_empty());
        assert!(!admissible_residues(-39, 47).is_empty());
        assert_eq!(admissible_residues(-20, 3), vec![2, 4]);
    }

    #[test]
    fn heegner_examples() {
        let reps = heegner_reps(-11, 47, 41).unwrap();
        assert_eq!(reps, vec![QuadraticForm::new(47, 41, 9)]);

        let beta = admissible_residues(-39, 47)[0] as i64;
        assert_eq!(heegner_reps(-39, 47, beta).unwrap().len(), 4);

        assert_eq!(heegner_reps(-20, 3, 2).unwrap().len(), 2);

        assert!(matches!(
            heegner_reps(-11, 47, 40),
            Err(FormError::InadmissibleResidue { .. })
        ));
        assert!(matches!(heegner_reps(-11, 46, 41), Err(FormError::NotPrime(46))));
    }

    #[test]
    fn heegner_point_examples() {
        let t = heegner_point(&QuadraticForm::new(47, 41, 9));
        assert_eq!(t, HeegnerPoint { b: 41, a: 47, disc: -11 });
        assert_eq!(t.to_string(), "(-41+sqrt(-11))/94");
        assert_eq!(heegner_point(&QuadraticForm::new(1, 0, 1)).to_f64(), (0.0, 1.0));
        let u = heegner_point(&QuadraticForm::new(2, 1, 5));
        assert_eq!(u.to_string(), "(-1+sqrt(-39))/4");
    }

    #[test]
    fn fricke_reduce_raises_imaginary_part() {
        // (94, 3, c): p | a with larger a than needed
        for &(disc, p) in &[(-39i64, 47u64), (-163, 47), (-20, 3), (-440, 3)] {
            let beta = admissible_residues(disc, p)[0] as i64;
            for f in heegner_reps(disc, p, beta).unwrap() {
                let t = heegner_point(&f);
                let r = t.fricke_reduce(p);
                assert!(r.a <= t.a);
                assert_eq!(r.a % p as i64, 0);
                assert_eq!(r.disc, disc);
                assert!(r.b.abs() <= r.a);
                let c = r.form().c;
                assert!(p as i64 * c >= r.a);
            }
        }
    }
}
