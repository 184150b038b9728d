//! Canonical words over the generators `a, b, c, d` and the weighted length.
//!
//! Every element of the group is stored as a word of the form
//! `a^e x1 a x2 a ... xn a^f` with `xi` in `{b, c, d}`. The rewrite rules are
//! the involution relations together with `bc = cb = d`, `bd = db = c` and
//! `cd = dc = b`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum WordError {
    #[error("invalid generator letter {0:?}")]
    BadLetter(char),
    #[error("malformed word expression: {0}")]
    Syntax(String),
}

/// One of the four standard generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Gen {
    A = 0,
    B = 1,
    C = 2,
    D = 3,
}

impl Gen {
    pub const ALL: [Gen; 4] = [Gen::A, Gen::B, Gen::C, Gen::D];

    pub fn from_char(c: char) -> Result<Gen, WordError> {
        match c {
            'a' => Ok(Gen::A),
            'b' => Ok(Gen::B),
            'c' => Ok(Gen::C),
            'd' => Ok(Gen::D),
            other => Err(WordError::BadLetter(other)),
        }
    }

    pub fn to_char(self) -> char {
        (b'a' + self as u8) as char
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Gen {
        Gen::ALL[i]
    }

    /// Product of two distinct letters of `{b, c, d}`.
    fn klein_product(self, other: Gen) -> Gen {
        debug_assert!(self != Gen::A && other != Gen::A && self != other);
        Gen::from_index(6 - self.index() - other.index())
    }
}

/// A canonical (reduced) word representing an element of the group.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenWord(Vec<Gen>);

impl GenWord {
    pub fn identity() -> Self {
        GenWord(Vec::new())
    }

    pub fn gen(g: Gen) -> Self {
        GenWord(vec![g])
    }

    /// Reduce an arbitrary letter sequence to canonical form with a single
    /// pass over a pushback stack.
    pub fn reduce<I: IntoIterator<Item = Gen>>(raw: I) -> Self {
        let mut out: Vec<Gen> = Vec::new();
        for g in raw {
            push_letter(&mut out, g);
        }
        GenWord(out)
    }

    pub fn letters(&self) -> &[Gen] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_canonical(&self) -> bool {
        self.0.windows(2).all(|w| {
            w[0] != w[1] && (w[0] == Gen::A || w[1] == Gen::A)
        })
    }

    pub fn multiply(&self, other: &GenWord) -> GenWord {
        let mut out = self.0.clone();
        out.reserve(other.0.len());
        for &g in &other.0 {
            push_letter(&mut out, g);
        }
        GenWord(out)
    }

    /// All generators are involutions, so the inverse is the reversal.
    pub fn invert(&self) -> GenWord {
        GenWord(self.0.iter().rev().copied().collect())
    }

    /// `self^x = x^-1 self x`.
    pub fn conjugate(&self, x: &GenWord) -> GenWord {
        x.invert().multiply(self).multiply(x)
    }

    /// `[u, v] = u^-1 v^-1 u v`.
    pub fn commutator(u: &GenWord, v: &GenWord) -> GenWord {
        u.invert().multiply(&v.invert()).multiply(u).multiply(v)
    }

    pub fn pow(&self, n: usize) -> GenWord {
        let mut out = GenWord::identity();
        for _ in 0..n {
            out = out.multiply(self);
        }
        out
    }

    /// Parity of the number of `a` letters, i.e. the root activity.
    pub fn activity(&self) -> bool {
        self.0.iter().filter(|&&g| g == Gen::A).count() % 2 == 1
    }

    /// Parse a word expression such as `(acab)^3ab(ac)^2`.
    pub fn parse_expr(s: &str) -> Result<GenWord, WordError> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let w = parse_seq(&chars, &mut pos)?;
        if pos != chars.len() {
            return Err(WordError::Syntax(format!("unexpected {:?} at {}", chars[pos], pos)));
        }
        Ok(w)
    }

    /// Random canonical word of exactly `len` letters.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize) -> GenWord {
        let start_with_a = rng.gen_bool(0.5);
        let out = (0..len)
            .map(|i| {
                if (i % 2 == 0) == start_with_a {
                    Gen::A
                } else {
                    Gen::from_index(rng.gen_range(1..4))
                }
            })
            .collect();
        GenWord(out)
    }

    /// Random raw letter sequence, not reduced.
    pub fn random_raw<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<Gen> {
        (0..len).map(|_| Gen::from_index(rng.gen_range(0..4))).collect()
    }
}

fn push_letter(out: &mut Vec<Gen>, g: Gen) {
    match out.last().copied() {
        Some(top) if top == g => {
            out.pop();
        }
        Some(top) if top != Gen::A && g != Gen::A => {
            out.pop();
            // the letter below `top` is `a` or nothing, so no further rewrite applies
            out.push(top.klein_product(g));
        }
        _ => out.push(g),
    }
}

fn parse_seq(chars: &[char], pos: &mut usize) -> Result<GenWord, WordError> {
    let mut acc = GenWord::identity();
    while *pos < chars.len() {
        let c = chars[*pos];
        let atom = match c {
            '(' => {
                *pos += 1;
                let inner = parse_seq(chars, pos)?;
                if *pos >= chars.len() || chars[*pos] != ')' {
                    return Err(WordError::Syntax("unbalanced parenthesis".into()));
                }
                *pos += 1;
                inner
            }
            ')' => break,
            '*' | '.' => {
                *pos += 1;
                continue;
            }
            _ => {
                *pos += 1;
                GenWord::gen(Gen::from_char(c)?)
            }
        };
        let atom = if *pos < chars.len() && chars[*pos] == '^' {
            *pos += 1;
            let start = *pos;
            while *pos < chars.len() && chars[*pos].is_ascii_digit() {
                *pos += 1;
            }
            let n: usize = chars[start..*pos]
                .iter()
                .collect::<String>()
                .parse()
                .map_err(|_| WordError::Syntax("bad exponent".into()))?;
            atom.pow(n)
        } else {
            atom
        };
        acc = acc.multiply(&atom);
    }
    Ok(acc)
}

impl fmt::Display for GenWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.0 {
            write!(f, "{}", g.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for GenWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{}\"", self)
    }
}

impl FromStr for GenWord {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let letters = s.chars().map(Gen::from_char).collect::<Result<Vec<_>, _>>()?;
        Ok(GenWord::reduce(letters))
    }
}

/// Shortlex order.
impl Ord for GenWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for GenWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `c0 + c1 η + c2 η²` with `η³ = 2 - η - η²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EtaNumber {
    pub coeffs: [Ratio<i64>; 3],
}

/// The real root of `x³ + x² + x - 2`.
pub fn eta_f64() -> f64 {
    static ETA: OnceLock<f64> = OnceLock::new();
    *ETA.get_or_init(|| {
        let mut x = 0.8f64;
        for _ in 0..60 {
            let p = x * x * x + x * x + x - 2.0;
            let dp = 3.0 * x * x + 2.0 * x + 1.0;
            x -= p / dp;
        }
        x
    })
}

impl EtaNumber {
    pub fn zero() -> Self {
        Self::from_ints(0, 0, 0)
    }

    pub fn one() -> Self {
        Self::from_ints(1, 0, 0)
    }

    pub fn eta() -> Self {
        Self::from_ints(0, 1, 0)
    }

    pub fn from_ints(c0: i64, c1: i64, c2: i64) -> Self {
        EtaNumber { coeffs: [Ratio::from_integer(c0), Ratio::from_integer(c1), Ratio::from_integer(c2)] }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn to_f64(&self) -> f64 {
        let e = eta_f64();
        let c = |r: &Ratio<i64>| *r.numer() as f64 / *r.denom() as f64;
        c(&self.coeffs[0]) + c(&self.coeffs[1]) * e + c(&self.coeffs[2]) * e * e
    }

    /// Sign under the real embedding. The minimal polynomial is irreducible,
    /// so a nonzero element never evaluates to zero; close calls are settled
    /// by exact interval bisection around `η`.
    pub fn signum(&self) -> Ordering {
        if self.is_zero() {
            return Ordering::Equal;
        }
        let v = self.to_f64();
        let scale: f64 = self
            .coeffs
            .iter()
            .map(|r| (*r.numer() as f64 / *r.denom() as f64).abs())
            .sum::<f64>()
            + 1.0;
        if v.abs() > 1e-9 * scale {
            return if v > 0.0 { Ordering::Greater } else { Ordering::Less };
        }
        self.exact_signum()
    }

    fn exact_signum(&self) -> Ordering {
        let big = |r: &Ratio<i64>| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
        let c: Vec<BigRational> = self.coeffs.iter().map(big).collect();
        let minpoly = |x: &BigRational| x * x * x + x * x + x - BigRational::from_integer(BigInt::from(2));
        let mut lo = BigRational::new(BigInt::from(4), BigInt::from(5));
        let mut hi = BigRational::new(BigInt::from(41), BigInt::from(50));
        let two = BigRational::from_integer(BigInt::from(2));
        loop {
            // bounds of c0 + c1 t + c2 t² for t in [lo, hi], 0 < lo
            let lin = |k: &BigRational, a: &BigRational, b: &BigRational| {
                let (x, y) = (k * a, k * b);
                if x <= y { (x, y) } else { (y, x) }
            };
            let (l1, h1) = lin(&c[1], &lo, &hi);
            let (l2, h2) = lin(&c[2], &(&lo * &lo), &(&hi * &hi));
            let low = &c[0] + l1 + l2;
            let high = &c[0] + h1 + h2;
            if low.is_positive() {
                return Ordering::Greater;
            }
            if high.is_negative() {
                return Ordering::Less;
            }
            let mid = (&lo + &hi) / &two;
            if minpoly(&mid).is_positive() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
}

impl Add for EtaNumber {
    type Output = EtaNumber;
    fn add(self, o: EtaNumber) -> EtaNumber {
        EtaNumber { coeffs: [self.coeffs[0] + o.coeffs[0], self.coeffs[1] + o.coeffs[1], self.coeffs[2] + o.coeffs[2]] }
    }
}

impl Sub for EtaNumber {
    type Output = EtaNumber;
    fn sub(self, o: EtaNumber) -> EtaNumber {
        self + (-o)
    }
}

impl Neg for EtaNumber {
    type Output = EtaNumber;
    fn neg(self) -> EtaNumber {
        EtaNumber { coeffs: [-self.coeffs[0], -self.coeffs[1], -self.coeffs[2]] }
    }
}

impl Mul for EtaNumber {
    type Output = EtaNumber;
    fn mul(self, o: EtaNumber) -> EtaNumber {
        let a = self.coeffs;
        let b = o.coeffs;
        let mut p = [Ratio::<i64>::zero(); 5];
        for i in 0..3 {
            for j in 0..3 {
                p[i + j] += a[i] * b[j];
            }
        }
        // η⁴ = 2η - η² - η³ and η³ = 2 - η - η²
        let two = Ratio::from_integer(2);
        let e4 = p[4];
        p[1] += two * e4;
        p[2] -= e4;
        p[3] -= e4;
        let e3 = p[3];
        p[0] += two * e3;
        p[1] -= e3;
        p[2] -= e3;
        EtaNumber { coeffs: [p[0], p[1], p[2]] }
    }
}

impl Mul<i64> for EtaNumber {
    type Output = EtaNumber;
    fn mul(self, k: i64) -> EtaNumber {
        let k = Ratio::from_integer(k);
        EtaNumber { coeffs: [self.coeffs[0] * k, self.coeffs[1] * k, self.coeffs[2] * k] }
    }
}

impl PartialOrd for EtaNumber {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some((*self - *other).signum())
    }
}

impl fmt::Display for EtaNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [c0, c1, c2] = self.coeffs;
        let mut parts = Vec::new();
        if !c0.is_zero() {
            parts.push(format!("{}", c0));
        }
        if !c1.is_zero() {
            parts.push(format!("{}*eta", c1));
        }
        if !c2.is_zero() {
            parts.push(format!("{}*eta^2", c2));
        }
        if parts.is_empty() {
            return write!(f, "0");
        }
        write!(f, "{}", parts.join(" + ").replace("+ -", "- "))
    }
}

/// Letter weights for the contracting length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Weighting {
    pub w: [EtaNumber; 4],
}

impl Weighting {
    pub fn standard() -> Self {
        let one = EtaNumber::one();
        let e = EtaNumber::eta();
        let e2 = e * e;
        let e3 = e2 * e;
        Weighting { w: [one - e3, e3, one - e2, one - e] }
    }

    pub fn weight(&self, g: Gen) -> EtaNumber {
        self.w[g.index()]
    }

    pub fn length(&self, word: &GenWord) -> EtaNumber {
        let mut counts = [0i64; 4];
        for g in word.letters() {
            counts[g.index()] += 1;
        }
        (0..4).fold(EtaNumber::zero(), |acc, i| acc + self.w[i] * counts[i])
    }

    pub fn identities_hold(&self) -> bool {
        let [wa, wb, wc, wd] = self.w;
        let e = EtaNumber::eta();
        e * (wb + wa) == wc + wa && e * (wc + wa) == wd + wa && e * (wd + wa) == wb
    }
}

/// Weighted length of a canonical word under the standard weights.
pub fn weighted_length(w: &GenWord) -> EtaNumber {
    Weighting::standard().length(w)
}

pub fn verify_weight_identities() -> bool {
    Weighting::standard().identities_hold()
}

/// `η³ + η² + η - 2` evaluated in exact arithmetic.
pub fn minimal_polynomial_at_eta() -> EtaNumber {
    let e = EtaNumber::eta();
    e * e * e + e * e + e - EtaNumber::from_ints(2, 0, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> GenWord {
        s.parse().unwrap()
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(w("aa"), GenWord::identity());
        assert_eq!(w("bc").to_string(), "d");
        assert_eq!(w("abba"), GenWord::identity());
        assert_eq!(w("bcd"), GenWord::identity());
        assert_eq!(w("dbc").to_string(), "");
    }

    #[test]
    fn multiply_examples() {
        assert_eq!(w("ab").multiply(&w("ba")), GenWord::identity());
        assert_eq!(w("ad").multiply(&w("ad")).to_string(), "adad");
        assert_eq!(w("abc").multiply(&GenWord::identity()), w("abc"));
    }

    #[test]
    fn parse_expression() {
        assert_eq!(GenWord::parse_expr("(ab)^2").unwrap().to_string(), "abab");
        assert_eq!(GenWord::parse_expr("(ad)^4").unwrap().len(), 8);
        assert!(GenWord::parse_expr("(ab").is_err());
        assert!(GenWord::parse_expr("ax").is_err());
    }

    #[test]
    fn weights() {
        assert!(verify_weight_identities());
        assert!(minimal_polynomial_at_eta().is_zero());
        assert_eq!(weighted_length(&w("ab")), EtaNumber::one());
        assert_eq!(weighted_length(&GenWord::identity()), EtaNumber::zero());
        let e = EtaNumber::eta();
        assert_eq!(weighted_length(&w("a")), EtaNumber::one() - e * e * e);
        let mut bad = Weighting::standard();
        bad.w[3] = bad.w[3] + EtaNumber::one();
        assert!(!bad.identities_hold());
    }

    #[test]
    fn eta_embedding() {
        let e = eta_f64();
        assert!((e - 0.8105).abs() < 1e-3);
        assert_eq!(EtaNumber::eta().signum(), Ordering::Greater);
        assert_eq!((EtaNumber::eta() - EtaNumber::one()).signum(), Ordering::Less);
        // tiny but nonzero: rational approximation of η from below
        let close = EtaNumber { coeffs: [Ratio::new(-405268, 500000), Ratio::from_integer(1), Ratio::from_integer(0)] };
        assert_eq!(close.signum(), close.exact_signum());
    }
}
