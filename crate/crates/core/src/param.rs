//! Medium parameters that may be exact.
//!
//! A [`Param`] is either a plain float or an exact value of the form
//! `(p/q)·√s·π^e` with `s` squarefree. Exact values flow through the
//! admissibility checks without any rational detection, so the canonical
//! configurations (`c = pi/2`, `theta = 1/2`, ...) are classified exactly.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("cannot parse parameter expression `{0}`")]
    Syntax(String),
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
}

/// Exact value `coef · √radicand · π^pi_pow`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exact {
    coef: Ratio<i64>,
    radicand: u64,
    pi_pow: i32,
}

impl Exact {
    pub fn rational(num: i64, den: i64) -> Self {
        Exact { coef: Ratio::new(num, den), radicand: 1, pi_pow: 0 }
    }

    pub fn pi() -> Self {
        Exact { coef: Ratio::from_integer(1), radicand: 1, pi_pow: 1 }
    }

    /// `√n` for a nonnegative integer `n`, squarefree-normalised.
    pub fn sqrt_int(n: u64) -> Option<Self> {
        let (outer, inner) = split_square(n)?;
        Some(Exact { coef: Ratio::from_integer(i64::try_from(outer).ok()?), radicand: inner, pi_pow: 0 })
    }

    pub fn coef(&self) -> Ratio<i64> {
        self.coef
    }

    pub fn radicand(&self) -> u64 {
        self.radicand
    }

    pub fn pi_pow(&self) -> i32 {
        self.pi_pow
    }

    pub fn to_f64(&self) -> f64 {
        let c = *self.coef.numer() as f64 / *self.coef.denom() as f64;
        c * (self.radicand as f64).sqrt() * std::f64::consts::PI.powi(self.pi_pow)
    }

    /// The value as a rational, when it is one.
    pub fn as_rational(&self) -> Option<Ratio<i64>> {
        (self.radicand == 1 && self.pi_pow == 0).then_some(self.coef)
    }

    fn checked_mul(&self, other: &Exact) -> Option<Exact> {
        let rad = self.radicand.checked_mul(other.radicand)?;
        let (outer, inner) = split_square(rad)?;
        let coef = self.coef.checked_mul(&other.coef)?.checked_mul(&Ratio::from_integer(i64::try_from(outer).ok()?))?;
        Some(Exact { coef, radicand: inner, pi_pow: self.pi_pow + other.pi_pow })
    }

    fn checked_recip(&self) -> Option<Exact> {
        if *self.coef.numer() == 0 {
            return None;
        }
        // 1/(c√s) = √s/(c s)
        let denom = self.coef.checked_mul(&Ratio::from_integer(i64::try_from(self.radicand).ok()?))?;
        Some(Exact { coef: denom.recip(), radicand: self.radicand, pi_pow: -self.pi_pow })
    }

    fn checked_sqrt(&self) -> Option<Exact> {
        if self.radicand != 1 || self.pi_pow % 2 != 0 || *self.coef.numer() < 0 {
            return None;
        }
        // √(n/d) = √(n d)/d
        let n = u64::try_from(*self.coef.numer()).ok()?;
        let d = u64::try_from(*self.coef.denom()).ok()?;
        let (outer, inner) = split_square(n.checked_mul(d)?)?;
        Some(Exact {
            coef: Ratio::new(i64::try_from(outer).ok()?, i64::try_from(d).ok()?),
            radicand: inner,
            pi_pow: self.pi_pow / 2,
        })
    }

    fn checked_add(&self, other: &Exact) -> Option<Exact> {
        if *self.coef.numer() == 0 {
            return Some(*other);
        }
        if *other.coef.numer() == 0 {
            return Some(*self);
        }
        if self.radicand != other.radicand || self.pi_pow != other.pi_pow {
            return None;
        }
        Some(Exact { coef: self.coef.checked_add(&other.coef)?, ..*self })
    }
}

/// `n = outer² · inner` with `inner` squarefree.
fn split_square(mut n: u64) -> Option<(u64, u64)> {
    if n == 0 {
        return Some((0, 1));
    }
    let mut outer = 1u64;
    let mut inner = 1u64;
    let mut p = 2u64;
    while p.checked_mul(p)? <= n {
        let mut count = 0;
        while n.is_multiple_of(p) {
            n /= p;
            count += 1;
        }
        outer = outer.checked_mul(p.checked_pow(count / 2)?)?;
        if count % 2 == 1 {
            inner = inner.checked_mul(p)?;
        }
        p += 1;
    }
    inner = inner.checked_mul(n)?;
    Some((outer, inner))
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coef)?;
        if self.radicand != 1 {
            write!(f, "*sqrt({})", self.radicand)?;
        }
        match self.pi_pow {
            0 => Ok(()),
            1 => write!(f, "*pi"),
            -1 => write!(f, "/pi"),
            e => write!(f, "*pi^{e}"),
        }
    }
}

impl FromStr for Exact {
    type Err = ParamError;

    /// Products and quotients of integers, decimals, `pi`/`π` and
    /// `sqrt(n)`/`√n`, e.g. `3*pi/8`, `1/2`, `3/4√2`, `sqrt(2)/2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = || ParamError::Syntax(s.to_string());
        let text: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if text.is_empty() {
            return Err(syntax());
        }
        let chars: Vec<char> = text.chars().collect();
        let mut pos = 0;
        let mut acc = Exact::rational(1, 1);
        let mut divide = false;
        let mut first = true;
        let mut negate = false;
        if chars[0] == '-' {
            negate = true;
            pos = 1;
        }
        while pos < chars.len() {
            if !first {
                match chars[pos] {
                    '*' => {
                        divide = false;
                        pos += 1;
                    }
                    '/' => {
                        divide = true;
                        pos += 1;
                    }
                    // implicit product, as in `3/4√2`: the radical binds to the numerator
                    '√' => divide = false,
                    _ => return Err(syntax()),
                }
            }
            first = false;
            let (factor, next) = parse_factor(&chars, pos).ok_or_else(syntax)?;
            pos = next;
            acc = if divide {
                let inv = factor.checked_recip().ok_or_else(|| ParamError::DivisionByZero(s.to_string()))?;
                acc.checked_mul(&inv).ok_or_else(syntax)?
            } else {
                acc.checked_mul(&factor).ok_or_else(syntax)?
            };
        }
        if negate {
            acc.coef = -acc.coef;
        }
        Ok(acc)
    }
}

fn parse_factor(chars: &[char], pos: usize) -> Option<(Exact, usize)> {
    let rest: String = chars[pos..].iter().collect();
    if rest.starts_with("pi") {
        return Some((Exact::pi(), pos + 2));
    }
    if rest.starts_with('π') {
        return Some((Exact::pi(), pos + 1));
    }
    if let Some(stripped) = rest.strip_prefix("sqrt(") {
        let close = stripped.find(')')?;
        let n: u64 = stripped[..close].parse().ok()?;
        return Some((Exact::sqrt_int(n)?, pos + 5 + stripped[..close].chars().count() + 1));
    }
    if rest.starts_with('√') {
        let digits: String = chars[pos + 1..].iter().take_while(|c| c.is_ascii_digit()).collect();
        let n: u64 = digits.parse().ok()?;
        return Some((Exact::sqrt_int(n)?, pos + 1 + digits.len()));
    }
    let literal: String = chars[pos..].iter().take_while(|c| c.is_ascii_digit() || **c == '.').collect();
    if literal.is_empty() {
        return None;
    }
    let next = pos + literal.len();
    let value = match literal.split_once('.') {
        None => Ratio::from_integer(literal.parse::<i64>().ok()?),
        Some((int, frac)) => {
            let scale = 10i64.checked_pow(frac.len() as u32)?;
            let int: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
            let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
            Ratio::new(int.checked_mul(scale)?.checked_add(frac)?, scale)
        }
    };
    Some((Exact { coef: value, radicand: 1, pi_pow: 0 }, next))
}

/// A medium parameter: exact when given symbolically, float otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    Exact(Exact),
    Float(f64),
}

impl Param {
    pub fn value(&self) -> f64 {
        match self {
            Param::Exact(e) => e.to_f64(),
            Param::Float(x) => *x,
        }
    }

    pub fn int(n: i64) -> Self {
        Param::Exact(Exact::rational(n, 1))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Param::Exact(Exact::rational(n, d))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Param::Exact(_))
    }

    pub fn mul(&self, other: &Param) -> Param {
        match (self, other) {
            (Param::Exact(a), Param::Exact(b)) => {
                a.checked_mul(b).map_or(Param::Float(self.value() * other.value()), Param::Exact)
            }
            _ => Param::Float(self.value() * other.value()),
        }
    }

    pub fn div(&self, other: &Param) -> Param {
        match (self, other) {
            (Param::Exact(a), Param::Exact(b)) => b
                .checked_recip()
                .and_then(|inv| a.checked_mul(&inv))
                .map_or(Param::Float(self.value() / other.value()), Param::Exact),
            _ => Param::Float(self.value() / other.value()),
        }
    }

    pub fn sub(&self, other: &Param) -> Param {
        match (self, other) {
            (Param::Exact(a), Param::Exact(b)) => {
                let neg = Exact { coef: -b.coef, ..*b };
                a.checked_add(&neg).map_or(Param::Float(self.value() - other.value()), Param::Exact)
            }
            _ => Param::Float(self.value() - other.value()),
        }
    }

    pub fn sqrt(&self) -> Param {
        match self {
            Param::Exact(a) => a.checked_sqrt().map_or(Param::Float(self.value().sqrt()), Param::Exact),
            Param::Float(x) => Param::Float(x.sqrt()),
        }
    }

    /// The exact rational value, if this is an exact rational.
    pub fn as_rational(&self) -> Option<Ratio<i64>> {
        match self {
            Param::Exact(e) => e.as_rational(),
            Param::Float(_) => None,
        }
    }
}

impl From<f64> for Param {
    fn from(x: f64) -> Self {
        Param::Float(x)
    }
}

impl FromStr for Param {
    type Err = ParamError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<Exact>().map(Param::Exact)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Exact(e) => write!(f, "{e}"),
            Param::Float(x) => write!(f, "{x}"),
        }
    }
}

/// Config-file form of a parameter: a TOML number or an expression string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Int(i64),
    Number(f64),
    Expr(String),
}

impl ParamSpec {
    pub fn resolve(&self) -> Result<Param, ParamError> {
        match self {
            ParamSpec::Int(n) => Ok(Param::int(*n)),
            ParamSpec::Number(x) => Ok(Param::Float(*x)),
            ParamSpec::Expr(s) => s.parse(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn parses_common_forms() {
        let e: Exact = "3*pi/8".parse().unwrap();
        assert_eq!(e.coef(), Ratio::new(3, 8));
        assert_eq!(e.pi_pow(), 1);
        assert!((e.to_f64() - 3.0 * PI / 8.0).abs() < 1e-15);

        let e: Exact = "3/4√8".parse().unwrap();
        assert_eq!(e.coef(), Ratio::new(3, 2));
        assert_eq!(e.radicand(), 2);

        let e: Exact = "sqrt(2)/2".parse().unwrap();
        assert_eq!(e.coef(), Ratio::new(1, 2));
        assert_eq!(e.radicand(), 2);

        let e: Exact = "0.25".parse().unwrap();
        assert_eq!(e.as_rational(), Some(Ratio::new(1, 4)));

        let e: Exact = "-1".parse().unwrap();
        assert_eq!(e.as_rational(), Some(Ratio::from_integer(-1)));
    }

    #[test]
    fn rejects_garbage() {
        assert!("pie".parse::<Exact>().is_err());
        assert!("".parse::<Exact>().is_err());
        assert!(matches!("1/0".parse::<Exact>(), Err(ParamError::DivisionByZero(_))));
    }

    #[test]
    fn exact_arithmetic_cancels_pi_and_roots() {
        let c: Param = "pi/2".parse().unwrap();
        let b = Param::int(9);
        let two_over_pi = Param::int(2).div(&"pi".parse().unwrap());
        let v = b.sqrt().mul(&c).mul(&two_over_pi);
        assert_eq!(v.as_rational(), Some(Ratio::from_integer(3)));

        let r = Param::ratio(9, 4).sqrt();
        assert_eq!(r.as_rational(), Some(Ratio::new(3, 2)));
        let r2 = Param::int(2).sqrt().mul(&Param::int(8).sqrt());
        assert_eq!(r2.as_rational(), Some(Ratio::from_integer(4)));
        assert_eq!(Param::int(1).sub(&Param::ratio(1, 4)).as_rational(), Some(Ratio::new(3, 4)));
    }

    #[test]
    fn mixing_with_float_degrades_gracefully() {
        let v = Param::Float(0.5).mul(&Param::int(2));
        assert_eq!(v, Param::Float(1.0));
        let irrational = Param::int(2).sqrt().sqrt();
        assert!(!irrational.is_exact());
        assert!((irrational.value() - 2f64.powf(0.25)).abs() < 1e-15);
    }
}
