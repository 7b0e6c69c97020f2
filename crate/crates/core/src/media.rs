//! The three closed-form media and their admissibility conditions.
//!
//! Each family admits breathers only when a particular combination of its
//! parameters is a quotient of two odd integers (or, for the Dirichlet
//! interval, an odd integer over a multiple of four). Exact [`Param`] inputs
//! are classified exactly; floats go through continued-fraction detection.

use std::f64::consts::PI;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::param::Param;

/// Rational detection tolerance, relative to `max(1, |value|)`.
pub const RATIONAL_TOL: f64 = 1e-10;
/// Largest denominator accepted by rational detection.
pub const MAX_DENOMINATOR: i64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MediaError {
    #[error("{quantity} = {value} is not admissible: {reason}")]
    NotAdmissible { quantity: &'static str, value: f64, reason: String },
    #[error("invalid medium parameter: {0}")]
    InvalidParameter(String),
    #[error("symmetry index {r} is not an odd multiple of the base index {base}")]
    BadSymmetry { r: u64, base: u64 },
}

/// A positive quotient of two odd integers in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OddRational {
    p: u64,
    q: u64,
}

impl OddRational {
    pub fn new(p: u64, q: u64) -> Option<Self> {
        if p == 0 || q == 0 {
            return None;
        }
        let g = gcd(p, q);
        let (p, q) = (p / g, q / g);
        (p % 2 == 1 && q % 2 == 1).then_some(OddRational { p, q })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

impl fmt::Display for OddRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Continued-fraction reconstruction of `value` as `p/q`.
///
/// Returns the first convergent within `RATIONAL_TOL·max(1,|value|)` whose
/// denominator does not exceed `MAX_DENOMINATOR`.
pub fn detect_rational(value: f64) -> Option<Ratio<i64>> {
    if !value.is_finite() {
        return None;
    }
    let tol = RATIONAL_TOL * value.abs().max(1.0);
    let sign = if value < 0.0 { -1 } else { 1 };
    let x0 = value.abs();
    let (mut h_prev, mut h) = (1i64, x0.floor() as i64);
    let (mut k_prev, mut k) = (0i64, 1i64);
    let mut frac = x0 - x0.floor();
    loop {
        if (x0 - h as f64 / k as f64).abs() <= tol {
            return Some(Ratio::new(sign * h, k));
        }
        if frac < 1e-300 {
            return None;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        frac = inv - a;
        let a = a as i64;
        let h_next = a.checked_mul(h)?.checked_add(h_prev)?;
        let k_next = a.checked_mul(k)?.checked_add(k_prev)?;
        if k_next > MAX_DENOMINATOR {
            return None;
        }
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
    }
}

fn resolve_rational(value: &Param) -> Option<Ratio<i64>> {
    value.as_rational().or_else(|| detect_rational(value.value()))
}

fn odd_over_odd(quantity: &'static str, value: &Param) -> Result<OddRational, MediaError> {
    let not = |reason: &str| MediaError::NotAdmissible { quantity, value: value.value(), reason: reason.to_string() };
    let r = resolve_rational(value).ok_or_else(|| not("not a rational within tolerance"))?;
    if *r.numer() <= 0 {
        return Err(not("not positive"));
    }
    let (p, q) = (*r.numer() as u64, *r.denom() as u64);
    OddRational::new(p, q).ok_or_else(|| not("numerator or denominator is even"))
}

fn require_positive(name: &str, v: &Param) -> Result<(), MediaError> {
    let x = v.value();
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(MediaError::InvalidParameter(format!("{name} must be positive, got {x}")))
    }
}

/// `√b·ω·c·2/π` must be odd/odd; its denominator is the base symmetry index.
pub fn check_step_admissible(a: &Param, b: &Param, c: &Param, omega: &Param) -> Result<OddRational, MediaError> {
    for (name, v) in [("a", a), ("b", b), ("c", c), ("omega", omega)] {
        require_positive(name, v)?;
    }
    let two_over_pi = Param::int(2).div(&Param::Exact(crate::param::Exact::pi()));
    let value = b.sqrt().mul(omega).mul(c).mul(&two_over_pi);
    odd_over_odd("sqrt(b)*omega*c*2/pi", &value)
}

/// Admissibility data of a periodic step medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicAdmissibility {
    pub l: OddRational,
    pub two_m: OddRational,
    pub r_base: u64,
}

/// `l = √(b/a)(1−Θ)/Θ` and `2m = 4√a·Θ·ω` must both be odd/odd.
pub fn check_periodic_admissible(
    a: &Param,
    b: &Param,
    theta: &Param,
    omega: &Param,
) -> Result<PeriodicAdmissibility, MediaError> {
    for (name, v) in [("a", a), ("b", b), ("omega", omega)] {
        require_positive(name, v)?;
    }
    let th = theta.value();
    if !(th > 0.0 && th < 1.0) {
        return Err(MediaError::InvalidParameter(format!("theta must lie in (0,1), got {th}")));
    }
    let equal = match (a.as_rational(), b.as_rational()) {
        (Some(x), Some(y)) => x == y,
        _ => (a.value() - b.value()).abs() <= 1e-14 * a.value().max(b.value()),
    };
    if equal {
        return Err(MediaError::InvalidParameter("a and b must differ".into()));
    }
    let l = b.div(a).sqrt().mul(&Param::int(1).sub(theta)).div(theta);
    let two_m = Param::int(4).mul(&a.sqrt()).mul(theta).mul(omega);
    let l = odd_over_odd("sqrt(b/a)*(1-theta)/theta", &l)?;
    let two_m = odd_over_odd("4*sqrt(a)*theta*omega", &two_m)?;
    Ok(PeriodicAdmissibility { l, two_m, r_base: l.q() * two_m.q() })
}

/// `ωl/π = p/q4` with `p` odd and `q4` a multiple of four.
pub fn check_dirichlet_admissible(l: &Param, omega: &Param) -> Result<(u64, u64), MediaError> {
    require_positive("l", l)?;
    require_positive("omega", omega)?;
    let value = omega.mul(l).div(&Param::Exact(crate::param::Exact::pi()));
    let not = |reason: &str| MediaError::NotAdmissible {
        quantity: "omega*l/pi",
        value: value.value(),
        reason: reason.to_string(),
    };
    let r = resolve_rational(&value).ok_or_else(|| not("not a rational within tolerance"))?;
    let (p, q) = (*r.numer(), *r.denom());
    if p <= 0 {
        return Err(not("not positive"));
    }
    if q % 4 != 0 || p % 2 == 0 {
        return Err(not("denominator is not a multiple of 4"));
    }
    Ok((p as u64, q as u64))
}

/// `g = b` on `|x| < c`, `g = −a` outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMedium {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub omega: f64,
    pub ratio: OddRational,
}

impl StepMedium {
    pub fn new(a: &Param, b: &Param, c: &Param, omega: &Param) -> Result<Self, MediaError> {
        let ratio = check_step_admissible(a, b, c, omega)?;
        Ok(StepMedium { a: a.value(), b: b.value(), c: c.value(), omega: omega.value(), ratio })
    }
}

/// `2π`-periodic: `g = a` on `|x| < Θπ`, `g = b` on `Θπ < |x| < π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicStepMedium {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub omega: f64,
    pub admissibility: PeriodicAdmissibility,
}

impl PeriodicStepMedium {
    pub fn new(a: &Param, b: &Param, theta: &Param, omega: &Param) -> Result<Self, MediaError> {
        let admissibility = check_periodic_admissible(a, b, theta, omega)?;
        Ok(PeriodicStepMedium { a: a.value(), b: b.value(), theta: theta.value(), omega: omega.value(), admissibility })
    }

    /// `m = 2√a·Θ·ω`
    pub fn m(&self) -> f64 {
        2.0 * self.a.sqrt() * self.theta * self.omega
    }

    /// `l = √(b/a)(1−Θ)/Θ`
    pub fn l(&self) -> f64 {
        (self.b / self.a).sqrt() * (1.0 - self.theta) / self.theta
    }
}

/// `g ≡ 1` on `(−l, l)` with `w(±l, t) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletMedium {
    pub l: f64,
    pub omega: f64,
    pub p: u64,
    pub q4: u64,
}

impl DirichletMedium {
    pub fn new(l: &Param, omega: &Param) -> Result<Self, MediaError> {
        let (p, q4) = check_dirichlet_admissible(l, omega)?;
        Ok(DirichletMedium { l: l.value(), omega: omega.value(), p, q4 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Medium {
    Step(StepMedium),
    Periodic(PeriodicStepMedium),
    Dirichlet(DirichletMedium),
}

impl Medium {
    pub fn omega(&self) -> f64 {
        match self {
            Medium::Step(m) => m.omega,
            Medium::Periodic(m) => m.omega,
            Medium::Dirichlet(m) => m.omega,
        }
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega()
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Medium::Step(_) => "step",
            Medium::Periodic(_) => "periodic",
            Medium::Dirichlet(_) => "dirichlet",
        }
    }

    /// Smallest admissible symmetry index: `q` for the step, `q·q̃` for the
    /// periodic step, `1` for the Dirichlet interval.
    pub fn base_symmetry(&self) -> u64 {
        match self {
            Medium::Step(m) => m.ratio.q(),
            Medium::Periodic(m) => m.admissibility.r_base,
            Medium::Dirichlet(_) => 1,
        }
    }

    /// Accept `r` if it is an odd multiple of the base index.
    pub fn symmetry(&self, r: u64) -> Result<SymmetryIndex, MediaError> {
        let base = self.base_symmetry();
        if r == 0 || !r.is_multiple_of(base) || (r / base).is_multiple_of(2) {
            return Err(MediaError::BadSymmetry { r, base });
        }
        Ok(SymmetryIndex(r))
    }

    /// The coefficient `g(x)`.
    pub fn g(&self, x: f64) -> f64 {
        let x = x.abs();
        match self {
            Medium::Step(m) => {
                if x <= m.c {
                    m.b
                } else {
                    -m.a
                }
            }
            Medium::Periodic(m) => {
                let y = x.rem_euclid(2.0 * PI);
                let edge = m.theta * PI;
                if y < edge || y > 2.0 * PI - edge {
                    m.a
                } else {
                    m.b
                }
            }
            Medium::Dirichlet(_) => 1.0,
        }
    }

    pub fn max_abs_g(&self) -> f64 {
        match self {
            Medium::Step(m) => m.a.max(m.b),
            Medium::Periodic(m) => m.a.max(m.b),
            Medium::Dirichlet(_) => 1.0,
        }
    }

    /// Points of discontinuity of `g` in `(0, x_max)`.
    pub fn interfaces(&self, x_max: f64) -> Vec<f64> {
        match self {
            Medium::Step(m) => {
                if m.c < x_max {
                    vec![m.c]
                } else {
                    vec![]
                }
            }
            Medium::Periodic(m) => {
                let mut out = Vec::new();
                let edge = m.theta * PI;
                let mut cell = 0.0;
                while cell - edge < x_max {
                    for p in [cell - edge, cell + edge] {
                        if p > 0.0 && p < x_max {
                            out.push(p);
                        }
                    }
                    cell += 2.0 * PI;
                }
                out.sort_by(|a, b| a.partial_cmp(b).unwrap());
                out
            }
            Medium::Dirichlet(_) => vec![],
        }
    }

    /// Half-length of a bounded domain.
    pub fn half_length(&self) -> Option<f64> {
        match self {
            Medium::Dirichlet(m) => Some(m.l),
            _ => None,
        }
    }

    /// Uniform decay rate `ρ` of the fundamental solutions.
    pub fn decay_rate(&self) -> Option<f64> {
        match self {
            Medium::Step(m) => Some(0.5 * m.omega * m.a.sqrt()),
            Medium::Periodic(m) => Some((m.b.ln() - m.a.ln()).abs() / (4.0 * PI)),
            Medium::Dirichlet(_) => None,
        }
    }

    /// Right end of the spatial window used for fields and quadrature.
    pub fn x_max(&self) -> f64 {
        match (self.half_length(), self.decay_rate()) {
            (Some(l), _) => l,
            (None, Some(rho)) => 20.0 / rho,
            (None, None) => unreachable!("every unbounded medium has a decay rate"),
        }
    }
}

/// An odd symmetry index `r`; the subspace it selects is supported on `r·ℤ_odd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryIndex(u64);

impl SymmetryIndex {
    pub fn new(r: u64) -> Option<Self> {
        (r % 2 == 1).then_some(SymmetryIndex(r))
    }

    pub fn get(&self) -> u64 {
        self.0
    }

    /// `k ∈ r·ℤ_odd`
    pub fn contains(&self, k: u64) -> bool {
        k.is_multiple_of(self.0) && (k / self.0) % 2 == 1
    }

    /// Positive lattice members `≤ n`, increasing.
    pub fn lattice_up_to(&self, n: u64) -> Vec<u64> {
        (0..).map(|h| self.0 * (2 * h + 1)).take_while(|&k| k <= n).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi_over(n: i64) -> Param {
        format!("pi/{n}").parse().unwrap()
    }

    #[test]
    fn step_examples() {
        let one = Param::int(1);
        assert_eq!(check_step_admissible(&one, &one, &pi_over(2), &one).unwrap(), OddRational::new(1, 1).unwrap());
        let r = check_step_admissible(&Param::int(4), &Param::int(9), &pi_over(2), &one).unwrap();
        assert_eq!((r.p(), r.q()), (3, 1));
        assert!(matches!(
            check_step_admissible(&one, &Param::int(4), &pi_over(2), &one),
            Err(MediaError::NotAdmissible { .. })
        ));
    }

    #[test]
    fn step_detection_from_floats() {
        let r = check_step_admissible(&1.0.into(), &1.0.into(), &(PI / 2.0).into(), &(1.0 / 3.0).into()).unwrap();
        assert_eq!((r.p(), r.q()), (1, 3));
        assert!(check_step_admissible(&1.0.into(), &1.0.into(), &(PI / 2.0).into(), &(0.5f64.sqrt()).into()).is_err());
        assert!(matches!(
            check_step_admissible(&(-1.0).into(), &1.0.into(), &1.0.into(), &1.0.into()),
            Err(MediaError::InvalidParameter(_))
        ));
    }

    #[test]
    fn periodic_examples() {
        let adm = check_periodic_admissible(&Param::int(1), &Param::int(9), &Param::ratio(1, 2), &Param::ratio(1, 2))
            .unwrap();
        assert_eq!((adm.l.p(), adm.l.q()), (3, 1));
        assert_eq!((adm.two_m.p(), adm.two_m.q()), (1, 1));
        assert_eq!(adm.r_base, 1);

        let err = check_periodic_admissible(&Param::int(9), &Param::int(1), &Param::ratio(3, 4), &Param::ratio(1, 6));
        assert!(matches!(err, Err(MediaError::NotAdmissible { quantity: "4*sqrt(a)*theta*omega", .. })));

        let err = check_periodic_admissible(&Param::int(1), &Param::int(1), &Param::ratio(1, 2), &Param::ratio(1, 2));
        assert!(matches!(err, Err(MediaError::InvalidParameter(_))));
    }

    #[test]
    fn periodic_base_index_is_product_of_denominators() {
        // l = 3·(1/3)/(... ) : a=1, b=9, Θ=3/4 gives l = 3·(1/4)/(3/4) = 1; ω=1/9 gives 2m = 4·(3/4)/9 = 1/3
        let adm = check_periodic_admissible(&Param::int(1), &Param::int(9), &Param::ratio(3, 4), &Param::ratio(1, 9))
            .unwrap();
        assert_eq!(adm.l, OddRational::new(1, 1).unwrap());
        assert_eq!(adm.two_m, OddRational::new(1, 3).unwrap());
        assert_eq!(adm.r_base, 3);
        assert_eq!(adm.r_base % 2, 1);
    }

    #[test]
    fn dirichlet_examples() {
        let one = Param::int(1);
        assert_eq!(check_dirichlet_admissible(&pi_over(4), &one).unwrap(), (1, 4));
        let l: Param = "3*pi/8".parse().unwrap();
        assert_eq!(check_dirichlet_admissible(&l, &one).unwrap(), (3, 8));
        assert!(check_dirichlet_admissible(&pi_over(2), &one).is_err());
    }

    #[test]
    fn symmetry_index_validation() {
        let one = Param::int(1);
        let m = Medium::Step(StepMedium::new(&one, &one, &pi_over(2), &Param::ratio(1, 3)).unwrap());
        assert_eq!(m.base_symmetry(), 3);
        assert!(m.symmetry(9).is_ok());
        assert!(m.symmetry(6).is_err());
        assert!(m.symmetry(1).is_err());
        let r = SymmetryIndex::new(3).unwrap();
        assert_eq!(r.lattice_up_to(20), vec![3, 9, 15]);
        assert!(r.contains(9) && !r.contains(6) && !r.contains(12));
    }

    #[test]
    fn cosine_vanishes_on_lattice() {
        let one = Param::int(1);
        let omega = Param::ratio(1, 3);
        let m = StepMedium::new(&one, &Param::int(9), &pi_over(2), &omega).unwrap();
        // √9·(1/3)·(π/2)·(2/π) = 1 → q = 1
        let q = m.ratio.q();
        let mut k = q;
        while k <= 1000 {
            let arg = k as f64 * m.omega * m.b.sqrt() * m.c;
            assert!(arg.cos().abs() < 1e-12, "k = {k}");
            k += 2 * q;
        }
    }

    #[test]
    fn coefficient_profiles() {
        let one = Param::int(1);
        let step = Medium::Step(StepMedium::new(&Param::int(2), &one, &pi_over(2), &one).unwrap());
        assert_eq!(step.g(0.3), 1.0);
        assert_eq!(step.g(-3.0), -2.0);
        let per = Medium::Periodic(
            PeriodicStepMedium::new(&one, &Param::int(9), &Param::ratio(1, 2), &Param::ratio(1, 2)).unwrap(),
        );
        assert_eq!(per.g(0.1), 1.0);
        assert_eq!(per.g(PI * 0.75), 9.0);
        assert_eq!(per.g(2.0 * PI + 0.1), 1.0);
        let ifs = per.interfaces(10.0);
        assert_eq!(ifs.len(), 3);
        assert!((ifs[0] - PI / 2.0).abs() < 1e-15 && (ifs[1] - 1.5 * PI).abs() < 1e-15);
    }
}
