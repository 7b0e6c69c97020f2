//! Decaying fundamental solutions `Φ_k` of `−φ'' − k²ω²g(x)φ = 0` on `(0, ∞)`.
//!
//! All three media have closed forms. For the periodic step the solution is
//! the decaying Bloch mode, obtained from the monodromy matrix over one
//! period and extended cell by cell with integer powers of the Floquet
//! multiplier. Profiles are stored as small piecewise descriptors and
//! evaluated on demand.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::Serialize;
use thiserror::Error;

use crate::media::{DirichletMedium, Medium, PeriodicStepMedium, StepMedium};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FloquetError {
    #[error("harmonic k = {k} is not in {base}·ℤ_odd")]
    BadIndex { k: u64, base: u64 },
    #[error("no spectral gap for k = {k}: |tr A_k| = {trace_abs} ≤ 2")]
    NoSpectralGap { k: u64, trace_abs: f64 },
    #[error("decay bound violated for k = {k} at x = {x}: |Φ_k(x)|e^(ρx) = {value} > M = {bound}")]
    DecayViolation { k: u64, x: f64, value: f64, bound: f64 },
    #[error("uniform exponential decay does not apply to a bounded interval")]
    NotApplicable,
}

/// Real 2×2 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        Mat2([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.0[0][0] * v[0] + self.0[0][1] * v[1], self.0[1][0] * v[0] + self.0[1][1] * v[1]]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }
}

/// Transfer of `(φ, φ')` across an interval of length `s` where `g ≡ cconst > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationMatrix {
    pub matrix: Mat2,
    pub s: f64,
    pub cconst: f64,
}

pub fn propagation(s: f64, cconst: f64, k: u64, omega: f64) -> PropagationMatrix {
    let kappa = k as f64 * omega * cconst.sqrt();
    let (sin, cos) = (kappa * s).sin_cos();
    PropagationMatrix { matrix: Mat2([[cos, sin / kappa], [-kappa * sin, cos]]), s, cconst }
}

/// Transfer matrix over one full period `[0, 2π)` of the shifted periodic coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonodromyMatrix {
    pub k: u64,
    pub matrix: Mat2,
}

impl MonodromyMatrix {
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn det(&self) -> f64 {
        self.matrix.det()
    }
}

/// `A_k = T_k(2π(1−Θ), b) · T_k(2Θπ, a)`
pub fn monodromy(medium: &PeriodicStepMedium, k: u64) -> MonodromyMatrix {
    let inner = propagation(2.0 * medium.theta * PI, medium.a, k, medium.omega);
    let outer = propagation(2.0 * PI * (1.0 - medium.theta), medium.b, k, medium.omega);
    MonodromyMatrix { k, matrix: outer.matrix.mul(&inner.matrix) }
}

/// `tr A_k = 2cos(kmlπ)cos(kmπ) − (√(a/b)+√(b/a)) sin(kmlπ) sin(kmπ)`
pub fn trace_closed_form(medium: &PeriodicStepMedium, k: u64) -> f64 {
    let kf = k as f64;
    let (m, l) = (medium.m(), medium.l());
    let x = kf * m * l * PI;
    let y = kf * m * PI;
    let ratio = (medium.a / medium.b).sqrt();
    2.0 * x.cos() * y.cos() - (ratio + 1.0 / ratio) * x.sin() * y.sin()
}

/// Floquet multipliers `(ρ_small, ρ_large)` with `|ρ_small| < 1 < |ρ_large|`.
pub fn floquet_multipliers(monodromy: &MonodromyMatrix) -> Result<(f64, f64), FloquetError> {
    let tr = monodromy.trace();
    if tr.abs() <= 2.0 {
        return Err(FloquetError::NoSpectralGap { k: monodromy.k, trace_abs: tr.abs() });
    }
    let large = 0.5 * (tr + tr.signum() * (tr * tr - 4.0).sqrt());
    Ok((1.0 / large, large))
}

/// Exact uniform constants of the decay condition `|Φ_k(x)| ≤ M e^{−ρx}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayBound {
    pub m: f64,
    pub rho: f64,
    /// Largest sampled `|Φ_k(x)| e^{ρx}` over all profiles.
    pub observed_sup: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Step { kin: f64, kout: f64, amp_sin: f64, c: f64, outer: f64 },
    Periodic { ka: f64, kb: f64, shift: f64, edge: f64, start: [f64; 2], at_edge: [f64; 2], rho: f64, norm: f64 },
    Dirichlet { kappa: f64, l: f64, sin_kl: f64 },
}

/// The decaying fundamental solution for one odd harmonic, normalised by `Φ_k(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeProfile {
    pub k: u64,
    pub slope0: f64,
    /// Floquet multiplier per period (periodic media only).
    pub floquet_mult: Option<f64>,
    /// Exponential rate per unit length (absent on a bounded interval).
    pub decay_rate: Option<f64>,
    shape: Shape,
}

fn sin_quarter_turns(n: u64) -> f64 {
    // sin(nπ/2) for odd n
    if n % 4 == 1 {
        1.0
    } else {
        -1.0
    }
}

fn on_lattice(k: u64, base: u64) -> bool {
    k > 0 && k.is_multiple_of(base) && (k / base) % 2 == 1
}

pub fn step_mode(medium: &StepMedium, k: u64) -> Result<ModeProfile, FloquetError> {
    let q = medium.ratio.q();
    if !on_lattice(k, q) {
        return Err(FloquetError::BadIndex { k, base: q });
    }
    let kf = k as f64;
    let kin = kf * medium.omega * medium.b.sqrt();
    let kout = kf * medium.omega * medium.a.sqrt();
    let amp_sin = (medium.b / medium.a).sqrt();
    // k√b ωc = (k p / q)·π/2 with k p / q odd
    let n = (k / q) * medium.ratio.p();
    let outer = amp_sin * sin_quarter_turns(n);
    Ok(ModeProfile {
        k,
        slope0: medium.b * kf * medium.omega / medium.a.sqrt(),
        floquet_mult: None,
        decay_rate: Some(0.5 * kout),
        shape: Shape::Step { kin, kout, amp_sin, c: medium.c, outer },
    })
}

pub fn periodic_mode(medium: &PeriodicStepMedium, k: u64) -> Result<ModeProfile, FloquetError> {
    let adm = &medium.admissibility;
    if !on_lattice(k, adm.r_base) {
        return Err(FloquetError::BadIndex { k, base: adm.r_base });
    }
    let kf = k as f64;
    let ka = kf * medium.omega * medium.a.sqrt();
    let kb = kf * medium.omega * medium.b.sqrt();
    // kmπ = n1·π/2 and kmlπ = n2·π/2 with n1, n2 odd
    let n1 = (k / adm.two_m.q()) * adm.two_m.p();
    let n2 = (k / adm.r_base) * adm.two_m.p() * adm.l.p();
    let (s_m, s_ml) = (sin_quarter_turns(n1), sin_quarter_turns(n2));
    // kω√aΘπ = n1·π/4
    let cos_q = if matches!(n1 % 8, 1 | 7) { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let sin_q = if matches!(n1 % 8, 1 | 3) { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let decaying_is_first = medium.a < medium.b;
    let (start, at_edge, rho, norm, slope0) = if decaying_is_first {
        // A_k = diag(−√(a/b) s s, −√(b/a) s s): the even solution decays
        let rho = -(medium.a / medium.b).sqrt() * s_ml * s_m;
        ([1.0, 0.0], [0.0, -ka * s_m], rho, cos_q, -ka * sin_q / cos_q)
    } else {
        let rho = -(medium.b / medium.a).sqrt() * s_ml * s_m;
        ([0.0, 1.0], [s_m / ka, 0.0], rho, sin_q / ka, ka * cos_q / sin_q)
    };
    Ok(ModeProfile {
        k,
        slope0,
        floquet_mult: Some(rho),
        decay_rate: Some((medium.b.ln() - medium.a.ln()).abs() / (4.0 * PI)),
        shape: Shape::Periodic {
            ka,
            kb,
            shift: medium.theta * PI,
            edge: 2.0 * medium.theta * PI,
            start,
            at_edge,
            rho,
            norm,
        },
    })
}

pub fn dirichlet_mode(medium: &DirichletMedium, k: u64) -> Result<ModeProfile, FloquetError> {
    if k.is_multiple_of(2) || k == 0 {
        return Err(FloquetError::BadIndex { k, base: 1 });
    }
    let kappa = medium.omega * k as f64;
    let (sin_kl, cos_kl) = (kappa * medium.l).sin_cos();
    Ok(ModeProfile {
        k,
        slope0: -kappa * cos_kl / sin_kl,
        floquet_mult: None,
        decay_rate: None,
        shape: Shape::Dirichlet { kappa, l: medium.l, sin_kl },
    })
}

/// Dispatch on the medium kind.
pub fn mode(medium: &Medium, k: u64) -> Result<ModeProfile, FloquetError> {
    match medium {
        Medium::Step(m) => step_mode(m, k),
        Medium::Periodic(m) => periodic_mode(m, k),
        Medium::Dirichlet(m) => dirichlet_mode(m, k),
    }
}

/// Profiles for every positive `k ≤ n` in `r·ℤ_odd`.
pub fn profile_table(medium: &Medium, r: u64, n: u64) -> Result<Vec<ModeProfile>, FloquetError> {
    (0..).map(|h| r * (2 * h + 1)).take_while(|&k| k <= n).map(|k| mode(medium, k)).collect()
}

impl ModeProfile {
    /// `(Φ_k(x), Φ_k'(x))` for `x ≥ 0`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match &self.shape {
            Shape::Step { kin, kout, amp_sin, c, outer } => {
                if x <= *c {
                    let (s, co) = (kin * x).sin_cos();
                    (amp_sin * s + co, kin * (amp_sin * co - s))
                } else {
                    let e = outer * (-kout * (x - c)).exp();
                    (e, -kout * e)
                }
            }
            Shape::Periodic { ka, kb, shift, edge, start, at_edge, rho, norm } => {
                let xs = x + shift;
                let period = 2.0 * PI;
                let cell = (xs / period).floor();
                let local = xs - cell * period;
                let state =
                    if local <= *edge { transfer(*ka, local, *start) } else { transfer(*kb, local - edge, *at_edge) };
                let scale = rho.powi(cell as i32) / norm;
                (state[0] * scale, state[1] * scale)
            }
            Shape::Dirichlet { kappa, l, sin_kl } => {
                if x > *l {
                    return (0.0, 0.0);
                }
                let (s, c) = (kappa * (l - x)).sin_cos();
                (s / sin_kl, -kappa * c / sin_kl)
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    /// Local wavenumber bound, used to size quadrature panels.
    pub fn max_wavenumber(&self) -> f64 {
        match &self.shape {
            Shape::Step { kin, kout, .. } => kin.max(*kout),
            Shape::Periodic { ka, kb, .. } => ka.max(*kb),
            Shape::Dirichlet { kappa, .. } => *kappa,
        }
    }
}

fn transfer(kappa: f64, s: f64, state: [f64; 2]) -> [f64; 2] {
    let (sin, cos) = (kappa * s).sin_cos();
    [cos * state[0] + sin / kappa * state[1], -kappa * sin * state[0] + cos * state[1]]
}

/// `(A + B, ω√a/2)` with `A = √(b/a)`, `B = 1`: the constants of the interior
/// bound `|Φ_k| ≤ A + B` on `[0, c]`, taken as global.
pub fn step_c2_interior(medium: &StepMedium) -> (f64, f64) {
    ((medium.b / medium.a).sqrt() + 1.0, 0.5 * medium.omega * medium.a.sqrt())
}

/// Uniform constants `(M, ρ)` with `|Φ_k(x)| ≤ M e^{−ρx}` for every admissible `k`.
///
/// Step: `ρ = ω√a/2` and `M = (A + B)e^{ρc}`. On `[0, c]` the weight `e^{ρx}`
/// is at most `e^{ρc}`; beyond `c` the profile decays at rate `kω√a ≥ 2ρ`, so
/// the weighted profile is largest at `x = c`.
/// Periodic step: `M = √2(1 + √(min(a,b)/max(a,b)))`, `ρ = |ln b − ln a|/(4π)`.
pub fn c2_constants(medium: &Medium) -> Option<(f64, f64)> {
    match medium {
        Medium::Step(s) => {
            let (m, rho) = step_c2_interior(s);
            Some((m * (rho * s.c).exp(), rho))
        }
        Medium::Periodic(p) => {
            let ratio = (p.a.min(p.b) / p.a.max(p.b)).sqrt();
            Some((2f64.sqrt() * (1.0 + ratio), (p.b.ln() - p.a.ln()).abs() / (4.0 * PI)))
        }
        Medium::Dirichlet(_) => None,
    }
}

/// Check the uniform decay condition with [`c2_constants`] on `[0, 20/ρ]`.
pub fn verify_c2(medium: &Medium, profiles: &[ModeProfile]) -> Result<DecayBound, FloquetError> {
    let (m, rho) = c2_constants(medium).ok_or(FloquetError::NotApplicable)?;
    check_decay_bound(medium, profiles, m, rho)
}

/// Sample `|Φ_k(x)| e^{ρx} ≤ M(1 + 1e−8)` for all profiles.
pub fn check_decay_bound(
    medium: &Medium,
    profiles: &[ModeProfile],
    m: f64,
    rho: f64,
) -> Result<DecayBound, FloquetError> {
    let x_end = 20.0 / rho;
    let mut observed_sup: f64 = 0.0;
    for profile in profiles {
        let h = (0.05 / profile.max_wavenumber()).min(0.01);
        let steps = (x_end / h).ceil() as usize;
        let samples = (0..=steps).map(|i| i as f64 * h).chain(medium.interfaces(x_end));
        for x in samples {
            let value = profile.value(x).abs() * (rho * x).exp();
            observed_sup = observed_sup.max(value);
            if value > m * (1.0 + 1e-8) {
                return Err(FloquetError::DecayViolation { k: profile.k, x, value, bound: m });
            }
        }
    }
    Ok(DecayBound { m, rho, observed_sup })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::Param;

    fn canonical_step() -> StepMedium {
        let one = Param::int(1);
        StepMedium::new(&one, &one, &"pi/2".parse().unwrap(), &one).unwrap()
    }

    fn canonical_periodic() -> PeriodicStepMedium {
        PeriodicStepMedium::new(&Param::int(1), &Param::int(9), &Param::ratio(1, 2), &Param::ratio(1, 2)).unwrap()
    }

    #[test]
    fn propagation_examples() {
        let t = propagation(0.0, 2.0, 3, 1.5);
        assert_eq!(t.matrix, Mat2::identity());
        let t = propagation(PI, 1.0, 1, 1.0);
        assert!((t.matrix.0[0][0] + 1.0).abs() < 1e-15);
        assert!((t.matrix.0[1][1] + 1.0).abs() < 1e-15);
        assert!(t.matrix.0[0][1].abs() < 1e-15 && t.matrix.0[1][0].abs() < 1e-15);
        for (s, c, k) in [(0.3, 2.0, 5), (7.1, 0.25, 11), (100.0, 9.0, 99)] {
            assert!((propagation(s, c, k, 0.7).matrix.det() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn multipliers_from_trace() {
        let mk = |tr: f64| MonodromyMatrix { k: 1, matrix: Mat2([[tr, 1.0], [-1.0, 0.0]]) };
        let (s, l) = floquet_multipliers(&mk(10.0 / 3.0)).unwrap();
        assert!((s - 1.0 / 3.0).abs() < 1e-15 && (l - 3.0).abs() < 1e-15);
        let (s, _) = floquet_multipliers(&mk(-10.0 / 3.0)).unwrap();
        assert!((s + 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(floquet_multipliers(&mk(2.0)), Err(FloquetError::NoSpectralGap { .. })));
    }

    #[test]
    fn canonical_monodromy() {
        let m = canonical_periodic();
        let a1 = monodromy(&m, 1);
        assert!((a1.trace() - 10.0 / 3.0).abs() < 1e-12);
        assert!((trace_closed_form(&m, 1) - 10.0 / 3.0).abs() < 1e-12);
        assert!((monodromy(&m, 3).trace().abs() - 10.0 / 3.0).abs() < 1e-12);
        assert!((a1.det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_slopes_and_normalisation() {
        let m = canonical_step();
        assert!((step_mode(&m, 1).unwrap().slope0 - 1.0).abs() < 1e-15);
        assert!((step_mode(&m, 3).unwrap().slope0 - 3.0).abs() < 1e-15);
        for k in [1, 5, 41] {
            assert_eq!(step_mode(&m, k).unwrap().value(0.0), 1.0);
        }
        assert!(matches!(step_mode(&m, 2), Err(FloquetError::BadIndex { .. })));
    }

    #[test]
    fn periodic_slopes() {
        let m = canonical_periodic();
        let p1 = periodic_mode(&m, 1).unwrap();
        assert!((p1.slope0 + 0.5).abs() < 1e-15);
        assert!((p1.value(0.0) - 1.0).abs() < 1e-15);
        let p3 = periodic_mode(&m, 3).unwrap();
        assert!(p1.slope0 * p3.slope0 < 0.0);
        assert!((p1.floquet_mult.unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_slopes() {
        let one = Param::int(1);
        let m = DirichletMedium::new(&"pi/4".parse().unwrap(), &one).unwrap();
        assert!((dirichlet_mode(&m, 1).unwrap().slope0 + 1.0).abs() < 1e-14);
        assert!((dirichlet_mode(&m, 3).unwrap().slope0 - 3.0).abs() < 1e-14);
        assert!((dirichlet_mode(&m, 7).unwrap().value(0.0) - 1.0).abs() < 1e-14);
        assert_eq!(dirichlet_mode(&m, 1).unwrap().value(m.l), 0.0_f64.max(dirichlet_mode(&m, 1).unwrap().value(m.l)));
    }

    #[test]
    fn c2_constants_for_periodic_medium() {
        let m = Medium::Periodic(canonical_periodic());
        let profiles = profile_table(&m, 1, 15).unwrap();
        let bound = verify_c2(&m, &profiles).unwrap();
        assert!((bound.rho - 9f64.ln() / (4.0 * PI)).abs() < 1e-15);
        assert!(bound.observed_sup <= bound.m);
        assert!(bound.observed_sup >= 1.0);
    }

    #[test]
    fn c2_step_constants() {
        let step = canonical_step();
        assert_eq!(step_c2_interior(&step), (2.0, 0.5));
        let m = Medium::Step(step);
        let profiles = profile_table(&m, 1, 21).unwrap();
        let bound = verify_c2(&m, &profiles).unwrap();
        assert!((bound.m - 2.0 * (PI / 4.0).exp()).abs() < 1e-14);
        // the interior constant alone is exceeded just beyond the interface
        assert!(matches!(check_decay_bound(&m, &profiles, 2.0, 0.5), Err(FloquetError::DecayViolation { k: 1, .. })));
    }

    #[test]
    fn c2_not_applicable_on_interval() {
        let one = Param::int(1);
        let m = Medium::Dirichlet(DirichletMedium::new(&"pi/4".parse().unwrap(), &one).unwrap());
        assert_eq!(verify_c2(&m, &[]), Err(FloquetError::NotApplicable));
    }
}
