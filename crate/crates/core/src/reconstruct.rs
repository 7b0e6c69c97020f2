//! Space-time reconstruction and verification of a coefficient sequence.
//!
//! The field is
//!
//! ```text
//! w(x,t) = (2/√T) Σ_{k>0} (α̂_k/k) Φ_k(|x|) cos(ωkt),
//! ```
//!
//! the real form of `Σ_{k∈ℤ_odd} (α̂_k/k) Φ_k(|x|) e^{iωkt}/√T` for antisymmetric
//! `α̂`. Its trace satisfies `w_t(0,t) = −ω·time_signal(α̂)(t)`.
//!
//! Test functions are `ψ(x,t) = (2/(k₀√T)) Ψ(x) cos(ωk₀t)`, i.e. the same ansatz
//! with `Ψ_{±k₀} = ±Ψ`, so the semi-analytic reduction applies with
//! `ŷ = Ψ(0)·ŷ^{(k₀)}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::floquet::ModeProfile;
use crate::functional::FunctionalSpec;
use crate::media::Medium;
use crate::quadrature::{panel_breakpoints, CompositeRule};
use crate::seqspace::{self, OddSequence};

/// Gauss–Legendre nodes per panel.
const NODES_PER_PANEL: usize = 8;
/// Trapezoid points for the cubic boundary term.
const BOUNDARY_POINTS: usize = 4096;
/// Relative floor on the per-test normalisation.
pub const SCALE_FLOOR: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("no mode profile for harmonic k = {0}")]
    MissingProfile(u64),
    #[error("tail of the field underflows (max |w| = {0:e} in the fit window)")]
    TailUnderflow(f64),
    #[error("decay fit needs an unbounded medium")]
    NoDecay,
    #[error("time grid with {nt} points cannot represent the shift T/(2r) for r = {r}")]
    MisalignedGrid { nt: usize, r: u64 },
    #[error("quadrature did not stabilise 3 digits for k = {k}: {coarse:e} vs {fine:e}")]
    QuadratureNonConvergence { k: u64, coarse: f64, fine: f64 },
}

fn profile_map(profiles: &[ModeProfile]) -> BTreeMap<u64, &ModeProfile> {
    profiles.iter().map(|p| (p.k, p)).collect()
}

/// Field samples `values[i][j] = w(x_i, t_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldGrid {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl FieldGrid {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `x,t,w` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,t,w")?;
        for (x, row) in self.x.iter().zip(&self.values) {
            for (t, w) in self.t.iter().zip(row) {
                writeln!(out, "{x:.16e},{t:.16e},{w:.16e}")?;
            }
        }
        Ok(())
    }
}

/// Symmetric spatial grid with 20 points per decay length (or 400 points
/// across a bounded interval), and `nt` uniform times on `[0, T)` with `nt`
/// a multiple of `2r`.
pub fn default_grid(medium: &Medium, r: u64) -> (Vec<f64>, Vec<f64>) {
    let (x_max, per_side) = match medium.half_length() {
        Some(l) => (l, 200usize),
        None => (medium.x_max(), 400usize),
    };
    let dx = x_max / per_side as f64;
    let x = (0..=2 * per_side).map(|i| -x_max + i as f64 * dx).collect();
    let nt = 2 * r as usize * (64usize).div_ceil(2 * r as usize);
    let period = medium.period();
    let t = (0..nt).map(|j| j as f64 * period / nt as f64).collect();
    (x, t)
}

pub fn assemble(
    alpha: &OddSequence,
    profiles: &[ModeProfile],
    omega: f64,
    x_grid: &[f64],
    t_grid: &[f64],
) -> Result<FieldGrid, ReconstructError> {
    let map = profile_map(profiles);
    let modes: Vec<(u64, f64, &ModeProfile)> = alpha
        .iter()
        .filter(|&(_, v)| v != 0.0)
        .map(|(k, v)| map.get(&k).map(|p| (k, v, *p)).ok_or(ReconstructError::MissingProfile(k)))
        .collect::<Result<_, _>>()?;
    let scale = 2.0 / (2.0 * PI / omega).sqrt();
    let cos_table: Vec<Vec<f64>> =
        modes.iter().map(|&(k, _, _)| t_grid.iter().map(|&t| (omega * k as f64 * t).cos()).collect()).collect();
    let values = x_grid
        .iter()
        .map(|&x| {
            let amps: Vec<f64> = modes.iter().map(|&(k, v, p)| scale * v / k as f64 * p.value(x.abs())).collect();
            (0..t_grid.len()).map(|j| amps.iter().zip(&cos_table).map(|(a, c)| a * c[j]).sum()).collect()
        })
        .collect();
    Ok(FieldGrid { x: x_grid.to_vec(), t: t_grid.to_vec(), values })
}

/// `max |w(x, t + T/(2r)) + w(x, t)|` over the grid.
pub fn check_antiperiodicity(field: &FieldGrid, r: u64) -> Result<f64, ReconstructError> {
    let nt = field.t.len();
    if nt == 0 || !nt.is_multiple_of(2 * r as usize) {
        return Err(ReconstructError::MisalignedGrid { nt, r });
    }
    let shift = nt / (2 * r as usize);
    Ok(field
        .values
        .iter()
        .flat_map(|row| (0..nt).map(move |j| (row[(j + shift) % nt] + row[j]).abs()))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub rho_fit: f64,
    /// Smallest `C` with `max_t |w(x,t)| ≤ C e^{−ρ_fit|x|}` on the grid.
    pub c_fit: f64,
    /// RMS residual of the log-linear regression.
    pub fit_residual: f64,
    pub rho_theory: f64,
    pub m_theory: f64,
}

/// Regress `ln max_t |w(x,t)|` on `x` over `x ∈ [x_max/2, x_max]`.
pub fn fit_decay(field: &FieldGrid, rho_theory: f64, m_theory: f64) -> Result<DecayFit, ReconstructError> {
    let envelope: Vec<(f64, f64)> = field
        .x
        .iter()
        .zip(&field.values)
        .map(|(&x, row)| (x.abs(), row.iter().fold(0.0f64, |m, v| m.max(v.abs()))))
        .collect();
    let x_max = envelope.iter().fold(0.0f64, |m, &(x, _)| m.max(x));
    let tail: Vec<(f64, f64)> = envelope.iter().copied().filter(|&(x, _)| x >= 0.5 * x_max && x > 0.0).collect();
    let tail_max = tail.iter().fold(0.0f64, |m, &(_, e)| m.max(e));
    if tail.len() < 2 || tail.iter().any(|&(_, e)| e < 1e-300) {
        return Err(ReconstructError::TailUnderflow(tail_max));
    }
    let n = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = tail.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let fit_residual = (tail.iter().map(|p| (p.1.ln() - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    let rho_fit = -slope;
    let c_fit = envelope.iter().fold(0.0f64, |m, &(x, e)| m.max(e * (rho_fit * x).exp()));
    Ok(DecayFit { rho_fit, c_fit, fit_residual, rho_theory, m_theory })
}

/// Family of a spatial test profile `Ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TestShape {
    /// `e^{−(x/σ)²}`
    Gaussian { sigma: f64 },
    /// `cos(πx/(2l)) e^{−(x/σ)²}`, vanishing at `|x| = l`.
    Bump { sigma: f64, l: f64 },
    /// `Φ_k(|x|)` for the test harmonic itself.
    Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunction {
    pub k: u64,
    pub shape: TestShape,
}

impl TestFunction {
    /// `(Ψ(x), Ψ'(x))` for `x ≥ 0`.
    fn eval(&self, x: f64, profile: &ModeProfile) -> (f64, f64) {
        match self.shape {
            TestShape::Gaussian { sigma } => {
                let e = (-(x / sigma).powi(2)).exp();
                (e, -2.0 * x / (sigma * sigma) * e)
            }
            TestShape::Bump { sigma, l } => {
                let e = (-(x / sigma).powi(2)).exp();
                let q = PI / (2.0 * l);
                let (s, c) = (q * x).sin_cos();
                (c * e, (-q * s - 2.0 * x / (sigma * sigma) * c) * e)
            }
            TestShape::Profile => profile.eval(x),
        }
    }

    /// `∫_ℝ Ψ²` in closed form, where available.
    fn exact_square_integral(&self) -> Option<f64> {
        match self.shape {
            TestShape::Gaussian { sigma } => Some(sigma * (PI / 2.0).sqrt()),
            _ => None,
        }
    }
}

/// Gaussian (or bump) profiles with three widths per harmonic, plus the
/// profile-shaped family, for every base-lattice harmonic `k ≤ N`.
pub fn test_bank(medium: &Medium, n: u64) -> Vec<TestFunction> {
    let base = medium.base_symmetry();
    let shapes: Vec<TestShape> = match (medium.half_length(), medium.decay_rate()) {
        (Some(l), _) => [0.5, 1.0, 2.0].iter().map(|f| TestShape::Bump { sigma: f * l, l }).collect(),
        (None, Some(rho)) => [0.5, 1.0, 2.0].iter().map(|f| TestShape::Gaussian { sigma: f / rho }).collect(),
        (None, None) => unreachable!("unbounded media decay"),
    };
    let mut bank = Vec::new();
    for k in (0..).map(|h| base * (2 * h + 1)).take_while(|&k| k <= n) {
        for &shape in &shapes {
            bank.push(TestFunction { k, shape });
        }
        bank.push(TestFunction { k, shape: TestShape::Profile });
    }
    bank
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakEntry {
    pub test: TestFunction,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    /// `−H1 + H2 − γH3` by space-time quadrature.
    pub direct: f64,
    /// `−2Σ_k (α̂_k/k²)Φ'_k(0)Ψ_k(0) − (γω⁴/T)(α̂*α̂*α̂*ŷ)₀`.
    pub reduced: f64,
    /// `max(|H1|, |H2|, |γH3|)`
    pub scale: f64,
    /// `‖ψ_t‖²_{L²(D)}` by 2-D quadrature.
    pub psi_t_sq_quadrature: f64,
    /// `ω² Σ_k ‖Ψ_k‖²_{L²}`, closed form for Gaussians, 1-D quadrature otherwise.
    pub psi_t_sq_fourier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakResidualReport {
    pub entries: Vec<WeakEntry>,
    /// `max |direct| / scale`
    pub max_direct: f64,
    /// `max |reduced| / scale`
    pub max_reduced: f64,
    /// `max |direct − reduced| / scale`
    pub max_disagreement: f64,
    /// `max |quadrature − Fourier| / Fourier` over the Parseval bridge.
    pub max_parseval: f64,
}

struct SpatialRule {
    x: Vec<f64>,
    w: Vec<f64>,
}

fn spatial_rule(medium: &Medium, max_wavenumber: f64, coarsen: f64) -> SpatialRule {
    let x_end = medium.x_max();
    let max_len = coarsen * (2.0 / max_wavenumber).min(0.5);
    let bp = panel_breakpoints(0.0, x_end, &medium.interfaces(x_end), max_len);
    let rule = CompositeRule::new(&bp, NODES_PER_PANEL);
    SpatialRule { x: rule.nodes, w: rule.weights }
}

/// `(H1, H2, ‖ψ_t‖²)` for every test function on one spatial rule.
fn bulk_terms(
    medium: &Medium,
    alpha: &OddSequence,
    profiles: &BTreeMap<u64, &ModeProfile>,
    bank: &[TestFunction],
    omega: f64,
    rule: &SpatialRule,
) -> Vec<(f64, f64, f64)> {
    let period = 2.0 * PI / omega;
    let root_t = period.sqrt();
    let modes: Vec<(u64, f64)> = alpha.iter().filter(|&(_, v)| v != 0.0).collect();
    let mut tests: Vec<u64> = bank.iter().map(|t| t.k).collect();
    tests.sort_unstable();
    tests.dedup();
    let test_slot: Vec<usize> = bank.iter().map(|t| tests.binary_search(&t.k).unwrap()).collect();
    let kmax = modes.iter().map(|m| m.0).chain(tests.iter().copied()).max().unwrap_or(1);
    let m = (2 * kmax as usize + 2).next_power_of_two();
    let dt = period / m as f64;
    let times: Vec<f64> = (0..m).map(|j| j as f64 * dt).collect();
    // trapezoid Gram matrices between test and field harmonics
    let gram = |f: fn(f64) -> f64, a: u64, b: u64| -> f64 {
        times.iter().map(|&t| f(omega * a as f64 * t) * f(omega * b as f64 * t)).sum::<f64>() * dt
    };
    let sin_gram: Vec<Vec<f64>> =
        tests.iter().map(|&a| modes.iter().map(|&(b, _)| gram(f64::sin, a, b)).collect()).collect();
    let cos_gram: Vec<Vec<f64>> =
        tests.iter().map(|&a| modes.iter().map(|&(b, _)| gram(f64::cos, a, b)).collect()).collect();
    let psi_gram: Vec<f64> = tests.iter().map(|&a| gram(f64::sin, a, a)).collect();
    let mode_profiles: Vec<&ModeProfile> = modes.iter().map(|(k, _)| profiles[k]).collect();
    let test_profiles: Vec<&ModeProfile> = tests.iter().map(|k| profiles[k]).collect();

    let mut acc = vec![(0.0, 0.0, 0.0); bank.len()];
    let mut wt = vec![0.0; modes.len()];
    let mut wx = vec![0.0; modes.len()];
    let mut proj = vec![(0.0, 0.0); tests.len()];
    for (&x, &wq) in rule.x.iter().zip(&rule.w) {
        let g = medium.g(x);
        // w_t = −(2ω/√T) Σ α_k Φ_k sin, w_x = (2/√T) Σ (α_k/k) Φ'_k cos
        for (i, (&(k, a), p)) in modes.iter().zip(&mode_profiles).enumerate() {
            let (v, d) = p.eval(x);
            wt[i] = -2.0 * omega / root_t * a * v;
            wx[i] = 2.0 / root_t * a / k as f64 * d;
        }
        for (i, pr) in proj.iter_mut().enumerate() {
            let s: f64 = wt.iter().zip(&sin_gram[i]).map(|(a, b)| a * b).sum();
            let c: f64 = wx.iter().zip(&cos_gram[i]).map(|(a, b)| a * b).sum();
            *pr = (s, c);
        }
        for ((entry, test), &slot) in acc.iter_mut().zip(bank).zip(&test_slot) {
            let (psi, dpsi) = test.eval(x, test_profiles[slot]);
            // ψ_t = −(2ω/√T) Ψ sin(ωk₀t), ψ_x = (2/(k₀√T)) Ψ' cos(ωk₀t)
            let amp_t = -2.0 * omega / root_t * psi;
            let amp_x = 2.0 / (test.k as f64 * root_t) * dpsi;
            let (s, c) = proj[slot];
            entry.0 += 2.0 * wq * g * amp_t * s;
            entry.1 += 2.0 * wq * amp_x * c;
            entry.2 += 2.0 * wq * amp_t * amp_t * psi_gram[slot];
        }
    }
    acc
}

/// Weak-form residual of the field generated by `α̂` against every test function.
pub fn weak_residual(
    medium: &Medium,
    alpha: &OddSequence,
    profiles: &[ModeProfile],
    spec: &FunctionalSpec,
    bank: &[TestFunction],
) -> Result<WeakResidualReport, ReconstructError> {
    let map = profile_map(profiles);
    for k in alpha.support().into_iter().chain(bank.iter().map(|t| t.k)) {
        if !map.contains_key(&k) {
            return Err(ReconstructError::MissingProfile(k));
        }
    }
    let omega = spec.omega;
    let period = spec.period;
    let gamma = spec.gamma;
    let root_t = period.sqrt();
    let kmax = alpha.support().into_iter().chain(bank.iter().map(|t| t.k)).max().unwrap_or(1);
    let wavenumber = kmax as f64 * omega * medium.max_abs_g().sqrt();
    let fine = bulk_terms(medium, alpha, &map, bank, omega, &spatial_rule(medium, wavenumber, 1.0));
    let coarse = bulk_terms(medium, alpha, &map, bank, omega, &spatial_rule(medium, wavenumber, 2.0));

    // boundary trace at x = 0
    let dt = period / BOUNDARY_POINTS as f64;
    let trace: Vec<f64> = (0..BOUNDARY_POINTS)
        .map(|j| {
            let t = j as f64 * dt;
            -2.0 * omega / root_t
                * alpha
                    .iter()
                    .filter(|&(_, v)| v != 0.0)
                    .map(|(k, v)| v * map[&k].value(0.0) * (omega * k as f64 * t).sin())
                    .sum::<f64>()
        })
        .collect();
    let cube = seqspace::cube(alpha);
    let one_d = spatial_rule(medium, wavenumber, 1.0);

    let mut entries = Vec::with_capacity(bank.len());
    for (i, test) in bank.iter().enumerate() {
        let k0 = test.k;
        let profile = map[&k0];
        let (h1, h2, psi_t_sq) = fine[i];
        let (h1c, h2c, _) = coarse[i];
        for (c, f) in [(h1c, h1), (h2c, h2)] {
            if (c - f).abs() > 1e-3 * f.abs().max(1e-3 * h1.abs().max(h2.abs())) {
                return Err(ReconstructError::QuadratureNonConvergence { k: k0, coarse: c, fine: f });
            }
        }
        let psi0 = test.eval(0.0, profile).0;
        let h3 = (0..BOUNDARY_POINTS)
            .map(|j| {
                let t = j as f64 * dt;
                trace[j].powi(3) * (-2.0 * omega / root_t * psi0 * (omega * k0 as f64 * t).sin())
            })
            .sum::<f64>()
            * dt;
        let direct = -h1 + h2 - gamma * h3;
        // reduction over k = ±k₀: Ψ_{±k₀}(0) = ±Ψ(0)
        let a = alpha.get(k0);
        let slope = profile.slope0;
        let quartic = -2.0 * cube.get(k0 as i64) * psi0;
        let reduced = -4.0 * a / (k0 * k0) as f64 * slope * psi0 - gamma * omega.powi(4) / period * quartic;
        let scale = h1.abs().max(h2.abs()).max((gamma * h3).abs());
        let psi_sq = match test.exact_square_integral() {
            Some(v) => v,
            None => 2.0 * one_d.x.iter().zip(&one_d.w).map(|(&x, &w)| w * test.eval(x, profile).0.powi(2)).sum::<f64>(),
        };
        entries.push(WeakEntry {
            test: *test,
            h1,
            h2,
            h3,
            direct,
            reduced,
            scale,
            psi_t_sq_quadrature: psi_t_sq,
            psi_t_sq_fourier: 2.0 * omega * omega * psi_sq,
        });
    }
    // entries whose terms vanish by orthogonality are measured against the bank
    let floor = SCALE_FLOOR * entries.iter().fold(0.0f64, |m, e| m.max(e.scale));
    let ratio = |f: &dyn Fn(&WeakEntry) -> f64| {
        entries
            .iter()
            .map(|e| {
                let s = e.scale.max(floor);
                if s > 0.0 {
                    f(e).abs() / s
                } else {
                    f(e).abs()
                }
            })
            .fold(0.0, f64::max)
    };
    let max_direct = ratio(&|e| e.direct);
    let max_reduced = ratio(&|e| e.reduced);
    let max_disagreement = ratio(&|e| e.direct - e.reduced);
    let max_parseval = entries
        .iter()
        .map(|e| (e.psi_t_sq_quadrature - e.psi_t_sq_fourier).abs() / e.psi_t_sq_fourier)
        .fold(0.0, f64::max);
    Ok(WeakResidualReport { entries, max_direct, max_reduced, max_disagreement, max_parseval })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    /// `(ν, ‖α̂‖_{h^ν})`
    pub norms: Vec<(f64, f64)>,
    /// Least-squares slope of `ln|α̂_k|` against `ln k` over the upper half of the support.
    pub tail_exponent: Option<f64>,
}

pub fn regularity_diagnostic(alpha: &OddSequence, nus: &[f64]) -> RegularityReport {
    let norms = nus.iter().map(|&nu| (nu, seqspace::h_norm(alpha, nu))).collect();
    let pts: Vec<(f64, f64)> =
        alpha.iter().filter(|&(_, v)| v != 0.0).map(|(k, v)| ((k as f64).ln(), v.abs().ln())).collect();
    let tail = &pts[pts.len() / 2..];
    let tail_exponent = (tail.len() >= 2).then(|| {
        let n = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    RegularityReport { norms, tail_exponent }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet;
    use crate::functional;
    use crate::media::StepMedium;
    use crate::param::Param;

    fn step() -> Medium {
        let one = Param::int(1);
        Medium::Step(StepMedium::new(&one, &one, &"pi/2".parse().unwrap(), &one).unwrap())
    }

    #[test]
    fn zero_field() {
        let m = step();
        let profiles = floquet::profile_table(&m, 1, 9).unwrap();
        let (x, t) = default_grid(&m, 1);
        let f = assemble(&OddSequence::zeros(9), &profiles, 1.0, &x, &t).unwrap();
        assert_eq!(f.sup_norm(), 0.0);
        assert!(matches!(fit_decay(&f, 0.5, 2.0), Err(ReconstructError::TailUnderflow(_))));
    }

    #[test]
    fn single_pair_trace() {
        let m = step();
        let profiles = floquet::profile_table(&m, 1, 9).unwrap();
        let period = 2.0 * PI;
        let t: Vec<f64> = (0..16).map(|j| j as f64 * period / 16.0).collect();
        let f = assemble(&OddSequence::pair(9, 3, 1.0), &profiles, 1.0, &[0.0], &t).unwrap();
        let amp = 2.0 / (3.0 * period.sqrt());
        for (j, &tj) in t.iter().enumerate() {
            assert!((f.values[0][j] - amp * (3.0 * tj).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn missing_profile() {
        let m = step();
        let profiles = floquet::profile_table(&m, 1, 3).unwrap();
        assert_eq!(
            assemble(&OddSequence::pair(9, 7, 1.0), &profiles, 1.0, &[0.0], &[0.0]),
            Err(ReconstructError::MissingProfile(7))
        );
    }

    #[test]
    fn planted_off_lattice_component_breaks_antiperiodicity() {
        let m = step();
        let profiles = floquet::profile_table(&m, 1, 9).unwrap();
        let (x, t) = default_grid(&m, 3);
        let on = OddSequence::pair(9, 3, 1.0).add_scaled(0.5, &OddSequence::pair(9, 9, 1.0));
        let f = assemble(&on, &profiles, 1.0, &x, &t).unwrap();
        assert!(check_antiperiodicity(&f, 3).unwrap() < 1e-12 * f.sup_norm().max(1.0));
        let off = on.add_scaled(0.3, &OddSequence::pair(9, 1, 1.0));
        let f = assemble(&off, &profiles, 1.0, &x, &t).unwrap();
        assert!(check_antiperiodicity(&f, 3).unwrap() > 0.1 * f.sup_norm());
    }

    #[test]
    fn seed_residual_matches_gradient() {
        let m = step();
        let spec = functional::eta_table(&m, -1.0, 5, 1).unwrap();
        let profiles = floquet::profile_table(&m, 1, 5).unwrap();
        let (_, seed) = crate::solver::seed_point(&spec, 1).unwrap();
        let bank = test_bank(&m, 5);
        let rep = weak_residual(&m, &seed, &profiles, &spec, &bank).unwrap();
        let g = spec.gradient(&seed);
        for e in &rep.entries {
            let psi0 = e.test.eval(0.0, &profiles[((e.test.k - 1) / 2) as usize]).0;
            let expect = -spec.gamma * spec.omega.powi(4) / spec.period * 2.0 * g.get(e.test.k) * psi0;
            assert!((e.reduced - expect).abs() < 1e-8 * expect.abs().max(1.0));
        }
        assert!(rep.max_disagreement < 1e-6);
        assert!(rep.max_direct > 1e-3);
        assert!(rep.max_parseval < 1e-6);
    }

    #[test]
    fn regularity_of_single_pair() {
        let rep = regularity_diagnostic(&OddSequence::pair(9, 3, 2.0), &[0.0, 0.2]);
        assert!((rep.norms[1].1 - 2f64.sqrt() * 10f64.powf(0.1) * 2.0).abs() < 1e-13);
        assert_eq!(rep.norms[0].1, seqspace::l2_norm(&OddSequence::pair(9, 3, 2.0)));
    }
}
