//! The quartic functional
//!
//! ```text
//! J(ẑ) = ¼(ẑ*ẑ*ẑ*ẑ)₀ + (T/γω⁴) Σ_{k∈ℤ} Φ'_k(0)/k² ẑ_k²
//! ```
//!
//! restricted to sequences supported on a lattice `r·ℤ_odd` and truncated at `N`.
//! With `a_k = TΦ'_k(0)/(γω⁴k²)` and `η_k = 2a_k` the quadratic part is
//! `2Σ_{k>0} a_k ẑ_k²`. The gradient is reported per positive index as
//! `g_k = η_k α̂_k − (α̂*α̂*α̂)_k`, so that `J'(α̂)[ŷ] = Σ_{k>0} 2g_k ŷ_k`.

use serde::Serialize;
use thiserror::Error;

use crate::floquet::{self, FloquetError};
use crate::media::{MediaError, Medium};
use crate::seqspace::{self, OddSequence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("coefficient at k = {k} lies outside the lattice {r}·ℤ_odd")]
    SupportViolation { k: u64, r: u64 },
    #[error("sequence truncation {got} exceeds the functional truncation {n}")]
    TruncationMismatch { got: u64, n: u64 },
    #[error("sign condition fails for γ = {gamma}: no harmonic k ≤ {n} in {r}·ℤ_odd has Φ'_k(0)/γ < 0")]
    SignConditionFailed { gamma: f64, n: u64, r: u64 },
    #[error("coupling γ must be a nonzero finite number")]
    ZeroCoupling,
    #[error("truncation N = {0} must be odd and at least the symmetry index")]
    BadTruncation(u64),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Floquet(#[from] FloquetError),
}

/// Which branch of the sign condition holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignCondition {
    /// `γ < 0` and some `Φ'_k(0) > 0`.
    NegativeCouplingPositiveSlope,
    /// `γ > 0` and some `Φ'_k(0) < 0`.
    PositiveCouplingNegativeSlope,
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalSpec {
    pub omega: f64,
    pub period: f64,
    pub gamma: f64,
    pub n: u64,
    pub r: u64,
    /// Lattice harmonics `k ≤ N`, increasing.
    pub lattice: Vec<u64>,
    pub slope_table: Vec<f64>,
    pub coeff_a: Vec<f64>,
    pub coeff_eta: Vec<f64>,
    pub sign_condition: SignCondition,
    /// `η` indexed by odd slot `(k−1)/2`; zero off the lattice.
    #[serde(skip)]
    eta_slot: Vec<f64>,
}

/// Build the coefficient tables from the medium's fundamental solutions.
pub fn eta_table(medium: &Medium, gamma: f64, n: u64, r: u64) -> Result<FunctionalSpec, FunctionalError> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(FunctionalError::ZeroCoupling);
    }
    if n.is_multiple_of(2) || n < r {
        return Err(FunctionalError::BadTruncation(n));
    }
    let sym = medium.symmetry(r)?;
    let lattice = sym.lattice_up_to(n);
    let profiles = floquet::profile_table(medium, r, n)?;
    let slopes: Vec<f64> = profiles.iter().map(|p| p.slope0).collect();
    FunctionalSpec::from_slopes(medium.omega(), gamma, n, r, lattice, slopes)
}

impl FunctionalSpec {
    /// Build directly from a slope table for the lattice `r·ℤ_odd ∩ [1, N]`.
    pub fn from_slopes(
        omega: f64,
        gamma: f64,
        n: u64,
        r: u64,
        lattice: Vec<u64>,
        slopes: Vec<f64>,
    ) -> Result<Self, FunctionalError> {
        assert_eq!(lattice.len(), slopes.len(), "one slope per lattice harmonic");
        let period = 2.0 * std::f64::consts::PI / omega;
        let scale = period / (gamma * omega.powi(4));
        let coeff_a: Vec<f64> = lattice.iter().zip(&slopes).map(|(&k, s)| scale * s / (k * k) as f64).collect();
        let coeff_eta: Vec<f64> = coeff_a.iter().map(|a| 2.0 * a).collect();
        let sign_condition = if gamma < 0.0 && slopes.iter().any(|&s| s > 0.0) {
            SignCondition::NegativeCouplingPositiveSlope
        } else if gamma > 0.0 && slopes.iter().any(|&s| s < 0.0) {
            SignCondition::PositiveCouplingNegativeSlope
        } else {
            return Err(FunctionalError::SignConditionFailed { gamma, n, r });
        };
        let mut eta_slot = vec![0.0; n.div_ceil(2) as usize];
        for (&k, &e) in lattice.iter().zip(&coeff_eta) {
            eta_slot[((k - 1) / 2) as usize] = e;
        }
        Ok(FunctionalSpec {
            omega,
            period,
            gamma,
            n,
            r,
            lattice,
            slope_table: slopes,
            coeff_a,
            coeff_eta,
            sign_condition,
            eta_slot,
        })
    }

    /// `η_k` for a lattice harmonic, `None` otherwise.
    pub fn eta(&self, k: u64) -> Option<f64> {
        self.lattice.binary_search(&k).ok().map(|i| self.coeff_eta[i])
    }

    pub fn slope(&self, k: u64) -> Option<f64> {
        self.lattice.binary_search(&k).ok().map(|i| self.slope_table[i])
    }

    pub fn in_lattice(&self, k: u64) -> bool {
        k.is_multiple_of(self.r) && (k / self.r) % 2 == 1
    }

    /// Smallest lattice harmonic with `Φ'_k(0)/γ < 0`.
    pub fn seed_harmonic(&self) -> Option<u64> {
        self.lattice.iter().zip(&self.slope_table).find(|(_, &s)| s / self.gamma < 0.0).map(|(&k, _)| k)
    }

    /// Restrict to a smaller odd truncation.
    pub fn truncate(&self, n: u64) -> Result<FunctionalSpec, FunctionalError> {
        if n.is_multiple_of(2) || n < self.r || n > self.n {
            return Err(FunctionalError::BadTruncation(n));
        }
        let keep = self.lattice.iter().take_while(|&&k| k <= n).count();
        FunctionalSpec::from_slopes(
            self.omega,
            self.gamma,
            n,
            self.r,
            self.lattice[..keep].to_vec(),
            self.slope_table[..keep].to_vec(),
        )
    }

    /// Zero sequence with this truncation.
    pub fn zeros(&self) -> OddSequence {
        OddSequence::zeros(self.n)
    }

    pub fn check_support(&self, z: &OddSequence) -> Result<(), FunctionalError> {
        if z.n() > self.n {
            if let Some(k) = z.support().into_iter().find(|&k| k > self.n) {
                return Err(FunctionalError::TruncationMismatch { got: k, n: self.n });
            }
        }
        match z.support().into_iter().find(|&k| !self.in_lattice(k)) {
            Some(k) => Err(FunctionalError::SupportViolation { k, r: self.r }),
            None => Ok(()),
        }
    }

    /// `2Σ_{k>0} a_k ẑ_k² = Σ_{k>0} η_k ẑ_k²`
    pub fn quadratic_part(&self, z: &OddSequence) -> f64 {
        z.iter().map(|(k, v)| self.eta_at(k) * v * v).sum()
    }

    fn eta_at(&self, k: u64) -> f64 {
        self.eta_slot.get(((k - 1) / 2) as usize).copied().unwrap_or(0.0)
    }

    /// `J` without the support check.
    pub fn value(&self, z: &OddSequence) -> f64 {
        0.25 * seqspace::quad_norm4(z) + self.quadratic_part(z)
    }

    /// Gradient without the support check; off-lattice entries are zero.
    pub fn gradient(&self, z: &OddSequence) -> OddSequence {
        let c = seqspace::cube(z);
        let mut g = OddSequence::zeros(self.n);
        for &k in &self.lattice {
            g.set(k, self.eta_at(k) * z.get(k) - c.get(k as i64));
        }
        g
    }

    /// `J` and its gradient from a single cube evaluation.
    pub fn value_and_gradient(&self, z: &OddSequence) -> (f64, OddSequence) {
        let s = z.to_spectrum();
        let s2 = s.convolve(&s);
        let c = s2.convolve(&s);
        let mut g = OddSequence::zeros(self.n);
        for &k in &self.lattice {
            g.set(k, self.eta_at(k) * z.get(k) - c.get(k as i64));
        }
        (0.25 * s2.l2_norm_sq() + self.quadratic_part(z), g)
    }

    /// Hessian-vector product of `J` in half-vector coordinates:
    /// `∇²J v = 2(η v − 3 α̂*α̂*v)` on the lattice.
    pub fn hessian_vec(&self, z: &OddSequence, v: &OddSequence) -> OddSequence {
        let s = z.to_spectrum();
        let c = s.convolve(&s).convolve(&v.to_spectrum());
        let mut out = OddSequence::zeros(self.n);
        for &k in &self.lattice {
            out.set(k, 2.0 * (self.eta_at(k) * v.get(k) - 3.0 * c.get(k as i64)));
        }
        out
    }
}

pub fn eval_j(spec: &FunctionalSpec, z: &OddSequence) -> Result<f64, FunctionalError> {
    spec.check_support(z)?;
    Ok(spec.value(z))
}

pub fn grad_j(spec: &FunctionalSpec, z: &OddSequence) -> Result<OddSequence, FunctionalError> {
    spec.check_support(z)?;
    Ok(spec.gradient(z))
}

/// Euler–Lagrange residual `r_k = (α̂*α̂*α̂)_k − η_k α̂_k`.
#[derive(Debug, Clone, Serialize)]
pub struct ElResidual {
    /// `(k, r_k)` for lattice harmonics `k ≤ N`.
    pub lattice: Vec<(u64, f64)>,
    /// `(k, r_k)` for odd `k ≤ N` off the lattice; here `r_k = (α̂*α̂*α̂)_k`.
    pub off_lattice: Vec<(u64, f64)>,
    pub sup: f64,
    pub l2: f64,
    pub off_sup: f64,
}

pub fn el_residual(spec: &FunctionalSpec, z: &OddSequence) -> ElResidual {
    let c = seqspace::cube(z);
    let mut lattice = Vec::with_capacity(spec.lattice.len());
    let mut off_lattice = Vec::new();
    for k in (1..=spec.n).step_by(2) {
        let cube_k = c.get(k as i64);
        if spec.in_lattice(k) {
            lattice.push((k, cube_k - spec.eta_at(k) * z.get(k)));
        } else {
            off_lattice.push((k, cube_k));
        }
    }
    let sup = lattice.iter().fold(0.0f64, |m, (_, r)| m.max(r.abs()));
    let l2 = lattice.iter().map(|(_, r)| r * r).sum::<f64>().sqrt();
    let off_sup = off_lattice.iter().fold(0.0f64, |m, (_, r)| m.max(r.abs()));
    ElResidual { lattice, off_lattice, sup, l2, off_sup }
}
