//! Odd antisymmetric sequences and their convolution algebra.
//!
//! An [`OddSequence`] stores `ẑ_k` for `k = 1, 3, …, N` only; the negative
//! half is implied by `ẑ_{−k} = −ẑ_k`. Convolutions are computed on the full
//! signed support by direct summation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddSequence {
    n: u64,
    values: Vec<f64>,
}

fn slot(k: u64) -> usize {
    ((k - 1) / 2) as usize
}

impl OddSequence {
    /// The zero sequence truncated at odd `n`.
    pub fn zeros(n: u64) -> Self {
        assert!(n % 2 == 1, "truncation bound must be odd, got {n}");
        OddSequence { n, values: vec![0.0; slot(n) + 1] }
    }

    /// Build from values at `k = 1, 3, …`; the truncation is `2·len − 1`.
    pub fn from_values(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "sequence needs at least one slot");
        assert!(values.iter().all(|v| v.is_finite()), "sequence values must be finite");
        OddSequence { n: 2 * values.len() as u64 - 1, values }
    }

    /// `ŷ^{(k)} = δ_{·,k} − δ_{·,−k}` scaled by `t`.
    pub fn pair(n: u64, k: u64, t: f64) -> Self {
        let mut s = Self::zeros(n);
        s.set(k, t);
        s
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at a positive odd index; zero beyond the truncation.
    pub fn get(&self, k: u64) -> f64 {
        if k.is_multiple_of(2) || k > self.n {
            0.0
        } else {
            self.values[slot(k)]
        }
    }

    /// Value at a signed index, using antisymmetry.
    pub fn get_signed(&self, k: i64) -> f64 {
        if k < 0 {
            -self.get(k.unsigned_abs())
        } else {
            self.get(k as u64)
        }
    }

    pub fn set(&mut self, k: u64, v: f64) {
        assert!(k % 2 == 1 && k <= self.n, "index {k} outside odd range 1..={}", self.n);
        self.values[slot(k)] = v;
    }

    /// `(k, ẑ_k)` for every positive odd `k ≤ N`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (2 * i as u64 + 1, v))
    }

    /// Positive indices with nonzero value.
    pub fn support(&self) -> Vec<u64> {
        self.iter().filter(|&(_, v)| v != 0.0).map(|(k, _)| k).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, t: f64) -> Self {
        OddSequence { n: self.n, values: self.values.iter().map(|v| v * t).collect() }
    }

    /// `self + t·other` (other may have a smaller truncation).
    pub fn add_scaled(&self, t: f64, other: &OddSequence) -> Self {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            if k <= self.n {
                out.values[slot(k)] += t * v;
            } else {
                assert!(v == 0.0, "cannot add nonzero entry at k = {k} beyond N = {}", self.n);
            }
        }
        out
    }

    /// Zero-pad or cut to a new odd truncation.
    pub fn resized(&self, n: u64) -> Self {
        let mut out = Self::zeros(n);
        for (k, v) in self.iter().take_while(|&(k, _)| k <= n) {
            out.values[slot(k)] = v;
        }
        out
    }

    /// Half-vector Euclidean inner product `Σ_{k>0} ẑ_k ŷ_k`.
    pub fn dot(&self, other: &OddSequence) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    /// Half-vector Euclidean norm `(Σ_{k>0} ẑ_k²)^{1/2}`.
    pub fn half_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Full signed coefficient array.
    pub fn to_spectrum(&self) -> Spectrum {
        let n = self.n as i64;
        let mut s = Spectrum::zeros(n);
        for (k, v) in self.iter() {
            s.coeffs[(n + k as i64) as usize] = v;
            s.coeffs[(n - k as i64) as usize] = -v;
        }
        s
    }
}

/// A finitely supported sequence on `{−max, …, max}`, no symmetry assumed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    max: i64,
    coeffs: Vec<f64>,
}

/// Convolution of two odd sequences; supported on even indices.
pub type ConvolutionResult = Spectrum;

impl Spectrum {
    pub fn zeros(max: i64) -> Self {
        Spectrum { max, coeffs: vec![0.0; (2 * max + 1) as usize] }
    }

    pub fn max_index(&self) -> i64 {
        self.max
    }

    pub fn get(&self, k: i64) -> f64 {
        if k.abs() > self.max {
            0.0
        } else {
            self.coeffs[(k + self.max) as usize]
        }
    }

    /// `(k, c_k)` for every index in range.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.coeffs.iter().enumerate().map(|(i, &c)| (i as i64 - self.max, c))
    }

    /// `(a*b)_k = Σ_l a_l b_{k−l}`
    pub fn convolve(&self, other: &Spectrum) -> Spectrum {
        let mut out = Spectrum::zeros(self.max + other.max);
        let nonzero: Vec<(usize, f64)> = other.coeffs.iter().copied().enumerate().filter(|&(_, b)| b != 0.0).collect();
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for &(j, b) in &nonzero {
                out.coeffs[i + j] += a * b;
            }
        }
        out
    }

    /// `(a*b)_0 = Σ_l a_l b_{−l}`
    pub fn pair_at_zero(&self, other: &Spectrum) -> f64 {
        let m = self.max.min(other.max);
        (-m..=m).map(|l| self.get(l) * other.get(-l)).sum()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Restrict an odd-supported antisymmetric spectrum to positive indices `≤ n`.
    pub fn to_odd(&self, n: u64) -> OddSequence {
        let mut out = OddSequence::zeros(n);
        for k in (1..=n).step_by(2) {
            out.values[slot(k)] = self.get(k as i64);
        }
        out
    }
}

pub fn convolve(z: &OddSequence, y: &OddSequence) -> ConvolutionResult {
    z.to_spectrum().convolve(&y.to_spectrum())
}

/// `ẑ*ẑ*ẑ` on its full support `|k| ≤ 3N`.
pub fn cube(z: &OddSequence) -> Spectrum {
    let s = z.to_spectrum();
    s.convolve(&s).convolve(&s)
}

/// `⦀ẑ⦀⁴ = ‖ẑ*ẑ‖²_{ℓ²}`
pub fn quad_norm4(z: &OddSequence) -> f64 {
    let s = z.to_spectrum();
    s.convolve(&s).l2_norm_sq()
}

/// `(ẑ*ẑ*ẑ*ẑ)₀` by direct summation over index triples.
pub fn quad_norm4_direct(z: &OddSequence) -> f64 {
    let n = z.n() as i64;
    let idx: Vec<i64> = (-n..=n).filter(|k| k % 2 != 0).collect();
    let mut total = 0.0;
    for &a in &idx {
        let za = z.get_signed(a);
        for &b in &idx {
            let zab = za * z.get_signed(b);
            if zab == 0.0 {
                continue;
            }
            for &c in &idx {
                let d = -(a + b + c);
                if d.abs() <= n {
                    total += zab * z.get_signed(c) * z.get_signed(d);
                }
            }
        }
    }
    total
}

/// `(û*v̂*ŵ*ẑ)₀`
pub fn quad_pairing(u: &OddSequence, v: &OddSequence, w: &OddSequence, z: &OddSequence) -> f64 {
    convolve(u, v).pair_at_zero(&convolve(w, z))
}

/// `‖ẑ‖_{ℓ²}` over the full signed support.
pub fn l2_norm(z: &OddSequence) -> f64 {
    (2.0 * z.dot(z)).sqrt()
}

/// `‖ẑ‖_{h^ν} = (Σ_{k∈ℤ} (1+k²)^ν ẑ_k²)^{1/2}`
pub fn h_norm(z: &OddSequence, nu: f64) -> f64 {
    let sum: f64 = z.iter().map(|(k, v)| (1.0 + (k * k) as f64).powf(nu) * v * v).sum();
    (2.0 * sum).sqrt()
}

/// The real signal `(2/√T) Σ_{k>0} ẑ_k sin(ωkt)`.
pub fn time_signal(z: &OddSequence, t_grid: &[f64], omega: f64) -> Vec<f64> {
    let scale = 2.0 / (2.0 * PI / omega).sqrt();
    t_grid.iter().map(|&t| scale * z.iter().map(|(k, v)| v * (omega * k as f64 * t).sin()).sum::<f64>()).collect()
}
