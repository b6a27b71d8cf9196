//! Closed-form theoretical quantities for the two-parameter model: count
//! moments, misclustering-rate bounds for spectral clustering on `A` and on
//! `N`, noise constants and population eigenvalues.
//!
//! Bounds are rates up to unspecified absolute constants and are only
//! meaningful for comparing slopes or orderings.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::network::{ChipModelSpec, SimplifiedSpec};

/// `μ₁T` at or below which the binary bound switches to its Taylor form.
pub const TAYLOR_THRESHOLD: f64 = 0.05;

/// Long-run mean and variance of a Hawkes count on `[0, T]`:
/// `ν = μT/(1−m)`, `σ² = μT/(1−m)³` with `m = α/β`.
pub fn asymptotic_moments(mu: f64, alpha: f64, beta: f64, horizon: f64) -> Result<(f64, f64)> {
    if !(mu >= 0.0 && alpha >= 0.0 && beta > 0.0 && horizon >= 0.0) {
        return domain(format!("invalid parameters mu = {mu}, alpha = {alpha}, beta = {beta}, T = {horizon}"));
    }
    if alpha >= beta {
        return domain(format!("nonstationary parameters: alpha = {alpha} >= beta = {beta}"));
    }
    let one_minus = 1.0 - alpha / beta;
    Ok((mu * horizon / one_minus, mu * horizon / one_minus.powi(3)))
}

/// Parameters of the two-value model reduced to what the bounds need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedTheoryInputs {
    pub n: usize,
    pub k: usize,
    pub horizon: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub m1: f64,
    pub m2: f64,
}

impl SimplifiedTheoryInputs {
    pub fn from_spec(spec: &SimplifiedSpec) -> Self {
        Self {
            n: spec.n,
            k: spec.k,
            horizon: spec.horizon,
            mu1: spec.mu1,
            mu2: spec.mu2,
            m1: spec.m1(),
            m2: spec.m2(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || !(self.horizon > 0.0) {
            return domain("need n >= 1, k >= 1 and T > 0");
        }
        for m in [self.m1, self.m2] {
            if !(0.0..1.0).contains(&m) {
                return domain(format!("branching ratio {m} outside [0, 1)"));
            }
        }
        if !(self.mu1 >= 0.0 && self.mu2 >= 0.0) {
            return domain("baseline rates must be nonnegative");
        }
        Ok(())
    }

    /// Per-unit-time mean rate on diagonal block pairs.
    pub fn nu1(&self) -> f64 {
        self.mu1 / (1.0 - self.m1)
    }

    pub fn nu2(&self) -> f64 {
        self.mu2 / (1.0 - self.m2)
    }

    /// Per-unit-time count variance on diagonal block pairs.
    pub fn sigma1_sq(&self) -> f64 {
        self.mu1 / (1.0 - self.m1).powi(3)
    }

    pub fn sigma2_sq(&self) -> f64 {
        self.mu2 / (1.0 - self.m2).powi(3)
    }

    fn scale(&self) -> f64 {
        (self.k * self.k) as f64 / (self.n as f64 * self.horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFlag {
    /// The separation term vanishes; the bound is infinite.
    Infinite,
    /// Diagonal rates do not exceed off-diagonal ones; the bound's
    /// assumptions fail although a value is still computed.
    Misordered,
    /// The small-`μT` Taylor form was used.
    Taylor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub flags: Vec<BoundFlag>,
}

impl Bound {
    pub fn is_infinite(&self) -> bool {
        self.flags.contains(&BoundFlag::Infinite)
    }
}

/// `(k²/n)·(1 − e^{−μ₁T}) / (e^{−μ₂T} − e^{−μ₁T})²`.
pub fn binary_bound_exact(inputs: &SimplifiedTheoryInputs) -> f64 {
    let (e1, e2) = ((-inputs.mu1 * inputs.horizon).exp(), (-inputs.mu2 * inputs.horizon).exp());
    let k2 = (inputs.k * inputs.k) as f64;
    k2 / inputs.n as f64 * (1.0 - e1) / (e2 - e1).powi(2)
}

/// `(k²/(nT))·μ₁/(μ₁ − μ₂)²`.
pub fn binary_bound_taylor(inputs: &SimplifiedTheoryInputs) -> f64 {
    inputs.scale() * inputs.mu1 / (inputs.mu1 - inputs.mu2).powi(2)
}

/// Misclustering-rate bound for clustering on `A`, using the Taylor form
/// when `μ₁T ≤` [`TAYLOR_THRESHOLD`].
pub fn binary_bound(inputs: &SimplifiedTheoryInputs) -> Result<Bound> {
    inputs.check()?;
    let mut flags = Vec::new();
    if inputs.mu1 == inputs.mu2 {
        flags.push(BoundFlag::Infinite);
        return Ok(Bound { value: f64::INFINITY, flags });
    }
    if inputs.mu1 < inputs.mu2 {
        flags.push(BoundFlag::Misordered);
    }
    let value = if inputs.mu1 * inputs.horizon <= TAYLOR_THRESHOLD {
        flags.push(BoundFlag::Taylor);
        binary_bound_taylor(inputs)
    } else {
        binary_bound_exact(inputs)
    };
    if !value.is_finite() {
        flags.push(BoundFlag::Infinite);
    }
    Ok(Bound { value, flags })
}

fn weighted_with(inputs: &SimplifiedTheoryInputs, numerator: f64) -> Result<Bound> {
    inputs.check()?;
    let (nu1, nu2) = (inputs.nu1(), inputs.nu2());
    let mut flags = Vec::new();
    if nu1 == nu2 {
        flags.push(BoundFlag::Infinite);
        return Ok(Bound { value: f64::INFINITY, flags });
    }
    if nu1 < nu2 {
        flags.push(BoundFlag::Misordered);
    }
    Ok(Bound { value: inputs.scale() * numerator / (nu1 - nu2).powi(2), flags })
}

/// `(k²/(nT))·σ₁²/(ν₁ − ν₂)²` with per-unit-time `ν`, `σ²`.
pub fn weighted_bound(inputs: &SimplifiedTheoryInputs) -> Result<Bound> {
    weighted_with(inputs, inputs.sigma1_sq())
}

/// `(k²/(nT))·(σ₁² + σ₂²)/(ν₁ − ν₂)²`, the form used to compare against the
/// binary bound.
pub fn weighted_bound_comparison(inputs: &SimplifiedTheoryInputs) -> Result<Bound> {
    weighted_with(inputs, inputs.sigma1_sq() + inputs.sigma2_sq())
}

/// Noise constants `s = √T max_a √(Σ_b |b| μ_ab/(1−m_ab)³)` and
/// `s₁ = √T max_ab √(μ_ab/(1−m_ab)³)`.
pub fn noise_constants(spec: &ChipModelSpec, block_sizes: &[usize]) -> Result<(f64, f64)> {
    spec.validate()?;
    let k = spec.k;
    if block_sizes.len() != k {
        return domain(format!("expected {k} block sizes, got {}", block_sizes.len()));
    }
    if !spec.nonstationary_pairs().is_empty() {
        return domain("noise constants need stationary parameters");
    }
    let m = spec.m();
    let var = |a: usize, b: usize| spec.mu.get(a, b) / (1.0 - m.get(a, b)).powi(3);
    let mut s_sq: f64 = 0.0;
    let mut s1_sq: f64 = 0.0;
    for a in 0..k {
        let row: f64 = (0..k).map(|b| block_sizes[b] as f64 * var(a, b)).sum();
        s_sq = s_sq.max(row);
        for b in 0..k {
            s1_sq = s1_sq.max(var(a, b));
        }
    }
    let root_t = spec.horizon.sqrt();
    Ok((root_t * s_sq.sqrt(), root_t * s1_sq.sqrt()))
}

/// Noise constants of the two-value model with blocks of size `n/k`.
pub fn noise_constants_simplified(inputs: &SimplifiedTheoryInputs) -> Result<(f64, f64)> {
    inputs.check()?;
    let block = inputs.n as f64 / inputs.k as f64;
    let (v1, v2) = (inputs.sigma1_sq(), inputs.sigma2_sq());
    let row = block * (v1 + (inputs.k - 1) as f64 * v2);
    let largest = if inputs.k > 1 { v1.max(v2) } else { v1 };
    let root_t = inputs.horizon.sqrt();
    Ok((root_t * row.sqrt(), root_t * largest.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopulationMatrix {
    /// `E[A]`.
    Binary,
    /// `E[N]`.
    Weighted,
}

/// Smallest nonzero population eigenvalue in magnitude:
/// `(n/k)(e^{−μ₂T} − e^{−μ₁T})` for `E[A]`, `(n/k)(ν₁ − ν₂)T` for `E[N]`.
pub fn population_eigen(inputs: &SimplifiedTheoryInputs, matrix: PopulationMatrix) -> Result<f64> {
    inputs.check()?;
    let scale = inputs.n as f64 / inputs.k as f64;
    let t = inputs.horizon;
    Ok(match matrix {
        PopulationMatrix::Binary => scale * ((-inputs.mu2 * t).exp() - (-inputs.mu1 * t).exp()),
        PopulationMatrix::Weighted => scale * (inputs.nu1() - inputs.nu2()) * t,
    })
}
