//! Seeded synthetic experiment generator used to validate fits end to end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentDataset, ExperimentRecord};
use crate::law::{eval_law, ScalingLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `log N` and `log D` drawn uniformly over the ranges.
    LogUniform,
    /// Log-spaced model sizes on the iso-FLOP curve of each budget.
    IsoflopGrid,
}

fn default_arch() -> String {
    "synthetic".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub law: ScalingLaw,
    pub n_points: usize,
    #[serde(rename = "N_range")]
    pub n_range: (u64, u64),
    #[serde(rename = "D_range")]
    pub d_range: (f64, f64),
    /// Scale of the multiplicative log-normal noise `exp(sigma * z)`.
    pub noise_sigma: f64,
    pub xi: f64,
    pub seed: u64,
    pub sampling: Sampling,
    /// Budgets for [`Sampling::IsoflopGrid`].
    #[serde(default)]
    pub budgets: Vec<f64>,
    #[serde(default = "default_arch")]
    pub arch_id: String,
}

impl SyntheticSpec {
    /// Log-uniform spec over the given ranges.
    pub fn log_uniform(law: ScalingLaw, n_points: usize, n_range: (u64, u64), d_range: (f64, f64), noise_sigma: f64, seed: u64) -> Self {
        SyntheticSpec {
            law,
            n_points,
            n_range,
            d_range,
            noise_sigma,
            xi: 6.0,
            seed,
            sampling: Sampling::LogUniform,
            budgets: Vec::new(),
            arch_id: default_arch(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        if self.law.is_degenerate() {
            return Err(Error::DegenerateLaw);
        }
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_points == 0 {
            return bad("n_points must be positive");
        }
        if !(self.n_range.0 >= 1 && self.n_range.0 < self.n_range.1) {
            return bad("N_range must satisfy 1 <= min < max");
        }
        if !(self.d_range.0 >= 1.0 && self.d_range.0 < self.d_range.1 && self.d_range.1.is_finite()) {
            return bad("D_range must satisfy 1 <= min < max");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return bad("xi must be positive");
        }
        if self.sampling == Sampling::IsoflopGrid {
            if self.budgets.is_empty() {
                return bad("isoflop_grid sampling needs at least one budget");
            }
            if self.budgets.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                return bad("budgets must be positive");
            }
        }
        Ok(())
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

/// Draws `spec.n_points` records. Losses are `L(N, D) * exp(sigma * z)` with
/// `z` standard normal, evaluated at the integer `(N, D)` actually stored.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<ExperimentDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut sizes: Vec<(u64, u64)> = Vec::with_capacity(spec.n_points);
    match spec.sampling {
        Sampling::LogUniform => {
            let (n_lo, n_hi) = (spec.n_range.0 as f64, spec.n_range.1 as f64);
            for _ in 0..spec.n_points {
                let n = log_uniform(&mut rng, n_lo, n_hi).round().clamp(n_lo, n_hi) as u64;
                let d = log_uniform(&mut rng, spec.d_range.0, spec.d_range.1).round().clamp(1.0, spec.d_range.1) as u64;
                sizes.push((n, d));
            }
        }
        Sampling::IsoflopGrid => {
            let k = spec.budgets.len();
            let (n_lo, n_hi) = ((spec.n_range.0 as f64).ln(), (spec.n_range.1 as f64).ln());
            for (b, &budget) in spec.budgets.iter().enumerate() {
                let m = spec.n_points / k + usize::from(b < spec.n_points % k);
                for j in 0..m {
                    let t = if m == 1 { 0.5 } else { j as f64 / (m - 1) as f64 };
                    let n = (n_lo + t * (n_hi - n_lo)).exp().round().max(1.0) as u64;
                    let d = (budget / (spec.xi * n as f64)).round();
                    if d < 1.0 {
                        return Err(Error::BudgetTooSmall { budget, params: n, tokens: budget / (spec.xi * n as f64) });
                    }
                    sizes.push((n, d as u64));
                }
            }
        }
    }
    let mut records = Vec::with_capacity(sizes.len());
    for (n, d) in sizes {
        let z: f64 = rng.sample(StandardNormal);
        let loss = eval_law(&spec.law, n as f64, d as f64)? * (spec.noise_sigma * z).exp();
        records.push(ExperimentRecord::new(spec.arch_id.clone(), n, d, spec.xi, loss));
    }
    ExperimentDataset::from_records(records)
}
