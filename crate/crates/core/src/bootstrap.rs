//! Nonparametric bootstrap over experiment records with basic (reflected
//! quantile) confidence intervals.
//!
//! Each resample `k` draws its indices from a ChaCha stream selected by
//! `(seed, k)`, so the summary does not depend on how resamples are scheduled
//! across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentDataset;
use crate::fit::{fit, FitConfig};
use crate::frontier::derive_frontier;
use crate::law::{OffsetMode, ScalingLaw};

/// Fraction of failed resample fits above which a summary is rejected.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub parameter_names: Vec<String>,
    pub central: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Scale on which each interval was reflected.
    pub scales: Vec<IntervalScale>,
    pub level: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub n_failed: usize,
    pub xi: f64,
    pub config: FitConfig,
    pub dataset_digest: String,
}

impl BootstrapSummary {
    /// Row `(central, lower, upper)` for a named parameter.
    pub fn get(&self, name: &str) -> Option<(f64, f64, f64)> {
        let i = self.parameter_names.iter().position(|n| n == name)?;
        Some((self.central[i], self.lower[i], self.upper[i]))
    }

    /// Table rows mirroring the `parameter, central, lower, upper` layout.
    pub fn rows(&self) -> Vec<BootstrapRow> {
        (0..self.parameter_names.len())
            .map(|i| BootstrapRow {
                parameter: self.parameter_names[i].clone(),
                central: self.central[i],
                lower: self.lower[i],
                upper: self.upper[i],
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub parameter: String,
    pub central: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub n_resamples: usize,
    pub seed: u64,
    /// FLOPs per parameter-token used for the derived frontier quantities.
    pub xi: f64,
    pub level: f64,
}

impl BootstrapOptions {
    pub fn new(n_resamples: usize, seed: u64, xi: f64) -> Self {
        BootstrapOptions { n_resamples, seed, xi, level: 0.95 }
    }
}

/// Random stream for resample `index`.
pub fn resample_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Same-size draw with replacement.
pub fn resample<R: Rng>(dataset: &ExperimentDataset, rng: &mut R) -> ExperimentDataset {
    let n = dataset.len();
    let records = (0..n).map(|_| dataset.records[rng.random_range(0..n)].clone()).collect();
    dataset.derived(records)
}

/// Empirical quantile by linear interpolation between order statistics
/// (position `p (n - 1)` in the sorted sample).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Basic bootstrap interval `(2 c - q_hi, 2 c - q_lo)`.
pub fn ci_basic(samples: &[f64], central: f64, level: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no bootstrap samples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q_lo = quantile(&sorted, (1.0 - level) / 2.0);
    let q_hi = quantile(&sorted, (1.0 + level) / 2.0);
    Ok((2.0 * central - q_hi, 2.0 * central - q_lo))
}

/// Like [`ci_basic`] but reflected in log space; requires positive inputs.
pub fn ci_basic_log(samples: &[f64], central: f64, level: f64) -> Result<(f64, f64)> {
    let logs: Vec<f64> = samples.iter().map(|s| s.ln()).collect();
    let (lo, hi) = ci_basic(&logs, central.ln(), level)?;
    Ok((lo.exp(), hi.exp()))
}

/// Bootstrapped quantities in reporting order, with their natural scales.
fn parameters(mode: OffsetMode) -> Vec<(&'static str, IntervalScale)> {
    use IntervalScale::*;
    let mut p = vec![("A", Log), ("B", Log), ("alpha", Linear), ("beta", Linear)];
    if mode == OffsetMode::Free {
        p.push(("E", Log));
    }
    p.extend([("a", Linear), ("b", Linear), ("gamma", Linear), ("F", Log), ("G", Log)]);
    p
}

fn quantities(law: &ScalingLaw, mode: OffsetMode, xi: f64) -> Result<Vec<f64>> {
    let fr = derive_frontier(law, xi)?;
    let mut v = vec![law.a, law.b, law.alpha, law.beta];
    if mode == OffsetMode::Free {
        v.push(law.e);
    }
    v.extend([fr.a, fr.b, fr.gamma, fr.f, fr.g]);
    Ok(v)
}

/// Refits the law on `n_resamples` bootstrap resamples and summarizes every
/// coefficient and derived frontier quantity with a basic interval.
///
/// Prefactors (A, B, E, F, G) are reflected on the log scale and exponents on
/// the linear scale. A log-scale quantity falls back to the linear scale when
/// its central value or any sample is zero (a snapped offset).
pub fn bootstrap_laws(dataset: &ExperimentDataset, config: &FitConfig, options: &BootstrapOptions) -> Result<BootstrapSummary> {
    if options.n_resamples == 0 {
        return Err(Error::InvalidArgument("n_resamples must be positive".into()));
    }
    if !(options.level > 0.0 && options.level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {}", options.level)));
    }
    let mode = config.offset_mode;
    let central_fit = fit(dataset, config)?;
    let central = quantities(&central_fit.law, mode, options.xi)?;

    let draws: Vec<Option<Vec<f64>>> = (0..options.n_resamples)
        .into_par_iter()
        .map(|k| {
            let mut rng = resample_stream(options.seed, k as u64);
            let sample = resample(dataset, &mut rng);
            let result = fit(&sample, config).ok()?;
            quantities(&result.law, mode, options.xi).ok()
        })
        .collect();

    let successes: Vec<&Vec<f64>> = draws.iter().flatten().collect();
    let n_failed = options.n_resamples - successes.len();
    if n_failed as f64 > MAX_FAILED_FRACTION * options.n_resamples as f64 || successes.is_empty() {
        return Err(Error::BootstrapUnreliable { failed: n_failed, total: options.n_resamples });
    }

    let params = parameters(mode);
    let mut summary = BootstrapSummary {
        parameter_names: params.iter().map(|(n, _)| n.to_string()).collect(),
        central: central.clone(),
        lower: Vec::with_capacity(params.len()),
        upper: Vec::with_capacity(params.len()),
        scales: Vec::with_capacity(params.len()),
        level: options.level,
        n_resamples: options.n_resamples,
        seed: options.seed,
        n_failed,
        xi: options.xi,
        config: config.clone(),
        dataset_digest: dataset.source_digest.clone(),
    };
    for (j, (_, scale)) in params.iter().enumerate() {
        let samples: Vec<f64> = successes.iter().map(|s| s[j]).collect();
        let positive = central[j] > 0.0 && samples.iter().all(|&s| s > 0.0);
        let scale = if *scale == IntervalScale::Log && positive { IntervalScale::Log } else { IntervalScale::Linear };
        let (lo, hi) = match scale {
            IntervalScale::Log => ci_basic_log(&samples, central[j], options.level)?,
            IntervalScale::Linear => ci_basic(&samples, central[j], options.level)?,
        };
        summary.lower.push(lo);
        summary.upper.push(hi);
        summary.scales.push(scale);
    }
    Ok(summary)
}
