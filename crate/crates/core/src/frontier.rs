//! Compute-optimal allocation and loss frontier of a fitted law under
//! `C = xi N D`, plus iso-FLOP experiment planning.
//!
//! With `a = beta / (alpha + beta)`, `b = alpha / (alpha + beta)` and
//! `G = (alpha A / (beta B))^(1 / (alpha + beta))`, the loss-minimizing
//! allocation at budget `C` is `N* = G xi^-a C^a`, `D* = C^b / (G xi^b)`, and
//! the resulting loss is `E + F C^-gamma` with `gamma = alpha beta / (alpha + beta)`
//! and `F = xi^gamma (A G^-alpha + B G^beta)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentDataset, ExperimentRecord, OPTIONAL_COLUMNS, REQUIRED_COLUMNS};
use crate::law::ScalingLaw;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeFrontier {
    pub xi: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "E")]
    pub e: f64,
    /// Law the frontier was derived from; absent for frontiers built from
    /// published coefficients.
    pub source_law: Option<ScalingLaw>,
}

pub fn derive_frontier(law: &ScalingLaw, xi: f64) -> Result<ComputeFrontier> {
    law.validate()?;
    if !(law.a > 0.0 && law.b > 0.0) {
        return Err(Error::InvalidArgument("frontier needs A > 0 and B > 0".into()));
    }
    if !(xi.is_finite() && xi > 0.0) {
        return Err(Error::InvalidArgument(format!("xi must be positive, got {xi}")));
    }
    let (alpha, beta) = (law.alpha, law.beta);
    let sum = alpha + beta;
    let ln_g = ((alpha * law.a).ln() - (beta * law.b).ln()) / sum;
    let gamma = alpha * beta / sum;
    let ln_xi_gamma = gamma * xi.ln();
    let f = (law.a.ln() - alpha * ln_g + ln_xi_gamma).exp() + (law.b.ln() + beta * ln_g + ln_xi_gamma).exp();
    Ok(ComputeFrontier { xi, g: ln_g.exp(), a: beta / sum, b: alpha / sum, gamma, f, e: law.e, source_law: Some(*law) })
}

impl ComputeFrontier {
    /// Frontier from tabulated coefficients; `b = 1 - a`.
    pub fn from_coefficients(xi: f64, g: f64, a: f64, gamma: f64, f: f64, e: f64) -> Result<Self> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(xi) && pos(g) && pos(gamma) && f.is_finite() && f >= 0.0 && e.is_finite() && e >= 0.0) {
            return Err(Error::InvalidArgument("frontier coefficients out of range".into()));
        }
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidArgument(format!("allocation exponent a must lie in (0, 1), got {a}")));
        }
        Ok(ComputeFrontier { xi, g, a, b: 1.0 - a, gamma, f, e, source_law: None })
    }

    /// Compute-optimal model size `N*(C)`.
    pub fn optimal_params(&self, budget: f64) -> f64 {
        (self.g.ln() - self.a * self.xi.ln() + self.a * budget.ln()).exp()
    }

    /// Compute-optimal token count `D*(C)`.
    pub fn optimal_tokens(&self, budget: f64) -> f64 {
        (self.b * budget.ln() - self.g.ln() - self.b * self.xi.ln()).exp()
    }

    /// Loss at the optimal allocation, `E + F C^-gamma`.
    pub fn optimal_loss(&self, budget: f64) -> f64 {
        self.e + self.f * (-self.gamma * budget.ln()).exp()
    }

    pub fn row(&self, budget: f64) -> FrontierRow {
        FrontierRow {
            budget,
            optimal_params: self.optimal_params(budget),
            optimal_tokens: self.optimal_tokens(budget),
            optimal_loss: self.optimal_loss(budget),
        }
    }
}

/// `(C, N*, D*, L*)` at one budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub budget: f64,
    pub optimal_params: f64,
    pub optimal_tokens: f64,
    pub optimal_loss: f64,
}

/// Planned runs sharing one budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoFlopPlan {
    pub budget: f64,
    pub xi: f64,
    pub points: Vec<IsoFlopPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoFlopPoint {
    pub model_params: u64,
    pub train_tokens: f64,
}

pub fn isoflop_plan(budget: f64, xi: f64, model_sizes: &[u64]) -> Result<IsoFlopPlan> {
    if !(budget.is_finite() && budget > 0.0 && xi.is_finite() && xi > 0.0) {
        return Err(Error::InvalidArgument("budget and xi must be positive".into()));
    }
    let mut points = Vec::with_capacity(model_sizes.len());
    for &n in model_sizes {
        if n == 0 {
            return Err(Error::InvalidArgument("model sizes must be >= 1".into()));
        }
        let tokens = budget / (xi * n as f64);
        if tokens < 1.0 {
            return Err(Error::BudgetTooSmall { budget, params: n, tokens });
        }
        points.push(IsoFlopPoint { model_params: n, train_tokens: tokens });
    }
    Ok(IsoFlopPlan { budget, xi, points })
}

impl IsoFlopPlan {
    /// Experiment CSV with an empty `test_loss` column. Token counts are
    /// rounded to the nearest integer.
    pub fn to_csv(&self, arch_id: &str) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
        header.extend_from_slice(&OPTIONAL_COLUMNS);
        wtr.write_record(&header).expect("write to Vec");
        for p in &self.points {
            let d = p.train_tokens.round().max(1.0) as u64;
            wtr.write_record([
                arch_id.to_string(),
                p.model_params.to_string(),
                d.to_string(),
                format!("{}", self.xi),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ])
            .expect("write to Vec");
        }
        String::from_utf8(wtr.into_inner().expect("flush Vec")).expect("utf-8")
    }

    /// Records for this plan with the given losses, one per point.
    pub fn with_losses(&self, arch_id: &str, losses: &[f64]) -> Result<ExperimentDataset> {
        if losses.len() != self.points.len() {
            return Err(Error::InvalidArgument("one loss per planned point required".into()));
        }
        let records = self
            .points
            .iter()
            .zip(losses)
            .map(|(p, &l)| ExperimentRecord::new(arch_id, p.model_params, p.train_tokens.round().max(1.0) as u64, self.xi, l))
            .collect();
        ExperimentDataset::from_records(records)
    }
}

fn parse_budget(s: &str) -> Result<f64> {
    let x: f64 = s.trim().parse().map_err(|_| Error::Parse(format!("`{s}` is not a budget")))?;
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::InvalidArgument(format!("budget `{s}` must be positive")));
    }
    Ok(x)
}

/// Parses `1e16,1e17` lists and `lo..hi:k` ranges of `k` log-spaced budgets
/// including both ends. Items may be mixed: `1e15,1e16..1e19:4`.
pub fn parse_budgets(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        if let Some((range, count)) = item.split_once(':') {
            let (lo, hi) = range.split_once("..").ok_or_else(|| Error::Parse(format!("`{item}` is not a `lo..hi:k` range")))?;
            let (lo, hi) = (parse_budget(lo)?, parse_budget(hi)?);
            let k: usize = count.trim().parse().map_err(|_| Error::Parse(format!("bad count in `{item}`")))?;
            if k == 0 || (k == 1 && lo != hi) || hi < lo {
                return Err(Error::InvalidArgument(format!("`{item}` needs lo <= hi and k >= 2")));
            }
            if k == 1 {
                out.push(lo);
                continue;
            }
            let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
            for i in 0..k {
                let v = match i {
                    0 => lo,
                    i if i == k - 1 => hi,
                    i => (ln_lo + (ln_hi - ln_lo) * i as f64 / (k - 1) as f64).exp(),
                };
                out.push(v);
            }
        } else {
            out.push(parse_budget(item)?);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no budgets given".into()));
    }
    Ok(out)
}
