//! The two-term power-law ansatz `L(N, D) = A / N^alpha + B / D^beta + E`,
//! the robust log-space fit objective, and its analytic gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentDataset;

/// Fitted scaling-law coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingLaw {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ScalingLaw {
    pub fn new(a: f64, b: f64, e: f64, alpha: f64, beta: f64) -> Result<Self> {
        let law = ScalingLaw { a, b, e, alpha, beta };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(nonneg(self.a) && nonneg(self.b) && nonneg(self.e)) {
            return Err(Error::InvalidArgument(format!("prefactors must be non-negative: {self:?}")));
        }
        if !(pos(self.alpha) && pos(self.beta)) {
            return Err(Error::InvalidArgument(format!("exponents must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == 0.0 && self.b == 0.0 && self.e == 0.0
    }

    /// `log L(N, D)` from log-space inputs. Zero terms drop out of the sum.
    pub fn log_predict(&self, log_n: f64, log_d: f64) -> Result<f64> {
        if self.is_degenerate() {
            return Err(Error::DegenerateLaw);
        }
        let mut terms = [f64::NEG_INFINITY; 3];
        if self.a > 0.0 {
            terms[0] = self.a.ln() - self.alpha * log_n;
        }
        if self.b > 0.0 {
            terms[1] = self.b.ln() - self.beta * log_d;
        }
        if self.e > 0.0 {
            terms[2] = self.e.ln();
        }
        Ok(log_sum_exp(&terms))
    }

    pub fn eval(&self, n: f64, d: f64) -> Result<f64> {
        eval_law(self, n, d)
    }
}

/// How the offset `E` enters a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetMode {
    FixedZero,
    Free,
}

impl OffsetMode {
    /// Number of internal fit coordinates.
    pub fn dim(self) -> usize {
        match self {
            OffsetMode::FixedZero => 4,
            OffsetMode::Free => 5,
        }
    }
}

/// Unconstrained fit coordinates `(log A, log B, alpha, beta, log E)`.
/// `log_e` is `None` when the offset is fixed to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitCoords {
    pub log_a: f64,
    pub log_b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub log_e: Option<f64>,
}

impl FitCoords {
    pub fn mode(&self) -> OffsetMode {
        if self.log_e.is_some() {
            OffsetMode::Free
        } else {
            OffsetMode::FixedZero
        }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        FitCoords { log_a: x[0], log_b: x[1], alpha: x[2], beta: x[3], log_e: x.get(4).copied() }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.log_a, self.log_b, self.alpha, self.beta];
        v.extend(self.log_e);
        v
    }

    /// Law with these coordinates. Exponents are not checked.
    pub fn to_law(&self) -> ScalingLaw {
        ScalingLaw { a: self.log_a.exp(), b: self.log_b.exp(), e: self.log_e.map_or(0.0, f64::exp), alpha: self.alpha, beta: self.beta }
    }

    pub fn from_law(law: &ScalingLaw, mode: OffsetMode) -> Self {
        FitCoords {
            log_a: law.a.ln(),
            log_b: law.b.ln(),
            alpha: law.alpha,
            beta: law.beta,
            log_e: match mode {
                OffsetMode::FixedZero => None,
                OffsetMode::Free => Some(law.e.ln()),
            },
        }
    }
}

/// Numerically stable `log(sum(exp(t)))`; `-inf` entries are ignored.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `A N^-alpha + B D^-beta + E` for `N, D >= 1`.
pub fn eval_law(law: &ScalingLaw, n: f64, d: f64) -> Result<f64> {
    if !(n >= 1.0 && d >= 1.0 && n.is_finite() && d.is_finite()) {
        return Err(Error::InvalidArgument(format!("eval_law needs finite N, D >= 1, got N={n}, D={d}")));
    }
    Ok(law.log_predict(n.ln(), d.ln())?.exp())
}

/// Huber penalty: quadratic within `delta` of zero, linear beyond.
pub fn huber(delta: f64, r: f64) -> f64 {
    let abs = r.abs();
    if abs <= delta {
        0.5 * r * r
    } else {
        delta * (abs - 0.5 * delta)
    }
}

/// Derivative of [`huber`] with respect to `r`. At `|r| = delta` the linear
/// branch is used; both branches give `+-delta` there.
pub fn huber_derivative(delta: f64, r: f64) -> f64 {
    if r.abs() < delta {
        r
    } else {
        delta * r.signum()
    }
}

/// Sum of Huber penalties on the log-loss residuals.
pub fn objective(law: &ScalingLaw, dataset: &ExperimentDataset, delta: f64) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for r in &dataset.records {
        let pred = law.log_predict((r.model_params as f64).ln(), (r.train_tokens as f64).ln())?;
        total += huber(delta, pred - r.test_loss.ln());
    }
    Ok(total)
}

/// Analytic gradient of [`objective`] in internal coordinates. Returns 4
/// components with the offset fixed at zero, 5 with it free.
pub fn objective_gradient(coords: &FitCoords, dataset: &ExperimentDataset, delta: f64) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let data = LogData::from_dataset(dataset);
    let x = coords.to_vec();
    let mut grad = vec![0.0; x.len()];
    data.value_and_gradient(&x, delta, &mut grad);
    Ok(grad)
}

/// Log-transformed observations `(log N, log D, log L)` for fast repeated
/// objective evaluation.
#[derive(Debug, Clone)]
pub(crate) struct LogData {
    pub rows: Vec<[f64; 3]>,
}

impl LogData {
    pub fn from_dataset(dataset: &ExperimentDataset) -> Self {
        LogData {
            rows: dataset.records.iter().map(|r| [(r.model_params as f64).ln(), (r.train_tokens as f64).ln(), r.test_loss.ln()]).collect(),
        }
    }

    /// Objective and gradient at internal coordinates `x` (length 4 or 5).
    pub fn value_and_gradient(&self, x: &[f64], delta: f64, grad: &mut [f64]) -> f64 {
        let (log_a, log_b, alpha, beta) = (x[0], x[1], x[2], x[3]);
        let log_e = x.get(4).copied();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for &[log_n, log_d, log_l] in &self.rows {
            let t_a = log_a - alpha * log_n;
            let t_b = log_b - beta * log_d;
            let t_e = log_e.unwrap_or(f64::NEG_INFINITY);
            let max = t_a.max(t_b).max(t_e);
            let (e_a, e_b, e_e) = ((t_a - max).exp(), (t_b - max).exp(), (t_e - max).exp());
            let sum = e_a + e_b + e_e;
            let pred = max + sum.ln();
            let r = pred - log_l;
            total += huber(delta, r);

            let psi = huber_derivative(delta, r);
            let (w_a, w_b) = (e_a / sum, e_b / sum);
            grad[0] += psi * w_a;
            grad[1] += psi * w_b;
            grad[2] -= psi * w_a * log_n;
            grad[3] -= psi * w_b * log_d;
            if log_e.is_some() {
                grad[4] += psi * e_e / sum;
            }
        }
        total
    }
}
