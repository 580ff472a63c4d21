//! Multistart robust fits of the scaling-law ansatz and leave-one-out
//! selection of fit hyperparameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentDataset;
use crate::law::{objective, FitCoords, LogData, OffsetMode, ScalingLaw};
use crate::lbfgs::{self, LbfgsSettings, Termination};

/// Offsets below this fraction of the smallest observed loss are reported as zero.
pub const OFFSET_SNAP_FRACTION: f64 = 1e-12;

/// Starting point in internal coordinates `[log A, log B, alpha, beta, log E]`.
/// A `null` log E means `log(0.5 * min loss)` of the dataset being fit; it is
/// ignored when the offset is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitPoint(pub f64, pub f64, pub f64, pub f64, pub Option<f64>);

impl InitPoint {
    fn coords(&self, mode: OffsetMode, min_loss: f64) -> FitCoords {
        FitCoords {
            log_a: self.0,
            log_b: self.1,
            alpha: self.2,
            beta: self.3,
            log_e: match mode {
                OffsetMode::FixedZero => None,
                OffsetMode::Free => Some(self.4.unwrap_or_else(|| (0.5 * min_loss).ln())),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub delta: f64,
    pub offset_mode: OffsetMode,
    pub init_grid: Vec<InitPoint>,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub history_size: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            delta: 1e-3,
            offset_mode: OffsetMode::FixedZero,
            init_grid: FitConfig::default_grid(),
            max_iterations: 1000,
            gradient_tolerance: 1e-10,
            history_size: 10,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn new(delta: f64, offset_mode: OffsetMode) -> Self {
        FitConfig { delta, offset_mode, ..FitConfig::default() }
    }

    /// Cartesian grid: exponents in {0.25, 0.75, 1.25}, log-prefactors in {-5, 0, 5}.
    pub fn default_grid() -> Vec<InitPoint> {
        let exponents = [0.25, 0.75, 1.25];
        let log_prefactors = [-5.0, 0.0, 5.0];
        let mut grid = Vec::with_capacity(81);
        for &alpha in &exponents {
            for &beta in &exponents {
                for &log_a in &log_prefactors {
                    for &log_b in &log_prefactors {
                        grid.push(InitPoint(log_a, log_b, alpha, beta, None));
                    }
                }
            }
        }
        grid
    }

    /// Candidate grid for cross-validation: delta in {1e-4, 1e-3, 1e-2, 1e-1}
    /// crossed with both offset modes.
    pub fn default_candidates() -> Vec<FitConfig> {
        Self::candidates(&[1e-4, 1e-3, 1e-2, 1e-1], &[OffsetMode::FixedZero, OffsetMode::Free])
    }

    pub fn candidates(deltas: &[f64], modes: &[OffsetMode]) -> Vec<FitConfig> {
        deltas.iter().flat_map(|&d| modes.iter().map(move |&m| FitConfig::new(d, m))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {}", self.delta)));
        }
        if self.init_grid.is_empty() {
            return Err(Error::InvalidArgument("init_grid is empty".into()));
        }
        if self.history_size == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidArgument("history_size and max_iterations must be positive".into()));
        }
        if self.gradient_tolerance.is_nan() || self.gradient_tolerance <= 0.0 {
            return Err(Error::InvalidArgument("gradient_tolerance must be positive".into()));
        }
        Ok(())
    }

    fn lbfgs_settings(&self) -> LbfgsSettings {
        LbfgsSettings {
            history_size: self.history_size,
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            ..LbfgsSettings::default()
        }
    }
}

/// Per-start optimizer diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartDiagnostics {
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub law: ScalingLaw,
    pub objective: f64,
    pub converged: bool,
    pub chosen_init_index: usize,
    /// Final objective per start; `null` (infinite) for starts that ended at an invalid law.
    #[serde(with = "crate::serde_util::vec_nonfinite_as_null")]
    pub per_init_objectives: Vec<f64>,
    /// The fitted offset fell below the snap threshold and was reported as zero.
    pub offset_snapped: bool,
    pub diagnostics: StartDiagnostics,
    pub config: FitConfig,
    pub dataset_digest: String,
    pub n_records: usize,
}

struct StartOutcome {
    law: Option<ScalingLaw>,
    objective: f64,
    snapped: bool,
    converged: bool,
    diagnostics: StartDiagnostics,
}

/// Checks the record count and that both N and D vary.
pub fn check_identifiable(dataset: &ExperimentDataset, mode: OffsetMode) -> Result<()> {
    let needed = mode.dim();
    if dataset.len() < needed {
        return Err(Error::TooFewRecords { needed, got: dataset.len() });
    }
    let first = &dataset.records[0];
    if dataset.records.iter().all(|r| r.model_params == first.model_params) {
        return Err(Error::Unidentifiable("all records share the same model size N".into()));
    }
    if dataset.records.iter().all(|r| r.train_tokens == first.train_tokens) {
        return Err(Error::Unidentifiable("all records share the same token count D".into()));
    }
    Ok(())
}

fn run_start(data: &LogData, dataset: &ExperimentDataset, config: &FitConfig, init: &InitPoint, min_loss: f64) -> StartOutcome {
    let x0 = init.coords(config.offset_mode, min_loss).to_vec();
    let delta = config.delta;
    let out = lbfgs::minimize(|x, g| data.value_and_gradient(x, delta, g), &x0, &config.lbfgs_settings());
    let diagnostics = StartDiagnostics {
        iterations: out.iterations,
        evaluations: out.evaluations,
        termination: out.termination,
        gradient_norm: out.gradient_norm(),
    };
    let coords = FitCoords::from_slice(&out.x);
    let mut law = coords.to_law();
    let mut snapped = false;
    if let Some(log_e) = coords.log_e {
        if log_e < (OFFSET_SNAP_FRACTION * min_loss).ln() {
            law.e = 0.0;
            snapped = true;
        }
    }
    let valid = out.value.is_finite() && law.validate().is_ok() && !law.is_degenerate();
    let objective = if valid { objective(&law, dataset, delta).unwrap_or(f64::INFINITY) } else { f64::INFINITY };
    StartOutcome { law: valid.then_some(law), objective, snapped, converged: out.converged(), diagnostics }
}

/// Fits the ansatz from every start of `config.init_grid` and keeps the run
/// with the lowest objective (ties go to the lowest start index).
pub fn fit(dataset: &ExperimentDataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    check_identifiable(dataset, config.offset_mode)?;
    let data = LogData::from_dataset(dataset);
    let min_loss = dataset.min_loss();

    let outcomes: Vec<StartOutcome> = config.init_grid.par_iter().map(|init| run_start(&data, dataset, config, init, min_loss)).collect();

    let mut best: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if o.law.is_some() && best.is_none_or(|b| o.objective < outcomes[b].objective) {
            best = Some(i);
        }
    }
    let Some(best) = best else {
        let mut terminations: Vec<String> = outcomes.iter().map(|o| format!("{:?}", o.diagnostics.termination)).collect();
        terminations.dedup();
        return Err(Error::NoConvergence {
            starts: outcomes.len(),
            diagnostics: format!("every start ended at an invalid law; terminations: {}", terminations.join(", ")),
        });
    };
    let per_init_objectives = outcomes.iter().map(|o| o.objective).collect();
    let chosen = &outcomes[best];
    Ok(FitResult {
        law: chosen.law.expect("chosen start is valid"),
        objective: chosen.objective,
        converged: chosen.converged,
        chosen_init_index: best,
        per_init_objectives,
        offset_snapped: chosen.snapped,
        diagnostics: chosen.diagnostics.clone(),
        config: config.clone(),
        dataset_digest: dataset.source_digest.clone(),
        n_records: dataset.len(),
    })
}

/// Mean held-out `|log L_hat - log L|` and the chosen candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub chosen_index: usize,
    pub chosen: FitConfig,
    /// Per-candidate mean leave-one-out error; `null` (infinite) for failed candidates.
    #[serde(with = "crate::serde_util::vec_nonfinite_as_null")]
    pub scores: Vec<f64>,
}

/// Dataset without record `i`.
pub fn leave_out(dataset: &ExperimentDataset, i: usize) -> ExperimentDataset {
    let mut records = dataset.records.clone();
    records.remove(i);
    dataset.derived(records)
}

fn loo_score(dataset: &ExperimentDataset, config: &FitConfig) -> f64 {
    let errors: Option<Vec<f64>> = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let result = fit(&leave_out(dataset, i), config).ok()?;
            let r = &dataset.records[i];
            let pred = result.law.log_predict((r.model_params as f64).ln(), (r.train_tokens as f64).ln()).ok()?;
            Some((pred - r.test_loss.ln()).abs())
        })
        .collect();
    match errors {
        Some(e) => e.iter().sum::<f64>() / e.len() as f64,
        None => f64::INFINITY,
    }
}

/// Leave-one-out cross-validation over candidate fit configurations.
pub fn loo_cv(dataset: &ExperimentDataset, candidates: &[FitConfig]) -> Result<CvOutcome> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no cross-validation candidates".into()));
    }
    if dataset.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: dataset.len() });
    }
    for c in candidates {
        c.validate()?;
    }
    let scores: Vec<f64> = candidates.iter().map(|c| loo_score(dataset, c)).collect();
    let mut chosen_index = None;
    for (i, s) in scores.iter().enumerate() {
        if s.is_finite() && chosen_index.is_none_or(|b: usize| *s < scores[b]) {
            chosen_index = Some(i);
        }
    }
    let chosen_index = chosen_index.ok_or(Error::AllCandidatesFailed(candidates.len()))?;
    Ok(CvOutcome { chosen_index, chosen: candidates[chosen_index].clone(), scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ExperimentRecord;
    use crate::law::eval_law;

    fn grid_dataset(law: &ScalingLaw) -> ExperimentDataset {
        let mut records = Vec::new();
        for i in 0..5 {
            for j in 0..4 {
                let n = (1e4 * 10f64.powf(i as f64)).round() as u64;
                let d = (1e7 * 10f64.powf(j as f64)).round() as u64;
                records.push(ExperimentRecord::new("b", n, d, 6.0, eval_law(law, n as f64, d as f64).unwrap()));
            }
        }
        ExperimentDataset::from_records(records).unwrap()
    }

    #[test]
    fn default_grid_size() {
        let g = FitConfig::default_grid();
        assert_eq!(g.len(), 81);
        assert!(g.iter().all(|p| p.4.is_none()));
        assert_eq!(FitConfig::default_candidates().len(), 8);
    }

    #[test]
    fn recovers_exact_law() {
        let law = ScalingLaw::new(1.27, 0.202, 0.0, 0.909, 0.379).unwrap();
        let ds = grid_dataset(&law);
        let res = fit(&ds, &FitConfig::default()).unwrap();
        assert!((res.law.alpha - law.alpha).abs() < 1e-6, "{:?}", res.law);
        assert!((res.law.beta - law.beta).abs() < 1e-6);
        assert!(res.objective <= 1e-10);
        assert!(res.per_init_objectives.iter().all(|&o| res.objective <= o));
        let recomputed = objective(&res.law, &ds, res.config.delta).unwrap();
        assert!((recomputed - res.objective).abs() <= 1e-10 * res.objective.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn unidentifiable_when_n_constant() {
        let records = (0..6).map(|j| ExperimentRecord::new("b", 1000, 10u64.pow(j + 3), 6.0, 0.1)).collect();
        let ds = ExperimentDataset::from_records(records).unwrap();
        assert!(matches!(fit(&ds, &FitConfig::default()), Err(Error::Unidentifiable(_))));
    }

    #[test]
    fn too_few_records() {
        let law = ScalingLaw::new(1.0, 2.0, 0.0, 0.5, 0.6).unwrap();
        let records = [(10u64, 1000u64), (1000, 100), (100, 100_000), (10_000, 10_000)]
            .iter()
            .map(|&(n, d)| ExperimentRecord::new("b", n, d, 6.0, eval_law(&law, n as f64, d as f64).unwrap()))
            .collect();
        let ds = ExperimentDataset::from_records(records).unwrap();
        assert!(fit(&ds, &FitConfig::default()).is_ok());
        let free = FitConfig::new(1e-3, OffsetMode::Free);
        assert_eq!(fit(&ds, &free).unwrap_err(), Error::TooFewRecords { needed: 5, got: 4 });
    }

    #[test]
    fn invalid_config() {
        let law = ScalingLaw::new(1.0, 1.0, 0.0, 0.5, 0.5).unwrap();
        let ds = grid_dataset(&law);
        let mut c = FitConfig::default();
        c.init_grid.clear();
        assert!(matches!(fit(&ds, &c), Err(Error::InvalidArgument(_))));
        assert!(matches!(fit(&ds, &FitConfig::new(0.0, OffsetMode::FixedZero)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn free_offset_recovers_e() {
        let law = ScalingLaw::new(5.0, 40.0, 0.02, 0.5, 0.35).unwrap();
        let ds = grid_dataset(&law);
        let res = fit(&ds, &FitConfig::new(1e-3, OffsetMode::Free)).unwrap();
        assert!((res.law.e - 0.02).abs() < 1e-5, "{:?}", res.law);
        assert!(!res.offset_snapped);
    }

    #[test]
    fn free_offset_snaps_tiny_e() {
        let law = ScalingLaw::new(1.27, 0.202, 0.0, 0.909, 0.379).unwrap();
        let res = fit(&grid_dataset(&law), &FitConfig::new(1e-3, OffsetMode::Free)).unwrap();
        assert!(res.law.e <= 1e-9 * grid_dataset(&law).min_loss() || res.offset_snapped, "{:?}", res.law);
    }

    #[test]
    fn fit_result_json_round_trip() {
        let law = ScalingLaw::new(1.0, 2.0, 0.0, 0.5, 0.6).unwrap();
        let res = fit(&grid_dataset(&law), &FitConfig::default()).unwrap();
        let json = serde_json::to_string(&res).unwrap();
        let back: FitResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.law, res.law);
        assert_eq!(back.config, res.config);
    }

    #[test]
    fn config_json_has_grid_tuples() {
        let json = serde_json::to_value(FitConfig::default()).unwrap();
        assert_eq!(json["init_grid"][0], serde_json::json!([-5.0, -5.0, 0.25, 0.25, null]));
        assert_eq!(json["offset_mode"], "fixed_zero");
    }
}
