//! Scaling-law planning, fitting and analysis.
//!
//! Experiment records `(N, D, L)` are fit to `L(N, D) = A / N^alpha + B / D^beta + E`
//! by minimizing a Huber penalty on log-loss residuals with multistart L-BFGS.
//! Fitted laws yield closed-form compute-optimal allocations under the nominal
//! FLOP model `C = xi N D`, and nonparametric bootstrap resampling gives
//! confidence intervals for every coefficient and derived quantity.

pub mod bootstrap;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod flops;
pub mod frontier;
pub mod law;
pub mod lbfgs;
pub mod plot;
pub mod report;
mod serde_util;
pub mod synth;

pub use bootstrap::{bootstrap_laws, ci_basic, resample, BootstrapOptions, BootstrapSummary};
pub use cli::run_cli;
pub use error::{Error, Result};
pub use experiment::{filter_by_arch, parse_records, training_budget, ExperimentDataset, ExperimentRecord};
pub use fit::{fit, loo_cv, CvOutcome, FitConfig, FitResult, InitPoint};
pub use flops::{xi_from_mix, xi_preset, ArchDescriptor, ArchFamily, LayerMix, LayerPair, XiPreset};
pub use frontier::{derive_frontier, isoflop_plan, parse_budgets, ComputeFrontier, IsoFlopPlan};
pub use law::{eval_law, huber, objective, objective_gradient, FitCoords, OffsetMode, ScalingLaw};
pub use plot::{render_plot, PlotInput, PlotKind, PlotSpec};
pub use report::{format_sig, render_table, render_table_csv};
pub use synth::{generate_synthetic, Sampling, SyntheticSpec};
