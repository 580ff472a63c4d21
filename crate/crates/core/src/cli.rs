//! `scalaw` command-line interface.
//!
//! Exit status is 0 on success, 2 on usage errors and 1 on domain errors, which
//! are reported on stderr as `{"error": <kind>, "message": <text>}`. Every JSON
//! artifact carries a `provenance` block with input basenames, their SHA-256
//! digests, the configuration and the seed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bootstrap::{bootstrap_laws, BootstrapOptions, BootstrapSummary};
use crate::error::{Error, Result};
use crate::experiment::{digest_hex, filter_by_arch, parse_records, ExperimentDataset};
use crate::fit::{fit, loo_cv, CvOutcome, FitConfig, FitResult, InitPoint};
use crate::flops::parse_xi;
use crate::frontier::{derive_frontier, isoflop_plan, parse_budgets, ComputeFrontier, FrontierRow};
use crate::law::{OffsetMode, ScalingLaw};
use crate::plot::{render_plot, PlotInput, PlotKind, PlotSpec};
use crate::report::{render_frontier_table, render_table, render_table_csv};
use crate::synth::{generate_synthetic, SyntheticSpec};

/// Environment variable consulted for the default seed.
pub const SEED_ENV: &str = "SCALAW_SEED";

#[derive(Debug, Parser)]
#[command(name = "scalaw", version, about = "Fit and analyze two-term neural scaling laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate an experiment CSV and write it in normalized form.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        arch: Option<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Fit a scaling law to experiment records.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Choose delta and offset mode by leave-one-out cross-validation.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated Huber thresholds.
        #[arg(long, default_value = "1e-4,1e-3,1e-2,1e-1")]
        deltas: String,
        /// Comma-separated offset modes (`zero`, `free`).
        #[arg(long, default_value = "zero,free")]
        offsets: String,
        #[command(flatten)]
        out: Output,
    },
    /// Bootstrap confidence intervals for the law and its frontier.
    Bootstrap {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Number of resamples.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Defaults to $SCALAW_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        /// FLOPs per parameter-token (number or preset); defaults to the records' shared value.
        #[arg(long)]
        xi: Option<String>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Also write the interval table as CSV.
        #[arg(long)]
        table_csv: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Compute-optimal frontier of a fitted law.
    Frontier {
        /// Fit output or bare law JSON.
        #[arg(long)]
        law: PathBuf,
        #[arg(long)]
        xi: String,
        /// `1e16,1e17` or `lo..hi:k`.
        #[arg(long, default_value = "1e16..1e19:7")]
        budgets: String,
        #[command(flatten)]
        out: Output,
    },
    /// Iso-FLOP run plan as an experiment CSV with an empty loss column.
    Plan {
        #[arg(long)]
        budget: f64,
        #[arg(long)]
        xi: String,
        /// `1e5,3e5,1e6` or `lo..hi:k`; rounded to integers.
        #[arg(long)]
        model_sizes: String,
        #[arg(long, default_value = "planned")]
        arch: String,
        #[command(flatten)]
        out: Output,
    },
    /// Generate a synthetic dataset from a spec JSON.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the seed in the spec file.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: Output,
    },
    /// Render an SVG chart.
    Plot {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Comma-separated CSV datasets and frontier/fit/law JSON files.
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<PathBuf>,
        /// Required when a bare law is plotted.
        #[arg(long)]
        xi: Option<String>,
        #[arg(long, value_parser = parse_range)]
        x_range: Option<(f64, f64)>,
        #[arg(long, value_parser = parse_range)]
        y_range: Option<(f64, f64)>,
        /// Panel budgets for isoflop_panels.
        #[arg(long)]
        budgets: Option<String>,
        #[arg(long)]
        title: Option<String>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Kind {
    ComputeFrontier,
    IsoflopPanels,
    Allocation,
    DataScaling,
    #[value(name = "heatmap_2d")]
    Heatmap2d,
}

impl From<Kind> for PlotKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::ComputeFrontier => PlotKind::ComputeFrontier,
            Kind::IsoflopPanels => PlotKind::IsoflopPanels,
            Kind::Allocation => PlotKind::Allocation,
            Kind::DataScaling => PlotKind::DataScaling,
            Kind::Heatmap2d => PlotKind::Heatmap2d,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Offset {
    Zero,
    Free,
}

impl From<Offset> for OffsetMode {
    fn from(o: Offset) -> Self {
        match o {
            Offset::Zero => OffsetMode::FixedZero,
            Offset::Free => OffsetMode::Free,
        }
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// Keep only records with this arch_id.
    #[arg(long)]
    arch: Option<String>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, value_enum, default_value = "zero")]
    offset: Offset,
    /// JSON array of `[log A, log B, alpha, beta, log E or null]` starts.
    #[arg(long)]
    init_grid: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Output {
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad number `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad number `{hi}`"))?;
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub config: Value,
}

/// Files read during one command, with their digests.
#[derive(Default)]
struct Inputs(Vec<InputDigest>);

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        self.0.push(InputDigest { file, sha256: digest_hex(&bytes) });
        String::from_utf8(bytes).map_err(|_| Error::Parse(format!("{} is not UTF-8", path.display())))
    }

    fn provenance(self, command: &str, seed: Option<u64>, config: Value) -> Provenance {
        Provenance {
            tool: "scalaw".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: self.0,
            seed,
            config,
        }
    }
}

fn write_output(out: &Output, contents: &str) -> Result<()> {
    write_file(&out.out, out.force, contents)
}

fn write_file(path: &Path, force: bool, contents: &str) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::OutputExists(path.display().to_string()));
    }
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Serializes `body` with an added `provenance` field.
fn with_provenance<T: Serialize>(body: &T, provenance: &Provenance) -> String {
    let mut v = serde_json::to_value(body).expect("serializable");
    v.as_object_mut().expect("object").insert("provenance".into(), serde_json::to_value(provenance).expect("serializable"));
    to_json(&v)
}

fn load_dataset(inputs: &mut Inputs, args: &DataArgs) -> Result<ExperimentDataset> {
    let data = parse_records(&inputs.read(&args.data)?)?;
    match &args.arch {
        Some(arch) => filter_by_arch(&data, arch),
        None => Ok(data),
    }
}

fn fit_config(inputs: &mut Inputs, args: &FitArgs) -> Result<FitConfig> {
    let mut config = FitConfig::new(args.delta, args.offset.into());
    if let Some(path) = &args.init_grid {
        config.init_grid = serde_json::from_str::<Vec<InitPoint>>(&inputs.read(path)?)?;
    }
    config.validate()?;
    Ok(config)
}

/// Seed from the flag, then the environment, then 0.
fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Parse(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn shared_xi(dataset: &ExperimentDataset) -> Result<f64> {
    let xi = dataset.records[0].xi;
    if dataset.records.iter().any(|r| r.xi != xi) {
        return Err(Error::InvalidArgument("records have different xi; pass --xi".into()));
    }
    Ok(xi)
}

/// Reads a law from fit/cv output (`law` field) or a bare law object.
pub fn law_from_json(text: &str) -> Result<ScalingLaw> {
    let v: Value = serde_json::from_str(text)?;
    let law = match v.get("law") {
        Some(inner) => serde_json::from_value(inner.clone())?,
        None => serde_json::from_value::<ScalingLaw>(v)?,
    };
    law.validate()?;
    Ok(law)
}

/// Reads a frontier from `frontier` output or a bare frontier object.
pub fn frontier_from_json(text: &str) -> Result<ComputeFrontier> {
    let v: Value = serde_json::from_str(text)?;
    Ok(match v.get("frontier") {
        Some(inner) => serde_json::from_value(inner.clone())?,
        None => serde_json::from_value(v)?,
    })
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn plot_input(inputs: &mut Inputs, path: &Path, xi: Option<f64>) -> Result<PlotInput> {
    let text = inputs.read(path)?;
    let label = stem(path);
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if !is_json {
        return Ok(PlotInput::Dataset { label, dataset: parse_records(&text)? });
    }
    let v: Value = serde_json::from_str(&text)?;
    if v.get("frontier").is_some() || v.get("G").is_some() {
        return Ok(PlotInput::Frontier { label, frontier: frontier_from_json(&text)? });
    }
    if v.get("records").is_some() {
        return Ok(PlotInput::Dataset { label, dataset: ExperimentDataset::from_json(&text)? });
    }
    let law = law_from_json(&text)?;
    let xi = xi.ok_or_else(|| Error::InvalidArgument(format!("{}: plotting a law needs --xi", path.display())))?;
    Ok(PlotInput::Law { label, law, xi })
}

fn parse_sizes(s: &str) -> Result<Vec<u64>> {
    parse_budgets(s)?
        .into_iter()
        .map(|x| {
            let n = x.round();
            if n < 1.0 || n > u64::MAX as f64 {
                return Err(Error::InvalidArgument(format!("model size {x} out of range")));
            }
            Ok(n as u64)
        })
        .collect()
}

#[derive(Serialize)]
struct FrontierOutput<'a> {
    frontier: &'a ComputeFrontier,
    rows: &'a [FrontierRow],
}

#[derive(Serialize)]
struct CvOutput<'a> {
    #[serde(flatten)]
    outcome: &'a CvOutcome,
    /// Refit on the full dataset with the chosen configuration.
    law: ScalingLaw,
    fit: &'a FitResult,
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<()> {
    let mut inputs = Inputs::default();
    match command {
        Command::Ingest { data, arch, out } => {
            let mut dataset = parse_records(&inputs.read(&data)?)?;
            if let Some(arch) = &arch {
                dataset = filter_by_arch(&dataset, arch)?;
            }
            let csv = dataset.to_csv();
            write_output(&out, &csv)?;
            let mut arch_ids: Vec<&str> = dataset.records.iter().map(|r| r.arch_id.as_str()).collect();
            arch_ids.sort_unstable();
            arch_ids.dedup();
            let summary = json!({ "records": dataset.len(), "arch_ids": arch_ids, "dataset_digest": dataset.source_digest });
            write!(stdout, "{}", to_json(&summary))?;
        }
        Command::Fit { data, fit: fit_args, out } => {
            let dataset = load_dataset(&mut inputs, &data)?;
            let config = fit_config(&mut inputs, &fit_args)?;
            let result = fit(&dataset, &config)?;
            let prov = inputs.provenance("fit", Some(config.seed), json!({ "arch": data.arch, "fit": config }));
            write_output(&out, &with_provenance(&result, &prov))?;
            writeln!(
                stdout,
                "A={} B={} E={} alpha={} beta={} objective={:e} converged={}",
                result.law.a, result.law.b, result.law.e, result.law.alpha, result.law.beta, result.objective, result.converged
            )?;
        }
        Command::Cv { data, deltas, offsets, out } => {
            let dataset = load_dataset(&mut inputs, &data)?;
            let deltas = deltas
                .split(',')
                .map(|d| d.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad delta `{d}`"))))
                .collect::<Result<Vec<_>>>()?;
            let modes = offsets
                .split(',')
                .map(|m| match m.trim() {
                    "zero" => Ok(OffsetMode::FixedZero),
                    "free" => Ok(OffsetMode::Free),
                    other => Err(Error::Parse(format!("bad offset mode `{other}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let candidates = FitConfig::candidates(&deltas, &modes);
            let outcome = loo_cv(&dataset, &candidates)?;
            let refit = fit(&dataset, &outcome.chosen)?;
            let prov = inputs.provenance("cv", None, json!({ "arch": data.arch, "deltas": deltas, "offsets": modes }));
            let body = CvOutput { outcome: &outcome, law: refit.law, fit: &refit };
            write_output(&out, &with_provenance(&body, &prov))?;
            for (c, s) in candidates.iter().zip(&outcome.scores) {
                writeln!(stdout, "delta={} offset={:?} score={s:e}", c.delta, c.offset_mode)?;
            }
            writeln!(stdout, "chosen: delta={} offset={:?}", outcome.chosen.delta, outcome.chosen.offset_mode)?;
        }
        Command::Bootstrap { data, fit: fit_args, n, seed, xi, level, table_csv, out } => {
            let dataset = load_dataset(&mut inputs, &data)?;
            let config = fit_config(&mut inputs, &fit_args)?;
            let seed = resolve_seed(seed)?;
            let xi = match xi {
                Some(x) => parse_xi(&x)?,
                None => shared_xi(&dataset)?,
            };
            let options = BootstrapOptions { level, ..BootstrapOptions::new(n, seed, xi) };
            let summary: BootstrapSummary = bootstrap_laws(&dataset, &config, &options)?;
            let prov = inputs.provenance(
                "bootstrap",
                Some(seed),
                json!({ "arch": data.arch, "fit": config, "n_resamples": n, "xi": xi, "level": level }),
            );
            if let Some(path) = &table_csv {
                write_file(path, out.force, &render_table_csv(&summary))?;
            }
            write_output(&out, &with_provenance(&summary, &prov))?;
            write!(stdout, "{}", render_table(&summary))?;
        }
        Command::Frontier { law, xi, budgets, out } => {
            let law = law_from_json(&inputs.read(&law)?)?;
            let xi_value = parse_xi(&xi)?;
            let budgets = parse_budgets(&budgets)?;
            let frontier = derive_frontier(&law, xi_value)?;
            let rows: Vec<FrontierRow> = budgets.iter().map(|&c| frontier.row(c)).collect();
            let prov = inputs.provenance("frontier", None, json!({ "xi": xi_value, "budgets": budgets }));
            write_output(&out, &with_provenance(&FrontierOutput { frontier: &frontier, rows: &rows }, &prov))?;
            write!(stdout, "{}", render_frontier_table(&rows))?;
        }
        Command::Plan { budget, xi, model_sizes, arch, out } => {
            let plan = isoflop_plan(budget, parse_xi(&xi)?, &parse_sizes(&model_sizes)?)?;
            write_output(&out, &plan.to_csv(&arch))?;
            write!(stdout, "{}", to_json(&plan))?;
        }
        Command::Synth { spec, seed, out } => {
            let mut spec: SyntheticSpec = serde_json::from_str(&inputs.read(&spec)?)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let dataset = generate_synthetic(&spec)?;
            write_output(&out, &dataset.to_csv())?;
            let summary = json!({ "records": dataset.len(), "seed": spec.seed, "dataset_digest": dataset.source_digest });
            write!(stdout, "{}", to_json(&summary))?;
        }
        Command::Plot { kind, inputs: paths, xi, x_range, y_range, budgets, title, out } => {
            let xi = xi.as_deref().map(parse_xi).transpose()?;
            let plot_inputs = paths.iter().map(|p| plot_input(&mut inputs, p, xi)).collect::<Result<Vec<_>>>()?;
            let spec = PlotSpec {
                kind: kind.into(),
                inputs: plot_inputs,
                x_range,
                y_range,
                budgets: budgets.as_deref().map(parse_budgets).transpose()?.unwrap_or_default(),
                title,
            };
            write_output(&out, &render_plot(&spec)?)?;
        }
    }
    Ok(())
}

/// Runs the CLI on `argv` (program name first) with the given streams and
/// returns the exit status.
pub fn run_cli_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", json!({ "error": e.kind(), "message": e.to_string() }));
            1
        }
    }
}

/// Runs the CLI against the process's stdout and stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
