//! Static log-log SVG charts of datasets, fitted laws and frontiers.
//!
//! Every plot area is a `<g class="plot-area">` carrying its axis mapping in
//! `data-*` attributes (decade bounds and pixel box), so curve coordinates can
//! be mapped back to data space. Curves are `<path class="curve">`, records are
//! `<circle class="marker">`. Output is a pure function of the `PlotSpec`.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentDataset;
use crate::frontier::{derive_frontier, ComputeFrontier};
use crate::law::ScalingLaw;

/// Abscissae per curve.
pub const CURVE_SAMPLES: usize = 256;

const WIDTH: f64 = 760.0;
const PANEL_HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f5fa8", "#c0392b", "#16a085", "#e67e22", "#8e44ad", "#2c3e50"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Optimal loss against budget, with record (budget, loss) markers.
    ComputeFrontier,
    /// One panel per budget: loss against model size along the iso-FLOP curve.
    IsoflopPanels,
    /// Optimal model size against budget.
    Allocation,
    /// Loss against unique training tokens.
    DataScaling,
    /// Predicted loss over (N, D) with records overlaid.
    Heatmap2d,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "compute_frontier" => PlotKind::ComputeFrontier,
            "isoflop_panels" => PlotKind::IsoflopPanels,
            "allocation" => PlotKind::Allocation,
            "data_scaling" => PlotKind::DataScaling,
            "heatmap_2d" => PlotKind::Heatmap2d,
            other => return Err(Error::InvalidArgument(format!("unknown plot kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotInput {
    Frontier { label: String, frontier: ComputeFrontier },
    Law { label: String, law: ScalingLaw, xi: f64 },
    Dataset { label: String, dataset: ExperimentDataset },
}

impl PlotInput {
    fn label(&self) -> &str {
        match self {
            PlotInput::Frontier { label, .. } | PlotInput::Law { label, .. } | PlotInput::Dataset { label, .. } => label,
        }
    }

    /// Frontier for curve inputs.
    fn frontier(&self) -> Result<Option<ComputeFrontier>> {
        match self {
            PlotInput::Frontier { frontier, .. } => Ok(Some(*frontier)),
            PlotInput::Law { law, xi, .. } => derive_frontier(law, *xi).map(Some),
            PlotInput::Dataset { .. } => Ok(None),
        }
    }

    /// Law and xi for inputs that carry a full law.
    fn law(&self) -> Option<(ScalingLaw, f64)> {
        match self {
            PlotInput::Frontier { frontier, .. } => frontier.source_law.map(|l| (l, frontier.xi)),
            PlotInput::Law { law, xi, .. } => Some((*law, *xi)),
            PlotInput::Dataset { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub inputs: Vec<PlotInput>,
    /// Abscissa range in data units; derived from the inputs when absent.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    /// Panel budgets for [`PlotKind::IsoflopPanels`]; taken from the records when empty.
    pub budgets: Vec<f64>,
    pub title: Option<String>,
}

impl PlotSpec {
    pub fn new(kind: PlotKind, inputs: Vec<PlotInput>) -> Self {
        PlotSpec { kind, inputs, x_range: None, y_range: None, budgets: Vec::new(), title: None }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

/// Decade bounds covering `values`, padded by `pad` decades.
fn decade_bounds(values: impl Iterator<Item = f64>, pad: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite() && *v > 0.0) {
        lo = lo.min(v.log10());
        hi = hi.max(v.log10());
    }
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-9 {
        return Some((lo - 0.5, hi + 0.5));
    }
    Some((lo - pad, hi + pad))
}

fn range_to_decades(r: (f64, f64)) -> Result<(f64, f64)> {
    if !(r.0 > 0.0 && r.1 > r.0 && r.1.is_finite()) {
        return Err(Error::InvalidArgument(format!("axis range {r:?} must satisfy 0 < lo < hi")));
    }
    Ok((r.0.log10(), r.1.log10()))
}

/// One log-log axis box.
struct Panel {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        self.left + (x.log10() - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y.log10() - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn open(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        writeln!(
            out,
            r#"<g class="plot-area" data-x-log-min="{:.6}" data-x-log-max="{:.6}" data-y-log-min="{:.6}" data-y-log-max="{:.6}" data-left="{:.3}" data-top="{:.3}" data-width="{:.3}" data-height="{:.3}">"#,
            self.x.0, self.x.1, self.y.0, self.y.1, self.left, self.top, self.width, self.height
        )
        .unwrap();
        writeln!(
            out,
            r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="#333" stroke-width="1"/>"##,
            self.left, self.top, self.width, self.height
        )
        .unwrap();
        self.ticks(out);
        let cx = self.left + self.width / 2.0;
        writeln!(
            out,
            r#"<text class="axis-label" x="{cx:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
            self.top + self.height + 42.0,
            escape(x_label)
        )
        .unwrap();
        let cy = self.top + self.height / 2.0;
        let lx = self.left - 58.0;
        writeln!(
            out,
            r#"<text class="axis-label" x="{lx:.3}" y="{cy:.3}" text-anchor="middle" transform="rotate(-90 {lx:.3} {cy:.3})">{}</text>"#,
            escape(y_label)
        )
        .unwrap();
        if !title.is_empty() {
            writeln!(
                out,
                r#"<text class="panel-title" x="{cx:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
                self.top - 10.0,
                escape(title)
            )
            .unwrap();
        }
    }

    fn ticks(&self, out: &mut String) {
        for k in (self.x.0.ceil() as i64)..=(self.x.1.floor() as i64) {
            let x = self.px(10f64.powi(k as i32));
            let y = self.top + self.height;
            writeln!(out, r##"<line class="tick" x1="{x:.3}" y1="{y:.3}" x2="{x:.3}" y2="{:.3}" stroke="#333"/>"##, y + 5.0).unwrap();
            writeln!(out, r#"<text class="tick-label" x="{x:.3}" y="{:.3}" text-anchor="middle">10<tspan baseline-shift="super" font-size="8">{k}</tspan></text>"#, y + 18.0).unwrap();
        }
        for k in (self.y.0.ceil() as i64)..=(self.y.1.floor() as i64) {
            let y = self.py(10f64.powi(k as i32));
            writeln!(
                out,
                r##"<line class="tick" x1="{:.3}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}" stroke="#333"/>"##,
                self.left - 5.0,
                self.left
            )
            .unwrap();
            writeln!(out, r#"<text class="tick-label" x="{:.3}" y="{:.3}" text-anchor="end">10<tspan baseline-shift="super" font-size="8">{k}</tspan></text>"#, self.left - 8.0, y + 4.0).unwrap();
        }
    }

    fn curve(&self, out: &mut String, series: &str, color: &str, dashed: bool, points: &[(f64, f64)]) {
        let mut d = String::new();
        for (i, (x, y)) in points.iter().enumerate() {
            write!(d, "{}{:.3},{:.3}", if i == 0 { "M" } else { " L" }, self.px(*x), self.py(*y)).unwrap();
        }
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        writeln!(
            out,
            r#"<path class="curve" data-series="{}" d="{d}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            escape(series)
        )
        .unwrap();
    }

    fn marker(&self, out: &mut String, series: &str, color: &str, x: f64, y: f64) {
        writeln!(
            out,
            r#"<circle class="marker" data-series="{}" cx="{:.3}" cy="{:.3}" r="3.5" fill="{color}" fill-opacity="0.6" stroke="{color}"/>"#,
            escape(series),
            self.px(x),
            self.py(y)
        )
        .unwrap();
    }
}

struct Legend(Vec<(String, String, bool)>);

impl Legend {
    fn render(&self, out: &mut String, x: f64, y: f64) {
        writeln!(out, r#"<g class="legend">"#).unwrap();
        for (i, (label, color, is_curve)) in self.0.iter().enumerate() {
            let yy = y + 18.0 * i as f64;
            if *is_curve {
                writeln!(out, r#"<line x1="{x:.3}" y1="{yy:.3}" x2="{:.3}" y2="{yy:.3}" stroke="{color}" stroke-width="2"/>"#, x + 20.0)
                    .unwrap();
            } else {
                writeln!(out, r#"<circle cx="{:.3}" cy="{yy:.3}" r="3.5" fill="{color}"/>"#, x + 10.0).unwrap();
            }
            writeln!(out, r#"<text class="legend-entry" x="{:.3}" y="{:.3}">{}</text>"#, x + 26.0, yy + 4.0, escape(label)).unwrap();
        }
        writeln!(out, "</g>").unwrap();
    }
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

pub fn render_plot(spec: &PlotSpec) -> Result<String> {
    if spec.inputs.is_empty() {
        return Err(Error::InvalidArgument("plot has no inputs".into()));
    }
    match spec.kind {
        PlotKind::ComputeFrontier | PlotKind::Allocation => render_budget_axis(spec),
        PlotKind::IsoflopPanels => render_isoflop_panels(spec),
        PlotKind::DataScaling => render_data_scaling(spec),
        PlotKind::Heatmap2d => render_heatmap(spec),
    }
}

fn single_panel(x: (f64, f64), y: (f64, f64)) -> Panel {
    Panel { left: MARGIN_LEFT, top: MARGIN_TOP, width: WIDTH - MARGIN_LEFT - MARGIN_RIGHT, height: PANEL_HEIGHT, x, y }
}

fn render_budget_axis(spec: &PlotSpec) -> Result<String> {
    let allocation = spec.kind == PlotKind::Allocation;
    let mut curves = Vec::new();
    let mut markers: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for input in &spec.inputs {
        match input {
            PlotInput::Dataset { label, dataset } => {
                let pts = dataset
                    .records
                    .iter()
                    .map(|r| (r.training_budget(), if allocation { r.model_params as f64 } else { r.test_loss }))
                    .collect();
                markers.push((label.clone(), pts));
            }
            other => curves.push((other.label().to_string(), other.frontier()?.expect("curve input"))),
        }
    }
    let x = match spec.x_range {
        Some(r) => range_to_decades(r)?,
        None => decade_bounds(markers.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)), 0.2).unwrap_or((16.0, 19.0)),
    };
    let xs = log_space(10f64.powf(x.0), 10f64.powf(x.1), CURVE_SAMPLES);
    let sampled: Vec<(String, Vec<(f64, f64)>)> = curves
        .iter()
        .map(|(label, fr)| {
            let pts = xs.iter().map(|&c| (c, if allocation { fr.optimal_params(c) } else { fr.optimal_loss(c) })).collect();
            (label.clone(), pts)
        })
        .collect();
    let y = match spec.y_range {
        Some(r) => range_to_decades(r)?,
        None => decade_bounds(
            sampled.iter().chain(&markers).flat_map(|(_, p)| p.iter().filter(|q| q.0 >= xs[0] && q.0 <= xs[xs.len() - 1]).map(|q| q.1)),
            0.15,
        )
        .ok_or_else(|| Error::InvalidArgument("nothing to plot in the x range".into()))?,
    };
    let panel = single_panel(x, y);
    let mut body = String::new();
    let y_label = if allocation { "compute-optimal model size N*" } else { "test loss" };
    panel.open(&mut body, spec.title.as_deref().unwrap_or(""), "training compute C [FLOPs]", y_label);
    let mut legend = Legend(Vec::new());
    for (i, (label, pts)) in sampled.iter().enumerate() {
        panel.curve(&mut body, label, color(i), i % 2 == 0 && sampled.len() > 1, pts);
        legend.0.push((label.clone(), color(i).into(), true));
    }
    for (i, (label, pts)) in markers.iter().enumerate() {
        let c = color(i);
        for &(mx, my) in pts {
            if (mx.log10() - x.0) * (mx.log10() - x.1) <= 0.0 {
                panel.marker(&mut body, label, c, mx, my);
            }
        }
        legend.0.push((label.clone(), c.into(), false));
    }
    body.push_str("</g>\n");
    legend.render(&mut body, WIDTH - MARGIN_RIGHT + 20.0, MARGIN_TOP + 10.0);
    Ok(document(WIDTH, MARGIN_TOP + PANEL_HEIGHT + MARGIN_BOTTOM, &body))
}

/// Distinct budgets of the records, merged when within 5% of each other.
fn record_budgets(spec: &PlotSpec) -> Vec<f64> {
    let mut all: Vec<f64> = spec
        .inputs
        .iter()
        .filter_map(|i| match i {
            PlotInput::Dataset { dataset, .. } => Some(dataset.records.iter().map(|r| r.training_budget())),
            _ => None,
        })
        .flatten()
        .collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for c in all {
        if out.last().is_none_or(|&last| c > last * 1.05) {
            out.push(c);
        }
    }
    out
}

fn render_isoflop_panels(spec: &PlotSpec) -> Result<String> {
    let budgets = if spec.budgets.is_empty() { record_budgets(spec) } else { spec.budgets.clone() };
    if budgets.is_empty() {
        return Err(Error::InvalidArgument("isoflop panels need budgets or records".into()));
    }
    let laws: Vec<(String, ScalingLaw, f64)> =
        spec.inputs.iter().filter_map(|i| i.law().map(|(l, xi)| (i.label().to_string(), l, xi))).collect();
    let datasets: Vec<(&str, &ExperimentDataset)> = spec
        .inputs
        .iter()
        .filter_map(|i| match i {
            PlotInput::Dataset { label, dataset } => Some((label.as_str(), dataset)),
            _ => None,
        })
        .collect();
    let x = match spec.x_range {
        Some(r) => range_to_decades(r)?,
        None => {
            decade_bounds(datasets.iter().flat_map(|(_, d)| d.records.iter().map(|r| r.model_params as f64)), 0.2).unwrap_or((3.0, 8.0))
        }
    };
    let xs = log_space(10f64.powf(x.0), 10f64.powf(x.1), CURVE_SAMPLES);
    let mut panels_data = Vec::new();
    let mut y_values = Vec::new();
    for &c in &budgets {
        let mut curves = Vec::new();
        for (label, law, xi) in &laws {
            let mut pts = Vec::new();
            for &n in &xs {
                let d = c / (xi * n);
                if d >= 1.0 {
                    pts.push((n, law.eval(n, d)?));
                }
            }
            y_values.extend(pts.iter().map(|p| p.1));
            curves.push((label.clone(), pts));
        }
        let mut marks = Vec::new();
        for (label, ds) in &datasets {
            let pts: Vec<(f64, f64)> = ds
                .records
                .iter()
                .filter(|r| (r.training_budget() / c - 1.0).abs() <= 0.05)
                .map(|r| (r.model_params as f64, r.test_loss))
                .collect();
            y_values.extend(pts.iter().map(|p| p.1));
            marks.push((label.to_string(), pts));
        }
        panels_data.push((c, curves, marks));
    }
    let y = match spec.y_range {
        Some(r) => range_to_decades(r)?,
        None => decade_bounds(y_values.into_iter(), 0.15).ok_or_else(|| Error::InvalidArgument("nothing to plot".into()))?,
    };
    let cols = budgets.len().min(4);
    let rows = budgets.len().div_ceil(cols);
    let panel_w = 260.0;
    let panel_h = 220.0;
    let gap_x = 90.0;
    let gap_y = 90.0;
    let width = MARGIN_LEFT + cols as f64 * (panel_w + gap_x) + MARGIN_RIGHT - gap_x;
    let height = MARGIN_TOP + rows as f64 * (panel_h + gap_y) - gap_y + MARGIN_BOTTOM;
    let mut body = String::new();
    for (k, (c, curves, marks)) in panels_data.iter().enumerate() {
        let panel = Panel {
            left: MARGIN_LEFT + (k % cols) as f64 * (panel_w + gap_x),
            top: MARGIN_TOP + (k / cols) as f64 * (panel_h + gap_y),
            width: panel_w,
            height: panel_h,
            x,
            y,
        };
        panel.open(&mut body, &format!("C = {}", crate::report::format_sig(*c, 3)), "model size N", "test loss");
        for (i, (label, pts)) in curves.iter().enumerate() {
            panel.curve(&mut body, label, color(i), false, pts);
        }
        for (i, (label, pts)) in marks.iter().enumerate() {
            for &(mx, my) in pts {
                panel.marker(&mut body, label, color(i), mx, my);
            }
        }
        body.push_str("</g>\n");
    }
    let mut legend = Legend(laws.iter().enumerate().map(|(i, (l, _, _))| (l.clone(), color(i).to_string(), true)).collect());
    legend.0.extend(datasets.iter().enumerate().map(|(i, (l, _))| (l.to_string(), color(i).to_string(), false)));
    legend.render(&mut body, width - MARGIN_RIGHT + 20.0, MARGIN_TOP + 10.0);
    Ok(document(width, height, &body))
}

fn render_data_scaling(spec: &PlotSpec) -> Result<String> {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for input in &spec.inputs {
        if let PlotInput::Dataset { label, dataset } = input {
            let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
            for r in &dataset.records {
                let name = match r.augmented {
                    Some(true) => format!("{label}: {} (augmented)", r.arch_id),
                    _ => format!("{label}: {}", r.arch_id),
                };
                let x = r.unique_tokens.unwrap_or(r.train_tokens) as f64;
                match groups.iter_mut().find(|g| g.0 == name) {
                    Some(g) => g.1.push((x, r.test_loss)),
                    None => groups.push((name, vec![(x, r.test_loss)])),
                }
            }
            series.extend(groups);
        }
    }
    if series.is_empty() {
        return Err(Error::InvalidArgument("data scaling plot needs at least one dataset".into()));
    }
    for s in &mut series {
        s.1.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let x = match spec.x_range {
        Some(r) => range_to_decades(r)?,
        None => decade_bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)), 0.2).expect("non-empty"),
    };
    let y = match spec.y_range {
        Some(r) => range_to_decades(r)?,
        None => decade_bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)), 0.15).expect("non-empty"),
    };
    let panel = single_panel(x, y);
    let mut body = String::new();
    panel.open(&mut body, spec.title.as_deref().unwrap_or(""), "unique training tokens", "test loss");
    let mut legend = Legend(Vec::new());
    for (i, (label, pts)) in series.iter().enumerate() {
        let c = color(i);
        panel.curve(&mut body, label, c, i % 2 == 0 && series.len() > 1, pts);
        for &(mx, my) in pts {
            panel.marker(&mut body, label, c, mx, my);
        }
        legend.0.push((label.clone(), c.into(), true));
    }
    body.push_str("</g>\n");
    legend.render(&mut body, WIDTH - MARGIN_RIGHT + 20.0, MARGIN_TOP + 10.0);
    Ok(document(WIDTH, MARGIN_TOP + PANEL_HEIGHT + MARGIN_BOTTOM, &body))
}

/// Low-to-high loss ramp.
fn ramp(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] =
        [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let lerp = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    format!("#{:02x}{:02x}{:02x}", lerp(a.0, b.0), lerp(a.1, b.1), lerp(a.2, b.2))
}

fn render_heatmap(spec: &PlotSpec) -> Result<String> {
    let (label, law) = spec
        .inputs
        .iter()
        .find_map(|i| i.law().map(|(l, _)| (i.label().to_string(), l)))
        .ok_or_else(|| Error::InvalidArgument("heatmap needs a law or a frontier with its source law".into()))?;
    let records: Vec<(f64, f64, f64)> = spec
        .inputs
        .iter()
        .filter_map(|i| match i {
            PlotInput::Dataset { dataset, .. } => {
                Some(dataset.records.iter().map(|r| (r.model_params as f64, r.train_tokens as f64, r.test_loss)))
            }
            _ => None,
        })
        .flatten()
        .collect();
    let x = match spec.x_range {
        Some(r) => range_to_decades(r)?,
        None => decade_bounds(records.iter().map(|r| r.0), 0.2).unwrap_or((4.0, 8.0)),
    };
    let y = match spec.y_range {
        Some(r) => range_to_decades(r)?,
        None => decade_bounds(records.iter().map(|r| r.1), 0.2).unwrap_or((7.0, 10.0)),
    };
    let panel = single_panel(x, y);
    const CELLS: usize = 40;
    let mut grid = Vec::with_capacity(CELLS * CELLS);
    for j in 0..CELLS {
        for i in 0..CELLS {
            let n = 10f64.powf(x.0 + (x.1 - x.0) * (i as f64 + 0.5) / CELLS as f64);
            let d = 10f64.powf(y.0 + (y.1 - y.0) * (j as f64 + 0.5) / CELLS as f64);
            grid.push(law.eval(n, d)?.log10());
        }
    }
    let (zmin, zmax) = grid
        .iter()
        .chain(records.iter().map(|r| r.2.log10()).collect::<Vec<_>>().iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| (a.min(z), b.max(z)));
    let span = (zmax - zmin).max(1e-12);
    let mut body = String::new();
    let cw = panel.width / CELLS as f64;
    let ch = panel.height / CELLS as f64;
    writeln!(body, r#"<g class="heatmap" data-series="{}">"#, escape(&label)).unwrap();
    for j in 0..CELLS {
        for i in 0..CELLS {
            let z = grid[j * CELLS + i];
            writeln!(
                body,
                r#"<rect class="cell" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                panel.left + i as f64 * cw,
                panel.top + panel.height - (j + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                ramp((z - zmin) / span)
            )
            .unwrap();
        }
    }
    body.push_str("</g>\n");
    panel.open(&mut body, spec.title.as_deref().unwrap_or(&label), "model size N", "training tokens D");
    for (n, d, l) in &records {
        writeln!(
            body,
            r##"<circle class="marker" data-series="records" cx="{:.3}" cy="{:.3}" r="4" fill="{}" stroke="#fff" stroke-dasharray="2 1"/>"##,
            panel.px(*n),
            panel.py(*d),
            ramp((l.log10() - zmin) / span)
        )
        .unwrap();
    }
    body.push_str("</g>\n");
    let lx = WIDTH - MARGIN_RIGHT + 30.0;
    writeln!(body, r#"<g class="colorbar" data-z-log-min="{zmin:.6}" data-z-log-max="{zmax:.6}">"#).unwrap();
    for k in 0..50 {
        let t = k as f64 / 49.0;
        writeln!(
            body,
            r#"<rect x="{lx:.3}" y="{:.3}" width="16" height="{:.3}" fill="{}"/>"#,
            MARGIN_TOP + PANEL_HEIGHT * (1.0 - t) - PANEL_HEIGHT / 50.0,
            PANEL_HEIGHT / 50.0 + 0.05,
            ramp(t)
        )
        .unwrap();
    }
    writeln!(body, r#"<text x="{:.3}" y="{:.3}">log10 L = {zmax:.2}</text>"#, lx + 22.0, MARGIN_TOP + 10.0).unwrap();
    writeln!(body, r#"<text x="{:.3}" y="{:.3}">log10 L = {zmin:.2}</text>"#, lx + 22.0, MARGIN_TOP + PANEL_HEIGHT).unwrap();
    body.push_str("</g>\n");
    Ok(document(WIDTH, MARGIN_TOP + PANEL_HEIGHT + MARGIN_BOTTOM, &body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ExperimentRecord;

    fn baseline() -> ComputeFrontier {
        derive_frontier(&ScalingLaw::new(1.27, 0.202, 0.0, 0.909, 0.379).unwrap(), 6.0).unwrap()
    }

    fn runs() -> ExperimentDataset {
        let records = [(100_000u64, 16_666_666_667u64, 5e-5), (1_000_000, 1_666_666_667, 4e-5), (300_000, 55_555_555_556, 2.5e-5)]
            .iter()
            .map(|&(n, d, l)| ExperimentRecord::new("baseline", n, d, 6.0, l))
            .collect();
        ExperimentDataset::from_records(records).unwrap()
    }

    #[test]
    fn empty_inputs_error() {
        assert!(render_plot(&PlotSpec::new(PlotKind::Allocation, vec![])).is_err());
    }

    #[test]
    fn frontier_plot_structure() {
        let eq = derive_frontier(&ScalingLaw::new(2.82e-4, 469.0, 0.0, 0.348, 0.734).unwrap(), 61.2).unwrap();
        let spec = PlotSpec::new(
            PlotKind::ComputeFrontier,
            vec![
                PlotInput::Frontier { label: "baseline".into(), frontier: baseline() },
                PlotInput::Frontier { label: "equivariant".into(), frontier: eq },
                PlotInput::Dataset { label: "baseline runs".into(), dataset: runs() },
                PlotInput::Dataset { label: "equivariant runs".into(), dataset: runs() },
            ],
        );
        let svg = render_plot(&spec).unwrap();
        assert_eq!(svg.matches(r#"class="curve""#).count(), 2);
        assert!(svg.contains(r#"class="legend""#));
        assert_eq!(svg.matches(r#"class="legend-entry""#).count(), 4);
        assert!(svg.contains(r#"data-series="baseline runs""#) && svg.contains(r#"data-series="equivariant runs""#));
        assert_eq!(render_plot(&spec).unwrap(), svg);
    }

    #[test]
    fn other_kinds_render() {
        let law = ScalingLaw::new(1.27, 0.202, 0.0, 0.909, 0.379).unwrap();
        let mut ds = runs();
        ds.records[0].unique_tokens = Some(1_000_000);
        ds.records[1].augmented = Some(true);
        for kind in [PlotKind::IsoflopPanels, PlotKind::DataScaling, PlotKind::Heatmap2d] {
            let spec = PlotSpec::new(
                kind,
                vec![
                    PlotInput::Law { label: "fit".into(), law, xi: 6.0 },
                    PlotInput::Dataset { label: "runs".into(), dataset: ds.clone() },
                ],
            );
            let svg = render_plot(&spec).unwrap();
            assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"), "{kind:?}");
        }
        let only_law = PlotSpec::new(PlotKind::DataScaling, vec![PlotInput::Law { label: "fit".into(), law, xi: 6.0 }]);
        assert!(render_plot(&only_law).is_err());
    }

    #[test]
    fn isoflop_panels_one_per_budget() {
        let spec = PlotSpec {
            budgets: vec![1e16, 1e17, 1e18],
            ..PlotSpec::new(PlotKind::IsoflopPanels, vec![PlotInput::Frontier { label: "b".into(), frontier: baseline() }])
        };
        let svg = render_plot(&spec).unwrap();
        assert_eq!(svg.matches(r#"class="plot-area""#).count(), 3);
    }

    #[test]
    fn escapes_labels() {
        let spec = PlotSpec::new(PlotKind::Allocation, vec![PlotInput::Frontier { label: "a<b & c".into(), frontier: baseline() }]);
        assert!(render_plot(&spec).unwrap().contains("a&lt;b &amp; c"));
    }
}
