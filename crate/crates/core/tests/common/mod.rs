//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use scalaw::{ScalingLaw, SyntheticSpec};

pub fn baseline_law() -> ScalingLaw {
    ScalingLaw::new(1.27, 0.202, 0.0, 0.909, 0.379).unwrap()
}

pub fn equivariant_law() -> ScalingLaw {
    ScalingLaw::new(2.82e-4, 469.0, 0.0, 0.348, 0.734).unwrap()
}

pub const BASELINE_XI: f64 = 6.0;
pub const EQUIVARIANT_XI: f64 = 61.2;

/// Log-uniform design over N in [1e4, 1e8] and D in [1e7, 1e10].
pub fn synthetic(law: ScalingLaw, n_points: usize, sigma: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec::log_uniform(law, n_points, (10_000, 100_000_000), (1e7, 1e10), sigma, seed)
}

/// Axis mapping of one `plot-area` group.
#[derive(Debug, Clone, Copy)]
pub struct Axes {
    pub x_log: (f64, f64),
    pub y_log: (f64, f64),
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl Axes {
    /// Pixel coordinates back to `(log10 x, log10 y)`.
    pub fn to_data(self, px: f64, py: f64) -> (f64, f64) {
        let lx = self.x_log.0 + (px - self.left) / self.width * (self.x_log.1 - self.x_log.0);
        let ly = self.y_log.0 + (self.top + self.height - py) / self.height * (self.y_log.1 - self.y_log.0);
        (lx, ly)
    }
}

fn attr(tag: &str, name: &str) -> Option<String> {
    let key = format!(" {name}=\"");
    let start = tag.find(&key)? + key.len();
    let end = tag[start..].find('"')? + start;
    Some(tag[start..end].to_string())
}

fn tags<'a>(svg: &'a str, element: &str) -> Vec<&'a str> {
    let open = format!("<{element} ");
    let mut out = Vec::new();
    let mut rest = svg;
    while let Some(i) = rest.find(&open) {
        let end = rest[i..].find('>').expect("tag closes") + i;
        out.push(&rest[i..=end]);
        rest = &rest[end + 1..];
    }
    out
}

pub fn plot_areas(svg: &str) -> Vec<Axes> {
    tags(svg, "g")
        .into_iter()
        .filter(|t| t.contains(r#"class="plot-area""#))
        .map(|t| {
            let f = |n: &str| attr(t, n).unwrap().parse::<f64>().unwrap();
            Axes {
                x_log: (f("data-x-log-min"), f("data-x-log-max")),
                y_log: (f("data-y-log-min"), f("data-y-log-max")),
                left: f("data-left"),
                top: f("data-top"),
                width: f("data-width"),
                height: f("data-height"),
            }
        })
        .collect()
}

/// `(series, pixel points)` for every curve path.
pub fn curves(svg: &str) -> Vec<(String, Vec<(f64, f64)>)> {
    tags(svg, "path")
        .into_iter()
        .filter(|t| t.contains(r#"class="curve""#))
        .map(|t| {
            let d = attr(t, "d").unwrap();
            let pts = d
                .split(['M', 'L'])
                .filter(|s| !s.trim().is_empty())
                .map(|p| {
                    let (x, y) = p.trim().split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect();
            (attr(t, "data-series").unwrap(), pts)
        })
        .collect()
}

pub fn marker_series(svg: &str) -> Vec<String> {
    let mut names: Vec<String> =
        tags(svg, "circle").into_iter().filter(|t| t.contains(r#"class="marker""#)).map(|t| attr(t, "data-series").unwrap()).collect();
    names.sort();
    names.dedup();
    names
}

/// Least-squares slope of `y` on `x`.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Log-log slope of a curve measured in data space.
pub fn curve_log_slope(axes: &Axes, pixels: &[(f64, f64)]) -> f64 {
    let data: Vec<(f64, f64)> = pixels.iter().map(|&(x, y)| axes.to_data(x, y)).collect();
    slope(&data)
}
