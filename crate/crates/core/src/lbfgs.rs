//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The inverse Hessian is applied with the two-loop recursion over the last
//! `history_size` curvature pairs, scaled by `s'y / y'y` of the newest pair.
//! Step lengths satisfy the sufficient-decrease and curvature conditions via
//! bracketing followed by a cubic-interpolation zoom.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsSettings {
    pub history_size: usize,
    pub max_iterations: usize,
    /// Stop when the largest gradient component falls to this value.
    pub gradient_tolerance: f64,
    /// Stop when an accepted step lowers `f` by less than this fraction of `|f|`.
    pub relative_decrease_tolerance: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search_evals: usize,
    /// A failed line search at a point whose largest gradient component is
    /// below this value counts as converged: no representable step improves `f`.
    pub stall_gradient_tolerance: f64,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        LbfgsSettings {
            history_size: 10,
            max_iterations: 1000,
            gradient_tolerance: 1e-10,
            relative_decrease_tolerance: 1e-15,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evals: 40,
            stall_gradient_tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    RelativeDecrease,
    MaxIterations,
    /// The line search failed near a stationary point.
    PrecisionLimit,
    LineSearchFailed,
    NonFiniteStart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl LbfgsOutcome {
    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::GradientTolerance | Termination::RelativeDecrease | Termination::PrecisionLimit)
    }

    pub fn gradient_norm(&self) -> f64 {
        inf_norm(&self.gradient)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct History {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
}

impl History {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        // Skip pairs that would break positive definiteness.
        if !sy.is_finite() || sy <= 1e-300 {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// `-H g` via the two-loop recursion.
    fn direction(&self, grad: &[f64]) -> Vec<f64> {
        let mut q = grad.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q.iter_mut().for_each(|qi| *qi = -*qi);
        q
    }
}

struct Probe {
    step: f64,
    value: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

/// Minimizer of the cubic through `(a, fa, ga)` and `(b, fb, gb)`, or the
/// bisection point when the cubic minimizer falls outside the safe interior.
fn cubic_step(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let width = hi - lo;
    let mid = 0.5 * (a + b);
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    if !disc.is_finite() || disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    if t.is_finite() && t > lo + 0.1 * width && t < hi - 0.1 * width {
        t
    } else {
        mid
    }
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    slope0: f64,
    settings: &'a LbfgsSettings,
    evals: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> LineSearch<'_, F> {
    fn probe(&mut self, step: f64) -> Probe {
        self.evals += 1;
        let x: Vec<f64> = self.x.iter().zip(self.dir).map(|(xi, di)| xi + step * di).collect();
        let mut grad = vec![0.0; x.len()];
        let mut value = (self.f)(&x, &mut grad);
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            value = f64::INFINITY;
        }
        let slope = if value.is_finite() { dot(&grad, self.dir) } else { f64::NAN };
        Probe { step, value, slope, x, grad }
    }

    fn armijo(&self, p: &Probe) -> bool {
        p.value <= self.f0 + self.settings.c1 * p.step * self.slope0
    }

    fn curvature(&self, p: &Probe) -> bool {
        p.slope.abs() <= -self.settings.c2 * self.slope0
    }

    fn run(&mut self, initial_step: f64) -> Option<Probe> {
        let mut prev = Probe { step: 0.0, value: self.f0, slope: self.slope0, x: Vec::new(), grad: Vec::new() };
        let mut step = initial_step;
        for i in 0.. {
            if self.evals >= self.settings.max_line_search_evals {
                return None;
            }
            let p = self.probe(step);
            if !p.value.is_finite() {
                // Overshot into a non-finite region; back off.
                step = 0.5 * (prev.step + step);
                continue;
            }
            if !self.armijo(&p) || (i > 0 && p.value >= prev.value) {
                return self.zoom(prev, p);
            }
            if self.curvature(&p) {
                return Some(p);
            }
            if p.slope >= 0.0 {
                return self.zoom(p, prev);
            }
            step *= 2.0;
            prev = p;
        }
        unreachable!()
    }

    /// Invariant: `lo` satisfies sufficient decrease and has the lowest value
    /// seen; the minimizer lies between `lo` and `hi`.
    fn zoom(&mut self, mut lo: Probe, mut hi: Probe) -> Option<Probe> {
        while self.evals < self.settings.max_line_search_evals {
            let trial = if hi.value.is_finite() && hi.slope.is_finite() {
                cubic_step(lo.step, lo.value, lo.slope, hi.step, hi.value, hi.slope)
            } else {
                0.5 * (lo.step + hi.step)
            };
            if (trial - lo.step).abs() <= 1e-16 * lo.step.abs().max(1e-300) {
                break;
            }
            let p = self.probe(trial);
            if !p.value.is_finite() || !self.armijo(&p) || p.value >= lo.value {
                hi = p;
            } else {
                if self.curvature(&p) {
                    return Some(p);
                }
                if p.slope * (hi.step - lo.step) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
        }
        // Accept a strict decrease even without the curvature condition.
        if lo.step > 0.0 && lo.value < self.f0 {
            Some(lo)
        } else {
            None
        }
    }
}

/// Minimizes `f` from `x0`. `f(x, grad)` returns the value and writes the
/// gradient into `grad`.
pub fn minimize<F>(mut f: F, x0: &[f64], settings: &LbfgsSettings) -> LbfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; x.len()];
    let mut value = f(&x, &mut grad);
    let mut evaluations = 1;
    let finish = |x, value, gradient, iterations, evaluations, termination| LbfgsOutcome {
        x,
        value,
        gradient,
        iterations,
        evaluations,
        termination,
    };
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return finish(x, value, grad, 0, evaluations, Termination::NonFiniteStart);
    }

    let mut history = History { pairs: VecDeque::with_capacity(settings.history_size), capacity: settings.history_size.max(1) };
    let mut iterations = 0;
    loop {
        if inf_norm(&grad) <= settings.gradient_tolerance {
            return finish(x, value, grad, iterations, evaluations, Termination::GradientTolerance);
        }
        if iterations >= settings.max_iterations {
            return finish(x, value, grad, iterations, evaluations, Termination::MaxIterations);
        }

        let mut accepted = None;
        // With memory, try the quasi-Newton direction first, then fall back
        // to steepest descent with a cleared history.
        for attempt in 0..2 {
            if attempt == 1 {
                if history.pairs.is_empty() {
                    break;
                }
                history.pairs.clear();
            }
            let mut dir = history.direction(&grad);
            let mut slope0 = dot(&grad, &dir);
            if !slope0.is_finite() || slope0 >= 0.0 {
                history.pairs.clear();
                dir = grad.iter().map(|g| -g).collect();
                slope0 = dot(&grad, &dir);
            }
            let initial_step = if history.pairs.is_empty() { (1.0 / inf_norm(&grad)).min(1.0) } else { 1.0 };
            let mut ls = LineSearch { f: &mut f, x: &x, dir: &dir, f0: value, slope0, settings, evals: 0 };
            let result = ls.run(initial_step);
            evaluations += ls.evals;
            if let Some(p) = result {
                accepted = Some(p);
                break;
            }
        }
        let Some(p) = accepted else {
            let termination = if inf_norm(&grad) <= settings.stall_gradient_tolerance {
                Termination::PrecisionLimit
            } else {
                Termination::LineSearchFailed
            };
            return finish(x, value, grad, iterations, evaluations, termination);
        };

        iterations += 1;
        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        history.push(s, y);
        let decrease = value - p.value;
        let scale = value.abs().max(p.value.abs());
        x = p.x;
        grad = p.grad;
        value = p.value;
        if decrease <= settings.relative_decrease_tolerance * scale {
            let termination =
                if inf_norm(&grad) <= settings.gradient_tolerance { Termination::GradientTolerance } else { Termination::RelativeDecrease };
            return finish(x, value, grad, iterations, evaluations, termination);
        }
    }
}
