//! Limited-memory BFGS with a strong Wolfe line search.
//!
//! The search direction comes from the standard two-loop recursion over
//! the most recent curvature pairs. Steps are chosen by a bracketing and
//! zoom line search with cubic interpolation. If that fails, one
//! steepest-descent backtracking step is tried before giving up.

use std::collections::VecDeque;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{GafsError, Result};
use crate::model::ModelParams;

/// Curvature pairs with `sᵀy` at or below this fraction of `‖s‖‖y‖` are
/// discarded.
const CURVATURE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    pub max_iterations: usize,
    pub memory: usize,
    pub relative_tolerance: f64,
    pub gradient_tolerance: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub max_line_search_steps: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iterations: 400,
            memory: 100,
            relative_tolerance: 1e-5,
            gradient_tolerance: 1e-6,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_search_steps: 25,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(GafsError::invalid("max_iterations must be >= 1"));
        }
        if self.memory == 0 {
            return Err(GafsError::invalid("memory must be >= 1"));
        }
        if !(self.relative_tolerance > 0.0) || !(self.gradient_tolerance > 0.0) {
            return Err(GafsError::invalid("tolerances must be positive"));
        }
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(GafsError::invalid(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1 (got c1={}, c2={})",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if self.max_line_search_steps == 0 {
            return Err(GafsError::invalid("max_line_search_steps must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    RelativeChange,
    GradientNorm,
    MaxIterations,
    LineSearchFailure,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::RelativeChange => "relative-change",
            Termination::GradientNorm => "gradient-norm",
            Termination::MaxIterations => "max-iterations",
            Termination::LineSearchFailure => "line-search-failure",
        };
        f.write_str(s)
    }
}

/// Objective value and `‖g‖∞` at the starting point and after every
/// accepted iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimTrace {
    pub objective: Vec<f64>,
    pub gradient_norm: Vec<f64>,
    pub termination: Termination,
    pub evaluations: usize,
}

impl OptimTrace {
    /// Number of accepted iterations.
    pub fn iterations(&self) -> usize {
        self.objective.len() - 1
    }

    pub fn final_objective(&self) -> f64 {
        *self
            .objective
            .last()
            .expect("trace holds the initial value")
    }

    /// Two columns, `iteration objective`, starting at iteration 0.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (i, f) in self.objective.iter().enumerate() {
            writeln!(out, "{i} {f:.16e}")?;
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn all_finite(f: f64, g: &[f64]) -> bool {
    f.is_finite() && g.iter().all(|v| v.is_finite())
}

struct CurvaturePair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// `−H·g` via the two-loop recursion, with `H₀ = (sᵀy / yᵀy)·I` from the
/// newest pair.
fn two_loop_direction(g: &[f64], history: &VecDeque<CurvaturePair>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; history.len()];
    for (i, pair) in history.iter().enumerate().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        alpha[i] = a;
        q.iter_mut().zip(&pair.y).for_each(|(qi, yi)| *qi -= a * yi);
    }
    if let Some(last) = history.back() {
        let scale = 1.0 / (last.rho * dot(&last.y, &last.y));
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for (i, pair) in history.iter().enumerate() {
        let b = pair.rho * dot(&pair.y, &q);
        let a = alpha[i];
        q.iter_mut()
            .zip(&pair.s)
            .for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// A point evaluated along the search line.
#[derive(Clone)]
struct LinePoint {
    step: f64,
    value: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

struct LineSearch<'a, F> {
    func: &'a mut F,
    x0: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
    budget: usize,
    evaluations: usize,
}

/// Minimizer of the cubic through two points with values and slopes,
/// or `None` when the cubic has no real minimizer.
fn cubic_minimizer(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    fn eval(&mut self, step: f64) -> Option<LinePoint> {
        if self.evaluations >= self.budget {
            return None;
        }
        self.evaluations += 1;
        let x: Vec<f64> = self
            .x0
            .iter()
            .zip(self.dir)
            .map(|(xi, di)| xi + step * di)
            .collect();
        let (value, grad) = (self.func)(&x);
        let slope = if all_finite(value, &grad) {
            dot(&grad, self.dir)
        } else {
            f64::NAN
        };
        Some(LinePoint {
            step,
            value,
            slope,
            x,
            grad,
        })
    }

    fn armijo(&self, p: &LinePoint) -> bool {
        p.value.is_finite() && p.value <= self.f0 + self.c1 * p.step * self.slope0
    }

    fn curvature(&self, p: &LinePoint) -> bool {
        p.slope.abs() <= -self.c2 * self.slope0
    }

    /// Strong Wolfe search. Returns the accepted point, or a point that
    /// only satisfies sufficient decrease when the budget ran out inside
    /// the zoom phase, or `None`.
    fn strong_wolfe(&mut self, initial_step: f64) -> Option<LinePoint> {
        let origin = LinePoint {
            step: 0.0,
            value: self.f0,
            slope: self.slope0,
            x: self.x0.to_vec(),
            grad: Vec::new(),
        };
        let mut prev = origin;
        let mut step = initial_step;
        let mut first = true;
        loop {
            let mut cur = self.eval(step)?;
            // Shrink until the objective is finite again.
            while !cur.slope.is_finite() {
                let shrunk = prev.step + 0.5 * (cur.step - prev.step);
                cur = self.eval(shrunk)?;
            }
            if !self.armijo(&cur) || (!first && cur.value >= prev.value) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Some(cur);
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            // Extrapolate, safeguarded to [1.1, 10] times the current step.
            let (lo, hi) = (1.1 * cur.step, 10.0 * cur.step);
            let next = cubic_minimizer(
                prev.step, prev.value, prev.slope, cur.step, cur.value, cur.slope,
            )
            .filter(|t| *t > lo && *t < hi)
            .unwrap_or(2.0 * cur.step);
            first = false;
            prev = cur;
            step = next;
        }
    }

    /// Zoom phase: `lo` satisfies sufficient decrease and has the lower
    /// value of the two ends.
    fn zoom(&mut self, mut lo: LinePoint, mut hi: LinePoint) -> Option<LinePoint> {
        loop {
            let (a, b) = (lo.step.min(hi.step), lo.step.max(hi.step));
            let width = b - a;
            if !(width > f64::EPSILON * b.max(1e-300)) {
                return (lo.step > 0.0).then_some(lo);
            }
            let guess = if hi.slope.is_finite() {
                cubic_minimizer(lo.step, lo.value, lo.slope, hi.step, hi.value, hi.slope)
            } else {
                None
            };
            let margin = 0.1 * width;
            let step = guess
                .filter(|t| *t > a + margin && *t < b - margin)
                .unwrap_or(0.5 * (a + b));
            let Some(cur) = self.eval(step) else {
                return (lo.step > 0.0).then_some(lo);
            };
            if !self.armijo(&cur) || cur.value >= lo.value || !cur.slope.is_finite() {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Some(cur);
                }
                if cur.slope * (hi.step - lo.step) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
    }

    /// Backtracking along the current direction until sufficient decrease.
    fn backtrack(&mut self, initial_step: f64) -> Option<LinePoint> {
        let mut step = initial_step;
        while let Some(p) = self.eval(step) {
            if self.armijo(&p) && p.slope.is_finite() {
                return Some(p);
            }
            step *= 0.5;
        }
        None
    }
}

/// Minimizes `func`, which returns value and gradient at a point.
///
/// Stops when the relative objective change
/// `|f_k − f_{k−1}| / max(|f_{k−1}|, 1)` drops below
/// `relative_tolerance`, when `‖g‖∞ < gradient_tolerance`, after
/// `max_iterations`, or when no step can be found. The returned point is
/// always the best iterate seen.
pub fn minimize<F>(mut func: F, x0: Vec<f64>, cfg: &LbfgsConfig) -> Result<(Vec<f64>, OptimTrace)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    cfg.validate()?;
    let (mut f, mut g) = func(&x0);
    if !all_finite(f, &g) {
        return Err(GafsError::Optimization(
            "objective or gradient is not finite at the starting point".into(),
        ));
    }
    let mut x = x0;
    let mut trace = OptimTrace {
        objective: vec![f],
        gradient_norm: vec![norm_inf(&g)],
        termination: Termination::MaxIterations,
        evaluations: 1,
    };
    if norm_inf(&g) < cfg.gradient_tolerance {
        trace.termination = Termination::GradientNorm;
        return Ok((x, trace));
    }

    let mut history: VecDeque<CurvaturePair> = VecDeque::with_capacity(cfg.memory);
    for _ in 0..cfg.max_iterations {
        let mut dir = two_loop_direction(&g, &history);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let initial_step = if history.is_empty() {
            let g1: f64 = g.iter().map(|v| v.abs()).sum();
            (1.0 / g1).min(1.0)
        } else {
            1.0
        };

        let mut search = LineSearch {
            func: &mut func,
            x0: &x,
            dir: &dir,
            f0: f,
            slope0: slope,
            c1: cfg.wolfe_c1,
            c2: cfg.wolfe_c2,
            budget: cfg.max_line_search_steps,
            evaluations: 0,
        };
        let mut accepted = search.strong_wolfe(initial_step);
        trace.evaluations += search.evaluations;

        if accepted.is_none() {
            // Fall back once to steepest descent.
            let steepest: Vec<f64> = g.iter().map(|v| -v).collect();
            let g1: f64 = g.iter().map(|v| v.abs()).sum();
            let mut fallback = LineSearch {
                func: &mut func,
                x0: &x,
                dir: &steepest,
                f0: f,
                slope0: dot(&g, &steepest),
                c1: cfg.wolfe_c1,
                c2: cfg.wolfe_c2,
                budget: cfg.max_line_search_steps,
                evaluations: 0,
            };
            accepted = fallback.backtrack((1.0 / g1).min(1.0));
            trace.evaluations += fallback.evaluations;
            history.clear();
        }

        let Some(point) = accepted else {
            trace.termination = Termination::LineSearchFailure;
            return Ok((x, trace));
        };

        let s: Vec<f64> = point.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = point.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > CURVATURE_FLOOR * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back(CurvaturePair {
                s,
                y,
                rho: 1.0 / sy,
            });
        }

        let f_prev = f;
        x = point.x;
        f = point.value;
        g = point.grad;
        trace.objective.push(f);
        trace.gradient_norm.push(norm_inf(&g));

        if (f - f_prev).abs() / f_prev.abs().max(1.0) < cfg.relative_tolerance {
            trace.termination = Termination::RelativeChange;
            return Ok((x, trace));
        }
        if norm_inf(&g) < cfg.gradient_tolerance {
            trace.termination = Termination::GradientNorm;
            return Ok((x, trace));
        }
    }
    Ok((x, trace))
}

/// Packs parameters in the optimizer's fixed layout.
pub fn flatten_params(params: &ModelParams) -> Vec<f64> {
    params.flatten()
}

/// Inverse of [`flatten_params`]; the vector must have length `2md + d + m`.
pub fn unflatten_params(v: &[f64], d: usize, m: usize) -> Result<ModelParams> {
    ModelParams::unflatten(v, d, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(a: Vec<f64>) -> impl FnMut(&[f64]) -> (f64, Vec<f64>) {
        move |x| {
            let r: Vec<f64> = x.iter().zip(&a).map(|(xi, ai)| xi - ai).collect();
            (dot(&r, &r), r.iter().map(|v| 2.0 * v).collect())
        }
    }

    pub(crate) fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        (f, g)
    }

    #[test]
    fn quadratic_converges_fast() {
        let a: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        let (x, trace) =
            minimize(quadratic(a.clone()), vec![0.0; 10], &LbfgsConfig::default()).unwrap();
        for (xi, ai) in x.iter().zip(&a) {
            assert!((xi - ai).abs() < 1e-8, "{xi} vs {ai}");
        }
        assert!(trace.iterations() <= 3, "{} iterations", trace.iterations());
    }

    #[test]
    fn rosenbrock_reaches_minimum() {
        let cfg = LbfgsConfig {
            relative_tolerance: 1e-30,
            gradient_tolerance: 1e-10,
            max_iterations: 1000,
            ..LbfgsConfig::default()
        };
        let (x, trace) = minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
        assert!(
            (x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6,
            "{x:?} {:?}",
            trace.termination
        );
        assert!(trace.objective.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn memory_one_still_descends() {
        let cfg = LbfgsConfig {
            memory: 1,
            relative_tolerance: 1e-30,
            gradient_tolerance: 1e-10,
            max_iterations: 5000,
            ..LbfgsConfig::default()
        };
        let (x, trace) = minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
        assert!(trace.objective.windows(2).all(|w| w[1] < w[0]));
        assert!((x[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn convex_quadratic_within_dimension_iterations() {
        // f = ½xᵀAx − bᵀx, A diagonal with spread eigenvalues.
        let diag = [1.0, 3.0, 7.0, 20.0, 50.0];
        let b = [1.0, -2.0, 0.5, 3.0, -1.0];
        let f = move |x: &[f64]| {
            let val: f64 = (0..5)
                .map(|i| 0.5 * diag[i] * x[i] * x[i] - b[i] * x[i])
                .sum();
            let g = (0..5).map(|i| diag[i] * x[i] - b[i]).collect();
            (val, g)
        };
        let cfg = LbfgsConfig {
            relative_tolerance: 1e-30,
            gradient_tolerance: 1e-8,
            wolfe_c2: 0.1,
            ..LbfgsConfig::default()
        };
        let (x, trace) = minimize(f, vec![0.0; 5], &cfg).unwrap();
        for i in 0..5 {
            assert!((x[i] - b[i] / diag[i]).abs() < 1e-6);
        }
        assert!(trace.iterations() <= 12);
    }

    #[test]
    fn deterministic_traces() {
        let cfg = LbfgsConfig::default();
        let a = minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
        let b = minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |_: &[f64]| (f64::NAN, vec![0.0]);
        assert!(minimize(f, vec![0.0], &LbfgsConfig::default()).is_err());
    }

    #[test]
    fn non_finite_region_is_avoided() {
        // log-barrier: infinite for x <= 0, minimum at x = 1.
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                (f64::INFINITY, vec![f64::NAN])
            } else {
                (x[0] - x[0].ln(), vec![1.0 - 1.0 / x[0]])
            }
        };
        let (x, trace) = minimize(f, vec![5.0], &LbfgsConfig::default()).unwrap();
        assert!(x[0] > 0.0);
        assert!(trace.final_objective() < trace.objective[0]);
    }

    #[test]
    fn flat_start_stops_on_gradient() {
        let (_, trace) = minimize(
            quadratic(vec![1.0, 2.0]),
            vec![1.0, 2.0],
            &LbfgsConfig::default(),
        )
        .unwrap();
        assert_eq!(trace.termination, Termination::GradientNorm);
        assert_eq!(trace.iterations(), 0);
    }

    #[test]
    fn invalid_config() {
        let bad = LbfgsConfig {
            wolfe_c1: 0.95,
            ..LbfgsConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = LbfgsConfig {
            memory: 0,
            ..LbfgsConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn trace_text_format() {
        let (_, trace) =
            minimize(quadratic(vec![1.0]), vec![0.0], &LbfgsConfig::default()).unwrap();
        let mut buf = Vec::new();
        trace.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("0 1.0000000000000000e0\n"));
        assert_eq!(text.lines().count(), trace.objective.len());
    }
}
