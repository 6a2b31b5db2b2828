//! BFGS with a strong-Wolfe line search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::derivatives::{energy_and_gradient, max_abs};
use crate::error::Result;
use crate::problem::CostDiagonal;
use crate::statevector::ParameterVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfgsOptions {
    /// Stop once `‖∇E‖∞` falls to this value.
    pub gradient_tol: f64,
    pub max_iterations: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { gradient_tol: 1e-9, max_iterations: 10_000, c1: 1e-4, c2: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRecord {
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub initial_energy: f64,
    pub energy: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub record: OptimizationRecord,
}

struct Point {
    alpha: f64,
    value: f64,
    slope: f64,
    gradient: DVector<f64>,
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    x: &'a DVector<f64>,
    d: &'a DVector<f64>,
    f0: f64,
    slope0: f64,
    opts: BfgsOptions,
    evaluations: usize,
    best: Option<Point>,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, alpha: f64) -> Result<Point> {
        let y = self.x + self.d * alpha;
        let (value, g) = (self.f)(y.as_slice())?;
        self.evaluations += 1;
        let gradient = DVector::from_vec(g);
        let slope = gradient.dot(self.d);
        if value < self.f0 && self.best.as_ref().is_none_or(|b| value < b.value) {
            self.best = Some(Point { alpha, value, slope, gradient: gradient.clone() });
        }
        Ok(Point { alpha, value, slope, gradient })
    }

    /// Armijo, or when the decrease is lost in rounding, the derivative
    /// form of it.
    fn sufficient(&self, p: &Point) -> bool {
        let noise = 1e-14 * (1.0 + self.f0.abs());
        p.value <= self.f0 + self.opts.c1 * p.alpha * self.slope0
            || (p.value <= self.f0 + noise && p.slope <= (2.0 * self.opts.c1 - 1.0) * self.slope0)
    }

    fn curvature(&self, p: &Point) -> bool {
        p.slope.abs() <= -self.opts.c2 * self.slope0
    }

    fn run(&mut self, initial: f64) -> Result<Option<Point>> {
        let mut prev = Point { alpha: 0.0, value: self.f0, slope: self.slope0, gradient: DVector::zeros(0) };
        let mut alpha = initial;
        for i in 0..40 {
            let cur = self.eval(alpha)?;
            if !self.sufficient(&cur) || (i > 0 && cur.value >= prev.value) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Ok(Some(cur));
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            prev = cur;
            alpha *= 2.0;
        }
        Ok(None)
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Result<Option<Point>> {
        for _ in 0..60 {
            let alpha = interpolate(&lo, &hi);
            if (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.abs().max(1.0) {
                break;
            }
            let cur = self.eval(alpha)?;
            if !self.sufficient(&cur) || cur.value >= lo.value {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Ok(Some(cur));
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        Ok(None)
    }
}

/// Cubic interpolation between two bracket ends, safeguarded to the
/// interior of the bracket.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let width = b - a;
    let d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    let mid = 0.5 * (a + b);
    if disc < 0.0 || !disc.is_finite() {
        return mid;
    }
    let d2 = width.signum() * disc.sqrt();
    let t = b - width * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
    let (min, max) = (a.min(b), a.max(b));
    let margin = 0.1 * width.abs();
    if t.is_finite() && t > min + margin && t < max - margin {
        t
    } else {
        mid
    }
}

/// Minimizes a smooth function given by `f(x) -> (value, gradient)`.
pub fn bfgs<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut value, g0) = f(x0)?;
    let mut g = DVector::from_vec(g0);
    let initial_energy = value;
    let mut evaluations = 1;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut converged = g.amax() <= opts.gradient_tol;
    while !converged && iterations < opts.max_iterations {
        let mut d = -(&h * &g);
        let mut slope = g.dot(&d);
        if slope >= 0.0 || !slope.is_finite() {
            h = DMatrix::identity(n, n);
            fresh = true;
            d = -g.clone();
            slope = g.dot(&d);
        }
        let initial = if fresh { (0.1 / d.amax()).min(1.0) } else { 1.0 };
        let mut search =
            LineSearch { f: &mut f, x: &x, d: &d, f0: value, slope0: slope, opts: *opts, evaluations: 0, best: None };
        let found = search.run(initial)?;
        evaluations += search.evaluations;
        let best = search.best.take();
        let Some(point) = found.or(best) else {
            if fresh {
                break;
            }
            h = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        iterations += 1;
        let s = &d * point.alpha;
        let y = &point.gradient - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() {
            if fresh {
                h *= sy / y.norm_squared();
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ, expanded.
            h += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            fresh = false;
        }
        x += s;
        value = point.value;
        g = point.gradient;
        converged = g.amax() <= opts.gradient_tol;
    }
    let gradient: Vec<f64> = g.iter().copied().collect();
    Ok(BfgsOutcome {
        x: x.iter().copied().collect(),
        value,
        record: OptimizationRecord {
            iterations,
            evaluations,
            converged,
            initial_energy,
            energy: value,
            gradient_norm: max_abs(&gradient),
        },
        gradient,
    })
}

pub fn minimize(cost: &CostDiagonal, initial: &ParameterVector) -> Result<(ParameterVector, OptimizationRecord)> {
    minimize_with(cost, initial, &BfgsOptions::default())
}

pub fn minimize_with(
    cost: &CostDiagonal,
    initial: &ParameterVector,
    opts: &BfgsOptions,
) -> Result<(ParameterVector, OptimizationRecord)> {
    let out = bfgs(|x| energy_and_gradient(cost, &ParameterVector::from_flat(x)?), &initial.to_flat(), opts)?;
    Ok((ParameterVector::from_flat(&out.x)?, out.record))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((v, g))
    }

    #[test]
    fn rosenbrock_converges() {
        let out = bfgs(rosenbrock, &[-1.2, 1.0], &BfgsOptions::default()).unwrap();
        assert!(out.record.converged, "{:?}", out.record);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
        assert!(out.record.energy <= out.record.initial_energy);
    }

    #[test]
    fn quadratic_in_few_iterations() {
        let q = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            Ok((x[0] * x[0] + 10.0 * x[1] * x[1] + x[0] * x[1], vec![2.0 * x[0] + x[1], 20.0 * x[1] + x[0]]))
        };
        let out = bfgs(q, &[3.0, -2.0], &BfgsOptions::default()).unwrap();
        assert!(out.record.converged);
        assert!(out.record.iterations < 20);
        let again = bfgs(q, &out.x, &BfgsOptions::default()).unwrap();
        assert!(again.record.iterations <= 2);
    }
}
