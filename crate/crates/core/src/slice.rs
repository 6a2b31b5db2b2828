//! Energy along the index-1 direction of a transition state and the
//! quartic lower bound on the improvement at depth `p + 1`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derivatives::{energy, quartic_coefficient};
use crate::error::{QlsError, Result};
use crate::problem::{hc_squared_decomposition, CostDiagonal, ProblemGraph};
use crate::statevector::{ParameterVector, Statevector};
use crate::transition::{self, EigenvectorVariant, TsIndex, TsKind};

/// `E(Γ_TS + ε δ) - E(Γ_TS)`; the transition state shares its energy with the minimum.
pub fn exact_slice_energy(
    cost: &CostDiagonal,
    ts_params: &ParameterVector,
    delta: &[f64],
    epsilon: f64,
) -> Result<f64> {
    let x = ts_params.to_flat();
    if delta.len() != x.len() {
        return Err(QlsError::DimensionMismatch { expected: x.len(), found: delta.len() });
    }
    let moved: Vec<f64> = x.iter().zip(delta).map(|(a, d)| a + epsilon * d).collect();
    Ok(energy(cost, &ParameterVector::from_flat(&moved)?)? - energy(cost, ts_params)?)
}

/// Local expansion of the energy along the estimated index-1 direction of
/// the first-layer transition state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceModel {
    pub lambda_ts: f64,
    /// `∂²_{γ₁}E` at the transition state.
    pub quartic_coeff: f64,
    pub quartic_approx: f64,
    /// Exact `ε³` coefficient of the slice.
    pub cubic_coeff: f64,
    /// Exact `ε⁴` coefficient of the slice.
    pub taylor_quartic: f64,
    /// `⟨+|H̃_C H_C|+⟩`, `⟨+|H̃_C T₂|+⟩`, `⟨+|H̃_C T₄|+⟩`.
    pub hc_contraction: Complex64,
    pub t2_contraction: Complex64,
    pub t4_contraction: Complex64,
    /// Sign of `b = 8 Re⟨+|H_C H̃_C|+⟩`.
    pub sign_b: f64,
    pub include_cubic: bool,
    pub ts_params: ParameterVector,
    pub direction: Vec<f64>,
}

impl SliceModel {
    /// `(λ/2) ε² + c ε⁴`.
    pub fn symmetric_delta_e(&self, eps: f64) -> f64 {
        0.5 * self.lambda_ts * eps * eps + self.quartic_coeff * eps.powi(4)
    }

    /// Fourth-order Taylor polynomial including the cubic term.
    pub fn with_cubic_delta_e(&self, eps: f64) -> f64 {
        let e2 = eps * eps;
        0.5 * self.lambda_ts * e2 + self.cubic_coeff * e2 * eps + self.taylor_quartic * e2 * e2
    }

    /// Closed trigonometric resummation in `sin(√2 ε)` harmonics, evaluated
    /// along `direction`.
    pub fn trigonometric_delta_e(&self, eps: f64) -> f64 {
        // The resummation is written for the opposite orientation.
        let e = -eps;
        let sb = self.sign_b;
        let x = 2.0 * SQRT_2 * sb * e;
        let s = x.sin();
        let half = (SQRT_2 * sb * e).sin().powi(2);
        let e2 = e * e;
        -e * s * self.hc_contraction.re
            - 0.25 * e2 * s * self.t2_contraction.im
            - 0.5 * e2 * s * (1.0 - x.cos()) * self.t4_contraction.im
            + 0.5 * e2 * half * self.quartic_coeff
            + 0.5 * e2 * half * self.t2_contraction.re
            + 0.5 * e2 * s * s * self.t4_contraction.re
    }

    pub fn evaluate(&self, eps: f64) -> f64 {
        if self.include_cubic {
            self.with_cubic_delta_e(eps)
        } else {
            self.symmetric_delta_e(eps)
        }
    }

    /// Cubic coefficient from the `T₂` contraction alone.
    pub fn cubic_from_t2(&self) -> f64 {
        FRAC_1_SQRT_2 * self.sign_b * self.t2_contraction.im
    }
}

/// Coefficients of `ε², ε³, ε⁴` in `e^{iεC/2} e^{iεθB'} e^{-iεC/2}|+⟩`
/// with `B' = H_B + N`, which annihilates `|+⟩`.
fn series_terms(cost: &CostDiagonal, theta: f64) -> Result<[Statevector; 3]> {
    let n = cost.num_qubits();
    let plus = Statevector::plus(n)?;
    let mut powers = vec![plus.clone()];
    for _ in 0..3 {
        let mut next = powers.last().unwrap().clone();
        next.apply_cost_operator(cost)?;
        powers.push(next);
    }
    let shifted_mixer = |s: &Statevector| -> Statevector {
        let mut out = s.clone();
        out.apply_mixer_operator();
        let a: Vec<Complex64> = out.amplitudes().iter().zip(s.amplitudes()).map(|(b, x)| b + x * n as f64).collect();
        Statevector::from_amplitudes(n, a).expect("same dimension")
    };
    let zero = vec![Complex64::new(0.0, 0.0); 1 << n];
    let mut w: Vec<Vec<Complex64>> = vec![zero.clone(), zero.clone(), zero];
    let half = 0.5;
    let fact = [1.0, 1.0, 2.0, 6.0];
    let i = Complex64::new(0.0, 1.0);
    for k in 1..=3usize {
        let mut v = powers[k].clone();
        for nb in 1..=3usize {
            v = shifted_mixer(&v);
            let mut u = v.clone();
            for m in 0..=2usize {
                let q = m + nb + k;
                if q > 4 {
                    break;
                }
                if m > 0 {
                    u.apply_cost_operator(cost)?;
                }
                let coef = (i * half).powu(m as u32) / fact[m] * (i * theta).powu(nb as u32) / fact[nb]
                    * (-i * half).powu(k as u32)
                    / fact[k];
                for (acc, x) in w[q - 2].iter_mut().zip(u.amplitudes()) {
                    *acc += coef * x;
                }
            }
        }
    }
    let mut out = w.into_iter().map(|a| Statevector::from_amplitudes(n, a));
    Ok([out.next().unwrap()?, out.next().unwrap()?, out.next().unwrap()?])
}

/// Builds the slice model at `TS(1,1)` of `min_params`.
pub fn build_slice_model(
    cost: &CostDiagonal,
    graph: &ProblemGraph,
    min_params: &ParameterVector,
    include_cubic: bool,
) -> Result<SliceModel> {
    let p = min_params.depth();
    let index = TsIndex::symmetric(1);
    let h = transition::coupling(cost, min_params, index)?;
    if transition::is_degenerate(cost, h) {
        return Err(QlsError::Degenerate { coupling: h });
    }
    let s = if h < 0.0 { -1.0 } else { 1.0 };
    let n = cost.num_qubits();
    let heisenberg = |mut v: Statevector| -> Result<Statevector> {
        v.evolve(cost, min_params)?;
        v.apply_cost_operator(cost)?;
        v.evolve_adjoint(cost, min_params)?;
        Ok(v)
    };
    let plus = Statevector::plus(n)?;
    let h_plus = heisenberg(plus.clone())?;
    let [w2, w3, w4] = series_terms(cost, s * FRAC_1_SQRT_2)?;
    let c2 = 2.0 * h_plus.inner(&w2)?.re;
    let c3 = 2.0 * h_plus.inner(&w3)?.re;
    let c4 = 2.0 * h_plus.inner(&w4)?.re + w2.inner(&heisenberg(w2.clone())?)?.re;
    debug_assert!((c2 - transition::lambda_estimate(TsKind::FirstLayer, h) / 2.0).abs() < 1e-8 * (1.0 + c2.abs()));

    let squared = hc_squared_decomposition(graph);
    let t2 = squared.t2.diagonal(n);
    let t4 = squared.t4.diagonal(n);
    let quartic = quartic_coefficient(cost, min_params)?;
    Ok(SliceModel {
        lambda_ts: transition::lambda_estimate(TsKind::FirstLayer, h),
        quartic_coeff: quartic.exact,
        quartic_approx: quartic.approx,
        cubic_coeff: c3,
        taylor_quartic: c4,
        hc_contraction: h_plus.diagonal_element(cost.values(), &plus)?,
        t2_contraction: h_plus.diagonal_element(&t2, &plus)?,
        t4_contraction: h_plus.diagonal_element(&t4, &plus)?,
        sign_b: -s,
        include_cubic,
        ts_params: index.construct(min_params)?,
        direction: transition::delta_estimate(index, p, h, EigenvectorVariant::Derived),
    })
}

fn check_minimum(model: &SliceModel) -> Result<()> {
    if model.lambda_ts < 0.0 && model.quartic_coeff > 0.0 {
        Ok(())
    } else {
        Err(QlsError::NoMinimum { curvature: model.lambda_ts, quartic: model.quartic_coeff })
    }
}

/// `ε* = √(-λ / 4c)`.
pub fn epsilon_star(model: &SliceModel) -> Result<f64> {
    check_minimum(model)?;
    Ok((-model.lambda_ts / (4.0 * model.quartic_coeff)).sqrt())
}

/// `ΔE(ε*) = -λ² / 16c`.
pub fn delta_e_bound(model: &SliceModel) -> Result<f64> {
    check_minimum(model)?;
    Ok(-model.lambda_ts * model.lambda_ts / (16.0 * model.quartic_coeff))
}

/// Minimizes `f` on `[a, b]` by golden-section search.
pub fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceMinimum {
    pub epsilon: f64,
    pub delta_e: f64,
}

const SLICE_LIMIT: f64 = 1.0;

/// First local minimum of the exact slice on each side of the transition
/// state within `|ε| ≤ 1`; the deeper one is returned.
pub fn slice_minimum(cost: &CostDiagonal, ts_params: &ParameterVector, delta: &[f64]) -> Result<SliceMinimum> {
    let f = |e: f64| exact_slice_energy(cost, ts_params, delta, e);
    let mut best = SliceMinimum { epsilon: 0.0, delta_e: 0.0 };
    for side in [1.0, -1.0] {
        let mut prev = 0.0;
        let mut cur = 1e-3;
        let mut f_cur = f(side * cur)?;
        loop {
            let next = (cur * 1.5).min(SLICE_LIMIT);
            let f_next = f(side * next)?;
            if f_next > f_cur || next >= SLICE_LIMIT {
                let hi = if f_next > f_cur { next } else { SLICE_LIMIT };
                let (e, v) = golden_section(|x| f(side * x), prev, hi, 1e-9)?;
                if v < best.delta_e {
                    best = SliceMinimum { epsilon: side * e, delta_e: v };
                }
                break;
            }
            prev = cur;
            cur = next;
            f_cur = f_next;
        }
    }
    Ok(best)
}

/// Largest predicted improvement over all transition states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestTsBound {
    pub value: f64,
    pub index: TsIndex,
    /// Closed-form bound at `TS(1,1)`, when defined.
    pub first_layer_bound: Option<f64>,
    /// Exact slice minimum along each non-degenerate estimate direction.
    pub slice_minima: Vec<(TsIndex, SliceMinimum)>,
}

/// Combines the closed-form `TS(1,1)` bound with exact slice minima of the
/// other `2p` transition states.
pub fn best_ts_bound(cost: &CostDiagonal, graph: &ProblemGraph, min_params: &ParameterVector) -> Result<BestTsBound> {
    let p = min_params.depth();
    let first = build_slice_model(cost, graph, min_params, false).and_then(|m| delta_e_bound(&m)).ok();
    let slice_minima: Vec<(TsIndex, SliceMinimum)> = TsIndex::admissible(p)
        .into_par_iter()
        .map(|index| -> Result<Option<(TsIndex, SliceMinimum)>> {
            match transition::approx_eigenpair(cost, min_params, index) {
                Ok(pair) => {
                    let ts = index.construct(min_params)?;
                    Ok(Some((index, slice_minimum(cost, &ts, &pair.delta)?)))
                }
                Err(QlsError::Degenerate { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut best: Option<(f64, TsIndex)> = first.map(|v| (v, TsIndex::symmetric(1)));
    for (index, m) in &slice_minima {
        if *index == TsIndex::symmetric(1) {
            continue;
        }
        if best.is_none_or(|(v, _)| m.delta_e < v) {
            best = Some((m.delta_e, *index));
        }
    }
    let (value, index) = best.ok_or(QlsError::Degenerate { coupling: 0.0 })?;
    Ok(BestTsBound { value, index, first_layer_bound: first, slice_minima })
}

/// One row of a slice scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceRow {
    pub epsilon: f64,
    pub exact_delta_e: f64,
    pub model_delta_e: f64,
    pub model_with_cubic_delta_e: f64,
}

pub fn slice_scan(cost: &CostDiagonal, model: &SliceModel, epsilons: &[f64]) -> Result<Vec<SliceRow>> {
    epsilons
        .par_iter()
        .map(|&e| {
            Ok(SliceRow {
                epsilon: e,
                exact_delta_e: exact_slice_energy(cost, &model.ts_params, &model.direction, e)?,
                model_delta_e: model.symmetric_delta_e(e),
                model_with_cubic_delta_e: model.with_cubic_delta_e(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::strategies::{depth_one_bootstrap, single_ts_step, StepOptions};
    use crate::problem::generate_regular_graph;

    fn setup() -> (ProblemGraph, CostDiagonal, ParameterVector) {
        let graph = generate_regular_graph(8, 3, false, 2).unwrap();
        let cost = CostDiagonal::build(&graph).unwrap();
        let (p1, _) = depth_one_bootstrap(&cost).unwrap();
        let p2 = single_ts_step(&cost, &p1, &StepOptions::default()).unwrap().params;
        (graph, cost, p2)
    }

    #[test]
    fn models_vanish_at_zero() {
        let (graph, cost, min) = setup();
        let m = build_slice_model(&cost, &graph, &min, true).unwrap();
        assert_eq!(m.symmetric_delta_e(0.0), 0.0);
        assert_eq!(m.with_cubic_delta_e(0.0), 0.0);
        assert_eq!(m.trigonometric_delta_e(0.0), 0.0);
        assert!(exact_slice_energy(&cost, &m.ts_params, &m.direction, 0.0).unwrap().abs() < 1e-14);
        let rows = slice_scan(&cost, &m, &[-0.1, 0.0, 0.1]).unwrap();
        assert_eq!(rows[1].exact_delta_e.abs() + rows[1].model_delta_e.abs(), 0.0);
    }

    #[test]
    fn curvature_matches_exact_slice() {
        let (graph, cost, min) = setup();
        let m = build_slice_model(&cost, &graph, &min, false).unwrap();
        let h = 1e-3;
        let f = |e| exact_slice_energy(&cost, &m.ts_params, &m.direction, e).unwrap();
        let second = (f(h) + f(-h)) / (h * h);
        assert!((second - m.lambda_ts).abs() < 1e-3 * m.lambda_ts.abs(), "{second} vs {}", m.lambda_ts);
        let third = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (12.0 * h.powi(3));
        assert!((third - m.cubic_coeff).abs() < 1e-2 * (1.0 + m.cubic_coeff.abs()), "{third} vs {}", m.cubic_coeff);
    }

    #[test]
    fn residual_orders() {
        let (graph, cost, min) = setup();
        let m = build_slice_model(&cost, &graph, &min, true).unwrap();
        let res = |e: f64, f: &dyn Fn(f64) -> f64| {
            (exact_slice_energy(&cost, &m.ts_params, &m.direction, e).unwrap() - f(e)).abs()
        };
        let ratio = |f: &dyn Fn(f64) -> f64| res(2e-2, f) / res(1e-2, f);
        assert!((ratio(&|e| m.with_cubic_delta_e(e)) / 32.0 - 1.0).abs() < 0.3);
        assert!((ratio(&|e| m.symmetric_delta_e(e)) / 8.0 - 1.0).abs() < 0.3);
        assert!(ratio(&|e| m.trigonometric_delta_e(e)) > 12.0);
    }

    #[test]
    fn bound_is_model_minimum() {
        let (graph, cost, min) = setup();
        let m = build_slice_model(&cost, &graph, &min, false).unwrap();
        let eps = epsilon_star(&m).unwrap();
        let bound = delta_e_bound(&m).unwrap();
        assert!((m.symmetric_delta_e(eps) - bound).abs() < 1e-12 * bound.abs());
        for t in [0.9, 1.1] {
            assert!(m.symmetric_delta_e(t * eps) > bound);
        }
        let (e, v) = golden_section(|x| Ok(m.symmetric_delta_e(x)), 0.0, 2.0 * eps, 1e-10).unwrap();
        assert!((e - eps).abs() < 1e-6 && (v - bound).abs() < 1e-12);
    }

    #[test]
    fn no_minimum_without_negative_curvature() {
        let (graph, cost, min) = setup();
        let mut m = build_slice_model(&cost, &graph, &min, false).unwrap();
        m.quartic_coeff = -1.0;
        assert!(matches!(epsilon_star(&m), Err(QlsError::NoMinimum { .. })));
        m.quartic_coeff = 1.0;
        m.lambda_ts = 0.5;
        assert!(matches!(delta_e_bound(&m), Err(QlsError::NoMinimum { .. })));
    }

    #[test]
    fn best_bound_covers_first_layer() {
        let (graph, cost, min) = setup();
        let best = best_ts_bound(&cost, &graph, &min).unwrap();
        assert!(best.value <= best.first_layer_bound.unwrap());
        assert!(best.value < 0.0);
        for (_, s) in &best.slice_minima {
            assert!(s.delta_e <= 0.0 && s.epsilon.abs() <= SLICE_LIMIT);
        }
    }

    #[test]
    fn cubic_term_comes_from_t2() {
        let (graph, cost, min) = setup();
        let m = build_slice_model(&cost, &graph, &min, true).unwrap();
        assert!((m.cubic_from_t2() - m.cubic_coeff).abs() < 1e-9 * m.cubic_coeff.abs());
    }
}
