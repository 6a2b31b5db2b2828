//! Derivatives of the QAOA energy `E(Γ) = ⟨+|U†(Γ) H_C U(Γ)|+⟩`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QlsError, Result};
use crate::problem::CostDiagonal;
use crate::statevector::{prepare_qaoa_state, Gate, ParameterVector, Statevector};

/// Gradient threshold below which a point counts as stationary.
pub const STATIONARITY_TOL: f64 = 1e-7;

/// Default central-difference step for Hessians.
pub const HESSIAN_STEP: f64 = 1e-5;

const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn energy(cost: &CostDiagonal, params: &ParameterVector) -> Result<f64> {
    prepare_qaoa_state(cost, params)?.energy(cost)
}

/// Energy and its gradient by a reverse sweep.
///
/// With `φ_k` the state after gate `k` and `λ_k` the back-propagated
/// `H_C ψ`, `∂E/∂θ_k = 2 Im⟨λ_k|A_k|φ_k⟩` for generator `A_k`.
pub fn energy_and_gradient(cost: &CostDiagonal, params: &ParameterVector) -> Result<(f64, Vec<f64>)> {
    let mut phi = prepare_qaoa_state(cost, params)?;
    let mut lambda = phi.clone();
    lambda.apply_cost_operator(cost)?;
    let e = phi.energy(cost)?;
    let mut grad = vec![0.0; 2 * params.depth()];
    for gate in params.gates().rev() {
        let element = match gate {
            Gate::Cost { .. } => lambda.diagonal_element(cost.values(), &phi)?,
            Gate::Mixer { .. } => lambda.mixer_element(&phi)?,
        };
        grad[gate.flat_index()] = 2.0 * element.im;
        phi.unapply_gate(cost, gate);
        lambda.unapply_gate(cost, gate);
    }
    Ok((e, grad))
}

pub fn gradient(cost: &CostDiagonal, params: &ParameterVector) -> Result<Vec<f64>> {
    Ok(energy_and_gradient(cost, params)?.1)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// `∂^k U|+⟩` with `-i·A` inserted after each listed gate.
fn derivative_state(cost: &CostDiagonal, params: &ParameterVector, inserts: &[usize]) -> Result<Statevector> {
    let mut psi = Statevector::plus(cost.num_qubits())?;
    for gate in params.gates() {
        psi.apply_gate(cost, gate);
        for _ in inserts.iter().filter(|&&k| k == gate.flat_index()) {
            psi.apply_generator(cost, gate);
            psi.scale(-I);
        }
    }
    Ok(psi)
}

/// Analytic `∂_i ∂_j E` from four forward evolutions.
pub fn second_derivative(cost: &CostDiagonal, params: &ParameterVector, i: usize, j: usize) -> Result<f64> {
    let dim = 2 * params.depth();
    if i >= dim || j >= dim {
        return Err(QlsError::DimensionMismatch { expected: dim, found: i.max(j) + 1 });
    }
    let psi = prepare_qaoa_state(cost, params)?;
    let di = derivative_state(cost, params, &[i])?;
    let dj = derivative_state(cost, params, &[j])?;
    let dij = derivative_state(cost, params, &[i, j])?;
    let c = cost.values();
    Ok(2.0 * psi.diagonal_element(c, &dij)?.re + 2.0 * di.diagonal_element(c, &dj)?.re)
}

/// Symmetric Hessian in the flat `(β; γ)` layout.
#[derive(Debug, Clone)]
pub struct HessianMatrix {
    pub entries: DMatrix<f64>,
    pub origin: ParameterVector,
}

impl HessianMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }
}

pub fn hessian(cost: &CostDiagonal, params: &ParameterVector) -> Result<HessianMatrix> {
    hessian_with_step(cost, params, HESSIAN_STEP)
}

/// Central differences of the analytic gradient, symmetrized.
pub fn hessian_with_step(cost: &CostDiagonal, params: &ParameterVector, step: f64) -> Result<HessianMatrix> {
    let x = params.to_flat();
    let dim = x.len();
    let columns: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let shifted = |sign: f64| {
                let mut y = x.clone();
                y[j] += sign * step;
                gradient(cost, &ParameterVector::from_flat(&y)?)
            };
            let (plus, minus) = (shifted(1.0)?, shifted(-1.0)?);
            Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * step)).collect())
        })
        .collect::<Result<_>>()?;
    let raw = DMatrix::from_fn(dim, dim, |i, j| columns[j][i]);
    Ok(HessianMatrix { entries: (&raw + raw.transpose()) * 0.5, origin: params.clone() })
}

/// Coupling `b = 8 Re⟨+|H_C U† H_C U|+⟩` of the first-layer insertion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BScalar {
    pub value: f64,
    /// `8 Im⟨+|H_C U† H_C U|+⟩`; vanishes at stationary points.
    pub imaginary: f64,
    pub stationary: bool,
}

impl BScalar {
    /// The Hessian entry `∂β∂γE` at the transition state, which is `-b`.
    pub fn hessian_coupling(&self) -> f64 {
        -self.value
    }
}

/// `U|+⟩` and `U H_C|+⟩`.
pub(crate) fn evolved_pair(cost: &CostDiagonal, params: &ParameterVector) -> Result<(Statevector, Statevector)> {
    let psi = prepare_qaoa_state(cost, params)?;
    let mut chi = Statevector::plus(cost.num_qubits())?;
    chi.apply_cost_operator(cost)?;
    chi.evolve(cost, params)?;
    Ok((psi, chi))
}

fn is_stationary(cost: &CostDiagonal, params: &ParameterVector) -> Result<bool> {
    if params.depth() == 0 {
        return Ok(true);
    }
    Ok(max_abs(&gradient(cost, params)?) <= STATIONARITY_TOL)
}

pub fn scalar_b(cost: &CostDiagonal, min_params: &ParameterVector) -> Result<BScalar> {
    let (psi, chi) = evolved_pair(cost, min_params)?;
    let z = chi.diagonal_element(cost.values(), &psi)? * 8.0;
    Ok(BScalar { value: z.re, imaginary: z.im, stationary: is_stationary(cost, min_params)? })
}

/// `⟨+|[H_C, [H_B, H̃_C]]|+⟩` with `H̃_C = U† H_C U`, by explicit operator
/// application (no use of `H_B|+⟩ = -N|+⟩`).
pub fn scalar_b_nested_commutator(cost: &CostDiagonal, min_params: &ParameterVector) -> Result<f64> {
    let n = cost.num_qubits();
    let heisenberg = |mut s: Statevector| -> Result<Statevector> {
        s.evolve(cost, min_params)?;
        s.apply_cost_operator(cost)?;
        s.evolve_adjoint(cost, min_params)?;
        Ok(s)
    };
    let apply_c = |mut s: Statevector| -> Result<Statevector> {
        s.apply_cost_operator(cost)?;
        Ok(s)
    };
    let apply_b = |mut s: Statevector| -> Statevector {
        s.apply_mixer_operator();
        s
    };
    let plus = Statevector::plus(n)?;
    // [C,[B,H]] = CBH - CHB - BHC + HBC
    let cbh = apply_c(apply_b(heisenberg(plus.clone())?))?;
    let chb = apply_c(heisenberg(apply_b(plus.clone()))?)?;
    let bhc = apply_b(heisenberg(apply_c(plus.clone())?)?);
    let hbc = heisenberg(apply_b(apply_c(plus.clone())?))?;
    let total = plus.inner(&cbh)? - plus.inner(&chb)? - plus.inner(&bhc)? + plus.inner(&hbc)?;
    Ok(total.re)
}

/// Hessian-convention coupling `∂β∂γE` of the last-layer insertion:
/// `2 Re⟨ψ|H_C² H_B|ψ⟩ - 2⟨ψ|H_C H_B H_C|ψ⟩` with `ψ = U|+⟩`.
pub fn last_layer_coupling(cost: &CostDiagonal, min_params: &ParameterVector) -> Result<f64> {
    let psi = prepare_qaoa_state(cost, min_params)?;
    let mut c_psi = psi.clone();
    c_psi.apply_cost_operator(cost)?;
    let mut cc_psi = c_psi.clone();
    cc_psi.apply_cost_operator(cost)?;
    let ccb = cc_psi.mixer_element(&psi)?;
    let cbc = c_psi.mixer_element(&c_psi)?;
    Ok(2.0 * ccb.re - 2.0 * cbc.re)
}

/// How a bulk coupling is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingMethod {
    Analytic,
    FiniteDifference,
}

/// Bulk coupling `b̄ = ∂_{β_l}∂_{γ_l}E(Γ_TS) - ∂_{β_{l-1}}∂_{γ_l}E(Γ_min)`
/// for the symmetric insertion at layer `l` (`2 ≤ l ≤ p`).
pub fn scalar_b_bar(
    cost: &CostDiagonal,
    min_params: &ParameterVector,
    layer: usize,
    method: CouplingMethod,
) -> Result<f64> {
    let p = min_params.depth();
    if layer < 2 || layer > p {
        return Err(QlsError::LayerOutOfRange { layer, depth: p });
    }
    let ts = crate::transition::TsIndex::symmetric(layer).construct(min_params)?;
    let (bz, gz) = (ts.beta_index(layer), ts.gamma_index(layer));
    let (bp, gp) = (min_params.beta_index(layer - 1), min_params.gamma_index(layer));
    match method {
        CouplingMethod::Analytic => {
            Ok(second_derivative(cost, &ts, bz, gz)? - second_derivative(cost, min_params, bp, gp)?)
        }
        CouplingMethod::FiniteDifference => {
            let h_ts = hessian(cost, &ts)?;
            let h_min = hessian(cost, min_params)?;
            Ok(h_ts.get(bz, gz) - h_min.get(bp, gp))
        }
    }
}

/// The quartic slice coefficient `∂²_{γ₁}E(Γ_TS)` and its approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticCoefficient {
    /// `2⟨+|H_C H̃_C H_C|+⟩ - 2 Re⟨+|H̃_C H_C²|+⟩`.
    pub exact: f64,
    /// `2⟨+|H_C H̃_C H_C|+⟩ - 2 n_c E_min`.
    pub approx: f64,
}

pub fn quartic_coefficient(cost: &CostDiagonal, min_params: &ParameterVector) -> Result<QuarticCoefficient> {
    let (psi, chi) = evolved_pair(cost, min_params)?;
    let c = cost.values();
    let sandwich = chi.diagonal_element(c, &chi)?.re;
    let mut chi2 = Statevector::plus(cost.num_qubits())?;
    chi2.apply_cost_operator(cost)?;
    chi2.apply_cost_operator(cost)?;
    chi2.evolve(cost, min_params)?;
    let cross = psi.diagonal_element(c, &chi2)?.re;
    let e_min = psi.energy(cost)?;
    Ok(QuarticCoefficient { exact: 2.0 * sandwich - 2.0 * cross, approx: 2.0 * sandwich - 2.0 * cost.n_c() * e_min })
}

/// Split of `U|+⟩` and `U H_C|+⟩` against a reference eigenstate `|E₀⟩`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureDecomposition {
    pub reference_index: usize,
    pub reference_energy: f64,
    pub alpha0: Complex64,
    pub alpha_perp: f64,
    pub kappa0: Complex64,
    pub kappa_perp: f64,
    /// `⟨φ₀|H_C - E₀|ψ₀⟩`.
    pub matrix_element: Complex64,
    /// `⟨φ₀|ψ₀⟩`.
    pub perp_overlap: Complex64,
    /// `4√2 √n_c α⊥ κ⊥ |⟨φ₀|H_C - E₀|ψ₀⟩|`.
    pub reconstructed_curvature: f64,
    /// More than one basis state attains the reference energy.
    pub ambiguous: bool,
}

impl CurvatureDecomposition {
    /// `α⁰ (κ⁰)* + α⊥ κ⊥ ⟨φ₀|ψ₀⟩`, zero by orthogonality of `|+⟩` and `H_C|+⟩`.
    pub fn orthogonality_residual(&self) -> Complex64 {
        self.alpha0 * self.kappa0.conj() + self.perp_overlap * (self.alpha_perp * self.kappa_perp)
    }
}

pub fn curvature_decomposition(cost: &CostDiagonal, min_params: &ParameterVector) -> Result<CurvatureDecomposition> {
    let (psi, chi) = evolved_pair(cost, min_params)?;
    decompose(cost, &psi, &chi, cost.ground_index())
}

/// Decomposition of explicit states `psi` (unit norm) and `chi` (norm `√n_c`)
/// against the basis state `reference`.
pub fn decompose(
    cost: &CostDiagonal,
    psi: &Statevector,
    chi: &Statevector,
    reference: usize,
) -> Result<CurvatureDecomposition> {
    let norm = cost.n_c().sqrt();
    let e0 = cost.values()[reference];
    let alpha0 = psi.amplitudes()[reference];
    let kappa0 = chi.amplitudes()[reference] / norm;
    let alpha_perp = (1.0 - alpha0.norm_sqr()).max(0.0).sqrt();
    let kappa_perp = (1.0 - kappa0.norm_sqr()).max(0.0).sqrt();
    let perp = |s: &Statevector, scale: f64, weight: f64| -> Result<Statevector> {
        let mut a: Vec<Complex64> = s.amplitudes().iter().map(|x| x / scale).collect();
        a[reference] = Complex64::new(0.0, 0.0);
        if weight > 0.0 {
            a.iter_mut().for_each(|x| *x /= weight);
        }
        Statevector::from_amplitudes(cost.num_qubits(), a)
    };
    let psi0 = perp(psi, 1.0, alpha_perp)?;
    let phi0 = perp(chi, norm, kappa_perp)?;
    let shifted: Vec<f64> = cost.values().iter().map(|v| v - e0).collect();
    let matrix_element = phi0.diagonal_element(&shifted, &psi0)?;
    let perp_overlap = phi0.inner(&psi0)?;
    let reconstructed_curvature = 4.0 * 2f64.sqrt() * norm * alpha_perp * kappa_perp * matrix_element.norm();
    let ambiguous = cost.values().iter().filter(|&&v| v == e0).count() > 1;
    Ok(CurvatureDecomposition {
        reference_index: reference,
        reference_energy: e0,
        alpha0,
        alpha_perp,
        kappa0,
        kappa_perp,
        matrix_element,
        perp_overlap,
        reconstructed_curvature,
        ambiguous,
    })
}
