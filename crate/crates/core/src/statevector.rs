//! Matrix-free statevector engine for QAOA circuits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QlsError, Result};
use crate::problem::{CostDiagonal, MAX_QUBITS};

/// QAOA angles. Flat layout is `(β₁..β_p, γ₁..γ_p)`; layer `k` applies
/// `e^{-iγ_k H_C}` and then `e^{-iβ_k H_B}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    betas: Vec<f64>,
    gammas: Vec<f64>,
}

impl ParameterVector {
    pub fn new(betas: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        if betas.len() != gammas.len() {
            return Err(QlsError::DimensionMismatch { expected: betas.len(), found: gammas.len() });
        }
        Ok(Self { betas, gammas })
    }

    pub fn zeros(depth: usize) -> Self {
        Self { betas: vec![0.0; depth], gammas: vec![0.0; depth] }
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(QlsError::InvalidInput(format!("flat parameter vector has odd length {}", flat.len())));
        }
        let (b, g) = flat.split_at(flat.len() / 2);
        Ok(Self { betas: b.to_vec(), gammas: g.to_vec() })
    }

    pub fn depth(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.betas.clone();
        flat.extend_from_slice(&self.gammas);
        flat
    }

    /// Flat index of `β_layer` (1-based layer).
    pub fn beta_index(&self, layer: usize) -> usize {
        layer - 1
    }

    /// Flat index of `γ_layer` (1-based layer).
    pub fn gamma_index(&self, layer: usize) -> usize {
        self.depth() + layer - 1
    }

    /// Gates in application order.
    pub(crate) fn gates(&self) -> impl DoubleEndedIterator<Item = Gate> + '_ {
        (0..self.depth()).flat_map(move |k| {
            [
                Gate::Cost { angle: self.gammas[k], flat: self.depth() + k },
                Gate::Mixer { angle: self.betas[k], flat: k },
            ]
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Gate {
    Cost { angle: f64, flat: usize },
    Mixer { angle: f64, flat: usize },
}

impl Gate {
    pub fn flat_index(&self) -> usize {
        match *self {
            Gate::Cost { flat, .. } | Gate::Mixer { flat, .. } => flat,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn check_cap(n: usize) -> Result<()> {
    if n == 0 {
        return Err(QlsError::InvalidInput("statevector needs at least one qubit".into()));
    }
    if n > MAX_QUBITS {
        return Err(QlsError::ResourceRefused { what: "statevector", requested: n, cap: MAX_QUBITS });
    }
    Ok(())
}

impl Statevector {
    /// Uniform superposition `|+⟩^{⊗n}`.
    pub fn plus(n: usize) -> Result<Self> {
        check_cap(n)?;
        let dim = 1usize << n;
        let a = Complex64::new((dim as f64).powf(-0.5), 0.0);
        Ok(Self { num_qubits: n, amplitudes: vec![a; dim] })
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_cap(n)?;
        let dim = 1usize << n;
        if index >= dim {
            return Err(QlsError::InvalidInput(format!("basis index {index} out of range")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { num_qubits: n, amplitudes })
    }

    pub fn from_amplitudes(n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_cap(n)?;
        if amplitudes.len() != 1 << n {
            return Err(QlsError::DimensionMismatch { expected: 1 << n, found: amplitudes.len() });
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QlsError::InvalidInput("non-finite amplitude".into()));
        }
        Ok(Self { num_qubits: n, amplitudes })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    fn check(&self, cost: &CostDiagonal) -> Result<()> {
        if cost.dimension() != self.amplitudes.len() {
            return Err(QlsError::DimensionMismatch { expected: self.amplitudes.len(), found: cost.dimension() });
        }
        Ok(())
    }

    fn check_state(&self, other: &Statevector) -> Result<()> {
        if other.amplitudes.len() != self.amplitudes.len() {
            return Err(QlsError::DimensionMismatch { expected: self.amplitudes.len(), found: other.amplitudes.len() });
        }
        Ok(())
    }

    /// `ψ ← e^{-iγ H_C} ψ`.
    pub fn apply_cost_phase(&mut self, cost: &CostDiagonal, gamma: f64) -> Result<()> {
        self.check(cost)?;
        match cost.levels() {
            Some(table) => {
                let phases: Vec<Complex64> =
                    table.levels.iter().map(|&v| Complex64::from_polar(1.0, -gamma * v)).collect();
                for (a, &i) in self.amplitudes.iter_mut().zip(&table.index) {
                    *a *= phases[i as usize];
                }
            }
            None => {
                for (a, &v) in self.amplitudes.iter_mut().zip(cost.values()) {
                    *a *= Complex64::from_polar(1.0, -gamma * v);
                }
            }
        }
        Ok(())
    }

    /// `ψ ← e^{-iβ H_B} ψ = ∏_q (cos β + i sin β σˣ_q) ψ`.
    pub fn apply_mixer(&mut self, beta: f64) {
        let (s, c) = beta.sin_cos();
        for q in 0..self.num_qubits {
            let stride = 1 << q;
            for block in self.amplitudes.chunks_exact_mut(2 * stride) {
                let (lo, hi) = block.split_at_mut(stride);
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (ar, ai, br, bi) = (a.re, a.im, b.re, b.im);
                    *a = Complex64::new(c * ar - s * bi, c * ai + s * br);
                    *b = Complex64::new(c * br - s * ai, c * bi + s * ar);
                }
            }
        }
    }

    /// `ψ ← H_C ψ` (not normalized).
    pub fn apply_cost_operator(&mut self, cost: &CostDiagonal) -> Result<()> {
        self.check(cost)?;
        self.apply_diagonal(cost.values());
        Ok(())
    }

    /// `ψ ← D ψ` for a diagonal `D` (not normalized).
    pub fn apply_diagonal(&mut self, diagonal: &[f64]) {
        for (a, &v) in self.amplitudes.iter_mut().zip(diagonal) {
            *a *= v;
        }
    }

    /// `ψ ← H_B ψ` with `H_B = -Σ σˣ` (not normalized).
    pub fn apply_mixer_operator(&mut self) {
        let src = self.amplitudes.clone();
        for (z, a) in self.amplitudes.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for q in 0..self.num_qubits {
                acc += src[z ^ (1 << q)];
            }
            *a = -acc;
        }
    }

    pub(crate) fn apply_gate(&mut self, cost: &CostDiagonal, gate: Gate) {
        match gate {
            Gate::Cost { angle, .. } => self.apply_cost_phase(cost, angle).expect("dimensions checked by caller"),
            Gate::Mixer { angle, .. } => self.apply_mixer(angle),
        }
    }

    pub(crate) fn unapply_gate(&mut self, cost: &CostDiagonal, gate: Gate) {
        match gate {
            Gate::Cost { angle, .. } => self.apply_cost_phase(cost, -angle).expect("dimensions checked by caller"),
            Gate::Mixer { angle, .. } => self.apply_mixer(-angle),
        }
    }

    /// `ψ ← G ψ` where `G` is the generator of `gate` (`H_C` or `H_B`).
    pub(crate) fn apply_generator(&mut self, cost: &CostDiagonal, gate: Gate) {
        match gate {
            Gate::Cost { .. } => self.apply_diagonal(cost.values()),
            Gate::Mixer { .. } => self.apply_mixer_operator(),
        }
    }

    /// `ψ ← U(params) ψ`.
    pub fn evolve(&mut self, cost: &CostDiagonal, params: &ParameterVector) -> Result<()> {
        self.check(cost)?;
        for gate in params.gates() {
            self.apply_gate(cost, gate);
        }
        Ok(())
    }

    /// `ψ ← U(params)† ψ`.
    pub fn evolve_adjoint(&mut self, cost: &CostDiagonal, params: &ParameterVector) -> Result<()> {
        self.check(cost)?;
        for gate in params.gates().rev() {
            self.unapply_gate(cost, gate);
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: Complex64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Statevector) -> Result<Complex64> {
        self.check_state(other)?;
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// `⟨self|D|other⟩` for a diagonal `D`.
    pub fn diagonal_element(&self, diagonal: &[f64], other: &Statevector) -> Result<Complex64> {
        self.check_state(other)?;
        if diagonal.len() != self.amplitudes.len() {
            return Err(QlsError::DimensionMismatch { expected: self.amplitudes.len(), found: diagonal.len() });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).zip(diagonal).map(|((a, b), &v)| a.conj() * b * v).sum())
    }

    /// `⟨self|H_B|other⟩` without materializing `H_B|other⟩`.
    pub fn mixer_element(&self, other: &Statevector) -> Result<Complex64> {
        self.check_state(other)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for q in 0..self.num_qubits {
            let stride = 1 << q;
            let pairs = self.amplitudes.chunks_exact(2 * stride).zip(other.amplitudes.chunks_exact(2 * stride));
            for (l, r) in pairs {
                let (l0, l1) = l.split_at(stride);
                let (r0, r1) = r.split_at(stride);
                for i in 0..stride {
                    acc += l0[i].conj() * r1[i] + l1[i].conj() * r0[i];
                }
            }
        }
        Ok(-acc)
    }

    /// `⟨ψ|H_C|ψ⟩`.
    pub fn energy(&self, cost: &CostDiagonal) -> Result<f64> {
        self.check(cost)?;
        Ok(self.amplitudes.iter().zip(cost.values()).map(|(a, &v)| a.norm_sqr() * v).sum())
    }

    /// `⟨H_C²⟩ - ⟨H_C⟩²`, clamped at zero.
    pub fn energy_variance(&self, cost: &CostDiagonal) -> Result<f64> {
        self.check(cost)?;
        let (m1, m2) = self.amplitudes.iter().zip(cost.values()).fold((0.0, 0.0), |(m1, m2), (a, &v)| {
            let w = a.norm_sqr();
            (m1 + w * v, m2 + w * v * v)
        });
        Ok((m2 - m1 * m1).max(0.0))
    }
}

/// `U(params)|+⟩`.
pub fn prepare_qaoa_state(cost: &CostDiagonal, params: &ParameterVector) -> Result<Statevector> {
    let mut psi = Statevector::plus(cost.num_qubits())?;
    psi.evolve(cost, params)?;
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate_regular_graph, ProblemGraph};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn edge() -> CostDiagonal {
        CostDiagonal::build(&ProblemGraph::unweighted(2, &[(0, 1)]).unwrap()).unwrap()
    }

    fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn plus_amplitudes() {
        let s = Statevector::plus(1).unwrap();
        assert!(close(s.amplitudes(), &[c(0.5f64.sqrt(), 0.0); 2], 1e-15));
        let s = Statevector::plus(2).unwrap();
        assert!(close(s.amplitudes(), &[c(0.5, 0.0); 4], 1e-15));
        assert!(matches!(Statevector::plus(MAX_QUBITS + 1), Err(QlsError::ResourceRefused { .. })));
    }

    #[test]
    fn cost_phase_on_edge() {
        let cost = edge();
        let mut s = Statevector::plus(2).unwrap();
        s.apply_cost_phase(&cost, FRAC_PI_2).unwrap();
        let expected = [c(0.0, -0.5), c(0.0, 0.5), c(0.0, 0.5), c(0.0, -0.5)];
        assert!(close(s.amplitudes(), &expected, 1e-15));
    }

    #[test]
    fn cost_phase_periodicity() {
        let g = generate_regular_graph(6, 3, false, 1).unwrap();
        let cost = CostDiagonal::build(&g).unwrap();
        let mut s = Statevector::plus(6).unwrap();
        s.apply_mixer(0.3);
        let before = s.clone();
        s.apply_cost_phase(&cost, 2.0 * PI).unwrap();
        assert!(close(s.amplitudes(), before.amplitudes(), 1e-12));
    }

    #[test]
    fn mixer_on_plus_is_global_phase() {
        let mut s = Statevector::plus(3).unwrap();
        s.apply_mixer(FRAC_PI_2);
        let phase = c(0.0, 1.0).powu(3);
        let expected: Vec<Complex64> = Statevector::plus(3).unwrap().amplitudes().iter().map(|a| a * phase).collect();
        assert!(close(s.amplitudes(), &expected, 1e-15));
    }

    #[test]
    fn mixer_flips_all_bits() {
        let mut s = Statevector::basis(3, 0).unwrap();
        s.apply_mixer(FRAC_PI_2);
        let mut expected = vec![c(0.0, 0.0); 8];
        expected[7] = c(0.0, 1.0).powu(3);
        assert!(close(s.amplitudes(), &expected, 1e-15));
    }

    #[test]
    fn energy_and_variance_of_plus() {
        let g = generate_regular_graph(8, 3, true, 5).unwrap();
        let cost = CostDiagonal::build(&g).unwrap();
        let s = Statevector::plus(8).unwrap();
        assert!(s.energy(&cost).unwrap().abs() < 1e-14);
        assert!((s.energy_variance(&cost).unwrap() - cost.n_c()).abs() < 1e-12);
        let ground = Statevector::basis(8, cost.ground_index()).unwrap();
        assert_eq!(ground.energy(&cost).unwrap(), cost.ground_energy());
        assert_eq!(ground.energy_variance(&cost).unwrap(), 0.0);
    }

    #[test]
    fn cost_operator_norms() {
        let g = generate_regular_graph(8, 3, false, 9).unwrap();
        let cost = CostDiagonal::build(&g).unwrap();
        let plus = Statevector::plus(8).unwrap();
        let mut hc = plus.clone();
        hc.apply_cost_operator(&cost).unwrap();
        assert!((hc.norm_sqr() - cost.n_c()).abs() < 1e-12);
        assert!(plus.inner(&hc).unwrap().norm() < 1e-14);
        let mut hc2 = hc.clone();
        hc2.apply_cost_operator(&cost).unwrap();
        assert!((plus.inner(&hc2).unwrap() - cost.n_c()).norm() < 1e-12);
    }

    #[test]
    fn mixer_eigenrelations() {
        let n = 8;
        let g = generate_regular_graph(n, 3, true, 4).unwrap();
        let cost = CostDiagonal::build(&g).unwrap();
        let mut s = Statevector::plus(n).unwrap();
        s.apply_mixer_operator();
        let plus = Statevector::plus(n).unwrap();
        let expected: Vec<Complex64> = plus.amplitudes().iter().map(|a| a * -(n as f64)).collect();
        assert!(close(s.amplitudes(), &expected, 1e-13));

        let mut hc = plus.clone();
        hc.apply_cost_operator(&cost).unwrap();
        let mut bhc = hc.clone();
        bhc.apply_mixer_operator();
        let expected: Vec<Complex64> = hc.amplitudes().iter().map(|a| a * (4.0 - n as f64)).collect();
        assert!(close(bhc.amplitudes(), &expected, 1e-12));
    }

    #[test]
    fn mixer_element_matches_explicit() {
        let g = generate_regular_graph(6, 3, false, 2).unwrap();
        let cost = CostDiagonal::build(&g).unwrap();
        let params = ParameterVector::new(vec![0.3, -0.2], vec![0.5, 0.1]).unwrap();
        let a = prepare_qaoa_state(&cost, &params).unwrap();
        let mut b = a.clone();
        b.apply_cost_operator(&cost).unwrap();
        b.apply_mixer(0.4);
        let mut hb = b.clone();
        hb.apply_mixer_operator();
        let direct = a.inner(&hb).unwrap();
        assert!((a.mixer_element(&b).unwrap() - direct).norm() < 1e-12);
    }

    #[test]
    fn single_edge_p1_matches_dense_product() {
        let cost = edge();
        let (beta, gamma) = (0.37, -0.81);
        let params = ParameterVector::new(vec![beta], vec![gamma]).unwrap();
        let e = prepare_qaoa_state(&cost, &params).unwrap().energy(&cost).unwrap();
        // Dense 4x4: the phase is diagonal; the mixer is a Kronecker square.
        let (s, co) = beta.sin_cos();
        let m1 = [[c(co, 0.0), c(0.0, s)], [c(0.0, s), c(co, 0.0)]];
        let diag = [1.0, -1.0, -1.0, 1.0];
        let mut psi = [c(0.5, 0.0); 4];
        for (z, a) in psi.iter_mut().enumerate() {
            *a *= Complex64::from_polar(1.0, -gamma * diag[z]);
        }
        let mut out = [c(0.0, 0.0); 4];
        for (row, o) in out.iter_mut().enumerate() {
            for (col, &a) in psi.iter().enumerate() {
                *o += m1[row >> 1][col >> 1] * m1[row & 1][col & 1] * a;
            }
        }
        let dense: f64 = out.iter().zip(diag).map(|(a, v)| a.norm_sqr() * v).sum();
        assert!((e - dense).abs() < 1e-12);
    }

    #[test]
    fn adjoint_undoes_evolution() {
        let g = generate_regular_graph(8, 3, true, 1).unwrap();
        let cost = CostDiagonal::build(&g).unwrap();
        let params = ParameterVector::new(vec![0.3, 0.7, -0.1], vec![0.2, -0.4, 0.9]).unwrap();
        let mut s = prepare_qaoa_state(&cost, &params).unwrap();
        s.evolve_adjoint(&cost, &params).unwrap();
        assert!(close(s.amplitudes(), Statevector::plus(8).unwrap().amplitudes(), 1e-13));
    }

    #[test]
    fn zero_depth_and_zero_angles_give_plus() {
        let g = generate_regular_graph(6, 3, false, 3).unwrap();
        let cost = CostDiagonal::build(&g).unwrap();
        let plus = Statevector::plus(6).unwrap();
        assert_eq!(prepare_qaoa_state(&cost, &ParameterVector::zeros(0)).unwrap(), plus);
        let s = prepare_qaoa_state(&cost, &ParameterVector::zeros(3)).unwrap();
        assert!(close(s.amplitudes(), plus.amplitudes(), 1e-15));
    }

    #[test]
    fn parameter_layout() {
        let p = ParameterVector::from_flat(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(p.betas(), &[1.0, 2.0, 3.0]);
        assert_eq!(p.gammas(), &[4.0, 5.0, 6.0]);
        assert_eq!(p.gamma_index(2), 4);
        assert_eq!(p.to_flat(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(ParameterVector::from_flat(&[1.0]).is_err());
        assert!(ParameterVector::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cost = edge();
        let mut s = Statevector::plus(3).unwrap();
        assert!(matches!(s.apply_cost_phase(&cost, 0.1), Err(QlsError::DimensionMismatch { .. })));
        assert!(s.energy(&cost).is_err());
    }
}
