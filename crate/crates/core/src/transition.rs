//! Zero-insertion transition states of a depth-`p` minimum and their
//! index-1 eigenpair estimates.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derivatives::{self, hessian, last_layer_coupling, max_abs, scalar_b, second_derivative, HessianMatrix};
use crate::error::{QlsError, Result};
use crate::linalg::{rayleigh_quotient, SymmetricSpectrum};
use crate::problem::CostDiagonal;
use crate::statevector::ParameterVector;

/// Couplings below `DEGENERACY_REL * n_c` mark a degenerate transition state.
pub const DEGENERACY_REL: f64 = 1e-10;

/// Relative threshold on eigenvalues counted as negative.
pub const NEGATIVE_EIG_REL: f64 = 1e-7;

const GOLDEN: f64 = 2.618_033_988_749_895; // (3 + √5) / 2

/// Position of the inserted zero angles, as 1-based layer slots in the
/// depth-`(p+1)` circuit.
///
/// Admissible pairs are `(l, l)` for `l = 1..=p+1`, with the zero mixer right
/// after the zero phase, and `(l, l+1)` for `l = 1..=p`, with the zero mixer
/// right before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TsIndex {
    pub beta_slot: usize,
    pub gamma_slot: usize,
}

/// Which coupling formula and eigenvector layout a transition state uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsKind {
    FirstLayer,
    LastLayer,
    Bulk,
}

impl TsIndex {
    pub fn symmetric(layer: usize) -> Self {
        Self { beta_slot: layer, gamma_slot: layer }
    }

    pub fn staggered(layer: usize) -> Self {
        Self { beta_slot: layer, gamma_slot: layer + 1 }
    }

    /// All `2p + 1` admissible indices for a depth-`p` minimum, in circuit order.
    pub fn admissible(depth: usize) -> Vec<TsIndex> {
        let mut out = Vec::with_capacity(2 * depth + 1);
        for l in 1..=depth {
            out.push(Self::symmetric(l));
            out.push(Self::staggered(l));
        }
        out.push(Self::symmetric(depth + 1));
        assert_eq!(out.len(), 2 * depth + 1);
        out
    }

    pub fn is_admissible(&self, depth: usize) -> bool {
        let l = self.beta_slot;
        l >= 1 && ((self.gamma_slot == l && l <= depth + 1) || (self.gamma_slot == l + 1 && l <= depth))
    }

    fn validate(&self, depth: usize) -> Result<()> {
        if self.is_admissible(depth) {
            Ok(())
        } else {
            Err(QlsError::InadmissibleIndex { beta_slot: self.beta_slot, gamma_slot: self.gamma_slot, depth })
        }
    }

    pub fn kind(&self, depth: usize) -> TsKind {
        if self.beta_slot != self.gamma_slot {
            TsKind::Bulk
        } else if self.beta_slot == 1 {
            TsKind::FirstLayer
        } else if self.beta_slot == depth + 1 {
            TsKind::LastLayer
        } else {
            TsKind::Bulk
        }
    }

    /// Depth-`(p+1)` angles with the two zeros inserted.
    pub fn construct(&self, min_params: &ParameterVector) -> Result<ParameterVector> {
        self.validate(min_params.depth())?;
        let mut betas = min_params.betas().to_vec();
        let mut gammas = min_params.gammas().to_vec();
        betas.insert(self.beta_slot - 1, 0.0);
        gammas.insert(self.gamma_slot - 1, 0.0);
        ParameterVector::new(betas, gammas)
    }

    /// Flat indices (in the depth-`(p+1)` layout) of the inserted angles and
    /// of the angles they merge with when moved.
    pub fn slots(&self, depth: usize) -> TsSlots {
        let big = depth + 1;
        let beta = |layer: usize| layer - 1;
        let gamma = |layer: usize| big + layer - 1;
        let (l, m) = (self.beta_slot, self.gamma_slot);
        let (beta_partner, gamma_partner) = if l == m {
            ((l > 1).then(|| beta(l - 1)), (l < big).then(|| gamma(l + 1)))
        } else {
            (Some(beta(l + 1)), Some(gamma(l)))
        };
        TsSlots { beta_zero: beta(l), gamma_zero: gamma(m), beta_partner, gamma_partner }
    }

    /// Flat index in the transition-state layout of each minimum angle.
    pub fn embedding(&self, depth: usize) -> Vec<usize> {
        let big = depth + 1;
        let betas = (1..=depth).map(|k| if k < self.beta_slot { k - 1 } else { k });
        let gammas = (1..=depth).map(|k| big + if k < self.gamma_slot { k - 1 } else { k });
        betas.chain(gammas).collect()
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.beta_slot, self.gamma_slot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TsSlots {
    pub beta_zero: usize,
    pub gamma_zero: usize,
    pub beta_partner: Option<usize>,
    pub gamma_partner: Option<usize>,
}

/// Hessian-convention coupling `∂β∂γE` at the transition state (`b̄` for bulk
/// insertions, `-b` for the first-layer one), from closed forms or analytic
/// second derivatives.
pub fn coupling(cost: &CostDiagonal, min_params: &ParameterVector, index: TsIndex) -> Result<f64> {
    let p = min_params.depth();
    index.validate(p)?;
    match index.kind(p) {
        TsKind::FirstLayer => Ok(scalar_b(cost, min_params)?.hessian_coupling()),
        TsKind::LastLayer => last_layer_coupling(cost, min_params),
        TsKind::Bulk => {
            let ts = index.construct(min_params)?;
            let s = index.slots(p);
            let (bp, gp) = (s.beta_partner.unwrap(), s.gamma_partner.unwrap());
            Ok(second_derivative(cost, &ts, s.beta_zero, s.gamma_zero)? - second_derivative(cost, &ts, bp, gp)?)
        }
    }
}

/// Coupling read off an explicit transition-state Hessian.
pub fn coupling_from_hessian(h: &HessianMatrix, index: TsIndex) -> f64 {
    let s = index.slots(h.origin.depth() - 1);
    let at = |i: Option<usize>, j: Option<usize>| match (i, j) {
        (Some(i), Some(j)) => h.get(i, j),
        _ => 0.0,
    };
    let (bz, gz) = (Some(s.beta_zero), Some(s.gamma_zero));
    at(bz, gz) - at(bz, s.gamma_partner) - at(s.beta_partner, gz) + at(s.beta_partner, s.gamma_partner)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenvectorVariant {
    /// Weights obtained from the congruence transform.
    Derived,
    /// Edge layouts with the roles of the two angle blocks exchanged.
    BlockSwapped,
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Estimated index-1 eigenvalue: `-|c|/√2` at edge insertions, `-|c|/2` in the bulk.
pub fn lambda_estimate(kind: TsKind, coupling: f64) -> f64 {
    match kind {
        TsKind::Bulk => -coupling.abs() / 2.0,
        _ => -coupling.abs() * FRAC_1_SQRT_2,
    }
}

/// Unit estimate of the index-1 direction in the transition-state layout.
pub fn delta_estimate(index: TsIndex, depth: usize, coupling: f64, variant: EigenvectorVariant) -> Vec<f64> {
    let s = index.slots(depth);
    let sg = sign(coupling);
    let mut d = vec![0.0; 2 * (depth + 1)];
    match (index.kind(depth), variant) {
        (TsKind::FirstLayer, EigenvectorVariant::Derived) => {
            d[s.beta_zero] = -sg * FRAC_1_SQRT_2;
            d[s.gamma_zero] = 0.5;
            d[s.gamma_partner.unwrap()] = -0.5;
        }
        (TsKind::FirstLayer, EigenvectorVariant::BlockSwapped) => {
            d[s.beta_zero] = -0.5;
            d[s.beta_zero + 1] = 0.5;
            d[s.gamma_zero] = sg * FRAC_1_SQRT_2;
        }
        (TsKind::LastLayer, EigenvectorVariant::Derived) => {
            d[s.gamma_zero] = -sg * FRAC_1_SQRT_2;
            d[s.beta_zero] = 0.5;
            d[s.beta_partner.unwrap()] = -0.5;
        }
        (TsKind::LastLayer, EigenvectorVariant::BlockSwapped) => {
            d[s.gamma_zero] = -0.5;
            d[s.gamma_zero - 1] = 0.5;
            d[s.beta_zero] = sg * FRAC_1_SQRT_2;
        }
        (TsKind::Bulk, _) => {
            d[s.beta_zero] = 0.5;
            d[s.beta_partner.unwrap()] = -0.5;
            d[s.gamma_zero] = -sg * 0.5;
            d[s.gamma_partner.unwrap()] = sg * 0.5;
        }
    }
    d
}

pub fn is_degenerate(cost: &CostDiagonal, coupling: f64) -> bool {
    coupling.abs() < DEGENERACY_REL * cost.n_c()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxEigenpair {
    pub coupling: f64,
    pub lambda: f64,
    pub delta: Vec<f64>,
}

/// Estimated eigenpair from the coupling alone (no Hessian).
pub fn approx_eigenpair(cost: &CostDiagonal, min_params: &ParameterVector, index: TsIndex) -> Result<ApproxEigenpair> {
    let p = min_params.depth();
    let c = coupling(cost, min_params, index)?;
    if is_degenerate(cost, c) {
        return Err(QlsError::Degenerate { coupling: c });
    }
    Ok(ApproxEigenpair {
        coupling: c,
        lambda: lambda_estimate(index.kind(p), c),
        delta: delta_estimate(index, p, c, EigenvectorVariant::Derived),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OstrowskiBounds {
    pub lower: f64,
    pub upper: f64,
    /// `-|b̄|/2` from the estimate vector.
    pub refined_upper: f64,
}

pub fn ostrowski_bounds(coupling: f64) -> OstrowskiBounds {
    let a = coupling.abs();
    OstrowskiBounds { lower: -GOLDEN * a, upper: -a / GOLDEN, refined_upper: -a / 2.0 }
}

/// Outcome of reducing a transition-state Hessian to block form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CongruenceDiagnostic {
    /// Largest entry coupling the inserted pair to the other angles, over `‖H‖`.
    pub off_block_residual: f64,
    /// Largest deviation of the remaining block from the minimum's Hessian, over `‖H‖`.
    pub min_block_residual: f64,
    /// The 2×2 block on the inserted pair, row-major.
    pub pair_block: [f64; 4],
    pub coupling: f64,
    pub ts_negative: usize,
    pub min_negative: usize,
    /// Eigenvalues of `R Rᵀ`, ascending.
    pub gram_spectrum: Vec<f64>,
    pub structural_ok: bool,
    pub signature_ok: bool,
}

/// The row operations subtracting partner rows from the inserted rows.
pub fn reduction_matrix(index: TsIndex, depth: usize) -> DMatrix<f64> {
    let dim = 2 * (depth + 1);
    let s = index.slots(depth);
    let mut r = DMatrix::identity(dim, dim);
    if let Some(bp) = s.beta_partner {
        r[(s.beta_zero, bp)] = -1.0;
    }
    if let Some(gp) = s.gamma_partner {
        r[(s.gamma_zero, gp)] = -1.0;
    }
    r
}

pub fn congruence_check(h_ts: &HessianMatrix, h_min: &HessianMatrix, index: TsIndex) -> Result<CongruenceDiagnostic> {
    let p = h_min.origin.depth();
    if h_ts.dim() != 2 * p + 2 {
        return Err(QlsError::DimensionMismatch { expected: 2 * p + 2, found: h_ts.dim() });
    }
    index.validate(p)?;
    let r = reduction_matrix(index, p);
    let k = &r * &h_ts.entries * r.transpose();
    let s = index.slots(p);
    let spectrum = SymmetricSpectrum::of(&h_ts.entries);
    let scale = spectrum.spectral_norm().max(f64::MIN_POSITIVE);
    let embed = index.embedding(p);
    let mut off = 0.0f64;
    for &z in &[s.beta_zero, s.gamma_zero] {
        for &o in &embed {
            off = off.max(k[(z, o)].abs());
        }
    }
    let mut block = 0.0f64;
    for (a, &i) in embed.iter().enumerate() {
        for (b, &j) in embed.iter().enumerate() {
            block = block.max((k[(i, j)] - h_min.get(a, b)).abs());
        }
    }
    let pair_block = [
        k[(s.beta_zero, s.beta_zero)],
        k[(s.beta_zero, s.gamma_zero)],
        k[(s.gamma_zero, s.beta_zero)],
        k[(s.gamma_zero, s.gamma_zero)],
    ];
    let ts_negative = spectrum.negative_count(NEGATIVE_EIG_REL);
    let min_negative = SymmetricSpectrum::of(&h_min.entries).negative_count(NEGATIVE_EIG_REL);
    let gram_spectrum = SymmetricSpectrum::of(&(&r * r.transpose())).values;
    let off_block_residual = off / scale;
    let min_block_residual = block / scale;
    Ok(CongruenceDiagnostic {
        off_block_residual,
        min_block_residual,
        pair_block,
        coupling: pair_block[1],
        ts_negative,
        min_negative,
        gram_spectrum,
        structural_ok: off_block_residual < 1e-6 && min_block_residual < 1e-6,
        signature_ok: ts_negative == min_negative + 1,
    })
}

/// Whether reports include the exact Hessian eigenpair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportMode {
    Validate,
    EstimatesOnly,
}

/// Everything known about one transition state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionStateReport {
    pub index: TsIndex,
    pub kind: TsKind,
    pub ts_params: ParameterVector,
    /// Hessian-convention coupling `∂β∂γE` (`b̄` in the bulk, `-b` at the first layer).
    pub b_or_bbar: f64,
    pub degenerate: bool,
    pub energy_deviation: f64,
    pub gradient_norm: f64,
    pub lambda_estimate: f64,
    pub delta_estimate: Vec<f64>,
    pub delta_variant: EigenvectorVariant,
    pub ostrowski_lower: f64,
    pub ostrowski_upper: f64,
    pub refined_upper: f64,
    pub lambda_exact: Option<f64>,
    pub eigvec_exact: Option<Vec<f64>>,
    pub rayleigh_quotient: Option<f64>,
    pub rel_error: Option<f64>,
    pub overlap: Option<f64>,
    pub negative_eigenvalues: Option<usize>,
    /// Smallest Hessian eigenvalue at the source minimum.
    pub kappa1: Option<f64>,
}

impl TransitionStateReport {
    pub fn overlap_deviation(&self) -> Option<f64> {
        self.overlap.map(|o| 1.0 - o)
    }
}

fn report(
    cost: &CostDiagonal,
    min_params: &ParameterVector,
    min_energy: f64,
    index: TsIndex,
    mode: ReportMode,
    kappa1: Option<f64>,
) -> Result<TransitionStateReport> {
    let p = min_params.depth();
    let kind = index.kind(p);
    let ts = index.construct(min_params)?;
    let (e_ts, grad) = derivatives::energy_and_gradient(cost, &ts)?;
    let c = coupling(cost, min_params, index)?;
    let degenerate = is_degenerate(cost, c);
    let bounds = ostrowski_bounds(c);
    let mut out = TransitionStateReport {
        index,
        kind,
        ts_params: ts.clone(),
        b_or_bbar: c,
        degenerate,
        energy_deviation: e_ts - min_energy,
        gradient_norm: max_abs(&grad),
        lambda_estimate: lambda_estimate(kind, c),
        delta_estimate: delta_estimate(index, p, c, EigenvectorVariant::Derived),
        delta_variant: EigenvectorVariant::Derived,
        ostrowski_lower: bounds.lower,
        ostrowski_upper: bounds.upper,
        refined_upper: bounds.refined_upper,
        lambda_exact: None,
        eigvec_exact: None,
        rayleigh_quotient: None,
        rel_error: None,
        overlap: None,
        negative_eigenvalues: None,
        kappa1,
    };
    if mode == ReportMode::EstimatesOnly {
        return Ok(out);
    }
    let h = hessian(cost, &ts)?;
    let spectrum = SymmetricSpectrum::of(&h.entries);
    let (lambda, v) = spectrum.smallest();
    let overlap_of = |d: &[f64]| DVector::from_column_slice(d).dot(v).abs();
    let derived = overlap_of(&out.delta_estimate);
    if kind != TsKind::Bulk && derived < 0.5 {
        let swapped = delta_estimate(index, p, c, EigenvectorVariant::BlockSwapped);
        if overlap_of(&swapped) > derived {
            out.delta_estimate = swapped;
            out.delta_variant = EigenvectorVariant::BlockSwapped;
        }
    }
    let d = DVector::from_column_slice(&out.delta_estimate);
    let dot = d.dot(v);
    let oriented: Vec<f64> = v.iter().map(|x| if dot < 0.0 { -x } else { *x }).collect();
    out.lambda_exact = Some(lambda);
    out.eigvec_exact = Some(oriented);
    out.rayleigh_quotient = Some(rayleigh_quotient(&h.entries, &d));
    out.overlap = Some(dot.abs().min(1.0));
    out.rel_error = Some((out.lambda_estimate - lambda).abs() / lambda.abs());
    out.negative_eigenvalues = Some(spectrum.negative_count(NEGATIVE_EIG_REL));
    Ok(out)
}

/// Reports for all `2p + 1` transition states of a minimum.
pub fn all_transition_states(
    cost: &CostDiagonal,
    min_params: &ParameterVector,
    mode: ReportMode,
) -> Result<Vec<TransitionStateReport>> {
    let p = min_params.depth();
    if p == 0 {
        return Err(QlsError::InvalidInput("transition states need depth ≥ 1".into()));
    }
    let e_min = derivatives::energy(cost, min_params)?;
    let kappa1 = match mode {
        ReportMode::Validate => Some(SymmetricSpectrum::of(&hessian(cost, min_params)?.entries).values[0]),
        ReportMode::EstimatesOnly => None,
    };
    let reports: Vec<TransitionStateReport> = TsIndex::admissible(p)
        .into_par_iter()
        .map(|index| report(cost, min_params, e_min, index, mode, kappa1))
        .collect::<Result<_>>()?;
    debug_assert_eq!(reports.len(), 2 * p + 1);
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissible_counts_and_order() {
        for p in 1..8 {
            let idx = TsIndex::admissible(p);
            assert_eq!(idx.len(), 2 * p + 1);
            assert!(idx.iter().all(|i| i.is_admissible(p)));
            let mut sorted = idx.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), idx.len());
        }
        assert_eq!(TsIndex::admissible(1), vec![TsIndex::symmetric(1), TsIndex::staggered(1), TsIndex::symmetric(2)]);
        assert!(!TsIndex { beta_slot: 2, gamma_slot: 1 }.is_admissible(3));
        assert!(!TsIndex::staggered(3).is_admissible(2));
    }

    #[test]
    fn construct_first_layer() {
        let min = ParameterVector::new(vec![0.1, 0.2], vec![0.3, 0.4]).unwrap();
        let ts = TsIndex::symmetric(1).construct(&min).unwrap();
        assert_eq!(ts.to_flat(), vec![0.0, 0.1, 0.2, 0.0, 0.3, 0.4]);
        let ts = TsIndex::staggered(2).construct(&min).unwrap();
        assert_eq!(ts.to_flat(), vec![0.1, 0.0, 0.2, 0.3, 0.4, 0.0]);
        assert!(matches!(TsIndex::staggered(3).construct(&min), Err(QlsError::InadmissibleIndex { .. })));
    }

    #[test]
    fn embedding_skips_inserted_slots() {
        let idx = TsIndex::staggered(1);
        let emb = idx.embedding(2);
        let s = idx.slots(2);
        assert_eq!(emb, vec![1, 2, 3, 5]);
        assert!(!emb.contains(&s.beta_zero) && !emb.contains(&s.gamma_zero));
    }

    #[test]
    fn estimate_vectors_are_unit() {
        for p in 1..6 {
            for idx in TsIndex::admissible(p) {
                for c in [-1.3, 0.7] {
                    for variant in [EigenvectorVariant::Derived, EigenvectorVariant::BlockSwapped] {
                        let d = delta_estimate(idx, p, c, variant);
                        let n: f64 = d.iter().map(|x| x * x).sum();
                        assert!((n - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn bound_constants() {
        let b = ostrowski_bounds(1.0);
        assert!((b.lower + 2.618034).abs() < 1e-6);
        assert!((b.upper + 0.381966).abs() < 1e-6);
        assert_eq!(b.refined_upper, -0.5);
        let z = ostrowski_bounds(0.0);
        assert_eq!((z.lower, z.upper), (0.0, 0.0));
    }

    #[test]
    fn gram_spectrum_of_bulk_reduction() {
        let p = 3;
        let r = reduction_matrix(TsIndex::symmetric(2), p);
        let spec = SymmetricSpectrum::of(&(&r * r.transpose())).values;
        let small = 1.0 / GOLDEN;
        let expected = [small, small, 1.0, 1.0, 1.0, 1.0, GOLDEN, GOLDEN];
        for (a, b) in spec.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{spec:?}");
        }
    }
}
