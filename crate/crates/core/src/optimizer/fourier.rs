//! Discrete cosine/sine parametrization of the angles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QlsError, Result};
use crate::statevector::ParameterVector;

/// Frequency amplitudes: `u` drives the phase angles, `v` the mixer angles.
///
/// `γ_i = Σ_k u_k sin((k-½)(i-½)π/p)` and `β_i = Σ_k v_k cos((k-½)(i-½)π/p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierAmplitudes {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

fn phase(i: usize, k: usize, p: usize) -> f64 {
    (k as f64 + 0.5) * (i as f64 + 0.5) * PI / p as f64
}

impl FourierAmplitudes {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(QlsError::DimensionMismatch { expected: u.len(), found: v.len() });
        }
        Ok(Self { u, v })
    }

    pub fn depth(&self) -> usize {
        self.u.len()
    }

    pub fn to_angles(&self) -> ParameterVector {
        let p = self.depth();
        let gammas = (0..p).map(|i| (0..p).map(|k| self.u[k] * phase(i, k, p).sin()).sum()).collect();
        let betas = (0..p).map(|i| (0..p).map(|k| self.v[k] * phase(i, k, p).cos()).sum()).collect();
        ParameterVector::new(betas, gammas).expect("equal lengths")
    }

    /// Inverse transform; both bases are orthogonal with norm `p/2`.
    pub fn from_angles(params: &ParameterVector) -> Self {
        let p = params.depth();
        let scale = 2.0 / p as f64;
        let u =
            (0..p).map(|k| scale * (0..p).map(|i| params.gammas()[i] * phase(i, k, p).sin()).sum::<f64>()).collect();
        let v = (0..p).map(|k| scale * (0..p).map(|i| params.betas()[i] * phase(i, k, p).cos()).sum::<f64>()).collect();
        Self { u, v }
    }

    /// Flat layout `(v; u)`, matching the angle layout `(β; γ)`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.v.clone();
        out.extend_from_slice(&self.u);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(QlsError::InvalidInput("odd amplitude vector".into()));
        }
        let (v, u) = flat.split_at(flat.len() / 2);
        Self::new(u.to_vec(), v.to_vec())
    }

    /// Appends a zero amplitude to each set.
    pub fn extended(&self) -> Self {
        let mut out = self.clone();
        out.u.push(0.0);
        out.v.push(0.0);
        out
    }

    /// Maps an angle gradient `(∂β; ∂γ)` to an amplitude gradient `(∂v; ∂u)`.
    pub fn pull_back_gradient(&self, angle_gradient: &[f64]) -> Vec<f64> {
        let p = self.depth();
        let (gb, gg) = angle_gradient.split_at(p);
        let dv = (0..p).map(|k| (0..p).map(|i| gb[i] * phase(i, k, p).cos()).sum::<f64>());
        let du = (0..p).map(|k| (0..p).map(|i| gg[i] * phase(i, k, p).sin()).sum::<f64>());
        dv.chain(du).collect()
    }
}

pub(crate) fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|x| x * x).sum::<f64>() / values.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn depth_one_transform() {
        let a = FourierAmplitudes::new(vec![2.0], vec![3.0]).unwrap();
        let angles = a.to_angles();
        let c = (PI / 4.0).cos();
        assert!((angles.gammas()[0] - 2.0 * c).abs() < 1e-15);
        assert!((angles.betas()[0] - 3.0 * c).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(-3.0f64..3.0, 2..40)) {
            let p = values.len() / 2;
            let params = ParameterVector::from_flat(&values[..2 * p]).unwrap();
            let back = FourierAmplitudes::from_angles(&params).to_angles();
            for (a, b) in back.to_flat().iter().zip(params.to_flat()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn gradient_pull_back_is_transpose(values in prop::collection::vec(-1.0f64..1.0, 4..20)) {
            let p = values.len() / 2;
            let amps = FourierAmplitudes::from_flat(&values[..2 * p]).unwrap();
            let w: Vec<f64> = (0..2 * p).map(|i| (i as f64 * 0.37).sin()).collect();
            // d/dt <w, angles(amps + t e_j)> = pull_back(w)_j
            let pulled = amps.pull_back_gradient(&w);
            for j in 0..2 * p {
                let mut flat = amps.to_flat();
                flat[j] += 1.0;
                let shifted = FourierAmplitudes::from_flat(&flat).unwrap().to_angles().to_flat();
                let base = amps.to_angles().to_flat();
                let directional: f64 = shifted.iter().zip(&base).zip(&w).map(|((s, b), w)| (s - b) * w).sum();
                prop_assert!((directional - pulled[j]).abs() < 1e-10);
            }
        }
    }
}
