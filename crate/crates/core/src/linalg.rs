//! Dense symmetric eigen-decomposition helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricSpectrum {
    pub values: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
}

impl SymmetricSpectrum {
    pub fn of(matrix: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(matrix.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        Self {
            values: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
            vectors: order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect(),
        }
    }

    pub fn smallest(&self) -> (f64, &DVector<f64>) {
        (self.values[0], &self.vectors[0])
    }

    /// Largest eigenvalue magnitude.
    pub fn spectral_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Eigenvalues below `-rel_tol * ‖A‖`.
    pub fn negative_count(&self, rel_tol: f64) -> usize {
        let cut = -rel_tol * self.spectral_norm();
        self.values.iter().filter(|&&v| v < cut).count()
    }
}

pub fn rayleigh_quotient(matrix: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(matrix * v)) / v.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascending_pairs() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let s = SymmetricSpectrum::of(&m);
        assert!((s.values[0] - 1.0).abs() < 1e-14 && (s.values[1] - 3.0).abs() < 1e-14);
        let (l, v) = s.smallest();
        assert!(((&m * v) - v * l).norm() < 1e-14);
        assert_eq!(s.negative_count(1e-7), 0);
        assert!((rayleigh_quotient(&m, v) - 1.0).abs() < 1e-14);
    }
}
