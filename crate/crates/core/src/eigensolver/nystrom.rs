//! Nyström discretization of `L`, used as an independent spectral oracle.

use num_complex::Complex64;

use crate::kernels::KernelContext;
use crate::linalg::{herm_eigen, CMat, Mat};
use crate::quadrature::PanelGrid;

/// Spectrum of the Hermitian matrix `−i[√w_a Λ(s_a − s_b) √w_b]`.
#[derive(Debug, Clone)]
pub struct NystromSpectrum {
    /// All `nN` eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Matching eigenvectors in the weighted coordinates.
    pub eigenvectors: CMat,
    pub grid: PanelGrid,
    pub n: usize,
}

impl NystromSpectrum {
    /// Paired frequencies `ω_k = (λ_k − λ_{nN−1−k})/2`, descending.
    pub fn frequencies(&self) -> Vec<f64> {
        let len = self.eigenvalues.len();
        (0..len / 2)
            .map(|k| 0.5 * (self.eigenvalues[k] - self.eigenvalues[len - 1 - k]))
            .collect()
    }

    /// Largest deviation between the positive half and the mirrored negative half.
    pub fn symmetry_defect(&self) -> f64 {
        let len = self.eigenvalues.len();
        (0..len / 2)
            .map(|k| (self.eigenvalues[k] + self.eigenvalues[len - 1 - k]).abs())
            .fold(0.0, f64::max)
    }

    /// `Σ λ²`, the discrete Hilbert–Schmidt norm.
    pub fn hs(&self) -> f64 {
        self.eigenvalues.iter().map(|v| v * v).sum()
    }

    /// Smallest eigenvalue magnitude.
    pub fn min_abs(&self) -> f64 {
        self.eigenvalues.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    }

    /// Eigenvector `idx` as a grid function with unit `L²` norm.
    pub fn grid_function(&self, idx: usize) -> CMat {
        let n = self.n;
        let w = self.grid.weights();
        CMat::from_fn(n, w.len(), |i, a| self.eigenvectors[(n * a + i, idx)] / w[a].sqrt())
    }
}

/// Forms `−i[√w_a Λ_ab √w_b]` from a block kernel matrix and diagonalizes it.
pub fn nystrom_from_lambda(grid: &PanelGrid, lambda: &Mat, n: usize) -> NystromSpectrum {
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let dim = lambda.nrows();
    let h = CMat::from_fn(dim, dim, |r, c| {
        Complex64::new(0.0, -sw[r / n] * lambda[(r, c)] * sw[c / n])
    });
    let (eigenvalues, eigenvectors) = herm_eigen(&h);
    NystromSpectrum { eigenvalues, eigenvectors, grid: grid.clone(), n }
}

pub fn nystrom_oracle(ctx: &KernelContext, grid: &PanelGrid) -> NystromSpectrum {
    nystrom_from_lambda(grid, &ctx.lambda_matrix(grid), ctx.n())
}
