//! Quantum Karhunen–Loève coefficient functions `h_k`, their integrals
//! `H_k`, and the surrogate covariance operator `K = tanc(θL)`.

use nalgebra::DVector;

use crate::eigensolver::SpectralBasis;
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// `tanh(z)/z`, extended by `1` at `z = 0`.
pub fn tanhc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 3.0 + 2.0 * z2 * z2 / 15.0
    } else {
        z.tanh() / z
    }
}

/// Spectral basis augmented with `H_k(t) = √2∫₀ᵗ h_k` and the weights
/// `tanhc(θω_k)`.
#[derive(Debug, Clone)]
pub struct QklBasis {
    pub basis: SpectralBasis,
    pub theta: f64,
    /// `(√2∫φ_k, √2∫ψ_k)` sampled at the grid nodes.
    pub big_h: Vec<(Mat, Mat)>,
    pub tanc_values: Vec<f64>,
}

pub fn build_qkl(basis: SpectralBasis, theta: f64) -> Result<QklBasis> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::InvalidArgument(format!("theta must be nonnegative, got {theta}")));
    }
    let s2 = std::f64::consts::SQRT_2;
    let big_h = basis
        .pairs
        .iter()
        .map(|p| (basis.grid.cumulative(&p.phi) * s2, basis.grid.cumulative(&p.psi) * s2))
        .collect();
    let tanc_values = basis.pairs.iter().map(|p| tanhc(theta * p.omega)).collect();
    Ok(QklBasis { basis, theta, big_h, tanc_values })
}

impl QklBasis {
    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn modes(&self) -> usize {
        self.basis.pairs.len()
    }

    /// Same basis with weights recomputed for another `θ`.
    pub fn with_theta(&self, theta: f64) -> Result<QklBasis> {
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::InvalidArgument(format!("theta must be nonnegative, got {theta}")));
        }
        let mut out = self.clone();
        out.theta = theta;
        out.tanc_values = self.basis.pairs.iter().map(|p| tanhc(theta * p.omega)).collect();
        Ok(out)
    }

    /// `H_k(t)` as an `n x 2` matrix at an arbitrary time.
    pub fn big_h_at(&self, k: usize, t: f64) -> Mat {
        let grid = &self.basis.grid;
        let p = &self.basis.pairs[k];
        let s2 = std::f64::consts::SQRT_2;
        let a = grid.antiderivative_at(&p.phi, t) * s2;
        let b = grid.antiderivative_at(&p.psi, t) * s2;
        let mut out = Mat::zeros(a.len(), 2);
        out.set_column(0, &a);
        out.set_column(1, &b);
        out
    }

    /// `H_k(s_a)` at grid node `a`.
    pub fn big_h_node(&self, k: usize, a: usize) -> Mat {
        let (hp, hq) = &self.big_h[k];
        let mut out = Mat::zeros(hp.nrows(), 2);
        out.set_column(0, &hp.column(a));
        out.set_column(1, &hq.column(a));
        out
    }

    fn weighted_sum(&self, s: f64, t: f64, weights: impl Fn(usize) -> f64) -> Mat {
        let n = self.n();
        let mut acc = Mat::zeros(n, n);
        for k in 0..self.modes() {
            acc += self.big_h_at(k, s) * self.big_h_at(k, t).transpose() * weights(k);
        }
        acc
    }

    /// `E Z(s)Z(t)ᵀ = Σ tanhc(θω_k) H_k(s)H_k(t)ᵀ`.
    pub fn surrogate_covariance(&self, s: f64, t: f64) -> Mat {
        self.weighted_sum(s, t, |k| self.tanc_values[k])
    }

    /// `Σ H_k(s)H_k(t)ᵀ`, which tends to `min(s, t) I` as modes are added.
    pub fn wiener_covariance(&self, s: f64, t: f64) -> Mat {
        self.weighted_sum(s, t, |_| 1.0)
    }

    /// Coordinates `√2∫h_kᵀ f` of `f` in the orthonormal system formed by
    /// the columns of `√2 h_k`, ordered `(φ₁, ψ₁, φ₂, …)`.
    pub fn coordinates(&self, f: &Mat) -> Result<DVector<f64>> {
        let grid = &self.basis.grid;
        grid.check(f)?;
        if f.nrows() != self.n() {
            return Err(Error::DimensionMismatch(format!("grid function must have {} rows", self.n())));
        }
        let s2 = std::f64::consts::SQRT_2;
        let mut out = DVector::zeros(2 * self.modes());
        for (k, p) in self.basis.pairs.iter().enumerate() {
            out[2 * k] = s2 * grid.inner(&p.phi, f);
            out[2 * k + 1] = s2 * grid.inner(&p.psi, f);
        }
        Ok(out)
    }

    /// `K f = Σ tanhc(θω_k) · 2 h_k ∫h_kᵀ f`.
    pub fn apply_k(&self, f: &Mat) -> Result<Mat> {
        let c = self.coordinates(f)?;
        let s2 = std::f64::consts::SQRT_2;
        let mut out = Mat::zeros(f.nrows(), f.ncols());
        for (k, p) in self.basis.pairs.iter().enumerate() {
            let w = self.tanc_values[k] * s2;
            out += &p.phi * (w * c[2 * k]) + &p.psi * (w * c[2 * k + 1]);
        }
        Ok(out)
    }

    /// `K` eigenvalues, each listed twice.
    pub fn k_eigenvalues(&self) -> Vec<f64> {
        self.tanc_values.iter().flat_map(|&v| [v, v]).collect()
    }

    /// Upper bound on `∬‖Σ_{k>K} H_k(s)H_k(t)ᵀ‖²_F`: the square of the
    /// trace `nT²/2 − Σ_k ∫‖H_k‖²_F` of the neglected PSD kernel.
    pub fn wiener_tail_bound(&self) -> f64 {
        let grid = &self.basis.grid;
        let t = grid.horizon();
        let kept: f64 = self.big_h.iter().map(|(a, b)| grid.inner(a, a) + grid.inner(b, b)).sum();
        let trace = (self.n() as f64 * t * t / 2.0 - kept).max(0.0);
        trace * trace
    }

    /// Grid mean-square distance between `Σ H_k(s)H_k(t)ᵀ` and `min(s, t) I`.
    pub fn wiener_residual(&self) -> f64 {
        let grid = &self.basis.grid;
        let nodes = grid.nodes();
        let w = grid.weights();
        let n = self.n();
        let stacked = self.stacked_big_h();
        let approx = &stacked * stacked.transpose();
        let mut acc = 0.0;
        for a in 0..nodes.len() {
            for b in 0..nodes.len() {
                let m = nodes[a].min(nodes[b]);
                let block = approx.view((n * a, n * b), (n, n));
                let mut d2 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let target = if i == j { m } else { 0.0 };
                        let d = block[(i, j)] - target;
                        d2 += d * d;
                    }
                }
                acc += w[a] * w[b] * d2;
            }
        }
        acc
    }

    /// Quadrature error of `∬ min(s, t)² ds dt = T⁴/6` on the grid, scaled
    /// by `n`; used as slack for grid comparisons against `min(s, t) I`.
    pub fn wiener_quadrature_slack(&self) -> f64 {
        let grid = &self.basis.grid;
        let nodes = grid.nodes();
        let w = grid.weights();
        let mut acc = 0.0;
        for a in 0..nodes.len() {
            for b in 0..nodes.len() {
                let m = nodes[a].min(nodes[b]);
                acc += w[a] * w[b] * m * m;
            }
        }
        let t = grid.horizon();
        self.n() as f64 * (acc - t.powi(4) / 6.0).abs()
    }

    /// `[H_1(s_a) … H_K(s_a)]` stacked over nodes (`nN x 2K`).
    pub fn stacked_big_h(&self) -> Mat {
        let n = self.n();
        let big_n = self.basis.grid.len();
        Mat::from_fn(n * big_n, 2 * self.modes(), |r, c| {
            let (a, i) = (r / n, r % n);
            let (hp, hq) = &self.big_h[c / 2];
            if c % 2 == 0 { hp[(i, a)] } else { hq[(i, a)] }
        })
    }
}
