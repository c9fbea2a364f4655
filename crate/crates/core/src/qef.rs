//! Quadratic-exponential functional `Ξ = e^{−C} Π_k (1 − θλ_k)^{−1/2}` by
//! the Fredholm determinant of `PK`.

use crate::eigensolver::SpectralBasis;
use crate::error::{Error, Result};
use crate::kernels::KernelContext;
use crate::linalg::{sym_eigenvalues, Mat};
use crate::model::GaussianStateData;
use crate::qkl::tanhc;

/// Relative threshold below which negative `PK` eigenvalues are rounding.
pub const NEGATIVE_CLIP: f64 = 1e-10;

/// QEF value, or the marker for `θ r(PK) ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Xi {
    Finite(f64),
    Diverged,
}

impl Xi {
    pub fn value(self) -> Option<f64> {
        match self {
            Xi::Finite(v) => Some(v),
            Xi::Diverged => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Xi::Finite(v) if v.is_finite())
    }
}

/// `Π (1 − θμ)^{−1/2}` by a log-sum, or [`Xi::Diverged`] if `θμ ≥ 1` for some `μ`.
pub fn fredholm_product(theta: f64, eigenvalues: &[f64], log_prefactor: f64) -> Xi {
    let mut log = log_prefactor;
    for &mu in eigenvalues {
        let x = theta * mu;
        if x >= 1.0 {
            return Xi::Diverged;
        }
        log -= 0.5 * (-x).ln_1p();
    }
    Xi::Finite(log.exp())
}

/// `Σ ln cosh(θω_k)` over retained modes, with the remainder bound
/// `(θ²/2)(hs_total − hs_captured)/2` from `ln cosh x ≤ x²/2`.
pub fn compute_c(basis: &SpectralBasis, theta: f64) -> (f64, f64) {
    let c = basis.pairs.iter().map(|p| ln_cosh(theta * p.omega)).sum();
    let tail = 0.5 * theta * theta * 0.5 * (basis.hs_total - basis.hs_captured).max(0.0);
    (c, tail)
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Discretized operators shared by every `θ`.
#[derive(Debug, Clone)]
pub struct QefInputs {
    pub basis: SpectralBasis,
    pub p0: Mat,
    /// `[P(s_a − s_b)]` (`nN x nN`).
    pub p_block: Mat,
    /// `W^{1/2} [P(s_a − s_b)] W^{1/2}`.
    pub p_weighted: Mat,
    /// Columns `√w ⊙ √2 h_k` in the order `(φ₁, ψ₁, φ₂, …)`.
    pub modes: Mat,
    /// `modesᵀ P̂ modes`, the compression of `P` to the retained modes.
    pub compressed: Mat,
    /// Eigenvalues of `P̂`, descending.
    pub classical: Vec<f64>,
}

impl QefInputs {
    pub fn new(ctx: &KernelContext, basis: SpectralBasis, state: Option<&GaussianStateData>) -> Result<Self> {
        let state = state.ok_or_else(|| Error::StateUnavailable("no stationary covariance".into()))?;
        let n = ctx.n();
        if state.p0.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("P0 must be {n}x{n}")));
        }
        if basis.is_empty() {
            return Err(Error::BasisInconsistent("empty spectral basis".into()));
        }
        let grid = &basis.grid;
        let p_block = ctx.covariance_matrix(grid, &state.p0);
        let sw = grid.stacked_weights(n).map(f64::sqrt);
        let p_weighted = Mat::from_fn(p_block.nrows(), p_block.ncols(), |r, c| sw[r] * p_block[(r, c)] * sw[c]);
        let s2 = std::f64::consts::SQRT_2;
        let h = basis.stacked_h();
        let modes = Mat::from_fn(h.nrows(), h.ncols(), |r, c| sw[r] * s2 * h[(r, c)]);
        let compressed = modes.transpose() * &p_weighted * &modes;
        let compressed = (&compressed + compressed.transpose()) * 0.5;
        let classical = sym_eigenvalues(&p_weighted);
        Ok(QefInputs { basis, p0: state.p0.clone(), p_block, p_weighted, modes, compressed, classical })
    }

    pub fn kappa(&self, theta: f64) -> Vec<f64> {
        self.basis.pairs.iter().flat_map(|p| {
            let k = tanhc(theta * p.omega);
            [k, k]
        }).collect()
    }

    /// Eigenvalues of `√K P √K` for mode weights `w`, descending and clipped.
    fn weighted_eigenvalues(&self, weights: &[f64]) -> Result<Vec<f64>> {
        let sq: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let m = Mat::from_fn(self.compressed.nrows(), self.compressed.ncols(), |r, c| {
            sq[r] * self.compressed[(r, c)] * sq[c]
        });
        clip_spectrum(sym_eigenvalues(&m))
    }

    /// Eigenvalues `λ_k` of `PK` with `K = tanc(θL)`, descending.
    pub fn pk_eigenvalues(&self, theta: f64) -> Result<Vec<f64>> {
        self.weighted_eigenvalues(&self.kappa(theta))
    }

    /// `θ r(PK(θ))`, nondecreasing in `θ`.
    pub fn scaled_radius(&self, theta: f64) -> Result<f64> {
        Ok(theta * self.pk_eigenvalues(theta)?.first().copied().unwrap_or(0.0))
    }

    /// Limit of `θ r(PK(θ))` as `θ → ∞`, where `θ tanhc(θω) → 1/ω`.
    pub fn limiting_radius(&self) -> Result<f64> {
        let w: Vec<f64> = self.basis.pairs.iter().flat_map(|p| [1.0 / p.omega, 1.0 / p.omega]).collect();
        Ok(self.weighted_eigenvalues(&w)?.first().copied().unwrap_or(0.0))
    }

    /// Solves `θ r(PK(θ)) = level`; `None` if the level is never reached.
    pub fn theta_for_radius(&self, level: f64) -> Result<Option<f64>> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius level must be positive, got {level}")));
        }
        if self.limiting_radius()? <= level {
            return Ok(None);
        }
        let r0 = self.pk_eigenvalues(0.0)?.first().copied().unwrap_or(0.0);
        // tanhc ≤ 1 gives θ r(PK(θ)) ≤ θ r(P), so the root lies above level / r(P)
        let mut lo = level / r0;
        let mut hi = 2.0 * lo;
        while self.scaled_radius(hi)? < level {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Ok(None);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.scaled_radius(mid)? < level {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    }

    /// Self-consistent critical value `θ*` with `θ* r(PK(θ*)) = 1`.
    pub fn critical_theta(&self) -> Result<Option<f64>> {
        self.theta_for_radius(1.0)
    }

    /// `tr P − tr(modesᵀ P̂ modes)`, an upper bound on the trace of `PK`
    /// lost to mode truncation.
    pub fn lambda_tail_trace(&self) -> f64 {
        (self.p_weighted.trace() - self.compressed.trace()).max(0.0)
    }

    /// `Ξ` with `K := I` and `L := 0`: `Π (1 − θμ)^{−1/2}` over eigenvalues of `P̂`.
    pub fn classical_xi(&self, theta: f64) -> Xi {
        fredholm_product(theta, &self.classical, 0.0)
    }

    /// `exp(−½ ln det(I − θP̂))` by Cholesky, independent of the eigen route.
    pub fn classical_xi_cholesky(&self, theta: f64) -> Xi {
        let dim = self.p_weighted.nrows();
        let m = Mat::identity(dim, dim) - &self.p_weighted * theta;
        match m.cholesky() {
            Some(ch) => {
                let log_det: f64 = ch.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
                Xi::Finite((-0.5 * log_det).exp())
            }
            None => Xi::Diverged,
        }
    }
}

fn clip_spectrum(mut values: Vec<f64>) -> Result<Vec<f64>> {
    let max = values.first().copied().unwrap_or(0.0).max(0.0);
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -NEGATIVE_CLIP * max.max(f64::MIN_POSITIVE) && *v < -1e-14 {
                return Err(Error::NegativeSpectrum { value: *v });
            }
            *v = 0.0;
        }
    }
    Ok(values)
}

/// Closed-form QEF at one `θ`.
#[derive(Debug, Clone)]
pub struct QefReport {
    pub theta: f64,
    /// `Σ ln cosh(θω_k)` over retained modes.
    pub c: f64,
    pub tail_c: f64,
    /// Eigenvalues of `PK`, descending.
    pub lambdas: Vec<f64>,
    pub spectral_radius: f64,
    /// `1 / r(PK)` at this `θ`.
    pub theta_critical: f64,
    pub xi: Xi,
    pub xi_classical: Xi,
    pub lambda_tail_trace: f64,
}

impl QefReport {
    /// Finite `Ξ` or [`Error::ThetaSupercritical`].
    pub fn require_finite(&self) -> Result<f64> {
        self.xi.value().ok_or(Error::ThetaSupercritical { theta_critical: self.theta_critical })
    }

    /// `Ξ` re-evaluated at `theta` with the spectrum and `C` of this report held fixed.
    pub fn frozen_xi(&self, theta: f64) -> Xi {
        fredholm_product(theta, &self.lambdas, -self.c)
    }
}

pub fn compute_qef(inputs: &QefInputs, theta: f64) -> Result<QefReport> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::InvalidArgument(format!("theta must be nonnegative, got {theta}")));
    }
    let (c, tail_c) = compute_c(&inputs.basis, theta);
    let lambdas = inputs.pk_eigenvalues(theta)?;
    let spectral_radius = lambdas.first().copied().unwrap_or(0.0);
    let theta_critical = if spectral_radius > 0.0 { 1.0 / spectral_radius } else { f64::INFINITY };
    let xi = fredholm_product(theta, &lambdas, -c);
    Ok(QefReport {
        theta,
        c,
        tail_c,
        spectral_radius,
        theta_critical,
        xi,
        xi_classical: inputs.classical_xi(theta),
        lambda_tail_trace: inputs.lambda_tail_trace(),
        lambdas,
    })
}
