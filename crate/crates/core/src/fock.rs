//! Truncated Fock-space check of the Gaussian randomization
//! `e^{ω(ξ²+η²)} = (1/cosh ω) E e^{σ(aξ+bη)}` for one position–momentum pair,
//! with `σ = √(2 tanh ω)` and `a, b` independent standard normals.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{herm_eigen, sym_eigen, to_complex, CMat, Mat};
use crate::quadrature::gauss_hermite_normal;

/// Orders `q` and `q + QUADRATURE_STEP` are compared by [`rhs_average_checked`].
pub const QUADRATURE_STEP: usize = 8;

/// Position and momentum in the number basis `|0⟩, …, |N−1⟩`.
#[derive(Debug, Clone)]
pub struct TruncatedPair {
    pub n: usize,
    /// `(a + a†)/√2`, real symmetric.
    pub xi: Mat,
    /// `−i(a − a†)/√2`.
    pub eta: CMat,
    /// `max |[ξ, η] − iI|` over the leading `(N−1) x (N−1)` block.
    pub ccr_residual: f64,
}

/// Annihilation operator `a|k⟩ = √k |k−1⟩`.
pub fn annihilation(n: usize) -> Mat {
    Mat::from_fn(n, n, |r, c| if c == r + 1 { (c as f64).sqrt() } else { 0.0 })
}

pub fn build_pair(n: usize) -> Result<TruncatedPair> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("truncation dimension must be at least 4, got {n}")));
    }
    let a = annihilation(n);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let xi = (&a + a.transpose()) * s;
    let eta = to_complex(&(&a - a.transpose())).map(|z| z * Complex64::new(0.0, -s));
    let xc = to_complex(&xi);
    let comm = &xc * &eta - &eta * &xc;
    let corner = comm.view((0, 0), (n - 1, n - 1)) - CMat::identity(n - 1, n - 1) * Complex64::i();
    let ccr_residual = corner.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(TruncatedPair { n, xi, eta, ccr_residual })
}

impl TruncatedPair {
    /// `ξ² + η²`, equal to `2a†a + I` away from the truncation edge.
    pub fn energy(&self) -> CMat {
        let xc = to_complex(&self.xi);
        &xc * &xc + &self.eta * &self.eta
    }

    /// Leading `N/2 x N/2` block.
    pub fn corner(&self, m: &CMat) -> CMat {
        let k = self.n / 2;
        m.view((0, 0), (k, k)).into_owned()
    }

    /// `‖X − Y‖_F / ‖Y‖_F` over the leading `N/2 x N/2` block.
    pub fn corner_distance(&self, x: &CMat, y: &CMat) -> f64 {
        let (cx, cy) = (self.corner(x), self.corner(y));
        (cx - &cy).norm() / cy.norm()
    }
}

/// `σ = √(2 tanh ω)`.
pub fn sigma_from_omega(omega: f64) -> f64 {
    (2.0 * omega.tanh()).sqrt()
}

/// `ω = artanh(σ²/2)`, the inverse of [`sigma_from_omega`] on `[0, √2)`.
pub fn omega_from_sigma(sigma: f64) -> f64 {
    (0.5 * sigma * sigma).atanh()
}

/// `e^{ω(ξ²+η²)}` by Hermitian eigendecomposition.
pub fn lhs_exponential(pair: &TruncatedPair, omega: f64) -> Result<CMat> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("omega must be nonnegative, got {omega}")));
    }
    let (vals, vecs) = herm_eigen(&pair.energy());
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::from((omega * vals[j]).exp());
    }
    Ok(scaled * vecs.adjoint())
}

/// `E e^{σ(aξ+bη)}` by tensor Gauss–Hermite quadrature.
///
/// Uses `aξ + bη = r U ξ U†` with `U = diag(e^{ikφ})`, `(a, b) = r(cos φ, sin φ)`,
/// so one eigendecomposition of `ξ` serves every node.
pub fn gaussian_average(pair: &TruncatedPair, sigma: f64, order: usize) -> Result<CMat> {
    if order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be positive".into()));
    }
    let n = pair.n;
    let (x, w) = gauss_hermite_normal(order);
    let (d, v) = sym_eigen(&pair.xi);
    // s[m][n − 1 + Δ] = Σ w_i w_j e^{iΔφ} e^{σ r d_m}
    let width = 2 * n - 1;
    let mut s = vec![Complex64::new(0.0, 0.0); n * width];
    for (i, &a) in x.iter().enumerate() {
        for (j, &b) in x.iter().enumerate() {
            let weight = w[i] * w[j];
            let r = a.hypot(b);
            let phase = if r > 0.0 { Complex64::new(a / r, b / r) } else { Complex64::new(1.0, 0.0) };
            let mut powers = vec![Complex64::new(1.0, 0.0); n];
            for k in 1..n {
                powers[k] = powers[k - 1] * phase;
            }
            for (m, &dm) in d.iter().enumerate() {
                let e = weight * (sigma * r * dm).exp();
                let row = &mut s[m * width..(m + 1) * width];
                row[n - 1] += e;
                for k in 1..n {
                    let z = powers[k] * e;
                    row[n - 1 + k] += z;
                    row[n - 1 - k] += z.conj();
                }
            }
        }
    }
    Ok(CMat::from_fn(n, n, |k, l| {
        let offset = n - 1 + k - l;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..n {
            acc += s[m * width + offset] * (v[(k, m)] * v[(l, m)]);
        }
        acc
    }))
}

/// `(1/cosh ω) E e^{σ(aξ+bη)}` with `σ = √(2 tanh ω)`.
pub fn rhs_average(pair: &TruncatedPair, omega: f64, order: usize) -> Result<CMat> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("omega must be nonnegative, got {omega}")));
    }
    let avg = gaussian_average(pair, sigma_from_omega(omega), order)?;
    Ok(avg / Complex64::from(omega.cosh()))
}

/// [`rhs_average`], rejected if the corner block moves by more than `tol`
/// (relative Frobenius) between orders `q` and `q + 8`.
pub fn rhs_average_checked(pair: &TruncatedPair, omega: f64, order: usize, tol: f64) -> Result<CMat> {
    let lo = rhs_average(pair, omega, order)?;
    let hi = rhs_average(pair, omega, order + QUADRATURE_STEP)?;
    let change = pair.corner_distance(&lo, &hi);
    if change > tol {
        return Err(Error::QuadratureUnderresolved { change });
    }
    Ok(hi)
}

/// Relative corner-block distance between both sides at `ω`.
pub fn corner_error(pair: &TruncatedPair, omega: f64, order: usize) -> Result<f64> {
    let lhs = lhs_exponential(pair, omega)?;
    let rhs = rhs_average(pair, omega, order)?;
    Ok(pair.corner_distance(&rhs, &lhs))
}

/// `e^{σ(aξ+bη)}` directly and as `e^{−iσ²ab/2} e^{σaξ} e^{σbη}`.
pub fn bch_pair(pair: &TruncatedPair, sigma: f64, a: f64, b: f64) -> (CMat, CMat) {
    let xc = to_complex(&pair.xi);
    let hermitian_exp = |m: &CMat, t: f64| {
        let (vals, vecs) = herm_eigen(m);
        let mut scaled = vecs.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::from((t * vals[j]).exp());
        }
        scaled * vecs.adjoint()
    };
    let direct = hermitian_exp(&(&xc * Complex64::from(a) + &pair.eta * Complex64::from(b)), sigma);
    let phase = Complex64::new(0.0, -0.5 * sigma * sigma * a * b).exp();
    let product = hermitian_exp(&xc, sigma * a) * hermitian_exp(&pair.eta, sigma * b) * phase;
    (direct, product)
}

/// Central-difference check of `f′ = σ/(1 − σ⁴/4)·(ξ² + η² + σ²/2) f` for
/// `f(σ) = E e^{σ(aξ+bη)}`.
#[derive(Debug, Clone)]
pub struct OdeReport {
    pub sigmas: Vec<f64>,
    /// Relative corner-block residual at each `σ`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

pub fn verify_ode(pair: &TruncatedPair, sigmas: &[f64], step: f64, order: usize) -> Result<OdeReport> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let limit = std::f64::consts::SQRT_2;
    let energy = pair.energy();
    let n = pair.n;
    let mut residuals = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        if !(sigma >= 0.0) || sigma + step >= limit {
            return Err(Error::InvalidArgument(format!("sigma {sigma} with step {step} leaves [0, sqrt 2)")));
        }
        // f is even in σ, so f(σ − h) = f(|σ − h|)
        let plus = gaussian_average(pair, sigma + step, order)?;
        let minus = gaussian_average(pair, (sigma - step).abs(), order)?;
        let fd = (plus - minus) / Complex64::from(2.0 * step);
        let f = gaussian_average(pair, sigma, order)?;
        let coef = sigma / (1.0 - sigma.powi(4) / 4.0);
        let generator = &energy + CMat::identity(n, n) * Complex64::from(sigma * sigma / 2.0);
        let rhs = generator * f.clone() * Complex64::from(coef);
        let scale = pair.corner(&f).norm();
        residuals.push((pair.corner(&fd) - pair.corner(&rhs)).norm() / scale);
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(OdeReport { sigmas: sigmas.to_vec(), residuals, max_residual })
}
