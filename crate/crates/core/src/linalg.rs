//! Dense linear-algebra helpers shared by the pipeline modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Reciprocal-condition threshold below which a matrix is treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// The 2x2 symplectic unit `[[0, 1], [-1, 0]]`.
pub fn block_j() -> Mat {
    Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

/// `block_j() ⊗ I_{m/2}`, the CCR matrix of an `m`-channel field.
pub fn field_j(m: usize) -> Mat {
    assert!(m.is_multiple_of(2), "field dimension must be even");
    block_j().kronecker(&Mat::identity(m / 2, m / 2))
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn frobenius(m: &Mat) -> f64 {
    m.norm()
}

pub fn ensure_square(m: &Mat, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

pub fn ensure_finite(m: &Mat) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// `‖M + Mᵀ‖_F / max(1, ‖M‖_F)`.
pub fn antisymmetry_defect(m: &Mat) -> f64 {
    (m + m.transpose()).norm() / m.norm().max(1.0)
}

/// Ratio of extreme singular values; zero for the zero matrix.
pub fn rcond(m: &Mat) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}

pub fn numerical_rank(m: &Mat, rel_tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.max();
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Largest real part of the eigenvalues.
pub fn spectral_abscissa(m: &Mat) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `log|det M|` and the unit phase `det M / |det M|` from an LU factorization,
/// accumulated in log space so large or tiny determinants do not overflow.
pub fn log_det(m: &CMat) -> (f64, Complex64) {
    let lu = m.clone().lu();
    let mut log_mag = 0.0;
    let mut phase = Complex64::new(lu.p().determinant::<f64>(), 0.0);
    for u in lu.u().diagonal().iter() {
        let r = u.norm();
        if r == 0.0 {
            return (f64::NEG_INFINITY, Complex64::new(0.0, 0.0));
        }
        log_mag += r.ln();
        phase *= u / r;
    }
    (log_mag, phase)
}

pub fn det_complex(m: &CMat) -> Complex64 {
    let (lm, ph) = log_det(m);
    ph * lm.exp()
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues descending.
pub fn sym_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Mat::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
pub fn herm_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let herm = (m + m.adjoint()).map(|z| z * 0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Symmetric square root of a PSD matrix.
///
/// Eigenvalues down to `-clip * max(1, λ_max)` are clipped to zero; anything
/// more negative is reported as [`Error::CovarianceNotPsd`].
pub fn psd_sqrt(m: &Mat, clip: f64) -> Result<Mat> {
    let (vals, vecs) = sym_eigen(m);
    let scale = vals.first().copied().unwrap_or(0.0).max(1.0);
    let min = vals.last().copied().unwrap_or(0.0);
    if min < -clip * scale {
        return Err(Error::CovarianceNotPsd { min_eig: min });
    }
    let roots = DVector::from_iterator(vals.len(), vals.iter().map(|v| v.max(0.0).sqrt()));
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= roots[j];
    }
    Ok(&scaled * vecs.transpose())
}

/// Solves `A X + X Aᵀ = Q` by complex Schur reduction and triangular
/// back-substitution.
pub fn solve_continuous_lyapunov(a: &Mat, q: &Mat) -> Result<Mat> {
    let n = ensure_square(a, "A")?;
    if q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "Lyapunov right-hand side must be {n}x{n}"
        )));
    }
    ensure_finite(a)?;
    ensure_finite(q)?;
    let schur = to_complex(a)
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::LyapunovSolveFailed("Schur iteration did not converge".into()))?;
    let (z, t) = schur.unpack();
    let rhs = z.adjoint() * to_complex(q) * &z;
    let scale = a.norm().max(f64::MIN_POSITIVE);
    // T Y + Y Tᴴ = rhs, T upper triangular.
    let mut y = CMat::zeros(n, n);
    for i in (0..n).rev() {
        for j in (0..n).rev() {
            let mut acc = rhs[(i, j)];
            for k in i + 1..n {
                acc -= t[(i, k)] * y[(k, j)];
            }
            for k in j + 1..n {
                acc -= y[(i, k)] * t[(j, k)].conj();
            }
            let denom = t[(i, i)] + t[(j, j)].conj();
            if denom.norm() <= 1e-14 * scale {
                return Err(Error::LyapunovSolveFailed(format!(
                    "eigenvalue pair sums to {:.3e}",
                    denom.norm()
                )));
            }
            y[(i, j)] = acc / denom;
        }
    }
    let x = &z * y * z.adjoint();
    let out = x.map(|c| c.re);
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::LyapunovSolveFailed("non-finite solution".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn field_j_is_orthogonal_antisymmetric() {
        for m in [2, 4, 6] {
            let j = field_j(m);
            assert_relative_eq!(&j * &j, -Mat::identity(m, m), epsilon = 1e-15);
            assert_relative_eq!(j.transpose(), -&j, epsilon = 1e-15);
        }
        assert_eq!(field_j(4)[(0, 2)], 1.0);
        assert_eq!(field_j(4)[(3, 1)], -1.0);
    }

    #[test]
    fn log_det_matches_direct() {
        let m = CMat::from_row_slice(
            3,
            3,
            &[
                Complex64::new(2.0, 1.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(-3.0, 0.2),
                Complex64::new(0.1, 0.1),
                Complex64::new(0.0, 2.0),
                Complex64::new(1.0, 1.0),
                Complex64::new(4.0, 0.0),
            ],
        );
        let d = m.determinant();
        let via_log = det_complex(&m);
        assert!((d - via_log).norm() < 1e-12 * d.norm());
    }

    #[test]
    fn lyapunov_residual_is_small() {
        let a = Mat::from_row_slice(3, 3, &[-1.0, 2.0, 0.3, -2.0, -0.5, 0.0, 0.1, 0.4, -3.0]);
        let q = Mat::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, -0.3, 0.0, -0.3, 0.5]);
        let x = solve_continuous_lyapunov(&a, &q).unwrap();
        let r = &a * &x + &x * a.transpose() - &q;
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn lyapunov_rejects_resonant_spectrum() {
        // eigenvalues ±1 sum to zero
        let a = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let q = Mat::identity(2, 2);
        assert!(matches!(
            solve_continuous_lyapunov(&a, &q),
            Err(Error::LyapunovSolveFailed(_))
        ));
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let s = psd_sqrt(&m, 1e-10).unwrap();
        assert_relative_eq!(&s * &s, m, epsilon = 1e-13);
        let bad = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(psd_sqrt(&bad, 1e-10), Err(Error::CovarianceNotPsd { .. })));
    }
}
