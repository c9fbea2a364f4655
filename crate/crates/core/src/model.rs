//! Oscillator parameters, the derived drift/dispersion matrices and the
//! algebraic Lyapunov equations attached to them.

use crate::error::{Error, Result};
use crate::linalg::{
    antisymmetry_defect, ensure_finite, field_j, numerical_rank, rcond, solve_continuous_lyapunov,
    spectral_abscissa, sym_eigenvalues, Mat, SINGULAR_RCOND,
};

/// Relative antisymmetry defect tolerated in a CCR matrix.
pub const ANTISYMMETRY_TOL: f64 = 1e-10;
/// `A` counts as Hurwitz when its spectral abscissa is below `-HURWITZ_MARGIN`.
pub const HURWITZ_MARGIN: f64 = 1e-10;

/// Physical description of an oscillator.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorSpec {
    /// CCR matrix `Θ` (`n x n`, antisymmetric).
    pub ccr: Mat,
    /// Energy matrix `R` (`n x n`, symmetric).
    pub energy: Mat,
    /// Coupling matrix `M` (`m x n`).
    pub coupling: Mat,
    /// Time horizon `T`.
    pub horizon: f64,
    /// Risk sensitivity `θ`.
    pub theta: f64,
}

impl OscillatorSpec {
    pub fn new(ccr: Mat, energy: Mat, coupling: Mat, horizon: f64, theta: f64) -> Result<Self> {
        let spec = OscillatorSpec { ccr, energy, coupling, horizon, theta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.ccr.nrows()
    }

    pub fn m(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ccr.nrows();
        if n == 0 || !n.is_multiple_of(2) || self.ccr.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "CCR matrix must be square of even order, got {}x{}",
                self.ccr.nrows(),
                self.ccr.ncols()
            )));
        }
        if self.energy.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("energy matrix must be {n}x{n}")));
        }
        let m = self.coupling.nrows();
        if m == 0 || !m.is_multiple_of(2) || self.coupling.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "coupling matrix must be m x {n} with m even, got {}x{}",
                m,
                self.coupling.ncols()
            )));
        }
        for mat in [&self.ccr, &self.energy, &self.coupling] {
            ensure_finite(mat)?;
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidArgument(format!("theta must be nonnegative, got {}", self.theta)));
        }
        let defect = antisymmetry_defect(&self.ccr);
        if defect > ANTISYMMETRY_TOL {
            return Err(Error::NotAntisymmetric { defect });
        }
        let rc = rcond(&self.ccr);
        if rc < SINGULAR_RCOND {
            return Err(Error::SingularTheta { rcond: rc });
        }
        Ok(())
    }

    /// Checks that `M` has full column rank, as the boundary-value
    /// reformulation requires.
    pub fn ensure_full_rank_coupling(&self) -> Result<()> {
        let n = self.n();
        let rank = numerical_rank(&self.coupling, SINGULAR_RCOND);
        if rank < n {
            return Err(Error::RankDeficientCoupling { rank, n });
        }
        Ok(())
    }
}

/// Drift, dispersion and commutator matrices derived from a spec.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a: Mat,
    pub b: Mat,
    /// `℧ = B J Bᵀ`.
    pub mho: Mat,
    /// Field CCR matrix `J`.
    pub j: Mat,
    /// `‖AΘ + ΘAᵀ + ℧‖_F`.
    pub pr_residual: f64,
    /// Largest real part of the spectrum of `A`.
    pub abscissa: f64,
    pub hurwitz: bool,
    pub mho_rcond: f64,
    pub mho_singular: bool,
}

impl SystemMatrices {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn ensure_hurwitz(&self) -> Result<()> {
        if self.hurwitz {
            Ok(())
        } else {
            Err(Error::NotHurwitz { abscissa: self.abscissa })
        }
    }

    pub fn ensure_mho_nonsingular(&self) -> Result<()> {
        if self.mho_singular {
            Err(Error::SingularMho { rcond: self.mho_rcond })
        } else {
            Ok(())
        }
    }

    /// PR residual relative to `max(1, ‖℧‖_F)`.
    pub fn pr_relative(&self) -> f64 {
        self.pr_residual / self.mho.norm().max(1.0)
    }
}

/// One-point covariance of the invariant Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStateData {
    pub p0: Mat,
}

/// `A = 2Θ(R + MᵀJM)`, `B = 2ΘMᵀ`, `℧ = BJBᵀ`.
///
/// A non-Hurwitz `A` or a singular `℧` is flagged rather than rejected.
pub fn build_system(spec: &OscillatorSpec) -> Result<SystemMatrices> {
    spec.validate()?;
    let theta = &spec.ccr;
    let m_mat = &spec.coupling;
    let j = field_j(spec.m());
    let a = theta * (&spec.energy + m_mat.transpose() * &j * m_mat) * 2.0;
    let b = theta * m_mat.transpose() * 2.0;
    let mho = &b * &j * b.transpose();
    let pr_residual = (&a * theta + theta * a.transpose() + &mho).norm();
    let abscissa = spectral_abscissa(&a);
    let mho_rcond = rcond(&mho);
    Ok(SystemMatrices {
        a,
        b,
        mho,
        j,
        pr_residual,
        abscissa,
        hurwitz: abscissa < -HURWITZ_MARGIN,
        mho_rcond,
        mho_singular: mho_rcond < SINGULAR_RCOND,
    })
}

fn require_hurwitz(a: &Mat) -> Result<()> {
    let abscissa = spectral_abscissa(a);
    if abscissa < -HURWITZ_MARGIN {
        Ok(())
    } else {
        Err(Error::NotHurwitz { abscissa })
    }
}

/// Recovers `Θ` from `A` and `℧` by solving `AΘ + ΘAᵀ + ℧ = 0`.
pub fn recover_ccr(a: &Mat, mho: &Mat) -> Result<Mat> {
    require_hurwitz(a)?;
    let x = solve_continuous_lyapunov(a, &(-mho))?;
    Ok((&x - x.transpose()) * 0.5)
}

/// Solves `AP₀ + P₀Aᵀ + BBᵀ = 0` for the invariant-state covariance.
pub fn solve_state_ale(a: &Mat, b: &Mat) -> Result<GaussianStateData> {
    require_hurwitz(a)?;
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch("B must have as many rows as A".into()));
    }
    let q = -(b * b.transpose());
    let x = solve_continuous_lyapunov(a, &q)?;
    let p0 = (&x + x.transpose()) * 0.5;
    let eig = sym_eigenvalues(&p0);
    let max = eig.first().copied().unwrap_or(0.0).max(1.0);
    let min = eig.last().copied().unwrap_or(0.0);
    if min < -1e-10 * max {
        return Err(Error::LyapunovSolveFailed(format!(
            "state covariance has negative eigenvalue {min:.3e}"
        )));
    }
    Ok(GaussianStateData { p0 })
}

/// Changes variables `X ↦ SX`: `Θ ↦ SΘSᵀ`, `R ↦ S⁻ᵀRS⁻¹`, `M ↦ MS⁻¹`.
pub fn transform_system(spec: &OscillatorSpec, s: &Mat) -> Result<OscillatorSpec> {
    let n = spec.n();
    if s.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("transformation must be {n}x{n}")));
    }
    ensure_finite(s)?;
    let rc = rcond(s);
    if rc < SINGULAR_RCOND {
        return Err(Error::SingularS { rcond: rc });
    }
    let s_inv = s.clone().try_inverse().ok_or(Error::SingularS { rcond: rc })?;
    let ccr = s * &spec.ccr * s.transpose();
    let energy = s_inv.transpose() * &spec.energy * &s_inv;
    Ok(OscillatorSpec {
        ccr: (&ccr - ccr.transpose()) * 0.5,
        energy: (&energy + energy.transpose()) * 0.5,
        coupling: &spec.coupling * &s_inv,
        horizon: spec.horizon,
        theta: spec.theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{one_mode_fixture, random_spec};
    use crate::linalg::block_j;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixture_matrices() {
        let sys = build_system(&one_mode_fixture()).unwrap();
        let i2 = Mat::identity(2, 2);
        assert_relative_eq!(sys.a, block_j() * 2.0 - &i2 * 2.0, epsilon = 1e-15);
        assert_relative_eq!(sys.b, block_j() * 2.0, epsilon = 1e-15);
        assert_relative_eq!(sys.mho, block_j() * 4.0, epsilon = 1e-15);
        assert_eq!(sys.pr_residual, 0.0);
        assert!(sys.hurwitz);
        assert!(!sys.mho_singular);
        assert_relative_eq!(sys.abscissa, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_coupling_is_flagged() {
        let z = Mat::zeros(2, 2);
        let spec = OscillatorSpec::new(block_j(), z.clone(), z, 1.0, 0.1).unwrap();
        let sys = build_system(&spec).unwrap();
        assert_eq!(sys.a, Mat::zeros(2, 2));
        assert_eq!(sys.b, Mat::zeros(2, 2));
        assert_eq!(sys.mho, Mat::zeros(2, 2));
        assert!(sys.mho_singular);
        assert!(!sys.hurwitz);
        assert!(matches!(sys.ensure_hurwitz(), Err(Error::NotHurwitz { .. })));
        assert!(matches!(sys.ensure_mho_nonsingular(), Err(Error::SingularMho { .. })));
    }

    #[test]
    fn invalid_ccr_rejected() {
        let i2 = Mat::identity(2, 2);
        let err = OscillatorSpec::new(i2.clone(), i2.clone(), i2.clone(), 1.0, 0.1).unwrap_err();
        assert_eq!(err.code(), "NotAntisymmetric");
        let err = OscillatorSpec::new(Mat::zeros(2, 2), i2.clone(), i2.clone(), 1.0, 0.1).unwrap_err();
        assert_eq!(err.code(), "SingularTheta");
        let odd = Mat::zeros(3, 3);
        assert!(matches!(
            OscillatorSpec::new(odd.clone(), odd.clone(), odd, 1.0, 0.1),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn ccr_recovered_for_fixture() {
        let sys = build_system(&one_mode_fixture()).unwrap();
        let theta = recover_ccr(&sys.a, &sys.mho).unwrap();
        assert_relative_eq!(theta, block_j(), epsilon = 1e-13);
        let zero = recover_ccr(&sys.a, &Mat::zeros(2, 2)).unwrap();
        assert_eq!(zero, Mat::zeros(2, 2));
    }

    #[test]
    fn state_covariance_for_fixture() {
        let sys = build_system(&one_mode_fixture()).unwrap();
        let state = solve_state_ale(&sys.a, &sys.b).unwrap();
        assert_relative_eq!(state.p0, Mat::identity(2, 2), epsilon = 1e-13);
        let zero = solve_state_ale(&sys.a, &Mat::zeros(2, 2)).unwrap();
        assert_eq!(zero.p0, Mat::zeros(2, 2));
    }

    #[test]
    fn non_hurwitz_rejected_by_solvers() {
        let a = Mat::identity(2, 2);
        assert_eq!(recover_ccr(&a, &block_j()).unwrap_err().code(), "NotHurwitz");
        assert_eq!(solve_state_ale(&a, &a).unwrap_err().code(), "NotHurwitz");
    }

    #[test]
    fn scalar_transformation() {
        let spec = one_mode_fixture();
        let same = transform_system(&spec, &Mat::identity(2, 2)).unwrap();
        assert_relative_eq!(same.ccr, spec.ccr, epsilon = 1e-15);
        let s = Mat::identity(2, 2) * 2.0;
        let t = transform_system(&spec, &s).unwrap();
        assert_relative_eq!(t.ccr, &spec.ccr * 4.0, epsilon = 1e-14);
        assert_relative_eq!(t.energy, &spec.energy / 4.0, epsilon = 1e-14);
        assert_relative_eq!(t.coupling, &spec.coupling / 2.0, epsilon = 1e-14);
        let a0 = build_system(&spec).unwrap().a;
        let a1 = build_system(&t).unwrap().a;
        assert_relative_eq!(a0, a1, epsilon = 1e-13);
        assert_eq!(transform_system(&spec, &Mat::zeros(2, 2)).unwrap_err().code(), "SingularS");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn pr_identity_and_ccr_round_trip(seed in any::<u64>(), big in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = if big { 4 } else { 2 };
            let spec = random_spec(&mut rng, n, n, 1.0);
            let sys = build_system(&spec).unwrap();
            prop_assert!(sys.pr_relative() <= 1e-12);
            prop_assert!(sys.hurwitz);
            let theta = recover_ccr(&sys.a, &sys.mho).unwrap();
            prop_assert!((theta - &spec.ccr).norm() <= 1e-8 * spec.ccr.norm());
        }

        #[test]
        fn transformation_is_a_similarity(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = random_spec(&mut rng, 4, 4, 1.0);
            let s = crate::fixtures::random_well_conditioned(&mut rng, 4);
            let t = transform_system(&spec, &s).unwrap();
            let s_inv = s.clone().try_inverse().unwrap();
            let old = build_system(&spec).unwrap();
            let new = build_system(&t).unwrap();
            let expect_a = &s * &old.a * &s_inv;
            prop_assert!((new.a - &expect_a).norm() <= 1e-10 * expect_a.norm().max(1.0));
            let expect_b = &s * &old.b;
            prop_assert!((new.b - &expect_b).norm() <= 1e-10 * expect_b.norm().max(1.0));
            let back = transform_system(&t, &s_inv).unwrap();
            prop_assert!((back.ccr - &spec.ccr).norm() <= 1e-10 * spec.ccr.norm());
            prop_assert!((back.energy - &spec.energy).norm() <= 1e-10 * spec.energy.norm().max(1.0));
            prop_assert!((back.coupling - &spec.coupling).norm() <= 1e-10 * spec.coupling.norm().max(1.0));
        }
    }
}
