//! Commutator and covariance kernels, the integral operator `L`, and the
//! boundary-value matrices of its eigenproblem.

pub mod expm;

pub use expm::{expm, matrix_exp, MatrixFunctionResult};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{log_det, rcond, to_complex, CMat, Mat, SINGULAR_RCOND};
use crate::model::{build_system, OscillatorSpec, SystemMatrices};
use crate::quadrature::PanelGrid;

/// Relative tolerance of the `det G(T)` self-test.
pub const DET_IDENTITY_TOL: f64 = 1e-8;

/// System data together with the boundary-value matrices `F`, `U`, `V`.
#[derive(Debug, Clone)]
pub struct KernelContext {
    pub sys: SystemMatrices,
    pub theta: Mat,
    pub theta_inv: Mat,
    pub mho_inv: Mat,
    /// `[[0, I], [℧Aᵀ℧⁻¹A, A − ℧Aᵀ℧⁻¹]]`.
    pub f: Mat,
    /// `[A, −I]`.
    pub u: Mat,
    /// `[I; −ΘAᵀΘ⁻¹]`.
    pub v: Mat,
    pub horizon: f64,
    g_inv: Mat,
}

impl KernelContext {
    /// Builds the system from a spec and checks every precondition of the
    /// boundary-value pipeline.
    pub fn new(spec: &OscillatorSpec) -> Result<Self> {
        let sys = build_system(spec)?;
        spec.ensure_full_rank_coupling()?;
        Self::from_system(sys, spec.ccr.clone(), spec.horizon)
    }

    pub fn from_system(sys: SystemMatrices, theta: Mat, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        sys.ensure_hurwitz()?;
        sys.ensure_mho_nonsingular()?;
        let n = sys.n();
        let rc = rcond(&theta);
        if rc < SINGULAR_RCOND {
            return Err(Error::SingularTheta { rcond: rc });
        }
        let theta_inv = theta.clone().try_inverse().ok_or(Error::SingularTheta { rcond: rc })?;
        let mho_inv = sys
            .mho
            .clone()
            .try_inverse()
            .ok_or(Error::SingularMho { rcond: sys.mho_rcond })?;
        let a = &sys.a;
        let q = &sys.mho * a.transpose() * &mho_inv;
        let mut f = Mat::zeros(2 * n, 2 * n);
        f.view_mut((0, n), (n, n)).copy_from(&Mat::identity(n, n));
        f.view_mut((n, 0), (n, n)).copy_from(&(&q * a));
        f.view_mut((n, n), (n, n)).copy_from(&(a - &q));
        let mut u = Mat::zeros(n, 2 * n);
        u.view_mut((0, 0), (n, n)).copy_from(a);
        u.view_mut((0, n), (n, n)).copy_from(&(-Mat::identity(n, n)));
        let mut v = Mat::zeros(2 * n, n);
        v.view_mut((0, 0), (n, n)).copy_from(&Mat::identity(n, n));
        v.view_mut((n, 0), (n, n)).copy_from(&(-(&theta * a.transpose() * &theta_inv)));
        let mut ctx = KernelContext {
            sys,
            theta,
            theta_inv,
            mho_inv,
            f,
            u,
            v,
            horizon,
            g_inv: Mat::zeros(n, n),
        };
        let g = ctx.green_gram(horizon)?;
        ctx.g_inv = g.lu().try_inverse().ok_or(Error::SingularG)?;
        Ok(ctx)
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    /// `e^{τA}`.
    pub fn propagator(&self, tau: f64) -> Mat {
        expm(&(&self.sys.a * tau)).expect("finite drift")
    }

    /// `Λ(s − t)`: `e^{(s−t)A}Θ` for `s ≥ t`, `Θe^{(t−s)Aᵀ}` otherwise.
    pub fn lambda_kernel(&self, s: f64, t: f64) -> Mat {
        self.lambda_at(s - t)
    }

    pub fn lambda_at(&self, tau: f64) -> Mat {
        if tau >= 0.0 {
            self.propagator(tau) * &self.theta
        } else {
            &self.theta * self.propagator(-tau).transpose()
        }
    }

    /// `P(s − t)`: `e^{(s−t)A}P₀` for `s ≥ t`, `P₀e^{(t−s)Aᵀ}` otherwise.
    pub fn covariance_kernel(&self, p0: &Mat, s: f64, t: f64) -> Mat {
        let tau = s - t;
        if tau >= 0.0 {
            self.propagator(tau) * p0
        } else {
            p0 * self.propagator(-tau).transpose()
        }
    }

    /// `G(T) = U e^{TF} V`, checked against `det G(T) = e^{−T tr A} det(−℧Θ⁻¹)`.
    pub fn green_gram(&self, horizon: f64) -> Result<Mat> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be nonnegative, got {horizon}")));
        }
        let e = expm(&(&self.f * horizon))?;
        let g = &self.u * e * &self.v;
        let rel_err = self.det_identity_error(&g, horizon);
        if !(rel_err <= DET_IDENTITY_TOL) {
            return Err(Error::DeterminantIdentityViolated { rel_err });
        }
        Ok(g)
    }

    /// Relative deviation of `det g` from `e^{−T tr A} det(−℧Θ⁻¹)`.
    pub fn det_identity_error(&self, g: &Mat, horizon: f64) -> f64 {
        let (lg, pg) = log_det(&to_complex(g));
        let rhs = -(&self.sys.mho * &self.theta_inv);
        let (lr, pr) = log_det(&to_complex(&rhs));
        let log_expected = lr - horizon * self.sys.a.trace();
        let ratio = (pg / pr) * (lg - log_expected).exp();
        (ratio - Complex64::new(1.0, 0.0)).norm()
    }

    /// `G(T)` at the context horizon, inverted.
    pub fn green_gram_inverse(&self) -> &Mat {
        &self.g_inv
    }

    /// `Λ(s − t)` through the boundary-value Green function
    /// `[I 0](e^{sF}VG⁻¹Ue^{(T−t)F} − χ_{[0,s]}(t)e^{(s−t)F})[0; ℧]`.
    pub fn green_function(&self, s: f64, t: f64) -> Result<Mat> {
        let n = self.n();
        let big_t = self.horizon;
        if !(0.0..=big_t).contains(&s) || !(0.0..=big_t).contains(&t) {
            return Err(Error::InvalidArgument(format!("times must lie in [0, {big_t}]")));
        }
        let es = expm(&(&self.f * s))?;
        let et = expm(&(&self.f * (big_t - t)))?;
        let mut m = es * &self.v * &self.g_inv * &self.u * et;
        if t <= s {
            m -= expm(&(&self.f * (s - t)))?;
        }
        Ok(m.view((0, n), (n, n)) * &self.sys.mho)
    }

    /// `D(ω) = F + (i/ω)[[0, 0], [℧, 0]]` and `E(ω) = U e^{TD(ω)} V`.
    pub fn bvp_matrices(&self, omega: f64) -> Result<BvpMatrices> {
        if !(omega > 0.0) {
            return Err(Error::NonpositiveOmega(omega));
        }
        let d = self.d_matrix(omega);
        let e = self.e_from_d(&d)?;
        Ok(BvpMatrices { d, e })
    }

    pub fn d_matrix(&self, omega: f64) -> CMat {
        let n = self.n();
        let mut d = to_complex(&self.f);
        let scale = Complex64::new(0.0, 1.0 / omega);
        for i in 0..n {
            for j in 0..n {
                d[(n + i, j)] += scale * self.sys.mho[(i, j)];
            }
        }
        d
    }

    fn e_from_d(&self, d: &CMat) -> Result<CMat> {
        let e = expm(&d.map(|z| z * self.horizon))?;
        Ok(to_complex(&self.u) * e * to_complex(&self.v))
    }

    /// Block matrix `[Λ(s_a − s_b)]` over grid nodes (`nN x nN`).
    pub fn lambda_matrix(&self, grid: &PanelGrid) -> Mat {
        self.block_kernel_matrix(grid, &self.theta, false)
    }

    /// Block matrix `[P(s_a − s_b)]` over grid nodes (`nN x nN`).
    pub fn covariance_matrix(&self, grid: &PanelGrid, p0: &Mat) -> Mat {
        self.block_kernel_matrix(grid, p0, true)
    }

    fn block_kernel_matrix(&self, grid: &PanelGrid, base: &Mat, symmetric: bool) -> Mat {
        let n = self.n();
        let nodes = grid.nodes();
        let big_n = nodes.len();
        let mut out = Mat::zeros(n * big_n, n * big_n);
        for a in 0..big_n {
            for b in 0..=a {
                let e = self.propagator(nodes[a] - nodes[b]);
                let lower = &e * base;
                out.view_mut((n * a, n * b), (n, n)).copy_from(&lower);
                // K(s_b − s_a) = base e^{(s_a−s_b)Aᵀ}, which is ∓ the transpose
                let upper = if symmetric { lower.transpose() } else { -lower.transpose() };
                if a != b {
                    out.view_mut((n * b, n * a), (n, n)).copy_from(&upper);
                }
            }
        }
        out
    }

    /// `g(s) = ∫₀ᵀ Λ(s − t) f(t) dt` by the Nyström rule.
    pub fn apply_l(&self, grid: &PanelGrid, f: &Mat) -> Result<Mat> {
        let lam = self.lambda_matrix(grid);
        apply_block_kernel(grid, &lam, f)
    }

    /// `g = g₊ + Θg₋` with `g₊(s) = ∫₀ˢ e^{(s−t)A}Θf(t) dt` and
    /// `g₋(s) = ∫ₛᵀ e^{(t−s)Aᵀ}f(t) dt`, propagated panel by panel.
    ///
    /// Exact up to the polynomial interpolation of `f` inside each panel, so
    /// it is far more accurate than the Nyström rule for smooth `f`.
    pub fn apply_l_split(&self, grid: &PanelGrid, f: &Mat) -> Result<Mat> {
        self.apply_split(grid, &self.theta, f)
    }

    /// Split-form application of the kernel `e^{(s−t)A}X` (`s ≥ t`),
    /// `Xe^{(t−s)Aᵀ}` (`s < t`) for `X = Θ` or `X = P₀`.
    pub fn apply_split(&self, grid: &PanelGrid, base: &Mat, f: &Mat) -> Result<Mat> {
        grid.check(f)?;
        let n = self.n();
        if f.nrows() != n {
            return Err(Error::DimensionMismatch(format!("grid function must have {n} rows")));
        }
        let nodes = grid.nodes();
        let q = grid.order();
        let bounds = grid.boundaries();
        let a = &self.sys.a;
        let at = a.transpose();

        let mut g_plus = Mat::zeros(n, nodes.len());
        let mut carry = nalgebra::DVector::<f64>::zeros(n);
        for p in 0..grid.panels() {
            let left = bounds[p];
            let mut h = Mat::zeros(n, nodes.len());
            for i in 0..q {
                let k = p * q + i;
                let col = self.propagator(left - nodes[k]) * base * f.column(k);
                h.set_column(k, &col);
            }
            let local = grid.panel_cumulative(&h);
            for i in 0..q {
                let k = p * q + i;
                let e = self.propagator(nodes[k] - left);
                g_plus.set_column(k, &(&e * (&carry + local.column(k))));
            }
            let total = grid.panel_totals(&h).column(p).into_owned();
            carry = self.propagator(bounds[p + 1] - left) * (carry + total);
        }

        let mut g_minus = Mat::zeros(n, nodes.len());
        let mut carry = nalgebra::DVector::<f64>::zeros(n);
        for p in (0..grid.panels()).rev() {
            let right = bounds[p + 1];
            let mut h = Mat::zeros(n, nodes.len());
            for i in 0..q {
                let k = p * q + i;
                let e = expm(&(&at * (nodes[k] - right)))?;
                h.set_column(k, &(e * f.column(k)));
            }
            let local = grid.panel_cumulative(&h);
            let total = grid.panel_totals(&h).column(p).into_owned();
            for i in 0..q {
                let k = p * q + i;
                let e = expm(&(&at * (right - nodes[k])))?;
                let tail = &total - local.column(k);
                g_minus.set_column(k, &(e * (&carry + tail)));
            }
            carry = expm(&(&at * (right - bounds[p])))? * (carry + total);
        }
        Ok(g_plus + base * g_minus)
    }

    /// As [`Self::apply_l_split`] for a complex grid function.
    pub fn apply_l_split_complex(&self, grid: &PanelGrid, f: &CMat) -> Result<CMat> {
        let re = self.apply_l_split(grid, &f.map(|z| z.re))?;
        let im = self.apply_l_split(grid, &f.map(|z| z.im))?;
        Ok(CMat::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)])))
    }

    /// `∬‖Λ(s − t)‖²_F ds dt = 2∫₀ᵀ (T − τ)‖e^{τA}Θ‖²_F dτ`.
    pub fn hs_total(&self) -> f64 {
        let big_t = self.horizon;
        let stiffness = self.sys.a.norm() * big_t;
        let panels = (stiffness.ceil() as usize).clamp(8, 4096);
        let grid = PanelGrid::new(big_t, panels, 20).expect("valid grid");
        grid.nodes()
            .iter()
            .zip(grid.weights())
            .map(|(&tau, &w)| 2.0 * w * (big_t - tau) * self.lambda_at(tau).norm_squared())
            .sum()
    }

    /// `Σ_{a,b} w_a w_b ‖Λ(s_a − s_b)‖²_F`.
    pub fn hs_grid(&self, grid: &PanelGrid, lambda: &Mat) -> f64 {
        let n = self.n();
        let w = grid.weights();
        let mut acc = 0.0;
        for a in 0..w.len() {
            for b in 0..w.len() {
                acc += w[a] * w[b] * lambda.view((n * a, n * b), (n, n)).norm_squared();
            }
        }
        acc
    }
}

/// Boundary-value matrices at a trial frequency.
#[derive(Debug, Clone)]
pub struct BvpMatrices {
    pub d: CMat,
    pub e: CMat,
}

/// `g_a = Σ_b w_b K_{ab} f_b` for a block kernel matrix.
pub fn apply_block_kernel(grid: &PanelGrid, kernel: &Mat, f: &Mat) -> Result<Mat> {
    grid.check(f)?;
    let n = f.nrows();
    if kernel.nrows() != n * grid.len() {
        return Err(Error::DimensionMismatch("kernel matrix does not match grid function".into()));
    }
    let mut weighted = f.clone();
    for (mut col, w) in weighted.column_iter_mut().zip(grid.weights()) {
        col *= *w;
    }
    let stacked = nalgebra::DVector::from_column_slice(weighted.as_slice());
    let out = kernel * stacked;
    Ok(Mat::from_column_slice(n, grid.len(), out.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{one_mode_fixture, random_spec};
    use crate::linalg::{block_j, det_complex};
    use crate::model::solve_state_ale;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture_ctx() -> KernelContext {
        KernelContext::new(&one_mode_fixture()).unwrap()
    }

    #[test]
    fn lambda_at_zero_is_theta_and_antisymmetric() {
        let ctx = fixture_ctx();
        assert_eq!(ctx.lambda_kernel(0.3, 0.3), block_j());
        for (s, t) in [(0.1, 0.7), (0.9, 0.2), (0.0, 1.0)] {
            let d = ctx.lambda_kernel(s, t) + ctx.lambda_kernel(t, s).transpose();
            assert!(d.norm() < 1e-12);
        }
    }

    #[test]
    fn lambda_matches_closed_form() {
        // e^{τ(2bJ − 2I)} = e^{−2τ} R(2τ) with R the rotation generated by bJ
        let ctx = fixture_ctx();
        let tau: f64 = 0.5;
        let rot = Mat::from_row_slice(2, 2, &[(2.0 * tau).cos(), (2.0 * tau).sin(), -(2.0 * tau).sin(), (2.0 * tau).cos()]);
        let expected = rot * (-2.0 * tau).exp() * block_j();
        assert_relative_eq!(ctx.lambda_kernel(0.75, 0.25), expected, epsilon = 1e-14);
    }

    #[test]
    fn covariance_kernel_symmetry() {
        let ctx = fixture_ctx();
        let p0 = Mat::identity(2, 2);
        assert_eq!(ctx.covariance_kernel(&p0, 0.4, 0.4), p0);
        let d = ctx.covariance_kernel(&p0, 0.2, 0.9) - ctx.covariance_kernel(&p0, 0.9, 0.2).transpose();
        assert!(d.norm() < 1e-12);
        let one = ctx.covariance_kernel(&p0, 1.0, 0.0);
        let rot = Mat::from_row_slice(2, 2, &[2f64.cos(), 2f64.sin(), -(2f64.sin()), 2f64.cos()]);
        assert_relative_eq!(one, rot * (-2f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn intertwining_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let ctx = KernelContext::new(&random_spec(&mut rng, 4, 4, 1.0)).unwrap();
            let q = &ctx.sys.mho * ctx.sys.a.transpose() * &ctx.mho_inv;
            let uf = &ctx.u * &ctx.f + &q * &ctx.u;
            assert!(uf.norm() < 1e-10 * ctx.f.norm());
            let uv = &ctx.u * &ctx.v + &ctx.sys.mho * &ctx.theta_inv;
            assert!(uv.norm() < 1e-10 * ctx.f.norm());
        }
    }

    #[test]
    fn gram_at_zero_and_fixture_determinant() {
        let ctx = fixture_ctx();
        let g0 = ctx.green_gram(0.0).unwrap();
        assert_relative_eq!(g0, -(&ctx.sys.mho * &ctx.theta_inv), epsilon = 1e-14);
        // tr A = −4 and −℧Θ⁻¹ = 4I, so det G(1) = 16 e⁴
        let g1 = ctx.green_gram(1.0).unwrap();
        assert_relative_eq!(g1.determinant(), 16.0 * 4f64.exp(), max_relative = 1e-10);
    }

    #[test]
    fn determinant_law_for_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..20 {
            let n = if i % 2 == 0 { 2 } else { 4 };
            let ctx = KernelContext::new(&random_spec(&mut rng, n, n, 1.0)).unwrap();
            for t in [0.1, 1.0, 5.0] {
                let g = ctx.green_gram(t).unwrap();
                assert!(ctx.det_identity_error(&g, t) <= 1e-8);
            }
        }
    }

    #[test]
    fn green_function_reproduces_lambda() {
        let ctx = fixture_ctx();
        for i in 0..10 {
            for j in 0..10 {
                let (s, t) = (i as f64 / 9.0, j as f64 / 9.0);
                let diff = ctx.green_function(s, t).unwrap() - ctx.lambda_kernel(s, t);
                assert!(diff.norm() <= 1e-8, "s={s} t={t} diff={}", diff.norm());
            }
        }
        assert_relative_eq!(ctx.green_function(0.0, 0.0).unwrap(), block_j(), epsilon = 1e-10);
    }

    #[test]
    fn bvp_matrices_structure_and_limit() {
        let ctx = fixture_ctx();
        let bvp = ctx.bvp_matrices(2.0).unwrap();
        let diff = &bvp.d - to_complex(&ctx.f);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i >= 2 && j < 2 {
                    Complex64::new(0.0, 0.5 * ctx.sys.mho[(i - 2, j)])
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((diff[(i, j)] - expected).norm() < 1e-15);
            }
        }
        let far = ctx.bvp_matrices(1e6).unwrap().e;
        let g = to_complex(ctx.green_gram(1.0).as_ref().unwrap());
        assert!((far - &g).norm() < 1e-4 * g.norm());
        assert_eq!(ctx.bvp_matrices(0.0).unwrap_err().code(), "NonpositiveOmega");
        assert_eq!(ctx.bvp_matrices(-1.0).unwrap_err().code(), "NonpositiveOmega");
    }

    #[test]
    fn det_e_independent_of_exponential_splitting() {
        // e^{TD} computed directly and as (e^{TD/8})^8
        let ctx = fixture_ctx();
        let bvp = ctx.bvp_matrices(1.0).unwrap();
        let direct = det_complex(&bvp.e);
        let step = expm(&bvp.d.map(|z| z / 8.0)).unwrap();
        let mut prod = CMat::identity(4, 4);
        for _ in 0..8 {
            prod = &prod * &step;
        }
        let e2 = to_complex(&ctx.u) * prod * to_complex(&ctx.v);
        let split = det_complex(&e2);
        assert!((direct - split).norm() <= 1e-10 * direct.norm());
    }

    #[test]
    fn apply_l_zero_and_real() {
        let ctx = fixture_ctx();
        let grid = PanelGrid::new(1.0, 4, 8).unwrap();
        let g = ctx.apply_l(&grid, &Mat::zeros(2, grid.len())).unwrap();
        assert_eq!(g, Mat::zeros(2, grid.len()));
        assert!(matches!(ctx.apply_l(&grid, &Mat::zeros(2, 5)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn split_form_matches_nystrom_rule() {
        let ctx = fixture_ctx();
        let grid = PanelGrid::new(1.0, 16, 16).unwrap();
        let f = Mat::from_fn(2, grid.len(), |i, a| {
            let t = grid.nodes()[a];
            if i == 0 { (2.0 * t).sin() + 0.5 } else { t * t - 0.3 }
        });
        let nys = ctx.apply_l(&grid, &f).unwrap();
        let split = ctx.apply_l_split(&grid, &f).unwrap();
        assert!((&nys - &split).norm() <= 1e-3 * split.norm());
    }

    #[test]
    fn split_form_exact_for_constant() {
        // f ≡ e₁: g(s) = A⁻¹(e^{sA} − I)Θe₁ + Θ(Aᵀ)⁻¹(e^{(T−s)Aᵀ} − I)e₁
        let ctx = fixture_ctx();
        let grid = PanelGrid::new(1.0, 4, 10).unwrap();
        let f = Mat::from_fn(2, grid.len(), |i, _| if i == 0 { 1.0 } else { 0.0 });
        let g = ctx.apply_l_split(&grid, &f).unwrap();
        let a = &ctx.sys.a;
        let a_inv = a.clone().try_inverse().unwrap();
        let at_inv = a.transpose().try_inverse().unwrap();
        let e1 = nalgebra::DVector::from_vec(vec![1.0, 0.0]);
        for (k, &s) in grid.nodes().iter().enumerate() {
            let plus = &a_inv * (ctx.propagator(s) - Mat::identity(2, 2)) * &ctx.theta * &e1;
            let minus = &ctx.theta * &at_inv * (ctx.propagator(1.0 - s).transpose() - Mat::identity(2, 2)) * &e1;
            assert!((g.column(k) - plus - minus).norm() < 1e-12);
        }
    }

    #[test]
    fn skew_adjoint_on_grid() {
        let ctx = KernelContext::new(&random_spec(&mut ChaCha8Rng::seed_from_u64(5), 2, 2, 1.0)).unwrap();
        let grid = PanelGrid::new(1.0, 4, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        use rand::Rng;
        let g = Mat::from_fn(2, grid.len(), |_, _| rng.random_range(-1.0..1.0));
        let h = Mat::from_fn(2, grid.len(), |_, _| rng.random_range(-1.0..1.0));
        let lhs = grid.inner(&g, &ctx.apply_l(&grid, &h).unwrap());
        let rhs = -grid.inner(&ctx.apply_l(&grid, &g).unwrap(), &h);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn hs_total_matches_grid_sum() {
        let ctx = fixture_ctx();
        let grid = PanelGrid::new(1.0, 16, 16).unwrap();
        let lam = ctx.lambda_matrix(&grid);
        let total = ctx.hs_total();
        assert!(total > 0.0);
        assert!((ctx.hs_grid(&grid, &lam) - total).abs() < 1e-4 * total);
    }

    #[test]
    fn covariance_matrix_blocks() {
        let spec = one_mode_fixture();
        let ctx = KernelContext::new(&spec).unwrap();
        let p0 = solve_state_ale(&ctx.sys.a, &ctx.sys.b).unwrap().p0;
        let grid = PanelGrid::new(1.0, 2, 4).unwrap();
        let cov = ctx.covariance_matrix(&grid, &p0);
        assert_relative_eq!(cov.clone(), cov.transpose(), epsilon = 1e-15);
        let (s, t) = (grid.nodes()[5], grid.nodes()[1]);
        assert_relative_eq!(
            cov.view((10, 2), (2, 2)).into_owned(),
            ctx.covariance_kernel(&p0, s, t),
            epsilon = 1e-15
        );
    }
}
