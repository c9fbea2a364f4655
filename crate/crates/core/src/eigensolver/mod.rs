//! Eigenfrequencies and eigenfunctions of `L` by shooting on `det E(ω) = 0`.
//!
//! Roots are located by sampling the normalized smallest singular value
//! `ρ(ω) = σ_min(E(ω)) / σ_max(E(ω))` on a log-spaced band, refining each
//! local minimum by golden-section search and polishing with Newton steps on
//! `det E(ω)`.

pub mod nystrom;

pub use nystrom::{nystrom_from_lambda, nystrom_oracle, NystromSpectrum};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{expm, KernelContext};
use crate::linalg::{det_complex, log_det, to_complex, CMat, CVec, Mat};
use crate::quadrature::PanelGrid;

/// Singular values below this fraction of `σ_max` count toward `ker E(ω)`.
pub const KERNEL_TOL: f64 = 1e-8;
/// Minima whose refined `ρ` stays above this are not roots.
const SPURIOUS_RHO: f64 = 1e-4;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Refined zero of `det E(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Root {
    pub omega: f64,
    pub multiplicity: usize,
    /// `σ_min(E) / σ_max(E)` at the refined frequency.
    pub rho: f64,
    /// `|det E(ω)| / |det G(T)|`.
    pub det_ratio: f64,
}

/// Frequency band and sampling density of the root scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub omega_min: f64,
    /// Upper end of the band; defaults to an upper bound on `ω₁` derived
    /// from the Hilbert–Schmidt norm.
    pub omega_max: Option<f64>,
    pub samples: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { omega_min: 1e-2, omega_max: None, samples: 400 }
    }
}

/// Eigenfunction `f = φ + iψ` with `L f = iω f` and `‖f‖ = 1`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub omega: f64,
    pub f0: CVec,
    pub phi: Mat,
    pub psi: Mat,
    pub multiplicity: usize,
    /// Relative sup-norm residual of the second-order ODE on the grid.
    pub bvp_residual: f64,
    /// Relative residual of the two boundary conditions.
    pub boundary_residual: f64,
}

impl EigenPair {
    pub fn f(&self) -> CMat {
        CMat::from_fn(self.phi.nrows(), self.phi.ncols(), |i, a| {
            Complex64::new(self.phi[(i, a)], self.psi[(i, a)])
        })
    }

    /// `h(s_a) = [φ(s_a) ψ(s_a)]`.
    pub fn h_at(&self, a: usize) -> Mat {
        let n = self.phi.nrows();
        Mat::from_fn(n, 2, |i, c| if c == 0 { self.phi[(i, a)] } else { self.psi[(i, a)] })
    }
}

/// Retained eigenpairs, descending in `ω`, with Hilbert–Schmidt bookkeeping.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub pairs: Vec<EigenPair>,
    pub grid: PanelGrid,
    /// `∬‖Λ‖²_F`.
    pub hs_total: f64,
    /// `2Σω_k²` over retained pairs.
    pub hs_captured: f64,
    /// Grid quadrature of `∬‖Λ‖²_F`; its distance to `hs_total` measures
    /// the quadrature error near the diagonal.
    pub hs_grid: f64,
    /// Mean-square residual of the truncated expansion of `Λ` on the grid.
    pub mercer_residual: f64,
}

impl SpectralBasis {
    pub fn n(&self) -> usize {
        self.grid_n()
    }

    fn grid_n(&self) -> usize {
        self.pairs.first().map(|p| p.phi.nrows()).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.omega).collect()
    }

    pub fn capture(&self) -> f64 {
        self.hs_captured / self.hs_total
    }

    /// Slack allowed for grid-quadrature comparisons against `hs_total`.
    pub fn quadrature_slack(&self) -> f64 {
        (self.hs_grid - self.hs_total).abs() + 1e-6
    }

    /// `[∫ h_jᵀ h_k dt]` as a `2K x 2K` matrix.
    pub fn gram(&self) -> Mat {
        let k = self.pairs.len();
        let mut g = Mat::zeros(2 * k, 2 * k);
        for (j, pj) in self.pairs.iter().enumerate() {
            for (l, pl) in self.pairs.iter().enumerate() {
                g[(2 * j, 2 * l)] = self.grid.inner(&pj.phi, &pl.phi);
                g[(2 * j, 2 * l + 1)] = self.grid.inner(&pj.phi, &pl.psi);
                g[(2 * j + 1, 2 * l)] = self.grid.inner(&pj.psi, &pl.phi);
                g[(2 * j + 1, 2 * l + 1)] = self.grid.inner(&pj.psi, &pl.psi);
            }
        }
        g
    }

    /// `max |∫ h_jᵀ h_k − ½δ_jk I₂|`.
    pub fn gram_deviation(&self) -> f64 {
        let g = self.gram();
        let half = Mat::identity(g.nrows(), g.ncols()) * 0.5;
        (g - half).amax()
    }

    /// Stacked samples `[h_1(s_a) … h_K(s_a)]` as an `nN x 2K` matrix.
    pub fn stacked_h(&self) -> Mat {
        let n = self.grid_n();
        let big_n = self.grid.len();
        let k = self.pairs.len();
        Mat::from_fn(n * big_n, 2 * k, |r, c| {
            let (a, i) = (r / n, r % n);
            let p = &self.pairs[c / 2];
            if c % 2 == 0 { p.phi[(i, a)] } else { p.psi[(i, a)] }
        })
    }

    /// `2Σ ω_k h_k(s_a) bJ h_k(s_b)ᵀ` as an `nN x nN` block matrix.
    pub fn truncated_lambda(&self) -> Mat {
        let h = self.stacked_h();
        let k = self.pairs.len();
        let mut w = Mat::zeros(2 * k, 2 * k);
        for (j, p) in self.pairs.iter().enumerate() {
            w[(2 * j, 2 * j + 1)] = 2.0 * p.omega;
            w[(2 * j + 1, 2 * j)] = -2.0 * p.omega;
        }
        &h * w * h.transpose()
    }
}

/// Mean-square grid distance `Σ w_a w_b ‖X_ab − Y_ab‖²_F` between block kernels.
pub fn weighted_block_distance(grid: &PanelGrid, n: usize, x: &Mat, y: &Mat) -> f64 {
    let w = grid.weights();
    let mut acc = 0.0;
    for c in 0..x.ncols() {
        for r in 0..x.nrows() {
            let d = x[(r, c)] - y[(r, c)];
            acc += w[r / n] * w[c / n] * d * d;
        }
    }
    acc
}

fn sorted_singular_values(e: &CMat) -> Vec<f64> {
    let mut sv: Vec<f64> = e.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// `ρ(ω) = σ_min(E(ω)) / σ_max(E(ω))`.
pub fn normalized_sigma_min(ctx: &KernelContext, omega: f64) -> Result<f64> {
    let e = ctx.bvp_matrices(omega)?.e;
    let sv = sorted_singular_values(&e);
    Ok(sv[sv.len() - 1] / sv[0])
}

fn log_det_g(ctx: &KernelContext) -> f64 {
    // |det G(T)| = e^{−T tr A} |det(−℧Θ⁻¹)|
    let rhs = -(&ctx.sys.mho * &ctx.theta_inv);
    log_det(&to_complex(&rhs)).0 - ctx.horizon * ctx.sys.a.trace()
}

fn golden_section(
    lo: f64,
    hi: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a) <= 1e-14 * b {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Newton polish on `det E(ω)` with a central-difference derivative; steps
/// are kept only while they stay inside `[lo, hi]` and reduce `ρ`.
fn newton_polish(ctx: &KernelContext, lo: f64, hi: f64, omega: f64, rho: f64) -> Result<(f64, f64)> {
    let det = |w: f64| -> Result<Complex64> { Ok(det_complex(&ctx.bvp_matrices(w)?.e)) };
    let (mut best, mut best_rho) = (omega, rho);
    for _ in 0..6 {
        let h = 1e-7 * best;
        let d0 = det(best)?;
        let slope = (det(best + h)? - det(best - h)?) / (2.0 * h);
        if slope.norm() == 0.0 {
            break;
        }
        let step = -(d0 / slope).re;
        let trial = best + step;
        if !(trial >= lo && trial <= hi) {
            break;
        }
        let trial_rho = normalized_sigma_min(ctx, trial)?;
        if trial_rho < best_rho {
            best = trial;
            best_rho = trial_rho;
        } else {
            break;
        }
    }
    Ok((best, best_rho))
}

/// Default top of the scan band, `1.05 √(‖L‖²_HS / 2) ≥ ω₁`.
pub fn default_omega_max(hs_total: f64) -> f64 {
    1.05 * (0.5 * hs_total).sqrt()
}

/// Log-spaced samples from `omega_max` down to `omega_min`.
fn scan_points(omega_min: f64, omega_max: f64, samples: usize) -> Vec<f64> {
    if samples == 1 {
        return vec![omega_max];
    }
    let (lmin, lmax) = (omega_min.ln(), omega_max.ln());
    (0..samples)
        .map(|i| (lmax + (lmin - lmax) * i as f64 / (samples - 1) as f64).exp())
        .collect()
}

/// Finds the zeros of `det E(ω)` in `[omega_min, omega_max]`, descending.
pub fn scan_eigenfrequencies(
    ctx: &KernelContext,
    omega_min: f64,
    omega_max: f64,
    samples: usize,
) -> Result<Vec<Root>> {
    if !(omega_min > 0.0) {
        return Err(Error::NonpositiveOmega(omega_min));
    }
    if !(omega_max > omega_min) || !omega_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scan band [{omega_min}, {omega_max}] is empty"
        )));
    }
    if samples < 3 {
        return Err(Error::InvalidArgument("scan needs at least 3 samples".into()));
    }
    let points = scan_points(omega_min, omega_max, samples);
    let rhos: Vec<f64> = points
        .par_iter()
        .map(|&w| normalized_sigma_min(ctx, w))
        .collect::<Result<_>>()?;

    // brackets around sampled local minima, endpoints included
    let mut brackets = Vec::new();
    for i in 0..points.len() {
        let left = if i == 0 { f64::INFINITY } else { rhos[i - 1] };
        let right = if i + 1 == points.len() { f64::INFINITY } else { rhos[i + 1] };
        if rhos[i] <= left && rhos[i] < right {
            let hi = points[i.saturating_sub(1)];
            let lo = points[(i + 1).min(points.len() - 1)];
            brackets.push((lo, hi));
        }
    }

    let log_g = log_det_g(ctx);
    let refined: Vec<Option<Root>> = brackets
        .par_iter()
        .map(|&(lo, hi)| -> Result<Option<Root>> {
            let (w, rho) = golden_section(lo, hi, |w| normalized_sigma_min(ctx, w))?;
            let (w, rho) = newton_polish(ctx, lo, hi, w, rho)?;
            // a minimum pinned to the band edge belongs to a root outside it
            let at_edge = (w - omega_min).abs() <= 1e-9 * w || (omega_max - w).abs() <= 1e-9 * w;
            if rho > SPURIOUS_RHO || (at_edge && rho > KERNEL_TOL) {
                return Ok(None);
            }
            if rho > KERNEL_TOL {
                return Err(Error::RefinementStalled { omega: w, rho });
            }
            let e = ctx.bvp_matrices(w)?.e;
            let sv = sorted_singular_values(&e);
            let multiplicity = sv.iter().filter(|&&s| s <= KERNEL_TOL * sv[0]).count().max(1);
            let det_ratio = (log_det(&e).0 - log_g).exp();
            Ok(Some(Root { omega: w, multiplicity, rho, det_ratio }))
        })
        .collect::<Result<_>>()?;

    let mut roots: Vec<Root> = refined.into_iter().flatten().collect();
    roots.sort_by(|a, b| b.omega.total_cmp(&a.omega));
    roots.dedup_by(|b, a| (a.omega - b.omega).abs() <= 1e-10 * a.omega);
    if roots.is_empty() {
        return Err(Error::NoRootsFound { omega_min, omega_max });
    }
    Ok(roots)
}

/// Samples `f(t) = [I 0] e^{tD(ω)} V f(0)` and `f'(t)` on the grid.
fn propagate(ctx: &KernelContext, d: &CMat, f0: &CVec, times: &[f64]) -> Result<(CMat, CMat)> {
    let n = ctx.n();
    let init = to_complex(&ctx.v) * f0;
    let mut f = CMat::zeros(n, times.len());
    let mut df = CMat::zeros(n, times.len());
    for (a, &t) in times.iter().enumerate() {
        let state = expm(&d.map(|z| z * t))? * &init;
        f.set_column(a, &state.rows(0, n));
        df.set_column(a, &state.rows(n, n));
    }
    Ok((f, df))
}

fn split_pair(f: &CMat) -> (Mat, Mat) {
    (f.map(|z| z.re), f.map(|z| z.im))
}

/// Relative residuals of the eigen-BVP for a sampled eigenfunction:
/// the ODE by spectral differentiation on the grid, and both boundary
/// conditions from the interpolated derivative.
pub fn bvp_residuals(ctx: &KernelContext, grid: &PanelGrid, omega: f64, f: &CMat) -> (f64, f64) {
    let a = to_complex(&ctx.sys.a);
    let mho = to_complex(&ctx.sys.mho);
    let q = to_complex(&(&ctx.sys.mho * ctx.sys.a.transpose() * &ctx.mho_inv));
    let df = grid.derivative(f);
    let d2f = grid.derivative(&df);
    let i_over_w = Complex64::new(0.0, 1.0 / omega);
    let t1 = (&q - &a) * &df;
    let t2 = &q * &a * f;
    let t3 = &mho * f * i_over_w;
    let res = &d2f + &t1 - &t2 - &t3;
    let scale = [&d2f, &t1, &t2, &t3].iter().map(|m| m.camax()).fold(0.0, f64::max);
    let ode = res.camax() / scale.max(f64::MIN_POSITIVE);

    let theta_c = to_complex(&(&ctx.theta * ctx.sys.a.transpose() * &ctx.theta_inv));
    let f_start = grid.interpolate(f, 0.0);
    let f_end = grid.interpolate(f, ctx.horizon);
    let d_start = grid.derivative_at(f, 0.0);
    let d_end = grid.derivative_at(f, ctx.horizon);
    let b0 = &d_start + &theta_c * &f_start;
    let b1 = &d_end - &a * &f_end;
    let bscale = [d_start.camax(), d_end.camax(), (&a * &f_end).camax(), (&theta_c * &f_start).camax()]
        .into_iter()
        .fold(0.0, f64::max);
    let boundary = b0.camax().max(b1.camax()) / bscale.max(f64::MIN_POSITIVE);
    (ode, boundary)
}

/// Eigenfunctions spanning `ker E(ω)` at a refined root, orthonormalized.
pub fn eigenfunction_from_root(ctx: &KernelContext, grid: &PanelGrid, root: &Root) -> Result<Vec<EigenPair>> {
    let omega = root.omega;
    let bvp = ctx.bvp_matrices(omega)?;
    let svd = bvp.e.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(Error::EmptyKernel { omega })?;
    let sv = &svd.singular_values;
    let smax = sv.max();
    let mut kernel: Vec<CVec> = (0..sv.len())
        .filter(|&i| sv[i] <= KERNEL_TOL * smax)
        .map(|i| v_t.row(i).adjoint())
        .collect();
    if kernel.is_empty() {
        if root.multiplicity == 0 {
            return Err(Error::EmptyKernel { omega });
        }
        // a slightly loose root still determines the kernel direction
        let imin = sv.imin();
        if sv[imin] > 1e-6 * smax {
            return Err(Error::EmptyKernel { omega });
        }
        kernel.push(v_t.row(imin).adjoint());
    }
    let mut funcs = Vec::with_capacity(kernel.len());
    for f0 in &kernel {
        let (f, _) = propagate(ctx, &bvp.d, f0, grid.nodes())?;
        funcs.push((f0.clone(), f));
    }
    let multiplicity = funcs.len();
    let (f0s, fs): (Vec<CVec>, Vec<CMat>) = funcs.into_iter().unzip();
    let (f0s, fs) = orthonormalize(grid, f0s, fs)?;
    let mut pairs = Vec::with_capacity(multiplicity);
    for (f0, f) in f0s.into_iter().zip(fs) {
        let (f0, f) = fix_phase(f0, f);
        let (bvp_residual, boundary_residual) = bvp_residuals(ctx, grid, omega, &f);
        let (phi, psi) = split_pair(&f);
        pairs.push(EigenPair { omega, f0, phi, psi, multiplicity, bvp_residual, boundary_residual });
    }
    Ok(pairs)
}

/// Rotates so the largest component of `f(0)` is real and positive.
fn fix_phase(f0: CVec, f: CMat) -> (CVec, CMat) {
    let idx = f0.icamax();
    let c = f0[idx];
    if c.norm() == 0.0 {
        return (f0, f);
    }
    let rot = c.conj() / c.norm();
    (f0.map(|z| z * rot), f.map(|z| z * rot))
}

/// Modified Gram–Schmidt in `⟨f, g⟩ = ∫ f* g dt` over eigenfunctions sharing
/// one frequency, carrying the initial values `f(0)` along.
pub fn orthonormalize(grid: &PanelGrid, f0s: Vec<CVec>, fs: Vec<CMat>) -> Result<(Vec<CVec>, Vec<CMat>)> {
    let mut out_f0 = Vec::with_capacity(fs.len());
    let mut out_f: Vec<CMat> = Vec::with_capacity(fs.len());
    for (mut f0, mut f) in f0s.into_iter().zip(fs) {
        let original = grid.inner_complex(&f, &f).re.sqrt();
        for (q0, q) in out_f0.iter().zip(&out_f) {
            let c = grid.inner_complex(q, &f);
            f -= q * c;
            f0 -= q0 * c;
        }
        let norm = grid.inner_complex(&f, &f).re.sqrt();
        if !(norm > 1e-8 * original) {
            return Err(Error::RankCollapse);
        }
        let inv = Complex64::new(1.0 / norm, 0.0);
        out_f.push(f * inv);
        out_f0.push(f0 * inv);
    }
    Ok((out_f0, out_f))
}

/// Largest `|⟨f̄_j, f_k⟩|` over a set of eigenfunctions.
pub fn conjugate_overlap(grid: &PanelGrid, fs: &[CMat]) -> f64 {
    let mut worst: f64 = 0.0;
    for fj in fs {
        let conj = fj.map(|z| z.conj());
        for fk in fs {
            worst = worst.max(grid.inner_complex(&conj, fk).norm());
        }
    }
    worst
}

/// Parameters of [`build_basis`].
#[derive(Debug, Clone, PartialEq)]
pub struct BasisConfig {
    pub scan: ScanConfig,
    pub capture_fraction: f64,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig { scan: ScanConfig::default(), capture_fraction: 0.99 }
    }
}

/// Scans for roots, keeps the dominant ones until `2Σω_k²` reaches the
/// requested fraction of `‖L‖²_HS`, and validates the truncated expansion
/// of `Λ` on the grid.
pub fn build_basis(ctx: &KernelContext, grid: &PanelGrid, cfg: &BasisConfig) -> Result<SpectralBasis> {
    if !(cfg.capture_fraction > 0.0 && cfg.capture_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "capture fraction must lie in (0, 1), got {}",
            cfg.capture_fraction
        )));
    }
    if (grid.horizon() - ctx.horizon).abs() > 1e-12 * ctx.horizon {
        return Err(Error::GridMismatch("grid horizon differs from the system horizon".into()));
    }
    let hs_total = ctx.hs_total();
    let omega_max = cfg.scan.omega_max.unwrap_or_else(|| default_omega_max(hs_total));
    let roots = match scan_eigenfrequencies(ctx, cfg.scan.omega_min, omega_max, cfg.scan.samples) {
        Ok(r) => r,
        Err(Error::NoRootsFound { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    let target = cfg.capture_fraction * hs_total;
    let mut pairs = Vec::new();
    let mut captured = 0.0;
    for root in &roots {
        if captured >= target {
            break;
        }
        let found = eigenfunction_from_root(ctx, grid, root)?;
        captured += 2.0 * root.omega * root.omega * found.len() as f64;
        pairs.extend(found);
    }
    if captured < target {
        return Err(Error::CaptureUnreachable { captured: captured / hs_total, target: cfg.capture_fraction });
    }
    let lambda = ctx.lambda_matrix(grid);
    let hs_grid = ctx.hs_grid(grid, &lambda);
    let mut basis = SpectralBasis {
        pairs,
        grid: grid.clone(),
        hs_total,
        hs_captured: captured,
        hs_grid,
        mercer_residual: 0.0,
    };
    basis.mercer_residual = weighted_block_distance(grid, ctx.n(), &lambda, &basis.truncated_lambda());
    let bound = (hs_total - captured).max(0.0) + basis.quadrature_slack();
    if basis.mercer_residual > bound {
        return Err(Error::BasisInconsistent(format!(
            "truncated expansion residual {:.3e} exceeds tail bound {:.3e}",
            basis.mercer_residual, bound
        )));
    }
    if captured > hs_total * (1.0 + 1e-8) {
        return Err(Error::BasisInconsistent(format!(
            "captured norm {captured:.6e} exceeds the total {hs_total:.6e}"
        )));
    }
    Ok(basis)
}

/// Eigenpair residual `‖L f − iω f‖ / ω` using the split form of `L`.
pub fn eigen_residual(ctx: &KernelContext, grid: &PanelGrid, pair: &EigenPair) -> Result<f64> {
    let f = pair.f();
    let lf = ctx.apply_l_split_complex(grid, &f)?;
    let r = lf - f.map(|z| z * Complex64::new(0.0, pair.omega));
    Ok(grid.inner_complex(&r, &r).re.sqrt() / pair.omega)
}

#[cfg(test)]
mod tests;
