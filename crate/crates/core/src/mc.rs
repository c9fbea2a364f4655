//! Monte-Carlo oracle for the QEF over the classical surrogate `Z` and the
//! stationary Gaussian process `N`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::KernelContext;
use crate::linalg::{psd_sqrt, Mat};
use crate::qef::{compute_c, QefInputs};
use crate::qkl::QklBasis;
use crate::quadrature::PanelGrid;

/// Eigenvalue clipping threshold for the square root of `[P(s_a − s_b)]`.
pub const COVARIANCE_CLIP: f64 = 1e-10;
/// Exponents above this are treated as overflowed samples.
pub const EXPONENT_CAP: f64 = 700.0;
/// Largest tolerated fraction of overflowed samples.
pub const MAX_DIVERGED_FRACTION: f64 = 0.01;
/// Excess kurtosis of batch means above which an estimate is flagged.
pub const KURTOSIS_GUARD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    /// Number of batches; each owns an RNG substream and yields one batch mean.
    pub batches: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: 100_000, seed: 0, batches: 100 }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batches == 0 || self.samples < 2 * self.batches {
            return Err(Error::InvalidArgument(format!(
                "need samples >= 2 * batches >= 2, got samples {} and batches {}",
                self.samples, self.batches
            )));
        }
        Ok(())
    }

    /// Sample counts per batch; the first `samples % batches` get one extra.
    pub fn batch_sizes(&self) -> Vec<usize> {
        let base = self.samples / self.batches;
        let extra = self.samples % self.batches;
        (0..self.batches).map(|b| base + usize::from(b < extra)).collect()
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// `exp((θ/2) ΣΣ ΔZ_aᵀ P(s_a − s_b) ΔZ_b)`.
    Z,
    /// `exp((θ/2)⟨N, K N⟩)`.
    N,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Z => "Z",
            Route::N => "N",
        }
    }

    fn stream_offset(self) -> u64 {
        match self {
            Route::Z => 0,
            Route::N => 1 << 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub route: Route,
    pub theta: f64,
    pub mean: f64,
    /// Batch-means standard error.
    pub stderr: f64,
    /// Samples that did not overflow.
    pub n_eff: usize,
    pub diverged_fraction: f64,
    /// Excess kurtosis of the batch means.
    pub kurtosis: f64,
    /// `θ r(PK) > 1/2` or heavy-tailed batch means.
    pub unreliable: bool,
    /// Hilbert–Schmidt capture fraction of the truncated basis.
    pub capture: f64,
}

fn standard_normals(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn gather_paths(cfg: &McConfig, rows: usize, stream_offset: u64, map: impl Fn(&Mat) -> Mat + Sync) -> Mat {
    let sizes = cfg.batch_sizes();
    let blocks: Vec<Mat> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &size)| map(&standard_normals(&mut cfg.rng(stream_offset + b as u64), rows, size)))
        .collect();
    let mut out = Mat::zeros(blocks.first().map(|m| m.nrows()).unwrap_or(0), cfg.samples);
    let mut col = 0;
    for block in blocks {
        out.columns_mut(col, block.ncols()).copy_from(&block);
        col += block.ncols();
    }
    out
}

/// Paths `Z(t) = Σ √tanhc(θω_k) H_k(t)[α_k; β_k]` on the grid, stacked as
/// `nN x samples`.
pub fn sample_z_paths(qkl: &QklBasis, cfg: &McConfig) -> Result<Mat> {
    cfg.validate()?;
    let map = z_map(qkl);
    Ok(gather_paths(cfg, map.ncols(), 0, |g| &map * g))
}

fn z_map(qkl: &QklBasis) -> Mat {
    let mut map = qkl.stacked_big_h();
    for (j, mut col) in map.column_iter_mut().enumerate() {
        col *= qkl.tanc_values[j / 2].sqrt();
    }
    map
}

/// Paths of the stationary process with `E N(s)N(t)ᵀ = P(s − t)` on the
/// grid, stacked as `nN x samples`.
pub fn sample_n_paths(ctx: &KernelContext, p0: &Mat, grid: &PanelGrid, cfg: &McConfig) -> Result<Mat> {
    cfg.validate()?;
    let root = psd_sqrt(&ctx.covariance_matrix(grid, p0), COVARIANCE_CLIP)?;
    Ok(gather_paths(cfg, root.ncols(), 0, |g| &root * g))
}

/// Reusable sampling data for both estimators.
#[derive(Debug, Clone)]
pub struct McOracle<'a> {
    inputs: &'a QefInputs,
    /// Symmetric square root of `[P(s_a − s_b)]`.
    root: Mat,
    /// `√2 W h_k` columns, mapping a path to its mode coordinates.
    projector: Mat,
}

impl<'a> McOracle<'a> {
    pub fn new(inputs: &'a QefInputs) -> Result<Self> {
        let root = psd_sqrt(&inputs.p_block, COVARIANCE_CLIP)?;
        let n = inputs.basis.n();
        let w = inputs.basis.grid.stacked_weights(n);
        let s2 = std::f64::consts::SQRT_2;
        let h = inputs.basis.stacked_h();
        let projector = Mat::from_fn(h.nrows(), h.ncols(), |r, c| s2 * w[r] * h[(r, c)]);
        Ok(McOracle { inputs, root, projector })
    }

    /// `exp(−C)·E exp((θ/2)·Q)` with `θ` and `K` taken from `qkl`.
    pub fn estimate(&self, qkl: &QklBasis, cfg: &McConfig, route: Route) -> Result<McEstimate> {
        cfg.validate()?;
        if qkl.basis.grid.nodes() != self.inputs.basis.grid.nodes() || qkl.modes() != self.inputs.basis.len() {
            return Err(Error::GridMismatch("QKL basis and QEF inputs use different discretizations".into()));
        }
        let theta = qkl.theta;
        let scaled_radius = self.inputs.scaled_radius(theta)?;
        if scaled_radius >= 1.0 {
            return Err(Error::ThetaSupercritical { theta_critical: theta / scaled_radius });
        }
        let kappa: Vec<f64> = qkl.tanc_values.iter().flat_map(|&k| [k, k]).collect();
        let (c, _) = compute_c(&qkl.basis, theta);

        // ΔZ_a = w_a Ż(s_a) with Ż = Σ √κ_k √2 h_k [α_k; β_k]
        let mut z_increments = self.projector.clone();
        for (j, mut col) in z_increments.column_iter_mut().enumerate() {
            col *= kappa[j].sqrt();
        }
        let p_block = &self.inputs.p_block;
        let exponent = |g: &Mat| -> Vec<f64> {
            match route {
                Route::Z => {
                    let dz = &z_increments * g;
                    let pdz = p_block * &dz;
                    dz.column_iter().zip(pdz.column_iter()).map(|(a, b)| 0.5 * theta * a.dot(&b)).collect()
                }
                Route::N => {
                    let paths = &self.root * g;
                    let coords = self.projector.transpose() * paths;
                    coords
                        .column_iter()
                        .map(|col| 0.5 * theta * col.iter().zip(&kappa).map(|(x, k)| k * x * x).sum::<f64>())
                        .collect()
                }
            }
        };
        let dim = match route {
            Route::Z => kappa.len(),
            Route::N => self.root.ncols(),
        };
        let sizes = cfg.batch_sizes();
        let stats: Vec<(f64, usize, usize)> = sizes
            .par_iter()
            .enumerate()
            .map(|(b, &size)| {
                let mut rng = cfg.rng(route.stream_offset() + b as u64);
                let g = standard_normals(&mut rng, dim, size);
                let mut sum = 0.0;
                let mut kept = 0;
                for x in exponent(&g) {
                    if x > EXPONENT_CAP || !x.is_finite() {
                        continue;
                    }
                    sum += x.exp();
                    kept += 1;
                }
                (sum, kept, size)
            })
            .collect();

        let total: usize = stats.iter().map(|s| s.2).sum();
        let n_eff: usize = stats.iter().map(|s| s.1).sum();
        let diverged_fraction = (total - n_eff) as f64 / total as f64;
        if diverged_fraction > MAX_DIVERGED_FRACTION {
            return Err(Error::OverflowDominated { fraction: diverged_fraction });
        }
        let means: Vec<f64> = stats.iter().filter(|s| s.1 > 0).map(|s| s.0 / s.1 as f64).collect();
        let grand = stats.iter().map(|s| s.0).sum::<f64>() / n_eff as f64;
        let (stderr, kurtosis) = batch_statistics(&means);
        let scale = (-c).exp();
        Ok(McEstimate {
            route,
            theta,
            mean: scale * grand,
            stderr: scale * stderr,
            n_eff,
            diverged_fraction,
            kurtosis,
            unreliable: scaled_radius > 0.5 + 1e-9 || kurtosis > KURTOSIS_GUARD,
            capture: qkl.basis.capture(),
        })
    }
}

/// Batch-means standard error and excess kurtosis.
fn batch_statistics(means: &[f64]) -> (f64, f64) {
    let b = means.len() as f64;
    if means.len() < 2 {
        return (f64::INFINITY, 0.0);
    }
    let mu = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (b - 1.0);
    let m2 = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / b;
    let m4 = means.iter().map(|m| (m - mu).powi(4)).sum::<f64>() / b;
    let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };
    ((var / b).sqrt(), kurtosis)
}

/// One-shot estimate; see [`McOracle::estimate`].
pub fn estimate_qef_mc(qkl: &QklBasis, inputs: &QefInputs, cfg: &McConfig, route: Route) -> Result<McEstimate> {
    McOracle::new(inputs)?.estimate(qkl, cfg, route)
}

/// Empirical `E X(s_a) X(s_b)ᵀ` from stacked zero-mean paths.
pub fn empirical_covariance(paths: &Mat, n: usize, a: usize, b: usize) -> Mat {
    let xa = paths.rows(n * a, n);
    let xb = paths.rows(n * b, n);
    xa * xb.transpose() / paths.ncols() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::{build_basis, BasisConfig};
    use crate::fixtures::one_mode_fixture;
    use crate::model::{solve_state_ale, GaussianStateData};
    use crate::qef::compute_qef;
    use crate::qkl::build_qkl;
    use std::sync::OnceLock;

    fn fixture() -> &'static (KernelContext, QefInputs) {
        static CELL: OnceLock<(KernelContext, QefInputs)> = OnceLock::new();
        CELL.get_or_init(|| {
            let ctx = KernelContext::new(&one_mode_fixture()).unwrap();
            let grid = PanelGrid::new(1.0, 8, 16).unwrap();
            let basis = build_basis(&ctx, &grid, &BasisConfig::default()).unwrap();
            let state = solve_state_ale(&ctx.sys.a, &ctx.sys.b).unwrap();
            let inputs = QefInputs::new(&ctx, basis, Some(&state)).unwrap();
            (ctx, inputs)
        })
    }

    fn cfg(samples: usize, seed: u64) -> McConfig {
        McConfig { samples, seed, batches: 50 }
    }

    #[test]
    fn config_validation_and_batches() {
        assert!(McConfig { samples: 3, seed: 0, batches: 2 }.validate().is_err());
        assert!(McConfig { samples: 10, seed: 0, batches: 0 }.validate().is_err());
        let c = McConfig { samples: 103, seed: 0, batches: 10 };
        let sizes = c.batch_sizes();
        assert_eq!(sizes.iter().sum::<usize>(), 103);
        assert_eq!(sizes[0], 11);
        assert_eq!(sizes[9], 10);
    }

    #[test]
    fn z_paths_start_at_zero_and_match_covariance() {
        let (_, inputs) = fixture();
        let qkl = build_qkl(inputs.basis.clone(), 0.8).unwrap();
        let samples = 40_000;
        let z = sample_z_paths(&qkl, &cfg(samples, 1)).unwrap();
        let grid = &inputs.basis.grid;
        let nodes = grid.nodes();
        let zero = qkl.big_h_at(0, 0.0);
        assert_eq!(zero, Mat::zeros(2, 2));
        let tol = 4.0 / (samples as f64).sqrt();
        for (a, b) in [(20, 20), (60, 100), (127, 127), (10, 90)] {
            let emp = empirical_covariance(&z, 2, a, b);
            let exact = qkl.surrogate_covariance(nodes[a], nodes[b]);
            let scale = (nodes[a] * nodes[b]).sqrt();
            assert!((emp - exact).amax() <= tol * scale, "({a}, {b})");
        }
    }

    #[test]
    fn wiener_limit_of_z_paths() {
        let (_, inputs) = fixture();
        let qkl = build_qkl(inputs.basis.clone(), 0.0).unwrap();
        let samples = 40_000;
        let z = sample_z_paths(&qkl, &cfg(samples, 2)).unwrap();
        let nodes = inputs.basis.grid.nodes();
        let tail = qkl.wiener_tail_bound().sqrt();
        for (a, b) in [(30, 30), (40, 110), (127, 127)] {
            let emp = empirical_covariance(&z, 2, a, b);
            let target = Mat::identity(2, 2) * nodes[a].min(nodes[b]);
            let mc = 4.0 / (samples as f64).sqrt() * (nodes[a] * nodes[b]).sqrt();
            assert!((emp - target).amax() <= mc + tail, "({a}, {b})");
        }
    }

    #[test]
    fn n_paths_are_stationary_with_covariance_p() {
        let (ctx, inputs) = fixture();
        let samples = 40_000;
        let grid = &inputs.basis.grid;
        let paths = sample_n_paths(ctx, &inputs.p0, grid, &cfg(samples, 3)).unwrap();
        let nodes = grid.nodes();
        let tol = 5.0 / (samples as f64).sqrt();
        for a in [0, 50, 127] {
            assert!((empirical_covariance(&paths, 2, a, a) - &inputs.p0).amax() <= tol);
        }
        for (a, b) in [(10, 40), (80, 110)] {
            let emp = empirical_covariance(&paths, 2, a, b);
            let exact = ctx.covariance_kernel(&inputs.p0, nodes[a], nodes[b]);
            assert!((emp - exact).amax() <= tol);
        }
    }

    #[test]
    fn zero_state_gives_zero_paths() {
        let (ctx, inputs) = fixture();
        let paths = sample_n_paths(ctx, &Mat::zeros(2, 2), &inputs.basis.grid, &cfg(100, 4)).unwrap();
        assert!(paths.iter().all(|&x| x == 0.0));
        let zero = GaussianStateData { p0: Mat::zeros(2, 2) };
        let z_inputs = QefInputs::new(ctx, inputs.basis.clone(), Some(&zero)).unwrap();
        let qkl = build_qkl(inputs.basis.clone(), 0.5).unwrap();
        let est = estimate_qef_mc(&qkl, &z_inputs, &cfg(1000, 4), Route::N).unwrap();
        let xi = compute_qef(&z_inputs, 0.5).unwrap().xi.value().unwrap();
        assert!((est.mean - xi).abs() < 1e-14);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn both_routes_match_closed_form() {
        let (_, inputs) = fixture();
        let theta = inputs.theta_for_radius(0.3).unwrap().unwrap();
        let qkl = build_qkl(inputs.basis.clone(), theta).unwrap();
        let xi = compute_qef(inputs, theta).unwrap().xi.value().unwrap();
        let oracle = McOracle::new(inputs).unwrap();
        for route in [Route::Z, Route::N] {
            let est = oracle.estimate(&qkl, &cfg(20_000, 5), route).unwrap();
            assert!(!est.unreliable);
            assert_eq!(est.diverged_fraction, 0.0);
            assert!((est.mean - xi).abs() <= 3.0 * est.stderr, "{route:?}: {} ± {} vs {xi}", est.mean, est.stderr);
        }
    }

    #[test]
    fn small_theta_is_near_exp_minus_c() {
        let (_, inputs) = fixture();
        let theta = 1e-3;
        let qkl = build_qkl(inputs.basis.clone(), theta).unwrap();
        let est = estimate_qef_mc(&qkl, inputs, &cfg(2_000, 6), Route::Z).unwrap();
        let (c, _) = compute_c(&inputs.basis, theta);
        assert!((est.mean / (-c).exp() - 1.0).abs() < 5.0 * theta);
    }

    #[test]
    fn supercritical_theta_is_refused() {
        let (_, inputs) = fixture();
        let star = inputs.critical_theta().unwrap().unwrap();
        let qkl = build_qkl(inputs.basis.clone(), 1.01 * star).unwrap();
        let err = estimate_qef_mc(&qkl, inputs, &cfg(100, 0), Route::Z).unwrap_err();
        assert_eq!(err.code(), "ThetaSupercritical");
    }

    #[test]
    fn same_seed_same_estimate() {
        let (_, inputs) = fixture();
        let qkl = build_qkl(inputs.basis.clone(), 0.4).unwrap();
        let oracle = McOracle::new(inputs).unwrap();
        let a = oracle.estimate(&qkl, &cfg(2_000, 9), Route::N).unwrap();
        let b = oracle.estimate(&qkl, &cfg(2_000, 9), Route::N).unwrap();
        let c = oracle.estimate(&qkl, &cfg(2_000, 10), Route::N).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert_ne!(a.mean.to_bits(), c.mean.to_bits());
    }

    #[test]
    fn mismatched_discretization_is_rejected() {
        let (ctx, inputs) = fixture();
        let coarse = PanelGrid::new(1.0, 4, 16).unwrap();
        let basis = build_basis(ctx, &coarse, &BasisConfig::default()).unwrap();
        let qkl = build_qkl(basis, 0.4).unwrap();
        assert_eq!(estimate_qef_mc(&qkl, inputs, &cfg(100, 0), Route::Z).unwrap_err().code(), "GridMismatch");
    }
}
