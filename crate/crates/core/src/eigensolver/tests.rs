use super::*;
use crate::fixtures::one_mode_fixture;
use crate::linalg::field_j;
use crate::model::OscillatorSpec;

/// Eigenfrequencies of the fixture: `L` reduces to the exponential kernel
/// `e^{−2|s−t|}` on `[0, 1]`, whose eigenvalues are `4/(4 + ν²)` with
/// `ν tan(ν/2) = 2` (even modes) and `ν cot(ν/2) = −2` (odd modes).
fn exponential_kernel_frequencies(count: usize) -> Vec<f64> {
    fn bisect(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> f64 {
        let glo = g(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (g(mid) > 0.0) == (glo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
    let pi = std::f64::consts::PI;
    let eps = 1e-12;
    let mut nus = Vec::new();
    for j in 0..count {
        let base = 2.0 * pi * j as f64;
        nus.push(bisect(base + eps, base + pi - eps, |v| v * (v / 2.0).sin() - 2.0 * (v / 2.0).cos()));
        nus.push(bisect(base + pi + eps, base + 2.0 * pi - eps, |v| v * (v / 2.0).cos() + 2.0 * (v / 2.0).sin()));
    }
    let mut w: Vec<f64> = nus.iter().map(|v| 4.0 / (4.0 + v * v)).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    w.truncate(count);
    w
}

fn fixture() -> KernelContext {
    KernelContext::new(&one_mode_fixture()).unwrap()
}

fn default_grid() -> PanelGrid {
    PanelGrid::new(1.0, 8, 16).unwrap()
}

#[test]
fn oracle_frequencies_sum_to_horizon_trace() {
    let w = exponential_kernel_frequencies(5);
    let expected = [0.57465522, 0.19547062, 0.07852461, 0.03977829, 0.02356334];
    for (a, b) in w.iter().zip(expected) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn shooting_matches_closed_form() {
    let ctx = fixture();
    let roots = scan_eigenfrequencies(&ctx, 0.02, 0.8, 300).unwrap();
    let exact = exponential_kernel_frequencies(5);
    assert_eq!(roots.len(), 5, "{roots:?}");
    for (r, w) in roots.iter().zip(&exact) {
        assert!(r.omega > 0.0);
        assert!((r.omega - w).abs() <= 1e-9 * w, "{} vs {}", r.omega, w);
        assert_eq!(r.multiplicity, 1);
        assert!(r.rho <= KERNEL_TOL);
    }
}

#[test]
fn no_spurious_roots_at_large_frequency() {
    let ctx = fixture();
    let e = ctx.bvp_matrices(1e6).unwrap().e;
    let ratio = (log_det(&e).0 - log_det_g(&ctx)).exp();
    assert!((ratio - 1.0).abs() < 1e-4);
    assert!(matches!(
        scan_eigenfrequencies(&ctx, 1.0, 1e6, 200),
        Err(Error::NoRootsFound { .. })
    ));
}

#[test]
fn scan_rejects_bad_band() {
    let ctx = fixture();
    assert_eq!(scan_eigenfrequencies(&ctx, 0.0, 1.0, 10).unwrap_err().code(), "NonpositiveOmega");
    assert_eq!(scan_eigenfrequencies(&ctx, 1.0, 0.5, 10).unwrap_err().code(), "InvalidArgument");
}

#[test]
fn eigenfunctions_satisfy_bvp_and_normalization() {
    let ctx = fixture();
    let grid = default_grid();
    let roots = scan_eigenfrequencies(&ctx, 0.05, 0.8, 200).unwrap();
    for root in &roots {
        let pairs = eigenfunction_from_root(&ctx, &grid, root).unwrap();
        assert_eq!(pairs.len(), 1);
        let p = &pairs[0];
        assert!(p.bvp_residual <= 1e-6, "ode residual {}", p.bvp_residual);
        assert!(p.boundary_residual <= 1e-6, "boundary residual {}", p.boundary_residual);
        assert!((grid.inner(&p.phi, &p.phi) - 0.5).abs() <= 1e-8);
        assert!((grid.inner(&p.psi, &p.psi) - 0.5).abs() <= 1e-8);
        assert!(grid.inner(&p.phi, &p.psi).abs() <= 1e-8);
        assert!(eigen_residual(&ctx, &grid, p).unwrap() <= 1e-6);
        // the conjugate eigenfunction belongs to −iω
        let conj = p.f().map(|z| z.conj());
        let lc = ctx.apply_l_split_complex(&grid, &conj).unwrap();
        let r = lc + conj.map(|z| z * Complex64::new(0.0, p.omega));
        assert!(grid.inner_complex(&r, &r).re.sqrt() <= 1e-6 * p.omega);
    }
}

fn degenerate_ctx() -> KernelContext {
    // two uncoupled copies of the fixture: every frequency is doubled
    let i4 = Mat::identity(4, 4);
    let spec = OscillatorSpec::new(field_j(4), i4.clone(), i4, 1.0, 0.5).unwrap();
    KernelContext::new(&spec).unwrap()
}

#[test]
fn degenerate_roots_have_multiplicity_two() {
    let ctx = degenerate_ctx();
    let grid = PanelGrid::new(1.0, 4, 16).unwrap();
    let roots = scan_eigenfrequencies(&ctx, 0.15, 0.8, 100).unwrap();
    assert_eq!(roots.len(), 2);
    assert!(roots.iter().all(|r| r.multiplicity == 2));
    let pairs = eigenfunction_from_root(&ctx, &grid, &roots[0]).unwrap();
    assert_eq!(pairs.len(), 2);
    let fs: Vec<CMat> = pairs.iter().map(|p| p.f()).collect();
    assert!(conjugate_overlap(&grid, &fs) <= 1e-8);
    for p in &pairs {
        assert!(p.bvp_residual <= 1e-6);
    }
}

#[test]
fn gram_schmidt_on_mixed_degenerate_pair() {
    let ctx = degenerate_ctx();
    let grid = PanelGrid::new(1.0, 4, 16).unwrap();
    let roots = scan_eigenfrequencies(&ctx, 0.15, 0.8, 100).unwrap();
    let pairs = eigenfunction_from_root(&ctx, &grid, &roots[0]).unwrap();
    let (f1, f2) = (pairs[0].f(), pairs[1].f());
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let g1 = &f1 * c(0.3, -1.2) + &f2 * c(2.0, 0.5);
    let g2 = &f1 * c(-0.7, 0.1) + &f2 * c(0.4, 0.9);
    let f0 = |g: &CMat| g.column(0).into_owned();
    let (_, out) = orthonormalize(&grid, vec![f0(&g1), f0(&g2)], vec![g1, g2]).unwrap();
    for j in 0..2 {
        for k in 0..2 {
            let v = grid.inner_complex(&out[j], &out[k]);
            let target = if j == k { 1.0 } else { 0.0 };
            assert!((v - Complex64::new(target, 0.0)).norm() <= 1e-10);
        }
    }
    assert!(conjugate_overlap(&grid, &out) <= 1e-8);
    for f in &out {
        let (ode, boundary) = bvp_residuals(&ctx, &grid, roots[0].omega, f);
        assert!(ode <= 1e-6 && boundary <= 1e-6);
    }
    // a repeated function collapses
    let same = pairs[0].f();
    let err = orthonormalize(&grid, vec![f0(&same), f0(&same)], vec![same.clone(), same]).unwrap_err();
    assert_eq!(err, Error::RankCollapse);
}

#[test]
fn single_function_unchanged_up_to_phase() {
    let ctx = fixture();
    let grid = default_grid();
    let root = &scan_eigenfrequencies(&ctx, 0.3, 0.8, 50).unwrap()[0];
    let p = &eigenfunction_from_root(&ctx, &grid, root).unwrap()[0];
    let rotated = p.f() * Complex64::from_polar(1.0, 0.7);
    let (_, out) = orthonormalize(&grid, vec![p.f0.clone()], vec![rotated.clone()]).unwrap();
    assert!((&out[0] - rotated).norm() < 1e-12);
}

#[test]
fn basis_at_99_percent_capture() {
    let ctx = fixture();
    let grid = default_grid();
    let basis = build_basis(&ctx, &grid, &BasisConfig::default()).unwrap();
    assert_eq!(basis.len(), 3);
    assert!(basis.capture() >= 0.99);
    assert!(basis.hs_captured <= basis.hs_total);
    assert!(basis.gram_deviation() <= 1e-6);
    assert!(basis.mercer_residual <= basis.hs_total - basis.hs_captured + basis.quadrature_slack());
    let exact: f64 = exponential_kernel_frequencies(200).iter().map(|w| 2.0 * w * w).sum();
    assert!((basis.hs_total - exact).abs() < 1e-5 * exact);
}

#[test]
fn capture_unreachable_below_first_root() {
    let ctx = fixture();
    let cfg = BasisConfig {
        scan: ScanConfig { omega_min: 0.01, omega_max: Some(0.5), samples: 200 },
        capture_fraction: 0.99,
    };
    let err = build_basis(&ctx, &default_grid(), &cfg).unwrap_err();
    assert_eq!(err.code(), "CaptureUnreachable");
}

#[test]
fn nystrom_agrees_and_converges() {
    let ctx = fixture();
    let exact = exponential_kernel_frequencies(3);
    let coarse = nystrom_oracle(&ctx, &default_grid()).frequencies();
    let fine = nystrom_oracle(&ctx, &default_grid().refined()).frequencies();
    for k in 0..3 {
        let gap_c = (coarse[k] - exact[k]).abs() / exact[k];
        let gap_f = (fine[k] - exact[k]).abs() / exact[k];
        assert!(gap_c <= 5e-3);
        assert!(gap_f <= 0.5 * gap_c, "mode {k}: {gap_c:e} -> {gap_f:e}");
    }
}
