//! Reference systems: the one-mode fixture and random stable oscillators.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{block_j, rcond, Mat};
use crate::model::{build_system, OscillatorSpec};

/// `Θ = bJ`, `R = I₂`, `M = I₂`, `T = 1`, `θ = 0.5`.
///
/// This gives `A = 2bJ − 2I`, `B = 2bJ`, `℧ = 4bJ` and `P₀ = I`.
pub fn one_mode_fixture() -> OscillatorSpec {
    let i2 = Mat::identity(2, 2);
    OscillatorSpec::new(block_j(), i2.clone(), i2, 1.0, 0.5).expect("fixture is valid")
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random matrix with reciprocal condition at least 0.1.
pub fn random_well_conditioned<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    loop {
        let s = Mat::identity(n, n) + gaussian_matrix(rng, n, n) * 0.3;
        if rcond(&s) >= 0.1 {
            return s;
        }
    }
}

/// Random antisymmetric matrix with reciprocal condition at least `1e-2`.
pub fn random_ccr<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    loop {
        let g = gaussian_matrix(rng, n, n);
        let theta = (&g - g.transpose()) * 0.5;
        if rcond(&theta) >= 1e-2 {
            return theta;
        }
    }
}

/// Random oscillator with Hurwitz drift, well-conditioned `℧` and full-rank
/// coupling, rescaled so the eigenvalues of `A` have real parts in
/// `[-3, -0.1]` and `‖A‖_F ≤ 25`.
pub fn random_spec<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, horizon: f64) -> OscillatorSpec {
    assert!(m >= n, "full-rank coupling needs m >= n");
    loop {
        let theta = random_ccr(rng, n);
        let y = gaussian_matrix(rng, n, n);
        let energy = &y * y.transpose() / n as f64 + Mat::identity(n, n) * 0.1;
        let coupling = gaussian_matrix(rng, m, n) / (n as f64).sqrt();
        let Ok(spec) = OscillatorSpec::new(theta, energy, coupling, horizon, 0.5) else {
            continue;
        };
        let Ok(sys) = build_system(&spec) else { continue };
        if !sys.hurwitz || sys.mho_rcond < 1e-2 {
            continue;
        }
        let slowest = -sys.abscissa;
        let fastest = -sys
            .a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min);
        let target = rng.random_range(1.0..3.0);
        let c = target / fastest;
        if slowest * c < 0.1 || sys.a.norm() * c > 25.0 {
            continue;
        }
        let scaled = OscillatorSpec {
            energy: &spec.energy * c,
            coupling: &spec.coupling * c.sqrt(),
            ..spec
        };
        if scaled.ensure_full_rank_coupling().is_err() {
            continue;
        }
        return scaled;
    }
}
