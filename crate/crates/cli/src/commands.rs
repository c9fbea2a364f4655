//! Subcommands: each runs one pipeline stage and writes its CSV files.

use std::path::{Path, PathBuf};

use qeflab_core::eigensolver::nystrom::nystrom_oracle;
use qeflab_core::fock::{build_pair, corner_error, rhs_average_checked, sigma_from_omega, verify_ode};
use qeflab_core::linalg::{frobenius, sym_eigenvalues};
use qeflab_core::{
    build_basis, build_qkl, build_system, compute_qef, recover_ccr, solve_state_ale, KernelContext, McOracle,
    PanelGrid, QefInputs, Route, SpectralBasis, Xi,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Cell, Table};

/// Relative PR residual accepted by `model-check`.
pub const PR_TOL: f64 = 1e-12;
/// Relative CCR round-trip error accepted by `model-check`.
pub const ROUNDTRIP_TOL: f64 = 1e-8;
/// Step of the central difference in the `fock` ODE residual.
pub const ODE_STEP: f64 = 1e-5;

/// Files written by a successful command.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

struct Spectral {
    ctx: KernelContext,
    grid: PanelGrid,
    basis: SpectralBasis,
}

fn spectral(cfg: &RunConfig) -> Result<Spectral, CliError> {
    let ctx = KernelContext::new(&cfg.spec()?)?;
    let grid = cfg.grid()?;
    let basis = build_basis(&ctx, &grid, &cfg.basis_config())?;
    Ok(Spectral { ctx, grid, basis })
}

fn qef_inputs(s: &Spectral) -> Result<QefInputs, CliError> {
    let state = solve_state_ale(&s.ctx.sys.a, &s.ctx.sys.b)?;
    Ok(QefInputs::new(&s.ctx, s.basis.clone(), Some(&state))?)
}

fn xi_cell(xi: Xi) -> Cell {
    match xi {
        Xi::Finite(v) => Cell::Num(v),
        Xi::Diverged => Cell::Text("diverged".into()),
    }
}

/// Builds the system, recovers `Θ` from `(A, ℧)` and solves for `P₀`.
pub fn cmd_model_check(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let sys = build_system(&spec)?;
    let mut table = Table::new(&["quantity", "value"]);
    let mut outcome = Outcome::default();
    let pr = sys.pr_residual / frobenius(&sys.mho).max(f64::MIN_POSITIVE);
    table.push(vec!["pr_relative_residual".into(), pr.into()]);
    table.push(vec!["spectral_abscissa".into(), sys.abscissa.into()]);
    table.push(vec!["mho_rcond".into(), sys.mho_rcond.into()]);

    let result = (|| -> Result<(), CliError> {
        let theta_hat = recover_ccr(&sys.a, &sys.mho)?;
        let roundtrip = frobenius(&(&theta_hat - &spec.ccr)) / frobenius(&spec.ccr);
        table.push(vec!["ccr_roundtrip_error".into(), roundtrip.into()]);
        let state = solve_state_ale(&sys.a, &sys.b)?;
        let ale = &sys.a * &state.p0 + &state.p0 * sys.a.transpose() + &sys.b * sys.b.transpose();
        let ale_rel = frobenius(&ale) / frobenius(&(&sys.b * sys.b.transpose())).max(f64::MIN_POSITIVE);
        table.push(vec!["ale_relative_residual".into(), ale_rel.into()]);
        let p_min = sym_eigenvalues(&state.p0).last().copied().unwrap_or(0.0);
        table.push(vec!["p0_min_eigenvalue".into(), p_min.into()]);
        if pr > PR_TOL {
            return Err(CliError::config("PrConditionViolated", format!("relative PR residual {pr:.3e}")));
        }
        if roundtrip > ROUNDTRIP_TOL {
            return Err(CliError::config("CcrRoundTripFailed", format!("relative error {roundtrip:.3e}")));
        }
        Ok(())
    })();
    outcome.files.push(table.write(out, "model.csv")?);
    result?;
    outcome.summary.push(format!(
        "model-check ok: PR residual {pr:.3e}, spectral abscissa {:.3e}",
        sys.abscissa
    ));
    Ok(outcome)
}

/// Shooting spectrum, the Nyström oracle and the basis Gram matrix.
pub fn cmd_eigen(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let s = spectral(cfg)?;
    let mut outcome = Outcome::default();

    let mut shooting = Table::new(&["k", "omega", "multiplicity", "bvp_residual"]);
    for (k, p) in s.basis.pairs.iter().enumerate() {
        shooting.push(vec![(k + 1).into(), p.omega.into(), p.multiplicity.into(), p.bvp_residual.into()]);
    }
    outcome.files.push(shooting.write(out, "eigen_shooting.csv")?);

    let freqs = nystrom_oracle(&s.ctx, &s.grid).frequencies();
    let mut nystrom = Table::new(&["k", "omega", "relative_difference"]);
    for (k, &w) in freqs.iter().enumerate() {
        let diff = match s.basis.pairs.get(k) {
            Some(p) => Cell::Num((w - p.omega).abs() / p.omega),
            None => Cell::Empty,
        };
        nystrom.push(vec![(k + 1).into(), w.into(), diff]);
    }
    outcome.files.push(nystrom.write(out, "eigen_nystrom.csv")?);

    let gram = s.basis.gram();
    let mut table = Table::new(&["i", "j", "value"]);
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            table.push(vec![(i + 1).into(), (j + 1).into(), gram[(i, j)].into()]);
        }
    }
    outcome.files.push(table.write(out, "basis_gram.csv")?);
    outcome.summary.push(format!(
        "eigen ok: {} modes, capture {:.6}, Gram deviation {:.3e}",
        s.basis.len(),
        s.basis.capture(),
        s.basis.gram_deviation()
    ));
    Ok(outcome)
}

/// Closed-form QEF for every `θ` in the list; diverged values are results.
pub fn cmd_qef(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let s = spectral(cfg)?;
    let inputs = qef_inputs(&s)?;
    let mut table = Table::new(&["theta", "C", "tail_C", "spectral_radius", "theta_critical", "xi", "xi_classical"]);
    for &theta in &cfg.qef.theta_list {
        let r = compute_qef(&inputs, theta)?;
        table.push(vec![
            theta.into(),
            r.c.into(),
            r.tail_c.into(),
            r.spectral_radius.into(),
            r.theta_critical.into(),
            xi_cell(r.xi),
            xi_cell(r.xi_classical),
        ]);
    }
    let mut outcome = Outcome::default();
    outcome.files.push(table.write(out, "qef.csv")?);
    let star = inputs.critical_theta()?;
    outcome.summary.push(format!(
        "qef ok: {} values, self-consistent critical theta {}",
        table.len(),
        star.map_or("inf".to_string(), |v| format!("{v:.6e}"))
    ));
    Ok(outcome)
}

/// Both Monte-Carlo routes against the closed form at every subcritical `θ`.
pub fn cmd_validate(cfg: &RunConfig, out: &Path, seed: Option<u64>) -> Result<Outcome, CliError> {
    let s = spectral(cfg)?;
    let inputs = qef_inputs(&s)?;
    let mc = cfg.mc_config(seed);
    let oracle = McOracle::new(&inputs)?;
    let mut table =
        Table::new(&["theta", "estimator", "mean", "stderr", "n_eff", "diverged_fraction", "seed"]);
    let mut failures = Vec::new();
    let mut outcome = Outcome::default();
    for &theta in &cfg.qef.theta_list {
        let report = compute_qef(&inputs, theta)?;
        let Xi::Finite(xi) = report.xi else {
            outcome.summary.push(format!("theta {theta:.6e} is supercritical, skipped"));
            continue;
        };
        table.push(vec![theta.into(), "closed_form".into(), xi.into(), 0.0.into(), Cell::Empty, Cell::Empty, Cell::Empty]);
        let qkl = build_qkl(s.basis.clone(), theta)?;
        for route in [Route::Z, Route::N] {
            let est = oracle.estimate(&qkl, &mc, route)?;
            table.push(vec![
                theta.into(),
                route.name().into(),
                est.mean.into(),
                est.stderr.into(),
                est.n_eff.into(),
                est.diverged_fraction.into(),
                mc.seed.into(),
            ]);
            if est.unreliable {
                outcome.summary.push(format!(
                    "theta {theta:.6e}, route {}: heavy-tailed, reported without a verdict",
                    route.name()
                ));
                continue;
            }
            // exact agreement at θ = 0 leaves no sampling error to compare against
            if (est.mean - xi).abs() > 3.0 * est.stderr + 1e-12 * xi {
                failures.push(format!(
                    "theta {theta:.6e}, route {}: {:.6e} ± {:.3e} vs {xi:.6e}",
                    route.name(),
                    est.mean,
                    est.stderr
                ));
            }
        }
    }
    outcome.files.push(table.write(out, "mc.csv")?);
    if !failures.is_empty() {
        return Err(CliError::mismatch("StatisticalMismatch", failures.join("; ")));
    }
    outcome.summary.push("validate ok: every reliable subcritical estimate within 3 standard errors".into());
    Ok(outcome)
}

/// Truncated Fock-space check of the Gaussian randomization identity.
pub fn cmd_fock(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let f = &cfg.fock;
    let pair = build_pair(f.n)?;
    let mut table = Table::new(&["N", "omega", "quad_order", "corner_error", "ode_residual"]);
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for &omega in &f.omega_list {
        rhs_average_checked(&pair, omega, f.quad_order, f.tolerance)?;
        let err = corner_error(&pair, omega, f.quad_order)?;
        let sigma = sigma_from_omega(omega);
        let ode = verify_ode(&pair, &[sigma], ODE_STEP, f.quad_order)?.max_residual;
        rows.push(vec![f.n.into(), omega.into(), f.quad_order.into(), err.into(), ode.into()]);
        if err > f.tolerance {
            failures.push(format!("omega {omega}: corner error {err:.3e}"));
        }
    }
    for row in rows {
        table.push(row);
    }
    let mut outcome = Outcome::default();
    outcome.files.push(table.write(out, "fock.csv")?);
    if !failures.is_empty() {
        return Err(CliError::mismatch("IdentityMismatch", failures.join("; ")));
    }
    outcome.summary.push(format!("fock ok: {} values of omega within {:e}", f.omega_list.len(), f.tolerance));
    Ok(outcome)
}
