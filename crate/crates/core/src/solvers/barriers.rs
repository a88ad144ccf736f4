//! Barrier functions outside a compact set and the comparison principle.

use serde::{Deserialize, Serialize};

use super::SolveReport;
use crate::discretization::Field;
use crate::error::{Error, Result};
use crate::functionals::ProblemPsc;
use crate::spectra::lowest_eigenpair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barriers {
    /// Solves the linear equation on `[t_eps, T]` with values 0 and 1; set to
    /// 0 inside `t_eps`.
    pub phibar0: Field,
    /// Same with values 1 and 0; set to 1 inside `t_eps`.
    pub phibar1: Field,
    /// `lambda phibar0 - Lambda phibar1`.
    pub phi_minus: Field,
    pub big_lambda: f64,
    pub t_eps: f64,
    /// Lowest Rayleigh value of `c_n |du|^2 + (Scal - Ŝ) u^2` on `(t_eps, T)`.
    pub rayleigh: f64,
}

/// Solves `-c_n Lap(phi) + (Scal - Ŝ) phi = 0` on `[t_eps, T]` with
/// `t_eps = -ln(eps_boundary)` snapped to the nearest node, for both
/// Dirichlet data pairs, and picks `Lambda` as the smallest power of two
/// with `phi_minus <= cap`.
pub fn make_barriers(prob: &ProblemPsc, eps_boundary: f64, lambda_par: f64, cap: f64) -> Result<Barriers> {
    let grid = &prob.grid;
    let m = grid.m();
    if !(eps_boundary > 0.0 && eps_boundary < 1.0) {
        return Err(Error::InvalidParameter {
            name: "eps_boundary",
            reason: format!("must lie in (0, 1), got {eps_boundary}"),
        });
    }
    if !(lambda_par > 0.0 && lambda_par < 1.0) {
        return Err(Error::InvalidParameter {
            name: "lambda_par",
            reason: format!("must lie in (0, 1), got {lambda_par}"),
        });
    }
    let t_eps = -eps_boundary.ln();
    let k = grid.nearest(t_eps);
    if k == 0 || k + 4 > m {
        return Err(Error::InvalidParameter {
            name: "eps_boundary",
            reason: format!("t_eps = {t_eps} is not an interior node"),
        });
    }
    let pot: Vec<f64> = grid
        .scal()
        .iter()
        .zip(prob.target_scal.values())
        .map(|(s, sh)| s - sh)
        .collect();
    let (rayleigh, _) = lowest_eigenpair(grid, prob.c_n(), &pot, k + 1, m - 1)?;
    if !(rayleigh > 0.0) {
        return Err(Error::BarrierFailure { rayleigh });
    }
    let op = grid.assemble(prob.c_n(), &pot, k, m, true);
    let len = m - k + 1;
    let mut rhs = vec![0.0; len];
    rhs[len - 1] = 1.0;
    let b0 = op.solve(&rhs)?;
    rhs[len - 1] = 0.0;
    rhs[0] = 1.0;
    let b1 = op.solve(&rhs)?;
    let mut phibar0 = vec![0.0; m + 1];
    let mut phibar1 = vec![1.0; m + 1];
    phibar0[k..].copy_from_slice(&b0);
    phibar1[k..].copy_from_slice(&b1);

    let mut big_lambda = 1.0;
    let minus = |l: f64| -> Vec<f64> {
        phibar0
            .iter()
            .zip(&phibar1)
            .map(|(a, b)| lambda_par * a - l * b)
            .collect()
    };
    let mut phi_minus = minus(big_lambda);
    while phi_minus.iter().any(|&v| v > cap) {
        big_lambda *= 2.0;
        if big_lambda > 2f64.powi(60) {
            return Err(Error::Precondition(format!(
                "no Lambda brings the subsolution below cap = {cap}"
            )));
        }
        phi_minus = minus(big_lambda);
    }
    Ok(Barriers {
        phibar0: Field::new(phibar0),
        phibar1: Field::new(phibar1),
        phi_minus: Field::new(phi_minus),
        big_lambda,
        t_eps: grid.t(k),
        rayleigh,
    })
}

/// Whether `phi1 <= phi2 + tol_cmp` everywhere, for targets `Ŝ1 <= Ŝ2`.
pub fn comparison_check(
    prob1: &ProblemPsc,
    prob2: &ProblemPsc,
    phi1: &Field,
    phi2: &Field,
    tol_cmp: f64,
) -> Result<bool> {
    prob1.grid.check(phi1)?;
    prob2.grid.check(phi2)?;
    prob1.grid.check(&prob2.target_scal)?;
    for (i, (a, b)) in prob1
        .target_scal
        .values()
        .iter()
        .zip(prob2.target_scal.values())
        .enumerate()
    {
        if a > b {
            return Err(Error::Precondition(format!(
                "targets are not ordered at t = {}",
                prob1.grid.t(i)
            )));
        }
    }
    Ok(phi1
        .values()
        .iter()
        .zip(phi2.values())
        .all(|(a, b)| *a <= *b + tol_cmp))
}

/// [`comparison_check`] on two solved reports with `tol_cmp` ten times the
/// larger residual.
pub fn comparison_check_reports(
    prob1: &ProblemPsc,
    prob2: &ProblemPsc,
    r1: &SolveReport,
    r2: &SolveReport,
) -> Result<bool> {
    if !(r1.verdict.is_solved() && r2.verdict.is_solved()) {
        return Err(Error::Precondition("both reports must be Solved".into()));
    }
    let tol = 10.0 * r1.residual_inf.max(r2.residual_inf);
    comparison_check(prob1, prob2, r1.phi()?, r2.phi()?, tol)
}
