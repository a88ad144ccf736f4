//! Damped Newton iteration with a positivity-preserving line search.

use super::{check_positive, excess_of, inf_norm, Equation, Method, SolveReport, Verdict};
use crate::discretization::Field;
use crate::error::{Error, Result};
use crate::functionals::ProblemPsc;

pub(crate) struct NewtonOut {
    pub e: Vec<f64>,
    pub iterations: usize,
    pub residual_inf: f64,
    /// Residual max-norm before each step and after the last one.
    pub trace: Vec<f64>,
    pub converged: bool,
}

pub(crate) fn newton_core(
    eq: &Equation<'_>,
    init: &[f64],
    damping: f64,
    max_iter: usize,
    tol: f64,
) -> Result<NewtonOut> {
    let grid = eq.grid;
    let m = grid.m();
    let mut e = init.to_vec();
    let mut r = eq.residual(&e);
    let mut rn = inf_norm(&r);
    let mut trace = vec![rn];
    let mut iterations = 0;
    let step = |e: &[f64], r: &[f64]| -> Result<Vec<f64>> {
        let diag: Vec<f64> = (0..=m).map(|i| eq.nl.derivative(i, e[i])).collect();
        let jac = grid.assemble_full(eq.c(), &diag);
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        jac.solve(&rhs)
    };
    while rn > tol && iterations < max_iter {
        iterations += 1;
        let d = step(&e, &r)?;
        let mut alpha = damping.clamp(1e-12, 1.0);
        let mut positivity_failed = false;
        loop {
            if alpha < 1e-12 {
                if positivity_failed {
                    return Err(Error::PositivityLost { step: alpha });
                }
                return Ok(NewtonOut {
                    e,
                    iterations,
                    residual_inf: rn,
                    trace,
                    converged: false,
                });
            }
            let trial: Vec<f64> = e.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            if trial.iter().any(|x| !(1.0 + x > 0.0)) {
                positivity_failed = true;
                alpha *= 0.5;
                continue;
            }
            positivity_failed = false;
            let rt = eq.residual(&trial);
            let rtn = inf_norm(&rt);
            if rtn <= (1.0 - 1e-4 * alpha) * rn || rtn <= tol {
                e = trial;
                r = rt;
                rn = rtn;
                trace.push(rn);
                break;
            }
            alpha *= 0.5;
        }
    }
    if rn <= tol && rn > 0.0 {
        // one extra full step to squeeze out the remaining round-off
        let d = step(&e, &r)?;
        let trial: Vec<f64> = e.iter().zip(&d).map(|(a, b)| a + b).collect();
        if trial.iter().all(|x| 1.0 + x > 0.0) {
            let rtn = eq.residual_inf(&trial);
            if rtn <= rn {
                e = trial;
                rn = rtn;
                trace.push(rn);
            }
        }
    }
    Ok(NewtonOut {
        converged: rn <= tol,
        e,
        iterations,
        residual_inf: rn,
        trace,
    })
}

/// Newton's method from a positive initial guess. `damping` caps the first
/// trial step length.
pub fn newton_solve(
    prob: &ProblemPsc,
    init: &Field,
    damping: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SolveReport> {
    check_positive(&prob.grid, init)?;
    let eq = Equation::psc(prob);
    let out = newton_core(&eq, &excess_of(init), damping, max_iter, tol)?;
    let verdict = if out.converged {
        Verdict::Solved
    } else {
        Verdict::NotConverged {
            reason: format!(
                "residual {:e} after {} Newton steps",
                out.residual_inf, out.iterations
            ),
        }
    };
    Ok(SolveReport::from_excess(
        &prob.grid,
        out.e,
        out.residual_inf,
        out.iterations,
        Method::Newton,
        verdict,
        out.trace,
        None,
    ))
}
