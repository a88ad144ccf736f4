//! Monotone sub/supersolution iteration
//! `(-c Lap + omega) phi_{k+1} = omega phi_k - f(phi_k)`, started from the
//! supersolution.

use super::{check_positive, excess_of, Equation, Method, SolveReport, Verdict};
use crate::discretization::Field;
use crate::error::{Error, Result};
use crate::functionals::ProblemPsc;

/// Violations of the ordering up to this size are treated as round-off and
/// clamped; anything larger is a breach.
const ROUNDOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneOptions {
    pub omega_margin: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for MonotoneOptions {
    fn default() -> Self {
        Self {
            omega_margin: 0.1,
            max_iter: 20_000,
            tol: 1e-10,
        }
    }
}

pub(crate) struct MonotoneOut {
    pub e: Vec<f64>,
    pub iterations: usize,
    pub residual_inf: f64,
    /// Largest nodewise increase `max(e_{k+1} - e_k)` before clamping.
    pub trace: Vec<f64>,
    pub converged: bool,
}

pub(crate) fn monotone_core(
    eq: &Equation<'_>,
    sub: &[f64],
    sup: &[f64],
    opts: &MonotoneOptions,
) -> Result<MonotoneOut> {
    let grid = eq.grid;
    let m = grid.m();
    for i in 0..=m {
        if sub[i] > sup[i] {
            return Err(Error::Precondition(format!(
                "subsolution exceeds supersolution at t = {}",
                grid.t(i)
            )));
        }
        if !(1.0 + sup[i] > 0.0) {
            return Err(Error::NonPositive {
                node: i,
                t: grid.t(i),
                value: 1.0 + sup[i],
            });
        }
    }
    let slack = 10.0 * opts.tol;
    let r_sup = eq.residual(sup);
    if let Some(i) = (0..=m).find(|&i| r_sup[i] < -slack) {
        return Err(Error::Precondition(format!(
            "supersolution residual {} < 0 at t = {}",
            r_sup[i],
            grid.t(i)
        )));
    }
    let positive_sub: Vec<f64> = sub.iter().map(|&s| if 1.0 + s > 0.0 { s } else { 0.0 }).collect();
    let r_sub = eq.residual(&positive_sub);
    if let Some(i) = (0..=m).find(|&i| 1.0 + sub[i] > 0.0 && r_sub[i] > slack) {
        return Err(Error::Precondition(format!(
            "subsolution residual {} > 0 at t = {}",
            r_sub[i],
            grid.t(i)
        )));
    }

    let omega = eq.nl.omega(sub, sup, opts.omega_margin)?;
    let op = grid.assemble_full(eq.c(), &omega);
    let mut e = sup.to_vec();
    let mut residual_inf = super::inf_norm(&r_sup);
    let mut trace = Vec::new();
    let mut iterations = 0;
    while residual_inf > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let mut rhs: Vec<f64> = (0..m).map(|i| omega[i] * e[i] - eq.nl.value(i, e[i])).collect();
        rhs.push(0.0);
        let mut next = op.solve(&rhs)?;
        let mut increase = f64::NEG_INFINITY;
        for i in 0..=m {
            let up = next[i] - e[i];
            increase = increase.max(up);
            if up > 0.0 {
                if up > ROUNDOFF {
                    return Err(Error::MonotonicityBreach {
                        iteration: iterations,
                        node: i,
                        detail: format!("iterate increased by {up:e}"),
                    });
                }
                next[i] = e[i];
            }
            let below = sub[i] - next[i];
            if below > 0.0 {
                if below > ROUNDOFF {
                    return Err(Error::MonotonicityBreach {
                        iteration: iterations,
                        node: i,
                        detail: format!("iterate fell {below:e} below the subsolution"),
                    });
                }
                next[i] = sub[i];
            }
        }
        trace.push(increase);
        let stalled = next == e;
        e = next;
        residual_inf = eq.residual_inf(&e);
        if stalled {
            break;
        }
    }
    Ok(MonotoneOut {
        converged: residual_inf <= opts.tol,
        e,
        iterations,
        residual_inf,
        trace,
    })
}

/// Decreasing iteration from `sup`, kept inside `[sub, sup]`. Only the
/// nodes where `sub > 0` are checked for the subsolution inequality.
pub fn monotone_solve(
    prob: &ProblemPsc,
    sub: &Field,
    sup: &Field,
    opts: &MonotoneOptions,
) -> Result<SolveReport> {
    prob.grid.check(sub)?;
    check_positive(&prob.grid, sup)?;
    let eq = Equation::psc(prob);
    let out = monotone_core(&eq, &excess_of(sub), &excess_of(sup), opts)?;
    let verdict = if out.converged {
        Verdict::Solved
    } else {
        Verdict::NotConverged {
            reason: format!(
                "residual {:e} after {} iterations",
                out.residual_inf, out.iterations
            ),
        }
    };
    Ok(SolveReport::from_excess(
        &prob.grid,
        out.e,
        out.residual_inf,
        out.iterations,
        Method::Monotone,
        verdict,
        out.trace,
        None,
    ))
}
