//! Minimization of `F` by preconditioned gradient descent.

use super::{inf_norm, Equation, Method, Nonlinearity, SolveReport, Verdict};
use crate::error::Result;
use crate::functionals::{f_delta, f_grad_raw, ProblemPsc};

/// Descends `F` from `u = 0` and returns `phi = |1 + u|`. The step is a
/// gradient step in the metric `c_n K + diag(q d)`, with `d` the positive
/// part (floored at one) of the pointwise second derivative of the
/// potential, refreshed at every iterate. `tol` bounds the normalized
/// Euler-Lagrange residual `F_grad / (2 q)`.
pub fn variational_solve(prob: &ProblemPsc, max_iter: usize, tol: f64) -> Result<SolveReport> {
    let grid = &prob.grid;
    let m = grid.m();
    let n_exp = prob.crit_exp();
    let q = grid.quad_w();
    let tilde = prob.tilde_scal.values();
    let target = prob.target_scal.values();

    let mut u = vec![0.0; m + 1];
    let mut f_value = 0.0;
    let mut trace = vec![f_value];
    let mut iterations = 0;
    let mut stall = None;
    let normalized = |g: &[f64]| -> Vec<f64> {
        let mut r: Vec<f64> = (0..m).map(|i| g[i] / (2.0 * q[i])).collect();
        r.push(0.0);
        r
    };
    loop {
        let g = f_grad_raw(prob, &u);
        let r = normalized(&g);
        if inf_norm(&r) <= tol || iterations >= max_iter {
            break;
        }
        iterations += 1;
        let d: Vec<f64> = (0..=m)
            .map(|i| {
                let p = (1.0 + u[i]).abs();
                (tilde[i] - (n_exp - 1.0) * target[i] * p.powf(n_exp - 2.0)).max(1.0)
            })
            .collect();
        let op = grid.assemble_full(prob.c_n(), &d);
        let s: Vec<f64> = op.solve(&r)?.into_iter().map(|x| -x).collect();
        let slope: f64 = g.iter().zip(&s).map(|(a, b)| a * b).sum();
        let mut alpha = 1.0;
        let accepted = loop {
            let step: Vec<f64> = s.iter().map(|x| alpha * x).collect();
            let df = f_delta(prob, &u, &step);
            if df <= 1e-4 * alpha * slope {
                break Some((step, df));
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                break None;
            }
        };
        match accepted {
            Some((step, df)) => {
                u.iter_mut().zip(&step).for_each(|(a, b)| *a += b);
                f_value += df;
                trace.push(f_value);
            }
            None => {
                stall = Some(f_value);
                break;
            }
        }
    }
    // |1 + u| has the same F and is a non-negative candidate
    let e: Vec<f64> = u
        .iter()
        .map(|&x| if x >= -1.0 { x } else { -2.0 - x })
        .collect();
    let neg: Vec<f64> = target.iter().map(|s| -s).collect();
    let eq = Equation {
        grid,
        geom: &prob.geom,
        nl: Nonlinearity::new(vec![(tilde.to_vec(), 1.0), (neg, n_exp - 1.0)]),
    };
    let residual_inf = eq.residual_inf(&e);
    let verdict = if residual_inf <= tol {
        Verdict::Solved
    } else {
        Verdict::NotConverged {
            reason: match stall {
                Some(f) => format!("line search stalled at F = {f:e}, residual {residual_inf:e}"),
                None => format!("residual {residual_inf:e} after {iterations} descent steps"),
            },
        }
    };
    Ok(SolveReport::from_excess(
        grid,
        e,
        residual_inf,
        iterations,
        Method::Variational,
        verdict,
        trace,
        None,
    ))
}
