//! The solvability dichotomy: solve when the zero set of `Ŝ` has positive
//! first conformal eigenvalue, certify nonexistence when it is negative.

use super::{newton_core, variational_solve, Certificate, Equation, Method, SolveReport, Verdict};
use crate::error::Result;
use crate::functionals::{coercivity_witness, yamabe_q, ProblemPsc};
use crate::spectra::{lambda_min, tol_sign, Region};

/// Scales at which `F(s u)` is sampled along a nonexistence witness.
pub const WITNESS_SCALES: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub decay_window: Option<(f64, f64)>,
}

impl Default for TheoremOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            decay_window: None,
        }
    }
}

/// Zero set of the target curvature as a region; runs with fewer than three
/// nodes are dropped.
pub fn zero_region(prob: &ProblemPsc) -> Option<Region> {
    Region::from_mask(&prob.grid, &prob.zero_mask())
}

pub fn solve_theorem_a(prob: &ProblemPsc, opts: &TheoremOptions) -> Result<SolveReport> {
    let mut lambda_z = None;
    if let Some(z) = zero_region(prob) {
        let (lambda, ground) = lambda_min(prob, &z)?;
        lambda_z = Some(lambda);
        let band = tol_sign(prob);
        if lambda < -band {
            let f_values = coercivity_witness(prob, &ground, &WITNESS_SCALES)?;
            let certificate = Certificate {
                region: z.t_ranges(&prob.grid),
                lambda,
                yamabe_upper: yamabe_q(prob, &ground)?,
                scales: WITNESS_SCALES.to_vec(),
                f_values,
            };
            return Ok(SolveReport::without_solution(
                Method::Variational,
                Verdict::NoSolution {
                    certificate: Box::new(certificate),
                },
                lambda_z,
            ));
        }
        if lambda <= band {
            return Ok(SolveReport::without_solution(
                Method::Variational,
                Verdict::NotConverged {
                    reason: format!(
                        "lambda(Z) = {lambda:e} lies inside the dead band {band:e}; undecided"
                    ),
                },
                lambda_z,
            ));
        }
    }

    let var = variational_solve(prob, opts.max_iter, opts.tol)?;
    let eq = Equation::psc(prob);
    let start = var.excess.as_ref().expect("variational output").values().to_vec();
    let polish = newton_core(&eq, &start, 1.0, 50, opts.tol)?;
    let verdict = if polish.converged {
        Verdict::Solved
    } else {
        Verdict::NotConverged {
            reason: format!("residual {:e} after polishing", polish.residual_inf),
        }
    };
    let mut report = SolveReport::from_excess(
        &prob.grid,
        polish.e,
        polish.residual_inf,
        var.iterations + polish.iterations,
        Method::Variational,
        verdict,
        var.trace,
        opts.decay_window,
    );
    report.lambda_z = lambda_z;
    Ok(report)
}
