//! The Lichnerowicz equation
//! `-c_n Lap(phi) + Scal phi + ((n-1)/n) tau^2 phi^{N-1} - A^2 phi^{-N-1} = 0`.
//!
//! Solvability is decided by the `A = 0` problem, which is a prescribed
//! curvature problem with `Ŝ = -((n-1)/n) tau^2`. Its solution `phi~` is a
//! subsolution and `phi~ + u`, with `u` solving a linearized equation, a
//! supersolution; the monotone iteration runs between them.

use serde::{Deserialize, Serialize};

use crate::discretization::{Field, Grid};
use crate::error::{Error, Result};
use crate::functionals::ProblemPsc;
use crate::geometry::Geometry;
use crate::solvers::{
    check_positive_field, monotone_core, newton_core, solve_theorem_a, Equation, Method, MonotoneOptions,
    Nonlinearity, SolveReport, TheoremOptions, Verdict,
};

#[derive(Debug, Clone)]
pub struct LichData {
    pub geom: Geometry,
    pub grid: Grid,
    /// Mean curvature, `tau >= 0`, `tau(T) = n`.
    pub tau: Field,
    /// Momentum amplitude `A >= 0`.
    pub a: Field,
}

impl LichData {
    pub fn new(geom: Geometry, grid: Grid, tau: Field, a: Field) -> Result<Self> {
        grid.check(&tau)?;
        grid.check(&a)?;
        for (name, f) in [("tau", &tau), ("A", &a)] {
            for (i, &v) in f.values().iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { node: i });
                }
                if v < 0.0 {
                    return Err(Error::Precondition(format!(
                        "{name} must be non-negative, got {v} at t = {}",
                        grid.t(i)
                    )));
                }
            }
        }
        let tail = tau.values()[grid.m()];
        if (tail - geom.dim()).abs() > 1e-8 {
            return Err(Error::Precondition(format!(
                "tau must tend to n at the outer boundary, got {tail}"
            )));
        }
        Ok(Self { geom, grid, tau, a })
    }

    /// `((n-1)/n) tau^2` at each node.
    pub fn kappa(&self) -> Vec<f64> {
        let nf = self.geom.dim();
        self.tau
            .values()
            .iter()
            .map(|t| ((nf - 1.0) * (t * t)) / nf)
            .collect()
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        let n_exp = self.geom.crit_exp();
        let a2: Vec<f64> = self.a.values().iter().map(|a| -(a * a)).collect();
        Nonlinearity::new(vec![
            (self.grid.scal().to_vec(), 1.0),
            (self.kappa(), n_exp - 1.0),
            (a2, -n_exp - 1.0),
        ])
    }

    fn equation(&self) -> Equation<'_> {
        Equation {
            grid: &self.grid,
            geom: &self.geom,
            nl: self.nonlinearity(),
        }
    }
}

pub fn lich_residual(data: &LichData, phi: &Field) -> Result<Field> {
    check_positive_field(&data.grid, phi)?;
    let e: Vec<f64> = phi.values().iter().map(|p| p - 1.0).collect();
    Ok(Field::new(data.equation().residual(&e)))
}

/// Prescribed curvature problem with `Ŝ = -((n-1)/n) tau^2`.
pub fn reduce_to_psc(data: &LichData) -> Result<ProblemPsc> {
    let target = Field::new(data.kappa().into_iter().map(|k| -k).collect());
    ProblemPsc::new(data.geom.clone(), data.grid.clone(), target)
}

/// Solves `-c_n Lap(u) + Scal u + (N-1) kappa phi~^{N-2} u = A^2 phi~^{-N-1}`
/// with `u(T) = 0`.
pub fn linear_supersolution(data: &LichData, phi_tilde: &Field) -> Result<Field> {
    check_positive_field(&data.grid, phi_tilde)?;
    let n_exp = data.geom.crit_exp();
    let kappa = data.kappa();
    let p = phi_tilde.values();
    let pot: Vec<f64> = (0..data.grid.len())
        .map(|i| data.grid.scal()[i] + (n_exp - 1.0) * kappa[i] * p[i].powf(n_exp - 2.0))
        .collect();
    let m = data.grid.m();
    let mut rhs: Vec<f64> = (0..m)
        .map(|i| {
            let a = data.a.values()[i];
            a * a * p[i].powf(-n_exp - 1.0)
        })
        .collect();
    rhs.push(0.0);
    let mut u = data.grid.assemble_full(data.geom.conf_coeff(), &pot).solve(&rhs)?;
    let scale = u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    for (i, v) in u.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -1e-12 * scale.max(1e-300) {
                return Err(Error::MaximumPrinciple { node: i, value: *v });
            }
            *v = 0.0;
        }
    }
    Ok(Field::new(u))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LichReport {
    pub report: SolveReport,
    /// Solution of the `A = 0` problem.
    pub phi_tilde: Option<Field>,
    /// `phi~ + u`.
    pub supersolution: Option<Field>,
    /// Largest max-norm distance between the solution and Newton runs from
    /// several positive starts; infinite if a start failed.
    pub uniqueness_spread: Option<f64>,
}

pub fn lich_solve(data: &LichData, max_iter: usize, tol: f64) -> Result<LichReport> {
    let psc = reduce_to_psc(data)?;
    let base = solve_theorem_a(
        &psc,
        &TheoremOptions {
            tol,
            max_iter,
            decay_window: None,
        },
    )?;
    if !base.verdict.is_solved() {
        return Ok(LichReport {
            report: base,
            phi_tilde: None,
            supersolution: None,
            uniqueness_spread: None,
        });
    }
    let e_tilde = base.excess.clone().expect("solved report").into_values();
    let phi_tilde = base.solution.clone().expect("solved report");
    let u = linear_supersolution(data, &phi_tilde)?;
    let sup: Vec<f64> = e_tilde.iter().zip(u.values()).map(|(a, b)| a + b).collect();

    let eq = data.equation();
    let out = monotone_core(
        &eq,
        &e_tilde,
        &sup,
        &MonotoneOptions {
            omega_margin: 0.1,
            max_iter: max_iter.max(20_000),
            tol,
        },
    )?;
    let verdict = if out.converged {
        Verdict::Solved
    } else {
        Verdict::NotConverged {
            reason: format!("residual {:e} after {} iterations", out.residual_inf, out.iterations),
        }
    };

    let uniqueness_spread = if out.converged {
        let mid: Vec<f64> = e_tilde.iter().zip(&sup).map(|(a, b)| 0.5 * (a + b)).collect();
        let big: Vec<f64> = sup.iter().map(|s| 1.5 * (1.0 + s) - 1.0).collect();
        let small: Vec<f64> = e_tilde.iter().map(|s| 0.5 * (1.0 + s) - 1.0).collect();
        let zero = vec![0.0; e_tilde.len()];
        let mut spread: f64 = 0.0;
        for start in [&e_tilde, &sup, &mid, &big, &small, &zero] {
            match newton_core(&eq, start, 1.0, 100, tol) {
                Ok(r) if r.converged => {
                    let d = r.e.iter().zip(&out.e).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
                    spread = spread.max(d);
                }
                _ => spread = f64::INFINITY,
            }
        }
        Some(spread)
    } else {
        None
    };

    let mut report = SolveReport::from_excess(
        &data.grid,
        out.e,
        out.residual_inf,
        out.iterations,
        Method::Monotone,
        verdict,
        out.trace,
        None,
    );
    report.lambda_z = base.lambda_z;
    Ok(LichReport {
        report,
        phi_tilde: Some(phi_tilde),
        supersolution: Some(Field::new(sup.iter().map(|s| 1.0 + s).collect())),
        uniqueness_spread,
    })
}
