//! Solvers for the prescribed scalar curvature equation
//! `-c_n Lap(phi) + Scal phi - Ŝ phi^{N-1} = 0`, `phi(T) = 1`.
//!
//! All iterations run on the excess `e = phi - 1`, which keeps the far-field
//! tail (of size `e^{-n t}`) representable to full relative precision.

mod barriers;
mod monotone;
mod newton;
mod theorem;
mod variational;

pub use barriers::{comparison_check, comparison_check_reports, make_barriers, Barriers};
pub use monotone::{monotone_solve, MonotoneOptions};
pub use newton::newton_solve;
pub use theorem::{solve_theorem_a, zero_region, TheoremOptions, WITNESS_SCALES};
pub use variational::variational_solve;

pub(crate) use monotone::monotone_core;
pub(crate) use newton::newton_core;
pub(crate) use check_positive as check_positive_field;

use serde::{Deserialize, Serialize};

use crate::discretization::{decay_fit, laplacian_apply, DecayFit, Field, Grid};
use crate::error::{Error, Result};
use crate::functionals::{pow_m1, ProblemPsc};
use crate::geometry::Geometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Monotone,
    Newton,
    Variational,
}

/// Evidence that no solution exists: a region inside the zero set whose
/// conformal form takes negative values, and `F(s u)` along the witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Witness region in `t` units.
    pub region: Vec<(f64, f64)>,
    pub lambda: f64,
    /// Yamabe quotient of the witness, an upper bound on `Y_g(Z)`.
    pub yamabe_upper: f64,
    pub scales: Vec<f64>,
    pub f_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum Verdict {
    Solved,
    NoSolution { certificate: Box<Certificate> },
    NotConverged { reason: String },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Solved => "Solved",
            Verdict::NoSolution { .. } => "NoSolution",
            Verdict::NotConverged { .. } => "NotConverged",
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, Verdict::Solved)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// `phi`; absent when no solution was produced.
    pub solution: Option<Field>,
    /// `phi - 1`, carried separately because it is accurate far out.
    pub excess: Option<Field>,
    pub residual_inf: f64,
    pub iterations: usize,
    pub method: Method,
    pub decay: Option<DecayFit>,
    pub verdict: Verdict,
    /// `(min phi, max phi)`.
    pub bounds: Option<(f64, f64)>,
    /// Per-iteration diagnostic: largest nodewise increase (monotone),
    /// residual norm (Newton) or functional value (variational).
    pub trace: Vec<f64>,
    /// `lambda_g(Z)` when the zero set was examined; `None` if it was empty
    /// or not computed.
    pub lambda_z: Option<f64>,
}

impl SolveReport {
    pub(crate) fn from_excess(
        grid: &Grid,
        excess: Vec<f64>,
        residual_inf: f64,
        iterations: usize,
        method: Method,
        verdict: Verdict,
        trace: Vec<f64>,
        window: Option<(f64, f64)>,
    ) -> Self {
        let phi: Vec<f64> = excess.iter().map(|e| 1.0 + e).collect();
        let bounds = (
            phi.iter().copied().fold(f64::INFINITY, f64::min),
            phi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        let excess = Field::new(excess);
        let decay = fit_excess(grid, &excess, window);
        Self {
            solution: Some(Field::new(phi)),
            excess: Some(excess),
            residual_inf,
            iterations,
            method,
            decay,
            verdict,
            bounds: Some(bounds),
            trace,
            lambda_z: None,
        }
    }

    pub(crate) fn without_solution(method: Method, verdict: Verdict, lambda_z: Option<f64>) -> Self {
        Self {
            solution: None,
            excess: None,
            residual_inf: f64::NAN,
            iterations: 0,
            method,
            decay: None,
            verdict,
            bounds: None,
            trace: Vec::new(),
            lambda_z,
        }
    }

    /// The solution, or a precondition error for reports without one.
    pub fn phi(&self) -> Result<&Field> {
        self.solution
            .as_ref()
            .ok_or_else(|| Error::Precondition("report carries no solution".into()))
    }
}

/// Default decay window `[T/2, T-2]`.
pub fn default_decay_window(grid: &Grid) -> (f64, f64) {
    (0.5 * grid.t_max(), grid.t_max() - 2.0)
}

/// Decay rate of `|phi - 1|`; `None` when the excess vanishes identically or
/// the window is unusable.
pub fn fit_excess(grid: &Grid, excess: &Field, window: Option<(f64, f64)>) -> Option<DecayFit> {
    if excess.values()[..grid.m()].iter().all(|&e| e == 0.0) {
        return None;
    }
    let (lo, hi) = window.unwrap_or_else(|| default_decay_window(grid));
    let floored = excess.map(|e| e.abs().max(1e-300));
    decay_fit(grid, &floored, lo, hi).ok()
}

/// `f(x, phi) = sum_k a_k(x) phi^{lambda_k}`, evaluated at `phi = 1 + e`.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    terms: Vec<(Vec<f64>, f64)>,
    base: Vec<f64>,
}

impl Nonlinearity {
    pub fn new(terms: Vec<(Vec<f64>, f64)>) -> Self {
        let len = terms.first().map_or(0, |t| t.0.len());
        let mut base = vec![0.0; len];
        for (a, _) in &terms {
            for (b, x) in base.iter_mut().zip(a) {
                *b += x;
            }
        }
        Self { terms, base }
    }

    /// `Scal phi - Ŝ phi^{N-1}`.
    pub fn psc(prob: &ProblemPsc) -> Self {
        let neg: Vec<f64> = prob.target_scal.values().iter().map(|s| -s).collect();
        Self::new(vec![
            (prob.grid.scal().to_vec(), 1.0),
            (neg, prob.crit_exp() - 1.0),
        ])
    }

    pub fn terms(&self) -> &[(Vec<f64>, f64)] {
        &self.terms
    }

    pub fn value(&self, i: usize, e: f64) -> f64 {
        let mut v = self.base[i];
        for (a, l) in &self.terms {
            if a[i] != 0.0 {
                v += a[i] * pow_m1(e, *l);
            }
        }
        v
    }

    pub fn derivative(&self, i: usize, e: f64) -> f64 {
        let phi = 1.0 + e;
        self.terms
            .iter()
            .map(|(a, l)| if a[i] == 0.0 { 0.0 } else { a[i] * l * phi.powf(l - 1.0) })
            .sum()
    }

    /// Nodewise bound on `df/dphi` over `[sub, sup]`, scaled by
    /// `1 + margin`.
    pub fn omega(&self, sub: &[f64], sup: &[f64], margin: f64) -> Result<Vec<f64>> {
        (0..sub.len())
            .map(|i| {
                let mut w = 0.0;
                for (a, l) in &self.terms {
                    if a[i] == 0.0 {
                        continue;
                    }
                    let at = if *l >= 1.0 { 1.0 + sup[i] } else { 1.0 + sub[i] };
                    if !(at > 0.0) {
                        return Err(Error::Precondition(format!(
                            "negative-exponent term needs a positive subsolution at node {i}"
                        )));
                    }
                    w += (l * a[i]).abs() * at.powf(l - 1.0);
                }
                Ok((1.0 + margin) * w)
            })
            .collect()
    }
}

/// Discrete equation `-c Lap(phi) + f(phi) = 0` with `phi(T) = 1`.
#[derive(Debug, Clone)]
pub struct Equation<'a> {
    pub grid: &'a Grid,
    pub geom: &'a Geometry,
    pub nl: Nonlinearity,
}

impl<'a> Equation<'a> {
    pub fn psc(prob: &'a ProblemPsc) -> Self {
        Self {
            grid: &prob.grid,
            geom: &prob.geom,
            nl: Nonlinearity::psc(prob),
        }
    }

    pub fn c(&self) -> f64 {
        self.geom.conf_coeff()
    }

    /// Residual in excess variables; the last row is `e(T)`.
    pub fn residual(&self, e: &[f64]) -> Vec<f64> {
        let lap = laplacian_apply(self.grid, self.geom, &Field::new(e.to_vec()))
            .expect("sizes match")
            .into_values();
        let c = self.c();
        let m = self.grid.m();
        let mut r: Vec<f64> = (0..m).map(|i| -c * lap[i] + self.nl.value(i, e[i])).collect();
        r.push(e[m]);
        r
    }

    pub fn residual_inf(&self, e: &[f64]) -> f64 {
        inf_norm(&self.residual(e))
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub(crate) fn check_positive(grid: &Grid, phi: &Field) -> Result<()> {
    grid.check(phi)?;
    for (i, &v) in phi.values().iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositive {
                node: i,
                t: grid.t(i),
                value: v,
            });
        }
    }
    Ok(())
}

pub(crate) fn excess_of(phi: &Field) -> Vec<f64> {
    phi.values().iter().map(|p| p - 1.0).collect()
}

/// Nodewise residual of the prescribed curvature equation. The last entry
/// is the boundary defect `phi(T) - 1`.
pub fn psc_residual(prob: &ProblemPsc, phi: &Field) -> Result<Field> {
    check_positive(&prob.grid, phi)?;
    Ok(Field::new(Equation::psc(prob).residual(&excess_of(phi))))
}

/// Constant sub- and supersolution pair, available when `Ŝ < 0` and
/// `Scal < 0` everywhere.
pub fn constant_bounds(prob: &ProblemPsc) -> Result<(Field, Field)> {
    let expo = 1.0 / (prob.crit_exp() - 2.0);
    let mut lo: f64 = 1.0;
    let mut hi: f64 = 1.0;
    for (i, (&s, &sh)) in prob
        .grid
        .scal()
        .iter()
        .zip(prob.target_scal.values())
        .enumerate()
    {
        if !(s < 0.0 && sh < 0.0) {
            return Err(Error::Precondition(format!(
                "constant barriers need Scal < 0 and Ŝ < 0, violated at t = {}",
                prob.grid.t(i)
            )));
        }
        let c = (s / sh).powf(expo);
        lo = lo.min(c);
        hi = hi.max(c);
    }
    Ok((
        Field::constant(&prob.grid, lo),
        Field::constant(&prob.grid, hi),
    ))
}
