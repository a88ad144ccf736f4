//! Building core problems from a config and running them.

use std::path::Path;
use std::sync::Arc;

use cclab_core::functionals::ProblemPsc;
use cclab_core::geometry::make_hyperbolic;
use cclab_core::lichnerowicz::{lich_solve, reduce_to_psc};
use cclab_core::solvers::{
    constant_bounds, default_decay_window, fit_excess, monotone_solve, newton_solve, solve_theorem_a,
    variational_solve, zero_region, MonotoneOptions, TheoremOptions,
};
use cclab_core::spectra::{lambda_min, sign_agreement, tol_sign, yamabe_min};
use cclab_core::{Error, Field, Geometry, Grid, LichData, Region, SolveReport, Verdict};
use serde_json::{json, Value};

use crate::config::{MethodChoice, Profile, ProblemConfig, ScenarioConfig};
use crate::expr::{parse, Expr};
use crate::CliError;

pub enum Problem {
    Psc(ProblemPsc),
    Lich(LichData),
    Yamabe(ProblemPsc, Vec<Region>),
}

pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub geom: Geometry,
    pub grid: Grid,
    pub problem: Problem,
}

/// One row of a sweep index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexRow {
    pub verdict: String,
    pub residual: Option<f64>,
    pub decay: Option<f64>,
    pub lambda_z: Option<f64>,
}

pub struct Outcome {
    pub report: Value,
    pub fields: Vec<(String, Field)>,
    pub exit: i32,
    pub row: IndexRow,
}

/// Input errors map to config errors; anything raised inside an iteration
/// is numerical.
fn classify(e: Error) -> CliError {
    match e {
        Error::Precondition(_)
        | Error::InvalidParameter { .. }
        | Error::Region(_)
        | Error::Dimension(_)
        | Error::Parse { .. }
        | Error::Io(_)
        | Error::SizeMismatch { .. }
        | Error::NonFinite { .. } => CliError::Config(e.to_string()),
        other => CliError::Numerical(other.to_string()),
    }
}

fn expr_of(cfg: &ScenarioConfig, p: &Profile, base: &Path, field: &str) -> Result<Expr, CliError> {
    let e = match p {
        Profile::Number(x) => Expr::Num(*x),
        Profile::Expr(s) => parse(s, &cfg.params, base)
            .map_err(|e| CliError::Config(format!("{field}: {e}")))?,
    };
    for tab in e.tables() {
        let (lo, hi) = (tab.t[0], tab.t[tab.t.len() - 1]);
        if lo > 1e-9 || hi < cfg.geometry.t_max - 1e-9 {
            return Err(CliError::Config(format!(
                "{field}: table {} covers [{lo}, {hi}], not [0, {}]",
                tab.path, cfg.geometry.t_max
            )));
        }
    }
    Ok(e)
}

fn sample(grid: &Grid, e: &Expr, field: &str) -> Result<Field, CliError> {
    let v = grid
        .nodes()
        .iter()
        .zip(grid.scal())
        .map(|(&t, &s)| e.eval(t, s))
        .collect();
    Field::try_new(v).map_err(|err| CliError::Config(format!("{field}: {err}")))
}

pub fn build(cfg: ScenarioConfig, base: &Path) -> Result<Scenario, CliError> {
    let g = &cfg.geometry;
    let mut geom = make_hyperbolic(g.n, g.t_max).map_err(classify)?;
    if let Some(p) = &g.scal_perturbation {
        let e = expr_of(&cfg, p, base, "geometry.scal_perturbation")?;
        if e.uses_scal() {
            return Err(CliError::Config(
                "geometry.scal_perturbation: `scal` is not available here".into(),
            ));
        }
        geom = geom.with_scal_perturbation(Arc::new(move |t| e.eval(t, 0.0)));
    }
    let grid = Grid::new(&geom, g.m).map_err(classify)?;
    let problem = match &cfg.problem {
        ProblemConfig::Psc(p) => {
            let e = expr_of(&cfg, &p.target_scal, base, "problem.psc.target_scal")?;
            let target = sample(&grid, &e, "problem.psc.target_scal")?;
            let mut prob = ProblemPsc::new(geom.clone(), grid.clone(), target)
                .map_err(|e| CliError::Config(format!("problem.psc.target_scal: {e}")))?;
            if let Some(d) = p.delta {
                prob = prob.with_delta(d);
            }
            Problem::Psc(prob)
        }
        ProblemConfig::Lichnerowicz(l) => {
            let tau = sample(&grid, &expr_of(&cfg, &l.tau, base, "problem.lichnerowicz.tau")?, "problem.lichnerowicz.tau")?;
            let a = sample(&grid, &expr_of(&cfg, &l.a, base, "problem.lichnerowicz.a")?, "problem.lichnerowicz.a")?;
            let data = LichData::new(geom.clone(), grid.clone(), tau, a)
                .map_err(|e| CliError::Config(format!("problem.lichnerowicz: {e}")))?;
            Problem::Lich(data)
        }
        ProblemConfig::Yamabe(y) => {
            let prob = ProblemPsc::trivial(geom.clone(), grid.clone()).map_err(classify)?;
            let regions = y
                .regions
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    let pairs: Vec<(f64, f64)> = r.iter().map(|&[a, b]| (a, b)).collect();
                    Region::from_t_ranges(&grid, &pairs)
                        .map_err(|e| CliError::Config(format!("problem.yamabe.regions.{k}: {e}")))
                })
                .collect::<Result<_, _>>()?;
            Problem::Yamabe(prob, regions)
        }
    };
    Ok(Scenario { cfg, geom, grid, problem })
}

impl Scenario {
    /// The prescribed-curvature problem the spectral quantities refer to.
    fn psc(&self) -> Result<ProblemPsc, CliError> {
        match &self.problem {
            Problem::Psc(p) | Problem::Yamabe(p, _) => Ok(p.clone()),
            Problem::Lich(d) => reduce_to_psc(d).map_err(classify),
        }
    }

    fn window(&self) -> (f64, f64) {
        self.cfg
            .solver
            .decay_window
            .map(|[a, b]| (a, b))
            .unwrap_or_else(|| default_decay_window(&self.grid))
    }

    fn metadata(&self, prob: &ProblemPsc) -> Value {
        let n = self.geom.n();
        let s = &self.cfg.solver;
        let (w_lo, w_hi) = self.window();
        json!({
            "n": n,
            "t_max": self.grid.t_max(),
            "m": self.grid.m(),
            "h": self.grid.h(),
            "model_scal": self.geom.model_scal(),
            "conformal_coefficient": self.geom.conf_coeff(),
            "critical_exponent": self.geom.crit_exp(),
            "conventions": {
                "metric": "g = dt^2 + sinh^2(t) g_sphere, t in [0, t_max]",
                "angular_normalization": "volume density sinh^(n-1)(t); the sphere factor is normalized to 1, so integrals are per unit sphere",
                "defining_function": "rho = exp(-t)",
                "window_r": 1.0,
                "boundary": "phi'(0) = 0 by symmetry, phi(t_max) = 1",
                "unknown": "iterations run on e = phi - 1",
                "field_csv_columns": ["t", "value"],
            },
            "tolerances": {
                "tol": s.tol,
                "max_iter": s.max_iter(),
                "omega_margin": s.omega_margin,
                "tol_zero": prob.tol_zero(),
                "tol_sign": tol_sign(prob),
                "decay_window": [w_lo, w_hi],
                "yamabe_max_iter": 500,
                "yamabe_tol": 1e-12,
            },
        })
    }

    fn problem_name(&self) -> &'static str {
        match self.problem {
            Problem::Psc(_) => "psc",
            Problem::Lich(_) => "lichnerowicz",
            Problem::Yamabe(..) => "yamabe",
        }
    }

    fn envelope(&self, command: &str, prob: &ProblemPsc, result: Value) -> Value {
        json!({
            "schema_version": 1,
            "command": command,
            "problem": self.problem_name(),
            "config": self.cfg,
            "metadata": self.metadata(prob),
            "result": result,
        })
    }

    /// Solves the configured problem; `yamabe` problems run the spectral
    /// comparison instead.
    pub fn run(&self) -> Result<Outcome, CliError> {
        match &self.problem {
            Problem::Yamabe(p, regions) => self.yamabe_on(p, regions),
            _ => self.solve(),
        }
    }

    /// Spectral comparison on the configured regions, or on the zero set of
    /// the target curvature.
    pub fn yamabe(&self) -> Result<Outcome, CliError> {
        let prob = self.psc()?;
        let regions = match &self.problem {
            Problem::Yamabe(_, r) => r.clone(),
            _ => vec![zero_region(&prob).ok_or_else(|| {
                CliError::Config("target curvature has no zero set of three or more nodes".into())
            })?],
        };
        self.yamabe_on(&prob, &regions)
    }

    fn yamabe_on(&self, prob: &ProblemPsc, regions: &[Region]) -> Result<Outcome, CliError> {
        let mut results = Vec::new();
        let mut fields = Vec::new();
        let mut lowest = f64::INFINITY;
        for (k, r) in regions.iter().enumerate() {
            let sa = sign_agreement(prob, r).map_err(classify)?;
            let (_, ground) = lambda_min(prob, r).map_err(classify)?;
            let y = yamabe_min(prob, r, 500, 1e-12).map_err(classify)?;
            lowest = lowest.min(sa.lambda);
            results.push(json!({
                "region": r.t_ranges(&self.grid),
                "lambda": sa.lambda,
                "yamabe_upper": sa.yamabe,
                "sign_lambda": sa.sign_lambda,
                "sign_yamabe": sa.sign_yamabe,
                "agree": sa.agree,
                "yamabe_iterations": y.iterations,
                "yamabe_converged": y.converged,
                "fields": [format!("ground_{k}.csv"), format!("minimizer_{k}.csv")],
            }));
            fields.push((format!("ground_{k}.csv"), ground));
            fields.push((format!("minimizer_{k}.csv"), y.minimizer));
        }
        let result = json!({ "verdict": { "status": "computed" }, "regions": results });
        Ok(Outcome {
            report: self.envelope("yamabe", prob, result),
            fields,
            exit: 0,
            row: IndexRow {
                verdict: "computed".into(),
                residual: None,
                decay: None,
                lambda_z: Some(lowest),
            },
        })
    }

    fn solve(&self) -> Result<Outcome, CliError> {
        let s = &self.cfg.solver;
        let prob = self.psc()?;
        let mut extra = serde_json::Map::new();
        let mut fields = Vec::new();
        let attempt: Result<SolveReport, CliError> = match &self.problem {
            Problem::Lich(d) => lich_solve(d, s.max_iter(), s.tol).map_err(classify).map(|lr| {
                extra.insert("uniqueness_spread".into(), json!(lr.uniqueness_spread));
                if let (Some(lo), Some(hi)) = (lr.phi_tilde, lr.supersolution) {
                    // phi_tilde <= phi <= phi_tilde + u, as a single number.
                    let gap = lr.report.solution.as_ref().map(|phi| {
                        (0..phi.len()).fold(0.0_f64, |m, i| {
                            let (l, p, h) = (lo.values()[i], phi.values()[i], hi.values()[i]);
                            m.max(l - p).max(p - h)
                        })
                    });
                    extra.insert("sandwich_violation".into(), json!(gap));
                    fields.push(("phi_tilde.csv".to_string(), lo));
                    fields.push(("supersolution.csv".to_string(), hi));
                }
                lr.report
            }),
            _ => self.solve_psc(&prob),
        };
        let mut report = match attempt {
            Ok(r) => r,
            Err(CliError::Numerical(reason)) => {
                let result = json!({
                    "verdict": Verdict::NotConverged { reason },
                    "residual_inf": null,
                });
                return Ok(Outcome {
                    report: self.envelope("run", &prob, result),
                    fields: Vec::new(),
                    exit: 3,
                    row: IndexRow {
                        verdict: "NotConverged".into(),
                        residual: None,
                        decay: None,
                        lambda_z: None,
                    },
                });
            }
            Err(e) => return Err(e),
        };
        if report.lambda_z.is_none() {
            if let Some(z) = zero_region(&prob) {
                report.lambda_z = Some(lambda_min(&prob, &z).map_err(classify)?.0);
            }
        }
        if let Some(e) = &report.excess {
            report.decay = fit_excess(&self.grid, e, Some(self.window()));
        }
        let residual = report.solution.as_ref().map(|_| report.residual_inf);
        let mut names = Vec::new();
        if let (Some(phi), Some(e)) = (&report.solution, &report.excess) {
            fields.insert(0, ("excess.csv".to_string(), e.clone()));
            fields.insert(0, ("solution.csv".to_string(), phi.clone()));
        }
        for (name, _) in &fields {
            names.push(name.clone());
        }
        let mut result = serde_json::Map::new();
        result.insert("verdict".into(), json!(report.verdict));
        result.insert("method".into(), json!(report.method));
        result.insert("residual_inf".into(), json!(residual));
        result.insert("iterations".into(), json!(report.iterations));
        result.insert("decay".into(), json!(report.decay));
        result.insert("bounds".into(), json!(report.bounds));
        result.insert("lambda_z".into(), json!(report.lambda_z));
        result.insert("trace_len".into(), json!(report.trace.len()));
        result.extend(extra);
        result.insert("fields".into(), json!(names));
        let exit = match report.verdict {
            Verdict::Solved => 0,
            Verdict::NoSolution { .. } => 2,
            Verdict::NotConverged { .. } => 3,
        };
        Ok(Outcome {
            report: self.envelope("run", &prob, Value::Object(result)),
            fields,
            exit,
            row: IndexRow {
                verdict: report.verdict.name().to_string(),
                residual,
                decay: report.decay.map(|d| d.exponent),
                lambda_z: report.lambda_z,
            },
        })
    }

    fn solve_psc(&self, prob: &ProblemPsc) -> Result<SolveReport, CliError> {
        let s = &self.cfg.solver;
        let out = match s.method {
            MethodChoice::Auto => solve_theorem_a(
                prob,
                &TheoremOptions {
                    tol: s.tol,
                    max_iter: s.max_iter(),
                    decay_window: Some(self.window()),
                },
            ),
            MethodChoice::Monotone => {
                let (sub, sup) = constant_bounds(prob).map_err(classify)?;
                let opts = MonotoneOptions {
                    omega_margin: s.omega_margin,
                    max_iter: s.max_iter(),
                    tol: s.tol,
                };
                monotone_solve(prob, &sub, &sup, &opts)
            }
            MethodChoice::Newton => newton_solve(prob, &Field::constant(&self.grid, 1.0), 1.0, s.max_iter(), s.tol),
            MethodChoice::Variational => variational_solve(prob, s.max_iter(), s.tol),
        };
        out.map_err(classify)
    }
}
