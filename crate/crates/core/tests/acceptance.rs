//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are evaluated and reported like
//! the others, but a failure there does not fail the run (see README).

mod common;

use std::process::ExitCode;
use std::time::Instant;

use cclab_core::functionals::{f_eval, f_grad};
use cclab_core::lichnerowicz::{lich_solve, LichData};
use cclab_core::solvers::{
    comparison_check_reports, monotone_solve, newton_solve, solve_theorem_a, variational_solve,
    MonotoneOptions, TheoremOptions,
};
use cclab_core::spectra::{conformal_invariance_check, lambda_min, sign_agreement, Region};
use cclab_core::{Field, ProblemPsc, Verdict};
use common::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_UNATTAINABLE: &[usize] = &[3];

struct Outcome {
    pass: bool,
    detail: String,
    /// Maximal nodewise increase over all monotone steps, for criterion 10.
    traces: Vec<f64>,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome {
        pass,
        detail,
        traces: Vec::new(),
    }
}

fn max_trace(trace: &[f64]) -> f64 {
    trace.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn criterion1() -> Outcome {
    let start = Instant::now();
    let (g, grid) = hyperbolic(3, 20.0, 4000);
    let p = ProblemPsc::trivial(g, grid).unwrap();
    let one = Field::constant(&p.grid, 1.0);
    let mono = monotone_solve(&p, &Field::constant(&p.grid, 0.5), &one, &MonotoneOptions::default()).unwrap();
    let newton = newton_solve(&p, &one, 1.0, 20, 1e-12).unwrap();
    let var = variational_solve(&p, 100, 1e-12).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let traces = vec![max_trace(&mono.trace)];
    let mut pass = elapsed < 1.0;
    let mut worst: f64 = 0.0;
    for r in [&mono, &newton, &var] {
        let phi = r.solution.as_ref().unwrap();
        let dev = phi.values().iter().fold(0.0_f64, |a, v| a.max((v - 1.0).abs()));
        worst = worst.max(r.residual_inf);
        pass &= r.verdict.is_solved() && r.residual_inf <= 1e-12 && dev == 0.0;
    }
    Outcome {
        pass,
        detail: format!("max residual {worst:e}, phi == 1 bitwise, {elapsed:.3} s"),
        traces,
    }
}

fn criterion2() -> Outcome {
    let start = Instant::now();
    let mut errs = Vec::new();
    let mut traces = Vec::new();
    let mut agree = true;
    for m in [1000usize, 2000, 4000] {
        let mf = manufactured(3, 20.0, m);
        let sub = Field::new(mf.excess.iter().map(|e| 0.5 * (1.0 + e)).collect());
        let sup = Field::constant(&mf.prob.grid, 2.0);
        let r = monotone_solve(&mf.prob, &sub, &sup, &MonotoneOptions::default()).unwrap();
        agree &= r.verdict.is_solved();
        traces.push(max_trace(&r.trace));
        errs.push(max_diff(r.excess.as_ref().unwrap().values(), &mf.excess));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let pass = agree && elapsed < 10.0 && orders.iter().all(|o| (o - 2.0).abs() <= 0.2);
    Outcome {
        pass,
        detail: format!(
            "errors {:.3e} {:.3e} {:.3e}, orders {:.3} {:.3}, {elapsed:.2} s",
            errs[0], errs[1], errs[2], orders[0], orders[1]
        ),
        traces,
    }
}

fn dense_lambda(p: &ProblemPsc, region: &Region) -> f64 {
    let (lo, hi) = region.free_ranges()[0];
    let grid = &p.grid;
    let n = hi - lo + 1;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let c = p.c_n();
    let h = grid.h();
    let q = grid.quad_w();
    let fw = grid.face_w();
    for k in 0..n {
        let i = lo + k;
        let left = if i == 0 { 0.0 } else { fw[i - 1] };
        a[(k, k)] = (c * (left + fw[i]) / h + q[i] * grid.scal()[i]) / q[i];
        if k + 1 < n {
            let v = -c * fw[i] / h / (q[i] * q[i + 1]).sqrt();
            a[(k, k + 1)] = v;
            a[(k + 1, k)] = v;
        }
    }
    a.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn criterion3() -> Outcome {
    let (g, grid) = hyperbolic(3, 30.0, 3000);
    let p = ProblemPsc::trivial(g, grid).unwrap();
    let mut lambdas = Vec::new();
    for hi in [8.0, 12.0, 16.0, 20.0, 24.0, 28.0] {
        let r = Region::from_t_ranges(&p.grid, &[(2.0, hi)]).unwrap();
        lambdas.push(lambda_min(&p, &r).unwrap().0);
    }
    let decreasing = lambdas.windows(2).all(|w| w[1] <= w[0]) && lambdas.iter().all(|&l| l > 2.0);
    let last = *lambdas.last().unwrap();
    let continuum = 2.0 + 8.0 * std::f64::consts::PI.powi(2) / 26.0_f64.powi(2);

    let (g, grid) = hyperbolic(3, 30.0, 500);
    let coarse = ProblemPsc::trivial(g, grid).unwrap();
    let r = Region::from_t_ranges(&coarse.grid, &[(2.0, 28.0)]).unwrap();
    let l = lambda_min(&coarse, &r).unwrap().0;
    let dense = dense_lambda(&coarse, &r);
    let oracle_err = ((l - dense) / dense).abs();

    let pass = decreasing && (last - 2.0).abs() <= 0.05 && oracle_err <= 1e-9;
    outcome(
        pass,
        format!(
            "lambda [2,b] = {}; lambda[2,28] - 2 = {:.4} (continuum 2 + 8 pi^2/26^2 - 2 = {:.4}); \
             decreasing {decreasing}; dense oracle rel err {oracle_err:.1e}",
            lambdas.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>().join(" "),
            last - 2.0,
            continuum - 2.0
        ),
    )
}

fn criterion4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut disagreements = 0;
    let mut signs = [0usize; 3];
    for _ in 0..30 {
        let lo = rng.gen_range(0.5..10.0);
        let width = rng.gen_range(0.6..5.0);
        // the depression is flat on the region, so it shifts lambda by -depth;
        // scale it to the undepressed eigenvalue to get both signs
        let (g0, grid0) = hyperbolic(3, 20.0, 1000);
        let p0 = ProblemPsc::trivial(g0, grid0).unwrap();
        let r0 = Region::from_t_ranges(&p0.grid, &[(lo, lo + width)]).unwrap();
        let depth = lambda_min(&p0, &r0).unwrap().0 * rng.gen_range(0.5..1.5);
        let (g, grid) = depressed(3, 20.0, 1000, lo, lo + width, depth);
        let p = ProblemPsc::trivial(g, grid).unwrap();
        let region = Region::from_t_ranges(&p.grid, &[(lo, lo + width)]).unwrap();
        let s = sign_agreement(&p, &region).unwrap();
        signs[(s.sign_lambda + 1) as usize] += 1;
        if !s.agree {
            disagreements += 1;
        }
    }
    outcome(
        disagreements == 0,
        format!(
            "{disagreements} disagreements over 30 regions (negative {}, zero {}, positive {})",
            signs[0], signs[1], signs[2]
        ),
    )
}

fn criterion5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (g, grid) = hyperbolic(3, 20.0, 4000);
    let p = ProblemPsc::trivial(g, grid).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let c = rng.gen_range(1.0..12.0);
        let w = rng.gen_range(1.0..4.0);
        let amp = rng.gen_range(-1.0..1.0);
        let phi = Field::from_fn(&p.grid, |t| 1.0 + 0.3 * amp * (-t).exp() * bump(t, c - w, c + w) + 0.2 * bump(t, c, c + 2.0 * w).abs());
        let coeffs: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| (rng.gen_range(0.0..15.0), rng.gen_range(0.5..3.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let u = Field::from_fn(&p.grid, |t| coeffs.iter().map(|&(c, w, a)| a * bump(t, c - w, c + w)).sum());
        let (qh, qg) = conformal_invariance_check(&p, &phi, &u).unwrap();
        worst = worst.max(((qh - qg) / qg).abs());
    }
    outcome(worst <= 1e-6, format!("max relative gap {worst:.2e} over 20 pairs"))
}

fn criterion6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (g, grid) = hyperbolic(3, 20.0, 2000);
    let opts = TheoremOptions::default();
    let mut ok = 0;
    for _ in 0..20 {
        let (c2, a2) = (rng.gen_range(0.0..8.0), rng.gen_range(0.0..10.0));
        let (c1, a1) = (rng.gen_range(0.0..8.0), rng.gen_range(0.0..10.0));
        let t2 = Field::from_fn(&grid, |t| -6.0 - a2 * bump(t, c2 - 1.5, c2 + 1.5));
        let t1 = Field::from_fn(&grid, |t| -6.0 - a2 * bump(t, c2 - 1.5, c2 + 1.5) - a1 * bump(t, c1 - 1.0, c1 + 1.0));
        let p1 = ProblemPsc::new(g.clone(), grid.clone(), t1).unwrap();
        let p2 = ProblemPsc::new(g.clone(), grid.clone(), t2).unwrap();
        let r1 = solve_theorem_a(&p1, &opts).unwrap();
        let r2 = solve_theorem_a(&p2, &opts).unwrap();
        if comparison_check_reports(&p1, &p2, &r1, &r2).unwrap_or(false) {
            ok += 1;
        }
    }
    outcome(ok == 20, format!("{ok}/20 ordered pairs satisfy phi1 <= phi2 + 10 tol"))
}

fn criterion7() -> Outcome {
    let opts = TheoremOptions::default();
    let (g, grid) = hyperbolic(3, 20.0, 2000);
    let target = target_with_zero_set(&grid, 4.0, 4.5, 0.5);
    let p = ProblemPsc::new(g, grid, target).unwrap();
    let solved = solve_theorem_a(&p, &opts).unwrap();
    let decay = solved.decay.map(|d| d.exponent).unwrap_or(f64::NAN);
    let first = solved.verdict.is_solved() && decay >= 2.8;

    let (g, grid) = depressed(3, 20.0, 2000, 3.0, 9.0, 100.0);
    let target = target_with_zero_set(&grid, 3.0, 9.0, 0.5);
    let p = ProblemPsc::new(g, grid, target).unwrap();
    let none = solve_theorem_a(&p, &opts).unwrap();
    let (second, f_detail) = match &none.verdict {
        Verdict::NoSolution { certificate } => {
            let f1 = certificate.f_values[0];
            let k10 = certificate.scales.iter().position(|&s| s == 10.0).unwrap();
            let f10 = certificate.f_values[k10];
            (f10 < f1 && f1 < 0.0, format!("F(u) = {f1:.3e}, F(10u) = {f10:.3e}"))
        }
        other => (false, format!("verdict {}", other.name())),
    };
    outcome(
        first && second,
        format!(
            "solvable: {} lambda(Z) = {:.3}, decay {decay:.3}; unsolvable: {} lambda(Z) = {:.3}, {f_detail}",
            solved.verdict.name(),
            solved.lambda_z.unwrap_or(f64::NAN),
            none.verdict.name(),
            none.lambda_z.unwrap_or(f64::NAN)
        ),
    )
}

fn momentum_family(grid: &cclab_core::Grid) -> Vec<Field> {
    vec![
        Field::zeros(grid),
        Field::from_fn(grid, |t| 0.3 * bump(t, 1.0, 3.0)),
        Field::from_fn(grid, |t| 1.0 * bump(t, 4.0, 6.0)),
        Field::from_fn(grid, |t| 0.5 * bump(t, 0.0, 8.0) + 0.2 * bump(t, 5.0, 7.0)),
        Field::from_fn(grid, |t| 2.0 * bump(t, 2.0, 4.0)),
    ]
}

fn criterion8() -> Outcome {
    let mut traces = Vec::new();
    let mut verdicts = Vec::new();
    let mut sandwich_gap = f64::NEG_INFINITY;
    // solvable: tau vanishes on a thin annulus of exact H^3
    let (g, grid) = hyperbolic(3, 20.0, 2000);
    let tau = Field::from_fn(&grid, |t| 3.0 * (1.0 - plateau(t, 4.0, 4.5, 0.5)));
    let mut solvable = Vec::new();
    for a in momentum_family(&grid) {
        let d = LichData::new(g.clone(), grid.clone(), tau.clone(), a).unwrap();
        let r = lich_solve(&d, 500, 1e-10).unwrap();
        solvable.push(r.report.verdict.name());
        traces.push(max_trace(&r.report.trace));
        if let (Some(phi), Some(lo), Some(hi)) = (&r.report.solution, &r.phi_tilde, &r.supersolution) {
            for i in 0..grid.len() {
                sandwich_gap = sandwich_gap
                    .max(lo.values()[i] - phi.values()[i])
                    .max(phi.values()[i] - hi.values()[i] - 1e-8);
            }
        }
    }
    verdicts.push(solvable.clone());
    // unsolvable: tau vanishes where the curvature is strongly depressed
    let (g, grid) = depressed(3, 20.0, 2000, 3.0, 9.0, 100.0);
    let tau = Field::from_fn(&grid, |t| 3.0 * (1.0 - plateau(t, 3.0, 9.0, 0.5)));
    let mut unsolvable = Vec::new();
    for a in momentum_family(&grid) {
        let d = LichData::new(g.clone(), grid.clone(), tau.clone(), a).unwrap();
        let r = lich_solve(&d, 500, 1e-10).unwrap();
        unsolvable.push(r.report.verdict.name());
    }
    verdicts.push(unsolvable.clone());
    let pass = solvable.iter().all(|v| *v == "Solved")
        && unsolvable.iter().all(|v| *v == "NoSolution")
        && sandwich_gap <= 0.0;
    Outcome {
        pass,
        detail: format!(
            "solvable tau: {:?}; unsolvable tau: {:?}; sandwich violation {:.1e}",
            solvable, unsolvable, sandwich_gap.max(0.0)
        ),
        traces,
    }
}

fn criterion9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (g, grid) = hyperbolic(3, 10.0, 400);
    let target = Field::from_fn(&grid, |t| -6.0 - 4.0 * bump(t, 1.0, 4.0));
    let p = ProblemPsc::new(g, grid, target).unwrap();
    let u = Field::from_fn(&p.grid, |t| 0.3 * bump(t, 0.0, 6.0) - 0.2 * bump(t, 2.0, 9.0));
    let grad = f_grad(&p, &u).unwrap();
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let coeffs: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| (rng.gen_range(0.0..9.0), rng.gen_range(0.3..2.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let d = Field::from_fn(&p.grid, |t| coeffs.iter().map(|&(c, w, a)| a * bump(t, c - w, c + w)).sum());
        let plus = f_eval(&p, &u.zip_map(&d, |a, b| a + step * b)).unwrap();
        let minus = f_eval(&p, &u.zip_map(&d, |a, b| a - step * b)).unwrap();
        let fd = (plus - minus) / (2.0 * step);
        let exact: f64 = grad.values().iter().zip(d.values()).map(|(g, d)| g * d).sum();
        worst = worst.max(((fd - exact) / exact).abs());
    }
    outcome(worst <= 1e-6, format!("max relative error {worst:.2e} over 20 directions"))
}

fn main() -> ExitCode {
    type Criterion = fn() -> Outcome;
    let criteria: [(usize, &str, Criterion); 9] = [
        (1, "exact-solution recovery", criterion1),
        (2, "manufactured convergence order", criterion2),
        (3, "Poincare constant", criterion3),
        (4, "sign agreement", criterion4),
        (5, "conformal invariance", criterion5),
        (6, "comparison principle", criterion6),
        (7, "solvability dichotomy", criterion7),
        (8, "Lichnerowicz equivalence", criterion8),
        (9, "gradient correctness", criterion9),
    ];
    let mut unexpected = 0;
    let mut traces = Vec::new();
    let mut report = |id: usize, name: &str, o: &Outcome| {
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_UNATTAINABLE.contains(&id) {
            " [known unattainable, see README]"
        } else {
            ""
        };
        println!("criterion {id:>2} {status} {name}: {}{note}", o.detail);
        if !o.pass && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected += 1;
        }
    };
    for (id, name, f) in criteria {
        let o = f();
        if matches!(id, 1 | 2 | 8) {
            traces.extend(o.traces.iter().copied());
        }
        report(id, name, &o);
    }
    let worst = max_trace(&traces);
    let o10 = outcome(
        worst <= 0.0,
        format!("largest nodewise increase over {} monotone runs: {worst:e}", traces.len()),
    );
    report(10, "monotone iteration contract", &o10);
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
