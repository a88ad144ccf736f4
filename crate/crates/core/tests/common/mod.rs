#![allow(dead_code)]

use std::sync::Arc;

use cclab_core::geometry::{make_hyperbolic, Geometry};
use cclab_core::{Field, Grid, ProblemPsc};

/// Smooth bump `exp(1 - 1/(1 - x^2))` on `[lo, hi]`, peak 1 at the centre.
pub fn bump(t: f64, lo: f64, hi: f64) -> f64 {
    let x = 2.0 * (t - 0.5 * (lo + hi)) / (hi - lo);
    if x.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// Smooth step from 0 (t <= a) to 1 (t >= b).
pub fn smooth_step(t: f64, a: f64, b: f64) -> f64 {
    let s = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let x = (t - a) / (b - a);
    s(x) / (s(x) + s(1.0 - x))
}

/// 1 on `[lo, hi]`, 0 outside `[lo - ramp, hi + ramp]`, smooth in between.
pub fn plateau(t: f64, lo: f64, hi: f64, ramp: f64) -> f64 {
    smooth_step(t, lo - ramp, lo) * (1.0 - smooth_step(t, hi, hi + ramp))
}

pub fn hyperbolic(n: usize, t_max: f64, m: usize) -> (Geometry, Grid) {
    let g = make_hyperbolic(n, t_max).unwrap();
    let grid = Grid::new(&g, m).unwrap();
    (g, grid)
}

/// Background curvature lowered by `depth` on a smooth plateau over
/// `[lo, hi]`.
pub fn depressed(n: usize, t_max: f64, m: usize, lo: f64, hi: f64, depth: f64) -> (Geometry, Grid) {
    let g = make_hyperbolic(n, t_max)
        .unwrap()
        .with_scal_perturbation(Arc::new(move |t| -depth * plateau(t, lo, hi, 0.5)));
    let grid = Grid::new(&g, m).unwrap();
    (g, grid)
}

/// Target that vanishes on `[lo, hi]` and equals the background curvature
/// outside `[lo - ramp, hi + ramp]`.
pub fn target_with_zero_set(grid: &Grid, lo: f64, hi: f64, ramp: f64) -> Field {
    Field::new(
        grid.nodes()
            .iter()
            .zip(grid.scal())
            .map(|(&t, &s)| {
                let p = plateau(t, lo, hi, ramp);
                if p == 1.0 {
                    0.0
                } else {
                    s * (1.0 - p)
                }
            })
            .collect(),
    )
}

/// Manufactured solution `phi* = 1 + 0.1 sech^2 t` and its exact target
/// curvature.
pub struct Manufactured {
    pub prob: ProblemPsc,
    pub excess: Vec<f64>,
}

pub fn manufactured(n: usize, t_max: f64, m: usize) -> Manufactured {
    let (g, grid) = hyperbolic(n, t_max, m);
    let target = Field::new(
        grid.nodes()
            .iter()
            .map(|&t| {
                let s = 1.0 / t.cosh();
                let th = t.tanh();
                let phi = 1.0 + 0.1 * s * s;
                let d1 = -0.2 * s * s * th;
                let d2 = 0.1 * (4.0 * s * s * th * th - 2.0 * s.powi(4));
                g.conformal_scal_exact(t, phi, d1, d2)
            })
            .collect(),
    );
    let excess = grid.nodes().iter().map(|&t| 0.1 / t.cosh().powi(2)).collect();
    Manufactured {
        prob: ProblemPsc::new(g, grid, target).unwrap(),
        excess,
    }
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}
