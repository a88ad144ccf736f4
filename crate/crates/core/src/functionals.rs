//! Variational objects: the conformal-Laplacian form `G`, the Rayleigh and
//! Yamabe quotients, the existence functional `F` and its gradient.

use crate::discretization::{energy_inner_raw, Field, Grid};
use crate::error::{Error, Result};
use crate::geometry::Geometry;

/// Prescribed scalar curvature problem on a truncated radial grid.
#[derive(Debug, Clone)]
pub struct ProblemPsc {
    pub geom: Geometry,
    pub grid: Grid,
    /// Target curvature `Ŝ <= 0`.
    pub target_scal: Field,
    /// Background curvature used by `F`; equals the sampled `Scal` unless
    /// set explicitly.
    pub tilde_scal: Field,
    /// Decay exponent, reported only.
    pub delta: f64,
}

/// Which scalar curvature enters the zeroth-order term of `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricChoice {
    Background,
    Tilde,
}

impl ProblemPsc {
    pub fn new(geom: Geometry, grid: Grid, target_scal: Field) -> Result<Self> {
        grid.check(&target_scal)?;
        for (i, &s) in target_scal.values().iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFinite { node: i });
            }
            if s > 0.0 {
                return Err(Error::Precondition(format!(
                    "target curvature must be <= 0, got {s} at t = {}",
                    grid.t(i)
                )));
            }
        }
        let tilde_scal = Field::new(grid.scal().to_vec());
        Ok(Self {
            geom,
            grid,
            target_scal,
            tilde_scal,
            delta: 0.0,
        })
    }

    /// Problem whose target is the background curvature itself.
    pub fn trivial(geom: Geometry, grid: Grid) -> Result<Self> {
        let target = Field::new(grid.scal().to_vec());
        Self::new(geom, grid, target)
    }

    pub fn with_tilde_scal(mut self, tilde: Field) -> Result<Self> {
        self.grid.check(&tilde)?;
        self.tilde_scal = tilde;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn c_n(&self) -> f64 {
        self.geom.conf_coeff()
    }

    pub fn crit_exp(&self) -> f64 {
        self.geom.crit_exp()
    }

    pub fn scal_for(&self, choice: MetricChoice) -> &[f64] {
        match choice {
            MetricChoice::Background => self.grid.scal(),
            MetricChoice::Tilde => self.tilde_scal.values(),
        }
    }

    /// Threshold under which `|Ŝ|` counts as zero.
    pub fn tol_zero(&self) -> f64 {
        1e-12 * self.grid.scal_abs_max()
    }

    /// Nodes where the target curvature vanishes.
    pub fn zero_mask(&self) -> Vec<bool> {
        let tol = self.tol_zero();
        self.target_scal
            .values()
            .iter()
            .map(|s| s.abs() <= tol)
            .collect()
    }
}

/// `(1 + e)^lambda - 1` without cancellation for small `e`.
pub fn pow_m1(e: f64, lambda: f64) -> f64 {
    if lambda == 1.0 {
        e
    } else {
        (lambda * e.ln_1p()).exp_m1()
    }
}

/// `|1 + u| - 1`, written as an excess so that `pow_m1` stays accurate.
fn abs_excess(u: f64) -> f64 {
    if u >= -1.0 {
        u
    } else {
        -2.0 - u
    }
}

pub(crate) fn g_raw(prob: &ProblemPsc, scal: &[f64], u: &[f64]) -> f64 {
    let grid = &prob.grid;
    let mass: f64 = grid
        .quad_w()
        .iter()
        .zip(scal)
        .zip(u)
        .map(|((&q, &s), &v)| q * (s * (v * v)))
        .sum();
    prob.c_n() * energy_inner_raw(grid, u, u) + mass
}

/// `G(u) = c_n E(u, u) + sum q Scal u^2`.
pub fn g_eval(prob: &ProblemPsc, u: &Field, choice: MetricChoice) -> Result<f64> {
    prob.grid.check(u)?;
    Ok(g_raw(prob, prob.scal_for(choice), u.values()))
}

pub(crate) fn sum_abs_pow(grid: &Grid, u: &[f64], p: f64) -> f64 {
    grid.quad_w()
        .iter()
        .zip(u)
        .map(|(&q, &v)| q * v.abs().powf(p))
        .sum()
}

/// `G(u) / ||u||_2^2` with the background curvature.
pub fn rayleigh_q(prob: &ProblemPsc, u: &Field) -> Result<f64> {
    prob.grid.check(u)?;
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let g = g_eval(prob, u, MetricChoice::Background)?;
    Ok(g / sum_abs_pow(&prob.grid, u.values(), 2.0))
}

/// `G(u) / ||u||_N^2` with the background curvature.
pub fn yamabe_q(prob: &ProblemPsc, u: &Field) -> Result<f64> {
    prob.grid.check(u)?;
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let n_exp = prob.crit_exp();
    let g = g_eval(prob, u, MetricChoice::Background)?;
    Ok(g / sum_abs_pow(&prob.grid, u.values(), n_exp).powf(2.0 / n_exp))
}

/// Mass coefficient of the weighted Poincaré identity,
/// `c(t) = delta ((n-1) coth t - delta)`.
pub fn poincare_mass_coeff(n: usize, delta: f64, t: f64) -> f64 {
    delta * ((n as f64 - 1.0) / t.tanh() - delta)
}

/// Both sides of
/// `int |u'|^2 = int [rho^{2 delta} |(rho^{-delta} u)'|^2 + c(t) u^2]`
/// with `delta = (n-1)/2`, for which `c(t) -> (n-1)^2/4`.
pub fn poincare_identity_check(prob: &ProblemPsc, u: &Field) -> Result<(f64, f64)> {
    let delta = (prob.geom.dim() - 1.0) / 2.0;
    poincare_identity_check_with(prob, u, delta)
}

/// As [`poincare_identity_check`] with an arbitrary exponent. The identity
/// holds for every `delta` since `rho = e^{-t}`.
pub fn poincare_identity_check_with(prob: &ProblemPsc, u: &Field, delta: f64) -> Result<(f64, f64)> {
    let grid = &prob.grid;
    grid.check(u)?;
    let v = u.values();
    let m = grid.m();
    if v[0] != 0.0 || v[m] != 0.0 {
        return Err(Error::Precondition(
            "support must stay away from t = 0 and t = T".into(),
        ));
    }
    let geom = &prob.geom;
    let nf = geom.dim();
    let d = derivative4(v, grid.h());
    let lhs_integrand: Vec<f64> = (0..=m)
        .map(|i| d[i] * d[i] * geom.weight(grid.t(i)))
        .collect();
    let rhs_integrand: Vec<f64> = (0..=m)
        .map(|i| {
            let t = grid.t(i);
            let shifted = d[i] + delta * v[i];
            // c(t) w(t) written without the coth singularity at t = 0
            let cw = delta * (nf - 1.0) * t.cosh() * t.sinh().powi(geom.n() as i32 - 2)
                - delta * delta * geom.weight(t);
            shifted * shifted * geom.weight(t) + cw * v[i] * v[i]
        })
        .collect();
    Ok((
        simpson(&lhs_integrand, grid.h()),
        simpson(&rhs_integrand, grid.h()),
    ))
}

/// Fourth-order nodal first derivative; second order in the two outer
/// nodes on each side.
fn derivative4(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h)
            } else if i == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * h)
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Composite Simpson rule on uniform samples; the 3/8 rule closes an odd
/// number of intervals.
pub(crate) fn simpson(f: &[f64], h: f64) -> f64 {
    let intervals = f.len() - 1;
    let (even_end, tail) = if intervals % 2 == 0 || intervals < 3 {
        (intervals, 0.0)
    } else {
        let k = intervals - 3;
        (k, 3.0 * h / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]))
    };
    if even_end < 2 {
        return tail + if even_end == 1 { 0.5 * h * (f[0] + f[1]) } else { 0.0 };
    }
    let mut s = f[0] + f[even_end];
    for (i, &x) in f.iter().enumerate().take(even_end).skip(1) {
        s += if i % 2 == 1 { 4.0 * x } else { 2.0 * x };
    }
    s * h / 3.0 + tail
}

/// `h(x) = (2/N)(|x+1|^N - 1) - (x+1)^2 + 1`, non-negative on the real line.
pub fn h_eval(x: f64, n_exp: f64) -> f64 {
    (2.0 / n_exp) * pow_m1(abs_excess(x), n_exp) - x * (x + 2.0)
}

/// `F(u) = c_n E(u,u) + sum q [S̃ ((u+1)^2 - 1) - (2/N) Ŝ (|u+1|^N - 1)]`.
pub fn f_eval(prob: &ProblemPsc, u: &Field) -> Result<f64> {
    prob.grid.check(u)?;
    Ok(f_raw(prob, u.values()))
}

pub(crate) fn f_raw(prob: &ProblemPsc, u: &[f64]) -> f64 {
    let n_exp = prob.crit_exp();
    let grid = &prob.grid;
    let nodal: f64 = (0..grid.len())
        .map(|i| {
            let x = u[i];
            let st = prob.tilde_scal.values()[i];
            let sh = prob.target_scal.values()[i];
            grid.quad_w()[i]
                * (st * (x * (x + 2.0)) - (2.0 / n_exp) * sh * pow_m1(abs_excess(x), n_exp))
        })
        .sum();
    prob.c_n() * energy_inner_raw(grid, u, u) + nodal
}

/// Gradient of [`f_eval`] with respect to the nodal values. The component at
/// the Dirichlet node is zero.
pub fn f_grad(prob: &ProblemPsc, u: &Field) -> Result<Field> {
    prob.grid.check(u)?;
    Ok(Field::new(f_grad_raw(prob, u.values())))
}

pub(crate) fn f_grad_raw(prob: &ProblemPsc, u: &[f64]) -> Vec<f64> {
    let grid = &prob.grid;
    let n_exp = prob.crit_exp();
    let c_n = prob.c_n();
    let h = grid.h();
    let fw = grid.face_w();
    let m = grid.m();
    let mut g = vec![0.0; m + 1];
    for i in 0..m {
        let mut k = fw[i] * (u[i] - u[i + 1]);
        if i > 0 {
            k += fw[i - 1] * (u[i] - u[i - 1]);
        }
        let p = u[i] + 1.0;
        let st = prob.tilde_scal.values()[i];
        let sh = prob.target_scal.values()[i];
        let nonlin = sh * p.abs().powf(n_exp - 2.0) * p;
        g[i] = 2.0 * c_n * k / h + 2.0 * grid.quad_w()[i] * (st * p - nonlin);
    }
    g
}

/// `F(u + s) - F(u)` evaluated without the cancellation of subtracting two
/// large numbers.
pub(crate) fn f_delta(prob: &ProblemPsc, u: &[f64], s: &[f64]) -> f64 {
    let grid = &prob.grid;
    let n_exp = prob.crit_exp();
    let energy = 2.0 * energy_inner_raw(grid, u, s) + energy_inner_raw(grid, s, s);
    let nodal: f64 = (0..grid.len())
        .map(|i| {
            let (x, d) = (u[i], s[i]);
            let st = prob.tilde_scal.values()[i];
            let sh = prob.target_scal.values()[i];
            let b = (1.0 + x).abs();
            let a = (1.0 + x + d).abs();
            let same_side = (1.0 + x >= 0.0) == (1.0 + x + d >= 0.0);
            let diff = if same_side {
                if 1.0 + x >= 0.0 {
                    d
                } else {
                    -d
                }
            } else {
                a - b
            };
            let pow_diff = if b > 0.0 {
                b.powf(n_exp) * (n_exp * (diff / b).ln_1p()).exp_m1()
            } else {
                a.powf(n_exp)
            };
            grid.quad_w()[i] * (st * (d * (2.0 * x + 2.0 + d)) - (2.0 / n_exp) * sh * pow_diff)
        })
        .sum();
    prob.c_n() * energy + nodal
}

/// `F(s u)` for each `s`. `u_neg` must vanish wherever `Ŝ != 0` and satisfy
/// `G(u_neg) < 0`; then `F(s u) = s^2 G(u) + O(s)` decreases without bound.
pub fn coercivity_witness(prob: &ProblemPsc, u_neg: &Field, s_list: &[f64]) -> Result<Vec<f64>> {
    prob.grid.check(u_neg)?;
    if u_neg.is_zero() {
        return Err(Error::Precondition(
            "witness must be non-zero and supported in the zero set".into(),
        ));
    }
    let tol = prob.tol_zero();
    for (i, (&sh, &v)) in prob
        .target_scal
        .values()
        .iter()
        .zip(u_neg.values())
        .enumerate()
    {
        if sh.abs() > tol && v != 0.0 {
            return Err(Error::Precondition(format!(
                "witness is non-zero at t = {} where the target curvature is {sh}",
                prob.grid.t(i)
            )));
        }
    }
    let g = g_eval(prob, u_neg, MetricChoice::Tilde)?;
    if !(g < 0.0) {
        return Err(Error::Precondition(format!(
            "witness needs G(u) < 0, got {g}"
        )));
    }
    Ok(s_list
        .iter()
        .map(|&s| f_raw(prob, u_neg.scaled(s).values()))
        .collect())
}
