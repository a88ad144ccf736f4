//! Radial grid, divergence-form Laplacian, quadrature, norms and decay fits.
//!
//! The scheme is a vertex-centred finite volume method on a uniform mesh in
//! the geodesic coordinate `t`. Node `i` owns the dual cell
//! `[t_{i-1/2}, t_{i+1/2}]` clipped to `[0, T]`; its quadrature weight `q_i`
//! is the exact volume of that cell. The discrete Laplacian is
//!
//! ```text
//! (Lap u)_i = [w_{i+1/2} (u_{i+1} - u_i) - w_{i-1/2} (u_i - u_{i-1})] / (h q_i)
//! ```
//!
//! with `w_{-1/2} = 0` (the inner flux vanishes because `w(0) = 0`, which is the
//! symmetry condition at the origin). Multiplying row `i` by `q_i` gives a
//! symmetric matrix, so the operator is self-adjoint for the `q`-weighted
//! inner product.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::tridiag::Tridiagonal;

const GAUSS_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS_W: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

fn gauss(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    half * GAUSS_X
        .iter()
        .zip(GAUSS_W)
        .map(|(&x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

/// Uniform radial mesh `t_i = i h`, `i = 0..=m`, `h = T/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    m: usize,
    h: f64,
    nodes: Vec<f64>,
    quad_w: Vec<f64>,
    face_w: Vec<f64>,
    scal: Vec<f64>,
    ghost_face_w: f64,
    ghost_vol: f64,
}

impl Grid {
    /// Builds the mesh and samples the geometry on it.
    pub fn new(geom: &Geometry, m: usize) -> Result<Self> {
        if m < 8 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("need at least 8 cells, got {m}"),
            });
        }
        let t_max = geom.t_max();
        let h = t_max / m as f64;
        let nodes: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
        let w = |t: f64| geom.weight(t);
        let quad_w = (0..=m)
            .map(|i| {
                let a = if i == 0 { 0.0 } else { (i as f64 - 0.5) * h };
                let b = if i == m { t_max } else { (i as f64 + 0.5) * h };
                gauss(a, b, w)
            })
            .collect();
        let face_w = (0..m).map(|i| w((i as f64 + 0.5) * h)).collect();
        let scal = nodes.iter().map(|&t| geom.scal(t)).collect();
        Ok(Self {
            m,
            h,
            nodes,
            quad_w,
            face_w,
            scal,
            ghost_face_w: w(t_max + 0.5 * h),
            ghost_vol: gauss(t_max - 0.5 * h, t_max + 0.5 * h, w),
        })
    }

    /// Number of cells; the node count is `m + 1`.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn t_max(&self) -> f64 {
        self.nodes[self.m]
    }

    pub fn t(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Dual-cell volumes `q_i`.
    pub fn quad_w(&self) -> &[f64] {
        &self.quad_w
    }

    /// Face densities `w_{i+1/2}`, `i = 0..m`.
    pub fn face_w(&self) -> &[f64] {
        &self.face_w
    }

    /// Background scalar curvature sampled at the nodes.
    pub fn scal(&self) -> &[f64] {
        &self.scal
    }

    pub fn scal_abs_max(&self) -> f64 {
        self.scal.iter().fold(0.0, |a, s| a.max(s.abs()))
    }

    /// Index of the node nearest to `t`, clamped to the grid.
    pub fn nearest(&self, t: f64) -> usize {
        ((t / self.h).round().max(0.0) as usize).min(self.m)
    }

    pub fn check(&self, u: &Field) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Row-scaled operator `c (-Lap) + diag(potential)` on nodes
    /// `first..=last`. The last row is a Dirichlet identity row. The first row
    /// is a Dirichlet identity row when `dirichlet_first` is set; otherwise it
    /// is the ordinary finite-volume row, which at node 0 encodes the symmetry
    /// condition.
    pub fn assemble(
        &self,
        c: f64,
        potential: &[f64],
        first: usize,
        last: usize,
        dirichlet_first: bool,
    ) -> Tridiagonal {
        assert!(first < last && last <= self.m);
        let len = last - first + 1;
        let mut a = Tridiagonal::zeros(len);
        for k in 0..len {
            let i = first + k;
            let boundary = k == len - 1 || (k == 0 && dirichlet_first);
            if boundary {
                a.diag[k] = 1.0;
                continue;
            }
            let scale = c / (self.h * self.quad_w[i]);
            let right = scale * self.face_w[i];
            let left = if i == 0 { 0.0 } else { scale * self.face_w[i - 1] };
            if k > 0 {
                a.lower[k] = -left;
            }
            a.upper[k] = -right;
            a.diag[k] = left + right + potential[i];
        }
        a
    }

    /// `c (-Lap) + diag(potential)` on the whole grid with the Dirichlet row
    /// at `t = T`.
    pub fn assemble_full(&self, c: f64, potential: &[f64]) -> Tridiagonal {
        self.assemble(c, potential, 0, self.m, false)
    }
}

/// Real-valued grid function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Like [`Field::new`] but rejects non-finite entries.
    pub fn try_new(values: Vec<f64>) -> Result<Self> {
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(Self { values })
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::new(vec![c; grid.len()])
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::new(grid.nodes().iter().map(|&t| f(t)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.len(), other.len());
        Field::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Writes `t,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, grid: &Grid, mut out: W) -> Result<()> {
        grid.check(self)?;
        writeln!(out, "t,value")?;
        for (t, v) in grid.nodes().iter().zip(&self.values) {
            writeln!(out, "{t:.16e},{v:.16e}")?;
        }
        Ok(())
    }

    /// Reads a `t,value` CSV as written by [`Field::write_csv`]. Returns the
    /// abscissae alongside the field.
    pub fn read_csv<R: BufRead>(input: R) -> Result<(Vec<f64>, Field)> {
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('t')) {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    reason: "expected two columns".into(),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse {
                    line: lineno + 1,
                    reason: e.to_string(),
                })
            };
            ts.push(parse(parts.next())?);
            vs.push(parse(parts.next())?);
        }
        Ok((ts, Field::try_new(vs)?))
    }
}

/// Discrete Laplace-Beltrami operator. At the Dirichlet node `t = T` the
/// stencil uses a cubic-extrapolated ghost value.
pub fn laplacian_apply(grid: &Grid, _geom: &Geometry, u: &Field) -> Result<Field> {
    grid.check(u)?;
    let m = grid.m;
    let h = grid.h;
    let v = u.values();
    let mut out = vec![0.0; m + 1];
    for i in 0..m {
        let right = grid.face_w[i] * (v[i + 1] - v[i]);
        let left = if i == 0 {
            0.0
        } else {
            grid.face_w[i - 1] * (v[i] - v[i - 1])
        };
        out[i] = (right - left) / (h * grid.quad_w[i]);
    }
    let ghost = 4.0 * v[m] - 6.0 * v[m - 1] + 4.0 * v[m - 2] - v[m - 3];
    let right = grid.ghost_face_w * (ghost - v[m]);
    let left = grid.face_w[m - 1] * (v[m] - v[m - 1]);
    out[m] = (right - left) / (h * grid.ghost_vol);
    Ok(Field::new(out))
}

/// Discrete Dirichlet form `sum_f w_f (du)_f (dv)_f / h`.
pub fn energy_inner(grid: &Grid, _geom: &Geometry, u: &Field, v: &Field) -> Result<f64> {
    grid.check(u)?;
    grid.check(v)?;
    Ok(energy_inner_raw(grid, u.values(), v.values()))
}

pub(crate) fn energy_inner_raw(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    let h = grid.h;
    grid.face_w
        .iter()
        .enumerate()
        .map(|(i, &w)| w * ((u[i + 1] - u[i]) * (v[i + 1] - v[i])) / h)
        .sum()
}

/// `q`-weighted `L^2` inner product.
pub fn mass_inner(grid: &Grid, u: &Field, v: &Field) -> Result<f64> {
    grid.check(u)?;
    grid.check(v)?;
    Ok(grid
        .quad_w
        .iter()
        .zip(u.values().iter().zip(v.values()))
        .map(|(&q, (&a, &b))| q * (a * b))
        .sum())
}

pub fn lp_norm(grid: &Grid, u: &Field, p: f64) -> Result<f64> {
    grid.check(u)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("need finite p >= 1, got {p}"),
        });
    }
    let s: f64 = grid
        .quad_w
        .iter()
        .zip(u.values())
        .map(|(&q, &x)| q * x.abs().powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

/// `L^N` norm with the critical exponent.
pub fn ln_norm(grid: &Grid, geom: &Geometry, u: &Field) -> Result<f64> {
    lp_norm(grid, u, geom.crit_exp())
}

/// Discrete `X^{0,p}_delta` norm:
/// `max_i rho(t_i)^{-delta} (sum_{|t_j - t_i| <= r} q_j |u_j|^p)^{1/p}`.
pub fn weighted_x_norm(
    grid: &Grid,
    geom: &Geometry,
    u: &Field,
    delta: f64,
    p: f64,
    window: f64,
) -> Result<f64> {
    grid.check(u)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("need finite p >= 1, got {p}"),
        });
    }
    if !(window >= grid.h) {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("window {window} is smaller than the mesh width {}", grid.h),
        });
    }
    let span = ((window / grid.h) * (1.0 + 1e-12)).floor() as usize;
    let powered: Vec<f64> = grid
        .quad_w
        .iter()
        .zip(u.values())
        .map(|(&q, &x)| q * x.abs().powf(p))
        .collect();
    let mut best = 0.0_f64;
    for i in 0..=grid.m {
        let lo = i.saturating_sub(span);
        let hi = (i + span).min(grid.m);
        let local: f64 = powered[lo..=hi].iter().sum();
        let value = geom.rho(grid.t(i)).powf(-delta) * local.powf(1.0 / p);
        best = best.max(value);
    }
    Ok(best)
}

/// Exponential decay rate from a log-linear least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `delta` such that `u ~ C e^{-delta t}` on the window.
    pub exponent: f64,
    pub r2: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

pub fn decay_fit(grid: &Grid, u: &Field, t_lo: f64, t_hi: f64) -> Result<DecayFit> {
    grid.check(u)?;
    if !(t_lo < t_hi && t_hi <= grid.t_max() - 1.0 && t_lo >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!(
                "need 0 <= t_lo < t_hi <= T - 1, got [{t_lo}, {t_hi}] with T = {}",
                grid.t_max()
            ),
        });
    }
    let eps = 1e-9 * grid.h;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &t) in grid.nodes().iter().enumerate() {
        if t < t_lo - eps || t > t_hi + eps {
            continue;
        }
        let v = u.values()[i];
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::FitDomain(format!(
                "value {v} at t = {t} is not positive"
            )));
        }
        xs.push(t);
        ys.push(v.ln());
    }
    if xs.len() < 8 {
        return Err(Error::FitDomain(format!(
            "window [{t_lo}, {t_hi}] holds {} nodes, need 8",
            xs.len()
        )));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(DecayFit {
        exponent: -slope,
        r2,
        t_lo,
        t_hi,
    })
}
