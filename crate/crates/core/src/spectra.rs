//! Local first conformal eigenvalue, local Yamabe invariant, their sign
//! agreement, and conformal invariance of the Yamabe quotient.

use serde::{Deserialize, Serialize};

use crate::discretization::{Field, Grid};
use crate::error::{Error, Result};
use crate::functionals::{g_raw, sum_abs_pow, MetricChoice, ProblemPsc};
use crate::geometry::conformal_scal;
use crate::tridiag::{SymTridiagonal, Tridiagonal};

/// Finite union of closed annuli, stored as inclusive node ranges. Fields in
/// the associated space vanish at every node outside the open ranges; an
/// interval starting at node 0 leaves node 0 free (the origin is interior).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    intervals: Vec<(usize, usize)>,
}

impl Region {
    pub fn new(grid: &Grid, intervals: Vec<(usize, usize)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Region("region is empty".into()));
        }
        for (k, &(a, b)) in intervals.iter().enumerate() {
            if b > grid.m() {
                return Err(Error::Region(format!("node {b} is beyond the grid")));
            }
            if b <= a {
                return Err(Error::Region(format!("interval [{a}, {b}] is degenerate")));
            }
            // a shared endpoint is pinned to zero, so the pieces decouple
            if k > 0 && intervals[k - 1].1 > a {
                return Err(Error::Region("intervals must be sorted and disjoint".into()));
            }
            let free = Self::free_range(a, b);
            if free.1 + 1 - free.0 < 3 {
                return Err(Error::Region(format!(
                    "interval [{a}, {b}] has fewer than 3 interior nodes"
                )));
            }
        }
        Ok(Self { intervals })
    }

    /// Builds a region from `[t_lo, t_hi]` pairs, snapping outward to grid
    /// nodes and merging overlaps.
    pub fn from_t_ranges(grid: &Grid, ranges: &[(f64, f64)]) -> Result<Self> {
        let h = grid.h();
        let mut iv: Vec<(usize, usize)> = Vec::new();
        for &(lo, hi) in ranges {
            if !(lo < hi && lo >= 0.0 && hi <= grid.t_max() + 1e-9 * h) {
                return Err(Error::Region(format!("bad range [{lo}, {hi}]")));
            }
            let a = (lo / h + 1e-9).floor().max(0.0) as usize;
            let b = ((hi / h - 1e-9).ceil() as usize).min(grid.m());
            iv.push((a, b));
        }
        iv.sort();
        let mut merged: Vec<(usize, usize)> = Vec::new();
        for (a, b) in iv {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Self::new(grid, merged)
    }

    pub fn intervals(&self) -> &[(usize, usize)] {
        &self.intervals
    }

    /// Interval endpoints in `t` units.
    pub fn t_ranges(&self, grid: &Grid) -> Vec<(f64, f64)> {
        self.intervals
            .iter()
            .map(|&(a, b)| (grid.t(a), grid.t(b)))
            .collect()
    }

    fn free_range(a: usize, b: usize) -> (usize, usize) {
        if a == 0 {
            (0, b - 1)
        } else {
            (a + 1, b - 1)
        }
    }

    /// Inclusive ranges of nodes where fields in the region may be non-zero.
    pub fn free_ranges(&self) -> Vec<(usize, usize)> {
        self.intervals
            .iter()
            .map(|&(a, b)| Self::free_range(a, b))
            .collect()
    }

    pub fn mask(&self, grid: &Grid) -> Vec<bool> {
        let mut mask = vec![false; grid.len()];
        for (lo, hi) in self.free_ranges() {
            mask[lo..=hi].iter_mut().for_each(|x| *x = true);
        }
        mask
    }

    /// Maximal runs of `true` with at least three nodes, as a region whose
    /// free nodes are exactly those runs. `None` when no run qualifies.
    pub fn from_mask(grid: &Grid, mask: &[bool]) -> Option<Self> {
        let m = grid.m();
        let mut intervals = Vec::new();
        let mut i = 0;
        while i <= m {
            if !mask[i] || i == m {
                i += 1;
                continue;
            }
            let start = i;
            // the Dirichlet node never carries a free value
            while i < m && mask[i] {
                i += 1;
            }
            let end = i - 1;
            if end + 1 - start >= 3 {
                let a = if start == 0 { 0 } else { start - 1 };
                intervals.push((a, end + 1));
            }
        }
        if intervals.is_empty() {
            return None;
        }
        Region::new(grid, intervals).ok()
    }
}

/// Lowest eigenpair of `c (-Lap) + diag(potential)` restricted to the nodes
/// `lo..=hi`, with zero values just outside (or the symmetry condition when
/// `lo == 0`). Returns the eigenvalue and the eigenvector on the full grid,
/// non-negative with unit `q`-weighted `L^2` norm.
pub fn lowest_eigenpair(
    grid: &Grid,
    c: f64,
    potential: &[f64],
    lo: usize,
    hi: usize,
) -> Result<(f64, Vec<f64>)> {
    let b = reduced_operator(grid, c, potential, lo, hi);
    let len = b.len();
    let pot_min = potential[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min);
    let sigma = pot_min - 1.0;

    // Sturm bisection for the smallest eigenvalue
    let mut a = sigma;
    let mut z = b.norm_inf() + pot_min.abs() + 1.0;
    for _ in 0..300 {
        let mid = 0.5 * (a + z);
        if mid <= a || mid >= z {
            break;
        }
        if b.count_below(mid) >= 1 {
            z = mid;
        } else {
            a = mid;
        }
        if z - a <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
            break;
        }
    }
    let lambda_bis = 0.5 * (a + z);

    // inverse iteration just below the eigenvalue
    let shift = lambda_bis - 1e-9 * lambda_bis.abs().max(1.0);
    let mut x = vec![1.0 / (len as f64).sqrt(); len];
    let mut residual = f64::INFINITY;
    let mut lambda = lambda_bis;
    const MAX_ITER: usize = 50;
    for _ in 0..MAX_ITER {
        let y = b.solve_shifted(shift, &x)?;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
        let bx = b.apply(&x);
        lambda = x.iter().zip(&bx).map(|(a, b)| a * b).sum();
        residual = bx
            .iter()
            .zip(&x)
            .map(|(bv, xv)| (bv - lambda * xv).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= 1e-11 * lambda.abs().max(1.0) {
            break;
        }
    }
    if !(residual <= 1e-8 * lambda.abs().max(1.0)) {
        return Err(Error::Spectral {
            iterations: MAX_ITER,
            residual,
        });
    }
    let sum: f64 = x.iter().sum();
    if sum < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let mut full = vec![0.0; grid.len()];
    for (k, &v) in x.iter().enumerate() {
        let i = lo + k;
        full[i] = v.max(0.0) / grid.quad_w()[i].sqrt();
    }
    Ok((lambda, full))
}

/// `D^{-1/2} A D^{-1/2}` where `A` is the restricted stiffness plus mass-scaled
/// potential and `D = diag(q)`.
fn reduced_operator(grid: &Grid, c: f64, potential: &[f64], lo: usize, hi: usize) -> SymTridiagonal {
    let h = grid.h();
    let q = grid.quad_w();
    let fw = grid.face_w();
    let len = hi - lo + 1;
    let mut diag = Vec::with_capacity(len);
    let mut off = Vec::with_capacity(len.saturating_sub(1));
    for i in lo..=hi {
        let left = if i == 0 { 0.0 } else { fw[i - 1] };
        let right = fw[i];
        diag.push(c * (left + right) / (h * q[i]) + potential[i]);
        if i < hi {
            off.push(-c * fw[i] / (h * (q[i] * q[i + 1]).sqrt()));
        }
    }
    SymTridiagonal { diag, off }
}

/// `lambda_g(V)` and its non-negative, `L^2`-normalized ground state.
pub fn lambda_min(prob: &ProblemPsc, region: &Region) -> Result<(f64, Field)> {
    lambda_min_with(prob, region, MetricChoice::Background)
}

pub fn lambda_min_with(
    prob: &ProblemPsc,
    region: &Region,
    choice: MetricChoice,
) -> Result<(f64, Field)> {
    let scal = prob.scal_for(choice);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (lo, hi) in region.free_ranges() {
        let (l, v) = lowest_eigenpair(&prob.grid, prob.c_n(), scal, lo, hi)?;
        if best.as_ref().map_or(true, |b| l < b.0) {
            best = Some((l, v));
        }
    }
    let (l, v) = best.expect("regions are non-empty");
    Ok((l, Field::new(v)))
}

/// Result of the Yamabe quotient minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YamabeResult {
    /// Achieved quotient, an upper bound on `Y_g(V)`.
    pub yamabe: f64,
    /// Minimizer, normalized to unit `L^N` norm.
    pub minimizer: Field,
    pub iterations: usize,
    pub converged: bool,
}

/// Preconditioned projected gradient descent for `Q^Y` on the unit `L^N`
/// sphere of fields supported in `V`, started at the `lambda` ground state.
pub fn yamabe_min(prob: &ProblemPsc, region: &Region, max_iter: usize, tol: f64) -> Result<YamabeResult> {
    let grid = &prob.grid;
    let n_exp = prob.crit_exp();
    let scal = grid.scal();
    let mask = region.mask(grid);
    let (_, ground) = lambda_min(prob, region)?;

    let normalize = |u: &mut Vec<f64>| {
        let s = sum_abs_pow(grid, u, n_exp).powf(1.0 / n_exp);
        u.iter_mut().for_each(|v| *v /= s);
    };
    let quotient = |u: &[f64]| g_raw(prob, scal, u) / sum_abs_pow(grid, u, n_exp).powf(2.0 / n_exp);

    let shift = scal
        .iter()
        .zip(&mask)
        .filter(|(_, &f)| f)
        .map(|(s, _)| *s)
        .fold(f64::INFINITY, f64::min)
        .min(0.0)
        .abs()
        + 1.0;
    let pot: Vec<f64> = scal.iter().map(|s| s + shift).collect();
    let precond = masked_operator(grid, prob.c_n(), &pot, &mask);

    let mut u = ground.into_values();
    normalize(&mut u);
    let mut q = quotient(&u);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        // on the unit sphere: grad Q = 2 A u - 2 Q q |u|^{N-2} u
        let au = masked_apply(grid, prob.c_n(), scal, &mask, &u);
        let grad: Vec<f64> = (0..grid.len())
            .map(|i| {
                if mask[i] {
                    2.0 * au[i] - 2.0 * q * grid.quad_w()[i] * u[i].abs().powf(n_exp - 2.0) * u[i]
                } else {
                    0.0
                }
            })
            .collect();
        let dir: Vec<f64> = precond.solve(&grad)?.into_iter().map(|v| -v).collect();
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if slope >= 0.0 {
            converged = true;
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-14 {
            let mut trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            normalize(&mut trial);
            let qt = quotient(&trial);
            if qt <= q + 1e-4 * alpha * slope {
                accepted = Some((trial, qt));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, qt)) => {
                let drop = q - qt;
                u = trial;
                q = qt;
                if drop <= tol * q.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            None => break,
        }
    }
    Ok(YamabeResult {
        yamabe: q,
        minimizer: Field::new(u),
        iterations,
        converged,
    })
}

/// Row-scaled symmetric operator `c K + diag(q pot)` on the masked nodes,
/// identity elsewhere.
fn masked_operator(grid: &Grid, c: f64, pot: &[f64], mask: &[bool]) -> Tridiagonal {
    let h = grid.h();
    let fw = grid.face_w();
    let n = grid.len();
    let mut a = Tridiagonal::zeros(n);
    for i in 0..n {
        if !mask[i] {
            a.diag[i] = 1.0;
            continue;
        }
        let left = if i == 0 { 0.0 } else { fw[i - 1] };
        let right = if i < grid.m() { fw[i] } else { 0.0 };
        a.diag[i] = c * (left + right) / h + grid.quad_w()[i] * pot[i];
        if i > 0 && mask[i - 1] {
            a.lower[i] = -c * left / h;
        }
        if i + 1 < n && mask[i + 1] {
            a.upper[i] = -c * right / h;
        }
    }
    a
}

fn masked_apply(grid: &Grid, c: f64, pot: &[f64], mask: &[bool], u: &[f64]) -> Vec<f64> {
    let h = grid.h();
    let fw = grid.face_w();
    (0..grid.len())
        .map(|i| {
            if !mask[i] {
                return 0.0;
            }
            let mut k = 0.0;
            if i > 0 {
                k += fw[i - 1] * (u[i] - u[i - 1]);
            }
            if i < grid.m() {
                k += fw[i] * (u[i] - u[i + 1]);
            }
            c * k / h + grid.quad_w()[i] * pot[i] * u[i]
        })
        .collect()
}

/// Signs of `lambda_g(V)` and of the Yamabe upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignAgreement {
    pub lambda: f64,
    pub yamabe: f64,
    pub sign_lambda: i8,
    pub sign_yamabe: i8,
    pub agree: bool,
}

/// Dead band for sign classification.
pub fn tol_sign(prob: &ProblemPsc) -> f64 {
    1e-8 * prob.grid.scal_abs_max()
}

fn classify(x: f64, band: f64) -> i8 {
    if x.abs() <= band {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

pub fn sign_agreement(prob: &ProblemPsc, region: &Region) -> Result<SignAgreement> {
    let (lambda, ground) = lambda_min(prob, region)?;
    let y = yamabe_min(prob, region, 500, 1e-12)?;
    let band = tol_sign(prob);
    let n_exp = prob.crit_exp();
    // Y = Q^R ||u||_2^2 / ||u||_N^2, so the band scales by that ratio
    let ratio = |u: &[f64]| {
        sum_abs_pow(&prob.grid, u, 2.0) / sum_abs_pow(&prob.grid, u, n_exp).powf(2.0 / n_exp)
    };
    let y_band = band * ratio(ground.values()).max(ratio(y.minimizer.values()));
    let sign_lambda = classify(lambda, band);
    let sign_yamabe = classify(y.yamabe, y_band);
    Ok(SignAgreement {
        lambda,
        yamabe: y.yamabe,
        sign_lambda,
        sign_yamabe,
        agree: sign_lambda == sign_yamabe,
    })
}

/// `Q^Y_h(u)` for `h = phi^{N-2} g`, evaluated with the transformed
/// curvature and measure, next to `Q^Y_g(phi u)`.
pub fn conformal_invariance_check(prob: &ProblemPsc, phi: &Field, u: &Field) -> Result<(f64, f64)> {
    let grid = &prob.grid;
    grid.check(phi)?;
    grid.check(u)?;
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let scal_h = conformal_scal(&prob.geom, grid, phi)?;
    let n_exp = prob.crit_exp();
    let c_n = prob.c_n();
    let h = grid.h();
    let p = phi.values();
    let v = u.values();
    let q = grid.quad_w();

    let pn: Vec<f64> = p.iter().map(|x| x.powf(n_exp)).collect();
    let energy_h: f64 = grid
        .face_w()
        .iter()
        .enumerate()
        .map(|(i, &w)| w * ((p[i] * p[i + 1]) * ((v[i + 1] - v[i]) * (v[i + 1] - v[i]))) / h)
        .sum();
    let mass_h: f64 = (0..grid.len())
        .map(|i| (q[i] * pn[i]) * (scal_h.values()[i] * (v[i] * v[i])))
        .sum();
    let norm_h: f64 = (0..grid.len())
        .map(|i| (q[i] * pn[i]) * v[i].abs().powf(n_exp))
        .sum();
    let q_h = (c_n * energy_h + mass_h) / norm_h.powf(2.0 / n_exp);

    let w: Vec<f64> = p.iter().zip(v).map(|(a, b)| a * b).collect();
    let q_g = g_raw(prob, grid.scal(), &w) / sum_abs_pow(grid, &w, n_exp).powf(2.0 / n_exp);
    Ok((q_h, q_g))
}
