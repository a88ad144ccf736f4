//! Radially symmetric asymptotically hyperbolic model manifolds.

use std::fmt;
use std::sync::Arc;

use crate::discretization::{laplacian_apply, Field, Grid};
use crate::error::{Error, Result};

/// Radial scalar-curvature profile `t -> Scal(t)`.
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Hyperbolic space `H^n` in geodesic polar coordinates, truncated at `t_max`,
/// with a (possibly perturbed) radial scalar curvature profile.
///
/// The volume density is `sinh^{n-1}(t)` with the angular factor normalized
/// to one, so every integral is per unit sphere. The defining function is
/// `rho = e^{-t}`.
#[derive(Clone)]
pub struct Geometry {
    n: usize,
    t_max: f64,
    crit_exp: f64,
    conf_coeff: f64,
    scal_perturbation: Option<RadialFn>,
}

impl fmt::Debug for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Geometry")
            .field("n", &self.n)
            .field("t_max", &self.t_max)
            .field("crit_exp", &self.crit_exp)
            .field("conf_coeff", &self.conf_coeff)
            .field("perturbed", &self.scal_perturbation.is_some())
            .finish()
    }
}

/// Exact hyperbolic model with `Scal = -n(n-1)`.
pub fn make_hyperbolic(n: usize, t_max: f64) -> Result<Geometry> {
    if n < 3 {
        return Err(Error::Dimension(n));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t_max",
            reason: format!("must be positive and finite, got {t_max}"),
        });
    }
    let nf = n as f64;
    Ok(Geometry {
        n,
        t_max,
        crit_exp: 2.0 * nf / (nf - 2.0),
        conf_coeff: 4.0 * (nf - 1.0) / (nf - 2.0),
        scal_perturbation: None,
    })
}

impl Geometry {
    /// Adds a radial perturbation: `Scal(t) = -n(n-1) + perturbation(t)`.
    /// The metric itself stays hyperbolic.
    pub fn with_scal_perturbation(mut self, perturbation: RadialFn) -> Self {
        self.scal_perturbation = Some(perturbation);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Critical Sobolev exponent `N = 2n/(n-2)`.
    pub fn crit_exp(&self) -> f64 {
        self.crit_exp
    }

    /// Conformal Laplacian coefficient `c_n = 4(n-1)/(n-2)`.
    pub fn conf_coeff(&self) -> f64 {
        self.conf_coeff
    }

    pub fn is_perturbed(&self) -> bool {
        self.scal_perturbation.is_some()
    }

    /// Background scalar curvature of the exact model.
    pub fn model_scal(&self) -> f64 {
        let nf = self.dim();
        -nf * (nf - 1.0)
    }

    pub fn scal(&self, t: f64) -> f64 {
        match &self.scal_perturbation {
            Some(p) => self.model_scal() + p(t),
            None => self.model_scal(),
        }
    }

    /// Radial volume density `sinh^{n-1}(t)`.
    pub fn weight(&self, t: f64) -> f64 {
        t.sinh().powi(self.n as i32 - 1)
    }

    pub fn rho(&self, t: f64) -> f64 {
        (-t).exp()
    }

    /// Radial Laplacian of a smooth profile from its derivatives:
    /// `phi'' + (n-1) coth(t) phi'`, with the `t = 0` limit `n phi''(0)`.
    pub fn radial_laplacian(&self, t: f64, d1: f64, d2: f64) -> f64 {
        if t == 0.0 {
            self.dim() * d2
        } else {
            d2 + (self.dim() - 1.0) * d1 / t.tanh()
        }
    }

    /// Scalar curvature of `phi^{N-2} g` for an analytic profile, from the
    /// value and first two derivatives of `phi` at `t`.
    pub fn conformal_scal_exact(&self, t: f64, value: f64, d1: f64, d2: f64) -> f64 {
        let lap = self.radial_laplacian(t, d1, d2);
        value.powf(1.0 - self.crit_exp) * (-self.conf_coeff * lap + self.scal(t) * value)
    }
}

/// Scalar curvature of `phi^{N-2} g` computed with the discrete Laplacian:
/// `phi^{1-N} (-c_n Lap(phi) + Scal phi)`.
pub fn conformal_scal(geom: &Geometry, grid: &Grid, phi: &Field) -> Result<Field> {
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
    let lap = laplacian_apply(grid, geom, phi)?;
    let c_n = geom.conf_coeff();
    let expo = 1.0 - geom.crit_exp();
    let values = phi
        .values()
        .iter()
        .zip(lap.values())
        .zip(grid.scal())
        .map(|((&p, &l), &s)| p.powf(expo) * (-c_n * l + s * p))
        .collect();
    Ok(Field::new(values))
}
