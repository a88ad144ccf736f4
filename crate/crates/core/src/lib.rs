//! Numerical laboratory for the conformal prescribed scalar curvature equation
//! and the Lichnerowicz equation on radially symmetric asymptotically
//! hyperbolic manifolds.
//!
//! The model manifold is hyperbolic space `H^n` written in geodesic polar
//! coordinates, `g = dt^2 + sinh^2(t) g_{S^{n-1}}`, truncated at `t = T`.
//! Every quantity is radial, so the PDEs reduce to two-point boundary value
//! problems on `[0, T]` with a symmetry condition at the origin and a
//! Dirichlet condition at the truncation radius.

pub mod discretization;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod lichnerowicz;
pub mod solvers;
pub mod spectra;
pub mod tridiag;

pub use discretization::{DecayFit, Field, Grid};
pub use error::{Error, Result};
pub use functionals::{MetricChoice, ProblemPsc};
pub use geometry::Geometry;
pub use lichnerowicz::LichData;
pub use solvers::{Method, SolveReport, Verdict};
pub use spectra::Region;
