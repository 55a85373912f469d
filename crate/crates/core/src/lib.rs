//! Solitary electrohydrodynamic water waves with constant vorticity.
//!
//! The free-surface problem is posed in conformal variables on the flat strip
//! `0 < y < 1`, with the surface trace `t1 = w1|_{y=1}` (elevation minus one) as
//! the single unknown. Solitary waves are approximated on a periodic box
//! `[-L, L)` whose adequacy is measured rather than assumed.
//!
//! Module map:
//! - [`model`]: parameters, grids, traces and solution records.
//! - [`harmonic`]: spectral harmonic-extension operators on the strip.
//! - [`system`]: the Bernoulli residual, its linearization and admissibility.
//! - [`newton`]: damped Newton solver at fixed parameters.
//! - [`continuation`]: branch following from the small-amplitude regime.
//! - [`ode`]: the reduced planar ODE and its homoclinic orbit.
//! - [`conjugate`]: laminar conjugate-flow algebra and the no-bore verdict.
//! - [`diagnostics`]: field reconstruction and identity checks on computed waves.
//! - [`io`]: persistence formats (solution documents, branch logs, plot files).

// Negated comparisons are used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conjugate;
pub mod continuation;
pub mod diagnostics;
pub mod harmonic;
pub mod io;
pub mod linalg;
pub mod model;
pub mod newton;
pub mod ode;
pub mod quadrature;
pub mod system;

pub use model::{BaseParams, BranchPoint, Grid, ModelError, Params, SurfaceTrace, WaveSolution};
