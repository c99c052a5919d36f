//! Superlinear Fokker–Planck consensus models with condensation.
//!
//! The model evolves an opinion density `f(w, t)` on `I = [-1, 1]`,
//!
//! ```text
//! df/dt = d/dw [ (w - m) f (1 + beta (H f)^alpha) + sigma2 d/dw (H f) ],   H(w) = (1 - w^2)^gamma,
//! ```
//!
//! with zero flux at `w = ±1`. The crate provides the closed-form steady states
//! and their critical constants ([`stationary`]), a conservative finite-volume
//! integrator with blow-up detection ([`evolve`]) and the closed-form
//! supercritical-mass analysis ([`masscrit`]).

pub mod diagnostics;
pub mod evolve;
pub mod grid;
pub mod initial;
pub mod masscrit;
pub mod params;
pub mod quadrature;
pub mod special;
pub mod stationary;

pub use diagnostics::{moments, DiagnosticsRecord};
pub use grid::{diffusion_weight, DensityField, Grid};
pub use params::{ModelParams, ParamError};
pub use quadrature::adaptive_quadrature;

/// Default number of cells.
pub const DEFAULT_CELLS: usize = 400;

/// Default relative tolerance for quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
