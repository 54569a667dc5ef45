//! Pseudospectral simulation and verification tools for the damped wave
//! equation `u_tt − Δu + u_t = f(u)` with critical power nonlinearities and
//! data in `Ḣ^{−γ}`.
//!
//! The modules build on each other:
//!
//! * [`exponents`]: critical powers and admissibility of `γ`.
//! * [`spectral`]: periodic grids, unitary transforms, the exact linear propagator.
//! * [`norms`]: Sobolev norms computed from Fourier modes, and the solution norm of the fixed-point argument.
//! * [`initdata`]: initial data with prescribed low-frequency behaviour.
//! * [`evolve`]: splitting integrator, blow-up detection, Picard iteration.
//! * [`analysis`]: decay fits, bound checks, lifespan sweeps and a quadrature oracle.
//! * [`run`]: configuration files, run directories and manifests used by the command line tool.

pub mod analysis;
pub mod digest;
pub mod error;
pub mod evolve;
pub mod exponents;
pub mod initdata;
pub mod norms;
pub mod run;
pub mod spectral;

pub use error::{Error, Result};
pub use exponents::{check_admissibility, critical_exponent, gamma_tilde, ProblemParams, Setting};
pub use spectral::{make_grid, EvolutionState, Grid, GridSpec, SpectralField};
