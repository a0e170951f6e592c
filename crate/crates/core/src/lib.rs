//! Computation of **all** zeros (and all pre-images of any non-caustic
//! value) of non-degenerate harmonic mappings
//!
//! ```text
//! f(z) = r(z) + conj(s(z)) + sum_j 2 A_j log|z - z_j|
//! ```
//!
//! with rational `r`, `s` and complex `A_j`, by Newton-homotopy
//! continuation: all solutions of `f(z) = eta_1` for large `|eta_1|` are
//! found near the poles in closed form, then transported along a ray
//! towards the target while caustic crossings add or remove solution pairs.
//!
//! The crate exposes the supporting machinery as well: complex polynomial
//! and rational arithmetic ([`poly`], [`rational`]), the harmonic Newton
//! corrector ([`newton`]), critical curves, caustics and winding numbers
//! ([`critical`]), and the transport driver ([`transport`]).

pub mod critical;
pub mod error;
pub mod harmonic;
pub mod newton;
pub mod poly;
pub mod rational;
pub mod tol;
pub mod transport;

pub use critical::{
    trace_critical_curves, CausticCurve, CriticalCurve, CrossingKind, Geometry, RayCrossing,
};
pub use error::{Error, Result};
pub use harmonic::{rho_critical, HarmonicMapping, LocalJet, LogTerm, MappingSpec, PoleInfo};
pub use newton::{
    distinct_filter, newton_solve, newton_step, NewtonOptions, NewtonOutcome, NewtonStatus,
};
pub use poly::Polynomial;
pub use rational::{LaurentHead, PoleSite, RationalFunction};
pub use transport::{
    solve_all_zeros, solve_preimages, trace_homotopy, HomotopyBranch, PredictionSet, SolveOptions,
    SolveReport, StepFailure, TransportPath,
};

pub use num_complex::Complex64;
