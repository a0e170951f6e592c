//! Error conditions of the solver.
//!
//! The variants map onto the ways a computation can be refused or can fail:
//! bad input data, evaluation too close to a singularity, a degenerate
//! mapping, and the terminal failures of the continuation driver.

use num_complex::Complex64;
use std::fmt;

/// Errors surfaced by the public API.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed input: bad coefficients, empty polynomial where one is
    /// required, unparsable mapping file, invalid builder parameters.
    Invalid(String),
    /// Evaluation point is numerically indistinguishable from a pole or a
    /// logarithmic anchor.
    PoleProximity { z: Complex64 },
    /// The simultaneous root iteration did not meet its residual criterion.
    NonConvergence { degree: usize, sweeps: usize },
    /// The candidate point is not a pole of the rational function.
    NotAPole { z: Option<Complex64> },
    /// A pole violates `|a_{-n}| != |b_{-n}|` (or is a pure-log singularity),
    /// so the mapping is degenerate there.
    DegeneratePole { location: Option<Complex64>, detail: String },
    /// The mapping is degenerate as a whole: vanishing analytic derivative,
    /// identically unimodular dilatation, or an unbounded critical set.
    DegenerateMapping(String),
    /// Critical-curve continuation failed past the refinement depth cap.
    TraceFailure(String),
    /// A winding-number query was made too close to the caustics.
    GuardViolation { eta: Complex64 },
    /// Newton stepped onto the critical set (`J_f` below the floor).
    HitCritical { z: Complex64 },
    /// The initial phase could not certify a prediction set even after the
    /// doubling cap on `|eta_1|`.
    InitialPhaseFailure,
    /// The transport ray is unusable: suspect crossings, guard violations,
    /// or exhausted refinement depth. Triggers a restart with a new angle.
    RayRejected(String),
    /// The spawned pair at a fold crossing failed to converge or collided.
    SpawnFailure(String),
    /// The target lies on or numerically near the caustics; it would require
    /// an endgame for singular solutions, which this solver does not attempt.
    SingularZeroSuspected { target: Complex64 },
    /// The requested target is a degenerate caustic value onto which a whole
    /// critical arc is mapped; pre-images there are not isolated points.
    NotLightTarget { target: Complex64 },
    /// Every transport ray was rejected within the restart budget.
    Exhausted { restarts: u32 },
    /// I/O failure in the CLI layer.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid(msg) => write!(f, "invalid input: {msg}"),
            Error::PoleProximity { z } => {
                write!(f, "evaluation too close to a pole at {z}")
            }
            Error::NonConvergence { degree, sweeps } => write!(
                f,
                "root finder did not converge for degree {degree} within {sweeps} sweeps"
            ),
            Error::NotAPole { z: Some(z) } => write!(f, "{z} is not a pole"),
            Error::NotAPole { z: None } => write!(f, "infinity is not a pole"),
            Error::DegeneratePole { location, detail } => match location {
                Some(z) => write!(f, "degenerate pole at {z}: {detail}"),
                None => write!(f, "degenerate pole at infinity: {detail}"),
            },
            Error::DegenerateMapping(msg) => write!(f, "degenerate mapping: {msg}"),
            Error::TraceFailure(msg) => write!(f, "critical curve tracing failed: {msg}"),
            Error::GuardViolation { eta } => {
                write!(f, "point {eta} is too close to the caustics")
            }
            Error::HitCritical { z } => {
                write!(f, "Newton step at {z} hit the critical set")
            }
            Error::InitialPhaseFailure => {
                write!(f, "initial phase failed to produce a prediction set")
            }
            Error::RayRejected(msg) => write!(f, "transport ray rejected: {msg}"),
            Error::SpawnFailure(msg) => write!(f, "fold spawn failed: {msg}"),
            Error::SingularZeroSuspected { target } => write!(
                f,
                "target {target} lies on or near the caustics (singular solution suspected)"
            ),
            Error::NotLightTarget { target } => write!(
                f,
                "target {target} is a degenerate caustic value with non-isolated pre-images"
            ),
            Error::Exhausted { restarts } => {
                write!(f, "no transport ray succeeded after {restarts} restarts")
            }
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
