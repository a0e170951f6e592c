//! Central numeric policy: every tolerance, guard and cap in one place.

/// Residual criterion of the simultaneous root iteration, relative to
/// `max|coeff| * max(1,|z|)^deg`.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-12;

/// Sweep cap of the simultaneous root iteration.
pub const ROOT_MAX_SWEEPS: usize = 200;

/// Relative tolerance for cancelling common numerator/denominator roots
/// when a rational function is normalized.
pub const CANCEL_TOL: f64 = 1e-10;

/// Root-based cancellation is attempted only up to this denominator degree;
/// above it the (already coprime in practice) quotient is left unreduced.
pub const CANCEL_DEGREE_CAP: usize = 160;

/// Relative denominator magnitude below which evaluation reports a pole.
pub const POLE_EVAL_TOL: f64 = 1e-12;

/// Relative gap required between `|a_{-n}|` and `|b_{-n}|` at every pole.
pub const NONDEGENERACY_GAP: f64 = 1e-8;

/// Newton convergence: residual relative to `1 + |eta|`.
pub const NEWTON_RESIDUAL_TOL: f64 = 1e-13;

/// Newton convergence: step size relative to `1 + |z|`.
pub const NEWTON_STEP_TOL: f64 = 1e-13;

/// Iteration cap of a single Newton solve.
pub const NEWTON_MAX_ITER: usize = 50;

/// `|J_f|` below `factor * (|df|^2 + |dg|^2)` counts as critical.
pub const JAC_FLOOR_FACTOR: f64 = 1e-14;

/// Escape factor: `|z| > factor * (1 + pole scale)` counts as divergence.
pub const ESCAPE_FACTOR: f64 = 1e8;

/// Distinctness tolerance for solution multisets, relative to `1 + |z|`.
pub const SEP_TOL: f64 = 1e-8;

/// Default number of parameter nodes per critical-curve sweep.
pub const CURVE_NODES: usize = 1024;

/// Depth cap for local parameter bisection during curve continuation.
pub const TRACE_REFINE_DEPTH: u32 = 12;

/// A continuation step larger than this multiple of the running median
/// speed is treated as a branch jump.
pub const JUMP_FACTOR: f64 = 10.0;

/// Endpoint matching tolerance when gluing arcs, relative to `1 + |z|`.
pub const GLUE_TOL: f64 = 1e-6;

/// Phase residual allowed at critical-curve nodes: `|omega(z) - e^{it}|`.
pub const NODE_PHASE_TOL: f64 = 1e-10;

/// `|psi|` below this fraction of its local scale marks a suspect (cusp
/// or tangential) caustic crossing.
pub const CUSP_GUARD: f64 = 1e-6;

/// Guard distance to the caustics for targets and winding queries,
/// relative to `1 + modulus scale`.
pub const CAUSTIC_GUARD: f64 = 1e-9;

/// Ray-crossing refinement: `|Im(xi e^{-i theta})| <= tol * (1 + |xi|)`.
pub const RAY_IM_TOL: f64 = 1e-12;

/// Winding numbers farther than this from an integer raise a guard error.
pub const WINDING_ROUND_TOL: f64 = 0.3;

/// Caustic diameter below this relative bound flags a degenerate
/// (not-light) image curve.
pub const NOT_LIGHT_DIAMETER: f64 = 1e-8;

/// Refinement depth cap per original transport segment.
pub const PATH_REFINE_DEPTH: u32 = 10;

/// Restart cap on the random transport angle.
pub const RESTART_CAP: u32 = 25;

/// Doubling cap on `|eta_1|` in the initial phase.
pub const DOUBLING_CAP: u32 = 40;
