//! The transport driver: computes every solution of `f(z) = eta_1` at
//! large `|eta_1|` from closed-form points near the poles, then carries the
//! solution set along a ray towards the target. Where the ray crosses the
//! caustics at a simple fold, a pair of solutions is spawned or retired;
//! every step is certified by Newton correction onto a prediction set, and
//! failing steps are bisected. A rejected ray restarts with a fresh random
//! angle.

use crate::critical::{CrossingKind, Geometry, RayCrossing};
use crate::error::{Error, Result};
use crate::harmonic::HarmonicMapping;
use crate::newton::{distinct_filter, newton_solve, NewtonOptions};
use crate::rational::PoleSite;
use crate::tol;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub seed: u64,
    /// Fixed transport angle; `None` draws seeded random angles. For
    /// pre-image targets the ray through the target is the only choice and
    /// this field is ignored.
    pub theta: Option<f64>,
    /// Parameter nodes per critical-curve sweep.
    pub curve_nodes: usize,
    pub sep_tol: f64,
    pub restart_cap: u32,
    pub refine_depth_cap: u32,
    pub doubling_cap: u32,
    /// Relative guard distance around the caustics.
    pub guard: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            seed: 0,
            theta: None,
            curve_nodes: tol::CURVE_NODES,
            sep_tol: tol::SEP_TOL,
            restart_cap: tol::RESTART_CAP,
            refine_depth_cap: tol::PATH_REFINE_DEPTH,
            doubling_cap: tol::DOUBLING_CAP,
            guard: tol::CAUSTIC_GUARD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Carried,
    SpawnPlus,
    SpawnMinus,
}

/// Start points whose Newton limits biject onto the target solution set.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    pub points: Vec<Complex64>,
    pub provenance: Vec<Provenance>,
}

impl PredictionSet {
    fn carried(points: Vec<Complex64>) -> Self {
        let provenance = vec![Provenance::Carried; points.len()];
        PredictionSet { points, provenance }
    }
}

/// One directed step of a transport path.
#[derive(Debug, Clone)]
pub struct PathSegment {
    pub from: Complex64,
    pub to: Complex64,
    pub crossing: Option<RayCrossing>,
    /// Change of the solution count across this segment: -2, 0 or +2.
    pub expected_delta: i32,
    pub depth: u32,
}

#[derive(Debug, Clone)]
pub struct TransportPath {
    pub theta: f64,
    pub thetas_tried: Vec<f64>,
    pub segments: Vec<PathSegment>,
    pub refinements: u32,
    pub expected_final_count: usize,
}

impl TransportPath {
    pub fn nodes(&self) -> Vec<Complex64> {
        let mut nodes: Vec<Complex64> = self.segments.iter().map(|s| s.from).collect();
        if let Some(last) = self.segments.last() {
            nodes.push(last.to);
        }
        nodes
    }

    /// Divide-and-conquer refinement of segment `index`: a plain segment is
    /// bisected; a crossing segment splits into thirds with the crossing
    /// kept in the middle. Fails once the segment's refinement depth is
    /// exhausted, which rejects the whole ray.
    pub fn refine_segment(&mut self, index: usize) -> Result<()> {
        let seg = self.segments[index].clone();
        if seg.depth >= tol::PATH_REFINE_DEPTH {
            return Err(Error::RayRejected(format!(
                "refinement depth exhausted near |eta| = {:.3e}",
                seg.to.norm()
            )));
        }
        let depth = seg.depth + 1;
        match &seg.crossing {
            None => {
                let mid = 0.5 * (seg.from + seg.to);
                let halves = [
                    PathSegment {
                        from: seg.from,
                        to: mid,
                        crossing: None,
                        expected_delta: 0,
                        depth,
                    },
                    PathSegment {
                        from: mid,
                        to: seg.to,
                        crossing: None,
                        expected_delta: 0,
                        depth,
                    },
                ];
                self.segments.splice(index..=index, halves);
            }
            Some(crossing) => {
                let q1 = 0.25 * (3.0 * seg.from + seg.to);
                let q2 = 0.25 * (seg.from + 3.0 * seg.to);
                let thirds = [
                    PathSegment {
                        from: seg.from,
                        to: q1,
                        crossing: None,
                        expected_delta: 0,
                        depth,
                    },
                    PathSegment {
                        from: q1,
                        to: q2,
                        crossing: Some(crossing.clone()),
                        expected_delta: seg.expected_delta,
                        depth,
                    },
                    PathSegment {
                        from: q2,
                        to: seg.to,
                        crossing: None,
                        expected_delta: 0,
                        depth,
                    },
                ];
                self.segments.splice(index..=index, thirds);
            }
        }
        self.refinements += 1;
        Ok(())
    }
}

/// Why a transport step failed; drives the refinement choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepFailure {
    NonConvergence,
    Collision,
    CountMismatch,
    Spawn,
}

/// Full account of one solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(serialize_with = "ser_points")]
    pub zeros: Vec<Complex64>,
    pub residuals: Vec<f64>,
    pub jacobians: Vec<f64>,
    pub newton_iterations: u64,
    pub steps: u32,
    pub refinements: u32,
    pub restarts: u32,
    pub theta: f64,
    pub seed: u64,
}

fn ser_points<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// One solution trajectory of a traced homotopy.
#[derive(Debug, Clone)]
pub struct HomotopyBranch {
    pub id: usize,
    /// `(path parameter, z)` samples.
    pub points: Vec<(f64, Complex64)>,
    /// Turning point where the branch was spawned at a fold crossing.
    pub born: Option<(f64, Complex64)>,
    /// Turning point where the branch was retired.
    pub died: Option<(f64, Complex64)>,
}

// ---- engine ---------------------------------------------------------------

struct Reject(String);

struct Engine<'a> {
    f: &'a HarmonicMapping,
    geom: &'a Geometry,
    nopts: NewtonOptions,
    sep_tol: f64,
    doubling_cap: u32,
    newton_iterations: u64,
}

impl<'a> Engine<'a> {
    fn new(f: &'a HarmonicMapping, geom: &'a Geometry, opts: &SolveOptions) -> Self {
        Engine {
            f,
            geom,
            nopts: NewtonOptions::for_mapping(f),
            sep_tol: opts.sep_tol,
            doubling_cap: opts.doubling_cap,
            newton_iterations: 0,
        }
    }

    fn newton(&mut self, eta: Complex64, z0: Complex64) -> crate::newton::NewtonOutcome {
        let out = newton_solve(self.f, eta, z0, &self.nopts);
        self.newton_iterations += out.iterations as u64;
        out
    }

    /// Initial phase: `eta_1 = 2 e^{i theta} max |f(C)|` (or a pole-scale
    /// fallback), doubled until the closed-form start points near every
    /// pole converge onto `P(f)` distinct solutions.
    fn initial_phase(
        &mut self,
        theta: f64,
        target: Complex64,
    ) -> std::result::Result<(Complex64, PredictionSet, Vec<Complex64>), Reject> {
        let pole_scale = self
            .f
            .poles()
            .iter()
            .filter_map(|p| match p.location {
                PoleSite::Finite(z) => Some(z.norm()),
                PoleSite::Infinity => None,
            })
            .fold(0.0, f64::max);
        let base = self
            .geom
            .max_caustic_modulus()
            .max(target.norm())
            .max(0.5 * (1.0 + pole_scale));
        let mut eta1 = 2.0 * base * Complex64::from_polar(1.0, theta);
        for _ in 0..=self.doubling_cap {
            self.nopts.escape_radius = self
                .f
                .escape_radius()
                .max(1e3 * (1.0 + eta1.norm()));
            if let Some((pred, sols)) = self.try_initial(eta1) {
                return Ok((eta1, pred, sols));
            }
            eta1 *= 2.0;
        }
        Err(Reject("initial phase failed at the doubling cap".into()))
    }

    /// The start points near one pole of order `n` are the `n` solutions of
    /// `(zeta - z0)^n = (|a|^2 - |b|^2) / (conj(a) c - conj(b) conj(c))`
    /// with `c = eta - (a0 + conj(b0))`; at infinity the same in `w = 1/z`.
    fn try_initial(&mut self, eta1: Complex64) -> Option<(PredictionSet, Vec<Complex64>)> {
        let expected = self.f.total_pole_order();
        if expected == 0 {
            return Some((PredictionSet::carried(Vec::new()), Vec::new()));
        }
        let mut starts = Vec::with_capacity(expected);
        for pole in self.f.poles() {
            let c = eta1 - pole.smooth_const;
            if c.norm() < 1e-12 * (1.0 + eta1.norm()) {
                return None;
            }
            let denom = pole.a_top.conj() * c - pole.b_top.conj() * c.conj();
            let top_scale = (pole.a_top.norm() + pole.b_top.norm()) * c.norm();
            if denom.norm() <= 1e-14 * top_scale {
                return None;
            }
            let rhs = Complex64::new(
                pole.a_top.norm_sqr() - pole.b_top.norm_sqr(),
                0.0,
            ) / denom;
            let n = pole.order as u32;
            let radius = rhs.norm().powf(1.0 / n as f64);
            let angle = rhs.arg() / n as f64;
            for k in 0..n {
                let root =
                    Complex64::from_polar(radius, angle + 2.0 * PI * k as f64 / n as f64);
                let start = match pole.location {
                    PoleSite::Finite(z0) => z0 + root,
                    PoleSite::Infinity => root.finv(),
                };
                starts.push(start);
            }
        }
        let mut limits = Vec::with_capacity(starts.len());
        for &z0 in &starts {
            let out = self.newton(eta1, z0);
            if !out.converged() {
                return None;
            }
            limits.push(out.limit);
        }
        if distinct_filter(&limits, self.sep_tol).len() != expected {
            return None;
        }
        Some((PredictionSet::carried(starts), limits))
    }

    /// Assembles the candidate path along the ray: crossing brackets at
    /// equal offsets, expected count changes from winding numbers on both
    /// sides, and a final node at the target.
    fn build_path(
        &mut self,
        theta: f64,
        eta1: Complex64,
        target: Complex64,
    ) -> std::result::Result<TransportPath, Reject> {
        let expected0 = self.f.total_pole_order();
        let crossings: Vec<RayCrossing> = self
            .geom
            .ray_intersections(self.f, theta)
            .into_iter()
            .filter(|cr| cr.xi.norm() > target.norm() + tol::CAUSTIC_GUARD * (1.0 + target.norm()))
            .collect();
        if let Some(cr) = crossings.iter().find(|cr| cr.kind == CrossingKind::Suspect) {
            return Err(Reject(format!(
                "suspect caustic crossing at |xi| = {:.6}",
                cr.xi.norm()
            )));
        }
        let ws = |engine: &Self, eta: Complex64| -> std::result::Result<i32, Reject> {
            engine
                .geom
                .winding_sum(eta)
                .map_err(|_| Reject("winding query hit the caustic guard".into()))
        };
        if ws(self, eta1)? != 0 {
            return Err(Reject("eta_1 is not outside all caustics".into()));
        }
        let target_ws = ws(self, target)?;

        // bracket radii with equal offsets bounded by the neighbor gaps
        let dir = Complex64::from_polar(1.0, theta);
        let radii: Vec<f64> = crossings.iter().map(|cr| cr.xi.norm()).collect();
        let mut segments = Vec::new();
        let mut deltas = Vec::new();
        let mut prev_node = eta1;
        let mut prev_ws = 0;
        for (k, cr) in crossings.iter().enumerate() {
            let r = radii[k];
            let up_gap = if k == 0 {
                eta1.norm() - r
            } else {
                radii[k - 1] - r
            };
            let down_gap = if k + 1 < radii.len() {
                r - radii[k + 1]
            } else {
                r - target.norm()
            };
            let offset = (up_gap.min(down_gap).min(r)) / 4.0;
            if !(offset > 0.0) {
                return Err(Reject("crossing brackets collapsed".into()));
            }
            let above = dir * (r + offset);
            let below = dir * (r - offset);
            let ws_above = ws(self, above)?;
            let ws_below = ws(self, below)?;
            if ws_above != prev_ws {
                return Err(Reject(
                    "winding changed without a detected crossing".into(),
                ));
            }
            let delta = 2 * (ws_below - ws_above);
            if delta.abs() != 2 {
                return Err(Reject(format!(
                    "winding step {delta} across a single crossing"
                )));
            }
            segments.push(PathSegment {
                from: prev_node,
                to: above,
                crossing: None,
                expected_delta: 0,
                depth: 0,
            });
            segments.push(PathSegment {
                from: above,
                to: below,
                crossing: Some(cr.clone()),
                expected_delta: delta,
                depth: 0,
            });
            deltas.push(delta);
            prev_node = below;
            prev_ws = ws_below;
        }
        segments.push(PathSegment {
            from: prev_node,
            to: target,
            crossing: None,
            expected_delta: 0,
            depth: 0,
        });
        if prev_ws != target_ws {
            return Err(Reject(
                "crossing parity disagrees with the target winding".into(),
            ));
        }
        let sum: i32 = deltas.iter().sum();
        let expected_final = expected0 as i32 + sum;
        debug_assert_eq!(expected_final, expected0 as i32 + 2 * target_ws);
        if expected_final < 0 {
            return Err(Reject("negative expected count".into()));
        }
        Ok(TransportPath {
            theta,
            thetas_tried: Vec::new(),
            segments,
            refinements: 0,
            expected_final_count: expected_final as usize,
        })
    }

    /// Plain prediction-correction step: Newton from every point, all must
    /// converge onto pairwise distinct limits matching the expected count.
    fn step(
        &mut self,
        points: &[Complex64],
        eta_next: Complex64,
        expected: usize,
    ) -> std::result::Result<Vec<Complex64>, StepFailure> {
        if points.len() != expected {
            return Err(StepFailure::CountMismatch);
        }
        let mut limits = Vec::with_capacity(points.len());
        for &p in points {
            let out = self.newton(eta_next, p);
            if !out.converged() {
                return Err(StepFailure::NonConvergence);
            }
            limits.push(out.limit);
        }
        if distinct_filter(&limits, self.sep_tol).len() != expected {
            return Err(StepFailure::Collision);
        }
        Ok(limits)
    }

    /// Prediction set for a caustic-crossing step: spawn `z_+- = z_0 +-
    /// i sqrt(t conj(b1)/a1)` on a gaining crossing, or retire the two
    /// carried solutions attracted by `z_+-` on a losing one.
    fn crossing_prediction(
        &mut self,
        carried: &[Complex64],
        crossing: &RayCrossing,
        eta_from: Complex64,
        eta_to: Complex64,
        delta: i32,
    ) -> std::result::Result<PredictionSet, StepFailure> {
        let z0 = crossing.preimage;
        let jet = self.f.local_jet(z0).map_err(|_| StepFailure::Spawn)?;
        if jet.a1.norm() == 0.0 || jet.b1.norm() == 0.0 {
            return Err(StepFailure::Spawn);
        }
        let c = jet.fold_direction();
        if c.norm() < 1e-12 * (1.0 + jet.a2.norm() + jet.b2.norm()) {
            return Err(StepFailure::Spawn);
        }
        // the step must not run tangentially to the caustic
        let d = eta_to - eta_from;
        let tau = crossing.tangent;
        if tau.norm() > 0.0 && d.norm() > 0.0 {
            let transversality = (tau.conj() * d).im.abs() / (tau.norm() * d.norm());
            if transversality < tol::CUSP_GUARD {
                return Err(StepFailure::Spawn);
            }
        }
        let t = (eta_to - crossing.xi).norm() / c.norm();
        let spread = Complex64::new(0.0, 1.0) * (t * jet.b1.conj() / jet.a1).sqrt();
        let z_plus = z0 + spread;
        let z_minus = z0 - spread;
        if delta > 0 {
            let mut points = carried.to_vec();
            let mut provenance = vec![Provenance::Carried; points.len()];
            points.push(z_plus);
            provenance.push(Provenance::SpawnPlus);
            points.push(z_minus);
            provenance.push(Provenance::SpawnMinus);
            Ok(PredictionSet { points, provenance })
        } else {
            // reverse view: the pair exists on the `eta_from` side; its
            // Newton limits are the two solutions to retire
            let mut removed = Vec::with_capacity(2);
            for z in [z_plus, z_minus] {
                let out = self.newton(eta_from, z);
                if !out.converged() {
                    return Err(StepFailure::Spawn);
                }
                removed.push(out.limit);
            }
            if (removed[0] - removed[1]).norm() <= self.sep_tol * (1.0 + removed[0].norm()) {
                return Err(StepFailure::Spawn);
            }
            let mut keep = carried.to_vec();
            for lim in removed {
                let nearest = keep
                    .iter()
                    .enumerate()
                    .min_by(|a, b| {
                        (a.1 - lim)
                            .norm()
                            .partial_cmp(&(b.1 - lim).norm())
                            .unwrap()
                    })
                    .map(|(i, z)| (i, *z));
                match nearest {
                    Some((i, z)) if (z - lim).norm() <= self.sep_tol * (1.0 + z.norm()) => {
                        keep.remove(i);
                    }
                    _ => return Err(StepFailure::Spawn),
                }
            }
            Ok(PredictionSet::carried(keep))
        }
    }

    /// Walks the path, refining failed segments in place.
    fn walk(
        &mut self,
        path: &mut TransportPath,
        mut solutions: Vec<Complex64>,
    ) -> std::result::Result<(Vec<Complex64>, u32), Reject> {
        let mut count = solutions.len();
        let mut steps = 0u32;
        let mut index = 0usize;
        while index < path.segments.len() {
            let seg = path.segments[index].clone();
            let attempt = match &seg.crossing {
                None => self.step(&solutions, seg.to, count),
                Some(cr) => self
                    .crossing_prediction(&solutions, cr, seg.from, seg.to, seg.expected_delta)
                    .and_then(|pred| {
                        let expected = (count as i32 + seg.expected_delta) as usize;
                        self.step(&pred.points, seg.to, expected)
                    }),
            };
            match attempt {
                Ok(new_solutions) => {
                    solutions = new_solutions;
                    count = (count as i32 + seg.expected_delta) as usize;
                    steps += 1;
                    index += 1;
                }
                Err(_) => {
                    path.refine_segment(index)
                        .map_err(|e| Reject(e.to_string()))?;
                }
            }
        }
        if count != path.expected_final_count {
            return Err(Reject("final count disagrees with the path".into()));
        }
        Ok((solutions, steps))
    }
}

// ---- public operations ----------------------------------------------------

/// The initial modulus choice `eta_1 = 2 e^{i theta} max |f(C)|` after the
/// doubling loop that certifies the initial prediction set.
pub fn initial_eta(
    f: &HarmonicMapping,
    geom: &Geometry,
    theta: f64,
    opts: &SolveOptions,
) -> Result<Complex64> {
    f.solvable()?;
    let mut engine = Engine::new(f, geom, opts);
    match engine.initial_phase(theta, Complex64::new(0.0, 0.0)) {
        Ok((eta1, _, _)) => Ok(eta1),
        Err(Reject(_)) => Err(Error::InitialPhaseFailure),
    }
}

/// Closed-form start points near every pole for `f(z) = eta1`, Newton
/// corrected; succeeds when the limits biject onto `P(f)` solutions.
pub fn initial_solutions(
    f: &HarmonicMapping,
    eta1: Complex64,
    opts: &SolveOptions,
) -> Result<(PredictionSet, Vec<Complex64>)> {
    f.solvable()?;
    let geom = Geometry::new(f, opts.curve_nodes)?;
    let mut engine = Engine::new(f, &geom, opts);
    engine.nopts.escape_radius = f.escape_radius().max(1e3 * (1.0 + eta1.norm()));
    engine
        .try_initial(eta1)
        .ok_or(Error::InitialPhaseFailure)
}

/// The candidate transport path along `R_theta` towards `target`.
pub fn build_candidate_path(
    f: &HarmonicMapping,
    geom: &Geometry,
    theta: f64,
    target: Complex64,
    opts: &SolveOptions,
) -> Result<TransportPath> {
    let eta1 = initial_eta(f, geom, theta, opts)?;
    let mut engine = Engine::new(f, geom, opts);
    match engine.build_path(theta, eta1, target) {
        Ok(path) => Ok(path),
        Err(Reject(msg)) => Err(Error::RayRejected(msg)),
    }
}

/// Prediction set for one caustic-crossing step.
pub fn crossing_prediction_set(
    f: &HarmonicMapping,
    solutions_at_from: &[Complex64],
    crossing: &RayCrossing,
    eta_from: Complex64,
    eta_to: Complex64,
    delta: i32,
    opts: &SolveOptions,
) -> Result<PredictionSet> {
    let geom = Geometry::new(f, opts.curve_nodes)?;
    let mut engine = Engine::new(f, &geom, opts);
    engine
        .crossing_prediction(solutions_at_from, crossing, eta_from, eta_to, delta)
        .map_err(|e| Error::SpawnFailure(format!("{e:?}")))
}

/// One prediction-correction step carrying `points` to `eta_next`.
pub fn step_transport(
    f: &HarmonicMapping,
    points: &[Complex64],
    eta_next: Complex64,
    expected_count: usize,
    opts: &SolveOptions,
) -> std::result::Result<Vec<Complex64>, StepFailure> {
    let geom = match Geometry::new(f, opts.curve_nodes) {
        Ok(g) => g,
        Err(_) => return Err(StepFailure::NonConvergence),
    };
    let mut engine = Engine::new(f, &geom, opts);
    engine.nopts.escape_radius = f
        .escape_radius()
        .max(1e3 * (1.0 + eta_next.norm()))
        .max(1e3 * points.iter().map(|z| z.norm()).fold(0.0, f64::max));
    engine.step(points, eta_next, expected_count)
}

/// All zeros of `f`.
pub fn solve_all_zeros(f: &HarmonicMapping, opts: &SolveOptions) -> Result<SolveReport> {
    solve_to_target(f, Complex64::new(0.0, 0.0), opts)
}

/// All solutions of `f(z) = eta` for `eta` off the caustics. The transport
/// ray must pass through the target, so `theta = arg(eta)` is forced and a
/// rejected ray cannot be replayed under a different angle.
pub fn solve_preimages(
    f: &HarmonicMapping,
    eta: Complex64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    solve_to_target(f, eta, opts)
}

fn solve_to_target(
    f: &HarmonicMapping,
    target: Complex64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    f.solvable()?;
    let mut geom = Geometry::new(f, opts.curve_nodes)?;
    if !geom.caustics().is_empty() {
        let scale = 1.0 + target.norm().max(geom.max_caustic_modulus());
        if geom.min_distance_to_caustics(target) <= opts.guard * scale {
            return Err(Error::SingularZeroSuspected { target });
        }
    }
    let zero_target = target.norm() == 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut thetas_tried = Vec::new();
    let mut last_reject = String::new();
    for attempt in 0..=opts.restart_cap {
        let theta = if !zero_target {
            target.arg().rem_euclid(2.0 * PI)
        } else {
            match opts.theta {
                Some(t) => t,
                None => rng.gen_range(0.0..2.0 * PI),
            }
        };
        thetas_tried.push(theta);
        let theta_is_forced = !zero_target || opts.theta.is_some();
        geom.refine_along_ray(f, theta);
        let mut engine = Engine::new(f, &geom, opts);
        let outcome = engine.initial_phase(theta, target).and_then(|(eta1, _, sols)| {
            let mut path = engine.build_path(theta, eta1, target)?;
            path.thetas_tried = thetas_tried.clone();
            let (solutions, steps) = engine.walk(&mut path, sols)?;
            Ok((solutions, steps, path))
        });
        match outcome {
            Ok((solutions, steps, path)) => {
                return assemble_report(
                    f,
                    target,
                    solutions,
                    steps,
                    path.refinements,
                    attempt,
                    theta,
                    engine.newton_iterations,
                    opts,
                );
            }
            Err(Reject(msg)) => {
                if std::env::var_os("HZ_TRACE_REJECTS").is_some() {
                    eprintln!("ray theta = {theta:.6} rejected: {msg}");
                }
                last_reject = msg;
                if theta_is_forced {
                    return Err(Error::Exhausted { restarts: attempt });
                }
            }
        }
    }
    let _ = last_reject;
    Err(Error::Exhausted {
        restarts: opts.restart_cap,
    })
}

#[allow(clippy::too_many_arguments)]
fn assemble_report(
    f: &HarmonicMapping,
    target: Complex64,
    mut solutions: Vec<Complex64>,
    steps: u32,
    refinements: u32,
    restarts: u32,
    theta: f64,
    newton_iterations: u64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    solutions.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    let mut residuals = Vec::with_capacity(solutions.len());
    let mut jacobians = Vec::with_capacity(solutions.len());
    for z in &solutions {
        residuals.push((f.eval(*z)? - target).norm());
        jacobians.push(f.jacobian(*z)?);
    }
    Ok(SolveReport {
        zeros: solutions,
        residuals,
        jacobians,
        newton_iterations,
        steps,
        refinements,
        restarts,
        theta,
        seed: opts.seed,
    })
}

/// Traces the solution trajectories of `f(z) = eta(s)` along a polygonal
/// path, recording turning points where fold crossings spawn or retire a
/// solution pair.
pub fn trace_homotopy(
    f: &HarmonicMapping,
    path_nodes: &[Complex64],
    samples_per_segment: usize,
) -> Result<Vec<HomotopyBranch>> {
    f.solvable()?;
    if path_nodes.len() < 2 {
        return Err(Error::Invalid("homotopy path needs at least two nodes".into()));
    }
    let opts = SolveOptions::default();
    let geom = Geometry::new(f, opts.curve_nodes)?;
    let start_report = solve_to_target(f, path_nodes[0], &opts)?;
    let mut engine = Engine::new(f, &geom, &opts);
    engine.nopts.escape_radius = f
        .escape_radius()
        .max(1e3 * (1.0 + path_nodes.iter().map(|z| z.norm()).fold(0.0, f64::max)));

    let mut branches: Vec<HomotopyBranch> = start_report
        .zeros
        .iter()
        .enumerate()
        .map(|(id, &z)| HomotopyBranch {
            id,
            points: vec![(0.0, z)],
            born: None,
            died: None,
        })
        .collect();
    let mut alive: Vec<usize> = (0..branches.len()).collect();

    let samples = samples_per_segment.max(1);
    for (j, pair) in path_nodes.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        for i in 1..=samples {
            let s0 = j as f64 + (i - 1) as f64 / samples as f64;
            let s1 = j as f64 + i as f64 / samples as f64;
            let eta0 = a + (b - a) * ((i - 1) as f64 / samples as f64);
            let eta1 = a + (b - a) * (i as f64 / samples as f64);
            advance_homotopy(
                f, &geom, &mut engine, &mut branches, &mut alive, eta0, eta1, s0, s1, 0,
            )?;
        }
    }
    Ok(branches)
}

#[allow(clippy::too_many_arguments)]
fn advance_homotopy(
    f: &HarmonicMapping,
    geom: &Geometry,
    engine: &mut Engine,
    branches: &mut Vec<HomotopyBranch>,
    alive: &mut Vec<usize>,
    eta0: Complex64,
    eta1: Complex64,
    s0: f64,
    s1: f64,
    depth: u32,
) -> Result<()> {
    // reject paths running into a degenerate (not-light) caustic value
    for v in geom.degenerate_caustic_values() {
        if distance_to_segment(v, eta0, eta1) <= tol::CAUSTIC_GUARD * (1.0 + v.norm()) {
            return Err(Error::NotLightTarget { target: v });
        }
    }
    if eta0 == eta1 {
        for &id in alive.iter() {
            let z = branches[id].points.last().unwrap().1;
            branches[id].points.push((s1, z));
        }
        return Ok(());
    }
    let w0 = geom.winding_sum(eta0)?;
    let w1 = geom.winding_sum(eta1)?;
    let delta = 2 * (w1 - w0);
    let crossings = geom.segment_intersections(f, eta0, eta1);

    let subdivide = |engine: &mut Engine,
                     branches: &mut Vec<HomotopyBranch>,
                     alive: &mut Vec<usize>|
     -> Result<()> {
        if depth >= 16 {
            return Err(Error::TraceFailure(
                "homotopy sampling could not isolate a single crossing".into(),
            ));
        }
        let mid = 0.5 * (eta0 + eta1);
        let sm = 0.5 * (s0 + s1);
        advance_homotopy(f, geom, engine, branches, alive, eta0, mid, s0, sm, depth + 1)?;
        advance_homotopy(f, geom, engine, branches, alive, mid, eta1, sm, s1, depth + 1)
    };

    if delta == 0 && crossings.is_empty() {
        // plain simultaneous transport
        let expected = alive.len();
        let mut new_positions = Vec::with_capacity(expected);
        for &id in alive.iter() {
            let z = branches[id].points.last().unwrap().1;
            let out = engine.newton(eta1, z);
            if !out.converged() {
                return subdivide(engine, branches, alive);
            }
            new_positions.push(out.limit);
        }
        if distinct_filter(&new_positions, engine.sep_tol).len() != expected {
            return subdivide(engine, branches, alive);
        }
        for (&id, z) in alive.iter().zip(new_positions) {
            branches[id].points.push((s1, z));
        }
        return Ok(());
    }

    if delta.abs() == 2 && crossings.len() == 1 {
        let (s_frac, crossing) = &crossings[0];
        if crossing.kind != CrossingKind::SimpleFold {
            return subdivide(engine, branches, alive);
        }
        let s_cross = s0 + (s1 - s0) * s_frac;
        let carried: Vec<Complex64> = alive
            .iter()
            .map(|&id| branches[id].points.last().unwrap().1)
            .collect();
        match engine.crossing_prediction(&carried, crossing, eta0, eta1, delta) {
            Err(_) => subdivide(engine, branches, alive),
            Ok(pred) => {
                let expected = (carried.len() as i32 + delta) as usize;
                if delta > 0 {
                    match engine.step(&pred.points, eta1, expected) {
                        Err(_) => subdivide(engine, branches, alive),
                        Ok(limits) => {
                            let n_old = alive.len();
                            for (k, &id) in alive.iter().enumerate() {
                                branches[id].points.push((s1, limits[k]));
                            }
                            for &z in &limits[n_old..] {
                                let id = branches.len();
                                branches.push(HomotopyBranch {
                                    id,
                                    points: vec![
                                        (s_cross, crossing.preimage),
                                        (s1, z),
                                    ],
                                    born: Some((s_cross, crossing.preimage)),
                                    died: None,
                                });
                                alive.push(id);
                            }
                            Ok(())
                        }
                    }
                } else {
                    // identify the two retiring branches by matching the
                    // carried set against the reduced prediction set
                    let keep = &pred.points;
                    let mut retire: Vec<usize> = Vec::new();
                    for (k, z) in carried.iter().enumerate() {
                        let kept = keep.iter().any(|w| {
                            (w - z).norm() <= engine.sep_tol * (1.0 + z.norm())
                        });
                        if !kept {
                            retire.push(k);
                        }
                    }
                    if retire.len() != 2 {
                        return subdivide(engine, branches, alive);
                    }
                    match engine.step(keep, eta1, expected) {
                        Err(_) => subdivide(engine, branches, alive),
                        Ok(limits) => {
                            for &k in retire.iter().rev() {
                                let id = alive.remove(k);
                                branches[id].points.push((s_cross, crossing.preimage));
                                branches[id].died = Some((s_cross, crossing.preimage));
                            }
                            for (&id, z) in alive.iter().zip(limits) {
                                branches[id].points.push((s1, z));
                            }
                            Ok(())
                        }
                    }
                }
            }
        }
    } else {
        subdivide(engine, branches, alive)
    }
}

fn distance_to_segment(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let u = b - a;
    let len2 = u.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * u.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + u * t)).norm()
}
