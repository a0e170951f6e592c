//! Critical curves, caustics, winding numbers and ray crossings.
//!
//! The non-isolated critical set of a non-degenerate harmonic mapping is
//! the unit-modulus level set of its dilatation `omega`, parametrized by
//! `omega(gamma(t)) = e^{it}`. Solving `omega(z) = e^{it}` is a polynomial
//! equation; tracing starts from a full root solve at `t = 0` and continues
//! each solution with Newton steps over a refining `t` grid. Glued arcs form
//! closed curves; their images under `f` discretize the caustics.

use crate::error::{Error, Result};
use crate::harmonic::HarmonicMapping;
use crate::poly::Polynomial;
use crate::rational::RationalFunction;
use crate::tol;
use num_complex::Complex64;
use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;

/// A closed critical curve discretized over its parameter interval
/// `[0, 2 pi w]` for winding count `w`; the final node re-solves the start
/// point and certifies closure.
#[derive(Debug, Clone)]
pub struct CriticalCurve {
    pub params: Vec<f64>,
    pub points: Vec<Complex64>,
    pub closed: bool,
}

impl CriticalCurve {
    /// Number of times the dilatation phase wraps along the curve.
    pub fn winding_count(&self) -> usize {
        (self.params.last().copied().unwrap_or(0.0) / (2.0 * PI)).round() as usize
    }
}

/// The image of a critical curve: caustic points with tangent data.
#[derive(Debug, Clone)]
pub struct CausticCurve {
    pub curve_index: usize,
    pub params: Vec<f64>,
    pub preimages: Vec<Complex64>,
    pub points: Vec<Complex64>,
    pub tangents: Vec<Complex64>,
    pub psi: Vec<f64>,
    pub cusp_indices: Vec<usize>,
    /// The whole critical curve maps onto (numerically) one point; the
    /// mapping is not light there.
    pub not_light: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    SimpleFold,
    Suspect,
}

/// A transversal intersection of the caustics with a query ray.
#[derive(Debug, Clone)]
pub struct RayCrossing {
    pub xi: Complex64,
    pub curve_index: usize,
    pub node_param: f64,
    pub preimage: Complex64,
    pub psi: f64,
    pub tangent: Complex64,
    pub kind: CrossingKind,
}

/// Newton continuation on `num(z) - e^{it} den(z) = 0`.
struct OmegaSolver {
    num: Polynomial,
    den: Polynomial,
}

impl OmegaSolver {
    fn new(omega: &RationalFunction) -> Self {
        OmegaSolver {
            num: omega.numerator().clone(),
            den: omega.denominator().clone(),
        }
    }

    fn phase_poly(&self, t: f64) -> Polynomial {
        let e = Complex64::from_polar(1.0, t);
        &self.num - &self.den.scale(e)
    }

    /// One Newton solve of `omega(z) = e^{it}` from `guess`.
    fn solve(&self, t: f64, guess: Complex64) -> Option<Complex64> {
        let e = Complex64::from_polar(1.0, t);
        let mut z = guess;
        for _ in 0..60 {
            let (nv, ndv) = self.num.eval_with_derivative(z);
            let (dv, ddv) = self.den.eval_with_derivative(z);
            let p = nv - e * dv;
            let dp = ndv - e * ddv;
            let scale = self.num.eval_abs(z.norm()) + self.den.eval_abs(z.norm());
            if p.norm() <= 4.0 * f64::EPSILON * scale {
                return Some(z);
            }
            if dp.norm_sqr() == 0.0 || !z.is_finite() {
                return None;
            }
            let step = p / dp;
            z -= step;
            if step.norm() <= 1e-16 * (1.0 + z.norm()) {
                // stagnated; accept if the residual is small in the local scale
                let p = self.num.eval(z) - e * self.den.eval(z);
                if p.norm() <= 32.0 * f64::EPSILON * scale {
                    return Some(z);
                }
                return None;
            }
        }
        None
    }

    fn omega_at(&self, z: Complex64) -> Complex64 {
        self.num.eval(z) / self.den.eval(z)
    }
}

struct Arc {
    ts: Vec<f64>,
    zs: Vec<Complex64>,
    speeds: VecDeque<f64>,
}

impl Arc {
    fn median_speed(&self) -> Option<f64> {
        if self.speeds.len() < 4 {
            return None;
        }
        let mut v: Vec<f64> = self.speeds.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(v[v.len() / 2])
    }

    fn accept(&mut self, t: f64, z: Complex64) {
        let dt = t - *self.ts.last().unwrap();
        let dz = (z - *self.zs.last().unwrap()).norm();
        if dt > 0.0 {
            if self.speeds.len() == 64 {
                self.speeds.pop_front();
            }
            self.speeds.push_back(dz / dt);
        }
        self.ts.push(t);
        self.zs.push(z);
    }

    /// Advance to `t_target`, bisecting the parameter step on Newton
    /// failure or on a branch-jump suspicion. At the depth cap a step is
    /// still accepted while its size stays below the base-grid scale:
    /// curve self-intersections (`omega' = 0` on the curve) make the
    /// parametrization speed blow up legitimately, and there the node
    /// distance keeps shrinking under refinement, unlike for a true jump
    /// onto another branch.
    fn advance(
        &mut self,
        solver: &OmegaSolver,
        t_target: f64,
        depth: u32,
        base_dt: f64,
    ) -> Result<()> {
        let t0 = *self.ts.last().unwrap();
        let z0 = *self.zs.last().unwrap();
        let dt = t_target - t0;
        if let Some(z1) = solver.solve(t_target, z0) {
            let dz = (z1 - z0).norm();
            let ok = match self.median_speed() {
                Some(med) => {
                    dz <= tol::JUMP_FACTOR * med.max(1e-12) * dt
                        || (depth >= tol::TRACE_REFINE_DEPTH
                            && dz <= tol::JUMP_FACTOR * med.max(1e-12) * base_dt)
                }
                None => dz <= 0.3 * (1.0 + z0.norm()),
            };
            if ok {
                self.accept(t_target, z1);
                return Ok(());
            }
        }
        if depth >= tol::TRACE_REFINE_DEPTH {
            return Err(Error::TraceFailure(format!(
                "continuation stalled near t = {t0:.6}"
            )));
        }
        self.advance(solver, t0 + 0.5 * dt, depth + 1, base_dt)?;
        self.advance(solver, t_target, depth + 1, base_dt)
    }
}

/// The traced critical geometry of one mapping, reused by the transport
/// driver for windings, crossings and on-curve refinement.
pub struct Geometry {
    omega: RationalFunction,
    omega_d: RationalFunction,
    solver: Option<OmegaSolver>,
    curves: Vec<CriticalCurve>,
    caustics: Vec<CausticCurve>,
}

impl Geometry {
    /// Traces the critical curves and builds the caustics. An analytic
    /// mapping yields empty geometry; a mapping with identically unimodular
    /// dilatation is rejected as degenerate.
    pub fn new(f: &HarmonicMapping, k_nodes: usize) -> Result<Geometry> {
        let omega = f.dilatation()?;
        if omega.is_zero() {
            return Ok(Geometry {
                omega: RationalFunction::zero(),
                omega_d: RationalFunction::zero(),
                solver: None,
                curves: Vec::new(),
                caustics: Vec::new(),
            });
        }
        if omega.is_constant() {
            let c = omega.eval(Complex64::new(0.0, 0.0))?;
            if (c.norm() - 1.0).abs() < tol::NONDEGENERACY_GAP {
                return Err(Error::DegenerateMapping(
                    "dilatation is a unimodular constant (vanishing Jacobian)".into(),
                ));
            }
            return Ok(Geometry {
                omega_d: RationalFunction::zero(),
                omega,
                solver: None,
                curves: Vec::new(),
                caustics: Vec::new(),
            });
        }
        let dn = omega.numerator().degree();
        let dd = omega.denominator().degree();
        if dn == dd {
            let ratio =
                omega.numerator().leading().unwrap() / omega.denominator().leading().unwrap();
            if (ratio.norm() - 1.0).abs() < tol::NONDEGENERACY_GAP {
                return Err(Error::DegenerateMapping(
                    "critical set reaches infinity (|omega| -> 1)".into(),
                ));
            }
        }
        let solver = OmegaSolver::new(&omega);
        let curves = trace_with_solver(&solver, k_nodes)?;
        let omega_d = omega.derivative();
        let caustics = build_caustics(f, &omega_d, &curves)?;
        let mut geom = Geometry {
            omega,
            omega_d,
            solver: Some(solver),
            curves,
            caustics,
        };
        geom.refine_image_geometry(f, k_nodes)?;
        Ok(geom)
    }

    /// Adaptive refinement of the discretization driven by the caustic
    /// image: bisect the parameter step where consecutive image chords turn
    /// sharply, and where the tangent magnitude `|psi|` says the image
    /// travelled much farther than the chord shows (a loop hiding inside a
    /// single edge). Without this, tightly wound caustic lobes near strong
    /// poles alias away and entire winding contributions go missing.
    fn refine_image_geometry(&mut self, f: &HarmonicMapping, k_nodes: usize) -> Result<()> {
        if self.solver.is_none() {
            return Ok(());
        }
        let (dzf, _) = f.wirtinger();
        let min_dt = 2.0 * PI / (k_nodes as f64) / 4096.0;
        for _pass in 0..48 {
            let mut all_inserts: Vec<(usize, f64, Complex64)> = Vec::new();
            {
                let solver = self.solver.as_ref().unwrap();
                for (ci, caustic) in self.caustics.iter().enumerate() {
                    if caustic.not_light {
                        continue;
                    }
                    let n = caustic.points.len();
                    let scale = caustic.points.iter().map(|p| p.norm()).fold(0.0, f64::max);
                    let floor = 1e-13 * (1.0 + scale);
                    for k in 0..n - 1 {
                        let dt = caustic.params[k + 1] - caustic.params[k];
                        if dt <= min_dt {
                            continue;
                        }
                        let chord = caustic.points[k + 1] - caustic.points[k];
                        let speed = caustic.psi[k].abs().max(caustic.psi[k + 1].abs());
                        let undersampled = speed * dt > 4.0 * chord.norm() + floor;
                        let sharp_turn = k > 0 && {
                            let prev = caustic.points[k] - caustic.points[k - 1];
                            prev.norm() > floor
                                && chord.norm() > floor
                                && (chord / prev).arg().abs() > 0.4
                        };
                        if undersampled || sharp_turn {
                            let tm = 0.5 * (caustic.params[k] + caustic.params[k + 1]);
                            let guess = 0.5 * (caustic.preimages[k] + caustic.preimages[k + 1]);
                            if let Some(z) = solver.solve(tm.rem_euclid(2.0 * PI), guess) {
                                all_inserts.push((ci, tm, z));
                            }
                        }
                    }
                }
            }
            let mut grew = false;
            for (ci, t, z) in all_inserts {
                if self.insert_node(f, dzf, ci, t, z).is_ok() {
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        for caustic in self.caustics.iter_mut() {
            let n = caustic.points.len();
            caustic.cusp_indices = (0..n.saturating_sub(1))
                .filter(|&k| caustic.psi[k] * caustic.psi[k + 1] < 0.0)
                .collect();
        }
        Ok(())
    }

    fn insert_node(
        &mut self,
        f: &HarmonicMapping,
        dzf: &RationalFunction,
        ci: usize,
        t: f64,
        z: Complex64,
    ) -> Result<()> {
        let fz = f.eval(z)?;
        let gp = gamma_prime(&self.omega_d, t, z)?;
        let half = Complex64::from_polar(1.0, 0.5 * t);
        let psi = 2.0 * (half * dzf.eval(z)? * gp).re;
        let tangent = half.conj() * psi;
        let caustic = &mut self.caustics[ci];
        let pos = caustic.params.partition_point(|&p| p < t);
        let near_existing = [pos.wrapping_sub(1), pos]
            .iter()
            .filter_map(|&i| caustic.params.get(i))
            .any(|&p| (p - t).abs() < 1e-13);
        if near_existing {
            return Err(Error::Invalid("node already present".into()));
        }
        caustic.params.insert(pos, t);
        caustic.preimages.insert(pos, z);
        caustic.points.insert(pos, fz);
        caustic.psi.insert(pos, psi);
        caustic.tangents.insert(pos, tangent);
        let curve = &mut self.curves[ci];
        curve.params.insert(pos, t);
        curve.points.insert(pos, z);
        Ok(())
    }

    pub fn curves(&self) -> &[CriticalCurve] {
        &self.curves
    }

    pub fn caustics(&self) -> &[CausticCurve] {
        &self.caustics
    }

    pub fn dilatation(&self) -> &RationalFunction {
        &self.omega
    }

    /// Largest caustic-point modulus over all curves; 0 for empty geometry.
    pub fn max_caustic_modulus(&self) -> f64 {
        self.caustics
            .iter()
            .flat_map(|c| c.points.iter())
            .map(|p| p.norm())
            .fold(0.0, f64::max)
    }

    /// Distance from `eta` to the nearest caustic node.
    pub fn min_distance_to_caustics(&self, eta: Complex64) -> f64 {
        self.caustics
            .iter()
            .flat_map(|c| c.points.iter())
            .map(|p| (p - eta).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Values onto which whole critical arcs collapse (not-light images).
    pub fn degenerate_caustic_values(&self) -> Vec<Complex64> {
        self.caustics
            .iter()
            .filter(|c| c.not_light)
            .filter_map(|c| c.points.first().copied())
            .collect()
    }

    /// Sum of the winding numbers of all caustic curves about `eta`.
    pub fn winding_sum(&self, eta: Complex64) -> Result<i32> {
        let mut total = 0;
        for caustic in &self.caustics {
            total += winding_number(caustic, eta)?;
        }
        Ok(total)
    }

    /// All transversal intersections of the caustics with the ray
    /// `{ r e^{i theta} : r > 0 }`, sorted by decreasing modulus. Cusp-near
    /// and coincident crossings are marked suspect; the path builder
    /// rejects rays containing any.
    pub fn ray_intersections(&self, f: &HarmonicMapping, theta: f64) -> Vec<RayCrossing> {
        let dir = Complex64::from_polar(1.0, -theta);
        let mut crossings: Vec<RayCrossing> = Vec::new();
        for (ci, caustic) in self.caustics.iter().enumerate() {
            if caustic.not_light {
                continue;
            }
            for k in 0..caustic.points.len().saturating_sub(1) {
                let (p0, p1) = (caustic.points[k], caustic.points[k + 1]);
                let side0 = (p0 * dir).im;
                let side1 = (p1 * dir).im;
                if (side0 >= 0.0) == (side1 >= 0.0) {
                    continue;
                }
                if let Some(cr) = self.refine_line_crossing(
                    f,
                    ci,
                    k,
                    Complex64::new(0.0, 0.0),
                    Complex64::from_polar(1.0, theta),
                ) {
                    // the bracket crosses the full line; keep the forward ray
                    if (cr.xi * dir).re > 0.0 {
                        crossings.push(cr);
                    }
                }
            }
        }
        finalize_crossings(&mut crossings);
        crossings
    }

    /// Sharpens the caustic polylines along the ray `R_theta`: every
    /// detected crossing is re-solved on the true curve and inserted as a
    /// polyline node. Afterwards the polyline winding numbers switch at the
    /// refined crossing radii themselves, so even tightly spaced crossing
    /// brackets stay consistent.
    pub fn refine_along_ray(&mut self, f: &HarmonicMapping, theta: f64) {
        let dir = Complex64::from_polar(1.0, -theta);
        let u = Complex64::from_polar(1.0, theta);
        let mut found: Vec<(usize, f64, Complex64, Complex64, f64, Complex64)> = Vec::new();
        for (ci, caustic) in self.caustics.iter().enumerate() {
            if caustic.not_light {
                continue;
            }
            for k in 0..caustic.points.len().saturating_sub(1) {
                let side0 = (caustic.points[k] * dir).im;
                let side1 = (caustic.points[k + 1] * dir).im;
                if (side0 >= 0.0) == (side1 >= 0.0) {
                    continue;
                }
                if let Some(cr) =
                    self.refine_line_crossing(f, ci, k, Complex64::new(0.0, 0.0), u)
                {
                    found.push((ci, cr.node_param, cr.preimage, cr.xi, cr.psi, cr.tangent));
                }
            }
        }
        let (dzf, _) = f.wirtinger();
        for (ci, t, z, _xi, _psi, _tangent) in found {
            let _ = self.insert_node(f, dzf, ci, t, z);
        }
        for caustic in self.caustics.iter_mut() {
            let n = caustic.points.len();
            caustic.cusp_indices = (0..n.saturating_sub(1))
                .filter(|&k| caustic.psi[k] * caustic.psi[k + 1] < 0.0)
                .collect();
        }
    }

    /// Intersections of the caustics with the segment `[a, b]`, used by the
    /// homotopy tracer. Returned in increasing order of the segment
    /// parameter.
    pub fn segment_intersections(
        &self,
        f: &HarmonicMapping,
        a: Complex64,
        b: Complex64,
    ) -> Vec<(f64, RayCrossing)> {
        let u = b - a;
        let len2 = u.norm_sqr();
        if len2 == 0.0 {
            return Vec::new();
        }
        let mut out: Vec<(f64, RayCrossing)> = Vec::new();
        for (ci, caustic) in self.caustics.iter().enumerate() {
            if caustic.not_light {
                continue;
            }
            for k in 0..caustic.points.len().saturating_sub(1) {
                let (p0, p1) = (caustic.points[k], caustic.points[k + 1]);
                let side0 = ((p0 - a) * u.conj()).im;
                let side1 = ((p1 - a) * u.conj()).im;
                if (side0 >= 0.0) == (side1 >= 0.0) {
                    continue;
                }
                // the edge crosses the line through a,b; keep it only if the
                // hit lies inside the segment
                let w = side0 / (side0 - side1);
                let hit = p0 + (p1 - p0) * w;
                let s_est = ((hit - a) * u.conj()).re / len2;
                if !(0.0..=1.0).contains(&s_est) {
                    continue;
                }
                if let Some(cr) = self.refine_line_crossing(f, ci, k, a, u / len2.sqrt()) {
                    let s = ((cr.xi - a) * u.conj()).re / len2;
                    if (0.0..=1.0).contains(&s) {
                        out.push((s, cr));
                    }
                }
            }
        }
        out.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        out
    }

    /// Bisection in the curve parameter for the caustic point on the line
    /// `{ origin + r u : r real }`, bracketed by polyline edge `k`.
    fn refine_line_crossing(
        &self,
        f: &HarmonicMapping,
        curve_index: usize,
        edge: usize,
        origin: Complex64,
        u: Complex64,
    ) -> Option<RayCrossing> {
        let solver = self.solver.as_ref()?;
        let caustic = &self.caustics[curve_index];
        let side = |xi: Complex64| ((xi - origin) * u.conj()).im;
        let mut t_lo = caustic.params[edge];
        let mut t_hi = caustic.params[edge + 1];
        let mut z_lo = caustic.preimages[edge];
        let mut z_hi = caustic.preimages[edge + 1];
        let mut g_lo = side(caustic.points[edge]);
        let mut xi = caustic.points[edge];
        let mut z = z_lo;
        let mut t = t_lo;
        for _ in 0..80 {
            t = 0.5 * (t_lo + t_hi);
            z = solver.solve(t.rem_euclid(2.0 * PI), 0.5 * (z_lo + z_hi))?;
            xi = f.eval(z).ok()?;
            let g = side(xi);
            if g.abs() <= tol::RAY_IM_TOL * (1.0 + xi.norm()) || (t_hi - t_lo) < 1e-15 {
                break;
            }
            if (g >= 0.0) == (g_lo >= 0.0) {
                t_lo = t;
                z_lo = z;
                g_lo = g;
            } else {
                t_hi = t;
                z_hi = z;
            }
        }
        let (psi, tangent) = self.tangent_data(f, t, z).ok()?;
        let scale = self.psi_scale(f, t, z).unwrap_or(f64::INFINITY);
        let kind = if psi.abs() < tol::CUSP_GUARD * scale {
            CrossingKind::Suspect
        } else {
            CrossingKind::SimpleFold
        };
        Some(RayCrossing {
            xi,
            curve_index,
            node_param: t,
            preimage: z,
            psi,
            tangent,
            kind,
        })
    }

    /// `psi` and the caustic tangent at parameter `t`, point `z`.
    fn tangent_data(&self, f: &HarmonicMapping, t: f64, z: Complex64) -> Result<(f64, Complex64)> {
        let (dzf, _) = f.wirtinger();
        let gp = gamma_prime(&self.omega_d, t, z)?;
        let half = Complex64::from_polar(1.0, 0.5 * t);
        let psi = 2.0 * (half * dzf.eval(z)? * gp).re;
        Ok((psi, half.conj() * psi))
    }

    fn psi_scale(&self, f: &HarmonicMapping, t: f64, z: Complex64) -> Result<f64> {
        let (dzf, _) = f.wirtinger();
        let gp = gamma_prime(&self.omega_d, t, z)?;
        Ok(2.0 * dzf.eval(z)?.norm() * gp.norm() + f64::MIN_POSITIVE)
    }
}

fn gamma_prime(omega_d: &RationalFunction, t: f64, z: Complex64) -> Result<Complex64> {
    let od = omega_d.eval(z)?;
    if od.norm() < 1e-300 {
        return Err(Error::TraceFailure(format!(
            "omega' vanishes on a critical curve at {z}"
        )));
    }
    Ok(Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, t) / od)
}

fn trace_with_solver(solver: &OmegaSolver, k_nodes: usize) -> Result<Vec<CriticalCurve>> {
    let p0 = solver.phase_poly(0.0);
    let degree = match p0.degree() {
        Some(d) if d >= 1 => d,
        _ => return Ok(Vec::new()),
    };
    let starts = p0.roots(tol::ROOT_RESIDUAL_TOL)?;
    debug_assert_eq!(starts.len(), degree);

    // polish to local-scale accuracy; the phase requirement at the nodes is
    // far tighter than the global residual criterion of the root finder
    let mut arcs: Vec<Arc> = starts
        .into_iter()
        .map(|z| Arc {
            ts: vec![0.0],
            zs: vec![solver.solve(0.0, z).unwrap_or(z)],
            speeds: VecDeque::new(),
        })
        .collect();

    let base_dt = 2.0 * PI / k_nodes as f64;
    for j in 1..=k_nodes {
        let t = 2.0 * PI * j as f64 / k_nodes as f64;
        let marks: Vec<usize> = arcs.iter().map(|a| a.zs.len()).collect();
        for arc in arcs.iter_mut() {
            arc.advance(solver, t, 0, base_dt)?;
        }
        repair_collisions(solver, &mut arcs, &marks, t)?;
    }

    // split off the t = 2 pi node: it is the gluing probe
    let mut ends = Vec::with_capacity(arcs.len());
    for arc in arcs.iter_mut() {
        ends.push(arc.zs.pop().expect("nonempty arc"));
        arc.ts.pop();
    }

    // match arc ends to arc starts
    let mut successor = vec![usize::MAX; arcs.len()];
    let mut claimed = vec![false; arcs.len()];
    for (i, end) in ends.iter().enumerate() {
        let mut best = (f64::INFINITY, usize::MAX);
        for (j, arc) in arcs.iter().enumerate() {
            let d = (arc.zs[0] - end).norm();
            if d < best.0 {
                best = (d, j);
            }
        }
        let (d, j) = best;
        if j == usize::MAX || d > tol::GLUE_TOL * (1.0 + end.norm()) || claimed[j] {
            return Err(Error::TraceFailure(
                "critical arcs do not glue into closed curves".into(),
            ));
        }
        successor[i] = j;
        claimed[j] = true;
    }

    // assemble permutation cycles into closed curves
    let mut visited = vec![false; arcs.len()];
    let mut curves = Vec::new();
    for start in 0..arcs.len() {
        if visited[start] {
            continue;
        }
        let mut params = Vec::new();
        let mut points = Vec::new();
        let mut i = start;
        let mut wrap = 0.0;
        loop {
            visited[i] = true;
            params.extend(arcs[i].ts.iter().map(|t| t + wrap));
            points.extend(arcs[i].zs.iter().copied());
            wrap += 2.0 * PI;
            let next = successor[i];
            if next == start {
                params.push(wrap);
                points.push(ends[i]);
                break;
            }
            i = next;
        }
        curves.push(CriticalCurve {
            params,
            points,
            closed: true,
        });
    }

    // node validation: every node must sit on the phase level set
    for curve in &curves {
        for (t, z) in curve.params.iter().zip(curve.points.iter()) {
            let want = Complex64::from_polar(1.0, t.rem_euclid(2.0 * PI));
            let got = solver.omega_at(*z);
            if (got - want).norm() > tol::NODE_PHASE_TOL {
                return Err(Error::TraceFailure(format!(
                    "node at t = {t:.6} misses its phase by {:.2e}",
                    (got - want).norm()
                )));
            }
        }
    }
    Ok(curves)
}

/// Passing a curve self-intersection can pull two trackers into the same
/// root basin. When any two arcs coincide at a grid node, re-solve the full
/// root set there and reassign each arc the root nearest to its previous
/// grid node, one root per arc.
fn repair_collisions(
    solver: &OmegaSolver,
    arcs: &mut [Arc],
    marks: &[usize],
    t: f64,
) -> Result<()> {
    let n = arcs.len();
    let mut collided = false;
    'outer: for i in 0..n {
        for j in i + 1..n {
            let (zi, zj) = (*arcs[i].zs.last().unwrap(), *arcs[j].zs.last().unwrap());
            if (zi - zj).norm() <= 1e-8 * (1.0 + zi.norm()) {
                collided = true;
                break 'outer;
            }
        }
    }
    if !collided {
        return Ok(());
    }
    let roots = solver.phase_poly(t).roots(tol::ROOT_RESIDUAL_TOL)?;
    if roots.len() != n {
        return Err(Error::TraceFailure(format!(
            "root count changed along the sweep at t = {t:.6}"
        )));
    }
    let anchors: Vec<Complex64> = arcs
        .iter()
        .zip(marks.iter())
        .map(|(arc, &m)| arc.zs[m - 1])
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, a) in anchors.iter().enumerate() {
        for (j, r) in roots.iter().enumerate() {
            pairs.push(((a - r).norm(), i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut assigned = vec![usize::MAX; n];
    let mut claimed = vec![false; n];
    let mut count = 0;
    for (_, i, j) in pairs {
        if assigned[i] == usize::MAX && !claimed[j] {
            assigned[i] = j;
            claimed[j] = true;
            count += 1;
            if count == n {
                break;
            }
        }
    }
    for (i, arc) in arcs.iter_mut().enumerate() {
        let root = roots[assigned[i]];
        if (root - *arc.zs.last().unwrap()).norm() > 1e-12 * (1.0 + root.norm()) {
            arc.zs.truncate(marks[i]);
            arc.ts.truncate(marks[i]);
            arc.accept(t, solver.solve(t, root).unwrap_or(root));
        }
    }
    Ok(())
}

fn build_caustics(
    f: &HarmonicMapping,
    omega_d: &RationalFunction,
    curves: &[CriticalCurve],
) -> Result<Vec<CausticCurve>> {
    let (dzf, _) = f.wirtinger();
    let mut out = Vec::new();
    for (ci, curve) in curves.iter().enumerate() {
        let n = curve.points.len();
        let mut points = Vec::with_capacity(n);
        let mut tangents = Vec::with_capacity(n);
        let mut psi = Vec::with_capacity(n);
        for (t, z) in curve.params.iter().zip(curve.points.iter()) {
            let fz = f.eval(*z)?;
            let gp = gamma_prime(omega_d, *t, *z)?;
            let half = Complex64::from_polar(1.0, 0.5 * t);
            let p = 2.0 * (half * dzf.eval(*z)? * gp).re;
            points.push(fz);
            tangents.push(half.conj() * p);
            psi.push(p);
        }
        let cusp_indices: Vec<usize> = (0..n.saturating_sub(1))
            .filter(|&k| psi[k] * psi[k + 1] < 0.0)
            .collect();
        let base = points[0];
        let max_mod = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let diameter = points
            .iter()
            .map(|p| (p - base).norm())
            .fold(0.0, f64::max);
        let not_light = diameter <= tol::NOT_LIGHT_DIAMETER * (1.0 + max_mod);
        out.push(CausticCurve {
            curve_index: ci,
            params: curve.params.clone(),
            preimages: curve.points.clone(),
            points,
            tangents,
            psi,
            cusp_indices,
            not_light,
        });
    }
    Ok(out)
}

/// Traces the critical curves of `f` over `k_nodes` parameter steps.
pub fn trace_critical_curves(f: &HarmonicMapping, k_nodes: usize) -> Result<Vec<CriticalCurve>> {
    Ok(Geometry::new(f, k_nodes)?.curves.clone())
}

/// Caustic data for externally traced curves.
pub fn caustics(f: &HarmonicMapping, curves: &[CriticalCurve]) -> Result<Vec<CausticCurve>> {
    let omega_d = f.dilatation()?.derivative();
    build_caustics(f, &omega_d, curves)
}

/// Winding number of a closed caustic polyline about `eta`.
pub fn winding_number(caustic: &CausticCurve, eta: Complex64) -> Result<i32> {
    let pts = &caustic.points;
    if pts.len() < 2 {
        // a point caustic winds around nothing, but the guard still applies
        if let Some(p) = pts.first() {
            let scale = 1.0 + eta.norm().max(p.norm());
            if (p - eta).norm() <= tol::CAUSTIC_GUARD * scale {
                return Err(Error::GuardViolation { eta });
            }
        }
        return Ok(0);
    }
    let max_mod = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let scale = 1.0 + eta.norm().max(max_mod);
    let mut total = 0.0;
    for k in 0..pts.len() - 1 {
        let a = pts[k] - eta;
        let b = pts[k + 1] - eta;
        if a.norm() <= tol::CAUSTIC_GUARD * scale || b.norm() <= tol::CAUSTIC_GUARD * scale {
            return Err(Error::GuardViolation { eta });
        }
        total += (b * a.conj()).arg();
    }
    // close any residual gap between last and first node
    let a = *pts.last().unwrap() - eta;
    let b = pts[0] - eta;
    total += (b * a.conj()).arg();
    let turns = total / (2.0 * PI);
    let rounded = turns.round();
    if (turns - rounded).abs() > tol::WINDING_ROUND_TOL {
        return Err(Error::GuardViolation { eta });
    }
    Ok(rounded as i32)
}

fn finalize_crossings(crossings: &mut Vec<RayCrossing>) {
    crossings.sort_by(|a, b| b.xi.norm().partial_cmp(&a.xi.norm()).unwrap());
    // drop duplicates from adjacent edges of the same curve
    crossings.dedup_by(|a, b| {
        a.curve_index == b.curve_index && (a.node_param - b.node_param).abs() < 1e-9
    });
    // near-coincident crossing values or moduli: the transversality
    // theorems do not apply, mark both suspect
    for i in 0..crossings.len() {
        for j in i + 1..crossings.len() {
            let scale = 1.0 + crossings[i].xi.norm();
            let close_value = (crossings[i].xi - crossings[j].xi).norm() <= 1e-8 * scale;
            let close_modulus =
                (crossings[i].xi.norm() - crossings[j].xi.norm()).abs() <= 1e-10 * scale;
            if close_value || close_modulus {
                crossings[i].kind = CrossingKind::Suspect;
                crossings[j].kind = CrossingKind::Suspect;
            }
        }
    }
}

/// Isolated critical points (common zeros of both Wirtinger derivatives
/// off the unit-modulus level set); diagnostic only.
pub fn isolated_critical_points(f: &HarmonicMapping) -> Result<Vec<Complex64>> {
    let (dzf, dzbar) = f.wirtinger();
    if dzf.is_zero() || dzbar.is_zero() {
        return Ok(Vec::new());
    }
    let num = dzf.numerator();
    if num.degree().unwrap_or(0) < 1 {
        return Ok(Vec::new());
    }
    let omega = f.dilatation()?;
    let mut out = Vec::new();
    for root in num.roots(tol::ROOT_RESIDUAL_TOL)? {
        let other = dzbar.numerator();
        let scale = other.eval_abs(root.norm()).max(f64::MIN_POSITIVE);
        if other.eval(root).norm() > 1e-8 * scale {
            continue;
        }
        if let Ok(w) = omega.eval(root) {
            if (w.norm() - 1.0).abs() > 1e-6 {
                out.push(root);
            }
        }
    }
    Ok(out)
}

/// Writes all curves as CSV rows `curve_id,t,re_z,im_z,re_fz,im_fz,psi`.
pub fn write_curves_csv<W: Write>(caustics: &[CausticCurve], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "curve_id,t,re_z,im_z,re_fz,im_fz,psi")?;
    for (id, c) in caustics.iter().enumerate() {
        for k in 0..c.points.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                id,
                c.params[k],
                c.preimages[k].re,
                c.preimages[k].im,
                c.points[k].re,
                c.points[k].im,
                c.psi[k]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::HarmonicMapping;
    use crate::poly::Polynomial;
    use crate::rational::RationalFunction;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn chang_refsdal_circle() {
        let f = HarmonicMapping::chang_refsdal();
        let geom = Geometry::new(&f, 256).unwrap();
        assert_eq!(geom.curves().len(), 1);
        let curve = &geom.curves()[0];
        assert_eq!(curve.winding_count(), 2);
        for z in &curve.points {
            assert!((z.norm() - 1.0).abs() < 1e-10);
        }
        let caustic = &geom.caustics()[0];
        assert!(caustic.not_light);
        assert!(geom.max_caustic_modulus() < 1e-10);
    }

    #[test]
    fn analytic_mapping_has_empty_critical_set() {
        let f = HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::from_real(&[-1.0, 0.0, 1.0])),
            RationalFunction::zero(),
            Vec::new(),
        )
        .unwrap();
        let geom = Geometry::new(&f, 64).unwrap();
        assert!(geom.curves().is_empty());

        // constant non-unimodular dilatation: also empty
        let f = HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 1.0])),
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 0.5])),
            Vec::new(),
        )
        .unwrap();
        assert!(Geometry::new(&f, 64).unwrap().curves().is_empty());

        // vanishing Jacobian: f = z + conj(z) already fails the pole gap
        // check at construction (|a_1| = |b_1| at infinity)
        let err = HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 1.0])),
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 1.0])),
            Vec::new(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegeneratePole { .. }));
    }

    #[test]
    fn node_validity_and_jacobian_on_curves() {
        let f = HarmonicMapping::mpw(5, 0.6).unwrap();
        let geom = Geometry::new(&f, 512).unwrap();
        assert!(!geom.curves().is_empty());
        let omega = geom.dilatation();
        let (dzf, dzbar) = f.wirtinger();
        for curve in geom.curves() {
            for (t, z) in curve.params.iter().zip(curve.points.iter()) {
                let w = omega.eval(*z).unwrap();
                assert!((w.norm() - 1.0).abs() <= 1e-10);
                let want = Complex64::from_polar(1.0, t.rem_euclid(2.0 * PI));
                assert!((w - want).norm() <= 1e-10);
                let scale = dzf.eval(*z).unwrap().norm_sqr() + dzbar.eval(*z).unwrap().norm_sqr();
                assert!(f.jacobian(*z).unwrap().abs() <= 1e-8 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn log_example_single_caustic_with_negative_curvature() {
        let f = HarmonicMapping::log_example();
        let geom = Geometry::new(&f, 1024).unwrap();
        assert_eq!(geom.curves().len(), 1, "arcs glue into one curve");
        let caustic = &geom.caustics()[0];
        assert!(!caustic.not_light);
        // d/dt arg tau = -1/2 away from cusps
        let mut checked = 0;
        let scale = caustic
            .tangents
            .iter()
            .map(|t| t.norm())
            .fold(0.0, f64::max);
        for k in 0..caustic.points.len() - 1 {
            let (p0, p1) = (caustic.psi[k], caustic.psi[k + 1]);
            if p0 * p1 <= 0.0 || p0.abs() < 1e-3 * scale || p1.abs() < 1e-3 * scale {
                continue;
            }
            let dt = caustic.params[k + 1] - caustic.params[k];
            let dang = (caustic.tangents[k + 1] / caustic.tangents[k]).arg();
            let rate = dang / dt;
            assert!(
                (rate + 0.5).abs() <= 5e-2,
                "curvature rate {rate} at node {k}"
            );
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn wilmshurst_caustic_has_cusps() {
        let f = HarmonicMapping::wilmshurst(3).unwrap();
        let geom = Geometry::new(&f, 512).unwrap();
        let cusps: usize = geom.caustics().iter().map(|c| c.cusp_indices.len()).sum();
        assert!(cusps > 0);
    }

    #[test]
    fn winding_numbers_of_log_example() {
        let f = HarmonicMapping::log_example();
        let geom = Geometry::new(&f, 1024).unwrap();
        // far outside: 0
        let far = c(2.0 * geom.max_caustic_modulus() + 1.0, 0.0);
        assert_eq!(geom.winding_sum(far).unwrap(), 0);
        // scan a grid for the three tile classes
        let mut seen = std::collections::BTreeSet::new();
        let m = geom.max_caustic_modulus();
        for i in -40..40 {
            for j in -40..40 {
                let eta = c(i as f64 / 40.0 * 1.2 * m, j as f64 / 40.0 * 1.2 * m);
                if geom.min_distance_to_caustics(eta) < 1e-3 {
                    continue;
                }
                if let Ok(w) = geom.winding_sum(eta) {
                    seen.insert(w);
                }
            }
        }
        assert!(seen.contains(&0));
        assert!(seen.contains(&-1));
        assert!(seen.contains(&1));
        assert_eq!(seen.len(), 3, "windings {seen:?}");
    }

    #[test]
    fn mpw7_winding_about_origin() {
        let f = HarmonicMapping::mpw(7, 0.7).unwrap();
        let geom = Geometry::new(&f, 1024).unwrap();
        // 22 zeros = P + 2 * sum: the sum must be 7
        assert_eq!(geom.winding_sum(c(0.0, 0.0)).unwrap(), 7);
    }

    #[test]
    fn ray_scan_on_synthetic_circle() {
        // a synthetic unit-circle caustic polyline: theta = 0 crosses at 1.
        // half-step offset keeps nodes off the ray itself
        let n = 64;
        let pts: Vec<Complex64> = (0..=n)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / n as f64))
            .collect();
        let dir = Complex64::from_polar(1.0, 0.0).conj();
        let mut brackets = Vec::new();
        for k in 0..n {
            let phi0 = (pts[k] * dir).arg();
            let phi1 = (pts[k + 1] * dir).arg();
            if (phi0 >= 0.0) != (phi1 >= 0.0) && (phi0 - phi1).abs() < PI {
                brackets.push(k);
            }
        }
        assert_eq!(brackets.len(), 1);
        let k = brackets[0];
        let hit = 0.5 * (pts[k] + pts[k + 1]);
        assert!((hit / hit.norm() - c(1.0, 0.0)).norm() < 0.1);
        // the synthetic circle has max modulus 1
        let max: f64 = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ray_intersections_on_mpw() {
        let f = HarmonicMapping::mpw(7, 0.7).unwrap();
        let geom = Geometry::new(&f, 1024).unwrap();
        let theta = PI / 50.0;
        let crossings = geom.ray_intersections(&f, theta);
        assert!(crossings.len() >= 7, "got {}", crossings.len());
        let dir = Complex64::from_polar(1.0, -theta);
        for w in crossings.windows(2) {
            assert!(w[0].xi.norm() > w[1].xi.norm());
        }
        for cr in &crossings {
            assert!(((cr.xi * dir).arg()).abs() <= 1e-9);
            assert!((f.eval(cr.preimage).unwrap() - cr.xi).norm() <= 1e-8 * (1.0 + cr.xi.norm()));
        }
        // parity: winding change across each simple crossing is +-1
        for cr in &crossings {
            if cr.kind != CrossingKind::SimpleFold {
                continue;
            }
            let r = cr.xi.norm();
            let above = Complex64::from_polar(r + 1e-4, theta);
            let below = Complex64::from_polar(r - 1e-4, theta);
            let wa = geom.winding_sum(above).unwrap();
            let wb = geom.winding_sum(below).unwrap();
            assert_eq!((wa - wb).abs(), 1, "crossing at |xi| = {r}");
        }
    }

    #[test]
    fn tangent_consistency_against_polyline() {
        let f = HarmonicMapping::mpw(5, 0.6).unwrap();
        let geom = Geometry::new(&f, 2048).unwrap();
        for caustic in geom.caustics() {
            let scale = caustic
                .tangents
                .iter()
                .map(|t| t.norm())
                .fold(0.0, f64::max);
            for k in 1..caustic.points.len() - 1 {
                let tau = caustic.tangents[k];
                if caustic.psi[k].abs() < 1e-2 * scale {
                    continue;
                }
                let fd = (caustic.points[k + 1] - caustic.points[k - 1])
                    / c(caustic.params[k + 1] - caustic.params[k - 1], 0.0);
                let dang = (fd / tau).arg().abs();
                assert!(dang <= 1e-3, "angular error {dang} at node {k}");
            }
        }
    }

    #[test]
    fn guard_violation_near_caustic() {
        let f = HarmonicMapping::mpw(5, 0.6).unwrap();
        let geom = Geometry::new(&f, 512).unwrap();
        let node = geom.caustics()[0].points[10];
        assert!(matches!(
            geom.winding_sum(node),
            Err(Error::GuardViolation { .. })
        ));
    }

    #[test]
    fn isolated_points_diagnostic() {
        // f = z^2 + conj(z^3): dz = 2z and conj-part 3z^2 share the root 0;
        // omega = 3z/2 has modulus 0 there: isolated critical point
        let f = HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 0.0, 1.0])),
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 0.0, 0.0, 1.0])),
            Vec::new(),
        )
        .unwrap();
        let pts = isolated_critical_points(&f).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].norm() < 1e-9);
    }
}
