//! The harmonic mapping `f(z) = r(z) + conj(s(z)) + sum 2 A_j log|z - z_j|`
//! with rational `r`, `s`: evaluation, Wirtinger derivatives, Jacobian,
//! second dilatation, local Taylor data, and the pole inventory that drives
//! the initial phase of the solver.
//!
//! Also provides builders for the standard test families and the JSON
//! mapping-spec exchange format.

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::rational::{LaurentHead, PoleSite, RationalFunction};
use crate::tol;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// One logarithmic term `2 A log|z - anchor|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogTerm {
    pub anchor: Complex64,
    pub coeff: Complex64,
}

/// First- and second-order Taylor data of the analytic and co-analytic
/// parts at a point: `f(z) = a0 + a1 u + a2 u^2 + conj(b0 + b1 u + b2 u^2)
/// + O(u^3)` with `u = z - z0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalJet {
    pub a1: Complex64,
    pub b1: Complex64,
    pub a2: Complex64,
    pub b2: Complex64,
}

impl LocalJet {
    /// The transversal direction `c = -(a2 conj(b1)/a1 + conj(b2) a1/conj(b1))`
    /// along which a fold unfolds into two solutions.
    pub fn fold_direction(&self) -> Complex64 {
        -(self.a2 * self.b1.conj() / self.a1 + self.b2.conj() * self.a1 / self.b1.conj())
    }
}

/// A pole of the mapping with the Laurent data of both parts.
#[derive(Debug, Clone)]
pub struct PoleInfo {
    pub location: PoleSite,
    pub order: usize,
    /// Top coefficient of the analytic part at the shared order (0 when the
    /// analytic part is less singular).
    pub a_top: Complex64,
    /// Top coefficient of the co-analytic part at the shared order.
    pub b_top: Complex64,
    /// `a_0 + conj(b_0)`: the smooth part of `f` at the pole, including the
    /// values of the other logarithmic terms there.
    pub smooth_const: Complex64,
    /// Coefficient of the local `2 A log` term (for the pole at infinity,
    /// `-sum A_j`).
    pub log_coeff: Complex64,
    pub a_head: Option<LaurentHead>,
    pub b_head: Option<LaurentHead>,
}

#[derive(Debug, Clone)]
pub struct HarmonicMapping {
    r: RationalFunction,
    s: RationalFunction,
    log_terms: Vec<LogTerm>,
    poles: Vec<PoleInfo>,
    /// Logarithmic anchors that do not sit on a series pole. The mapping
    /// stays evaluable but admits no non-degenerate local form there, so
    /// the solver refuses it.
    flagged_anchors: Vec<Complex64>,
    /// Net log coefficient when the growth at infinity is logarithmic only.
    flagged_log_at_infinity: Option<Complex64>,
    wirt: OnceLock<(RationalFunction, RationalFunction)>,
    wirt_d: OnceLock<(RationalFunction, RationalFunction)>,
}

fn check_finite_poly(p: &Polynomial, what: &str) -> Result<()> {
    if p.coeffs().iter().any(|c| !c.is_finite()) {
        return Err(Error::Invalid(format!("non-finite coefficient in {what}")));
    }
    Ok(())
}

impl HarmonicMapping {
    /// Builds a mapping and verifies non-degeneracy at every pole:
    /// `|a_{-n}| != |b_{-n}|` with a relative gap, and no pure-log
    /// singularities (those admit no non-degenerate local form).
    pub fn new(
        r: RationalFunction,
        s: RationalFunction,
        log_terms: Vec<LogTerm>,
    ) -> Result<Self> {
        check_finite_poly(r.numerator(), "r numerator")?;
        check_finite_poly(r.denominator(), "r denominator")?;
        check_finite_poly(s.numerator(), "s numerator")?;
        check_finite_poly(s.denominator(), "s denominator")?;
        for t in &log_terms {
            if !t.anchor.is_finite() || !t.coeff.is_finite() {
                return Err(Error::Invalid("non-finite logarithmic term".into()));
            }
        }
        let log_terms: Vec<LogTerm> =
            log_terms.into_iter().filter(|t| t.coeff.norm() > 0.0).collect();
        let inventory = enumerate_poles(&r, &s, &log_terms)?;
        Ok(HarmonicMapping {
            r,
            s,
            log_terms,
            poles: inventory.poles,
            flagged_anchors: inventory.flagged_anchors,
            flagged_log_at_infinity: inventory.flagged_log_at_infinity,
            wirt: OnceLock::new(),
            wirt_d: OnceLock::new(),
        })
    }

    /// Whether the pole inventory supports the solver: every singularity
    /// must carry a non-degenerate series pole.
    pub fn solvable(&self) -> Result<()> {
        if let Some(z) = self.flagged_anchors.first() {
            return Err(Error::DegeneratePole {
                location: Some(*z),
                detail: "logarithmic anchor without a series pole".into(),
            });
        }
        if self.flagged_log_at_infinity.is_some() {
            return Err(Error::DegeneratePole {
                location: None,
                detail: "logarithmic growth at infinity without a series pole".into(),
            });
        }
        Ok(())
    }

    pub fn analytic_part(&self) -> &RationalFunction {
        &self.r
    }

    pub fn coanalytic_part(&self) -> &RationalFunction {
        &self.s
    }

    pub fn log_terms(&self) -> &[LogTerm] {
        &self.log_terms
    }

    pub fn poles(&self) -> &[PoleInfo] {
        &self.poles
    }

    /// `P(f)`: the sum of all pole orders, the base solution count far out.
    pub fn total_pole_order(&self) -> usize {
        self.poles.iter().map(|p| p.order).sum()
    }

    /// Modulus beyond which a Newton iterate counts as escaped.
    pub fn escape_radius(&self) -> f64 {
        let pole_scale = self
            .poles
            .iter()
            .filter_map(|p| match p.location {
                PoleSite::Finite(z) => Some(z.norm()),
                PoleSite::Infinity => None,
            })
            .fold(0.0, f64::max);
        tol::ESCAPE_FACTOR * (1.0 + pole_scale)
    }

    /// `f(z)`; errors within the numeric pole/anchor neighborhoods.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let mut v = self.r.eval(z)? + self.s.eval(z)?.conj();
        for t in &self.log_terms {
            let d = (z - t.anchor).norm();
            if d <= tol::POLE_EVAL_TOL * (1.0 + t.anchor.norm()) {
                return Err(Error::PoleProximity { z });
            }
            v += t.coeff * 2.0 * d.ln();
        }
        Ok(v)
    }

    /// The pair `(d_z f, conj(d_zbar f))` as rational functions; the
    /// logarithmic terms contribute simple poles to both.
    pub fn wirtinger(&self) -> (&RationalFunction, &RationalFunction) {
        let (a, b) = self.wirt.get_or_init(|| {
            let mut dz = self.r.derivative();
            let mut dzbar = self.s.derivative();
            for t in &self.log_terms {
                dz = dz.add(&RationalFunction::simple_pole(t.coeff, t.anchor));
                dzbar = dzbar.add(&RationalFunction::simple_pole(t.coeff.conj(), t.anchor));
            }
            (dz, dzbar)
        });
        (a, b)
    }

    fn wirtinger_derivatives(&self) -> (&RationalFunction, &RationalFunction) {
        let (a, b) = self.wirt_d.get_or_init(|| {
            let (dz, dzbar) = self.wirtinger();
            (dz.derivative(), dzbar.derivative())
        });
        (a, b)
    }

    /// `J_f(z) = |d_z f|^2 - |d_zbar f|^2`.
    pub fn jacobian(&self, z: Complex64) -> Result<f64> {
        let (dz, dzbar) = self.wirtinger();
        Ok(dz.eval(z)?.norm_sqr() - dzbar.eval(z)?.norm_sqr())
    }

    /// Second complex dilatation `omega = conj(d_zbar f) / d_z f`,
    /// normalized with removable singularities cancelled.
    pub fn dilatation(&self) -> Result<RationalFunction> {
        let (dz, dzbar) = self.wirtinger();
        if dz.is_zero() {
            return Err(Error::DegenerateMapping(
                "analytic derivative vanishes identically".into(),
            ));
        }
        if dzbar.is_zero() {
            return Ok(RationalFunction::zero());
        }
        dzbar.div(dz)
    }

    /// Taylor data `(a1, b1, a2, b2)` at a regular point.
    pub fn local_jet(&self, z0: Complex64) -> Result<LocalJet> {
        let (dz, dzbar) = self.wirtinger();
        let (ddz, ddzbar) = self.wirtinger_derivatives();
        Ok(LocalJet {
            a1: dz.eval(z0)?,
            b1: dzbar.eval(z0)?,
            a2: ddz.eval(z0)? * 0.5,
            b2: ddzbar.eval(z0)? * 0.5,
        })
    }

    // ---- builders -------------------------------------------------------

    /// `f(z) = (z-1)^n + z^n + conj(i (z-1)^n - i z^n)`: a harmonic
    /// polynomial with the maximal number `n^2` of zeros.
    pub fn wilmshurst(n: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::Invalid("wilmshurst requires n >= 1".into()));
        }
        let shifted = binomial_expansion(n); // (z-1)^n
        let n = n as usize;
        let mut p = vec![Complex64::new(0.0, 0.0); n + 1];
        let mut q = vec![Complex64::new(0.0, 0.0); n + 1];
        for k in 0..=n {
            p[k] = Complex64::new(shifted[k], 0.0);
            q[k] = Complex64::new(0.0, shifted[k]);
        }
        p[n] += Complex64::new(1.0, 0.0);
        q[n] -= Complex64::new(0.0, 1.0);
        HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::new(p)),
            RationalFunction::from_poly(Polynomial::new(q)),
            Vec::new(),
        )
    }

    /// `f(z) = z - conj(z^{n-1} / (z^n - rho^n))`: the point-lens family
    /// with `3n+1` zeros below the critical radius and `n+1` above it.
    pub fn mpw(n: u32, rho: f64) -> Result<Self> {
        if n < 3 || !(rho > 0.0) {
            return Err(Error::Invalid("mpw requires n >= 3 and rho > 0".into()));
        }
        let n = n as usize;
        let r = RationalFunction::from_poly(Polynomial::from_real(&[0.0, 1.0]));
        let num = Polynomial::monomial(Complex64::new(-1.0, 0.0), n - 1);
        let mut den = vec![0.0; n + 1];
        den[0] = -rho.powi(n as i32);
        den[n] = 1.0;
        let s = RationalFunction::new(num, Polynomial::from_real(&den))?;
        HarmonicMapping::new(r, s, Vec::new())
    }

    /// `f(z) = z - conj((1-eps) z^{n-1}/(z^n - rho^n) + eps/z)`: the
    /// perturbed lens family with `5n` zeros in its maximal regime.
    pub fn rhie(n: u32, rho: f64, eps: f64) -> Result<Self> {
        if n < 3 || !(rho > 0.0) || !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Invalid(
                "rhie requires n >= 3, rho > 0, 0 < eps < 1".into(),
            ));
        }
        let n = n as usize;
        let rho_n = rho.powi(n as i32);
        let r = RationalFunction::from_poly(Polynomial::from_real(&[0.0, 1.0]));
        // s = -((1-eps) z^{n-1}/(z^n - rho^n) + eps/z)
        //   = -(z^n - eps rho^n) / (z^{n+1} - rho^n z)
        let mut num = vec![0.0; n + 1];
        num[0] = eps * rho_n;
        num[n] = -1.0;
        let mut den = vec![0.0; n + 2];
        den[1] = -rho_n;
        den[n + 1] = 1.0;
        let s = RationalFunction::new(Polynomial::from_real(&num), Polynomial::from_real(&den))?;
        HarmonicMapping::new(r, s, Vec::new())
    }

    /// `f(z) = z^2 + conj(1/z + 1/(z+1)) + 2 log|z|`: the transcendental
    /// example with a logarithmic pole.
    pub fn log_example() -> Self {
        let r = RationalFunction::from_poly(Polynomial::from_real(&[0.0, 0.0, 1.0]));
        // 1/z + 1/(z+1) = (2z + 1)/(z^2 + z)
        let s = RationalFunction::new(
            Polynomial::from_real(&[1.0, 2.0]),
            Polynomial::from_real(&[0.0, 1.0, 1.0]),
        )
        .expect("static denominator");
        HarmonicMapping::new(
            r,
            s,
            vec![LogTerm {
                anchor: Complex64::new(0.0, 0.0),
                coeff: Complex64::new(1.0, 0.0),
            }],
        )
        .expect("log example is non-degenerate")
    }

    /// `f(z) = z - 1/conj(z)`: the point-lens with a degenerate (not light)
    /// caustic; `f` maps the whole unit circle onto 0.
    pub fn chang_refsdal() -> Self {
        let r = RationalFunction::from_poly(Polynomial::from_real(&[0.0, 1.0]));
        let s = RationalFunction::new(
            Polynomial::from_real(&[-1.0]),
            Polynomial::from_real(&[0.0, 1.0]),
        )
        .expect("static denominator");
        HarmonicMapping::new(r, s, Vec::new()).expect("chang-refsdal is non-degenerate")
    }

    // ---- mapping-spec exchange ------------------------------------------

    pub fn to_spec(&self) -> MappingSpec {
        fn enc(p: &Polynomial) -> Vec<[f64; 2]> {
            p.coeffs().iter().map(|c| [c.re, c.im]).collect()
        }
        MappingSpec {
            r_num: enc(self.r.numerator()),
            r_den: enc(self.r.denominator()),
            s_num: enc(self.s.numerator()),
            s_den: enc(self.s.denominator()),
            logs: self
                .log_terms
                .iter()
                .map(|t| LogTermSpec {
                    anchor: [t.anchor.re, t.anchor.im],
                    coeff: [t.coeff.re, t.coeff.im],
                })
                .collect(),
        }
    }

    pub fn from_spec(spec: &MappingSpec) -> Result<Self> {
        fn dec(v: &[[f64; 2]]) -> Polynomial {
            Polynomial::new(v.iter().map(|c| Complex64::new(c[0], c[1])).collect())
        }
        let r_den = dec(&spec.r_den);
        let s_den = dec(&spec.s_den);
        if r_den.is_zero() || s_den.is_zero() {
            return Err(Error::Invalid("mapping spec has a zero denominator".into()));
        }
        let r = RationalFunction::new(dec(&spec.r_num), r_den)?;
        let s = RationalFunction::new(dec(&spec.s_num), s_den)?;
        let logs = spec
            .logs
            .iter()
            .map(|t| LogTerm {
                anchor: Complex64::new(t.anchor[0], t.anchor[1]),
                coeff: Complex64::new(t.coeff[0], t.coeff[1]),
            })
            .collect();
        HarmonicMapping::new(r, s, logs)
    }
}

/// Critical radius of the `mpw`/`rhie` families:
/// `rho_c = ((n-2)/n)^(1/2) (2/(n-2))^(1/n)`.
pub fn rho_critical(n: u32) -> Result<f64> {
    if n < 3 {
        return Err(Error::Invalid("rho_critical requires n >= 3".into()));
    }
    let n = n as f64;
    Ok(((n - 2.0) / n).sqrt() * (2.0 / (n - 2.0)).powf(1.0 / n))
}

/// Coefficients of `(z - 1)^n`, exact in f64 for the sizes used here.
fn binomial_expansion(n: u32) -> Vec<f64> {
    let n = n as usize;
    let mut c = vec![0.0; n + 1];
    c[0] = 1.0;
    for _ in 0..n {
        // multiply by (z - 1)
        for k in (1..=n).rev() {
            c[k] = c[k - 1] - c[k];
        }
        c[0] = -c[0];
    }
    c
}

/// On-disk mapping format: coefficient arrays in ascending degree, each
/// complex number a `[re, im]` pair.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MappingSpec {
    pub r_num: Vec<[f64; 2]>,
    pub r_den: Vec<[f64; 2]>,
    pub s_num: Vec<[f64; 2]>,
    pub s_den: Vec<[f64; 2]>,
    #[serde(default)]
    pub logs: Vec<LogTermSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LogTermSpec {
    pub anchor: [f64; 2],
    pub coeff: [f64; 2],
}

// ---- pole inventory ------------------------------------------------------

fn cluster_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut centers: Vec<(Complex64, usize)> = Vec::new();
    for &r in roots {
        match centers
            .iter_mut()
            .find(|(c, _)| (*c - r).norm() <= 1e-6 * (1.0 + r.norm()))
        {
            Some((c, count)) => {
                // running mean sharpens multiple-root clusters
                *c = (*c * *count as f64 + r) / (*count as f64 + 1.0);
                *count += 1;
            }
            None => centers.push((r, 1)),
        }
    }
    centers.into_iter().map(|(c, _)| c).collect()
}

struct PoleInventory {
    poles: Vec<PoleInfo>,
    flagged_anchors: Vec<Complex64>,
    flagged_log_at_infinity: Option<Complex64>,
}

fn enumerate_poles(
    r: &RationalFunction,
    s: &RationalFunction,
    log_terms: &[LogTerm],
) -> Result<PoleInventory> {
    let mut locations: Vec<Complex64> = Vec::new();
    let push_location = |z: Complex64, locations: &mut Vec<Complex64>| {
        if !locations
            .iter()
            .any(|c| (*c - z).norm() <= 1e-6 * (1.0 + z.norm()))
        {
            locations.push(z);
        }
    };
    for rat in [r, s] {
        if rat.is_zero() {
            continue;
        }
        if let Some(d) = rat.denominator().degree() {
            if d >= 1 {
                let roots = rat.denominator().roots(tol::ROOT_RESIDUAL_TOL)?;
                for c in cluster_roots(&roots) {
                    push_location(c, &mut locations);
                }
            }
        }
    }
    let mut flagged_anchors: Vec<Complex64> = Vec::new();
    for t in log_terms {
        if !locations
            .iter()
            .any(|c| (*c - t.anchor).norm() <= 1e-6 * (1.0 + t.anchor.norm()))
        {
            flagged_anchors.push(t.anchor);
        }
    }

    let mut poles = Vec::new();
    for z0 in locations {
        let a_head = r.laurent_head(PoleSite::Finite(z0)).ok();
        let b_head = s.laurent_head(PoleSite::Finite(z0)).ok();
        let order_a = a_head.as_ref().map_or(0, |h| h.order);
        let order_b = b_head.as_ref().map_or(0, |h| h.order);
        let order = order_a.max(order_b);
        if order == 0 {
            // a cancelled denominator root; nothing singular here
            continue;
        }
        let a_top = a_head
            .as_ref()
            .filter(|h| h.order == order)
            .map_or(Complex64::new(0.0, 0.0), |h| h.top());
        let b_top = b_head
            .as_ref()
            .filter(|h| h.order == order)
            .map_or(Complex64::new(0.0, 0.0), |h| h.top());
        check_gap(a_top, b_top, Some(z0))?;
        let a0 = match &a_head {
            Some(h) => h.constant,
            None => r.eval(z0)?,
        };
        let b0 = match &b_head {
            Some(h) => h.constant,
            None => s.eval(z0)?,
        };
        let mut smooth = a0 + b0.conj();
        let mut log_coeff = Complex64::new(0.0, 0.0);
        for t in log_terms {
            if (t.anchor - z0).norm() <= 1e-6 * (1.0 + z0.norm()) {
                log_coeff += t.coeff;
            } else {
                smooth += t.coeff * 2.0 * (z0 - t.anchor).norm().ln();
            }
        }
        poles.push(PoleInfo {
            location: PoleSite::Finite(z0),
            order,
            a_top,
            b_top,
            smooth_const: smooth,
            log_coeff,
            a_head,
            b_head,
        });
    }

    // the point at infinity
    let n_r = if r.is_zero() { isize::MIN } else { r.degree_at_infinity() };
    let n_s = if s.is_zero() { isize::MIN } else { s.degree_at_infinity() };
    let order = n_r.max(n_s).max(0);
    let log_sum: Complex64 = log_terms.iter().map(|t| t.coeff).sum();
    let mut flagged_log_at_infinity = None;
    if order >= 1 {
        let order = order as usize;
        let a_head = r.laurent_head(PoleSite::Infinity).ok();
        let b_head = s.laurent_head(PoleSite::Infinity).ok();
        let a_top = a_head
            .as_ref()
            .filter(|h| h.order == order)
            .map_or(Complex64::new(0.0, 0.0), |h| h.top());
        let b_top = b_head
            .as_ref()
            .filter(|h| h.order == order)
            .map_or(Complex64::new(0.0, 0.0), |h| h.top());
        check_gap(a_top, b_top, None)?;
        let a0 = match &a_head {
            Some(h) => h.constant,
            None => r.value_at_infinity().unwrap_or_default(),
        };
        let b0 = match &b_head {
            Some(h) => h.constant,
            None => s.value_at_infinity().unwrap_or_default(),
        };
        poles.push(PoleInfo {
            location: PoleSite::Infinity,
            order,
            a_top,
            b_top,
            smooth_const: a0 + b0.conj(),
            log_coeff: -log_sum,
            a_head,
            b_head,
        });
    } else if log_sum.norm() > 0.0 {
        flagged_log_at_infinity = Some(-log_sum);
    }
    Ok(PoleInventory {
        poles,
        flagged_anchors,
        flagged_log_at_infinity,
    })
}

fn check_gap(a: Complex64, b: Complex64, location: Option<Complex64>) -> Result<()> {
    let (na, nb) = (a.norm(), b.norm());
    let scale = na.max(nb);
    if scale == 0.0 || (na - nb).abs() < tol::NONDEGENERACY_GAP * scale {
        return Err(Error::DegeneratePole {
            location,
            detail: format!("|a_top| = {na:.3e} vs |b_top| = {nb:.3e}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        let f = HarmonicMapping::chang_refsdal();
        let z = c(3f64.sqrt(), 0.0);
        let want = 2.0 / 3f64.sqrt();
        assert!((f.eval(z).unwrap() - c(want, 0.0)).norm() < 1e-14);

        let f = HarmonicMapping::log_example();
        assert!((f.eval(c(1.0, 0.0)).unwrap() - c(2.5, 0.0)).norm() < 1e-14);

        // pure log term: r = s = 0, A = 1 at the origin; evaluable but
        // flagged unsolvable
        let f = HarmonicMapping::new(
            RationalFunction::zero(),
            RationalFunction::zero(),
            vec![LogTerm {
                anchor: c(0.0, 0.0),
                coeff: c(1.0, 0.0),
            }],
        )
        .unwrap();
        let e = std::f64::consts::E;
        assert!((f.eval(c(e, 0.0)).unwrap() - c(2.0, 0.0)).norm() < 1e-14);
        assert!(f.solvable().is_err());
    }

    #[test]
    fn wirtinger_examples() {
        let f = HarmonicMapping::chang_refsdal();
        let (dz, dzbar) = f.wirtinger();
        assert!((dz.eval(c(5.0, 1.0)).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
        // conj(d_zbar f) = s' = 1/z^2
        let z = c(2.0, 1.0);
        assert!((dzbar.eval(z).unwrap() - (z * z).finv()).norm() < 1e-14);

        let f = HarmonicMapping::log_example();
        let (dz, _) = f.wirtinger();
        // 2z + 1/z
        let z = c(1.5, -0.5);
        assert!((dz.eval(z).unwrap() - (2.0 * z + z.finv())).norm() < 1e-13);

        // analytic mapping: co-analytic derivative is the zero function
        let f = HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 0.0, 1.0])),
            RationalFunction::zero(),
            Vec::new(),
        )
        .unwrap();
        assert!(f.wirtinger().1.is_zero());
    }

    #[test]
    fn jacobian_examples() {
        let f = HarmonicMapping::chang_refsdal();
        for k in 0..8 {
            let z = Complex64::from_polar(1.0, 0.3 + k as f64);
            assert!(f.jacobian(z).unwrap().abs() < 1e-12);
        }
        assert!((f.jacobian(c(2.0, 0.0)).unwrap() - 0.9375).abs() < 1e-14);

        let sq = HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 0.0, 1.0])),
            RationalFunction::zero(),
            Vec::new(),
        )
        .unwrap();
        assert!((sq.jacobian(c(1.0, 0.0)).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn dilatation_examples() {
        let f = HarmonicMapping::chang_refsdal();
        let om = f.dilatation().unwrap();
        let z = c(1.7, -0.3);
        assert!((om.eval(z).unwrap() - (z * z).finv()).norm() < 1e-13);

        let analytic = HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 0.0, 1.0])),
            RationalFunction::zero(),
            Vec::new(),
        )
        .unwrap();
        assert!(analytic.dilatation().unwrap().is_zero());

        // f = z + conj(z)/2: omega = 1/2
        let f = HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 1.0])),
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 0.5])),
            Vec::new(),
        )
        .unwrap();
        let om = f.dilatation().unwrap();
        assert!(om.is_constant());
        assert!((om.eval(c(9.0, 9.0)).unwrap() - c(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn local_jet_examples() {
        // f = z + 2iz^2 + conj(z)
        let f = HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::new(vec![
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 2.0),
            ])),
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 1.0])),
            Vec::new(),
        )
        .unwrap();
        let jet = f.local_jet(c(0.0, 0.0)).unwrap();
        assert!((jet.a1 - c(1.0, 0.0)).norm() < 1e-14);
        assert!((jet.b1 - c(1.0, 0.0)).norm() < 1e-14);
        assert!((jet.a2 - c(0.0, 2.0)).norm() < 1e-14);
        assert!(jet.b2.norm() < 1e-14);

        // chang-refsdal at 1: s' = 1/z^2, s'' = -2/z^3
        let f = HarmonicMapping::chang_refsdal();
        let jet = f.local_jet(c(1.0, 0.0)).unwrap();
        assert!((jet.a1 - c(1.0, 0.0)).norm() < 1e-14);
        assert!((jet.b1 - c(1.0, 0.0)).norm() < 1e-14);
        assert!(jet.a2.norm() < 1e-14);
        assert!((jet.b2 - c(-1.0, 0.0)).norm() < 1e-13);

        // analytic z^2 at 1
        let sq = HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 0.0, 1.0])),
            RationalFunction::zero(),
            Vec::new(),
        )
        .unwrap();
        let jet = sq.local_jet(c(1.0, 0.0)).unwrap();
        assert!((jet.a1 - c(2.0, 0.0)).norm() < 1e-14);
        assert!(jet.b1.norm() < 1e-14);
    }

    #[test]
    fn pole_inventory() {
        let f = HarmonicMapping::mpw(7, 0.7).unwrap();
        assert_eq!(f.poles().len(), 8);
        assert_eq!(f.total_pole_order(), 8);
        let finite: Vec<_> = f
            .poles()
            .iter()
            .filter(|p| matches!(p.location, PoleSite::Finite(_)))
            .collect();
        assert_eq!(finite.len(), 7);
        for p in finite {
            assert_eq!(p.order, 1);
            if let PoleSite::Finite(z) = p.location {
                assert!((z.norm() - 0.7).abs() < 1e-9);
            }
            // residue of -z^{n-1}/(z^n - rho^n) is -1/n
            assert!((p.b_top - c(-1.0 / 7.0, 0.0)).norm() < 1e-9);
        }

        let f = HarmonicMapping::chang_refsdal();
        assert_eq!(f.total_pole_order(), 2);

        let f = HarmonicMapping::log_example();
        assert_eq!(f.poles().len(), 3);
        assert_eq!(f.total_pole_order(), 4);
        let inf = f
            .poles()
            .iter()
            .find(|p| matches!(p.location, PoleSite::Infinity))
            .unwrap();
        assert_eq!(inf.order, 2);
        assert!((inf.log_coeff - c(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn pole_counts_across_families() {
        for n in 3..=12 {
            let f = HarmonicMapping::mpw(n, 0.7).unwrap();
            assert_eq!(f.total_pole_order(), n as usize + 1, "mpw({n})");
            let f = HarmonicMapping::rhie(n, 0.7, 0.1).unwrap();
            assert_eq!(f.total_pole_order(), n as usize + 2, "rhie({n})");
        }
    }

    #[test]
    fn smooth_const_includes_other_logs() {
        // near the pole at -1, the log term at 0 contributes 2 log|-1| = 0;
        // near infinity nothing; near 0 the other pole's value enters
        let f = HarmonicMapping::log_example();
        let p0 = f
            .poles()
            .iter()
            .find(|p| matches!(p.location, PoleSite::Finite(z) if z.norm() < 1e-6))
            .unwrap();
        // r(0) = 0; s-part: 1/z + 1/(z+1) has constant term at 0 from
        // expanding: 1/(z+1) = 1 - z + ..., and 1/z principal; so b0 = 1
        assert!((p0.smooth_const - c(1.0, 0.0)).norm() < 1e-10);
        assert!((p0.log_coeff - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn builders_are_deterministic() {
        let a = HarmonicMapping::rhie(7, 0.7, 0.1).unwrap();
        let b = HarmonicMapping::rhie(7, 0.7, 0.1).unwrap();
        assert_eq!(a.coanalytic_part().numerator(), b.coanalytic_part().numerator());
        assert_eq!(a.coanalytic_part().denominator(), b.coanalytic_part().denominator());
    }

    #[test]
    fn wilmshurst_line_case() {
        // n = 1: f = 2z - 1 + conj(-i) is linear with one zero
        let f = HarmonicMapping::wilmshurst(1).unwrap();
        let z = c(0.5, -0.5);
        assert!(f.eval(z).unwrap().norm() < 1e-14);
    }

    #[test]
    fn rho_critical_values() {
        assert!((rho_critical(4).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let r3 = rho_critical(3).unwrap();
        assert!((r3 - (1.0f64 / 3.0).sqrt() * 2f64.powf(1.0 / 3.0)).abs() < 1e-15);
        assert!((r3 - 0.7274).abs() < 1e-4);
        for n in 3..=12 {
            let rc = rho_critical(n).unwrap();
            assert!(rc > 0.7 && rc < 1.0, "rho_c({n}) = {rc}");
        }
    }

    #[test]
    fn degenerate_poles_are_rejected() {
        // f = 1/z + conj(1/z): |a_{-1}| = |b_{-1}|
        let inv = RationalFunction::new(
            Polynomial::from_real(&[1.0]),
            Polynomial::from_real(&[0.0, 1.0]),
        )
        .unwrap();
        let err = HarmonicMapping::new(inv.clone(), inv, Vec::new()).unwrap_err();
        assert!(matches!(err, Error::DegeneratePole { .. }));

        // pure log anchor away from any pole: constructible, not solvable
        let f = HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::from_real(&[0.0, 1.0])),
            RationalFunction::zero(),
            vec![LogTerm {
                anchor: c(5.0, 0.0),
                coeff: c(1.0, 0.0),
            }],
        )
        .unwrap();
        assert!(matches!(f.solvable(), Err(Error::DegeneratePole { .. })));
    }

    #[test]
    fn spec_round_trip_is_exact() {
        for f in [
            HarmonicMapping::wilmshurst(3).unwrap(),
            HarmonicMapping::mpw(7, 0.7).unwrap(),
            HarmonicMapping::rhie(7, 0.7, 0.1).unwrap(),
            HarmonicMapping::log_example(),
            HarmonicMapping::chang_refsdal(),
        ] {
            let spec = f.to_spec();
            let json = serde_json::to_string(&spec).unwrap();
            let back: MappingSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(spec, back);
            let g = HarmonicMapping::from_spec(&back).unwrap();
            assert_eq!(f.analytic_part().numerator(), g.analytic_part().numerator());
            assert_eq!(f.coanalytic_part().numerator(), g.coanalytic_part().numerator());
            assert_eq!(f.coanalytic_part().denominator(), g.coanalytic_part().denominator());
        }
    }
}
