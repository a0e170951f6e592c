//! Rational functions over the complex numbers, with pole-aware evaluation
//! and Laurent data at finite poles and at infinity.

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::tol;
use num_complex::Complex64;

/// A quotient of polynomials. After construction the denominator is monic
/// and common roots (within tolerance) are cancelled, so denominator roots
/// are genuine poles.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
}

/// A pole location: a point of the plane or the point at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoleSite {
    Finite(Complex64),
    Infinity,
}

/// Principal part and constant term of a Laurent expansion.
///
/// At a finite pole `principal[k]` is `a_{-n+k}` for `k = 0..n`, so the
/// first entry is the top coefficient `a_{-n}`. At infinity the entries are
/// the polynomial-part coefficients `a_n, ..., a_1` in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentHead {
    pub site: PoleSite,
    pub order: usize,
    pub principal: Vec<Complex64>,
    pub constant: Complex64,
}

impl LaurentHead {
    /// Top (most singular) coefficient `a_{-n}` (or `a_n` at infinity).
    pub fn top(&self) -> Complex64 {
        self.principal[0]
    }

    /// Value of the singular part at `z` (finite poles only).
    pub fn principal_eval(&self, z: Complex64) -> Complex64 {
        let z0 = match self.site {
            PoleSite::Finite(z0) => z0,
            PoleSite::Infinity => panic!("principal_eval is for finite poles"),
        };
        let u = z - z0;
        let mut acc = Complex64::new(0.0, 0.0);
        // a_{-n} u^{-n} + ... + a_{-1} u^{-1}
        for &a in self.principal.iter() {
            acc = (acc + a) / u;
        }
        acc
    }
}

impl RationalFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Invalid("zero denominator".into()));
        }
        let mut r = RationalFunction { num, den };
        r.reduce();
        Ok(r)
    }

    pub fn from_poly(num: Polynomial) -> Self {
        RationalFunction {
            num,
            den: Polynomial::one(),
        }
    }

    pub fn zero() -> Self {
        RationalFunction::from_poly(Polynomial::zero())
    }

    pub fn constant(c: Complex64) -> Self {
        RationalFunction::from_poly(Polynomial::constant(c))
    }

    /// The simple-pole term `a / (z - z0)`.
    pub fn simple_pole(a: Complex64, z0: Complex64) -> Self {
        RationalFunction {
            num: Polynomial::constant(a),
            den: Polynomial::new(vec![-z0, Complex64::new(1.0, 0.0)]),
        }
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.num
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `true` when both numerator and denominator are constants.
    pub fn is_constant(&self) -> bool {
        self.num.degree().unwrap_or(0) == 0 && self.den.degree() == Some(0)
    }

    /// Degree as a map on the sphere: `max(deg num, deg den)`; `None` for
    /// the zero function.
    pub fn map_degree(&self) -> Option<usize> {
        let dn = self.num.degree()?;
        Some(dn.max(self.den.degree().unwrap_or(0)))
    }

    /// `deg num - deg den`; positive means a pole at infinity of that order.
    pub fn degree_at_infinity(&self) -> isize {
        match self.num.degree() {
            None => isize::MIN,
            Some(dn) => dn as isize - self.den.degree().unwrap_or(0) as isize,
        }
    }

    /// Finite limit at infinity, if any: 0 when `deg num < deg den`, the
    /// leading-coefficient ratio when degrees match.
    pub fn value_at_infinity(&self) -> Option<Complex64> {
        match self.degree_at_infinity() {
            d if d > 0 => None,
            0 => Some(self.num.leading().unwrap() / self.den.leading().unwrap()),
            _ => Some(Complex64::new(0.0, 0.0)),
        }
    }

    /// Normalization: trim float dust, cancel common roots (value-tested,
    /// bounded degree), make the denominator monic.
    fn reduce(&mut self) {
        self.num.trim_relative(1e-14);
        self.den.trim_relative(1e-14);
        if self.num.is_zero() {
            self.den = Polynomial::one();
            return;
        }
        let den_deg = self.den.degree().unwrap_or(0);
        if den_deg >= 1 && den_deg <= tol::CANCEL_DEGREE_CAP {
            if let Ok(den_roots) = self.den.roots(tol::ROOT_RESIDUAL_TOL) {
                for root in den_roots {
                    if self.num.is_zero() {
                        break;
                    }
                    let num_scale = self.num.eval_abs(root.norm()).max(f64::MIN_POSITIVE);
                    let den_scale = self.den.eval_abs(root.norm()).max(f64::MIN_POSITIVE);
                    if self.num.eval(root).norm() <= tol::CANCEL_TOL * num_scale
                        && self.den.eval(root).norm() <= tol::CANCEL_TOL * den_scale
                    {
                        let (qn, _) = self.num.deflate(root);
                        let (qd, _) = self.den.deflate(root);
                        self.num = qn;
                        self.den = qd;
                    }
                }
            }
        }
        if self.num.is_zero() {
            self.den = Polynomial::one();
            return;
        }
        let lead = self.den.leading().expect("nonzero denominator");
        self.num = self.num.scale(lead.finv());
        self.den = self.den.scale(lead.finv());
    }

    /// Scale of the denominator at `|z|`: `max|coeff| * max(1,|z|)^deg`.
    /// Against this, a small value means `z` sits next to a pole.
    fn den_scale(&self, z_abs: f64) -> f64 {
        let max_coeff = self
            .den
            .coeffs()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let deg = self.den.degree().unwrap_or(0) as i32;
        (max_coeff * z_abs.max(1.0).powi(deg)).max(f64::MIN_POSITIVE)
    }

    /// Largest `|z|` at which direct Horner evaluation cannot overflow.
    fn direct_eval_radius(&self) -> f64 {
        let deg = self
            .num
            .degree()
            .unwrap_or(0)
            .max(self.den.degree().unwrap_or(0))
            .max(1);
        10f64.powf(250.0 / deg as f64)
    }

    /// Evaluation; errors within the numeric neighborhood of a pole. Far
    /// out, where `|z|^deg` overflows, the quotient is formed from the
    /// reversed coefficients at `1/z`, leaving only the bounded power
    /// `z^(deg num - deg den)`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if self.num.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if z.norm() <= self.direct_eval_radius() {
            let d = self.den.eval(z);
            if d.norm() <= tol::POLE_EVAL_TOL * self.den_scale(z.norm()) {
                return Err(Error::PoleProximity { z });
            }
            return Ok(self.num.eval(z) / d);
        }
        let w = z.finv();
        let nv = eval_reversed(&self.num, w);
        let dv = eval_reversed(&self.den, w);
        let den_scale = self
            .den
            .coeffs()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        if dv.norm() <= tol::POLE_EVAL_TOL * den_scale {
            return Err(Error::PoleProximity { z });
        }
        let dn = self.num.degree().unwrap_or(0) as i32;
        let dd = self.den.degree().unwrap_or(0) as i32;
        Ok(nv / dv * w.powi(dd - dn))
    }

    /// Quotient-rule derivative, normalized.
    pub fn derivative(&self) -> RationalFunction {
        if self.num.is_zero() {
            return RationalFunction::zero();
        }
        if self.den.degree() == Some(0) {
            return RationalFunction {
                num: self.num.derivative().scale(self.den.leading().unwrap().finv()),
                den: Polynomial::one(),
            };
        }
        let num = &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative());
        let den = &self.den * &self.den;
        let mut r = RationalFunction { num, den };
        r.reduce();
        r
    }

    pub fn add(&self, other: &RationalFunction) -> RationalFunction {
        let num = &(&self.num * &other.den) + &(&other.num * &self.den);
        let den = &self.den * &other.den;
        let mut r = RationalFunction { num, den };
        r.reduce();
        r
    }

    pub fn sub(&self, other: &RationalFunction) -> RationalFunction {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &RationalFunction) -> RationalFunction {
        let mut r = RationalFunction {
            num: &self.num * &other.num,
            den: &self.den * &other.den,
        };
        r.reduce();
        r
    }

    /// Quotient `self / other`; `other` must not be the zero function.
    pub fn div(&self, other: &RationalFunction) -> Result<RationalFunction> {
        if other.is_zero() {
            return Err(Error::Invalid("division by the zero function".into()));
        }
        let mut r = RationalFunction {
            num: &self.num * &other.den,
            den: &self.den * &other.num,
        };
        r.reduce();
        Ok(r)
    }

    pub fn scale(&self, a: Complex64) -> RationalFunction {
        RationalFunction {
            num: self.num.scale(a),
            den: self.den.clone(),
        }
    }

    /// The rational function `w -> self(1/w)`.
    pub fn reciprocal_argument(&self) -> RationalFunction {
        if self.num.is_zero() {
            return RationalFunction::zero();
        }
        let dn = self.num.degree().unwrap();
        let dd = self.den.degree().unwrap_or(0);
        let num_rev = self.num.reversed();
        let den_rev = self.den.reversed();
        let (num, den) = if dn >= dd {
            (
                num_rev,
                &den_rev * &Polynomial::monomial(Complex64::new(1.0, 0.0), dn - dd),
            )
        } else {
            (
                &num_rev * &Polynomial::monomial(Complex64::new(1.0, 0.0), dd - dn),
                den_rev,
            )
        };
        // no reduce: the substitution preserves coprimality, and keeping the
        // monomial factor intact is exactly what the pole analysis wants
        let lead = den.leading().expect("nonzero denominator");
        RationalFunction {
            num: num.scale(lead.finv()),
            den: den.scale(lead.finv()),
        }
    }

    /// Multiplicity of `z0` as a denominator root, by value-tested deflation.
    fn pole_multiplicity(&self, z0: Complex64) -> usize {
        let mut mult = 0;
        let mut den = self.den.clone();
        while let Some(d) = den.degree() {
            if d == 0 {
                break;
            }
            let scale = den.eval_abs(z0.norm()).max(f64::MIN_POSITIVE);
            if den.eval(z0).norm() <= 1e-7 * scale {
                let (q, _) = den.deflate(z0);
                den = q;
                mult += 1;
            } else {
                break;
            }
        }
        mult
    }

    /// Laurent data at a pole: order `n`, principal coefficients
    /// `a_{-n}, ..., a_{-1}` and the constant term `a_0`. At infinity the
    /// computation is routed through `w = 1/z`.
    pub fn laurent_head(&self, site: PoleSite) -> Result<LaurentHead> {
        match site {
            PoleSite::Infinity => {
                if self.degree_at_infinity() <= 0 {
                    return Err(Error::NotAPole { z: None });
                }
                let sub = self.reciprocal_argument();
                let head = sub.laurent_head(PoleSite::Finite(Complex64::new(0.0, 0.0)))?;
                Ok(LaurentHead {
                    site: PoleSite::Infinity,
                    order: head.order,
                    principal: head.principal,
                    constant: head.constant,
                })
            }
            PoleSite::Finite(z0) => {
                let m = self.pole_multiplicity(z0);
                if m == 0 || self.num.is_zero() {
                    return Err(Error::NotAPole { z: Some(z0) });
                }
                // den = (z - z0)^m * E with E(z0) != 0
                let mut e = self.den.clone();
                for _ in 0..m {
                    let (q, _) = e.deflate(z0);
                    e = q;
                }
                let num_shift = self.num.taylor_shift(z0);
                let e_shift = e.taylor_shift(z0);
                let phi = series_div(&num_shift, &e_shift, m + 1);
                // allow for a numerator that also vanishes at z0
                let phi_scale = phi.iter().map(|c| c.norm()).fold(0.0, f64::max);
                let lead_idx = phi
                    .iter()
                    .position(|c| c.norm() > tol::CANCEL_TOL * phi_scale)
                    .unwrap_or(phi.len());
                if lead_idx >= m {
                    return Err(Error::NotAPole { z: Some(z0) });
                }
                Ok(LaurentHead {
                    site,
                    order: m - lead_idx,
                    principal: phi[lead_idx..m].to_vec(),
                    constant: phi[m],
                })
            }
        }
    }
}

/// `p(z) / z^deg` evaluated as a polynomial in `w = 1/z` (forward Horner
/// over the coefficients).
fn eval_reversed(p: &Polynomial, w: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in p.coeffs().iter() {
        acc = acc * w + c;
    }
    acc
}

/// Power-series quotient `n / e` through `order` terms; `e[0] != 0`.
fn series_div(n: &[Complex64], e: &[Complex64], terms: usize) -> Vec<Complex64> {
    let e0 = e[0];
    let mut out = vec![Complex64::new(0.0, 0.0); terms];
    for k in 0..terms {
        let mut acc = n.get(k).copied().unwrap_or_else(|| Complex64::new(0.0, 0.0));
        for j in 0..k {
            if let Some(&ej) = e.get(k - j) {
                acc -= out[j] * ej;
            }
        }
        out[k] = acc / e0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rat(num: &[f64], den: &[f64]) -> RationalFunction {
        RationalFunction::new(Polynomial::from_real(num), Polynomial::from_real(den)).unwrap()
    }

    #[test]
    fn eval_arithmetic() {
        // z^2 / (z^3 - 0.343) at 1 -> 1/0.657
        let r = rat(&[0.0, 0.0, 1.0], &[-0.343, 0.0, 0.0, 1.0]);
        let v = r.eval(c(1.0, 0.0)).unwrap();
        assert!((v.re - 1.0 / 0.657).abs() < 1e-14);
        assert!(v.im.abs() < 1e-14);

        // identity
        let id = rat(&[0.0, 1.0], &[1.0]);
        assert_eq!(id.eval(c(3.0, 4.0)).unwrap(), c(3.0, 4.0));

        // 1/z near 0
        let inv = rat(&[1.0], &[0.0, 1.0]);
        assert!(matches!(
            inv.eval(c(1e-16, 0.0)),
            Err(Error::PoleProximity { .. })
        ));
    }

    #[test]
    fn eval_far_out_does_not_overflow() {
        // degree-120 denominator: |z|^120 overflows long before 1e300
        let mut den = vec![0.0; 121];
        den[0] = -0.5;
        den[120] = 1.0;
        let mut num = vec![0.0; 122];
        num[121] = 1.0;
        let r = rat(&num, &den); // z^121 / (z^120 - 0.5), behaves like z far out
        for &m in &[1e4, 1e8, 1e12] {
            let z = c(m, m);
            let v = r.eval(z).unwrap();
            assert!(v.is_finite());
            assert!((v - z).norm() <= 1e-9 * z.norm(), "at |z| = {m}");
        }
    }

    #[test]
    fn derivative_rules() {
        // (1/z)' = -1/z^2
        let inv = rat(&[1.0], &[0.0, 1.0]);
        let d = inv.derivative();
        let v = d.eval(c(2.0, 0.0)).unwrap();
        assert!((v - c(-0.25, 0.0)).norm() < 1e-14);

        // (z^2)' = 2z
        let sq = rat(&[0.0, 0.0, 1.0], &[1.0]);
        assert!((sq.derivative().eval(c(3.0, 0.0)).unwrap() - c(6.0, 0.0)).norm() < 1e-14);

        // (z/(z-1))' = -1/(z-1)^2
        let m = rat(&[0.0, 1.0], &[-1.0, 1.0]);
        let d = m.derivative();
        let v = d.eval(c(3.0, 0.0)).unwrap();
        assert!((v - c(-0.25, 0.0)).norm() < 1e-13);
        // and the reduced denominator has degree 2
        assert_eq!(d.denominator().degree(), Some(2));
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let r = rat(&[1.0, -2.0, 0.5], &[-0.343, 0.0, 0.0, 1.0]);
        let d = r.derivative();
        for &z in &[c(1.3, 0.4), c(-0.9, 1.1), c(0.2, -1.7), c(2.0, 2.0)] {
            let h = 1e-6 * (1.0 + z.norm());
            let fd = (r.eval(z + c(h, 0.0)).unwrap() - r.eval(z - c(h, 0.0)).unwrap())
                / c(2.0 * h, 0.0);
            let dv = d.eval(z).unwrap();
            assert!(
                (fd - dv).norm() <= 1e-5 * (1.0 + dv.norm()),
                "finite difference mismatch at {z}: {fd} vs {dv}"
            );
        }
    }

    #[test]
    fn cancellation() {
        // (z^2 - 1)/(z - 1) reduces to z + 1
        let r = rat(&[-1.0, 0.0, 1.0], &[-1.0, 1.0]);
        assert_eq!(r.denominator().degree(), Some(0));
        assert!((r.eval(c(1.0, 0.0)).unwrap() - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn laurent_at_simple_pole() {
        // z^2/(z^3 - rho^3) at rho: residue N/D' = rho^2/(3 rho^2) = 1/3
        let rho: f64 = 0.7;
        let r = rat(&[0.0, 0.0, 1.0], &[-rho.powi(3), 0.0, 0.0, 1.0]);
        let head = r.laurent_head(PoleSite::Finite(c(rho, 0.0))).unwrap();
        assert_eq!(head.order, 1);
        assert!((head.top() - c(1.0 / 3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn laurent_one_over_z() {
        let inv = rat(&[1.0], &[0.0, 1.0]);
        let head = inv.laurent_head(PoleSite::Finite(c(0.0, 0.0))).unwrap();
        assert_eq!(head.order, 1);
        assert!((head.top() - c(1.0, 0.0)).norm() < 1e-15);
        assert!(head.constant.norm() < 1e-15);
    }

    #[test]
    fn laurent_at_infinity() {
        // z^2: order 2, leading coefficient 1
        let sq = rat(&[0.0, 0.0, 1.0], &[1.0]);
        let head = sq.laurent_head(PoleSite::Infinity).unwrap();
        assert_eq!(head.order, 2);
        assert!((head.top() - c(1.0, 0.0)).norm() < 1e-15);

        // z + 3 + 1/z: order 1, top 1, constant 3
        let r = rat(&[1.0, 3.0, 1.0], &[0.0, 1.0]);
        let head = r.laurent_head(PoleSite::Infinity).unwrap();
        assert_eq!(head.order, 1);
        assert!((head.top() - c(1.0, 0.0)).norm() < 1e-15);
        assert!((head.constant - c(3.0, 0.0)).norm() < 1e-15);

        // bounded at infinity: not a pole
        let b = rat(&[1.0], &[0.0, 1.0]);
        assert!(matches!(
            b.laurent_head(PoleSite::Infinity),
            Err(Error::NotAPole { z: None })
        ));
    }

    #[test]
    fn laurent_round_trip_stays_bounded() {
        // subtracting the principal part leaves a bounded remainder on a
        // shrinking circle around the pole
        let rho: f64 = 0.7;
        let r = rat(&[1.0, 2.0, 1.0], &[-rho.powi(3), 0.0, 0.0, 1.0]);
        let z0 = c(rho, 0.0);
        let head = r.laurent_head(PoleSite::Finite(z0)).unwrap();
        let radius = 1e-3;
        for k in 0..16 {
            let ang = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            let z = z0 + Complex64::from_polar(radius, ang);
            let rem = r.eval(z).unwrap() - head.principal_eval(z);
            assert!(
                rem.norm() <= 10.0 * (1.0 + head.constant.norm()),
                "unbounded remainder {} at angle {}",
                rem.norm(),
                ang
            );
        }
    }

    #[test]
    fn laurent_double_pole() {
        // 1/(z-1)^2 + 2/(z-1) + 5 = (5z^2 - 8z + 4)/(z-1)^2
        let r = rat(&[4.0, -8.0, 5.0], &[1.0, -2.0, 1.0]);
        let head = r.laurent_head(PoleSite::Finite(c(1.0, 0.0))).unwrap();
        assert_eq!(head.order, 2);
        assert!((head.principal[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((head.principal[1] - c(2.0, 0.0)).norm() < 1e-12);
        assert!((head.constant - c(5.0, 0.0)).norm() < 1e-12);
    }
}
