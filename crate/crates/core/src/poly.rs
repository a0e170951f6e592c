//! Complex polynomials: arithmetic, evaluation, and a simultaneous
//! (Aberth–Ehrlich) root finder.
//!
//! Coefficients are stored in ascending degree; the zero polynomial is the
//! empty list, so `degree` is total and unambiguous.

use crate::error::{Error, Result};
use crate::tol;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending-degree coefficients, trimming
    /// exactly-zero leading terms.
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Polynomial { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Polynomial::new(vec![c])
    }

    pub fn one() -> Self {
        Polynomial::constant(Complex64::new(1.0, 0.0))
    }

    /// Real coefficients, ascending degree.
    pub fn from_real(coeffs: &[f64]) -> Self {
        Polynomial::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// The monomial `c * z^k`.
    pub fn monomial(c: Complex64, k: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k + 1];
        coeffs[k] = c;
        Polynomial::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial, else `len - 1`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<Complex64> {
        self.coeffs.last().copied()
    }

    fn trim(&mut self) {
        while let Some(c) = self.coeffs.last() {
            if c.norm_sqr() == 0.0 {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    /// Drops leading coefficients that are negligible against the largest
    /// one; cleans float dust after cancelling arithmetic.
    pub fn trim_relative(&mut self, rel: f64) {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            self.coeffs.clear();
            return;
        }
        while let Some(c) = self.coeffs.last() {
            if c.norm() <= rel * scale {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Horner over absolute values: `sum |c_k| |z|^k`, the natural local
    /// magnitude scale of an evaluation at `z`.
    pub fn eval_abs(&self, z_abs: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * z_abs + c.norm();
        }
        acc
    }

    /// Value and derivative in one Horner pass.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect();
        Polynomial::new(coeffs)
    }

    pub fn scale(&self, a: Complex64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&c| c * a).collect())
    }

    /// Quotient and remainder of division by the linear factor `z - z0`.
    pub fn deflate(&self, z0: Complex64) -> (Polynomial, Complex64) {
        let n = self.coeffs.len();
        if n == 0 {
            return (Polynomial::zero(), Complex64::new(0.0, 0.0));
        }
        if n == 1 {
            return (Polynomial::zero(), self.coeffs[0]);
        }
        let mut q = vec![Complex64::new(0.0, 0.0); n - 1];
        let mut carry = Complex64::new(0.0, 0.0);
        for k in (1..n).rev() {
            carry = self.coeffs[k] + carry * z0;
            q[k - 1] = carry;
        }
        let rem = self.coeffs[0] + carry * z0;
        (Polynomial::new(q), rem)
    }

    /// Coefficients of `p(z0 + u)` in powers of `u`, by repeated synthetic
    /// division (Taylor shift).
    pub fn taylor_shift(&self, z0: Complex64) -> Vec<Complex64> {
        let n = self.coeffs.len();
        let mut work = self.coeffs.clone();
        for k in 0..n {
            for i in (k..n.saturating_sub(1)).rev() {
                let next = work[i + 1];
                work[i] += z0 * next;
            }
        }
        work
    }

    /// Coefficients reversed: `z^n p(1/z)` for degree-`n` `p`.
    pub fn reversed(&self) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        Polynomial::new(coeffs)
    }

    /// All roots, with multiplicity, by Aberth–Ehrlich simultaneous
    /// iteration. Start points sit on the Cauchy-bound circle with a small
    /// deterministic phase perturbation. Each returned root satisfies
    /// `|p(root)| <= tol * max|coeff| * max(1,|root|)^deg`.
    pub fn roots(&self, tol: f64) -> Result<Vec<Complex64>> {
        let deg = match self.degree() {
            None => return Err(Error::Invalid("roots of the zero polynomial".into())),
            Some(0) => return Ok(Vec::new()),
            Some(d) => d,
        };

        // Factor out roots at the origin first.
        let zeros_at_origin = self
            .coeffs
            .iter()
            .take_while(|c| c.norm_sqr() == 0.0)
            .count();
        let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
        let coeffs = &self.coeffs[zeros_at_origin..];
        let n = coeffs.len() - 1;
        if n == 0 {
            return Ok(roots);
        }

        // Scale so the largest coefficient is 1.
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let coeffs: Vec<Complex64> = coeffs.iter().map(|&c| c / scale).collect();
        let p = Polynomial {
            coeffs: coeffs.clone(),
        };

        if n == 1 {
            roots.push(-coeffs[0] / coeffs[1]);
            return Ok(roots);
        }

        let lead = coeffs[n].norm();
        let cauchy = 1.0
            + coeffs[..n]
                .iter()
                .map(|c| c.norm() / lead)
                .fold(0.0, f64::max);

        // Deterministic jitter; the iteration itself is then reproducible.
        let mut rng = ChaCha8Rng::seed_from_u64(0x61626572746800 ^ n as u64);
        let mut zs: Vec<Complex64> = (0..n)
            .map(|k| {
                let angle = 2.0 * PI * (k as f64) / (n as f64)
                    + 0.5 / n as f64
                    + 1e-3 * rng.gen::<f64>();
                Complex64::from_polar(cauchy, angle)
            })
            .collect();

        let max_coeff = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut done = vec![false; n];
        let mut converged = 0usize;

        for _sweep in 0..tol::ROOT_MAX_SWEEPS {
            for k in 0..n {
                if done[k] {
                    continue;
                }
                let z = zs[k];
                let (pv, dv) = p.eval_with_derivative(z);
                let res_scale = max_coeff * z.norm().max(1.0).powi(n as i32);
                if pv.norm() <= tol * res_scale && pv.is_finite() && res_scale.is_finite() {
                    done[k] = true;
                    converged += 1;
                    continue;
                }
                if dv.norm_sqr() == 0.0 {
                    zs[k] += Complex64::new(1e-8 * (1.0 + z.norm()), 1e-8);
                    continue;
                }
                let w = pv / dv;
                let mut s = Complex64::new(0.0, 0.0);
                for (j, &zj) in zs.iter().enumerate() {
                    if j != k {
                        s += (z - zj).finv();
                    }
                }
                let denom = Complex64::new(1.0, 0.0) - w * s;
                let step = if denom.norm_sqr() > 1e-60 { w / denom } else { w };
                zs[k] = z - step;
                if !zs[k].is_finite() {
                    // restart this particle on the circle
                    let angle = rng.gen::<f64>() * 2.0 * PI;
                    zs[k] = Complex64::from_polar(cauchy, angle);
                }
            }
            if converged == n {
                break;
            }
        }

        if converged != n {
            // final residual audit: clusters of multiple roots may satisfy
            // the criterion without having been frozen in-sweep
            for k in 0..n {
                if done[k] {
                    continue;
                }
                let pv = p.eval(zs[k]);
                let res_scale = max_coeff * zs[k].norm().max(1.0).powi(n as i32);
                if pv.norm() <= tol * res_scale {
                    done[k] = true;
                    converged += 1;
                }
            }
        }
        if converged != n {
            return Err(Error::NonConvergence {
                degree: deg,
                sweeps: tol::ROOT_MAX_SWEEPS,
            });
        }
        roots.extend(zs);
        Ok(roots)
    }
}

fn add_into(target: &mut Vec<Complex64>, other: &[Complex64], sign: f64) {
    if target.len() < other.len() {
        target.resize(other.len(), Complex64::new(0.0, 0.0));
    }
    for (t, &o) in target.iter_mut().zip(other.iter()) {
        *t += o * sign;
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        add_into(&mut coeffs, &rhs.coeffs, 1.0);
        Polynomial::new(coeffs)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        add_into(&mut coeffs, &rhs.coeffs, -1.0);
        Polynomial::new(coeffs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut coeffs =
            vec![Complex64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial::new(coeffs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_basics() {
        // 1 + z^2 at i
        let p = Polynomial::from_real(&[1.0, 0.0, 1.0]);
        assert!(p.eval(c(0.0, 1.0)).norm() < 1e-15);
        // zero polynomial
        assert_eq!(Polynomial::zero().eval(c(3.0, 4.0)), c(0.0, 0.0));
        // z^3 - 1 at 2
        let p = Polynomial::from_real(&[-1.0, 0.0, 0.0, 1.0]);
        assert_eq!(p.eval(c(2.0, 0.0)), c(7.0, 0.0));
    }

    #[test]
    fn derivative_basics() {
        let p = Polynomial::from_real(&[0.0, 0.0, 0.0, 1.0]); // z^3
        assert_eq!(p.derivative(), Polynomial::from_real(&[0.0, 0.0, 3.0]));
        assert!(Polynomial::from_real(&[5.0]).derivative().is_zero());
        let p = Polynomial::from_real(&[1.0, 2.0, 3.0]);
        assert_eq!(p.derivative(), Polynomial::from_real(&[2.0, 6.0]));
    }

    #[test]
    fn deflate_and_shift() {
        // (z-2)(z+3) = z^2 + z - 6
        let p = Polynomial::from_real(&[-6.0, 1.0, 1.0]);
        let (q, rem) = p.deflate(c(2.0, 0.0));
        assert!(rem.norm() < 1e-14);
        assert!((q.eval(c(-3.0, 0.0))).norm() < 1e-14);

        // shift of z^2 by 1: (u+1)^2 = 1 + 2u + u^2
        let p = Polynomial::from_real(&[0.0, 0.0, 1.0]);
        let s = p.taylor_shift(c(1.0, 0.0));
        assert!((s[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((s[1] - c(2.0, 0.0)).norm() < 1e-14);
        assert!((s[2] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn roots_quadratic() {
        let p = Polynomial::from_real(&[1.0, 0.0, 1.0]); // z^2 + 1
        let mut roots = p.roots(1e-12).unwrap();
        roots.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((roots[0] - c(0.0, -1.0)).norm() < 1e-10);
        assert!((roots[1] - c(0.0, 1.0)).norm() < 1e-10);
    }

    #[test]
    fn roots_scaled_cube() {
        // z^3 - rho^3, rho = 0.7
        let rho: f64 = 0.7;
        let p = Polynomial::from_real(&[-rho.powi(3), 0.0, 0.0, 1.0]);
        let roots = p.roots(1e-12).unwrap();
        assert_eq!(roots.len(), 3);
        for (k, want_angle) in [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0].iter().enumerate() {
            let want = Complex64::from_polar(rho, *want_angle);
            let found = roots
                .iter()
                .map(|r| (r - want).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(found < 1e-10, "missing root {k}");
        }
    }

    #[test]
    fn roots_scaling_invariance() {
        let p = Polynomial::new(vec![c(0.3, -0.2), c(1.0, 0.5), c(-2.0, 0.0), c(0.0, 1.0)]);
        let base = p.roots(1e-12).unwrap();
        for alpha in [c(2.0, 0.0), c(0.0, 1.0), c(1e6, 0.0)] {
            let scaled = p.scale(alpha).roots(1e-12).unwrap();
            for r in &base {
                let d = scaled.iter().map(|s| (s - r).norm()).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-9, "root {r} lost under scaling by {alpha}");
            }
        }
    }
}
