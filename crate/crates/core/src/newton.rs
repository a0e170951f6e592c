//! The harmonic Newton corrector.
//!
//! For `f = h + conj(g)` the update solves the 2x2 real Newton system in
//! complex form:
//!
//! ```text
//! H_f(z) = z - (conj(h') f - conj(g' f)) / (|h'|^2 - |g'|^2)
//! ```
//!
//! applied to `f - eta`. On analytic inputs it reduces to `z - f/f'`.

use crate::error::{Error, Result};
use crate::harmonic::HarmonicMapping;
use crate::tol;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonStatus {
    Converged,
    Diverged,
    HitCritical,
    MaxIter,
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOutcome {
    pub status: NewtonStatus,
    /// Valid when converged.
    pub limit: Complex64,
    pub iterations: usize,
    pub residual: f64,
    /// Smale-style step decay `|dz_k| <= (1/2)^(2^(k-1)-1) |dz_1|` held
    /// throughout; diagnostic only.
    pub approximate_zero: bool,
}

impl NewtonOutcome {
    pub fn converged(&self) -> bool {
        self.status == NewtonStatus::Converged
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub residual_tol: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    pub jac_floor_factor: f64,
    pub escape_radius: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            residual_tol: tol::NEWTON_RESIDUAL_TOL,
            step_tol: tol::NEWTON_STEP_TOL,
            max_iter: tol::NEWTON_MAX_ITER,
            jac_floor_factor: tol::JAC_FLOOR_FACTOR,
            escape_radius: 1e12,
        }
    }
}

impl NewtonOptions {
    /// Options with the escape radius derived from the mapping's poles.
    pub fn for_mapping(f: &HarmonicMapping) -> Self {
        NewtonOptions {
            escape_radius: f.escape_radius(),
            ..Default::default()
        }
    }
}

/// One harmonic Newton update for `f - eta` at `z`.
pub fn newton_step(f: &HarmonicMapping, eta: Complex64, z: Complex64) -> Result<Complex64> {
    let (dzf, dzbarf) = f.wirtinger();
    let hp = dzf.eval(z)?;
    let gp = dzbarf.eval(z)?;
    let jac = hp.norm_sqr() - gp.norm_sqr();
    if jac.abs() <= tol::JAC_FLOOR_FACTOR * (hp.norm_sqr() + gp.norm_sqr()) {
        return Err(Error::HitCritical { z });
    }
    let fv = f.eval(z)? - eta;
    Ok(z - (hp.conj() * fv - (gp * fv).conj()) / jac)
}

/// Full Newton iteration with convergence certification. Never returns an
/// error; failures are reported in the outcome status.
pub fn newton_solve(
    f: &HarmonicMapping,
    eta: Complex64,
    z0: Complex64,
    opts: &NewtonOptions,
) -> NewtonOutcome {
    let (dzf, dzbarf) = f.wirtinger();
    let mut z = z0;
    let mut last_step: Option<f64> = None;
    let mut first_step: Option<f64> = None;
    let mut approximate_zero = true;
    let fail = |status, z, iters, res| NewtonOutcome {
        status,
        limit: z,
        iterations: iters,
        residual: res,
        approximate_zero: false,
    };

    for k in 0..=opts.max_iter {
        if !z.is_finite() || z.norm() > opts.escape_radius {
            return fail(NewtonStatus::Diverged, z, k, f64::INFINITY);
        }
        let (hp, gp) = match (dzf.eval(z), dzbarf.eval(z)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return fail(NewtonStatus::Diverged, z, k, f64::INFINITY),
        };
        let jac = hp.norm_sqr() - gp.norm_sqr();
        let jac_floor = opts.jac_floor_factor * (hp.norm_sqr() + gp.norm_sqr());
        let fv = match f.eval(z) {
            Ok(v) => v - eta,
            Err(_) => return fail(NewtonStatus::Diverged, z, k, f64::INFINITY),
        };
        let residual = fv.norm();

        if residual <= opts.residual_tol * (1.0 + eta.norm()) {
            if let Some(step) = last_step {
                if step <= opts.step_tol * (1.0 + z.norm()) {
                    if jac.abs() <= jac_floor {
                        return fail(NewtonStatus::HitCritical, z, k, residual);
                    }
                    return NewtonOutcome {
                        status: NewtonStatus::Converged,
                        limit: z,
                        iterations: k,
                        residual,
                        approximate_zero,
                    };
                }
            }
        }
        if k == opts.max_iter {
            return fail(NewtonStatus::MaxIter, z, k, residual);
        }
        if jac.abs() <= jac_floor {
            return fail(NewtonStatus::HitCritical, z, k, residual);
        }
        let step = (hp.conj() * fv - (gp * fv).conj()) / jac;
        z -= step;
        let step_len = step.norm();
        match first_step {
            None => first_step = Some(step_len),
            Some(s1) => {
                let bound = 0.5f64.powf(2f64.powi(k as i32) - 1.0) * s1;
                if step_len > bound * (1.0 + 1e-9) {
                    approximate_zero = false;
                }
            }
        }
        last_step = Some(step_len);
    }
    unreachable!("loop always returns")
}

/// Greedy clustering of near-coincident points: a point within
/// `sep_tol * (1 + |z|)` of an earlier representative is merged into it.
/// Representatives keep their input order.
pub fn distinct_filter(points: &[Complex64], sep_tol: f64) -> Vec<Complex64> {
    let mut reps: Vec<Complex64> = Vec::new();
    for &p in points {
        if !reps
            .iter()
            .any(|r| (*r - p).norm() <= sep_tol * (1.0 + p.norm()))
        {
            reps.push(p);
        }
    }
    reps
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

    fn analytic(coeffs: &[f64]) -> HarmonicMapping {
        HarmonicMapping::new(
            RationalFunction::from_poly(Polynomial::from_real(coeffs)),
            RationalFunction::zero(),
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn classical_newton_on_analytic_input() {
        // z^2 - 1 from 2: z - (z^2-1)/(2z) = 2 - 3/4 = 1.25
        let f = analytic(&[-1.0, 0.0, 1.0]);
        let z1 = newton_step(&f, c(0.0, 0.0), c(2.0, 0.0)).unwrap();
        assert!((z1 - c(1.25, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn fixed_point_at_solution() {
        let f = HarmonicMapping::chang_refsdal();
        let eta = c(2.0 / 3f64.sqrt(), 0.0);
        let z = c(3f64.sqrt(), 0.0);
        let z1 = newton_step(&f, eta, z).unwrap();
        assert!((z1 - z).norm() < 1e-14);
    }

    #[test]
    fn solve_chang_refsdal_against_closed_form() {
        let f = HarmonicMapping::chang_refsdal();
        let eta = c(2.0 / 3f64.sqrt(), 0.0);
        let out = newton_solve(&f, eta, c(1.9, 0.0), &NewtonOptions::for_mapping(&f));
        assert!(out.converged());
        assert!((out.limit - c(3f64.sqrt(), 0.0)).norm() < 1e-12);
        assert!(out.residual < 1e-12);
    }

    #[test]
    fn critical_start_is_reported() {
        let f = HarmonicMapping::chang_refsdal();
        let out = newton_solve(&f, c(0.5, 0.5), c(1.0, 0.0), &NewtonOptions::for_mapping(&f));
        assert_eq!(out.status, NewtonStatus::HitCritical);
        assert!(matches!(
            newton_step(&f, c(0.5, 0.5), c(1.0, 0.0)),
            Err(Error::HitCritical { .. })
        ));
    }

    #[test]
    fn reduction_to_classical_newton_across_samples() {
        use rand::{Rng, SeedableRng};
        let f = analytic(&[0.3, -1.0, 0.0, 1.0]);
        let p = Polynomial::from_real(&[0.3, -1.0, 0.0, 1.0]);
        let dp = p.derivative();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let eta = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let dv = dp.eval(z);
            if dv.norm() < 1e-3 {
                continue;
            }
            let classical = z - (p.eval(z) - eta) / dv;
            let harmonic = newton_step(&f, eta, z).unwrap();
            assert!(
                (classical - harmonic).norm() <= 1e-14 * (1.0 + classical.norm()),
                "mismatch at {z}"
            );
        }
    }

    #[test]
    fn quadratic_tail() {
        // against a known simple zero, the error sequence must contract
        // quadratically once close
        let f = HarmonicMapping::chang_refsdal();
        let eta = c(2.0 / 3f64.sqrt(), 0.0);
        let target = c(3f64.sqrt(), 0.0);
        let mut z = target + c(1e-3, 5e-4);
        let mut errs = Vec::new();
        for _ in 0..6 {
            errs.push((z - target).norm());
            if *errs.last().unwrap() < 1e-15 {
                break;
            }
            z = newton_step(&f, eta, z).unwrap();
        }
        for w in errs.windows(2) {
            if w[0] > 1e-12 {
                assert!(
                    w[1] <= 50.0 * w[0] * w[0],
                    "not quadratic: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn distinct_filter_cases() {
        let pts = vec![c(1.0, 0.0), c(1.0 + 1e-14, 0.0), c(2.0, 0.0)];
        let reps = distinct_filter(&pts, 1e-9);
        assert_eq!(reps.len(), 2);
        assert_eq!(reps[0], c(1.0, 0.0));
        assert_eq!(reps[1], c(2.0, 0.0));

        assert!(distinct_filter(&[], 1e-9).is_empty());

        let n = 12;
        let roots: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        assert_eq!(distinct_filter(&roots, 1e-9).len(), n as usize);
    }
}
