use harmonic_zeros::*;
use num_complex::Complex64;

fn swapped_rhie(n: usize, rho: f64, eps: f64) -> HarmonicMapping {
    // ring mass eps, central mass 1-eps (swapped against the stated form)
    let rho_n = rho.powi(n as i32);
    let r = RationalFunction::from_poly(Polynomial::from_real(&[0.0, 1.0]));
    let mut num = vec![0.0; n + 1];
    num[0] = (1.0 - eps) * rho_n;
    num[n] = -1.0;
    let mut den = vec![0.0; n + 2];
    den[1] = -rho_n;
    den[n + 1] = 1.0;
    let s = RationalFunction::new(Polynomial::from_real(&num), Polynomial::from_real(&den)).unwrap();
    HarmonicMapping::new(r, s, Vec::new()).unwrap()
}

fn count(name: &str, f: &HarmonicMapping) {
    match solve_all_zeros(f, &SolveOptions::default()) {
        Ok(r) => println!("{name}: {} zeros", r.zeros.len()),
        Err(e) => println!("{name}: ERROR {e}"),
    }
}

fn main() {
    count("swapped rhie(25,0.9,0.4)", &swapped_rhie(25, 0.9, 0.4));
    count("rhie(25,0.86,0.4)", &HarmonicMapping::rhie(25, 0.86, 0.4).unwrap());
    count("rhie(25,0.8,0.4)", &HarmonicMapping::rhie(25, 0.8, 0.4).unwrap());
    println!("rho_c(25) = {}", rho_critical(25).unwrap());
}
