use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use superatom::cloud::{sample_cloud, DensityProfile};
use superatom::dynamics::{diagonalize, perturbed_energies, survival_values, Propagator};
use superatom::hamiltonian::{build_heff, build_hs, w_state};
use superatom::theory::TimeScales;
use superatom::{AtomCloud, Complex64};

fn gaussian_cloud(n: usize, seed: u64) -> AtomCloud {
    sample_cloud(&DensityProfile::gaussian(100.0).unwrap(), n, seed).unwrap()
}

/// Classical RK4 for `ψ' = -i G ψ`.
fn rk4(g: &DMatrix<Complex64>, psi0: &DVector<Complex64>, t_end: f64, steps: usize) -> DVector<Complex64> {
    let mi = Complex64::new(0.0, -1.0);
    let f = |psi: &DVector<Complex64>| (g * psi) * mi;
    let h = t_end / steps as f64;
    let mut psi = psi0.clone();
    for _ in 0..steps {
        let k1 = f(&psi);
        let k2 = f(&(&psi + &k1 * Complex64::from(h / 2.0)));
        let k3 = f(&(&psi + &k2 * Complex64::from(h / 2.0)));
        let k4 = f(&(&psi + &k3 * Complex64::from(h)));
        psi += (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4) * Complex64::from(h / 6.0);
    }
    psi
}

#[test]
fn survival_matches_runge_kutta() {
    let n = 32;
    let cloud = gaussian_cloud(n, 11);
    let w = w_state(&cloud);
    let tau = TimeScales::new(n as f64).tau;
    let times: Vec<f64> = (0..=8).map(|i| i as f64 * 0.75 * tau).collect();
    for (which, g) in [(Propagator::Hs, build_hs(&cloud).entries().clone()), (Propagator::Heff, build_heff(&cloud).entries().clone())] {
        let p = survival_values(&cloud, &times, which).unwrap();
        for (&t, &pt) in times.iter().zip(&p) {
            let psi = rk4(&g, w.amplitudes(), t, 4000);
            let oracle = w.amplitudes().dotc(&psi).norm_sqr();
            assert!((pt - oracle).abs() < 1e-6, "{which} t={t}: {pt} vs {oracle}");
        }
    }
}

#[test]
fn forward_curve_from_closed_form_weights() {
    // |⟨α,F|W⟩|² = 1/(N sin(απ/2N))², energies cot(απ/2N)/2
    let n = 500usize;
    let cloud = gaussian_cloud(n, 3);
    let tau = TimeScales::new(n as f64).tau;
    let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.1 * tau).collect();
    let p = survival_values(&cloud, &times, Propagator::HF).unwrap();
    let nf = n as f64;
    for (&t, &pt) in times.iter().zip(&p) {
        let mut amp = Complex64::new(0.0, 0.0);
        let mut a = -(n as i64) + if n % 2 == 0 { 1 } else { 0 };
        while a < n as i64 {
            let x = a as f64 * PI / (2.0 * nf);
            let weight = 1.0 / (nf * x.sin()).powi(2);
            amp += Complex64::from_polar(weight, -0.5 * x.cos() / x.sin() * t);
            a += 2;
        }
        assert!((pt - amp.norm_sqr()).abs() < 1e-9, "t={t}: {pt} vs {}", amp.norm_sqr());
    }
}

#[test]
fn lowest_pair_splits_by_overlap() {
    let n = 500;
    let mut worst: f64 = 0.0;
    for seed in 0..4 {
        let cloud = gaussian_cloud(n, 100 + seed);
        let (upper, lower) = perturbed_energies(&cloud, 1).unwrap();
        let spectrum = diagonalize(&build_hs(&cloud)).unwrap();
        let near = |e: f64| spectrum.eigenvalues().iter().copied().min_by(|a, b| (a - e).abs().total_cmp(&(b - e).abs())).unwrap();
        let (eu, el) = (near(upper), near(lower));
        let predicted = upper - lower;
        worst = worst.max(((eu - el) - predicted).abs() / predicted);
    }
    assert!(worst < 0.2, "relative splitting error {worst}");
}
