//! Single-excitation operators and states.
//!
//! Basis state `|m⟩` has atom `m` (in sorted order) excited and all others in
//! the ground state. With `Δ = φ_m - φ_n` and `γ = 1`:
//!
//! * exchange Hamiltonian `H_s[m, n] = sin|Δ|`,
//! * forward part `H_F[m, n] = sign(m - n) e^{iΔ} / (2i)`,
//! * backward part `H_B[m, n] = -sign(m - n) e^{-iΔ} / (2i)`, so that
//!   `H_F + H_B = H_s` and `H_B = conj(H_F)`,
//! * no-jump operator `H_eff[m, n] = -i e^{i|Δ|}`.
//!
//! `sign` is taken on the rank, so coincident atoms are ordered by draw order
//! and the diagonal is zero.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::cloud::AtomCloud;
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Amplitudes over the `N` singly-excited basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleExcitationState {
    amplitudes: DVector<Complex64>,
}

impl SingleExcitationState {
    pub fn new(amplitudes: DVector<Complex64>) -> Self {
        Self { amplitudes }
    }

    /// Rescales to unit norm; fails on the zero vector.
    pub fn normalized(amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amplitudes: amplitudes / Complex64::new(norm, 0.0) })
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }
}

/// Dense Hermitian operator; entries are in units of `rate_unit` (`γ`).
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    entries: DMatrix<Complex64>,
    rate_unit: f64,
}

impl HermitianOperator {
    /// Checks Hermiticity elementwise against `tol` (absolute).
    pub fn new(entries: DMatrix<Complex64>, tol: f64) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidArgument("operator must be square".into()));
        }
        let dev = hermiticity_defect(&entries);
        if dev > tol {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { entries, rate_unit: 1.0 })
    }

    pub fn with_rate_unit(mut self, gamma: f64) -> Self {
        self.rate_unit = gamma;
        self
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn rate_unit(&self) -> f64 {
        self.rate_unit
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, state: &SingleExcitationState) -> DVector<Complex64> {
        &self.entries * state.amplitudes()
    }

    /// `⟨a|H|b⟩`.
    pub fn matrix_element(&self, a: &SingleExcitationState, b: &SingleExcitationState) -> Complex64 {
        a.amplitudes().dotc(&self.apply(b))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Largest `|H[i, j] - conj(H[j, i])|`.
pub fn hermiticity_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Non-Hermitian no-jump generator `H_s - (i/2)(u u† + v v†)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveOperator {
    entries: DMatrix<Complex64>,
}

impl EffectiveOperator {
    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `(H + H†) / 2`.
    pub fn hermitian_part(&self) -> DMatrix<Complex64> {
        (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// `(H - H†) / (2i)`, the Hermitian matrix `Γ` with `H = H_herm + iΓ`.
    pub fn decay_part(&self) -> DMatrix<Complex64> {
        (&self.entries - self.entries.adjoint()) * Complex64::new(0.0, -0.5)
    }

    /// Largest eigenvalue of the decay part; nonpositive for physical decay.
    pub fn max_decay_eigenvalue(&self) -> f64 {
        nalgebra::SymmetricEigen::new(self.decay_part()).eigenvalues.max()
    }
}

/// Collective emission rates in units of `γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmissionRates {
    pub gamma_forward: f64,
    pub gamma_backward: f64,
}

impl EmissionRates {
    pub fn total(&self) -> f64 {
        self.gamma_forward + self.gamma_backward
    }
}

/// Spectrum of `H_F`: `E_α = cot(απ / 2N) / 2` for odd `α ∈ [-N, N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HfSpectrum {
    pub entries: Vec<(i64, f64)>,
}

impl HfSpectrum {
    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, e)| e).collect()
    }

    pub fn sorted_energies(&self) -> Vec<f64> {
        let mut e = self.energies();
        e.sort_by(f64::total_cmp);
        e
    }
}

/// The `N` admissible labels: odd integers in `[-N, N)`.
pub fn alphas(n_atoms: usize) -> impl Iterator<Item = i64> {
    let n = n_atoms as i64;
    let start = if n % 2 == 1 { -n } else { -n + 1 };
    (start..n).step_by(2)
}

pub fn check_alpha(alpha: i64, n_atoms: usize) -> Result<()> {
    let n = n_atoms as i64;
    if alpha.rem_euclid(2) != 1 || alpha < -n || alpha >= n {
        return Err(Error::InvalidAlpha { alpha, n: n_atoms });
    }
    Ok(())
}

/// `cot(απ/2N)/2`, exactly zero for `α = -N`.
pub fn hf_energy(alpha: i64, n_atoms: usize) -> f64 {
    if alpha == -(n_atoms as i64) {
        return 0.0;
    }
    let x = alpha as f64 * PI / (2.0 * n_atoms as f64);
    0.5 * x.cos() / x.sin()
}

pub fn hf_spectrum(n_atoms: usize) -> Result<HfSpectrum> {
    if n_atoms == 0 {
        return Err(Error::InvalidAtomCount(0.0));
    }
    Ok(HfSpectrum { entries: alphas(n_atoms).map(|a| (a, hf_energy(a, n_atoms))).collect() })
}

/// Bright state `|W⟩`, amplitudes `e^{iφ_m}/√N`.
pub fn w_state(cloud: &AtomCloud) -> SingleExcitationState {
    let scale = 1.0 / (cloud.n_atoms() as f64).sqrt();
    SingleExcitationState::new(DVector::from_iterator(
        cloud.n_atoms(),
        cloud.positions().iter().map(|&x| Complex64::from_polar(scale, x)),
    ))
}

fn sign(m: usize, n: usize) -> f64 {
    match m.cmp(&n) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Less => -1.0,
        std::cmp::Ordering::Equal => 0.0,
    }
}

pub fn build_hs(cloud: &AtomCloud) -> HermitianOperator {
    let x = cloud.positions();
    let n = x.len();
    let entries = DMatrix::from_fn(n, n, |m, k| Complex64::new((x[m] - x[k]).abs().sin(), 0.0));
    HermitianOperator { entries, rate_unit: 1.0 }
}

pub fn build_hf(cloud: &AtomCloud) -> HermitianOperator {
    let x = cloud.positions();
    let n = x.len();
    let entries = DMatrix::from_fn(n, n, |m, k| {
        Complex64::from_polar(sign(m, k), x[m] - x[k]) / (2.0 * I)
    });
    HermitianOperator { entries, rate_unit: 1.0 }
}

pub fn build_hb(cloud: &AtomCloud) -> HermitianOperator {
    let x = cloud.positions();
    let n = x.len();
    let entries = DMatrix::from_fn(n, n, |m, k| {
        -Complex64::from_polar(sign(m, k), x[k] - x[m]) / (2.0 * I)
    });
    HermitianOperator { entries, rate_unit: 1.0 }
}

pub fn build_heff(cloud: &AtomCloud) -> EffectiveOperator {
    let x = cloud.positions();
    let n = x.len();
    let entries = DMatrix::from_fn(n, n, |m, k| -I * Complex64::from_polar(1.0, (x[m] - x[k]).abs()));
    EffectiveOperator { entries }
}

/// Row-major `H_s` with only the lower triangle filled, for
/// [`crate::linalg::symmetric_spectral_measure`]. Uses
/// `sin(φ_m - φ_n) = s_m c_n - c_m s_n` for `m ≥ n` on sorted positions.
pub fn hs_lower_real(cloud: &AtomCloud) -> Vec<f64> {
    let x = cloud.positions();
    let n = x.len();
    let (s, c): (Vec<f64>, Vec<f64>) = x.iter().map(|v| v.sin_cos()).unzip();
    let mut out = vec![0.0; n * n];
    for m in 0..n {
        let row = &mut out[m * n..m * n + m];
        for ((r, &sk), &ck) in row.iter_mut().zip(&s[..m]).zip(&c[..m]) {
            *r = s[m] * ck - c[m] * sk;
        }
    }
    out
}

/// Forward eigenstate `|α,F⟩`: `e^{iφ_m} e^{-iπα r_m/N} / √N`, `r_m` the rank.
pub fn hf_eigenstate(cloud: &AtomCloud, alpha: i64) -> Result<SingleExcitationState> {
    let n = cloud.n_atoms();
    check_alpha(alpha, n)?;
    let scale = 1.0 / (n as f64).sqrt();
    let k = PI * alpha as f64 / n as f64;
    Ok(SingleExcitationState::new(DVector::from_iterator(
        n,
        cloud.positions().iter().enumerate().map(|(r, &x)| Complex64::from_polar(scale, x - k * r as f64)),
    )))
}

/// Backward eigenstate `|α,B⟩ = conj(|α,F⟩)`; an eigenstate of `H_B = conj(H_F)`
/// with the same energy `E_α`.
pub fn hb_eigenstate(cloud: &AtomCloud, alpha: i64) -> Result<SingleExcitationState> {
    let f = hf_eigenstate(cloud, alpha)?;
    Ok(SingleExcitationState::new(f.into_amplitudes().map(|z| z.conj())))
}

/// Conjugation by the diagonal unitary `diag(e^{-iφ_m})`, which strips the
/// plane-wave phases: `|W⟩` becomes uniform and `H_F` becomes
/// `sign(m - n)/(2i)` for every cloud of the same size.
pub trait GaugeFrame: Sized {
    fn to_gauge_frame(&self, cloud: &AtomCloud) -> Self;
    fn from_gauge_frame(&self, cloud: &AtomCloud) -> Self;
}

fn gauge_state(amps: &DVector<Complex64>, cloud: &AtomCloud, dir: f64) -> DVector<Complex64> {
    DVector::from_iterator(
        amps.len(),
        amps.iter().zip(cloud.positions()).map(|(a, &x)| a * Complex64::from_polar(1.0, -dir * x)),
    )
}

fn gauge_matrix(m: &DMatrix<Complex64>, cloud: &AtomCloud, dir: f64) -> DMatrix<Complex64> {
    let x = cloud.positions();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * Complex64::from_polar(1.0, -dir * (x[i] - x[j])))
}

impl GaugeFrame for SingleExcitationState {
    fn to_gauge_frame(&self, cloud: &AtomCloud) -> Self {
        Self::new(gauge_state(&self.amplitudes, cloud, 1.0))
    }

    fn from_gauge_frame(&self, cloud: &AtomCloud) -> Self {
        Self::new(gauge_state(&self.amplitudes, cloud, -1.0))
    }
}

impl GaugeFrame for HermitianOperator {
    fn to_gauge_frame(&self, cloud: &AtomCloud) -> Self {
        Self { entries: gauge_matrix(&self.entries, cloud, 1.0), rate_unit: self.rate_unit }
    }

    fn from_gauge_frame(&self, cloud: &AtomCloud) -> Self {
        Self { entries: gauge_matrix(&self.entries, cloud, -1.0), rate_unit: self.rate_unit }
    }
}

/// `H_F` in the gauge frame, `sign(m - n)/(2i)`; depends on `N` only.
pub fn gauged_hf(n_atoms: usize) -> HermitianOperator {
    let entries = DMatrix::from_fn(n_atoms, n_atoms, |m, k| Complex64::new(sign(m, k), 0.0) / (2.0 * I));
    HermitianOperator { entries, rate_unit: 1.0 }
}

/// Orthonormal basis of the complement of `|W⟩`: columns `2..N` of the
/// Householder reflector that maps `|W⟩` onto the first coordinate axis.
pub fn dark_basis(cloud: &AtomCloud) -> Result<Vec<SingleExcitationState>> {
    let n = cloud.n_atoms();
    if n < 2 {
        return Err(Error::InvalidArgument("dark states need at least two atoms".into()));
    }
    let w = w_state(cloud);
    let mut v = w.amplitudes().clone();
    let x0 = v[0];
    let phase = x0 / x0.norm();
    v[0] += phase * w.norm();
    let vv = v.norm_squared();
    Ok((1..n)
        .map(|j| {
            let cj = v[j].conj() * (2.0 / vv);
            let mut col = v.map(|vi| -vi * cj);
            col[j] += Complex64::new(1.0, 0.0);
            SingleExcitationState::new(col)
        })
        .collect())
}

/// `Γ_F = |Σ e^{-iφ_m} ψ_m|²`, `Γ_B = |Σ e^{iφ_m} ψ_m|²` for a unit state.
pub fn emission_rates(state: &SingleExcitationState, cloud: &AtomCloud) -> Result<EmissionRates> {
    if state.dim() != cloud.n_atoms() {
        return Err(Error::InvalidArgument("state dimension does not match cloud".into()));
    }
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(norm));
    }
    let mut fwd = Complex64::new(0.0, 0.0);
    let mut bwd = Complex64::new(0.0, 0.0);
    for (a, &x) in state.amplitudes().iter().zip(cloud.positions()) {
        let u = Complex64::from_polar(1.0, x);
        fwd += u.conj() * a;
        bwd += u * a;
    }
    Ok(EmissionRates { gamma_forward: fwd.norm_sqr(), gamma_backward: bwd.norm_sqr() })
}

/// `Γ_B` of `|W⟩` without building the state: `|Σ e^{2iφ_m}|² / N`.
pub fn w_backward_rate(cloud: &AtomCloud) -> f64 {
    let s: Complex64 = cloud.positions().iter().map(|&x| Complex64::from_polar(1.0, 2.0 * x)).sum();
    s.norm_sqr() / cloud.n_atoms() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{sample_cloud, DensityProfile};

    fn cloud(n: usize, seed: u64) -> AtomCloud {
        sample_cloud(&DensityProfile::gaussian(100.0).unwrap(), n, seed).unwrap()
    }

    fn fixed(xs: &[f64]) -> AtomCloud {
        AtomCloud::from_positions(xs.to_vec(), DensityProfile::gaussian(1.0).unwrap(), 0).unwrap()
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn w_state_basics() {
        let c = fixed(&[0.7]);
        let w = w_state(&c);
        assert!((w.amplitudes()[0] - Complex64::from_polar(1.0, 0.7)).norm() < 1e-15);
        let c = fixed(&[0.0; 5]);
        assert!(w_state(&c).amplitudes().iter().all(|z| (z - Complex64::new(0.2f64.sqrt(), 0.0)).norm() < 1e-15));
        let c = cloud(300, 1);
        assert!((w_state(&c).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hs_structure() {
        let c = fixed(&[0.3]);
        assert_eq!(build_hs(&c).entries()[(0, 0)], Complex64::new(0.0, 0.0));

        // |Δφ| = π/2: off-diagonal 1, eigenvalues ±1
        let c = fixed(&[0.0, std::f64::consts::FRAC_PI_2]);
        let h = build_hs(&c);
        assert!((h.entries()[(0, 1)].re - 1.0).abs() < 1e-15);
        let ev = nalgebra::SymmetricEigen::new(h.entries().clone()).eigenvalues;
        let mut ev: Vec<f64> = ev.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);

        let c = cloud(50, 2);
        let hs = build_hs(&c);
        let sum = build_hf(&c).entries() + build_hb(&c).entries();
        assert!(max_diff(hs.entries(), &sum) < 1e-12);
        assert!(hermiticity_defect(hs.entries()) < 1e-12);
        assert!(hermiticity_defect(build_hf(&c).entries()) < 1e-12);
        assert!((0..50).all(|i| build_hf(&c).entries()[(i, i)].norm() == 0.0));
    }

    #[test]
    fn real_lower_matches_dense() {
        let c = cloud(40, 3);
        let low = hs_lower_real(&c);
        let hs = build_hs(&c);
        for m in 0..40 {
            for k in 0..m {
                assert!((low[m * 40 + k] - hs.entries()[(m, k)].re).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_atom_forward_spectrum() {
        for xs in [[0.0, 0.4], [-3.0, 11.2]] {
            let h = build_hf(&fixed(&xs));
            let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(h.entries().clone()).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            assert!((ev[0] + 0.5).abs() < 1e-14 && (ev[1] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn spectrum_formula() {
        let s1 = hf_spectrum(1).unwrap();
        assert_eq!(s1.entries, vec![(-1, 0.0)]);
        let s2 = hf_spectrum(2).unwrap();
        assert_eq!(s2.entries.len(), 2);
        assert_eq!(s2.entries[0].0, -1);
        assert!((s2.entries[0].1 + 0.5).abs() < 1e-15 && (s2.entries[1].1 - 0.5).abs() < 1e-15);
        for n in [1usize, 2, 3, 10, 17, 101, 256] {
            let s = hf_spectrum(n).unwrap();
            assert_eq!(s.entries.len(), n);
            let total: f64 = s.energies().iter().sum();
            assert!(total.abs() < 1e-9 * n as f64, "n={n}: {total}");
            let sorted = s.sorted_energies();
            assert!(sorted.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn forward_eigenstates() {
        let c = cloud(128, 4);
        let hf = build_hf(&c);
        for a in alphas(128) {
            let f = hf_eigenstate(&c, a).unwrap();
            let r = hf.apply(&f) - f.amplitudes() * Complex64::new(hf_energy(a, 128), 0.0);
            assert!(r.norm() < 1e-10, "alpha {a}: {}", r.norm());
        }
        let hb = build_hb(&c);
        for a in [-127, -3, 1, 63] {
            let b = hb_eigenstate(&c, a).unwrap();
            let r = hb.apply(&b) - b.amplitudes() * Complex64::new(hf_energy(a, 128), 0.0);
            assert!(r.norm() < 1e-10);
        }
    }

    #[test]
    fn forward_orthonormal_and_w_overlaps() {
        let n = 64;
        let c = cloud(n, 5);
        let states: Vec<_> = alphas(n).map(|a| hf_eigenstate(&c, a).unwrap()).collect();
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((a.inner(b) - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
        let w = w_state(&c);
        for (a, s) in alphas(n).zip(&states) {
            let exact = 1.0 / (n as f64 * (PI * a as f64 / (2.0 * n as f64)).sin().abs());
            assert!((w.inner(s).norm() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_alpha() {
        let c = cloud(10, 6);
        assert!(hf_eigenstate(&c, 2).is_err());
        assert!(hf_eigenstate(&c, 11).is_err());
        assert!(hf_eigenstate(&c, -11).is_err());
        assert!(hf_eigenstate(&c, -9).is_ok());
        let c = cloud(9, 6);
        assert!(hf_eigenstate(&c, -9).is_ok());
        assert!(hf_eigenstate(&c, 9).is_err());
    }

    #[test]
    fn gauge_frame() {
        let n = 30;
        let c = cloud(n, 7);
        let gw = w_state(&c).to_gauge_frame(&c);
        let u = 1.0 / (n as f64).sqrt();
        assert!(gw.amplitudes().iter().all(|z| (z - Complex64::new(u, 0.0)).norm() < 1e-14));

        let ghf = build_hf(&c).to_gauge_frame(&c);
        assert!(max_diff(ghf.entries(), gauged_hf(n).entries()) < 1e-12);
        let back = ghf.from_gauge_frame(&c);
        assert!(max_diff(back.entries(), build_hf(&c).entries()) < 1e-12);

        let hs = build_hs(&c);
        let mut e1: Vec<f64> = nalgebra::SymmetricEigen::new(hs.entries().clone()).eigenvalues.iter().copied().collect();
        let mut e2: Vec<f64> = nalgebra::SymmetricEigen::new(hs.to_gauge_frame(&c).entries().clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e1.sort_by(f64::total_cmp);
        e2.sort_by(f64::total_cmp);
        assert!(e1.iter().zip(&e2).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn dark_states() {
        assert!(dark_basis(&fixed(&[1.0])).is_err());
        let n = 32;
        let c = cloud(n, 8);
        let w = w_state(&c);
        let dark = dark_basis(&c).unwrap();
        assert_eq!(dark.len(), n - 1);
        for d in &dark {
            assert!(w.inner(d).norm() < 1e-12);
        }
        for (i, a) in dark.iter().enumerate() {
            for (j, b) in dark.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((a.inner(b) - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
        let mut proj = w.amplitudes() * w.amplitudes().adjoint();
        for d in &dark {
            proj += d.amplitudes() * d.amplitudes().adjoint();
        }
        assert!(max_diff(&proj, &DMatrix::identity(n, n)) < 1e-11);
    }

    #[test]
    fn rates() {
        let c = cloud(77, 9);
        let r = emission_rates(&w_state(&c), &c).unwrap();
        assert!((r.gamma_forward - 77.0).abs() < 1e-12);
        assert!((r.gamma_backward - w_backward_rate(&c)).abs() < 1e-10);

        let one = fixed(&[2.5]);
        let s = SingleExcitationState::new(DVector::from_element(1, Complex64::from_polar(1.0, 0.3)));
        let r = emission_rates(&s, &one).unwrap();
        assert!((r.gamma_forward - 1.0).abs() < 1e-15 && (r.gamma_backward - 1.0).abs() < 1e-15);

        let pair = fixed(&[0.9, 0.9]);
        let r = emission_rates(&w_state(&pair), &pair).unwrap();
        assert!((r.gamma_backward - 2.0).abs() < 1e-14);

        let bad = SingleExcitationState::new(DVector::from_element(1, Complex64::new(2.0, 0.0)));
        assert!(matches!(emission_rates(&bad, &one), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn heff_structure() {
        let one = fixed(&[0.1]);
        assert!((build_heff(&one).entries()[(0, 0)] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        let c = cloud(40, 10);
        let heff = build_heff(&c);
        assert!(max_diff(&heff.hermitian_part(), build_hs(&c).entries()) < 1e-12);
        assert!(heff.max_decay_eigenvalue() <= 1e-10);
        // decay part is -(u u† + v v†)/2
        let u = DVector::from_iterator(40, c.positions().iter().map(|&x| Complex64::from_polar(1.0, x)));
        let v = u.map(|z| z.conj());
        let expect = (&u * u.adjoint() + &v * v.adjoint()) * Complex64::new(-0.5, 0.0);
        assert!(max_diff(&heff.decay_part(), &expect) < 1e-12);
    }
}
