//! Single-realization dynamics: diagonalization, survival of `|W⟩`, and the
//! forward/backward cross couplings `w_α`, `h_αβ`, `δ_α`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::cloud::AtomCloud;
use crate::hamiltonian::{
    build_heff, build_hf, check_alpha, hermiticity_defect, hs_lower_real, w_state, HermitianOperator,
};
use crate::linalg::{hermitian_spectral_measure, symmetric_spectral_measure, SpectralMeasure};
use crate::theory::{energy_asymptotic, TimeScales};
use crate::{Error, Result};

/// Generator of the time evolution of `|W⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Propagator {
    /// Full coherent exchange `H_s`.
    Hs,
    /// Forward-propagating part `H_F` only.
    HF,
    /// No-jump evolution including collective emission.
    Heff,
}

impl fmt::Display for Propagator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Propagator::Hs => "Hs",
            Propagator::HF => "HF",
            Propagator::Heff => "Heff",
        })
    }
}

impl FromStr for Propagator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hs" => Ok(Propagator::Hs),
            "hf" => Ok(Propagator::HF),
            "heff" => Ok(Propagator::Heff),
            _ => Err(Error::InvalidArgument(format!("unknown propagator `{s}` (expected Hs, HF or Heff)"))),
        }
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns).
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    /// `V diag(E) V†`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::new(self.eigenvalues[j], 0.0);
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// `max |V†V - 1|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.eigenvalues.len();
        let g = self.eigenvectors.adjoint() * &self.eigenvectors;
        (g - DMatrix::<Complex64>::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `|⟨v_j|ψ⟩|²` for every eigenvector.
    pub fn weights(&self, psi: &DVector<Complex64>) -> Vec<f64> {
        (self.eigenvectors.adjoint() * psi).iter().map(|z| z.norm_sqr()).collect()
    }

    /// `e^{-iHt} ψ`.
    pub fn evolve(&self, psi: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        let mut c = self.eigenvectors.adjoint() * psi;
        for (cj, &e) in c.iter_mut().zip(&self.eigenvalues) {
            *cj *= Complex64::from_polar(1.0, -e * t);
        }
        &self.eigenvectors * c
    }
}

/// Dense Hermitian eigendecomposition.
pub fn diagonalize(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    let m = h.entries();
    let n = m.nrows();
    let scale = h.max_abs().max(1.0);
    let dev = hermiticity_defect(m);
    if dev > 1e-10 * scale {
        return Err(Error::NotHermitian(dev));
    }
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1))
        .ok_or_else(|| Error::Eigensolver(format!("no convergence for {n}x{n} matrix")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut eigenvectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    reorthogonalize_clusters(&eigenvalues, &mut eigenvectors, 1e-10 * n as f64);
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// Modified Gram-Schmidt inside runs of eigenvalues closer than `gap`.
fn reorthogonalize_clusters(eigenvalues: &[f64], v: &mut DMatrix<Complex64>, gap: f64) {
    let n = eigenvalues.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eigenvalues[end] - eigenvalues[end - 1] < gap {
            end += 1;
        }
        for j in start..end {
            for k in start..j {
                let proj = v.column(k).dotc(&v.column(j));
                let ck = v.column(k).into_owned();
                v.column_mut(j).axpy(-proj, &ck, Complex64::new(1.0, 0.0));
            }
            let norm = v.column(j).norm();
            v.column_mut(j).unscale_mut(norm);
        }
        start = end;
    }
}

/// Survival probability of `|W⟩` on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub t_over_tau: Vec<f64>,
    pub values: Vec<f64>,
    pub scales: TimeScales,
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] != 0.0 {
        return Err(Error::InvalidArgument("time grid must start at t = 0".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("time grid must be finite and strictly ascending".into()));
    }
    Ok(())
}

/// Spectral measure of `|W⟩` for `H_s` (real symmetric path) or `H_F`
/// (Hermitian embedding).
pub fn w_spectral_measure(cloud: &AtomCloud, which: Propagator) -> Result<SpectralMeasure> {
    let n = cloud.n_atoms();
    match which {
        Propagator::Hs => {
            let scale = 1.0 / (n as f64).sqrt();
            let (b, a): (Vec<f64>, Vec<f64>) = cloud
                .positions()
                .iter()
                .map(|x| {
                    let (s, c) = x.sin_cos();
                    (s * scale, c * scale)
                })
                .unzip();
            let mut lower = hs_lower_real(cloud);
            symmetric_spectral_measure(&mut lower, n, &[&a, &b])
        }
        Propagator::HF => {
            let w = w_state(cloud);
            hermitian_spectral_measure(build_hf(cloud).entries(), w.amplitudes().as_slice())
        }
        Propagator::Heff => Err(Error::InvalidArgument("the no-jump generator has no real spectral measure".into())),
    }
}

/// `|⟨W|e^{-iHt}|W⟩|²` on `times` (units `1/γ`).
pub fn survival_values(cloud: &AtomCloud, times: &[f64], which: Propagator) -> Result<Vec<f64>> {
    check_times(times)?;
    match which {
        Propagator::Hs | Propagator::HF => {
            let measure = w_spectral_measure(cloud, which)?;
            let total = measure.total_weight();
            Ok(times.iter().map(|&t| (measure.amplitude(t) / total).norm_sqr()).collect())
        }
        Propagator::Heff => {
            let prop = HeffPropagator::new(cloud)?;
            let w = w_state(cloud);
            Ok(times.iter().map(|&t| prop.amplitude(w.amplitudes(), t).norm_sqr()).collect())
        }
    }
}

pub fn survival_curve(cloud: &AtomCloud, times: &[f64], which: Propagator) -> Result<SurvivalCurve> {
    let values = survival_values(cloud, times, which)?;
    let scales = TimeScales::new(cloud.n_atoms() as f64);
    Ok(SurvivalCurve {
        times: times.to_vec(),
        t_over_tau: times.iter().map(|t| t / scales.tau).collect(),
        values,
        scales,
    })
}

/// Propagator for the non-Hermitian no-jump generator.
///
/// Uses a complex Schur decomposition to obtain a (non-orthogonal)
/// eigenbasis; when that basis is ill conditioned (condition number above
/// `1e8`) or fails its residual check, falls back to a scaled-and-squared
/// matrix exponential per time point.
pub struct HeffPropagator {
    generator: DMatrix<Complex64>,
    eigen: Option<NonHermitianEigen>,
}

struct NonHermitianEigen {
    eigenvalues: Vec<Complex64>,
    vectors: DMatrix<Complex64>,
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl HeffPropagator {
    pub fn new(cloud: &AtomCloud) -> Result<Self> {
        Self::from_matrix(build_heff(cloud).entries().clone())
    }

    pub fn from_matrix(generator: DMatrix<Complex64>) -> Result<Self> {
        let eigen = non_hermitian_eigen(&generator);
        Ok(Self { generator, eigen })
    }

    pub fn uses_eigenbasis(&self) -> bool {
        self.eigen.is_some()
    }

    /// Eigenvalues of the generator; imaginary parts are `-Γ/2` of each mode.
    pub fn eigenvalues(&self) -> Option<&[Complex64]> {
        self.eigen.as_ref().map(|e| e.eigenvalues.as_slice())
    }

    pub fn state(&self, psi: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        match &self.eigen {
            Some(e) => {
                let mut c = e.lu.solve(psi).expect("invertible eigenbasis");
                for (cj, &l) in c.iter_mut().zip(&e.eigenvalues) {
                    *cj *= (-Complex64::i() * l * t).exp();
                }
                &e.vectors * c
            }
            None => (&self.generator * Complex64::new(0.0, -t)).exp() * psi,
        }
    }

    pub fn amplitude(&self, psi: &DVector<Complex64>, t: f64) -> Complex64 {
        psi.dotc(&self.state(psi, t))
    }
}

fn non_hermitian_eigen(h: &DMatrix<Complex64>) -> Option<NonHermitianEigen> {
    let n = h.nrows();
    let schur = nalgebra::Schur::try_new(h.clone(), f64::EPSILON, 1000 * n.max(1))?;
    let (q, t) = schur.unpack();
    let norm = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * norm;
    let eigenvalues: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();

    // eigenvectors of the upper-triangular factor by back substitution
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        y[(j, j)] = Complex64::new(1.0, 0.0);
        for i in (0..j).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for k in i + 1..=j {
                s += t[(i, k)] * y[(k, j)];
            }
            let mut denom = t[(i, i)] - eigenvalues[j];
            if denom.norm() < small {
                denom = Complex64::new(small, 0.0);
            }
            y[(i, j)] = -s / denom;
        }
    }
    let mut vectors = q * y;
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        col.unscale_mut(norm);
    }

    let sv = vectors.clone().singular_values();
    let cond = sv.max() / sv.min();
    if !(cond.is_finite() && cond <= 1e8) {
        return None;
    }
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut residual: f64 = 0.0;
    let hv = h * &vectors;
    for j in 0..n {
        for i in 0..n {
            residual = residual.max((hv[(i, j)] - vectors[(i, j)] * eigenvalues[j]).norm());
        }
    }
    if residual > 1e-9 * scale * n as f64 {
        return None;
    }
    let lu = vectors.clone().lu();
    Some(NonHermitianEigen { eigenvalues, vectors, lu })
}

/// Forward/backward overlap `w_α = ⟨α,B|α,F⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WOverlap {
    pub alpha: i64,
    pub value: Complex64,
}

impl WOverlap {
    pub fn magnitude(&self) -> f64 {
        self.value.norm()
    }

    pub fn phase(&self) -> f64 {
        self.value.arg()
    }
}

/// `(1/N) Σ_m e^{2iφ_m} e^{-iπ q r_m/N}`, the common sum behind `w_α`
/// (`q = 2α`) and `h_αβ` (`q = α + β`).
fn mixed_phase_sum(cloud: &AtomCloud, q: i64) -> Complex64 {
    let n = cloud.n_atoms() as f64;
    let k = PI * q as f64 / n;
    let s: Complex64 = cloud
        .positions()
        .iter()
        .enumerate()
        .map(|(r, &x)| Complex64::from_polar(1.0, 2.0 * x - k * r as f64))
        .sum();
    s / n
}

pub fn w_alpha(cloud: &AtomCloud, alpha: i64) -> Result<WOverlap> {
    check_alpha(alpha, cloud.n_atoms())?;
    Ok(WOverlap { alpha, value: mixed_phase_sum(cloud, 2 * alpha) })
}

/// `h_αβ = ⟨β,B|α,F⟩ / β`.
pub fn h_element(cloud: &AtomCloud, alpha: i64, beta: i64) -> Result<Complex64> {
    check_alpha(alpha, cloud.n_atoms())?;
    check_alpha(beta, cloud.n_atoms())?;
    Ok(mixed_phase_sum(cloud, alpha + beta) / beta as f64)
}

/// `δ_α = ⟨α,F|H_B|α,F⟩ / E₁` with `E₁ = N/π`, in `O(N)`.
///
/// With `g_m = e^{-2iφ_m} e^{iπα r_m/N}` the matrix element is
/// `-(1/N) Σ_{m>n} Im(g_m conj(g_n))`, a prefix-sum contraction.
pub fn delta_alpha(cloud: &AtomCloud, alpha: i64) -> Result<Complex64> {
    let n = cloud.n_atoms();
    check_alpha(alpha, n)?;
    let k = PI * alpha as f64 / n as f64;
    let mut prefix = Complex64::new(0.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (r, &x) in cloud.positions().iter().enumerate() {
        let g = Complex64::from_polar(1.0, -2.0 * x + k * r as f64);
        acc += g * prefix.conj();
        prefix += g;
    }
    let element = -acc.im / n as f64;
    Ok(Complex64::new(element * PI / n as f64, 0.0))
}

/// Both dimensionless couplings for one `(α, β)` pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossCoupling {
    pub alpha: i64,
    pub beta: i64,
    pub h: Complex64,
    pub delta: Complex64,
}

pub fn cross_coupling(cloud: &AtomCloud, alpha: i64, beta: i64) -> Result<CrossCoupling> {
    Ok(CrossCoupling {
        alpha,
        beta,
        h: h_element(cloud, alpha, beta)?,
        delta: delta_alpha(cloud, alpha)?,
    })
}

/// First-order split energies `E_α (1 ± |w_α|)` with `E_α = N/(πα)`,
/// returned as `(E₊, E₋)`.
pub fn perturbed_energies(cloud: &AtomCloud, alpha: i64) -> Result<(f64, f64)> {
    let w = w_alpha(cloud, alpha)?.magnitude();
    let e = energy_asymptotic(alpha, cloud.n_atoms());
    Ok((e * (1.0 + w), e * (1.0 - w)))
}
