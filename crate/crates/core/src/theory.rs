//! Closed-form results for the disorder-averaged survival of `|W⟩`.
//!
//! With `τ = π/(Nγ)` and `τ_dp = √N τ`:
//!
//! * universal function `χ(s) = (8/π²) Σ_{n≥0} cos(s/(2n+1)) / (2n+1)²`,
//!   the survival amplitude under the forward exchange alone, `P = χ(t/τ)²`;
//! * the dephasing-damped curve
//!   `P(t) = {(8/π²) Σ cos(s/k) [1 - 2f(t/(2τ_dp k))] / k²}²
//!         + (16/π⁴) Σ (2/k⁴) ([1 - f(t/(τ_dp k))] - [1 - 2f(t/(2τ_dp k))]²)`
//!   over odd `k`, with `f(x) = x D(x)` and the Dawson function `D`;
//! * the long-time value `Σ (2/(π k))⁴ = 1/6`.
//!
//! The first sum is normalized so that `P(0) = 1` (see [`p_analytic`]).
//!
//! All series are truncated by an explicit tail bound: terms are rewritten as
//! deviations from their small-argument limit, whose sum is known in closed
//! form (`Σ k⁻² = π²/8`), so the remainder decays like `M⁻³` instead of
//! `M⁻¹`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::hamiltonian::{check_alpha, hf_energy};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesAccuracy {
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesAccuracy {
    fn default() -> Self {
        Self { abs_tol: 1e-10, max_terms: 1_000_000 }
    }
}

impl SeriesAccuracy {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self { abs_tol, ..Self::default() }
    }
}

/// Revival time `τ = π/N` and dephasing time `τ_dp = √N τ` (`γ = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeScales {
    pub tau: f64,
    pub tau_dp: f64,
}

impl TimeScales {
    pub fn new(n_atoms: f64) -> Self {
        let tau = PI / n_atoms;
        Self { tau, tau_dp: tau * n_atoms.sqrt() }
    }
}

/// Dawson's integral `D(x) = e^{-x²} ∫₀ˣ e^{t²} dt`.
///
/// Maclaurin series below `|x| = 1`, Laplace's continued fraction
/// `x / (1 + 2x² - 4x²/(3 + 2x² - 8x²/(5 + 2x² - ...)))` above.
pub fn dawson(x: f64) -> f64 {
    let ax = x.abs();
    if x == 0.0 {
        0.0
    } else if ax < 1.0 {
        // Σ (-1)ⁿ 2ⁿ x^{2n+1} / (2n+1)!!
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= -2.0 * x2 / (2.0 * k + 1.0);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else if ax > 1e7 {
        let inv = 1.0 / (2.0 * x * x);
        (1.0 + inv * (1.0 + 3.0 * inv)) / (2.0 * x)
    } else {
        let x2 = x * x;
        // modified Lentz on b0 + a1/(b1 + a2/(b2 + ...)), b_k = 2k+1+2x², a_k = -4k x²
        let tiny = 1e-300;
        let mut f = 1.0 + 2.0 * x2;
        let mut c = f;
        let mut d = 0.0;
        for k in 1..10_000 {
            let kf = k as f64;
            let a = -4.0 * kf * x2;
            let b = 2.0 * kf + 1.0 + 2.0 * x2;
            d = b + a * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        x / f
    }
}

/// `f(x) = x D(x)`; even, `f(0) = 0`, `f(∞) = 1/2`.
pub fn f_damp(x: f64) -> f64 {
    x * dawson(x)
}

/// Smallest `M` with `bound(M) ≤ tol`, for a bound of the form
/// `min(a / M, b / M³)`.
fn terms_needed(a: f64, b: f64, tol: f64) -> usize {
    if a == 0.0 && b == 0.0 {
        return 0;
    }
    let by_first = (a / tol).ceil();
    let by_cubic = (b / tol).cbrt().ceil();
    by_first.min(by_cubic).max(1.0) as usize
}

fn check_terms(needed: usize, acc: &SeriesAccuracy) -> Result<()> {
    if !(acc.abs_tol > 0.0) {
        return Err(Error::InvalidArgument("abs_tol must be positive".into()));
    }
    if needed > acc.max_terms {
        return Err(Error::SeriesNotConverged { needed, max_terms: acc.max_terms });
    }
    Ok(())
}

/// Universal function `χ(s)`.
///
/// Evaluated as `1 - (16/π²) Σ sin²(s/2k) / k²` over odd `k`, which is exact;
/// the remainder after `M` terms is below
/// `(16/π²) min(1/(4M), s²/(192 M³))`.
pub fn chi(s: f64, acc: &SeriesAccuracy) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite argument {s}")));
    }
    let pre = 16.0 / (PI * PI);
    let m = terms_needed(pre / 4.0, pre * s * s / 192.0, acc.abs_tol);
    check_terms(m, acc)?;
    let mut sum = 0.0;
    for n in (0..m).rev() {
        let k = (2 * n + 1) as f64;
        let h = (s / (2.0 * k)).sin();
        sum += h * h / (k * k);
    }
    Ok(1.0 - pre * sum)
}

/// `χ(t/τ)²`, the survival under the forward exchange for `N → ∞`.
pub fn p_universal(t_over_tau: f64) -> Result<f64> {
    Ok(chi(t_over_tau, &SeriesAccuracy::default())?.powi(2))
}

/// Analytic disorder-averaged survival `P(t)` for `N` atoms.
pub fn p_analytic(t: f64, n_atoms: usize, acc: &SeriesAccuracy) -> Result<f64> {
    if n_atoms == 0 {
        return Err(Error::InvalidAtomCount(0.0));
    }
    p_analytic_scaled(t, TimeScales::new(n_atoms as f64), acc)
}

/// [`p_analytic`] with explicit time scales; `tau_dp = ∞` switches dephasing
/// off and reproduces [`p_universal`].
///
/// The amplitude sum carries the prefactor `8/π²` with unit weights `1/k²`
/// (so that `P(0) = 1`); the variance sum carries `(16/π⁴) · 2/k⁴` and
/// vanishes at `t = 0`. Their long-time limits are `0` and `1/6`.
pub fn p_analytic_scaled(t: f64, scales: TimeScales, acc: &SeriesAccuracy) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    let s = t / scales.tau;
    let x = if scales.tau_dp.is_infinite() { 0.0 } else { t / scales.tau_dp };

    // amplitude: 1 - (8/π²) Σ (1 - cos(s/k) g_k) / k², |1 - cos g| ≤ min(2, C/k²)
    let pa = 8.0 / (PI * PI);
    let c = 0.5 * s * s + 0.5 * x * x;
    // variance: (32/π⁴) Σ bracket / k⁴ with |bracket| ≤ 1
    let pv = 32.0 / PI.powi(4);
    let tol = acc.abs_tol / 4.0;
    let m_amp = terms_needed(pa * 2.0 / 4.0, pa * c / 48.0, tol);
    let m_var = if x == 0.0 { 0 } else { terms_needed(f64::INFINITY, pv / 48.0, tol) };
    let m = m_amp.max(m_var);
    check_terms(m, acc)?;

    let mut amp_def = 0.0;
    let mut var = 0.0;
    for n in (0..m).rev() {
        let k = (2 * n + 1) as f64;
        let k2 = k * k;
        let (g, bracket) = if x == 0.0 {
            (1.0, 0.0)
        } else {
            let a = x / (2.0 * k);
            let g = 1.0 - 2.0 * f_damp(a);
            (g, (1.0 - f_damp(2.0 * a)) - g * g)
        };
        if n < m_amp {
            amp_def += (1.0 - (s / k).cos() * g) / k2;
        }
        if n < m_var {
            var += bracket / (k2 * k2);
        }
    }
    let amp = 1.0 - pa * amp_def;
    Ok(amp * amp + pv * var)
}

/// Long-time limit `Σ_{n≥0} (2/(π(2n+1)))⁴ = (16/π⁴)(π⁴/96) = 1/6`.
pub fn saturation() -> f64 {
    1.0 / 6.0
}

/// Exact `|⟨W|α,F⟩| = 1 / (N |sin(πα/2N)|)`; tends to `2/(π|α|)`.
pub fn w_overlap_exact(alpha: i64, n_atoms: usize) -> Result<f64> {
    check_alpha(alpha, n_atoms)?;
    let n = n_atoms as f64;
    Ok(1.0 / (n * (PI * alpha as f64 / (2.0 * n)).sin().abs()))
}

/// Small-`|α|` form `N/(πα)` of the forward energies; reliable for
/// `|α| ≪ N` and, for the full exchange, `|α| < σ/λ`.
pub fn energy_asymptotic(alpha: i64, n_atoms: usize) -> f64 {
    debug_assert!(alpha != 0);
    n_atoms as f64 / (PI * alpha as f64)
}

/// Exact forward energy `cot(απ/2N)/2`.
pub fn energy_exact(alpha: i64, n_atoms: usize) -> Result<f64> {
    check_alpha(alpha, n_atoms)?;
    Ok(hf_energy(alpha, n_atoms))
}
