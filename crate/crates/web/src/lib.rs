//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Everything runs single-threaded; the page keeps sizes small enough to
//! stay interactive.

use wasm_bindgen::prelude::*;

use superatom::cloud::DensityProfile;
use superatom::ensemble::{collect_w_samples, run_survival_ensemble, ExperimentConfig, RunOptions, TimeGrid};
use superatom::stats::{histogram, ks_exponential};
use superatom::theory::{chi, p_analytic_scaled, SeriesAccuracy, TimeScales};

fn js(e: superatom::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Three columns sharing one abscissa.
#[wasm_bindgen]
pub struct Curve {
    x: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

#[wasm_bindgen]
impl Curve {
    /// `t/τ`.
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn first(&self) -> Vec<f64> {
        self.first.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn second(&self) -> Vec<f64> {
        self.second.clone()
    }
}

/// `χ(s)²` (first) and the damped analytic curve for `n` atoms (second).
#[wasm_bindgen]
pub fn theory_curve(n: f64, tmax_tau: f64, points: usize) -> Result<Curve, JsError> {
    if !(n >= 1.0) || points < 2 || !(tmax_tau > 0.0) {
        return Err(JsError::new("need n >= 1, points >= 2 and tmax_tau > 0"));
    }
    let scales = TimeScales::new(n);
    let acc = SeriesAccuracy::with_tol(1e-7);
    let x: Vec<f64> = (0..points).map(|i| tmax_tau * i as f64 / (points - 1) as f64).collect();
    let first = x.iter().map(|&s| chi(s, &acc).map(|c| c * c)).collect::<Result<_, _>>().map_err(js)?;
    let second =
        x.iter().map(|&s| p_analytic_scaled(s * scales.tau, scales, &acc)).collect::<Result<_, _>>().map_err(js)?;
    Ok(Curve { x, first, second })
}

/// Disorder-averaged survival (first) against the analytic curve (second).
///
/// `which` is `Hs`, `HF` or `Heff`; `profile` is `gaussian` or `box`.
#[wasm_bindgen]
pub fn ensemble_curve(
    n: usize,
    profile: &str,
    size_k: f64,
    realizations: usize,
    tmax_tau: f64,
    points: usize,
    which: &str,
    seed: u64,
) -> Result<Curve, JsError> {
    let profile = match profile {
        "gaussian" => DensityProfile::gaussian(size_k),
        "box" => DensityProfile::uniform_box(size_k),
        other => return Err(JsError::new(&format!("unknown profile `{other}`"))),
    }
    .map_err(js)?;
    let mut config = ExperimentConfig::new(profile, n as f64, realizations);
    config.time = TimeGrid { tmax_tau, points };
    config.master_seed = seed;
    config.which = which.parse().map_err(js)?;
    let curve = run_survival_ensemble(&config, RunOptions::default()).map_err(js)?;
    let acc = SeriesAccuracy::with_tol(1e-7);
    let second = curve.times.iter().map(|&t| p_analytic_scaled(t, curve.scales, &acc)).collect::<Result<_, _>>().map_err(js)?;
    Ok(Curve { x: curve.t_over_tau, first: curve.mean_p, second })
}

/// Histogram of `|w_α|²` in units of `1/N`.
#[wasm_bindgen]
pub struct OverlapHistogram {
    centers: Vec<f64>,
    density: Vec<f64>,
    exponential: Vec<f64>,
    pub mean: f64,
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub ks_accepted: bool,
}

#[wasm_bindgen]
impl OverlapHistogram {
    /// Bin centers of `N|w|²`.
    #[wasm_bindgen(getter)]
    pub fn centers(&self) -> Vec<f64> {
        self.centers.clone()
    }

    /// Empirical density of `N|w|²`.
    #[wasm_bindgen(getter)]
    pub fn density(&self) -> Vec<f64> {
        self.density.clone()
    }

    /// `e^{-x}` at the bin centers.
    #[wasm_bindgen(getter)]
    pub fn exponential(&self) -> Vec<f64> {
        self.exponential.clone()
    }
}

#[wasm_bindgen]
pub fn w_histogram(n: usize, size_k: f64, realizations: usize, alpha: i32, bins: usize, seed: u64) -> Result<OverlapHistogram, JsError> {
    let mut config = ExperimentConfig::new(DensityProfile::gaussian(size_k).map_err(js)?, n as f64, realizations);
    config.master_seed = seed;
    let w = collect_w_samples(&config, alpha as i64, RunOptions::default()).map_err(js)?;
    let nf = n as f64;
    let scaled: Vec<f64> = w.w_abs_sq.iter().map(|x| x * nf).collect();
    let ks = ks_exponential(&w.w_abs_sq, 1.0 / nf).map_err(js)?;
    let hist = histogram(&scaled, bins, 6.0).map_err(js)?;
    let centers: Vec<f64> = hist.iter().map(|b| 0.5 * (b.lower + b.upper)).collect();
    Ok(OverlapHistogram {
        exponential: centers.iter().map(|x| (-x).exp()).collect(),
        density: hist.iter().map(|b| b.density).collect(),
        centers,
        mean: w.sq_stats.mean(),
        ks_statistic: ks.statistic,
        ks_critical: ks.critical_value,
        ks_accepted: ks.accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theory_starts_at_one() {
        let c = theory_curve(500.0, 10.0, 11).unwrap();
        assert!((c.first[0] - 1.0).abs() < 1e-7);
        assert!((c.second[0] - 1.0).abs() < 1e-7);
        assert_eq!(c.x().len(), 11);
    }

    #[test]
    fn small_ensemble_runs() {
        let c = ensemble_curve(20, "gaussian", 50.0, 10, 6.0, 13, "Hs", 1).unwrap();
        assert_eq!(c.first.len(), 13);
        assert_eq!(c.first[0], 1.0);
    }

    #[test]
    fn histogram_integrates_to_about_one() {
        let h = w_histogram(50, 100.0, 400, 1, 30, 3).unwrap();
        let total: f64 = h.density.iter().map(|d| d * 6.0 / 30.0).sum();
        assert!(total > 0.95 && total <= 1.0 + 1e-12);
    }
}
