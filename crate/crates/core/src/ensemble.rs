//! Disorder averaging.
//!
//! Realization `r` draws its atom number and positions from seeds derived from
//! `(master_seed, r)` alone, so any realization can be rebuilt in isolation.
//! Realizations are evaluated in parallel chunks and folded into the
//! accumulators in index order, which makes every result bit-identical for
//! any number of worker threads.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

use crate::cloud::{draw_atom_count, sample_cloud, AtomCloud, AtomCount, AtomNumberMode, DensityProfile};
use crate::dynamics::{delta_alpha, h_element, survival_values, w_alpha, Propagator};
use crate::hamiltonian::{emission_rates, w_state};
use crate::stats::{loglog_fit, LineFit, RunningStats};
use crate::theory::{p_analytic_scaled, SeriesAccuracy, TimeScales};
use crate::{Error, Result};

/// Uniform grid `t ∈ [0, tmax_tau · τ]` with `points` samples, `τ = π/N̄`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub tmax_tau: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.tmax_tau > 0.0 && self.tmax_tau.is_finite()) {
            return Err(Error::Config { key: "time.tmax_tau".into(), message: "must be positive".into() });
        }
        if self.points < 2 {
            return Err(Error::Config { key: "time.points".into(), message: "need at least 2 points".into() });
        }
        Ok(())
    }

    /// Grid in units of `1/γ`.
    pub fn times(&self, scales: &TimeScales) -> Vec<f64> {
        let step = self.tmax_tau / (self.points - 1) as f64;
        (0..self.points).map(|i| i as f64 * step * scales.tau).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub profile: DensityProfile,
    pub mean_n: f64,
    pub atom_number_mode: AtomNumberMode,
    pub realizations: usize,
    pub time: TimeGrid,
    pub master_seed: u64,
    pub which: Propagator,
    pub alphas: Vec<i64>,
}

impl ExperimentConfig {
    /// Gaussian cloud, fixed atom number, `H_s`, `α = 1`.
    pub fn new(profile: DensityProfile, mean_n: f64, realizations: usize) -> Self {
        Self {
            profile,
            mean_n,
            atom_number_mode: AtomNumberMode::Fixed,
            realizations,
            time: TimeGrid { tmax_tau: 8.0 * PI, points: 400 },
            master_seed: 0,
            which: Propagator::Hs,
            alphas: vec![1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate().map_err(|e| Error::Config { key: "profile".into(), message: e.to_string() })?;
        if !(self.mean_n >= 1.0 && self.mean_n.is_finite()) {
            return Err(Error::Config { key: "mean_n".into(), message: format!("must be at least 1, got {}", self.mean_n) });
        }
        if self.atom_number_mode == AtomNumberMode::Fixed && self.mean_n.fract() != 0.0 {
            return Err(Error::Config {
                key: "mean_n".into(),
                message: format!("fixed atom number must be an integer, got {}", self.mean_n),
            });
        }
        if self.realizations == 0 {
            return Err(Error::Config { key: "realizations".into(), message: "must be at least 1".into() });
        }
        self.time.validate()?;
        if let Some(a) = self.alphas.iter().find(|a| *a % 2 == 0) {
            return Err(Error::Config { key: "alphas".into(), message: format!("alpha = {a} is not odd") });
        }
        Ok(())
    }

    /// Time scales of the mean atom number.
    pub fn scales(&self) -> TimeScales {
        TimeScales::new(self.mean_n)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))[..16].to_string()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Cloud of realization `index`.
pub fn realization(config: &ExperimentConfig, index: usize) -> Result<(AtomCloud, AtomCount)> {
    let seed = child_seed(config.master_seed, index as u64);
    let count = draw_atom_count(config.mean_n, config.atom_number_mode, child_seed(seed, 0))?;
    let cloud = sample_cloud(&config.profile, count.n_atoms, child_seed(seed, 1))?;
    Ok((cloud, count))
}

/// Execution knobs that do not change results.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker cap; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Retain every single-realization curve (for bootstrap resampling).
    pub keep_curves: bool,
}

const CHUNK: usize = 128;

/// Evaluates `work` on `0..count` in parallel chunks and hands results to
/// `sink` in index order.
fn for_each_realization<T, W, S>(count: usize, threads: Option<usize>, work: W, mut sink: S) -> Result<()>
where
    T: Send,
    W: Fn(usize) -> Result<T> + Sync + Send,
    S: FnMut(usize, T) + Send,
{
    let run = move || -> Result<()> {
        let mut start = 0;
        while start < count {
            let end = (start + CHUNK).min(count);
            let batch = map_range(start..end, &work);
            for (offset, item) in batch.into_iter().enumerate() {
                let index = start + offset;
                let value = item.map_err(|e| Error::Realization { index, source: Box::new(e) })?;
                sink(index, value);
            }
            start = end;
        }
        Ok(())
    };
    with_threads(threads, run)
}

#[cfg(feature = "parallel")]
fn map_range<T: Send>(range: std::ops::Range<usize>, work: &(impl Fn(usize) -> Result<T> + Sync)) -> Vec<Result<T>> {
    use rayon::prelude::*;
    range.into_par_iter().map(work).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_range<T: Send>(range: std::ops::Range<usize>, work: &(impl Fn(usize) -> Result<T> + Sync)) -> Vec<Result<T>> {
    range.map(work).collect()
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(Error::InvalidArgument("thread count must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {k} worker threads: {e}")))?
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    f()
}

/// Disorder-averaged survival curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCurve {
    pub times: Vec<f64>,
    pub t_over_tau: Vec<f64>,
    pub mean_p: Vec<f64>,
    /// Sample standard deviation over `√R`.
    pub stderr_p: Vec<f64>,
    pub realizations_done: usize,
    pub scales: TimeScales,
    pub config_hash: String,
    /// Poisson draws of zero atoms raised to one.
    pub clamp_events: usize,
    #[serde(skip)]
    pub curves: Option<Vec<Vec<f64>>>,
}

impl EnsembleCurve {
    /// Mean of `mean_p` over grid points with `t_lo ≤ t ≤ t_hi`.
    pub fn time_average(&self, t_lo: f64, t_hi: f64) -> Option<f64> {
        let s: RunningStats = self
            .times
            .iter()
            .zip(&self.mean_p)
            .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
            .map(|(_, p)| *p)
            .collect();
        (s.count() > 0).then(|| s.mean())
    }
}

pub fn run_survival_ensemble(config: &ExperimentConfig, opts: RunOptions) -> Result<EnsembleCurve> {
    config.validate()?;
    let scales = config.scales();
    let times = config.time.times(&scales);
    let mut acc = vec![RunningStats::new(); times.len()];
    let mut curves = opts.keep_curves.then(|| Vec::with_capacity(config.realizations));
    let mut clamp_events = 0;
    for_each_realization(
        config.realizations,
        opts.threads,
        |r| {
            let (cloud, count) = realization(config, r)?;
            Ok((survival_values(&cloud, &times, config.which)?, count.clamped))
        },
        |_, (values, clamped): (Vec<f64>, bool)| {
            for (a, p) in acc.iter_mut().zip(&values) {
                a.push(*p);
            }
            clamp_events += clamped as usize;
            if let Some(c) = curves.as_mut() {
                c.push(values);
            }
        },
    )?;
    Ok(EnsembleCurve {
        t_over_tau: times.iter().map(|t| t / scales.tau).collect(),
        times,
        mean_p: acc.iter().map(RunningStats::mean).collect(),
        stderr_p: acc.iter().map(RunningStats::stderr).collect(),
        realizations_done: config.realizations,
        scales,
        config_hash: config.hash(),
        clamp_events,
        curves,
    })
}

/// `|w_α|²` per realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WSamples {
    pub alpha: i64,
    pub n_atoms: Vec<usize>,
    pub w_abs_sq: Vec<f64>,
    /// Moments of `|w_α|²`.
    pub sq_stats: RunningStats,
    /// Moments of `|w_α|`; `std_dev()` is `Δw_α`.
    pub abs_stats: RunningStats,
    pub clamp_events: usize,
}

pub fn collect_w_samples(config: &ExperimentConfig, alpha: i64, opts: RunOptions) -> Result<WSamples> {
    config.validate()?;
    if alpha % 2 == 0 {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} is not odd")));
    }
    let mut out = WSamples {
        alpha,
        n_atoms: Vec::with_capacity(config.realizations),
        w_abs_sq: Vec::with_capacity(config.realizations),
        sq_stats: RunningStats::new(),
        abs_stats: RunningStats::new(),
        clamp_events: 0,
    };
    for_each_realization(
        config.realizations,
        opts.threads,
        |r| {
            let (cloud, count) = realization(config, r)?;
            Ok((count, w_alpha(&cloud, alpha)?.magnitude()))
        },
        |_, (count, w): (AtomCount, f64)| {
            out.n_atoms.push(count.n_atoms);
            out.w_abs_sq.push(w * w);
            out.sq_stats.push(w * w);
            out.abs_stats.push(w);
            out.clamp_events += count.clamped as usize;
        },
    )?;
    Ok(out)
}

/// Emission rates of `|W⟩` per realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSamples {
    pub n_atoms: Vec<usize>,
    pub gamma_forward: Vec<f64>,
    pub gamma_backward: Vec<f64>,
    pub forward: RunningStats,
    pub backward: RunningStats,
    pub clamp_events: usize,
}

pub fn collect_rates(config: &ExperimentConfig, opts: RunOptions) -> Result<RateSamples> {
    config.validate()?;
    let mut out = RateSamples {
        n_atoms: Vec::with_capacity(config.realizations),
        gamma_forward: Vec::with_capacity(config.realizations),
        gamma_backward: Vec::with_capacity(config.realizations),
        forward: RunningStats::new(),
        backward: RunningStats::new(),
        clamp_events: 0,
    };
    for_each_realization(
        config.realizations,
        opts.threads,
        |r| {
            let (cloud, count) = realization(config, r)?;
            Ok((count, emission_rates(&w_state(&cloud), &cloud)?))
        },
        |_, (count, rates): (AtomCount, crate::hamiltonian::EmissionRates)| {
            out.n_atoms.push(count.n_atoms);
            out.gamma_forward.push(rates.gamma_forward);
            out.gamma_backward.push(rates.gamma_backward);
            out.forward.push(rates.gamma_forward);
            out.backward.push(rates.gamma_backward);
            out.clamp_events += count.clamped as usize;
        },
    )?;
    Ok(out)
}

/// Quantity tracked across a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SweepQuantity {
    /// `|h_αβ|` against the cloud size; floor `1/(N β²)` on `|h|²`.
    H { alpha: i64, beta: i64 },
    /// `|δ_α|` against the cloud size; floor `π²/(4N²)` on `|δ|²`.
    Delta { alpha: i64 },
    /// `Δw_α`, the standard deviation of `|w_α|`, against `N̄`.
    WStd { alpha: i64 },
}

impl SweepQuantity {
    pub fn name(&self) -> &'static str {
        match self {
            SweepQuantity::H { .. } => "h",
            SweepQuantity::Delta { .. } => "delta",
            SweepQuantity::WStd { .. } => "w_std",
        }
    }
}

/// One sweep configuration, summarized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub mean_n: f64,
    pub realizations: usize,
    /// Mean of `|q|` (or `Δw` for the overlap sweep).
    pub raw: f64,
    /// Mean of `|q|² - floor(N)`.
    pub excess_sq: f64,
    pub excess_sq_stderr: f64,
    /// `√max(excess_sq, 0)`; equals `raw` for the overlap sweep.
    pub estimate: f64,
    /// `excess_sq` exceeds three standard errors.
    pub resolved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub quantity: SweepQuantity,
    pub points: Vec<SweepPoint>,
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// Log-log fit through the resolved points; `None` with fewer than two.
    pub fit: Option<LineFit>,
    /// `δ_α ≈ c₀ ε + c₁ α ε²` with `ε = λ/σ = 2π/(kσ)`; delta sweeps only.
    pub c0: Option<f64>,
    pub c1: Option<f64>,
}

impl ScalingFit {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

/// Runs each config and fits `log y` against `log x`.
pub fn scaling_sweep(configs: &[ExperimentConfig], quantity: SweepQuantity, opts: RunOptions) -> Result<ScalingFit> {
    if configs.len() < 3 {
        return Err(Error::InsufficientData(format!("a sweep needs at least 3 points, got {}", configs.len())));
    }
    let mut points = Vec::with_capacity(configs.len());
    let mut delta_means = Vec::new();
    for config in configs {
        config.validate()?;
        let point = match quantity {
            SweepQuantity::WStd { alpha } => {
                let w = collect_w_samples(config, alpha, opts)?;
                let d = w.abs_stats.std_dev();
                SweepPoint {
                    x: config.mean_n,
                    mean_n: config.mean_n,
                    realizations: config.realizations,
                    raw: d,
                    excess_sq: d * d,
                    excess_sq_stderr: 0.0,
                    estimate: d,
                    resolved: d > 0.0,
                }
            }
            SweepQuantity::H { .. } | SweepQuantity::Delta { .. } => {
                let (point, means) = coupling_point(config, quantity, opts)?;
                delta_means.push((config.profile.size_k, means));
                point
            }
        };
        points.push(point);
    }
    points.sort_by(|a, b| a.x.total_cmp(&b.x));
    let (x_values, y_values): (Vec<f64>, Vec<f64>) =
        points.iter().filter(|p| p.resolved).map(|p| (p.x, p.estimate)).unzip();
    let fit = if x_values.len() >= 2 { Some(loglog_fit(&x_values, &y_values)?) } else { None };
    let (c0, c1) = match quantity {
        SweepQuantity::Delta { .. } => {
            let (c0, c1) = fit_delta_coefficients(&delta_means)?;
            (Some(c0), Some(c1))
        }
        _ => (None, None),
    };
    Ok(ScalingFit { quantity, points, x_values, y_values, fit, c0, c1 })
}

const DELTA_FIT_ALPHAS: [i64; 3] = [-1, 1, 3];

/// Sweep point for `h` or `δ`, plus the signed means of `δ_α` for
/// `α ∈ {-1, 1, 3}` when sweeping `δ`.
fn coupling_point(config: &ExperimentConfig, quantity: SweepQuantity, opts: RunOptions) -> Result<(SweepPoint, Vec<(i64, f64)>)> {
    let want_means = matches!(quantity, SweepQuantity::Delta { .. });
    let mut raw = RunningStats::new();
    let mut excess = RunningStats::new();
    let mut signed = vec![RunningStats::new(); DELTA_FIT_ALPHAS.len()];
    for_each_realization(
        config.realizations,
        opts.threads,
        |r| {
            let (cloud, count) = realization(config, r)?;
            let n = count.n_atoms as f64;
            let (value, floor) = match quantity {
                SweepQuantity::H { alpha, beta } => (h_element(&cloud, alpha, beta)?.norm(), 1.0 / (n * (beta * beta) as f64)),
                SweepQuantity::Delta { alpha } => (delta_alpha(&cloud, alpha)?.norm(), PI * PI / (4.0 * n * n)),
                SweepQuantity::WStd { .. } => unreachable!("handled by the overlap sweep"),
            };
            let means = if want_means {
                DELTA_FIT_ALPHAS.iter().map(|&a| delta_alpha(&cloud, a).map(|d| d.re)).collect::<Result<Vec<_>>>()?
            } else {
                Vec::new()
            };
            Ok((value, floor, means))
        },
        |_, (value, floor, means): (f64, f64, Vec<f64>)| {
            raw.push(value);
            excess.push(value * value - floor);
            for (s, d) in signed.iter_mut().zip(&means) {
                s.push(*d);
            }
        },
    )?;
    let excess_sq = excess.mean();
    let point = SweepPoint {
        x: config.profile.size_k,
        mean_n: config.mean_n,
        realizations: config.realizations,
        raw: raw.mean(),
        excess_sq,
        excess_sq_stderr: excess.stderr(),
        estimate: excess_sq.max(0.0).sqrt(),
        resolved: excess_sq > 3.0 * excess.stderr(),
    };
    let means = if want_means { DELTA_FIT_ALPHAS.iter().zip(&signed).map(|(&a, s)| (a, s.mean())).collect() } else { Vec::new() };
    Ok((point, means))
}

/// Least squares for `δ_α = c₀ ε + c₁ α ε²` over all sizes and `α`.
fn fit_delta_coefficients(data: &[(f64, Vec<(i64, f64)>)]) -> Result<(f64, f64)> {
    let mut ata = Matrix2::zeros();
    let mut atb = Vector2::zeros();
    for (size_k, means) in data {
        let eps = 2.0 * PI / size_k;
        for &(alpha, d) in means {
            let row = Vector2::new(eps, alpha as f64 * eps * eps);
            ata += row * row.transpose();
            atb += row * d;
        }
    }
    let sol = ata.lu().solve(&atb).ok_or_else(|| Error::Fit("δ coefficient system is singular".into()))?;
    Ok((sol[0], sol[1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Bootstrap resamples of the realizations (needs stored curves).
    pub bootstrap: usize,
    pub seed: u64,
    pub accuracy: SeriesAccuracy,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { bootstrap: 200, seed: 0, accuracy: SeriesAccuracy { abs_tol: 1e-6, max_terms: 1_000_000 } }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingFit {
    pub tau_dp: f64,
    pub stderr: f64,
    /// `√N̄ τ`.
    pub nominal_tau_dp: f64,
    pub residual_rms: f64,
    pub model_evaluations: usize,
    /// Zero when the stderr comes from linear error propagation instead.
    pub bootstrap_samples: usize,
}

impl DephasingFit {
    pub fn ratio_to_nominal(&self) -> f64 {
        self.tau_dp / self.nominal_tau_dp
    }
}

/// Least-squares fit of the damped analytic curve to `curve` with `τ_dp` as
/// the only free parameter (`τ` and the `1/6` saturation fixed).
///
/// The minimizer is located by a log-spaced scan followed by golden-section
/// refinement in `ln τ_dp`. The standard error comes from resampling the
/// stored per-realization curves, each resample refitted with one
/// Gauss-Newton step from the full-data minimizer; without stored curves
/// the pointwise standard errors are propagated linearly.
pub fn fit_dephasing(curve: &EnsembleCurve, opts: &FitOptions) -> Result<DephasingFit> {
    let nominal = curve.scales.tau_dp;
    let t_end = curve.times.last().copied().unwrap_or(0.0);
    if t_end < 10.0 * nominal * (1.0 - 1e-9) {
        return Err(Error::InsufficientData(format!(
            "curve ends at {:.3} τ_dp, the fit needs at least 10 τ_dp",
            t_end / nominal
        )));
    }
    let tau = curve.scales.tau;
    let mut evaluations = 0usize;
    let mut model = |tau_dp: f64| -> Result<Vec<f64>> {
        evaluations += 1;
        let sc = TimeScales { tau, tau_dp };
        curve.times.iter().map(|&t| p_analytic_scaled(t, sc, &opts.accuracy)).collect()
    };
    let sse = |m: &[f64]| -> f64 { m.iter().zip(&curve.mean_p).map(|(a, b)| (a - b).powi(2)).sum() };

    let (lo, hi) = ((nominal / 20.0).ln(), (nominal * 20.0).ln());
    let scan = 41;
    let mut best = (f64::INFINITY, 0usize);
    let mut grid = Vec::with_capacity(scan);
    for i in 0..scan {
        let u = lo + (hi - lo) * i as f64 / (scan - 1) as f64;
        let v = sse(&model(u.exp())?);
        grid.push(u);
        if v < best.0 {
            best = (v, i);
        }
    }
    if best.1 == 0 || best.1 == scan - 1 {
        return Err(Error::Fit(format!(
            "least-squares minimum at the edge of [τ_dp/20, 20 τ_dp] (τ_dp = {:.4e}, sse = {:.3e})",
            grid[best.1].exp(),
            best.0
        )));
    }
    let (mut a, mut b) = (grid[best.1 - 1], grid[best.1 + 1]);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = sse(&model(c.exp())?);
    let mut fd = sse(&model(d.exp())?);
    while b - a > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = sse(&model(c.exp())?);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = sse(&model(d.exp())?);
        }
    }
    let tau_dp = (0.5 * (a + b)).exp();
    let fitted = model(tau_dp)?;
    let residual_rms = (sse(&fitted) / fitted.len() as f64).sqrt();

    // sensitivity ∂P/∂τ_dp by central differences
    let h = 1e-4 * tau_dp;
    let up = model(tau_dp + h)?;
    let down = model(tau_dp - h)?;
    let jac: Vec<f64> = up.iter().zip(&down).map(|(u, d)| (u - d) / (2.0 * h)).collect();
    let jtj: f64 = jac.iter().map(|j| j * j).sum();
    if !(jtj > 0.0) {
        return Err(Error::Fit("fit is insensitive to τ_dp on this grid".into()));
    }
    let (stderr, bootstrap_samples) = match &curve.curves {
        Some(curves) if opts.bootstrap >= 2 && curves.len() >= 2 => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let r = curves.len();
            let mut spread = RunningStats::new();
            let mut mean = vec![0.0; jac.len()];
            for _ in 0..opts.bootstrap {
                mean.iter_mut().for_each(|m| *m = 0.0);
                for _ in 0..r {
                    for (m, p) in mean.iter_mut().zip(&curves[rng.random_range(0..r)]) {
                        *m += p;
                    }
                }
                let step: f64 = jac.iter().zip(&mean).zip(&fitted).map(|((j, m), f)| j * (m / r as f64 - f)).sum();
                spread.push(tau_dp + step / jtj);
            }
            (spread.std_dev(), opts.bootstrap)
        }
        _ => {
            let var: f64 = jac.iter().zip(&curve.stderr_p).map(|(j, s)| (j * s).powi(2)).sum::<f64>() / (jtj * jtj);
            (var.sqrt(), 0)
        }
    };
    Ok(DephasingFit { tau_dp, stderr, nominal_tau_dp: nominal, residual_rms, model_evaluations: evaluations, bootstrap_samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(n: f64, r: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(DensityProfile::gaussian(100.0).unwrap(), n, r);
        c.time = TimeGrid { tmax_tau: 4.0 * PI, points: 50 };
        c.master_seed = 42;
        c
    }

    #[test]
    fn child_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for m in 0..20 {
            for i in 0..500 {
                assert!(seen.insert(child_seed(m, i)));
            }
        }
        assert_eq!(child_seed(7, 3), child_seed(7, 3));
    }

    #[test]
    fn single_atom_never_decays() {
        let c = small_config(1.0, 25);
        let e = run_survival_ensemble(&c, RunOptions::default()).unwrap();
        assert!(e.mean_p.iter().all(|p| *p == 1.0));
        assert!(e.stderr_p.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn bit_identical_across_thread_counts() {
        let c = small_config(40.0, 300);
        let one = run_survival_ensemble(&c, RunOptions { threads: Some(1), keep_curves: false }).unwrap();
        let four = run_survival_ensemble(&c, RunOptions { threads: Some(4), keep_curves: false }).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&one.mean_p), bits(&four.mean_p));
        assert_eq!(bits(&one.stderr_p), bits(&four.stderr_p));
        assert_eq!(one.config_hash, four.config_hash);
    }

    #[test]
    fn stderr_shrinks_with_realizations() {
        let c = small_config(30.0, 400);
        let mut c4 = c.clone();
        c4.realizations = 1600;
        let a = run_survival_ensemble(&c, RunOptions::default()).unwrap();
        let b = run_survival_ensemble(&c4, RunOptions::default()).unwrap();
        let i = 30;
        let ratio = a.stderr_p[i] / b.stderr_p[i];
        assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn realization_failure_names_index() {
        let mut c = small_config(5.0, 10);
        c.alphas = vec![1];
        let err = collect_w_samples(&c, 7, RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Realization { index: 0, .. }), "{err}");
    }

    #[test]
    fn config_validation() {
        let mut c = small_config(10.5, 1);
        assert!(matches!(c.validate(), Err(Error::Config { ref key, .. }) if key == "mean_n"));
        c.atom_number_mode = AtomNumberMode::Poisson;
        assert!(c.validate().is_ok());
        c.realizations = 0;
        assert!(c.validate().is_err());
        let mut c = small_config(10.0, 1);
        c.alphas = vec![2];
        assert!(matches!(c.validate(), Err(Error::Config { ref key, .. }) if key == "alphas"));
        assert_ne!(small_config(10.0, 1).hash(), small_config(11.0, 1).hash());
    }

    #[test]
    fn degenerate_overlaps_and_rates() {
        let c = small_config(1.0, 20);
        let w = collect_w_samples(&c, -1, RunOptions::default()).unwrap();
        assert!(w.w_abs_sq.iter().all(|x| (x - 1.0).abs() < 1e-14));
        let r = collect_rates(&c, RunOptions::default()).unwrap();
        assert!(r.gamma_forward.iter().chain(&r.gamma_backward).all(|g| (g - 1.0).abs() < 1e-12));
    }

    #[test]
    fn sweep_needs_three_points() {
        let c = small_config(10.0, 5);
        let err = scaling_sweep(&[c.clone(), c], SweepQuantity::Delta { alpha: 1 }, RunOptions::default());
        assert!(matches!(err, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn dephasing_fit_recovers_synthetic_curve() {
        let n = 300.0;
        let scales = TimeScales::new(n);
        let grid = TimeGrid { tmax_tau: 12.0 * n.sqrt(), points: 240 };
        let times = grid.times(&scales);
        let acc = SeriesAccuracy::with_tol(1e-9);
        let mean_p: Vec<f64> = times.iter().map(|&t| p_analytic_scaled(t, scales, &acc).unwrap()).collect();
        let curve = EnsembleCurve {
            t_over_tau: times.iter().map(|t| t / scales.tau).collect(),
            stderr_p: vec![1e-3; times.len()],
            times,
            mean_p,
            realizations_done: 1,
            scales,
            config_hash: String::new(),
            clamp_events: 0,
            curves: None,
        };
        let fit = fit_dephasing(&curve, &FitOptions::default()).unwrap();
        assert!((fit.ratio_to_nominal() - 1.0).abs() < 0.02, "{fit:?}");
        assert!(fit.stderr > 0.0 && fit.stderr < 0.05 * fit.tau_dp);

        let mut short = curve.clone();
        short.times.truncate(100);
        assert!(matches!(fit_dephasing(&short, &FitOptions::default()), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn delta_coefficients_from_exact_data() {
        let data: Vec<(f64, Vec<(i64, f64)>)> = [25.0, 50.0, 100.0]
            .iter()
            .map(|&k| {
                let e = 2.0 * PI / k;
                (k, DELTA_FIT_ALPHAS.iter().map(|&a| (a, 0.7 * e - 0.3 * a as f64 * e * e)).collect())
            })
            .collect();
        let (c0, c1) = fit_delta_coefficients(&data).unwrap();
        assert!((c0 - 0.7).abs() < 1e-10 && (c1 + 0.3).abs() < 1e-10);
    }
}
