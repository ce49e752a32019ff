use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use superatom::config::{parse_config, to_config_text, ConfigBuilder};
use superatom::ensemble::{
    collect_rates, collect_w_samples, run_survival_ensemble, scaling_sweep, EnsembleCurve, ExperimentConfig, RunOptions,
    SweepQuantity,
};
use superatom::output::{csv_columns, csv_rows, fmt_num, OutputSet, RunManifest, StageTiming};
use superatom::stats::{histogram, ks_exponential};
use superatom::theory::{chi, p_analytic_scaled, saturation, SeriesAccuracy, TimeScales};

const NORMALIZATION_NOTE: &str =
    "p_analytic uses the amplitude prefactor 8/pi^2 with weights 1/k^2 over odd k, so that P(0) = 1";

#[derive(Parser, Debug)]
#[command(name = "superatom", version, about = "Single-excitation superatom dynamics in a 1D waveguide")]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true, env = "SUPERATOM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form curves: chi(s), chi(s)^2 and the damped analytic P(t).
    Theory(TheoryArgs),
    /// Disorder-averaged survival of |W>.
    Ensemble(EnsembleArgs),
    /// Overlap statistics of w_alpha and optional scaling sweeps.
    Stats(StatsArgs),
    /// Forward and backward emission rates of |W>.
    Rates(RatesArgs),
    /// Figure presets (same as `ensemble --reproduce`).
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug)]
struct TheoryArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Grid end in units of tau = pi/N.
    #[arg(long, default_value_t = 40.0)]
    tmax_tau: f64,
    #[arg(long, default_value_t = 2000)]
    points: usize,
    /// Absolute truncation tolerance of the series.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Flat key = value config file; flags below override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gaussian, uniform_box or custom_piecewise.
    #[arg(long)]
    profile: Option<String>,
    /// k sigma (Gaussian) or k W (box).
    #[arg(long)]
    size_k: Option<f64>,
    /// Mean atom number.
    #[arg(long)]
    n: Option<f64>,
    /// fixed or poisson.
    #[arg(long)]
    atom_number_mode: Option<String>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Grid end in units of tau; accepts multiples of pi such as `6pi`.
    #[arg(long)]
    tmax_tau: Option<String>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hs, HF or Heff.
    #[arg(long)]
    which: Option<String>,
    /// Comma-separated odd labels.
    #[arg(long)]
    alphas: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    Fig2,
    Fig3,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum)]
    reproduce: Option<Preset>,
    /// Also write every single-realization curve.
    #[arg(long)]
    keep_curves: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(value_enum)]
    preset: Preset,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    keep_curves: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    /// |h_{alpha alpha}| against the cloud size.
    H,
    /// |delta_alpha| against the cloud size, with the c0/c1 fit.
    Delta,
    /// Std of |w_alpha| against the atom number.
    WStd,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    alpha: i64,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long, value_enum, requires = "sweep_values")]
    sweep: Option<SweepKind>,
    /// Cloud sizes (h, delta) or atom numbers (w-std), comma-separated.
    #[arg(long, requires = "sweep")]
    sweep_values: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RatesArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

/// Invalid user input, reported with exit status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    Usage(message.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let is_usage = e.downcast_ref::<Usage>().is_some()
                || matches!(e.downcast_ref::<superatom::Error>(), Some(superatom::Error::Config { .. }));
            ExitCode::from(if is_usage { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let opts = RunOptions { threads: cli.threads, keep_curves: false };
    match cli.command {
        Command::Theory(a) => cmd_theory(a),
        Command::Ensemble(a) => cmd_ensemble(a.config, a.reproduce, a.keep_curves, &a.out, opts),
        Command::Reproduce(a) => cmd_ensemble(a.config, Some(a.preset), a.keep_curves, &a.out, opts),
        Command::Stats(a) => cmd_stats(a, opts),
        Command::Rates(a) => cmd_rates(a, opts),
    }
}

struct Stages {
    started: Instant,
    last: Instant,
    timings: Vec<StageTiming>,
}

impl Stages {
    fn new() -> Self {
        let now = Instant::now();
        Self { started: now, last: now, timings: Vec::new() }
    }

    fn mark(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming { stage: stage.into(), seconds: (now - self.last).as_secs_f64() });
        self.last = now;
    }

    fn finish(self, manifest: &mut RunManifest) {
        manifest.wall_time_seconds = self.started.elapsed().as_secs_f64();
        manifest.stages = self.timings;
    }
}

fn commit(files: OutputSet, dir: &Path, manifest: RunManifest) -> Result<()> {
    let paths = files.commit(dir, manifest).with_context(|| format!("writing results to {}", dir.display()))?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_theory(a: TheoryArgs) -> Result<()> {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    if a.points < 2 || !(a.tmax_tau > 0.0) || !(a.tol > 0.0) {
        return Err(usage("need --points >= 2, --tmax-tau > 0 and --tol > 0"));
    }
    let mut stages = Stages::new();
    let scales = TimeScales::new(a.n as f64);
    let acc = SeriesAccuracy { abs_tol: a.tol, max_terms: 10_000_000 };
    let s: Vec<f64> = (0..a.points).map(|i| a.tmax_tau * i as f64 / (a.points - 1) as f64).collect();
    let mut chi_v = Vec::with_capacity(s.len());
    let mut p = Vec::with_capacity(s.len());
    for &si in &s {
        chi_v.push(chi(si, &acc)?);
        p.push(p_analytic_scaled(si * scales.tau, scales, &acc)?);
    }
    let chi_sq: Vec<f64> = chi_v.iter().map(|c| c * c).collect();
    stages.mark("evaluate");
    let mut files = OutputSet::new();
    files.add("theory.csv", csv_columns(&["s", "chi", "chi_sq", "p_analytic"], &[&s, &chi_v, &chi_sq, &p])?);
    let mut manifest = RunManifest::new(
        "theory",
        json!({ "n": a.n, "tmax_tau": a.tmax_tau, "points": a.points, "tol": a.tol, "tau": scales.tau, "tau_dp": scales.tau_dp }),
    );
    manifest.summary.insert("p_analytic_last".into(), json!(p.last()));
    manifest.summary.insert("saturation".into(), json!(saturation()));
    manifest.notes.push(NORMALIZATION_NOTE.into());
    stages.finish(&mut manifest);
    commit(files, &a.out, manifest)
}

fn preset_config(preset: Preset) -> ExperimentConfig {
    let mut b = ConfigBuilder::default();
    let (n, r, tmax) = match preset {
        Preset::Fig2 => ("100", "2000", 8.0 * PI),
        Preset::Fig3 => ("1000", "5000", 6.0 * PI),
    };
    for (k, v) in [
        ("profile.kind", "gaussian"),
        ("profile.size_k", "100"),
        ("mean_n", n),
        ("atom_number_mode", "fixed"),
        ("realizations", r),
        ("time.points", "801"),
        ("which", "Hs"),
    ] {
        b.overwrite(k, v).expect("preset keys are valid");
    }
    b.overwrite("time.tmax_tau", &tmax.to_string()).expect("preset grid is valid");
    b.build().expect("preset is valid")
}

fn resolve_config(args: &ConfigArgs, base: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
    let start = match (&args.config, base) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            parse_config(&text)?
        }
        (None, Some(c)) => c,
        (None, None) => ConfigBuilder::default().build()?,
    };
    let mut b = ConfigBuilder::from_config(&start);
    let overrides = [
        ("profile.kind", args.profile.clone()),
        ("profile.size_k", args.size_k.map(|v| v.to_string())),
        ("mean_n", args.n.map(|v| v.to_string())),
        ("atom_number_mode", args.atom_number_mode.clone()),
        ("realizations", args.realizations.map(|v| v.to_string())),
        ("time.tmax_tau", args.tmax_tau.clone()),
        ("time.points", args.points.map(|v| v.to_string())),
        ("master_seed", args.seed.map(|v| v.to_string())),
        ("which", args.which.clone()),
        ("alphas", args.alphas.clone()),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            b.overwrite(key, &v)?;
        }
    }
    Ok(b.build()?)
}

fn manifest_for(command: &str, config: &ExperimentConfig) -> RunManifest {
    let mut m = RunManifest::new(command, serde_json::to_value(config).expect("config serializes"));
    m.summary.insert("config_text".into(), json!(to_config_text(config)));
    m.summary.insert("config_hash".into(), json!(config.hash()));
    m
}

/// Local maxima of `p` above `level` strictly inside `(0, s_end)`.
fn revivals(curve: &EnsembleCurve, level: f64, s_end: f64) -> Vec<f64> {
    let p = &curve.mean_p;
    (1..p.len().saturating_sub(1))
        .filter(|&i| curve.t_over_tau[i] < s_end && p[i] > level && p[i] >= p[i - 1] && p[i] > p[i + 1])
        .map(|i| curve.t_over_tau[i])
        .collect()
}

fn cmd_ensemble(args: ConfigArgs, preset: Option<Preset>, keep_curves: bool, out: &Path, opts: RunOptions) -> Result<()> {
    let config = resolve_config(&args, preset.map(preset_config))?;
    let mut stages = Stages::new();
    let curve = run_survival_ensemble(&config, RunOptions { keep_curves, ..opts })?;
    stages.mark("ensemble");

    let mut files = OutputSet::new();
    files.add(
        "curve.csv",
        csv_columns(&["t", "t_over_tau", "p_mean", "p_stderr"], &[&curve.times, &curve.t_over_tau, &curve.mean_p, &curve.stderr_p])?,
    );
    let mut manifest = manifest_for("ensemble", &config);
    manifest.counters.insert("realizations".into(), curve.realizations_done as u64);
    manifest.counters.insert("clamp_events".into(), curve.clamp_events as u64);
    manifest.notes.push(NORMALIZATION_NOTE.into());
    if let Some(curves) = &curve.curves {
        let rows = curves.iter().enumerate().flat_map(|(r, c)| {
            c.iter().enumerate().map(move |(i, p)| vec![r.to_string(), i.to_string(), fmt_num(*p)])
        });
        files.add("realizations.csv", csv_rows(&["realization", "time_index", "p"], rows));
    }
    if config.which != superatom::Propagator::Heff {
        let acc = SeriesAccuracy::default();
        let analytic: Vec<f64> = curve.times.iter().map(|&t| p_analytic_scaled(t, curve.scales, &acc)).collect::<Result<_, _>>()?;
        let dev = curve.mean_p.iter().zip(&analytic).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        files.add("analytic.csv", csv_columns(&["t", "t_over_tau", "p_analytic"], &[&curve.times, &curve.t_over_tau, &analytic])?);
        manifest.summary.insert("max_abs_dev_analytic".into(), json!(dev));
        stages.mark("analytic");
    }
    if let Some(p) = preset {
        manifest.summary.insert("preset".into(), json!(format!("{p:?}").to_lowercase()));
        let peaks = revivals(&curve, saturation(), 8.0 * PI);
        manifest.summary.insert("revivals_above_saturation_before_8pi_tau".into(), json!(peaks.len()));
        manifest.summary.insert("revival_positions_t_over_tau".into(), json!(peaks));
    }
    stages.finish(&mut manifest);
    commit(files, out, manifest)
}

fn parse_list(raw: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| usage(format!("--sweep-values: `{s}`: {e}"))))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(usage("--sweep-values is empty"));
    }
    Ok(values)
}

fn cmd_stats(a: StatsArgs, opts: RunOptions) -> Result<()> {
    let config = resolve_config(&a.config, None)?;
    if a.alpha % 2 == 0 {
        return Err(usage(format!("--alpha {} is not odd", a.alpha)));
    }
    if a.bins == 0 {
        return Err(usage("--bins must be at least 1"));
    }
    let sweep_values = a.sweep_values.as_deref().map(parse_list).transpose()?;
    if let Some(v) = &sweep_values {
        if v.len() < 3 {
            return Err(usage(format!("a sweep needs at least 3 values, got {}", v.len())));
        }
    }
    let mut stages = Stages::new();
    let w = collect_w_samples(&config, a.alpha, opts)?;
    stages.mark("samples");
    let mean_hypothesis = 1.0 / config.mean_n;
    let ks = ks_exponential(&w.w_abs_sq, mean_hypothesis)?;
    let upper = 6.0 * mean_hypothesis;
    let bins = histogram(&w.w_abs_sq, a.bins, upper)?;

    let mut files = OutputSet::new();
    files.add(
        "w_samples.csv",
        csv_rows(
            &["realization", "n_atoms", "w_abs_sq"],
            w.w_abs_sq.iter().zip(&w.n_atoms).enumerate().map(|(r, (x, n))| vec![r.to_string(), n.to_string(), fmt_num(*x)]),
        ),
    );
    files.add(
        "w_histogram.csv",
        csv_rows(
            &["lower", "upper", "count", "density", "exp_density"],
            bins.iter().map(|b| {
                let mid = 0.5 * (b.lower + b.upper);
                let exp = (-mid / mean_hypothesis).exp() / mean_hypothesis;
                vec![fmt_num(b.lower), fmt_num(b.upper), b.count.to_string(), fmt_num(b.density), fmt_num(exp)]
            }),
        ),
    );
    let summary = json!({
        "alpha": a.alpha,
        "samples": w.w_abs_sq.len(),
        "mean": w.sq_stats.mean(),
        "mean_stderr": w.sq_stats.stderr(),
        "mean_hypothesis": mean_hypothesis,
        "variance": w.sq_stats.variance(),
        "delta_w": w.abs_stats.std_dev(),
        "ks": ks,
    });
    files.add("ks.json", serde_json::to_vec_pretty(&summary)?);
    stages.mark("statistics");

    let mut manifest = manifest_for("stats", &config);
    manifest.counters.insert("realizations".into(), w.w_abs_sq.len() as u64);
    manifest.counters.insert("clamp_events".into(), w.clamp_events as u64);
    manifest.summary.insert("ks_accepted".into(), json!(ks.accepted));
    manifest.summary.insert("mean".into(), json!(w.sq_stats.mean()));

    if let (Some(kind), Some(values)) = (a.sweep, sweep_values) {
        let configs: Vec<ExperimentConfig> = values
            .iter()
            .map(|&v| {
                let mut b = ConfigBuilder::from_config(&config);
                let key = if kind == SweepKind::WStd { "mean_n" } else { "profile.size_k" };
                b.overwrite(key, &v.to_string())?;
                Ok(b.build()?)
            })
            .collect::<Result<_>>()?;
        let quantity = match kind {
            SweepKind::H => SweepQuantity::H { alpha: a.alpha, beta: a.alpha },
            SweepKind::Delta => SweepQuantity::Delta { alpha: a.alpha },
            SweepKind::WStd => SweepQuantity::WStd { alpha: a.alpha },
        };
        let fit = scaling_sweep(&configs, quantity, opts)?;
        files.add(
            "sweep.csv",
            csv_rows(
                &["x", "mean_n", "realizations", "raw", "excess_sq", "excess_sq_stderr", "estimate", "resolved"],
                fit.points.iter().map(|p| {
                    vec![
                        fmt_num(p.x),
                        fmt_num(p.mean_n),
                        p.realizations.to_string(),
                        fmt_num(p.raw),
                        fmt_num(p.excess_sq),
                        fmt_num(p.excess_sq_stderr),
                        fmt_num(p.estimate),
                        p.resolved.to_string(),
                    ]
                }),
            ),
        );
        files.add("sweep_fit.json", serde_json::to_vec_pretty(&fit)?);
        manifest.summary.insert("sweep_slope".into(), json!(fit.slope()));
        stages.mark("sweep");
    }
    stages.finish(&mut manifest);
    commit(files, &a.out, manifest)
}

fn cmd_rates(a: RatesArgs, opts: RunOptions) -> Result<()> {
    let config = resolve_config(&a.config, None)?;
    let mut stages = Stages::new();
    let r = collect_rates(&config, opts)?;
    stages.mark("rates");
    let mut files = OutputSet::new();
    files.add(
        "rates.csv",
        csv_rows(
            &["realization", "n_atoms", "gamma_forward", "gamma_backward"],
            (0..r.n_atoms.len()).map(|i| {
                vec![i.to_string(), r.n_atoms[i].to_string(), fmt_num(r.gamma_forward[i]), fmt_num(r.gamma_backward[i])]
            }),
        ),
    );
    let summary = json!({
        "gamma_forward_mean": r.forward.mean(),
        "gamma_forward_std": r.forward.std_dev(),
        "gamma_backward_mean": r.backward.mean(),
        "gamma_backward_stderr": r.backward.stderr(),
        "gamma_backward_std": r.backward.std_dev(),
    });
    files.add("rates_summary.json", serde_json::to_vec_pretty(&summary)?);
    let mut manifest = manifest_for("rates", &config);
    manifest.counters.insert("realizations".into(), r.n_atoms.len() as u64);
    manifest.counters.insert("clamp_events".into(), r.clamp_events as u64);
    manifest.summary.insert("gamma_backward_mean".into(), json!(r.backward.mean()));
    stages.finish(&mut manifest);
    commit(files, &a.out, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn presets_build() {
        assert_eq!(preset_config(Preset::Fig2).mean_n, 100.0);
        assert_eq!(preset_config(Preset::Fig3).realizations, 5000);
    }

    #[test]
    fn sweep_lists() {
        assert_eq!(parse_list("25, 50,100").unwrap(), vec![25.0, 50.0, 100.0]);
        assert!(parse_list(" , ").is_err());
        assert!(parse_list("a").is_err());
    }
}
