//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # long Gaussian run
//! profile.kind = gaussian
//! profile.size_k = 100
//! mean_n = 500
//! atom_number_mode = fixed
//! realizations = 5000
//! time.tmax_tau = 18.85
//! time.points = 600
//! master_seed = 1
//! which = Hs
//! alphas = 1, 3
//! ```
//!
//! Custom profiles list their pieces as `start:end:weight` triples in
//! `profile.pieces`. Unknown and repeated keys are errors.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use crate::cloud::{AtomNumberMode, DensityProfile, Piece, ProfileKind};
use crate::ensemble::ExperimentConfig;
use crate::{Error, Result};

pub const KEYS: [&str; 11] = [
    "profile.kind",
    "profile.size_k",
    "profile.pieces",
    "mean_n",
    "atom_number_mode",
    "realizations",
    "time.tmax_tau",
    "time.points",
    "master_seed",
    "which",
    "alphas",
];

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), message: message.into() }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, format!("cannot parse `{value}`: {e}")))
}

/// Builder that collects raw values; profile fields are resolved together at
/// the end because the kind decides which of them apply.
#[derive(Clone, Debug)]
pub struct ConfigBuilder {
    config: ExperimentConfig,
    kind: ProfileKind,
    size_k: f64,
    pieces: Vec<Piece>,
    seen: BTreeSet<String>,
}

impl Default for ConfigBuilder {
    fn default() -> Self {
        let config = ExperimentConfig::new(DensityProfile::gaussian(100.0).expect("valid default"), 100.0, 1000);
        Self { kind: ProfileKind::Gaussian, size_k: 100.0, pieces: Vec::new(), config, seen: BTreeSet::new() }
    }
}

impl ConfigBuilder {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        Self {
            kind: config.profile.kind,
            size_k: config.profile.size_k,
            pieces: config.profile.pieces.clone(),
            config: config.clone(),
            seen: BTreeSet::new(),
        }
    }

    /// Sets one key; repeated keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(bad(key, "unknown key"));
        }
        if !self.seen.insert(key.to_string()) {
            return Err(bad(key, "given more than once"));
        }
        self.overwrite(key, value)
    }

    /// Sets one key, replacing any earlier value.
    pub fn overwrite(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let c = &mut self.config;
        match key {
            "profile.kind" => {
                self.kind = match value {
                    "gaussian" => ProfileKind::Gaussian,
                    "uniform_box" | "box" => ProfileKind::UniformBox,
                    "custom_piecewise" | "piecewise" => ProfileKind::CustomPiecewise,
                    _ => return Err(bad(key, format!("`{value}` is not gaussian, uniform_box or custom_piecewise"))),
                }
            }
            "profile.size_k" => self.size_k = number(key, value)?,
            "profile.pieces" => {
                self.pieces = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|triple| {
                        let parts: Vec<&str> = triple.split(':').map(str::trim).collect();
                        if parts.len() != 3 {
                            return Err(bad(key, format!("`{triple}` is not start:end:weight")));
                        }
                        Ok(Piece { start: number(key, parts[0])?, end: number(key, parts[1])?, weight: number(key, parts[2])? })
                    })
                    .collect::<Result<_>>()?
            }
            "mean_n" => c.mean_n = number(key, value)?,
            "atom_number_mode" => {
                c.atom_number_mode = match value {
                    "fixed" => AtomNumberMode::Fixed,
                    "poisson" => AtomNumberMode::Poisson,
                    _ => return Err(bad(key, format!("`{value}` is not fixed or poisson"))),
                }
            }
            "realizations" => c.realizations = number(key, value)?,
            "time.tmax_tau" => c.time.tmax_tau = parse_tau_multiple(key, value)?,
            "time.points" => c.time.points = number(key, value)?,
            "master_seed" => c.master_seed = number(key, value)?,
            "which" => c.which = value.parse().map_err(|e: Error| bad(key, e.to_string()))?,
            "alphas" => {
                c.alphas = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| number(key, s))
                    .collect::<Result<_>>()?
            }
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    pub fn build(self) -> Result<ExperimentConfig> {
        let profile = match self.kind {
            ProfileKind::Gaussian => DensityProfile::gaussian(self.size_k),
            ProfileKind::UniformBox => DensityProfile::uniform_box(self.size_k),
            ProfileKind::CustomPiecewise => DensityProfile::piecewise(self.pieces),
        };
        let key = if self.kind == ProfileKind::CustomPiecewise { "profile.pieces" } else { "profile.size_k" };
        let profile = profile.map_err(|e| bad(key, e.to_string()))?;
        let config = ExperimentConfig { profile, ..self.config };
        config.validate()?;
        Ok(config)
    }
}

/// Accepts plain numbers and multiples of π such as `6pi` or `6*pi`.
fn parse_tau_multiple(key: &str, value: &str) -> Result<f64> {
    let v = value.replace(' ', "").to_ascii_lowercase();
    if let Some(head) = v.strip_suffix("pi") {
        let head = head.strip_suffix('*').unwrap_or(head);
        let factor = if head.is_empty() { 1.0 } else { number::<f64>(key, head)? };
        Ok(factor * PI)
    } else {
        number(key, &v)
    }
}

/// Parses a whole config file.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut builder = ConfigBuilder::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(&format!("line {}", lineno + 1), format!("expected key = value, got `{line}`")))?;
        builder.set(key.trim(), value)?;
    }
    builder.build()
}

/// Canonical text form; `parse_config(&to_config_text(c)) == c`.
pub fn to_config_text(c: &ExperimentConfig) -> String {
    let kind = match c.profile.kind {
        ProfileKind::Gaussian => "gaussian",
        ProfileKind::UniformBox => "uniform_box",
        ProfileKind::CustomPiecewise => "custom_piecewise",
    };
    let mut out = format!("profile.kind = {kind}\n");
    if c.profile.kind == ProfileKind::CustomPiecewise {
        let pieces: Vec<String> = c.profile.pieces.iter().map(|p| format!("{:?}:{:?}:{:?}", p.start, p.end, p.weight)).collect();
        out += &format!("profile.pieces = {}\n", pieces.join(", "));
    } else {
        out += &format!("profile.size_k = {:?}\n", c.profile.size_k);
    }
    let mode = match c.atom_number_mode {
        AtomNumberMode::Fixed => "fixed",
        AtomNumberMode::Poisson => "poisson",
    };
    let alphas: Vec<String> = c.alphas.iter().map(|a| a.to_string()).collect();
    out += &format!(
        "mean_n = {:?}\natom_number_mode = {mode}\nrealizations = {}\ntime.tmax_tau = {:?}\ntime.points = {}\nmaster_seed = {}\nwhich = {}\nalphas = {}\n",
        c.mean_n,
        c.realizations,
        c.time.tmax_tau,
        c.time.points,
        c.master_seed,
        c.which,
        alphas.join(", ")
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Propagator;

    const SAMPLE: &str = "
        # comment
        profile.kind = gaussian
        profile.size_k = 100
        mean_n = 500
        atom_number_mode = fixed
        realizations = 5000   # trailing comment
        time.tmax_tau = 6pi
        time.points = 600
        master_seed = 1
        which = Hs
        alphas = 1, 3
    ";

    #[test]
    fn parses_all_keys() {
        let c = parse_config(SAMPLE).unwrap();
        assert_eq!(c.mean_n, 500.0);
        assert_eq!(c.realizations, 5000);
        assert!((c.time.tmax_tau - 6.0 * PI).abs() < 1e-15);
        assert_eq!(c.which, Propagator::Hs);
        assert_eq!(c.alphas, vec![1, 3]);
    }

    #[test]
    fn round_trip() {
        let c = parse_config(SAMPLE).unwrap();
        assert_eq!(parse_config(&to_config_text(&c)).unwrap(), c);
        let pw = "profile.kind = custom_piecewise\nprofile.pieces = -10:0:1, 0:30:2\nmean_n = 40\natom_number_mode = poisson\n";
        let c = parse_config(pw).unwrap();
        assert_eq!(c.profile.pieces.len(), 2);
        assert_eq!(parse_config(&to_config_text(&c)).unwrap(), c);
    }

    #[test]
    fn errors_name_the_key() {
        let key_of = |text: &str| match parse_config(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(key_of("profile.colour = red"), "profile.colour");
        assert_eq!(key_of("mean_n = 10\nmean_n = 20"), "mean_n");
        assert_eq!(key_of("realizations = many"), "realizations");
        assert_eq!(key_of("realizations = 0"), "realizations");
        assert_eq!(key_of("alphas = 1, 2"), "alphas");
        assert_eq!(key_of("profile.size_k = -3"), "profile.size_k");
        assert_eq!(key_of("which = H_x"), "which");
        assert_eq!(key_of("time.points = 1"), "time.points");
        assert_eq!(key_of("just text"), "line 1");
    }
}
