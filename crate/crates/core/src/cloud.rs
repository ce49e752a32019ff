//! Random atomic configurations.
//!
//! Positions are stored as optical phases `φ = k x`, so a Gaussian cloud of
//! size `kσ` has density `n(φ) = N exp(-φ²/(kσ)²) / sqrt(π (kσ)²)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::PI;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Gaussian,
    UniformBox,
    CustomPiecewise,
}

/// One constant-density piece of a custom profile; `weight` is the fraction
/// of atoms (before normalization) that fall into `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub kind: ProfileKind,
    /// `kσ` for the Gaussian, full width `k·W` for the box, total support span
    /// for piecewise profiles.
    pub size_k: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pieces: Vec<Piece>,
}

impl DensityProfile {
    pub fn gaussian(size_k: f64) -> Result<Self> {
        let p = Self { kind: ProfileKind::Gaussian, size_k, pieces: Vec::new() };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform_box(width_k: f64) -> Result<Self> {
        let p = Self { kind: ProfileKind::UniformBox, size_k: width_k, pieces: Vec::new() };
        p.validate()?;
        Ok(p)
    }

    pub fn piecewise(pieces: Vec<Piece>) -> Result<Self> {
        let lo = pieces.iter().map(|p| p.start).fold(f64::INFINITY, f64::min);
        let hi = pieces.iter().map(|p| p.end).fold(f64::NEG_INFINITY, f64::max);
        let p = Self { kind: ProfileKind::CustomPiecewise, size_k: hi - lo, pieces };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.size_k.is_finite() && self.size_k > 0.0) {
            return Err(Error::InvalidProfile(format!("size_k must be positive, got {}", self.size_k)));
        }
        if self.kind == ProfileKind::CustomPiecewise {
            if self.pieces.is_empty() {
                return Err(Error::InvalidProfile("piecewise profile without pieces".into()));
            }
            for p in &self.pieces {
                if !(p.start.is_finite() && p.end.is_finite() && p.end > p.start) {
                    return Err(Error::InvalidProfile(format!(
                        "piece [{}, {}) is empty or not finite",
                        p.start, p.end
                    )));
                }
                if !(p.weight >= 0.0 && p.weight.is_finite()) {
                    return Err(Error::InvalidProfile(format!("negative weight {}", p.weight)));
                }
            }
            if self.total_weight() <= 0.0 {
                return Err(Error::InvalidProfile("total weight must be positive".into()));
            }
        }
        Ok(())
    }

    fn total_weight(&self) -> f64 {
        self.pieces.iter().map(|p| p.weight).sum()
    }

    /// Region outside of which the density vanishes (or is below `1e-300` for
    /// the Gaussian).
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            ProfileKind::Gaussian => (-27.0 * self.size_k, 27.0 * self.size_k),
            ProfileKind::UniformBox => (-0.5 * self.size_k, 0.5 * self.size_k),
            ProfileKind::CustomPiecewise => {
                let lo = self.pieces.iter().map(|p| p.start).fold(f64::INFINITY, f64::min);
                let hi = self.pieces.iter().map(|p| p.end).fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    /// Cumulative distribution of a single atom position.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            ProfileKind::Gaussian => {
                // normal with standard deviation kσ/√2
                0.5 * erfc_neg(x / self.size_k)
            }
            ProfileKind::UniformBox => ((x / self.size_k) + 0.5).clamp(0.0, 1.0),
            ProfileKind::CustomPiecewise => {
                let total = self.total_weight();
                self.pieces
                    .iter()
                    .map(|p| p.weight * ((x - p.start) / (p.end - p.start)).clamp(0.0, 1.0))
                    .sum::<f64>()
                    / total
            }
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            ProfileKind::Gaussian => {
                let normal = Normal::new(0.0, self.size_k / std::f64::consts::SQRT_2)
                    .expect("validated size");
                normal.sample(rng)
            }
            ProfileKind::UniformBox => (rng.random::<f64>() - 0.5) * self.size_k,
            ProfileKind::CustomPiecewise => {
                let total = self.total_weight();
                let mut u = rng.random::<f64>() * total;
                let mut chosen = self.pieces.last().expect("validated pieces");
                for p in &self.pieces {
                    if u < p.weight {
                        chosen = p;
                        break;
                    }
                    u -= p.weight;
                }
                chosen.start + rng.random::<f64>() * (chosen.end - chosen.start)
            }
        }
    }
}

/// `1 + erf(z)` written with `erfc` so the lower tail keeps relative accuracy.
fn erfc_neg(z: f64) -> f64 {
    if z < 0.0 {
        erfc(-z)
    } else {
        2.0 - erfc(z)
    }
}

/// One disorder realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomCloud {
    positions_k: Vec<f64>,
    profile: DensityProfile,
    seed: u64,
}

impl AtomCloud {
    /// Builds a cloud from explicit positions (sorted here, stable so that
    /// coincident atoms keep their input order).
    pub fn from_positions(mut positions_k: Vec<f64>, profile: DensityProfile, seed: u64) -> Result<Self> {
        if positions_k.is_empty() {
            return Err(Error::InvalidAtomCount(0.0));
        }
        if positions_k.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("atom positions must be finite".into()));
        }
        positions_k.sort_by(f64::total_cmp);
        Ok(Self { positions_k, profile, seed })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions_k
    }

    pub fn n_atoms(&self) -> usize {
        self.positions_k.len()
    }

    pub fn profile(&self) -> &DensityProfile {
        &self.profile
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Phase factors `e^{iφ_m}`.
    pub fn phases(&self) -> Vec<num_complex::Complex64> {
        self.positions_k.iter().map(|&x| num_complex::Complex64::from_polar(1.0, x)).collect()
    }
}

/// Draws `n_atoms` independent positions from `profile`, sorted ascending.
pub fn sample_cloud(profile: &DensityProfile, n_atoms: usize, seed: u64) -> Result<AtomCloud> {
    if n_atoms == 0 {
        return Err(Error::InvalidAtomCount(0.0));
    }
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..n_atoms).map(|_| profile.draw(&mut rng)).collect();
    AtomCloud::from_positions(positions, profile.clone(), seed)
}

/// Mean density `n(φ)` normalized to `∫ n dφ = N`.
pub fn density_at(profile: &DensityProfile, x_k: f64, n_atoms: f64) -> f64 {
    match profile.kind {
        ProfileKind::Gaussian => {
            let s = profile.size_k;
            n_atoms * (-(x_k / s).powi(2)).exp() / (PI * s * s).sqrt()
        }
        ProfileKind::UniformBox => {
            if x_k.abs() <= 0.5 * profile.size_k {
                n_atoms / profile.size_k
            } else {
                0.0
            }
        }
        ProfileKind::CustomPiecewise => {
            let total = profile.total_weight();
            profile
                .pieces
                .iter()
                .filter(|p| x_k >= p.start && x_k < p.end)
                .map(|p| n_atoms * p.weight / (total * (p.end - p.start)))
                .sum()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomNumberMode {
    Fixed,
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AtomCount {
    pub n_atoms: usize,
    /// A Poisson draw of zero was raised to one atom.
    pub clamped: bool,
}

pub fn draw_atom_count(mean_n: f64, mode: AtomNumberMode, seed: u64) -> Result<AtomCount> {
    if !(mean_n >= 1.0 && mean_n.is_finite()) {
        return Err(Error::InvalidAtomCount(mean_n));
    }
    match mode {
        AtomNumberMode::Fixed => Ok(AtomCount { n_atoms: mean_n.round() as usize, clamped: false }),
        AtomNumberMode::Poisson => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let poisson = Poisson::new(mean_n).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let n = poisson.sample(&mut rng) as usize;
            Ok(if n == 0 {
                AtomCount { n_atoms: 1, clamped: true }
            } else {
                AtomCount { n_atoms: n, clamped: false }
            })
        }
    }
}
