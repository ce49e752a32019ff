//! Single-excitation dynamics of a cold atomic cloud coupled to a one-dimensional
//! waveguide.
//!
//! The crate is organised bottom-up:
//!
//! * [`cloud`] samples random atom configurations from mean-density profiles.
//! * [`hamiltonian`] builds the photon-mediated exchange operators, the bright
//!   state `|W⟩`, the exactly solvable forward/backward eigenbases and the
//!   collective emission rates.
//! * [`theory`] holds the closed-form results: the Dawson function, the
//!   universal survival function `χ(s)`, the dephasing-damped analytic curve
//!   and the `1/6` saturation value.
//! * [`dynamics`] diagonalizes single realizations and propagates `|W⟩`.
//! * [`ensemble`] averages over disorder realizations in parallel with
//!   deterministic seeding, and fits dephasing times and scaling laws.
//! * [`config`] and [`output`] hold the flat experiment-config format and the
//!   CSV / manifest writers used by the command-line tool.
//!
//! Units: `ħ = 1`, the single-atom waveguide emission rate `γ = 1`, and
//! positions are optical phases `φ = k x`.

pub mod cloud;
pub mod config;
pub mod dynamics;
pub mod ensemble;
mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod output;
pub mod stats;
pub mod theory;

pub use num_complex::Complex64;

pub use cloud::{sample_cloud, AtomCloud, AtomNumberMode, DensityProfile, ProfileKind};
pub use dynamics::{diagonalize, survival_curve, Propagator, SpectralDecomposition, SurvivalCurve};
pub use ensemble::{run_survival_ensemble, EnsembleCurve, ExperimentConfig, RunOptions, TimeGrid};
pub use error::{Error, Result};
pub use hamiltonian::{HermitianOperator, SingleExcitationState};
pub use theory::{SeriesAccuracy, TimeScales};
