//! Simulator for a cavity-enhanced, doubly resonant SPDC photon-pair source with a
//! rubidium-compatible linewidth.
//!
//! The analytic kernels (dispersion, mode combs, biphoton waveforms, Voigt absorption)
//! are generic over the scalar type; the Monte Carlo, statistics and scenario layers
//! work in `f64`. Concrete aliases for both precisions live at the crate root.

pub mod biphoton;
pub mod comb;
pub mod config;
pub mod consts;
pub mod crystal;
pub mod error;
pub mod modulation;
pub mod quad;
pub mod real;
pub mod scenario;
pub mod stats;
pub mod vapor;
pub mod waveform;

pub use config::{validate_config, ConfigBuilder, OutputFormat, ScenarioConfig, ScenarioId};
pub use error::{Error, Result};
pub use real::Real;
pub use scenario::{compute_scenario, run_scenario, run_sweep, Manifest};

pub type CrystalSpec64 = crystal::CrystalSpec<f64>;
pub type CrystalSpec32 = crystal::CrystalSpec<f32>;
pub type ModeComb64 = comb::ModeComb<f64>;
pub type ModeStructure64 = comb::ModeStructure<f64>;
pub type ResonantPair64 = comb::ResonantPair<f64>;
pub type BiphotonParams64 = biphoton::BiphotonParams<f64>;
pub type BiphotonParams32 = biphoton::BiphotonParams<f32>;
pub type DelayDensity64 = biphoton::DelayDensity<f64>;
pub type Waveform64 = waveform::Waveform<f64>;
pub type Waveform32 = waveform::Waveform<f32>;
pub type VaporCellSpec64 = vapor::VaporCellSpec<f64>;
pub type AtomicData64 = vapor::AtomicData<f64>;
pub type Absorber64 = vapor::Absorber<f64>;
