//! Monte Carlo time tags, coincidence histograms and anticorrelation estimators.

mod detection;
mod estimators;
mod fit;
mod histogram;
mod simulate;
mod stream;

pub use detection::{DetectionConfig, JitterModel, FWHM_PER_SIGMA};
pub use estimators::{alpha_2d, alpha_2d_trace, alpha_3d, CountSummary};
pub use fit::{
    accidental_floor, chi_square_against, default_exclusion, fit_decay_rates, ChiSquare, DecayFit,
};
pub use histogram::{accumulate, coincidence_histogram, Histogram};
pub use simulate::{
    poisson, poisson_stream, sample_delay, shard_rng, simulate_stream, simulate_stream_with,
    to_ps, SimOptions, SHARD_PS,
};
pub use stream::{Channel, EventStream, BACKGROUND, PS_PER_S};
