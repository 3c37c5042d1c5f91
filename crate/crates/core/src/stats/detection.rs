use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How detector timing noise is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum JitterModel {
    /// Gaussian with σ = resolution / 2.355.
    #[default]
    Gaussian,
    /// Uniform over ±resolution / 2.
    Uniform,
}

/// FWHM-to-σ factor of a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Detection chain shared by the three detectors D_i, D_s and D_s'.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    /// Quantum efficiency of the idler detector D_i.
    pub eta_idler: f64,
    /// Quantum efficiency of the signal detector D_s.
    pub eta_signal: f64,
    /// Quantum efficiency of the second signal detector D_s'.
    pub eta_signal_prime: f64,
    pub transmittance_signal: f64,
    pub transmittance_idler: f64,
    /// Timing resolution (FWHM), s.
    pub timing_resolution: f64,
    pub jitter_model: JitterModel,
    /// Coincidence window τ_c, s.
    pub tau_c: f64,
    /// Dark and stray-light rates `[D_i, D_s, D_s']`, counts/s.
    pub background: [f64; 3],
    /// Fraction of the signal arm routed to D_s; the rest reaches D_s'.
    pub split_ratio: f64,
    /// Non-paralyzable dead time, s.
    pub dead_time: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            eta_idler: 0.63,
            eta_signal: 0.63,
            eta_signal_prime: 0.63,
            transmittance_signal: 0.27,
            transmittance_idler: 0.54,
            timing_resolution: 350e-12,
            jitter_model: JitterModel::Gaussian,
            tau_c: 100e-9,
            background: [0.0; 3],
            split_ratio: 0.5,
            dead_time: 0.0,
        }
    }
}

impl DetectionConfig {
    /// Lossless, jitterless, background-free detection.
    pub fn ideal() -> Self {
        Self {
            eta_idler: 1.0,
            eta_signal: 1.0,
            eta_signal_prime: 1.0,
            transmittance_signal: 1.0,
            transmittance_idler: 1.0,
            timing_resolution: 0.0,
            ..Self::default()
        }
    }

    pub fn jitter_sigma(&self) -> f64 {
        self.timing_resolution / FWHM_PER_SIGMA
    }

    /// σ of the signal−idler delay noise (two independent detectors).
    pub fn delay_jitter_sigma(&self) -> f64 {
        match self.jitter_model {
            JitterModel::Gaussian => std::f64::consts::SQRT_2 * self.jitter_sigma(),
            JitterModel::Uniform => self.timing_resolution / 6f64.sqrt(),
        }
    }

    /// Probability that a generated idler photon is counted.
    pub fn idler_efficiency(&self) -> f64 {
        self.eta_idler * self.transmittance_idler
    }

    /// Probability that a generated signal photon is counted on either signal detector.
    pub fn signal_efficiency(&self) -> f64 {
        self.transmittance_signal
            * (self.split_ratio * self.eta_signal + (1.0 - self.split_ratio) * self.eta_signal_prime)
    }

    /// All violated invariants, prefixed with `prefix`.
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut v = Vec::new();
        for (name, p) in [
            ("eta_idler", self.eta_idler),
            ("eta_signal", self.eta_signal),
            ("eta_signal_prime", self.eta_signal_prime),
            ("transmittance_signal", self.transmittance_signal),
            ("transmittance_idler", self.transmittance_idler),
            ("split_ratio", self.split_ratio),
        ] {
            if !(0.0..=1.0).contains(&p) {
                v.push(format!("{prefix}{name} = {p} must lie in [0, 1]"));
            }
        }
        if !(self.tau_c > 0.0) {
            v.push(format!("{prefix}tau_c = {} must be > 0", self.tau_c));
        }
        if !(self.timing_resolution >= 0.0) {
            v.push(format!(
                "{prefix}timing_resolution = {} must be >= 0",
                self.timing_resolution
            ));
        }
        for (k, b) in self.background.iter().enumerate() {
            if !(*b >= 0.0 && b.is_finite()) {
                v.push(format!("{prefix}background[{k}] = {b} must be >= 0"));
            }
        }
        if !(self.dead_time >= 0.0) {
            v.push(format!("{prefix}dead_time = {} must be >= 0", self.dead_time));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations("").into_iter().next() {
            Some(reason) => Err(Error::invalid("detection", reason)),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_valid() {
        assert!(DetectionConfig::default().violations("").is_empty());
        assert!(DetectionConfig::ideal().violations("").is_empty());
        let d = DetectionConfig::default();
        assert!((d.jitter_sigma() - 148.63e-12).abs() < 0.01e-12);
    }

    #[test]
    fn every_violation_reported() {
        let d = DetectionConfig {
            eta_signal: 1.5,
            tau_c: 0.0,
            timing_resolution: -1.0,
            ..DetectionConfig::default()
        };
        assert_eq!(d.violations("").len(), 3);
        assert!(d.validate().is_err());
    }
}
