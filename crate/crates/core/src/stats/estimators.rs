use serde::Serialize;

use super::histogram::Histogram;
use super::simulate::to_ps;
use super::stream::{Channel, EventStream};
use crate::error::{Error, Result};

/// Two-detector anticorrelation `R / (τ_c R_s R_i)`.
pub fn alpha_2d(coincidence_rate: f64, r_s: f64, r_i: f64, tau_c: f64) -> Result<f64> {
    if !(r_s > 0.0) {
        return Err(Error::UndefinedEstimator("signal singles rate is zero"));
    }
    if !(r_i > 0.0) {
        return Err(Error::UndefinedEstimator("idler singles rate is zero"));
    }
    if !(tau_c > 0.0) {
        return Err(Error::UndefinedEstimator("coincidence window is zero"));
    }
    Ok(coincidence_rate / (tau_c * r_s * r_i))
}

/// `α_2d` for every histogram bin, with the bin width as coincidence window.
///
/// Returns `(bin center s, α_2d)`.
pub fn alpha_2d_trace(h: &Histogram, r_s: f64, r_i: f64) -> Result<Vec<(f64, f64)>> {
    let t = h.duration();
    h.counts
        .iter()
        .enumerate()
        .map(|(k, &c)| Ok((h.center(k), alpha_2d(c as f64 / t, r_s, r_i, h.bin_width())?)))
        .collect()
}

/// Singles and herald-conditioned coincidence counts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountSummary {
    pub duration: f64,
    pub tau_c: f64,
    /// Clicks on D_i, D_s, D_s'.
    pub singles: [u64; 3],
    /// Heralds with at least one D_s click within ±τ_c/2.
    pub n_si: u64,
    /// Heralds with at least one D_s' click within ±τ_c/2.
    pub n_spi: u64,
    /// Heralds with clicks on both D_s and D_s'.
    pub n_sspi: u64,
}

impl CountSummary {
    pub fn from_stream(stream: &EventStream, tau_c: f64) -> Result<Self> {
        if !(tau_c > 0.0) {
            return Err(Error::invalid("tau_c", "must be > 0"));
        }
        let half = to_ps(tau_c / 2.0);
        let heralds = stream.channel_times(Channel::Idler);
        let hit_s = window_hits(&heralds, &stream.channel_times(Channel::Signal), half);
        let hit_p = window_hits(&heralds, &stream.channel_times(Channel::SignalPrime), half);
        let both = hit_s.iter().zip(&hit_p).filter(|(a, b)| **a && **b).count();
        Ok(Self {
            duration: stream.duration(),
            tau_c,
            singles: Channel::ALL.map(|c| stream.count(c) as u64),
            n_si: hit_s.iter().filter(|&&h| h).count() as u64,
            n_spi: hit_p.iter().filter(|&&h| h).count() as u64,
            n_sspi: both as u64,
        })
    }

    pub fn heralds(&self) -> u64 {
        self.singles[0]
    }

    pub fn r_i(&self) -> f64 {
        self.singles[0] as f64 / self.duration
    }

    pub fn r_s(&self) -> f64 {
        self.singles[1] as f64 / self.duration
    }

    pub fn r_s_prime(&self) -> f64 {
        self.singles[2] as f64 / self.duration
    }

    /// Combined rate of both signal detectors.
    pub fn r_signal(&self) -> f64 {
        self.r_s() + self.r_s_prime()
    }

    pub fn r_si(&self) -> f64 {
        self.n_si as f64 / self.duration
    }

    pub fn r_spi(&self) -> f64 {
        self.n_spi as f64 / self.duration
    }

    pub fn r_sspi(&self) -> f64 {
        self.n_sspi as f64 / self.duration
    }

    pub fn alpha_3d(&self) -> Result<f64> {
        alpha_3d(self)
    }

    /// First-order standard error of `α_3d` from the three coincidence counts.
    pub fn alpha_3d_stderr(&self) -> Result<f64> {
        let a = alpha_3d(self)?;
        let rel2 = [self.n_sspi, self.n_si, self.n_spi]
            .iter()
            .map(|&n| if n > 0 { 1.0 / n as f64 } else { 0.0 })
            .sum::<f64>();
        let floor = if self.n_sspi == 0 {
            // One-count scale when no triples were seen.
            self.heralds() as f64 / (self.n_si as f64 * self.n_spi as f64)
        } else {
            0.0
        };
        Ok((a * rel2.sqrt()).max(floor))
    }
}

/// Three-detector anticorrelation `R_ss'i R_i / (R_si R_s'i)`.
pub fn alpha_3d(s: &CountSummary) -> Result<f64> {
    if s.heralds() == 0 {
        return Err(Error::UndefinedEstimator("no idler heralds"));
    }
    if s.n_si == 0 || s.n_spi == 0 {
        return Err(Error::UndefinedEstimator("no signal coincidences on one detector"));
    }
    Ok(s.n_sspi as f64 * s.heralds() as f64 / (s.n_si as f64 * s.n_spi as f64))
}

/// For each herald, whether any click lies in `[t − half, t + half]`.
fn window_hits(heralds: &[u64], clicks: &[u64], half: u64) -> Vec<bool> {
    let mut lo = 0usize;
    heralds
        .iter()
        .map(|&t| {
            let start = t.saturating_sub(half);
            while lo < clicks.len() && clicks[lo] < start {
                lo += 1;
            }
            lo < clicks.len() && clicks[lo] <= t + half
        })
        .collect()
}
