//! Amplitude modulation of the heralded signal in herald-relative delay.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biphoton::DelayDensity;
use crate::error::{Error, Result};
use crate::quad::integrate_breaks;
use crate::real::{lit, Real};
use crate::stats::{shard_rng, Channel, EventStream, BACKGROUND, PS_PER_S, SHARD_PS};
use crate::waveform::Waveform;

/// Which side of a step edge transmits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSense {
    OpenAfter,
    CloseAfter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileKind {
    Identity,
    /// `count` pulses of width `duty · period`, the first opening at `offset`.
    SquareTrain {
        period: f64,
        duty: f64,
        count: u32,
        offset: f64,
    },
    Step {
        edge: f64,
        sense: StepSense,
    },
    /// Amplitude transmission linearly interpolated between knots, held beyond the ends.
    Sampled {
        taus: Vec<f64>,
        amplitudes: Vec<f64>,
    },
    /// Pointwise product of several profiles.
    Product {
        factors: Vec<ModulationProfile>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationProfile {
    #[serde(flatten)]
    pub kind: ProfileKind,
    /// Delay between herald detection and the modulator clock, s.
    #[serde(default)]
    pub latency: f64,
}

impl From<ProfileKind> for ModulationProfile {
    fn from(kind: ProfileKind) -> Self {
        Self { kind, latency: 0.0 }
    }
}

impl ModulationProfile {
    pub fn identity() -> Self {
        ProfileKind::Identity.into()
    }

    pub fn square_train(period: f64, duty: f64, count: u32, offset: f64) -> Self {
        ProfileKind::SquareTrain {
            period,
            duty,
            count,
            offset,
        }
        .into()
    }

    pub fn step(edge: f64, sense: StepSense) -> Self {
        ProfileKind::Step { edge, sense }.into()
    }

    pub fn sampled(taus: Vec<f64>, amplitudes: Vec<f64>) -> Self {
        ProfileKind::Sampled { taus, amplitudes }.into()
    }

    pub fn with_latency(mut self, latency: f64) -> Self {
        self.latency = latency;
        self
    }

    /// Profile whose transmission is `self · other` everywhere.
    pub fn then(self, other: ModulationProfile) -> Self {
        ProfileKind::Product {
            factors: vec![self, other],
        }
        .into()
    }

    /// Square train of seven half-duty pulses spanning `[lo, hi]`.
    pub fn seven_pulses(lo: f64, hi: f64) -> Self {
        Self::square_train((hi - lo) / 7.0, 0.5, 7, lo)
    }

    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut v = Vec::new();
        if !self.latency.is_finite() {
            v.push(format!("{prefix}latency must be finite"));
        }
        match &self.kind {
            ProfileKind::Identity => {}
            ProfileKind::SquareTrain {
                period,
                duty,
                offset,
                ..
            } => {
                if !(*period > 0.0) {
                    v.push(format!("{prefix}period = {period} must be > 0"));
                }
                if !(0.0..=1.0).contains(duty) {
                    v.push(format!("{prefix}duty = {duty} must lie in [0, 1]"));
                }
                if !offset.is_finite() {
                    v.push(format!("{prefix}offset must be finite"));
                }
            }
            ProfileKind::Step { edge, .. } => {
                if !edge.is_finite() {
                    v.push(format!("{prefix}edge must be finite"));
                }
            }
            ProfileKind::Sampled { taus, amplitudes } => {
                if taus.is_empty() || taus.len() != amplitudes.len() {
                    v.push(format!(
                        "{prefix}sampled profile needs equal, non-zero numbers of taus and amplitudes"
                    ));
                }
                if taus.windows(2).any(|w| !(w[1] > w[0])) {
                    v.push(format!("{prefix}taus must be strictly increasing"));
                }
                if amplitudes.iter().any(|a| !(0.0..=1.0).contains(a)) {
                    v.push(format!("{prefix}amplitudes must lie in [0, 1]"));
                }
            }
            ProfileKind::Product { factors } => {
                for (k, f) in factors.iter().enumerate() {
                    v.extend(f.violations(&format!("{prefix}factors[{k}].")));
                }
            }
        }
        v
    }

    /// Amplitude transmission at herald-relative delay `tau`.
    pub fn amplitude(&self, tau: f64) -> f64 {
        let t = tau - self.latency;
        match &self.kind {
            ProfileKind::Identity => 1.0,
            ProfileKind::SquareTrain {
                period,
                duty,
                count,
                offset,
            } => {
                let x = t - offset;
                if x < 0.0 {
                    return 0.0;
                }
                let pulse = (x / period).floor();
                let open = x - pulse * period < duty * period;
                if open && pulse < *count as f64 {
                    1.0
                } else {
                    0.0
                }
            }
            ProfileKind::Step { edge, sense } => match (sense, t < *edge) {
                (StepSense::CloseAfter, true) | (StepSense::OpenAfter, false) => 1.0,
                _ => 0.0,
            },
            ProfileKind::Sampled { taus, amplitudes } => interpolate(taus, amplitudes, t),
            ProfileKind::Product { factors } => factors.iter().map(|f| f.amplitude(t)).product(),
        }
    }

    /// Delays where the transmission may be discontinuous or kinked.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match &self.kind {
            ProfileKind::Identity => vec![],
            ProfileKind::SquareTrain {
                period,
                duty,
                count,
                offset,
            } => (0..*count)
                .flat_map(|k| {
                    let start = offset + k as f64 * period;
                    [start, start + duty * period]
                })
                .collect(),
            ProfileKind::Step { edge, .. } => vec![*edge],
            ProfileKind::Sampled { taus, .. } => taus.clone(),
            ProfileKind::Product { factors } => {
                factors.iter().flat_map(|f| f.breakpoints()).collect()
            }
        };
        for b in &mut out {
            *b += self.latency;
        }
        out
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.is_empty() {
        return 1.0;
    }
    let k = xs.partition_point(|&v| v <= x);
    if k == 0 {
        return ys[0];
    }
    if k == xs.len() {
        return ys[xs.len() - 1];
    }
    let w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + w * (ys[k] - ys[k - 1])
}

/// Intensity transmission (squared amplitude) at herald-relative delay `tau`.
pub fn intensity_transmission(profile: &ModulationProfile, tau: f64) -> f64 {
    let a = profile.amplitude(tau).clamp(0.0, 1.0);
    a * a
}

/// Pointwise product of `w` with the intensity transmission.
pub fn apply_to_waveform<T: Real>(w: &Waveform<T>, profile: &ModulationProfile) -> Waveform<T> {
    if profile.kind == ProfileKind::Identity {
        return w.clone();
    }
    w.scaled_by(|tau| lit(intensity_transmission(profile, tau.as_f64())))
}

/// `∫_a^b p(τ) m²(τ) dτ`, split at the profile breakpoints.
pub fn modulated_mass(d: &DelayDensity<f64>, profile: &ModulationProfile, a: f64, b: f64) -> f64 {
    let mut breaks: Vec<f64> = profile
        .breakpoints()
        .into_iter()
        .chain([0.0])
        .filter(|&x| x > a && x < b)
        .collect();
    breaks.push(a);
    breaks.push(b);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    integrate_breaks(
        |t| d.pdf(t) * intensity_transmission(profile, t),
        &breaks,
        1e-300,
        1e-12,
    )
}

/// Retains each signal click with probability `m²(τ)`, τ measured from the herald that
/// produced it (truth pairing) or else from the nearest idler click.
pub fn apply_to_stream(
    stream: &EventStream,
    profile: &ModulationProfile,
    seed: u64,
) -> Result<EventStream> {
    let heralds = stream.channel_times(Channel::Idler);
    if heralds.is_empty() && stream.channels.iter().any(|c| c.is_signal()) {
        return Err(Error::invalid("stream", "no idler heralds to modulate against"));
    }
    let truth_herald: HashMap<u64, u64> = match &stream.truth {
        Some(ids) => stream
            .channels
            .iter()
            .zip(ids)
            .zip(&stream.times_ps)
            .filter(|((c, id), _)| **c == Channel::Idler && **id != BACKGROUND)
            .map(|((_, &id), &t)| (id, t))
            .collect(),
        None => HashMap::new(),
    };
    let herald_of = |k: usize| -> u64 {
        let t = stream.times_ps[k];
        if let Some(h) = stream
            .truth
            .as_ref()
            .and_then(|ids| truth_herald.get(&ids[k]))
        {
            return *h;
        }
        let j = heralds.partition_point(|&h| h < t);
        match (j.checked_sub(1).map(|i| heralds[i]), heralds.get(j)) {
            (Some(a), Some(&b)) => {
                if t - a <= b - t {
                    a
                } else {
                    b
                }
            }
            (Some(a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!("heralds checked non-empty"),
        }
    };

    let shards = stream.duration_ps / SHARD_PS + 1;
    let bounds: Vec<usize> = (0..=shards)
        .map(|s| stream.times_ps.partition_point(|&t| t < s * SHARD_PS))
        .collect();
    let keep: Vec<bool> = (0..shards as usize)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = shard_rng(seed, (1 << 63) | s as u64);
            (bounds[s]..bounds[s + 1])
                .map(|k| {
                    if !stream.channels[k].is_signal() {
                        return true;
                    }
                    let tau = (stream.times_ps[k] as i64 - herald_of(k) as i64) as f64 / PS_PER_S;
                    let u: f64 = rng.random();
                    u < intensity_transmission(profile, tau)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(stream.retain_indices(|k| keep[k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biphoton::{conditional_density, kappa_from_rate, BiphotonParams};

    const GS: f64 = 1.0 / 20.7e-9;
    const GI: f64 = 1.0 / 24.4e-9;

    fn params() -> BiphotonParams<f64> {
        BiphotonParams::new(GS, GI, kappa_from_rate(5e4, GS, GI), 5e4, 30e-6).unwrap()
    }

    #[test]
    fn piecewise_definitions() {
        let id = ModulationProfile::identity();
        assert_eq!(intensity_transmission(&id, -3.0), 1.0);
        let sq = ModulationProfile::square_train(10e-9, 0.5, 7, 0.0);
        assert_eq!(intensity_transmission(&sq, 2e-9), 1.0);
        assert_eq!(intensity_transmission(&sq, 7e-9), 0.0);
        assert_eq!(intensity_transmission(&sq, 62e-9), 1.0);
        assert_eq!(intensity_transmission(&sq, 72e-9), 0.0);
        assert_eq!(intensity_transmission(&sq, -1e-9), 0.0);
        let st = ModulationProfile::step(0.0, StepSense::CloseAfter);
        assert_eq!(intensity_transmission(&st, -1e-9), 1.0);
        assert_eq!(intensity_transmission(&st, 1e-9), 0.0);
        let late = st.clone().with_latency(5e-9);
        assert_eq!(intensity_transmission(&late, 1e-9), 1.0);
        let ramp = ModulationProfile::sampled(vec![0.0, 1.0], vec![0.0, 1.0]);
        assert!((intensity_transmission(&ramp, 0.5) - 0.25).abs() < 1e-15);
        assert_eq!(intensity_transmission(&ramp, 2.0), 1.0);
        assert_eq!(intensity_transmission(&ramp, -2.0), 0.0);
    }

    #[test]
    fn identity_is_bitwise_pass_through() {
        let w = conditional_density(&params()).unwrap();
        assert_eq!(apply_to_waveform(&w, &ModulationProfile::identity()), w);
    }

    #[test]
    fn seven_pulses_give_seven_intervals() {
        let p = params();
        let w = conditional_density(&p).unwrap();
        let (lo, hi) = w.bounds();
        let m = apply_to_waveform(&w, &ModulationProfile::seven_pulses(lo, hi));
        let runs = m.support_intervals();
        assert_eq!(runs.len(), 7);
        for &(a, b) in &runs {
            for k in a..=b {
                assert_eq!(m.values[k], w.values[k]);
            }
        }
        assert!(m.values.iter().zip(&w.values).all(|(a, b)| a <= b));
    }

    #[test]
    fn close_after_step_leaves_exponential_growth() {
        let w = conditional_density(&params()).unwrap();
        let m = apply_to_waveform(&w, &ModulationProfile::step(0.0, StepSense::CloseAfter));
        let taus: Vec<f64> = m.taus().collect();
        for (t, v) in taus.iter().zip(&m.values) {
            assert_eq!(*v > 0.0, *t < 0.0, "tau {t}");
        }
        let pts: Vec<(f64, f64)> = taus
            .iter()
            .zip(&m.values)
            .filter(|(_, &v)| v > 0.0)
            .map(|(&t, &v)| (t, v.ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope / GS - 1.0).abs() < 1e-9, "{slope}");
    }

    #[test]
    fn composition_equals_product() {
        let w = conditional_density(&params()).unwrap();
        let a = ModulationProfile::square_train(30e-9, 0.4, 5, -100e-9);
        let b = ModulationProfile::step(20e-9, StepSense::CloseAfter).with_latency(3e-9);
        let seq = apply_to_waveform(&apply_to_waveform(&w, &a), &b);
        let prod = apply_to_waveform(&w, &a.clone().then(b.clone()));
        assert_eq!(seq, prod);
    }

    #[test]
    fn modulated_mass_of_step_is_negative_branch() {
        let d = DelayDensity::new(GS, GI);
        let st = ModulationProfile::step(0.0, StepSense::CloseAfter);
        let m = modulated_mass(&d, &st, -1e-6, 1e-6);
        assert!((m - (1.0 - d.mass_positive())).abs() < 1e-10);
    }

    #[test]
    fn violations_listed() {
        let bad = ModulationProfile::square_train(-1.0, 2.0, 3, 0.0)
            .then(ModulationProfile::sampled(vec![1.0, 0.0], vec![0.5, 1.5]));
        assert_eq!(bad.violations("").len(), 4);
    }

    #[test]
    fn config_round_trip() {
        let p = ModulationProfile::step(0.0, StepSense::CloseAfter).with_latency(2e-9);
        let text = toml::to_string(&p).unwrap();
        assert!(text.contains("kind = \"step\""));
        let back: ModulationProfile = toml::from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn stream_identity_unchanged() {
        let s = crate::stats::simulate_stream(
            &params(),
            &crate::stats::DetectionConfig::default(),
            1.5,
            2,
        )
        .unwrap();
        let out = apply_to_stream(&s, &ModulationProfile::identity(), 99).unwrap();
        assert_eq!(out, s);
    }
}
