use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;

use super::detection::{DetectionConfig, JitterModel};
use super::stream::{Channel, EventStream, BACKGROUND, PS_PER_S};
use crate::biphoton::BiphotonParams;
use crate::error::{Error, Result};

/// Shard length in picoseconds; each shard draws from its own ChaCha stream.
pub const SHARD_PS: u64 = 1_000_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOptions {
    /// Keep per-event pair ids.
    pub keep_truth: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { keep_truth: true }
    }
}

/// Seconds to whole picoseconds.
pub fn to_ps(seconds: f64) -> u64 {
    (seconds * PS_PER_S).round() as u64
}

/// Random generator for shard `index` of a run seeded with `seed`.
pub fn shard_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Poisson variate; zero for a zero mean.
pub fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).map_or(0, |d| d.sample(rng) as u64)
    } else {
        0
    }
}

/// Heralded delay `t_s − t_i` in seconds: `+Exp(Γ_i)` with probability `Γ_s/(Γ_s+Γ_i)`,
/// otherwise `−Exp(Γ_s)`.
pub fn sample_delay<R: Rng>(rng: &mut R, gamma_s: f64, gamma_i: f64) -> f64 {
    let u: f64 = rng.random();
    let e: f64 = rng.sample(Exp1);
    if u < gamma_s / (gamma_s + gamma_i) {
        e / gamma_i
    } else {
        -e / gamma_s
    }
}

fn jitter<R: Rng>(rng: &mut R, d: &DetectionConfig) -> f64 {
    match d.jitter_model {
        JitterModel::Gaussian => {
            let z: f64 = rng.sample(StandardNormal);
            z * d.jitter_sigma()
        }
        JitterModel::Uniform => (rng.random::<f64>() - 0.5) * d.timing_resolution,
    }
}

/// Monte Carlo detector time tags for a heralded pair source.
pub fn simulate_stream(
    p: &BiphotonParams<f64>,
    d: &DetectionConfig,
    duration: f64,
    seed: u64,
) -> Result<EventStream> {
    simulate_stream_with(p, d, duration, seed, SimOptions::default())
}

pub fn simulate_stream_with(
    p: &BiphotonParams<f64>,
    d: &DetectionConfig,
    duration: f64,
    seed: u64,
    opts: SimOptions,
) -> Result<EventStream> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid("duration", format!("must be > 0 (got {duration})")));
    }
    if let Some(msg) = p.violations().into_iter().next() {
        return Err(Error::invalid("biphoton", msg));
    }
    d.validate()?;
    let duration_ps = to_ps(duration);
    let shards = duration_ps.div_ceil(SHARD_PS);
    let parts: Vec<(u64, Vec<(u64, Channel, u64)>)> = (0..shards)
        .into_par_iter()
        .map(|k| simulate_shard(p, d, duration_ps, seed, k))
        .collect();
    let pairs_generated = parts.iter().map(|s| s.0).sum();
    let events: Vec<_> = parts.into_iter().flat_map(|s| s.1).collect();
    let mut stream = EventStream::from_events(events, duration_ps, opts.keep_truth)?;
    stream.seed = seed;
    stream.pairs_generated = pairs_generated;
    Ok(stream.apply_dead_time(to_ps(d.dead_time)))
}

fn simulate_shard(
    p: &BiphotonParams<f64>,
    d: &DetectionConfig,
    duration_ps: u64,
    seed: u64,
    index: u64,
) -> (u64, Vec<(u64, Channel, u64)>) {
    let mut rng = shard_rng(seed, index);
    let start = index * SHARD_PS;
    let len_ps = SHARD_PS.min(duration_ps - start);
    let len_s = len_ps as f64 / PS_PER_S;
    let place = |rel_ps: f64| -> Option<u64> {
        let abs = start as i64 + rel_ps.round() as i64;
        (0..=duration_ps as i64).contains(&abs).then_some(abs as u64)
    };

    let n_pairs = poisson(&mut rng, p.pair_rate * len_s);
    let mut out = Vec::with_capacity((n_pairs as f64 * 0.6) as usize + 16);
    let eta_i = d.idler_efficiency();
    for j in 0..n_pairs {
        let id = (index << 40) | j;
        // Fixed draw order per pair, so efficiencies never change which pairs exist.
        let t0 = rng.random::<f64>() * len_ps as f64;
        let delay = sample_delay(&mut rng, p.gamma_s, p.gamma_i) * PS_PER_S;
        let u_idler: f64 = rng.random();
        let u_split: f64 = rng.random();
        let u_signal: f64 = rng.random();
        let j_idler = jitter(&mut rng, d) * PS_PER_S;
        let j_signal = jitter(&mut rng, d) * PS_PER_S;

        if u_idler < eta_i {
            if let Some(t) = place(t0 + j_idler) {
                out.push((t, Channel::Idler, id));
            }
        }
        let (ch, eta) = if u_split < d.split_ratio {
            (Channel::Signal, d.eta_signal)
        } else {
            (Channel::SignalPrime, d.eta_signal_prime)
        };
        if u_signal < eta * d.transmittance_signal {
            if let Some(t) = place(t0 + delay + j_signal) {
                out.push((t, ch, id));
            }
        }
    }
    for ch in Channel::ALL {
        let n = poisson(&mut rng, d.background[ch as usize] * len_s);
        for _ in 0..n {
            let rel = rng.random::<f64>() * len_ps as f64;
            if let Some(t) = place(rel) {
                out.push((t, ch, BACKGROUND));
            }
        }
    }
    out.sort_by_key(|e| e.0);
    (n_pairs, out)
}

/// Independent Poisson clicks at `rates` `[D_i, D_s, D_s']`; the coherent-light control.
pub fn poisson_stream(rates: [f64; 3], duration: f64, seed: u64) -> Result<EventStream> {
    let silent = BiphotonParams::new(1.0, 1.0, 0.0, 0.0, 0.0)?;
    let d = DetectionConfig {
        background: rates,
        ..DetectionConfig::ideal()
    };
    simulate_stream(&silent, &d, duration, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source(rate: f64) -> BiphotonParams<f64> {
        let (gs, gi) = (1.0 / 20.7e-9, 1.0 / 24.4e-9);
        BiphotonParams::new(gs, gi, crate::biphoton::kappa_from_rate(rate, gs, gi), rate, 30e-6)
            .unwrap()
    }

    #[test]
    fn background_only_count() {
        let s = poisson_stream([100.0, 0.0, 0.0], 10.0, 7).unwrap();
        let n = s.count(Channel::Idler) as f64;
        assert!((n - 1000.0).abs() < 3.0 * 1000f64.sqrt(), "{n}");
        assert_eq!(s.count(Channel::Signal), 0);
        assert!(s.truth.as_ref().unwrap().iter().all(|&t| t == BACKGROUND));
    }

    #[test]
    fn same_seed_identical_other_seed_different() {
        let p = source(5e4);
        let d = DetectionConfig::default();
        let a = simulate_stream(&p, &d, 2.5, 11).unwrap();
        let b = simulate_stream(&p, &d, 2.5, 11).unwrap();
        let c = simulate_stream(&p, &d, 2.5, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.times_ps, c.times_ps);
        assert!(a.is_sorted());
        assert!(a.times_ps.last().copied().unwrap() <= a.duration_ps);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let p = source(2e4);
        let d = DetectionConfig::default();
        let many = simulate_stream(&p, &d, 3.3, 5).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate_stream(&p, &d, 3.3, 5).unwrap());
        assert_eq!(many, one);
    }

    #[test]
    fn singles_rates_follow_efficiencies() {
        let p = source(5e4);
        let d = DetectionConfig::default();
        let s = simulate_stream(&p, &d, 4.0, 3).unwrap();
        let n = s.pairs_generated as f64;
        let ni = s.count(Channel::Idler) as f64;
        let expect = n * d.idler_efficiency();
        assert!((ni - expect).abs() < 4.0 * expect.sqrt());
        let ns = (s.count(Channel::Signal) + s.count(Channel::SignalPrime)) as f64;
        let expect = n * d.signal_efficiency();
        assert!((ns - expect).abs() < 4.0 * expect.sqrt());
    }

    #[test]
    fn delay_sampler_branch_means() {
        let mut rng = shard_rng(1, 0);
        let (gs, gi) = (1.0 / 20.7e-9, 1.0 / 24.4e-9);
        let draws: Vec<f64> = (0..200_000).map(|_| sample_delay(&mut rng, gs, gi)).collect();
        let pos: Vec<f64> = draws.iter().copied().filter(|&x| x >= 0.0).collect();
        let frac = pos.len() as f64 / draws.len() as f64;
        assert!((frac - 0.5410).abs() < 0.005, "{frac}");
        let mean = pos.iter().sum::<f64>() / pos.len() as f64;
        assert!((mean / 24.4e-9 - 1.0).abs() < 0.02);
    }

    #[test]
    fn invalid_duration_rejected() {
        let p = source(1.0);
        assert!(simulate_stream(&p, &DetectionConfig::default(), 0.0, 1).is_err());
    }
}
