use std::io::Write;

use serde::Serialize;

use super::simulate::to_ps;
use super::stream::{EventStream, PS_PER_S};
use crate::error::{Error, Result};

/// Coincidence counts versus delay `t_signal − t_herald`.
///
/// Bin `k` covers `[(first + k)·bin, (first + k + 1)·bin)` picoseconds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Histogram {
    pub bin_ps: u64,
    pub first: i64,
    pub counts: Vec<u64>,
    pub duration_ps: u64,
}

impl Histogram {
    /// Empty bins spanning `[−window, window)` on a zero-anchored grid.
    pub fn empty(bin_ps: u64, window_ps: u64, duration_ps: u64) -> Result<Self> {
        if bin_ps == 0 {
            return Err(Error::invalid(
                "bin width",
                "must be at least the 1 ps timestamp resolution",
            ));
        }
        if window_ps == 0 {
            return Err(Error::invalid("window", "must be > 0"));
        }
        let half = window_ps.div_ceil(bin_ps) as i64;
        Ok(Self {
            bin_ps,
            first: -half,
            counts: vec![0; 2 * half as usize],
            duration_ps,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_ps as f64 / PS_PER_S
    }

    pub fn duration(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    /// Bin edges `[lo, hi)` in seconds.
    pub fn edges(&self, k: usize) -> (f64, f64) {
        let lo = (self.first + k as i64) as f64 * self.bin_width();
        (lo, lo + self.bin_width())
    }

    pub fn center(&self, k: usize) -> f64 {
        let (lo, hi) = self.edges(k);
        0.5 * (lo + hi)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV with columns `tau_ns,counts`, τ at bin centers.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tau_ns,counts")?;
        for (k, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{c}", self.center(k) * 1e9)?;
        }
        Ok(())
    }
}

/// Histogram of signal (D_s ∪ D_s') minus idler delays within ±`window`.
pub fn coincidence_histogram(stream: &EventStream, bin: f64, window: f64) -> Result<Histogram> {
    let mut h = Histogram::empty(to_ps(bin), to_ps(window), stream.duration_ps)?;
    let signal = stream.signal_times();
    let herald = stream.channel_times(super::stream::Channel::Idler);
    accumulate(&mut h, &signal, &herald);
    Ok(h)
}

/// Adds all `signal − herald` delays that fall in the histogram range.
///
/// Both slices must be sorted; the sweep is linear in the input plus the number of
/// coincidences found.
pub fn accumulate(h: &mut Histogram, signal: &[u64], herald: &[u64]) {
    let bin = h.bin_ps as i64;
    let d_min = h.first * bin;
    let d_max = (h.first + h.len() as i64) * bin;
    let mut lo = 0usize;
    for &s in signal {
        let s = s as i64;
        while lo < herald.len() && herald[lo] as i64 <= s - d_max {
            lo += 1;
        }
        for &t in &herald[lo..] {
            let d = s - t as i64;
            if d < d_min {
                break;
            }
            h.counts[((d - d_min) / bin) as usize] += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::stream::Channel;

    #[test]
    fn single_delay_lands_in_its_bin() {
        let s = EventStream::from_events(
            vec![(1_000, Channel::Idler, 0), (4_000, Channel::Signal, 0)],
            10_000,
            false,
        )
        .unwrap();
        let h = coincidence_histogram(&s, 1e-9, 10e-9).unwrap();
        assert_eq!(h.total(), 1);
        let k = h.counts.iter().position(|&c| c == 1).unwrap();
        let (lo, hi) = h.edges(k);
        assert!((lo - 3e-9).abs() < 1e-18 && (hi - 4e-9).abs() < 1e-18);
    }

    #[test]
    fn empty_stream_gives_empty_counts() {
        let s = EventStream::default();
        let h = coincidence_histogram(&s, 1e-9, 5e-9).unwrap();
        assert_eq!(h.total(), 0);
        assert_eq!(h.len(), 10);
        assert!(coincidence_histogram(&s, 0.0, 5e-9).is_err());
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = crate::stats::simulate::shard_rng(9, 0);
        use rand::Rng;
        let mut ev = Vec::new();
        for _ in 0..3000 {
            let ch = Channel::from_code(rng.random_range(0..3)).unwrap();
            ev.push((rng.random_range(0..1_000_000u64), ch, 0));
        }
        let s = EventStream::from_events(ev, 1_000_000, false).unwrap();
        let h = coincidence_histogram(&s, 700e-12, 20e-9).unwrap();
        let mut brute = Histogram::empty(700, 20_000, s.duration_ps).unwrap();
        let sig = s.signal_times();
        let her = s.channel_times(Channel::Idler);
        let (d_min, d_max) = (brute.first * 700, (brute.first + brute.len() as i64) * 700);
        let mut pairs = 0;
        for &a in &sig {
            for &b in &her {
                let d = a as i64 - b as i64;
                if d >= d_min && d < d_max {
                    brute.counts[((d - d_min) / 700) as usize] += 1;
                    pairs += 1;
                }
            }
        }
        assert_eq!(h, brute);
        assert_eq!(h.total(), pairs);
    }
}
