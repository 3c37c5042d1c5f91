use std::fmt;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;
/// Truth annotation of events not produced by a pair.
pub const BACKGROUND: u64 = u64::MAX;

/// Detector channel; the discriminant is the on-disk code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Channel {
    Idler = 0,
    Signal = 1,
    SignalPrime = 2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Idler, Channel::Signal, Channel::SignalPrime];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Channel::Idler),
            1 => Ok(Channel::Signal),
            2 => Ok(Channel::SignalPrime),
            c => Err(Error::Parse(format!("unknown channel code {c}"))),
        }
    }

    pub fn is_signal(self) -> bool {
        self != Channel::Idler
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Idler => "D_i",
            Channel::Signal => "D_s",
            Channel::SignalPrime => "D_s'",
        })
    }
}

/// Time-ordered detector clicks.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct EventStream {
    /// Timestamps in picoseconds, non-decreasing.
    pub times_ps: Vec<u64>,
    pub channels: Vec<Channel>,
    /// Pair id per event, or [`BACKGROUND`].
    pub truth: Option<Vec<u64>>,
    pub duration_ps: u64,
    pub seed: u64,
    /// Pairs created by the source (detected or not).
    pub pairs_generated: u64,
}

impl EventStream {
    /// Builds a stream from unordered events, sorting stably by time.
    pub fn from_events(
        mut events: Vec<(u64, Channel, u64)>,
        duration_ps: u64,
        keep_truth: bool,
    ) -> Result<Self> {
        events.sort_by_key(|e| e.0);
        if let Some(last) = events.last() {
            if last.0 > duration_ps {
                return Err(Error::invalid(
                    "stream",
                    format!("timestamp {} ps beyond duration {duration_ps} ps", last.0),
                ));
            }
        }
        Ok(Self {
            times_ps: events.iter().map(|e| e.0).collect(),
            channels: events.iter().map(|e| e.1).collect(),
            truth: keep_truth.then(|| events.iter().map(|e| e.2).collect()),
            duration_ps,
            seed: 0,
            pairs_generated: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.times_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ps.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    pub fn time_s(&self, k: usize) -> f64 {
        self.times_ps[k] as f64 / PS_PER_S
    }

    /// Sorted timestamps of one channel.
    pub fn channel_times(&self, ch: Channel) -> Vec<u64> {
        self.select(|c| c == ch)
    }

    /// Sorted timestamps of both signal detectors.
    pub fn signal_times(&self) -> Vec<u64> {
        self.select(Channel::is_signal)
    }

    fn select(&self, keep: impl Fn(Channel) -> bool) -> Vec<u64> {
        self.times_ps
            .iter()
            .zip(&self.channels)
            .filter(|(_, &c)| keep(c))
            .map(|(&t, _)| t)
            .collect()
    }

    pub fn count(&self, ch: Channel) -> usize {
        self.channels.iter().filter(|&&c| c == ch).count()
    }

    /// Count rate of one channel, counts/s.
    pub fn rate(&self, ch: Channel) -> f64 {
        self.count(ch) as f64 / self.duration()
    }

    pub fn is_sorted(&self) -> bool {
        self.times_ps.windows(2).all(|w| w[0] <= w[1])
    }

    /// Keeps events where `keep(k)` is true.
    pub fn retain_indices(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&k| keep(k)).collect();
        Self {
            times_ps: idx.iter().map(|&k| self.times_ps[k]).collect(),
            channels: idx.iter().map(|&k| self.channels[k]).collect(),
            truth: self
                .truth
                .as_ref()
                .map(|t| idx.iter().map(|&k| t[k]).collect()),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Self {
        Self {
            times_ps: Vec::new(),
            channels: Vec::new(),
            truth: None,
            duration_ps: self.duration_ps,
            seed: self.seed,
            pairs_generated: self.pairs_generated,
        }
    }

    /// Drops events arriving within `dead_ps` of the previous accepted click on the same channel.
    pub fn apply_dead_time(&self, dead_ps: u64) -> Self {
        if dead_ps == 0 {
            return self.clone();
        }
        let mut last: [Option<u64>; 3] = [None; 3];
        let mut keep = vec![false; self.len()];
        for (k, (&t, &c)) in self.times_ps.iter().zip(&self.channels).enumerate() {
            let slot = &mut last[c as usize];
            if slot.is_none_or(|l| t - l >= dead_ps) {
                *slot = Some(t);
                keep[k] = true;
            }
        }
        self.retain_indices(|k| keep[k])
    }

    /// Flat little-endian records: u64 picosecond timestamp, u8 channel.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(self.len() * 9);
        for (&t, &c) in self.times_ps.iter().zip(&self.channels) {
            buf.extend_from_slice(&t.to_le_bytes());
            buf.push(c.code());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads the binary record format; duration is taken as the last timestamp.
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() % 9 != 0 {
            return Err(Error::Parse(format!(
                "binary stream length {} is not a multiple of 9",
                bytes.len()
            )));
        }
        let mut events = Vec::with_capacity(bytes.len() / 9);
        for rec in bytes.chunks_exact(9) {
            let t = u64::from_le_bytes(rec[..8].try_into().expect("8-byte slice"));
            events.push((t, Channel::from_code(rec[8])?, BACKGROUND));
        }
        Self::read_back(events)
    }

    /// CSV with header `time_ps,channel`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time_ps,channel")?;
        for (&t, &c) in self.times_ps.iter().zip(&self.channels) {
            writeln!(w, "{t},{}", c.code())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut events = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let (t, c) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected two fields", n + 1)))?;
            let t: u64 = t
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
            let c: u8 = c
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
            events.push((t, Channel::from_code(c)?, BACKGROUND));
        }
        Self::read_back(events)
    }

    fn read_back(events: Vec<(u64, Channel, u64)>) -> Result<Self> {
        if events.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(Error::Parse("timestamps are not non-decreasing".into()));
        }
        let duration = events.last().map_or(0, |e| e.0);
        Self::from_events(events, duration, false)
    }
}
