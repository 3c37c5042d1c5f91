//! Uniformly gridded functions of the signal-idler delay.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// Values on the grid `tau_k = (first + k) * step`, `k = 0..len`.
///
/// Grids are anchored on zero delay so that τ = 0 is always a sample when it
/// lies inside the window.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform<T> {
    pub step: T,
    /// Grid index of the first sample (may be negative).
    pub first: i64,
    pub values: Vec<T>,
}

impl<T: Real> Waveform<T> {
    /// Grid of `step` covering `[lo, hi]`, sampled by `f`.
    pub fn sample(lo: T, hi: T, step: T, f: impl Fn(T) -> T) -> Result<Self> {
        let grid = Self::grid(lo, hi, step)?;
        Ok(grid.map_tau(f))
    }

    /// Zero-valued grid of `step` covering `[lo, hi]`.
    pub fn grid(lo: T, hi: T, step: T) -> Result<Self> {
        if !(step > T::zero()) {
            return Err(Error::invalid("step", "must be > 0"));
        }
        if !(hi > lo) {
            return Err(Error::invalid("window", "upper bound must exceed lower bound"));
        }
        let first = (lo / step).floor().as_f64() as i64;
        let last = (hi / step).ceil().as_f64() as i64;
        Ok(Self {
            step,
            first,
            values: vec![T::zero(); (last - first + 1) as usize],
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tau(&self, k: usize) -> T {
        lit::<T>((self.first + k as i64) as f64) * self.step
    }

    pub fn taus(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len()).map(|k| self.tau(k))
    }

    /// Window bounds `(first sample, last sample)`.
    pub fn bounds(&self) -> (T, T) {
        (self.tau(0), self.tau(self.len().saturating_sub(1)))
    }

    /// Same grid, values from `f(tau)`.
    pub fn map_tau(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            values: self.taus().map(f).collect(),
            ..self.clone()
        }
    }

    /// Pointwise product with `g(tau)`.
    pub fn scaled_by(&self, g: impl Fn(T) -> T) -> Self {
        Self {
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(k, &v)| v * g(self.tau(k)))
                .collect(),
            ..self.clone()
        }
    }

    /// `Σ values · step`.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.step
    }

    /// Maximal runs of strictly positive samples, as inclusive index ranges.
    pub fn support_intervals(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for (k, &v) in self.values.iter().enumerate() {
            match (v > T::zero(), start) {
                (true, None) => start = Some(k),
                (false, Some(s)) => {
                    out.push((s, k - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, self.len() - 1));
        }
        out
    }

    pub fn to_f64(&self) -> Waveform<f64> {
        Waveform {
            step: self.step.as_f64(),
            first: self.first,
            values: self.values.iter().map(|v| v.as_f64()).collect(),
        }
    }
}

impl Waveform<f64> {
    /// CSV with columns `tau_ns,<value_column>`.
    pub fn write_csv<W: Write>(&self, mut w: W, value_column: &str) -> Result<()> {
        writeln!(w, "tau_ns,{value_column}")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.tau(k) * 1e9, v)?;
        }
        Ok(())
    }

    pub fn to_json<H: Serialize>(&self, header: &H, value_column: &str) -> serde_json::Value {
        serde_json::json!({
            "header": header,
            "tau_ns": self.taus().map(|t| t * 1e9).collect::<Vec<_>>(),
            value_column: self.values,
        })
    }
}
