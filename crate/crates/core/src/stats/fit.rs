use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use super::histogram::Histogram;
use super::stream::{Channel, EventStream};
use crate::biphoton::{bandwidth, DelayDensity};
use crate::error::{Error, Result};

/// Maximum-likelihood decay rates from a coincidence histogram.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// Correlated counts (area of the two-sided exponential).
    pub amplitude: f64,
    pub gamma_s: f64,
    pub gamma_i: f64,
    /// Flat accidental counts per bin.
    pub background: f64,
    /// Standard errors of `(amplitude, gamma_s, gamma_i, background)`.
    pub stderr: [f64; 4],
    pub deviance: f64,
    pub bins_used: usize,
    pub iterations: usize,
}

impl DecayFit {
    pub fn bandwidth(&self) -> f64 {
        bandwidth(self.gamma_s, self.gamma_i)
    }
}

/// Half-width of the delay region left out of the fit: three delay-jitter σ plus one bin.
pub fn default_exclusion(delay_sigma: f64, bin: f64) -> f64 {
    if delay_sigma > 0.0 {
        3.0 * delay_sigma + bin
    } else {
        0.0
    }
}

struct Problem {
    edges: Vec<(f64, f64)>,
    counts: Vec<f64>,
}

impl Problem {
    // θ = (A, ln Γ_s, ln Γ_i, B)
    fn model(&self, th: &Vector4<f64>) -> Vec<f64> {
        let d = DelayDensity::new(th[1].exp(), th[2].exp());
        self.edges
            .iter()
            .map(|&(a, b)| th[0] * d.mass_between(a, b) + th[3])
            .collect()
    }

    fn deviance(&self, mu: &[f64]) -> f64 {
        2.0 * self
            .counts
            .iter()
            .zip(mu)
            .map(|(&n, &m)| {
                let log_term = if n > 0.0 { n * (n / m).ln() } else { 0.0 };
                m - n + log_term
            })
            .sum::<f64>()
    }

    fn jacobian(&self, th: &Vector4<f64>) -> Vec<Vector4<f64>> {
        let d = DelayDensity::new(th[1].exp(), th[2].exp());
        let h = 1e-6;
        let shifted = |i: usize, s: f64| {
            let mut t = *th;
            t[i] += s;
            DelayDensity::new(t[1].exp(), t[2].exp())
        };
        let (sp, sm, ip, im) = (shifted(1, h), shifted(1, -h), shifted(2, h), shifted(2, -h));
        self.edges
            .iter()
            .map(|&(a, b)| {
                Vector4::new(
                    d.mass_between(a, b),
                    th[0] * (sp.mass_between(a, b) - sm.mass_between(a, b)) / (2.0 * h),
                    th[0] * (ip.mass_between(a, b) - im.mass_between(a, b)) / (2.0 * h),
                    1.0,
                )
            })
            .collect()
    }

    fn normal_equations(&self, th: &Vector4<f64>, mu: &[f64]) -> (Matrix4<f64>, Vector4<f64>) {
        let mut info = Matrix4::zeros();
        let mut grad = Vector4::zeros();
        for ((j, &m), &n) in self.jacobian(th).iter().zip(mu).zip(&self.counts) {
            info += j * j.transpose() / m;
            grad += j * ((n - m) / m);
        }
        (info, grad)
    }
}

/// Poisson maximum-likelihood fit of `A·∫p + B` per bin, ignoring bins that overlap
/// `|τ| < exclude`.
pub fn fit_decay_rates(h: &Histogram, exclude: f64) -> Result<DecayFit> {
    let mut edges = Vec::new();
    let mut counts = Vec::new();
    for k in 0..h.len() {
        let (a, b) = h.edges(k);
        if exclude > 0.0 && b > -exclude && a < exclude {
            continue;
        }
        edges.push((a, b));
        counts.push(h.counts[k] as f64);
    }
    if edges.len() < 8 {
        return Err(Error::Fit(format!("only {} usable bins", edges.len())));
    }
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::Fit("histogram is empty".into()));
    }
    let prob = Problem { edges, counts };
    let mut th = initial_guess(&prob);
    let mut mu = prob.model(&th);
    let mut dev = prob.deviance(&mu);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it + 1;
        let (info, grad) = prob.normal_equations(&th, &mu);
        let mut damped = info;
        for i in 0..4 {
            damped[(i, i)] *= 1.0 + lambda;
        }
        let Some(step) = damped.cholesky().map(|c| c.solve(&grad)) else {
            lambda *= 10.0;
            continue;
        };
        let mut trial = th + step;
        trial[0] = trial[0].max(1e-12);
        trial[3] = trial[3].max(1e-12);
        let mu_t = prob.model(&trial);
        let dev_t = prob.deviance(&mu_t);
        if dev_t.is_finite() && dev_t <= dev {
            let gain = dev - dev_t;
            th = trial;
            mu = mu_t;
            dev = dev_t;
            lambda = (lambda / 10.0).max(1e-12);
            if gain < 1e-10 * (1.0 + dev) && step.abs().max() < 1e-9 * (1.0 + th.abs().max()) {
                break;
            }
            if gain < 1e-12 {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    let (info, _) = prob.normal_equations(&th, &mu);
    let cov = info
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular information matrix".into()))?;
    let (gs, gi) = (th[1].exp(), th[2].exp());
    let se = |i: usize| cov[(i, i)].max(0.0).sqrt();
    Ok(DecayFit {
        amplitude: th[0],
        gamma_s: gs,
        gamma_i: gi,
        background: th[3],
        stderr: [se(0), gs * se(1), gi * se(2), se(3)],
        deviance: dev,
        bins_used: prob.counts.len(),
        iterations,
    })
}

fn initial_guess(p: &Problem) -> Vector4<f64> {
    let n = p.counts.len();
    let tail = (n / 10).max(1);
    let outer: f64 =
        p.counts[..tail].iter().sum::<f64>() + p.counts[n - tail..].iter().sum::<f64>();
    let b0 = (outer / (2 * tail) as f64).max(1e-3);
    let mut area = 0.0;
    let (mut neg_w, mut neg_m, mut pos_w, mut pos_m) = (0.0, 0.0, 0.0, 0.0);
    for (&(a, b), &c) in p.edges.iter().zip(&p.counts) {
        let w = (c - b0).max(0.0);
        area += w;
        let mid = 0.5 * (a + b);
        if mid < 0.0 {
            neg_w += w;
            neg_m += -mid * w;
        } else {
            pos_w += w;
            pos_m += mid * w;
        }
    }
    let width = p.edges[n - 1].1 - p.edges[0].0;
    let tau_s = if neg_w > 0.0 { neg_m / neg_w } else { width / 20.0 };
    let tau_i = if pos_w > 0.0 { pos_m / pos_w } else { width / 20.0 };
    Vector4::new(
        area.max(1.0),
        (1.0 / tau_s.max(1e-15)).ln(),
        (1.0 / tau_i.max(1e-15)).ln(),
        b0,
    )
}

/// Goodness of fit of a histogram against a known delay density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub chi2: f64,
    pub dof: usize,
}

impl ChiSquare {
    pub fn reduced(&self) -> f64 {
        self.chi2 / self.dof as f64
    }
}

/// Pearson χ² of `h` against `pairs · ∫_bin p + floor`, over bins expecting at least
/// `min_expected` counts.
pub fn chi_square_against(
    h: &Histogram,
    density: &DelayDensity<f64>,
    pairs: f64,
    floor: f64,
    min_expected: f64,
) -> ChiSquare {
    let mut chi2 = 0.0;
    let mut dof = 0;
    for (k, &c) in h.counts.iter().enumerate() {
        let (a, b) = h.edges(k);
        let e = pairs * density.mass_between(a, b) + floor;
        if e >= min_expected {
            chi2 += (c as f64 - e).powi(2) / e;
            dof += 1;
        }
    }
    ChiSquare { chi2, dof }
}

/// Expected accidental coincidences per bin, `N_s N_i · bin / duration`.
pub fn accidental_floor(stream: &EventStream, bin: f64) -> f64 {
    let ns = (stream.count(Channel::Signal) + stream.count(Channel::SignalPrime)) as f64;
    let ni = stream.count(Channel::Idler) as f64;
    ns * ni * bin / stream.duration()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(gs: f64, gi: f64, area: f64, floor: f64) -> Histogram {
        let mut h = Histogram::empty(1000, 300_000, 1).unwrap();
        let d = DelayDensity::new(gs, gi);
        for k in 0..h.len() {
            let (a, b) = h.edges(k);
            h.counts[k] = (area * d.mass_between(a, b) + floor).round() as u64;
        }
        h
    }

    #[test]
    fn recovers_noise_free_rates() {
        let (gs, gi) = (1.0 / 20.7e-9, 1.0 / 24.4e-9);
        let h = synthetic(gs, gi, 1e7, 50.0);
        let f = fit_decay_rates(&h, 0.0).unwrap();
        assert!((f.gamma_s / gs - 1.0).abs() < 1e-3, "{f:?}");
        assert!((f.gamma_i / gi - 1.0).abs() < 1e-3);
        assert!((f.background / 50.0 - 1.0).abs() < 0.01);
        let ex = fit_decay_rates(&h, 2e-9).unwrap();
        assert!((ex.gamma_s / gs - 1.0).abs() < 1e-3);
        assert!(ex.bins_used < f.bins_used);
    }

    #[test]
    fn chi_square_of_expectation_is_small() {
        let (gs, gi) = (1.0 / 20.7e-9, 1.0 / 24.4e-9);
        let h = synthetic(gs, gi, 1e6, 10.0);
        let c = chi_square_against(&h, &DelayDensity::new(gs, gi), 1e6, 10.0, 5.0);
        assert!(c.reduced() < 0.1);
        assert!(c.dof > 100);
    }

    #[test]
    fn empty_histogram_fails() {
        let h = Histogram::empty(1000, 100_000, 1).unwrap();
        assert!(matches!(fit_decay_rates(&h, 0.0), Err(Error::Fit(_))));
    }
}
