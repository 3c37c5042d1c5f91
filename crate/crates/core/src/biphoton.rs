//! Biphoton correlation waveform, bandwidth, pair rates and spectral brightness.
//!
//! Decay rates `Γ_s`, `Γ_i` and the coupling `κ` are angular rates (1/s); bandwidths are
//! reported as ordinary frequencies (Hz).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{lit, Real};
use crate::waveform::Waveform;

/// Detector timing resolution used as the default waveform grid step, s.
pub const DEFAULT_STEP: f64 = 0.35e-9;
/// Default waveform window half-widths, in units of the decay time of each side.
pub const DEFAULT_WINDOW_DECAYS: f64 = 10.0;

/// Parameters of the two-sided exponential correlation function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiphotonParams<T> {
    /// Total signal cavity decay rate, 1/s.
    pub gamma_s: T,
    /// Total idler cavity decay rate, 1/s.
    pub gamma_i: T,
    /// Parametric coupling strength, 1/s.
    pub kappa: T,
    /// Generated pair rate, pairs/s.
    pub pair_rate: T,
    /// Pump power, W.
    pub pump_power: T,
}

impl<T: Real> BiphotonParams<T> {
    pub fn new(gamma_s: T, gamma_i: T, kappa: T, pair_rate: T, pump_power: T) -> Result<Self> {
        let p = Self {
            gamma_s,
            gamma_i,
            kappa,
            pair_rate,
            pump_power,
        };
        match p.violations().into_iter().next() {
            Some(msg) => Err(Error::InvalidParameter {
                name: "biphoton",
                reason: msg,
            }),
            None => Ok(p),
        }
    }

    /// Rate linear in pump power, κ fixed by the rate so that `κ² ∝ P`.
    pub fn from_pump(gamma_s: T, gamma_i: T, pump_power: T, pairs_per_watt: T) -> Result<Self> {
        let rate = rate_from_pump(pump_power, pairs_per_watt);
        Self::new(
            gamma_s,
            gamma_i,
            kappa_from_rate(rate, gamma_s, gamma_i),
            rate,
            pump_power,
        )
    }

    pub fn with_pump(&self, pump_power: T) -> Result<Self> {
        let per_watt = if self.pump_power > T::zero() {
            self.pair_rate / self.pump_power
        } else {
            T::zero()
        };
        Self::from_pump(self.gamma_s, self.gamma_i, pump_power, per_watt)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.gamma_s > T::zero()) {
            v.push(format!("gamma_s must be > 0 (got {})", self.gamma_s));
        }
        if !(self.gamma_i > T::zero()) {
            v.push(format!("gamma_i must be > 0 (got {})", self.gamma_i));
        }
        if !(self.kappa >= T::zero()) {
            v.push(format!("kappa must be >= 0 (got {})", self.kappa));
        }
        if !(self.pair_rate >= T::zero()) {
            v.push(format!("pair rate must be >= 0 (got {})", self.pair_rate));
        }
        if !(self.pump_power >= T::zero()) {
            v.push(format!("pump power must be >= 0 (got {})", self.pump_power));
        }
        v
    }

    /// Prefactor `4κ²Γ_sΓ_i / (Γ_s + Γ_i)²` of the correlated term.
    pub fn correlated_amplitude(&self) -> T {
        let sum = self.gamma_s + self.gamma_i;
        lit::<T>(4.0) * self.kappa * self.kappa * self.gamma_s * self.gamma_i / (sum * sum)
    }

    pub fn bandwidth(&self) -> T {
        bandwidth(self.gamma_s, self.gamma_i)
    }

    pub fn delay_density(&self) -> DelayDensity<T> {
        DelayDensity::new(self.gamma_s, self.gamma_i)
    }

    /// Default window `[−10/Γ_s, +10/Γ_i]`.
    pub fn default_window(&self) -> (T, T) {
        let k = lit::<T>(DEFAULT_WINDOW_DECAYS);
        (-k / self.gamma_s, k / self.gamma_i)
    }
}

/// Second-order correlation `G²(τ)`, τ = t_signal − t_idler.
///
/// At τ = 0 both branches meet at `R² + prefactor`.
pub fn g2<T: Real>(tau: T, p: &BiphotonParams<T>) -> T {
    let shape = if tau < T::zero() {
        (p.gamma_s * tau).exp()
    } else {
        (-p.gamma_i * tau).exp()
    };
    p.pair_rate * p.pair_rate + p.correlated_amplitude() * shape
}

/// Point-sampled `G²` on a zero-anchored grid.
pub fn g2_waveform<T: Real>(p: &BiphotonParams<T>, lo: T, hi: T, step: T) -> Result<Waveform<T>> {
    Waveform::sample(lo, hi, step, |t| g2(t, p))
}

/// Unit-area two-sided exponential density of the heralded signal delay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayDensity<T> {
    pub gamma_s: T,
    pub gamma_i: T,
}

impl<T: Real> DelayDensity<T> {
    pub fn new(gamma_s: T, gamma_i: T) -> Self {
        Self { gamma_s, gamma_i }
    }

    /// Peak value `Γ_sΓ_i / (Γ_s + Γ_i)`.
    pub fn peak(&self) -> T {
        self.gamma_s * self.gamma_i / (self.gamma_s + self.gamma_i)
    }

    pub fn pdf(&self, tau: T) -> T {
        if tau < T::zero() {
            self.peak() * (self.gamma_s * tau).exp()
        } else {
            self.peak() * (-self.gamma_i * tau).exp()
        }
    }

    /// Probability that the signal trails the idler, `(1/Γ_i) / (1/Γ_s + 1/Γ_i)`.
    pub fn mass_positive(&self) -> T {
        self.gamma_s / (self.gamma_s + self.gamma_i)
    }

    pub fn cdf(&self, tau: T) -> T {
        let neg = T::one() - self.mass_positive();
        if tau < T::zero() {
            neg * (self.gamma_s * tau).exp()
        } else {
            T::one() - self.mass_positive() * (-self.gamma_i * tau).exp()
        }
    }

    /// Probability mass in `[a, b]`, accurate in the tails.
    pub fn mass_between(&self, a: T, b: T) -> T {
        let neg = T::one() - self.mass_positive();
        let pos = self.mass_positive();
        if b <= T::zero() {
            // neg (e^{Γs b} − e^{Γs a})
            -neg * (self.gamma_s * b).exp() * (self.gamma_s * (a - b)).exp_m1()
        } else if a >= T::zero() {
            -pos * (-self.gamma_i * a).exp() * (-self.gamma_i * (b - a)).exp_m1()
        } else {
            self.mass_between(a, T::zero()) + self.mass_between(T::zero(), b)
        }
    }

    /// Closed-form FWHM `ln 2 (1/Γ_s + 1/Γ_i)`.
    pub fn fwhm_analytic(&self) -> T {
        T::LN_2() * (T::one() / self.gamma_s + T::one() / self.gamma_i)
    }

    /// FWHM by bisection on each branch of the density.
    pub fn fwhm(&self) -> T {
        let half = lit::<T>(0.5) * self.peak();
        let left = bisect(|t| self.pdf(t) - half, lit::<T>(-50.0) / self.gamma_s, T::zero());
        let right = bisect(|t| self.pdf(t) - half, T::zero(), lit::<T>(50.0) / self.gamma_i);
        right - left
    }
}

fn bisect<T: Real>(f: impl Fn(T) -> T, mut a: T, mut b: T) -> T {
    let fa = f(a);
    for _ in 0..200 {
        let m = lit::<T>(0.5) * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) > T::zero()) == (fa > T::zero()) {
            a = m;
        } else {
            b = m;
        }
    }
    lit::<T>(0.5) * (a + b)
}

/// Background-free heralded delay density on the default window and grid.
pub fn conditional_density<T: Real>(p: &BiphotonParams<T>) -> Result<Waveform<T>> {
    let (lo, hi) = p.default_window();
    conditional_density_on(p, lo, hi, lit(DEFAULT_STEP))
}

/// Cell-averaged delay density on a zero-anchored grid, renormalised so that
/// `Σ values · step = 1` over the window.
pub fn conditional_density_on<T: Real>(
    p: &BiphotonParams<T>,
    lo: T,
    hi: T,
    step: T,
) -> Result<Waveform<T>> {
    if !(p.kappa > T::zero()) {
        return Err(Error::invalid("kappa", "conditional density needs kappa > 0"));
    }
    let d = p.delay_density();
    let grid = Waveform::grid(lo, hi, step)?;
    let half = lit::<T>(0.5) * step;
    let (first, last) = grid.bounds();
    let captured = d.mass_between(first - half, last + half);
    if captured < lit(0.9999) {
        let (slo, shi) = p.default_window();
        return Err(Error::WindowTooSmall {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
            suggested_lo: slo.min(lo).as_f64(),
            suggested_hi: shi.max(hi).as_f64(),
        });
    }
    let cells = grid.map_tau(|t| d.mass_between(t - half, t + half));
    let total: T = cells.values.iter().copied().sum();
    Ok(cells.scaled_by(|_| T::one() / (total * step)))
}

/// Single-photon bandwidth in Hz from angular decay rates.
pub fn bandwidth<T: Real>(gamma_s: T, gamma_i: T) -> T {
    let s2 = gamma_s * gamma_s;
    let i2 = gamma_i * gamma_i;
    let radical = (s2 * s2 + lit::<T>(6.0) * s2 * i2 + i2 * i2).sqrt();
    ((radical - s2 - i2) / lit(2.0)).sqrt() / T::TAU()
}

/// Generated spectral brightness in pairs s⁻¹ mW⁻¹ MHz⁻¹.
pub fn generated_brightness<T: Real>(
    detected_rate: T,
    eta_s: T,
    eta_i: T,
    trans_s: T,
    trans_i: T,
    pump_w: T,
    bandwidth_hz: T,
) -> Result<T> {
    for (name, v) in [
        ("eta_s", eta_s),
        ("eta_i", eta_i),
        ("transmittance_s", trans_s),
        ("transmittance_i", trans_i),
    ] {
        if !(v > T::zero() && v <= T::one()) {
            return Err(Error::Domain {
                quantity: name,
                value: v.as_f64(),
                min: 0.0,
                max: 1.0,
            });
        }
    }
    if !(pump_w > T::zero()) {
        return Err(Error::invalid("pump power", "must be > 0"));
    }
    if !(bandwidth_hz > T::zero()) {
        return Err(Error::invalid("bandwidth", "must be > 0"));
    }
    let pump_mw = pump_w * lit(1e3);
    let bw_mhz = bandwidth_hz * lit(1e-6);
    Ok(detected_rate / (eta_s * eta_i * trans_s * trans_i * pump_mw * bw_mhz))
}

/// Pair rate linear in pump power.
pub fn rate_from_pump<T: Real>(pump_w: T, pairs_per_watt: T) -> T {
    pump_w * pairs_per_watt
}

/// κ such that the integrated correlated part of `G²` equals `R`:
/// `4κ²Γ_sΓ_i/(Γ_s+Γ_i)² · (1/Γ_s + 1/Γ_i) = R`, i.e. `κ² = R (Γ_s + Γ_i) / 4`.
pub fn kappa_from_rate<T: Real>(rate: T, gamma_s: T, gamma_i: T) -> T {
    (rate * (gamma_s + gamma_i) / lit(4.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    const GS: f64 = 1.0 / 20.7e-9;
    const GI: f64 = 1.0 / 24.4e-9;

    fn params(rate: f64) -> BiphotonParams<f64> {
        BiphotonParams::new(GS, GI, kappa_from_rate(rate, GS, GI), rate, 30e-6).unwrap()
    }

    #[test]
    fn g2_floor_continuity_and_e_folding() {
        let p = params(2868.0);
        let floor = p.pair_rate * p.pair_rate;
        assert!((g2(-1e-5, &p) - floor).abs() < 1e-9 * floor);
        assert!((g2(1e-5, &p) - floor).abs() < 1e-9 * floor);
        let left = floor + p.correlated_amplitude() * (GS * -1e-18f64).exp();
        assert!((left - g2(0.0, &p)).abs() <= 1e-9 * g2(0.0, &p));
        let excess0 = g2(0.0, &p) - floor;
        let excess = g2(-20.7e-9, &p) - floor;
        assert!((excess - excess0 / std::f64::consts::E).abs() < 1e-12 * excess0);
        for k in -100..100 {
            assert!(g2(k as f64 * 1e-9, &p) >= floor);
        }
    }

    #[test]
    fn bandwidth_matches_reported_value() {
        let bw = bandwidth(GS, GI);
        assert!((bw - 4.5e6).abs() < 0.1e6, "{bw}");
        // independent script value
        assert!((bw - 4.536_055e6).abs() < 1.0);
    }

    #[test]
    fn bandwidth_equal_rates_and_homogeneity() {
        let g = 5e7;
        let expected = g * (2f64.sqrt() - 1.0).sqrt() / std::f64::consts::TAU;
        assert!((bandwidth(g, g) / expected - 1.0).abs() < 1e-14);
        assert!((bandwidth(3.0 * GS, 3.0 * GI) / (3.0 * bandwidth(GS, GI)) - 1.0).abs() < 1e-14);
        assert_eq!(bandwidth(GS, GI), bandwidth(GI, GS));
    }

    #[test]
    fn brightness_reported_value_and_linearity() {
        let b = generated_brightness::<f64>(2868.0, 0.63, 0.63, 0.27, 0.54, 30e-6, 4.5e6).unwrap();
        assert!((b / 3.67e5 - 1.0).abs() < 0.02, "{b}");
        let unit = generated_brightness::<f64>(1234.5, 1.0, 1.0, 1.0, 1.0, 1e-3, 1e6).unwrap();
        assert!((unit - 1234.5).abs() < 1e-9);
        let half = generated_brightness::<f64>(2868.0, 0.63, 0.63, 0.135, 0.54, 30e-6, 4.5e6).unwrap();
        assert!((half / b - 2.0).abs() < 1e-12);
        assert!(matches!(
            generated_brightness(2868.0, 0.0, 0.63, 0.27, 0.54, 30e-6, 4.5e6),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn kappa_scales_with_root_pump() {
        let a = BiphotonParams::from_pump(GS, GI, 30e-6, 1.65e9).unwrap();
        let b = a.with_pump(60e-6).unwrap();
        assert!((b.pair_rate / a.pair_rate - 2.0).abs() < 1e-12);
        assert!((b.kappa / a.kappa - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(kappa_from_rate(0.0, GS, GI), 0.0);
    }

    #[test]
    fn kappa_round_trip_by_quadrature() {
        let p = params(2868.0);
        let floor = p.pair_rate * p.pair_rate;
        let excess = |t: f64| g2(t, &p) - floor;
        let area = integrate(excess, -60.0 / GS, 0.0, 0.0, 1e-13, 500)
            + integrate(excess, 0.0, 60.0 / GI, 0.0, 1e-13, 500);
        assert!((area / p.pair_rate - 1.0).abs() < 1e-9, "{area}");
    }

    #[test]
    fn density_normalised_and_branch_masses() {
        let p = params(2868.0);
        let w = conditional_density(&p).unwrap();
        assert!((w.integral() - 1.0).abs() < 1e-9);
        let d = p.delay_density();
        assert!((d.mass_positive() - 24.4 / (20.7 + 24.4)).abs() < 1e-12);
        assert!((d.mass_positive() - 0.5410).abs() < 5e-5);
        assert!(w.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn symmetric_density_has_zero_median() {
        let p = BiphotonParams::new(GS, GS, 1.0, 1.0, 0.0).unwrap();
        let d = p.delay_density();
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-15);
        let w = conditional_density(&p).unwrap();
        let zero = (-w.first) as usize;
        for k in 1..100 {
            assert!((w.values[zero - k] - w.values[zero + k]).abs() < 1e-12 * w.values[zero]);
        }
    }

    #[test]
    fn fwhm_bisection_matches_closed_form() {
        let d = DelayDensity::new(GS, GI);
        assert!((d.fwhm() / d.fwhm_analytic() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn narrow_window_rejected_with_suggestion() {
        let p = params(2868.0);
        match conditional_density_on(&p, -50e-9, 50e-9, 0.35e-9) {
            Err(Error::WindowTooSmall { suggested_lo, suggested_hi, .. }) => {
                assert!(suggested_lo <= -10.0 / GS * 0.999);
                assert!(suggested_hi >= 10.0 / GI * 0.999);
            }
            other => panic!("{other:?}"),
        }
        let zero = BiphotonParams::new(GS, GI, 0.0, 0.0, 0.0).unwrap();
        assert!(conditional_density(&zero).is_err());
    }

    #[test]
    fn f32_bandwidth() {
        let bw = bandwidth(GS as f32, GI as f32) as f64;
        assert!((bw - 4.536_055e6).abs() < 10.0);
    }
}
