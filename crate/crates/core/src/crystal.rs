//! Dispersion, free spectral ranges and the phase-matching gain envelope of the
//! monolithic type-II crystal cavity.
//!
//! Wavelengths cross the public API in metres; Sellmeier tables are evaluated in
//! micrometres internally. Frequencies are ordinary frequencies in Hz.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::consts::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// Argument at which `sinc²(x) = 1/2`.
const SINC2_HALF_POINT: f64 = 1.391_557_378_251_510_5;

/// Shipped KTP dispersion table.
pub const KTP_TABLE: &str = include_str!("../data/ktp.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// One principal axis as written in a dispersion file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisTable {
    pub constant: f64,
    /// `[b, c]` pairs contributing `b / (λ² − c)` with λ in µm.
    #[serde(default)]
    pub poles: Vec<[f64; 2]>,
    /// Coefficients of `dn/dT = Σ a_k / λ^k` (1/K, λ in µm).
    #[serde(default)]
    pub thermo_per_k: Vec<f64>,
}

/// A dispersion file: per-axis tables sharing a validity band and reference temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionTable {
    #[serde(default)]
    pub name: String,
    pub reference_temperature_k: f64,
    pub band_um: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<AxisTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<AxisTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<AxisTable>,
}

impl DispersionTable {
    pub fn ktp() -> Self {
        toml::from_str(KTP_TABLE).expect("shipped KTP table parses")
    }

    pub fn axis(&self, axis: Axis) -> Option<&AxisTable> {
        match axis {
            Axis::X => self.x.as_ref(),
            Axis::Y => self.y.as_ref(),
            Axis::Z => self.z.as_ref(),
        }
    }
}

/// Sellmeier model for one axis with a linear thermo-optic correction.
#[derive(Clone, Debug, PartialEq)]
pub struct SellmeierSet<T> {
    pub constant: T,
    /// `(b, c)` with contribution `b / (λ² − c)`, λ in µm.
    pub poles: Vec<(T, T)>,
    /// `dn/dT = Σ thermo[k] / λ^k`, λ in µm.
    pub thermo: Vec<T>,
    pub reference_temperature: T,
    /// Validity band in metres, inclusive.
    pub band: (T, T),
}

impl<T: Real> SellmeierSet<T> {
    /// Dispersionless set with `n² = n0²` and no temperature dependence.
    pub fn constant_index(n0: T) -> Self {
        Self {
            constant: n0 * n0,
            poles: Vec::new(),
            thermo: Vec::new(),
            reference_temperature: lit(293.15),
            band: (lit(0.5e-6), lit(1.2e-6)),
        }
    }

    pub fn from_table(table: &DispersionTable, axis: Axis) -> Result<Self> {
        let a = table.axis(axis).ok_or_else(|| {
            Error::Parse(format!("dispersion table `{}` has no {axis} axis", table.name))
        })?;
        Ok(Self {
            constant: lit(a.constant),
            poles: a.poles.iter().map(|p| (lit(p[0]), lit(p[1]))).collect(),
            thermo: a.thermo_per_k.iter().map(|&t| lit(t)).collect(),
            reference_temperature: lit(table.reference_temperature_k),
            band: (lit(table.band_um[0] * 1e-6), lit(table.band_um[1] * 1e-6)),
        })
    }

    pub fn ktp(axis: Axis) -> Self {
        Self::from_table(&DispersionTable::ktp(), axis).expect("KTP table has y and z axes")
    }

    fn check_band(&self, wavelength: T) -> Result<()> {
        if wavelength < self.band.0 || wavelength > self.band.1 || !wavelength.is_finite() {
            return Err(Error::Domain {
                quantity: "wavelength (m)",
                value: wavelength.as_f64(),
                min: self.band.0.as_f64(),
                max: self.band.1.as_f64(),
            });
        }
        Ok(())
    }

    /// Phase index at `wavelength` (m) and `temperature` (K).
    pub fn index(&self, wavelength: T, temperature: T) -> Result<T> {
        self.check_band(wavelength)?;
        let um = wavelength * lit(1e6);
        let l2 = um * um;
        let n2 = self
            .poles
            .iter()
            .fold(self.constant, |acc, &(b, c)| acc + b / (l2 - c));
        let mut dndt = T::zero();
        let mut inv_pow = T::one();
        for &a in &self.thermo {
            dndt = dndt + a * inv_pow;
            inv_pow = inv_pow / um;
        }
        Ok(n2.sqrt() + dndt * (temperature - self.reference_temperature))
    }
}

/// Geometry, dispersion and tuning of the monolithic PPKTP cavity.
#[derive(Clone, Debug, PartialEq)]
pub struct CrystalSpec<T> {
    /// Crystal (cavity) length, m.
    pub length: T,
    /// Poling period, m.
    pub poling_period: T,
    /// Crystal temperature, K.
    pub temperature: T,
    /// Temperature at which the anchor pair is doubly resonant and phase matched, K.
    pub reference_temperature: T,
    /// Temperature tuning coefficient α_T, Hz/K.
    pub tuning: T,
    pub pump_wavelength: T,
    pub double_pass: bool,
    pub signal_axis: Axis,
    pub idler_axis: Axis,
    /// Detuning of the phase-matched, doubly resonant signal frequency from half the pump, Hz.
    pub anchor_offset: T,
    /// Central finite-difference step for group indices, m.
    pub fd_step: T,
    pub dispersion: Vec<(Axis, SellmeierSet<T>)>,
}

impl<T: Real> CrystalSpec<T> {
    /// Default KTP cavity; length calibrated so the mean FSR matches the 87Rb D1
    /// F=2→F'=1 / F=1→F'=2 spacing.
    pub fn ktp_default() -> Self {
        Self {
            length: lit(10.544e-3),
            poling_period: lit(9.4e-6),
            temperature: lit(308.15),
            reference_temperature: lit(308.15),
            tuning: lit(7.8e9),
            pump_wavelength: lit(SPEED_OF_LIGHT / (2.0 * 377_105_909_878_484.0)),
            double_pass: true,
            signal_axis: Axis::Y,
            idler_axis: Axis::Z,
            anchor_offset: lit(-1_519.914e6),
            fd_step: lit(1e-11),
            dispersion: vec![
                (Axis::Y, SellmeierSet::ktp(Axis::Y)),
                (Axis::Z, SellmeierSet::ktp(Axis::Z)),
            ],
        }
    }

    /// Checks the type invariants, returning one message per violation.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.length > T::zero()) {
            v.push(format!("length must be > 0 (got {})", self.length));
        }
        if !(self.poling_period > T::zero()) {
            v.push(format!("poling period must be > 0 (got {})", self.poling_period));
        }
        if !(self.tuning > T::zero()) {
            v.push(format!("tuning coefficient must be > 0 (got {})", self.tuning));
        }
        if !(self.pump_wavelength > T::zero()) {
            v.push(format!("pump wavelength must be > 0 (got {})", self.pump_wavelength));
        }
        if !(self.fd_step > T::zero()) {
            v.push(format!("finite-difference step must be > 0 (got {})", self.fd_step));
        }
        for axis in [self.signal_axis, self.idler_axis] {
            if self.sellmeier(axis).is_err() {
                v.push(format!("no dispersion data for axis {axis}"));
            }
        }
        v
    }

    pub fn with_temperature(&self, temperature: T) -> Self {
        Self {
            temperature,
            ..self.clone()
        }
    }

    pub fn with_length(&self, length: T) -> Self {
        Self {
            length,
            ..self.clone()
        }
    }

    pub fn sellmeier(&self, axis: Axis) -> Result<&SellmeierSet<T>> {
        self.dispersion
            .iter()
            .find(|(a, _)| *a == axis)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::invalid("dispersion", format!("no Sellmeier set for axis {axis}")))
    }

    pub fn pump_frequency(&self) -> T {
        lit::<T>(SPEED_OF_LIGHT) / self.pump_wavelength
    }

    /// Degenerate down-converted wavelength, 2λ_p.
    pub fn degenerate_wavelength(&self) -> T {
        self.pump_wavelength + self.pump_wavelength
    }

    pub fn refractive_index(&self, axis: Axis, wavelength: T, temperature: T) -> Result<T> {
        self.sellmeier(axis)?.index(wavelength, temperature)
    }

    fn effective_step(&self, wavelength: T) -> T {
        // Keep the stencil above the rounding floor of the scalar type.
        self.fd_step.max(wavelength * T::epsilon().cbrt())
    }

    /// Group index `n − λ dn/dλ` by central difference.
    pub fn group_index(&self, axis: Axis, wavelength: T, temperature: T) -> Result<T> {
        self.group_index_with_step(axis, wavelength, temperature, self.effective_step(wavelength))
    }

    pub fn group_index_with_step(
        &self,
        axis: Axis,
        wavelength: T,
        temperature: T,
        step: T,
    ) -> Result<T> {
        let set = self.sellmeier(axis)?;
        set.check_band(wavelength)?;
        if wavelength - step < set.band.0 || wavelength + step > set.band.1 {
            return Err(Error::Domain {
                quantity: "wavelength (m), finite-difference stencil",
                value: wavelength.as_f64(),
                min: (set.band.0 + step).as_f64(),
                max: (set.band.1 - step).as_f64(),
            });
        }
        let n = set.index(wavelength, temperature)?;
        let up = set.index(wavelength + step, temperature)?;
        let down = set.index(wavelength - step, temperature)?;
        let slope = (up - down) / (step + step);
        Ok(n - wavelength * slope)
    }

    /// Free spectral range `c / (2 n_g L)`.
    pub fn fsr(&self, axis: Axis, wavelength: T, temperature: T) -> Result<T> {
        let ng = self.group_index(axis, wavelength, temperature)?;
        Ok(lit::<T>(SPEED_OF_LIGHT) / (lit::<T>(2.0) * ng * self.length))
    }

    /// Signed `FSR_signal − FSR_idler`.
    pub fn differential_fsr(&self, signal_wl: T, idler_wl: T, temperature: T) -> Result<T> {
        Ok(self.fsr(self.signal_axis, signal_wl, temperature)?
            - self.fsr(self.idler_axis, idler_wl, temperature)?)
    }

    /// Signed `n_g,signal − n_g,idler`.
    pub fn delta_group_index(&self, signal_wl: T, idler_wl: T, temperature: T) -> Result<T> {
        Ok(self.group_index(self.signal_axis, signal_wl, temperature)?
            - self.group_index(self.idler_axis, idler_wl, temperature)?)
    }

    /// FWHM of the gain envelope: `0.44 c / (|Δn_g| L)` double pass, twice that single pass.
    pub fn gain_linewidth(&self, signal_wl: T, idler_wl: T, temperature: T) -> Result<T> {
        let dng = self.delta_group_index(signal_wl, idler_wl, temperature)?;
        if dng == T::zero() {
            return Err(Error::DegenerateDispersion);
        }
        let factor = if self.double_pass { 0.44 } else { 0.88 };
        Ok(lit::<T>(factor * SPEED_OF_LIGHT) / (dng.abs() * self.length))
    }

    /// Vernier cluster spacing `0.5 c / (|Δn_g| L)`.
    pub fn cluster_spacing(&self, signal_wl: T, idler_wl: T, temperature: T) -> Result<T> {
        let dng = self.delta_group_index(signal_wl, idler_wl, temperature)?;
        if dng == T::zero() {
            return Err(Error::DegenerateDispersion);
        }
        Ok(lit::<T>(0.5 * SPEED_OF_LIGHT) / (dng.abs() * self.length))
    }

    /// Phase-matched signal frequency at `temperature`.
    pub fn gain_peak(&self, temperature: T) -> T {
        lit::<T>(0.5) * self.pump_frequency()
            + self.anchor_offset
            + self.tuning * (temperature - self.reference_temperature)
    }

    /// Normalised sinc² gain at signal frequency `signal_hz`; the idler sits at `ν_p − ν_s`.
    ///
    /// The width is evaluated at the reference temperature so the envelope translates
    /// rigidly with `tuning`.
    pub fn gain_envelope(&self, signal_hz: T, temperature: T) -> Result<T> {
        let wl = self.degenerate_wavelength();
        let fwhm = self.gain_linewidth(wl, wl, self.reference_temperature)?;
        let x = lit::<T>(2.0 * SINC2_HALF_POINT) * (signal_hz - self.gain_peak(temperature)) / fwhm;
        Ok(sinc2(x))
    }
}

pub(crate) fn sinc2<T: Real>(x: T) -> T {
    if x.abs() < lit(1e-4) {
        let x2 = x * x;
        T::one() - x2 / lit(3.0)
    } else {
        let s = x.sin() / x;
        s * s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(ng_signal: f64, ng_idler: f64, length: f64) -> CrystalSpec<f64> {
        CrystalSpec {
            length,
            dispersion: vec![
                (Axis::Y, SellmeierSet::constant_index(ng_signal)),
                (Axis::Z, SellmeierSet::constant_index(ng_idler)),
            ],
            ..CrystalSpec::ktp_default()
        }
    }

    const WL: f64 = 795e-9;
    const T0: f64 = 298.0;

    #[test]
    fn ktp_z_index_near_1_84() {
        let c = CrystalSpec::<f64>::ktp_default();
        let n = c.refractive_index(Axis::Z, WL, T0).unwrap();
        // independent evaluation of the published Sellmeier form
        let l2: f64 = 0.795 * 0.795;
        let hand = (4.59423 + 0.06206 / (l2 - 0.04763) + 110.80672 / (l2 - 86.12171)).sqrt();
        assert!((n - 1.84).abs() < 0.02, "{n}");
        assert!((n - hand).abs() < 1e-4);
    }

    #[test]
    fn band_edges_are_inclusive() {
        let s = SellmeierSet::<f64>::ktp(Axis::Y);
        assert!(s.index(0.5e-6, T0).unwrap().is_finite());
        assert!(s.index(1.2e-6, T0).unwrap().is_finite());
        assert!(matches!(s.index(1.3e-6, T0), Err(Error::Domain { .. })));
        assert!(matches!(s.index(0.4e-6, T0), Err(Error::Domain { .. })));
    }

    #[test]
    fn constant_set_is_exact() {
        let s = SellmeierSet::<f64>::constant_index(2.0);
        for wl in [0.5e-6, 0.7e-6, 0.95e-6, 1.2e-6] {
            assert_eq!(s.index(wl, 350.0).unwrap(), 2.0);
        }
        let c = flat(2.0, 2.0, 0.01);
        assert_eq!(c.group_index(Axis::Y, WL, T0).unwrap(), 2.0);
    }

    #[test]
    fn group_index_stencil_near_edge_fails() {
        let c = CrystalSpec::<f64>::ktp_default();
        let err = c.group_index(Axis::Y, 0.5e-6, T0).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn ktp_differential_group_index() {
        let c = CrystalSpec::<f64>::ktp_default();
        let dng = c.delta_group_index(WL, WL, T0).unwrap();
        assert!((dng.abs() - 0.1).abs() < 0.02, "{dng}");
        // oracle script value (Kato-Takaoka, central difference)
        assert!((dng - (-0.10615)).abs() < 2e-4, "{dng}");
    }

    #[test]
    fn group_index_step_convergence() {
        let c = CrystalSpec::<f64>::ktp_default();
        for axis in [Axis::Y, Axis::Z] {
            let a = c.group_index_with_step(axis, WL, T0, 1e-11).unwrap();
            let b = c.group_index_with_step(axis, WL, T0, 0.5e-11).unwrap();
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn fsr_arithmetic_and_scaling() {
        let c = flat(1.85, 1.85, 0.01);
        let f = c.fsr(Axis::Y, WL, T0).unwrap();
        assert!((f - 8.102e9).abs() < 1e6, "{f}");
        let f2 = c.with_length(0.02).fsr(Axis::Y, WL, T0).unwrap();
        assert_eq!(f2, f / 2.0);
    }

    #[test]
    fn default_fsr_near_rb_spacing() {
        let c = CrystalSpec::<f64>::ktp_default();
        for axis in [Axis::Y, Axis::Z] {
            let f = c.fsr(axis, c.degenerate_wavelength(), c.temperature).unwrap();
            assert!((f / 7.651e9 - 1.0).abs() < 0.10, "{axis}: {f}");
        }
    }

    #[test]
    fn differential_fsr_default_and_symmetry() {
        let c = CrystalSpec::<f64>::ktp_default();
        let d = c.differential_fsr(WL, WL, T0).unwrap();
        assert!((d.abs() / 440e6 - 1.0).abs() < 0.10, "{d}");
        let same = flat(1.9, 1.9, 0.01);
        assert_eq!(same.differential_fsr(WL, WL, T0).unwrap(), 0.0);
        let swapped = CrystalSpec {
            signal_axis: Axis::Z,
            idler_axis: Axis::Y,
            ..c.clone()
        };
        assert_eq!(swapped.differential_fsr(WL, WL, T0).unwrap(), -d);
    }

    #[test]
    fn gain_linewidth_cases() {
        let c = flat(2.0, 1.9, 0.01);
        let lw = c.gain_linewidth(WL, WL, T0).unwrap();
        let hand = 0.44 * SPEED_OF_LIGHT / (0.1 * 0.01);
        assert!((lw / hand - 1.0).abs() < 1e-12);
        assert!((lw - 132e9).abs() / 132e9 < 2e-3);
        let cs = c.cluster_spacing(WL, WL, T0).unwrap();
        assert!((lw / cs - 0.88).abs() < 1e-12);
        let single = CrystalSpec {
            double_pass: false,
            ..c.clone()
        };
        assert!((single.gain_linewidth(WL, WL, T0).unwrap() / lw - 2.0).abs() < 1e-12);
        assert_eq!(
            flat(1.9, 1.9, 0.01).gain_linewidth(WL, WL, T0),
            Err(Error::DegenerateDispersion)
        );
    }

    #[test]
    fn gain_envelope_peak_halfwidth_and_tuning() {
        let c = CrystalSpec::<f64>::ktp_default();
        let t = c.reference_temperature;
        let peak = c.gain_peak(t);
        assert_eq!(c.gain_envelope(peak, t).unwrap(), 1.0);
        let wl = c.degenerate_wavelength();
        let fwhm = c.gain_linewidth(wl, wl, t).unwrap();
        for sign in [-1.0, 1.0] {
            let g = c.gain_envelope(peak + sign * fwhm / 2.0, t).unwrap();
            assert!((g - 0.5).abs() < 1e-6, "{g}");
        }
        assert!((c.gain_peak(t + 1.0) - peak - 7.8e9).abs() < 1e-3);
    }

    #[test]
    fn sellmeier_f32_agrees() {
        let c32 = CrystalSpec::<f32>::ktp_default();
        let c64 = CrystalSpec::<f64>::ktp_default();
        let n32 = c32.refractive_index(Axis::Z, 795e-9, 298.0).unwrap() as f64;
        let n64 = c64.refractive_index(Axis::Z, WL, T0).unwrap();
        assert!((n32 - n64).abs() < 1e-5);
        let g32 = c32.group_index(Axis::Z, 795e-9, 298.0).unwrap() as f64;
        let g64 = c64.group_index(Axis::Z, WL, T0).unwrap();
        assert!((g32 - g64).abs() < 1e-3, "{g32} {g64}");
    }
}
