//! Signal/idler resonance combs, doubly resonant pairs and the temperature-dependent
//! mode structure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crystal::{sinc2, Axis, CrystalSpec};
use crate::error::{Error, Result};
use crate::real::{lit, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Signal,
    Idler,
}

/// Equally spaced cavity resonances of one polarisation.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeComb<T> {
    pub axis: Axis,
    /// Frequency of mode index 0, Hz.
    pub reference: T,
    pub fsr: T,
    /// Intensity FWHM of each resonance, Hz.
    pub linewidth: T,
    /// Inclusive range of mode indices considered.
    pub index_range: (i64, i64),
}

impl<T: Real> ModeComb<T> {
    pub fn new(axis: Axis, reference: T, fsr: T, linewidth: T, index_range: (i64, i64)) -> Result<Self> {
        if !(fsr > T::zero()) {
            return Err(Error::invalid("fsr", "must be > 0"));
        }
        if !(linewidth > T::zero()) {
            return Err(Error::invalid("linewidth", "must be > 0"));
        }
        if linewidth >= fsr {
            return Err(Error::UnresolvedComb {
                linewidth_hz: linewidth.as_f64(),
                fsr_hz: fsr.as_f64(),
            });
        }
        Ok(Self {
            axis,
            reference,
            fsr,
            linewidth,
            index_range,
        })
    }

    pub fn mode(&self, index: i64) -> T {
        self.reference + lit::<T>(index as f64) * self.fsr
    }
}

/// Builds the comb of one arm at the crystal's current temperature.
///
/// Mode 0 of each arm is anchored at the doubly resonant, phase-matched frequency
/// (`ν_p/2 ± anchor_offset` at the reference temperature) and both combs tune by
/// `−α_T (T − T₀)`.
pub fn build_comb<T: Real>(crystal: &CrystalSpec<T>, arm: Arm, decay_rate: T) -> Result<ModeComb<T>> {
    if !(decay_rate > T::zero()) {
        return Err(Error::invalid("decay rate", format!("must be > 0 (got {decay_rate})")));
    }
    let wl = crystal.degenerate_wavelength();
    let t = crystal.temperature;
    let axis = match arm {
        Arm::Signal => crystal.signal_axis,
        Arm::Idler => crystal.idler_axis,
    };
    let fsr = crystal.fsr(axis, wl, t)?;
    let half_pump = lit::<T>(0.5) * crystal.pump_frequency();
    let shift = crystal.tuning * (t - crystal.reference_temperature);
    let reference = match arm {
        Arm::Signal => half_pump + crystal.anchor_offset - shift,
        Arm::Idler => half_pump - crystal.anchor_offset - shift,
    };
    let span = crystal
        .cluster_spacing(wl, wl, t)
        .map(|c| (lit::<T>(3.0) * c / fsr).ceil().as_f64() as i64 + 1)
        .unwrap_or(64);
    let linewidth = decay_rate / T::TAU();
    ModeComb::new(axis, reference, fsr, linewidth, (-span, span))
}

/// A signal/idler mode pair that (nearly) conserves energy with the pump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonantPair<T> {
    pub signal_index: i64,
    pub idler_index: i64,
    pub signal_hz: T,
    pub idler_hz: T,
    /// `ν_s + ν_i − ν_p`, Hz.
    pub detuning: T,
    /// `ν_s − ν_p/2`, Hz.
    pub center_offset: T,
    /// Energy-conserving signal frequency, the mode frequency pulled by the
    /// linewidth-weighted share of the detuning.
    pub emission_hz: T,
    pub gain: T,
    pub overlap: T,
}

impl<T: Real> ResonantPair<T> {
    pub fn weight(&self) -> T {
        self.gain * self.overlap
    }

    /// Vernier cluster label; pairs of one cluster share `m + n`.
    pub fn cluster(&self) -> i64 {
        -(self.signal_index + self.idler_index)
    }
}

/// Integrated overlap of two Lorentzian resonances along the energy-conserving line,
/// normalised to one at zero detuning.
pub fn double_resonance_overlap<T: Real>(detuning: T, signal_lw: T, idler_lw: T) -> T {
    let x = lit::<T>(2.0) * detuning / (signal_lw + idler_lw);
    T::one() / (T::one() + x * x)
}

/// All mode pairs within `tolerance` of energy conservation whose signal frequency lies
/// within `window` of `ν_p/2`, sorted by distance from `ν_p/2` (then by frequency).
pub fn doubly_resonant_pairs<T: Real, G: Fn(T) -> T>(
    signal: &ModeComb<T>,
    idler: &ModeComb<T>,
    pump_hz: T,
    window: T,
    tolerance: T,
    gain: G,
) -> Vec<ResonantPair<T>> {
    let half_pump = lit::<T>(0.5) * pump_hz;
    // Small offsets of the two anchors from ν_p/2, so detunings avoid absolute-frequency cancellation.
    let base = (signal.reference - half_pump) + (idler.reference - half_pump);
    let lw_sum = signal.linewidth + idler.linewidth;
    let mut pairs = Vec::new();
    for m in signal.index_range.0..=signal.index_range.1 {
        let mf = lit::<T>(m as f64);
        let center_offset = (signal.reference - half_pump) + mf * signal.fsr;
        if center_offset.abs() > window {
            continue;
        }
        let partial = base + mf * signal.fsr;
        let n_lo = ((-tolerance - partial) / idler.fsr).ceil().as_f64() as i64;
        let n_hi = ((tolerance - partial) / idler.fsr).floor().as_f64() as i64;
        for n in n_lo.max(idler.index_range.0)..=n_hi.min(idler.index_range.1) {
            let detuning = partial + lit::<T>(n as f64) * idler.fsr;
            if detuning.abs() > tolerance {
                continue;
            }
            let signal_hz = signal.mode(m);
            let emission_hz = signal_hz - detuning * signal.linewidth / lw_sum;
            pairs.push(ResonantPair {
                signal_index: m,
                idler_index: n,
                signal_hz,
                idler_hz: idler.mode(n),
                detuning,
                center_offset,
                emission_hz,
                gain: gain(emission_hz),
                overlap: double_resonance_overlap(detuning, signal.linewidth, idler.linewidth),
            });
        }
    }
    pairs.sort_by(|a, b| {
        a.center_offset
            .abs()
            .partial_cmp(&b.center_offset.abs())
            .unwrap()
            .then(a.signal_hz.partial_cmp(&b.signal_hz).unwrap())
    });
    pairs
}

/// `FSR_s · FSR_i / |FSR_s − FSR_i|`.
pub fn cluster_spacing<T: Real>(signal: &ModeComb<T>, idler: &ModeComb<T>) -> Result<T> {
    let d = signal.fsr - idler.fsr;
    if d == T::zero() {
        return Err(Error::DegenerateComb);
    }
    Ok(signal.fsr * idler.fsr / d.abs())
}

/// Crystal temperature step between adjacent mode pairs, `|Δν| / (2 α_T)`.
pub fn mode_hop_spacing<T: Real>(differential_fsr: T, tuning: T) -> Result<T> {
    if !(tuning > T::zero()) {
        return Err(Error::invalid("tuning", format!("must be > 0 (got {tuning})")));
    }
    Ok(differential_fsr.abs() / (lit::<T>(2.0) * tuning))
}

/// The pair with the largest `gain × overlap`.
///
/// Ties go to the pair closer to `ν_p/2`, then to the lower signal frequency.
pub fn select_emission_mode<T: Real>(pairs: &[ResonantPair<T>]) -> Result<ResonantPair<T>> {
    let better = |a: &ResonantPair<T>, b: &ResonantPair<T>| {
        let (wa, wb) = (a.weight(), b.weight());
        if wa != wb {
            return wa > wb;
        }
        let (da, db) = (a.center_offset.abs(), b.center_offset.abs());
        if da != db {
            return da < db;
        }
        a.signal_hz < b.signal_hz
    };
    let mut best: Option<&ResonantPair<T>> = None;
    for p in pairs {
        if best.is_none_or(|b| better(p, b)) {
            best = Some(p);
        }
    }
    best.cloned().ok_or(Error::NoMode)
}

/// One sample of a crystal temperature scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint<T> {
    pub temperature: T,
    pub rate: T,
    pub signal_index: i64,
    pub idler_index: i64,
    pub signal_hz: T,
    pub weight: T,
}

/// Cavity plus decay rates: everything needed to find the emitting pair at a temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeStructure<T> {
    pub crystal: CrystalSpec<T>,
    pub signal_decay: T,
    pub idler_decay: T,
}

impl<T: Real> ModeStructure<T> {
    pub fn new(crystal: CrystalSpec<T>, signal_decay: T, idler_decay: T) -> Result<Self> {
        let s = Self {
            crystal,
            signal_decay,
            idler_decay,
        };
        // surface comb and dispersion errors at construction
        s.combs_at(s.crystal.temperature)?;
        s.gain_fwhm()?;
        Ok(s)
    }

    pub fn combs_at(&self, temperature: T) -> Result<(ModeComb<T>, ModeComb<T>)> {
        let c = self.crystal.with_temperature(temperature);
        Ok((
            build_comb(&c, Arm::Signal, self.signal_decay)?,
            build_comb(&c, Arm::Idler, self.idler_decay)?,
        ))
    }

    fn gain_fwhm(&self) -> Result<T> {
        let wl = self.crystal.degenerate_wavelength();
        self.crystal.gain_linewidth(wl, wl, self.crystal.reference_temperature)
    }

    /// Signed differential FSR at the crystal's temperature.
    pub fn differential_fsr(&self) -> Result<T> {
        let wl = self.crystal.degenerate_wavelength();
        self.crystal.differential_fsr(wl, wl, self.crystal.temperature)
    }

    pub fn mode_hop_spacing(&self) -> Result<T> {
        mode_hop_spacing(self.differential_fsr()?, self.crystal.tuning)
    }

    /// Default pairing tolerance: the wider of the two cavity linewidths.
    pub fn default_tolerance(&self) -> T {
        (self.signal_decay.max(self.idler_decay)) / T::TAU()
    }

    /// Default search window: three cluster spacings either side of `ν_p/2`.
    pub fn default_window(&self) -> Result<T> {
        let wl = self.crystal.degenerate_wavelength();
        Ok(lit::<T>(3.0) * self.crystal.cluster_spacing(wl, wl, self.crystal.temperature)?)
    }

    pub fn pairs_at(&self, temperature: T, window: T, tolerance: T) -> Result<Vec<ResonantPair<T>>> {
        let (s, i) = self.combs_at(temperature)?;
        let fwhm = self.gain_fwhm()?;
        let c = self.crystal.with_temperature(temperature);
        let peak = c.gain_peak(temperature);
        let k = lit::<T>(2.0 * 1.391_557_378_251_510_5) / fwhm;
        let gain = |nu: T| sinc2(k * (nu - peak));
        Ok(doubly_resonant_pairs(&s, &i, c.pump_frequency(), window, tolerance, gain))
    }

    /// One candidate per vernier cluster: the pair closest to energy conservation
    /// (tolerance `|Δν|/2`).
    pub fn candidates_at(&self, temperature: T) -> Result<Vec<ResonantPair<T>>> {
        let (s, i) = self.combs_at(temperature)?;
        let tol = lit::<T>(0.5) * (s.fsr - i.fsr).abs();
        self.pairs_at(temperature, self.default_window()?, tol)
    }

    pub fn emission_at(&self, temperature: T) -> Result<ResonantPair<T>> {
        select_emission_mode(&self.candidates_at(temperature)?)
    }

    /// Coincidence rate of the selected pair plus a flat accidental floor over a
    /// temperature grid `t_lo, t_lo + step, …, ≤ t_hi`.
    pub fn temperature_scan(
        &self,
        peak_rate: T,
        floor: T,
        t_lo: T,
        t_hi: T,
        step: T,
    ) -> Result<Vec<ScanPoint<T>>> {
        let hop = self.mode_hop_spacing()?;
        if !(step > T::zero()) || step > hop / lit(5.0) {
            return Err(Error::invalid(
                "step",
                format!("must be in (0, {}] K to resolve the mode structure", (hop / lit(5.0)).as_f64()),
            ));
        }
        if !(t_hi >= t_lo) {
            return Err(Error::invalid("temperature range", "upper bound below lower bound"));
        }
        let n = ((t_hi - t_lo) / step + lit(1e-9)).floor().as_f64() as usize + 1;
        (0..n)
            .into_par_iter()
            .map(|k| {
                let t = t_lo + lit::<T>(k as f64) * step;
                let p = self.emission_at(t)?;
                Ok(ScanPoint {
                    temperature: t,
                    rate: peak_rate * p.weight() + floor,
                    signal_index: p.signal_index,
                    idler_index: p.idler_index,
                    signal_hz: p.emission_hz,
                    weight: p.weight(),
                })
            })
            .collect()
    }
}

/// Indices of strict local maxima that rise above `threshold`.
pub fn find_peaks<T: Real>(values: &[T], threshold: T) -> Vec<usize> {
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < values.len() {
        if values[i] > threshold && values[i] > values[i - 1] {
            // plateau-tolerant: walk across equal neighbours
            let mut j = i;
            while j + 1 < values.len() && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < values.len() && values[j + 1] < values[i] {
                peaks.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::SellmeierSet;

    const GS: f64 = 1.0 / 20.7e-9;
    const GI: f64 = 1.0 / 24.4e-9;

    fn structure() -> ModeStructure<f64> {
        ModeStructure::new(CrystalSpec::ktp_default(), GS, GI).unwrap()
    }

    #[test]
    fn comb_linewidth_and_anchor() {
        let c = CrystalSpec::<f64>::ktp_default();
        let s = build_comb(&c, Arm::Signal, GS).unwrap();
        // 1/(20.7 ns) / 2π = 7.69 MHz
        assert!((s.linewidth - 7.6886e6).abs() < 1e3);
        assert_eq!(s.mode(0), s.reference);
        assert_eq!(s.reference, 0.5 * c.pump_frequency() + c.anchor_offset);
        assert!(matches!(build_comb(&c, Arm::Signal, 0.0), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn unresolved_comb_rejected() {
        let err = ModeComb::new(Axis::Y, 0.0, 8.1e9, 8.1e9, (-1, 1)).unwrap_err();
        assert!(matches!(err, Error::UnresolvedComb { .. }));
        assert!(ModeComb::new(Axis::Y, 0.0, 8.1e9, 7.7e6, (-1, 1)).is_ok());
    }

    #[test]
    fn wide_tolerance_pairs_every_signal_mode() {
        let st = structure();
        let (s, i) = st.combs_at(st.crystal.temperature).unwrap();
        let pump = st.crystal.pump_frequency();
        let window = 50.0 * s.fsr;
        let pairs = doubly_resonant_pairs(&s, &i, pump, window, i.fsr, |_| 1.0);
        let mut ms: Vec<i64> = pairs.iter().map(|p| p.signal_index).collect();
        ms.dedup();
        ms.sort();
        ms.dedup();
        let expected: Vec<i64> = (s.index_range.0..=s.index_range.1)
            .filter(|&m| (s.mode(m) - pump / 2.0).abs() <= window)
            .collect();
        assert_eq!(ms, expected);
    }

    #[test]
    fn cluster_pairs_are_eighteen_modes_apart() {
        let st = structure();
        let pairs = st.candidates_at(st.crystal.temperature).unwrap();
        let mut by_cluster: Vec<&ResonantPair<f64>> = pairs.iter().collect();
        by_cluster.sort_by_key(|p| p.cluster());
        let (s, i) = st.combs_at(st.crystal.temperature).unwrap();
        let spacing = cluster_spacing(&s, &i).unwrap();
        for w in by_cluster.windows(2) {
            if w[1].cluster() != w[0].cluster() + 1 {
                continue;
            }
            let dm = (w[1].signal_index - w[0].signal_index).abs();
            assert!((17..=19).contains(&dm), "{dm}");
            let dnu = (w[1].signal_hz - w[0].signal_hz).abs();
            assert!((dnu - spacing).abs() <= s.fsr, "{dnu} vs {spacing}");
        }
    }

    #[test]
    fn cluster_spacing_arithmetic() {
        let s = ModeComb::<f64>::new(Axis::Y, 0.0, 8.10e9, 7e6, (-1, 1)).unwrap();
        let i = ModeComb::<f64>::new(Axis::Z, 0.0, 7.66e9, 7e6, (-1, 1)).unwrap();
        let cs = cluster_spacing(&s, &i).unwrap();
        assert!((cs - 141.0e9).abs() < 0.05e9, "{cs}");
        let s2 = ModeComb { fsr: 2.0 * s.fsr, ..s.clone() };
        let i2 = ModeComb { fsr: 2.0 * i.fsr, ..i.clone() };
        assert!((cluster_spacing(&s2, &i2).unwrap() / cs - 2.0).abs() < 1e-12);
        assert_eq!(cluster_spacing(&s, &s), Err(Error::DegenerateComb));
    }

    #[test]
    fn cluster_spacing_matches_crystal_formula() {
        let st = structure();
        let (s, i) = st.combs_at(st.crystal.temperature).unwrap();
        let wl = st.crystal.degenerate_wavelength();
        let from_crystal = st.crystal.cluster_spacing(wl, wl, st.crystal.temperature).unwrap();
        assert!((cluster_spacing(&s, &i).unwrap() / from_crystal - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mode_hop_spacing_cases() {
        let dt = mode_hop_spacing::<f64>(440e6, 7.8e9).unwrap();
        assert!((dt - 0.028_205_128).abs() < 1e-8);
        assert_eq!(mode_hop_spacing(0.0, 7.8e9).unwrap(), 0.0);
        assert!((mode_hop_spacing::<f64>(440e6, 15.6e9).unwrap() - dt / 2.0).abs() < 1e-15);
        assert!(mode_hop_spacing(440e6, 0.0).is_err());
    }

    #[test]
    fn selection_hops_by_one_pair_per_hop_spacing() {
        let st = structure();
        let t0 = st.crystal.reference_temperature;
        let hop = st.mode_hop_spacing().unwrap();
        let p0 = st.emission_at(t0).unwrap();
        assert_eq!((p0.signal_index, p0.idler_index), (0, 0));
        let p1 = st.emission_at(t0 + hop).unwrap();
        assert_eq!(p1.signal_index.abs(), 1);
        let (s, i) = st.combs_at(t0).unwrap();
        let step = (p1.emission_hz - p0.emission_hz).abs();
        assert!((step - s.fsr).abs() <= (s.fsr - i.fsr).abs(), "{step}");
        let mid = st.emission_at(t0 + hop / 2.0).unwrap();
        assert!(mid.signal_index == 0 || mid.signal_index == p1.signal_index);
    }

    #[test]
    fn empty_selection_is_an_error() {
        assert_eq!(select_emission_mode::<f64>(&[]), Err(Error::NoMode));
    }

    #[test]
    fn exact_tie_prefers_center_then_lower_frequency() {
        let mk = |m: i64, nu: f64, off: f64| ResonantPair {
            signal_index: m,
            idler_index: -m,
            signal_hz: nu,
            idler_hz: 0.0,
            detuning: 0.0,
            center_offset: off,
            emission_hz: nu,
            gain: 0.5,
            overlap: 1.0,
        };
        let pairs = [mk(1, 10.0, 3.0), mk(-1, 4.0, -3.0), mk(2, 20.0, 5.0)];
        assert_eq!(select_emission_mode(&pairs).unwrap().signal_index, -1);
        let pairs = [mk(2, 20.0, 5.0), mk(1, 10.0, 1.0)];
        assert_eq!(select_emission_mode(&pairs).unwrap().signal_index, 1);
    }

    #[test]
    fn scan_floor_only_is_flat() {
        let st = structure();
        let t0 = st.crystal.reference_temperature;
        let pts = st.temperature_scan(0.0, 25.0, t0 - 0.05, t0 + 0.05, 0.001).unwrap();
        assert_eq!(pts.len(), 101);
        assert!(pts.iter().all(|p| p.rate == 25.0));
    }

    #[test]
    fn scan_rejects_coarse_step() {
        let st = structure();
        let t0 = st.crystal.reference_temperature;
        assert!(st.temperature_scan(1.0, 0.0, t0, t0 + 0.1, 0.01).is_err());
    }

    #[test]
    fn degenerate_axes_fail_structure() {
        let crystal = CrystalSpec {
            dispersion: vec![
                (Axis::Y, SellmeierSet::constant_index(1.9)),
                (Axis::Z, SellmeierSet::constant_index(1.9)),
            ],
            ..CrystalSpec::ktp_default()
        };
        assert_eq!(ModeStructure::new(crystal, GS, GI), Err(Error::DegenerateDispersion));
    }

    #[test]
    fn peaks_found_on_plateaus() {
        let v = [0.0, 1.0, 3.0, 3.0, 1.0, 0.0, 2.0, 0.5];
        assert_eq!(find_peaks(&v, 0.5), vec![2, 6]);
    }
}
