use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::atomic::AtomicData;
use super::cell::{Absorber, VaporCellSpec};
use crate::comb::ModeStructure;
use crate::error::Result;
use crate::real::{lit, Real};

/// One sample of a crystal-temperature transmission scan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrystalScanPoint<T> {
    pub temperature: T,
    /// Transmission of the detected counts, photons and accidentals together.
    pub transmittance: T,
    /// Transmission of the emitted photon alone.
    pub photon_transmittance: T,
    pub signal_index: i64,
    pub signal_hz: T,
    /// Coincidence rate of the emitting pair.
    pub pair_rate: T,
}

/// Parameters of a crystal-temperature scan through the cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CrystalScan<T> {
    pub peak_rate: T,
    /// Counts that carry no atomic absorption (they see only the window floor).
    pub floor_rate: T,
    pub t_lo: T,
    pub t_hi: T,
    pub step: T,
    /// Photon bandwidth (FWHM), Hz.
    pub bandwidth: T,
}

/// Counts through the cell versus crystal temperature: the emitting pair's photons see
/// the atomic lines, the accidental floor sees only the windows.
pub fn crystal_temperature_scan<T: Real>(
    structure: &ModeStructure<T>,
    cell: &VaporCellSpec<T>,
    data: &AtomicData<T>,
    scan: &CrystalScan<T>,
) -> Result<Vec<CrystalScanPoint<T>>> {
    let absorber = Absorber::new(cell, data)?;
    let reference = lit::<T>(data.reference_hz);
    let win = absorber.window_transmission;
    let points = structure.temperature_scan(scan.peak_rate, T::zero(), scan.t_lo, scan.t_hi, scan.step)?;
    points
        .into_par_iter()
        .map(|p| {
            let photon = absorber.photon_transmittance(p.signal_hz - reference, scan.bandwidth)?;
            let total = p.rate + scan.floor_rate;
            let transmittance = if total > T::zero() {
                win - p.rate * (win - photon) / total
            } else {
                win
            };
            Ok(CrystalScanPoint {
                temperature: p.temperature,
                transmittance,
                photon_transmittance: photon,
                signal_index: p.signal_index,
                signal_hz: p.signal_hz,
                pair_rate: p.rate,
            })
        })
        .collect()
}

/// Photon transmission versus cell temperature at a fixed photon frequency.
pub fn cell_temperature_scan<T: Real>(
    center: T,
    bandwidth: T,
    cell: &VaporCellSpec<T>,
    data: &AtomicData<T>,
    temperatures: &[T],
) -> Result<Vec<(T, T)>> {
    temperatures
        .par_iter()
        .map(|&t| {
            let a = Absorber::new(&cell.with_temperature(t), data)?;
            Ok((t, a.photon_transmittance(center, bandwidth)?))
        })
        .collect()
}

/// Photon transmission versus axial magnetic field.
pub fn field_scan<T: Real>(
    center: T,
    bandwidth: T,
    cell: &VaporCellSpec<T>,
    data: &AtomicData<T>,
    fields: &[T],
) -> Result<Vec<(T, T)>> {
    fields
        .par_iter()
        .map(|&b| {
            let a = Absorber::new(&cell.with_field(b), data)?;
            Ok((b, a.photon_transmittance(center, bandwidth)?))
        })
        .collect()
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
///
/// Samples are laid out from the midpoint, so a range symmetric about zero gives exactly
/// negated pairs and, for odd `n`, an exact zero.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let mid = lit::<T>(0.5) * (lo + hi);
            let h = (hi - lo) / lit::<T>((n - 1) as f64);
            let c = 0.5 * (n - 1) as f64;
            (0..n)
                .map(|k| match k {
                    0 => lo,
                    k if k == n - 1 => hi,
                    k => mid + lit::<T>(k as f64 - c) * h,
                })
                .collect()
        }
    }
}

/// Indices of local minima that sit at least `depth` below `level`.
pub fn find_dips<T: Real>(values: &[T], level: T, depth: T) -> Vec<usize> {
    let flipped: Vec<T> = values.iter().map(|&v| level - v).collect();
    crate::comb::find_peaks(&flipped, depth)
}

/// CSV with columns `x,transmittance`.
pub fn write_scan_csv<W: Write, T: Real>(mut w: W, points: &[(T, T)]) -> Result<()> {
    writeln!(w, "x,transmittance")?;
    for (x, t) in points {
        writeln!(w, "{},{}", x.as_f64(), t.as_f64())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::CrystalSpec;

    const GS: f64 = 1.0 / 20.7e-9;
    const GI: f64 = 1.0 / 24.4e-9;

    fn structure() -> ModeStructure<f64> {
        ModeStructure::new(CrystalSpec::ktp_default(), GS, GI).unwrap()
    }

    fn fig3b(data: &AtomicData<f64>) -> Vec<CrystalScanPoint<f64>> {
        let s = structure();
        let t0 = s.crystal.reference_temperature;
        let scan = CrystalScan {
            peak_rate: 1.0,
            floor_rate: 0.01,
            t_lo: t0 - 0.060,
            t_hi: t0 + 0.090,
            step: 0.2e-3,
            bandwidth: crate::biphoton::bandwidth(GS, GI),
        };
        crystal_temperature_scan(&s, &VaporCellSpec::default(), data, &scan).unwrap()
    }

    #[test]
    fn two_dips_one_hop_apart() {
        let pts = fig3b(&AtomicData::rb_d1());
        let trace: Vec<f64> = pts.iter().map(|p| p.transmittance).collect();
        let dips = find_dips(&trace, 0.85, 0.05);
        assert_eq!(dips.len(), 2, "{dips:?}");
        let hop = structure().mode_hop_spacing().unwrap();
        let sep = pts[dips[1]].temperature - pts[dips[0]].temperature;
        assert!((sep / hop - 1.0).abs() < 0.1, "{sep} vs {hop}");
        let mut sorted = trace.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        assert!((median - 0.85).abs() < 0.005, "{median}");
        assert!(trace.iter().all(|&t| t > 0.0 && t <= 0.85));
    }

    #[test]
    fn no_lines_gives_flat_window() {
        let pts = fig3b(&AtomicData::rb_d1().without_lines());
        assert!(pts.iter().all(|p| p.transmittance == 0.85));
    }

    #[test]
    fn cell_heating_darkens_and_field_recovers() {
        let data = AtomicData::rb_d1();
        let m1 = data.line(crate::vapor::Isotope::Rb87, 2, 1).unwrap().detuning;
        let cell = VaporCellSpec::default();
        let temps = linspace(290.0f64, 350.0, 13);
        let t = cell_temperature_scan(m1, 4.5e6, &cell, &data, &temps).unwrap();
        assert!(t.windows(2).all(|w| w[1].1 < w[0].1));
        let fields = linspace(-0.05f64, 0.05, 21);
        let b = field_scan(m1, 4.5e6, &cell, &data, &fields).unwrap();
        let min = b.iter().enumerate().min_by(|x, y| x.1 .1.total_cmp(&y.1 .1)).unwrap().0;
        assert_eq!(fields[min], 0.0);
        for k in 0..10 {
            assert_eq!(b[k].1, b[20 - k].1);
        }
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(-0.05f64, 0.05, 21);
        assert_eq!(v.len(), 21);
        assert_eq!(v[0], -0.05);
        assert_eq!(v[20], 0.05);
        assert_eq!(v[10], 0.0);
        for k in 0..21 {
            assert_eq!(v[k], -v[20 - k]);
        }
        let w = linspace(290.0f64, 350.0, 13);
        assert!(w.windows(2).all(|p| (p[1] - p[0] - 5.0).abs() < 1e-12));
    }
}
