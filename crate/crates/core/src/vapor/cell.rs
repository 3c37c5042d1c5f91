use serde::{Deserialize, Serialize};

use super::atomic::{AtomicData, Isotope};
use super::voigt::{doppler_sigma, voigt_relative};
use crate::consts::{BOHR_MAGNETON, PLANCK, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::quad::{integrate_breaks, kronrod15};
use crate::real::{lit, Real};

/// Largest field for which the linear Zeeman model is used, T.
pub const MAX_LINEAR_FIELD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaporCellSpec<T> {
    pub length: T,
    pub temperature: T,
    /// Fraction of 87Rb; the remainder is 85Rb.
    pub fraction_87: T,
    /// Off-resonance transmission floor.
    pub window_transmission: T,
    /// Axial magnetic field, T.
    pub magnetic_field: T,
    /// Relative field spread across the cell.
    pub nonuniformity: T,
    /// Average over the field spread (off by default).
    pub average_nonuniformity: bool,
    /// Effective Landé factor of the two-component Zeeman model.
    pub g_eff: T,
}

impl<T: Real> Default for VaporCellSpec<T> {
    fn default() -> Self {
        Self {
            length: lit(75e-3),
            temperature: lit(295.0),
            fraction_87: T::one(),
            window_transmission: lit(0.85),
            magnetic_field: T::zero(),
            nonuniformity: lit(0.10),
            average_nonuniformity: false,
            g_eff: lit(0.7),
        }
    }
}

impl<T: Real> VaporCellSpec<T> {
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.length > T::zero()) {
            v.push(format!("{prefix}length = {} must be > 0", self.length));
        }
        if !(self.window_transmission > T::zero() && self.window_transmission <= T::one()) {
            v.push(format!(
                "{prefix}window_transmission = {} must lie in (0, 1]",
                self.window_transmission
            ));
        }
        if !(self.fraction_87 >= T::zero() && self.fraction_87 <= T::one()) {
            v.push(format!("{prefix}fraction_87 = {} must lie in [0, 1]", self.fraction_87));
        }
        let (lo, hi) = super::atomic::VAPOR_RANGE_K;
        if !(self.temperature >= lit(lo) && self.temperature <= lit(hi)) {
            v.push(format!(
                "{prefix}temperature = {} K must lie in [{lo}, {hi}] K",
                self.temperature
            ));
        }
        if !(self.magnetic_field.abs() <= lit(MAX_LINEAR_FIELD)) {
            v.push(format!(
                "{prefix}magnetic_field = {} T must satisfy |B| <= {MAX_LINEAR_FIELD} T",
                self.magnetic_field
            ));
        }
        if !(self.nonuniformity >= T::zero() && self.nonuniformity < T::one()) {
            v.push(format!("{prefix}nonuniformity = {} must lie in [0, 1)", self.nonuniformity));
        }
        if !(self.g_eff.is_finite()) {
            v.push(format!("{prefix}g_eff must be finite"));
        }
        v
    }

    pub fn with_temperature(&self, temperature: T) -> Self {
        Self {
            temperature,
            ..self.clone()
        }
    }

    pub fn with_field(&self, field: T) -> Self {
        Self {
            magnetic_field: field,
            ..self.clone()
        }
    }

    pub fn with_length(&self, length: T) -> Self {
        Self {
            length,
            ..self.clone()
        }
    }

    pub fn fraction(&self, isotope: Isotope) -> T {
        match isotope {
            Isotope::Rb87 => self.fraction_87,
            Isotope::Rb85 => T::one() - self.fraction_87,
        }
    }
}

/// Two equally weighted components at `±g_eff μ_B B / h`; a single unshifted one at `B = 0`.
pub fn zeeman_components<T: Real>(field: T, g_eff: T) -> Result<Vec<(T, T)>> {
    if !(field.abs() <= lit(MAX_LINEAR_FIELD)) {
        return Err(Error::Domain {
            quantity: "magnetic field (T)",
            value: field.as_f64(),
            min: -MAX_LINEAR_FIELD,
            max: MAX_LINEAR_FIELD,
        });
    }
    if field == T::zero() {
        return Ok(vec![(T::zero(), T::one())]);
    }
    let shift = g_eff * lit::<T>(BOHR_MAGNETON / PLANCK) * field;
    let half = lit::<T>(0.5);
    Ok(vec![(shift, half), (-shift, half)])
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Component<T> {
    position: T,
    /// Optical depth at the centre of the unbroadened line.
    amplitude: T,
    sigma: T,
    gamma: T,
}

/// A cell's absorption lines resolved into Doppler-broadened, Zeeman-shifted components.
///
/// Frequencies are detunings from the atomic data's reference frequency, Hz.
#[derive(Clone, Debug, PartialEq)]
pub struct Absorber<T> {
    components: Vec<Component<T>>,
    pub window_transmission: T,
}

impl<T: Real> Absorber<T> {
    pub fn new(cell: &VaporCellSpec<T>, data: &AtomicData<T>) -> Result<Self> {
        if let Some(v) = cell.violations("").into_iter().next() {
            return Err(Error::invalid("cell", v));
        }
        let density = data.vapor_density(cell.temperature)?;
        let c = lit::<T>(SPEED_OF_LIGHT);
        let reference = lit::<T>(data.reference_hz);

        // Field samples (relative factor, weight) across the cell.
        let mut field_nodes = vec![(T::one(), T::one())];
        if cell.average_nonuniformity && cell.nonuniformity > T::zero() {
            let (x, w) = kronrod15::<T>();
            field_nodes = x
                .iter()
                .zip(&w)
                .map(|(&x, &w)| (T::one() + cell.nonuniformity * x, lit::<T>(0.5) * w))
                .collect();
        }

        let mut components = Vec::new();
        for line in &data.lines {
            let n = density * cell.fraction(line.isotope);
            if !(n > T::zero()) {
                continue;
            }
            let nu = reference + line.detuning;
            let lambda = c / nu;
            let sigma_peak = lambda * lambda / T::TAU() * line.strength;
            let sigma = doppler_sigma(cell.temperature, nu, data.mass(line.isotope));
            let gamma = lit::<T>(0.5) * line.natural_linewidth;
            let mut shifts = Vec::new();
            for &(factor, w_node) in &field_nodes {
                for (shift, w) in zeeman_components(cell.magnetic_field * factor, cell.g_eff)? {
                    shifts.push((shift, w * w_node));
                }
            }
            // Canonical order makes the component lists for B and −B identical.
            shifts.sort_by(|a, b| {
                let key = |s: &(T, T)| (s.0.abs().as_f64(), s.0.as_f64());
                key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal)
            });
            for (shift, w) in shifts {
                components.push(Component {
                    position: line.detuning + shift,
                    amplitude: n * cell.length * sigma_peak * w,
                    sigma,
                    gamma,
                });
            }
        }
        Ok(Self {
            components,
            window_transmission: cell.window_transmission,
        })
    }

    pub fn is_transparent(&self) -> bool {
        self.components.is_empty()
    }

    pub fn optical_depth(&self, detuning: T) -> T {
        self.components
            .iter()
            .map(|c| c.amplitude * voigt_relative(detuning - c.position, c.sigma, c.gamma))
            .sum()
    }

    pub fn transmittance(&self, detuning: T) -> T {
        self.window_transmission * (-self.optical_depth(detuning)).exp()
    }

    /// Transmission of a photon with a Lorentzian spectrum of FWHM `bandwidth` centred at
    /// `center`.
    pub fn photon_transmittance(&self, center: T, bandwidth: T) -> Result<T> {
        if !(bandwidth > T::zero()) {
            return Err(Error::invalid("photon bandwidth", "must be > 0"));
        }
        if self.is_transparent() {
            return Ok(self.window_transmission);
        }
        let g = lit::<T>(0.5) * bandwidth;
        let half_pi = T::FRAC_PI_2();
        let mut breaks = vec![-half_pi, half_pi];
        for c in &self.components {
            let width = c.sigma.max(c.gamma);
            for k in [-3.0, -1.0, 0.0, 1.0, 3.0] {
                breaks.push(((c.position + lit::<T>(k) * width - center) / g).atan());
            }
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        let tol = lit::<T>(1e-12).max(T::epsilon() * lit(100.0));
        let absorbed = integrate_breaks(
            |theta: T| -(-self.optical_depth(center + g * theta.tan())).exp_m1(),
            &breaks,
            tol,
            lit(1e-10),
        ) / T::PI();
        Ok(self.window_transmission * (T::one() - absorbed))
    }
}

pub fn optical_depth<T: Real>(detuning: T, cell: &VaporCellSpec<T>, data: &AtomicData<T>) -> Result<T> {
    Ok(Absorber::new(cell, data)?.optical_depth(detuning))
}

pub fn transmittance<T: Real>(detuning: T, cell: &VaporCellSpec<T>, data: &AtomicData<T>) -> Result<T> {
    Ok(Absorber::new(cell, data)?.transmittance(detuning))
}

pub fn photon_transmittance<T: Real>(
    center: T,
    bandwidth: T,
    cell: &VaporCellSpec<T>,
    data: &AtomicData<T>,
) -> Result<T> {
    Absorber::new(cell, data)?.photon_transmittance(center, bandwidth)
}
