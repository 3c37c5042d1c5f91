//! Rubidium D1 absorption: line data, Voigt profiles, vapor density, Zeeman shifts and
//! transmission scans.

mod atomic;
mod cell;
mod scan;
mod voigt;

pub use atomic::{AtomicData, HyperfineLine, Isotope, VaporPressureLaw, RB_D1_TABLE, VAPOR_RANGE_K};
pub use cell::{
    optical_depth, photon_transmittance, transmittance, zeeman_components, Absorber,
    VaporCellSpec, MAX_LINEAR_FIELD,
};
pub use scan::*;
pub use voigt::{doppler_sigma, doppler_width, faddeeva, voigt, voigt_relative};
