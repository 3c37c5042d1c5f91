use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consts::{ATMOSPHERE, ATOMIC_MASS_UNIT, BOLTZMANN};
use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// The shipped rubidium D1 table, verbatim.
pub const RB_D1_TABLE: &str = include_str!("../../data/rb_d1.dat");

/// Valid range of the vapor-pressure correlation, K.
pub const VAPOR_RANGE_K: (f64, f64) = (250.0, 400.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Isotope {
    Rb85,
    Rb87,
}

impl Isotope {
    fn from_mass_number(a: &str) -> Result<Self> {
        match a {
            "85" => Ok(Isotope::Rb85),
            "87" => Ok(Isotope::Rb87),
            other => Err(Error::Parse(format!("unknown isotope `{other}`"))),
        }
    }
}

impl fmt::Display for Isotope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Isotope::Rb85 => "85Rb",
            Isotope::Rb87 => "87Rb",
        })
    }
}

/// One `F → F'` component of the D1 line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperfineLine<T> {
    pub isotope: Isotope,
    pub f_ground: u8,
    pub f_excited: u8,
    /// Offset from the data set's reference frequency, Hz.
    pub detuning: T,
    /// Population-weighted relative strength.
    pub strength: T,
    /// Natural linewidth (FWHM), Hz.
    pub natural_linewidth: T,
}

/// `log10(P/atm) = a − b/T` on either side of the melting point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaporPressureLaw<T> {
    pub solid: (T, T),
    pub liquid: (T, T),
    pub melting: T,
}

/// Line list plus the isotope and vapor data needed to turn it into absorption.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicData<T> {
    /// Absolute frequency that line detunings refer to, Hz.
    pub reference_hz: f64,
    pub mass_85: T,
    pub mass_87: T,
    pub vapor: VaporPressureLaw<T>,
    pub lines: Vec<HyperfineLine<T>>,
}

impl<T: Real> AtomicData<T> {
    /// The shipped rubidium D1 table.
    pub fn rb_d1() -> Self {
        Self::parse(RB_D1_TABLE).expect("shipped atomic data parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses `# key = value` header lines and whitespace-separated rows
    /// `isotope Fg Fe detuning_MHz strength gamma_nat_MHz`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header = HashMap::new();
        let mut lines = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((k, v)) = comment.split_once('=') {
                    header.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 6 {
                return Err(Error::Parse(format!(
                    "atomic data line {}: expected 6 columns, found {}",
                    n + 1,
                    cols.len()
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|e| Error::Parse(format!("atomic data line {}: `{s}`: {e}", n + 1)))
            };
            let int = |s: &str| -> Result<u8> {
                s.parse()
                    .map_err(|e| Error::Parse(format!("atomic data line {}: `{s}`: {e}", n + 1)))
            };
            let l = HyperfineLine {
                isotope: Isotope::from_mass_number(cols[0])?,
                f_ground: int(cols[1])?,
                f_excited: int(cols[2])?,
                detuning: lit(num(cols[3])? * 1e6),
                strength: lit(num(cols[4])?),
                natural_linewidth: lit(num(cols[5])? * 1e6),
            };
            if !(l.strength > T::zero()) || !(l.natural_linewidth > T::zero()) {
                return Err(Error::Parse(format!(
                    "atomic data line {}: strength and linewidth must be > 0",
                    n + 1
                )));
            }
            lines.push(l);
        }
        let key = |k: &str| -> Result<f64> {
            header
                .get(k)
                .ok_or_else(|| Error::Parse(format!("atomic data header lacks `{k}`")))?
                .parse()
                .map_err(|e| Error::Parse(format!("atomic data header `{k}`: {e}")))
        };
        Ok(Self {
            reference_hz: key("reference_hz")?,
            mass_85: lit(key("mass_85_u")? * ATOMIC_MASS_UNIT),
            mass_87: lit(key("mass_87_u")? * ATOMIC_MASS_UNIT),
            vapor: VaporPressureLaw {
                solid: (lit(key("vp_solid_a")?), lit(key("vp_solid_b")?)),
                liquid: (lit(key("vp_liquid_a")?), lit(key("vp_liquid_b")?)),
                melting: lit(key("melting_k")?),
            },
            lines,
        })
    }

    pub fn mass(&self, isotope: Isotope) -> T {
        match isotope {
            Isotope::Rb85 => self.mass_85,
            Isotope::Rb87 => self.mass_87,
        }
    }

    pub fn line(&self, isotope: Isotope, f_ground: u8, f_excited: u8) -> Option<&HyperfineLine<T>> {
        self.lines
            .iter()
            .find(|l| l.isotope == isotope && l.f_ground == f_ground && l.f_excited == f_excited)
    }

    /// Same data without any lines (a transparent medium).
    pub fn without_lines(&self) -> Self {
        Self {
            lines: Vec::new(),
            ..self.clone()
        }
    }

    /// Saturated vapor pressure, Pa.
    pub fn vapor_pressure(&self, temperature: T) -> Result<T> {
        let (lo, hi) = VAPOR_RANGE_K;
        if !(temperature >= lit(lo) && temperature <= lit(hi)) {
            return Err(Error::Domain {
                quantity: "vapor temperature (K)",
                value: temperature.as_f64(),
                min: lo,
                max: hi,
            });
        }
        let (a, b) = if temperature < self.vapor.melting {
            self.vapor.solid
        } else {
            self.vapor.liquid
        };
        Ok(lit::<T>(ATMOSPHERE) * lit::<T>(10.0).powf(a - b / temperature))
    }

    /// Total rubidium number density, atoms/m³.
    pub fn vapor_density(&self, temperature: T) -> Result<T> {
        Ok(self.vapor_pressure(temperature)? / (lit::<T>(BOLTZMANN) * temperature))
    }
}
