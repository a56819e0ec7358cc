//! Physical constants, polarisability unit conversion and clock-species records.
//!
//! Everything leaving this module is SI. Polarisabilities are tabulated in
//! atomic units in configuration files and converted once, on load.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA 2018 values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Speed of light, m/s.
    pub c: f64,
    /// Planck constant, J s.
    pub h: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Elementary charge, C.
    pub e: f64,
    /// Vacuum permittivity, F/m.
    pub epsilon0: f64,
    /// Bohr radius, m.
    pub a0: f64,
    /// Atomic mass unit, kg.
    pub u: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    c: 299_792_458.0,
    h: 6.626_070_15e-34,
    hbar: 6.626_070_15e-34 / (2.0 * PI),
    e: 1.602_176_634e-19,
    epsilon0: 8.854_187_812_8e-12,
    a0: 5.291_772_109_03e-11,
    u: 1.660_539_066_60e-27,
    k_b: 1.380_649e-23,
};

/// One atomic unit of polarisability, 4πε₀a₀³, in C²m²/J.
pub fn au_polarisability() -> f64 {
    4.0 * PI * CONSTANTS.epsilon0 * CONSTANTS.a0.powi(3)
}

pub fn au_to_si_polarisability(alpha_au: f64) -> f64 {
    alpha_au * au_polarisability()
}

pub fn si_to_au_polarisability(alpha_si: f64) -> f64 {
    alpha_si / au_polarisability()
}

/// Atomic data for a clock candidate. All fields SI.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockSpecies {
    pub name: String,
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
    /// Hz
    pub clock_frequency: f64,
    /// m
    pub clock_wavelength: f64,
    /// Differential static scalar polarisability, C²m²/J.
    pub delta_alpha_static: f64,
    /// DC tensor polarisability of the clock state, C²m²/J.
    pub alpha2_dc: f64,
    /// Quadrupole moment, C m².
    pub quadrupole_moment: f64,
    /// Tensor polarisability at the compensation wavelength, C²m²/J.
    pub alpha2_magic: f64,
    /// m
    pub magic_compensation_wavelength: f64,
    /// Cooling transition linewidth, rad/s.
    pub cooling_linewidth: f64,
    /// Hz/T²; the fractional shift is `-coefficient * B² / ν`.
    pub quadratic_zeeman_coefficient: f64,
    /// Rank-2 state factors C_{F,m_F} of the levels used in hyperfine averaging.
    pub hyperfine_factors: Vec<f64>,
}

impl ClockSpecies {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("charge", self.charge),
            ("clock_frequency", self.clock_frequency),
            ("clock_wavelength", self.clock_wavelength),
            ("magic_compensation_wavelength", self.magic_compensation_wavelength),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("species.{name} must be positive, got {v}")));
            }
        }
        if !(self.cooling_linewidth >= 0.0) {
            return Err(Error::Validation("species.cooling_linewidth must be non-negative".into()));
        }
        let nu = CONSTANTS.c / self.clock_wavelength;
        if ((nu - self.clock_frequency) / self.clock_frequency).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "clock frequency {} Hz inconsistent with wavelength {} m",
                self.clock_frequency, self.clock_wavelength
            )));
        }
        if self.hyperfine_factors.is_empty() {
            return Err(Error::Validation("species.hyperfine_factors must not be empty".into()));
        }
        Ok(())
    }

    /// h ν in joules.
    pub fn photon_energy(&self) -> f64 {
        CONSTANTS.h * self.clock_frequency
    }
}

/// Built-in ¹⁷⁶Lu⁺ record (848 nm clock line on ¹S₀ ↔ ³D₁).
pub fn lu176_species() -> ClockSpecies {
    let wavelength = 848e-9;
    ClockSpecies {
        name: "176Lu+".to_string(),
        mass: 175.942_689_7 * CONSTANTS.u,
        charge: CONSTANTS.e,
        clock_frequency: CONSTANTS.c / wavelength,
        clock_wavelength: wavelength,
        delta_alpha_static: au_to_si_polarisability(-2.19),
        alpha2_dc: au_to_si_polarisability(-5.0),
        quadrupole_moment: -1.3 * CONSTANTS.e * CONSTANTS.a0 * CONSTANTS.a0,
        alpha2_magic: au_to_si_polarisability(100.0),
        magic_compensation_wavelength: 615e-9,
        cooling_linewidth: 2.0 * PI * 2.45e6,
        // 5 Hz/mT²
        quadratic_zeeman_coefficient: 5.0e6,
        hyperfine_factors: vec![-2.0 / 5.0, 1.0, -3.0 / 5.0],
    }
}

/// Species record as written in configuration files. Field names carry
/// their unit; polarisabilities are in atomic units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesFile {
    #[serde(default = "default_species_name")]
    pub name: String,
    pub mass_u: f64,
    #[serde(default = "default_charge")]
    pub charge_e: f64,
    pub clock_wavelength_nm: f64,
    pub delta_alpha_au: f64,
    pub alpha2_dc_au: f64,
    pub quadrupole_moment_ea0sq: f64,
    pub alpha2_magic_au: f64,
    pub magic_compensation_wavelength_nm: f64,
    pub cooling_linewidth_mhz: f64,
    pub quadratic_zeeman_hz_per_mt2: f64,
    pub hyperfine_factors: Vec<f64>,
}

fn default_species_name() -> String {
    "custom".to_string()
}

fn default_charge() -> f64 {
    1.0
}

impl SpeciesFile {
    pub fn to_species(&self) -> Result<ClockSpecies> {
        let wavelength = self.clock_wavelength_nm * 1e-9;
        let species = ClockSpecies {
            name: self.name.clone(),
            mass: self.mass_u * CONSTANTS.u,
            charge: self.charge_e * CONSTANTS.e,
            clock_frequency: CONSTANTS.c / wavelength,
            clock_wavelength: wavelength,
            delta_alpha_static: au_to_si_polarisability(self.delta_alpha_au),
            alpha2_dc: au_to_si_polarisability(self.alpha2_dc_au),
            quadrupole_moment: self.quadrupole_moment_ea0sq * CONSTANTS.e * CONSTANTS.a0 * CONSTANTS.a0,
            alpha2_magic: au_to_si_polarisability(self.alpha2_magic_au),
            magic_compensation_wavelength: self.magic_compensation_wavelength_nm * 1e-9,
            cooling_linewidth: 2.0 * PI * self.cooling_linewidth_mhz * 1e6,
            quadratic_zeeman_coefficient: self.quadratic_zeeman_hz_per_mt2 * 1e6,
            hyperfine_factors: self.hyperfine_factors.clone(),
        };
        species.validate()?;
        Ok(species)
    }

    pub fn from_species(s: &ClockSpecies) -> Self {
        let e_a0sq = CONSTANTS.e * CONSTANTS.a0 * CONSTANTS.a0;
        SpeciesFile {
            name: s.name.clone(),
            mass_u: s.mass / CONSTANTS.u,
            charge_e: s.charge / CONSTANTS.e,
            clock_wavelength_nm: s.clock_wavelength * 1e9,
            delta_alpha_au: si_to_au_polarisability(s.delta_alpha_static),
            alpha2_dc_au: si_to_au_polarisability(s.alpha2_dc),
            quadrupole_moment_ea0sq: s.quadrupole_moment / e_a0sq,
            alpha2_magic_au: si_to_au_polarisability(s.alpha2_magic),
            magic_compensation_wavelength_nm: s.magic_compensation_wavelength * 1e9,
            cooling_linewidth_mhz: s.cooling_linewidth / (2.0 * PI) / 1e6,
            quadratic_zeeman_hz_per_mt2: s.quadratic_zeeman_coefficient / 1e6,
            hyperfine_factors: s.hyperfine_factors.clone(),
        }
    }
}

/// Looks up a built-in species by name.
pub fn builtin_species(name: &str) -> Result<ClockSpecies> {
    match name.to_ascii_lowercase().as_str() {
        "lu176" | "176lu+" | "lu+" | "lu" => Ok(lu176_species()),
        other => Err(Error::Validation(format!("unknown built-in species '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hbar_is_h_over_two_pi() {
        assert_relative_eq!(CONSTANTS.hbar, CONSTANTS.h / (2.0 * PI), max_relative = 1e-15);
    }

    #[test]
    fn au_conversion_values() {
        assert_eq!(au_to_si_polarisability(0.0), 0.0);
        // 4πε₀a₀³ evaluated by hand from the CODATA inputs above
        let unit = 4.0 * PI * 8.854_187_812_8e-12 * 5.291_772_109_03e-11_f64.powi(3);
        assert_relative_eq!(au_to_si_polarisability(1.0), unit, max_relative = 1e-15);
        assert_relative_eq!(au_to_si_polarisability(1.0), 1.64878e-41, max_relative = 1e-5);
        assert_relative_eq!(au_to_si_polarisability(-2.19), -3.611e-41, max_relative = 1e-3);
    }

    #[test]
    fn au_round_trip() {
        for x in [1.0, -1.0, 2.19, -2.19, 100.0, -100.0] {
            let r = au_to_si_polarisability(x) / au_to_si_polarisability(1.0);
            assert_relative_eq!(r, x, max_relative = 1e-12);
        }
    }

    #[test]
    fn lu_record() {
        let lu = lu176_species();
        lu.validate().unwrap();
        assert!(lu.delta_alpha_static < 0.0);
        assert_relative_eq!(si_to_au_polarisability(lu.delta_alpha_static), -2.19, max_relative = 1e-12);
        assert_relative_eq!(lu.cooling_linewidth, 2.0 * PI * 2.45e6, max_relative = 1e-15);
        assert_relative_eq!(
            lu.quadrupole_moment / (CONSTANTS.e * CONSTANTS.a0 * CONSTANTS.a0),
            -1.3,
            max_relative = 1e-12
        );
        assert_eq!(lu.hyperfine_factors, vec![-0.4, 1.0, -0.6]);
        let nu = CONSTANTS.c / lu.clock_wavelength;
        assert!(((nu - lu.clock_frequency) / nu).abs() < 1e-9);
    }

    #[test]
    fn species_file_round_trip() {
        let lu = lu176_species();
        let file = SpeciesFile::from_species(&lu);
        let text = toml::to_string(&file).unwrap();
        let back: SpeciesFile = toml::from_str(&text).unwrap();
        let lu2 = back.to_species().unwrap();
        assert_relative_eq!(lu2.mass, lu.mass, max_relative = 1e-14);
        assert_relative_eq!(lu2.delta_alpha_static, lu.delta_alpha_static, max_relative = 1e-14);
        assert_relative_eq!(lu2.quadrupole_moment, lu.quadrupole_moment, max_relative = 1e-14);
    }

    #[test]
    fn positive_delta_alpha_is_accepted_on_load() {
        let mut file = SpeciesFile::from_species(&lu176_species());
        file.delta_alpha_au = 3.0;
        assert!(file.to_species().is_ok());
    }

    #[test]
    fn inconsistent_wavelength_rejected() {
        let mut lu = lu176_species();
        lu.clock_frequency *= 1.001;
        assert!(lu.validate().is_err());
    }
}
