//! Scenario configuration files (TOML).
//!
//! ```toml
//! species = "lu176"            # or a [species] table
//! out = "out"
//!
//! [trap]
//! axial_frequency_hz = 200e3
//! a = 1.7320508075688772
//! delta = 0.0
//!
//! [drive]
//! mode = "magic-corrected"     # absolute | magic | magic-corrected
//! value_hz = 23.2e6            # absolute mode only
//! multiple = 1.0               # magic mode: Ω = multiple·Ω₀
//!
//! [solver]                     # SolverParams, all optional
//! [scan]
//! n = [100, 1000]
//! seeds = [1]
//! seed_family = "icosahedral"
//! omega_rel = [0.9998, 1.0001]
//! omega_points = 31
//! [beam]
//! waist_l = 100.0
//! max_power_w = 50.0
//! [environment]                # temperature, magnetic_field, ...
//! [ramsey]
//! free_precession_time = 1.0
//! averaging_time = 1.0
//! [oracle]
//! steps_per_cycle = 400
//! n_cycles = 64
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crystal::{SeedFamily, SolverParams};
use crate::error::{Error, Result};
use crate::metrics::Environment;
use crate::physics::{builtin_species, ClockSpecies, SpeciesFile};
use crate::trap::{corrected_magic_frequency, magic_rf_frequency, MagicCorrection, TrapConfig, TrapFile, SPHERICAL_A};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpeciesSpec {
    Builtin(String),
    Custom(SpeciesFile),
}

impl SpeciesSpec {
    pub fn resolve(&self) -> Result<ClockSpecies> {
        match self {
            SpeciesSpec::Builtin(name) => builtin_species(name),
            SpeciesSpec::Custom(file) => file.to_species(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaMode {
    Absolute,
    Magic,
    MagicCorrected,
}

impl std::str::FromStr for OmegaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(OmegaMode::Absolute),
            "magic" => Ok(OmegaMode::Magic),
            "magic-corrected" => Ok(OmegaMode::MagicCorrected),
            other => Err(Error::Parse(format!("unknown omega mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub mode: OmegaMode,
    /// Drive frequency in Hz (absolute mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_hz: Option<f64>,
    /// Ω/Ω₀ (magic mode).
    #[serde(default = "one")]
    pub multiple: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for DriveSpec {
    fn default() -> Self {
        DriveSpec { mode: OmegaMode::MagicCorrected, value_hz: None, multiple: 1.0 }
    }
}

impl DriveSpec {
    /// Angular drive frequency for a trap with the given axial frequency and a.
    pub fn omega_rf(&self, species: &ClockSpecies, omega_z: f64, a: f64) -> Result<f64> {
        match self.mode {
            OmegaMode::Absolute => {
                let hz = self.value_hz.ok_or_else(|| Error::Validation("absolute drive needs value_hz".into()))?;
                if !(hz > 0.0) {
                    return Err(Error::Validation(format!("drive frequency must be positive, got {hz}")));
                }
                Ok(2.0 * std::f64::consts::PI * hz)
            }
            OmegaMode::Magic => {
                if !(self.multiple > 0.0) {
                    return Err(Error::Validation(format!("drive multiple must be positive, got {}", self.multiple)));
                }
                Ok(self.multiple * magic_rf_frequency(species)?)
            }
            OmegaMode::MagicCorrected => {
                let kind = if a == SPHERICAL_A { MagicCorrection::Spherical } else { MagicCorrection::General };
                corrected_magic_frequency(species, omega_z, a, kind)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    pub n: Vec<usize>,
    pub seeds: Vec<u64>,
    pub seed_family: SeedFamily,
    /// Ω grid for magic scans, relative to Ω₀.
    pub omega_rel: [f64; 2],
    pub omega_points: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec { n: vec![100], seeds: vec![1], seed_family: SeedFamily::Icosahedral, omega_rel: [0.9998, 1.0001], omega_points: 31 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSpec {
    /// Beam waist in units of the characteristic length.
    pub waist_l: f64,
    /// Upper end of the power search, W.
    pub max_power_w: f64,
}

impl Default for BeamSpec {
    fn default() -> Self {
        BeamSpec { waist_l: 100.0, max_power_w: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamseySpec {
    pub free_precession_time: f64,
    pub averaging_time: f64,
}

impl Default for RamseySpec {
    fn default() -> Self {
        RamseySpec { free_precession_time: 1.0, averaging_time: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    pub steps_per_cycle: usize,
    pub n_cycles: usize,
}

impl Default for OracleSpec {
    fn default() -> Self {
        let p = crate::oracle::OracleParams::default();
        OracleSpec { steps_per_cycle: p.steps_per_cycle, n_cycles: p.n_cycles }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_species")]
    pub species: SpeciesSpec,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_trap")]
    pub trap: TrapFile,
    #[serde(default)]
    pub drive: DriveSpec,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub beam: BeamSpec,
    #[serde(default)]
    pub environment: Environment,
    #[serde(default)]
    pub ramsey: RamseySpec,
    #[serde(default)]
    pub oracle: OracleSpec,
}

fn default_species() -> SpeciesSpec {
    SpeciesSpec::Builtin("lu176".into())
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_trap() -> TrapFile {
    TrapFile { axial_frequency_hz: 200e3, a: SPHERICAL_A, delta: 0.0 }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            species: default_species(),
            out: default_out(),
            trap: default_trap(),
            drive: DriveSpec::default(),
            solver: SolverParams::default(),
            scan: ScanSpec::default(),
            beam: BeamSpec::default(),
            environment: Environment::default(),
            ramsey: RamseySpec::default(),
            oracle: OracleSpec::default(),
        }
    }
}

/// Species and trap after resolving names and the drive specification.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub species: ClockSpecies,
    pub trap: TrapConfig,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.scan.n.is_empty() || self.scan.n.contains(&0) {
            return Err(Error::Validation("scan.n needs at least one entry, all >= 1".into()));
        }
        if self.scan.seeds.is_empty() {
            return Err(Error::Validation("scan.seeds must not be empty".into()));
        }
        let [lo, hi] = self.scan.omega_rel;
        if !(lo > 0.0 && hi > lo) || self.scan.omega_points < 2 {
            return Err(Error::Validation("scan.omega_rel must be increasing and positive with at least 2 points".into()));
        }
        if !(self.beam.waist_l > 0.0 && self.beam.max_power_w > 0.0) {
            return Err(Error::Validation("beam waist and max power must be positive".into()));
        }
        if !(self.ramsey.free_precession_time > 0.0 && self.ramsey.averaging_time > 0.0) {
            return Err(Error::Validation("ramsey times must be positive".into()));
        }
        self.solver.validate()?;
        self.species.resolve()?;
        self.environment.orientation.validate()?;
        Ok(())
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        self.validate()?;
        let species = self.species.resolve()?;
        let omega_rf = self.drive.omega_rf(&species, self.trap.omega_z(), self.trap.a)?;
        let trap = self.trap.build(omega_rf)?;
        Ok(ResolvedScenario { species, trap })
    }

    /// Ω grid for magic scans in rad/s.
    pub fn omega_grid(&self, species: &ClockSpecies) -> Result<Vec<f64>> {
        let omega0 = magic_rf_frequency(species)?;
        let [lo, hi] = self.scan.omega_rel;
        let k = self.scan.omega_points;
        Ok((0..k).map(|i| omega0 * (lo + (hi - lo) * i as f64 / (k - 1) as f64)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        let r = c.resolve().unwrap();
        let corrected = corrected_magic_frequency(&r.species, r.trap.omega_z, SPHERICAL_A, MagicCorrection::Spherical).unwrap();
        assert_eq!(r.trap.omega_rf, corrected);
        assert!(r.trap.is_spherical());
    }

    #[test]
    fn round_trips_through_toml() {
        let text = r#"
            species = "lu176"
            out = "results"
            [trap]
            axial_frequency_hz = 150e3
            a = 1.4
            delta = 0.1
            [drive]
            mode = "absolute"
            value_hz = 20e6
            [scan]
            n = [10, 20]
            seeds = [3, 4]
            seed_family = "bcc"
            [environment]
            temperature = 301.0
        "#;
        let c = ScenarioConfig::from_toml_str(text).unwrap();
        assert_eq!(c.scan.seed_family, SeedFamily::Bcc);
        assert_eq!(c.environment.temperature, 301.0);
        let again = ScenarioConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(c, again);
        let r = c.resolve().unwrap();
        assert_relative_eq!(r.trap.omega_rf, 2.0 * std::f64::consts::PI * 20e6);
    }

    #[test]
    fn custom_species_table() {
        let lu = SpeciesFile::from_species(&crate::physics::lu176_species());
        let c = ScenarioConfig { species: SpeciesSpec::Custom(lu), ..Default::default() };
        let again = ScenarioConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(again.species.resolve().unwrap().name, "176Lu+");
    }

    #[test]
    fn corrected_drive_follows_trap_shape() {
        let sp = crate::physics::lu176_species();
        let d = DriveSpec { mode: OmegaMode::MagicCorrected, ..Default::default() };
        let wz = 2.0 * std::f64::consts::PI * 200e3;
        let s = d.omega_rf(&sp, wz, SPHERICAL_A).unwrap();
        assert_eq!(s, corrected_magic_frequency(&sp, wz, SPHERICAL_A, MagicCorrection::Spherical).unwrap());
        let g = d.omega_rf(&sp, wz, 1.4).unwrap();
        assert_eq!(g, corrected_magic_frequency(&sp, wz, 1.4, MagicCorrection::General).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ScenarioConfig::from_toml_str("[scan]\nn = [0]"), Err(Error::Validation(_))));
        assert!(matches!(ScenarioConfig::from_toml_str("bogus = 1"), Err(Error::Parse(_))));
        assert!(matches!(ScenarioConfig::from_toml_str("species = \"xx\""), Err(_)));
        let c = ScenarioConfig::from_toml_str("[drive]\nmode = \"absolute\"").unwrap();
        assert!(matches!(c.resolve(), Err(Error::Validation(_))));
        assert!("magic-corrected".parse::<OmegaMode>().is_ok());
        assert!("nope".parse::<OmegaMode>().is_err());
    }

    #[test]
    fn omega_grid_spans_range() {
        let c = ScenarioConfig::default();
        let sp = c.species.resolve().unwrap();
        let g = c.omega_grid(&sp).unwrap();
        let w0 = magic_rf_frequency(&sp).unwrap();
        assert_eq!(g.len(), 31);
        assert_relative_eq!(g[0], 0.9998 * w0);
        assert_relative_eq!(g[30], 1.0001 * w0);
    }
}
