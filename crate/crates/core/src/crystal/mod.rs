//! Equilibrium Coulomb crystals in the pseudo-potential approximation.
//!
//! Positions are in units of the trap length scale `l`. Equilibria are found
//! by damped second-order dynamics from icosahedral or bcc seeds.

mod anneal;
mod force;
pub mod io;
pub mod seed;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trap::TrapConfig;

pub use anneal::{anneal, anneal_with_log, energy_non_increasing, AnnealLog};
pub use force::{max_force, scaled_energy, scaled_force};
pub use seed::{apply_jitter, bcc_seed, default_bcc_constant, mackay_icosahedron_seed, min_pairwise_distance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedFamily {
    Icosahedral,
    Bcc,
    External,
}

impl fmt::Display for SeedFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeedFamily::Icosahedral => "icosahedral",
            SeedFamily::Bcc => "bcc",
            SeedFamily::External => "external",
        })
    }
}

impl FromStr for SeedFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "icosahedral" | "mackay" => Ok(SeedFamily::Icosahedral),
            "bcc" => Ok(SeedFamily::Bcc),
            "external" => Ok(SeedFamily::External),
            other => Err(Error::Parse(format!("unknown seed family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Scaled time step.
    pub time_step: f64,
    /// Viscous damping rate γ, scaled.
    pub damping_coefficient: f64,
    /// Convergence threshold on the largest per-ion force, scaled.
    pub force_tolerance: f64,
    pub max_steps: usize,
    /// Seed jitter as a fraction of the seed's minimum spacing.
    pub jitter_fraction: f64,
    /// bcc cube edge; `None` selects [`default_bcc_constant`].
    pub bcc_lattice_constant: Option<f64>,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            time_step: 0.1,
            damping_coefficient: 0.1,
            force_tolerance: 1e-9,
            max_steps: 2_000_000,
            jitter_fraction: 0.1,
            bcc_lattice_constant: None,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_step > 0.0) {
            return Err(Error::Validation("solver.time_step must be positive".into()));
        }
        if !(self.force_tolerance > 0.0) {
            return Err(Error::Validation("solver.force_tolerance must be positive".into()));
        }
        if !(self.damping_coefficient >= 0.0) {
            return Err(Error::Validation("solver.damping_coefficient must be non-negative".into()));
        }
        if !(0.0..=0.5).contains(&self.jitter_fraction) {
            return Err(Error::Validation("solver.jitter_fraction must lie in [0, 0.5]".into()));
        }
        if let Some(d) = self.bcc_lattice_constant {
            if !(d > 0.0) {
                return Err(Error::Validation("solver.bcc_lattice_constant must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Equilibrium positions R₀ (scaled) with solver provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct IonCrystal {
    pub positions: Vec<Vector3<f64>>,
    pub seed_family: SeedFamily,
    pub rng_seed: u64,
    /// Largest per-ion force at the returned state.
    pub residual: f64,
    pub trap: TrapConfig,
}

impl IonCrystal {
    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        if self.positions.is_empty() {
            return Vector3::zeros();
        }
        self.positions.iter().sum::<Vector3<f64>>() / self.positions.len() as f64
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        seed::min_pairwise_distance(&self.positions)
    }

    /// Checks the solver invariants against `tolerance`.
    pub fn check_invariants(&self, tolerance: f64) -> Result<()> {
        if !(self.residual < tolerance) {
            return Err(Error::Validation(format!("residual {:e} not below tolerance {tolerance:e}", self.residual)));
        }
        if self.n_ions() >= 2 && self.min_pairwise_distance() <= 0.5 {
            return Err(Error::Validation("crystal has ions closer than 0.5 scaled units".into()));
        }
        if self.trap.is_spherical() && self.centroid().norm() > 10.0 * tolerance {
            return Err(Error::Validation(format!("centroid {} off the trap centre", self.centroid())));
        }
        Ok(())
    }
}

/// Seeds and anneals a crystal of `n` ions.
pub fn solve_crystal(
    n: usize,
    family: SeedFamily,
    rng_seed: u64,
    trap: &TrapConfig,
    params: &SolverParams,
) -> Result<IonCrystal> {
    solve_crystal_with_log(n, family, rng_seed, trap, params).map(|(c, _)| c)
}

pub fn solve_crystal_with_log(
    n: usize,
    family: SeedFamily,
    rng_seed: u64,
    trap: &TrapConfig,
    params: &SolverParams,
) -> Result<(IonCrystal, AnnealLog)> {
    params.validate()?;
    let sites = match family {
        SeedFamily::Icosahedral => mackay_icosahedron_seed(n)?,
        SeedFamily::Bcc => bcc_seed(n, params.bcc_lattice_constant.unwrap_or_else(default_bcc_constant))?,
        SeedFamily::External => {
            return Err(Error::Validation("external crystals are imported, not seeded".into()));
        }
    };
    let start = apply_jitter(&sites, params.jitter_fraction, rng_seed)?;
    let (mut crystal, log) = anneal_with_log(&start, trap, params)?;
    crystal.seed_family = family;
    crystal.rng_seed = rng_seed;
    Ok((crystal, log))
}

/// Mean over ions of R₀ᵀ M R₀ for a symmetric weight `m`.
fn mean_quadratic_form(crystal: &IonCrystal, m: &Matrix3<f64>) -> f64 {
    if crystal.positions.is_empty() {
        return 0.0;
    }
    crystal.positions.iter().map(|r| r.dot(&(m * r))).sum::<f64>() / crystal.n_ions() as f64
}

/// Mean of R₀ᵀΛ²R₀ over the crystal.
pub fn crystal_moment(crystal: &IonCrystal, lambda_unit: &Matrix3<f64>) -> f64 {
    mean_quadratic_form(crystal, &(lambda_unit * lambda_unit))
}

/// Continuum estimate of the moment, (2/5)N^{2/3} − 0.3964.
pub fn moment_law(n: usize) -> f64 {
    0.4 * (n as f64).powf(2.0 / 3.0) - 0.3964
}

/// Largest distance of an ion from the trap centre.
pub fn crystal_radius(crystal: &IonCrystal) -> f64 {
    crystal.positions.iter().map(|p| p.norm()).fold(0.0, f64::max)
}
