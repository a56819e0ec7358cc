//! Quadrupole shifts from neighbour-ion field gradients, tensor-polarisability
//! shifts from the RF field, and their compensation with a doughnut beam.
//!
//! Field conventions used throughout:
//! - RF field: E(t) = A cos(Ωt), so the cycle average of E² is |A|²/2.
//! - Beam: ⟨E²⟩ = I/(ε₀c), already a time average.
//! - Beam polarisation is linear and transverse to the z quantisation axis,
//!   so ⟨3E_z² − E²⟩ = −⟨E²⟩ for the beam, as for the RF field.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::crystal::IonCrystal;
use crate::distribution::{mean_std, ShiftDistribution};
use crate::error::{Error, Result};
use crate::micromotion::{per_ion_pair_sum, space_charge_w};
use crate::physics::{ClockSpecies, CONSTANTS};
use crate::special::golden_section_minimize;
use crate::trap::{characteristic_length, TrapConfig};

/// Scaled field-gradient tensor at one ion, Qᵢ = Σⱼ Q_ij.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrupoleTensor {
    pub q_matrix: Matrix3<f64>,
    pub ion_index: usize,
}

pub fn quadrupole_tensors(crystal: &IonCrystal) -> Result<Vec<QuadrupoleTensor>> {
    let sums = per_ion_pair_sum(crystal, Matrix3::zeros(), |_, _, _, q| *q)?;
    Ok(sums.into_iter().enumerate().map(|(ion_index, q_matrix)| QuadrupoleTensor { q_matrix, ion_index }).collect())
}

pub fn quadrupole_tensor(crystal: &IonCrystal, i: usize) -> Result<QuadrupoleTensor> {
    if i >= crystal.n_ions() {
        return Err(Error::Validation(format!("ion {i} out of range for {} ions", crystal.n_ions())));
    }
    let mut q = Matrix3::zeros();
    for j in 0..crystal.n_ions() {
        if j != i {
            q += crate::micromotion::coulomb_pair_kernels(crystal, i, j)?.1;
        }
    }
    Ok(QuadrupoleTensor { q_matrix: q, ion_index: i })
}

/// Quantisation-axis orientation (Euler α, β) relative to the trap frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldOrientation {
    pub euler_alpha: f64,
    pub euler_beta: f64,
}

impl Default for FieldOrientation {
    fn default() -> Self {
        FieldOrientation { euler_alpha: 0.0, euler_beta: 0.0 }
    }
}

impl FieldOrientation {
    pub fn new(euler_alpha: f64, euler_beta: f64) -> Result<Self> {
        let o = FieldOrientation { euler_alpha, euler_beta };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.euler_alpha.is_finite() || !(0.0..=PI).contains(&self.euler_beta) {
            return Err(Error::Validation(format!(
                "orientation needs finite alpha and beta in [0, pi], got ({}, {})",
                self.euler_alpha, self.euler_beta
            )));
        }
        Ok(())
    }

    /// Unit vector of the quantisation axis.
    pub fn axis(&self) -> Unit<Vector3<f64>> {
        let (sb, cb) = self.euler_beta.sin_cos();
        let (sa, ca) = self.euler_alpha.sin_cos();
        Unit::new_normalize(Vector3::new(sb * ca, sb * sa, cb))
    }
}

/// (Q_zz/4)(3cos²β − 1) + ½sin2β(Q_xz cosα + Q_yz sinα)
///   + ¼sin²β((Q_xx − Q_yy)cos2α + 2Q_xy sin2α).
pub fn quadrupole_geometric_factor(q: &Matrix3<f64>, orient: &FieldOrientation) -> f64 {
    let (a, b) = (orient.euler_alpha, orient.euler_beta);
    let (sb, cb) = b.sin_cos();
    q[(2, 2)] / 4.0 * (3.0 * cb * cb - 1.0)
        + 0.5 * (2.0 * b).sin() * (q[(0, 2)] * a.cos() + q[(1, 2)] * a.sin())
        + 0.25 * sb * sb * ((q[(0, 0)] - q[(1, 1)]) * (2.0 * a).cos() + 2.0 * q[(0, 1)] * (2.0 * a).sin())
}

/// Θ·(mω_z²/q)/h in Hz: the shift per unit scaled gradient. The scaled Q
/// carries 1/l³ and q/(4πε₀l³) = mω_z²/q.
pub fn quadrupole_scale_hz(species: &ClockSpecies, trap: &TrapConfig) -> f64 {
    species.quadrupole_moment * species.mass * trap.omega_z * trap.omega_z / (species.charge * CONSTANTS.h)
}

/// Per-ion quadrupole shift in Hz with the hyperfine factor omitted.
pub fn quadrupole_shift_distribution(
    crystal: &IonCrystal,
    species: &ClockSpecies,
    trap: &TrapConfig,
    orient: &FieldOrientation,
) -> Result<ShiftDistribution> {
    orient.validate()?;
    let scale = quadrupole_scale_hz(species, trap);
    let per_ion = quadrupole_tensors(crystal)?.iter().map(|t| scale * quadrupole_geometric_factor(&t.q_matrix, orient)).collect();
    Ok(ShiftDistribution::new("quadrupole", "Hz", per_ion))
}

/// `k` quantisation-axis orientations spread evenly over the sphere
/// (uniform in cos β, golden-angle steps in α).
pub fn orientation_sweep(k: usize) -> Vec<FieldOrientation> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..k)
        .map(|i| {
            let cb = 1.0 - 2.0 * (i as f64 + 0.5) / k as f64;
            FieldOrientation { euler_alpha: (golden * i as f64).rem_euclid(2.0 * PI), euler_beta: cb.acos() }
        })
        .collect()
}

/// Unweighted mean of C·shift over hyperfine levels.
pub fn hyperfine_average(levels: &[(f64, f64)]) -> Result<f64> {
    if levels.is_empty() {
        return Err(Error::Validation("hyperfine average over no levels".into()));
    }
    Ok(levels.iter().map(|(c, s)| c * s).sum::<f64>() / levels.len() as f64)
}

/// Cycle-averaged RF field quantities per ion, V²/m².
#[derive(Debug, Clone, PartialEq)]
pub struct RfFieldAverages {
    /// ⟨E²⟩.
    pub e2: Vec<f64>,
    /// ⟨3E_z² − E²⟩ with z along the quantisation axis.
    pub anisotropy: Vec<f64>,
}

/// RF field amplitude −(mω_zΩl/q)(Λ_rf R₀ − (ε²/4)W₀) per ion, V/m.
pub fn rf_field_amplitudes(crystal: &IonCrystal, species: &ClockSpecies, trap: &TrapConfig) -> Result<Vec<Vector3<f64>>> {
    let l = characteristic_length(species, trap.omega_z)?;
    let scale = -species.mass * trap.omega_z * trap.omega_rf * l / species.charge;
    let e2 = trap.epsilon().powi(2);
    let lrf = trap.lambda().lambda_rf;
    let w = space_charge_w(crystal)?;
    Ok(crystal.positions.iter().zip(&w).map(|(r, wi)| (lrf * r - wi * (e2 / 4.0)) * scale).collect())
}

pub fn rf_quadratic_field_average(
    crystal: &IonCrystal,
    species: &ClockSpecies,
    trap: &TrapConfig,
    quantisation_axis: &Unit<Vector3<f64>>,
) -> Result<RfFieldAverages> {
    let amps = rf_field_amplitudes(crystal, species, trap)?;
    let e2: Vec<f64> = amps.iter().map(|a| 0.5 * a.norm_squared()).collect();
    let anisotropy = amps
        .iter()
        .zip(&e2)
        .map(|(a, e2)| {
            let ez = a.dot(quantisation_axis);
            1.5 * ez * ez - e2
        })
        .collect();
    Ok(RfFieldAverages { e2, anisotropy })
}

/// δν/ν = −(1/4)(α₂/hν)⟨3E_z² − E²⟩ with C = 1.
fn tensor_shift(alpha2: f64, species: &ClockSpecies, anisotropy: f64) -> f64 {
    -0.25 * alpha2 / species.photon_energy() * anisotropy
}

/// Per-ion fractional tensor shift from the RF field, quantisation axis
/// along the trap z axis, DC tensor polarisability.
pub fn tensor_shift_distribution(crystal: &IonCrystal, species: &ClockSpecies, trap: &TrapConfig) -> Result<ShiftDistribution> {
    let f = rf_quadratic_field_average(crystal, species, trap, &Vector3::z_axis())?;
    let per_ion = f.anisotropy.iter().map(|&x| tensor_shift(species.alpha2_dc, species, x)).collect();
    Ok(ShiftDistribution::new("tensor (uncompensated)", "fractional", per_ion))
}

/// Doughnut Laguerre-Gauss beam (p = 0, ℓ = 1) propagating along the trap
/// axis and centred on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamProfile {
    /// 1/e² intensity radius of the fundamental, m.
    pub waist: f64,
    /// W.
    pub power: f64,
    /// m.
    pub wavelength: f64,
    /// Tensor polarisability at `wavelength`, SI.
    pub alpha2_at_wavelength: f64,
}

impl BeamProfile {
    /// Beam at the species' compensation wavelength.
    pub fn for_species(species: &ClockSpecies, waist: f64, power: f64) -> Result<Self> {
        let b = BeamProfile {
            waist,
            power,
            wavelength: species.magic_compensation_wavelength,
            alpha2_at_wavelength: species.alpha2_magic,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.waist > 0.0) || !(self.power >= 0.0) || !(self.wavelength > 0.0) {
            return Err(Error::Validation(format!(
                "beam needs waist > 0, power >= 0, wavelength > 0 (got {}, {}, {})",
                self.waist, self.power, self.wavelength
            )));
        }
        Ok(())
    }

    pub fn with_power(&self, power: f64) -> Self {
        BeamProfile { power, ..*self }
    }
}

/// I(ρ) = (4P/πw⁴)ρ²exp(−2ρ²/w²), W/m².
pub fn lg_doughnut_intensity(rho: f64, beam: &BeamProfile) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("rho must be non-negative, got {rho}")));
    }
    beam.validate()?;
    let w2 = beam.waist * beam.waist;
    Ok(4.0 * beam.power / (PI * w2 * w2) * rho * rho * (-2.0 * rho * rho / w2).exp())
}

fn check_beam_sign(species: &ClockSpecies, beam: &BeamProfile) -> Result<()> {
    if !(beam.alpha2_at_wavelength * species.alpha2_dc < 0.0) {
        return Err(Error::Sign(format!(
            "compensation needs a tensor polarisability of opposite sign to the DC value ({:e} vs {:e})",
            beam.alpha2_at_wavelength, species.alpha2_dc
        )));
    }
    Ok(())
}

/// Fractional beam shift per ion at unit power, (α₂/4hν)·I₁(ρ)/(ε₀c).
fn beam_shift_per_watt(crystal: &IonCrystal, species: &ClockSpecies, trap: &TrapConfig, beam: &BeamProfile) -> Result<Vec<f64>> {
    let l = characteristic_length(species, trap.omega_z)?;
    let unit = beam.with_power(1.0);
    crystal
        .positions
        .iter()
        .map(|r| {
            let rho = l * (r.x * r.x + r.y * r.y).sqrt();
            let e2 = lg_doughnut_intensity(rho, &unit)? / (CONSTANTS.epsilon0 * CONSTANTS.c);
            Ok(tensor_shift(beam.alpha2_at_wavelength, species, -e2))
        })
        .collect()
}

/// RF tensor shift plus the compensation-beam shift.
pub fn compensated_tensor_distribution(
    crystal: &IonCrystal,
    species: &ClockSpecies,
    trap: &TrapConfig,
    beam: &BeamProfile,
) -> Result<ShiftDistribution> {
    beam.validate()?;
    check_beam_sign(species, beam)?;
    let rf = tensor_shift_distribution(crystal, species, trap)?;
    let per_watt = beam_shift_per_watt(crystal, species, trap, beam)?;
    let per_ion = rf.per_ion.iter().zip(&per_watt).map(|(u, v)| u + beam.power * v).collect();
    Ok(ShiftDistribution::new("tensor (compensated)", "fractional", per_ion))
}

/// Power that cancels the RF tensor shift exactly in the near-axis limit
/// (ρ ≪ w, W₀ neglected): (mω_zΩa/q)²·πw⁴ε₀c/8 · (−α₂,dc/α₂,beam).
pub fn near_axis_matching_power(species: &ClockSpecies, trap: &TrapConfig, beam: &BeamProfile) -> Result<f64> {
    check_beam_sign(species, beam)?;
    let g = species.mass * trap.omega_z * trap.omega_rf * trap.a / species.charge;
    let w2 = beam.waist * beam.waist;
    Ok(g * g * PI * w2 * w2 * CONSTANTS.epsilon0 * CONSTANTS.c / 8.0 * (-species.alpha2_dc / beam.alpha2_at_wavelength))
}

/// Beam with the power in [0, p_max] minimising the standard deviation of
/// the compensated distribution (golden-section search, 1e-4 relative).
pub fn optimize_compensation_power(
    crystal: &IonCrystal,
    species: &ClockSpecies,
    trap: &TrapConfig,
    template: &BeamProfile,
    p_max: f64,
) -> Result<BeamProfile> {
    if crystal.n_ions() < 2 {
        return Err(Error::Validation("compensation power needs at least two ions".into()));
    }
    if !(p_max > 0.0) {
        return Err(Error::Validation(format!("p_max must be positive, got {p_max}")));
    }
    template.validate()?;
    check_beam_sign(species, template)?;
    let rf = tensor_shift_distribution(crystal, species, trap)?;
    let per_watt = beam_shift_per_watt(crystal, species, trap, template)?;
    let mut buf = vec![0.0; rf.per_ion.len()];
    let std_at = |p: f64, buf: &mut Vec<f64>| {
        for (k, (u, v)) in rf.per_ion.iter().zip(&per_watt).enumerate() {
            buf[k] = u + p * v;
        }
        mean_std(buf).1
    };
    let (p, _) = golden_section_minimize(|p| std_at(p, &mut buf), 0.0, p_max, 1e-6)?;
    Ok(template.with_power(p))
}

/// Quadrupole plus compensated tensor shift per ion, in Hz. Both are
/// rank-2 and share the hyperfine factor, which is omitted.
pub fn combined_rank2_distribution(
    crystal: &IonCrystal,
    species: &ClockSpecies,
    trap: &TrapConfig,
    orient: &FieldOrientation,
    beam: &BeamProfile,
) -> Result<ShiftDistribution> {
    let quad = quadrupole_shift_distribution(crystal, species, trap, orient)?;
    let tensor = compensated_tensor_distribution(crystal, species, trap, beam)?;
    let nu = species.clock_frequency;
    let per_ion = quad.per_ion.iter().zip(&tensor.per_ion).map(|(q, t)| q + t * nu).collect();
    Ok(ShiftDistribution::new("quadrupole + compensated tensor", "Hz", per_ion))
}
