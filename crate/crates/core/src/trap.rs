//! Linear Paul trap geometry, scaled units, the magic RF drive frequency and
//! its second-order corrections, and the Penning-trap analogue.
//!
//! Scaled units: time is measured in units of 2/Ω and length in units of
//! `l = (q²/(4πε₀ m ω_z²))^{1/3}`. The perturbation parameter is `ε = 2ω_z/Ω`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{ClockSpecies, CONSTANTS};

/// Upper bound on ε accepted by [`TrapConfig::new`].
pub const EPSILON_LIMIT: f64 = 0.2;

/// RF-strength parameter of the spherically symmetric trap.
pub const SPHERICAL_A: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Axial pseudo-potential frequency ω_z, rad/s.
    pub omega_z: f64,
    /// RF drive frequency Ω, rad/s.
    pub omega_rf: f64,
    /// RF confinement strength relative to the static field.
    pub a: f64,
    /// Transverse asymmetry.
    pub delta: f64,
}

impl TrapConfig {
    pub fn new(omega_z: f64, omega_rf: f64, a: f64, delta: f64) -> Result<Self> {
        let trap = TrapConfig { omega_z, omega_rf, a, delta };
        trap.validate()?;
        Ok(trap)
    }

    /// Spherically symmetric trap (a = √3, δ = 0).
    pub fn spherical(omega_z: f64, omega_rf: f64) -> Result<Self> {
        Self::new(omega_z, omega_rf, SPHERICAL_A, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_z.is_finite() && self.omega_z > 0.0) {
            return Err(Error::Domain(format!("omega_z must be positive, got {}", self.omega_z)));
        }
        if !(self.omega_rf.is_finite() && self.omega_rf > 0.0) {
            return Err(Error::Domain(format!("RF drive must be positive, got {}", self.omega_rf)));
        }
        if !(self.a.is_finite() && self.delta.is_finite()) {
            return Err(Error::Domain("a and delta must be finite".into()));
        }
        let eps = self.epsilon();
        if eps >= EPSILON_LIMIT {
            return Err(Error::Domain(format!(
                "epsilon = 2 omega_z / Omega = {eps} outside the perturbative regime (< {EPSILON_LIMIT})"
            )));
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        2.0 * self.omega_z / self.omega_rf
    }

    pub fn is_spherical(&self) -> bool {
        (self.a - SPHERICAL_A).abs() < 1e-12 && self.delta == 0.0
    }

    pub fn lambda(&self) -> LambdaMatrices {
        lambda_matrices(self.a, self.delta)
    }

    pub fn with_drive(&self, omega_rf: f64) -> Result<Self> {
        Self::new(self.omega_z, omega_rf, self.a, self.delta)
    }

    pub fn scaled_units(&self, species: &ClockSpecies) -> Result<ScaledUnits> {
        Ok(ScaledUnits {
            length_scale: characteristic_length(species, self.omega_z)?,
            time_scale: 2.0 / self.omega_rf,
            epsilon: self.epsilon(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledUnits {
    /// l, metres.
    pub length_scale: f64,
    /// 2/Ω, seconds.
    pub time_scale: f64,
    pub epsilon: f64,
}

/// Curvature matrices of the RF and static potentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaMatrices {
    pub lambda_rf: Matrix3<f64>,
    pub lambda_s: Matrix3<f64>,
    /// Λ_rf / a.
    pub lambda_unit: Matrix3<f64>,
}

impl LambdaMatrices {
    /// Pseudo-potential curvature Λ_s + ½Λ_rf², in units of ω_z².
    pub fn pseudo_curvature(&self) -> Matrix3<f64> {
        self.lambda_s + 0.5 * self.lambda_rf * self.lambda_rf
    }

    /// Squared secular frequencies in units of ω_z², ascending.
    pub fn secular_frequencies_sq(&self) -> Vector3<f64> {
        let eig = self.pseudo_curvature().symmetric_eigenvalues();
        let mut v = [eig[0], eig[1], eig[2]];
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Vector3::new(v[0], v[1], v[2])
    }
}

pub fn lambda_matrices(a: f64, delta: f64) -> LambdaMatrices {
    let lambda_rf = Matrix3::from_diagonal(&Vector3::new(a, -a, 0.0));
    let lambda_s = Matrix3::from_diagonal(&Vector3::new(-0.5 + delta, -0.5 - delta, 1.0));
    let lambda_unit = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 0.0));
    LambdaMatrices { lambda_rf, lambda_s, lambda_unit }
}

/// Length scale l = (q²/(4πε₀ m ω_z²))^{1/3}, metres.
pub fn characteristic_length(species: &ClockSpecies, omega_z: f64) -> Result<f64> {
    if !(omega_z > 0.0) {
        return Err(Error::Domain(format!("omega_z must be positive, got {omega_z}")));
    }
    let q = species.charge;
    Ok((q * q / (4.0 * PI * CONSTANTS.epsilon0 * species.mass * omega_z * omega_z)).cbrt())
}

/// Ω₀ = (q/mc)√(hν/(−Δα)), rad/s.
pub fn magic_rf_frequency(species: &ClockSpecies) -> Result<f64> {
    let da = species.delta_alpha_static;
    if !(da < 0.0) {
        return Err(Error::NoMagicFrequency(da));
    }
    Ok(species.charge / (species.mass * CONSTANTS.c) * (species.photon_energy() / -da).sqrt())
}

/// Second-order correction factors to the magic drive frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagicFactors {
    /// λ₀ for a general linear trap.
    pub lambda0: f64,
    pub lambda1: f64,
    /// λ₀′ for the spherical trap with the continuum space-charge field.
    pub lambda0_spherical: f64,
    pub lambda1_spherical: f64,
}

pub fn corrected_magic_factors(epsilon: f64, a: f64) -> MagicFactors {
    let e2 = epsilon * epsilon;
    let lambda1 = 1.0 + a * a * e2 / 8.0;
    let lambda0 = 1.0 - (16.0 + 5.0 * a * a) / 32.0 * e2 / (2.0 * lambda1);
    let lambda1_spherical = 1.0 + 19.0 / 40.0 * e2;
    let lambda0_spherical = 1.0 - 31.0 / 64.0 * e2 / lambda1_spherical;
    MagicFactors { lambda0, lambda1, lambda0_spherical, lambda1_spherical }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MagicCorrection {
    /// Ω₀√λ₀ (general linear trap).
    General,
    /// Ω₀√λ₀′ (spherical trap).
    Spherical,
}

/// Drive frequency Ω satisfying Ω = Ω₀√λ(ε(Ω)), solved by fixed-point
/// iteration so that the shift bracket evaluated at the returned Ω is zero.
pub fn corrected_magic_frequency(
    species: &ClockSpecies,
    omega_z: f64,
    a: f64,
    kind: MagicCorrection,
) -> Result<f64> {
    let omega0 = magic_rf_frequency(species)?;
    let mut omega = omega0;
    for _ in 0..100 {
        let f = corrected_magic_factors(2.0 * omega_z / omega, a);
        let lambda = match kind {
            MagicCorrection::General => f.lambda0,
            MagicCorrection::Spherical => f.lambda0_spherical,
        };
        let next = omega0 * lambda.sqrt();
        if (next - omega).abs() <= 1e-15 * omega0 {
            return Ok(next);
        }
        omega = next;
    }
    Ok(omega)
}

/// Combined Doppler + Stark fractional shift of an ion at cylindrical radius
/// `rho` in a Penning trap rotating at `omega_r`.
pub fn penning_fractional_shift(species: &ClockSpecies, omega_r: f64, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("rho must be non-negative, got {rho}")));
    }
    let c = CONSTANTS.c;
    let bracket = penning_bracket(species, omega_r);
    Ok(-0.5 * (omega_r / c).powi(2) * bracket * rho * rho)
}

fn penning_bracket(species: &ClockSpecies, omega_r: f64) -> f64 {
    // 1 + (Δα/hν)(m ω_r c/e)² written as 1 − (ω_r/ω_magic)² so that it
    // vanishes identically at the magic rotation frequency.
    match penning_magic_rotation(species) {
        Ok(w) => 1.0 - (omega_r / w).powi(2),
        Err(_) => {
            let x = species.mass * omega_r * CONSTANTS.c / species.charge;
            1.0 + species.delta_alpha_static / species.photon_energy() * x * x
        }
    }
}

/// Rotation frequency at which the Penning shift vanishes, rad/s.
pub fn penning_magic_rotation(species: &ClockSpecies) -> Result<f64> {
    magic_rf_frequency(species)
}

/// Smallest field for which the magic rotation stays below the cyclotron
/// frequency: B = (1/c)√(hν/(−Δα)), tesla.
pub fn penning_min_field(nu: f64, delta_alpha: f64) -> Result<f64> {
    if !(delta_alpha < 0.0) {
        return Err(Error::Domain(format!(
            "minimum Penning field needs a negative differential polarisability, got {delta_alpha:e}"
        )));
    }
    Ok((CONSTANTS.h * nu / -delta_alpha).sqrt() / CONSTANTS.c)
}

/// Trap section of a configuration file. Frequencies in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapFile {
    pub axial_frequency_hz: f64,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default)]
    pub delta: f64,
}

fn default_a() -> f64 {
    SPHERICAL_A
}

impl TrapFile {
    pub fn omega_z(&self) -> f64 {
        2.0 * PI * self.axial_frequency_hz
    }

    pub fn build(&self, omega_rf: f64) -> Result<TrapConfig> {
        TrapConfig::new(self.omega_z(), omega_rf, self.a, self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{au_to_si_polarisability, lu176_species};
    use approx::assert_relative_eq;

    fn omega_z() -> f64 {
        2.0 * PI * 200e3
    }

    #[test]
    fn length_scale_lu() {
        let l = characteristic_length(&lu176_species(), omega_z()).unwrap();
        assert_relative_eq!(l, 7.94e-6, max_relative = 5e-3);
        let l8 = characteristic_length(&lu176_species(), 8.0 * omega_z()).unwrap();
        assert_relative_eq!(l8, l / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn length_scale_calcium_like() {
        let mut s = lu176_species();
        s.mass = 40.0 * CONSTANTS.u;
        let l = characteristic_length(&s, omega_z()).unwrap();
        // q²/(4πε₀) = 2.307077e-28 J m; m ω_z² = 40 u × (2π·200 kHz)²
        let expected = (2.307_077_552e-28 / (40.0 * 1.660_539_066_6e-27 * omega_z().powi(2))).cbrt();
        assert_relative_eq!(l, expected, max_relative = 1e-8);
    }

    #[test]
    fn non_positive_omega_z_is_domain_error() {
        assert!(matches!(characteristic_length(&lu176_species(), 0.0), Err(Error::Domain(_))));
        assert!(matches!(characteristic_length(&lu176_species(), -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn lambda_matrices_cases() {
        let m = lambda_matrices(SPHERICAL_A, 0.0);
        assert_relative_eq!(m.pseudo_curvature(), Matrix3::identity(), epsilon = 1e-15);
        for (a, d) in [(0.3, 0.2), (2.0, -0.7), (SPHERICAL_A, 0.0)] {
            let m = lambda_matrices(a, d);
            assert_eq!(m.lambda_rf.trace(), 0.0);
            assert_eq!(m.lambda_s.trace(), 0.0);
            assert_relative_eq!(m.lambda_rf, a * m.lambda_unit);
        }
        let m = lambda_matrices(1.0, 0.1);
        assert_relative_eq!(
            m.lambda_s,
            Matrix3::from_diagonal(&Vector3::new(-0.4, -0.6, 1.0)),
            epsilon = 1e-15
        );
    }

    #[test]
    fn secular_frequencies_spherical_all_one() {
        let w = lambda_matrices(SPHERICAL_A, 0.0).secular_frequencies_sq();
        for k in 0..3 {
            assert_relative_eq!(w[k], 1.0, epsilon = 1e-14);
        }
        let w = lambda_matrices(2.0, 0.1).secular_frequencies_sq();
        assert_relative_eq!(w, Vector3::new(1.0, 1.4, 1.6), epsilon = 1e-14);
    }

    #[test]
    fn magic_frequency_scaling() {
        let lu = lu176_species();
        let w0 = magic_rf_frequency(&lu).unwrap();
        let mut s = lu.clone();
        s.delta_alpha_static *= 4.0;
        assert_relative_eq!(magic_rf_frequency(&s).unwrap(), w0 / 2.0, max_relative = 1e-14);

        // hν = −Δα numerically → Ω₀ = q/(mc)
        let mut unit = lu.clone();
        unit.delta_alpha_static = -unit.photon_energy();
        assert_relative_eq!(
            magic_rf_frequency(&unit).unwrap(),
            unit.charge / (unit.mass * CONSTANTS.c),
            max_relative = 1e-14
        );

        let mut bad = lu;
        bad.delta_alpha_static = 0.0;
        assert!(matches!(magic_rf_frequency(&bad), Err(Error::NoMagicFrequency(_))));
    }

    #[test]
    fn magic_factors() {
        let f = corrected_magic_factors(0.0, 1.3);
        assert_eq!((f.lambda0, f.lambda1, f.lambda0_spherical, f.lambda1_spherical), (1.0, 1.0, 1.0, 1.0));

        let eps = 3.0e-4_f64.sqrt();
        let f = corrected_magic_factors(eps, SPHERICAL_A);
        let frac = 1.0 - f.lambda0_spherical.sqrt();
        assert!((frac - 7e-5).abs() < 0.5e-5, "{frac}");
        // general and spherical factors agree to O(ε⁴) at a = √3
        assert!((f.lambda0 - f.lambda0_spherical).abs() < 10.0 * eps.powi(4));
        assert!((f.lambda0 - 1.0).abs() > 1e-5);
    }

    #[test]
    fn magic_factors_monotone() {
        let mut prev = corrected_magic_factors(0.0, 1.1);
        for k in 1..200 {
            let f = corrected_magic_factors(k as f64 * 1e-3, 1.1);
            assert!(f.lambda0 < prev.lambda0);
            assert!(f.lambda0_spherical < prev.lambda0_spherical);
            prev = f;
        }
    }

    #[test]
    fn corrected_frequency_is_self_consistent() {
        let lu = lu176_species();
        let w = corrected_magic_frequency(&lu, omega_z(), SPHERICAL_A, MagicCorrection::Spherical).unwrap();
        let f = corrected_magic_factors(2.0 * omega_z() / w, SPHERICAL_A);
        let w0 = magic_rf_frequency(&lu).unwrap();
        assert_relative_eq!((w / w0).powi(2), f.lambda0_spherical, max_relative = 1e-14);
    }

    #[test]
    fn trap_guard() {
        assert!(TrapConfig::new(1.0, 10.0, 1.0, 0.0).is_err());
        assert!(TrapConfig::new(1.0, 10.1, 1.0, 0.0).is_ok());
        assert!(TrapConfig::new(0.0, 10.0, 1.0, 0.0).is_err());
        assert!(TrapConfig::spherical(1.0, 100.0).unwrap().is_spherical());
        assert!(!TrapConfig::new(1.0, 100.0, SPHERICAL_A, 0.1).unwrap().is_spherical());
    }

    #[test]
    fn penning_shift_cases() {
        let lu = lu176_species();
        assert_eq!(penning_fractional_shift(&lu, 1e6, 0.0).unwrap(), 0.0);
        let wm = penning_magic_rotation(&lu).unwrap();
        for rho in [0.0, 1e-6, 1e-4, 3e-3] {
            assert!(penning_fractional_shift(&lu, wm, rho).unwrap().abs() <= 1e-30);
        }
        // half the magic rotation, ρ = 100 μm: −½(ω/c)²(1 − 1/4)ρ²
        let w = 0.5 * wm;
        let expected = -0.5 * (w / CONSTANTS.c).powi(2) * 0.75 * 1e-8;
        let direct = {
            let x = lu.mass * w * CONSTANTS.c / lu.charge;
            -0.5 * (w / CONSTANTS.c).powi(2) * (1.0 + lu.delta_alpha_static / lu.photon_energy() * x * x) * 1e-8
        };
        let got = penning_fractional_shift(&lu, w, 1e-4).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert_relative_eq!(got, direct, max_relative = 1e-12);
        assert!(penning_fractional_shift(&lu, w, -1.0).is_err());
    }

    #[test]
    fn penning_field() {
        let b = penning_min_field(1e14, au_to_si_polarisability(-100.0)).unwrap();
        assert!((b - 22.0).abs() / 22.0 < 0.05, "{b}");
        let b4 = penning_min_field(1e14, au_to_si_polarisability(-400.0)).unwrap();
        assert_relative_eq!(b4, b / 2.0, max_relative = 1e-14);
        assert!(penning_min_field(1e14, 0.0).is_err());
        let lu = lu176_species();
        let b_lu = penning_min_field(lu.clock_frequency, lu.delta_alpha_static).unwrap();
        let direct = (CONSTANTS.h * lu.clock_frequency / -lu.delta_alpha_static).sqrt() / CONSTANTS.c;
        assert_relative_eq!(b_lu, direct, max_relative = 1e-15);
        // the magic rotation equals the cyclotron frequency at B_min
        let wc = lu.charge * b_lu / lu.mass;
        assert_relative_eq!(wc, penning_magic_rotation(&lu).unwrap(), max_relative = 1e-12);
    }
}
