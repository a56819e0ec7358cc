//! Micromotion amplitudes, the space-charge RF field W₀ and the fractional
//! frequency shifts they cause.
//!
//! Positions are scaled (units of `l`); shifts are fractional (Δν/ν). The
//! ratio Ω/Ω₀ is recomputed from the species and trap on every call.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crystal::IonCrystal;
use crate::distribution::ShiftDistribution;
use crate::error::{Error, Result};
use crate::physics::{ClockSpecies, CONSTANTS};
use crate::special::bessel_j0;
use crate::trap::{characteristic_length, corrected_magic_factors, magic_rf_frequency, TrapConfig};

const COINCIDENT: f64 = 1e-12;

/// F = d/|d|³ and Q = −(3ddᵀ − |d|²I)/|d|⁵ for a separation d = Rᵢ − Rⱼ.
pub fn pair_kernels(d: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let r2 = d.norm_squared();
    let r = r2.sqrt();
    let inv3 = 1.0 / (r2 * r);
    let inv5 = inv3 / r2;
    let q = -(3.0 * d * d.transpose() - Matrix3::identity() * r2) * inv5;
    (d * inv3, q)
}

pub fn coulomb_pair_kernels(crystal: &IonCrystal, i: usize, j: usize) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let n = crystal.n_ions();
    if i >= n || j >= n {
        return Err(Error::Validation(format!("ion index out of range ({i}, {j}) for {n} ions")));
    }
    if i == j {
        return Err(Error::Validation("pair kernels need two distinct ions".into()));
    }
    let d = crystal.positions[i] - crystal.positions[j];
    if d.norm() < COINCIDENT {
        return Err(Error::Singularity(i.min(j), i.max(j)));
    }
    Ok(pair_kernels(&d))
}

/// Applies `f(i, j, d, Q_ij)` over every partner `j` of every ion `i` and
/// collects one value per ion. Each ion's sum runs over `j` in index order.
pub(crate) fn per_ion_pair_sum<T, F>(crystal: &IonCrystal, zero: T, f: F) -> Result<Vec<T>>
where
    T: Send + Sync + Clone + std::ops::AddAssign,
    F: Fn(usize, usize, &Vector3<f64>, &Matrix3<f64>) -> T + Sync,
{
    let pos = &crystal.positions;
    (0..pos.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = zero.clone();
            for (j, pj) in pos.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d = pos[i] - pj;
                if d.norm() < COINCIDENT {
                    return Err(Error::Singularity(i.min(j), i.max(j)));
                }
                let (_, q) = pair_kernels(&d);
                acc += f(i, j, &d, &q);
            }
            Ok(acc)
        })
        .collect()
}

/// W₀ᵢ = Σⱼ Q_ij Λ_rf (R₀ᵢ − R₀ⱼ).
pub fn space_charge_w(crystal: &IonCrystal) -> Result<Vec<Vector3<f64>>> {
    let lrf = crystal.trap.lambda().lambda_rf;
    per_ion_pair_sum(crystal, Vector3::zeros(), |_, _, d, q| q * (lrf * d))
}

/// Continuum approximation W₀ᵢ ≈ −(1/5)Λ_rf R₀ᵢ for a uniform sphere.
pub fn continuum_w(crystal: &IonCrystal) -> Vec<Vector3<f64>> {
    let lrf = crystal.trap.lambda().lambda_rf;
    crystal.positions.iter().map(|r| -(lrf * r) / 5.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeOrder {
    First,
    Second,
}

/// Fourier amplitudes of the π-periodic motion, scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierAmplitudes {
    pub r2: Vec<Vector3<f64>>,
    pub r4: Vec<Vector3<f64>>,
    pub order: AmplitudeOrder,
}

/// Scaled positions depend on (a, δ) only, so a crystal may be evaluated at
/// any ω_z or Ω but not in a different trap geometry.
fn check_geometry(crystal: &IonCrystal, trap: &TrapConfig) -> Result<()> {
    trap.validate()?;
    if (crystal.trap.a - trap.a).abs() > 1e-12 || (crystal.trap.delta - trap.delta).abs() > 1e-12 {
        return Err(Error::Validation(format!(
            "crystal was solved for a = {}, delta = {} but the trap has a = {}, delta = {}",
            crystal.trap.a, crystal.trap.delta, trap.a, trap.delta
        )));
    }
    Ok(())
}

/// R₂ and R₄ at first order (R₂ = (ε/4)Λ_rf R₀), or with the ε² diagonal
/// correction and the −(ε³/16)W₀ coupling at second order. R₄ = (ε/16)Λ_rf R₂
/// in both cases.
pub fn micromotion_amplitudes(crystal: &IonCrystal, trap: &TrapConfig, order: AmplitudeOrder) -> Result<FourierAmplitudes> {
    check_geometry(crystal, trap)?;
    let w = match order {
        AmplitudeOrder::First => None,
        AmplitudeOrder::Second => Some(space_charge_w(crystal)?),
    };
    Ok(amplitudes_with_w(crystal, trap, order, w.as_deref()))
}

fn amplitudes_with_w(
    crystal: &IonCrystal,
    trap: &TrapConfig,
    order: AmplitudeOrder,
    w: Option<&[Vector3<f64>]>,
) -> FourierAmplitudes {
    let eps = trap.epsilon();
    let lam = trap.lambda();
    let lrf = lam.lambda_rf;
    let first = |r: &Vector3<f64>| lrf * r * (eps / 4.0);
    let r2: Vec<Vector3<f64>> = match (order, w) {
        (AmplitudeOrder::Second, Some(w)) => {
            let corr = Matrix3::identity() + (lam.lambda_s + lrf * lrf / 16.0) * (eps * eps / 4.0);
            crystal.positions.iter().zip(w).map(|(r, wi)| corr * first(r) - wi * (eps.powi(3) / 16.0)).collect()
        }
        _ => crystal.positions.iter().map(first).collect(),
    };
    let r4 = r2.iter().map(|a| lrf * a * (eps / 16.0)).collect();
    FourierAmplitudes { r2, r4, order }
}

/// (ω_z l / 2c)².
pub fn shift_prefactor(species: &ClockSpecies, trap: &TrapConfig) -> Result<f64> {
    let l = characteristic_length(species, trap.omega_z)?;
    Ok((trap.omega_z * l / (2.0 * CONSTANTS.c)).powi(2))
}

/// (Ω/Ω₀)².
pub fn drive_ratio_sq(species: &ClockSpecies, trap: &TrapConfig) -> Result<f64> {
    Ok((trap.omega_rf / magic_rf_frequency(species)?).powi(2))
}

/// Δν/ν = −(ω_z l/2c)²[1 − (Ω/Ω₀)²] R₀ᵀΛ_rf²R₀.
pub fn lowest_order_shift(crystal: &IonCrystal, species: &ClockSpecies, trap: &TrapConfig) -> Result<ShiftDistribution> {
    check_geometry(crystal, trap)?;
    let pref = shift_prefactor(species, trap)?;
    let bracket = 1.0 - drive_ratio_sq(species, trap)?;
    let lrf = trap.lambda().lambda_rf;
    let per_ion = crystal
        .positions
        .iter()
        .map(|r| {
            let v = lrf * r;
            -pref * bracket * v.dot(&v)
        })
        .collect();
    Ok(ShiftDistribution::new("micromotion (lowest order)", "fractional", per_ion))
}

/// Per-ion contributions of the three terms of the linear-trap shift, each
/// already multiplied by −(aω_z l/2c)².
#[derive(Debug, Clone, PartialEq)]
pub struct FullShiftTerms {
    /// [λ₀ − (Ω/Ω₀)²]λ₁.
    pub bracket: f64,
    /// (aω_z l/2c)².
    pub prefactor: f64,
    pub lambda_term: Vec<f64>,
    pub delta_term: Vec<f64>,
    pub w_term: Vec<f64>,
}

impl FullShiftTerms {
    pub fn total(&self) -> Vec<f64> {
        (0..self.lambda_term.len()).map(|i| self.lambda_term[i] + self.delta_term[i] + self.w_term[i]).collect()
    }
}

/// Linear-trap shift terms with a caller-supplied W₀ (exact or continuum).
pub fn full_shift_terms(
    crystal: &IonCrystal,
    species: &ClockSpecies,
    trap: &TrapConfig,
    w: &[Vector3<f64>],
) -> Result<FullShiftTerms> {
    check_geometry(crystal, trap)?;
    if w.len() != crystal.n_ions() {
        return Err(Error::Validation(format!("{} W vectors for {} ions", w.len(), crystal.n_ions())));
    }
    let eps = trap.epsilon();
    let e2 = eps * eps;
    let a = trap.a;
    let prefactor = a * a * shift_prefactor(species, trap)?;
    let ratio = drive_ratio_sq(species, trap)?;
    let f = corrected_magic_factors(eps, a);
    let bracket = (f.lambda0 - ratio) * f.lambda1;
    let lam = trap.lambda().lambda_unit;
    let n = crystal.n_ions();
    let (mut lambda_term, mut delta_term, mut w_term) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (r, wi) in crystal.positions.iter().zip(w) {
        let lr = lam * r;
        lambda_term.push(-prefactor * bracket * lr.dot(&lr));
        delta_term.push(-prefactor * trap.delta * e2 / 2.0 * r.dot(&lr));
        w_term.push(prefactor * e2 / (2.0 * a) * (1.0 - ratio) * lr.dot(wi));
    }
    Ok(FullShiftTerms { bracket, prefactor, lambda_term, delta_term, w_term })
}

/// Linear-trap shift with the exact pairwise W₀.
pub fn full_shift_linear_trap(crystal: &IonCrystal, species: &ClockSpecies, trap: &TrapConfig) -> Result<ShiftDistribution> {
    check_geometry(crystal, trap)?;
    let w = space_charge_w(crystal)?;
    let terms = full_shift_terms(crystal, species, trap, &w)?;
    Ok(ShiftDistribution::new("micromotion (linear trap)", "fractional", terms.total()))
}

/// Spherical-trap shift −(aω_z l/2c)²[λ₀′ − (Ω/Ω₀)²]λ₁′ R₀ᵀΛ²R₀.
pub fn spherical_shift(crystal: &IonCrystal, species: &ClockSpecies, trap: &TrapConfig) -> Result<ShiftDistribution> {
    if !trap.is_spherical() {
        return Err(Error::Precondition(format!(
            "spherical shift needs a = sqrt(3) and delta = 0, got a = {}, delta = {}",
            trap.a, trap.delta
        )));
    }
    check_geometry(crystal, trap)?;
    let eps = trap.epsilon();
    let a = trap.a;
    let prefactor = a * a * shift_prefactor(species, trap)?;
    let f = corrected_magic_factors(eps, a);
    let bracket = (f.lambda0_spherical - drive_ratio_sq(species, trap)?) * f.lambda1_spherical;
    let lam = trap.lambda().lambda_unit;
    let per_ion = crystal
        .positions
        .iter()
        .map(|r| {
            let lr = lam * r;
            -prefactor * bracket * lr.dot(&lr)
        })
        .collect();
    Ok(ShiftDistribution::new("micromotion (spherical)", "fractional", per_ion))
}

/// Per-ion micromotion shift: the spherical form for spherical traps, the
/// full linear-trap form otherwise.
pub fn micromotion_shift_distribution(crystal: &IonCrystal, species: &ClockSpecies, trap: &TrapConfig) -> Result<ShiftDistribution> {
    if trap.is_spherical() {
        spherical_shift(crystal, species, trap)
    } else {
        full_shift_linear_trap(crystal, species, trap)
    }
}

/// Mean of [`micromotion_shift_distribution`], used for magic-frequency work.
pub fn mean_micromotion_shift(crystal: &IonCrystal, species: &ClockSpecies, trap: &TrapConfig) -> Result<f64> {
    Ok(micromotion_shift_distribution(crystal, species, trap)?.mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationIndex {
    pub beta: Vec<f64>,
    /// J₀(β) per ion.
    pub reduction: Vec<f64>,
}

/// βᵢ = 2l k·R₂ᵢ for a probe wavevector `k` in rad/m.
pub fn modulation_index(
    crystal: &IonCrystal,
    probe_wavevector: &Vector3<f64>,
    species: &ClockSpecies,
    trap: &TrapConfig,
    order: AmplitudeOrder,
) -> Result<ModulationIndex> {
    let amps = micromotion_amplitudes(crystal, trap, order)?;
    let l = characteristic_length(species, trap.omega_z)?;
    let beta: Vec<f64> = amps.r2.iter().map(|r2| 2.0 * l * probe_wavevector.dot(r2)).collect();
    let reduction = beta.iter().map(|&b| bessel_j0(b)).collect();
    Ok(ModulationIndex { beta, reduction })
}

/// Result of scanning the drive frequency over several crystal sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagicScan {
    pub n_values: Vec<usize>,
    /// Drive frequencies, rad/s.
    pub omega: Vec<f64>,
    /// mean_shift[k][m]: mean shift at omega[k] for crystal m.
    pub mean_shift: Vec<Vec<f64>>,
    /// Least-squares slope of mean shift against N^{2/3} at each Ω.
    pub slope: Vec<f64>,
    /// Ω where the slope changes sign (linear interpolation), rad/s.
    pub zero_crossing: f64,
}

/// Scans Ω over `grid` (rad/s) and locates where the slope of mean shift
/// versus N^{2/3} crosses zero.
pub fn magic_scan(crystals: &[IonCrystal], species: &ClockSpecies, trap: &TrapConfig, grid: &[f64]) -> Result<MagicScan> {
    let n_values: Vec<usize> = crystals.iter().map(|c| c.n_ions()).collect();
    let mut distinct = n_values.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Validation("magic scan needs crystals of at least two distinct sizes".into()));
    }
    if grid.len() < 2 {
        return Err(Error::Validation("magic scan needs at least two drive frequencies".into()));
    }
    let x: Vec<f64> = n_values.iter().map(|&n| (n as f64).powf(2.0 / 3.0)).collect();
    let xm = x.iter().sum::<f64>() / x.len() as f64;
    let sxx: f64 = x.iter().map(|v| (v - xm) * (v - xm)).sum();

    let mut mean_shift = Vec::with_capacity(grid.len());
    let mut slope = Vec::with_capacity(grid.len());
    for &omega in grid {
        let t = trap.with_drive(omega)?;
        let means = crystals.iter().map(|c| mean_micromotion_shift(c, species, &t)).collect::<Result<Vec<f64>>>()?;
        let ym = means.iter().sum::<f64>() / means.len() as f64;
        slope.push(x.iter().zip(&means).map(|(xi, yi)| (xi - xm) * (yi - ym)).sum::<f64>() / sxx);
        mean_shift.push(means);
    }
    let mut zero = None;
    for k in 0..grid.len() - 1 {
        let (s0, s1) = (slope[k], slope[k + 1]);
        if s0 == 0.0 {
            zero = Some(grid[k]);
            break;
        }
        if s0 * s1 < 0.0 {
            zero = Some(grid[k] + (grid[k + 1] - grid[k]) * s0 / (s0 - s1));
            break;
        }
    }
    if zero.is_none() && slope[grid.len() - 1] == 0.0 {
        zero = Some(grid[grid.len() - 1]);
    }
    let zero_crossing = zero.ok_or_else(|| {
        Error::Range(format!(
            "no sign change of the N^(2/3) slope between {:e} and {:e} rad/s",
            grid[0],
            grid[grid.len() - 1]
        ))
    })?;
    Ok(MagicScan { n_values, omega: grid.to_vec(), mean_shift, slope, zero_crossing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{crystal_moment, solve_crystal, SeedFamily, SolverParams};
    use crate::physics::lu176_species;
    use crate::trap::{corrected_magic_frequency, MagicCorrection, SPHERICAL_A};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    const WZ: f64 = 2.0 * PI * 200e3;

    fn lu() -> ClockSpecies {
        lu176_species()
    }

    fn trap_at(omega: f64) -> TrapConfig {
        TrapConfig::spherical(WZ, omega).unwrap()
    }

    fn magic_trap() -> TrapConfig {
        trap_at(magic_rf_frequency(&lu()).unwrap())
    }

    fn manual(positions: Vec<Vector3<f64>>, trap: TrapConfig) -> IonCrystal {
        IonCrystal { positions, seed_family: SeedFamily::External, rng_seed: 0, residual: 0.0, trap }
    }

    fn solved(n: usize) -> &'static IonCrystal {
        static CACHE: OnceLock<std::sync::Mutex<Vec<(usize, &'static IonCrystal)>>> = OnceLock::new();
        let m = CACHE.get_or_init(Default::default);
        let mut g = m.lock().unwrap();
        if let Some((_, c)) = g.iter().find(|(k, _)| *k == n) {
            return c;
        }
        let c = Box::leak(Box::new(solve_crystal(n, SeedFamily::Icosahedral, 1, &magic_trap(), &SolverParams::default()).unwrap()));
        g.push((n, c));
        c
    }

    fn two_ion() -> IonCrystal {
        let h = 2f64.cbrt() / 2.0;
        manual(vec![Vector3::new(0.0, 0.0, h), Vector3::new(0.0, 0.0, -h)], magic_trap())
    }

    #[test]
    fn kernel_on_axis_and_symmetry() {
        let d = 1.7;
        let (f, q) = pair_kernels(&Vector3::new(0.0, 0.0, d));
        assert_relative_eq!(f, Vector3::new(0.0, 0.0, 1.0 / (d * d)), epsilon = 1e-15);
        assert_relative_eq!(q, Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -2.0)) / d.powi(3), epsilon = 1e-15);
        let c = manual(vec![Vector3::new(0.3, -0.2, 0.9), Vector3::new(-1.1, 0.4, 0.2)], magic_trap());
        let (fij, qij) = coulomb_pair_kernels(&c, 0, 1).unwrap();
        let (fji, qji) = coulomb_pair_kernels(&c, 1, 0).unwrap();
        assert_relative_eq!(fij, -fji);
        assert_relative_eq!(qij, qji);
        assert!(qij.trace().abs() < 1e-14);
    }

    #[test]
    fn kernel_errors() {
        let c = manual(vec![Vector3::new(1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)], magic_trap());
        assert!(matches!(coulomb_pair_kernels(&c, 0, 1), Err(Error::Singularity(0, 1))));
        assert!(matches!(space_charge_w(&c), Err(Error::Singularity(0, 1))));
        assert!(coulomb_pair_kernels(&c, 0, 0).is_err());
    }

    #[test]
    fn w_single_ion_and_pair() {
        let one = manual(vec![Vector3::new(0.4, 0.1, 0.0)], magic_trap());
        assert_eq!(space_charge_w(&one).unwrap(), vec![Vector3::zeros()]);
        // Pair along z: Λ_rf(R_i − R_j) has no z part, so W = 0.
        let w = space_charge_w(&two_ion()).unwrap();
        assert!(w[0].norm() < 1e-15);
        // Pair along x with separation d: Q = diag(−2, 1, 1)/d³,
        // Λ_rf d x̂ = a d x̂ ⇒ W₀ = −2a/d² x̂ for ion 0.
        let d = 2f64.cbrt();
        let c = manual(vec![Vector3::new(d / 2.0, 0.0, 0.0), Vector3::new(-d / 2.0, 0.0, 0.0)], magic_trap());
        let w = space_charge_w(&c).unwrap();
        assert_relative_eq!(w[0], Vector3::new(-2.0 * SPHERICAL_A / (d * d), 0.0, 0.0), epsilon = 1e-14);
        assert_relative_eq!(w[1], -w[0], epsilon = 1e-14);
    }

    #[test]
    fn first_and_second_order_amplitudes() {
        let eps = magic_trap().epsilon();
        let d = 2f64.cbrt();
        let c = manual(vec![Vector3::new(d / 2.0, 0.0, 0.0), Vector3::new(-d / 2.0, 0.0, 0.0)], magic_trap());
        let a1 = micromotion_amplitudes(&c, &magic_trap(), AmplitudeOrder::First).unwrap();
        assert_relative_eq!(a1.r2[0], Vector3::new(eps / 4.0 * SPHERICAL_A * d / 2.0, 0.0, 0.0), epsilon = 1e-18);
        assert_relative_eq!(a1.r4[0], Vector3::new(eps / 16.0 * SPHERICAL_A * a1.r2[0].x, 0.0, 0.0), epsilon = 1e-20);
        // Hand evaluation along x: Λ_s,xx = −1/2, Λ_rf,xx² = 3.
        let a = SPHERICAL_A;
        let diag = 1.0 + eps * eps / 4.0 * (-0.5 + 3.0 / 16.0);
        let w0 = -2.0 * a / (d * d);
        let expect = diag * eps / 4.0 * a * d / 2.0 - eps.powi(3) / 16.0 * w0;
        let a2 = micromotion_amplitudes(&c, &magic_trap(), AmplitudeOrder::Second).unwrap();
        assert_relative_eq!(a2.r2[0].x, expect, max_relative = 1e-14);
        assert!((a2.r2[0] - a1.r2[0]).norm() < eps.powi(3) * d);
        // On the z axis the RF field is null.
        let z = micromotion_amplitudes(&two_ion(), &magic_trap(), AmplitudeOrder::First).unwrap();
        assert_eq!(z.r2[0], Vector3::zeros());
    }

    #[test]
    fn lowest_order_prefactor_and_zero_at_magic() {
        let pref = SPHERICAL_A.powi(2) * shift_prefactor(&lu(), &magic_trap()).unwrap();
        assert_relative_eq!(pref, 8.3e-16, max_relative = 0.02);
        let c = manual(vec![Vector3::new(1.0, 2.0, 0.5), Vector3::zeros()], magic_trap());
        let d = lowest_order_shift(&c, &lu(), &magic_trap()).unwrap();
        assert!(d.per_ion.iter().all(|&s| s.abs() < 1e-30));
        let off = lowest_order_shift(&c, &lu(), &trap_at(1.1 * magic_rf_frequency(&lu()).unwrap())).unwrap();
        assert_eq!(off.per_ion[1], 0.0);
        assert!(off.per_ion[0] > 0.0);
    }

    #[test]
    fn geometry_mismatch_is_rejected() {
        let c = two_ion();
        let other = TrapConfig::new(WZ, magic_trap().omega_rf, 1.2, 0.1).unwrap();
        assert!(matches!(full_shift_linear_trap(&c, &lu(), &other), Err(Error::Validation(_))));
        assert!(matches!(spherical_shift(&c, &lu(), &other), Err(Error::Precondition(_))));
    }

    #[test]
    fn full_shift_terms_by_hand() {
        // Single ion displaced in a non-spherical trap: W = 0, only λ and δ terms.
        let omega = 1.02 * magic_rf_frequency(&lu()).unwrap();
        let trap = TrapConfig::new(WZ, omega, 1.4, 0.15).unwrap();
        let r = Vector3::new(0.3, -0.2, 0.7);
        let c = manual(vec![r], trap);
        let t = full_shift_terms(&c, &lu(), &trap, &[Vector3::zeros()]).unwrap();
        let eps = trap.epsilon();
        let f = corrected_magic_factors(eps, 1.4);
        let ratio = (omega / magic_rf_frequency(&lu()).unwrap()).powi(2);
        let pref = 1.4f64.powi(2) * shift_prefactor(&lu(), &trap).unwrap();
        let l2 = 0.3f64.powi(2) + 0.2f64.powi(2);
        assert_relative_eq!(t.lambda_term[0], -pref * (f.lambda0 - ratio) * f.lambda1 * l2, max_relative = 1e-13);
        let lr = 0.3f64.powi(2) - 0.2f64.powi(2);
        assert_relative_eq!(t.delta_term[0], -pref * 0.15 * eps * eps / 2.0 * lr, max_relative = 1e-13);
        assert_eq!(t.w_term[0], 0.0);
    }

    #[test]
    fn full_shift_reduces_to_lowest_order_as_epsilon_vanishes() {
        let c = solved(40);
        let omega0 = magic_rf_frequency(&lu()).unwrap();
        for scale in [1.0, 4.0] {
            let wz = WZ / scale;
            let t = TrapConfig::spherical(wz, 1.05 * omega0).unwrap();
            let full = full_shift_linear_trap(c, &lu(), &t).unwrap();
            let low = lowest_order_shift(c, &lu(), &t).unwrap();
            let eps = t.epsilon();
            // Relative difference is O(ε²) with an O(10) coefficient near Ω₀.
            assert!(((full.mean - low.mean) / low.mean).abs() < 100.0 * eps * eps, "{scale}");
        }
    }

    #[test]
    fn spherical_shift_zero_at_corrected_magic() {
        let c = solved(40);
        let omega = corrected_magic_frequency(&lu(), WZ, SPHERICAL_A, MagicCorrection::Spherical).unwrap();
        let d = spherical_shift(c, &lu(), &trap_at(omega)).unwrap();
        let at_omega0 = spherical_shift(c, &lu(), &magic_trap()).unwrap();
        assert!(d.per_ion.iter().all(|s| s.abs() <= 1e-9 * at_omega0.mean.abs()));
    }

    #[test]
    fn bulk_w_matches_continuum() {
        // Nearest neighbours give each ion an O(1) scatter; the continuum
        // form holds for the interior-averaged response W ≈ s·Λ_rf R.
        let c = solved(500);
        let w = space_charge_w(c).unwrap();
        let radius = crate::crystal::crystal_radius(c);
        let lrf = c.trap.lambda().lambda_rf;
        let (mut num, mut den, mut count) = (0.0, 0.0, 0);
        for (r, wi) in c.positions.iter().zip(&w) {
            if r.norm() < 0.7 * radius {
                let x = lrf * r;
                num += wi.dot(&x);
                den += x.norm_squared();
                count += 1;
            }
        }
        assert!(count > 100);
        let slope = num / den;
        assert!((slope + 0.2).abs() < 0.15 * 0.2, "slope {slope}");
        let wc = continuum_w(c);
        assert_relative_eq!(wc[7], lrf * c.positions[7] * -0.2, epsilon = 1e-15);
    }

    #[test]
    fn continuum_substitution_within_order_bound() {
        let c = solved(500);
        let t = magic_trap();
        let exact = full_shift_terms(c, &lu(), &t, &space_charge_w(c).unwrap()).unwrap();
        let cont = full_shift_terms(c, &lu(), &t, &continuum_w(c)).unwrap();
        let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let eps = t.epsilon();
        let diff = (m(&exact.total()) - m(&cont.total())).abs();
        assert!(diff < eps.powi(4) * exact.prefactor * crystal_moment(c, &t.lambda().lambda_unit) * 10.0);
    }

    #[test]
    fn mean_over_moment_is_size_independent() {
        let omega = 1.01 * magic_rf_frequency(&lu()).unwrap();
        let t = trap_at(omega);
        let ratio: Vec<f64> = [100, 300]
            .iter()
            .map(|&n| {
                let c = solved(n);
                spherical_shift(c, &lu(), &t).unwrap().mean / crystal_moment(c, &t.lambda().lambda_unit)
            })
            .collect();
        assert_relative_eq!(ratio[0], ratio[1], max_relative = 0.02);
    }

    #[test]
    fn argmin_of_mean_at_corrected_magic() {
        let c = solved(100);
        let target = corrected_magic_frequency(&lu(), WZ, SPHERICAL_A, MagicCorrection::Spherical).unwrap();
        let (best, _) = crate::special::golden_section_minimize(
            |w| spherical_shift(c, &lu(), &trap_at(w)).unwrap().mean.abs(),
            0.95 * target,
            1.05 * target,
            1e-9,
        )
        .unwrap();
        assert!(((best - target) / target).abs() < 1e-3);
    }

    #[test]
    fn magic_scan_crossing_and_range_error() {
        let crystals = vec![solved(40).clone(), solved(100).clone()];
        let target = corrected_magic_frequency(&lu(), WZ, SPHERICAL_A, MagicCorrection::Spherical).unwrap();
        let grid: Vec<f64> = (0..21).map(|k| target * (0.999 + 1e-4 * k as f64)).collect();
        let scan = magic_scan(&crystals, &lu(), &trap_at(target), &grid).unwrap();
        assert!(((scan.zero_crossing - target) / target).abs() < 1e-4);
        let above: Vec<f64> = grid.iter().map(|g| g * 1.01).collect();
        assert!(matches!(magic_scan(&crystals, &lu(), &trap_at(target), &above), Err(Error::Range(_))));
        assert!(matches!(magic_scan(&crystals[..1], &lu(), &trap_at(target), &grid), Err(Error::Validation(_))));
    }

    #[test]
    fn modulation_along_axis_is_zero() {
        let c = solved(40);
        let k = Vector3::new(0.0, 0.0, 2.0 * PI / 848e-9);
        let m = modulation_index(c, &k, &lu(), &magic_trap(), AmplitudeOrder::First).unwrap();
        assert!(m.beta.iter().all(|&b| b == 0.0));
        assert!(m.reduction.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn modulation_small_beta_expansion() {
        let c = manual(vec![Vector3::new(3.0, 1.0, 0.0)], magic_trap());
        let k = Vector3::new(1e4, 0.0, 0.0);
        let m = modulation_index(&c, &k, &lu(), &magic_trap(), AmplitudeOrder::First).unwrap();
        let l = characteristic_length(&lu(), WZ).unwrap();
        let beta = 2.0 * l * 1e4 * magic_trap().epsilon() / 4.0 * SPHERICAL_A * 3.0;
        assert_relative_eq!(m.beta[0], beta, max_relative = 1e-14);
        assert_relative_eq!(1.0 - m.reduction[0], beta * beta / 4.0, max_relative = beta * beta);
    }
}
