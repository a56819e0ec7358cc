//! Time-domain integration of the RF-driven motion for small crystals.
//!
//! Scaled equations of motion (time in units of 2/Ω, RF period π):
//!
//! ```text
//! r̈ᵢ = −(ε²Λ_s + 2εΛ_rf cos 2t) rᵢ + ε² (Σⱼ r_ij/|r_ij|³ + f)
//! ```
//!
//! with `f` an optional uniform static field in the same units as the
//! Coulomb term. The π-periodic orbit is located by Newton iteration on the
//! one-period map, then followed freely for `n_cycles` periods and projected
//! onto the harmonics 0, 2, 4, 6. Each step is a sixth-order Yoshida
//! composition of velocity Verlet.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::crystal::IonCrystal;
use crate::error::{Error, Result};
use crate::micromotion::{micromotion_amplitudes, AmplitudeOrder};
use crate::physics::{ClockSpecies, CONSTANTS};
use crate::trap::{characteristic_length, magic_rf_frequency, TrapConfig};

pub const MAX_ORACLE_IONS: usize = 16;
pub const MIN_STEPS_PER_CYCLE: usize = 200;
pub const MIN_CYCLES: usize = 64;

/// Yoshida sixth-order weights (solution A), outer to inner.
const YOSHIDA6: [f64; 4] = [0.784_513_610_477_560, 0.235_573_213_359_357, -1.177_679_984_178_87, 0.0];

fn yoshida_weights() -> [f64; 7] {
    let w0 = 1.0 - 2.0 * (YOSHIDA6[0] + YOSHIDA6[1] + YOSHIDA6[2]);
    [YOSHIDA6[0], YOSHIDA6[1], YOSHIDA6[2], w0, YOSHIDA6[2], YOSHIDA6[1], YOSHIDA6[0]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleParams {
    pub steps_per_cycle: usize,
    pub n_cycles: usize,
    /// Uniform static field f, scaled like the Coulomb term.
    pub static_field: Vector3<f64>,
    /// Newton stops when |P(x) − x| falls below this times the crystal size.
    pub newton_tolerance: f64,
    pub max_newton_iterations: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            steps_per_cycle: 400,
            n_cycles: MIN_CYCLES,
            static_field: Vector3::zeros(),
            newton_tolerance: 1e-13,
            max_newton_iterations: 30,
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_cycle < MIN_STEPS_PER_CYCLE {
            return Err(Error::Validation(format!("oracle needs at least {MIN_STEPS_PER_CYCLE} steps per RF cycle")));
        }
        if self.n_cycles < MIN_CYCLES {
            return Err(Error::Validation(format!("oracle needs at least {MIN_CYCLES} free cycles")));
        }
        if !(self.newton_tolerance > 0.0) || self.max_newton_iterations == 0 {
            return Err(Error::Validation("oracle Newton settings must be positive".into()));
        }
        Ok(())
    }
}

/// Steady π-periodic trajectory and its Fourier content.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub steps_per_cycle: usize,
    pub n_cycles: usize,
    pub epsilon: f64,
    /// positions[k][i]: ion i at t = k·π/steps_per_cycle over the free segment.
    pub positions: Vec<Vec<Vector3<f64>>>,
    pub r0: Vec<Vector3<f64>>,
    pub r2: Vec<Vector3<f64>>,
    pub r4: Vec<Vector3<f64>>,
    pub r6: Vec<Vector3<f64>>,
    /// Sample power outside harmonics 0–6 over total sample power.
    pub fourier_residual: f64,
    /// max |x(n_cycles·π) − x(0)| over positions and velocities.
    pub periodicity_defect: f64,
    /// Time averages of |ṙ|² and |r̈|² per ion, scaled.
    pub mean_v2: Vec<f64>,
    pub mean_a2: Vec<f64>,
    pub newton_iterations: usize,
}

struct System {
    eps: f64,
    lambda_s: Matrix3<f64>,
    lambda_rf: Matrix3<f64>,
    field: Vector3<f64>,
}

impl System {
    fn accel(&self, r: &[Vector3<f64>], t: f64, out: &mut [Vector3<f64>]) {
        let e2 = self.eps * self.eps;
        let k = self.lambda_s * e2 + self.lambda_rf * (2.0 * self.eps * (2.0 * t).cos());
        for i in 0..r.len() {
            let mut c = self.field;
            for j in 0..r.len() {
                if j != i {
                    let d = r[i] - r[j];
                    let r2 = d.norm_squared();
                    c += d / (r2 * r2.sqrt());
                }
            }
            out[i] = -(k * r[i]) + c * e2;
        }
    }

    /// One composed step of length h from time t.
    fn step(&self, r: &mut [Vector3<f64>], v: &mut [Vector3<f64>], t: &mut f64, h: f64, acc: &mut [Vector3<f64>]) {
        for w in yoshida_weights() {
            let dt = w * h;
            self.accel(r, *t, acc);
            for i in 0..r.len() {
                v[i] += acc[i] * (0.5 * dt);
                r[i] += v[i] * dt;
            }
            *t += dt;
            self.accel(r, *t, acc);
            for i in 0..r.len() {
                v[i] += acc[i] * (0.5 * dt);
            }
        }
    }

    /// Advances a packed state by one RF period starting at t = 0.
    fn period_map(&self, x: &DVector<f64>, steps: usize) -> DVector<f64> {
        let n = x.len() / 6;
        let (mut r, mut v) = unpack(x, n);
        let mut acc = vec![Vector3::zeros(); n];
        let h = PI / steps as f64;
        let mut t = 0.0;
        for k in 0..steps {
            self.step(&mut r, &mut v, &mut t, h, &mut acc);
            t = (k + 1) as f64 * h;
        }
        pack(&r, &v)
    }
}

fn pack(r: &[Vector3<f64>], v: &[Vector3<f64>]) -> DVector<f64> {
    let n = r.len();
    DVector::from_fn(6 * n, |k, _| if k < 3 * n { r[k / 3][k % 3] } else { v[(k - 3 * n) / 3][(k - 3 * n) % 3] })
}

fn unpack(x: &DVector<f64>, n: usize) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    let r = (0..n).map(|i| Vector3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2])).collect();
    let v = (0..n).map(|i| Vector3::new(x[3 * n + 3 * i], x[3 * n + 3 * i + 1], x[3 * n + 3 * i + 2])).collect();
    (r, v)
}

/// Finds the π-periodic orbit near `crystal` and records a free segment.
pub fn integrate_full_eom(crystal: &IonCrystal, trap: &TrapConfig, params: &OracleParams) -> Result<TrajectoryRecord> {
    params.validate()?;
    trap.validate()?;
    let n = crystal.n_ions();
    if n == 0 || n > MAX_ORACLE_IONS {
        return Err(Error::Validation(format!("oracle handles 1..={MAX_ORACLE_IONS} ions, got {n}")));
    }
    let lam = trap.lambda();
    let sys = System { eps: trap.epsilon(), lambda_s: lam.lambda_s, lambda_rf: lam.lambda_rf, field: params.static_field };
    let steps = params.steps_per_cycle;

    // Start from the first-order orbit r(0) = R₀ + 2R₂ + 2R₄, ṙ(0) = 0.
    let guess = IonCrystal { trap: *trap, ..crystal.clone() };
    let amps = micromotion_amplitudes(&guess, trap, AmplitudeOrder::First)?;
    let r_start: Vec<Vector3<f64>> = (0..n).map(|i| crystal.positions[i] + amps.r2[i] * 2.0 + amps.r4[i] * 2.0).collect();
    let mut x = pack(&r_start, &vec![Vector3::zeros(); n]);
    let size = crystal.positions.iter().map(|p| p.norm()).fold(1.0, f64::max);

    let dim = 6 * n;
    let mut iterations = 0;
    loop {
        let px = sys.period_map(&x, steps);
        let g = &px - &x;
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::Instability("period map produced non-finite values".into()));
        }
        if g.amax() < params.newton_tolerance * size {
            break;
        }
        if iterations >= params.max_newton_iterations {
            return Err(Error::Instability(format!(
                "no periodic orbit after {iterations} Newton iterations (defect {:e})",
                g.amax()
            )));
        }
        let h = 1e-7 * size;
        let mut jac = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let mut xk = x.clone();
            xk[k] += h;
            let col = (sys.period_map(&xk, steps) - &px) / h;
            jac.set_column(k, &col);
            jac[(k, k)] -= 1.0;
        }
        let svd = jac.svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max();
        let dx = svd.solve(&(-&g), cutoff).map_err(|e| Error::Instability(format!("Newton solve failed: {e}")))?;
        x += dx;
        iterations += 1;
        if x.amax() > 1e3 * size {
            return Err(Error::Instability("Newton iteration diverged".into()));
        }
    }

    // Free segment.
    let total = steps * params.n_cycles;
    let h = PI / steps as f64;
    let (mut r, mut v) = unpack(&x, n);
    let mut acc = vec![Vector3::zeros(); n];
    let mut positions = Vec::with_capacity(total);
    let mut sums = [vec![Vector3::zeros(); n], vec![Vector3::zeros(); n], vec![Vector3::zeros(); n], vec![Vector3::zeros(); n]];
    let mut mean_v2 = vec![0.0; n];
    let mut mean_a2 = vec![0.0; n];
    let mut t = 0.0;
    for k in 0..total {
        let tk = k as f64 * h;
        sys.accel(&r, tk, &mut acc);
        for i in 0..n {
            for (m, s) in sums.iter_mut().enumerate() {
                s[i] += r[i] * (2.0 * m as f64 * tk).cos();
            }
            mean_v2[i] += v[i].norm_squared();
            mean_a2[i] += acc[i].norm_squared();
        }
        positions.push(r.clone());
        sys.step(&mut r, &mut v, &mut t, h, &mut acc);
        t = (k + 1) as f64 * h;
        if r.iter().any(|p| !p.iter().all(|c| c.is_finite()) || p.norm() > 100.0 * size) {
            return Err(Error::Instability(format!("trajectory left the trap after {} cycles", k / steps)));
        }
    }
    let periodicity_defect = (pack(&r, &v) - &x).amax();
    if periodicity_defect > 1e-3 * size {
        return Err(Error::Instability(format!("orbit drifted by {periodicity_defect:e} over the free segment")));
    }
    let norm = total as f64;
    let [s0, s2, s4, s6] = sums;
    let r0: Vec<Vector3<f64>> = s0.into_iter().map(|s| s / norm).collect();
    // cos projection returns half the real amplitude of e^{±i2nt}.
    let r2: Vec<Vector3<f64>> = s2.into_iter().map(|s| s / norm).collect();
    let r4: Vec<Vector3<f64>> = s4.into_iter().map(|s| s / norm).collect();
    let r6: Vec<Vector3<f64>> = s6.into_iter().map(|s| s / norm).collect();
    for i in 0..n {
        mean_v2[i] /= norm;
        mean_a2[i] /= norm;
    }

    let (mut resid, mut power) = (0.0, 0.0);
    for (k, snap) in positions.iter().enumerate() {
        let tk = k as f64 * h;
        for i in 0..n {
            let recon = r0[i] + r2[i] * (2.0 * (2.0 * tk).cos()) + r4[i] * (2.0 * (4.0 * tk).cos()) + r6[i] * (2.0 * (6.0 * tk).cos());
            resid += (snap[i] - recon).norm_squared();
            power += snap[i].norm_squared();
        }
    }
    let fourier_residual = if power > 0.0 { resid / power } else { 0.0 };

    Ok(TrajectoryRecord {
        steps_per_cycle: steps,
        n_cycles: params.n_cycles,
        epsilon: sys.eps,
        positions,
        r0,
        r2,
        r4,
        r6,
        fourier_residual,
        periodicity_defect,
        mean_v2,
        mean_a2,
        newton_iterations: iterations,
    })
}

/// Fractional shifts measured on the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleShift {
    /// −⟨v²⟩/2c².
    pub time_dilation: Vec<f64>,
    /// −Δα⟨E²⟩/2hν with E = m r̈/q.
    pub stark: Vec<f64>,
    pub total: Vec<f64>,
}

/// Time-dilation and Stark shifts from the sampled motion. Every force in
/// the scaled equations is electric, so the field is m·a/q exactly.
pub fn oracle_time_dilation(traj: &TrajectoryRecord, species: &ClockSpecies, trap: &TrapConfig) -> Result<OracleShift> {
    let l = characteristic_length(species, trap.omega_z)?;
    let c = CONSTANTS.c;
    let v_scale = l * trap.omega_rf / 2.0;
    let a_scale = l * trap.omega_rf * trap.omega_rf / 4.0;
    let stark_coef = -species.delta_alpha_static / (2.0 * species.photon_energy()) * (species.mass / species.charge).powi(2);
    let time_dilation: Vec<f64> = traj.mean_v2.iter().map(|v2| -v2 * v_scale * v_scale / (2.0 * c * c)).collect();
    let stark: Vec<f64> = traj.mean_a2.iter().map(|a2| stark_coef * a2 * a_scale * a_scale).collect();
    let total = time_dilation.iter().zip(&stark).map(|(a, b)| a + b).collect();
    Ok(OracleShift { time_dilation, stark, total })
}

/// Oracle-versus-perturbation comparison for one crystal.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OracleReport {
    pub n_ions: usize,
    pub epsilon: f64,
    pub omega_ratio: f64,
    /// max over ions of |R₂(oracle) − R₂(formula)| / max|R₀|.
    pub r2_error_first_order: f64,
    pub r2_error_second_order: f64,
    pub r4_error: f64,
    pub fourier_residual: f64,
    pub newton_iterations: usize,
    pub oracle_total_shift: Vec<f64>,
    pub formula_total_shift: Vec<f64>,
    /// max |oracle − formula| / ((aω_z l/2c)² max(1, max R₀ᵀΛ²R₀)).
    pub shift_error_scaled: f64,
}

/// Evaluates the perturbative amplitudes and the linear-trap shift on the
/// oracle's own R₀ and compares them with the trajectory.
pub fn compare_with_perturbation(traj: &TrajectoryRecord, species: &ClockSpecies, trap: &TrapConfig) -> Result<OracleReport> {
    let crystal = IonCrystal {
        positions: traj.r0.clone(),
        seed_family: crate::crystal::SeedFamily::External,
        rng_seed: 0,
        residual: 0.0,
        trap: *trap,
    };
    let first = micromotion_amplitudes(&crystal, trap, AmplitudeOrder::First)?;
    let second = micromotion_amplitudes(&crystal, trap, AmplitudeOrder::Second)?;
    let scale = traj.r0.iter().map(|p| p.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let max_err = |a: &[Vector3<f64>], b: &[Vector3<f64>]| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale;
    let oracle = oracle_time_dilation(traj, species, trap)?;
    let formula = crate::micromotion::full_shift_linear_trap(&crystal, species, trap)?.per_ion;
    let pref = trap.a * trap.a * crate::micromotion::shift_prefactor(species, trap)?;
    let lam = trap.lambda().lambda_unit;
    let moment = traj.r0.iter().map(|r| (lam * r).norm_squared()).fold(1.0, f64::max);
    let shift_error_scaled = oracle.total.iter().zip(&formula).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / (pref * moment);
    Ok(OracleReport {
        n_ions: traj.r0.len(),
        epsilon: traj.epsilon,
        omega_ratio: trap.omega_rf / magic_rf_frequency(species)?,
        r2_error_first_order: max_err(&traj.r2, &first.r2),
        r2_error_second_order: max_err(&traj.r2, &second.r2),
        r4_error: max_err(&traj.r4, &second.r4),
        fourier_residual: traj.fourier_residual,
        newton_iterations: traj.newton_iterations,
        oracle_total_shift: oracle.total,
        formula_total_shift: formula,
        shift_error_scaled,
    })
}
