use nalgebra::Vector3;

use super::force::ForceField;
use super::{IonCrystal, SeedFamily, SolverParams};
use crate::error::{Error, Result};
use crate::trap::TrapConfig;

/// Per-step record of an annealing run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnealLog {
    /// Total (kinetic + potential) energy after each step; entry 0 is the
    /// initial state.
    pub energy: Vec<f64>,
    /// (step, largest per-ion force) sampled every `residual_stride` steps.
    pub residual: Vec<(usize, f64)>,
    pub steps: usize,
    pub converged: bool,
}

const RESIDUAL_STRIDE: usize = 100;

/// Damped velocity-Verlet relaxation of `initial` in the pseudo-potential
/// of `trap` until the largest force drops below `params.force_tolerance`.
pub fn anneal(initial: &[Vector3<f64>], trap: &TrapConfig, params: &SolverParams) -> Result<IonCrystal> {
    anneal_with_log(initial, trap, params).map(|(c, _)| c)
}

pub fn anneal_with_log(
    initial: &[Vector3<f64>],
    trap: &TrapConfig,
    params: &SolverParams,
) -> Result<(IonCrystal, AnnealLog)> {
    params.validate()?;
    if initial.is_empty() {
        return Err(Error::Validation("cannot anneal an empty crystal".into()));
    }
    let lambda = trap.lambda();
    let mut field = ForceField::new(initial, &lambda);
    let n = field.len();
    let dt = params.time_step;
    let half = 0.5 * dt;
    let keep = 1.0 - 0.5 * params.damping_coefficient * dt;
    let shrink = 1.0 / (1.0 + 0.5 * params.damping_coefficient * dt);

    let mut vx = vec![0.0; n];
    let mut vy = vec![0.0; n];
    let mut vz = vec![0.0; n];

    let mut eval = field.evaluate()?;
    let mut log = AnnealLog { energy: vec![eval.energy], residual: vec![(0, eval.max_force)], ..Default::default() };
    let mut best = (eval.max_force, field.positions());

    let crystal = |field: &ForceField, residual: f64| IonCrystal {
        positions: field.positions(),
        seed_family: SeedFamily::External,
        rng_seed: 0,
        residual,
        trap: *trap,
    };

    let mut step = 0;
    while eval.max_force >= params.force_tolerance {
        if step >= params.max_steps {
            log.steps = step;
            let best_crystal = IonCrystal {
                positions: best.1,
                seed_family: SeedFamily::External,
                rng_seed: 0,
                residual: best.0,
                trap: *trap,
            };
            return Err(Error::Convergence { steps: step, residual: best.0, best: Box::new(best_crystal) });
        }
        for i in 0..n {
            vx[i] = keep * vx[i] + half * field.fx[i];
            vy[i] = keep * vy[i] + half * field.fy[i];
            vz[i] = keep * vz[i] + half * field.fz[i];
            field.xs[i] += dt * vx[i];
            field.ys[i] += dt * vy[i];
            field.zs[i] += dt * vz[i];
        }
        eval = field.evaluate()?;
        let mut kinetic = 0.0;
        for i in 0..n {
            vx[i] = shrink * (vx[i] + half * field.fx[i]);
            vy[i] = shrink * (vy[i] + half * field.fy[i]);
            vz[i] = shrink * (vz[i] + half * field.fz[i]);
            kinetic += vx[i] * vx[i] + vy[i] * vy[i] + vz[i] * vz[i];
        }
        step += 1;
        log.energy.push(eval.energy + 0.5 * kinetic);
        if step % RESIDUAL_STRIDE == 0 {
            log.residual.push((step, eval.max_force));
        }
        if eval.max_force < best.0 {
            best = (eval.max_force, field.positions());
        }
    }
    log.steps = step;
    log.converged = true;
    if log.residual.last().map(|r| r.0) != Some(step) {
        log.residual.push((step, eval.max_force));
    }
    Ok((crystal(&field, eval.max_force), log))
}

/// True when, for every step k ≥ `start`, the energy `window` steps later
/// exceeds E_k by no more than `rel_tol·|E_k|`.
pub fn energy_non_increasing(energy: &[f64], start: usize, window: usize, rel_tol: f64) -> bool {
    (start..energy.len().saturating_sub(window)).all(|k| energy[k + window] <= energy[k] + rel_tol * energy[k].abs())
}
