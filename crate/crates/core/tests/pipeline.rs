use std::f64::consts::PI;

use ionclock::crystal::io::{load_crystal, save_crystal};
use ionclock::crystal::{solve_crystal, SeedFamily, SolverParams};
use ionclock::metrics::{shift_budget, Environment};
use ionclock::micromotion::micromotion_shift_distribution;
use ionclock::physics::lu176_species;
use ionclock::trap::{corrected_magic_frequency, magic_rf_frequency, MagicCorrection, TrapConfig, SPHERICAL_A};

fn omega_z() -> f64 {
    2.0 * PI * 200e3
}

#[test]
fn solve_save_load_then_shifts() {
    let lu = lu176_species();
    let omega0 = magic_rf_frequency(&lu).unwrap();
    let trap = TrapConfig::spherical(omega_z(), omega0).unwrap();
    let crystal = solve_crystal(60, SeedFamily::Icosahedral, 4, &trap, &SolverParams::default()).unwrap();
    crystal.check_invariants(1e-8).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    save_crystal(&crystal, &path, &["note = pipeline".into()]).unwrap();
    let back = load_crystal(&path).unwrap();
    assert_eq!(back.positions, crystal.positions);
    assert_eq!(back.seed_family, SeedFamily::Icosahedral);

    // Same positions reused at the corrected drive: mean shift vanishes.
    let plain = micromotion_shift_distribution(&back, &lu, &trap).unwrap();
    assert!(plain.mean > 0.0);
    let omega = corrected_magic_frequency(&lu, omega_z(), SPHERICAL_A, MagicCorrection::Spherical).unwrap();
    let mut corrected = back.clone();
    corrected.trap = TrapConfig::spherical(omega_z(), omega).unwrap();
    let at_magic = micromotion_shift_distribution(&corrected, &lu, &corrected.trap).unwrap();
    assert!(at_magic.mean.abs() < 1e-6 * plain.mean, "{} vs {}", at_magic.mean, plain.mean);
    assert!(at_magic.std > 0.0);

    let rows = shift_budget(&lu, &corrected.trap, &corrected, &Environment::default()).unwrap();
    assert_eq!(rows.len(), 6);
    let mm = rows[2].fractional_shift.unwrap();
    assert!((mm - at_magic.mean).abs() <= 1e-12 * plain.mean.abs());
    assert!(rows[5].fractional_shift.is_none());
}

#[test]
fn bcc_and_icosahedral_agree_on_moment() {
    let trap = TrapConfig::spherical(omega_z(), 2.0 * PI * 23.2e6).unwrap();
    let p = SolverParams::default();
    let a = solve_crystal(80, SeedFamily::Icosahedral, 1, &trap, &p).unwrap();
    let b = solve_crystal(80, SeedFamily::Bcc, 1, &trap, &p).unwrap();
    let m = |c: &ionclock::crystal::IonCrystal| c.positions.iter().map(|r| r.norm_squared()).sum::<f64>() / c.n_ions() as f64;
    assert!((m(&a) / m(&b) - 1.0).abs() < 0.02, "{} {}", m(&a), m(&b));
}
