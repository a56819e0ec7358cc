use std::f64::consts::PI;
use std::path::Path;

use anyhow::Context;
use ionclock::config::{ResolvedScenario, ScenarioConfig};
use ionclock::crystal::io::{load_crystal, save_crystal};
use ionclock::crystal::{solve_crystal_with_log, IonCrystal};
use ionclock::distribution::ShiftDistribution;
use ionclock::metrics::{
    averaging_time_to_target, format_budget, gaussian_contrast, projection_noise_stability, ramsey_contrast, shift_budget,
};
use ionclock::micromotion::{magic_scan as scan_omega, micromotion_shift_distribution};
use ionclock::multipole::{
    combined_rank2_distribution, compensated_tensor_distribution, optimize_compensation_power, orientation_sweep,
    quadrupole_shift_distribution, tensor_shift_distribution, BeamProfile,
};
use ionclock::oracle::{compare_with_perturbation, integrate_full_eom, OracleParams};
use ionclock::trap::{characteristic_length, corrected_magic_frequency, magic_rf_frequency, MagicCorrection};
use ionclock::Error;
use serde_json::{json, Value};

use crate::output::{write_lines, Run};

fn crystal_stem(n: usize, seed: u64, cfg: &ScenarioConfig) -> String {
    format!("crystal_n{n}_seed{seed}_{}", cfg.scan.seed_family)
}

/// Anneals one crystal and writes its table and residual log. A run that
/// does not converge leaves its best state in `<stem>_partial.txt`.
fn solve_one(run: &Run, r: &ResolvedScenario, n: usize, seed: u64) -> anyhow::Result<(IonCrystal, Value)> {
    let cfg = run.cfg;
    let stem = crystal_stem(n, seed, cfg);
    match solve_crystal_with_log(n, cfg.scan.seed_family, seed, &r.trap, &cfg.solver) {
        Ok((crystal, log)) => {
            let file = run.path(&format!("{stem}.txt"));
            save_crystal(&crystal, &file, &run.header())?;
            let rows: Vec<String> = log.residual.iter().map(|&(s, f)| format!("{s},{f:.16e},{:.16e}", log.energy[s])).collect();
            write_lines(&run.path(&format!("{stem}_log.csv")), &run.header(), "step,max_force,energy", &rows)?;
            let rec = json!({
                "n": n,
                "seed": seed,
                "steps": log.steps,
                "residual": crystal.residual,
                "file": file.file_name().and_then(|s| s.to_str()),
            });
            Ok((crystal, rec))
        }
        Err(Error::Convergence { steps, residual, best }) => {
            save_crystal(&best, &run.path(&format!("{stem}_partial.txt")), &run.header())?;
            Err(Error::Convergence { steps, residual, best }).with_context(|| format!("N = {n}, seed = {seed}"))
        }
        Err(e) => Err(e).with_context(|| format!("N = {n}, seed = {seed}")),
    }
}

/// Crystal from a file (checked against the configured trap shape) or, when
/// no file is given, solved for the first configured N and seed.
fn crystal_for(run: &Run, r: &ResolvedScenario, path: Option<&Path>) -> anyhow::Result<IonCrystal> {
    match path {
        Some(p) => {
            let c = load_crystal(p).with_context(|| format!("reading {}", p.display()))?;
            if c.trap.a != r.trap.a || c.trap.delta != r.trap.delta {
                return Err(Error::Validation(format!(
                    "{} was solved for a = {}, delta = {} but the configuration has a = {}, delta = {}",
                    p.display(),
                    c.trap.a,
                    c.trap.delta,
                    r.trap.a,
                    r.trap.delta
                ))
                .into());
            }
            Ok(IonCrystal { trap: r.trap, ..c })
        }
        None => Ok(solve_one(run, r, run.cfg.scan.n[0], run.cfg.scan.seeds[0])?.0),
    }
}

fn write_distribution(run: &Run, crystal: &IonCrystal, d: &ShiftDistribution, stem: &str) -> anyhow::Result<Value> {
    let mut f = run.create(&format!("{stem}.csv"))?;
    d.write_csv(crystal, &mut f, &run.header())?;
    let mut h = run.create(&format!("{stem}_hist.txt"))?;
    let mut header = run.header();
    header.push(format!("{} ({}): bin centre, count", d.label, d.unit));
    d.histogram.write_two_column(&mut h, &header)?;
    let mut v = serde_json::to_value(d.summary())?;
    v["full_width"] = json!(d.full_width());
    Ok(v)
}

pub fn solve(cfg: &ScenarioConfig) -> anyhow::Result<()> {
    let run = Run::new("solve", cfg)?;
    let r = cfg.resolve()?;
    let mut records = Vec::new();
    for &n in &cfg.scan.n {
        for &seed in &cfg.scan.seeds {
            let (c, rec) = solve_one(&run, &r, n, seed)?;
            println!("N = {n}, seed = {seed}: residual {:.3e}", c.residual);
            records.push(rec);
        }
    }
    let p = run.write_summary(Some(&r), json!({ "crystals": records }))?;
    println!("wrote {}", p.display());
    Ok(())
}

pub fn shifts(cfg: &ScenarioConfig, crystal_path: &Path, sweep: bool, compensate: bool) -> anyhow::Result<()> {
    let run = Run::new("shifts", cfg)?;
    let r = cfg.resolve()?;
    let crystal = crystal_for(&run, &r, Some(crystal_path))?;
    let (sp, trap) = (&r.species, &r.trap);
    let orient = &cfg.environment.orientation;

    let mm = micromotion_shift_distribution(&crystal, sp, trap)?;
    let quad = quadrupole_shift_distribution(&crystal, sp, trap, orient)?;
    let tensor = tensor_shift_distribution(&crystal, sp, trap)?;
    let mut results = json!({
        "n_ions": crystal.n_ions(),
        "micromotion": write_distribution(&run, &crystal, &mm, "micromotion")?,
        "quadrupole": write_distribution(&run, &crystal, &quad, "quadrupole")?,
        "tensor": write_distribution(&run, &crystal, &tensor, "tensor")?,
    });
    println!("micromotion mean {:.4e}, std {:.4e}", mm.mean, mm.std);
    println!("quadrupole std {:.4e} Hz", quad.std);

    if sweep {
        let set = orientation_sweep(10);
        let stds = set
            .iter()
            .map(|o| Ok(quadrupole_shift_distribution(&crystal, sp, trap, o)?.std))
            .collect::<ionclock::Result<Vec<f64>>>()?;
        let mean = stds.iter().sum::<f64>() / stds.len() as f64;
        let spread = stds.iter().fold(0.0f64, |m, s| m.max((s - mean).abs())) / mean;
        results["orientation_sweep"] = json!({ "orientations": set, "std_hz": stds, "max_relative_deviation": spread });
        println!("quadrupole std over 10 orientations: max deviation {:.2}%", 100.0 * spread);
    }
    if compensate {
        let l = characteristic_length(sp, trap.omega_z)?;
        let template = BeamProfile::for_species(sp, cfg.beam.waist_l * l, 0.0)?;
        let beam = optimize_compensation_power(&crystal, sp, trap, &template, cfg.beam.max_power_w)?;
        let comp = compensated_tensor_distribution(&crystal, sp, trap, &beam)?;
        results["compensated_tensor"] = write_distribution(&run, &crystal, &comp, "tensor_compensated")?;
        results["beam"] = json!({
            "waist_m": beam.waist,
            "power_w": beam.power,
            "wavelength_m": beam.wavelength,
            "std_reduction": tensor.std / comp.std,
        });
        println!("compensation power {:.4} W, std reduced {:.1}x", beam.power, tensor.std / comp.std);
    }
    let p = run.write_summary(Some(&r), results)?;
    println!("wrote {}", p.display());
    Ok(())
}

pub fn magic_scan(cfg: &ScenarioConfig) -> anyhow::Result<()> {
    let run = Run::new("magic-scan", cfg)?;
    let r = cfg.resolve()?;
    let seed = cfg.scan.seeds[0];
    let mut crystals = Vec::new();
    for &n in &cfg.scan.n {
        crystals.push(solve_one(&run, &r, n, seed)?.0);
    }
    let grid = cfg.omega_grid(&r.species)?;
    let scan = scan_omega(&crystals, &r.species, &r.trap, &grid);
    let scan = match scan {
        Ok(s) => s,
        Err(e) => {
            run.write_summary(Some(&r), json!({ "error": e.to_string() }))?;
            return Err(e.into());
        }
    };
    let columns = std::iter::once("omega_hz,slope".to_string())
        .chain(scan.n_values.iter().map(|n| format!("mean_n{n}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows: Vec<String> = scan
        .omega
        .iter()
        .zip(&scan.slope)
        .zip(&scan.mean_shift)
        .map(|((w, s), m)| {
            let mut row = format!("{:.16e},{s:.16e}", w / (2.0 * PI));
            for v in m {
                row.push_str(&format!(",{v:.16e}"));
            }
            row
        })
        .collect();
    write_lines(&run.path("magic_scan.csv"), &run.header(), &columns, &rows)?;
    let omega0 = magic_rf_frequency(&r.species)?;
    let kind = if r.trap.is_spherical() { MagicCorrection::Spherical } else { MagicCorrection::General };
    let predicted = corrected_magic_frequency(&r.species, r.trap.omega_z, r.trap.a, kind)?;
    let p = run.write_summary(
        Some(&r),
        json!({
            "n_values": scan.n_values,
            "zero_crossing_hz": scan.zero_crossing / (2.0 * PI),
            "zero_crossing_over_omega0": scan.zero_crossing / omega0,
            "corrected_magic_hz": predicted / (2.0 * PI),
            "relative_difference": scan.zero_crossing / predicted - 1.0,
        }),
    )?;
    println!(
        "zero crossing at {:.6} MHz (Omega/Omega0 - 1 = {:.3e})",
        scan.zero_crossing / (2e6 * PI),
        scan.zero_crossing / omega0 - 1.0
    );
    println!("wrote {}", p.display());
    Ok(())
}

pub fn ramsey(cfg: &ScenarioConfig, crystal_path: Option<&Path>) -> anyhow::Result<()> {
    let run = Run::new("ramsey", cfg)?;
    let r = cfg.resolve()?;
    let crystal = crystal_for(&run, &r, crystal_path)?;
    let (sp, trap) = (&r.species, &r.trap);
    let l = characteristic_length(sp, trap.omega_z)?;
    let template = BeamProfile::for_species(sp, cfg.beam.waist_l * l, 0.0)?;
    let beam = optimize_compensation_power(&crystal, sp, trap, &template, cfg.beam.max_power_w)?;
    let combined = combined_rank2_distribution(&crystal, sp, trap, &cfg.environment.orientation, &beam)?;
    let summary = write_distribution(&run, &crystal, &combined, "combined_rank2")?;
    let t = cfg.ramsey.free_precession_time;
    let res = ramsey_contrast(&combined.per_ion, t)?;
    let nu = sp.clock_frequency;
    let n = crystal.n_ions();
    let sigma = projection_noise_stability(nu, n, t, cfg.ramsey.averaging_time)?;
    let to_target = averaging_time_to_target(nu, n, t, 1e-18)?;
    let p = run.write_summary(
        Some(&r),
        json!({
            "n_ions": n,
            "compensation_power_w": beam.power,
            "distribution": summary,
            "free_precession_time_s": t,
            "contrast": res.contrast,
            "center_shift_hz": res.center_shift,
            "gaussian_contrast_same_std": gaussian_contrast(combined.std, t),
            "averaging_time_s": cfg.ramsey.averaging_time,
            "stability": sigma,
            "time_to_1e-18_s": to_target,
        }),
    )?;
    println!("contrast {:.4} at T = {t} s; sigma({} s) = {:.3e}", res.contrast, cfg.ramsey.averaging_time, sigma);
    println!("wrote {}", p.display());
    Ok(())
}

pub fn budget(cfg: &ScenarioConfig, crystal_path: Option<&Path>) -> anyhow::Result<()> {
    let run = Run::new("budget", cfg)?;
    let r = cfg.resolve()?;
    let crystal = crystal_for(&run, &r, crystal_path)?;
    let rows = shift_budget(&r.species, &r.trap, &crystal, &cfg.environment)?;
    let table = format_budget(&rows);
    let mut header = run.header();
    header.push(String::new());
    write_lines(&run.path("budget.txt"), &header, table.trim_end(), &[])?;
    let p = run.write_summary(Some(&r), json!({ "n_ions": crystal.n_ions(), "rows": rows }))?;
    print!("{table}");
    println!("wrote {}", p.display());
    Ok(())
}

pub fn oracle(cfg: &ScenarioConfig) -> anyhow::Result<()> {
    let run = Run::new("oracle", cfg)?;
    let r = cfg.resolve()?;
    let params = OracleParams { steps_per_cycle: cfg.oracle.steps_per_cycle, n_cycles: cfg.oracle.n_cycles, ..Default::default() };
    let mut reports = Vec::new();
    for &n in &cfg.scan.n {
        let crystal = solve_one(&run, &r, n, cfg.scan.seeds[0])?.0;
        let traj = integrate_full_eom(&crystal, &r.trap, &params).with_context(|| format!("oracle at N = {n}"))?;
        let rep = compare_with_perturbation(&traj, &r.species, &r.trap)?;
        let mut rows = Vec::new();
        for (i, comps) in traj.r0.iter().zip(&traj.r2).zip(&traj.r4).zip(&traj.r6).enumerate() {
            let (((r0, r2), r4), r6) = comps;
            for (h, v) in [(0, r0), (2, r2), (4, r4), (6, r6)] {
                rows.push(format!("{i},{h},{:.16e},{:.16e},{:.16e}", v.x, v.y, v.z));
            }
        }
        write_lines(&run.path(&format!("oracle_n{n}_fourier.csv")), &run.header(), "ion,harmonic,x,y,z", &rows)?;
        println!(
            "N = {n}: R2 error {:.2e} (first order), {:.2e} (second order); shift error {:.3e} x prefactor",
            rep.r2_error_first_order, rep.r2_error_second_order, rep.shift_error_scaled
        );
        reports.push(rep);
    }
    let p = run.write_summary(Some(&r), json!({ "reports": reports }))?;
    println!("wrote {}", p.display());
    Ok(())
}
