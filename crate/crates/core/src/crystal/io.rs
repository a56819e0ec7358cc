//! Plain-text crystal tables.
//!
//! ```text
//! # format = ionclock-crystal/1
//! # n = 2
//! # seed_family = icosahedral
//! # rng_seed = 1
//! # residual = 1.2e-10
//! # trap.omega_z = ...          (rad/s)
//! # trap.omega_rf = ...         (rad/s)
//! # trap.a = ...
//! # trap.delta = ...
//! x y z
//! ...
//! ```
//!
//! Coordinates are written with 17 significant digits so that reading a
//! table back reproduces every position bit for bit. Extra `#` lines are
//! ignored on input.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::IonCrystal;
use crate::error::{Error, Result};
use crate::trap::TrapConfig;

pub const CRYSTAL_FORMAT: &str = "ionclock-crystal/1";

pub fn write_crystal<W: Write>(crystal: &IonCrystal, out: &mut W, extra_header: &[String]) -> Result<()> {
    writeln!(out, "# format = {CRYSTAL_FORMAT}")?;
    writeln!(out, "# n = {}", crystal.n_ions())?;
    writeln!(out, "# seed_family = {}", crystal.seed_family)?;
    writeln!(out, "# rng_seed = {}", crystal.rng_seed)?;
    writeln!(out, "# residual = {:.16e}", crystal.residual)?;
    writeln!(out, "# trap.omega_z = {:.16e}", crystal.trap.omega_z)?;
    writeln!(out, "# trap.omega_rf = {:.16e}", crystal.trap.omega_rf)?;
    writeln!(out, "# trap.a = {:.16e}", crystal.trap.a)?;
    writeln!(out, "# trap.delta = {:.16e}", crystal.trap.delta)?;
    for line in extra_header {
        for l in line.lines() {
            writeln!(out, "# {l}")?;
        }
    }
    writeln!(out, "x y z")?;
    for p in &crystal.positions {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
    }
    Ok(())
}

pub fn read_crystal<R: BufRead>(input: R) -> Result<IonCrystal> {
    let mut header: HashMap<String, String> = HashMap::new();
    let mut positions = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                header.entry(k.trim().to_string()).or_insert_with(|| v.trim().to_string());
            }
            continue;
        }
        if t == "x y z" {
            continue;
        }
        let cols: Vec<&str> = t.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected 3 columns, got {}", lineno + 1, cols.len())));
        }
        let mut v = [0.0; 3];
        for (k, c) in cols.iter().enumerate() {
            v[k] = c.parse().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        positions.push(Vector3::new(v[0], v[1], v[2]));
    }

    let get = |key: &str| header.get(key).ok_or_else(|| Error::Parse(format!("missing header field '{key}'")));
    let num = |key: &str| -> Result<f64> { get(key)?.parse().map_err(|e| Error::Parse(format!("header '{key}': {e}"))) };

    if let Some(fmt) = header.get("format") {
        if fmt != CRYSTAL_FORMAT {
            return Err(Error::Parse(format!("unsupported crystal format '{fmt}'")));
        }
    }
    let n: usize = get("n")?.parse().map_err(|e| Error::Parse(format!("header 'n': {e}")))?;
    if n != positions.len() {
        return Err(Error::Validation(format!("header says {n} ions but table has {}", positions.len())));
    }
    let trap = TrapConfig::new(num("trap.omega_z")?, num("trap.omega_rf")?, num("trap.a")?, num("trap.delta")?)?;
    Ok(IonCrystal {
        positions,
        seed_family: get("seed_family")?.parse()?,
        rng_seed: get("rng_seed")?.parse().map_err(|e| Error::Parse(format!("header 'rng_seed': {e}")))?,
        residual: num("residual")?,
        trap,
    })
}

pub fn save_crystal(crystal: &IonCrystal, path: &Path, extra_header: &[String]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_crystal(crystal, &mut f, extra_header)?;
    f.flush()?;
    Ok(())
}

pub fn load_crystal(path: &Path) -> Result<IonCrystal> {
    read_crystal(std::io::BufReader::new(std::fs::File::open(path)?))
}
