//! Output files. Every file carries the format version and the resolved
//! configuration so a run can be reproduced from its own outputs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use ionclock::config::{ResolvedScenario, ScenarioConfig};
use serde_json::{json, Value};

pub const OUTPUT_FORMAT: &str = "ionclock-output/1";

pub struct Run<'a> {
    pub command: &'static str,
    pub cfg: &'a ScenarioConfig,
    pub toml: String,
}

impl<'a> Run<'a> {
    pub fn new(command: &'static str, cfg: &'a ScenarioConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
        let toml = cfg.to_toml_string()?;
        fs::write(cfg.out.join("config.toml"), &toml)?;
        Ok(Run { command, cfg, toml })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    /// Comment header lines for text outputs (written with a leading "# ").
    pub fn header(&self) -> Vec<String> {
        vec![format!("format = {OUTPUT_FORMAT}"), format!("command = {}", self.command), "config:".into(), self.toml.clone()]
    }

    pub fn create(&self, name: &str) -> anyhow::Result<BufWriter<fs::File>> {
        let p = self.path(name);
        Ok(BufWriter::new(fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    }

    pub fn write_summary(&self, resolved: Option<&ResolvedScenario>, results: Value) -> anyhow::Result<PathBuf> {
        let mut record = json!({
            "format": OUTPUT_FORMAT,
            "command": self.command,
            "config": self.toml,
            "results": results,
        });
        if let Some(r) = resolved {
            record["resolved"] = json!({
                "species": r.species.name,
                "omega_rf_rad_s": r.trap.omega_rf,
                "omega_rf_hz": r.trap.omega_rf / (2.0 * std::f64::consts::PI),
                "omega_z_rad_s": r.trap.omega_z,
                "epsilon": r.trap.epsilon(),
                "a": r.trap.a,
                "delta": r.trap.delta,
            });
        }
        let p = self.path(&format!("{}_summary.json", self.command.replace('-', "_")));
        let mut f = self.create(p.file_name().and_then(|s| s.to_str()).unwrap_or("summary.json"))?;
        serde_json::to_writer_pretty(&mut f, &record)?;
        writeln!(f)?;
        f.flush()?;
        Ok(p)
    }
}

pub fn write_lines(path: &Path, header: &[String], columns: &str, rows: &[String]) -> anyhow::Result<()> {
    let mut f = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for h in header {
        for l in h.lines() {
            writeln!(f, "# {l}")?;
        }
    }
    writeln!(f, "{columns}")?;
    for r in rows {
        writeln!(f, "{r}")?;
    }
    f.flush()?;
    Ok(())
}
