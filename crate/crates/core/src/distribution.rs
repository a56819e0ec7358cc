//! Per-ion shift samples with summary statistics, histograms and exports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::crystal::IonCrystal;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 50;

/// Half-width of the default histogram range in standard deviations.
pub const DEFAULT_SPAN_SIGMA: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

impl Histogram {
    pub fn new(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(Error::Validation(format!("bad histogram range [{lo}, {hi}] with {bins} bins")));
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0; bins];
        let (mut underflow, mut overflow) = (0, 0);
        for &s in samples {
            if s < lo {
                underflow += 1;
            } else if s > hi {
                overflow += 1;
            } else {
                let k = (((s - lo) / width) as usize).min(bins - 1);
                counts[k] += 1;
            }
        }
        Ok(Histogram { edges, counts, underflow, overflow })
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Two columns: bin centre, count.
    pub fn write_two_column<W: Write>(&self, out: &mut W, header: &[String]) -> Result<()> {
        for h in header {
            for l in h.lines() {
                writeln!(out, "# {l}")?;
            }
        }
        for (c, n) in self.centers().iter().zip(&self.counts) {
            writeln!(out, "{c:.16e} {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDistribution {
    pub label: String,
    /// "fractional" or "Hz".
    pub unit: String,
    pub per_ion: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

impl ShiftDistribution {
    pub fn new(label: impl Into<String>, unit: impl Into<String>, per_ion: Vec<f64>) -> Self {
        Self::with_bins(label, unit, per_ion, DEFAULT_BINS)
    }

    pub fn with_bins(label: impl Into<String>, unit: impl Into<String>, per_ion: Vec<f64>, bins: usize) -> Self {
        let (mean, std) = mean_std(&per_ion);
        let min = per_ion.iter().copied().fold(f64::INFINITY, f64::min);
        let max = per_ion.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let half = if std > 0.0 {
            DEFAULT_SPAN_SIGMA * std
        } else if mean != 0.0 {
            mean.abs() * 1e-9
        } else {
            1e-300
        };
        let histogram = Histogram::new(&per_ion, mean - half, mean + half, bins.max(1)).expect("non-empty histogram range");
        ShiftDistribution { label: label.into(), unit: unit.into(), per_ion, mean, std, min, max, histogram }
    }

    pub fn len(&self) -> usize {
        self.per_ion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_ion.is_empty()
    }

    /// max − min.
    pub fn full_width(&self) -> f64 {
        if self.per_ion.is_empty() {
            0.0
        } else {
            self.max - self.min
        }
    }

    pub fn fraction_within(&self, threshold: f64) -> f64 {
        if self.per_ion.is_empty() {
            return 0.0;
        }
        self.per_ion.iter().filter(|x| x.abs() < threshold).count() as f64 / self.len() as f64
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// CSV with columns ion, x, y, z, shift.
    pub fn write_csv<W: Write>(&self, crystal: &IonCrystal, out: &mut W, header: &[String]) -> Result<()> {
        if crystal.n_ions() != self.len() {
            return Err(Error::Validation(format!(
                "distribution has {} samples but crystal has {} ions",
                self.len(),
                crystal.n_ions()
            )));
        }
        for h in header {
            for l in h.lines() {
                writeln!(out, "# {l}")?;
            }
        }
        writeln!(out, "ion,x,y,z,shift")?;
        for (i, (p, s)) in crystal.positions.iter().zip(&self.per_ion).enumerate() {
            writeln!(out, "{i},{:.16e},{:.16e},{:.16e},{s:.16e}", p.x, p.y, p.z)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> DistributionSummary {
        DistributionSummary {
            label: self.label.clone(),
            unit: self.unit.clone(),
            n: self.len(),
            mean: self.mean,
            std: self.std,
            min: self.min,
            max: self.max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub label: String,
    pub unit: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean and population standard deviation (two-pass).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
