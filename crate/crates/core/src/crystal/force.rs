//! Direct O(N²) pseudo-potential + Coulomb forces in scaled units.
//!
//! Pairs are visited once each. Rows are dealt round-robin into a fixed
//! number of blocks, every block accumulates into its own buffer, and the
//! buffers are summed in block order. The decomposition does not depend on
//! the rayon pool, so results are bitwise identical for any thread count.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::trap::LambdaMatrices;

/// Squared separation below which two ions are treated as coincident.
const COINCIDENT_R2: f64 = 1e-24;

const LANES: usize = 8;

/// Number of row blocks (fewer when there are fewer ions).
const BLOCKS: usize = 64;

#[derive(Debug, Clone, Copy, Default)]
struct RowSums {
    fx: f64,
    fy: f64,
    fz: f64,
    inv_r: f64,
    min_r2: f64,
}

/// Pair terms between ion `i` and every ion after it. The partner reaction
/// is subtracted from `rx`, `ry`, `rz` (indexed like `xs[i+1..]`).
///
/// On x86-64 the same code is compiled a second time with AVX enabled and
/// picked at run time. FMA stays off, so both paths round identically.
fn row(i: usize, xs: &[f64], ys: &[f64], zs: &[f64], rx: &mut [f64], ry: &mut [f64], rz: &mut [f64]) -> RowSums {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx") {
            // SAFETY: the feature was detected on this CPU.
            return unsafe { row_avx(i, xs, ys, zs, rx, ry, rz) };
        }
    }
    row_generic(i, xs, ys, zs, rx, ry, rz)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn row_avx(i: usize, xs: &[f64], ys: &[f64], zs: &[f64], rx: &mut [f64], ry: &mut [f64], rz: &mut [f64]) -> RowSums {
    row_generic(i, xs, ys, zs, rx, ry, rz)
}

#[inline(always)]
fn row_generic(i: usize, xs: &[f64], ys: &[f64], zs: &[f64], rx: &mut [f64], ry: &mut [f64], rz: &mut [f64]) -> RowSums {
    let (xi, yi, zi) = (xs[i], ys[i], zs[i]);
    let (xs, ys, zs) = (&xs[i + 1..], &ys[i + 1..], &zs[i + 1..]);
    let n = xs.len();
    let (rx, ry, rz) = (&mut rx[..n], &mut ry[..n], &mut rz[..n]);
    let mut fx = [0.0; LANES];
    let mut fy = [0.0; LANES];
    let mut fz = [0.0; LANES];
    let mut e = [0.0; LANES];
    let mut m = [f64::INFINITY; LANES];
    let body = n - n % LANES;
    let chunks = xs[..body]
        .chunks_exact(LANES)
        .zip(ys[..body].chunks_exact(LANES))
        .zip(zs[..body].chunks_exact(LANES))
        .zip(rx[..body].chunks_exact_mut(LANES))
        .zip(ry[..body].chunks_exact_mut(LANES))
        .zip(rz[..body].chunks_exact_mut(LANES));
    for (((((cx, cy), cz), ax), ay), az) in chunks {
        let cx: &[f64; LANES] = cx.try_into().unwrap();
        let cy: &[f64; LANES] = cy.try_into().unwrap();
        let cz: &[f64; LANES] = cz.try_into().unwrap();
        let ax: &mut [f64; LANES] = ax.try_into().unwrap();
        let ay: &mut [f64; LANES] = ay.try_into().unwrap();
        let az: &mut [f64; LANES] = az.try_into().unwrap();
        for l in 0..LANES {
            let dx = xi - cx[l];
            let dy = yi - cy[l];
            let dz = zi - cz[l];
            let r2 = dx * dx + dy * dy + dz * dz;
            let inv = 1.0 / r2.sqrt();
            let inv3 = inv * inv * inv;
            let (gx, gy, gz) = (dx * inv3, dy * inv3, dz * inv3);
            fx[l] += gx;
            fy[l] += gy;
            fz[l] += gz;
            ax[l] -= gx;
            ay[l] -= gy;
            az[l] -= gz;
            e[l] += inv;
            m[l] = m[l].min(r2);
        }
    }
    for j in body..n {
        let dx = xi - xs[j];
        let dy = yi - ys[j];
        let dz = zi - zs[j];
        let r2 = dx * dx + dy * dy + dz * dz;
        let inv = 1.0 / r2.sqrt();
        let inv3 = inv * inv * inv;
        let (gx, gy, gz) = (dx * inv3, dy * inv3, dz * inv3);
        fx[0] += gx;
        fy[0] += gy;
        fz[0] += gz;
        rx[j] -= gx;
        ry[j] -= gy;
        rz[j] -= gz;
        e[0] += inv;
        m[0] = m[0].min(r2);
    }
    RowSums {
        fx: fold(&fx),
        fy: fold(&fy),
        fz: fold(&fz),
        inv_r: fold(&e),
        min_r2: m.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Pairwise lane reduction.
#[inline(always)]
fn fold(v: &[f64; LANES]) -> f64 {
    ((v[0] + v[1]) + (v[2] + v[3])) + ((v[4] + v[5]) + (v[6] + v[7]))
}

#[derive(Debug, Clone)]
struct Block {
    fx: Vec<f64>,
    fy: Vec<f64>,
    fz: Vec<f64>,
    coulomb: f64,
    /// First row (in visiting order) holding a coincident pair.
    coincident: Option<usize>,
}

/// Structure-of-arrays position buffer with force evaluation.
#[derive(Debug, Clone)]
pub(crate) struct ForceField {
    curvature: Matrix3<f64>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub fz: Vec<f64>,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Evaluation {
    /// Total pseudo-potential + Coulomb energy.
    pub energy: f64,
    /// Largest per-ion force magnitude.
    pub max_force: f64,
}

impl ForceField {
    pub fn new(positions: &[Vector3<f64>], lambda: &LambdaMatrices) -> Self {
        let n = positions.len();
        let nb = n.clamp(1, BLOCKS);
        let block = Block { fx: vec![0.0; n], fy: vec![0.0; n], fz: vec![0.0; n], coulomb: 0.0, coincident: None };
        ForceField {
            curvature: lambda.pseudo_curvature(),
            xs: positions.iter().map(|p| p.x).collect(),
            ys: positions.iter().map(|p| p.y).collect(),
            zs: positions.iter().map(|p| p.z).collect(),
            fx: vec![0.0; n],
            fy: vec![0.0; n],
            fz: vec![0.0; n],
            blocks: vec![block; nb],
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        (0..self.len()).map(|i| Vector3::new(self.xs[i], self.ys[i], self.zs[i])).collect()
    }

    pub fn evaluate(&mut self) -> Result<Evaluation> {
        let n = self.len();
        let nb = self.blocks.len();
        let (xs, ys, zs) = (&self.xs, &self.ys, &self.zs);
        self.blocks.par_iter_mut().enumerate().for_each(|(b, blk)| {
            blk.fx.fill(0.0);
            blk.fy.fill(0.0);
            blk.fz.fill(0.0);
            blk.coulomb = 0.0;
            blk.coincident = None;
            for i in (b..n).step_by(nb) {
                let (head_x, tail_x) = blk.fx.split_at_mut(i + 1);
                let (head_y, tail_y) = blk.fy.split_at_mut(i + 1);
                let (head_z, tail_z) = blk.fz.split_at_mut(i + 1);
                let s = row(i, xs, ys, zs, tail_x, tail_y, tail_z);
                head_x[i] += s.fx;
                head_y[i] += s.fy;
                head_z[i] += s.fz;
                blk.coulomb += s.inv_r;
                if s.min_r2 < COINCIDENT_R2 && blk.coincident.is_none() {
                    blk.coincident = Some(i);
                }
            }
        });

        if let Some(i) = self.blocks.iter().filter_map(|b| b.coincident).min() {
            let j = (i + 1..n)
                .find(|&j| {
                    let d = Vector3::new(xs[i] - xs[j], ys[i] - ys[j], zs[i] - zs[j]);
                    d.norm_squared() < COINCIDENT_R2
                })
                .unwrap_or(i);
            return Err(Error::Singularity(i, j));
        }

        let k = self.curvature;
        let mut energy = 0.0;
        let mut max_f2: f64 = 0.0;
        for i in 0..n {
            let r = Vector3::new(xs[i], ys[i], zs[i]);
            let kr = k * r;
            let mut f = -kr;
            for blk in &self.blocks {
                f += Vector3::new(blk.fx[i], blk.fy[i], blk.fz[i]);
            }
            self.fx[i] = f.x;
            self.fy[i] = f.y;
            self.fz[i] = f.z;
            energy += 0.5 * r.dot(&kr);
            max_f2 = max_f2.max(f.norm_squared());
        }
        energy += self.blocks.iter().map(|b| b.coulomb).sum::<f64>();
        Ok(Evaluation { energy, max_force: max_f2.sqrt() })
    }
}

/// Force on every ion: −(Λ_s + ½Λ_rf²)·rᵢ + Σ_{j≠i} r_ij/|r_ij|³.
pub fn scaled_force(positions: &[Vector3<f64>], lambda: &LambdaMatrices) -> Result<Vec<Vector3<f64>>> {
    let mut field = ForceField::new(positions, lambda);
    field.evaluate()?;
    Ok((0..field.len()).map(|i| Vector3::new(field.fx[i], field.fy[i], field.fz[i])).collect())
}

/// Pseudo-potential plus Coulomb energy, ½Σ rᵀKr + Σ_{i<j} 1/r_ij.
pub fn scaled_energy(positions: &[Vector3<f64>], lambda: &LambdaMatrices) -> Result<f64> {
    let mut field = ForceField::new(positions, lambda);
    Ok(field.evaluate()?.energy)
}

/// Largest per-ion force magnitude.
pub fn max_force(positions: &[Vector3<f64>], lambda: &LambdaMatrices) -> Result<f64> {
    let mut field = ForceField::new(positions, lambda);
    Ok(field.evaluate()?.max_force)
}
