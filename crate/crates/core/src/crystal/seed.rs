//! Initial conditions for annealing: Mackay icosahedra, bcc lattices and
//! seeded coordinate jitter.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// In-shell nearest-neighbour spacing of the Mackay seed, scaled units.
pub const MACKAY_SPACING: f64 = 1.5;

/// bcc cube edge giving the continuum density 3/(4π) with two sites per cell.
pub fn default_bcc_constant() -> f64 {
    (8.0 * std::f64::consts::PI / 3.0).cbrt()
}

const GOLDEN: f64 = 1.618_033_988_749_894_8;

fn icosahedron_vertices() -> Vec<Vector3<f64>> {
    // edge length 2 before normalisation
    let p = GOLDEN;
    let mut v = Vec::with_capacity(12);
    for &s1 in &[1.0, -1.0] {
        for &s2 in &[1.0, -1.0] {
            v.push(Vector3::new(0.0, s1, s2 * p));
            v.push(Vector3::new(s1, s2 * p, 0.0));
            v.push(Vector3::new(s2 * p, 0.0, s1));
        }
    }
    v.iter().map(|x| x / 2.0).collect()
}

fn icosahedron_topology(v: &[Vector3<f64>]) -> (Vec<(usize, usize)>, Vec<(usize, usize, usize)>) {
    let adjacent = |i: usize, j: usize| ((v[i] - v[j]).norm() - 1.0).abs() < 1e-9;
    let mut edges = Vec::new();
    let mut faces = Vec::new();
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            if !adjacent(i, j) {
                continue;
            }
            edges.push((i, j));
            for k in (j + 1)..v.len() {
                if adjacent(i, k) && adjacent(j, k) {
                    faces.push((i, j, k));
                }
            }
        }
    }
    debug_assert_eq!(edges.len(), 30);
    debug_assert_eq!(faces.len(), 20);
    (edges, faces)
}

/// Sites of Mackay shell `k` (k ≥ 1) with unit in-shell spacing, in
/// vertex, edge, face order.
fn mackay_shell(k: usize, v: &[Vector3<f64>], edges: &[(usize, usize)], faces: &[(usize, usize, usize)]) -> Vec<Vector3<f64>> {
    let kf = k as f64;
    let mut sites: Vec<Vector3<f64>> = v.iter().map(|x| x * kf).collect();
    for &(a, b) in edges {
        for t in 1..k {
            let f = t as f64 / kf;
            sites.push(kf * (v[a] + f * (v[b] - v[a])));
        }
    }
    for &(a, b, c) in faces {
        for i in 1..k {
            for j in 1..k {
                if i + j >= k {
                    continue;
                }
                let (fi, fj) = (i as f64 / kf, j as f64 / kf);
                sites.push(kf * (v[a] + fi * (v[b] - v[a]) + fj * (v[c] - v[a])));
            }
        }
    }
    debug_assert_eq!(sites.len(), 10 * k * k + 2);
    sites
}

/// First `n` sites of a multi-shell Mackay icosahedron centred at the origin.
///
/// Complete shells are taken whole; a partially filled outermost shell is
/// filled vertices first, then edge sites, then face sites.
pub fn mackay_icosahedron_seed(n: usize) -> Result<Vec<Vector3<f64>>> {
    if n == 0 {
        return Err(Error::Validation("cannot seed an empty crystal".into()));
    }
    let v = icosahedron_vertices();
    let (edges, faces) = icosahedron_topology(&v);
    let mut sites = vec![Vector3::zeros()];
    let mut k = 1;
    while sites.len() < n {
        let shell = mackay_shell(k, &v, &edges, &faces);
        let take = (n - sites.len()).min(shell.len());
        sites.extend_from_slice(&shell[..take]);
        k += 1;
    }
    Ok(sites.into_iter().map(|p| p * MACKAY_SPACING).collect())
}

/// The `n` sites of a bcc lattice (cube edge `lattice_constant`, one site at
/// the origin, cube axes along x, y, z) closest to the origin. Ties are broken
/// by (radius, x, y, z).
pub fn bcc_seed(n: usize, lattice_constant: f64) -> Result<Vec<Vector3<f64>>> {
    if n == 0 {
        return Err(Error::Validation("cannot seed an empty crystal".into()));
    }
    if !(lattice_constant > 0.0) {
        return Err(Error::Validation(format!("bcc lattice constant must be positive, got {lattice_constant}")));
    }
    // Work on doubled integer coordinates so radius ties are exact.
    let m = ((n as f64 * 3.0 / (8.0 * std::f64::consts::PI)).cbrt().ceil() as i64) + 2;
    let mut pts: Vec<(i64, i64, i64)> = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            for k in -m..=m {
                pts.push((2 * i, 2 * j, 2 * k));
                pts.push((2 * i + 1, 2 * j + 1, 2 * k + 1));
            }
        }
    }
    pts.sort_by_key(|&(x, y, z)| (x * x + y * y + z * z, x, y, z));
    pts.truncate(n);
    let h = lattice_constant / 2.0;
    Ok(pts
        .into_iter()
        .map(|(x, y, z)| Vector3::new(x as f64 * h, y as f64 * h, z as f64 * h))
        .collect())
}

pub fn min_pairwise_distance(positions: &[Vector3<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            best = best.min((positions[i] - positions[j]).norm_squared());
        }
    }
    best.sqrt()
}

/// Adds independent uniform offsets in [−f·d_min, f·d_min] to every
/// coordinate, d_min being the minimum pairwise distance before jitter.
pub fn apply_jitter(positions: &[Vector3<f64>], fraction: f64, seed: u64) -> Result<Vec<Vector3<f64>>> {
    if !(fraction >= 0.0) {
        return Err(Error::Validation(format!("jitter fraction must be non-negative, got {fraction}")));
    }
    if fraction == 0.0 || positions.len() < 2 {
        return Ok(positions.to_vec());
    }
    let amp = fraction * min_pairwise_distance(positions);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(positions
        .iter()
        .map(|p| {
            let dx = rng.gen_range(-amp..=amp);
            let dy = rng.gen_range(-amp..=amp);
            let dz = rng.gen_range(-amp..=amp);
            p + Vector3::new(dx, dy, dz)
        })
        .collect())
}
