//! Small numerical helpers: Bessel J₀ and a golden-section minimiser.

use crate::error::{Error, Result};

/// J₀(x) from its power series Σ (−x²/4)ᵏ/(k!)².
///
/// Accurate to about 1e-15 absolute for |x| ≤ 10; cancellation degrades it
/// beyond that, which never matters for modulation indices.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Minimum of a unimodal `f` on [lo, hi], returned as (x, f(x)).
/// Iterates until the bracket is below `rel_tol·max(|hi − lo|, tiny)`.
pub fn golden_section_minimize<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<(f64, f64)> {
    if !(hi > lo) || !(rel_tol > 0.0) {
        return Err(Error::Validation(format!("bad golden-section bracket [{lo}, {hi}] / tol {rel_tol}")));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let width = hi - lo;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > rel_tol * width {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // The ends can beat the interior probes when the minimum sits on a bound;
    // a flat function resolves to `lo`.
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    let f_lo = f(lo);
    if f_lo <= best.1 {
        best = (lo, f_lo);
    }
    let f_hi = f(hi);
    if f_hi < best.1 {
        best = (hi, f_hi);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn j0_reference_values() {
        assert_eq!(bessel_j0(0.0), 1.0);
        assert_relative_eq!(bessel_j0(1.0), 0.765_197_686_557_966_6, epsilon = 1e-15);
        assert_relative_eq!(bessel_j0(2.404_825_557_695_773), 0.0, epsilon = 1e-14);
        assert_relative_eq!(bessel_j0(5.0), -0.177_596_771_314_338_3, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn j0_small_argument(x in -0.05f64..0.05) {
            let deficit = 1.0 - bessel_j0(x);
            let b2 = x * x / 4.0;
            prop_assert!((deficit - (b2 - b2 * b2 / 4.0 + b2.powi(3) / 36.0)).abs() <= 3e-16 + b2.powi(4));
        }
    }

    #[test]
    fn golden_section_parabola() {
        let (x, fx) = golden_section_minimize(|x| (x - 1.3) * (x - 1.3) + 2.0, 0.0, 5.0, 1e-10).unwrap();
        // Location is only resolvable to about sqrt(machine epsilon).
        assert_relative_eq!(x, 1.3, epsilon = 1e-7);
        assert_relative_eq!(fx, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn golden_section_boundary_minimum() {
        let (x, _) = golden_section_minimize(|x| x, 2.0, 3.0, 1e-8).unwrap();
        assert_eq!(x, 2.0);
        assert!(golden_section_minimize(|x| x, 3.0, 3.0, 1e-8).is_err());
        assert_eq!(golden_section_minimize(|_| 1.0, 0.0, 4.0, 1e-8).unwrap().0, 0.0);
    }
}
