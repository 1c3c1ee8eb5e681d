//! Deterministic input generators shared by the CLI and the test suites.
//!
//! All randomness flows through a seeded ChaCha8 stream so that every
//! reported number is reproducible from `(generator, seed)` alone.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::zmod::unit_root;
use crate::{CyclicFn, Result};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bounded complex function: values uniform on the closed unit disk.
pub fn random_complex(n: usize, seed: u64) -> Result<CyclicFn> {
    let mut r = rng(seed);
    CyclicFn::from_fn(n, |_| {
        let radius = r.gen::<f64>().sqrt();
        let angle = r.gen::<f64>() * std::f64::consts::TAU;
        Complex64::from_polar(radius, angle)
    })
}

/// Real function with values uniform in `[0, 1]`.
pub fn random_unit_interval(n: usize, seed: u64) -> Result<CyclicFn> {
    let mut r = rng(seed);
    CyclicFn::from_fn(n, |_| Complex64::new(r.gen::<f64>(), 0.0))
}

/// Random subset of `[1, n]`: each element kept independently with the given
/// density.
pub fn random_subset(n: usize, density: f64, seed: u64) -> Vec<u64> {
    let mut r = rng(seed);
    (1..=n as u64).filter(|_| r.gen::<f64>() < density).collect()
}

/// `x -> e_N(P(x))` for `P(x) = c_0 + c_1 x + ... + c_d x^d` with integer
/// coefficients; the phase is reduced mod `N` exactly before the exponential.
pub fn polynomial_phase(n: usize, coeffs: &[u64]) -> Result<CyclicFn> {
    let m = n as u128;
    CyclicFn::from_fn(n, |x| {
        let mut acc: u128 = 0;
        for &c in coeffs.iter().rev() {
            acc = (acc * x as u128 + c as u128) % m;
        }
        unit_root(n, acc as i64)
    })
}

/// Indicator of the residues of `[a, b]` (1-based, inclusive) inside `Z/NZ`.
pub fn interval_indicator(n: usize, a: u64, b: u64) -> Result<CyclicFn> {
    CyclicFn::indicator(n, (a..=b).map(|x| (x % n as u64) as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seed_deterministic() {
        assert_eq!(random_complex(16, 9).unwrap(), random_complex(16, 9).unwrap());
        assert_ne!(random_complex(16, 9).unwrap(), random_complex(16, 10).unwrap());
        assert_eq!(random_subset(100, 0.3, 4), random_subset(100, 0.3, 4));
    }

    #[test]
    fn random_complex_is_bounded() {
        assert!(random_complex(256, 1).unwrap().is_bounded());
    }

    #[test]
    fn polynomial_phase_is_unimodular_and_exact() {
        let f = polynomial_phase(11, &[5, 2, 3]).unwrap();
        for (x, v) in f.values().iter().enumerate() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
            let want = unit_root(11, ((5 + 2 * x + 3 * x * x) % 11) as i64);
            assert!((v - want).norm() < 1e-12);
        }
    }
}
