//! Comparison tolerances.
//!
//! All floating-point identity checks in the crate go through one policy:
//! relative tolerance with an absolute floor, so that quantities near zero
//! are not held to an impossible relative standard.

use num_complex::Complex64;

/// Relative tolerance with an absolute floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Relative part, applied against the larger magnitude of the operands.
    pub rel: f64,
    /// Absolute floor.
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        // Double-precision accumulation over up to ~1e6 terms.
        Tolerance { rel: 1e-9, abs: 1e-12 }
    }
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Self {
        Tolerance { rel, abs }
    }

    /// Allowed absolute discrepancy when comparing against `scale`.
    pub fn margin(&self, scale: f64) -> f64 {
        self.abs.max(self.rel * scale.abs())
    }

    pub fn close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.margin(a.abs().max(b.abs()))
    }

    pub fn close_c(&self, a: Complex64, b: Complex64) -> bool {
        (a - b).norm() <= self.margin(a.norm().max(b.norm()))
    }
}

/// Compensated (Neumaier) summation; the running error term is folded in at
/// the end.
#[derive(Debug, Default, Clone, Copy)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_uses_abs_floor_near_zero() {
        let t = Tolerance::default();
        assert!(t.close(0.0, 1e-13));
        assert!(!t.close(0.0, 1e-9));
    }

    #[test]
    fn relative_part_scales() {
        let t = Tolerance::default();
        assert!(t.close(1e6, 1e6 + 1e-4));
        assert!(!t.close(1e6, 1e6 + 1.0));
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = Kahan::default();
        k.add(1e16);
        for _ in 0..1000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 1000.0);
    }
}
