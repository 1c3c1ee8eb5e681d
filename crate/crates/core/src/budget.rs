//! Named work budgets.
//!
//! Superlinear kernels (`O(N^3)` norms, `O(N^4)` dual sums, quadratic pair
//! loops) must fail loudly instead of silently truncating or hanging, so
//! every such operation checks an explicit cap before starting.

use crate::{Error, Result};

/// Caps for the expensive kernels. All values are inclusive upper bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkBudgets {
    /// Max modulus for `u_norm` at d = 2 (cost `O(N^2)`).
    pub u_norm_n_d2: usize,
    /// Max modulus for `u_norm` at d = 3 (cost `O(N^3)`).
    pub u_norm_n_d3: usize,
    /// Max modulus for `u_norm` at d = 4 (cost `O(N^4)`).
    pub u_norm_n_d4: usize,
    /// Max value of `(prod of kernel sizes)^2` in box inner products.
    pub box_pairs: u128,
    /// Max modulus for the dual function (cost `O(N^2 log N)`).
    pub dual_n: usize,
    /// Max modulus for dense `O(N^2)` progression-form loops.
    pub lambda_dense_n: usize,
    /// Max modulus for the additive-quadruple statistic (cost `O(p^3)`).
    pub additive_quad_p: usize,
    /// Max sieve bound (memory: ~18 bytes per integer).
    pub sieve_max: usize,
    /// Max modulus width for Euler local factors at one prime.
    pub local_factor_p: u64,
}

impl Default for WorkBudgets {
    fn default() -> Self {
        WorkBudgets {
            u_norm_n_d2: 4096,
            u_norm_n_d3: 512,
            u_norm_n_d4: 128,
            box_pairs: 100_000_000,
            dual_n: 4096,
            lambda_dense_n: 1 << 16,
            additive_quad_p: 256,
            sieve_max: 100_000_000,
            local_factor_p: 10_000_000,
        }
    }
}

impl WorkBudgets {
    /// Set a budget by name; unknown names and non-positive values are
    /// rejected. Names match the struct fields.
    pub fn set(&mut self, key: &str, value: u128) -> Result<()> {
        if value == 0 {
            return Err(Error::input(format!("budget {key} must be positive")));
        }
        let as_usize =
            || -> Result<usize> { usize::try_from(value).map_err(|_| Error::input(format!("budget {key} too large"))) };
        match key {
            "u_norm_n_d2" => self.u_norm_n_d2 = as_usize()?,
            "u_norm_n_d3" => self.u_norm_n_d3 = as_usize()?,
            "u_norm_n_d4" => self.u_norm_n_d4 = as_usize()?,
            "box_pairs" => self.box_pairs = value,
            "dual_n" => self.dual_n = as_usize()?,
            "lambda_dense_n" => self.lambda_dense_n = as_usize()?,
            "additive_quad_p" => self.additive_quad_p = as_usize()?,
            "sieve_max" => self.sieve_max = as_usize()?,
            "local_factor_p" => {
                self.local_factor_p =
                    u64::try_from(value).map_err(|_| Error::input(format!("budget {key} too large")))?
            }
            _ => return Err(Error::input(format!("unknown budget key: {key}"))),
        }
        Ok(())
    }

    /// All `(name, value)` pairs, for report provenance.
    pub fn entries(&self) -> Vec<(&'static str, u128)> {
        vec![
            ("u_norm_n_d2", self.u_norm_n_d2 as u128),
            ("u_norm_n_d3", self.u_norm_n_d3 as u128),
            ("u_norm_n_d4", self.u_norm_n_d4 as u128),
            ("box_pairs", self.box_pairs),
            ("dual_n", self.dual_n as u128),
            ("lambda_dense_n", self.lambda_dense_n as u128),
            ("additive_quad_p", self.additive_quad_p as u128),
            ("sieve_max", self.sieve_max as u128),
            ("local_factor_p", self.local_factor_p as u128),
        ]
    }

    pub(crate) fn check(what: &'static str, needed: u128, cap: u128) -> Result<()> {
        if needed > cap {
            Err(Error::Budget { what, needed, cap })
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_rejected() {
        let mut b = WorkBudgets::default();
        assert!(b.set("no_such_budget", 10).is_err());
    }

    #[test]
    fn zero_rejected() {
        let mut b = WorkBudgets::default();
        assert!(b.set("dual_n", 0).is_err());
    }

    #[test]
    fn set_roundtrips() {
        let mut b = WorkBudgets::default();
        b.set("u_norm_n_d3", 64).unwrap();
        assert_eq!(b.u_norm_n_d3, 64);
    }
}
