//! Sieve-backed arithmetic tables and prime-side weights.
//!
//! One pass of sieving produces primality, the von Mangoldt function
//! `Lambda` (log p on prime powers) and the Moebius function `mu` up to a
//! bound; on top of those sit the partially sifted sets `P_R`, the
//! truncated divisor-sum weight `Lambda_R` with its normalized square
//! `nu = Lambda_R^2 / log R`, the small-prime residue restriction, and
//! exponential sums of `Lambda`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::budget::WorkBudgets;
use crate::tol::Kahan;
use crate::zmod::unit_root;
use crate::{CyclicFn, Error, Result};

/// Euler's constant, for the Mertens prediction.
pub const EULER_GAMMA: f64 = 0.5772156649015329;

/// Primality, von Mangoldt and Moebius tables on `[0, bound]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveTables {
    bound: usize,
    is_prime: Vec<bool>,
    mangoldt: Vec<f64>,
    moebius: Vec<i8>,
}

impl SieveTables {
    /// Sieve everything up to `bound` (inclusive).
    pub fn build(bound: usize, budgets: &WorkBudgets) -> Result<Self> {
        if bound < 2 {
            return Err(Error::input(format!("sieve bound {bound} must be at least 2")));
        }
        WorkBudgets::check("sieve_max", bound as u128, budgets.sieve_max as u128)?;

        let mut is_prime = vec![true; bound + 1];
        is_prime[0] = false;
        is_prime[1] = false;
        let mut p = 2usize;
        while p * p <= bound {
            if is_prime[p] {
                let mut m = p * p;
                while m <= bound {
                    is_prime[m] = false;
                    m += p;
                }
            }
            p += 1;
        }

        let mut mangoldt = vec![0.0f64; bound + 1];
        let mut moebius = vec![1i8; bound + 1];
        moebius[0] = 0;
        for p in 2..=bound {
            if !is_prime[p] {
                continue;
            }
            let logp = (p as f64).ln();
            let mut pk = p;
            loop {
                mangoldt[pk] = logp;
                match pk.checked_mul(p) {
                    Some(next) if next <= bound => pk = next,
                    _ => break,
                }
            }
            let mut m = p;
            while m <= bound {
                moebius[m] = -moebius[m];
                m += p;
            }
            if let Some(p2) = p.checked_mul(p) {
                let mut m = p2;
                while m <= bound {
                    moebius[m] = 0;
                    m += p2;
                }
            }
        }

        Ok(SieveTables { bound, is_prime, mangoldt, moebius })
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn is_prime(&self, n: usize) -> bool {
        n <= self.bound && self.is_prime[n]
    }

    /// `Lambda(n)`: `log p` when `n = p^j`, zero otherwise.
    pub fn mangoldt(&self, n: usize) -> f64 {
        self.mangoldt[n]
    }

    /// `mu(n)` in `{-1, 0, 1}`.
    pub fn moebius(&self, n: usize) -> i8 {
        self.moebius[n]
    }

    pub fn primes(&self) -> impl Iterator<Item = usize> + '_ {
        (2..=self.bound).filter(move |&n| self.is_prime[n])
    }

    /// Chebyshev sum `psi(n) = sum_{m <= n} Lambda(m)`.
    pub fn psi(&self, n: usize) -> f64 {
        let mut acc = Kahan::default();
        for m in 2..=n.min(self.bound) {
            let v = self.mangoldt[m];
            if v != 0.0 {
                acc.add(v);
            }
        }
        acc.value()
    }

    // -- disk cache --------------------------------------------------------

    const MAGIC: &'static [u8; 4] = b"APSV";
    const VERSION: u32 = 1;

    fn cache_file(dir: &Path, bound: usize) -> PathBuf {
        dir.join(format!("sieve_{bound}.v{}.bin", Self::VERSION))
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = Self::cache_file(dir, self.bound);
        let mut out: Vec<u8> = Vec::with_capacity(18 * (self.bound + 1) + 16);
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&Self::VERSION.to_le_bytes());
        out.extend_from_slice(&(self.bound as u64).to_le_bytes());
        out.extend(self.is_prime.iter().map(|&b| b as u8));
        for v in &self.mangoldt {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend(self.moebius.iter().map(|&v| v as u8));
        let mut file = fs::File::create(&path)?;
        file.write_all(&out)?;
        Ok(path)
    }

    pub fn load(dir: &Path, bound: usize) -> Result<Self> {
        let path = Self::cache_file(dir, bound);
        let mut file = fs::File::open(&path)?;
        let mut head = [0u8; 16];
        file.read_exact(&mut head)?;
        if &head[0..4] != Self::MAGIC {
            return Err(Error::Parse("bad sieve cache magic".into()));
        }
        if u32::from_le_bytes(head[4..8].try_into().expect("4 bytes")) != Self::VERSION {
            return Err(Error::Parse("sieve cache version mismatch".into()));
        }
        let stored = u64::from_le_bytes(head[8..16].try_into().expect("8 bytes")) as usize;
        if stored != bound {
            return Err(Error::Parse(format!("cache holds bound {stored}, wanted {bound}")));
        }
        let len = bound + 1;
        let mut body = Vec::new();
        file.read_to_end(&mut body)?;
        if body.len() != len * 10 {
            return Err(Error::Parse("sieve cache truncated".into()));
        }
        let is_prime: Vec<bool> = body[..len].iter().map(|&b| b != 0).collect();
        let mut mangoldt = Vec::with_capacity(len);
        for chunk in body[len..len + 8 * len].chunks_exact(8) {
            mangoldt.push(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
        }
        let moebius: Vec<i8> = body[len + 8 * len..].iter().map(|&b| b as i8).collect();
        Ok(SieveTables { bound, is_prime, mangoldt, moebius })
    }

    /// Load from the cache when possible, otherwise build and (best effort)
    /// persist.
    pub fn load_or_build(dir: Option<&Path>, bound: usize, budgets: &WorkBudgets) -> Result<Self> {
        if let Some(dir) = dir {
            if let Ok(tables) = Self::load(dir, bound) {
                return Ok(tables);
            }
            let tables = Self::build(bound, budgets)?;
            let _ = tables.save(dir);
            return Ok(tables);
        }
        Self::build(bound, budgets)
    }
}

/// `psi(N)/N`; the normalized form of the prime number theorem approaches 1.
pub fn pnt_average(tables: &SieveTables, n: usize) -> Result<f64> {
    if n < 1 || n > tables.bound() {
        return Err(Error::input(format!("N = {n} outside the sieve bound {}", tables.bound())));
    }
    Ok(tables.psi(n) / n as f64)
}

/// Partially sifted set: integers in `(floor(N/2), N]` larger than 1 and
/// coprime to every prime `p < R`.
pub fn sifted_set(tables: &SieveTables, n: usize, r: usize) -> Result<Vec<u64>> {
    if !(2..=tables.bound()).contains(&n) {
        return Err(Error::input(format!("N = {n} outside the sieve bound")));
    }
    let sqrt_n = (n as f64).sqrt();
    if (r as f64) < 2.0 || r as f64 > sqrt_n + 1e-9 {
        return Err(Error::input(format!("R = {r} must satisfy 2 <= R <= sqrt(N)")));
    }
    let lo = n / 2;
    let mut keep: Vec<bool> = vec![true; n - lo];
    for p in tables.primes().take_while(|&p| p < r) {
        // First multiple of p above lo.
        let mut m = (lo / p + 1) * p;
        while m <= n {
            keep[m - lo - 1] = false;
            m += p;
        }
    }
    Ok((lo + 1..=n).filter(|&v| v > 1 && keep[v - lo - 1]).map(|v| v as u64).collect())
}

/// Observed size of `P_R` next to the Mertens prediction
/// `(N/2) e^{-gamma} / log R`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MertensCheck {
    pub observed: u64,
    pub predicted: f64,
}

pub fn mertens_check(tables: &SieveTables, n: usize, r: usize) -> Result<MertensCheck> {
    let observed = sifted_set(tables, n, r)?.len() as u64;
    let predicted = (n as f64 / 2.0) * (-EULER_GAMMA).exp() / (r as f64).ln();
    Ok(MertensCheck { observed, predicted })
}

/// Truncated divisor-sum weight `Lambda_R` and its normalized square `nu`.
#[derive(Debug, Clone)]
pub struct GYWeight {
    r: usize,
    lambda_r: Vec<f64>,
    nu: Vec<f64>,
}

impl GYWeight {
    pub fn cutoff(&self) -> usize {
        self.r
    }

    /// `Lambda_R(n) = sum_{d | n} mu(d) max(log(R/d), 0)`.
    pub fn lambda_r(&self, n: usize) -> f64 {
        self.lambda_r[n]
    }

    /// `nu(n) = Lambda_R(n)^2 / log R`.
    pub fn nu(&self, n: usize) -> f64 {
        self.nu[n]
    }

    pub fn bound(&self) -> usize {
        self.lambda_r.len() - 1
    }
}

/// Build `Lambda_R` on `[1, n_max]` by the forward divisor loop: for each
/// squarefree `d < R`, add `mu(d) log(R/d)` onto every multiple of `d`.
/// Total cost `O(N log R)`; matches the per-n divisor sum exactly.
pub fn gy_weight(tables: &SieveTables, n_max: usize, r: usize) -> Result<GYWeight> {
    if r < 2 {
        return Err(Error::input(format!("cutoff R = {r} must be at least 2")));
    }
    if n_max > tables.bound() {
        return Err(Error::input(format!("n_max = {n_max} outside the sieve bound")));
    }
    let log_r = (r as f64).ln();
    let mut lambda_r = vec![0.0f64; n_max + 1];
    let d_cap = r.min(n_max + 1);
    for d in 1..d_cap {
        let mu = if d <= tables.bound() { tables.moebius(d) } else { 0 };
        if mu == 0 {
            continue;
        }
        let w = mu as f64 * (log_r - (d as f64).ln());
        let mut m = d;
        while m <= n_max {
            lambda_r[m] += w;
            m += d;
        }
    }
    lambda_r[0] = 0.0;
    let nu = lambda_r.iter().map(|&v| v * v / log_r).collect();
    Ok(GYWeight { r, lambda_r, nu })
}

/// The small-prime modulus `W = prod_{p <= w} p` with its totient and
/// coprime residues.
#[derive(Debug, Clone, Serialize)]
pub struct WTrick {
    pub w: u64,
    pub modulus: u64,
    pub phi: u64,
    pub coprime_residues: Vec<u64>,
}

pub fn w_trick(w: u64) -> Result<WTrick> {
    if w < 2 {
        return Err(Error::input(format!("w = {w} must be at least 2")));
    }
    let mut modulus: u64 = 1;
    let mut phi: u64 = 1;
    let mut p = 2u64;
    while p <= w {
        if crate::gowers::is_prime(p) {
            modulus = modulus
                .checked_mul(p)
                .ok_or_else(|| Error::input(format!("W exceeds the integer budget at p = {p}")))?;
            phi *= p - 1;
        }
        p += 1;
    }
    let coprime_residues =
        (1..=modulus).filter(|&b| num_integer::gcd(b, modulus) == 1).collect();
    Ok(WTrick { w, modulus, phi, coprime_residues })
}

/// Restrict a table on `[1, N]` to the class `b mod W` and rescale by
/// `phi(W)/W`: the result lives on `Z/MZ` with `M = floor(N/W)`, sending
/// `m` to `(phi(W)/W) f(W m + b)`. For `f = Lambda` and coprime `b` the
/// restricted mean is `1 + o(1)`.
pub fn restrict_to_class(values: &[f64], trick: &WTrick, b: u64) -> Result<CyclicFn> {
    let n = values.len().saturating_sub(1);
    if b < 1 || b > trick.modulus {
        return Err(Error::input(format!("class {b} out of range for W = {}", trick.modulus)));
    }
    let m = n as u64 / trick.modulus;
    if m == 0 {
        return Err(Error::input(format!("table too short for one full class mod {}", trick.modulus)));
    }
    let scale = trick.phi as f64 / trick.modulus as f64;
    CyclicFn::from_fn(m as usize, |i| {
        let idx = trick.modulus * i as u64 + b;
        Complex64::new(scale * values[idx as usize], 0.0)
    })
}

/// `sum_{n < N} Lambda(n) e_N(-n xi)`, summed over the prime-power support.
pub fn exp_sum_mangoldt(tables: &SieveTables, n: usize, xi: usize) -> Result<Complex64> {
    if n < 2 || n > tables.bound() + 1 {
        return Err(Error::input(format!("N = {n} outside the sieve bound")));
    }
    let mut re = Kahan::default();
    let mut im = Kahan::default();
    for p in tables.primes() {
        if p >= n {
            break;
        }
        let mut pk = p;
        while pk < n {
            let w = tables.mangoldt(pk);
            let k = ((pk as u128 * xi as u128) % n as u128) as i64;
            let z = unit_root(n, -k) * w;
            re.add(z.re);
            im.add(z.im);
            match pk.checked_mul(p) {
                Some(next) => pk = next,
                None => break,
            }
        }
    }
    Ok(Complex64::new(re.value(), im.value()))
}

/// Continued-fraction convergents `h/q` of `num/den` with `q <= cap`.
fn convergents(num: u64, den: u64, cap: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let (mut h0, mut h1) = (1u64, 0u64);
    let (mut q0, mut q1) = (0u64, 1u64);
    let (mut a, mut b) = (num, den);
    while b != 0 {
        let step = a / b;
        let (Some(h2), Some(q2)) = (
            step.checked_mul(h1).and_then(|v| v.checked_add(h0)),
            step.checked_mul(q1).and_then(|v| v.checked_add(q0)),
        ) else {
            break;
        };
        (h0, h1) = (h1, h2);
        (q0, q1) = (q1, q2);
        if q1 > cap {
            break;
        }
        out.push((h1, q1));
        (a, b) = (b, a % b);
    }
    out
}

/// Report label for a frequency: major when `xi/N` sits within `1/(Q q)` of
/// a rational `a/q` with `q <= Q`. Affects labels only, never values.
pub fn classify_arc(n: usize, xi: usize, q_cap: u64) -> &'static str {
    for (h, q) in convergents(xi as u64 % n as u64, n as u64, q_cap) {
        if (xi as f64 / n as f64 - h as f64 / q as f64).abs() <= 1.0 / (q_cap as f64 * q as f64) {
            return "major";
        }
    }
    // xi = 0 has no convergents; it is the archetypal major frequency.
    if xi % n == 0 {
        "major"
    } else {
        "minor"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tables(bound: usize) -> SieveTables {
        SieveTables::build(bound, &WorkBudgets::default()).unwrap()
    }

    #[test]
    fn mangoldt_definition_cases() {
        let t = tables(100);
        assert!((t.mangoldt(8) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(t.mangoldt(6), 0.0);
        assert!((t.mangoldt(7) - 7f64.ln()).abs() < 1e-15);
        assert!((t.mangoldt(49) - 7f64.ln()).abs() < 1e-15);
        assert_eq!(t.mangoldt(1), 0.0);
    }

    #[test]
    fn moebius_values() {
        let t = tables(100);
        assert_eq!(t.moebius(1), 1);
        assert_eq!(t.moebius(6), 1);
        assert_eq!(t.moebius(12), 0);
        assert_eq!(t.moebius(30), -1);
        assert_eq!(t.moebius(7), -1);
    }

    #[test]
    fn psi_by_direct_prime_power_enumeration() {
        let t = tables(100);
        let mut expected = 0.0;
        for p in [2usize, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97]
        {
            let mut pk = p;
            while pk <= 100 {
                expected += (p as f64).ln();
                pk *= p;
            }
        }
        assert!((t.psi(100) - expected).abs() < 1e-9);
    }

    #[test]
    fn divisor_sum_identity_and_moebius_form() {
        let t = tables(2000);
        for n in 2..=2000usize {
            // log n = sum_{d | n} Lambda(d)
            let mut sum = 0.0;
            for d in 1..=n {
                if n % d == 0 {
                    sum += t.mangoldt(d);
                }
            }
            assert!((sum - (n as f64).ln()).abs() < 1e-9, "n = {n}");
            // Lambda(n) = sum_{cd = n} mu(d) log c
            let mut lam = 0.0;
            for d in 1..=n {
                if n % d == 0 {
                    let c = n / d;
                    lam += t.moebius(d) as f64 * (c as f64).ln();
                }
            }
            assert!((lam - t.mangoldt(n)).abs() < 1e-9, "n = {n}");
            // sum_{d | n} mu(d) = [n = 1]
            let mut mu_sum = 0i64;
            for d in 1..=n {
                if n % d == 0 {
                    mu_sum += t.moebius(d) as i64;
                }
            }
            assert_eq!(mu_sum, i64::from(n == 1), "n = {n}");
        }
    }

    #[test]
    fn pnt_average_small_and_exact() {
        let t = tables(1000);
        let expected = (2f64.ln() * 3.0 + 3f64.ln() * 2.0 + 5f64.ln() + 7f64.ln()) / 10.0;
        assert!((pnt_average(&t, 10).unwrap() - expected).abs() < 1e-12);
        assert!((pnt_average(&t, 2).unwrap() - 2f64.ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn sifted_set_parity_and_primes() {
        let t = tables(1000);
        // R = 3 sieves by p = 2 only: the odd numbers in (N/2, N].
        let n = 400;
        let p3 = sifted_set(&t, n, 3).unwrap();
        let odds: Vec<u64> = (201..=400u64).filter(|v| v % 2 == 1).collect();
        assert_eq!(p3, odds);
        assert!((p3.len() as i64 - (n as i64 + 3) / 4).abs() <= 1);

        // R = sqrt(N) leaves exactly the primes in (N/2, N].
        let ps = sifted_set(&t, 400, 20).unwrap();
        let primes: Vec<u64> = (201..=400u64).filter(|&v| t.is_prime(v as usize)).collect();
        assert_eq!(ps, primes);
    }

    #[test]
    fn sifting_is_monotone_in_r() {
        let t = tables(2000);
        let a = sifted_set(&t, 1600, 5).unwrap();
        let b = sifted_set(&t, 1600, 30).unwrap();
        assert!(b.iter().all(|x| a.contains(x)));
        assert!(sifted_set(&t, 1600, 1).is_err());
        assert!(sifted_set(&t, 1600, 41).is_err());
    }

    #[test]
    fn gy_weight_definition_cases() {
        let t = tables(1000);
        let w = gy_weight(&t, 1000, 5).unwrap();
        let log5 = 5f64.ln();
        assert!((w.lambda_r(1) - log5).abs() < 1e-12);
        // Prime above the cutoff: only d = 1 contributes.
        assert!((w.lambda_r(7) - log5).abs() < 1e-12);
        assert!((w.lambda_r(101) - log5).abs() < 1e-12);
        // n = 6: d in {1, 2, 3}.
        let expected = log5 - (5f64 / 2.0).ln() - (5f64 / 3.0).ln();
        assert!((w.lambda_r(6) - expected).abs() < 1e-12);
        assert!(w.nu(6) >= 0.0);
        assert!((w.nu(6) - expected * expected / log5).abs() < 1e-12);
    }

    #[test]
    fn gy_weight_matches_per_n_divisor_sum() {
        let t = tables(3000);
        let r = 50usize;
        let w = gy_weight(&t, 3000, r).unwrap();
        let log_r = (r as f64).ln();
        for n in 1..=3000usize {
            let mut direct = 0.0;
            for d in 1..=n {
                if n % d == 0 && t.moebius(d) != 0 {
                    let val = log_r - (d as f64).ln();
                    if val > 0.0 {
                        direct += t.moebius(d) as f64 * val;
                    }
                }
            }
            assert!((w.lambda_r(n) - direct).abs() < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn lambda_r_is_log_r_on_the_sifted_set() {
        let t = tables(4000);
        let r = 50usize;
        let w = gy_weight(&t, 4000, r).unwrap();
        for n in sifted_set(&t, 4000, r).unwrap() {
            assert!((w.lambda_r(n as usize) - (r as f64).ln()).abs() < 1e-9, "n = {n}");
            // nu dominates log R times the sifted indicator.
            assert!(w.nu(n as usize) >= (r as f64).ln() - 1e-9);
        }
    }

    #[test]
    fn mangoldt_dominated_by_nu_on_large_primes() {
        let t = tables(3000);
        let r = 50usize;
        let n = 3000usize;
        let w = gy_weight(&t, n, r).unwrap();
        let ratio = (n as f64).ln() / (r as f64).ln();
        for p in t.primes().filter(|&p| p > r && p <= n) {
            assert!(t.mangoldt(p) <= ratio * w.nu(p) + 1e-9, "p = {p}");
        }
    }

    #[test]
    fn w_trick_small_cases() {
        let t3 = w_trick(3).unwrap();
        assert_eq!((t3.modulus, t3.phi), (6, 2));
        assert_eq!(t3.coprime_residues, vec![1, 5]);

        let t2 = w_trick(2).unwrap();
        assert_eq!((t2.modulus, t2.phi), (2, 1));
        assert_eq!(t2.coprime_residues, vec![1]);

        assert!(w_trick(60).is_err()); // product overflows u64
    }

    #[test]
    fn restricted_mangoldt_has_mean_near_one() {
        let bound = 100_000usize;
        let t = tables(bound);
        let values: Vec<f64> = (0..=bound).map(|n| t.mangoldt(n)).collect();
        let trick = w_trick(3).unwrap();
        let restricted = restrict_to_class(&values, &trick, 1).unwrap();
        let mean = restricted.expectation().re;
        assert!((0.9..=1.1).contains(&mean), "mean = {mean}");
    }

    #[test]
    fn exp_sum_at_zero_is_psi() {
        let t = tables(1000);
        let s = exp_sum_mangoldt(&t, 500, 0).unwrap();
        assert!((s.re - t.psi(499)).abs() < 1e-9);
        assert!(s.im.abs() < 1e-12);
    }

    #[test]
    fn exp_sum_at_half_frequency_is_large_negative() {
        let t = tables(10_000);
        let n = 10_000usize;
        let s = exp_sum_mangoldt(&t, n, n / 2).unwrap();
        // Only powers of two contribute positively; the odd prime powers
        // all get the minus sign.
        let pow2: f64 = (1..).map(|j| 1usize << j).take_while(|&v| v < n).count() as f64 * 2f64.ln();
        let expected = 2.0 * pow2 - t.psi(n - 1);
        assert!((s.re - expected).abs() < 1e-6);
        assert!(s.re < -0.8 * t.psi(n - 1));
    }

    #[test]
    fn arc_classification_labels() {
        // xi = N/2 is a major-arc frequency (a/q = 1/2), golden-ratio-like
        // frequencies are minor.
        assert_eq!(classify_arc(1000, 500, 20), "major");
        assert_eq!(classify_arc(1000, 0, 20), "major");
        assert_eq!(classify_arc(1009, 624, 20), "minor"); // ~ 0.6184
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = tables(5000);
        t.save(dir.path()).unwrap();
        let back = SieveTables::load(dir.path(), 5000).unwrap();
        assert_eq!(t, back);
        assert!(SieveTables::load(dir.path(), 6000).is_err());
        let via = SieveTables::load_or_build(Some(dir.path()), 5000, &WorkBudgets::default()).unwrap();
        assert_eq!(via, t);
    }
}
