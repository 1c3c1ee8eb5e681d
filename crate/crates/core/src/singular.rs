//! Singular-series constants from exact local factors.
//!
//! Each local factor is the ratio
//!
//! ```text
//! P(whole pattern hits no zero residue mod p) / prod_j P(coordinate j does)
//! ```
//!
//! computed by exact integer counting over `(Z/pZ)^2` (or the constrained
//! slice for the additive problems), never from a closed form. Derived
//! closed forms appear only as oracles in the test suite; counting is the
//! definition and wins when the two disagree.
//!
//! Products are accumulated in log space with compensated summation, and
//! every truncated product carries a rigorous tail bound built from the
//! Rosser-Schoenfeld estimate `pi(x) < 1.25506 x / ln x`, which gives
//! `sum_{p > P} p^{-2} <= 2.6 / (P ln P)`.

use num_integer::Integer;
use serde::Serialize;

use crate::gowers::is_prime;
use crate::tol::Kahan;
use crate::{Error, Result};

/// Exact nonnegative rational with reduction on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    num: u128,
    den: u128,
}

impl Rational {
    pub fn new(num: u128, den: u128) -> Result<Self> {
        if den == 0 {
            return Err(Error::Internal("rational with zero denominator".into()));
        }
        let g = num.gcd(&den);
        Ok(Rational { num: num / g.max(1), den: den / g.max(1) })
    }

    pub fn num(&self) -> u128 {
        self.num
    }

    pub fn den(&self) -> u128 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    fn mul_ratio(&self, num: u128, den: u128) -> Result<Self> {
        let extra = Rational::new(num, den)?;
        let a = Rational::new(self.num, extra.den)?;
        let b = Rational::new(extra.num, self.den)?;
        let num = a.num.checked_mul(b.num).ok_or_else(|| Error::input("local factor overflows 128 bits"))?;
        let den = a.den.checked_mul(b.den).ok_or_else(|| Error::input("local factor overflows 128 bits"))?;
        Rational::new(num, den)
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Natural log, accurate also for values very close to 1.
    pub fn ln(&self) -> f64 {
        let ratio = self.to_f64();
        if (0.5..=1.5).contains(&ratio) {
            let diff = self.num as i128 - self.den as i128;
            (diff as f64 / self.den as f64).ln_1p()
        } else {
            ratio.ln()
        }
    }
}

/// `(joint count / p^2) / ((p-1)/p)^k` as an exact rational.
fn normalize_count(count: u128, p: u64, k: usize) -> Result<Rational> {
    let mut out = Rational::new(count, (p as u128) * (p as u128))?;
    for _ in 0..k {
        out = out.mul_ratio(p as u128, (p - 1) as u128)?;
    }
    Ok(out)
}

/// Literal pair enumeration of the progression pattern: all `p^2` pairs
/// `(n, r)`, keeping those with `n + j r` nonzero mod `p` for `j < k`.
pub fn local_factor_ap_enumerated(p: u64, k: usize) -> Result<Rational> {
    let mut count: u128 = 0;
    for n in 0..p {
        'pair: for r in 0..p {
            let mut cur = n;
            for _ in 0..k {
                if cur == 0 {
                    continue 'pair;
                }
                cur += r;
                if cur >= p {
                    cur -= p;
                }
            }
            count += 1;
        }
    }
    normalize_count(count, p, k)
}

/// Counting route for large `p`: for each spacing `r`, the excluded
/// residues for `n` are `{-j r mod p : j < k}`; build that set exactly and
/// subtract its size. `O(p k)` per prime, identical totals to the literal
/// pair loop.
pub fn local_factor_ap_counted(p: u64, k: usize) -> Result<Rational> {
    let mut count: u128 = 0;
    let mut forbidden: Vec<u64> = Vec::with_capacity(k);
    for r in 0..p {
        forbidden.clear();
        forbidden.push(0);
        let step = (p - r) % p; // -r mod p
        let mut cur = 0u64;
        for _ in 1..k {
            cur += step;
            if cur >= p {
                cur -= p;
            }
            if !forbidden.contains(&cur) {
                forbidden.push(cur);
            }
        }
        count += (p - forbidden.len() as u64) as u128;
    }
    normalize_count(count, p, k)
}

const ENUMERATION_CAP: u64 = 1000;

/// Local factor of the k-term progression pattern at the prime `p`.
pub fn local_factor_ap(p: u64, k: usize) -> Result<Rational> {
    if !is_prime(p) {
        return Err(Error::input(format!("{p} is not prime")));
    }
    if k == 0 {
        return Err(Error::input("pattern length must be at least 1"));
    }
    if p <= ENUMERATION_CAP {
        local_factor_ap_enumerated(p, k)
    } else {
        local_factor_ap_counted(p, k)
    }
}

/// Local factor of the twin pattern `{n, n+2}` at `p`, by enumeration over
/// the single variable.
pub fn local_factor_twin(p: u64) -> Result<Rational> {
    if !is_prime(p) {
        return Err(Error::input(format!("{p} is not prime")));
    }
    let mut count: u128 = 0;
    for n in 0..p {
        if n != 0 && (n + 2) % p != 0 {
            count += 1;
        }
    }
    // One variable: joint is count/p, singles are ((p-1)/p)^2.
    let mut out = Rational::new(count, p as u128)?;
    for _ in 0..2 {
        out = out.mul_ratio(p as u128, (p - 1) as u128)?;
    }
    Ok(out)
}

/// Local factor of the ternary additive pattern `n1 + n2 + n3 = n` at `p`:
/// pairs `(n1, n2)` with `n1`, `n2`, `n - n1 - n2` all nonzero.
pub fn local_factor_ternary(p: u64, n: u64) -> Result<Rational> {
    if !is_prime(p) {
        return Err(Error::input(format!("{p} is not prime")));
    }
    let n = n % p;
    let count: u128 = if p <= ENUMERATION_CAP {
        let mut c: u128 = 0;
        for n1 in 1..p {
            for n2 in 1..p {
                if (n1 + n2) % p != n {
                    c += 1;
                }
            }
        }
        c
    } else {
        // Per n1, the excluded n2 form the set {0, n - n1 mod p}.
        let mut c: u128 = 0;
        for n1 in 1..p {
            let bad = (n + p - n1) % p;
            c += (p - if bad == 0 { 1 } else { 2 }) as u128;
        }
        c
    };
    normalize_count(count, p, 3)
}

/// Truncated Euler product with a rigorous bound on the missing tail.
#[derive(Debug, Clone, Serialize)]
pub struct EulerProductResult {
    pub value: f64,
    pub truncation_prime: u64,
    /// Bound on `|log(true / value)|`; zero when an exact-zero local factor
    /// makes the product exactly zero.
    pub tail_bound: f64,
    pub factor_log: Option<Vec<(u64, f64)>>,
}

fn primes_up_to(bound: u64) -> Vec<u64> {
    let bound = bound as usize;
    let mut sieve = vec![true; bound + 1];
    let mut p = 2usize;
    while p * p <= bound {
        if sieve[p] {
            let mut m = p * p;
            while m <= bound {
                sieve[m] = false;
                m += p;
            }
        }
        p += 1;
    }
    (2..=bound).filter(|&n| sieve[n]).map(|n| n as u64).collect()
}

/// `sum_{p > cap} p^{-2} <= 2.6 / (cap ln cap)`, from Rosser-Schoenfeld.
fn prime_square_tail(cap: u64) -> f64 {
    2.6 / (cap as f64 * (cap as f64).ln())
}

fn product_from_logs(
    factors: Vec<(u64, f64)>,
    truncation_prime: u64,
    tail_bound: f64,
    keep_factors: bool,
) -> EulerProductResult {
    let mut acc = Kahan::default();
    for &(_, l) in &factors {
        acc.add(l);
    }
    EulerProductResult {
        value: acc.value().exp(),
        truncation_prime,
        tail_bound,
        factor_log: keep_factors.then_some(factors),
    }
}

/// Progression-pattern constant `prod_p local_factor_ap(p, k)` truncated at
/// `p <= truncation_prime`.
///
/// Tail: for `p > P` the factor is `(p-k+1) p^{k-2} / (p-1)^{k-1}`, whose
/// log expands as `-sum_{m >= 2} ((k-1)^m - (k-1)) / (m p^m)`; for
/// `P >= (k-1)^3` this is at most
/// `[(k-1)(k-2)/2 + (4/9)(k-1)^3/P] / p^2`.
pub fn constant_c_k(k: usize, truncation_prime: u64, keep_factors: bool) -> Result<EulerProductResult> {
    if k < 3 {
        return Err(Error::input(format!("progression constants need k >= 3, got {k}")));
    }
    if k > 6 {
        return Err(Error::input(format!("k = {k} exceeds the supported range (exact counts overflow)")));
    }
    let km1 = (k - 1) as f64;
    let min_p = 17f64.max(km1 * km1 * km1) as u64;
    if truncation_prime < min_p {
        return Err(Error::input(format!(
            "truncation prime {truncation_prime} below the minimum {min_p} required by the tail bound"
        )));
    }
    let mut factors = Vec::new();
    for p in primes_up_to(truncation_prime) {
        factors.push((p, local_factor_ap(p, k)?.ln()));
    }
    let coeff = km1 * (km1 - 1.0) / 2.0 + (4.0 / 9.0) * km1 * km1 * km1 / truncation_prime as f64;
    let tail = coeff * prime_square_tail(truncation_prime);
    Ok(product_from_logs(factors, truncation_prime, tail, keep_factors))
}

/// Twin-pattern constant `prod_p local_factor_twin(p)` truncated at
/// `p <= truncation_prime`.
///
/// Tail: `|log(1 - 1/(p-1)^2)| = log(1 + 1/(p(p-2))) <= (1 - 2/P)^{-1}/p^2`.
pub fn constant_b2(truncation_prime: u64, keep_factors: bool) -> Result<EulerProductResult> {
    if truncation_prime < 3 {
        return Err(Error::input(format!("truncation prime {truncation_prime} must be at least 3")));
    }
    let mut factors = Vec::new();
    for p in primes_up_to(truncation_prime) {
        factors.push((p, local_factor_twin(p)?.ln()));
    }
    let coeff = 1.0 / (1.0 - 2.0 / truncation_prime as f64);
    let tail = coeff * prime_square_tail(truncation_prime);
    Ok(product_from_logs(factors, truncation_prime, tail, keep_factors))
}

fn factorize(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Binary additive constant `G_2(n) = B_2 prod_{p | n, p >= 3} (p-1)/(p-2)`,
/// zero for odd `n` (the local factor at 2 vanishes there).
pub fn constant_g2(n: u64, truncation_prime: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::input(format!("n = {n} must be at least 2")));
    }
    if n % 2 == 1 {
        return Ok(0.0);
    }
    let b2 = constant_b2(truncation_prime, false)?;
    let mut value = b2.value;
    for p in factorize(n) {
        if p >= 3 {
            value *= (p - 1) as f64 / (p - 2) as f64;
        }
    }
    Ok(value)
}

/// Ternary additive constant `G_3(n)`: the product of
/// [`local_factor_ternary`] over `p <= truncation_prime`, with the factors
/// at primes dividing `n` beyond the truncation included exactly.
pub fn constant_g3(n: u64, truncation_prime: u64, keep_factors: bool) -> Result<EulerProductResult> {
    if n < 3 {
        return Err(Error::input(format!("n = {n} must be at least 3")));
    }
    if truncation_prime < 17 {
        return Err(Error::input("truncation prime must be at least 17"));
    }
    let mut factors = Vec::new();
    let mut zero = false;
    for p in primes_up_to(truncation_prime) {
        let f = local_factor_ternary(p, n)?;
        if f.is_zero() {
            zero = true;
            break;
        }
        factors.push((p, f.ln()));
    }
    if zero {
        return Ok(EulerProductResult {
            value: 0.0,
            truncation_prime,
            tail_bound: 0.0,
            factor_log: keep_factors.then_some(Vec::new()),
        });
    }
    // Large prime factors of n sit outside the truncation but their factors
    // differ from 1 by ~1/p^2 only when p | n; include them exactly.
    for p in factorize(n) {
        if p > truncation_prime {
            factors.push((p, local_factor_ternary(p, n)?.ln()));
        }
    }
    // For p not dividing n the factor is 1 + 1/(p-1)^3 <= 1 + 2/p^3.
    let tail = 2.0 * prime_square_tail(truncation_prime) / truncation_prime as f64;
    Ok(product_from_logs(factors, truncation_prime, tail, keep_factors))
}
