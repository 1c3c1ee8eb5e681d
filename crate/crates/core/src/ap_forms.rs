//! Multilinear progression forms and exact progression counting.
//!
//! `Lambda_k(f_0, ..., f_{k-1}) = E(prod_j f_j(x + j r) | x, r in Z/NZ)` is
//! the quantity whose size governs the number of k-term progressions
//! weighted by the `f_j`. Counting in integer sets is separate and exact:
//! no wraparound, spacing `r > 0` is the canonical notion of a nontrivial
//! progression.

use num_complex::Complex64;
use serde::Serialize;

use crate::budget::WorkBudgets;
use crate::tol::Kahan;
use crate::{CyclicFn, Error, Result};

/// Exact multilinear average over `(x, r)`.
///
/// Dispatches to a support-restricted loop when the first function is
/// sparse (as Mangoldt-weighted inputs are); both paths are term-for-term
/// identical sums, tested equal on dense inputs.
pub fn lambda_k(fs: &[CyclicFn], budgets: &WorkBudgets) -> Result<Complex64> {
    let k = fs.len();
    if k < 3 {
        return Err(Error::input(format!("lambda_k needs k >= 3, got {k}")));
    }
    let n = fs[0].modulus();
    for f in fs {
        if f.modulus() != n {
            return Err(Error::input(format!("modulus mismatch: {} vs {n}", f.modulus())));
        }
    }
    WorkBudgets::check("lambda_dense_n", n as u128, budgets.lambda_dense_n as u128)?;

    let support: Vec<usize> =
        (0..n).filter(|&x| fs[0].values()[x].norm_sqr() != 0.0).collect();
    if support.len() * 4 <= n {
        lambda_k_over_support(fs, &support)
    } else {
        let all: Vec<usize> = (0..n).collect();
        lambda_k_over_support(fs, &all)
    }
}

fn lambda_k_over_support(fs: &[CyclicFn], support: &[usize]) -> Result<Complex64> {
    let k = fs.len();
    let n = fs[0].modulus();
    let mut re = Kahan::default();
    let mut im = Kahan::default();
    let mut idx = vec![0usize; k];
    for r in 0..n {
        for &x in support {
            // idx[j] = (x + j r) mod n, maintained additively.
            let mut cur = x;
            let mut term = fs[0].values()[x];
            idx[0] = x;
            for j in 1..k {
                cur += r;
                if cur >= n {
                    cur -= n;
                }
                idx[j] = cur;
                term *= fs[j].values()[cur];
                if term.re == 0.0 && term.im == 0.0 {
                    break;
                }
            }
            re.add(term.re);
            im.add(term.im);
        }
    }
    Ok(Complex64::new(re.value(), im.value()) / (n as f64 * n as f64))
}

/// Spectral route for the trilinear form:
/// `Lambda_3(f, g, h) = sum_xi fhat(xi) ghat(-2 xi) hhat(xi)`.
///
/// Valid for every modulus; must agree with [`lambda_k`] to working
/// precision (asserted in tests and in the acceptance suite).
pub fn lambda3_spectral(f: &CyclicFn, g: &CyclicFn, h: &CyclicFn) -> Result<Complex64> {
    let n = f.modulus();
    if g.modulus() != n || h.modulus() != n {
        return Err(Error::input("modulus mismatch"));
    }
    let fh = crate::zmod::dft(f);
    let gh = crate::zmod::dft(g);
    let hh = crate::zmod::dft(h);
    let mut re = Kahan::default();
    let mut im = Kahan::default();
    for xi in 0..n as i64 {
        let term = fh.at(xi) * gh.at(-2 * xi) * hh.at(xi);
        re.add(term.re);
        im.add(term.im);
    }
    Ok(Complex64::new(re.value(), im.value()))
}

/// Modular inverse by the extended Euclid algorithm; `None` when
/// `gcd(a, n) != 1`.
pub fn mod_inverse(a: i64, n: i64) -> Option<i64> {
    let (mut old_r, mut r) = (a.rem_euclid(n), n);
    let (mut old_s, mut s) = (1i64, 0i64);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r == 1 {
        Some(old_s.rem_euclid(n))
    } else {
        None
    }
}

/// `Lambda_k` through the progression reparameterization used to prove the
/// generalized von Neumann bound: with the slot `j` fixed, every length-k
/// progression arises exactly `N^{k-3}` times as
///
/// ```text
/// a_i = sum_{i' != j} x_{i'} - (j - i) * sum_{i' != j} x_{i'} / (j - i'),
/// ```
///
/// the inverses `1/(j - i')` taken exactly in `Z/NZ`. Costs `O(N^{k-1})`;
/// this is the oracle route, kept for cross-checking the direct average.
pub fn lambda_k_reindexed(fs: &[CyclicFn], j: usize, budgets: &WorkBudgets) -> Result<Complex64> {
    let k = fs.len();
    if k < 3 {
        return Err(Error::input(format!("lambda_k needs k >= 3, got {k}")));
    }
    if j >= k {
        return Err(Error::input(format!("slot {j} out of range for k = {k}")));
    }
    let n = fs[0].modulus();
    for f in fs {
        if f.modulus() != n {
            return Err(Error::input("modulus mismatch"));
        }
    }
    if !crate::gowers::is_prime(n as u64) || n <= k {
        return Err(Error::input(format!("modulus {n} must be a prime larger than k = {k}")));
    }
    let needed = (n as u128).pow((k - 1) as u32);
    WorkBudgets::check("box_pairs", needed, budgets.box_pairs)?;

    let others: Vec<usize> = (0..k).filter(|&i| i != j).collect();
    // inv_coeff[m] = 1/(j - i'_m) mod n, exact.
    let inv_coeff: Vec<usize> = others
        .iter()
        .map(|&ip| {
            let diff = j as i64 - ip as i64;
            mod_inverse(diff, n as i64).expect("prime modulus larger than k") as usize
        })
        .collect();

    let mut re = Kahan::default();
    let mut im = Kahan::default();
    let mut xs = vec![0usize; k - 1];
    let tuples = (n as u64).pow((k - 1) as u32);
    for _ in 0..tuples {
        let s: usize = xs.iter().fold(0, |acc, &x| (acc + x) % n);
        let t: usize = xs.iter().zip(&inv_coeff).fold(0, |acc, (&x, &c)| (acc + x * c) % n);
        let mut term = Complex64::new(1.0, 0.0);
        for i in 0..k {
            // a_i = s - (j - i) t mod n.
            let jt = (j as i64 - i as i64).rem_euclid(n as i64) as usize;
            let a = (s + n * n - ((jt * t) % n)) % n;
            term *= fs[i].values()[a];
        }
        re.add(term.re);
        im.add(term.im);
        // Odometer over the k-1 free variables.
        for slot in (0..k - 1).rev() {
            xs[slot] += 1;
            if xs[slot] < n {
                break;
            }
            xs[slot] = 0;
        }
    }
    Ok(Complex64::new(re.value(), im.value()) / tuples as f64)
}

/// Result of exact progression counting in a subset of `[1, N]`.
#[derive(Debug, Clone, Serialize)]
pub struct APReport {
    /// Progression length.
    pub k: usize,
    /// Count with `r > 0` (or `r != 0` when symmetric counting was asked).
    pub count_nontrivial: u64,
    /// Count with `r = 0` (one per element).
    pub count_trivial: u64,
    /// First nontrivial progression in lexicographic `(n, r)` order.
    pub witness: Option<(u64, u64)>,
    /// Divisor `N^2` that turns counts into the cyclic-form normalization.
    pub normalization: u128,
    /// Whether `count_nontrivial` counted only positive spacings.
    pub distinct_r_positive: bool,
}

impl APReport {
    fn verify_witness(&self, member: impl Fn(u64) -> bool) -> Result<()> {
        if let Some((n, r)) = self.witness {
            if r == 0 {
                return Err(Error::Internal("witness has zero spacing".into()));
            }
            for j in 0..self.k as u64 {
                if !member(n + j * r) {
                    return Err(Error::Internal(format!("witness ({n}, {r}) leaves the set at step {j}")));
                }
            }
        }
        Ok(())
    }
}

fn membership_table(set: &[u64], bound: u64) -> Result<Vec<bool>> {
    let mut member = vec![false; bound as usize + 1];
    for &x in set {
        if x < 1 || x > bound {
            return Err(Error::input(format!("element {x} outside [1, {bound}]")));
        }
        member[x as usize] = true;
    }
    Ok(member)
}

/// Count the k-term progressions of `set` inside `[1, bound]`, over the
/// integers (no wraparound). `distinct_r_positive` selects the canonical
/// `r > 0` count; otherwise both signs are counted (twice the former, by
/// reversal symmetry).
pub fn count_aps(set: &[u64], bound: u64, k: usize, distinct_r_positive: bool) -> Result<APReport> {
    if k < 3 {
        return Err(Error::input(format!("progression length must be >= 3, got {k}")));
    }
    let member = membership_table(set, bound)?;
    let mut count = 0u64;
    let mut witness = None;
    for n in 1..=bound {
        if !member[n as usize] {
            continue;
        }
        let max_r = (bound - n) / (k as u64 - 1);
        'spacing: for r in 1..=max_r {
            for j in 1..k as u64 {
                if !member[(n + j * r) as usize] {
                    continue 'spacing;
                }
            }
            count += 1;
            if witness.is_none() {
                witness = Some((n, r));
            }
        }
    }
    let report = APReport {
        k,
        count_nontrivial: if distinct_r_positive { count } else { 2 * count },
        count_trivial: set.iter().filter(|&&x| member[x as usize]).count() as u64,
        witness,
        normalization: (bound as u128) * (bound as u128),
        distinct_r_positive,
    };
    report.verify_witness(|x| x <= bound && member[x as usize])?;
    Ok(report)
}

/// First k-term progression of `set` in lexicographic `(n, r)` order, with
/// `r > 0`, or `None` when the set has none.
pub fn find_ap(set: &[u64], k: usize) -> Result<Option<(u64, u64)>> {
    if k < 3 {
        return Err(Error::input(format!("progression length must be >= 3, got {k}")));
    }
    let bound = set.iter().copied().max().unwrap_or(0);
    if bound == 0 {
        return Ok(None);
    }
    let member = membership_table(set, bound)?;
    for n in 1..=bound {
        if !member[n as usize] {
            continue;
        }
        let max_r = (bound - n) / (k as u64 - 1);
        'spacing: for r in 1..=max_r {
            for j in 1..k as u64 {
                if !member[(n + j * r) as usize] {
                    continue 'spacing;
                }
            }
            return Ok(Some((n, r)));
        }
    }
    Ok(None)
}

/// Probability over `(a, b) in (Z/NZ)^2` that the density of `A` on the
/// covering progression `P_ab = {a + b, a + 2b, ..., a + Mb}` is at least
/// half the global density (multiset counting, `b = 0` included).
///
/// Requires prime `N`: the covering-multiplicity argument that makes this
/// statistic meaningful counts every progression equally often only then.
pub fn varnavides_statistic(set: &[usize], n: usize, m: usize, budgets: &WorkBudgets) -> Result<f64> {
    if !crate::gowers::is_prime(n as u64) {
        return Err(Error::input(format!("modulus {n} must be prime")));
    }
    if m == 0 || m > n {
        return Err(Error::input(format!("sub-progression length {m} must lie in [1, {n}]")));
    }
    WorkBudgets::check("lambda_dense_n", n as u128, budgets.lambda_dense_n as u128)?;
    let mut member = vec![false; n];
    for &x in set {
        if x >= n {
            return Err(Error::input(format!("residue {x} out of range")));
        }
        member[x] = true;
    }
    let size = member.iter().filter(|&&b| b).count();
    let threshold = size as f64 / n as f64 / 2.0;

    let mut good = 0u64;
    for b in 0..n {
        for a in 0..n {
            let mut hits = 0usize;
            let mut cur = a;
            for _ in 0..m {
                cur += b;
                if cur >= n {
                    cur -= n;
                }
                if member[cur] {
                    hits += 1;
                }
            }
            // A progression must actually meet the set; this only matters
            // for the degenerate empty-set case where the bar is zero.
            if hits > 0 && hits as f64 / m as f64 >= threshold {
                good += 1;
            }
        }
    }
    Ok(good as f64 / (n as f64 * n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::random_complex;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Plain quadratic double loop, the oracle for all Lambda_k paths.
    fn lambda_oracle(fs: &[CyclicFn]) -> Complex64 {
        let n = fs[0].modulus();
        let mut sum = Complex64::new(0.0, 0.0);
        for x in 0..n {
            for r in 0..n {
                let mut term = Complex64::new(1.0, 0.0);
                for (j, f) in fs.iter().enumerate() {
                    term *= f.value(x + j * r);
                }
                sum += term;
            }
        }
        sum / (n * n) as f64
    }

    #[test]
    fn constant_inputs_give_c_to_the_k() {
        let b = WorkBudgets::default();
        let f = CyclicFn::constant(11, c(0.5)).unwrap();
        let got = lambda_k(&[f.clone(), f.clone(), f], &b).unwrap();
        assert!((got - c(0.125)).norm() < 1e-12);
    }

    #[test]
    fn small_indicator_case_only_diagonal() {
        let b = WorkBudgets::default();
        let f = CyclicFn::indicator(5, [1, 2]).unwrap();
        let got = lambda_k(&[f.clone(), f.clone(), f.clone()], &b).unwrap();
        assert!((got - c(0.08)).norm() < 1e-12);
        assert!((lambda_oracle(&[f.clone(), f.clone(), f]) - c(0.08)).norm() < 1e-12);
    }

    #[test]
    fn spectral_route_matches_direct() {
        let b = WorkBudgets::default();
        for seed in 0..10 {
            let f = random_complex(101, 3 * seed).unwrap();
            let g = random_complex(101, 3 * seed + 1).unwrap();
            let h = random_complex(101, 3 * seed + 2).unwrap();
            let direct = lambda_k(&[f.clone(), g.clone(), h.clone()], &b).unwrap();
            let spectral = lambda3_spectral(&f, &g, &h).unwrap();
            assert!((direct - spectral).norm() <= 1e-9 * (1.0 + direct.norm()), "{direct} vs {spectral}");
        }
        // Also on a composite modulus; the identity needs no primality.
        let f = random_complex(24, 90).unwrap();
        let d = lambda_k(&[f.clone(), f.clone(), f.clone()], &b).unwrap();
        let s = lambda3_spectral(&f, &f, &f).unwrap();
        assert!((d - s).norm() < 1e-9);
    }

    #[test]
    fn sparse_path_matches_dense_loop() {
        let b = WorkBudgets::default();
        for &n in &[64usize, 101, 512] {
            // First slot supported on very few points.
            let f = CyclicFn::indicator(n, [1, 5, 17 % n]).unwrap();
            let g = random_complex(n, n as u64).unwrap();
            let h = random_complex(n, n as u64 + 1).unwrap();
            let got = lambda_k(&[f.clone(), g.clone(), h.clone()], &b).unwrap();
            let want = lambda_oracle(&[f, g, h]);
            assert!((got - want).norm() < 1e-9, "N = {n}");
        }
    }

    #[test]
    fn nonnegative_inputs_give_nonnegative_values() {
        let b = WorkBudgets::default();
        let f = crate::generators::random_unit_interval(31, 5).unwrap();
        let v = lambda_k(&[f.clone(), f.clone(), f], &b).unwrap();
        assert!(v.re >= 0.0 && v.im == 0.0);
    }

    #[test]
    fn multilinearity_in_each_slot() {
        let b = WorkBudgets::default();
        let n = 31;
        let f = random_complex(n, 11).unwrap();
        let g = random_complex(n, 12).unwrap();
        let h = random_complex(n, 13).unwrap();
        let e = random_complex(n, 14).unwrap();
        let alpha = Complex64::new(0.7, -0.2);
        for slot in 0..3 {
            let mut lhs_args: Vec<CyclicFn> = vec![f.clone(), g.clone(), h.clone()];
            lhs_args[slot] = lhs_args[slot].scale(alpha).add(&e).unwrap();
            let lhs = lambda_k(&lhs_args, &b).unwrap();

            let mut a1: Vec<CyclicFn> = vec![f.clone(), g.clone(), h.clone()];
            let mut a2 = a1.clone();
            a2[slot] = e.clone();
            a1[slot] = a1[slot].clone();
            let rhs = lambda_k(&a1, &b).unwrap() * alpha + lambda_k(&a2, &b).unwrap();
            assert!((lhs - rhs).norm() < 1e-9, "slot {slot}");
        }
    }

    #[test]
    fn reindexed_route_matches_direct() {
        let b = WorkBudgets::default();
        // k = 3 on two primes, every slot.
        for &n in &[7usize, 11] {
            let fs: Vec<CyclicFn> = (0..3).map(|s| random_complex(n, 40 + s).unwrap()).collect();
            let direct = lambda_k(&fs, &b).unwrap();
            for j in 0..3 {
                let got = lambda_k_reindexed(&fs, j, &b).unwrap();
                assert!((got - direct).norm() < 1e-9, "N = {n}, j = {j}");
            }
        }
        // k = 4 once.
        let fs: Vec<CyclicFn> = (0..4).map(|s| random_complex(11, 80 + s).unwrap()).collect();
        let direct = lambda_k(&fs, &b).unwrap();
        let got = lambda_k_reindexed(&fs, 2, &b).unwrap();
        assert!((got - direct).norm() < 1e-9);
    }

    #[test]
    fn mod_inverse_is_exact() {
        for n in [5i64, 7, 101] {
            for a in 1..n {
                let inv = mod_inverse(a, n).unwrap();
                assert_eq!((a * inv).rem_euclid(n), 1);
            }
        }
        assert!(mod_inverse(6, 9).is_none());
    }

    #[test]
    fn count_aps_full_interval() {
        let set: Vec<u64> = (1..=5).collect();
        let report = count_aps(&set, 5, 3, true).unwrap();
        assert_eq!(report.count_nontrivial, 4);
        assert_eq!(report.count_trivial, 5);
        assert_eq!(report.witness, Some((1, 1)));
        assert_eq!(report.normalization, 25);

        let sym = count_aps(&set, 5, 3, false).unwrap();
        assert_eq!(sym.count_nontrivial, 8);
    }

    #[test]
    fn count_aps_empty_and_powers_of_two() {
        assert_eq!(count_aps(&[], 10, 3, true).unwrap().count_nontrivial, 0);
        let pows: Vec<u64> = (0..7).map(|i| 1u64 << i).collect();
        let report = count_aps(&pows, 64, 3, true).unwrap();
        assert_eq!(report.count_nontrivial, 0);
        assert!(report.witness.is_none());
    }

    #[test]
    fn count_aps_rejects_out_of_range() {
        assert!(count_aps(&[0], 10, 3, true).is_err());
        assert!(count_aps(&[11], 10, 3, true).is_err());
        assert!(count_aps(&[1, 2, 3], 10, 2, true).is_err());
    }

    #[test]
    fn find_ap_first_witness_and_absence() {
        assert_eq!(find_ap(&[1, 2, 3], 3).unwrap(), Some((1, 1)));
        assert_eq!(find_ap(&[1, 2, 4, 5], 3).unwrap(), None);
        let report = count_aps(&[1, 2, 4, 5], 5, 3, true).unwrap();
        assert_eq!(report.count_nontrivial, 0);
    }

    #[test]
    fn find_ap_in_small_primes() {
        let primes: Vec<u64> = (2..=30).filter(|&n| crate::gowers::is_prime(n)).collect();
        let witness = find_ap(&primes, 4).unwrap().expect("4-term progression exists");
        // Verified against full enumeration: (5, 6) -> 5, 11, 17, 23.
        assert_eq!(witness, (5, 6));
        for j in 0..4 {
            assert!(primes.contains(&(witness.0 + j * witness.1)));
        }
    }

    #[test]
    fn varnavides_extremes() {
        let b = WorkBudgets::default();
        let all: Vec<usize> = (0..11).collect();
        assert!((varnavides_statistic(&all, 11, 3, &b).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(varnavides_statistic(&[], 11, 3, &b).unwrap(), 0.0);
        assert!(varnavides_statistic(&[1], 12, 3, &b).is_err());
    }

    #[test]
    fn varnavides_exact_small_case() {
        // N = 11, M = 3, A = {1,...,6}: full 121-pair enumeration gives
        // 108/121 (13 pairs see no element of A at all; any hit clears the
        // delta/2 bar since 1/3 > 3/11).
        let b = WorkBudgets::default();
        let set: Vec<usize> = (1..=6).collect();
        let got = varnavides_statistic(&set, 11, 3, &b).unwrap();
        assert!((got - 108.0 / 121.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn varnavides_lower_bound() {
        let b = WorkBudgets::default();
        for seed in 0..10 {
            let set: Vec<usize> =
                crate::generators::random_subset(30, 0.4, seed).iter().map(|&x| x as usize % 31).collect();
            let unique: std::collections::BTreeSet<usize> = set.into_iter().collect();
            let set: Vec<usize> = unique.into_iter().collect();
            let delta = set.len() as f64 / 31.0;
            let stat = varnavides_statistic(&set, 31, 5, &b).unwrap();
            assert!(stat >= delta / 2.0 - 1e-12, "stat {stat} vs delta/2 {}", delta / 2.0);
        }
    }

    #[test]
    fn cyclic_witnesses_transfer_to_integer_progressions() {
        // Embed A in Z/pZ with 2N < p <= 4N; a cyclic witness with
        // n in [1, N] and r <= N is a genuine integer progression.
        let set: Vec<u64> = vec![3, 5, 7, 11, 15, 19];
        let n_bound = 19u64;
        let p = 41usize; // prime in (38, 76]
        let f = CyclicFn::indicator(p, set.iter().map(|&x| x as usize)).unwrap();
        let mut cyclic_witnesses = Vec::new();
        for x in 0..p {
            for r in 1..p {
                if (0..3).all(|j| f.value(x + j * r).re > 0.5) {
                    cyclic_witnesses.push((x, r));
                }
            }
        }
        assert!(!cyclic_witnesses.is_empty());
        for (x, r) in cyclic_witnesses {
            if x >= 1 && x as u64 <= n_bound && r as u64 <= n_bound && x + 2 * r < p {
                for j in 0..3 {
                    assert!(set.contains(&((x + j * r) as u64)));
                }
            }
        }
    }
}
