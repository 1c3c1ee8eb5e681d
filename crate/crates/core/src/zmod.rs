//! Functions on `Z/NZ` and the discrete Fourier transform.
//!
//! Normalization is fixed once for the whole crate: the forward transform
//! averages,
//!
//! ```text
//! fhat(xi) = (1/N) sum_x f(x) e_N(-x xi),      e_N(x) = exp(2 pi i x / N),
//! ```
//!
//! and inversion sums, `f(x) = sum_xi fhat(xi) e_N(x xi)`. With this choice
//! the Plancherel identity reads `||f||_{L^2} = ||fhat||_{l^2}` where `L^p`
//! norms average and spectral `l^p` norms use plain sums.

use std::io::{Read, Write};
use std::sync::Mutex;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::tol::Kahan;
use crate::{Error, Result, Tolerance};

/// `e_N(k) = exp(2 pi i k / N)` for an integer residue `k`.
pub fn unit_root(n: usize, k: i64) -> Complex64 {
    let n_i = n as i64;
    let k = k.rem_euclid(n_i);
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)
}

/// Complex-valued function on `Z/NZ`, indexed by residue `0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicFn {
    n: usize,
    values: Vec<Complex64>,
}

/// Fourier coefficient table, indexed by frequency `0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    n: usize,
    coeffs: Vec<Complex64>,
}

/// Norm exponents supported on both sides of the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lp {
    One,
    Two,
    Four,
    Infinity,
}

impl Lp {
    /// Parse `"1" | "2" | "4" | "inf"`.
    pub fn parse(s: &str) -> Result<Lp> {
        match s {
            "1" => Ok(Lp::One),
            "2" => Ok(Lp::Two),
            "4" => Ok(Lp::Four),
            "inf" | "oo" => Ok(Lp::Infinity),
            other => Err(Error::input(format!("unsupported exponent {other:?}; use 1, 2, 4 or inf"))),
        }
    }
}

fn check_finite(values: &[Complex64]) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::input(format!("non-finite value at index {i}")));
    }
    Ok(())
}

impl CyclicFn {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("modulus must be at least 1"));
        }
        check_finite(&values)?;
        Ok(CyclicFn { n: values.len(), values })
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> Complex64) -> Result<Self> {
        Self::new((0..n).map(f).collect())
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn constant(n: usize, c: Complex64) -> Result<Self> {
        Self::new(vec![c; n.max(0)])
    }

    /// Indicator of a set of residues.
    pub fn indicator(n: usize, set: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut values = vec![Complex64::new(0.0, 0.0); n];
        for x in set {
            if x >= n {
                return Err(Error::input(format!("residue {x} out of range for modulus {n}")));
            }
            values[x] = Complex64::new(1.0, 0.0);
        }
        Self::new(values)
    }

    /// Point mass at residue 0.
    pub fn delta(n: usize) -> Result<Self> {
        Self::indicator(n, [0])
    }

    pub fn modulus(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, x: usize) -> Complex64 {
        self.values[x % self.n]
    }

    /// Sup of `|f|`.
    pub fn sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Whether the function qualifies as bounded (`|f| <= 1` up to roundoff).
    pub fn is_bounded(&self) -> bool {
        self.sup() <= 1.0 + 1e-12
    }

    pub fn require_bounded(&self, who: &str) -> Result<()> {
        if self.is_bounded() {
            Ok(())
        } else {
            Err(Error::input(format!("{who}: function exceeds the unit bound (sup = {})", self.sup())))
        }
    }

    fn require_same_modulus(&self, other: &CyclicFn) -> Result<()> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(Error::input(format!("modulus mismatch: {} vs {}", self.n, other.n)))
        }
    }

    /// `E(f) = (1/N) sum_x f(x)`.
    pub fn expectation(&self) -> Complex64 {
        let mut re = Kahan::default();
        let mut im = Kahan::default();
        for v in &self.values {
            re.add(v.re);
            im.add(v.im);
        }
        Complex64::new(re.value(), im.value()) / self.n as f64
    }

    /// `T^h f(x) = f(x + h mod N)`.
    pub fn shift(&self, h: usize) -> CyclicFn {
        let h = h % self.n;
        let mut values = Vec::with_capacity(self.n);
        values.extend_from_slice(&self.values[h..]);
        values.extend_from_slice(&self.values[..h]);
        CyclicFn { n: self.n, values }
    }

    /// Multiply by the character `e_N(x xi)`.
    pub fn modulate(&self, xi: usize) -> CyclicFn {
        let chi = character(self.n, xi % self.n).expect("reduced frequency is in range");
        self.mul(&chi).expect("same modulus by construction")
    }

    pub fn add(&self, other: &CyclicFn) -> Result<CyclicFn> {
        self.require_same_modulus(other)?;
        CyclicFn::new(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &CyclicFn) -> Result<CyclicFn> {
        self.require_same_modulus(other)?;
        CyclicFn::new(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    pub fn mul(&self, other: &CyclicFn) -> Result<CyclicFn> {
        self.require_same_modulus(other)?;
        CyclicFn::new(self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect())
    }

    pub fn conj(&self) -> CyclicFn {
        CyclicFn { n: self.n, values: self.values.iter().map(|v| v.conj()).collect() }
    }

    pub fn scale(&self, c: Complex64) -> CyclicFn {
        CyclicFn { n: self.n, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// `<f, g> = E(f conj(g))`.
    pub fn inner_product(&self, other: &CyclicFn) -> Result<Complex64> {
        self.require_same_modulus(other)?;
        let mut re = Kahan::default();
        let mut im = Kahan::default();
        for (a, b) in self.values.iter().zip(&other.values) {
            let p = a * b.conj();
            re.add(p.re);
            im.add(p.im);
        }
        Ok(Complex64::new(re.value(), im.value()) / self.n as f64)
    }

    /// Averaged `L^p` norm, `E(|f|^p)^(1/p)`.
    pub fn lp_norm(&self, p: Lp) -> f64 {
        let mut acc = Kahan::default();
        match p {
            Lp::One => {
                for v in &self.values {
                    acc.add(v.norm());
                }
                acc.value() / self.n as f64
            }
            Lp::Two => {
                for v in &self.values {
                    acc.add(v.norm_sqr());
                }
                (acc.value() / self.n as f64).max(0.0).sqrt()
            }
            Lp::Four => {
                for v in &self.values {
                    let s = v.norm_sqr();
                    acc.add(s * s);
                }
                (acc.value() / self.n as f64).max(0.0).powf(0.25)
            }
            Lp::Infinity => self.sup(),
        }
    }
}

impl Spectrum {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::input("modulus must be at least 1"));
        }
        check_finite(&coeffs)?;
        Ok(Spectrum { n: coeffs.len(), coeffs })
    }

    pub fn modulus(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient at a frequency given as a (possibly negative) integer.
    pub fn at(&self, xi: i64) -> Complex64 {
        self.coeffs[xi.rem_euclid(self.n as i64) as usize]
    }

    /// Plain-sum spectral norm, `(sum_xi |fhat(xi)|^p)^(1/p)`.
    pub fn lp_norm(&self, p: Lp) -> f64 {
        let mut acc = Kahan::default();
        match p {
            Lp::One => {
                for v in &self.coeffs {
                    acc.add(v.norm());
                }
                acc.value()
            }
            Lp::Two => {
                for v in &self.coeffs {
                    acc.add(v.norm_sqr());
                }
                acc.value().max(0.0).sqrt()
            }
            Lp::Four => {
                for v in &self.coeffs {
                    let s = v.norm_sqr();
                    acc.add(s * s);
                }
                acc.value().max(0.0).powf(0.25)
            }
            Lp::Infinity => self.coeffs.iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }

    /// Largest coefficient magnitude together with its frequency; ties go to
    /// the smallest frequency.
    pub fn max_coeff(&self) -> (usize, f64) {
        let mut best = (0usize, self.coeffs[0].norm());
        for (xi, c) in self.coeffs.iter().enumerate().skip(1) {
            let m = c.norm();
            if m > best.1 {
                best = (xi, m);
            }
        }
        best
    }
}

/// The character `x -> e_N(x xi)`.
pub fn character(n: usize, xi: usize) -> Result<CyclicFn> {
    if xi >= n {
        return Err(Error::input(format!("frequency {xi} out of range for modulus {n}")));
    }
    CyclicFn::from_fn(n, |x| {
        let k = ((x as u128 * xi as u128) % n as u128) as i64;
        unit_root(n, k)
    })
}

// One planner per process; rustfft caches twiddles per length, and planning
// is not thread-safe.
fn with_planner<T>(f: impl FnOnce(&mut FftPlanner<f64>) -> T) -> T {
    static PLANNER: Mutex<Option<FftPlanner<f64>>> = Mutex::new(None);
    let mut guard = PLANNER.lock().unwrap_or_else(|e| e.into_inner());
    f(guard.get_or_insert_with(FftPlanner::new))
}

/// Forward transform, `fhat(xi) = (1/N) sum_x f(x) e_N(-x xi)`.
///
/// Uses an exact-length FFT for any `N` (including primes); the result is
/// oracle-checked against the naive quadratic sum in the test suite.
pub fn dft(f: &CyclicFn) -> Spectrum {
    let mut buf = f.values.clone();
    with_planner(|p| p.plan_fft_forward(buf.len())).process(&mut buf);
    let scale = 1.0 / f.n as f64;
    for v in &mut buf {
        *v *= scale;
    }
    Spectrum { n: f.n, coeffs: buf }
}

/// Inversion, `f(x) = sum_xi fhat(xi) e_N(x xi)`.
pub fn idft(s: &Spectrum) -> CyclicFn {
    let mut buf = s.coeffs.clone();
    with_planner(|p| p.plan_fft_inverse(buf.len())).process(&mut buf);
    CyclicFn { n: s.n, values: buf }
}

/// Check the Plancherel identity for one function; an `Internal` error means
/// the transform itself is broken.
pub fn plancherel_check(f: &CyclicFn, tol: Tolerance) -> Result<()> {
    let l2 = f.lp_norm(Lp::Two);
    let s2 = dft(f).lp_norm(Lp::Two);
    if (l2 - s2).abs() <= tol.margin(1.0 + l2) {
        Ok(())
    } else {
        Err(Error::Internal(format!("Plancherel defect {} at N = {}", (l2 - s2).abs(), f.n)))
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CyclicFnWire {
    n: u64,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl CyclicFn {
    pub fn to_json(&self) -> String {
        let wire = CyclicFnWire {
            n: self.n as u64,
            re: self.values.iter().map(|v| v.re).collect(),
            im: self.values.iter().map(|v| v.im).collect(),
        };
        serde_json::to_string(&wire).expect("plain arrays always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let wire: CyclicFnWire = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let n = wire.n as usize;
        if wire.re.len() != n || wire.im.len() != n {
            return Err(Error::Parse(format!(
                "value tables have lengths {}/{} but n = {n}",
                wire.re.len(),
                wire.im.len()
            )));
        }
        CyclicFn::new(wire.re.iter().zip(&wire.im).map(|(&re, &im)| Complex64::new(re, im)).collect())
    }

    /// Binary layout: `u64` modulus, then `2N` little-endian `f64` values
    /// interleaved as `(re, im)` per residue. Round trips are bit-exact.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let mut head = [0u8; 8];
        r.read_exact(&mut head)?;
        let n = u64::from_le_bytes(head);
        if n == 0 {
            return Err(Error::Parse("modulus 0 in binary header".into()));
        }
        let n = usize::try_from(n).map_err(|_| Error::Parse("modulus too large".into()))?;
        let mut values = Vec::with_capacity(n);
        let mut buf = [0u8; 16];
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
            values.push(Complex64::new(re, im));
        }
        CyclicFn::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Naive quadratic transform, the oracle for the FFT path.
    fn naive_dft(f: &CyclicFn) -> Spectrum {
        let n = f.modulus();
        let coeffs = (0..n)
            .map(|xi| {
                let mut acc = Complex64::new(0.0, 0.0);
                for x in 0..n {
                    acc += f.value(x) * unit_root(n, -((x * xi) as i64));
                }
                acc / n as f64
            })
            .collect();
        Spectrum::new(coeffs).unwrap()
    }

    fn seeded(n: usize, seed: u64) -> CyclicFn {
        crate::generators::random_complex(n, seed).unwrap()
    }

    #[test]
    fn expectation_of_constant() {
        let f = CyclicFn::constant(7, c(1.0, 0.0)).unwrap();
        assert_eq!(f.expectation(), c(1.0, 0.0));
    }

    #[test]
    fn expectation_of_indicator() {
        let f = CyclicFn::indicator(5, [1, 2]).unwrap();
        assert!((f.expectation() - c(0.4, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn full_character_sum_vanishes() {
        let f = character(8, 1).unwrap();
        assert!(f.expectation().norm() < 1e-12);
    }

    #[test]
    fn character_values() {
        let chi0 = character(4, 0).unwrap();
        assert!(chi0.values().iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-12));

        let chi1 = character(4, 1).unwrap();
        let expect = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (v, e) in chi1.values().iter().zip(expect) {
            assert!((v - e).norm() < 1e-12);
        }

        let chi3 = character(6, 3).unwrap();
        for (x, v) in chi3.values().iter().enumerate() {
            let sign = if x % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v - c(sign, 0.0)).norm() < 1e-12);
        }

        assert!(chi1.values().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        assert!(character(4, 4).is_err());
    }

    #[test]
    fn dft_of_point_mass_is_flat() {
        let s = dft(&CyclicFn::delta(5).unwrap());
        assert!(s.coeffs().iter().all(|v| (v - c(0.2, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn dft_of_constant_concentrates_at_zero() {
        let s = dft(&CyclicFn::constant(9, c(0.3, -0.7)).unwrap());
        assert!((s.coeffs()[0] - c(0.3, -0.7)).norm() < 1e-12);
        assert!(s.coeffs()[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn fft_matches_naive_oracle_at_prime_length() {
        let f = seeded(101, 7);
        let fast = dft(&f);
        let slow = naive_dft(&f);
        let tol = Tolerance::default();
        for (a, b) in fast.coeffs().iter().zip(slow.coeffs()) {
            assert!(tol.close_c(*a, *b), "{a} vs {b}");
        }
    }

    #[test]
    fn inversion_round_trip() {
        for &n in &[1usize, 2, 5, 64, 101] {
            let f = seeded(n, n as u64);
            let back = idft(&dft(&f));
            let diff = f.sub(&back).unwrap().lp_norm(Lp::Two);
            assert!(diff <= 1e-9 * (1.0 + f.lp_norm(Lp::Two)), "N = {n}: {diff}");
        }
    }

    #[test]
    fn idft_of_single_coefficient_is_constant() {
        let mut coeffs = vec![c(0.0, 0.0); 6];
        coeffs[0] = c(1.0, 0.0);
        let f = idft(&Spectrum::new(coeffs).unwrap());
        assert!(f.values().iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn dft_idft_recovers_point_mass() {
        let f = CyclicFn::delta(5).unwrap();
        let back = idft(&dft(&f));
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn lp_norms_of_indicator() {
        let f = CyclicFn::indicator(5, [1, 2]).unwrap();
        assert!((f.lp_norm(Lp::One) - 0.4).abs() < 1e-15);
        assert!((f.lp_norm(Lp::Two) - 0.4f64.sqrt()).abs() < 1e-15);
        assert!((f.lp_norm(Lp::Infinity) - 1.0).abs() < 1e-15);

        let ones = CyclicFn::constant(6, c(1.0, 0.0)).unwrap();
        for p in [Lp::One, Lp::Two, Lp::Four, Lp::Infinity] {
            assert!((ones.lp_norm(p) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn plancherel_on_random_input() {
        let f = seeded(64, 3);
        assert!(plancherel_check(&f, Tolerance::default()).is_ok());
        let l2 = f.lp_norm(Lp::Two);
        let s2 = dft(&f).lp_norm(Lp::Two);
        assert!((l2 - s2).abs() <= 1e-9 * (1.0 + l2));
    }

    #[test]
    fn spectral_norm_chain() {
        // l_inf <= l_4 <= sqrt(l_inf * l_2) for any spectrum.
        for seed in 0..20 {
            let f = seeded(48, 1000 + seed);
            let s = dft(&f);
            let linf = s.lp_norm(Lp::Infinity);
            let l4 = s.lp_norm(Lp::Four);
            let l2 = s.lp_norm(Lp::Two);
            assert!(linf <= l4 + 1e-9);
            assert!(l4 <= (linf * l2).sqrt() + 1e-9);
        }
    }

    #[test]
    fn shift_identities() {
        let f = seeded(33, 5);
        assert_eq!(f.shift(0), f);
        let h = 13;
        let back = f.shift(h).shift(33 - h);
        for (a, b) in back.values().iter().zip(f.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn modulation_translates_the_spectrum() {
        let f = seeded(32, 11);
        let xi0 = 5usize;
        let g = f.modulate(xi0);
        let sf = dft(&f);
        let sg = dft(&g);
        for xi in 0..32i64 {
            let a = sg.at(xi).norm();
            let b = sf.at(xi - xi0 as i64).norm();
            assert!((a - b).abs() < 1e-9, "xi = {xi}");
        }
    }

    #[test]
    fn conjugation_reflects_the_spectrum() {
        let f = seeded(21, 17);
        let sc = dft(&f.conj());
        let s = dft(&f);
        for xi in 0..21i64 {
            assert!((sc.at(xi) - s.at(-xi).conj()).norm() < 1e-9);
        }
    }

    #[test]
    fn dft_is_linear() {
        let f = seeded(30, 1);
        let g = seeded(30, 2);
        let a = c(0.3, -1.1);
        let lhs = dft(&f.scale(a).add(&g).unwrap());
        let rhs_f = dft(&f);
        let rhs_g = dft(&g);
        for xi in 0..30 {
            let want = rhs_f.coeffs()[xi] * a + rhs_g.coeffs()[xi];
            assert!((lhs.coeffs()[xi] - want).norm() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(CyclicFn::new(vec![]).is_err());
        assert!(CyclicFn::new(vec![c(f64::NAN, 0.0)]).is_err());
        assert!(CyclicFn::new(vec![c(0.0, f64::INFINITY)]).is_err());
    }

    #[test]
    fn mismatched_moduli_rejected() {
        let f = CyclicFn::constant(4, c(1.0, 0.0)).unwrap();
        let g = CyclicFn::constant(5, c(1.0, 0.0)).unwrap();
        assert!(f.add(&g).is_err());
        assert!(f.inner_product(&g).is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = seeded(17, 23);
        let back = CyclicFn::from_json(&f.to_json()).unwrap();
        assert_eq!(f, back);
        assert!(CyclicFn::from_json("{\"n\": 3, \"re\": [1.0], \"im\": [0.0, 0.0, 0.0]}").is_err());
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let f = seeded(19, 29);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 2 * 19 * 8);
        let back = CyclicFn::read_binary(&mut buf.as_slice()).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn bounded_tag() {
        let f = CyclicFn::constant(4, c(0.6, 0.8)).unwrap();
        assert!(f.is_bounded());
        let g = CyclicFn::constant(4, c(1.2, 0.0)).unwrap();
        assert!(!g.is_bounded());
        assert!(g.require_bounded("test").is_err());
    }
}
