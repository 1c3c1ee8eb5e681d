//! Box inner products and norms on product sets, uniformity norms `U^d` on
//! `Z/NZ`, the van der Corput and generalized von Neumann bounds, and the
//! cubic dual function.
//!
//! The `U^d` norms are evaluated through the recursive definition
//!
//! ```text
//! ||f||_{U^1} = |E(f)|,
//! ||f||_{U^{d+1}}^{2^{d+1}} = E_h ||f(.+h) conj(f)||_{U^d}^{2^d},
//! ```
//!
//! which costs `O(N^d)` instead of the `O(N^{d+1})` full cube average; the
//! two routes are equated in the test suite for small `N`.

use num_complex::Complex64;

use crate::budget::WorkBudgets;
use crate::tol::Kahan;
use crate::{ap_forms, CyclicFn, Error, Result, Tolerance};

/// Dense complex kernel on a product set `A_1 x ... x A_d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxKernel {
    sizes: Vec<usize>,
    values: Vec<Complex64>,
}

impl BoxKernel {
    pub fn new(sizes: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::input("kernel needs at least one axis"));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::input("kernel axes must be non-empty"));
        }
        let total: usize = sizes.iter().product();
        if values.len() != total {
            return Err(Error::input(format!("kernel has {} values but the axes give {total}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::input(format!("non-finite kernel value at index {i}")));
        }
        Ok(BoxKernel { sizes, values })
    }

    pub fn from_fn(sizes: &[usize], mut f: impl FnMut(&[usize]) -> Complex64) -> Result<Self> {
        let total: usize = sizes.iter().product();
        let mut coords = vec![0usize; sizes.len()];
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            values.push(f(&coords));
            for axis in (0..sizes.len()).rev() {
                coords[axis] += 1;
                if coords[axis] < sizes[axis] {
                    break;
                }
                coords[axis] = 0;
            }
        }
        BoxKernel::new(sizes.to_vec(), values)
    }

    /// Kernel `K(x_1, ..., x_d) = f(x_1 + ... + x_d)` on `(Z/NZ)^d`; its box
    /// norm is the `U^d` norm of `f`.
    pub fn from_cyclic(f: &CyclicFn, dims: usize) -> Result<Self> {
        let n = f.modulus();
        BoxKernel::from_fn(&vec![n; dims], |coords| {
            let s: usize = coords.iter().fold(0, |acc, &c| (acc + c) % n);
            f.value(s)
        })
    }

    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn total(&self) -> usize {
        self.values.len()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn strides(&self) -> Vec<usize> {
        let d = self.sizes.len();
        let mut strides = vec![1usize; d];
        for i in (0..d - 1).rev() {
            strides[i] = strides[i + 1] * self.sizes[i + 1];
        }
        strides
    }

    fn same_shape(&self, other: &BoxKernel) -> bool {
        self.sizes == other.sizes
    }

    pub fn add(&self, other: &BoxKernel) -> Result<BoxKernel> {
        if !self.same_shape(other) {
            return Err(Error::input("kernel shape mismatch"));
        }
        BoxKernel::new(self.sizes.clone(), self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, c: Complex64) -> BoxKernel {
        BoxKernel { sizes: self.sizes.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }
}

fn advance(coords: &mut [usize], sizes: &[usize]) {
    for axis in (0..sizes.len()).rev() {
        coords[axis] += 1;
        if coords[axis] < sizes[axis] {
            return;
        }
        coords[axis] = 0;
    }
}

/// Gowers inner product of a `2^d`-tuple of kernels: the average over pairs
/// of points `(x0, x1)` of the product of `K^(eps)` at the cube corner
/// `x^(eps)`, conjugating the factors with odd `|eps|`.
pub fn gowers_inner_product(kernels: &[BoxKernel], budgets: &WorkBudgets) -> Result<Complex64> {
    let first = kernels.first().ok_or_else(|| Error::input("no kernels"))?;
    let d = first.dims();
    if kernels.len() != 1 << d {
        return Err(Error::input(format!("expected {} kernels for d = {d}, got {}", 1usize << d, kernels.len())));
    }
    if kernels.iter().any(|k| !k.same_shape(first)) {
        return Err(Error::input("kernel shape mismatch"));
    }
    let total = first.total() as u128;
    WorkBudgets::check("box_pairs", total * total, budgets.box_pairs)?;

    let sizes = first.sizes.clone();
    let strides = first.strides();
    let total = first.total();

    let mut re = Kahan::default();
    let mut im = Kahan::default();
    let mut c0 = vec![0usize; d];
    for _ in 0..total {
        let mut c1 = vec![0usize; d];
        for _ in 0..total {
            let mut prod = Complex64::new(1.0, 0.0);
            for (eps, kernel) in kernels.iter().enumerate() {
                let mut idx = 0usize;
                let mut parity = 0u32;
                for axis in 0..d {
                    let take1 = (eps >> axis) & 1 == 1;
                    idx += if take1 { c1[axis] } else { c0[axis] } * strides[axis];
                    parity += (eps >> axis) as u32 & 1;
                }
                let v = kernel.values[idx];
                prod *= if parity % 2 == 1 { v.conj() } else { v };
            }
            re.add(prod.re);
            im.add(prod.im);
            advance(&mut c1, &sizes);
        }
        advance(&mut c0, &sizes);
    }
    let pairs = (total * total) as f64;
    Ok(Complex64::new(re.value(), im.value()) / pairs)
}

/// Box norm `||K||_{box^d}`, the `2^d`-th root of the inner product of `K`
/// with itself in every slot.
///
/// The self inner product is a nonnegative real up to roundoff; departures
/// beyond `1e-9` of the natural scale are reported as internal errors.
pub fn box_norm(kernel: &BoxKernel, budgets: &WorkBudgets) -> Result<f64> {
    let d = kernel.dims();
    let copies: Vec<BoxKernel> = vec![kernel.clone(); 1 << d];
    let ip = gowers_inner_product(&copies, budgets)?;
    let scale = kernel.sup().powi(1 << d);
    let slack = 1e-9 * scale.max(1e-300);
    if ip.im.abs() > slack || ip.re < -slack {
        return Err(Error::Internal(format!("self inner product {ip} is not a nonnegative real (scale {scale})")));
    }
    Ok(ip.re.max(0.0).powf(1.0 / (1u64 << d) as f64))
}

/// Both sides of the van der Corput bound
/// `|E(K prod_i F_i)| <= ||K||_{box^d}` for factors `F_i` that are bounded
/// and do not depend on coordinate `i`.
pub fn vdc_bound_check(kernel: &BoxKernel, factors: &[BoxKernel], budgets: &WorkBudgets) -> Result<(f64, f64)> {
    let d = kernel.dims();
    if factors.len() != d {
        return Err(Error::input(format!("expected {d} factors, got {}", factors.len())));
    }
    let tol = Tolerance::default();
    for (i, f) in factors.iter().enumerate() {
        if !f.same_shape(kernel) {
            return Err(Error::input(format!("factor {i} shape mismatch")));
        }
        if f.sup() > 1.0 + 1e-12 {
            return Err(Error::input(format!("factor {i} exceeds the unit bound (sup = {})", f.sup())));
        }
        // Constancy along axis i: compare every cell against the slice with
        // the i-th coordinate zeroed.
        let strides = f.strides();
        let mut coords = vec![0usize; d];
        for idx in 0..f.total() {
            let base = idx - coords[i] * strides[i];
            if (f.values[idx] - f.values[base]).norm() > tol.margin(1.0) {
                return Err(Error::input(format!("factor {i} varies along coordinate {i}")));
            }
            advance(&mut coords, &f.sizes);
        }
    }

    let mut re = Kahan::default();
    let mut im = Kahan::default();
    for idx in 0..kernel.total() {
        let mut v = kernel.values[idx];
        for f in factors {
            v *= f.values[idx];
        }
        re.add(v.re);
        im.add(v.im);
    }
    let lhs = Complex64::new(re.value(), im.value()).norm() / kernel.total() as f64;
    let rhs = box_norm(kernel, budgets)?;
    Ok((lhs, rhs))
}

fn u_norm_cap(d: usize, budgets: &WorkBudgets) -> Option<usize> {
    match d {
        1 => None,
        2 => Some(budgets.u_norm_n_d2),
        3 => Some(budgets.u_norm_n_d3),
        4 => Some(budgets.u_norm_n_d4),
        _ => unreachable!("d validated by caller"),
    }
}

/// Mean of `|E_x g(x+h) conj(g(x))|^2` over `h`; this is `||g||_{U^2}^4`.
fn u2_pow4(values: &[Complex64]) -> f64 {
    let n = values.len();
    let mut acc = Kahan::default();
    for h in 0..n {
        let mut corr = Complex64::new(0.0, 0.0);
        for x in 0..n - h {
            corr += values[x + h] * values[x].conj();
        }
        for x in n - h..n {
            corr += values[x + h - n] * values[x].conj();
        }
        let corr = corr / n as f64;
        acc.add(corr.norm_sqr());
    }
    acc.value() / n as f64
}

fn derivative_into(values: &[Complex64], h: usize, out: &mut Vec<Complex64>) {
    let n = values.len();
    out.clear();
    out.extend((0..n).map(|x| values[(x + h) % n] * values[x].conj()));
}

fn u3_pow8(values: &[Complex64]) -> f64 {
    let n = values.len();
    let mut acc = Kahan::default();
    let mut g = Vec::with_capacity(n);
    for h in 0..n {
        derivative_into(values, h, &mut g);
        acc.add(u2_pow4(&g));
    }
    acc.value() / n as f64
}

fn u4_pow16(values: &[Complex64]) -> f64 {
    let n = values.len();
    let mut acc = Kahan::default();
    let mut g = Vec::with_capacity(n);
    for h in 0..n {
        derivative_into(values, h, &mut g);
        acc.add(u3_pow8(&g));
    }
    acc.value() / n as f64
}

/// Gowers uniformity norm `||f||_{U^d}` for `d` in `1..=4`.
pub fn u_norm(f: &CyclicFn, d: usize, budgets: &WorkBudgets) -> Result<f64> {
    if !(1..=4).contains(&d) {
        return Err(Error::input(format!("u_norm supports d in 1..=4, got {d}")));
    }
    if let Some(cap) = u_norm_cap(d, budgets) {
        WorkBudgets::check("u_norm_n", f.modulus() as u128, cap as u128)?;
    }
    let values = f.values();
    let power = match d {
        1 => return Ok(f.expectation().norm()),
        2 => u2_pow4(values),
        3 => u3_pow8(values),
        4 => u4_pow16(values),
        _ => unreachable!(),
    };
    Ok(power.max(0.0).powf(1.0 / (1u64 << d) as f64))
}

/// Dual function of the `U^3` norm:
///
/// ```text
/// Df(x) = E_{a,b,c} f(x+a) f(x+b) f(x+c)
///                   conj(f(x+a+b) f(x+a+c) f(x+b+c)) f(x+a+b+c),
/// ```
///
/// so that `<f, Df> = E(f conj(Df)) = ||f||_{U^3}^8` for every complex `f`
/// (for real `f` the conjugations are immaterial). Evaluated in
/// `O(N^2 log N)` by writing the inner double average over `(b, c)` as a
/// spectral sum of the derivative `g_a(y) = f(y+a) conj(f(y))`; the
/// quartic direct sum is the test oracle.
pub fn dual_function(f: &CyclicFn, budgets: &WorkBudgets) -> Result<CyclicFn> {
    let n = f.modulus();
    WorkBudgets::check("dual_n", n as u128, budgets.dual_n as u128)?;
    let values = f.values();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut g = Vec::with_capacity(n);
    for a in 0..n {
        derivative_into(values, a, &mut g);
        let ghat = crate::zmod::dft(&CyclicFn::new(g.clone())?);
        // h_a(x) = sum_xi |ghat|^2 conj(ghat) e_N(-x xi): an unnormalized
        // forward transform of the twisted coefficients.
        let twisted: Vec<Complex64> = ghat.coeffs().iter().map(|c| c.norm_sqr() * c.conj()).collect();
        let h = crate::zmod::dft(&CyclicFn::new(twisted)?);
        for x in 0..n {
            out[x] += values[(x + a) % n] * h.coeffs()[x] * n as f64;
        }
    }
    let scale = 1.0 / n as f64;
    CyclicFn::new(out.into_iter().map(|v| v * scale).collect())
}

/// Both sides of the generalized von Neumann bound
/// `|Lambda_k(f_0, ..., f_{k-1})| <= min_j ||f_j||_{U^{k-1}}` for bounded
/// functions on a prime modulus `N > k`.
pub fn gvn_bound_check(fs: &[CyclicFn], budgets: &WorkBudgets) -> Result<(f64, f64)> {
    let k = fs.len();
    if !(3..=5).contains(&k) {
        return Err(Error::input(format!("k must be 3, 4 or 5, got {k}")));
    }
    let n = fs[0].modulus();
    if !is_prime(n as u64) || n <= k {
        return Err(Error::input(format!("modulus {n} must be a prime larger than k = {k}")));
    }
    for (j, f) in fs.iter().enumerate() {
        f.require_bounded(&format!("gvn slot {j}"))?;
    }
    let lhs = ap_forms::lambda_k(fs, budgets)?.norm();
    let mut rhs = f64::INFINITY;
    for f in fs {
        rhs = rhs.min(u_norm(f, k - 1, budgets)?);
    }
    Ok((lhs, rhs))
}

pub(crate) fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}
