//! Bohr-cell sigma-algebras, conditional expectation, and the two
//! executable proof strategies: the density-increment progression search
//! and the energy-increment (Koopman-von Neumann) decomposition. Also the
//! quadratic model-problem tools: exact quadratic phase fitting and the
//! additive-quadruple statistic.

use num_complex::Complex64;
use serde::Serialize;

use crate::budget::WorkBudgets;
use crate::gowers::is_prime;
use crate::zmod::{dft, unit_root, Lp};
use crate::{ap_forms, CyclicFn, Error, Result};

// ---------------------------------------------------------------------------
// Bohr partitions
// ---------------------------------------------------------------------------

/// One generating character with its cell size and grid offset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BohrGenerator {
    pub frequency: usize,
    pub epsilon: f64,
    /// Grid offset in units of `epsilon`, components in `[0, 1)`.
    pub alpha: (f64, f64),
}

/// Partition of `Z/NZ` into preimages of square cells under the generating
/// characters; the atoms of the sigma-algebra generated by them.
#[derive(Debug, Clone, PartialEq)]
pub struct BohrPartition {
    n: usize,
    generators: Vec<BohrGenerator>,
    atom_of: Vec<u32>,
    atom_count: usize,
}

/// Cell index of a complex value on the epsilon-grid shifted by
/// `epsilon * alpha`.
fn cell_of(z: Complex64, eps: f64, alpha: (f64, f64)) -> (i64, i64) {
    (
        (z.re / eps - alpha.0).floor() as i64,
        (z.im / eps - alpha.1).floor() as i64,
    )
}

/// Canonical atom labels (first-occurrence order) from per-point cell keys.
fn canonicalize<K: Eq + std::hash::Hash>(keys: impl Iterator<Item = K>) -> (Vec<u32>, usize) {
    let mut ids: std::collections::HashMap<K, u32> = std::collections::HashMap::new();
    let mut atom_of = Vec::new();
    for key in keys {
        let next = ids.len() as u32;
        let id = *ids.entry(key).or_insert(next);
        atom_of.push(id);
    }
    let count = ids.len();
    (atom_of, count)
}

fn validate_generators(generators: &[BohrGenerator], n: usize) -> Result<()> {
    for g in generators {
        if !(g.epsilon > 0.0 && g.epsilon <= 1.0) {
            return Err(Error::input(format!("cell size {} must lie in (0, 1]", g.epsilon)));
        }
        if g.frequency >= n {
            return Err(Error::input(format!("frequency {} out of range for modulus {n}", g.frequency)));
        }
        if !(0.0..1.0).contains(&g.alpha.0) || !(0.0..1.0).contains(&g.alpha.1) {
            return Err(Error::input("offset components must lie in [0, 1)"));
        }
    }
    Ok(())
}

impl BohrPartition {
    /// Partition generated by the given characters. Deterministic in the
    /// generator list (including offsets).
    pub fn new(n: usize, generators: Vec<BohrGenerator>) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("modulus must be at least 1"));
        }
        validate_generators(&generators, n)?;
        let keys = (0..n).map(|x| {
            generators
                .iter()
                .map(|g| {
                    let k = ((x as u128 * g.frequency as u128) % n as u128) as i64;
                    cell_of(unit_root(n, k), g.epsilon, g.alpha)
                })
                .collect::<Vec<_>>()
        });
        let (atom_of, atom_count) = canonicalize(keys);
        Ok(BohrPartition { n, generators, atom_of, atom_count })
    }

    /// The trivial partition (one atom).
    pub fn trivial(n: usize) -> Self {
        BohrPartition { n, generators: Vec::new(), atom_of: vec![0; n], atom_count: 1 }
    }

    /// Generators with offsets drawn from a seeded stream.
    pub fn with_random_offsets(n: usize, freqs: &[(usize, f64)], seed: u64) -> Result<Self> {
        use rand::Rng;
        let mut rng = crate::generators::rng(seed);
        let generators = freqs
            .iter()
            .map(|&(frequency, epsilon)| BohrGenerator {
                frequency,
                epsilon,
                alpha: (rng.gen::<f64>(), rng.gen::<f64>()),
            })
            .collect();
        BohrPartition::new(n, generators)
    }

    /// Join: the partition by the tuple of cell indices of both generator
    /// lists (atoms are the pairwise intersections).
    pub fn join(&self, other: &BohrPartition) -> Result<BohrPartition> {
        if self.n != other.n {
            return Err(Error::input(format!("modulus mismatch: {} vs {}", self.n, other.n)));
        }
        let mut generators = self.generators.clone();
        generators.extend(other.generators.iter().cloned());
        BohrPartition::new(self.n, generators)
    }

    pub fn modulus(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[BohrGenerator] {
        &self.generators
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    pub fn atom_of(&self, x: usize) -> u32 {
        self.atom_of[x % self.n]
    }

    /// Upper bound on the atom count from the cell grid alone.
    pub fn atom_count_cap(&self) -> f64 {
        self.generators
            .iter()
            .map(|g| {
                let cells = (2.0 / g.epsilon).ceil() + 1.0;
                cells * cells
            })
            .product()
    }
}

/// Conditional expectation on the atoms: atomwise mean, so an orthogonal
/// projection that preserves mean, bounds and non-negativity.
pub fn cond_expect(f: &CyclicFn, partition: &BohrPartition) -> Result<CyclicFn> {
    if f.modulus() != partition.n {
        return Err(Error::input(format!("modulus mismatch: {} vs {}", f.modulus(), partition.n)));
    }
    let mut sums = vec![Complex64::new(0.0, 0.0); partition.atom_count];
    let mut sizes = vec![0usize; partition.atom_count];
    for (x, v) in f.values().iter().enumerate() {
        let a = partition.atom_of[x] as usize;
        sums[a] += v;
        sizes[a] += 1;
    }
    let means: Vec<Complex64> =
        sums.iter().zip(&sizes).map(|(s, &c)| if c > 0 { s / c as f64 } else { Complex64::new(0.0, 0.0) }).collect();
    CyclicFn::from_fn(partition.n, |x| means[partition.atom_of[x] as usize])
}

fn l2_norm_sq(f: &CyclicFn) -> f64 {
    let v = f.lp_norm(Lp::Two);
    v * v
}

// ---------------------------------------------------------------------------
// Trace records
// ---------------------------------------------------------------------------

/// Branch labels shared by the two iterative algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    /// The residual was already uniform below threshold.
    Uniform,
    /// Density increment onto a sub-progression.
    Increment,
    /// Exhaustive search took over.
    Fallback,
    /// Partition refinement (energy increment).
    Refine,
}

/// One step of a recursion or refinement trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub level: usize,
    pub kind: StepKind,
    pub frequency: Option<u64>,
    pub epsilon: Option<f64>,
    pub density_or_energy: f64,
    pub atom_count: Option<usize>,
    /// Sup of `|bhat|` after the step, where applicable.
    pub residual: Option<f64>,
    /// Interval (sub-progression) length, for the density-increment search.
    pub interval_len: Option<usize>,
    /// Dirichlet spacing chosen at this level, for the search.
    pub q: Option<u64>,
}

// ---------------------------------------------------------------------------
// Density-increment search
// ---------------------------------------------------------------------------

/// Tunables for [`roth_density_increment_search`]. The named constants are
/// the quantities the argument leaves as "absolute constants"; the defaults
/// keep every branch observable on desk-scale inputs.
#[derive(Debug, Clone)]
pub struct RothParams {
    /// Uniform branch when `sup |bhat| <= uniform_c * delta^2`.
    pub uniform_c: f64,
    /// Required atom bias, and recorded density gain, in units of `delta^2`.
    pub increment_floor_c: f64,
    /// Bohr cell size in units of `delta^2`.
    pub epsilon_c: f64,
    /// Below this interval length, switch to exhaustive search.
    pub fallback_floor: usize,
    /// Hard cap on recursion depth.
    pub max_levels: usize,
}

impl Default for RothParams {
    fn default() -> Self {
        RothParams {
            uniform_c: 0.01,
            increment_floor_c: 0.001,
            epsilon_c: 0.01,
            fallback_floor: 20,
            max_levels: 64,
        }
    }
}

/// A verified progression witness plus the recursion trace.
#[derive(Debug, Clone, Serialize)]
pub struct RothOutcome {
    /// `(n, r)` with `n, n+r, n+2r` all in the input set and `r > 0`.
    pub witness: (u64, u64),
    pub trace: Vec<TraceStep>,
}

/// Smallest prime strictly above `lo` (exists below `2 lo` for `lo >= 1`).
fn next_prime_above(lo: u64) -> u64 {
    let mut c = lo + 1;
    loop {
        if is_prime(c) {
            return c;
        }
        c += 1;
    }
}

/// Largest continued-fraction denominator `q <= limit` of `num/den`; the
/// following denominator exceeds `limit`, which pins `||q num/den|| <= 1/limit`.
fn dirichlet_denominator(num: u64, den: u64, limit: u64) -> u64 {
    let (mut a, mut b) = (num % den, den);
    let (mut q_prev, mut q_cur) = (0u64, 1u64);
    // q_cur tracks the denominator of the current convergent.
    while a != 0 {
        let step = b / a;
        let q_next = match step.checked_mul(q_cur).and_then(|v| v.checked_add(q_prev)) {
            Some(v) => v,
            None => break,
        };
        if q_next > limit {
            break;
        }
        q_prev = q_cur;
        q_cur = q_next;
        (a, b) = (b % a, a);
    }
    q_cur.max(1)
}

/// Distance of `q xi / p` to the nearest integer.
fn circle_distance(q: u64, xi: u64, p: u64) -> f64 {
    let frac = ((q as u128 * xi as u128) % p as u128) as f64 / p as f64;
    frac.min(1.0 - frac)
}

struct Level {
    /// Global value of position `i` (1-based) is `start + (i - 1) * step`.
    start: u64,
    step: u64,
    len: usize,
    /// Membership of the set on positions `1..=len` (index 0 unused).
    member: Vec<bool>,
}

impl Level {
    fn density(&self) -> f64 {
        self.member.iter().filter(|&&m| m).count() as f64 / self.len as f64
    }

    fn global(&self, pos: usize) -> u64 {
        self.start + (pos as u64 - 1) * self.step
    }

    /// First position-space 3-term progression, lexicographic in `(n, d)`.
    fn first_progression(&self) -> Option<(usize, usize)> {
        for n in 1..=self.len {
            if !self.member[n] {
                continue;
            }
            let max_d = (self.len - n) / 2;
            for d in 1..=max_d {
                if self.member[n + d] && self.member[n + 2 * d] {
                    return Some((n, d));
                }
            }
        }
        None
    }
}

/// Find a 3-term progression in `set` (a subset of `[1, bound]`) by the
/// density-increment strategy: embed the current interval in a prime cyclic
/// group, test the balanced part for spectral uniformity, and on failure
/// pass to a denser sub-progression read off a biased Bohr cell along the
/// offending frequency. Every returned witness is re-verified by
/// membership; exhaustive search backs the recursion below
/// `fallback_floor`, so a `NoWitness` error proves the set has no
/// progression at all.
pub fn roth_density_increment_search(
    set: &[u64],
    bound: u64,
    delta_floor: f64,
    params: &RothParams,
    budgets: &WorkBudgets,
) -> Result<RothOutcome> {
    if bound < 3 {
        return Err(Error::input(format!("bound {bound} is below the minimum of 3")));
    }
    WorkBudgets::check("lambda_dense_n", bound as u128, budgets.lambda_dense_n as u128)?;
    let mut member = vec![false; bound as usize + 1];
    for &x in set {
        if x < 1 || x > bound {
            return Err(Error::input(format!("element {x} outside [1, {bound}]")));
        }
        member[x as usize] = true;
    }
    let size = member.iter().filter(|&&m| m).count();
    if (size as f64) < delta_floor * bound as f64 {
        return Err(Error::input(format!(
            "set density {} is below the floor {delta_floor}",
            size as f64 / bound as f64
        )));
    }

    let verify = |n: u64, r: u64| -> Result<(u64, u64)> {
        for j in 0..3 {
            let v = n + j * r;
            if v > bound || !member[v as usize] {
                return Err(Error::Internal(format!("witness ({n}, {r}) fails membership at step {j}")));
            }
        }
        Ok((n, r))
    };

    let mut trace: Vec<TraceStep> = Vec::new();
    let mut level = Level { start: 1, step: 1, len: bound as usize, member: member.clone() };

    for depth in 0..params.max_levels {
        let delta = level.density();

        if level.len < params.fallback_floor {
            if let Some((n, d)) = level.first_progression() {
                trace.push(TraceStep {
                    level: depth,
                    kind: StepKind::Fallback,
                    frequency: None,
                    epsilon: None,
                    density_or_energy: delta,
                    atom_count: None,
                    residual: None,
                    interval_len: Some(level.len),
                    q: None,
                });
                let witness = verify(level.global(n), d as u64 * level.step)?;
                return Ok(RothOutcome { witness, trace });
            }
            break; // global fallback below
        }

        // Embed positions 1..=len into Z/pZ, 2 len < p <= 4 len, balanced
        // against the current density outside the interval.
        let p = next_prime_above(2 * level.len as u64) as usize;
        let f = CyclicFn::from_fn(p, |x| {
            if (1..=level.len).contains(&x) {
                Complex64::new(if level.member[x] { 1.0 } else { 0.0 }, 0.0)
            } else {
                Complex64::new(delta, 0.0)
            }
        })?;
        let balanced = f.sub(&CyclicFn::constant(p, Complex64::new(delta, 0.0))?)?;
        let spectrum = dft(&balanced);
        let (mut best_xi, mut best_mag) = (1usize, 0.0f64);
        for (xi, c) in spectrum.coeffs().iter().enumerate().skip(1) {
            let m = c.norm();
            if m > best_mag {
                (best_xi, best_mag) = (xi, m);
            }
        }

        if best_mag <= params.uniform_c * delta * delta {
            // Uniform branch: the count form is within O(delta ||bhat||_inf)
            // of delta^3 > 0, so a progression exists; extract one directly.
            if let Some((n, d)) = level.first_progression() {
                trace.push(TraceStep {
                    level: depth,
                    kind: StepKind::Uniform,
                    frequency: Some(best_xi as u64),
                    epsilon: None,
                    density_or_energy: delta,
                    atom_count: None,
                    residual: Some(best_mag),
                    interval_len: Some(level.len),
                    q: None,
                });
                let witness = verify(level.global(n), d as u64 * level.step)?;
                return Ok(RothOutcome { witness, trace });
            }
            break;
        }

        // Hard case: Bohr cells along the biased frequency on the interval.
        let eps = (params.epsilon_c * delta * delta).clamp(1e-6, 1.0);
        let keys = (1..=level.len).map(|x| {
            let k = ((x as u128 * best_xi as u128) % p as u128) as i64;
            cell_of(unit_root(p, k), eps, (0.0, 0.0))
        });
        let (atom_of, atom_count) = canonicalize(keys);

        let mut atom_sizes = vec![0usize; atom_count];
        let mut atom_hits = vec![0usize; atom_count];
        for pos in 1..=level.len {
            let a = atom_of[pos - 1] as usize;
            atom_sizes[a] += 1;
            if level.member[pos] {
                atom_hits[a] += 1;
            }
        }
        let (mut best_atom, mut best_bias) = (0usize, f64::NEG_INFINITY);
        for a in 0..atom_count {
            let bias = atom_hits[a] as f64 / atom_sizes[a] as f64 - delta;
            if bias > best_bias {
                (best_atom, best_bias) = (a, bias);
            }
        }
        let floor = params.increment_floor_c * delta * delta;
        if best_bias < floor {
            break; // theory promises a biased atom; if roundoff eats it, fall back
        }

        // Dirichlet step: spacing q <= sqrt(len) with ||q xi / p|| <= 1/sqrt(len).
        let limit = (level.len as f64).sqrt().floor() as u64;
        let q = dirichlet_denominator(best_xi as u64, p as u64, limit.max(1));
        debug_assert!(circle_distance(q, best_xi as u64, p as u64) <= 1.0 / limit.max(1) as f64 + 1e-12);

        // Split the chosen atom into maximal runs of spacing q; they
        // partition it, so some run is at least as dense as the atom.
        let mut runs: Vec<Vec<usize>> = Vec::new();
        {
            let mut by_class: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
            for pos in 1..=level.len {
                if atom_of[pos - 1] as usize == best_atom {
                    by_class.entry(pos % q as usize).or_default().push(pos);
                }
            }
            let mut classes: Vec<_> = by_class.into_values().collect();
            classes.sort_by_key(|v| v[0]);
            for class in classes {
                let mut run: Vec<usize> = Vec::new();
                for pos in class {
                    if let Some(&last) = run.last() {
                        if pos != last + q as usize {
                            runs.push(std::mem::take(&mut run));
                        }
                    }
                    run.push(pos);
                }
                if !run.is_empty() {
                    runs.push(run);
                }
            }
        }
        let target = delta + floor;
        let mut chosen: Option<&Vec<usize>> = None;
        for run in &runs {
            let hits = run.iter().filter(|&&pos| level.member[pos]).count();
            if hits as f64 / run.len() as f64 >= target {
                match chosen {
                    Some(c) if c.len() >= run.len() => {}
                    _ => chosen = Some(run),
                }
            }
        }
        let Some(run) = chosen else { break };

        let new_member: Vec<bool> =
            std::iter::once(false).chain(run.iter().map(|&pos| level.member[pos])).collect();
        let new_level = Level {
            start: level.global(run[0]),
            step: level.step * q,
            len: run.len(),
            member: new_member,
        };
        trace.push(TraceStep {
            level: depth,
            kind: StepKind::Increment,
            frequency: Some(best_xi as u64),
            epsilon: Some(eps),
            density_or_energy: new_level.density(),
            atom_count: Some(atom_count),
            residual: Some(best_mag),
            interval_len: Some(new_level.len),
            q: Some(q),
        });
        level = new_level;
    }

    // Global exhaustive fallback: decides existence unconditionally.
    trace.push(TraceStep {
        level: trace.len(),
        kind: StepKind::Fallback,
        frequency: None,
        epsilon: None,
        density_or_energy: size as f64 / bound as f64,
        atom_count: None,
        residual: None,
        interval_len: Some(bound as usize),
        q: None,
    });
    match ap_forms::find_ap(set, 3)? {
        Some((n, r)) => Ok(RothOutcome { witness: verify(n, r)?, trace }),
        None => Err(Error::NoWitness("the set contains no 3-term progression (proved by enumeration)".into())),
    }
}

// ---------------------------------------------------------------------------
// Energy-increment decomposition
// ---------------------------------------------------------------------------

/// Tunables for [`kvn_decompose`].
#[derive(Debug, Clone)]
pub struct KvnParams {
    /// Bohr cell size as a fraction of the offending coefficient size.
    pub epsilon_factor: f64,
    /// Per-refinement energy gain floor, in units of `tau^2`.
    pub gain_floor_factor: f64,
    /// Safety cap on refinements (the energy argument terminates long
    /// before, this guards against implementation bugs).
    pub max_refinements: usize,
}

impl Default for KvnParams {
    fn default() -> Self {
        KvnParams { epsilon_factor: 0.25, gain_floor_factor: 0.1, max_refinements: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KvnStatus {
    /// Terminated with `sup |bhat| <= tau`.
    Done,
    /// Atom budget exhausted first; the decomposition is the partial state.
    Budget,
}

/// Structured split `f = g + b` with its refinement trace.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub g: CyclicFn,
    pub b: CyclicFn,
    pub iterations: Vec<TraceStep>,
    pub atom_count: usize,
    pub threshold_used: f64,
    pub initial_energy: f64,
}

#[derive(Debug, Clone)]
pub struct KvnOutcome {
    pub status: KvnStatus,
    pub decomposition: Decomposition,
    pub partition: BohrPartition,
}

/// Energy-increment decomposition of a `[0, 1]`-valued function with mean
/// at least `delta`: refine a Bohr partition along the largest Fourier
/// coefficient of the residual until `sup |bhat| <= tau` (status `Done`) or
/// the atom budget is hit (status `Budget`). The structured part is always
/// a conditional expectation of `f`, hence `[0, 1]`-valued with the same
/// mean, and the energy `||g||_2^2` rises by at least the configured floor
/// at every refinement.
pub fn kvn_decompose(
    f: &CyclicFn,
    delta: f64,
    tau: f64,
    atom_budget: usize,
    params: &KvnParams,
    budgets: &WorkBudgets,
) -> Result<KvnOutcome> {
    let n = f.modulus();
    WorkBudgets::check("lambda_dense_n", n as u128, budgets.lambda_dense_n as u128)?;
    if tau <= 0.0 {
        return Err(Error::input(format!("threshold {tau} must be positive")));
    }
    for (x, v) in f.values().iter().enumerate() {
        if v.im.abs() > 1e-12 || !(-1e-12..=1.0 + 1e-12).contains(&v.re) {
            return Err(Error::input(format!("value at {x} is not in [0, 1]")));
        }
    }
    let mean = f.expectation().re;
    if mean < delta {
        return Err(Error::input(format!("mean {mean} is below delta = {delta}")));
    }

    let mut partition = BohrPartition::trivial(n);
    let mut g = cond_expect(f, &partition)?;
    let mut b = f.sub(&g)?;
    let mut energy = l2_norm_sq(&g);
    let initial_energy = energy;
    let mut residual = dft(&b).max_coeff();
    let mut iterations: Vec<TraceStep> = Vec::new();
    let gain_floor = params.gain_floor_factor * tau * tau;

    let status = loop {
        if residual.1 <= tau {
            iterations.push(TraceStep {
                level: iterations.len(),
                kind: StepKind::Uniform,
                frequency: None,
                epsilon: None,
                density_or_energy: energy,
                atom_count: Some(partition.atom_count()),
                residual: Some(residual.1),
                interval_len: None,
                q: None,
            });
            break KvnStatus::Done;
        }
        if partition.atom_count() > atom_budget {
            break KvnStatus::Budget;
        }
        if iterations.len() >= params.max_refinements {
            return Err(Error::Internal("refinement cap hit before the energy argument terminated".into()));
        }

        let (xi, sigma) = residual;
        let eps = (params.epsilon_factor * sigma).clamp(f64::MIN_POSITIVE, 1.0);
        let refinement =
            BohrPartition::new(n, vec![BohrGenerator { frequency: xi, epsilon: eps, alpha: (0.0, 0.0) }])?;
        partition = partition.join(&refinement)?;

        g = cond_expect(f, &partition)?;
        b = f.sub(&g)?;
        let new_energy = l2_norm_sq(&g);
        residual = dft(&b).max_coeff();

        // sup |bhat| = sigma forces an energy jump of (sigma - sqrt(2) eps)^2;
        // with eps = sigma/4 that is at least 0.41 sigma^2 > 0.41 tau^2,
        // comfortably above the configured floor. Falling short means a bug.
        let gain = new_energy - energy;
        if gain < gain_floor {
            return Err(Error::Internal(format!(
                "refinement at frequency {xi} gained {gain} < floor {gain_floor}"
            )));
        }
        energy = new_energy;
        iterations.push(TraceStep {
            level: iterations.len(),
            kind: StepKind::Refine,
            frequency: Some(xi as u64),
            epsilon: Some(eps),
            density_or_energy: energy,
            atom_count: Some(partition.atom_count()),
            residual: Some(residual.1),
            interval_len: None,
            q: None,
        });
    };

    Ok(KvnOutcome {
        status,
        decomposition: Decomposition {
            g,
            b,
            iterations,
            atom_count: partition.atom_count(),
            threshold_used: tau,
            initial_energy,
        },
        partition,
    })
}

// ---------------------------------------------------------------------------
// Quadratic model problem
// ---------------------------------------------------------------------------

/// Exact quadratic fit `phi(x) = a x^2 + b x + c` over `Z/pZ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuadFit {
    pub p: u64,
    pub a: u64,
    pub b: u64,
    pub c: u64,
}

/// Outcome of the quadratic phase test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuadOutcome {
    Quadratic(QuadFit),
    /// A quadruple `(x, r, s, t)` on which the cubic alternating sum of
    /// `phi` fails to vanish.
    NotQuadratic { witness: (u64, u64, u64, u64) },
}

/// Alternating sum of `phi` over the cube `x + {0,r} + {0,s} + {0,t}`; zero
/// for every quadruple exactly when the third finite difference vanishes.
pub fn cube_defect(phi: &[u64], x: u64, r: u64, s: u64, t: u64) -> u64 {
    let p = phi.len() as u64;
    let at = |v: u64| phi[(v % p) as usize];
    let plus = at(x + r + s + t) + at(x + r) + at(x + s) + at(x + t);
    let minus = at(x + r + s) + at(x + r + t) + at(x + s + t) + at(x);
    (plus + 4 * p - minus) % p
}

/// Decide whether `phi: Z/pZ -> Z/pZ` is a quadratic polynomial, entirely in
/// integer arithmetic. The `O(p)` route checks that the second difference is
/// constant (equivalent to the full third-difference test, which is the
/// oracle in the test suite) and reconstructs exact coefficients.
pub fn fit_quadratic_phase(phi: &[u64]) -> Result<QuadOutcome> {
    let p = phi.len() as u64;
    if !is_prime(p) || p <= 3 {
        return Err(Error::input(format!("table length {p} must be a prime above 3")));
    }
    if let Some(bad) = phi.iter().position(|&v| v >= p) {
        return Err(Error::input(format!("value at {bad} is not reduced mod {p}")));
    }
    let at = |v: u64| phi[(v % p) as usize];
    // Second difference phi(x+2) - 2 phi(x+1) + phi(x), kept nonnegative
    // before reduction.
    let second: Vec<u64> = (0..p).map(|x| (at(x + 2) + at(x) + 2 * p - 2 * at(x + 1)) % p).collect();
    let constant = second.iter().all(|&v| v == second[0]);
    if !constant {
        let x = (0..p).find(|&x| second[(x + 1) as usize % p as usize] != second[x as usize]).expect("non-constant");
        let witness = (x, 1, 1, 1);
        debug_assert_ne!(cube_defect(phi, witness.0, witness.1, witness.2, witness.3), 0);
        return Ok(QuadOutcome::NotQuadratic { witness });
    }
    // second difference = 2a; p is odd so 2 is invertible.
    let inv2 = ap_forms::mod_inverse(2, p as i64).expect("odd prime") as u64;
    let a = second[0] * inv2 % p;
    let c = phi[0];
    let b = (at(1) + 2 * p - a - c) % p;
    for x in 0..p {
        let want = ((a as u128 * x as u128 % p as u128 * x as u128 + b as u128 * x as u128 + c as u128) % p as u128) as u64;
        if phi[x as usize] != want {
            return Err(Error::Internal(format!("constant second difference but mismatch at {x}")));
        }
    }
    Ok(QuadOutcome::Quadratic(QuadFit { p, a, b, c }))
}

/// Probability over `(h, t, u) in (Z/pZ)^3` that all four points
/// `h, h+t, h+u, h+t+u` carry values and the alternating sum
/// `a(h+t+u) - a(h+t) - a(h+u) + a(h)` vanishes mod `p`.
pub fn additive_quadruple_statistic(values: &[Option<u64>], budgets: &WorkBudgets) -> Result<f64> {
    let p = values.len();
    if !is_prime(p as u64) {
        return Err(Error::input(format!("table length {p} must be prime")));
    }
    WorkBudgets::check("additive_quad_p", p as u128, budgets.additive_quad_p as u128)?;
    for v in values.iter().flatten() {
        if *v >= p as u64 {
            return Err(Error::input("values must be reduced mod p"));
        }
    }
    let mut good = 0u64;
    for h in 0..p {
        let Some(ah) = values[h] else { continue };
        for t in 0..p {
            let Some(aht) = values[(h + t) % p] else { continue };
            for u in 0..p {
                let (Some(ahu), Some(ahtu)) = (values[(h + u) % p], values[(h + t + u) % p]) else {
                    continue;
                };
                if (ahtu + ah) % p as u64 == (aht + ahu) % p as u64 {
                    good += 1;
                }
            }
        }
    }
    Ok(good as f64 / (p as f64).powi(3))
}
