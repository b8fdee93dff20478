//! Random walks on the circulant band graph.
//!
//! The graph has vertex set `ℤ/Nℤ` and joins `u` and `v` whenever
//! `0 < |u − v|_N ≤ W`. Its normalized adjacency operator is diagonalized by
//! the discrete Fourier transform; [`walk_count_fourier`] evaluates path
//! counts through that spectrum, and [`walk_count_dp`] counts them exactly by
//! dynamic programming so that either route can check the other.
//!
//! Walk counts use the `2W` signed step offsets `±1, …, ±W`. When `2W < N`
//! these are `2W` distinct neighbours. For even `N` with `W = N/2` the two
//! offsets `±N/2` land on the same vertex and are counted separately, which
//! is the multiplicity the closed-form spectrum encodes.

use std::collections::HashSet;
use std::f64::consts::PI;

use astro_float::{BigFloat, Consts, RoundingMode};
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::ddouble::DoubleDouble;
use crate::error::{check_budget, Error, Result};

/// Default cap on `N · n` for the exact walk-count DP.
pub const DEFAULT_DP_BUDGET: u128 = 10_000_000;

/// The circulant graph on `ℤ/Nℤ` with half-bandwidth `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CirculantGraph {
    n_sites: usize,
    half_bandwidth: usize,
}

impl CirculantGraph {
    pub fn new(n_sites: usize, half_bandwidth: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidParams(format!(
                "n_sites must be at least 2, got {n_sites}"
            )));
        }
        if half_bandwidth < 1 || half_bandwidth > n_sites / 2 {
            return Err(Error::InvalidParams(format!(
                "half_bandwidth must lie in [1, {}], got {half_bandwidth}",
                n_sites / 2
            )));
        }
        Ok(Self {
            n_sites,
            half_bandwidth,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    /// Circular distance `min(|u − v|, N − |u − v|)`.
    pub fn distance(&self, u: usize, v: usize) -> usize {
        let n = self.n_sites;
        let d = (u % n).abs_diff(v % n);
        d.min(n - d)
    }

    pub fn is_edge(&self, u: usize, v: usize) -> bool {
        let d = self.distance(u, v);
        d > 0 && d <= self.half_bandwidth
    }

    /// Number of distinct neighbours of any vertex.
    pub fn degree(&self) -> usize {
        if 2 * self.half_bandwidth < self.n_sites {
            2 * self.half_bandwidth
        } else {
            self.n_sites - 1
        }
    }

    /// Distinct neighbours of `u` in the order `u+1, u−1, u+2, u−2, …`.
    pub fn neighbors(&self, u: usize) -> Vec<usize> {
        let n = self.n_sites;
        let mut out = Vec::with_capacity(self.degree());
        for d in 1..=self.half_bandwidth {
            let fwd = (u + d) % n;
            let bwd = (u + n - d) % n;
            out.push(fwd);
            if bwd != fwd {
                out.push(bwd);
            }
        }
        out
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        (1..=self.half_bandwidth)
            .map(|d| {
                if 2 * d == self.n_sites {
                    self.n_sites / 2
                } else {
                    self.n_sites
                }
            })
            .sum()
    }
}

/// Local-CLT, mixing and upper-bound values for `𝒲_n(R)/(2W)^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkAsymptotics {
    pub gaussian: f64,
    pub uniform: f64,
    pub upper_bound: f64,
}

/// The two constants of the uniform upper bound
/// `C [ (W√n)^{-1} exp(−c R²/(nW²)) + 1/N ]`. They are not known, so the
/// bound is reported for information and never asserted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBoundConstants {
    pub outer: f64,
    pub inner: f64,
}

impl Default for UpperBoundConstants {
    fn default() -> Self {
        Self { outer: 1.0, inner: 1.0 }
    }
}

/// Eigenvalues `a_0, …, a_{N−1}` of `(2W)^{-1} 𝒜` in closed form.
pub fn adjacency_eigenvalues(graph: &CirculantGraph) -> Vec<f64> {
    let n = graph.n_sites as f64;
    let w = graph.half_bandwidth as f64;
    (0..graph.n_sites)
        .map(|k| {
            if k == 0 {
                return 1.0;
            }
            let t = PI * k as f64 / n;
            (w * t).sin() / (w * t.sin()) * ((w + 1.0) * t).cos()
        })
        .collect()
}

/// The symbol `f(z) = sin(Wπz) / (W sin πz) · cos((W+1)πz)`, with
/// `f(k/N) = a_k`.
///
/// At integers the removable singularity takes its limit value `1`. Where
/// `sin πz` is too small for the quotient to be accurate the equivalent
/// finite sum `W^{-1} Σ_{d=1}^{W} cos(2πdz)` is used instead.
pub fn symbol_f(graph: &CirculantGraph, z: Complex64) -> Complex64 {
    let w = graph.half_bandwidth as f64;
    if z.im == 0.0 && z.re.fract() == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let pz = z * PI;
    let denom = pz.sin() * w;
    if denom.norm() < 1e-6 {
        let sum: Complex64 = (1..=graph.half_bandwidth)
            .map(|d| (z * (2.0 * PI * d as f64)).cos())
            .sum();
        return sum / w;
    }
    (pz * w).sin() / denom * (pz * (w + 1.0)).cos()
}

/// Spectral data for evaluating `𝒲_n(R)/(2W)^n` by the Fourier sum
/// `N^{-1} Σ_k a_k^n exp(2πiRk/N)`.
///
/// The sum cancels massively in the tails of the walk distribution, so it
/// is carried out in double-double arithmetic; the result is returned as an
/// `f64` with full relative precision down to values near `1e-30`.
#[derive(Debug, Clone)]
pub struct FourierWalk {
    n_sites: usize,
    cos_table: Vec<DoubleDouble>,
    sin_table: Vec<DoubleDouble>,
    powers: Vec<DoubleDouble>,
    scale: f64,
}

impl FourierWalk {
    pub fn new(graph: &CirculantGraph, n: u64) -> Self {
        let big_n = graph.n_sites;
        let (cos_table, sin_table): (Vec<_>, Vec<_>) = (0..big_n as u64)
            .map(|m| DoubleDouble::cos_sin_turn(m, big_n as u64))
            .unzip();
        let w = graph.half_bandwidth;
        let powers: Vec<DoubleDouble> = (0..big_n)
            .map(|k| {
                let mut sum = DoubleDouble::ZERO;
                for d in 1..=w {
                    sum = sum + cos_table[(d * k) % big_n];
                }
                sum.div_f64(w as f64).powi(n)
            })
            .collect();
        let scale = powers.iter().map(|p| p.abs().to_f64()).sum::<f64>() / big_n as f64;
        Self {
            n_sites: big_n,
            cos_table,
            sin_table,
            powers,
            scale,
        }
    }

    /// `𝒲_n(R)/(2W)^n` for displacement `R` (taken mod `N`).
    pub fn normalized_count(&self, r: i64) -> f64 {
        let n = self.n_sites;
        let r = r.rem_euclid(n as i64) as usize;
        let mut re = DoubleDouble::ZERO;
        let mut im = DoubleDouble::ZERO;
        for (k, p) in self.powers.iter().enumerate() {
            let idx = (r * k) % n;
            re = re + *p * self.cos_table[idx];
            im = im + *p * self.sin_table[idx];
        }
        let re = re.div_f64(n as f64).to_f64();
        let im = im.div_f64(n as f64).to_f64();
        assert!(
            im.abs() <= 1e-10 * self.scale,
            "imaginary residual {im} exceeds tolerance at scale {}",
            self.scale
        );
        re
    }
}

/// `𝒲_n(R)/(2W)^n` through the Fourier sum.
pub fn walk_count_fourier(graph: &CirculantGraph, n: u64, r: i64) -> f64 {
    FourierWalk::new(graph, n).normalized_count(r)
}

/// Path counts `𝒲_t(R)` from the Fourier sum in arbitrary precision.
///
/// Counts reach `(2W)^t` while the tails are single paths, so resolving
/// them needs about `t·log₂(2W)` significant bits. The working precision is
/// fixed at construction from the largest length that will be requested.
#[derive(Debug, Clone)]
pub struct FourierPathCounts {
    n_sites: usize,
    precision: usize,
    max_steps: u64,
    steps: u64,
    cos_table: Vec<BigFloat>,
    spectrum: Vec<BigFloat>,
    powers: Vec<BigFloat>,
}

const RM: RoundingMode = RoundingMode::ToEven;

impl FourierPathCounts {
    /// Starts at length zero, sized for lengths up to `max_steps`.
    pub fn new(graph: &CirculantGraph, max_steps: u64) -> Self {
        let big_n = graph.n_sites;
        let w = graph.half_bandwidth;
        let bits = max_steps as f64 * ((2 * w) as f64).log2() + 2.0 * (big_n as f64).log2() + 64.0;
        let precision = (bits.ceil() as usize).div_ceil(64) * 64;
        let mut consts = Consts::new().expect("astro-float constants");
        let two_pi = consts
            .pi(precision, RM)
            .mul(&BigFloat::from_u64(2, precision), precision, RM);
        let cos_table: Vec<BigFloat> = (0..big_n as u64)
            .map(|m| {
                two_pi
                    .mul(&BigFloat::from_u64(m, precision), precision, RM)
                    .div(&BigFloat::from_u64(big_n as u64, precision), precision, RM)
                    .cos(precision, RM, &mut consts)
            })
            .collect();
        let two = BigFloat::from_u64(2, precision);
        let spectrum: Vec<BigFloat> = (0..big_n)
            .map(|k| {
                let mut sum = BigFloat::from_u64(0, precision);
                for d in 1..=w {
                    sum = sum.add(&cos_table[(d * k) % big_n], precision, RM);
                }
                sum.mul(&two, precision, RM)
            })
            .collect();
        let powers = vec![BigFloat::from_u64(1, precision); big_n];
        Self {
            n_sites: big_n,
            precision,
            max_steps,
            steps: 0,
            cos_table,
            spectrum,
            powers,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Working precision in bits.
    pub fn precision(&self) -> usize {
        self.precision
    }

    /// Advances every spectral power by one step.
    ///
    /// # Panics
    /// Past the length the precision was sized for.
    pub fn step(&mut self) {
        assert!(
            self.steps < self.max_steps,
            "precision sized for {} steps",
            self.max_steps
        );
        for (p, a) in self.powers.iter_mut().zip(&self.spectrum) {
            *p = p.mul(a, self.precision, RM);
        }
        self.steps += 1;
    }

    /// `𝒲_t(R)` at the current length, unrounded.
    pub fn count(&self, r: i64) -> f64 {
        let n = self.n_sites;
        let r = r.rem_euclid(n as i64) as usize;
        let mut sum = BigFloat::from_u64(0, self.precision);
        for (k, p) in self.powers.iter().enumerate() {
            sum = sum.add(
                &p.mul(&self.cos_table[(r * k) % n], self.precision, RM),
                self.precision,
                RM,
            );
        }
        let sum = sum.div(&BigFloat::from_u64(n as u64, self.precision), self.precision, RM);
        big_to_f64(&sum)
    }

    /// `𝒲_t(R)` for `R = 0, …, N − 1`.
    pub fn counts(&self) -> Vec<f64> {
        (0..self.n_sites as i64).map(|r| self.count(r)).collect()
    }
}

fn big_to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    x.to_string().parse().expect("decimal rendering of a finite value")
}

/// Exact path counts `𝒲_t(R)` for successive lengths `t`, one step at a time.
#[derive(Debug, Clone)]
pub struct ExactWalker {
    graph: CirculantGraph,
    counts: Vec<BigUint>,
    steps: u64,
}

impl ExactWalker {
    pub fn new(graph: &CirculantGraph) -> Self {
        let mut counts = vec![BigUint::zero(); graph.n_sites];
        counts[0] = BigUint::one();
        Self {
            graph: *graph,
            counts,
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Counts indexed by `R = 0, …, N−1` after [`Self::steps`] steps.
    pub fn counts(&self) -> &[BigUint] {
        &self.counts
    }

    /// Advances by one step: `new[r] = Σ_{0<|o|≤W} old[r+o]`, evaluated as a
    /// sliding window sum so that a step costs `O(N)` additions.
    pub fn step(&mut self) {
        let n = self.graph.n_sites as i64;
        let w = self.graph.half_bandwidth as i64;
        let at = |i: i64| i.rem_euclid(n) as usize;
        let old = &self.counts;
        let mut window = BigUint::zero();
        for o in -w..=w {
            window += &old[at(o)];
        }
        let mut next = Vec::with_capacity(old.len());
        for r in 0..n {
            if r > 0 {
                window += &old[at(r + w)];
                window -= &old[at(r - 1 - w)];
            }
            next.push(&window - &old[r as usize]);
        }
        self.counts = next;
        self.steps += 1;
    }
}

/// Exact path counts `𝒲_n(R)` for `R = 0, …, N−1`.
///
/// Fails with [`Error::Budget`] when `N · n` exceeds `budget`.
pub fn walk_count_dp(graph: &CirculantGraph, n: u64, budget: u128) -> Result<Vec<BigUint>> {
    check_budget("walk-count DP (N·n)", graph.n_sites as u128 * n as u128, budget)?;
    let mut walker = ExactWalker::new(graph);
    for _ in 0..n {
        walker.step();
    }
    Ok(walker.counts)
}

/// Exact number of non-backtracking paths `u = u_0, u_1, …, u_n = v` on the
/// graph with `u_1 ∉ A` and `u_{n−1} ∉ B`.
///
/// The DP runs over directed-edge states `(previous, current)`. Fails with
/// [`Error::Budget`] when `N · W · n` exceeds `budget`.
pub fn nb_walk_count(
    graph: &CirculantGraph,
    n: usize,
    u: usize,
    v: usize,
    avoid_first: &HashSet<usize>,
    avoid_last: &HashSet<usize>,
    budget: u128,
) -> Result<BigUint> {
    if n == 0 {
        return Err(Error::InvalidParams("path length must be positive".into()));
    }
    let big_n = graph.n_sites;
    if u >= big_n || v >= big_n {
        return Err(Error::InvalidParams(format!("vertices must lie in [0, {big_n})")));
    }
    check_budget(
        "non-backtracking DP (N·W·n)",
        (big_n * graph.half_bandwidth) as u128 * n as u128,
        budget,
    )?;
    let neighbors: Vec<Vec<usize>> = (0..big_n).map(|x| graph.neighbors(x)).collect();
    let deg = graph.degree();
    // state index: current * deg + slot of previous in neighbors[current]
    let slot = |cur: usize, prev: usize| neighbors[cur].iter().position(|&x| x == prev);
    let mut counts = vec![BigUint::zero(); big_n * deg];
    // Vertex at position 1 of the path.
    for &first in &neighbors[u] {
        if avoid_first.contains(&first) {
            continue;
        }
        if n == 1 && avoid_last.contains(&u) {
            continue;
        }
        let s = slot(first, u).expect("adjacency is symmetric");
        counts[first * deg + s] += 1u32;
    }
    // After step t (t ≥ 1) the state records (u_{t−1}, u_t).
    for t in 1..n {
        let mut next = vec![BigUint::zero(); big_n * deg];
        for cur in 0..big_n {
            for (s, &prev) in neighbors[cur].iter().enumerate() {
                let c = &counts[cur * deg + s];
                if c.is_zero() {
                    continue;
                }
                // Moving to x makes cur the vertex at position t.
                if t == n - 1 && avoid_last.contains(&cur) {
                    continue;
                }
                for &x in &neighbors[cur] {
                    if x == prev {
                        continue;
                    }
                    let s2 = slot(x, cur).expect("adjacency is symmetric");
                    next[x * deg + s2] += c;
                }
            }
        }
        counts = next;
    }
    let mut total = BigUint::zero();
    for s in 0..deg {
        total += &counts[v * deg + s];
    }
    Ok(total)
}

pub fn walk_asymptotics(graph: &CirculantGraph, n: u64, r: i64) -> WalkAsymptotics {
    walk_asymptotics_with(graph, n, r, UpperBoundConstants::default())
}

pub fn walk_asymptotics_with(
    graph: &CirculantGraph,
    n: u64,
    r: i64,
    constants: UpperBoundConstants,
) -> WalkAsymptotics {
    let n = n as f64;
    let w = graph.half_bandwidth as f64;
    let r = r as f64;
    let spread = n * (w + 1.0) * (2.0 * w + 1.0);
    let gaussian = (PI * spread / 3.0).powf(-0.5) * (-3.0 * r * r / spread).exp();
    let uniform = 1.0 / graph.n_sites as f64;
    let upper_bound =
        constants.outer * ((w * n.sqrt()).recip() * (-constants.inner * r * r / (n * w * w)).exp() + uniform);
    WalkAsymptotics {
        gaussian,
        uniform,
        upper_bound,
    }
}
