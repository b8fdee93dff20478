//! Chebyshev polynomials of the second kind, the non-backtracking operators
//! `H^(n)`, their traces, and the semicircle law.
//!
//! Two normalizations are in use. The moment machinery works with
//! `H / (2√(2W−1))` ([`nb_scale`]), the edge statistics with `H / (2√(2W))`
//! ([`edge_scale`]).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{check_budget, Error, Result};
use crate::sampler::{BandMatrix, SeedSpec};

/// Largest `N` accepted by [`nb_moment_traces`] by default.
pub const DEFAULT_TRACE_BUDGET: usize = 4096;

/// Default cap on `∏ (degree + 1)` in [`expand_chebyshev_product`]. Below
/// `2^53` every coefficient is an exactly represented integer.
pub const DEFAULT_PRODUCT_BUDGET: u128 = 1 << 53;

/// `U_n(x)` by the three-term recurrence.
pub fn chebyshev_u(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for _ in 0..n {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `U_0(x), …, U_n(x)`.
pub fn chebyshev_u_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(2.0 * x);
    }
    for k in 2..=n {
        out.push(2.0 * x * out[k - 1] - out[k - 2]);
    }
    out
}

/// `2√(2W−1)`, the scale of the non-backtracking moment machinery.
pub fn nb_scale(half_bandwidth: usize) -> f64 {
    2.0 * ((2 * half_bandwidth) as f64 - 1.0).sqrt()
}

/// `2√(2W)`, the scale of the edge statistics.
pub fn edge_scale(half_bandwidth: usize) -> f64 {
    2.0 * ((2 * half_bandwidth) as f64).sqrt()
}

/// Rescales an eigenvalue of `H/(2√(2W−1))` to `H/(2√(2W))`.
pub fn nb_to_edge(alpha: f64, half_bandwidth: usize) -> f64 {
    alpha * nb_scale(half_bandwidth) / edge_scale(half_bandwidth)
}

/// Rescales an eigenvalue of `H/(2√(2W))` to `H/(2√(2W−1))`.
pub fn edge_to_nb(alpha: f64, half_bandwidth: usize) -> f64 {
    alpha * edge_scale(half_bandwidth) / nb_scale(half_bandwidth)
}

/// A finite combination `Σ c_k U_k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChebExpansion {
    coefficients: BTreeMap<usize, f64>,
}

impl ChebExpansion {
    pub fn new() -> Self {
        Self::default()
    }

    /// The single polynomial `U_k`.
    pub fn unit(k: usize) -> Self {
        let mut e = Self::new();
        e.add_term(k, 1.0);
        e
    }

    pub fn add_term(&mut self, k: usize, c: f64) {
        let slot = self.coefficients.entry(k).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.coefficients.remove(&k);
        }
    }

    pub fn coefficient(&self, k: usize) -> f64 {
        self.coefficients.get(&k).copied().unwrap_or(0.0)
    }

    pub fn coefficients(&self) -> &BTreeMap<usize, f64> {
        &self.coefficients
    }

    pub fn degree(&self) -> Option<usize> {
        self.coefficients.keys().next_back().copied()
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let Some(deg) = self.degree() else {
            return 0.0;
        };
        let u = chebyshev_u_all(deg, x);
        self.coefficients.iter().map(|(&k, &c)| c * u[k]).sum()
    }

    /// Product with `U_l`, by [`linearize_pair`] on each term.
    pub fn times_u(&self, l: usize) -> Self {
        let mut out = Self::new();
        for (&k, &c) in &self.coefficients {
            for m in 0..=k.min(l) {
                out.add_term(k.abs_diff(l) + 2 * m, c);
            }
        }
        out
    }
}

/// `U_k U_l = Σ_{m=0}^{min(k,l)} U_{|l−k|+2m}`.
pub fn linearize_pair(k: usize, l: usize) -> ChebExpansion {
    ChebExpansion::unit(k).times_u(l)
}

/// Expands `∏ U_{n_j}` in the `U` basis.
pub fn expand_chebyshev_product(factors: &[usize]) -> Result<ChebExpansion> {
    expand_chebyshev_product_with_budget(factors, DEFAULT_PRODUCT_BUDGET)
}

pub fn expand_chebyshev_product_with_budget(factors: &[usize], budget: u128) -> Result<ChebExpansion> {
    let size = factors
        .iter()
        .try_fold(1u128, |acc, &d| acc.checked_mul(d as u128 + 1))
        .unwrap_or(u128::MAX);
    check_budget("Chebyshev product size", size, budget)?;
    let mut out = ChebExpansion::unit(0);
    for &d in factors {
        out = out.times_u(d);
    }
    Ok(out)
}

/// Density `(2/π)√(1−α²)` of the semicircle law on `[−1, 1]`.
pub fn wigner_density(alpha: f64) -> f64 {
    if alpha.abs() >= 1.0 {
        0.0
    } else {
        2.0 / PI * (1.0 - alpha * alpha).sqrt()
    }
}

/// Distribution function of the semicircle law.
pub fn wigner_cdf(alpha: f64) -> f64 {
    if alpha <= -1.0 {
        0.0
    } else if alpha >= 1.0 {
        1.0
    } else {
        0.5 + (alpha * (1.0 - alpha * alpha).sqrt() + alpha.asin()) / PI
    }
}

/// Sup-distance between the empirical distribution of `samples` and the
/// semicircle law, checked on both sides of every jump.
pub fn wigner_sup_distance(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = wigner_cdf(x);
        sup = sup.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(sup)
}

/// A finite positive measure on the line.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl SpectralMeasure {
    /// Sorts the points; every weight must be positive and finite.
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                actual: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidParams(format!("weight {w} is not positive")));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParams("non-finite support point".into()));
        }
        let mut pairs: Vec<(f64, f64)> = points.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (points, weights) = pairs.into_iter().unzip();
        Ok(Self { points, weights })
    }

    /// Mass `1/N` at each eigenvalue.
    pub fn empirical(eigenvalues: &[f64]) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::EmptyInput("eigenvalues"));
        }
        let w = 1.0 / eigenvalues.len() as f64;
        Self::new(eigenvalues.to_vec(), vec![w; eigenvalues.len()])
    }

    /// The semicircle law on `nodes` Gauss nodes for the weight `√(1−x²)`;
    /// integrates polynomials of degree below `2·nodes` exactly.
    pub fn wigner_quadrature(nodes: usize) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidParams("need at least one node".into()));
        }
        let h = PI / (nodes + 1) as f64;
        let (points, weights) = (1..=nodes)
            .map(|i| {
                let t = i as f64 * h;
                (t.cos(), 2.0 / PI * h * t.sin().powi(2))
            })
            .unzip();
        Self::new(points, weights)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `μ̂(n) = ∫ U_n dμ`.
pub fn measure_cheb_coeff(mu: &SpectralMeasure, n: usize) -> f64 {
    mu.points
        .iter()
        .zip(&mu.weights)
        .map(|(&x, &w)| w * chebyshev_u(n, x))
        .sum()
}

/// `ρ/s + √ρ · Σ_{n=1}^{s} |μ̂(n)|/n` with `ρ = max(1 − |α|, s^{−2})`.
///
/// This is the bound on `|μ([α, ∞)) − μ_W([α, ∞))|` with the unknown
/// constant set to one.
pub fn erdos_turan_gap_bound(mu_hat: &[f64], alpha: f64, s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::InvalidParams("s must be positive".into()));
    }
    if mu_hat.len() != s {
        return Err(Error::DimensionMismatch {
            expected: s,
            actual: mu_hat.len(),
        });
    }
    let s_f = s as f64;
    let rho = (1.0 - alpha.abs()).max(1.0 / (s_f * s_f));
    let tail: f64 = mu_hat.iter().enumerate().map(|(i, m)| m.abs() / (i + 1) as f64).sum();
    Ok(rho / s_f + rho.sqrt() * tail)
}

/// Runs the non-backtracking recursion on `x`, calling `visit(n, H^(n) x)`
/// for `n = 0..=n_max`.
fn nb_recursion<F>(h: &BandMatrix, n_max: usize, x: &[Complex64], mut visit: F) -> Result<()>
where
    F: FnMut(usize, &[Complex64]),
{
    let dim = h.n();
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: x.len(),
        });
    }
    let d = h.params().graph().degree() as f64;
    let mut prev = x.to_vec();
    visit(0, &prev);
    if n_max == 0 {
        return Ok(());
    }
    let mut cur = vec![Complex64::new(0.0, 0.0); dim];
    h.matvec_into(&prev, &mut cur)?;
    visit(1, &cur);
    let mut next = vec![Complex64::new(0.0, 0.0); dim];
    for n in 2..=n_max {
        h.matvec_into(&cur, &mut next)?;
        let c = if n == 2 { d } else { d - 1.0 };
        for (y, p) in next.iter_mut().zip(&prev) {
            *y -= c * p;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        visit(n, &cur);
    }
    Ok(())
}

/// `H^(n) x` in `O(n·N·W)`:
/// `H^(1) = H`, `H^(2) = H² − d`, `H^(m+1) = H·H^(m) − (d−1)·H^(m−1)`, where
/// `d` is the vertex degree (`2W` whenever `2W < N`).
pub fn hn_apply(h: &BandMatrix, n: usize, x: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    nb_recursion(h, n, x, |m, v| {
        if m == n {
            out = v.to_vec();
        }
    })?;
    Ok(out)
}

/// `tr H^(0), …, tr H^(n_max)` with `N` at most [`DEFAULT_TRACE_BUDGET`].
pub fn nb_moment_traces(h: &BandMatrix, n_max: usize) -> Result<Vec<f64>> {
    nb_moment_traces_with_budget(h, n_max, DEFAULT_TRACE_BUDGET)
}

/// Traces by running the recursion on every basis vector.
pub fn nb_moment_traces_with_budget(h: &BandMatrix, n_max: usize, max_sites: usize) -> Result<Vec<f64>> {
    let dim = h.n();
    check_budget("trace evaluation (sites)", dim as u128, max_sites as u128)?;
    (0..dim)
        .into_par_iter()
        .map(|u| {
            let mut e = vec![Complex64::new(0.0, 0.0); dim];
            e[u] = Complex64::new(1.0, 0.0);
            let mut diag = vec![0.0; n_max + 1];
            nb_recursion(h, n_max, &e, |m, v| diag[m] = v[u].re)?;
            Ok(diag)
        })
        .try_reduce(
            || vec![0.0; n_max + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
}

/// A stochastic trace estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

const PROBE_TAG: u64 = 0x7072_6f62;

/// Hutchinson estimate of `tr H^(n)` from `probes` random sign vectors.
///
/// Probe `i` draws from `seed.derive_rng(PROBE_TAG + i)`, so the result
/// does not depend on scheduling.
pub fn hutchinson_trace(h: &BandMatrix, n: usize, probes: usize, seed: &SeedSpec) -> Result<TraceEstimate> {
    if probes < 2 {
        return Err(Error::InvalidParams(
            "hutchinson_trace needs at least two probes".into(),
        ));
    }
    let dim = h.n();
    let samples = (0..probes)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.derive_rng(PROBE_TAG + 1 + i as u64);
            let z: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0))
                .collect();
            let y = hn_apply(h, n, &z)?;
            Ok(z.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let p = probes as f64;
    let mean = samples.iter().sum::<f64>() / p;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (p - 1.0);
    Ok(TraceEstimate {
        estimate: mean,
        std_error: (var / p).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_band_matrix, BandParams, Symmetry};

    fn params(n: usize, w: usize, s: Symmetry) -> BandParams {
        BandParams::new(n, w, s).unwrap()
    }

    #[test]
    fn chebyshev_examples() {
        assert_eq!(chebyshev_u(5, 1.0), 6.0);
        assert_eq!(chebyshev_u(2, 0.0), -1.0);
        assert!((chebyshev_u(7, 0.3f64.cos()) * 0.3f64.sin() - 2.4f64.sin()).abs() < 1e-12);
        assert_eq!(chebyshev_u_all(4, 0.25).last().copied(), Some(chebyshev_u(4, 0.25)));
    }

    #[test]
    fn linearization_examples() {
        let e = linearize_pair(1, 1);
        assert_eq!(e.coefficients().len(), 2);
        assert_eq!((e.coefficient(0), e.coefficient(2)), (1.0, 1.0));
        let e = linearize_pair(1, 2);
        assert_eq!(
            (e.coefficient(1), e.coefficient(3), e.coefficients().len()),
            (1.0, 1.0, 2)
        );
        assert_eq!(linearize_pair(0, 9), ChebExpansion::unit(9));
    }

    #[test]
    fn product_examples() {
        let e = expand_chebyshev_product(&[1, 1, 1, 1]).unwrap();
        let mut want = ChebExpansion::new();
        want.add_term(0, 2.0);
        want.add_term(2, 3.0);
        want.add_term(4, 1.0);
        assert_eq!(e, want);
        assert_eq!(e.evaluate(1.0), 16.0);
        assert_eq!(expand_chebyshev_product(&[2, 1]).unwrap(), linearize_pair(1, 2));
        for n in 0..8 {
            let e = expand_chebyshev_product(&[n; 4]).unwrap();
            assert_eq!(e.evaluate(1.0), ((n + 1) as f64).powi(4));
        }
    }

    #[test]
    fn product_budget() {
        assert!(matches!(
            expand_chebyshev_product_with_budget(&[9, 9, 9], 999),
            Err(Error::Budget { .. })
        ));
        assert!(expand_chebyshev_product_with_budget(&[9, 9, 9], 1000).is_ok());
    }

    #[test]
    fn wigner_cdf_examples() {
        assert_eq!(wigner_cdf(0.0), 0.5);
        assert_eq!(wigner_cdf(1.0), 1.0);
        assert_eq!(wigner_cdf(-1.0), 0.0);
        assert_eq!(wigner_cdf(3.0), 1.0);
        assert!((wigner_cdf(0.5) - 0.804_498_890_522_114_7).abs() < 1e-12);
    }

    #[test]
    fn wigner_cdf_matches_quadrature_of_density() {
        // Composite Simpson in θ, where α = −cos θ removes the endpoint singularity.
        for &a in &[-0.9, -0.3, 0.5, 0.99] {
            let top = (-a as f64).acos();
            let m = 2000;
            let h = top / m as f64;
            let g = |t: f64| wigner_density(-t.cos()) * t.sin();
            let mut acc = g(0.0) + g(top);
            for i in 1..m {
                acc += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            assert!((acc * h / 3.0 - wigner_cdf(a)).abs() < 1e-8, "alpha {a}");
        }
    }

    #[test]
    fn measure_coefficient_examples() {
        let mass = SpectralMeasure::new(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(measure_cheb_coeff(&mass, 3), 4.0);
        let w = SpectralMeasure::wigner_quadrature(100_000).unwrap();
        assert!((measure_cheb_coeff(&w, 0) - 1.0).abs() < 1e-12);
        for n in 1..=8 {
            assert!(measure_cheb_coeff(&w, n).abs() <= 1e-6);
        }
        assert!(SpectralMeasure::new(vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn erdos_turan_examples() {
        assert!((erdos_turan_gap_bound(&[0.0; 10], 0.0, 10).unwrap() - 0.1).abs() < 1e-15);
        assert!((erdos_turan_gap_bound(&[0.0; 10], 1.0, 10).unwrap() - 0.001).abs() < 1e-15);
        assert!(erdos_turan_gap_bound(&[0.0; 3], 1.0, 10).is_err());
    }

    #[test]
    fn normalization_round_trip() {
        assert!((edge_to_nb(nb_to_edge(0.7, 5), 5) - 0.7).abs() < 1e-15);
        assert_eq!(edge_scale(2), 4.0);
    }

    #[test]
    fn low_traces_vanish() {
        for s in [Symmetry::Signs, Symmetry::Phases] {
            let h = sample_band_matrix(&params(30, 3, s), &SeedSpec::new(4, 0));
            let t = nb_moment_traces(&h, 4).unwrap();
            assert_eq!(t[0], 30.0);
            assert!(t[1].abs() < 1e-12);
            assert!(t[2].abs() < 1e-10);
        }
    }

    fn dense_mul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut c = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = a[i * n + k];
                for j in 0..n {
                    c[i * n + j] += aik * b[k * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn recursion_matches_chebyshev_definition() {
        for (n_sites, w, s) in [
            (12, 2, Symmetry::Signs),
            (17, 4, Symmetry::Phases),
            (32, 3, Symmetry::Signs),
        ] {
            let h = sample_band_matrix(&params(n_sites, w, s), &SeedSpec::new(1, 2));
            let q = (2 * w - 1) as f64;
            let x: Vec<Complex64> = h.to_dense().iter().map(|z| z / (2.0 * q.sqrt())).collect();
            let mut id = vec![Complex64::new(0.0, 0.0); n_sites * n_sites];
            (0..n_sites).for_each(|i| id[i * n_sites + i] = Complex64::new(1.0, 0.0));
            // us[k] = U_k(X)
            let mut us = vec![id.clone(), x.iter().map(|z| 2.0 * z).collect::<Vec<_>>()];
            for k in 2..=20 {
                let t = dense_mul(&x, &us[k - 1], n_sites);
                let next = t.iter().zip(&us[k - 2]).map(|(a, b)| 2.0 * a - b).collect();
                us.push(next);
            }
            for n in 0..=20usize {
                let lower = |m: isize| if m < 0 { None } else { Some(&us[m as usize]) };
                let want: Vec<Complex64> = (0..n_sites * n_sites)
                    .map(|i| {
                        let a = us[n][i];
                        let b = lower(n as isize - 2).map_or(Complex64::new(0.0, 0.0), |u| u[i]);
                        q.powf(n as f64 / 2.0) * (a - b / q)
                    })
                    .collect();
                for col in 0..n_sites {
                    let mut e = vec![Complex64::new(0.0, 0.0); n_sites];
                    e[col] = Complex64::new(1.0, 0.0);
                    let got = hn_apply(&h, n, &e).unwrap();
                    for row in 0..n_sites {
                        let diff = (got[row] - want[row * n_sites + col]).norm();
                        assert!(diff <= 1e-8 * (1.0 + want[row * n_sites + col].norm()), "n={n}");
                    }
                }
            }
        }
    }

    #[test]
    fn hn_apply_base_cases() {
        let h = sample_band_matrix(&params(20, 3, Symmetry::Phases), &SeedSpec::new(8, 0));
        let x: Vec<Complex64> = (0..20).map(|i| Complex64::new(i as f64, 1.0)).collect();
        assert_eq!(hn_apply(&h, 0, &x).unwrap(), x);
        assert_eq!(hn_apply(&h, 1, &x).unwrap(), crate::sampler::matvec(&h, &x).unwrap());
        assert!(hn_apply(&h, 3, &x[..5]).is_err());
    }

    #[test]
    fn hutchinson_examples() {
        let h = sample_band_matrix(&params(512, 16, Symmetry::Signs), &SeedSpec::new(2, 0));
        let seed = SeedSpec::new(77, 0);
        let t0 = hutchinson_trace(&h, 0, 8, &seed).unwrap();
        assert_eq!(t0.estimate, 512.0);
        for n in [1, 2] {
            let t = hutchinson_trace(&h, n, 64, &seed).unwrap();
            assert!(t.estimate.abs() <= 4.0 * t.std_error, "n={n}: {t:?}");
        }
        assert!(hutchinson_trace(&h, 2, 1, &seed).is_err());
        assert_eq!(
            hutchinson_trace(&h, 4, 16, &seed).unwrap(),
            hutchinson_trace(&h, 4, 16, &seed).unwrap()
        );
    }

    #[test]
    fn trace_budget() {
        let h = sample_band_matrix(&params(64, 2, Symmetry::Signs), &SeedSpec::new(0, 0));
        assert!(matches!(
            nb_moment_traces_with_budget(&h, 3, 32),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn wigner_sup_distance_of_quantiles_is_small() {
        let m = 1000;
        let q: Vec<f64> = (0..m)
            .map(|i| {
                let target = (i as f64 + 0.5) / m as f64;
                let (mut lo, mut hi) = (-1.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if wigner_cdf(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        assert!((wigner_sup_distance(&q).unwrap() - 0.5 / m as f64).abs() < 1e-9);
        assert!(wigner_sup_distance(&[]).is_err());
    }
}
