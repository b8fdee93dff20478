//! Monte Carlo statistics of the extreme eigenvalues.
//!
//! Eigenvalues here are those of `H / (2√(2W))`, so the semicircle sits on
//! `[−1, 1]`. Two edge scalings are supported:
//!
//! * [`Regime::Rmt`]: `2N^{2/3}(α_max − 1)`, the wide-band scaling.
//! * [`Regime::Poisson`]: `2W^{4/5}(1 − α_max)`, the narrow-band scaling.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cheby::edge_scale;
use crate::error::{check_budget, Error, Result};
pub use crate::linalg::EigenRoute;
use crate::linalg::{raw_eigenvalues, raw_eigenvectors};
use crate::sampler::{sample_band_matrix, BandMatrix, BandParams, SeedSpec};

/// Largest `N` the eigensolvers accept by default.
pub const DEFAULT_EIGEN_BUDGET: usize = 4096;

/// Solver choice and size limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EigenOptions {
    pub max_sites: usize,
    pub route: EigenRoute,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            max_sites: DEFAULT_EIGEN_BUDGET,
            route: EigenRoute::Auto,
        }
    }
}

/// Eigenvalues of `H / (2√(2W))`, ascending.
pub fn eigenvalues(h: &BandMatrix) -> Result<Vec<f64>> {
    eigenvalues_with(h, &EigenOptions::default())
}

pub fn eigenvalues_with(h: &BandMatrix, opts: &EigenOptions) -> Result<Vec<f64>> {
    check_budget("eigensolve (sites)", h.n() as u128, opts.max_sites as u128)?;
    let scale = edge_scale(h.params().half_bandwidth());
    let mut ev = raw_eigenvalues(h, opts.route)?;
    ev.iter_mut().for_each(|x| *x /= scale);
    Ok(ev)
}

/// Unit eigenvector of `H` for its largest (`Side::Right`) or smallest
/// eigenvalue.
pub fn edge_eigenvector(h: &BandMatrix, side: Side, opts: &EigenOptions) -> Result<Vec<Complex64>> {
    check_budget("eigensolve (sites)", h.n() as u128, opts.max_sites as u128)?;
    let ev = raw_eigenvalues(h, opts.route)?;
    let target = match side {
        Side::Right => ev[ev.len() - 1],
        Side::Left => ev[0],
    };
    Ok(raw_eigenvectors(h, &[target], opts.route)?.remove(0))
}

/// `‖H v − λ·2√(2W)·v‖` for an eigenvalue `λ` of the normalized matrix.
pub fn eigen_residual(h: &BandMatrix, lambda: f64, v: &[Complex64]) -> Result<f64> {
    let hv = crate::sampler::matvec(h, v)?;
    let shift = lambda * edge_scale(h.params().half_bandwidth());
    Ok(hv
        .iter()
        .zip(v)
        .map(|(a, b)| (a - shift * b).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Which edge scaling to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Rmt,
    Poisson,
}

impl Regime {
    /// Factor `s` such that the scaled variable is `s·(α_max − 1)` up to sign:
    /// `2N^{2/3}` or `2W^{4/5}`.
    pub fn edge_factor(self, params: &BandParams) -> f64 {
        match self {
            Regime::Rmt => 2.0 * (params.n_sites() as f64).powf(2.0 / 3.0),
            Regime::Poisson => 2.0 * (params.half_bandwidth() as f64).powf(0.8),
        }
    }

    /// Multiplier applied to raw counts: `1` or `W^{6/5}/N`.
    pub fn count_factor(self, params: &BandParams) -> f64 {
        match self {
            Regime::Rmt => 1.0,
            Regime::Poisson => (params.half_bandwidth() as f64).powf(1.2) / params.n_sites() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Right,
    Left,
}

/// The spectrum of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSample {
    pub params: BandParams,
    pub seed: SeedSpec,
    pub eigenvalues: Vec<f64>,
    pub alpha_max: f64,
    pub alpha_min: f64,
}

impl EdgeSample {
    /// Samples `H` and solves; fails if the trace of the result is not zero.
    pub fn compute(params: &BandParams, seed: &SeedSpec, opts: &EigenOptions) -> Result<Self> {
        let h = sample_band_matrix(params, seed);
        let ev = eigenvalues_with(&h, opts)?;
        Self::from_eigenvalues(*params, *seed, ev)
    }

    pub fn from_eigenvalues(params: BandParams, seed: SeedSpec, mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::EmptyInput("eigenvalues"));
        }
        eigenvalues.sort_by(f64::total_cmp);
        let n = eigenvalues.len() as f64;
        let trace: f64 = eigenvalues.iter().sum();
        if trace.abs() > 1e-8 * n {
            return Err(Error::Numeric(format!("eigenvalues sum to {trace}, not 0")));
        }
        Ok(Self {
            params,
            seed,
            alpha_max: eigenvalues[eigenvalues.len() - 1],
            alpha_min: eigenvalues[0],
            eigenvalues,
        })
    }
}

/// Scaled extremes of one replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledExtremes {
    pub right: f64,
    pub left: f64,
}

/// `rmt`: `2N^{2/3}(α_max − 1)` and `−2N^{2/3}(α_min + 1)`;
/// `poisson`: `2W^{4/5}(1 − α_max)` and `2W^{4/5}(1 + α_min)`.
pub fn scaled_extremes(sample: &EdgeSample, regime: Regime) -> ScaledExtremes {
    scale_extremes(&sample.params, sample.alpha_max, sample.alpha_min, regime)
}

pub fn scale_extremes(params: &BandParams, alpha_max: f64, alpha_min: f64, regime: Regime) -> ScaledExtremes {
    let f = regime.edge_factor(params);
    match regime {
        Regime::Rmt => ScaledExtremes {
            right: f * (alpha_max - 1.0),
            left: -f * (alpha_min + 1.0),
        },
        Regime::Poisson => ScaledExtremes {
            right: f * (1.0 - alpha_max),
            left: f * (1.0 + alpha_min),
        },
    }
}

/// A scaled counting measure on a grid of `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingCurve {
    pub lambda_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub regime: Regime,
    pub side: Side,
}

/// `count` evenly spaced points from `start` to `stop`.
pub fn lambda_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 || !(stop > start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidParams(format!(
            "grid needs count ≥ 2 and start < stop, got ({start}, {stop}, {count})"
        )));
    }
    let h = (stop - start) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| if i + 1 == count { stop } else { start + i as f64 * h })
        .collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("lambda grid"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParams("lambda grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Unscaled counts on the grid: eigenvalues `> 1 − λ/s` on the right and
/// `≤ −1 + λ/s` on the left, with `s` the regime's edge factor.
pub fn raw_edge_counts(eigenvalues: &[f64], params: &BandParams, regime: Regime, grid: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let f = regime.edge_factor(params);
    let right = grid
        .iter()
        .map(|&l| {
            let t = 1.0 - l / f;
            (eigenvalues.len() - eigenvalues.partition_point(|&x| x <= t)) as f64
        })
        .collect();
    let left = grid
        .iter()
        .map(|&l| {
            let t = -1.0 + l / f;
            eigenvalues.partition_point(|&x| x <= t) as f64
        })
        .collect();
    (right, left)
}

/// `σ_R` and `σ_L` of one replicate.
pub fn counting_curves(sample: &EdgeSample, regime: Regime, grid: &[f64]) -> Result<(CountingCurve, CountingCurve)> {
    check_grid(grid)?;
    let (right, left) = raw_edge_counts(&sample.eigenvalues, &sample.params, regime, grid);
    let c = regime.count_factor(&sample.params);
    let curve = |values: Vec<f64>, side| CountingCurve {
        lambda_grid: grid.to_vec(),
        values: values.into_iter().map(|v| v * c).collect(),
        regime,
        side,
    };
    Ok((curve(right, Side::Right), curve(left, Side::Left)))
}

/// What an ensemble keeps from each replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub alpha_max: f64,
    pub alpha_min: f64,
    /// Unscaled counts on the ensemble grid.
    pub count_right: Vec<f64>,
    pub count_left: Vec<f64>,
}

/// Monte Carlo run description.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub params: BandParams,
    pub replicates: u64,
    pub master_seed: u64,
    pub regime: Regime,
    pub lambda_grid: Vec<f64>,
    pub eigen: EigenOptions,
}

/// Aggregated results; every per-replicate list is in replicate order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub params: BandParams,
    pub regime: Regime,
    pub replicate_count: u64,
    pub alpha_max: Vec<f64>,
    pub alpha_min: Vec<f64>,
    pub scaled_max_samples: Vec<f64>,
    pub scaled_min_samples: Vec<f64>,
    pub mean_curve_r: CountingCurve,
    pub mean_curve_l: CountingCurve,
    /// Sample standard deviation of the scaled `σ_R` across replicates.
    pub std_curve_r: Vec<f64>,
    /// `max(|α_max|, |α_min|)` per replicate.
    pub norm_ratios: Vec<f64>,
}

impl EnsembleSummary {
    pub fn from_replicates(
        params: BandParams,
        regime: Regime,
        grid: &[f64],
        replicates: &[ReplicateResult],
    ) -> Result<Self> {
        check_grid(grid)?;
        if replicates.is_empty() {
            return Err(Error::EmptyInput("replicates"));
        }
        let m = replicates.len() as f64;
        let c = regime.count_factor(&params);
        let g = grid.len();
        let mut mean_r = vec![0.0; g];
        let mut mean_l = vec![0.0; g];
        for r in replicates {
            if r.count_right.len() != g || r.count_left.len() != g {
                return Err(Error::DimensionMismatch {
                    expected: g,
                    actual: r.count_right.len().min(r.count_left.len()),
                });
            }
            for i in 0..g {
                mean_r[i] += c * r.count_right[i];
                mean_l[i] += c * r.count_left[i];
            }
        }
        mean_r.iter_mut().chain(mean_l.iter_mut()).for_each(|v| *v /= m);
        let std_r = (0..g)
            .map(|i| {
                if replicates.len() < 2 {
                    return 0.0;
                }
                let ss: f64 = replicates
                    .iter()
                    .map(|r| (c * r.count_right[i] - mean_r[i]).powi(2))
                    .sum();
                (ss / (m - 1.0)).sqrt()
            })
            .collect();
        let scaled: Vec<ScaledExtremes> = replicates
            .iter()
            .map(|r| scale_extremes(&params, r.alpha_max, r.alpha_min, regime))
            .collect();
        let curve = |values, side| CountingCurve {
            lambda_grid: grid.to_vec(),
            values,
            regime,
            side,
        };
        Ok(Self {
            params,
            regime,
            replicate_count: replicates.len() as u64,
            alpha_max: replicates.iter().map(|r| r.alpha_max).collect(),
            alpha_min: replicates.iter().map(|r| r.alpha_min).collect(),
            scaled_max_samples: scaled.iter().map(|s| s.right).collect(),
            scaled_min_samples: scaled.iter().map(|s| s.left).collect(),
            mean_curve_r: curve(mean_r, Side::Right),
            mean_curve_l: curve(mean_l, Side::Left),
            std_curve_r: std_r,
            norm_ratios: replicates
                .iter()
                .map(|r| r.alpha_max.abs().max(r.alpha_min.abs()))
                .collect(),
        })
    }
}

/// Runs one replicate of `config`.
pub fn run_replicate(config: &EnsembleConfig, index: u64) -> Result<ReplicateResult> {
    let seed = SeedSpec::new(config.master_seed, index);
    let sample = EdgeSample::compute(&config.params, &seed, &config.eigen).map_err(|e| Error::Replicate {
        index,
        source: Box::new(e),
    })?;
    let (count_right, count_left) =
        raw_edge_counts(&sample.eigenvalues, &config.params, config.regime, &config.lambda_grid);
    Ok(ReplicateResult {
        alpha_max: sample.alpha_max,
        alpha_min: sample.alpha_min,
        count_right,
        count_left,
    })
}

/// Runs every replicate; replicate `r` uses `SeedSpec(master_seed, r)`.
/// The result does not depend on the number of worker threads.
pub fn ensemble_run(config: &EnsembleConfig) -> Result<EnsembleSummary> {
    if config.replicates == 0 {
        return Err(Error::InvalidParams("replicates must be positive".into()));
    }
    check_grid(&config.lambda_grid)?;
    let results = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, r))
        .collect::<Result<Vec<_>>>()?;
    EnsembleSummary::from_replicates(config.params, config.regime, &config.lambda_grid, &results)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyInput("first sample"));
    }
    if b.is_empty() {
        return Err(Error::EmptyInput("second sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

/// Power law `σ(λ) ≈ coefficient · λ^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub exponent: f64,
    pub coefficient: f64,
}

/// Least squares of `log σ` on `log λ` over grid points in `[lo, hi]` with
/// positive values; needs at least five of them.
pub fn tail_fit(curve: &CountingCurve, lo: f64, hi: f64) -> Result<TailFit> {
    let pts: Vec<(f64, f64)> = curve
        .lambda_grid
        .iter()
        .zip(&curve.values)
        .filter(|(&l, &v)| l >= lo && l <= hi && l > 0.0 && v > 0.0)
        .map(|(&l, &v)| (l.ln(), v.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} usable grid points in [{lo}, {hi}], need 5",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    Ok(TailFit {
        exponent,
        coefficient: (my - exponent * mx).exp(),
    })
}

/// `sup_λ |P̂(2W^{4/5}(1 − α_max) ≥ λ) − exp(−(N/W^{6/5})·σ̄_R(λ))|` over
/// the grid.
pub fn survival_consistency(summary: &EnsembleSummary) -> Result<f64> {
    if summary.regime != Regime::Poisson {
        return Err(Error::WrongRegime { expected: "poisson" });
    }
    let m = summary.scaled_max_samples.len() as f64;
    let c = summary.regime.count_factor(&summary.params);
    let mut sup: f64 = 0.0;
    for (&l, &sigma) in summary
        .mean_curve_r
        .lambda_grid
        .iter()
        .zip(&summary.mean_curve_r.values)
    {
        let empirical = summary.scaled_max_samples.iter().filter(|&&x| x >= l).count() as f64 / m;
        sup = sup.max((empirical - (-sigma / c).exp()).abs());
    }
    Ok(sup)
}

/// `‖H / (2√(2W))‖`.
pub fn norm_statistic(h: &BandMatrix) -> Result<f64> {
    norm_statistic_with(h, &EigenOptions::default())
}

pub fn norm_statistic_with(h: &BandMatrix, opts: &EigenOptions) -> Result<f64> {
    let ev = eigenvalues_with(h, opts)?;
    Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
}

/// Inverse participation ratio `Σ|v|⁴ / (Σ|v|²)²`.
pub fn ipr(v: &[Complex64]) -> Result<f64> {
    let sq: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    if sq == 0.0 {
        return Err(Error::InvalidParams("zero vector has no participation ratio".into()));
    }
    Ok(v.iter().map(|x| x.norm_sqr().powi(2)).sum::<f64>() / (sq * sq))
}

/// Median of a nonempty sample.
pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("sample"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
