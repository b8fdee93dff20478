//! Random periodic band matrices: parameters, seeding, sampling, the banded
//! matrix-vector kernel, invariant checks, exhaustive sign enumeration and
//! the CSV matrix dump.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circulant::CirculantGraph;
use crate::error::{check_budget, Error, Result};
use crate::fmt_f64;

/// Identifier of the random stream construction, recorded in manifests.
pub const RNG_ID: &str = "rand_chacha 0.9 ChaCha8Rng; key = seed_from_u64(master_seed ^ tag), stream = replicate_index";

/// Largest edge count accepted by [`enumerate_sign_assignments`].
pub const MAX_ENUMERATED_EDGES: usize = 24;

/// Symmetry class of the entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symmetry {
    /// `β = 1`: independent uniform signs.
    Signs,
    /// `β = 2`: independent uniform phases.
    Phases,
}

impl Symmetry {
    pub fn beta(self) -> u8 {
        match self {
            Symmetry::Signs => 1,
            Symmetry::Phases => 2,
        }
    }

    pub fn from_beta(beta: u8) -> Result<Self> {
        match beta {
            1 => Ok(Symmetry::Signs),
            2 => Ok(Symmetry::Phases),
            other => Err(Error::InvalidParams(format!("beta must be 1 or 2, got {other}"))),
        }
    }
}

/// `(N, W, β)` with `1 ≤ W ≤ ⌊N/2⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BandParams {
    graph: CirculantGraph,
    symmetry: Symmetry,
}

impl BandParams {
    pub fn new(n_sites: usize, half_bandwidth: usize, symmetry: Symmetry) -> Result<Self> {
        Ok(Self {
            graph: CirculantGraph::new(n_sites, half_bandwidth)?,
            symmetry,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.graph.n_sites()
    }

    pub fn half_bandwidth(&self) -> usize {
        self.graph.half_bandwidth()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn graph(&self) -> &CirculantGraph {
        &self.graph
    }

    /// Number of independent entries.
    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    /// The stored pairs `(u, u + d mod N)`, `1 ≤ d ≤ W`, in canonical order.
    /// For even `N` the antipodal pair (`d = N/2`) is listed once, from the
    /// smaller endpoint.
    pub fn canonical_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites();
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..n {
            for d in 1..=self.half_bandwidth() {
                if 2 * d == n && u >= n / 2 {
                    continue;
                }
                out.push((u, (u + d) % n));
            }
        }
        out
    }
}

/// Master seed plus replicate index; every random stream in a run is a
/// deterministic function of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replicate_index: u64,
}

const MATRIX_TAG: u64 = 0;

impl SeedSpec {
    pub fn new(master_seed: u64, replicate_index: u64) -> Self {
        Self {
            master_seed,
            replicate_index,
        }
    }

    /// Stream used for matrix entries.
    pub fn rng(&self) -> ChaCha8Rng {
        self.derive_rng(MATRIX_TAG)
    }

    /// A stream keyed by `tag`, independent of the matrix stream for any
    /// nonzero tag.
    pub fn derive_rng(&self, tag: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(self.replicate_index);
        rng
    }
}

/// One stored entry: `H[row][col] = value` and `H[col][row] = conj(value)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandEntry {
    pub row: usize,
    pub col: usize,
    pub value: Complex64,
}

/// A Hermitian matrix held as its list of stored upper entries.
///
/// Sampled matrices hold exactly the canonical pairs of their
/// [`BandParams`]. Arbitrary entries can be added with
/// [`BandMatrix::set_entry`]; [`validate`] reports the ones that break the
/// band-matrix invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    params: BandParams,
    entries: Vec<BandEntry>,
}

impl BandMatrix {
    pub fn from_entries(params: BandParams, entries: Vec<BandEntry>) -> Self {
        Self { params, entries }
    }

    pub fn params(&self) -> &BandParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n_sites()
    }

    pub fn entries(&self) -> &[BandEntry] {
        &self.entries
    }

    /// Sets the stored value for the pair, replacing an entry stored under
    /// either orientation.
    pub fn set_entry(&mut self, row: usize, col: usize, value: Complex64) {
        for e in &mut self.entries {
            if e.row == row && e.col == col {
                e.value = value;
                return;
            }
            if e.row == col && e.col == row {
                e.value = value.conj();
                return;
            }
        }
        self.entries.push(BandEntry { row, col, value });
    }

    /// Matrix element `H[u][v]`.
    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for e in &self.entries {
            if e.row == u && e.col == v {
                acc += e.value;
            } else if e.row == v && e.col == u {
                acc += e.value.conj();
            }
        }
        acc
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let n = self.n();
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for e in &self.entries {
            out[e.row * n + e.col] += e.value;
            if e.row != e.col {
                out[e.col * n + e.row] += e.value.conj();
            }
        }
        out
    }

    /// `y ← H x` without allocating.
    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: y.len(),
            });
        }
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for e in &self.entries {
            y[e.row] += e.value * x[e.col];
            if e.row != e.col {
                y[e.col] += e.value.conj() * x[e.row];
            }
        }
        Ok(())
    }

    /// Sum of `|H_uv|²` over row `u`, i.e. `(H²)_{uu}`.
    pub fn row_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n()];
        for e in &self.entries {
            let m = e.value.norm_sqr();
            w[e.row] += m;
            if e.row != e.col {
                w[e.col] += m;
            }
        }
        w
    }

    /// Writes the `u,v,re,im` dump, one row per stored entry.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "u,v,re,im")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{}",
                e.row,
                e.col,
                fmt_f64(e.value.re),
                fmt_f64(e.value.im)
            )?;
        }
        Ok(())
    }

    /// Inverse of [`BandMatrix::write_csv`].
    pub fn read_csv<R: BufRead>(params: BandParams, input: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let line = line.trim();
            if i == 0 {
                if line != "u,v,re,im" {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected header `u,v,re,im`, got `{line}`"),
                    });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let bad = |what: &str| Error::Parse {
                line: line_no,
                message: format!("cannot parse {what}"),
            };
            let row: usize = fields[0].parse().map_err(|_| bad("u"))?;
            let col: usize = fields[1].parse().map_err(|_| bad("v"))?;
            let re: f64 = fields[2].parse().map_err(|_| bad("re"))?;
            let im: f64 = fields[3].parse().map_err(|_| bad("im"))?;
            entries.push(BandEntry {
                row,
                col,
                value: Complex64::new(re, im),
            });
        }
        Ok(Self { params, entries })
    }
}

/// Draws `H` for the given parameters and seed.
///
/// Entries are drawn in canonical pair order from [`SeedSpec::rng`]:
/// a fair bit for signs, `exp(2πi t)` with `t` uniform on `[0, 1)` for
/// phases.
pub fn sample_band_matrix(params: &BandParams, seed: &SeedSpec) -> BandMatrix {
    let mut rng = seed.rng();
    let entries = params
        .canonical_pairs()
        .into_iter()
        .map(|(row, col)| {
            let value = match params.symmetry() {
                Symmetry::Signs => {
                    if rng.random::<bool>() {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(-1.0, 0.0)
                    }
                }
                Symmetry::Phases => {
                    let t: f64 = rng.random();
                    Complex64::from_polar(1.0, 2.0 * PI * t)
                }
            };
            BandEntry { row, col, value }
        })
        .collect();
    BandMatrix {
        params: *params,
        entries,
    }
}

/// `H x`, in `O(N·W)`.
pub fn matvec(h: &BandMatrix, x: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut y = vec![Complex64::new(0.0, 0.0); h.n()];
    h.matvec_into(x, &mut y)?;
    Ok(y)
}

/// A broken band-matrix invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    IndexOutOfRange { row: usize, col: usize },
    Diagonal { site: usize, value: Complex64 },
    OutOfBand { row: usize, col: usize, distance: usize },
    Duplicate { row: usize, col: usize },
    NotASign { row: usize, col: usize, value: Complex64 },
    NotUnitModulus { row: usize, col: usize, value: Complex64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexOutOfRange { row, col } => write!(f, "index ({row},{col}) out of range"),
            Violation::Diagonal { site, value } => write!(f, "diagonal entry {value} at {site}"),
            Violation::OutOfBand { row, col, distance } => {
                write!(
                    f,
                    "entry ({row},{col}) at circular distance {distance} outside the band"
                )
            }
            Violation::Duplicate { row, col } => write!(f, "pair ({row},{col}) stored twice"),
            Violation::NotASign { row, col, value } => write!(f, "entry ({row},{col}) = {value} is not ±1"),
            Violation::NotUnitModulus { row, col, value } => {
                write!(f, "entry ({row},{col}) = {value} is not unit modulus")
            }
        }
    }
}

/// Checks every invariant of a band matrix; the result is empty iff `h` is a
/// valid member of its ensemble.
pub fn validate(h: &BandMatrix) -> Vec<Violation> {
    const TOL: f64 = 1e-12;
    let n = h.n();
    let graph = h.params().graph();
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for e in h.entries() {
        let (row, col) = (e.row, e.col);
        if row >= n || col >= n {
            out.push(Violation::IndexOutOfRange { row, col });
            continue;
        }
        if !seen.insert((row.min(col), row.max(col))) {
            out.push(Violation::Duplicate { row, col });
        }
        if row == col {
            out.push(Violation::Diagonal {
                site: row,
                value: e.value,
            });
            continue;
        }
        let distance = graph.distance(row, col);
        if distance > graph.half_bandwidth() {
            out.push(Violation::OutOfBand { row, col, distance });
        }
        match h.params().symmetry() {
            Symmetry::Signs => {
                let v = e.value;
                if v.im != 0.0 || (v.re != 1.0 && v.re != -1.0) {
                    out.push(Violation::NotASign { row, col, value: v });
                }
            }
            Symmetry::Phases => {
                if (e.value.norm() - 1.0).abs() > TOL {
                    out.push(Violation::NotUnitModulus {
                        row,
                        col,
                        value: e.value,
                    });
                }
            }
        }
    }
    out
}

/// Every `β = 1` matrix of the ensemble, each exactly once.
///
/// Bit `i` of the counter selects the sign of the `i`-th canonical pair
/// (`0 ↦ +1`, `1 ↦ −1`).
pub fn enumerate_sign_assignments(params: &BandParams) -> Result<SignAssignments> {
    if params.symmetry() != Symmetry::Signs {
        return Err(Error::InvalidParams(
            "exhaustive enumeration exists only for random signs".into(),
        ));
    }
    let edges = params.edge_count();
    check_budget("sign enumeration (edges)", edges as u128, MAX_ENUMERATED_EDGES as u128)?;
    Ok(SignAssignments {
        params: *params,
        pairs: params.canonical_pairs(),
        next: 0,
        end: 1u64 << edges,
    })
}

/// Iterator returned by [`enumerate_sign_assignments`].
#[derive(Debug, Clone)]
pub struct SignAssignments {
    params: BandParams,
    pairs: Vec<(usize, usize)>,
    next: u64,
    end: u64,
}

impl Iterator for SignAssignments {
    type Item = BandMatrix;

    fn next(&mut self) -> Option<BandMatrix> {
        if self.next >= self.end {
            return None;
        }
        let mask = self.next;
        self.next += 1;
        let entries = self
            .pairs
            .iter()
            .enumerate()
            .map(|(i, &(row, col))| BandEntry {
                row,
                col,
                value: Complex64::new(if mask >> i & 1 == 1 { -1.0 } else { 1.0 }, 0.0),
            })
            .collect();
        Some(BandMatrix {
            params: self.params,
            entries,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for SignAssignments {}
