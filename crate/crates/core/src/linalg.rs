//! Hermitian eigensolvers for periodic band matrices.
//!
//! Reordering the sites as `0, 1, N−1, 2, N−2, …` turns the circular band
//! into an ordinary band of half-width about `2W`. Real band matrices are
//! reduced to tridiagonal form by Givens rotations with bulge chasing and
//! finished by implicit QL; everything else goes to faer's dense solver.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self_adjoint_evd, self_adjoint_evd_scratch, ComputeEigenvectors};
use faer::{Mat, Par};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sampler::{BandMatrix, Symmetry};

/// `order[p]` is the site placed at position `p`.
pub(crate) fn interleave_order(n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n);
    if n == 0 {
        return order;
    }
    order.push(0);
    let (mut lo, mut hi) = (1, n - 1);
    while lo <= hi {
        order.push(lo);
        if hi != lo {
            order.push(hi);
        }
        lo += 1;
        hi -= 1;
    }
    order
}

fn inverse(order: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; order.len()];
    for (p, &u) in order.iter().enumerate() {
        pos[u] = p;
    }
    pos
}

/// Half-bandwidth of `h` after [`interleave_order`].
pub(crate) fn permuted_bandwidth(h: &BandMatrix) -> usize {
    let pos = inverse(&interleave_order(h.n()));
    h.entries()
        .iter()
        .map(|e| pos[e.row].abs_diff(pos[e.col]))
        .max()
        .unwrap_or(0)
}

/// Real symmetric band matrix in lower storage, with one extra diagonal
/// for the bulge created during reduction.
#[derive(Debug, Clone)]
pub(crate) struct SymBand {
    n: usize,
    b: usize,
    w: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub(crate) fn zeros(n: usize, b: usize) -> Self {
        let w = b + 2;
        Self {
            n,
            b,
            w,
            data: vec![0.0; n * w],
        }
    }

    /// The real part of `h` in interleaved order.
    pub(crate) fn from_matrix(h: &BandMatrix) -> Self {
        let pos = inverse(&interleave_order(h.n()));
        let mut band = Self::zeros(h.n(), permuted_bandwidth(h));
        for e in h.entries() {
            let (i, j) = (pos[e.row], pos[e.col]);
            let v = band.get(i, j) + e.value.re;
            band.set(i, j, v);
        }
        band
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j < self.w);
        j * self.w + (i - j)
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) >= self.w {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn bandwidth(&self) -> usize {
        self.b
    }

    /// `A ← Gᵀ A G` in the plane `(p, p+1)`, where row `p` becomes
    /// `c·row_p + s·row_q` and row `q` becomes `−s·row_p + c·row_q`.
    fn rotate(&mut self, p: usize, c: f64, s: f64) {
        let q = p + 1;
        let w = self.w;
        let lo = q.saturating_sub(self.b + 1);
        // Columns left of p: A(p, i) and A(q, i) are adjacent in storage.
        for i in lo..p {
            let ip = i * w + (p - i);
            let (x, y) = (self.data[ip], self.data[ip + 1]);
            self.data[ip] = c * x + s * y;
            self.data[ip + 1] = -s * x + c * y;
        }
        // Rows below q: columns p and q are contiguous runs.
        let hi = (p + self.b + 1).min(self.n - 1);
        if hi > q {
            let (head, tail) = self.data.split_at_mut(q * w);
            let col_p = &mut head[p * w + 2..p * w + 2 + (hi - q)];
            let col_q = &mut tail[1..1 + (hi - q)];
            for (x, y) in col_p.iter_mut().zip(col_q.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = c * a + s * b;
                *y = -s * a + c * b;
            }
        }
        let (pp, qq, qp) = (self.idx(p, p), self.idx(q, q), self.idx(q, p));
        let (app, aqq, apq) = (self.data[pp], self.data[qq], self.data[qp]);
        let (cc, ss, cs) = (c * c, s * s, c * s);
        self.data[pp] = cc * app + 2.0 * cs * apq + ss * aqq;
        self.data[qq] = ss * app - 2.0 * cs * apq + cc * aqq;
        self.data[qp] = cs * (aqq - app) + (cc - ss) * apq;
    }

    /// Zeroes `A(p+1, col)` against `A(p, col)`.
    fn annihilate(&mut self, p: usize, col: usize) {
        let x = self.get(p, col);
        let y = self.get(p + 1, col);
        if y == 0.0 {
            return;
        }
        let r = x.hypot(y);
        self.rotate(p, x / r, y / r);
        let k = self.idx(p + 1, col);
        self.data[k] = 0.0;
    }

    /// Diagonal and subdiagonal of an orthogonally similar tridiagonal
    /// matrix.
    pub(crate) fn tridiagonalize(mut self) -> (Vec<f64>, Vec<f64>) {
        let (n, b) = (self.n, self.b);
        for j in 0..n.saturating_sub(2) {
            for k in (2..=b.min(n - 1 - j)).rev() {
                let (mut col, mut q) = (j, j + k);
                self.annihilate(q - 1, col);
                // Chase the bulge at (q + b, q − 1) off the bottom.
                while q + b < n {
                    col = q - 1;
                    q += b;
                    self.annihilate(q - 1, col);
                }
            }
        }
        let diag = (0..n).map(|i| self.get(i, i)).collect();
        let off = (1..n).map(|i| self.get(i, i - 1)).collect();
        (diag, off)
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with
/// Wilkinson shifts, ascending.
pub(crate) fn tridiagonal_eigenvalues(mut d: Vec<f64>, off: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numeric(format!(
                    "tridiagonal QL did not converge for eigenvalue {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

fn dense_evd<T: faer::traits::ComplexField>(a: &Mat<T>, vectors: bool) -> Result<(Vec<T>, Option<Mat<T>>)> {
    let n = a.nrows();
    let mut s = Diag::<T>::zeros(n);
    let mut u = vectors.then(|| Mat::<T>::zeros(n, n));
    let mode = if vectors {
        ComputeEigenvectors::Yes
    } else {
        ComputeEigenvectors::No
    };
    let mut mem = MemBuffer::new(self_adjoint_evd_scratch::<T>(n, mode, Par::Seq, Default::default()));
    self_adjoint_evd(
        a.as_ref(),
        s.as_mut(),
        u.as_mut().map(|m| m.as_mut()),
        Par::Seq,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|e| Error::Numeric(format!("dense eigensolver failed: {e:?}")))?;
    Ok((s.column_vector().iter().cloned().collect(), u))
}

fn dense_real(h: &BandMatrix) -> Mat<f64> {
    let n = h.n();
    let mut a = Mat::<f64>::zeros(n, n);
    for e in h.entries() {
        a[(e.row, e.col)] += e.value.re;
        if e.row != e.col {
            a[(e.col, e.row)] += e.value.re;
        }
    }
    a
}

fn dense_complex(h: &BandMatrix) -> Mat<Complex64> {
    let n = h.n();
    let mut a = Mat::<Complex64>::zeros(n, n);
    for e in h.entries() {
        a[(e.row, e.col)] += e.value;
        if e.row != e.col {
            a[(e.col, e.row)] += e.value.conj();
        }
    }
    a
}

/// Which solver handles a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenRoute {
    /// Banded reduction when the permuted band is narrow, dense otherwise.
    Auto,
    Banded,
    Dense,
}

fn use_banded(h: &BandMatrix, route: EigenRoute) -> bool {
    if h.params().symmetry() != Symmetry::Signs {
        return false;
    }
    match route {
        EigenRoute::Banded => true,
        EigenRoute::Dense => false,
        EigenRoute::Auto => 6 * permuted_bandwidth(h) <= h.n(),
    }
}

/// Eigenvalues of `h` itself (unnormalized), ascending.
pub(crate) fn raw_eigenvalues(h: &BandMatrix, route: EigenRoute) -> Result<Vec<f64>> {
    if use_banded(h, route) {
        let (d, e) = SymBand::from_matrix(h).tridiagonalize();
        return tridiagonal_eigenvalues(d, &e);
    }
    let mut out = match h.params().symmetry() {
        Symmetry::Signs => dense_evd(&dense_real(h), false)?.0,
        Symmetry::Phases => dense_evd(&dense_complex(h), false)?.0.iter().map(|z| z.re).collect(),
    };
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Unit eigenvectors (in site order) for the eigenvalue closest to each
/// of `targets`.
pub(crate) fn raw_eigenvectors(h: &BandMatrix, targets: &[f64], route: EigenRoute) -> Result<Vec<Vec<Complex64>>> {
    if use_banded(h, route) {
        let band = SymBand::from_matrix(h);
        let order = interleave_order(h.n());
        return targets
            .iter()
            .map(|&t| {
                let x = inverse_iteration(&band, t)?;
                let mut v = vec![Complex64::new(0.0, 0.0); h.n()];
                for (p, &u) in order.iter().enumerate() {
                    v[u] = Complex64::new(x[p], 0.0);
                }
                Ok(v)
            })
            .collect();
    }
    let pick = |vals: &[f64], t: f64| {
        (0..vals.len())
            .min_by(|&a, &b| (vals[a] - t).abs().total_cmp(&(vals[b] - t).abs()))
            .unwrap_or(0)
    };
    match h.params().symmetry() {
        Symmetry::Signs => {
            let (vals, u) = dense_evd(&dense_real(h), true)?;
            let u = u.expect("eigenvectors requested");
            Ok(targets
                .iter()
                .map(|&t| {
                    let k = pick(&vals, t);
                    (0..h.n()).map(|i| Complex64::new(u[(i, k)], 0.0)).collect()
                })
                .collect())
        }
        Symmetry::Phases => {
            let (vals, u) = dense_evd(&dense_complex(h), true)?;
            let vals: Vec<f64> = vals.iter().map(|z| z.re).collect();
            let u = u.expect("eigenvectors requested");
            Ok(targets
                .iter()
                .map(|&t| {
                    let k = pick(&vals, t);
                    (0..h.n()).map(|i| u[(i, k)]).collect()
                })
                .collect())
        }
    }
}

/// LU factors with partial pivoting of a band matrix with `b` sub- and
/// `2b` super-diagonals after pivoting.
struct BandLu {
    n: usize,
    b: usize,
    // Row i holds columns i − b ..= i + 2b at offset col + b − i.
    rows: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn width(b: usize) -> usize {
        3 * b + 1
    }

    fn factor(band: &SymBand, shift: f64) -> Self {
        let (n, b) = (band.n(), band.bandwidth());
        let w = Self::width(b);
        let mut rows = vec![0.0; n * w];
        for i in 0..n {
            for j in i.saturating_sub(b)..=(i + b).min(n - 1) {
                let mut v = band.get(i, j);
                if i == j {
                    v -= shift;
                }
                rows[i * w + j + b - i] = v;
            }
        }
        let at = |i: usize, j: usize| i * w + j + b - i;
        let tiny = f64::EPSILON * (1.0 + shift.abs());
        let mut lower = vec![0.0; n * b.max(1)];
        let mut pivots = vec![0; n];
        for i in 0..n {
            let last = (i + b).min(n - 1);
            let mut piv = i;
            for r in i..=last {
                if rows[at(r, i)].abs() > rows[at(piv, i)].abs() {
                    piv = r;
                }
            }
            pivots[i] = piv;
            let right = (i + 2 * b).min(n - 1);
            if piv != i {
                for col in i..=right {
                    rows.swap(at(i, col), at(piv, col));
                }
            }
            if rows[at(i, i)].abs() < tiny {
                rows[at(i, i)] = tiny;
            }
            let d = rows[at(i, i)];
            for r in i + 1..=last {
                let f = rows[at(r, i)] / d;
                lower[i * b.max(1) + (r - i - 1)] = f;
                rows[at(r, i)] = 0.0;
                if f != 0.0 {
                    for col in i + 1..=right {
                        rows[at(r, col)] -= f * rows[at(i, col)];
                    }
                }
            }
        }
        Self {
            n,
            b,
            rows,
            lower,
            pivots,
        }
    }

    fn solve(&self, x: &mut [f64]) {
        let (n, b) = (self.n, self.b);
        let w = Self::width(b);
        for i in 0..n {
            x.swap(i, self.pivots[i]);
            let xi = x[i];
            for r in i + 1..=(i + b).min(n - 1) {
                x[r] -= self.lower[i * b.max(1) + (r - i - 1)] * xi;
            }
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for col in i + 1..=(i + 2 * b).min(n - 1) {
                acc -= self.rows[i * w + col + b - i] * x[col];
            }
            x[i] = acc / self.rows[i * w + b];
        }
    }
}

fn inverse_iteration(band: &SymBand, shift: f64) -> Result<Vec<f64>> {
    let n = band.n();
    let lu = BandLu::factor(band, shift);
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 113) as f64 / 113.0).collect();
    for _ in 0..4 {
        lu.solve(&mut x);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Numeric("inverse iteration broke down".into()));
        }
        x.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(x)
}
