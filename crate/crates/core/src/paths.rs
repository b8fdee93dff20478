//! Exhaustive combinatorics of closed non-backtracking paths.
//!
//! For a tuple of lengths `n(1), …, n(k)` the joint moment
//! `E ∏ tr H^(n(j))` equals the number of `k`-tuples of closed
//! non-backtracking paths on the band graph in which every edge is used
//! compatibly with the entry distribution: an even number of times for
//! random signs, equally often in both directions for random phases.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cheby::nb_moment_traces;
use crate::circulant::CirculantGraph;
use crate::error::{check_budget, Error, Result};
use crate::sampler::{enumerate_sign_assignments, sample_band_matrix, BandMatrix, BandParams, SeedSpec, Symmetry};

/// Limits for the exhaustive enumerations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathBudget {
    pub max_total_length: usize,
    pub max_sites: usize,
    /// Cap on the number of path prefixes visited while enumerating.
    pub max_paths: u128,
}

impl Default for PathBudget {
    fn default() -> Self {
        Self {
            max_total_length: 10,
            max_sites: 12,
            max_paths: 50_000_000,
        }
    }
}

/// Lengths `n(1) ≤ … ≤ n(k)` and the symmetry class.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KPathSpec {
    lengths: Vec<usize>,
    symmetry: Symmetry,
}

impl KPathSpec {
    pub fn new(mut lengths: Vec<usize>, symmetry: Symmetry) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::InvalidParams("a k-path needs k ≥ 1".into()));
        }
        if lengths.contains(&0) {
            return Err(Error::InvalidParams("path lengths must be positive".into()));
        }
        lengths.sort_unstable();
        Ok(Self { lengths, symmetry })
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn k(&self) -> usize {
        self.lengths.len()
    }

    pub fn total_length(&self) -> usize {
        self.lengths.iter().sum()
    }
}

/// A concrete tuple of closed paths, each given by its vertex sequence
/// `u_0, …, u_n` with `u_n = u_0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KPath {
    pub paths: Vec<Vec<usize>>,
}

/// Numeric data of a diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DiagramClass {
    pub s: usize,
    pub k: usize,
    pub vertex_count: usize,
    pub edge_count: usize,
}

/// Index of each unordered graph edge and its canonical orientation.
struct EdgeIndex {
    n: usize,
    // id + 1 for (u, v) stored as (u, v); -(id + 1) when stored as (v, u).
    table: Vec<i32>,
    len: usize,
}

impl EdgeIndex {
    fn new(graph: &CirculantGraph) -> Self {
        let n = graph.n_sites();
        let mut table = vec![0i32; n * n];
        let mut len = 0;
        for u in 0..n {
            for v in graph.neighbors(u) {
                if table[u * n + v] == 0 {
                    len += 1;
                    table[u * n + v] = len as i32;
                    table[v * n + u] = -(len as i32);
                }
            }
        }
        Self { n, table, len }
    }

    /// `(edge id, +1 | −1)` for the step `u → v`.
    fn step(&self, u: usize, v: usize) -> (usize, i8) {
        let t = self.table[u * self.n + v];
        debug_assert!(t != 0);
        if t > 0 {
            (t as usize - 1, 1)
        } else {
            ((-t) as usize - 1, -1)
        }
    }
}

/// Per-edge bookkeeping for condition (d): traversal parity for signs,
/// net directed flow for phases. The condition holds iff it is all zero.
type Signature = Vec<i8>;

fn signature(path: &[usize], index: &EdgeIndex, symmetry: Symmetry) -> Signature {
    let mut sig = vec![0i8; index.len];
    for w in path.windows(2) {
        let (e, dir) = index.step(w[0], w[1]);
        match symmetry {
            Symmetry::Signs => sig[e] ^= 1,
            Symmetry::Phases => sig[e] += dir,
        }
    }
    sig
}

fn combine(a: &Signature, b: &Signature, symmetry: Symmetry) -> Signature {
    a.iter()
        .zip(b)
        .map(|(x, y)| match symmetry {
            Symmetry::Signs => x ^ y,
            Symmetry::Phases => x + y,
        })
        .collect()
}

fn negate(a: &Signature, symmetry: Symmetry) -> Signature {
    match symmetry {
        Symmetry::Signs => a.clone(),
        Symmetry::Phases => a.iter().map(|x| -x).collect(),
    }
}

fn check_path_budget(graph: &CirculantGraph, total: usize, longest: usize, budget: &PathBudget) -> Result<()> {
    check_budget(
        "path enumeration (total length)",
        total as u128,
        budget.max_total_length as u128,
    )?;
    check_budget(
        "path enumeration (sites)",
        graph.n_sites() as u128,
        budget.max_sites as u128,
    )?;
    let d = graph.degree() as u128;
    let walks = (graph.n_sites() as u128).saturating_mul(d).saturating_mul(
        d.saturating_sub(1)
            .max(1)
            .saturating_pow(longest.saturating_sub(1) as u32),
    );
    check_budget("path enumeration (paths)", walks, budget.max_paths)
}

fn nb_paths_from(graph: &CirculantGraph, start: usize, n: usize, end: Option<usize>, out: &mut Vec<Vec<usize>>) {
    fn go(graph: &CirculantGraph, n: usize, end: Option<usize>, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let len = path.len() - 1;
        let cur = path[len];
        if len == n {
            if end.is_none_or(|e| e == cur) {
                out.push(path.clone());
            }
            return;
        }
        let prev = if len > 0 { Some(path[len - 1]) } else { None };
        for v in graph.neighbors(cur) {
            if Some(v) == prev {
                continue;
            }
            path.push(v);
            go(graph, n, end, path, out);
            path.pop();
        }
    }
    let mut path = vec![start];
    go(graph, n, end, &mut path, out);
}

/// All closed non-backtracking paths of length `n`, every start vertex.
pub fn closed_nb_paths(graph: &CirculantGraph, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for u in 0..graph.n_sites() {
        nb_paths_from(graph, u, n, Some(u), &mut out);
    }
    out
}

fn check_spec(params: &BandParams, spec: &KPathSpec) -> Result<()> {
    if params.symmetry() != spec.symmetry() {
        return Err(Error::InvalidParams(
            "symmetry class of the k-path spec differs from the ensemble".into(),
        ));
    }
    Ok(())
}

fn signature_histogram(
    graph: &CirculantGraph,
    index: &EdgeIndex,
    n: usize,
    symmetry: Symmetry,
) -> HashMap<Signature, u128> {
    let mut hist = HashMap::new();
    for p in closed_nb_paths(graph, n) {
        *hist.entry(signature(&p, index, symmetry)).or_insert(0) += 1;
    }
    hist
}

/// `E ∏_j tr H^(n(j))`, as the number of admissible `k`-paths.
pub fn joint_moment_paths(params: &BandParams, spec: &KPathSpec) -> Result<u128> {
    joint_moment_paths_with_budget(params, spec, &PathBudget::default())
}

pub fn joint_moment_paths_with_budget(params: &BandParams, spec: &KPathSpec, budget: &PathBudget) -> Result<u128> {
    check_spec(params, spec)?;
    let graph = params.graph();
    check_path_budget(graph, spec.total_length(), *spec.lengths().last().unwrap(), budget)?;
    let index = EdgeIndex::new(graph);
    let symmetry = spec.symmetry();
    let mut cache: BTreeMap<usize, HashMap<Signature, u128>> = BTreeMap::new();
    for &n in spec.lengths() {
        cache
            .entry(n)
            .or_insert_with(|| signature_histogram(graph, &index, n, symmetry));
    }
    let mut acc: HashMap<Signature, u128> = HashMap::from([(vec![0i8; index.len], 1)]);
    for &n in spec.lengths() {
        let hist = &cache[&n];
        let mut next: HashMap<Signature, u128> = HashMap::new();
        for (a, ca) in &acc {
            for (b, cb) in hist {
                *next.entry(combine(a, b, symmetry)).or_insert(0) += ca * cb;
            }
        }
        acc = next;
    }
    Ok(acc.get(&vec![0i8; index.len]).copied().unwrap_or(0))
}

fn subset_lengths(spec: &KPathSpec, mask: usize) -> Vec<usize> {
    (0..spec.k())
        .filter(|i| mask >> i & 1 == 1)
        .map(|i| spec.lengths()[i])
        .collect()
}

/// Joint cumulant `T(n(1), …, n(k))` of the traces, from the moments by
/// the recursion over set partitions:
/// `M(S) = Σ_{B ∋ min S, B ⊆ S} T(B)·M(S∖B)`.
pub fn cumulant_t(params: &BandParams, spec: &KPathSpec) -> Result<i128> {
    cumulant_t_with_budget(params, spec, &PathBudget::default())
}

pub fn cumulant_t_with_budget(params: &BandParams, spec: &KPathSpec, budget: &PathBudget) -> Result<i128> {
    check_spec(params, spec)?;
    let k = spec.k();
    if k > 16 {
        return Err(Error::Budget {
            what: "cumulant order",
            needed: k as u128,
            budget: 16,
        });
    }
    let full = (1usize << k) - 1;
    let mut by_lengths: HashMap<Vec<usize>, i128> = HashMap::new();
    let mut moment = vec![1i128; full + 1];
    for mask in 1..=full {
        let lengths = subset_lengths(spec, mask);
        if let Some(&m) = by_lengths.get(&lengths) {
            moment[mask] = m;
            continue;
        }
        let sub = KPathSpec::new(lengths.clone(), spec.symmetry())?;
        let m = joint_moment_paths_with_budget(params, &sub, budget)? as i128;
        by_lengths.insert(lengths, m);
        moment[mask] = m;
    }
    let mut cumulant = vec![0i128; full + 1];
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut t = moment[mask];
        // Proper subsets B of mask containing `low`.
        let mut sub = rest;
        loop {
            let b = sub | low;
            if b != mask {
                t -= cumulant[b] * moment[mask ^ b];
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        cumulant[mask] = t;
    }
    Ok(cumulant[full])
}

/// Calls `visit` on every admissible `k`-path of `spec`.
pub fn for_each_kpath<F>(params: &BandParams, spec: &KPathSpec, budget: &PathBudget, mut visit: F) -> Result<()>
where
    F: FnMut(&KPath),
{
    check_spec(params, spec)?;
    let graph = params.graph();
    check_path_budget(graph, spec.total_length(), *spec.lengths().last().unwrap(), budget)?;
    let index = EdgeIndex::new(graph);
    let symmetry = spec.symmetry();
    let mut lists: BTreeMap<usize, Vec<(Vec<usize>, Signature)>> = BTreeMap::new();
    for &n in spec.lengths() {
        lists.entry(n).or_insert_with(|| {
            closed_nb_paths(graph, n)
                .into_iter()
                .map(|p| {
                    let s = signature(&p, &index, symmetry);
                    (p, s)
                })
                .collect()
        });
    }
    let k = spec.k();
    let last = &lists[&spec.lengths()[k - 1]];
    let mut last_by_sig: HashMap<&Signature, Vec<usize>> = HashMap::new();
    for (i, (_, s)) in last.iter().enumerate() {
        last_by_sig.entry(s).or_default().push(i);
    }
    let mut stack: Vec<usize> = Vec::with_capacity(k);
    let zero = vec![0i8; index.len];
    fn rec<F: FnMut(&KPath)>(
        spec: &KPathSpec,
        lists: &BTreeMap<usize, Vec<(Vec<usize>, Signature)>>,
        last_by_sig: &HashMap<&Signature, Vec<usize>>,
        stack: &mut Vec<usize>,
        sig: &Signature,
        visit: &mut F,
    ) {
        let k = spec.k();
        let j = stack.len();
        if j == k - 1 {
            let want = negate(sig, spec.symmetry());
            if let Some(ids) = last_by_sig.get(&want) {
                let last = &lists[&spec.lengths()[k - 1]];
                for &i in ids {
                    let mut paths: Vec<Vec<usize>> = stack
                        .iter()
                        .enumerate()
                        .map(|(jj, &p)| lists[&spec.lengths()[jj]][p].0.clone())
                        .collect();
                    paths.push(last[i].0.clone());
                    visit(&KPath { paths });
                }
            }
            return;
        }
        let list = &lists[&spec.lengths()[j]];
        for (i, (_, s)) in list.iter().enumerate() {
            stack.push(i);
            let next = combine(sig, s, spec.symmetry());
            rec(spec, lists, last_by_sig, stack, &next, visit);
            stack.pop();
        }
    }
    rec(spec, &lists, &last_by_sig, &mut stack, &zero, &mut visit);
    Ok(())
}

/// Number of admissible `k`-paths that cannot be split into two nonempty
/// sub-tuples each admissible on its own.
///
/// For `k ≤ 3` this equals [`cumulant_t`]. From `k = 4` on the cumulant
/// also weighs edges shared by several paths with the higher cumulants of
/// the entry distribution, and the two numbers differ in general.
pub fn non_splittable_count(params: &BandParams, spec: &KPathSpec) -> Result<u128> {
    non_splittable_count_with_budget(params, spec, &PathBudget::default())
}

pub fn non_splittable_count_with_budget(params: &BandParams, spec: &KPathSpec, budget: &PathBudget) -> Result<u128> {
    let index = EdgeIndex::new(params.graph());
    let symmetry = spec.symmetry();
    let k = spec.k();
    let mut count = 0u128;
    for_each_kpath(params, spec, budget, |kp| {
        let sigs: Vec<Signature> = kp.paths.iter().map(|p| signature(p, &index, symmetry)).collect();
        let splittable = (1..(1usize << k) - 1).filter(|m| m & 1 == 1).any(|mask| {
            let mut acc = vec![0i8; index.len];
            for (j, s) in sigs.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    acc = combine(&acc, s, symmetry);
                }
            }
            acc.iter().all(|&x| x == 0)
        });
        if !splittable {
            count += 1;
        }
    })?;
    Ok(count)
}

/// `H^(n)_{uv}` as the sum of `H_{u_0u_1} ⋯ H_{u_{n−1}u_n}` over
/// non-backtracking paths from `u` to `v`.
pub fn hn_entry_via_paths(h: &BandMatrix, u: usize, v: usize, n: usize) -> Result<Complex64> {
    hn_entry_via_paths_with_budget(h, u, v, n, &PathBudget::default())
}

pub fn hn_entry_via_paths_with_budget(
    h: &BandMatrix,
    u: usize,
    v: usize,
    n: usize,
    budget: &PathBudget,
) -> Result<Complex64> {
    let dim = h.n();
    if u >= dim || v >= dim {
        return Err(Error::InvalidParams(format!("vertex out of range for N = {dim}")));
    }
    let graph = h.params().graph();
    check_path_budget(graph, n, n, budget)?;
    let dense = h.to_dense();
    let mut paths = Vec::new();
    nb_paths_from(graph, u, n, Some(v), &mut paths);
    Ok(paths
        .iter()
        .map(|p| p.windows(2).map(|w| dense[w[0] * dim + w[1]]).product::<Complex64>())
        .sum())
}

/// Diagram data of an admissible `k`-path.
///
/// The multigraph has one edge per two traversals of each graph edge and a
/// pendant leaf at every starting vertex. Vertices of degree two are
/// suppressed and a vertex of degree `d ≥ 4` counts as `d − 2` trivalent
/// vertices joined by `d − 3` edges. The genus is `s = k − χ`.
pub fn classify_diagram(kpath: &KPath, symmetry: Symmetry) -> Result<DiagramClass> {
    let k = kpath.paths.len();
    if k == 0 {
        return Err(Error::Structural("empty k-path".into()));
    }
    let mut traversals: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for p in &kpath.paths {
        if p.len() < 2 || p.first() != p.last() {
            return Err(Error::Structural("path is not closed".into()));
        }
        for w in p.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Structural("path uses a loop".into()));
            }
            let key = (w[0].min(w[1]), w[0].max(w[1]));
            let t = traversals.entry(key).or_insert((0, 0));
            if w[0] < w[1] {
                t.0 += 1;
            } else {
                t.1 += 1;
            }
        }
    }
    // Multigraph adjacency: vertex -> list of (neighbour) with multiplicity,
    // leaves as extra vertices.
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    let id_of = |x: usize, ids: &mut BTreeMap<usize, usize>| {
        let next = ids.len();
        *ids.entry(x).or_insert(next)
    };
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (&(a, b), &(fwd, bwd)) in &traversals {
        let t = fwd + bwd;
        if t % 2 == 1 {
            return Err(Error::Structural(format!(
                "edge ({a},{b}) traversed an odd number of times"
            )));
        }
        if symmetry == Symmetry::Phases && fwd != bwd {
            return Err(Error::Structural(format!("edge ({a},{b}) is not balanced")));
        }
        let (ia, ib) = (id_of(a, &mut ids), id_of(b, &mut ids));
        for _ in 0..t / 2 {
            edges.push((ia, ib));
        }
    }
    let core = ids.len();
    let mut leaf = vec![false; core];
    for p in &kpath.paths {
        let root = ids[&p[0]];
        leaf.push(true);
        edges.push((root, leaf.len() - 1));
    }
    let total = leaf.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); total];
    for (e, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    if let Some(x) = (0..core).find(|&x| degree[x] < 2) {
        return Err(Error::Structural(format!(
            "interior vertex {x} has degree {}",
            degree[x]
        )));
    }
    let branch: Vec<usize> = (0..total).filter(|&x| leaf[x] || degree[x] >= 3).collect();
    // Suppress degree-2 vertices: follow chains between branch vertices.
    let mut used = vec![false; edges.len()];
    let mut reduced: Vec<(usize, usize)> = Vec::new();
    for &x in &branch {
        for &(first, e0) in &adj[x] {
            if used[e0] {
                continue;
            }
            used[e0] = true;
            let (mut prev_edge, mut cur) = (e0, first);
            while !leaf[cur] && degree[cur] == 2 {
                let &(nxt, e) = adj[cur].iter().find(|&&(_, e)| e != prev_edge).unwrap_or(&adj[cur][0]);
                used[e] = true;
                prev_edge = e;
                cur = nxt;
            }
            reduced.push((x, cur));
        }
    }
    if used.iter().any(|u| !u) {
        return Err(Error::Structural("a component contains no starting vertex".into()));
    }
    let mut vertex_count = k;
    let mut edge_count = reduced.len();
    for &x in &branch {
        if !leaf[x] {
            vertex_count += degree[x] - 2;
            edge_count += degree[x] - 3;
        }
    }
    if symmetry == Symmetry::Phases && reduced.iter().any(|&(a, b)| a == b && degree[a] == 3) {
        return Err(Error::Structural("loop in a random-phase diagram".into()));
    }
    let chi = total as isize - edges.len() as isize;
    let s = k as isize - chi;
    if s < k as isize || vertex_count as isize != 2 * s || edge_count as isize != 3 * s - k as isize {
        return Err(Error::Structural(format!(
            "inconsistent diagram: s = {s}, k = {k}, {vertex_count} vertices, {edge_count} edges"
        )));
    }
    Ok(DiagramClass {
        s: s as usize,
        k,
        vertex_count,
        edge_count,
    })
}

/// Number of admissible `k`-paths of `spec` with each genus `s`.
pub fn diagram_census(params: &BandParams, spec: &KPathSpec) -> Result<BTreeMap<usize, u128>> {
    diagram_census_with_budget(params, spec, &PathBudget::default())
}

pub fn diagram_census_with_budget(
    params: &BandParams,
    spec: &KPathSpec,
    budget: &PathBudget,
) -> Result<BTreeMap<usize, u128>> {
    let mut census = BTreeMap::new();
    let mut failure = None;
    for_each_kpath(params, spec, budget, |kp| {
        if failure.is_some() {
            return;
        }
        match classify_diagram(kp, spec.symmetry()) {
            Ok(class) => *census.entry(class.s).or_insert(0) += 1,
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(census),
    }
}

/// Exact average of `∏ tr H^(n(j))` over every sign matrix of the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExhaustiveAverage {
    pub total: i128,
    pub matrices: u64,
}

impl ExhaustiveAverage {
    /// The average when it is an integer.
    pub fn as_integer(&self) -> Option<i128> {
        (self.total % self.matrices as i128 == 0).then(|| self.total / self.matrices as i128)
    }

    pub fn as_f64(&self) -> f64 {
        self.total as f64 / self.matrices as f64
    }
}

fn rounded_product(traces: &[f64], lengths: &[usize]) -> Result<i128> {
    lengths.iter().try_fold(1i128, |acc, &n| {
        let t = traces[n];
        let r = t.round();
        if (t - r).abs() > 1e-6 {
            return Err(Error::Numeric(format!("trace {t} of a sign matrix is not an integer")));
        }
        Ok(acc * r as i128)
    })
}

/// Averages `∏ tr H^(n(j))` over all `2^E` sign matrices.
pub fn exhaustive_moment_average(params: &BandParams, lengths: &[usize]) -> Result<ExhaustiveAverage> {
    let n_max = lengths.iter().copied().max().unwrap_or(0);
    let all = enumerate_sign_assignments(params)?;
    let matrices = all.len() as u64;
    let matrices_vec: Vec<BandMatrix> = all.collect();
    let total = matrices_vec
        .par_iter()
        .map(|h| rounded_product(&nb_moment_traces(h, n_max)?, lengths))
        .try_reduce(|| 0i128, |a, b| Ok(a + b))?;
    Ok(ExhaustiveAverage { total, matrices })
}

/// Sample mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Monte Carlo estimate of `E ∏ tr H^(n(j))`; sample `i` uses replicate
/// index `i` of `master_seed`.
pub fn monte_carlo_moment(
    params: &BandParams,
    lengths: &[usize],
    samples: u64,
    master_seed: u64,
) -> Result<MonteCarloEstimate> {
    if samples < 2 {
        return Err(Error::InvalidParams("need at least two samples".into()));
    }
    let n_max = lengths.iter().copied().max().unwrap_or(0);
    let values = (0..samples)
        .into_par_iter()
        .map(|i| {
            let h = sample_band_matrix(params, &SeedSpec::new(master_seed, i));
            let t = nb_moment_traces(&h, n_max)?;
            Ok(lengths.iter().map(|&n| t[n]).product::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let m = samples as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / m).sqrt(),
        samples,
    })
}
