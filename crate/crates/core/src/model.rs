//! The generative stochastic block model on directed graphs with self-loops.
//!
//! Labels are 0-based inside the crate (`0..k`); every file format converts
//! to and from the 1-based labels users see.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Error, Result};
use crate::rng::rng_from_seed;

/// A label vector `z` with cached cluster occupancy counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
    sizes: Vec<usize>,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("cluster count k must be at least 1"));
        }
        let mut sizes = vec![0; k];
        for (i, &r) in labels.iter().enumerate() {
            if r >= k {
                return Err(invalid(format!("label {r} of node {i} is outside 0..{k}")));
            }
            sizes[r] += 1;
        }
        Ok(Self { labels, k, sizes })
    }

    /// Builds from 1-based labels `1..=k`.
    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self> {
        let zero = labels
            .iter()
            .map(|&r| {
                r.checked_sub(1)
                    .ok_or_else(|| invalid("1-based label 0 is not allowed"))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero, k)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|r| r + 1).collect()
    }

    /// True when no cluster is empty.
    pub fn all_occupied(&self) -> bool {
        self.sizes.iter().all(|&s| s > 0)
    }

    pub fn set_label(&mut self, i: usize, r: usize) {
        assert!(r < self.k, "label {r} out of range for k = {}", self.k);
        let old = self.labels[i];
        self.sizes[old] -= 1;
        self.sizes[r] += 1;
        self.labels[i] = r;
    }

    /// Relabels every node through `perm` (`new = perm[old]`).
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.k {
            return Err(dim(format!("permutation of length {} for k = {}", perm.len(), self.k)));
        }
        Self::new(self.labels.iter().map(|&r| perm[r]).collect(), self.k)
    }
}

/// The `k x k` block connectivity matrix `Q`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl ConnectivityMatrix {
    pub fn new(k: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != k * k {
            return Err(dim(format!("{} entries for a {k}x{k} matrix", entries.len())));
        }
        if let Some(bad) = entries.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(invalid(format!("connectivity entry {bad} outside [0, 1]")));
        }
        Ok(Self { k, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(dim("connectivity rows must form a square matrix"));
        }
        Self::new(k, rows.concat())
    }

    pub fn constant(k: usize, value: f64) -> Result<Self> {
        Self::new(k, vec![value; k * k])
    }

    /// Entries i.i.d. uniform on `[low, high)`.
    pub fn uniform<R: Rng + ?Sized>(k: usize, low: f64, high: f64, rng: &mut R) -> Self {
        let entries = (0..k * k).map(|_| rng.random_range(low..high)).collect();
        Self { k, entries }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, r: usize, s: usize) -> f64 {
        self.entries[r * self.k + s]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.k).map(<[f64]>::to_vec).collect()
    }
}

/// Dense row-major `n x n` matrix of edge probabilities `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProbabilityMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl EdgeProbabilityMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(dim(format!("{} entries for a {n}x{n} matrix", entries.len())));
        }
        if let Some(bad) = entries.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(invalid(format!("edge probability {bad} outside [0, 1]")));
        }
        Ok(Self { n, entries })
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(n, vec![value; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(squared_distance(self, other)?.sqrt())
    }
}

/// Binary `n x n` adjacency matrix (directed, self-loops allowed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    entries: Vec<u8>,
}

impl AdjacencyMatrix {
    pub fn new(n: usize, entries: Vec<u8>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(dim(format!("{} entries for a {n}x{n} matrix", entries.len())));
        }
        if entries.iter().any(|&a| a > 1) {
            return Err(invalid("adjacency entries must be 0 or 1"));
        }
        Ok(Self { n, entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, entries: vec![0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(dim("adjacency rows must form a square matrix"));
        }
        Self::new(n, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.entries[i * self.n + j] = u8::from(value);
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn edge_count(&self) -> u64 {
        self.entries.iter().map(|&a| u64::from(a)).sum()
    }
}

/// Per-block edge counts `S_rs` and pair counts `N_rs = n_r n_s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSufficientStats {
    k: usize,
    edge_counts: Vec<u64>,
    pair_counts: Vec<u64>,
}

impl BlockSufficientStats {
    pub fn new(k: usize, edge_counts: Vec<u64>, pair_counts: Vec<u64>) -> Result<Self> {
        if edge_counts.len() != k * k || pair_counts.len() != k * k {
            return Err(dim("block statistics must be k x k"));
        }
        if edge_counts.iter().zip(&pair_counts).any(|(s, n)| s > n) {
            return Err(invalid("edge count exceeds pair count"));
        }
        Ok(Self { k, edge_counts, pair_counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn edges(&self, r: usize, s: usize) -> u64 {
        self.edge_counts[r * self.k + s]
    }

    #[inline]
    pub fn pairs(&self, r: usize, s: usize) -> u64 {
        self.pair_counts[r * self.k + s]
    }

    pub fn edge_counts(&self) -> &[u64] {
        &self.edge_counts
    }

    pub fn pair_counts(&self) -> &[u64] {
        &self.pair_counts
    }
}

/// Parameters for drawing a ground-truth model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub n: usize,
    pub k: usize,
    /// Interior margin: every `Q` entry lands in `(delta, 1 - delta)`.
    pub delta: f64,
    pub seed: u64,
}

/// Default interior margin for generated truths.
pub const DEFAULT_DELTA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub assignment: ClusterAssignment,
    pub connectivity: ConnectivityMatrix,
    pub theta: EdgeProbabilityMatrix,
}

/// `θ_ij = Q[z_i][z_j]`.
pub fn theta_from_assignment(
    z: &ClusterAssignment,
    q: &ConnectivityMatrix,
) -> Result<EdgeProbabilityMatrix> {
    if z.k() != q.k() {
        return Err(dim(format!("assignment has k = {}, Q is {}x{}", z.k(), q.k(), q.k())));
    }
    let n = z.n();
    let mut entries = Vec::with_capacity(n * n);
    for &r in z.labels() {
        entries.extend(z.labels().iter().map(|&s| q.get(r, s)));
    }
    Ok(EdgeProbabilityMatrix { n, entries })
}

/// Draws a truth satisfying the interior and nonempty-cluster hypotheses.
///
/// Labels are assigned round-robin and then shuffled, so every cluster is
/// occupied; `Q` entries are uniform on `(delta, 1 - delta)`.
pub fn sample_truth(spec: &TruthSpec) -> Result<Truth> {
    if spec.k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if spec.n < spec.k {
        return Err(Error::Precondition(format!(
            "cannot fill {} clusters with {} nodes",
            spec.k, spec.n
        )));
    }
    if !(spec.delta > 0.0 && spec.delta < 0.5) {
        return Err(invalid(format!("delta = {} must lie in (0, 1/2)", spec.delta)));
    }
    let mut rng = rng_from_seed(spec.seed);
    let mut labels: Vec<usize> = (0..spec.n).map(|i| i % spec.k).collect();
    labels.shuffle(&mut rng);
    let assignment = ClusterAssignment::new(labels, spec.k)?;
    let connectivity = loop {
        let q = ConnectivityMatrix::uniform(spec.k, spec.delta, 1.0 - spec.delta, &mut rng);
        // random_range is half-open; reject the (measure-zero) left endpoint.
        if q.entries().iter().all(|&x| x > spec.delta) {
            break q;
        }
    };
    let theta = theta_from_assignment(&assignment, &connectivity)?;
    Ok(Truth { assignment, connectivity, theta })
}

/// Independent `A_ij ~ Bernoulli(θ_ij)`.
pub fn sample_adjacency(theta: &EdgeProbabilityMatrix, seed: u64) -> AdjacencyMatrix {
    let mut rng = rng_from_seed(seed);
    sample_adjacency_with(theta, &mut rng)
}

pub fn sample_adjacency_with<R: Rng + ?Sized>(
    theta: &EdgeProbabilityMatrix,
    rng: &mut R,
) -> AdjacencyMatrix {
    let entries = theta
        .entries()
        .iter()
        .map(|&p| u8::from(rng.random::<f64>() < p))
        .collect();
    AdjacencyMatrix { n: theta.n(), entries }
}

pub fn block_stats(a: &AdjacencyMatrix, z: &ClusterAssignment) -> Result<BlockSufficientStats> {
    if a.n() != z.n() {
        return Err(dim(format!("adjacency is {}x{}, assignment has n = {}", a.n(), a.n(), z.n())));
    }
    let k = z.k();
    let mut edge_counts = vec![0u64; k * k];
    for i in 0..a.n() {
        let base = z.label(i) * k;
        for (j, &aij) in a.row(i).iter().enumerate() {
            edge_counts[base + z.label(j)] += u64::from(aij);
        }
    }
    let sizes = z.sizes();
    let pair_counts = (0..k * k)
        .map(|b| (sizes[b / k] * sizes[b % k]) as u64)
        .collect();
    Ok(BlockSufficientStats { k, edge_counts, pair_counts })
}

/// `S ln q + (N - S) ln(1 - q)` with `0 ln 0 = 0`.
pub(crate) fn bernoulli_block_log_density(s: u64, n: u64, q: f64) -> f64 {
    let ones = if s == 0 { 0.0 } else { s as f64 * q.ln() };
    let zeros = if n == s { 0.0 } else { (n - s) as f64 * (1.0 - q).ln() };
    ones + zeros
}

/// Block log-likelihood `Σ_rs [S ln Q + (N - S) ln(1 - Q)]`.
///
/// Returns `-inf` when an observed edge meets `Q_rs = 0` or an observed
/// non-edge meets `Q_rs = 1`.
pub fn log_likelihood(
    a: &AdjacencyMatrix,
    z: &ClusterAssignment,
    q: &ConnectivityMatrix,
) -> Result<f64> {
    if z.k() != q.k() {
        return Err(dim("assignment and connectivity disagree on k"));
    }
    let stats = block_stats(a, z)?;
    let k = z.k();
    let mut total = 0.0;
    for r in 0..k {
        for s in 0..k {
            total += bernoulli_block_log_density(stats.edges(r, s), stats.pairs(r, s), q.get(r, s));
        }
    }
    Ok(total)
}

pub(crate) fn squared_distance(a: &EdgeProbabilityMatrix, b: &EdgeProbabilityMatrix) -> Result<f64> {
    if a.n() != b.n() {
        return Err(dim(format!("matrices of size {} and {}", a.n(), b.n())));
    }
    Ok(a.entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

/// `(1/n²) ‖θ - θ⁰‖²`.
pub fn normalized_sq_error(theta: &EdgeProbabilityMatrix, theta0: &EdgeProbabilityMatrix) -> Result<f64> {
    let n = theta.n();
    if n == 0 {
        return Err(Error::Empty("zero-sized matrices".into()));
    }
    Ok(squared_distance(theta, theta0)? / (n * n) as f64)
}

/// `‖θ^{z,Q} - θ^{z*,Q*}‖` (Frobenius).
///
/// When `z == z*` this uses the `O(k²)` form `Σ n_r n_s (Q_rs - Q*_rs)²`;
/// otherwise it falls back to the direct `O(n²)` sum.
pub fn blocked_distance(
    z: &ClusterAssignment,
    q: &ConnectivityMatrix,
    z_star: &ClusterAssignment,
    q_star: &ConnectivityMatrix,
) -> Result<f64> {
    check_pair(z, q, z_star, q_star)?;
    if z.labels() == z_star.labels() {
        let k = z.k();
        let sizes = z.sizes();
        let mut total = 0.0;
        for r in 0..k {
            for s in 0..k {
                let d = q.get(r, s) - q_star.get(r, s);
                total += (sizes[r] * sizes[s]) as f64 * d * d;
            }
        }
        Ok(total.sqrt())
    } else {
        direct_distance(z, q, z_star, q_star)
    }
}

/// `‖θ^{z,Q} - θ^{z*,Q*}‖` by the explicit double sum over node pairs.
pub fn direct_distance(
    z: &ClusterAssignment,
    q: &ConnectivityMatrix,
    z_star: &ClusterAssignment,
    q_star: &ConnectivityMatrix,
) -> Result<f64> {
    Ok(direct_sq_distance(z, q, z_star, q_star)?.sqrt())
}

pub(crate) fn direct_sq_distance(
    z: &ClusterAssignment,
    q: &ConnectivityMatrix,
    z_star: &ClusterAssignment,
    q_star: &ConnectivityMatrix,
) -> Result<f64> {
    if z.n() != z_star.n() {
        return Err(dim("assignments have different n"));
    }
    if z.k() != q.k() || z_star.k() != q_star.k() {
        return Err(dim("assignment and connectivity disagree on k"));
    }
    let n = z.n();
    let mut total = 0.0;
    for i in 0..n {
        let (r, r_star) = (z.label(i), z_star.label(i));
        for j in 0..n {
            let d = q.get(r, z.label(j)) - q_star.get(r_star, z_star.label(j));
            total += d * d;
        }
    }
    Ok(total)
}

pub(crate) fn check_pair(
    z: &ClusterAssignment,
    q: &ConnectivityMatrix,
    z_star: &ClusterAssignment,
    q_star: &ConnectivityMatrix,
) -> Result<()> {
    if z.n() != z_star.n() {
        return Err(dim(format!("assignments have n = {} and {}", z.n(), z_star.n())));
    }
    if z.k() != z_star.k() || q.k() != z.k() || q_star.k() != z.k() {
        return Err(dim("assignments and connectivity matrices must share k"));
    }
    Ok(())
}
