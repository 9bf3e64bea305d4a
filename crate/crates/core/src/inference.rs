//! Posterior inference for the block model.
//!
//! With a uniform prior on each `Q_rs`, the block likelihood integrates to a
//! Beta function per block, so the posterior over `z` alone is available in
//! closed form up to normalization. Two routes use it:
//!
//! * [`exact_posterior_over_assignments`] enumerates all `k^n` labelings and
//!   serves as the oracle at tiny `n`;
//! * [`GibbsSampler`] runs a collapsed Gibbs chain over `z`, maintaining the
//!   block edge counts incrementally, and redraws `Q | z, A` from its Beta
//!   full conditional whenever a sample is retained.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;

use crate::error::{dim, invalid, Error, Result};
use crate::harness::rate_schedule;
use crate::model::{
    bernoulli_block_log_density, block_stats, normalized_sq_error, AdjacencyMatrix,
    BlockSufficientStats, ClusterAssignment, ConnectivityMatrix, EdgeProbabilityMatrix,
};
use crate::priors::{
    assignment_at, assignment_index, check_budget, log_marginal_assignment_prior,
    log_prior_from_sizes, prior_ball_mass, BallMassEstimate, DirichletWeights,
};
use crate::rng::{rng_from_seed, SbmRng};
use crate::special::{ln_beta, log_sum_exp, sorted_sum, LogFactorial};

/// Default cap on `k^n` for the exact posterior.
pub const DEFAULT_POSTERIOR_BUDGET: u64 = 100_000;

/// One retained state of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    /// 1-based sweep index at which the sample was taken.
    pub sweep: usize,
    pub z: ClusterAssignment,
    pub q: ConnectivityMatrix,
    /// Unnormalized joint log posterior `ln p(z) + ln P(A | z, Q)`
    /// (the uniform prior on `Q` has density 1).
    pub log_post: f64,
}

impl PosteriorSample {
    pub fn theta(&self) -> EdgeProbabilityMatrix {
        crate::model::theta_from_assignment(&self.z, &self.q).expect("sample is consistent")
    }
}

/// `Σ_rs ln B(S_rs + 1, N_rs − S_rs + 1)`: the block likelihood with every
/// `Q_rs` integrated against the uniform prior.
pub fn log_marginal_block_likelihood(stats: &BlockSufficientStats) -> f64 {
    let terms = stats
        .edge_counts()
        .iter()
        .zip(stats.pair_counts())
        .filter(|(_, &n)| n > 0)
        .map(|(&s, &n)| ln_beta(s as f64 + 1.0, (n - s) as f64 + 1.0))
        .collect();
    sorted_sum(terms)
}

/// Unnormalized `ln p(z | A)`.
pub fn log_collapsed_posterior(
    a: &AdjacencyMatrix,
    z: &ClusterAssignment,
    alpha: &DirichletWeights,
) -> Result<f64> {
    let prior = log_marginal_assignment_prior(z, alpha)?;
    Ok(prior + log_marginal_block_likelihood(&block_stats(a, z)?))
}

/// Normalized posterior over every assignment in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    pub assignments: Vec<ClusterAssignment>,
    pub log_weights: Vec<f64>,
    /// `ln Σ_z p(z) ∫ P(A | z, Q) dQ` before normalization.
    pub log_evidence: f64,
}

impl ExactPosterior {
    pub fn n(&self) -> usize {
        self.assignments.first().map_or(0, ClusterAssignment::n)
    }

    pub fn k(&self) -> usize {
        self.assignments.first().map_or(0, ClusterAssignment::k)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn log_weight(&self, z: &ClusterAssignment) -> f64 {
        self.log_weights[assignment_index(z) as usize]
    }

    /// `P(z_i = r | z_{-i}, A)` for each `r`, read off the joint weights.
    pub fn site_conditional(&self, z: &ClusterAssignment, i: usize) -> Vec<f64> {
        let mut probe = z.clone();
        let logs: Vec<f64> = (0..self.k())
            .map(|r| {
                probe.set_label(i, r);
                self.log_weight(&probe)
            })
            .collect();
        let norm = log_sum_exp(&logs);
        logs.iter().map(|l| (l - norm).exp()).collect()
    }

    /// Total-variation distance to a histogram indexed like `assignments`.
    pub fn total_variation(&self, counts: &[u64]) -> f64 {
        let total: u64 = counts.iter().sum();
        let probs = self.probabilities();
        0.5 * probs
            .iter()
            .zip(counts)
            .map(|(p, &c)| (p - c as f64 / total as f64).abs())
            .sum::<f64>()
    }
}

pub fn exact_posterior_over_assignments(
    a: &AdjacencyMatrix,
    k: usize,
    alpha: &DirichletWeights,
    budget: u64,
) -> Result<ExactPosterior> {
    if alpha.k() != k {
        return Err(dim("alpha length differs from k"));
    }
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let n = a.n();
    let count = check_budget(n, k, budget)?;
    let (assignments, raw): (Vec<_>, Vec<_>) = (0..count)
        .into_par_iter()
        .map(|idx| {
            let z = assignment_at(idx, n, k);
            let w = log_collapsed_posterior(a, &z, alpha).expect("dimensions checked");
            (z, w)
        })
        .unzip();
    let log_evidence = log_sum_exp(&raw);
    let log_weights = raw.iter().map(|w| w - log_evidence).collect();
    Ok(ExactPosterior { assignments, log_weights, log_evidence })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanOrder {
    /// Sites `0..n` in order every sweep.
    #[default]
    Systematic,
    /// `n` uniformly chosen sites per sweep.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsConfig {
    /// Total sweeps, burn-in included.
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub scan: ScanOrder,
}

impl GibbsConfig {
    pub fn new(iters: usize, burnin: usize, thin: usize, seed: u64) -> Self {
        Self { iters, burnin, thin, seed, scan: ScanOrder::Systematic }
    }

    fn validate(&self) -> Result<()> {
        if self.iters <= self.burnin {
            return Err(invalid(format!(
                "iters ({}) must exceed burnin ({})",
                self.iters, self.burnin
            )));
        }
        if self.thin == 0 {
            return Err(invalid("thin must be at least 1"));
        }
        Ok(())
    }

    pub fn retains(&self, sweep: usize) -> bool {
        sweep > self.burnin && (sweep - self.burnin).is_multiple_of(self.thin)
    }
}

/// Collapsed Gibbs chain over `z` with incremental block statistics.
#[derive(Debug, Clone)]
pub struct GibbsSampler<'a> {
    a: &'a AdjacencyMatrix,
    alpha: DirichletWeights,
    k: usize,
    labels: Vec<usize>,
    sizes: Vec<usize>,
    /// Row-major `S_rs`.
    edges: Vec<u64>,
    log_fact: LogFactorial,
    rng: SbmRng,
    scan: ScanOrder,
    out_counts: Vec<u64>,
    in_counts: Vec<u64>,
    log_cond: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    /// Starts from labels drawn uniformly at random.
    pub fn new(a: &'a AdjacencyMatrix, k: usize, alpha: DirichletWeights, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let labels: Vec<usize> = (0..a.n()).map(|_| rng.random_range(0..k.max(1))).collect();
        let z = ClusterAssignment::new(labels, k)?;
        Self::with_state(a, z, alpha, rng)
    }

    pub fn from_assignment(
        a: &'a AdjacencyMatrix,
        z: ClusterAssignment,
        alpha: DirichletWeights,
        seed: u64,
    ) -> Result<Self> {
        Self::with_state(a, z, alpha, rng_from_seed(seed))
    }

    fn with_state(
        a: &'a AdjacencyMatrix,
        z: ClusterAssignment,
        alpha: DirichletWeights,
        rng: SbmRng,
    ) -> Result<Self> {
        let k = z.k();
        if alpha.k() != k {
            return Err(dim("alpha length differs from k"));
        }
        let stats = block_stats(a, &z)?;
        let n = a.n();
        Ok(Self {
            a,
            alpha,
            k,
            sizes: z.sizes().to_vec(),
            labels: z.labels().to_vec(),
            edges: stats.edge_counts().to_vec(),
            log_fact: LogFactorial::new(n * n + 1),
            rng,
            scan: ScanOrder::Systematic,
            out_counts: vec![0; k],
            in_counts: vec![0; k],
            log_cond: vec![0.0; k],
        })
    }

    pub fn set_scan(&mut self, scan: ScanOrder) {
        self.scan = scan;
    }

    pub fn assignment(&self) -> ClusterAssignment {
        ClusterAssignment::new(self.labels.clone(), self.k).expect("labels stay in range")
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn stats(&self) -> BlockSufficientStats {
        let k = self.k;
        let pairs = (0..k * k)
            .map(|b| (self.sizes[b / k] * self.sizes[b % k]) as u64)
            .collect();
        BlockSufficientStats::new(k, self.edges.clone(), pairs).expect("counts consistent")
    }

    #[inline]
    fn block_term(&self, s: u64, n: u64) -> f64 {
        self.log_fact.ln_beta_counts(s, n - s)
    }

    /// Takes node `i` out of its cluster, filling its edge counts per cluster.
    fn detach(&mut self, i: usize) -> (usize, u64) {
        let k = self.k;
        let n = self.a.n();
        self.out_counts.iter_mut().for_each(|c| *c = 0);
        self.in_counts.iter_mut().for_each(|c| *c = 0);
        let row = self.a.row(i);
        let entries = self.a.entries();
        for j in 0..n {
            if j == i {
                continue;
            }
            let s = self.labels[j];
            self.out_counts[s] += u64::from(row[j]);
            self.in_counts[s] += u64::from(entries[j * n + i]);
        }
        let self_loop = u64::from(row[i]);
        let old = self.labels[i];
        for s in 0..k {
            self.edges[old * k + s] -= self.out_counts[s];
            self.edges[s * k + old] -= self.in_counts[s];
        }
        self.edges[old * k + old] -= self_loop;
        self.sizes[old] -= 1;
        (old, self_loop)
    }

    fn attach(&mut self, i: usize, r: usize, self_loop: u64) {
        let k = self.k;
        for s in 0..k {
            self.edges[r * k + s] += self.out_counts[s];
            self.edges[s * k + r] += self.in_counts[s];
        }
        self.edges[r * k + r] += self_loop;
        self.sizes[r] += 1;
        self.labels[i] = r;
    }

    /// Unnormalized log conditional of each label for a detached node.
    fn fill_log_conditional(&mut self, self_loop: u64) {
        let k = self.k;
        for r in 0..k {
            let m_r = self.sizes[r] as u64;
            let mut delta = 0.0;
            for s in 0..k {
                let m_s = self.sizes[s] as u64;
                if s == r {
                    let old_s = self.edges[r * k + r];
                    let add = self.out_counts[r] + self.in_counts[r] + self_loop;
                    delta += self.block_term(old_s + add, (m_r + 1) * (m_r + 1))
                        - self.block_term(old_s, m_r * m_r);
                } else {
                    let row_s = self.edges[r * k + s];
                    delta += self.block_term(row_s + self.out_counts[s], (m_r + 1) * m_s)
                        - self.block_term(row_s, m_r * m_s);
                    let col_s = self.edges[s * k + r];
                    delta += self.block_term(col_s + self.in_counts[s], m_s * (m_r + 1))
                        - self.block_term(col_s, m_s * m_r);
                }
            }
            self.log_cond[r] = (m_r as f64 + self.alpha.alpha()[r]).ln() + delta;
        }
    }

    /// `P(z_i = r | z_{-i}, A)` at the current state (state is unchanged).
    pub fn site_conditional(&mut self, i: usize) -> Vec<f64> {
        let (old, self_loop) = self.detach(i);
        self.fill_log_conditional(self_loop);
        let norm = log_sum_exp(&self.log_cond);
        let probs = self.log_cond.iter().map(|l| (l - norm).exp()).collect();
        self.attach(i, old, self_loop);
        probs
    }

    fn update_site(&mut self, i: usize) {
        let (_, self_loop) = self.detach(i);
        self.fill_log_conditional(self_loop);
        let max = self.log_cond.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in self.log_cond.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        let mut u = self.rng.random::<f64>() * total;
        let mut choice = self.k - 1;
        for (r, w) in self.log_cond.iter().enumerate() {
            if u < *w {
                choice = r;
                break;
            }
            u -= w;
        }
        self.attach(i, choice, self_loop);
    }

    /// One pass of single-site updates.
    pub fn sweep(&mut self) {
        let n = self.a.n();
        match self.scan {
            ScanOrder::Systematic => (0..n).for_each(|i| self.update_site(i)),
            ScanOrder::Random => {
                for _ in 0..n {
                    let i = self.rng.random_range(0..n);
                    self.update_site(i);
                }
            }
        }
    }

    /// Draws `Q_rs ~ Beta(S_rs + 1, N_rs − S_rs + 1)` at the current `z`.
    pub fn draw_connectivity(&mut self) -> ConnectivityMatrix {
        let stats = self.stats();
        draw_beta_blocks(&stats, &mut self.rng)
    }

    fn log_post(&self, q: &ConnectivityMatrix) -> f64 {
        let k = self.k;
        let mut ll = 0.0;
        for r in 0..k {
            for s in 0..k {
                let n = (self.sizes[r] * self.sizes[s]) as u64;
                ll += bernoulli_block_log_density(self.edges[r * k + s], n, q.get(r, s));
            }
        }
        log_prior_from_sizes(&self.sizes, &self.alpha) + ll
    }

    /// Runs the chain, handing every retained sample to `visit`.
    pub fn run<F: FnMut(PosteriorSample)>(&mut self, config: &GibbsConfig, mut visit: F) -> Result<()> {
        config.validate()?;
        self.scan = config.scan;
        for sweep in 1..=config.iters {
            self.sweep();
            if config.retains(sweep) {
                let q = self.draw_connectivity();
                let log_post = self.log_post(&q);
                visit(PosteriorSample { sweep, z: self.assignment(), q, log_post });
            }
        }
        Ok(())
    }
}

fn draw_beta_blocks<R: Rng + ?Sized>(stats: &BlockSufficientStats, rng: &mut R) -> ConnectivityMatrix {
    let entries = stats
        .edge_counts()
        .iter()
        .zip(stats.pair_counts())
        .map(|(&s, &n)| {
            Beta::new(s as f64 + 1.0, (n - s) as f64 + 1.0)
                .expect("shape parameters are at least 1")
                .sample(rng)
        })
        .collect();
    ConnectivityMatrix::new(stats.k(), entries).expect("beta draws lie in [0, 1]")
}

/// Collapsed Gibbs chain from a uniformly random start; returns retained samples.
pub fn collapsed_gibbs(
    a: &AdjacencyMatrix,
    k: usize,
    alpha: &DirichletWeights,
    config: &GibbsConfig,
) -> Result<Vec<PosteriorSample>> {
    config.validate()?;
    let mut sampler = GibbsSampler::new(a, k, alpha.clone(), config.seed)?;
    let mut out = Vec::with_capacity((config.iters - config.burnin) / config.thin);
    sampler.run(config, |s| out.push(s))?;
    Ok(out)
}

/// Independent `Beta(S_rs + 1, N_rs − S_rs + 1)` draws per block.
pub fn sample_q_given_z(a: &AdjacencyMatrix, z: &ClusterAssignment, seed: u64) -> Result<ConnectivityMatrix> {
    let stats = block_stats(a, z)?;
    Ok(draw_beta_blocks(&stats, &mut rng_from_seed(seed)))
}

/// Streaming entrywise mean of `θ^{z,Q}` plus per-sample squared errors.
#[derive(Debug, Clone)]
pub struct PosteriorAccumulator {
    n: usize,
    sum: Vec<f64>,
    count: usize,
    truth: Option<EdgeProbabilityMatrix>,
    errors: Vec<f64>,
}

impl PosteriorAccumulator {
    pub fn new(n: usize) -> Self {
        Self { n, sum: vec![0.0; n * n], count: 0, truth: None, errors: Vec::new() }
    }

    /// Also records `normalized_sq_error(θ^{z,Q}, truth)` for every sample.
    pub fn with_truth(truth: EdgeProbabilityMatrix) -> Self {
        let mut acc = Self::new(truth.n());
        acc.truth = Some(truth);
        acc
    }

    pub fn add(&mut self, z: &ClusterAssignment, q: &ConnectivityMatrix) -> Result<()> {
        if z.n() != self.n || z.k() != q.k() {
            return Err(dim("sample does not match accumulator size"));
        }
        let n = self.n;
        let mut sq = 0.0;
        for i in 0..n {
            let r = z.label(i);
            for j in 0..n {
                let v = q.get(r, z.label(j));
                self.sum[i * n + j] += v;
                if let Some(t) = &self.truth {
                    let d = v - t.get(i, j);
                    sq += d * d;
                }
            }
        }
        if self.truth.is_some() {
            self.errors.push(sq / (n * n) as f64);
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Result<EdgeProbabilityMatrix> {
        if self.count == 0 {
            return Err(Error::Empty("no posterior samples".into()));
        }
        let c = self.count as f64;
        let entries = self.sum.iter().map(|s| (s / c).clamp(0.0, 1.0)).collect();
        EdgeProbabilityMatrix::new(self.n, entries)
    }

    /// Per-sample normalized squared errors (empty without a truth).
    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    /// Fraction of samples whose normalized squared error exceeds `M² ε²`.
    pub fn tail_mass(&self, m: f64, eps: f64) -> Result<f64> {
        tail_fraction(&self.errors, m, eps)
    }
}

fn tail_fraction(errors: &[f64], m: f64, eps: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("no posterior samples".into()));
    }
    if !(m >= 0.0) {
        return Err(invalid(format!("M = {m} must be nonnegative")));
    }
    let cut = m * m * eps * eps;
    Ok(errors.iter().filter(|&&e| e > cut).count() as f64 / errors.len() as f64)
}

/// Entrywise average of `θ^{z,Q}` over the samples.
pub fn posterior_mean_theta(samples: &[PosteriorSample]) -> Result<EdgeProbabilityMatrix> {
    let first = samples.first().ok_or_else(|| Error::Empty("no posterior samples".into()))?;
    let mut acc = PosteriorAccumulator::new(first.z.n());
    for s in samples {
        acc.add(&s.z, &s.q)?;
    }
    acc.mean()
}

/// Fraction of samples with `‖θ − θ⁰‖² / n² > M² ε_n²`.
pub fn posterior_tail_mass(
    samples: &[PosteriorSample],
    theta0: &EdgeProbabilityMatrix,
    m: f64,
    eps_n: f64,
) -> Result<f64> {
    let errors = samples
        .iter()
        .map(|s| normalized_sq_error(&s.theta(), theta0))
        .collect::<Result<Vec<_>>>()?;
    tail_fraction(&errors, m, eps_n)
}

/// `ln P_θ(A)` for independent Bernoulli entries.
pub fn log_likelihood_theta(a: &AdjacencyMatrix, theta: &EdgeProbabilityMatrix) -> Result<f64> {
    if a.n() != theta.n() {
        return Err(dim("adjacency and θ differ in size"));
    }
    Ok(a.entries()
        .iter()
        .zip(theta.entries())
        .map(|(&x, &p)| bernoulli_block_log_density(u64::from(x), 1, p))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceCheck {
    /// `ln D_n = ln ∫ P_θ(A) / P_θ⁰(A) dΠ(θ)`, exact by enumeration.
    pub log_dn: f64,
    /// `−C n² ε_n² + ln Π(‖θ − θ⁰‖ < radius)`.
    pub log_bound: f64,
    pub satisfied: bool,
    pub ball_mass: BallMassEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceOptions {
    /// Defaults to `n ε_n` when `None`.
    pub radius: Option<f64>,
    pub mc_samples: usize,
    pub seed: u64,
    pub budget: u64,
}

impl Default for EvidenceOptions {
    fn default() -> Self {
        Self { radius: None, mc_samples: 20_000, seed: 0, budget: DEFAULT_POSTERIOR_BUDGET }
    }
}

/// Compares the exact evidence ratio with `e^{−C n² ε_n²} Π(ball)`.
pub fn evidence_lower_bound_check(
    a: &AdjacencyMatrix,
    theta0: &EdgeProbabilityMatrix,
    k: usize,
    alpha: &DirichletWeights,
    c: f64,
    options: &EvidenceOptions,
) -> Result<EvidenceCheck> {
    if !(c >= 0.0) {
        return Err(invalid(format!("C = {c} must be nonnegative")));
    }
    let n = a.n();
    let schedule = rate_schedule(n, k)?;
    let radius = options.radius.unwrap_or(n as f64 * schedule.eps());
    let posterior = exact_posterior_over_assignments(a, k, alpha, options.budget)?;
    let log_dn = posterior.log_evidence - log_likelihood_theta(a, theta0)?;
    let ball_mass = prior_ball_mass(theta0, radius, alpha, k, options.mc_samples, options.seed)?;
    let penalty = if c.is_infinite() {
        f64::INFINITY
    } else {
        c * (n * n) as f64 * schedule.eps_sq
    };
    let log_bound = -penalty + ball_mass.estimate.ln();
    Ok(EvidenceCheck { log_dn, log_bound, satisfied: log_dn >= log_bound, ball_mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::enumerate_assignments;

    fn stats(s: u64, n: u64) -> BlockSufficientStats {
        BlockSufficientStats::new(1, vec![s], vec![n]).unwrap()
    }

    #[test]
    fn block_marginal_examples() {
        assert!((log_marginal_block_likelihood(&stats(0, 1)) - 0.5f64.ln()).abs() < 1e-14);
        assert!((log_marginal_block_likelihood(&stats(1, 1)) - 0.5f64.ln()).abs() < 1e-14);
        assert!((log_marginal_block_likelihood(&stats(1, 2)) - (1.0f64 / 6.0).ln()).abs() < 1e-14);
        let empty = BlockSufficientStats::new(2, vec![0; 4], vec![0; 4]).unwrap();
        assert_eq!(log_marginal_block_likelihood(&empty), 0.0);
    }

    #[test]
    fn exact_posterior_examples() {
        let a = AdjacencyMatrix::new(1, vec![1]).unwrap();
        let p = exact_posterior_over_assignments(&a, 1, &DirichletWeights::symmetric(1, 0.5).unwrap(), 10).unwrap();
        assert_eq!(p.assignments.len(), 1);
        assert!(p.log_weights[0].abs() < 1e-15);

        let p = exact_posterior_over_assignments(&a, 2, &DirichletWeights::symmetric(2, 0.5).unwrap(), 10).unwrap();
        for w in p.probabilities() {
            assert!((w - 0.5).abs() < 1e-15);
        }

        // Frozen from an independent quadrature oracle: 24/53 and 2.5/53.
        let full = AdjacencyMatrix::new(2, vec![1; 4]).unwrap();
        let p = exact_posterior_over_assignments(&full, 2, &DirichletWeights::symmetric(2, 0.5).unwrap(), 10).unwrap();
        let probs = p.probabilities();
        let want = [24.0 / 53.0, 2.5 / 53.0, 2.5 / 53.0, 24.0 / 53.0];
        for (g, w) in probs.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{probs:?}");
        }
        assert_eq!(p.log_weights[0], p.log_weights[3]);
        assert_eq!(p.log_weights[1], p.log_weights[2]);

        let big = AdjacencyMatrix::zeros(20);
        assert!(matches!(
            exact_posterior_over_assignments(&big, 2, &DirichletWeights::symmetric(2, 0.5).unwrap(), 100_000),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn incremental_stats_match_recount() {
        let truth = crate::model::sample_truth(&crate::model::TruthSpec { n: 15, k: 3, delta: 0.1, seed: 2 }).unwrap();
        let a = crate::model::sample_adjacency(&truth.theta, 3);
        let mut g = GibbsSampler::new(&a, 3, DirichletWeights::symmetric(3, 0.5).unwrap(), 4).unwrap();
        for _ in 0..20 {
            g.sweep();
            let z = g.assignment();
            assert_eq!(g.stats(), block_stats(&a, &z).unwrap());
        }
        g.set_scan(ScanOrder::Random);
        for _ in 0..5 {
            g.sweep();
            assert_eq!(g.stats(), block_stats(&a, &g.assignment()).unwrap());
        }
    }

    #[test]
    fn site_conditionals_match_enumeration() {
        let a = AdjacencyMatrix::from_rows(&[
            vec![1, 0, 1, 1],
            vec![0, 1, 0, 0],
            vec![1, 1, 1, 0],
            vec![0, 0, 1, 1],
        ])
        .unwrap();
        let alpha = DirichletWeights::new(vec![0.5, 1.5]).unwrap();
        let exact = exact_posterior_over_assignments(&a, 2, &alpha, 100).unwrap();
        for z in enumerate_assignments(4, 2, 100).unwrap() {
            let mut g = GibbsSampler::from_assignment(&a, z.clone(), alpha.clone(), 0).unwrap();
            for i in 0..4 {
                let got = g.site_conditional(i);
                let want = exact.site_conditional(&z, i);
                for (x, y) in got.iter().zip(&want) {
                    assert!((x - y).abs() < 1e-10);
                }
            }
            assert_eq!(g.assignment(), z);
        }
    }

    #[test]
    fn gibbs_config_validation() {
        let a = AdjacencyMatrix::zeros(2);
        let alpha = DirichletWeights::symmetric(2, 0.5).unwrap();
        assert!(collapsed_gibbs(&a, 2, &alpha, &GibbsConfig::new(5, 5, 1, 0)).is_err());
        assert!(collapsed_gibbs(&a, 2, &alpha, &GibbsConfig::new(5, 1, 0, 0)).is_err());
        let s = collapsed_gibbs(&a, 2, &alpha, &GibbsConfig::new(10, 4, 2, 0)).unwrap();
        assert_eq!(s.iter().map(|x| x.sweep).collect::<Vec<_>>(), vec![6, 8, 10]);
        assert_eq!(s, collapsed_gibbs(&a, 2, &alpha, &GibbsConfig::new(10, 4, 2, 0)).unwrap());
    }

    #[test]
    fn beta_draw_examples() {
        let z = ClusterAssignment::new(vec![0, 0], 2).unwrap();
        let a = AdjacencyMatrix::zeros(2);
        let q = sample_q_given_z(&a, &z, 1).unwrap();
        assert_eq!(q, sample_q_given_z(&a, &z, 1).unwrap());
        // Block (2,2) is empty: a Beta(1,1) draw anywhere in the unit interval.
        assert!((0.0..=1.0).contains(&q.get(1, 1)));

        let st = BlockSufficientStats::new(1, vec![5_000], vec![10_000]).unwrap();
        let mut rng = rng_from_seed(7);
        let inside = (0..1000)
            .filter(|_| (draw_beta_blocks(&st, &mut rng).get(0, 0) - 0.5).abs() <= 0.02)
            .count();
        assert!(inside >= 990);
    }

    fn sample(z: Vec<usize>, k: usize, q: Vec<f64>) -> PosteriorSample {
        PosteriorSample {
            sweep: 1,
            z: ClusterAssignment::new(z, k).unwrap(),
            q: ConnectivityMatrix::new(k, q).unwrap(),
            log_post: 0.0,
        }
    }

    #[test]
    fn posterior_mean_examples() {
        assert!(posterior_mean_theta(&[]).is_err());
        let one = sample(vec![0, 1], 2, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(posterior_mean_theta(std::slice::from_ref(&one)).unwrap(), one.theta());
        let lo = sample(vec![0, 0], 1, vec![0.0]);
        let hi = sample(vec![0, 0], 1, vec![1.0]);
        let m = posterior_mean_theta(&[lo, hi]).unwrap();
        assert_eq!(m.entries(), &[0.5; 4]);
    }

    #[test]
    fn tail_mass_examples() {
        let t0 = EdgeProbabilityMatrix::constant(2, 0.5).unwrap();
        let s: Vec<_> = [0.45, 0.6, 0.9]
            .iter()
            .map(|&q| sample(vec![0, 0], 1, vec![q]))
            .collect();
        assert_eq!(posterior_tail_mass(&s, &t0, 1e9, 0.1).unwrap(), 0.0);
        assert_eq!(posterior_tail_mass(&s, &t0, 0.0, 0.1).unwrap(), 1.0);
        let mut last = 1.0;
        for m in [0.0, 0.3, 0.6, 1.0, 2.0, 5.0] {
            let t = posterior_tail_mass(&s, &t0, m, 0.1).unwrap();
            assert!(t <= last);
            last = t;
        }
        assert!(posterior_tail_mass(&[], &t0, 1.0, 0.1).is_err());
    }

    #[test]
    fn evidence_examples() {
        let t0 = EdgeProbabilityMatrix::constant(1, 0.5).unwrap();
        let alpha = DirichletWeights::symmetric(1, 0.5).unwrap();
        for bit in [0u8, 1] {
            let a = AdjacencyMatrix::new(1, vec![bit]).unwrap();
            let chk = evidence_lower_bound_check(&a, &t0, 1, &alpha, 1.0, &EvidenceOptions::default()).unwrap();
            assert!(chk.log_dn.abs() < 1e-14);
        }
        let a = AdjacencyMatrix::new(2, vec![1, 0, 0, 1]).unwrap();
        let t0 = EdgeProbabilityMatrix::constant(2, 0.4).unwrap();
        let alpha = DirichletWeights::symmetric(2, 0.5).unwrap();
        let chk = evidence_lower_bound_check(&a, &t0, 2, &alpha, f64::INFINITY, &EvidenceOptions::default()).unwrap();
        assert!(chk.satisfied);
        assert_eq!(chk.log_bound, f64::NEG_INFINITY);
    }
}
