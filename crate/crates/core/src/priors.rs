//! Multinomial-Dirichlet assignment prior.
//!
//! `π ~ Dirichlet(α)`, `z_i | π ~ Categorical(π)` and `Q_rs ~ Uniform(0, 1)`.
//! With `π` integrated out the prior on `z` depends only on cluster sizes:
//!
//! ```text
//! p(z) = Γ(Σα) / Γ(n + Σα) · Π_r Γ(n_r + α_r) / Γ(α_r)
//! ```
//!
//! Everything here is evaluated in log space; `p(z)` underflows long before
//! `n = 100`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Gamma;
use rayon::prelude::*;

use crate::error::{dim, invalid, Error, Result};
use crate::model::{squared_distance, theta_from_assignment, ClusterAssignment, ConnectivityMatrix, EdgeProbabilityMatrix};
use crate::rng::{derive_seed, rng_from_seed, shards};
use crate::special::{ln_gamma, sorted_sum};

/// Default per-cluster concentration.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Default cap on `k^n` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1_000_000;

/// Dirichlet hyper-parameters `α_1..α_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletWeights {
    alpha: Vec<f64>,
}

impl DirichletWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(invalid("need at least one Dirichlet weight"));
        }
        if let Some(bad) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(invalid(format!("Dirichlet weight {bad} must be positive")));
        }
        Ok(Self { alpha })
    }

    pub fn symmetric(k: usize, alpha: f64) -> Result<Self> {
        Self::new(vec![alpha; k])
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.alpha.iter().all(|&a| a == self.alpha[0])
    }
}

/// A probability vector `π`; only used for forward simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingProportions {
    pi: Vec<f64>,
}

impl MixingProportions {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.iter().any(|&p| !(p >= 0.0)) {
            return Err(invalid("mixing proportions must be nonnegative"));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("mixing proportions sum to {total}, not 1")));
        }
        Ok(Self { pi })
    }

    /// Draws `π ~ Dirichlet(α)` by normalizing independent gamma variates.
    pub fn sample<R: Rng + ?Sized>(alpha: &DirichletWeights, rng: &mut R) -> Self {
        let gammas: Vec<Gamma<f64>> = alpha
            .alpha()
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("alpha validated positive"))
            .collect();
        loop {
            let draws: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
            let total: f64 = draws.iter().sum();
            // All-zero draws are possible for tiny α; redraw.
            if total > 0.0 && total.is_finite() {
                return Self { pi: draws.iter().map(|d| d / total).collect() };
            }
        }
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// `z_i ~ Categorical(π)` independently for `n` nodes.
    pub fn sample_assignment<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> ClusterAssignment {
        let k = self.pi.len();
        let labels = match WeightedIndex::new(&self.pi) {
            Ok(dist) => (0..n).map(|_| dist.sample(rng)).collect(),
            // Only reachable if every weight underflowed; fall back to uniform.
            Err(_) => (0..n).map(|_| rng.random_range(0..k)).collect(),
        };
        ClusterAssignment::new(labels, k).expect("labels drawn in range")
    }
}

/// Ancestral draw of `z`: `π ~ Dirichlet(α)`, then labels given `π`.
pub fn sample_assignment_from_prior<R: Rng + ?Sized>(
    n: usize,
    alpha: &DirichletWeights,
    rng: &mut R,
) -> ClusterAssignment {
    MixingProportions::sample(alpha, rng).sample_assignment(n, rng)
}

/// `ln p(z)` from cluster sizes alone.
pub fn log_prior_from_sizes(sizes: &[usize], alpha: &DirichletWeights) -> f64 {
    let n: usize = sizes.iter().sum();
    let total = alpha.total();
    let terms = sizes
        .iter()
        .zip(alpha.alpha())
        .map(|(&m, &a)| ln_gamma(m as f64 + a) - ln_gamma(a))
        .collect();
    ln_gamma(total) - ln_gamma(n as f64 + total) + sorted_sum(terms)
}

/// `ln p(z)` with `π` integrated out.
///
/// Per-cluster terms are summed in sorted order, so relabeling `z` under a
/// symmetric `α` reproduces the value bit for bit.
pub fn log_marginal_assignment_prior(z: &ClusterAssignment, alpha: &DirichletWeights) -> Result<f64> {
    if z.k() != alpha.k() {
        return Err(dim(format!("assignment has k = {}, alpha has {} weights", z.k(), alpha.k())));
    }
    Ok(log_prior_from_sizes(z.sizes(), alpha))
}

pub(crate) fn check_budget(n: usize, k: usize, budget: u64) -> Result<u64> {
    let count = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > budget as u128 {
        return Err(Error::BudgetExceeded { count, budget });
    }
    Ok(count as u64)
}

/// Lexicographic odometer over `Z_{n,k}`; the last node varies fastest.
#[derive(Debug, Clone)]
pub struct AssignmentIter {
    current: Option<Vec<usize>>,
    k: usize,
}

impl Iterator for AssignmentIter {
    type Item = ClusterAssignment;

    fn next(&mut self) -> Option<ClusterAssignment> {
        let labels = self.current.take()?;
        let out = ClusterAssignment::new(labels.clone(), self.k).expect("odometer stays in range");
        let mut next = labels;
        let mut pos = next.len();
        loop {
            if pos == 0 {
                // Wrapped past the last assignment.
                return Some(out);
            }
            pos -= 1;
            next[pos] += 1;
            if next[pos] < self.k {
                break;
            }
            next[pos] = 0;
        }
        self.current = Some(next);
        Some(out)
    }
}

/// Every assignment in `Z_{n,k}` exactly once, in lexicographic label order.
pub fn enumerate_assignments(n: usize, k: usize, budget: u64) -> Result<AssignmentIter> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    check_budget(n, k, budget)?;
    Ok(AssignmentIter { current: Some(vec![0; n]), k })
}

/// The assignment at position `index` of the lexicographic order.
pub fn assignment_at(index: u64, n: usize, k: usize) -> ClusterAssignment {
    let mut labels = vec![0; n];
    let mut rest = index;
    for slot in labels.iter_mut().rev() {
        *slot = (rest % k as u64) as usize;
        rest /= k as u64;
    }
    ClusterAssignment::new(labels, k).expect("digits are below k")
}

/// Position of `z` in the lexicographic order.
pub fn assignment_index(z: &ClusterAssignment) -> u64 {
    z.labels().iter().fold(0u64, |acc, &r| acc * z.k() as u64 + r as u64)
}

/// `max_z ln p(z)` over `Z_{n,k}`, by exhaustive enumeration.
pub fn max_log_prior(n: usize, k: usize, alpha: &DirichletWeights, budget: u64) -> Result<f64> {
    if alpha.k() != k {
        return Err(dim("alpha length differs from k"));
    }
    let mut best = f64::NEG_INFINITY;
    for z in enumerate_assignments(n, k, budget)? {
        let lp = log_prior_from_sizes(z.sizes(), alpha);
        // Strict comparison keeps the first maximizer.
        if lp > best {
            best = lp;
        }
    }
    Ok(best)
}

/// `ln max_z p(z) / p(z_ref)`; `z_ref` must occupy every cluster.
pub fn max_log_prior_ratio(
    n: usize,
    k: usize,
    alpha: &DirichletWeights,
    z_ref: &ClusterAssignment,
    budget: u64,
) -> Result<f64> {
    if z_ref.n() != n || z_ref.k() != k {
        return Err(dim("reference assignment does not match (n, k)"));
    }
    if !z_ref.all_occupied() {
        return Err(Error::Precondition("reference assignment leaves a cluster empty".into()));
    }
    let best = max_log_prior(n, k, alpha, budget)?;
    Ok(best - log_marginal_assignment_prior(z_ref, alpha)?)
}

/// Exact `max_z p(z) / p(z_ref)`.
pub fn max_prior_ratio(
    n: usize,
    k: usize,
    alpha: &DirichletWeights,
    z_ref: &ClusterAssignment,
    budget: u64,
) -> Result<f64> {
    Ok(max_log_prior_ratio(n, k, alpha, z_ref, budget)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallMassEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
    pub samples: u64,
}

const BALL_MASS_SHARD: usize = 2048;

/// Monte-Carlo estimate of `Π(‖θ - θ⁰‖ < radius)` under the full hierarchy.
///
/// Each draw samples `π`, then `z`, then a uniform `Q`. Shards use seeds
/// derived from `seed`, and hits are merged by exact integer summation.
pub fn prior_ball_mass(
    theta0: &EdgeProbabilityMatrix,
    radius: f64,
    alpha: &DirichletWeights,
    k: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<BallMassEstimate> {
    if mc_samples == 0 {
        return Err(invalid("need at least one Monte-Carlo sample"));
    }
    if radius < 0.0 || radius.is_nan() {
        return Err(invalid(format!("radius {radius} must be nonnegative")));
    }
    if alpha.k() != k {
        return Err(dim("alpha length differs from k"));
    }
    let n = theta0.n();
    let r2 = radius * radius;
    let hits: u64 = shards(mc_samples, BALL_MASS_SHARD)
        .into_par_iter()
        .map(|(shard, len)| {
            let mut rng = rng_from_seed(derive_seed(seed, &[shard]));
            let mut hits = 0u64;
            for _ in 0..len {
                let z = sample_assignment_from_prior(n, alpha, &mut rng);
                let q = ConnectivityMatrix::uniform(k, 0.0, 1.0, &mut rng);
                let theta = theta_from_assignment(&z, &q).expect("k matches");
                if squared_distance(&theta, theta0).expect("same n") < r2 {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let m = mc_samples as f64;
    let p = hits as f64 / m;
    Ok(BallMassEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / m).sqrt(),
        hits,
        samples: mc_samples as u64,
    })
}
