//! Randomized and exhaustive audits shared by the CLI and the acceptance
//! suite. Each audit reports raw measurements; callers decide pass/fail
//! thresholds.

use rand::Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{
    containment_check, decompose_distance, ellipsoid_volume, greedy_packing, hit_or_miss_volume,
    packing_bound, AnnulusSpec,
};
use crate::harness::rate_schedule;
use crate::hypothesis::{estimate_test_errors, hoeffding_error_bound, ErrorRates};
use crate::inference::{
    evidence_lower_bound_check, exact_posterior_over_assignments, EvidenceOptions, GibbsSampler,
    DEFAULT_POSTERIOR_BUDGET,
};
use crate::model::{
    blocked_distance, direct_distance, direct_sq_distance, sample_adjacency, sample_truth,
    ClusterAssignment, ConnectivityMatrix, EdgeProbabilityMatrix, TruthSpec,
};
use crate::priors::{
    assignment_index, enumerate_assignments, log_marginal_assignment_prior, max_log_prior,
    DirichletWeights,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::special::log_sum_exp;

fn random_instance<R: Rng>(
    rng: &mut R,
    max_n: usize,
    max_k: usize,
) -> (ClusterAssignment, ConnectivityMatrix, ClusterAssignment, ConnectivityMatrix) {
    let n = rng.random_range(1..=max_n);
    let k = rng.random_range(1..=max_k);
    let z = ClusterAssignment::new((0..n).map(|_| rng.random_range(0..k)).collect(), k).expect("in range");
    let z_star = ClusterAssignment::new((0..n).map(|_| rng.random_range(0..k)).collect(), k).expect("in range");
    let q = ConnectivityMatrix::uniform(k, 0.0, 1.0, rng);
    let q_star = ConnectivityMatrix::uniform(k, 0.0, 1.0, rng);
    (z, q, z_star, q_star)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationRow {
    pub n: usize,
    pub k: usize,
    /// `|Σ_z p(z) − 1|`.
    pub error: f64,
}

/// Sums the marginal assignment prior over `Z_{n,k}` for every `(n, k)` with
/// `k^n ≤ max_count`, `n ≤ max_n`, `k ≤ max_k`.
pub fn prior_normalization(max_n: usize, max_k: usize, max_count: u64, alpha: f64) -> Result<Vec<NormalizationRow>> {
    let mut rows = Vec::new();
    for k in 1..=max_k {
        let weights = DirichletWeights::symmetric(k, alpha)?;
        for n in 1..=max_n {
            let Ok(iter) = enumerate_assignments(n, k, max_count) else { continue };
            let logs = iter
                .map(|z| log_marginal_assignment_prior(&z, &weights))
                .collect::<Result<Vec<_>>>()?;
            rows.push(NormalizationRow { n, k, error: (log_sum_exp(&logs).exp() - 1.0).abs() });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorRatioRow {
    pub n: usize,
    pub k: usize,
    /// Number of valid (fully occupied) reference assignments checked.
    pub references: usize,
    /// `max over z_ref of ln(max_z p(z)/p(z_ref)) / (n ln k)`.
    pub worst_constant: f64,
    pub worst_reference: Vec<usize>,
}

/// Worst-case prior-ratio constant `ln(max_z p(z) / p(z_ref)) / (n ln k)` over every valid reference.
pub fn prior_ratio_table(ns: &[usize], ks: &[usize], alpha: f64) -> Result<Vec<PriorRatioRow>> {
    let mut rows = Vec::new();
    for &k in ks {
        let weights = DirichletWeights::symmetric(k, alpha)?;
        for &n in ns {
            let best = max_log_prior(n, k, &weights, u64::MAX)?;
            let scale = n as f64 * (k as f64).ln();
            let mut row = PriorRatioRow { n, k, references: 0, worst_constant: f64::NEG_INFINITY, worst_reference: Vec::new() };
            for z_ref in enumerate_assignments(n, k, u64::MAX)? {
                if !z_ref.all_occupied() {
                    continue;
                }
                let c = (best - log_marginal_assignment_prior(&z_ref, &weights)?) / scale;
                row.references += 1;
                if c > row.worst_constant {
                    row.worst_constant = c;
                    row.worst_reference = z_ref.one_based();
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DistanceIdentityReport {
    pub instances: usize,
    /// `max |blocked − direct|` over instances with `z = z*`.
    pub max_block_error: f64,
    /// `max |ellipsoid + residual − ‖·‖²| / n²`.
    pub max_decomposition_error: f64,
    pub min_residual: f64,
}

pub fn distance_identities(instances: usize, max_n: usize, max_k: usize, seed: u64) -> Result<DistanceIdentityReport> {
    let mut rng = rng_from_seed(seed);
    let mut rep = DistanceIdentityReport { instances, min_residual: f64::INFINITY, ..Default::default() };
    for _ in 0..instances {
        let (z, q, z_star, q_star) = random_instance(&mut rng, max_n, max_k);
        let block = blocked_distance(&z, &q, &z, &q_star)?;
        let direct = direct_distance(&z, &q, &z, &q_star)?;
        rep.max_block_error = rep.max_block_error.max((block - direct).abs());

        let dec = decompose_distance(&z, &q, &z_star, &q_star)?;
        let sq = direct_sq_distance(&z, &q, &z_star, &q_star)?;
        let n2 = (z.n() * z.n()) as f64;
        rep.max_decomposition_error = rep.max_decomposition_error.max((dec.total() - sq).abs() / n2);
        rep.min_residual = rep.min_residual.min(dec.residual);
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContainmentAuditReport {
    pub configurations: usize,
    pub samples_inside_ball: usize,
    pub violations: usize,
}

/// Random `(z, z*, Q*, t)` configurations, each probed with uniform `Q`.
pub fn containment_audit(
    configurations: usize,
    trials_per_config: usize,
    max_n: usize,
    max_k: usize,
    seed: u64,
) -> Result<ContainmentAuditReport> {
    let parts = (0..configurations as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_from_seed(derive_seed(seed, &[c]));
            let (z, _, z_star, q_star) = random_instance(&mut rng, max_n, max_k);
            let t = rng.random_range(0.05..=1.0) * z.n() as f64;
            containment_check(&z, &z_star, &q_star, t, trials_per_config, derive_seed(seed, &[c, 1]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContainmentAuditReport {
        configurations,
        samples_inside_ball: parts.iter().map(|p| p.inside_ball).sum(),
        violations: parts.iter().map(|p| p.violations).sum(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeRow {
    pub d: usize,
    pub weights: Vec<f64>,
    pub analytic: f64,
    pub monte_carlo: f64,
    pub mc_stderr: f64,
    pub relative_error: f64,
}

pub fn volume_checks(samples: usize, seed: u64) -> Result<Vec<VolumeRow>> {
    let cases: Vec<(usize, Vec<f64>)> = vec![
        (1, vec![1.0]),
        (1, vec![4.0]),
        (2, vec![1.0; 4]),
        (2, vec![1.0, 2.0, 0.5, 3.0]),
    ];
    cases
        .into_iter()
        .enumerate()
        .map(|(i, (d, w))| {
            let analytic = ellipsoid_volume(&w, d)?;
            let (mc, se) = hit_or_miss_volume(&w, d, samples, derive_seed(seed, &[i as u64]))?;
            Ok(VolumeRow { d, relative_error: (mc - analytic).abs() / analytic, weights: w, analytic, monte_carlo: mc, mc_stderr: se })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PackingRow {
    pub n: usize,
    pub k: usize,
    pub shell: usize,
    pub inner: f64,
    pub outer: f64,
    pub size: usize,
    pub bound: f64,
}

/// Greedy nets for shells `l ∈ shells` and `k ∈ ks` around a random truth.
pub fn packing_table(n: usize, shells: &[usize], ks: &[usize], attempts: usize, seed: u64) -> Result<Vec<PackingRow>> {
    let mut rows = Vec::new();
    for &k in ks {
        let truth = sample_truth(&TruthSpec { n, k, delta: 0.1, seed: derive_seed(seed, &[k as u64]) })?;
        let n_eps = n as f64 * rate_schedule(n, k)?.eps();
        for &l in shells {
            let annulus = AnnulusSpec::shell(truth.theta.clone(), l, n_eps)?;
            // Nets live in the slice of a different labeling than the truth's.
            let mut rng = rng_from_seed(derive_seed(seed, &[k as u64, l as u64]));
            let z = ClusterAssignment::new((0..n).map(|_| rng.random_range(0..k)).collect(), k)?;
            let net = greedy_packing(&z, &annulus, attempts, derive_seed(seed, &[k as u64, l as u64, 1]))?;
            rows.push(PackingRow { n, k, shell: l, inner: annulus.inner, outer: annulus.outer, size: net.len(), bound: packing_bound(l, k) });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRow {
    pub n: usize,
    pub separation_sq: f64,
    pub bound: f64,
    pub rates: ErrorRates,
}

impl PowerRow {
    pub fn within_bound(&self) -> bool {
        self.rates.type1 <= self.bound + 3.0 * self.rates.type1_stderr
            && self.rates.type2 <= self.bound + 3.0 * self.rates.type2_stderr
    }
}

/// Constant `θ⁰ = 1/2` against constant `θ¹ = 1/2 + Δ` on `n = 10`, with
/// `‖θ¹ − θ⁰‖² ∈ {4, 9, 16}`.
pub fn power_table(trials: usize, seed: u64) -> Result<Vec<PowerRow>> {
    let n = 10;
    [0.2, 0.3, 0.4]
        .iter()
        .enumerate()
        .map(|(i, &gap)| {
            let t0 = EdgeProbabilityMatrix::constant(n, 0.5)?;
            let t1 = EdgeProbabilityMatrix::constant(n, 0.5 + gap)?;
            let sep = crate::model::squared_distance(&t1, &t0)?;
            let rates = estimate_test_errors(&t0, &t1, &t1, trials, derive_seed(seed, &[i as u64]))?;
            Ok(PowerRow { n, separation_sq: sep, bound: hoeffding_error_bound(sep), rates })
        })
        .collect()
}

/// Type-II errors at `count` random points of the ball `‖θ − θ¹‖ ≤ ‖θ¹ − θ⁰‖/2`.
pub fn type2_spot_checks(separation_index: usize, count: usize, trials: usize, seed: u64) -> Result<Vec<PowerRow>> {
    let n = 10;
    let gap = [0.2, 0.3, 0.4][separation_index];
    let t0 = EdgeProbabilityMatrix::constant(n, 0.5)?;
    let t1 = EdgeProbabilityMatrix::constant(n, 0.5 + gap)?;
    let sep = crate::model::squared_distance(&t1, &t0)?;
    let radius = sep.sqrt() / 2.0;
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|c| {
            let dir: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            let scale = radius * rng.random::<f64>() / norm;
            // Projection onto the unit cube only moves points closer to θ¹.
            let entries = t1
                .entries()
                .iter()
                .zip(&dir)
                .map(|(t, d)| (t + scale * d).clamp(0.0, 1.0))
                .collect();
            let alt = EdgeProbabilityMatrix::new(n, entries)?;
            let rates = estimate_test_errors(&t0, &t1, &alt, trials, derive_seed(seed, &[c as u64, 7]))?;
            Ok(PowerRow { n, separation_sq: sep, bound: hoeffding_error_bound(sep), rates })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub n: usize,
    pub k: usize,
    pub sweeps: usize,
    pub total_variation: f64,
    /// `max |Gibbs conditional − oracle conditional|` over every state and site.
    pub max_conditional_error: f64,
}

/// Runs a collapsed Gibbs chain on data from a random truth and compares its
/// visit frequencies with the enumerated posterior.
pub fn gibbs_vs_oracle(n: usize, k: usize, sweeps: usize, burnin: usize, seed: u64) -> Result<OracleComparison> {
    let truth = sample_truth(&TruthSpec { n, k, delta: 0.1, seed: derive_seed(seed, &[0]) })?;
    let a = sample_adjacency(&truth.theta, derive_seed(seed, &[1]));
    let alpha = DirichletWeights::symmetric(k, crate::priors::DEFAULT_ALPHA)?;
    let exact = exact_posterior_over_assignments(&a, k, &alpha, DEFAULT_POSTERIOR_BUDGET)?;

    let mut max_conditional_error = 0.0f64;
    for z in &exact.assignments {
        let mut g = GibbsSampler::from_assignment(&a, z.clone(), alpha.clone(), 0)?;
        for i in 0..n {
            let got = g.site_conditional(i);
            let want = exact.site_conditional(z, i);
            for (x, y) in got.iter().zip(&want) {
                max_conditional_error = max_conditional_error.max((x - y).abs());
            }
        }
    }

    let mut counts = vec![0u64; exact.assignments.len()];
    let mut sampler = GibbsSampler::new(&a, k, alpha, derive_seed(seed, &[2]))?;
    for _ in 0..burnin {
        sampler.sweep();
    }
    for _ in 0..sweeps {
        sampler.sweep();
        counts[assignment_index(&sampler.assignment()) as usize] += 1;
    }
    Ok(OracleComparison { n, k, sweeps, total_variation: exact.total_variation(&counts), max_conditional_error })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceSummary {
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub replicates: usize,
    pub satisfied: usize,
    pub mean_log_dn: f64,
    pub mean_log_bound: f64,
}

impl EvidenceSummary {
    pub fn frequency(&self) -> f64 {
        self.satisfied as f64 / self.replicates as f64
    }
}

/// Evidence lower-bound satisfaction over replicate datasets from random truths.
pub fn evidence_table(n: usize, k: usize, c: f64, replicates: usize, mc_samples: usize, seed: u64) -> Result<EvidenceSummary> {
    let alpha = DirichletWeights::symmetric(k, crate::priors::DEFAULT_ALPHA)?;
    let checks = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let truth = sample_truth(&TruthSpec { n, k, delta: 0.1, seed: derive_seed(seed, &[r, 0]) })?;
            let a = sample_adjacency(&truth.theta, derive_seed(seed, &[r, 1]));
            let opts = EvidenceOptions { mc_samples, seed: derive_seed(seed, &[r, 2]), ..Default::default() };
            evidence_lower_bound_check(&a, &truth.theta, k, &alpha, c, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = replicates as f64;
    Ok(EvidenceSummary {
        n,
        k,
        c,
        replicates,
        satisfied: checks.iter().filter(|c| c.satisfied).count(),
        mean_log_dn: checks.iter().map(|c| c.log_dn).sum::<f64>() / m,
        mean_log_bound: checks.iter().map(|c| c.log_bound).sum::<f64>() / m,
    })
}
