//! Linear tests of `H0: θ = θ⁰` against balls and annuli of alternatives.
//!
//! The point-vs-ball test rejects when
//! `Σ_ij (θ¹_ij − θ⁰_ij)(A_ij − θ⁰_ij) > ‖θ¹ − θ⁰‖² / 4`. Each summand has
//! range `|θ¹_ij − θ⁰_ij|`, so Hoeffding's inequality bounds both error
//! probabilities by `exp(−‖θ¹ − θ⁰‖² / 8)`; see [`hoeffding_error_bound`].

use rand::Rng;
use rayon::prelude::*;

use crate::error::{dim, invalid, Error, Result};
use crate::model::{squared_distance, AdjacencyMatrix, EdgeProbabilityMatrix};
use crate::rng::{derive_seed, rng_from_seed, shards};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestVerdict {
    pub reject: bool,
    pub statistic: f64,
    pub threshold: f64,
}

impl TestVerdict {
    fn new(statistic: f64, threshold: f64) -> Self {
        Self { reject: statistic > threshold, statistic, threshold }
    }

    /// `statistic − threshold`; positive exactly when the test rejects.
    pub fn margin(&self) -> f64 {
        self.statistic - self.threshold
    }
}

/// `exp(−‖Δ‖² / 8)`: the Hoeffding bound on either error of the point test.
pub fn hoeffding_error_bound(separation_sq: f64) -> f64 {
    (-separation_sq / 8.0).exp()
}

/// Precomputed direction `c = θ¹ − θ⁰` for repeated evaluation.
#[derive(Debug, Clone)]
struct LinearTest {
    direction: Vec<f64>,
    offset: f64,
    threshold: f64,
}

impl LinearTest {
    fn new(theta0: &EdgeProbabilityMatrix, theta1: &EdgeProbabilityMatrix) -> Result<Self> {
        let norm_sq = squared_distance(theta1, theta0)?;
        if norm_sq == 0.0 {
            return Err(Error::Precondition("alternative coincides with the null".into()));
        }
        let direction: Vec<f64> = theta1
            .entries()
            .iter()
            .zip(theta0.entries())
            .map(|(a, b)| a - b)
            .collect();
        // Σ c (A − θ⁰) = Σ c A − Σ c θ⁰
        let offset = direction.iter().zip(theta0.entries()).map(|(c, t)| c * t).sum();
        Ok(Self { direction, offset, threshold: norm_sq / 4.0 })
    }

    fn statistic(&self, a: &[u8]) -> f64 {
        let hit: f64 = self
            .direction
            .iter()
            .zip(a)
            .filter(|(_, &x)| x == 1)
            .map(|(c, _)| c)
            .sum();
        hit - self.offset
    }

    fn verdict(&self, a: &[u8]) -> TestVerdict {
        TestVerdict::new(self.statistic(a), self.threshold)
    }
}

pub fn point_vs_ball_test(
    a: &AdjacencyMatrix,
    theta0: &EdgeProbabilityMatrix,
    theta1: &EdgeProbabilityMatrix,
) -> Result<TestVerdict> {
    if a.n() != theta0.n() {
        return Err(dim("adjacency and θ⁰ differ in size"));
    }
    if theta1.n() != theta0.n() {
        return Err(dim("θ¹ and θ⁰ differ in size"));
    }
    let n = theta0.n();
    let mut statistic = 0.0;
    let mut norm_sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = theta1.get(i, j) - theta0.get(i, j);
            statistic += c * (f64::from(a.get(i, j)) - theta0.get(i, j));
            norm_sq += c * c;
        }
    }
    if norm_sq == 0.0 {
        return Err(Error::Precondition("alternative coincides with the null".into()));
    }
    Ok(TestVerdict::new(statistic, norm_sq / 4.0))
}

/// Maximum of point-vs-ball tests over a net; rejects if any member rejects.
///
/// The reported statistic is the largest margin `statistic − threshold`
/// (threshold 0). An empty net accepts with statistic `-inf`.
pub fn annulus_test(
    a: &AdjacencyMatrix,
    theta0: &EdgeProbabilityMatrix,
    net: &[EdgeProbabilityMatrix],
) -> Result<TestVerdict> {
    let mut best = f64::NEG_INFINITY;
    for point in net {
        best = best.max(point_vs_ball_test(a, theta0, point)?.margin());
    }
    Ok(TestVerdict::new(best, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub type1: f64,
    pub type2: f64,
    pub type1_stderr: f64,
    pub type2_stderr: f64,
    pub trials: usize,
}

impl ErrorRates {
    /// The larger of the two binomial standard errors.
    pub fn mc_stderr(&self) -> f64 {
        self.type1_stderr.max(self.type2_stderr)
    }
}

const TRIAL_SHARD: usize = 4096;

fn binomial_se(p: f64, m: usize) -> f64 {
    (p * (1.0 - p) / m as f64).sqrt()
}

fn draw_into<R: Rng + ?Sized>(theta: &EdgeProbabilityMatrix, buf: &mut [u8], rng: &mut R) {
    for (slot, &p) in buf.iter_mut().zip(theta.entries()) {
        *slot = u8::from(rng.random::<f64>() < p);
    }
}

/// Counts rejections of `tests` (any-of) over `trials` draws from `P_θ`.
fn count_rejections(
    tests: &[LinearTest],
    theta: &EdgeProbabilityMatrix,
    trials: usize,
    seed: u64,
) -> u64 {
    shards(trials, TRIAL_SHARD)
        .into_par_iter()
        .map(|(shard, len)| {
            let mut rng = rng_from_seed(derive_seed(seed, &[shard]));
            let mut buf = vec![0u8; theta.entries().len()];
            let mut rejections = 0u64;
            for _ in 0..len {
                draw_into(theta, &mut buf, &mut rng);
                if tests.iter().any(|t| t.verdict(&buf).reject) {
                    rejections += 1;
                }
            }
            rejections
        })
        .sum()
}

/// Monte-Carlo type-I error under `θ⁰` and type-II error under `θ_alt`.
///
/// `θ_alt` must lie in the ball `‖θ_alt − θ¹‖ ≤ ‖θ¹ − θ⁰‖ / 2`.
pub fn estimate_test_errors(
    theta0: &EdgeProbabilityMatrix,
    theta1: &EdgeProbabilityMatrix,
    theta_alt: &EdgeProbabilityMatrix,
    trials: usize,
    seed: u64,
) -> Result<ErrorRates> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let test = LinearTest::new(theta0, theta1)?;
    let sep = squared_distance(theta1, theta0)?;
    if squared_distance(theta_alt, theta1)? > sep / 4.0 * (1.0 + 1e-12) {
        return Err(Error::Precondition(
            "θ_alt lies outside the ball of radius ‖θ¹ − θ⁰‖/2 around θ¹".into(),
        ));
    }
    let tests = [test];
    let rej0 = count_rejections(&tests, theta0, trials, derive_seed(seed, &[0]));
    let rej_alt = count_rejections(&tests, theta_alt, trials, derive_seed(seed, &[1]));
    let type1 = rej0 as f64 / trials as f64;
    let type2 = 1.0 - rej_alt as f64 / trials as f64;
    Ok(ErrorRates {
        type1,
        type2,
        type1_stderr: binomial_se(type1, trials),
        type2_stderr: binomial_se(type2, trials),
        trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnionBoundAudit {
    /// Type-I frequency of the composite (max) test.
    pub composite: f64,
    pub composite_stderr: f64,
    /// Type-I frequency of each member test on independent draws.
    pub members: Vec<f64>,
    pub member_stderr: Vec<f64>,
}

impl UnionBoundAudit {
    pub fn member_sum(&self) -> f64 {
        self.members.iter().sum()
    }

    /// Composite type-I ≤ Σ member type-I + 3 standard errors.
    pub fn holds(&self) -> bool {
        let se = (self.composite_stderr.powi(2) + self.member_stderr.iter().map(|s| s * s).sum::<f64>()).sqrt();
        self.composite <= self.member_sum() + 3.0 * se
    }
}

/// Simulates the type-I error of [`annulus_test`] and of each of its members.
pub fn annulus_type1_audit(
    theta0: &EdgeProbabilityMatrix,
    net: &[EdgeProbabilityMatrix],
    trials: usize,
    seed: u64,
) -> Result<UnionBoundAudit> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let tests = net
        .iter()
        .map(|p| LinearTest::new(theta0, p))
        .collect::<Result<Vec<_>>>()?;
    let freq = |c: u64| c as f64 / trials as f64;
    let composite = freq(count_rejections(&tests, theta0, trials, derive_seed(seed, &[0])));
    let members: Vec<f64> = tests
        .iter()
        .enumerate()
        .map(|(h, t)| {
            freq(count_rejections(
                std::slice::from_ref(t),
                theta0,
                trials,
                derive_seed(seed, &[1, h as u64]),
            ))
        })
        .collect();
    Ok(UnionBoundAudit {
        composite,
        composite_stderr: binomial_se(composite, trials),
        member_stderr: members.iter().map(|&p| binomial_se(p, trials)).collect(),
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(n: usize, v: f64) -> EdgeProbabilityMatrix {
        EdgeProbabilityMatrix::constant(n, v).unwrap()
    }

    #[test]
    fn point_test_examples() {
        let one = AdjacencyMatrix::new(1, vec![1]).unwrap();
        let v = point_vs_ball_test(&one, &c(1, 0.5), &c(1, 0.9)).unwrap();
        assert!((v.statistic - 0.2).abs() < 1e-12);
        assert!((v.threshold - 0.04).abs() < 1e-12);
        assert!(v.reject);

        let zero = AdjacencyMatrix::zeros(1);
        let v = point_vs_ball_test(&zero, &c(1, 0.5), &c(1, 0.9)).unwrap();
        assert!((v.statistic + 0.2).abs() < 1e-12);
        assert!(!v.reject);

        let full = AdjacencyMatrix::new(2, vec![1; 4]).unwrap();
        let v = point_vs_ball_test(&full, &c(2, 0.5), &c(2, 0.9)).unwrap();
        assert!((v.statistic - 0.8).abs() < 1e-12);
        assert!((v.threshold - 0.16).abs() < 1e-12);
        assert!(v.reject);

        assert!(matches!(
            point_vs_ball_test(&full, &c(2, 0.5), &c(2, 0.5)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn linear_test_agrees_with_direct_form() {
        let t0 = EdgeProbabilityMatrix::new(2, vec![0.1, 0.5, 0.7, 0.3]).unwrap();
        let t1 = EdgeProbabilityMatrix::new(2, vec![0.4, 0.2, 0.9, 0.3]).unwrap();
        let lt = LinearTest::new(&t0, &t1).unwrap();
        for mask in 0..16u8 {
            let a: Vec<u8> = (0..4).map(|b| mask >> b & 1).collect();
            let adj = AdjacencyMatrix::new(2, a.clone()).unwrap();
            let direct = point_vs_ball_test(&adj, &t0, &t1).unwrap();
            let fast = lt.verdict(&a);
            assert!((direct.statistic - fast.statistic).abs() < 1e-12);
            assert_eq!(direct.reject, fast.reject);
        }
    }

    #[test]
    fn annulus_examples() {
        let a = AdjacencyMatrix::new(1, vec![1]).unwrap();
        let t0 = c(1, 0.5);
        let empty = annulus_test(&a, &t0, &[]).unwrap();
        assert!(!empty.reject);
        assert_eq!(empty.statistic, f64::NEG_INFINITY);

        let single = annulus_test(&a, &t0, &[c(1, 0.9)]).unwrap();
        let point = point_vs_ball_test(&a, &t0, &c(1, 0.9)).unwrap();
        assert_eq!(single.reject, point.reject);
        assert!((single.statistic - point.margin()).abs() < 1e-15);
    }

    #[test]
    fn error_rate_examples() {
        // ‖Δ‖² = 0.01: weak separation, both errors near one half.
        let t0 = c(1, 0.5);
        let t1 = c(1, 0.6);
        let r = estimate_test_errors(&t0, &t1, &t1, 20_000, 4).unwrap();
        assert!(r.type1 <= 1.0 && r.type2 <= 1.0);
        assert!((r.type1 - 0.5).abs() < 0.05 && (r.type2 - 0.4).abs() < 0.05, "{r:?}");

        let t0 = c(6, 0.5);
        let t1 = c(6, 0.8);
        let sep = 36.0 * 0.09;
        let r = estimate_test_errors(&t0, &t1, &t1, 20_000, 8).unwrap();
        let bound = hoeffding_error_bound(sep);
        assert!(r.type1 <= bound + 3.0 * r.mc_stderr());
        assert!(r.type2 <= bound + 3.0 * r.mc_stderr());
        assert_eq!(r, estimate_test_errors(&t0, &t1, &t1, 20_000, 8).unwrap());

        let far = c(6, 0.2);
        assert!(matches!(estimate_test_errors(&t0, &t1, &far, 10, 1), Err(Error::Precondition(_))));
    }
}
