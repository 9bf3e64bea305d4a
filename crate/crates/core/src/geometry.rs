//! Ellipsoid geometry of the slices `Θ_k(z) = {θ^{z,Q} : Q ∈ [0,1]^{k×k}}`.
//!
//! For a fixed `z`, the squared distance from `θ^{z,Q}` to any
//! `θ* = θ^{z*,Q*}` splits into a weighted quadratic form in `Q` centred at
//! the overlap-weighted average `Q̄*`, plus a nonnegative residual that does
//! not depend on `Q`:
//!
//! ```text
//! ‖θ^{z,Q} − θ*‖² = Σ_rs n_r n_s (Q_rs − Q̄*_rs)²  +  [Σ_ij (Q*_{z*_i z*_j})² − Σ_rs n_r n_s (Q̄*_rs)²]
//! ```
//!
//! Balls around `θ*` inside a slice therefore sit inside `k²`-dimensional
//! ellipsoids, which is what the volume and packing routines below measure.

use rand::Rng;

use crate::error::{dim, invalid, Error, Result};
use crate::model::{
    check_pair, direct_sq_distance, squared_distance, theta_from_assignment, ClusterAssignment,
    ConnectivityMatrix, EdgeProbabilityMatrix,
};
use crate::rng::rng_from_seed;
use crate::special::ln_gamma;

/// `{X : Σ W_ab (X_ab − c_ab)² ≤ 1}` over `d x d` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEllipsoid {
    d: usize,
    center: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedEllipsoid {
    pub fn new(d: usize, center: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if center.len() != d * d || weights.len() != d * d {
            return Err(dim(format!("ellipsoid over {d}x{d} matrices needs {} entries", d * d)));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("ellipsoid weights must be nonnegative"));
        }
        Ok(Self { d, center, weights })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .zip(&self.weights)
            .map(|((x, c), w)| w * (x - c) * (x - c))
            .sum()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.quadratic_form(x) <= 1.0
    }

    pub fn volume(&self) -> Result<f64> {
        ellipsoid_volume(&self.weights, self.d)
    }
}

/// `ln` of the volume of `{X ∈ R^{d×d} : Σ W (X − c)² ≤ 1}`.
pub fn ln_ellipsoid_volume(weights: &[f64], d: usize) -> Result<f64> {
    if weights.len() != d * d {
        return Err(dim(format!("{} weights for d = {d}", weights.len())));
    }
    if let Some(bad) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(invalid(format!("ellipsoid weight {bad} must be positive")));
    }
    let m = (d * d) as f64;
    let half_dim = m / 2.0;
    let ln_w: f64 = weights.iter().map(|w| w.ln()).sum();
    Ok(half_dim * std::f64::consts::PI.ln() - ln_gamma(half_dim + 1.0) - 0.5 * ln_w)
}

/// `π^{d²/2} / Γ(d²/2 + 1) · Π W^{-1/2}`: the volume of a `d²`-dimensional
/// axis-aligned ellipsoid with semi-axes `W^{-1/2}`.
pub fn ellipsoid_volume(weights: &[f64], d: usize) -> Result<f64> {
    Ok(ln_ellipsoid_volume(weights, d)?.exp())
}

/// Hit-or-miss volume estimate over the bounding box `Π [−W^{-1/2}, W^{-1/2}]`.
///
/// Independent of the gamma-function formula; returns `(estimate, std_error)`.
pub fn hit_or_miss_volume(weights: &[f64], d: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if weights.len() != d * d || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(invalid("hit-or-miss needs d*d positive weights"));
    }
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let half: Vec<f64> = weights.iter().map(|w| w.sqrt().recip()).collect();
    let box_volume: f64 = half.iter().map(|h| 2.0 * h).product();
    let mut rng = rng_from_seed(seed);
    let mut hits = 0u64;
    for _ in 0..samples {
        let q: f64 = half
            .iter()
            .zip(weights)
            .map(|(h, w)| {
                let x = rng.random_range(-h..=*h);
                w * x * x
            })
            .sum();
        if q <= 1.0 {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    Ok((box_volume * p, box_volume * se))
}

/// Joint contingency counts `n_{r,r'} = |z⁻¹(r) ∩ z*⁻¹(r')|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapCounts {
    k: usize,
    counts: Vec<usize>,
}

impl OverlapCounts {
    #[inline]
    pub fn get(&self, r: usize, r_star: usize) -> usize {
        self.counts[r * self.k + r_star]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.chunks(self.k).map(|row| row.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.k).map(|c| (0..self.k).map(|r| self.get(r, c)).sum()).collect()
    }
}

pub fn overlap_counts(z: &ClusterAssignment, z_star: &ClusterAssignment) -> Result<OverlapCounts> {
    if z.n() != z_star.n() || z.k() != z_star.k() {
        return Err(dim("assignments must share n and k"));
    }
    let k = z.k();
    let mut counts = vec![0; k * k];
    for (&r, &rs) in z.labels().iter().zip(z_star.labels()) {
        counts[r * k + rs] += 1;
    }
    Ok(OverlapCounts { k, counts })
}

/// Overlap-weighted average of `Q*` as seen from the clusters of `z`:
///
/// `Q̄*_rs = (1 / n_r n_s) Σ_{r',s'} n_{r,r'} n_{s,s'} Q*_{r's'}`.
///
/// Rows or columns of empty clusters of `z` are set to 0; their weight
/// `n_r n_s` is zero wherever `Q̄*` is used.
pub fn embed_center(
    q_star: &ConnectivityMatrix,
    z: &ClusterAssignment,
    z_star: &ClusterAssignment,
) -> Result<ConnectivityMatrix> {
    if q_star.k() != z.k() {
        return Err(dim("Q* and z disagree on k"));
    }
    let overlap = overlap_counts(z, z_star)?;
    let k = z.k();
    let sizes = z.sizes();
    let mut entries = vec![0.0; k * k];
    for r in 0..k {
        for s in 0..k {
            let weight = (sizes[r] * sizes[s]) as f64;
            if weight == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for rp in 0..k {
                let a = overlap.get(r, rp);
                if a == 0 {
                    continue;
                }
                for sp in 0..k {
                    acc += (a * overlap.get(s, sp)) as f64 * q_star.get(rp, sp);
                }
            }
            // Clamp rounding drift; the exact value is a convex combination.
            entries[r * k + s] = (acc / weight).clamp(0.0, 1.0);
        }
    }
    ConnectivityMatrix::new(k, entries)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceDecomposition {
    /// `Σ_rs n_r n_s (Q_rs − Q̄*_rs)²`.
    pub ellipsoid_term: f64,
    /// `Σ_ij (Q*_{z*_i z*_j})² − Σ_rs n_r n_s (Q̄*_rs)²`, nonnegative up to rounding.
    pub residual: f64,
}

impl DistanceDecomposition {
    pub fn total(&self) -> f64 {
        self.ellipsoid_term + self.residual
    }
}

pub fn decompose_distance(
    z: &ClusterAssignment,
    q: &ConnectivityMatrix,
    z_star: &ClusterAssignment,
    q_star: &ConnectivityMatrix,
) -> Result<DistanceDecomposition> {
    check_pair(z, q, z_star, q_star)?;
    let center = embed_center(q_star, z, z_star)?;
    let k = z.k();
    let sizes = z.sizes();
    let sizes_star = z_star.sizes();
    let mut ellipsoid_term = 0.0;
    let mut center_energy = 0.0;
    let mut star_energy = 0.0;
    for r in 0..k {
        for s in 0..k {
            let w = (sizes[r] * sizes[s]) as f64;
            let c = center.get(r, s);
            let d = q.get(r, s) - c;
            ellipsoid_term += w * d * d;
            center_energy += w * c * c;
            let w_star = (sizes_star[r] * sizes_star[s]) as f64;
            star_energy += w_star * q_star.get(r, s) * q_star.get(r, s);
        }
    }
    Ok(DistanceDecomposition { ellipsoid_term, residual: star_energy - center_energy })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContainmentReport {
    pub trials: usize,
    /// Samples with `‖θ^{z,Q} − θ*‖ < t`.
    pub inside_ball: usize,
    /// Samples whose `Q` lies in the ellipsoid around `Q̄*`.
    pub inside_ellipsoid: usize,
    /// Ball members outside the ellipsoid (must be zero).
    pub violations: usize,
    /// Ellipsoid members outside the ball.
    pub ellipsoid_only: usize,
}

/// Randomized audit of `B(z) ⊆ B̃(z)`: draws uniform `Q` and checks that every
/// sample inside the Frobenius ball (computed by the direct double sum) also
/// satisfies `Σ n_r n_s (Q_rs − Q̄*_rs)² < t²`.
pub fn containment_check(
    z: &ClusterAssignment,
    z_star: &ClusterAssignment,
    q_star: &ConnectivityMatrix,
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<ContainmentReport> {
    if !(t > 0.0) {
        return Err(invalid(format!("radius t = {t} must be positive")));
    }
    let center = embed_center(q_star, z, z_star)?;
    let k = z.k();
    let sizes = z.sizes();
    let mut weights = vec![0.0; k * k];
    for r in 0..k {
        for s in 0..k {
            weights[r * k + s] = (sizes[r] * sizes[s]) as f64;
        }
    }
    let t2 = t * t;
    let mut rng = rng_from_seed(seed);
    let mut report = ContainmentReport { trials, ..Default::default() };
    for _ in 0..trials {
        let q = ConnectivityMatrix::uniform(k, 0.0, 1.0, &mut rng);
        let in_ball = direct_sq_distance(z, &q, z_star, q_star)? < t2;
        let form: f64 = q
            .entries()
            .iter()
            .zip(center.entries())
            .zip(&weights)
            .map(|((x, c), w)| w * (x - c) * (x - c))
            .sum();
        let in_ellipsoid = form < t2;
        report.inside_ball += usize::from(in_ball);
        report.inside_ellipsoid += usize::from(in_ellipsoid);
        if in_ball && !in_ellipsoid {
            report.violations += 1;
        }
        if in_ellipsoid && !in_ball {
            report.ellipsoid_only += 1;
        }
    }
    Ok(report)
}

/// The shell `{θ : inner ≤ ‖θ − center‖ < outer}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusSpec {
    pub center: EdgeProbabilityMatrix,
    pub inner: f64,
    pub outer: f64,
    pub shell: usize,
}

impl AnnulusSpec {
    pub fn new(center: EdgeProbabilityMatrix, inner: f64, outer: f64, shell: usize) -> Result<Self> {
        if !(inner > 0.0 && inner < outer) {
            return Err(invalid(format!("annulus radii must satisfy 0 < {inner} < {outer}")));
        }
        if shell == 0 {
            return Err(invalid("shell index starts at 1"));
        }
        Ok(Self { center, inner, outer, shell })
    }

    /// Shell `l` at scale `n ε_n`: radii `l n ε_n` and `(l + 1) n ε_n`.
    pub fn shell(center: EdgeProbabilityMatrix, shell: usize, n_eps: f64) -> Result<Self> {
        let l = shell as f64;
        Self::new(center, l * n_eps, (l + 1.0) * n_eps, shell)
    }

    pub fn contains(&self, theta: &EdgeProbabilityMatrix) -> Result<bool> {
        let d = squared_distance(theta, &self.center)?.sqrt();
        Ok(d >= self.inner && d < self.outer)
    }
}

/// `((5l/4 + 1) / (l/2))^{k²}`: the volume bound on a separated set in shell `l`.
pub fn packing_bound(shell: usize, k: usize) -> f64 {
    let l = shell as f64;
    ((1.25 * l + 1.0) / (0.5 * l)).powi((k * k) as i32)
}

/// Greedily grows an `inner/2`-separated set of points `θ^{z,Q}` in the
/// annulus from `attempts` uniform proposals of `Q`.
///
/// Returns the accepted `Q` matrices; an empty list means no proposal landed
/// in the annulus.
pub fn greedy_packing(
    z: &ClusterAssignment,
    annulus: &AnnulusSpec,
    attempts: usize,
    seed: u64,
) -> Result<Vec<ConnectivityMatrix>> {
    if z.n() != annulus.center.n() {
        return Err(dim("assignment and annulus center differ in n"));
    }
    let k = z.k();
    let sizes = z.sizes();
    let separation2 = (annulus.inner / 2.0).powi(2);
    let mut rng = rng_from_seed(seed);
    let mut accepted: Vec<ConnectivityMatrix> = Vec::new();
    for _ in 0..attempts {
        let q = ConnectivityMatrix::uniform(k, 0.0, 1.0, &mut rng);
        let theta = theta_from_assignment(z, &q)?;
        if !annulus.contains(&theta)? {
            continue;
        }
        // Points share z, so the O(k²) block form gives their distance.
        let separated = accepted.iter().all(|p| {
            let mut d2 = 0.0;
            for r in 0..k {
                for s in 0..k {
                    let d = q.get(r, s) - p.get(r, s);
                    d2 += (sizes[r] * sizes[s]) as f64 * d * d;
                }
            }
            d2 >= separation2
        });
        if separated {
            accepted.push(q);
        }
    }
    Ok(accepted)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectangleCheck {
    /// Every corner satisfies the `n² ε² / 4` bound.
    pub contained: bool,
    /// Largest `Σ n_r n_s (Q_rs − Q⁰_rs)²` over the corners.
    pub max_corner_value: f64,
    /// `n² ε² / 4`.
    pub bound: f64,
}

/// Largest `k` whose `2^{k²}` rectangle corners are enumerated.
pub const MAX_RECTANGLE_K: usize = 4;

/// Checks that the cube `Π [Q⁰ − ε/2, Q⁰ + ε/2]` sits inside the ellipsoid
/// `Σ n_r n_s (Q_rs − Q⁰_rs)² ≤ n² ε² / 4` by visiting all of its corners.
pub fn rectangle_in_ellipsoid_check(
    q0: &ConnectivityMatrix,
    sizes: &[usize],
    eps: f64,
) -> Result<RectangleCheck> {
    let k = q0.k();
    if sizes.len() != k {
        return Err(dim("cluster sizes must have length k"));
    }
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    if k > MAX_RECTANGLE_K {
        return Err(invalid(format!("corner enumeration limited to k <= {MAX_RECTANGLE_K}")));
    }
    let half = eps / 2.0;
    if let Some(bad) = q0.entries().iter().find(|&&q| !(q > half && q < 1.0 - half)) {
        return Err(Error::Precondition(format!(
            "entry {bad} leaves the rectangle outside [0, 1] (half-width {half})"
        )));
    }
    let n: usize = sizes.iter().sum();
    let bound = (n * n) as f64 * eps * eps / 4.0;
    let dims = k * k;
    let mut max_corner_value = 0.0f64;
    let mut contained = true;
    for mask in 0u64..(1u64 << dims) {
        let mut value = 0.0;
        for b in 0..dims {
            let sign = if mask >> b & 1 == 1 { 1.0 } else { -1.0 };
            let corner = q0.entries()[b] + sign * half;
            let d = corner - q0.entries()[b];
            value += (sizes[b / k] * sizes[b % k]) as f64 * d * d;
        }
        max_corner_value = max_corner_value.max(value);
        if value > bound * (1.0 + 1e-12) {
            contained = false;
        }
    }
    Ok(RectangleCheck { contained, max_corner_value, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::direct_distance;
    use proptest::prelude::*;

    fn z(labels: &[usize], k: usize) -> ClusterAssignment {
        ClusterAssignment::from_one_based(labels, k).unwrap()
    }

    fn q(rows: &[&[f64]]) -> ConnectivityMatrix {
        ConnectivityMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn volume_examples() {
        assert!((ellipsoid_volume(&[1.0], 1).unwrap() - 2.0).abs() < 1e-14);
        assert!((ellipsoid_volume(&[4.0], 1).unwrap() - 1.0).abs() < 1e-14);
        let v = ellipsoid_volume(&[1.0; 4], 2).unwrap();
        assert!((v - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-12);
        assert!(ellipsoid_volume(&[1.0, 0.0, 1.0, 1.0], 2).is_err());
        assert!(ellipsoid_volume(&[1.0; 3], 2).is_err());
    }

    #[test]
    fn volume_decreases_in_each_weight() {
        let base = [1.0, 2.0, 0.5, 3.0];
        let v0 = ellipsoid_volume(&base, 2).unwrap();
        for i in 0..4 {
            let mut w = base;
            w[i] *= 1.01;
            assert!(ellipsoid_volume(&w, 2).unwrap() < v0);
        }
    }

    #[test]
    fn overlap_examples() {
        let a = z(&[1, 2, 2], 2);
        let o = overlap_counts(&a, &a).unwrap();
        assert_eq!(o.counts(), &[1, 0, 0, 2]);
        let o = overlap_counts(&a, &z(&[1, 1, 2], 2)).unwrap();
        assert_eq!(o.counts(), &[1, 0, 1, 1]);
        assert_eq!(o.row_sums(), a.sizes());
        assert_eq!(o.column_sums(), vec![2, 1]);
    }

    #[test]
    fn embed_center_examples() {
        let qs = q(&[&[0.1, 0.2], &[0.3, 0.4]]);
        let same = z(&[1, 2, 2, 1], 2);
        assert_eq!(embed_center(&qs, &same, &same).unwrap(), qs);

        let e = embed_center(&qs, &z(&[1, 2], 2), &z(&[2, 1], 2)).unwrap();
        assert_eq!(e, q(&[&[0.4, 0.3], &[0.2, 0.1]]));

        let qs = q(&[&[0.0, 0.4], &[0.8, 0.2]]);
        let e = embed_center(&qs, &z(&[1, 1], 2), &z(&[1, 2], 2)).unwrap();
        assert!((e.get(0, 0) - 0.35).abs() < 1e-15);
        // Cluster 2 of z is empty.
        assert_eq!(e.get(1, 1), 0.0);
    }

    #[test]
    fn decomposition_examples() {
        let zz = z(&[1, 2, 2, 1, 3], 3);
        let qs = q(&[&[0.1, 0.9, 0.3], &[0.4, 0.5, 0.6], &[0.7, 0.2, 0.8]]);
        let qq = q(&[&[0.2, 0.1, 0.3], &[0.9, 0.5, 0.1], &[0.3, 0.3, 0.3]]);
        let dec = decompose_distance(&zz, &qq, &zz, &qs).unwrap();
        assert!(dec.residual.abs() < 1e-12);
        let block = blocked_sq(&zz, &qq, &qs);
        assert!((dec.ellipsoid_term - block).abs() < 1e-12);

        // A relabeling of z* also has zero residual.
        let perm = zz.relabeled(&[2, 0, 1]).unwrap();
        let dec = decompose_distance(&zz, &qq, &perm, &qs).unwrap();
        assert!(dec.residual.abs() < 1e-12, "residual = {}", dec.residual);
    }

    fn blocked_sq(zz: &ClusterAssignment, a: &ConnectivityMatrix, b: &ConnectivityMatrix) -> f64 {
        crate::model::blocked_distance(zz, a, zz, b).unwrap().powi(2)
    }

    #[test]
    fn containment_examples() {
        let zz = z(&[1, 2, 1, 2, 2], 2);
        let qs = q(&[&[0.2, 0.7], &[0.5, 0.1]]);
        let rep = containment_check(&zz, &zz, &qs, 1.0, 2000, 3).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.ellipsoid_only, 0);
        assert!(rep.inside_ball > 0);

        let other = z(&[1, 1, 2, 2, 1], 2);
        let rep = containment_check(&zz, &other, &qs, 6.0, 500, 3).unwrap();
        assert_eq!(rep.inside_ball, 500);
        assert_eq!(rep.violations, 0);
        assert!(containment_check(&zz, &zz, &qs, 0.0, 1, 1).is_err());
    }

    #[test]
    fn packing_examples() {
        let n = 10;
        let zz = ClusterAssignment::new(vec![0; n], 1).unwrap();
        let theta0 = EdgeProbabilityMatrix::constant(n, 0.5).unwrap();
        let n_eps = n as f64 * (10f64.ln() / 100.0).sqrt();
        let ann = AnnulusSpec::shell(theta0, 1, n_eps).unwrap();
        assert!(greedy_packing(&zz, &ann, 0, 1).unwrap().is_empty());
        let pts = greedy_packing(&zz, &ann, 5000, 1).unwrap();
        assert!(!pts.is_empty());
        assert!(pts.len() as f64 <= packing_bound(1, 1));
        assert!((packing_bound(1, 1) - 4.5).abs() < 1e-12);
        for (i, a) in pts.iter().enumerate() {
            let ta = theta_from_assignment(&zz, a).unwrap();
            assert!(ann.contains(&ta).unwrap());
            for b in &pts[i + 1..] {
                let tb = theta_from_assignment(&zz, b).unwrap();
                assert!(ta.distance(&tb).unwrap() >= ann.inner / 2.0);
            }
        }
        assert!(packing_bound(4, 3) <= 9f64.powi(9));
    }

    #[test]
    fn rectangle_examples() {
        let q0 = q(&[&[0.5, 0.3], &[0.6, 0.4]]);
        let chk = rectangle_in_ellipsoid_check(&q0, &[3, 5], 0.1).unwrap();
        assert!(chk.contained);
        assert!((chk.max_corner_value - 64.0 * 0.01 / 4.0).abs() < 1e-12);
        assert!((chk.max_corner_value - chk.bound).abs() < 1e-12);
        let edge = q(&[&[0.05, 0.3], &[0.6, 0.4]]);
        assert!(matches!(
            rectangle_in_ellipsoid_check(&edge, &[3, 5], 0.1),
            Err(Error::Precondition(_))
        ));
    }

    fn instance(max_n: usize, max_k: usize) -> impl Strategy<Value = (ClusterAssignment, ConnectivityMatrix, ClusterAssignment, ConnectivityMatrix)> {
        (1..=max_k, 1..=max_n).prop_flat_map(|(k, n)| {
            (
                proptest::collection::vec(0..k, n),
                proptest::collection::vec(0.0..=1.0f64, k * k),
                proptest::collection::vec(0..k, n),
                proptest::collection::vec(0.0..=1.0f64, k * k),
            )
                .prop_map(move |(a, qa, b, qb)| {
                    (
                        ClusterAssignment::new(a, k).unwrap(),
                        ConnectivityMatrix::new(k, qa).unwrap(),
                        ClusterAssignment::new(b, k).unwrap(),
                        ConnectivityMatrix::new(k, qb).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn decomposition_identity((zz, qq, zs, qs) in instance(12, 4)) {
            let dec = decompose_distance(&zz, &qq, &zs, &qs).unwrap();
            let direct = direct_distance(&zz, &qq, &zs, &qs).unwrap().powi(2);
            let n2 = (zz.n() * zz.n()) as f64;
            prop_assert!((dec.total() - direct).abs() <= 1e-10 * n2);
            prop_assert!(dec.residual >= -1e-12);
            prop_assert!(dec.ellipsoid_term <= direct + 1e-10 * n2);
        }

        #[test]
        fn embedded_center_stays_in_unit_cube((zz, _qq, zs, qs) in instance(10, 4)) {
            let c = embed_center(&qs, &zz, &zs).unwrap();
            prop_assert!(c.entries().iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}
