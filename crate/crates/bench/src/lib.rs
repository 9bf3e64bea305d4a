//! Shared fixtures for the criterion benches.

use sbm_core::model::{sample_adjacency, sample_truth, TruthSpec};
use sbm_core::{AdjacencyMatrix, Truth};

/// A seeded truth and one adjacency draw from it.
pub fn fixture(n: usize, k: usize, seed: u64) -> (Truth, AdjacencyMatrix) {
    let truth = sample_truth(&TruthSpec { n, k, delta: 0.1, seed }).expect("n >= k");
    let a = sample_adjacency(&truth.theta, seed.wrapping_add(1));
    (truth, a)
}
