//! Process-wide call counters for the two expensive geometric primitives.
//!
//! Affine-invariant distances and geodesic evaluations dominate the cost of
//! every pipeline (each one is a pair of symmetric eigendecompositions).
//! The benchmark harness and the cost-contract tests read these counters to
//! verify how much metric work an algorithm actually performed, e.g. that the
//! embedding pipeline evaluates exactly `N * l` distances and never computes
//! an intrinsic mean inside its k-means loop.

use std::sync::atomic::{AtomicU64, Ordering};

static DIST_AFFINE: AtomicU64 = AtomicU64::new(0);
static GEODESIC: AtomicU64 = AtomicU64::new(0);

pub(crate) fn record_dist_affine() {
    DIST_AFFINE.fetch_add(1, Ordering::Relaxed);
}

pub(crate) fn record_geodesic() {
    GEODESIC.fetch_add(1, Ordering::Relaxed);
}

/// Total number of affine-invariant distance evaluations so far in this
/// process.
pub fn dist_affine_calls() -> u64 {
    DIST_AFFINE.load(Ordering::Relaxed)
}

/// Total number of geodesic evaluations so far in this process.
pub fn geodesic_calls() -> u64 {
    GEODESIC.load(Ordering::Relaxed)
}
