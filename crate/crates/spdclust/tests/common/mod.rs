//! Shared helpers for the integration-test suites: seeded random points and
//! tangents of SPD(n).

#![allow(dead_code)] // not every suite uses every helper

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spdclust::rng::rng_from_seed;
use spdclust::spd::{SpdMatrix, SymTangent};

/// Symmetric matrix with i.i.d. standard normal entries, symmetrized.
pub fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    0.5 * (&g + g.transpose())
}

/// Random SPD matrix as the exponential of a scaled random symmetric matrix.
pub fn random_spd(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> SpdMatrix {
    let v = SymTangent::new(random_symmetric(n, rng) * scale).unwrap();
    v.exp().unwrap()
}

/// Random symmetric tangent with entries scaled by `scale`.
pub fn random_tangent(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> SymTangent {
    SymTangent::new(random_symmetric(n, rng) * scale).unwrap()
}

/// Random invertible (not necessarily symmetric) matrix; regenerates until
/// the determinant is safely away from zero.
pub fn random_invertible(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        if a.determinant().abs() > 1e-3 {
            return a;
        }
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    rng_from_seed(seed)
}
