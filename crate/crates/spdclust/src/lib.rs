//! Clustering of symmetric positive-definite (SPD) matrix datasets.
//!
//! SPD matrices carry a natural affine-invariant Riemannian geometry whose
//! intrinsic k-means is accurate but expensive: every iteration recomputes
//! Fréchet (Karcher) means. This crate implements a fast alternative that
//! embeds a dataset into Euclidean space through its distances to a small
//! list of reference points, clusters the images with ordinary k-means, and
//! pulls the labels back — together with the intrinsic baselines needed to
//! judge it:
//!
//! - [`spd`] — the manifold: spectral matrix functions, affine-invariant
//!   distance, geodesics, exp/log maps, log-Euclidean distance, projection
//!   onto fixed-determinant submanifolds.
//! - [`embed`] — distance-map embeddings `x -> (d(r_1,x)^p, ..., d(r_l,x)^p)`
//!   for p in {1,2}, their Riemannian Jacobian, local-rank and distortion
//!   diagnostics.
//! - [`euclid`] — the same maps on flat Euclidean space, where exact
//!   statements (multilateration inversion, image convexity, separability of
//!   embedded balls) are checkable and serve as a laboratory for the SPD case.
//! - [`mean`] — Fréchet mean solvers: Riemannian gradient descent and the
//!   cheap inductive (streaming geodesic) approximation.
//! - [`cluster`] — Lloyd k-means on embedded vectors plus the four SPD
//!   pipelines: intrinsic, approximate-centroid, log-Euclidean and
//!   embedding-based clustering.
//! - [`refpoints`] — reference-point selection: random from the dataset, or
//!   principled placement along geodesics between pre-estimated cluster
//!   means.
//! - [`synth`] — synthetic dataset generators: geodesic balls with controlled
//!   separation, and the mirrored configuration that defeats log-Euclidean
//!   clustering.
//! - [`eval`] — scoring: optimal label alignment (Hungarian), accuracy and
//!   total dispersion.
//! - [`io`] — dataset (de)serialization, correlation-matrix completion, and
//!   the benchmark harness driving repeatable experiments.
//!
//! Determinism: every randomized routine takes an explicit seed and derives
//! sub-streams with a splittable mixer, so a fixed seed reproduces every
//! numeric output bitwise, independently of how work is scheduled.

pub mod cluster;
pub mod counters;
pub mod embed;
pub mod error;
pub mod euclid;
pub mod eval;
pub mod io;
pub mod mean;
pub mod refpoints;
pub mod synth;
pub mod rng;
pub mod spd;

pub use error::{Error, Result};
