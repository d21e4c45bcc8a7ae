//! The four k-means pipelines over SPD datasets.
//!
//! A single Lloyd engine (assignment / empty-cluster repair / centroid
//! update, k-means++ initialization, restarts) is instantiated over three
//! "spaces":
//!
//! - flat vectors with arithmetic means — [`lloyd_euclid`], and the backend
//!   of [`cluster_lec`] (log coordinates at a base point) and
//!   [`cluster_fmc`] (distance-map image coordinates);
//! - SPD with affine-invariant distances and gradient-descent Fréchet means —
//!   [`cluster_irc`];
//! - SPD with affine-invariant distances and iterative-centroid means —
//!   [`cluster_arc`].
//!
//! Reported `totdisp` is the total dispersion: the sum over clusters of the
//! mean squared distance to the centroid, in the metric the pipeline
//! clusters with (FMC re-measures in the affine metric so the four pipelines
//! are directly comparable; see [`cluster_fmc`]).

use nalgebra::DVector;

use crate::embed::{embed_dataset, FrechetMapSpec, SymBasis};
use crate::error::{Error, Result};
use crate::mean::{
    cluster_dispersion, frechet_mean_gd, frechet_mean_icm, shuffled_order, DispersionMetric,
    MeanInit, MeanSolverConfig,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::spd::{dist_affine, Chart, SpdMatrix};
use rand::Rng;

/// How initial centroids are chosen.
#[derive(Clone, Debug)]
pub enum KMeansInit {
    /// D²-weighted sampling (k-means++), reseeded per restart from the
    /// master seed.
    KMeansPP,
    /// Start from these data points (indices into the dataset, distinct).
    /// Deterministic, so only a single restart is run.
    ProvidedIndices(Vec<usize>),
}

/// Shared k-means controls. Defaults: 10 restarts, 100 Lloyd iterations,
/// k-means++ initialization.
#[derive(Clone, Debug)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub init: KMeansInit,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            restarts: 10,
            max_iter: 100,
            seed,
            init: KMeansInit::KMeansPP,
        }
    }

    fn validate(&self, n_points: usize) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidArgument(
                "at least one restart is required".into(),
            ));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument(
                "at least one iteration is required".into(),
            ));
        }
        if n_points < self.k {
            return Err(Error::TooFewPoints {
                needed: self.k,
                got: n_points,
            });
        }
        if let KMeansInit::ProvidedIndices(indices) = &self.init {
            if indices.len() != self.k {
                return Err(Error::InvalidArgument(format!(
                    "{} initial centroids provided for k = {}",
                    indices.len(),
                    self.k
                )));
            }
            let mut seen = vec![false; n_points];
            for &i in indices {
                if i >= n_points || seen[i] {
                    return Err(Error::InvalidArgument(
                        "initial centroid indices must be distinct and in range".into(),
                    ));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }
}

/// Centroids in the representation native to the pipeline that produced
/// them.
#[derive(Clone, Debug)]
pub enum Centroids {
    /// Flat vectors ([`lloyd_euclid`]).
    Euclidean(Vec<DVector<f64>>),
    /// SPD matrices ([`cluster_irc`], [`cluster_arc`], [`cluster_fmc`]).
    Spd(Vec<SpdMatrix>),
    /// Log-domain coordinates together with their exponentials
    /// ([`cluster_lec`]).
    LogEuclidean {
        coords: Vec<DVector<f64>>,
        matrices: Vec<SpdMatrix>,
    },
}

impl Centroids {
    pub fn len(&self) -> usize {
        match self {
            Centroids::Euclidean(v) => v.len(),
            Centroids::Spd(v) => v.len(),
            Centroids::LogEuclidean { coords, .. } => coords.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The SPD centroids, when the pipeline produces them.
    pub fn as_spd(&self) -> Option<&[SpdMatrix]> {
        match self {
            Centroids::Euclidean(_) => None,
            Centroids::Spd(v) => Some(v),
            Centroids::LogEuclidean { matrices, .. } => Some(matrices),
        }
    }
}

/// Provenance notes carried alongside a partition so results files can state
/// how the numbers were produced.
#[derive(Clone, Debug)]
pub struct PartitionMeta {
    /// Pipeline identifier: "lloyd", "irc", "arc", "lec", or "fmc".
    pub pipeline: &'static str,
    /// How `totdisp` was measured, e.g. "euclidean", "affine/gd-centroids".
    pub dispersion: &'static str,
    pub seed: u64,
    pub restarts: usize,
}

/// A clustering of N points into k clusters.
#[derive(Clone, Debug)]
pub struct Partition {
    /// Cluster index in `[0, k)` for each data point, in input order.
    pub labels: Vec<usize>,
    pub k: usize,
    pub centroids: Centroids,
    /// Total dispersion: sum over clusters of mean squared distance to the
    /// centroid.
    pub totdisp: f64,
    /// Lloyd iterations of the winning restart.
    pub iterations: usize,
    /// Whether assignments became stable before the iteration cap.
    pub converged: bool,
    pub meta: PartitionMeta,
}

/// Per-restart diagnostics from [`lloyd_euclid_traced`].
#[derive(Clone, Debug)]
pub struct RestartTrace {
    /// Sum of squared distances after each centroid update.
    pub sse_history: Vec<f64>,
    pub totdisp: f64,
    pub converged: bool,
}

// ---------------------------------------------------------------------------
// Generic Lloyd engine
// ---------------------------------------------------------------------------

/// A point space the Lloyd engine can run over: a distance and a centroid
/// rule. `mean` receives the incumbent centroid so iterative solvers can
/// warm-start.
trait LloydSpace {
    type Point: Clone;
    fn dist(&mut self, a: &Self::Point, b: &Self::Point) -> Result<f64>;
    fn mean(&mut self, members: &[Self::Point], incumbent: &Self::Point) -> Result<Self::Point>;
}

struct LloydOutcome<P> {
    labels: Vec<usize>,
    centroids: Vec<P>,
    totdisp: f64,
    iterations: usize,
    converged: bool,
    sse_history: Vec<f64>,
}

/// Nearest-centroid assignment; ties go to the lowest cluster index.
/// Returns labels and each point's distance to its assigned centroid.
fn assign<S: LloydSpace>(
    space: &mut S,
    points: &[S::Point],
    centroids: &[S::Point],
) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut labels = Vec::with_capacity(points.len());
    let mut dists = Vec::with_capacity(points.len());
    for x in points {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (j, c) in centroids.iter().enumerate() {
            let d = space.dist(x, c)?;
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        labels.push(best);
        dists.push(best_d);
    }
    Ok((labels, dists))
}

/// Reassigns, for each empty cluster in index order, the not-yet-seized
/// point farthest from its assigned centroid (only from clusters that can
/// spare a member). With N >= k a donor cluster always exists.
fn repair_empty(labels: &mut [usize], dists: &[f64], k: usize) {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let mut seized = vec![false; labels.len()];
    for e in 0..k {
        if sizes[e] > 0 {
            continue;
        }
        let mut best: Option<usize> = None;
        for (i, &l) in labels.iter().enumerate() {
            if seized[i] || sizes[l] < 2 {
                continue;
            }
            if best.map(|b| dists[i] > dists[b]).unwrap_or(true) {
                best = Some(i);
            }
        }
        let i = best.expect("a donor cluster exists whenever N >= k");
        sizes[labels[i]] -= 1;
        labels[i] = e;
        sizes[e] = 1;
        seized[i] = true;
    }
}

fn members_of<P: Clone>(points: &[P], labels: &[usize], cluster: usize) -> Vec<P> {
    points
        .iter()
        .zip(labels.iter())
        .filter(|(_, &l)| l == cluster)
        .map(|(p, _)| p.clone())
        .collect()
}

/// Total dispersion (sum over clusters of mean squared distance) and raw
/// sum of squared distances, under the space's metric.
fn dispersion<S: LloydSpace>(
    space: &mut S,
    points: &[S::Point],
    labels: &[usize],
    centroids: &[S::Point],
) -> Result<(f64, f64)> {
    let k = centroids.len();
    let mut sq_sums = vec![0.0_f64; k];
    let mut sizes = vec![0usize; k];
    for (x, &l) in points.iter().zip(labels.iter()) {
        let d = space.dist(x, &centroids[l])?;
        sq_sums[l] += d * d;
        sizes[l] += 1;
    }
    let mut totdisp = 0.0;
    let mut sse = 0.0;
    for (sq, &size) in sq_sums.iter().zip(sizes.iter()) {
        sse += sq;
        if size > 0 {
            totdisp += sq / size as f64;
        }
    }
    Ok((totdisp, sse))
}

/// D²-weighted initialization: first centroid uniform, each further one
/// sampled proportionally to squared distance from the chosen set.
fn kmeanspp<S: LloydSpace>(
    space: &mut S,
    points: &[S::Point],
    k: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<S::Point>> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut centroids = vec![points[first].clone()];
    let mut min_d2 = Vec::with_capacity(n);
    for x in points {
        let d = space.dist(x, &centroids[0])?;
        min_d2.push(d * d);
    }
    while centroids.len() < k {
        let total: f64 = min_d2.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in min_d2.iter().enumerate() {
                acc += w;
                if target < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with chosen centroids; any pick works and
            // empty-cluster repair sorts out duplicates.
            rng.random_range(0..n)
        };
        let c = points[idx].clone();
        for (x, slot) in points.iter().zip(min_d2.iter_mut()) {
            let d = space.dist(x, &c)?;
            *slot = slot.min(d * d);
        }
        centroids.push(c);
    }
    Ok(centroids)
}

/// One Lloyd run from the given initial centroids.
fn lloyd_single<S: LloydSpace>(
    space: &mut S,
    points: &[S::Point],
    mut centroids: Vec<S::Point>,
    max_iter: usize,
) -> Result<LloydOutcome<S::Point>> {
    let k = centroids.len();
    let mut labels: Vec<usize> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut sse_history = Vec::new();

    for _ in 1..=max_iter {
        iterations += 1;
        let (mut new_labels, dists) = assign(space, points, &centroids)?;
        repair_empty(&mut new_labels, &dists, k);
        if !labels.is_empty() && new_labels == labels {
            converged = true;
            break;
        }
        labels = new_labels;
        for j in 0..k {
            let members = members_of(points, &labels, j);
            centroids[j] = space.mean(&members, &centroids[j])?;
        }
        let (_, sse) = dispersion(space, points, &labels, &centroids)?;
        sse_history.push(sse);
    }

    if !converged {
        // Make labels consistent with the final centroids so the returned
        // assignment is nearest-centroid (up to any repair moves).
        let (mut final_labels, dists) = assign(space, points, &centroids)?;
        repair_empty(&mut final_labels, &dists, k);
        labels = final_labels;
    }
    let (totdisp, _) = dispersion(space, points, &labels, &centroids)?;
    Ok(LloydOutcome {
        labels,
        centroids,
        totdisp,
        iterations,
        converged,
        sse_history,
    })
}

/// Best-of-restarts driver shared by every pipeline.
fn lloyd_restarts<S: LloydSpace>(
    space: &mut S,
    points: &[S::Point],
    cfg: &KMeansConfig,
) -> Result<(LloydOutcome<S::Point>, Vec<RestartTrace>)> {
    cfg.validate(points.len())?;
    let restarts = match &cfg.init {
        KMeansInit::KMeansPP => cfg.restarts,
        KMeansInit::ProvidedIndices(_) => 1,
    };
    let mut best: Option<LloydOutcome<S::Point>> = None;
    let mut traces = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let initial = match &cfg.init {
            KMeansInit::KMeansPP => {
                let mut rng = rng_from_seed(derive_seed(cfg.seed, r as u64));
                kmeanspp(space, points, cfg.k, &mut rng)?
            }
            KMeansInit::ProvidedIndices(indices) => {
                indices.iter().map(|&i| points[i].clone()).collect()
            }
        };
        let outcome = lloyd_single(space, points, initial, cfg.max_iter)?;
        traces.push(RestartTrace {
            sse_history: outcome.sse_history.clone(),
            totdisp: outcome.totdisp,
            converged: outcome.converged,
        });
        if best
            .as_ref()
            .map(|b| outcome.totdisp < b.totdisp)
            .unwrap_or(true)
        {
            best = Some(outcome);
        }
    }
    Ok((best.expect("restarts >= 1"), traces))
}

// ---------------------------------------------------------------------------
// Spaces
// ---------------------------------------------------------------------------

struct EuclidSpace;

impl LloydSpace for EuclidSpace {
    type Point = DVector<f64>;

    fn dist(&mut self, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        Ok((a - b).norm())
    }

    fn mean(&mut self, members: &[DVector<f64>], incumbent: &DVector<f64>) -> Result<DVector<f64>> {
        if members.is_empty() {
            return Ok(incumbent.clone());
        }
        let mut sum = DVector::zeros(members[0].len());
        for x in members {
            sum += x;
        }
        Ok(sum / members.len() as f64)
    }
}

/// Affine-invariant distances with gradient-descent Fréchet means,
/// warm-started at the incumbent centroid.
struct AffineGdSpace {
    mean_cfg: MeanSolverConfig,
}

impl LloydSpace for AffineGdSpace {
    type Point = SpdMatrix;

    fn dist(&mut self, a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
        dist_affine(a, b)
    }

    fn mean(&mut self, members: &[SpdMatrix], incumbent: &SpdMatrix) -> Result<SpdMatrix> {
        if members.is_empty() {
            return Ok(incumbent.clone());
        }
        let cfg = MeanSolverConfig {
            init: MeanInit::Provided(incumbent.clone()),
            ..self.mean_cfg.clone()
        };
        // Hitting the iteration cap is a flagged success; keep the iterate.
        Ok(frechet_mean_gd(members, &cfg)?.mean)
    }
}

/// Affine-invariant distances with iterative-centroid means; each update
/// shuffles its visit order with a fresh seed derived from the order seed.
struct AffineIcmSpace {
    order_seed: u64,
    updates: u64,
}

impl LloydSpace for AffineIcmSpace {
    type Point = SpdMatrix;

    fn dist(&mut self, a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
        dist_affine(a, b)
    }

    fn mean(&mut self, members: &[SpdMatrix], incumbent: &SpdMatrix) -> Result<SpdMatrix> {
        if members.is_empty() {
            return Ok(incumbent.clone());
        }
        let order = shuffled_order(members.len(), derive_seed(self.order_seed, self.updates));
        self.updates += 1;
        frechet_mean_icm(members, &order)
    }
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

fn check_spd_dataset(data: &[SpdMatrix]) -> Result<usize> {
    let first = data.first().ok_or(Error::TooFewPoints { needed: 1, got: 0 })?;
    let n = first.dim();
    for x in data {
        if x.dim() != n {
            return Err(Error::DimMismatch {
                expected: n,
                got: x.dim(),
            });
        }
    }
    Ok(n)
}

fn check_vector_dataset(points: &[DVector<f64>]) -> Result<usize> {
    let first = points.first().ok_or(Error::TooFewPoints { needed: 1, got: 0 })?;
    let dim = first.len();
    for x in points {
        if x.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: x.len(),
            });
        }
    }
    Ok(dim)
}

/// Euclidean k-means: Lloyd's algorithm with k-means++ restarts.
pub fn lloyd_euclid(points: &[DVector<f64>], cfg: &KMeansConfig) -> Result<Partition> {
    Ok(lloyd_euclid_traced(points, cfg)?.0)
}

/// [`lloyd_euclid`] plus per-restart traces (per-iteration sums of squared
/// distances), for inspecting the descent.
pub fn lloyd_euclid_traced(
    points: &[DVector<f64>],
    cfg: &KMeansConfig,
) -> Result<(Partition, Vec<RestartTrace>)> {
    check_vector_dataset(points)?;
    let mut space = EuclidSpace;
    let (outcome, traces) = lloyd_restarts(&mut space, points, cfg)?;
    let partition = Partition {
        labels: outcome.labels,
        k: cfg.k,
        centroids: Centroids::Euclidean(outcome.centroids),
        totdisp: outcome.totdisp,
        iterations: outcome.iterations,
        converged: outcome.converged,
        meta: PartitionMeta {
            pipeline: "lloyd",
            dispersion: "euclidean",
            seed: cfg.seed,
            restarts: cfg.restarts,
        },
    };
    Ok((partition, traces))
}

/// Intrinsic Riemannian clustering: Lloyd's algorithm under the
/// affine-invariant distance with gradient-descent Fréchet mean centroids.
pub fn cluster_irc(
    data: &[SpdMatrix],
    cfg: &KMeansConfig,
    mean_cfg: &MeanSolverConfig,
) -> Result<Partition> {
    check_spd_dataset(data)?;
    let mut space = AffineGdSpace {
        mean_cfg: mean_cfg.clone(),
    };
    let (outcome, _) = lloyd_restarts(&mut space, data, cfg)?;
    Ok(Partition {
        labels: outcome.labels,
        k: cfg.k,
        centroids: Centroids::Spd(outcome.centroids),
        totdisp: outcome.totdisp,
        iterations: outcome.iterations,
        converged: outcome.converged,
        meta: PartitionMeta {
            pipeline: "irc",
            dispersion: "affine/gd-centroids",
            seed: cfg.seed,
            restarts: cfg.restarts,
        },
    })
}

/// Approximate Riemannian clustering: as [`cluster_irc`] but with the
/// iterative centroid method computing the means, visit orders reshuffled
/// per update from `icm_order_seed`.
pub fn cluster_arc(
    data: &[SpdMatrix],
    cfg: &KMeansConfig,
    icm_order_seed: u64,
) -> Result<Partition> {
    check_spd_dataset(data)?;
    let mut space = AffineIcmSpace {
        order_seed: icm_order_seed,
        updates: 0,
    };
    let (outcome, _) = lloyd_restarts(&mut space, data, cfg)?;
    Ok(Partition {
        labels: outcome.labels,
        k: cfg.k,
        centroids: Centroids::Spd(outcome.centroids),
        totdisp: outcome.totdisp,
        iterations: outcome.iterations,
        converged: outcome.converged,
        meta: PartitionMeta {
            pipeline: "arc",
            dispersion: "affine/icm-centroids",
            seed: cfg.seed,
            restarts: cfg.restarts,
        },
    })
}

/// Log-Euclidean clustering: flatten every matrix to orthonormal log
/// coordinates at `base` (identity when `None`), k-means there, report
/// centroids both as coordinate vectors and as their exponentials.
pub fn cluster_lec(
    data: &[SpdMatrix],
    cfg: &KMeansConfig,
    base: Option<&SpdMatrix>,
) -> Result<Partition> {
    let n = check_spd_dataset(data)?;
    let base = match base {
        Some(b) => {
            if b.dim() != n {
                return Err(Error::DimMismatch {
                    expected: n,
                    got: b.dim(),
                });
            }
            b.clone()
        }
        None => SpdMatrix::identity(n),
    };
    let chart = Chart::new(&base)?;
    let basis = SymBasis::new(n);
    let coords: Vec<DVector<f64>> = data
        .iter()
        .enumerate()
        .map(|(i, x)| {
            chart
                .log(x)
                .map(|w| basis.coords(&w))
                .map_err(|e| e.at_index(i))
        })
        .collect::<Result<_>>()?;

    let mut space = EuclidSpace;
    let (outcome, _) = lloyd_restarts(&mut space, &coords, cfg)?;
    let matrices: Vec<SpdMatrix> = outcome
        .centroids
        .iter()
        .map(|c| chart.exp(&basis.from_coords(c)))
        .collect::<Result<_>>()?;
    Ok(Partition {
        labels: outcome.labels,
        k: cfg.k,
        centroids: Centroids::LogEuclidean {
            coords: outcome.centroids,
            matrices,
        },
        totdisp: outcome.totdisp,
        iterations: outcome.iterations,
        converged: outcome.converged,
        meta: PartitionMeta {
            pipeline: "lec",
            dispersion: "log-euclidean",
            seed: cfg.seed,
            restarts: cfg.restarts,
        },
    })
}

/// Fréchet map clustering: embed through the reference distances (exactly
/// N·l affine-distance evaluations), k-means on the images, then relabel the
/// manifold data.
///
/// So that all pipelines can be compared in one table, the returned
/// `totdisp` is re-measured in the affine metric against iterative-centroid
/// means of the induced clusters (visited in data order) — that costs N
/// further distance evaluations and N − k geodesics after the Euclidean loop
/// finishes, and is recorded in `meta.dispersion`.
pub fn cluster_fmc(
    data: &[SpdMatrix],
    map_spec: &FrechetMapSpec,
    cfg: &KMeansConfig,
) -> Result<Partition> {
    let n = check_spd_dataset(data)?;
    if map_spec.dim() != n {
        return Err(Error::DimMismatch {
            expected: n,
            got: map_spec.dim(),
        });
    }
    let images: Vec<DVector<f64>> = embed_dataset(map_spec, data)?
        .into_iter()
        .map(|e| e.into_coords())
        .collect();

    let mut space = EuclidSpace;
    let (outcome, _) = lloyd_restarts(&mut space, &images, cfg)?;
    let labels = outcome.labels;

    let mut centroids = Vec::with_capacity(cfg.k);
    for j in 0..cfg.k {
        let members = members_of(data, &labels, j);
        let order: Vec<usize> = (0..members.len()).collect();
        centroids.push(frechet_mean_icm(&members, &order)?);
    }
    let mut totdisp = 0.0;
    for j in 0..cfg.k {
        let members = members_of(data, &labels, j);
        totdisp += cluster_dispersion(&members, &centroids[j], DispersionMetric::Affine)?;
    }

    Ok(Partition {
        labels,
        k: cfg.k,
        centroids: Centroids::Spd(centroids),
        totdisp,
        iterations: outcome.iterations,
        converged: outcome.converged,
        meta: PartitionMeta {
            pipeline: "fmc",
            dispersion: "affine/icm-centroids",
            seed: cfg.seed,
            restarts: cfg.restarts,
        },
    })
}
