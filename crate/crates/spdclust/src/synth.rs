//! Synthetic SPD benchmark generation with ground-truth labels.
//!
//! Datasets are unions of metric balls. "Uniform in a ball" means uniform in
//! the exponential-chart tangent ball at the center: the direction is a
//! metric-unit symmetric matrix obtained by whitening an entrywise-Gaussian
//! symmetric draw, and the radius is `rho * U^(1/m)` with `m = n(n+1)/2`, so
//! the pushed-forward samples fill the tangent ball uniformly. (Curvature
//! corrections to the Riemannian volume are deliberately not applied; the
//! choice is recorded in the dataset provenance.)
//!
//! Two configurations are provided: [`gen_ball_config`] (k balls whose
//! centers are rejection-sampled until every normalized pairwise separation
//! `d(C_i, C_j) / (rho_i + rho_j)` falls in a prescribed band) and
//! [`gen_mirror_config`] (two nearby balls plus their matrix inverses — a
//! deliberately adversarial, perfectly mirrored geometry).

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::spd::{Chart, SpdMatrix, SymTangent};

/// Controls for [`gen_ball_config`].
#[derive(Clone, Debug, Serialize)]
pub struct BallConfig {
    pub k: usize,
    pub n: usize,
    /// Radii are drawn uniformly from this closed interval.
    pub radius_range: (f64, f64),
    /// Accepted band for `d(C_i, C_j) / (rho_i + rho_j)`, inclusive.
    pub d_low: f64,
    pub d_up: f64,
    pub samples_per_ball: usize,
    /// Frobenius norm of the symmetric log-vectors the centers are built
    /// from.
    pub center_scale: f64,
    pub seed: u64,
    pub max_retries: usize,
}

impl BallConfig {
    /// Defaults: radii in [0.8, 1.2], center scale 2, 10000 retries.
    pub fn new(k: usize, n: usize, d_low: f64, d_up: f64, samples_per_ball: usize, seed: u64) -> Self {
        Self {
            k,
            n,
            radius_range: (0.8, 1.2),
            d_low,
            d_up,
            samples_per_ball,
            center_scale: 2.0,
            seed,
            max_retries: 10_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("at least one ball is required".into()));
        }
        if self.n < 1 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        let (lo, hi) = self.radius_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidArgument(format!(
                "radius range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
            )));
        }
        if !(self.d_low > 0.0 && self.d_low <= self.d_up) {
            return Err(Error::InvalidArgument(format!(
                "separation band must satisfy 0 < d_low <= d_up, got [{}, {}]",
                self.d_low, self.d_up
            )));
        }
        if self.samples_per_ball < 1 {
            return Err(Error::InvalidArgument(
                "each ball needs at least one sample".into(),
            ));
        }
        if self.max_retries < 1 {
            return Err(Error::InvalidArgument(
                "at least one rejection attempt is required".into(),
            ));
        }
        Ok(())
    }
}

/// Controls for [`gen_mirror_config`].
#[derive(Clone, Debug, Serialize)]
pub struct MirrorConfig {
    pub n: usize,
    /// Frobenius norm of the first center's log-vector.
    pub norm: f64,
    /// Entry variance of the symmetric perturbation separating the two
    /// upper centers.
    pub perturb_var: f64,
    /// Minimum affine distance between the two upper centers.
    pub min_gap: f64,
    pub samples_per_ball: usize,
    pub seed: u64,
    pub max_retries: usize,
}

impl MirrorConfig {
    /// Defaults: norm 12, perturbation variance 0.02, gap 2, 10000 retries.
    ///
    /// The variance is chosen so that the log-space offset between the two
    /// upper centers (Frobenius norm ~0.57 for n = 4) stays *below* the
    /// log-space spread of a unit ball at that depth (~0.65): the paired
    /// balls remain disjoint on the manifold (the gap test is Riemannian)
    /// but their tangent-at-identity images overlap, which is the regime
    /// this configuration exists to produce.
    pub fn new(n: usize, samples_per_ball: usize, seed: u64) -> Self {
        Self {
            n,
            norm: 12.0,
            perturb_var: 0.02,
            min_gap: 2.0,
            samples_per_ball,
            seed,
            max_retries: 10_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(
                "mirror configuration needs n >= 2".into(),
            ));
        }
        if !(self.norm > 0.0) || !(self.perturb_var > 0.0) || !(self.min_gap > 0.0) {
            return Err(Error::InvalidArgument(
                "norm, perturbation variance and gap must be positive".into(),
            ));
        }
        if self.samples_per_ball < 1 || self.max_retries < 1 {
            return Err(Error::InvalidArgument(
                "sample count and retry budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Which generator produced a dataset, with its full parameters.
#[derive(Clone, Debug, Serialize)]
pub enum Provenance {
    Ball(BallConfig),
    Mirror(MirrorConfig),
}

/// A generated dataset with its ground truth.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub points: Vec<SpdMatrix>,
    /// Ball index for each point, in `[0, k)`.
    pub labels: Vec<usize>,
    pub centers: Vec<SpdMatrix>,
    pub radii: Vec<f64>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }
}

/// An entrywise-Gaussian symmetric matrix: `(G + G^T) / 2` with iid standard
/// normal `G`. Its distribution is invariant under orthogonal conjugation,
/// so the normalized draw is a uniformly random Frobenius-unit direction.
fn gaussian_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&g + g.transpose()) * 0.5
}

/// A Frobenius-unit symmetric direction (rejecting the measure-zero tiny
/// draws).
fn unit_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    loop {
        let w = gaussian_symmetric(n, rng);
        let norm = w.norm();
        if norm > 1e-12 {
            return w / norm;
        }
    }
}

/// `count` points uniform in the tangent ball of radius `rho` at `c`,
/// pushed to the manifold through the exponential chart. Every output is
/// within affine distance `rho` of `c` (up to eigendecomposition rounding).
pub fn sample_ball(c: &SpdMatrix, rho: f64, count: usize, seed: u64) -> Result<Vec<SpdMatrix>> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ball radius must be positive, got {rho}"
        )));
    }
    let chart = Chart::new(c)?;
    let n = c.dim();
    let m = n * (n + 1) / 2;
    let mut rng = rng_from_seed(seed);
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let direction = unit_symmetric(n, &mut rng);
        let u: f64 = rng.random();
        let radius = rho * u.powf(1.0 / m as f64);
        samples.push(chart.exp(&(direction * radius))?);
    }
    Ok(samples)
}

/// A center at `exp(V)` with `V` entrywise-Gaussian symmetric rescaled to
/// the requested Frobenius norm.
fn random_center(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Result<SpdMatrix> {
    let v = unit_symmetric(n, rng) * scale;
    SymTangent::new(v)?.exp()
}

fn fill_dataset(
    centers: Vec<SpdMatrix>,
    radii: Vec<f64>,
    samples_per_ball: usize,
    seed: u64,
    provenance: Provenance,
) -> Result<LabeledDataset> {
    let mut points = Vec::with_capacity(centers.len() * samples_per_ball);
    let mut labels = Vec::with_capacity(centers.len() * samples_per_ball);
    for (i, (c, &rho)) in centers.iter().zip(radii.iter()).enumerate() {
        let ball = sample_ball(c, rho, samples_per_ball, derive_seed(seed, 1 + i as u64))?;
        labels.extend(std::iter::repeat_n(i, ball.len()));
        points.extend(ball);
    }
    Ok(LabeledDataset {
        points,
        labels,
        centers,
        radii,
        provenance,
    })
}

/// `k` labeled balls whose centers pass the normalized-separation band: all
/// unordered pairs satisfy `d_low <= d(C_i, C_j)/(rho_i + rho_j) <= d_up`.
/// Centers and radii are rejection-sampled as a block; on failure the error
/// reports the violated pair that came closest to the band.
pub fn gen_ball_config(cfg: &BallConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 0));
    let (lo, hi) = cfg.radius_range;

    // Track the least-violating pair across attempts for the error report.
    let mut tightest: Option<(f64, usize, usize, f64)> = None;

    for _ in 0..cfg.max_retries {
        let mut centers = Vec::with_capacity(cfg.k);
        for _ in 0..cfg.k {
            centers.push(random_center(cfg.n, cfg.center_scale, &mut rng)?);
        }
        let radii: Vec<f64> = (0..cfg.k)
            .map(|_| lo + (hi - lo) * rng.random::<f64>())
            .collect();

        let mut ok = true;
        for i in 0..cfg.k {
            for j in (i + 1)..cfg.k {
                let ratio =
                    crate::spd::dist_affine(&centers[i], &centers[j])? / (radii[i] + radii[j]);
                let excess = (cfg.d_low - ratio).max(ratio - cfg.d_up);
                if excess > 0.0 {
                    ok = false;
                    if tightest.map(|(e, ..)| excess < e).unwrap_or(true) {
                        tightest = Some((excess, i, j, ratio));
                    }
                }
            }
        }
        if ok {
            return fill_dataset(
                centers,
                radii,
                cfg.samples_per_ball,
                cfg.seed,
                Provenance::Ball(cfg.clone()),
            );
        }
    }

    let (_, i, j, observed) = tightest.expect("at least one violated pair on failure");
    Err(Error::RetriesExhausted {
        retries: cfg.max_retries,
        i,
        j,
        observed,
        lo: cfg.d_low,
        hi: cfg.d_up,
    })
}

/// A symmetric perturbation whose upper triangle (diagonal included) is iid
/// centered Gaussian with the given entry variance, mirrored below.
fn symmetric_perturbation(n: usize, variance: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let std = variance.sqrt();
    let mut delta = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x: f64 = rng.sample::<f64, _>(StandardNormal);
            delta[(i, j)] = std * x;
            delta[(j, i)] = delta[(i, j)];
        }
    }
    delta
}

/// The mirrored four-ball configuration: `C_1 = exp(V_1)` with
/// `||V_1||_F = norm`, `C_2 = exp(V_1 + Delta)` resampled until
/// `d(C_1, C_2) > min_gap`, and the inverted twins `C_3 = C_1^-1`,
/// `C_4 = C_2^-1`. Four unit-radius balls, labels 0-3.
pub fn gen_mirror_config(cfg: &MirrorConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 0));

    let v1 = SymTangent::new(unit_symmetric(cfg.n, &mut rng) * cfg.norm)?;
    let c1 = v1.exp()?;

    let mut accepted: Option<(SymTangent, f64)> = None;
    let mut closest_gap = 0.0_f64;
    for _ in 0..cfg.max_retries {
        let delta = symmetric_perturbation(cfg.n, cfg.perturb_var, &mut rng);
        let v2 = SymTangent::new(v1.matrix() + delta)?;
        let c2 = v2.exp()?;
        let gap = crate::spd::dist_affine(&c1, &c2)?;
        if gap > cfg.min_gap {
            accepted = Some((v2, gap));
            break;
        }
        closest_gap = closest_gap.max(gap);
    }
    let Some((v2, _)) = accepted else {
        return Err(Error::RetriesExhausted {
            retries: cfg.max_retries,
            i: 0,
            j: 1,
            observed: closest_gap,
            lo: cfg.min_gap,
            hi: f64::INFINITY,
        });
    };

    let c2 = v2.exp()?;
    let c3 = v1.scale(-1.0).exp()?;
    let c4 = v2.scale(-1.0).exp()?;
    let centers = vec![c1, c2, c3, c4];
    let radii = vec![1.0; 4];
    fill_dataset(
        centers,
        radii,
        cfg.samples_per_ball,
        cfg.seed,
        Provenance::Mirror(cfg.clone()),
    )
}
