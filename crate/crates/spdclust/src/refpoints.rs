//! Reference-point selection for the distance-map embedding.
//!
//! Two strategies: uniform sampling from the dataset
//! ([`select_random`]), and a principled construction
//! ([`select_principled`]) that pre-clusters the data cheaply, estimates a
//! mean and radius per tentative cluster, and then places two references per
//! unordered cluster pair on the geodesic through the two means — just
//! outside the segment for nearby ("close") pairs, strictly inside it for
//! well-separated ("far") pairs.

use serde::Serialize;

use crate::cluster::{cluster_lec, KMeansConfig};
use crate::error::{Error, Result};
use crate::mean::frechet_mean_icm;
use crate::rng::derive_seed;
use crate::spd::{dist_affine, geodesic, SpdMatrix};

/// Means closer than this are treated as coincident; the principled
/// construction then falls back to random selection.
pub const DEGENERATE_MEAN_TOL: f64 = 1e-9;

/// Controls for [`select_principled`]. Defaults: `t_close = 2`,
/// `t_far = 0.35`, `n_rho = 50`, `eps_d = 2.5`, 90% radius quantile.
///
/// The default `t_close` is deliberately moderate: pushing references many
/// half-gaps past a pair of deep-seated cluster means can drive the
/// whitened spectra of the resulting embedding distances beyond what double
/// precision resolves. Placement at 2 half-gaps separates close pairs just
/// as reliably while keeping every reference well inside the representable
/// shell.
#[derive(Clone, Debug, Serialize)]
pub struct PrincipledParams {
    /// Placement parameter for close pairs, in half-gap multiples (> 1: the
    /// references land outside the segment between the means).
    pub t_close: f64,
    /// Placement parameter for far pairs (in [0, 1): strictly between the
    /// midpoint and either mean).
    pub t_far: f64,
    /// Points sampled per cluster when estimating its radius.
    pub n_rho: usize,
    /// Close/far decision threshold on the normalized mean separation.
    pub eps_d: f64,
    /// Radius quantile (nearest-rank).
    pub quantile: f64,
    pub seed: u64,
}

impl Default for PrincipledParams {
    fn default() -> Self {
        Self {
            t_close: 2.0,
            t_far: 0.35,
            n_rho: 50,
            eps_d: 2.5,
            quantile: 0.90,
            seed: 0,
        }
    }
}

impl PrincipledParams {
    fn validate(&self) -> Result<()> {
        if !(self.t_close > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "t_close must exceed 1, got {}",
                self.t_close
            )));
        }
        if !(0.0..1.0).contains(&self.t_far) {
            return Err(Error::InvalidArgument(format!(
                "t_far must lie in [0, 1), got {}",
                self.t_far
            )));
        }
        if self.n_rho < 1 {
            return Err(Error::InvalidArgument(
                "radius estimation needs at least one sample".into(),
            ));
        }
        if !(self.eps_d > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps_d must be positive, got {}",
                self.eps_d
            )));
        }
        if !(self.quantile > 0.0 && self.quantile <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quantile must lie in (0, 1], got {}",
                self.quantile
            )));
        }
        Ok(())
    }
}

/// One cluster pair's bookkeeping in the [`PrincipledReport`].
#[derive(Clone, Debug, Serialize)]
pub struct PairDecision {
    pub i: usize,
    pub j: usize,
    /// `dist_affine(mean_i, mean_j)`.
    pub mean_distance: f64,
    /// `radius_i + radius_j`.
    pub radius_sum: f64,
    /// `mean_distance / radius_sum` (infinite when both radii are zero).
    pub ratio: f64,
    /// Whether the close case fired (`ratio < eps_d`).
    pub is_close: bool,
    /// Placement parameter actually used (`t_close` or `t_far`).
    pub t: f64,
}

/// Everything [`select_principled`] decided, serializable for the CLI.
#[derive(Clone, Debug, Serialize)]
pub struct PrincipledReport {
    pub k: usize,
    pub num_refs: usize,
    pub params: PrincipledParams,
    /// Row-major entries of each cluster mean.
    pub means: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub pairs: Vec<PairDecision>,
    /// Set when two cluster means coincided and the selection fell back to
    /// random references.
    pub degenerate_fallback: bool,
}

fn matrix_rows(m: &SpdMatrix) -> Vec<f64> {
    m.matrix().transpose().as_slice().to_vec()
}

/// `l` dataset elements sampled without replacement, deterministic per seed.
pub fn select_random(data: &[SpdMatrix], l: usize, seed: u64) -> Result<Vec<SpdMatrix>> {
    let indices = select_random_indices(data.len(), l, seed)?;
    Ok(indices.iter().map(|&i| data[i].clone()).collect())
}

/// The index form of [`select_random`].
pub fn select_random_indices(n: usize, l: usize, seed: u64) -> Result<Vec<usize>> {
    if l == 0 {
        return Err(Error::InvalidArgument(
            "at least one reference point is required".into(),
        ));
    }
    if l > n {
        return Err(Error::TooFewPoints { needed: l, got: n });
    }
    let mut order = crate::mean::shuffled_order(n, seed);
    order.truncate(l);
    Ok(order)
}

/// Nearest-rank quantile of the distances from `mean` to a without-replacement
/// sample of the cluster (all points when `n_rho` covers the cluster).
pub fn estimate_radius(
    cluster: &[SpdMatrix],
    mean: &SpdMatrix,
    n_rho: usize,
    quantile: f64,
    seed: u64,
) -> Result<f64> {
    if cluster.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile must lie in (0, 1], got {quantile}"
        )));
    }
    let take = n_rho.max(1).min(cluster.len());
    let indices: Vec<usize> = if take == cluster.len() {
        (0..cluster.len()).collect()
    } else {
        select_random_indices(cluster.len(), take, seed)?
    };
    let mut distances = Vec::with_capacity(take);
    for i in indices {
        distances.push(dist_affine(mean, &cluster[i])?);
    }
    distances.sort_by(f64::total_cmp);
    let rank = (quantile * take as f64).ceil() as usize;
    Ok(distances[rank.clamp(1, take) - 1])
}

/// Principled reference selection: log-domain pre-clustering into `k`
/// tentative clusters, iterative-centroid means and radius quantiles per
/// cluster, then for each unordered pair of clusters two references placed
/// symmetrically on the geodesic through the means, at `±t` half-gap
/// multiples from the midpoint (`t = t_close` when the means are within
/// `eps_d` summed radii of each other, `t_far` otherwise).
///
/// Always returns `k(k-1)` references. If any two cluster means coincide the
/// geodesic directions are undefined; the selection then falls back to
/// [`select_random`] and sets `degenerate_fallback` in the report.
pub fn select_principled(
    data: &[SpdMatrix],
    k: usize,
    params: &PrincipledParams,
    kmeans_cfg: &KMeansConfig,
) -> Result<(Vec<SpdMatrix>, PrincipledReport)> {
    params.validate()?;
    if k < 2 {
        return Err(Error::InvalidArgument(
            "principled selection needs k >= 2".into(),
        ));
    }
    if kmeans_cfg.k != k {
        return Err(Error::InvalidArgument(format!(
            "k-means config is for k = {}, selection asked for k = {k}",
            kmeans_cfg.k
        )));
    }
    if data.len() < k {
        return Err(Error::TooFewPoints {
            needed: k,
            got: data.len(),
        });
    }
    let num_refs = k * (k - 1);

    // Steps 1-2: cheap tentative clustering in the log domain.
    let partition = cluster_lec(data, kmeans_cfg, None)?;

    // Step 3: iterative-centroid mean of each tentative cluster, members in
    // data order.
    let mut means = Vec::with_capacity(k);
    let mut clusters: Vec<Vec<SpdMatrix>> = vec![Vec::new(); k];
    for (x, &l) in data.iter().zip(partition.labels.iter()) {
        clusters[l].push(x.clone());
    }
    for members in &clusters {
        // Lloyd's empty-cluster repair guarantees nonempty clusters.
        let order: Vec<usize> = (0..members.len()).collect();
        means.push(frechet_mean_icm(members, &order)?);
    }

    // Step 4: radius quantiles.
    let mut radii = Vec::with_capacity(k);
    for (i, members) in clusters.iter().enumerate() {
        radii.push(estimate_radius(
            members,
            &means[i],
            params.n_rho,
            params.quantile,
            derive_seed(params.seed, i as u64),
        )?);
    }

    // Steps 5-8: per-pair case split and geodesic placement.
    let mut pairs = Vec::with_capacity(num_refs / 2);
    let mut refs = Vec::with_capacity(num_refs);
    let mut degenerate = false;
    'outer: for i in 0..k {
        for j in (i + 1)..k {
            let mean_distance = dist_affine(&means[i], &means[j])?;
            if mean_distance < DEGENERATE_MEAN_TOL {
                degenerate = true;
                break 'outer;
            }
            let radius_sum = radii[i] + radii[j];
            let ratio = if radius_sum > 0.0 {
                mean_distance / radius_sum
            } else {
                f64::INFINITY
            };
            let is_close = ratio < params.eps_d;
            let t = if is_close { params.t_close } else { params.t_far };
            pairs.push(PairDecision {
                i,
                j,
                mean_distance,
                radius_sum,
                ratio,
                is_close,
                t,
            });

            // The geodesic from the pair midpoint toward mean_j covers one
            // half-gap per unit parameter, so ±t lands t half-gaps out.
            let midpoint = geodesic(&means[i], &means[j], 0.5)?;
            refs.push(geodesic(&midpoint, &means[j], t)?);
            refs.push(geodesic(&midpoint, &means[j], -t)?);
        }
    }

    if degenerate {
        let refs = select_random(data, num_refs, derive_seed(params.seed, u64::MAX))?;
        let report = PrincipledReport {
            k,
            num_refs,
            params: params.clone(),
            means: means.iter().map(matrix_rows).collect(),
            radii,
            pairs: Vec::new(),
            degenerate_fallback: true,
        };
        return Ok((refs, report));
    }

    let report = PrincipledReport {
        k,
        num_refs,
        params: params.clone(),
        means: means.iter().map(matrix_rows).collect(),
        radii,
        pairs,
        degenerate_fallback: false,
    };
    Ok((refs, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(entries: &[f64]) -> SpdMatrix {
        SpdMatrix::from_diagonal(entries).unwrap()
    }

    #[test]
    fn random_selection_is_deterministic_and_distinct() {
        let data: Vec<SpdMatrix> = (1..=6).map(|i| diag(&[i as f64, 1.0])).collect();
        let a = select_random(&data, 3, 99).unwrap();
        let b = select_random(&data, 3, 99).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.matrix(), y.matrix());
        }

        let indices = select_random_indices(6, 6, 4).unwrap();
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());

        let single = select_random(&data, 1, 0).unwrap();
        assert_eq!(single.len(), 1);

        assert!(matches!(
            select_random(&data, 7, 0),
            Err(Error::TooFewPoints { needed: 7, got: 6 })
        ));
    }

    #[test]
    fn radius_of_coincident_cluster_is_zero() {
        let mean = diag(&[2.0, 3.0]);
        let cluster = vec![mean.clone(); 10];
        let rho = estimate_radius(&cluster, &mean, 50, 0.9, 1).unwrap();
        assert_eq!(rho, 0.0);
    }

    #[test]
    fn radius_quantile_is_nearest_rank() {
        // Points at distances 0.1, 0.2, ..., 1.0 from the identity:
        // diag(e^d, 1) is at affine distance d from diag(1, 1).
        let mean = SpdMatrix::identity(2);
        let cluster: Vec<SpdMatrix> = (1..=10)
            .map(|i| diag(&[(0.1 * i as f64).exp(), 1.0]))
            .collect();
        let rho = estimate_radius(&cluster, &mean, 50, 0.9, 1).unwrap();
        assert!((rho - 0.9).abs() < 1e-12, "nearest-rank 90% of 10: got {rho}");

        // Full-coverage sampling is deterministic regardless of seed.
        let again = estimate_radius(&cluster, &mean, 10, 0.9, 999).unwrap();
        assert_eq!(rho, again);
    }

    #[test]
    fn params_are_validated() {
        let bad_t_close = PrincipledParams {
            t_close: 1.0,
            ..Default::default()
        };
        assert!(bad_t_close.validate().is_err());
        let bad_t_far = PrincipledParams {
            t_far: 1.0,
            ..Default::default()
        };
        assert!(bad_t_far.validate().is_err());
        let bad_eps = PrincipledParams {
            eps_d: 0.0,
            ..Default::default()
        };
        assert!(bad_eps.validate().is_err());
        assert!(PrincipledParams::default().validate().is_ok());
    }
}
