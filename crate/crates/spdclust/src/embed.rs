//! Distance-map embeddings of SPD(n) into Euclidean space.
//!
//! Given reference points R_1, ..., R_l and an order p in {1, 2}, a dataset
//! point X is mapped to the vector of its p-th power distances
//!
//! ```text
//! F(X) = (d(R_1, X)^p, ..., d(R_l, X)^p)   in  R^l
//! ```
//!
//! The order-1 map is globally 1-Lipschitz; the order-2 map is Lipschitz on
//! bounded sets and differentiable everywhere, with Riemannian differential
//! applied to a tangent vector V at X:
//!
//! ```text
//! row i of DF(X):   V  ->  < -p d(R_i,X)^(p-2) log_X(R_i), V >_X
//! ```
//!
//! [`jacobian`] assembles these rows in the metric-orthonormal frame at the
//! foot point (chart coordinates against [`SymBasis`]), so its singular
//! values — and therefore [`local_rank`] — mean the same thing at every foot
//! point. Rank m = n(n+1)/2 certifies that the map is locally invertible at
//! that point; [`distortion_stats`] measures how far sampled pairs stretch
//! or shrink under the embedding.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::spd::{dist_affine, Chart, SpdMatrix};

/// Distance below which an order-1 map is considered to sit *at* a reference
/// point, where it is not differentiable.
pub const AT_REFERENCE_TOL: f64 = 1e-9;

/// Default relative singular-value cutoff for [`local_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Pairs closer than this are excluded from distortion ratios (the ratio
/// would divide rounding noise by rounding noise).
pub const DEGENERATE_PAIR_TOL: f64 = 1e-12;

/// A distance-map specification: the ordered reference list and the order p.
#[derive(Clone, Debug)]
pub struct FrechetMapSpec {
    refs: Vec<SpdMatrix>,
    p: u8,
}

impl FrechetMapSpec {
    /// Validates: at least one reference, uniform dimensions, p in {1, 2}.
    pub fn new(refs: Vec<SpdMatrix>, p: u8) -> Result<Self> {
        if refs.is_empty() {
            return Err(Error::InvalidArgument(
                "a distance map needs at least one reference point".into(),
            ));
        }
        if !(p == 1 || p == 2) {
            return Err(Error::InvalidArgument(format!(
                "map order must be 1 or 2, got {p}"
            )));
        }
        let dim = refs[0].dim();
        for r in &refs[1..] {
            if r.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: r.dim(),
                });
            }
        }
        Ok(Self { refs, p })
    }

    pub fn refs(&self) -> &[SpdMatrix] {
        &self.refs
    }

    /// Number of references l (the embedding dimension).
    pub fn num_refs(&self) -> usize {
        self.refs.len()
    }

    pub fn p(&self) -> u8 {
        self.p
    }

    /// Dimension n of the underlying matrices.
    pub fn dim(&self) -> usize {
        self.refs[0].dim()
    }
}

/// The image of one point: a vector of l nonnegative entries (units of
/// distance^p).
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedPoint {
    coords: DVector<f64>,
}

impl EmbeddedPoint {
    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }
}

/// Orthonormal basis of the symmetric matrices Sym(n) under the Frobenius
/// inner product: the n diagonal units E_ii followed by the (E_ij + E_ji)/√2
/// for i < j in row-major order; m = n(n+1)/2 elements in total.
#[derive(Clone, Copy, Debug)]
pub struct SymBasis {
    n: usize,
}

impl SymBasis {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of basis elements m = n(n+1)/2.
    pub fn len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// The j-th basis element as a dense matrix.
    pub fn element(&self, j: usize) -> DMatrix<f64> {
        assert!(j < self.len(), "basis index {j} out of range");
        let mut out = DMatrix::zeros(self.n, self.n);
        if j < self.n {
            out[(j, j)] = 1.0;
        } else {
            let (r, c) = self.off_diagonal_position(j - self.n);
            let v = std::f64::consts::FRAC_1_SQRT_2;
            out[(r, c)] = v;
            out[(c, r)] = v;
        }
        out
    }

    /// Coordinates of a symmetric matrix in this basis:
    /// `(S_00, ..., S_(n-1)(n-1), √2 S_01, √2 S_02, ...)`.
    pub fn coords(&self, s: &DMatrix<f64>) -> DVector<f64> {
        debug_assert_eq!(s.nrows(), self.n);
        let mut out = DVector::zeros(self.len());
        for i in 0..self.n {
            out[i] = s[(i, i)];
        }
        let mut k = self.n;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                out[k] = std::f64::consts::SQRT_2 * s[(i, j)];
                k += 1;
            }
        }
        out
    }

    /// Reassembles a symmetric matrix from its coordinates (inverse of
    /// [`SymBasis::coords`]).
    pub fn from_coords(&self, c: &DVector<f64>) -> DMatrix<f64> {
        debug_assert_eq!(c.len(), self.len());
        let mut out = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            out[(i, i)] = c[i];
        }
        let mut k = self.n;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let v = c[k] * std::f64::consts::FRAC_1_SQRT_2;
                out[(i, j)] = v;
                out[(j, i)] = v;
                k += 1;
            }
        }
        out
    }

    /// Row/column of the k-th strictly-upper-triangular position in
    /// row-major order.
    fn off_diagonal_position(&self, mut k: usize) -> (usize, usize) {
        for i in 0..self.n {
            let row_len = self.n - i - 1;
            if k < row_len {
                return (i, i + 1 + k);
            }
            k -= row_len;
        }
        unreachable!("off-diagonal index out of range");
    }
}

/// Embeds one point: `coords_i = d(R_i, X)^p`.
pub fn embed(spec: &FrechetMapSpec, x: &SpdMatrix) -> Result<EmbeddedPoint> {
    if x.dim() != spec.dim() {
        return Err(Error::DimMismatch {
            expected: spec.dim(),
            got: x.dim(),
        });
    }
    let mut coords = DVector::zeros(spec.num_refs());
    for (i, r) in spec.refs().iter().enumerate() {
        let d = dist_affine(r, x)?;
        coords[i] = if spec.p() == 1 { d } else { d * d };
    }
    Ok(EmbeddedPoint { coords })
}

/// Embeds a dataset pointwise, preserving order. Exactly `N * l` distance
/// evaluations; failures carry the index of the offending point.
pub fn embed_dataset(spec: &FrechetMapSpec, data: &[SpdMatrix]) -> Result<Vec<EmbeddedPoint>> {
    if data.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    data.iter()
        .enumerate()
        .map(|(i, x)| embed(spec, x).map_err(|e| e.at_index(i)))
        .collect()
}

/// Riemannian Jacobian of the embedding at foot point `P`, as an l x m matrix
/// in the metric-orthonormal frame `V_j = P^1/2 B_j P^1/2`:
///
/// `J[i][j] = < -p d(R_i,P)^(p-2) log_P(R_i), V_j >_P`
///          `= Frobenius coords of -p d^(p-2) log(P^-1/2 R_i P^-1/2) against B_j`.
///
/// For p = 2 rows are exactly `-2 log_P(R_i)` in frame coordinates; for
/// p = 1 the map is not differentiable at the references themselves
/// ([`Error::AtReferencePoint`] within [`AT_REFERENCE_TOL`]).
pub fn jacobian(spec: &FrechetMapSpec, p: &SpdMatrix, basis: &SymBasis) -> Result<DMatrix<f64>> {
    if p.dim() != spec.dim() {
        return Err(Error::DimMismatch {
            expected: spec.dim(),
            got: p.dim(),
        });
    }
    if basis.n() != p.dim() {
        return Err(Error::DimMismatch {
            expected: p.dim(),
            got: basis.n(),
        });
    }
    let chart = Chart::new(p)?;
    let l = spec.num_refs();
    let m = basis.len();
    let mut jac = DMatrix::zeros(l, m);
    for (i, r) in spec.refs().iter().enumerate() {
        // Chart coordinates of log_P(R_i); the Frobenius norm is d(P, R_i).
        let w = chart.log(r)?;
        let d = w.norm();
        let factor = match spec.p() {
            1 => {
                if d < AT_REFERENCE_TOL {
                    return Err(Error::AtReferencePoint { index: i, dist: d });
                }
                -1.0 / d
            }
            _ => -2.0,
        };
        let row = basis.coords(&(w * factor));
        jac.row_mut(i).copy_from(&row.transpose());
    }
    Ok(jac)
}

/// Numerical rank of the Jacobian at `P`: singular values above
/// `rank_tol * sigma_max`. Rank m = n(n+1)/2 certifies local invertibility
/// of the embedding at `P`.
pub fn local_rank(spec: &FrechetMapSpec, p: &SpdMatrix, rank_tol: f64) -> Result<usize> {
    let jac = jacobian(spec, p, &SymBasis::new(p.dim()))?;
    let singular = jac.singular_values();
    let max = singular.iter().copied().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return Ok(0);
    }
    Ok(singular.iter().filter(|&&s| s > rank_tol * max).count())
}

/// Distortion summary over sampled pairs; see [`distortion_stats`].
#[derive(Clone, Debug)]
pub struct DistortionStats {
    /// Largest observed `||F(x) - F(x')||_inf / d(x, x')`.
    pub max_ratio_inf: f64,
    /// Whether every sampled ratio respects the Lipschitz bound.
    pub lipschitz_bound_ok: bool,
    /// The bound checked against: 1 for p = 1 (global), `p 2^(p-1) δ^(p-1)`
    /// for p = 2 with δ the containing-ball radius.
    pub bound: f64,
    /// Radius δ of the ball centered at the first data point containing all
    /// references and data points.
    pub radius_delta: f64,
    /// Number of pairs whose ratio entered the statistics.
    pub pairs_evaluated: usize,
    /// Pairs skipped because the base distance fell below
    /// [`DEGENERATE_PAIR_TOL`].
    pub degenerate_pairs: usize,
}

/// Samples `sample_pairs` distinct index pairs (without replacement; all
/// pairs when the dataset has no more than that many) and reports the worst
/// stretch of the embedding against its Lipschitz bound.
pub fn distortion_stats(
    spec: &FrechetMapSpec,
    data: &[SpdMatrix],
    sample_pairs: usize,
    seed: u64,
) -> Result<DistortionStats> {
    if data.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: data.len(),
        });
    }
    let images = embed_dataset(spec, data)?;

    // δ: radius of the ball around data[0] containing references and data.
    let mut delta = 0.0_f64;
    for r in spec.refs() {
        delta = delta.max(dist_affine(&data[0], r)?);
    }
    for x in data {
        delta = delta.max(dist_affine(&data[0], x)?);
    }
    let bound = match spec.p() {
        1 => 1.0,
        p => {
            let p = p as f64;
            p * 2.0_f64.powf(p - 1.0) * delta.powf(p - 1.0)
        }
    };

    let n = data.len();
    let total_pairs = n * (n - 1) / 2;
    let pairs: Vec<(usize, usize)> = if sample_pairs >= total_pairs {
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect()
    } else {
        let mut rng = rng_from_seed(seed);
        let mut seen = std::collections::HashSet::with_capacity(sample_pairs);
        let mut out = Vec::with_capacity(sample_pairs);
        while out.len() < sample_pairs {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let pair = (i.min(j), i.max(j));
            if seen.insert(pair) {
                out.push(pair);
            }
        }
        out
    };

    let mut max_ratio = 0.0_f64;
    let mut degenerate = 0usize;
    let mut evaluated = 0usize;
    for (i, j) in pairs {
        let d = dist_affine(&data[i], &data[j])?;
        if d < DEGENERATE_PAIR_TOL {
            degenerate += 1;
            continue;
        }
        let diff = images[i].coords() - images[j].coords();
        let inf_norm = diff.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
        max_ratio = max_ratio.max(inf_norm / d);
        evaluated += 1;
    }

    Ok(DistortionStats {
        max_ratio_inf: max_ratio,
        lipschitz_bound_ok: max_ratio <= bound + 1e-9,
        bound,
        radius_delta: delta,
        pairs_evaluated: evaluated,
        degenerate_pairs: degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn basis_is_frobenius_orthonormal() {
        for n in [1usize, 2, 3, 4] {
            let basis = SymBasis::new(n);
            assert_eq!(basis.len(), n * (n + 1) / 2);
            for a in 0..basis.len() {
                for b in 0..basis.len() {
                    let dot = (basis.element(a) * basis.element(b)).trace();
                    let expected = if a == b { 1.0 } else { 0.0 };
                    assert_relative_eq!(dot, expected, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn basis_coords_round_trip() {
        let basis = SymBasis::new(3);
        let s = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.5, -0.2, 0.5, 2.0, 0.7, -0.2, 0.7, 3.0],
        );
        let c = basis.coords(&s);
        assert_eq!(c.len(), 6);
        let back = basis.from_coords(&c);
        assert_relative_eq!(back, s, epsilon = 1e-14);
        // Coordinates preserve the Frobenius norm (orthonormal basis).
        assert_relative_eq!(c.norm(), s.norm(), epsilon = 1e-14);
    }

    #[test]
    fn spec_validation() {
        assert!(FrechetMapSpec::new(vec![], 2).is_err());
        assert!(FrechetMapSpec::new(vec![SpdMatrix::identity(2)], 3).is_err());
        assert!(FrechetMapSpec::new(
            vec![SpdMatrix::identity(2), SpdMatrix::identity(3)],
            2
        )
        .is_err());
        assert!(FrechetMapSpec::new(vec![SpdMatrix::identity(2)], 1).is_ok());
    }

    #[test]
    fn embed_self_reference_is_zero() {
        let spec = FrechetMapSpec::new(vec![SpdMatrix::identity(2)], 2).unwrap();
        let image = embed(&spec, &SpdMatrix::identity(2)).unwrap();
        assert_eq!(image.coords()[0], 0.0);
    }

    #[test]
    fn embed_diagonal_closed_form() {
        let spec = FrechetMapSpec::new(vec![SpdMatrix::identity(2)], 1).unwrap();
        let x = SpdMatrix::from_diagonal(&[(2.0_f64).exp(), 1.0]).unwrap();
        let image = embed(&spec, &x).unwrap();
        assert_relative_eq!(image.coords()[0], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn order_two_is_square_of_order_one() {
        let refs = vec![
            SpdMatrix::from_diagonal(&[2.0, 1.0]).unwrap(),
            SpdMatrix::from_diagonal(&[1.0, 3.0]).unwrap(),
        ];
        let s1 = FrechetMapSpec::new(refs.clone(), 1).unwrap();
        let s2 = FrechetMapSpec::new(refs, 2).unwrap();
        let x = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.5])).unwrap();
        let i1 = embed(&s1, &x).unwrap();
        let i2 = embed(&s2, &x).unwrap();
        for k in 0..2 {
            assert_relative_eq!(
                i2.coords()[k],
                i1.coords()[k] * i1.coords()[k],
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn dataset_embedding_preserves_order() {
        let spec = FrechetMapSpec::new(vec![SpdMatrix::identity(2)], 2).unwrap();
        let data = vec![
            SpdMatrix::from_diagonal(&[1.0, 1.0]).unwrap(),
            SpdMatrix::from_diagonal(&[2.0, 2.0]).unwrap(),
            SpdMatrix::from_diagonal(&[3.0, 3.0]).unwrap(),
        ];
        let images = embed_dataset(&spec, &data).unwrap();
        let individual: Vec<_> = data.iter().map(|x| embed(&spec, x).unwrap()).collect();
        assert_eq!(images, individual);
        assert!(images[1].coords()[0] < images[2].coords()[0]);
    }

    #[test]
    fn jacobian_row_at_its_own_reference_is_zero_for_order_two() {
        let r1 = SpdMatrix::identity(2);
        let r2 = SpdMatrix::from_diagonal(&[2.0, 3.0]).unwrap();
        let spec = FrechetMapSpec::new(vec![r1.clone(), r2], 2).unwrap();
        let jac = jacobian(&spec, &r1, &SymBasis::new(2)).unwrap();
        assert!(jac.row(0).iter().all(|&x| x.abs() < 1e-14));
        assert!(jac.row(1).iter().any(|&x| x.abs() > 0.1));
    }

    #[test]
    fn jacobian_order_one_rejects_foot_point_on_reference() {
        let r = SpdMatrix::identity(2);
        let spec = FrechetMapSpec::new(vec![r.clone()], 1).unwrap();
        assert!(matches!(
            jacobian(&spec, &r, &SymBasis::new(2)),
            Err(Error::AtReferencePoint { index: 0, .. })
        ));
    }

    #[test]
    fn local_rank_single_reference_is_at_most_one() {
        let spec =
            FrechetMapSpec::new(vec![SpdMatrix::from_diagonal(&[2.0, 1.0]).unwrap()], 2).unwrap();
        let p = SpdMatrix::from_diagonal(&[1.0, 3.0]).unwrap();
        assert!(local_rank(&spec, &p, DEFAULT_RANK_TOL).unwrap() <= 1);
    }

    #[test]
    fn local_rank_cannot_exceed_reference_count() {
        // With fewer references than m = n(n+1)/2 the rank is always short.
        let refs = vec![
            SpdMatrix::from_diagonal(&[2.0, 1.0]).unwrap(),
            SpdMatrix::from_diagonal(&[1.0, 2.0]).unwrap(),
        ];
        let spec = FrechetMapSpec::new(refs, 2).unwrap();
        let p = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.5, 0.3, 0.3, 1.0])).unwrap();
        let rank = local_rank(&spec, &p, DEFAULT_RANK_TOL).unwrap();
        assert!(rank < SymBasis::new(2).len());
    }

    #[test]
    fn distortion_single_pair_with_ref_on_point_has_ratio_one() {
        // F(x) = d(x, x') lies on the geodesic through x and x', so the
        // single coordinate changes exactly as fast as the distance.
        let x = SpdMatrix::identity(2);
        let y = SpdMatrix::from_diagonal(&[3.0, 2.0]).unwrap();
        let spec = FrechetMapSpec::new(vec![x.clone()], 1).unwrap();
        let stats = distortion_stats(&spec, &[x, y], 10, 42).unwrap();
        assert_relative_eq!(stats.max_ratio_inf, 1.0, max_relative = 1e-10);
        assert!(stats.lipschitz_bound_ok);
        assert_eq!(stats.pairs_evaluated, 1);
    }

    #[test]
    fn distortion_counts_degenerate_pairs() {
        let x = SpdMatrix::identity(2);
        let spec = FrechetMapSpec::new(vec![SpdMatrix::from_diagonal(&[2.0, 1.0]).unwrap()], 1)
            .unwrap();
        let stats = distortion_stats(&spec, &[x.clone(), x.clone(), x], 100, 42).unwrap();
        assert_eq!(stats.pairs_evaluated, 0);
        assert_eq!(stats.degenerate_pairs, 3);
    }
}
