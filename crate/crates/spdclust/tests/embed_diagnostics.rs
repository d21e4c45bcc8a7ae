//! Diagnostics for the distance-map embedding: the analytic Jacobian against
//! central finite differences, rank behaviour of random reference lists, the
//! exact distance-evaluation count of dataset embedding, and the Lipschitz
//! property of the order-1 map.

mod common;

use common::{random_spd, random_tangent, seeded};
use nalgebra::DMatrix;
use spdclust::counters;
use spdclust::embed::{
    distortion_stats, embed, embed_dataset, jacobian, local_rank, FrechetMapSpec, SymBasis,
    DEFAULT_RANK_TOL,
};
use spdclust::spd::{dist_affine, exp_map, Chart, SpdMatrix};

/// Central finite difference of the embedding along the frame direction
/// `V_j = P^1/2 B_j P^1/2` (the frame in which the Jacobian is expressed).
fn fd_column(
    spec: &FrechetMapSpec,
    p: &SpdMatrix,
    basis: &SymBasis,
    j: usize,
    h: f64,
) -> Vec<f64> {
    let chart = Chart::new(p).unwrap();
    let direction = chart.push_tangent(&basis.element(j));
    let plus = embed(spec, &exp_map(p, &direction.scale(h)).unwrap()).unwrap();
    let minus = embed(spec, &exp_map(p, &direction.scale(-h)).unwrap()).unwrap();
    (0..spec.num_refs())
        .map(|i| (plus.coords()[i] - minus.coords()[i]) / (2.0 * h))
        .collect()
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = seeded(201);
    let h = 1e-5;
    for trial in 0..20 {
        let n = if trial % 2 == 0 { 2 } else { 3 };
        let l = 1 + (trial % 4);
        let p_order = if trial % 3 == 0 { 1 } else { 2 };
        let refs: Vec<_> = (0..l).map(|_| random_spd(n, 0.6, &mut rng)).collect();
        let spec = FrechetMapSpec::new(refs, p_order).unwrap();
        let foot = random_spd(n, 0.6, &mut rng);
        let basis = SymBasis::new(n);
        let jac = match jacobian(&spec, &foot, &basis) {
            Ok(j) => j,
            // Random foot point landed on a reference (p = 1); astronomically
            // unlikely, but skip rather than fail.
            Err(_) => continue,
        };
        for j in 0..basis.len() {
            let fd = fd_column(&spec, &foot, &basis, j, h);
            for i in 0..spec.num_refs() {
                let analytic = jac[(i, j)];
                let err = (fd[i] - analytic).abs() / analytic.abs().max(1.0);
                assert!(
                    err < 1e-5,
                    "trial {trial}: J[{i}][{j}] = {analytic} vs FD {fd}",
                    fd = fd[i]
                );
            }
        }
    }
}

#[test]
fn jacobian_chain_rule_single_reference() {
    // l = 1, p = 2: the Jacobian applied to the frame coordinates of a
    // tangent V must equal d/dt at 0 of d(R_1, exp_P(tV))^2.
    let mut rng = seeded(202);
    for _ in 0..10 {
        let n = 2;
        let r = random_spd(n, 0.6, &mut rng);
        let spec = FrechetMapSpec::new(vec![r.clone()], 2).unwrap();
        let foot = random_spd(n, 0.6, &mut rng);
        let v = random_tangent(n, 0.5, &mut rng);
        let basis = SymBasis::new(n);
        let jac = jacobian(&spec, &foot, &basis).unwrap();

        // Frame coordinates of V: Frobenius coords of P^-1/2 V P^-1/2.
        let chart = Chart::new(&foot).unwrap();
        let v_coords = basis.coords(&chart.pull_tangent(&v));
        let analytic = (jac * v_coords)[0];

        let h = 1e-6;
        let sq = |x: &SpdMatrix| {
            let d = dist_affine(&r, x).unwrap();
            d * d
        };
        let fd = (sq(&exp_map(&foot, &v.scale(h)).unwrap())
            - sq(&exp_map(&foot, &v.scale(-h)).unwrap()))
            / (2.0 * h);
        assert!(
            (analytic - fd).abs() / fd.abs().max(1.0) < 1e-4,
            "directional derivative {analytic} vs FD {fd}"
        );
    }
}

#[test]
fn local_rank_is_full_for_generic_references_matching_m() {
    // n = 2 has m = 3; three generic references almost surely give rank 3.
    let mut rng = seeded(203);
    let mut full = 0;
    for _ in 0..20 {
        let refs: Vec<_> = (0..3).map(|_| random_spd(2, 0.8, &mut rng)).collect();
        let spec = FrechetMapSpec::new(refs, 2).unwrap();
        let foot = random_spd(2, 0.8, &mut rng);
        if local_rank(&spec, &foot, DEFAULT_RANK_TOL).unwrap() == 3 {
            full += 1;
        }
    }
    assert!(full >= 19, "generic rank deficiency in {} of 20 trials", 20 - full);
}

#[test]
fn local_rank_agrees_with_explicit_log_matrix() {
    // The rank must equal the rank of the stacked chart logs of the
    // references, assembled here independently entry-by-entry against
    // explicit basis elements.
    let mut rng = seeded(204);
    for _ in 0..10 {
        let n = 3;
        let l = 4;
        let refs: Vec<_> = (0..l).map(|_| random_spd(n, 0.6, &mut rng)).collect();
        let spec = FrechetMapSpec::new(refs.clone(), 2).unwrap();
        let foot = random_spd(n, 0.6, &mut rng);
        let basis = SymBasis::new(n);

        let chart = Chart::new(&foot).unwrap();
        let mut stacked = DMatrix::zeros(l, basis.len());
        for (i, r) in refs.iter().enumerate() {
            let w = chart.log(r).unwrap();
            for j in 0..basis.len() {
                stacked[(i, j)] = (w.clone() * basis.element(j)).trace();
            }
        }
        let singular = stacked.singular_values();
        let max = singular.iter().copied().fold(0.0_f64, f64::max);
        let explicit_rank = singular
            .iter()
            .filter(|&&s| s > DEFAULT_RANK_TOL * max)
            .count();

        assert_eq!(
            local_rank(&spec, &foot, DEFAULT_RANK_TOL).unwrap(),
            explicit_rank
        );
    }
}

#[test]
fn dataset_embedding_cost_is_exactly_n_times_l() {
    let mut rng = seeded(205);
    let refs: Vec<_> = (0..3).map(|_| random_spd(2, 0.5, &mut rng)).collect();
    let spec = FrechetMapSpec::new(refs, 2).unwrap();
    let data: Vec<_> = (0..17).map(|_| random_spd(2, 0.5, &mut rng)).collect();
    let before = counters::dist_affine_calls();
    embed_dataset(&spec, &data).unwrap();
    let after = counters::dist_affine_calls();
    assert_eq!(after - before, (17 * 3) as u64);
}

#[test]
fn order_one_map_is_one_lipschitz_on_samples() {
    let mut rng = seeded(206);
    let refs: Vec<_> = (0..4).map(|_| random_spd(3, 0.7, &mut rng)).collect();
    let spec = FrechetMapSpec::new(refs, 1).unwrap();
    let data: Vec<_> = (0..30).map(|_| random_spd(3, 0.7, &mut rng)).collect();
    let stats = distortion_stats(&spec, &data, 200, 42).unwrap();
    assert!(
        stats.lipschitz_bound_ok,
        "order-1 ratio {} exceeded 1",
        stats.max_ratio_inf
    );
    assert!(stats.max_ratio_inf <= 1.0 + 1e-9);
    assert!(stats.max_ratio_inf > 0.0);
}

#[test]
fn order_two_map_respects_ball_bound_on_samples() {
    let mut rng = seeded(207);
    let refs: Vec<_> = (0..3).map(|_| random_spd(3, 0.4, &mut rng)).collect();
    let spec = FrechetMapSpec::new(refs, 2).unwrap();
    let data: Vec<_> = (0..25).map(|_| random_spd(3, 0.4, &mut rng)).collect();
    let stats = distortion_stats(&spec, &data, 100, 43).unwrap();
    assert!(
        stats.lipschitz_bound_ok,
        "order-2 ratio {} exceeded bound {}",
        stats.max_ratio_inf,
        stats.bound
    );
    assert!(stats.radius_delta > 0.0);
    assert_eq!(stats.pairs_evaluated, 100);
}
