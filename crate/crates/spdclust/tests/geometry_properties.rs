//! Sampled invariants of the affine-invariant geometry: metric axioms,
//! invariance under congruence and inversion, exp/log round trips, geodesic
//! speed, and minimality of the fixed-determinant projection.

mod common;

use common::{random_invertible, random_spd, seeded};
use spdclust::spd::{
    dist_affine, dist_log_euclidean, exp_map, geodesic, log_map, project_to_det, spectral_apply,
    SpdMatrix, SpectralFn,
};

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn metric_axioms_sampled() {
    let mut rng = seeded(101);
    for n in [2usize, 3, 5] {
        for _ in 0..40 {
            let p = random_spd(n, 0.8, &mut rng);
            let q = random_spd(n, 0.8, &mut rng);
            let r = random_spd(n, 0.8, &mut rng);
            let pq = dist_affine(&p, &q).unwrap();
            let qp = dist_affine(&q, &p).unwrap();
            assert!(rel_err(pq, qp) < 1e-10, "symmetry violated: {pq} vs {qp}");
            let pr = dist_affine(&p, &r).unwrap();
            let qr = dist_affine(&q, &r).unwrap();
            assert!(
                pr <= pq + qr + 1e-9,
                "triangle inequality violated: {pr} > {pq} + {qr}"
            );
            assert!(pq > 0.0, "distinct random points at distance zero");
        }
    }
}

#[test]
fn affine_invariance_under_congruence() {
    let mut rng = seeded(102);
    for n in [2usize, 3, 4] {
        for _ in 0..25 {
            let p = random_spd(n, 0.7, &mut rng);
            let q = random_spd(n, 0.7, &mut rng);
            let a = random_invertible(n, &mut rng);
            let pa = SpdMatrix::new(a.transpose() * p.matrix() * &a).unwrap();
            let qa = SpdMatrix::new(a.transpose() * q.matrix() * &a).unwrap();
            let d = dist_affine(&p, &q).unwrap();
            let da = dist_affine(&pa, &qa).unwrap();
            assert!(
                rel_err(d, da) < 1e-8,
                "congruence by A changed the distance: {d} vs {da}"
            );
        }
    }
}

#[test]
fn inversion_is_an_isometry() {
    let mut rng = seeded(103);
    for _ in 0..25 {
        let p = random_spd(3, 0.8, &mut rng);
        let q = random_spd(3, 0.8, &mut rng);
        let p_inv = SpdMatrix::new(spectral_apply(p.matrix(), SpectralFn::Power(-1.0)).unwrap())
            .unwrap();
        let q_inv = SpdMatrix::new(spectral_apply(q.matrix(), SpectralFn::Power(-1.0)).unwrap())
            .unwrap();
        let d = dist_affine(&p, &q).unwrap();
        let di = dist_affine(&p_inv, &q_inv).unwrap();
        assert!(rel_err(d, di) < 1e-8, "inversion changed the distance");
    }
}

#[test]
fn exp_log_round_trips() {
    let mut rng = seeded(104);
    for n in [2usize, 3, 5] {
        for _ in 0..20 {
            let p = random_spd(n, 0.7, &mut rng);
            let q = random_spd(n, 0.7, &mut rng);
            let back = exp_map(&p, &log_map(&p, &q).unwrap()).unwrap();
            let err = (back.matrix() - q.matrix()).norm() / q.matrix().norm();
            assert!(err < 1e-8, "exp(log) round trip drifted by {err}");

            let s = random_spd(n, 0.6, &mut rng);
            let log = spectral_apply(s.matrix(), SpectralFn::Log).unwrap();
            let back = spectral_apply(&log, SpectralFn::Exp).unwrap();
            let err = (&back - s.matrix()).norm() / s.matrix().norm();
            assert!(err < 1e-8, "spectral log/exp round trip drifted by {err}");
        }
    }
}

#[test]
fn geodesic_has_constant_speed() {
    let mut rng = seeded(105);
    for _ in 0..15 {
        let p = random_spd(3, 0.7, &mut rng);
        let q = random_spd(3, 0.7, &mut rng);
        let d = dist_affine(&p, &q).unwrap();
        for t in [-1.0, 0.25, 0.5, 2.0] {
            let gt = geodesic(&p, &q, t).unwrap();
            let dt = dist_affine(&p, &gt).unwrap();
            assert!(
                rel_err(dt, t.abs() * d) < 1e-8,
                "speed violated at t={t}: {dt} vs {}",
                t.abs() * d
            );
        }
    }
}

#[test]
fn log_euclidean_equals_affine_for_commuting_pairs() {
    let mut rng = seeded(106);
    for _ in 0..20 {
        // Commuting pair: same eigenvectors, different eigenvalues.
        let p = random_spd(3, 0.7, &mut rng);
        let q = SpdMatrix::new(spectral_apply(p.matrix(), SpectralFn::Power(1.7)).unwrap())
            .unwrap();
        let affine = dist_affine(&p, &q).unwrap();
        let log_e = dist_log_euclidean(&p, &q).unwrap();
        assert!(
            rel_err(affine, log_e) < 1e-8,
            "commuting pair: {affine} vs {log_e}"
        );
    }
}

#[test]
fn projection_to_det_is_closest_on_submanifold() {
    let mut rng = seeded(107);
    let r = 1.0;
    for _ in 0..10 {
        let p = random_spd(3, 0.6, &mut rng);
        let projected = project_to_det(&p, r).unwrap();
        assert!(rel_err(projected.matrix().determinant(), r) < 1e-10);
        let d_proj = dist_affine(&p, &projected).unwrap();
        // Any other determinant-r point must be at least as far from P.
        for _ in 0..20 {
            let x = project_to_det(&random_spd(3, 0.6, &mut rng), r).unwrap();
            let d_x = dist_affine(&p, &x).unwrap();
            assert!(
                d_proj <= d_x + 1e-9,
                "projection not minimal: {d_proj} > {d_x}"
            );
        }
    }
}
