mod common;

use gsmp::gsmp::{fiber_band_edges, fiber_magic_check, theta_grid, GsmpBlockPair};
use gsmp::isospectral::*;
use gsmp::spectral_sets::PotentialV;

#[test]
fn two_band_base_point() {
    let (_, v) = common::two_band();
    let b = base_point(&v).unwrap();
    assert!((b.p[0] - 2f64.sqrt()).abs() < 1e-15 && b.p[1] == 0.5);
    assert_eq!(b.q, vec![0.0, 0.0]);
    assert!(b.residual < 1e-15);
}

#[test]
fn free_base_point() {
    let b = base_point(&PotentialV::identity()).unwrap();
    assert_eq!((b.p.clone(), b.q.clone()), (vec![1.0], vec![0.0]));
    let s = sample_torus(&PotentialV::identity(), 3, 1, 1e-13).unwrap();
    assert_eq!(s.points.len(), 3);
}

#[test]
fn pinned_solve_matches_quadratic() {
    // g = 1, q0 = 0.3: p1 = 1/2, q1 = -0.6 p0 and Lambda_1 = 2.18 p0^2 + 0.045 = 4.
    let (_, v) = common::two_band();
    let pt = solve_iso_point(&v, &IsoSeed::pin_q(vec![0.3], vec![1.0]), 1e-14, 50).unwrap();
    let p0 = ((4.0 - 0.045) / 2.18f64).sqrt();
    assert!((pt.p[0] - p0).abs() < 1e-12);
    assert!((pt.p[1] - 0.5).abs() < 1e-15);
    assert!((pt.q[1] + 0.6 * p0).abs() < 1e-12);
    assert!(pt.residual < 1e-12);
}

#[test]
fn pinned_p_chart() {
    let (_, v) = common::potential(2);
    let b = base_point(&v).unwrap();
    let p = vec![b.p[0] * 0.95, b.p[1] * 0.97];
    let pt = solve_iso_point(&v, &IsoSeed::pin_p(p.clone(), vec![0.1, -0.1]), 1e-13, 100).unwrap();
    assert!(pt.residual < 1e-11);
    assert!((pt.p[0] - p[0]).abs() < 1e-15);
}

#[test]
fn bad_arguments() {
    let (_, v) = common::two_band();
    assert!(solve_iso_point(&v, &IsoSeed::pin_q(vec![0.0], vec![1.0]), 0.0, 10).is_err());
    assert!(solve_iso_point(&v, &IsoSeed::pin_q(vec![0.0, 1.0], vec![1.0]), 1e-12, 10).is_err());
    assert!(sample_torus(&v, 0, 1, 1e-13).is_err());
    let pair = GsmpBlockPair::new(vec![1.0], vec![0.0]).unwrap();
    assert!(iso_residuals(&pair, &v).is_err());
}

#[test]
fn torus_points_are_isospectral() {
    for g in 1..=4 {
        let (e, v) = common::potential(g);
        let s = sample_torus(&v, 6, 3, 1e-13).unwrap();
        assert_eq!(s.points.len(), 6, "g={g}: {:?}", s.failures);
        let mut want: Vec<f64> = e.bands().iter().flat_map(|&(a, b)| [a, b]).collect();
        want.sort_by(f64::total_cmp);
        for (pt, dev) in s.points.iter().zip(&s.magic_deviation) {
            assert!(pt.residual < 1e-11 && *dev < 1e-9);
            for r in iso_residuals(&pt.pair(), &v).unwrap() {
                assert!(r.abs() < 1e-11);
            }
            let edges = fiber_band_edges(&pt.pair(), &v.pole_positions()).unwrap();
            for (a, b) in edges.iter().zip(&want) {
                assert!((a - b).abs() < 1e-8, "g={g}: {edges:?} vs {want:?}");
            }
            assert!(pt.p[..g].iter().all(|&x| x > 0.0));
        }
        assert!(s.margin.iter().all(|&m| m > 0.0));
    }
}

#[test]
fn sampling_is_deterministic() {
    let (_, v) = common::potential(3);
    let a = sample_torus(&v, 5, 11, 1e-13).unwrap();
    let b = sample_torus(&v, 5, 11, 1e-13).unwrap();
    assert_eq!(a, b);
    let c = sample_torus(&v, 5, 12, 1e-13).unwrap();
    assert_ne!(a.points[1..], c.points[1..]);
}

#[test]
fn analytic_jacobian_matches_differences() {
    for g in 1..=4 {
        let (v, pts) = common::torus_points(g, 3, 5);
        for pt in &pts {
            let a = iso_jacobian(&pt.pair(), &v, JacobianMode::Analytic).unwrap();
            let f = iso_jacobian(&pt.pair(), &v, JacobianMode::FiniteDifference).unwrap();
            assert!((&a.matrix - &f.matrix).amax() < 1e-6 * (1.0 + a.norm()));
            assert_eq!(a.dp().ncols(), g);
            assert_eq!(a.dq().ncols(), g);
        }
    }
}

#[test]
fn off_surface_points_fail_the_fiber_check() {
    let (_, v) = common::potential(2);
    let mut pair = base_point(&v).unwrap().pair();
    pair.p[0] *= 1.1;
    assert!(fiber_magic_check(&pair, &v.pole_positions(), &v, &theta_grid(32)).unwrap() > 1e-3);
}

#[test]
fn periodic_windows() {
    let (v, pts) = common::torus_points(2, 3, 1);
    let w = build_periodic(&pts[1], &v, 5).unwrap();
    assert_eq!((w.lo(), w.hi()), (-5, 5));
    for j in -5..5 {
        assert_eq!(w.block(j).unwrap(), &pts[1].pair());
    }
    let bad = IsoPoint { p: vec![1.0, 0.0, 0.5], q: vec![0.0; 3], residual: 0.0 };
    assert!(build_periodic(&bad, &v, 3).is_err());
}

#[test]
fn point_json_round_trip() {
    let (_, v) = common::two_band();
    let b = base_point(&v).unwrap();
    let back: IsoPoint = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
    assert_eq!(back, b);
}
