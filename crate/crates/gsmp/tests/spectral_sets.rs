mod common;

use gsmp::spectral_sets::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `2 (P_b + P_a) / (P_b - P_a)` with `P_a = prod (z - a_j)`, `P_b = prod (z - b_j)`
/// over the right and left band edges: equals 2 at right edges, -2 at left
/// edges and its preimage of `[-2, 2]` is exactly `E`.
fn closed_form(bands: &[(f64, f64)], z: Complex64) -> Complex64 {
    let pa: Complex64 = bands.iter().map(|&(_, r)| z - r).product();
    let pb: Complex64 = bands.iter().map(|&(l, _)| z - l).product();
    2.0 * (pb + pa) / (pb - pa)
}

#[test]
fn interval_validation() {
    let e = validate_interval_system(&[(-2.0, 2.0)]).unwrap();
    assert_eq!(e.genus(), 0);
    let e = validate_interval_system(&[(-2.0, 2.0), (-1.0, 1.0)]).unwrap();
    assert_eq!(e.genus(), 1);
    assert_eq!(e.gaps(), &[(-1.0, 1.0)]);
    assert!(validate_interval_system(&[(-2.0, 2.0), (-1.0, 3.0)]).is_err());
    assert!(validate_interval_system(&[(2.0, -2.0)]).is_err());
    assert!(validate_interval_system(&[(-2.0, 2.0), (0.5, 1.0), (-1.0, 0.7)]).is_err());
    assert!(validate_interval_system(&[]).is_err());
}

#[test]
fn interval_json_round_trip() {
    let e: IntervalSystem = serde_json::from_str(r#"{"outer":[-2,2],"gaps":[[-1,1]]}"#).unwrap();
    assert_eq!(e.bands(), vec![(-2.0, -1.0), (1.0, 2.0)]);
    let back: IntervalSystem = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
    assert_eq!(back, e);
    assert!(serde_json::from_str::<IntervalSystem>(r#"{"outer":[-2,2],"gaps":[[-1,3]]}"#).is_err());
}

#[test]
fn identity_potential_for_one_band() {
    let e = IntervalSystem::from_bands(&[(-2.0, 2.0)]).unwrap();
    let v = solve_potential(&e, 1e-13, 100).unwrap();
    assert!((v.lambda0 - 1.0).abs() < 1e-12 && v.c0.abs() < 1e-12 && v.poles.is_empty());
    let (val, der) = eval_potential(&v, Complex64::new(0.5, 0.0)).unwrap();
    assert!((val - 0.5).norm() < 1e-12 && (der - 1.0).norm() < 1e-12);
}

#[test]
fn two_band_potential() {
    let (e, _) = common::two_band();
    let v = solve_potential(&e, 1e-13, 100).unwrap();
    let got = [v.lambda0, v.c0, v.poles[0].0, v.poles[0].1];
    for (a, b) in got.iter().zip([2.0, 0.0, 4.0, 0.0]) {
        assert!((a - b).abs() < 1e-10, "{got:?}");
    }
}

#[test]
fn potential_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for g in 0..=4 {
        let bands = common::bands(g);
        let (_, v) = common::potential(g);
        for _ in 0..50 {
            let z = Complex64::new(rng.random_range(-4.0..4.0), rng.random_range(-2.0..2.0));
            let (val, _) = eval_potential(&v, z).unwrap();
            let want = closed_form(&bands, z);
            assert!((val - want).norm() / (1.0 + want.norm()) < 1e-10, "g={g} z={z}");
        }
        for &(l, c) in &v.poles {
            assert!(l > 0.0);
            assert!(v.pole_positions().contains(&c));
        }
    }
}

#[test]
fn eval_by_hand() {
    let v = PotentialV::new(2.0, 0.0, vec![(4.0, 0.0)]).unwrap();
    let (val, der) = eval_potential(&v, Complex64::new(2.0, 0.0)).unwrap();
    assert!((val - 2.0).norm() < 1e-15 && (der - 3.0).norm() < 1e-15);
    assert!(eval_potential(&v, Complex64::new(0.0, 0.0)).is_err());
}

#[test]
fn herglotz_and_band_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for g in 1..=4 {
        let (e, v) = common::potential(g);
        for _ in 0..100 {
            let z = Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(1e-3..3.0));
            assert!(eval_potential(&v, z).unwrap().0.im > 0.0);
        }
        for (l, r) in e.bands() {
            for i in 1..50 {
                let x = l + (r - l) * i as f64 / 50.0;
                assert!(v.eval_real(x).unwrap().1 > 0.0);
            }
            assert!((v.eval_real(l).unwrap().0 + 2.0).abs() < 1e-9);
            assert!((v.eval_real(r).unwrap().0 - 2.0).abs() < 1e-9);
        }
    }
}

#[test]
fn translation_covariance() {
    let (e, v) = common::potential(1);
    for t in [5.0, -3.25] {
        let vt = solve_potential(&e.translated(t), 1e-13, 100).unwrap();
        let want = v.translated(t);
        assert!((vt.lambda0 - want.lambda0).abs() < 1e-10);
        assert!((vt.c0 - want.c0).abs() < 1e-9);
        for (a, b) in vt.poles.iter().zip(&want.poles) {
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-10);
        }
    }
}

#[test]
fn preimages() {
    let v = PotentialV::identity();
    assert_eq!(potential_preimage(&v, 0.3).unwrap(), vec![0.3]);
    let v = PotentialV::new(2.0, 0.0, vec![(4.0, 0.0)]).unwrap();
    let x = potential_preimage(&v, 0.0).unwrap();
    assert!((x[0] + 2f64.sqrt()).abs() < 1e-14 && (x[1] - 2f64.sqrt()).abs() < 1e-14);
    let x = potential_preimage(&v, 2.0).unwrap();
    assert!((x[0] + 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
}

#[test]
fn verification_report() {
    let (e, v) = common::two_band();
    assert!(verify_potential(&v, &e, 1000).max_violation <= 1e-12);
    let r = verify_potential(&PotentialV::identity(), &e, 1000);
    assert!(r.max_violation > 0.5 && r.worst_x > -1.0 && r.worst_x < 1.0);
    let one = IntervalSystem::from_bands(&[(-2.0, 2.0)]).unwrap();
    assert!(verify_potential(&PotentialV::identity(), &one, 1000).max_violation <= 1e-12);
}

#[test]
fn potential_json_shape() {
    let v = PotentialV::new(2.0, 0.0, vec![(4.0, 0.0)]).unwrap();
    let s = serde_json::to_value(&v).unwrap();
    assert_eq!(s["lambda0"], 2.0);
    assert_eq!(s["poles"][0][0], 4.0);
    assert!(PotentialV::new(-1.0, 0.0, vec![]).is_err());
}
