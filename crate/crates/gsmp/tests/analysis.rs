mod common;

use gsmp::analysis::*;
use gsmp::flow::{extract_jacobi, flow_j_fast, flow_run, FlowMode};
use gsmp::gsmp::{assemble_v_of_a, assemble_window, block_decompose_v, GsmpBlockPair, GsmpWindow};
use gsmp::spectral_sets::{IntervalSystem, PotentialV};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use gsmp::workbench::{BlockDelta, Perturbation};

fn genus_zero_window(seed: u64, blocks: usize) -> GsmpWindow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bl = (0..blocks)
        .map(|_| GsmpBlockPair::new(vec![rng.random_range(0.5..1.5)], vec![rng.random_range(-1.0..1.0)]).unwrap())
        .collect();
    GsmpWindow::new(vec![], -(blocks as i64) / 2, bl).unwrap()
}

#[test]
fn lanczos_is_identity_on_jacobi_input() {
    let w = genus_zero_window(3, 60);
    let j = lanczos_f(&w, 25).unwrap();
    for n in j.start..j.end() {
        let b = w.block(n).unwrap();
        assert!((j.a_at(n).unwrap() - b.p[0]).abs() < 1e-12, "a({n})");
        assert!((j.b_at(n).unwrap() - b.p[0] * b.q[0]).abs() < 1e-12, "b({n})");
    }
}

#[test]
fn periodic_two_band_coefficients_alternate() {
    let (_, v) = common::two_band();
    let pt = gsmp::isospectral::base_point(&v).unwrap();
    let w = gsmp::isospectral::build_periodic(&pt, &v, 40).unwrap();
    let trace = flow_run(&w, 20, FlowMode::Fast).unwrap();
    assert!(trace.stopped.is_none());
    let j = extract_jacobi(&trace).unwrap();
    for n in 0..20 {
        let a = if n % 2 == 0 { 1.5 } else { 0.5 };
        assert!((j.a_at(n).unwrap() - a).abs() < 1e-8);
        assert!(j.b_at(n).unwrap().abs() < 1e-8);
    }
    let f = lanczos_f(&w, 20).unwrap();
    for n in 0..20 {
        assert!((f.a_at(n).unwrap() - j.a_at(n).unwrap()).abs() < 1e-8);
        assert!((f.b_at(n).unwrap() - j.b_at(n).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn lanczos_commutes_with_flow() {
    for g in 1..=3 {
        let (v, pts) = common::torus_points(g, 2, 7);
        let w = common::perturbed_window(pts.last().unwrap(), &v, 40, 0.05, 11);
        let fa = lanczos_f(&w, 30).unwrap();
        let fj = lanczos_f(&flow_j_fast(&w).unwrap(), 30).unwrap();
        for n in -20..20 {
            assert!((fj.a_at(n).unwrap() - fa.a_at(n + 1).unwrap()).abs() < 1e-8, "g={g} a({n})");
            assert!((fj.b_at(n).unwrap() - fa.b_at(n + 1).unwrap()).abs() < 1e-8, "g={g} b({n})");
        }
    }
}

#[test]
fn resolvent_functions_agree_after_lanczos() {
    let (v, pts) = common::torus_points(2, 2, 5);
    let w = common::perturbed_window(&pts[1], &v, 60, 0.05, 1);
    let j = lanczos_f(&w, 60).unwrap();
    for z in [Complex64::new(0.3, 0.5), Complex64::new(-2.0, 0.5), Complex64::new(1.7, 0.5)] {
        for side in [Side::Plus, Side::Minus] {
            let rj = resolvent_r_jacobi(&j, z, side).unwrap();
            let ra = resolvent_r_gsmp(&w, z, side).unwrap();
            assert!((rj.value - ra.value).norm() < 1e-7, "{side:?} {z}");
        }
    }
}

#[test]
fn free_resolvent_closed_form() {
    let j = JacobiWindow::constant(-200, 400, 1.0, 0.0).unwrap();
    let r = resolvent_r_jacobi(&j, Complex64::new(0.0, 2.0), Side::Plus).unwrap();
    let expect = Complex64::new(0.0, 2f64.sqrt() - 1.0);
    assert!((r.value - expect).norm() < 1e-12);
    assert!(r.error_estimate < 1e-12);
}

#[test]
fn ks_functional_vanishes_on_periodic_points() {
    for g in 1..=3 {
        let (v, pts) = common::torus_points(g, 3, 2);
        for pt in &pts {
            let w = gsmp::isospectral::build_periodic(pt, &v, 6).unwrap();
            let va = assemble_v_of_a(&w, &v, -3, 3).unwrap();
            let h = ks_functional_h(&va, -3, 2).unwrap();
            assert!(h.values.iter().all(|x| x.abs() < 1e-10), "g={g} {:?}", h.values);
            assert!(ks_delta(&w, &v).unwrap().abs() < 1e-10);
            assert!(hs_residual_report(&va, -3, 3).unwrap().total() < 1e-20);
            assert!(coefficient_families(&w, &v).unwrap().iter().all(|x| *x < 1e-20));
        }
    }
}

#[test]
fn ks_summands_are_nonnegative() {
    let (v, pts) = common::torus_points(2, 2, 9);
    let w = common::perturbed_window(&pts[2], &v, 12, 0.1, 4);
    let va = assemble_v_of_a(&w, &v, -8, 8).unwrap();
    let d = block_decompose_v(&va, -8, 8).unwrap();
    assert!(d.triangularity_defect < 1e-10);
    let h = ks_functional_h_blocks(&d, -8, 7).unwrap();
    assert!(h.values.iter().all(|&x| x >= -1e-12));
    let h2 = ks_functional_h(&va, -8, 7).unwrap();
    for (a, b) in h.values.iter().zip(&h2.values) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn ks_delta_telescopes() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for g in 1..=3 {
        let (v, pts) = common::torus_points(g, 2, 13);
        let w = gsmp::isospectral::build_periodic(&pts[1], &v, 20).unwrap();
        let deltas = (1..7)
            .map(|j| BlockDelta {
                j,
                dp: (0..=g).map(|_| rng.random_range(-0.03..0.03)).collect(),
                dq: (0..=g).map(|_| rng.random_range(-0.03..0.03)).collect(),
            })
            .collect();
        let w = Perturbation::Custom { deltas }.apply_certified(&w).unwrap();
        let next = flow_j_fast(&w).unwrap();
        let ha = ks_functional_h(&assemble_v_of_a(&w, &v, -1, 16).unwrap(), 0, 15).unwrap();
        let hb = ks_functional_h(&assemble_v_of_a(&next, &v, -1, 16).unwrap(), 0, 15).unwrap();
        let delta = ks_delta_from(&next, &v).unwrap();
        assert!(ha.total() > 1e-4);
        assert!((ha.total() - hb.total() - delta).abs() < 1e-9, "g={g} {} {} {delta}", ha.total(), hb.total());
    }
}

#[test]
fn density_identity_and_cauchy() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for g in 1..=4 {
        let (_, v) = common::potential(g);
        for _ in 0..5 {
            let y = rng.random_range(0.1..1.9) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let sigma: Vec<f64> = (0..g).map(|_| rng.random_range(0.1..2.0)).collect();
            let chk = matrix_density_check(&v, y, &sigma).unwrap();
            assert!(chk.residual < 1e-10, "g={g} y={y} {}", chk.residual);
            let c: Vec<f64> = (0..g).map(|i| i as f64 + rng.random_range(0.0..0.5)).collect();
            let x: Vec<f64> = (0..g).map(|i| i as f64 + rng.random_range(0.6..0.9)).collect();
            assert!(cauchy_determinant_check(&c, &x).unwrap() < 1e-10);
        }
    }
}

#[test]
fn density_identity_single_pole_by_hand() {
    let v = PotentialV::new(1.0, 0.0, vec![(3.0, 0.5)]).unwrap();
    let chk = matrix_density_check(&v, 0.7, &[0.9]).unwrap();
    let x = chk.preimages[0];
    let hand = 0.9 / ((0.5 - x) * (0.5 - x)) / (3.0 / ((0.5 - x) * (0.5 - x)));
    assert!((chk.det - hand).abs() < 1e-12);
    assert!((chk.expected - 0.3).abs() < 1e-15);
}

#[test]
fn free_spectral_side_is_stable() {
    let e = IntervalSystem::from_bands(&[(-2.0, 2.0)]).unwrap();
    let mut terms = Vec::new();
    for n in [500usize, 1000, 2000] {
        let j = JacobiWindow::constant(0, n, 1.0, 0.0).unwrap();
        let s = spectral_data_jacobi(&j, n).unwrap();
        assert!((s.total_weight() - 1.0).abs() < 1e-12);
        assert!(s.eigenvalues.iter().all(|x| x.abs() < 2.0 + 1e-8));
        let side = ks_spectral_side(&s, &e, 5.0 / n as f64, (n as f64).powf(-0.5)).unwrap();
        assert_eq!(side.ev_term, 0.0);
        terms.push(side.ac_term);
    }
    // oracle: the same integral with the exact density sqrt(4 - x^2) / (2 pi)
    let m = 200_000;
    let exact: f64 = (0..m)
        .map(|i| {
            let x = -2.0 + 4.0 * (i as f64 + 0.5) / m as f64;
            let s = (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI);
            s.ln().abs() * (2.0 - x.abs()).sqrt() * 4.0 / m as f64
        })
        .sum();
    for t in &terms {
        assert!((t - terms[2]).abs() / terms[2] < 0.05);
        assert!((t - exact).abs() / exact < 0.01, "{t} vs {exact}");
    }
}

#[test]
fn gap_eigenvalue_adds_its_power() {
    let e = IntervalSystem::from_bands(&[(-2.0, 2.0)]).unwrap();
    let j = JacobiWindow::constant(0, 300, 1.0, 0.0).unwrap();
    let s = spectral_data_jacobi(&j, 300).unwrap();
    let base = ks_spectral_side(&s, &e, 5.0 / 300.0, 300f64.powf(-0.5)).unwrap();
    for d in [0.01, 0.3, 1.7] {
        let s2 = s.with_point_mass(2.0 + d, 0.01).unwrap();
        let side = ks_spectral_side(&s2, &e, 5.0 / 300.0, 300f64.powf(-0.5)).unwrap();
        assert!((side.ev_term - base.ev_term - d.powf(1.5)).abs() < 1e-12);
    }
}

#[test]
fn gsmp_spectral_data_matches_dense_truncation() {
    let (_, pts) = common::torus_points(2, 1, 3);
    let (_, v) = common::potential(2);
    let w = common::perturbed_window(&pts[1], &v, 10, 0.05, 8);
    let m = assemble_window(&w, 0, 10).unwrap();
    let s = spectral_data_gsmp(&w, m.dim()).unwrap();
    assert!((s.total_weight() - 1.0).abs() < 1e-12);
    // oracle: dense eigenvectors and the normalized p_0 start vector
    let dense = m.to_dense();
    let eig = dense.symmetric_eigen();
    let p0 = &w.block(0).unwrap().p;
    let norm: f64 = p0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut pairs: Vec<(f64, f64)> = (0..m.dim())
        .map(|k| {
            let c: f64 = p0.iter().enumerate().map(|(i, x)| x * eig.eigenvectors[(i, k)]).sum::<f64>() / norm;
            (eig.eigenvalues[k], c * c)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (k, (l, wt)) in pairs.iter().enumerate() {
        assert!((s.eigenvalues[k] - l).abs() < 1e-10);
        assert!((s.weights[k] - wt).abs() < 1e-10);
    }
}
