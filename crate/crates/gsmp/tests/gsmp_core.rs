mod common;

use gsmp::gsmp::*;
use gsmp::spectral_sets::PotentialV;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_band_pair() -> GsmpBlockPair {
    GsmpBlockPair::new(vec![2f64.sqrt(), 0.5], vec![0.0, 0.0]).unwrap()
}

fn random_pair(g: usize, rng: &mut ChaCha8Rng) -> GsmpBlockPair {
    GsmpBlockPair::new(
        (0..=g).map(|_| rng.random_range(0.3..1.5)).collect(),
        (0..=g).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

#[test]
fn blocks_by_hand() {
    let (a, b) = build_blocks(&two_band_pair(), &[0.0]).unwrap();
    let s = 2f64.sqrt();
    assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, s, 0.5]));
    assert_eq!(b, DMatrix::zeros(2, 2));
    let ones = GsmpBlockPair::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
    let (_, b) = build_blocks(&ones, &[0.0]).unwrap();
    assert_eq!(b, DMatrix::from_element(2, 2, 1.0));
}

#[test]
fn diagonal_blocks_are_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let g = rng.random_range(0..5);
        let poles: Vec<f64> = (0..g).map(|i| i as f64 - 1.5).collect();
        let (_, b) = build_blocks(&random_pair(g, &mut rng), &poles).unwrap();
        assert_eq!(b, b.transpose());
        for k in 0..g {
            assert!(b[(k, k)] - poles[k] == b[(k, k)] - poles[k]);
        }
    }
}

#[test]
fn assembled_window_shape() {
    let w = GsmpWindow::constant(&two_band_pair(), &[0.0], 2).unwrap();
    let m = assemble_window(&w, -1, 2).unwrap();
    assert_eq!(m.dim(), 6);
    let d = m.to_dense();
    assert_eq!(d, d.transpose());
    for i in 0..6usize {
        for j in 0..6usize {
            if i.abs_diff(j) > 2 {
                assert_eq!(d[(i, j)], 0.0);
            }
        }
    }
    // genus zero gives an ordinary Jacobi matrix
    let bl = (0..4).map(|i| GsmpBlockPair::new(vec![1.0 + i as f64], vec![0.5]).unwrap()).collect();
    let w = GsmpWindow::new(vec![], 0, bl).unwrap();
    let d = assemble_window(&w, 0, 4).unwrap().to_dense();
    for n in 0..4 {
        assert!((d[(n, n)] - 0.5 * (1.0 + n as f64)).abs() < 1e-15);
        if n > 0 {
            assert_eq!(d[(n - 1, n)], 1.0 + n as f64);
        }
    }
}

#[test]
fn lambda_closed_form_genus_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let pair = random_pair(1, &mut rng);
        let c = rng.random_range(-1.0..1.0);
        let (p0, p1, q0, q1) = (pair.p[0], pair.p[1], pair.q[0], pair.q[1]);
        let want = p0 * p0 / p1 + q0 * q0 * p1 + p0 * q0 * (c - p1 * q1) / p1;
        let got = lambda_iso(&pair, &[c], 1).unwrap();
        assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()));
        assert_eq!(lambda_sharp(&pair, &pair, &[c], 1).unwrap(), got);
    }
    assert!((lambda_iso(&two_band_pair(), &[0.0], 1).unwrap() - 4.0).abs() < 1e-14);
    assert!(lambda_all(&GsmpBlockPair::new(vec![1.0], vec![0.0]).unwrap(), &[]).unwrap().is_empty());
}

#[test]
fn lambda_sign_flip_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for g in 1..=4 {
        let poles: Vec<f64> = (0..g).map(|i| i as f64 * 0.7 - 1.0).collect();
        let pair = random_pair(g, &mut rng);
        let mut flipped = pair.clone();
        let m = rng.random_range(0..g);
        flipped.p[m] = -flipped.p[m];
        flipped.q[m] = -flipped.q[m];
        for k in 1..=g {
            let (a, b) = (lambda_iso(&pair, &poles, k).unwrap(), lambda_iso(&flipped, &poles, k).unwrap());
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }
}

#[test]
fn class_certification() {
    let w = GsmpWindow::constant(&two_band_pair(), &[0.0], 4).unwrap();
    let r = check_gsmp_class(&w, CLASS_MARGIN);
    assert!(r.certified && (r.min_lambda_sharp - 4.0).abs() < 1e-13);
    let mut bad = w.clone();
    bad.block_mut(1).unwrap().p[1] = 1e-12;
    let r = check_gsmp_class(&bad, CLASS_MARGIN);
    assert!(!r.certified && r.argmin_pg == 1);
    let g0 = GsmpWindow::new(vec![], 0, vec![GsmpBlockPair::new(vec![1.0], vec![0.0]).unwrap(); 3]).unwrap();
    assert!(check_gsmp_class(&g0, CLASS_MARGIN).certified);
}

#[test]
fn factors_have_unit_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let z = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let (c, p, q) = (rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let f = bp_factor_finite(z, c, p, q).unwrap();
        assert!((f.determinant() - 1.0).norm() < 1e-12);
        let h = bp_factor_infinity(z, p.abs() + 0.1, q).unwrap();
        assert!((h.determinant() - 1.0).norm() < 1e-12);
        assert!((h.trace() - (z - (p.abs() + 0.1) * q) / (p.abs() + 0.1)).norm() < 1e-12);
    }
    let id = bp_factor_finite(Complex64::new(0.3, 1.0), 0.0, 0.0, 0.0).unwrap();
    assert!((id - nalgebra::Matrix2::identity()).norm() < 1e-15);
    let far = bp_factor_finite(Complex64::new(1e12, 0.0), 0.0, 0.7, 0.2).unwrap();
    assert!((far - nalgebra::Matrix2::identity()).norm() < 1e-10);
    let j = bp_factor_infinity(Complex64::new(0.0, 0.0), 1.0, 0.0).unwrap();
    assert!((j - nalgebra::Matrix2::new(0.0, -1.0, 1.0, 0.0).map(|x: f64| Complex64::new(x, 0.0))).norm() < 1e-15);
}

#[test]
fn transfer_matrix_trace() {
    let v = PotentialV::new(2.0, 0.0, vec![(4.0, 0.0)]).unwrap();
    let t = transfer_matrix(Complex64::new(3.0, 0.0), &two_band_pair(), &[0.0]).unwrap();
    assert!((t.trace() - 14.0 / 3.0).norm() < 1e-13);
    let g0 = GsmpBlockPair::new(vec![0.8], vec![0.3]).unwrap();
    let z = Complex64::new(0.2, 0.9);
    let t = transfer_matrix(z, &g0, &[]).unwrap();
    assert!((t.trace() - (z - 0.8 * 0.3) / 0.8).norm() < 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let zs: Vec<Complex64> = (0..50).map(|_| Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))).collect();
    assert!(trace_is_potential(&two_band_pair(), &[0.0], &v, &zs).unwrap() < 1e-10);
    let off = GsmpBlockPair::new(vec![1.0, 0.5], vec![0.3, 0.0]).unwrap();
    assert!(trace_is_potential(&off, &[0.0], &v, &zs).unwrap() > 1e-3);
    for &z in &zs {
        let t = transfer_matrix(z, &random_pair(2, &mut rng), &[-0.5, 0.5]).unwrap();
        assert!((t.determinant() - 1.0).norm() < 1e-12);
    }
}

#[test]
fn transfer_asymptotics_give_normalization() {
    let (v, pts) = common::torus_points(2, 3, 1);
    for pt in &pts {
        let pair = pt.pair();
        assert!((v.lambda0 * pair.pg() - 1.0).abs() < 1e-12);
        assert!((c0_of_pair(&pair) - v.c0).abs() < 1e-10);
    }
}

#[test]
fn residues() {
    assert!((residue_lambda(&two_band_pair(), &[0.0], 1).unwrap() - 4.0).abs() < 1e-14);
    let num = numeric_residue(&two_band_pair(), &[0.0], 1, 1e-6).unwrap();
    assert!((num - 4.0).abs() / 4.0 < 1e-4);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let g = rng.random_range(1..4);
        let poles: Vec<f64> = (0..g).map(|i| i as f64 - 1.0 + rng.random_range(-0.2..0.2)).collect();
        let pair = random_pair(g, &mut rng);
        for k in 1..=g {
            assert!(residue_consistency(&pair, &poles, k).unwrap() < 1e-10);
        }
    }
}

#[test]
fn alternative_q_g() {
    assert!(q_g_alternative(&two_band_pair(), &[0.0], 0.0).unwrap() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let pair = random_pair(1, &mut rng);
        let c = rng.random_range(-1.0..1.0);
        // on the surface c0 = -lambda0 sum_{j<=g} p_j q_j with lambda0 = 1 / p_g
        assert!(q_g_alternative(&pair, &[c], c0_of_pair(&pair)).unwrap() < 1e-10);
    }
    let g0 = GsmpBlockPair::new(vec![1.0], vec![0.4]).unwrap();
    assert!(q_g_alternative(&g0, &[], -0.4).unwrap() < 1e-15);
}

/// Dense oracle: max-norm of `(c - A) f - e_n` over the whole window, with
/// `f` zero-padded.
fn dense_defect(w: &GsmpWindow, c: f64, f: &SparseColumn, n: i64) -> f64 {
    let m = assemble_window(w, w.lo(), w.hi()).unwrap().to_dense();
    let dim = m.nrows();
    let off = w.lo() * w.block_size() as i64;
    let x = DVector::from_fn(dim, |i, _| f.get(i as i64 + off));
    let mut e = DVector::zeros(dim);
    e[(n - off) as usize] = 1.0;
    (DMatrix::identity(dim, dim) * c * &x - &m * &x - e).amax()
}

#[test]
fn resolvent_columns_match_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for g in 1..=3 {
        let (v, pts) = common::torus_points(g, 3, 2);
        for pt in &pts {
            let w = common::perturbed_window(pt, &v, 30, 0.05, rng.random());
            for k in 1..=g {
                let j = 2;
                let f = resolvent_column_closed_form(&w, k, j).unwrap();
                assert!(f.residual < 1e-12);
                let n = w.scalar(j, k - 1);
                assert!(dense_defect(&w, w.poles()[k - 1], &f, n) < 1e-11, "g={g} k={k}");
                let loc = resolvent_apply_local(&w, k, n).unwrap();
                for m in f.start..f.end() {
                    assert!((f.get(m) - loc.get(m)).abs() < 1e-10);
                }
                let loc = resolvent_apply_local(&w, k, w.scalar(j, g)).unwrap();
                assert!(dense_defect(&w, w.poles()[k - 1], &loc, w.scalar(j, g)) < 1e-11);
                let (h_last, h_k, h0_k) = last_index_closed_form(&w, k, j + 1).unwrap();
                assert!((loc.get(w.scalar(j, g)) - h_last).abs() < 1e-10);
                assert!((loc.get(w.scalar(j, k - 1)) - h_k).abs() < 1e-10);
                assert!((loc.get(w.scalar(j + 1, k - 1)) - h0_k).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn two_band_resolvent_column() {
    let w = GsmpWindow::constant(&two_band_pair(), &[0.0], 4).unwrap();
    let f = resolvent_column_closed_form(&w, 1, 0).unwrap();
    assert!((f.get(w.scalar(-1, 0)) - 0.25).abs() < 1e-14);
    assert_eq!(f.end() - f.start, 6);
}

#[test]
fn magic_formula_on_periodic_windows() {
    let (v, w) = common::periodic_window(1, 8);
    let va = assemble_v_of_a(&w, &v, -4, 4).unwrap();
    for j in -3..3 {
        assert!((va.v(j).unwrap() - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!(va.w(j).unwrap().amax() < 1e-12);
    }
    assert!(magic_residual(&va, -3, 3).unwrap().total < 1e-9);
    let mut bumped = w.clone();
    bumped.block_mut(0).unwrap().p[0] += 0.1;
    let vb = assemble_v_of_a(&bumped, &v, -4, 4).unwrap();
    assert!(magic_residual(&vb, -3, 3).unwrap().total > 0.01);

    let free = GsmpWindow::new(vec![], -6, vec![GsmpBlockPair::new(vec![1.0], vec![0.0]).unwrap(); 12]).unwrap();
    let vf = assemble_v_of_a(&free, &PotentialV::identity(), -3, 3).unwrap();
    assert!(magic_residual(&vf, -2, 2).unwrap().total < 1e-15);

    for g in 2..=3 {
        let (v, w) = common::periodic_window(g, 8);
        let va = assemble_v_of_a(&w, &v, -4, 4).unwrap();
        assert!(magic_residual(&va, -3, 3).unwrap().total < 1e-9);
    }
}

#[test]
fn diagonal_entry_matches_closed_form() {
    // <V(A) e_{-1}, e_{-1}> = lambda0 A_{-1,-1} + c0 + sum_k lambda_k (h_{-1})_g
    let (v, pts) = common::torus_points(2, 2, 4);
    let w = common::perturbed_window(&pts[1], &v, 12, 0.05, 3);
    let va = assemble_v_of_a(&w, &v, -2, 2).unwrap();
    let n = w.scalar(-1, 2);
    let mut want = v.lambda0 * w.entry(n, n).unwrap() + v.c0;
    for (k, &c) in w.poles().iter().enumerate() {
        let lk = v.poles.iter().find(|p| p.1 == c).unwrap().0;
        want += lk * last_index_closed_form(&w, k + 1, 0).unwrap().0;
    }
    assert!((va.entry(n, n).unwrap() - want).abs() < 1e-10);
}

#[test]
fn fibers() {
    let s = 2f64.sqrt();
    for theta in [0.0, 0.7, 2.0] {
        let m = floquet_fiber(&two_band_pair(), &[0.0], theta).unwrap();
        let e = Complex64::from_polar(1.0, theta);
        assert!((m[(0, 0)]).norm() < 1e-15);
        assert!((m[(0, 1)] - s * e.conj()).norm() < 1e-15);
        assert!((m[(1, 0)] - s * e).norm() < 1e-15);
        assert!((m[(1, 1)] - theta.cos()).norm() < 1e-15);
    }
    let ev0 = fiber_spectrum(&two_band_pair(), &[0.0], 0.0).unwrap();
    let evpi = fiber_spectrum(&two_band_pair(), &[0.0], std::f64::consts::PI).unwrap();
    assert!((ev0[0] + 1.0).abs() < 1e-14 && (ev0[1] - 2.0).abs() < 1e-14);
    assert!((evpi[0] + 2.0).abs() < 1e-14 && (evpi[1] - 1.0).abs() < 1e-14);
    let v = PotentialV::new(2.0, 0.0, vec![(4.0, 0.0)]).unwrap();
    assert!(fiber_magic_check(&two_band_pair(), &[0.0], &v, &theta_grid(64)).unwrap() < 1e-12);
    let off = GsmpBlockPair::new(vec![1.0, 0.5], vec![0.3, 0.0]).unwrap();
    assert!(fiber_magic_check(&off, &[0.0], &v, &theta_grid(64)).unwrap() > 0.01);
    let edges = fiber_band_edges(&two_band_pair(), &[0.0]).unwrap();
    for (a, b) in edges.iter().zip([-2.0, -1.0, 1.0, 2.0]) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn window_json_round_trip() {
    let w = GsmpWindow::constant(&two_band_pair(), &[0.0], 2).unwrap().with_trusted(-1, 1).unwrap();
    let text = serde_json::to_string(&w).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["blocks"][0]["j"].is_i64() && v["blocks"][0]["p"].is_array());
    let back: GsmpWindow = serde_json::from_str(&text).unwrap();
    assert_eq!(back, w);
}
