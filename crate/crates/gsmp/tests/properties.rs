use gsmp::analysis::{dist_eta, ks_summand, JacobiWindow};
use gsmp::flow::rotation_u;
use gsmp::gsmp::{bp_factor_finite, build_blocks, lambda_iso, GsmpBlockPair, GsmpWindow};
use gsmp::io::fmt17;
use gsmp::spectral_sets::PotentialV;
use gsmp::workbench::Perturbation;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn pair_and_poles() -> impl Strategy<Value = (GsmpBlockPair, Vec<f64>)> {
    (0usize..5).prop_flat_map(|g| {
        (
            prop::collection::vec(0.2f64..2.0, g + 1),
            prop::collection::vec(-1.5f64..1.5, g + 1),
            prop::collection::vec(-3.0f64..3.0, g),
        )
            .prop_map(|(p, q, c)| (GsmpBlockPair::new(p, q).unwrap(), c))
    })
}

proptest! {
    #[test]
    fn diagonal_block_is_symmetric((pair, poles) in pair_and_poles()) {
        let (a, b) = build_blocks(&pair, &poles).unwrap();
        prop_assert_eq!(&b, &b.transpose());
        let g = pair.genus();
        for r in 0..=g {
            for c in 0..=g {
                prop_assert_eq!(a[(r, c)], if r == g { pair.p[c] } else { 0.0 });
            }
            let shift = if r < g { poles[r] } else { 0.0 };
            prop_assert_eq!(b[(r, r)], pair.q[r] * pair.p[r] + shift);
        }
    }

    #[test]
    fn lambda_is_invariant_under_sign_flips((pair, poles) in pair_and_poles(), m in 0usize..4) {
        let g = pair.genus();
        prop_assume!(g > 0 && m < g);
        let mut poles = poles;
        poles.sort_by(f64::total_cmp);
        poles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        prop_assume!(poles.len() == g);
        let mut flipped = pair.clone();
        flipped.p[m] = -flipped.p[m];
        flipped.q[m] = -flipped.q[m];
        for k in 1..=g {
            let a = lambda_iso(&pair, &poles, k).unwrap();
            let b = lambda_iso(&flipped, &poles, k).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn factor_determinant_is_one(re in -5.0f64..5.0, im in -5.0f64..5.0, c in -3.0f64..3.0, p in -3.0f64..3.0, q in -3.0f64..3.0) {
        let z = Complex64::new(re, im);
        prop_assume!((z - c).norm() > 1e-3);
        let f = bp_factor_finite(z, c, p, q).unwrap();
        prop_assert!((f.determinant() - 1.0).norm() < 1e-9 * (1.0 + f.norm_squared()));
    }

    #[test]
    fn rotation_is_orthogonal(p in prop::collection::vec(-3.0f64..3.0, 1..7), last in 0.1f64..3.0) {
        let mut p = p;
        p.push(last);
        let n = p.len();
        let u = rotation_u(&p).unwrap();
        prop_assert!((u.transpose() * &u - DMatrix::identity(n, n)).amax() < 1e-13);
        let row = nalgebra::RowDVector::from_row_slice(&p) * &u;
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((row[0] - norm).abs() < 1e-12 * norm);
    }

    #[test]
    fn ks_summand_matches_entrywise_form(
        n in 1usize..5,
        seed in prop::collection::vec(-1.0f64..1.0, 48),
        diag in prop::collection::vec(0.2f64..3.0, 8),
    ) {
        let v = DMatrix::from_fn(n, n, |r, c| if r == c { diag[r] } else if r > c { seed[r * 4 + c] } else { 0.0 });
        let vn = DMatrix::from_fn(n, n, |r, c| if r == c { diag[4 + r] } else if r > c { seed[16 + r * 4 + c] } else { 0.0 });
        let w = DMatrix::from_fn(n, n, |r, c| seed[32 + r.min(c) * 4 + r.max(c)]);
        let s = ks_summand(&v, &w, &vn, 0).unwrap();
        let h = |d: f64| d * d - 1.0 - (d * d).ln();
        let mut want = 0.0;
        for r in 0..n {
            want += h(v[(r, r)]) + h(vn[(r, r)]);
            for c in 0..n {
                want += w[(r, c)] * w[(r, c)];
                if r > c {
                    want += v[(r, c)] * v[(r, c)] + vn[(r, c)] * vn[(r, c)];
                }
            }
        }
        prop_assert!(s >= 0.0);
        prop_assert!((s - 0.5 * want).abs() < 1e-12 * (1.0 + want));
    }

    #[test]
    fn potential_is_herglotz(
        l0 in 0.1f64..3.0,
        c0 in -2.0f64..2.0,
        res in prop::collection::vec(0.01f64..3.0, 0..4),
        re in -4.0f64..4.0,
        im in 1e-3f64..4.0,
    ) {
        let poles: Vec<(f64, f64)> = res.iter().enumerate().map(|(i, &l)| (l, i as f64 - 1.0)).collect();
        let v = PotentialV::new(l0, c0, poles).unwrap();
        let (val, _) = v.eval(Complex64::new(re, im)).unwrap();
        prop_assert!(val.im > 0.0);
        let (_, d) = v.eval_real(re + 0.5 + 1e-3).unwrap_or((0.0, 1.0));
        prop_assert!(d > 0.0);
    }

    #[test]
    fn fmt17_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn distance_is_a_pseudometric(
        a in prop::collection::vec(-2.0f64..2.0, 20),
        b in prop::collection::vec(-2.0f64..2.0, 20),
        c in prop::collection::vec(-2.0f64..2.0, 20),
        eta in 0.05f64..0.95,
    ) {
        let mk = |x: &[f64]| JacobiWindow::new(0, x[..10].iter().map(|t| t.abs() + 0.1).collect(), x[10..].to_vec()).unwrap();
        let (x, y, z) = (mk(&a), mk(&b), mk(&c));
        let dxy = dist_eta(&x, &y, eta).unwrap();
        prop_assert!((dxy - dist_eta(&y, &x, eta).unwrap()).abs() < 1e-15);
        prop_assert!(dxy <= dist_eta(&x, &z, eta).unwrap() + dist_eta(&z, &y, eta).unwrap() + 1e-12);
        prop_assert_eq!(dist_eta(&x, &x, eta).unwrap(), 0.0);
    }

    #[test]
    fn power_decay_touches_only_positive_blocks(seed in any::<u64>(), exponent in 0.5f64..2.0, amp in 0.0f64..0.1) {
        let pair = GsmpBlockPair::new(vec![2f64.sqrt(), 0.5], vec![0.0, 0.0]).unwrap();
        let w = GsmpWindow::constant(&pair, &[0.0], 8).unwrap();
        let pert = Perturbation::PowerDecay { exponent, amplitude: amp, seed };
        let a = pert.apply(&w).unwrap();
        prop_assert_eq!(&a, &pert.apply(&w).unwrap());
        for j in -8..8 {
            let (x, y) = (a.block(j).unwrap(), w.block(j).unwrap());
            let bound = amp * (j.max(1) as f64).powf(-exponent);
            for (u, v) in x.p.iter().chain(&x.q).zip(y.p.iter().chain(&y.q)) {
                if j < 1 {
                    prop_assert_eq!(u, v);
                } else {
                    prop_assert!((u - v).abs() <= bound * (1.0 + 1e-15));
                }
            }
        }
    }
}
