use bisep_core::funcalg::{is_biseparating_fn, is_strictly_separating, recover_pointwise, verify_pointwise};
use bisep_core::harness::{gen_conjugation, gen_pointwise, random_superop, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP};
use bisep_core::linalg::{self, matrix_unit, outer, re, Covector, Matrix, Scalar};
use bisep_core::sampling::{random_matrix, random_scalar, random_vector, rng_from_seed};
use bisep_core::separating::{is_biseparating, is_separating_exact, Status};
use bisep_core::structure::{gauge_normalize, recover_conjugation, residual_tolerance, verify_form};
use bisep_core::superop::{compose, conjugation_superop};
use bisep_core::{Field, FieldConfig};
use proptest::prelude::*;

fn cfg_for(complex: bool) -> FieldConfig {
    if complex {
        FieldConfig::complex()
    } else {
        FieldConfig::real()
    }
}

fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

fn invertible(n: usize, seed: u64, field: Field) -> Matrix {
    // diagonal shift keeps the draw well away from singular
    random_matrix(&mut rng_from_seed(seed), n, n, field) + Matrix::identity(n, n) * re(3.0 * n as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn outer_is_bilinear(n in 1usize..6, seed in any::<u64>(), complex in any::<bool>()) {
        let field = cfg_for(complex).field();
        let mut rng = rng_from_seed(seed);
        let (u, v) = (random_vector(&mut rng, n, field), random_vector(&mut rng, n, field));
        let (f, g) = (random_vector(&mut rng, n, field), random_vector(&mut rng, n, field));
        let (a, b) = (random_scalar(&mut rng, field), random_scalar(&mut rng, field));
        let lhs = outer(&(&u * a + &v * b), &Covector::new(f.clone())).unwrap();
        let rhs = outer(&u, &Covector::new(f.clone())).unwrap() * a + outer(&v, &Covector::new(f.clone())).unwrap() * b;
        prop_assert!(rel_diff(&lhs, &rhs) < 1e-12);
        let lhs = outer(&u, &Covector::new(&f * a + &g * b)).unwrap();
        let rhs = outer(&u, &Covector::new(f)).unwrap() * a + outer(&u, &Covector::new(g)).unwrap() * b;
        prop_assert!(rel_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn outer_composition_rule(n in 1usize..6, seed in any::<u64>(), complex in any::<bool>()) {
        let field = cfg_for(complex).field();
        let mut rng = rng_from_seed(seed);
        let (u, v) = (random_vector(&mut rng, n, field), random_vector(&mut rng, n, field));
        let f = Covector::new(random_vector(&mut rng, n, field));
        let g = Covector::new(random_vector(&mut rng, n, field));
        let lhs = outer(&u, &f).unwrap() * outer(&v, &g).unwrap();
        let rhs = outer(&u, &g).unwrap() * f.apply(&v);
        prop_assert!((&lhs - &rhs).norm() <= 1e-12 * (u.norm() * f.norm() * v.norm() * g.norm()));
    }

    #[test]
    fn factor_inverts_outer(n in 1usize..7, seed in any::<u64>(), complex in any::<bool>()) {
        let cfg = cfg_for(complex);
        let mut rng = rng_from_seed(seed);
        let u = random_vector(&mut rng, n, cfg.field());
        let f = Covector::new(random_vector(&mut rng, n, cfg.field()));
        let a = outer(&u, &f).unwrap();
        let fac = linalg::rank_one_factor(&a, &cfg).unwrap();
        prop_assert!(rel_diff(&fac.to_matrix(), &a) < 1e-12);
        prop_assert!((fac.f.norm() - 1.0).abs() < 1e-12);
        // the recovered covector is the input one rescaled into the gauge
        let lead = fac.f.entries().iter().find(|z| z.norm() > cfg.tol_abs()).unwrap();
        prop_assert!(lead.im.abs() < 1e-12 && lead.re > 0.0);
        let c = fac.f.entries()[0] / f.entries()[0];
        prop_assert!((f.entries() * c - fac.f.entries()).norm() < 1e-10);
    }

    #[test]
    fn rank_is_transpose_invariant(n in 1usize..7, r in 0usize..7, seed in any::<u64>(), complex in any::<bool>()) {
        let cfg = cfg_for(complex);
        let r = r.min(n);
        let mut rng = rng_from_seed(seed);
        let a = random_matrix(&mut rng, n, r, cfg.field()) * random_matrix(&mut rng, r, n, cfg.field());
        let rank = linalg::numeric_rank(&a, &cfg);
        prop_assert_eq!(rank, linalg::numeric_rank(&a.transpose(), &cfg));
        prop_assert_eq!(rank, r);
    }

    #[test]
    fn apply_is_linear(n in 1usize..5, m in 1usize..5, seed in any::<u64>()) {
        let cfg = FieldConfig::complex();
        let t = random_superop(n, m, seed, &cfg);
        let mut rng = rng_from_seed(seed ^ 1);
        let a = random_matrix(&mut rng, n, n, cfg.field());
        let b = random_matrix(&mut rng, n, n, cfg.field());
        let c = random_scalar(&mut rng, cfg.field());
        let lhs = t.apply(&(&a * c + &b)).unwrap();
        let rhs = t.apply(&a).unwrap() * c + t.apply(&b).unwrap();
        prop_assert!(rel_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn conjugation_is_scale_free_in_s(n in 1usize..6, seed in any::<u64>(), complex in any::<bool>()) {
        let cfg = cfg_for(complex);
        let mut rng = rng_from_seed(seed);
        let s = invertible(n, seed, cfg.field());
        let alpha = random_scalar(&mut rng, cfg.field()) + re(0.1);
        let c = random_scalar(&mut rng, cfg.field()) + re(0.1);
        let a = conjugation_superop(alpha, &s, cfg).unwrap();
        let b = conjugation_superop(alpha, &(&s * c), cfg).unwrap();
        prop_assert!(rel_diff(a.mat(), b.mat()) < 1e-12);
    }

    #[test]
    fn conjugations_compose(n in 1usize..5, seed in any::<u64>(), complex in any::<bool>()) {
        let cfg = cfg_for(complex);
        let mut rng = rng_from_seed(seed);
        let s1 = invertible(n, seed, cfg.field());
        let s2 = invertible(n, seed.wrapping_add(1), cfg.field());
        let a1: Scalar = random_scalar(&mut rng, cfg.field()) + re(0.1);
        let a2: Scalar = random_scalar(&mut rng, cfg.field()) + re(0.1);
        let lhs = compose(&conjugation_superop(a1, &s1, cfg).unwrap(), &conjugation_superop(a2, &s2, cfg).unwrap()).unwrap();
        let rhs = conjugation_superop(a1 * a2, &(&s1 * &s2), cfg).unwrap();
        prop_assert!(rel_diff(lhs.mat(), rhs.mat()) < 1e-10);
    }

    #[test]
    fn counterexamples_self_verify(n in 2usize..5, seed in any::<u64>(), complex in any::<bool>()) {
        let cfg = cfg_for(complex);
        let t = random_superop(n, n, seed, &cfg);
        let v = is_separating_exact(&t, &cfg);
        prop_assert_eq!(v.status, Status::NotSeparating);
        let cx = v.counterexample.unwrap();
        let scale = t.max_image_norm().powi(2);
        prop_assert!((&cx.a * &cx.b).norm() <= 1e-13 * cx.a.norm() * cx.b.norm());
        let tatb = t.apply(&cx.a).unwrap() * t.apply(&cx.b).unwrap();
        prop_assert!(tatb.norm() > cfg.threshold(scale));
        prop_assert!((tatb.norm() - cx.violation_norm).abs() <= 1e-12 * cx.violation_norm);
    }

    #[test]
    fn separating_status_is_scale_invariant(n in 2usize..5, seed in any::<u64>(), c in 1e-3f64..1e3) {
        let cfg = FieldConfig::real();
        let pos = gen_conjugation(n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).unwrap();
        let neg = random_superop(n, n, seed, &cfg);
        for t in [pos.superop().unwrap().clone(), neg] {
            prop_assert_eq!(is_separating_exact(&t, &cfg).status, is_separating_exact(&t.scaled(re(c)), &cfg).status);
            prop_assert_eq!(is_separating_exact(&t, &cfg).status, is_separating_exact(&t.scaled(re(-c)), &cfg).status);
        }
    }

    #[test]
    fn conjugations_are_biseparating(n in 1usize..6, seed in any::<u64>(), complex in any::<bool>()) {
        let cfg = cfg_for(complex);
        let b = gen_conjugation(n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).unwrap();
        prop_assert_eq!(is_biseparating(b.superop().unwrap(), &cfg).status, Status::Biseparating);
    }

    #[test]
    fn recovery_round_trip(n in 1usize..9, seed in any::<u64>(), complex in any::<bool>()) {
        let cfg = cfg_for(complex);
        let mut rng = rng_from_seed(seed);
        let s = random_matrix(&mut rng, n, n, cfg.field());
        prop_assume!(linalg::invert(&s, &cfg).map(|(_, c)| c < 1e4).unwrap_or(false));
        let alpha = random_scalar(&mut rng, cfg.field()) + re(0.2);
        let t = conjugation_superop(alpha, &s, cfg).unwrap();
        let form = recover_conjugation(&t, &cfg).unwrap();
        prop_assert!((form.alpha() - alpha).norm() <= 1e-8 * alpha.norm());
        prop_assert!((form.s() - gauge_normalize(&s, &cfg)).norm() <= 1e-8);
        prop_assert!(verify_form(&t, &form, &cfg).unwrap() <= residual_tolerance(&cfg));
    }

    #[test]
    fn undoing_s_leaves_alpha_times_identity(n in 1usize..6, seed in any::<u64>()) {
        let cfg = FieldConfig::complex();
        let b = gen_conjugation(n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).unwrap();
        let t = b.superop().unwrap();
        let form = recover_conjugation(t, &cfg).unwrap();
        let (undo, _) = conjugation_superop(re(1.0), form.s(), cfg).unwrap().inverse().unwrap();
        let plain = compose(&undo, t).unwrap();
        for q in 0..n {
            for p in 0..n {
                let e = matrix_unit(n, p, q);
                prop_assert!((plain.apply(&e).unwrap() - &e * form.alpha()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn pointwise_round_trip_and_bridge(k in 1usize..5, n in 1usize..4, seed in any::<u64>(), complex in any::<bool>()) {
        let cfg = cfg_for(complex);
        let b = gen_pointwise(k, n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).unwrap();
        let t = b.big().unwrap();
        let truth = b.pointwise().unwrap();
        prop_assert_eq!(is_biseparating_fn(t, &cfg).status, Status::Biseparating);
        prop_assert_eq!(is_strictly_separating(t, &cfg).status, Status::Separating);
        let rec = recover_pointwise(t, &cfg).unwrap();
        prop_assert_eq!(rec.phi(), truth.phi());
        prop_assert!(verify_pointwise(t, &rec, &cfg).unwrap() <= 1e-8);
        for x in 0..k {
            prop_assert!((rec.form(x).alpha() - truth.form(x).alpha()).norm() <= 1e-8 * truth.form(x).alpha().norm());
            prop_assert!((rec.form(x).s() - truth.form(x).s()).norm() <= 1e-8);
            if n == 1 {
                prop_assert_eq!(rec.form(x).s(), &Matrix::identity(1, 1));
                prop_assert!(rec.form(x).alpha().norm() > 0.0);
            }
        }
    }

    #[test]
    fn generation_is_deterministic(n in 1usize..5, k in 1usize..4, seed in any::<u64>()) {
        let cfg = FieldConfig::complex();
        prop_assert_eq!(
            gen_conjugation(n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).unwrap(),
            gen_conjugation(n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).unwrap()
        );
        prop_assert_eq!(
            gen_pointwise(k, n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).unwrap(),
            gen_pointwise(k, n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).unwrap()
        );
    }
}
