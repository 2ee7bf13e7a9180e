use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torsionlab::cli::InputDocument;
use torsionlab::detline::{fusion, DetLineElement};
use torsionlab::gluelab::{random_split_instance, verify_lesch};
use torsionlab::hilbcx::{
    assemble_ses, build_twisted_complex, generate_duality_instance, les_torsion, long_exact_sequence, DimensionProfile, LiftRegistry,
};
use torsionlab::localsys::validate_local_system;
use torsionlab::numlin::{coordinate_change_det, dual_map_identity, kernel_basis, phase_corrected_bases, rank, Basis, CMatrix, C64};
use torsionlab::simplicial::{Simplex, SimplicialComplex};

const TOL: f64 = 1e-10;

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn simplex_sets() -> impl Strategy<Value = Vec<Simplex>> {
    prop::collection::vec(prop::collection::btree_set(0usize..6, 1..=4), 1..8)
        .prop_map(|sets| sets.into_iter().map(|s| s.into_iter().collect()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn boundary_of_boundary_vanishes(maximal in simplex_sets()) {
        let k = SimplicialComplex::closure(&maximal);
        let top = k.dim().unwrap();
        for d in 1..top {
            let b = k.boundary_matrix(d).unwrap() * k.boundary_matrix(d + 1).unwrap();
            prop_assert!(b.iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn twisted_complexes_are_complexes_with_euler_poincare(seed in any::<u64>()) {
        let (s, sys) = random_split_instance(seed, 14).unwrap();
        prop_assert!(validate_local_system(&s.total, &sys, 1e-10).unwrap().passed);
        let cx = build_twisted_complex(&s.total, &sys, TOL).unwrap();
        for d in 0..cx.top().saturating_sub(1) {
            prop_assert!((cx.differential(d + 1) * cx.differential(d)).norm() < 1e-12);
        }
        let coh: i64 = (0..=cx.top())
            .map(|d| {
                let h = cx.harmonic_cohomology(d, TOL).unwrap().dim() as i64;
                if d % 2 == 0 { h } else { -h }
            })
            .sum();
        prop_assert_eq!(coh, cx.euler_characteristic());
        prop_assert_eq!(cx.euler_characteristic(), sys.rank() as i64 * s.total.euler_characteristic());
    }

    #[test]
    fn torsion_is_unitarily_invariant(seed in any::<u64>()) {
        let (s, sys) = random_split_instance(seed, 14).unwrap();
        let cx = build_twisted_complex(&s.total, &sys, TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let us: Vec<CMatrix> = cx.dims().iter().map(|&n| random_matrix(&mut rng, n, n).qr().q()).collect();
        let (a, b) = (cx.torsion(TOL), cx.conjugated(&us).torsion(TOL));
        prop_assert!((a - b).abs() <= 1e-10 * a, "{} vs {}", a, b);
    }

    #[test]
    fn lesch_holds_on_random_splits(seed in any::<u64>()) {
        let (s, sys) = random_split_instance(seed, 12).unwrap();
        let r = verify_lesch(&s, &sys, TOL).unwrap();
        prop_assert!(r.passes(1e-9), "{:?}", r.residuals);
    }

    #[test]
    fn lift_strategies_give_one_torsion(seed in any::<u64>()) {
        let (s, sys) = random_split_instance(seed, 12).unwrap();
        let (h, _) = assemble_ses(&s, &sys, TOL).unwrap();
        let lifts = LiftRegistry::builtin();
        let taus: Vec<f64> = lifts
            .names()
            .map(|n| les_torsion(&long_exact_sequence(&h, lifts.get(n).unwrap(), TOL).unwrap().les, TOL).unwrap())
            .collect();
        for t in &taus {
            prop_assert!((t - taus[0]).abs() <= 1e-9 * taus[0]);
        }
    }

    #[test]
    fn synthetic_torsions_agree(seed in any::<u64>(), odd in 0usize..2) {
        let inst = generate_duality_instance(seed, 1 + 2 * odd, &DimensionProfile::Random { max_dim: 4 }).unwrap();
        prop_assert!(inst.commutation_residual() < 1e-10);
        let (t, tp) = (les_torsion(&inst.les_h, TOL).unwrap(), les_torsion(&inst.les_hprime, TOL).unwrap());
        prop_assert!((t - tp).abs() <= 1e-8 * t);
    }

    #[test]
    fn coordinate_change_is_a_cocycle(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [u, v, w] = [0; 3].map(|_| Basis::from_matrix(random_matrix(&mut rng, n, n)));
        let uw = coordinate_change_det(&u, &w).unwrap();
        let chain = coordinate_change_det(&u, &v).unwrap() * coordinate_change_det(&v, &w).unwrap();
        prop_assert!((uw - chain).norm() <= 1e-9 * uw.norm());
        let inv = coordinate_change_det(&w, &u).unwrap();
        prop_assert!((uw * inv - C64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn dual_map_identity_holds(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_matrix(&mut rng, n, n);
        let v = Basis::from_matrix(random_matrix(&mut rng, n, n));
        let w = Basis::from_matrix(random_matrix(&mut rng, n, n));
        let (left, right) = dual_map_identity(&f, &v, &w).unwrap();
        prop_assert!((left - right).norm() <= 1e-9 * left.norm());
    }

    #[test]
    fn phase_correction_is_positive(seed in any::<u64>(), n in 1usize..6, cut_frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_matrix(&mut rng, n, n).qr().q();
        let cut = ((n as f64) * cut_frac) as usize;
        let w = Basis::from_matrix(q.columns(0, cut).into_owned());
        let u = Basis::from_matrix(q.columns(cut, n - cut).into_owned());
        let v = Basis::from_matrix(random_matrix(&mut rng, n, n));
        let before = coordinate_change_det(&w.concat(&u), &v).unwrap();
        let (w2, u2) = phase_corrected_bases(&w, &u, &v).unwrap();
        let after = coordinate_change_det(&w2.concat(&u2), &v).unwrap();
        prop_assert!(after.re > 0.0);
        prop_assert!(after.im.abs() <= 1e-12 * after.norm());
        prop_assert!((after.re - before.norm()).abs() <= 1e-10 * before.norm());
    }

    #[test]
    fn rank_nullity(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6, r in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = r.min(rows).min(cols);
        let a = random_matrix(&mut rng, rows, r) * random_matrix(&mut rng, r, cols);
        prop_assert_eq!(rank(&a, TOL), r);
        let k = kernel_basis(&a, TOL);
        prop_assert_eq!(k.len(), cols - r);
        prop_assert!((&a * k.matrix()).norm() < 1e-10);
    }

    #[test]
    fn fusion_degree_dims_add(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims: Vec<Vec<usize>> = (0..2).map(|_| (0..3).map(|_| rng.random_range(0..3)).collect()).collect();
        let el = |rng: &mut ChaCha8Rng, d: &[usize]| {
            DetLineElement::graded(d.iter().map(|&n| Basis::from_matrix(random_matrix(rng, n, n))).collect(), C64::new(1.0, 0.0)).unwrap()
        };
        let (x, y) = (el(&mut rng, &dims[0]), el(&mut rng, &dims[1]));
        let f = fusion(&x, &y).unwrap();
        let expected: Vec<usize> = dims[0].iter().zip(&dims[1]).map(|(a, b)| a + b).collect();
        prop_assert_eq!(f.dims(), expected);
        prop_assert!((f.scalar().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn split_documents_round_trip(seed in any::<u64>()) {
        let (s, sys) = random_split_instance(seed, 14).unwrap();
        let doc = InputDocument::from_split(&s, &sys);
        let back: InputDocument = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        let (s2, sys2) = back.split().unwrap();
        prop_assert_eq!(s2, s);
        prop_assert_eq!(sys2, sys);
    }
}
