use std::collections::HashSet;

use martin_core::free::{
    apply, cross_ratio, hilbert_distance, hitting_matrix, induced_kernel, martin_ratio_trace, sample_path,
    transitional_chain, FreeWalkSpec, FreeWord, HittingBudget, HittingMethod, MartinEstimator,
};
use martin_core::kernel::{green_partial, GreenEngine, GreenOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn w(s: &str) -> FreeWord {
    s.parse().unwrap()
}

/// Words of `Z ⋆ Z²` built from up to ten random letters.
fn word() -> impl Strategy<Value = FreeWord> {
    let letter = prop_oneof![
        (-3i64..=3).prop_map(|v| FreeWord::letter(1, vec![v])),
        ((-2i64..=2), (-2i64..=2)).prop_map(|(x, y)| FreeWord::letter(2, vec![x, y])),
    ];
    prop::collection::vec(letter, 0..10).prop_map(|ls| ls.iter().fold(FreeWord::identity(), |acc, l| acc.mul(l)))
}

fn positive(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn words_round_trip_through_text(g in word()) {
        let back: FreeWord = g.to_string().parse().unwrap();
        prop_assert_eq!(&back, &g);
        let json = serde_json::to_string(&g).unwrap();
        prop_assert_eq!(serde_json::from_str::<FreeWord>(&json).unwrap(), g);
    }

    #[test]
    fn group_laws(g in word(), h in word(), k in word()) {
        prop_assert!(g.mul(&g.inverse()).is_identity());
        prop_assert!(g.inverse().mul(&g).is_identity());
        prop_assert_eq!(g.mul(&h).mul(&k), g.mul(&h.mul(&k)));
        prop_assert_eq!(g.mul(&h).inverse(), h.inverse().mul(&g.inverse()));
        prop_assert_eq!(g.inverse().length(), g.length());
    }

    #[test]
    fn word_metric(g in word(), h in word(), k in word()) {
        prop_assert_eq!(g.distance(&h), h.distance(&g));
        prop_assert!(g.distance(&k) <= g.distance(&h) + h.distance(&k));
        // left invariance
        prop_assert_eq!(k.mul(&g).distance(&k.mul(&h)), g.distance(&h));
        prop_assert_eq!(g.distance(&g), 0);
    }

    #[test]
    fn hilbert_metric_axioms(x in positive(4), y in positive(4), z in positive(4), c in 0.1f64..10.0) {
        let dxy = hilbert_distance(&x, &y).unwrap();
        prop_assert!((dxy - hilbert_distance(&y, &x).unwrap()).abs() < 1e-12);
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        prop_assert!((hilbert_distance(&cx, &y).unwrap() - dxy).abs() < 1e-12);
        prop_assert!(hilbert_distance(&x, &z).unwrap() <= dxy + hilbert_distance(&y, &z).unwrap() + 1e-12);
        // Birkhoff's form is the Hilbert metric of the simplex
        prop_assert!((cross_ratio(&x, &y).unwrap().ln() - dxy).abs() < 1e-9 * (1.0 + dxy));
    }

    #[test]
    fn positive_matrices_contract(m in positive(16), x in positive(4), y in positive(4)) {
        let t = DMatrix::from_vec(4, 4, m);
        let delta = martin_core::free::contraction_coefficient(&t, Default::default()).unwrap();
        let before = hilbert_distance(&x, &y).unwrap();
        let after = hilbert_distance(&apply(&t, &x).unwrap(), &apply(&t, &y).unwrap()).unwrap();
        prop_assert!(after <= delta * before + 1e-12, "{} > {} · {}", after, delta, before);
    }
}

/// Every path of the walk from `e` to its endpoint meets every transitional
/// set between them.
fn transitional_sets_are_crossed(spec: &FreeWalkSpec, spacing: u64) {
    let mut checked = 0;
    for seed in 0..300 {
        let t = sample_path(spec, &FreeWord::identity(), 60, seed);
        let visited: HashSet<FreeWord> = t.positions(spec).into_iter().collect();
        let sets = transitional_chain(spec, &FreeWord::identity(), &t.end, spacing).unwrap();
        for s in &sets {
            assert!(s.words.iter().any(|v| visited.contains(v)), "seed {seed}: path to {} skips {}", t.end, s.center);
            checked += 1;
        }
    }
    assert!(checked > 300, "only {checked} sets checked");
}

#[test]
fn transitional_sets_are_necessary() {
    transitional_sets_are_crossed(&FreeWalkSpec::simple(1, 1), 2);
    let spec = FreeWalkSpec::new(
        1,
        2,
        vec![
            (w("a"), 0.2),
            (w("a^-1"), 0.1),
            (w("b[1,0]"), 0.15),
            (w("b[0,-1]"), 0.15),
            (w("a b[0,1]"), 0.2),
            (w("b[0,-1] a^-1"), 0.1),
            (w("b[-1,0]"), 0.1),
        ],
    )
    .unwrap();
    assert_eq!(spec.r_mu(), 2);
    transitional_sets_are_crossed(&spec, 3);
}

#[test]
fn hitting_matrices_are_translation_invariant() {
    let spec = FreeWalkSpec::new(1, 1, vec![(w("a"), 0.3), (w("a^-1"), 0.1), (w("b"), 0.2), (w("b^-1"), 0.1), (w("e"), 0.3)]).unwrap();
    let rows = vec![w("a^3"), w("a^3 b"), w("a^2 b^-1")];
    let cols = vec![w("e"), w("b"), w("a^-1")];
    let budget = HittingBudget::default();
    let base = hitting_matrix(&spec, &rows, &cols, HittingMethod::TruncatedSolve, &budget).unwrap();
    for g in ["b^2 a", "a^-4 b^3", "b^-1"] {
        let g = w(g);
        let tr = |ws: &[FreeWord]| ws.iter().map(|x| g.mul(x)).collect::<Vec<_>>();
        let moved = hitting_matrix(&spec, &tr(&rows), &tr(&cols), HittingMethod::TruncatedSolve, &budget).unwrap();
        // columns come back in canonical order, so match them by word
        for (j, c) in base.cols.iter().enumerate() {
            let k = moved.cols.iter().position(|x| *x == g.mul(c)).unwrap();
            for i in 0..rows.len() {
                assert!((base.values[i][j] - moved.values[i][k]).abs() < 1e-10, "{g}: entry ({i},{c})");
            }
        }
        assert!((base.comparability() - moved.comparability()).abs() < 1e-10);
    }
    assert!(base.comparability() > 0.0);
}

#[test]
fn monte_carlo_and_solve_agree() {
    let spec = FreeWalkSpec::simple(1, 1);
    let rows = vec![w("a^2"), w("a b")];
    let cols = vec![w("e"), w("a")];
    let solve = hitting_matrix(&spec, &rows, &cols, HittingMethod::TruncatedSolve, &HittingBudget::default()).unwrap();
    let mc_budget = HittingBudget { episodes: 200_000, seed: 7, ..HittingBudget::default() };
    let mc = hitting_matrix(&spec, &rows, &cols, HittingMethod::MonteCarlo, &mc_budget).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let sigma = mc.error[i][j];
            assert!((solve.values[i][j] - mc.values[i][j]).abs() <= 4.0 * sigma + solve.error[i][j], "({i},{j})");
        }
    }
    // a² first meets {e, a} at a, with probability 1/3
    assert!((solve.values[0][1] - 1.0 / 3.0).abs() < 1e-4);
    assert!(solve.values[0][0] < 1e-3);
}

#[test]
fn martin_ratios_stabilize_along_a_ray() {
    let spec = FreeWalkSpec::simple(1, 1);
    let targets: Vec<FreeWord> = (1..=4).map(|m| FreeWord::letter(1, vec![m])).collect();
    let budget = HittingBudget { episodes: 200_000, seed: 3, ..HittingBudget::default() };
    let trace = martin_ratio_trace(&spec, &w("b"), &targets, MartinEstimator::Direct, &budget).unwrap();
    // K(b, aⁿ) = P_b(hit aⁿ)/P_e(hit aⁿ) = 1/3 for every n ≥ 1
    for p in &trace.points {
        assert!((p.value - 1.0 / 3.0).abs() <= 3.0 * p.error + 1e-3, "{}: {} ± {}", p.target, p.value, p.error);
    }
    for (diff, err) in &trace.diffs {
        assert!(diff <= &(3.0 * err));
    }
}

/// Visits of the induced chain to `(0, e)` are the visits of the walk to `e`,
/// so both Green functions at the identity equal `1/(1 − U)` with
/// `U = (1 − α) + α/3` the return probability of the lazy walk.
#[test]
fn induced_green_matches_return_probability() {
    let spec = FreeWalkSpec::simple(1, 1);
    let ik = induced_kernel(&spec, 1, &FreeWord::identity(), 1, &HittingBudget::default()).unwrap();
    let alpha = ik.alpha;
    let exact = 1.0 / (1.0 - ((1.0 - alpha) + alpha / 3.0));
    let (x, j) = ik.coordinates(&FreeWord::identity()).unwrap();
    let opts = GreenOptions { engine: GreenEngine::Direct, ..GreenOptions::default() };
    let g = |k| green_partial(k, (&x, j), (&x, j), 1500, &opts).unwrap().extrapolated();
    let (lo, mid, hi) = (g(&ik.lower), g(&ik.kernel), g(&ik.upper));
    assert!(lo <= exact + 1e-9 && exact <= hi + 1e-9, "{lo} ≤ {exact} ≤ {hi}");
    assert!((mid - exact).abs() < 1e-3, "{mid} vs {exact}");
}

#[test]
fn induced_rows_leak_away_from_the_coset() {
    let spec = FreeWalkSpec::new(1, 1, vec![(w("a"), 0.3), (w("a^-1"), 0.1), (w("b"), 0.2), (w("b^-1"), 0.1), (w("e"), 0.3)]).unwrap();
    let ik = induced_kernel(&spec, 1, &FreeWord::identity(), 1, &HittingBudget::default()).unwrap();
    let masses = ik.upper.row_masses();
    for (h, m) in ik.levels.iter().zip(masses) {
        assert!(*m <= 1.0 + 1e-12, "{h}: {m}");
        if !h.is_identity() {
            assert!(*m < 1.0 - 1e-3, "{h}: {m}");
        }
    }
    assert!(ik.validation.passed(), "{:?}", ik.validation);
    assert!(ik.max_gap < 1e-4);
}
