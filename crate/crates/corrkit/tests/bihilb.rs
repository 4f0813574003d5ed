use corrkit::bihilb::{covering_bimodule, watatani_index, Cover};
use corrkit::instances::random_cover;
use corrkit::linalg::cr;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn cover_file_round_trips() {
    let text = std::fs::read_to_string(format!("{}/data/double_cover.json", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let c: Cover = serde_json::from_str(&text).unwrap();
    assert_eq!(c, Cover { m: 3, gamma: vec![1, 2, 0], mtilde: 6, pi: vec![0, 0, 1, 1, 2, 2] });
    let back: Cover = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back, c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// For a k-fold cover of m points, each of the mk points ỹ pairs with the k points
    /// over γ(π(ỹ)), so the conjugate has dimension mk², and the index is k.
    #[test]
    fn uniform_covers(m in 1usize..4, k in 1usize..4, seed in any::<u64>()) {
        let cover = random_cover(&mut ChaCha8Rng::seed_from_u64(seed), m, k);
        let ex = covering_bimodule(&cover, 1e-10).unwrap();
        prop_assert_eq!(ex.conjugated.corr.dim(), m * k * k);
        let idx = watatani_index(&ex.f);
        prop_assert!(idx.ebeta.dist(&ex.f.left_alg().one().scale(cr(k as f64))) < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        prop_assert!(ex.inner_formula_residual(&mut rng, 4) < 1e-10);
    }
}

#[test]
fn uneven_cover_index_is_the_fibre_count() {
    let cover = Cover { m: 2, gamma: vec![1, 0], mtilde: 3, pi: vec![0, 1, 1] };
    let ex = covering_bimodule(&cover, 1e-10).unwrap();
    let e = watatani_index(&ex.f).ebeta;
    assert!((e.block(0)[(0, 0)] - cr(1.0)).norm() < 1e-12);
    assert!((e.block(1)[(0, 0)] - cr(2.0)).norm() < 1e-12);
    // ỹ over 0 pairs with the two points over 1, and each ỹ over 1 with the one point over 0.
    assert_eq!(ex.conjugated.corr.dim(), 2 + 1 + 1);
}
