//! Property-based invariants over randomized inputs.

use proptest::prelude::*;

use gmmn::data_io::{load_checkpoint, save_checkpoint, Checkpoint, ComponentTag};
use gmmn::linalg::{pairwise_sq_dists, Matrix, Rng};
use gmmn::mmd::{mmd2_biased, KernelSpec};
use gmmn::network::{Activation, LayerSpec, Network};

fn matrix_strategy(max_rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_rows).prop_flat_map(move |rows| {
        proptest::collection::vec(-10.0f64..10.0, rows * cols)
            .prop_map(move |data| Matrix::from_vec(rows, cols, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mmd2_is_nonnegative_and_symmetric(
        x in matrix_strategy(12, 3),
        y in matrix_strategy(12, 3),
        bw in 0.1f64..8.0,
    ) {
        let k = KernelSpec::new(vec![bw, 2.0 * bw]).unwrap();
        let xy = mmd2_biased(&x, &y, &k).unwrap().mmd2;
        let yx = mmd2_biased(&y, &x, &k).unwrap().mmd2;
        prop_assert!(xy >= 0.0);
        prop_assert!((xy - yx).abs() < 1e-12);
    }

    #[test]
    fn mmd2_of_identical_samples_is_zero(x in matrix_strategy(12, 4)) {
        let k = KernelSpec::default_synthetic();
        let m = mmd2_biased(&x, &x, &k).unwrap().mmd2;
        prop_assert!(m.abs() < 1e-12);
    }

    #[test]
    fn pairwise_distances_are_symmetric_with_zero_diagonal(
        x in matrix_strategy(10, 5),
    ) {
        let d = pairwise_sq_dists(&x, &x).unwrap();
        for i in 0..x.rows() {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..x.rows() {
                prop_assert!(d.get(i, j) >= 0.0);
                prop_assert!((d.get(i, j) - d.get(j, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn checkpoint_roundtrip_is_bitwise(
        seed in 0u64..10_000,
        in_dim in 1usize..8,
        hidden in 1usize..8,
        out_dim in 1usize..8,
    ) {
        let mut rng = Rng::from_seed(seed);
        let net = Network::new(
            vec![
                LayerSpec::new(in_dim, hidden, Activation::Relu).with_dropout(0.25),
                LayerSpec::new(hidden, out_dim, Activation::Sigmoid),
            ],
            &mut rng,
        )
        .unwrap();
        let ckpt = Checkpoint::from_network(&net, ComponentTag::Gmmn);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&path, &ckpt).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        prop_assert_eq!(&loaded, &ckpt);
        prop_assert_eq!(loaded.to_network().unwrap(), net);
    }

    #[test]
    fn shuffle_is_a_permutation(seed in 0u64..10_000, n in 1usize..200) {
        let mut rng = Rng::from_seed(seed);
        let mut v: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    }
}
