use codeloop::descriptor::expected_intra_class_distance;
use codeloop::BitVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `1/(L K^2) * sum_l sum_k sum_k' (x_l^k - x_l^k')^2`, term by term.
fn double_sum(ds: &[BitVector]) -> f64 {
    let k = ds.len() as f64;
    let l = ds[0].len() as f64;
    let mut total = 0.0;
    for bit in 0..ds[0].len() {
        for a in ds {
            for b in ds {
                let d = a.get(bit) as i32 - b.get(bit) as i32;
                total += (d * d) as f64;
            }
        }
    }
    total / (l * k * k)
}

#[test]
fn closed_form_matches_double_sum_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let k = rng.random_range(1..=10);
        let len = rng.random_range(1..=64);
        let ds: Vec<BitVector> = (0..k).map(|_| BitVector::random(len, &mut rng)).collect();
        let closed = expected_intra_class_distance(&ds).unwrap();
        assert!((closed - double_sum(&ds)).abs() <= 1e-12, "k={k} len={len}");
    }
}

#[test]
fn identical_descriptors_have_zero_spread() {
    let x = BitVector::random(64, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(expected_intra_class_distance(&[x.clone(), x.clone(), x]).unwrap(), 0.0);
}

#[test]
fn complementary_pair_has_half_spread() {
    let x = BitVector::random(64, &mut ChaCha8Rng::seed_from_u64(2));
    let d = expected_intra_class_distance(&[x.clone(), x.not()]).unwrap();
    assert!((d - 0.5).abs() < 1e-15);
    assert_eq!(double_sum(&[x.clone(), x.not()]), 0.5);
}

#[test]
fn empty_and_mismatched_sets_are_errors() {
    assert!(expected_intra_class_distance(&[]).is_err());
    assert!(expected_intra_class_distance(&[BitVector::zeros(4), BitVector::zeros(5)]).is_err());
}

proptest! {
    #[test]
    fn closed_form_is_a_permutation_invariant_double_sum(seed in any::<u64>(), k in 1usize..=10, len in 1usize..=64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ds: Vec<BitVector> = (0..k).map(|_| BitVector::random(len, &mut rng)).collect();
        let a = expected_intra_class_distance(&ds).unwrap();
        prop_assert!((a - double_sum(&ds)).abs() <= 1e-12);
        ds.reverse();
        prop_assert!((a - expected_intra_class_distance(&ds).unwrap()).abs() <= 1e-12);
        prop_assert!((0.0..=0.5).contains(&a));
    }
}
