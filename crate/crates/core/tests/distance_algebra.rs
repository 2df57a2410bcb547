use codeloop::codeword::{masked_hamming, masked_hamming_ratio};
use codeloop::{BitVector, Codeword};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cw(x: &str, y: &str) -> Codeword {
    Codeword::new(
        BitVector::parse_bit_string(x).unwrap(),
        BitVector::parse_bit_string(y).unwrap(),
    )
    .unwrap()
}

fn byte(v: u32) -> BitVector {
    BitVector::from_bits((0..8).map(|i| v >> i & 1 == 1))
}

#[test]
fn full_masks_reduce_to_hamming_exhaustively_at_eight_bits() {
    for a in 0..256u32 {
        for b in 0..256u32 {
            let (x1, x2) = (byte(a), byte(b));
            let d = masked_hamming(&Codeword::full(x1.clone()), &Codeword::full(x2.clone())).unwrap();
            assert_eq!(d, (a ^ b).count_ones() as f64);
            assert_eq!(d, x1.hamming(&x2).unwrap() as f64);
        }
    }
}

#[test]
fn range_symmetry_and_geometric_bound_at_eight_bits() {
    // All descriptors against a fixed set of masks, exhaustively in x.
    let masks: Vec<u32> = vec![1, 3, 0x0f, 0x55, 0x81, 0xfe, 0xff];
    for a in 0..256u32 {
        for b in (0..256u32).step_by(3) {
            for &m1 in &masks {
                for &m2 in &masks {
                    let d1 = Codeword::new(byte(a), byte(m1)).unwrap();
                    let d2 = Codeword::new(byte(b), byte(m2)).unwrap();
                    let d = masked_hamming(&d1, &d2).unwrap();
                    assert_eq!(d, masked_hamming(&d2, &d1).unwrap());
                    assert!((0.0..=8.0).contains(&d));
                    let bound = ((m1.count_ones() * m2.count_ones()) as f64).sqrt();
                    assert!(d <= bound + 1e-12, "{a} {b} {m1} {m2}: {d} > {bound}");
                }
            }
        }
    }
}

#[test]
fn randomized_properties_at_full_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20_000 {
        let y1 = loop {
            let y = BitVector::random(512, &mut rng);
            if y.cardinality() > 0 {
                break y;
            }
        };
        let y2 = if rng.random_bool(0.1) {
            BitVector::ones(512)
        } else {
            BitVector::random(512, &mut rng)
        };
        let d1 = Codeword::new(BitVector::random(512, &mut rng), y1).unwrap();
        let d2 = Codeword::new(BitVector::random(512, &mut rng), y2).unwrap();
        let d = masked_hamming(&d1, &d2).unwrap();
        assert_eq!(
            masked_hamming_ratio(&d1, &d2).unwrap(),
            masked_hamming_ratio(&d2, &d1).unwrap()
        );
        assert!((0.0..=512.0).contains(&d));
        let bound = (d1.mask_cardinality() as f64 * d2.mask_cardinality() as f64).sqrt();
        assert!(d <= bound + 1e-9);
    }
}

#[test]
fn distinct_codewords_can_be_at_distance_zero() {
    let a = cw("1010", "1111");
    let b = cw("1010", "0011");
    assert_ne!(a, b);
    assert_eq!(masked_hamming(&a, &b).unwrap(), 0.0);
}

#[test]
fn triangle_inequality_can_fail() {
    let a = cw("00", "11");
    let b = cw("00", "01");
    let c = cw("11", "11");
    let ab = masked_hamming(&a, &b).unwrap();
    let bc = masked_hamming(&b, &c).unwrap();
    let ac = masked_hamming(&a, &c).unwrap();
    assert_eq!((ab, ac), (0.0, 2.0));
    assert_eq!(masked_hamming_ratio(&b, &c).unwrap(), (4, 3));
    assert!(ac > ab + bc);
}
