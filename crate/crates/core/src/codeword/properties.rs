//! Checks for the geometric guarantees of learned codewords.
//!
//! For sources `D1 = (x1, 1)`, `D2 = (x2, 1)` and the learned `Dm`:
//!
//! * centroid: `Dmh(Dm, D1) <= Dmh(D1, D2)` and `Dmh(Dm, D2) <= Dmh(D1, D2)`;
//! * locality: `Dmh(Dk, D1) + Dmh(Dk, D2) >= lambda * Dmh(Dk, Dm)` for any `Dk`.
//!
//! All inequalities are decided on exact rationals; the `f64` fields are for
//! reporting only.

use rand::{Rng, SeedableRng};

use super::{lambda_ratio, learn_codeword, masked_hamming_ratio, Codeword};
use crate::bitcore::BitVector;
use crate::descriptor::{binary_tests, Patch, TestPattern};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CentroidCheck {
    pub d_m1: f64,
    pub d_m2: f64,
    pub d_12: f64,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalityCheck {
    pub card_m: u32,
    pub card_k: u32,
    /// `Dmh(Dk, D1) + Dmh(Dk, D2)`
    pub lhs: f64,
    /// `lambda * Dmh(Dk, Dm)`
    pub rhs: f64,
    pub lambda: f64,
    pub holds: bool,
}

type Ratio = (u64, u64);

fn le(a: Ratio, b: Ratio) -> bool {
    a.0 as u128 * b.1 as u128 <= b.0 as u128 * a.1 as u128
}

fn f(r: Ratio) -> f64 {
    r.0 as f64 / r.1 as f64
}

pub fn check_centroid(d1: &Codeword, d2: &Codeword, dm: &Codeword) -> Result<CentroidCheck> {
    let m1 = masked_hamming_ratio(dm, d1)?;
    let m2 = masked_hamming_ratio(dm, d2)?;
    let s12 = masked_hamming_ratio(d1, d2)?;
    Ok(CentroidCheck {
        d_m1: f(m1),
        d_m2: f(m2),
        d_12: f(s12),
        holds: le(m1, s12) && le(m2, s12),
    })
}

pub fn check_locality(d1: &Codeword, d2: &Codeword, dm: &Codeword, dk: &Codeword) -> Result<LocalityCheck> {
    let k1 = masked_hamming_ratio(dk, d1)?;
    let k2 = masked_hamming_ratio(dk, d2)?;
    let km = masked_hamming_ratio(dk, dm)?;
    let (ln, ld) = lambda_ratio(dm.mask_cardinality(), dk.mask_cardinality(), d1.len())?;
    // k1 + k2 >= lambda * km, cross-multiplied.
    let lhs_n = k1.0 as u128 * k2.1 as u128 + k2.0 as u128 * k1.1 as u128;
    let lhs_d = k1.1 as u128 * k2.1 as u128;
    let rhs_n = ln as u128 * km.0 as u128;
    let rhs_d = ld as u128 * km.1 as u128;
    Ok(LocalityCheck {
        card_m: dm.mask_cardinality(),
        card_k: dk.mask_cardinality(),
        lhs: f(k1) + f(k2),
        rhs: (ln as f64 / ld as f64) * f(km),
        lambda: ln as f64 / ld as f64,
        holds: lhs_n * rhs_d >= rhs_n * lhs_d,
    })
}

/// Per-bit step behind the centroid property: every bit where `xm` differs
/// from `x1` is also a bit where `x2` differs from `x1`.
pub fn disagreement_is_nested(x1: &BitVector, x2: &BitVector, xm: &BitVector) -> Result<bool> {
    let m1 = xm.xor(x1)?;
    Ok(m1.and(&x1.xor(x2)?)? == m1)
}

/// A random smoothed patch and a perturbed, smoothed copy of it, the way two
/// consecutive views of one feature look.
pub fn sample_matched_patches<R: Rng + ?Sized>(rng: &mut R, width: usize, height: usize) -> (Patch, Patch) {
    let base: Vec<u64> = (0..width * height).map(|_| rng.random_range(0..256)).collect();
    let noise = rng.random_range(0..64u64);
    let other: Vec<u64> = base
        .iter()
        .map(|&v| (v + rng.random_range(0..=noise * 2)).saturating_sub(noise).min(255))
        .collect();
    (
        Patch::new(width, height, base).expect("sized").smooth(),
        Patch::new(width, height, other).expect("sized").smooth(),
    )
}

/// Sources and learned codeword for one patch pair.
pub struct LearnedTriple {
    pub d1: Codeword,
    pub d2: Codeword,
    pub dm: Codeword,
}

pub fn learn_triple(i1: &Patch, i2: &Patch, pattern: &TestPattern) -> Result<LearnedTriple> {
    Ok(LearnedTriple {
        d1: Codeword::full(binary_tests(i1, pattern)?),
        d2: Codeword::full(binary_tests(i2, pattern)?),
        dm: learn_codeword(i1, i2, pattern)?,
    })
}

/// Random codeword with a non-empty mask whose size is uniform in `1..=len`.
pub fn random_codeword<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Codeword {
    let card = rng.random_range(1..=len);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..card {
        let j = rng.random_range(i..len);
        idx.swap(i, j);
    }
    let mut y = BitVector::zeros(len);
    for &i in &idx[..card] {
        y.set(i, true);
    }
    Codeword::new(BitVector::random(len, rng), y).expect("equal lengths")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Property {
    Centroid,
    Locality,
}

/// One checked case. For the centroid property `lhs = Dmh(D1, D2)` and
/// `rhs = max(Dmh(Dm, D1), Dmh(Dm, D2))`; for locality `lhs` and `rhs` are the
/// two sides of the bound. Both hold iff `lhs >= rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialRecord {
    pub property: Property,
    pub index: usize,
    pub card_m: u32,
    pub card_k: Option<u32>,
    pub lhs: f64,
    pub rhs: f64,
    pub lambda: Option<f64>,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteSummary {
    pub cases: usize,
    pub violations: usize,
    /// Cases skipped because a learned mask was empty.
    pub skipped: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for SuiteSummary {
    fn default() -> Self {
        SuiteSummary {
            cases: 0,
            violations: 0,
            skipped: 0,
            lambda_min: f64::INFINITY,
            lambda_max: f64::NEG_INFINITY,
        }
    }
}

impl SuiteSummary {
    fn add(&mut self, r: &TrialRecord) {
        self.cases += 1;
        if !r.holds {
            self.violations += 1;
        }
        if let Some(l) = r.lambda {
            self.lambda_min = self.lambda_min.min(l);
            self.lambda_max = self.lambda_max.max(l);
        }
    }

    /// Every lambda seen lies in `(0, 1]`.
    pub fn lambda_in_unit_interval(&self) -> bool {
        self.cases == 0 || self.lambda_min.is_infinite() || (self.lambda_min > 0.0 && self.lambda_max <= 1.0)
    }
}

fn centroid_record(index: usize, t: &LearnedTriple) -> Result<TrialRecord> {
    let c = check_centroid(&t.d1, &t.d2, &t.dm)?;
    Ok(TrialRecord {
        property: Property::Centroid,
        index,
        card_m: t.dm.mask_cardinality(),
        card_k: None,
        lhs: c.d_12,
        rhs: c.d_m1.max(c.d_m2),
        lambda: None,
        holds: c.holds,
    })
}

fn locality_record(index: usize, t: &LearnedTriple, dk: &Codeword) -> Result<TrialRecord> {
    let c = check_locality(&t.d1, &t.d2, &t.dm, dk)?;
    Ok(TrialRecord {
        property: Property::Locality,
        index,
        card_m: c.card_m,
        card_k: Some(c.card_k),
        lhs: c.lhs,
        rhs: c.rhs,
        lambda: Some(c.lambda),
        holds: c.holds && c.lambda > 0.0 && c.lambda <= 1.0,
    })
}

/// Randomized suites: `pairs` learned codewords from random smoothed patch
/// pairs, each checked for the centroid property and against `probes`
/// random codewords for locality. Every record is passed to `sink`.
pub fn random_suites(
    pattern: &TestPattern,
    seed: u64,
    pairs: usize,
    probes: usize,
    mut sink: impl FnMut(&TrialRecord),
) -> Result<(SuiteSummary, SuiteSummary)> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = pattern.patch_size();
    let (mut cen, mut loc) = (SuiteSummary::default(), SuiteSummary::default());
    let mut probe_index = 0;
    for i in 0..pairs {
        let (i1, i2) = sample_matched_patches(&mut rng, w, h);
        let t = learn_triple(&i1, &i2, pattern)?;
        if t.dm.has_empty_mask() {
            cen.skipped += 1;
            loc.skipped += probes;
            continue;
        }
        let r = centroid_record(i, &t)?;
        cen.add(&r);
        sink(&r);
        for _ in 0..probes {
            let dk = random_codeword(&mut rng, pattern.len());
            let r = locality_record(probe_index, &t, &dk)?;
            probe_index += 1;
            loc.add(&r);
            sink(&r);
        }
    }
    Ok((cen, loc))
}

fn from_u64(len: usize, v: u64) -> BitVector {
    BitVector::from_bits((0..len).map(|i| v >> i & 1 == 1))
}

/// Exhaustive suites at bit length `len`: every pair of full-mask sources,
/// every learned descriptor consistent with them (agreeing bits fixed,
/// disagreeing bits free) and, for locality, every probe with a non-empty
/// mask. Learned codewords with empty masks are skipped.
pub fn exhaustive_suites(len: usize) -> Result<(SuiteSummary, SuiteSummary)> {
    assert!((1..=8).contains(&len), "exhaustive enumeration is for small lengths");
    let n = 1u64 << len;
    let full = n - 1;
    let probes: Vec<Codeword> = (0..n)
        .flat_map(|x| (1..n).map(move |y| (x, y)))
        .map(|(x, y)| Codeword::new(from_u64(len, x), from_u64(len, y)).expect("equal lengths"))
        .collect();
    let (mut cen, mut loc) = (SuiteSummary::default(), SuiteSummary::default());
    let mut index = 0;
    for a in 0..n {
        for b in 0..n {
            let disagree = a ^ b;
            let mask = full & !disagree;
            let d1 = Codeword::full(from_u64(len, a));
            let d2 = Codeword::full(from_u64(len, b));
            // Enumerate subsets of the disagreeing bits.
            let mut sub = disagree;
            loop {
                let xm = (a & mask) | sub;
                if mask == 0 {
                    cen.skipped += 1;
                    loc.skipped += probes.len();
                } else {
                    let t = LearnedTriple {
                        d1: d1.clone(),
                        d2: d2.clone(),
                        dm: Codeword::new(from_u64(len, xm), from_u64(len, mask)).expect("equal lengths"),
                    };
                    cen.add(&centroid_record(index, &t)?);
                    for dk in &probes {
                        loc.add(&locality_record(index, &t, dk)?);
                    }
                    index += 1;
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & disagree;
            }
        }
    }
    Ok((cen, loc))
}

/// One row of the one-bit distance tables: codewords as `(x, y)` and the
/// listed `Dmh(1,k)`, `Dmh(2,k)`, `Dmh(m,k)`.
#[derive(Clone, Copy, Debug)]
pub struct OneBitRow {
    pub d1: (u8, u8),
    pub d2: (u8, u8),
    pub dm: (u8, u8),
    pub dk: (u8, u8),
    pub expected: [u8; 3],
}

const fn row(d1: (u8, u8), d2: (u8, u8), dm: (u8, u8), dk: (u8, u8), expected: [u8; 3]) -> OneBitRow {
    OneBitRow {
        d1,
        d2,
        dm,
        dk,
        expected,
    }
}

/// Equal sources (`x1 = x2 = 1`).
pub const ONE_BIT_EQUAL_SOURCES: [OneBitRow; 4] = [
    row((1, 1), (1, 1), (1, 1), (1, 1), [0, 0, 0]),
    row((1, 1), (1, 1), (1, 1), (1, 0), [0, 0, 0]),
    row((1, 1), (1, 1), (1, 1), (0, 1), [1, 1, 1]),
    row((1, 1), (1, 1), (1, 1), (0, 0), [1, 1, 1]),
];

/// Disagreeing sources (`x1 = 1`, `x2 = 0`, learned mask empty).
pub const ONE_BIT_DISAGREEING_SOURCES: [OneBitRow; 4] = [
    row((1, 1), (0, 1), (0, 0), (1, 1), [0, 1, 1]),
    row((1, 1), (0, 1), (0, 0), (1, 0), [0, 1, 0]),
    row((1, 1), (0, 1), (0, 0), (0, 1), [1, 0, 0]),
    row((1, 1), (0, 1), (0, 0), (0, 0), [1, 0, 0]),
];

/// One table cell: the listed value, the masked distance where both masks are non-empty,
/// and the directed sum `d(i,k) + d(k,i)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellEvaluation {
    pub listed: u8,
    /// `None` when a zero mask makes the distance undefined.
    pub masked: Option<f64>,
    pub directed_sum: u32,
}

impl CellEvaluation {
    pub fn masked_reproduces(&self) -> bool {
        self.masked == Some(self.listed as f64)
    }

    pub fn directed_sum_reproduces(&self) -> bool {
        self.directed_sum == self.listed as u32
    }
}

pub fn one_bit_codeword((x, y): (u8, u8)) -> Codeword {
    Codeword::new(BitVector::from_bits([x == 1]), BitVector::from_bits([y == 1])).expect("one bit")
}

/// Evaluate the three distance cells of a table row against `Dk`.
pub fn evaluate_row(r: &OneBitRow) -> [CellEvaluation; 3] {
    let dk = one_bit_codeword(r.dk);
    let cells = [r.d1, r.d2, r.dm];
    std::array::from_fn(|i| {
        let di = one_bit_codeword(cells[i]);
        let forward = super::directed_masked_distance(&di, &dk).expect("one bit");
        let backward = super::directed_masked_distance(&dk, &di).expect("one bit");
        CellEvaluation {
            listed: r.expected[i],
            masked: super::masked_hamming(&di, &dk).ok(),
            directed_sum: forward + backward,
        }
    })
}
