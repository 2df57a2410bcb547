//! Codewords: a descriptor packaged with a mask, the masked Hamming distance
//! between them, and learning codewords from a pair of matched patches.
//!
//! A coordinate whose test outcome disagrees across the two source patches is
//! masked out. The masked Hamming distance weights each one-sided distance by
//! the other side's mask size:
//!
//! ```text
//! d(i, j)      = |(x_i ^ x_j) & y_i|
//! Dmh(D1, D2)  = (|y2| d(1,2) + |y1| d(2,1)) / (|y1| + |y2|)
//! ```
//!
//! `Dmh` is symmetric, bounded by `sqrt(|y1||y2|)` and reduces to the plain
//! Hamming distance under full masks, but it is not a metric.

pub mod properties;

use crate::bitcore::BitVector;
use crate::descriptor::{binary_tests, mean_binary_tests, test_outcome, Patch, TestPattern};
use crate::error::{Error, Result};

/// Descriptor `x` with mask `y`; set mask bits are the coordinates that count.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Codeword {
    x: BitVector,
    y: BitVector,
}

impl Codeword {
    pub fn new(x: BitVector, y: BitVector) -> Result<Self> {
        x.check_len(&y)?;
        Ok(Codeword { x, y })
    }

    /// Codeword with every coordinate unmasked.
    pub fn full(x: BitVector) -> Self {
        let y = BitVector::ones(x.len());
        Codeword { x, y }
    }

    #[inline]
    pub fn descriptor(&self) -> &BitVector {
        &self.x
    }

    #[inline]
    pub fn mask(&self) -> &BitVector {
        &self.y
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    #[inline]
    pub fn mask_cardinality(&self) -> u32 {
        self.y.cardinality()
    }

    pub fn has_empty_mask(&self) -> bool {
        self.y.words().iter().all(|&w| w == 0)
    }

    pub fn to_text(&self) -> String {
        format!("{}\n{}\n", self.x.to_bit_string(), self.y.to_bit_string())
    }

    /// Fixture form: descriptor bit string on the first line, mask on the second.
    pub fn parse_text(text: &str) -> Result<Codeword> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let x = lines.next().ok_or_else(|| Error::parse(1, "missing descriptor line"))?;
        let y = lines.next().ok_or_else(|| Error::parse(2, "missing mask line"))?;
        if lines.next().is_some() {
            return Err(Error::parse(3, "unexpected trailing content"));
        }
        let x = BitVector::parse_bit_string(x)?;
        let y = BitVector::parse_bit_string(y).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(2, message),
            other => other,
        })?;
        Codeword::new(x, y)
    }
}

/// `|(x_i ^ x_j) & y_i|`; note `d(i, j) != d(j, i)` in general.
pub fn directed_masked_distance(di: &Codeword, dj: &Codeword) -> Result<u32> {
    di.x.check_len(&dj.x)?;
    Ok(di
        .x
        .words()
        .iter()
        .zip(dj.x.words())
        .zip(di.y.words())
        .map(|((a, b), m)| ((a ^ b) & m).count_ones())
        .sum())
}

/// Exact masked Hamming distance as `(numerator, denominator)`.
pub fn masked_hamming_ratio(d1: &Codeword, d2: &Codeword) -> Result<(u64, u64)> {
    d1.x.check_len(&d2.x)?;
    let (mut d12, mut d21, mut c1, mut c2) = (0u64, 0u64, 0u64, 0u64);
    for (((a, b), y1), y2) in
        d1.x.words()
            .iter()
            .zip(d2.x.words())
            .zip(d1.y.words())
            .zip(d2.y.words())
    {
        let diff = a ^ b;
        d12 += (diff & y1).count_ones() as u64;
        d21 += (diff & y2).count_ones() as u64;
        c1 += y1.count_ones() as u64;
        c2 += y2.count_ones() as u64;
    }
    if c1 == 0 || c2 == 0 {
        return Err(Error::ZeroMask);
    }
    Ok((c2 * d12 + c1 * d21, c1 + c2))
}

pub fn masked_hamming(d1: &Codeword, d2: &Codeword) -> Result<f64> {
    let (n, d) = masked_hamming_ratio(d1, d2)?;
    Ok(n as f64 / d as f64)
}

/// `masked_hamming(d1, d2)` if it is `<= threshold`, else `None`.
///
/// Abandons the scan once `min(|y1|,|y2|) * (d(1,2) + d(2,1)) > threshold * (|y1|+|y2|)`,
/// which lower-bounds the distance. Mask cardinalities are passed in because
/// vocabulary scans already cache them.
pub(crate) fn masked_hamming_within(
    d1: &Codeword,
    card1: u32,
    d2: &Codeword,
    card2: u32,
    threshold: f64,
) -> Option<f64> {
    if card1 == 0 || card2 == 0 || d1.len() != d2.len() {
        return None;
    }
    let total = (card1 + card2) as f64;
    let abandon = threshold * total / card1.min(card2) as f64;
    let (mut d12, mut d21) = (0u32, 0u32);
    for (((a, b), y1), y2) in
        d1.x.words()
            .iter()
            .zip(d2.x.words())
            .zip(d1.y.words())
            .zip(d2.y.words())
    {
        let diff = a ^ b;
        d12 += (diff & y1).count_ones();
        d21 += (diff & y2).count_ones();
        if (d12 + d21) as f64 > abandon {
            return None;
        }
    }
    let dist = (card2 as f64 * d12 as f64 + card1 as f64 * d21 as f64) / total;
    (dist <= threshold).then_some(dist)
}

/// `not(x1 ^ x2)`: the coordinates on which two descriptors agree.
pub fn mask_from_descriptors(x1: &BitVector, x2: &BitVector) -> Result<BitVector> {
    Ok(x1.xor(x2)?.not())
}

/// Learn a codeword from two matched, smoothed patches: the descriptor comes
/// from the exact mean patch, the mask from agreement of the two source
/// descriptors.
pub fn learn_codeword(i1: &Patch, i2: &Patch, pattern: &TestPattern) -> Result<Codeword> {
    let mean = Patch::mean(i1, i2)?;
    let xm = binary_tests(&mean, pattern)?;
    let x1 = binary_tests(i1, pattern)?;
    let x2 = binary_tests(i2, pattern)?;
    let y = mask_from_descriptors(&x1, &x2)?;
    Ok(Codeword { x: xm, y })
}

/// Learning when the source descriptors are already known, as in the
/// matching stage. The mean patch is never materialized.
pub fn learn_from_matched(
    i1: &Patch,
    i2: &Patch,
    x1: &BitVector,
    x2: &BitVector,
    pattern: &TestPattern,
) -> Result<Codeword> {
    let xm = mean_binary_tests(i1, i2, pattern)?;
    let y = mask_from_descriptors(x1, x2)?;
    Ok(Codeword { x: xm, y })
}

/// Reference learner: evaluates the mask test-by-test on the mean patch and
/// both sources. Bit `i` is unmasked iff the outcome is identical on all three.
pub fn learn_codeword_literal(i1: &Patch, i2: &Patch, pattern: &TestPattern) -> Result<Codeword> {
    let mean = Patch::mean(i1, i2)?;
    let xm = binary_tests(&mean, pattern)?;
    let mut y = BitVector::zeros(pattern.len());
    for (i, pair) in pattern.pairs().iter().enumerate() {
        let outcomes = [
            test_outcome(&mean, pair),
            test_outcome(i1, pair),
            test_outcome(i2, pair),
        ];
        let all_true = outcomes.iter().all(|&o| o);
        let all_false = outcomes.iter().all(|&o| !o);
        y.set(i, all_true || all_false);
    }
    Ok(Codeword { x: xm, y })
}

/// Merge two codewords as if they were the two sources of a learned pair.
///
/// The mask keeps coordinates unmasked in both inputs on which the descriptors
/// agree. Descriptor bits that disagree (always masked out) are taken from the
/// heavier codeword, `d1` on ties. Returns `None` when the merged mask would
/// be empty; the caller keeps both inputs.
pub fn merge_codewords(d1: &Codeword, d2: &Codeword, w1: u64, w2: u64) -> Result<Option<Codeword>> {
    d1.x.check_len(&d2.x)?;
    if d1.has_empty_mask() || d2.has_empty_mask() {
        return Err(Error::ZeroMask);
    }
    let prefer_first = w1 >= w2;
    let mut xs = Vec::with_capacity(d1.x.words().len());
    let mut ys = Vec::with_capacity(d1.x.words().len());
    for (((a, b), y1), y2) in
        d1.x.words()
            .iter()
            .zip(d2.x.words())
            .zip(d1.y.words())
            .zip(d2.y.words())
    {
        let agree = !(a ^ b);
        ys.push(y1 & y2 & agree);
        let heavy = if prefer_first { a } else { b };
        xs.push((a & agree) | (heavy & !agree));
    }
    let len = d1.len();
    let y = BitVector::from_words(len, ys);
    if y.cardinality() == 0 {
        return Ok(None);
    }
    Ok(Some(Codeword {
        x: BitVector::from_words(len, xs),
        y,
    }))
}

/// Locality-preservation factor
/// `lambda = |y_k| / (L + |y_k|) * (1 + min(|y_m|,|y_k|) / max(|y_m|,|y_k|))`.
pub fn lambda_bound(dm: &Codeword, dk: &Codeword, len: usize) -> Result<f64> {
    let (n, d) = lambda_ratio(dm.mask_cardinality(), dk.mask_cardinality(), len)?;
    Ok(n as f64 / d as f64)
}

/// Exact lambda for mask sizes `card_m`, `card_k` as `(numerator, denominator)`.
pub fn lambda_ratio(card_m: u32, card_k: u32, len: usize) -> Result<(u64, u64)> {
    if card_m == 0 || card_k == 0 {
        return Err(Error::ZeroMask);
    }
    let (m, k, l) = (card_m as u64, card_k as u64, len as u64);
    let (lo, hi) = (m.min(k), m.max(k));
    Ok((k * (hi + lo), (l + k) * hi))
}
