//! Image patches, binary test patterns, and descriptor extraction.
//!
//! Patch intensities are kept as exact rationals: an integer numerator per
//! pixel over a denominator shared by the whole patch. Smoothing and patch
//! averaging only ever grow the denominator, so no comparison used by a binary
//! test is affected by rounding.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use image::GrayImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bitcore::BitVector;
use crate::error::{Error, Result};

/// Side of the square patch cut around every keypoint.
pub const PATCH_SIZE: usize = 48;

/// Radius of the square box filter applied before binary tests (5x5 kernel).
pub const SMOOTH_RADIUS: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patch {
    width: usize,
    height: usize,
    numer: Vec<u64>,
    denom: u64,
}

impl Patch {
    /// Integer intensities, row-major.
    pub fn new(width: usize, height: usize, values: Vec<u64>) -> Result<Self> {
        Self::with_denominator(width, height, values, 1)
    }

    /// Intensities `values[i] / denom`, row-major.
    pub fn with_denominator(width: usize, height: usize, values: Vec<u64>, denom: u64) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "{} values given for a {width}x{height} patch",
                values.len()
            )));
        }
        if denom == 0 {
            return Err(Error::InvalidConfig("patch denominator must be positive".into()));
        }
        Ok(Patch {
            width,
            height,
            numer: values,
            denom,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u64) -> Self {
        let mut numer = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                numer.push(f(u, v));
            }
        }
        Patch {
            width,
            height,
            numer,
            denom: 1,
        }
    }

    pub fn constant(width: usize, height: usize, value: u64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        Patch {
            width: img.width() as usize,
            height: img.height() as usize,
            numer: img.as_raw().iter().map(|&p| p as u64).collect(),
            denom: 1,
        }
    }

    /// Load an 8-bit PGM crop.
    pub fn load_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?.into_luma8();
        Ok(Self::from_gray(&img))
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn denominator(&self) -> u64 {
        self.denom
    }

    /// Numerator of the intensity at column `u`, row `v`.
    #[inline]
    pub fn numerator(&self, u: usize, v: usize) -> u64 {
        self.numer[v * self.width + u]
    }

    pub fn value(&self, u: usize, v: usize) -> f64 {
        self.numerator(u, v) as f64 / self.denom as f64
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numer
    }

    fn check_same_dims(&self, other: &Patch) -> Result<()> {
        if self.dimensions() != other.dimensions() {
            return Err(Error::DimensionMismatch {
                expected: self.dimensions(),
                found: other.dimensions(),
            });
        }
        Ok(())
    }

    /// Exact pixel-wise mean `(a + b) / 2`.
    pub fn mean(a: &Patch, b: &Patch) -> Result<Patch> {
        a.check_same_dims(b)?;
        let (numer, denom) = if a.denom == b.denom {
            let n = a.numer.iter().zip(&b.numer).map(|(x, y)| x + y).collect();
            (n, 2 * a.denom)
        } else {
            let n = a
                .numer
                .iter()
                .zip(&b.numer)
                .map(|(x, y)| x * b.denom + y * a.denom)
                .collect();
            (n, 2 * a.denom * b.denom)
        };
        Ok(Patch {
            width: a.width,
            height: a.height,
            numer,
            denom,
        })
    }

    /// 5x5 box filter; reads outside the patch clamp to the nearest edge pixel.
    pub fn smooth(&self) -> Patch {
        let (w, h) = (self.width, self.height);
        if w == 0 || h == 0 {
            return self.clone();
        }
        let r = SMOOTH_RADIUS as isize;
        let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

        let mut horiz = vec![0u64; w * h];
        for v in 0..h {
            let row = &self.numer[v * w..(v + 1) * w];
            for u in 0..w {
                let mut s = 0;
                for d in -r..=r {
                    s += row[clamp(u as isize + d, w)];
                }
                horiz[v * w + u] = s;
            }
        }
        let mut out = vec![0u64; w * h];
        for v in 0..h {
            for d in -r..=r {
                let src = clamp(v as isize + d, h) * w;
                for u in 0..w {
                    out[v * w + u] += horiz[src + u];
                }
            }
        }
        let k = (2 * SMOOTH_RADIUS + 1) as u64;
        Patch {
            width: w,
            height: h,
            numer: out,
            denom: self.denom * k * k,
        }
    }
}

/// Free-function form of [`Patch::smooth`].
pub fn smooth(patch: &Patch) -> Patch {
    patch.smooth()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PixelPos {
    pub u: u16,
    pub v: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TestPair {
    pub a: PixelPos,
    pub b: PixelPos,
}

impl TestPair {
    #[inline]
    fn index_a(&self, width: usize) -> usize {
        self.a.v as usize * width + self.a.u as usize
    }

    #[inline]
    fn index_b(&self, width: usize) -> usize {
        self.b.v as usize * width + self.b.u as usize
    }
}

/// Ordered list of pixel-pair comparisons, one per descriptor bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestPattern {
    pairs: Vec<TestPair>,
    width: usize,
    height: usize,
    provenance: String,
}

impl TestPattern {
    pub fn new(pairs: Vec<TestPair>, patch_size: (usize, usize), provenance: impl Into<String>) -> Result<Self> {
        let (width, height) = patch_size;
        if pairs.is_empty() {
            return Err(Error::EmptyInput("test pattern has no pairs"));
        }
        for (i, p) in pairs.iter().enumerate() {
            validate_pair(p, width, height).map_err(|m| Error::InvalidConfig(format!("pair {i}: {m}")))?;
        }
        Ok(TestPattern {
            pairs,
            width,
            height,
            provenance: provenance.into(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[TestPair] {
        &self.pairs
    }

    pub fn patch_size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    fn check_patch(&self, patch: &Patch) -> Result<()> {
        if patch.dimensions() != self.patch_size() {
            return Err(Error::DimensionMismatch {
                expected: self.patch_size(),
                found: patch.dimensions(),
            });
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut pattern = parse_pattern(&text).map_err(|e| e.in_file(path))?;
        pattern.provenance = format!("file:{}", path.display());
        Ok(pattern)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.len(), self.width, self.height);
        for p in &self.pairs {
            let _ = writeln!(s, "{} {} {} {}", p.a.u, p.a.v, p.b.u, p.b.v);
        }
        s
    }
}

fn validate_pair(p: &TestPair, width: usize, height: usize) -> std::result::Result<(), String> {
    for pos in [p.a, p.b] {
        if pos.u as usize >= width || pos.v as usize >= height {
            return Err(format!(
                "coordinate ({}, {}) outside {width}x{height} patch",
                pos.u, pos.v
            ));
        }
    }
    if p.a == p.b {
        return Err(format!("degenerate pair at ({}, {})", p.a.u, p.a.v));
    }
    Ok(())
}

/// Parse the text pattern format: a `L width height` header line followed by
/// `L` lines of `u_a v_a u_b v_b`.
pub fn parse_pattern(text: &str) -> Result<TestPattern> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
    let h = parse_fields::<usize>(header, 3, hline)?;
    let (count, width, height) = (h[0], h[1], h[2]);
    if width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::parse(hline, "patch dimensions exceed 65535"));
    }

    let mut pairs = Vec::with_capacity(count);
    let mut last_line = hline;
    for (lineno, line) in lines {
        last_line = lineno;
        if pairs.len() == count {
            return Err(Error::parse(lineno, format!("more than the declared {count} pairs")));
        }
        let f = parse_fields::<u16>(line, 4, lineno)?;
        let pair = TestPair {
            a: PixelPos { u: f[0], v: f[1] },
            b: PixelPos { u: f[2], v: f[3] },
        };
        validate_pair(&pair, width, height).map_err(|m| Error::parse(lineno, m))?;
        pairs.push(pair);
    }
    if pairs.len() != count {
        return Err(Error::parse(
            last_line,
            format!("expected {count} pairs, found {}", pairs.len()),
        ));
    }
    TestPattern::new(pairs, (width, height), "text")
}

fn parse_fields<T: std::str::FromStr>(line: &str, n: usize, lineno: usize) -> Result<Vec<T>> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != n {
        return Err(Error::parse(
            lineno,
            format!("expected {n} fields, found {}", fields.len()),
        ));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<T>()
                .map_err(|_| Error::parse(lineno, format!("invalid number {f:?}")))
        })
        .collect()
}

/// Seeded BRIEF-style pattern: both endpoints drawn from an isotropic Gaussian
/// around the patch center with sigma = width / 5, rounded and clamped.
pub fn generate_pattern(seed: u64, len: usize, patch_size: (usize, usize)) -> Result<TestPattern> {
    let (width, height) = patch_size;
    if len == 0 {
        return Err(Error::InvalidConfig("pattern length must be positive".into()));
    }
    if width < 8 || height < 8 || width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::InvalidConfig(format!(
            "patch size {width}x{height} must be at least 8x8"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = width as f64 / 5.0;
    let nu = Normal::new(width as f64 / 2.0, sigma).expect("finite sigma");
    let nv = Normal::new(height as f64 / 2.0, sigma).expect("finite sigma");
    let draw = |rng: &mut ChaCha8Rng| PixelPos {
        u: nu.sample(rng).round().clamp(0.0, (width - 1) as f64) as u16,
        v: nv.sample(rng).round().clamp(0.0, (height - 1) as f64) as u16,
    };
    let pairs = (0..len)
        .map(|_| {
            let a = draw(&mut rng);
            let mut b = draw(&mut rng);
            while b == a {
                b = draw(&mut rng);
            }
            TestPair { a, b }
        })
        .collect();
    TestPattern::new(pairs, patch_size, format!("seed:{seed}"))
}

pub fn load_pattern(path: impl AsRef<Path>) -> Result<TestPattern> {
    TestPattern::load(path)
}

pub fn save_pattern(pattern: &TestPattern, path: impl AsRef<Path>) -> Result<()> {
    pattern.save(path)
}

fn pack_tests(len: usize, mut bit: impl FnMut(usize) -> bool) -> BitVector {
    let mut words = vec![0u64; len.div_ceil(64)];
    for i in 0..len {
        words[i / 64] |= (bit(i) as u64) << (i % 64);
    }
    BitVector::from_words(len, words)
}

/// Bit `i` is set iff `I(a_i) < I(b_i)`; ties give 0.
pub fn binary_tests(patch: &Patch, pattern: &TestPattern) -> Result<BitVector> {
    pattern.check_patch(patch)?;
    let w = patch.width;
    let px = &patch.numer;
    let pairs = &pattern.pairs;
    Ok(pack_tests(pairs.len(), |i| {
        px[pairs[i].index_a(w)] < px[pairs[i].index_b(w)]
    }))
}

/// Binary tests on the exact mean of two patches without materializing it.
pub fn mean_binary_tests(p1: &Patch, p2: &Patch, pattern: &TestPattern) -> Result<BitVector> {
    pattern.check_patch(p1)?;
    pattern.check_patch(p2)?;
    let w = p1.width;
    let (n1, n2) = (&p1.numer, &p2.numer);
    let (s1, s2) = (p2.denom, p1.denom);
    let pairs = &pattern.pairs;
    Ok(pack_tests(pairs.len(), |i| {
        let (a, b) = (pairs[i].index_a(w), pairs[i].index_b(w));
        n1[a] * s1 + n2[a] * s2 < n1[b] * s1 + n2[b] * s2
    }))
}

/// Outcome of the single test `pair` on `patch`.
#[inline]
pub fn test_outcome(patch: &Patch, pair: &TestPair) -> bool {
    let w = patch.width;
    patch.numer[pair.index_a(w)] < patch.numer[pair.index_b(w)]
}

/// Expected per-bit squared difference over all ordered descriptor pairs of a
/// class, in closed form: `(1/L) * sum_l (2 E[x_l^2] - 2 E[x_l]^2)`.
pub fn expected_intra_class_distance(descriptors: &[BitVector]) -> Result<f64> {
    let first = descriptors
        .first()
        .ok_or(Error::EmptyInput("intra-class distance of an empty set"))?;
    for d in &descriptors[1..] {
        first.check_len(d)?;
    }
    let len = first.len();
    if len == 0 {
        return Ok(0.0);
    }
    let k = descriptors.len() as f64;
    let mut total = 0.0;
    for l in 0..len {
        // x is binary, so E[x^2] = E[x].
        let mean = descriptors.iter().filter(|d| d.get(l)).count() as f64 / k;
        total += 2.0 * mean - 2.0 * mean * mean;
    }
    Ok(total / len as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_patch(rng: &mut impl Rng, w: usize, h: usize) -> Patch {
        Patch::from_fn(w, h, |_, _| rng.random_range(0..256))
    }

    #[test]
    fn smoothing_preserves_constants() {
        let p = Patch::constant(48, 48, 77);
        let s = p.smooth();
        assert_eq!(s.dimensions(), (48, 48));
        for v in 0..48 {
            for u in 0..48 {
                assert_eq!(s.value(u, v), 77.0);
            }
        }
    }

    /// Naive 5x5 clamped convolution.
    fn convolve_oracle(p: &Patch, kernel: &[Vec<u64>]) -> Vec<u64> {
        let r = (kernel.len() / 2) as isize;
        let (w, h) = p.dimensions();
        let mut out = Vec::new();
        for v in 0..h as isize {
            for u in 0..w as isize {
                let mut s = 0;
                for dv in -r..=r {
                    for du in -r..=r {
                        let uu = (u + du).clamp(0, w as isize - 1) as usize;
                        let vv = (v + dv).clamp(0, h as isize - 1) as usize;
                        s += kernel[(dv + r) as usize][(du + r) as usize] * p.numerator(uu, vv);
                    }
                }
                out.push(s);
            }
        }
        out
    }

    #[test]
    fn single_bright_pixel_spreads_to_plateau() {
        let p = Patch::from_fn(16, 16, |u, v| if (u, v) == (8, 8) { 250 } else { 0 });
        let s = p.smooth();
        for v in 0..16 {
            for u in 0..16 {
                let inside = (6..=10).contains(&u) && (6..=10).contains(&v);
                assert_eq!(s.value(u, v), if inside { 10.0 } else { 0.0 });
            }
        }
        // At a corner, clamping folds the kernel back onto the pixel.
        let c = Patch::from_fn(16, 16, |u, v| if (u, v) == (0, 0) { 250 } else { 0 });
        assert_eq!(
            c.smooth().numerators(),
            convolve_oracle(&c, &vec![vec![1; 5]; 5]).as_slice()
        );
        assert_eq!(c.smooth().value(0, 0), 250.0 * 9.0 / 25.0);
    }

    #[test]
    fn smoothing_matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_patch(&mut rng, 20, 13);
        assert_eq!(
            p.smooth().numerators(),
            convolve_oracle(&p, &vec![vec![1; 5]; 5]).as_slice()
        );
        assert_eq!(p.smooth().denominator(), 25);
    }

    #[test]
    fn double_smoothing_is_a_9x9_triangular_kernel_in_the_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_patch(&mut rng, 30, 30);
        let twice = p.smooth().smooth();
        assert_eq!(twice.denominator(), 625);
        let tri = [1u64, 2, 3, 4, 5, 4, 3, 2, 1];
        let kernel: Vec<Vec<u64>> = tri.iter().map(|a| tri.iter().map(|b| a * b).collect()).collect();
        let direct = convolve_oracle(&p, &kernel);
        for v in 4..26 {
            for u in 4..26 {
                assert_eq!(twice.numerator(u, v), direct[v * 30 + u]);
            }
        }
    }

    #[test]
    fn mean_is_exact() {
        let a = Patch::new(2, 1, vec![1, 4]).unwrap();
        let b = Patch::new(2, 1, vec![2, 4]).unwrap();
        let m = Patch::mean(&a, &b).unwrap();
        assert_eq!(m.value(0, 0), 1.5);
        assert_eq!(m.value(1, 0), 4.0);
        let c = Patch::with_denominator(2, 1, vec![5, 5], 25).unwrap();
        let m2 = Patch::mean(&a, &c).unwrap();
        assert_eq!(m2.value(0, 0), 0.6);
        assert!(Patch::mean(&a, &Patch::constant(1, 2, 0)).is_err());
    }

    #[test]
    fn pattern_generation_is_deterministic_and_valid() {
        let p = generate_pattern(42, 512, (48, 48)).unwrap();
        assert_eq!(p.len(), 512);
        for pair in p.pairs() {
            assert_ne!(pair.a, pair.b);
            for pos in [pair.a, pair.b] {
                assert!(pos.u < 48 && pos.v < 48);
            }
        }
        assert_eq!(p, generate_pattern(42, 512, (48, 48)).unwrap());
        assert_ne!(p.pairs(), generate_pattern(43, 512, (48, 48)).unwrap().pairs());
        assert!(generate_pattern(1, 0, (48, 48)).is_err());
        assert!(generate_pattern(1, 8, (7, 48)).is_err());
    }

    #[test]
    fn pattern_round_trips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pattern.txt");
        let p = generate_pattern(9, 64, (48, 48)).unwrap();
        save_pattern(&p, &path).unwrap();
        let q = load_pattern(&path).unwrap();
        assert_eq!(p.pairs(), q.pairs());
        assert_eq!(p.patch_size(), q.patch_size());
    }

    #[test]
    fn pattern_parse_errors_name_the_line() {
        let err = parse_pattern("2 48 48\n0 0 1 1\n48 0 3 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");

        let err = parse_pattern("3 48 48\n0 0 1 1\n2 2 3 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("expected 3 pairs"));

        let err = parse_pattern("1 48 48\n5 5 5 5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));

        let err = parse_pattern("1 48 48\n1 2 x 4\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));

        assert!(matches!(parse_pattern("").unwrap_err(), Error::Parse { line: 1, .. }));
    }

    #[test]
    fn binary_tests_edge_cases() {
        let pattern = generate_pattern(1, 512, (48, 48)).unwrap();
        let flat = Patch::constant(48, 48, 100);
        assert_eq!(binary_tests(&flat, &pattern).unwrap().cardinality(), 0);

        let ramp = Patch::from_fn(48, 48, |u, _| u as u64);
        let pair = TestPair {
            a: PixelPos { u: 0, v: 0 },
            b: PixelPos { u: 47, v: 0 },
        };
        let single = TestPattern::new(vec![pair], (48, 48), "ramp").unwrap();
        assert!(binary_tests(&ramp, &single).unwrap().get(0));

        assert!(matches!(
            binary_tests(&Patch::constant(32, 32, 0), &pattern),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn binary_tests_match_pair_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pattern = generate_pattern(5, 512, (48, 48)).unwrap();
        for _ in 0..50 {
            let p = random_patch(&mut rng, 48, 48).smooth();
            let x = binary_tests(&p, &pattern).unwrap();
            for (i, pair) in pattern.pairs().iter().enumerate() {
                let ia = p.value(pair.a.u as usize, pair.a.v as usize);
                let ib = p.value(pair.b.u as usize, pair.b.v as usize);
                assert_eq!(x.get(i), ia < ib);
            }
        }
    }

    #[test]
    fn lazy_mean_tests_equal_materialized_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pattern = generate_pattern(6, 256, (48, 48)).unwrap();
        for _ in 0..50 {
            let a = random_patch(&mut rng, 48, 48).smooth();
            let b = random_patch(&mut rng, 48, 48);
            let m = Patch::mean(&a, &b).unwrap();
            assert_eq!(
                mean_binary_tests(&a, &b, &pattern).unwrap(),
                binary_tests(&m, &pattern).unwrap()
            );
        }
    }

    #[test]
    fn intra_class_distance_examples() {
        let x = BitVector::parse_bit_string("1011").unwrap();
        let same = vec![x.clone(), x.clone(), x];
        assert_eq!(expected_intra_class_distance(&same).unwrap(), 0.0);

        let one = BitVector::parse_bit_string("1").unwrap();
        let zero = BitVector::parse_bit_string("0").unwrap();
        assert_eq!(expected_intra_class_distance(&[one, zero]).unwrap(), 0.5);

        assert!(expected_intra_class_distance(&[]).is_err());
        assert!(expected_intra_class_distance(&[BitVector::zeros(3), BitVector::zeros(4)]).is_err());
    }

    proptest! {
        #[test]
        fn tests_ignore_affine_intensity_changes(
            seed in any::<u64>(),
            offset in 0u64..1000,
            scale in 1u64..50,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pattern = generate_pattern(seed, 128, (16, 16)).unwrap();
            let p = random_patch(&mut rng, 16, 16);
            let q = Patch::new(16, 16, p.numerators().iter().map(|x| x * scale + offset).collect()).unwrap();
            prop_assert_eq!(binary_tests(&p, &pattern).unwrap(), binary_tests(&q, &pattern).unwrap());
        }

        #[test]
        fn agreeing_tests_survive_averaging(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pattern = generate_pattern(seed ^ 1, 256, (16, 16)).unwrap();
            let a = random_patch(&mut rng, 16, 16).smooth();
            let b = random_patch(&mut rng, 16, 16).smooth();
            let xa = binary_tests(&a, &pattern).unwrap();
            let xb = binary_tests(&b, &pattern).unwrap();
            let xm = binary_tests(&Patch::mean(&a, &b).unwrap(), &pattern).unwrap();
            for i in 0..256 {
                if xa.get(i) == xb.get(i) {
                    prop_assert_eq!(xm.get(i), xa.get(i));
                }
            }
        }
    }
}
