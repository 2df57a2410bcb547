//! From raw frames to matched feature pairs across consecutive frames.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use image::GrayImage;

use crate::bitcore::BitVector;
use crate::descriptor::{binary_tests, Patch, TestPattern, PATCH_SIZE};
use crate::error::{Error, Result};

/// Keypoints closer than this to any border cannot host a full patch.
pub const PATCH_MARGIN: u32 = (PATCH_SIZE / 2) as u32;

/// Default half-width of the square local-search window, in pixels.
pub const DEFAULT_SEARCH_RADIUS: u32 = 50;

/// Default raw-match threshold as a fraction of the descriptor length.
pub const DEFAULT_RAW_MATCH_FRACTION: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Keypoint {
    pub u: u32,
    pub v: u32,
    pub score: u32,
}

/// Inclusive pixel rectangle `[u0, u1] x [v0, v1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Roi {
    pub u0: u32,
    pub v0: u32,
    pub u1: u32,
    pub v1: u32,
}

impl Roi {
    pub fn full() -> Self {
        Roi {
            u0: 0,
            v0: 0,
            u1: u32::MAX,
            v1: u32::MAX,
        }
    }

    #[inline]
    pub fn contains(&self, u: u32, v: u32) -> bool {
        (self.u0..=self.u1).contains(&u) && (self.v0..=self.v1).contains(&v)
    }

    /// Parse `u0,v0,u1,v1`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let nums: Option<Vec<u32>> = parts.iter().map(|p| p.parse().ok()).collect();
        match nums.as_deref() {
            Some(&[u0, v0, u1, v1]) if u0 <= u1 && v0 <= v1 => Ok(Roi { u0, v0, u1, v1 }),
            _ => Err(Error::InvalidConfig(format!(
                "roi must be u0,v0,u1,v1 with u0<=u1 and v0<=v1, got {s:?}"
            ))),
        }
    }
}

impl Default for Roi {
    fn default() -> Self {
        Roi::full()
    }
}

#[inline]
fn patch_fits(width: u32, height: u32, u: u32, v: u32) -> bool {
    u >= PATCH_MARGIN && v >= PATCH_MARGIN && u + PATCH_MARGIN <= width && v + PATCH_MARGIN <= height
}

#[derive(Clone, Debug)]
pub struct Frame {
    pub id: usize,
    pub image: GrayImage,
    /// Externally supplied keypoints; detection runs when `None`.
    pub keypoints: Option<Vec<Keypoint>>,
}

impl Frame {
    pub fn new(id: usize, image: GrayImage) -> Self {
        Frame {
            id,
            image,
            keypoints: None,
        }
    }
}

// 16-pixel Bresenham circle of radius 3, clockwise from the top.
const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

const ARC_LENGTH: usize = 9;

/// FAST-9 score at `(u, v)`, or `None` if it is not a corner.
///
/// The score sums `|I(p) - I(c)|` over the longest contiguous arc of circle
/// pixels that are all brighter than `c + threshold` or all darker than
/// `c - threshold`.
fn fast_score(img: &GrayImage, u: u32, v: u32, threshold: u8) -> Option<u32> {
    let w = img.width() as i32;
    let raw = img.as_raw();
    let c = raw[(v as i32 * w + u as i32) as usize] as i32;
    let t = threshold as i32;
    let mut ring = [0i32; 16];
    for (r, &(du, dv)) in ring.iter_mut().zip(&CIRCLE) {
        *r = raw[((v as i32 + dv) * w + u as i32 + du) as usize] as i32;
    }

    let mut best: Option<u32> = None;
    for sign in [1i32, -1] {
        let passes = |p: i32| if sign > 0 { p > c + t } else { p < c - t };
        if ring.iter().all(|&p| passes(p)) {
            let s = ring.iter().map(|&p| (p - c).unsigned_abs()).sum();
            return Some(s);
        }
        // Walk the doubled ring to catch arcs that wrap past index 15.
        let mut run = 0;
        let mut sum = 0u32;
        for i in 0..32 {
            let p = ring[i % 16];
            if passes(p) {
                run += 1;
                sum += (p - c).unsigned_abs();
                if (ARC_LENGTH..=16).contains(&run) {
                    // A longer run extends the same arc; keep the largest total.
                    best = Some(best.map_or(sum, |b| b.max(sum)));
                }
            } else {
                run = 0;
                sum = 0;
            }
        }
    }
    best
}

/// FAST-9 detection with 3x3 non-maximum suppression over the region where a
/// full patch can be extracted and `roi` holds.
pub fn detect_keypoints(image: &GrayImage, threshold: u8, roi: &Roi) -> Result<Vec<Keypoint>> {
    let (w, h) = image.dimensions();
    if w < 7 || h < 7 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: 7,
        });
    }
    let mut scores = vec![0u32; (w * h) as usize];
    let mut candidates = Vec::new();
    for v in 3..h - 3 {
        for u in 3..w - 3 {
            if let Some(s) = fast_score(image, u, v, threshold) {
                scores[(v * w + u) as usize] = s;
                candidates.push((u, v, s));
            }
        }
    }
    let mut out = Vec::new();
    'cand: for (u, v, s) in candidates {
        if !patch_fits(w, h, u, v) || !roi.contains(u, v) {
            continue;
        }
        for dv in -1i32..=1 {
            for du in -1i32..=1 {
                if (du, dv) == (0, 0) {
                    continue;
                }
                let (nu, nv) = ((u as i32 + du) as u32, (v as i32 + dv) as u32);
                let ns = scores[(nv * w + nu) as usize];
                // Ties go to the earlier pixel in raster order.
                let earlier = (dv, du) < (0, 0);
                if ns > s || (ns == s && earlier) {
                    continue 'cand;
                }
            }
        }
        out.push(Keypoint { u, v, score: s });
    }
    Ok(out)
}

/// Keypoints kept by [`ingest_keypoints`] and how many were dropped.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ingested {
    pub keypoints: Vec<Keypoint>,
    pub dropped: usize,
}

/// Attach externally supplied keypoints to a frame, dropping those that
/// violate the patch margin or lie outside `roi`.
pub fn ingest_keypoints(frame: &mut Frame, points: &[(u32, u32)], roi: &Roi) -> usize {
    let ing = filter_keypoints(frame.image.width(), frame.image.height(), points, roi);
    frame.keypoints = Some(ing.keypoints);
    ing.dropped
}

pub fn filter_keypoints(width: u32, height: u32, points: &[(u32, u32)], roi: &Roi) -> Ingested {
    let mut ing = Ingested::default();
    for &(u, v) in points {
        if patch_fits(width, height, u, v) && roi.contains(u, v) {
            ing.keypoints.push(Keypoint { u, v, score: 0 });
        } else {
            ing.dropped += 1;
        }
    }
    ing
}

/// Parse a keypoint file of `frame_id u v` lines into per-frame lists.
pub fn parse_keypoint_file(text: &str) -> Result<BTreeMap<usize, Vec<(u32, u32)>>> {
    let mut map: BTreeMap<usize, Vec<(u32, u32)>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::parse(i + 1, format!("expected `frame_id u v`, got {line:?}"));
        if f.len() != 3 {
            return Err(bad());
        }
        let id: usize = f[0].parse().map_err(|_| bad())?;
        let u: u32 = f[1].parse().map_err(|_| bad())?;
        let v: u32 = f[2].parse().map_err(|_| bad())?;
        map.entry(id).or_default().push((u, v));
    }
    Ok(map)
}

pub fn load_keypoint_file(path: impl AsRef<Path>) -> Result<BTreeMap<usize, Vec<(u32, u32)>>> {
    let path = path.as_ref();
    parse_keypoint_file(&fs::read_to_string(path)?).map_err(|e| e.in_file(path))
}

/// The raw 48x48 window around `kp`: rows `v-24..v+24`, columns `u-24..u+24`.
pub fn crop_patch(image: &GrayImage, kp: &Keypoint) -> Result<Patch> {
    let (w, h) = image.dimensions();
    if !patch_fits(w, h, kp.u, kp.v) {
        return Err(Error::MarginViolation {
            u: kp.u,
            v: kp.v,
            margin: PATCH_MARGIN,
        });
    }
    let (u0, v0) = ((kp.u - PATCH_MARGIN) as usize, (kp.v - PATCH_MARGIN) as usize);
    let raw = image.as_raw();
    let stride = w as usize;
    Ok(Patch::from_fn(PATCH_SIZE, PATCH_SIZE, |u, v| {
        raw[(v0 + v) * stride + u0 + u] as u64
    }))
}

/// Cropped and smoothed patch around `kp`.
pub fn extract_patch(image: &GrayImage, kp: &Keypoint) -> Result<Patch> {
    Ok(crop_patch(image, kp)?.smooth())
}

/// A frame's keypoints with their smoothed patches and raw descriptors.
#[derive(Clone, Debug)]
pub struct FrameFeatures {
    pub frame_id: usize,
    pub keypoints: Vec<Keypoint>,
    pub patches: Vec<Patch>,
    pub descriptors: Vec<BitVector>,
}

impl FrameFeatures {
    pub fn extract(
        frame_id: usize,
        image: &GrayImage,
        keypoints: Vec<Keypoint>,
        pattern: &TestPattern,
    ) -> Result<Self> {
        let mut patches = Vec::with_capacity(keypoints.len());
        let mut descriptors = Vec::with_capacity(keypoints.len());
        for kp in &keypoints {
            let p = extract_patch(image, kp)?;
            descriptors.push(binary_tests(&p, pattern)?);
            patches.push(p);
        }
        Ok(FrameFeatures {
            frame_id,
            keypoints,
            patches,
            descriptors,
        })
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchPair {
    pub prev_index: usize,
    pub cur_index: usize,
    pub kp_prev: Keypoint,
    pub kp_cur: Keypoint,
    pub x_prev: BitVector,
    pub x_cur: BitVector,
    pub distance: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchParams {
    /// Maximum number of pairs kept (Γ).
    pub max_pairs: usize,
    pub search_radius: u32,
    /// Largest accepted raw Hamming distance.
    pub max_distance: u32,
}

impl MatchParams {
    pub fn new(max_pairs: usize, bits: usize) -> Self {
        MatchParams {
            max_pairs,
            search_radius: DEFAULT_SEARCH_RADIUS,
            max_distance: (bits as f64 * DEFAULT_RAW_MATCH_FRACTION) as u32,
        }
    }
}

#[inline]
fn within_window(a: &Keypoint, b: &Keypoint, radius: u32) -> bool {
    a.u.abs_diff(b.u) <= radius && a.v.abs_diff(b.v) <= radius
}

/// Best candidate on the other side within the window: smallest distance,
/// then lowest index.
fn best_candidate(kp: &Keypoint, x: &BitVector, others: &FrameFeatures, radius: u32) -> Option<(usize, u32)> {
    let mut best: Option<(usize, u32)> = None;
    for (j, (okp, ox)) in others.keypoints.iter().zip(&others.descriptors).enumerate() {
        if !within_window(kp, okp, radius) {
            continue;
        }
        let d = x.hamming(ox).ok()?;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best
}

/// Mutual-best raw descriptor matches within a local window, ascending by
/// distance and truncated to `params.max_pairs`.
pub fn match_features(prev: &FrameFeatures, cur: &FrameFeatures, params: &MatchParams) -> Vec<MatchPair> {
    let mut pairs = Vec::new();
    for (i, (kp, x)) in prev.keypoints.iter().zip(&prev.descriptors).enumerate() {
        let Some((j, d)) = best_candidate(kp, x, cur, params.search_radius) else {
            continue;
        };
        if d > params.max_distance {
            continue;
        }
        let back = best_candidate(&cur.keypoints[j], &cur.descriptors[j], prev, params.search_radius);
        if back.map(|(bi, _)| bi) != Some(i) {
            continue;
        }
        pairs.push(MatchPair {
            prev_index: i,
            cur_index: j,
            kp_prev: *kp,
            kp_cur: cur.keypoints[j],
            x_prev: x.clone(),
            x_cur: cur.descriptors[j].clone(),
            distance: d,
        });
    }
    pairs.sort_by_key(|p| (p.distance, p.prev_index));
    pairs.truncate(params.max_pairs);
    pairs
}
