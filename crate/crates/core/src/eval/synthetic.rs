//! Planted-loop synthetic sequences.
//!
//! The camera slides along a textured strip that is periodic horizontally, so
//! after `loop_start` frames it is back where it began. Frames
//! `loop_start..loop_start + revisit_len` re-traverse the first windows; later
//! frames continue into a texture never seen before.

use image::{GrayImage, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{GroundTruth, Sequence};
use crate::error::{Error, Result};
use crate::frontend::PATCH_MARGIN;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_frames: usize,
    pub loop_start: usize,
    pub revisit_len: usize,
    /// Bound on the per-pixel displacement of each frame's random affine
    /// perturbation, in pixels.
    pub warp_magnitude: f64,
    /// Standard deviation of additive Gaussian intensity noise.
    pub noise_sigma: f64,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    /// Horizontal camera advance per frame, in pixels.
    pub step: u32,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_frames: 200,
            loop_start: 150,
            revisit_len: 30,
            warp_magnitude: 1.0,
            noise_sigma: 2.0,
            seed: 7,
            width: 160,
            height: 160,
            step: 40,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.revisit_len == 0 || self.loop_start + self.revisit_len > self.n_frames {
            return bad(format!(
                "need 0 < revisit_len and loop_start + revisit_len <= n_frames, got {} + {} > {}",
                self.loop_start, self.revisit_len, self.n_frames
            ));
        }
        if self.revisit_len >= self.loop_start {
            return bad("revisit_len must be smaller than loop_start".into());
        }
        let min = 2 * PATCH_MARGIN + 8;
        if self.width < min || self.height < min {
            return bad(format!("frames must be at least {min}x{min}"));
        }
        if self.step == 0 || 2 * PATCH_MARGIN + self.step >= self.width {
            return bad("step must be positive and leave overlap between consecutive frames".into());
        }
        if !(self.warp_magnitude >= 0.0 && self.warp_magnitude.is_finite()) {
            return bad("warp magnitude must be non-negative".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be non-negative".into());
        }
        Ok(())
    }

    fn circumference(&self) -> f64 {
        (self.loop_start as u64 * self.step as u64) as f64
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Smooth value noise in `[0, 1]`, periodic in `x` with period `circumference`.
struct Texture {
    key: u64,
    circumference: f64,
}

// (cell size in px, weight)
const OCTAVES: [(f64, f64); 2] = [(12.0, 0.7), (5.0, 0.3)];
const CONTRAST: f64 = 5.0;

impl Texture {
    fn lattice(&self, octave: usize, ix: i64, iy: i64) -> f64 {
        let h = splitmix(self.key ^ splitmix((octave as u64) << 56 ^ (ix as u64) << 28 ^ iy as u64));
        (h >> 11) as f64 / (1u64 << 53) as f64
    }

    fn noise(&self, x: f64, y: f64) -> f64 {
        let mut total = 0.0;
        for (o, &(cell, weight)) in OCTAVES.iter().enumerate() {
            let cells = (self.circumference / cell).round().max(1.0);
            let gx = x.rem_euclid(self.circumference) / self.circumference * cells;
            let gy = y / cell;
            let (x0, y0) = (gx.floor(), gy.floor());
            let (fx, fy) = (gx - x0, gy - y0);
            let (sx, sy) = (fx * fx * (3.0 - 2.0 * fx), fy * fy * (3.0 - 2.0 * fy));
            let n = cells as i64;
            let ix0 = (x0 as i64).rem_euclid(n);
            let ix1 = (ix0 + 1) % n;
            let iy0 = y0 as i64;
            let v00 = self.lattice(o, ix0, iy0);
            let v10 = self.lattice(o, ix1, iy0);
            let v01 = self.lattice(o, ix0, iy0 + 1);
            let v11 = self.lattice(o, ix1, iy0 + 1);
            let top = v00 + sx * (v10 - v00);
            let bottom = v01 + sx * (v11 - v01);
            total += weight * (top + sy * (bottom - top));
        }
        total
    }

    fn intensity(&self, x: f64, y: f64) -> f64 {
        127.5 + 127.5 * (CONTRAST * (self.noise(x, y) - 0.5)).tanh()
    }
}

/// Random affine map with per-pixel displacement at most `bound` over a
/// `width x height` frame.
struct Warp {
    t: (f64, f64),
    m: [[f64; 2]; 2],
    center: (f64, f64),
}

impl Warp {
    fn sample<R: Rng>(rng: &mut R, bound: f64, width: u32, height: u32) -> Self {
        let center = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
        if bound == 0.0 {
            return Warp {
                t: (0.0, 0.0),
                m: [[0.0; 2]; 2],
                center,
            };
        }
        let half = bound / 2.0;
        let radius = (center.0 * center.0 + center.1 * center.1).sqrt();
        let disk = |rng: &mut R, r: f64| {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let d = r * rng.random::<f64>().sqrt();
            (d * a.cos(), d * a.sin())
        };
        let t = disk(rng, half);
        // Scale and rotation with |(s, theta)| * radius <= half.
        let (s, theta) = disk(rng, half / radius);
        Warp {
            t,
            m: [[s, -theta], [theta, s]],
            center,
        }
    }

    fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        let (du, dv) = (u - self.center.0, v - self.center.1);
        (
            u + self.t.0 + self.m[0][0] * du + self.m[0][1] * dv,
            v + self.t.1 + self.m[1][0] * du + self.m[1][1] * dv,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pass {
    Original,
    Revisit,
    Beyond,
}

/// Window index (in steps along the strip) and pass for each frame.
fn placement(cfg: &SyntheticConfig, f: usize) -> (usize, Pass) {
    if f < cfg.loop_start {
        (f, Pass::Original)
    } else if f < cfg.loop_start + cfg.revisit_len {
        (f - cfg.loop_start, Pass::Revisit)
    } else {
        (f - cfg.loop_start, Pass::Beyond)
    }
}

/// Deterministic planted-loop sequence and its ground truth.
///
/// Revisit frame `q` at window `i` is paired with original frames `i - 1`,
/// `i` and `i + 1`, where window `-1` is the last original frame.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(Sequence, GroundTruth)> {
    cfg.validate()?;
    let circumference = cfg.circumference();
    let seen = Texture {
        key: splitmix(cfg.seed),
        circumference,
    };
    let unseen = Texture {
        key: splitmix(cfg.seed ^ 0x5555_5555_5555_5555),
        circumference,
    };
    // Frames after the revisit see only new territory.
    let branch_x = (cfg.revisit_len as u64 * cfg.step as u64) as f64;
    let noise = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");

    let mut images = Vec::with_capacity(cfg.n_frames);
    for f in 0..cfg.n_frames {
        let (window, pass) = placement(cfg, f);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(f as u64 + 1);
        let warp = Warp::sample(&mut rng, cfg.warp_magnitude, cfg.width, cfg.height);
        let x0 = (window as u64 * cfg.step as u64) as f64;
        let img = GrayImage::from_fn(cfg.width, cfg.height, |u, v| {
            let (wu, wv) = warp.apply(u as f64, v as f64);
            let x = x0 + wu;
            let tex = if pass == Pass::Beyond && x >= branch_x {
                &unseen
            } else {
                &seen
            };
            let mut p = tex.intensity(x, wv);
            if cfg.noise_sigma > 0.0 {
                p += noise.sample(&mut rng);
            }
            Luma([p.round().clamp(0.0, 255.0) as u8])
        });
        images.push(img);
    }

    let mut pairs = Vec::with_capacity(3 * cfg.revisit_len);
    for i in 0..cfg.revisit_len {
        let q = cfg.loop_start + i;
        let before = if i == 0 { cfg.loop_start - 1 } else { i - 1 };
        pairs.extend([(q, before), (q, i), (q, i + 1)]);
    }
    Ok((Sequence::from_images(images), GroundTruth::new(pairs)?))
}
