//! Datasets, ground truth, precision/recall scoring, threshold sweeps and
//! latency benchmarks.

mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codeword::{learn_codeword, mask_from_descriptors};
use crate::descriptor::{binary_tests, Patch, TestPattern, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::frontend::{filter_keypoints, Frame};
use crate::pipeline::{Detection, FrameStats, LoopDetector};
use crate::vocabulary::DetectionParams;

pub use synthetic::{generate_synthetic, SyntheticConfig};

/// Valid `(query_frame, match_frame)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruth {
    valid_pairs: BTreeSet<(usize, usize)>,
}

impl GroundTruth {
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut gt = GroundTruth::default();
        for (q, m) in pairs {
            if m >= q {
                return Err(Error::InvalidConfig(format!(
                    "ground-truth match {m} does not precede query {q}"
                )));
            }
            gt.valid_pairs.insert((q, m));
        }
        Ok(gt)
    }

    pub fn contains(&self, query: usize, matched: usize) -> bool {
        self.valid_pairs.contains(&(query, matched))
    }

    pub fn pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.valid_pairs
    }

    pub fn len(&self) -> usize {
        self.valid_pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid_pairs.is_empty()
    }

    pub fn query_frames(&self) -> BTreeSet<usize> {
        self.valid_pairs.iter().map(|&(q, _)| q).collect()
    }

    pub fn to_text(&self) -> String {
        self.valid_pairs.iter().map(|(q, m)| format!("{q} {m}\n")).collect()
    }
}

pub fn parse_ground_truth(text: &str) -> Result<GroundTruth> {
    let mut gt = GroundTruth::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::parse(i + 1, format!("expected `query match`, got {line:?}"));
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 2 {
            return Err(bad());
        }
        let q: usize = f[0].parse().map_err(|_| bad())?;
        let m: usize = f[1].parse().map_err(|_| bad())?;
        if m >= q {
            return Err(Error::parse(i + 1, format!("match {m} must precede query {q}")));
        }
        if !gt.valid_pairs.insert((q, m)) {
            return Err(Error::parse(i + 1, format!("duplicate pair {q} {m}")));
        }
    }
    Ok(gt)
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    parse_ground_truth(&fs::read_to_string(path)?).map_err(|e| e.in_file(path))
}

#[derive(Clone, Debug)]
pub enum FrameSource {
    Image(GrayImage),
    File(PathBuf),
}

/// Ordered frames; index is the frame id.
#[derive(Clone, Debug, Default)]
pub struct Sequence {
    frames: Vec<FrameSource>,
    keypoints: Option<BTreeMap<usize, Vec<(u32, u32)>>>,
}

impl Sequence {
    pub fn from_images(images: Vec<GrayImage>) -> Self {
        Sequence {
            frames: images.into_iter().map(FrameSource::Image).collect(),
            keypoints: None,
        }
    }

    pub fn from_files(paths: Vec<PathBuf>) -> Self {
        Sequence {
            frames: paths.into_iter().map(FrameSource::File).collect(),
            keypoints: None,
        }
    }

    /// Use externally supplied keypoints instead of detection.
    pub fn with_keypoints(mut self, keypoints: BTreeMap<usize, Vec<(u32, u32)>>) -> Self {
        self.keypoints = Some(keypoints);
        self
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn sources(&self) -> &[FrameSource] {
        &self.frames
    }

    pub fn image(&self, id: usize) -> Result<GrayImage> {
        match &self.frames[id] {
            FrameSource::Image(img) => Ok(img.clone()),
            FrameSource::File(p) => Ok(image::open(p)?.to_luma8()),
        }
    }

    /// Frame `id`, with ingested keypoints filtered against `params`' ROI.
    pub fn frame(&self, id: usize, params: &DetectionParams) -> Result<Frame> {
        let mut frame = Frame::new(id, self.image(id)?);
        if let Some(map) = &self.keypoints {
            let pts = map.get(&id).map(Vec::as_slice).unwrap_or(&[]);
            let (w, h) = frame.image.dimensions();
            let ing = filter_keypoints(w, h, pts, &params.roi);
            frame.keypoints = Some(ing.keypoints);
        }
        Ok(frame)
    }

    /// Write frames as binary PGM files plus a manifest naming them.
    pub fn write_pgm_dir(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut manifest = String::new();
        for id in 0..self.len() {
            let name = format!("frame_{id:05}.pgm");
            write_pgm(&self.image(id)?, dir.join(&name))?;
            manifest.push_str(&name);
            manifest.push('\n');
        }
        let path = dir.join("manifest.txt");
        fs::write(&path, manifest)?;
        Ok(path)
    }
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let file = std::io::BufWriter::new(fs::File::create(path)?);
    PnmEncoder::new(file)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::L8)?;
    Ok(())
}

/// Manifest: one image path per line, relative paths resolved against the
/// manifest's directory. Blank lines and `#` comments are skipped.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Sequence> {
    let mut seen = BTreeSet::new();
    let mut paths = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p = base.join(line);
        if !seen.insert(p.clone()) {
            return Err(Error::parse(i + 1, format!("duplicate image {line:?}")));
        }
        if !p.is_file() {
            return Err(Error::parse(i + 1, format!("image {} not found", p.display())));
        }
        paths.push(p);
    }
    Ok(Sequence::from_files(paths))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Sequence> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&fs::read_to_string(path)?, base).map_err(|e| e.in_file(path))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PRPoint {
    pub psi: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Score accepted detections against ground truth. `psi` is left at zero for
/// the caller to fill in.
pub fn score(detections: &[Detection], gt: &GroundTruth) -> PRPoint {
    let (mut tp, mut fp) = (0, 0);
    let mut detected = BTreeSet::new();
    for d in detections {
        if let Some(m) = d.matched_frame_id {
            detected.insert(d.query_frame_id);
            if gt.contains(d.query_frame_id, m) {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let fn_ = gt.query_frames().iter().filter(|q| !detected.contains(q)).count();
    let precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    PRPoint {
        psi: 0.0,
        precision,
        recall,
        tp,
        fp,
        fn_,
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub detections: Vec<Detection>,
    pub stats: Vec<FrameStats>,
}

/// Run the detector over a whole sequence.
pub fn run_sequence(seq: &Sequence, params: &DetectionParams, pattern: &TestPattern) -> Result<RunOutput> {
    let mut det = LoopDetector::new(params.clone(), pattern.clone())?;
    let mut detections = Vec::with_capacity(seq.len());
    for id in 0..seq.len() {
        detections.push(det.process_frame(&seq.frame(id, params)?)?);
    }
    Ok(RunOutput {
        detections,
        stats: det.stats().to_vec(),
    })
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    /// One point per threshold, ordered by ascending threshold.
    pub points: Vec<PRPoint>,
    /// `tp + fp` never decreases as the threshold grows.
    pub monotone: bool,
    pub best_recall_at_full_precision: Option<f64>,
}

/// One pipeline run per matching threshold, all else fixed. Runs in parallel.
pub fn sweep(
    seq: &Sequence,
    params: &DetectionParams,
    pattern: &TestPattern,
    psi_list: &[f64],
    gt: &GroundTruth,
) -> Result<SweepResult> {
    if psi_list.is_empty() {
        return Err(Error::EmptyInput("threshold list"));
    }
    let mut points = psi_list
        .par_iter()
        .map(|&psi| {
            let p = DetectionParams { psi, ..params.clone() };
            let run = run_sequence(seq, &p, pattern)?;
            Ok(PRPoint {
                psi,
                ..score(&run.detections, gt)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.psi.total_cmp(&b.psi));
    let monotone = points.windows(2).all(|w| w[0].tp + w[0].fp <= w[1].tp + w[1].fp);
    let best_recall_at_full_precision = points
        .iter()
        .filter(|p| p.precision == 1.0)
        .map(|p| p.recall)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    Ok(SweepResult {
        points,
        monotone,
        best_recall_at_full_precision,
    })
}

/// PR table; `detections_monotone` flags whether `tp + fp` has not dropped
/// relative to the previous row.
pub fn write_pr_csv<W: Write>(mut w: W, points: &[PRPoint]) -> Result<()> {
    writeln!(w, "psi,precision,recall,tp,fp,fn,detections_monotone")?;
    let mut prev: Option<usize> = None;
    for p in points {
        let n = p.tp + p.fp;
        let mono = prev.is_none_or(|q| n >= q);
        writeln!(
            w,
            "{},{:.6},{:.6},{},{},{},{}",
            p.psi, p.precision, p.recall, p.tp, p.fp, p.fn_, mono
        )?;
        prev = Some(n);
    }
    Ok(())
}

/// Parse `8,10,12` into thresholds.
pub fn parse_psi_list(s: &str) -> Result<Vec<f64>> {
    let v: Option<Vec<f64>> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().ok().filter(|x| x.is_finite() && *x > 0.0))
        .collect();
    match v {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(Error::InvalidConfig(format!("bad threshold list {s:?}"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingStats {
    pub mean: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl TimingStats {
    /// Population statistics of samples given in microseconds.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("timing samples"));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(TimingStats {
            // Summation rounding can push the mean a hair outside [min, max].
            mean: mean.clamp(min, max),
            stddev: var.sqrt(),
            min,
            max,
            samples: samples.len(),
        })
    }

    pub fn max_min_ratio(&self) -> f64 {
        if self.min > 0.0 {
            self.max / self.min
        } else {
            f64::INFINITY
        }
    }
}

/// Patch pairs for benchmarking.
#[derive(Clone, Debug)]
pub enum PatchSource {
    Constant(u64),
    /// Random smoothed 48x48 pairs drawn from a seed.
    Random {
        seed: u64,
        pool: usize,
    },
    Pairs(Vec<(Patch, Patch)>),
}

impl PatchSource {
    fn materialize(&self) -> Result<Vec<(Patch, Patch)>> {
        match self {
            PatchSource::Constant(v) => {
                let p = Patch::constant(PATCH_SIZE, PATCH_SIZE, *v);
                Ok(vec![(p.clone(), p)])
            }
            PatchSource::Random { seed, pool } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..(*pool).max(1))
                    .map(|_| crate::codeword::properties::sample_matched_patches(&mut rng, PATCH_SIZE, PATCH_SIZE))
                    .collect())
            }
            PatchSource::Pairs(v) if v.is_empty() => Err(Error::EmptyInput("patch pairs")),
            PatchSource::Pairs(v) => Ok(v.clone()),
        }
    }
}

pub const MIN_BENCH_TRIALS: usize = 100;

fn time_trials(
    n_trials: usize,
    pairs: &[(Patch, Patch)],
    mut f: impl FnMut(&Patch, &Patch) -> Result<()>,
) -> Result<TimingStats> {
    if n_trials < MIN_BENCH_TRIALS {
        return Err(Error::InvalidConfig(format!(
            "at least {MIN_BENCH_TRIALS} trials required"
        )));
    }
    // Warm caches and the allocator.
    for (a, b) in pairs.iter().take(8) {
        f(a, b)?;
    }
    let mut samples = Vec::with_capacity(n_trials);
    for t in 0..n_trials {
        let (a, b) = &pairs[t % pairs.len()];
        let start = Instant::now();
        f(a, b)?;
        samples.push(start.elapsed().as_secs_f64() * 1e6);
    }
    TimingStats::from_samples(&samples)
}

/// Wall-clock time of full codeword learning (mean patch, tests, mask) per
/// trial, in microseconds.
pub fn bench_codeword_learning(n_trials: usize, source: &PatchSource, pattern: &TestPattern) -> Result<TimingStats> {
    let pairs = source.materialize()?;
    time_trials(n_trials, &pairs, |a, b| {
        std::hint::black_box(learn_codeword(a, b, pattern)?);
        Ok(())
    })
}

/// Time of the binary tests on both sources plus the mask, excluding the
/// mean patch.
pub fn bench_tests_and_mask(n_trials: usize, source: &PatchSource, pattern: &TestPattern) -> Result<TimingStats> {
    let pairs = source.materialize()?;
    time_trials(n_trials, &pairs, |a, b| {
        let x1 = binary_tests(a, pattern)?;
        let x2 = binary_tests(b, pattern)?;
        std::hint::black_box(mask_from_descriptors(&x1, &x2)?);
        Ok(())
    })
}

pub fn write_timing_csv<W: Write>(mut w: W, rows: &[(&str, TimingStats)]) -> Result<()> {
    writeln!(w, "benchmark,samples,mean_us,stddev_us,min_us,max_us,max_min_ratio")?;
    for (name, s) in rows {
        writeln!(
            w,
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.3}",
            name,
            s.samples,
            s.mean,
            s.stddev,
            s.min,
            s.max,
            s.max_min_ratio()
        )?;
    }
    Ok(())
}
