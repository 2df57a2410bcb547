//! Frame-by-frame loop-closure detection.
//!
//! Per frame: keypoints, smoothed patches and raw descriptors; matching
//! against the previous frame; codeword learning; retrieval against the
//! vocabulary as it stood before this frame; temporal filtering; acceptance;
//! and finally admission of the new codewords.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::codeword::{learn_from_matched, Codeword};
use crate::descriptor::TestPattern;
use crate::error::{Error, Result};
use crate::frontend::{detect_keypoints, filter_keypoints, match_features, Frame, FrameFeatures, MatchParams};
use crate::vocabulary::{likelihoods, DetectionParams, Vocabulary};

pub use crate::vocabulary::Hypothesis;

/// Consistency tolerance around the expected match, in frames.
pub const CONSISTENCY_TOLERANCE: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub query_frame_id: usize,
    /// Present only when a loop closure was accepted.
    pub matched_frame_id: Option<usize>,
    /// Likelihood of the best hypothesis, accepted or not (0 without one).
    pub likelihood: f64,
    /// Best hypothesis after filtering, kept for later consistency checks.
    pub best: Option<Hypothesis>,
}

impl Detection {
    fn none(query_frame_id: usize) -> Self {
        Detection {
            query_frame_id,
            matched_frame_id: None,
            likelihood: 0.0,
            best: None,
        }
    }
}

/// Keep hypotheses whose frame has an immediate neighbour in the list, then
/// renormalize. Output is ordered by frame id.
pub fn temporal_filter(hyps: &[Hypothesis]) -> Vec<Hypothesis> {
    let mut sorted = hyps.to_vec();
    sorted.sort_by_key(|h| h.frame_id);
    let mut kept: Vec<Hypothesis> = Vec::with_capacity(sorted.len());
    for (i, h) in sorted.iter().enumerate() {
        let left = i > 0 && sorted[i - 1].frame_id + 1 == h.frame_id;
        let right = i + 1 < sorted.len() && sorted[i + 1].frame_id == h.frame_id + 1;
        if left || right {
            kept.push(*h);
        }
    }
    let total: f64 = kept.iter().map(|h| h.likelihood).sum();
    if total > 0.0 {
        for h in &mut kept {
            h.likelihood /= total;
        }
    }
    kept
}

/// Highest likelihood, lowest frame id on ties.
pub fn best_hypothesis(hyps: &[Hypothesis]) -> Option<Hypothesis> {
    hyps.iter()
        .copied()
        .fold(None, |best: Option<Hypothesis>, h| match best {
            Some(b) if b.likelihood > h.likelihood || (b.likelihood == h.likelihood && b.frame_id <= h.frame_id) => {
                Some(b)
            }
            _ => Some(h),
        })
}

/// True iff the best hypothesis of each of the last `k` history entries lies
/// within two frames of where a steady continuation towards `candidate`
/// would have been: entry `j` back is expected at `candidate - j`.
pub fn consistency_check(history: &[Detection], candidate: &Hypothesis, k: usize) -> bool {
    if k == 0 {
        return true;
    }
    if history.len() < k {
        return false;
    }
    history.iter().rev().take(k).enumerate().all(|(j, d)| {
        let expected = candidate.frame_id as i64 - (j as i64 + 1);
        d.best
            .is_some_and(|b| (b.frame_id as i64 - expected).unsigned_abs() <= CONSISTENCY_TOLERANCE as u64)
    })
}

/// Per-frame counters and wall-clock time.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrameStats {
    pub frame_id: usize,
    pub keypoints: usize,
    pub pairs: usize,
    pub codewords: usize,
    pub vocabulary_size: usize,
    pub micros: f64,
}

pub struct LoopDetector {
    params: DetectionParams,
    pattern: TestPattern,
    vocabulary: Vocabulary,
    previous: Option<FrameFeatures>,
    history: Vec<Detection>,
    last_id: Option<usize>,
    stats: Vec<FrameStats>,
}

impl LoopDetector {
    pub fn new(params: DetectionParams, pattern: TestPattern) -> Result<Self> {
        params.validate()?;
        if pattern.len() != params.bits {
            return Err(Error::InvalidConfig(format!(
                "pattern has {} tests but {} bits were requested",
                pattern.len(),
                params.bits
            )));
        }
        Ok(LoopDetector {
            vocabulary: Vocabulary::new(params.clone()),
            params,
            pattern,
            previous: None,
            history: Vec::new(),
            last_id: None,
            stats: Vec::new(),
        })
    }

    pub fn params(&self) -> &DetectionParams {
        &self.params
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn history(&self) -> &[Detection] {
        &self.history
    }

    pub fn stats(&self) -> &[FrameStats] {
        &self.stats
    }

    fn learn(&self, prev: &FrameFeatures, cur: &FrameFeatures) -> Result<(usize, Vec<Codeword>)> {
        let mp = MatchParams {
            max_pairs: self.params.gamma,
            search_radius: self.params.search_radius,
            max_distance: self.params.raw_match_threshold(),
        };
        let pairs = match_features(prev, cur, &mp);
        let codewords = pairs
            .par_iter()
            .map(|p| {
                learn_from_matched(
                    &prev.patches[p.prev_index],
                    &cur.patches[p.cur_index],
                    &p.x_prev,
                    &p.x_cur,
                    &self.pattern,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((pairs.len(), codewords))
    }

    pub fn process_frame(&mut self, frame: &Frame) -> Result<Detection> {
        let start = Instant::now();
        if let Some(prev) = self.last_id {
            if frame.id <= prev {
                return Err(Error::OutOfOrderFrame {
                    previous: prev,
                    got: frame.id,
                });
            }
        }
        let (w, h) = frame.image.dimensions();
        let keypoints = match &frame.keypoints {
            Some(kps) => {
                let pts: Vec<(u32, u32)> = kps.iter().map(|k| (k.u, k.v)).collect();
                filter_keypoints(w, h, &pts, &self.params.roi).keypoints
            }
            None => detect_keypoints(&frame.image, self.params.upsilon, &self.params.roi)?,
        };
        let features = FrameFeatures::extract(frame.id, &frame.image, keypoints, &self.pattern)?;

        let (pairs, codewords) = match &self.previous {
            Some(prev) => self.learn(prev, &features)?,
            None => (0, Vec::new()),
        };

        let votes = self.vocabulary.query(frame.id, &codewords, self.params.t_local);
        let mut hyps = likelihoods(&votes);
        if self.params.temporal_filter {
            hyps = temporal_filter(&hyps);
        }
        let mut detection = Detection::none(frame.id);
        if let Some(best) = best_hypothesis(&hyps) {
            detection.best = Some(best);
            detection.likelihood = best.likelihood;
            if best.likelihood >= self.params.accept_likelihood
                && consistency_check(&self.history, &best, self.params.k_consistency)
            {
                detection.matched_frame_id = Some(best.frame_id);
            }
        }

        self.vocabulary.admit_frame_codewords(frame.id, &codewords)?;

        self.stats.push(FrameStats {
            frame_id: frame.id,
            keypoints: features.len(),
            pairs,
            codewords: codewords.len(),
            vocabulary_size: self.vocabulary.len(),
            micros: start.elapsed().as_secs_f64() * 1e6,
        });
        self.history.push(detection);
        self.previous = Some(features);
        self.last_id = Some(frame.id);
        Ok(detection)
    }
}

pub fn write_detections_csv<W: Write>(mut w: W, detections: &[Detection]) -> Result<()> {
    writeln!(w, "query_frame,matched_frame,likelihood")?;
    for d in detections {
        match d.matched_frame_id {
            Some(m) => writeln!(w, "{},{},{:.6}", d.query_frame_id, m, d.likelihood)?,
            None => writeln!(w, "{},,{:.6}", d.query_frame_id, d.likelihood)?,
        }
    }
    Ok(())
}

pub fn write_frame_stats_csv<W: Write>(mut w: W, stats: &[FrameStats]) -> Result<()> {
    writeln!(w, "frame,keypoints,pairs,codewords,vocabulary_size,micros")?;
    for s in stats {
        writeln!(
            w,
            "{},{},{},{},{},{:.1}",
            s.frame_id, s.keypoints, s.pairs, s.codewords, s.vocabulary_size, s.micros
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::generate_pattern;
    use image::GrayImage;

    fn h(frame_id: usize, likelihood: f64) -> Hypothesis {
        Hypothesis { frame_id, likelihood }
    }

    fn past(best: Option<usize>) -> Detection {
        Detection {
            query_frame_id: 0,
            matched_frame_id: None,
            likelihood: 0.0,
            best: best.map(|f| h(f, 1.0)),
        }
    }

    #[test]
    fn filter_drops_isolated_hypotheses() {
        let out = temporal_filter(&[h(54, 0.74), h(356, 0.16), h(357, 0.10)]);
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].frame_id, out[1].frame_id), (356, 357));
        assert!((out[0].likelihood - 16.0 / 26.0).abs() < 1e-12);
        assert!((out[1].likelihood - 10.0 / 26.0).abs() < 1e-12);
        assert_eq!(best_hypothesis(&out).unwrap().frame_id, 356);
        assert!(temporal_filter(&[h(100, 1.0)]).is_empty());
        assert_eq!(temporal_filter(&[h(11, 0.5), h(10, 0.5)]), vec![h(10, 0.5), h(11, 0.5)]);
        assert!(temporal_filter(&[]).is_empty());
    }

    #[test]
    fn best_hypothesis_breaks_ties_by_id() {
        assert_eq!(best_hypothesis(&[h(9, 0.5), h(3, 0.5)]).unwrap().frame_id, 3);
        assert_eq!(best_hypothesis(&[h(9, 0.6), h(3, 0.4)]).unwrap().frame_id, 9);
        assert!(best_hypothesis(&[]).is_none());
    }

    #[test]
    fn consistency_examples() {
        let c = h(356, 0.6);
        assert!(consistency_check(&[past(Some(354)), past(Some(355))], &c, 2));
        assert!(!consistency_check(&[], &c, 2));
        assert!(consistency_check(&[], &c, 0));
        assert!(!consistency_check(&[past(Some(10)), past(Some(300))], &h(301, 0.6), 2));
        assert!(!consistency_check(&[past(None), past(Some(355))], &c, 2));
        assert!(consistency_check(&[past(Some(352)), past(Some(357))], &c, 2));
        assert!(!consistency_check(&[past(Some(351)), past(Some(355))], &c, 2));
        assert!(consistency_check(&[past(Some(1)), past(Some(355))], &c, 1));
    }

    #[test]
    fn frames_must_arrive_in_order() {
        let pattern = generate_pattern(42, 512, (48, 48)).unwrap();
        let mut det = LoopDetector::new(DetectionParams::default(), pattern).unwrap();
        let first = det.process_frame(&Frame::new(5, GrayImage::new(64, 64))).unwrap();
        assert_eq!(first.matched_frame_id, None);
        assert!(matches!(
            det.process_frame(&Frame::new(5, GrayImage::new(64, 64))),
            Err(Error::OutOfOrderFrame { previous: 5, got: 5 })
        ));
    }

    #[test]
    fn pattern_length_must_match_params() {
        let pattern = generate_pattern(42, 256, (48, 48)).unwrap();
        assert!(LoopDetector::new(DetectionParams::default(), pattern).is_err());
    }

    #[test]
    fn detection_csv_layout() {
        let ds = [
            Detection::none(0),
            Detection {
                query_frame_id: 7,
                matched_frame_id: Some(2),
                likelihood: 0.5,
                best: Some(h(2, 0.5)),
            },
        ];
        let mut buf = Vec::new();
        write_detections_csv(&mut buf, &ds).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "query_frame,matched_frame,likelihood\n0,,0.000000\n7,2,0.500000\n"
        );
    }
}
