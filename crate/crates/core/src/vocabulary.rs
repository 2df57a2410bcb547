//! Incremental bag-of-words vocabulary over learned codewords.
//!
//! Entries are append-only and merge in place. Retrieval is a linear scan
//! with an early-abandon bound on the masked Hamming distance, followed by
//! voting through each entry's occurrence list.
//!
//! Admission takes `&mut self` and queries take `&self`, so the borrow checker
//! enforces a single writer and forbids queries concurrent with admission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::bitcore::{BitVector, DEFAULT_BITS};
use crate::codeword::{masked_hamming_within, merge_codewords, Codeword};
use crate::error::{Error, Result};
use crate::frontend::{Roi, DEFAULT_RAW_MATCH_FRACTION, DEFAULT_SEARCH_RADIUS};

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionParams {
    /// Masked Hamming matching threshold (Ψ), inclusive.
    pub psi: f64,
    /// FAST detection threshold (Υ).
    pub upsilon: u8,
    /// Maximum matched pairs per frame (Γ).
    pub gamma: usize,
    /// Descriptor length (L).
    pub bits: usize,
    /// Most recent frames excluded from retrieval.
    pub t_local: usize,
    pub accept_likelihood: f64,
    pub k_consistency: usize,
    pub search_radius: u32,
    pub raw_match_fraction: f64,
    /// Frames with fewer votes are dropped before normalization.
    pub min_votes: u32,
    pub roi: Roi,
    pub temporal_filter: bool,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            psi: 18.0,
            upsilon: 35,
            gamma: 100,
            bits: DEFAULT_BITS,
            t_local: 20,
            accept_likelihood: 0.3,
            k_consistency: 2,
            search_radius: DEFAULT_SEARCH_RADIUS,
            raw_match_fraction: DEFAULT_RAW_MATCH_FRACTION,
            min_votes: 2,
            roi: Roi::full(),
            temporal_filter: true,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.psi.is_finite() && self.psi > 0.0) {
            return bad("psi must be positive");
        }
        if self.upsilon == 0 || self.gamma == 0 || self.bits == 0 || self.t_local == 0 {
            return bad("upsilon, gamma, bits and t_local must be positive");
        }
        if !(0.0..=1.0).contains(&self.accept_likelihood) {
            return bad("accept likelihood must lie in [0, 1]");
        }
        if !(self.raw_match_fraction > 0.0 && self.raw_match_fraction <= 1.0) {
            return bad("raw match fraction must lie in (0, 1]");
        }
        Ok(())
    }

    /// Raw Hamming threshold for frame-to-frame matching.
    pub fn raw_match_threshold(&self) -> u32 {
        (self.bits as f64 * self.raw_match_fraction) as u32
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VocabularyEntry {
    pub word_id: usize,
    pub codeword: Codeword,
    /// `(frame_id, votes)`, sorted by frame id.
    pub occurrences: Vec<(usize, u32)>,
    card: u32,
}

impl VocabularyEntry {
    fn new(word_id: usize, codeword: Codeword, frame_id: usize, votes: u32) -> Self {
        let card = codeword.mask_cardinality();
        VocabularyEntry {
            word_id,
            codeword,
            occurrences: vec![(frame_id, votes)],
            card,
        }
    }

    pub fn total_votes(&self) -> u64 {
        self.occurrences.iter().map(|&(_, v)| v as u64).sum()
    }

    fn record(&mut self, frame_id: usize, votes: u32) {
        match self.occurrences.last_mut() {
            Some((f, v)) if *f == frame_id => *v += votes,
            _ => self.occurrences.push((frame_id, votes)),
        }
    }
}

/// Outcome of admitting one frame's codewords.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Admission {
    /// Entry touched by each codeword that survived intra-frame merging.
    pub word_ids: Vec<usize>,
    pub created: usize,
    /// Zero-mask codewords that were refused.
    pub rejected: usize,
}

#[derive(Clone, Debug)]
pub struct Vocabulary {
    entries: Vec<VocabularyEntry>,
    params: DetectionParams,
}

impl Vocabulary {
    pub fn new(params: DetectionParams) -> Self {
        Vocabulary {
            entries: Vec::new(),
            params,
        }
    }

    pub fn params(&self) -> &DetectionParams {
        &self.params
    }

    pub fn entries(&self) -> &[VocabularyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Nearest entry within Ψ, lowest word id on ties.
    fn nearest(&self, cw: &Codeword) -> Option<usize> {
        let card = cw.mask_cardinality();
        let mut best: Option<(usize, f64)> = None;
        let mut bound = self.params.psi;
        for e in &self.entries {
            if let Some(d) = masked_hamming_within(cw, card, &e.codeword, e.card, bound) {
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((e.word_id, d));
                    bound = d;
                }
            }
        }
        best.map(|(id, _)| id)
    }

    /// Admit the codewords learned for `frame_id`.
    ///
    /// Codewords are first merged greedily within the frame, each against the
    /// nearest already-kept codeword within Ψ. Survivors are then merged into
    /// the nearest vocabulary entry within Ψ or appended as new entries. An
    /// occurrence's votes count the frame's codewords absorbed into it.
    pub fn admit_frame_codewords(&mut self, frame_id: usize, codewords: &[Codeword]) -> Result<Admission> {
        let mut report = Admission::default();
        let psi = self.params.psi;
        let mut kept: Vec<(Codeword, u32, u64)> = Vec::new();
        for cw in codewords {
            if cw.len() != self.params.bits {
                return Err(Error::LengthMismatch {
                    left: self.params.bits,
                    right: cw.len(),
                });
            }
            let card = cw.mask_cardinality();
            if card == 0 {
                report.rejected += 1;
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for (i, (k, kc, _)) in kept.iter().enumerate() {
                if let Some(d) = masked_hamming_within(cw, card, k, *kc, psi) {
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((i, d));
                    }
                }
            }
            let merged = match best {
                Some((i, _)) => {
                    let (k, _, w) = &kept[i];
                    merge_codewords(k, cw, *w, 1)?.map(|m| (i, m))
                }
                None => None,
            };
            match merged {
                Some((i, m)) => {
                    let c = m.mask_cardinality();
                    kept[i].0 = m;
                    kept[i].1 = c;
                    kept[i].2 += 1;
                }
                None => kept.push((cw.clone(), card, 1)),
            }
        }

        for (cw, _, weight) in kept {
            let votes = weight as u32;
            let target = self.nearest(&cw);
            let merged = match target {
                Some(id) => {
                    let e = &self.entries[id];
                    merge_codewords(&e.codeword, &cw, e.total_votes(), weight)?.map(|m| (id, m))
                }
                None => None,
            };
            match merged {
                Some((id, m)) => {
                    let e = &mut self.entries[id];
                    e.card = m.mask_cardinality();
                    e.codeword = m;
                    e.record(frame_id, votes);
                    report.word_ids.push(id);
                }
                None => {
                    let id = self.entries.len();
                    self.entries.push(VocabularyEntry::new(id, cw, frame_id, votes));
                    report.word_ids.push(id);
                    report.created += 1;
                }
            }
        }
        Ok(report)
    }

    /// Word ids of every entry within Ψ of `cw`.
    pub fn matching_entries(&self, cw: &Codeword) -> Vec<usize> {
        let card = cw.mask_cardinality();
        if card == 0 {
            return Vec::new();
        }
        self.entries
            .iter()
            .filter(|e| masked_hamming_within(cw, card, &e.codeword, e.card, self.params.psi).is_some())
            .map(|e| e.word_id)
            .collect()
    }

    /// Vote for past frames: each query codeword adds one vote to every frame
    /// at least `t_local` older than `frame_id` that holds a matching entry.
    /// Frames below the vote floor are dropped; the rest are ordered by votes
    /// descending, then frame id ascending.
    pub fn query(&self, frame_id: usize, codewords: &[Codeword], t_local: usize) -> Vec<(usize, u32)> {
        let Some(newest) = frame_id.checked_sub(t_local) else {
            return Vec::new();
        };
        let hits: Vec<Vec<usize>> = codewords.par_iter().map(|cw| self.matching_entries(cw)).collect();
        let mut votes: BTreeMap<usize, u32> = BTreeMap::new();
        for id in hits.into_iter().flatten() {
            for &(f, _) in &self.entries[id].occurrences {
                if f <= newest {
                    *votes.entry(f).or_default() += 1;
                }
            }
        }
        let mut out: Vec<(usize, u32)> = votes.into_iter().filter(|&(_, v)| v >= self.params.min_votes).collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Word count, mean mask cardinality and a histogram of how many frames
    /// each entry occurs in.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let n = self.entries.len();
        let mean_card = if n == 0 {
            0.0
        } else {
            self.entries.iter().map(|e| e.card as f64).sum::<f64>() / n as f64
        };
        let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
        for e in &self.entries {
            *hist.entry(e.occurrences.len()).or_default() += 1;
        }
        let _ = writeln!(s, "words {n}");
        let _ = writeln!(s, "bits {}", self.params.bits);
        let _ = writeln!(s, "mean_mask_cardinality {mean_card:.3}");
        let _ = writeln!(s, "occupancy_histogram frames count");
        for (frames, count) in hist {
            let _ = writeln!(s, "{frames} {count}");
        }
        s
    }

    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&(self.params.bits as u32).to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for e in &self.entries {
            w.write_all(&e.codeword.descriptor().to_le_bytes())?;
            w.write_all(&e.codeword.mask().to_le_bytes())?;
            w.write_all(&(e.occurrences.len() as u32).to_le_bytes())?;
            for &(f, v) in &e.occurrences {
                w.write_all(&(f as u64).to_le_bytes())?;
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Read a snapshot written by [`Vocabulary::write_snapshot`]. The stored
    /// bit length overrides `params.bits`.
    pub fn read_snapshot<R: Read>(mut r: R, mut params: DetectionParams) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(invalid("not a vocabulary snapshot"));
        }
        if read_u32(&mut r)? != SNAPSHOT_VERSION {
            return Err(invalid("unsupported snapshot version"));
        }
        let bits = read_u32(&mut r)? as usize;
        let count = read_u64(&mut r)? as usize;
        params.bits = bits;
        let nbytes = bits.div_ceil(8);
        let mut entries = Vec::new();
        let mut buf = vec![0u8; nbytes];
        for id in 0..count {
            r.read_exact(&mut buf)?;
            let x = BitVector::from_le_bytes(&buf, bits)?;
            r.read_exact(&mut buf)?;
            let y = BitVector::from_le_bytes(&buf, bits)?;
            let codeword = Codeword::new(x, y)?;
            let card = codeword.mask_cardinality();
            if card == 0 {
                return Err(invalid("snapshot entry with empty mask"));
            }
            let n = read_u32(&mut r)? as usize;
            let mut occurrences = Vec::with_capacity(n);
            for _ in 0..n {
                occurrences.push((read_u64(&mut r)? as usize, read_u32(&mut r)?));
            }
            if occurrences.is_empty() || !occurrences.windows(2).all(|w| w[0].0 < w[1].0) {
                return Err(invalid("snapshot occurrences must be non-empty and sorted"));
            }
            entries.push(VocabularyEntry {
                word_id: id,
                codeword,
                occurrences,
                card,
            });
        }
        Ok(Vocabulary { entries, params })
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = io::BufWriter::new(fs::File::create(path)?);
        self.write_snapshot(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn load_snapshot(path: impl AsRef<Path>, params: DetectionParams) -> Result<Self> {
        Self::read_snapshot(io::BufReader::new(fs::File::open(path)?), params)
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"CLVOCAB\0";
const SNAPSHOT_VERSION: u32 = 1;

fn invalid(msg: &str) -> Error {
    Error::Io(io::Error::new(io::ErrorKind::InvalidData, msg))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// A retrieved frame and its normalized score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hypothesis {
    pub frame_id: usize,
    pub likelihood: f64,
}

/// Normalize votes into likelihoods summing to one, preserving order.
pub fn likelihoods(votes: &[(usize, u32)]) -> Vec<Hypothesis> {
    let total: u64 = votes.iter().map(|&(_, v)| v as u64).sum();
    if total == 0 {
        return Vec::new();
    }
    votes
        .iter()
        .map(|&(frame_id, v)| Hypothesis {
            frame_id,
            likelihood: v as f64 / total as f64,
        })
        .collect()
}
