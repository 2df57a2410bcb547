//! Online loop-closure detection with binary codewords learned from
//! frame-to-frame feature matches.
//!
//! Each matched feature pair yields a codeword: the descriptor of the mean
//! patch plus a mask of the binary tests that stayed stable across the pair.
//! Codewords feed an incremental bag-of-words vocabulary queried with the
//! masked Hamming distance; hypotheses are kept only when a neighbouring frame
//! is also retrieved.

pub mod bitcore;
pub mod codeword;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod frontend;
pub mod pipeline;
pub mod vocabulary;

pub use bitcore::BitVector;
pub use codeword::Codeword;
pub use descriptor::{Patch, TestPattern};
pub use error::{Error, Result};
pub use frontend::{Frame, Keypoint, MatchPair, Roi};
pub use pipeline::{Detection, LoopDetector};
pub use vocabulary::{DetectionParams, Hypothesis, Vocabulary};
