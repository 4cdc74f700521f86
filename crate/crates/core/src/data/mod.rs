//! Chromosome sequences, bags, and their on-disk form.
//!
//! A chromosome enters as a pre-cropped grayscale image, becomes a pair of
//! gray-mean sequences (left and right chromatid halves), and is then
//! intensity-inverted and zero-padded to a fixed length `d` so that stained
//! bands are bright and background is exactly `0.0`.

mod io;
mod types;

pub use io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use types::{
    encode_condition, image_to_raw_pair, image_to_raw_pair_with_min, normalize_fit, resample_raw,
    BagRecord, BandLevel, ChromosomePair, ChromosomeSequence, ConditionEncoding, GrayImage,
    RawSequencePair, CONDITION_WIDTH, DEFAULT_D, MIN_IMAGE_HEIGHT, NUM_BAND_LEVELS,
    NUM_CHROM_TYPES,
};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("image {height}x{width} is smaller than the {min_height}x2 minimum")]
    TooSmall {
        height: usize,
        width: usize,
        min_height: usize,
    },
    #[error("sequence of length {len} does not fit d = {d}; resample first")]
    TooLong { len: usize, d: usize },
    #[error("invalid chromosome type {0} (expected 0..24)")]
    InvalidType(i64),
    #[error("invalid band level {0} (expected 300, 400, 550 or 700)")]
    InvalidBand(i64),
    #[error("invalid length: {0}")]
    InvalidLength(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: invariant violated on `{field}`: {msg}")]
    InvariantViolation {
        line: usize,
        field: String,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
