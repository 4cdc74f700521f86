use serde::{Deserialize, Serialize};

use super::DataError;

pub const NUM_CHROM_TYPES: usize = 24;
pub const NUM_BAND_LEVELS: usize = 4;
/// Width of the concatenated type and band one-hot vectors.
pub const CONDITION_WIDTH: usize = NUM_CHROM_TYPES + NUM_BAND_LEVELS;
pub const DEFAULT_D: usize = 512;
pub const MIN_IMAGE_HEIGHT: usize = 8;

/// Staining resolution. Discriminant order is the one-hot order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BandLevel {
    B300,
    B400,
    B550,
    B700,
}

impl BandLevel {
    pub const ALL: [BandLevel; 4] = [BandLevel::B300, BandLevel::B400, BandLevel::B550, BandLevel::B700];

    pub fn value(self) -> u32 {
        match self {
            BandLevel::B300 => 300,
            BandLevel::B400 => 400,
            BandLevel::B550 => 550,
            BandLevel::B700 => 700,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_value(v: i64) -> Result<Self, DataError> {
        Self::ALL
            .into_iter()
            .find(|b| i64::from(b.value()) == v)
            .ok_or(DataError::InvalidBand(v))
    }
}

/// Row-major 8-bit grayscale image of one vertically oriented chromosome.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self, DataError> {
        if pixels.len() != height * width {
            return Err(DataError::InvalidLength(format!(
                "{height}x{width} image needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, DataError> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(DataError::InvalidLength("ragged image rows".into()));
        }
        Self::new(rows.len(), width, rows.concat())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Left-right mirror image.
    pub fn mirrored(&self) -> Self {
        let pixels = (0..self.height)
            .flat_map(|y| self.row(y).iter().rev().copied().collect::<Vec<_>>())
            .collect();
        Self {
            height: self.height,
            width: self.width,
            pixels,
        }
    }
}

/// Gray-mean sequences of the two chromatid halves, in raw 0..=255 units.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSequencePair {
    left: Vec<f64>,
    right: Vec<f64>,
}

impl RawSequencePair {
    pub fn new(left: Vec<f64>, right: Vec<f64>) -> Result<Self, DataError> {
        if left.len() != right.len() {
            return Err(DataError::InvalidLength(format!(
                "left has {} samples, right has {}",
                left.len(),
                right.len()
            )));
        }
        if left.is_empty() {
            return Err(DataError::InvalidLength("empty sequence".into()));
        }
        if let Some(v) = left.iter().chain(&right).find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(DataError::InvalidLength(format!("gray value {v} outside [0,255]")));
        }
        Ok(Self { left, right })
    }

    /// Same values on both sides.
    pub fn symmetric(values: Vec<f64>) -> Result<Self, DataError> {
        Self::new(values.clone(), values)
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    /// Applies the same index-level rearrangement to both rows.
    pub(crate) fn map_rows(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        Self {
            left: f(&self.left),
            right: f(&self.right),
        }
    }

    pub(crate) fn from_parts_unchecked(left: Vec<f64>, right: Vec<f64>) -> Self {
        debug_assert_eq!(left.len(), right.len());
        Self { left, right }
    }
}

/// `2×d` normalized intensities: row 0 left, row 1 right, `0.0` past `valid_len`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChromosomeSequence {
    d: usize,
    valid_len: usize,
    values: Vec<f32>,
}

impl ChromosomeSequence {
    /// Builds from explicit rows, checking every invariant.
    pub fn from_rows(left: Vec<f32>, right: Vec<f32>, valid_len: usize) -> Result<Self, DataError> {
        let d = left.len();
        if right.len() != d || d == 0 {
            return Err(DataError::InvalidLength(format!(
                "rows of length {} and {}",
                left.len(),
                right.len()
            )));
        }
        if valid_len > d {
            return Err(DataError::InvalidLength(format!("valid_len {valid_len} > d {d}")));
        }
        let mut values = left;
        values.extend(right);
        let seq = Self { d, valid_len, values };
        seq.check()?;
        Ok(seq)
    }

    fn check(&self) -> Result<(), DataError> {
        for (row_idx, row) in [self.left(), self.right()].into_iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(v) {
                    return Err(DataError::InvalidLength(format!(
                        "row {row_idx} position {i}: intensity {v} outside [0,1]"
                    )));
                }
                if i >= self.valid_len && *v != 0.0 {
                    return Err(DataError::InvalidLength(format!(
                        "row {row_idx} position {i}: padding must be 0, found {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            valid_len: 0,
            values: vec![0.0; 2 * d],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn valid_len(&self) -> usize {
        self.valid_len
    }

    pub fn left(&self) -> &[f32] {
        &self.values[..self.d]
    }

    pub fn right(&self) -> &[f32] {
        &self.values[self.d..]
    }

    /// Both rows, left first.
    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChromosomePair {
    pub a: ChromosomeSequence,
    pub b: ChromosomeSequence,
}

impl ChromosomePair {
    pub fn new(a: ChromosomeSequence, b: ChromosomeSequence) -> Result<Self, DataError> {
        if a.d() != b.d() {
            return Err(DataError::InvalidLength(format!("pair d mismatch: {} vs {}", a.d(), b.d())));
        }
        Ok(Self { a, b })
    }

    pub fn d(&self) -> usize {
        self.a.d()
    }

    pub fn swapped(&self) -> Self {
        Self {
            a: self.b.clone(),
            b: self.a.clone(),
        }
    }
}

/// `m` homologous pairs from one subject with their condition and label.
#[derive(Clone, Debug, PartialEq)]
pub struct BagRecord {
    pub record_id: String,
    pub subject_id: String,
    pub chrom_type: usize,
    pub band_level: BandLevel,
    pub label: u8,
    pub pairs: Vec<ChromosomePair>,
}

impl BagRecord {
    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    /// Sequence length shared by all pairs, if any.
    pub fn d(&self) -> Option<usize> {
        self.pairs.first().map(ChromosomePair::d)
    }

    pub fn condition(&self) -> ConditionEncoding {
        encode_condition(self.chrom_type as i64, i64::from(self.band_level.value()))
            .expect("record holds a validated type and band")
    }

    /// Checks the record-level invariants, naming the offending field.
    pub fn validate(&self) -> Result<(), (String, String)> {
        if self.chrom_type >= NUM_CHROM_TYPES {
            return Err(("chrom_type".into(), format!("{} not in [0,24)", self.chrom_type)));
        }
        if self.label > 1 {
            return Err(("label".into(), format!("{} not in {{0,1}}", self.label)));
        }
        if self.pairs.is_empty() {
            return Err(("pairs".into(), "a bag needs at least one pair".into()));
        }
        let d = self.pairs[0].d();
        if self.pairs.iter().any(|p| p.a.d() != d || p.b.d() != d) {
            return Err(("pairs".into(), "all sequences in a bag must share d".into()));
        }
        Ok(())
    }
}

/// One-hot chromosome type and band level.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionEncoding {
    pub c_onehot: [f64; NUM_CHROM_TYPES],
    pub b_onehot: [f64; NUM_BAND_LEVELS],
}

impl ConditionEncoding {
    /// `c ⊕ b` as a single vector of length [`CONDITION_WIDTH`].
    pub fn concat(&self) -> Vec<f64> {
        self.c_onehot.iter().chain(&self.b_onehot).copied().collect()
    }
}

pub fn encode_condition(chrom_type: i64, band_level: i64) -> Result<ConditionEncoding, DataError> {
    if !(0..NUM_CHROM_TYPES as i64).contains(&chrom_type) {
        return Err(DataError::InvalidType(chrom_type));
    }
    let band = BandLevel::from_value(band_level)?;
    let mut c_onehot = [0.0; NUM_CHROM_TYPES];
    c_onehot[chrom_type as usize] = 1.0;
    let mut b_onehot = [0.0; NUM_BAND_LEVELS];
    b_onehot[band.index()] = 1.0;
    Ok(ConditionEncoding { c_onehot, b_onehot })
}

/// Row-wise gray means of the left (`[0, W/2)`) and right (`[W/2, W)`) halves.
pub fn image_to_raw_pair(image: &GrayImage) -> Result<RawSequencePair, DataError> {
    image_to_raw_pair_with_min(image, MIN_IMAGE_HEIGHT)
}

/// [`image_to_raw_pair`] with an explicit minimum height.
pub fn image_to_raw_pair_with_min(
    image: &GrayImage,
    min_height: usize,
) -> Result<RawSequencePair, DataError> {
    let (h, w) = (image.height(), image.width());
    if h < min_height.max(1) || w < 2 {
        return Err(DataError::TooSmall {
            height: h,
            width: w,
            min_height,
        });
    }
    let half = w / 2;
    let mean = |px: &[u8]| px.iter().map(|p| f64::from(*p)).sum::<f64>() / px.len() as f64;
    let (left, right) = (0..h)
        .map(|y| {
            let row = image.row(y);
            (mean(&row[..half]), mean(&row[half..]))
        })
        .unzip();
    Ok(RawSequencePair::from_parts_unchecked(left, right))
}

/// Inverts intensities to `(255 - v) / 255`, top-aligns, and zero-pads to `d`.
pub fn normalize_fit(raw: &RawSequencePair, d: usize) -> Result<ChromosomeSequence, DataError> {
    let n = raw.len();
    if n > d {
        return Err(DataError::TooLong { len: n, d });
    }
    let map = |row: &[f64]| -> Vec<f32> {
        let mut out: Vec<f32> = row.iter().map(|v| ((255.0 - v) / 255.0) as f32).collect();
        out.resize(d, 0.0);
        out
    };
    Ok(ChromosomeSequence {
        d,
        valid_len: n,
        values: [map(raw.left()), map(raw.right())].concat(),
    })
}

fn resample_row(row: &[f64], target_len: usize) -> Vec<f64> {
    let n = row.len();
    if n == 1 {
        return vec![row[0]; target_len];
    }
    let span = (target_len - 1) as f64;
    (0..target_len)
        .map(|i| {
            let x = (i * (n - 1)) as f64 / span;
            let k = (x.floor() as usize).min(n - 2);
            let frac = x - k as f64;
            if frac == 0.0 {
                row[k]
            } else if frac == 1.0 {
                row[k + 1]
            } else {
                row[k] + (row[k + 1] - row[k]) * frac
            }
        })
        .collect()
}

/// Linear interpolation along the length axis; endpoints are preserved.
pub fn resample_raw(raw: &RawSequencePair, target_len: usize) -> Result<RawSequencePair, DataError> {
    if target_len < 2 {
        return Err(DataError::InvalidLength(format!("target length {target_len} < 2")));
    }
    if target_len == raw.len() {
        return Ok(raw.clone());
    }
    Ok(raw.map_rows(|r| resample_row(r, target_len)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(left: &[f64]) -> RawSequencePair {
        RawSequencePair::symmetric(left.to_vec()).unwrap()
    }

    #[test]
    fn two_by_two_image_halves() {
        let img = GrayImage::from_rows(&[vec![10, 30], vec![50, 70]]).unwrap();
        let pair = image_to_raw_pair_with_min(&img, 1).unwrap();
        assert_eq!(pair.left(), &[10.0, 50.0]);
        assert_eq!(pair.right(), &[30.0, 70.0]);
    }

    #[test]
    fn constant_image_gives_constant_sequences() {
        let img = GrayImage::new(12, 5, vec![100; 60]).unwrap();
        let pair = image_to_raw_pair(&img).unwrap();
        assert!(pair.left().iter().chain(pair.right()).all(|v| *v == 100.0));
        assert_eq!(pair.len(), 12);
    }

    #[test]
    fn three_by_four_image() {
        let img = GrayImage::from_rows(&[
            vec![0, 0, 255, 255],
            vec![255, 255, 0, 0],
            vec![128, 128, 128, 128],
        ])
        .unwrap();
        let pair = image_to_raw_pair_with_min(&img, 1).unwrap();
        assert_eq!(pair.left(), &[0.0, 255.0, 128.0]);
        assert_eq!(pair.right(), &[255.0, 0.0, 128.0]);
    }

    #[test]
    fn small_images_are_rejected() {
        let img = GrayImage::new(7, 4, vec![0; 28]).unwrap();
        assert!(matches!(image_to_raw_pair(&img), Err(DataError::TooSmall { .. })));
        let img = GrayImage::new(10, 1, vec![0; 10]).unwrap();
        assert!(matches!(image_to_raw_pair(&img), Err(DataError::TooSmall { .. })));
    }

    #[test]
    fn normalize_endpoints_and_padding() {
        let seq = normalize_fit(&raw(&[255.0, 0.0]), 4).unwrap();
        assert_eq!(seq.left(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(seq.valid_len(), 2);
        let seq = normalize_fit(&raw(&[255.0; 5]), 8).unwrap();
        assert!(seq.values().iter().all(|v| *v == 0.0));
        assert_eq!(seq.valid_len(), 5);
        let seq = normalize_fit(&raw(&[127.5]), 2).unwrap();
        assert_eq!(seq.left(), &[0.5, 0.0]);
    }

    #[test]
    fn normalize_rejects_overlong() {
        assert!(matches!(
            normalize_fit(&raw(&[0.0; 9]), 8),
            Err(DataError::TooLong { len: 9, d: 8 })
        ));
    }

    #[test]
    fn resample_examples() {
        assert_eq!(resample_raw(&raw(&[0.0, 100.0]), 3).unwrap().left(), &[0.0, 50.0, 100.0]);
        assert_eq!(resample_raw(&raw(&[0.0, 30.0, 60.0, 90.0]), 2).unwrap().left(), &[0.0, 90.0]);
        let r = raw(&[3.0, 1.0, 4.0, 1.0, 5.0]);
        assert_eq!(resample_raw(&r, 5).unwrap(), r);
        assert!(resample_raw(&r, 1).is_err());
    }

    #[test]
    fn condition_encoding() {
        let c = encode_condition(0, 300).unwrap();
        assert_eq!(c.c_onehot[0], 1.0);
        assert_eq!(c.b_onehot, [1.0, 0.0, 0.0, 0.0]);
        let c = encode_condition(23, 700).unwrap();
        assert_eq!(c.c_onehot[23], 1.0);
        assert_eq!(c.b_onehot, [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(encode_condition(4, 550).unwrap().b_onehot, [0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(encode_condition(24, 300), Err(DataError::InvalidType(24))));
        assert!(matches!(encode_condition(3, 500), Err(DataError::InvalidBand(500))));
        assert_eq!(c.concat().len(), CONDITION_WIDTH);
        assert_eq!(c.concat().iter().sum::<f64>(), 2.0);
    }

    proptest! {
        #[test]
        fn normalize_is_monotone_decreasing(a in 0.0f64..=255.0, b in 0.0f64..=255.0) {
            let seq = normalize_fit(&raw(&[a, b]), 2).unwrap();
            let (x, y) = (seq.left()[0], seq.left()[1]);
            if a < b { prop_assert!(x >= y); }
            if a > b { prop_assert!(x <= y); }
        }

        #[test]
        fn mirrored_image_swaps_halves(
            (h, w, pixels) in (8usize..20, 1usize..6).prop_flat_map(|(h, half_w)| {
                let w = 2 * half_w;
                (Just(h), Just(w), prop::collection::vec(any::<u8>(), h * w))
            }),
        ) {
            let img = GrayImage::new(h, w, pixels).unwrap();
            let a = image_to_raw_pair(&img).unwrap();
            let b = image_to_raw_pair(&img.mirrored()).unwrap();
            prop_assert_eq!(a.left(), b.right());
            prop_assert_eq!(a.right(), b.left());
        }

        #[test]
        fn resample_round_trip_on_linear_sequences(
            n in 2usize..30,
            k in 1usize..5,
            slope in -5.0f64..5.0,
            offset in 30.0f64..200.0,
        ) {
            // Values lie on a line, so every grid is piecewise linear.
            let values: Vec<f64> = (0..n).map(|i| offset + slope * i as f64 / n as f64 * 5.0).collect();
            let r = raw(&values);
            let up = resample_raw(&r, n * k + 1).unwrap();
            let back = resample_raw(&up, n).unwrap();
            for (x, y) in back.left().iter().zip(&values) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
