//! JSON Lines dataset format: one bag per line, fields in a fixed order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{BagRecord, BandLevel, ChromosomePair, ChromosomeSequence, NUM_CHROM_TYPES};
use super::DataError;
use crate::fsutil;

#[derive(Serialize, Deserialize)]
struct WirePair {
    a_left: Vec<f32>,
    a_right: Vec<f32>,
    b_left: Vec<f32>,
    b_right: Vec<f32>,
    a_valid: i64,
    b_valid: i64,
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    record_id: String,
    subject_id: String,
    chrom_type: i64,
    band_level: i64,
    label: i64,
    pairs: Vec<WirePair>,
}

impl From<&BagRecord> for WireRecord {
    fn from(r: &BagRecord) -> Self {
        Self {
            record_id: r.record_id.clone(),
            subject_id: r.subject_id.clone(),
            chrom_type: r.chrom_type as i64,
            band_level: i64::from(r.band_level.value()),
            label: i64::from(r.label),
            pairs: r
                .pairs
                .iter()
                .map(|p| WirePair {
                    a_left: p.a.left().to_vec(),
                    a_right: p.a.right().to_vec(),
                    b_left: p.b.left().to_vec(),
                    b_right: p.b.right().to_vec(),
                    a_valid: p.a.valid_len() as i64,
                    b_valid: p.b.valid_len() as i64,
                })
                .collect(),
        }
    }
}

fn violation(line: usize, field: &str, msg: impl Into<String>) -> DataError {
    DataError::InvariantViolation {
        line,
        field: field.to_string(),
        msg: msg.into(),
    }
}

fn sequence(
    line: usize,
    field: &str,
    left: Vec<f32>,
    right: Vec<f32>,
    valid: i64,
) -> Result<ChromosomeSequence, DataError> {
    if valid < 0 {
        return Err(violation(line, field, format!("negative valid length {valid}")));
    }
    ChromosomeSequence::from_rows(left, right, valid as usize).map_err(|e| violation(line, field, e.to_string()))
}

impl WireRecord {
    fn into_record(self, line: usize) -> Result<BagRecord, DataError> {
        if !(0..NUM_CHROM_TYPES as i64).contains(&self.chrom_type) {
            return Err(violation(line, "chrom_type", format!("{} not in [0,24)", self.chrom_type)));
        }
        let band_level =
            BandLevel::from_value(self.band_level).map_err(|e| violation(line, "band_level", e.to_string()))?;
        if !(0..=1).contains(&self.label) {
            return Err(violation(line, "label", format!("{} not in {{0,1}}", self.label)));
        }
        let pairs = self
            .pairs
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let a = sequence(line, &format!("pairs[{i}].a"), p.a_left, p.a_right, p.a_valid)?;
                let b = sequence(line, &format!("pairs[{i}].b"), p.b_left, p.b_right, p.b_valid)?;
                ChromosomePair::new(a, b).map_err(|e| violation(line, &format!("pairs[{i}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let record = BagRecord {
            record_id: self.record_id,
            subject_id: self.subject_id,
            chrom_type: self.chrom_type as usize,
            band_level,
            label: self.label as u8,
            pairs,
        };
        record.validate().map_err(|(field, msg)| violation(line, &field, msg))?;
        Ok(record)
    }
}

pub fn write_dataset<W: Write>(records: &[BagRecord], mut out: W) -> Result<(), DataError> {
    for r in records {
        serde_json::to_writer(&mut out, &WireRecord::from(r)).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses every line, validating each record. Blank lines are skipped.
pub fn read_dataset<R: Read>(input: R) -> Result<Vec<BagRecord>, DataError> {
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireRecord = serde_json::from_str(&line).map_err(|e| DataError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        records.push(wire.into_record(line_no)?);
    }
    Ok(records)
}

/// Writes the dataset to `path` atomically.
pub fn save_dataset(records: &[BagRecord], path: &Path) -> Result<(), DataError> {
    fsutil::write_atomic_with(path, |f| write_dataset(records, BufWriter::new(f)))
}

pub fn load_dataset(path: &Path) -> Result<Vec<BagRecord>, DataError> {
    read_dataset(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{normalize_fit, RawSequencePair};
    use proptest::prelude::*;

    fn record(values: &[f64], d: usize, label: u8) -> BagRecord {
        let raw = RawSequencePair::new(values.to_vec(), values.iter().rev().copied().collect()).unwrap();
        let seq = normalize_fit(&raw, d).unwrap();
        BagRecord {
            record_id: "r0".into(),
            subject_id: "s0".into(),
            chrom_type: 5,
            band_level: BandLevel::B550,
            label,
            pairs: vec![ChromosomePair::new(seq.clone(), seq).unwrap()],
        }
    }

    fn roundtrip(records: &[BagRecord]) -> Vec<BagRecord> {
        let mut buf = Vec::new();
        write_dataset(records, &mut buf).unwrap();
        read_dataset(&buf[..]).unwrap()
    }

    #[test]
    fn empty_input_is_empty_dataset() {
        assert!(read_dataset(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn field_order_matches_format() {
        let mut buf = Vec::new();
        write_dataset(&[record(&[10.0, 200.0], 4, 1)], &mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        let keys = ["record_id", "subject_id", "chrom_type", "band_level", "label", "pairs", "a_left", "a_right", "b_left", "b_right", "a_valid", "b_valid"];
        let positions: Vec<usize> = keys.iter().map(|k| line.find(&format!("\"{k}\"")).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{line}");
        assert!(line.ends_with('\n'));
    }

    #[test]
    fn bad_band_level_names_field() {
        let mut buf = Vec::new();
        write_dataset(&[record(&[10.0, 200.0], 4, 0)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\"band_level\":550", "\"band_level\":500");
        let err = read_dataset(text.as_bytes()).unwrap_err();
        match err {
            DataError::InvariantViolation { line, field, .. } => {
                assert_eq!(line, 1);
                assert_eq!(field, "band_level");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nonzero_padding_is_rejected() {
        let text = r#"{"record_id":"x","subject_id":"s","chrom_type":1,"band_level":300,"label":0,"pairs":[{"a_left":[0.5,0.1],"a_right":[0.5,0.0],"b_left":[0.5,0.0],"b_right":[0.5,0.0],"a_valid":1,"b_valid":1}]}"#;
        let err = read_dataset(format!("\n{text}\n").as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::InvariantViolation { line: 2, ref field, .. } if field == "pairs[0].a"));
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = read_dataset(&b"{\"record_id\": 3}\n"[..]).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bags.jsonl");
        let records = vec![record(&[1.0, 2.0, 3.0], 8, 1), record(&[250.0, 0.0, 17.5], 8, 0)];
        save_dataset(&records, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), records);
    }

    proptest! {
        #[test]
        fn arbitrary_records_round_trip(
            values in prop::collection::vec(0.0f64..=255.0, 1..12),
            pad in 0usize..5,
            label in 0u8..=1,
        ) {
            let d = values.len() + pad;
            let r = record(&values, d, label);
            prop_assert_eq!(roundtrip(std::slice::from_ref(&r)), vec![r]);
        }
    }
}
