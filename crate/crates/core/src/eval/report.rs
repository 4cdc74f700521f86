use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{auc_roc, confusion, f1_from_counts, Confusion};
use super::EvalError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordScore {
    pub record_id: String,
    pub score: f64,
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub auc: f64,
    pub f1: f64,
    pub threshold: f64,
    pub confusion: Confusion,
    pub records: Vec<RecordScore>,
}

impl EvalReport {
    pub fn new(records: Vec<RecordScore>, threshold: f64) -> Result<Self, EvalError> {
        if records.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
        let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
        let confusion = confusion(&scores, &labels, threshold)?;
        Ok(Self {
            n: records.len(),
            auc: auc_roc(&scores, &labels)?,
            f1: f1_from_counts(&confusion),
            threshold,
            confusion,
            records,
        })
    }

    pub fn to_json(&self) -> Result<String, EvalError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `record_id,score,label` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), EvalError> {
        writeln!(w, "record_id,score,label")?;
        for r in &self.records {
            writeln!(w, "{},{},{}", r.record_id, r.score, r.label)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), EvalError> {
        crate::fsutil::write_atomic_with(path, |f| self.write_csv(std::io::BufWriter::new(f)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, score: f64, label: u8) -> RecordScore {
        RecordScore {
            record_id: id.into(),
            score,
            label,
        }
    }

    #[test]
    fn report_counts_are_consistent() {
        let r = EvalReport::new(vec![rec("a", 0.9, 1), rec("b", 0.7, 0), rec("c", 0.2, 1), rec("d", 0.1, 0)], 0.5)
            .unwrap();
        assert_eq!(r.confusion.total(), 4);
        assert_eq!(r.f1, 0.5);
        assert_eq!(r.auc, 0.75);
        let json: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(json["confusion"]["fn"], 1);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().nth(1), Some("a,0.9,1"));
    }
}
