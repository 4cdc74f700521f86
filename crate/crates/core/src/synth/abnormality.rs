//! The five artificial structural-abnormality operators.
//!
//! Every operator rearranges sample indices and applies the same
//! rearrangement to the left and right rows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::data::RawSequencePair;

/// Fractional span `[start_frac, start_frac + len_frac)` of a sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start_frac: f64,
    pub len_frac: f64,
}

const FRAC_EPS: f64 = 1e-12;

impl Span {
    pub fn new(start_frac: f64, len_frac: f64) -> Self {
        Self { start_frac, len_frac }
    }

    fn check_fractions(&self) -> Result<(), SynthError> {
        let ok = self.start_frac >= 0.0
            && self.len_frac >= 0.0
            && self.start_frac + self.len_frac <= 1.0 + FRAC_EPS;
        if ok {
            Ok(())
        } else {
            Err(SynthError::SpanOutOfRange(format!("{self:?}")))
        }
    }

    /// Index range on a sequence of length `n`.
    pub fn indices(&self, n: usize) -> Result<(usize, usize), SynthError> {
        self.check_fractions()?;
        let start = (self.start_frac * n as f64).round() as usize;
        let len = (self.len_frac * n as f64).round() as usize;
        if start + len > n {
            return Err(SynthError::SpanOutOfRange(format!("{self:?} on length {n}")));
        }
        Ok((start, start + len))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReplaceSource {
    /// The span is reversed in place.
    Inversion,
    /// The span is overwritten by an equal-length donor span starting at
    /// `donor_start_frac` of the donor's free range.
    Foreign { donor_start_frac: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AbnormalityKind {
    /// The span is removed.
    Deleted(Span),
    /// A donor fragment is inserted at `at_frac` of the sequence.
    AddedForeign { at_frac: f64, fragment: Span },
    /// A copy of the span is inserted right after it.
    DuplicatedSelf(Span),
    /// The span is replaced without changing the length.
    Replaced { span: Span, source: ReplaceSource },
    /// Mirrored doubling: `reverse(s) ⊕ s`.
    Robertsonian,
}

/// Operator label without span parameters, used for counting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindTag {
    Deleted,
    AddedForeign,
    DuplicatedSelf,
    ReplacedInversion,
    ReplacedForeign,
    Robertsonian,
}

impl KindTag {
    pub fn name(self) -> &'static str {
        match self {
            KindTag::Deleted => "deleted",
            KindTag::AddedForeign => "added_foreign",
            KindTag::DuplicatedSelf => "duplicated_self",
            KindTag::ReplacedInversion => "replaced_inversion",
            KindTag::ReplacedForeign => "replaced_foreign",
            KindTag::Robertsonian => "robertsonian",
        }
    }
}

/// Bounds for sampled span lengths, as fractions of the sequence length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanBounds {
    pub min_frac: f64,
    pub max_frac: f64,
}

impl Default for SpanBounds {
    fn default() -> Self {
        Self {
            min_frac: 0.1,
            max_frac: 0.3,
        }
    }
}

impl SpanBounds {
    fn sample<R: Rng>(&self, rng: &mut R) -> Span {
        let len_frac = rng.gen_range(self.min_frac..=self.max_frac);
        let start_frac = rng.gen_range(0.0..=1.0 - len_frac);
        Span { start_frac, len_frac }
    }
}

impl AbnormalityKind {
    pub fn tag(&self) -> KindTag {
        match self {
            AbnormalityKind::Deleted(_) => KindTag::Deleted,
            AbnormalityKind::AddedForeign { .. } => KindTag::AddedForeign,
            AbnormalityKind::DuplicatedSelf(_) => KindTag::DuplicatedSelf,
            AbnormalityKind::Replaced {
                source: ReplaceSource::Inversion,
                ..
            } => KindTag::ReplacedInversion,
            AbnormalityKind::Replaced {
                source: ReplaceSource::Foreign { .. },
                ..
            } => KindTag::ReplacedForeign,
            AbnormalityKind::Robertsonian => KindTag::Robertsonian,
        }
    }

    pub fn needs_donor(&self) -> bool {
        matches!(
            self.tag(),
            KindTag::AddedForeign | KindTag::ReplacedForeign
        )
    }

    /// Draws an operator uniformly over the five kinds; `Replaced` splits
    /// evenly between inversion and foreign replacement.
    pub fn sample<R: Rng>(bounds: SpanBounds, rng: &mut R) -> Self {
        match rng.gen_range(0..5) {
            0 => AbnormalityKind::Deleted(bounds.sample(rng)),
            1 => AbnormalityKind::AddedForeign {
                at_frac: rng.gen_range(0.0..=1.0),
                fragment: bounds.sample(rng),
            },
            2 => AbnormalityKind::DuplicatedSelf(bounds.sample(rng)),
            3 => AbnormalityKind::Replaced {
                span: bounds.sample(rng),
                source: if rng.gen_bool(0.5) {
                    ReplaceSource::Inversion
                } else {
                    ReplaceSource::Foreign {
                        donor_start_frac: rng.gen_range(0.0..=1.0),
                    }
                },
            },
            _ => AbnormalityKind::Robertsonian,
        }
    }

    /// Checks span fractions, including the minimum span length.
    pub fn validate(&self, min_frac: f64) -> Result<(), SynthError> {
        let spans: Vec<&Span> = match self {
            AbnormalityKind::Deleted(s) | AbnormalityKind::DuplicatedSelf(s) => vec![s],
            AbnormalityKind::AddedForeign { at_frac, fragment } => {
                if !(0.0..=1.0).contains(at_frac) {
                    return Err(SynthError::SpanOutOfRange(format!("insert position {at_frac}")));
                }
                vec![fragment]
            }
            AbnormalityKind::Replaced { span, source } => {
                if let ReplaceSource::Foreign { donor_start_frac } = source {
                    if !(0.0..=1.0).contains(donor_start_frac) {
                        return Err(SynthError::SpanOutOfRange(format!("donor start {donor_start_frac}")));
                    }
                }
                vec![span]
            }
            AbnormalityKind::Robertsonian => vec![],
        };
        for s in spans {
            s.check_fractions()?;
            if s.len_frac < min_frac {
                return Err(SynthError::SpanOutOfRange(format!(
                    "span length {} below minimum {min_frac}",
                    s.len_frac
                )));
            }
        }
        Ok(())
    }
}

/// Applies one structural abnormality to a raw sequence pair.
pub fn apply_abnormality(
    seq: &RawSequencePair,
    kind: &AbnormalityKind,
    donor: Option<&RawSequencePair>,
) -> Result<RawSequencePair, SynthError> {
    let n = seq.len();
    let donor = if kind.needs_donor() {
        Some(donor.ok_or(SynthError::MissingDonor)?)
    } else {
        None
    };
    let out = match kind {
        AbnormalityKind::Deleted(span) => {
            let (s, e) = span.indices(n)?;
            seq.map_rows(|r| [&r[..s], &r[e..]].concat())
        }
        AbnormalityKind::DuplicatedSelf(span) => {
            let (s, e) = span.indices(n)?;
            seq.map_rows(|r| [&r[..e], &r[s..e], &r[e..]].concat())
        }
        AbnormalityKind::AddedForeign { at_frac, fragment } => {
            if !(0.0..=1.0).contains(at_frac) {
                return Err(SynthError::SpanOutOfRange(format!("insert position {at_frac}")));
            }
            let donor = donor.expect("checked above");
            let (fs, fe) = fragment.indices(donor.len())?;
            let at = (at_frac * n as f64).round() as usize;
            let insert = |r: &[f64], d: &[f64]| [&r[..at], &d[fs..fe], &r[at..]].concat();
            RawSequencePair::from_parts_unchecked(
                insert(seq.left(), donor.left()),
                insert(seq.right(), donor.right()),
            )
        }
        AbnormalityKind::Replaced {
            span,
            source: ReplaceSource::Inversion,
        } => {
            let (s, e) = span.indices(n)?;
            seq.map_rows(|r| {
                let mut out = r.to_vec();
                out[s..e].reverse();
                out
            })
        }
        AbnormalityKind::Replaced {
            span,
            source: ReplaceSource::Foreign { donor_start_frac },
        } => {
            let donor = donor.expect("checked above");
            let (s, e) = span.indices(n)?;
            let len = e - s;
            if len > donor.len() || !(0.0..=1.0).contains(donor_start_frac) {
                return Err(SynthError::SpanOutOfRange(format!(
                    "donor of length {} cannot supply {len} samples",
                    donor.len()
                )));
            }
            let ds = (donor_start_frac * (donor.len() - len) as f64).round() as usize;
            let replace = |r: &[f64], d: &[f64]| {
                let mut out = r.to_vec();
                out[s..e].copy_from_slice(&d[ds..ds + len]);
                out
            };
            RawSequencePair::from_parts_unchecked(
                replace(seq.left(), donor.left()),
                replace(seq.right(), donor.right()),
            )
        }
        AbnormalityKind::Robertsonian => seq.map_rows(|r| r.iter().rev().chain(r).copied().collect()),
    };
    if out.is_empty() {
        return Err(SynthError::SpanOutOfRange("abnormality removed the whole sequence".into()));
    }
    Ok(out)
}
