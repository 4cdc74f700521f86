//! Pretraining corpus assembly: normal bags, operator-driven abnormal bags and
//! mixed-type abnormal bags, split by subject.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::abnormality::{apply_abnormality, AbnormalityKind, SpanBounds};
use super::templates::{make_templates, render_chromosome, RenderNoise, TemplateSet};
use super::SynthError;
use crate::data::{
    normalize_fit, resample_raw, BagRecord, BandLevel, ChromosomePair, ChromosomeSequence,
    RawSequencePair, NUM_CHROM_TYPES,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub n_bags: usize,
    pub n_subjects: usize,
    /// Pairs per bag.
    pub m: usize,
    pub d: usize,
    /// Fraction of bags made abnormal by an operator.
    pub abnormal_ratio: f64,
    /// Fraction of bags made abnormal by pairing two types of one length group.
    pub mixed_type_ratio: f64,
    /// Fraction of subjects held out for validation.
    pub val_fraction: f64,
    pub noise: RenderNoise,
    /// Each rendered chromosome is stretched by an independent factor drawn
    /// from `1 ± condensation_jitter`, so homologs in one cell differ in length.
    pub condensation_jitter: f64,
    pub spans: SpanBounds,
    pub template_seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_bags: 1000,
            n_subjects: 200,
            m: 5,
            d: crate::data::DEFAULT_D,
            abnormal_ratio: 0.4,
            mixed_type_ratio: 0.1,
            val_fraction: 0.1,
            noise: RenderNoise::default(),
            condensation_jitter: 0.06,
            spans: SpanBounds::default(),
            template_seed: 7,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidConfig(msg));
        for (name, v) in [
            ("abnormal_ratio", self.abnormal_ratio),
            ("mixed_type_ratio", self.mixed_type_ratio),
            ("val_fraction", self.val_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0,1]"));
            }
        }
        if self.abnormal_ratio + self.mixed_type_ratio > 1.0 + 1e-12 {
            return bad("abnormal_ratio + mixed_type_ratio exceeds 1".into());
        }
        if !(0.0..0.5).contains(&self.condensation_jitter) {
            return bad(format!("condensation_jitter = {} outside [0, 0.5)", self.condensation_jitter));
        }
        if self.m == 0 || self.n_subjects == 0 || self.d < 8 {
            return bad("m and n_subjects must be positive and d at least 8".into());
        }
        if self.n_subjects > self.n_bags.max(1) {
            return bad(format!("{} subjects for {} bags", self.n_subjects, self.n_bags));
        }
        if !(0.0 < self.spans.min_frac && self.spans.min_frac <= self.spans.max_frac && self.spans.max_frac < 1.0) {
            return bad(format!("span bounds {:?}", self.spans));
        }
        Ok(())
    }
}

/// How a bag was built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BagClass {
    Normal,
    Operator,
    MixedType,
}

/// Which chromosome of a pair received the abnormality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// A generated bag along with its provenance.
#[derive(Clone, Debug)]
pub struct SynthBag {
    pub record: BagRecord,
    pub class: BagClass,
    pub kind: Option<AbnormalityKind>,
    /// Type paired against `record.chrom_type` in mixed-type bags.
    pub partner_type: Option<usize>,
    /// Pairs as rendered before any abnormality was applied.
    pub clean_pairs: Vec<ChromosomePair>,
    pub altered: Vec<Option<Side>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_train: usize,
    pub n_val: usize,
    pub n_normal: usize,
    pub n_operator: usize,
    pub n_mixed_type: usize,
    /// Operator-driven bags per abnormality kind.
    pub per_kind: BTreeMap<String, usize>,
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub train: Vec<BagRecord>,
    pub val: Vec<BagRecord>,
    pub stats: CorpusStats,
}

/// Sidecar describing how a corpus was generated; enough to regenerate it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub seed: u64,
    pub config: CorpusConfig,
    pub stats: CorpusStats,
}

impl SynthManifest {
    pub fn regenerate(&self) -> Result<Corpus, SynthError> {
        let templates = make_templates(self.config.template_seed);
        build_pretrain_corpus(&templates, &self.config, self.seed)
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const MAX_OPERATOR_ATTEMPTS: usize = 64;
const STREAM_CLASSES: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_SUBJECT_BASE: u64 = 1 << 32;

fn to_sequence(raw: &RawSequencePair, d: usize) -> ChromosomeSequence {
    let fitted;
    let raw = if raw.len() > d {
        fitted = resample_raw(raw, d).expect("d >= 8");
        &fitted
    } else {
        raw
    };
    normalize_fit(raw, d).expect("length fits d")
}

/// Builds one bag of the given class for `chrom_type`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_bag<R: Rng>(
    templates: &TemplateSet,
    cfg: &CorpusConfig,
    class: BagClass,
    chrom_type: usize,
    band_level: BandLevel,
    record_id: String,
    subject_id: String,
    rng: &mut R,
) -> Result<SynthBag, SynthError> {
    let template = templates.get(chrom_type);
    let render = |t, rng: &mut R| {
        let raw = render_chromosome(t, band_level, cfg.noise, rng);
        if cfg.condensation_jitter == 0.0 {
            return raw;
        }
        let f = 1.0 + rng.gen_range(-cfg.condensation_jitter..=cfg.condensation_jitter);
        let n = ((raw.len() as f64 * f).round() as usize).max(2);
        resample_raw(&raw, n).expect("target length >= 2")
    };
    let partner_type = match class {
        BagClass::MixedType => {
            let group = templates.groups.group(chrom_type);
            let others: Vec<usize> = templates
                .groups
                .members(group)
                .into_iter()
                .filter(|t| *t != chrom_type)
                .collect();
            Some(*others.choose(rng).ok_or_else(|| {
                SynthError::InvalidConfig(format!("length group {group} has a single type"))
            })?)
        }
        _ => None,
    };

    let mut raw = Vec::with_capacity(cfg.m);
    let mut clean_pairs = Vec::with_capacity(cfg.m);
    for _ in 0..cfg.m {
        let a_raw = render(template, rng);
        let b_template = partner_type.map_or(template, |t| templates.get(t));
        let b_raw = render(b_template, rng);
        clean_pairs.push(ChromosomePair::new(to_sequence(&a_raw, cfg.d), to_sequence(&b_raw, cfg.d))?);
        raw.push((a_raw, b_raw));
    }

    let mut kind = None;
    let mut pairs = Vec::with_capacity(cfg.m);
    let mut altered = Vec::with_capacity(cfg.m);
    match class {
        BagClass::Normal => {
            pairs.clone_from(&clean_pairs);
            altered.resize(cfg.m, None);
        }
        BagClass::MixedType => {
            for clean in &clean_pairs {
                pairs.push(if rng.gen_bool(0.5) { clean.swapped() } else { clean.clone() });
            }
            altered.resize(cfg.m, None);
        }
        BagClass::Operator => {
            let sides: Vec<Side> = (0..cfg.m)
                .map(|_| if rng.gen_bool(0.5) { Side::A } else { Side::B })
                .collect();
            // Short chromosomes can round a span down to a no-op; redraw the
            // abnormality until it visibly alters every targeted chromosome.
            'attempts: for _ in 0..MAX_OPERATOR_ATTEMPTS {
                let k = AbnormalityKind::sample(cfg.spans, rng);
                k.validate(cfg.spans.min_frac)?;
                let donor_type = if k.needs_donor() {
                    // A donor must be long enough to supply the largest span
                    // the sampler can draw on this target.
                    let j = cfg.condensation_jitter;
                    let longest = (template.rendered_len(band_level) as f64 * (1.0 + j)).round();
                    let need = (cfg.spans.max_frac * longest).round() as usize;
                    let shortest = |t: usize| (templates.get(t).rendered_len(band_level) as f64 * (1.0 - j)).round() as usize;
                    let donors: Vec<usize> = (0..NUM_CHROM_TYPES)
                        .filter(|t| *t != chrom_type && shortest(*t) >= need)
                        .collect();
                    Some(*donors.choose(rng).ok_or_else(|| {
                        SynthError::InvalidConfig(format!("no donor type can supply {need} samples"))
                    })?)
                } else {
                    None
                };
                pairs.clear();
                for (((a_raw, b_raw), clean), side) in raw.iter().zip(&clean_pairs).zip(&sides) {
                    let donor = donor_type.map(|t| render(templates.get(t), rng));
                    let target = if *side == Side::A { a_raw } else { b_raw };
                    let changed = to_sequence(&apply_abnormality(target, &k, donor.as_ref())?, cfg.d);
                    let pair = match side {
                        Side::A if changed != clean.a => ChromosomePair::new(changed, clean.b.clone())?,
                        Side::B if changed != clean.b => ChromosomePair::new(clean.a.clone(), changed)?,
                        _ => continue 'attempts,
                    };
                    pairs.push(pair);
                }
                kind = Some(k);
                break;
            }
            if kind.is_none() {
                return Err(SynthError::InvalidConfig(format!(
                    "no abnormality altered type {chrom_type} at band {} within {MAX_OPERATOR_ATTEMPTS} draws",
                    band_level.value()
                )));
            }
            altered = sides.into_iter().map(Some).collect();
        }
    }

    Ok(SynthBag {
        record: BagRecord {
            record_id,
            subject_id,
            chrom_type,
            band_level,
            label: u8::from(class != BagClass::Normal),
            pairs,
        },
        class,
        kind,
        partner_type,
        clean_pairs,
        altered,
    })
}

/// Exact class counts for `n` bags, shuffled deterministically.
fn class_schedule(cfg: &CorpusConfig, seed: u64) -> Vec<BagClass> {
    let n = cfg.n_bags;
    let n_op = (n as f64 * cfg.abnormal_ratio).round() as usize;
    let n_mix = ((n as f64 * cfg.mixed_type_ratio).round() as usize).min(n - n_op.min(n));
    let n_op = n_op.min(n);
    let mut classes = Vec::with_capacity(n);
    classes.extend(std::iter::repeat_n(BagClass::Operator, n_op));
    classes.extend(std::iter::repeat_n(BagClass::MixedType, n_mix));
    classes.extend(std::iter::repeat_n(BagClass::Normal, n - n_op - n_mix));
    classes.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_CLASSES)));
    classes
}

pub fn subject_id(index: usize) -> String {
    format!("subj{index:05}")
}

/// Generates every bag of the corpus, in bag order, with provenance.
///
/// Bag `i` belongs to subject `i mod n_subjects`; each subject draws from its
/// own derived random stream, so output does not depend on generation order.
pub fn synthesize_bags(templates: &TemplateSet, cfg: &CorpusConfig, seed: u64) -> Result<Vec<SynthBag>, SynthError> {
    cfg.validate()?;
    let templates = templates.for_length(cfg.d);
    let classes = class_schedule(cfg, seed);
    let mut slots: Vec<Option<SynthBag>> = vec![None; cfg.n_bags];
    for subject in 0..cfg.n_subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SUBJECT_BASE + subject as u64));
        for i in (subject..cfg.n_bags).step_by(cfg.n_subjects) {
            let chrom_type = rng.gen_range(0..NUM_CHROM_TYPES);
            let band = BandLevel::ALL[rng.gen_range(0..BandLevel::ALL.len())];
            slots[i] = Some(synthesize_bag(
                &templates,
                cfg,
                classes[i],
                chrom_type,
                band,
                format!("bag{i:06}"),
                subject_id(subject),
                &mut rng,
            )?);
        }
    }
    Ok(slots.into_iter().map(|b| b.expect("every slot filled")).collect())
}

/// Subject ids held out for validation.
fn validation_subjects(cfg: &CorpusConfig, seed: u64) -> BTreeSet<String> {
    let n_val = (cfg.n_subjects as f64 * cfg.val_fraction).round() as usize;
    let mut ids: Vec<usize> = (0..cfg.n_subjects).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SPLIT)));
    ids.into_iter().take(n_val).map(subject_id).collect()
}

/// Builds the labelled pretraining corpus and splits it by subject.
pub fn build_pretrain_corpus(templates: &TemplateSet, cfg: &CorpusConfig, seed: u64) -> Result<Corpus, SynthError> {
    let bags = synthesize_bags(templates, cfg, seed)?;
    let val_subjects = validation_subjects(cfg, seed);
    let mut stats = CorpusStats::default();
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for bag in bags {
        match bag.class {
            BagClass::Normal => stats.n_normal += 1,
            BagClass::MixedType => stats.n_mixed_type += 1,
            BagClass::Operator => {
                stats.n_operator += 1;
                let name = bag.kind.expect("operator bags carry a kind").tag().name();
                *stats.per_kind.entry(name.to_string()).or_default() += 1;
            }
        }
        if val_subjects.contains(&bag.record.subject_id) {
            val.push(bag.record);
        } else {
            train.push(bag.record);
        }
    }
    stats.n_train = train.len();
    stats.n_val = val.len();
    Ok(Corpus { train, val, stats })
}
