//! Synthetic chromosomes and artificial structural abnormalities for
//! self-supervised pretraining.

mod abnormality;
mod corpus;
mod templates;

pub use abnormality::{apply_abnormality, AbnormalityKind, KindTag, ReplaceSource, Span, SpanBounds};
pub use corpus::{
    build_pretrain_corpus, derive_seed, subject_id, synthesize_bag, synthesize_bags, BagClass, Corpus,
    CorpusConfig, CorpusStats, Side, SynthBag, SynthManifest,
};
pub use templates::{
    make_templates, render_chromosome, Band, IdeogramTemplate, LengthGroupTable, RenderNoise, TemplateSet,
    NUM_LENGTH_GROUPS,
};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("abnormality span out of range: {0}")]
    SpanOutOfRange(String),
    #[error("abnormality needs a donor sequence")]
    MissingDonor,
    #[error("invalid corpus configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}
