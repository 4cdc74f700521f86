//! Renders one chromosome and applies every artificial abnormality to it.

use homnet::data::BandLevel;
use homnet::synth::{
    apply_abnormality, make_templates, render_chromosome, AbnormalityKind, RenderNoise, ReplaceSource, Span,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sparkline(values: &[f64]) -> String {
    const LEVELS: [char; 5] = [' ', '.', ':', '+', '#'];
    values
        .iter()
        .map(|v| LEVELS[(((255.0 - v) / 255.0 * 4.0).round() as usize).min(4)])
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let templates = make_templates(7).for_length(128);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seq = render_chromosome(templates.get(2), BandLevel::B700, RenderNoise::NONE, &mut rng);
    let donor = render_chromosome(templates.get(9), BandLevel::B700, RenderNoise::NONE, &mut rng);

    let span = Span::new(0.3, 0.25);
    let kinds = [
        ("deleted", AbnormalityKind::Deleted(span)),
        (
            "added foreign",
            AbnormalityKind::AddedForeign {
                at_frac: 0.5,
                fragment: Span::new(0.1, 0.2),
            },
        ),
        ("duplicated", AbnormalityKind::DuplicatedSelf(span)),
        (
            "inverted",
            AbnormalityKind::Replaced {
                span,
                source: ReplaceSource::Inversion,
            },
        ),
        (
            "translocated",
            AbnormalityKind::Replaced {
                span,
                source: ReplaceSource::Foreign { donor_start_frac: 0.0 },
            },
        ),
        ("robertsonian", AbnormalityKind::Robertsonian),
    ];

    println!("{:>14} {:>4} |{}|", "normal", seq.len(), sparkline(seq.left()));
    for (name, kind) in kinds {
        let out = apply_abnormality(&seq, &kind, Some(&donor))?;
        println!("{:>14} {:>4} |{}|", name, out.len(), sparkline(out.left()));
    }
    Ok(())
}
