use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{BandLevel, RawSequencePair, NUM_CHROM_TYPES};

pub const NUM_LENGTH_GROUPS: usize = 7;

/// Chromosome type to size group (1 = longest, 7 = shortest). Types 0..=21
/// are the autosomes 1..=22, 22 is X and 23 is Y.
const GROUP_OF_TYPE: [u8; NUM_CHROM_TYPES] = [
    1, 1, 1, // 1-3
    2, 2, // 4-5
    3, 3, 3, 3, 3, 3, 3, // 6-12
    4, 4, 4, // 13-15
    5, 5, 5, // 16-18
    6, 6, // 19-20
    7, 7, // 21-22
    3, // X
    7, // Y
];

/// Nominal length (samples at band level 700, d = 512) of each group.
const GROUP_BASE_LEN: [f64; NUM_LENGTH_GROUPS] = [460.0, 365.0, 290.0, 210.0, 165.0, 120.0, 92.0];
const BASE_LEN_JITTER: f64 = 0.04;

/// Gray value of a band with darkness 0 and the drop at darkness 1.
const GRAY_BACKGROUND_BAND: f64 = 230.0;
const GRAY_RANGE: f64 = 190.0;
const SUBSAMPLES: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthGroupTable {
    groups: Vec<u8>,
}

impl LengthGroupTable {
    pub fn standard() -> Self {
        Self {
            groups: GROUP_OF_TYPE.to_vec(),
        }
    }

    /// Group `1..=7` of a chromosome type.
    pub fn group(&self, chrom_type: usize) -> u8 {
        self.groups[chrom_type]
    }

    pub fn members(&self, group: u8) -> Vec<usize> {
        (0..self.groups.len()).filter(|t| self.groups[*t] == group).collect()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// One stained band: `[start_frac, end_frac)` with darkness in `[0,1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub start_frac: f64,
    pub end_frac: f64,
    pub intensity: f64,
}

/// Band profile of one chromosome type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdeogramTemplate {
    pub chrom_type: usize,
    pub base_len: usize,
    pub bands: Vec<Band>,
}

impl IdeogramTemplate {
    /// Darkness at position `t ∈ [0,1]`.
    pub fn intensity_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        self.bands
            .iter()
            .find(|b| t < b.end_frac)
            .or(self.bands.last())
            .map_or(0.0, |b| b.intensity)
    }

    /// Same profile at a different nominal length (at least 2 samples).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            base_len: ((self.base_len as f64 * factor).round() as usize).max(2),
            ..self.clone()
        }
    }

    /// Rendered length at a band level: `round(base_len · band / 700)`.
    pub fn rendered_len(&self, band_level: BandLevel) -> usize {
        ((self.base_len as f64 * f64::from(band_level.value()) / 700.0).round() as usize).max(1)
    }
}

/// Templates for all 24 types plus their size grouping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub templates: Vec<IdeogramTemplate>,
    pub groups: LengthGroupTable,
}

impl TemplateSet {
    pub fn get(&self, chrom_type: usize) -> &IdeogramTemplate {
        &self.templates[chrom_type]
    }

    /// Every template rescaled for sequences of length `d` instead of 512.
    pub fn for_length(&self, d: usize) -> Self {
        let f = d as f64 / crate::data::DEFAULT_D as f64;
        Self {
            templates: self.templates.iter().map(|t| t.scaled(f)).collect(),
            groups: self.groups.clone(),
        }
    }
}

pub fn make_templates(seed: u64) -> TemplateSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = LengthGroupTable::standard();
    let templates = (0..NUM_CHROM_TYPES)
        .map(|chrom_type| {
            let group = usize::from(groups.group(chrom_type));
            let jitter = rng.gen_range(-BASE_LEN_JITTER..=BASE_LEN_JITTER);
            let base_len = (GROUP_BASE_LEN[group - 1] * (1.0 + jitter)).round() as usize;
            let n_bands = rng.gen_range(4..=12);
            let widths: Vec<f64> = (0..n_bands).map(|_| rng.gen_range(0.5..1.5)).collect();
            let total: f64 = widths.iter().sum();
            let mut dark = rng.gen_bool(0.5);
            let mut start = 0.0;
            let mut bands = Vec::with_capacity(n_bands);
            for (i, w) in widths.iter().enumerate() {
                let end = if i + 1 == n_bands { 1.0 } else { start + w / total };
                let intensity = if dark { rng.gen_range(0.6..0.95) } else { rng.gen_range(0.05..0.35) };
                bands.push(Band {
                    start_frac: start,
                    end_frac: end,
                    intensity,
                });
                start = end;
                dark = !dark;
            }
            IdeogramTemplate {
                chrom_type,
                base_len,
                bands,
            }
        })
        .collect();
    TemplateSet { templates, groups }
}

/// Rendering perturbations: pixel noise (gray levels) and smooth positional warp.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderNoise {
    pub sigma: f64,
    pub warp_amp: f64,
}

impl RenderNoise {
    pub const NONE: RenderNoise = RenderNoise {
        sigma: 0.0,
        warp_amp: 0.0,
    };
}

impl Default for RenderNoise {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            warp_amp: 0.03,
        }
    }
}

/// Renders raw gray-mean sequences for one chromosome. Both chromatid rows
/// share the geometric warp but receive independent pixel noise.
pub fn render_chromosome<R: Rng>(
    template: &IdeogramTemplate,
    band_level: BandLevel,
    noise: RenderNoise,
    rng: &mut R,
) -> RawSequencePair {
    let n = template.rendered_len(band_level);
    let (w1, w2): (f64, f64) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
    let warp = |t: f64| {
        t + noise.warp_amp
            * (w1 * (std::f64::consts::PI * t).sin() + 0.5 * w2 * (2.0 * std::f64::consts::PI * t).sin())
    };
    let profile: Vec<f64> = (0..n)
        .map(|i| {
            let darkness = (0..SUBSAMPLES)
                .map(|s| {
                    let t = (i as f64 + (s as f64 + 0.5) / SUBSAMPLES as f64) / n as f64;
                    template.intensity_at(warp(t))
                })
                .sum::<f64>()
                / SUBSAMPLES as f64;
            GRAY_BACKGROUND_BAND - GRAY_RANGE * darkness
        })
        .collect();
    let mut noisy = |base: &[f64]| -> Vec<f64> {
        if noise.sigma <= 0.0 {
            return base.to_vec();
        }
        let normal = Normal::new(0.0, noise.sigma).expect("positive sigma");
        base.iter().map(|v| (v + normal.sample(rng)).clamp(0.0, 255.0)).collect()
    };
    let left = noisy(&profile);
    let right = noisy(&profile);
    RawSequencePair::new(left, right).expect("rendered values are clipped to [0,255]")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_are_deterministic() {
        assert_eq!(make_templates(42), make_templates(42));
        assert_ne!(make_templates(42), make_templates(43));
    }

    #[test]
    fn group_lengths_strictly_decrease() {
        let set = make_templates(7);
        for g in 1..NUM_LENGTH_GROUPS as u8 {
            let min_here = set.groups.members(g).iter().map(|t| set.get(*t).base_len).min().unwrap();
            let max_next = set.groups.members(g + 1).iter().map(|t| set.get(*t).base_len).max().unwrap();
            assert!(min_here > max_next, "group {g}: {min_here} vs {max_next}");
        }
    }

    #[test]
    fn every_type_in_exactly_one_group() {
        let table = LengthGroupTable::standard();
        let mut seen = [0; NUM_CHROM_TYPES];
        for g in 1..=NUM_LENGTH_GROUPS as u8 {
            let members = table.members(g);
            assert!(members.len() >= 2, "group {g} needs two types for mixed pairs");
            for t in members {
                seen[t] += 1;
            }
        }
        assert!(seen.iter().all(|c| *c == 1));
    }

    #[test]
    fn bands_tile_unit_interval_and_alternate() {
        for t in make_templates(3).templates {
            assert!((4..=12).contains(&t.bands.len()));
            assert_eq!(t.bands[0].start_frac, 0.0);
            assert_eq!(t.bands.last().unwrap().end_frac, 1.0);
            for w in t.bands.windows(2) {
                assert_eq!(w[0].end_frac, w[1].start_frac);
                assert!(w[0].start_frac < w[0].end_frac);
                assert_ne!(w[0].intensity > 0.5, w[1].intensity > 0.5);
            }
        }
    }

    #[test]
    fn noise_free_render_is_symmetric() {
        let set = make_templates(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = render_chromosome(set.get(0), BandLevel::B550, RenderNoise::NONE, &mut rng);
        assert_eq!(r.left(), r.right());
    }

    #[test]
    fn band_level_scales_length() {
        let set = make_templates(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in &set.templates {
            let hi = render_chromosome(t, BandLevel::B700, RenderNoise::default(), &mut rng).len() as f64;
            let lo = render_chromosome(t, BandLevel::B300, RenderNoise::default(), &mut rng).len() as f64;
            assert!((hi * 3.0 / 7.0 - lo).abs() <= 1.0, "{hi} vs {lo}");
        }
    }

    #[test]
    fn dark_bands_render_darker_than_light_bands() {
        let set = make_templates(11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = set.get(0);
        let r = render_chromosome(t, BandLevel::B700, RenderNoise::default(), &mut rng);
        let n = r.len() as f64;
        let seg_mean = |b: &Band| {
            // Interior of the band, away from blurred edges and warp shifts.
            let lo = ((b.start_frac + 0.1 * (b.end_frac - b.start_frac)) * n).ceil() as usize + 2;
            let hi = ((b.end_frac - 0.1 * (b.end_frac - b.start_frac)) * n).floor() as usize;
            let hi = hi.saturating_sub(2);
            if hi <= lo {
                return None;
            }
            Some(r.left()[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
        };
        let dark: Vec<f64> = t.bands.iter().filter(|b| b.intensity > 0.5).filter_map(seg_mean).collect();
        let light: Vec<f64> = t.bands.iter().filter(|b| b.intensity < 0.5).filter_map(seg_mean).collect();
        assert!(!dark.is_empty() && !light.is_empty());
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(avg(&dark) < avg(&light), "dark {} light {}", avg(&dark), avg(&light));
    }
}
