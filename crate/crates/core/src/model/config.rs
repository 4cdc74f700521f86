use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::numerics::Activation;

/// How alignment scores become alignment weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttnNorm {
    /// Softmax over the scores of each query region.
    Softmax,
    /// Scores divided by their own sum, the sum floored at `1e-6` in magnitude.
    RawEps,
}

/// Floor applied to the raw score sum under [`AttnNorm::RawEps`].
pub const RAW_NORM_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Padded sequence length.
    pub d: usize,
    /// Region length merged by the strided convolution.
    pub k_mg: usize,
    /// Region feature width.
    pub l_r: usize,
    /// Attention heads.
    pub n_h: usize,
    pub hom_layers: usize,
    /// Width of the pair-difference representation.
    pub l_h: usize,
    /// Pairs per bag.
    pub m: usize,
    pub hidden_act: Activation,
    pub attn_norm: AttnNorm,
    /// Replace chromosome `b` of every pair with zeros (single-chromosome ablation).
    pub single_chromosome: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 512,
            k_mg: 32,
            l_r: 64,
            n_h: 4,
            hom_layers: 2,
            l_h: 128,
            m: 5,
            hidden_act: Activation::Relu,
            attn_norm: AttnNorm::Softmax,
            single_chromosome: false,
        }
    }
}

impl ModelConfig {
    /// Number of regions, `d / k_mg`.
    pub fn n_r(&self) -> usize {
        self.d / self.k_mg
    }

    /// Per-head width, `l_r / n_h`.
    pub fn d_a(&self) -> usize {
        self.l_r / self.n_h
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        for (name, v) in [
            ("d", self.d),
            ("k_mg", self.k_mg),
            ("l_r", self.l_r),
            ("n_h", self.n_h),
            ("hom_layers", self.hom_layers),
            ("m", self.m),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.l_h < 2 {
            return bad(format!("l_h = {} leaves no hidden width for the bag MLP", self.l_h));
        }
        if !self.d.is_multiple_of(self.k_mg) {
            return bad(format!("d = {} is not divisible by k_mg = {}", self.d, self.k_mg));
        }
        if !self.l_r.is_multiple_of(self.n_h) {
            return bad(format!("l_r = {} is not divisible by n_h = {}", self.l_r, self.n_h));
        }
        if self.hidden_act != Activation::Relu {
            return bad("hidden activation must be relu".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_derive_regions_and_head_width() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.n_r(), 16);
        assert_eq!(cfg.d_a(), 16);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_non_dividing_extents() {
        let cfg = ModelConfig { d: 100, ..ModelConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ModelConfig { n_h: 3, ..ModelConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ModelConfig { m: 0, ..ModelConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: ModelConfig = serde_json::from_str(r#"{"d": 256, "attn_norm": "raw_eps"}"#).unwrap();
        assert_eq!(cfg.d, 256);
        assert_eq!(cfg.attn_norm, AttnNorm::RawEps);
        assert_eq!(cfg.l_r, 64);
    }
}
