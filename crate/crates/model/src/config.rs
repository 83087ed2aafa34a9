use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Sinusoidal scalar embedding: `dim / 2` wavelengths on a log-uniform grid
/// between `w_min` and `w_max`, in angstroms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SseConfig {
    pub dim: usize,
    pub w_min: f64,
    pub w_max: f64,
    #[serde(default)]
    pub trainable: bool,
}

impl Default for SseConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            w_min: 0.1,
            w_max: 100.0,
            trainable: false,
        }
    }
}

impl SseConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim < 4 || self.dim % 2 != 0 {
            return Err(ModelError::Config(format!("SSE dim {} must be even and at least 4", self.dim)));
        }
        if !(self.w_min > 0.0 && self.w_min < self.w_max && self.w_max.is_finite()) {
            return Err(ModelError::Config(format!(
                "SSE wavelengths need 0 < w_min < w_max, got {} and {}",
                self.w_min, self.w_max
            )));
        }
        Ok(())
    }

    /// `w_i = w_min * (w_max / w_min)^(i / (dim/2 - 1))`.
    pub fn wavelengths(&self) -> Vec<f64> {
        let half = self.dim / 2;
        let ratio = self.w_max / self.w_min;
        (0..half)
            .map(|i| self.w_min * ratio.powf(i as f64 / (half - 1) as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ff: usize,
    pub bias_hidden: usize,
    pub distance_sse: SseConfig,
    pub coord_sse: SseConfig,
    pub buckets: usize,
    pub max_distance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ff: usize,
    pub max_output_tokens: usize,
    pub buckets: usize,
    pub max_distance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
    /// Standard deviation of the shared token embedding at initialization.
    pub embed_std: f64,
}

impl ModelConfig {
    /// Two layers of width 64 with four heads.
    pub fn toy(vocab_size: usize) -> Self {
        Self::sized(vocab_size, 2, 64, 4, 128)
    }

    /// Twelve layers of width 768.
    pub fn full(vocab_size: usize) -> Self {
        Self::sized(vocab_size, 12, 768, 12, 3072)
    }

    pub fn sized(vocab_size: usize, layers: usize, hidden: usize, heads: usize, ff: usize) -> Self {
        Self {
            vocab_size,
            encoder: EncoderConfig {
                layers,
                hidden,
                heads,
                ff,
                bias_hidden: 32,
                distance_sse: SseConfig::default(),
                coord_sse: SseConfig::default(),
                buckets: 32,
                max_distance: 128,
            },
            decoder: DecoderConfig {
                layers,
                hidden,
                heads,
                ff,
                max_output_tokens: 512,
                buckets: 32,
                max_distance: 128,
            },
            embed_std: 0.02,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let e = &self.encoder;
        let d = &self.decoder;
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.vocab_size == 0 {
            return bad("empty vocabulary".into());
        }
        if e.hidden == 0 || e.heads == 0 || e.hidden % e.heads != 0 {
            return bad(format!("encoder hidden {} not divisible by {} heads", e.hidden, e.heads));
        }
        if d.hidden != e.hidden {
            return bad(format!("decoder hidden {} differs from encoder hidden {}", d.hidden, e.hidden));
        }
        if d.heads == 0 || d.hidden % d.heads != 0 {
            return bad(format!("decoder hidden {} not divisible by {} heads", d.hidden, d.heads));
        }
        if e.layers == 0 || d.layers == 0 || e.ff == 0 || d.ff == 0 || e.bias_hidden == 0 {
            return bad("layer counts and widths must be positive".into());
        }
        for (buckets, max_distance) in [(e.buckets, e.max_distance), (d.buckets, d.max_distance)] {
            if buckets < 4 || buckets % 2 != 0 || max_distance <= buckets / 2 {
                return bad(format!("bad relative bucket setup: {buckets} buckets, max distance {max_distance}"));
            }
        }
        if d.max_output_tokens == 0 {
            return bad("max_output_tokens must be positive".into());
        }
        if !(self.embed_std > 0.0 && self.embed_std.is_finite()) {
            return bad("embed_std must be positive".into());
        }
        e.distance_sse.validate()?;
        e.coord_sse.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelength_grid() {
        let w = SseConfig::default().wavelengths();
        assert_eq!(w.len(), 16);
        assert!((w[0] - 0.1).abs() < 1e-15);
        assert!((w[15] - 100.0).abs() < 1e-12);
        let r = w[1] / w[0];
        for p in w.windows(2) {
            assert!((p[1] / p[0] - r).abs() < 1e-12);
        }
    }

    #[test]
    fn presets_validate() {
        ModelConfig::toy(400).validate().unwrap();
        ModelConfig::full(400).validate().unwrap();
        let mut c = ModelConfig::toy(400);
        c.encoder.heads = 5;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::toy(400);
        c.encoder.distance_sse.dim = 7;
        assert!(c.validate().is_err());
    }
}
