//! Encoder hyperparameters and the size presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model size presets: (hidden layers, heads, hidden dim, block size).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Small,
    Medium,
    Large,
}

impl Preset {
    pub fn dims(self) -> (usize, usize, usize, usize) {
        match self {
            Preset::Small => (2, 2, 128, 1024),
            Preset::Medium => (6, 6, 384, 2048),
            Preset::Large => (12, 12, 768, 4096),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Preset::Small),
            "medium" => Ok(Preset::Medium),
            "large" => Ok(Preset::Large),
            other => Err(Error::Config(format!(
                "unknown preset {other}; expected small|medium|large"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_layers: usize,
    pub heads: usize,
    pub hidden_dim: usize,
    pub block_size: usize,
    /// Total sliding-window span; position i sees i +- d*k for k up to w/2.
    pub window: usize,
    pub dilation: usize,
    /// Positions with global attention; position 0 is the `[CLS]` slot.
    pub global_positions: Vec<usize>,
    pub vocab_size: usize,
    pub ff_multiplier: usize,
    pub dropout: f64,
    /// Error instead of clipping when window * dilation >= sequence length.
    pub strict_window: bool,
}

impl ModelConfig {
    pub fn preset(preset: Preset, vocab_size: usize) -> Self {
        let (hidden_layers, heads, hidden_dim, block_size) = preset.dims();
        Self {
            hidden_layers,
            heads,
            hidden_dim,
            block_size,
            window: 64,
            dilation: 1,
            global_positions: vec![0],
            vocab_size,
            ff_multiplier: 4,
            dropout: 0.1,
            strict_window: false,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads
    }

    pub fn ff_dim(&self) -> usize {
        self.hidden_dim * self.ff_multiplier
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.heads == 0 || self.hidden_dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "hidden_dim {} must be a positive multiple of heads {}",
                self.hidden_dim, self.heads
            )));
        }
        if self.window == 0 || self.window % 2 != 0 {
            return Err(Error::Config(format!("window {} must be even and positive", self.window)));
        }
        if self.dilation == 0 {
            return Err(Error::Config("dilation must be at least 1".into()));
        }
        if self.window * self.dilation >= self.block_size {
            return Err(Error::Config(format!(
                "window {} * dilation {} must stay below block size {}",
                self.window, self.dilation, self.block_size
            )));
        }
        if self.vocab_size < 5 {
            return Err(Error::Config("vocab must include the 5 special tokens".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} out of [0, 1)", self.dropout)));
        }
        for &g in &self.global_positions {
            if g >= self.block_size {
                return Err(Error::Config(format!(
                    "global position {g} outside block size {}",
                    self.block_size
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        Ok(std::fs::write(path, serde_json::to_string_pretty(self)?)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_size_table() {
        assert_eq!(Preset::Small.dims(), (2, 2, 128, 1024));
        assert_eq!(Preset::Medium.dims(), (6, 6, 384, 2048));
        assert_eq!(Preset::Large.dims(), (12, 12, 768, 4096));
        for preset in [Preset::Small, Preset::Medium, Preset::Large] {
            ModelConfig::preset(preset, 100).validate().unwrap();
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ModelConfig::preset(Preset::Small, 100);
        cfg.heads = 3; // 128 % 3 != 0
        assert!(cfg.validate().is_err());

        let mut cfg = ModelConfig::preset(Preset::Small, 100);
        cfg.window = 7;
        assert!(cfg.validate().is_err());

        let mut cfg = ModelConfig::preset(Preset::Small, 100);
        cfg.window = 1024;
        assert!(cfg.validate().is_err());

        let mut cfg = ModelConfig::preset(Preset::Small, 100);
        cfg.vocab_size = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn preset_parses_from_str() {
        assert_eq!("small".parse::<Preset>().unwrap(), Preset::Small);
        assert!("huge".parse::<Preset>().is_err());
    }
}
