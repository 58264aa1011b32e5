use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grlnet::BackboneSpec;
use crate::regloss::LossWeights;

/// Which components of the method are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Raw samples, classification loss only.
    Baseline,
    /// Adds self-morph samples to the classification set.
    Sm,
    /// Adds style-mixed samples to the classification set.
    Ism,
    /// Raw classification plus prediction consistency against augmented views.
    Label,
    /// Raw classification plus embedding consistency against augmented views.
    Emb,
    /// Both augmentations and both consistency terms.
    Grl,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Baseline,
        Variant::Sm,
        Variant::Ism,
        Variant::Label,
        Variant::Emb,
        Variant::Grl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Sm => "sm",
            Variant::Ism => "ism",
            Variant::Label => "label",
            Variant::Emb => "emb",
            Variant::Grl => "grl",
        }
    }

    pub fn uses_label(self) -> bool {
        matches!(self, Variant::Label | Variant::Grl)
    }

    pub fn uses_emb(self) -> bool {
        matches!(self, Variant::Emb | Variant::Grl)
    }

    pub fn uses_pairs(self) -> bool {
        self.uses_label() || self.uses_emb()
    }

    /// Self-morph samples take part in the classification loss.
    pub fn classifies_sm(self) -> bool {
        matches!(self, Variant::Sm | Variant::Grl)
    }

    /// Style-mixed samples take part in the classification loss.
    pub fn classifies_ism(self) -> bool {
        matches!(self, Variant::Ism | Variant::Grl)
    }

    /// Parse a comma-separated list such as `baseline,sm,grl`.
    pub fn parse_list(s: &str) -> Result<Vec<Variant>> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown variant {s:?}")))
    }
}

/// Training configuration. Serialized as a flat TOML table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub tau: f64,
    pub eta: f64,
    pub mu: f64,
    pub delta: f64,
    pub levels: usize,
    pub aligned_dim: usize,
    /// Channels of the first stage; stage `i` has `width * 2^i`.
    pub width: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub image_size: usize,
    pub seed: u64,
    pub variant: Variant,
    /// Intermediate embeddings `F_1..F_{N-1}` entering the embedding loss,
    /// counted from the deepest; `F_cat` always takes part. `None` means all.
    pub emb_levels: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        TrainConfig {
            tau: w.tau,
            eta: w.eta,
            mu: w.mu,
            delta: w.delta,
            levels: 4,
            aligned_dim: 64,
            width: 16,
            lr: 0.003,
            momentum: 0.9,
            batch_size: 32,
            epochs: 10,
            image_size: 64,
            seed: 0,
            variant: Variant::Grl,
            emb_levels: None,
        }
    }
}

impl TrainConfig {
    /// Optimizer settings of the original large-scale protocol.
    pub fn paper_protocol() -> Self {
        TrainConfig {
            lr: 1e-4,
            batch_size: 64,
            epochs: 50,
            ..TrainConfig::default()
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            tau: self.tau,
            eta: self.eta,
            mu: self.mu,
            delta: self.delta,
        }
    }

    pub fn spec(&self) -> BackboneSpec {
        BackboneSpec {
            levels: self.levels,
            channels: (0..self.levels).map(|i| self.width << i).collect(),
            aligned_dim: self.aligned_dim,
            num_classes: 2,
            input_size: self.image_size,
        }
    }

    /// Indices into the embedding list used by the embedding loss.
    pub fn active_levels(&self) -> Vec<usize> {
        let inner = self.levels - 1;
        let keep = self.emb_levels.unwrap_or(inner).min(inner);
        (inner - keep..=inner).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.weights().validate()?;
        self.spec().validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch size and epochs must be positive"));
        }
        if self.image_size < 16 {
            return Err(Error::invalid("image size must be at least 16"));
        }
        if self.emb_levels.is_some_and(|n| n >= self.levels) {
            return Err(Error::invalid(format!(
                "emb_levels must be below levels ({})",
                self.levels
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<TrainConfig> {
        let cfg: TrainConfig = toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainConfig::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(TrainConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.weights(), LossWeights::default());
        TrainConfig::paper_protocol().validate().unwrap();
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = TrainConfig::from_toml_str("variant = \"baseline\"\nepochs = 2\n").unwrap();
        assert_eq!(cfg.variant, Variant::Baseline);
        assert_eq!(cfg.epochs, 2);
        assert_eq!(cfg.batch_size, 32);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(TrainConfig::from_toml_str("colour = 1"), Err(Error::Config(_))));
        assert!(TrainConfig::from_toml_str("tau = 0.0").is_err());
        assert!(TrainConfig::from_toml_str("lr = -1.0").is_err());
        assert!(TrainConfig::from_toml_str("variant = \"fancy\"").is_err());
        assert!(TrainConfig::from_toml_str("levels = 4\nemb_levels = 4").is_err());
    }

    #[test]
    fn active_levels_keep_the_deepest() {
        let mut cfg = TrainConfig::default();
        assert_eq!(cfg.active_levels(), vec![0, 1, 2, 3]);
        cfg.emb_levels = Some(1);
        assert_eq!(cfg.active_levels(), vec![2, 3]);
        cfg.emb_levels = Some(0);
        assert_eq!(cfg.active_levels(), vec![3]);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!(Variant::parse_list("baseline, grl").unwrap(), vec![Variant::Baseline, Variant::Grl]);
        assert!(Variant::parse_list("baseline,nope").is_err());
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
    }
}
