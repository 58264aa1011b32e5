use super::layers::{Linear, Param};
use crate::error::{Error, Result};
use crate::seed;

/// Probabilities are kept this far away from 0 and 1.
pub const PROB_CLAMP: f64 = 1e-7;

/// Two-layer perceptron scoring "source domain" probability of an embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub hidden: Linear,
    pub out: Linear,
}

#[derive(Debug, Clone)]
pub struct DiscCache {
    input: Vec<f64>,
    hidden: Vec<f64>,
    prob: f64,
    clamped: bool,
}

impl DiscCache {
    pub fn prob(&self) -> f64 {
        self.prob
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Discriminator {
    fn new(dim: usize, rng: &mut seed::Rng) -> Self {
        Discriminator {
            hidden: Linear::new(dim, dim, 2f64.sqrt(), rng),
            out: Linear::zeros(dim, 1),
        }
    }

    pub fn forward(&self, x: &[f64]) -> DiscCache {
        let hidden: Vec<f64> = self.hidden.forward(x).into_iter().map(|v| v.max(0.0)).collect();
        let z = self.out.forward(&hidden)[0];
        let raw = sigmoid(z);
        let prob = raw.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        DiscCache {
            input: x.to_vec(),
            hidden,
            prob,
            clamped: prob != raw,
        }
    }

    fn d_hidden(&self, cache: &DiscCache, d_prob: f64) -> (f64, Vec<f64>) {
        let dz = if cache.clamped {
            0.0
        } else {
            d_prob * cache.prob * (1.0 - cache.prob)
        };
        let mut dh = self.out.backward_input(&[dz]);
        for (g, h) in dh.iter_mut().zip(&cache.hidden) {
            if *h <= 0.0 {
                *g = 0.0;
            }
        }
        (dz, dh)
    }

    /// dL/d(input) for an upstream dL/d(prob); parameters untouched.
    pub fn backward_input(&self, cache: &DiscCache, d_prob: f64) -> Vec<f64> {
        let (_, dh) = self.d_hidden(cache, d_prob);
        self.hidden.backward_input(&dh)
    }

    pub fn backward_params(&mut self, cache: &DiscCache, d_prob: f64) {
        let (dz, dh) = self.d_hidden(cache, d_prob);
        self.out.backward_params(&cache.hidden, &[dz]);
        self.hidden.backward_params(&cache.input, &dh);
    }
}

/// One discriminator per embedding level (`F_1..F_{N-1}`, then `F_cat`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorBank {
    pub dim: usize,
    pub discs: Vec<Discriminator>,
}

impl DiscriminatorBank {
    /// Hidden layers are randomly initialized; output layers start at zero,
    /// so a fresh bank answers 0.5 everywhere.
    pub fn new(levels: usize, dim: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed::derive_tag(seed, "discriminators"));
        DiscriminatorBank {
            dim,
            discs: (0..levels).map(|_| Discriminator::new(dim, &mut rng)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.discs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discs.is_empty()
    }

    fn check(&self, features: &[&[f64]]) -> Result<()> {
        if features.len() != self.discs.len() {
            return Err(Error::invalid(format!(
                "{} embeddings for {} discriminators",
                features.len(),
                self.discs.len()
            )));
        }
        if let Some(f) = features.iter().find(|f| f.len() != self.dim) {
            return Err(Error::invalid(format!(
                "embedding of length {} for discriminator width {}",
                f.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn forward(&self, features: &[&[f64]]) -> Result<Vec<DiscCache>> {
        self.check(features)?;
        Ok(self.discs.iter().zip(features).map(|(d, f)| d.forward(f)).collect())
    }

    /// Source-domain probability for each level.
    pub fn discriminate(&self, features: &[&[f64]]) -> Result<Vec<f64>> {
        Ok(self.forward(features)?.iter().map(DiscCache::prob).collect())
    }

    pub fn params(&self) -> Vec<&Param> {
        self.discs
            .iter()
            .flat_map(|d| [&d.hidden.weight, &d.hidden.bias, &d.out.weight, &d.out.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.discs
            .iter_mut()
            .flat_map(|d| {
                [
                    &mut d.hidden.weight,
                    &mut d.hidden.bias,
                    &mut d.out.weight,
                    &mut d.out.bias,
                ]
            })
            .collect()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }
}
