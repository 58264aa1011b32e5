use serde::{Deserialize, Serialize};

use super::layers::{
    conv_out_dim, global_avg_pool, global_avg_pool_backward, ConvCache, ConvStage, Linear, Param,
};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::seed;

pub const NUM_CLASSES: usize = 2;

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub levels: usize,
    pub channels: Vec<usize>,
    pub aligned_dim: usize,
    pub num_classes: usize,
    pub input_size: usize,
}

impl Default for BackboneSpec {
    fn default() -> Self {
        BackboneSpec {
            levels: 4,
            channels: vec![16, 32, 64, 128],
            aligned_dim: 64,
            num_classes: NUM_CLASSES,
            input_size: 64,
        }
    }
}

impl BackboneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::invalid("backbone needs at least two levels"));
        }
        if self.channels.len() != self.levels {
            return Err(Error::invalid(format!(
                "{} channel widths given for {} levels",
                self.channels.len(),
                self.levels
            )));
        }
        if self.aligned_dim == 0 || self.channels.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if self.num_classes != NUM_CLASSES {
            return Err(Error::invalid("only two-class detection is supported"));
        }
        if self.input_size < 2 {
            return Err(Error::invalid("input size too small"));
        }
        Ok(())
    }

    /// Number of prediction levels `N` (equal to the backbone depth).
    pub fn n(&self) -> usize {
        self.levels
    }
}

/// Everything one forward pass produces.
///
/// `features` holds `F_1..F_{N-1}`; `feature_cat` is the point-wise fused
/// concatenation of `F_1..F_N`. Heads are ordered auxiliary `1..N-1`, then the
/// baseline head `N`, then the concatenated head `N+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOutputs {
    pub features: Vec<Vec<f64>>,
    pub feature_cat: Vec<f64>,
    pub logits_aux: Vec<[f64; 2]>,
    pub logits_final: [f64; 2],
    pub logits_cat: [f64; 2],
}

impl LevelOutputs {
    /// All `N + 1` classifier outputs in loss order.
    pub fn heads(&self) -> Vec<[f64; 2]> {
        let mut h = self.logits_aux.clone();
        h.push(self.logits_final);
        h.push(self.logits_cat);
        h
    }

    /// The `N` embeddings seen by the discriminator bank (`F_cat` last).
    pub fn embeddings(&self) -> Vec<&[f64]> {
        let mut e: Vec<&[f64]> = self.features.iter().map(Vec::as_slice).collect();
        e.push(&self.feature_cat);
        e
    }
}

/// Gradients of a scalar loss with respect to every output of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrads {
    pub heads: Vec<[f64; 2]>,
    /// Same layout as [`LevelOutputs::embeddings`].
    pub embeddings: Vec<Vec<f64>>,
}

impl OutputGrads {
    pub fn zeros(spec: &BackboneSpec) -> Self {
        OutputGrads {
            heads: vec![[0.0; 2]; spec.n() + 1],
            embeddings: vec![vec![0.0; spec.aligned_dim]; spec.n()],
        }
    }

    pub fn add_scaled(&mut self, other: &OutputGrads, scale: f64) {
        for (a, b) in self.heads.iter_mut().zip(&other.heads) {
            a[0] += scale * b[0];
            a[1] += scale * b[1];
        }
        for (a, b) in self.embeddings.iter_mut().zip(&other.embeddings) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

/// Intermediate values needed by [`GrlNet::backward`].
pub struct ForwardCache {
    stages: Vec<ConvCache>,
    /// Spatial size of each stage output.
    spatial: Vec<usize>,
    pooled: Vec<Vec<f64>>,
    aligned: Vec<Vec<f64>>,
    concat: Vec<f64>,
    feature_cat: Vec<f64>,
}

/// The shared backbone `kappa_1..kappa_K` plus the baseline head `c_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    pub spec: BackboneSpec,
    pub stages: Vec<ConvStage>,
    pub final_head: Linear,
}

pub(crate) fn image_to_chw(img: &Image) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = vec![0.0; 3 * w * h];
    for (i, px) in img.data().chunks_exact(3).enumerate() {
        for c in 0..3 {
            out[c * w * h + i] = px[c] - 0.5;
        }
    }
    out
}

impl Backbone {
    pub fn new(spec: &BackboneSpec, rng: &mut seed::Rng) -> Result<Self> {
        spec.validate()?;
        let mut stages = Vec::with_capacity(spec.levels);
        let mut cin = 3;
        for &cout in &spec.channels {
            stages.push(ConvStage::new(cin, cout, rng));
            cin = cout;
        }
        let final_head = Linear::new(cin, NUM_CLASSES, 1.0, rng);
        Ok(Backbone {
            spec: spec.clone(),
            stages,
            final_head,
        })
    }

    pub fn param_count(&self) -> usize {
        self.stages.iter().map(ConvStage::param_count).sum::<usize>() + self.final_head.param_count()
    }

    fn check_input(&self, img: &Image) -> Result<()> {
        let s = self.spec.input_size;
        if img.width() != s || img.height() != s {
            return Err(Error::invalid(format!(
                "input is {}x{}, model expects {s}x{s}",
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }

    /// Run all stages; returns per-stage caches and spatial sizes.
    fn run_stages(&self, img: &Image) -> Result<(Vec<ConvCache>, Vec<usize>)> {
        self.check_input(img)?;
        let mut x = image_to_chw(img);
        let (mut h, mut w) = (img.height(), img.width());
        let mut caches = Vec::with_capacity(self.stages.len());
        let mut spatial = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let cache = stage.forward(&x, h, w);
            h = conv_out_dim(h);
            w = conv_out_dim(w);
            x = cache.output().to_vec();
            spatial.push(h * w);
            caches.push(cache);
        }
        Ok((caches, spatial))
    }

    fn final_logits(&self, pooled_last: &[f64]) -> [f64; 2] {
        let l = self.final_head.forward(pooled_last);
        [l[0], l[1]]
    }

    /// Baseline logits `c_f(kappa_K(...kappa_1(x)))`.
    pub fn logits(&self, img: &Image) -> Result<[f64; 2]> {
        let (caches, _) = self.run_stages(img)?;
        let last = caches.last().expect("at least two stages");
        let pooled = global_avg_pool(last.output(), self.spec.channels[self.spec.levels - 1]);
        Ok(self.final_logits(&pooled))
    }

    fn params(&self) -> Vec<&Param> {
        let mut v = Vec::new();
        for s in &self.stages {
            v.push(&s.weight);
            v.push(&s.bias);
        }
        v.push(&self.final_head.weight);
        v.push(&self.final_head.bias);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = Vec::new();
        for s in &mut self.stages {
            v.push(&mut s.weight);
            v.push(&mut s.bias);
        }
        v.push(&mut self.final_head.weight);
        v.push(&mut self.final_head.bias);
        v
    }
}

/// Full training-time model.
#[derive(Debug, Clone, PartialEq)]
pub struct GrlNet {
    pub backbone: Backbone,
    /// Alignment modules `gamma_1..gamma_K`: pooled channels to `aligned_dim`.
    pub align: Vec<Linear>,
    /// Auxiliary classifiers `c_1..c_{K-1}`.
    pub aux_heads: Vec<Linear>,
    /// Point-wise fusion over the concatenated aligned features.
    pub pwconv: Linear,
    pub cat_head: Linear,
}

impl GrlNet {
    pub fn new(spec: &BackboneSpec, seed: u64) -> Result<Self> {
        let mut rng = seed::rng(seed::derive_tag(seed, "grlnet"));
        let backbone = Backbone::new(spec, &mut rng)?;
        let d = spec.aligned_dim;
        let align = spec
            .channels
            .iter()
            .map(|&c| Linear::new(c, d, 1.0, &mut rng))
            .collect();
        let aux_heads = (0..spec.levels - 1)
            .map(|_| Linear::new(d, NUM_CLASSES, 1.0, &mut rng))
            .collect();
        let pwconv = Linear::new(spec.levels * d, d, 1.0, &mut rng);
        let cat_head = Linear::new(d, NUM_CLASSES, 1.0, &mut rng);
        Ok(GrlNet {
            backbone,
            align,
            aux_heads,
            pwconv,
            cat_head,
        })
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.backbone.spec
    }

    pub fn forward(&self, img: &Image) -> Result<LevelOutputs> {
        Ok(self.forward_cached(img)?.0)
    }

    /// Forward a batch; every row is computed independently.
    pub fn forward_batch(&self, imgs: &[Image]) -> Result<Vec<LevelOutputs>> {
        imgs.iter().map(|i| self.forward(i)).collect()
    }

    pub fn forward_cached(&self, img: &Image) -> Result<(LevelOutputs, ForwardCache)> {
        let spec = &self.backbone.spec;
        let (stages, spatial) = self.backbone.run_stages(img)?;
        let pooled: Vec<Vec<f64>> = stages
            .iter()
            .zip(&spec.channels)
            .map(|(c, &ch)| global_avg_pool(c.output(), ch))
            .collect();
        let aligned: Vec<Vec<f64>> = self
            .align
            .iter()
            .zip(&pooled)
            .map(|(g, p)| g.forward(p))
            .collect();
        let logits_aux = self
            .aux_heads
            .iter()
            .zip(&aligned)
            .map(|(h, f)| {
                let l = h.forward(f);
                [l[0], l[1]]
            })
            .collect();
        let logits_final = self.backbone.final_logits(pooled.last().expect("levels >= 2"));
        let concat: Vec<f64> = aligned.iter().flatten().copied().collect();
        let feature_cat = self.pwconv.forward(&concat);
        let lc = self.cat_head.forward(&feature_cat);
        let outputs = LevelOutputs {
            features: aligned[..spec.levels - 1].to_vec(),
            feature_cat: feature_cat.clone(),
            logits_aux,
            logits_final,
            logits_cat: [lc[0], lc[1]],
        };
        let cache = ForwardCache {
            stages,
            spatial,
            pooled,
            aligned,
            concat,
            feature_cat,
        };
        Ok((outputs, cache))
    }

    /// Accumulate parameter gradients for upstream output gradients.
    pub fn backward(&mut self, cache: &ForwardCache, grads: &OutputGrads) {
        let k = self.backbone.spec.levels;
        let d = self.backbone.spec.aligned_dim;

        // concatenated head and fusion
        let mut d_feat_cat = self.cat_head.backward(&cache.feature_cat, &grads.heads[k]);
        for (a, b) in d_feat_cat.iter_mut().zip(&grads.embeddings[k - 1]) {
            *a += b;
        }
        let d_concat = self.pwconv.backward(&cache.concat, &d_feat_cat);

        // aligned features: fusion share + auxiliary heads + direct embedding grads
        let mut d_pooled: Vec<Vec<f64>> = Vec::with_capacity(k);
        for i in 0..k {
            let mut d_f = d_concat[i * d..(i + 1) * d].to_vec();
            if i < k - 1 {
                let g = self.aux_heads[i].backward(&cache.aligned[i], &grads.heads[i]);
                for ((a, b), c) in d_f.iter_mut().zip(&g).zip(&grads.embeddings[i]) {
                    *a += b + c;
                }
            }
            d_pooled.push(self.align[i].backward(&cache.pooled[i], &d_f));
        }
        let d_last = self
            .backbone
            .final_head
            .backward(&cache.pooled[k - 1], &grads.heads[k - 1]);
        for (a, b) in d_pooled[k - 1].iter_mut().zip(&d_last) {
            *a += b;
        }

        // backbone, deepest first
        let mut carry: Option<Vec<f64>> = None;
        for i in (0..k).rev() {
            let mut d_out = global_avg_pool_backward(&d_pooled[i], cache.spatial[i]);
            if let Some(c) = carry.take() {
                for (a, b) in d_out.iter_mut().zip(&c) {
                    *a += b;
                }
            }
            let d_in = self.backbone.stages[i].backward(&cache.stages[i], &d_out);
            if i > 0 {
                carry = Some(d_in);
            }
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = self.backbone.params();
        for l in self.align.iter().chain(&self.aux_heads) {
            v.push(&l.weight);
            v.push(&l.bias);
        }
        for l in [&self.pwconv, &self.cat_head] {
            v.push(&l.weight);
            v.push(&l.bias);
        }
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.backbone.params_mut();
        for l in self.align.iter_mut().chain(self.aux_heads.iter_mut()) {
            v.push(&mut l.weight);
            v.push(&mut l.bias);
        }
        for l in [&mut self.pwconv, &mut self.cat_head] {
            v.push(&mut l.weight);
            v.push(&mut l.bias);
        }
        v
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    /// Drop alignment modules, auxiliary heads, and the fused head.
    pub fn strip_inference(&self) -> InferenceModel {
        InferenceModel {
            backbone: self.backbone.clone(),
        }
    }
}

/// Deployment model: backbone and baseline head only.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceModel {
    backbone: Backbone,
}

impl InferenceModel {
    pub fn spec(&self) -> &BackboneSpec {
        &self.backbone.spec
    }

    pub fn logits(&self, img: &Image) -> Result<[f64; 2]> {
        self.backbone.logits(img)
    }

    pub fn param_count(&self) -> usize {
        self.backbone.param_count()
    }

    /// Discriminators do not survive stripping.
    pub fn discriminate(&self, _features: &[Vec<f64>]) -> Result<Vec<f64>> {
        Err(Error::Unsupported(
            "inference model carries no discriminator bank".into(),
        ))
    }
}

/// Parameter count of a plain baseline (backbone plus `c_f`) for `spec`.
pub fn baseline_param_count(spec: &BackboneSpec) -> Result<usize> {
    let mut rng = seed::rng(0);
    Ok(Backbone::new(spec, &mut rng)?.param_count())
}
