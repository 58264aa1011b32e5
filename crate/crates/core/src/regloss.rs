//! Losses and their analytic gradients.
//!
//! - classification: tempered cross-entropy summed over all `N + 1` heads
//! - prediction consistency: `KL(source || target)` of tempered head outputs,
//!   with the source distribution treated as a constant
//! - embedding consistency: JSD between softmax-normalized embeddings plus
//!   `eta * [log D(F_s) + log(1 - D(F_t))]`; the gradient of this term with
//!   respect to the embeddings is the sign-inverted gradient of the
//!   discriminators' own cross-entropy, which trains the bank separately
//! - total: `L_cls + mu * L_label + delta * L_emb`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grlnet::{BackboneSpec, DiscriminatorBank, LevelOutputs, OutputGrads};
use crate::sample::Label;

/// Floor applied to the second argument inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub tau: f64,
    pub eta: f64,
    pub mu: f64,
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            tau: 0.1,
            eta: 0.1,
            mu: 0.05,
            delta: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("temperature {} must be positive", self.tau)));
        }
        for (name, v) in [("eta", self.eta), ("mu", self.mu), ("delta", self.delta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} = {v} must be non-negative")));
            }
        }
        Ok(())
    }
}

fn log_softmax_scaled(logits: &[f64], scale: f64) -> Vec<f64> {
    let max = logits.iter().map(|z| z * scale).fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|z| (z * scale - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|z| z * scale - lse).collect()
}

/// `softmax(logits / tau)`, evaluated with max subtraction.
pub fn tempered_softmax(logits: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("temperature {tau} must be positive")));
    }
    let mut p: Vec<f64> = log_softmax_scaled(logits, 1.0 / tau).into_iter().map(f64::exp).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    Ok(p)
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "distribution lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// `sum p log(p / q)` with `0 log 0 = 0` and `q` floored at [`LOG_FLOOR`].
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi.ln() - qi.max(LOG_FLOOR).ln()))
        .sum())
}

/// Jensen-Shannon divergence, natural log.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(0.5 * kl_divergence(p, &m)? + 0.5 * kl_divergence(q, &m)?)
}

/// Tempered cross-entropy for one head and its gradient w.r.t. the logits.
pub fn ce_tempered(logits: [f64; 2], label: usize, tau: f64) -> (f64, [f64; 2]) {
    let logp = log_softmax_scaled(&logits, 1.0 / tau);
    let loss = -logp[label];
    let mut g = [logp[0].exp() / tau, logp[1].exp() / tau];
    g[label] -= 1.0 / tau;
    (loss, g)
}

/// Classification loss of one sample, summed over all heads.
pub fn loss_cls(outputs: &LevelOutputs, label: Label, w: &LossWeights, spec: &BackboneSpec) -> (f64, OutputGrads) {
    let mut grads = OutputGrads::zeros(spec);
    let mut total = 0.0;
    for (k, head) in outputs.heads().into_iter().enumerate() {
        let (l, g) = ce_tempered(head, label.index(), w.tau);
        total += l;
        grads.heads[k] = g;
    }
    (total, grads)
}

/// Batch mean of [`loss_cls`]; gradients already carry the `1/B` factor.
pub fn loss_cls_batch(
    outputs: &[LevelOutputs],
    labels: &[Label],
    w: &LossWeights,
    spec: &BackboneSpec,
) -> Result<(f64, Vec<OutputGrads>)> {
    if outputs.len() != labels.len() {
        return Err(Error::invalid("outputs and labels differ in length"));
    }
    if outputs.is_empty() {
        return Ok((0.0, vec![]));
    }
    let scale = 1.0 / outputs.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(outputs.len());
    for (o, l) in outputs.iter().zip(labels) {
        let (v, g) = loss_cls(o, *l, w, spec);
        total += v;
        let mut scaled = OutputGrads::zeros(spec);
        scaled.add_scaled(&g, scale);
        grads.push(scaled);
    }
    Ok((total * scale, grads))
}

/// `sum_i KL(sigma(a_i(x_s); tau) || sigma(a_i(x_t); tau))` for one pair.
/// Only the target receives a gradient.
pub fn loss_label(
    source: &LevelOutputs,
    target: &LevelOutputs,
    w: &LossWeights,
    spec: &BackboneSpec,
) -> Result<(f64, OutputGrads)> {
    let (hs, ht) = (source.heads(), target.heads());
    if hs.len() != ht.len() || hs.len() != spec.n() + 1 {
        return Err(Error::invalid("paired outputs have different head counts"));
    }
    let mut grads = OutputGrads::zeros(spec);
    let mut total = 0.0;
    for (k, (zs, zt)) in hs.iter().zip(&ht).enumerate() {
        let lp = log_softmax_scaled(zs, 1.0 / w.tau);
        let lq = log_softmax_scaled(zt, 1.0 / w.tau);
        for c in 0..2 {
            let p = lp[c].exp();
            if p > 0.0 {
                total += p * (lp[c] - lq[c]);
            }
            grads.heads[k][c] = (lq[c].exp() - p) / w.tau;
        }
    }
    Ok((total, grads))
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// JSD between `softmax(a)` and `softmax(b)` and its gradients w.r.t. `a` and `b`.
pub fn js_softmax_with_grad(a: &[f64], b: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let p = softmax(a);
    let q = softmax(b);
    let mut js = 0.0;
    let mut gp = vec![0.0; p.len()];
    let mut gq = vec![0.0; q.len()];
    for k in 0..p.len() {
        let m = 0.5 * (p[k] + q[k]);
        if p[k] > 0.0 {
            let r = (p[k] / m).ln();
            js += 0.5 * p[k] * r;
            gp[k] = 0.5 * r;
        }
        if q[k] > 0.0 {
            let r = (q[k] / m).ln();
            js += 0.5 * q[k] * r;
            gq[k] = 0.5 * r;
        }
    }
    let chain = |prob: &[f64], g: &[f64]| -> Vec<f64> {
        let dot: f64 = prob.iter().zip(g).map(|(a, b)| a * b).sum();
        prob.iter().zip(g).map(|(pk, gk)| pk * (gk - dot)).collect()
    };
    (js, chain(&p, &gp), chain(&q, &gq))
}

/// Embedding-level terms for one source/target pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbLoss {
    /// `jsd + adversarial`: the part that enters the extractor objective.
    pub feature_loss: f64,
    pub jsd: f64,
    /// `eta * sum_i [log D_i(F_s) + log(1 - D_i(F_t))]`.
    pub adversarial: f64,
    /// Discriminator cross-entropy (source labelled 1, target 0).
    pub disc_loss: f64,
    pub d_source: Vec<Vec<f64>>,
    pub d_target: Vec<Vec<f64>>,
}

/// Embedding consistency over the embedding levels listed in `active`
/// (indices into [`LevelOutputs::embeddings`]). Gradients are those of
/// `feature_loss` w.r.t. the embeddings; inactive levels get zeros.
pub fn loss_emb(
    feats_s: &[&[f64]],
    feats_t: &[&[f64]],
    bank: &DiscriminatorBank,
    w: &LossWeights,
    active: &[usize],
) -> Result<EmbLoss> {
    if feats_s.len() != feats_t.len() {
        return Err(Error::invalid("source and target embedding counts differ"));
    }
    let ds = bank.forward(feats_s)?;
    let dt = bank.forward(feats_t)?;
    let mut out = EmbLoss {
        feature_loss: 0.0,
        jsd: 0.0,
        adversarial: 0.0,
        disc_loss: 0.0,
        d_source: feats_s.iter().map(|f| vec![0.0; f.len()]).collect(),
        d_target: feats_t.iter().map(|f| vec![0.0; f.len()]).collect(),
    };
    for &i in active {
        if i >= feats_s.len() {
            return Err(Error::invalid(format!("embedding level {i} out of range")));
        }
        let (js, gs, gt) = js_softmax_with_grad(feats_s[i], feats_t[i]);
        out.jsd += js;
        let (ps, pt) = (ds[i].prob(), dt[i].prob());
        out.adversarial += w.eta * (ps.ln() + (1.0 - pt).ln());
        out.disc_loss += -(ps.ln() + (1.0 - pt).ln());
        let adv_s = bank.discs[i].backward_input(&ds[i], w.eta / ps);
        let adv_t = bank.discs[i].backward_input(&dt[i], -w.eta / (1.0 - pt));
        for (k, g) in out.d_source[i].iter_mut().enumerate() {
            *g = gs[k] + adv_s[k];
        }
        for (k, g) in out.d_target[i].iter_mut().enumerate() {
            *g = gt[k] + adv_t[k];
        }
    }
    out.feature_loss = out.jsd + out.adversarial;
    Ok(out)
}

/// Accumulate the discriminator cross-entropy gradient (times `scale`) into
/// the bank. Embeddings are treated as constants.
pub fn disc_backward(
    bank: &mut DiscriminatorBank,
    feats_s: &[&[f64]],
    feats_t: &[&[f64]],
    active: &[usize],
    scale: f64,
) -> Result<()> {
    let ds = bank.forward(feats_s)?;
    let dt = bank.forward(feats_t)?;
    for &i in active {
        let (ps, pt) = (ds[i].prob(), dt[i].prob());
        bank.discs[i].backward_params(&ds[i], -scale / ps);
        bank.discs[i].backward_params(&dt[i], scale / (1.0 - pt));
    }
    Ok(())
}

/// `L_cls + mu * L_label + delta * L_emb`; non-finite components are reported by name.
pub fn loss_total(cls: f64, label: f64, emb: f64, w: &LossWeights) -> Result<f64> {
    for (name, v) in [("l_cls", cls), ("l_label", label), ("l_emb", emb)] {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("{name} is not finite ({v})")));
        }
    }
    Ok(cls + w.mu * label + w.delta * emb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec2() -> BackboneSpec {
        BackboneSpec {
            levels: 2,
            channels: vec![2, 2],
            aligned_dim: 3,
            num_classes: 2,
            input_size: 8,
        }
    }

    fn outputs(heads: &[[f64; 2]]) -> LevelOutputs {
        let n = heads.len() - 1;
        LevelOutputs {
            features: vec![vec![0.0; 3]; n - 1],
            feature_cat: vec![0.0; 3],
            logits_aux: heads[..n - 1].to_vec(),
            logits_final: heads[n - 1],
            logits_cat: heads[n],
        }
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(tempered_softmax(&[0.0, 0.0], 0.3).unwrap(), vec![0.5, 0.5]);
        let p = tempered_softmax(&[3.0, 1.0], 1e6).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-5);
        let p = tempered_softmax(&[1.0, 0.0], 1.0).unwrap();
        assert!((p[0] - 0.73106).abs() < 1e-5 && (p[1] - 0.26894).abs() < 1e-5);
        assert!(tempered_softmax(&[1.0], 0.0).is_err());
        assert!(tempered_softmax(&[1.0], -1.0).is_err());
    }

    #[test]
    fn divergence_examples() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert_eq!(js_divergence(&p, &p).unwrap(), 0.0);
        let ln2 = std::f64::consts::LN_2;
        assert!((js_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - ln2).abs() < 1e-12);
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - ln2).abs() < 1e-12);
        assert!(kl_divergence(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn cls_saturated_and_uniform() {
        let spec = spec2();
        let w = LossWeights::default();
        let strong = outputs(&[[100.0, 0.0]; 3]);
        assert!(loss_cls(&strong, Label::Bonafide, &w, &spec).0 <= 1e-6);
        let flat = outputs(&[[0.0, 0.0]; 3]);
        let l = loss_cls(&flat, Label::Morph, &w, &spec).0;
        assert!((l - 3.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn cls_single_head_matches_hand_computation() {
        let (l, _) = ce_tempered([0.3, -0.2], 1, 0.5);
        let (a, b) = (0.3 / 0.5, -0.2 / 0.5);
        let expected = -(f64::exp(b) / (f64::exp(a) + f64::exp(b))).ln();
        assert!((l - expected).abs() < 1e-9);
    }

    #[test]
    fn label_consistency_examples() {
        let spec = spec2();
        let mut w = LossWeights::default();
        let s = outputs(&[[0.4, -0.1], [1.0, 0.0], [2.0, 3.0]]);
        assert_eq!(loss_label(&s, &s, &w, &spec).unwrap().0, 0.0);
        w.tau = 1.0;
        let mut t = s.clone();
        t.logits_final = [0.0, 1.0];
        let l = loss_label(&s, &t, &w, &spec).unwrap().0;
        let p = tempered_softmax(&[1.0, 0.0], 1.0).unwrap();
        let q = tempered_softmax(&[0.0, 1.0], 1.0).unwrap();
        assert!((l - kl_divergence(&p, &q).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn emb_neutral_bank() {
        let bank = DiscriminatorBank::new(2, 3, 1);
        let w = LossWeights::default();
        let f = [vec![0.1, -0.2, 0.3], vec![1.0, 0.0, -1.0]];
        let fs: Vec<&[f64]> = f.iter().map(Vec::as_slice).collect();
        let e = loss_emb(&fs, &fs, &bank, &w, &[0, 1]).unwrap();
        assert_eq!(e.jsd, 0.0);
        let per_level = 2.0 * w.eta * 0.5f64.ln();
        assert!((e.adversarial - 2.0 * per_level).abs() < 1e-12);
    }

    #[test]
    fn total_examples() {
        let w = LossWeights::default();
        assert_eq!(loss_total(1.0, 1.0, 1.0, &LossWeights { mu: 0.0, delta: 0.0, ..w }).unwrap(), 1.0);
        assert!((loss_total(1.0, 1.0, 1.0, &w).unwrap() - 1.15).abs() < 1e-12);
        let base = loss_total(1.0, 0.0, 0.0, &w).unwrap();
        let one = loss_total(1.0, 0.5, 0.0, &w).unwrap() - base;
        let two = loss_total(1.0, 1.0, 0.0, &w).unwrap() - base;
        assert!((two - 2.0 * one).abs() < 1e-12);
        assert!(matches!(loss_total(f64::NAN, 0.0, 0.0, &w), Err(Error::Numeric(m)) if m.contains("l_cls")));
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let spec = spec2();
        let w = LossWeights::default();
        let s = outputs(&[[1e4, -1e4]; 3]);
        let t = outputs(&[[-1e4, 1e4]; 3]);
        let (c, _) = loss_cls(&s, Label::Morph, &w, &spec);
        let (l, g) = loss_label(&s, &t, &w, &spec).unwrap();
        assert!(c.is_finite() && l.is_finite());
        assert!(g.heads.iter().flatten().all(|v| v.is_finite()));
    }
}
