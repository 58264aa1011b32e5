//! Landmark-based morphing and the self-morphing augmentation.
//!
//! A morph interpolates two landmark sets, warps both images onto the
//! interpolated geometry over its Delaunay mesh, and blends the pixels.
//! Self-morphing applies the same engine to two instances of one identity,
//! the first of which is perturbed by the transform bank beforehand.

mod delaunay;
mod transforms;
mod warp;

pub use delaunay::{convex_hull_area, delaunay, incircle, triangulate, TriangleMesh};
pub use transforms::{pre_augment, random_transform_bank, TransformKind, TransformOp};
pub use warp::{warp_blend, warp_to};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{FaceSample, Label};

pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MorphMethod {
    #[serde(rename = "lm")]
    Landmark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphSpec {
    pub alpha: f64,
    pub method: MorphMethod,
    pub pre_augment_ops: Vec<TransformOp>,
    pub seed: u64,
}

impl MorphSpec {
    /// Landmark morph with no pre-augmentation.
    pub fn plain(alpha: f64, seed: u64) -> Self {
        MorphSpec {
            alpha,
            method: MorphMethod::Landmark,
            pre_augment_ops: vec![],
            seed,
        }
    }

    fn check_alpha(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("morph alpha {} outside (0, 1)", self.alpha)))
        }
    }
}

impl Default for MorphSpec {
    fn default() -> Self {
        MorphSpec::plain(DEFAULT_ALPHA, 0)
    }
}

fn require_bonafide(s: &FaceSample) -> Result<()> {
    if s.label != Label::Bonafide {
        return Err(Error::invalid(format!("{} is not a bona fide sample", s.id)));
    }
    Ok(())
}

/// `x_ij = Psi(augment(x_i), x_j)` for two instances of the same identity.
pub fn self_morph(inst_i: &FaceSample, inst_j: &FaceSample, spec: &MorphSpec) -> Result<FaceSample> {
    spec.check_alpha()?;
    require_bonafide(inst_i)?;
    require_bonafide(inst_j)?;
    if inst_i.identity_ids != inst_j.identity_ids {
        return Err(Error::invalid(format!(
            "self-morph needs one identity, got {:?} and {:?}",
            inst_i.identity_ids, inst_j.identity_ids
        )));
    }
    let (augmented, aug_lm) = if spec.pre_augment_ops.is_empty() {
        (inst_i.image.clone(), inst_i.landmarks.clone())
    } else {
        let (img, lm) =
            pre_augment(&inst_i.image, Some(&inst_i.landmarks), &spec.pre_augment_ops, spec.seed)?;
        (img, lm.expect("landmarks were supplied"))
    };
    let (image, landmarks) =
        warp_blend(&augmented, &aug_lm, &inst_j.image, &inst_j.landmarks, spec.alpha)?;
    let id = inst_i.identity_ids[0];
    Ok(FaceSample {
        id: format!("sm-{}-{}", inst_i.id, inst_j.id),
        image,
        landmarks,
        label: Label::Morph,
        identity_ids: vec![id, id],
        domain: inst_i.domain.clone(),
        attack: "self-morph".to_string(),
        split: inst_i.split,
    })
}

/// Standard two-identity landmark morph.
pub fn cross_morph(a: &FaceSample, b: &FaceSample, spec: &MorphSpec) -> Result<FaceSample> {
    spec.check_alpha()?;
    require_bonafide(a)?;
    require_bonafide(b)?;
    if a.identity_ids == b.identity_ids {
        return Err(Error::invalid(format!(
            "cross morph needs two identities, both are {:?}",
            a.identity_ids
        )));
    }
    let (image, landmarks) =
        warp_blend(&a.image, &a.landmarks, &b.image, &b.landmarks, spec.alpha)?;
    Ok(FaceSample {
        id: format!("lm-{}-{}", a.id, b.id),
        image,
        landmarks,
        label: Label::Morph,
        identity_ids: vec![a.identity_ids[0], b.identity_ids[0]],
        domain: a.domain.clone(),
        attack: "lm".to_string(),
        split: a.split,
    })
}

/// Self-morphs of consecutive instance pairs `(i, i + 1 mod M)` of every
/// identity among the bona fide samples, each with a seeded pre-augmentation
/// bank. Instances are ordered by id; ids are `sm-{identity:04}-{i:02}-{j:02}`.
pub fn self_morph_set(bona: &[FaceSample], alpha: f64, seed: u64) -> Result<Vec<FaceSample>> {
    let mut groups: BTreeMap<u64, Vec<&FaceSample>> = BTreeMap::new();
    for s in bona {
        if s.label == Label::Bonafide && s.identity_ids.len() == 1 {
            groups.entry(s.identity_ids[0]).or_default().push(s);
        }
    }
    let base = crate::seed::derive_tag(seed, "sm");
    let mut out = Vec::new();
    for (id, mut inst) in groups {
        if inst.len() < 2 {
            continue;
        }
        inst.sort_by(|a, b| a.id.cmp(&b.id));
        let m = inst.len();
        for i in 0..m {
            let j = (i + 1) % m;
            let s = crate::seed::derive(base, id * 1000 + i as u64);
            let spec = MorphSpec {
                alpha,
                method: MorphMethod::Landmark,
                pre_augment_ops: random_transform_bank(s),
                seed: s,
            };
            let mut x = self_morph(inst[i], inst[j], &spec)?;
            x.id = format!("sm-{id:04}-{i:02}-{j:02}");
            out.push(x);
        }
    }
    Ok(out)
}
