//! Procedural face-like images with closed-form landmarks.
//!
//! An identity is 16 shape/color parameters in `[-1, 1]`; nuisance factors
//! (pose offset, illumination gradient, background texture, sensor noise) are
//! drawn separately so several instances of one identity differ only in
//! acquisition conditions.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::manifest::{Corpus, CorpusWriter};
use crate::morphkit::{self, MorphSpec};
use crate::sample::{FaceSample, Label, LandmarkSet, Split};
use crate::seed;

pub const SHAPE_DIM: usize = 16;
pub const MIN_SIZE: usize = 32;

/// Attack tags `build_corpus` knows how to synthesize.
pub const KNOWN_ATTACKS: [&str; 2] = ["lm", "self-morph"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityParams {
    pub id: u64,
    pub shape: [f64; SHAPE_DIM],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceParams {
    pub pose_shift: [f64; 2],
    /// Direction of the illumination gradient, radians.
    pub illumination_angle: f64,
    /// Gradient strength in `[0, 0.3]`.
    pub illumination_strength: f64,
    pub background_texture_seed: u64,
    /// Additive Gaussian noise level in `[0, 0.05]`.
    pub sensor_noise_sigma: f64,
}

impl NuisanceParams {
    /// Centered pose, flat lighting, no noise.
    pub fn neutral(background_texture_seed: u64) -> Self {
        NuisanceParams {
            pose_shift: [0.0, 0.0],
            illumination_angle: 0.0,
            illumination_strength: 0.0,
            background_texture_seed,
            sensor_noise_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.3).contains(&self.illumination_strength) {
            return Err(Error::invalid("illumination strength outside [0, 0.3]"));
        }
        if !(0.0..=0.05).contains(&self.sensor_noise_sigma) {
            return Err(Error::invalid("sensor noise sigma outside [0, 0.05]"));
        }
        Ok(())
    }
}

/// Ranges nuisance factors are drawn from; one per acquisition domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceDistribution {
    /// Maximum absolute pose offset in pixels at size 64 (scaled with size).
    pub pose_max: f64,
    pub strength: (f64, f64),
    pub sigma: (f64, f64),
}

impl NuisanceDistribution {
    pub fn source() -> Self {
        NuisanceDistribution {
            pose_max: 2.0,
            strength: (0.0, 0.12),
            sigma: (0.004, 0.015),
        }
    }

    /// Harsher lighting and noisier sensors; used for style pools.
    pub fn shifted() -> Self {
        NuisanceDistribution {
            pose_max: 3.0,
            strength: (0.15, 0.3),
            sigma: (0.02, 0.045),
        }
    }

    pub fn sample(&self, seed: u64, size: usize) -> NuisanceParams {
        let mut rng = seed::rng(seed);
        let scale = size as f64 / 64.0;
        let pm = self.pose_max * scale;
        NuisanceParams {
            pose_shift: [rng.gen_range(-pm..=pm), rng.gen_range(-pm..=pm)],
            illumination_angle: rng.gen_range(0.0..std::f64::consts::TAU),
            illumination_strength: rng.gen_range(self.strength.0..=self.strength.1),
            background_texture_seed: rng.gen(),
            sensor_noise_sigma: rng.gen_range(self.sigma.0..=self.sigma.1),
        }
    }
}

impl Default for NuisanceDistribution {
    fn default() -> Self {
        Self::source()
    }
}

/// Deterministic identity draw; the returned id equals the seed.
pub fn sample_identity(seed: u64) -> IdentityParams {
    let mut rng = seed::rng(seed::derive_tag(seed, "identity"));
    let shape = std::array::from_fn(|_| rng.gen_range(-1.0..=1.0));
    IdentityParams { id: seed, shape }
}

/// Closed-form face geometry in pixel units.
#[derive(Debug, Clone)]
struct Geometry {
    cx: f64,
    cy: f64,
    ax: f64,
    ay: f64,
    jaw: f64,
    eye_half_spacing: f64,
    eye_w: f64,
    eye_h: f64,
    eye_y: f64,
    nose_tip_y: f64,
    nose_w: f64,
    mouth_w: f64,
    mouth_curve: f64,
    mouth_y: f64,
    lip: f64,
}

impl Geometry {
    fn new(p: &[f64; SHAPE_DIM], pose: [f64; 2], size: usize) -> Self {
        let s = size as f64;
        let cx = (s - 1.0) / 2.0 + pose[0];
        let cy = (s - 1.0) / 2.0 + pose[1];
        let eye_w = s * (0.055 + 0.015 * p[3]);
        let eye_y = cy - s * (0.08 + 0.03 * p[4]);
        Geometry {
            cx,
            cy,
            ax: s * (0.30 + 0.04 * p[0]),
            ay: s * (0.38 + 0.04 * p[1]),
            jaw: 0.12 + 0.06 * p[11],
            eye_half_spacing: s * (0.15 + 0.04 * p[2]),
            eye_w,
            eye_h: 0.5 * eye_w,
            eye_y,
            nose_tip_y: eye_y + s * (0.14 + 0.04 * p[5]),
            nose_w: s * (0.05 + 0.015 * p[6]),
            mouth_w: s * (0.10 + 0.03 * p[7]),
            mouth_curve: s * 0.025 * p[8],
            mouth_y: cy + s * (0.18 + 0.03 * p[9]),
            lip: s * 0.018,
        }
    }

    fn landmarks(&self, size: usize) -> LandmarkSet {
        let mut pts = Vec::with_capacity(crate::sample::TOTAL_LANDMARKS);
        for k in 0..8 {
            let theta = k as f64 * std::f64::consts::FRAC_PI_4;
            let (sin, cos) = theta.sin_cos();
            let narrowing = if cos < 0.0 { 1.0 - self.jaw * (-cos) } else { 1.0 };
            pts.push([self.cx + self.ax * sin * narrowing, self.cy - self.ay * cos]);
        }
        for side in [-1.0, 1.0] {
            let ex = self.cx + side * self.eye_half_spacing;
            pts.push([ex - self.eye_w, self.eye_y]);
            pts.push([ex, self.eye_y]);
            pts.push([ex + self.eye_w, self.eye_y]);
        }
        let nostril_y = self.nose_tip_y - 0.3 * self.nose_w;
        pts.push([self.cx - self.nose_w, nostril_y]);
        pts.push([self.cx, self.nose_tip_y]);
        pts.push([self.cx + self.nose_w, nostril_y]);
        let mid = self.mouth_y + self.mouth_curve;
        pts.push([self.cx - self.mouth_w, self.mouth_y]);
        pts.push([self.cx, mid - self.lip]);
        pts.push([self.cx + self.mouth_w, self.mouth_y]);
        pts.push([self.cx, mid + self.lip]);

        let max = (size - 1) as f64;
        for p in &mut pts {
            p[0] = p[0].clamp(0.0, max);
            p[1] = p[1].clamp(0.0, max);
        }
        LandmarkSet::with_corners(pts, size, size)
    }
}

/// Closed-form landmark map, corners included.
pub fn landmarks_for(params: &IdentityParams, pose_shift: [f64; 2], size: usize) -> LandmarkSet {
    Geometry::new(&params.shape, pose_shift, size).landmarks(size)
}

#[inline]
fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Coverage of a shape whose signed distance (pixels, negative inside) is `d`.
#[inline]
fn coverage(d: f64) -> f64 {
    1.0 - smoothstep(-0.5, 0.5, d)
}

fn lattice_value(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = seed::derive(seed, ((ix as u64) << 32) ^ (iy as u64 & 0xffff_ffff));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Two-octave value noise in `[0, 1]`.
fn value_noise(seed: u64, x: f64, y: f64, cell: f64) -> f64 {
    let mut total = 0.0;
    let mut amp = 0.65;
    let mut c = cell;
    for octave in 0..2u64 {
        let s = seed::derive(seed, octave);
        let (gx, gy) = (x / c, y / c);
        let (ix, iy) = (gx.floor() as i64, gy.floor() as i64);
        let (fx, fy) = (gx - ix as f64, gy - iy as f64);
        let (sx, sy) = (fx * fx * (3.0 - 2.0 * fx), fy * fy * (3.0 - 2.0 * fy));
        let v00 = lattice_value(s, ix, iy);
        let v10 = lattice_value(s, ix + 1, iy);
        let v01 = lattice_value(s, ix, iy + 1);
        let v11 = lattice_value(s, ix + 1, iy + 1);
        let top = v00 + (v10 - v00) * sx;
        let bottom = v01 + (v11 - v01) * sx;
        total += amp * (top + (bottom - top) * sy);
        amp = 0.35;
        c *= 0.5;
    }
    total
}

fn blend(dst: &mut [f64; 3], color: [f64; 3], a: f64) {
    for c in 0..3 {
        dst[c] = dst[c] * (1.0 - a) + color[c] * a;
    }
}

/// Render one bona fide instance of `params` under `nuisance`.
pub fn render_face(
    params: &IdentityParams,
    nuisance: &NuisanceParams,
    size: usize,
) -> Result<FaceSample> {
    if size < MIN_SIZE {
        return Err(Error::invalid(format!("image size {size} below minimum {MIN_SIZE}")));
    }
    nuisance.validate()?;
    if params.shape.iter().any(|v| !(-1.0..=1.0).contains(v)) {
        return Err(Error::invalid("identity shape component outside [-1, 1]"));
    }
    let p = &params.shape;
    let g = Geometry::new(p, nuisance.pose_shift, size);
    let s = size as f64;

    let bg_seed = nuisance.background_texture_seed;
    let mut tint_rng = seed::rng(seed::derive_tag(bg_seed, "tint"));
    let bg_base: [f64; 3] = {
        let gray = tint_rng.gen_range(0.35..0.6);
        std::array::from_fn(|_| gray + tint_rng.gen_range(-0.06..0.06))
    };
    let skin = [
        0.78 + 0.12 * p[12],
        0.60 + 0.12 * p[13],
        0.50 + 0.12 * p[14],
    ];
    let hair_v = 0.18 + 0.1 * p[15];
    let hair = [hair_v * 1.1, hair_v * 0.9, hair_v * 0.8];
    let pupil_v = 0.12 + 0.08 * p[10];
    let pupil = [pupil_v, pupil_v * 0.9, pupil_v * 0.8];
    let lips = [0.62 + 0.1 * p[13], 0.28, 0.30];
    let brow = [hair_v * 0.9, hair_v * 0.8, hair_v * 0.7];
    let nose_shadow = [skin[0] * 0.72, skin[1] * 0.68, skin[2] * 0.68];
    let cell = s / 8.0;
    let (ill_sin, ill_cos) = nuisance.illumination_angle.sin_cos();

    let mut img = Image::new(size, size);
    for y in 0..size {
        let fy = y as f64;
        for x in 0..size {
            let fx = x as f64;
            let tex = value_noise(bg_seed, fx, fy, cell) - 0.5;
            let mut px = bg_base.map(|b| b + 0.16 * tex);

            // head with narrowing jaw
            let dy = (fy - g.cy) / g.ay;
            let narrowing = if dy > 0.0 { (1.0 - g.jaw * dy.min(1.0)).max(0.5) } else { 1.0 };
            let dx = (fx - g.cx) / (g.ax * narrowing);
            let r = (dx * dx + dy * dy).sqrt();
            let head_cov = coverage((r - 1.0) * g.ax.min(g.ay));
            if head_cov > 0.0 {
                let shade = 1.0 - 0.18 * r * r;
                blend(&mut px, skin.map(|c| c * shade), head_cov);
                // hair cap over the top of the head
                let hair_line = g.cy - 0.62 * g.ay;
                let hair_cov = coverage(fy - hair_line) * head_cov;
                blend(&mut px, hair, hair_cov);
            }

            for side in [-1.0, 1.0] {
                let ex = g.cx + side * g.eye_half_spacing;
                let ux = (fx - ex) / g.eye_w;
                let uy = (fy - g.eye_y) / g.eye_h;
                let er = (ux * ux + uy * uy).sqrt();
                blend(&mut px, [0.92, 0.92, 0.9], coverage((er - 1.0) * g.eye_h));
                let pr = ((fx - ex).powi(2) + (fy - g.eye_y).powi(2)).sqrt();
                blend(&mut px, pupil, coverage(pr - 0.7 * g.eye_h));
                // brow
                let by = g.eye_y - 2.2 * g.eye_h;
                let bx = ((fx - ex).abs() - g.eye_w).max(0.0);
                let bd = (bx * bx + (fy - by).powi(2)).sqrt() - 0.012 * s;
                blend(&mut px, brow, coverage(bd));
            }

            // nose ridge and nostrils
            let ridge_top = g.eye_y + 0.03 * s;
            if fy >= ridge_top && fy <= g.nose_tip_y {
                let t = (fy - ridge_top) / (g.nose_tip_y - ridge_top).max(1e-9);
                let d = (fx - g.cx).abs() - 0.008 * s * (1.0 + t);
                blend(&mut px, nose_shadow, 0.6 * coverage(d));
            }
            let nostril_y = g.nose_tip_y - 0.3 * g.nose_w;
            for side in [-1.0, 1.0] {
                let nd = ((fx - (g.cx + side * g.nose_w)).powi(2) + (fy - nostril_y).powi(2)).sqrt()
                    - 0.012 * s;
                blend(&mut px, nose_shadow.map(|c| c * 0.8), coverage(nd));
            }

            // mouth band bending with the curvature parameter
            let t = (fx - g.cx) / g.mouth_w;
            if t.abs() <= 1.2 {
                let centre = g.mouth_y + g.mouth_curve * (1.0 - t * t).max(0.0);
                let half = g.lip * (1.0 - 0.5 * t * t).max(0.2);
                let d = ((fy - centre).abs() - half).max((t.abs() - 1.0) * g.mouth_w);
                blend(&mut px, lips, coverage(d));
            }

            let nx = 2.0 * fx / (s - 1.0) - 1.0;
            let ny = 2.0 * fy / (s - 1.0) - 1.0;
            let light = 1.0 + nuisance.illumination_strength * (ill_cos * nx + ill_sin * ny);
            img.set_pixel(x, y, px.map(|v| v * light));
        }
    }

    if nuisance.sensor_noise_sigma > 0.0 {
        let mut rng = seed::rng(seed::derive_tag(bg_seed, "sensor"));
        for v in img.data_mut() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v += nuisance.sensor_noise_sigma * n;
        }
    }
    img.clip();

    Ok(FaceSample {
        id: format!("bf-{:04}", params.id),
        image: img,
        landmarks: g.landmarks(size),
        label: Label::Bonafide,
        identity_ids: vec![params.id],
        domain: "raw".to_string(),
        attack: "none".to_string(),
        split: Split::Train,
    })
}

/// Corpus generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub identities: usize,
    pub instances: usize,
    /// Attack tags synthesized for the training split.
    pub attacks: Vec<String>,
    /// Attack tags for the test split; `None` reuses `attacks`.
    pub test_attacks: Option<Vec<String>>,
    /// Fraction of identities held out as the test split.
    pub test_fraction: f64,
    /// Cap on cross-identity morphs per split (seeded subset of all pairs).
    pub max_morphs: Option<usize>,
    pub size: usize,
    pub seed: u64,
    pub domain: String,
    pub nuisance: NuisanceDistribution,
    pub alpha: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            identities: 10,
            instances: 4,
            attacks: vec![],
            test_attacks: None,
            test_fraction: 0.0,
            max_morphs: None,
            size: 64,
            seed: 0,
            domain: "raw".to_string(),
            nuisance: NuisanceDistribution::source(),
            alpha: 0.5,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        for tag in self.attacks.iter().chain(self.test_attacks.iter().flatten()) {
            if !KNOWN_ATTACKS.contains(&tag.as_str()) {
                return Err(Error::invalid(format!("unknown attack tag {tag:?}")));
            }
        }
        if self.size < MIN_SIZE {
            return Err(Error::invalid(format!("image size {} below {MIN_SIZE}", self.size)));
        }
        if self.identities == 0 || self.instances == 0 {
            return Err(Error::invalid("identity and instance counts must be positive"));
        }
        if !(0.0..=1.0).contains(&self.test_fraction) {
            return Err(Error::invalid("test fraction outside [0, 1]"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("morph alpha must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Render instance `instance` of identity slot `index` for a config.
pub fn render_instance(cfg: &CorpusConfig, index: usize, instance: usize) -> Result<FaceSample> {
    let mut params = sample_identity(seed::derive(cfg.seed, index as u64));
    params.id = index as u64;
    let nseed = seed::derive(seed::derive_tag(cfg.seed, "nuisance"), (index * 1000 + instance) as u64);
    let nuisance = cfg.nuisance.sample(nseed, cfg.size);
    let mut s = render_face(&params, &nuisance, cfg.size)?;
    s.id = format!("bf-{index:04}-{instance:02}");
    s.domain = cfg.domain.clone();
    Ok(s)
}

/// Generate the full corpus in memory, sorted by sample id.
pub fn generate_samples(cfg: &CorpusConfig) -> Result<Vec<FaceSample>> {
    cfg.validate()?;
    let mut order: Vec<usize> = (0..cfg.identities).collect();
    order.shuffle(&mut seed::rng(seed::derive_tag(cfg.seed, "split")));
    let n_test = (cfg.test_fraction * cfg.identities as f64).round() as usize;
    let test_ids: BTreeSet<usize> = order[..n_test].iter().copied().collect();

    let mut bona: Vec<Vec<FaceSample>> = Vec::with_capacity(cfg.identities);
    for index in 0..cfg.identities {
        let split = if test_ids.contains(&index) { Split::Test } else { Split::Train };
        let mut row = Vec::with_capacity(cfg.instances);
        for instance in 0..cfg.instances {
            let mut s = render_instance(cfg, index, instance)?;
            s.split = split;
            row.push(s);
        }
        bona.push(row);
    }

    let mut out: Vec<FaceSample> = bona.iter().flatten().cloned().collect();
    for split in [Split::Train, Split::Test] {
        let attacks = match split {
            Split::Train => &cfg.attacks,
            Split::Test => cfg.test_attacks.as_ref().unwrap_or(&cfg.attacks),
        };
        let members: Vec<usize> = (0..cfg.identities)
            .filter(|i| (test_ids.contains(i)) == (split == Split::Test))
            .collect();
        for attack in attacks {
            match attack.as_str() {
                "lm" => out.extend(cross_morphs(cfg, &bona, &members, split)?),
                "self-morph" => out.extend(self_morphs(cfg, &bona, &members, split)?),
                other => return Err(Error::invalid(format!("unknown attack tag {other:?}"))),
            }
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

fn cross_morphs(
    cfg: &CorpusConfig,
    bona: &[Vec<FaceSample>],
    members: &[usize],
    split: Split,
) -> Result<Vec<FaceSample>> {
    let mut pairs = Vec::new();
    for (k, &a) in members.iter().enumerate() {
        for &b in &members[k + 1..] {
            pairs.push((a, b));
        }
    }
    if let Some(cap) = cfg.max_morphs {
        let tag = if split == Split::Train { "pairs-train" } else { "pairs-test" };
        pairs.shuffle(&mut seed::rng(seed::derive_tag(cfg.seed, tag)));
        pairs.truncate(cap);
        pairs.sort_unstable();
    }
    let mut out = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let pick = seed::derive(seed::derive_tag(cfg.seed, "lm-pick"), (a * 100_000 + b) as u64);
        let ia = (pick % cfg.instances as u64) as usize;
        let ib = ((pick >> 32) % cfg.instances as u64) as usize;
        let spec = MorphSpec::plain(cfg.alpha, pick);
        let mut m = morphkit::cross_morph(&bona[a][ia], &bona[b][ib], &spec)?;
        m.id = format!("lm-{a:04}-{b:04}");
        m.split = split;
        m.domain = cfg.domain.clone();
        out.push(m);
    }
    Ok(out)
}

fn self_morphs(
    cfg: &CorpusConfig,
    bona: &[Vec<FaceSample>],
    members: &[usize],
    split: Split,
) -> Result<Vec<FaceSample>> {
    let inst: Vec<FaceSample> = members.iter().flat_map(|&m| bona[m].iter().cloned()).collect();
    let mut out = morphkit::self_morph_set(&inst, cfg.alpha, cfg.seed)?;
    for m in &mut out {
        m.split = split;
        m.domain = cfg.domain.clone();
    }
    Ok(out)
}

/// Generate a corpus and write it (images, manifest, landmarks) under `out_dir`.
pub fn build_corpus(cfg: &CorpusConfig, out_dir: &Path) -> Result<Corpus> {
    let samples = generate_samples(cfg)?;
    let mut writer = CorpusWriter::create(out_dir)?;
    for s in &samples {
        s.validate()?;
        writer.add(s)?;
    }
    writer.finish()
}
