//! On-disk corpus layout.
//!
//! ```text
//! DIR/manifest.jsonl    one record per sample, sorted by id
//! DIR/landmarks.jsonl   {"id", "points"} per sample, same order
//! DIR/images/<id>.png   8-bit RGB
//! ```

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::sample::{FaceSample, Label, LandmarkSet, Split};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const LANDMARKS_FILE: &str = "landmarks.jsonl";
pub const IMAGE_DIR: &str = "images";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub path: String,
    pub label: Label,
    pub identity_ids: Vec<u64>,
    pub domain: String,
    pub attack: String,
    pub split: Split,
}

#[derive(Debug, Serialize, Deserialize)]
struct LandmarkRecord {
    id: String,
    points: Vec<[f64; 2]>,
}

/// A corpus loaded from disk. Images are read lazily.
#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
    records: Vec<ManifestRecord>,
    landmarks: HashMap<String, LandmarkSet>,
}

impl Corpus {
    /// Load from a corpus directory or from the path of its manifest file.
    pub fn load(path: &Path) -> Result<Corpus> {
        let (root, manifest) = if path.is_dir() {
            (path.to_path_buf(), path.join(MANIFEST_FILE))
        } else {
            let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (root, path.to_path_buf())
        };
        let text = std::fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord = serde_json::from_str(line).map_err(|e| {
                Error::invalid(format!("{}:{}: {e}", manifest.display(), n + 1))
            })?;
            records.push(rec);
        }
        let lm_path = root.join(LANDMARKS_FILE);
        let mut landmarks = HashMap::new();
        if lm_path.exists() {
            let text = std::fs::read_to_string(&lm_path).map_err(|e| Error::io(&lm_path, e))?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let rec: LandmarkRecord = serde_json::from_str(line)?;
                landmarks.insert(rec.id, LandmarkSet::new(rec.points));
            }
        }
        Ok(Corpus {
            root,
            records,
            landmarks,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn image_path(&self, rec: &ManifestRecord) -> PathBuf {
        self.root.join(&rec.path)
    }

    pub fn load_sample(&self, rec: &ManifestRecord) -> Result<FaceSample> {
        let image = Image::load(&self.image_path(rec))?;
        let landmarks = self
            .landmarks
            .get(&rec.id)
            .cloned()
            .unwrap_or_else(|| LandmarkSet::with_corners(vec![], image.width(), image.height()));
        Ok(FaceSample {
            id: rec.id.clone(),
            image,
            landmarks,
            label: rec.label,
            identity_ids: rec.identity_ids.clone(),
            domain: rec.domain.clone(),
            attack: rec.attack.clone(),
            split: rec.split,
        })
    }

    /// Load every sample of a split, failing with the full list of missing ids.
    pub fn load_split(&self, split: Split) -> Result<Vec<FaceSample>> {
        self.load_where(|r| r.split == split)
    }

    pub fn load_where(&self, keep: impl Fn(&ManifestRecord) -> bool) -> Result<Vec<FaceSample>> {
        let wanted: Vec<&ManifestRecord> = self.records.iter().filter(|r| keep(r)).collect();
        let missing: Vec<&str> = wanted
            .iter()
            .filter(|r| !self.image_path(r).is_file())
            .map(|r| r.id.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::io(
                self.root.clone(),
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("missing images for ids: {}", missing.join(",")),
                ),
            ));
        }
        wanted.into_iter().map(|r| self.load_sample(r)).collect()
    }

    /// Structural checks run before training: invariants of every record.
    pub fn check_integrity(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for r in &self.records {
            if !seen.insert(&r.id) {
                return Err(Error::invalid(format!("duplicate sample id {}", r.id)));
            }
            match (r.label, r.identity_ids.len()) {
                (Label::Bonafide, 1) => {}
                (Label::Morph, 2) => {
                    if r.identity_ids[0] == r.identity_ids[1] && r.attack != "self-morph" {
                        return Err(Error::invalid(format!(
                            "{}: repeated identity only allowed for self-morph",
                            r.id
                        )));
                    }
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "{}: identity count does not match label",
                        r.id
                    )))
                }
            }
            if !self.image_path(r).is_file() {
                return Err(Error::io(
                    self.image_path(r),
                    std::io::Error::new(std::io::ErrorKind::NotFound, "image missing"),
                ));
            }
        }
        Ok(())
    }

    /// SHA-256 over manifest bytes, landmark bytes, and every image in manifest order.
    pub fn content_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        let manifest = self.manifest_path();
        h.update(std::fs::read(&manifest).map_err(|e| Error::io(&manifest, e))?);
        let lm = self.root.join(LANDMARKS_FILE);
        if lm.exists() {
            h.update(std::fs::read(&lm).map_err(|e| Error::io(&lm, e))?);
        }
        for r in &self.records {
            let p = self.image_path(r);
            h.update(std::fs::read(&p).map_err(|e| Error::io(&p, e))?);
        }
        Ok(hex::encode(h.finalize()))
    }
}

/// SHA-256 of a single file, hex encoded.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Incrementally writes samples into a corpus directory.
pub struct CorpusWriter {
    root: PathBuf,
    records: Vec<ManifestRecord>,
    landmarks: Vec<LandmarkRecord>,
}

impl CorpusWriter {
    pub fn create(root: &Path) -> Result<CorpusWriter> {
        let images = root.join(IMAGE_DIR);
        std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
        Ok(CorpusWriter {
            root: root.to_path_buf(),
            records: Vec::new(),
            landmarks: Vec::new(),
        })
    }

    pub fn add(&mut self, s: &FaceSample) -> Result<()> {
        let rel = format!("{IMAGE_DIR}/{}.png", s.id);
        s.image.save_png(&self.root.join(&rel))?;
        self.records.push(ManifestRecord {
            id: s.id.clone(),
            path: rel,
            label: s.label,
            identity_ids: s.identity_ids.clone(),
            domain: s.domain.clone(),
            attack: s.attack.clone(),
            split: s.split,
        });
        self.landmarks.push(LandmarkRecord {
            id: s.id.clone(),
            points: s.landmarks.points.clone(),
        });
        Ok(())
    }

    pub fn finish(mut self) -> Result<Corpus> {
        self.records.sort_by(|a, b| a.id.cmp(&b.id));
        self.landmarks.sort_by(|a, b| a.id.cmp(&b.id));
        write_jsonl(&self.root.join(MANIFEST_FILE), &self.records)?;
        write_jsonl(&self.root.join(LANDMARKS_FILE), &self.landmarks)?;
        Corpus::load(&self.root)
    }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}
