//! Checkpoints: a binary parameter archive plus a JSON sidecar.
//!
//! The archive stores every parameter tensor of the model, then of the
//! discriminator bank, each as `u64` length followed by values and momentum
//! buffers as little-endian `f64`. The sidecar lives at `<archive>.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::disc::DiscriminatorBank;
use super::layers::Param;
use super::model::{BackboneSpec, GrlNet};
use crate::error::{Error, Result};
use crate::regloss::LossWeights;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"GRLNET\0\x01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub spec: BackboneSpec,
    pub loss_weights: LossWeights,
    pub seed: u64,
    pub epoch: usize,
    pub corpus_hash: String,
    pub format_version: u32,
    /// Training configuration the run was started with.
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: GrlNet,
    pub bank: DiscriminatorBank,
    pub meta: CheckpointMeta,
}

pub fn sidecar_path(archive: &Path) -> PathBuf {
    let mut s = archive.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_params(buf: &mut Vec<u8>, params: &[&Param]) {
    for p in params {
        buf.extend_from_slice(&(p.len() as u64).to_le_bytes());
        for v in p.value.iter().chain(&p.velocity) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn read_params(bytes: &[u8], pos: &mut usize, params: Vec<&mut Param>) -> Result<()> {
    let mut take = |n: usize| -> Result<&[u8]> {
        let end = *pos + n;
        if end > bytes.len() {
            return Err(Error::invalid("checkpoint archive truncated"));
        }
        let s = &bytes[*pos..end];
        *pos = end;
        Ok(s)
    };
    for p in params {
        let len = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
        if len != p.len() {
            return Err(Error::invalid(format!(
                "checkpoint tensor of length {len}, model expects {}",
                p.len()
            )));
        }
        for i in 0..2 * len {
            let v = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
            if i < len {
                p.value[i] = v;
            } else {
                p.velocity[i - len] = v;
            }
        }
        p.zero_grad();
    }
    Ok(())
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    write_params(&mut buf, &ckpt.model.params());
    write_params(&mut buf, &ckpt.bank.params());
    std::fs::write(path, &buf).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&ckpt.meta)?;
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "checkpoint format {} unsupported (expected {FORMAT_VERSION})",
            meta.format_version
        )));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::invalid(format!("{} is not a model archive", path.display())));
    }
    let mut model = GrlNet::new(&meta.spec, 0)?;
    let mut bank = DiscriminatorBank::new(meta.spec.n(), meta.spec.aligned_dim, 0);
    let mut pos = MAGIC.len();
    read_params(&bytes, &mut pos, model.params_mut())?;
    read_params(&bytes, &mut pos, bank.params_mut())?;
    if pos != bytes.len() {
        return Err(Error::invalid("trailing bytes in checkpoint archive"));
    }
    Ok(Checkpoint { model, bank, meta })
}
