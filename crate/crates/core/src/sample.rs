//! Corpus records shared by every stage: landmark sets and face samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Semantic landmark count (head contour 8, eyes 2x3, nose 3, mouth 4).
pub const SEMANTIC_LANDMARKS: usize = 21;
/// Semantic landmarks plus the four image corners.
pub const TOTAL_LANDMARKS: usize = SEMANTIC_LANDMARKS + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bonafide,
    Morph,
}

impl Label {
    /// Class index used by classifiers; morph is the positive class.
    pub fn index(self) -> usize {
        match self {
            Label::Bonafide => 0,
            Label::Morph => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bonafide => "bonafide",
            Label::Morph => "morph",
        }
    }

    pub fn parse(s: &str) -> Result<Label> {
        match s {
            "bonafide" => Ok(Label::Bonafide),
            "morph" => Ok(Label::Morph),
            other => Err(Error::invalid(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split {other:?}"))),
        }
    }
}

/// Ordered 2-D control points in pixel coordinates.
///
/// Generated sets carry [`SEMANTIC_LANDMARKS`] face points followed by the
/// four image corners in the order top-left, top-right, bottom-right,
/// bottom-left. Geometry routines accept any point count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub points: Vec<[f64; 2]>,
}

impl LandmarkSet {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        LandmarkSet { points }
    }

    /// Append the four corners of a `width x height` raster.
    pub fn with_corners(mut semantic: Vec<[f64; 2]>, width: usize, height: usize) -> Self {
        let (w, h) = ((width - 1) as f64, (height - 1) as f64);
        semantic.extend_from_slice(&[[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]]);
        LandmarkSet { points: semantic }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `alpha * self + (1 - alpha) * other`, point by point.
    pub fn interpolate(&self, other: &LandmarkSet, alpha: f64) -> Result<LandmarkSet> {
        if self.len() != other.len() {
            return Err(Error::invalid(format!(
                "landmark cardinality mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let beta = 1.0 - alpha;
        let points = self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| [alpha * a[0] + beta * b[0], alpha * a[1] + beta * b[1]])
            .collect();
        Ok(LandmarkSet { points })
    }

    /// Map points onto a resized raster (pixel-center alignment); corner
    /// points, when present, are re-pinned to the new corners.
    pub fn rescaled(&self, width: usize, height: usize, new_w: usize, new_h: usize) -> LandmarkSet {
        let had_corners = self.corners_exact(width, height);
        let n = if had_corners { self.len() - 4 } else { self.len() };
        let (sx, sy) = (new_w as f64 / width as f64, new_h as f64 / height as f64);
        let (mx, my) = ((new_w - 1) as f64, (new_h - 1) as f64);
        let pts: Vec<[f64; 2]> = self.points[..n]
            .iter()
            .map(|p| {
                [
                    ((p[0] + 0.5) * sx - 0.5).clamp(0.0, mx),
                    ((p[1] + 0.5) * sy - 0.5).clamp(0.0, my),
                ]
            })
            .collect();
        if had_corners {
            LandmarkSet::with_corners(pts, new_w, new_h)
        } else {
            LandmarkSet::new(pts)
        }
    }

    pub fn in_bounds(&self, width: usize, height: usize) -> bool {
        self.points.iter().all(|p| {
            p[0] >= 0.0 && p[0] < width as f64 && p[1] >= 0.0 && p[1] < height as f64
        })
    }

    /// True when the last four points sit exactly on the raster corners.
    pub fn corners_exact(&self, width: usize, height: usize) -> bool {
        if self.len() < 4 {
            return false;
        }
        let (w, h) = ((width - 1) as f64, (height - 1) as f64);
        self.points[self.len() - 4..] == [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]]
    }
}

/// The universal corpus record.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceSample {
    pub id: String,
    pub image: Image,
    pub landmarks: LandmarkSet,
    pub label: Label,
    pub identity_ids: Vec<u64>,
    pub domain: String,
    pub attack: String,
    pub split: Split,
}

impl FaceSample {
    /// Check the record-level invariants (pixel range, landmark bounds, identity arity).
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.image.width(), self.image.height());
        if !self.image.in_unit_range() {
            return Err(Error::invalid(format!("{}: pixel values outside [0,1]", self.id)));
        }
        if !self.landmarks.in_bounds(w, h) {
            return Err(Error::invalid(format!("{}: landmark outside image", self.id)));
        }
        match self.label {
            Label::Bonafide => {
                if self.identity_ids.len() != 1 {
                    return Err(Error::invalid(format!(
                        "{}: bona fide sample must reference exactly one identity",
                        self.id
                    )));
                }
            }
            Label::Morph => {
                if self.identity_ids.len() != 2 {
                    return Err(Error::invalid(format!(
                        "{}: morph must reference two identities",
                        self.id
                    )));
                }
                if self.identity_ids[0] == self.identity_ids[1] && self.attack != "self-morph" {
                    return Err(Error::invalid(format!(
                        "{}: repeated identity only allowed for self-morph",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Id of the sample this one was derived from (`a+ism` derives from `a`).
    pub fn origin(&self) -> &str {
        origin_of(&self.id)
    }
}

pub fn origin_of(id: &str) -> &str {
    id.split('+').next().unwrap_or(id)
}
