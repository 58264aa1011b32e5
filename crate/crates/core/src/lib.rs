//! Face morphing attack detection with consistency regularization.
//!
//! The crate covers the whole desk-scale pipeline:
//!
//! - [`synthface`]: procedural faces with closed-form landmarks, corpus generation
//! - [`morphkit`]: Delaunay landmark morphing and self-morph augmentation
//! - [`stylemix`]: inter-domain style mixup (color WCT, Fourier amplitude mix)
//! - [`postops`]: JPEG and print-scan degradations
//! - [`grlnet`]: multi-level detector with alignment modules, auxiliary heads,
//!   a concatenated-feature head, and domain discriminators
//! - [`regloss`]: tempered cross-entropy, KL prediction consistency, JSD plus
//!   adversarial embedding consistency
//! - [`trainer`]: source/target pairing, SGD training, ablation harness
//! - [`bioeval`]: APCER at fixed BPCER, D-EER, AUC, DET curves

pub mod augment;
pub mod bioeval;
pub mod error;
pub mod grlnet;
pub mod image;
pub mod manifest;
pub mod morphkit;
pub mod postops;
pub mod regloss;
pub mod sample;
pub mod seed;
pub mod stylemix;
pub mod synthface;
pub mod trainer;

pub use error::{Error, Result};
pub use image::Image;
pub use sample::{FaceSample, Label, LandmarkSet, Split};
