//! Ground-truth constrained pseudo-labels for semantic segmentation.
//!
//! A teacher trained on a source taxonomy predicts soft scores on images of
//! an extra dataset that has its own, coarser ground truth. An ontology
//! relates every extra class to the source classes it may contain; refining
//! zeroes the scores a pixel's ground truth rules out and takes the argmax
//! of what is left.
//!
//! The pieces, roughly in pipeline order:
//!
//! - [`taxonomy`], [`ontology`], [`validate`]: the text formats and their checks
//! - [`constraint`]: per-label allowed sets as bitsets
//! - [`io`]: `.sftp` soft predictions and 8-bit label PNGs
//! - [`refine`]: inverse augmentation, fusion, masking and hardening
//! - [`workspace`]: batch refinement into `it<i>/` directories
//! - [`metrics`]: confusion matrices and mIoU
//! - [`manifest`]: dataset manifests, frame pairing and frame statistics
//! - [`sim`]: synthetic scenes and teachers
//!
//! Runnable examples (`cargo run --example <name>`): `parse_ontology`,
//! `constraint_masking`, `tta_fusion`, `evaluate_miou`, `dataset_stats`,
//! `simulate_dominance` and `toy_pipeline`. The `pseudolabel` binary wraps
//! [`cli::run`].

pub mod classset;
pub mod cli;
pub mod constraint;
mod dsl;
pub mod error;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod ontology;
pub mod refine;
pub mod sim;
pub mod taxonomy;
pub mod tensor;
pub mod validate;
pub mod workspace;

pub use classset::ClassSet;
pub use dsl::decode_utf8;
pub use constraint::ConstraintTable;
pub use error::{Error, FormatError, ParseError, Result};
pub use ontology::{FallbackPolicy, OntologyRelation};
pub use taxonomy::{ClassDef, Taxonomy, VOID_LABEL};
pub use tensor::{AugDescriptor, LabelMap, SoftPrediction};
