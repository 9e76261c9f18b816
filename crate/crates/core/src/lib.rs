//! Few-shot language-conditioned object grounding and allocentric object
//! context mapping, with a deterministic desk-scale simulator for
//! instruction following.
//!
//! The crate is organized bottom-up:
//!
//! * [`exemplar_db`] holds the object database (image and phrase exemplars)
//!   and the word-vector table.
//! * [`embed_metric`] is the image embedding trained with a max-margin
//!   triplet loss, plus Gaussian kernel density estimation.
//! * [`grounding`] turns region proposals into alignment scores and
//!   per-reference segmentation masks.
//! * [`instruction_lang`] chunks instructions, classifies object references,
//!   anonymizes them and encodes their context.
//! * [`corpus_align`] extracts labeled object references from a navigation
//!   corpus with EM.
//! * [`geo_mapping`] projects masks to the world frame and assembles the
//!   object context grounding map.
//! * [`sim_env`] is the simulator: layouts, unicycle kinematics, rendering,
//!   synthetic annotated data.
//! * [`policy_exec`] predicts visitation distributions and follows them.
//! * [`eval`] computes task metrics and runs experiments.

pub mod corpus_align;
pub mod embed_metric;
pub mod error;
pub mod eval;
pub mod exemplar_db;
pub mod geo_mapping;
pub mod grid;
pub mod grounding;
pub mod image;
pub mod instruction_lang;
pub mod pipeline;
pub mod policy_exec;
pub mod sim_env;
pub mod util;

pub use error::{Error, Result};
pub use grid::Grid;
pub use image::{BBox, Image};
