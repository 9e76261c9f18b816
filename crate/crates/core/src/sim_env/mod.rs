//! Desk-scale simulator: procedural layouts, unicycle kinematics, ray-cast
//! first-person rendering and annotated synthetic data.

mod catalog;
mod dataset;
mod kinematics;
mod layout;
mod render;
mod vocab;

pub use catalog::{catalog, held_out_pool, training_pool, ObjectType, ShapeKind, COLORS};
pub use dataset::{
    build_exemplar_db, gen_ar_dataset, load_dataset, make_triplets, rle_decode, rle_encode, sample_view, write_dataset,
    AnnotationRecord, ArDataset, CropRecord, DatasetConfig, FrameRecord, Manifest, ViewConfig,
};
pub use kinematics::{Action, AgentState, Kinematics, StepResult};
pub use layout::{generate_layout, Layout, LayoutConfig, PlacedObject};
pub use render::{object_silhouette, render, Annotation, RenderConfig, RenderedScene};
pub use vocab::{synthetic_word_vectors, WORD_DIM};
