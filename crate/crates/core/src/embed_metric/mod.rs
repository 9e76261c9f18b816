//! Image embedding trained with a max-margin triplet loss, and Gaussian
//! kernel density estimation over exemplar embeddings.

mod kde;
mod net;
mod retrieval;
mod train;
mod triplet;

pub use kde::{kde_pdf, kde_posterior, KdeModel, Posterior, IMAGE_SIGMA, TEXT_SIGMA};
pub use net::{EmbeddingNet, NetCheckpoint, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN};
pub use retrieval::{nway_retrieval_eval, LabeledPatch};
pub use train::{mean_triplet_loss, train_embedder, TrainConfig, TrainReport, TripletIndices};
pub use triplet::{triplet_loss, triplet_loss_and_grad, triplet_terms, Margins, TripletBatch};
