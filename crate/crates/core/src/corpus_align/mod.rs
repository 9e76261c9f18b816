//! Unsupervised extraction of object references from an instruction corpus
//! by EM alignment of noun chunks to nearby objects.

mod corpus;
mod em;

pub use corpus::{
    extract_reference_dataset, generate_corpus, load_corpus, nearby_objects, prepare, sample_known_model, save_corpus,
    AlignedExample, GeneratedExample, KnownModelCorpus, LayoutObject, NEARBY_RADIUS, NULL_PHRASES,
};
pub use em::{em_train, resolve, AlignmentInstance, AlignmentModel, EmConfig, EmReport, DEFAULT_DELTA, NULL_OBJECT, NULL_PRIOR_FLOOR};
