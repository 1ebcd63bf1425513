//! Dataset and model I/O.

mod binary;
mod model_file;
mod table;
mod tree;

pub use binary::{read_embeddings, write_embeddings};
pub use model_file::{load_model, save_model, LoadedModel, Provenance, FORMAT_VERSION};
pub use table::{load_dataset, load_queries, DatasetSchema, EmbeddingSource, FeatureSpec, FeatureSpecKind};
pub use tree::tree_kernel_gram;
