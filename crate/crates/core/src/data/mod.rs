//! Cascade files, vocabulary, dataset splits, padded batches, and the
//! synthetic multi-community generator.

mod batch;
mod cascade;
mod split;
mod synthetic;

pub use batch::{make_batches, Batch, DEFAULT_MAX_LEN};
pub use cascade::{parse_cascades, write_cascades, Cascade, ParseOptions, ParsedCascades, Vocabulary};
pub use split::{split_dataset, DatasetSplit};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};
