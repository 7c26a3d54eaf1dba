//! Tokenization, vocabulary, embeddings, dataset ingestion and folds.

mod cache;
mod dataset;
mod embeddings;
mod tokenize;
mod vocab;

pub use cache::CorpusFile;
pub use dataset::{
    encode_corpus, ingest_labeled_dir, kfold_split, Fold, IngestReport, Label, LabeledCorpus,
    RawCorpus, ReviewSet,
};
pub use embeddings::{load_embeddings, EmbeddingTable, RANDOM_ROW_BOUND};
pub use tokenize::{tokenize, Tokenizer};
pub use vocab::{TokenSequence, Vocabulary};
