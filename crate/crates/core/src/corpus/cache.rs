//! On-disk form of an encoded corpus together with its vocabulary.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{encode_corpus, LabeledCorpus, RawCorpus};
use super::tokenize::Tokenizer;
use super::vocab::Vocabulary;
use crate::checkpoint::write_atomic;
use crate::error::{Error, Result};

/// Everything needed to train on a corpus without re-reading the source
/// files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub seq_len: usize,
    pub tokenizer: Tokenizer,
    pub vocabulary: Vocabulary,
    pub corpus: LabeledCorpus,
}

impl CorpusFile {
    /// Builds the vocabulary over both classes and encodes every review.
    pub fn from_raw(raw: &RawCorpus, seq_len: usize, tokenizer: Tokenizer) -> Result<Self> {
        let vocabulary = Vocabulary::build(raw.truthful.iter().chain(&raw.deceptive));
        let corpus = encode_corpus(raw, &vocabulary, seq_len)?;
        Ok(CorpusFile {
            seq_len,
            tokenizer,
            vocabulary,
            corpus,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CorpusFile = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        file.validate()
            .map_err(|e| Error::Format {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_vec(self).expect("corpus serializes");
        write_atomic(path, &text)
    }

    fn validate(&self) -> Result<()> {
        for (seq, _) in self.corpus.labeled() {
            if seq.len() != self.seq_len {
                return Err(Error::Dimension(format!(
                    "sequence of length {} in a corpus of length {}",
                    seq.len(),
                    self.seq_len
                )));
            }
            if let Some(&bad) = seq.ids().iter().find(|&&id| id >= self.vocabulary.len()) {
                return Err(Error::Lookup(format!("token id {bad} outside the vocabulary")));
            }
        }
        Ok(())
    }
}
