use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::vocab::Vocabulary;
use crate::autodiff::NumArray;
use crate::error::{Error, Result};

/// Half-width of the uniform range for rows without a pretrained vector.
pub const RANDOM_ROW_BOUND: f64 = 0.1;

/// `[V×E]` matrix of vectors aligned with vocabulary ids.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    vectors: NumArray,
    /// Rows copied from a pretrained file.
    pub found: usize,
}

impl EmbeddingTable {
    /// Every row uniform in `[-0.1, 0.1]`.
    pub fn random(vocab_len: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EmbeddingTable {
            vectors: NumArray::uniform(&[vocab_len, dim], RANDOM_ROW_BOUND, &mut rng),
            found: 0,
        }
    }

    pub fn from_array(vectors: NumArray) -> Result<Self> {
        if vectors.ndim() != 2 {
            return Err(Error::Dimension("embedding table must be 2-d".into()));
        }
        Ok(EmbeddingTable { vectors, found: 0 })
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn vocab_len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn vectors(&self) -> &NumArray {
        &self.vectors
    }

    pub fn into_array(self) -> NumArray {
        self.vectors
    }
}

/// Reads a whitespace-separated `token v1 … vE` file. Vocabulary tokens in
/// the file get their vectors; all other rows (specials included) are drawn
/// uniformly from `[-0.1, 0.1]` under `seed`.
pub fn load_embeddings(path: &Path, vocab: &Vocabulary, seed: u64) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut dim: Option<usize> = None;
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        let format_err = |msg: String| Error::Format {
            path: path.to_path_buf(),
            msg: format!("line {}: {msg}", lineno + 1),
        };
        match dim {
            None if values.is_empty() => return Err(format_err("no vector values".into())),
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(format_err(format!(
                    "expected {d} values, found {}",
                    values.len()
                )))
            }
            Some(_) => {}
        }
        if !vocab.contains(token) {
            continue;
        }
        let id = vocab.id(token);
        let parsed = values
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format_err(e.to_string()))?;
        if rows[id].is_none() {
            rows[id] = Some(parsed);
        }
    }

    let dim = dim.ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        msg: "no embedding rows".into(),
    })?;
    let mut table = EmbeddingTable::random(vocab.len(), dim, seed);
    let mut found = 0;
    for (id, row) in rows.into_iter().enumerate() {
        if let Some(values) = row {
            table.vectors.row_mut(id).copy_from_slice(&values);
            found += 1;
        }
    }
    table.found = found;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn file_rows_are_copied() {
        let f = write("the 0.1 0.2 0.3 0.4\nhotel 1 2 3 4\ngreat -1 -2 -3 -4\n");
        let vocab = Vocabulary::from_tokens(["great", "hotel", "the"]);
        let t = load_embeddings(f.path(), &vocab, 7).unwrap();
        assert_eq!(t.dim(), 4);
        assert_eq!(t.found, 3);
        assert_eq!(t.vectors().row(vocab.id("hotel")), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.vectors().row(vocab.id("great")), &[-1.0, -2.0, -3.0, -4.0]);
    }

    #[test]
    fn missing_tokens_are_small_and_reproducible() {
        let f = write("the 0.1 0.2\n");
        let vocab = Vocabulary::from_tokens(["the", "lobby"]);
        let a = load_embeddings(f.path(), &vocab, 11).unwrap();
        let b = load_embeddings(f.path(), &vocab, 11).unwrap();
        assert_eq!(a, b);
        let row = a.vectors().row(vocab.id("lobby"));
        assert!(row.iter().all(|v| v.abs() <= RANDOM_ROW_BOUND));
        assert!(a
            .vectors()
            .row(Vocabulary::START)
            .iter()
            .all(|v| v.abs() <= RANDOM_ROW_BOUND));
    }

    #[test]
    fn inconsistent_dimension_is_a_format_error() {
        let f = write("a 1 2 3\nb 1 2\n");
        let vocab = Vocabulary::from_tokens(["a", "b"]);
        assert!(matches!(
            load_embeddings(f.path(), &vocab, 0),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn unreadable_file_is_an_io_error() {
        let vocab = Vocabulary::from_tokens(["a"]);
        let r = load_embeddings(Path::new("/nonexistent/embeddings.txt"), &vocab, 0);
        assert!(r.unwrap_err().is_io());
    }
}
