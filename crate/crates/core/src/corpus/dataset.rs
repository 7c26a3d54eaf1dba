use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::tokenize::Tokenizer;
use super::vocab::{TokenSequence, Vocabulary};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Truthful,
    Deceptive,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Truthful => "truthful",
            Label::Deceptive => "deceptive",
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Truthful => Label::Deceptive,
            Label::Deceptive => Label::Truthful,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truthful" => Ok(Label::Truthful),
            "deceptive" => Ok(Label::Deceptive),
            other => Err(Error::Contract(format!("unknown label '{other}'"))),
        }
    }
}

/// Reviews split by class.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReviewSet<T> {
    pub truthful: Vec<T>,
    pub deceptive: Vec<T>,
}

/// Encoded, padded reviews.
pub type LabeledCorpus = ReviewSet<TokenSequence>;

/// Tokenized reviews before vocabulary encoding.
pub type RawCorpus = ReviewSet<Vec<String>>;

impl<T> ReviewSet<T> {
    pub fn new(truthful: Vec<T>, deceptive: Vec<T>) -> Self {
        ReviewSet {
            truthful,
            deceptive,
        }
    }

    pub fn len(&self) -> usize {
        self.truthful.len() + self.deceptive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class(&self, label: Label) -> &[T] {
        match label {
            Label::Truthful => &self.truthful,
            Label::Deceptive => &self.deceptive,
        }
    }

    /// Truthful items first, then deceptive.
    pub fn labeled(&self) -> impl Iterator<Item = (&T, Label)> {
        self.truthful
            .iter()
            .map(|t| (t, Label::Truthful))
            .chain(self.deceptive.iter().map(|t| (t, Label::Deceptive)))
    }

    pub fn try_map<U>(&self, mut f: impl FnMut(&T) -> Result<U>) -> Result<ReviewSet<U>> {
        Ok(ReviewSet {
            truthful: self.truthful.iter().map(&mut f).collect::<Result<_>>()?,
            deceptive: self.deceptive.iter().map(&mut f).collect::<Result<_>>()?,
        })
    }

    /// Fails unless both classes are nonempty.
    pub fn require_both(&self) -> Result<()> {
        for label in [Label::Truthful, Label::Deceptive] {
            if self.class(label).is_empty() {
                return Err(Error::EmptyCorpus(format!("no {label} reviews")));
            }
        }
        Ok(())
    }
}

/// Result of reading a labeled review directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub corpus: RawCorpus,
    pub paths: ReviewSet<PathBuf>,
    pub discarded_truthful: usize,
    pub discarded_deceptive: usize,
}

/// Reads `<root>/truthful/**/*.txt` and `<root>/deceptive/**/*.txt`; reviews
/// with more than `seq_len` tokens are discarded.
pub fn ingest_labeled_dir(root: &Path, seq_len: usize, tokenizer: Tokenizer) -> Result<IngestReport> {
    let mut report = IngestReport {
        corpus: RawCorpus::default(),
        paths: ReviewSet::default(),
        discarded_truthful: 0,
        discarded_deceptive: 0,
    };
    for label in [Label::Truthful, Label::Deceptive] {
        let dir = root.join(label.as_str());
        if !dir.is_dir() {
            return Err(Error::Layout(format!(
                "missing subdirectory {}",
                dir.display()
            )));
        }
        let mut files: Vec<PathBuf> = WalkDir::new(&dir)
            .into_iter()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_file())
            .map(|e| e.into_path())
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        let (kept, kept_paths, discarded) = match label {
            Label::Truthful => (
                &mut report.corpus.truthful,
                &mut report.paths.truthful,
                &mut report.discarded_truthful,
            ),
            Label::Deceptive => (
                &mut report.corpus.deceptive,
                &mut report.paths.deceptive,
                &mut report.discarded_deceptive,
            ),
        };
        for path in files {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            match tokenizer.tokenize(&text) {
                Ok(tokens) if tokens.len() <= seq_len => {
                    kept.push(tokens);
                    kept_paths.push(path);
                }
                _ => *discarded += 1,
            }
        }
    }
    report.corpus.require_both()?;
    Ok(report)
}

/// Encodes and pads every review.
pub fn encode_corpus(raw: &RawCorpus, vocab: &Vocabulary, seq_len: usize) -> Result<LabeledCorpus> {
    raw.try_map(|tokens| vocab.encode(tokens, seq_len))
}

/// One cross-validation split.
#[derive(Clone, Debug, PartialEq)]
pub struct Fold<T> {
    pub train: ReviewSet<T>,
    pub test: ReviewSet<T>,
}

/// Stratified k-fold split. Within each class, items are shuffled under
/// `seed` and dealt round-robin; the deceptive class continues the deal
/// where the truthful class stopped, so whole test folds also differ in
/// size by at most one.
pub fn kfold_split<T: Clone>(corpus: &ReviewSet<T>, k: usize, seed: u64) -> Result<Vec<Fold<T>>> {
    if k < 2 {
        return Err(Error::Contract(format!("k must be at least 2, got {k}")));
    }
    for label in [Label::Truthful, Label::Deceptive] {
        let n = corpus.class(label).len();
        if n < k {
            return Err(Error::Contract(format!(
                "{label} class has {n} items, fewer than k={k}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    let mut dealt = 0usize;
    for (c, label) in [Label::Truthful, Label::Deceptive].into_iter().enumerate() {
        let n = corpus.class(label).len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut fold_of = vec![0; n];
        for (pos, &item) in order.iter().enumerate() {
            fold_of[item] = (dealt + pos) % k;
        }
        dealt += n;
        assignment[c] = fold_of;
    }
    let folds = (0..k)
        .map(|f| {
            let split = |items: &[T], fold_of: &[usize]| {
                let mut train = Vec::new();
                let mut test = Vec::new();
                for (item, &g) in items.iter().zip(fold_of) {
                    if g == f {
                        test.push(item.clone());
                    } else {
                        train.push(item.clone());
                    }
                }
                (train, test)
            };
            let (tt, te) = split(&corpus.truthful, &assignment[0]);
            let (dt, de) = split(&corpus.deceptive, &assignment[1]);
            Fold {
                train: ReviewSet::new(tt, dt),
                test: ReviewSet::new(te, de),
            }
        })
        .collect();
    Ok(folds)
}
