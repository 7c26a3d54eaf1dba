//! Tokenization, encoding, ingestion and fold invariants.

use std::fs;

use deceptgan::corpus::{
    encode_corpus, ingest_labeled_dir, kfold_split, load_embeddings, tokenize, CorpusFile, Label, ReviewSet,
    TokenSequence, Tokenizer, Vocabulary,
};
use deceptgan::Error;
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,6}"
}

#[test]
fn ingest_discards_overlong_reviews_and_counts_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let write = |rel: &str, text: &str| {
        let path = dir.path().join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    };
    write("truthful/fold1/a.txt", "Clean room, friendly staff.");
    write("truthful/fold2/b.txt", "one two three four five six seven eight nine ten");
    write("truthful/notes.md", "ignored");
    write("deceptive/fold1/c.txt", "Best stay ever!");
    write("deceptive/d.txt", "   ");
    let report = ingest_labeled_dir(dir.path(), 6, Tokenizer::PunctSplit).unwrap();
    assert_eq!(report.corpus.truthful, vec![vec!["clean", "room", ",", "friendly", "staff", "."]]);
    assert_eq!(report.corpus.deceptive, vec![vec!["best", "stay", "ever", "!"]]);
    assert_eq!((report.discarded_truthful, report.discarded_deceptive), (1, 1));

    let cached = CorpusFile::from_raw(&report.corpus, 6, Tokenizer::PunctSplit).unwrap();
    let path = dir.path().join("corpus.json");
    cached.save(&path).unwrap();
    assert_eq!(CorpusFile::load(&path).unwrap(), cached);
}

#[test]
fn ingest_requires_both_class_directories() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("truthful")).unwrap();
    assert!(matches!(
        ingest_labeled_dir(dir.path(), 10, Tokenizer::PunctSplit),
        Err(Error::Layout(_))
    ));
}

#[test]
fn unknown_tokens_map_to_unk() {
    let vocab = Vocabulary::from_tokens(["hotel", "great"]);
    let seq = vocab.encode(&tokenize("great motel").unwrap(), 4).unwrap();
    assert_eq!(seq.ids()[1], Vocabulary::UNK);
    assert_eq!(&seq.ids()[2..], &[Vocabulary::END, Vocabulary::END]);
}

#[test]
fn pretrained_vectors_cover_the_vocabulary() {
    // Optional: set DECEPTGAN_EMBEDDINGS and DECEPTGAN_CORPUS to check a real
    // 200-dimensional vector file against an ingested corpus.
    let (Ok(vectors), Ok(corpus)) = (std::env::var("DECEPTGAN_EMBEDDINGS"), std::env::var("DECEPTGAN_CORPUS")) else {
        eprintln!("skipped: DECEPTGAN_EMBEDDINGS / DECEPTGAN_CORPUS not set");
        return;
    };
    let corpus = CorpusFile::load(corpus.as_ref()).unwrap();
    let table = load_embeddings(vectors.as_ref(), &corpus.vocabulary, 0).unwrap();
    assert_eq!(table.dim(), 200);
    assert_eq!(table.vocab_len(), corpus.vocabulary.len());
    assert!(table.found * 2 > corpus.vocabulary.len(), "found {} vectors", table.found);
}

proptest! {
    #[test]
    fn encode_then_decode_round_trips(words in prop::collection::vec(word(), 1..20), extra in 0usize..10) {
        let vocab = Vocabulary::build([&words]);
        let seq_len = words.len() + extra;
        let seq = vocab.encode(&words, seq_len).unwrap();
        prop_assert_eq!(seq.len(), seq_len);
        prop_assert_eq!(seq.original_length(), words.len());
        prop_assert_eq!(vocab.decode(&seq), words);
    }

    #[test]
    fn padding_fills_with_end(ids in prop::collection::vec(3usize..50, 1..12), extra in 0usize..8) {
        let len = ids.len() + extra;
        let seq = TokenSequence::padded(ids.clone(), len).unwrap();
        prop_assert_eq!(seq.content(), &ids[..]);
        prop_assert!(seq.ids()[ids.len()..].iter().all(|&t| t == Vocabulary::END));
        prop_assert!(TokenSequence::padded(ids.clone(), ids.len() - 1).is_err());
    }

    #[test]
    fn folds_are_stratified_disjoint_and_covering(
        truthful in 5usize..80,
        deceptive in 5usize..80,
        k in 2usize..6,
        seed in 0u64..1000,
    ) {
        let corpus = ReviewSet::new((0..truthful).collect::<Vec<_>>(), (1000..1000 + deceptive).collect());
        let folds = kfold_split(&corpus, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen: Vec<usize> = Vec::new();
        for f in &folds {
            for label in [Label::Truthful, Label::Deceptive] {
                let n = corpus.class(label).len();
                let test = f.test.class(label).len();
                prop_assert!(test == n / k || test == n.div_ceil(k));
                prop_assert_eq!(test + f.train.class(label).len(), n);
                for x in f.test.class(label) {
                    prop_assert!(!f.train.class(label).contains(x));
                }
            }
            seen.extend(f.test.truthful.iter().chain(&f.test.deceptive));
        }
        seen.sort();
        let mut all: Vec<usize> = corpus.truthful.iter().chain(&corpus.deceptive).copied().collect();
        all.sort();
        prop_assert_eq!(seen, all);
        prop_assert_eq!(folds, kfold_split(&corpus, k, seed).unwrap());
    }

    #[test]
    fn corpus_encoding_keeps_class_sizes(t in 1usize..10, d in 1usize..10) {
        let raw = ReviewSet::new(vec![vec!["a".to_string()]; t], vec![vec!["b".to_string(), "c".to_string()]; d]);
        let vocab = Vocabulary::build(raw.truthful.iter().chain(&raw.deceptive));
        let encoded = encode_corpus(&raw, &vocab, 3).unwrap();
        prop_assert_eq!((encoded.truthful.len(), encoded.deceptive.len()), (t, d));
    }
}
