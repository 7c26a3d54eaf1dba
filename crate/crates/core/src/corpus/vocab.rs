use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Token ↔ id mapping. Ids 0..3 are reserved for the special symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_token_list(r.tokens)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr { tokens: v.tokens }
    }
}

impl Vocabulary {
    /// Conditioning symbol fed before the first position; never emitted.
    pub const START: usize = 0;
    /// Padding symbol.
    pub const END: usize = 1;
    pub const UNK: usize = 2;
    pub const NUM_SPECIAL: usize = 3;

    pub const START_TOKEN: &'static str = "<START>";
    pub const END_TOKEN: &'static str = "<END>";
    pub const UNK_TOKEN: &'static str = "<UNK>";

    /// Vocabulary over every distinct token in `docs`, in sorted order after
    /// the specials.
    pub fn build<'a, I, D>(docs: I) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        let mut distinct = BTreeSet::new();
        for doc in docs {
            for tok in doc {
                distinct.insert(tok.as_str());
            }
        }
        Self::from_tokens(distinct)
    }

    /// Specials followed by `tokens` (duplicates and specials skipped).
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut list: Vec<String> = [Self::START_TOKEN, Self::END_TOKEN, Self::UNK_TOKEN]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for t in tokens {
            if t != Self::START_TOKEN && t != Self::END_TOKEN && t != Self::UNK_TOKEN && seen.insert(t)
            {
                list.push(t.to_string());
            }
        }
        Self::from_token_list(list)
    }

    fn from_token_list(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= Self::NUM_SPECIAL
    }

    /// Id of `token`, falling back to UNK.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps tokens to ids and pads with END up to `seq_len`.
    pub fn encode(&self, tokens: &[String], seq_len: usize) -> Result<TokenSequence> {
        let ids: Vec<usize> = tokens.iter().map(|t| self.id(t)).collect();
        TokenSequence::padded(ids, seq_len)
    }

    /// Tokens of the unpadded prefix.
    pub fn decode(&self, seq: &TokenSequence) -> Vec<String> {
        seq.content()
            .iter()
            .map(|&id| self.token(id).unwrap_or(Self::UNK_TOKEN).to_string())
            .collect()
    }

    /// Hex SHA-256 over the ordered token list; ties checkpoints to the
    /// vocabulary they were trained with.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Fixed-length id sequence; positions at or after `original_length` hold END.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    ids: Vec<usize>,
    original_length: usize,
}

impl TokenSequence {
    /// Pads `ids` with END to `seq_len`. Fails if `ids` is empty or longer
    /// than `seq_len`.
    pub fn padded(mut ids: Vec<usize>, seq_len: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("sequence without tokens".into()));
        }
        if ids.len() > seq_len {
            return Err(Error::Contract(format!(
                "{} tokens exceed sequence length {seq_len}",
                ids.len()
            )));
        }
        let original_length = ids.len();
        ids.resize(seq_len, Vocabulary::END);
        Ok(TokenSequence {
            ids,
            original_length,
        })
    }

    /// Wraps a full-length generated sequence; the content ends at the first
    /// END (at least one position is kept).
    pub fn from_generated(ids: Vec<usize>) -> Self {
        let first_end = ids
            .iter()
            .position(|&t| t == Vocabulary::END)
            .unwrap_or(ids.len());
        TokenSequence {
            original_length: first_end.max(1).min(ids.len()),
            ids,
        }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn original_length(&self) -> usize {
        self.original_length
    }

    pub fn content(&self) -> &[usize] {
        &self.ids[..self.original_length]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn specials_come_first() {
        let v = Vocabulary::build([&toks(&["b", "a", "b"])]);
        assert_eq!(v.len(), 5);
        assert_eq!(v.token(Vocabulary::START), Some("<START>"));
        assert_eq!(v.id("a"), 3);
        assert_eq!(v.id("zzz"), Vocabulary::UNK);
    }

    #[test]
    fn padding_rule() {
        let v = Vocabulary::build([&toks(&["x", "y", "z"])]);
        let s = v.encode(&toks(&["x", "y", "z"]), 5).unwrap();
        assert_eq!(s.original_length(), 3);
        assert_eq!(&s.ids()[3..], &[Vocabulary::END, Vocabulary::END]);
        assert!(v.encode(&toks(&["x"; 6]), 5).is_err());
    }

    #[test]
    fn generated_content_stops_at_end() {
        let s = TokenSequence::from_generated(vec![4, 5, 1, 1]);
        assert_eq!(s.original_length(), 2);
        let s = TokenSequence::from_generated(vec![1, 1]);
        assert_eq!(s.original_length(), 1);
        let s = TokenSequence::from_generated(vec![4, 4]);
        assert_eq!(s.original_length(), 2);
    }

    #[test]
    fn serde_round_trip_rebuilds_index() {
        let v = Vocabulary::build([&toks(&["hotel", "great"])]);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.id("hotel"), v.id("hotel"));
        assert_eq!(back.fingerprint(), v.fingerprint());
    }
}
