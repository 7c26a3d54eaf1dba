use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How review text is split into tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    /// Lowercase, every punctuation character becomes its own token.
    #[default]
    PunctSplit,
    /// Lowercase, split on whitespace only.
    Whitespace,
}

impl Tokenizer {
    pub fn tokenize(self, text: &str) -> Result<Vec<String>> {
        let lower = text.to_lowercase();
        let tokens: Vec<String> = match self {
            Tokenizer::Whitespace => lower.split_whitespace().map(str::to_string).collect(),
            Tokenizer::PunctSplit => {
                let mut out = Vec::new();
                let mut word = String::new();
                for ch in lower.chars() {
                    if ch.is_whitespace() {
                        flush(&mut word, &mut out);
                    } else if ch.is_alphanumeric() {
                        word.push(ch);
                    } else {
                        flush(&mut word, &mut out);
                        out.push(ch.to_string());
                    }
                }
                flush(&mut word, &mut out);
                out
            }
        };
        if tokens.is_empty() {
            return Err(Error::EmptyInput("text has no tokens".into()));
        }
        Ok(tokens)
    }
}

fn flush(word: &mut String, out: &mut Vec<String>) {
    if !word.is_empty() {
        out.push(std::mem::take(word));
    }
}

/// Tokenizes with the default rule.
pub fn tokenize(text: &str) -> Result<Vec<String>> {
    Tokenizer::default().tokenize(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn punctuation_is_split() {
        assert_eq!(tokenize("Great hotel!").unwrap(), vec!["great", "hotel", "!"]);
        assert_eq!(
            tokenize("didn't,  ok").unwrap(),
            vec!["didn", "'", "t", ",", "ok"]
        );
    }

    #[test]
    fn whitespace_collapses() {
        assert_eq!(tokenize("A  B").unwrap(), vec!["a", "b"]);
        assert_eq!(tokenize("\tA\n\nB ").unwrap(), vec!["a", "b"]);
    }

    #[test]
    fn empty_text_is_an_error() {
        assert!(matches!(tokenize("   \n"), Err(Error::EmptyInput(_))));
        assert!(matches!(tokenize(""), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn whitespace_mode_keeps_punctuation_attached() {
        assert_eq!(
            Tokenizer::Whitespace.tokenize("Great hotel!").unwrap(),
            vec!["great", "hotel!"]
        );
    }
}
