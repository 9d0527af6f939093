use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

static MARKDOWN_TARGET: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\]\([^)\s]*\)").expect("static regex"));
static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:[a-z][a-z0-9+.-]*://|www\.)\S+").expect("static regex"));

/// Lowercased word tokens of one text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenStream {
    pub tokens: Vec<String>,
}

impl TokenStream {
    pub fn new(tokens: Vec<String>) -> Self {
        Self { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn extend(&mut self, other: TokenStream) {
        self.tokens.extend(other.tokens);
    }
}

impl FromIterator<String> for TokenStream {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        Self {
            tokens: iter.into_iter().collect(),
        }
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits `text` into lowercase word tokens.
///
/// Tokens are maximal runs of alphanumeric characters; an apostrophe is kept
/// when it sits between two alphanumerics (`i'm`, `don't`). URLs and markdown
/// link targets are removed before splitting.
pub fn tokenize(text: &str) -> TokenStream {
    let lowered = text.to_lowercase();
    let without_targets = MARKDOWN_TARGET.replace_all(&lowered, "] ");
    let cleaned = URL.replace_all(&without_targets, " ");

    let chars: Vec<char> = cleaned.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if is_apostrophe(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push('\'');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    TokenStream { tokens }
}

/// Number of tokens in `text`; the unit behind every word-count threshold.
pub fn token_count(text: &str) -> usize {
    tokenize(text).len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s).tokens
    }

    #[test]
    fn splits_and_lowercases() {
        assert_eq!(toks("I'm feeling GREAT today!"), ["i'm", "feeling", "great", "today"]);
    }

    #[test]
    fn empty_text() {
        assert!(toks("").is_empty());
        assert!(toks("  ... !!").is_empty());
    }

    #[test]
    fn drops_urls() {
        assert_eq!(toks("see https://x.y/z now"), ["see", "now"]);
        assert_eq!(toks("visit www.example.com today"), ["visit", "today"]);
    }

    #[test]
    fn drops_markdown_targets_keeps_text() {
        assert_eq!(toks("read [this post](/r/books/comments/1) ok"), ["read", "this", "post", "ok"]);
    }

    #[test]
    fn apostrophes_only_inside_words() {
        assert_eq!(toks("'quoted' rock'n'roll don\u{2019}t"), ["quoted", "rock'n'roll", "don't"]);
        assert_eq!(toks("users' posts"), ["users", "posts"]);
    }

    #[test]
    fn unicode_letters_and_digits() {
        assert_eq!(toks("Café 2x, naïve—ok"), ["café", "2x", "naïve", "ok"]);
    }

    proptest! {
        #[test]
        fn lowercase_invariant(s in "[A-Za-zÀ-ÿ0-9 '.,!?:/\\-\\[\\]()]{0,80}") {
            prop_assert_eq!(tokenize(&s.to_lowercase()), tokenize(&s));
        }

        #[test]
        fn tokens_are_wordlike(s in "\\PC{0,80}") {
            for t in tokenize(&s).tokens {
                prop_assert!(!t.is_empty());
                prop_assert!(t.chars().any(char::is_alphanumeric));
            }
        }
    }
}
