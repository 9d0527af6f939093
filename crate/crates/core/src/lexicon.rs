//! LIWC-format dictionary engine.
//!
//! A `.dic` file has a category block and an entry block, each opened by a
//! `%` line:
//!
//! ```text
//! %
//! 1	pronoun
//! 3	i
//! %
//! i	1	3
//! feel*	28
//! ```
//!
//! A trailing `*` turns an entry into a prefix pattern. Exact entries take
//! precedence over prefixes, and among prefixes the longest one wins.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::TokenStream;

pub const DEMO_DIC: &str = include_str!("../data/demo.dic");
pub const DEMO_SUMMARIES: &str = include_str!("../data/demo_summaries.json");
pub const DEMO_EMPATH: &str = include_str!("../data/demo_empath.txt");

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: BTreeMap<char, usize>,
    categories: Option<Vec<u32>>,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    /// Category id -> name, in declaration order.
    categories: IndexMap<u32, String>,
    exact: HashMap<String, Vec<u32>>,
    prefixes: BTreeMap<String, Vec<u32>>,
    trie: Vec<TrieNode>,
}

fn dic_err(line: usize, message: impl Into<String>) -> Error {
    Error::Dictionary {
        line,
        message: message.into(),
    }
}

/// Parses `.dic` text. Lines are numbered from 1 in errors.
pub fn parse_dic(text: &str) -> Result<Lexicon> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let mut opened = false;
    for (no, line) in lines.by_ref() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t == "%" {
            opened = true;
            break;
        }
        return Err(dic_err(no, "expected `%` before the category block"));
    }
    if !opened {
        return Err(dic_err(0, "missing `%` delimiter"));
    }

    let mut categories = IndexMap::new();
    let mut names = BTreeSet::new();
    let mut closed = false;
    for (no, line) in lines.by_ref() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t == "%" {
            closed = true;
            break;
        }
        let mut fields = t.split_whitespace();
        let id: u32 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| dic_err(no, format!("bad category line {t:?}")))?;
        let name = fields
            .next()
            .ok_or_else(|| dic_err(no, "category line has no name"))?
            .to_string();
        if categories.contains_key(&id) {
            return Err(dic_err(no, format!("category id {id} declared twice")));
        }
        if !names.insert(name.clone()) {
            return Err(dic_err(no, format!("category name {name} declared twice")));
        }
        categories.insert(id, name);
    }
    if !closed {
        return Err(dic_err(0, "missing closing `%` after the category block"));
    }

    let mut exact: HashMap<String, BTreeSet<u32>> = HashMap::new();
    let mut prefixes: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (word, rest) = match line.split_once('\t') {
            Some((w, r)) => (w.trim(), r),
            None => {
                let t = line.trim();
                match t.split_once(char::is_whitespace) {
                    Some((w, r)) => (w, r),
                    None => (t, ""),
                }
            }
        };
        let word = word.to_lowercase();
        if word.is_empty() {
            return Err(dic_err(no, "empty entry word"));
        }
        let mut ids = BTreeSet::new();
        for field in rest.split_whitespace() {
            let id: u32 = field
                .parse()
                .map_err(|_| dic_err(no, format!("invalid category id {field:?}")))?;
            if !categories.contains_key(&id) {
                return Err(dic_err(no, format!("undeclared category id {id}")));
            }
            ids.insert(id);
        }
        if ids.is_empty() {
            return Err(dic_err(no, format!("entry {word:?} has no categories")));
        }
        let target = match word.strip_suffix('*') {
            Some(p) => prefixes.entry(p.to_string()).or_default(),
            None => exact.entry(word).or_default(),
        };
        target.extend(ids);
    }

    let exact = exact
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect();
    let prefixes: BTreeMap<String, Vec<u32>> = prefixes
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect();
    let trie = build_trie(&prefixes);
    Ok(Lexicon {
        categories,
        exact,
        prefixes,
        trie,
    })
}

fn build_trie(prefixes: &BTreeMap<String, Vec<u32>>) -> Vec<TrieNode> {
    let mut trie = vec![TrieNode::default()];
    for (p, ids) in prefixes {
        let mut node = 0;
        for c in p.chars() {
            node = match trie[node].children.get(&c) {
                Some(&n) => n,
                None => {
                    trie.push(TrieNode::default());
                    let n = trie.len() - 1;
                    trie[node].children.insert(c, n);
                    n
                }
            };
        }
        trie[node].categories = Some(ids.clone());
    }
    trie
}

impl Lexicon {
    /// The bundled demonstration dictionary.
    pub fn demo() -> Lexicon {
        parse_dic(DEMO_DIC).expect("bundled dictionary parses")
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    /// Category names in declaration order.
    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.values().map(String::as_str)
    }

    pub fn category_name(&self, id: u32) -> Option<&str> {
        self.categories.get(&id).map(String::as_str)
    }

    pub fn category_id(&self, name: &str) -> Option<u32> {
        self.categories
            .iter()
            .find(|(_, n)| n.as_str() == name)
            .map(|(&id, _)| id)
    }

    pub fn exact_entries(&self) -> impl Iterator<Item = (&str, &[u32])> {
        self.exact.iter().map(|(w, ids)| (w.as_str(), ids.as_slice()))
    }

    pub fn prefix_entries(&self) -> impl Iterator<Item = (&str, &[u32])> {
        self.prefixes
            .iter()
            .map(|(w, ids)| (w.as_str(), ids.as_slice()))
    }

    /// Category ids for a lowercase token: exact entry, else longest
    /// matching prefix, else none.
    pub fn match_token(&self, token: &str) -> &[u32] {
        if let Some(ids) = self.exact.get(token) {
            return ids;
        }
        let mut best: &[u32] = self.trie[0].categories.as_deref().unwrap_or(&[]);
        let mut node = 0;
        for c in token.chars() {
            match self.trie[node].children.get(&c) {
                Some(&n) => {
                    node = n;
                    if let Some(ids) = &self.trie[n].categories {
                        best = ids;
                    }
                }
                None => break,
            }
        }
        best
    }

    /// Per-category counts of matching tokens, aligned with declaration order.
    pub fn count(&self, tokens: &TokenStream) -> Vec<usize> {
        let position: HashMap<u32, usize> = self
            .categories
            .keys()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let mut counts = vec![0usize; self.categories.len()];
        for t in tokens.iter() {
            for id in self.match_token(t) {
                counts[position[id]] += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryTransform {
    Linear,
    Logistic100,
}

/// Composite score over category percentages (e.g. Authentic, Clout).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryVariableDef {
    pub name: String,
    pub weights: BTreeMap<String, f64>,
    #[serde(default)]
    pub intercept: f64,
    pub transform: SummaryTransform,
}

impl SummaryVariableDef {
    pub fn validate(&self, lex: &Lexicon) -> Result<()> {
        for cat in self.weights.keys() {
            if lex.category_id(cat).is_none() {
                return Err(Error::Config(format!(
                    "summary variable {} references unknown category {cat}",
                    self.name
                )));
            }
        }
        if lex.category_id(&self.name).is_some() {
            return Err(Error::Config(format!(
                "summary variable {} collides with a category name",
                self.name
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, percent: &IndexMap<String, f64>) -> f64 {
        let x = self.intercept
            + self
                .weights
                .iter()
                .map(|(c, w)| w * percent.get(c).copied().unwrap_or(0.0))
                .sum::<f64>();
        match self.transform {
            SummaryTransform::Linear => x,
            SummaryTransform::Logistic100 => 100.0 / (1.0 + (-x).exp()),
        }
    }
}

pub fn parse_summaries(json: &str) -> Result<Vec<SummaryVariableDef>> {
    Ok(serde_json::from_str(json)?)
}

pub fn demo_summaries() -> Vec<SummaryVariableDef> {
    parse_summaries(DEMO_SUMMARIES).expect("bundled summaries parse")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryProfile {
    /// Percent of all tokens per category, in lexicon declaration order.
    pub percent: IndexMap<String, f64>,
    pub token_count: usize,
    pub summary: IndexMap<String, f64>,
}

/// Category percentages and summary variables for one token stream.
pub fn profile(
    lex: &Lexicon,
    tokens: &TokenStream,
    summaries: &[SummaryVariableDef],
) -> Result<CategoryProfile> {
    if tokens.is_empty() {
        return Err(Error::Empty("cannot profile an empty token stream".into()));
    }
    for s in summaries {
        s.validate(lex)?;
    }
    let n = tokens.len();
    let counts = lex.count(tokens);
    let percent: IndexMap<String, f64> = lex
        .category_names()
        .zip(counts)
        .map(|(name, c)| (name.to_string(), 100.0 * c as f64 / n as f64))
        .collect();
    let summary = summaries
        .iter()
        .map(|s| (s.name.clone(), s.evaluate(&percent)))
        .collect();
    Ok(CategoryProfile {
        percent,
        token_count: n,
        summary,
    })
}

/// Punctuation-rate variable names, in output order.
pub const PUNCTUATION_VARIABLES: [&str; 12] = [
    "AllPunc", "Period", "Comma", "Colon", "SemiC", "QMark", "Exclam", "Dash", "Quote", "Apostro",
    "Parenth", "OtherP",
];

/// Punctuation marks per 100 word tokens.
pub fn punctuation_rates(text: &str, word_tokens: usize) -> IndexMap<String, f64> {
    let mut counts = [0usize; 12];
    for c in text.chars() {
        let slot = match c {
            '.' => 1,
            ',' => 2,
            ':' => 3,
            ';' => 4,
            '?' => 5,
            '!' => 6,
            '-' | '\u{2013}' | '\u{2014}' => 7,
            '"' | '\u{201c}' | '\u{201d}' => 8,
            '\'' | '\u{2019}' => 9,
            '(' | ')' | '[' | ']' => 10,
            c if c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace()) => 11,
            _ => continue,
        };
        counts[slot] += 1;
        counts[0] += 1;
    }
    let denom = word_tokens.max(1) as f64;
    PUNCTUATION_VARIABLES
        .iter()
        .zip(counts)
        .map(|(name, c)| (name.to_string(), 100.0 * c as f64 / denom))
        .collect()
}

/// Converts `category: word,word,...` lists (one category per line, `#`
/// comments allowed) into `.dic` text with ids numbered from 1.
pub fn word_lists_to_dic(text: &str) -> Result<String> {
    let mut categories: Vec<(String, Vec<String>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (name, words) = t
            .split_once(':')
            .ok_or_else(|| dic_err(i + 1, "expected `category: word,word,...`"))?;
        let name = name.trim();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(dic_err(i + 1, format!("bad category name {name:?}")));
        }
        if categories.iter().any(|(n, _)| n == name) {
            return Err(dic_err(i + 1, format!("category {name} listed twice")));
        }
        let words = words
            .split(',')
            .map(|w| w.trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        categories.push((name.to_string(), words));
    }
    let mut entries: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    let mut out = String::from("%\n");
    for (i, (name, words)) in categories.iter().enumerate() {
        out.push_str(&format!("{}\t{}\n", i + 1, name));
        for w in words {
            entries.entry(w.clone()).or_default().insert(i + 1);
        }
    }
    out.push_str("%\n");
    for (w, ids) in entries {
        out.push_str(&w);
        for id in ids {
            out.push_str(&format!("\t{id}"));
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::tokenize;
    use proptest::prelude::*;

    const SMALL: &str = "%\n1\ti\n2\tpronoun\n3\tfeel\n%\ni\t1\t2\nfeel*\t3\n";

    fn names(lex: &Lexicon, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .map(|&i| lex.category_name(i).unwrap().to_string())
            .collect()
    }

    #[test]
    fn parses_small_file() {
        let lex = parse_dic(SMALL).unwrap();
        assert_eq!(lex.category_count(), 3);
        assert_eq!(lex.exact_entries().count(), 1);
        assert_eq!(lex.prefix_entries().count(), 1);
        assert_eq!(lex.match_token("i"), &[1, 2]);
    }

    #[test]
    fn undeclared_id_reports_line() {
        let err = parse_dic("%\n1\ti\n%\nxyz\t9\n").unwrap_err();
        match err {
            Error::Dictionary { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_delimiters() {
        assert!(parse_dic("1\ti\n").is_err());
        assert!(parse_dic("%\n1\ti\n").is_err());
        assert!(parse_dic("").is_err());
    }

    #[test]
    fn duplicate_words_merge() {
        let lex = parse_dic("%\n1\ta\n2\tb\n%\nword\t1\nword\t2\n").unwrap();
        assert_eq!(lex.match_token("word"), &[1, 2]);
    }

    #[test]
    fn prefix_and_precedence() {
        let lex = parse_dic("%\n3\tfeel\n4\tfeelx\n%\nfeel*\t3\nfeel\t4\n").unwrap();
        assert_eq!(names(&lex, lex.match_token("feelings")), ["feel"]);
        assert_eq!(names(&lex, lex.match_token("feel")), ["feelx"]);
        assert!(lex.match_token("zzz").is_empty());
    }

    #[test]
    fn longest_prefix_wins() {
        let lex = parse_dic("%\n1\tshort\n2\tlong\n%\nwor*\t1\nworr*\t2\n").unwrap();
        assert_eq!(names(&lex, lex.match_token("worry")), ["long"]);
        assert_eq!(names(&lex, lex.match_token("work")), ["short"]);
        assert!(lex.match_token("wo").is_empty());
    }

    #[test]
    fn profile_percentages() {
        let lex = parse_dic(SMALL).unwrap();
        let toks = TokenStream::new(
            ["i", "i", "x", "x", "x", "x", "x", "x", "x", "feeling"]
                .map(String::from)
                .to_vec(),
        );
        let p = profile(&lex, &toks, &[]).unwrap();
        assert_eq!(p.percent["i"], 20.0);
        assert_eq!(p.percent["pronoun"], 20.0);
        assert_eq!(p.percent["feel"], 10.0);
        assert_eq!(p.token_count, 10);
    }

    #[test]
    fn logistic_summary_at_zero_is_fifty() {
        let lex = parse_dic(SMALL).unwrap();
        let def = SummaryVariableDef {
            name: "Auth".into(),
            weights: [("i".to_string(), 1.0)].into(),
            intercept: 0.0,
            transform: SummaryTransform::Logistic100,
        };
        let p = profile(&lex, &tokenize("nothing here"), &[def]).unwrap();
        assert_eq!(p.summary["Auth"], 50.0);
    }

    #[test]
    fn summary_with_unknown_category_is_rejected() {
        let lex = parse_dic(SMALL).unwrap();
        let def = SummaryVariableDef {
            name: "S".into(),
            weights: [("nope".to_string(), 1.0)].into(),
            intercept: 0.0,
            transform: SummaryTransform::Linear,
        };
        assert!(profile(&lex, &tokenize("i"), &[def]).is_err());
    }

    #[test]
    fn empty_tokens_is_error() {
        let lex = parse_dic(SMALL).unwrap();
        assert!(profile(&lex, &TokenStream::default(), &[]).is_err());
    }

    #[test]
    fn demo_assets_load() {
        let lex = Lexicon::demo();
        assert!(lex.category_count() >= 40);
        for name in [
            "i", "ppron", "pronoun", "article", "posemo", "negemo", "anxiety", "anger", "sad",
            "affect", "feel", "health", "bio", "power", "work", "friends", "social",
        ] {
            assert!(lex.category_id(name).is_some(), "{name}");
        }
        for s in demo_summaries() {
            s.validate(&lex).unwrap();
        }
        let empath = parse_dic(&word_lists_to_dic(DEMO_EMPATH).unwrap()).unwrap();
        assert!(empath.category_id("nervousness").is_some());
        assert_eq!(
            names(&empath, empath.match_token("sorrowful")),
            ["sadness"]
        );
    }

    #[test]
    fn multi_category_sums_may_exceed_hundred() {
        let lex = Lexicon::demo();
        let p = profile(&lex, &tokenize("i i i"), &[]).unwrap();
        let total: f64 = p.percent.values().sum();
        assert!(total > 100.0);
    }

    #[test]
    fn punctuation_counts() {
        let r = punctuation_rates("Hi, there! Ok.", 3);
        assert!((r["Comma"] - 100.0 / 3.0).abs() < 1e-12);
        assert!((r["AllPunc"] - 100.0).abs() < 1e-12);
    }

    fn demo_vocab() -> Vec<String> {
        let mut v: Vec<String> = Lexicon::demo()
            .exact_entries()
            .map(|(w, _)| w.to_string())
            .collect();
        v.sort();
        v.push("zzfiller".into());
        v.push("feelingly".into());
        v
    }

    proptest! {
        #[test]
        fn nested_categories_dominate(idx in prop::collection::vec(0usize..420, 1..200)) {
            let vocab = demo_vocab();
            let lex = Lexicon::demo();
            let toks = TokenStream::new(idx.iter().map(|&i| vocab[i % vocab.len()].clone()).collect());
            let p = profile(&lex, &toks, &[]).unwrap();
            prop_assert!(p.percent["pronoun"] >= p.percent["ppron"]);
            prop_assert!(p.percent["ppron"] >= p.percent["i"]);
            prop_assert!(p.percent["affect"] >= p.percent["negemo"]);
            prop_assert!(p.percent["negemo"] >= p.percent["sad"]);
            prop_assert!(p.percent["bio"] >= p.percent["health"]);
            for v in p.percent.values() {
                prop_assert!((0.0..=100.0).contains(v));
            }
        }

        #[test]
        fn doubling_a_document_keeps_percentages(idx in prop::collection::vec(0usize..420, 1..200)) {
            let vocab = demo_vocab();
            let lex = Lexicon::demo();
            let toks = TokenStream::new(idx.iter().map(|&i| vocab[i % vocab.len()].clone()).collect());
            let mut doubled = toks.clone();
            doubled.extend(toks.clone());
            let a = profile(&lex, &toks, &[]).unwrap();
            let b = profile(&lex, &doubled, &[]).unwrap();
            prop_assert_eq!(a.percent, b.percent);
        }
    }
}
