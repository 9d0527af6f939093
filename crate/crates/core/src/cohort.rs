//! Cohort construction: self-report detection, pruning, control selection and
//! topic categories.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CommentRecord, GroupedCorpus};
use crate::matrix::Label;
use crate::textproc::{tokenize, TokenStream};

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Where self-report statements are searched for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchScope {
    #[default]
    DisorderSubreddits,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub bipolar_subreddits: BTreeSet<String>,
    pub mentalhealth_subreddits: BTreeSet<String>,
    /// Extra subreddits counted as mental-health related when excluding
    /// control candidates (on top of the two sets above).
    pub mental_health_related: BTreeSet<String>,
    pub self_report_patterns: Vec<String>,
    pub self_report_scope: SearchScope,
    pub flair_keywords: Vec<String>,
    pub mention_words: BTreeSet<String>,
    pub min_words: usize,
    pub control_mh_max_words: usize,
    pub category_min_words: usize,
    pub category_map: BTreeMap<String, BTreeSet<String>>,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            bipolar_subreddits: set(&[
                "bipolar",
                "bipolar2",
                "BipolarReddit",
                "BipolarSOs",
                "bipolarart",
            ]),
            mentalhealth_subreddits: set(&["mentalhealth"]),
            mental_health_related: set(&[
                "depression",
                "Anxiety",
                "SuicideWatch",
                "BPD",
                "ptsd",
                "mentalillness",
                "ADHD",
                "schizophrenia",
                "OCD",
                "therapy",
            ]),
            self_report_patterns: [
                "i am diagnosed with bipolar",
                "i'm diagnosed with bipolar",
                "i was diagnosed with bipolar",
                "i've been diagnosed with bipolar",
                "i have been diagnosed with bipolar",
                "i got diagnosed with bipolar",
                "diagnosed me with bipolar",
            ]
            .map(String::from)
            .to_vec(),
            self_report_scope: SearchScope::DisorderSubreddits,
            flair_keywords: vec!["bipolar".into(), "bp".into()],
            mention_words: set(&["bipolar", "bp"]),
            min_words: 1000,
            control_mh_max_words: 1000,
            category_min_words: 1000,
            category_map: default_category_map(),
        }
    }
}

/// Nine topic categories with a handful of representative subreddits each.
pub fn default_category_map() -> BTreeMap<String, BTreeSet<String>> {
    [
        ("Animals", &["aww", "dogs", "cats", "animals", "AnimalsBeingBros", "Pets"][..]),
        (
            "AskReddit",
            &["AskReddit", "CasualConversation", "Showerthoughts", "NoStupidQuestions", "todayilearned"],
        ),
        ("Gaming", &["gaming", "Games", "pcgaming", "leagueoflegends", "Minecraft", "pokemon"]),
        (
            "Jobs and finance",
            &["jobs", "personalfinance", "financialindependence", "careerguidance", "Frugal"],
        ),
        ("Movies/music/books", &["movies", "Music", "books", "television", "listentothis"]),
        ("Politics", &["politics", "worldnews", "news", "PoliticalDiscussion", "Conservative"]),
        ("Religion", &["Christianity", "atheism", "religion", "Judaism", "islam"]),
        (
            "Sex and relationships",
            &["sex", "relationships", "relationship_advice", "dating_advice", "AskWomen", "AskMen"],
        ),
        ("Sports", &["sports", "nba", "nfl", "soccer", "hockey", "baseball"]),
    ]
    .into_iter()
    .map(|(c, subs)| (c.to_string(), set(subs)))
    .collect()
}

fn lower_set(s: &BTreeSet<String>) -> BTreeSet<String> {
    s.iter().map(|x| x.to_lowercase()).collect()
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_words == 0 {
            return Err(Error::Config("min_words must be positive".into()));
        }
        if self.self_report_patterns.iter().all(|p| p.trim().is_empty())
            && self.flair_keywords.is_empty()
        {
            return Err(Error::Config(
                "need at least one self-report pattern or flair keyword".into(),
            ));
        }
        Ok(())
    }

    /// Subreddits whose comments are dropped from bipolar users (lowercase).
    pub fn disorder_subreddits(&self) -> BTreeSet<String> {
        lower_set(&self.bipolar_subreddits)
            .into_iter()
            .chain(lower_set(&self.mentalhealth_subreddits))
            .collect()
    }

    /// Everything counted as mental-health related for control exclusion.
    pub fn mental_health_subreddits(&self) -> BTreeSet<String> {
        self.disorder_subreddits()
            .into_iter()
            .chain(lower_set(&self.mental_health_related))
            .collect()
    }
}

/// Compiled self-report phrases. Each phrase matches case-insensitively as a
/// whole phrase, with any run of whitespace between its words.
#[derive(Debug, Clone)]
pub struct SelfReportPatterns {
    regexes: Vec<Regex>,
}

impl SelfReportPatterns {
    pub fn compile<S: AsRef<str>>(patterns: &[S]) -> Result<Self> {
        let regexes = patterns
            .iter()
            .map(|p| p.as_ref().replace('\u{2019}', "'"))
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                let body = p
                    .split_whitespace()
                    .map(regex::escape)
                    .collect::<Vec<_>>()
                    .join(r"\s+");
                Regex::new(&format!(r"(?i)\b{body}\b"))
                    .map_err(|e| Error::Config(format!("self-report pattern {p:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { regexes })
    }

    pub fn matches(&self, body: &str) -> bool {
        let body = body.replace('\u{2019}', "'");
        self.regexes.iter().any(|r| r.is_match(&body))
    }
}

pub fn detect_self_report(body: &str, patterns: &SelfReportPatterns) -> bool {
    patterns.matches(body)
}

/// True iff a flair is present and contains any keyword, ignoring case.
pub fn detect_flair<S: AsRef<str>>(flair_text: Option<&str>, keywords: &[S]) -> bool {
    let Some(flair) = flair_text else {
        return false;
    };
    let flair = flair.to_lowercase();
    keywords
        .iter()
        .map(|k| k.as_ref().to_lowercase())
        .any(|k| !k.is_empty() && flair.contains(&k))
}

/// True if `body` contains any of `words` as a whole word. Word boundaries are
/// any non-alphanumeric character, so `bp's` mentions `bp` but `bipolarity`
/// does not mention `bipolar`.
pub fn mentions_any(body: &str, words: &BTreeSet<String>) -> bool {
    body.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .any(|w| !w.is_empty() && words.contains(w))
}

/// Tokens of one record; placeholder bodies yield none.
pub fn record_tokens(r: &CommentRecord) -> TokenStream {
    if r.body_is_placeholder() {
        TokenStream::default()
    } else {
        tokenize(&r.body)
    }
}

fn record_token_count(r: &CommentRecord) -> usize {
    record_tokens(r).len()
}

/// A user admitted to a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDoc {
    pub author: String,
    pub label: Label,
    pub token_count: usize,
    pub categories: BTreeSet<String>,
    pub comments: Vec<CommentRecord>,
}

impl UserDoc {
    /// All tokens in comment order.
    pub fn tokens(&self) -> TokenStream {
        let mut out = TokenStream::default();
        for c in &self.comments {
            out.extend(record_tokens(c));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejected {
    BelowMinWords { token_count: usize, min_words: usize },
}

/// Users whose self-report or flair appears in the searched subreddits.
pub fn build_bipolar_cohort(corpus: &GroupedCorpus, cfg: &CohortConfig) -> Result<BTreeSet<String>> {
    let patterns = SelfReportPatterns::compile(&cfg.self_report_patterns)?;
    let disorder = cfg.disorder_subreddits();
    let found: Vec<&String> = corpus
        .par_iter()
        .filter(|(_, records)| {
            records.iter().any(|r| {
                let in_disorder = disorder.contains(&r.subreddit.to_lowercase());
                let text_scope = in_disorder || cfg.self_report_scope == SearchScope::Global;
                (text_scope && patterns.matches(&r.body))
                    || (in_disorder && detect_flair(r.flair_text.as_deref(), &cfg.flair_keywords))
            })
        })
        .map(|(a, _)| a)
        .collect();
    Ok(found.into_iter().cloned().collect())
}

/// Per-category token totals over the user's comments.
fn category_tokens(
    comments: &[CommentRecord],
    category_map: &BTreeMap<String, BTreeSet<String>>,
) -> BTreeMap<String, usize> {
    let mut by_sub: HashMap<String, usize> = HashMap::new();
    for c in comments {
        *by_sub.entry(c.subreddit.to_lowercase()).or_default() += record_token_count(c);
    }
    category_map
        .iter()
        .map(|(cat, subs)| {
            let n = subs
                .iter()
                .map(|s| by_sub.get(&s.to_lowercase()).copied().unwrap_or(0))
                .sum();
            (cat.clone(), n)
        })
        .collect()
}

/// Categories in which the user wrote at least `min_words` tokens.
pub fn assign_topic_categories(
    user: &UserDoc,
    category_map: &BTreeMap<String, BTreeSet<String>>,
    min_words: usize,
) -> BTreeSet<String> {
    category_tokens(&user.comments, category_map)
        .into_iter()
        .filter(|(_, n)| *n >= min_words)
        .map(|(c, _)| c)
        .collect()
}

fn make_doc(author: &str, label: Label, comments: Vec<CommentRecord>, cfg: &CohortConfig) -> UserDoc {
    let token_count = comments.iter().map(record_token_count).sum();
    let mut doc = UserDoc {
        author: author.to_string(),
        label,
        token_count,
        categories: BTreeSet::new(),
        comments,
    };
    doc.categories = assign_topic_categories(&doc, &cfg.category_map, cfg.category_min_words);
    doc
}

/// Drops a bipolar user's comments on disorder subreddits and any comment
/// mentioning a mention word, then applies the minimum-token rule.
pub fn prune_user(
    author: &str,
    records: &[CommentRecord],
    cfg: &CohortConfig,
) -> Result<UserDoc, Rejected> {
    let disorder = cfg.disorder_subreddits();
    let mention: BTreeSet<String> = lower_set(&cfg.mention_words);
    let kept: Vec<CommentRecord> = records
        .iter()
        .filter(|r| !disorder.contains(&r.subreddit.to_lowercase()))
        .filter(|r| !mentions_any(&r.body, &mention))
        .cloned()
        .collect();
    let doc = make_doc(author, Label::Bipolar, kept, cfg);
    if doc.token_count < cfg.min_words {
        return Err(Rejected::BelowMinWords {
            token_count: doc.token_count,
            min_words: cfg.min_words,
        });
    }
    Ok(doc)
}

/// Subreddits where the bipolar group posts more than the average share.
///
/// Share f(s) = bipolar comments in s / all bipolar comments, over
/// subreddits outside the disorder set; eligible iff f(s) exceeds the
/// unweighted mean of f.
pub fn eligible_control_subreddits(
    corpus: &GroupedCorpus,
    bipolar_authors: &BTreeSet<String>,
    cfg: &CohortConfig,
) -> BTreeSet<String> {
    let disorder = cfg.disorder_subreddits();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for author in bipolar_authors {
        for r in corpus.get(author).into_iter().flatten() {
            let s = r.subreddit.to_lowercase();
            if !disorder.contains(&s) {
                *counts.entry(s).or_default() += 1;
            }
        }
    }
    let total: usize = counts.values().sum();
    if total == 0 {
        return BTreeSet::new();
    }
    let shares: Vec<(String, f64)> = counts
        .into_iter()
        .map(|(s, c)| (s, c as f64 / total as f64))
        .collect();
    let mean = shares.iter().map(|(_, f)| f).sum::<f64>() / shares.len() as f64;
    shares
        .into_iter()
        .filter(|(_, f)| *f > mean)
        .map(|(s, _)| s)
        .collect()
}

/// Control candidates: not in the bipolar set, active in an eligible
/// subreddit, at most `control_mh_max_words` tokens on mental-health
/// subreddits and at least `min_words` tokens overall.
pub fn select_control(
    corpus: &GroupedCorpus,
    bipolar_authors: &BTreeSet<String>,
    cfg: &CohortConfig,
) -> BTreeSet<String> {
    let eligible = eligible_control_subreddits(corpus, bipolar_authors, cfg);
    let mh = cfg.mental_health_subreddits();
    let chosen: Vec<&String> = corpus
        .par_iter()
        .filter(|(author, _)| !bipolar_authors.contains(*author))
        .filter(|(_, records)| {
            if !records
                .iter()
                .any(|r| eligible.contains(&r.subreddit.to_lowercase()))
            {
                return false;
            }
            let mut total = 0;
            let mut mh_tokens = 0;
            for r in records.iter() {
                let n = record_token_count(r);
                total += n;
                if mh.contains(&r.subreddit.to_lowercase()) {
                    mh_tokens += n;
                }
            }
            mh_tokens <= cfg.control_mh_max_words && total >= cfg.min_words
        })
        .map(|(a, _)| a)
        .collect();
    chosen.into_iter().cloned().collect()
}

/// Control users keep all their comments.
pub fn admit_control(author: &str, records: &[CommentRecord], cfg: &CohortConfig) -> UserDoc {
    make_doc(author, Label::Control, records.to_vec(), cfg)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CohortResult {
    pub bipolar: Vec<UserDoc>,
    pub control: Vec<UserDoc>,
    /// Self-reporting users that did not survive pruning.
    pub rejected: BTreeMap<String, Rejected>,
    pub eligible_subreddits: BTreeSet<String>,
}

/// Runs detection, pruning and control selection over a grouped corpus.
/// Output lists are in author order.
pub fn build_cohorts(corpus: &GroupedCorpus, cfg: &CohortConfig) -> Result<CohortResult> {
    cfg.validate()?;
    let detected = build_bipolar_cohort(corpus, cfg)?;
    let pruned: Vec<(String, Result<UserDoc, Rejected>)> = detected
        .par_iter()
        .map(|a| (a.clone(), prune_user(a, &corpus[a], cfg)))
        .collect();
    let mut result = CohortResult {
        eligible_subreddits: eligible_control_subreddits(corpus, &detected, cfg),
        ..Default::default()
    };
    for (author, outcome) in pruned {
        match outcome {
            Ok(doc) => result.bipolar.push(doc),
            Err(r) => {
                result.rejected.insert(author, r);
            }
        }
    }
    let control = select_control(corpus, &detected, cfg);
    result.control = control
        .par_iter()
        .map(|a| admit_control(a, &corpus[a], cfg))
        .collect();
    Ok(result)
}
