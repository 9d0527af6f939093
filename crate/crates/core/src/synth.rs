//! Synthetic corpora with planted group differences.
//!
//! Tokens are drawn from a per-user categorical distribution over lexicon
//! categories plus a filler vocabulary that matches no category, so every
//! category percentage has a known expectation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CommentRecord, RecordKind, MAX_CREATED_UTC, MIN_CREATED_UTC};
use crate::lexicon::Lexicon;
use crate::matrix::Label;
use crate::rng::rng_for;

pub const PLANTED_SPEC: &str = include_str!("../data/synth/planted.json");
pub const NULL_SPEC: &str = include_str!("../data/synth/null.json");
pub const OSCILLATOR_SPEC: &str = include_str!("../data/synth/oscillator.json");
pub const MINI_SPEC: &str = include_str!("../data/synth/mini.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubredditSpec {
    pub name: String,
    /// Relative posting weight for each group; 0 means never.
    #[serde(default = "one")]
    pub bipolar_weight: f64,
    #[serde(default = "one")]
    pub control_weight: f64,
}

fn one() -> f64 {
    1.0
}

fn default_interval() -> f64 {
    86_400.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub n_users: usize,
    /// Expected fraction of tokens emitted from each category.
    #[serde(default)]
    pub rates: BTreeMap<String, f64>,
    /// Relative standard deviation of each user's rates around `rates`.
    #[serde(default)]
    pub jitter: f64,
    /// Rate multipliers by month since the user's first comment, cycled.
    #[serde(default)]
    pub oscillation: BTreeMap<String, Vec<f64>>,
    /// Mean of the exponential gap between consecutive comments, seconds.
    #[serde(default = "default_interval")]
    pub interval_mean_secs: f64,
    #[serde(default)]
    pub post_share: f64,
    #[serde(default)]
    pub gilded_rate: f64,
    #[serde(default)]
    pub controversial_rate: f64,
    #[serde(default)]
    pub max_ups: i64,
}

fn default_start() -> i64 {
    // 2015-01-01
    1_420_070_400
}

fn default_disorder() -> String {
    "bipolar".into()
}

fn default_report() -> String {
    "I was diagnosed with bipolar disorder a while ago".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start_utc: i64,
    pub comments_per_user: Span,
    pub tokens_per_comment: Span,
    pub subreddits: Vec<SubredditSpec>,
    #[serde(default = "default_disorder")]
    pub disorder_subreddit: String,
    /// Probability that a bipolar-group user posts a self-report.
    #[serde(default = "one")]
    pub self_report_rate: f64,
    #[serde(default = "default_report")]
    pub self_report_text: String,
    pub bipolar: GroupSpec,
    pub control: GroupSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub seed: u64,
    pub labels: BTreeMap<String, Label>,
    pub self_reported: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<CommentRecord>,
    pub truth: SynthTruth,
}

impl SynthSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("synth spec: {e}")))
    }

    pub fn planted() -> Self {
        Self::from_json(PLANTED_SPEC).expect("bundled spec parses")
    }

    pub fn null() -> Self {
        Self::from_json(NULL_SPEC).expect("bundled spec parses")
    }

    pub fn oscillator() -> Self {
        Self::from_json(OSCILLATOR_SPEC).expect("bundled spec parses")
    }

    pub fn mini() -> Self {
        Self::from_json(MINI_SPEC).expect("bundled spec parses")
    }

    pub fn validate(&self, lexicon: &Lexicon) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synth spec: {m}")));
        for (name, s) in [("comments_per_user", self.comments_per_user), ("tokens_per_comment", self.tokens_per_comment)] {
            if s.min > s.max {
                return bad(format!("{name}: min {} > max {}", s.min, s.max));
            }
        }
        if self.tokens_per_comment.min == 0 {
            return bad("tokens_per_comment.min must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.self_report_rate) {
            return bad("self_report_rate must be in [0, 1]".into());
        }
        if !(MIN_CREATED_UTC..MAX_CREATED_UTC).contains(&self.start_utc) {
            return bad(format!("start_utc {} outside the accepted range", self.start_utc));
        }
        for (gname, g) in [("bipolar", &self.bipolar), ("control", &self.control)] {
            if subreddit_weights(self, gname == "bipolar").iter().all(|&w| w <= 0.0) && self.comments_per_user.max > 0 {
                return bad(format!("{gname}: no subreddit with positive weight"));
            }
            for (cat, &r) in &g.rates {
                if lexicon.category_id(cat).is_none() {
                    return bad(format!("{gname}: unknown category {cat:?}"));
                }
                if !(0.0..=1.0).contains(&r) {
                    return bad(format!("{gname}: rate for {cat} outside [0, 1]"));
                }
            }
            for (cat, m) in &g.oscillation {
                if !g.rates.contains_key(cat) {
                    return bad(format!("{gname}: oscillation for {cat} without a rate"));
                }
                if m.is_empty() || m.iter().any(|&x| !(x >= 0.0)) {
                    return bad(format!("{gname}: oscillation for {cat} needs non-negative multipliers"));
                }
            }
            let peak: f64 = g
                .rates
                .iter()
                .map(|(c, r)| r * g.oscillation.get(c).map_or(1.0, |m| m.iter().cloned().fold(0.0, f64::max)))
                .sum();
            if peak > 1.0 + 1e-12 {
                return bad(format!("{gname}: category rates sum to {peak} > 1"));
            }
            if !(g.jitter >= 0.0) || !(g.interval_mean_secs > 0.0) {
                return bad(format!("{gname}: jitter and interval_mean_secs must be positive"));
            }
            for (n, p) in [("post_share", g.post_share), ("gilded_rate", g.gilded_rate), ("controversial_rate", g.controversial_rate)] {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("{gname}: {n} outside [0, 1]"));
                }
            }
        }
        Ok(())
    }
}

fn subreddit_weights(spec: &SynthSpec, bipolar: bool) -> Vec<f64> {
    spec.subreddits
        .iter()
        .map(|s| if bipolar { s.bipolar_weight } else { s.control_weight })
        .collect()
}

/// Words that each emitted category draws from.
pub struct Vocabulary {
    pub words: BTreeMap<String, Vec<String>>,
    pub filler: Vec<String>,
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "zu", "ve", "tro", "quin", "dax", "pel", "sor", "bri", "nok", "gau", "yel", "fim", "ruz",
];

impl Vocabulary {
    /// For each emitted category: lexicon words carrying that category and
    /// no other emitted one. Filler words match no category at all.
    pub fn build(lexicon: &Lexicon, emitted: &BTreeSet<String>, banned: &BTreeSet<String>) -> Result<Self> {
        let ids: BTreeMap<u32, &String> = emitted
            .iter()
            .map(|c| {
                lexicon
                    .category_id(c)
                    .map(|id| (id, c))
                    .ok_or_else(|| Error::Config(format!("unknown category {c:?}")))
            })
            .collect::<Result<_>>()?;
        let mut words: BTreeMap<String, Vec<String>> = emitted.iter().map(|c| (c.clone(), Vec::new())).collect();
        for (w, cats) in lexicon.exact_entries() {
            if banned.contains(w) || !w.bytes().all(|b| b.is_ascii_lowercase()) {
                continue;
            }
            let hits: Vec<&String> = cats.iter().filter_map(|id| ids.get(id).copied()).collect();
            if let [only] = hits[..] {
                words.get_mut(only).expect("emitted").push(w.to_string());
            }
        }
        for (c, ws) in &mut words {
            if ws.is_empty() {
                return Err(Error::Config(format!("no lexicon words isolate category {c:?}")));
            }
            ws.sort();
        }
        let mut filler = Vec::new();
        'outer: for a in SYLLABLES {
            for b in SYLLABLES {
                let w = format!("{a}{b}");
                if lexicon.match_token(&w).is_empty() && !banned.contains(&w) {
                    filler.push(w);
                }
                if filler.len() >= 200 {
                    break 'outer;
                }
            }
        }
        Ok(Self { words, filler })
    }
}

struct UserPlan<'a> {
    author: String,
    label: Label,
    self_report: bool,
    group: &'a GroupSpec,
    weights: Vec<f64>,
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn months_between(a: i64, b: i64) -> usize {
    use chrono::{DateTime, Datelike};
    let da = DateTime::from_timestamp(a, 0).expect("valid timestamp");
    let db = DateTime::from_timestamp(b, 0).expect("valid timestamp");
    ((db.year() - da.year()) * 12 + db.month() as i32 - da.month() as i32).max(0) as usize
}

fn generate_user(spec: &SynthSpec, vocab: &Vocabulary, plan: &UserPlan<'_>, index: usize) -> Vec<CommentRecord> {
    let mut rng = rng_for(spec.seed, &[1, index as u64]);
    let g = plan.group;
    let cats: Vec<&String> = g.rates.keys().collect();
    let user_rates: Vec<f64> = cats
        .iter()
        .map(|c| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (g.rates[*c] * (1.0 + g.jitter * z)).max(0.0)
        })
        .collect();
    let n = rng.gen_range(spec.comments_per_user.min..=spec.comments_per_user.max);
    let gap = Exp::new(1.0 / g.interval_mean_secs).expect("positive interval");
    let mut t = spec.start_utc + rng.gen_range(0..30 * 86_400);
    let first = t;
    let mut out = Vec::with_capacity(n + 1);
    let mut push = |rng: &mut rand_chacha::ChaCha8Rng, t: i64, sub: &str, body: String, k: usize| {
        let kind = if rng.gen::<f64>() < g.post_share { RecordKind::Post } else { RecordKind::Comment };
        out.push(CommentRecord {
            id: format!("{}_{k:04}", plan.author),
            author: plan.author.clone(),
            subreddit: sub.to_string(),
            created_utc: t,
            body,
            kind,
            gilded: u64::from(rng.gen::<f64>() < g.gilded_rate),
            controversiality: u8::from(rng.gen::<f64>() < g.controversial_rate),
            ups: if g.max_ups > 0 { rng.gen_range(0..=g.max_ups) } else { 0 },
            downs: rng.gen_range(0..=2),
            flair_text: None,
        });
    };
    let mut k = 0;
    if plan.self_report {
        push(&mut rng, t, &spec.disorder_subreddit, spec.self_report_text.clone(), k);
        k += 1;
    }
    for _ in 0..n {
        t = (t + gap.sample(&mut rng).round() as i64).min(MAX_CREATED_UTC - 1);
        let month = months_between(first, t);
        let rates: Vec<f64> = cats
            .iter()
            .zip(&user_rates)
            .map(|(c, r)| r * g.oscillation.get(*c).map_or(1.0, |m| m[month % m.len()]))
            .collect();
        let total: f64 = rates.iter().sum();
        let scale = if total > 1.0 { 1.0 / total } else { 1.0 };
        let len = rng.gen_range(spec.tokens_per_comment.min..=spec.tokens_per_comment.max);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let mut u = rng.gen::<f64>();
            let mut chosen = None;
            for (ci, r) in rates.iter().enumerate() {
                let r = r * scale;
                if u < r {
                    chosen = Some(ci);
                    break;
                }
                u -= r;
            }
            let pool = match chosen {
                Some(ci) => &vocab.words[cats[ci]],
                None => &vocab.filler,
            };
            words.push(pool.choose(&mut rng).expect("non-empty pool").as_str());
        }
        let sub = &spec.subreddits[pick_weighted(&mut rng, &plan.weights)].name;
        push(&mut rng, t, sub, words.join(" "), k);
        k += 1;
    }
    out
}

/// Generates the corpus described by `spec`. Output is ordered by author,
/// then by time, and depends only on the spec.
pub fn generate_corpus(spec: &SynthSpec, lexicon: &Lexicon, banned: &BTreeSet<String>) -> Result<SynthCorpus> {
    spec.validate(lexicon)?;
    let emitted: BTreeSet<String> = spec.bipolar.rates.keys().chain(spec.control.rates.keys()).cloned().collect();
    let vocab = Vocabulary::build(lexicon, &emitted, banned)?;

    let n_total = spec.bipolar.n_users + spec.control.n_users;
    let mut slots: Vec<usize> = (0..n_total).collect();
    slots.shuffle(&mut rng_for(spec.seed, &[0]));
    let mut report_rng = rng_for(spec.seed, &[2]);
    let plans: Vec<UserPlan<'_>> = (0..n_total)
        .map(|i| {
            let bip = i < spec.bipolar.n_users;
            let group = if bip { &spec.bipolar } else { &spec.control };
            let draw: f64 = report_rng.gen();
            UserPlan {
                author: format!("user{:05}", slots[i]),
                label: if bip { Label::Bipolar } else { Label::Control },
                self_report: bip && draw < spec.self_report_rate,
                group,
                weights: subreddit_weights(spec, bip),
            }
        })
        .collect();
    let per_user: Vec<Vec<CommentRecord>> = plans
        .par_iter()
        .enumerate()
        .map(|(i, p)| generate_user(spec, &vocab, p, i))
        .collect();

    let mut truth = SynthTruth {
        seed: spec.seed,
        labels: BTreeMap::new(),
        self_reported: BTreeSet::new(),
    };
    for p in &plans {
        truth.labels.insert(p.author.clone(), p.label);
        if p.self_report {
            truth.self_reported.insert(p.author.clone());
        }
    }
    let mut order: Vec<usize> = (0..plans.len()).collect();
    order.sort_by(|&a, &b| plans[a].author.cmp(&plans[b].author));
    let records = order.into_iter().flat_map(|i| per_user[i].clone()).collect();
    Ok(SynthCorpus { records, truth })
}

impl SynthCorpus {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            writeln!(w, "{}", r.to_json_line())?;
        }
        w.flush()
    }

    /// Writes the dump and the truth file.
    pub fn write(&self, corpus: &Path, truth: &Path) -> Result<()> {
        let f = std::fs::File::create(corpus).map_err(|e| Error::io(corpus, e))?;
        self.write_jsonl(std::io::BufWriter::new(f)).map_err(|e| Error::io(corpus, e))?;
        let json = serde_json::to_string_pretty(&self.truth)?;
        std::fs::write(truth, json + "\n").map_err(|e| Error::io(truth, e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::tokenize;

    fn banned() -> BTreeSet<String> {
        ["bipolar", "bp"].iter().map(|s| s.to_string()).collect()
    }

    fn small(seed: u64) -> SynthSpec {
        let mut s = SynthSpec::mini();
        s.seed = seed;
        s
    }

    #[test]
    fn bundled_specs_validate() {
        let lex = Lexicon::demo();
        for s in [SynthSpec::planted(), SynthSpec::null(), SynthSpec::oscillator(), SynthSpec::mini()] {
            s.validate(&lex).unwrap();
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let lex = Lexicon::demo();
        let bytes = |seed| {
            let c = generate_corpus(&small(seed), &lex, &banned()).unwrap();
            let mut v = Vec::new();
            c.write_jsonl(&mut v).unwrap();
            v
        };
        assert_eq!(bytes(3), bytes(3));
        assert_ne!(bytes(3), bytes(4));
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let lex = Lexicon::demo();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| generate_corpus(&small(9), &lex, &banned()).unwrap().records)
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn zero_comments_gives_empty_corpus() {
        let lex = Lexicon::demo();
        let mut s = small(1);
        s.comments_per_user = Span { min: 0, max: 0 };
        s.self_report_rate = 0.0;
        let c = generate_corpus(&s, &lex, &banned()).unwrap();
        assert!(c.records.is_empty());
        assert_eq!(c.truth.labels.len(), s.bipolar.n_users + s.control.n_users);
    }

    #[test]
    fn filler_and_vocabulary_are_clean() {
        let lex = Lexicon::demo();
        let emitted: BTreeSet<String> = ["posemo", "work", "money"].iter().map(|s| s.to_string()).collect();
        let v = Vocabulary::build(&lex, &emitted, &banned()).unwrap();
        assert!(v.filler.len() >= 100);
        for w in &v.filler {
            assert!(lex.match_token(w).is_empty(), "{w}");
        }
        let posemo = lex.category_id("posemo").unwrap();
        for w in &v.words["posemo"] {
            assert!(lex.match_token(w).contains(&posemo));
            assert!(!banned().contains(w));
        }
    }

    #[test]
    fn category_frequencies_match_rates() {
        let lex = Lexicon::demo();
        let mut s = small(5);
        s.bipolar.n_users = 1;
        s.control.n_users = 0;
        s.self_report_rate = 0.0;
        s.bipolar.jitter = 0.0;
        s.bipolar.oscillation.clear();
        s.bipolar.rates = [("posemo", 0.05), ("work", 0.02), ("money", 0.1)]
            .iter()
            .map(|(c, r)| (c.to_string(), *r))
            .collect();
        s.comments_per_user = Span { min: 200, max: 200 };
        s.tokens_per_comment = Span { min: 100, max: 100 };
        let c = generate_corpus(&s, &lex, &banned()).unwrap();
        let mut tokens = crate::textproc::TokenStream::default();
        for r in &c.records {
            tokens.extend(tokenize(&r.body));
        }
        let n = tokens.len() as f64;
        assert!(n >= 1e4);
        let counts = lex.count(&tokens);
        let names: Vec<&str> = lex.category_names().collect();
        for (cat, rate) in &s.bipolar.rates {
            let k = counts[names.iter().position(|x| x == cat).unwrap()] as f64;
            let sd = (n * rate * (1.0 - rate)).sqrt();
            assert!((k - n * rate).abs() < 3.0 * sd, "{cat}: {k} vs {}", n * rate);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let lex = Lexicon::demo();
        let mut s = small(1);
        s.bipolar.rates.insert("nosuch".into(), 0.1);
        assert!(matches!(generate_corpus(&s, &lex, &banned()), Err(Error::Config(_))));
        let mut s = small(1);
        s.control.rates.insert("work".into(), 0.99);
        assert!(s.validate(&lex).is_err());
        let mut s = small(1);
        s.tokens_per_comment = Span { min: 5, max: 2 };
        assert!(s.validate(&lex).is_err());
    }
}
