//! Behavioral user features and feature-matrix assembly.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::UserDoc;
use crate::error::{Error, Result};
use crate::ingest::RecordKind;
use crate::lexicon::{profile, punctuation_rates, Lexicon, SummaryVariableDef, PUNCTUATION_VARIABLES};
use crate::matrix::{FeatureMatrix, SparseVector, TFIDF_PREFIX};
use crate::textproc::{TfidfModel, TokenStream};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p25: f64,
    pub p75: f64,
    pub p90: f64,
    pub mode: f64,
    pub defined: bool,
}

/// Linear interpolation at rank q*(n-1) of a sorted, non-empty slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Statistics of the gaps between consecutive timestamps (seconds).
///
/// The mode is taken over gaps rounded to whole minutes (smallest on ties)
/// and reported in seconds. Fewer than two timestamps gives all zeros with
/// `defined = false`.
pub fn interval_stats(timestamps: &[i64]) -> IntervalStats {
    if timestamps.len() < 2 {
        return IntervalStats::default();
    }
    let mut gaps: Vec<f64> = timestamps
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64)
        .collect();
    gaps.sort_by(f64::total_cmp);
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;

    let mut minutes: BTreeMap<i64, usize> = BTreeMap::new();
    for g in &gaps {
        *minutes.entry((g / 60.0).round() as i64).or_default() += 1;
    }
    let best = minutes.values().copied().max().unwrap_or(0);
    let mode_minutes = minutes
        .iter()
        .find(|(_, &c)| c == best)
        .map(|(&m, _)| m)
        .unwrap_or(0);

    IntervalStats {
        mean,
        median: percentile(&gaps, 0.5),
        p10: percentile(&gaps, 0.10),
        p25: percentile(&gaps, 0.25),
        p75: percentile(&gaps, 0.75),
        p90: percentile(&gaps, 0.90),
        mode: mode_minutes as f64 * 60.0,
        defined: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehavioralFeatures {
    pub post_comment_ratio: f64,
    pub gilded_count: u64,
    pub mean_controversiality: f64,
    pub mean_score_diff: f64,
    pub intervals: IntervalStats,
}

pub const BEHAVIORAL_NAMES: [&str; 12] = [
    "post_comment_ratio",
    "gilded_count",
    "mean_controversiality",
    "mean_score_diff",
    "interval_mean",
    "interval_median",
    "interval_p10",
    "interval_p25",
    "interval_p75",
    "interval_p90",
    "interval_mode",
    "interval_defined",
];

impl BehavioralFeatures {
    pub fn to_vec(&self) -> [f64; 12] {
        let iv = &self.intervals;
        [
            self.post_comment_ratio,
            self.gilded_count as f64,
            self.mean_controversiality,
            self.mean_score_diff,
            iv.mean,
            iv.median,
            iv.p10,
            iv.p25,
            iv.p75,
            iv.p90,
            iv.mode,
            if iv.defined { 1.0 } else { 0.0 },
        ]
    }
}

/// Interaction-pattern features over a user's retained records.
pub fn behavioral(user: &UserDoc) -> Result<BehavioralFeatures> {
    let recs = &user.comments;
    if recs.is_empty() {
        return Err(Error::Empty(format!("user {} has no records", user.author)));
    }
    let n = recs.len() as f64;
    let posts = recs.iter().filter(|r| r.kind == RecordKind::Post).count();
    let comments = recs.len() - posts;
    let mut ts: Vec<i64> = recs.iter().map(|r| r.created_utc).collect();
    ts.sort_unstable();
    Ok(BehavioralFeatures {
        post_comment_ratio: posts as f64 / (comments as f64 + 1.0),
        gilded_count: recs.iter().map(|r| r.gilded).sum(),
        mean_controversiality: recs.iter().map(|r| r.controversiality as f64).sum::<f64>() / n,
        mean_score_diff: recs.iter().map(|r| (r.ups - r.downs) as f64).sum::<f64>() / n,
        intervals: interval_stats(&ts),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturePart {
    CategoryProfile,
    Tfidf,
    Behavioral,
}

/// One dictionary-based column block, e.g. `liwc` or `empath`.
#[derive(Debug, Clone, Copy)]
pub struct CategoryBlock<'a> {
    pub namespace: &'a str,
    pub lexicon: &'a Lexicon,
    pub summaries: &'a [SummaryVariableDef],
    pub punctuation: bool,
}

impl CategoryBlock<'_> {
    fn column_names(&self) -> Vec<String> {
        let ns = self.namespace;
        let mut names: Vec<String> = self
            .lexicon
            .category_names()
            .map(|c| format!("{ns}:{c}"))
            .collect();
        names.extend(self.summaries.iter().map(|s| format!("{ns}:{}", s.name)));
        if self.punctuation {
            names.extend(PUNCTUATION_VARIABLES.iter().map(|p| format!("{ns}:{p}")));
        }
        names
    }

    fn values(&self, user: &UserDoc, tokens: &TokenStream) -> Result<Vec<f64>> {
        let p = profile(self.lexicon, tokens, self.summaries)
            .map_err(|e| Error::InvalidInput(format!("user {}: {e}", user.author)))?;
        let mut v: Vec<f64> = p.percent.values().copied().collect();
        v.extend(p.summary.values().copied());
        if self.punctuation {
            let text: String = user
                .comments
                .iter()
                .filter(|c| !c.body_is_placeholder())
                .map(|c| c.body.as_str())
                .collect::<Vec<_>>()
                .join("\n");
            v.extend(punctuation_rates(&text, tokens.len()).values().copied());
        }
        Ok(v)
    }
}

/// Fitted models available to [`assemble`].
#[derive(Debug, Clone, Default)]
pub struct FeatureModels<'a> {
    pub profiles: Vec<CategoryBlock<'a>>,
    pub tfidf: Option<&'a TfidfModel>,
}

/// Builds the per-user feature matrix.
///
/// Column blocks come in a fixed order (category profiles, tf-idf,
/// behavioral) with namespaced names such as `liwc:i`, `tfidf:feel` and
/// `user:interval_mean`. Rows are sorted by user id.
pub fn assemble(
    users: &[UserDoc],
    parts: &[FeaturePart],
    models: &FeatureModels<'_>,
) -> Result<FeatureMatrix> {
    if users.is_empty() {
        return Err(Error::Empty("no users to assemble".into()));
    }
    if parts.is_empty() {
        return Err(Error::Config("no feature parts requested".into()));
    }
    let parts: BTreeSet<FeaturePart> = parts.iter().copied().collect();
    let use_profiles = parts.contains(&FeaturePart::CategoryProfile);
    let use_behavioral = parts.contains(&FeaturePart::Behavioral);
    if use_profiles && models.profiles.is_empty() {
        return Err(Error::Config("category profile requested without a lexicon".into()));
    }
    for block in &models.profiles {
        for s in block.summaries {
            s.validate(block.lexicon)?;
        }
    }
    let tfidf = match (parts.contains(&FeaturePart::Tfidf), models.tfidf) {
        (true, None) => return Err(Error::Config("tf-idf requested but no model fitted".into())),
        (true, Some(m)) => Some(m),
        (false, _) => None,
    };

    let mut names = Vec::new();
    if use_profiles {
        for block in &models.profiles {
            names.extend(block.column_names());
        }
    }
    let tfidf_offset = names.len();
    if let Some(m) = tfidf {
        names.extend(m.terms().iter().map(|t| format!("{TFIDF_PREFIX}{t}")));
    }
    let behavioral_offset = names.len();
    if use_behavioral {
        names.extend(BEHAVIORAL_NAMES.iter().map(|n| format!("user:{n}")));
    }

    let mut order: Vec<&UserDoc> = users.iter().collect();
    order.sort_by(|a, b| a.author.cmp(&b.author));
    if let Some(w) = order.windows(2).find(|w| w[0].author == w[1].author) {
        return Err(Error::InvalidInput(format!("duplicate user {}", w[0].author)));
    }

    let rows: Vec<SparseVector> = order
        .par_iter()
        .map(|user| -> Result<SparseVector> {
            let tokens = user.tokens();
            let mut dense = Vec::with_capacity(tfidf_offset);
            if use_profiles {
                for block in &models.profiles {
                    dense.extend(block.values(user, &tokens)?);
                }
            }
            let mut row = SparseVector::from_dense(&dense);
            if let Some(m) = tfidf {
                row.append(&m.transform(&tokens).offset(tfidf_offset));
            }
            if use_behavioral {
                let b = behavioral(user)?.to_vec();
                row.append(&SparseVector::from_dense(&b).offset(behavioral_offset));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    FeatureMatrix::new(
        names,
        order.iter().map(|u| u.author.clone()).collect(),
        order.iter().map(|u| u.label.as_u8()).collect(),
        rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::CommentRecord;
    use crate::lexicon::demo_summaries;
    use crate::matrix::Label;
    use crate::textproc::{fit_tfidf, TfidfParams};
    use proptest::prelude::*;

    fn record(id: &str, kind: RecordKind, ts: i64, body: &str, ups: i64, downs: i64) -> CommentRecord {
        CommentRecord {
            id: id.into(),
            author: "u".into(),
            subreddit: "AskReddit".into(),
            created_utc: ts,
            body: body.into(),
            kind,
            gilded: 1,
            controversiality: 0,
            ups,
            downs,
            flair_text: None,
        }
    }

    fn user(author: &str, label: Label, comments: Vec<CommentRecord>) -> UserDoc {
        let token_count = comments.iter().map(|c| crate::cohort::record_tokens(c).len()).sum();
        UserDoc {
            author: author.into(),
            label,
            token_count,
            categories: Default::default(),
            comments,
        }
    }

    #[test]
    fn interval_examples() {
        let s = interval_stats(&[0, 60, 120]);
        assert_eq!((s.mean, s.median, s.mode), (60.0, 60.0, 60.0));
        let s = interval_stats(&[0, 60, 180]);
        assert_eq!(s.mean, 90.0);
        assert_eq!(s.median, 90.0);
        assert!((s.p10 - 66.0).abs() < 1e-12);
        assert_eq!(s.mode, 60.0);
        let s = interval_stats(&[5]);
        assert!(!s.defined);
        assert_eq!(s, IntervalStats::default());
    }

    #[test]
    fn mode_uses_minute_rounding() {
        // gaps 61, 59, 300 -> minutes 1, 1, 5
        let s = interval_stats(&[0, 61, 120, 420]);
        assert_eq!(s.mode, 60.0);
    }

    #[test]
    fn behavioral_examples() {
        let mut recs = vec![
            record("t3_a", RecordKind::Post, 10, "x", 5, 0),
            record("t3_b", RecordKind::Post, 20, "x", 0, 1),
        ];
        for i in 0..3 {
            recs.push(record(&format!("t1_{i}"), RecordKind::Comment, 30 + i, "x", 0, 0));
        }
        let b = behavioral(&user("u", Label::Control, recs)).unwrap();
        assert_eq!(b.post_comment_ratio, 0.5);
        assert_eq!(b.gilded_count, 5);
        assert_eq!(b.mean_controversiality, 0.0);

        let recs = vec![
            record("t1_a", RecordKind::Comment, 10, "x", 5, 0),
            record("t1_b", RecordKind::Comment, 20, "x", 0, 1),
        ];
        assert_eq!(behavioral(&user("u", Label::Control, recs)).unwrap().mean_score_diff, 2.0);
        assert!(behavioral(&user("u", Label::Control, vec![])).is_err());
    }

    fn two_users() -> Vec<UserDoc> {
        vec![
            user(
                "zed",
                Label::Control,
                vec![record("t1_1", RecordKind::Comment, 100, "we love the game today", 2, 0)],
            ),
            user(
                "amy",
                Label::Bipolar,
                vec![
                    record("t1_2", RecordKind::Comment, 100, "i feel sad and i cry", 1, 0),
                    record("t3_3", RecordKind::Post, 400, "my doctor said hello", 3, 1),
                ],
            ),
        ]
    }

    #[test]
    fn assemble_behavioral_only() {
        let m = assemble(&two_users(), &[FeaturePart::Behavioral], &FeatureModels::default()).unwrap();
        assert_eq!((m.len(), m.width()), (2, 12));
        assert_eq!(m.user_ids, ["amy", "zed"]);
        assert_eq!(m.labels, [1, 0]);
        assert_eq!(m.feature_names[4], "user:interval_mean");
        assert_eq!(m.rows[0].get(4), 300.0);
    }

    #[test]
    fn assemble_profiles_and_all() {
        let lex = Lexicon::demo();
        let sums = demo_summaries();
        let users = two_users();
        let docs: Vec<_> = users.iter().map(UserDoc::tokens).collect();
        let tfidf = fit_tfidf(&docs, TfidfParams { min_df: 1, max_features: None }).unwrap();
        let models = FeatureModels {
            profiles: vec![CategoryBlock { namespace: "liwc", lexicon: &lex, summaries: &sums, punctuation: false }],
            tfidf: Some(&tfidf),
        };
        let prof = assemble(&users, &[FeaturePart::CategoryProfile], &models).unwrap();
        assert_eq!(prof.width(), lex.category_count() + sums.len());
        assert!(prof.column_index("liwc:i").is_some());
        assert!(prof.column_index("liwc:Authentic").is_some());

        let all = assemble(
            &users,
            &[FeaturePart::Behavioral, FeaturePart::Tfidf, FeaturePart::CategoryProfile],
            &models,
        )
        .unwrap();
        assert_eq!(all.width(), prof.width() + tfidf.len() + 12);
        assert!(all.feature_names[prof.width()].starts_with("tfidf:"));
        assert_eq!(all.feature_names.last().unwrap(), "user:interval_defined");

        // dropping a part leaves the others untouched
        let no_tfidf = all.select_columns(|n| !n.starts_with("tfidf:"));
        let direct = assemble(&users, &[FeaturePart::CategoryProfile, FeaturePart::Behavioral], &models).unwrap();
        assert_eq!(no_tfidf, direct);
        assert_eq!(all.to_csv_string().unwrap(), assemble(&users, &[FeaturePart::CategoryProfile, FeaturePart::Tfidf, FeaturePart::Behavioral], &models).unwrap().to_csv_string().unwrap());
    }

    #[test]
    fn assemble_errors() {
        let users = two_users();
        assert!(assemble(&[], &[FeaturePart::Behavioral], &FeatureModels::default()).is_err());
        assert!(assemble(&users, &[FeaturePart::Tfidf], &FeatureModels::default()).is_err());
        assert!(assemble(&users, &[FeaturePart::CategoryProfile], &FeatureModels::default()).is_err());
    }

    proptest! {
        #[test]
        fn percentiles_are_ordered(mut ts in prop::collection::vec(0i64..10_000_000, 0..40)) {
            ts.sort_unstable();
            let s = interval_stats(&ts);
            if s.defined {
                prop_assert!(s.p10 <= s.p25 && s.p25 <= s.median && s.median <= s.p75 && s.p75 <= s.p90);
            } else {
                prop_assert_eq!(s, IntervalStats::default());
            }
        }
    }
}
