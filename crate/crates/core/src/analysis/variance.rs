//! Month-to-month variability of category usage.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dist, format_p, welch_ttest};
use crate::cohort::{record_tokens, UserDoc};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::rng::rng_for;
use crate::textproc::TokenStream;

/// UTC calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonthKey {
    pub year: i32,
    pub month: u32,
}

impl std::fmt::Display for MonthKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl MonthKey {
    pub fn of(created_utc: i64) -> Option<MonthKey> {
        DateTime::from_timestamp(created_utc, 0).map(|d| MonthKey {
            year: d.year(),
            month: d.month(),
        })
    }
}

/// Buckets a user's tokens by month, dropping months under `min_month_tokens`.
pub fn monthly_chunks(user: &UserDoc, min_month_tokens: usize) -> BTreeMap<MonthKey, TokenStream> {
    let mut months: BTreeMap<MonthKey, TokenStream> = BTreeMap::new();
    for c in &user.comments {
        if let Some(k) = MonthKey::of(c.created_utc) {
            months.entry(k).or_default().extend(record_tokens(c));
        }
    }
    months.retain(|_, t| t.len() >= min_month_tokens && !t.is_empty());
    months
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceParams {
    pub n_sample: usize,
    pub min_user_tokens: usize,
    pub min_month_tokens: usize,
    pub min_months: usize,
}

impl Default for VarianceParams {
    fn default() -> Self {
        Self {
            n_sample: 100,
            min_user_tokens: 100_000,
            min_month_tokens: 100,
            min_months: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub category: String,
    /// Mean over sampled users of their monthly standard deviation.
    pub bipolar_mean_std: f64,
    pub control_mean_std: f64,
    pub t: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub rows: Vec<VarianceRow>,
    pub sampled_bipolar: Vec<String>,
    pub sampled_control: Vec<String>,
    pub months_used: BTreeMap<String, usize>,
}

impl VarianceReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("category\tbipolar\tcontrol\tp\n");
        for r in &self.rows {
            let star = if r.p.is_some_and(|p| p < 0.001) { "*" } else { "" };
            out.push_str(&format!(
                "{}\t{:.5}{star}\t{:.5}\t{}\n",
                r.category,
                r.bipolar_mean_std,
                r.control_mean_std,
                format_p(r.p)
            ));
        }
        out
    }
}

/// Per-category monthly standard deviations for one user, or `None` when the
/// user has too few qualifying months.
fn user_stds(user: &UserDoc, lexicon: &Lexicon, cats: &[usize], params: &VarianceParams) -> Option<(Vec<f64>, usize)> {
    let months = monthly_chunks(user, params.min_month_tokens);
    if months.len() < params.min_months {
        return None;
    }
    let mut series = vec![Vec::with_capacity(months.len()); cats.len()];
    for tokens in months.values() {
        let counts = lexicon.count(tokens);
        let n = tokens.len() as f64;
        for (s, &c) in series.iter_mut().zip(cats) {
            s.push(100.0 * counts[c] as f64 / n);
        }
    }
    Some((series.iter().map(|s| dist::std_dev(s)).collect(), months.len()))
}

struct GroupSample {
    authors: Vec<String>,
    /// [user][category]
    stds: Vec<Vec<f64>>,
    months: Vec<usize>,
}

fn sample_group(
    users: &[UserDoc],
    group: &str,
    lexicon: &Lexicon,
    cats: &[usize],
    params: &VarianceParams,
    seed: u64,
    stream: u64,
) -> Result<GroupSample> {
    let mut eligible: Vec<&UserDoc> = users
        .iter()
        .filter(|u| u.token_count >= params.min_user_tokens)
        .collect();
    if eligible.len() < params.n_sample {
        return Err(Error::Insufficient(format!(
            "{group}: {} users with at least {} tokens, need {}",
            eligible.len(),
            params.min_user_tokens,
            params.n_sample
        )));
    }
    eligible.sort_by(|a, b| a.author.cmp(&b.author));
    eligible.shuffle(&mut rng_for(seed, &[stream]));

    // Evaluate in shuffled order; users lacking enough months are replaced
    // by the next one.
    let stats: Vec<Option<(Vec<f64>, usize)>> = eligible
        .par_iter()
        .map(|u| user_stds(u, lexicon, cats, params))
        .collect();
    let mut out = GroupSample {
        authors: Vec::new(),
        stds: Vec::new(),
        months: Vec::new(),
    };
    for (u, s) in eligible.iter().zip(stats) {
        if out.authors.len() == params.n_sample {
            break;
        }
        if let Some((stds, months)) = s {
            out.authors.push(u.author.clone());
            out.stds.push(stds);
            out.months.push(months);
        }
    }
    if out.authors.len() < params.n_sample {
        return Err(Error::Insufficient(format!(
            "{group}: {} users with at least {} months of {} tokens, need {}",
            out.authors.len(),
            params.min_months,
            params.min_month_tokens,
            params.n_sample
        )));
    }
    Ok(out)
}

/// Samples users from each group, computes each sampled user's monthly
/// standard deviation per category and compares the groups with Welch's
/// test.
pub fn variance_analysis<S: AsRef<str>>(
    bipolar: &[UserDoc],
    control: &[UserDoc],
    lexicon: &Lexicon,
    categories: &[S],
    params: &VarianceParams,
    seed: u64,
) -> Result<VarianceReport> {
    if params.n_sample < 2 {
        return Err(Error::Config("n_sample must be at least 2".into()));
    }
    if params.min_months < 2 {
        return Err(Error::Config("min_months must be at least 2".into()));
    }
    let names: Vec<&str> = lexicon.category_names().collect();
    let cats: Vec<usize> = categories
        .iter()
        .map(|c| {
            let c = c.as_ref();
            let c = c.strip_prefix("liwc:").unwrap_or(c);
            names
                .iter()
                .position(|n| *n == c)
                .ok_or_else(|| Error::Config(format!("category {c:?} not in lexicon")))
        })
        .collect::<Result<_>>()?;
    let a = sample_group(bipolar, "bipolar", lexicon, &cats, params, seed, 1)?;
    let b = sample_group(control, "control", lexicon, &cats, params, seed, 0)?;

    let mut rows = Vec::with_capacity(cats.len());
    for (k, &c) in cats.iter().enumerate() {
        let xa: Vec<f64> = a.stds.iter().map(|s| s[k]).collect();
        let xb: Vec<f64> = b.stds.iter().map(|s| s[k]).collect();
        let test = match welch_ttest(&xa, &xb) {
            Ok(t) => Some(t),
            Err(Error::Undefined(_)) => None,
            Err(e) => return Err(e),
        };
        rows.push(VarianceRow {
            category: names[c].to_string(),
            bipolar_mean_std: dist::mean(&xa),
            control_mean_std: dist::mean(&xb),
            t: test.map(|t| t.t),
            p: test.map(|t| t.p),
        });
    }
    let months_used = a
        .authors
        .iter()
        .zip(&a.months)
        .chain(b.authors.iter().zip(&b.months))
        .map(|(u, &m)| (u.clone(), m))
        .collect();
    Ok(VarianceReport {
        rows,
        sampled_bipolar: a.authors,
        sampled_control: b.authors,
        months_used,
    })
}
