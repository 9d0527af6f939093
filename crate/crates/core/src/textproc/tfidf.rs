use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::porter::porter_stem;
use super::tokenize::TokenStream;
use crate::error::{Error, Result};
use crate::matrix::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfParams {
    pub min_df: usize,
    pub max_features: Option<usize>,
}

impl Default for TfidfParams {
    fn default() -> Self {
        Self {
            min_df: 5,
            max_features: Some(50_000),
        }
    }
}

/// Fitted stem vocabulary with smoothed idf weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TfidfFile", try_from = "TfidfFile")]
pub struct TfidfModel {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    idf: Vec<f64>,
    doc_count: usize,
    params: TfidfParams,
}

/// On-disk layout: vocabulary in column order, idf aligned with it.
#[derive(Serialize, Deserialize)]
struct TfidfFile {
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    doc_count: usize,
    min_df: usize,
    max_features: Option<usize>,
}

impl From<TfidfModel> for TfidfFile {
    fn from(m: TfidfModel) -> Self {
        TfidfFile {
            vocabulary: m.terms,
            idf: m.idf,
            doc_count: m.doc_count,
            min_df: m.params.min_df,
            max_features: m.params.max_features,
        }
    }
}

impl TryFrom<TfidfFile> for TfidfModel {
    type Error = String;

    fn try_from(f: TfidfFile) -> Result<Self, String> {
        if f.vocabulary.len() != f.idf.len() {
            return Err("vocabulary and idf lengths differ".into());
        }
        if f.idf.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err("idf values must be positive".into());
        }
        let index: HashMap<String, usize> = f
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if index.len() != f.vocabulary.len() {
            return Err("duplicate vocabulary entry".into());
        }
        Ok(TfidfModel {
            terms: f.vocabulary,
            index,
            idf: f.idf,
            doc_count: f.doc_count,
            params: TfidfParams {
                min_df: f.min_df,
                max_features: f.max_features,
            },
        })
    }
}

fn stem_all(doc: &TokenStream, cache: &mut HashMap<String, String>) -> Vec<String> {
    doc.iter()
        .map(|t| {
            cache
                .entry(t.to_string())
                .or_insert_with(|| porter_stem(t))
                .clone()
        })
        .collect()
}

/// Fits the stem vocabulary and idf(t) = ln((1 + N) / (1 + df(t))) + 1.
///
/// Stems with df < `min_df` are dropped; if more than `max_features` remain,
/// the highest-df stems are kept (ties by stem). Columns are ordered by stem.
pub fn fit_tfidf(docs: &[TokenStream], params: TfidfParams) -> Result<TfidfModel> {
    if docs.iter().all(TokenStream::is_empty) {
        return Err(Error::Empty("tf-idf corpus has no tokens".into()));
    }
    let df: BTreeMap<String, usize> = docs
        .par_iter()
        .map(|doc| {
            let mut cache = HashMap::new();
            let mut stems = stem_all(doc, &mut cache);
            stems.sort_unstable();
            stems.dedup();
            stems
        })
        .fold(BTreeMap::new, |mut acc: BTreeMap<String, usize>, stems| {
            for s in stems {
                *acc.entry(s).or_default() += 1;
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });

    let mut kept: Vec<(String, usize)> = df
        .into_iter()
        .filter(|(_, d)| *d >= params.min_df.max(1))
        .collect();
    if let Some(max) = params.max_features {
        if kept.len() > max {
            kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            kept.truncate(max);
            kept.sort_by(|a, b| a.0.cmp(&b.0));
        }
    }
    if kept.is_empty() {
        return Err(Error::Empty(format!(
            "no stem reaches min_df={}",
            params.min_df
        )));
    }

    let n = docs.len() as f64;
    let idf = kept
        .iter()
        .map(|(_, d)| ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0)
        .collect();
    let terms: Vec<String> = kept.into_iter().map(|(t, _)| t).collect();
    let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(TfidfModel {
        terms,
        index,
        idf,
        doc_count: docs.len(),
        params,
    })
}

impl TfidfModel {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn params(&self) -> TfidfParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn column_of(&self, stem: &str) -> Option<usize> {
        self.index.get(stem).copied()
    }

    /// Raw term counts times idf, unnormalized.
    pub fn weights(&self, doc: &TokenStream) -> SparseVector {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        let mut cache = HashMap::new();
        for stem in stem_all(doc, &mut cache) {
            if let Some(&col) = self.index.get(&stem) {
                *counts.entry(col).or_default() += 1.0;
            }
        }
        SparseVector::from_pairs(
            counts
                .into_iter()
                .map(|(col, c)| (col, c * self.idf[col]))
                .collect(),
        )
    }

    /// L2-normalized tf-idf vector; out-of-vocabulary stems are ignored.
    pub fn transform(&self, doc: &TokenStream) -> SparseVector {
        let mut v = self.weights(doc);
        let norm = v.norm();
        if norm > 0.0 {
            for x in &mut v.values {
                *x /= norm;
            }
        }
        v
    }
}

pub fn transform_tfidf(model: &TfidfModel, doc: &TokenStream) -> SparseVector {
    model.transform(doc)
}
