//! Sparse row storage and the labelled feature matrix.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    /// Builds from `(index, value)` pairs; zeros are dropped, pairs are sorted.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut out = SparseVector::default();
        for (i, v) in pairs {
            if v != 0.0 {
                debug_assert!(out.indices.last().is_none_or(|&l| l < i), "duplicate index");
                out.indices.push(i);
                out.values.push(v);
            }
        }
        out
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let mut out = SparseVector::default();
        for (i, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                out.indices.push(i);
                out.values.push(v);
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self, width: usize) -> Vec<f64> {
        let mut d = vec![0.0; width];
        for (i, v) in self.iter() {
            d[i] = v;
        }
        d
    }

    /// Shifts indices by `offset`, for concatenating column blocks.
    pub fn offset(&self, offset: usize) -> SparseVector {
        SparseVector {
            indices: self.indices.iter().map(|i| i + offset).collect(),
            values: self.values.clone(),
        }
    }

    pub fn append(&mut self, other: &SparseVector) {
        debug_assert!(match (self.indices.last(), other.indices.first()) {
            (Some(a), Some(b)) => a < b,
            _ => true,
        });
        self.indices.extend_from_slice(&other.indices);
        self.values.extend_from_slice(&other.values);
    }
}

/// Group label. Bipolar is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Control,
    Bipolar,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Control => 0,
            Label::Bipolar => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Control),
            1 => Some(Label::Bipolar),
            _ => None,
        }
    }
}

/// Column prefix for tf-idf columns; these are passed through unscaled by
/// linear models.
pub const TFIDF_PREFIX: &str = "tfidf:";

/// Named feature columns by user rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub user_ids: Vec<String>,
    /// 1 = bipolar, 0 = control.
    pub labels: Vec<u8>,
    pub rows: Vec<SparseVector>,
}

impl FeatureMatrix {
    pub fn new(
        feature_names: Vec<String>,
        user_ids: Vec<String>,
        labels: Vec<u8>,
        rows: Vec<SparseVector>,
    ) -> Result<Self> {
        let m = FeatureMatrix {
            feature_names,
            user_ids,
            labels,
            rows,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rows.len();
        if self.labels.len() != n || self.user_ids.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} rows, {} labels, {} user ids",
                n,
                self.labels.len(),
                self.user_ids.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &self.feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate feature name {name}")));
            }
        }
        let width = self.width();
        for (r, row) in self.rows.iter().enumerate() {
            if row.indices.last().is_some_and(|&i| i >= width) {
                return Err(Error::InvalidInput(format!("row {r} exceeds width {width}")));
            }
        }
        if let Some(bad) = self.labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidInput(format!("label {bad} is not 0/1")));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.get(index)).collect()
    }

    /// Columns that linear models standardize (everything but tf-idf).
    pub fn dense_mask(&self) -> Vec<bool> {
        self.feature_names
            .iter()
            .map(|n| !n.starts_with(TFIDF_PREFIX))
            .collect()
    }

    /// Row subset, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            feature_names: self.feature_names.clone(),
            user_ids: rows.iter().map(|&i| self.user_ids[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Keeps only columns whose name satisfies `keep`, preserving order.
    pub fn select_columns(&self, keep: impl Fn(&str) -> bool) -> FeatureMatrix {
        let mut remap = vec![None; self.width()];
        let mut names = Vec::new();
        for (i, n) in self.feature_names.iter().enumerate() {
            if keep(n) {
                remap[i] = Some(names.len());
                names.push(n.clone());
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut out = SparseVector::default();
                for (i, v) in r.iter() {
                    if let Some(j) = remap[i] {
                        out.indices.push(j);
                        out.values.push(v);
                    }
                }
                out
            })
            .collect();
        FeatureMatrix {
            feature_names: names,
            user_ids: self.user_ids.clone(),
            labels: self.labels.clone(),
            rows,
        }
    }

    /// Writes `user_id,label,<features...>` CSV, one dense row per user.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["user_id".to_string(), "label".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        let width = self.width();
        let mut record = Vec::with_capacity(width + 2);
        for ((uid, label), row) in self.user_ids.iter().zip(&self.labels).zip(&self.rows) {
            record.clear();
            record.push(uid.clone());
            record.push(label.to_string());
            record.extend(row.to_dense(width).iter().map(|v| format_value(*v)));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "user_id" || &header[1] != "label" {
            return Err(Error::InvalidInput(
                "feature csv must start with user_id,label".into(),
            ));
        }
        let feature_names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut user_ids = Vec::new();
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            user_ids.push(rec[0].to_string());
            let label: u8 = rec[1].parse().map_err(|_| {
                Error::InvalidInput(format!("row {}: bad label {:?}", line + 1, &rec[1]))
            })?;
            labels.push(label);
            let mut row = SparseVector::default();
            for (j, field) in rec.iter().skip(2).enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidInput(format!("row {}: bad value {field:?}", line + 1))
                })?;
                if v != 0.0 {
                    row.indices.push(j);
                    row.values.push(v);
                }
            }
            rows.push(row);
        }
        FeatureMatrix::new(feature_names, user_ids, labels, rows)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv is utf-8"))
    }
}

/// Shortest round-tripping decimal form.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureMatrix {
        FeatureMatrix::new(
            vec!["liwc:i".into(), "tfidf:feel".into(), "user:gilded_count".into()],
            vec!["a".into(), "b".into()],
            vec![1, 0],
            vec![
                SparseVector::from_dense(&[20.0, 0.0, 1.0]),
                SparseVector::from_dense(&[0.1, 0.70710678118654757, 0.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let m = sample();
        let text = m.to_csv_string().unwrap();
        assert!(text.starts_with("user_id,label,liwc:i,tfidf:feel,user:gilded_count\n"));
        let back = FeatureMatrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let err = FeatureMatrix::new(vec!["x".into()], vec!["a".into()], vec![], vec![]);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_duplicate_names() {
        let err = FeatureMatrix::new(vec!["x".into(), "x".into()], vec![], vec![], vec![]);
        assert!(err.is_err());
    }

    #[test]
    fn column_selection_keeps_values() {
        let m = sample();
        let s = m.select_columns(|n| !n.starts_with("tfidf:"));
        assert_eq!(s.feature_names, ["liwc:i", "user:gilded_count"]);
        assert_eq!(s.rows[0].to_dense(2), vec![20.0, 1.0]);
        assert_eq!(s.rows[1].to_dense(2), vec![0.1, 0.0]);
        assert_eq!(m.dense_mask(), vec![true, false, true]);
    }
}
