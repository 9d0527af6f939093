//! Group comparisons: Welch t-tests, feature merit, emotion summaries and
//! monthly variance.
//!
//! Group A is always the bipolar group (label 1), group B the controls.

pub mod dist;
mod variance;

pub use dist::{inc_beta, ln_gamma, student_t_two_sided_p};
pub use variance::{
    monthly_chunks, variance_analysis, MonthKey, VarianceParams, VarianceReport, VarianceRow,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub std_a: f64,
    pub std_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

fn sample_var(xs: &[f64]) -> f64 {
    if xs.windows(2).all(|w| w[0] == w[1]) {
        0.0
    } else {
        dist::variance(xs)
    }
}

/// Two-sided Welch (unequal variance) t-test.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Insufficient(format!(
            "t-test needs at least 2 values per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in t-test sample".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (dist::mean(a), dist::mean(b));
    let (va, vb) = (sample_var(a), sample_var(b));
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Err(Error::Undefined("both samples have zero variance".into()));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTestResult {
        t,
        df,
        p: student_t_two_sided_p(t, df),
        mean_a: ma,
        mean_b: mb,
        std_a: va.sqrt(),
        std_b: vb.sqrt(),
        n_a: a.len(),
        n_b: b.len(),
    })
}

/// Splits a column into (bipolar, control) values.
fn split_groups(data: &FeatureMatrix, column: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (row, &l) in data.rows.iter().zip(&data.labels) {
        let v = row.get(column);
        if l == 1 {
            a.push(v);
        } else {
            b.push(v);
        }
    }
    (a, b)
}

fn require_groups(data: &FeatureMatrix) -> Result<()> {
    let n1 = data.labels.iter().filter(|&&l| l == 1).count();
    let n0 = data.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass(format!("{n1} bipolar and {n0} control rows")));
    }
    Ok(())
}

/// Resolves a feature name; bare category names fall back to `liwc:<name>`.
pub fn resolve_column(data: &FeatureMatrix, name: &str) -> Option<usize> {
    data.column_index(name)
        .or_else(|| data.column_index(&format!("liwc:{name}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeritRow {
    pub feature: String,
    #[serde(flatten)]
    pub test: TTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFeature {
    pub feature: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeritReport {
    /// Ascending by p, then by name.
    pub rows: Vec<MeritRow>,
    pub skipped: Vec<SkippedFeature>,
}

/// Ranks features by Welch p-value between the groups. With `subset`
/// `None` every column is tested.
pub fn feature_merit(data: &FeatureMatrix, subset: Option<&[String]>) -> Result<MeritReport> {
    require_groups(data)?;
    let columns: Vec<(String, usize)> = match subset {
        None => data
            .feature_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                resolve_column(data, n)
                    .map(|i| (data.feature_names[i].clone(), i))
                    .ok_or_else(|| Error::Config(format!("unknown feature {n:?}")))
            })
            .collect::<Result<_>>()?,
    };
    let results: Vec<(String, Result<TTestResult>)> = columns
        .par_iter()
        .map(|(name, i)| {
            let (a, b) = split_groups(data, *i);
            (name.clone(), welch_ttest(&a, &b))
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (feature, r) in results {
        match r {
            Ok(test) => rows.push(MeritRow { feature, test }),
            Err(e @ (Error::Undefined(_) | Error::Insufficient(_))) => skipped.push(SkippedFeature {
                feature,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    rows.sort_by(|x, y| {
        x.test
            .p
            .total_cmp(&y.test.p)
            .then_with(|| x.feature.cmp(&y.feature))
    });
    skipped.sort_by(|x, y| x.feature.cmp(&y.feature));
    Ok(MeritReport { rows, skipped })
}

impl MeritReport {
    /// Tab-separated ranking: feature, group means and p.
    pub fn to_tsv(&self, top: Option<usize>) -> String {
        let mut out = String::from("feature\tbipolar_mean\tcontrol_mean\tt\tp\n");
        for r in self.rows.iter().take(top.unwrap_or(usize::MAX)) {
            out.push_str(&format!(
                "{}\t{:.3}\t{:.3}\t{:.3}\t{:.3e}\n",
                r.feature, r.test.mean_a, r.test.mean_b, r.test.t, r.test.p
            ));
        }
        out
    }
}

pub const EMOTION_CATEGORIES: [&str; 6] = ["posemo", "negemo", "anxiety", "anger", "sad", "affect"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionRow {
    pub category: String,
    pub column: String,
    pub bipolar_mean: f64,
    pub bipolar_std: f64,
    pub control_mean: f64,
    pub control_std: f64,
    /// `None` when both groups are constant.
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionSummary {
    pub rows: Vec<EmotionRow>,
}

/// Per-group mean ± std and Welch p for each category, in the given order.
pub fn emotion_summary<S: AsRef<str>>(data: &FeatureMatrix, categories: &[S]) -> Result<EmotionSummary> {
    require_groups(data)?;
    let mut rows = Vec::with_capacity(categories.len());
    for cat in categories {
        let cat = cat.as_ref();
        let col = resolve_column(data, cat)
            .ok_or_else(|| Error::Config(format!("category {cat:?} is not a feature column")))?;
        let (a, b) = split_groups(data, col);
        let p = match welch_ttest(&a, &b) {
            Ok(t) => Some(t.p),
            Err(Error::Undefined(_) | Error::Insufficient(_)) => None,
            Err(e) => return Err(e),
        };
        rows.push(EmotionRow {
            category: cat.to_string(),
            column: data.feature_names[col].clone(),
            bipolar_mean: dist::mean(&a),
            bipolar_std: dist::std_dev(&a),
            control_mean: dist::mean(&b),
            control_std: dist::std_dev(&b),
            p,
        });
    }
    Ok(EmotionSummary { rows })
}

pub(crate) fn format_p(p: Option<f64>) -> String {
    p.map_or("NA".to_string(), |p| format!("{p:.3e}"))
}

impl EmotionSummary {
    /// Rows like `posemo\t3.899 ± 1.02\t...`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("category\tbipolar\tcontrol\tp\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{:.3} ± {:.2}\t{:.3} ± {:.2}\t{}\n",
                r.category,
                r.bipolar_mean,
                r.bipolar_std,
                r.control_mean,
                r.control_std,
                format_p(r.p)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SparseVector;
    use proptest::prelude::*;

    #[test]
    fn identical_samples_give_p_one() {
        let r = welch_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn unit_shift_example() {
        let r = welch_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!((r.t + 1.0).abs() < 1e-12);
        assert!((r.df - 8.0).abs() < 1e-12);
        assert!((r.p - 0.3466).abs() < 1e-4, "{}", r.p);
    }

    #[test]
    fn constant_samples_are_undefined() {
        assert!(matches!(
            welch_ttest(&[2.0, 2.0], &[2.0, 2.0, 2.0]),
            Err(Error::Undefined(_))
        ));
        assert!(matches!(welch_ttest(&[1.0], &[1.0, 2.0]), Err(Error::Insufficient(_))));
    }

    proptest! {
        #[test]
        fn swap_shift_and_scale_invariance(
            a in prop::collection::vec(-50.0f64..50.0, 2..30),
            b in prop::collection::vec(-50.0f64..50.0, 2..30),
            shift in -100.0f64..100.0,
            scale in 0.1f64..10.0,
        ) {
            prop_assume!(welch_ttest(&a, &b).is_ok());
            let r = welch_ttest(&a, &b).unwrap();
            let s = welch_ttest(&b, &a).unwrap();
            prop_assert!((r.t + s.t).abs() < 1e-9 * (1.0 + r.t.abs()));
            prop_assert!((r.p - s.p).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.p));
            let a2: Vec<f64> = a.iter().map(|x| x * scale + shift).collect();
            let b2: Vec<f64> = b.iter().map(|x| x * scale + shift).collect();
            let q = welch_ttest(&a2, &b2).unwrap();
            prop_assert!((q.t - r.t).abs() < 1e-6 * (1.0 + r.t.abs()));
            prop_assert!((q.df - r.df).abs() < 1e-6 * r.df);
            prop_assert!((q.p - r.p).abs() < 1e-7);
        }
    }

    fn two_feature_matrix() -> FeatureMatrix {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let l = (i % 2) as u8;
            let planted = if l == 1 { 1.0 } else { 0.0 } + 0.01 * (i % 7) as f64;
            rows.push(SparseVector::from_dense(&[5.0, (i % 5) as f64, planted]));
            labels.push(l);
        }
        FeatureMatrix::new(
            vec!["liwc:const".into(), "liwc:noise".into(), "liwc:posemo".into()],
            (0..40).map(|i| format!("u{i:02}")).collect(),
            labels,
            rows,
        )
        .unwrap()
    }

    #[test]
    fn merit_ranks_planted_and_skips_constant() {
        let m = feature_merit(&two_feature_matrix(), None).unwrap();
        assert_eq!(m.rows[0].feature, "liwc:posemo");
        assert!(m.rows[0].test.p < 1e-10);
        assert_eq!(m.skipped.len(), 1);
        assert_eq!(m.skipped[0].feature, "liwc:const");
        let sub = feature_merit(&two_feature_matrix(), Some(&["noise".to_string()])).unwrap();
        assert_eq!(sub.rows.len(), 1);
        assert!(feature_merit(&two_feature_matrix(), Some(&["nope".to_string()])).is_err());
    }

    #[test]
    fn emotion_summary_order_and_missing() {
        let data = two_feature_matrix();
        let s = emotion_summary(&data, &["posemo", "noise"]).unwrap();
        assert_eq!(s.rows[0].category, "posemo");
        assert_eq!(s.rows[1].column, "liwc:noise");
        let tsv = s.to_tsv();
        assert!(tsv.lines().nth(1).unwrap().contains(" ± "));
        let err = emotion_summary(&data, &["anger"]).unwrap_err();
        assert!(err.to_string().contains("anger"));
    }
}
