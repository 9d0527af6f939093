//! Stratified nested cross-validation and model-vs-baseline significance.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::dist::{mean, std_dev};
use crate::analysis::student_t_two_sided_p;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::ml::{fit, metrics, Hyperparams, MajorityBaseline, Metrics, ModelKind, RandomBaseline};
use crate::rng::{derive_seed, rng_for};

/// Significance level used to flag model-vs-baseline differences.
pub const ALPHA: f64 = 0.001;

/// Splits indices into `k` stratified folds.
///
/// Each class is shuffled with its own seeded stream and dealt round-robin,
/// controls first, with the dealing position carried over between classes.
/// Fold contents are returned sorted.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut folds = vec![Vec::new(); k];
    let mut pos = 0usize;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::Insufficient(format!(
                "class {class} has {} members, fewer than {k} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng_for(seed, &[class as u64]));
        for i in idx {
            folds[pos % k].push(i);
            pos += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Train indices for fold `f`: every index not in it, ascending.
fn complement(folds: &[Vec<usize>], f: usize) -> Vec<usize> {
    let mut out: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != f)
        .flat_map(|(_, v)| v.iter().copied())
        .collect();
    out.sort_unstable();
    out
}

/// Result of an inner model-selection loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub hyperparams: Hyperparams,
    /// Mean inner accuracy per grid point.
    pub mean_accuracy: Vec<f64>,
}

/// Picks the grid point with the best mean `k`-fold accuracy on `data`
/// (ties go to the earlier point). Only `data` is visible, so callers pass
/// the outer-train split.
pub fn select_hyperparams(data: &FeatureMatrix, grid: &[Hyperparams], k: usize, seed: u64) -> Result<Selection> {
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    let folds = stratified_kfold(&data.labels, k, derive_seed(seed, &[0]))?;
    let splits: Vec<(FeatureMatrix, FeatureMatrix)> = (0..k)
        .map(|f| (data.select_rows(&complement(&folds, f)), data.select_rows(&folds[f])))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..k).map(move |f| (g, f))).collect();
    let acc: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (train, test) = &splits[f];
            let model = fit(train, &grid[g], derive_seed(seed, &[1, g as u64, f as u64]))?;
            Ok(metrics(&test.labels, &model.predict(test)?)?.accuracy)
        })
        .collect::<Result<_>>()?;
    let mean_accuracy: Vec<f64> = acc.chunks(k).map(mean).collect();
    let mut index = 0;
    for (g, &m) in mean_accuracy.iter().enumerate() {
        if m > mean_accuracy[index] {
            index = g;
        }
    }
    Ok(Selection {
        index,
        hyperparams: grid[index],
        mean_accuracy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub mcc_fold_metrics: Vec<Metrics>,
    pub mcc_mean_accuracy: f64,
    pub mcc_mean_f1: f64,
    /// Seeded prior-sampling classifier.
    pub random_fold_metrics: Vec<Metrics>,
    pub random_mean_accuracy: f64,
    /// Mean over folds of p q + (1 - p)(1 - q), p = train prior, q = test share.
    pub random_expected_accuracy: f64,
    /// Paired t-test of model vs MCC fold accuracies.
    pub p_vs_mcc: f64,
    pub p_vs_random: f64,
    pub significant_vs_mcc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub model_kind: ModelKind,
    pub seed: u64,
    pub k_outer: usize,
    pub k_inner: usize,
    pub fold_sizes: Vec<usize>,
    pub outer_fold_metrics: Vec<Metrics>,
    pub chosen_hyperparams: Vec<Hyperparams>,
    pub inner_mean_accuracy: Vec<Vec<f64>>,
    pub mean_accuracy: f64,
    /// Sample standard deviation across outer folds.
    pub std_accuracy: f64,
    pub mean_f1: f64,
    pub baselines: BaselineReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSettings {
    pub k_outer: usize,
    pub k_inner: usize,
    pub seed: u64,
}

impl CvSettings {
    pub fn new(seed: u64) -> Self {
        Self {
            k_outer: 10,
            k_inner: 5,
            seed,
        }
    }
}

struct OuterFold {
    metrics: Metrics,
    selection: Selection,
    mcc: Metrics,
    random: Metrics,
    random_expected: f64,
}

fn run_outer_fold(
    data: &FeatureMatrix,
    folds: &[Vec<usize>],
    f: usize,
    grid: &[Hyperparams],
    cv: &CvSettings,
) -> Result<OuterFold> {
    let train = data.select_rows(&complement(folds, f));
    let test = data.select_rows(&folds[f]);
    let seed = derive_seed(cv.seed, &[2, f as u64]);
    let selection = select_hyperparams(&train, grid, cv.k_inner, seed)?;
    let model = fit(&train, &selection.hyperparams, derive_seed(seed, &[2]))?;
    let m = metrics(&test.labels, &model.predict(&test)?)?;

    let mcc = MajorityBaseline::fit(&train.labels)?;
    let rnd = RandomBaseline::fit(&train.labels)?;
    let q = test.labels.iter().filter(|&&l| l == 1).count() as f64 / test.len() as f64;
    Ok(OuterFold {
        metrics: m,
        selection,
        mcc: metrics(&test.labels, &mcc.predict(test.len()))?,
        random: metrics(&test.labels, &rnd.predict(test.len(), derive_seed(seed, &[3])))?,
        random_expected: rnd.expected_accuracy(q),
    })
}

/// `k_outer` x `k_inner` nested cross-validation of one model family.
pub fn nested_cv(data: &FeatureMatrix, kind: ModelKind, grid: &[Hyperparams], cv: &CvSettings) -> Result<CVReport> {
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    if let Some(g) = grid.iter().find(|g| g.kind() != kind) {
        return Err(Error::Config(format!(
            "grid point {} does not match model {kind}",
            g.label()
        )));
    }
    let folds = stratified_kfold(&data.labels, cv.k_outer, derive_seed(cv.seed, &[1]))?;
    let results: Vec<OuterFold> = (0..cv.k_outer)
        .into_par_iter()
        .map(|f| {
            run_outer_fold(data, &folds, f, grid, cv).map_err(|e| Error::Fold {
                fold: f,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let acc: Vec<f64> = results.iter().map(|r| r.metrics.accuracy).collect();
    let f1: Vec<f64> = results.iter().map(|r| r.metrics.f1).collect();
    let mcc_acc: Vec<f64> = results.iter().map(|r| r.mcc.accuracy).collect();
    let rnd_acc: Vec<f64> = results.iter().map(|r| r.random.accuracy).collect();
    let p_vs_mcc = compare_significance(&acc, &mcc_acc)?;
    let baselines = BaselineReport {
        mcc_fold_metrics: results.iter().map(|r| r.mcc).collect(),
        mcc_mean_accuracy: mean(&mcc_acc),
        mcc_mean_f1: mean(&results.iter().map(|r| r.mcc.f1).collect::<Vec<_>>()),
        random_fold_metrics: results.iter().map(|r| r.random).collect(),
        random_mean_accuracy: mean(&rnd_acc),
        random_expected_accuracy: mean(&results.iter().map(|r| r.random_expected).collect::<Vec<_>>()),
        p_vs_mcc,
        p_vs_random: compare_significance(&acc, &rnd_acc)?,
        significant_vs_mcc: p_vs_mcc < ALPHA && mean(&acc) > mean(&mcc_acc),
    };
    Ok(CVReport {
        model_kind: kind,
        seed: cv.seed,
        k_outer: cv.k_outer,
        k_inner: cv.k_inner,
        fold_sizes: folds.iter().map(Vec::len).collect(),
        outer_fold_metrics: results.iter().map(|r| r.metrics).collect(),
        chosen_hyperparams: results.iter().map(|r| r.selection.hyperparams).collect(),
        inner_mean_accuracy: results.iter().map(|r| r.selection.mean_accuracy.clone()).collect(),
        mean_accuracy: mean(&acc),
        std_accuracy: std_dev(&acc),
        mean_f1: mean(&f1),
        baselines,
    })
}

/// Paired two-sided t-test on per-fold score differences.
///
/// All-zero differences give p = 1; constant nonzero differences give p = 0.
pub fn compare_significance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::Insufficient("paired test needs at least 2 folds".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().all(|&x| x == 0.0) {
        return Ok(1.0);
    }
    if d.windows(2).all(|w| w[0] == w[1]) {
        return Ok(0.0);
    }
    let n = d.len() as f64;
    let t = mean(&d) / (std_dev(&d) / n.sqrt());
    Ok(student_t_two_sided_p(t, n - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CategoryOutcome {
    Evaluated {
        n_users: usize,
        n_bipolar: usize,
        report: Box<CVReport>,
    },
    Skipped {
        n_users: usize,
        n_bipolar: usize,
        reason: String,
    },
}

/// Nested CV per topic category with class weighting forced on. Categories
/// that cannot be evaluated are reported as skipped.
pub fn per_category_eval(
    matrices: &BTreeMap<String, FeatureMatrix>,
    kind: ModelKind,
    grid: &[Hyperparams],
    cv: &CvSettings,
) -> Result<BTreeMap<String, CategoryOutcome>> {
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    let grid: Vec<Hyperparams> = grid.iter().map(|g| g.with_class_weighting(true)).collect();
    let mut out = BTreeMap::new();
    for (name, data) in matrices {
        let n_bipolar = data.labels.iter().filter(|&&l| l == 1).count();
        let n_users = data.len();
        let n_control = n_users - n_bipolar;
        let outcome = if n_bipolar.min(n_control) < cv.k_outer {
            CategoryOutcome::Skipped {
                n_users,
                n_bipolar,
                reason: format!(
                    "{n_bipolar} bipolar / {n_control} control users; each class needs at least {}",
                    cv.k_outer
                ),
            }
        } else {
            match nested_cv(data, kind, &grid, cv) {
                Ok(r) => CategoryOutcome::Evaluated {
                    n_users,
                    n_bipolar,
                    report: Box::new(r),
                },
                Err(e) if e.kind() == crate::ErrorKind::Data => CategoryOutcome::Skipped {
                    n_users,
                    n_bipolar,
                    reason: e.to_string(),
                },
                Err(e) => return Err(e),
            }
        };
        out.insert(name.clone(), outcome);
    }
    Ok(out)
}

/// Summary rows per model: accuracy, F1.
pub fn summary_tsv(reports: &[CVReport]) -> String {
    let mut out = String::from("model\taccuracy\tf1\tp_vs_mcc\n");
    if let Some(r) = reports.first() {
        out.push_str(&format!(
            "mcc\t{:.3}\t{:.3}\tNA\n",
            r.baselines.mcc_mean_accuracy, r.baselines.mcc_mean_f1
        ));
        out.push_str(&format!(
            "random\t{:.3}\t{:.3}\tNA\n",
            r.baselines.random_mean_accuracy,
            mean(&r.baselines.random_fold_metrics.iter().map(|m| m.f1).collect::<Vec<_>>())
        ));
    }
    for r in reports {
        out.push_str(&format!(
            "{}\t{:.3}\t{:.3}\t{:.3e}\n",
            r.model_kind, r.mean_accuracy, r.mean_f1, r.baselines.p_vs_mcc
        ));
    }
    out
}

/// Per-category rows: users, majority-class accuracy, model accuracy.
pub fn category_tsv(results: &BTreeMap<String, CategoryOutcome>) -> String {
    let mut out = String::from("category\tusers\tbipolar\tmcc_accuracy\tmodel_accuracy\tp_vs_mcc\n");
    for (name, o) in results {
        match o {
            CategoryOutcome::Evaluated {
                n_users,
                n_bipolar,
                report,
            } => {
                let star = if report.baselines.significant_vs_mcc { "*" } else { "" };
                out.push_str(&format!(
                    "{name}\t{n_users}\t{n_bipolar}\t{:.3}\t{:.3}{star}\t{:.3e}\n",
                    report.baselines.mcc_mean_accuracy, report.mean_accuracy, report.baselines.p_vs_mcc
                ));
            }
            CategoryOutcome::Skipped {
                n_users, n_bipolar, ..
            } => out.push_str(&format!("{name}\t{n_users}\t{n_bipolar}\tNA\tNA\tskipped\n")),
        }
    }
    out
}
