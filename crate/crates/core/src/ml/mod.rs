//! Classifiers, baselines and metrics.
//!
//! Labels are `u8`: 1 = bipolar (the positive class), 0 = control.

mod forest;
mod linear;

pub use forest::{train_forest, Forest, ForestParams, MaxFeatures, Node, Tree};
pub use linear::{
    linear_problem, train_linear, train_linear_traced, LinearKind, LinearModel, LinearParams,
    LinearProblem, Standardization,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::rng::rng_for;

pub(crate) fn signed(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn check_finite(data: &FeatureMatrix) -> Result<()> {
    for (r, row) in data.rows.iter().enumerate() {
        if let Some((c, _)) = row.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row: r, column: c });
        }
    }
    Ok(())
}

/// Balanced class weights `n / (2 n_c)`, indexed by label.
pub fn class_weights(labels: &[u8]) -> Result<[f64; 2]> {
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass(format!(
            "training labels have {n0} control and {n1} bipolar"
        )));
    }
    let n = labels.len() as f64;
    Ok([n / (2.0 * n0 as f64), n / (2.0 * n1 as f64)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logreg,
    Svm,
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Logreg, ModelKind::Svm, ModelKind::Rf];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::Svm => "svm",
            ModelKind::Rf => "rf",
        }
    }

    /// Default search grid.
    pub fn default_grid(self) -> Vec<Hyperparams> {
        match self {
            ModelKind::Logreg | ModelKind::Svm => [0.01, 0.1, 1.0, 10.0]
                .iter()
                .map(|&c| Hyperparams::linear(self, LinearParams::new(c)))
                .collect(),
            ModelKind::Rf => {
                let mut g = Vec::new();
                for n_trees in [100, 200] {
                    for depth in [Some(8), Some(16), None] {
                        g.push(Hyperparams::Rf(ForestParams::new(n_trees, depth)));
                    }
                }
                g
            }
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logreg" | "lr" => Ok(ModelKind::Logreg),
            "svm" => Ok(ModelKind::Svm),
            "rf" | "forest" => Ok(ModelKind::Rf),
            _ => Err(Error::Config(format!(
                "unknown model {s:?} (expected logreg, svm or rf)"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One point of a hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Hyperparams {
    Logreg(LinearParams),
    Svm(LinearParams),
    Rf(ForestParams),
}

impl Hyperparams {
    pub fn linear(kind: ModelKind, params: LinearParams) -> Self {
        match kind {
            ModelKind::Svm => Hyperparams::Svm(params),
            _ => Hyperparams::Logreg(params),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparams::Logreg(_) => ModelKind::Logreg,
            Hyperparams::Svm(_) => ModelKind::Svm,
            Hyperparams::Rf(_) => ModelKind::Rf,
        }
    }

    pub fn class_weighted(&self) -> bool {
        match self {
            Hyperparams::Logreg(p) | Hyperparams::Svm(p) => p.class_weighted,
            Hyperparams::Rf(p) => p.class_weighted,
        }
    }

    pub fn with_class_weighting(mut self, on: bool) -> Self {
        match &mut self {
            Hyperparams::Logreg(p) | Hyperparams::Svm(p) => p.class_weighted = on,
            Hyperparams::Rf(p) => p.class_weighted = on,
        }
        self
    }

    /// Short human-readable form, e.g. `svm(C=0.1)`.
    pub fn label(&self) -> String {
        match self {
            Hyperparams::Logreg(p) | Hyperparams::Svm(p) => {
                format!("{}(C={})", self.kind(), p.c)
            }
            Hyperparams::Rf(p) => format!(
                "rf(n_trees={}, max_depth={})",
                p.n_trees,
                p.max_depth.map_or("none".to_string(), |d| d.to_string())
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Model {
    Linear(LinearModel),
    Forest(Forest),
}

/// Trains the model described by `params` on all rows of `data`.
pub fn fit(data: &FeatureMatrix, params: &Hyperparams, seed: u64) -> Result<Model> {
    if data.is_empty() {
        return Err(Error::Empty("no training rows".into()));
    }
    match params {
        Hyperparams::Logreg(p) => train_linear(data, LinearKind::Logreg, p, seed).map(Model::Linear),
        Hyperparams::Svm(p) => train_linear(data, LinearKind::Svm, p, seed).map(Model::Linear),
        Hyperparams::Rf(p) => train_forest(data, p, seed).map(Model::Forest),
    }
}

impl Model {
    pub fn width(&self) -> usize {
        match self {
            Model::Linear(m) => m.width(),
            Model::Forest(f) => f.width,
        }
    }

    fn check(&self, data: &FeatureMatrix) -> Result<()> {
        if data.width() != self.width() {
            return Err(Error::WidthMismatch {
                expected: self.width(),
                actual: data.width(),
            });
        }
        check_finite(data)
    }

    pub fn predict(&self, data: &FeatureMatrix) -> Result<Vec<u8>> {
        self.check(data)?;
        Ok(match self {
            Model::Linear(m) => m.predict_rows(&data.rows),
            Model::Forest(f) => f.predict_rows(&data.rows),
        })
    }

    /// Positive-class score: probability, margin or vote share.
    pub fn scores(&self, data: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check(data)?;
        Ok(match self {
            Model::Linear(m) => m.scores(&data.rows),
            Model::Forest(f) => f.scores(&data.rows),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// A fitted model with what is needed to reproduce and apply it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub model: Model,
}

impl SavedModel {
    pub fn train(data: &FeatureMatrix, hyperparams: Hyperparams, seed: u64) -> Result<Self> {
        Ok(Self {
            hyperparams,
            seed,
            feature_names: data.feature_names.clone(),
            model: fit(data, &hyperparams, seed)?,
        })
    }

    /// Predicts after checking that the columns match the training columns.
    pub fn predict(&self, data: &FeatureMatrix) -> Result<Vec<u8>> {
        if data.width() == self.feature_names.len() && data.feature_names != self.feature_names {
            return Err(Error::InvalidInput("feature columns differ from the training columns".into()));
        }
        self.model.predict(data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// F1 of the bipolar class; 0 when there are no true positives.
    pub f1: f64,
}

pub fn metrics(truth: &[u8], predicted: &[u8]) -> Result<Metrics> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch(truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let (mut tp, mut fp, mut fneg, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fneg += 1,
            _ => {}
        }
        if t == p {
            correct += 1;
        }
    }
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
    };
    Ok(Metrics {
        accuracy: correct as f64 / truth.len() as f64,
        f1,
    })
}

/// Majority-class predictor; ties pick control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MajorityBaseline {
    pub class: u8,
}

impl MajorityBaseline {
    pub fn fit(labels: &[u8]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("no labels".into()));
        }
        let n1 = labels.iter().filter(|&&l| l == 1).count();
        Ok(Self {
            class: u8::from(2 * n1 > labels.len()),
        })
    }

    pub fn predict(&self, n: usize) -> Vec<u8> {
        vec![self.class; n]
    }
}

/// Predicts bipolar with the training prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomBaseline {
    pub p_bipolar: f64,
}

impl RandomBaseline {
    pub fn fit(labels: &[u8]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("no labels".into()));
        }
        let n1 = labels.iter().filter(|&&l| l == 1).count();
        Ok(Self {
            p_bipolar: n1 as f64 / labels.len() as f64,
        })
    }

    pub fn predict(&self, n: usize, seed: u64) -> Vec<u8> {
        let mut rng = rng_for(seed, &[]);
        (0..n).map(|_| u8::from(rng.gen::<f64>() < self.p_bipolar)).collect()
    }

    /// Expected accuracy against a test set with bipolar share `q`.
    pub fn expected_accuracy(&self, q: f64) -> f64 {
        self.p_bipolar * q + (1.0 - self.p_bipolar) * (1.0 - q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SparseVector;

    fn matrix(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> FeatureMatrix {
        let width = rows[0].len();
        FeatureMatrix::new(
            (0..width).map(|j| format!("f{j}")).collect(),
            (0..rows.len()).map(|i| format!("u{i}")).collect(),
            labels,
            rows.iter().map(|r| SparseVector::from_dense(r)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn class_weights_balance() {
        let w = class_weights(&[0, 0, 0, 1]).unwrap();
        assert!((w[0] - 4.0 / 6.0).abs() < 1e-12);
        assert!((w[1] - 2.0).abs() < 1e-12);
        assert!(class_weights(&[1, 1]).is_err());
    }

    #[test]
    fn metrics_match_hand_counts() {
        let m = metrics(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert!((m.f1 - 0.5).abs() < 1e-12);
        let m = metrics(&[0, 0], &[0, 0]).unwrap();
        assert_eq!(m.f1, 0.0);
        assert!(metrics(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn majority_and_random_baselines() {
        assert_eq!(MajorityBaseline::fit(&[0, 1]).unwrap().class, 0);
        assert_eq!(MajorityBaseline::fit(&[1, 1, 0]).unwrap().class, 1);
        let r = RandomBaseline::fit(&[1, 0, 0, 0]).unwrap();
        assert!((r.expected_accuracy(0.25) - (0.25f64.powi(2) + 0.75f64.powi(2))).abs() < 1e-12);
        assert_eq!(r.predict(50, 3), r.predict(50, 3));
    }

    #[test]
    fn hyperparams_json_roundtrip() {
        for kind in ModelKind::ALL {
            for hp in kind.default_grid() {
                let s = serde_json::to_string(&hp).unwrap();
                let back: Hyperparams = serde_json::from_str(&s).unwrap();
                assert_eq!(back, hp, "{s}");
            }
        }
        let hp: Hyperparams = serde_json::from_str(r#"{"model":"svm","c":0.5}"#).unwrap();
        assert_eq!(hp, Hyperparams::Svm(LinearParams::new(0.5)));
        let hp: Hyperparams =
            serde_json::from_str(r#"{"model":"rf","n_trees":3,"max_features":4}"#).unwrap();
        match hp {
            Hyperparams::Rf(p) => assert_eq!(p.max_features, MaxFeatures::Count(4)),
            _ => panic!(),
        }
        assert_eq!(ModelKind::Logreg.default_grid().len(), 4);
        assert_eq!(ModelKind::Rf.default_grid().len(), 6);
    }

    fn separable() -> FeatureMatrix {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let x = i as f64;
            rows.push(vec![x, (i % 3) as f64]);
            labels.push(u8::from(i >= 10));
        }
        matrix(rows, labels)
    }

    #[test]
    fn linear_models_fit_separable_data() {
        let data = separable();
        for hp in [
            Hyperparams::Logreg(LinearParams::new(10.0)),
            Hyperparams::Svm(LinearParams::new(10.0)),
        ] {
            let m = fit(&data, &hp, 0).unwrap();
            let pred = m.predict(&data).unwrap();
            assert_eq!(metrics(&data.labels, &pred).unwrap().accuracy, 1.0, "{hp:?}");
        }
    }

    #[test]
    fn predict_rejects_wrong_width() {
        let data = separable();
        let m = fit(&data, &Hyperparams::Logreg(LinearParams::new(1.0)), 0).unwrap();
        let narrow = data.select_columns(|n| n == "f0");
        assert!(matches!(
            m.predict(&narrow),
            Err(Error::WidthMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn training_rejects_single_class_and_non_finite() {
        let one = matrix(vec![vec![1.0], vec![2.0]], vec![1, 1]);
        assert!(matches!(
            fit(&one, &Hyperparams::Logreg(LinearParams::new(1.0)), 0),
            Err(Error::SingleClass(_))
        ));
        let bad = matrix(vec![vec![1.0], vec![f64::NAN]], vec![0, 1]);
        assert!(matches!(
            fit(&bad, &Hyperparams::Rf(ForestParams::new(2, None)), 0),
            Err(Error::NonFinite { row: 1, column: 0 })
        ));
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let data = matrix(
            vec![
                vec![0.3, -1.0, 2.0],
                vec![1.5, 0.2, -0.7],
                vec![-0.4, 0.9, 0.1],
                vec![2.2, -0.3, 1.1],
                vec![0.0, 1.4, -1.6],
            ],
            vec![1, 0, 0, 1, 1],
        );
        for kind in [LinearKind::Logreg, LinearKind::Svm] {
            let mut p = LinearParams::new(0.7);
            p.class_weighted = true;
            let (problem, _) = linear_problem(&data, kind, &p).unwrap();
            let w = [0.21, -0.37, 0.05];
            let b = 0.13;
            let (gw, gb) = problem.gradient(&w, b);
            let h = 1e-6;
            for j in 0..3 {
                let mut wp = w;
                let mut wm = w;
                wp[j] += h;
                wm[j] -= h;
                let fd = (problem.objective(&wp, b) - problem.objective(&wm, b)) / (2.0 * h);
                assert!((fd - gw[j]).abs() < 1e-6, "{kind:?} w{j}: {fd} vs {}", gw[j]);
            }
            let fd = (problem.objective(&w, b + h) - problem.objective(&w, b - h)) / (2.0 * h);
            assert!((fd - gb).abs() < 1e-6, "{kind:?} b: {fd} vs {gb}");
        }
    }

    #[test]
    fn objective_is_monotone_under_backtracking() {
        let data = separable();
        for kind in [LinearKind::Logreg, LinearKind::Svm] {
            let (_, hist) = train_linear_traced(&data, kind, &LinearParams::new(1.0)).unwrap();
            assert!(hist.len() > 1);
            assert!(hist.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{kind:?}");
        }
    }

    #[test]
    fn logistic_optimum_has_zero_gradient() {
        let data = separable();
        let p = LinearParams::new(0.1);
        let (problem, _) = linear_problem(&data, LinearKind::Logreg, &p).unwrap();
        let (m, _) = train_linear_traced(&data, LinearKind::Logreg, &p).unwrap();
        let (g, gb) = problem.gradient(&m.weights, m.bias);
        let norm = (g.iter().map(|v| v * v).sum::<f64>() + gb * gb).sqrt();
        assert!(norm < 1e-6, "{norm}");
    }

    #[test]
    fn tfidf_columns_are_not_standardized() {
        let data = FeatureMatrix::new(
            vec!["liwc:a".into(), "tfidf:b".into()],
            vec!["u0".into(), "u1".into()],
            vec![0, 1],
            vec![
                SparseVector::from_dense(&[1.0, 0.5]),
                SparseVector::from_dense(&[3.0, 0.0]),
            ],
        )
        .unwrap();
        let st = Standardization::fit(&data);
        assert_eq!(st.mean, vec![2.0, 0.0]);
        assert_eq!(st.std, vec![1.0, 1.0]);
        assert_eq!(st.scaled, vec![true, false]);
        assert_eq!(st.apply(&data.rows[0]).to_dense(2), vec![-1.0, 0.5]);
    }

    #[test]
    fn unlimited_tree_without_bootstrap_fits_training_data() {
        // xor pattern: no single split lowers impurity at the root
        let data = matrix(
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
                vec![0.1, 0.1],
                vec![0.9, 0.9],
            ],
            vec![0, 1, 1, 0, 0, 0],
        );
        let mut p = ForestParams::new(1, None);
        p.bootstrap = false;
        p.max_features = MaxFeatures::All;
        let m = fit(&data, &Hyperparams::Rf(p), 4).unwrap();
        assert_eq!(m.predict(&data).unwrap(), data.labels);
    }

    #[test]
    fn forest_depth_is_capped() {
        let data = separable();
        let mut p = ForestParams::new(5, Some(1));
        p.max_features = MaxFeatures::All;
        let Model::Forest(f) = fit(&data, &Hyperparams::Rf(p), 1).unwrap() else {
            panic!()
        };
        assert!(f.trees.iter().all(|t| t.depth() <= 1));
    }

    #[test]
    fn forest_is_deterministic_across_thread_counts() {
        let data = separable();
        let hp = Hyperparams::Rf(ForestParams::new(25, Some(4)));
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| fit(&data, &hp, 11).unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| fit(&data, &hp, 11).unwrap());
        assert_eq!(one, many);
        let other = fit(&data, &hp, 12).unwrap();
        assert_ne!(one, other);
    }

    #[test]
    fn model_json_roundtrip_preserves_predictions() {
        let data = separable();
        for hp in [
            Hyperparams::Svm(LinearParams::new(1.0)),
            Hyperparams::Rf(ForestParams::new(5, Some(3))),
        ] {
            let m = fit(&data, &hp, 2).unwrap();
            let back = Model::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back.predict(&data).unwrap(), m.predict(&data).unwrap());
        }
    }

    #[test]
    fn max_features_rules() {
        assert_eq!(MaxFeatures::Sqrt.resolve(50), 7);
        assert_eq!(MaxFeatures::Log2.resolve(50), 5);
        assert_eq!(MaxFeatures::All.resolve(50), 50);
        assert_eq!(MaxFeatures::Count(80).resolve(50), 50);
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
    }
}
