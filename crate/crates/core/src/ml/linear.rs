//! Regularized linear classifiers trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{check_finite, class_weights, signed};
use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    Logreg,
    Svm,
}

fn default_max_epochs() -> usize {
    500
}

fn default_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    /// Inverse regularization strength.
    pub c: f64,
    #[serde(default)]
    pub class_weighted: bool,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    /// Stop once the gradient norm falls below this.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl LinearParams {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            class_weighted: false,
            max_epochs: default_max_epochs(),
            tol: default_tol(),
        }
    }
}

/// Per-column centering and scaling; identity for pass-through columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub scaled: Vec<bool>,
}

impl Standardization {
    /// Fits on `data`; tf-idf columns are left as they are.
    pub fn fit(data: &FeatureMatrix) -> Self {
        let width = data.width();
        let scaled = data.dense_mask();
        let n = data.len().max(1) as f64;
        let mut sum = vec![0.0; width];
        for row in &data.rows {
            for (j, v) in row.iter() {
                sum[j] += v;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let mut sq = vec![0.0; width];
        let mut nnz = vec![0usize; width];
        for row in &data.rows {
            for (j, v) in row.iter() {
                sq[j] += (v - mean[j]) * (v - mean[j]);
                nnz[j] += 1;
            }
        }
        let std = (0..width)
            .map(|j| {
                // implicit zeros contribute mean^2 each
                let var = (sq[j] + (data.len() - nnz[j]) as f64 * mean[j] * mean[j]) / n;
                let s = var.sqrt();
                if s > 1e-12 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let mut st = Standardization { mean, std, scaled };
        for j in 0..width {
            if !st.scaled[j] {
                st.mean[j] = 0.0;
                st.std[j] = 1.0;
            }
        }
        st
    }

    pub fn apply(&self, row: &SparseVector) -> SparseVector {
        let width = self.mean.len();
        let mut out = SparseVector::default();
        let mut it = row.iter().peekable();
        for j in 0..width {
            let v = match it.peek() {
                Some(&(i, v)) if i == j => {
                    it.next();
                    v
                }
                _ => 0.0,
            };
            let z = if self.scaled[j] {
                (v - self.mean[j]) / self.std[j]
            } else {
                v
            };
            if z != 0.0 {
                out.indices.push(j);
                out.values.push(z);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    /// Weights in standardized feature space.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardization: Standardization,
}

/// Training problem in standardized space, shared by the objective,
/// the gradient and the optimizer.
pub struct LinearProblem {
    pub rows: Vec<SparseVector>,
    /// +1 / -1.
    pub targets: Vec<f64>,
    pub sample_weights: Vec<f64>,
    pub c: f64,
    pub kind: LinearKind,
    pub width: usize,
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LinearProblem {
    pub fn new(
        rows: Vec<SparseVector>,
        labels: &[u8],
        sample_weights: Vec<f64>,
        c: f64,
        kind: LinearKind,
        width: usize,
    ) -> Self {
        Self {
            rows,
            targets: labels.iter().map(|&l| signed(l)).collect(),
            sample_weights,
            c,
            kind,
            width,
        }
    }

    fn loss(&self, margin: f64) -> f64 {
        match self.kind {
            LinearKind::Logreg => log1p_exp(-margin),
            LinearKind::Svm => (1.0 - margin).max(0.0),
        }
    }

    /// d loss / d margin.
    fn dloss(&self, margin: f64) -> f64 {
        match self.kind {
            LinearKind::Logreg => -sigmoid(-margin),
            LinearKind::Svm => {
                if margin < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// (1/n) sum_i c_i loss(y_i f(x_i)) + ||w||^2 / (2C).
    pub fn objective(&self, w: &[f64], b: f64) -> f64 {
        let n = self.rows.len() as f64;
        let data: f64 = self
            .rows
            .iter()
            .zip(&self.targets)
            .zip(&self.sample_weights)
            .map(|((x, &y), &cw)| cw * self.loss(y * (x.dot(w) + b)))
            .sum();
        data / n + w.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.c)
    }

    /// Gradient with respect to (w, b); the hinge subgradient at margin 1 is 0.
    pub fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let n = self.rows.len() as f64;
        let mut gw = vec![0.0; self.width];
        let mut gb = 0.0;
        for ((x, &y), &cw) in self.rows.iter().zip(&self.targets).zip(&self.sample_weights) {
            let coef = cw * self.dloss(y * (x.dot(w) + b)) * y / n;
            if coef != 0.0 {
                for (j, v) in x.iter() {
                    gw[j] += coef * v;
                }
                gb += coef;
            }
        }
        for (g, wj) in gw.iter_mut().zip(w) {
            *g += wj / self.c;
        }
        (gw, gb)
    }

    /// Gradient descent with Armijo backtracking. Returns the final
    /// parameters and the objective after every accepted epoch (starting
    /// with the initial value).
    pub fn solve(&self, max_epochs: usize, tol: f64) -> (Vec<f64>, f64, Vec<f64>) {
        const ARMIJO: f64 = 1e-4;
        const MAX_HALVINGS: usize = 60;
        let mut w = vec![0.0; self.width];
        let mut b = 0.0;
        let mut f = self.objective(&w, b);
        let mut history = vec![f];
        let mut step = 1.0;
        for _ in 0..max_epochs {
            let (gw, gb) = self.gradient(&w, b);
            let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
            if gnorm2.sqrt() < tol {
                break;
            }
            step *= 2.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let w_new: Vec<f64> = w.iter().zip(&gw).map(|(wj, g)| wj - step * g).collect();
                let b_new = b - step * gb;
                let f_new = self.objective(&w_new, b_new);
                if f_new <= f - ARMIJO * step * gnorm2 {
                    accepted = Some((w_new, b_new, f_new));
                    break;
                }
                step *= 0.5;
            }
            match accepted {
                Some((w_new, b_new, f_new)) => {
                    w = w_new;
                    b = b_new;
                    f = f_new;
                    history.push(f);
                }
                None => break,
            }
        }
        (w, b, history)
    }
}

/// Builds the standardized problem for `data`.
pub fn linear_problem(
    data: &FeatureMatrix,
    kind: LinearKind,
    params: &LinearParams,
) -> Result<(LinearProblem, Standardization)> {
    if !(params.c > 0.0) {
        return Err(Error::Config(format!("C must be positive, got {}", params.c)));
    }
    check_finite(data)?;
    let cw = class_weights(&data.labels)?;
    let st = Standardization::fit(data);
    let rows = data.rows.iter().map(|r| st.apply(r)).collect();
    let weights = data
        .labels
        .iter()
        .map(|&l| {
            if params.class_weighted {
                cw[l as usize]
            } else {
                1.0
            }
        })
        .collect();
    Ok((
        LinearProblem::new(rows, &data.labels, weights, params.c, kind, data.width()),
        st,
    ))
}

/// Trains a logistic-regression or linear-SVM model. The optimizer is
/// deterministic, so `_seed` only exists for a uniform training interface.
pub fn train_linear(
    data: &FeatureMatrix,
    kind: LinearKind,
    params: &LinearParams,
    _seed: u64,
) -> Result<LinearModel> {
    train_linear_traced(data, kind, params).map(|(m, _)| m)
}

/// As [`train_linear`], also returning the per-epoch objective values.
pub fn train_linear_traced(
    data: &FeatureMatrix,
    kind: LinearKind,
    params: &LinearParams,
) -> Result<(LinearModel, Vec<f64>)> {
    let (problem, standardization) = linear_problem(data, kind, params)?;
    let (weights, bias, history) = problem.solve(params.max_epochs, params.tol);
    Ok((
        LinearModel {
            kind,
            weights,
            bias,
            standardization,
        },
        history,
    ))
}

impl LinearModel {
    pub fn width(&self) -> usize {
        self.weights.len()
    }

    /// Raw decision values w.z + b.
    pub fn decision(&self, rows: &[SparseVector]) -> Vec<f64> {
        rows.iter()
            .map(|r| self.standardization.apply(r).dot(&self.weights) + self.bias)
            .collect()
    }

    /// Probability of the positive class for logistic regression, the margin
    /// for SVMs.
    pub fn scores(&self, rows: &[SparseVector]) -> Vec<f64> {
        let d = self.decision(rows);
        match self.kind {
            LinearKind::Logreg => d.into_iter().map(sigmoid).collect(),
            LinearKind::Svm => d,
        }
    }

    /// Positive iff probability > 0.5 (logreg) or margin > 0 (svm).
    pub fn predict_rows(&self, rows: &[SparseVector]) -> Vec<u8> {
        self.decision(rows)
            .into_iter()
            .map(|d| u8::from(d > 0.0))
            .collect()
    }
}
