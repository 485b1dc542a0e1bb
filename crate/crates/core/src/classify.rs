//! Two-class classifiers on embedded coordinates, and confusion-matrix metrics.
//!
//! Label 1 (abnormal) is the positive class throughout.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

/// Covariance shrinkage toward a scaled identity.
pub const LDA_SHRINKAGE: f64 = 1e-4;
/// L2 penalty on logistic weights (the bias is not penalized).
pub const LOGISTIC_PENALTY: f64 = 1e-6;

fn check_training(coords: &DMatrix<f64>, labels: &[Label]) -> Result<()> {
    if coords.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: coords.nrows(),
            right: labels.len(),
        });
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Config(format!("labels must be 0 or 1, found {bad}")));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 {
        return Err(Error::SingleClass(0));
    }
    if ones == labels.len() {
        return Err(Error::SingleClass(1));
    }
    Ok(())
}

fn check_width(coords: &DMatrix<f64>, k: usize) -> Result<()> {
    if coords.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: coords.ncols(),
        });
    }
    Ok(())
}

/// Fisher discriminant with equal priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub class_means: [Vec<f64>; 2],
    pub pooled_covariance: Vec<Vec<f64>>,
}

pub fn lda_fit(coords: &DMatrix<f64>, labels: &[Label]) -> Result<LdaModel> {
    check_training(coords, labels)?;
    let (n, k) = coords.shape();
    let mut means = [DVector::zeros(k), DVector::zeros(k)];
    let mut counts = [0usize; 2];
    for (i, &l) in labels.iter().enumerate() {
        means[l as usize] += coords.row(i).transpose();
        counts[l as usize] += 1;
    }
    for c in 0..2 {
        means[c] /= counts[c] as f64;
    }

    let mut scatter = DMatrix::<f64>::zeros(k, k);
    for (i, &l) in labels.iter().enumerate() {
        let d = coords.row(i).transpose() - &means[l as usize];
        scatter.ger(1.0, &d, &d, 1.0);
    }
    let dof = if n > 2 { n - 2 } else { n };
    let mut cov = scatter / dof as f64;
    let mean_var = cov.trace() / k as f64;
    let target = if mean_var > 0.0 { mean_var } else { 1.0 };
    cov *= 1.0 - LDA_SHRINKAGE;
    for j in 0..k {
        cov[(j, j)] += LDA_SHRINKAGE * target;
    }
    // symmetrize exactly
    let cov = (&cov + cov.transpose()) * 0.5;

    let diff = &means[1] - &means[0];
    let weights = match cov.clone().cholesky() {
        Some(ch) => ch.solve(&diff),
        None => cov
            .clone()
            .lu()
            .solve(&diff)
            .ok_or_else(|| Error::Config("pooled covariance is singular".into()))?,
    };
    let midpoint = (&means[0] + &means[1]) * 0.5;
    let bias = -weights.dot(&midpoint);
    Ok(LdaModel {
        weights: weights.iter().copied().collect(),
        bias,
        class_means: [
            means[0].iter().copied().collect(),
            means[1].iter().copied().collect(),
        ],
        pooled_covariance: (0..k).map(|i| cov.row(i).iter().copied().collect()).collect(),
    })
}

/// Predicted labels and scores `w.x + b`. A score of exactly zero is labelled 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub labels: Vec<Label>,
    pub scores: Vec<f64>,
}

fn linear_predict(weights: &[f64], bias: f64, coords: &DMatrix<f64>) -> Result<Predictions> {
    check_width(coords, weights.len())?;
    let scores: Vec<f64> = (0..coords.nrows())
        .map(|i| {
            coords
                .row(i)
                .iter()
                .zip(weights)
                .map(|(x, w)| x * w)
                .sum::<f64>()
                + bias
        })
        .collect();
    let labels = scores.iter().map(|&s| (s > 0.0) as Label).collect();
    Ok(Predictions { labels, scores })
}

pub fn lda_predict(model: &LdaModel, coords: &DMatrix<f64>) -> Result<Predictions> {
    linear_predict(&model.weights, model.bias, coords)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized negative log-likelihood after each accepted step, starting at zero weights.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Penalized negative log-likelihood; `params` holds the weights followed by the bias.
pub fn logistic_objective(coords: &DMatrix<f64>, labels: &[Label], params: &[f64]) -> f64 {
    let k = coords.ncols();
    let (w, b) = (&params[..k], params[k]);
    let data: f64 = (0..coords.nrows())
        .map(|i| {
            let z = coords.row(i).iter().zip(w).map(|(x, w)| x * w).sum::<f64>() + b;
            softplus(z) - labels[i] as f64 * z
        })
        .sum();
    data + 0.5 * LOGISTIC_PENALTY * w.iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of [`logistic_objective`].
pub fn logistic_gradient(coords: &DMatrix<f64>, labels: &[Label], params: &[f64]) -> Vec<f64> {
    let k = coords.ncols();
    let (w, b) = (&params[..k], params[k]);
    let mut g = vec![0.0; k + 1];
    for i in 0..coords.nrows() {
        let z = coords.row(i).iter().zip(w).map(|(x, w)| x * w).sum::<f64>() + b;
        let r = sigmoid(z) - labels[i] as f64;
        for (j, x) in coords.row(i).iter().enumerate() {
            g[j] += r * x;
        }
        g[k] += r;
    }
    for j in 0..k {
        g[j] += LOGISTIC_PENALTY * w[j];
    }
    g
}

/// Newton iterations with backtracking, so the objective never increases.
pub fn logistic_fit(
    coords: &DMatrix<f64>,
    labels: &[Label],
    options: LogisticOptions,
) -> Result<LogisticModel> {
    check_training(coords, labels)?;
    let (n, k) = coords.shape();
    let mut params = vec![0.0; k + 1];
    let mut loss = logistic_objective(coords, labels, &params);
    let mut history = vec![loss];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iter {
        let grad = logistic_gradient(coords, labels, &params);
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < options.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut hess = DMatrix::<f64>::zeros(k + 1, k + 1);
        let mut xi = DVector::<f64>::zeros(k + 1);
        for i in 0..n {
            for (j, x) in coords.row(i).iter().enumerate() {
                xi[j] = *x;
            }
            xi[k] = 1.0;
            let z = xi.rows(0, k).iter().zip(&params[..k]).map(|(x, w)| x * w).sum::<f64>() + params[k];
            let s = sigmoid(z);
            hess.ger(s * (1.0 - s), &xi, &xi, 1.0);
        }
        for j in 0..k {
            hess[(j, j)] += LOGISTIC_PENALTY;
        }
        let g = DVector::from_vec(grad.clone());
        let direction = hess
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&g))
            .or_else(|| hess.lu().solve(&g))
            .filter(|d| d.iter().all(|v| v.is_finite()) && d.dot(&g) > 0.0)
            .unwrap_or(g);

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = params
                .iter()
                .zip(direction.iter())
                .map(|(p, d)| p - step * d)
                .collect();
            let trial_loss = logistic_objective(coords, labels, &trial);
            if trial_loss <= loss {
                params = trial;
                loss = trial_loss;
                history.push(loss);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no descent possible at working precision
            let grad = logistic_gradient(coords, labels, &params);
            converged = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < options.tol;
            break;
        }
    }
    let bias = params[k];
    params.truncate(k);
    Ok(LogisticModel {
        weights: params,
        bias,
        iterations,
        converged,
        loss_history: history,
    })
}

pub fn logistic_predict(model: &LogisticModel, coords: &DMatrix<f64>) -> Result<Predictions> {
    linear_predict(&model.weights, model.bias, coords)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lda,
    Logistic,
}

impl ClassifierKind {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::Lda => "lda",
            ClassifierKind::Logistic => "logistic",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lda" => Ok(ClassifierKind::Lda),
            "logistic" | "logreg" => Ok(ClassifierKind::Logistic),
            other => Err(Error::Config(format!("unknown classifier `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Lda(LdaModel),
    Logistic(LogisticModel),
}

impl Classifier {
    pub fn fit(kind: ClassifierKind, coords: &DMatrix<f64>, labels: &[Label]) -> Result<Self> {
        Ok(match kind {
            ClassifierKind::Lda => Classifier::Lda(lda_fit(coords, labels)?),
            ClassifierKind::Logistic => {
                Classifier::Logistic(logistic_fit(coords, labels, LogisticOptions::default())?)
            }
        })
    }

    pub fn predict(&self, coords: &DMatrix<f64>) -> Result<Predictions> {
        match self {
            Classifier::Lda(m) => lda_predict(m, coords),
            Classifier::Logistic(m) => logistic_predict(m, coords),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Lda(_) => ClassifierKind::Lda,
            Classifier::Logistic(_) => ClassifierKind::Logistic,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Ratios with a zero denominator are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Metrics {
    pub fn from_confusion(confusion: Confusion) -> Self {
        let Confusion { tp, fp, fn_, tn } = confusion;
        Metrics {
            accuracy: (tp + tn) as f64 / confusion.total() as f64,
            precision: ratio(tp, tp + fp),
            sensitivity: ratio(tp, tp + fn_),
            specificity: ratio(tn, tn + fp),
            confusion,
        }
    }
}

pub fn compute_metrics(predicted: &[Label], truth: &[Label]) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::TooFewSamples("no predictions to score".into()));
    }
    let mut c = Confusion::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p == 1, t == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(Metrics::from_confusion(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn column(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    #[test]
    fn symmetric_one_dimensional_lda() {
        let x = column(&[-1.2, -1.0, -0.8, 0.8, 1.0, 1.2]);
        let y = [0, 0, 0, 1, 1, 1];
        let m = lda_fit(&x, &y).unwrap();
        assert!(m.weights[0] > 0.0);
        assert_abs_diff_eq!(m.bias, 0.0, epsilon = 1e-12);
        let means = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        assert_eq!(lda_predict(&m, &means).unwrap().labels, vec![0, 1]);
        let boundary = lda_predict(&m, &column(&[0.0])).unwrap();
        assert_eq!(boundary.scores[0], 0.0);
        assert_eq!(boundary.labels, vec![0]);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = column(&[1.0, 2.0]);
        assert!(matches!(lda_fit(&x, &[0, 0]), Err(Error::SingleClass(0))));
        assert!(matches!(
            logistic_fit(&x, &[1, 1], LogisticOptions::default()),
            Err(Error::SingleClass(1))
        ));
    }

    #[test]
    fn predict_checks_width() {
        let m = lda_fit(&column(&[-1.0, -0.5, 0.5, 1.0]), &[0, 0, 1, 1]).unwrap();
        assert!(matches!(
            lda_predict(&m, &DMatrix::zeros(1, 2)),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (DMatrix<f64>, Vec<Label>) {
        let labels: Vec<Label> = (0..n).map(|i| (i % 2) as Label).collect();
        let x = DMatrix::from_fn(n, k, |i, _| rng.random_range(-1.0..1.0) + 1.5 * labels[i] as f64);
        (x, labels)
    }

    #[test]
    fn lda_invariant_under_shift_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (x, y) = random_instance(&mut rng, 40, 3);
            let (test, _) = random_instance(&mut rng, 30, 3);
            let base = lda_predict(&lda_fit(&x, &y).unwrap(), &test).unwrap().labels;

            let shift = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let shifted = |m: &DMatrix<f64>| {
                let mut out = m.clone();
                for mut r in out.row_iter_mut() {
                    r += shift.transpose();
                }
                out
            };
            let moved = lda_predict(&lda_fit(&shifted(&x), &y).unwrap(), &shifted(&test)).unwrap();
            assert_eq!(moved.labels, base);

            let scale = DMatrix::from_diagonal(&DVector::from_fn(3, |_, _| rng.random_range(0.1..10.0)));
            let scaled = lda_predict(&lda_fit(&(&x * &scale), &y).unwrap(), &(&test * &scale)).unwrap();
            assert_eq!(scaled.labels, base);
        }
    }

    #[test]
    fn symmetric_logistic() {
        let x = column(&[-2.0, -1.0, -0.5, 0.5, 1.0, 2.0, -0.3, 0.3]);
        let y = [0, 0, 0, 1, 1, 1, 1, 0];
        let m = logistic_fit(&x, &y, LogisticOptions::default()).unwrap();
        assert!(m.converged);
        assert_abs_diff_eq!(m.bias, 0.0, epsilon = 1e-8);
        assert!(m.weights[0] > 0.0);
    }

    #[test]
    fn separable_logistic_stays_finite() {
        let x = column(&[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let y = [0, 0, 0, 1, 1, 1];
        let m = logistic_fit(&x, &y, LogisticOptions::default()).unwrap();
        assert!(m.weights[0].is_finite() && m.bias.is_finite());
        assert!(m.converged, "iterations {}", m.iterations);
        let p = logistic_predict(&m, &x).unwrap();
        assert_eq!(p.labels, y.to_vec());
    }

    #[test]
    fn logistic_optimum_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let n = 60;
            let labels: Vec<Label> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let x = DMatrix::from_fn(n, 3, |i, _| rng.random_range(-1.0..1.0) + 0.5 * labels[i] as f64);
            let m = logistic_fit(&x, &labels, LogisticOptions::default()).unwrap();
            let mut params = m.weights.clone();
            params.push(m.bias);
            // central differences, independent of the analytic gradient
            for j in 0..params.len() {
                let h = 1e-5;
                let mut up = params.clone();
                up[j] += h;
                let mut down = params.clone();
                down[j] -= h;
                let fd = (logistic_objective(&x, &labels, &up) - logistic_objective(&x, &labels, &down)) / (2.0 * h);
                assert!(fd.abs() < 1e-6, "component {j}: {fd}");
            }
            assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn metrics_arithmetic() {
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for (p, t, count) in [(1, 1, 48), (0, 1, 2), (0, 0, 42), (1, 0, 8)] {
            pred.extend(std::iter::repeat(p).take(count));
            truth.extend(std::iter::repeat(t).take(count));
        }
        let m = compute_metrics(&pred, &truth).unwrap();
        assert_abs_diff_eq!(m.accuracy, 0.90, epsilon = 1e-12);
        assert_abs_diff_eq!(m.sensitivity.unwrap(), 0.96, epsilon = 1e-12);
        assert_abs_diff_eq!(m.specificity.unwrap(), 0.84, epsilon = 1e-12);
        assert_abs_diff_eq!(m.precision.unwrap(), 48.0 / 56.0, epsilon = 1e-12);
        assert_eq!(
            m.confusion,
            Confusion {
                tp: 48,
                fp: 8,
                fn_: 2,
                tn: 42
            }
        );
    }

    #[test]
    fn degenerate_metrics() {
        let perfect = compute_metrics(&[0, 1, 1], &[0, 1, 1]).unwrap();
        assert_eq!(perfect.accuracy, 1.0);
        assert_eq!(perfect.precision, Some(1.0));
        assert_eq!(perfect.sensitivity, Some(1.0));
        assert_eq!(perfect.specificity, Some(1.0));
        let silent = compute_metrics(&[0, 0, 0], &[0, 1, 1]).unwrap();
        assert_eq!(silent.precision, None);
        assert!(matches!(compute_metrics(&[0], &[0, 1]), Err(Error::LengthMismatch { .. })));
        assert!(compute_metrics(&[], &[]).is_err());
    }

    #[test]
    fn classifier_json_round_trip() {
        let m = Classifier::fit(ClassifierKind::Lda, &column(&[-1.0, -0.7, 0.4, 1.1]), &[0, 0, 1, 1]).unwrap();
        let back = Classifier::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(m.to_json().unwrap().contains("\"kind\": \"lda\""));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn metrics_ignore_order(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..60), seed in any::<u64>()) {
                let (p, t): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
                let mut idx: Vec<usize> = (0..pairs.len()).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for i in (1..idx.len()).rev() {
                    idx.swap(i, rand::Rng::random_range(&mut rng, 0..=i));
                }
                let p2: Vec<_> = idx.iter().map(|&i| p[i]).collect();
                let t2: Vec<_> = idx.iter().map(|&i| t[i]).collect();
                prop_assert_eq!(compute_metrics(&p, &t).unwrap(), compute_metrics(&p2, &t2).unwrap());
            }
        }
    }
}
