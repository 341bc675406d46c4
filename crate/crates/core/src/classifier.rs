//! Multinomial logistic regression trained by full-batch gradient descent.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// L2 penalty on the weights (the intercept is not penalized).
    pub l2: f64,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
    pub max_steps: usize,
    /// Seeds data splits derived from this configuration.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            tol: 1e-6,
            max_steps: 1000,
            seed: 0,
        }
    }
}

/// `k × d` weights plus intercepts for `k` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    weights: Matrix,
    intercept: Vec<f64>,
    classes: Vec<String>,
}

impl LinearClassifier {
    pub fn new(weights: Matrix, intercept: Vec<f64>, classes: Vec<String>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::TooFewClasses {
                needed: 2,
                got: classes.len(),
            });
        }
        if weights.rows() != classes.len() || intercept.len() != classes.len() {
            return Err(Error::DimensionMismatch {
                expected: classes.len(),
                got: weights.rows().min(intercept.len()),
            });
        }
        if !weights.is_finite() || intercept.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col: 0 });
        }
        Ok(Self {
            weights,
            intercept,
            classes,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn intercept(&self) -> &[f64] {
        &self.intercept
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn d(&self) -> usize {
        self.weights.cols()
    }

    /// Weight rows scaled to unit norm (zero rows stay zero).
    pub fn unit_weights(&self) -> Matrix {
        let mut w = self.weights.clone();
        for i in 0..w.rows() {
            let n = norm(w.row(i));
            if n > 0.0 {
                w.row_mut(i).iter_mut().for_each(|v| *v /= n);
            }
        }
        w
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .row_iter()
            .zip(&self.intercept)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }

    /// Index of the highest logit; ties go to the lowest index.
    pub fn predict_index(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }

    pub fn predict(&self, x: &[f64]) -> &str {
        &self.classes[self.predict_index(x)]
    }

    pub fn accuracy(&self, x: &Matrix, y: &[usize]) -> f64 {
        if y.is_empty() {
            return 0.0;
        }
        let hits = x
            .row_iter()
            .zip(y)
            .filter(|(r, &c)| self.predict_index(r) == c)
            .count();
        hits as f64 / y.len() as f64
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Trains on string labels; classes are the sorted distinct labels.
pub fn train_linear_classifier<S: AsRef<str>>(
    x: &Matrix,
    labels: &[S],
    config: &TrainConfig,
) -> Result<LinearClassifier> {
    let set: BTreeSet<&str> = labels.iter().map(|s| s.as_ref()).collect();
    let classes: Vec<String> = set.into_iter().map(String::from).collect();
    let y: Vec<usize> = labels
        .iter()
        .map(|s| classes.iter().position(|c| c == s.as_ref()).expect("present"))
        .collect();
    fit(x, &y, classes, config)
}

/// Trains on class indices `y[i] ∈ 0..classes.len()`.
///
/// Minimizes mean cross-entropy plus `l2/2 · ‖W‖²` with Nesterov-accelerated
/// gradient steps of size `1/L` (a Böhning-style curvature bound), restarting
/// momentum whenever it points uphill. Weights start at zero, so every
/// weight row stays in the span of the training rows and the rows sum to
/// zero.
pub fn fit(x: &Matrix, y: &[usize], classes: Vec<String>, config: &TrainConfig) -> Result<LinearClassifier> {
    let (n, d) = (x.rows(), x.cols());
    let k = classes.len();
    if k < 2 {
        return Err(Error::TooFewClasses { needed: 2, got: k });
    }
    if y.len() != n {
        return Err(Error::LabelCount {
            labels: y.len(),
            rows: n,
        });
    }
    if n == 0 || d == 0 {
        return Err(Error::EmptyMatrix { rows: n, cols: d });
    }
    if !x.is_finite() {
        let i = x.as_slice().iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(Error::NonFinite { row: i / d, col: i % d });
    }
    let mut counts = vec![0usize; k];
    for &c in y {
        if c >= k {
            return Err(Error::InvalidParameter(alloc::format!("class index {c} out of range")));
        }
        counts[c] += 1;
    }
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass(classes[c].clone()));
    }

    let step = 1.0 / lipschitz_bound(x, config.l2);
    let p = k * (d + 1);
    // Parameters laid out as k rows of [w_0 .. w_{d-1}, b].
    let mut theta = vec![0.0; p];
    let mut prev = theta.clone();
    let mut momentum = 1.0f64;
    let mut grad = vec![0.0; p];
    for _ in 0..config.max_steps {
        let t_next = (1.0 + libm::sqrt(1.0 + 4.0 * momentum * momentum)) / 2.0;
        let beta = (momentum - 1.0) / t_next;
        let look: Vec<f64> = theta
            .iter()
            .zip(&prev)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        gradient(x, y, k, config.l2, &look, &mut grad);
        if norm(&grad) <= config.tol {
            theta = look;
            break;
        }
        let mut next = look.clone();
        axpy(-step, &grad, &mut next);
        // Adaptive restart: drop momentum when the step opposes it.
        let uphill: f64 = grad
            .iter()
            .zip(next.iter().zip(&theta))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        prev = core::mem::replace(&mut theta, next);
        momentum = if uphill > 0.0 { 1.0 } else { t_next };
    }

    let mut weights = Matrix::zeros(k, d);
    let mut intercept = vec![0.0; k];
    for c in 0..k {
        weights.row_mut(c).copy_from_slice(&theta[c * (d + 1)..c * (d + 1) + d]);
        intercept[c] = theta[c * (d + 1) + d];
    }
    LinearClassifier::new(weights, intercept, classes)
}

fn gradient(x: &Matrix, y: &[usize], k: usize, l2: f64, theta: &[f64], grad: &mut [f64]) {
    let (n, d) = (x.rows(), x.cols());
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut probs = vec![0.0; k];
    for (i, row) in x.row_iter().enumerate() {
        for c in 0..k {
            let w = &theta[c * (d + 1)..(c + 1) * (d + 1)];
            probs[c] = dot(&w[..d], row) + w[d];
        }
        let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in probs.iter_mut() {
            *v = libm::exp(*v - max);
            z += *v;
        }
        for c in 0..k {
            let r = probs[c] / z - if y[i] == c { 1.0 } else { 0.0 };
            let g = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
            axpy(r, row, &mut g[..d]);
            g[d] += r;
        }
    }
    let inv_n = 1.0 / n as f64;
    for c in 0..k {
        let off = c * (d + 1);
        for j in 0..d {
            grad[off + j] = grad[off + j] * inv_n + l2 * theta[off + j];
        }
        grad[off + d] *= inv_n;
    }
}

/// Upper bound on the gradient's Lipschitz constant: half the top
/// eigenvalue of the intercept-augmented second-moment matrix plus the
/// penalty, padded because power iteration approaches from below.
fn lipschitz_bound(x: &Matrix, l2: f64) -> f64 {
    let (n, d) = (x.rows(), x.cols());
    let mut v = vec![1.0; d + 1];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut next = vec![0.0; d + 1];
        for row in x.row_iter() {
            let proj = dot(row, &v[..d]) + v[d];
            axpy(proj, row, &mut next[..d]);
            next[d] += proj;
        }
        next.iter_mut().for_each(|e| *e /= n as f64);
        let nn = norm(&next);
        if nn == 0.0 {
            break;
        }
        let converged = libm::fabs(nn - lambda) <= 1e-9 * nn;
        lambda = nn;
        v = next.into_iter().map(|e| e / nn).collect();
        if converged {
            break;
        }
    }
    0.5 * lambda * 1.05 + l2 + 1e-12
}

/// Shuffled split into (train, dev) row indices. The dev part holds
/// `round(n · dev_fraction)` rows but never all of them.
pub fn train_dev_split(n: usize, dev_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_dev = libm::round(n as f64 * dev_fraction.clamp(0.0, 1.0)) as usize;
    let n_dev = n_dev.min(n.saturating_sub(1));
    let dev = idx[..n_dev].to_vec();
    let train = idx[n_dev..].to_vec();
    (train, dev)
}

pub fn select_rows(x: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(idx.len(), x.cols());
    for (o, &i) in idx.iter().enumerate() {
        out.row_mut(o).copy_from_slice(x.row(i));
    }
    out
}

/// Share of the most frequent class among `y`.
pub fn majority_rate(y: &[usize]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let k = y.iter().copied().max().unwrap_or(0) + 1;
    let mut counts = vec![0usize; k];
    for &c in y {
        counts[c] += 1;
    }
    *counts.iter().max().unwrap_or(&0) as f64 / y.len() as f64
}

/// Accuracy of a freshly trained classifier on a held-out split.
pub fn holdout_accuracy(
    x: &Matrix,
    y: &[usize],
    classes: &[String],
    config: &TrainConfig,
    dev_fraction: f64,
) -> Result<f64> {
    let (train, dev) = train_dev_split(x.rows(), dev_fraction, config.seed);
    let xt = select_rows(x, &train);
    let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let clf = fit(&xt, &yt, classes.to_vec(), config)?;
    let xd = select_rows(x, &dev);
    let yd: Vec<usize> = dev.iter().map(|&i| y[i]).collect();
    Ok(clf.accuracy(&xd, &yd))
}
