//! Iterative nullspace projection.
//!
//! Each round trains a linear language classifier on the data projected so
//! far, adds the classifier's weight directions to an orthonormal basis of
//! the removed subspace, and re-projects. The nullspace projection is
//! `P_N = I - B^T B` for that basis `B`, and the rowspace projection is
//! `P_R = I - P_N`.

use alloc::vec::Vec;

use crate::classifier::{fit, majority_rate, select_rows, train_dev_split, LinearClassifier, TrainConfig};
use crate::error::{Error, Result};
use crate::linalg::{dot, orthogonalize_against, row_space_basis, Matrix};
use crate::repr::{Layer, RepresentationSet};

/// Singular values at or below `REL_RANK_TOL · σ_max` count as zero.
pub const REL_RANK_TOL: f64 = 1e-10;

/// A new direction must keep at least this much norm after being
/// orthogonalized against the directions already removed.
const NEW_DIRECTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct NullspaceProjection {
    pub matrix: Matrix,
    /// Rank of the weight matrix, i.e. how many directions were removed.
    pub removed: usize,
    /// Set when the weights were all zero and the identity was returned.
    pub degenerate: bool,
}

/// Orthogonal projection onto the nullspace of the rows of `w`.
pub fn nullspace_projection(w: &Matrix) -> Result<NullspaceProjection> {
    if !w.is_finite() {
        return Err(Error::NonFinite { row: 0, col: 0 });
    }
    let d = w.cols();
    let basis = row_space_basis(w, REL_RANK_TOL);
    Ok(NullspaceProjection {
        matrix: complement_projection(&basis, d),
        removed: basis.len(),
        degenerate: basis.is_empty(),
    })
}

/// `I - B^T B` for orthonormal rows `B`.
fn complement_projection(basis: &[Vec<f64>], d: usize) -> Matrix {
    let mut p = Matrix::identity(d);
    for b in basis {
        for i in 0..d {
            if b[i] == 0.0 {
                continue;
            }
            let row = p.row_mut(i);
            for j in 0..d {
                row[j] -= b[i] * b[j];
            }
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct InlpConfig {
    /// Upper bound on classifier rounds.
    pub iterations: usize,
    pub train: TrainConfig,
    /// Share of rows held out to score each round's classifier.
    pub dev_fraction: f64,
    /// Stop once a round's held-out accuracy is within this margin of the
    /// majority-class rate. `None` always runs the full budget.
    pub stop_margin: Option<f64>,
    pub seed: u64,
}

impl Default for InlpConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            train: TrainConfig::default(),
            dev_fraction: 0.2,
            stop_margin: Some(0.02),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InlpStatus {
    /// Every requested round ran.
    Completed,
    /// Language identity stopped being predictable before the budget ran out.
    Converged,
    /// The nullspace was used up (or a round found no new direction), so the
    /// budget was truncated.
    Exhausted,
}

impl InlpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            InlpStatus::Completed => "completed",
            InlpStatus::Converged => "converged",
            InlpStatus::Exhausted => "exhausted",
        }
    }
}

/// Complementary nullspace / rowspace projections and the classifier stack
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    nullspace: Matrix,
    rowspace: Matrix,
    classifiers: Vec<LinearClassifier>,
    source_layer: Layer,
    seed: u64,
    status: InlpStatus,
    /// Held-out accuracy of every classifier trained, including a final
    /// one that triggered convergence and was not stored.
    dev_accuracy: Vec<f64>,
}

impl ProjectionPair {
    /// Reassembles a pair from a stored nullspace projection; the rowspace
    /// projection is recomputed as `I - P_N`.
    pub fn from_parts(
        nullspace: Matrix,
        classifiers: Vec<LinearClassifier>,
        source_layer: Layer,
        seed: u64,
        status: InlpStatus,
        dev_accuracy: Vec<f64>,
    ) -> Result<Self> {
        if nullspace.rows() != nullspace.cols() || nullspace.rows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: nullspace.rows(),
                got: nullspace.cols(),
            });
        }
        if !nullspace.is_finite() {
            return Err(Error::NonFinite { row: 0, col: 0 });
        }
        if let Some(c) = classifiers.iter().find(|c| c.d() != nullspace.rows()) {
            return Err(Error::DimensionMismatch {
                expected: nullspace.rows(),
                got: c.d(),
            });
        }
        let rowspace = complement(&nullspace);
        Ok(Self {
            nullspace,
            rowspace,
            classifiers,
            source_layer,
            seed,
            status,
            dev_accuracy,
        })
    }

    pub fn identity(d: usize, source_layer: Layer) -> Self {
        Self::from_parts(Matrix::identity(d), Vec::new(), source_layer, 0, InlpStatus::Completed, Vec::new())
            .expect("identity is a valid projection")
    }

    pub fn d(&self) -> usize {
        self.nullspace.rows()
    }

    pub fn nullspace(&self) -> &Matrix {
        &self.nullspace
    }

    pub fn rowspace(&self) -> &Matrix {
        &self.rowspace
    }

    pub fn classifiers(&self) -> &[LinearClassifier] {
        &self.classifiers
    }

    /// Number of classifier rounds whose directions were removed.
    pub fn iterations(&self) -> usize {
        self.classifiers.len()
    }

    pub fn source_layer(&self) -> Layer {
        self.source_layer
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn status(&self) -> InlpStatus {
        self.status
    }

    pub fn dev_accuracy(&self) -> &[f64] {
        &self.dev_accuracy
    }

    /// Rank of `P_N`, read off its trace (exact up to rounding for an
    /// orthogonal projection).
    pub fn nullspace_rank(&self) -> usize {
        let tr: f64 = (0..self.d()).map(|i| self.nullspace.get(i, i)).sum();
        libm::round(tr) as usize
    }

    /// Applies `P` to every row of `x` (`P` is symmetric, so `x P = P x`).
    pub fn apply(&self, space: Space, x: &Matrix) -> Result<Matrix> {
        let p = match space {
            Space::Nullspace => &self.nullspace,
            Space::Rowspace => &self.rowspace,
        };
        x.matmul(p)
    }

    pub fn project_set(&self, space: Space, set: &RepresentationSet) -> Result<RepresentationSet> {
        if set.d() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: set.d(),
            });
        }
        let m = self.apply(space, &set.to_matrix())?;
        RepresentationSet::from_matrix(&m, set.labels().to_vec(), set.layer(), set.languages().to_vec())
    }

    /// Largest `|w · P_N · x|` over stored classifiers (unit-normalized
    /// rows) and the rows of `x`.
    pub fn guarantee_residual(&self, x: &Matrix) -> Result<f64> {
        let projected = self.apply(Space::Nullspace, x)?;
        let mut worst = 0.0f64;
        for clf in &self.classifiers {
            let w = clf.unit_weights();
            for r in projected.row_iter() {
                for wr in w.row_iter() {
                    worst = worst.max(dot(wr, r).abs());
                }
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Nullspace,
    Rowspace,
}

fn complement(p: &Matrix) -> Matrix {
    let d = p.rows();
    let mut r = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let id = if i == j { 1.0 } else { 0.0 };
            r.set(i, j, id - p.get(i, j));
        }
    }
    r
}

fn project_rows(x: &Matrix, basis: &[Vec<f64>]) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        for b in basis {
            let c = dot(row, b);
            for (v, bj) in row.iter_mut().zip(b) {
                *v -= c * bj;
            }
        }
    }
    out
}

/// Runs iterative nullspace projection against the language labels of `set`.
///
/// The input set is never modified; every round works on a fresh projected
/// copy of the original rows.
pub fn run_inlp(set: &RepresentationSet, config: &InlpConfig) -> Result<ProjectionPair> {
    if config.iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be at least 1".into()));
    }
    let (classes, y) = set.class_indices();
    if classes.len() < 2 {
        return Err(Error::TooFewClasses {
            needed: 2,
            got: classes.len(),
        });
    }
    let d = set.d();
    let x = set.to_matrix();
    let (train, dev) = train_dev_split(x.rows(), config.dev_fraction, config.seed);
    let x_train = select_rows(&x, &train);
    let y_train: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let x_dev = select_rows(&x, &dev);
    let y_dev: Vec<usize> = dev.iter().map(|&i| y[i]).collect();
    let chance = majority_rate(&y_dev);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut classifiers = Vec::new();
    let mut dev_accuracy = Vec::new();
    let mut status = InlpStatus::Completed;

    for round in 0..config.iterations {
        if basis.len() >= d {
            status = InlpStatus::Exhausted;
            break;
        }
        let xt = project_rows(&x_train, &basis);
        let train_cfg = TrainConfig {
            seed: config.seed.wrapping_add(round as u64),
            ..config.train.clone()
        };
        let clf = fit(&xt, &y_train, classes.clone(), &train_cfg)?;
        if !y_dev.is_empty() {
            let acc = clf.accuracy(&project_rows(&x_dev, &basis), &y_dev);
            dev_accuracy.push(acc);
            if let Some(margin) = config.stop_margin {
                if acc <= chance + margin {
                    status = InlpStatus::Converged;
                    break;
                }
            }
        }
        let mut added = 0;
        for mut dir in row_space_basis(clf.weights(), REL_RANK_TOL) {
            let r = orthogonalize_against(&mut dir, &basis);
            if r > NEW_DIRECTION_TOL {
                dir.iter_mut().for_each(|v| *v /= r);
                basis.push(dir);
                added += 1;
            }
        }
        if added == 0 {
            status = InlpStatus::Exhausted;
            break;
        }
        classifiers.push(clf);
    }

    let nullspace = complement_projection(&basis, d);
    ProjectionPair::from_parts(nullspace, classifiers, set.layer(), config.seed, status, dev_accuracy)
}
