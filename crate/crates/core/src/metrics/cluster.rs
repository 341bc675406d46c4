//! K-means (Lloyd's algorithm, k-means++ seeding) and V-measure.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative inertia change below which a run stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VMeasure {
    pub v: f64,
    pub homogeneity: f64,
    pub completeness: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.row_iter().enumerate() {
        let dist = sq_dist(row, centroid);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn plus_plus_init(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = x.row_iter().map(|r| sq_dist(r, x.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, r) in x.row_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, x.row(pick)));
        }
    }
    centroids
}

fn lloyd(x: &Matrix, mut centroids: Matrix, config: &KMeansConfig) -> KMeansResult {
    let (n, d) = (x.rows(), x.cols());
    let k = centroids.rows();
    let mut assignments = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..config.max_iter.max(1) {
        let mut next_inertia = 0.0;
        for (i, r) in x.row_iter().enumerate() {
            let (c, dist) = nearest(r, &centroids);
            assignments[i] = c;
            next_inertia += dist;
        }
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, r) in x.row_iter().enumerate() {
            axpy(1.0, r, sums.row_mut(assignments[i]));
            counts[assignments[i]] += 1;
        }
        for c in 0..k {
            // Empty clusters keep their previous centroid.
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        let done = inertia.is_finite() && (inertia - next_inertia).abs() <= config.tol * inertia.max(f64::MIN_POSITIVE);
        inertia = next_inertia;
        if done {
            break;
        }
    }
    // Final assignment against the final centroids.
    inertia = 0.0;
    for (i, r) in x.row_iter().enumerate() {
        let (c, dist) = nearest(r, &centroids);
        assignments[i] = c;
        inertia += dist;
    }
    KMeansResult {
        assignments,
        centroids,
        inertia,
    }
}

/// Best-inertia K-means over `config.restarts` k-means++ runs. Restart `r`
/// draws from ChaCha stream `r` of `config.seed`, so results do not depend
/// on the order restarts are evaluated in.
pub fn kmeans(x: &Matrix, k: usize, config: &KMeansConfig) -> Result<KMeansResult> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::EmptyMatrix {
            rows: x.rows(),
            cols: x.cols(),
        });
    }
    if k == 0 || k > x.rows() {
        return Err(Error::InvalidParameter(alloc::format!(
            "k={k} must be between 1 and the number of rows ({})",
            x.rows()
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite { row: 0, col: 0 });
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..config.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(r as u64);
        let run = lloyd(x, plus_plus_init(x, k, &mut rng), config);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn entropy(counts: &[usize], total: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * libm::log(p)
        })
        .sum()
}

/// Homogeneity, completeness and their harmonic mean from class labels
/// and cluster ids, via conditional entropies of the contingency table.
pub fn v_measure(classes: &[usize], clusters: &[usize]) -> VMeasure {
    let n = classes.len().min(clusters.len());
    if n == 0 {
        return VMeasure {
            v: 1.0,
            homogeneity: 1.0,
            completeness: 1.0,
        };
    }
    let nc = classes[..n].iter().max().map_or(0, |m| m + 1);
    let nk = clusters[..n].iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0usize; nc * nk];
    for (&c, &k) in classes[..n].iter().zip(&clusters[..n]) {
        table[c * nk + k] += 1;
    }
    let class_counts: Vec<usize> = (0..nc).map(|c| (0..nk).map(|k| table[c * nk + k]).sum()).collect();
    let cluster_counts: Vec<usize> = (0..nk).map(|k| (0..nc).map(|c| table[c * nk + k]).sum()).collect();
    let total = n as f64;
    let h_c = entropy(&class_counts, total);
    let h_k = entropy(&cluster_counts, total);
    let mut h_c_given_k = 0.0;
    let mut h_k_given_c = 0.0;
    for c in 0..nc {
        for k in 0..nk {
            let joint = table[c * nk + k];
            if joint == 0 {
                continue;
            }
            let j = joint as f64;
            h_c_given_k -= j / total * libm::log(j / cluster_counts[k] as f64);
            h_k_given_c -= j / total * libm::log(j / class_counts[c] as f64);
        }
    }
    // Clamped because rounding can push a zero score slightly negative.
    let homogeneity = if h_c == 0.0 { 1.0 } else { (1.0 - h_c_given_k / h_c).clamp(0.0, 1.0) };
    let completeness = if h_k == 0.0 { 1.0 } else { (1.0 - h_k_given_c / h_k).clamp(0.0, 1.0) };
    let v = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    };
    VMeasure {
        v,
        homogeneity,
        completeness,
    }
}

/// Clusters `x` into as many groups as there are distinct labels and
/// scores the clustering against the labels.
pub fn kmeans_vmeasure<S: AsRef<str>>(x: &Matrix, labels: &[S], config: &KMeansConfig) -> Result<VMeasure> {
    if labels.len() != x.rows() {
        return Err(Error::LabelCount {
            labels: labels.len(),
            rows: x.rows(),
        });
    }
    let distinct: BTreeSet<&str> = labels.iter().map(|s| s.as_ref()).collect();
    let names: Vec<String> = distinct.into_iter().map(String::from).collect();
    let classes: Vec<usize> = labels
        .iter()
        .map(|s| names.binary_search_by(|n| n.as_str().cmp(s.as_ref())).expect("present"))
        .collect();
    let result = kmeans(x, names.len(), config)?;
    Ok(v_measure(&classes, &result.assignments))
}
