//! Language-prediction confusion matrices.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    /// Row and column order, by descending per-language accuracy.
    pub languages: Vec<String>,
    /// Cell `(t, p)`: predictions of `p` for true language `t`.
    pub cells: Matrix,
    /// Share of each row's predictions that were correct, before scaling.
    pub accuracy: Vec<f64>,
    pub sqrt_scaled: bool,
}

impl ConfusionMatrix {
    pub fn index_of(&self, language: &str) -> Option<usize> {
        self.languages.iter().position(|l| l == language)
    }
}

/// Tallies `(true, predicted)` pairs into a square matrix over every
/// language that occurs on either side, minus `drop`. Pairs touching a
/// dropped language are ignored. Ties in accuracy keep name order.
pub fn confusion_matrix<S: AsRef<str>>(predictions: &[(S, S)], sqrt_scale: bool, drop: &[S]) -> ConfusionMatrix {
    let dropped: BTreeSet<&str> = drop.iter().map(|s| s.as_ref()).collect();
    let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut names: BTreeSet<&str> = BTreeSet::new();
    for (t, p) in predictions {
        let (t, p) = (t.as_ref(), p.as_ref());
        if dropped.contains(t) || dropped.contains(p) {
            continue;
        }
        names.insert(t);
        names.insert(p);
        *counts.entry((t, p)).or_default() += 1;
    }
    let names: Vec<&str> = names.into_iter().collect();
    let acc_of = |t: &str| -> f64 {
        let total: usize = counts.range((t, "")..).take_while(|((a, _), _)| *a == t).map(|(_, c)| c).sum();
        if total == 0 {
            0.0
        } else {
            counts.get(&(t, t)).copied().unwrap_or(0) as f64 / total as f64
        }
    };
    let mut order: Vec<(&str, f64)> = names.iter().map(|&n| (n, acc_of(n))).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));

    let k = order.len();
    let mut cells = Matrix::zeros(k, k);
    for (i, (t, _)) in order.iter().enumerate() {
        for (j, (p, _)) in order.iter().enumerate() {
            let c = counts.get(&(*t, *p)).copied().unwrap_or(0) as f64;
            cells.set(i, j, if sqrt_scale { libm::sqrt(c) } else { c });
        }
    }
    ConfusionMatrix {
        languages: order.iter().map(|(n, _)| String::from(*n)).collect(),
        cells,
        accuracy: order.iter().map(|(_, a)| *a).collect(),
        sqrt_scaled: sqrt_scale,
    }
}
