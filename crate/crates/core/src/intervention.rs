//! Masked-token prediction under nullspace projections.
//!
//! Logits are `E' h' + b`, where `h'` is the hidden state and `E'` the
//! output embedding matrix, each optionally projected onto the nullspace of
//! its own language classifiers. The bias is never projected.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::{fit, LinearClassifier, TrainConfig};
use crate::error::{Error, Result};
use crate::inlp::ProjectionPair;
use crate::linalg::{cosine, Matrix};
use crate::repr::{normalize_token, sort_scored, Candidate, Layer, Method, RankingRecord, RepresentationSet, VocabEmbedding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    None,
    InlpEmbed,
    InlpRepr,
    InlpBoth,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::None, Variant::InlpEmbed, Variant::InlpRepr, Variant::InlpBoth];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::None => "none",
            Variant::InlpEmbed => "inlp_embed",
            Variant::InlpRepr => "inlp_repr",
            Variant::InlpBoth => "inlp_both",
        }
    }

    pub fn projects_embeddings(self) -> bool {
        matches!(self, Variant::InlpEmbed | Variant::InlpBoth)
    }

    pub fn projects_representations(self) -> bool {
        matches!(self, Variant::InlpRepr | Variant::InlpBoth)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown variant {s:?}")))
    }
}

/// The projection applied to output embeddings and the one applied to
/// hidden states. They may be the same pair.
#[derive(Debug, Clone, Copy)]
pub struct Projections<'a> {
    pub embed: &'a ProjectionPair,
    pub repr: &'a ProjectionPair,
}

impl<'a> Projections<'a> {
    pub fn shared(pair: &'a ProjectionPair) -> Self {
        Self { embed: pair, repr: pair }
    }
}

/// The vector `x` such that the variant's logits are `E x + b` for the
/// unprojected `E`: `(P_e e) · (P_r h) = e · (P_eᵀ P_r h)`.
pub fn effective_query(h: &[f64], layer: Layer, projections: &Projections, variant: Variant) -> Result<Vec<f64>> {
    if layer != projections.repr.source_layer() {
        return Err(Error::LayerMismatch {
            hidden: layer.as_str(),
            projection: projections.repr.source_layer().as_str(),
        });
    }
    for d in [projections.repr.d(), projections.embed.d()] {
        if h.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: h.len() });
        }
    }
    let mut x = h.to_vec();
    if variant.projects_representations() {
        x = projections.repr.nullspace().mul_vec(&x)?;
    }
    if variant.projects_embeddings() {
        x = transpose_mul(projections.embed.nullspace(), &x);
    }
    Ok(x)
}

fn transpose_mul(p: &Matrix, x: &[f64]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; p.cols()];
    for (row, &xi) in p.row_iter().zip(x) {
        for (o, &pij) in out.iter_mut().zip(row) {
            *o += pij * xi;
        }
    }
    out
}

/// Logits over the whole vocabulary for one hidden state.
pub fn logits(h: &[f64], layer: Layer, vocab: &VocabEmbedding, projections: &Projections, variant: Variant) -> Result<Vec<f64>> {
    let x = effective_query(h, layer, projections, variant)?;
    if x.len() != vocab.d() {
        return Err(Error::DimensionMismatch {
            expected: vocab.d(),
            got: x.len(),
        });
    }
    let mut scores = vocab.scores(&x);
    if let Some(b) = vocab.bias() {
        for (s, &bi) in scores.iter_mut().zip(b) {
            *s += bi as f64;
        }
    }
    Ok(scores)
}

/// The `k` highest-scoring vocabulary tokens, ties by vocabulary index.
/// `source`, `language` and `target` are left empty.
pub fn predict_topk(
    h: &[f64],
    layer: Layer,
    vocab: &VocabEmbedding,
    projections: &Projections,
    variant: Variant,
    k: usize,
) -> Result<RankingRecord> {
    let scores = logits(h, layer, vocab, projections, variant)?;
    let mut scored: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    let k = k.min(scored.len());
    if k > 0 && k < scored.len() {
        scored.select_nth_unstable_by(k - 1, |a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    }
    scored.truncate(k);
    sort_scored(&mut scored);
    Ok(RankingRecord {
        source: String::new(),
        language: String::new(),
        target: String::new(),
        method: Method::Mlm,
        candidates: scored
            .into_iter()
            .map(|(i, score)| Candidate {
                token: String::from(vocab.token(i)),
                score,
            })
            .collect(),
    })
}

/// Predictions for every row of `set`. Each record's `target` is the row's
/// token and its `language` the row's language.
pub fn predict_set(
    set: &RepresentationSet,
    vocab: &VocabEmbedding,
    projections: &Projections,
    variant: Variant,
    k: usize,
) -> Result<Vec<RankingRecord>> {
    (0..set.n())
        .map(|i| {
            let h: Vec<f64> = set.row(i).iter().map(|&v| v as f64).collect();
            let mut r = predict_topk(&h, set.layer(), vocab, projections, variant, k)?;
            let label = &set.labels()[i];
            r.target = label.token.clone();
            r.language = label.language.clone();
            Ok(r)
        })
        .collect()
}

pub const ENGLISH: &str = "english";
pub const OTHER: &str = "other";

/// Logistic regression over output-embedding rows separating the words of
/// `english_words` from an equal-sized seeded sample of the remaining
/// whole-word vocabulary. Unknown words in the list are ignored.
pub fn train_english_classifier<S: AsRef<str>>(
    vocab: &VocabEmbedding,
    english_words: &[S],
    config: &TrainConfig,
) -> Result<LinearClassifier> {
    let mut is_en = alloc::vec![false; vocab.len()];
    let mut english: Vec<usize> = english_words.iter().filter_map(|w| vocab.lookup(w.as_ref())).collect();
    english.sort_unstable();
    english.dedup();
    for &i in &english {
        is_en[i] = true;
    }
    let mut others: Vec<usize> = (0..vocab.len()).filter(|&i| !is_en[i] && !vocab.is_subword(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    others.shuffle(&mut rng);
    others.truncate(english.len());
    if english.is_empty() {
        return Err(Error::EmptyClass(ENGLISH.into()));
    }
    if others.is_empty() {
        return Err(Error::EmptyClass(OTHER.into()));
    }
    let rows: Vec<Vec<f64>> = english.iter().chain(&others).map(|&i| vocab.row_f64(i)).collect();
    let y: Vec<usize> = english.iter().map(|_| 0).chain(others.iter().map(|_| 1)).collect();
    fit(&Matrix::from_rows(&rows)?, &y, alloc::vec![ENGLISH.into(), OTHER.into()], config)
}

fn check_k(records: &[RankingRecord], ks: &[usize]) -> Result<()> {
    for &k in ks {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if let Some(r) = records.iter().find(|r| r.candidates.len() < k) {
            return Err(Error::KTooLarge {
                k,
                len: r.candidates.len(),
            });
        }
    }
    Ok(())
}

/// Mean share of the top `k` candidates for which `is_english` holds.
pub fn proportion_where<F: FnMut(&str) -> Result<bool>>(
    records: &[RankingRecord],
    ks: &[usize],
    mut is_english: F,
) -> Result<BTreeMap<usize, f64>> {
    check_k(records, ks)?;
    let max_k = ks.iter().copied().max().unwrap_or(0);
    let flags: Vec<Vec<bool>> = records
        .iter()
        .map(|r| r.candidates[..max_k].iter().map(|c| is_english(&c.token)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let n = records.len().max(1) as f64;
    Ok(ks
        .iter()
        .map(|&k| {
            let total: f64 = flags
                .iter()
                .map(|f| f[..k].iter().filter(|&&e| e).count() as f64 / k as f64)
                .sum();
            (k, total / n)
        })
        .collect())
}

/// Mean share of English tokens among the top `k` predictions, per `k`,
/// with English decided by `classifier` on the token's output embedding.
pub fn english_proportion(
    records: &[RankingRecord],
    classifier: &LinearClassifier,
    vocab: &VocabEmbedding,
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    let english = classifier
        .classes()
        .iter()
        .position(|c| c == ENGLISH)
        .ok_or_else(|| Error::InvalidParameter("classifier has no english class".into()))?;
    let mut cache: BTreeMap<usize, bool> = BTreeMap::new();
    proportion_where(records, ks, |tok| {
        let i = vocab.lookup(tok).ok_or_else(|| Error::TokenNotFound(tok.into()))?;
        Ok(*cache
            .entry(i)
            .or_insert_with(|| classifier.predict_index(&vocab.row_f64(i)) == english))
    })
}

/// Word vectors from a shared multilingual space, looked up after
/// lowercasing and NFC normalization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrossLingualTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

fn table_key(word: &str) -> String {
    normalize_token(&word.to_lowercase())
}

impl CrossLingualTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Adds `word`; returns `false` and keeps the earlier vector when the
    /// key is already present.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: self.vectors.len(),
                col: 0,
            });
        }
        let key = table_key(word);
        if self.vectors.contains_key(&key) {
            return Ok(false);
        }
        self.vectors.insert(key, vector);
        Ok(true)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(&table_key(word)).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    pub mean: f64,
    /// Pairs scored.
    pub covered: usize,
    /// Pairs skipped because a word was missing from the table.
    pub skipped: usize,
}

impl Coherence {
    pub fn coverage(&self) -> f64 {
        self.covered as f64 / (self.covered + self.skipped).max(1) as f64
    }
}

/// Mean cosine similarity, in `table`, between each record's original
/// token and its top `k` candidates.
pub fn semantic_coherence<S: AsRef<str>>(
    records: &[RankingRecord],
    originals: &[S],
    table: &CrossLingualTable,
    k: usize,
) -> Result<Coherence> {
    if originals.len() != records.len() {
        return Err(Error::LabelCount {
            labels: originals.len(),
            rows: records.len(),
        });
    }
    check_k(records, &[k])?;
    let mut sum = 0.0;
    let mut covered = 0;
    let mut skipped = 0;
    for (r, orig) in records.iter().zip(originals) {
        let Some(o) = table.get(orig.as_ref()) else {
            skipped += k;
            continue;
        };
        for c in &r.candidates[..k] {
            match table.get(&c.token) {
                Some(v) => {
                    sum += cosine(o, v);
                    covered += 1;
                }
                None => skipped += 1,
            }
        }
    }
    if covered == 0 {
        return Err(Error::ZeroCoverage);
    }
    Ok(Coherence {
        mean: sum / covered as f64,
        covered,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inlp::InlpStatus;
    use alloc::string::ToString;
    use alloc::vec;

    fn vocab(rows: &[[f32; 3]], bias: Option<Vec<f32>>) -> VocabEmbedding {
        let tokens: Vec<String> = (0..rows.len()).map(|i| alloc::format!("t{i}")).collect();
        VocabEmbedding::new(3, rows.iter().flatten().copied().collect(), tokens, bias, vec![false; rows.len()]).unwrap()
    }

    fn pair(p: Matrix, layer: Layer) -> ProjectionPair {
        ProjectionPair::from_parts(p, Vec::new(), layer, 0, InlpStatus::Completed, Vec::new()).unwrap()
    }

    fn record(tokens: &[&str]) -> RankingRecord {
        RankingRecord {
            source: String::new(),
            language: String::new(),
            target: String::new(),
            method: Method::Mlm,
            candidates: tokens
                .iter()
                .enumerate()
                .map(|(i, t)| Candidate {
                    token: t.to_string(),
                    score: -(i as f64),
                })
                .collect(),
        }
    }

    const ROWS: [[f32; 3]; 4] = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.5, 0.5, 3.0], [-1.0, 1.0, 0.0]];

    #[test]
    fn none_is_plain_dot_product() {
        let v = vocab(&ROWS, None);
        let id = ProjectionPair::identity(3, Layer::MlmHeadOutput);
        let h = [1.0, 0.3, 0.1];
        let rec = predict_topk(&h, Layer::MlmHeadOutput, &v, &Projections::shared(&id), Variant::None, 4).unwrap();
        let mut direct: Vec<(usize, f64)> = (0..4).map(|i| (i, ROWS[i].iter().zip(&h).map(|(a, b)| *a as f64 * b).sum())).collect();
        direct.sort_by(|a, b| b.1.total_cmp(&a.1));
        let order: Vec<String> = direct.iter().map(|(i, _)| alloc::format!("t{i}")).collect();
        let got: Vec<String> = rec.candidates.iter().map(|c| c.token.clone()).collect();
        assert_eq!(got, order);
    }

    #[test]
    fn identity_projection_changes_nothing() {
        let v = vocab(&ROWS, Some(vec![0.1, -0.2, 0.0, 0.3]));
        let id = ProjectionPair::identity(3, Layer::MlmHeadOutput);
        let p = Projections::shared(&id);
        let h = [0.2, -1.0, 0.4];
        let a = predict_topk(&h, Layer::MlmHeadOutput, &v, &p, Variant::None, 3).unwrap();
        let b = predict_topk(&h, Layer::MlmHeadOutput, &v, &p, Variant::InlpBoth, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bias_added_but_not_projected() {
        let v = vocab(&ROWS, Some(vec![5.0, 0.0, 0.0, 0.0]));
        // Remove everything: logits reduce to the bias.
        let zero = pair(Matrix::zeros(3, 3), Layer::MlmHeadOutput);
        let rec = predict_topk(&[1.0, 1.0, 1.0], Layer::MlmHeadOutput, &v, &Projections::shared(&zero), Variant::InlpRepr, 1).unwrap();
        assert_eq!(rec.candidates[0].token, "t0");
        assert_eq!(rec.candidates[0].score, 5.0);
    }

    #[test]
    fn embed_and_repr_projections_compose() {
        let v = vocab(&ROWS, None);
        let drop_x = pair(Matrix::from_rows(&[[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap(), Layer::Embedding);
        let drop_y = pair(Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).unwrap(), Layer::MlmHeadOutput);
        let p = Projections { embed: &drop_x, repr: &drop_y };
        let h = [1.0, 1.0, 1.0];
        let both = logits(&h, Layer::MlmHeadOutput, &v, &p, Variant::InlpBoth).unwrap();
        // (P_e e) · (P_r h): only the third coordinate survives both.
        let expected: Vec<f64> = ROWS.iter().map(|r| r[2] as f64).collect();
        assert_eq!(both, expected);
        let embed = logits(&h, Layer::MlmHeadOutput, &v, &p, Variant::InlpEmbed).unwrap();
        let expected: Vec<f64> = ROWS.iter().map(|r| (r[1] + r[2]) as f64).collect();
        assert_eq!(embed, expected);
    }

    #[test]
    fn layer_mismatch_rejected() {
        let v = vocab(&ROWS, None);
        let id = ProjectionPair::identity(3, Layer::Embedding);
        assert_eq!(
            predict_topk(&[1.0, 0.0, 0.0], Layer::MlmHeadOutput, &v, &Projections::shared(&id), Variant::None, 1),
            Err(Error::LayerMismatch {
                hidden: "mlm_head_output",
                projection: "embedding",
            })
        );
    }

    #[test]
    fn proportions_match_counts() {
        let records = [record(&["a", "B", "c"]), record(&["B", "B", "a"])];
        let got = proportion_where(&records, &[1, 2, 3], |t| Ok(t.chars().all(char::is_lowercase))).unwrap();
        assert_eq!(got[&1], 0.5);
        assert_eq!(got[&2], (0.5 + 0.0) / 2.0);
        assert_eq!(got[&3], (2.0 / 3.0 + 1.0 / 3.0) / 2.0);
        assert_eq!(
            proportion_where(&records, &[4], |_| Ok(true)),
            Err(Error::KTooLarge { k: 4, len: 3 })
        );
    }

    #[test]
    fn coherence_oracle_and_coverage() {
        let mut t = CrossLingualTable::new(2);
        t.insert("Dog", vec![1.0, 0.0]).unwrap();
        t.insert("hund", vec![1.0, 0.0]).unwrap();
        t.insert("cat", vec![0.0, 1.0]).unwrap();
        t.insert("puppy", vec![1.0, 1.0]).unwrap();
        assert!(!t.insert("DOG", vec![0.0, 1.0]).unwrap());
        let records = [record(&["hund", "cat"]), record(&["puppy", "zzz"])];
        let c = semantic_coherence(&records, &["dog", "DOG"], &t, 2).unwrap();
        let expected = (1.0 + 0.0 + libm::sqrt(0.5)) / 3.0;
        assert!((c.mean - expected).abs() < 1e-15);
        assert_eq!((c.covered, c.skipped), (3, 1));
        assert_eq!(semantic_coherence(&records, &["x", "y"], &t, 2), Err(Error::ZeroCoverage));
    }

    #[test]
    fn english_classifier_on_separated_rows() {
        let rows: Vec<[f32; 3]> = (0..40)
            .map(|i| {
                let s = if i < 20 { 1.0 } else { -1.0 };
                [s, libm::sin(i as f64) as f32, libm::cos(i as f64) as f32]
            })
            .collect();
        let v = vocab(&rows, None);
        let english: Vec<String> = (0..20).map(|i| alloc::format!("t{i}")).collect();
        let clf = train_english_classifier(&v, &english, &TrainConfig::default()).unwrap();
        let records = [record(&["t0", "t1", "t25", "t30"])];
        let p = english_proportion(&records, &clf, &v, &[1, 2, 4]).unwrap();
        assert_eq!(p[&1], 1.0);
        assert_eq!(p[&2], 1.0);
        assert_eq!(p[&4], 0.5);
    }
}
