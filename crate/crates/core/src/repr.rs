//! Shared data model: labeled representation sets, vocabulary embeddings,
//! parallel lexicons and ranked candidate lists.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// NFC-normalized form used for every vocabulary and lexicon lookup.
pub fn normalize_token(s: &str) -> String {
    s.nfc().collect()
}

/// Which model state a set of vectors was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Embedding,
    LastHidden,
    /// Hidden state right before multiplication with the output embeddings.
    MlmHeadOutput,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Embedding => "embedding",
            Layer::LastHidden => "last_hidden",
            Layer::MlmHeadOutput => "mlm_head_output",
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Layer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(Layer::Embedding),
            "last_hidden" => Ok(Layer::LastHidden),
            "mlm_head_output" => Ok(Layer::MlmHeadOutput),
            other => Err(Error::InvalidParameter(format!("unknown layer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Label {
    pub language: String,
    pub token: String,
    pub sentence_id: u64,
    pub position: u32,
}

/// An `n × d` matrix of token vectors with one label per row.
///
/// The payload is kept in `f32` so that on-disk round trips are bit-exact;
/// analyses widen to `f64` through [`RepresentationSet::to_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationSet {
    n: usize,
    d: usize,
    vectors: Vec<f32>,
    labels: Vec<Label>,
    layer: Layer,
    languages: Vec<String>,
}

impl RepresentationSet {
    /// Validates and builds a set. `languages` is the declared inventory;
    /// every label must use one of its tags.
    pub fn new(
        d: usize,
        vectors: Vec<f32>,
        labels: Vec<Label>,
        layer: Layer,
        languages: Vec<String>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptyMatrix {
                rows: labels.len(),
                cols: 0,
            });
        }
        if vectors.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: vectors.len() % d,
            });
        }
        let n = vectors.len() / d;
        if n == 0 {
            return Err(Error::EmptyMatrix { rows: 0, cols: d });
        }
        if labels.len() != n {
            return Err(Error::LabelCount {
                labels: labels.len(),
                rows: n,
            });
        }
        let inventory: BTreeSet<&str> = languages.iter().map(String::as_str).collect();
        if let Some(l) = labels.iter().find(|l| !inventory.contains(l.language.as_str())) {
            return Err(Error::UnknownLanguage(l.language.clone()));
        }
        if let Some(i) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / d,
                col: i % d,
            });
        }
        Ok(Self {
            n,
            d,
            vectors,
            labels,
            layer,
            languages,
        })
    }

    /// Builds a set from `f64` rows, rounding to `f32`.
    pub fn from_matrix(
        m: &Matrix,
        labels: Vec<Label>,
        layer: Layer,
        languages: Vec<String>,
    ) -> Result<Self> {
        let vectors = m.as_slice().iter().map(|&v| v as f32).collect();
        Self::new(m.cols(), vectors, labels, layer, languages)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn layer(&self) -> Layer {
        self.layer
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.d..(i + 1) * self.d]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(
            self.n,
            self.d,
            self.vectors.iter().map(|&v| v as f64).collect(),
        )
        .expect("shape checked at construction")
    }

    /// Same data tagged as coming from another layer.
    pub fn with_layer(mut self, layer: Layer) -> Self {
        self.layer = layer;
        self
    }

    /// Row languages as indices into the sorted list of languages that occur.
    pub fn class_indices(&self) -> (Vec<String>, Vec<usize>) {
        let present: BTreeSet<&str> = self.labels.iter().map(|l| l.language.as_str()).collect();
        let classes: Vec<String> = present.iter().map(|s| s.to_string()).collect();
        let ids = self
            .labels
            .iter()
            .map(|l| classes.binary_search(&l.language).expect("present"))
            .collect();
        (classes, ids)
    }
}

/// Output embedding matrix with its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabEmbedding {
    d: usize,
    matrix: Vec<f32>,
    vocab: Vec<String>,
    bias: Option<Vec<f32>>,
    subword_flags: Vec<bool>,
    index: BTreeMap<String, usize>,
}

impl VocabEmbedding {
    pub fn new(
        d: usize,
        matrix: Vec<f32>,
        vocab: Vec<String>,
        bias: Option<Vec<f32>>,
        subword_flags: Vec<bool>,
    ) -> Result<Self> {
        if d == 0 || vocab.is_empty() {
            return Err(Error::EmptyMatrix {
                rows: vocab.len(),
                cols: d,
            });
        }
        if matrix.len() != vocab.len() * d {
            return Err(Error::DimensionMismatch {
                expected: vocab.len() * d,
                got: matrix.len(),
            });
        }
        if subword_flags.len() != vocab.len() {
            return Err(Error::LabelCount {
                labels: subword_flags.len(),
                rows: vocab.len(),
            });
        }
        if let Some(b) = &bias {
            if b.len() != vocab.len() {
                return Err(Error::BiasLength {
                    bias: b.len(),
                    vocab: vocab.len(),
                });
            }
            if let Some(i) = b.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, col: 0 });
            }
        }
        if let Some(i) = matrix.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / d,
                col: i % d,
            });
        }
        let mut index = BTreeMap::new();
        for (i, tok) in vocab.iter().enumerate() {
            if index.insert(normalize_token(tok), i).is_some() {
                return Err(Error::DuplicateToken(tok.clone()));
            }
        }
        Ok(Self {
            d,
            matrix,
            vocab,
            bias,
            subword_flags,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn token(&self, i: usize) -> &str {
        &self.vocab[i]
    }

    pub fn tokens(&self) -> &[String] {
        &self.vocab
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.d..(i + 1) * self.d]
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| v as f64).collect()
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    pub fn bias(&self) -> Option<&[f32]> {
        self.bias.as_deref()
    }

    pub fn subword_flags(&self) -> &[bool] {
        &self.subword_flags
    }

    pub fn is_subword(&self, i: usize) -> bool {
        self.subword_flags[i]
    }

    /// Index of `token` after NFC normalization.
    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(&normalize_token(token)).copied()
    }

    /// Index of `token` when it is a whole-word (non-continuation) entry.
    pub fn lookup_word(&self, token: &str) -> Option<usize> {
        self.lookup(token).filter(|&i| !self.subword_flags[i])
    }

    /// `Σ_j row_i[j] · v[j]` for every row, in `f64`.
    pub fn scores(&self, v: &[f64]) -> Vec<f64> {
        self.matrix
            .chunks_exact(self.d)
            .map(|r| r.iter().zip(v).map(|(&a, b)| a as f64 * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LexEntry {
    pub source: String,
    pub target: String,
    pub language: String,
    pub pos: String,
}

/// Parallel word pairs. `source` words are in `source_language`; each
/// entry's `target` is in the entry's `language`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub source_language: String,
    pub entries: Vec<LexEntry>,
}

impl Lexicon {
    pub fn new(source_language: impl Into<String>, entries: Vec<LexEntry>) -> Self {
        Self {
            source_language: source_language.into(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Target languages in sorted order.
    pub fn languages(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.language.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    /// Keeps entries whose source and target are each exactly one
    /// whole-word vocabulary token.
    pub fn filter_single_token(&self, vocab: &VocabEmbedding) -> Lexicon {
        let entries = self
            .entries
            .iter()
            .filter(|e| vocab.lookup_word(&e.source).is_some() && vocab.lookup_word(&e.target).is_some())
            .cloned()
            .collect();
        Lexicon {
            source_language: self.source_language.clone(),
            entries,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Template,
    Analogy,
    Baseline,
    /// Masked-token predictions.
    Mlm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Template => "template",
            Method::Analogy => "analogy",
            Method::Baseline => "baseline",
            Method::Mlm => "mlm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "template" => Ok(Method::Template),
            "analogy" => Ok(Method::Analogy),
            "baseline" => Ok(Method::Baseline),
            "mlm" => Ok(Method::Mlm),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub token: String,
    pub score: f64,
}

/// A ranked candidate list for one (source, target language) query.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingRecord {
    pub source: String,
    pub language: String,
    pub target: String,
    pub method: Method,
    pub candidates: Vec<Candidate>,
}

impl RankingRecord {
    /// Checks the ordering, uniqueness and source-exclusion invariants.
    pub fn validate(&self) -> Result<()> {
        for w in self.candidates.windows(2) {
            if w[1].score > w[0].score || w[1].score.is_nan() || w[0].score.is_nan() {
                return Err(Error::InvalidRanking(format!(
                    "scores increase at {:?} for source {:?}",
                    w[1].token, self.source
                )));
            }
        }
        let source = normalize_token(&self.source);
        let mut seen = BTreeSet::new();
        for c in &self.candidates {
            let t = normalize_token(&c.token);
            if t == source {
                return Err(Error::InvalidRanking(format!(
                    "source {:?} appears among its own candidates",
                    self.source
                )));
            }
            if !seen.insert(t) {
                return Err(Error::InvalidRanking(format!(
                    "candidate {:?} repeated for source {:?}",
                    c.token, self.source
                )));
            }
        }
        Ok(())
    }

    /// 1-based position of `token` in the candidate list.
    pub fn rank_of(&self, token: &str) -> Option<usize> {
        let t = normalize_token(token);
        self.candidates
            .iter()
            .position(|c| normalize_token(&c.token) == t)
            .map(|p| p + 1)
    }
}

/// Sorts `(vocab index, score)` pairs by descending score, breaking ties
/// by ascending index.
pub(crate) fn sort_scored(scored: &mut [(usize, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn label(lang: &str, tok: &str) -> Label {
        Label {
            language: lang.into(),
            token: tok.into(),
            sentence_id: 0,
            position: 0,
        }
    }

    fn vocab(tokens: &[&str], sub: &[bool]) -> VocabEmbedding {
        let v = tokens.len();
        VocabEmbedding::new(
            2,
            vec![0.5; v * 2],
            tokens.iter().map(|s| s.to_string()).collect(),
            None,
            sub.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn label_count_mismatch_is_reported() {
        let labels = (0..5).map(|_| label("en", "a")).collect();
        let err = RepresentationSet::new(2, vec![0.0; 8], labels, Layer::Embedding, vec!["en".into()]);
        assert_eq!(err, Err(Error::LabelCount { labels: 5, rows: 4 }));
    }

    #[test]
    fn unknown_language_and_nan_rejected() {
        let err = RepresentationSet::new(1, vec![0.0], vec![label("xx", "a")], Layer::Embedding, vec!["en".into()]);
        assert_eq!(err, Err(Error::UnknownLanguage("xx".into())));
        let err = RepresentationSet::new(1, vec![f32::NAN], vec![label("en", "a")], Layer::Embedding, vec!["en".into()]);
        assert_eq!(err, Err(Error::NonFinite { row: 0, col: 0 }));
    }

    #[test]
    fn vocab_rejects_duplicates_after_nfc() {
        // "é" precomposed vs. e + combining acute.
        let err = VocabEmbedding::new(
            1,
            vec![0.0, 0.0],
            vec!["\u{e9}".into(), "e\u{301}".into()],
            None,
            vec![false, false],
        );
        assert!(matches!(err, Err(Error::DuplicateToken(_))));
    }

    #[test]
    fn filter_drops_multi_piece_and_continuations() {
        let v = vocab(&["dog", "Hund", "chien", "##ien", "perro"], &[false, false, false, true, false]);
        let lex = Lexicon::new(
            "en",
            vec![
                LexEntry { source: "dog".into(), target: "Hund".into(), language: "de".into(), pos: "N".into() },
                LexEntry { source: "dog".into(), target: "##ien".into(), language: "fr".into(), pos: "N".into() },
                LexEntry { source: "dog".into(), target: "cane".into(), language: "it".into(), pos: "N".into() },
                LexEntry { source: "cat".into(), target: "perro".into(), language: "es".into(), pos: "N".into() },
            ],
        );
        let kept = lex.filter_single_token(&v);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.entries[0].target, "Hund");
    }

    #[test]
    fn filter_counts_against_membership_oracle() {
        let toks = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "src"];
        let v = vocab(&toks, &[false; 11]);
        let present: BTreeSet<&str> = toks.iter().copied().collect();
        let targets = ["a", "b", "zz1", "c", "zz2", "d", "e", "zz3", "f", "zz4"];
        let lex = Lexicon::new(
            "en",
            targets
                .iter()
                .map(|t| LexEntry { source: "src".into(), target: t.to_string(), language: "xx".into(), pos: "N".into() })
                .collect(),
        );
        let expected = targets.iter().filter(|t| present.contains(*t)).count();
        assert_eq!(expected, 6);
        assert_eq!(lex.filter_single_token(&v).len(), expected);
    }

    #[test]
    fn ranking_validation() {
        let mut r = RankingRecord {
            source: "dog".into(),
            language: "de".into(),
            target: "Hund".into(),
            method: Method::Template,
            candidates: vec![
                Candidate { token: "Hund".into(), score: 2.0 },
                Candidate { token: "Katze".into(), score: 1.0 },
            ],
        };
        assert!(r.validate().is_ok());
        assert_eq!(r.rank_of("Katze"), Some(2));
        r.candidates.push(Candidate { token: "dog".into(), score: 0.0 });
        assert!(r.validate().is_err());
        r.candidates.pop();
        r.candidates.push(Candidate { token: "Maus".into(), score: 5.0 });
        assert!(r.validate().is_err());
    }
}
