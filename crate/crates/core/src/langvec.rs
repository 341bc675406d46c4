//! Language vectors and translation by vector arithmetic.
//!
//! A language's vector is the mean of its sampled representations. A word is
//! translated from `src` to `tgt` by subtracting the `src` vector, adding
//! the `tgt` vector and ranking the vocabulary by dot product against the
//! result. The baseline ranks the vocabulary by cosine similarity against
//! the unmodified source embedding.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix};
use crate::repr::{normalize_token, sort_scored, Candidate, Lexicon, Method, RankingRecord, RepresentationSet, VocabEmbedding};

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageVectorTable {
    pub vectors: BTreeMap<String, Vec<f64>>,
    pub sample_count: BTreeMap<String, usize>,
}

impl LanguageVectorTable {
    pub fn d(&self) -> usize {
        self.vectors.values().next().map_or(0, Vec::len)
    }

    pub fn get(&self, language: &str) -> Result<&[f64]> {
        self.vectors
            .get(language)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownLanguage(language.into()))
    }

    pub fn languages(&self) -> Vec<String> {
        self.vectors.keys().cloned().collect()
    }
}

/// Mean representation of every language declared by `samples`.
pub fn build_language_vectors(samples: &RepresentationSet) -> Result<LanguageVectorTable> {
    let d = samples.d();
    let mut sums: BTreeMap<&str, (Vec<f64>, usize)> =
        samples.languages().iter().map(|l| (l.as_str(), (vec![0.0; d], 0))).collect();
    for (i, label) in samples.labels().iter().enumerate() {
        let (sum, count) = sums
            .get_mut(label.language.as_str())
            .ok_or_else(|| Error::UnknownLanguage(label.language.clone()))?;
        for (s, &v) in sum.iter_mut().zip(samples.row(i)) {
            *s += v as f64;
        }
        *count += 1;
    }
    let mut vectors = BTreeMap::new();
    let mut sample_count = BTreeMap::new();
    for (lang, (mut sum, count)) in sums {
        if count == 0 {
            return Err(Error::EmptyLanguageGroup(lang.into()));
        }
        let inv = 1.0 / count as f64;
        sum.iter_mut().for_each(|v| *v *= inv);
        vectors.insert(String::from(lang), sum);
        sample_count.insert(String::from(lang), count);
    }
    Ok(LanguageVectorTable { vectors, sample_count })
}

fn check_dim(v: &[f64], vocab: &VocabEmbedding) -> Result<()> {
    if v.len() != vocab.d() {
        return Err(Error::DimensionMismatch {
            expected: vocab.d(),
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { row: 0, col: 0 });
    }
    Ok(())
}

/// Vocabulary rows that may appear as candidates: whole words other than
/// `exclude`.
fn eligible(vocab: &VocabEmbedding, exclude: Option<usize>) -> impl Iterator<Item = usize> + '_ {
    (0..vocab.len()).filter(move |&i| !vocab.is_subword(i) && Some(i) != exclude)
}

fn top_candidates(vocab: &VocabEmbedding, scores: &[f64], exclude: Option<usize>, top_k: usize) -> Vec<Candidate> {
    let mut scored: Vec<(usize, f64)> = eligible(vocab, exclude).map(|i| (i, scores[i])).collect();
    let k = top_k.min(scored.len());
    if k == 0 {
        return Vec::new();
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, |a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
    }
    sort_scored(&mut scored);
    scored
        .into_iter()
        .map(|(i, score)| Candidate {
            token: String::from(vocab.token(i)),
            score,
        })
        .collect()
}

/// `source_vec - v_src + v_tgt`.
pub fn shifted_vector(source_vec: &[f64], src: &str, tgt: &str, table: &LanguageVectorTable) -> Result<Vec<f64>> {
    let vs = table.get(src)?;
    let vt = table.get(tgt)?;
    if vs.len() != source_vec.len() {
        return Err(Error::DimensionMismatch {
            expected: vs.len(),
            got: source_vec.len(),
        });
    }
    Ok(source_vec.iter().zip(vs).zip(vt).map(|((x, s), t)| x - s + t).collect())
}

fn analogy_scores(source_vec: &[f64], src: &str, tgt: &str, table: &LanguageVectorTable, vocab: &VocabEmbedding) -> Result<Vec<f64>> {
    let shifted = shifted_vector(source_vec, src, tgt, table)?;
    check_dim(&shifted, vocab)?;
    Ok(vocab.scores(&shifted))
}

fn cosine_scores(source_vec: &[f64], vocab: &VocabEmbedding) -> Result<Vec<f64>> {
    check_dim(source_vec, vocab)?;
    let n = norm(source_vec);
    if n == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dots = vocab.scores(source_vec);
    Ok(dots
        .into_iter()
        .enumerate()
        .map(|(i, dot)| {
            let rn = vocab.row(i).iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>();
            if rn == 0.0 {
                0.0
            } else {
                dot / (n * libm::sqrt(rn))
            }
        })
        .collect())
}

/// Ranks the vocabulary for translating `source_vec` from `src` to `tgt`
/// by analogy. `exclude` (usually the source word) and continuation pieces
/// are never candidates. The record's `target` is left empty for the caller
/// to fill.
pub fn analogy_translate(
    source_vec: &[f64],
    src: &str,
    tgt: &str,
    table: &LanguageVectorTable,
    vocab: &VocabEmbedding,
    exclude: &str,
    top_k: usize,
) -> Result<RankingRecord> {
    let scores = analogy_scores(source_vec, src, tgt, table, vocab)?;
    Ok(RankingRecord {
        source: String::from(exclude),
        language: String::from(tgt),
        target: String::new(),
        method: Method::Analogy,
        candidates: top_candidates(vocab, &scores, vocab.lookup(exclude), top_k),
    })
}

/// Ranks the vocabulary by cosine similarity to `source_vec`.
pub fn baseline_translate(source_vec: &[f64], vocab: &VocabEmbedding, exclude: &str, top_k: usize) -> Result<RankingRecord> {
    let scores = cosine_scores(source_vec, vocab)?;
    Ok(RankingRecord {
        source: String::from(exclude),
        language: String::new(),
        target: String::new(),
        method: Method::Baseline,
        candidates: top_candidates(vocab, &scores, vocab.lookup(exclude), top_k),
    })
}

/// Translates every lexicon entry from the lexicon's source language with
/// `method` (analogy or baseline), keeping the `top_k` best candidates.
/// Every source word must be a whole-word vocabulary entry.
pub fn translate_lexicon(
    lexicon: &Lexicon,
    table: Option<&LanguageVectorTable>,
    vocab: &VocabEmbedding,
    method: Method,
    top_k: usize,
) -> Result<Vec<RankingRecord>> {
    lexicon
        .entries
        .iter()
        .map(|e| translate_pair(&e.source, &lexicon.source_language, &e.target, &e.language, table, vocab, method, top_k))
        .collect()
}

/// Translates `source` (in `src`) towards `tgt`, recording `target` as the
/// expected answer.
#[allow(clippy::too_many_arguments)]
pub fn translate_pair(
    source: &str,
    src: &str,
    target: &str,
    tgt: &str,
    table: Option<&LanguageVectorTable>,
    vocab: &VocabEmbedding,
    method: Method,
    top_k: usize,
) -> Result<RankingRecord> {
    let row = vocab
        .lookup_word(source)
        .ok_or_else(|| Error::TokenNotFound(source.into()))?;
    let v = vocab.row_f64(row);
    let mut record = match method {
        Method::Analogy => {
            let table = table.ok_or_else(|| Error::InvalidParameter("analogy needs a language-vector table".into()))?;
            analogy_translate(&v, src, tgt, table, vocab, source, top_k)?
        }
        Method::Baseline => baseline_translate(&v, vocab, source, top_k)?,
        Method::Template | Method::Mlm => {
            return Err(Error::InvalidParameter(alloc::format!("{method} rankings are not produced by translation")));
        }
    };
    record.source = String::from(source);
    record.language = String::from(tgt);
    record.target = String::from(target);
    Ok(record)
}

/// 1-based rank `target` would get in the full candidate ranking, without
/// building it. `None` when the target is not a candidate.
fn rank_in_scores(vocab: &VocabEmbedding, scores: &[f64], exclude: Option<usize>, target: usize) -> Option<usize> {
    if vocab.is_subword(target) || Some(target) == exclude {
        return None;
    }
    let ts = scores[target];
    let ahead = eligible(vocab, exclude)
        .filter(|&i| {
            let s = scores[i];
            s > ts || (s == ts && i < target)
        })
        .count();
    Some(ahead + 1)
}

/// Word pairs for every ordered language pair, pivoting through the
/// lexicon's source concepts. Only whole-word vocabulary entries are used.
pub fn pivot_pairs(lexicon: &Lexicon, vocab: &VocabEmbedding) -> BTreeMap<(String, String), Vec<(String, String)>> {
    // concept -> language -> words
    let mut concepts: BTreeMap<String, BTreeMap<String, BTreeSet<String>>> = BTreeMap::new();
    for e in &lexicon.entries {
        let concept = normalize_token(&e.source);
        let langs = concepts.entry(concept).or_default();
        if vocab.lookup_word(&e.source).is_some() {
            langs.entry(lexicon.source_language.clone()).or_default().insert(normalize_token(&e.source));
        }
        if vocab.lookup_word(&e.target).is_some() {
            langs.entry(e.language.clone()).or_default().insert(normalize_token(&e.target));
        }
    }
    let mut pairs: BTreeMap<(String, String), BTreeSet<(String, String)>> = BTreeMap::new();
    for langs in concepts.values() {
        for (s, ws) in langs {
            for (t, wt) in langs {
                if s == t {
                    continue;
                }
                let cell = pairs.entry((s.clone(), t.clone())).or_default();
                for a in ws {
                    for b in wt {
                        if a != b {
                            cell.insert((a.clone(), b.clone()));
                        }
                    }
                }
            }
        }
    }
    pairs.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect()
}

/// Analogy accuracy@k for every ordered language pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AllPairsMatrix {
    pub languages: Vec<String>,
    pub k: usize,
    /// `cells[s][t]`; `None` on the diagonal and where no pairs exist.
    pub cells: Vec<Vec<Option<f64>>>,
    /// Number of evaluated word pairs per cell.
    pub counts: Vec<Vec<usize>>,
}

impl AllPairsMatrix {
    pub fn get(&self, src: &str, tgt: &str) -> Option<f64> {
        let s = self.languages.iter().position(|l| l == src)?;
        let t = self.languages.iter().position(|l| l == tgt)?;
        self.cells[s][t]
    }
}

/// Accuracy@k of analogy translation between every ordered pair of the
/// table's languages, over word pairs obtained by pivoting through the
/// lexicon.
pub fn all_pairs_matrix(lexicon: &Lexicon, table: &LanguageVectorTable, vocab: &VocabEmbedding, k: usize) -> Result<AllPairsMatrix> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let languages = table.languages();
    let pairs = pivot_pairs(lexicon, vocab);
    let n = languages.len();
    let mut cells = vec![vec![None; n]; n];
    let mut counts = vec![vec![0usize; n]; n];
    for (si, s) in languages.iter().enumerate() {
        for (ti, t) in languages.iter().enumerate() {
            if si == ti {
                continue;
            }
            let Some(list) = pairs.get(&(s.clone(), t.clone())) else {
                continue;
            };
            if list.is_empty() {
                continue;
            }
            let mut hits = 0usize;
            for (a, b) in list {
                let ai = vocab.lookup_word(a).ok_or_else(|| Error::TokenNotFound(a.clone()))?;
                let bi = vocab.lookup_word(b).ok_or_else(|| Error::TokenNotFound(b.clone()))?;
                let scores = analogy_scores(&vocab.row_f64(ai), s, t, table, vocab)?;
                if rank_in_scores(vocab, &scores, Some(ai), bi).is_some_and(|r| r <= k) {
                    hits += 1;
                }
            }
            cells[si][ti] = Some(hits as f64 / list.len() as f64);
            counts[si][ti] = list.len();
        }
    }
    Ok(AllPairsMatrix {
        languages,
        k,
        cells,
        counts,
    })
}

/// Vocabulary rows as a matrix, for analyses that need them in `f64`.
pub fn vocab_matrix(vocab: &VocabEmbedding) -> Matrix {
    Matrix::from_vec(vocab.len(), vocab.d(), vocab.matrix().iter().map(|&v| v as f64).collect())
        .expect("vocabulary matrix has consistent shape")
}
