//! On-disk formats: `.reprset/`, `.vocab/`, `.proj/` and `.langvec/`
//! bundles, lexicon and ranking TSVs, word-vector text files.
//!
//! Matrix payloads are raw little-endian `f32`, row-major, with no header.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lingsub_core::classifier::LinearClassifier;
use lingsub_core::error::Error as CoreError;
use lingsub_core::inlp::{InlpStatus, ProjectionPair};
use lingsub_core::intervention::CrossLingualTable;
use lingsub_core::langvec::LanguageVectorTable;
use lingsub_core::linalg::Matrix;
use lingsub_core::repr::{Candidate, Label, Layer, LexEntry, Lexicon, Method, RankingRecord, RepresentationSet, VocabEmbedding};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::RunManifest;
use crate::tsv;

pub const META: &str = "meta.json";
pub const MATRIX: &str = "matrix.f32";
pub const LABELS: &str = "labels.tsv";
pub const BIAS: &str = "bias.f32";
pub const VOCAB: &str = "vocab.tsv";
pub const P_N: &str = "p_n.f32";
pub const P_R: &str = "p_r.f32";

/// Largest disagreement tolerated between a stored `p_r.f32` and
/// `I - P_N` recomputed from `p_n.f32`.
const P_R_TOL: f64 = 1e-5;

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| Error::format(path, "text", format!("invalid UTF-8 at byte {}", e.utf8_error().valid_up_to())))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

/// Writes `lines`, each followed by `\n`.
pub fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types always encode");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &'static str) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, what, e.to_string()))
}

pub fn f32_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Decodes a payload whose byte length must be a multiple of `4 * row_len`.
fn decode_f32(path: &Path, bytes: &[u8], row_len: usize) -> Result<Vec<f32>> {
    let stride = 4 * row_len.max(1);
    if bytes.len() % stride != 0 {
        return Err(Error::invalid(
            path,
            CoreError::DimensionMismatch {
                expected: row_len,
                got: bytes.len() / 4 % row_len.max(1),
            },
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Vec<f32>> {
    let values = decode_f32(path, &read_bytes(path)?, cols)?;
    if values.len() != rows * cols {
        return Err(Error::invalid(
            path,
            CoreError::DimensionMismatch {
                expected: rows,
                got: values.len() / cols.max(1),
            },
        ));
    }
    Ok(values)
}

fn matrix_f32(m: &Matrix) -> Vec<f32> {
    m.as_slice().iter().map(|&v| v as f32).collect()
}

fn matrix_from_f32(path: &Path, rows: usize, cols: usize, values: Vec<f32>) -> Result<Matrix> {
    Matrix::from_vec(rows, cols, values.into_iter().map(f64::from).collect()).map_err(|e| Error::invalid(path, e))
}

fn parse_layer(path: &Path, s: &str) -> Result<Layer> {
    Layer::from_str(s).map_err(|e| Error::format(path, "header", e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReprMeta {
    pub n: usize,
    pub d: usize,
    pub dtype: String,
    pub layer: String,
    pub languages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

fn check_dtype(path: &Path, dtype: &str) -> Result<()> {
    if dtype != "f32" {
        return Err(Error::format(path, "header", format!("unsupported dtype {dtype:?}")));
    }
    Ok(())
}

pub fn write_representation_set(set: &RepresentationSet, dir: &Path, manifest: Option<&RunManifest>) -> Result<()> {
    create_dir(dir)?;
    let meta = ReprMeta {
        n: set.n(),
        d: set.d(),
        dtype: "f32".into(),
        layer: set.layer().as_str().into(),
        languages: set.languages().to_vec(),
        manifest: manifest.cloned(),
    };
    write_json(&dir.join(META), &meta)?;
    write_bytes(&dir.join(MATRIX), &f32_bytes(set.vectors()))?;
    write_lines(
        &dir.join(LABELS),
        set.labels().iter().map(|l| {
            tsv::join(&[&l.token, &l.language, &l.sentence_id.to_string(), &l.position.to_string()])
        }),
    )
}

pub fn read_representation_set(dir: &Path) -> Result<RepresentationSet> {
    let meta_path = dir.join(META);
    let meta: ReprMeta = read_json(&meta_path, "header")?;
    check_dtype(&meta_path, &meta.dtype)?;
    let layer = parse_layer(&meta_path, &meta.layer)?;
    let matrix_path = dir.join(MATRIX);
    let vectors = decode_f32(&matrix_path, &read_bytes(&matrix_path)?, meta.d)?;
    let rows = vectors.len() / meta.d.max(1);
    if rows != meta.n {
        return Err(Error::invalid(
            &matrix_path,
            CoreError::DimensionMismatch {
                expected: meta.n,
                got: rows,
            },
        ));
    }
    let labels_path = dir.join(LABELS);
    let text = read_text(&labels_path)?;
    let mut labels = Vec::new();
    for (no, line) in tsv::lines(&text) {
        let f = tsv::fields(line).map_err(|e| Error::format(&labels_path, "label row", format!("line {no}: {e}")))?;
        let bad = |detail: &str| Error::format(&labels_path, "label row", format!("line {no}: {detail}"));
        let [token, language, sentence_id, position] = <[String; 4]>::try_from(f).map_err(|_| bad("expected 4 fields"))?;
        labels.push(Label {
            token,
            language,
            sentence_id: sentence_id.parse().map_err(|_| bad("sentence_id is not an integer"))?,
            position: position.parse().map_err(|_| bad("position is not an integer"))?,
        });
    }
    RepresentationSet::new(meta.d, vectors, labels, layer, meta.languages).map_err(|e| Error::invalid(dir, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabMeta {
    #[serde(rename = "V")]
    pub v: usize,
    pub d: usize,
    pub has_bias: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

pub fn write_vocab(vocab: &VocabEmbedding, dir: &Path, manifest: Option<&RunManifest>) -> Result<()> {
    create_dir(dir)?;
    let meta = VocabMeta {
        v: vocab.len(),
        d: vocab.d(),
        has_bias: vocab.bias().is_some(),
        manifest: manifest.cloned(),
    };
    write_json(&dir.join(META), &meta)?;
    write_bytes(&dir.join(MATRIX), &f32_bytes(vocab.matrix()))?;
    if let Some(b) = vocab.bias() {
        write_bytes(&dir.join(BIAS), &f32_bytes(b))?;
    }
    write_lines(
        &dir.join(VOCAB),
        vocab
            .tokens()
            .iter()
            .zip(vocab.subword_flags())
            .map(|(t, &s)| tsv::join(&[t, if s { "1" } else { "0" }])),
    )
}

pub fn read_vocab(dir: &Path) -> Result<VocabEmbedding> {
    let meta_path = dir.join(META);
    let meta: VocabMeta = read_json(&meta_path, "header")?;
    let matrix = read_matrix(&dir.join(MATRIX), meta.v, meta.d)?;
    let bias = if meta.has_bias {
        Some(read_matrix(&dir.join(BIAS), meta.v, 1)?)
    } else {
        None
    };
    let vocab_path = dir.join(VOCAB);
    let text = read_text(&vocab_path)?;
    let mut tokens = Vec::with_capacity(meta.v);
    let mut flags = Vec::with_capacity(meta.v);
    for (no, line) in tsv::lines(&text) {
        let bad = |detail: &str| Error::format(&vocab_path, "vocabulary row", format!("line {no}: {detail}"));
        let f = tsv::fields(line).map_err(|e| bad(&e))?;
        let [token, flag] = <[String; 2]>::try_from(f).map_err(|_| bad("expected 2 fields"))?;
        flags.push(match flag.as_str() {
            "1" | "true" => true,
            "0" | "false" => false,
            _ => return Err(bad("subword flag must be 0 or 1")),
        });
        tokens.push(token);
    }
    if tokens.len() != meta.v {
        return Err(Error::invalid(
            &vocab_path,
            CoreError::LabelCount {
                labels: tokens.len(),
                rows: meta.v,
            },
        ));
    }
    VocabEmbedding::new(meta.d, matrix, tokens, bias, flags).map_err(|e| Error::invalid(dir, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierMeta {
    pub classes: Vec<String>,
    pub intercept: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjMeta {
    pub d: usize,
    pub iterations: usize,
    pub layer: String,
    pub seed: u64,
    pub classifier_count: usize,
    pub status: String,
    pub dev_accuracy: Vec<f64>,
    pub nullspace_rank: usize,
    pub classifiers: Vec<ClassifierMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

fn weights_file(i: usize) -> String {
    format!("w_{i}.f32")
}

fn parse_status(path: &Path, s: &str) -> Result<InlpStatus> {
    [InlpStatus::Completed, InlpStatus::Converged, InlpStatus::Exhausted]
        .into_iter()
        .find(|st| st.as_str() == s)
        .ok_or_else(|| Error::format(path, "header", format!("unknown status {s:?}")))
}

pub fn write_projection(pair: &ProjectionPair, dir: &Path, manifest: Option<&RunManifest>) -> Result<()> {
    create_dir(dir)?;
    let meta = ProjMeta {
        d: pair.d(),
        iterations: pair.iterations(),
        layer: pair.source_layer().as_str().into(),
        seed: pair.seed(),
        classifier_count: pair.classifiers().len(),
        status: pair.status().as_str().into(),
        dev_accuracy: pair.dev_accuracy().to_vec(),
        nullspace_rank: pair.nullspace_rank(),
        classifiers: pair
            .classifiers()
            .iter()
            .map(|c| ClassifierMeta {
                classes: c.classes().to_vec(),
                intercept: c.intercept().to_vec(),
            })
            .collect(),
        manifest: manifest.cloned(),
    };
    write_json(&dir.join(META), &meta)?;
    write_bytes(&dir.join(P_N), &f32_bytes(&matrix_f32(pair.nullspace())))?;
    write_bytes(&dir.join(P_R), &f32_bytes(&matrix_f32(pair.rowspace())))?;
    for (i, c) in pair.classifiers().iter().enumerate() {
        write_bytes(&dir.join(weights_file(i)), &f32_bytes(&matrix_f32(c.weights())))?;
    }
    Ok(())
}

/// Reads a projection bundle. Payloads are stored as `f32`, so the
/// returned matrices carry single-precision rounding.
pub fn read_projection(dir: &Path) -> Result<ProjectionPair> {
    let meta_path = dir.join(META);
    let meta: ProjMeta = read_json(&meta_path, "header")?;
    let layer = parse_layer(&meta_path, &meta.layer)?;
    let status = parse_status(&meta_path, &meta.status)?;
    if meta.classifiers.len() != meta.classifier_count {
        return Err(Error::format(
            &meta_path,
            "header",
            format!("classifier_count {} but {} classifier entries", meta.classifier_count, meta.classifiers.len()),
        ));
    }
    let d = meta.d;
    let pn_path = dir.join(P_N);
    let p_n = matrix_from_f32(&pn_path, d, d, read_matrix(&pn_path, d, d)?)?;
    let mut classifiers = Vec::with_capacity(meta.classifier_count);
    for (i, c) in meta.classifiers.into_iter().enumerate() {
        let path = dir.join(weights_file(i));
        let k = c.classes.len();
        let w = matrix_from_f32(&path, k, d, read_matrix(&path, k, d)?)?;
        classifiers.push(LinearClassifier::new(w, c.intercept, c.classes).map_err(|e| Error::invalid(&path, e))?);
    }
    let pair = ProjectionPair::from_parts(p_n, classifiers, layer, meta.seed, status, meta.dev_accuracy)
        .map_err(|e| Error::invalid(dir, e))?;
    let pr_path = dir.join(P_R);
    let p_r = matrix_from_f32(&pr_path, d, d, read_matrix(&pr_path, d, d)?)?;
    let gap = p_r.max_abs_diff(pair.rowspace());
    if gap > P_R_TOL {
        return Err(Error::format(&pr_path, "projection", format!("p_r differs from I - p_n by {gap:e}")));
    }
    Ok(pair)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LangvecMeta {
    pub d: usize,
    pub languages: Vec<String>,
    pub sample_counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

/// Writes a `.langvec/` bundle: one matrix row per language, in the order
/// listed in `meta.json`.
pub fn write_language_vectors(table: &LanguageVectorTable, dir: &Path, manifest: Option<&RunManifest>) -> Result<()> {
    create_dir(dir)?;
    let languages = table.languages();
    let meta = LangvecMeta {
        d: table.d(),
        languages: languages.clone(),
        sample_counts: table.sample_count.clone(),
        manifest: manifest.cloned(),
    };
    write_json(&dir.join(META), &meta)?;
    let values: Vec<f32> = languages.iter().flat_map(|l| table.vectors[l].iter().map(|&v| v as f32)).collect();
    write_bytes(&dir.join(MATRIX), &f32_bytes(&values))
}

pub fn read_language_vectors(dir: &Path) -> Result<LanguageVectorTable> {
    let meta: LangvecMeta = read_json(&dir.join(META), "header")?;
    let path = dir.join(MATRIX);
    let values = read_matrix(&path, meta.languages.len(), meta.d)?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(&path, CoreError::NonFinite { row: i / meta.d, col: i % meta.d }));
    }
    let vectors = meta
        .languages
        .iter()
        .zip(values.chunks_exact(meta.d.max(1)))
        .map(|(l, row)| (l.clone(), row.iter().map(|&v| f64::from(v)).collect()))
        .collect();
    Ok(LanguageVectorTable {
        vectors,
        sample_count: meta.sample_counts,
    })
}

const SOURCE_LANGUAGE_TAG: &str = "#source_language=";
const LEXICON_HEADER: [&str; 4] = ["source", "target", "language", "pos"];

/// Reads a lexicon TSV. A `#source_language=<tag>` line overrides
/// `default_source`; other `#` lines and a literal column-name row are
/// ignored.
pub fn read_lexicon(path: &Path, default_source: &str) -> Result<Lexicon> {
    let text = read_text(path)?;
    let mut source = default_source.to_string();
    let mut entries = Vec::new();
    for (no, line) in tsv::lines(&text) {
        if let Some(tag) = line.strip_prefix(SOURCE_LANGUAGE_TAG) {
            source = tag.trim().to_string();
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let bad = |detail: &str| Error::format(path, "lexicon row", format!("line {no}: {detail}"));
        let f = tsv::fields(line).map_err(|e| bad(&e))?;
        if f == LEXICON_HEADER {
            continue;
        }
        let [source, target, language, pos] = <[String; 4]>::try_from(f).map_err(|_| bad("expected 4 fields"))?;
        entries.push(LexEntry {
            source,
            target,
            language,
            pos,
        });
    }
    Ok(Lexicon::new(source, entries))
}

pub fn write_lexicon(lexicon: &Lexicon, path: &Path) -> Result<()> {
    let header = format!("{SOURCE_LANGUAGE_TAG}{}", lexicon.source_language);
    write_lines(
        path,
        std::iter::once(header).chain(
            lexicon
                .entries
                .iter()
                .map(|e| tsv::join(&[&e.source, &e.target, &e.language, &e.pos])),
        ),
    )
}

const TOP_K_TAG: &str = "#top_k=";
const CANDIDATE_SEPARATORS: [char; 2] = [';', ':'];

fn format_candidates(candidates: &[Candidate]) -> String {
    candidates
        .iter()
        .map(|c| format!("{}:{}", tsv::escape(&c.token, &CANDIDATE_SEPARATORS), c.score))
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes a ranking dump. `top_k` is declared in the header; no record
/// may carry more candidates.
pub fn write_rankings(records: &[RankingRecord], top_k: usize, path: &Path) -> Result<()> {
    if let Some(r) = records.iter().find(|r| r.candidates.len() > top_k) {
        return Err(Error::Core(CoreError::KTooLarge {
            k: r.candidates.len(),
            len: top_k,
        }));
    }
    write_lines(
        path,
        std::iter::once(format!("{TOP_K_TAG}{top_k}")).chain(records.iter().map(|r| {
            let mut line = tsv::join(&[&r.source, &r.language, &r.target, r.method.as_str()]);
            line.push('\t');
            line.push_str(&format_candidates(&r.candidates));
            line
        })),
    )
}

/// Ranking dump reader. Returns the declared `K` with the records, each
/// validated for score order, uniqueness and source exclusion.
pub fn read_rankings(path: &Path) -> Result<(usize, Vec<RankingRecord>)> {
    let text = read_text(path)?;
    let mut lines = tsv::lines(&text);
    let top_k = lines
        .next()
        .and_then(|(_, l)| l.strip_prefix(TOP_K_TAG))
        .and_then(|k| k.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::format(path, "ranking header", format!("first line must be {TOP_K_TAG}<K>")))?;
    let mut records = Vec::new();
    for (no, line) in lines {
        let bad = |detail: String| Error::format(path, "ranking row", format!("line {no}: {detail}"));
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", cols.len())));
        }
        let text_field = |s: &str| tsv::unescape(s).map_err(&bad);
        let method = Method::from_str(&text_field(cols[3])?).map_err(|e| bad(e.to_string()))?;
        let mut candidates = Vec::new();
        if !cols[4].is_empty() {
            for item in tsv::split_raw(cols[4], ';') {
                let parts = tsv::split_raw(item, ':');
                let [token, score] = parts[..] else {
                    return Err(bad(format!("candidate {item:?} is not token:score")));
                };
                let score: f64 = score
                    .parse()
                    .ok()
                    .filter(|s: &f64| s.is_finite())
                    .ok_or_else(|| bad(format!("score {score:?} is not a finite number")))?;
                candidates.push(Candidate {
                    token: text_field(token)?,
                    score,
                });
            }
        }
        if candidates.len() > top_k {
            return Err(bad(format!("{} candidates exceed declared K={top_k}", candidates.len())));
        }
        let record = RankingRecord {
            source: text_field(cols[0])?,
            language: text_field(cols[1])?,
            target: text_field(cols[2])?,
            method,
            candidates,
        };
        record
            .validate()
            .map_err(|e| Error::invalid(&PathBuf::from(format!("{}:{no}", path.display())), e))?;
        records.push(record);
    }
    Ok((top_k, records))
}

/// Outcome of reading a word-vector text file.
#[derive(Debug, Clone)]
pub struct WordVectors {
    pub table: CrossLingualTable,
    /// Lines whose (normalized) word was already present.
    pub duplicates: usize,
}

/// Reads `word v1 … vm` lines with an optional leading `count dim` line.
pub fn read_word_vectors(path: &Path) -> Result<WordVectors> {
    let text = read_text(path)?;
    let mut lines = tsv::lines(&text).peekable();
    let mut declared: Option<(usize, usize)> = None;
    if let Some((_, first)) = lines.peek() {
        let parts: Vec<&str> = first.split_whitespace().collect();
        if let [count, dim] = parts[..] {
            if let (Ok(c), Ok(d)) = (count.parse(), dim.parse()) {
                declared = Some((c, d));
                lines.next();
            }
        }
    }
    let mut table: Option<CrossLingualTable> = declared.map(|(_, d)| CrossLingualTable::new(d));
    let mut rows = 0;
    let mut duplicates = 0;
    for (no, line) in lines {
        let bad = |detail: String| Error::format(path, "word-vector row", format!("line {no}: {detail}"));
        let mut parts = line.split_whitespace();
        let word = parts.next().ok_or_else(|| bad("empty line".into()))?;
        let vector: Vec<f64> = parts
            .map(|p| p.parse::<f64>().map_err(|_| bad(format!("{p:?} is not a number"))))
            .collect::<Result<_>>()?;
        let t = table.get_or_insert_with(|| CrossLingualTable::new(vector.len()));
        match t.insert(word, vector) {
            Ok(true) => {}
            Ok(false) => duplicates += 1,
            Err(e) => return Err(bad(e.to_string())),
        }
        rows += 1;
    }
    if let Some((count, _)) = declared {
        if count != rows {
            return Err(Error::format(path, "word-vector header", format!("declares {count} rows, found {rows}")));
        }
    }
    let table = table.ok_or_else(|| Error::format(path, "word-vector file", "no vectors"))?;
    Ok(WordVectors { table, duplicates })
}

pub fn write_word_vectors<'a, I>(path: &Path, dim: usize, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let rows: Vec<_> = rows.into_iter().collect();
    let header = format!("{} {dim}", rows.len());
    write_lines(
        path,
        std::iter::once(header).chain(rows.into_iter().map(|(w, v)| {
            let mut line = w.to_string();
            for x in v {
                line.push(' ');
                line.push_str(&x.to_string());
            }
            line
        })),
    )
}

/// One word per line; blank lines and `#` comments are skipped.
pub fn read_wordlist(path: &Path) -> Result<Vec<String>> {
    let text = read_text(path)?;
    Ok(tsv::lines(&text)
        .map(|(_, l)| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// `language ⟨TAB⟩ size` lines, as used for corpus-size correlation.
pub fn read_language_sizes(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = read_text(path)?;
    let mut out = BTreeMap::new();
    for (no, line) in tsv::lines(&text) {
        if line.starts_with('#') {
            continue;
        }
        let bad = |detail: &str| Error::format(path, "size row", format!("line {no}: {detail}"));
        let f = tsv::fields(line).map_err(|e| bad(&e))?;
        let [lang, size] = <[String; 2]>::try_from(f).map_err(|_| bad("expected 2 fields"))?;
        let size: f64 = size.trim().parse().map_err(|_| bad("size is not a number"))?;
        if out.insert(lang, size).is_some() {
            return Err(bad("duplicate language"));
        }
    }
    Ok(out)
}
