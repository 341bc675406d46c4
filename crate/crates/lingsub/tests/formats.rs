use std::fs;
use std::path::Path;

use lingsub::store;
use lingsub::Error;
use lingsub_core::error::Error as CoreError;
use lingsub_core::inlp::{run_inlp, InlpConfig, InlpStatus};
use lingsub_core::langvec::LanguageVectorTable;
use lingsub_core::repr::{Candidate, Label, Layer, LexEntry, Lexicon, Method, RankingRecord, RepresentationSet, VocabEmbedding};
use lingsub_core::synth::{emit_dataset, generate_world, PlantedConfig};
use tempfile::tempdir;

fn label(token: &str, language: &str, sentence_id: u64, position: u32) -> Label {
    Label {
        token: token.into(),
        language: language.into(),
        sentence_id,
        position,
    }
}

fn le_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn core_error(e: Error) -> CoreError {
    match e {
        Error::Invalid { source, .. } | Error::Core(source) => source,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

fn small_set() -> RepresentationSet {
    let values: Vec<f32> = (0..12).map(|i| i as f32 * 0.5 - 2.25).collect();
    let labels = vec![
        label("dog", "en", 0, 1),
        label("Hund\twith tab", "de", 1, 0),
        label("back\\slash\nnewline", "en", u64::MAX, u32::MAX),
    ];
    RepresentationSet::new(4, values, labels, Layer::LastHidden, vec!["en".into(), "de".into()]).unwrap()
}

#[test]
fn representation_set_round_trip_is_exact() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("x.reprset");
    let set = small_set();
    store::write_representation_set(&set, &path, None).unwrap();
    assert_eq!(fs::read(path.join("matrix.f32")).unwrap(), le_bytes(set.vectors()));
    let back = store::read_representation_set(&path).unwrap();
    assert_eq!(back, set);
    let bits = |s: &RepresentationSet| s.vectors().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&set));
}

#[test]
fn payload_bytes_are_little_endian_f32() {
    let dir = tempdir().unwrap();
    let one = RepresentationSet::new(1, vec![0.0], vec![label("a", "en", 0, 0)], Layer::Embedding, vec!["en".into()]).unwrap();
    store::write_representation_set(&one, &dir.path().join("one"), None).unwrap();
    assert_eq!(fs::read(dir.path().join("one/matrix.f32")).unwrap(), vec![0u8; 4]);

    let labels = vec![label("a", "en", 0, 0), label("b", "en", 0, 1)];
    let id = RepresentationSet::new(2, vec![1.0, 0.0, 0.0, 1.0], labels, Layer::Embedding, vec!["en".into()]).unwrap();
    store::write_representation_set(&id, &dir.path().join("id"), None).unwrap();
    let mut want = Vec::new();
    for v in [1.0f32, 0.0, 0.0, 1.0] {
        want.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    assert_eq!(fs::read(dir.path().join("id/matrix.f32")).unwrap(), want);
    assert_eq!(&want[..4], &[0x00, 0x00, 0x80, 0x3f]);
}

#[test]
fn nan_cannot_enter_a_set() {
    let err = RepresentationSet::new(1, vec![f32::NAN], vec![label("a", "en", 0, 0)], Layer::Embedding, vec!["en".into()]).unwrap_err();
    assert_eq!(err, CoreError::NonFinite { row: 0, col: 0 });
}

/// Writes a bundle the way an independent producer would, field by field.
fn write_raw_reprset(dir: &Path, meta: &str, matrix: &[u8], labels: &str) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("meta.json"), meta).unwrap();
    fs::write(dir.join("matrix.f32"), matrix).unwrap();
    fs::write(dir.join("labels.tsv"), labels).unwrap();
}

#[test]
fn reader_diagnostics_are_distinct() {
    let dir = tempdir().unwrap();
    let rows4 = le_bytes(&[0.5; 8]);
    let labels5 = "a\ten\t0\t0\nb\ten\t1\t0\nc\ten\t2\t0\nd\ten\t3\t0\ne\ten\t4\t0\n";
    let meta = r#"{"n": 4, "d": 2, "dtype": "f32", "layer": "embedding", "languages": ["en"]}"#;

    let p = dir.path().join("labels.reprset");
    write_raw_reprset(&p, meta, &rows4, labels5);
    assert_eq!(core_error(store::read_representation_set(&p).unwrap_err()), CoreError::LabelCount { labels: 5, rows: 4 });

    let p = dir.path().join("dim.reprset");
    let meta768 = r#"{"n": 1, "d": 768, "dtype": "f32", "layer": "embedding", "languages": ["en"]}"#;
    write_raw_reprset(&p, meta768, &vec![0u8; 767 * 4], "a\ten\t0\t0\n");
    assert!(matches!(
        core_error(store::read_representation_set(&p).unwrap_err()),
        CoreError::DimensionMismatch { expected: 768, .. }
    ));

    let p = dir.path().join("header.reprset");
    write_raw_reprset(&p, "{\"n\": 4, \"d\":", &rows4, "");
    assert!(matches!(store::read_representation_set(&p).unwrap_err(), Error::Format { what: "header", .. }));

    let p = dir.path().join("lang.reprset");
    let labels4 = "a\ten\t0\t0\nb\ten\t1\t0\nc\txx\t2\t0\nd\ten\t3\t0\n";
    write_raw_reprset(&p, meta, &rows4, labels4);
    assert_eq!(core_error(store::read_representation_set(&p).unwrap_err()), CoreError::UnknownLanguage("xx".into()));

    let p = dir.path().join("dtype.reprset");
    write_raw_reprset(&p, &meta.replace("f32", "f16"), &rows4, labels4);
    assert!(matches!(store::read_representation_set(&p).unwrap_err(), Error::Format { .. }));

    let p = dir.path().join("rows.reprset");
    write_raw_reprset(&p, &meta.replace("\"n\": 4", "\"n\": 3"), &rows4, labels4);
    assert!(matches!(
        core_error(store::read_representation_set(&p).unwrap_err()),
        CoreError::DimensionMismatch { expected: 3, got: 4 }
    ));

    let missing = store::read_representation_set(&dir.path().join("absent.reprset")).unwrap_err();
    assert!(matches!(missing, Error::Io { .. }));
    assert_eq!(missing.exit_code(), 2);
}

#[test]
fn externally_written_bundles_are_readable() {
    let dir = tempdir().unwrap();
    // Hidden states with an extra metadata field and CRLF label lines.
    let p = dir.path().join("states.reprset");
    let meta = r#"{"n": 2, "d": 3, "dtype": "f32", "layer": "mlm_head_output", "languages": ["en", "fr"], "model": "any"}"#;
    write_raw_reprset(&p, meta, &le_bytes(&[1.0, -2.0, 0.25, 3.5, 0.0, -0.125]), "cat\ten\t10\t3\r\nchat\tfr\t11\t2\r\n");
    let set = store::read_representation_set(&p).unwrap();
    assert_eq!(set.layer(), Layer::MlmHeadOutput);
    assert_eq!(set.row(1), &[3.5, 0.0, -0.125]);
    assert_eq!(set.labels()[1], label("chat", "fr", 11, 2));

    // Output embeddings with decoder bias.
    let v = dir.path().join("model.vocab");
    fs::create_dir_all(&v).unwrap();
    fs::write(v.join("meta.json"), r#"{"V": 3, "d": 2, "has_bias": true}"#).unwrap();
    fs::write(v.join("matrix.f32"), le_bytes(&[1.0, 0.0, 0.0, 1.0, 1.0, 1.0])).unwrap();
    fs::write(v.join("bias.f32"), le_bytes(&[0.5, -0.5, 0.0])).unwrap();
    fs::write(v.join("vocab.tsv"), "cat\t0\n##s\t1\nchat\t0\n").unwrap();
    let vocab = store::read_vocab(&v).unwrap();
    assert_eq!(vocab.bias(), Some(&[0.5f32, -0.5, 0.0][..]));
    assert!(vocab.is_subword(1));
    assert_eq!(vocab.lookup_word("chat"), Some(2));

    // Template-query rankings.
    let r = dir.path().join("template.tsv");
    fs::write(&r, "#top_k=3\ncat\tfr\tchat\ttemplate\tchat:4.5;chats:1.25;le:-0.5\n").unwrap();
    let (k, records) = store::read_rankings(&r).unwrap();
    assert_eq!(k, 3);
    assert_eq!(records[0].method, Method::Template);
    assert_eq!(records[0].rank_of("chat"), Some(1));
    assert_eq!(records[0].candidates[2].score, -0.5);
}

fn vocab_fixture(bias: bool) -> VocabEmbedding {
    let tokens = vec!["dog".to_string(), "##s".into(), "Hund".into(), "chien".into()];
    let b = bias.then(|| vec![0.1, -0.2, 0.3, f32::MIN_POSITIVE]);
    VocabEmbedding::new(2, vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 1e-30, -7.0], tokens, b, vec![false, true, false, false]).unwrap()
}

#[test]
fn vocab_round_trip_with_and_without_bias() {
    let dir = tempdir().unwrap();
    for bias in [true, false] {
        let path = dir.path().join(format!("v{bias}.vocab"));
        let vocab = vocab_fixture(bias);
        store::write_vocab(&vocab, &path, None).unwrap();
        assert_eq!(path.join("bias.f32").exists(), bias);
        assert_eq!(store::read_vocab(&path).unwrap(), vocab);
    }
    let path = dir.path().join("vtrue.vocab");
    fs::remove_file(path.join("bias.f32")).unwrap();
    assert!(matches!(store::read_vocab(&path).unwrap_err(), Error::Io { .. }));
    fs::write(path.join("bias.f32"), le_bytes(&[0.0; 3])).unwrap();
    assert!(matches!(core_error(store::read_vocab(&path).unwrap_err()), CoreError::DimensionMismatch { .. }));
}

#[test]
fn projection_round_trip() {
    let cfg = PlantedConfig::new(12, 3, vec!["a".into(), "b".into(), "c".into()], 20, 0.1, 3);
    let world = generate_world(&cfg).unwrap();
    let (set, _, _) = emit_dataset(&world, 60, 0.1, 4).unwrap();
    let pair = run_inlp(&set, &InlpConfig::default()).unwrap();
    assert!(!pair.classifiers().is_empty());

    let dir = tempdir().unwrap();
    let path = dir.path().join("p.proj");
    store::write_projection(&pair, &path, None).unwrap();
    for i in 0..pair.classifiers().len() {
        assert!(path.join(format!("w_{i}.f32")).exists());
    }
    let back = store::read_projection(&path).unwrap();
    assert_eq!(back.d(), pair.d());
    assert_eq!(back.iterations(), pair.iterations());
    assert_eq!(back.source_layer(), pair.source_layer());
    assert_eq!(back.seed(), pair.seed());
    assert_eq!(back.status(), pair.status());
    assert_eq!(back.dev_accuracy(), pair.dev_accuracy());
    assert_eq!(back.nullspace_rank(), pair.nullspace_rank());
    // Payloads are single precision.
    assert!(back.nullspace().max_abs_diff(pair.nullspace()) <= 1e-7);
    for (a, b) in back.classifiers().iter().zip(pair.classifiers()) {
        assert_eq!(a.classes(), b.classes());
        assert_eq!(a.intercept(), b.intercept());
        assert!(a.weights().max_abs_diff(b.weights()) <= 1e-6 * b.weights().max_abs().max(1.0));
    }

    let bad = le_bytes(&vec![0.0; pair.d() * pair.d()]);
    fs::write(path.join("p_r.f32"), bad).unwrap();
    assert!(matches!(store::read_projection(&path).unwrap_err(), Error::Format { what: "projection", .. }));
}

#[test]
fn projection_meta_status_is_checked() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("id.proj");
    let id = lingsub_core::inlp::ProjectionPair::identity(3, Layer::Embedding);
    store::write_projection(&id, &path, None).unwrap();
    let back = store::read_projection(&path).unwrap();
    assert_eq!(back.status(), InlpStatus::Completed);
    let meta = fs::read_to_string(path.join("meta.json")).unwrap().replace("completed", "finished");
    fs::write(path.join("meta.json"), meta).unwrap();
    assert!(matches!(store::read_projection(&path).unwrap_err(), Error::Format { .. }));
}

#[test]
fn language_vectors_round_trip() {
    let table = LanguageVectorTable {
        vectors: [("de".to_string(), vec![0.5, -1.0]), ("en".to_string(), vec![2.0, 0.25])].into_iter().collect(),
        sample_count: [("de".to_string(), 3), ("en".to_string(), 9)].into_iter().collect(),
    };
    let dir = tempdir().unwrap();
    let path = dir.path().join("t.langvec");
    store::write_language_vectors(&table, &path, None).unwrap();
    assert_eq!(store::read_language_vectors(&path).unwrap(), table);
}

#[test]
fn lexicon_round_trip_and_header_handling() {
    let lex = Lexicon::new(
        "en",
        vec![
            LexEntry {
                source: "dog".into(),
                target: "Hund".into(),
                language: "de".into(),
                pos: "N".into(),
            },
            LexEntry {
                source: "run\tfast".into(),
                target: "courir".into(),
                language: "fr".into(),
                pos: "V".into(),
            },
        ],
    );
    let dir = tempdir().unwrap();
    let path = dir.path().join("lex.tsv");
    store::write_lexicon(&lex, &path).unwrap();
    assert_eq!(store::read_lexicon(&path, "xx").unwrap(), lex);

    let plain = dir.path().join("plain.tsv");
    fs::write(&plain, "source\ttarget\tlanguage\tpos\n# comment\ndog\tchien\tfr\tN\n").unwrap();
    let read = store::read_lexicon(&plain, "en").unwrap();
    assert_eq!(read.source_language, "en");
    assert_eq!(read.len(), 1);

    fs::write(&plain, "dog\tchien\tfr\n").unwrap();
    assert!(matches!(store::read_lexicon(&plain, "en").unwrap_err(), Error::Format { .. }));
}

fn record(source: &str, tokens: &[(&str, f64)]) -> RankingRecord {
    RankingRecord {
        source: source.into(),
        language: "de".into(),
        target: "Hund".into(),
        method: Method::Analogy,
        candidates: tokens
            .iter()
            .map(|&(t, s)| Candidate {
                token: t.into(),
                score: s,
            })
            .collect(),
    }
}

#[test]
fn rankings_round_trip_with_awkward_tokens() {
    let records = vec![
        record("dog", &[("Hund", 0.1 + 0.2), ("a;b", 1e-300), ("c:d", -0.0), ("tab\there", -1.5e10)]),
        record("cat", &[]),
        record("x\\y", &[("ünï", f64::MIN_POSITIVE)]),
    ];
    let dir = tempdir().unwrap();
    let path = dir.path().join("r.tsv");
    store::write_rankings(&records, 4, &path).unwrap();
    let (k, back) = store::read_rankings(&path).unwrap();
    assert_eq!(k, 4);
    assert_eq!(back, records);
    for (a, b) in back.iter().zip(&records) {
        for (x, y) in a.candidates.iter().zip(&b.candidates) {
            assert_eq!(x.score.to_bits(), y.score.to_bits());
        }
    }
    assert!(store::write_rankings(&records, 3, &path).is_err());
}

#[test]
fn ranking_reader_rejects_bad_dumps() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("r.tsv");
    let cases = [
        "dog\tde\tHund\tanalogy\tHund:1\n",
        "#top_k=1\ndog\tde\tHund\tanalogy\tHund:1;Katze:0.5\n",
        "#top_k=2\ndog\tde\tHund\tanalogy\tHund:0.5;Katze:1\n",
        "#top_k=2\ndog\tde\tHund\tanalogy\tHund:1;Hund:0.5\n",
        "#top_k=2\ndog\tde\tHund\tanalogy\tdog:1\n",
        "#top_k=2\ndog\tde\tHund\tguess\tHund:1\n",
        "#top_k=2\ndog\tde\tHund\tanalogy\tHund=1\n",
        "#top_k=2\ndog\tde\tHund\tanalogy\tHund:NaN\n",
        "#top_k=2\ndog\tde\tHund\tanalogy\n",
    ];
    for text in cases {
        fs::write(&path, text).unwrap();
        let err = store::read_rankings(&path).unwrap_err();
        assert_eq!(err.exit_code(), 1, "{text:?}: {err}");
    }
}

#[test]
fn word_vector_text_format() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("w.vec");
    fs::write(&path, "3 2\ndog 1 0\nHund 0.9 0.1\nDOG 5 5\n").unwrap();
    let wv = store::read_word_vectors(&path).unwrap();
    assert_eq!(wv.duplicates, 1);
    assert_eq!(wv.table.dim(), 2);
    assert_eq!(wv.table.get("dog"), Some(&[1.0, 0.0][..]));
    assert_eq!(wv.table.get("hund"), Some(&[0.9, 0.1][..]));

    fs::write(&path, "dog 1 0 0\ncat 0 1 0\n").unwrap();
    assert_eq!(store::read_word_vectors(&path).unwrap().table.len(), 2);

    for bad in ["5 2\ndog 1 0\n", "dog 1 0\ncat 1\n", "dog 1 x\n", ""] {
        fs::write(&path, bad).unwrap();
        assert!(matches!(store::read_word_vectors(&path).unwrap_err(), Error::Format { .. }), "{bad:?}");
    }

    let table_rows = [("a", vec![0.5, 1.0]), ("b", vec![-2.0, 1e-9])];
    store::write_word_vectors(&path, 2, table_rows.iter().map(|(w, v)| (*w, v.as_slice()))).unwrap();
    let wv = store::read_word_vectors(&path).unwrap();
    assert_eq!(wv.table.get("b"), Some(&[-2.0, 1e-9][..]));
}

#[test]
fn language_sizes_file() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("s.tsv");
    fs::write(&path, "# wiki articles\nen\t6000000\nde\t2500000.5\n").unwrap();
    let sizes = store::read_language_sizes(&path).unwrap();
    assert_eq!(sizes["de"], 2500000.5);
    fs::write(&path, "en\t1\nen\t2\n").unwrap();
    assert!(store::read_language_sizes(&path).is_err());
}
