use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lingsub_core::classifier::{majority_rate, TrainConfig};
use lingsub_core::error::Error as CoreError;
use lingsub_core::inlp::{run_inlp, InlpConfig, ProjectionPair, Space};
use lingsub_core::intervention::{english_proportion, predict_topk, semantic_coherence, train_english_classifier, Projections, Variant};
use lingsub_core::langvec::{all_pairs_matrix, build_language_vectors, translate_pair, LanguageVectorTable};
use lingsub_core::linalg::pca_2d;
use lingsub_core::metrics::{confusion_matrix, evaluate_with, kmeans_vmeasure, spearman, top_k_accuracy_by_label, EvalOptions, KMeansConfig, VMeasure};
use lingsub_core::repr::{Layer, Method, RankingRecord, RepresentationSet};
use lingsub_core::synth::{emit_dataset, generate_world, PlantedConfig, PlantedWorld};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::manifest::RunManifest;
use crate::report;
use crate::store;

/// Thread count for parallel subcommands; unset means one per core.
pub const THREADS_ENV: &str = "LINGSUB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "lingsub", version, about = "Language-identity subspaces in multilingual representations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted-subspace world as standard bundles.
    SynthGen(SynthGenArgs),
    /// Fit nullspace and rowspace projections on a representation set.
    InlpFit(InlpFitArgs),
    /// Apply a fitted projection to a representation set.
    Project(ProjectArgs),
    /// Average each language's rows into a language vector.
    Langvec(LangvecArgs),
    /// Rank translation candidates for every lexicon entry.
    Translate(TranslateArgs),
    /// Score a ranking dump against a lexicon.
    Eval(EvalArgs),
    /// V-measure of K-means clusters against language labels.
    ClusterEval(ClusterEvalArgs),
    /// Masked-prediction interventions with projected embeddings or states.
    Intervene(IntervenArgs),
    /// Confusion matrix of language-prediction rankings.
    Confusion(ConfusionArgs),
    /// Render report JSON files as aligned text tables.
    Report(ReportArgs),
    /// Two-dimensional PCA coordinates for external plotting.
    Plotdata(PlotdataArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    None,
    Embed,
    Repr,
    Both,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::None => Variant::None,
            VariantArg::Embed => Variant::InlpEmbed,
            VariantArg::Repr => Variant::InlpRepr,
            VariantArg::Both => Variant::InlpBoth,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpaceArg {
    Nullspace,
    Rowspace,
}

impl From<SpaceArg> for Space {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::Nullspace => Space::Nullspace,
            SpaceArg::Rowspace => Space::Rowspace,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Analogy,
    Baseline,
}

#[derive(Debug, Args)]
pub struct SynthGenArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub d: usize,
    #[arg(long, default_value_t = 5)]
    pub lang_dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "en,de,fr,ru,fi")]
    pub languages: Vec<String>,
    /// Words per language.
    #[arg(long, default_value_t = 200)]
    pub vocab_size: usize,
    /// Sample rows per language in each emitted set.
    #[arg(long, default_value_t = 400)]
    pub n_per_language: usize,
    /// Noise scale relative to the language-vector norm.
    #[arg(long, default_value_t = 0.1)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lang_norm: f64,
    #[arg(long, default_value_t = 1.5)]
    pub lex_norm: f64,
    #[arg(long, default_value_t = 1)]
    pub concept_size: usize,
    #[arg(long, default_value_t = 0.0)]
    pub concept_cohesion: f64,
    /// Language whose words are written to the English wordlist.
    #[arg(long, default_value = "en")]
    pub english: String,
}

#[derive(Debug, Args)]
pub struct InlpFitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    #[arg(long, default_value_t = 0.2)]
    pub dev_fraction: f64,
    /// Stop once held-out accuracy is within this margin of the majority rate.
    #[arg(long, default_value_t = 0.02)]
    pub stop_margin: f64,
    /// Run every iteration regardless of held-out accuracy.
    #[arg(long)]
    pub no_early_stop: bool,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub projection: PathBuf,
    #[arg(long, value_enum, default_value_t = SpaceArg::Nullspace)]
    pub space: SpaceArg,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct LangvecArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    /// Output-embedding `.vocab/` bundle.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    /// `.langvec/` bundle; required by the analogy method.
    #[arg(long)]
    pub langvec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Analogy)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
    /// Target languages to keep; all when empty.
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    #[arg(long, default_value = "en")]
    pub source_language: String,
    /// Also write the accuracy heatmap over all ordered language pairs.
    #[arg(long)]
    pub all_pairs: bool,
    /// Cut-off for heatmap cells.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ranking dump TSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Baseline ranking dump for the hard-win rate.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub min_pos_count: usize,
    /// Candidate universe size; misses get rank universe + 1.
    #[arg(long)]
    pub universe: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    #[arg(long, default_value = "en")]
    pub source_language: String,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterEvalArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// When given, the nullspace and rowspace projections are scored too.
    #[arg(long)]
    pub projection: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct IntervenArgs {
    /// Hidden states (`.reprset/`, mlm_head_output layer).
    #[arg(long)]
    pub input: PathBuf,
    /// Output-embedding `.vocab/` bundle.
    #[arg(long)]
    pub vocab: PathBuf,
    /// Projection used for both embeddings and states unless overridden.
    #[arg(long)]
    pub projection: Option<PathBuf>,
    #[arg(long)]
    pub embed_projection: Option<PathBuf>,
    #[arg(long)]
    pub repr_projection: Option<PathBuf>,
    /// Variants to run; all four when omitted.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub variant: Vec<VariantArg>,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20,50")]
    pub ks: Vec<usize>,
    /// Words treated as English when training the English classifier.
    #[arg(long)]
    pub english_words: PathBuf,
    /// Cross-lingual word vectors for semantic coherence.
    #[arg(long)]
    pub crossling: Option<PathBuf>,
    /// Hidden-state languages to keep; all when empty.
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    /// Use at most this many rows, taken in file order.
    #[arg(long, default_value_t = 6000)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write each variant's predictions as a ranking dump.
    #[arg(long)]
    pub dump: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfusionArgs {
    /// Language-prediction ranking dump: target is the true language,
    /// candidates are predicted languages.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub sqrt: bool,
    #[arg(long, value_delimiter = ',')]
    pub drop: Vec<String>,
    /// `language ⟨TAB⟩ size` file for the accuracy/size correlation.
    #[arg(long)]
    pub sizes: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    pub ks: Vec<usize>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files written by other subcommands.
    #[arg(long, num_args = 1.., required = true)]
    pub input: Vec<PathBuf>,
    /// Row names for a method comparison, one per input.
    #[arg(long, value_delimiter = ',')]
    pub names: Vec<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotdataArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub projection: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SpaceArg::Nullspace)]
    pub space: SpaceArg,
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    /// Also write the (projected) vectors for an external projector.
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub output: PathBuf,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match configure_threads().and_then(|_| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                if !e.to_string().ends_with(&s.to_string()) {
                    eprintln!("  caused by: {s}");
                }
                source = s.source();
            }
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("{THREADS_ENV} must be a non-negative integer, got {value:?}")))?;
    // The global pool can only be set once per process; later calls keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::SynthGen(a) => synth_gen(&a),
        Command::InlpFit(a) => inlp_fit(&a),
        Command::Project(a) => project(&a),
        Command::Langvec(a) => langvec(&a),
        Command::Translate(a) => translate(&a),
        Command::Eval(a) => eval(&a),
        Command::ClusterEval(a) => cluster_eval(&a),
        Command::Intervene(a) => intervene(&a),
        Command::Confusion(a) => confusion(&a),
        Command::Report(a) => report_cmd(&a),
        Command::Plotdata(a) => plotdata(&a),
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";

/// Creates the output directory after checking it does not overlap an input.
fn prepare_output(output: &Path, inputs: &[&Path]) -> Result<()> {
    let out = absolute(output);
    for input in inputs {
        let inp = absolute(input);
        if out.starts_with(&inp) || inp.starts_with(&out) {
            return Err(Error::Usage(format!(
                "output {} overlaps input {}; inputs are never modified",
                output.display(),
                input.display()
            )));
        }
    }
    store::create_dir(output)
}

fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf()))
}

fn finish(output: &Path, manifest: &RunManifest) -> Result<()> {
    store::write_json(&output.join(MANIFEST_FILE), manifest)
}

fn manifest_json(m: &RunManifest) -> Value {
    serde_json::to_value(m).expect("manifest always encodes")
}

fn write_report(output: &Path, report: &Value) -> Result<String> {
    store::write_json(&output.join(REPORT_JSON), report)?;
    let text = report::render(report)?;
    store::write_text(&output.join(REPORT_TXT), &text)?;
    Ok(text)
}

/// Counter-derived seed for the `stream`-th random consumer of one run.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Keeps only rows whose language is listed; the inventory shrinks to
/// the listed languages, in their original order.
pub fn select_languages(set: RepresentationSet, languages: &[String]) -> Result<RepresentationSet> {
    if languages.is_empty() {
        return Ok(set);
    }
    let inventory: BTreeSet<&str> = set.languages().iter().map(String::as_str).collect();
    if let Some(l) = languages.iter().find(|l| !inventory.contains(l.as_str())) {
        return Err(CoreError::UnknownLanguage(l.clone()).into());
    }
    let keep: BTreeSet<&str> = languages.iter().map(String::as_str).collect();
    let rows: Vec<usize> = (0..set.n()).filter(|&i| keep.contains(set.labels()[i].language.as_str())).collect();
    take_rows(&set, &rows, set.languages().iter().filter(|l| keep.contains(l.as_str())).cloned().collect())
}

fn take_rows(set: &RepresentationSet, rows: &[usize], languages: Vec<String>) -> Result<RepresentationSet> {
    let vectors = rows.iter().flat_map(|&i| set.row(i).iter().copied()).collect();
    let labels = rows.iter().map(|&i| set.labels()[i].clone()).collect();
    Ok(RepresentationSet::new(set.d(), vectors, labels, set.layer(), languages)?)
}

fn read_set(path: &Path, languages: &[String]) -> Result<RepresentationSet> {
    select_languages(store::read_representation_set(path)?, languages)
}

pub const SAMPLES: &str = "samples.reprset";
pub const HIDDEN: &str = "hidden.reprset";
pub const VOCAB: &str = "vocab.vocab";
pub const LEXICON: &str = "lexicon.tsv";
pub const ENGLISH_WORDS: &str = "english.txt";
pub const CROSSLING: &str = "crossling.vec";
pub const PLANTED_LANGVEC: &str = "planted.langvec";
pub const PROJECTION: &str = "projection.proj";
pub const PROJECTED: &str = "projected.reprset";
pub const LANGVEC: &str = "language_vectors.langvec";
pub const RANKINGS: &str = "rankings.tsv";
pub const HEATMAP: &str = "heatmap.csv";
pub const HEATMAP_COUNTS: &str = "heatmap_counts.csv";
pub const CONFUSION_CSV: &str = "confusion.csv";
pub const ENGLISH_CSV: &str = "english.csv";
pub const COHERENCE_CSV: &str = "coherence.csv";
pub const PLOT_CSV: &str = "plot.csv";
pub const VECTORS_CSV: &str = "vectors.csv";

fn synth_gen(a: &SynthGenArgs) -> Result<()> {
    prepare_output(&a.output, &[])?;
    let mut cfg = PlantedConfig::new(a.d, a.lang_dim, a.languages.clone(), a.vocab_size, a.noise_sigma, a.seed);
    cfg.lang_norm = a.lang_norm;
    cfg.lex_norm = a.lex_norm;
    cfg.concept_size = a.concept_size;
    cfg.concept_cohesion = a.concept_cohesion;
    let world = generate_world(&cfg)?;
    let (samples_seed, hidden_seed) = (derive_seed(a.seed, 1), derive_seed(a.seed, 2));
    let (samples, vocab, lexicon) = emit_dataset(&world, a.n_per_language, a.noise_sigma, samples_seed)?;
    let hidden = emit_dataset(&world, a.n_per_language, a.noise_sigma, hidden_seed)?
        .0
        .with_layer(Layer::MlmHeadOutput);
    let config = json!({
        "d": a.d,
        "lang_dim": a.lang_dim,
        "languages": a.languages,
        "vocab_size": a.vocab_size,
        "n_per_language": a.n_per_language,
        "noise_sigma": a.noise_sigma,
        "lang_norm": a.lang_norm,
        "lex_norm": a.lex_norm,
        "concept_size": a.concept_size,
        "concept_cohesion": a.concept_cohesion,
        "english": a.english,
    });
    let manifest = RunManifest::new(
        "synth-gen",
        &[],
        &[("world", a.seed), ("samples", samples_seed), ("hidden", hidden_seed)],
        config,
    );
    let out = &a.output;
    store::write_representation_set(&samples, &out.join(SAMPLES), Some(&manifest))?;
    store::write_representation_set(&hidden, &out.join(HIDDEN), Some(&manifest))?;
    store::write_vocab(&vocab, &out.join(VOCAB), Some(&manifest))?;
    store::write_lexicon(&lexicon, &out.join(LEXICON))?;
    let planted = LanguageVectorTable {
        vectors: world.lang_vectors.clone(),
        sample_count: world.lang_vectors.keys().map(|l| (l.clone(), 0)).collect(),
    };
    store::write_language_vectors(&planted, &out.join(PLANTED_LANGVEC), Some(&manifest))?;
    if a.languages.contains(&a.english) {
        store::write_lines(
            &out.join(ENGLISH_WORDS),
            (0..a.vocab_size).map(|w| PlantedWorld::token(w, &a.english)),
        )?;
    }
    let tokens: Vec<(String, usize)> = a
        .languages
        .iter()
        .flat_map(|l| (0..a.vocab_size).map(move |w| (PlantedWorld::token(w, l), w)))
        .collect();
    store::write_word_vectors(
        &out.join(CROSSLING),
        a.d,
        tokens.iter().map(|(t, w)| (t.as_str(), world.lex_vectors[*w].as_slice())),
    )?;
    finish(out, &manifest)?;
    println!(
        "wrote {} sample rows, {} hidden rows, {} vocabulary rows, {} lexicon entries to {}",
        samples.n(),
        hidden.n(),
        vocab.len(),
        lexicon.len(),
        out.display()
    );
    Ok(())
}

fn inlp_fit(a: &InlpFitArgs) -> Result<()> {
    prepare_output(&a.output, &[&a.input])?;
    let set = read_set(&a.input, &a.languages)?;
    let config = InlpConfig {
        iterations: a.iterations,
        dev_fraction: a.dev_fraction,
        stop_margin: if a.no_early_stop { None } else { Some(a.stop_margin) },
        seed: a.seed,
        train: TrainConfig {
            seed: a.seed,
            ..TrainConfig::default()
        },
    };
    let pair = run_inlp(&set, &config)?;
    let manifest = RunManifest::new(
        "inlp-fit",
        &[&a.input],
        &[("seed", a.seed)],
        json!({
            "iterations": a.iterations,
            "languages": a.languages,
            "dev_fraction": a.dev_fraction,
            "stop_margin": config.stop_margin,
        }),
    );
    store::write_projection(&pair, &a.output.join(PROJECTION), Some(&manifest))?;
    let x = set.to_matrix();
    let (_, y) = set.class_indices();
    let report = json!({
        "kind": report::KIND_INLP,
        "manifest": manifest_json(&manifest),
        "d": pair.d(),
        "status": pair.status().as_str(),
        "classifier_count": pair.classifiers().len(),
        "nullspace_rank": pair.nullspace_rank(),
        "dev_accuracy": pair.dev_accuracy(),
        "majority": majority_rate(&y),
        "guarantee_residual": pair.guarantee_residual(&x)?,
    });
    print!("{}", write_report(&a.output, &report)?);
    finish(&a.output, &manifest)
}

fn project(a: &ProjectArgs) -> Result<()> {
    prepare_output(&a.output, &[&a.input, &a.projection])?;
    let set = store::read_representation_set(&a.input)?;
    let pair = store::read_projection(&a.projection)?;
    let projected = pair.project_set(a.space.into(), &set)?;
    let space = match a.space {
        SpaceArg::Nullspace => "nullspace",
        SpaceArg::Rowspace => "rowspace",
    };
    let manifest = RunManifest::new("project", &[&a.input, &a.projection], &[], json!({ "space": space }));
    store::write_representation_set(&projected, &a.output.join(PROJECTED), Some(&manifest))?;
    finish(&a.output, &manifest)
}

fn langvec(a: &LangvecArgs) -> Result<()> {
    prepare_output(&a.output, &[&a.input])?;
    let set = read_set(&a.input, &a.languages)?;
    let table = build_language_vectors(&set)?;
    let manifest = RunManifest::new("langvec", &[&a.input], &[], json!({ "languages": a.languages }));
    store::write_language_vectors(&table, &a.output.join(LANGVEC), Some(&manifest))?;
    let rows: Vec<Vec<String>> = table
        .languages()
        .iter()
        .map(|l| {
            vec![
                l.clone(),
                table.sample_count[l].to_string(),
                format!("{:.4}", lingsub_core::linalg::norm(&table.vectors[l])),
            ]
        })
        .collect();
    print!("{}", report::aligned_table(&["language".into(), "rows".into(), "norm".into()], &rows));
    finish(&a.output, &manifest)
}

fn translate(a: &TranslateArgs) -> Result<()> {
    let mut inputs: Vec<&Path> = vec![&a.input, &a.lexicon];
    if let Some(p) = &a.langvec {
        inputs.push(p);
    }
    prepare_output(&a.output, &inputs)?;
    if a.topk == 0 {
        return Err(Error::Usage("--topk must be at least 1".into()));
    }
    let vocab = store::read_vocab(&a.input)?;
    let lexicon = store::read_lexicon(&a.lexicon, &a.source_language)?;
    let table = a.langvec.as_deref().map(store::read_language_vectors).transpose()?;
    let method = match a.method {
        MethodArg::Analogy => Method::Analogy,
        MethodArg::Baseline => Method::Baseline,
    };
    if method == Method::Analogy && table.is_none() {
        return Err(Error::Usage("the analogy method needs --langvec".into()));
    }
    let keep: BTreeSet<&str> = a.languages.iter().map(String::as_str).collect();
    let mut usable = lexicon.filter_single_token(&vocab);
    usable.entries.retain(|e| keep.is_empty() || keep.contains(e.language.as_str()));
    let records: Vec<RankingRecord> = usable
        .entries
        .par_iter()
        .map(|e| translate_pair(&e.source, &usable.source_language, &e.target, &e.language, table.as_ref(), &vocab, method, a.topk))
        .collect::<std::result::Result<_, _>>()?;
    let manifest = RunManifest::new(
        "translate",
        &inputs,
        &[],
        json!({
            "method": method.as_str(),
            "topk": a.topk,
            "languages": a.languages,
            "source_language": usable.source_language,
            "all_pairs": a.all_pairs,
            "k": a.k,
            "lexicon_entries": lexicon.len(),
            "single_token_entries": usable.len(),
        }),
    );
    store::write_rankings(&records, a.topk, &a.output.join(RANKINGS))?;
    println!(
        "{} of {} lexicon entries are single-token; wrote {} rankings",
        usable.len(),
        lexicon.len(),
        records.len()
    );
    if a.all_pairs {
        let table = table
            .as_ref()
            .ok_or_else(|| Error::Usage("--all-pairs needs --langvec".into()))?;
        let matrix = all_pairs_matrix(&lexicon, table, &vocab, a.k)?;
        report::heatmap_csv(&a.output.join(HEATMAP), &matrix)?;
        report::heatmap_counts_csv(&a.output.join(HEATMAP_COUNTS), &matrix)?;
    }
    finish(&a.output, &manifest)
}

fn eval(a: &EvalArgs) -> Result<()> {
    let mut inputs: Vec<&Path> = vec![&a.input, &a.lexicon];
    if let Some(p) = &a.baseline {
        inputs.push(p);
    }
    prepare_output(&a.output, &inputs)?;
    let keep: BTreeSet<&str> = a.languages.iter().map(String::as_str).collect();
    let select = |mut records: Vec<RankingRecord>| {
        records.retain(|r| keep.is_empty() || keep.contains(r.language.as_str()));
        records
    };
    let (_, records) = store::read_rankings(&a.input)?;
    let records = select(records);
    let baseline = a
        .baseline
        .as_deref()
        .map(|p| store::read_rankings(p).map(|(_, r)| select(r)))
        .transpose()?;
    let lexicon = store::read_lexicon(&a.lexicon, &a.source_language)?;
    let options = EvalOptions {
        ks: a.ks.clone(),
        universe: a.universe,
        min_pos_count: a.min_pos_count,
    };
    let result = evaluate_with(&records, &lexicon, baseline.as_deref(), &options)?;
    let manifest = RunManifest::new(
        "eval",
        &inputs,
        &[],
        json!({
            "ks": a.ks,
            "min_pos_count": a.min_pos_count,
            "universe": a.universe,
            "languages": a.languages,
        }),
    );
    let report = report::translation_json(&result, &a.ks, manifest_json(&manifest));
    print!("{}", write_report(&a.output, &report)?);
    finish(&a.output, &manifest)
}

fn vmeasure_json(v: &VMeasure) -> Value {
    json!({ "v": v.v, "homogeneity": v.homogeneity, "completeness": v.completeness })
}

fn cluster_eval(a: &ClusterEvalArgs) -> Result<()> {
    let mut inputs: Vec<&Path> = vec![&a.input];
    if let Some(p) = &a.projection {
        inputs.push(p);
    }
    prepare_output(&a.output, &inputs)?;
    let set = read_set(&a.input, &a.languages)?;
    let labels: Vec<&str> = set.labels().iter().map(|l| l.language.as_str()).collect();
    let cfg = KMeansConfig {
        restarts: a.restarts,
        seed: a.seed,
        ..KMeansConfig::default()
    };
    let x = set.to_matrix();
    let mut spaces = Map::new();
    spaces.insert("original".into(), vmeasure_json(&kmeans_vmeasure(&x, &labels, &cfg)?));
    if let Some(p) = &a.projection {
        let pair = store::read_projection(p)?;
        for (name, space) in [("nullspace", Space::Nullspace), ("rowspace", Space::Rowspace)] {
            let projected = pair.apply(space, &x)?;
            spaces.insert(name.into(), vmeasure_json(&kmeans_vmeasure(&projected, &labels, &cfg)?));
        }
    }
    let manifest = RunManifest::new(
        "cluster-eval",
        &inputs,
        &[("seed", a.seed)],
        json!({ "restarts": a.restarts, "languages": a.languages }),
    );
    let report = json!({
        "kind": report::KIND_CLUSTER,
        "manifest": manifest_json(&manifest),
        "clusters": set.languages().len(),
        "rows": set.n(),
        "spaces": spaces,
    });
    print!("{}", write_report(&a.output, &report)?);
    finish(&a.output, &manifest)
}

fn intervene(a: &IntervenArgs) -> Result<()> {
    let mut inputs: Vec<&Path> = vec![&a.input, &a.vocab, &a.english_words];
    for p in [&a.projection, &a.embed_projection, &a.repr_projection, &a.crossling].into_iter().flatten() {
        inputs.push(p);
    }
    prepare_output(&a.output, &inputs)?;
    if a.ks.is_empty() || a.ks.contains(&0) {
        return Err(Error::Usage("--ks must list positive cut-offs".into()));
    }
    let top_k = *a.ks.iter().max().expect("non-empty");
    let variants: Vec<Variant> = if a.variant.is_empty() {
        Variant::ALL.to_vec()
    } else {
        a.variant.iter().map(|&v| v.into()).collect()
    };

    let set = read_set(&a.input, &a.languages)?;
    let n = set.n().min(a.instances);
    let vocab = store::read_vocab(&a.vocab)?;
    let shared = a.projection.as_deref().map(store::read_projection).transpose()?;
    let embed = a.embed_projection.as_deref().map(store::read_projection).transpose()?.or_else(|| shared.clone());
    let repr = a.repr_projection.as_deref().map(store::read_projection).transpose()?.or(shared);
    for v in &variants {
        if v.projects_embeddings() && embed.is_none() {
            return Err(Error::Usage(format!("variant {v} needs --embed-projection or --projection")));
        }
        if v.projects_representations() && repr.is_none() {
            return Err(Error::Usage(format!("variant {v} needs --repr-projection or --projection")));
        }
    }
    let embed = embed.unwrap_or_else(|| ProjectionPair::identity(vocab.d(), Layer::Embedding));
    let repr = repr.unwrap_or_else(|| ProjectionPair::identity(set.d(), set.layer()));
    let projections = Projections {
        embed: &embed,
        repr: &repr,
    };

    let english_words = store::read_wordlist(&a.english_words)?;
    let classifier = train_english_classifier(
        &vocab,
        &english_words,
        &TrainConfig {
            seed: a.seed,
            ..TrainConfig::default()
        },
    )?;
    let crossling = a.crossling.as_deref().map(store::read_word_vectors).transpose()?;
    let originals: Vec<&str> = set.labels()[..n].iter().map(|l| l.token.as_str()).collect();

    let mut variants_json = Map::new();
    let mut english_rows = BTreeMap::new();
    let mut coherence_rows = BTreeMap::new();
    for &variant in &variants {
        let records: Vec<RankingRecord> = (0..n)
            .into_par_iter()
            .map(|i| {
                let h: Vec<f64> = set.row(i).iter().map(|&v| f64::from(v)).collect();
                let mut r = predict_topk(&h, set.layer(), &vocab, &projections, variant, top_k)?;
                r.target = set.labels()[i].token.clone();
                r.language = set.labels()[i].language.clone();
                Ok(r)
            })
            .collect::<lingsub_core::error::Result<_>>()?;
        let english = english_proportion(&records, &classifier, &vocab, &a.ks)?;
        let name = variant.as_str().to_string();
        for (&k, &p) in &english {
            english_rows.insert((name.clone(), k), vec![p.to_string()]);
        }
        let coherence = match &crossling {
            Some(wv) => {
                let mut per_k = Map::new();
                for &k in &a.ks {
                    let c = semantic_coherence(&records, &originals, &wv.table, k)?;
                    coherence_rows.insert(
                        (name.clone(), k),
                        vec![c.mean.to_string(), c.covered.to_string(), c.skipped.to_string(), c.coverage().to_string()],
                    );
                    per_k.insert(
                        k.to_string(),
                        json!({ "mean": c.mean, "covered": c.covered, "skipped": c.skipped, "coverage": c.coverage() }),
                    );
                }
                Value::Object(per_k)
            }
            None => Value::Null,
        };
        let english: Map<String, Value> = english.iter().map(|(k, p)| (k.to_string(), json!(p))).collect();
        variants_json.insert(name.clone(), json!({ "english": english, "coherence": coherence }));
        if a.dump {
            store::write_rankings(&records, top_k, &a.output.join(format!("predictions_{name}.tsv")))?;
        }
    }

    let manifest = RunManifest::new(
        "intervene",
        &inputs,
        &[("seed", a.seed)],
        json!({
            "variants": variants.iter().map(|v| v.as_str()).collect::<Vec<_>>(),
            "ks": a.ks,
            "languages": a.languages,
            "instances": a.instances,
            "hidden_layer": set.layer().as_str(),
            "english_words": english_words.len(),
        }),
    );
    report::variant_k_csv(&a.output.join(ENGLISH_CSV), &["english_proportion"], &english_rows)?;
    if crossling.is_some() {
        report::variant_k_csv(&a.output.join(COHERENCE_CSV), &["mean", "covered", "skipped", "coverage"], &coherence_rows)?;
    }
    let report = json!({
        "kind": report::KIND_INTERVENTION,
        "manifest": manifest_json(&manifest),
        "ks": a.ks,
        "instances": n,
        "duplicate_word_vectors": crossling.as_ref().map(|w| w.duplicates),
        "variants": variants_json,
    });
    print!("{}", write_report(&a.output, &report)?);
    finish(&a.output, &manifest)
}

fn confusion(a: &ConfusionArgs) -> Result<()> {
    let mut inputs: Vec<&Path> = vec![&a.input];
    if let Some(p) = &a.sizes {
        inputs.push(p);
    }
    prepare_output(&a.output, &inputs)?;
    let (_, records) = store::read_rankings(&a.input)?;
    let predictions: Vec<(&str, &str)> = records
        .iter()
        .filter_map(|r| r.candidates.first().map(|c| (r.target.as_str(), c.token.as_str())))
        .collect();
    let unanswered = records.len() - predictions.len();
    let drop: Vec<&str> = a.drop.iter().map(String::as_str).collect();
    let matrix = confusion_matrix(&predictions, a.sqrt, &drop);
    let answered: Vec<RankingRecord> = records.iter().filter(|r| !r.candidates.is_empty()).cloned().collect();
    let top_k = top_k_accuracy_by_label(&answered, &a.ks);

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (t, p) in &predictions {
        if !drop.contains(t) && !drop.contains(p) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let languages: Vec<Value> = matrix
        .languages
        .iter()
        .zip(&matrix.accuracy)
        .map(|(l, acc)| {
            let topk: Map<String, Value> = top_k
                .get(l)
                .map(|m| m.iter().map(|(k, v)| (k.to_string(), json!(v))).collect())
                .unwrap_or_default();
            json!({
                "language": l,
                "n": counts.get(l.as_str()).copied().unwrap_or(0),
                "accuracy": acc,
                "top_k": topk,
            })
        })
        .collect();

    let mut spearman_value = Value::Null;
    let mut spearman_error = Value::Null;
    if let Some(p) = &a.sizes {
        let sizes = store::read_language_sizes(p)?;
        let (acc, size): (Vec<f64>, Vec<f64>) = matrix
            .languages
            .iter()
            .zip(&matrix.accuracy)
            .filter(|(l, _)| counts.get(l.as_str()).is_some_and(|&c| c > 0))
            .filter_map(|(l, &acc)| sizes.get(l).map(|&s| (acc, s)))
            .unzip();
        match spearman(&acc, &size) {
            Ok(rho) => spearman_value = json!(rho),
            Err(e) => spearman_error = json!(e.to_string()),
        }
    }

    let manifest = RunManifest::new(
        "confusion",
        &inputs,
        &[],
        json!({ "sqrt": a.sqrt, "drop": a.drop, "ks": a.ks }),
    );
    report::confusion_csv(&a.output.join(CONFUSION_CSV), &matrix)?;
    let report = json!({
        "kind": report::KIND_CONFUSION,
        "manifest": manifest_json(&manifest),
        "sqrt_scaled": matrix.sqrt_scaled,
        "dropped": a.drop,
        "unanswered": unanswered,
        "ks": a.ks,
        "languages": languages,
        "spearman": spearman_value,
        "spearman_error": spearman_error,
    });
    print!("{}", write_report(&a.output, &report)?);
    finish(&a.output, &manifest)
}

fn report_cmd(a: &ReportArgs) -> Result<()> {
    if !a.names.is_empty() && a.names.len() != a.input.len() {
        return Err(Error::Usage(format!("{} names for {} inputs", a.names.len(), a.input.len())));
    }
    let inputs: Vec<&Path> = a.input.iter().map(PathBuf::as_path).collect();
    if let Some(out) = &a.output {
        prepare_output(out, &inputs)?;
    }
    let mut reports = Vec::with_capacity(a.input.len());
    for (i, path) in a.input.iter().enumerate() {
        let value: Value = store::read_json(path, "report")?;
        if value["kind"].as_str().is_none() {
            return Err(Error::format(path, "report", "missing \"kind\""));
        }
        let name = a.names.get(i).cloned().unwrap_or_else(|| {
            let p = path.parent().filter(|_| path.file_name().is_some_and(|f| f == REPORT_JSON)).unwrap_or(path);
            p.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
        });
        reports.push((name, value));
    }
    let all_translation = reports.iter().all(|(_, r)| r["kind"] == report::KIND_TRANSLATION);
    let text = if all_translation && reports.len() > 1 {
        report::translation_comparison(&reports)
    } else {
        let mut text = String::new();
        for (i, (name, r)) in reports.iter().enumerate() {
            if i > 0 {
                text.push('\n');
            }
            if reports.len() > 1 {
                text.push_str(&format!("== {name}\n"));
            }
            text.push_str(&report::render(r)?);
        }
        text
    };
    print!("{text}");
    if let Some(out) = &a.output {
        let manifest = RunManifest::new("report", &inputs, &[], json!({ "names": a.names }));
        store::write_text(&out.join(REPORT_TXT), &text)?;
        finish(out, &manifest)?;
    }
    Ok(())
}

fn plotdata(a: &PlotdataArgs) -> Result<()> {
    let mut inputs: Vec<&Path> = vec![&a.input];
    if let Some(p) = &a.projection {
        inputs.push(p);
    }
    prepare_output(&a.output, &inputs)?;
    let set = read_set(&a.input, &a.languages)?;
    let mut x = set.to_matrix();
    let mut space = Value::Null;
    if let Some(p) = &a.projection {
        let pair = store::read_projection(p)?;
        x = pair.apply(a.space.into(), &x)?;
        space = json!(match a.space {
            SpaceArg::Nullspace => "nullspace",
            SpaceArg::Rowspace => "rowspace",
        });
    }
    let coords = pca_2d(&x)?;
    let labels: Vec<(String, String)> = set.labels().iter().map(|l| (l.language.clone(), l.token.clone())).collect();
    report::points_csv(&a.output.join(PLOT_CSV), &coords, &labels)?;
    if a.raw {
        report::vectors_csv(&a.output.join(VECTORS_CSV), &x, &labels)?;
    }
    let manifest = RunManifest::new(
        "plotdata",
        &inputs,
        &[],
        json!({ "space": space, "languages": a.languages, "raw": a.raw }),
    );
    finish(&a.output, &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        let s: BTreeSet<u64> = (0..8).map(|k| derive_seed(7, k)).collect();
        assert_eq!(s.len(), 8);
        assert_eq!(derive_seed(7, 0), 7);
    }

    #[test]
    fn variant_flags_map_to_core_variants() {
        assert_eq!(Variant::from(VariantArg::Embed), Variant::InlpEmbed);
        assert_eq!(Variant::from(VariantArg::Both), Variant::InlpBoth);
    }
}
