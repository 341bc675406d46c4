//! Planted-subspace worlds: every vector is `lex(w) + lang(L) + noise`
//! with the language part confined to a known subspace and the lexical part
//! confined to its orthogonal complement.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{axpy, gram_schmidt, norm, Matrix};
use crate::repr::{Label, Layer, LexEntry, Lexicon, RepresentationSet, VocabEmbedding};

const POS_TAGS: [&str; 3] = ["N", "V", "A"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub d: usize,
    /// Dimension of the planted language subspace.
    pub lang_dim: usize,
    pub languages: Vec<String>,
    /// Words per language.
    pub vocab_size: usize,
    /// Noise magnitude relative to the language-vector norm: each coordinate
    /// gets Gaussian noise with standard deviation
    /// `noise_sigma · lang_norm / sqrt(d)`.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Norm of every language vector.
    pub lang_norm: f64,
    /// Norm of every lexical vector.
    pub lex_norm: f64,
    /// Words per semantic group; 1 means unrelated words.
    pub concept_size: usize,
    /// Squared cosine between a word and its group center.
    pub concept_cohesion: f64,
}

impl PlantedConfig {
    pub fn new(d: usize, lang_dim: usize, languages: Vec<String>, vocab_size: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            d,
            lang_dim,
            languages,
            vocab_size,
            noise_sigma,
            seed,
            lang_norm: 1.0,
            lex_norm: 1.5,
            concept_size: 1,
            concept_cohesion: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lang_dim == 0 || self.lang_dim >= self.d {
            return Err(Error::InvalidParameter(format!(
                "lang_dim must satisfy 1 <= lang_dim < d (got {} with d={})",
                self.lang_dim, self.d
            )));
        }
        if self.vocab_size < 2 {
            return Err(Error::InvalidParameter("vocab_size must be at least 2".into()));
        }
        if self.languages.len() < 2 {
            return Err(Error::InvalidParameter("need at least two languages".into()));
        }
        let mut sorted = self.languages.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.languages.len() {
            return Err(Error::InvalidParameter("language tags must be distinct".into()));
        }
        if !(self.noise_sigma >= 0.0) || !(self.lang_norm > 0.0) || !(self.lex_norm > 0.0) {
            return Err(Error::InvalidParameter("noise and norms must be non-negative / positive".into()));
        }
        if self.concept_size == 0 || !(0.0..=1.0).contains(&self.concept_cohesion) {
            return Err(Error::InvalidParameter("concept_size >= 1 and cohesion in [0, 1] required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedWorld {
    pub config: PlantedConfig,
    /// `lang_dim` orthonormal vectors spanning the language subspace.
    pub lang_basis: Vec<Vec<f64>>,
    pub lang_vectors: BTreeMap<String, Vec<f64>>,
    /// One vector per word id, orthogonal to the language subspace.
    pub lex_vectors: Vec<Vec<f64>>,
    pub lexicon: Lexicon,
}

impl PlantedWorld {
    /// Surface string for word `w` in `language`.
    pub fn token(word: usize, language: &str) -> String {
        format!("w{word}_{language}")
    }

    /// Orthonormal basis of the span of the centered language vectors: the
    /// part of the language subspace that actually separates languages.
    pub fn identity_basis(&self) -> Vec<Vec<f64>> {
        let l = self.lang_vectors.len() as f64;
        let mut mean = vec![0.0; self.config.d];
        for v in self.lang_vectors.values() {
            axpy(1.0 / l, v, &mut mean);
        }
        let centered: Vec<Vec<f64>> = self
            .lang_vectors
            .values()
            .map(|v| v.iter().zip(&mean).map(|(a, b)| a - b).collect())
            .collect();
        gram_schmidt(&centered, 1e-9 * self.config.lang_norm)
    }

    pub fn noise_std(&self, noise_sigma: f64) -> f64 {
        noise_sigma * self.config.lang_norm / libm::sqrt(self.config.d as f64)
    }

    /// Noise-free vector of word `w` in `language`.
    pub fn planted(&self, word: usize, language: &str) -> Option<Vec<f64>> {
        let lang = self.lang_vectors.get(language)?;
        let lex = self.lex_vectors.get(word)?;
        Some(lex.iter().zip(lang).map(|(a, b)| a + b).collect())
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Combines coefficient vector `c` with basis vectors.
fn combine(basis: &[Vec<f64>], c: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (b, &w) in basis.iter().zip(c) {
        axpy(w, b, &mut out);
    }
    out
}

/// Builds a world from `config`; identical configs give identical worlds.
///
/// Language vectors have equal norm. When there are at most
/// `lang_dim + 1` languages they form a regular simplex centered at the
/// origin; otherwise they are random directions in the subspace. Lexical
/// vectors have equal norm and come in antipodal pairs, so they average to
/// zero whenever `vocab_size` is even.
pub fn generate_world(config: &PlantedConfig) -> Result<PlantedWorld> {
    config.validate()?;
    let d = config.d;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut basis = Vec::new();
    while basis.len() < d {
        let draws: Vec<Vec<f64>> = (0..d).map(|_| gaussian_vec(&mut rng, d)).collect();
        basis = gram_schmidt(&draws, 1e-8);
    }
    let complement = basis.split_off(config.lang_dim);
    let lang_basis = basis;

    let n_lang = config.languages.len();
    let coeffs: Vec<Vec<f64>> = if n_lang - 1 <= config.lang_dim {
        let centered: Vec<Vec<f64>> = (0..n_lang)
            .map(|i| {
                (0..n_lang)
                    .map(|j| if i == j { 1.0 } else { 0.0 } - 1.0 / n_lang as f64)
                    .collect()
            })
            .collect();
        let axes = gram_schmidt(&centered[..n_lang - 1], 1e-12);
        centered
            .iter()
            .map(|v| {
                let c: Vec<f64> = axes.iter().map(|a| crate::linalg::dot(v, a)).collect();
                let scale = config.lang_norm / norm(&c);
                c.into_iter().map(|x| x * scale).collect()
            })
            .collect()
    } else {
        (0..n_lang)
            .map(|_| {
                unit(gaussian_vec(&mut rng, config.lang_dim))
                    .into_iter()
                    .map(|x| x * config.lang_norm)
                    .collect()
            })
            .collect()
    };
    let lang_vectors: BTreeMap<String, Vec<f64>> = config
        .languages
        .iter()
        .zip(&coeffs)
        .map(|(l, c)| (l.clone(), combine(&lang_basis, c, d)))
        .collect();

    let m = complement.len();
    let n_base = config.vocab_size.div_ceil(2);
    let mut base = Vec::with_capacity(n_base);
    let mut center = Vec::new();
    for i in 0..n_base {
        if i % config.concept_size == 0 {
            center = unit(gaussian_vec(&mut rng, m));
        }
        let own = unit(gaussian_vec(&mut rng, m));
        let a = libm::sqrt(config.concept_cohesion);
        let b = libm::sqrt(1.0 - config.concept_cohesion);
        let mixed: Vec<f64> = center.iter().zip(&own).map(|(c, o)| a * c + b * o).collect();
        let c = unit(mixed);
        base.push(combine(&complement, &c, d).into_iter().map(|x| x * config.lex_norm).collect::<Vec<f64>>());
    }
    let mut lex_vectors = Vec::with_capacity(config.vocab_size);
    for u in &base {
        if lex_vectors.len() < config.vocab_size {
            lex_vectors.push(u.clone());
        }
        if lex_vectors.len() < config.vocab_size {
            lex_vectors.push(u.iter().map(|x| -x).collect());
        }
    }

    let source_language = config.languages[0].clone();
    let mut entries = Vec::new();
    for w in 0..config.vocab_size {
        for lang in &config.languages[1..] {
            entries.push(LexEntry {
                source: PlantedWorld::token(w, &source_language),
                target: PlantedWorld::token(w, lang),
                language: lang.clone(),
                pos: POS_TAGS[w % POS_TAGS.len()].into(),
            });
        }
    }

    Ok(PlantedWorld {
        config: config.clone(),
        lang_basis,
        lang_vectors,
        lex_vectors,
        lexicon: Lexicon::new(source_language, entries),
    })
}

/// Samples `n_per_language` rows per language plus a vocabulary with one
/// row per (word, language), all as planted sum plus noise.
///
/// Sample rows cycle through the words in order, so each language sees the
/// same multiset of words when `n_per_language` is a multiple of the
/// vocabulary size. The set is tagged as embedding-layer data.
pub fn emit_dataset(
    world: &PlantedWorld,
    n_per_language: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(RepresentationSet, VocabEmbedding, Lexicon)> {
    if n_per_language == 0 {
        return Err(Error::InvalidParameter("n_per_language must be at least 1".into()));
    }
    let cfg = &world.config;
    let d = cfg.d;
    let std = world.noise_std(noise_sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = |word: usize, lang: &str, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut v = world.planted(word, lang).expect("word and language exist");
        if std > 0.0 {
            for x in v.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *x += std * z;
            }
        }
        v
    };

    let mut rows = Vec::with_capacity(n_per_language * cfg.languages.len());
    let mut labels = Vec::with_capacity(rows.capacity());
    for lang in &cfg.languages {
        for i in 0..n_per_language {
            let w = i % cfg.vocab_size;
            rows.push(noisy(w, lang, &mut rng));
            labels.push(Label {
                language: lang.clone(),
                token: PlantedWorld::token(w, lang),
                sentence_id: i as u64,
                position: 0,
            });
        }
    }
    let set = RepresentationSet::from_matrix(&Matrix::from_rows(&rows)?, labels, Layer::Embedding, cfg.languages.clone())?;

    let mut matrix = Vec::with_capacity(cfg.languages.len() * cfg.vocab_size * d);
    let mut vocab = Vec::new();
    for lang in &cfg.languages {
        for w in 0..cfg.vocab_size {
            matrix.extend(noisy(w, lang, &mut rng).into_iter().map(|x| x as f32));
            vocab.push(PlantedWorld::token(w, lang));
        }
    }
    let flags = vec![false; vocab.len()];
    let vocab = VocabEmbedding::new(d, matrix, vocab, None, flags)?;
    Ok((set, vocab, world.lexicon.clone()))
}
