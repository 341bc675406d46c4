//! accuracy@k, average rank, average log-rank and hard-win over ranked
//! translation candidates.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::repr::{normalize_token, Lexicon, RankingRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub n: usize,
    pub acc_at: BTreeMap<usize, f64>,
    pub avg_rank: f64,
    /// Mean natural log of the rank.
    pub avg_log_rank: f64,
    /// Share of pairs ranked strictly better than by the baseline.
    pub hard_win: Option<f64>,
    /// Pairs whose target was absent from the candidate list.
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosGroup {
    pub summary: EvalSummary,
    /// Fewer records than the configured minimum.
    pub low_support: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationEvalReport {
    pub overall: EvalSummary,
    pub per_pos: BTreeMap<String, PosGroup>,
    pub per_language: BTreeMap<String, EvalSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    /// Size of the candidate universe; a missing target gets rank
    /// `universe + 1`. Defaults to each record's candidate count.
    pub universe: Option<usize>,
    pub min_pos_count: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            ks: alloc::vec![1, 10, 100],
            universe: None,
            min_pos_count: 200,
        }
    }
}

/// Summary statistics of 1-based ranks. `missing` is left at zero.
pub fn summarize_ranks(ranks: &[usize], baseline: Option<&[usize]>, ks: &[usize]) -> EvalSummary {
    let n = ranks.len();
    let nf = n.max(1) as f64;
    let acc_at = ks
        .iter()
        .map(|&k| (k, ranks.iter().filter(|&&r| r <= k).count() as f64 / nf))
        .collect();
    let avg_rank = ranks.iter().map(|&r| r as f64).sum::<f64>() / nf;
    let avg_log_rank = ranks.iter().map(|&r| libm::log(r as f64)).sum::<f64>() / nf;
    let hard_win = baseline.map(|b| ranks.iter().zip(b).filter(|(m, b)| m < b).count() as f64 / nf);
    EvalSummary {
        n,
        acc_at,
        avg_rank,
        avg_log_rank,
        hard_win,
        missing: 0,
    }
}

struct Scored {
    pos: String,
    language: String,
    rank: usize,
    base_rank: Option<usize>,
    missing: bool,
}

type Key = (String, String, String);

fn key(source: &str, language: &str, target: &str) -> Key {
    (normalize_token(source), String::from(language), normalize_token(target))
}

fn rank_in(record: &RankingRecord, universe: Option<usize>) -> (usize, bool) {
    match record.rank_of(&record.target) {
        Some(r) => (r, false),
        None => (universe.unwrap_or(record.candidates.len()) + 1, true),
    }
}

fn score_records(
    records: &[RankingRecord],
    lexicon: &Lexicon,
    baseline: Option<&[RankingRecord]>,
    universe: Option<usize>,
) -> Result<Vec<Scored>> {
    let mut pos_of: BTreeMap<Key, &str> = BTreeMap::new();
    for e in &lexicon.entries {
        pos_of.entry(key(&e.source, &e.language, &e.target)).or_insert(&e.pos);
    }
    let base_ranks: Option<BTreeMap<Key, usize>> = baseline.map(|b| {
        b.iter()
            .map(|r| (key(&r.source, &r.language, &r.target), rank_in(r, universe).0))
            .collect()
    });
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let k = key(&r.source, &r.language, &r.target);
        let Some(pos) = pos_of.get(&k) else {
            return Err(Error::NoLexiconMatch {
                source_word: r.source.clone(),
                language: r.language.clone(),
                target: r.target.clone(),
            });
        };
        let base_rank = match &base_ranks {
            Some(b) => match b.get(&k) {
                Some(&br) => Some(br),
                None => {
                    return Err(Error::MissingBaseline {
                        source_word: r.source.clone(),
                        language: r.language.clone(),
                        target: r.target.clone(),
                    })
                }
            },
            None => None,
        };
        if !seen.insert(k) {
            return Err(Error::DuplicateRecord {
                source_word: r.source.clone(),
                language: r.language.clone(),
                target: r.target.clone(),
            });
        }
        let (rank, missing) = rank_in(r, universe);
        out.push(Scored {
            pos: String::from(*pos),
            language: r.language.clone(),
            rank,
            base_rank,
            missing,
        });
    }
    Ok(out)
}

fn summarize_group<'a>(items: impl Iterator<Item = &'a Scored>, ks: &[usize], with_baseline: bool) -> EvalSummary {
    let items: Vec<&Scored> = items.collect();
    let ranks: Vec<usize> = items.iter().map(|s| s.rank).collect();
    let base: Option<Vec<usize>> = with_baseline.then(|| items.iter().map(|s| s.base_rank.unwrap_or(usize::MAX)).collect());
    let mut summary = summarize_ranks(&ranks, base.as_deref(), ks);
    summary.missing = items.iter().filter(|s| s.missing).count();
    summary
}

fn group_by<'a, F: Fn(&Scored) -> &str>(scored: &'a [Scored], f: F) -> BTreeMap<String, Vec<&'a Scored>> {
    let mut groups: BTreeMap<String, Vec<&Scored>> = BTreeMap::new();
    for s in scored {
        groups.entry(String::from(f(s))).or_default().push(s);
    }
    groups
}

/// Evaluates ranking records against the lexicon with default options
/// apart from `ks`.
pub fn evaluate_rankings(
    records: &[RankingRecord],
    lexicon: &Lexicon,
    baseline: Option<&[RankingRecord]>,
    ks: &[usize],
) -> Result<TranslationEvalReport> {
    let options = EvalOptions {
        ks: ks.to_vec(),
        ..EvalOptions::default()
    };
    evaluate_with(records, lexicon, baseline, &options)
}

pub fn evaluate_with(
    records: &[RankingRecord],
    lexicon: &Lexicon,
    baseline: Option<&[RankingRecord]>,
    options: &EvalOptions,
) -> Result<TranslationEvalReport> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no ranking records to evaluate".into()));
    }
    let scored = score_records(records, lexicon, baseline, options.universe)?;
    let with_baseline = baseline.is_some();
    let overall = summarize_group(scored.iter(), &options.ks, with_baseline);
    let per_pos = pos_groups(&scored, &options.ks, with_baseline, options.min_pos_count);
    let per_language = group_by(&scored, |s| &s.language)
        .into_iter()
        .map(|(l, g)| (l, summarize_group(g.into_iter(), &options.ks, with_baseline)))
        .collect();
    Ok(TranslationEvalReport {
        overall,
        per_pos,
        per_language,
    })
}

fn pos_groups(scored: &[Scored], ks: &[usize], with_baseline: bool, min_count: usize) -> BTreeMap<String, PosGroup> {
    group_by(scored, |s| &s.pos)
        .into_iter()
        .map(|(p, g)| {
            let summary = summarize_group(g.into_iter(), ks, with_baseline);
            let low_support = summary.n < min_count;
            (p, PosGroup { summary, low_support })
        })
        .collect()
}

/// Evaluation grouped by part of speech; groups with fewer than
/// `min_count` records are flagged.
pub fn per_pos_report(
    records: &[RankingRecord],
    lexicon: &Lexicon,
    baseline: Option<&[RankingRecord]>,
    ks: &[usize],
    min_count: usize,
) -> Result<BTreeMap<String, PosGroup>> {
    let scored = score_records(records, lexicon, baseline, None)?;
    Ok(pos_groups(&scored, ks, baseline.is_some(), min_count))
}

/// Per-label accuracy@k where each record's `target` is the true label and
/// its candidates are predicted labels (e.g. language-name prediction).
pub fn top_k_accuracy_by_label(records: &[RankingRecord], ks: &[usize]) -> BTreeMap<String, BTreeMap<usize, f64>> {
    let mut ranks: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for r in records {
        let rank = r.rank_of(&r.target).unwrap_or(usize::MAX);
        ranks.entry(r.target.clone()).or_default().push(rank);
    }
    ranks
        .into_iter()
        .map(|(label, rs)| (label, summarize_ranks(&rs, None, ks).acc_at))
        .collect()
}
