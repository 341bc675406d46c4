//! JSON reports, aligned text tables and CSV outputs.

use std::collections::BTreeMap;
use std::path::Path;

use lingsub_core::langvec::AllPairsMatrix;
use lingsub_core::linalg::Matrix;
use lingsub_core::metrics::{ConfusionMatrix, EvalSummary, TranslationEvalReport};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

pub const KIND_TRANSLATION: &str = "translation_eval";
pub const KIND_CLUSTER: &str = "cluster_eval";
pub const KIND_INTERVENTION: &str = "intervention";
pub const KIND_CONFUSION: &str = "confusion";
pub const KIND_INLP: &str = "inlp_fit";

pub fn summary_json(s: &EvalSummary) -> Value {
    let acc: Map<String, Value> = s.acc_at.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    json!({
        "n": s.n,
        "acc_at": acc,
        "avg_rank": s.avg_rank,
        "avg_log_rank": s.avg_log_rank,
        "hard_win": s.hard_win,
        "missing": s.missing,
    })
}

pub fn translation_json(report: &TranslationEvalReport, ks: &[usize], manifest: Value) -> Value {
    let per_pos: Map<String, Value> = report
        .per_pos
        .iter()
        .map(|(p, g)| {
            let mut v = summary_json(&g.summary);
            v["low_support"] = json!(g.low_support);
            (p.clone(), v)
        })
        .collect();
    let per_language: Map<String, Value> = report
        .per_language
        .iter()
        .map(|(l, s)| (l.clone(), summary_json(s)))
        .collect();
    json!({
        "kind": KIND_TRANSLATION,
        "manifest": manifest,
        "ks": ks,
        "overall": summary_json(&report.overall),
        "per_pos": per_pos,
        "per_language": per_language,
    })
}

/// Left-aligned first column, right-aligned others, two-space gutters.
pub fn aligned_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut width: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, cell) in r.iter().enumerate().take(cols) {
            width[i] = width[i].max(cell.chars().count());
        }
    }
    let render = |cells: &[String]| {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate().take(cols) {
            let pad = width[i] - cell.chars().count();
            if i == 0 {
                line.push_str(cell);
                line.push_str(&" ".repeat(pad));
            } else {
                line.push_str("  ");
                line.push_str(&" ".repeat(pad));
                line.push_str(cell);
            }
        }
        line.trim_end().to_string()
    };
    let mut out = render(headers);
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * cols.saturating_sub(1)));
    out.push('\n');
    for r in rows {
        out.push_str(&render(r));
        out.push('\n');
    }
    out
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.digits$}"))
}

/// Header and row cells for one translation summary, read back from its
/// JSON form so that `report` can render files written earlier.
fn translation_cells(name: &str, summary: &Value, ks: &[usize]) -> Vec<String> {
    let mut cells = vec![name.to_string(), summary["n"].as_u64().map_or("-".into(), |n| n.to_string())];
    for k in ks {
        cells.push(fmt_opt(summary["acc_at"][k.to_string()].as_f64(), 4));
    }
    cells.push(fmt_opt(summary["avg_rank"].as_f64(), 1));
    cells.push(fmt_opt(summary["avg_log_rank"].as_f64(), 2));
    cells.push(fmt_opt(summary["hard_win"].as_f64(), 4));
    cells
}

fn translation_headers(first: &str, ks: &[usize]) -> Vec<String> {
    let mut h = vec![first.to_string(), "n".into()];
    h.extend(ks.iter().map(|k| format!("acc@{k}")));
    h.extend(["avg rank", "log rank", "hard win"].map(String::from));
    h
}

fn ks_of(report: &Value) -> Vec<usize> {
    report["ks"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_u64().map(|k| k as usize)).collect())
        .unwrap_or_default()
}

/// Overall, per-POS and per-language rows of one translation report.
pub fn translation_text(report: &Value) -> String {
    let ks = ks_of(report);
    let mut rows = vec![translation_cells("overall", &report["overall"], &ks)];
    for (section, prefix) in [("per_pos", "pos "), ("per_language", "lang ")] {
        if let Some(groups) = report[section].as_object() {
            for (name, s) in groups {
                let flag = if s["low_support"].as_bool() == Some(true) { " *" } else { "" };
                rows.push(translation_cells(&format!("{prefix}{name}{flag}"), s, &ks));
            }
        }
    }
    let mut out = aligned_table(&translation_headers("group", &ks), &rows);
    if report["per_pos"].as_object().is_some_and(|g| g.values().any(|s| s["low_support"].as_bool() == Some(true))) {
        out.push_str("* fewer records than the minimum POS count\n");
    }
    out
}

/// One overall row per named translation report, as in a method comparison.
pub fn translation_comparison(reports: &[(String, Value)]) -> String {
    let ks = reports.first().map(|(_, r)| ks_of(r)).unwrap_or_default();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|(name, r)| translation_cells(name, &r["overall"], &ks))
        .collect();
    aligned_table(&translation_headers("method", &ks), &rows)
}

pub fn cluster_text(report: &Value) -> String {
    let headers = ["space", "v", "homogeneity", "completeness"].map(String::from);
    let rows: Vec<Vec<String>> = report["spaces"]
        .as_object()
        .map(|m| {
            m.iter()
                .map(|(name, v)| {
                    vec![
                        name.clone(),
                        fmt_opt(v["v"].as_f64(), 4),
                        fmt_opt(v["homogeneity"].as_f64(), 4),
                        fmt_opt(v["completeness"].as_f64(), 4),
                    ]
                })
                .collect()
        })
        .unwrap_or_default();
    aligned_table(&headers, &rows)
}

/// Variant × k table of one per-variant metric (`english` or `coherence`).
pub fn intervention_text(report: &Value, metric: &str) -> String {
    let ks = ks_of(report);
    let mut headers = vec!["variant".to_string()];
    headers.extend(ks.iter().map(|k| format!("@{k}")));
    let rows: Vec<Vec<String>> = report["variants"]
        .as_object()
        .map(|m| {
            m.iter()
                .filter(|(_, v)| !v[metric].is_null())
                .map(|(name, v)| {
                    let mut r = vec![name.clone()];
                    r.extend(ks.iter().map(|k| {
                        let cell = &v[metric][k.to_string()];
                        fmt_opt(cell.as_f64().or_else(|| cell["mean"].as_f64()), 4)
                    }));
                    r
                })
                .collect()
        })
        .unwrap_or_default();
    aligned_table(&headers, &rows)
}

pub fn confusion_text(report: &Value) -> String {
    let headers = ["language", "n", "accuracy"].map(String::from);
    let rows: Vec<Vec<String>> = report["languages"]
        .as_array()
        .map(|a| {
            a.iter()
                .map(|l| {
                    vec![
                        l["language"].as_str().unwrap_or("?").to_string(),
                        l["n"].as_u64().map_or("-".into(), |n| n.to_string()),
                        fmt_opt(l["accuracy"].as_f64(), 4),
                    ]
                })
                .collect()
        })
        .unwrap_or_default();
    let mut out = aligned_table(&headers, &rows);
    match report["spearman"].as_f64() {
        Some(rho) => out.push_str(&format!("spearman(accuracy, size) = {rho:.4}\n")),
        None => {
            if let Some(reason) = report["spearman_error"].as_str() {
                out.push_str(&format!("spearman undefined: {reason}\n"));
            }
        }
    }
    out
}

pub fn inlp_text(report: &Value) -> String {
    let headers = ["iteration", "dev accuracy"].map(String::from);
    let rows: Vec<Vec<String>> = report["dev_accuracy"]
        .as_array()
        .map(|a| a.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), fmt_opt(v.as_f64(), 4)]).collect())
        .unwrap_or_default();
    let mut out = aligned_table(&headers, &rows);
    out.push_str(&format!(
        "status {}, {} classifiers, nullspace rank {} of {}, majority {}\n",
        report["status"].as_str().unwrap_or("?"),
        report["classifier_count"],
        report["nullspace_rank"],
        report["d"],
        fmt_opt(report["majority"].as_f64(), 4),
    ));
    out
}

/// Text rendering for any report this tool writes.
pub fn render(report: &Value) -> Result<String> {
    match report["kind"].as_str() {
        Some(KIND_TRANSLATION) => Ok(translation_text(report)),
        Some(KIND_CLUSTER) => Ok(cluster_text(report)),
        Some(KIND_INTERVENTION) => {
            let mut out = String::from("English proportion\n");
            out.push_str(&intervention_text(report, "english"));
            if report["variants"].as_object().is_some_and(|m| m.values().any(|v| !v["coherence"].is_null())) {
                out.push_str("\nSemantic coherence\n");
                out.push_str(&intervention_text(report, "coherence"));
            }
            Ok(out)
        }
        Some(KIND_CONFUSION) => Ok(confusion_text(report)),
        Some(KIND_INLP) => Ok(inlp_text(report)),
        other => Err(Error::Usage(format!("unrecognized report kind {other:?}"))),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, "CSV output", format!("{other:?}")),
    }
}

/// Writes `rows` under `header`; every value is already formatted.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Source languages as rows, target languages as columns, `NA` where a
/// cell has no pairs or lies on the diagonal.
pub fn heatmap_csv(path: &Path, m: &AllPairsMatrix) -> Result<()> {
    let mut header = vec![String::from("source")];
    header.extend(m.languages.iter().cloned());
    let rows: Vec<Vec<String>> = m
        .languages
        .iter()
        .zip(&m.cells)
        .map(|(l, cells)| {
            let mut r = vec![l.clone()];
            r.extend(cells.iter().map(|c| c.map_or_else(|| "NA".to_string(), |v| v.to_string())));
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

pub fn heatmap_counts_csv(path: &Path, m: &AllPairsMatrix) -> Result<()> {
    let mut header = vec![String::from("source")];
    header.extend(m.languages.iter().cloned());
    let rows: Vec<Vec<String>> = m
        .languages
        .iter()
        .zip(&m.counts)
        .map(|(l, counts)| {
            let mut r = vec![l.clone()];
            r.extend(counts.iter().map(|c| c.to_string()));
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// True languages as rows, predicted languages as columns, in the
/// matrix's accuracy order.
pub fn confusion_csv(path: &Path, m: &ConfusionMatrix) -> Result<()> {
    let mut header = vec![String::from("true")];
    header.extend(m.languages.iter().cloned());
    let rows: Vec<Vec<String>> = m
        .languages
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut r = vec![l.clone()];
            r.extend(m.cells.row(i).iter().map(|v| v.to_string()));
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// `x,y` coordinates followed by each row's label fields.
pub fn points_csv(path: &Path, coords: &Matrix, labels: &[(String, String)]) -> Result<()> {
    let header = ["x", "y", "language", "token"].map(String::from);
    let rows: Vec<Vec<String>> = coords
        .row_iter()
        .zip(labels)
        .map(|(c, (lang, tok))| vec![c[0].to_string(), c[1].to_string(), lang.clone(), tok.clone()])
        .collect();
    write_csv(path, &header, &rows)
}

/// Raw vectors as CSV with one `v<j>` column per dimension.
pub fn vectors_csv(path: &Path, data: &Matrix, labels: &[(String, String)]) -> Result<()> {
    let mut header = vec![String::from("language"), String::from("token")];
    header.extend((0..data.cols()).map(|j| format!("v{j}")));
    let rows: Vec<Vec<String>> = data
        .row_iter()
        .zip(labels)
        .map(|(row, (lang, tok))| {
            let mut r = vec![lang.clone(), tok.clone()];
            r.extend(row.iter().map(|v| v.to_string()));
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// `(variant, k) -> value` tables as long-form CSV.
pub fn variant_k_csv(path: &Path, value_columns: &[&str], rows: &BTreeMap<(String, usize), Vec<String>>) -> Result<()> {
    let mut header = vec![String::from("variant"), String::from("k")];
    header.extend(value_columns.iter().map(|s| s.to_string()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|((variant, k), vals)| {
            let mut r = vec![variant.clone(), k.to_string()];
            r.extend(vals.iter().cloned());
            r
        })
        .collect();
    write_csv(path, &header, &body)
}
