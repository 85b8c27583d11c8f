//! Report files: long-form metrics CSV, ranking and comparison tables, timing tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::evaluation::{
    compare_variants, rank, timing_table, ConfusionMatrix, MetricsReport, RankMetric, RankRow, Scope, Variant,
};
use crate::loan_data::Regime;
use crate::models::ModelKind;

pub const METRICS_CSV: &str = "metrics.csv";
pub const RANKINGS_MD: &str = "rankings.md";
pub const COMPARISON_MD: &str = "comparison.md";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const TIMING_MD: &str = "timing.md";
pub const TIMING_CSV: &str = "timing.csv";
pub const TIMING_CELLS_CSV: &str = "timing_cells.csv";

/// One line of the metrics CSV. Fit time lives in the timing files so that this file
/// is identical across reruns.
#[derive(Debug, Serialize, Deserialize)]
struct MetricsRow {
    vintage_year: u16,
    regime: Regime,
    model: ModelKind,
    variant: Variant,
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    tn: u64,
    precision: Option<f64>,
    recall: Option<f64>,
    fpr: Option<f64>,
    accuracy: Option<f64>,
    roc_auc: Option<f64>,
    train_rows: usize,
    converged: bool,
    holdout_checksum: String,
    error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TimingCell {
    vintage_year: u16,
    model: ModelKind,
    variant: Variant,
    fit_seconds: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> BenchError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => BenchError::Output { path: path.to_path_buf(), source },
        other => BenchError::Report(format!("{}: {other:?}", path.display())),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| BenchError::Output { path: path.to_path_buf(), source })
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, BenchError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::Report(format!("{}: {e}", path.display())))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| BenchError::Report(format!("{}: {e}", path.display())))
}

/// Reads a metrics CSV back, merging fit times from `timing_cells.csv` next to it when present.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsReport>, BenchError> {
    let rows: Vec<MetricsRow> = read_csv(path)?;
    let timing_path = path.with_file_name(TIMING_CELLS_CSV);
    let times: BTreeMap<(u16, ModelKind, Variant), f64> = if timing_path.exists() {
        read_csv::<TimingCell>(&timing_path)?
            .into_iter()
            .map(|t| ((t.vintage_year, t.model, t.variant), t.fit_seconds))
            .collect()
    } else {
        BTreeMap::new()
    };
    Ok(rows
        .into_iter()
        .map(|r| MetricsReport {
            fit_seconds: times.get(&(r.vintage_year, r.model, r.variant)).copied().unwrap_or(0.0),
            model: r.model,
            variant: r.variant,
            vintage_year: r.vintage_year,
            regime: r.regime,
            confusion: ConfusionMatrix { tp: r.tp, fp: r.fp, fn_: r.fn_, tn: r.tn },
            precision: r.precision,
            recall: r.recall,
            fpr: r.fpr,
            accuracy: r.accuracy,
            roc_auc: r.roc_auc,
            holdout_checksum: r.holdout_checksum,
            train_rows: r.train_rows,
            converged: r.converged,
            error: r.error,
        })
        .collect())
}

/// Reports in a stable order, whatever order the cells finished in.
fn sorted(reports: &[MetricsReport]) -> Vec<&MetricsReport> {
    let mut out: Vec<&MetricsReport> = reports.iter().collect();
    out.sort_by_key(|r| (r.vintage_year, r.model, r.variant));
    out
}

fn fmt_value(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(String::new, |v| format!("{v:.decimals$}"))
}

fn scope_title(scope: Scope) -> String {
    match scope {
        Scope::EntirePeriod => "Entire period".into(),
        Scope::Regime(r) => {
            let years = r.years();
            format!("{} default rate vintages ({}-{})", r.as_str(), years.start(), years.end())
        }
    }
}

fn short_title(metric: RankMetric) -> &'static str {
    match metric {
        RankMetric::Precision => "Prec.",
        RankMetric::Recall => "Recall",
        RankMetric::RocAuc => "AUC",
    }
}

/// Three side-by-side rankings (precision, recall, ROC-AUC) for one scope.
/// Models whose metric is undefined everywhere are listed last with blank rank and value.
pub fn ranking_table(reports: &[MetricsReport], scope: Scope) -> Result<String, BenchError> {
    let tables: Vec<Vec<RankRow>> = RankMetric::ALL
        .iter()
        .map(|&m| rank(reports, m, scope).map_err(|e| BenchError::Report(e.to_string())))
        .collect::<Result<_, _>>()?;
    let mut out = String::new();
    let mut header = Vec::new();
    let mut sub = Vec::new();
    for m in RankMetric::ALL {
        header.extend([format!("Rank by {}", m.title()), String::new(), String::new()]);
        sub.extend(["R#".to_string(), "Alg.".to_string(), short_title(m).to_string()]);
    }
    let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
    out.push_str(&line(&header));
    out.push_str(&line(&sub));
    out.push_str(&format!("|{}\n", "---|".repeat(9)));
    let n = tables.iter().map(Vec::len).max().unwrap_or(0);
    for i in 0..n {
        let mut cells = Vec::new();
        for t in &tables {
            match t.get(i) {
                Some(row) if row.mean.is_some() => {
                    cells.extend([row.rank.to_string(), row.label.clone(), fmt_value(row.mean, 4)]);
                }
                Some(row) => cells.extend([String::new(), row.label.clone(), String::new()]),
                None => cells.extend([String::new(), String::new(), String::new()]),
            }
        }
        out.push_str(&line(&cells));
    }
    Ok(out)
}

/// Labels sharing the best (or worst) defined mean.
fn extreme(rows: &[RankRow], best: bool) -> Option<(f64, Vec<String>)> {
    let defined: Vec<&RankRow> = rows.iter().filter(|r| r.mean.is_some()).collect();
    let target = if best { defined.first()?.mean? } else { defined.last()?.mean? };
    let labels = defined.iter().filter(|r| r.mean == Some(target)).map(|r| r.label.clone()).collect();
    Some((target, labels))
}

fn regimes_present(reports: &[MetricsReport]) -> Vec<Regime> {
    [Regime::Low, Regime::Medium, Regime::High].into_iter().filter(|g| reports.iter().any(|r| r.regime == *g)).collect()
}

pub fn rankings_markdown(reports: &[MetricsReport]) -> Result<String, BenchError> {
    let mut out = String::from("# Rankings\n\n");
    out.push_str("\"-R\" marks models trained on resampled data; every model is scored on the same holdout.\n\n");
    let scopes = std::iter::once(Scope::EntirePeriod).chain([Regime::Medium, Regime::High, Regime::Low].map(Scope::Regime));
    for scope in scopes {
        writeln!(out, "## {}\n", scope_title(scope)).unwrap();
        let in_scope = match scope {
            Scope::EntirePeriod => true,
            Scope::Regime(g) => reports.iter().any(|r| r.regime == g),
        };
        if !in_scope {
            out.push_str("No vintage of this regime was part of the run; table omitted.\n\n");
            continue;
        }
        out.push_str(&ranking_table(reports, scope)?);
        out.push('\n');
        if scope == Scope::EntirePeriod {
            out.push_str("| Metric | Average Value | Best Algorithm |\n|---|---|---|\n");
            for m in RankMetric::ALL {
                let rows = rank(reports, m, scope).map_err(|e| BenchError::Report(e.to_string()))?;
                let (value, labels) = extreme(&rows, true).map_or((None, Vec::new()), |(v, l)| (Some(v), l));
                writeln!(out, "| {} | {} | {} |", m.title(), fmt_value(value, 4), labels.join(", ")).unwrap();
            }
            out.push('\n');
        }
    }
    let regimes = regimes_present(reports);
    for (best, title) in [(true, "Best"), (false, "Worst")] {
        writeln!(out, "## {title} algorithms by regime\n").unwrap();
        let names: Vec<String> = regimes.iter().map(|g| scope_title(Scope::Regime(*g))).collect();
        writeln!(out, "| Metric | {} |", names.join(" | ")).unwrap();
        writeln!(out, "|---|{}", "---|".repeat(regimes.len())).unwrap();
        for m in RankMetric::ALL {
            let mut cells = Vec::new();
            for g in &regimes {
                let rows = rank(reports, m, Scope::Regime(*g)).map_err(|e| BenchError::Report(e.to_string()))?;
                cells.push(extreme(&rows, best).map_or_else(String::new, |(_, l)| l.join(", ")));
            }
            writeln!(out, "| {} | {} |", m.title(), cells.join(" | ")).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

fn metric_title(name: &str) -> &str {
    match name {
        "accuracy" => "Accuracy",
        "precision" => "Precision",
        "recall" => "Recall",
        "fpr" => "False positive rate",
        "roc_auc" => "ROC-AUC",
        other => other,
    }
}

pub fn comparison_markdown(reports: &[MetricsReport]) -> Result<String, BenchError> {
    let cmp = compare_variants(reports).map_err(|e| BenchError::Report(e.to_string()))?;
    let mut out = String::from("# Original vs resampled training\n\n");
    out.push_str("Grand mean over every (model, vintage) cell, scored on the same holdout.\n\n");
    out.push_str("| Metric (Avg.) | Using Orig. Data | Using Res. Data | Difference |\n|---|---|---|---|\n");
    for (name, o, r) in &cmp.rows {
        let diff = o.zip(*r).map(|(o, r)| r - o);
        let show = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
        writeln!(out, "| {} | {} | {} | {} |", metric_title(name), show(*o), show(*r), show(diff)).unwrap();
    }
    Ok(out)
}

#[derive(Serialize)]
struct ComparisonRow<'a> {
    metric: &'a str,
    original: Option<f64>,
    resampled: Option<f64>,
}

pub fn timing_markdown(reports: &[MetricsReport]) -> String {
    let mut out = String::from("# Fit time\n\nWall-clock seconds spent fitting, averaged over vintages and both variants.\n\n");
    out.push_str("| Algorithm | Average Time (seconds) |\n|---|---|\n");
    for row in timing_table(reports) {
        writeln!(out, "| {} | {:.3} |", row.model, row.mean_seconds).unwrap();
    }
    out
}

/// A written report file and whether its content depends on wall-clock time.
#[derive(Debug, Clone, PartialEq)]
pub struct WrittenFile {
    pub name: String,
    pub volatile: bool,
}

/// Writes every report file into `dir`. Timing files are written only when `with_timing`.
pub fn write_reports(reports: &[MetricsReport], dir: &Path, with_timing: bool) -> Result<Vec<WrittenFile>, BenchError> {
    if reports.is_empty() {
        return Err(BenchError::Report("no reports to write".into()));
    }
    std::fs::create_dir_all(dir).map_err(|source| BenchError::Output { path: dir.to_path_buf(), source })?;
    let text = |name: &str, body: String| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|source| BenchError::Output { path, source })
    };
    let ordered = sorted(reports);
    let mut written = Vec::new();
    let mut done = |name: &str, volatile: bool| written.push(WrittenFile { name: name.to_string(), volatile });

    write_csv(
        &dir.join(METRICS_CSV),
        ordered.iter().map(|r| MetricsRow {
            vintage_year: r.vintage_year,
            regime: r.regime,
            model: r.model,
            variant: r.variant,
            tp: r.confusion.tp,
            fp: r.confusion.fp,
            fn_: r.confusion.fn_,
            tn: r.confusion.tn,
            precision: r.precision,
            recall: r.recall,
            fpr: r.fpr,
            accuracy: r.accuracy,
            roc_auc: r.roc_auc,
            train_rows: r.train_rows,
            converged: r.converged,
            holdout_checksum: r.holdout_checksum.clone(),
            error: r.error.clone(),
        }),
    )?;
    done(METRICS_CSV, false);
    text(RANKINGS_MD, rankings_markdown(reports)?)?;
    done(RANKINGS_MD, false);
    if reports.iter().any(|r| r.variant == Variant::Original) && reports.iter().any(|r| r.variant == Variant::Resampled) {
        text(COMPARISON_MD, comparison_markdown(reports)?)?;
        done(COMPARISON_MD, false);
        let cmp = compare_variants(reports).map_err(|e| BenchError::Report(e.to_string()))?;
        write_csv(
            &dir.join(COMPARISON_CSV),
            cmp.rows.iter().map(|(m, o, r)| ComparisonRow { metric: m, original: *o, resampled: *r }),
        )?;
        done(COMPARISON_CSV, false);
    }
    if with_timing {
        text(TIMING_MD, timing_markdown(reports))?;
        done(TIMING_MD, true);
        write_csv(&dir.join(TIMING_CSV), timing_table(reports))?;
        done(TIMING_CSV, true);
        write_csv(
            &dir.join(TIMING_CELLS_CSV),
            ordered.iter().map(|r| TimingCell {
                vintage_year: r.vintage_year,
                model: r.model,
                variant: r.variant,
                fit_seconds: r.fit_seconds,
            }),
        )?;
        done(TIMING_CELLS_CSV, true);
    }
    Ok(written)
}
