//! Repeated-run aggregation and report formatting: mean and sample
//! standard deviation per metric, JSON plus an aligned text table with
//! percentages and the std in brackets.

use serde::{Deserialize, Serialize};

use crate::ehr::samples::Task;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub w_f1: Option<f64>,
    pub r_at_10: Option<f64>,
    pub r_at_20: Option<f64>,
    pub auc: Option<f64>,
    pub f1: Option<f64>,
}

impl MetricValues {
    pub fn fields() -> [&'static str; 5] {
        ["w_f1", "r_at_10", "r_at_20", "auc", "f1"]
    }

    pub fn get(&self, field: &str) -> Option<f64> {
        match field {
            "w_f1" => self.w_f1,
            "r_at_10" => self.r_at_10,
            "r_at_20" => self.r_at_20,
            "auc" => self.auc,
            "f1" => self.f1,
            _ => None,
        }
    }

    fn set(&mut self, field: &str, value: Option<f64>) {
        match field {
            "w_f1" => self.w_f1 = value,
            "r_at_10" => self.r_at_10 = value,
            "r_at_20" => self.r_at_20 = value,
            "auc" => self.auc = value,
            "f1" => self.f1 = value,
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    #[serde(flatten)]
    pub values: MetricValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_runs: usize,
    /// Ascending; per_run is ordered to match.
    pub seeds: Vec<u64>,
    pub per_run: Vec<RunMetrics>,
    pub mean: MetricValues,
    /// Sample standard deviation (n - 1 denominator); 0 when n_runs = 1.
    pub std: MetricValues,
}

/// Aggregate per-run metrics into a report with stable seed ordering.
pub fn aggregate_runs(runs: &[RunMetrics]) -> Result<MetricsReport> {
    if runs.is_empty() {
        return Err(Error::Empty("aggregate_runs on an empty run list".into()));
    }
    let mut per_run = runs.to_vec();
    per_run.sort_by_key(|r| r.seed);

    let mut mean = MetricValues::default();
    let mut std = MetricValues::default();
    for field in MetricValues::fields() {
        let values: Vec<f64> = per_run.iter().filter_map(|r| r.values.get(field)).collect();
        if values.is_empty() {
            continue;
        }
        let n = values.len() as f64;
        let m = values.iter().sum::<f64>() / n;
        let s = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        mean.set(field, Some(m));
        std.set(field, Some(s));
    }

    Ok(MetricsReport {
        n_runs: per_run.len(),
        seeds: per_run.iter().map(|r| r.seed).collect(),
        per_run,
        mean,
        std,
    })
}

fn fmt_cell(mean: Option<f64>, std: Option<f64>) -> String {
    match mean {
        Some(m) => format!("{:.2} ({:.2})", m * 100.0, std.unwrap_or(0.0) * 100.0),
        None => "-".to_string(),
    }
}

fn fmt_delta(a: Option<f64>, b: Option<f64>) -> String {
    match (a, b) {
        (Some(a), Some(b)) => format!("{:+.2}", (b - a) * 100.0),
        _ => "-".to_string(),
    }
}

fn task_fields(task: Task) -> (&'static [&'static str], &'static [&'static str]) {
    match task {
        Task::Dg => (&["w_f1", "r_at_10", "r_at_20"], &["w-F1", "R@10", "R@20"]),
        Task::Hf => (&["auc", "f1"], &["AUC", "F1"]),
    }
}

fn render_rows(headers: &[&str], rows: &[(String, Vec<String>)]) -> String {
    let label_width = rows
        .iter()
        .map(|(l, _)| l.len())
        .chain(std::iter::once("model".len()))
        .max()
        .unwrap_or(5);
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for (_, cells) in rows {
        for (w, c) in widths.iter_mut().zip(cells) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    out.push_str(&format!("{:<label_width$}", "model"));
    for (h, w) in headers.iter().zip(&widths) {
        out.push_str(&format!("  {h:>w$}"));
    }
    out.push('\n');
    for (label, cells) in rows {
        out.push_str(&format!("{label:<label_width$}"));
        for (c, w) in cells.iter().zip(&widths) {
            out.push_str(&format!("  {c:>w$}"));
        }
        out.push('\n');
    }
    out
}

/// Single-model table: mean (std) per metric, as percentages.
pub fn format_report(task: Task, label: &str, report: &MetricsReport) -> String {
    let (fields, headers) = task_fields(task);
    let cells = fields
        .iter()
        .map(|f| fmt_cell(report.mean.get(f), report.std.get(f)))
        .collect();
    let mut out = format!(
        "{} prediction over {} run(s), seeds {:?}\n",
        task.name().to_uppercase(),
        report.n_runs,
        report.seeds
    );
    out.push_str(&render_rows(headers, &[(label.to_string(), cells)]));
    out
}

/// Paired baseline / fused comparison with a mean-delta row.
pub fn format_comparison(task: Task, baseline: &MetricsReport, mplite: &MetricsReport) -> String {
    let (fields, headers) = task_fields(task);
    let base_cells: Vec<String> = fields
        .iter()
        .map(|f| fmt_cell(baseline.mean.get(f), baseline.std.get(f)))
        .collect();
    let fused_cells: Vec<String> = fields
        .iter()
        .map(|f| fmt_cell(mplite.mean.get(f), mplite.std.get(f)))
        .collect();
    let delta_cells: Vec<String> = fields
        .iter()
        .map(|f| fmt_delta(baseline.mean.get(f), mplite.mean.get(f)))
        .collect();
    let mut out = format!(
        "{} prediction: GRU baseline vs +MPLite over {} run(s)\n",
        task.name().to_uppercase(),
        baseline.n_runs
    );
    out.push_str(&render_rows(
        headers,
        &[
            ("GRU".to_string(), base_cells),
            ("GRU+MPLite".to_string(), fused_cells),
            ("delta".to_string(), delta_cells),
        ],
    ));
    out
}
