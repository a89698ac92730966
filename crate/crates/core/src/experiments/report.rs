//! Report assembly and the CSV, text and JSON renderings.
//!
//! Reports hold only reproducible values; wall-clock runtimes go to a
//! separate timings file so that reruns produce byte-identical reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::reference;
use super::ReportRow;
use crate::error::{Error, Result};
use crate::imaging::SpectralFilter;

/// A published value next to the measured one, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceComparison {
    pub configuration: String,
    pub metric: String,
    pub reference: f64,
    pub measured: Option<f64>,
    /// `measured - reference`.
    pub diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: u8,
    pub rows: Vec<ReportRow>,
    pub references: Vec<ReferenceComparison>,
    /// Resolved configuration and tool version supplied by the caller.
    pub provenance: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub experiment: u8,
    /// Seconds per report row, in row order.
    pub row_seconds: Vec<f64>,
}

impl Timings {
    pub fn new(experiment: u8, row_seconds: Vec<f64>) -> Self {
        Timings { experiment, row_seconds }
    }
}

fn pct(v: f64) -> f64 {
    v * 100.0
}

fn alpha_label(alpha: Option<SpectralFilter>) -> String {
    alpha.map_or_else(|| "no filter".to_string(), |a| format!("alpha {a}"))
}

fn denominator(alpha: Option<SpectralFilter>) -> Option<u32> {
    alpha.map(|a| a.denominator())
}

fn compare(out: &mut Vec<ReferenceComparison>, configuration: &str, metric: &str, reference: f64, measured: Option<f64>) {
    out.push(ReferenceComparison {
        configuration: configuration.to_string(),
        metric: metric.to_string(),
        reference,
        measured,
        diff: measured.map(|m| m - reference),
    });
}

fn metric_values(row: Option<&ReportRow>) -> [Option<f64>; 4] {
    let val = row.and_then(|r| r.val);
    let test = row.and_then(|r| r.test);
    [
        val.map(|m| pct(m.accuracy)),
        val.map(|m| pct(m.f1)),
        test.map(|m| pct(m.accuracy)),
        test.map(|m| pct(m.f1)),
    ]
}

const METRICS: [&str; 4] = ["val_accuracy", "val_f1", "test_accuracy", "test_f1"];

fn references(experiment: u8, rows: &[ReportRow]) -> Vec<ReferenceComparison> {
    let mut out = Vec::new();
    match experiment {
        1 => {
            for (cap, removed, used, va, vf, ta, tf) in reference::EXP1 {
                let row = rows.iter().find(|r| r.node_cap == cap && r.alpha.is_none());
                let label = format!("cap {cap}");
                compare(&mut out, &label, "graphs_removed", removed as f64, row.map(|r| r.graphs_removed as f64));
                compare(&mut out, &label, "graphs_used", used as f64, row.map(|r| r.graphs_used as f64));
                for (metric, (reference, measured)) in METRICS.iter().zip([va, vf, ta, tf].into_iter().zip(metric_values(row))) {
                    compare(&mut out, &label, metric, reference, measured);
                }
            }
        }
        2 => {
            for (den, accs, f1s) in reference::EXP2 {
                for (k, cap) in reference::EXP2_CAPS.into_iter().enumerate() {
                    let row = rows.iter().find(|r| r.node_cap == cap && denominator(r.alpha) == den);
                    let label = format!("{} cap {cap}", den.map_or("no filter".into(), |d| format!("alpha 1/{d}")));
                    let [va, vf, _, _] = metric_values(row);
                    if let Some(reference) = accs[k] {
                        compare(&mut out, &label, "val_accuracy", reference, va);
                    }
                    if let Some(reference) = f1s[k] {
                        compare(&mut out, &label, "val_f1", reference, vf);
                    }
                }
            }
        }
        _ => {
            for (den, cap, users, used, va, vf, ta, tf) in reference::EXP3 {
                let row = rows
                    .iter()
                    .find(|r| r.node_cap == cap && denominator(r.alpha) == Some(den) && r.users == users);
                let label = format!("alpha 1/{den} cap {cap} users {users}");
                compare(&mut out, &label, "used_pct", used, row.map(|r| pct(r.retention)));
                for (metric, (reference, measured)) in METRICS.iter().zip([va, vf, ta, tf].into_iter().zip(metric_values(row))) {
                    compare(&mut out, &label, metric, reference, measured);
                }
            }
        }
    }
    out
}

impl ExperimentReport {
    pub fn new(experiment: u8, rows: Vec<ReportRow>) -> Self {
        ExperimentReport {
            experiment,
            references: references(experiment, &rows),
            rows,
            provenance: serde_json::Value::Null,
        }
    }

    pub fn with_provenance(mut self, provenance: serde_json::Value) -> Self {
        self.provenance = provenance;
        self
    }

    /// One `# `-prefixed line holding the compact provenance, or nothing
    /// when none is attached.
    fn provenance_line(&self) -> String {
        if self.provenance.is_null() {
            String::new()
        } else {
            format!("# {}\n", self.provenance)
        }
    }

    /// CSV rows, preceded by the provenance comment line if any.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(self.provenance_line().into_bytes());
        w.write_record([
            "experiment",
            "alpha",
            "node_cap",
            "users",
            "graphs_removed",
            "graphs_used",
            "graphs_unusable",
            "retention_pct",
            "trained",
            "best_epoch",
            "epochs_run",
            "val_accuracy_pct",
            "val_f1_pct",
            "test_accuracy_pct",
            "test_f1_pct",
            "train_seed",
            "note",
        ])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.2}"));
        let opt_n = |v: Option<usize>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.rows {
            let [va, vf, ta, tf] = metric_values(Some(r));
            w.write_record([
                self.experiment.to_string(),
                r.alpha.map_or(String::new(), |a| a.to_string()),
                r.node_cap.to_string(),
                r.users.to_string(),
                r.graphs_removed.to_string(),
                r.graphs_used.to_string(),
                r.graphs_unusable.to_string(),
                format!("{:.2}", pct(r.retention)),
                r.trained.to_string(),
                opt_n(r.best_epoch),
                opt_n(r.epochs_run),
                opt(va),
                opt(vf),
                opt(ta),
                opt(tf),
                r.train_seed.to_string(),
                r.note.clone().unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Stream(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Plain-text tables in the published layouts, followed by the
    /// reference comparison.
    pub fn to_text(&self) -> String {
        let mut s = self.provenance_line();
        match self.experiment {
            1 => self.table1(&mut s),
            2 => self.table2(&mut s),
            _ => self.table3(&mut s),
        }
        let _ = writeln!(s, "\nPublished reference values (original corpus) vs measured, percent:");
        let _ = writeln!(
            s,
            "{:<34} {:<15} {:>10} {:>10} {:>9}",
            "configuration", "metric", "reference", "measured", "diff"
        );
        for c in &self.references {
            let m = c.measured.map_or("-".into(), |v| format!("{v:.2}"));
            let d = c.diff.map_or("-".into(), |v| format!("{v:+.2}"));
            let _ = writeln!(
                s,
                "{:<34} {:<15} {:>10.2} {:>10} {:>9}",
                c.configuration, c.metric, c.reference, m, d
            );
        }
        s
    }

    fn table1(&self, s: &mut String) {
        let users = self.rows.first().map_or(0, |r| r.users);
        let _ = writeln!(s, "Experiment 1: validation and test metrics per node cap ({users} users)");
        let _ = writeln!(
            s,
            "{:>7} | {:>8} {:>6} | {:>9} {:>8} | {:>9} {:>8}",
            "# nodes", "removed", "used", "val acc%", "val F1%", "test acc%", "test F1%"
        );
        for r in &self.rows {
            let [va, vf, ta, tf] = metric_values(Some(r)).map(cell);
            let _ = writeln!(
                s,
                "{:>7} | {:>8} {:>6} | {va:>9} {vf:>8} | {ta:>9} {tf:>8}",
                r.node_cap, r.graphs_removed, r.graphs_used
            );
        }
    }

    fn table2(&self, s: &mut String) {
        let caps: Vec<usize> = unique(self.rows.iter().map(|r| r.node_cap));
        let mut filters: Vec<Option<SpectralFilter>> = Vec::new();
        for r in &self.rows {
            if !filters.contains(&r.alpha) {
                filters.push(r.alpha);
            }
        }
        let users = self.rows.first().map_or(0, |r| r.users);
        let _ = writeln!(s, "Experiment 2: validation metrics per filter and node cap ({users} users)");
        let mut header = format!("{:<12} |", "filter");
        for _ in 0..2 {
            for cap in &caps {
                let _ = write!(header, " {cap:>8}");
            }
            let _ = write!(header, " | ");
        }
        let _ = writeln!(s, "{:<12} | {:^w$} | {:^w$} |", "", "validation accuracy %", "validation F1 %", w = caps.len() * 9 - 1);
        let _ = writeln!(s, "{}", header.trim_end());
        for alpha in &filters {
            let mut line = format!("{:<12} |", alpha_label(*alpha));
            for which in [0, 1] {
                for cap in &caps {
                    let row = self.rows.iter().find(|r| r.alpha == *alpha && r.node_cap == *cap);
                    let v = metric_values(row)[which];
                    let _ = write!(line, " {:>8}", cell(v));
                }
                let _ = write!(line, " | ");
            }
            let _ = writeln!(s, "{}", line.trim_end());
        }
        let _ = writeln!(s, "\nRetention per configuration (%):");
        for alpha in &filters {
            let mut line = format!("{:<12} |", alpha_label(*alpha));
            for cap in &caps {
                let row = self.rows.iter().find(|r| r.alpha == *alpha && r.node_cap == *cap);
                let _ = write!(line, " {:>8}", cell(row.map(|r| pct(r.retention))));
            }
            let _ = writeln!(s, "{line}");
        }
    }

    fn table3(&self, s: &mut String) {
        let mut configs: Vec<(Option<SpectralFilter>, usize)> = Vec::new();
        for r in &self.rows {
            if !configs.contains(&(r.alpha, r.node_cap)) {
                configs.push((r.alpha, r.node_cap));
            }
        }
        let counts: Vec<usize> = unique(self.rows.iter().map(|r| r.users));
        let _ = writeln!(s, "Experiment 3: metrics per number of users");
        let mut head1 = format!("{:>7} |", "");
        let mut head2 = format!("{:>7} |", "# users");
        for (k, (alpha, cap)) in configs.iter().enumerate() {
            let title = format!("config {}: {}, {} nodes", k + 1, alpha_label(*alpha), cap);
            let _ = write!(head1, " {title:^50} |");
            let _ = write!(head2, " {:>7} {:>9} {:>8} {:>9} {:>8}   |", "used%", "val acc%", "val F1%", "test acc%", "test F1%");
        }
        let _ = writeln!(s, "{head1}");
        let _ = writeln!(s, "{head2}");
        for n in &counts {
            let mut line = format!("{n:>7} |");
            for (alpha, cap) in &configs {
                let row = self
                    .rows
                    .iter()
                    .find(|r| r.alpha == *alpha && r.node_cap == *cap && r.users == *n);
                let [va, vf, ta, tf] = metric_values(row).map(cell);
                let used = cell(row.map(|r| pct(r.retention)));
                let _ = write!(line, " {used:>7} {va:>9} {vf:>8} {ta:>9} {tf:>8}   |");
            }
            let _ = writeln!(s, "{line}");
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.2}"))
}

fn unique(values: impl Iterator<Item = usize>) -> Vec<usize> {
    values.collect::<BTreeSet<_>>().into_iter().collect()
}

/// Paths written by [`write_reports`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub text: PathBuf,
    pub json: PathBuf,
    pub timings: PathBuf,
}

/// Writes `<stem>.csv`, `<stem>.txt`, `<stem>.json` and
/// `<stem>.timings.json` into `dir`.
pub fn write_reports(report: &ExperimentReport, timings: &Timings, dir: &Path, stem: &str) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        csv: dir.join(format!("{stem}.csv")),
        text: dir.join(format!("{stem}.txt")),
        json: dir.join(format!("{stem}.json")),
        timings: dir.join(format!("{stem}.timings.json")),
    };
    let write = |path: &Path, content: String| std::fs::write(path, content).map_err(|e| Error::io(path, e));
    write(&files.csv, report.to_csv()?)?;
    write(&files.text, report.to_text())?;
    write(&files.json, report.to_json()?)?;
    write(&files.timings, serde_json::to_string_pretty(timings)? + "\n")?;
    Ok(files)
}
