//! Text reports: score tables, evaluation reports, few-shot and sweep tables,
//! and the per-patch colouring export.
//!
//! Floats are printed with Rust's shortest round-trip formatting, so a value
//! read back from a report is bit-identical to the one written.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use openpatch_core::fewshot::FewShotReport;
use openpatch_core::{EvalReport, Label, MatchRecord, SampleEmbeddingSet, SampleId, ScoreKind, ScoreReport};

use crate::error::FormatError;

/// Column order of a score table: `sample_id`, `label`, then one column per
/// scoring function in the requested order. Labels use -1 for unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub functions: Vec<ScoreKind>,
    pub rows: Vec<ScoreRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub sample_id: SampleId,
    pub label: Label,
    pub values: Vec<f64>,
}

impl ScoreTable {
    pub fn from_reports(functions: &[ScoreKind], reports: &[ScoreReport]) -> Self {
        let rows = reports
            .iter()
            .map(|r| ScoreRow {
                sample_id: r.sample_id,
                label: r.label,
                values: functions.iter().map(|&f| r.score(f).expect("score computed")).collect(),
            })
            .collect();
        Self { functions: functions.to_vec(), rows }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("sample_id\tlabel");
        for f in &self.functions {
            out.push('\t');
            out.push_str(f.name());
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{}\t{}", r.sample_id, r.label.code());
            for v in &r.values {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| FormatError::invalid("score table is empty"))?;
        let cols: Vec<&str> = header.split('\t').collect();
        if cols.len() < 3 || cols[0] != "sample_id" || cols[1] != "label" {
            return Err(FormatError::invalid("score table header must start with sample_id, label"));
        }
        let functions = cols[2..]
            .iter()
            .map(|c| c.parse::<ScoreKind>())
            .collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let bad = || FormatError::invalid(format!("score table row {}: malformed", n + 1));
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != cols.len() {
                return Err(bad());
            }
            let sample_id = fields[0].parse().map_err(|_| bad())?;
            let label = Label::from_code(fields[1].parse().map_err(|_| bad())?)?;
            let values = fields[2..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(ScoreRow { sample_id, label, values });
        }
        Ok(Self { functions, rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FormatError> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    /// Scores of one function split into (known, unknown).
    pub fn populations(&self, function: ScoreKind) -> Result<(Vec<f64>, Vec<f64>), FormatError> {
        let col = self
            .functions
            .iter()
            .position(|&f| f == function)
            .ok_or_else(|| FormatError::invalid(format!("score table has no `{function}` column")))?;
        let (known, unknown): (Vec<&ScoreRow>, Vec<&ScoreRow>) = self.rows.iter().partition(|r| r.label.is_known());
        Ok((known.iter().map(|r| r.values[col]).collect(), unknown.iter().map(|r| r.values[col]).collect()))
    }
}

/// How an evaluation was obtained: a single full-support run or a few-shot
/// aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Full,
    Shots(usize),
}

impl std::fmt::Display for Support {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Support::Full => f.write_str("all"),
            Support::Shots(k) => k.fmt(f),
        }
    }
}

/// `key=value` report, one block per function separated by blank lines.
/// Keys: function, auroc, fpr95, n_known, n_unknown, repeats, k.
pub fn eval_report_text(reports: &[EvalReport], repeats: usize, support: Support) -> String {
    reports
        .iter()
        .map(|r| {
            format!(
                "function={}\nauroc={}\nfpr95={}\nn_known={}\nn_unknown={}\nrepeats={repeats}\nk={support}\n",
                r.function, r.auroc, r.fpr95, r.n_known, r.n_unknown
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub const EVAL_TABLE_HEADER: &str = "function\tauroc\tfpr95\tn_known\tn_unknown\trepeats\tk";

pub fn eval_table(reports: &[EvalReport], repeats: usize, support: Support) -> String {
    let mut out = format!("{EVAL_TABLE_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{repeats}\t{support}",
            r.function, r.auroc, r.fpr95, r.n_known, r.n_unknown
        );
    }
    out
}

/// Parses a `key=value` evaluation report back into its blocks.
pub fn parse_eval_report(text: &str) -> Result<Vec<Vec<(String, String)>>, FormatError> {
    let mut blocks = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| FormatError::invalid(format!("report line `{line}` is not key=value")))?;
        current.push((k.to_string(), v.to_string()));
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    Ok(blocks)
}

pub const FEWSHOT_HEADER: &str = "k\tfunction\trepeats\tauroc\tauroc_std\tfpr95\tfpr95_std\tn_known\tn_unknown";

/// One row per (K, function).
pub fn fewshot_table(reports: &[FewShotReport]) -> String {
    let mut out = format!("{FEWSHOT_HEADER}\n");
    for r in reports {
        for s in &r.summaries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.k, s.function, r.repeats, s.auroc_mean, s.auroc_std, s.fpr95_mean, s.fpr95_std, s.n_known, s.n_unknown
            );
        }
    }
    out
}

/// Audit log of the support samples drawn in every repeat:
/// `k`, `repeat`, `seed`, `class`, comma separated support indices.
pub fn fewshot_draws(reports: &[FewShotReport]) -> String {
    let mut out = String::from("k\trepeat\tseed\tclass\tindices\n");
    for r in reports {
        for run in &r.runs {
            for d in &run.draws {
                let idx: Vec<String> = d.indices.iter().map(usize::to_string).collect();
                let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.k, run.repeat, run.seed, d.class_id, idx.join(","));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub keep_ratio: String,
    pub bank_patches: usize,
    pub seconds: f64,
    pub evals: Vec<EvalReport>,
}

pub const SWEEP_HEADER: &str = "keep_ratio\tfunction\tauroc\tfpr95\tbank_patches\tseconds";

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for row in rows {
        for e in &row.evals {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{:.6}",
                row.keep_ratio, e.function, e.auroc, e.fpr95, row.bank_patches, row.seconds
            );
        }
    }
    out
}

/// `x y z class_id delta` per patch anchor, in patch order.
pub fn color_export(sample: &SampleEmbeddingSet, matches: &[MatchRecord]) -> Result<String, FormatError> {
    if !sample.has_anchors() {
        return Err(FormatError::invalid(format!("sample {} has no anchor points", sample.sample_id())));
    }
    let mut out = String::new();
    for (p, m) in sample.patches().iter().zip(matches) {
        let [x, y, z] = p.anchor.expect("anchors checked above");
        let _ = writeln!(out, "{x} {y} {z} {} {}", m.assigned_class, m.distance);
    }
    Ok(out)
}

pub const MATCHES_HEADER: &str = "sample_id\tpatch_index\tdistance\tclass_id\tmatched_sample\tmatched_patch";

pub fn matches_table(reports: &[ScoreReport]) -> String {
    let mut out = format!("{MATCHES_HEADER}\n");
    for r in reports {
        for m in &r.matches {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.sample_id, m.patch_index, m.distance, m.assigned_class, m.matched.sample_id, m.matched.patch_index
            );
        }
    }
    out
}
