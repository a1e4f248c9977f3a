//! JSON report written by `mintox run`, and the summary table.

use std::fmt::Write as _;

use mintox_core::{BleuScore, BleuTokenizer, CorpusReport, EtoxRate, PipelineConfig};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub config: &'a PipelineConfig,
    pub bleu_tokenizer: BleuTokenizer,
    pub summary: Summary,
    pub corpus: &'a CorpusReport,
}

/// Pre-formatted headline numbers: rates as percentages with 3 decimals,
/// BLEU with 2.
#[derive(Debug, Serialize, PartialEq)]
pub struct Summary {
    pub sentences: usize,
    pub etox_before: String,
    pub etox_after: String,
    pub bleu_before: Option<String>,
    pub bleu_after: Option<String>,
    pub bleu_signature: Option<String>,
    pub mitigated: usize,
    pub still_toxic: usize,
    pub skipped_toxic_input: usize,
}

fn bleu_cell(score: Option<&BleuScore>) -> Option<String> {
    score.map(|s| format!("{:.2}", s.score))
}

impl Summary {
    pub fn new(report: &CorpusReport) -> Self {
        Summary {
            sentences: report.sentences,
            etox_before: report.etox_before.percent(),
            etox_after: report.etox_after.percent(),
            bleu_before: bleu_cell(report.bleu_before.as_ref()),
            bleu_after: bleu_cell(report.bleu_after.as_ref()),
            bleu_signature: report.bleu_after.as_ref().map(|s| s.signature.clone()),
            mitigated: report.mitigation_count,
            still_toxic: report.diffs.iter().filter(|d| d.still_toxic).count(),
            skipped_toxic_input: report.skipped_toxic_input,
        }
    }
}

fn count(rate: &EtoxRate) -> String {
    format!("{}/{}", rate.toxic, rate.total)
}

/// Plain-text table for the terminal.
pub fn table(report: &CorpusReport) -> String {
    let s = Summary::new(report);
    let dash = || "-".to_string();
    let mut out = String::new();
    let _ = writeln!(out, "{:<16}{:>12}{:>12}", "", "before", "after");
    let _ = writeln!(out, "{:<16}{:>12}{:>12}", "ETOX %", s.etox_before, s.etox_after);
    let _ = writeln!(out, "{:<16}{:>12}{:>12}", "toxic", count(&report.etox_before), count(&report.etox_after));
    let _ = writeln!(
        out,
        "{:<16}{:>12}{:>12}",
        "BLEU",
        s.bleu_before.clone().unwrap_or_else(dash),
        s.bleu_after.clone().unwrap_or_else(dash)
    );
    let _ = writeln!(out, "mitigated {} of {} sentences", s.mitigated, s.sentences);
    if s.skipped_toxic_input > 0 {
        let _ = writeln!(out, "left as is (toxic source): {}", s.skipped_toxic_input);
    }
    if let Some(sig) = &s.bleu_signature {
        let _ = writeln!(out, "BLEU signature: {sig}");
    }
    out
}
