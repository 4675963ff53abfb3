//! Span-based segmentation scoring, OOV recall and era accuracy.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// Word-level precision, recall and F1 with the counts behind them.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SegScore {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl SegScore {
    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            0.0
        } else {
            self.correct as f64 / self.predicted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.gold == 0 {
            0.0
        } else {
            self.correct as f64 / self.gold as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    pub fn merge(&self, other: &SegScore) -> SegScore {
        SegScore {
            gold: self.gold + other.gold,
            predicted: self.predicted + other.predicted,
            correct: self.correct + other.correct,
        }
    }
}

/// `(start, end)` character offsets of each word.
pub fn spans<S: AsRef<str>>(words: &[S]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(words.len());
    let mut pos = 0;
    for w in words {
        let n = w.as_ref().chars().count();
        out.push((pos, pos + n));
        pos += n;
    }
    out
}

fn same_chars<S: AsRef<str>>(a: &[S], b: &[S]) -> bool {
    a.iter()
        .flat_map(|w| w.as_ref().chars())
        .eq(b.iter().flat_map(|w| w.as_ref().chars()))
}

/// Micro-averaged span matching over sentence pairs.
pub fn score_segmentation<S: AsRef<str>>(
    gold: &[Vec<S>],
    predicted: &[Vec<S>],
) -> Result<SegScore> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            what: "gold vs predicted sentences",
            left: gold.len(),
            right: predicted.len(),
        });
    }
    let mut score = SegScore::default();
    for (index, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if !same_chars(g, p) {
            return Err(Error::CharMismatch { index });
        }
        let gold_spans: HashSet<(usize, usize)> = spans(g).into_iter().collect();
        let pred_spans = spans(p);
        score.gold += gold_spans.len();
        score.predicted += pred_spans.len();
        score.correct += pred_spans.iter().filter(|s| gold_spans.contains(s)).count();
    }
    Ok(score)
}

/// Recall restricted to gold tokens whose type is absent from `training`.
/// `None` when the gold side has no such tokens.
pub fn oov_recall<S: AsRef<str>>(
    gold: &[Vec<S>],
    predicted: &[Vec<S>],
    training: &BTreeSet<String>,
) -> Result<Option<f64>> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            what: "gold vs predicted sentences",
            left: gold.len(),
            right: predicted.len(),
        });
    }
    let (mut total, mut hit) = (0usize, 0usize);
    for (index, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if !same_chars(g, p) {
            return Err(Error::CharMismatch { index });
        }
        let pred: HashSet<(usize, usize)> = spans(p).into_iter().collect();
        for (w, span) in g.iter().zip(spans(g)) {
            if !training.contains(w.as_ref()) {
                total += 1;
                if pred.contains(&span) {
                    hit += 1;
                }
            }
        }
    }
    Ok((total > 0).then(|| hit as f64 / total as f64))
}

/// Fraction of equal entries; `None` for empty input.
pub fn era_accuracy(gold: &[usize], predicted: &[usize]) -> Result<Option<f64>> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            what: "gold vs predicted eras",
            left: gold.len(),
            right: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Ok(None);
    }
    let same = gold.iter().zip(predicted).filter(|(a, b)| a == b).count();
    Ok(Some(same as f64 / gold.len() as f64))
}

/// One row of an evaluation report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    /// Era id, or `None` for the pooled row.
    pub era: Option<usize>,
    pub score: SegScore,
    pub roov: Option<f64>,
    pub era_acc: Option<f64>,
    pub sentences: usize,
}

/// Per-era rows followed by the pooled row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

impl Report {
    pub fn pooled(&self) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.era.is_none())
    }

    pub fn era(&self, era: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.era == Some(era))
    }

    /// `era=<id> f1=<x> roov=<x|NA>` per row.
    pub fn machine_lines(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let era = r.era.map_or_else(|| "all".to_string(), |e| e.to_string());
            s.push_str(&format!(
                "era={era} f1={:.4} roov={}\n",
                r.score.f1(),
                opt(r.roov)
            ));
        }
        s
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<6} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "era", "sents", "P", "R", "F1", "R_oov", "era_acc"
        )?;
        for r in &self.rows {
            let era = r.era.map_or_else(|| "all".to_string(), |e| e.to_string());
            writeln!(
                f,
                "{:<6} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>8} {:>8}",
                era,
                r.sentences,
                r.score.precision(),
                r.score.recall(),
                r.score.f1(),
                opt(r.roov),
                opt(r.era_acc)
            )?;
        }
        Ok(())
    }
}
