//! Post-alignment cleanup: unaligned sentences, low-confidence pairs, very
//! short sentences and pairs whose two sides are in the same language.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{bead_to_pair, DocumentAlignment};
use crate::langid::{detect, LanguageProfile};
use crate::model::{AlignedPair, Bead, BeadKind};

pub const DEFAULT_MIN_CHARS: usize = 3;
pub const DEFAULT_MARGIN_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Minimum non-whitespace characters on each side.
    pub min_chars: usize,
    /// Both detections must be at least this confident to drop a pair.
    pub margin_threshold: f64,
    /// 1-1 pairs scoring below this are dropped, when set.
    pub min_pair_score: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_chars: DEFAULT_MIN_CHARS,
            margin_threshold: DEFAULT_MARGIN_THRESHOLD,
            min_pair_score: Some(0.3),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub dropped_unaligned: usize,
    pub dropped_low_score: usize,
    pub dropped_short: usize,
    pub dropped_same_language: usize,
    pub output: usize,
}

impl FilterReport {
    pub fn dropped(&self) -> usize {
        self.dropped_unaligned + self.dropped_low_score + self.dropped_short + self.dropped_same_language
    }

    pub fn reconciles(&self) -> bool {
        self.input == self.output + self.dropped()
    }

    pub fn merge(&mut self, other: &FilterReport) {
        self.input += other.input;
        self.dropped_unaligned += other.dropped_unaligned;
        self.dropped_low_score += other.dropped_low_score;
        self.dropped_short += other.dropped_short;
        self.dropped_same_language += other.dropped_same_language;
        self.output += other.output;
    }

    /// `key=value` lines, prefixed with `prefix`.
    pub fn to_kv(&self, prefix: &str) -> Vec<(String, String)> {
        [
            ("input", self.input),
            ("dropped_unaligned", self.dropped_unaligned),
            ("dropped_low_score", self.dropped_low_score),
            ("dropped_short", self.dropped_short),
            ("dropped_same_language", self.dropped_same_language),
            ("output", self.output),
        ]
        .into_iter()
        .map(|(k, v)| (format!("{prefix}{k}"), v.to_string()))
        .collect()
    }
}

pub fn drop_unaligned(beads: &[Bead]) -> Vec<Bead> {
    beads.iter().filter(|b| !b.kind.is_unaligned()).copied().collect()
}

pub fn non_whitespace_chars(text: &str) -> usize {
    text.chars().filter(|c| !c.is_whitespace()).count()
}

pub fn drop_short(pairs: Vec<AlignedPair>, min_chars: usize) -> Vec<AlignedPair> {
    pairs
        .into_iter()
        .filter(|p| non_whitespace_chars(&p.src_text) >= min_chars && non_whitespace_chars(&p.tgt_text) >= min_chars)
        .collect()
}

/// True when both sides are confidently detected as the same language.
/// Undetectable text (no letters) is given the benefit of the doubt.
pub fn is_same_language(pair: &AlignedPair, profiles: &[LanguageProfile], margin_threshold: f64) -> bool {
    let (Ok(a), Ok(b)) = (detect(&pair.src_text, profiles), detect(&pair.tgt_text, profiles)) else {
        return false;
    };
    a.lang == b.lang && a.margin >= margin_threshold && b.margin >= margin_threshold
}

/// Splits pairs into (kept, dropped), preserving order in both.
pub fn drop_same_language(
    pairs: Vec<AlignedPair>,
    profiles: &[LanguageProfile],
    margin_threshold: f64,
) -> (Vec<AlignedPair>, Vec<AlignedPair>) {
    let verdicts: Vec<bool> = pairs
        .par_iter()
        .map(|p| is_same_language(p, profiles, margin_threshold))
        .collect();
    let (mut kept, mut dropped) = (Vec::new(), Vec::new());
    for (p, same) in pairs.into_iter().zip(verdicts) {
        if same {
            dropped.push(p);
        } else {
            kept.push(p);
        }
    }
    (kept, dropped)
}

fn below_gate(pair: &AlignedPair, min_score: Option<f64>) -> bool {
    matches!(min_score, Some(min) if pair.provenance == BeadKind::OneOne && pair.score < min)
}

/// Applies the pair-level steps (score gate, short, same language) to pairs
/// that are already aligned.
pub fn filter_pairs(
    pairs: Vec<AlignedPair>,
    cfg: &FilterConfig,
    profiles: &[LanguageProfile],
) -> (Vec<AlignedPair>, FilterReport) {
    let mut report = FilterReport {
        input: pairs.len(),
        ..Default::default()
    };
    finish(pairs, cfg.min_pair_score, cfg, profiles, &mut report)
}

fn finish(
    pairs: Vec<AlignedPair>,
    min_score: Option<f64>,
    cfg: &FilterConfig,
    profiles: &[LanguageProfile],
    report: &mut FilterReport,
) -> (Vec<AlignedPair>, FilterReport) {
    let n = pairs.len();
    let pairs: Vec<AlignedPair> = pairs.into_iter().filter(|p| !below_gate(p, min_score)).collect();
    report.dropped_low_score = n - pairs.len();
    let n = pairs.len();
    let pairs = drop_short(pairs, cfg.min_chars);
    report.dropped_short = n - pairs.len();
    let (kept, dropped) = drop_same_language(pairs, profiles, cfg.margin_threshold);
    report.dropped_same_language = dropped.len();
    report.output = kept.len();
    (kept, *report)
}

/// Runs every cleanup step over a document alignment, in order: unaligned
/// beads, score gate, short sentences, same-language pairs. The score gate
/// only applies when the alignment had a dictionary to score with.
pub fn run_filters(
    alignment: &DocumentAlignment,
    cfg: &FilterConfig,
    profiles: &[LanguageProfile],
) -> (Vec<AlignedPair>, FilterReport) {
    let mut report = FilterReport {
        input: alignment.bead_count(),
        ..Default::default()
    };
    let mut pairs = Vec::new();
    for block in &alignment.blocks {
        let aligned = drop_unaligned(&block.beads);
        report.dropped_unaligned += block.beads.len() - aligned.len();
        pairs.extend(
            aligned
                .iter()
                .filter_map(|b| bead_to_pair(block, b, alignment.pair, &alignment.article_id)),
        );
    }
    let gate = cfg.min_pair_score.filter(|_| alignment.dictionary_size > 0);
    finish(pairs, gate, cfg, profiles, &mut report)
}
