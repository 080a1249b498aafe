//! Two-pass sentence alignment.
//!
//! The first pass is a Gale–Church style dynamic program over sentence
//! lengths. Its 1-1 beads seed a translation dictionary, and a second pass
//! realigns with a cost that rewards dictionary evidence. Large inputs are cut
//! into chunks at confident anchors; parallel paragraphs are aligned pair by
//! pair.
//!
//! The dynamic program runs over suffixes with costs held as fixed-point
//! integers (units of 1e-9), so totals are exact and ties resolve
//! deterministically: lower cost, then more 1-1 beads, then the
//! lexicographically earliest bead sequence in [`BeadKind::ALL`] order.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::docparse::{CompatibilityMode, CompatibilityVerdict};
use crate::error::{Error, Result};
use crate::model::{AlignedPair, Bead, BeadKind, LangPair, Sentence, StructuredDocument};
use crate::segment::{segment_document, Abbreviations, SegmentedDocument};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeadPriors {
    pub one_one: f64,
    pub one_zero: f64,
    pub zero_one: f64,
    pub two_one: f64,
    pub one_two: f64,
    pub two_two: f64,
}

impl Default for BeadPriors {
    fn default() -> Self {
        BeadPriors {
            one_one: 0.89,
            one_zero: 0.0099,
            zero_one: 0.0099,
            two_one: 0.0445,
            one_two: 0.0445,
            two_two: 0.011,
        }
    }
}

impl BeadPriors {
    pub fn get(&self, kind: BeadKind) -> f64 {
        match kind {
            BeadKind::OneOne => self.one_one,
            BeadKind::OneZero => self.one_zero,
            BeadKind::ZeroOne => self.zero_one,
            BeadKind::TwoOne => self.two_one,
            BeadKind::OneTwo => self.one_two,
            BeadKind::TwoTwo => self.two_two,
        }
    }

    pub fn set(&mut self, kind: BeadKind, p: f64) {
        match kind {
            BeadKind::OneOne => self.one_one = p,
            BeadKind::OneZero => self.one_zero = p,
            BeadKind::ZeroOne => self.zero_one = p,
            BeadKind::TwoOne => self.two_one = p,
            BeadKind::OneTwo => self.one_two = p,
            BeadKind::TwoTwo => self.two_two = p,
        }
    }
}

/// Target/source character ratio used by the length model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharRatio {
    Fixed(f64),
    /// Total target characters over total source characters of the input.
    EstimateFromInput,
}

impl CharRatio {
    pub fn resolve(self, src_chars: usize, tgt_chars: usize) -> f64 {
        match self {
            CharRatio::Fixed(c) => c,
            CharRatio::EstimateFromInput if src_chars > 0 && tgt_chars > 0 => tgt_chars as f64 / src_chars as f64,
            CharRatio::EstimateFromInput => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignerConfig {
    pub bead_priors: BeadPriors,
    /// Variance of the length difference per source character.
    pub length_variance: f64,
    pub char_ratio: CharRatio,
    pub dict_weight: f64,
    pub length_weight: f64,
    pub dict_min_count: u32,
    pub dict_min_dice: f64,
    /// Inputs with more sentences than this on either side are chunked.
    pub chunk_limit: usize,
    /// Realigned 1-1 pairs scoring below this are dropped.
    pub min_pair_score: f64,
    /// Half-width, in sentences, of the search band used on large inputs.
    pub band_radius: usize,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        AlignerConfig {
            bead_priors: BeadPriors::default(),
            length_variance: 6.8,
            char_ratio: CharRatio::EstimateFromInput,
            dict_weight: 0.7,
            length_weight: 0.3,
            dict_min_count: 2,
            dict_min_dice: 0.2,
            chunk_limit: 5000,
            min_pair_score: 0.3,
            band_radius: 100,
        }
    }
}

impl AlignerConfig {
    pub fn validate(&self) -> Result<()> {
        let priors: Vec<f64> = BeadKind::ALL.iter().map(|&k| self.bead_priors.get(k)).collect();
        // The customary defaults sum to slightly above 1, so only each prior
        // is bounded.
        if priors.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::validation("bead priors must lie in (0, 1]"));
        }
        if !(self.length_weight > 0.0) || !(self.dict_weight >= 0.0) {
            return Err(Error::validation("length weight must be positive and dictionary weight non-negative"));
        }
        if (self.dict_weight + self.length_weight - 1.0).abs() > 1e-9 {
            return Err(Error::validation("dictionary and length weights must sum to 1"));
        }
        if self.chunk_limit < 100 {
            return Err(Error::validation("chunk_limit must be at least 100"));
        }
        if !(self.length_variance > 0.0) {
            return Err(Error::validation("length variance must be positive"));
        }
        if let CharRatio::Fixed(c) = self.char_ratio {
            if !(c > 0.0) {
                return Err(Error::validation("character ratio must be positive"));
            }
        }
        if self.band_radius == 0 {
            return Err(Error::validation("band_radius must be positive"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Length model

/// Normalized length discrepancy of a bead.
pub fn length_delta(src_len: usize, tgt_len: usize, ratio: f64, variance: f64) -> f64 {
    let (s, t) = (src_len as f64, tgt_len as f64);
    if src_len > 0 {
        (t - s * ratio) / (s * variance).sqrt()
    } else if tgt_len > 0 {
        (t / variance).sqrt()
    } else {
        0.0
    }
}

/// ln(2·(1 − Φ(|x|))), the log two-tailed normal probability.
pub fn log_two_tail(x: f64) -> f64 {
    let z = x.abs() / std::f64::consts::SQRT_2;
    if z < 26.0 {
        erfc(z).ln()
    } else {
        // Asymptotic expansion of erfc; erfc underflows past this point.
        let z2 = z * z;
        -z2 - (z * std::f64::consts::PI.sqrt()).ln() + (1.0 - 0.5 / z2 + 0.75 / (z2 * z2)).ln()
    }
}

/// Gale–Church cost of a bead: −ln prior − ln(2·(1 − Φ(|δ|))).
pub fn length_cost(kind: BeadKind, src_len: usize, tgt_len: usize, ratio: f64, cfg: &AlignerConfig) -> f64 {
    let delta = length_delta(src_len, tgt_len, ratio, cfg.length_variance);
    -cfg.bead_priors.get(kind).ln() - log_two_tail(delta)
}

const MAX_COST: f64 = 1e6;

/// Fixed-point form of a cost, as used by the dynamic program.
pub fn cost_units(cost: f64) -> i64 {
    if cost.is_nan() {
        return (MAX_COST * 1e9) as i64;
    }
    (cost.clamp(-MAX_COST, MAX_COST) * 1e9).round() as i64
}

// ---------------------------------------------------------------------------
// Dynamic program

const FULL_DP_CELLS: usize = 1 << 22;
const UNREACHABLE: i64 = i64::MAX;

struct Row {
    lo: usize,
    cost: Vec<i64>,
    ones: Vec<u32>,
    choice: Vec<u8>,
}

impl Row {
    fn get(&self, j: usize) -> Option<(i64, u32)> {
        let k = j.checked_sub(self.lo)?;
        match self.cost.get(k) {
            Some(&c) if c != UNREACHABLE => Some((c, self.ones[k])),
            _ => None,
        }
    }
}

fn band(i: usize, n: usize, m: usize, radius: usize) -> (usize, usize) {
    if n == 0 {
        return (0, m);
    }
    let center = ((i as u128 * m as u128 + n as u128 / 2) / n as u128) as usize;
    (center.saturating_sub(radius), (center + radius).min(m))
}

/// Minimum-cost monotone bead sequence covering `n` source and `m` target
/// sentences. `cost(kind, i, j)` prices a bead starting at `(i, j)`.
fn solve<F>(n: usize, m: usize, radius: usize, mut cost: F) -> Vec<Bead>
where
    F: FnMut(BeadKind, usize, usize) -> f64,
{
    let full = (n + 1).saturating_mul(m + 1) <= FULL_DP_CELLS;
    let mut radius = if full { n.max(m) } else { radius.max(1) };
    loop {
        if let Some(beads) = solve_band(n, m, radius, &mut cost) {
            return beads;
        }
        // The band was too narrow to connect the corners.
        radius = radius.saturating_mul(2).max(1);
        if radius >= n.max(m) {
            radius = n.max(m);
        }
    }
}

fn solve_band<F>(n: usize, m: usize, radius: usize, cost: &mut F) -> Option<Vec<Bead>>
where
    F: FnMut(BeadKind, usize, usize) -> f64,
{
    let mut rows: Vec<Row> = Vec::with_capacity(n + 1);
    // Rows are built from i = n down to 0; rows[n - i] is row i.
    for i in (0..=n).rev() {
        let (lo, hi) = band(i, n, m, radius);
        let width = hi - lo + 1;
        let mut row = Row {
            lo,
            cost: vec![UNREACHABLE; width],
            ones: vec![0; width],
            choice: vec![u8::MAX; width],
        };
        for j in (lo..=hi).rev() {
            let k = j - lo;
            if i == n && j == m {
                row.cost[k] = 0;
                continue;
            }
            let mut best: Option<(i64, u32, u8)> = None;
            for (kind_idx, &kind) in BeadKind::ALL.iter().enumerate() {
                let (di, dj) = kind.sizes();
                let (ni, nj) = (i + di, j + dj);
                if ni > n || nj > m {
                    continue;
                }
                let next = if di == 0 {
                    row.get(nj)
                } else {
                    rows[n - ni].get(nj)
                };
                let Some((rest, rest_ones)) = next else { continue };
                let total = rest.saturating_add(cost_units(cost(kind, i, j)));
                let ones = rest_ones + u32::from(kind == BeadKind::OneOne);
                let better = match best {
                    None => true,
                    Some((bc, bo, _)) => total < bc || (total == bc && ones > bo),
                };
                if better {
                    best = Some((total, ones, kind_idx as u8));
                }
            }
            if let Some((c, o, ch)) = best {
                row.cost[k] = c;
                row.ones[k] = o;
                row.choice[k] = ch;
            }
        }
        rows.push(row);
    }
    let start = &rows[n];
    start.get(0)?;

    let mut beads = Vec::new();
    let (mut i, mut j) = (0, 0);
    while (i, j) != (n, m) {
        let row = &rows[n - i];
        let kind = BeadKind::ALL[row.choice[j - row.lo] as usize];
        let mut bead = Bead::new(kind, i, j);
        bead.cost = cost(kind, i, j);
        beads.push(bead);
        let (di, dj) = kind.sizes();
        i += di;
        j += dj;
    }
    Some(beads)
}

fn char_lens(sents: &[Sentence]) -> Vec<usize> {
    sents.iter().map(Sentence::char_len).collect()
}

/// Length-only alignment over raw sentence lengths.
pub fn align_lengths_raw(src: &[usize], tgt: &[usize], ratio: f64, cfg: &AlignerConfig) -> Vec<Bead> {
    let prefix = |v: &[usize]| -> Vec<usize> {
        std::iter::once(0)
            .chain(v.iter().scan(0, |acc, &x| {
                *acc += x;
                Some(*acc)
            }))
            .collect()
    };
    let (ps, pt) = (prefix(src), prefix(tgt));
    solve(src.len(), tgt.len(), cfg.band_radius, |kind, i, j| {
        let (di, dj) = kind.sizes();
        length_cost(kind, ps[i + di] - ps[i], pt[j + dj] - pt[j], ratio, cfg)
    })
}

/// First pass: the bead sequence minimizing total [`length_cost`].
pub fn align_lengths(src: &[Sentence], tgt: &[Sentence], cfg: &AlignerConfig) -> Vec<Bead> {
    let ratio = input_ratio(src, tgt, cfg);
    align_lengths_with_ratio(src, tgt, ratio, cfg)
}

fn input_ratio(src: &[Sentence], tgt: &[Sentence], cfg: &AlignerConfig) -> f64 {
    let s: usize = src.iter().map(Sentence::char_len).sum();
    let t: usize = tgt.iter().map(Sentence::char_len).sum();
    cfg.char_ratio.resolve(s, t)
}

fn align_lengths_with_ratio(src: &[Sentence], tgt: &[Sentence], ratio: f64, cfg: &AlignerConfig) -> Vec<Bead> {
    let mut beads = align_lengths_raw(&char_lens(src), &char_lens(tgt), ratio, cfg);
    let scorer = PairScorer::new(src, tgt, &Dictionary::default(), ratio, cfg);
    let mut scratch = Scratch::default();
    for b in &mut beads {
        b.score = scorer.bead_score(b.kind, b.src_start, b.tgt_start, &mut scratch);
    }
    beads
}

// ---------------------------------------------------------------------------
// Dictionary

/// Lowercased alphanumeric runs of at least two characters.
pub fn dictionary_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_string)
        .collect()
}

fn token_set(text: &str) -> Vec<String> {
    let mut t = dictionary_tokens(text);
    t.sort();
    t.dedup();
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictEntry {
    pub count: u32,
    pub dice: f64,
}

/// Token translation pairs with association scores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    entries: BTreeMap<String, BTreeMap<String, DictEntry>>,
    src_counts: BTreeMap<String, u32>,
    tgt_counts: BTreeMap<String, u32>,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, src: &str, tgt: &str) -> Option<DictEntry> {
        self.entries.get(src)?.get(tgt).copied()
    }

    pub fn src_count(&self, token: &str) -> u32 {
        self.src_counts.get(token).copied().unwrap_or(0)
    }

    pub fn tgt_count(&self, token: &str) -> u32 {
        self.tgt_counts.get(token).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, DictEntry)> {
        self.entries
            .iter()
            .flat_map(|(s, m)| m.iter().map(move |(t, e)| (s.as_str(), t.as_str(), *e)))
    }

    /// A dictionary from known translation pairs, each with count 1 and dice 1.
    pub fn from_pairs<I, S, T>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut d = Dictionary::default();
        for (s, t) in pairs {
            let (s, t) = (s.into().to_lowercase(), t.into().to_lowercase());
            if s.is_empty() || t.is_empty() {
                continue;
            }
            *d.src_counts.entry(s.clone()).or_default() += 1;
            *d.tgt_counts.entry(t.clone()).or_default() += 1;
            d.entries
                .entry(s)
                .or_default()
                .insert(t, DictEntry { count: 1, dice: 1.0 });
        }
        d
    }

    /// Reads `src_token<TAB>tgt_token` lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.as_ref().to_path_buf()),
            _ => Error::Io(e),
        })?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('\t') {
                Some((s, t)) => pairs.push((s.trim().to_string(), t.trim().to_string())),
                None => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: "expected src_token<TAB>tgt_token".into(),
                    })
                }
            }
        }
        Ok(Dictionary::from_pairs(pairs))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for (s, t, _) in self.iter() {
            out.push_str(s);
            out.push('\t');
            out.push_str(t);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Induces a dictionary from the 1-1 beads of an alignment.
pub fn build_dictionary(beads: &[Bead], src: &[Sentence], tgt: &[Sentence], cfg: &AlignerConfig) -> Dictionary {
    let mut acc = DictionaryBuilder::default();
    acc.add(beads, src, tgt);
    acc.finish(cfg)
}

/// Accumulates co-occurrence counts over several aligned blocks.
#[derive(Default)]
pub(crate) struct DictionaryBuilder {
    src_vocab: HashMap<String, u32>,
    tgt_vocab: HashMap<String, u32>,
    src_counts: HashMap<u32, u32>,
    tgt_counts: HashMap<u32, u32>,
    pairs: HashMap<(u32, u32), u32>,
}

fn intern(vocab: &mut HashMap<String, u32>, tok: String) -> u32 {
    let next = vocab.len() as u32;
    *vocab.entry(tok).or_insert(next)
}

impl DictionaryBuilder {
    pub(crate) fn add(&mut self, beads: &[Bead], src: &[Sentence], tgt: &[Sentence]) {
        for b in beads.iter().filter(|b| b.kind == BeadKind::OneOne) {
            let s: Vec<u32> = token_set(&src[b.src_start].text)
                .into_iter()
                .map(|t| intern(&mut self.src_vocab, t))
                .collect();
            let t: Vec<u32> = token_set(&tgt[b.tgt_start].text)
                .into_iter()
                .map(|t| intern(&mut self.tgt_vocab, t))
                .collect();
            for &x in &s {
                *self.src_counts.entry(x).or_default() += 1;
            }
            for &y in &t {
                *self.tgt_counts.entry(y).or_default() += 1;
            }
            for &x in &s {
                for &y in &t {
                    *self.pairs.entry((x, y)).or_default() += 1;
                }
            }
        }
    }

    pub(crate) fn finish(self, cfg: &AlignerConfig) -> Dictionary {
        let src_names = invert(&self.src_vocab);
        let tgt_names = invert(&self.tgt_vocab);
        let mut d = Dictionary::default();
        for (&(x, y), &c) in &self.pairs {
            if c < cfg.dict_min_count {
                continue;
            }
            let (cs, ct) = (self.src_counts[&x], self.tgt_counts[&y]);
            let dice = 2.0 * c as f64 / (cs + ct) as f64;
            if dice < cfg.dict_min_dice {
                continue;
            }
            let (s, t) = (src_names[x as usize].clone(), tgt_names[y as usize].clone());
            d.src_counts.insert(s.clone(), cs);
            d.tgt_counts.insert(t.clone(), ct);
            d.entries.entry(s).or_default().insert(t, DictEntry { count: c, dice });
        }
        d
    }
}

fn invert(vocab: &HashMap<String, u32>) -> Vec<String> {
    let mut names = vec![String::new(); vocab.len()];
    for (k, &v) in vocab {
        names[v as usize] = k.clone();
    }
    names
}

// ---------------------------------------------------------------------------
// Combined scoring

/// Share of tokens on both sides that have a dictionary partner on the other
/// side. Both inputs are sorted, deduplicated token lists.
fn dict_component_sets(src: &[String], tgt: &[String], dict: &Dictionary) -> f64 {
    let total = src.len() + tgt.len();
    if total == 0 || dict.is_empty() {
        return 0.0;
    }
    let covered_src = src
        .iter()
        .filter(|s| {
            dict.entries
                .get(*s)
                .is_some_and(|partners| tgt.iter().any(|t| partners.contains_key(t)))
        })
        .count();
    let covered_tgt = tgt
        .iter()
        .filter(|t| src.iter().any(|s| dict.get(s, t).is_some()))
        .count();
    (covered_src + covered_tgt) as f64 / total as f64
}

fn length_component(delta: f64) -> f64 {
    (-delta * delta / 2.0).exp()
}

/// Pair confidence in `[0, 1]`: weighted dictionary coverage plus a Gaussian
/// length agreement term. With [`CharRatio::EstimateFromInput`] a ratio of 1
/// is assumed, since a single pair carries no corpus-level evidence.
pub fn combined_score(src: &str, tgt: &str, dict: &Dictionary, cfg: &AlignerConfig) -> f64 {
    let ratio = match cfg.char_ratio {
        CharRatio::Fixed(c) => c,
        CharRatio::EstimateFromInput => 1.0,
    };
    combined_score_with_ratio(src, tgt, dict, ratio, cfg)
}

pub fn combined_score_with_ratio(src: &str, tgt: &str, dict: &Dictionary, ratio: f64, cfg: &AlignerConfig) -> f64 {
    let (s, t) = (token_set(src), token_set(tgt));
    if s.is_empty() && t.is_empty() {
        return 0.0;
    }
    let delta = length_delta(src.chars().count(), tgt.chars().count(), ratio, cfg.length_variance);
    cfg.dict_weight * dict_component_sets(&s, &t, dict) + cfg.length_weight * length_component(delta)
}

#[derive(Default)]
struct Scratch {
    src: Vec<u32>,
    tgt: Vec<u32>,
}

/// Per-input view of sentences and dictionary with interned tokens.
struct PairScorer<'a> {
    cfg: &'a AlignerConfig,
    ratio: f64,
    src_len: Vec<usize>,
    tgt_len: Vec<usize>,
    src_tok: Vec<Vec<u32>>,
    tgt_tok: Vec<Vec<u32>>,
    /// Partners of each source token id, sorted; likewise for targets.
    src_partners: Vec<Vec<u32>>,
    tgt_partners: Vec<Vec<u32>>,
    has_dict: bool,
}

impl<'a> PairScorer<'a> {
    fn new(src: &[Sentence], tgt: &[Sentence], dict: &Dictionary, ratio: f64, cfg: &'a AlignerConfig) -> Self {
        let mut src_vocab = HashMap::new();
        let mut tgt_vocab = HashMap::new();
        let src_tok: Vec<Vec<u32>> = src
            .iter()
            .map(|s| token_set(&s.text).into_iter().map(|t| intern(&mut src_vocab, t)).collect())
            .collect();
        let tgt_tok: Vec<Vec<u32>> = tgt
            .iter()
            .map(|s| token_set(&s.text).into_iter().map(|t| intern(&mut tgt_vocab, t)).collect())
            .collect();
        let mut src_partners = vec![Vec::new(); src_vocab.len()];
        let mut tgt_partners = vec![Vec::new(); tgt_vocab.len()];
        let mut has_dict = false;
        if !dict.is_empty() {
            for (s, &sid) in &src_vocab {
                if let Some(partners) = dict.entries.get(s) {
                    for t in partners.keys() {
                        if let Some(&tid) = tgt_vocab.get(t) {
                            src_partners[sid as usize].push(tid);
                            tgt_partners[tid as usize].push(sid);
                            has_dict = true;
                        }
                    }
                }
            }
            src_partners.iter_mut().for_each(|v| v.sort_unstable());
            tgt_partners.iter_mut().for_each(|v| v.sort_unstable());
        }
        // Token ids were assigned in first-seen order; sort per sentence.
        let sort_all = |v: Vec<Vec<u32>>| -> Vec<Vec<u32>> {
            v.into_iter()
                .map(|mut s| {
                    s.sort_unstable();
                    s
                })
                .collect()
        };
        PairScorer {
            cfg,
            ratio,
            src_len: char_lens(src),
            tgt_len: char_lens(tgt),
            src_tok: sort_all(src_tok),
            tgt_tok: sort_all(tgt_tok),
            src_partners,
            tgt_partners,
            has_dict,
        }
    }

    fn lens(&self, kind: BeadKind, i: usize, j: usize) -> (usize, usize) {
        let (di, dj) = kind.sizes();
        (
            self.src_len[i..i + di].iter().sum(),
            self.tgt_len[j..j + dj].iter().sum(),
        )
    }

    fn fill(out: &mut Vec<u32>, sets: &[Vec<u32>]) {
        out.clear();
        for s in sets {
            out.extend_from_slice(s);
        }
        out.sort_unstable();
        out.dedup();
    }

    fn dict_component(&self, kind: BeadKind, i: usize, j: usize, scratch: &mut Scratch) -> f64 {
        let (di, dj) = kind.sizes();
        Self::fill(&mut scratch.src, &self.src_tok[i..i + di]);
        Self::fill(&mut scratch.tgt, &self.tgt_tok[j..j + dj]);
        let total = scratch.src.len() + scratch.tgt.len();
        if !self.has_dict || total == 0 || scratch.src.is_empty() || scratch.tgt.is_empty() {
            return 0.0;
        }
        let covered = |tokens: &[u32], partners: &[Vec<u32>], other: &[u32]| {
            tokens
                .iter()
                .filter(|&&x| intersects(&partners[x as usize], other))
                .count()
        };
        let c = covered(&scratch.src, &self.src_partners, &scratch.tgt)
            + covered(&scratch.tgt, &self.tgt_partners, &scratch.src);
        c as f64 / total as f64
    }

    /// Second-pass cost. Reduces to [`length_cost`] when no dictionary
    /// evidence applies; otherwise the length probability is blended with
    /// dictionary coverage using the configured weights.
    fn realign_cost(&self, kind: BeadKind, i: usize, j: usize, scratch: &mut Scratch) -> f64 {
        let (sl, tl) = self.lens(kind, i, j);
        let dict = self.dict_component(kind, i, j, scratch);
        if dict == 0.0 {
            return length_cost(kind, sl, tl, self.ratio, self.cfg);
        }
        let cfg = self.cfg;
        let delta = length_delta(sl, tl, self.ratio, cfg.length_variance);
        let ln_len = cfg.length_weight.ln() + log_two_tail(delta);
        let ln_dict = (cfg.dict_weight * dict).ln();
        let (hi, lo) = if ln_len > ln_dict { (ln_len, ln_dict) } else { (ln_dict, ln_len) };
        let ln_score = hi + (lo - hi).exp().ln_1p();
        -cfg.bead_priors.get(kind).ln() - ln_score + cfg.length_weight.ln()
    }

    fn bead_score(&self, kind: BeadKind, i: usize, j: usize, scratch: &mut Scratch) -> f64 {
        let (sl, tl) = self.lens(kind, i, j);
        let dict = self.dict_component(kind, i, j, scratch);
        if scratch.src.is_empty() && scratch.tgt.is_empty() {
            return 0.0;
        }
        let delta = length_delta(sl, tl, self.ratio, self.cfg.length_variance);
        self.cfg.dict_weight * dict + self.cfg.length_weight * length_component(delta)
    }
}

fn intersects(a: &[u32], b: &[u32]) -> bool {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if small.is_empty() {
        return false;
    }
    if small.len() * 8 < large.len() {
        return small.iter().any(|x| large.binary_search(x).is_ok());
    }
    let (mut p, mut q) = (0, 0);
    while p < small.len() && q < large.len() {
        match small[p].cmp(&large[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Second pass: realigns with dictionary evidence. An empty dictionary gives
/// exactly the [`align_lengths`] result.
pub fn realign(src: &[Sentence], tgt: &[Sentence], dict: &Dictionary, cfg: &AlignerConfig) -> Vec<Bead> {
    let ratio = input_ratio(src, tgt, cfg);
    realign_with_ratio(src, tgt, dict, ratio, cfg)
}

fn realign_with_ratio(src: &[Sentence], tgt: &[Sentence], dict: &Dictionary, ratio: f64, cfg: &AlignerConfig) -> Vec<Bead> {
    let scorer = PairScorer::new(src, tgt, dict, ratio, cfg);
    let mut scratch = Scratch::default();
    let mut beads = solve(src.len(), tgt.len(), cfg.band_radius, |kind, i, j| {
        scorer.realign_cost(kind, i, j, &mut scratch)
    });
    for b in &mut beads {
        b.score = scorer.bead_score(b.kind, b.src_start, b.tgt_start, &mut scratch);
    }
    beads
}

/// Result of a full two-pass run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPass {
    pub first: Vec<Bead>,
    pub dictionary: Dictionary,
    pub second: Vec<Bead>,
}

/// Length pass, dictionary induction, then realignment.
pub fn align_two_pass(src: &[Sentence], tgt: &[Sentence], cfg: &AlignerConfig) -> TwoPass {
    let ratio = input_ratio(src, tgt, cfg);
    let first = align_lengths_with_ratio(src, tgt, ratio, cfg);
    let dictionary = build_dictionary(&first, src, tgt, cfg);
    let second = realign_with_ratio(src, tgt, &dictionary, ratio, cfg);
    TwoPass {
        first,
        dictionary,
        second,
    }
}

// ---------------------------------------------------------------------------
// Chunking

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkedAlignment {
    pub beads: Vec<Bead>,
    /// (source, target) start of every chunk after the first.
    pub cuts: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

/// Aligns inputs of any size: two-pass directly when both sides fit within
/// `chunk_limit`, otherwise split at anchors and aligned chunk by chunk.
pub fn chunk_align(src: &[Sentence], tgt: &[Sentence], cfg: &AlignerConfig) -> ChunkedAlignment {
    let (n, m) = (src.len(), tgt.len());
    if n.max(m) <= cfg.chunk_limit {
        return ChunkedAlignment {
            beads: align_two_pass(src, tgt, cfg).second,
            cuts: Vec::new(),
            warnings: Vec::new(),
        };
    }
    let ratio = input_ratio(src, tgt, cfg);
    let coarse = align_lengths_raw(&char_lens(src), &char_lens(tgt), ratio, cfg);
    let anchor_limit = -cfg.bead_priors.one_one.ln() - log_two_tail(1.0);
    let window = (cfg.chunk_limit / 10).max(1);

    let (mut cuts, mut warnings) = (Vec::new(), Vec::new());
    let mut last = (0usize, 0usize);
    let mut boundary = cfg.chunk_limit;
    let long_side_is_src = n >= m;
    while boundary < n.max(m) {
        let pos = |b: &Bead| if long_side_is_src { b.src_start } else { b.tgt_start };
        let anchor = coarse
            .iter()
            .filter(|b| b.kind == BeadKind::OneOne && b.cost <= anchor_limit)
            .filter(|b| pos(b).abs_diff(boundary) <= window)
            .filter(|b| b.src_start >= last.0 && b.tgt_start >= last.1)
            .min_by(|a, b| {
                cost_units(a.cost)
                    .cmp(&cost_units(b.cost))
                    .then(pos(a).abs_diff(boundary).cmp(&pos(b).abs_diff(boundary)))
                    .then(pos(a).cmp(&pos(b)))
            });
        let cut = match anchor {
            Some(b) => (b.src_start + 1, b.tgt_start + 1),
            None => {
                let (s, t) = if long_side_is_src {
                    (boundary, ((boundary as u128 * m as u128) / n as u128) as usize)
                } else {
                    (((boundary as u128 * n as u128) / m as u128) as usize, boundary)
                };
                warnings.push(format!(
                    "no anchor within {window} sentences of boundary {boundary}; hard split at ({s}, {t})"
                ));
                log::warn!("{}", warnings.last().unwrap());
                (s, t)
            }
        };
        if cut.0 > last.0 && cut.1 > last.1 && cut.0 < n && cut.1 < m {
            cuts.push(cut);
            last = cut;
        }
        boundary += cfg.chunk_limit;
    }

    let mut edges = vec![(0, 0)];
    edges.extend(cuts.iter().copied());
    edges.push((n, m));
    let pieces: Vec<Vec<Bead>> = edges
        .par_windows(2)
        .map(|w| {
            let ((s0, t0), (s1, t1)) = (w[0], w[1]);
            align_two_pass(&src[s0..s1], &tgt[t0..t1], cfg)
                .second
                .into_iter()
                .map(|mut b| {
                    b.src_start += s0;
                    b.tgt_start += t0;
                    b
                })
                .collect()
        })
        .collect();
    ChunkedAlignment {
        beads: pieces.into_iter().flatten().collect(),
        cuts,
        warnings,
    }
}

// ---------------------------------------------------------------------------
// Documents

/// One aligner input: a paragraph pair, or a whole document pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedBlock {
    pub src: Vec<Sentence>,
    pub tgt: Vec<Sentence>,
    pub beads: Vec<Bead>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockMode {
    /// Parallel paragraphs aligned pair by pair.
    Paragraph,
    /// All sentences aligned together.
    Document,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentAlignment {
    pub article_id: String,
    pub pair: LangPair,
    pub mode: BlockMode,
    pub blocks: Vec<AlignedBlock>,
    /// Entries in the dictionary used for the second pass.
    pub dictionary_size: usize,
}

impl DocumentAlignment {
    pub fn bead_count(&self) -> usize {
        self.blocks.iter().map(|b| b.beads.len()).sum()
    }
}

#[derive(Debug, Clone, Default)]
pub struct AlignOptions {
    pub abbreviations: Abbreviations,
    /// Pre-supplied dictionary; when present the length pass is skipped.
    pub dictionary: Option<Dictionary>,
    /// Align incompatible documents as a whole instead of rejecting them.
    pub document_fallback: bool,
}

/// Aligns two segmented versions of one article.
pub fn align_segmented(
    src: &SegmentedDocument,
    tgt: &SegmentedDocument,
    verdict: &CompatibilityVerdict,
    cfg: &AlignerConfig,
    opts: &AlignOptions,
) -> Result<DocumentAlignment> {
    let pair = LangPair::new(src.lang, tgt.lang)?;
    let paragraph_mode = match verdict.mode {
        CompatibilityMode::Structured | CompatibilityMode::Flat => src.paragraphs.len() == tgt.paragraphs.len(),
        CompatibilityMode::Incompatible => false,
    };
    if verdict.mode == CompatibilityMode::Incompatible && !opts.document_fallback {
        return Err(Error::IncompatibleStructure);
    }

    let (mode, mut blocks): (BlockMode, Vec<AlignedBlock>) = if paragraph_mode {
        let blocks = src
            .paragraphs
            .iter()
            .zip(&tgt.paragraphs)
            .map(|(a, b)| AlignedBlock {
                src: a.sentences.clone(),
                tgt: b.sentences.clone(),
                beads: Vec::new(),
            })
            .collect();
        (BlockMode::Paragraph, blocks)
    } else {
        let block = AlignedBlock {
            src: src.sentences().cloned().collect(),
            tgt: tgt.sentences().cloned().collect(),
            beads: Vec::new(),
        };
        (BlockMode::Document, vec![block])
    };

    // One ratio for the whole document, so short paragraphs are judged
    // against document-level evidence.
    let s_chars: usize = src.sentences().map(Sentence::char_len).sum();
    let t_chars: usize = tgt.sentences().map(Sentence::char_len).sum();
    let ratio = cfg.char_ratio.resolve(s_chars, t_chars);

    let dictionary = match &opts.dictionary {
        Some(d) => d.clone(),
        None => {
            let mut builder = DictionaryBuilder::default();
            for b in &blocks {
                let first = if b.src.len().max(b.tgt.len()) > cfg.chunk_limit {
                    align_lengths_raw(&char_lens(&b.src), &char_lens(&b.tgt), ratio, cfg)
                } else {
                    align_lengths_with_ratio(&b.src, &b.tgt, ratio, cfg)
                };
                builder.add(&first, &b.src, &b.tgt);
            }
            builder.finish(cfg)
        }
    };

    for b in &mut blocks {
        b.beads = if b.src.len().max(b.tgt.len()) > cfg.chunk_limit {
            chunk_align(&b.src, &b.tgt, cfg).beads
        } else {
            realign_with_ratio(&b.src, &b.tgt, &dictionary, ratio, cfg)
        };
    }

    Ok(DocumentAlignment {
        article_id: src.article_id.clone(),
        pair,
        mode,
        blocks,
        dictionary_size: dictionary.len(),
    })
}

/// Merges a bead's sentences into a pair. Returns `None` for 1-0 and 0-1 beads.
pub fn bead_to_pair(block: &AlignedBlock, bead: &Bead, pair: LangPair, article_id: &str) -> Option<AlignedPair> {
    if bead.kind.is_unaligned() {
        return None;
    }
    let src = &block.src[bead.src_range()];
    let tgt = &block.tgt[bead.tgt_range()];
    let join = |s: &[Sentence]| s.iter().map(|x| x.text.as_str()).collect::<Vec<_>>().join(" ");
    Some(AlignedPair {
        src_lang: pair.src,
        tgt_lang: pair.tgt,
        src_text: join(src),
        tgt_text: join(tgt),
        article_id: article_id.to_string(),
        score: bead.score,
        provenance: bead.kind,
        src_positions: src.iter().map(|s| s.doc_ref.pos).collect(),
        tgt_positions: tgt.iter().map(|s| s.doc_ref.pos).collect(),
    })
}

/// True when a realigned 1-1 pair falls below the confidence gate. The gate
/// only applies when a dictionary was available to score pairs.
pub fn below_score_gate(alignment: &DocumentAlignment, bead: &Bead, cfg: &AlignerConfig) -> bool {
    alignment.dictionary_size > 0 && bead.kind == BeadKind::OneOne && bead.score < cfg.min_pair_score
}

/// Segments, aligns and converts one article's language pair to aligned pairs.
pub fn align_document(
    article_id: &str,
    a: &StructuredDocument,
    b: &StructuredDocument,
    verdict: &CompatibilityVerdict,
    cfg: &AlignerConfig,
    opts: &AlignOptions,
) -> Result<Vec<AlignedPair>> {
    let sa = segment_document(a, article_id, &opts.abbreviations);
    let sb = segment_document(b, article_id, &opts.abbreviations);
    let alignment = align_segmented(&sa, &sb, verdict, cfg, opts)?;
    Ok(alignment_pairs(&alignment, cfg))
}

/// All kept pairs of an alignment, in order.
pub fn alignment_pairs(alignment: &DocumentAlignment, cfg: &AlignerConfig) -> Vec<AlignedPair> {
    alignment
        .blocks
        .iter()
        .flat_map(|block| {
            block
                .beads
                .iter()
                .filter(|b| !below_score_gate(alignment, b, cfg))
                .filter_map(|b| bead_to_pair(block, b, alignment.pair, &alignment.article_id))
        })
        .collect()
}
