//! Corpus statistics, train/tune/test splits, BLEU, plain-text export and
//! manual review sheets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AlignedPair, Lang, LangPair, TrilingualUnit};

// ---------------------------------------------------------------------------
// Tokens and statistics

/// Splits off every character that is neither alphanumeric nor whitespace,
/// except a '.' or ',' between two digits, then splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, tokens: &mut Vec<String>| {
        if !cur.is_empty() {
            tokens.push(std::mem::take(cur));
        }
    };
    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            flush(&mut cur, &mut tokens);
        } else if c.is_alphanumeric() {
            cur.push(c);
        } else {
            let numeric = (c == '.' || c == ',')
                && i > 0
                && chars[i - 1].is_ascii_digit()
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
            if numeric {
                cur.push(c);
            } else {
                flush(&mut cur, &mut tokens);
                tokens.push(c.to_string());
            }
        }
    }
    flush(&mut cur, &mut tokens);
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Languages in column order.
    pub langs: Vec<Lang>,
    pub docs: usize,
    pub sents: usize,
    pub tokens: Vec<usize>,
}

impl CorpusStats {
    pub fn label(&self) -> String {
        self.langs
            .iter()
            .map(|l| l.code().to_uppercase())
            .collect::<Vec<_>>()
            .join("-")
    }

    /// A Markdown table row: `| EN-ES | 2,029 | 177,781 | 5.2M / 5.7M |`.
    pub fn table_row(&self) -> String {
        let tokens: Vec<String> = self.tokens.iter().map(|&t| format_count(t)).collect();
        format!(
            "| {} | {} | {} | {} |",
            self.label(),
            format_count(self.docs),
            format_count(self.sents),
            tokens.join(" / ")
        )
    }
}

pub const TABLE_HEADER: &str = "| Pair | Docs | Sents | Tokens |\n|---|---|---|---|";

/// Millions with one decimal from 1M up, otherwise comma-grouped digits.
pub fn format_count(n: usize) -> String {
    if n >= 1_000_000 {
        return format!("{:.1}M", n as f64 / 1e6);
    }
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Statistics of a bilingual pair set, oriented as `pair`.
pub fn corpus_stats(pairs: &[AlignedPair], pair: LangPair) -> CorpusStats {
    let docs: BTreeSet<&str> = pairs.iter().map(|p| p.article_id.as_str()).collect();
    let mut tokens = vec![0; 2];
    for p in pairs {
        for (k, lang) in [pair.src, pair.tgt].into_iter().enumerate() {
            if let Some((text, _)) = p.side(lang) {
                tokens[k] += tokenize(text).len();
            }
        }
    }
    CorpusStats {
        langs: vec![pair.src, pair.tgt],
        docs: docs.len(),
        sents: pairs.len(),
        tokens,
    }
}

pub fn trilingual_stats(units: &[TrilingualUnit]) -> CorpusStats {
    let docs: BTreeSet<&str> = units.iter().map(|u| u.article_id.as_str()).collect();
    let langs = vec![Lang::En, Lang::Pt, Lang::Es];
    let tokens = langs
        .iter()
        .map(|l| {
            units
                .iter()
                .filter_map(|u| u.texts.get(l))
                .map(|t| tokenize(t).len())
                .sum()
        })
        .collect();
    CorpusStats {
        langs,
        docs: docs.len(),
        sents: units.len(),
        tokens,
    }
}

// ---------------------------------------------------------------------------
// Splits

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub tune: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.85,
            tune: 0.05,
            test: 0.10,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.tune, self.test];
        if parts.iter().any(|&r| !(r > 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatios);
        }
        Ok(())
    }

    /// Part sizes for `n` items by largest remainder. Equal remainders favour
    /// train, then tune, so every part is within one item of its exact share.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let exact = [self.train, self.tune, self.test].map(|r| r * n as f64);
        let mut sizes = exact.map(|x| x.floor() as usize);
        let mut left = n.saturating_sub(sizes.iter().sum());
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for &k in order.iter().cycle() {
            if left == 0 {
                break;
            }
            sizes[k] += 1;
            left -= 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult<T> {
    pub train: Vec<T>,
    pub tune: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
}

/// Shuffles under `seed` and cuts into train, tune and test.
pub fn split_corpus<T: Clone>(items: &[T], ratios: SplitRatios, seed: u64) -> Result<SplitResult<T>> {
    ratios.validate()?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let [n_train, n_tune, _] = ratios.sizes(items.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok(SplitResult {
        train: pick(&order[..n_train]),
        tune: pick(&order[n_train..n_train + n_tune]),
        test: pick(&order[n_train + n_tune..]),
        seed,
    })
}

// ---------------------------------------------------------------------------
// BLEU

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BleuOptions {
    pub max_n: usize,
    pub lowercase: bool,
}

impl Default for BleuOptions {
    fn default() -> Self {
        BleuOptions {
            max_n: 4,
            lowercase: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    /// In [0, 100].
    pub bleu: f64,
    pub precisions: Vec<f64>,
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub brevity_penalty: f64,
    pub candidate_length: usize,
    pub reference_length: usize,
}

impl fmt::Display for BleuReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<String> = self.precisions.iter().map(|p| format!("{:.1}", 100.0 * p)).collect();
        let ratio = if self.reference_length > 0 {
            self.candidate_length as f64 / self.reference_length as f64
        } else {
            0.0
        };
        write!(
            f,
            "BLEU = {:.2}, {} (BP={:.3}, ratio={:.3}, hyp_len={}, ref_len={})",
            self.bleu,
            ps.join("/"),
            self.brevity_penalty,
            ratio,
            self.candidate_length,
            self.reference_length
        )
    }
}

fn ngram_counts<'a>(tokens: &'a [String], n: usize) -> HashMap<&'a [String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *m.entry(g).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus-level BLEU with clipped n-gram counts, one reference per
/// candidate and no smoothing.
pub fn bleu(candidates: &[Vec<String>], references: &[Vec<String>], opts: BleuOptions) -> Result<BleuReport> {
    if candidates.len() != references.len() {
        return Err(Error::InputMismatch(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::InputMismatch("no candidates".into()));
    }
    if opts.max_n == 0 {
        return Err(Error::validation("max_n must be positive"));
    }
    let fold = |v: &Vec<String>| -> Vec<String> {
        if opts.lowercase {
            v.iter().map(|t| t.to_lowercase()).collect()
        } else {
            v.clone()
        }
    };
    let mut matches = vec![0usize; opts.max_n];
    let mut totals = vec![0usize; opts.max_n];
    let (mut c_len, mut r_len) = (0, 0);
    for (cand, refr) in candidates.iter().zip(references) {
        let (cand, refr) = (fold(cand), fold(refr));
        c_len += cand.len();
        r_len += refr.len();
        for n in 1..=opts.max_n {
            let rc = ngram_counts(&refr, n);
            for (g, c) in ngram_counts(&cand, n) {
                matches[n - 1] += c.min(rc.get(g).copied().unwrap_or(0));
            }
            totals[n - 1] += cand.len().saturating_sub(n - 1);
        }
    }
    let precisions: Vec<f64> = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    let brevity_penalty = if c_len == 0 {
        0.0
    } else if c_len < r_len {
        (1.0 - r_len as f64 / c_len as f64).exp()
    } else {
        1.0
    };
    let bleu = if precisions.iter().any(|&p| p == 0.0) {
        0.0
    } else {
        let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / opts.max_n as f64;
        100.0 * brevity_penalty * mean_log.exp()
    };
    Ok(BleuReport {
        bleu,
        precisions,
        matches,
        totals,
        brevity_penalty,
        candidate_length: c_len,
        reference_length: r_len,
    })
}

/// BLEU over two texts with one sentence per line.
pub fn bleu_text(candidate: &str, reference: &str, opts: BleuOptions) -> Result<BleuReport> {
    let lines = |t: &str| t.lines().map(tokenize).collect::<Vec<_>>();
    bleu(&lines(candidate), &lines(reference), opts)
}

// ---------------------------------------------------------------------------
// Plain-text export

fn check_line(text: &str, what: &str, i: usize) -> Result<()> {
    if text.trim().is_empty() || text.contains('\n') || text.contains('\r') {
        return Err(Error::validation(format!(
            "{what} text of pair {} is empty or spans several lines",
            i + 1
        )));
    }
    Ok(())
}

/// Writes the two sides of `pairs` to parallel one-sentence-per-line files.
/// Nothing is written if any line would be empty.
pub fn export_parallel_text(pairs: &[AlignedPair], src_path: impl AsRef<Path>, tgt_path: impl AsRef<Path>) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (i, p) in pairs.iter().enumerate() {
        check_line(&p.src_text, "source", i)?;
        check_line(&p.tgt_text, "target", i)?;
    }
    let mut src = BufWriter::new(fs::File::create(src_path)?);
    let mut tgt = BufWriter::new(fs::File::create(tgt_path)?);
    for p in pairs {
        writeln!(src, "{}", p.src_text)?;
        writeln!(tgt, "{}", p.tgt_text)?;
    }
    src.flush()?;
    tgt.flush()?;
    Ok(())
}

pub fn read_parallel_text(src_path: impl AsRef<Path>, tgt_path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let read = |p: &Path| {
        fs::read_to_string(p).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(p.to_path_buf()),
            _ => Error::Io(e),
        })
    };
    let src = read(src_path.as_ref())?;
    let tgt = read(tgt_path.as_ref())?;
    let (s, t): (Vec<&str>, Vec<&str>) = (src.lines().collect(), tgt.lines().collect());
    if s.len() != t.len() {
        return Err(Error::InputMismatch(format!("{} source lines but {} target lines", s.len(), t.len())));
    }
    Ok(s.into_iter().zip(t).map(|(a, b)| (a.to_string(), b.to_string())).collect())
}

// ---------------------------------------------------------------------------
// Manual review

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    NoAlignment,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Correct => "correct",
            Verdict::NoAlignment => "no_alignment",
        }
    }
}

impl std::str::FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "correct" => Ok(Verdict::Correct),
            "no_alignment" => Ok(Verdict::NoAlignment),
            other => Err(Error::validation(format!(
                "verdict must be \"correct\" or \"no_alignment\", got {other:?}"
            ))),
        }
    }
}

/// A named collection of aligned items eligible for review.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewSet {
    pub name: String,
    pub items: Vec<Vec<String>>,
}

impl ReviewSet {
    pub fn from_pairs(name: impl Into<String>, pairs: &[AlignedPair]) -> Self {
        ReviewSet {
            name: name.into(),
            items: pairs.iter().map(|p| vec![p.src_text.clone(), p.tgt_text.clone()]).collect(),
        }
    }

    pub fn from_units(name: impl Into<String>, units: &[TrilingualUnit]) -> Self {
        ReviewSet {
            name: name.into(),
            items: units.iter().map(|u| u.texts.values().cloned().collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRow {
    pub id: String,
    pub set: String,
    pub texts: Vec<String>,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewSheet {
    pub rows: Vec<ReviewRow>,
    /// (set, requested, available) for sets smaller than requested.
    pub shortfalls: Vec<(String, usize, usize)>,
}

/// Draws up to `n_per_set` items from each set, uniformly without
/// replacement. Item ids are `<set>#<index in set>`.
pub fn sample_for_review(sets: &[ReviewSet], n_per_set: usize, seed: u64) -> ReviewSheet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sheet = ReviewSheet::default();
    for set in sets {
        let available = set.items.len();
        if available < n_per_set {
            sheet.shortfalls.push((set.name.clone(), n_per_set, available));
        }
        let mut picked = index::sample(&mut rng, available, n_per_set.min(available)).into_vec();
        picked.sort_unstable();
        for i in picked {
            sheet.rows.push(ReviewRow {
                id: format!("{}#{i}", set.name),
                set: set.name.clone(),
                texts: set.items[i].clone(),
                verdict: None,
            });
        }
    }
    sheet
}

const REVIEW_HEADER: &str = "id\tset\ttexts\tverdict";

fn clean_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

impl ReviewSheet {
    /// Tab-separated: id, set, one column per text, verdict (empty when
    /// unreviewed). The first line is a header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(REVIEW_HEADER);
        out.push('\n');
        for r in &self.rows {
            let mut cols = vec![clean_field(&r.id), clean_field(&r.set)];
            cols.extend(r.texts.iter().map(|t| clean_field(t)));
            cols.push(r.verdict.map(Verdict::as_str).unwrap_or("").to_string());
            out.push_str(&cols.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut ids = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || (i == 0 && line.starts_with("id\tset\t")) {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 5 {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected at least 5 columns, found {}", cols.len()),
                });
            }
            let verdict_col = cols[cols.len() - 1].trim();
            let verdict = if verdict_col.is_empty() {
                None
            } else {
                Some(verdict_col.parse::<Verdict>().map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?)
            };
            if !ids.insert(cols[0].to_string()) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate id {}", cols[0]),
                });
            }
            rows.push(ReviewRow {
                id: cols[0].to_string(),
                set: cols[1].to_string(),
                texts: cols[2..cols.len() - 1].iter().map(|s| s.to_string()).collect(),
                verdict,
            });
        }
        Ok(ReviewSheet {
            rows,
            shortfalls: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::parse_tsv(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetAccuracy {
    pub set: String,
    pub correct: usize,
    pub total: usize,
}

impl SetAccuracy {
    pub fn rate(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    /// The rate rounded half-up to four decimals, computed exactly.
    pub fn rendered(&self) -> String {
        let scaled = (self.correct as u128 * 20_000 + self.total as u128) / (2 * self.total as u128);
        format!("{}.{:04}", scaled / 10_000, scaled % 10_000)
    }
}

/// Per-set share of items marked correct, in order of first appearance.
pub fn review_accuracy(sheet: &ReviewSheet) -> Result<Vec<SetAccuracy>> {
    let missing: Vec<String> = sheet
        .rows
        .iter()
        .filter(|r| r.verdict.is_none())
        .map(|r| r.id.clone())
        .collect();
    if sheet.rows.is_empty() || !missing.is_empty() {
        return Err(Error::IncompleteReview(missing));
    }
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in &sheet.rows {
        let e = acc.entry(r.set.clone()).or_insert_with(|| {
            order.push(r.set.clone());
            (0, 0)
        });
        e.1 += 1;
        if r.verdict == Some(Verdict::Correct) {
            e.0 += 1;
        }
    }
    Ok(order
        .into_iter()
        .map(|set| {
            let (correct, total) = acc[&set];
            SetAccuracy { set, correct, total }
        })
        .collect())
}
