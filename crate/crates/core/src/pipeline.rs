//! End-to-end corpus construction: ingest, parse, align, filter, trilingual
//! join, TMX export and statistics. Each stage is a plain function so the
//! command-line tool can run stages one at a time or all together with the
//! same results.
//!
//! Configuration files are flat `key=value` text; `#` starts a comment.
//! Recognised keys:
//!
//! | key | meaning |
//! |---|---|
//! | `store` | article store path |
//! | `pairs` | comma-separated language pairs, e.g. `en-pt,en-es` |
//! | `out` | output directory |
//! | `seed` | random seed for splits and review samples |
//! | `pivot` | pivot language of the trilingual join |
//! | `prior.1-1` … `prior.2-2` | bead priors |
//! | `length_variance` | variance of the length model |
//! | `char_ratio` | `estimate` or a fixed target/source ratio |
//! | `dict_weight`, `length_weight` | second-pass score weights |
//! | `dict_min_count`, `dict_min_dice` | dictionary induction thresholds |
//! | `chunk_limit`, `band_radius` | large-document handling |
//! | `min_pair_score` | 1-1 score gate, or `none` |
//! | `min_chars`, `margin_threshold` | filter thresholds |
//! | `document_fallback` | align incompatible articles as a whole |

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::align::{align_segmented, AlignOptions, AlignerConfig, CharRatio, Dictionary, DocumentAlignment};
use crate::docparse::{check_compatibility, parse_html};
use crate::error::{Error, Result};
use crate::evalkit::{corpus_stats, trilingual_stats, CorpusStats, TABLE_HEADER};
use crate::filter::{run_filters, FilterConfig, FilterReport};
use crate::ingest::{ingest_all, load_manifest, IngestReport};
use crate::langid::LanguageProfile;
use crate::model::{AlignedPair, ArticleMetadata, ArticleRecord, BeadKind, Lang, LangPair, StructuredDocument, TrilingualUnit};
use crate::segment::{segment_document, Abbreviations};
use crate::store::load_all;
use crate::tmx::{read_tmx, write_tmx, TmxCorpus};
use crate::trilingual::join_trilingual;

pub const DEFAULT_SEED: u64 = 42;
pub const STORE_ENV: &str = "BITEXT_STORE";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub store: PathBuf,
    pub pairs: Vec<LangPair>,
    pub aligner: AlignerConfig,
    pub filter: FilterConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub pivot: Lang,
    pub document_fallback: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            store: std::env::var_os(STORE_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("store.jsonl")),
            pairs: vec![
                LangPair { src: Lang::En, tgt: Lang::Pt },
                LangPair { src: Lang::En, tgt: Lang::Es },
                LangPair { src: Lang::Pt, tgt: Lang::Es },
            ],
            aligner: AlignerConfig::default(),
            filter: FilterConfig::default(),
            out_dir: PathBuf::from("out"),
            seed: DEFAULT_SEED,
            pivot: Lang::En,
            document_fallback: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::validation(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::validation(format!("bad value {value:?} for {key}"))),
    }
}

impl PipelineConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let a = &mut self.aligner;
        match key {
            "store" => self.store = PathBuf::from(value.trim()),
            "out" => self.out_dir = PathBuf::from(value.trim()),
            "pairs" => {
                self.pairs = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?
            }
            "seed" => self.seed = parse_value(key, value)?,
            "pivot" => self.pivot = value.parse()?,
            "length_variance" => a.length_variance = parse_value(key, value)?,
            "char_ratio" => {
                a.char_ratio = match value.trim() {
                    "estimate" => CharRatio::EstimateFromInput,
                    v => CharRatio::Fixed(parse_value(key, v)?),
                }
            }
            "dict_weight" => a.dict_weight = parse_value(key, value)?,
            "length_weight" => a.length_weight = parse_value(key, value)?,
            "dict_min_count" => a.dict_min_count = parse_value(key, value)?,
            "dict_min_dice" => a.dict_min_dice = parse_value(key, value)?,
            "chunk_limit" => a.chunk_limit = parse_value(key, value)?,
            "band_radius" => a.band_radius = parse_value(key, value)?,
            "min_pair_score" => {
                if value.trim() == "none" {
                    self.filter.min_pair_score = None;
                } else {
                    let v: f64 = parse_value(key, value)?;
                    a.min_pair_score = v;
                    self.filter.min_pair_score = Some(v);
                }
            }
            "min_chars" => self.filter.min_chars = parse_value(key, value)?,
            "margin_threshold" => self.filter.margin_threshold = parse_value(key, value)?,
            "document_fallback" => self.document_fallback = parse_bool(key, value)?,
            _ => match key.strip_prefix("prior.") {
                Some(kind) => {
                    let kind: BeadKind = kind.parse()?;
                    a.bead_priors.set(kind, parse_value(key, value)?);
                }
                None => return Err(Error::validation(format!("unknown configuration key {key:?}"))),
            },
        }
        Ok(())
    }

    /// Applies every setting of a `key=value` file.
    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = read_text(path)?;
        for (line, key, value) in parse_kv(&text)? {
            self.set(&key, &value).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.aligner.validate()?;
        if self.pairs.is_empty() {
            return Err(Error::validation("no language pairs selected"));
        }
        Ok(())
    }

    pub fn align_options(&self) -> AlignOptions {
        AlignOptions {
            abbreviations: Abbreviations::builtin(),
            dictionary: None,
            document_fallback: self.document_fallback,
        }
    }
}

/// (line, key, value) triples of a `key=value` text.
pub fn parse_kv(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key=value, found {line:?}"),
        })?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

// ---------------------------------------------------------------------------
// JSON lines

pub fn write_jsonl<T: Serialize>(items: &[T], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::validation(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn is_tmx(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tmx"))
}

/// Aligned pairs from a `.tmx` file or a JSON-lines file.
pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<AlignedPair>> {
    let path = path.as_ref();
    if is_tmx(path) {
        Ok(read_tmx(path)?.pairs())
    } else {
        read_jsonl(path)
    }
}

pub fn read_units(path: impl AsRef<Path>) -> Result<Vec<TrilingualUnit>> {
    let path = path.as_ref();
    if is_tmx(path) {
        Ok(read_tmx(path)?.trilingual_units())
    } else {
        read_jsonl(path)
    }
}

// ---------------------------------------------------------------------------
// Stages

/// Every language version of every record, parsed. Bodies that fail to parse
/// are reported as (article, language, message) and left out.
pub fn parse_records(records: &[ArticleRecord]) -> (Vec<ParsedArticle>, Vec<(String, Lang, String)>) {
    let results: Vec<(ParsedArticle, Vec<(String, Lang, String)>)> = records
        .par_iter()
        .map(|r| {
            let mut docs = BTreeMap::new();
            let mut errors = Vec::new();
            for (&lang, body) in &r.bodies {
                match parse_html(body, lang) {
                    Ok(d) => {
                        docs.insert(lang, d);
                    }
                    Err(e) => errors.push((r.id().to_string(), lang, e.to_string())),
                }
            }
            (
                ParsedArticle {
                    article_id: r.id().to_string(),
                    documents: docs,
                },
                errors,
            )
        })
        .collect();
    let mut parsed = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for (p, e) in results {
        parsed.push(p);
        errors.extend(e);
    }
    (parsed, errors)
}

#[derive(Debug, Clone, PartialEq, serde::Deserialize, Serialize)]
pub struct ParsedArticle {
    pub article_id: String,
    pub documents: BTreeMap<Lang, StructuredDocument>,
}

pub fn align_article(
    article: &ParsedArticle,
    pair: LangPair,
    cfg: &AlignerConfig,
    opts: &AlignOptions,
) -> Option<Result<DocumentAlignment>> {
    let a = article.documents.get(&pair.src)?;
    let b = article.documents.get(&pair.tgt)?;
    let verdict = check_compatibility(a, b);
    let sa = segment_document(a, &article.article_id, &opts.abbreviations);
    let sb = segment_document(b, &article.article_id, &opts.abbreviations);
    Some(align_segmented(&sa, &sb, &verdict, cfg, opts))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlignOutcome {
    pub alignments: Vec<DocumentAlignment>,
    /// (article, message) for articles that could not be aligned.
    pub errors: Vec<(String, String)>,
}

/// Aligns every article that has both languages of `pair`, in input order.
pub fn align_articles(articles: &[ParsedArticle], pair: LangPair, cfg: &AlignerConfig, opts: &AlignOptions) -> AlignOutcome {
    let results: Vec<(String, Option<Result<DocumentAlignment>>)> = articles
        .par_iter()
        .map(|a| (a.article_id.clone(), align_article(a, pair, cfg, opts)))
        .collect();
    let mut out = AlignOutcome::default();
    for (id, r) in results {
        match r {
            None => {}
            Some(Ok(al)) => out.alignments.push(al),
            Some(Err(e)) => {
                log::warn!("{id} {pair}: {e}");
                out.errors.push((id, e.to_string()));
            }
        }
    }
    out
}

pub fn filter_alignments(
    alignments: &[DocumentAlignment],
    cfg: &FilterConfig,
    profiles: &[LanguageProfile],
) -> (Vec<AlignedPair>, FilterReport) {
    let results: Vec<(Vec<AlignedPair>, FilterReport)> =
        alignments.par_iter().map(|a| run_filters(a, cfg, profiles)).collect();
    let mut pairs = Vec::new();
    let mut report = FilterReport::default();
    for (p, r) in results {
        pairs.extend(p);
        report.merge(&r);
    }
    (pairs, report)
}

/// Pairs from `pairs` that share `pivot`, as a join-ready couple.
pub fn trilingual_inputs(pairs: &[LangPair], pivot: Lang) -> Option<(LangPair, LangPair)> {
    let with: Vec<LangPair> = pairs.iter().copied().filter(|p| p.contains(pivot)).collect();
    with.iter().enumerate().find_map(|(i, a)| {
        with[i + 1..]
            .iter()
            .find(|b| {
                let other = |p: &LangPair| if p.src == pivot { p.tgt } else { p.src };
                other(a) != other(b)
            })
            .map(|b| (*a, *b))
    })
}

/// Metadata for the given article ids, from the store records.
pub fn metadata_for<'a>(
    records: &[ArticleRecord],
    ids: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeMap<String, ArticleMetadata>> {
    let by_id: BTreeMap<&str, &ArticleMetadata> = records.iter().map(|r| (r.id(), &r.metadata)).collect();
    let mut out = BTreeMap::new();
    for id in ids {
        let m = by_id.get(id).ok_or_else(|| Error::MissingMetadata(id.to_string()))?;
        out.insert(id.to_string(), (*m).clone());
    }
    Ok(out)
}

pub fn export_pairs_tmx(pairs: &[AlignedPair], records: &[ArticleRecord], path: impl AsRef<Path>) -> Result<()> {
    let meta = metadata_for(records, pairs.iter().map(|p| p.article_id.as_str()))?;
    write_tmx(&TmxCorpus::from_pairs(pairs.to_vec(), meta), path)
}

pub fn export_units_tmx(units: &[TrilingualUnit], records: &[ArticleRecord], path: impl AsRef<Path>) -> Result<()> {
    let meta = metadata_for(records, units.iter().map(|u| u.article_id.as_str()))?;
    write_tmx(&TmxCorpus::from_units(units.to_vec(), meta), path)
}

pub fn stats_table(rows: &[CorpusStats]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.table_row());
        out.push('\n');
    }
    out
}

pub fn load_dictionary(path: Option<&Path>) -> Result<Option<Dictionary>> {
    path.map(Dictionary::load).transpose()
}

// ---------------------------------------------------------------------------
// Full run

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSummary {
    pub pair: Option<LangPair>,
    pub articles_aligned: usize,
    pub align_errors: usize,
    pub filter: FilterReport,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub manifest_entries: usize,
    pub ingest: IngestReport,
    pub parse_errors: usize,
    pub pairs: Vec<PairSummary>,
    pub trilingual_units: usize,
    pub stats: Vec<CorpusStats>,
    /// (stage, milliseconds) in run order.
    pub timings: Vec<(String, u128)>,
}

impl RunSummary {
    /// `key=value` lines. Counts come first; timings are last since they
    /// vary between runs.
    pub fn to_kv(&self) -> String {
        let mut lines = vec![
            format!("manifest_entries={}", self.manifest_entries),
            format!("ingest.kept={}", self.ingest.kept),
            format!("ingest.rejected={}", self.ingest.rejected),
            format!("ingest.errors={}", self.ingest.errors.len()),
            format!("parse.errors={}", self.parse_errors),
        ];
        for p in &self.pairs {
            let name = p.pair.map(|x| x.to_string()).unwrap_or_default();
            lines.push(format!("{name}.articles_aligned={}", p.articles_aligned));
            lines.push(format!("{name}.align_errors={}", p.align_errors));
            for (k, v) in p.filter.to_kv(&format!("{name}.filter.")) {
                lines.push(format!("{k}={v}"));
            }
        }
        lines.push(format!("trilingual.units={}", self.trilingual_units));
        for (stage, ms) in &self.timings {
            lines.push(format!("time_ms.{stage}={ms}"));
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

fn timed<T>(timings: &mut Vec<(String, u128)>, stage: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    log::info!("{stage}");
    let out = f();
    timings.push((stage.to_string(), start.elapsed().as_millis()));
    out
}

/// Paths written by [`run_all`].
pub struct RunPaths {
    pub out_dir: PathBuf,
}

impl RunPaths {
    pub fn store(&self) -> PathBuf {
        self.out_dir.join("store.jsonl")
    }
    pub fn alignments(&self, pair: LangPair) -> PathBuf {
        self.out_dir.join(format!("alignments.{pair}.jsonl"))
    }
    pub fn pairs(&self, pair: LangPair) -> PathBuf {
        self.out_dir.join(format!("pairs.{pair}.jsonl"))
    }
    pub fn tmx(&self, pair: LangPair) -> PathBuf {
        self.out_dir.join(format!("{pair}.tmx"))
    }
    pub fn trilingual(&self) -> PathBuf {
        self.out_dir.join("trilingual.jsonl")
    }
    pub fn trilingual_tmx(&self) -> PathBuf {
        self.out_dir.join("trilingual.tmx")
    }
    pub fn stats(&self) -> PathBuf {
        self.out_dir.join("stats.txt")
    }
    pub fn summary(&self) -> PathBuf {
        self.out_dir.join("run-summary.txt")
    }
}

/// Runs every stage on a manifest and writes all artifacts under
/// `cfg.out_dir`. A store left by an earlier run in that directory is
/// replaced.
pub fn run_all(manifest: impl AsRef<Path>, cfg: &PipelineConfig, profiles: &[LanguageProfile]) -> Result<RunSummary> {
    cfg.validate()?;
    let paths = RunPaths {
        out_dir: cfg.out_dir.clone(),
    };
    fs::create_dir_all(&paths.out_dir)?;
    let mut summary = RunSummary::default();
    let mut timings = Vec::new();

    let entries = load_manifest(manifest)?;
    summary.manifest_entries = entries.len();
    let store = paths.store();
    if store.exists() {
        fs::remove_file(&store)?;
    }
    summary.ingest = timed(&mut timings, "ingest", || ingest_all(entries, &store))?;
    let records = load_all(&store)?;

    let (parsed, parse_errors) = timed(&mut timings, "parse", || parse_records(&records));
    summary.parse_errors = parse_errors.len();
    for (id, lang, msg) in &parse_errors {
        log::warn!("{id} {lang}: {msg}");
    }

    let opts = cfg.align_options();
    let mut filtered: BTreeMap<LangPair, Vec<AlignedPair>> = BTreeMap::new();
    for &pair in &cfg.pairs {
        let outcome = timed(&mut timings, &format!("align.{pair}"), || {
            align_articles(&parsed, pair, &cfg.aligner, &opts)
        });
        write_jsonl(&outcome.alignments, paths.alignments(pair))?;
        let (pairs, report) = timed(&mut timings, &format!("filter.{pair}"), || {
            filter_alignments(&outcome.alignments, &cfg.filter, profiles)
        });
        write_jsonl(&pairs, paths.pairs(pair))?;
        timed(&mut timings, &format!("export.{pair}"), || export_pairs_tmx(&pairs, &records, paths.tmx(pair)))?;
        summary.stats.push(corpus_stats(&pairs, pair));
        summary.pairs.push(PairSummary {
            pair: Some(pair),
            articles_aligned: outcome.alignments.len(),
            align_errors: outcome.errors.len(),
            filter: report,
        });
        filtered.insert(pair, pairs);
    }

    if let Some((ab, ac)) = trilingual_inputs(&cfg.pairs, cfg.pivot) {
        let units = timed(&mut timings, "trilingual", || join_trilingual(&filtered[&ab], &filtered[&ac], cfg.pivot))?;
        write_jsonl(&units, paths.trilingual())?;
        export_units_tmx(&units, &records, paths.trilingual_tmx())?;
        summary.trilingual_units = units.len();
        summary.stats.push(trilingual_stats(&units));
    }

    fs::write(paths.stats(), stats_table(&summary.stats))?;
    summary.timings = timings;
    fs::write(paths.summary(), summary.to_kv())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_keys() {
        let mut c = PipelineConfig::default();
        c.set("pairs", "en-pt, pt-es").unwrap();
        c.set("prior.2-1", "0.05").unwrap();
        c.set("char_ratio", "1.1").unwrap();
        c.set("min_pair_score", "none").unwrap();
        c.set("document_fallback", "yes").unwrap();
        assert_eq!(c.pairs.len(), 2);
        assert_eq!(c.aligner.bead_priors.get(BeadKind::TwoOne), 0.05);
        assert_eq!(c.aligner.char_ratio, CharRatio::Fixed(1.1));
        assert_eq!(c.filter.min_pair_score, None);
        assert!(c.document_fallback);
        assert!(c.set("nope", "1").is_err());
        assert!(c.set("seed", "x").is_err());
    }

    #[test]
    fn kv_comments_and_errors() {
        let kv = parse_kv("# c\nseed = 7 # trailing\n\nout=x\n").unwrap();
        assert_eq!(kv, [(2, "seed".into(), "7".into()), (4, "out".into(), "x".into())]);
        assert!(matches!(parse_kv("a\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn pivot_inputs() {
        let p = |s: &str| s.parse::<LangPair>().unwrap();
        assert_eq!(
            trilingual_inputs(&[p("en-pt"), p("en-es"), p("pt-es")], Lang::En),
            Some((p("en-pt"), p("en-es")))
        );
        assert_eq!(trilingual_inputs(&[p("en-pt"), p("pt-es")], Lang::En), None);
        assert_eq!(trilingual_inputs(&[p("en-pt"), p("pt-en")], Lang::En), None);
    }

    #[test]
    fn default_priors_pass_validation() {
        PipelineConfig::default().validate().unwrap();
    }
}
