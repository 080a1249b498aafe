use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bitext::align::DocumentAlignment;
use bitext::evalkit::{
    bleu_text, corpus_stats, export_parallel_text, review_accuracy, sample_for_review, split_corpus,
    trilingual_stats, BleuOptions, CorpusStats, ReviewSet, ReviewSheet, SplitRatios, Verdict,
};
use bitext::ingest::{ingest_all, load_manifest};
use bitext::langid::{builtin_profiles, detect, LanguageProfile};
use bitext::model::{AlignedPair, Lang, LangPair, TrilingualUnit};
use bitext::pipeline::{
    self, align_articles, export_pairs_tmx, export_units_tmx, filter_alignments, load_dictionary, parse_records,
    read_jsonl, write_jsonl, ParsedArticle, PipelineConfig,
};
use bitext::store::load_all;
use bitext::tmx::{read_tmx, write_tmx, CorpusUnit, TmxCorpus};
use bitext::trilingual::join_trilingual;
use bitext::{Error, Result};

#[derive(Parser)]
#[command(name = "bitext", version, about = "Build sentence-aligned parallel corpora from multilingual articles")]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra configuration as key=value; overrides the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for document-level parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log progress at info level.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StoreArg {
    /// Article store; defaults to $BITEXT_STORE, then store.jsonl.
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load a manifest, apply eligibility rules and append articles to the store.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        store: StoreArg,
    },
    /// Parse every stored body into a structured document.
    Parse {
        #[command(flatten)]
        store: StoreArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Align one language pair across the corpus.
    Align {
        #[command(flatten)]
        store: StoreArg,
        /// Parsed documents from `parse`; the store is parsed when absent.
        #[arg(long)]
        parsed: Option<PathBuf>,
        #[arg(long)]
        pair: LangPair,
        /// Bilingual dictionary (src<TAB>tgt); skips the length-only pass.
        #[arg(long)]
        dictionary: Option<PathBuf>,
        /// Align structurally incompatible articles as a whole.
        #[arg(long)]
        document_fallback: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop unaligned, low-confidence, short and same-language pairs.
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the filter report here as key=value lines.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        min_chars: Option<usize>,
        #[arg(long)]
        margin_threshold: Option<f64>,
        #[arg(long)]
        min_pair_score: Option<f64>,
    },
    /// Join two pair sets that share a pivot language.
    Trilingual {
        #[arg(long)]
        ab: PathBuf,
        #[arg(long)]
        ac: PathBuf,
        #[arg(long)]
        pivot: Option<Lang>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write pairs or trilingual units as TMX with article metadata.
    ExportTmx {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        store: StoreArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write pairs as two line-aligned plain-text files.
    ExportText {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        src_out: PathBuf,
        #[arg(long)]
        tgt_out: PathBuf,
    },
    /// Print a corpus statistics table.
    Stats {
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Shuffle and split into train, tune and test files.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the input's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value = "0.85,0.05,0.10")]
        ratios: String,
    },
    /// Corpus BLEU of a candidate file against a reference file.
    Bleu {
        #[arg(long)]
        cand: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        lowercase: bool,
    },
    /// Identify the language of a text.
    DetectLang {
        #[arg(long, conflicts_with = "file")]
        text: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
        /// Directory of *.profile files; the bundled profiles are used when absent.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Draw a review sample from one or more corpora.
    ReviewSample {
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Ask for a verdict on each item: c = correct, n = no alignment.
        #[arg(long)]
        interactive: bool,
    },
    /// Per-set accuracy of a completed review sheet.
    ReviewScore {
        #[arg(long)]
        sheet: PathBuf,
    },
    /// Run ingest, parse, align, filter, trilingual, export-tmx and stats.
    RunAll {
        #[arg(long)]
        manifest: PathBuf,
        /// Language pair; repeat for several. Defaults to all three.
        #[arg(long = "pair")]
        pairs: Vec<LangPair>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        pivot: Option<Lang>,
        #[arg(long)]
        document_fallback: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Validation(e.to_string()))?;
    }
    let mut cfg = load_config(&cli)?;
    let store_path = |cfg: &PipelineConfig, arg: &StoreArg| arg.store.clone().unwrap_or_else(|| cfg.store.clone());

    match cli.command {
        Command::Ingest { manifest, store } => {
            let entries = load_manifest(&manifest)?;
            let report = ingest_all(entries, store_path(&cfg, &store))?;
            println!("kept={}", report.kept);
            println!("rejected={}", report.rejected);
            println!("errors={}", report.errors.len());
            for (id, msg) in &report.errors {
                eprintln!("{id}: {msg}");
            }
        }
        Command::Parse { store, out } => {
            let records = load_all(store_path(&cfg, &store))?;
            let (parsed, errors) = parse_records(&records);
            for (id, lang, msg) in &errors {
                eprintln!("{id} {lang}: {msg}");
            }
            write_jsonl(&parsed, &out)?;
            println!("articles={}", parsed.len());
            println!("errors={}", errors.len());
        }
        Command::Align {
            store,
            parsed,
            pair,
            dictionary,
            document_fallback,
            out,
        } => {
            cfg.validate()?;
            cfg.document_fallback |= document_fallback;
            let articles: Vec<ParsedArticle> = match parsed {
                Some(p) => read_jsonl(p)?,
                None => parse_records(&load_all(store_path(&cfg, &store))?).0,
            };
            let mut opts = cfg.align_options();
            opts.dictionary = load_dictionary(dictionary.as_deref())?;
            let outcome = align_articles(&articles, pair, &cfg.aligner, &opts);
            for (id, msg) in &outcome.errors {
                eprintln!("{id}: {msg}");
            }
            write_jsonl(&outcome.alignments, &out)?;
            println!("aligned={}", outcome.alignments.len());
            println!("errors={}", outcome.errors.len());
        }
        Command::Filter {
            input,
            out,
            report,
            min_chars,
            margin_threshold,
            min_pair_score,
        } => {
            let mut fc = cfg.filter.clone();
            if let Some(v) = min_chars {
                fc.min_chars = v;
            }
            if let Some(v) = margin_threshold {
                fc.margin_threshold = v;
            }
            if let Some(v) = min_pair_score {
                fc.min_pair_score = Some(v);
            }
            let alignments: Vec<DocumentAlignment> = read_jsonl(&input)?;
            let (pairs, rep) = filter_alignments(&alignments, &fc, builtin_profiles());
            write_jsonl(&pairs, &out)?;
            let text: String = rep.to_kv("").into_iter().map(|(k, v)| format!("{k}={v}\n")).collect();
            print!("{text}");
            if let Some(path) = report {
                fs::write(path, text)?;
            }
        }
        Command::Trilingual { ab, ac, pivot, out } => {
            let pivot = pivot.unwrap_or(cfg.pivot);
            let units = join_trilingual(&pipeline::read_pairs(&ab)?, &pipeline::read_pairs(&ac)?, pivot)?;
            write_jsonl(&units, &out)?;
            println!("units={}", units.len());
        }
        Command::ExportTmx { input, store, out } => {
            let records = load_all(store_path(&cfg, &store))?;
            match load_corpus(&input)? {
                Loaded::Pairs(p) => export_pairs_tmx(&p, &records, &out)?,
                Loaded::Units(u) => export_units_tmx(&u, &records, &out)?,
            }
        }
        Command::ExportText { input, src_out, tgt_out } => {
            let pairs = pipeline::read_pairs(&input)?;
            export_parallel_text(&pairs, &src_out, &tgt_out)?;
            println!("lines={}", pairs.len());
        }
        Command::Stats { inputs } => {
            let mut rows = Vec::new();
            for path in &inputs {
                rows.push(stats_of(path)?);
            }
            print!("{}", pipeline::stats_table(&rows));
        }
        Command::Split {
            input,
            seed,
            out_dir,
            ratios,
        } => split_command(&input, seed.unwrap_or(cfg.seed), out_dir, &ratios)?,
        Command::Bleu {
            cand,
            reference,
            lowercase,
        } => {
            let c = pipeline::read_text(&cand)?;
            let r = pipeline::read_text(&reference)?;
            let report = bleu_text(
                &c,
                &r,
                BleuOptions {
                    lowercase,
                    ..Default::default()
                },
            )?;
            println!("{report}");
        }
        Command::DetectLang { text, file, profiles } => {
            let text = match (text, file) {
                (Some(t), _) => t,
                (None, Some(f)) => pipeline::read_text(&f)?,
                (None, None) => return Err(Error::Validation("give --text or --file".into())),
            };
            let loaded;
            let profiles: &[LanguageProfile] = match profiles {
                Some(dir) => {
                    loaded = load_profiles(&dir)?;
                    &loaded
                }
                None => builtin_profiles(),
            };
            let d = detect(&text, profiles)?;
            println!("{}\tmargin={:.4}", d.lang, d.margin);
            for (lang, dist) in &d.distances {
                println!("{lang}\t{dist}");
            }
        }
        Command::ReviewSample {
            inputs,
            n,
            seed,
            out,
            interactive,
        } => {
            let sets = inputs.iter().map(|p| review_set(p)).collect::<Result<Vec<_>>>()?;
            let mut sheet = sample_for_review(&sets, n, seed.unwrap_or(cfg.seed));
            for (set, wanted, got) in &sheet.shortfalls {
                eprintln!("warning: {set} has only {got} of {wanted} requested items");
            }
            if interactive {
                let stdin = io::stdin();
                review_interactively(&mut sheet, &mut stdin.lock(), &mut io::stderr())?;
            }
            sheet.save(&out)?;
            println!("items={}", sheet.rows.len());
        }
        Command::ReviewScore { sheet } => {
            let sheet = ReviewSheet::load(&sheet)?;
            for acc in review_accuracy(&sheet)? {
                println!("{}\t{}/{}\t{}", acc.set, acc.correct, acc.total, acc.rendered());
            }
        }
        Command::RunAll {
            manifest,
            pairs,
            out,
            pivot,
            document_fallback,
        } => {
            if !pairs.is_empty() {
                cfg.pairs = pairs;
            }
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            if let Some(p) = pivot {
                cfg.pivot = p;
            }
            cfg.document_fallback |= document_fallback;
            let summary = pipeline::run_all(&manifest, &cfg, builtin_profiles())?;
            eprint!("{}", summary.to_kv());
            print!("{}", pipeline::stats_table(&summary.stats));
        }
    }
    Ok(())
}

enum Loaded {
    Pairs(Vec<AlignedPair>),
    Units(Vec<TrilingualUnit>),
}

fn is_tmx(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tmx"))
}

/// Pairs or trilingual units from a TMX or JSON-lines file.
fn load_corpus(path: &Path) -> Result<Loaded> {
    if is_tmx(path) {
        let c = read_tmx(path)?;
        let units = c.trilingual_units();
        return Ok(if units.is_empty() {
            Loaded::Pairs(c.pairs())
        } else {
            Loaded::Units(units)
        });
    }
    match read_jsonl::<AlignedPair>(path) {
        Ok(p) => Ok(Loaded::Pairs(p)),
        Err(Error::Parse { .. }) => Ok(Loaded::Units(read_jsonl(path)?)),
        Err(e) => Err(e),
    }
}

fn stats_of(path: &Path) -> Result<CorpusStats> {
    Ok(match load_corpus(path)? {
        Loaded::Units(u) => trilingual_stats(&u),
        Loaded::Pairs(p) => {
            let pair = p
                .first()
                .map(AlignedPair::pair)
                .ok_or_else(|| Error::Validation(format!("{} holds no pairs", path.display())))?;
            corpus_stats(&p, pair)
        }
    })
}

fn set_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.strip_prefix("pairs.").map(str::to_string).unwrap_or(stem)
}

fn review_set(path: &Path) -> Result<ReviewSet> {
    Ok(match load_corpus(path)? {
        Loaded::Pairs(p) => ReviewSet::from_pairs(set_name(path), &p),
        Loaded::Units(u) => ReviewSet::from_units(set_name(path), &u),
    })
}

fn load_profiles(dir: &Path) -> Result<Vec<LanguageProfile>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => Error::MissingFile(dir.to_path_buf()),
            _ => Error::Io(e),
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "profile"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Validation(format!("no *.profile files in {}", dir.display())));
    }
    paths.iter().map(LanguageProfile::load).collect()
}

fn parse_ratios(s: &str) -> Result<SplitRatios> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::InvalidRatios))
        .collect::<Result<_>>()?;
    let [train, tune, test] = parts[..] else {
        return Err(Error::InvalidRatios);
    };
    Ok(SplitRatios { train, tune, test })
}

fn split_command(input: &Path, seed: u64, out_dir: Option<PathBuf>, ratios: &str) -> Result<()> {
    let ratios = parse_ratios(ratios)?;
    let dir = out_dir.unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());
    fs::create_dir_all(&dir)?;
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let named = |part: &str, ext: &str| dir.join(format!("{stem}.{part}.{ext}"));
    if is_tmx(input) {
        let corpus = read_tmx(input)?;
        let split = split_corpus(&corpus.units, ratios, seed)?;
        for (part, units) in [("train", split.train), ("tune", split.tune), ("test", split.test)] {
            let metadata: BTreeMap<_, _> = units
                .iter()
                .map(CorpusUnit::article_id)
                .filter_map(|id| corpus.metadata.get(id).map(|m| (id.to_string(), m.clone())))
                .collect();
            println!("{part}={}", units.len());
            write_tmx(&TmxCorpus { units, metadata }, named(part, "tmx"))?;
        }
    } else {
        let pairs = pipeline::read_pairs(input)?;
        let split = split_corpus(&pairs, ratios, seed)?;
        for (part, items) in [("train", split.train), ("tune", split.tune), ("test", split.test)] {
            println!("{part}={}", items.len());
            write_jsonl(&items, named(part, "jsonl"))?;
        }
    }
    Ok(())
}

/// Prompts for a verdict on every unreviewed row. Stops quietly at end of input.
fn review_interactively(sheet: &mut ReviewSheet, input: &mut dyn BufRead, prompt: &mut dyn Write) -> Result<()> {
    let total = sheet.rows.len();
    for (i, row) in sheet.rows.iter_mut().enumerate() {
        if row.verdict.is_some() {
            continue;
        }
        writeln!(prompt, "\n[{}/{total}] {}", i + 1, row.id)?;
        for t in &row.texts {
            writeln!(prompt, "  {t}")?;
        }
        loop {
            write!(prompt, "c = correct, n = no alignment: ")?;
            prompt.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                return Ok(());
            }
            match line.trim() {
                "c" => row.verdict = Some(Verdict::Correct),
                "n" => row.verdict = Some(Verdict::NoAlignment),
                _ => continue,
            }
            break;
        }
    }
    Ok(())
}
