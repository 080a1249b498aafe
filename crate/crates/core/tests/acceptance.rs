//! Acceptance gate. Every test prints one `PASS` or `FAIL` line with the
//! measured figures, then asserts. Thresholds and time limits live in the
//! constants below.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use bitext::align::{
    align_lengths, align_two_pass, chunk_align, realign, AlignedBlock, AlignerConfig, BlockMode, Dictionary,
    DocumentAlignment,
};
use bitext::evalkit::{bleu, bleu_text, split_corpus, BleuOptions, SplitRatios};
use bitext::filter::{filter_pairs, non_whitespace_chars, run_filters, FilterConfig};
use bitext::langid::{detect, seed_text, train_profile, LanguageProfile};
use bitext::model::{check_bead_coverage, ArticleMetadata, Bead, BeadKind, Lang, LangPair, Sentence};
use bitext::pipeline::{run_all, PipelineConfig, RunPaths};
use bitext::segment::{normalize_whitespace, segment_document, split_sentences, strip_parentheticals, Abbreviations};
use bitext::tmx::{parse_tmx, to_tmx_string, validate_structure, TmxCorpus};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::distributions::WeightedIndex;
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{brute_force_best, kinds, oracle_length_cost, realign_oracle_cost, sents};

const ORACLE_INSTANCES: usize = 1_000;
const ORACLE_MAX_SIDE: usize = 6;
const ORACLE_TIME: Duration = Duration::from_secs(60);

const RECOVERY_DOCS: usize = 200;
const RECOVERY_MIN: f64 = 0.98;
const LENGTH_JITTER: f64 = 0.20;
const DELETION_RATE: f64 = 0.05;
const MERGE_RATE: f64 = 0.05;
const RECOVERY_TIME: Duration = Duration::from_secs(300);

const BLEU_TOLERANCE: f64 = 1e-9;
const SPLIT_SIZES: [usize; 3] = [100, 1_000, 99_999];
const SPLIT_SEEDS: u64 = 50;

const LANGID_MIN_ACCURACY: f64 = 0.95;
const LANGID_HELDOUT: usize = 300;
const LANGID_MIN_CHARS: usize = 80;
const LANGID_TIME: Duration = Duration::from_secs(30);

const CHUNK_SENTENCES: usize = 12_000;
const CHUNK_MIN_AGREEMENT: f64 = 0.99;
const CHUNK_TIME: Duration = Duration::from_secs(120);

const SEGMENT_CASES: u32 = 1_000;

fn report(name: &str, pass: bool, detail: impl std::fmt::Display) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

// ---------------------------------------------------------------------------
// Synthetic parallel text

struct Lexicon {
    src: Vec<String>,
    tgt: Vec<String>,
    zipf: WeightedIndex<f64>,
}

const FILLERS: [&str; 10] = ["de", "la", "que", "el", "en", "los", "se", "del", "las", "por"];

fn random_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len.max(2)).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

impl Lexicon {
    fn new(rng: &mut ChaCha8Rng, size: usize, stretch: f64) -> Self {
        let src: Vec<String> = (0..size)
            .map(|_| {
                let len = rng.gen_range(2..=10);
                random_word(rng, len)
            })
            .collect();
        let tgt = src
            .iter()
            .map(|w| {
                let len = (w.len() as f64 * stretch * rng.gen_range(0.9..1.1)).round() as usize;
                random_word(rng, len)
            })
            .collect();
        let zipf = WeightedIndex::new((0..size).map(|r| 1.0 / (r + 1) as f64)).unwrap();
        Lexicon { src, tgt, zipf }
    }

    /// A template pair: a source sentence and its word-by-word rendering,
    /// padded or trimmed so its length lands within the jitter of the
    /// natural translation length.
    fn pair(&self, rng: &mut ChaCha8Rng) -> (String, String) {
        let n = rng.gen_range(5..=25);
        let ids: Vec<usize> = (0..n).map(|_| self.zipf.sample(rng)).collect();
        let src = ids.iter().map(|&i| self.src[i].as_str()).collect::<Vec<_>>().join(" ");
        let mut tgt: Vec<String> = ids.iter().map(|&i| self.tgt[i].clone()).collect();
        let natural = tgt.join(" ").len();
        let want = (natural as f64 * rng.gen_range(1.0 - LENGTH_JITTER..=1.0 + LENGTH_JITTER)).round() as usize;
        while tgt.join(" ").len() + 3 <= want {
            tgt.push(FILLERS[rng.gen_range(0..FILLERS.len())].to_string());
        }
        while tgt.len() > 1 && tgt.join(" ").len() > want {
            tgt.pop();
        }
        (format!("{src}."), format!("{}.", tgt.join(" ")))
    }
}

struct SyntheticDoc {
    src: Vec<String>,
    tgt: Vec<String>,
    /// True 1-1 links that survived deletions and merges.
    links: Vec<(usize, usize)>,
    deletions: usize,
}

fn synthetic_doc(lex: &Lexicon, rng: &mut ChaCha8Rng, templates: usize, noisy: bool) -> SyntheticDoc {
    let pairs: Vec<(String, String)> = (0..templates).map(|_| lex.pair(rng)).collect();
    let mut doc = SyntheticDoc {
        src: Vec::new(),
        tgt: Vec::new(),
        links: Vec::new(),
        deletions: 0,
    };
    let mut k = 0;
    while k < pairs.len() {
        let r: f64 = if noisy { rng.gen() } else { 1.0 };
        let on_src = rng.gen_bool(0.5);
        if r < DELETION_RATE {
            if on_src {
                doc.tgt.push(pairs[k].1.clone());
            } else {
                doc.src.push(pairs[k].0.clone());
            }
            doc.deletions += 1;
            k += 1;
        } else if r < DELETION_RATE + MERGE_RATE && k + 1 < pairs.len() {
            let (a, b) = (&pairs[k], &pairs[k + 1]);
            if on_src {
                doc.src.push(format!("{} {}", a.0, b.0));
                doc.tgt.extend([a.1.clone(), b.1.clone()]);
            } else {
                doc.src.extend([a.0.clone(), b.0.clone()]);
                doc.tgt.push(format!("{} {}", a.1, b.1));
            }
            k += 2;
        } else {
            doc.links.push((doc.src.len(), doc.tgt.len()));
            doc.src.push(pairs[k].0.clone());
            doc.tgt.push(pairs[k].1.clone());
            k += 1;
        }
    }
    doc
}

fn one_one_links(beads: &[Bead]) -> HashSet<(usize, usize)> {
    beads
        .iter()
        .filter(|b| b.kind == BeadKind::OneOne)
        .map(|b| (b.src_start, b.tgt_start))
        .collect()
}

fn recovered(doc: &SyntheticDoc, beads: &[Bead]) -> usize {
    let found = one_one_links(beads);
    doc.links.iter().filter(|l| found.contains(l)).count()
}

/// Links whose two sentences at least share a bead.
fn contained(doc: &SyntheticDoc, beads: &[Bead]) -> usize {
    doc.links
        .iter()
        .filter(|&&(s, t)| beads.iter().any(|b| b.src_range().contains(&s) && b.tgt_range().contains(&t)))
        .count()
}

// ---------------------------------------------------------------------------

#[test]
fn aligner_matches_brute_force() {
    let cfg = AlignerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut length_ok, mut realign_ok, mut ties) = (0, 0, 0);
    let mut failures = Vec::new();
    for case in 0..ORACLE_INSTANCES {
        let n = rng.gen_range(0..=ORACLE_MAX_SIDE);
        let m = rng.gen_range(0..=ORACLE_MAX_SIDE);
        let mut text = |_| {
            let len = rng.gen_range(1..=150);
            random_word(&mut rng, len)
        };
        let src: Vec<String> = (0..n).map(&mut text).collect();
        let tgt: Vec<String> = (0..m).map(&mut text).collect();
        let (s, t) = (sents(&src, Lang::En), sents(&tgt, Lang::Pt));

        let total = |v: &[String]| v.iter().map(|x| x.chars().count()).sum::<usize>();
        let ratio = if total(&src) > 0 && total(&tgt) > 0 {
            total(&tgt) as f64 / total(&src) as f64
        } else {
            1.0
        };
        let length_cost = |b: &Bead| {
            let (di, dj) = b.kind.sizes();
            let sl = total(&src[b.src_start..b.src_start + di]);
            let tl = total(&tgt[b.tgt_start..b.tgt_start + dj]);
            oracle_length_cost(b.kind, sl, tl, ratio)
        };
        let (want, tied) = brute_force_best(n, m, length_cost);
        ties += usize::from(tied);
        let starts = |b: &[Bead]| b.iter().map(|x| (x.kind, x.src_start, x.tgt_start)).collect::<Vec<_>>();

        let got = align_lengths(&s, &t, &cfg);
        if starts(&got) == starts(&want) && check_bead_coverage(&got, n, m).is_ok() {
            length_ok += 1;
        } else {
            failures.push(format!("case {case} length pass: got {:?}, want {:?}", kinds(&got), kinds(&want)));
        }

        let (want, _) = brute_force_best(n, m, |b| realign_oracle_cost(&src, &tgt, &[], b));
        let got = realign(&s, &t, &Dictionary::default(), &cfg);
        if starts(&got) == starts(&want) {
            realign_ok += 1;
        } else {
            failures.push(format!("case {case} realign: got {:?}, want {:?}", kinds(&got), kinds(&want)));
        }
    }
    let elapsed = start.elapsed();
    for f in failures.iter().take(5) {
        println!("  {f}");
    }
    let pass = failures.is_empty() && elapsed < ORACLE_TIME;
    report(
        "aligner-oracle",
        pass,
        format!(
            "length pass {length_ok}/{ORACLE_INSTANCES}, empty-dictionary realign {realign_ok}/{ORACLE_INSTANCES} exact \
             ({ties} instances with tied optima), {:.1}s (limit {}s)",
            elapsed.as_secs_f64(),
            ORACLE_TIME.as_secs()
        ),
    );
    assert!(pass);
}

#[test]
fn two_pass_recovers_synthetic_alignments() {
    let cfg = AlignerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let (mut found, mut first_found, mut shared, mut total, mut deletions) = (0, 0, 0, 0, 0);
    let (mut clean_found, mut clean_total) = (0, 0);
    for _ in 0..RECOVERY_DOCS {
        let lex = Lexicon::new(&mut rng, 2_000, 1.15);
        let templates = rng.gen_range(30..=80);
        let seed = rng.gen();
        let noisy = synthetic_doc(&lex, &mut ChaCha8Rng::seed_from_u64(seed), templates, true);
        let run = align_two_pass(&sents(&noisy.src, Lang::En), &sents(&noisy.tgt, Lang::Pt), &cfg);
        check_bead_coverage(&run.second, noisy.src.len(), noisy.tgt.len()).unwrap();
        found += recovered(&noisy, &run.second);
        first_found += recovered(&noisy, &run.first);
        shared += contained(&noisy, &run.second);
        total += noisy.links.len();
        deletions += noisy.deletions;

        let clean = synthetic_doc(&lex, &mut ChaCha8Rng::seed_from_u64(seed), templates, false);
        let run = align_two_pass(&sents(&clean.src, Lang::Es), &sents(&clean.tgt, Lang::Pt), &cfg);
        check_bead_coverage(&run.second, clean.src.len(), clean.tgt.len()).unwrap();
        clean_found += recovered(&clean, &run.second);
        clean_total += clean.links.len();
    }
    let elapsed = start.elapsed();
    let pct = |a: usize, b: usize| 100.0 * a as f64 / b as f64;
    let rate = found as f64 / total as f64;
    let pass = rate >= RECOVERY_MIN && clean_found == clean_total && elapsed < RECOVERY_TIME;
    report(
        "alignment-recovery",
        pass,
        format!(
            "noisy {found}/{total} = {:.2}% exact 1-1 (min {:.0}%; length pass alone {:.2}%, same bead {:.2}%, \
             {deletions} deletions), low-noise {clean_found}/{clean_total} (must be all), {RECOVERY_DOCS} documents \
             each, {:.1}s (limit {}s)",
            pct(found, total),
            100.0 * RECOVERY_MIN,
            pct(first_found, total),
            pct(shared, total),
            elapsed.as_secs_f64(),
            RECOVERY_TIME.as_secs()
        ),
    );
    assert!(pass);
}

/// Sentence lists of every fixture article, flattened per language pair.
fn fixture_blocks() -> Vec<(String, Vec<Sentence>, Vec<Sentence>)> {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.jsonl");
    let entries = bitext::ingest::load_manifest(fixtures().join("manifest.tsv")).unwrap();
    let (eligible, _) = bitext::ingest::filter_eligible(entries);
    bitext::ingest::ingest_all(eligible, &store).unwrap();
    let records = bitext::store::load_all(&store).unwrap();
    let (parsed, errors) = bitext::pipeline::parse_records(&records);
    assert!(errors.is_empty());
    let abbr = Abbreviations::builtin();
    let mut out = Vec::new();
    for article in &parsed {
        let segmented: BTreeMap<Lang, Vec<Sentence>> = article
            .documents
            .iter()
            .map(|(&lang, doc)| {
                let seg = segment_document(doc, &article.article_id, &abbr);
                (lang, seg.sentences().cloned().collect())
            })
            .collect();
        for (a, sa) in &segmented {
            for (b, sb) in &segmented {
                if a < b {
                    out.push((format!("{} {a}-{b}", article.article_id), sa.clone(), sb.clone()));
                }
            }
        }
    }
    out
}

#[test]
fn supplied_dictionary_reproduces_second_pass() {
    let cfg = AlignerConfig::default();
    let mut cases = fixture_blocks();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in 0..20 {
        let lex = Lexicon::new(&mut rng, 2_000, 1.15);
        let doc = synthetic_doc(&lex, &mut rng, 60, d % 2 == 0);
        cases.push((format!("synthetic {d}"), sents(&doc.src, Lang::En), sents(&doc.tgt, Lang::Pt)));
    }
    let mut mismatches = Vec::new();
    let mut with_dict = 0;
    for (name, s, t) in &cases {
        let run = align_two_pass(s, t, &cfg);
        with_dict += usize::from(!run.dictionary.is_empty());
        let again = realign(s, t, &run.dictionary, &cfg);
        if again != run.second {
            mismatches.push(name.clone());
        }
    }
    let pass = mismatches.is_empty() && with_dict > 0;
    report(
        "skip-dictionary",
        pass,
        format!(
            "{}/{} inputs bead-for-bead identical ({with_dict} with a non-empty dictionary){}",
            cases.len() - mismatches.len(),
            cases.len(),
            if mismatches.is_empty() { String::new() } else { format!("; differing: {mismatches:?}") }
        ),
    );
    assert!(pass);
}

#[test]
fn bleu_reference_cases() {
    let opts = BleuOptions::default();
    let corpus = "the cat is on the mat .\nthere is a cat on the mat .\na dog sat in the sun near the old barn .";
    let identity = bleu_text(corpus, corpus, opts).unwrap();
    let identity_ok = format!("{:.2}", identity.bleu) == "100.00";

    let clipped = bleu_text("the the the the the the the", "the cat is on the mat", opts).unwrap();
    let p1_ok = (clipped.precisions[0] - 2.0 / 7.0).abs() <= BLEU_TOLERANCE;
    let zero_ok = clipped.bleu == 0.0;

    let lines: Vec<&str> = corpus.lines().collect();
    let refs: Vec<&str> = [
        "the cat sat on the mat .",
        "there is one cat on a mat .",
        "a dog sat in the sun by the barn .",
    ]
    .to_vec();
    let tok = |v: &[&str]| v.iter().map(|l| bitext::evalkit::tokenize(l)).collect::<Vec<_>>();
    let base = bleu(&tok(&lines), &tok(&refs), opts).unwrap();
    let mut perm_ok = true;
    for order in [[2, 0, 1], [1, 2, 0], [2, 1, 0]] {
        let c: Vec<&str> = order.iter().map(|&i| lines[i]).collect();
        let r: Vec<&str> = order.iter().map(|&i| refs[i]).collect();
        perm_ok &= bleu(&tok(&c), &tok(&r), opts).unwrap().bleu == base.bleu;
    }
    let pass = identity_ok && p1_ok && zero_ok && perm_ok;
    report(
        "bleu",
        pass,
        format!(
            "identity {:.2}, clipped p1 {:.12} (want 2/7 within {BLEU_TOLERANCE:e}), zero-precision BLEU {}, \
             permutation invariant {perm_ok} (BLEU {:.4})",
            identity.bleu, clipped.precisions[0], clipped.bleu, base.bleu
        ),
    );
    assert!(pass);
}

#[test]
fn split_contract() {
    let ratios = SplitRatios::default();
    let mut checked = 0;
    let mut problems = Vec::new();
    for n in SPLIT_SIZES {
        let items: Vec<usize> = (0..n).collect();
        for seed in 0..SPLIT_SEEDS {
            let a = split_corpus(&items, ratios, seed).unwrap();
            let b = split_corpus(&items, ratios, seed).unwrap();
            if a.train != b.train || a.tune != b.tune || a.test != b.test {
                problems.push(format!("n={n} seed={seed}: not deterministic"));
            }
            let mut all: Vec<usize> = a.train.iter().chain(&a.tune).chain(&a.test).copied().collect();
            all.sort_unstable();
            if all != items {
                problems.push(format!("n={n} seed={seed}: not a partition"));
            }
            for (len, r) in [(a.train.len(), 0.85), (a.tune.len(), 0.05), (a.test.len(), 0.10)] {
                if (len as f64 - r * n as f64).abs() > 1.0 {
                    problems.push(format!("n={n} seed={seed}: part of {len} for ratio {r}"));
                }
            }
            checked += 1;
        }
    }
    let pass = problems.is_empty();
    report(
        "split",
        pass,
        format!("{checked} splits disjoint, exhaustive, within one item of 85/5/10 and reproducible; problems: {problems:?}"),
    );
    assert!(pass);
}

#[test]
fn filter_counts_reconcile_and_are_idempotent() {
    let good = [
        (
            "The patients were followed for twelve months after the surgery.",
            "Os pacientes foram acompanhados por doze meses após a cirurgia.",
        ),
        (
            "Data were collected through structured interviews with nurses.",
            "Os dados foram coletados por meio de entrevistas estruturadas com enfermeiros.",
        ),
        (
            "Most participants reported a high level of satisfaction with the service.",
            "A maioria dos participantes relatou alto nível de satisfação com o serviço.",
        ),
        (
            "The study was approved by the research ethics committee of the university.",
            "O estudo foi aprovado pelo comitê de ética em pesquisa da universidade.",
        ),
    ];
    let mut src: Vec<String> = Vec::new();
    let mut tgt: Vec<String> = Vec::new();
    let mut beads = Vec::new();
    let mut add = |kind: BeadKind, s: &[&str], t: &[&str], score: f64| {
        let mut b = Bead::new(kind, src.len(), tgt.len());
        b.score = score;
        beads.push(b);
        src.extend(s.iter().map(|x| x.to_string()));
        tgt.extend(t.iter().map(|x| x.to_string()));
    };
    for (s, t) in &good {
        add(BeadKind::OneOne, &[s], &[t], 0.8);
    }
    add(BeadKind::OneZero, &["This sentence has no counterpart in the translation."], &[], 0.0);
    add(BeadKind::ZeroOne, &[], &["Esta frase não tem correspondente no original."], 0.0);
    add(
        BeadKind::OneOne,
        &["Statistical analysis used the chi-square test."],
        &["A coleta ocorreu entre janeiro e março de 2018."],
        0.1,
    );
    add(BeadKind::OneOne, &["Results are shown in the table."], &["Agradecemos aos revisores."], 0.2);
    add(BeadKind::OneOne, &["I."], &["I."], 0.9);
    add(
        BeadKind::OneOne,
        &["The interviews lasted about forty minutes and were recorded with consent."],
        &["The interviews lasted about forty minutes and were recorded with consent of the participants."],
        0.9,
    );
    add(
        BeadKind::TwoOne,
        &["Sleep quality was assessed.", "The Pittsburgh index was used."],
        &["A qualidade do sono foi avaliada com o índice de Pittsburgh."],
        0.7,
    );
    let alignment = DocumentAlignment {
        article_id: "S0000-00002000000000001".into(),
        pair: LangPair::new(Lang::En, Lang::Pt).unwrap(),
        mode: BlockMode::Document,
        blocks: vec![AlignedBlock {
            src: sents(&src, Lang::En),
            tgt: sents(&tgt, Lang::Pt),
            beads,
        }],
        dictionary_size: 12,
    };
    let cfg = FilterConfig::default();
    let profiles = bitext::langid::builtin_profiles();
    let (kept, r) = run_filters(&alignment, &cfg, profiles);
    let expected = (11, 2, 2, 1, 1, 5);
    let got = (r.input, r.dropped_unaligned, r.dropped_low_score, r.dropped_short, r.dropped_same_language, r.output);
    let (again, r2) = filter_pairs(kept.clone(), &cfg, profiles);
    let pass = r.reconciles() && got == expected && kept.len() == r.output && r2.dropped() == 0 && again == kept;
    report(
        "filter",
        pass,
        format!(
            "input {} = output {} + unaligned {} + low score {} + short {} + same language {} (expected {expected:?}); \
             second pass dropped {}",
            r.input, r.output, r.dropped_unaligned, r.dropped_low_score, r.dropped_short, r.dropped_same_language,
            r2.dropped()
        ),
    );
    assert!(pass);
}

#[test]
fn language_identification() {
    let start = Instant::now();
    let profiles: Vec<LanguageProfile> = [Lang::En, Lang::Pt, Lang::Es]
        .into_iter()
        .map(|l| train_profile(seed_text(l), l, 400).unwrap())
        .collect();
    let examples = [
        ("Among its objectives, it aims to defend the interests of society and Nursing.", Lang::En),
        ("Entre seus objetivos, visa defender os interesses da sociedade e da Enfermagem.", Lang::Pt),
        ("Entre sus objetivos está defender los intereses de la sociedad y de la Enfermería.", Lang::Es),
    ];
    let examples_ok = examples.iter().all(|(t, l)| detect(t, &profiles).unwrap().lang == *l);
    let heldout = [
        (Lang::En, include_str!("../data/seed/en.heldout.txt")),
        (Lang::Pt, include_str!("../data/seed/pt.heldout.txt")),
        (Lang::Es, include_str!("../data/seed/es.heldout.txt")),
    ];
    let (mut right, mut total, mut short) = (0, 0, 0);
    for (lang, text) in heldout {
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            total += 1;
            short += usize::from(line.chars().count() < LANGID_MIN_CHARS);
            right += usize::from(detect(line, &profiles).unwrap().lang == lang);
        }
    }
    let elapsed = start.elapsed();
    let accuracy = right as f64 / total as f64;
    let pass = examples_ok
        && total == LANGID_HELDOUT
        && short == 0
        && accuracy >= LANGID_MIN_ACCURACY
        && elapsed < LANGID_TIME;
    report(
        "language-id",
        pass,
        format!(
            "example sentences {}, held-out {right}/{total} = {:.1}% (min {:.0}%, {short} lines under {LANGID_MIN_CHARS} chars), \
             {:.2}s (limit {}s)",
            if examples_ok { "en/pt/es correct" } else { "misclassified" },
            100.0 * accuracy,
            100.0 * LANGID_MIN_ACCURACY,
            elapsed.as_secs_f64(),
            LANGID_TIME.as_secs()
        ),
    );
    assert!(pass);
}

fn props_per_unit(xml: &str) -> Vec<usize> {
    xml.split("<tu ").skip(1).map(|tu| tu.matches("<prop ").count()).collect()
}

#[test]
fn tmx_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        out_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    run_all(fixtures().join("manifest.tsv"), &cfg, bitext::langid::builtin_profiles()).unwrap();
    let paths = RunPaths { out_dir: dir.path().to_path_buf() };
    let mut files = Vec::new();
    for pair in &cfg.pairs {
        files.push(paths.tmx(*pair));
    }
    files.push(paths.trilingual());
    let files: Vec<PathBuf> = files.into_iter().map(|p| p.with_extension("tmx")).collect();

    let mut problems = Vec::new();
    let (mut units, mut no_doi_units) = (0, 0);
    for f in &files {
        let text = std::fs::read_to_string(f).unwrap();
        let x = parse_tmx(&text).unwrap();
        let written = to_tmx_string(&x).unwrap();
        if written != to_tmx_string(&x).unwrap() {
            problems.push(format!("{f:?}: repeated writes differ"));
        }
        if written != text {
            problems.push(format!("{f:?}: rewrite differs from the pipeline's file"));
        }
        if parse_tmx(&written).unwrap() != x {
            problems.push(format!("{f:?}: read(write(x)) != x"));
        }
        if let Err(e) = validate_structure(&written) {
            problems.push(format!("{f:?}: {e}"));
        }
        units += x.units.len();
        let props = props_per_unit(&written);
        for (unit, count) in x.units.iter().zip(props) {
            let has_doi = x.metadata[unit.article_id()].doi.is_some();
            no_doi_units += usize::from(!has_doi);
            if count != if has_doi { 7 } else { 6 } {
                problems.push(format!("{f:?}: {} has {count} props", unit.article_id()));
            }
        }
    }

    // Markup-heavy text with no DOI.
    let meta = ArticleMetadata {
        scielo_id: "S9999-99992020000100001".into(),
        doi: None,
        journal: "Rev. <Test> & \"Quotes\"".into(),
        subject_area: "Health Sciences".into(),
        authors: vec!["O'Brien, A.".into(), "Silva, B.".into()],
        license: "CC-BY-4.0".into(),
        titles: [(Lang::En, "A & B".to_string()), (Lang::Pt, "A & B".to_string())].into(),
    };
    let pair = bitext::model::AlignedPair {
        src_lang: Lang::En,
        tgt_lang: Lang::Pt,
        src_text: "x < y && y > z 'quoted' \"double\"".into(),
        tgt_text: "x < y e y > z".into(),
        article_id: meta.scielo_id.clone(),
        score: 0.123456789,
        provenance: BeadKind::OneOne,
        src_positions: sents(&["a".to_string()], Lang::En).into_iter().map(|s| s.doc_ref.pos).collect(),
        tgt_positions: sents(&["a".to_string()], Lang::Pt).into_iter().map(|s| s.doc_ref.pos).collect(),
    };
    let x = TmxCorpus::from_pairs(vec![pair], [(meta.scielo_id.clone(), meta)].into());
    let written = to_tmx_string(&x).unwrap();
    if parse_tmx(&written).unwrap() != x || validate_structure(&written).is_err() {
        problems.push("escaped synthetic corpus does not round-trip".into());
    }
    if props_per_unit(&written) != [6] {
        problems.push(format!("synthetic no-DOI unit props {:?}", props_per_unit(&written)));
    }

    let pass = problems.is_empty() && no_doi_units > 0;
    report(
        "tmx",
        pass,
        format!(
            "{} fixture files, {units} units ({no_doi_units} without DOI, six props each) round-trip byte-identically; \
             problems: {problems:?}",
            files.len()
        ),
    );
    assert!(pass);
}

#[test]
fn chunked_alignment_agrees_with_unchunked() {
    let cfg = AlignerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let lex = Lexicon::new(&mut rng, 5_000, 1.15);
    let doc = synthetic_doc(&lex, &mut rng, CHUNK_SENTENCES, true);
    let (s, t) = (sents(&doc.src, Lang::En), sents(&doc.tgt, Lang::Pt));
    let start = Instant::now();
    let chunked = chunk_align(&s, &t, &cfg);
    let whole = align_two_pass(&s, &t, &cfg).second;
    let elapsed = start.elapsed();
    let coverage_ok = check_bead_coverage(&chunked.beads, s.len(), t.len()).is_ok()
        && check_bead_coverage(&whole, s.len(), t.len()).is_ok();
    let (a, b) = (one_one_links(&chunked.beads), one_one_links(&whole));
    let agreement = a.intersection(&b).count() as f64 / b.len() as f64;
    let pass = coverage_ok && agreement >= CHUNK_MIN_AGREEMENT && elapsed < CHUNK_TIME;
    report(
        "chunking",
        pass,
        format!(
            "{}x{} sentences in {} chunks: {:.3}% of unchunked 1-1 links reproduced (min {:.0}%), coverage {}, \
             {:.1}s (limit {}s)",
            s.len(),
            t.len(),
            chunked.cuts.len() + 1,
            100.0 * agreement,
            100.0 * CHUNK_MIN_AGREEMENT,
            if coverage_ok { "exact" } else { "broken" },
            elapsed.as_secs_f64(),
            CHUNK_TIME.as_secs()
        ),
    );
    assert!(pass);
}

fn paragraph() -> impl Strategy<Value = String> {
    let piece = prop::sample::select(vec![
        "word", "Word", "Dr.", "e.g.", "et al.", "U.S.", "3.5", "1,000", "end.", "What?", "Yes!", "(see Fig. 2)",
        "(a (nested) note)", "(", ")", "\"Quoted.\"", "¿Qué?", "«Sim.»", "Sr.", "Fig.", "p.", "A.", "[3]", "x", "São",
        "naïve", "...", ";", "-",
    ]);
    let sep = prop::sample::select(vec![" ", " ", " ", "  ", "\n", "\t", " \n ", "\r\n"]);
    prop::collection::vec((piece, sep), 0..60)
        .prop_map(|v| v.into_iter().flat_map(|(p, s)| [p, s]).collect::<String>())
}

fn non_ws(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

#[test]
fn segmentation_conservation() {
    let abbr = Abbreviations::builtin();
    let config = Config {
        cases: SEGMENT_CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let result = runner.run(&paragraph(), |p| {
        for lang in [Lang::En, Lang::Pt, Lang::Es] {
            let joined: String = split_sentences(&p, lang, &abbr).concat();
            prop_assert_eq!(non_ws(&joined), non_ws(&p));
            prop_assert_eq!(non_whitespace_chars(&joined), non_whitespace_chars(&p));
        }
        let stripped = strip_parentheticals(&p);
        prop_assert_eq!(strip_parentheticals(&stripped), stripped.clone());
        let normalized = normalize_whitespace(&p);
        prop_assert_eq!(normalize_whitespace(&normalized), normalized);
        Ok(())
    });
    let pass = result.is_ok();
    report(
        "segmentation",
        pass,
        match &result {
            Ok(()) => format!("{SEGMENT_CASES} random paragraphs: no characters lost, both cleaners idempotent"),
            Err(e) => format!("{e}"),
        },
    );
    assert!(pass);
}
