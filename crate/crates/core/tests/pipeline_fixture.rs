use std::path::PathBuf;

use bitext::align::AlignerConfig;
use bitext::filter::FilterConfig;
use bitext::langid::builtin_profiles;
use bitext::model::{Lang, LangPair};
use bitext::pipeline::{
    align_articles, filter_alignments, parse_records, read_jsonl, read_pairs, run_all, PipelineConfig, RunPaths,
};
use bitext::store::load_all;
use bitext::tmx::read_tmx;
use bitext::trilingual::join_trilingual;

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/manifest.tsv")
}

fn config(out: &std::path::Path) -> PipelineConfig {
    PipelineConfig {
        out_dir: out.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn run_all_on_three_articles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let summary = run_all(manifest(), &cfg, builtin_profiles()).unwrap();
    println!("{}", summary.to_kv());
    assert_eq!(summary.manifest_entries, 3);
    assert_eq!((summary.ingest.kept, summary.ingest.rejected), (2, 1));
    for p in &summary.pairs {
        assert!(p.filter.reconciles());
        assert_eq!(p.articles_aligned, 2);
    }
    let paths = RunPaths { out_dir: dir.path().to_path_buf() };
    for f in ["store.jsonl", "en-pt.tmx", "en-es.tmx", "pt-es.tmx", "trilingual.tmx", "stats.txt", "run-summary.txt"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let stats = std::fs::read_to_string(paths.stats()).unwrap();
    println!("{stats}");
    assert!(stats.contains("| EN-PT | 2 |"));
    assert!(stats.contains("| EN-PT-ES | 2 |"));
    let tmx = read_tmx(paths.tmx(LangPair::new(Lang::En, Lang::Pt).unwrap())).unwrap();
    assert_eq!(tmx.metadata.len(), 2);
}

#[test]
fn run_all_matches_stage_by_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    run_all(manifest(), &cfg, builtin_profiles()).unwrap();
    let paths = RunPaths { out_dir: dir.path().to_path_buf() };

    let records = load_all(paths.store()).unwrap();
    let (parsed, errors) = parse_records(&records);
    assert!(errors.is_empty());
    let en_pt = LangPair::new(Lang::En, Lang::Pt).unwrap();
    let en_es = LangPair::new(Lang::En, Lang::Es).unwrap();
    let opts = cfg.align_options();
    let mut filtered = Vec::new();
    for pair in [en_pt, en_es] {
        let outcome = align_articles(&parsed, pair, &AlignerConfig::default(), &opts);
        let stored: Vec<bitext::align::DocumentAlignment> = read_jsonl(paths.alignments(pair)).unwrap();
        assert_eq!(outcome.alignments, stored);
        let (pairs, _) = filter_alignments(&outcome.alignments, &FilterConfig::default(), builtin_profiles());
        assert_eq!(pairs, read_pairs(paths.pairs(pair)).unwrap());
        assert_eq!(pairs, read_pairs(paths.tmx(pair)).unwrap());
        filtered.push(pairs);
    }
    let units = join_trilingual(&filtered[0], &filtered[1], Lang::En).unwrap();
    let stored: Vec<bitext::model::TrilingualUnit> = read_jsonl(paths.trilingual()).unwrap();
    assert_eq!(units, stored);
}

