//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export takes and returns plain strings; structured results are JSON.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use bitext::align::{align_segmented, bead_to_pair, AlignOptions, AlignerConfig};
use bitext::docparse::check_compatibility;
use bitext::evalkit::{bleu_text, BleuOptions};
use bitext::langid::{builtin_profiles, detect};
use bitext::model::{DocumentKind, Lang, Section, StructuredDocument};
use bitext::segment::segment_document;

#[derive(Debug, Serialize)]
pub struct DemoPair {
    pub kind: String,
    pub score: f64,
    pub src: String,
    pub tgt: String,
}

#[derive(Debug, Serialize)]
pub struct DemoDetection {
    pub lang: String,
    /// `null` when only one language could be scored.
    pub margin: Option<f64>,
    pub distances: Vec<(String, usize)>,
}

fn to_document(text: &str, lang: Lang) -> StructuredDocument {
    let paragraphs: Vec<String> = text
        .split("\n\n")
        .map(|p| p.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|p| !p.is_empty())
        .collect();
    StructuredDocument {
        lang,
        title: None,
        kind: DocumentKind::Flat,
        sections: vec![Section {
            heading: None,
            paragraphs,
        }],
    }
}

/// Splits both texts into sentences and aligns them. Blank lines separate
/// paragraphs; with equal paragraph counts each paragraph pair is aligned on
/// its own, otherwise the texts are aligned as a whole. Unaligned sentences
/// appear with an empty other side.
pub fn align(src: &str, tgt: &str, src_lang: &str, tgt_lang: &str) -> Result<Vec<DemoPair>, String> {
    let src_lang: Lang = src_lang.parse().map_err(|e: bitext::Error| e.to_string())?;
    let tgt_lang: Lang = tgt_lang.parse().map_err(|e: bitext::Error| e.to_string())?;
    let (a, b) = (to_document(src, src_lang), to_document(tgt, tgt_lang));
    if a.paragraph_count() == 0 || b.paragraph_count() == 0 {
        return Err("both texts need some content".into());
    }
    let opts = AlignOptions {
        document_fallback: true,
        ..Default::default()
    };
    let sa = segment_document(&a, "demo", &opts.abbreviations);
    let sb = segment_document(&b, "demo", &opts.abbreviations);
    let alignment = align_segmented(&sa, &sb, &check_compatibility(&a, &b), &AlignerConfig::default(), &opts)
        .map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for block in &alignment.blocks {
        for bead in &block.beads {
            let join = |s: &[bitext::model::Sentence]| s.iter().map(|x| x.text.as_str()).collect::<Vec<_>>().join(" ");
            let (src, tgt) = match bead_to_pair(block, bead, alignment.pair, "demo") {
                Some(p) => (p.src_text, p.tgt_text),
                None => (join(&block.src[bead.src_range()]), join(&block.tgt[bead.tgt_range()])),
            };
            out.push(DemoPair {
                kind: bead.kind.to_string(),
                score: bead.score,
                src,
                tgt,
            });
        }
    }
    Ok(out)
}

pub fn identify(text: &str) -> Result<DemoDetection, String> {
    let d = detect(text, builtin_profiles()).map_err(|e| e.to_string())?;
    Ok(DemoDetection {
        lang: d.lang.to_string(),
        margin: d.margin.is_finite().then_some(d.margin),
        distances: d.distances.iter().map(|(l, x)| (l.to_string(), *x)).collect(),
    })
}

/// Corpus BLEU over line-aligned texts, as a one-line report.
pub fn bleu(candidate: &str, reference: &str, lowercase: bool) -> Result<String, String> {
    bleu_text(
        candidate,
        reference,
        BleuOptions {
            lowercase,
            ..Default::default()
        },
    )
    .map(|r| r.to_string())
    .map_err(|e| e.to_string())
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo types serialize")
}

#[wasm_bindgen]
pub fn align_texts(src: &str, tgt: &str, src_lang: &str, tgt_lang: &str) -> Result<String, JsError> {
    align(src, tgt, src_lang, tgt_lang).map(|p| json(&p)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn detect_language(text: &str) -> Result<String, JsError> {
    identify(text).map(|d| json(&d)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bleu_score(candidate: &str, reference: &str, lowercase: bool) -> Result<String, JsError> {
    bleu(candidate, reference, lowercase).map_err(|e| JsError::new(&e))
}
