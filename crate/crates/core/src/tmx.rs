//! TMX 1.4 translation memories with per-article citation metadata.
//!
//! Layout of one unit:
//!
//! ```text
//! <tu srclang="en">
//!   <prop type="scielo_id">S0001</prop> ... six or seven props
//!   <note>bead=1-1 score=0.82</note>
//!   <tuv xml:lang="en"><note>0.1.3</note><seg>...</seg></tuv>
//!   <tuv xml:lang="pt"><note>0.1.3</note><seg>...</seg></tuv>
//! </tu>
//! ```
//!
//! The tuv notes hold the sentence positions behind each segment, so reading
//! a file back recovers the data model exactly. Trilingual units carry three
//! tuvs in en, pt, es order and no tu note.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::error::{Error, Result};
use crate::model::{AlignedPair, ArticleMetadata, BeadKind, Lang, SentencePos, TrilingualUnit};

pub const TMX_VERSION: &str = "1.4";
pub const CREATION_TOOL: &str = "bitext";

#[derive(Debug, Clone, PartialEq)]
pub enum CorpusUnit {
    Pair(AlignedPair),
    Trilingual(TrilingualUnit),
}

impl CorpusUnit {
    pub fn article_id(&self) -> &str {
        match self {
            CorpusUnit::Pair(p) => &p.article_id,
            CorpusUnit::Trilingual(u) => &u.article_id,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TmxCorpus {
    pub units: Vec<CorpusUnit>,
    /// Metadata of every article referenced by `units`.
    pub metadata: BTreeMap<String, ArticleMetadata>,
}

impl TmxCorpus {
    pub fn from_pairs(pairs: Vec<AlignedPair>, metadata: BTreeMap<String, ArticleMetadata>) -> Self {
        TmxCorpus {
            units: pairs.into_iter().map(CorpusUnit::Pair).collect(),
            metadata,
        }
    }

    pub fn from_units(units: Vec<TrilingualUnit>, metadata: BTreeMap<String, ArticleMetadata>) -> Self {
        TmxCorpus {
            units: units.into_iter().map(CorpusUnit::Trilingual).collect(),
            metadata,
        }
    }

    /// The bilingual units, in file order.
    pub fn pairs(&self) -> Vec<AlignedPair> {
        self.units
            .iter()
            .filter_map(|u| match u {
                CorpusUnit::Pair(p) => Some(p.clone()),
                CorpusUnit::Trilingual(_) => None,
            })
            .collect()
    }

    pub fn trilingual_units(&self) -> Vec<TrilingualUnit> {
        self.units
            .iter()
            .filter_map(|u| match u {
                CorpusUnit::Trilingual(t) => Some(t.clone()),
                CorpusUnit::Pair(_) => None,
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Writing

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn format_positions(pos: &[SentencePos]) -> String {
    pos.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
}

fn metadata_props(meta: &ArticleMetadata) -> Vec<(&'static str, String)> {
    let title = meta
        .titles
        .iter()
        .map(|(l, t)| format!("{l}: {t}"))
        .collect::<Vec<_>>()
        .join("\n");
    let mut props = vec![("scielo_id", meta.scielo_id.clone())];
    if let Some(doi) = &meta.doi {
        props.push(("doi", doi.clone()));
    }
    props.extend([
        ("title", title),
        ("authors", meta.authors.join("; ")),
        ("license", meta.license.clone()),
        ("journal", meta.journal.clone()),
        ("subject_area", meta.subject_area.clone()),
    ]);
    props
}

fn check_metadata(meta: &ArticleMetadata) -> Result<()> {
    if meta.authors.iter().any(|a| a.contains("; ") || a.trim() != a || a.is_empty()) {
        return Err(Error::validation(format!(
            "article {}: author names must be trimmed, nonempty and free of \"; \"",
            meta.scielo_id
        )));
    }
    if meta.titles.values().any(|t| t.contains('\n')) {
        return Err(Error::validation(format!("article {}: titles must be single lines", meta.scielo_id)));
    }
    Ok(())
}

fn header_srclang(units: &[CorpusUnit]) -> String {
    let mut src = None;
    for u in units {
        let l = match u {
            CorpusUnit::Pair(p) => p.src_lang,
            CorpusUnit::Trilingual(_) => return "*all*".into(),
        };
        match src {
            None => src = Some(l),
            Some(s) if s != l => return "*all*".into(),
            _ => {}
        }
    }
    src.map(|l| l.code().to_string()).unwrap_or_else(|| "*all*".into())
}

fn write_tuv(out: &mut String, lang: Lang, positions: &[SentencePos], text: &str) {
    let _ = writeln!(
        out,
        "      <tuv xml:lang=\"{}\"><note>{}</note><seg>{}</seg></tuv>",
        lang.code(),
        format_positions(positions),
        escape(text)
    );
}

/// Serializes `corpus` as a TMX document. The output depends only on the
/// input, so equal inputs give identical bytes.
pub fn to_tmx_string(corpus: &TmxCorpus) -> Result<String> {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<tmx version=\"{TMX_VERSION}\">");
    let _ = writeln!(
        out,
        "  <header creationtool=\"{CREATION_TOOL}\" creationtoolversion=\"{}\" segtype=\"sentence\" o-tmf=\"{CREATION_TOOL}\" adminlang=\"en\" srclang=\"{}\" datatype=\"plaintext\"/>",
        env!("CARGO_PKG_VERSION"),
        header_srclang(&corpus.units)
    );
    out.push_str("  <body>\n");
    for (i, unit) in corpus.units.iter().enumerate() {
        let article = unit.article_id();
        let meta = corpus
            .metadata
            .get(article)
            .ok_or_else(|| Error::MissingMetadata(article.to_string()))?;
        check_metadata(meta)?;
        let srclang = match unit {
            CorpusUnit::Pair(p) => {
                if p.src_lang == p.tgt_lang {
                    return Err(Error::validation(format!("unit {i} has a single language variant")));
                }
                p.src_lang.code()
            }
            CorpusUnit::Trilingual(u) => {
                u.validate()?;
                "*all*"
            }
        };
        let _ = writeln!(out, "    <tu srclang=\"{srclang}\">");
        for (key, value) in metadata_props(meta) {
            let _ = writeln!(out, "      <prop type=\"{key}\">{}</prop>", escape(&value));
        }
        match unit {
            CorpusUnit::Pair(p) => {
                let _ = writeln!(out, "      <note>bead={} score={}</note>", p.provenance, p.score);
                write_tuv(&mut out, p.src_lang, &p.src_positions, &p.src_text);
                write_tuv(&mut out, p.tgt_lang, &p.tgt_positions, &p.tgt_text);
            }
            CorpusUnit::Trilingual(u) => {
                for (lang, text) in &u.texts {
                    let pos = u.positions.get(lang).map(Vec::as_slice).unwrap_or(&[]);
                    write_tuv(&mut out, *lang, pos, text);
                }
            }
        }
        out.push_str("    </tu>\n");
    }
    out.push_str("  </body>\n</tmx>\n");
    Ok(out)
}

pub fn write_tmx(corpus: &TmxCorpus, path: impl AsRef<Path>) -> Result<()> {
    let text = to_tmx_string(corpus)?;
    fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Reading

#[derive(Default)]
struct RawTuv {
    lang: Option<Lang>,
    note: String,
    seg: String,
}

#[derive(Default)]
struct RawTu {
    srclang: Option<String>,
    props: Vec<(String, String)>,
    note: String,
    tuvs: Vec<RawTuv>,
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Prop,
    TuNote,
    TuvNote,
    Seg,
}

fn attr(e: &BytesStart<'_>, name: &[u8], unit: Option<usize>) -> Result<Option<String>> {
    for a in e.attributes() {
        let a = a.map_err(|err| Error::TmxParse {
            unit,
            message: err.to_string(),
        })?;
        if a.key.as_ref() == name {
            let v = a.unescape_value().map_err(|err| Error::TmxParse {
                unit,
                message: err.to_string(),
            })?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn parse_positions(s: &str, unit: usize) -> Result<Vec<SentencePos>> {
    s.split_whitespace()
        .map(|p| {
            p.parse().map_err(|_| Error::TmxParse {
                unit: Some(unit),
                message: format!("bad sentence position {p:?}"),
            })
        })
        .collect()
}

fn parse_bead_note(note: &str, unit: usize) -> Result<(BeadKind, f64)> {
    let bad = || Error::TmxParse {
        unit: Some(unit),
        message: format!("expected \"bead=<kind> score=<score>\", found {note:?}"),
    };
    let mut kind = BeadKind::OneOne;
    let mut score = 0.0;
    for field in note.split_whitespace() {
        match field.split_once('=') {
            Some(("bead", v)) => kind = v.parse().map_err(|_| bad())?,
            Some(("score", v)) => score = v.parse().map_err(|_| bad())?,
            _ => return Err(bad()),
        }
    }
    Ok((kind, score))
}

fn props_to_metadata(props: &[(String, String)], unit: usize) -> Result<ArticleMetadata> {
    let get = |k: &str| props.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone());
    let scielo_id = get("scielo_id").ok_or_else(|| Error::TmxParse {
        unit: Some(unit),
        message: "missing scielo_id property".into(),
    })?;
    let mut titles = BTreeMap::new();
    for line in get("title").unwrap_or_default().lines().filter(|l| !l.is_empty()) {
        let parsed = line
            .split_once(": ")
            .and_then(|(l, t)| Some((l.parse::<Lang>().ok()?, t.to_string())));
        let (lang, title) = parsed.ok_or_else(|| Error::TmxParse {
            unit: Some(unit),
            message: format!("bad title line {line:?}"),
        })?;
        titles.insert(lang, title);
    }
    let authors = get("authors").unwrap_or_default();
    Ok(ArticleMetadata {
        scielo_id,
        doi: get("doi"),
        journal: get("journal").unwrap_or_default(),
        subject_area: get("subject_area").unwrap_or_default(),
        authors: if authors.is_empty() {
            Vec::new()
        } else {
            authors.split("; ").map(str::to_string).collect()
        },
        license: get("license").unwrap_or_default(),
        titles,
    })
}

fn finish_unit(tu: RawTu, unit: usize, corpus: &mut TmxCorpus) -> Result<()> {
    let meta = props_to_metadata(&tu.props, unit)?;
    let article_id = meta.scielo_id.clone();
    corpus.metadata.entry(article_id.clone()).or_insert(meta);

    let mut variants = Vec::with_capacity(tu.tuvs.len());
    for tuv in tu.tuvs {
        let lang = tuv.lang.expect("checked at the tuv start tag");
        if variants.iter().any(|(l, _, _)| *l == lang) {
            return Err(Error::TmxParse {
                unit: Some(unit),
                message: format!("language {lang} appears twice"),
            });
        }
        variants.push((lang, parse_positions(&tuv.note, unit)?, tuv.seg));
    }
    match variants.len() {
        2 => {
            let (kind, score) = parse_bead_note(&tu.note, unit)?;
            let src_first = tu.srclang.as_deref().map_or(true, |s| s == variants[0].0.code());
            let (tgt, src) = (variants.pop().unwrap(), variants.pop().unwrap());
            let (src, tgt) = if src_first { (src, tgt) } else { (tgt, src) };
            corpus.units.push(CorpusUnit::Pair(AlignedPair {
                src_lang: src.0,
                tgt_lang: tgt.0,
                src_text: src.2,
                tgt_text: tgt.2,
                article_id,
                score,
                provenance: kind,
                src_positions: src.1,
                tgt_positions: tgt.1,
            }));
        }
        3 => {
            let mut texts = BTreeMap::new();
            let mut positions = BTreeMap::new();
            for (lang, pos, seg) in variants {
                texts.insert(lang, seg);
                positions.insert(lang, pos);
            }
            corpus.units.push(CorpusUnit::Trilingual(TrilingualUnit {
                article_id,
                texts,
                positions,
            }));
        }
        n => {
            return Err(Error::TmxParse {
                unit: Some(unit),
                message: format!("expected 2 or 3 variants, found {n}"),
            })
        }
    }
    Ok(())
}

/// Parses a TMX document produced by [`to_tmx_string`]. Unit numbers in
/// errors count from 1.
pub fn parse_tmx(text: &str) -> Result<TmxCorpus> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(false);
    let mut corpus = TmxCorpus::default();
    let mut seen_root = false;
    let mut tu: Option<RawTu> = None;
    let mut tuv: Option<RawTuv> = None;
    let mut field: Option<Field> = None;
    let mut prop_key = String::new();
    let mut buf = String::new();
    let mut n_units = 0usize;

    loop {
        let current = (n_units > 0 && tu.is_some()).then_some(n_units);
        let event = reader.read_event().map_err(|e| Error::TmxParse {
            unit: current,
            message: format!("malformed XML at byte {}: {e}", reader.error_position()),
        })?;
        match event {
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"tmx" => {
                let version = attr(&e, b"version", None)?.unwrap_or_default();
                if version != TMX_VERSION && version != "1.4b" {
                    return Err(Error::UnsupportedVersion(version));
                }
                seen_root = true;
            }
            Event::Start(e) => match e.name().as_ref() {
                b"tu" => {
                    n_units += 1;
                    tu = Some(RawTu {
                        srclang: attr(&e, b"srclang", Some(n_units))?,
                        ..Default::default()
                    });
                }
                b"tuv" => {
                    let lang = attr(&e, b"xml:lang", Some(n_units))?
                        .or(attr(&e, b"lang", Some(n_units))?)
                        .ok_or_else(|| Error::TmxParse {
                            unit: Some(n_units),
                            message: "tuv without xml:lang".into(),
                        })?;
                    let lang = lang.to_lowercase().parse::<Lang>().map_err(|_| Error::TmxParse {
                        unit: Some(n_units),
                        message: format!("unsupported language {lang:?}"),
                    })?;
                    tuv = Some(RawTuv {
                        lang: Some(lang),
                        ..Default::default()
                    });
                }
                b"prop" => {
                    prop_key = attr(&e, b"type", Some(n_units))?.unwrap_or_default();
                    field = Some(Field::Prop);
                    buf.clear();
                }
                b"note" => {
                    field = Some(if tuv.is_some() { Field::TuvNote } else { Field::TuNote });
                    buf.clear();
                }
                b"seg" => {
                    field = Some(Field::Seg);
                    buf.clear();
                }
                _ => {}
            },
            Event::Text(t) if field.is_some() => {
                let s = t.unescape().map_err(|e| Error::TmxParse {
                    unit: Some(n_units),
                    message: e.to_string(),
                })?;
                buf.push_str(&s);
            }
            Event::CData(t) if field.is_some() => {
                buf.push_str(&String::from_utf8_lossy(&t));
            }
            Event::End(e) => match e.name().as_ref() {
                b"prop" | b"note" | b"seg" => {
                    let text = std::mem::take(&mut buf);
                    match (field.take(), tu.as_mut(), tuv.as_mut()) {
                        (Some(Field::Prop), Some(tu), None) => tu.props.push((std::mem::take(&mut prop_key), text)),
                        (Some(Field::TuNote), Some(tu), None) => tu.note = text,
                        (Some(Field::TuvNote), _, Some(v)) => v.note = text,
                        (Some(Field::Seg), _, Some(v)) => v.seg = text,
                        _ => {}
                    }
                }
                b"tuv" => {
                    if let (Some(tu), Some(v)) = (tu.as_mut(), tuv.take()) {
                        tu.tuvs.push(v);
                    }
                }
                b"tu" => {
                    if let Some(raw) = tu.take() {
                        finish_unit(raw, n_units, &mut corpus)?;
                    }
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    if !seen_root {
        return Err(Error::TmxParse {
            unit: None,
            message: "no <tmx> root element".into(),
        });
    }
    Ok(corpus)
}

pub fn read_tmx(path: impl AsRef<Path>) -> Result<TmxCorpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_tmx(&text)
}

/// Checks the element structure required of a TMX 1.4b document: a `tmx`
/// root holding one `header` and one `body`, `tu` elements in the body,
/// `tuv` elements with `xml:lang` and exactly one `seg`, and `prop`/`note`
/// only where the format allows them.
pub fn validate_structure(text: &str) -> Result<()> {
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<Vec<u8>> = Vec::new();
    let mut headers = 0;
    let mut bodies = 0;
    let mut segs_in_tuv = 0;
    let mut tuvs_in_tu = 0;
    let mut n_units = 0;
    let fail = |unit: Option<usize>, message: String| Err(Error::TmxParse { unit, message });
    loop {
        let event = reader.read_event().map_err(|e| Error::TmxParse {
            unit: None,
            message: e.to_string(),
        })?;
        let (name, empty, has_lang) = match &event {
            Event::Start(e) => (e.name().as_ref().to_vec(), false, attr(e, b"xml:lang", None)?.is_some()),
            Event::Empty(e) => (e.name().as_ref().to_vec(), true, attr(e, b"xml:lang", None)?.is_some()),
            Event::End(e) => {
                let name = e.name().as_ref().to_vec();
                match name.as_slice() {
                    b"tuv" if segs_in_tuv != 1 => {
                        return fail(Some(n_units), format!("tuv has {segs_in_tuv} seg elements"))
                    }
                    b"tu" if tuvs_in_tu < 2 => return fail(Some(n_units), "tu has fewer than two tuv".into()),
                    _ => {}
                }
                stack.pop();
                continue;
            }
            Event::Eof => break,
            _ => continue,
        };
        let parent = stack.last().map(Vec::as_slice);
        let allowed = match (name.as_slice(), parent) {
            (b"tmx", None) => true,
            (b"header", Some(b"tmx")) => {
                headers += 1;
                true
            }
            (b"body", Some(b"tmx")) => {
                bodies += 1;
                true
            }
            (b"tu", Some(b"body")) => {
                n_units += 1;
                tuvs_in_tu = 0;
                true
            }
            (b"tuv", Some(b"tu")) => {
                tuvs_in_tu += 1;
                segs_in_tuv = 0;
                if !has_lang {
                    return fail(Some(n_units), "tuv without xml:lang".into());
                }
                true
            }
            (b"seg", Some(b"tuv")) => {
                segs_in_tuv += 1;
                true
            }
            (b"prop" | b"note", Some(b"header" | b"tu" | b"tuv")) => true,
            _ => false,
        };
        if !allowed {
            return fail(
                (n_units > 0).then_some(n_units),
                format!(
                    "<{}> not allowed inside <{}>",
                    String::from_utf8_lossy(&name),
                    parent.map(String::from_utf8_lossy).unwrap_or_default()
                ),
            );
        }
        if !empty {
            stack.push(name);
        }
    }
    if headers != 1 || bodies != 1 {
        return fail(None, format!("expected one header and one body, found {headers} and {bodies}"));
    }
    Ok(())
}
