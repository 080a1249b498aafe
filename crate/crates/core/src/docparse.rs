//! Article markup to [`StructuredDocument`].
//!
//! The rule set is deliberately small:
//!
//! * `h1`–`h6`, and block elements whose class contains `sec` or `title`,
//!   open sections; `p` and other block elements hold paragraphs.
//! * Images, tables, figures, scripts, superscripts, reference lists and
//!   footnotes are dropped, as are sections headed "References" and the like.
//! * In-text citation anchors (`<a href="#B3">3</a>`) and bracketed numeric
//!   citations (`[3]`, `[1, 4-6]`) are deleted, keeping the sentence around them.
//! * When no heading structure is found the document is flat: one heading-less
//!   section holding every block in order.

use std::sync::OnceLock;

use regex::Regex;
use scraper::{ElementRef, Html, Node};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DocumentKind, Lang, Section, StructuredDocument};
use crate::segment::normalize_whitespace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Structured when headings are found, flat otherwise.
    #[default]
    Auto,
    /// Always flat; headings become ordinary paragraphs.
    Flat,
}

const DROPPED_ELEMENTS: &[&str] = &[
    "img", "table", "figure", "figcaption", "script", "style", "noscript", "svg", "math", "object",
    "iframe", "video", "audio", "canvas", "sup", "nav", "footer", "header", "form", "button",
    "select", "textarea", "map",
];

const BLOCK_ELEMENTS: &[&str] = &[
    "p", "div", "section", "article", "main", "body", "li", "ul", "ol", "dl", "dt", "dd",
    "blockquote", "pre", "address", "center", "h1", "h2", "h3", "h4", "h5", "h6", "hr", "aside",
];

const REFERENCE_HEADINGS: &[&str] = &[
    "references",
    "reference",
    "bibliography",
    "literature cited",
    "referências",
    "referências bibliográficas",
    "referencias",
    "referencias bibliográficas",
    "bibliografia",
    "bibliografía",
    "notes",
    "notas",
    "footnotes",
];

#[derive(Debug)]
enum Block {
    Heading(String),
    Paragraph(String),
}

fn bracket_citation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\s*\[\s*\d+(?:\s*[-–,;]\s*\d+)*\s*\]").unwrap())
}

fn blank_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\n[ \t\r\u{a0}]*\n").unwrap())
}

fn citation_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[\[(]?[\d\s,;–-]*[\])]?$").unwrap())
}

fn class_tokens(el: &scraper::node::Element) -> impl Iterator<Item = String> + '_ {
    el.attr("class")
        .into_iter()
        .chain(el.attr("id"))
        .flat_map(str::split_whitespace)
        .map(str::to_lowercase)
}

fn is_dropped(el: &scraper::node::Element) -> bool {
    if DROPPED_ELEMENTS.contains(&el.name()) {
        return true;
    }
    class_tokens(el).any(|t| {
        t.starts_with("ref")
            || t.starts_with("fn")
            || t.starts_with("fig")
            || t.starts_with("table")
            || t.contains("footnote")
            || t.contains("xref")
            || t.contains("citation")
            || t.contains("caption")
    })
}

fn is_block(name: &str) -> bool {
    BLOCK_ELEMENTS.contains(&name)
}

fn is_heading(el: ElementRef<'_>) -> bool {
    let name = el.value().name();
    if matches!(name, "h1" | "h2" | "h3" | "h4" | "h5" | "h6") {
        return true;
    }
    if !matches!(name, "p" | "div") {
        return false;
    }
    let marked = class_tokens(el.value()).any(|t| t.contains("sec") || t.contains("title"));
    marked
        && !el
            .descendants()
            .skip(1)
            .filter_map(ElementRef::wrap)
            .any(|d| is_block(d.value().name()))
}

fn is_citation_anchor(el: ElementRef<'_>) -> bool {
    if el.value().name() != "a" {
        return false;
    }
    let internal = el.value().attr("href").is_some_and(|h| h.starts_with('#'));
    let text: String = el.text().collect();
    internal && citation_marker().is_match(text.trim())
}

struct Collector {
    blocks: Vec<Block>,
    buf: String,
}

impl Collector {
    fn flush(&mut self) {
        if self.buf.trim().is_empty() {
            self.buf.clear();
            return;
        }
        let buf = std::mem::take(&mut self.buf);
        for chunk in blank_line().split(&buf) {
            let text = clean_text(chunk);
            if !text.is_empty() {
                self.blocks.push(Block::Paragraph(text));
            }
        }
    }

    fn walk(&mut self, node: ego_tree::NodeRef<'_, Node>) {
        match node.value() {
            Node::Text(t) => self.buf.push_str(t),
            Node::Element(el) => {
                let Some(er) = ElementRef::wrap(node) else { return };
                if is_dropped(el) || el.name() == "head" || el.name() == "title" || is_citation_anchor(er) {
                    return;
                }
                if el.name() == "br" {
                    self.buf.push('\n');
                    return;
                }
                if is_heading(er) {
                    self.flush();
                    let mut inner = Collector {
                        blocks: Vec::new(),
                        buf: String::new(),
                    };
                    for child in node.children() {
                        inner.walk(child);
                    }
                    let text = clean_text(&inner.buf);
                    if !text.is_empty() {
                        self.blocks.push(Block::Heading(text));
                    }
                    return;
                }
                let block = is_block(el.name());
                if block {
                    self.flush();
                }
                for child in node.children() {
                    self.walk(child);
                }
                if block {
                    self.flush();
                }
            }
            Node::Document | Node::Fragment => {
                for child in node.children() {
                    self.walk(child);
                }
            }
            _ => {}
        }
    }
}

fn clean_text(raw: &str) -> String {
    let text = normalize_whitespace(raw);
    normalize_whitespace(&bracket_citation().replace_all(&text, ""))
}

fn is_reference_heading(heading: &str) -> bool {
    let h = heading
        .trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c.is_whitespace())
        .trim_end_matches(|c: char| c == ':' || c == '.' || c.is_whitespace())
        .to_lowercase();
    REFERENCE_HEADINGS.contains(&h.as_str())
}

/// Parses markup, detecting structure automatically.
pub fn parse_html(markup: &str, lang: Lang) -> Result<StructuredDocument> {
    parse_html_with(markup, lang, ParseMode::Auto)
}

pub fn parse_html_with(markup: &str, lang: Lang, mode: ParseMode) -> Result<StructuredDocument> {
    let html = Html::parse_document(markup);
    let title = html
        .root_element()
        .descendants()
        .filter_map(ElementRef::wrap)
        .find(|e| e.value().name() == "title")
        .map(|e| normalize_whitespace(&e.text().collect::<String>()))
        .filter(|t| !t.is_empty());

    let mut collector = Collector {
        blocks: Vec::new(),
        buf: String::new(),
    };
    collector.walk(html.tree.root());
    collector.flush();

    // Drop reference / notes sections with their contents.
    let mut blocks = Vec::with_capacity(collector.blocks.len());
    let mut skipping = false;
    for b in collector.blocks {
        match &b {
            Block::Heading(h) => {
                skipping = is_reference_heading(h);
                if !skipping {
                    blocks.push(b);
                }
            }
            Block::Paragraph(_) if !skipping => blocks.push(b),
            Block::Paragraph(_) => {}
        }
    }

    let structured = mode == ParseMode::Auto && {
        let mut seen_heading = false;
        blocks.iter().any(|b| match b {
            Block::Heading(_) => {
                seen_heading = true;
                false
            }
            Block::Paragraph(_) => seen_heading,
        })
    };

    let sections = if structured {
        let mut sections = Vec::new();
        let mut current = Section {
            heading: None,
            paragraphs: Vec::new(),
        };
        for b in blocks {
            match b {
                Block::Heading(h) => {
                    if current.paragraphs.is_empty() {
                        current.heading = Some(match current.heading.take() {
                            Some(prev) => format!("{prev} / {h}"),
                            None => h,
                        });
                    } else {
                        sections.push(std::mem::replace(
                            &mut current,
                            Section {
                                heading: Some(h),
                                paragraphs: Vec::new(),
                            },
                        ));
                    }
                }
                Block::Paragraph(p) => current.paragraphs.push(p),
            }
        }
        if !current.paragraphs.is_empty() {
            sections.push(current);
        }
        sections
    } else {
        let paragraphs: Vec<String> = blocks
            .into_iter()
            .map(|b| match b {
                Block::Heading(t) | Block::Paragraph(t) => t,
            })
            .collect();
        vec![Section {
            heading: None,
            paragraphs,
        }]
    };

    let doc = StructuredDocument {
        lang,
        title,
        kind: if structured {
            DocumentKind::Structured
        } else {
            DocumentKind::Flat
        },
        sections,
    };
    if doc.paragraph_count() == 0 {
        return Err(Error::EmptyDocument);
    }
    Ok(doc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompatibilityMode {
    Structured,
    Flat,
    Incompatible,
}

/// How two language versions of an article can be aligned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompatibilityVerdict {
    pub mode: CompatibilityMode,
    pub shape_a: Vec<usize>,
    pub shape_b: Vec<usize>,
}

pub fn check_compatibility(a: &StructuredDocument, b: &StructuredDocument) -> CompatibilityVerdict {
    let (shape_a, shape_b) = (a.shape(), b.shape());
    let mode = if a.kind == DocumentKind::Structured && b.kind == DocumentKind::Structured && shape_a == shape_b {
        CompatibilityMode::Structured
    } else if a.paragraph_count() == b.paragraph_count() {
        CompatibilityMode::Flat
    } else {
        CompatibilityMode::Incompatible
    };
    CompatibilityVerdict { mode, shape_a, shape_b }
}
