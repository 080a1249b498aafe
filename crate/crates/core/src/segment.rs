//! Pre-alignment normalization and rule-based sentence splitting.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Lang, Sentence, SentencePos, SentenceRef, StructuredDocument};

/// Removes every balanced parenthesized span with its contents, innermost
/// first, then any unmatched parenthesis. A space left dangling before
/// punctuation or another space is removed along with the span.
pub fn strip_parentheticals(text: &str) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    loop {
        // Innermost pair: a ')' whose nearest preceding '(' has no ')' between.
        let mut open = None;
        let mut span = None;
        for (i, &c) in chars.iter().enumerate() {
            match c {
                '(' => open = Some(i),
                ')' => {
                    if let Some(o) = open {
                        span = Some((o, i));
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some((mut start, end)) = span else { break };
        let next = chars.get(end + 1).copied();
        if start > 0
            && chars[start - 1] == ' '
            && next.map_or(true, |n| n == ' ' || is_closing_punct(n))
        {
            start -= 1;
        }
        chars.drain(start..=end);
    }
    chars.retain(|&c| c != '(' && c != ')');
    collapse_spaces(&chars.into_iter().collect::<String>())
}

fn is_closing_punct(c: char) -> bool {
    matches!(c, '.' | ',' | ';' | ':' | '!' | '?')
}

fn collapse_spaces(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c == ' ' && (out.is_empty() || out.ends_with(' ')) {
            continue;
        }
        out.push(c);
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Replaces newlines and carriage returns with spaces, collapses whitespace
/// runs to a single space and trims.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Per-language abbreviation lists. A period ending one of these never ends a
/// sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Abbreviations {
    lists: BTreeMap<Lang, Vec<String>>,
}

const BUILTIN_EN: &str = include_str!("../data/abbrev/en.txt");
const BUILTIN_PT: &str = include_str!("../data/abbrev/pt.txt");
const BUILTIN_ES: &str = include_str!("../data/abbrev/es.txt");

fn parse_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

impl Default for Abbreviations {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Abbreviations {
    pub fn builtin() -> Self {
        let lists = [
            (Lang::En, BUILTIN_EN),
            (Lang::Pt, BUILTIN_PT),
            (Lang::Es, BUILTIN_ES),
        ]
        .into_iter()
        .map(|(l, t)| (l, parse_list(t)))
        .collect();
        Abbreviations { lists }
    }

    /// Built-in lists, with any `<lang>.txt` found in `dir` replacing the
    /// corresponding language.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let mut abbr = Self::builtin();
        for lang in Lang::ALL {
            let path = dir.as_ref().join(format!("{lang}.txt"));
            if path.is_file() {
                abbr.lists.insert(lang, parse_list(&fs::read_to_string(path)?));
            }
        }
        Ok(abbr)
    }

    pub fn get(&self, lang: Lang) -> &[String] {
        self.lists.get(&lang).map(Vec::as_slice).unwrap_or(&[])
    }

    /// True when `prefix` (text up to and including a period) ends with an
    /// abbreviation that starts at a word boundary.
    fn ends_with_abbreviation(&self, lang: Lang, prefix: &str) -> bool {
        self.get(lang).iter().any(|a| {
            prefix.ends_with(a.as_str()) && {
                let before = &prefix[..prefix.len() - a.len()];
                before
                    .chars()
                    .next_back()
                    .map_or(true, |c| c.is_whitespace() || is_opening(c))
            }
        })
    }
}

fn is_opening(c: char) -> bool {
    matches!(c, '"' | '\'' | '“' | '‘' | '«' | '¿' | '¡' | '(' | '[')
}

fn is_trailing_closer(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '"' | '\'' | '”' | '’' | '»' | ')' | ']')
}

/// Single uppercase letter initial such as the "J." in "J. Smith".
fn ends_with_initial(prefix: &str) -> bool {
    let Some(body) = prefix.strip_suffix('.') else {
        return false;
    };
    let mut rev = body.chars().rev();
    match (rev.next(), rev.next()) {
        (Some(c), None) => c.is_uppercase(),
        (Some(c), Some(b)) => c.is_uppercase() && (b.is_whitespace() || is_opening(b) || b == '.'),
        _ => false,
    }
}

/// Splits a normalized paragraph into sentence strings.
///
/// A boundary is a `.`, `!` or `?` (plus any closing quotes or brackets)
/// followed by whitespace and then an uppercase letter or digit, optionally
/// behind an opening quote or inverted mark. Periods ending a listed
/// abbreviation or a single-letter initial are not boundaries.
pub fn split_sentences(paragraph: &str, lang: Lang, abbr: &Abbreviations) -> Vec<String> {
    let text = paragraph.trim();
    let mut out = Vec::new();
    if text.is_empty() {
        return out;
    }
    let idx: Vec<(usize, char)> = text.char_indices().collect();
    let mut start = 0usize;
    let mut k = 0usize;
    while k < idx.len() {
        let (pos, c) = idx[k];
        if !matches!(c, '.' | '!' | '?') {
            k += 1;
            continue;
        }
        let terminal_pos = pos;
        let mut e = k + 1;
        while e < idx.len() && is_trailing_closer(idx[e].1) {
            e += 1;
        }
        if e >= idx.len() || !idx[e].1.is_whitespace() {
            k = e.max(k + 1);
            continue;
        }
        let end_byte = idx[e].0;
        let mut n = e;
        while n < idx.len() && idx[n].1.is_whitespace() {
            n += 1;
        }
        let mut m = n;
        while m < idx.len() && is_opening(idx[m].1) {
            m += 1;
        }
        let starts_upper = m < idx.len() && (idx[m].1.is_uppercase() || idx[m].1.is_ascii_digit());
        let blocked = c == '.' && {
            let prefix = &text[start..terminal_pos + 1];
            abbr.ends_with_abbreviation(lang, prefix) || ends_with_initial(prefix)
        };
        if starts_upper && !blocked {
            let sent = text[start..end_byte].trim();
            if !sent.is_empty() {
                out.push(sent.to_string());
            }
            start = if n < idx.len() { idx[n].0 } else { text.len() };
        }
        k = n;
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}

/// Cleans a raw paragraph the way the aligner expects: parentheticals
/// removed, whitespace normalized.
pub fn preprocess(paragraph: &str) -> String {
    normalize_whitespace(&strip_parentheticals(&normalize_whitespace(paragraph)))
}

/// The sentences of one paragraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentedParagraph {
    pub section: usize,
    pub paragraph: usize,
    pub sentences: Vec<Sentence>,
}

/// A document reduced to sentences, paragraph boundaries kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentedDocument {
    pub article_id: String,
    pub lang: Lang,
    pub paragraphs: Vec<SegmentedParagraph>,
}

impl SegmentedDocument {
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.paragraphs.iter().flat_map(|p| p.sentences.iter())
    }

    pub fn sentence_count(&self) -> usize {
        self.paragraphs.iter().map(|p| p.sentences.len()).sum()
    }
}

/// Preprocesses and splits every paragraph of `doc`. Paragraphs that end up
/// empty are kept (with no sentences) so paragraph indices stay comparable
/// across languages.
pub fn segment_document(doc: &StructuredDocument, article_id: &str, abbr: &Abbreviations) -> SegmentedDocument {
    let paragraphs = doc
        .paragraphs()
        .map(|(si, pi, text)| {
            let sentences = split_sentences(&preprocess(text), doc.lang, abbr)
                .into_iter()
                .enumerate()
                .map(|(k, text)| Sentence {
                    text,
                    doc_ref: SentenceRef {
                        article_id: article_id.to_string(),
                        lang: doc.lang,
                        pos: SentencePos {
                            section: si as u32,
                            paragraph: pi as u32,
                            sentence: k as u32,
                        },
                    },
                })
                .collect();
            SegmentedParagraph {
                section: si,
                paragraph: pi,
                sentences,
            }
        })
        .collect();
    SegmentedDocument {
        article_id: article_id.to_string(),
        lang: doc.lang,
        paragraphs,
    }
}
