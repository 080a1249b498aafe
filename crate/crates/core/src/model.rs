//! Shared domain types.
//!
//! Every other module speaks in these values: articles as ingested, parsed
//! documents, sentences with positional identity, alignment beads and the
//! bilingual / trilingual units that make up the released corpus.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three corpus languages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    En,
    Pt,
    Es,
}

impl Lang {
    pub const ALL: [Lang; 3] = [Lang::En, Lang::Pt, Lang::Es];

    pub fn code(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::Pt => "pt",
            Lang::Es => "es",
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Lang {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" => Ok(Lang::En),
            "pt" => Ok(Lang::Pt),
            "es" => Ok(Lang::Es),
            other => Err(Error::validation(format!("unknown language code {other:?}"))),
        }
    }
}

/// An ordered language pair such as `en-pt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LangPair {
    pub src: Lang,
    pub tgt: Lang,
}

impl LangPair {
    pub fn new(src: Lang, tgt: Lang) -> Result<Self> {
        if src == tgt {
            return Err(Error::validation(format!("language pair {src}-{tgt} repeats a language")));
        }
        Ok(LangPair { src, tgt })
    }

    pub fn contains(self, lang: Lang) -> bool {
        self.src == lang || self.tgt == lang
    }
}

impl fmt::Display for LangPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src, self.tgt)
    }
}

impl FromStr for LangPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::validation(format!("expected a pair like en-pt, got {s:?}")))?;
        LangPair::new(a.parse()?, b.parse()?)
    }
}

/// Citation and licensing metadata for one article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleMetadata {
    pub scielo_id: String,
    pub doi: Option<String>,
    pub journal: String,
    pub subject_area: String,
    pub authors: Vec<String>,
    pub license: String,
    /// Titles per language. A body language may lack a title here.
    pub titles: BTreeMap<Lang, String>,
}

impl ArticleMetadata {
    pub fn validate(&self) -> Result<()> {
        if self.scielo_id.trim().is_empty() {
            return Err(Error::validation("scielo_id is empty"));
        }
        if self.license.trim().is_empty() {
            return Err(Error::validation(format!("article {} has an empty license", self.scielo_id)));
        }
        Ok(())
    }
}

/// One source article: metadata plus the raw markup of each language version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticleRecord {
    pub metadata: ArticleMetadata,
    pub bodies: BTreeMap<Lang, String>,
}

impl ArticleRecord {
    pub fn id(&self) -> &str {
        &self.metadata.scielo_id
    }

    pub fn languages(&self) -> impl Iterator<Item = Lang> + '_ {
        self.bodies.keys().copied()
    }

    pub fn validate(&self) -> Result<()> {
        self.metadata.validate()?;
        if self.bodies.is_empty() {
            return Err(Error::validation(format!("article {} has no bodies", self.id())));
        }
        Ok(())
    }

    /// Languages that have a body but no title.
    pub fn missing_titles(&self) -> Vec<Lang> {
        self.languages()
            .filter(|l| !self.metadata.titles.contains_key(l))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocumentKind {
    Structured,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: Option<String>,
    pub paragraphs: Vec<String>,
}

/// A parsed article body. Flat documents hold exactly one heading-less section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredDocument {
    pub lang: Lang,
    pub title: Option<String>,
    pub kind: DocumentKind,
    pub sections: Vec<Section>,
}

impl StructuredDocument {
    pub fn paragraph_count(&self) -> usize {
        self.sections.iter().map(|s| s.paragraphs.len()).sum()
    }

    /// Paragraph counts per section.
    pub fn shape(&self) -> Vec<usize> {
        self.sections.iter().map(|s| s.paragraphs.len()).collect()
    }

    /// All paragraphs in document order with their (section, paragraph) indices.
    pub fn paragraphs(&self) -> impl Iterator<Item = (usize, usize, &str)> {
        self.sections.iter().enumerate().flat_map(|(si, s)| {
            s.paragraphs
                .iter()
                .enumerate()
                .map(move |(pi, p)| (si, pi, p.as_str()))
        })
    }
}

/// Position of a sentence inside its document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentencePos {
    pub section: u32,
    pub paragraph: u32,
    pub sentence: u32,
}

impl fmt::Display for SentencePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.section, self.paragraph, self.sentence)
    }
}

impl FromStr for SentencePos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split('.').map(|p| p.parse::<u32>());
        match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(Ok(section)), Some(Ok(paragraph)), Some(Ok(sentence)), None) => Ok(SentencePos {
                section,
                paragraph,
                sentence,
            }),
            _ => Err(Error::validation(format!("bad sentence position {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentenceRef {
    pub article_id: String,
    pub lang: Lang,
    pub pos: SentencePos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub doc_ref: SentenceRef,
}

impl Sentence {
    /// Length in characters, the unit of the length model.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// Shape of one alignment unit: how many source and target sentences it groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BeadKind {
    #[serde(rename = "1-1")]
    OneOne,
    #[serde(rename = "1-0")]
    OneZero,
    #[serde(rename = "0-1")]
    ZeroOne,
    #[serde(rename = "2-1")]
    TwoOne,
    #[serde(rename = "1-2")]
    OneTwo,
    #[serde(rename = "2-2")]
    TwoTwo,
}

impl BeadKind {
    /// All kinds in tie-break order.
    pub const ALL: [BeadKind; 6] = [
        BeadKind::OneOne,
        BeadKind::OneZero,
        BeadKind::ZeroOne,
        BeadKind::TwoOne,
        BeadKind::OneTwo,
        BeadKind::TwoTwo,
    ];

    /// (source sentences, target sentences).
    pub fn sizes(self) -> (usize, usize) {
        match self {
            BeadKind::OneOne => (1, 1),
            BeadKind::OneZero => (1, 0),
            BeadKind::ZeroOne => (0, 1),
            BeadKind::TwoOne => (2, 1),
            BeadKind::OneTwo => (1, 2),
            BeadKind::TwoTwo => (2, 2),
        }
    }

    pub fn is_unaligned(self) -> bool {
        matches!(self, BeadKind::OneZero | BeadKind::ZeroOne)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BeadKind::OneOne => "1-1",
            BeadKind::OneZero => "1-0",
            BeadKind::ZeroOne => "0-1",
            BeadKind::TwoOne => "2-1",
            BeadKind::OneTwo => "1-2",
            BeadKind::TwoTwo => "2-2",
        }
    }
}

impl fmt::Display for BeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BeadKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidBead(s.to_string()))
    }
}

/// One alignment unit over two sentence lists.
///
/// Sentences are referenced by index into the lists that were aligned. `cost`
/// is the term the aligner charged for this bead (lower is better); `score`
/// is the pair confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bead {
    pub kind: BeadKind,
    pub src_start: usize,
    pub tgt_start: usize,
    pub cost: f64,
    pub score: f64,
}

impl Bead {
    pub fn new(kind: BeadKind, src_start: usize, tgt_start: usize) -> Self {
        Bead {
            kind,
            src_start,
            tgt_start,
            cost: 0.0,
            score: 0.0,
        }
    }

    pub fn src_range(&self) -> Range<usize> {
        self.src_start..self.src_start + self.kind.sizes().0
    }

    pub fn tgt_range(&self) -> Range<usize> {
        self.tgt_start..self.tgt_start + self.kind.sizes().1
    }

    /// Same kind and position, ignoring cost and score.
    pub fn same_link(&self, other: &Bead) -> bool {
        self.kind == other.kind && self.src_start == other.src_start && self.tgt_start == other.tgt_start
    }
}

/// Checks that `beads` is monotone and covers `0..n_src` and `0..n_tgt`
/// exactly once each.
pub fn check_bead_coverage(beads: &[Bead], n_src: usize, n_tgt: usize) -> Result<()> {
    let (mut i, mut j) = (0, 0);
    for (k, b) in beads.iter().enumerate() {
        if b.src_start != i || b.tgt_start != j {
            return Err(Error::validation(format!(
                "bead {k} starts at ({}, {}) but coverage is at ({i}, {j})",
                b.src_start, b.tgt_start
            )));
        }
        let (di, dj) = b.kind.sizes();
        i += di;
        j += dj;
    }
    if i != n_src || j != n_tgt {
        return Err(Error::validation(format!(
            "beads cover ({i}, {j}) sentences, expected ({n_src}, {n_tgt})"
        )));
    }
    Ok(())
}

/// A bilingual unit of the released corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub src_lang: Lang,
    pub tgt_lang: Lang,
    pub src_text: String,
    pub tgt_text: String,
    pub article_id: String,
    pub score: f64,
    pub provenance: BeadKind,
    pub src_positions: Vec<SentencePos>,
    pub tgt_positions: Vec<SentencePos>,
}

impl AlignedPair {
    pub fn pair(&self) -> LangPair {
        LangPair {
            src: self.src_lang,
            tgt: self.tgt_lang,
        }
    }

    /// Text and positions for one side, if `lang` is one of the pair's languages.
    pub fn side(&self, lang: Lang) -> Option<(&str, &[SentencePos])> {
        if lang == self.src_lang {
            Some((&self.src_text, &self.src_positions))
        } else if lang == self.tgt_lang {
            Some((&self.tgt_text, &self.tgt_positions))
        } else {
            None
        }
    }
}

/// A unit aligned across all three languages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrilingualUnit {
    pub article_id: String,
    pub texts: BTreeMap<Lang, String>,
    /// Sentence positions behind each text.
    #[serde(default)]
    pub positions: BTreeMap<Lang, Vec<SentencePos>>,
}

impl TrilingualUnit {
    pub fn validate(&self) -> Result<()> {
        if self.texts.len() != 3 || self.texts.values().any(|t| t.trim().is_empty()) {
            return Err(Error::validation(format!(
                "trilingual unit of {} needs three nonempty texts",
                self.article_id
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lang_codes_round_trip() {
        for l in Lang::ALL {
            assert_eq!(l.code().parse::<Lang>().unwrap(), l);
        }
        assert!("fr".parse::<Lang>().is_err());
        assert_eq!("EN".parse::<Lang>().unwrap(), Lang::En);
    }

    #[test]
    fn pair_rejects_same_language() {
        assert!("en-en".parse::<LangPair>().is_err());
        let p: LangPair = "pt-es".parse().unwrap();
        assert_eq!(p.to_string(), "pt-es");
    }

    #[test]
    fn bead_kind_parse() {
        for k in BeadKind::ALL {
            assert_eq!(k.as_str().parse::<BeadKind>().unwrap(), k);
        }
        assert!(matches!("3-1".parse::<BeadKind>(), Err(Error::InvalidBead(_))));
    }

    #[test]
    fn coverage_accounting() {
        let beads = [
            Bead::new(BeadKind::OneOne, 0, 0),
            Bead::new(BeadKind::TwoOne, 1, 1),
            Bead::new(BeadKind::ZeroOne, 3, 2),
        ];
        check_bead_coverage(&beads, 3, 3).unwrap();
        assert!(check_bead_coverage(&beads, 3, 4).is_err());
        assert!(check_bead_coverage(&beads[1..], 3, 3).is_err());
    }

    #[test]
    fn sentence_pos_text_form() {
        let p = SentencePos {
            section: 1,
            paragraph: 4,
            sentence: 0,
        };
        assert_eq!(p.to_string(), "1.4.0");
        assert_eq!("1.4.0".parse::<SentencePos>().unwrap(), p);
        assert!("1.4".parse::<SentencePos>().is_err());
    }
}
