//! Character n-gram language identification (rank-order distance).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::Lang;

pub const DEFAULT_K: usize = 400;
pub const MIN_TRAINING_CHARS: usize = 10_000;
const MAX_N: usize = 4;

const SEED_EN: &str = include_str!("../data/seed/en.txt");
const SEED_PT: &str = include_str!("../data/seed/pt.txt");
const SEED_ES: &str = include_str!("../data/seed/es.txt");

/// Training text bundled for `lang`, one sentence per line.
pub fn seed_text(lang: Lang) -> &'static str {
    match lang {
        Lang::En => SEED_EN,
        Lang::Pt => SEED_PT,
        Lang::Es => SEED_ES,
    }
}

/// The top-K n-grams of a language, ranked from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageProfile {
    lang: Lang,
    k: usize,
    ranks: HashMap<String, usize>,
}

/// Counts 1- to 4-grams over lowercased letter runs, each padded with one
/// space on either side.
pub fn ngram_counts(text: &str) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    let lower = text.to_lowercase();
    for word in lower.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()) {
        let padded: Vec<char> = std::iter::once(' ')
            .chain(word.chars())
            .chain(std::iter::once(' '))
            .collect();
        for n in 1..=MAX_N {
            for gram in padded.windows(n) {
                if gram.iter().all(|&c| c == ' ') {
                    continue;
                }
                *counts.entry(gram.iter().collect::<String>()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// N-grams by descending frequency, ties in lexicographic order, at most `k`.
pub fn ranked_ngrams(text: &str, k: usize) -> Vec<String> {
    let mut grams: Vec<(String, usize)> = ngram_counts(text).into_iter().collect();
    grams.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    grams.truncate(k);
    grams.into_iter().map(|(g, _)| g).collect()
}

pub fn train_profile(corpus: &str, lang: Lang, k: usize) -> Result<LanguageProfile> {
    let got = corpus.chars().count();
    if got < MIN_TRAINING_CHARS {
        return Err(Error::InsufficientData {
            needed: MIN_TRAINING_CHARS,
            got,
        });
    }
    if k == 0 {
        return Err(Error::validation("profile size K must be positive"));
    }
    Ok(LanguageProfile::from_ranked(lang, k, ranked_ngrams(corpus, k)))
}

impl LanguageProfile {
    fn from_ranked(lang: Lang, k: usize, grams: Vec<String>) -> Self {
        let ranks = grams.into_iter().enumerate().map(|(i, g)| (g, i + 1)).collect();
        LanguageProfile { lang, k, ranks }
    }

    pub fn lang(&self) -> Lang {
        self.lang
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn rank(&self, gram: &str) -> Option<usize> {
        self.ranks.get(gram).copied()
    }

    /// N-grams in rank order.
    pub fn ngrams(&self) -> Vec<&str> {
        let mut v: Vec<(&str, usize)> = self.ranks.iter().map(|(g, &r)| (g.as_str(), r)).collect();
        v.sort_by_key(|&(_, r)| r);
        v.into_iter().map(|(g, _)| g).collect()
    }

    /// Sum of rank displacements of `grams` (in their own rank order), with
    /// `K` charged for each n-gram missing from the profile.
    pub fn distance(&self, grams: &[String]) -> usize {
        grams
            .iter()
            .enumerate()
            .map(|(i, g)| match self.ranks.get(g) {
                Some(&r) => r.abs_diff(i + 1),
                None => self.k,
            })
            .sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("lang={} K={}\n", self.lang, self.k);
        for (i, g) in self.ngrams().into_iter().enumerate() {
            let _ = writeln!(out, "{g}\t{}", i + 1);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing profile header".into(),
        })?;
        let bad_header = || Error::Parse {
            line: 1,
            message: format!("expected \"lang=<code> K=<K>\", found {header:?}"),
        };
        let mut lang = None;
        let mut k = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("lang", v)) => lang = Some(v.parse::<Lang>().map_err(|_| bad_header())?),
                Some(("K", v)) => k = Some(v.parse::<usize>().map_err(|_| bad_header())?),
                _ => return Err(bad_header()),
            }
        }
        let (lang, k) = lang.zip(k).ok_or_else(bad_header)?;
        let mut ranks = HashMap::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let parsed = line
                .rsplit_once('\t')
                .and_then(|(g, r)| Some((g.to_string(), r.parse::<usize>().ok()?)));
            let Some((gram, rank)) = parsed else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected <ngram>\\t<rank>".into(),
                });
            };
            ranks.insert(gram, rank);
        }
        let mut seen: Vec<usize> = ranks.values().copied().collect();
        seen.sort_unstable();
        if seen.iter().enumerate().any(|(i, &r)| r != i + 1) || seen.len() > k {
            return Err(Error::validation("profile ranks must be dense from 1 and at most K"));
        }
        Ok(LanguageProfile { lang, k, ranks })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub lang: Lang,
    /// Relative gap between the best and second-best distance.
    pub margin: f64,
    /// Distance per candidate language, best first.
    pub distances: Vec<(Lang, usize)>,
}

pub fn detect(text: &str, profiles: &[LanguageProfile]) -> Result<Detection> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    if profiles.is_empty() {
        return Err(Error::validation("no language profiles given"));
    }
    let k = profiles.iter().map(|p| p.k).max().unwrap_or(DEFAULT_K);
    let grams = ranked_ngrams(text, k);
    if grams.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut distances: Vec<(Lang, usize)> = profiles.iter().map(|p| (p.lang, p.distance(&grams))).collect();
    distances.sort_by_key(|&(lang, d)| (d, lang));
    distances.dedup_by_key(|(lang, _)| *lang);
    let best = distances[0].1;
    let margin = match distances.get(1) {
        None => f64::INFINITY,
        Some(&(_, second)) if best == 0 => {
            if second == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
        Some(&(_, second)) => (second - best) as f64 / best as f64,
    };
    Ok(Detection {
        lang: distances[0].0,
        margin,
        distances,
    })
}

/// Profiles trained on the bundled seed text, built once per process.
pub fn builtin_profiles() -> &'static [LanguageProfile] {
    static PROFILES: OnceLock<Vec<LanguageProfile>> = OnceLock::new();
    PROFILES.get_or_init(|| {
        Lang::ALL
            .iter()
            .map(|&l| train_profile(seed_text(l), l, DEFAULT_K).expect("bundled seed text is large enough"))
            .collect()
    })
}
