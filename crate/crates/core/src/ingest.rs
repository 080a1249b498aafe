//! Manifest loading, eligibility rules and store population.
//!
//! A manifest is a tab-separated file with one article per row:
//!
//! ```text
//! scielo_id  license  journal  subject_area  doi  authors  lang:path:title ...
//! ```
//!
//! `authors` is `;`-joined, `doi` may be empty, and each trailing column names
//! one language version. Relative paths resolve against the manifest's
//! directory. Blank lines and lines starting with `#` are skipped.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{ArticleMetadata, ArticleRecord, Lang};
use crate::segment::normalize_whitespace;
use crate::store::CorpusStore;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestLanguage {
    pub lang: Lang,
    pub path: PathBuf,
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub scielo_id: String,
    pub license: String,
    pub journal: String,
    pub subject_area: String,
    pub doi: Option<String>,
    pub authors: Vec<String>,
    pub languages: Vec<ManifestLanguage>,
}

impl ManifestEntry {
    pub fn metadata(&self) -> ArticleMetadata {
        ArticleMetadata {
            scielo_id: self.scielo_id.clone(),
            doi: self.doi.clone(),
            journal: self.journal.clone(),
            subject_area: self.subject_area.clone(),
            authors: self.authors.clone(),
            license: self.license.clone(),
            titles: self
                .languages
                .iter()
                .filter_map(|l| l.title.clone().map(|t| (l.lang, t)))
                .collect(),
        }
    }

    fn distinct_languages(&self) -> usize {
        let mut langs: Vec<Lang> = self.languages.iter().map(|l| l.lang).collect();
        langs.sort();
        langs.dedup();
        langs.len()
    }
}

/// Reads a manifest. Every referenced file must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let entries = parse_manifest(&text, base)?;
    for e in &entries {
        for l in &e.languages {
            if !l.path.is_file() {
                return Err(Error::MissingFile(l.path.clone()));
            }
        }
    }
    Ok(entries)
}

/// Parses manifest text without touching the filesystem.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let row = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse { line: row, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 7 {
            return Err(bad(format!("expected at least 7 columns, found {}", cols.len())));
        }
        let scielo_id = cols[0].trim().to_string();
        if scielo_id.is_empty() {
            return Err(bad("empty scielo_id".into()));
        }
        let doi = Some(cols[4].trim()).filter(|d| !d.is_empty()).map(str::to_string);
        let authors = cols[5]
            .split(';')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(str::to_string)
            .collect();
        let mut languages = Vec::new();
        for spec in &cols[6..] {
            if spec.trim().is_empty() {
                continue;
            }
            let mut parts = spec.splitn(3, ':');
            let (lang, file) = match (parts.next(), parts.next()) {
                (Some(l), Some(p)) if !p.trim().is_empty() => (l, p.trim()),
                _ => return Err(bad(format!("language column {spec:?} is not lang:path:title"))),
            };
            let lang: Lang = lang.parse().map_err(|e: Error| bad(e.to_string()))?;
            let title = parts
                .next()
                .map(normalize_whitespace)
                .filter(|t| !t.is_empty());
            languages.push(ManifestLanguage {
                lang,
                path: base.join(file),
                title,
            });
        }
        if languages.is_empty() {
            return Err(bad("no language versions listed".into()));
        }
        out.push(ManifestEntry {
            scielo_id,
            license: cols[1].trim().to_string(),
            journal: cols[2].trim().to_string(),
            subject_area: cols[3].trim().to_string(),
            doi,
            authors,
            languages,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// The license carries the No-Derivatives element.
    License,
    /// Fewer than two corpus languages have a body.
    Languages,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub entry: ManifestEntry,
    pub reason: RejectReason,
}

/// True when any hyphen-separated element of the license is `ND`.
pub fn is_no_derivatives(license: &str) -> bool {
    license
        .split(|c: char| c == '-' || c == '_' || c.is_whitespace())
        .any(|tok| tok.eq_ignore_ascii_case("nd"))
}

/// Splits entries into those eligible for the corpus and rejections.
pub fn filter_eligible(entries: Vec<ManifestEntry>) -> (Vec<ManifestEntry>, Vec<Rejection>) {
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for entry in entries {
        let reason = if is_no_derivatives(&entry.license) {
            Some(RejectReason::License)
        } else if entry.distinct_languages() < 2 {
            Some(RejectReason::Languages)
        } else {
            None
        };
        match reason {
            Some(reason) => rejected.push(Rejection { entry, reason }),
            None => kept.push(entry),
        }
    }
    (kept, rejected)
}

/// Where article bodies come from. Local files are the only shipped source;
/// a crawler would implement this trait.
pub trait DocumentSource {
    fn fetch(&self, entry: &ManifestEntry, lang: &ManifestLanguage) -> Result<String>;
}

pub struct LocalFiles;

impl DocumentSource for LocalFiles {
    fn fetch(&self, _entry: &ManifestEntry, lang: &ManifestLanguage) -> Result<String> {
        fs::read_to_string(&lang.path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(lang.path.clone()),
            _ => Error::Io(e),
        })
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct IngestReport {
    pub kept: usize,
    pub rejected: usize,
    /// (scielo_id, message) per entry that could not be stored.
    pub errors: Vec<(String, String)>,
}

pub fn ingest_all(entries: Vec<ManifestEntry>, store_path: impl AsRef<Path>) -> Result<IngestReport> {
    let mut store = CorpusStore::open(store_path)?;
    ingest_with(entries, &mut store, &LocalFiles)
}

/// Filters, reads and stores entries. Per-entry failures land in the report.
pub fn ingest_with(
    entries: Vec<ManifestEntry>,
    store: &mut CorpusStore,
    source: &dyn DocumentSource,
) -> Result<IngestReport> {
    let (kept, rejected) = filter_eligible(entries);
    let mut report = IngestReport {
        rejected: rejected.len(),
        ..Default::default()
    };
    for entry in kept {
        let record = read_record(&entry, source);
        match record.and_then(|r| store.append(&r)) {
            Ok(_) => report.kept += 1,
            Err(e) => {
                log::warn!("skipping {}: {e}", entry.scielo_id);
                report.errors.push((entry.scielo_id.clone(), e.to_string()));
            }
        }
    }
    Ok(report)
}

fn read_record(entry: &ManifestEntry, source: &dyn DocumentSource) -> Result<ArticleRecord> {
    let mut bodies = BTreeMap::new();
    for l in &entry.languages {
        bodies.insert(l.lang, source.fetch(entry, l)?);
    }
    Ok(ArticleRecord {
        metadata: entry.metadata(),
        bodies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(langs: &[Lang], license: &str) -> ManifestEntry {
        ManifestEntry {
            scielo_id: "S1".into(),
            license: license.into(),
            journal: "J".into(),
            subject_area: "Area".into(),
            doi: None,
            authors: vec![],
            languages: langs
                .iter()
                .map(|&lang| ManifestLanguage {
                    lang,
                    path: PathBuf::from(format!("{lang}.html")),
                    title: None,
                })
                .collect(),
        }
    }

    #[test]
    fn eligibility_rules() {
        let (k, r) = filter_eligible(vec![entry(&[Lang::En, Lang::Pt], "CC-BY-4.0")]);
        assert_eq!((k.len(), r.len()), (1, 0));

        let (k, r) = filter_eligible(vec![entry(&[Lang::En, Lang::Pt], "CC-BY-NC-ND-4.0")]);
        assert_eq!(k.len(), 0);
        assert_eq!(r[0].reason, RejectReason::License);

        let (_, r) = filter_eligible(vec![entry(&[Lang::En], "CC-BY-4.0")]);
        assert_eq!(r[0].reason, RejectReason::Languages);

        // A repeated language does not count twice.
        let (_, r) = filter_eligible(vec![entry(&[Lang::En, Lang::En], "CC-BY-4.0")]);
        assert_eq!(r[0].reason, RejectReason::Languages);
    }

    #[test]
    fn nd_token_matching() {
        assert!(is_no_derivatives("CC-BY-NC-ND-4.0"));
        assert!(is_no_derivatives("cc-by-nd"));
        assert!(is_no_derivatives("CC BY-ND 3.0"));
        assert!(!is_no_derivatives("CC-BY-4.0"));
        assert!(!is_no_derivatives("CC-BY-NC-SA-4.0"));
        // Only whole elements count.
        assert!(!is_no_derivatives("CC-BY-AND"));
    }

    #[test]
    fn manifest_rows() {
        let text = "# comment\n\
            S1\tCC-BY-4.0\tRev A\tHealth\t10.1/x\tSilva, A.; Souza, B.\ten:a.en.html:A title: with colon\tpt:a.pt.html:Um título\n\
            \n\
            S2\tCC-BY-NC-4.0\tRev B\tAgri\t\t\tes:b.es.html:\tpt:b.pt.html\n";
        let entries = parse_manifest(text, Path::new("/data")).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].authors, ["Silva, A.", "Souza, B."]);
        assert_eq!(entries[0].languages[0].title.as_deref(), Some("A title: with colon"));
        assert_eq!(entries[0].languages[0].path, Path::new("/data/a.en.html"));
        assert_eq!(entries[1].doi, None);
        assert!(entries[1].authors.is_empty());
        assert_eq!(entries[1].languages[0].title, None);
    }

    #[test]
    fn manifest_bad_row() {
        let text = "S1\tCC-BY\tJ\tA\t\t\ten:a.html\nS2\tCC-BY\tJ\n";
        assert!(matches!(
            parse_manifest(text, Path::new(".")),
            Err(Error::Parse { line: 2, .. })
        ));
        let text = "S1\tCC-BY\tJ\tA\t\t\tfr:a.html\n";
        assert!(matches!(
            parse_manifest(text, Path::new(".")),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_manifest() {
        assert!(parse_manifest("", Path::new(".")).unwrap().is_empty());
    }
}
