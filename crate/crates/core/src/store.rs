//! Append-only article store: one JSON record per line, UTF-8.
//!
//! Supports many concurrent readers and a single writer. Callers serialize
//! writers themselves.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArticleMetadata, ArticleRecord, Lang};

#[derive(Serialize, Deserialize)]
struct StoredRecord {
    scielo_id: String,
    doi: Option<String>,
    journal: String,
    subject_area: String,
    authors: Vec<String>,
    license: String,
    titles: BTreeMap<Lang, String>,
    bodies: BTreeMap<Lang, String>,
}

impl From<&ArticleRecord> for StoredRecord {
    fn from(r: &ArticleRecord) -> Self {
        let m = &r.metadata;
        StoredRecord {
            scielo_id: m.scielo_id.clone(),
            doi: m.doi.clone(),
            journal: m.journal.clone(),
            subject_area: m.subject_area.clone(),
            authors: m.authors.clone(),
            license: m.license.clone(),
            titles: m.titles.clone(),
            bodies: r.bodies.clone(),
        }
    }
}

impl From<StoredRecord> for ArticleRecord {
    fn from(s: StoredRecord) -> Self {
        ArticleRecord {
            metadata: ArticleMetadata {
                scielo_id: s.scielo_id,
                doi: s.doi,
                journal: s.journal,
                subject_area: s.subject_area,
                authors: s.authors,
                license: s.license,
                titles: s.titles,
            },
            bodies: s.bodies,
        }
    }
}

/// Writer handle that remembers the ids already present in the file.
pub struct CorpusStore {
    path: PathBuf,
    ids: HashSet<String>,
}

impl CorpusStore {
    /// Opens (or creates) the store at `path`, indexing existing ids.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut ids = HashSet::new();
        if path.exists() {
            for rec in store_scan(&path, |_| true)? {
                ids.insert(rec?.metadata.scielo_id);
            }
        } else {
            File::create(&path)?;
        }
        Ok(CorpusStore { path, ids })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    pub fn append(&mut self, record: &ArticleRecord) -> Result<String> {
        record.validate()?;
        let id = record.id().to_string();
        if self.ids.contains(&id) {
            return Err(Error::DuplicateId(id));
        }
        let mut line = serde_json::to_string(&StoredRecord::from(record))
            .map_err(|e| Error::validation(e.to_string()))?;
        line.push('\n');
        let mut f = OpenOptions::new().append(true).create(true).open(&self.path)?;
        f.write_all(line.as_bytes())?;
        self.ids.insert(id.clone());
        Ok(id)
    }
}

/// Appends one record, checking id uniqueness against the whole file.
pub fn store_append(record: &ArticleRecord, store_path: impl AsRef<Path>) -> Result<String> {
    CorpusStore::open(store_path)?.append(record)
}

/// Iterator over the records of a store file, in append order.
pub struct StoreScan<P> {
    lines: std::io::Lines<BufReader<File>>,
    line_no: usize,
    predicate: P,
}

impl<P: FnMut(&ArticleRecord) -> bool> Iterator for StoreScan<P> {
    type Item = Result<ArticleRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec = match serde_json::from_str::<StoredRecord>(&line) {
                Ok(r) => ArticleRecord::from(r),
                Err(e) => {
                    return Some(Err(Error::Parse {
                        line: self.line_no,
                        message: e.to_string(),
                    }))
                }
            };
            if (self.predicate)(&rec) {
                return Some(Ok(rec));
            }
        }
    }
}

/// Scans the store, yielding records that match `predicate`.
pub fn store_scan<P>(store_path: impl AsRef<Path>, predicate: P) -> Result<StoreScan<P>>
where
    P: FnMut(&ArticleRecord) -> bool,
{
    let path = store_path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(StoreScan {
        lines: BufReader::new(file).lines(),
        line_no: 0,
        predicate,
    })
}

/// Reads every record into memory.
pub fn load_all(store_path: impl AsRef<Path>) -> Result<Vec<ArticleRecord>> {
    store_scan(store_path, |_| true)?.collect()
}
