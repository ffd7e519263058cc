//! Expert star ratings of recommendations, persisted as an append-only JSON
//! lines journal that is compacted whenever the store is opened.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const ANNOTATIONS_HEADER: [&str; 6] =
    ["source", "destination", "stars", "note", "model_version", "updated_at"];
pub const MIN_STARS: u8 = 1;
pub const MAX_STARS: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub source: String,
    pub destination: String,
    pub stars: u8,
    #[serde(default)]
    pub note: String,
    pub model_version: String,
    #[serde(with = "rfc3339")]
    pub updated_at: DateTime<Utc>,
}

impl Annotation {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_STARS..=MAX_STARS).contains(&self.stars) {
            return Err(Error::InvalidInput(format!(
                "stars must be between {MIN_STARS} and {MAX_STARS}, got {}",
                self.stars
            )));
        }
        if self.source.is_empty() || self.destination.is_empty() {
            return Err(Error::InvalidInput("source and destination are required".into()));
        }
        Ok(())
    }

    fn key(&self) -> Key {
        (self.source.clone(), self.destination.clone(), self.model_version.clone())
    }
}

/// Timestamps as RFC 3339 in UTC with only as many fractional digits as needed.
pub(crate) fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

pub(crate) fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::InvalidInput(format!("bad timestamp {s:?}: {e}")))
}

mod rfc3339 {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_timestamp(&s).map_err(serde::de::Error::custom)
    }
}

/// A CSV row that could not be imported. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImportReport {
    pub imported: usize,
    pub rejected: Vec<RejectedRow>,
}

type Key = (String, String, String);

/// Last-write-wins map keyed by (source, destination, model_version).
#[derive(Debug, Default)]
pub struct AnnotationStore {
    entries: BTreeMap<Key, Annotation>,
    journal: Option<Journal>,
}

#[derive(Debug)]
struct Journal {
    path: PathBuf,
    file: File,
}

impl AnnotationStore {
    /// A store that keeps nothing on disk.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Replays the journal at `path` (if any), rewrites it with one line per
    /// live annotation, and appends subsequent writes to it.
    ///
    /// A final line without a newline is a write torn by a crash and is
    /// dropped; any other unreadable line is an error.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = BTreeMap::new();
        if path.exists() {
            let mut reader = BufReader::new(File::open(&path)?);
            let mut line = String::new();
            let mut number = 0u64;
            loop {
                line.clear();
                if reader.read_line(&mut line)? == 0 {
                    break;
                }
                number += 1;
                let complete = line.ends_with('\n');
                let text = line.trim();
                if text.is_empty() {
                    continue;
                }
                match serde_json::from_str::<Annotation>(text) {
                    Ok(a) => {
                        entries.insert(a.key(), a);
                    }
                    Err(_) if !complete => {
                        log::warn!("{}: dropping torn final line {number}", path.display());
                    }
                    Err(e) => {
                        return Err(Error::Format(format!(
                            "{}, line {number}: {e}",
                            path.display()
                        )))
                    }
                }
            }
        }
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut out = File::create(&tmp)?;
            for a in entries.values() {
                writeln!(out, "{}", serde_json::to_string(a)?)?;
            }
            out.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            // Persist the rename where the platform allows opening directories.
            if let Ok(d) = File::open(dir) {
                let _ = d.sync_all();
            }
        }
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(Self {
            entries,
            journal: Some(Journal { path, file }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.journal.as_ref().map(|j| j.path.as_path())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Validates and upserts `annotation`. With a journal, the record is
    /// flushed to stable storage before this returns.
    pub fn annotate(&mut self, annotation: Annotation) -> Result<Annotation> {
        annotation.validate()?;
        if let Some(journal) = &mut self.journal {
            let mut line = serde_json::to_string(&annotation)?;
            line.push('\n');
            journal.file.write_all(line.as_bytes())?;
            journal.file.sync_data()?;
        }
        self.entries.insert(annotation.key(), annotation.clone());
        Ok(annotation)
    }

    pub fn get(&self, source: &str, destination: &str, model_version: &str) -> Option<&Annotation> {
        self.entries
            .get(&(source.to_owned(), destination.to_owned(), model_version.to_owned()))
    }

    /// Annotations sorted by (source, destination, model_version), optionally
    /// restricted to one source.
    pub fn list(&self, source: Option<&str>) -> Vec<Annotation> {
        self.entries
            .values()
            .filter(|a| source.is_none_or(|s| a.source == s))
            .cloned()
            .collect()
    }

    /// RFC 4180 CSV with CRLF line endings, sorted like [`Self::list`].
    pub fn export_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(w);
        out.write_record(ANNOTATIONS_HEADER)?;
        for a in self.entries.values() {
            out.write_record([
                a.source.as_str(),
                a.destination.as_str(),
                &a.stars.to_string(),
                a.note.as_str(),
                a.model_version.as_str(),
                &format_timestamp(&a.updated_at),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn export_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.export_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }

    /// Upserts every valid row and reports the rest with their line numbers.
    /// A missing or different header rejects the whole input.
    pub fn import_csv<R: Read>(&mut self, mut r: R) -> Result<ImportReport> {
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(data.as_slice());
        let header = reader.headers()?.clone();
        if header.iter().ne(ANNOTATIONS_HEADER) {
            return Err(Error::Ingest {
                source_name: "annotations CSV",
                line: 1,
                message: format!("expected header `{}`", ANNOTATIONS_HEADER.join(",")),
            });
        }
        let mut report = ImportReport::default();
        for record in reader.records() {
            let record = match record {
                Ok(r) => r,
                Err(e) => {
                    let line = e.position().map_or(0, |p| line_at(&data, p.byte()));
                    report.rejected.push(RejectedRow {
                        line,
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            let line = record.position().map_or(0, |p| line_at(&data, p.byte()));
            match parse_row(&record) {
                Ok(a) => match self.annotate(a) {
                    Ok(_) => report.imported += 1,
                    Err(Error::InvalidInput(reason)) => {
                        report.rejected.push(RejectedRow { line, reason })
                    }
                    Err(e) => return Err(e),
                },
                Err(reason) => report.rejected.push(RejectedRow { line, reason }),
            }
        }
        Ok(report)
    }
}

/// 1-based line of the record starting at `byte`. The csv reader ends a
/// CRLF record at the `\r`, so the next record's offset may point at the
/// `\n` that belongs to the previous line; its own line counter is off by
/// one for the same reason.
fn line_at(data: &[u8], byte: u64) -> u64 {
    let mut start = (byte as usize).min(data.len());
    if data.get(start) == Some(&b'\n') {
        start += 1;
    }
    1 + data[..start].iter().filter(|&&b| b == b'\n').count() as u64
}

fn parse_row(record: &csv::StringRecord) -> std::result::Result<Annotation, String> {
    if record.len() != ANNOTATIONS_HEADER.len() {
        return Err(format!(
            "expected {} fields, got {}",
            ANNOTATIONS_HEADER.len(),
            record.len()
        ));
    }
    let stars: u8 = record[2]
        .parse()
        .map_err(|_| format!("stars must be between {MIN_STARS} and {MAX_STARS}, got {:?}", &record[2]))?;
    let updated_at = parse_timestamp(&record[5]).map_err(|e| e.to_string())?;
    Ok(Annotation {
        source: record[0].to_owned(),
        destination: record[1].to_owned(),
        stars,
        note: record[3].to_owned(),
        model_version: record[4].to_owned(),
        updated_at,
    })
}
