//! Documents, queries, qrels and run files.
//!
//! Document and query files are either TSV (`id<TAB>text`, one record per
//! line) or JSONL (`{"id": ..., "text": ...}` with an optional
//! `translated_text`). Qrels use the whitespace-separated
//! `query_id 0 doc_id grade` layout and run files the six-column
//! `query_id Q0 doc_id rank score run_tag` layout.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path} is not valid UTF-8")]
    Encoding { path: PathBuf },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("duplicate qrels keys: {}", format_keys(.0))]
    DuplicateKeys(Vec<(String, String)>),
    #[error("{path}:{line}: negative grade {grade}")]
    NegativeGrade {
        path: PathBuf,
        line: usize,
        grade: i64,
    },
    #[error("invalid run entry: {0}")]
    InvalidEntry(String),
    #[error("rank gap for query `{query_id}` (tag `{run_tag}`): expected rank {expected}, found {found}")]
    RankGap {
        query_id: String,
        run_tag: String,
        expected: usize,
        found: usize,
    },
    #[error("score inversion for query `{query_id}` (tag `{run_tag}`) at rank {rank}")]
    ScoreInversion {
        query_id: String,
        run_tag: String,
        rank: usize,
    },
}

fn format_keys(keys: &[(String, String)]) -> String {
    keys.iter()
        .map(|(q, d)| format!("({q}, {d})"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Tsv,
    Jsonl,
}

impl InputFormat {
    /// Guesses the format from the file extension; anything that is not
    /// `.jsonl`/`.json` is read as TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => InputFormat::Jsonl,
            _ => InputFormat::Tsv,
        }
    }
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(InputFormat::Tsv),
            "jsonl" => Ok(InputFormat::Jsonl),
            other => Err(format!(
                "unknown input format `{other}` (expected tsv or jsonl)"
            )),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputFormat::Tsv => f.write_str("tsv"),
            InputFormat::Jsonl => f.write_str("jsonl"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub raw_text: String,
    pub translated_text: Option<String>,
    /// Position in ingestion order; this is the conversation chain order.
    pub sequence_index: usize,
}

impl Document {
    /// Text handed to the relevance prompt: the translation when present.
    pub fn text(&self) -> &str {
        self.translated_text.as_deref().unwrap_or(&self.raw_text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub raw_text: String,
    pub translated_text: Option<String>,
}

impl Query {
    pub fn text(&self) -> &str {
        self.translated_text.as_deref().unwrap_or(&self.raw_text)
    }
}

/// On-disk record shared by both input formats.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TextRecord {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    translated_text: Option<String>,
}

/// Documents in ingestion order, addressable by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocumentCollection {
    docs: Vec<Document>,
    index: HashMap<String, usize>,
}

impl DocumentCollection {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a document, assigning the next sequence index.
    pub fn push(
        &mut self,
        doc_id: impl Into<String>,
        raw_text: impl Into<String>,
        translated_text: Option<String>,
    ) -> Result<&Document> {
        let doc_id = doc_id.into();
        if self.index.contains_key(&doc_id) {
            return Err(CorpusError::DuplicateId(doc_id));
        }
        let sequence_index = self.docs.len();
        self.index.insert(doc_id.clone(), sequence_index);
        self.docs.push(Document {
            doc_id,
            raw_text: raw_text.into(),
            translated_text,
            sequence_index,
        });
        Ok(&self.docs[sequence_index])
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.index.get(doc_id).map(|&i| &self.docs[i])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.docs.iter()
    }

    pub fn as_slice(&self) -> &[Document] {
        &self.docs
    }

    pub fn set_translation(&mut self, doc_id: &str, translated: String) -> bool {
        match self.index.get(doc_id) {
            Some(&i) => {
                self.docs[i].translated_text = Some(translated);
                true
            }
            None => false,
        }
    }
}

impl<'a> IntoIterator for &'a DocumentCollection {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.docs.iter()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryCollection {
    queries: Vec<Query>,
    index: HashMap<String, usize>,
}

impl QueryCollection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        query_id: impl Into<String>,
        raw_text: impl Into<String>,
        translated_text: Option<String>,
    ) -> Result<&Query> {
        let query_id = query_id.into();
        if self.index.contains_key(&query_id) {
            return Err(CorpusError::DuplicateId(query_id));
        }
        let pos = self.queries.len();
        self.index.insert(query_id.clone(), pos);
        self.queries.push(Query {
            query_id,
            raw_text: raw_text.into(),
            translated_text,
        });
        Ok(&self.queries[pos])
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn get(&self, query_id: &str) -> Option<&Query> {
        self.index.get(query_id).map(|&i| &self.queries[i])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Query> {
        self.queries.iter()
    }

    pub fn as_slice(&self) -> &[Query] {
        &self.queries
    }

    pub fn set_translation(&mut self, query_id: &str, translated: String) -> bool {
        match self.index.get(query_id) {
            Some(&i) => {
                self.queries[i].translated_text = Some(translated);
                true
            }
            None => false,
        }
    }
}

impl<'a> IntoIterator for &'a QueryCollection {
    type Item = &'a Query;
    type IntoIter = std::slice::Iter<'a, Query>;

    fn into_iter(self) -> Self::IntoIter {
        self.queries.iter()
    }
}

fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|_| CorpusError::Encoding {
        path: path.to_path_buf(),
    })
}

/// Yields `(1-based line number, line)` for every non-blank line.
fn content_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn read_records(path: &Path, format: InputFormat) -> Result<Vec<TextRecord>> {
    let content = read_utf8(path)?;
    let malformed = |line: usize, reason: String| CorpusError::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut records = Vec::new();
    for (line_no, line) in content_lines(&content) {
        let record = match format {
            InputFormat::Tsv => {
                let (id, text) = line
                    .split_once('\t')
                    .ok_or_else(|| malformed(line_no, "expected `id<TAB>text`".into()))?;
                TextRecord {
                    id: id.trim().to_string(),
                    text: text.to_string(),
                    translated_text: None,
                }
            }
            InputFormat::Jsonl => serde_json::from_str::<TextRecord>(line)
                .map_err(|e| malformed(line_no, format!("invalid JSON record: {e}")))?,
        };
        if record.id.is_empty() {
            return Err(malformed(line_no, "empty id".into()));
        }
        if record.id.chars().any(char::is_whitespace) {
            return Err(malformed(
                line_no,
                format!("id `{}` contains whitespace", record.id),
            ));
        }
        if record.text.trim().is_empty() {
            return Err(malformed(
                line_no,
                format!("empty text for `{}`", record.id),
            ));
        }
        records.push(record);
    }
    Ok(records)
}

/// Loads documents in file order; sequence indices are assigned `0..N`.
pub fn load_documents(path: &Path, format: InputFormat) -> Result<DocumentCollection> {
    let mut docs = DocumentCollection::new();
    for r in read_records(path, format)? {
        docs.push(r.id, r.text, r.translated_text)?;
    }
    Ok(docs)
}

pub fn load_queries(path: &Path, format: InputFormat) -> Result<QueryCollection> {
    let mut queries = QueryCollection::new();
    for r in read_records(path, format)? {
        queries.push(r.id, r.text, r.translated_text)?;
    }
    Ok(queries)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn finish(path: &Path, mut writer: BufWriter<fs::File>) -> Result<()> {
    writer.flush().map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text_records<'a>(
    path: &Path,
    records: impl Iterator<Item = (&'a str, &'a str, Option<&'a str>)>,
) -> Result<()> {
    let mut w = create(path)?;
    for (id, text, translated) in records {
        let record = TextRecord {
            id: id.to_string(),
            text: text.to_string(),
            translated_text: translated.map(str::to_string),
        };
        let line = serde_json::to_string(&record).expect("text record serializes");
        writeln!(w, "{line}").map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    finish(path, w)
}

/// Writes documents as JSONL, keeping any translations.
pub fn write_documents_jsonl(docs: &DocumentCollection, path: &Path) -> Result<()> {
    write_text_records(
        path,
        docs.iter().map(|d| {
            (
                d.doc_id.as_str(),
                d.raw_text.as_str(),
                d.translated_text.as_deref(),
            )
        }),
    )
}

pub fn write_queries_jsonl(queries: &QueryCollection, path: &Path) -> Result<()> {
    write_text_records(
        path,
        queries.iter().map(|q| {
            (
                q.query_id.as_str(),
                q.raw_text.as_str(),
                q.translated_text.as_deref(),
            )
        }),
    )
}

/// Ground-truth grades keyed by query then document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QrelsTable {
    by_query: BTreeMap<String, BTreeMap<String, u32>>,
}

impl QrelsTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a judgment; an existing `(query_id, doc_id)` key is an error.
    pub fn insert(
        &mut self,
        query_id: impl Into<String>,
        doc_id: impl Into<String>,
        grade: u32,
    ) -> Result<()> {
        let query_id = query_id.into();
        let doc_id = doc_id.into();
        let judged = self.by_query.entry(query_id.clone()).or_default();
        if judged.contains_key(&doc_id) {
            return Err(CorpusError::DuplicateKeys(vec![(query_id, doc_id)]));
        }
        judged.insert(doc_id, grade);
        Ok(())
    }

    /// Grade of a document; unjudged documents grade 0.
    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.by_query
            .get(query_id)
            .and_then(|j| j.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.grade(query_id, doc_id) > 0
    }

    pub fn judgments(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.by_query.get(query_id)
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.by_query.contains_key(query_id)
    }

    pub fn num_relevant(&self, query_id: &str) -> usize {
        self.by_query
            .get(query_id)
            .map_or(0, |j| j.values().filter(|&&g| g > 0).count())
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }

    /// All entries ordered by query id then doc id.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.by_query.iter().flat_map(|(q, judged)| {
            judged
                .iter()
                .map(move |(d, &g)| (q.as_str(), d.as_str(), g))
        })
    }

    pub fn len(&self) -> usize {
        self.by_query.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parses `query_id 0 doc_id grade` lines. Every duplicated key in the file
/// is reported together, sorted, so the error does not depend on line order.
pub fn load_qrels(path: &Path) -> Result<QrelsTable> {
    let content = read_utf8(path)?;
    let mut table = QrelsTable::new();
    let mut duplicates = BTreeSet::new();
    for (line_no, line) in content_lines(&content) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(CorpusError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let grade: i64 = fields[3].parse().map_err(|_| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            reason: format!("grade `{}` is not an integer", fields[3]),
        })?;
        if grade < 0 {
            return Err(CorpusError::NegativeGrade {
                path: path.to_path_buf(),
                line: line_no,
                grade,
            });
        }
        let grade = u32::try_from(grade).map_err(|_| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            reason: format!("grade {grade} out of range"),
        })?;
        if table.insert(fields[0], fields[2], grade).is_err() {
            duplicates.insert((fields[0].to_string(), fields[2].to_string()));
        }
    }
    if !duplicates.is_empty() {
        return Err(CorpusError::DuplicateKeys(duplicates.into_iter().collect()));
    }
    Ok(table)
}

pub fn write_qrels(table: &QrelsTable, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for (q, d, g) in table.entries() {
        writeln!(w, "{q} 0 {d} {g}").map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    finish(path, w)
}

/// One line of a run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub query_id: String,
    pub doc_id: String,
    /// 1-based.
    pub rank: usize,
    pub score: f64,
    pub run_tag: String,
}

fn check_token(kind: &str, value: &str) -> Result<()> {
    if value.is_empty() || value.chars().any(char::is_whitespace) {
        return Err(CorpusError::InvalidEntry(format!(
            "{kind} `{value}` must be non-empty and contain no whitespace"
        )));
    }
    Ok(())
}

/// Checks rank contiguity (`1..=M`) and non-increasing scores within every
/// `(run_tag, query_id)` group.
pub fn validate_run(entries: &[RunEntry]) -> Result<()> {
    let mut groups: BTreeMap<(&str, &str), Vec<(usize, f64)>> = BTreeMap::new();
    for e in entries {
        check_token("query id", &e.query_id)?;
        check_token("doc id", &e.doc_id)?;
        check_token("run tag", &e.run_tag)?;
        if !e.score.is_finite() {
            return Err(CorpusError::InvalidEntry(format!(
                "non-finite score for ({}, {})",
                e.query_id, e.doc_id
            )));
        }
        groups
            .entry((e.run_tag.as_str(), e.query_id.as_str()))
            .or_default()
            .push((e.rank, e.score));
    }
    for ((tag, qid), mut ranks) in groups {
        ranks.sort_by_key(|&(rank, _)| rank);
        for (i, &(rank, _)) in ranks.iter().enumerate() {
            if rank != i + 1 {
                return Err(CorpusError::RankGap {
                    query_id: qid.to_string(),
                    run_tag: tag.to_string(),
                    expected: i + 1,
                    found: rank,
                });
            }
        }
        for pair in ranks.windows(2) {
            if pair[1].1 > pair[0].1 {
                return Err(CorpusError::ScoreInversion {
                    query_id: qid.to_string(),
                    run_tag: tag.to_string(),
                    rank: pair[1].0,
                });
            }
        }
    }
    Ok(())
}

/// Writes `query_id Q0 doc_id rank score run_tag` lines, scores to six
/// decimals, ordered by query id then rank.
pub fn write_run_file(entries: &[RunEntry], path: &Path) -> Result<()> {
    validate_run(entries)?;
    let mut sorted: Vec<&RunEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| {
        a.query_id
            .cmp(&b.query_id)
            .then_with(|| a.run_tag.cmp(&b.run_tag))
            .then_with(|| a.rank.cmp(&b.rank))
    });
    let mut w = create(path)?;
    for e in sorted {
        writeln!(
            w,
            "{} Q0 {} {} {:.6} {}",
            e.query_id, e.doc_id, e.rank, e.score, e.run_tag
        )
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    finish(path, w)
}

pub fn parse_run_file(path: &Path) -> Result<Vec<RunEntry>> {
    let content = read_utf8(path)?;
    let mut entries = Vec::new();
    for (line_no, line) in content_lines(&content) {
        let malformed = |reason: String| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(malformed(format!(
                "expected 6 fields, found {}",
                fields.len()
            )));
        }
        let rank: usize =
            fields[3].parse().ok().filter(|&r| r >= 1).ok_or_else(|| {
                malformed(format!("rank `{}` is not a positive integer", fields[3]))
            })?;
        let score: f64 = fields[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| malformed(format!("score `{}` is not a finite number", fields[4])))?;
        entries.push(RunEntry {
            query_id: fields[0].to_string(),
            doc_id: fields[2].to_string(),
            rank,
            score,
            run_tag: fields[5].to_string(),
        });
    }
    validate_run(&entries)?;
    Ok(entries)
}
