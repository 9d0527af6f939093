//! Reddit-dump JSONL parsing and streaming.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// 2005-01-01T00:00:00Z.
pub const MIN_CREATED_UTC: i64 = 1_104_537_600;
/// 2019-01-01T00:00:00Z, exclusive.
pub const MAX_CREATED_UTC: i64 = 1_546_300_800;

pub const DELETED: &str = "[deleted]";
pub const REMOVED: &str = "[removed]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Post,
    Comment,
}

impl RecordKind {
    /// `t3_` ids are submissions; everything else is treated as a comment.
    fn from_fullname(id: &str) -> Option<RecordKind> {
        if id.starts_with("t3_") {
            Some(RecordKind::Post)
        } else if id.starts_with("t1_") {
            Some(RecordKind::Comment)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub id: String,
    pub author: String,
    pub subreddit: String,
    pub created_utc: i64,
    pub body: String,
    pub kind: RecordKind,
    #[serde(default)]
    pub gilded: u64,
    #[serde(default)]
    pub controversiality: u8,
    #[serde(default)]
    pub ups: i64,
    #[serde(default)]
    pub downs: i64,
    #[serde(
        rename = "author_flair_text",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub flair_text: Option<String>,
}

impl CommentRecord {
    /// True for `[deleted]`/`[removed]` bodies, which contribute no tokens.
    pub fn body_is_placeholder(&self) -> bool {
        self.body == DELETED || self.body == REMOVED
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SkipReason {
    Malformed,
    MissingField(&'static str),
    InvalidField(&'static str),
    EmptyField(&'static str),
    TimestampOutOfRange,
    DeletedAuthor,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::Malformed => write!(f, "malformed"),
            SkipReason::MissingField(name) => write!(f, "missing_field:{name}"),
            SkipReason::InvalidField(name) => write!(f, "invalid_field:{name}"),
            SkipReason::EmptyField(name) => write!(f, "empty_field:{name}"),
            SkipReason::TimestampOutOfRange => write!(f, "timestamp_out_of_range"),
            SkipReason::DeletedAuthor => write!(f, "deleted_author"),
        }
    }
}

fn required_str<'a>(obj: &'a Map<String, Value>, key: &'static str) -> Result<&'a str, SkipReason> {
    match obj.get(key) {
        None | Some(Value::Null) => Err(SkipReason::MissingField(key)),
        Some(Value::String(s)) if s.trim().is_empty() => Err(SkipReason::EmptyField(key)),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(SkipReason::InvalidField(key)),
    }
}

fn int_field(obj: &Map<String, Value>, key: &'static str) -> Result<Option<i64>, SkipReason> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))
            .map(Some)
            .ok_or(SkipReason::InvalidField(key)),
        // Older dumps quote some integers.
        Some(Value::String(s)) => s
            .trim()
            .parse::<i64>()
            .map(Some)
            .map_err(|_| SkipReason::InvalidField(key)),
        Some(Value::Bool(b)) => Ok(Some(*b as i64)),
        Some(_) => Err(SkipReason::InvalidField(key)),
    }
}

fn body_of(obj: &Map<String, Value>) -> Result<String, SkipReason> {
    match obj.get("body") {
        Some(Value::String(s)) => return Ok(s.clone()),
        Some(Value::Null) | None => {}
        Some(_) => return Err(SkipReason::InvalidField("body")),
    }
    // Submissions carry title/selftext instead of body.
    let title = obj.get("title").and_then(Value::as_str);
    let selftext = obj.get("selftext").and_then(Value::as_str);
    match (title, selftext) {
        (None, None) => Err(SkipReason::MissingField("body")),
        (t, s) => Ok([t, s]
            .into_iter()
            .flatten()
            .filter(|x| !x.is_empty())
            .collect::<Vec<_>>()
            .join("\n\n")),
    }
}

/// Parses one dump line into a validated record, or the reason it was skipped.
pub fn parse_dump_line(line: &str) -> Result<CommentRecord, SkipReason> {
    let value: Value = serde_json::from_str(line).map_err(|_| SkipReason::Malformed)?;
    let obj = value.as_object().ok_or(SkipReason::Malformed)?;

    let id = required_str(obj, "id")?.to_string();
    let author = match obj.get("author") {
        Some(Value::String(s)) if s == DELETED => return Err(SkipReason::DeletedAuthor),
        _ => required_str(obj, "author")?.to_string(),
    };
    let subreddit = required_str(obj, "subreddit")?.to_string();
    let created_utc =
        int_field(obj, "created_utc")?.ok_or(SkipReason::MissingField("created_utc"))?;
    if !(MIN_CREATED_UTC..MAX_CREATED_UTC).contains(&created_utc) {
        return Err(SkipReason::TimestampOutOfRange);
    }
    let body = body_of(obj)?;

    let kind = match obj.get("kind").and_then(Value::as_str) {
        Some("post") => RecordKind::Post,
        Some("comment") => RecordKind::Comment,
        Some(_) => return Err(SkipReason::InvalidField("kind")),
        None => RecordKind::from_fullname(&id)
            .or_else(|| {
                obj.get("name")
                    .and_then(Value::as_str)
                    .and_then(RecordKind::from_fullname)
            })
            .unwrap_or(RecordKind::Comment),
    };
    let gilded = int_field(obj, "gilded")?.unwrap_or(0);
    if gilded < 0 {
        return Err(SkipReason::InvalidField("gilded"));
    }
    let controversiality = int_field(obj, "controversiality")?.unwrap_or(0);
    if !(0..=1).contains(&controversiality) {
        return Err(SkipReason::InvalidField("controversiality"));
    }
    let ups = int_field(obj, "ups")?.unwrap_or(0);
    let downs = int_field(obj, "downs")?.unwrap_or(0);
    let flair_text = match obj.get("author_flair_text") {
        Some(Value::String(s)) => Some(s.clone()),
        Some(Value::Null) | None => None,
        Some(_) => return Err(SkipReason::InvalidField("author_flair_text")),
    };

    Ok(CommentRecord {
        id,
        author,
        subreddit,
        created_utc,
        body,
        kind,
        gilded: gilded as u64,
        controversiality: controversiality as u8,
        ups,
        downs,
        flair_text,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Non-blank lines read.
    pub records_read: usize,
    pub records_accepted: usize,
    pub records_skipped: usize,
    /// Accepted records rejected by the filter.
    pub records_filtered: usize,
    /// Distinct authors among yielded records.
    pub users_seen: usize,
    pub skip_reasons: BTreeMap<String, usize>,
}

/// Optional subreddit / author restriction. Subreddit names compare
/// case-insensitively.
#[derive(Debug, Clone, Default)]
pub struct RecordFilter {
    subreddits: Option<HashSet<String>>,
    authors: Option<HashSet<String>>,
}

impl RecordFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn subreddits<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.subreddits = Some(names.into_iter().map(|s| s.as_ref().to_lowercase()).collect());
        self
    }

    pub fn authors<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.authors = Some(names.into_iter().map(Into::into).collect());
        self
    }

    pub fn accepts(&self, r: &CommentRecord) -> bool {
        self.subreddits
            .as_ref()
            .is_none_or(|s| s.contains(&r.subreddit.to_lowercase()))
            && self.authors.as_ref().is_none_or(|a| a.contains(&r.author))
    }
}

fn open_maybe_gzip(path: &Path) -> Result<(Box<dyn BufRead + Send>, bool)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let head = reader.fill_buf().map_err(|e| Error::io(path, e))?;
    let gz = head.len() >= 2 && head[0] == 0x1f && head[1] == 0x8b;
    if gz {
        Ok((Box::new(BufReader::new(MultiGzDecoder::new(reader))), true))
    } else {
        Ok((Box::new(reader), false))
    }
}

struct LineSource {
    reader: Box<dyn BufRead + Send>,
    path: PathBuf,
    gzip: bool,
    buf: Vec<u8>,
}

impl LineSource {
    fn open(path: &Path) -> Result<Self> {
        let (reader, gzip) = open_maybe_gzip(path)?;
        Ok(Self {
            reader,
            path: path.to_path_buf(),
            gzip,
            buf: Vec::new(),
        })
    }

    /// Next non-blank line; invalid UTF-8 comes back as `Err(())` so it can
    /// be counted as malformed.
    fn next_line(&mut self) -> Result<Option<Result<String, ()>>> {
        loop {
            self.buf.clear();
            let n = self.reader.read_until(b'\n', &mut self.buf).map_err(|e| {
                if self.gzip {
                    Error::Decompress {
                        path: self.path.clone(),
                        source: e,
                    }
                } else {
                    Error::io(&self.path, e)
                }
            })?;
            if n == 0 {
                return Ok(None);
            }
            let bytes = self.buf.trim_ascii();
            if bytes.is_empty() {
                continue;
            }
            return Ok(Some(std::str::from_utf8(bytes).map(str::to_string).map_err(|_| ())));
        }
    }
}

/// Streaming reader over a dump file, optionally gzip-compressed.
///
/// Yields accepted records in file order. `stats()` is complete once the
/// iterator is exhausted.
pub struct CorpusStream {
    source: LineSource,
    filter: RecordFilter,
    stats: CorpusStats,
    users: HashSet<String>,
    failed: bool,
}

pub fn stream_corpus(path: impl AsRef<Path>, filter: RecordFilter) -> Result<CorpusStream> {
    Ok(CorpusStream {
        source: LineSource::open(path.as_ref())?,
        filter,
        stats: CorpusStats::default(),
        users: HashSet::new(),
        failed: false,
    })
}

impl CorpusStream {
    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn into_stats(self) -> CorpusStats {
        self.stats
    }
}

impl CorpusStats {
    fn record(&mut self, parsed: &Result<CommentRecord, SkipReason>) {
        self.records_read += 1;
        match parsed {
            Ok(_) => self.records_accepted += 1,
            Err(reason) => {
                self.records_skipped += 1;
                *self.skip_reasons.entry(reason.to_string()).or_default() += 1;
            }
        }
    }
}

impl Iterator for CorpusStream {
    type Item = Result<CommentRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.source.next_line() {
                Ok(Some(line)) => line,
                Ok(None) => return None,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            };
            let parsed = line
                .map_err(|()| SkipReason::Malformed)
                .and_then(|l| parse_dump_line(&l));
            self.stats.record(&parsed);
            if let Ok(record) = parsed {
                if self.filter.accepts(&record) {
                    if self.users.insert(record.author.clone()) {
                        self.stats.users_seen += 1;
                    }
                    return Some(Ok(record));
                }
                self.stats.records_filtered += 1;
            }
        }
    }
}

const BATCH_LINES: usize = 16_384;

/// Reads a whole dump, parsing batches of lines in parallel. Output order and
/// stats are identical to [`stream_corpus`].
pub fn load_corpus(
    path: impl AsRef<Path>,
    filter: &RecordFilter,
) -> Result<(Vec<CommentRecord>, CorpusStats)> {
    let mut source = LineSource::open(path.as_ref())?;
    let mut stats = CorpusStats::default();
    let mut users = HashSet::new();
    let mut out = Vec::new();
    loop {
        let mut batch = Vec::with_capacity(BATCH_LINES);
        while batch.len() < BATCH_LINES {
            match source.next_line()? {
                Some(line) => batch.push(line),
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        let parsed: Vec<_> = batch
            .into_par_iter()
            .map(|line| {
                line.map_err(|()| SkipReason::Malformed)
                    .and_then(|l| parse_dump_line(&l))
            })
            .collect();
        for p in parsed {
            stats.record(&p);
            if let Ok(record) = p {
                if filter.accepts(&record) {
                    if users.insert(record.author.clone()) {
                        stats.users_seen += 1;
                    }
                    out.push(record);
                } else {
                    stats.records_filtered += 1;
                }
            }
        }
    }
    Ok((out, stats))
}

pub type GroupedCorpus = BTreeMap<String, Vec<CommentRecord>>;

/// Groups records by author; each list is sorted by (created_utc, id).
pub fn group_by_user(records: impl IntoIterator<Item = CommentRecord>) -> GroupedCorpus {
    let mut map: GroupedCorpus = BTreeMap::new();
    for r in records {
        map.entry(r.author.clone()).or_default().push(r);
    }
    for list in map.values_mut() {
        list.sort_by(|a, b| {
            a.created_utc
                .cmp(&b.created_utc)
                .then_with(|| a.id.cmp(&b.id))
        });
    }
    map
}

/// One line of the grouped corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecords {
    pub author: String,
    pub comments: Vec<CommentRecord>,
}

pub fn write_grouped<W: Write>(mut w: W, corpus: &GroupedCorpus) -> std::io::Result<()> {
    for (author, comments) in corpus {
        let line = serde_json::to_string(&UserRecords {
            author: author.clone(),
            comments: comments.clone(),
        })
        .expect("grouped record serializes");
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn read_grouped<R: Read>(r: R) -> Result<GroupedCorpus> {
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| Error::io("<grouped>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let u: UserRecords = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidInput(format!("grouped line {}: {e}", i + 1)))?;
        out.insert(u.author, u.comments);
    }
    Ok(out)
}

/// Reads a newline-separated list, ignoring blanks and `#` comments.
pub fn read_name_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(id: &str, author: &str, sub: &str, ts: i64) -> String {
        format!(
            r#"{{"id":"{id}","author":"{author}","subreddit":"{sub}","created_utc":{ts},"body":"hello there","gilded":1,"controversiality":0,"ups":5,"downs":1,"author_flair_text":"Bipolar II"}}"#
        )
    }

    #[test]
    fn parses_full_record() {
        let r = parse_dump_line(&line("t1_abc", "alice", "bipolar", 1_300_000_000)).unwrap();
        assert_eq!(r.id, "t1_abc");
        assert_eq!(r.author, "alice");
        assert_eq!(r.subreddit, "bipolar");
        assert_eq!(r.created_utc, 1_300_000_000);
        assert_eq!(r.body, "hello there");
        assert_eq!(r.kind, RecordKind::Comment);
        assert_eq!((r.gilded, r.controversiality, r.ups, r.downs), (1, 0, 5, 1));
        assert_eq!(r.flair_text.as_deref(), Some("Bipolar II"));
    }

    #[test]
    fn skip_reasons() {
        assert_eq!(parse_dump_line("{not json"), Err(SkipReason::Malformed));
        assert_eq!(parse_dump_line("[1,2]"), Err(SkipReason::Malformed));
        assert_eq!(
            parse_dump_line(&line("t1_a", "[deleted]", "x", 1_300_000_000)),
            Err(SkipReason::DeletedAuthor)
        );
        assert_eq!(
            parse_dump_line(&line("t1_a", "bob", "x", 1_000_000_000)),
            Err(SkipReason::TimestampOutOfRange)
        );
        assert_eq!(
            parse_dump_line(&line("t1_a", "bob", "x", MAX_CREATED_UTC)),
            Err(SkipReason::TimestampOutOfRange)
        );
        assert!(parse_dump_line(&line("t1_a", "bob", "x", MIN_CREATED_UTC)).is_ok());
        assert_eq!(
            parse_dump_line(r#"{"id":"a","subreddit":"x","created_utc":1300000000,"body":""}"#),
            Err(SkipReason::MissingField("author"))
        );
        assert_eq!(
            parse_dump_line(r#"{"id":"a","author":" ","subreddit":"x","created_utc":1300000000,"body":""}"#),
            Err(SkipReason::EmptyField("author"))
        );
    }

    #[test]
    fn optional_fields_default() {
        let r = parse_dump_line(
            r#"{"id":"t3_p","author":"a","subreddit":"x","created_utc":"1300000000","body":"[removed]"}"#,
        )
        .unwrap();
        assert_eq!(r.kind, RecordKind::Post);
        assert_eq!((r.gilded, r.controversiality, r.ups, r.downs), (0, 0, 0, 0));
        assert!(r.flair_text.is_none());
        assert!(r.body_is_placeholder());
    }

    #[test]
    fn submissions_fall_back_to_title_and_selftext() {
        let r = parse_dump_line(
            r#"{"id":"p1","name":"t3_p1","author":"a","subreddit":"x","created_utc":1300000000,"title":"Hi","selftext":"there"}"#,
        )
        .unwrap();
        assert_eq!(r.body, "Hi\n\nthere");
        assert_eq!(r.kind, RecordKind::Post);
    }

    fn write_tmp(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn stream_counts_and_filters() {
        let f = write_tmp(&[
            line("t1_1", "a", "bipolar", 1_300_000_000),
            line("t1_2", "b", "politics", 1_300_000_001),
            line("t1_3", "a", "gaming", 1_300_000_002),
        ]);
        let mut s = stream_corpus(f.path(), RecordFilter::all()).unwrap();
        let all: Vec<_> = s.by_ref().collect::<Result<_>>().unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(s.stats().records_skipped, 0);
        assert_eq!(s.stats().users_seen, 2);

        let mut s = stream_corpus(f.path(), RecordFilter::all().subreddits(["Bipolar"])).unwrap();
        let some: Vec<_> = s.by_ref().collect::<Result<_>>().unwrap();
        assert_eq!(some.len(), 1);
        let st = s.into_stats();
        assert_eq!(st.records_read, 3);
        assert_eq!(st.records_read, st.records_accepted + st.records_skipped);
        assert_eq!(st.records_filtered, 2);
    }

    #[test]
    fn empty_file_and_bad_lines() {
        let f = write_tmp(&[]);
        let mut s = stream_corpus(f.path(), RecordFilter::all()).unwrap();
        assert!(s.next().is_none());
        assert_eq!(s.stats().records_read, 0);

        let f = write_tmp(&["{not json".into(), "".into(), line("t1_1", "a", "x", 1_300_000_000)]);
        let (recs, st) = load_corpus(f.path(), &RecordFilter::all()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(st.records_read, 2);
        assert_eq!(st.skip_reasons["malformed"], 1);
    }

    #[test]
    fn gzip_is_detected() {
        let f = tempfile::NamedTempFile::new().unwrap();
        {
            let mut gz = flate2::write::GzEncoder::new(
                std::fs::File::create(f.path()).unwrap(),
                flate2::Compression::default(),
            );
            writeln!(gz, "{}", line("t1_1", "a", "x", 1_300_000_000)).unwrap();
            gz.finish().unwrap();
        }
        let recs: Vec<_> = stream_corpus(f.path(), RecordFilter::all())
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(recs.len(), 1);
    }

    #[test]
    fn corrupt_gzip_is_fatal() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(&[0x1f, 0x8b, 8, 0, 0, 0, 0, 0, 0, 3, 1, 2, 3, 4]).unwrap();
        let res: Result<Vec<_>> = stream_corpus(f.path(), RecordFilter::all()).unwrap().collect();
        assert!(matches!(res, Err(Error::Decompress { .. })));
    }

    #[test]
    fn missing_file_is_fatal() {
        assert!(stream_corpus("/nonexistent/dump.jsonl", RecordFilter::all()).is_err());
    }

    #[test]
    fn grouping_sorts_and_breaks_ties_by_id() {
        let recs: Vec<_> = [
            line("t1_b", "A", "x", 1_300_000_005),
            line("t1_c", "B", "x", 1_300_000_001),
            line("t1_a", "A", "x", 1_300_000_005),
            line("t1_z", "A", "x", 1_300_000_001),
        ]
        .iter()
        .map(|l| parse_dump_line(l).unwrap())
        .collect();
        let g = group_by_user(recs);
        let ids: Vec<_> = g["A"].iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["t1_z", "t1_a", "t1_b"]);
        assert_eq!(g["B"].len(), 1);
        assert!(group_by_user(Vec::new()).is_empty());
    }

    fn arb_record() -> impl Strategy<Value = CommentRecord> {
        (
            "[a-z0-9]{1,8}",
            prop::bool::ANY,
            "[A-Za-z_]{1,10}",
            "[A-Za-z]{1,10}",
            MIN_CREATED_UTC..MAX_CREATED_UTC,
            "\\PC{0,40}",
            0u64..5,
            0u8..2,
            -50i64..500,
            0i64..50,
            prop::option::of("[ -~]{0,12}"),
        )
            .prop_map(|(id, post, author, sub, ts, body, g, c, u, d, flair)| CommentRecord {
                id: format!("{}{id}", if post { "t3_" } else { "t1_" }),
                author,
                subreddit: sub,
                created_utc: ts,
                body,
                kind: if post { RecordKind::Post } else { RecordKind::Comment },
                gilded: g,
                controversiality: c,
                ups: u,
                downs: d,
                flair_text: flair,
            })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_roundtrips(r in arb_record()) {
            prop_assert_eq!(parse_dump_line(&r.to_json_line()), Ok(r));
        }

        #[test]
        fn grouping_is_a_partition_and_order_free(
            recs in prop::collection::vec(arb_record(), 0..30),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let g = group_by_user(recs.clone());
            prop_assert_eq!(g.values().map(Vec::len).sum::<usize>(), recs.len());
            let mut shuffled = recs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            // ids may collide in generated data; compare the sort keys
            let key = |g: &GroupedCorpus| -> Vec<(String, Vec<(i64, String)>)> {
                g.iter().map(|(a, l)| (a.clone(), l.iter().map(|r| (r.created_utc, r.id.clone())).collect())).collect()
            };
            prop_assert_eq!(key(&group_by_user(shuffled)), key(&g));
        }
    }
}
