//! Gerrit REST client and the resumable mining loop.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine;
use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::dataset::has_allowed_extension;
use super::records::{ChangeRecord, ChangeStatus, CommentRange, PatchSetRef, ReviewComment};
use super::store::{DatasetDir, JsonlAppender, PairRecord};
use super::CorpusError;

/// Gerrit prefixes JSON bodies with this line to defeat XSSI.
const XSSI_PREFIX: &str = ")]}'";

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("fetch failed after {attempts} attempts at cursor {}: {message}", cursor.start)]
    Network { cursor: MiningCursor, attempts: u32, message: String },
    #[error("unexpected response from {url}: {message}")]
    Protocol { url: String, message: String },
    #[error(transparent)]
    Store(#[from] CorpusError),
}

/// Failure of a single request after retries.
#[derive(Debug, Clone)]
pub struct FetchError {
    pub attempts: u32,
    pub message: String,
    pub retryable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay: Duration::from_millis(500), max_delay: Duration::from_secs(30) }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.min(20)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Minimum spacing between requests, shared by all workers.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(interval: Duration) -> Self {
        Self { interval, next: Mutex::new(Instant::now()) }
    }

    pub fn wait(&self) {
        let slot = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let slot = (*next).max(Instant::now());
            *next = slot + self.interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

/// Closed changes created in `[since, until)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeQuery {
    pub since: NaiveDate,
    pub until: NaiveDate,
    pub page_size: usize,
    pub project: Option<String>,
}

impl ChangeQuery {
    pub fn validate(&self) -> Result<(), MiningError> {
        if self.page_size == 0 {
            return Err(MiningError::Argument("page size must be positive".into()));
        }
        if self.since > self.until {
            return Err(MiningError::Argument(format!("window start {} is after end {}", self.since, self.until)));
        }
        Ok(())
    }

    pub fn is_empty_window(&self) -> bool {
        self.since >= self.until
    }

    /// Gerrit search expression.
    pub fn expression(&self) -> String {
        let mut q = format!(
            "(status:merged OR status:abandoned) after:\"{}\" before:\"{}\"",
            self.since.format("%Y-%m-%d"),
            self.until.format("%Y-%m-%d")
        );
        if let Some(p) = &self.project {
            q.push_str(&format!(" project:{p}"));
        }
        q
    }
}

/// Resume point of a mining run: the result offset of the next change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningCursor {
    pub query: String,
    pub start: usize,
    pub done: bool,
}

pub struct GerritClient {
    base: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
    limiter: RateLimiter,
}

impl GerritClient {
    pub fn new(endpoint: &str, retry: RetryPolicy, min_interval: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self { base: endpoint.trim_end_matches('/').to_string(), agent, retry, limiter: RateLimiter::new(min_interval) }
    }

    /// GETs a JSON document. `Ok(None)` for 404.
    pub fn get_json(&self, path: &str, query: &[(&str, String)]) -> Result<Option<Value>, FetchError> {
        Ok(match self.get_text(path, query)? {
            Some(body) => Some(parse_gerrit_json(&body).map_err(|m| FetchError { attempts: 1, message: m, retryable: false })?),
            None => None,
        })
    }

    fn get_text(&self, path: &str, query: &[(&str, String)]) -> Result<Option<String>, FetchError> {
        let url = format!("{}{}", self.base, path);
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.limiter.wait();
            let mut req = self.agent.get(&url).header("Accept", "application/json");
            for (k, v) in query {
                req = req.query(*k, v);
            }
            let outcome = match req.call() {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    match status {
                        200..=299 => match resp.body_mut().read_to_string() {
                            Ok(body) => return Ok(Some(body)),
                            Err(e) => (true, format!("reading body of {url}: {e}")),
                        },
                        404 => return Ok(None),
                        429 | 500..=599 => (true, format!("{url} returned {status}")),
                        _ => (false, format!("{url} returned {status}")),
                    }
                }
                Err(e) => (true, format!("{url}: {e}")),
            };
            let (retryable, message) = outcome;
            if !retryable || attempt >= self.retry.max_attempts {
                return Err(FetchError { attempts: attempt, message, retryable });
            }
            log::warn!("{message}; retrying");
            thread::sleep(self.retry.delay(attempt - 1));
        }
    }

    /// One page of the change search.
    pub fn query_page(&self, query: &ChangeQuery, start: usize) -> Result<ChangePage, FetchError> {
        let params = [
            ("q", query.expression()),
            ("n", query.page_size.to_string()),
            ("S", start.to_string()),
            ("o", "ALL_REVISIONS".to_string()),
        ];
        let body = self.get_json("/changes/", &params)?.unwrap_or(Value::Array(Vec::new()));
        let Value::Array(items) = body else {
            return Err(FetchError { attempts: 1, message: "change query did not return a list".into(), retryable: false });
        };
        let more = items.last().and_then(|v| v.get("_more_changes")).and_then(Value::as_bool).unwrap_or(false);
        let entries = items.len();
        let changes = items
            .iter()
            .map(|v| {
                parse_change(v).map_err(|e| {
                    log::warn!("skipping malformed change record: {e}");
                })
                .ok()
            })
            .collect();
        Ok(ChangePage { changes, entries, more })
    }

    /// All inline comments of a change, ordered by file then time.
    pub fn change_comments(&self, change: &ChangeRecord) -> Result<CommentBatch, FetchError> {
        let path = format!("/changes/{}/comments", encode(&change.change_id));
        let body = self.get_json(&path, &[])?.unwrap_or(Value::Object(Default::default()));
        Ok(parse_comments(&change.change_id, &body))
    }

    /// File text at a revision; `None` when the file does not exist there.
    pub fn file_content(&self, change_id: &str, revision: &str, file_path: &str) -> Result<Option<String>, FetchError> {
        let path = format!("/changes/{}/revisions/{}/files/{}/content", encode(change_id), revision, encode(file_path));
        let Some(body) = self.get_text(&path, &[])? else { return Ok(None) };
        let cleaned: String = body.chars().filter(|c| !c.is_whitespace()).collect();
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(cleaned)
            .map_err(|e| FetchError { attempts: 1, message: format!("{path}: bad base64: {e}"), retryable: false })?;
        Ok(Some(String::from_utf8_lossy(&bytes).into_owned()))
    }
}

fn encode(segment: &str) -> String {
    utf8_percent_encode(segment, NON_ALPHANUMERIC).to_string()
}

pub fn parse_gerrit_json(body: &str) -> Result<Value, String> {
    let body = body.trim_start();
    let body = body.strip_prefix(XSSI_PREFIX).unwrap_or(body);
    serde_json::from_str(body).map_err(|e| format!("invalid JSON: {e}"))
}

#[derive(Debug, Clone)]
pub struct ChangePage {
    /// `None` marks a malformed record.
    pub changes: Vec<Option<ChangeRecord>>,
    pub entries: usize,
    pub more: bool,
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f").ok().map(|t| t.and_utc())
}

pub fn parse_change(v: &Value) -> Result<ChangeRecord, String> {
    let change_id = match (v.get("_number").and_then(Value::as_u64), v.get("id").and_then(Value::as_str)) {
        (Some(n), _) => n.to_string(),
        (None, Some(id)) => id.to_string(),
        _ => return Err("missing change number".into()),
    };
    let project = v.get("project").and_then(Value::as_str).ok_or("missing project")?.to_string();
    let status = match v.get("status").and_then(Value::as_str) {
        Some("MERGED") => ChangeStatus::Merged,
        Some("ABANDONED") => ChangeStatus::Abandoned,
        other => return Err(format!("change {change_id} has non-closed status {other:?}")),
    };
    let created_at = v
        .get("created")
        .and_then(Value::as_str)
        .and_then(parse_timestamp)
        .ok_or_else(|| format!("change {change_id} has no valid creation time"))?;
    let mut patchsets: Vec<PatchSetRef> = v
        .get("revisions")
        .and_then(Value::as_object)
        .map(|revs| {
            revs.iter()
                .filter_map(|(sha, info)| {
                    let number = info.get("_number").and_then(Value::as_u64)?;
                    Some(PatchSetRef { number: number as u32, revision: sha.clone() })
                })
                .collect()
        })
        .unwrap_or_default();
    patchsets.sort_by_key(|p| p.number);
    let record = ChangeRecord { change_id, project, status, created_at, patchsets };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

#[derive(Debug, Clone, Default)]
pub struct CommentBatch {
    pub comments: Vec<ReviewComment>,
    pub skipped: usize,
}

pub fn parse_comments(change_id: &str, body: &Value) -> CommentBatch {
    let mut batch = CommentBatch::default();
    let Some(files) = body.as_object() else { return batch };
    for (path, list) in files {
        let mut entries: Vec<(String, ReviewComment)> = Vec::new();
        for c in list.as_array().into_iter().flatten() {
            match parse_comment(change_id, path, c) {
                Ok(parsed) => entries.push(parsed),
                Err(e) => {
                    log::debug!("skipping comment on {path}: {e}");
                    batch.skipped += 1;
                }
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        batch.comments.extend(entries.into_iter().map(|(_, c)| c));
    }
    batch
}

fn parse_comment(change_id: &str, path: &str, v: &Value) -> Result<(String, ReviewComment), String> {
    let comment_id = v.get("id").and_then(Value::as_str).ok_or("missing id")?.to_string();
    let range = v.get("range").and_then(|r| {
        Some(CommentRange {
            start_line: r.get("start_line")?.as_u64()? as u32,
            end_line: r.get("end_line")?.as_u64()? as u32,
        })
    });
    let comment = ReviewComment {
        comment_id,
        change_id: change_id.to_string(),
        patchset_number: v.get("patch_set").and_then(Value::as_u64).unwrap_or(1) as u32,
        file_path: path.to_string(),
        line: v.get("line").and_then(Value::as_u64).unwrap_or(0) as u32,
        author_id: v
            .get("author")
            .and_then(|a| a.get("_account_id"))
            .map(|id| id.to_string())
            .unwrap_or_default(),
        text: v.get("message").and_then(Value::as_str).unwrap_or("").to_string(),
        thread_parent: v.get("in_reply_to").and_then(Value::as_str).map(str::to_string),
        range,
    };
    comment.validate().map_err(|e| e.to_string())?;
    let updated = v.get("updated").and_then(Value::as_str).unwrap_or("").to_string();
    Ok((updated, comment))
}

/// Lazily paged stream of closed changes.
pub struct ChangeStream<'a> {
    client: &'a GerritClient,
    query: ChangeQuery,
    position: usize,
    buffer: VecDeque<Option<ChangeRecord>>,
    more: bool,
    failed: bool,
    skipped: usize,
}

impl ChangeStream<'_> {
    /// Cursor pointing just past the last change handed out.
    pub fn cursor(&self) -> MiningCursor {
        MiningCursor {
            query: self.query.expression(),
            start: self.position,
            done: !self.more && self.buffer.is_empty(),
        }
    }

    /// Malformed records skipped so far.
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

impl Iterator for ChangeStream<'_> {
    type Item = Result<ChangeRecord, MiningError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.failed {
                return None;
            }
            if let Some(entry) = self.buffer.pop_front() {
                self.position += 1;
                match entry {
                    Some(change) => return Some(Ok(change)),
                    None => {
                        self.skipped += 1;
                        continue;
                    }
                }
            }
            if !self.more {
                return None;
            }
            match self.client.query_page(&self.query, self.position) {
                Ok(page) => {
                    self.more = page.more && page.entries > 0;
                    self.buffer.extend(page.changes);
                }
                Err(e) => {
                    self.failed = true;
                    return Some(Err(MiningError::Network {
                        cursor: self.cursor(),
                        attempts: e.attempts,
                        message: e.message,
                    }));
                }
            }
        }
    }
}

/// Streams every closed change of the window, resuming from `resume` when
/// it belongs to the same query.
pub fn fetch_changes<'a>(
    client: &'a GerritClient,
    query: &ChangeQuery,
    resume: Option<&MiningCursor>,
) -> Result<ChangeStream<'a>, MiningError> {
    query.validate()?;
    let expression = query.expression();
    let (position, done) = match resume {
        Some(c) if c.query != expression => {
            return Err(MiningError::Argument(format!("cursor belongs to query {:?}", c.query)));
        }
        Some(c) => (c.start, c.done),
        None => (0, false),
    };
    Ok(ChangeStream {
        client,
        query: query.clone(),
        position,
        buffer: VecDeque::new(),
        more: !done && !query.is_empty_window(),
        failed: false,
        skipped: 0,
    })
}

#[derive(Debug, Clone)]
pub struct MineOptions {
    pub workers: usize,
    /// Also download source/destination revisions of commented files with
    /// these extensions. Empty disables file download.
    pub file_extensions: Vec<String>,
}

impl Default for MineOptions {
    fn default() -> Self {
        Self { workers: 4, file_extensions: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningSummary {
    pub changes: usize,
    pub comments: usize,
    pub pairs: usize,
    pub skipped_changes: usize,
    pub skipped_comments: usize,
    pub cursor: Option<MiningCursor>,
}

pub fn load_cursor(dir: &DatasetDir) -> Result<Option<MiningCursor>, CorpusError> {
    let path = dir.cursor_path();
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(path)?)?))
}

fn save_cursor(dir: &DatasetDir, cursor: &MiningCursor) -> Result<(), CorpusError> {
    let tmp = dir.root().join("cursor.json.tmp");
    fs::write(&tmp, serde_json::to_string_pretty(cursor)?)?;
    fs::rename(tmp, dir.cursor_path())?;
    Ok(())
}

struct Sinks {
    changes: JsonlAppender<ChangeRecord>,
    comments: JsonlAppender<ReviewComment>,
    pairs: JsonlAppender<PairRecord>,
}

/// Mines the window into `dir`, page by page, persisting the cursor after
/// every page so an interrupted run picks up where it stopped.
pub fn mine(client: &GerritClient, query: &ChangeQuery, dir: &DatasetDir, opts: &MineOptions) -> Result<MiningSummary, MiningError> {
    let resume = load_cursor(dir)?.filter(|c| c.query == query.expression());
    let mut stream = fetch_changes(client, query, resume.as_ref())?;
    let sinks = Sinks {
        changes: JsonlAppender::open(&dir.changes_path())?,
        comments: JsonlAppender::open(&dir.comments_path())?,
        pairs: JsonlAppender::open(&dir.pairs_path())?,
    };
    let mut summary = MiningSummary::default();

    loop {
        let mut page = Vec::with_capacity(query.page_size);
        let mut failure = None;
        for item in stream.by_ref() {
            match item {
                Ok(change) => page.push(change),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
            if page.len() == query.page_size {
                break;
            }
        }
        let page_result = process_page(client, dir, &sinks, &page, opts, &mut summary);
        sinks.changes.flush()?;
        sinks.comments.flush()?;
        sinks.pairs.flush()?;
        if let Err(message) = page_result {
            // The page was only partly stored; resume from its first change.
            let mut cursor = stream.cursor();
            cursor.start -= page.len();
            cursor.done = false;
            save_cursor(dir, &cursor)?;
            return Err(MiningError::Network { cursor, attempts: client.retry.max_attempts, message });
        }
        let cursor = stream.cursor();
        save_cursor(dir, &cursor)?;
        summary.skipped_changes = stream.skipped();
        if let Some(e) = failure {
            return Err(e);
        }
        if page.is_empty() || cursor.done {
            summary.cursor = Some(cursor);
            break;
        }
    }
    dir.rebuild_index()?;
    Ok(summary)
}

fn process_page(
    client: &GerritClient,
    dir: &DatasetDir,
    sinks: &Sinks,
    page: &[ChangeRecord],
    opts: &MineOptions,
    summary: &mut MiningSummary,
) -> Result<(), String> {
    let next = AtomicUsize::new(0);
    let totals = Mutex::new((0usize, 0usize, 0usize));
    let error: Mutex<Option<String>> = Mutex::new(None);
    thread::scope(|s| {
        for _ in 0..opts.workers.max(1).min(page.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= page.len() || error.lock().map(|e| e.is_some()).unwrap_or(true) {
                    break;
                }
                match mine_change(client, dir, sinks, &page[i], opts) {
                    Ok((c, p, skipped)) => {
                        let mut t = totals.lock().unwrap_or_else(|e| e.into_inner());
                        t.0 += c;
                        t.1 += p;
                        t.2 += skipped;
                    }
                    Err(e) => {
                        *error.lock().unwrap_or_else(|e| e.into_inner()) = Some(e);
                        break;
                    }
                }
            });
        }
    });
    let (comments, pairs, skipped) = totals.into_inner().unwrap_or_else(|e| e.into_inner());
    summary.changes += page.len();
    summary.comments += comments;
    summary.pairs += pairs;
    summary.skipped_comments += skipped;
    match error.into_inner().unwrap_or_else(|e| e.into_inner()) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn mine_change(
    client: &GerritClient,
    dir: &DatasetDir,
    sinks: &Sinks,
    change: &ChangeRecord,
    opts: &MineOptions,
) -> Result<(usize, usize, usize), String> {
    let batch = client.change_comments(change).map_err(|e| e.message)?;
    let mut pairs = Vec::new();
    if !opts.file_extensions.is_empty() {
        let mut cache: HashMap<(String, String), Option<String>> = HashMap::new();
        let mut fetch = |rev: &str, path: &str| -> Result<Option<String>, String> {
            let key = (rev.to_string(), path.to_string());
            if let Some(hit) = cache.get(&key) {
                return Ok(hit.clone());
            }
            let text = client.file_content(&change.change_id, rev, path).map_err(|e| e.message)?;
            cache.insert(key, text.clone());
            Ok(text)
        };
        for c in &batch.comments {
            if !has_allowed_extension(&c.file_path, &opts.file_extensions) {
                continue;
            }
            let source_rev = change.patchsets.iter().find(|p| p.number == c.patchset_number);
            let source = match source_rev {
                Some(p) => fetch(&p.revision, &c.file_path)?,
                None => None,
            };
            // Only merged changes have a destination revision in the codebase.
            let destination = match (change.status, change.latest_patchset()) {
                (ChangeStatus::Merged, Some(p)) => fetch(&p.revision, &c.file_path)?,
                _ => None,
            };
            if source.is_none() && destination.is_none() {
                continue;
            }
            let store = |t: Option<String>| t.map(|t| dir.put_blob(&t)).transpose().map_err(|e| e.to_string());
            pairs.push(PairRecord {
                comment_id: c.comment_id.clone(),
                file_path: c.file_path.clone(),
                source: store(source)?,
                destination: store(destination)?,
            });
        }
    }
    let io = |e: CorpusError| e.to_string();
    sinks.changes.append(change).map_err(io)?;
    for c in &batch.comments {
        sinks.comments.append(c).map_err(io)?;
    }
    for p in &pairs {
        sinks.pairs.append(p).map_err(io)?;
    }
    Ok((batch.comments.len(), pairs.len(), batch.skipped))
}
