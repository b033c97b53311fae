//! Prompted relevance scoring and translation.
//!
//! Every provider call goes through the same path: look up the response
//! cache, otherwise ask the provider up to `1 + max_retries` times, and store
//! the first usable raw response. A relevance response that never yields a
//! number degrades to a score of 0.0 and is flagged instead of aborting the
//! batch.

mod cache;
mod http;
mod prompt;
mod provider;

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Query};

pub use cache::{
    now_unix, prompt_digest, CacheEntry, CacheKey, DiskCache, MemoryCache, NoCache, ResponseCache,
};
pub use http::HttpProvider;
pub use prompt::{build_relevance_prompt, build_translation_prompt, parse_score_response};
pub use provider::{
    CompletionRequest, CountingProvider, IdentityProvider, MockProvider, Provider, ProviderError,
};

#[derive(Debug, Error, PartialEq)]
pub enum ScorerError {
    #[error("empty {0}")]
    EmptyInput(&'static str),
    #[error("no number found in response {0:?}")]
    NoNumber(String),
    #[error("credential environment variable `{0}` is not set")]
    CredentialMissing(String),
    #[error("provider failed after {attempts} attempt(s): {source}")]
    ProviderUnreachable {
        attempts: usize,
        #[source]
        source: ProviderError,
    },
    #[error("cache i/o failed: {0}")]
    Cache(String),
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("score table {path}:{line}: {reason}")]
    ScoreTable {
        path: String,
        line: usize,
        reason: String,
    },
}

impl From<ProviderError> for ScorerError {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::CredentialMissing(var) => ScorerError::CredentialMissing(var),
            other => ScorerError::ProviderUnreachable {
                attempts: 1,
                source: other,
            },
        }
    }
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Secs {
        Whole(u64),
        Fractional(f64),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        match Secs::deserialize(d)? {
            Secs::Whole(s) => Ok(Duration::from_secs(s)),
            Secs::Fractional(s) => Duration::try_from_secs_f64(s).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// One temperature per run.
    pub temperature: f64,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_retries: usize,
    pub parallelism_limit: usize,
    #[serde(rename = "timeout_secs", with = "duration_secs")]
    pub timeout: Duration,
    /// Base delay before retrying a failed provider call; doubles per retry.
    #[serde(rename = "retry_backoff_secs", with = "duration_secs")]
    pub retry_backoff: Duration,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-3.5-turbo".into(),
            temperature: 0.7,
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 3,
            parallelism_limit: 4,
            timeout: Duration::from_secs(60),
            retry_backoff: Duration::from_millis(500),
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ScorerError> {
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(ScorerError::InvalidConfig(format!(
                "temperature {} must lie in [0, 1]",
                self.temperature
            )));
        }
        if self.parallelism_limit == 0 {
            return Err(ScorerError::InvalidConfig(
                "parallelism_limit must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn request<'a>(&'a self, prompt: &'a str) -> CompletionRequest<'a> {
        CompletionRequest {
            prompt,
            model: &self.model_name,
            temperature: self.temperature,
        }
    }
}

/// Raw relevance score for one query-document pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScore {
    pub query_id: String,
    pub doc_id: String,
    pub score: f64,
    pub provider: String,
    pub temperature: f64,
    /// Set when no parsable response was obtained and the score fell back
    /// to 0.0.
    #[serde(default)]
    pub degraded: bool,
}

enum Fetched<T> {
    Value(T),
    /// Every attempt answered, none usable; holds the last raw response.
    Unusable(String),
}

fn fetch<T>(
    prompt: &str,
    config: &ProviderConfig,
    provider: &dyn Provider,
    cache: &dyn ResponseCache,
    accept: impl Fn(&str) -> Option<T>,
) -> Result<Fetched<T>, ScorerError> {
    let key = CacheKey::new(prompt, &config.model_name, config.temperature);
    if let Some(entry) = cache
        .get(&key)
        .map_err(|e| ScorerError::Cache(e.to_string()))?
    {
        if let Some(v) = accept(&entry.response) {
            return Ok(Fetched::Value(v));
        }
    }

    let attempts = config.max_retries + 1;
    let mut last_response = None;
    let mut last_error = None;
    for attempt in 0..attempts {
        if attempt > 0 && last_error.is_some() && !config.retry_backoff.is_zero() {
            std::thread::sleep(config.retry_backoff * 2u32.saturating_pow(attempt as u32 - 1));
        }
        match provider.complete(&config.request(prompt)) {
            Ok(raw) => {
                if let Some(v) = accept(&raw) {
                    let entry = CacheEntry {
                        model: config.model_name.clone(),
                        temperature: config.temperature,
                        timestamp: now_unix(),
                        response: raw,
                    };
                    cache
                        .put(&key, &entry)
                        .map_err(|e| ScorerError::Cache(e.to_string()))?;
                    return Ok(Fetched::Value(v));
                }
                last_error = None;
                last_response = Some(raw);
            }
            Err(ProviderError::CredentialMissing(var)) => {
                return Err(ScorerError::CredentialMissing(var))
            }
            Err(e) if !e.is_retryable() => {
                return Err(ScorerError::ProviderUnreachable {
                    attempts: attempt + 1,
                    source: e,
                })
            }
            Err(e) => {
                log::debug!("provider attempt {} failed: {e}", attempt + 1);
                last_error = Some(e);
            }
        }
    }
    match (last_error, last_response) {
        (Some(e), _) => Err(ScorerError::ProviderUnreachable {
            attempts,
            source: e,
        }),
        (None, Some(raw)) => Ok(Fetched::Unusable(raw)),
        (None, None) => unreachable!("at least one attempt is made"),
    }
}

/// Scores one pair, serving from `cache` when possible.
pub fn score_pair(
    query: &Query,
    document: &Document,
    config: &ProviderConfig,
    provider: &dyn Provider,
    cache: &dyn ResponseCache,
) -> Result<RelevanceScore, ScorerError> {
    let prompt = build_relevance_prompt(query.text(), document.text())?;
    let fetched = fetch(&prompt, config, provider, cache, |r| {
        parse_score_response(r).ok()
    })?;
    let (score, degraded) = match fetched {
        Fetched::Value(s) => (s, false),
        Fetched::Unusable(raw) => {
            log::warn!(
                "degraded score for ({}, {}): no score in {:?} after {} attempt(s)",
                query.query_id,
                document.doc_id,
                raw,
                config.max_retries + 1
            );
            (0.0, true)
        }
    };
    Ok(RelevanceScore {
        query_id: query.query_id.clone(),
        doc_id: document.doc_id.clone(),
        score,
        provider: provider.name(),
        temperature: config.temperature,
        degraded,
    })
}

/// Translates `text` to English; the provider response is trimmed. An
/// empty response after all retries keeps the original text.
pub fn translate_text(
    text: &str,
    config: &ProviderConfig,
    provider: &dyn Provider,
    cache: &dyn ResponseCache,
) -> Result<String, ScorerError> {
    let prompt = build_translation_prompt(text)?;
    let fetched = fetch(&prompt, config, provider, cache, |r| {
        let t = r.trim();
        (!t.is_empty()).then(|| t.to_string())
    })?;
    Ok(match fetched {
        Fetched::Value(t) => t,
        Fetched::Unusable(_) => {
            log::warn!("empty translation for {text:?}; keeping original text");
            text.to_string()
        }
    })
}

/// Applies `f` to every item on at most `limit` worker threads, returning
/// results in input order.
pub fn parallel_map<T, R, F>(items: &[T], limit: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = limit.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("result slot")
                .expect("every slot filled")
        })
        .collect()
}

/// Scores `pairs` concurrently, bounded by `config.parallelism_limit`.
pub fn score_batch(
    pairs: &[(&Query, &Document)],
    config: &ProviderConfig,
    provider: &dyn Provider,
    cache: &dyn ResponseCache,
) -> Vec<Result<RelevanceScore, ScorerError>> {
    parallel_map(pairs, config.parallelism_limit, |(q, d)| {
        score_pair(q, d, config, provider, cache)
    })
}

pub fn write_score_table(scores: &[RelevanceScore], path: &Path) -> io::Result<()> {
    let mut w = io::BufWriter::new(fs::File::create(path)?);
    for s in scores {
        append_score(&mut w, s)?;
    }
    w.flush()
}

pub fn append_score(w: &mut impl Write, score: &RelevanceScore) -> io::Result<()> {
    let line = serde_json::to_string(score).map_err(io::Error::other)?;
    writeln!(w, "{line}")
}

/// Reads a JSONL score table. A final line without a terminating newline
/// that fails to parse is treated as an interrupted write and dropped.
pub fn read_score_table(path: &Path) -> Result<Vec<RelevanceScore>, ScorerError> {
    let text = fs::read_to_string(path).map_err(|e| ScorerError::ScoreTable {
        path: path.display().to_string(),
        line: 0,
        reason: e.to_string(),
    })?;
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RelevanceScore>(line) {
            Ok(s) => out.push(s),
            Err(_) if !complete && i + 1 == lines.len() => {
                log::warn!("dropping torn final line of {}", path.display());
            }
            Err(e) => {
                return Err(ScorerError::ScoreTable {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocumentCollection, QueryCollection};

    struct Scripted {
        responses: Mutex<Vec<Result<String, ProviderError>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn always(r: Result<&str, ProviderError>) -> Self {
            Self::new(vec![r.map(str::to_string); 16])
        }

        fn new(mut responses: Vec<Result<String, ProviderError>>) -> Self {
            responses.reverse();
            Self {
                responses: Mutex::new(responses),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl Provider for Scripted {
        fn name(&self) -> String {
            "scripted".into()
        }

        fn complete(&self, _: &CompletionRequest<'_>) -> Result<String, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.responses
                .lock()
                .unwrap()
                .pop()
                .expect("script exhausted")
        }
    }

    fn fixtures() -> (QueryCollection, DocumentCollection) {
        let mut qs = QueryCollection::new();
        qs.push("q1", "Kivabe bhalo bhabe ingreji shikhbo?", None)
            .unwrap();
        let mut ds = DocumentCollection::new();
        ds.push(
            "d1",
            "Shudhumatro lekhar opor focus korle hobe na. Ingreji songs shunle shikha sohoj hoy.",
            None,
        )
        .unwrap();
        (qs, ds)
    }

    fn config(max_retries: usize) -> ProviderConfig {
        ProviderConfig {
            max_retries,
            retry_backoff: Duration::ZERO,
            ..Default::default()
        }
    }

    #[test]
    fn scores_from_mock_then_cache() {
        let (qs, ds) = fixtures();
        let (q, d) = (qs.get("q1").unwrap(), ds.get("d1").unwrap());
        let prompt = build_relevance_prompt(q.text(), d.text()).unwrap();
        let mock = CountingProvider::new(MockProvider::from_prompts([(prompt, "0.55")]));
        let cache = MemoryCache::new();
        let cfg = config(2);

        let first = score_pair(q, d, &cfg, &mock, &cache).unwrap();
        assert_eq!(first.score, 0.55);
        assert!(!first.degraded);
        assert_eq!(first.provider, "mock");
        assert_eq!(mock.calls(), 1);

        let second = score_pair(q, d, &cfg, &mock, &cache).unwrap();
        assert_eq!(second, first);
        assert_eq!(mock.calls(), 1);
    }

    #[test]
    fn unparsable_responses_degrade_after_retries() {
        let (qs, ds) = fixtures();
        let p = Scripted::always(Ok("n/a"));
        let cache = MemoryCache::new();
        let s = score_pair(
            qs.get("q1").unwrap(),
            ds.get("d1").unwrap(),
            &config(2),
            &p,
            &cache,
        )
        .unwrap();
        assert_eq!(s.score, 0.0);
        assert!(s.degraded);
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
        assert!(cache.is_empty());
    }

    #[test]
    fn retry_recovers_after_bad_response() {
        let (qs, ds) = fixtures();
        let p = Scripted::new(vec![Ok("hmm".into()), Ok("0.8".into())]);
        let s = score_pair(
            qs.get("q1").unwrap(),
            ds.get("d1").unwrap(),
            &config(2),
            &p,
            &NoCache,
        )
        .unwrap();
        assert_eq!(s.score, 0.8);
        assert!(!s.degraded);
        assert_eq!(p.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn transport_failures_surface_after_retries() {
        let (qs, ds) = fixtures();
        let p = Scripted::always(Err(ProviderError::Unreachable("refused".into())));
        let err = score_pair(
            qs.get("q1").unwrap(),
            ds.get("d1").unwrap(),
            &config(1),
            &p,
            &NoCache,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ScorerError::ProviderUnreachable { attempts: 2, .. }
        ));
        assert_eq!(p.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn credential_missing_is_not_retried() {
        let (qs, ds) = fixtures();
        let p = Scripted::always(Err(ProviderError::CredentialMissing("KEY".into())));
        let err = score_pair(
            qs.get("q1").unwrap(),
            ds.get("d1").unwrap(),
            &config(3),
            &p,
            &NoCache,
        )
        .unwrap_err();
        assert_eq!(err, ScorerError::CredentialMissing("KEY".into()));
        assert_eq!(p.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn translation_paths() {
        let cfg = config(1);
        assert_eq!(
            translate_text("kemon acho", &cfg, &IdentityProvider, &NoCache).unwrap(),
            "kemon acho"
        );
        let prompt = build_translation_prompt("kemon acho").unwrap();
        let mock = MockProvider::from_prompts([(prompt, "  how are you\n")]);
        assert_eq!(
            translate_text("kemon acho", &cfg, &mock, &NoCache).unwrap(),
            "how are you"
        );
        let down = Scripted::always(Err(ProviderError::Unreachable("down".into())));
        assert!(matches!(
            translate_text("kemon acho", &cfg, &down, &NoCache),
            Err(ScorerError::ProviderUnreachable { .. })
        ));
        assert_eq!(
            translate_text("", &cfg, &IdentityProvider, &NoCache),
            Err(ScorerError::EmptyInput("text"))
        );
    }

    #[test]
    fn translation_is_cached() {
        let cfg = config(0);
        let p = CountingProvider::new(IdentityProvider);
        let cache = MemoryCache::new();
        translate_text("bhalo", &cfg, &p, &cache).unwrap();
        translate_text("bhalo", &cfg, &p, &cache).unwrap();
        assert_eq!(p.calls(), 1);
    }

    #[test]
    fn temperature_changes_cache_key() {
        let (qs, ds) = fixtures();
        let (q, d) = (qs.get("q1").unwrap(), ds.get("d1").unwrap());
        let p = CountingProvider::new(MockProvider::default());
        let cache = MemoryCache::new();
        let mut cfg = config(0);
        score_pair(q, d, &cfg, &p, &cache).unwrap();
        cfg.temperature = 0.9;
        score_pair(q, d, &cfg, &p, &cache).unwrap();
        assert_eq!(p.calls(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(ProviderConfig::default().validate().is_ok());
        let bad = ProviderConfig {
            temperature: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ProviderConfig {
            parallelism_limit: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn parallel_map_preserves_order() {
        let items: Vec<u32> = (0..100).collect();
        let out = parallel_map(&items, 7, |x| x * 2);
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(parallel_map(&Vec::<u32>::new(), 4, |x| *x).is_empty());
    }

    #[test]
    fn score_table_round_trip_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.jsonl");
        let scores = vec![RelevanceScore {
            query_id: "q1".into(),
            doc_id: "d1".into(),
            score: 0.55,
            provider: "mock".into(),
            temperature: 0.5,
            degraded: false,
        }];
        write_score_table(&scores, &path).unwrap();
        assert_eq!(read_score_table(&path).unwrap(), scores);

        let mut f = fs::OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"query_id\":\"q1\",\"doc").unwrap();
        assert_eq!(read_score_table(&path).unwrap(), scores);

        fs::write(&path, "not json\n").unwrap();
        assert!(matches!(
            read_score_table(&path),
            Err(ScorerError::ScoreTable { line: 1, .. })
        ));
    }
}
