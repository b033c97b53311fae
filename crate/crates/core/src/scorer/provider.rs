use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use super::cache::prompt_digest;
use super::prompt::TRANSLATION_HEADER;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider unreachable: {0}")]
    Unreachable(String),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("provider response could not be decoded: {0}")]
    InvalidResponse(String),
    #[error("credential environment variable `{0}` is not set")]
    CredentialMissing(String),
}

impl ProviderError {
    /// Transport failures, throttling and server errors are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Unreachable(_) | ProviderError::InvalidResponse(_) => true,
            ProviderError::Status { status, .. } => *status == 429 || *status >= 500,
            ProviderError::CredentialMissing(_) => false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub model: &'a str,
    pub temperature: f64,
}

/// A text-generation backend answering one prompt at a time.
pub trait Provider: Send + Sync {
    /// Identity recorded in score tables, e.g. `mock` or `http:gpt-3.5-turbo`.
    fn name(&self) -> String;

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

/// Answers from a table keyed by [`prompt_digest`]; unknown prompts get
/// `"0.0"`. Model and temperature are ignored.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    table: HashMap<String, String>,
}

impl MockProvider {
    pub fn new(table: HashMap<String, String>) -> Self {
        Self { table }
    }

    pub fn from_prompts<I, P, R>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (P, R)>,
        P: AsRef<str>,
        R: Into<String>,
    {
        Self::new(
            pairs
                .into_iter()
                .map(|(p, r)| (prompt_digest(p.as_ref()), r.into()))
                .collect(),
        )
    }

    /// Reads a JSON object mapping prompt digests to response text.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        let table: HashMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Self::new(table))
    }

    pub fn insert(&mut self, prompt: &str, response: impl Into<String>) {
        self.table.insert(prompt_digest(prompt), response.into());
    }

    pub fn table(&self) -> &HashMap<String, String> {
        &self.table
    }
}

/// Echoes the text of translation prompts; any other prompt gets `"0.0"`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityProvider;

impl Provider for IdentityProvider {
    fn name(&self) -> String {
        "identity".into()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        Ok(request
            .prompt
            .strip_prefix(TRANSLATION_HEADER)
            .and_then(|rest| rest.strip_prefix('\n'))
            .unwrap_or("0.0")
            .to_string())
    }
}

impl Provider for MockProvider {
    fn name(&self) -> String {
        "mock".into()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        Ok(self
            .table
            .get(&prompt_digest(request.prompt))
            .cloned()
            .unwrap_or_else(|| "0.0".to_string()))
    }
}

/// Wraps a provider and counts `complete` calls.
#[derive(Debug)]
pub struct CountingProvider<P> {
    inner: P,
    calls: AtomicUsize,
}

impl<P: Provider> CountingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }
}

impl<P: Provider> Provider for CountingProvider<P> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}
