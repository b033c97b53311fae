//! Content-addressed response cache.
//!
//! Entries are keyed by a SHA-256 digest of prompt, model and temperature and
//! hold the raw provider response, so a change in response parsing can be
//! replayed without new provider calls. On disk every digest is one file
//! under a two-character shard directory:
//!
//! ```text
//! <root>/ab/ab34...ef
//!   model: gpt-3.5-turbo
//!   temperature: 0.7
//!   timestamp: 1760000000
//!
//!   <raw response>
//! ```
//!
//! Writes go to a temporary file that is renamed into place, so concurrent
//! writers of the same key never expose a torn file and the last writer wins.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// SHA-256 hex digest of the prompt alone; keys the mock provider's table.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub digest: String,
}

impl CacheKey {
    pub fn new(prompt: &str, model: &str, temperature: f64) -> Self {
        let mut h = Sha256::new();
        h.update(prompt.as_bytes());
        h.update([0u8]);
        h.update(model.as_bytes());
        h.update([0u8]);
        // shortest round-trip rendering; identical on every platform
        h.update(format!("{temperature}").as_bytes());
        Self {
            digest: hex::encode(h.finalize()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub model: String,
    pub temperature: f64,
    pub timestamp: u64,
    pub response: String,
}

pub trait ResponseCache: Send + Sync {
    fn get(&self, key: &CacheKey) -> io::Result<Option<CacheEntry>>;

    fn put(&self, key: &CacheKey, entry: &CacheEntry) -> io::Result<()>;
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct DiskCache {
    root: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl DiskCache {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        let shard = key.digest.get(..2).unwrap_or("__");
        self.root.join(shard).join(&key.digest)
    }

    fn encode(entry: &CacheEntry) -> String {
        format!(
            "model: {}\ntemperature: {}\ntimestamp: {}\n\n{}",
            entry.model, entry.temperature, entry.timestamp, entry.response
        )
    }

    fn decode(text: &str) -> Option<CacheEntry> {
        let (header, response) = text.split_once("\n\n")?;
        let mut model = None;
        let mut temperature = None;
        let mut timestamp = None;
        for line in header.lines() {
            let (k, v) = line.split_once(": ")?;
            match k {
                "model" => model = Some(v.to_string()),
                "temperature" => temperature = v.parse().ok(),
                "timestamp" => timestamp = v.parse().ok(),
                _ => {}
            }
        }
        Some(CacheEntry {
            model: model?,
            temperature: temperature?,
            timestamp: timestamp?,
            response: response.to_string(),
        })
    }
}

impl ResponseCache for DiskCache {
    fn get(&self, key: &CacheKey) -> io::Result<Option<CacheEntry>> {
        match fs::read_to_string(self.path_for(key)) {
            Ok(text) => {
                let entry = Self::decode(&text);
                if entry.is_none() {
                    log::warn!("ignoring unreadable cache entry {}", key.digest);
                }
                Ok(entry)
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn put(&self, key: &CacheKey, entry: &CacheEntry) -> io::Result<()> {
        let path = self.path_for(key);
        let dir = path.parent().expect("cache path has a shard directory");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{}.{}.{}.tmp",
            key.digest,
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(Self::encode(entry).as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)
    }
}

#[derive(Debug, Default)]
pub struct MemoryCache {
    entries: Mutex<HashMap<CacheKey, CacheEntry>>,
}

impl MemoryCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ResponseCache for MemoryCache {
    fn get(&self, key: &CacheKey) -> io::Result<Option<CacheEntry>> {
        Ok(self.entries.lock().expect("cache lock").get(key).cloned())
    }

    fn put(&self, key: &CacheKey, entry: &CacheEntry) -> io::Result<()> {
        self.entries
            .lock()
            .expect("cache lock")
            .insert(key.clone(), entry.clone());
        Ok(())
    }
}

/// Never stores anything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoCache;

impl ResponseCache for NoCache {
    fn get(&self, _key: &CacheKey) -> io::Result<Option<CacheEntry>> {
        Ok(None)
    }

    fn put(&self, _key: &CacheKey, _entry: &CacheEntry) -> io::Result<()> {
        Ok(())
    }
}
