//! Record and replay of chat completions keyed by request digest.
//!
//! Fixture files are append-only JSON lines of the form
//! `{"digest": "...", "model_id": "...", "response": {"text": ..., "usage": ...}}`.
//! Only the digest of a request is stored, never headers or credentials.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{AttemptError, ChatBackend, ChatRequest, ChatResponse, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayMode {
    Record,
    Replay,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FixtureLine {
    digest: String,
    model_id: String,
    response: ChatResponse,
}

pub struct FixtureStore {
    path: PathBuf,
    entries: Mutex<HashMap<String, ChatResponse>>,
}

impl FixtureStore {
    /// Opens `path`, loading any existing lines. A missing file is empty.
    pub fn open(path: &Path) -> Result<Self, TransportError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| TransportError::Protocol(format!("reading {}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: FixtureLine = serde_json::from_str(line).map_err(|e| {
                    TransportError::Protocol(format!("{}:{}: {e}", path.display(), i + 1))
                })?;
                entries.insert(parsed.digest, parsed.response);
            }
        }
        Ok(FixtureStore {
            path: path.to_path_buf(),
            entries: Mutex::new(entries),
        })
    }

    pub fn get(&self, digest: &str) -> Option<ChatResponse> {
        self.entries.lock().expect("fixture lock").get(digest).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("fixture lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn record(&self, request: &ChatRequest, response: &ChatResponse) -> std::io::Result<()> {
        let digest = request.digest();
        let mut entries = self.entries.lock().expect("fixture lock");
        if entries.contains_key(&digest) {
            return Ok(());
        }
        let line = FixtureLine {
            digest: digest.clone(),
            model_id: request.model_id.clone(),
            response: response.clone(),
        };
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        writeln!(file, "{}", serde_json::to_string(&line).expect("fixture serializes"))?;
        file.sync_data()?;
        entries.insert(digest, response.clone());
        Ok(())
    }
}

pub struct RecordingBackend {
    inner: Arc<dyn ChatBackend>,
    store: Arc<FixtureStore>,
}

impl ChatBackend for RecordingBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, AttemptError> {
        let response = self.inner.send(request)?;
        self.store
            .record(request, &response)
            .map_err(|e| AttemptError::Protocol(format!("recording fixture: {e}")))?;
        Ok(response)
    }

    fn describe(&self) -> String {
        format!("record({})", self.inner.describe())
    }
}

pub struct ReplayBackend {
    store: Arc<FixtureStore>,
}

impl ChatBackend for ReplayBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, AttemptError> {
        let digest = request.digest();
        self.store.get(&digest).ok_or(AttemptError::FixtureMiss(digest))
    }

    fn describe(&self) -> String {
        format!("replay({})", self.store.path.display())
    }
}

/// Wraps `inner` so completions are persisted (Record), or serves completions
/// from the fixture file without touching `inner` at all (Replay).
pub fn record_and_replay(
    mode: ReplayMode,
    store_path: &Path,
    inner: Option<Arc<dyn ChatBackend>>,
) -> Result<Arc<dyn ChatBackend>, TransportError> {
    match mode {
        ReplayMode::Replay => {
            if !store_path.exists() {
                return Err(TransportError::InvalidRequest(format!(
                    "fixture file {} does not exist",
                    store_path.display()
                )));
            }
            let store = Arc::new(FixtureStore::open(store_path)?);
            Ok(Arc::new(ReplayBackend { store }))
        }
        ReplayMode::Record => {
            let inner = inner.ok_or_else(|| {
                TransportError::InvalidRequest("record mode needs an inner backend".into())
            })?;
            let store = Arc::new(FixtureStore::open(store_path)?);
            Ok(Arc::new(RecordingBackend { inner, store }))
        }
    }
}
