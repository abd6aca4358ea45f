//! Process-local stores for guided-search sessions, uploaded matrices and
//! generated archives.
//!
//! Lookups never remove anything: an entry past its lifetime answers
//! [`StoreError::Expired`] until the sweeper deletes it. Removed ids are kept
//! as tombstones for one more lifetime so late requests still get
//! `Expired` rather than `Unknown`.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use lighthouse_core::taxonomy::GuidedSession;
use rand::RngCore;
use serde::Serialize;

use crate::error::StoreError;

/// 128 random bits as 32 lowercase hex digits.
pub fn new_id() -> String {
    let mut bytes = [0u8; 16];
    rand::rngs::OsRng.fill_bytes(&mut bytes);
    hex::encode(bytes)
}

pub fn is_id(s: &str) -> bool {
    s.len() == 32 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

struct Entry<T> {
    value: T,
    touched: Instant,
}

struct Slots<T> {
    live: HashMap<String, Entry<T>>,
    gone: HashMap<String, Instant>,
}

impl<T> Default for Slots<T> {
    fn default() -> Self {
        Self { live: HashMap::new(), gone: HashMap::new() }
    }
}

fn expired(touched: Instant, now: Instant, ttl: Duration) -> bool {
    now.saturating_duration_since(touched) > ttl
}

impl<T> Slots<T> {
    fn get(&mut self, id: &str, now: Instant, ttl: Duration) -> Result<&mut Entry<T>, StoreError> {
        match self.live.get_mut(id) {
            Some(e) if expired(e.touched, now, ttl) => Err(StoreError::Expired(id.to_string())),
            Some(e) => Ok(e),
            None if self.gone.contains_key(id) => Err(StoreError::Expired(id.to_string())),
            None => Err(StoreError::Unknown(id.to_string())),
        }
    }

    fn take(&mut self, id: &str, now: Instant, ttl: Duration) -> Result<T, StoreError> {
        self.get(id, now, ttl)?;
        self.gone.insert(id.to_string(), now);
        Ok(self.live.remove(id).expect("checked above").value)
    }

    /// Removes expired entries and forgets tombstones older than `ttl`.
    fn expire(&mut self, now: Instant, ttl: Duration) -> Vec<(String, T)> {
        let ids: Vec<String> =
            self.live.iter().filter(|(_, e)| expired(e.touched, now, ttl)).map(|(id, _)| id.clone()).collect();
        let mut out: Vec<(String, T)> = ids
            .into_iter()
            .map(|id| {
                let e = self.live.remove(&id).expect("listed");
                self.gone.insert(id.clone(), now);
                (id, e.value)
            })
            .collect();
        self.gone.retain(|_, t| !expired(*t, now, ttl));
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

/// Guided-search sessions with a sliding lifetime.
pub struct SessionStore {
    ttl: Duration,
    slots: Mutex<Slots<GuidedSession>>,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self { ttl, slots: Mutex::default() }
    }

    pub fn insert(&self, session: GuidedSession, now: Instant) {
        let id = session.session_id.clone();
        lock(&self.slots).live.insert(id, Entry { value: session, touched: now });
    }

    pub fn get(&self, id: &str, now: Instant) -> Result<GuidedSession, StoreError> {
        let mut slots = lock(&self.slots);
        let e = slots.get(id, now, self.ttl)?;
        e.touched = now;
        Ok(e.value.clone())
    }

    /// Stores the next state of a live session.
    pub fn replace(&self, session: GuidedSession, now: Instant) -> Result<(), StoreError> {
        let mut slots = lock(&self.slots);
        let e = slots.get(&session.session_id, now, self.ttl)?;
        *e = Entry { value: session, touched: now };
        Ok(())
    }

    pub fn len(&self) -> usize {
        lock(&self.slots).live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sweep(&self, now: Instant) -> Vec<String> {
        lock(&self.slots).expire(now, self.ttl).into_iter().map(|(id, _)| id).collect()
    }
}

/// A file stored under a server-generated name.
#[derive(Debug, Clone)]
pub struct FileRecord<M> {
    pub id: String,
    /// Client-supplied name for uploads, suggested name for downloads.
    /// Never used to build a path.
    pub filename: String,
    pub path: PathBuf,
    pub size: u64,
    pub created: Instant,
    pub meta: M,
}

impl<M> FileRecord<M> {
    fn delete_file(&self) {
        match fs::remove_file(&self.path) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => tracing::warn!("cannot delete {}: {e}", self.path.display()),
        }
    }
}

/// Files on disk indexed by id, each living at most one lifetime.
pub struct FileStore<M> {
    dir: PathBuf,
    extension: &'static str,
    ttl: Duration,
    slots: Mutex<Slots<FileRecord<M>>>,
}

impl<M: Clone> FileStore<M> {
    /// Creates `dir` and deletes files left in it by an earlier process.
    pub fn open(dir: impl Into<PathBuf>, extension: &'static str, ttl: Duration) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            let ours = path.extension().is_some_and(|e| e == extension)
                && path.file_stem().and_then(|s| s.to_str()).is_some_and(is_id);
            if ours && path.is_file() {
                fs::remove_file(&path)?;
            }
        }
        Ok(Self { dir, extension, ttl, slots: Mutex::default() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    /// Writes `bytes` under a fresh id.
    pub fn put(&self, filename: &str, bytes: &[u8], meta: M, now: Instant) -> io::Result<FileRecord<M>> {
        let id = new_id();
        let path = self.dir.join(format!("{id}.{}", self.extension));
        fs::write(&path, bytes)?;
        let record = FileRecord {
            id: id.clone(),
            filename: filename.to_string(),
            path,
            size: bytes.len() as u64,
            created: now,
            meta,
        };
        lock(&self.slots).live.insert(id, Entry { value: record.clone(), touched: now });
        Ok(record)
    }

    pub fn get(&self, id: &str, now: Instant) -> Result<FileRecord<M>, StoreError> {
        lock(&self.slots).get(id, now, self.ttl).map(|e| e.value.clone())
    }

    /// Removes the record for single use. The file stays on disk until the
    /// caller has read it and calls [`FileStore::finish`].
    pub fn take(&self, id: &str, now: Instant) -> Result<FileRecord<M>, StoreError> {
        lock(&self.slots).take(id, now, self.ttl)
    }

    pub fn finish(&self, record: &FileRecord<M>) {
        record.delete_file();
    }

    /// Removes a live record and its file. Returns whether it was live.
    pub fn remove(&self, id: &str, now: Instant) -> bool {
        let taken = lock(&self.slots).take(id, now, Duration::MAX);
        match taken {
            Ok(r) => {
                r.delete_file();
                true
            }
            Err(_) => false,
        }
    }

    pub fn len(&self) -> usize {
        lock(&self.slots).live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sweep(&self, now: Instant) -> Vec<String> {
        let expired = lock(&self.slots).expire(now, self.ttl);
        expired
            .into_iter()
            .map(|(id, r)| {
                r.delete_file();
                id
            })
            .collect()
    }
}

/// Ids removed by one sweep, per store.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SweepReport {
    pub sessions: Vec<String>,
    pub uploads: Vec<String>,
    pub downloads: Vec<String>,
}

impl SweepReport {
    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn total(&self) -> usize {
        self.sessions.len() + self.uploads.len() + self.downloads.len()
    }
}
