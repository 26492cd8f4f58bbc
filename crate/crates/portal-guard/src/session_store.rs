//! Server-side session storage.
//!
//! Records live in memory and, when a persistence directory is configured,
//! are mirrored to one `<id>.sess` file per session. Each file holds one
//! `key=value` line per variable with the value percent-encoded; the file's
//! modification time is the session's last access.
//!
//! Calls that touch the same session are serialized on a per-session lock.
//! Calls on different sessions run in parallel.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{Duration, SystemTime};

use percent_encoding::{percent_decode_str, utf8_percent_encode, NON_ALPHANUMERIC};
use portal_guard_core::session::SESSION_ID_ENTROPY_BYTES;
use portal_guard_core::{SessionId, SessionVars, USER_KEY};

pub const DEFAULT_IDLE_TTL: Duration = Duration::from_secs(24 * 60 * 60);

const SESSION_FILE_EXT: &str = "sess";

/// How the store treats a client-presented id it does not know.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SessionMode {
    /// Adopt the unknown id for the new session, as classic PHP did.
    Faithful,
    /// Discard unknown ids and issue a fresh one. Also regenerates the id
    /// when a user logs in.
    #[default]
    Hardened,
}

impl FromStr for SessionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "faithful" => Ok(SessionMode::Faithful),
            "hardened" => Ok(SessionMode::Hardened),
            other => Err(format!(
                "unknown mode {other:?}, expected \"faithful\" or \"hardened\""
            )),
        }
    }
}

impl fmt::Display for SessionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionMode::Faithful => "faithful",
            SessionMode::Hardened => "hardened",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionStoreConfig {
    pub idle_ttl: Duration,
    pub mode: SessionMode,
    pub persistence_dir: Option<PathBuf>,
}

impl Default for SessionStoreConfig {
    fn default() -> Self {
        SessionStoreConfig {
            idle_ttl: DEFAULT_IDLE_TTL,
            mode: SessionMode::default(),
            persistence_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("idle ttl must be greater than zero")]
    ZeroTtl,
    #[error("session variable key must not be empty")]
    EmptyKey,
    #[error("session variable key {0:?} contains '=' or a line break")]
    InvalidKey(String),
    #[error("the \"user\" session variable must not be empty")]
    EmptyUser,
    #[error("no live session with id {0}")]
    UnknownSession(SessionId),
    #[error("session file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("session file {path} line {line} is malformed")]
    Corrupt { path: PathBuf, line: usize },
    #[error("could not obtain randomness for a session id: {0}")]
    Entropy(getrandom::Error),
}

/// Value snapshot of one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRecord {
    pub id: SessionId,
    pub vars: SessionVars,
    pub created_at: SystemTime,
    pub last_access: SystemTime,
}

impl SessionRecord {
    fn fresh(id: SessionId, now: SystemTime) -> Self {
        SessionRecord {
            id,
            vars: SessionVars::new(),
            created_at: now,
            last_access: now,
        }
    }

    pub fn get_var(&self, key: &str) -> Option<&str> {
        self.vars.get(key).map(String::as_str)
    }

    fn idle_longer_than(&self, ttl: Duration, now: SystemTime) -> bool {
        now.duration_since(self.last_access)
            .map(|idle| idle > ttl)
            .unwrap_or(false)
    }
}

/// Draws a new id from the operating system's CSPRNG.
pub fn generate_session_id() -> Result<SessionId, SessionError> {
    let mut entropy = [0u8; SESSION_ID_ENTROPY_BYTES];
    getrandom::fill(&mut entropy).map_err(SessionError::Entropy)?;
    Ok(SessionId::from_entropy(&entropy))
}

pub type Clock = Arc<dyn Fn() -> SystemTime + Send + Sync>;

struct Slot {
    record: SessionRecord,
    // set once the slot has been dropped from the map (regenerated, purged,
    // destroyed); holders of a stale Arc must treat the session as gone
    retired: bool,
}

type SlotRef = Arc<Mutex<Slot>>;

pub struct SessionStore {
    config: SessionStoreConfig,
    sessions: RwLock<HashMap<SessionId, SlotRef>>,
    clock: Clock,
}

impl fmt::Debug for SessionStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionStore")
            .field("config", &self.config)
            .field("sessions", &self.len())
            .finish()
    }
}

fn lock(slot: &SlotRef) -> MutexGuard<'_, Slot> {
    slot.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl SessionStore {
    /// Opens a store, loading any live sessions found in the persistence
    /// directory. Expired session files are deleted.
    pub fn open(config: SessionStoreConfig) -> Result<Self, SessionError> {
        Self::with_clock(config, Arc::new(SystemTime::now))
    }

    pub fn with_clock(config: SessionStoreConfig, clock: Clock) -> Result<Self, SessionError> {
        if config.idle_ttl.is_zero() {
            return Err(SessionError::ZeroTtl);
        }
        let store = SessionStore {
            config,
            sessions: RwLock::new(HashMap::new()),
            clock,
        };
        if let Some(dir) = &store.config.persistence_dir {
            fs::create_dir_all(dir).map_err(|source| SessionError::Io {
                path: dir.clone(),
                source,
            })?;
            let now = (store.clock)();
            let mut sessions = store.sessions.write().unwrap();
            for record in load_dir(dir)? {
                if record.idle_longer_than(store.config.idle_ttl, now) {
                    remove_file(&session_path(dir, &record.id))?;
                    continue;
                }
                sessions.insert(
                    record.id.clone(),
                    Arc::new(Mutex::new(Slot {
                        record,
                        retired: false,
                    })),
                );
            }
        }
        Ok(store)
    }

    pub fn config(&self) -> &SessionStoreConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ids of every record currently held, expired or not.
    pub fn ids(&self) -> Vec<SessionId> {
        self.sessions.read().unwrap().keys().cloned().collect()
    }

    /// Snapshot of a record without touching its last access time.
    pub fn peek(&self, id: &SessionId) -> Option<SessionRecord> {
        let slot = self.sessions.read().unwrap().get(id).cloned()?;
        let slot = lock(&slot);
        (!slot.retired).then(|| slot.record.clone())
    }

    /// Resumes the session named by `presented`, or starts a new one.
    ///
    /// Returns the record and whether it is new. A live presented id is
    /// resumed and its last access bumped. Otherwise a new session is
    /// created: in faithful mode an unknown presented id is adopted, in
    /// hardened mode it is discarded in favour of a freshly generated id.
    pub fn start(
        &self,
        presented: Option<&SessionId>,
    ) -> Result<(SessionRecord, bool), SessionError> {
        let now = (self.clock)();

        if let Some(id) = presented {
            if let Some(slot) = self.live_slot(id, now)? {
                let mut slot = lock(&slot);
                if !slot.retired {
                    slot.record.last_access = now;
                    self.touch(&slot.record)?;
                    return Ok((slot.record.clone(), false));
                }
            }
        }

        let mut sessions = self.sessions.write().unwrap();
        let id = match (self.config.mode, presented) {
            (SessionMode::Faithful, Some(id)) if !sessions.contains_key(id) => id.clone(),
            _ => loop {
                let candidate = generate_session_id()?;
                if !sessions.contains_key(&candidate) && Some(&candidate) != presented {
                    break candidate;
                }
            },
        };
        let record = SessionRecord::fresh(id.clone(), now);
        self.persist(&record)?;
        sessions.insert(
            id,
            Arc::new(Mutex::new(Slot {
                record: record.clone(),
                retired: false,
            })),
        );
        Ok((record, true))
    }

    /// Looks up `id`, evicting it if it has gone idle past the ttl.
    fn live_slot(&self, id: &SessionId, now: SystemTime) -> Result<Option<SlotRef>, SessionError> {
        let Some(slot) = self.sessions.read().unwrap().get(id).cloned() else {
            return Ok(None);
        };
        let expired = lock(&slot)
            .record
            .idle_longer_than(self.config.idle_ttl, now);
        if expired {
            self.evict(id)?;
            return Ok(None);
        }
        Ok(Some(slot))
    }

    fn evict(&self, id: &SessionId) -> Result<bool, SessionError> {
        let removed = self.sessions.write().unwrap().remove(id);
        match removed {
            Some(slot) => {
                let mut slot = lock(&slot);
                slot.retired = true;
                self.unpersist(&slot.record.id)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Runs `f` on the live record for `id` while holding its lock.
    fn with_live<T>(
        &self,
        id: &SessionId,
        f: impl FnOnce(&mut SessionRecord) -> Result<T, SessionError>,
    ) -> Result<T, SessionError> {
        let now = (self.clock)();
        let slot = self
            .live_slot(id, now)?
            .ok_or_else(|| SessionError::UnknownSession(id.clone()))?;
        let mut slot = lock(&slot);
        if slot.retired {
            return Err(SessionError::UnknownSession(id.clone()));
        }
        slot.record.last_access = now;
        f(&mut slot.record)
    }

    pub fn set_var(
        &self,
        id: &SessionId,
        key: &str,
        value: &str,
    ) -> Result<SessionRecord, SessionError> {
        validate_key(key)?;
        if key == USER_KEY && value.is_empty() {
            return Err(SessionError::EmptyUser);
        }
        self.with_live(id, |record| {
            let mut updated = record.clone();
            updated.vars.insert(key.to_owned(), value.to_owned());
            self.persist(&updated)?;
            *record = updated;
            Ok(record.clone())
        })
    }

    pub fn remove_var(&self, id: &SessionId, key: &str) -> Result<SessionRecord, SessionError> {
        self.with_live(id, |record| {
            let mut updated = record.clone();
            if updated.vars.remove(key).is_some() {
                self.persist(&updated)?;
            }
            *record = updated;
            Ok(record.clone())
        })
    }

    /// Moves a live session to a freshly generated id. The old id stops
    /// resolving; variables carry over unchanged.
    pub fn regenerate_id(&self, id: &SessionId) -> Result<SessionRecord, SessionError> {
        let now = (self.clock)();
        let slot = self
            .live_slot(id, now)?
            .ok_or_else(|| SessionError::UnknownSession(id.clone()))?;

        let mut sessions = self.sessions.write().unwrap();
        let mut old = lock(&slot);
        if old.retired {
            return Err(SessionError::UnknownSession(id.clone()));
        }
        let new_id = loop {
            let candidate = generate_session_id()?;
            if !sessions.contains_key(&candidate) {
                break candidate;
            }
        };
        let record = SessionRecord {
            id: new_id.clone(),
            vars: old.record.vars.clone(),
            created_at: old.record.created_at,
            last_access: now,
        };
        self.persist(&record)?;
        self.unpersist(id)?;
        old.retired = true;
        sessions.remove(id);
        sessions.insert(
            new_id,
            Arc::new(Mutex::new(Slot {
                record: record.clone(),
                retired: false,
            })),
        );
        Ok(record)
    }

    /// Drops a session outright. Returns whether it existed.
    pub fn destroy(&self, id: &SessionId) -> Result<bool, SessionError> {
        self.evict(id)
    }

    /// Removes every record idle for longer than the ttl at `now`.
    pub fn purge_expired(&self, now: SystemTime) -> Result<usize, SessionError> {
        let stale: Vec<SessionId> = {
            let sessions = self.sessions.read().unwrap();
            sessions
                .iter()
                .filter(|(_, slot)| {
                    lock(slot)
                        .record
                        .idle_longer_than(self.config.idle_ttl, now)
                })
                .map(|(id, _)| id.clone())
                .collect()
        };
        let mut purged = 0;
        for id in stale {
            if self.evict(&id)? {
                purged += 1;
            }
        }
        Ok(purged)
    }

    fn persist(&self, record: &SessionRecord) -> Result<(), SessionError> {
        match &self.config.persistence_dir {
            Some(dir) => write_session_file(dir, record),
            None => Ok(()),
        }
    }

    fn touch(&self, record: &SessionRecord) -> Result<(), SessionError> {
        let Some(dir) = &self.config.persistence_dir else {
            return Ok(());
        };
        let path = session_path(dir, &record.id);
        let io_err = |source| SessionError::Io {
            path: path.clone(),
            source,
        };
        let file = OpenOptions::new().write(true).open(&path).map_err(io_err)?;
        file.set_modified(record.last_access).map_err(io_err)
    }

    fn unpersist(&self, id: &SessionId) -> Result<(), SessionError> {
        match &self.config.persistence_dir {
            Some(dir) => remove_file(&session_path(dir, id)),
            None => Ok(()),
        }
    }
}

fn validate_key(key: &str) -> Result<(), SessionError> {
    if key.is_empty() {
        return Err(SessionError::EmptyKey);
    }
    if key.contains(['=', '\n', '\r']) {
        return Err(SessionError::InvalidKey(key.to_owned()));
    }
    Ok(())
}

pub fn session_path(dir: &Path, id: &SessionId) -> PathBuf {
    dir.join(format!("{id}.{SESSION_FILE_EXT}"))
}

/// Serialized form of a session's variables.
pub fn encode_session_vars(vars: &SessionVars) -> String {
    let mut out = String::new();
    for (key, value) in vars {
        out.push_str(key);
        out.push('=');
        out.extend(utf8_percent_encode(value, NON_ALPHANUMERIC));
        out.push('\n');
    }
    out
}

/// Parses [`encode_session_vars`] output. `Err` carries the 1-based bad line.
pub fn decode_session_vars(text: &str) -> Result<SessionVars, usize> {
    let mut vars = SessionVars::new();
    for (index, line) in text.lines().enumerate() {
        let (key, encoded) = line.split_once('=').ok_or(index + 1)?;
        if key.is_empty() {
            return Err(index + 1);
        }
        let value = percent_decode_str(encoded)
            .decode_utf8()
            .map_err(|_| index + 1)?;
        vars.insert(key.to_owned(), value.into_owned());
    }
    Ok(vars)
}

fn write_session_file(dir: &Path, record: &SessionRecord) -> Result<(), SessionError> {
    let path = session_path(dir, &record.id);
    let tmp = dir.join(format!("{}.{SESSION_FILE_EXT}.tmp", record.id));
    let io_err = |source| SessionError::Io {
        path: path.clone(),
        source,
    };
    let mut file = File::create(&tmp).map_err(io_err)?;
    file.write_all(encode_session_vars(&record.vars).as_bytes())
        .map_err(io_err)?;
    file.set_modified(record.last_access).map_err(io_err)?;
    drop(file);
    fs::rename(&tmp, &path).map_err(io_err)
}

fn remove_file(path: &Path) -> Result<(), SessionError> {
    match fs::remove_file(path) {
        Err(err) if err.kind() != io::ErrorKind::NotFound => Err(SessionError::Io {
            path: path.to_owned(),
            source: err,
        }),
        _ => Ok(()),
    }
}

fn load_dir(dir: &Path) -> Result<Vec<SessionRecord>, SessionError> {
    let io_err = |path: &Path| {
        let path = path.to_owned();
        move |source| SessionError::Io { path, source }
    };
    let mut records = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(SESSION_FILE_EXT) {
            continue;
        }
        let Some(id) = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| SessionId::parse(s).ok())
        else {
            continue;
        };
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let vars = decode_session_vars(&text).map_err(|line| SessionError::Corrupt {
            path: path.clone(),
            line,
        })?;
        let last_access = fs::metadata(&path)
            .and_then(|m| m.modified())
            .map_err(io_err(&path))?;
        records.push(SessionRecord {
            id,
            vars,
            created_at: last_access,
            last_access,
        });
    }
    Ok(records)
}
