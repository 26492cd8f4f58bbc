//! Account storage backed by memory or a credentials file.
//!
//! The file starts with the header line `#alg=md5` followed by one
//! `name:digest` line per account. Every mutation rewrites the whole file
//! through a temporary sibling and a rename, so readers never observe a
//! half-written table.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use portal_guard_core::{
    CredentialError, CredentialRecord, CredentialTable, CredentialVerifier, ParoleDigest, UserName,
};

pub const HEADER_LINE: &str = "#alg=md5";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backing {
    Memory,
    File(PathBuf),
}

#[derive(Debug, thiserror::Error)]
pub enum CredentialStoreError {
    #[error(transparent)]
    Credential(#[from] CredentialError),
    #[error("credentials file {0} already exists")]
    AlreadyExists(PathBuf),
    #[error("credentials file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("credentials file {path} line {line}: {reason}")]
    Format {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl CredentialStoreError {
    /// True for failures caused by the request rather than the environment.
    pub fn is_domain_error(&self) -> bool {
        matches!(
            self,
            CredentialStoreError::Credential(_) | CredentialStoreError::AlreadyExists(_)
        )
    }
}

#[derive(Debug)]
pub struct CredentialStore {
    backing: Backing,
    table: RwLock<CredentialTable>,
    // serializes read-modify-write cycles so two mutations cannot both
    // persist from the same starting table
    writer: Mutex<()>,
}

impl CredentialStore {
    /// Creates an empty store. A file backing must not exist yet.
    pub fn init(backing: Backing) -> Result<Self, CredentialStoreError> {
        if let Backing::File(path) = &backing {
            let io_err = |source| CredentialStoreError::Io {
                path: path.clone(),
                source,
            };
            let mut file = match OpenOptions::new().write(true).create_new(true).open(path) {
                Ok(file) => file,
                Err(err) if err.kind() == io::ErrorKind::AlreadyExists => {
                    return Err(CredentialStoreError::AlreadyExists(path.clone()))
                }
                Err(err) => return Err(io_err(err)),
            };
            file.write_all(encode_table(&CredentialTable::new()).as_bytes())
                .and_then(|()| file.sync_all())
                .map_err(io_err)?;
        }
        Ok(Self::from_table(backing, CredentialTable::new()))
    }

    /// Loads an existing credentials file.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, CredentialStoreError> {
        let path = path.into();
        let text = fs::read_to_string(&path).map_err(|source| CredentialStoreError::Io {
            path: path.clone(),
            source,
        })?;
        let table = decode_table(&text).map_err(|(line, reason)| CredentialStoreError::Format {
            path: path.clone(),
            line,
            reason,
        })?;
        Ok(Self::from_table(Backing::File(path), table))
    }

    pub fn in_memory(table: CredentialTable) -> Self {
        Self::from_table(Backing::Memory, table)
    }

    fn from_table(backing: Backing, table: CredentialTable) -> Self {
        CredentialStore {
            backing,
            table: RwLock::new(table),
            writer: Mutex::new(()),
        }
    }

    pub fn backing(&self) -> &Backing {
        &self.backing
    }

    pub fn add_user(&self, name: &str, plaintext: &[u8]) -> Result<(), CredentialStoreError> {
        self.mutate(|table| table.add_user(name, plaintext))
    }

    pub fn remove_user(&self, name: &str) -> Result<(), CredentialStoreError> {
        self.mutate(|table| table.remove_user(name))
    }

    pub fn list_users(&self) -> Vec<String> {
        self.table
            .read()
            .unwrap()
            .list_users()
            .into_iter()
            .map(str::to_owned)
            .collect()
    }

    pub fn records(&self) -> Vec<CredentialRecord> {
        self.table.read().unwrap().records().collect()
    }

    fn mutate(
        &self,
        change: impl FnOnce(&mut CredentialTable) -> Result<(), CredentialError>,
    ) -> Result<(), CredentialStoreError> {
        let _writer = self.writer.lock().unwrap();
        let mut next = self.table.read().unwrap().clone();
        change(&mut next)?;
        if let Backing::File(path) = &self.backing {
            write_atomically(path, encode_table(&next).as_bytes())?;
        }
        *self.table.write().unwrap() = next;
        Ok(())
    }
}

impl CredentialVerifier for CredentialStore {
    fn verify(&self, name: &str, parole: &[u8]) -> usize {
        self.table.read().unwrap().verify(name, parole)
    }
}

pub fn encode_table(table: &CredentialTable) -> String {
    let mut out = String::from(HEADER_LINE);
    out.push('\n');
    for record in table.records() {
        out.push_str(record.name.as_str());
        out.push(':');
        out.push_str(&record.parole_digest.to_hex());
        out.push('\n');
    }
    out
}

/// Parses a credentials file. `Err` holds the 1-based line and a reason.
pub fn decode_table(text: &str) -> Result<CredentialTable, (usize, String)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, HEADER_LINE)) => {}
        Some((_, header)) if header.starts_with("#alg=") => {
            return Err((
                1,
                format!("unsupported digest algorithm {:?}", &header[5..]),
            ))
        }
        _ => return Err((1, format!("missing {HEADER_LINE:?} header"))),
    }
    let mut table = CredentialTable::new();
    for (index, line) in lines {
        let line_no = index + 1;
        if line.is_empty() {
            continue;
        }
        // names cannot contain ':', so the last one separates the digest
        let (name, digest) = line
            .rsplit_once(':')
            .ok_or_else(|| (line_no, "expected name:digest".to_owned()))?;
        let record = CredentialRecord {
            name: UserName::new(name).map_err(|e| (line_no, e.to_string()))?,
            parole_digest: ParoleDigest::from_hex(digest).map_err(|e| (line_no, e.to_string()))?,
        };
        table.insert(record).map_err(|e| (line_no, e.to_string()))?;
    }
    Ok(table)
}

fn write_atomically(path: &Path, contents: &[u8]) -> Result<(), CredentialStoreError> {
    let io_err = |source| CredentialStoreError::Io {
        path: path.to_owned(),
        source,
    };
    let mut tmp_name = path.file_name().unwrap_or_default().to_owned();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut file = File::create(&tmp).map_err(io_err)?;
    file.write_all(contents)
        .and_then(|()| file.sync_all())
        .map_err(io_err)?;
    drop(file);
    fs::rename(&tmp, path).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_init_is_empty() {
        let store = CredentialStore::init(Backing::Memory).unwrap();
        assert!(store.list_users().is_empty());
    }

    #[test]
    fn file_init_writes_header_and_refuses_second_init() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("users.db");
        CredentialStore::init(Backing::File(path.clone())).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "#alg=md5\n");
        assert!(matches!(
            CredentialStore::init(Backing::File(path.clone())),
            Err(CredentialStoreError::AlreadyExists(_))
        ));
        assert!(CredentialStore::open(&path)
            .unwrap()
            .list_users()
            .is_empty());
    }

    #[test]
    fn add_persists_digest_not_plaintext() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("users.db");
        let store = CredentialStore::init(Backing::File(path.clone())).unwrap();
        store.add_user("ion", b"parola").unwrap();
        let raw = fs::read_to_string(&path).unwrap();
        assert_eq!(raw, "#alg=md5\nion:8287458823facb8ff918dbfabcd22ccb\n");
        assert!(!raw.contains("parola"));

        assert!(matches!(
            store.add_user("ion", b"other"),
            Err(CredentialStoreError::Credential(
                CredentialError::DuplicateName(_)
            ))
        ));
        assert_eq!(fs::read_to_string(&path).unwrap(), raw);

        let reopened = CredentialStore::open(&path).unwrap();
        assert_eq!(reopened.verify("ion", b"parola"), 1);
    }

    #[test]
    fn remove_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("users.db");
        let store = CredentialStore::init(Backing::File(path.clone())).unwrap();
        store.add_user("b", b"1").unwrap();
        store.add_user("a", b"2").unwrap();
        assert_eq!(store.list_users(), ["a", "b"]);
        store.remove_user("b").unwrap();
        assert!(store.remove_user("ghost").is_err());
        assert_eq!(CredentialStore::open(&path).unwrap().list_users(), ["a"]);
    }

    #[test]
    fn init_in_missing_dir_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err =
            CredentialStore::init(Backing::File(dir.path().join("no/such/users.db"))).unwrap_err();
        assert!(matches!(err, CredentialStoreError::Io { .. }));
        assert!(!err.is_domain_error());
    }

    #[test]
    fn decode_rejects_malformed_files() {
        let bad = [
            ("", 1),
            ("ion:8287458823facb8ff918dbfabcd22ccb\n", 1),
            ("#alg=sha1\n", 1),
            ("#alg=md5\nion\n", 2),
            ("#alg=md5\nion:xyz\n", 2),
            ("#alg=md5\n:8287458823facb8ff918dbfabcd22ccb\n", 2),
            (
                "#alg=md5\nion:8287458823facb8ff918dbfabcd22ccb\nion:8287458823facb8ff918dbfabcd22ccb\n",
                3,
            ),
        ];
        for (text, line) in bad {
            assert_eq!(decode_table(text).map_err(|e| e.0), Err(line), "{text:?}");
        }
    }
}
