//! User accounts keyed by name, each holding the MD5 digest of its password.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::md5::{md5, Md5Digest};

/// Longest accepted user name, in characters.
pub const MAX_NAME_CHARS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CredentialError {
    #[error("user name must not be empty")]
    EmptyName,
    #[error("user name is {0} characters, the limit is {MAX_NAME_CHARS}")]
    NameTooLong(usize),
    #[error("user name contains forbidden character {0:?}")]
    ForbiddenCharacter(char),
    #[error("user {0:?} already exists")]
    DuplicateName(String),
    #[error("user {0:?} does not exist")]
    UnknownName(String),
    #[error("password digest must be 32 lowercase hex characters")]
    InvalidDigest,
}

/// A validated account name: 1 to 20 characters, no `:` and no line breaks.
///
/// Over-long names are rejected, never truncated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserName(String);

impl UserName {
    pub fn new(name: &str) -> Result<Self, CredentialError> {
        if name.is_empty() {
            return Err(CredentialError::EmptyName);
        }
        let chars = name.chars().count();
        if chars > MAX_NAME_CHARS {
            return Err(CredentialError::NameTooLong(chars));
        }
        if let Some(bad) = name.chars().find(|c| matches!(c, ':' | '\n' | '\r')) {
            return Err(CredentialError::ForbiddenCharacter(bad));
        }
        Ok(UserName(name.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Stored password digest, rendered as 32 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParoleDigest(Md5Digest);

impl ParoleDigest {
    pub fn of_plaintext(plaintext: &[u8]) -> Self {
        ParoleDigest(md5(plaintext))
    }

    /// Parses exactly 32 lowercase hex characters.
    pub fn from_hex(hex: &str) -> Result<Self, CredentialError> {
        let bytes = hex.as_bytes();
        if bytes.len() != 32 {
            return Err(CredentialError::InvalidDigest);
        }
        let mut out = [0u8; 16];
        for (slot, pair) in out.iter_mut().zip(bytes.chunks_exact(2)) {
            *slot = (lower_hex_value(pair[0])? << 4) | lower_hex_value(pair[1])?;
        }
        Ok(ParoleDigest(Md5Digest(out)))
    }

    pub fn to_hex(&self) -> String {
        self.0.to_hex()
    }

    /// Compares digests without an early exit on the first differing byte.
    pub fn ct_eq(&self, other: &ParoleDigest) -> bool {
        let diff = self
            .0
             .0
            .iter()
            .zip(other.0 .0.iter())
            .fold(0u8, |acc, (a, b)| acc | (a ^ b));
        core::hint::black_box(diff) == 0
    }
}

fn lower_hex_value(c: u8) -> Result<u8, CredentialError> {
    match c {
        b'0'..=b'9' => Ok(c - b'0'),
        b'a'..=b'f' => Ok(c - b'a' + 10),
        _ => Err(CredentialError::InvalidDigest),
    }
}

impl fmt::Debug for ParoleDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ParoleDigest({})", self.to_hex())
    }
}

/// One account row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialRecord {
    pub name: UserName,
    pub parole_digest: ParoleDigest,
}

/// Anything that can answer the portal's credential query.
pub trait CredentialVerifier {
    /// Number of accounts matching `name` byte-exactly whose stored digest
    /// equals the digest of `parole`. Always 0 or 1.
    fn verify(&self, name: &str, parole: &[u8]) -> usize;
}

/// In-memory account table with unique names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CredentialTable {
    records: BTreeMap<UserName, ParoleDigest>,
}

impl CredentialTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Digests `plaintext` and stores it under `name`. The plaintext is not retained.
    pub fn add_user(&mut self, name: &str, plaintext: &[u8]) -> Result<(), CredentialError> {
        self.insert(CredentialRecord {
            name: UserName::new(name)?,
            parole_digest: ParoleDigest::of_plaintext(plaintext),
        })
    }

    /// Inserts a pre-digested record, refusing duplicates.
    pub fn insert(&mut self, record: CredentialRecord) -> Result<(), CredentialError> {
        if self.records.contains_key(&record.name) {
            return Err(CredentialError::DuplicateName(record.name.0));
        }
        self.records.insert(record.name, record.parole_digest);
        Ok(())
    }

    pub fn remove_user(&mut self, name: &str) -> Result<(), CredentialError> {
        let key =
            UserName::new(name).map_err(|_| CredentialError::UnknownName(name.to_string()))?;
        self.records
            .remove(&key)
            .map(|_| ())
            .ok_or_else(|| CredentialError::UnknownName(name.to_string()))
    }

    pub fn digest_of(&self, name: &str) -> Option<ParoleDigest> {
        let key = UserName::new(name).ok()?;
        self.records.get(&key).copied()
    }

    /// Account names in lexicographic (byte) order.
    pub fn list_users(&self) -> Vec<&str> {
        self.records.keys().map(UserName::as_str).collect()
    }

    pub fn records(&self) -> impl Iterator<Item = CredentialRecord> + '_ {
        self.records.iter().map(|(name, digest)| CredentialRecord {
            name: name.clone(),
            parole_digest: *digest,
        })
    }
}

impl CredentialVerifier for CredentialTable {
    fn verify(&self, name: &str, parole: &[u8]) -> usize {
        let submitted = ParoleDigest::of_plaintext(parole);
        match self.digest_of(name) {
            Some(stored) if stored.ct_eq(&submitted) => 1,
            _ => 0,
        }
    }
}

impl<T: CredentialVerifier + ?Sized> CredentialVerifier for &T {
    fn verify(&self, name: &str, parole: &[u8]) -> usize {
        (**self).verify(name, parole)
    }
}
