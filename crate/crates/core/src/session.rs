//! Session identifiers and the session variable map.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

/// Session variable key that marks an authenticated session.
pub const USER_KEY: &str = "user";

/// Server-side session variables, ordered by key.
pub type SessionVars = BTreeMap<String, String>;

/// Number of random bytes behind a generated id.
pub const SESSION_ID_ENTROPY_BYTES: usize = 16;

/// Length of the textual id.
pub const SESSION_ID_LEN: usize = 2 * SESSION_ID_ENTROPY_BYTES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SessionIdError {
    #[error("session id must be {SESSION_ID_LEN} characters, got {0}")]
    Length(usize),
    #[error("session id contains a character outside [a-z0-9]")]
    Alphabet,
}

/// Opaque session token: exactly 32 characters from `[a-z0-9]`.
///
/// Generated ids are the lowercase hex encoding of 16 random bytes. Parsing
/// accepts the wider `[a-z0-9]` alphabet so that client-presented ids can be
/// carried around (and, in faithful mode, adopted).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SessionId(String);

impl SessionId {
    pub fn from_entropy(bytes: &[u8; SESSION_ID_ENTROPY_BYTES]) -> Self {
        let mut token = String::with_capacity(SESSION_ID_LEN);
        for byte in bytes {
            token.push(char::from(b"0123456789abcdef"[usize::from(byte >> 4)]));
            token.push(char::from(b"0123456789abcdef"[usize::from(byte & 0x0f)]));
        }
        SessionId(token)
    }

    pub fn parse(token: &str) -> Result<Self, SessionIdError> {
        if token.len() != SESSION_ID_LEN {
            return Err(SessionIdError::Length(token.len()));
        }
        if !token
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
        {
            return Err(SessionIdError::Alphabet);
        }
        Ok(SessionId(String::from(token)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for SessionId {
    type Err = SessionIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SessionId::parse(s)
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

// Ids are bearer tokens; keep them out of debug logs.
impl fmt::Debug for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionId({}…)", &self.0[..6])
    }
}
