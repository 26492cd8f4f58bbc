//! Session-gated access control for web portals.
//!
//! The crate holds the pure parts of the scheme: a portal page authenticates
//! a user against a table of MD5 password digests and records the user name
//! in the server-side session; a guardian check in front of every protected
//! page admits a request only when that session variable is present and
//! otherwise sends the client back to the portal.
//!
//! Everything here is `no_std` and allocation-only. Session storage, file
//! formats and HTTP live in the `portal-guard` crate.

#![no_std]

extern crate alloc;

pub mod access;
pub mod credentials;
pub mod md5;
pub mod session;

pub use access::{authenticate, guard, AuthSubmission, GuardDecision, PortalOutcome};
pub use credentials::{
    CredentialError, CredentialRecord, CredentialTable, CredentialVerifier, ParoleDigest, UserName,
};
pub use md5::{md5, md5_hex, Md5, Md5Digest};
pub use session::{SessionId, SessionIdError, SessionVars, USER_KEY};
