//! Runtime side of the portal guard: session store, credentials file,
//! gateway configuration, the HTTP gateway and the `gatectl` admin tool.

pub mod config;
pub mod credential_store;
pub mod gatectl;
pub mod gateway;
pub mod session_store;

pub use config::{ConfigOverrides, GatewayConfig};
pub use credential_store::{Backing, CredentialStore, CredentialStoreError};
pub use gateway::{Gateway, GatewayError};
pub use session_store::{
    SessionError, SessionMode, SessionRecord, SessionStore, SessionStoreConfig,
};
