//! Guardian and portal decisions.
//!
//! [`guard`] runs in front of every protected page; [`authenticate`] is the
//! portal's handler for both the first visit and the form post. Both are
//! pure apart from the session map handed to `authenticate`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::credentials::CredentialVerifier;
use crate::session::{SessionVars, USER_KEY};

/// Hidden-field value that marks a form post (as opposed to a first visit).
pub const SUBMIT_MARKER: &str = "set";

/// Error text shown when the credential query finds no matching account.
pub const UNREGISTERED_MESSAGE: &str = "User unregistered!";

/// One post of the login form, fields taken verbatim from the request.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct AuthSubmission {
    pub id_marker: Option<String>,
    pub name: String,
    pub parole: Vec<u8>,
}

impl AuthSubmission {
    /// A submission carrying the `id=set` marker.
    pub fn submitted(name: impl Into<String>, parole: impl Into<Vec<u8>>) -> Self {
        AuthSubmission {
            id_marker: Some(SUBMIT_MARKER.to_string()),
            name: name.into(),
            parole: parole.into(),
        }
    }

    pub fn is_submission(&self) -> bool {
        self.id_marker.as_deref() == Some(SUBMIT_MARKER)
    }
}

impl fmt::Debug for AuthSubmission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuthSubmission")
            .field("id_marker", &self.id_marker)
            .field("name", &self.name)
            .field("parole", &"<redacted>")
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardDecision {
    Allow,
    RedirectToPortal { location: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PortalOutcome {
    RenderForm {
        error_message: String,
        echoed_name: String,
    },
    RedirectToFirstPage {
        location: String,
        authenticated_user: String,
    },
}

impl PortalOutcome {
    fn blank_form() -> Self {
        PortalOutcome::RenderForm {
            error_message: String::new(),
            echoed_name: String::new(),
        }
    }
}

/// Admits the request iff the session holds the `user` variable.
///
/// # Panics
///
/// If `portal_path` is empty; a redirect needs a target.
pub fn guard(session_vars: &SessionVars, portal_path: &str) -> GuardDecision {
    assert!(!portal_path.is_empty(), "portal path must not be empty");
    if session_vars.contains_key(USER_KEY) {
        GuardDecision::Allow
    } else {
        GuardDecision::RedirectToPortal {
            location: portal_path.to_string(),
        }
    }
}

/// Runs the portal flow for one request.
///
/// * No `id=set` marker: first visit, blank form, session untouched.
/// * Marker present and the credentials verify: `user` is set to the
///   submitted name and the client is sent to `first_page`.
/// * Marker present and no match: the form comes back with
///   [`UNREGISTERED_MESSAGE`] and the submitted name echoed; session untouched.
///
/// Neither the password nor its digest is ever written to the session.
pub fn authenticate<V: CredentialVerifier + ?Sized>(
    submission: &AuthSubmission,
    creds: &V,
    session_vars: &mut SessionVars,
    first_page: &str,
) -> PortalOutcome {
    if !submission.is_submission() {
        return PortalOutcome::blank_form();
    }

    let matches = creds.verify(&submission.name, &submission.parole);
    if matches == 1 && !submission.name.is_empty() {
        session_vars.insert(USER_KEY.to_string(), submission.name.clone());
        return PortalOutcome::RedirectToFirstPage {
            location: first_page.to_string(),
            authenticated_user: submission.name.clone(),
        };
    }

    PortalOutcome::RenderForm {
        error_message: UNREGISTERED_MESSAGE.to_string(),
        echoed_name: submission.name.clone(),
    }
}
