//! HTTP embedding of the portal and guardian.
//!
//! Routing:
//!
//! * the portal path serves the login form (GET) and processes it (POST);
//! * every other well-formed path is a protected page under
//!   `protected_root` and passes the guardian before anything is read;
//! * paths that cannot name a file inside the root get 404.
//!
//! A guardian redirect is a bare 302 to the portal with an empty body; no
//! handler code runs after the decision.

pub mod cookie;
pub mod form;
pub mod routes;
pub mod server;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::http::header::{ALLOW, CONTENT_TYPE, LOCATION, SET_COOKIE};
use axum::http::{HeaderValue, Method, Request, Response, StatusCode};
use portal_guard_core::{
    authenticate, guard, AuthSubmission, GuardDecision, PortalOutcome, SessionId, USER_KEY,
};

use crate::config::{ConfigError, GatewayConfig};
use crate::credential_store::{CredentialStore, CredentialStoreError};
use crate::session_store::{
    SessionError, SessionMode, SessionRecord, SessionStore, SessionStoreConfig,
};

pub use cookie::{issue_cookie, presented_session_id};
pub use form::{parse_login_form, render_login_form};
pub use routes::resolve_route;

pub type HttpRequest = Request<Vec<u8>>;
pub type HttpResponse = Response<Vec<u8>>;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Credentials(#[from] CredentialStoreError),
    #[error("protected root {path}: {source}")]
    Root {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub struct Gateway {
    config: GatewayConfig,
    root: PathBuf,
    sessions: Arc<SessionStore>,
    credentials: Arc<CredentialStore>,
}

impl Gateway {
    /// Validates `config` and wires the gateway to existing stores.
    ///
    /// Login-time id regeneration follows the session store's mode.
    pub fn new(
        config: GatewayConfig,
        sessions: Arc<SessionStore>,
        credentials: Arc<CredentialStore>,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        let root =
            fs::canonicalize(&config.protected_root).map_err(|source| GatewayError::Root {
                path: config.protected_root.clone(),
                source,
            })?;
        Ok(Gateway {
            config,
            root,
            sessions,
            credentials,
        })
    }

    /// Opens the credentials file named in `config` and an in-memory session
    /// store in the configured mode.
    pub fn from_config(config: GatewayConfig) -> Result<Self, GatewayError> {
        let credentials = CredentialStore::open(&config.credentials_path)?;
        let sessions = SessionStore::open(SessionStoreConfig {
            mode: config.mode,
            ..Default::default()
        })?;
        Self::new(config, Arc::new(sessions), Arc::new(credentials))
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn sessions(&self) -> &Arc<SessionStore> {
        &self.sessions
    }

    pub fn credentials(&self) -> &Arc<CredentialStore> {
        &self.credentials
    }

    pub fn handle_request(&self, request: &HttpRequest) -> HttpResponse {
        let path = request.uri().path();
        let result = if path == self.config.portal_path {
            self.portal(request)
        } else {
            match resolve_route(path) {
                Some(relative) => self.protected_page(request, &relative),
                None => Ok(status_only(StatusCode::NOT_FOUND)),
            }
        };
        result.unwrap_or_else(|err| {
            tracing::error!(%err, path, "request failed");
            status_only(StatusCode::INTERNAL_SERVER_ERROR)
        })
    }

    /// Runs the guardian for `request` and, only if it admits the session,
    /// hands the session snapshot to `page`. Hook for dynamic protected
    /// handlers.
    pub fn guarded(
        &self,
        request: &HttpRequest,
        page: impl FnOnce(&SessionRecord) -> HttpResponse,
    ) -> HttpResponse {
        self.run_guarded(request, |record| Ok(page(record)))
            .unwrap_or_else(|err| {
                tracing::error!(%err, "guarded handler failed");
                status_only(StatusCode::INTERNAL_SERVER_ERROR)
            })
    }

    fn run_guarded(
        &self,
        request: &HttpRequest,
        page: impl FnOnce(&SessionRecord) -> Result<HttpResponse, GatewayError>,
    ) -> Result<HttpResponse, GatewayError> {
        let (record, is_new) = self.start_session(request)?;
        let new_cookie = is_new.then_some(&record.id);
        let mut response = match guard(&record.vars, &self.config.portal_path) {
            GuardDecision::Allow => page(&record)?,
            GuardDecision::RedirectToPortal { location } => redirect(&location),
        };
        self.attach_cookie(&mut response, new_cookie);
        Ok(response)
    }

    fn protected_page(
        &self,
        request: &HttpRequest,
        relative: &Path,
    ) -> Result<HttpResponse, GatewayError> {
        self.run_guarded(request, |_| {
            let method = request.method();
            if method != Method::GET && method != Method::HEAD {
                return Ok(method_not_allowed("GET, HEAD"));
            }
            let Some(file) = self.locate(relative) else {
                return Ok(status_only(StatusCode::NOT_FOUND));
            };
            let bytes = match fs::read(&file) {
                Ok(bytes) => bytes,
                Err(err) if err.kind() == io::ErrorKind::NotFound => {
                    return Ok(status_only(StatusCode::NOT_FOUND))
                }
                Err(source) => return Err(GatewayError::Root { path: file, source }),
            };
            let body = if method == Method::HEAD {
                Vec::new()
            } else {
                bytes
            };
            let mut response = Response::new(body);
            response.headers_mut().insert(
                CONTENT_TYPE,
                HeaderValue::from_static(routes::content_type_for(&file)),
            );
            Ok(response)
        })
    }

    /// Regular file for `relative`, refusing anything that resolves outside
    /// the protected root (symlinks included).
    fn locate(&self, relative: &Path) -> Option<PathBuf> {
        let file = fs::canonicalize(self.root.join(relative)).ok()?;
        (file.starts_with(&self.root) && file.is_file()).then_some(file)
    }

    fn portal(&self, request: &HttpRequest) -> Result<HttpResponse, GatewayError> {
        let submission = match *request.method() {
            Method::GET | Method::HEAD => AuthSubmission::default(),
            Method::POST => {
                if !is_form_urlencoded(request) {
                    return Ok(status_only(StatusCode::UNSUPPORTED_MEDIA_TYPE));
                }
                parse_login_form(request.body())
            }
            _ => return Ok(method_not_allowed("GET, HEAD, POST")),
        };

        let (record, is_new) = self.start_session(request)?;
        let mut new_cookie = is_new.then(|| record.id.clone());

        // authenticate works on a scratch copy; the grant is applied to the
        // store below so that hardened mode can move the session first
        let mut scratch = record.vars.clone();
        let outcome = authenticate(
            &submission,
            self.credentials.as_ref(),
            &mut scratch,
            &self.config.first_page,
        );

        let mut response = match outcome {
            PortalOutcome::RenderForm {
                error_message,
                echoed_name,
            } => {
                let html =
                    render_login_form(&self.config.portal_path, &error_message, &echoed_name);
                let body = if request.method() == Method::HEAD {
                    Vec::new()
                } else {
                    html.into_bytes()
                };
                let mut response = Response::new(body);
                response.headers_mut().insert(
                    CONTENT_TYPE,
                    HeaderValue::from_static("text/html; charset=utf-8"),
                );
                response
            }
            PortalOutcome::RedirectToFirstPage {
                location,
                authenticated_user,
            } => {
                let id = match self.sessions.config().mode {
                    SessionMode::Hardened => {
                        let moved = self.sessions.regenerate_id(&record.id)?;
                        new_cookie = Some(moved.id.clone());
                        moved.id
                    }
                    SessionMode::Faithful => record.id,
                };
                self.sessions.set_var(&id, USER_KEY, &authenticated_user)?;
                tracing::info!(user = %authenticated_user, "login granted");
                redirect(&location)
            }
        };
        self.attach_cookie(&mut response, new_cookie.as_ref());
        Ok(response)
    }

    fn start_session(&self, request: &HttpRequest) -> Result<(SessionRecord, bool), GatewayError> {
        let presented = presented_session_id(request.headers(), &self.config.cookie_name);
        Ok(self.sessions.start(presented.as_ref())?)
    }

    fn attach_cookie(&self, response: &mut HttpResponse, id: Option<&SessionId>) {
        if let Some(id) = id {
            let value = issue_cookie(&self.config.cookie_name, id);
            response.headers_mut().insert(
                SET_COOKIE,
                HeaderValue::from_str(&value).expect("cookie is ascii"),
            );
        }
    }
}

fn is_form_urlencoded(request: &HttpRequest) -> bool {
    match request.headers().get(CONTENT_TYPE) {
        // PHP reads the body as a form even without a content type
        None => true,
        Some(value) => value
            .to_str()
            .ok()
            .and_then(|v| v.split(';').next())
            .is_some_and(|mime| {
                mime.trim()
                    .eq_ignore_ascii_case("application/x-www-form-urlencoded")
            }),
    }
}

fn status_only(status: StatusCode) -> HttpResponse {
    let mut response = Response::new(Vec::new());
    *response.status_mut() = status;
    response
}

fn method_not_allowed(allow: &'static str) -> HttpResponse {
    let mut response = status_only(StatusCode::METHOD_NOT_ALLOWED);
    response
        .headers_mut()
        .insert(ALLOW, HeaderValue::from_static(allow));
    response
}

fn redirect(location: &str) -> HttpResponse {
    let mut response = status_only(StatusCode::FOUND);
    response.headers_mut().insert(
        LOCATION,
        HeaderValue::from_str(location).unwrap_or_else(|_| HeaderValue::from_static("/")),
    );
    response
}
