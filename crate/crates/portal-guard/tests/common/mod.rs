#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::http::header::{COOKIE, LOCATION, SET_COOKIE};
use axum::http::{Method, Request};
use portal_guard::gateway::{HttpRequest, HttpResponse};
use portal_guard::{
    Backing, CredentialStore, Gateway, GatewayConfig, SessionMode, SessionStore, SessionStoreConfig,
};
use tempfile::TempDir;

pub const PAGE1: &str = "<html><body>page one: quarterly figures 7731</body></html>\n";
pub const PAGE2: &str = "<html><body>page two: staff directory 4410</body></html>\n";

/// A throwaway site: `site/page1.php`, `site/page2.php`, a credentials file
/// holding ion/parola.
pub struct Site {
    pub dir: TempDir,
    pub root: PathBuf,
    pub credentials: PathBuf,
}

impl Site {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("site");
        fs::create_dir(&root).unwrap();
        fs::write(root.join("page1.php"), PAGE1).unwrap();
        fs::write(root.join("page2.php"), PAGE2).unwrap();
        let credentials = dir.path().join("users.db");
        let store = CredentialStore::init(Backing::File(credentials.clone())).unwrap();
        store.add_user("ion", b"parola").unwrap();
        Site {
            dir,
            root,
            credentials,
        }
    }

    pub fn config(&self, mode: SessionMode) -> GatewayConfig {
        let mut config = GatewayConfig::new(&self.root, &self.credentials);
        config.mode = mode;
        config
    }

    pub fn gateway(&self, mode: SessionMode) -> Gateway {
        Gateway::from_config(self.config(mode)).unwrap()
    }

    pub fn gateway_with_session_dir(&self, mode: SessionMode, dir: &Path) -> Gateway {
        let sessions = SessionStore::open(SessionStoreConfig {
            mode,
            persistence_dir: Some(dir.to_owned()),
            ..Default::default()
        })
        .unwrap();
        Gateway::new(
            self.config(mode),
            Arc::new(sessions),
            Arc::new(CredentialStore::open(&self.credentials).unwrap()),
        )
        .unwrap()
    }
}

pub fn get(path: &str, cookie: Option<&str>) -> HttpRequest {
    request(Method::GET, path, cookie, Vec::new())
}

pub fn post_form(path: &str, cookie: Option<&str>, body: &str) -> HttpRequest {
    let mut req = request(Method::POST, path, cookie, body.as_bytes().to_vec());
    req.headers_mut().insert(
        "content-type",
        "application/x-www-form-urlencoded".parse().unwrap(),
    );
    req
}

pub fn request(method: Method, path: &str, cookie: Option<&str>, body: Vec<u8>) -> HttpRequest {
    let mut builder = Request::builder().method(method).uri(path);
    if let Some(cookie) = cookie {
        builder = builder.header(COOKIE, cookie);
    }
    builder.body(body).unwrap()
}

pub fn location(response: &HttpResponse) -> Option<&str> {
    response
        .headers()
        .get(LOCATION)
        .map(|v| v.to_str().unwrap())
}

pub fn set_cookie(response: &HttpResponse) -> Option<&str> {
    response
        .headers()
        .get(SET_COOKIE)
        .map(|v| v.to_str().unwrap())
}

/// `name=value` part of a Set-Cookie header, ready for a Cookie header.
pub fn cookie_pair(set_cookie: &str) -> String {
    set_cookie.split(';').next().unwrap().to_owned()
}

pub fn body_text(response: &HttpResponse) -> &str {
    std::str::from_utf8(response.body()).unwrap()
}

/// Whether `haystack` contains any `window`-byte run of `needle`.
pub fn shares_run(haystack: &[u8], needle: &[u8], window: usize) -> bool {
    if needle.len() < window || haystack.len() < window {
        return false;
    }
    needle
        .windows(window)
        .any(|run| haystack.windows(window).any(|w| w == run))
}
