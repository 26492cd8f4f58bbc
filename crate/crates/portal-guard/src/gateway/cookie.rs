use axum::http::header::COOKIE;
use axum::http::HeaderMap;
use portal_guard_core::SessionId;

/// `Set-Cookie` value for a session id. No `Expires` or `Max-Age`, so the
/// browser drops it when it closes.
pub fn issue_cookie(cookie_name: &str, id: &SessionId) -> String {
    format!("{cookie_name}={id}; Path=/; HttpOnly")
}

/// First well-formed session id presented under `cookie_name`.
pub fn presented_session_id(headers: &HeaderMap, cookie_name: &str) -> Option<SessionId> {
    headers
        .get_all(COOKIE)
        .iter()
        .filter_map(|value| value.to_str().ok())
        .flat_map(|value| value.split(';'))
        .filter_map(|pair| pair.trim().split_once('='))
        .filter(|(name, _)| *name == cookie_name)
        .find_map(|(_, value)| SessionId::parse(value.trim_matches('"')).ok())
}
