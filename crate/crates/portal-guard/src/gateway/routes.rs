use std::path::PathBuf;

use percent_encoding::percent_decode_str;

/// Maps a request path onto a file path relative to the protected root.
///
/// Returns `None` for paths that cannot name a file inside the root:
/// missing leading slash, empty, `.` or `..` segments, backslashes, NUL
/// bytes, or invalid UTF-8 after percent-decoding.
pub fn resolve_route(path: &str) -> Option<PathBuf> {
    let rest = path.strip_prefix('/')?;
    let decoded = percent_decode_str(rest).decode_utf8().ok()?;
    if decoded.is_empty() || decoded.contains(['\\', '\0']) {
        return None;
    }
    let mut out = PathBuf::new();
    for segment in decoded.split('/') {
        if segment.is_empty() || segment == "." || segment == ".." {
            return None;
        }
        out.push(segment);
    }
    Some(out)
}

pub fn content_type_for(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("php" | "html" | "htm") => "text/html; charset=utf-8",
        Some("txt") => "text/plain; charset=utf-8",
        Some("css") => "text/css",
        Some("js") => "text/javascript",
        Some("json") => "application/json",
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_plain_paths() {
        assert_eq!(
            resolve_route("/page1.php"),
            Some(PathBuf::from("page1.php"))
        );
        assert_eq!(
            resolve_route("/docs/a%20b.html"),
            Some(PathBuf::from("docs").join("a b.html"))
        );
    }

    #[test]
    fn rejects_escapes() {
        for path in [
            "",
            "/",
            "page1.php",
            "/../etc/passwd",
            "/a/../b",
            "/./a",
            "/a//b",
            "/a/",
            "/%2e%2e/x",
            "/a%5cb",
            "/a%00b",
            "/%ff",
        ] {
            assert_eq!(resolve_route(path), None, "{path:?}");
        }
    }
}
