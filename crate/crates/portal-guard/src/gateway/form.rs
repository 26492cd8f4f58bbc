//! The login form: rendering and parsing of its urlencoded post.

use percent_encoding::percent_decode;
use portal_guard_core::AuthSubmission;

/// HTML-escapes text for use in element content or a quoted attribute.
pub fn html_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Renders the portal page. The form posts back to `action` with the hidden
/// `id=set` marker, the `name` field pre-filled with `echoed_name`, an empty
/// `parole` password field and the `nsubmit` button. A non-empty
/// `error_message` is shown above the form.
pub fn render_login_form(action: &str, error_message: &str, echoed_name: &str) -> String {
    let error = if error_message.is_empty() {
        String::new()
    } else {
        format!("<p class=\"error\">{}</p>\n", html_escape(error_message))
    };
    format!(
        r#"<!DOCTYPE html>
<html>
<head><meta charset="utf-8"><title>Login</title></head>
<body>
{error}<form name="intrare" method="post" action="{action}">
    <input name="id" type="hidden" value="set">
    Name: <input name="name" type="text" size="20" value="{name}"><br>
    Password:<input name="parole" type="password" size="20" maxlength="20" value="">
    <input type="submit" name="nsubmit" value="LOGIN">
</form>
</body>
</html>
"#,
        action = html_escape(action),
        name = html_escape(echoed_name),
    )
}

fn decode_component(raw: &[u8]) -> Vec<u8> {
    let spaced: Vec<u8> = raw
        .iter()
        .map(|&b| if b == b'+' { b' ' } else { b })
        .collect();
    percent_decode(&spaced).collect()
}

/// Parses an `application/x-www-form-urlencoded` login post. Later
/// duplicates of a field win. The password is kept as raw bytes.
pub fn parse_login_form(body: &[u8]) -> AuthSubmission {
    let mut submission = AuthSubmission::default();
    for pair in body.split(|&b| b == b'&').filter(|p| !p.is_empty()) {
        let (key, value) = match pair.iter().position(|&b| b == b'=') {
            Some(at) => (&pair[..at], &pair[at + 1..]),
            None => (pair, &[][..]),
        };
        let value = decode_component(value);
        match decode_component(key).as_slice() {
            b"id" => submission.id_marker = Some(String::from_utf8_lossy(&value).into_owned()),
            b"name" => submission.name = String::from_utf8_lossy(&value).into_owned(),
            b"parole" => submission.parole = value,
            _ => {}
        }
    }
    submission
}
