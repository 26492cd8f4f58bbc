mod common;

use std::collections::BTreeSet;
use std::fs;

use axum::http::{Method, StatusCode};
use common::*;
use portal_guard::gateway::render_login_form;
use portal_guard::SessionMode;
use portal_guard_core::SessionId;

fn login(gateway: &portal_guard::Gateway, cookie: Option<&str>) -> String {
    let response = gateway.handle_request(&post_form(
        "/enter.php",
        cookie,
        "id=set&name=ion&parole=parola&nsubmit=LOGIN",
    ));
    assert_eq!(response.status(), StatusCode::FOUND);
    assert_eq!(location(&response), Some("/page1.php"));
    match set_cookie(&response) {
        Some(header) => cookie_pair(header),
        None => cookie.expect("cookie issued").to_owned(),
    }
}

#[test]
fn direct_access_is_redirected_to_portal() {
    let site = Site::new();
    let gateway = site.gateway(SessionMode::Hardened);
    let response = gateway.handle_request(&get("/page1.php", None));
    assert_eq!(response.status(), StatusCode::FOUND);
    assert_eq!(location(&response), Some("/enter.php"));
    assert!(response.body().is_empty());
    assert!(set_cookie(&response).is_some());
}

#[test]
fn portal_get_serves_form_and_cookie() {
    let site = Site::new();
    let gateway = site.gateway(SessionMode::Hardened);
    let response = gateway.handle_request(&get("/enter.php", None));
    assert_eq!(response.status(), StatusCode::OK);
    assert_eq!(
        body_text(&response),
        render_login_form("/enter.php", "", "")
    );
    let cookie = set_cookie(&response).unwrap();
    assert!(cookie.starts_with("SESSID="));
    assert!(cookie.ends_with("; Path=/; HttpOnly"));

    // the same client coming back gets no new cookie
    let again = gateway.handle_request(&get("/enter.php", Some(&cookie_pair(cookie))));
    assert_eq!(again.status(), StatusCode::OK);
    assert_eq!(set_cookie(&again), None);
}

#[test]
fn login_then_browse_forward_and_back() {
    let site = Site::new();
    for mode in [SessionMode::Hardened, SessionMode::Faithful] {
        let gateway = site.gateway(mode);
        let cookie = login(&gateway, None);
        for (path, content) in [
            ("/page1.php", PAGE1),
            ("/page2.php", PAGE2),
            ("/page1.php", PAGE1),
        ] {
            let response = gateway.handle_request(&get(path, Some(&cookie)));
            assert_eq!(response.status(), StatusCode::OK, "{mode} {path}");
            assert_eq!(body_text(&response), content);
            assert_eq!(set_cookie(&response), None);
        }
    }
}

#[test]
fn failed_login_rerenders_form_without_granting() {
    let site = Site::new();
    let gateway = site.gateway(SessionMode::Hardened);
    let first = gateway.handle_request(&get("/enter.php", None));
    let cookie = cookie_pair(set_cookie(&first).unwrap());
    let response = gateway.handle_request(&post_form(
        "/enter.php",
        Some(&cookie),
        "id=set&name=ion&parole=bad&nsubmit=LOGIN",
    ));
    assert_eq!(response.status(), StatusCode::OK);
    let body = body_text(&response);
    assert_eq!(body.matches("User unregistered!").count(), 1);
    assert!(body.contains(r#"value="ion""#));
    assert!(!body.contains("bad"));
    let page = gateway.handle_request(&get("/page1.php", Some(&cookie)));
    assert_eq!(page.status(), StatusCode::FOUND);
}

#[test]
fn post_without_marker_is_a_first_visit() {
    let site = Site::new();
    let gateway = site.gateway(SessionMode::Hardened);
    let response = gateway.handle_request(&post_form("/enter.php", None, "name=ion&parole=parola"));
    assert_eq!(response.status(), StatusCode::OK);
    assert_eq!(
        body_text(&response),
        render_login_form("/enter.php", "", "")
    );
}

#[test]
fn hardened_login_moves_session_to_new_id() {
    let site = Site::new();
    let gateway = site.gateway(SessionMode::Hardened);
    let first = gateway.handle_request(&get("/enter.php", None));
    let before = cookie_pair(set_cookie(&first).unwrap());
    let after = login(&gateway, Some(&before));
    assert_ne!(before, after);
    // the pre-login id no longer opens anything
    let stale = gateway.handle_request(&get("/page1.php", Some(&before)));
    assert_eq!(stale.status(), StatusCode::FOUND);
    let fresh = gateway.handle_request(&get("/page1.php", Some(&after)));
    assert_eq!(fresh.status(), StatusCode::OK);
}

#[test]
fn faithful_login_keeps_id_and_adopts_presented_ids() {
    let site = Site::new();
    let gateway = site.gateway(SessionMode::Faithful);
    let chosen = format!("SESSID={}", "f".repeat(32));
    let first = gateway.handle_request(&get("/enter.php", Some(&chosen)));
    assert_eq!(set_cookie(&first).map(cookie_pair), Some(chosen.clone()));
    let after = login(&gateway, Some(&chosen));
    assert_eq!(after, chosen);
}

#[test]
fn hardened_ignores_attacker_chosen_id() {
    let site = Site::new();
    let gateway = site.gateway(SessionMode::Hardened);
    let chosen = format!("SESSID={}", "f".repeat(32));
    let first = gateway.handle_request(&get("/enter.php", Some(&chosen)));
    let issued = cookie_pair(set_cookie(&first).unwrap());
    assert_ne!(issued, chosen);
    assert!(gateway
        .sessions()
        .peek(&SessionId::parse(&"f".repeat(32)).unwrap())
        .is_none());
}

#[test]
fn relogin_is_idempotent() {
    let site = Site::new();
    let gateway = site.gateway(SessionMode::Faithful);
    let cookie = login(&gateway, None);
    let again = login(&gateway, Some(&cookie));
    let id = SessionId::parse(again.trim_start_matches("SESSID=")).unwrap();
    assert_eq!(
        gateway.sessions().peek(&id).unwrap().get_var("user"),
        Some("ion")
    );
}

#[test]
fn method_and_media_type_errors() {
    let site = Site::new();
    let gateway = site.gateway(SessionMode::Hardened);
    let put = gateway.handle_request(&request(Method::PUT, "/enter.php", None, Vec::new()));
    assert_eq!(put.status(), StatusCode::METHOD_NOT_ALLOWED);
    assert_eq!(put.headers()["allow"], "GET, HEAD, POST");

    let mut multipart = request(Method::POST, "/enter.php", None, b"--x--".to_vec());
    multipart.headers_mut().insert(
        "content-type",
        "multipart/form-data; boundary=x".parse().unwrap(),
    );
    assert_eq!(
        gateway.handle_request(&multipart).status(),
        StatusCode::UNSUPPORTED_MEDIA_TYPE
    );

    let mut charset = request(
        Method::POST,
        "/enter.php",
        None,
        b"id=set&name=ion&parole=parola".to_vec(),
    );
    charset.headers_mut().insert(
        "content-type",
        "application/x-www-form-urlencoded; charset=UTF-8"
            .parse()
            .unwrap(),
    );
    assert_eq!(gateway.handle_request(&charset).status(), StatusCode::FOUND);

    // a protected POST is still guarded first
    let anon_post = gateway.handle_request(&request(Method::POST, "/page1.php", None, Vec::new()));
    assert_eq!(anon_post.status(), StatusCode::FOUND);
    let cookie = login(&gateway, None);
    let authed_post = gateway.handle_request(&request(
        Method::POST,
        "/page1.php",
        Some(&cookie),
        Vec::new(),
    ));
    assert_eq!(authed_post.status(), StatusCode::METHOD_NOT_ALLOWED);
}

#[test]
fn not_found_cases() {
    let site = Site::new();
    let outside = site.dir.path().join("secret.txt");
    fs::write(&outside, "outside the root").unwrap();
    fs::create_dir(site.root.join("sub")).unwrap();
    #[cfg(unix)]
    std::os::unix::fs::symlink(&outside, site.root.join("link.txt")).unwrap();

    let gateway = site.gateway(SessionMode::Hardened);
    let cookie = login(&gateway, None);
    for path in [
        "/missing.php",
        "/sub",
        "/link.txt",
        "/../secret.txt",
        "/%2e%2e/secret.txt",
        "/",
    ] {
        let response = gateway.handle_request(&get(path, Some(&cookie)));
        assert_eq!(response.status(), StatusCode::NOT_FOUND, "{path}");
        assert!(response.body().is_empty());
    }
    // unauthenticated clients cannot probe for existence
    let probe = gateway.handle_request(&get("/missing.php", None));
    assert_eq!(probe.status(), StatusCode::FOUND);
}

#[test]
fn head_requests_carry_no_body() {
    let site = Site::new();
    let gateway = site.gateway(SessionMode::Hardened);
    let cookie = login(&gateway, None);
    let response = gateway.handle_request(&request(
        Method::HEAD,
        "/page1.php",
        Some(&cookie),
        Vec::new(),
    ));
    assert_eq!(response.status(), StatusCode::OK);
    assert!(response.body().is_empty());
    assert_eq!(
        response.headers()["content-type"],
        "text/html; charset=utf-8"
    );
}

#[test]
fn form_field_names_are_fixed() {
    let html = render_login_form("/enter.php", "User unregistered!", "ion");
    let names: BTreeSet<&str> = html
        .split("<input")
        .skip(1)
        .filter_map(|tag| tag.split("name=\"").nth(1))
        .filter_map(|rest| rest.split('"').next())
        .collect();
    assert_eq!(names, BTreeSet::from(["id", "name", "parole", "nsubmit"]));
}

#[test]
fn every_redirect_has_one_known_location_and_no_lifetime_cookie() {
    let site = Site::new();
    let gateway = site.gateway(SessionMode::Hardened);
    let requests = vec![
        get("/page1.php", None),
        get("/page2.php", None),
        post_form("/enter.php", None, "id=set&name=ion&parole=parola"),
        post_form("/enter.php", None, "id=set&name=ion&parole=nope"),
        get("/enter.php", None),
    ];
    for req in &requests {
        let response = gateway.handle_request(req);
        if response.status() == StatusCode::FOUND {
            let locations: Vec<_> = response.headers().get_all("location").iter().collect();
            assert_eq!(locations.len(), 1);
            assert!(["/enter.php", "/page1.php"].contains(&locations[0].to_str().unwrap()));
            assert!(response.body().is_empty());
        }
        for value in response.headers().get_all("set-cookie") {
            let value = value.to_str().unwrap().to_ascii_lowercase();
            assert!(!value.contains("expires") && !value.contains("max-age"));
        }
    }
}

#[test]
fn guarded_hook_runs_only_for_authenticated_sessions() {
    let site = Site::new();
    let gateway = site.gateway(SessionMode::Hardened);
    let hit = std::cell::Cell::new(false);
    let page = |record: &portal_guard::SessionRecord| {
        hit.set(true);
        axum::http::Response::new(format!("hello {}", record.get_var("user").unwrap()).into_bytes())
    };
    let denied = gateway.guarded(&get("/report", None), page);
    assert_eq!(denied.status(), StatusCode::FOUND);
    assert!(!hit.get());

    let cookie = login(&gateway, None);
    let allowed = gateway.guarded(&get("/report", Some(&cookie)), page);
    assert_eq!(body_text(&allowed), "hello ion");
    assert!(hit.get());
}

#[test]
fn invalid_config_is_rejected_at_startup() {
    let site = Site::new();
    let mut config = site.config(SessionMode::Hardened);
    config.first_page = "/page9.php".into();
    assert!(portal_guard::Gateway::from_config(config).is_err());
}
