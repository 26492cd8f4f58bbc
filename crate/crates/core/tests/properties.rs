use md5::{Digest, Md5 as OracleMd5};
use portal_guard_core::access::UNREGISTERED_MESSAGE;
use portal_guard_core::{
    authenticate, guard, md5_hex, AuthSubmission, CredentialTable, CredentialVerifier,
    GuardDecision, Md5, PortalOutcome, SessionVars, USER_KEY,
};
use proptest::collection::{btree_map, vec};
use proptest::prelude::*;

fn oracle_hex(input: &[u8]) -> String {
    OracleMd5::digest(input)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn name_strategy() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9_.ă ]{1,20}"
}

proptest! {
    #[test]
    fn md5_agrees_with_reference_crate(input in vec(any::<u8>(), 0..600)) {
        let hex = md5_hex(&input);
        prop_assert_eq!(hex.len(), 32);
        prop_assert!(hex.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)));
        prop_assert_eq!(hex, oracle_hex(&input));
    }

    #[test]
    fn md5_chunking_is_irrelevant(input in vec(any::<u8>(), 0..300), cuts in vec(0usize..300, 0..6)) {
        let mut cuts: Vec<usize> = cuts.into_iter().map(|c| c.min(input.len())).collect();
        cuts.sort_unstable();
        let mut hasher = Md5::new();
        let mut start = 0;
        for cut in cuts {
            hasher.update(&input[start..cut]);
            start = cut;
        }
        hasher.update(&input[start..]);
        prop_assert_eq!(hasher.finalize().to_hex(), oracle_hex(&input));
    }

    #[test]
    fn verify_matches_rehash_oracle(
        accounts in btree_map(name_strategy(), vec(any::<u8>(), 0..40), 1..20),
        probe_name in name_strategy(),
        probe_pass in vec(any::<u8>(), 0..40),
    ) {
        let mut table = CredentialTable::new();
        for (name, pass) in &accounts {
            table.add_user(name, pass).unwrap();
        }
        // every stored account, plus an arbitrary probe
        let mut probes: Vec<(String, Vec<u8>)> =
            accounts.iter().map(|(n, p)| (n.clone(), p.clone())).collect();
        probes.push((probe_name, probe_pass));
        for (name, pass) in probes {
            let expected = accounts
                .get(&name)
                .map(|stored| oracle_hex(stored) == oracle_hex(&pass))
                .unwrap_or(false);
            prop_assert_eq!(table.verify(&name, &pass), usize::from(expected));
        }
    }

    #[test]
    fn guard_is_total(session in btree_map("[a-z]{0,6}", "[a-z]{0,6}", 0..6)) {
        let decision = guard(&session, "/enter.php");
        let expect_allow = session.contains_key(USER_KEY);
        prop_assert_eq!(decision == GuardDecision::Allow, expect_allow);
        if !expect_allow {
            prop_assert_eq!(decision, GuardDecision::RedirectToPortal { location: "/enter.php".into() });
        }
    }

    #[test]
    fn failed_attempts_never_grant_and_never_leak(
        attempts in vec((proptest::option::of("set|other"), name_strategy(), vec(any::<u8>(), 1..30)), 1..30),
    ) {
        let mut table = CredentialTable::new();
        table.add_user("ion", b"parola").unwrap();
        let mut session = SessionVars::new();
        for (marker, name, parole) in attempts {
            let submission = AuthSubmission { id_marker: marker, name: name.clone(), parole: parole.clone() };
            let outcome = authenticate(&submission, &table, &mut session, "/page1.php");
            let granted = table.verify(&name, &parole) == 1 && submission.is_submission();
            match &outcome {
                PortalOutcome::RedirectToFirstPage { authenticated_user, .. } => {
                    prop_assert!(granted);
                    prop_assert_eq!(authenticated_user, &name);
                }
                PortalOutcome::RenderForm { error_message, echoed_name } => {
                    prop_assert!(!granted);
                    if submission.is_submission() {
                        prop_assert_eq!(error_message.as_str(), UNREGISTERED_MESSAGE);
                        prop_assert_eq!(echoed_name, &name);
                    } else {
                        prop_assert_eq!(error_message.as_str(), "");
                        prop_assert_eq!(echoed_name.as_str(), "");
                    }
                }
            }
            let digest = md5_hex(&parole);
            for value in session.values() {
                prop_assert_ne!(value.as_bytes(), parole.as_slice());
                prop_assert_ne!(value, &digest);
            }
            if !granted {
                prop_assert_eq!(guard(&session, "/enter.php") == GuardDecision::Allow, session.contains_key(USER_KEY));
            }
        }
    }

    #[test]
    fn failure_replay_is_idempotent(name in name_strategy(), parole in vec(any::<u8>(), 0..20), rounds in 1usize..8) {
        let mut table = CredentialTable::new();
        table.add_user("ion", b"parola").unwrap();
        prop_assume!(table.verify(&name, &parole) == 0);
        let submission = AuthSubmission { id_marker: Some("set".into()), name, parole };
        let mut session = SessionVars::new();
        let first = authenticate(&submission, &table, &mut session, "/page1.php");
        for _ in 0..rounds {
            prop_assert_eq!(authenticate(&submission, &table, &mut session, "/page1.php"), first.clone());
        }
        prop_assert!(session.is_empty());
        let redirected = matches!(guard(&session, "/enter.php"), GuardDecision::RedirectToPortal { .. });
        prop_assert!(redirected);
    }
}

#[test]
fn grant_after_failures_is_monotone() {
    let mut table = CredentialTable::new();
    table.add_user("ion", b"parola").unwrap();
    let mut session = SessionVars::new();
    for bad in ["", "parol", "parola!", "PAROLA"] {
        authenticate(
            &AuthSubmission::submitted("ion", bad),
            &table,
            &mut session,
            "/page1.php",
        );
        assert!(matches!(
            guard(&session, "/enter.php"),
            GuardDecision::RedirectToPortal { .. }
        ));
    }
    authenticate(
        &AuthSubmission::submitted("ion", "parola"),
        &table,
        &mut session,
        "/page1.php",
    );
    assert_eq!(guard(&session, "/enter.php"), GuardDecision::Allow);
    // a later failed attempt does not revoke the grant
    authenticate(
        &AuthSubmission::submitted("ion", "bad"),
        &table,
        &mut session,
        "/page1.php",
    );
    assert_eq!(guard(&session, "/enter.php"), GuardDecision::Allow);
}
