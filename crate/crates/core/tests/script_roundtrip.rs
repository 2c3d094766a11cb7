use exposure_core::script::{parse_script, serialize_script, Action, InteractionScript, ScriptError};
use proptest::prelude::*;

fn arb_selector() -> impl Strategy<Value = String> {
    prop_oneof![
        "//[a-z]{1,6}",
        "[a-z]{1,5}".prop_map(|id| format!("//div[@id=\"{id}\"]")),
        "[a-z]{1,5} [a-z]{1,5}".prop_map(|t| format!("//span[text()='{t}']")),
        ("[a-z]{1,5}", 1..5usize).prop_map(|(id, n)| format!("//div[@id='{id}']/div[{n}]")),
    ]
}

fn arb_action() -> impl Strategy<Value = Action> {
    prop_oneof![
        "[a-z]{1,8}".prop_map(|h| Action::Load { url: format!("https://{h}.example/p?q=1") }),
        (arb_selector(), "[A-Za-z0-9]{1,4}( [A-Za-z0-9]{1,4}){0,2}")
            .prop_map(|(selector, text)| Action::Input { selector, text }),
        arb_selector().prop_map(|selector| Action::Click { selector }),
        arb_selector().prop_map(|selector| Action::Hover { selector }),
        arb_selector().prop_map(|selector| Action::WaitLocate { selector }),
        any::<u32>().prop_map(|ms| Action::Sleep { ms: ms as u64 }),
        any::<i32>().prop_map(|d| Action::Scroll { delta: d as i64 }),
    ]
}

fn arb_script() -> impl Strategy<Value = InteractionScript> {
    (
        "/api/[a-z0-9/]{1,12}",
        "[a-z]{1,8}",
        prop::collection::vec(arb_action(), 0..6),
        prop::collection::vec(arb_action(), 0..4),
        prop::option::of(arb_selector()),
        prop::option::of(0..100_000u64),
    )
        .prop_map(|(target, host, before, after, area, timeout)| {
            let mut actions = vec![Action::Load { url: format!("http://{host}.test/") }];
            actions.extend(before);
            actions.push(Action::Fuzz);
            actions.extend(after);
            InteractionScript { target_matcher: target, actions, area_of_interest: area, timeout_ms: timeout }
        })
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(script in arb_script()) {
        prop_assert!(script.validate().is_ok());
        let text = serialize_script(&script);
        prop_assert_eq!(parse_script(&text).unwrap(), script.clone());
        // Parsing is pure.
        prop_assert_eq!(parse_script(&text), parse_script(&text));
        // CRLF endings parse to the same script.
        prop_assert_eq!(parse_script(&text.replace('\n', "\r\n")).unwrap(), script);
    }

    #[test]
    fn dropping_target_or_fuzz_is_rejected(script in arb_script()) {
        let text = serialize_script(&script);
        let no_target: String = text.lines().filter(|l| !l.starts_with("TARGET")).map(|l| format!("{l}\n")).collect();
        prop_assert_eq!(parse_script(&no_target), Err(ScriptError::MissingTarget));
        let no_fuzz: String = text.lines().filter(|l| *l != "FUZZ").map(|l| format!("{l}\n")).collect();
        prop_assert_eq!(parse_script(&no_fuzz), Err(ScriptError::MissingFuzzMarker));
    }
}
