//! Randomized checks of the mutation engine against brute-force oracles that
//! rebuild JSON values by hand instead of going through the engine.

use exposure_core::mutation::{ApiResponseTree, FieldPath, Segment};
use proptest::prelude::*;
use proptest::sample::subsequence;
use serde_json::{Map, Value};

fn arb_key() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-z]{1,6}",
        1 => "[a-z.\\[\\]\\\\]{0,4}",
    ]
}

fn arb_json() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::from),
        (-1.0e6f64..1.0e6).prop_map(Value::from),
        "[ -~]{0,8}".prop_map(Value::String),
    ];
    leaf.prop_recursive(5, 64, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..5).prop_map(Value::Array),
            prop::collection::vec((arb_key(), inner), 0..5)
                .prop_map(|pairs| Value::Object(pairs.into_iter().collect::<Map<_, _>>())),
        ]
    })
}

fn arb_document() -> impl Strategy<Value = Value> {
    prop::collection::vec((arb_key(), arb_json()), 0..6)
        .prop_map(|pairs| Value::Object(pairs.into_iter().collect()))
}

// ---- oracles ----

fn oracle_leaf_count(v: &Value, is_root: bool) -> usize {
    match v {
        Value::Object(m) if !m.is_empty() => m.values().map(|c| oracle_leaf_count(c, false)).sum(),
        Value::Array(a) if !a.is_empty() => a.iter().map(|c| oracle_leaf_count(c, false)).sum(),
        _ if is_root => 0,
        _ => 1,
    }
}

/// Rebuilds `v` without the node at `path`.
fn oracle_delete(v: &Value, path: &[Segment]) -> Value {
    match (v, path) {
        (_, []) => unreachable!("root is never deleted"),
        (Value::Object(m), [Segment::Key(k), rest @ ..]) => {
            let mut out = Map::new();
            for (key, child) in m {
                if key == k {
                    if !rest.is_empty() {
                        out.insert(key.clone(), oracle_delete(child, rest));
                    }
                } else {
                    out.insert(key.clone(), child.clone());
                }
            }
            Value::Object(out)
        }
        (Value::Array(a), [Segment::Index(i), rest @ ..]) => Value::Array(
            a.iter()
                .enumerate()
                .filter_map(|(j, child)| match (j == *i, rest.is_empty()) {
                    (true, true) => None,
                    (true, false) => Some(oracle_delete(child, rest)),
                    (false, _) => Some(child.clone()),
                })
                .collect(),
        ),
        _ => panic!("path does not resolve"),
    }
}

fn reparse(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("engine output is JSON")
}

fn tree_of(v: &Value) -> ApiResponseTree {
    ApiResponseTree::parse(&serde_json::to_vec(v).unwrap()).unwrap()
}

fn document_with_paths() -> impl Strategy<Value = (Value, Vec<FieldPath>)> {
    arb_document().prop_flat_map(|doc| {
        let leaves = tree_of(&doc).enumerate_leaves();
        let n = leaves.len();
        (Just(doc), subsequence(leaves, 0..=n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn leaf_count_matches_oracle(doc in arb_document()) {
        let tree = tree_of(&doc);
        prop_assert_eq!(tree.enumerate_leaves().len(), oracle_leaf_count(&doc, true));
    }

    #[test]
    fn unmutated_tree_round_trips(doc in arb_document()) {
        let tree = tree_of(&doc);
        prop_assert_eq!(reparse(&tree.to_bytes()), doc.clone());
        prop_assert_eq!(reparse(&tree.apply_all_deletions(&[]).unwrap()), doc);
    }

    #[test]
    fn single_deletion_matches_rebuild_oracle(doc in arb_document()) {
        let tree = tree_of(&doc);
        for path in tree.enumerate_leaves() {
            let got = reparse(&tree.apply_deletion(&path).unwrap());
            prop_assert_eq!(&got, &oracle_delete(&doc, path.segments()), "path {}", path);
            prop_assert_eq!(tree.apply_all_deletions(std::slice::from_ref(&path)).unwrap(),
                tree.apply_deletion(&path).unwrap());
        }
    }

    #[test]
    fn leaf_count_decrements(doc in arb_document()) {
        let tree = tree_of(&doc);
        let before = tree.enumerate_leaves();
        for path in &before {
            let after_tree = ApiResponseTree::parse(&tree.apply_deletion(path).unwrap()).unwrap();
            let after = after_tree.enumerate_leaves();
            let (last, parent) = path.segments().split_last().unwrap();
            let parent_path = FieldPath::new(parent.to_vec());
            let parent_emptied = !parent_path.is_root() && {
                let p = after_tree.enumerate_leaves();
                p.contains(&parent_path)
            };
            if parent_emptied {
                prop_assert_eq!(after.len(), before.len());
            } else {
                prop_assert_eq!(after.len(), before.len() - 1);
            }
            if let Segment::Key(_) = last {
                prop_assert!(!after_tree.contains(path), "{} still present", path);
            }
        }
    }

    #[test]
    fn simultaneous_deletion_is_order_independent((doc, subset) in document_with_paths(), seed in any::<u64>()) {
        let tree = tree_of(&doc);
        let expected = tree.apply_all_deletions(&subset).unwrap();

        let mut shuffled = subset.clone();
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13; state ^= state >> 7; state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(&tree.apply_all_deletions(&shuffled).unwrap(), &expected);

        // Sequential oracle: enumeration order is document order, so walk it backwards.
        let mut current = doc.clone();
        for path in subset.iter().rev() {
            current = oracle_delete(&current, path.segments());
        }
        prop_assert_eq!(reparse(&expected), current);
    }

    #[test]
    fn path_text_round_trips(doc in arb_document()) {
        for path in tree_of(&doc).enumerate_leaves() {
            prop_assert_eq!(FieldPath::parse(&path.to_string()).unwrap(), path);
        }
    }
}

#[test]
fn nested_fixture_count_matches_oracle() {
    let body = br#"{"stores":[{"id":488,"name":"A","products":[{"id":"2632206","available":85,"qty":0,"reserved":0,"order":1},{"id":"1","available":2,"qty":1,"reserved":0,"order":2}],"tags":[]},{"id":512,"name":"B","products":[]}],"meta":{"page":1,"next":null}}"#;
    let tree = ApiResponseTree::parse(body).unwrap();
    let doc: Value = serde_json::from_slice(body).unwrap();
    assert_eq!(tree.enumerate_leaves().len(), oracle_leaf_count(&doc, true));
    assert_eq!(tree.enumerate_leaves().len(), 18);
}
