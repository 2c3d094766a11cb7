//! JSON response trees, leaf enumeration and single-field deletion.
//!
//! Every leaf of the target response is one test case. A leaf is a scalar
//! (string, number, boolean, null) or an empty object/array. The root itself
//! is never a field.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MutationError {
    #[error("target body is not JSON: {0}")]
    UnsupportedContentType(String),
    #[error("path `{0}` does not resolve in the response tree")]
    PathNotFound(String),
    #[error("malformed field path `{text}`: {reason}")]
    MalformedPath { text: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Segment {
    Key(String),
    Index(usize),
}

/// Address of one node in a JSON tree.
///
/// The canonical text form joins object keys with `.` and brackets array
/// indices: `stores[0].products[1].available`. Keys containing `.`, `[`,
/// `]` or `\` have those characters escaped with a backslash, and an empty
/// key in first position is written `\0`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldPath {
    segments: Vec<Segment>,
}

impl FieldPath {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_root(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn child_key(&self, key: &str) -> Self {
        let mut segments = self.segments.clone();
        segments.push(Segment::Key(key.to_string()));
        Self { segments }
    }

    pub fn child_index(&self, index: usize) -> Self {
        let mut segments = self.segments.clone();
        segments.push(Segment::Index(index));
        Self { segments }
    }

    pub fn parse(text: &str) -> Result<Self, MutationError> {
        let bad = |reason: &str| MutationError::MalformedPath {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let mut segments = Vec::new();
        let mut chars = text.chars().peekable();
        // A key is expected at the start and after every '.'.
        let mut expect_key = !text.starts_with('[');
        loop {
            if expect_key {
                let mut key = String::new();
                while let Some(&c) = chars.peek() {
                    match c {
                        '\\' => {
                            chars.next();
                            match chars.next().ok_or_else(|| bad("dangling escape"))? {
                                // `\0` spells an empty leading key.
                                '0' => {}
                                c => key.push(c),
                            }
                        }
                        '.' | '[' => break,
                        ']' => return Err(bad("unescaped `]` in key")),
                        _ => {
                            key.push(c);
                            chars.next();
                        }
                    }
                }
                segments.push(Segment::Key(key));
            }
            match chars.next() {
                None => break,
                Some('.') => expect_key = true,
                Some('[') => {
                    let mut digits = String::new();
                    loop {
                        match chars.next() {
                            Some(']') => break,
                            Some(d) if d.is_ascii_digit() => digits.push(d),
                            _ => return Err(bad("array index must be `[digits]`")),
                        }
                    }
                    let index = digits.parse().map_err(|_| bad("empty array index"))?;
                    segments.push(Segment::Index(index));
                    match chars.peek() {
                        None | Some('.') | Some('[') => expect_key = false,
                        Some(_) => return Err(bad("expected `.` or `[` after `]`")),
                    }
                }
                Some(_) => unreachable!("key scanner stops only at '.' or '['"),
            }
        }
        Ok(Self { segments })
    }

    fn resolve<'a>(&self, root: &'a Value) -> Option<&'a Value> {
        self.segments.iter().try_fold(root, |node, seg| match (node, seg) {
            (Value::Object(map), Segment::Key(k)) => map.get(k),
            (Value::Array(items), Segment::Index(i)) => items.get(*i),
            _ => None,
        })
    }

    /// Position of every segment within its container, in document order.
    fn positions(&self, root: &Value) -> Option<Vec<usize>> {
        let mut node = root;
        let mut out = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            match (node, seg) {
                (Value::Object(map), Segment::Key(k)) => {
                    out.push(map.keys().position(|key| key == k)?);
                    node = &map[k];
                }
                (Value::Array(items), Segment::Index(i)) => {
                    node = items.get(*i)?;
                    out.push(*i);
                }
                _ => return None,
            }
        }
        Some(out)
    }
}

fn escape_key(key: &str, out: &mut String) {
    for c in key.chars() {
        if matches!(c, '.' | '[' | ']' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
}

impl fmt::Display for FieldPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for (i, seg) in self.segments.iter().enumerate() {
            match seg {
                Segment::Key(k) if i == 0 && k.is_empty() => out.push_str("\\0"),
                Segment::Key(k) => {
                    if i > 0 {
                        out.push('.');
                    }
                    escape_key(k, &mut out);
                }
                Segment::Index(n) => out.push_str(&format!("[{n}]")),
            }
        }
        f.write_str(&out)
    }
}

impl FromStr for FieldPath {
    type Err = MutationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for FieldPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FieldPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Self::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Deletion is the only mutation operator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mutation {
    pub path: FieldPath,
}

impl Mutation {
    pub fn delete(path: FieldPath) -> Self {
        Self { path }
    }
}

/// The recorded target response body as a JSON tree.
#[derive(Debug, Clone)]
pub struct ApiResponseTree {
    root: Value,
    source_bytes: Vec<u8>,
}

impl ApiResponseTree {
    pub fn parse(bytes: &[u8]) -> Result<Self, MutationError> {
        let root = serde_json::from_slice(bytes)
            .map_err(|e| MutationError::UnsupportedContentType(e.to_string()))?;
        Ok(Self {
            root,
            source_bytes: bytes.to_vec(),
        })
    }

    pub fn root(&self) -> &Value {
        &self.root
    }

    pub fn source_bytes(&self) -> &[u8] {
        &self.source_bytes
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.root).expect("a parsed JSON value always serializes")
    }

    pub fn contains(&self, path: &FieldPath) -> bool {
        path.resolve(&self.root).is_some()
    }

    /// All leaf fields in depth-first document order.
    pub fn enumerate_leaves(&self) -> Vec<FieldPath> {
        enumerate_leaves(&self.root)
    }

    pub fn apply_deletion(&self, path: &FieldPath) -> Result<Vec<u8>, MutationError> {
        self.apply_all_deletions(std::slice::from_ref(path))
    }

    /// Removes every node in `paths` from one copy of the tree. The result does
    /// not depend on the order of `paths`.
    pub fn apply_all_deletions(&self, paths: &[FieldPath]) -> Result<Vec<u8>, MutationError> {
        let mut root = self.root.clone();
        delete_all(&mut root, paths)?;
        Ok(serde_json::to_vec(&root).expect("a parsed JSON value always serializes"))
    }
}

fn is_leaf(value: &Value) -> bool {
    match value {
        Value::Object(m) => m.is_empty(),
        Value::Array(a) => a.is_empty(),
        _ => true,
    }
}

pub fn enumerate_leaves(root: &Value) -> Vec<FieldPath> {
    fn walk(node: &Value, at: &FieldPath, out: &mut Vec<FieldPath>) {
        if !at.is_root() && is_leaf(node) {
            out.push(at.clone());
            return;
        }
        match node {
            Value::Object(map) => map.iter().for_each(|(k, v)| walk(v, &at.child_key(k), out)),
            Value::Array(items) => items
                .iter()
                .enumerate()
                .for_each(|(i, v)| walk(v, &at.child_index(i), out)),
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(root, &FieldPath::default(), &mut out);
    out
}

/// Deletes `paths` from `root` in place.
///
/// Paths are resolved against the unmodified tree first, then removed in
/// reverse document order so that earlier array indices stay valid.
pub fn delete_all(root: &mut Value, paths: &[FieldPath]) -> Result<(), MutationError> {
    let mut ordered = Vec::with_capacity(paths.len());
    for path in paths {
        if path.is_root() {
            return Err(MutationError::PathNotFound(String::new()));
        }
        let pos = path
            .positions(root)
            .ok_or_else(|| MutationError::PathNotFound(path.to_string()))?;
        ordered.push((pos, path));
    }
    ordered.sort();
    ordered.dedup_by(|a, b| a.0 == b.0);
    for (_, path) in ordered.into_iter().rev() {
        remove_node(root, path);
    }
    Ok(())
}

fn remove_node(root: &mut Value, path: &FieldPath) {
    let (last, parents) = path.segments.split_last().expect("root paths are rejected earlier");
    let mut node = root;
    for seg in parents {
        node = match (node, seg) {
            (Value::Object(map), Segment::Key(k)) => map.get_mut(k).expect("path resolved"),
            (Value::Array(items), Segment::Index(i)) => &mut items[*i],
            _ => unreachable!("path resolved against this tree"),
        };
    }
    match (node, last) {
        (Value::Object(map), Segment::Key(k)) => {
            map.shift_remove(k);
        }
        (Value::Array(items), Segment::Index(i)) => {
            items.remove(*i);
        }
        _ => unreachable!("path resolved against this tree"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn tree(v: Value) -> ApiResponseTree {
        ApiResponseTree::parse(&serde_json::to_vec(&v).unwrap()).unwrap()
    }

    fn paths(texts: &[&str]) -> Vec<FieldPath> {
        texts.iter().map(|t| FieldPath::parse(t).unwrap()).collect()
    }

    #[test]
    fn driver_record_leaves() {
        let t = tree(json!({"driver":{"id":353,"car":{"capacity":33}}}));
        assert_eq!(t.enumerate_leaves(), paths(&["driver.id", "driver.car.capacity"]));
    }

    #[test]
    fn empty_object_has_no_fields() {
        assert!(tree(json!({})).enumerate_leaves().is_empty());
        assert!(tree(json!(5)).enumerate_leaves().is_empty());
    }

    #[test]
    fn empty_containers_are_leaves() {
        let t = tree(json!({"a":{}, "b":[], "c":[{}]}));
        assert_eq!(t.enumerate_leaves(), paths(&["a", "b", "c[0]"]));
    }

    #[test]
    fn deleting_capacity_leaves_empty_car() {
        let t = tree(json!({"driver":{"id":353,"car":{"capacity":33}}}));
        let out = t.apply_deletion(&FieldPath::parse("driver.car.capacity").unwrap()).unwrap();
        assert_eq!(out, br#"{"driver":{"id":353,"car":{}}}"#);
    }

    #[test]
    fn array_deletion_shifts() {
        let t = tree(json!({"a":[1,2]}));
        let out = t.apply_deletion(&FieldPath::parse("a[0]").unwrap()).unwrap();
        assert_eq!(out, br#"{"a":[2]}"#);
    }

    #[test]
    fn deleting_both_driver_leaves() {
        let t = tree(json!({"driver":{"id":353,"car":{"capacity":33}}}));
        let all = t.enumerate_leaves();
        assert_eq!(t.apply_all_deletions(&all).unwrap(), br#"{"driver":{"car":{}}}"#);
        let mut rev = all.clone();
        rev.reverse();
        assert_eq!(t.apply_all_deletions(&rev).unwrap(), br#"{"driver":{"car":{}}}"#);
    }

    #[test]
    fn no_deletions_is_identity() {
        let t = tree(json!({"z":1,"a":[true,null]}));
        let out = t.apply_all_deletions(&[]).unwrap();
        assert_eq!(serde_json::from_slice::<Value>(&out).unwrap(), *t.root());
        assert_eq!(out, br#"{"z":1,"a":[true,null]}"#);
    }

    #[test]
    fn key_order_survives_deletion() {
        let t = ApiResponseTree::parse(br#"{"z":1,"m":2,"a":3}"#).unwrap();
        let out = t.apply_deletion(&FieldPath::parse("z").unwrap()).unwrap();
        assert_eq!(out, br#"{"m":2,"a":3}"#);
    }

    #[test]
    fn missing_path_is_an_error() {
        let t = tree(json!({"a":[1]}));
        for p in ["b", "a[1]", "a.x", "a[0].y"] {
            assert_eq!(
                t.apply_deletion(&FieldPath::parse(p).unwrap()),
                Err(MutationError::PathNotFound(p.to_string()))
            );
        }
        assert!(t.apply_deletion(&FieldPath::default()).is_err());
    }

    #[test]
    fn non_json_body_is_rejected() {
        assert!(matches!(
            ApiResponseTree::parse(b"<stock><item/></stock>"),
            Err(MutationError::UnsupportedContentType(_))
        ));
    }

    #[test]
    fn path_text_forms() {
        let p = FieldPath::new(vec![
            Segment::Key("stores".into()),
            Segment::Index(0),
            Segment::Key("products".into()),
            Segment::Index(1),
            Segment::Key("available".into()),
        ]);
        assert_eq!(p.to_string(), "stores[0].products[1].available");
        assert_eq!(FieldPath::parse("stores[0].products[1].available").unwrap(), p);

        let odd = FieldPath::new(vec![Segment::Key("a.b".into()), Segment::Key("c[0]".into())]);
        assert_eq!(odd.to_string(), r"a\.b.c\[0\]");
        assert_eq!(FieldPath::parse(&odd.to_string()).unwrap(), odd);

        let empty = FieldPath::new(vec![Segment::Key(String::new()), Segment::Index(0)]);
        assert_eq!(empty.to_string(), r"\0[0]");
        assert_eq!(FieldPath::parse(r"\0[0]").unwrap(), empty);

        let top = FieldPath::new(vec![Segment::Index(2), Segment::Index(0)]);
        assert_eq!(top.to_string(), "[2][0]");
        assert_eq!(FieldPath::parse("[2][0]").unwrap(), top);
    }

    #[test]
    fn malformed_path_text() {
        for bad in ["a[x]", "a[]", "a[1]b", "a\\", "a]"] {
            assert!(FieldPath::parse(bad).is_err(), "{bad}");
        }
    }
}
