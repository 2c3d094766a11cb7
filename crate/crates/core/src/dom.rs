//! Page trees and the identity check between a baseline page and a mutated one.
//!
//! Two trees are identical when, walking both from the root in lock step:
//!
//! * C1: corresponding nodes have the same tag name,
//! * C2: the same number of attributes,
//! * C3: the same attribute keys and (unless masked) the same values,
//! * C4: the same number of children,
//! * C5: every pair of element children is identical by these rules,
//! * C6: every pair of string children is equal (unless masked).
//!
//! C1, C2 and C4 are structural. C3 and C6 concern content and can be
//! relaxed through an [`IgnoreMask`] built from repeated unmutated replays.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::ControlFlow;

use ego_tree::NodeRef;
use scraper::{Html, Node};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("replays diverge structurally from the baseline at {0}")]
    TargetNondeterministic(Divergence),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomNode {
    Element {
        tag: String,
        attributes: Vec<(String, String)>,
        children: Vec<DomNode>,
    },
    Text {
        content: String,
    },
}

impl DomNode {
    pub fn element(tag: &str, attributes: &[(&str, &str)], children: Vec<DomNode>) -> Self {
        DomNode::Element {
            tag: tag.to_ascii_lowercase(),
            attributes: attributes
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            children,
        }
    }

    pub fn text(content: &str) -> Self {
        DomNode::Text {
            content: content.to_string(),
        }
    }

    pub fn children(&self) -> &[DomNode] {
        match self {
            DomNode::Element { children, .. } => children,
            DomNode::Text { .. } => &[],
        }
    }

    pub fn tag(&self) -> Option<&str> {
        match self {
            DomNode::Element { tag, .. } => Some(tag),
            DomNode::Text { .. } => None,
        }
    }

    fn count(&self) -> usize {
        1 + self.children().iter().map(DomNode::count).sum::<usize>()
    }
}

/// Root-to-node child indices; the root element has the empty address.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeAddress(pub Vec<usize>);

impl NodeAddress {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn child(&self, index: usize) -> Self {
        let mut v = self.0.clone();
        v.push(index);
        Self(v)
    }
}

impl fmt::Display for NodeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("/")?;
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join("/"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomTree {
    pub root: DomNode,
}

impl DomTree {
    pub fn parse(html: &str) -> Result<Self, DomError> {
        parse_html(html)
    }

    pub fn node(&self, address: &NodeAddress) -> Option<&DomNode> {
        address
            .0
            .iter()
            .try_fold(&self.root, |node, &i| node.children().get(i))
    }

    pub fn node_count(&self) -> usize {
        self.root.count()
    }

    /// Serializes the normalized tree back to HTML.
    pub fn to_html(&self) -> String {
        let mut out = String::new();
        write_html(&self.root, &mut out);
        out
    }
}

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source", "track",
    "wbr",
];

fn write_html(node: &DomNode, out: &mut String) {
    match node {
        DomNode::Text { content } => escape(content, false, out),
        DomNode::Element {
            tag,
            attributes,
            children,
        } => {
            out.push('<');
            out.push_str(tag);
            for (k, v) in attributes {
                out.push(' ');
                out.push_str(k);
                out.push_str("=\"");
                escape(v, true, out);
                out.push('"');
            }
            out.push('>');
            if VOID_ELEMENTS.contains(&tag.as_str()) && children.is_empty() {
                return;
            }
            children.iter().for_each(|c| write_html(c, out));
            out.push_str("</");
            out.push_str(tag);
            out.push('>');
        }
    }
}

fn escape(text: &str, attribute: bool, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' if !attribute => out.push_str("&lt;"),
            '>' if !attribute => out.push_str("&gt;"),
            '"' if attribute => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
}

/// Parses serialized HTML into a normalized tree.
///
/// Input starting with `<html` or a doctype is parsed as a full document and
/// rooted at the `html` element. Anything else is parsed as a fragment (for
/// example one element's outer HTML) and rooted at its single top-level
/// element. Comments and doctypes are dropped, tag names are lowercased,
/// whitespace-only text is dropped and other text is trimmed.
pub fn parse_html(html: &str) -> Result<DomTree, DomError> {
    let trimmed = html.trim_start();
    if trimmed.is_empty() {
        return Err(DomError::EmptyDocument);
    }
    let head: String = trimmed.chars().take(9).collect::<String>().to_ascii_lowercase();
    let is_document = head.starts_with("<!doctype") || head.starts_with("<html");

    let parsed = if is_document {
        Html::parse_document(html)
    } else {
        Html::parse_fragment(html)
    };
    let html_el = parsed
        .tree
        .root()
        .children()
        .find(|c| c.value().is_element())
        .ok_or(DomError::EmptyDocument)?;
    let mut root = convert(html_el).ok_or(DomError::EmptyDocument)?;

    if !is_document {
        // The fragment parser wraps content in a synthetic `html` element.
        if let DomNode::Element { children, .. } = &mut root {
            if children.len() == 1 && children[0].tag().is_some() {
                root = children.pop().expect("length checked");
            }
        }
        if root.children().is_empty() && root.tag() == Some("html") {
            return Err(DomError::EmptyDocument);
        }
    }
    Ok(DomTree { root })
}

fn convert(node: NodeRef<'_, Node>) -> Option<DomNode> {
    match node.value() {
        Node::Element(el) => {
            let attributes = el
                .attrs()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect();
            let children = node.children().filter_map(convert).collect();
            Some(DomNode::Element {
                tag: el.name().to_ascii_lowercase(),
                attributes,
                children,
            })
        }
        Node::Text(text) => {
            let content = text.trim();
            (!content.is_empty()).then(|| DomNode::text(content))
        }
        _ => None,
    }
}

/// The identity conditions. C5 is the recursion and never reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    C1,
    C2,
    C3,
    C4,
    C6,
}

impl Condition {
    pub fn is_structural(self) -> bool {
        matches!(self, Condition::C1 | Condition::C2 | Condition::C4)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub address: NodeAddress,
    pub condition: Condition,
    pub detail: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.address, self.condition, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Identical,
    StructurallyDifferent,
    ContentDifferent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub verdict: Verdict,
    pub first_divergence: Option<Divergence>,
}

impl ComparisonResult {
    pub fn identical() -> Self {
        Self {
            verdict: Verdict::Identical,
            first_divergence: None,
        }
    }

    pub fn is_identical(&self) -> bool {
        self.verdict == Verdict::Identical
    }
}

/// Text nodes and attribute values of the baseline that vary between
/// unmutated replays.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IgnoreMask {
    pub ignored_text_nodes: BTreeSet<NodeAddress>,
    pub ignored_attributes: BTreeSet<(NodeAddress, String)>,
}

impl IgnoreMask {
    pub fn len(&self) -> usize {
        self.ignored_text_nodes.len() + self.ignored_attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ignores_text(&self, address: &NodeAddress) -> bool {
        self.ignored_text_nodes.contains(address)
    }

    pub fn ignores_attribute(&self, address: &NodeAddress, key: &str) -> bool {
        // BTreeSet<(A, String)> cannot be probed with a borrowed tuple.
        self.ignored_attributes
            .range((address.clone(), key.to_string())..)
            .next()
            .is_some_and(|(a, k)| a == address && k == key)
    }

    pub fn merge(&mut self, other: IgnoreMask) {
        self.ignored_text_nodes.extend(other.ignored_text_nodes);
        self.ignored_attributes.extend(other.ignored_attributes);
    }

    /// True when every address in the mask resolves in `tree`.
    pub fn resolves_in(&self, tree: &DomTree) -> bool {
        self.ignored_text_nodes
            .iter()
            .all(|a| matches!(tree.node(a), Some(DomNode::Text { .. })))
            && self.ignored_attributes.iter().all(|(a, k)| {
                matches!(tree.node(a), Some(DomNode::Element { attributes, .. })
                    if attributes.iter().any(|(key, _)| key == k))
            })
    }
}

/// A content difference that a mask entry could absorb.
enum Slot {
    Text(NodeAddress),
    Attribute(NodeAddress, String),
    /// Attribute key sets differ; no mask entry covers this.
    Keys,
}

struct Finding {
    divergence: Divergence,
    slot: Option<Slot>,
}

fn diverge(address: &NodeAddress, condition: Condition, detail: String) -> Divergence {
    Divergence {
        address: address.clone(),
        condition,
        detail,
    }
}

fn walk(
    origin: &DomNode,
    mutated: &DomNode,
    address: &NodeAddress,
    mask: &IgnoreMask,
    visit: &mut dyn FnMut(Finding) -> ControlFlow<()>,
) -> ControlFlow<()> {
    let (
        DomNode::Element {
            tag: o_tag,
            attributes: o_attrs,
            children: o_children,
        },
        DomNode::Element {
            tag: m_tag,
            attributes: m_attrs,
            children: m_children,
        },
    ) = (origin, mutated)
    else {
        return walk_pair_kinds(origin, mutated, address, mask, visit);
    };

    let structural = |condition, detail| Finding {
        divergence: diverge(address, condition, detail),
        slot: None,
    };
    if o_tag != m_tag {
        return visit(structural(Condition::C1, format!("tag `{o_tag}` vs `{m_tag}`")));
    }
    if o_attrs.len() != m_attrs.len() {
        return visit(structural(
            Condition::C2,
            format!("{} attributes vs {}", o_attrs.len(), m_attrs.len()),
        ));
    }
    if o_children.len() != m_children.len() {
        return visit(structural(
            Condition::C4,
            format!("{} children vs {}", o_children.len(), m_children.len()),
        ));
    }

    let o_keys: BTreeSet<&str> = o_attrs.iter().map(|(k, _)| k.as_str()).collect();
    let m_keys: BTreeSet<&str> = m_attrs.iter().map(|(k, _)| k.as_str()).collect();
    if o_keys != m_keys {
        let missing: Vec<_> = o_keys.symmetric_difference(&m_keys).copied().collect();
        visit(Finding {
            divergence: diverge(
                address,
                Condition::C3,
                format!("attribute keys differ: {}", missing.join(", ")),
            ),
            slot: Some(Slot::Keys),
        })?;
    } else {
        for (key, o_value) in o_attrs {
            if mask.ignores_attribute(address, key) {
                continue;
            }
            let m_value = m_attrs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .expect("key sets are equal");
            if o_value != m_value {
                visit(Finding {
                    divergence: diverge(
                        address,
                        Condition::C3,
                        format!("attribute `{key}`: {o_value:?} vs {m_value:?}"),
                    ),
                    slot: Some(Slot::Attribute(address.clone(), key.clone())),
                })?;
            }
        }
    }

    for (i, (o_child, m_child)) in o_children.iter().zip(m_children).enumerate() {
        walk(o_child, m_child, &address.child(i), mask, visit)?;
    }
    ControlFlow::Continue(())
}

fn walk_pair_kinds(
    origin: &DomNode,
    mutated: &DomNode,
    address: &NodeAddress,
    mask: &IgnoreMask,
    visit: &mut dyn FnMut(Finding) -> ControlFlow<()>,
) -> ControlFlow<()> {
    match (origin, mutated) {
        (DomNode::Text { content: a }, DomNode::Text { content: b }) => {
            if a == b || mask.ignores_text(address) {
                ControlFlow::Continue(())
            } else {
                visit(Finding {
                    divergence: diverge(address, Condition::C6, format!("text {a:?} vs {b:?}")),
                    slot: Some(Slot::Text(address.clone())),
                })
            }
        }
        _ => {
            let kind = |n: &DomNode| n.tag().map_or("string".to_string(), |t| format!("<{t}>"));
            visit(Finding {
                divergence: diverge(
                    address,
                    Condition::C1,
                    format!("{} vs {}", kind(origin), kind(mutated)),
                ),
                slot: None,
            })
        }
    }
}

/// Decides whether `mutated` is identical to `origin` under `mask`.
///
/// Any structural divergence outranks content divergences, so the verdict
/// class does not depend on which side of the tree a difference sits. The
/// reported divergence is the first of the winning class in document order.
pub fn compare(origin: &DomTree, mutated: &DomTree, mask: &IgnoreMask) -> ComparisonResult {
    let mut first_content: Option<Divergence> = None;
    let mut structural: Option<Divergence> = None;
    let _ = walk(&origin.root, &mutated.root, &NodeAddress::root(), mask, &mut |f| {
        if f.divergence.condition.is_structural() {
            structural = Some(f.divergence);
            return ControlFlow::Break(());
        }
        first_content.get_or_insert(f.divergence);
        ControlFlow::Continue(())
    });
    match (structural, first_content) {
        (Some(d), _) => ComparisonResult {
            verdict: Verdict::StructurallyDifferent,
            first_divergence: Some(d),
        },
        (None, Some(d)) => ComparisonResult {
            verdict: Verdict::ContentDifferent,
            first_divergence: Some(d),
        },
        (None, None) => ComparisonResult::identical(),
    }
}

/// Builds the mask of baseline slots that vary across unmutated replays.
///
/// Fails with [`DomError::TargetNondeterministic`] when any replay differs
/// from the baseline in structure, or in attribute keys, since neither can
/// be masked.
pub fn build_ignore_mask(baseline: &DomTree, replays: &[DomTree]) -> Result<IgnoreMask, DomError> {
    let mut mask = IgnoreMask::default();
    let empty = IgnoreMask::default();
    for replay in replays {
        let mut fatal: Option<Divergence> = None;
        let _ = walk(&baseline.root, &replay.root, &NodeAddress::root(), &empty, &mut |f| {
            match f.slot {
                Some(Slot::Text(a)) => {
                    mask.ignored_text_nodes.insert(a);
                }
                Some(Slot::Attribute(a, k)) => {
                    mask.ignored_attributes.insert((a, k));
                }
                Some(Slot::Keys) | None => {
                    fatal = Some(f.divergence);
                    return ControlFlow::Break(());
                }
            }
            ControlFlow::Continue(())
        });
        if let Some(d) = fatal {
            return Err(DomError::TargetNondeterministic(d));
        }
    }
    Ok(mask)
}
