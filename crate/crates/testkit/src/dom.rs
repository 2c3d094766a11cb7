//! Mutable arena DOM for the scripted browser.

use ego_tree::NodeRef;
use scraper::{Html, Node};

pub type NodeId = usize;

const VOID: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source", "track", "wbr",
];

#[derive(Debug, Clone)]
pub enum NodeData {
    Document,
    Element { tag: String, attrs: Vec<(String, String)> },
    Text(String),
}

#[derive(Debug, Clone)]
pub struct ArenaNode {
    pub data: NodeData,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// An open shadow root is attached; its content is never serialized.
    pub shadow_root: bool,
}

#[derive(Debug, Clone)]
pub struct Dom {
    nodes: Vec<ArenaNode>,
}

pub const DOCUMENT: NodeId = 0;

impl Default for Dom {
    fn default() -> Self {
        Self::new()
    }
}

impl Dom {
    pub fn new() -> Self {
        Self {
            nodes: vec![ArenaNode {
                data: NodeData::Document,
                parent: None,
                children: Vec::new(),
                shadow_root: false,
            }],
        }
    }

    pub fn parse(html: &str) -> Self {
        let parsed = Html::parse_document(html);
        let mut dom = Self::new();
        for child in parsed.tree.root().children() {
            dom.import(child, DOCUMENT);
        }
        dom
    }

    fn import(&mut self, node: NodeRef<'_, Node>, parent: NodeId) {
        let id = match node.value() {
            Node::Element(el) => {
                let attrs = el.attrs().map(|(k, v)| (k.to_string(), v.to_string())).collect();
                self.push(NodeData::Element {
                    tag: el.name().to_ascii_lowercase(),
                    attrs,
                })
            }
            Node::Text(t) => self.push(NodeData::Text(t.to_string())),
            _ => return,
        };
        self.append(parent, id);
        for child in node.children() {
            self.import(child, id);
        }
    }

    fn push(&mut self, data: NodeData) -> NodeId {
        self.nodes.push(ArenaNode {
            data,
            parent: None,
            children: Vec::new(),
            shadow_root: false,
        });
        self.nodes.len() - 1
    }

    pub fn node(&self, id: NodeId) -> &ArenaNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn create_element(&mut self, tag: &str, attrs: &[(&str, &str)]) -> NodeId {
        self.push(NodeData::Element {
            tag: tag.to_string(),
            attrs: attrs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        })
    }

    pub fn create_text(&mut self, text: &str) -> NodeId {
        self.push(NodeData::Text(text.to_string()))
    }

    pub fn append(&mut self, parent: NodeId, child: NodeId) {
        if let Some(old) = self.nodes[child].parent {
            self.nodes[old].children.retain(|&c| c != child);
        }
        self.nodes[child].parent = Some(parent);
        self.nodes[parent].children.push(child);
    }

    pub fn remove_children(&mut self, parent: NodeId) {
        for child in std::mem::take(&mut self.nodes[parent].children) {
            self.nodes[child].parent = None;
        }
    }

    pub fn attach_shadow(&mut self, id: NodeId) {
        self.nodes[id].shadow_root = true;
    }

    pub fn tag(&self, id: NodeId) -> Option<&str> {
        match &self.nodes[id].data {
            NodeData::Element { tag, .. } => Some(tag),
            _ => None,
        }
    }

    pub fn attr(&self, id: NodeId, key: &str) -> Option<&str> {
        match &self.nodes[id].data {
            NodeData::Element { attrs, .. } => attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str()),
            _ => None,
        }
    }

    pub fn set_attr(&mut self, id: NodeId, key: &str, value: &str) {
        if let NodeData::Element { attrs, .. } = &mut self.nodes[id].data {
            match attrs.iter_mut().find(|(k, _)| k == key) {
                Some(slot) => slot.1 = value.to_string(),
                None => attrs.push((key.to_string(), value.to_string())),
            }
        }
    }

    pub fn text(&self, id: NodeId) -> Option<&str> {
        match &self.nodes[id].data {
            NodeData::Text(t) => Some(t),
            _ => None,
        }
    }

    /// Concatenated descendant text (the XPath string-value).
    pub fn text_content(&self, id: NodeId) -> String {
        let mut out = String::new();
        self.collect_text(id, &mut out);
        out
    }

    fn collect_text(&self, id: NodeId, out: &mut String) {
        match &self.nodes[id].data {
            NodeData::Text(t) => out.push_str(t),
            _ => self.nodes[id].children.iter().for_each(|&c| self.collect_text(c, out)),
        }
    }

    pub fn document_element(&self) -> Option<NodeId> {
        self.nodes[DOCUMENT].children.iter().copied().find(|&c| self.tag(c).is_some())
    }

    /// Nodes reachable from the document, in document order.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![DOCUMENT];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.nodes[id].children.iter().rev());
        }
        out
    }

    pub fn element_by_id(&self, id: &str) -> Option<NodeId> {
        self.preorder().into_iter().find(|&n| self.attr(n, "id") == Some(id))
    }

    pub fn is_attached(&self, mut id: NodeId) -> bool {
        while let Some(p) = self.nodes[id].parent {
            id = p;
        }
        id == DOCUMENT
    }

    pub fn ancestors_inclusive(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            out.push(p);
            cur = p;
        }
        out
    }

    pub fn outer_html(&self, id: NodeId) -> String {
        let mut out = String::new();
        self.write_html(id, &mut out, false);
        out
    }

    fn write_html(&self, id: NodeId, out: &mut String, raw_text: bool) {
        match &self.nodes[id].data {
            NodeData::Document => {
                for &c in &self.nodes[id].children {
                    self.write_html(c, out, false);
                }
            }
            NodeData::Text(t) if raw_text => out.push_str(t),
            NodeData::Text(t) => escape(t, false, out),
            NodeData::Element { tag, attrs } => {
                out.push('<');
                out.push_str(tag);
                for (k, v) in attrs {
                    out.push(' ');
                    out.push_str(k);
                    out.push_str("=\"");
                    escape(v, true, out);
                    out.push('"');
                }
                out.push('>');
                if VOID.contains(&tag.as_str()) {
                    return;
                }
                let raw = matches!(tag.as_str(), "script" | "style");
                for &c in &self.nodes[id].children {
                    self.write_html(c, out, raw);
                }
                out.push_str("</");
                out.push_str(tag);
                out.push('>');
            }
        }
    }
}

fn escape(text: &str, attribute: bool, out: &mut String) {
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' if !attribute => out.push_str("&lt;"),
            '>' if !attribute => out.push_str("&gt;"),
            '"' if attribute => out.push_str("&quot;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_serialize() {
        let dom = Dom::parse("<!doctype html><html><head><title>t</title></head><body><p class=\"a\">x &amp; y</p><br></body></html>");
        let html = dom.document_element().unwrap();
        assert_eq!(
            dom.outer_html(html),
            "<html><head><title>t</title></head><body><p class=\"a\">x &amp; y</p><br></body></html>"
        );
    }

    #[test]
    fn building() {
        let mut dom = Dom::parse("<html><body><div id=\"app\"></div></body></html>");
        let app = dom.element_by_id("app").unwrap();
        let p = dom.create_element("p", &[("class", "x")]);
        let t = dom.create_text("hi");
        dom.append(p, t);
        dom.append(app, p);
        assert_eq!(dom.outer_html(app), "<div id=\"app\"><p class=\"x\">hi</p></div>");
        assert!(dom.is_attached(t));
        dom.remove_children(app);
        assert!(!dom.is_attached(t));
        assert_eq!(dom.outer_html(app), "<div id=\"app\"></div>");
    }
}
