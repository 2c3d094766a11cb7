use exposure_core::dom::{
    compare, parse_html, Condition, DomNode, DomTree, IgnoreMask, NodeAddress, Verdict,
};
use proptest::prelude::*;

const TAGS: &[&str] = &["div", "span", "section", "article", "em"];

fn arb_text() -> impl Strategy<Value = String> {
    "[a-z0-9]{1,4}( [a-z0-9]{1,4}){0,2}"
}

fn arb_attrs() -> impl Strategy<Value = Vec<(String, String)>> {
    prop::collection::btree_map("[a-z]{1,5}", "[a-z0-9]{0,4}", 0..3)
        .prop_map(|m| m.into_iter().collect())
}

fn arb_node() -> impl Strategy<Value = DomNode> {
    let leaf = (prop::sample::select(TAGS), arb_attrs()).prop_map(|(tag, attributes)| {
        DomNode::Element { tag: tag.to_string(), attributes, children: vec![] }
    });
    leaf.prop_recursive(4, 40, 4, |inner| {
        (
            prop::sample::select(TAGS),
            arb_attrs(),
            prop::collection::vec(prop_oneof![3 => inner, 1 => arb_text().prop_map(|t| DomNode::text(&t))], 0..4),
        )
            .prop_map(|(tag, attributes, mut children)| {
                // The HTML parser merges adjacent text, so generate none.
                children.dedup_by(|b, a| matches!((a, b), (DomNode::Text { .. }, DomNode::Text { .. })));
                DomNode::Element { tag: tag.to_string(), attributes, children }
            })
    })
}

fn arb_tree() -> impl Strategy<Value = DomTree> {
    arb_node().prop_map(|root| DomTree { root })
}

fn addresses(node: &DomNode, at: NodeAddress, out: &mut Vec<(NodeAddress, DomNode)>) {
    out.push((at.clone(), node.clone()));
    for (i, c) in node.children().iter().enumerate() {
        addresses(c, at.child(i), out);
    }
}

fn all_nodes(tree: &DomTree) -> Vec<(NodeAddress, DomNode)> {
    let mut out = Vec::new();
    addresses(&tree.root, NodeAddress::root(), &mut out);
    out
}

fn full_mask(tree: &DomTree) -> IgnoreMask {
    let mut mask = IgnoreMask::default();
    for (addr, node) in all_nodes(tree) {
        match node {
            DomNode::Text { .. } => {
                mask.ignored_text_nodes.insert(addr);
            }
            DomNode::Element { attributes, .. } => {
                for (k, _) in attributes {
                    mask.ignored_attributes.insert((addr.clone(), k));
                }
            }
        }
    }
    mask
}

fn subset_mask(mask: &IgnoreMask, bits: u64) -> IgnoreMask {
    let mut out = IgnoreMask::default();
    for (i, a) in mask.ignored_text_nodes.iter().enumerate() {
        if bits >> (i % 64) & 1 == 1 {
            out.ignored_text_nodes.insert(a.clone());
        }
    }
    for (i, a) in mask.ignored_attributes.iter().enumerate() {
        if bits >> ((i + 17) % 64) & 1 == 1 {
            out.ignored_attributes.insert(a.clone());
        }
    }
    out
}

fn node_mut<'a>(node: &'a mut DomNode, addr: &[usize]) -> &'a mut DomNode {
    match addr.split_first() {
        None => node,
        Some((&i, rest)) => match node {
            DomNode::Element { children, .. } => node_mut(&mut children[i], rest),
            DomNode::Text { .. } => unreachable!(),
        },
    }
}

/// Applies one planted edit at a node and returns the condition it violates.
fn plant(tree: &DomTree, addr: &NodeAddress, choice: u8) -> (DomTree, Condition) {
    let mut out = tree.clone();
    let node = node_mut(&mut out.root, &addr.0);
    let condition = match node {
        DomNode::Text { content } => {
            content.push('!');
            Condition::C6
        }
        DomNode::Element { tag, attributes, children } => match choice % 4 {
            0 => {
                *tag = if tag == "div" { "p".into() } else { "div".into() };
                Condition::C1
            }
            1 => {
                attributes.push(("data-planted".into(), "1".into()));
                Condition::C2
            }
            2 => {
                children.push(DomNode::element("i", &[], vec![]));
                Condition::C4
            }
            _ if !attributes.is_empty() => {
                attributes[0].1.push('!');
                Condition::C3
            }
            _ => {
                children.insert(0, DomNode::element("i", &[], vec![]));
                Condition::C4
            }
        },
    };
    (out, condition)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reflexive_under_any_mask(t in arb_tree(), bits in any::<u64>()) {
        let mask = subset_mask(&full_mask(&t), bits);
        prop_assert!(compare(&t, &t, &mask).is_identical());
        prop_assert!(compare(&t, &t, &IgnoreMask::default()).is_identical());
    }

    #[test]
    fn verdict_class_is_symmetric(a in arb_tree(), b in arb_tree()) {
        let empty = IgnoreMask::default();
        prop_assert_eq!(compare(&a, &b, &empty).verdict, compare(&b, &a, &empty).verdict);
    }

    #[test]
    fn planted_divergence_is_located((t, pick, choice) in (arb_tree(), any::<prop::sample::Index>(), any::<u8>())) {
        let nodes = all_nodes(&t);
        let (addr, _) = &nodes[pick.index(nodes.len())];
        let (mutated, condition) = plant(&t, addr, choice);
        let r = compare(&t, &mutated, &IgnoreMask::default());
        let d = r.first_divergence.expect("planted change must be found");
        prop_assert_eq!(&d.address, addr);
        prop_assert_eq!(d.condition, condition);
        let expected = if condition.is_structural() { Verdict::StructurallyDifferent } else { Verdict::ContentDifferent };
        prop_assert_eq!(r.verdict, expected);
    }

    #[test]
    fn enlarging_mask_keeps_identity((t, pick, choice) in (arb_tree(), any::<prop::sample::Index>(), any::<u8>()), bits in any::<u64>()) {
        let nodes = all_nodes(&t);
        let (addr, _) = &nodes[pick.index(nodes.len())];
        let (mutated, _) = plant(&t, addr, choice);
        let full = full_mask(&t);
        let small = subset_mask(&full, bits);
        let mut large = small.clone();
        large.merge(subset_mask(&full, bits.rotate_left(7)));
        if compare(&t, &mutated, &small).is_identical() {
            prop_assert!(compare(&t, &mutated, &large).is_identical());
        }
        // Masking every content slot absorbs every content edit.
        let r = compare(&t, &mutated, &full);
        prop_assert_ne!(r.verdict, Verdict::ContentDifferent);
    }

    #[test]
    fn equal_serializations_compare_identical(t in arb_tree()) {
        let html = t.to_html();
        let reparsed = parse_html(&html).unwrap();
        prop_assert_eq!(&reparsed, &t);
        let again = parse_html(&html).unwrap();
        prop_assert!(compare(&reparsed, &again, &IgnoreMask::default()).is_identical());
    }
}

/// One minimal pair per condition; the masked variants of C3 and C6 pass.
#[test]
fn each_condition_in_isolation() {
    let base = || DomNode::element("div", &[("class", "box")], vec![DomNode::text("85"), DomNode::element("span", &[], vec![])]);
    let origin = DomTree { root: base() };
    let empty = IgnoreMask::default();

    let cases: Vec<(DomNode, Condition, Verdict)> = vec![
        (DomNode::element("section", &[("class", "box")], vec![DomNode::text("85"), DomNode::element("span", &[], vec![])]), Condition::C1, Verdict::StructurallyDifferent),
        (DomNode::element("div", &[("class", "box"), ("id", "x")], vec![DomNode::text("85"), DomNode::element("span", &[], vec![])]), Condition::C2, Verdict::StructurallyDifferent),
        (DomNode::element("div", &[("class", "tile")], vec![DomNode::text("85"), DomNode::element("span", &[], vec![])]), Condition::C3, Verdict::ContentDifferent),
        (DomNode::element("div", &[("class", "box")], vec![DomNode::text("85")]), Condition::C4, Verdict::StructurallyDifferent),
        (DomNode::element("div", &[("class", "box")], vec![DomNode::text("0"), DomNode::element("span", &[], vec![])]), Condition::C6, Verdict::ContentDifferent),
    ];
    for (root, condition, verdict) in cases {
        let r = compare(&origin, &DomTree { root }, &empty);
        assert_eq!(r.verdict, verdict, "{condition}");
        assert_eq!(r.first_divergence.unwrap().condition, condition);
    }

    let mut mask = IgnoreMask::default();
    mask.ignored_attributes.insert((NodeAddress::root(), "class".into()));
    mask.ignored_text_nodes.insert(NodeAddress(vec![0]));
    let c3 = DomTree { root: DomNode::element("div", &[("class", "tile")], vec![DomNode::text("85"), DomNode::element("span", &[], vec![])]) };
    let c6 = DomTree { root: DomNode::element("div", &[("class", "box")], vec![DomNode::text("0"), DomNode::element("span", &[], vec![])]) };
    assert!(compare(&origin, &c3, &mask).is_identical());
    assert!(compare(&origin, &c6, &mask).is_identical());
}

#[test]
fn container_subtree_of_sample_page() {
    let page = r#"<html><head><title>Delivery</title></head><body>
        <div class="header"><h1>Track your parcel</h1></div>
        <div class="container">
          <p class="status">In progress</p>
          <div class="driver"><span>Driver</span><span>Car</span></div>
        </div></body></html>"#;
    let t = parse_html(page).unwrap();
    let body = &t.root.children()[1];
    let container = &body.children()[1];
    let area = parse_html(r#"<div class="container">
          <p class="status">In progress</p>
          <div class="driver"><span>Driver</span><span>Car</span></div>
        </div>"#)
    .unwrap();
    assert_eq!(&area.root, container);
    assert_eq!(area.root.children().len(), 2);
}
