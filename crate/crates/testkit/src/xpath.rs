//! The XPath subset interaction scripts use: absolute location paths with
//! `/` and `//`, name tests, `*`, and predicates built from positions,
//! `@attr`, `@attr='v'`, `text()='v'`, `.='v'`, `contains(x, 'v')` and `and`.

use std::collections::HashMap;

use crate::dom::{Dom, NodeData, NodeId, DOCUMENT};

#[derive(Debug, Clone, PartialEq)]
enum Operand {
    Attr(String),
    Text,
    Dot,
}

#[derive(Debug, Clone, PartialEq)]
enum Pred {
    Position(usize),
    Exists(String),
    Equals(Operand, String),
    Contains(Operand, String),
    And(Box<Pred>, Box<Pred>),
}

#[derive(Debug, Clone, PartialEq)]
struct Step {
    descendant: bool,
    name: Option<String>,
    predicates: Vec<Pred>,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), String> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(format!("expected `{token}` at offset {} in {}", self.pos, self.src))
        }
    }

    fn name(&mut self) -> Result<String, String> {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_alphanumeric() || c == '-' || c == '_' || c == ':'))
            .unwrap_or(self.rest().len());
        if len == 0 {
            return Err(format!("expected a name at offset {} in {}", self.pos, self.src));
        }
        let name = self.rest()[..len].to_string();
        self.pos += len;
        Ok(name)
    }

    fn string(&mut self) -> Result<String, String> {
        self.skip_ws();
        let quote = self.rest().chars().next().filter(|c| *c == '"' || *c == '\'');
        let quote = quote.ok_or_else(|| format!("expected a string literal in {}", self.src))?;
        let body = &self.rest()[1..];
        let end = body.find(quote).ok_or_else(|| format!("unterminated string in {}", self.src))?;
        let s = body[..end].to_string();
        self.pos += end + 2;
        Ok(s)
    }

    fn operand(&mut self) -> Result<Operand, String> {
        if self.eat("@") {
            Ok(Operand::Attr(self.name()?))
        } else if self.eat("text()") {
            Ok(Operand::Text)
        } else if self.eat(".") {
            Ok(Operand::Dot)
        } else {
            Err(format!("unsupported operand in {}", self.src))
        }
    }

    fn predicate(&mut self) -> Result<Pred, String> {
        let first = self.simple_predicate()?;
        if self.eat("and") {
            return Ok(Pred::And(Box::new(first), Box::new(self.predicate()?)));
        }
        Ok(first)
    }

    fn simple_predicate(&mut self) -> Result<Pred, String> {
        self.skip_ws();
        let digits = self.rest().chars().take_while(char::is_ascii_digit).count();
        if digits > 0 {
            let n: usize = self.rest()[..digits].parse().map_err(|e| format!("{e}"))?;
            self.pos += digits;
            return Ok(Pred::Position(n));
        }
        if self.eat("contains(") {
            let operand = self.operand()?;
            self.expect(",")?;
            let value = self.string()?;
            self.expect(")")?;
            return Ok(Pred::Contains(operand, value));
        }
        let operand = self.operand()?;
        if self.eat("=") {
            return Ok(Pred::Equals(operand, self.string()?));
        }
        match operand {
            Operand::Attr(name) => Ok(Pred::Exists(name)),
            _ => Err(format!("bare text()/. predicate unsupported in {}", self.src)),
        }
    }

    fn steps(&mut self) -> Result<Vec<Step>, String> {
        let mut steps = Vec::new();
        loop {
            self.skip_ws();
            if self.pos == self.src.len() {
                break;
            }
            let descendant = if self.eat("//") {
                true
            } else if self.eat("/") {
                false
            } else {
                return Err(format!("expected `/` at offset {} in {}", self.pos, self.src));
            };
            let name = if self.eat("*") { None } else { Some(self.name()?.to_ascii_lowercase()) };
            let mut predicates = Vec::new();
            while self.eat("[") {
                predicates.push(self.predicate()?);
                self.expect("]")?;
            }
            steps.push(Step {
                descendant,
                name,
                predicates,
            });
        }
        if steps.is_empty() {
            return Err("empty XPath".into());
        }
        Ok(steps)
    }
}

fn operand_values(dom: &Dom, node: NodeId, operand: &Operand) -> Vec<String> {
    match operand {
        Operand::Attr(name) => dom.attr(node, name).map(str::to_string).into_iter().collect(),
        Operand::Text => dom
            .node(node)
            .children
            .iter()
            .filter_map(|&c| dom.text(c).map(str::to_string))
            .collect(),
        Operand::Dot => vec![dom.text_content(node)],
    }
}

fn holds(dom: &Dom, node: NodeId, position: usize, pred: &Pred) -> bool {
    match pred {
        Pred::Position(n) => position == *n,
        Pred::Exists(name) => dom.attr(node, name).is_some(),
        Pred::Equals(op, v) => operand_values(dom, node, op).iter().any(|s| s == v),
        Pred::Contains(op, v) => operand_values(dom, node, op).iter().any(|s| s.contains(v.as_str())),
        Pred::And(a, b) => holds(dom, node, position, a) && holds(dom, node, position, b),
    }
}

fn descendants_or_self(dom: &Dom, id: NodeId, out: &mut Vec<NodeId>) {
    out.push(id);
    for &c in &dom.node(id).children {
        descendants_or_self(dom, c, out);
    }
}

/// Elements matched by `expr`, in document order.
pub fn evaluate(dom: &Dom, expr: &str) -> Result<Vec<NodeId>, String> {
    let steps = Parser { src: expr.trim(), pos: 0 }.steps()?;
    let order: HashMap<NodeId, usize> = dom.preorder().into_iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut context = vec![DOCUMENT];
    for step in &steps {
        let mut parents = Vec::new();
        for &c in &context {
            if step.descendant {
                descendants_or_self(dom, c, &mut parents);
            } else {
                parents.push(c);
            }
        }
        let mut next = Vec::new();
        for parent in parents {
            let mut candidates: Vec<NodeId> = dom
                .node(parent)
                .children
                .iter()
                .copied()
                .filter(|&c| match (&dom.node(c).data, &step.name) {
                    (NodeData::Element { .. }, None) => true,
                    (NodeData::Element { tag, .. }, Some(name)) => tag == name,
                    _ => false,
                })
                .collect();
            for pred in &step.predicates {
                candidates = candidates
                    .iter()
                    .enumerate()
                    .filter(|(i, &n)| holds(dom, n, i + 1, pred))
                    .map(|(_, &n)| n)
                    .collect();
            }
            next.extend(candidates);
        }
        next.sort_by_key(|n| order.get(n).copied().unwrap_or(usize::MAX));
        next.dedup();
        context = next;
    }
    Ok(context)
}
