//! `{{name}}` substitution with per-item repetition blocks.
//!
//! `{{#list}} ... {{/list}}` repeats its body once per item of a list binding;
//! inside the block, names resolve against the item first and the global
//! bindings second. A block tag alone on its line takes the whole line with
//! it. There is no other logic.

use std::collections::{BTreeMap, BTreeSet};

use super::{CodegenError, Result};

pub type Item = BTreeMap<String, String>;

/// Values and lists a template is rendered against.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    values: BTreeMap<String, String>,
    lists: BTreeMap<String, Vec<Item>>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: &str, value: impl Into<String>) -> &mut Self {
        self.values.insert(name.to_string(), value.into());
        self
    }

    pub fn set_list(&mut self, name: &str, items: Vec<Item>) -> &mut Self {
        self.lists.insert(name.to_string(), items);
        self
    }

    pub fn value(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(String::as_str)
    }
}

/// Builds a list item from `(field, value)` pairs.
pub fn item<const N: usize>(fields: [(&str, String); N]) -> Item {
    fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Node {
    Text(String),
    Var(String),
    Block(String, Vec<Node>),
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

struct Parser<'a> {
    id: &'a str,
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: String) -> CodegenError {
        let line = self.src[..self.pos.min(self.src.len())].matches('\n').count() + 1;
        CodegenError::TemplateSyntax { template: self.id.to_string(), line, message }
    }

    /// Parses until `{{/close}}` (or the end when `close` is `None`).
    fn parse(&mut self, close: Option<&str>) -> Result<Vec<Node>> {
        let mut nodes = Vec::new();
        loop {
            let Some(off) = self.src[self.pos..].find("{{") else {
                if let Some(name) = close {
                    return Err(self.syntax(format!("unclosed block `{name}`")));
                }
                push_text(&mut nodes, &self.src[self.pos..]);
                return Ok(nodes);
            };
            let start = self.pos + off;
            push_text(&mut nodes, &self.src[self.pos..start]);
            self.pos = start;
            let Some(len) = self.src[start + 2..].find("}}") else {
                return Err(self.syntax("unterminated `{{`".into()));
            };
            let tag = self.src[start + 2..start + 2 + len].trim().to_string();
            let end = start + 2 + len + 2;
            let (sigil, name) = match tag.chars().next() {
                Some(c @ ('#' | '/')) => (Some(c), tag[1..].trim()),
                _ => (None, tag.as_str()),
            };
            if !is_name(name) {
                return Err(self.syntax(format!("bad placeholder `{{{{{tag}}}}}`")));
            }
            self.pos = end;
            if sigil.is_some() {
                self.take_standalone(&mut nodes, start);
            }
            match sigil {
                None => nodes.push(Node::Var(name.to_string())),
                Some('#') => {
                    let body = self.parse(Some(name))?;
                    nodes.push(Node::Block(name.to_string(), body));
                }
                _ => {
                    return match close {
                        Some(open) if open == name => Ok(nodes),
                        Some(open) => Err(self.syntax(format!("`{{{{/{name}}}}}` closes `{open}`"))),
                        None => Err(self.syntax(format!("`{{{{/{name}}}}}` without an open block"))),
                    };
                }
            }
        }
    }

    /// Drops a block tag's line when the tag is the only thing on it.
    fn take_standalone(&mut self, nodes: &mut [Node], tag_start: usize) {
        let line_start = self.src[..tag_start].rfind('\n').map_or(0, |i| i + 1);
        if !self.src[line_start..tag_start].chars().all(|c| c == ' ' || c == '\t') {
            return;
        }
        let rest = &self.src[self.pos..];
        let line_end = rest.find('\n').map_or(rest.len(), |i| i + 1);
        if !rest[..line_end].trim().is_empty() {
            return;
        }
        self.pos += line_end;
        let indent = tag_start - line_start;
        if let Some(Node::Text(t)) = nodes.last_mut() {
            t.truncate(t.len() - indent.min(t.len()));
        }
    }
}

fn push_text(nodes: &mut Vec<Node>, text: &str) {
    if text.is_empty() {
        return;
    }
    if let Some(Node::Text(t)) = nodes.last_mut() {
        t.push_str(text);
    } else {
        nodes.push(Node::Text(text.to_string()));
    }
}

fn parse(id: &str, body: &str) -> Result<Vec<Node>> {
    Parser { id, src: body, pos: 0 }.parse(None)
}

/// Every placeholder, block and item field name used by a template body.
pub fn placeholders(id: &str, body: &str) -> Result<BTreeSet<String>> {
    fn walk(nodes: &[Node], out: &mut BTreeSet<String>) {
        for n in nodes {
            match n {
                Node::Text(_) => {}
                Node::Var(v) => {
                    out.insert(v.clone());
                }
                Node::Block(b, body) => {
                    out.insert(b.clone());
                    walk(body, out);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(&parse(id, body)?, &mut out);
    Ok(out)
}

/// Renders `body`; any name without a binding is an error.
pub fn render(id: &str, body: &str, ctx: &Context) -> Result<String> {
    fn go(id: &str, nodes: &[Node], ctx: &Context, scope: Option<&Item>, out: &mut String) -> Result<()> {
        for n in nodes {
            match n {
                Node::Text(t) => out.push_str(t),
                Node::Var(v) => {
                    let value = scope.and_then(|s| s.get(v)).map(String::as_str).or_else(|| ctx.value(v));
                    let value = value
                        .ok_or_else(|| CodegenError::Unbound { template: id.to_string(), placeholder: v.clone() })?;
                    out.push_str(value);
                }
                Node::Block(b, body) => {
                    if scope.is_some() {
                        return Err(CodegenError::TemplateSyntax {
                            template: id.to_string(),
                            line: 0,
                            message: format!("nested block `{b}`"),
                        });
                    }
                    let items = ctx
                        .lists
                        .get(b)
                        .ok_or_else(|| CodegenError::Unbound { template: id.to_string(), placeholder: b.clone() })?;
                    for it in items {
                        go(id, body, ctx, Some(it), out)?;
                    }
                }
            }
        }
        Ok(())
    }
    let nodes = parse(id, body)?;
    let mut out = String::with_capacity(body.len() * 2);
    go(id, &nodes, ctx, None, &mut out)?;
    if out.contains("{{") {
        return Err(CodegenError::Unresolved(id.to_string()));
    }
    Ok(out)
}
