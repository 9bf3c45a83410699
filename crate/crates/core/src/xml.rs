//! Minimal XML tree built on quick-xml, shared by the SOAP codec, the WSDL
//! reader and canonicalization.
//!
//! Elements keep the byte span they occupied in the source so callers can
//! recover verbatim fragments (SOAP header entries, the signed Body).

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

pub(crate) const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct XmlError(pub String);

impl XmlError {
    fn new(msg: impl Into<String>) -> Self {
        XmlError(msg.into())
    }
}

type Scope = Arc<BTreeMap<String, String>>;

#[derive(Debug, Clone)]
pub(crate) struct Attr {
    /// Name as written, e.g. `xsi:type`.
    pub raw_name: String,
    pub local: String,
    /// Resolved namespace; unprefixed attributes have none.
    pub namespace: String,
    pub value: String,
}

impl Attr {
    pub fn is_ns_decl(&self) -> bool {
        self.raw_name == "xmlns" || self.raw_name.starts_with("xmlns:")
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Element(Element),
    Text(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Element {
    pub raw_name: String,
    pub local: String,
    pub namespace: String,
    pub attrs: Vec<Attr>,
    pub children: Vec<Node>,
    pub span: Range<usize>,
    scope: Scope,
}

impl Element {
    pub fn is(&self, namespace: &str, local: &str) -> bool {
        self.namespace == namespace && self.local == local
    }

    pub fn attr(&self, namespace: &str, local: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|a| !a.is_ns_decl() && a.namespace == namespace && a.local == local)
            .map(|a| a.value.as_str())
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(|n| match n {
            Node::Element(e) => Some(e),
            Node::Text(_) => None,
        })
    }

    pub fn child(&self, namespace: &str, local: &str) -> Option<&Element> {
        self.elements().find(|e| e.is(namespace, local))
    }

    /// Concatenated character data of the direct children.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for n in &self.children {
            if let Node::Text(t) = n {
                out.push_str(t);
            }
        }
        out
    }

    pub fn has_significant_text(&self) -> bool {
        self.children
            .iter()
            .any(|n| matches!(n, Node::Text(t) if !t.trim().is_empty()))
    }

    /// Resolve a `prefix:local` value (such as an `xsi:type`) against the
    /// namespaces in scope at this element.
    pub fn resolve_qname_value(&self, value: &str) -> Option<(String, String)> {
        let value = value.trim();
        let (prefix, local) = match value.split_once(':') {
            Some((p, l)) => (p, l),
            None => ("", value),
        };
        let ns = self.scope.get(prefix)?;
        Some((ns.clone(), local.to_string()))
    }
}

fn split_name(raw: &str) -> (&str, &str) {
    match raw.split_once(':') {
        Some((p, l)) => (p, l),
        None => ("", raw),
    }
}

fn utf8(bytes: &[u8]) -> Result<&str, XmlError> {
    std::str::from_utf8(bytes).map_err(|_| XmlError::new("invalid UTF-8 in markup"))
}

fn open_element(
    start: &BytesStart<'_>,
    parent_scope: &Scope,
    resolve: bool,
    span_start: usize,
) -> Result<Element, XmlError> {
    let raw_name = utf8(start.name().as_ref())?.to_string();
    let mut attrs = Vec::new();
    let mut decls: Vec<(String, String)> = Vec::new();
    for a in start.attributes() {
        let a = a.map_err(|e| XmlError::new(format!("bad attribute: {e}")))?;
        let name = utf8(a.key.as_ref())?.to_string();
        let value = a
            .unescape_value()
            .map_err(|e| XmlError::new(format!("bad attribute value: {e}")))?
            .into_owned();
        if name == "xmlns" {
            decls.push((String::new(), value.clone()));
        } else if let Some(p) = name.strip_prefix("xmlns:") {
            if p.is_empty() || value.is_empty() {
                return Err(XmlError::new("invalid namespace declaration"));
            }
            decls.push((p.to_string(), value.clone()));
        }
        attrs.push(Attr {
            raw_name: name,
            local: String::new(),
            namespace: String::new(),
            value,
        });
    }

    let scope = if decls.is_empty() {
        parent_scope.clone()
    } else {
        let mut map = (**parent_scope).clone();
        for (p, v) in decls {
            map.insert(p, v);
        }
        Arc::new(map)
    };

    let (prefix, local) = split_name(&raw_name);
    if local.is_empty() {
        return Err(XmlError::new("empty element name"));
    }
    let namespace = if resolve {
        match scope.get(prefix) {
            Some(ns) => ns.clone(),
            None if prefix.is_empty() => String::new(),
            None => return Err(XmlError::new(format!("unbound prefix `{prefix}`"))),
        }
    } else {
        String::new()
    };

    for a in &mut attrs {
        let (p, l) = split_name(&a.raw_name);
        a.local = l.to_string();
        if resolve && !a.is_ns_decl() && !p.is_empty() {
            a.namespace = scope
                .get(p)
                .cloned()
                .ok_or_else(|| XmlError::new(format!("unbound prefix `{p}`")))?;
        }
    }

    Ok(Element {
        local: local.to_string(),
        raw_name,
        namespace,
        attrs,
        children: Vec::new(),
        span: span_start..span_start,
        scope,
    })
}

/// Parse a complete document into its root element.
///
/// With `resolve` set, element and attribute prefixes must be bound; without
/// it prefixes are kept literally (used for fragments and canonicalization).
pub(crate) fn parse(text: &str, resolve: bool) -> Result<Element, XmlError> {
    let mut reader = Reader::from_str(text);
    let config = reader.config_mut();
    config.trim_text(false);
    config.check_end_names = true;
    config.expand_empty_elements = false;

    let mut base = BTreeMap::new();
    base.insert("xml".to_string(), XML_NS.to_string());
    let base: Scope = Arc::new(base);

    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;

    loop {
        let before = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| XmlError::new(format!("not well-formed: {e}")))?;
        let after = reader.buffer_position() as usize;
        match event {
            Event::Start(_) | Event::Empty(_) if root.is_some() => {
                return Err(XmlError::new("content after the root element"));
            }
            Event::Start(s) => {
                let scope = stack.last().map(|e| e.scope.clone()).unwrap_or(base.clone());
                let el = open_element(&s, &scope, resolve, before)?;
                stack.push(el);
            }
            Event::Empty(s) => {
                let scope = stack.last().map(|e| e.scope.clone()).unwrap_or(base.clone());
                let mut el = open_element(&s, &scope, resolve, before)?;
                el.span = before..after;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(Node::Element(el)),
                    None => root = Some(el),
                }
            }
            Event::End(_) => {
                let mut el = stack
                    .pop()
                    .ok_or_else(|| XmlError::new("unexpected closing tag"))?;
                el.span.end = after;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(Node::Element(el)),
                    None => root = Some(el),
                }
            }
            Event::Text(t) => {
                let s = t
                    .unescape()
                    .map_err(|e| XmlError::new(format!("bad character data: {e}")))?;
                match stack.last_mut() {
                    Some(parent) => push_text(parent, &s),
                    None if s.trim().is_empty() => {}
                    None => return Err(XmlError::new("text outside the root element")),
                }
            }
            Event::CData(c) => {
                let s = utf8(&c)?.to_string();
                match stack.last_mut() {
                    Some(parent) => push_text(parent, &s),
                    None => return Err(XmlError::new("CDATA outside the root element")),
                }
            }
            Event::DocType(_) => return Err(XmlError::new("DTDs are not allowed")),
            Event::Decl(d) => {
                if before != 0 && !text[..before].trim().is_empty() {
                    return Err(XmlError::new("misplaced XML declaration"));
                }
                if let Some(Ok(enc)) = d.encoding() {
                    if !enc.eq_ignore_ascii_case(b"utf-8") {
                        return Err(XmlError::new("only UTF-8 documents are supported"));
                    }
                }
            }
            Event::Comment(_) | Event::PI(_) => {}
            Event::Eof => break,
        }
    }

    if !stack.is_empty() {
        return Err(XmlError::new("unexpected end of document"));
    }
    root.ok_or_else(|| XmlError::new("no root element"))
}

fn push_text(parent: &mut Element, s: &str) {
    if let Some(Node::Text(prev)) = parent.children.last_mut() {
        prev.push_str(s);
    } else {
        parent.children.push(Node::Text(s.to_string()));
    }
}

/// Escape character data. Characters XML 1.0 cannot carry at all become
/// U+FFFD.
pub(crate) fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c if !is_xml_char(c) => out.push(char::REPLACEMENT_CHARACTER),
            _ => out.push(c),
        }
    }
    out
}

pub(crate) fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c if !is_xml_char(c) => out.push(char::REPLACEMENT_CHARACTER),
            _ => out.push(c),
        }
    }
    out
}

/// True for characters allowed in XML 1.0 documents.
pub(crate) fn is_xml_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..='\u{10FFFF}')
}

/// True for names usable as element or attribute local names.
pub(crate) fn is_ncname(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}
