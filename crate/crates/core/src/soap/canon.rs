//! Deterministic XML form used for byte comparison and as signature input.
//!
//! Rules: no XML declaration, comments or processing instructions;
//! whitespace-only text between child elements dropped (a leaf keeps its
//! text, blank or not); attributes (namespace declarations
//! included) sorted by their written name and double-quoted; every element
//! written as an explicit start/end pair; text and attribute values escaped
//! with a fixed entity set. Prefixes are kept as written.

use super::SoapError;
use crate::xml::{self, escape_attr, escape_text, Element, Node};

pub fn canonicalize(raw: &[u8]) -> Result<Vec<u8>, SoapError> {
    let text = std::str::from_utf8(raw).map_err(|_| SoapError::MalformedXml("input is not UTF-8".into()))?;
    let root = xml::parse(text, false).map_err(|e| SoapError::MalformedXml(e.0))?;
    let mut out = String::with_capacity(raw.len());
    write_element(&root, &mut out);
    Ok(out.into_bytes())
}

fn write_element(el: &Element, out: &mut String) {
    out.push('<');
    out.push_str(&el.raw_name);
    let mut attrs: Vec<_> = el.attrs.iter().collect();
    attrs.sort_by(|a, b| a.raw_name.cmp(&b.raw_name));
    for a in attrs {
        out.push(' ');
        out.push_str(&a.raw_name);
        out.push_str("=\"");
        out.push_str(&escape_attr(&a.value));
        out.push('"');
    }
    out.push('>');
    let has_elements = el.elements().next().is_some();
    for child in &el.children {
        match child {
            Node::Element(e) => write_element(e, out),
            Node::Text(t) if has_elements && t.trim().is_empty() => {}
            Node::Text(t) => out.push_str(&escape_text(t)),
        }
    }
    out.push_str("</");
    out.push_str(&el.raw_name);
    out.push('>');
}
