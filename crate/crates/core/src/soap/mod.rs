//! SOAP 1.1 envelopes: parsing, serialization, faults.
//!
//! Requests are written with the `SOAP-ENV` prefix and no XML declaration,
//! responses and faults with the `soap` prefix and a declaration. Parsing
//! accepts any prefix bound to the SOAP 1.1 envelope namespace.

mod canon;
mod value;

use std::fmt;

pub use canon::canonicalize;
pub use value::{TypedValue, XsdType, XSD_NS};

use crate::xml::{self, escape_attr, escape_text, is_ncname, Element};

pub const SOAP_ENV_NS: &str = "http://schemas.xmlsoap.org/soap/envelope/";
pub const SOAP_ENC_NS: &str = "http://schemas.xmlsoap.org/soap/encoding/";
pub const XSI_NS: &str = "http://www.w3.org/2001/XMLSchema-instance";

const XML_DECL: &str = "<?xml version=\"1.0\" encoding=\"utf-8\" ?>";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SoapError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("not a SOAP 1.1 envelope: {0}")]
    NotSoap(String),
    #[error("unsupported type: {0}")]
    UnsupportedType(String),
}

/// Namespace-qualified element name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QName {
    pub local_name: String,
    pub namespace_uri: String,
}

impl QName {
    pub fn new(local_name: impl Into<String>, namespace_uri: impl Into<String>) -> Result<Self, SoapError> {
        let local_name = local_name.into();
        if !is_ncname(&local_name) {
            return Err(SoapError::MalformedXml(format!("invalid element name `{local_name}`")));
        }
        Ok(QName { local_name, namespace_uri: namespace_uri.into() })
    }
}

impl fmt::Display for QName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.namespace_uri.is_empty() {
            f.write_str(&self.local_name)
        } else {
            write!(f, "{{{}}}{}", self.namespace_uri, self.local_name)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: TypedValue,
}

impl Param {
    pub fn new(name: impl Into<String>, value: TypedValue) -> Self {
        Param { name: name.into(), value }
    }
}

/// An rpc-style method call.
///
/// `id` and `root` carry the multi-ref attributes (`id`, `SOAP-ENC:root`)
/// opaquely; references between body entries are not resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct SoapCall {
    pub operation: QName,
    pub id: Option<String>,
    pub root: Option<String>,
    pub params: Vec<Param>,
}

impl SoapCall {
    pub fn new(operation: QName, params: Vec<Param>) -> Self {
        SoapCall { operation, id: None, root: None, params }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoapResponseBody {
    pub operation: QName,
    pub result_name: String,
    pub result: TypedValue,
}

impl SoapResponseBody {
    /// Response to `method`: element `<method>Response` in `namespace`
    /// wrapping `<method>Result`.
    pub fn new(method: &str, namespace: &str, result: TypedValue) -> Self {
        SoapResponseBody {
            operation: QName { local_name: format!("{method}Response"), namespace_uri: namespace.to_string() },
            result_name: format!("{method}Result"),
            result,
        }
    }

    pub fn method_name(&self) -> &str {
        self.operation.local_name.strip_suffix("Response").unwrap_or(&self.operation.local_name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultCode {
    VersionMismatch,
    MustUnderstand,
    Client,
    Server,
}

impl FaultCode {
    pub const ALL: [FaultCode; 4] =
        [FaultCode::VersionMismatch, FaultCode::MustUnderstand, FaultCode::Client, FaultCode::Server];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultCode::VersionMismatch => "VersionMismatch",
            FaultCode::MustUnderstand => "MustUnderstand",
            FaultCode::Client => "Client",
            FaultCode::Server => "Server",
        }
    }

    fn from_wire(s: &str) -> Option<FaultCode> {
        let s = s.trim();
        let local = s.rsplit_once(':').map_or(s, |(_, l)| l);
        // Dotted subcodes such as `Client.Authentication` keep their class.
        let class = local.split('.').next().unwrap_or(local);
        FaultCode::ALL.into_iter().find(|c| c.as_str() == class)
    }
}

impl fmt::Display for FaultCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoapFault {
    pub code: FaultCode,
    pub message: String,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Call(SoapCall),
    Response(SoapResponseBody),
    Fault(SoapFault),
}

/// A header entry kept as the verbatim XML it arrived as.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderEntry {
    pub name: QName,
    pub xml: String,
}

impl HeaderEntry {
    /// Wrap a self-contained XML element. Prefixes used inside `xml` must be
    /// declared within it.
    pub fn from_xml(xml: impl Into<String>) -> Result<Self, SoapError> {
        let xml = xml.into();
        let root = xml::parse(&xml, true).map_err(|e| SoapError::MalformedXml(e.0))?;
        if xml.trim_start().starts_with("<?") || root.span != (0..xml.len()) {
            return Err(SoapError::MalformedXml("header entry must be a single element".into()));
        }
        Ok(HeaderEntry { name: QName { local_name: root.local, namespace_uri: root.namespace }, xml })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoapEnvelope {
    pub headers: Vec<HeaderEntry>,
    pub body: Body,
    pub encoding_style: Option<String>,
}

impl SoapEnvelope {
    pub fn new(body: Body) -> Self {
        SoapEnvelope { headers: Vec::new(), body, encoding_style: None }
    }

    pub fn header(&self, namespace: &str, local: &str) -> Option<&HeaderEntry> {
        self.headers
            .iter()
            .find(|h| h.name.namespace_uri == namespace && h.name.local_name == local)
    }

    pub fn fault(&self) -> Option<&SoapFault> {
        match &self.body {
            Body::Fault(f) => Some(f),
            _ => None,
        }
    }
}

pub fn make_fault(code: FaultCode, message: impl Into<String>, detail: Option<String>) -> SoapEnvelope {
    SoapEnvelope::new(Body::Fault(SoapFault { code, message: message.into(), detail }))
}

fn malformed(msg: impl Into<String>) -> SoapError {
    SoapError::MalformedXml(msg.into())
}

fn not_soap(msg: impl Into<String>) -> SoapError {
    SoapError::NotSoap(msg.into())
}

pub fn parse_envelope(raw: &[u8]) -> Result<SoapEnvelope, SoapError> {
    let text = std::str::from_utf8(raw).map_err(|_| malformed("message is not UTF-8"))?;
    let root = xml::parse(text, true).map_err(|e| SoapError::MalformedXml(e.0))?;
    if root.local != "Envelope" {
        return Err(not_soap(format!("root element is `{}`", root.raw_name)));
    }
    if root.namespace != SOAP_ENV_NS {
        return Err(not_soap(format!("envelope namespace `{}`", root.namespace)));
    }
    if root.has_significant_text() {
        return Err(malformed("character data directly inside Envelope"));
    }

    let mut children = root.elements();
    let mut first = children.next();
    let mut headers = Vec::new();
    if let Some(h) = first.filter(|e| e.is(SOAP_ENV_NS, "Header")) {
        for entry in h.elements() {
            headers.push(HeaderEntry {
                name: QName { local_name: entry.local.clone(), namespace_uri: entry.namespace.clone() },
                xml: text[entry.span.clone()].to_string(),
            });
        }
        first = children.next();
    }
    let body_el = match first {
        Some(b) if b.is(SOAP_ENV_NS, "Body") => b,
        Some(other) => return Err(not_soap(format!("expected Body, found `{}`", other.raw_name))),
        None => return Err(not_soap("missing Body")),
    };
    if let Some(extra) = children.next() {
        return Err(not_soap(format!("unexpected `{}` after Body", extra.raw_name)));
    }

    let encoding_style = body_el
        .attr(SOAP_ENV_NS, "encodingStyle")
        .or_else(|| root.attr(SOAP_ENV_NS, "encodingStyle"))
        .map(str::to_string);

    if body_el.has_significant_text() {
        return Err(malformed("character data directly inside Body"));
    }
    let mut entries = body_el.elements();
    let entry = entries.next().ok_or_else(|| malformed("empty body"))?;
    if entries.next().is_some() {
        return Err(SoapError::UnsupportedType(
            "multiple body entries (multi-ref encoding is not supported)".into(),
        ));
    }

    let body = if entry.is(SOAP_ENV_NS, "Fault") {
        Body::Fault(parse_fault(entry)?)
    } else if let Some(resp) = as_response(entry)? {
        Body::Response(resp)
    } else {
        Body::Call(parse_call(entry)?)
    };

    Ok(SoapEnvelope { headers, body, encoding_style })
}

fn parse_fault(el: &Element) -> Result<SoapFault, SoapError> {
    let code_el = el.child("", "faultcode").ok_or_else(|| not_soap("fault without faultcode"))?;
    let code = FaultCode::from_wire(&code_el.text())
        .ok_or_else(|| not_soap(format!("unknown faultcode `{}`", code_el.text().trim())))?;
    let message = el.child("", "faultstring").map(|e| e.text()).unwrap_or_default();
    let detail = el.child("", "detail").map(|e| e.text());
    Ok(SoapFault { code, message, detail })
}

/// `<xResponse><xResult>..</xResult></xResponse>` is a response; anything
/// else is treated as a call.
fn as_response(el: &Element) -> Result<Option<SoapResponseBody>, SoapError> {
    let Some(stem) = el.local.strip_suffix("Response") else {
        return Ok(None);
    };
    let mut kids = el.elements();
    let (Some(result_el), None) = (kids.next(), kids.next()) else {
        return Ok(None);
    };
    if result_el.local != format!("{stem}Result") {
        return Ok(None);
    }
    if el.has_significant_text() {
        return Err(malformed("character data around response result"));
    }
    Ok(Some(SoapResponseBody {
        operation: QName { local_name: el.local.clone(), namespace_uri: el.namespace.clone() },
        result_name: result_el.local.clone(),
        result: parse_value(result_el)?,
    }))
}

fn parse_call(el: &Element) -> Result<SoapCall, SoapError> {
    if el.has_significant_text() {
        return Err(malformed("character data between call parameters"));
    }
    let mut params: Vec<Param> = Vec::new();
    for p in el.elements() {
        if params.iter().any(|q| q.name == p.local) {
            return Err(malformed(format!("duplicate parameter `{}`", p.local)));
        }
        params.push(Param { name: p.local.clone(), value: parse_value(p)? });
    }
    Ok(SoapCall {
        operation: QName { local_name: el.local.clone(), namespace_uri: el.namespace.clone() },
        id: el.attr("", "id").map(str::to_string),
        root: el.attr(SOAP_ENC_NS, "root").map(str::to_string),
        params,
    })
}

fn parse_value(el: &Element) -> Result<TypedValue, SoapError> {
    if el.attr("", "href").is_some() {
        return Err(SoapError::UnsupportedType(format!(
            "`{}` is a multi-ref reference; only inline values are supported",
            el.local
        )));
    }
    if el.elements().next().is_some() {
        return Err(SoapError::UnsupportedType(format!("`{}` has a compound value", el.local)));
    }
    let ty = match el.attr(XSI_NS, "type") {
        // Untyped values are read as strings.
        None => XsdType::String,
        Some(raw) => {
            let (ns, local) = el
                .resolve_qname_value(raw)
                .ok_or_else(|| SoapError::UnsupportedType(format!("unresolvable xsi:type `{raw}`")))?;
            if ns != XSD_NS {
                return Err(SoapError::UnsupportedType(format!("xsi:type `{raw}`")));
            }
            XsdType::from_schema_name(&local)
                .ok_or_else(|| SoapError::UnsupportedType(format!("xsi:type `{raw}`")))?
        }
    };
    TypedValue::parse(ty, &el.text()).map_err(|e| malformed(format!("parameter `{}`: {e}", el.local)))
}

pub fn serialize_envelope(env: &SoapEnvelope) -> Vec<u8> {
    let request = matches!(env.body, Body::Call(_));
    let p = if request { "SOAP-ENV" } else { "soap" };
    let mut out = String::new();
    if !request {
        out.push_str(XML_DECL);
    }
    out.push_str(&format!(
        "<{p}:Envelope xmlns:xsi=\"{XSI_NS}\" xmlns:xsd=\"{XSD_NS}\""
    ));
    if request {
        out.push_str(&format!(" xmlns:SOAP-ENC=\"{SOAP_ENC_NS}\""));
    }
    out.push_str(&format!(" xmlns:{p}=\"{SOAP_ENV_NS}\">"));

    if !env.headers.is_empty() {
        out.push_str(&format!("<{p}:Header>"));
        for h in &env.headers {
            out.push_str(&h.xml);
        }
        out.push_str(&format!("</{p}:Header>"));
    }

    out.push_str(&format!("<{p}:Body"));
    if let Some(style) = &env.encoding_style {
        out.push_str(&format!(" {p}:encodingStyle=\"{}\"", escape_attr(style)));
    }
    out.push('>');

    match &env.body {
        Body::Call(call) => {
            out.push('<');
            out.push_str(&call.operation.local_name);
            push_default_ns(&mut out, &call.operation.namespace_uri);
            if let Some(id) = &call.id {
                out.push_str(&format!(" id=\"{}\"", escape_attr(id)));
            }
            if let Some(root) = &call.root {
                out.push_str(&format!(" SOAP-ENC:root=\"{}\"", escape_attr(root)));
            }
            out.push('>');
            for param in &call.params {
                push_value(&mut out, &param.name, &param.value, true);
            }
            out.push_str(&format!("</{}>", call.operation.local_name));
        }
        Body::Response(resp) => {
            out.push('<');
            out.push_str(&resp.operation.local_name);
            push_default_ns(&mut out, &resp.operation.namespace_uri);
            out.push('>');
            push_value(&mut out, &resp.result_name, &resp.result, false);
            out.push_str(&format!("</{}>", resp.operation.local_name));
        }
        Body::Fault(f) => {
            out.push_str(&format!("<{p}:Fault><faultcode>{}</faultcode>", f.code));
            out.push_str(&format!("<faultstring>{}</faultstring>", escape_text(&f.message)));
            if let Some(d) = &f.detail {
                out.push_str(&format!("<detail>{}</detail>", escape_text(d)));
            }
            out.push_str(&format!("</{p}:Fault>"));
        }
    }

    out.push_str(&format!("</{p}:Body></{p}:Envelope>"));
    out.into_bytes()
}

fn push_default_ns(out: &mut String, ns: &str) {
    if !ns.is_empty() {
        out.push_str(&format!(" xmlns=\"{}\"", escape_attr(ns)));
    }
}

fn push_value(out: &mut String, name: &str, value: &TypedValue, unqualified: bool) {
    out.push('<');
    out.push_str(name);
    if unqualified {
        out.push_str(" xmlns=\"\"");
    }
    out.push_str(&format!(" xsi:type=\"xsd:{}\">", value.xsd_type()));
    out.push_str(&escape_text(&value.lexical()));
    out.push_str(&format!("</{name}>"));
}

/// Canonical bytes of the `Body` element of a serialized envelope; the input
/// to message signatures.
pub fn canonical_body(raw: &[u8]) -> Result<Vec<u8>, SoapError> {
    let text = std::str::from_utf8(raw).map_err(|_| malformed("message is not UTF-8"))?;
    let root = xml::parse(text, true).map_err(|e| SoapError::MalformedXml(e.0))?;
    let body = root
        .child(SOAP_ENV_NS, "Body")
        .filter(|_| root.is(SOAP_ENV_NS, "Envelope"))
        .ok_or_else(|| not_soap("missing Body"))?;
    canonicalize(text[body.span.clone()].as_bytes())
}

/// Cheap check used by request classification: is the document's root
/// element a SOAP 1.1 `Envelope`? Does not validate the rest.
pub fn looks_like_envelope(raw: &[u8]) -> bool {
    use quick_xml::events::Event;
    use quick_xml::name::ResolveResult;
    use quick_xml::NsReader;

    let Ok(text) = std::str::from_utf8(raw) else {
        return false;
    };
    let mut reader = NsReader::from_str(text);
    loop {
        match reader.read_resolved_event() {
            Ok((ResolveResult::Bound(ns), Event::Start(e) | Event::Empty(e))) => {
                return ns.as_ref() == SOAP_ENV_NS.as_bytes() && e.local_name().as_ref() == b"Envelope";
            }
            Ok((_, Event::Start(_) | Event::Empty(_))) => return false,
            Ok((_, Event::Eof)) | Err(_) => return false,
            Ok((_, Event::Text(t))) if !t.iter().all(u8::is_ascii_whitespace) => return false,
            Ok(_) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NOTE_REQUEST: &str = include_str!("../../tests/fixtures/fig13_request.xml");

    #[test]
    fn parses_note_request() {
        let env = parse_envelope(NOTE_REQUEST.as_bytes()).unwrap();
        let Body::Call(call) = &env.body else { panic!("not a call") };
        assert_eq!(call.operation.local_name, "obterNotas");
        assert_eq!(call.operation.namespace_uri, "http://localhost:5000/CadastroEscolar.jws");
        assert_eq!(call.id.as_deref(), Some("o0"));
        assert_eq!(call.root.as_deref(), Some("1"));
        assert_eq!(
            call.params,
            vec![
                Param::new("codAluno", TypedValue::string("A001")),
                Param::new("codDisciplina", TypedValue::string("D002")),
            ]
        );
        assert_eq!(env.encoding_style.as_deref(), Some(SOAP_ENC_NS));
        assert!(looks_like_envelope(NOTE_REQUEST.as_bytes()));
    }

    #[test]
    fn empty_body_is_rejected() {
        let raw = format!("<e:Envelope xmlns:e=\"{SOAP_ENV_NS}\"><e:Body/></e:Envelope>");
        assert_eq!(parse_envelope(raw.as_bytes()), Err(malformed("empty body")));
    }

    #[test]
    fn error_taxonomy() {
        assert!(matches!(parse_envelope(b"<a><b></a>"), Err(SoapError::MalformedXml(_))));
        assert!(matches!(parse_envelope(b"<a/>"), Err(SoapError::NotSoap(_))));
        let v12 = "<e:Envelope xmlns:e=\"http://www.w3.org/2003/05/soap-envelope\"><e:Body><x/></e:Body></e:Envelope>";
        assert!(matches!(parse_envelope(v12.as_bytes()), Err(SoapError::NotSoap(_))));
        let bad_type = format!(
            "<e:Envelope xmlns:e=\"{SOAP_ENV_NS}\" xmlns:xsi=\"{XSI_NS}\" xmlns:xsd=\"{XSD_NS}\"><e:Body><op><a xsi:type=\"xsd:long\">1</a></op></e:Body></e:Envelope>"
        );
        assert!(matches!(parse_envelope(bad_type.as_bytes()), Err(SoapError::UnsupportedType(_))));
        let href = format!("<e:Envelope xmlns:e=\"{SOAP_ENV_NS}\"><e:Body><op><a href=\"#id1\"/></op></e:Body></e:Envelope>");
        assert!(matches!(parse_envelope(href.as_bytes()), Err(SoapError::UnsupportedType(_))));
    }

    #[test]
    fn fault_rendering() {
        let env = make_fault(FaultCode::Client, "unknown method: foo", None);
        let xml = String::from_utf8(serialize_envelope(&env)).unwrap();
        assert!(xml.contains("<faultcode>Client</faultcode>"));
        assert!(xml.starts_with(XML_DECL));
        assert_eq!(parse_envelope(xml.as_bytes()).unwrap(), env);

        let env = make_fault(FaultCode::Server, "handler panic", Some("stack id 7".into()));
        assert_eq!(env.fault().unwrap().detail.as_deref(), Some("stack id 7"));
        assert_eq!(parse_envelope(&serialize_envelope(&env)).unwrap(), env);
    }

    #[test]
    fn prefixed_faultcodes_are_accepted() {
        let raw = format!(
            "<s:Envelope xmlns:s=\"{SOAP_ENV_NS}\"><s:Body><s:Fault><faultcode>s:Server.Busy</faultcode><faultstring>x</faultstring></s:Fault></s:Body></s:Envelope>"
        );
        assert_eq!(parse_envelope(raw.as_bytes()).unwrap().fault().unwrap().code, FaultCode::Server);
    }

    #[test]
    fn requests_and_responses_use_their_prefixes() {
        let call = SoapEnvelope::new(Body::Call(SoapCall::new(QName::new("op", "urn:x").unwrap(), vec![])));
        let xml = String::from_utf8(serialize_envelope(&call)).unwrap();
        assert!(xml.starts_with("<SOAP-ENV:Envelope"));
        let resp = SoapEnvelope::new(Body::Response(SoapResponseBody::new("op", "urn:x", TypedValue::Int(3))));
        let xml = String::from_utf8(serialize_envelope(&resp)).unwrap();
        assert!(xml.starts_with("<?xml version=\"1.0\" encoding=\"utf-8\" ?><soap:Envelope"));
        assert!(xml.contains("<opResponse xmlns=\"urn:x\"><opResult xsi:type=\"xsd:int\">3</opResult></opResponse>"));
    }

    #[test]
    fn header_entries_survive_verbatim() {
        let entry = HeaderEntry::from_xml("<h:Token xmlns:h=\"urn:h\"  a='1'>x &amp; y</h:Token>").unwrap();
        assert_eq!(entry.name, QName::new("Token", "urn:h").unwrap());
        let mut env = SoapEnvelope::new(Body::Call(SoapCall::new(QName::new("op", "").unwrap(), vec![])));
        env.headers.push(entry.clone());
        let back = parse_envelope(&serialize_envelope(&env)).unwrap();
        assert_eq!(back.headers, vec![entry]);
    }

    #[test]
    fn body_signature_input_ignores_headers() {
        let mut env = SoapEnvelope::new(Body::Response(SoapResponseBody::new("op", "urn:x", TypedValue::string("v"))));
        let plain = canonical_body(&serialize_envelope(&env)).unwrap();
        env.headers.push(HeaderEntry::from_xml("<h xmlns=\"urn:h\">1</h>").unwrap());
        assert_eq!(canonical_body(&serialize_envelope(&env)).unwrap(), plain);
    }
}
