//! WSDL 1.1 (rpc/encoded) generation from a service descriptor, and the
//! reader for the same subset.
//!
//! Per method `m` the document carries messages `mRequest` (one part per
//! parameter) and `mResponse` (one part `mResult`), a portType operation
//! and a binding operation whose output namespace is the descriptor's
//! response namespace.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::service::{MethodSignature, ParameterSpec, ServiceDescriptor};
use crate::soap::{XsdType, SOAP_ENC_NS, XSD_NS};
use crate::xml::{self, escape_attr, Element};

pub const WSDL_NS: &str = "http://schemas.xmlsoap.org/wsdl/";
pub const WSDL_SOAP_NS: &str = "http://schemas.xmlsoap.org/wsdl/soap/";
pub const SOAP_HTTP_TRANSPORT: &str = "http://schemas.xmlsoap.org/soap/http";

#[derive(Debug, thiserror::Error)]
pub enum WsdlError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("unsupported WSDL: {0}")]
    UnsupportedWsdl(String),
    #[error("I/O failure: {0}")]
    IoFailure(#[from] io::Error),
}

fn unsupported(msg: impl Into<String>) -> WsdlError {
    WsdlError::UnsupportedWsdl(msg.into())
}

/// Generated WSDL text with the descriptor it encodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WsdlDocument {
    pub xml_text: String,
    pub descriptor: ServiceDescriptor,
}

/// `http://<host>:<port><endpointPath>`
pub fn endpoint_url(host: &str, port: u16, desc: &ServiceDescriptor) -> String {
    format!("http://{host}:{port}{}", desc.endpoint_path)
}

pub fn generate_wsdl(desc: &ServiceDescriptor, endpoint_url: &str) -> WsdlDocument {
    let name = &desc.service_name;
    let tns = escape_attr(&desc.namespace_uri);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n");
    out.push_str(&format!(
        "<wsdl:definitions name=\"{name}\" targetNamespace=\"{tns}\" xmlns:tns=\"{tns}\" \
         xmlns:wsdl=\"{WSDL_NS}\" xmlns:soap=\"{WSDL_SOAP_NS}\" xmlns:xsd=\"{XSD_NS}\" \
         xmlns:soapenc=\"{SOAP_ENC_NS}\">\n"
    ));

    for m in &desc.methods {
        out.push_str(&format!("  <wsdl:message name=\"{}Request\">\n", m.name));
        for p in &m.params {
            out.push_str(&format!("    <wsdl:part name=\"{}\" type=\"xsd:{}\"/>\n", p.name, p.xsd_type));
        }
        out.push_str("  </wsdl:message>\n");
        out.push_str(&format!(
            "  <wsdl:message name=\"{0}Response\">\n    <wsdl:part name=\"{0}Result\" type=\"xsd:{1}\"/>\n  </wsdl:message>\n",
            m.name, m.return_type
        ));
    }

    out.push_str(&format!("  <wsdl:portType name=\"{name}PortType\">\n"));
    for m in &desc.methods {
        let order: Vec<&str> = m.params.iter().map(|p| p.name.as_str()).collect();
        out.push_str(&format!("    <wsdl:operation name=\"{}\"", m.name));
        if !order.is_empty() {
            out.push_str(&format!(" parameterOrder=\"{}\"", order.join(" ")));
        }
        out.push_str(&format!(
            ">\n      <wsdl:input message=\"tns:{0}Request\"/>\n      <wsdl:output message=\"tns:{0}Response\"/>\n    </wsdl:operation>\n",
            m.name
        ));
    }
    out.push_str("  </wsdl:portType>\n");

    out.push_str(&format!("  <wsdl:binding name=\"{name}SoapBinding\" type=\"tns:{name}PortType\">\n"));
    out.push_str(&format!("    <soap:binding style=\"rpc\" transport=\"{SOAP_HTTP_TRANSPORT}\"/>\n"));
    let rns = escape_attr(&desc.response_namespace_uri);
    for m in &desc.methods {
        out.push_str(&format!("    <wsdl:operation name=\"{}\">\n", m.name));
        out.push_str("      <soap:operation soapAction=\"\"/>\n");
        out.push_str(&format!(
            "      <wsdl:input>\n        <soap:body use=\"encoded\" encodingStyle=\"{SOAP_ENC_NS}\" namespace=\"{tns}\"/>\n      </wsdl:input>\n"
        ));
        out.push_str(&format!(
            "      <wsdl:output>\n        <soap:body use=\"encoded\" encodingStyle=\"{SOAP_ENC_NS}\" namespace=\"{rns}\"/>\n      </wsdl:output>\n"
        ));
        out.push_str("    </wsdl:operation>\n");
    }
    out.push_str("  </wsdl:binding>\n");

    out.push_str(&format!(
        "  <wsdl:service name=\"{name}\">\n    <wsdl:port name=\"{name}Port\" binding=\"tns:{name}SoapBinding\">\n      <soap:address location=\"{}\"/>\n    </wsdl:port>\n  </wsdl:service>\n",
        escape_attr(endpoint_url)
    ));
    out.push_str("</wsdl:definitions>\n");

    WsdlDocument { xml_text: out, descriptor: desc.clone() }
}

fn local_ref(el: &Element, value: &str, expected_ns: &str) -> Result<String, WsdlError> {
    let (ns, local) = el
        .resolve_qname_value(value)
        .ok_or_else(|| unsupported(format!("unresolvable reference `{value}`")))?;
    if ns != expected_ns {
        return Err(unsupported(format!("reference `{value}` outside the expected namespace")));
    }
    Ok(local)
}

fn required<'a>(el: &'a Element, attr: &str) -> Result<&'a str, WsdlError> {
    el.attr("", attr)
        .ok_or_else(|| unsupported(format!("`{}` without `{attr}`", el.raw_name)))
}

/// Read a WSDL document in the generated subset back into a descriptor.
/// Host-local flags (`securityEnabled`, `exclusiveExecution`) come back false.
pub fn parse_wsdl(raw: &[u8]) -> Result<ServiceDescriptor, WsdlError> {
    let text = std::str::from_utf8(raw).map_err(|_| WsdlError::MalformedXml("not UTF-8".into()))?;
    let root = xml::parse(text, true).map_err(|e| WsdlError::MalformedXml(e.0))?;
    if !root.is(WSDL_NS, "definitions") {
        return Err(unsupported("root is not wsdl:definitions"));
    }
    let target_ns = required(&root, "targetNamespace")?.to_string();

    // Messages by name: ordered (part name, type) lists.
    let mut messages: Vec<(String, Vec<(String, XsdType)>)> = Vec::new();
    for msg in root.elements().filter(|e| e.is(WSDL_NS, "message")) {
        let mut parts = Vec::new();
        for part in msg.elements().filter(|e| e.is(WSDL_NS, "part")) {
            let pname = required(part, "name")?.to_string();
            let ty = match part.attr("", "type") {
                Some(t) => t,
                None => return Err(unsupported(format!("part `{pname}` is not typed (document style?)"))),
            };
            let local = local_ref(part, ty, XSD_NS)?;
            let ty = XsdType::from_schema_name(&local)
                .ok_or_else(|| unsupported(format!("part type `{ty}`")))?;
            parts.push((pname, ty));
        }
        messages.push((required(msg, "name")?.to_string(), parts));
    }
    let message = |el: &Element, which: &str| -> Result<&Vec<(String, XsdType)>, WsdlError> {
        let io = el
            .child(WSDL_NS, which)
            .ok_or_else(|| unsupported(format!("operation without {which}")))?;
        let name = local_ref(io, required(io, "message")?, &target_ns)?;
        messages
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, p)| p)
            .ok_or_else(|| unsupported(format!("undefined message `{name}`")))
    };

    let mut port_types = root.elements().filter(|e| e.is(WSDL_NS, "portType"));
    let port_type = port_types.next().ok_or_else(|| unsupported("no portType"))?;
    if port_types.next().is_some() {
        return Err(unsupported("more than one portType"));
    }

    let mut methods = Vec::new();
    for op in port_type.elements().filter(|e| e.is(WSDL_NS, "operation")) {
        let name = required(op, "name")?.to_string();
        let input = message(op, "input")?;
        let output = message(op, "output")?;
        let mut params: Vec<ParameterSpec> =
            input.iter().map(|(n, t)| ParameterSpec::new(n.clone(), *t)).collect();
        if let Some(order) = op.attr("", "parameterOrder") {
            let order: Vec<&str> = order.split_whitespace().collect();
            if order.len() != params.len() {
                return Err(unsupported(format!("parameterOrder of `{name}` does not match its message")));
            }
            let mut sorted = Vec::with_capacity(params.len());
            for o in order {
                let p = params
                    .iter()
                    .find(|p| p.name == o)
                    .ok_or_else(|| unsupported(format!("parameterOrder names unknown part `{o}`")))?;
                sorted.push(p.clone());
            }
            params = sorted;
        }
        let return_type = match output.as_slice() {
            [(_, t)] => *t,
            _ => return Err(unsupported(format!("operation `{name}` must have exactly one output part"))),
        };
        methods.push(MethodSignature { name, params, return_type });
    }
    if methods.is_empty() {
        return Err(unsupported("empty portType"));
    }

    let binding = root
        .elements()
        .find(|e| e.is(WSDL_NS, "binding"))
        .ok_or_else(|| unsupported("no binding"))?;
    let soap_binding = binding
        .child(WSDL_SOAP_NS, "binding")
        .ok_or_else(|| unsupported("binding is not a SOAP binding"))?;
    if soap_binding.attr("", "style").unwrap_or("document") != "rpc" {
        return Err(unsupported("only rpc style bindings are supported"));
    }
    let mut response_ns: Option<String> = None;
    for op in binding.elements().filter(|e| e.is(WSDL_NS, "operation")) {
        for which in ["input", "output"] {
            let body = op
                .child(WSDL_NS, which)
                .and_then(|io| io.child(WSDL_SOAP_NS, "body"))
                .ok_or_else(|| unsupported(format!("binding {which} without soap:body")))?;
            if body.attr("", "use") != Some("encoded") {
                return Err(unsupported("only encoded use is supported"));
            }
            if which == "output" {
                let ns = body.attr("", "namespace").unwrap_or("").to_string();
                match &response_ns {
                    Some(prev) if *prev != ns => {
                        return Err(unsupported("operations disagree on the response namespace"))
                    }
                    _ => response_ns = Some(ns),
                }
            }
        }
    }

    let service = root
        .child(WSDL_NS, "service")
        .ok_or_else(|| unsupported("no service element"))?;
    let service_name = required(service, "name")?.to_string();
    let location = service
        .child(WSDL_NS, "port")
        .and_then(|p| p.child(WSDL_SOAP_NS, "address"))
        .and_then(|a| a.attr("", "location"))
        .ok_or_else(|| unsupported("service without soap:address"))?;
    let url = url::Url::parse(location).map_err(|e| unsupported(format!("bad address `{location}`: {e}")))?;

    Ok(ServiceDescriptor {
        service_name,
        namespace_uri: target_ns,
        endpoint_path: url.path().to_string(),
        response_namespace_uri: response_ns.unwrap_or_default(),
        methods,
        security_enabled: false,
        exclusive_execution: false,
    })
}

/// Write `<dir>/<serviceName>.wsdl`.
pub fn store_wsdl(doc: &WsdlDocument, dir: &Path) -> Result<PathBuf, WsdlError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.wsdl", doc.descriptor.service_name));
    fs::write(&path, &doc.xml_text)?;
    Ok(path)
}
