//! Service descriptors, the handler boundary and call validation.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::soap::{SoapCall, TypedValue, XsdType};
use crate::xml::is_ncname;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub xsd_type: XsdType,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, xsd_type: XsdType) -> Self {
        ParameterSpec { name: name.into(), xsd_type }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MethodSignature {
    pub name: String,
    #[serde(default)]
    pub params: Vec<ParameterSpec>,
    pub return_type: XsdType,
}

impl MethodSignature {
    pub fn new(name: impl Into<String>, params: Vec<ParameterSpec>, return_type: XsdType) -> Self {
        MethodSignature { name: name.into(), params, return_type }
    }
}

/// Everything the host needs to know about a service: its identity, where
/// it is routed, and the methods it exposes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceDescriptor {
    pub service_name: String,
    pub namespace_uri: String,
    pub endpoint_path: String,
    pub response_namespace_uri: String,
    pub methods: Vec<MethodSignature>,
    #[serde(default)]
    pub security_enabled: bool,
    #[serde(default)]
    pub exclusive_execution: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid service descriptor: {0}")]
pub struct DescriptorError(pub String);

impl ServiceDescriptor {
    pub fn validate(&self) -> Result<(), DescriptorError> {
        let err = |m: String| Err(DescriptorError(m));
        if !is_ncname(&self.service_name) {
            return err(format!("service name `{}` is not a token", self.service_name));
        }
        if !self.endpoint_path.starts_with('/')
            || self.endpoint_path.contains(|c: char| c == '?' || c == '#' || c.is_whitespace())
        {
            return err(format!("endpoint path `{}` must be an absolute URL path", self.endpoint_path));
        }
        if self.methods.is_empty() {
            return err("a service needs at least one method".into());
        }
        let mut names = HashSet::new();
        for m in &self.methods {
            if !is_ncname(&m.name) {
                return err(format!("method name `{}` is not a token", m.name));
            }
            if !names.insert(m.name.as_str()) {
                return err(format!("method `{}` declared twice", m.name));
            }
            let mut params = HashSet::new();
            for p in &m.params {
                if !is_ncname(&p.name) {
                    return err(format!("parameter name `{}` in `{}` is not a token", p.name, m.name));
                }
                if !params.insert(p.name.as_str()) {
                    return err(format!("parameter `{}` declared twice in `{}`", p.name, m.name));
                }
            }
        }
        Ok(())
    }

    pub fn method(&self, name: &str) -> Option<&MethodSignature> {
        self.methods.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct HandlerError(pub String);

impl HandlerError {
    pub fn new(msg: impl Into<String>) -> Self {
        HandlerError(msg.into())
    }
}

/// The single entry point a service implements. The host calls it only
/// after the call has been validated against the method signature.
pub trait ServiceHandler: Send + Sync {
    fn execute_method(&self, method: &str, args: &[TypedValue]) -> Result<TypedValue, HandlerError>;
}

impl<F> ServiceHandler for F
where
    F: Fn(&str, &[TypedValue]) -> Result<TypedValue, HandlerError> + Send + Sync,
{
    fn execute_method(&self, method: &str, args: &[TypedValue]) -> Result<TypedValue, HandlerError> {
        self(method, args)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("unknown method: {0}")]
    UnknownMethod(String),
    #[error("wrong number of parameters: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("parameter `{param}` has type {got}, expected {expected}")]
    TypeMismatch { param: String, expected: XsdType, got: XsdType },
    #[error("parameter {position} is named `{got}`, expected `{expected}`")]
    NameMismatch { position: usize, expected: String, got: String },
    #[error("handler returned {got}, method is declared to return {expected}")]
    ReturnTypeMismatch { expected: XsdType, got: XsdType },
}

/// Match a call against the descriptor by method name, then parameter count,
/// then each position's name and type.
pub fn validate_call<'d>(desc: &'d ServiceDescriptor, call: &SoapCall) -> Result<&'d MethodSignature, ValidationError> {
    let method = &call.operation.local_name;
    let sig = desc
        .method(method)
        .ok_or_else(|| ValidationError::UnknownMethod(method.clone()))?;
    if sig.params.len() != call.params.len() {
        return Err(ValidationError::ArityMismatch { expected: sig.params.len(), got: call.params.len() });
    }
    for (position, (spec, param)) in sig.params.iter().zip(&call.params).enumerate() {
        if spec.name != param.name {
            return Err(ValidationError::NameMismatch {
                position,
                expected: spec.name.clone(),
                got: param.name.clone(),
            });
        }
        let got = param.value.xsd_type();
        if got != spec.xsd_type {
            return Err(ValidationError::TypeMismatch { param: spec.name.clone(), expected: spec.xsd_type, got });
        }
    }
    Ok(sig)
}

/// Check a handler result against the declared return type. No conversion
/// is attempted.
pub fn coerce_result(sig: &MethodSignature, raw: TypedValue) -> Result<TypedValue, ValidationError> {
    let got = raw.xsd_type();
    if got == sig.return_type {
        Ok(raw)
    } else {
        Err(ValidationError::ReturnTypeMismatch { expected: sig.return_type, got })
    }
}

/// SHA-256 over a length-prefixed encoding of every descriptor field in a
/// fixed order, hex encoded.
pub fn descriptor_fingerprint(desc: &ServiceDescriptor) -> String {
    fn field(h: &mut Sha256, s: &str) {
        h.update((s.len() as u64).to_be_bytes());
        h.update(s.as_bytes());
    }
    let mut h = Sha256::new();
    field(&mut h, &desc.service_name);
    field(&mut h, &desc.namespace_uri);
    field(&mut h, &desc.endpoint_path);
    field(&mut h, &desc.response_namespace_uri);
    h.update([desc.security_enabled as u8, desc.exclusive_execution as u8]);
    h.update((desc.methods.len() as u64).to_be_bytes());
    for m in &desc.methods {
        field(&mut h, &m.name);
        field(&mut h, m.return_type.schema_name());
        h.update((m.params.len() as u64).to_be_bytes());
        for p in &m.params {
            field(&mut h, &p.name);
            field(&mut h, p.xsd_type.schema_name());
        }
    }
    hex::encode(h.finalize())
}

impl fmt::Display for MethodSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}: {}", p.name, p.xsd_type)?;
        }
        write!(f, ") -> {}", self.return_type)
    }
}
