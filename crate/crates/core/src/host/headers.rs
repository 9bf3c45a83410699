//! Header entries in the `urn:mobilehost:headers` namespace.
//!
//! ```xml
//! <mh:Auth xmlns:mh="urn:mobilehost:headers">
//!   <mh:login>..</mh:login><mh:passwordProof>..</mh:passwordProof><mh:deviceId>..</mh:deviceId>
//! </mh:Auth>
//! <mh:Signature xmlns:mh="urn:mobilehost:headers" algorithm="RSA-PKCS1-v1_5" digestAlgorithm="SHA-256">
//!   <mh:SignatureValue>base64</mh:SignatureValue>
//!   <mh:Certificate>listing text (optional)</mh:Certificate>
//! </mh:Signature>
//! <mh:Encrypted xmlns:mh="urn:mobilehost:headers" target="/endpoint/path">
//!   <mh:WrappedKey>..</mh:WrappedKey><mh:Iv>..</mh:Iv><mh:CipherText>..</mh:CipherText>
//! </mh:Encrypted>
//! ```

use crate::registry::password_proof;
use crate::security::{parse_certificate_text, render_certificate_text, Certificate, CipherEnvelope, SignatureBlock};
use crate::soap::{HeaderEntry, QName};
use crate::xml::{self, escape_attr, escape_text, Element};

pub const HEADERS_NS: &str = "urn:mobilehost:headers";
pub const AUTH: &str = "Auth";
pub const SIGNATURE: &str = "Signature";
pub const ENCRYPTED: &str = "Encrypted";
/// Local name of the placeholder body entry of an encrypted request.
pub const ENCRYPTED_CALL: &str = "EncryptedCall";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad `{header}` header: {reason}")]
pub struct HeaderError {
    pub header: &'static str,
    pub reason: String,
}

fn header_error(header: &'static str, reason: impl Into<String>) -> HeaderError {
    HeaderError { header, reason: reason.into() }
}

fn entry(xml: String) -> HeaderEntry {
    HeaderEntry::from_xml(xml).expect("generated header entries are well formed")
}

fn parse(h: &HeaderEntry, header: &'static str) -> Result<Element, HeaderError> {
    xml::parse(&h.xml, true).map_err(|e| header_error(header, e.0))
}

fn field(el: &Element, header: &'static str, name: &str) -> Result<String, HeaderError> {
    el.child(HEADERS_NS, name)
        .map(|c| c.text().trim().to_string())
        .ok_or_else(|| header_error(header, format!("missing `{name}`")))
}

/// Consumer credentials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthHeader {
    pub login: String,
    /// Hex SHA-256 of the password.
    pub password_proof: String,
    pub device_id: String,
}

impl AuthHeader {
    pub fn new(login: &str, password: &str, device_id: &str) -> Self {
        AuthHeader { login: login.into(), password_proof: password_proof(password), device_id: device_id.into() }
    }

    pub fn to_entry(&self) -> HeaderEntry {
        entry(format!(
            "<mh:{AUTH} xmlns:mh=\"{HEADERS_NS}\"><mh:login>{}</mh:login><mh:passwordProof>{}</mh:passwordProof><mh:deviceId>{}</mh:deviceId></mh:{AUTH}>",
            escape_text(&self.login),
            escape_text(&self.password_proof),
            escape_text(&self.device_id),
        ))
    }

    pub fn from_entry(h: &HeaderEntry) -> Result<Self, HeaderError> {
        let el = parse(h, AUTH)?;
        Ok(AuthHeader {
            login: field(&el, AUTH, "login")?,
            password_proof: field(&el, AUTH, "passwordProof")?,
            device_id: field(&el, AUTH, "deviceId")?,
        })
    }
}

pub fn signature_entry(sig: &SignatureBlock, cert: Option<&Certificate>) -> HeaderEntry {
    let cert = cert
        .map(|c| format!("<mh:Certificate>{}</mh:Certificate>", escape_text(&render_certificate_text(c))))
        .unwrap_or_default();
    entry(format!(
        "<mh:{SIGNATURE} xmlns:mh=\"{HEADERS_NS}\" algorithm=\"{}\" digestAlgorithm=\"{}\"><mh:SignatureValue>{}</mh:SignatureValue>{cert}</mh:{SIGNATURE}>",
        escape_attr(&sig.algorithm),
        escape_attr(&sig.digest_algorithm),
        escape_text(&sig.value),
    ))
}

pub fn parse_signature_entry(h: &HeaderEntry) -> Result<(SignatureBlock, Option<Certificate>), HeaderError> {
    let el = parse(h, SIGNATURE)?;
    let attr = |name: &str| {
        el.attr("", name)
            .map(str::to_string)
            .ok_or_else(|| header_error(SIGNATURE, format!("missing `{name}` attribute")))
    };
    let block = SignatureBlock {
        algorithm: attr("algorithm")?,
        digest_algorithm: attr("digestAlgorithm")?,
        value: field(&el, SIGNATURE, "SignatureValue")?,
    };
    let cert = match el.child(HEADERS_NS, "Certificate") {
        Some(c) => Some(parse_certificate_text(&c.text()).map_err(|e| header_error(SIGNATURE, e.to_string()))?),
        None => None,
    };
    Ok((block, cert))
}

pub fn encrypted_entry(env: &CipherEnvelope, target: &str) -> HeaderEntry {
    entry(format!(
        "<mh:{ENCRYPTED} xmlns:mh=\"{HEADERS_NS}\" target=\"{}\"><mh:WrappedKey>{}</mh:WrappedKey><mh:Iv>{}</mh:Iv><mh:CipherText>{}</mh:CipherText></mh:{ENCRYPTED}>",
        escape_attr(target),
        escape_text(&env.wrapped_key),
        escape_text(&env.iv),
        escape_text(&env.ciphertext),
    ))
}

/// The cipher envelope and the target endpoint path.
pub fn parse_encrypted_entry(h: &HeaderEntry) -> Result<(CipherEnvelope, String), HeaderError> {
    let el = parse(h, ENCRYPTED)?;
    let env = CipherEnvelope {
        wrapped_key: field(&el, ENCRYPTED, "WrappedKey")?,
        iv: field(&el, ENCRYPTED, "Iv")?,
        ciphertext: field(&el, ENCRYPTED, "CipherText")?,
    };
    Ok((env, el.attr("", "target").unwrap_or_default().to_string()))
}

pub fn encrypted_call_name() -> QName {
    QName::new(ENCRYPTED_CALL, HEADERS_NS).expect("valid name")
}
