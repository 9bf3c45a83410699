//! Consumer-side message preparation: calls, signing, encryption and
//! response verification.

use crate::security::{
    encrypt_message, sign_message, verify_signature, Certificate, KeyPair, SecurityError,
};
use crate::soap::{
    canonical_body, serialize_envelope, Body, Param, QName, SoapCall, SoapEnvelope, SoapError, SOAP_ENC_NS,
};

use super::headers::{encrypted_call_name, encrypted_entry, parse_signature_entry, signature_entry, HEADERS_NS, SIGNATURE};

/// An rpc/encoded call envelope with no headers.
pub fn build_call(operation: QName, params: Vec<Param>) -> SoapEnvelope {
    let mut env = SoapEnvelope::new(Body::Call(SoapCall::new(operation, params)));
    env.encoding_style = Some(SOAP_ENC_NS.to_string());
    env
}

/// Sign the envelope's canonical Body and append a `Signature` header,
/// optionally carrying the signer's certificate.
pub fn sign_envelope(env: &mut SoapEnvelope, key: &KeyPair, cert: Option<&Certificate>) {
    env.headers.retain(|h| !(h.name.namespace_uri == HEADERS_NS && h.name.local_name == SIGNATURE));
    let body = canonical_body(&serialize_envelope(env)).expect("serialized envelopes are well formed");
    env.headers.push(signature_entry(&sign_message(&body, key), cert));
}

/// Wrap `inner` for the service whose certificate is `recipient`. `target`
/// is the service's endpoint path, used for routing where the transport
/// has no path.
pub fn encrypt_envelope(inner: &SoapEnvelope, recipient: &Certificate, target: &str) -> Result<SoapEnvelope, SecurityError> {
    let cipher = encrypt_message(&serialize_envelope(inner), &recipient.public_key)?;
    let mut outer = build_call(encrypted_call_name(), Vec::new());
    outer.headers.push(encrypted_entry(&cipher, target));
    Ok(outer)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid,
    Unsigned,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Valid => "PASS",
            Verdict::Invalid => "FAIL",
            Verdict::Unsigned => "UNSIGNED",
        }
    }
}

/// Check the `Signature` header of a received message against `signer`.
/// Anything that prevents verification (unparseable message, bad header)
/// counts as `Invalid`.
pub fn verify_envelope(raw: &[u8], signer: &Certificate) -> Verdict {
    let check = || -> Result<Verdict, SoapError> {
        let env = crate::soap::parse_envelope(raw)?;
        let Some(h) = env.header(HEADERS_NS, SIGNATURE) else {
            return Ok(Verdict::Unsigned);
        };
        let Ok((sig, _)) = parse_signature_entry(h) else {
            return Ok(Verdict::Invalid);
        };
        let body = canonical_body(raw)?;
        Ok(match verify_signature(&body, &sig, &signer.public_key) {
            Ok(true) => Verdict::Valid,
            _ => Verdict::Invalid,
        })
    };
    check().unwrap_or(Verdict::Invalid)
}
