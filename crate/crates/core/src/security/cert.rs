//! Self-signed certificates and their textual listing.
//!
//! ```text
//! ----- Begin Certificate -----
//! Type: X.509v1
//! Serial number: 35:32:35:38:30:39
//! SubjectDN: MobileHost/
//! IssuerDN: MobileHost/
//! Start Date: Wed Aug 13 17:37:58 UTC 2008
//! Final Date: Sat Aug 23 17:37:58 UTC 2008
//! Public Key: RSA
//! modulus:
//! <decimal digits, 43 per line>
//! public exponent:65537
//! Signature Algorithm: RSA
//! Signature:
//! <decimal digits, 43 per line>
//! ----- End Certificate -----
//! ```
//!
//! The signature covers the listing text from the first banner through the
//! `Signature Algorithm` line, newline terminated.

use chrono::{DateTime, Duration, NaiveDateTime, SubsecRound, Utc};
use rsa::BigUint;

use super::{raw_sign, raw_verify, KeyPair, PublicKey, SecurityError};

pub const BEGIN_BANNER: &str = "----- Begin Certificate -----";
pub const END_BANNER: &str = "----- End Certificate -----";
pub const VERSION_LABEL: &str = "X.509v1";
pub const KEY_ALGORITHM: &str = "RSA";
pub const DEFAULT_VALIDITY_DAYS: u32 = 10;

const DATE_FORMAT: &str = "%a %b %d %H:%M:%S UTC %Y";
const DIGITS_PER_LINE: usize = 43;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub serial: Vec<u8>,
    pub subject_dn: String,
    pub issuer_dn: String,
    pub not_before: DateTime<Utc>,
    pub not_after: DateTime<Utc>,
    pub public_key: PublicKey,
    pub signature: Vec<u8>,
}

impl Certificate {
    pub fn validity_days(&self) -> i64 {
        (self.not_after - self.not_before).num_days()
    }

    pub fn verify_self_signature(&self) -> bool {
        raw_verify(self.tbs_text().as_bytes(), &self.signature, &self.public_key)
    }

    fn tbs_text(&self) -> String {
        let mut out = String::new();
        out.push_str(BEGIN_BANNER);
        out.push('\n');
        out.push_str(&format!("Type: {VERSION_LABEL}\n"));
        out.push_str(&format!("Serial number: {}\n", serial_octets(&self.serial)));
        out.push_str(&format!("SubjectDN: {}\n", self.subject_dn));
        out.push_str(&format!("IssuerDN: {}\n", self.issuer_dn));
        out.push_str(&format!("Start Date: {}\n", self.not_before.format(DATE_FORMAT)));
        out.push_str(&format!("Final Date: {}\n", self.not_after.format(DATE_FORMAT)));
        out.push_str(&format!("Public Key: {KEY_ALGORITHM}\n"));
        out.push_str("modulus:\n");
        push_wrapped(&mut out, &self.public_key.modulus().to_string());
        out.push_str(&format!("public exponent:{}\n", self.public_key.exponent()));
        out.push_str(&format!("Signature Algorithm: {KEY_ALGORITHM}\n"));
        out
    }
}

fn serial_octets(serial: &[u8]) -> String {
    serial.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(":")
}

fn push_wrapped(out: &mut String, digits: &str) {
    for chunk in digits.as_bytes().chunks(DIGITS_PER_LINE) {
        out.push_str(std::str::from_utf8(chunk).expect("decimal digits are ASCII"));
        out.push('\n');
    }
}

pub fn issue_certificate(kp: &KeyPair, subject_dn: &str, validity_days: u32) -> Certificate {
    issue_certificate_at(kp, subject_dn, validity_days, Utc::now())
}

/// Self-signed certificate valid from `now` (whole seconds) for
/// `validity_days`. The serial is the ASCII text of a six-digit token
/// taken from the issue time in milliseconds.
pub fn issue_certificate_at(kp: &KeyPair, subject_dn: &str, validity_days: u32, now: DateTime<Utc>) -> Certificate {
    assert!(validity_days >= 1, "certificate validity must be at least one day");
    let not_before = now.trunc_subsecs(0);
    let token = format!("{:06}", now.timestamp_millis().rem_euclid(1_000_000));
    let mut cert = Certificate {
        serial: token.into_bytes(),
        subject_dn: subject_dn.to_string(),
        issuer_dn: subject_dn.to_string(),
        not_before,
        not_after: not_before + Duration::days(validity_days as i64),
        public_key: kp.public_key().clone(),
        signature: Vec::new(),
    };
    cert.signature = raw_sign(cert.tbs_text().as_bytes(), kp);
    cert
}

pub fn render_certificate_text(c: &Certificate) -> String {
    let mut out = c.tbs_text();
    out.push_str("Signature:\n");
    push_wrapped(&mut out, &BigUint::from_bytes_be(&c.signature).to_string());
    out.push_str(END_BANNER);
    out.push('\n');
    out
}

struct Cursor<'a> {
    lines: std::iter::Peekable<std::str::Lines<'a>>,
}

impl<'a> Cursor<'a> {
    fn field(&mut self, label: &str) -> Result<&'a str, SecurityError> {
        let line = self
            .lines
            .next()
            .ok_or_else(|| SecurityError::MalformedCertificate("truncated certificate".into()))?;
        let line = line.trim_end_matches('\r');
        line.strip_prefix(label)
            .ok_or_else(|| SecurityError::MalformedCertificate(format!("expected `{label}`, found `{line}`")))
    }

    /// Consecutive lines of decimal digits, joined.
    fn digits(&mut self) -> String {
        let mut out = String::new();
        while let Some(line) = self.lines.peek() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || !line.bytes().all(|b| b.is_ascii_digit()) {
                break;
            }
            out.push_str(line);
            self.lines.next();
        }
        out
    }
}

pub fn parse_certificate_text(text: &str) -> Result<Certificate, SecurityError> {
    let bad = |m: &str| SecurityError::MalformedCertificate(m.to_string());
    let parse_date = |s: &str| {
        NaiveDateTime::parse_from_str(s, DATE_FORMAT)
            .map(|d| d.and_utc())
            .map_err(|_| SecurityError::MalformedCertificate(format!("bad date `{s}`")))
    };
    let big = |s: &str| BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| bad("expected decimal digits"));

    let mut cur = Cursor { lines: text.lines().peekable() };
    cur.field(BEGIN_BANNER)?;
    if cur.field("Type: ")? != VERSION_LABEL {
        return Err(bad("unsupported certificate type"));
    }
    let serial = cur
        .field("Serial number: ")?
        .split(':')
        .map(|o| u8::from_str_radix(o, 16))
        .collect::<Result<Vec<u8>, _>>()
        .map_err(|_| bad("serial number is not colon-separated hex octets"))?;
    let subject_dn = cur.field("SubjectDN: ")?.to_string();
    let issuer_dn = cur.field("IssuerDN: ")?.to_string();
    let not_before = parse_date(cur.field("Start Date: ")?)?;
    let not_after = parse_date(cur.field("Final Date: ")?)?;
    if cur.field("Public Key: ")? != KEY_ALGORITHM {
        return Err(bad("unsupported key algorithm"));
    }
    cur.field("modulus:")?;
    let modulus = big(&cur.digits())?;
    let exponent = big(cur.field("public exponent:")?.trim())?;
    if cur.field("Signature Algorithm: ")? != KEY_ALGORITHM {
        return Err(bad("unsupported signature algorithm"));
    }
    cur.field("Signature:")?;
    let sig_int = big(&cur.digits())?.to_bytes_be();
    cur.field(END_BANNER)?;

    let public_key = PublicKey::from_components(modulus, exponent)
        .map_err(|e| SecurityError::MalformedCertificate(e.to_string()))?;
    if sig_int.len() > public_key.size() {
        return Err(bad("signature longer than the modulus"));
    }
    // Leading zero octets are lost in the decimal rendering.
    let mut signature = vec![0u8; public_key.size() - sig_int.len()];
    signature.extend_from_slice(&sig_int);

    Ok(Certificate { serial, subject_dn, issuer_dn, not_before, not_after, public_key, signature })
}
