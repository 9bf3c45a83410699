#![allow(dead_code)]

use std::collections::BTreeSet;

use mobilehost::service::{MethodSignature, ParameterSpec, ServiceDescriptor};
use mobilehost::soap::{
    Body, FaultCode, HeaderEntry, Param, QName, SoapCall, SoapEnvelope, SoapFault, SoapResponseBody, TypedValue,
    XsdType, SOAP_ENC_NS,
};
use proptest::collection::{btree_set, vec};
use proptest::prelude::*;

pub const CERTIFICATE_TEMPLATE: &str = include_str!("../fixtures/certificate.template");

pub fn ncname() -> impl Strategy<Value = String> {
    "[A-Za-z_][A-Za-z0-9_.-]{0,12}"
}

pub fn namespace() -> impl Strategy<Value = String> {
    prop_oneof![
        "urn:[a-z]{1,8}:[a-z0-9]{1,8}",
        "http://[a-z]{1,8}(\\.[a-z]{2,3})?(:[1-9][0-9]{0,3})?/[A-Za-z0-9_]{0,10}(\\.jws)?",
    ]
}

/// Text made only of characters XML 1.0 can carry.
pub fn xml_text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[ -~]{0,40}",
        "[\\t\\n\\r a-z&<>\"']{0,20}",
        "\\PC{0,20}",
        Just(String::new()),
        Just("  padded  ".to_string()),
    ]
}

pub fn xsd_type() -> impl Strategy<Value = XsdType> {
    prop::sample::select(XsdType::ALL.to_vec())
}

pub fn typed_value() -> impl Strategy<Value = TypedValue> {
    prop_oneof![
        xml_text().prop_map(TypedValue::String),
        any::<i32>().prop_map(TypedValue::Int),
        any::<f64>().prop_map(TypedValue::Double),
        Just(TypedValue::Double(f64::INFINITY)),
        Just(TypedValue::Double(f64::NAN)),
        any::<bool>().prop_map(TypedValue::Boolean),
    ]
}

fn params() -> impl Strategy<Value = Vec<Param>> {
    btree_set(ncname(), 0..5).prop_flat_map(|names: BTreeSet<String>| {
        let names: Vec<String> = names.into_iter().collect();
        let n = names.len();
        (Just(names), vec(typed_value(), n))
            .prop_map(|(names, values)| names.into_iter().zip(values).map(|(n, v)| Param::new(n, v)).collect())
    })
}

fn call() -> impl Strategy<Value = SoapCall> {
    (ncname(), namespace(), params(), proptest::option::of("[a-z0-9]{1,4}"), proptest::option::of("[01]"))
        .prop_filter("response-shaped calls parse as responses", |(name, ..)| !name.ends_with("Response"))
        .prop_map(|(name, ns, params, id, root)| {
            let mut c = SoapCall::new(QName::new(name, ns).unwrap(), params);
            c.id = id;
            c.root = root;
            c
        })
}

fn response() -> impl Strategy<Value = SoapResponseBody> {
    (ncname(), namespace(), typed_value()).prop_map(|(m, ns, v)| SoapResponseBody::new(&m, &ns, v))
}

fn fault() -> impl Strategy<Value = SoapFault> {
    (prop::sample::select(FaultCode::ALL.to_vec()), xml_text(), proptest::option::of(xml_text()))
        .prop_map(|(code, message, detail)| SoapFault { code, message, detail })
}

fn header() -> impl Strategy<Value = HeaderEntry> {
    ("[a-z]{1,6}", "[A-Z][a-z]{0,6}", "[a-z0-9 ]{0,10}").prop_map(|(p, n, t)| {
        HeaderEntry::from_xml(format!("<{p}:{n} xmlns:{p}=\"urn:hdr:{p}\">{t}</{p}:{n}>")).unwrap()
    })
}

pub fn envelope() -> impl Strategy<Value = SoapEnvelope> {
    let body = prop_oneof![
        3 => call().prop_map(Body::Call),
        2 => response().prop_map(Body::Response),
        1 => fault().prop_map(Body::Fault),
    ];
    (vec(header(), 0..3), body, any::<bool>()).prop_map(|(headers, body, enc)| SoapEnvelope {
        headers,
        body,
        encoding_style: enc.then(|| SOAP_ENC_NS.to_string()),
    })
}

fn method() -> impl Strategy<Value = MethodSignature> {
    (ncname(), btree_set(ncname(), 0..5), xsd_type()).prop_flat_map(|(name, pnames, ret)| {
        let n = pnames.len();
        (Just(name), Just(pnames), vec(xsd_type(), n), Just(ret)).prop_map(|(name, pnames, types, ret)| {
            let params = pnames.into_iter().zip(types).map(|(p, t)| ParameterSpec::new(p, t)).collect();
            MethodSignature::new(name, params, ret)
        })
    })
}

pub fn descriptor() -> impl Strategy<Value = ServiceDescriptor> {
    (
        ncname(),
        namespace(),
        "(/[A-Za-z0-9_-]{1,8}){1,3}(\\.jws)?",
        namespace(),
        vec(method(), 1..5),
    )
        .prop_map(|(service_name, namespace_uri, endpoint_path, response_namespace_uri, methods)| {
            let mut seen = BTreeSet::new();
            let methods = methods.into_iter().filter(|m| seen.insert(m.name.clone())).collect();
            ServiceDescriptor {
                service_name,
                namespace_uri,
                endpoint_path,
                response_namespace_uri,
                methods,
                security_enabled: false,
                exclusive_execution: false,
            }
        })
}

/// Match a listing against the template. `{digits}` spans one or more lines
/// of decimal digits, 43 per line except the last.
pub fn matches_certificate_template(text: &str, dn: &str) -> Result<(), String> {
    let mut lines = text.lines().peekable();
    for (n, tpl) in CERTIFICATE_TEMPLATE.lines().enumerate() {
        if tpl == "{digits}" {
            let mut count = 0;
            while let Some(l) = lines.peek() {
                if l.is_empty() || !l.bytes().all(|b| b.is_ascii_digit()) {
                    break;
                }
                let l = lines.next().unwrap();
                let last = !lines.peek().is_some_and(|n| n.bytes().all(|b| b.is_ascii_digit()));
                if l.len() > 43 || (!last && l.len() != 43) {
                    return Err(format!("digit line of {} characters", l.len()));
                }
                count += 1;
            }
            if count == 0 {
                return Err(format!("template line {n}: expected digits"));
            }
            continue;
        }
        let line = lines.next().ok_or(format!("missing line for `{tpl}`"))?;
        let ok = match tpl.split_once('{') {
            None => line == tpl,
            Some((prefix, hole)) => {
                let value = line.strip_prefix(prefix).ok_or(format!("`{line}` lacks prefix `{prefix}`"))?;
                match hole.trim_end_matches('}') {
                    "octets" => value.split(':').all(|o| o.len() == 2 && u8::from_str_radix(o, 16).is_ok()),
                    "dn" => value == dn,
                    "date" => is_listing_date(value),
                    other => return Err(format!("unknown hole {other}")),
                }
            }
        };
        if !ok {
            return Err(format!("`{line}` does not match `{tpl}`"));
        }
    }
    match lines.next() {
        None => Ok(()),
        Some(extra) => Err(format!("trailing line `{extra}`")),
    }
}

/// `Wed Aug 13 17:37:58 UTC 2008`
fn is_listing_date(s: &str) -> bool {
    const DAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];
    const MONTHS: [&str; 12] = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"];
    let digits = |t: &str, n: usize| t.len() == n && t.bytes().all(|b| b.is_ascii_digit());
    match s.split(' ').collect::<Vec<_>>()[..] {
        [day, month, date, time, "UTC", year] => {
            DAYS.contains(&day)
                && MONTHS.contains(&month)
                && digits(date, 2)
                && time.split(':').count() == 3
                && time.split(':').all(|t| digits(t, 2))
                && digits(year, 4)
        }
        _ => false,
    }
}
