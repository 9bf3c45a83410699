use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema";

/// The closed set of XML Schema simple types carried on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XsdType {
    String,
    Int,
    Double,
    Boolean,
}

impl XsdType {
    pub const ALL: [XsdType; 4] = [XsdType::String, XsdType::Int, XsdType::Double, XsdType::Boolean];

    /// Local name in the XML Schema namespace.
    pub fn schema_name(self) -> &'static str {
        match self {
            XsdType::String => "string",
            XsdType::Int => "int",
            XsdType::Double => "double",
            XsdType::Boolean => "boolean",
        }
    }

    pub fn from_schema_name(name: &str) -> Option<XsdType> {
        XsdType::ALL.into_iter().find(|t| t.schema_name() == name)
    }
}

impl fmt::Display for XsdType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.schema_name())
    }
}

impl FromStr for XsdType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.strip_prefix("xsd:").unwrap_or(s);
        XsdType::from_schema_name(s).ok_or_else(|| format!("unsupported type `{s}`"))
    }
}

/// A scalar value together with its schema type.
///
/// The lexical form is derived from the value; parsing a lexical form and
/// rendering it again yields a lexical that parses to an equal value.
#[derive(Debug, Clone)]
pub enum TypedValue {
    String(String),
    Int(i32),
    Double(f64),
    Boolean(bool),
}

impl TypedValue {
    pub fn string(s: impl Into<String>) -> Self {
        TypedValue::String(s.into())
    }

    pub fn xsd_type(&self) -> XsdType {
        match self {
            TypedValue::String(_) => XsdType::String,
            TypedValue::Int(_) => XsdType::Int,
            TypedValue::Double(_) => XsdType::Double,
            TypedValue::Boolean(_) => XsdType::Boolean,
        }
    }

    pub fn lexical(&self) -> String {
        match self {
            TypedValue::String(s) => s.clone(),
            TypedValue::Int(i) => i.to_string(),
            TypedValue::Double(d) if d.is_nan() => "NaN".to_string(),
            TypedValue::Double(d) if d.is_infinite() => {
                if *d > 0.0 { "INF" } else { "-INF" }.to_string()
            }
            TypedValue::Double(d) => d.to_string(),
            TypedValue::Boolean(b) => b.to_string(),
        }
    }

    /// Parse `lexical` as a value of type `ty`. Non-string types use the
    /// schema's whitespace collapsing; strings are taken verbatim.
    pub fn parse(ty: XsdType, lexical: &str) -> Result<TypedValue, String> {
        let trimmed = lexical.trim_matches(|c| matches!(c, ' ' | '\t' | '\n' | '\r'));
        match ty {
            XsdType::String => Ok(TypedValue::String(lexical.to_string())),
            XsdType::Int => trimmed
                .parse::<i32>()
                .map(TypedValue::Int)
                .map_err(|_| format!("`{trimmed}` is not a valid xsd:int")),
            XsdType::Double => parse_double(trimmed)
                .map(TypedValue::Double)
                .ok_or_else(|| format!("`{trimmed}` is not a valid xsd:double")),
            XsdType::Boolean => match trimmed {
                "true" | "1" => Ok(TypedValue::Boolean(true)),
                "false" | "0" => Ok(TypedValue::Boolean(false)),
                _ => Err(format!("`{trimmed}` is not a valid xsd:boolean")),
            },
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            TypedValue::String(s) => Some(s),
            _ => None,
        }
    }
}

fn parse_double(s: &str) -> Option<f64> {
    match s {
        "INF" | "+INF" => return Some(f64::INFINITY),
        "-INF" => return Some(f64::NEG_INFINITY),
        "NaN" => return Some(f64::NAN),
        _ => {}
    }
    // Rust also accepts "inf"/"nan" spellings that the schema does not.
    if s.bytes().any(|b| b.is_ascii_alphabetic() && b != b'e' && b != b'E') {
        return None;
    }
    s.parse().ok()
}

impl PartialEq for TypedValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (TypedValue::String(a), TypedValue::String(b)) => a == b,
            (TypedValue::Int(a), TypedValue::Int(b)) => a == b,
            (TypedValue::Double(a), TypedValue::Double(b)) => a == b || (a.is_nan() && b.is_nan()),
            (TypedValue::Boolean(a), TypedValue::Boolean(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for TypedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lexical())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schema_names_are_a_bijection() {
        for t in XsdType::ALL {
            assert_eq!(XsdType::from_schema_name(t.schema_name()), Some(t));
        }
        assert_eq!(XsdType::from_schema_name("long"), None);
    }

    #[test]
    fn special_doubles() {
        assert!(matches!(TypedValue::parse(XsdType::Double, "INF"), Ok(TypedValue::Double(d)) if d == f64::INFINITY));
        assert_eq!(TypedValue::Double(f64::NEG_INFINITY).lexical(), "-INF");
        assert_eq!(TypedValue::parse(XsdType::Double, "NaN").unwrap(), TypedValue::Double(f64::NAN));
        assert!(TypedValue::parse(XsdType::Double, "inf").is_err());
        assert!(TypedValue::parse(XsdType::Double, "1.5e3").is_ok());
    }

    #[test]
    fn booleans_accept_numeric_forms() {
        assert_eq!(TypedValue::parse(XsdType::Boolean, " 1 ").unwrap(), TypedValue::Boolean(true));
        assert_eq!(TypedValue::parse(XsdType::Boolean, "false").unwrap(), TypedValue::Boolean(false));
        assert!(TypedValue::parse(XsdType::Boolean, "yes").is_err());
    }

    #[test]
    fn strings_keep_whitespace() {
        assert_eq!(TypedValue::parse(XsdType::String, "  a ").unwrap(), TypedValue::string("  a "));
    }

    proptest! {
        #[test]
        fn lexical_reparses(v in prop_oneof![
            any::<i32>().prop_map(TypedValue::Int),
            any::<f64>().prop_map(TypedValue::Double),
            any::<bool>().prop_map(TypedValue::Boolean),
            ".*".prop_map(TypedValue::String),
        ]) {
            let back = TypedValue::parse(v.xsd_type(), &v.lexical()).unwrap();
            prop_assert_eq!(back, v);
        }
    }
}
