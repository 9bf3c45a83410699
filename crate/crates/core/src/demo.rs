//! The Note System demo service: student grades served by `obterNotas`.

use std::fmt::Write as _;
use std::path::Path;

use crate::service::{HandlerError, MethodSignature, ParameterSpec, ServiceDescriptor, ServiceHandler};
use crate::soap::{TypedValue, XsdType};

/// Shipped seed data, one record per line: `student;discipline;label;value`.
pub const DEFAULT_SEED: &str = include_str!("../data/notes_seed.txt");

pub const NOTES_SERVICE: &str = "CadastroEscolar";
pub const NOTES_PATH: &str = "/CadastroEscolar.jws";
pub const NOTES_NAMESPACE: &str = "http://localhost:5000/CadastroEscolar.jws";
pub const NOTES_RESPONSE_NAMESPACE: &str = "http://www.dee.ufma.br/";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoteRecord {
    pub student_code: String,
    pub discipline_code: String,
    pub label: String,
    pub value: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum SeedError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn parse_seed(text: &str) -> Result<Vec<NoteRecord>, SeedError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| SeedError::Parse { line: i + 1, msg: msg.to_string() };
        let fields: Vec<&str> = line.split(';').collect();
        let [student, discipline, label, value] = fields[..] else {
            return Err(err("expected `student;discipline;label;value`"));
        };
        if student.is_empty() || discipline.is_empty() {
            return Err(err("empty student or discipline code"));
        }
        let value = value.trim().parse().map_err(|_| err("value must be a non-negative integer"))?;
        out.push(NoteRecord {
            student_code: student.to_string(),
            discipline_code: discipline.to_string(),
            label: label.to_string(),
            value,
        });
    }
    Ok(out)
}

pub fn notes_descriptor() -> ServiceDescriptor {
    ServiceDescriptor {
        service_name: NOTES_SERVICE.into(),
        namespace_uri: NOTES_NAMESPACE.into(),
        endpoint_path: NOTES_PATH.into(),
        response_namespace_uri: NOTES_RESPONSE_NAMESPACE.into(),
        methods: vec![MethodSignature::new(
            "obterNotas",
            vec![
                ParameterSpec::new("codAluno", XsdType::String),
                ParameterSpec::new("codDisciplina", XsdType::String),
            ],
            XsdType::String,
        )],
        security_enabled: false,
        exclusive_execution: false,
    }
}

pub struct NotesHandler {
    records: Vec<NoteRecord>,
}

impl NotesHandler {
    pub fn new(records: Vec<NoteRecord>) -> Self {
        NotesHandler { records }
    }

    pub fn with_default_seed() -> Self {
        NotesHandler::new(parse_seed(DEFAULT_SEED).expect("bundled seed is valid"))
    }

    pub fn from_seed_file(path: &Path) -> Result<Self, SeedError> {
        Ok(NotesHandler::new(parse_seed(&std::fs::read_to_string(path)?)?))
    }

    /// `#` followed by `student;discipline;LABEL;;value#` for each match in
    /// seed order. No match renders as a lone `#`.
    pub fn lookup(&self, student: &str, discipline: &str) -> String {
        let mut out = String::from("#");
        for r in self
            .records
            .iter()
            .filter(|r| r.student_code == student && r.discipline_code == discipline)
        {
            let _ = write!(out, "{};{};{};;{}#", r.student_code, r.discipline_code, r.label, r.value);
        }
        out
    }
}

impl ServiceHandler for NotesHandler {
    fn execute_method(&self, method: &str, args: &[TypedValue]) -> Result<TypedValue, HandlerError> {
        match (method, args) {
            ("obterNotas", [TypedValue::String(student), TypedValue::String(discipline)]) => {
                Ok(TypedValue::String(self.lookup(student, discipline)))
            }
            _ => Err(HandlerError::new(format!("unsupported call to {method}"))),
        }
    }
}
