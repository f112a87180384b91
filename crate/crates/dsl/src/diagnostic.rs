use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::Loc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Stable machine-readable diagnostic codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Code {
    #[serde(rename = "E_SYNTAX")]
    Syntax,
    #[serde(rename = "E_EOF")]
    Eof,
    #[serde(rename = "E_ENCODING")]
    Encoding,
    #[serde(rename = "E_DUP_NAME")]
    DupName,
    #[serde(rename = "E_NO_ADMIN")]
    NoAdmin,
    #[serde(rename = "E_MULTIPLE_ADMIN")]
    MultipleAdmin,
    #[serde(rename = "E_EMPTY_BLOCK")]
    EmptyBlock,
    #[serde(rename = "E_EMPTY_CHOICES")]
    EmptyChoices,
    #[serde(rename = "E_BAD_RANGE")]
    BadRange,
    #[serde(rename = "E_BAD_CONSTRAINT")]
    BadConstraint,
    #[serde(rename = "E_BAD_PATTERN")]
    BadPattern,
    #[serde(rename = "E_BAD_IDENT")]
    BadIdent,
    #[serde(rename = "E_TOO_DEEP")]
    TooDeep,
    #[serde(rename = "E_UNKNOWN_ROLE")]
    UnknownRole,
    #[serde(rename = "E_ROLE_RANK")]
    RoleRank,
    #[serde(rename = "E_DEP_UNRESOLVED")]
    DepUnresolved,
    #[serde(rename = "E_DEP_CYCLE")]
    DepCycle,
    #[serde(rename = "E_BAD_PERCENT")]
    BadPercent,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Syntax => "E_SYNTAX",
            Code::Eof => "E_EOF",
            Code::Encoding => "E_ENCODING",
            Code::DupName => "E_DUP_NAME",
            Code::NoAdmin => "E_NO_ADMIN",
            Code::MultipleAdmin => "E_MULTIPLE_ADMIN",
            Code::EmptyBlock => "E_EMPTY_BLOCK",
            Code::EmptyChoices => "E_EMPTY_CHOICES",
            Code::BadRange => "E_BAD_RANGE",
            Code::BadConstraint => "E_BAD_CONSTRAINT",
            Code::BadPattern => "E_BAD_PATTERN",
            Code::BadIdent => "E_BAD_IDENT",
            Code::TooDeep => "E_TOO_DEEP",
            Code::UnknownRole => "E_UNKNOWN_ROLE",
            Code::RoleRank => "E_ROLE_RANK",
            Code::DepUnresolved => "E_DEP_UNRESOLVED",
            Code::DepCycle => "E_DEP_CYCLE",
            Code::BadPercent => "E_BAD_PERCENT",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A located message about a source text. Serializes flat as
/// `{severity, code, message, line, column}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub message: String,
    pub line: u32,
    pub column: u32,
}

impl Diagnostic {
    pub fn error(code: Code, loc: Loc, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            code,
            message: message.into(),
            line: loc.line,
            column: loc.column,
        }
    }

    pub fn loc(&self) -> Loc {
        Loc::new(self.line, self.column)
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{}:{}: {sev}[{}]: {}",
            self.line, self.column, self.code, self.message
        )
    }
}
