use relis_dsl::Diagnostic;
use serde::Serialize;
use thiserror::Error;

use crate::ids::{ElementId, ProjectId, RecordId};

/// A single rule broken by a classification submission.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FieldViolation {
    /// Category element id, or the category name when it is unknown.
    pub field: String,
    pub code: &'static str,
    /// Which constraint failed, e.g. `max_length`.
    pub rule: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("model is invalid ({} diagnostics)", .0.len())]
    InvalidModel(Vec<Diagnostic>),
    #[error("name `{0}` is already taken")]
    NameTaken(String),
    #[error("login `{0}` is already taken")]
    LoginTaken(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("element `{0}` is deactivated")]
    ElementInactive(ElementId),
    #[error("record {id} is at version {actual}, not {expected}")]
    VersionStale {
        id: RecordId,
        expected: u32,
        actual: u32,
    },
    #[error("project {project} is at schema version {actual}, plan expects {expected}")]
    VersionConflict {
        project: ProjectId,
        expected: u32,
        actual: u32,
    },
    #[error("schema version {given} is stale, current is {current}")]
    StaleSchema { given: u32, current: u32 },
    #[error("cannot drop `{0}`: it holds data")]
    IllegalDrop(ElementId),
    #[error("invalid migration plan: {0}")]
    InvalidPlan(String),
    #[error("payload key `{key}` is not an attribute of `{element}`")]
    BadPayload { element: ElementId, key: String },
    #[error("bad credentials")]
    BadCredentials,
    #[error("session expired or revoked")]
    Expired,
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("duplicate: {0}")]
    Duplicate(String),
    #[error("need {needed} eligible reviewers, only {available} available")]
    TooFewReviewers { needed: usize, available: usize },
    #[error("phase `{0}` uses manual assignment")]
    ManualMode(String),
    #[error("caller is not assigned to this paper")]
    NotAssigned,
    #[error("excluding a paper requires an exclusion criterion")]
    CriterionRequired,
    #[error("an included paper cannot carry an exclusion criterion")]
    CriterionOnInclude,
    #[error("phase `{0}` is closed")]
    PhaseClosed(String),
    #[error("no member can arbitrate conflicts in phase `{0}`")]
    NoArbiter(String),
    #[error("no eligible validator for paper {0}")]
    NoValidator(RecordId),
    #[error("paper {0} is not included after the final screening phase")]
    NotIncluded(RecordId),
    #[error("classification rejected ({} violations)", .0.len())]
    Classification(Vec<FieldViolation>),
    #[error("category `{0}` is not a dynamic list")]
    NotDynamic(String),
    #[error("choice `{0}` already exists")]
    DuplicateChoice(String),
    #[error("cannot parse payload: {0}")]
    Format(String),
    #[error("{0} is still referenced")]
    InUse(String),
    #[error("project must keep at least one admin member")]
    LastAdmin,
    #[error("storage failure: {0}")]
    Storage(String),
}

impl Error {
    /// Stable machine code; each variant maps to exactly one.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "E_INVALID_MODEL",
            Error::NameTaken(_) => "E_NAME_TAKEN",
            Error::LoginTaken(_) => "E_LOGIN_TAKEN",
            Error::NotFound(_) => "E_NOT_FOUND",
            Error::ElementInactive(_) => "E_ELEMENT_INACTIVE",
            Error::VersionStale { .. } => "E_VERSION_STALE",
            Error::VersionConflict { .. } => "E_VERSION_CONFLICT",
            Error::StaleSchema { .. } => "E_STALE_SCHEMA",
            Error::IllegalDrop(_) => "E_ILLEGAL_DROP",
            Error::InvalidPlan(_) => "E_INVALID_PLAN",
            Error::BadPayload { .. } => "E_BAD_PAYLOAD",
            Error::BadCredentials => "E_BAD_CREDENTIALS",
            Error::Expired => "E_EXPIRED",
            Error::Forbidden(_) => "E_FORBIDDEN",
            Error::Duplicate(_) => "E_DUPLICATE",
            Error::TooFewReviewers { .. } => "E_TOO_FEW_REVIEWERS",
            Error::ManualMode(_) => "E_MANUAL_MODE",
            Error::NotAssigned => "E_NOT_ASSIGNED",
            Error::CriterionRequired => "E_CRITERION_REQUIRED",
            Error::CriterionOnInclude => "E_CRITERION_ON_INCLUDE",
            Error::PhaseClosed(_) => "E_PHASE_CLOSED",
            Error::NoArbiter(_) => "E_NO_ARBITER",
            Error::NoValidator(_) => "E_NO_VALIDATOR",
            Error::NotIncluded(_) => "E_NOT_INCLUDED",
            Error::Classification(v) => v.first().map_or("E_CONSTRAINT", |v| v.code),
            Error::NotDynamic(_) => "E_NOT_DYNAMIC",
            Error::DuplicateChoice(_) => "E_DUPLICATE_CHOICE",
            Error::Format(_) => "E_FORMAT",
            Error::InUse(_) => "E_IN_USE",
            Error::LastAdmin => "E_LAST_ADMIN",
            Error::Storage(_) => "E_STORAGE",
        }
    }

    pub(crate) fn not_found(what: impl std::fmt::Display) -> Self {
        Error::NotFound(what.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
