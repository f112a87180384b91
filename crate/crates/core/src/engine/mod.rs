//! Screening and classification workflow on installed projects.
//!
//! Workflow state is kept in built-in entity records (papers, assignments,
//! decisions, conflicts, classifications); every operation runs inside one
//! store transaction.

mod assign;
mod classify;
mod import;
mod screening;
mod stats;
mod validation;

use std::collections::BTreeMap;

use relis_dsl::Rank;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ids::{ElementId, RecordId, UserId};
use crate::schema::{Descriptor, ElementKind, Settings};
use crate::store::{builtin, EntityRecord, Payload, ProjectState};

pub use assign::{auto_assign, balanced_assignment, manual_assign, queue};
pub use classify::{
    add_dynamic_choice, check_values, classification, submit_classification, ClassificationInput,
    ClassificationRecord, Completeness,
};
pub use import::{add_paper, import_papers, modify_paper, remove_paper, parse_bibtex, ImportFormat, ImportReport, PaperData, Rejection};
pub use screening::{
    close_phase, conflicts, resolve, resolve_conflicts, submit_decision, DecisionInput, Resolution,
};
pub use stats::{
    export_csv, export_json, stats, PhaseStats, StatsReport, CRITERION_HEADER, DISTRIBUTION_HEADER, PHASE_HEADER,
};
pub use validation::sample_validation;

pub const PAPER: &str = "entity.paper";
pub const ASSIGNMENT: &str = "entity.assignment";
pub const DECISION: &str = "entity.decision";
pub const CONFLICT: &str = "entity.conflict";
pub const CLASSIFICATION: &str = "entity.classification";
pub const PHASE_STATE: &str = "entity.phase_state";
pub const AUDIT: &str = "entity.audit";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Include,
    Exclude,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentKind {
    Screening,
    Validation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentStatus {
    Pending,
    Done,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentData {
    pub paper: RecordId,
    pub reviewer: UserId,
    pub phase: ElementId,
    pub kind: AssignmentKind,
    pub status: AssignmentStatus,
    /// Validation assignment created to settle a conflict.
    #[serde(default)]
    pub arbitration: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conflict: Option<RecordId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: RecordId,
    #[serde(flatten)]
    pub data: AssignmentData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionData {
    pub assignment: RecordId,
    pub paper: RecordId,
    pub phase: ElementId,
    pub reviewer: UserId,
    pub kind: AssignmentKind,
    pub verdict: Verdict,
    pub criterion: Option<ElementId>,
    pub note: Option<String>,
    pub decided_at: chrono::DateTime<chrono::Utc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningDecision {
    pub id: RecordId,
    pub record_version: u32,
    #[serde(flatten)]
    pub data: DecisionData,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictStatus {
    Open,
    Resolved,
    /// The disagreement went away through re-decisions.
    Dissolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConflictResolution {
    pub verdict: Verdict,
    pub resolver: Option<UserId>,
    pub strategy: relis_dsl::ConflictStrategy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConflictData {
    pub paper: RecordId,
    pub phase: ElementId,
    pub status: ConflictStatus,
    pub decisions: Vec<RecordId>,
    pub resolution: Option<ConflictResolution>,
    /// Arbitration assignment, once escalated.
    pub escalation: Option<RecordId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConflictCase {
    pub id: RecordId,
    #[serde(flatten)]
    pub data: ConflictData,
    /// The decisions the case is about.
    #[serde(default)]
    pub verdicts: Vec<Verdict>,
}

/// Where a paper stands in one phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Include,
    Exclude,
    Pending,
}

impl From<Verdict> for Outcome {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Include => Outcome::Include,
            Verdict::Exclude => Outcome::Exclude,
        }
    }
}

pub(crate) fn to_payload<T: Serialize>(t: &T) -> Payload {
    match serde_json::to_value(t) {
        Ok(Value::Object(m)) => m,
        _ => Payload::new(),
    }
}

pub(crate) fn from_payload<T: DeserializeOwned>(r: &EntityRecord) -> Result<T> {
    serde_json::from_value(Value::Object(r.payload.clone()))
        .map_err(|e| Error::Storage(format!("record {} is malformed: {e}", r.id)))
}

pub(crate) fn settings(state: &ProjectState) -> Result<&Settings> {
    state
        .schema
        .settings
        .as_ref()
        .ok_or_else(|| Error::not_found(format!("installed schema of project {}", state.project_id())))
}

pub(crate) fn require_rank(state: &ProjectState, actor: UserId, rank: Rank) -> Result<()> {
    match state.effective_rank(actor) {
        Some(r) if r >= rank => Ok(()),
        Some(r) => Err(Error::Forbidden(format!("requires {} rank, caller is {}", rank.keyword(), r.keyword()))),
        None => Err(Error::Forbidden("caller is not a member of the project".into())),
    }
}

/// Active phase by name or element id.
pub(crate) fn phase_id(state: &ProjectState, phase: &str) -> Result<ElementId> {
    state
        .schema
        .active_named(ElementKind::Phase, phase)
        .or_else(|| state.schema.get_str(phase).filter(|e| e.kind == ElementKind::Phase))
        .map(|e| e.id.clone())
        .ok_or_else(|| Error::not_found(format!("phase `{phase}`")))
}

pub(crate) fn phase_name(state: &ProjectState, id: &ElementId) -> String {
    state
        .schema
        .get(id)
        .and_then(|e| e.descriptor.name().map(str::to_string))
        .unwrap_or_else(|| id.to_string())
}

pub(crate) fn is_closed(state: &ProjectState, phase: &ElementId) -> bool {
    state
        .records_of(PHASE_STATE)
        .filter(|r| r.str("phase") == Some(phase.as_str()))
        .last()
        .is_some_and(|r| r.bool("closed"))
}

pub(crate) fn criterion_text(state: &ProjectState, id: &ElementId) -> String {
    match state.schema.get(id).map(|e| &e.descriptor) {
        Some(Descriptor::Criterion { text }) => text.clone(),
        _ => id.to_string(),
    }
}

pub(crate) fn audit(
    tx: &mut crate::store::Tx<'_>,
    action: &str,
    phase: Option<&ElementId>,
    seed: Option<u64>,
    count: usize,
) -> Result<()> {
    let mut p = Payload::new();
    p.insert("action".into(), action.into());
    if let Some(ph) = phase {
        p.insert("phase".into(), ph.as_str().into());
    }
    if let Some(s) = seed {
        p.insert("seed".into(), s.into());
    }
    p.insert("count".into(), count.into());
    tx.add_record(&builtin("audit"), None, p, Vec::new()).map(|_| ())
}

/// Read model of the screening workflow over one committed state.
pub struct Workflow<'a> {
    pub state: &'a ProjectState,
    /// Active phases in pipeline order.
    pub phases: Vec<ElementId>,
    pub papers: Vec<RecordId>,
    pub assignments: Vec<Assignment>,
    /// Decision per assignment.
    pub decisions: BTreeMap<RecordId, ScreeningDecision>,
    /// Latest case per (paper, phase) that was not dissolved.
    pub conflicts: BTreeMap<(RecordId, ElementId), ConflictCase>,
}

impl<'a> Workflow<'a> {
    pub fn new(state: &'a ProjectState) -> Result<Self> {
        Self::build(state, |_| true)
    }

    /// The read model of one paper only, for writes that touch one paper.
    pub fn for_paper(state: &'a ProjectState, paper: RecordId) -> Result<Self> {
        Self::build(state, |r| r.id == paper || r.paper_id == Some(paper))
    }

    fn build(state: &'a ProjectState, keep: impl Fn(&EntityRecord) -> bool) -> Result<Self> {
        let phases = state.schema.phases().into_iter().map(|e| e.id.clone()).collect();
        let papers = state.records_of(PAPER).filter(|r| keep(r)).map(|r| r.id).collect();
        let mut assignments = Vec::new();
        for r in state.records_of(ASSIGNMENT).filter(|r| keep(r)) {
            assignments.push(Assignment {
                id: r.id,
                data: from_payload(r)?,
            });
        }
        let mut decisions = BTreeMap::new();
        for r in state.records_of(DECISION).filter(|r| keep(r)) {
            let d: DecisionData = from_payload(r)?;
            decisions.insert(
                d.assignment,
                ScreeningDecision {
                    id: r.id,
                    record_version: r.record_version,
                    data: d,
                },
            );
        }
        let mut conflicts = BTreeMap::new();
        for r in state.records_of(CONFLICT).filter(|r| keep(r)) {
            let c: ConflictData = from_payload(r)?;
            if c.status == ConflictStatus::Dissolved {
                continue;
            }
            conflicts.insert(
                (c.paper, c.phase.clone()),
                ConflictCase {
                    id: r.id,
                    data: c,
                    verdicts: Vec::new(),
                },
            );
        }
        let mut w = Self {
            state,
            phases,
            papers,
            assignments,
            decisions,
            conflicts,
        };
        let verdicts: Vec<((RecordId, ElementId), Vec<Verdict>)> = w
            .conflicts
            .values()
            .map(|c| {
                let v = c
                    .data
                    .decisions
                    .iter()
                    .filter_map(|id| w.decisions.values().find(|d| d.id == *id))
                    .map(|d| d.data.verdict)
                    .collect();
                ((c.data.paper, c.data.phase.clone()), v)
            })
            .collect();
        for (k, v) in verdicts {
            if let Some(c) = w.conflicts.get_mut(&k) {
                c.verdicts = v;
            }
        }
        Ok(w)
    }

    pub fn assignments_for<'s>(
        &'s self,
        paper: RecordId,
        phase: &'s ElementId,
    ) -> impl Iterator<Item = &'s Assignment> + 's {
        self.assignments
            .iter()
            .filter(move |a| a.data.paper == paper && &a.data.phase == phase)
    }

    pub fn screening_for<'s>(&'s self, paper: RecordId, phase: &'s ElementId) -> impl Iterator<Item = &'s Assignment> + 's {
        self.assignments_for(paper, phase)
            .filter(|a| a.data.kind == AssignmentKind::Screening)
    }

    /// Decisions that count towards the verdict of a paper: those of
    /// screeners and validators, but not of arbiters.
    pub fn votes(&self, paper: RecordId, phase: &ElementId) -> Vec<&ScreeningDecision> {
        self.assignments_for(paper, phase)
            .filter(|a| !a.data.arbitration)
            .filter_map(|a| self.decisions.get(&a.id))
            .collect()
    }

    pub fn screeners(&self, paper: RecordId, phase: &ElementId) -> Vec<UserId> {
        self.screening_for(paper, phase).map(|a| a.data.reviewer).collect()
    }

    pub fn conflict(&self, paper: RecordId, phase: &ElementId) -> Option<&ConflictCase> {
        self.conflicts.get(&(paper, phase.clone()))
    }

    pub fn outcome(&self, paper: RecordId, phase: &ElementId) -> Outcome {
        if let Some(c) = self.conflict(paper, phase) {
            return match (&c.data.status, &c.data.resolution) {
                (ConflictStatus::Resolved, Some(r)) => r.verdict.into(),
                _ => Outcome::Pending,
            };
        }
        let screening: Vec<&Assignment> = self.screening_for(paper, phase).collect();
        if screening.is_empty() || screening.iter().any(|a| a.data.status == AssignmentStatus::Pending) {
            return Outcome::Pending;
        }
        let votes = self.votes(paper, phase);
        let first = votes.first().map(|d| d.data.verdict);
        match first {
            Some(v) if votes.iter().all(|d| d.data.verdict == v) => v.into(),
            _ => Outcome::Pending,
        }
    }

    /// Papers entering each active phase: all papers for the first, then
    /// those included by the previous phase.
    pub fn populations(&self) -> Vec<Vec<RecordId>> {
        let mut out: Vec<Vec<RecordId>> = Vec::with_capacity(self.phases.len());
        let mut current = self.papers.clone();
        for phase in &self.phases {
            let next = current
                .iter()
                .copied()
                .filter(|&p| self.outcome(p, phase) == Outcome::Include)
                .collect();
            out.push(std::mem::replace(&mut current, next));
        }
        out
    }

    pub fn population(&self, phase: &ElementId) -> Vec<RecordId> {
        let idx = self.phases.iter().position(|p| p == phase);
        match idx {
            Some(i) => self.populations().swap_remove(i),
            None => Vec::new(),
        }
    }

    /// Papers included by the final phase.
    pub fn included_at_end(&self) -> Vec<RecordId> {
        let Some(last) = self.phases.last() else { return Vec::new() };
        let pops = self.populations();
        pops.last()
            .map(|p| {
                p.iter()
                    .copied()
                    .filter(|&x| self.outcome(x, last) == Outcome::Include)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Criterion a paper was excluded for: the arbiter's when a conflict was
    /// arbitrated, otherwise the most frequent among the excluding votes,
    /// ties going to the earliest decision.
    pub fn exclusion_criterion(&self, paper: RecordId, phase: &ElementId) -> Option<ElementId> {
        if let Some(c) = self.conflict(paper, phase) {
            if let Some(esc) = c.data.escalation {
                if let Some(d) = self.decisions.get(&esc) {
                    if d.data.verdict == Verdict::Exclude {
                        return d.data.criterion.clone();
                    }
                }
            }
        }
        let mut votes: Vec<&ScreeningDecision> = self
            .votes(paper, phase)
            .into_iter()
            .filter(|d| d.data.verdict == Verdict::Exclude)
            .collect();
        votes.sort_by_key(|d| d.id);
        let mut best: Option<(&ElementId, usize)> = None;
        for d in &votes {
            let Some(c) = &d.data.criterion else { continue };
            let n = votes.iter().filter(|o| o.data.criterion.as_ref() == Some(c)).count();
            if best.is_none_or(|(_, m)| n > m) {
                best = Some((c, n));
            }
        }
        best.map(|(c, _)| c.clone())
    }
}

pub(crate) fn assignment_of(state: &ProjectState, id: RecordId) -> Result<Assignment> {
    let r = state.record(id)?;
    if r.element_id != ASSIGNMENT {
        return Err(Error::not_found(format!("assignment {id}")));
    }
    Ok(Assignment {
        id,
        data: from_payload(r)?,
    })
}
