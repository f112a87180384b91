use relis_dsl::{ConflictStrategy, Rank};
use serde::{Deserialize, Serialize};

use super::{
    assignment_of, from_payload, is_closed, phase_id, phase_name, require_rank, settings, to_payload,
    AssignmentData, AssignmentKind, AssignmentStatus, ConflictCase, ConflictData, ConflictResolution,
    ConflictStatus, DecisionData, ScreeningDecision, Verdict, Workflow, ASSIGNMENT, CONFLICT, DECISION,
    PHASE_STATE,
};
use crate::error::{Error, Result};
use crate::ids::{ElementId, ProjectId, RecordId, UserId};
use crate::schema::{Descriptor, ElementKind};
use crate::store::{Payload, Store, Tx};

/// How a conflict strategy settles a set of verdicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    /// The verdicts agree; there is nothing to settle.
    Agreed,
    Decided(Verdict),
    /// A member of the arbitrating role must decide.
    Escalate,
}

/// Settles `verdicts` under `strategy`.
pub fn resolve(strategy: ConflictStrategy, verdicts: &[Verdict]) -> Resolution {
    let inc = verdicts.iter().filter(|&&v| v == Verdict::Include).count();
    let exc = verdicts.len() - inc;
    if inc == 0 || exc == 0 {
        return Resolution::Agreed;
    }
    match strategy {
        ConflictStrategy::Majority if inc > exc => Resolution::Decided(Verdict::Include),
        ConflictStrategy::Majority if exc > inc => Resolution::Decided(Verdict::Exclude),
        _ => Resolution::Escalate,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionInput {
    pub verdict: Option<Verdict>,
    /// Criterion element id or its text.
    #[serde(default)]
    pub criterion: Option<String>,
    #[serde(default)]
    pub note: Option<String>,
}

fn criterion_id(tx: &Tx<'_>, given: &str) -> Result<ElementId> {
    let e = tx
        .schema
        .get_str(given)
        .filter(|e| e.kind == ElementKind::Criterion)
        .or_else(|| {
            tx.schema
                .active()
                .find(|e| matches!(&e.descriptor, Descriptor::Criterion { text } if text == given))
        })
        .ok_or_else(|| Error::not_found(format!("exclusion criterion `{given}`")))?;
    if !e.is_active() {
        return Err(Error::ElementInactive(e.id.clone()));
    }
    Ok(e.id.clone())
}

/// Records the caller's verdict on an assignment. Deciding again replaces
/// the previous decision while the phase is open.
pub fn submit_decision(
    store: &Store,
    assignment: RecordId,
    actor: UserId,
    input: DecisionInput,
) -> Result<ScreeningDecision> {
    let project = store
        .project_of_record(assignment)
        .ok_or_else(|| Error::not_found(format!("assignment {assignment}")))?;
    store.transact(project, Some(actor), |tx| {
        let a = assignment_of(tx, assignment)?;
        if a.data.reviewer != actor {
            return Err(Error::NotAssigned);
        }
        if is_closed(tx, &a.data.phase) {
            return Err(Error::PhaseClosed(phase_name(tx, &a.data.phase)));
        }
        let verdict = input
            .verdict
            .ok_or_else(|| Error::Format("verdict must be `include` or `exclude`".into()))?;
        let criterion = match (verdict, input.criterion.as_deref().filter(|c| !c.is_empty())) {
            (Verdict::Exclude, None) => return Err(Error::CriterionRequired),
            (Verdict::Include, Some(_)) => return Err(Error::CriterionOnInclude),
            (Verdict::Exclude, Some(c)) => Some(criterion_id(tx, c)?),
            (Verdict::Include, None) => None,
        };
        let data = DecisionData {
            assignment,
            paper: a.data.paper,
            phase: a.data.phase.clone(),
            reviewer: actor,
            kind: a.data.kind,
            verdict,
            criterion: criterion.clone(),
            note: input.note.clone(),
            decided_at: tx.now(),
        };
        let mut refs = vec![a.data.phase.clone()];
        refs.extend(criterion);
        let existing = tx
            .records_of(DECISION)
            .find(|r| r.u64("assignment") == Some(assignment.0))
            .map(|r| (r.id, r.record_version));
        let (id, record_version) = match existing {
            Some((id, v)) => (id, tx.modify_record(id, v, to_payload(&data), refs)?),
            None => (tx.add_record(DECISION, Some(a.data.paper), to_payload(&data), refs)?, 1),
        };
        if a.data.status == AssignmentStatus::Pending {
            let mut done = a.data.clone();
            done.status = AssignmentStatus::Done;
            tx.patch_record(a.id, to_payload(&done))?;
        }
        if a.data.arbitration {
            settle_by_arbiter(tx, &a.data, verdict, actor)?;
        } else {
            let validator = (a.data.kind == AssignmentKind::Validation).then_some(verdict);
            sync_conflict(tx, a.data.paper, &a.data.phase, validator)?;
        }
        Ok(ScreeningDecision {
            id,
            record_version,
            data,
        })
    })
}

fn settle_by_arbiter(tx: &mut Tx<'_>, a: &AssignmentData, verdict: Verdict, actor: UserId) -> Result<()> {
    let Some(cid) = a.conflict else { return Ok(()) };
    let mut c: ConflictData = from_payload(tx.record(cid)?)?;
    if c.status == ConflictStatus::Dissolved {
        return Ok(());
    }
    let strategy = settings(tx)?.conflict.strategy;
    c.status = ConflictStatus::Resolved;
    c.resolution = Some(ConflictResolution {
        verdict,
        resolver: Some(actor),
        strategy,
    });
    tx.patch_record(cid, to_payload(&c))?;
    Ok(())
}

/// Keeps the conflict case of (paper, phase) in line with its votes.
fn sync_conflict(tx: &mut Tx<'_>, paper: RecordId, phase: &ElementId, validator: Option<Verdict>) -> Result<()> {
    let (votes, current) = {
        let w = Workflow::for_paper(tx, paper)?;
        let votes: Vec<(RecordId, Verdict)> = w.votes(paper, phase).iter().map(|d| (d.id, d.data.verdict)).collect();
        (votes, w.conflict(paper, phase).cloned())
    };
    let disagree = votes.iter().any(|v| v.1 == Verdict::Include) && votes.iter().any(|v| v.1 == Verdict::Exclude);
    let ids: Vec<RecordId> = votes.iter().map(|v| v.0).collect();
    match current {
        None if disagree => {
            let data = ConflictData {
                paper,
                phase: phase.clone(),
                status: ConflictStatus::Open,
                decisions: ids,
                resolution: None,
                escalation: None,
            };
            tx.add_record(CONFLICT, Some(paper), to_payload(&data), vec![phase.clone()])?;
        }
        None => {}
        Some(mut c) => {
            c.data.decisions = ids;
            match c.data.status {
                ConflictStatus::Open if !disagree => c.data.status = ConflictStatus::Dissolved,
                ConflictStatus::Resolved => {
                    let settled = c.data.resolution.as_ref().map(|r| r.verdict);
                    if validator.is_some() && validator != settled {
                        c.data.status = ConflictStatus::Open;
                        c.data.resolution = None;
                        c.data.escalation = None;
                    }
                }
                _ => {}
            }
            tx.patch_record(c.id, to_payload(&c.data))?;
        }
    }
    Ok(())
}

/// Conflict cases of a phase, oldest first.
pub fn conflicts(state: &crate::store::ProjectState, phase: &str) -> Result<Vec<ConflictCase>> {
    let phase = phase_id(state, phase)?;
    let w = Workflow::new(state)?;
    let mut out: Vec<ConflictCase> = w
        .conflicts
        .into_values()
        .filter(|c| c.data.phase == phase)
        .collect();
    out.sort_by_key(|c| c.id);
    Ok(out)
}

/// Applies the conflict policy to every open case of a phase. Cases the
/// policy cannot settle are escalated to an arbiter through a validation
/// assignment; the arbiter's decision then settles them.
pub fn resolve_conflicts(store: &Store, project: ProjectId, phase: &str, actor: UserId) -> Result<Vec<ConflictCase>> {
    store.transact(project, Some(actor), |tx| {
        require_rank(tx, actor, Rank::Senior)?;
        let policy = settings(tx)?.conflict.clone();
        let phase_id = phase_id(tx, phase)?;
        if is_closed(tx, &phase_id) {
            return Err(Error::PhaseClosed(phase_name(tx, &phase_id)));
        }
        let arbiters = match &policy.arbiter_role {
            Some(role) if policy.strategy.needs_arbiter() => tx.members_in_role(role),
            _ => tx.members_with_rank(Rank::Senior),
        };
        let open: Vec<ConflictCase> = conflicts(tx, phase)?
            .into_iter()
            .filter(|c| c.data.status == ConflictStatus::Open)
            .collect();
        for c in open {
            if let Some(esc) = c.data.escalation {
                if assignment_of(tx, esc)?.data.status == AssignmentStatus::Pending {
                    continue;
                }
            }
            let mut data = c.data.clone();
            match resolve(policy.strategy, &c.verdicts) {
                Resolution::Agreed => data.status = ConflictStatus::Dissolved,
                Resolution::Decided(verdict) => {
                    data.status = ConflictStatus::Resolved;
                    data.resolution = Some(ConflictResolution {
                        verdict,
                        resolver: Some(actor),
                        strategy: policy.strategy,
                    });
                }
                Resolution::Escalate => {
                    if arbiters.is_empty() {
                        return Err(Error::NoArbiter(phase_name(tx, &phase_id)));
                    }
                    let (screeners, loads) = {
                        let w = Workflow::new(tx)?;
                        let screeners = w.screeners(c.data.paper, &phase_id);
                        let loads: Vec<usize> = arbiters
                            .iter()
                            .map(|u| {
                                w.assignments
                                    .iter()
                                    .filter(|a| a.data.arbitration && a.data.reviewer == *u && a.data.phase == phase_id)
                                    .count()
                            })
                            .collect();
                        (screeners, loads)
                    };
                    // Prefer arbiters who did not screen the paper.
                    let pick = (0..arbiters.len())
                        .min_by_key(|&i| (screeners.contains(&arbiters[i]), loads[i], arbiters[i]))
                        .expect("arbiters is not empty");
                    let a = AssignmentData {
                        paper: c.data.paper,
                        reviewer: arbiters[pick],
                        phase: phase_id.clone(),
                        kind: AssignmentKind::Validation,
                        status: AssignmentStatus::Pending,
                        arbitration: true,
                        conflict: Some(c.id),
                    };
                    let aid = tx.add_record(ASSIGNMENT, Some(c.data.paper), to_payload(&a), vec![phase_id.clone()])?;
                    data.escalation = Some(aid);
                }
            }
            tx.patch_record(c.id, to_payload(&data))?;
        }
        conflicts(tx, phase)
    })
}

/// Freezes the decisions of a phase.
pub fn close_phase(store: &Store, project: ProjectId, phase: &str, actor: UserId, closed: bool) -> Result<()> {
    store.transact(project, Some(actor), |tx| {
        require_rank(tx, actor, Rank::Admin)?;
        let phase = phase_id(tx, phase)?;
        let mut p = Payload::new();
        p.insert("phase".into(), phase.as_str().into());
        p.insert("closed".into(), closed.into());
        tx.add_record(PHASE_STATE, None, p, vec![phase]).map(|_| ())
    })
}
