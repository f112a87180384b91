use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relis_dsl::{AssignmentMode, Rank};

use super::{
    audit, is_closed, phase_id, phase_name, require_rank, settings, to_payload,
    Assignment, AssignmentData, AssignmentKind, AssignmentStatus, Workflow, ASSIGNMENT, PAPER,
};
use crate::error::{Error, Result};
use crate::ids::{ProjectId, RecordId, UserId};
use crate::store::{ProjectState, Store, Tx};

/// Picks `k` reviewers for each of `papers` papers, always among the least
/// loaded. Ties are broken by a shuffle of reviewer positions, so the result
/// depends on positions only, never on who the reviewers are.
///
/// `loads` holds the current load of each reviewer and is updated.
pub fn balanced_assignment(papers: usize, loads: &mut [usize], k: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let n = loads.len();
    assert!(k <= n, "k exceeds the number of reviewers");
    let mut out = Vec::with_capacity(papers);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..papers {
        order.shuffle(rng);
        order.sort_by_key(|&i| loads[i]);
        let mut chosen: Vec<usize> = order[..k].to_vec();
        chosen.sort_unstable();
        for &i in &chosen {
            loads[i] += 1;
        }
        out.push(chosen);
    }
    out
}

/// Members holding a role of reviewer rank; they form the screening pool.
fn pool(state: &ProjectState) -> Vec<UserId> {
    let set: BTreeSet<UserId> = state
        .memberships
        .iter()
        .filter(|m| state.schema.rank_of_role(&m.role) == Some(Rank::Reviewer))
        .map(|m| m.user)
        .collect();
    set.into_iter().collect()
}

fn create(tx: &mut Tx<'_>, data: AssignmentData) -> Result<Assignment> {
    let refs = vec![data.phase.clone()];
    let id = tx.add_record(ASSIGNMENT, Some(data.paper), to_payload(&data), refs)?;
    Ok(Assignment { id, data })
}

/// Gives every paper of the phase that has no screener yet exactly `k`
/// reviewers, balancing loads. Deterministic for a given seed.
pub fn auto_assign(store: &Store, project: ProjectId, phase: &str, seed: u64, actor: UserId) -> Result<Vec<Assignment>> {
    store.transact(project, Some(actor), |tx| {
        require_rank(tx, actor, Rank::Admin)?;
        let policy = settings(tx)?.assignment.clone();
        let phase = phase_id(tx, phase)?;
        if policy.mode == AssignmentMode::Manual {
            return Err(Error::ManualMode(phase_name(tx, &phase)));
        }
        if is_closed(tx, &phase) {
            return Err(Error::PhaseClosed(phase_name(tx, &phase)));
        }
        let reviewers = pool(tx);
        let k = policy.reviewers_per_paper as usize;
        if reviewers.len() < k {
            return Err(Error::TooFewReviewers {
                needed: k,
                available: reviewers.len(),
            });
        }
        let (papers, mut loads) = {
            let w = Workflow::new(tx)?;
            let papers: Vec<RecordId> = w
                .population(&phase)
                .into_iter()
                .filter(|&p| w.screening_for(p, &phase).next().is_none())
                .collect();
            let loads: Vec<usize> = reviewers
                .iter()
                .map(|r| {
                    w.assignments
                        .iter()
                        .filter(|a| a.data.phase == phase && a.data.kind == AssignmentKind::Screening && a.data.reviewer == *r)
                        .count()
                })
                .collect();
            (papers, loads)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = balanced_assignment(papers.len(), &mut loads, k, &mut rng);
        let mut out = Vec::new();
        for (paper, chosen) in papers.into_iter().zip(picks) {
            for i in chosen {
                out.push(create(
                    tx,
                    AssignmentData {
                        paper,
                        reviewer: reviewers[i],
                        phase: phase.clone(),
                        kind: AssignmentKind::Screening,
                        status: AssignmentStatus::Pending,
                        arbitration: false,
                        conflict: None,
                    },
                )?);
            }
        }
        audit(tx, "auto_assign", Some(&phase), Some(seed), out.len())?;
        Ok(out)
    })
}

pub fn manual_assign(
    store: &Store,
    project: ProjectId,
    phase: &str,
    paper: RecordId,
    reviewer: UserId,
    actor: UserId,
) -> Result<Assignment> {
    store.transact(project, Some(actor), |tx| {
        require_rank(tx, actor, Rank::Admin)?;
        settings(tx)?;
        let phase = phase_id(tx, phase)?;
        if is_closed(tx, &phase) {
            return Err(Error::PhaseClosed(phase_name(tx, &phase)));
        }
        if tx.record(paper).map(|r| r.element_id != PAPER).unwrap_or(true) {
            return Err(Error::not_found(format!("paper {paper}")));
        }
        if tx.effective_rank(reviewer).is_none() {
            return Err(Error::Forbidden(format!("user {reviewer} is not a member of the project")));
        }
        let dup = Workflow::new(tx)?
            .screening_for(paper, &phase)
            .any(|a| a.data.reviewer == reviewer);
        if dup {
            return Err(Error::Duplicate(format!("user {reviewer} already screens paper {paper} in this phase")));
        }
        create(
            tx,
            AssignmentData {
                paper,
                reviewer,
                phase,
                kind: AssignmentKind::Screening,
                status: AssignmentStatus::Pending,
                arbitration: false,
                conflict: None,
            },
        )
    })
}

/// Pending assignments of `user` in a phase, oldest first.
pub fn queue(state: &ProjectState, phase: &str, user: UserId) -> Result<Vec<Assignment>> {
    let phase = phase_id(state, phase)?;
    let w = Workflow::new(state)?;
    Ok(w.assignments
        .into_iter()
        .filter(|a| a.data.phase == phase && a.data.reviewer == user && a.data.status == AssignmentStatus::Pending)
        .collect())
}
