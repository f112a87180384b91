use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relis_dsl::{Rank, ValidationTarget};

use super::{
    audit, is_closed, phase_id, phase_name, require_rank, settings, to_payload, Assignment,
    AssignmentData, AssignmentKind, AssignmentStatus, Outcome, Workflow, ASSIGNMENT,
};
use crate::error::{Error, Result};
use crate::ids::{ProjectId, RecordId, UserId};
use crate::store::Store;

/// Sends a seeded uniform sample of the phase's screened papers to
/// validators. The sample holds `ceil(percentage × population / 100)`
/// papers; papers validated before in the phase are not drawn again.
pub fn sample_validation(store: &Store, project: ProjectId, phase: &str, seed: u64, actor: UserId) -> Result<Vec<Assignment>> {
    store.transact(project, Some(actor), |tx| {
        require_rank(tx, actor, Rank::Senior)?;
        let policy = settings(tx)?
            .validation
            .clone()
            .ok_or_else(|| Error::not_found("validation policy"))?;
        let phase = phase_id(tx, phase)?;
        if is_closed(tx, &phase) {
            return Err(Error::PhaseClosed(phase_name(tx, &phase)));
        }
        let validators = tx.members_in_role(&policy.validator_role);
        let (population, screeners, mut loads) = {
            let w = Workflow::new(tx)?;
            let validated = |p: RecordId| {
                w.assignments_for(p, &phase)
                    .any(|a| a.data.kind == AssignmentKind::Validation && !a.data.arbitration)
            };
            let population: Vec<RecordId> = w
                .population(&phase)
                .into_iter()
                .filter(|&p| {
                    let o = w.outcome(p, &phase);
                    let wanted = match policy.target {
                        ValidationTarget::Excluded => o == Outcome::Exclude,
                        ValidationTarget::Included => o == Outcome::Include,
                        ValidationTarget::All => o != Outcome::Pending,
                    };
                    wanted && !validated(p)
                })
                .collect();
            let screeners: Vec<Vec<UserId>> = population.iter().map(|&p| w.screeners(p, &phase)).collect();
            let loads: Vec<usize> = validators
                .iter()
                .map(|v| {
                    w.assignments
                        .iter()
                        .filter(|a| a.data.phase == phase && a.data.kind == AssignmentKind::Validation && a.data.reviewer == *v)
                        .count()
                })
                .collect();
            (population, screeners, loads)
        };
        let count = policy.percentage.ceil_share(population.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, population.len(), count).into_vec();
        picked.sort_unstable();
        let mut out = Vec::with_capacity(count);
        for i in picked {
            let paper = population[i];
            let choice = (0..validators.len())
                .filter(|&v| !screeners[i].contains(&validators[v]))
                .min_by_key(|&v| (loads[v], validators[v]))
                .ok_or(Error::NoValidator(paper))?;
            loads[choice] += 1;
            let data = AssignmentData {
                paper,
                reviewer: validators[choice],
                phase: phase.clone(),
                kind: AssignmentKind::Validation,
                status: AssignmentStatus::Pending,
                arbitration: false,
                conflict: None,
            };
            let id = tx.add_record(ASSIGNMENT, Some(paper), to_payload(&data), vec![phase.clone()])?;
            out.push(Assignment { id, data });
        }
        audit(tx, "sample_validation", Some(&phase), Some(seed), out.len())?;
        Ok(out)
    })
}
