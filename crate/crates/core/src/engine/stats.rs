use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{criterion_text, phase_name, Outcome, Workflow};
use crate::error::{Error, Result};
use crate::schema::Descriptor;
use crate::store::ProjectState;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub phase: String,
    pub total: usize,
    pub assigned: usize,
    pub decided: usize,
    pub included: usize,
    pub excluded: usize,
    pub pending: usize,
    pub conflicts: usize,
    /// Excluded papers per exclusion criterion text.
    pub per_criterion: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub phases: Vec<PhaseStats>,
    /// Category name to value to number of papers classified with it.
    pub distributions: BTreeMap<String, BTreeMap<String, usize>>,
}

pub(crate) fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Progress of every active phase plus value distributions of the active
/// categories, from committed data.
pub fn stats(state: &ProjectState) -> Result<StatsReport> {
    let w = Workflow::new(state)?;
    let mut phases = Vec::new();
    for (phase, population) in w.phases.iter().zip(w.populations()) {
        let mut s = PhaseStats {
            phase: phase_name(state, phase),
            total: population.len(),
            ..PhaseStats::default()
        };
        for &p in &population {
            let screening: Vec<_> = w.screening_for(p, phase).collect();
            if !screening.is_empty() {
                s.assigned += 1;
            }
            if screening.iter().any(|a| w.decisions.contains_key(&a.id)) {
                s.decided += 1;
            }
            if w.conflict(p, phase).is_some() {
                s.conflicts += 1;
            }
            match w.outcome(p, phase) {
                Outcome::Include => s.included += 1,
                Outcome::Exclude => {
                    s.excluded += 1;
                    let label = match w.exclusion_criterion(p, phase) {
                        Some(c) => criterion_text(state, &c),
                        None => String::new(),
                    };
                    *s.per_criterion.entry(label).or_default() += 1;
                }
                Outcome::Pending => s.pending += 1,
            }
        }
        phases.push(s);
    }
    let mut distributions = BTreeMap::new();
    for cat in state.schema.categories() {
        let Descriptor::Category(c) = &cat.descriptor else { continue };
        let mut dist: BTreeMap<String, usize> = BTreeMap::new();
        for r in state.records_of(cat.id.as_str()) {
            if let Some(Value::Array(vals)) = r.payload.get("values") {
                for v in vals {
                    *dist.entry(value_label(v)).or_default() += 1;
                }
            }
        }
        distributions.insert(c.name.clone(), dist);
    }
    Ok(StatsReport { phases, distributions })
}

pub const PHASE_HEADER: [&str; 8] = ["phase", "total", "assigned", "decided", "included", "excluded", "pending", "conflicts"];
pub const CRITERION_HEADER: [&str; 3] = ["phase", "criterion", "count"];
pub const DISTRIBUTION_HEADER: [&str; 3] = ["category", "value", "count"];

/// CSV export: a phase table, a criterion table and one table per category,
/// separated by blank lines.
pub fn export_csv(report: &StatsReport) -> Result<String> {
    let mut blocks = Vec::new();
    let mut block = |rows: Vec<Vec<String>>, header: &[&str]| -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(&r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Storage(e.to_string()))?;
        blocks.push(String::from_utf8(bytes).map_err(|e| Error::Storage(e.to_string()))?);
        Ok(())
    };
    block(
        report
            .phases
            .iter()
            .map(|p| {
                vec![
                    p.phase.clone(),
                    p.total.to_string(),
                    p.assigned.to_string(),
                    p.decided.to_string(),
                    p.included.to_string(),
                    p.excluded.to_string(),
                    p.pending.to_string(),
                    p.conflicts.to_string(),
                ]
            })
            .collect(),
        &PHASE_HEADER,
    )?;
    block(
        report
            .phases
            .iter()
            .flat_map(|p| {
                p.per_criterion
                    .iter()
                    .map(|(c, n)| vec![p.phase.clone(), c.clone(), n.to_string()])
            })
            .collect(),
        &CRITERION_HEADER,
    )?;
    for (cat, dist) in &report.distributions {
        block(
            dist.iter()
                .map(|(v, n)| vec![cat.clone(), v.clone(), n.to_string()])
                .collect(),
            &DISTRIBUTION_HEADER,
        )?;
    }
    Ok(blocks.join("\n"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Storage(e.to_string())
}

pub fn export_json(report: &StatsReport) -> Value {
    serde_json::to_value(report).unwrap_or(Value::Null)
}
