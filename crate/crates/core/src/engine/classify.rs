use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use regex::Regex;
use relis_dsl::{slug, Rank, ValueType};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{require_rank, settings, Workflow, CLASSIFICATION, PAPER};
use crate::error::{Error, FieldViolation, Result};
use crate::ids::{ElementId, ProjectId, RecordId, UserId};
use crate::installer::{apply_in, MigrationOp, MigrationPlan, NewElement};
use crate::schema::{derive_form, choice_text, Descriptor, ElementKind, FormDescriptor, FormField, Origin, Shape, Widget};
use crate::store::{Payload, ProjectState, Store};

pub const E_BAD_TYPE: &str = "E_BAD_TYPE";
pub const E_CONSTRAINT: &str = "E_CONSTRAINT";
pub const E_MANDATORY_MISSING: &str = "E_MANDATORY_MISSING";
pub const E_MULTIPLICITY: &str = "E_MULTIPLICITY";
pub const E_DEP_VIOLATION: &str = "E_DEP_VIOLATION";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Completeness {
    Draft,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub paper: RecordId,
    /// Values per category element id, including retired categories.
    pub values: BTreeMap<ElementId, Vec<Value>>,
    /// Categories in `values` that are deactivated and read-only.
    pub retired: Vec<ElementId>,
    pub completeness: Completeness,
    /// Zero until the first submission.
    pub record_version: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassificationInput {
    /// Values per category element id or category name. Categories left out
    /// keep their stored values; an empty list clears them.
    pub values: BTreeMap<String, Vec<Value>>,
    #[serde(default)]
    pub mark_complete: bool,
    #[serde(default)]
    pub expected_version: Option<u32>,
}

fn violation(field: &FormField, code: &'static str, rule: &str) -> FieldViolation {
    FieldViolation {
        field: field.element_id.to_string(),
        code,
        rule: rule.to_string(),
    }
}

/// Checks a full value map against a form. Returns every violation, sorted.
pub fn check_values(form: &FormDescriptor, values: &BTreeMap<ElementId, Vec<Value>>, complete: bool) -> Vec<FieldViolation> {
    let mut out = BTreeSet::new();
    let empty = Vec::new();
    for f in form.flatten() {
        let vals = values.get(&f.element_id).unwrap_or(&empty);
        if !f.multiplicity.allows(vals.len()) {
            out.insert(violation(f, E_MULTIPLICITY, "multiplicity"));
        }
        if complete && f.mandatory && vals.is_empty() {
            out.insert(violation(f, E_MANDATORY_MISSING, "mandatory"));
        }
        for v in vals {
            if let Some((code, rule)) = check_value(f, v) {
                out.insert(violation(f, code, rule));
            }
        }
        if let (Some(dep), false) = (&f.dependency, vals.is_empty()) {
            let parent: Vec<&str> = values
                .get(&dep.parent_field)
                .map(|p| p.iter().filter_map(Value::as_str).collect())
                .unwrap_or_default();
            if parent.is_empty() {
                out.insert(violation(f, E_DEP_VIOLATION, "parent_missing"));
            } else {
                let d = crate::schema::Dependency {
                    parent: String::new(),
                    mapping: dep.mapping.clone(),
                };
                if let Some(allowed) = d.allowed(&parent) {
                    if vals.iter().any(|v| v.as_str().is_some_and(|s| !allowed.contains(&s))) {
                        out.insert(violation(f, E_DEP_VIOLATION, "dependency"));
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

fn check_value(f: &FormField, v: &Value) -> Option<(&'static str, &'static str)> {
    match f.widget {
        Widget::SingleSelect | Widget::DynamicSelect => match v.as_str() {
            None => Some((E_BAD_TYPE, "type")),
            Some(s) if f.options.iter().any(|o| o.text == s) => None,
            Some(_) => Some((E_CONSTRAINT, "choice")),
        },
        _ => {
            let c = &f.constraints;
            match c.value_type.unwrap_or(ValueType::Text) {
                ValueType::Text => {
                    let Some(s) = v.as_str() else { return Some((E_BAD_TYPE, "type")) };
                    if c.max_length.is_some_and(|n| s.chars().count() > n as usize) {
                        return Some((E_CONSTRAINT, "max_length"));
                    }
                    if let Some(p) = &c.pattern {
                        let full = Regex::new(&format!("^(?:{p})$")).ok()?;
                        if !full.is_match(s) {
                            return Some((E_CONSTRAINT, "pattern"));
                        }
                    }
                    None
                }
                ValueType::Bool => (!v.is_boolean()).then_some((E_BAD_TYPE, "type")),
                ValueType::Date => match v.as_str().map(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d")) {
                    Some(Ok(_)) => None,
                    _ => Some((E_BAD_TYPE, "type")),
                },
                t @ (ValueType::Int | ValueType::Real) => {
                    let integral = v.is_i64() || v.is_u64();
                    let Some(n) = v.as_f64().filter(|_| integral || t == ValueType::Real) else {
                        return Some((E_BAD_TYPE, "type"));
                    };
                    if c.range.is_some_and(|r| !r.contains(n)) {
                        Some((E_CONSTRAINT, "range"))
                    } else {
                        None
                    }
                }
            }
        }
    }
}

fn category_records(state: &ProjectState, paper: RecordId) -> BTreeMap<ElementId, (RecordId, u32, Vec<Value>)> {
    state
        .records
        .values()
        .filter(|r| r.paper_id == Some(paper))
        .filter(|r| state.schema.get_str(&r.element_id).is_some_and(|e| e.kind == ElementKind::Category))
        .map(|r| {
            let vals = r.payload.get("values").and_then(Value::as_array).cloned().unwrap_or_default();
            (ElementId::new(r.element_id.clone()), (r.id, r.record_version, vals))
        })
        .collect()
}

/// Current classification of a paper.
pub fn classification(state: &ProjectState, paper: RecordId) -> Result<ClassificationRecord> {
    if state.record(paper)?.element_id != PAPER {
        return Err(Error::not_found(format!("paper {paper}")));
    }
    let meta = state
        .records_of(CLASSIFICATION)
        .find(|r| r.paper_id == Some(paper));
    let values: BTreeMap<ElementId, Vec<Value>> = category_records(state, paper)
        .into_iter()
        .map(|(k, (_, _, v))| (k, v))
        .collect();
    let retired = values
        .keys()
        .filter(|id| state.schema.get(id).is_some_and(|e| !e.is_active()))
        .cloned()
        .collect();
    Ok(ClassificationRecord {
        paper,
        values,
        retired,
        completeness: if meta.is_some_and(|m| m.bool("complete")) {
            Completeness::Complete
        } else {
            Completeness::Draft
        },
        record_version: meta.map_or(0, |m| m.record_version),
    })
}

/// Validates and stores classification values of an included paper.
pub fn submit_classification(
    store: &Store,
    project: ProjectId,
    paper: RecordId,
    actor: UserId,
    input: ClassificationInput,
) -> Result<ClassificationRecord> {
    store.transact(project, Some(actor), |tx| {
        settings(tx)?;
        if tx.record(paper).map(|r| r.element_id != PAPER).unwrap_or(true) {
            return Err(Error::not_found(format!("paper {paper}")));
        }
        {
            let w = Workflow::new(tx)?;
            let assigned = w.assignments.iter().any(|a| a.data.paper == paper && a.data.reviewer == actor);
            if !assigned {
                require_rank(tx, actor, Rank::Admin).map_err(|_| Error::NotAssigned)?;
            }
            if !w.included_at_end().contains(&paper) {
                return Err(Error::NotIncluded(paper));
            }
        }
        let mut submitted = BTreeMap::new();
        for (key, vals) in input.values {
            let e = tx
                .schema
                .get_str(&key)
                .filter(|e| e.kind == ElementKind::Category)
                .or_else(|| tx.schema.active_named(ElementKind::Category, &key))
                .or_else(|| {
                    // A retired category is still known by name.
                    tx.schema
                        .elements
                        .iter()
                        .rev()
                        .find(|e| e.kind == ElementKind::Category && e.descriptor.name() == Some(key.as_str()))
                })
                .ok_or_else(|| Error::not_found(format!("category `{key}`")))?;
            if !e.is_active() {
                return Err(Error::ElementInactive(e.id.clone()));
            }
            submitted.insert(e.id.clone(), vals);
        }
        let stored = category_records(tx, paper);
        let form = derive_form(&tx.schema);
        let mut merged: BTreeMap<ElementId, Vec<Value>> = form
            .flatten()
            .iter()
            .filter_map(|f| stored.get(&f.element_id).map(|s| (f.element_id.clone(), s.2.clone())))
            .collect();
        merged.extend(submitted.iter().map(|(k, v)| (k.clone(), v.clone())));
        let violations = check_values(&form, &merged, input.mark_complete);
        if !violations.is_empty() {
            return Err(Error::Classification(violations));
        }

        let meta = tx
            .records_of(CLASSIFICATION)
            .find(|r| r.paper_id == Some(paper))
            .map(|r| (r.id, r.record_version));
        let current = meta.map_or(0, |m| m.1);
        if let Some(expected) = input.expected_version {
            if expected != current {
                return Err(Error::VersionStale {
                    id: meta.map_or(paper, |m| m.0),
                    expected,
                    actual: current,
                });
            }
        }
        let mut payload = Payload::new();
        payload.insert("paper".into(), paper.0.into());
        payload.insert("complete".into(), input.mark_complete.into());
        match meta {
            Some((id, v)) => {
                tx.modify_record(id, v, payload, Vec::new())?;
            }
            None => {
                tx.add_record(CLASSIFICATION, Some(paper), payload, Vec::new())?;
            }
        }
        for (cat, vals) in submitted {
            let refs: Vec<ElementId> = tx
                .schema
                .choices_of(&cat)
                .into_iter()
                .filter(|c| vals.iter().any(|v| v.as_str() == Some(choice_text(c))))
                .map(|c| c.id.clone())
                .collect();
            let mut p = Payload::new();
            p.insert("values".into(), Value::Array(vals));
            match stored.get(&cat) {
                Some(&(id, v, _)) => {
                    tx.modify_record(id, v, p, refs)?;
                }
                None => {
                    tx.add_record(cat.as_str(), Some(paper), p, refs)?;
                }
            }
        }
        classification(tx, paper)
    })
}

/// Adds a user-defined choice to a dynamic list category through a schema
/// migration, making it available to every form at once. Returns the
/// category's choices.
pub fn add_dynamic_choice(store: &Store, project: ProjectId, category: &str, value: &str, actor: UserId) -> Result<Vec<String>> {
    let text = value.trim().to_string();
    store.with_install_lock(project, || {
        store.transact(project, Some(actor), |tx| {
            require_rank(tx, actor, Rank::Reviewer)?;
            let cat = tx
                .schema
                .active_named(ElementKind::Category, category)
                .or_else(|| tx.schema.get_str(category).filter(|e| e.is_active() && e.kind == ElementKind::Category))
                .ok_or_else(|| Error::not_found(format!("category `{category}`")))?
                .clone();
            if !matches!(&cat.descriptor, Descriptor::Category(c) if c.shape == Shape::DynamicList) {
                return Err(Error::NotDynamic(category.to_string()));
            }
            if text.is_empty() {
                return Err(Error::Format("choice text must not be empty".into()));
            }
            let key = format!("{}.choice.{}", cat.id, slug(&text));
            let lower = text.to_lowercase();
            let existing = tx.schema.choices_of(&cat.id);
            if existing
                .iter()
                .any(|c| c.key == key || choice_text(c).to_lowercase() == lower)
            {
                return Err(Error::DuplicateChoice(text.clone()));
            }
            let descriptor = Descriptor::Choice {
                category: cat.id.clone(),
                text: text.clone(),
            };
            let version = tx.schema.version;
            let revived = tx
                .schema
                .elements
                .iter()
                .rev()
                .find(|e| !e.is_active() && e.key == key && e.descriptor == descriptor)
                .map(|e| e.id.clone());
            let op = match revived {
                Some(id) => MigrationOp::Reactivate { id },
                None => {
                    let taken = tx.schema.get_str(&key).is_some();
                    MigrationOp::Add {
                        element: NewElement {
                            id: if taken {
                                ElementId::new(format!("{key}@v{}", version + 1))
                            } else {
                                ElementId::new(key.clone())
                            },
                            key,
                            descriptor,
                            origin: Origin::User,
                        },
                        replaces: None,
                    }
                }
            };
            let plan = MigrationPlan {
                base_version: version,
                ops: vec![op],
                settings: None,
            };
            let schema = apply_in(tx, &plan, None)?;
            Ok(schema.choices_of(&cat.id).iter().map(|c| choice_text(c).to_string()).collect())
        })
    })
}
