//! Generic dispatch: one controller per operation, parameterized by the
//! entity configuration named in the path.

use std::collections::BTreeSet;

use axum::extract::State;
use axum::http::StatusCode;
use axum::Json;
use relis_core::engine::{self, ClassificationInput, Completeness, DecisionInput, PaperData, Workflow};
use relis_core::schema::{EntityConfig, Operation};
use relis_core::store::{ProjectState, BUILTIN_PREFIX};
use relis_core::{ProjectId, RecordId, UserId};
use relis_dsl::Rank;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::access::{allows, entity_access};
use crate::app::AppState;
use crate::error::{ApiError, ApiResult};
use crate::extract::{Body, Caller, Params, Q};
use crate::handlers::{add_member_blocking, blocking, create_user_blocking, NewMember, NewUser};

pub const DEFAULT_PER_PAGE: usize = 50;
pub const MAX_PER_PAGE: usize = 500;

/// `page` counts from 1.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct ListQuery {
    #[serde(default)]
    pub page: Option<usize>,
    #[serde(default)]
    pub per_page: Option<usize>,
}

struct Row {
    id: String,
    owner: Option<UserId>,
    fields: Map<String, Value>,
}

fn config_for(state: &ProjectState, entity: &str) -> ApiResult<EntityConfig> {
    state
        .documents(None)
        .and_then(|d| d.configs.iter().find(|c| c.entity == entity))
        .cloned()
        .ok_or_else(|| ApiError::unknown_entity(entity))
}

/// Resolves the configuration of `entity` and checks that `caller` may run
/// `op` on it.
fn authorize(state: &ProjectState, caller: Caller, entity: &str, op: Operation) -> ApiResult<EntityConfig> {
    let config = config_for(state, entity)?;
    if !config.supports(op) {
        return Err(ApiError::unknown_op(entity, op.as_str()));
    }
    let access = entity_access(entity, op).ok_or_else(|| ApiError::unknown_entity(entity))?;
    if !allows(access, caller.rank, caller.site_admin) {
        return Err(ApiError::forbidden(format!("`{}` on `{entity}` is not allowed for this caller", op.as_str())));
    }
    Ok(config)
}

fn record_row(r: &relis_core::store::EntityRecord) -> Row {
    let mut fields = r.payload.clone();
    fields.insert("record_version".into(), r.record_version.into());
    Row {
        id: r.id.to_string(),
        owner: None,
        fields,
    }
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn rows(app: &AppState, state: &ProjectState, config: &EntityConfig) -> ApiResult<Vec<Row>> {
    let entity = config.entity.as_str();
    let out = match entity {
        "paper" => state.records_of(engine::PAPER).map(record_row).collect(),
        "conflict" => state.records_of(engine::CONFLICT).map(record_row).collect(),
        "member" => state
            .memberships
            .iter()
            .map(|m| Row {
                id: format!("{}:{}", m.user, m.role),
                owner: Some(m.user),
                fields: object(json!({ "user": m.user, "role": m.role })),
            })
            .collect(),
        "user" => {
            let ids: BTreeSet<UserId> = state.memberships.iter().map(|m| m.user).collect();
            let mut out = Vec::new();
            for id in ids {
                let u = app.store.user(id)?;
                out.push(Row {
                    id: id.to_string(),
                    owner: Some(id),
                    fields: object(json!({ "login": u.login, "display_name": u.display_name })),
                });
            }
            out
        }
        "assignment" => Workflow::new(state)?
            .assignments
            .into_iter()
            .map(|a| Row {
                id: a.id.to_string(),
                owner: Some(a.data.reviewer),
                fields: object(json!(a.data)),
            })
            .collect(),
        "decision" => {
            let w = Workflow::new(state)?;
            let mut ds: Vec<_> = w.decisions.into_values().collect();
            ds.sort_by_key(|d| d.id);
            ds.into_iter()
                .map(|d| {
                    let mut fields = object(json!(d.data));
                    fields.insert("record_version".into(), d.record_version.into());
                    Row {
                        id: d.id.to_string(),
                        owner: Some(d.data.reviewer),
                        fields,
                    }
                })
                .collect()
        }
        "classification" => {
            let papers: BTreeSet<RecordId> = state
                .records
                .values()
                .filter(|r| r.element_id == engine::CLASSIFICATION || r.element_id.starts_with("category."))
                .filter_map(|r| r.paper_id)
                .collect();
            let mut out = Vec::new();
            for paper in papers {
                let c = engine::classification(state, paper)?;
                let mut fields = Map::new();
                for a in &config.attributes {
                    if let Some(el) = &a.element {
                        fields.insert(a.name.clone(), json!(c.values.get(el).cloned().unwrap_or_default()));
                    }
                }
                fields.insert("complete".into(), (c.completeness == Completeness::Complete).into());
                fields.insert("record_version".into(), c.record_version.into());
                out.push(Row {
                    id: paper.to_string(),
                    owner: None,
                    fields,
                });
            }
            out
        }
        element if !element.starts_with(BUILTIN_PREFIX) => state
            .records_of(element)
            .map(|r| {
                let mut row = record_row(r);
                row.fields.insert("paper".into(), json!(r.paper_id));
                row
            })
            .collect(),
        other => return Err(ApiError::unknown_entity(other)),
    };
    Ok(out)
}

/// Reviewers see only their own assignments and decisions.
fn visible(caller: Caller, entity: &str, row: &Row) -> bool {
    match entity {
        "assignment" | "decision" if caller.rank == Some(Rank::Reviewer) => row.owner == Some(caller.user),
        _ => true,
    }
}

/// The row restricted to the attributes the configuration shows for `op`.
fn project(row: &Row, config: &EntityConfig, op: Operation) -> Value {
    let mut out = Map::new();
    out.insert("id".into(), row.id.clone().into());
    for a in config.attributes_for(op) {
        out.insert(a.name.clone(), row.fields.get(&a.name).cloned().unwrap_or(Value::Null));
    }
    for extra in ["record_version", "paper"] {
        if let Some(v) = row.fields.get(extra) {
            out.entry(extra).or_insert_with(|| v.clone());
        }
    }
    Value::Object(out)
}

/// The list operation shared by every entity.
pub fn list_entity(app: &AppState, caller: Caller, p: ProjectId, entity: &str, q: &ListQuery) -> ApiResult<Value> {
    let state = app.store.snapshot(p)?;
    let config = authorize(&state, caller, entity, Operation::List)?;
    let per_page = q.per_page.unwrap_or(DEFAULT_PER_PAGE);
    if per_page == 0 || per_page > MAX_PER_PAGE {
        return Err(ApiError::format(format!("per_page must be within 1..={MAX_PER_PAGE}")));
    }
    let page = q.page.unwrap_or(1);
    if page == 0 {
        return Err(ApiError::format("page counts from 1"));
    }
    let all: Vec<Row> = rows(app, &state, &config)?
        .into_iter()
        .filter(|r| visible(caller, entity, r))
        .collect();
    let items: Vec<Value> = all
        .iter()
        .skip((page - 1).saturating_mul(per_page))
        .take(per_page)
        .map(|r| project(r, &config, Operation::List))
        .collect();
    Ok(json!({
        "entity": entity,
        "items": items,
        "total": all.len(),
        "page": page,
        "per_page": per_page,
    }))
}

fn view_entity(app: &AppState, caller: Caller, p: ProjectId, entity: &str, id: &str) -> ApiResult<Value> {
    let state = app.store.snapshot(p)?;
    let config = authorize(&state, caller, entity, Operation::View)?;
    rows(app, &state, &config)?
        .iter()
        .find(|r| r.id == id && visible(caller, entity, r))
        .map(|r| project(r, &config, Operation::View))
        .ok_or_else(|| ApiError::not_found(format!("{entity} {id}")))
}

pub async fn list(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, entity)): Params<(ProjectId, String)>,
    Q(q): Q<ListQuery>,
) -> ApiResult<Json<Value>> {
    list_entity(&app, caller, p, &entity, &q).map(Json)
}

pub async fn view(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, entity, id)): Params<(ProjectId, String, String)>,
) -> ApiResult<Json<Value>> {
    view_entity(&app, caller, p, &entity, &id).map(Json)
}

fn parse<T: serde::de::DeserializeOwned>(v: Value) -> ApiResult<T> {
    serde_json::from_value(v).map_err(|e| ApiError::format(format!("invalid body: {e}")))
}

fn record_id(id: &str) -> ApiResult<RecordId> {
    id.parse().map_err(|_| ApiError::not_found(format!("record {id}")))
}

/// Checks that record `id` lives in project `p`.
fn in_project(app: &AppState, p: ProjectId, id: RecordId) -> ApiResult<()> {
    match app.store.project_of_record(id) {
        Some(q) if q == p => Ok(()),
        _ => Err(ApiError::not_found(format!("record {id}"))),
    }
}

#[derive(Deserialize)]
struct NewAssignment {
    phase: String,
    paper: RecordId,
    reviewer: UserId,
}

#[derive(Deserialize)]
struct NewDecision {
    assignment: RecordId,
    #[serde(flatten)]
    input: DecisionInput,
}

pub async fn add(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, entity)): Params<(ProjectId, String)>,
    Body(body): Body<Value>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let state = app.store.snapshot(p)?;
    authorize(&state, caller, &entity, Operation::Add)?;
    let out = blocking(move || {
        let store = &app.store;
        Ok(match entity.as_str() {
            "paper" => {
                let data: PaperData = parse(body)?;
                let id = store.transact(p, Some(caller.user), |tx| engine::add_paper(tx, data))?;
                view_entity(&app, caller, p, "paper", &id.to_string())?
            }
            "member" => add_member_blocking(&app, caller, p, parse::<NewMember>(body)?)?,
            "user" => json!(create_user_blocking(&app, parse::<NewUser>(body)?)?),
            "assignment" => {
                let b: NewAssignment = parse(body)?;
                json!(engine::manual_assign(store, p, &b.phase, b.paper, b.reviewer, caller.user)?)
            }
            "decision" => {
                let b: NewDecision = parse(body)?;
                in_project(&app, p, b.assignment)?;
                json!(engine::submit_decision(store, b.assignment, caller.user, b.input)?)
            }
            other => return Err(ApiError::unknown_op(other, "add")),
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(out)))
}

#[derive(Deserialize)]
struct PaperUpdate {
    record_version: u32,
    #[serde(flatten)]
    paper: PaperData,
}

pub async fn modify(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, entity, id)): Params<(ProjectId, String, String)>,
    Body(body): Body<Value>,
) -> ApiResult<Json<Value>> {
    let state = app.store.snapshot(p)?;
    authorize(&state, caller, &entity, Operation::Modify)?;
    let rid = record_id(&id)?;
    in_project(&app, p, rid)?;
    let out = blocking(move || {
        let store = &app.store;
        Ok(match entity.as_str() {
            "paper" => {
                let b: PaperUpdate = parse(body)?;
                store.transact(p, Some(caller.user), |tx| engine::modify_paper(tx, rid, b.record_version, b.paper))?;
                view_entity(&app, caller, p, "paper", &id)?
            }
            "decision" => {
                let snap = store.snapshot(p)?;
                let r = snap.record(rid)?;
                let assignment = (r.element_id == engine::DECISION)
                    .then(|| r.u64("assignment"))
                    .flatten()
                    .ok_or_else(|| ApiError::not_found(format!("decision {id}")))?;
                let input: DecisionInput = parse(body)?;
                json!(engine::submit_decision(store, RecordId(assignment), caller.user, input)?)
            }
            "classification" => {
                let input: ClassificationInput = parse(body)?;
                json!(engine::submit_classification(store, p, rid, caller.user, input)?)
            }
            other => return Err(ApiError::unknown_op(other, "modify")),
        })
    })
    .await?;
    Ok(Json(out))
}

pub async fn remove(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, entity, id)): Params<(ProjectId, String, String)>,
) -> ApiResult<StatusCode> {
    let state = app.store.snapshot(p)?;
    authorize(&state, caller, &entity, Operation::Remove)?;
    blocking(move || {
        let store = &app.store;
        match entity.as_str() {
            "paper" => {
                let rid = record_id(&id)?;
                in_project(&app, p, rid)?;
                store.transact(p, Some(caller.user), |tx| engine::remove_paper(tx, rid))?;
            }
            "member" => {
                let (user, role) = id
                    .split_once(':')
                    .and_then(|(u, r)| Some((u.parse::<UserId>().ok()?, r.to_string())))
                    .ok_or_else(|| ApiError::not_found(format!("member {id}")))?;
                store.remove_member(p, Some(caller.user), user, &role)?;
            }
            other => return Err(ApiError::unknown_op(other, "remove")),
        }
        Ok(())
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}
