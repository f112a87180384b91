use axum::extract::State;
use axum::http::header::CONTENT_TYPE;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::{DateTime, Utc};
use rand::Rng;
use relis_core::engine::{self, ClassificationInput, DecisionInput, ImportFormat};
use relis_core::installer;
use relis_core::store::{ProjectState, User, VersionedDocuments};
use relis_core::{ProjectId, RecordId, UserId};
use relis_dsl::Rank;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::app::AppState;
use crate::entities::{list_entity, ListQuery};
use crate::error::{ApiError, ApiResult};
use crate::extract::{Body, Caller, Params, Text, Token, Q};

/// Runs store work off the async executor.
pub(crate) async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|_| ApiError::new("E_STORAGE", "worker failed"))?
}

#[derive(Serialize)]
pub struct UserView {
    pub id: UserId,
    pub login: String,
    pub display_name: String,
    pub site_admin: bool,
}

impl From<User> for UserView {
    fn from(u: User) -> Self {
        Self {
            id: u.id,
            login: u.login,
            display_name: u.display_name,
            site_admin: u.site_admin,
        }
    }
}

// ---- auth ----

#[derive(Deserialize)]
pub struct Login {
    login: String,
    password: String,
}

#[derive(Serialize)]
pub struct LoginResponse {
    token: String,
    user: UserView,
    expires_at: DateTime<Utc>,
}

pub async fn login(State(app): State<AppState>, Body(body): Body<Login>) -> ApiResult<Json<LoginResponse>> {
    let store = app.store.clone();
    let user = blocking(move || {
        let id = store.verify_login(&body.login, &body.password)?;
        Ok(store.user(id)?)
    })
    .await?;
    let (token, session) = app.sessions.issue(user.id);
    Ok(Json(LoginResponse {
        token,
        user: user.into(),
        expires_at: session.expires_at,
    }))
}

pub async fn logout(State(app): State<AppState>, Token(token): Token) -> ApiResult<StatusCode> {
    app.sessions.revoke(&token)?;
    Ok(StatusCode::NO_CONTENT)
}

pub async fn me(State(app): State<AppState>, caller: Caller) -> ApiResult<Json<UserView>> {
    Ok(Json(app.store.user(caller.user)?.into()))
}

// ---- users ----

pub async fn list_users(State(app): State<AppState>) -> Json<Vec<UserView>> {
    Json(app.store.users().into_iter().map(UserView::from).collect())
}

#[derive(Deserialize)]
pub struct NewUser {
    pub login: String,
    #[serde(default)]
    pub display_name: Option<String>,
    pub password: String,
    #[serde(default)]
    pub site_admin: bool,
}

pub(crate) fn create_user_blocking(app: &AppState, body: NewUser) -> ApiResult<UserView> {
    let name = body.display_name.clone().unwrap_or_else(|| body.login.clone());
    let id = app.store.create_user(&body.login, &name, &body.password, body.site_admin)?;
    Ok(app.store.user(id)?.into())
}

pub async fn create_user(State(app): State<AppState>, Body(body): Body<NewUser>) -> ApiResult<(StatusCode, Json<UserView>)> {
    let user = blocking(move || create_user_blocking(&app, body)).await?;
    Ok((StatusCode::CREATED, Json(user)))
}

// ---- projects ----

#[derive(Serialize)]
pub struct ProjectView {
    #[serde(flatten)]
    info: relis_core::store::ProjectInfo,
    rank: Option<Rank>,
}

pub async fn list_projects(State(app): State<AppState>, caller: Caller) -> ApiResult<Json<Vec<ProjectView>>> {
    let mut out = Vec::new();
    for info in app.store.projects() {
        let rank = app.store.snapshot(info.id)?.effective_rank(caller.user);
        if rank.is_some() || caller.site_admin {
            out.push(ProjectView { info, rank });
        }
    }
    Ok(Json(out))
}

pub async fn project(State(app): State<AppState>, caller: Caller, Params(p): Params<ProjectId>) -> ApiResult<Json<ProjectView>> {
    Ok(Json(ProjectView {
        info: app.store.project(p)?,
        rank: caller.rank,
    }))
}

pub async fn create_project(
    State(app): State<AppState>,
    caller: Caller,
    Text(source): Text,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let store = app.store.clone();
    let installed = blocking(move || Ok(installer::install_new(&store, caller.user, &source)?)).await?;
    let info = app.store.project(installed.project)?;
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "project": info,
            "schema": installed.schema,
            "report": installed.report,
            "diagnostics": [],
        })),
    ))
}

#[derive(Deserialize)]
pub struct InstallQuery {
    #[serde(default)]
    dry_run: bool,
    #[serde(default)]
    base_version: Option<u32>,
}

pub async fn install(
    State(app): State<AppState>,
    caller: Caller,
    Params(p): Params<ProjectId>,
    Q(q): Q<InstallQuery>,
    Text(source): Text,
) -> ApiResult<Json<Value>> {
    // A live install must name the version its preview was computed on.
    if !q.dry_run && q.base_version.is_none() {
        return Err(ApiError::format("base_version is required unless dry_run=true"));
    }
    let store = app.store.clone();
    let out = blocking(move || {
        Ok(installer::reinstall(&store, p, Some(caller.user), &source, q.dry_run, q.base_version)?)
    })
    .await?;
    Ok(Json(json!({
        "applied": out.applied,
        "dry_run": q.dry_run,
        "schema_version": out.schema.version,
        "report": out.report,
        "diagnostics": [],
    })))
}

#[derive(Deserialize)]
pub struct VersionQuery {
    #[serde(default)]
    version: Option<u32>,
}

fn documents<T>(app: &AppState, p: ProjectId, version: Option<u32>, f: impl FnOnce(&VersionedDocuments) -> T) -> ApiResult<T> {
    let snap = app.store.snapshot(p)?;
    let docs = snap.documents(version).ok_or_else(|| match version {
        Some(v) => ApiError::not_found(format!("schema version {v}")),
        None => ApiError::not_found("installed schema"),
    })?;
    Ok(f(docs))
}

pub async fn schema(State(app): State<AppState>, Params(p): Params<ProjectId>, Q(q): Q<VersionQuery>) -> ApiResult<Json<Value>> {
    documents(&app, p, q.version, |d| Json(json!(d.schema)))
}

pub async fn form(State(app): State<AppState>, Params(p): Params<ProjectId>, Q(q): Q<VersionQuery>) -> ApiResult<Json<Value>> {
    documents(&app, p, q.version, |d| Json(json!(d.form)))
}

pub async fn configs(State(app): State<AppState>, Params(p): Params<ProjectId>, Q(q): Q<VersionQuery>) -> ApiResult<Json<Value>> {
    documents(&app, p, q.version, |d| Json(json!(d.configs)))
}

pub async fn source(State(app): State<AppState>, Params(p): Params<ProjectId>, Q(q): Q<VersionQuery>) -> ApiResult<Response> {
    let src = documents(&app, p, q.version, |d| d.source.clone())?
        .ok_or_else(|| ApiError::not_found("model source"))?;
    Ok(([(CONTENT_TYPE, "text/plain; charset=utf-8")], src).into_response())
}

// ---- papers and members ----

#[derive(Deserialize)]
pub struct ImportQuery {
    #[serde(default)]
    format: Option<String>,
}

pub async fn import(
    State(app): State<AppState>,
    caller: Caller,
    Params(p): Params<ProjectId>,
    Q(q): Q<ImportQuery>,
    Text(payload): Text,
) -> ApiResult<Json<engine::ImportReport>> {
    let name = q.format.unwrap_or_else(|| "csv".into());
    let format = ImportFormat::parse(&name).ok_or_else(|| ApiError::format(format!("unknown import format `{name}`")))?;
    let store = app.store.clone();
    let report = blocking(move || Ok(engine::import_papers(&store, p, caller.user, &payload, format)?)).await?;
    Ok(Json(report))
}

pub async fn papers(
    State(app): State<AppState>,
    caller: Caller,
    Params(p): Params<ProjectId>,
    Q(q): Q<ListQuery>,
) -> ApiResult<Json<Value>> {
    list_entity(&app, caller, p, "paper", &q).map(Json)
}

pub async fn members(
    State(app): State<AppState>,
    caller: Caller,
    Params(p): Params<ProjectId>,
    Q(q): Q<ListQuery>,
) -> ApiResult<Json<Value>> {
    list_entity(&app, caller, p, "member", &q).map(Json)
}

#[derive(Deserialize)]
pub struct NewMember {
    #[serde(default)]
    pub user: Option<UserId>,
    #[serde(default)]
    pub login: Option<String>,
    pub role: String,
}

pub(crate) fn add_member_blocking(app: &AppState, caller: Caller, p: ProjectId, body: NewMember) -> ApiResult<Value> {
    let user = match (body.user, &body.login) {
        (Some(id), _) => id,
        (None, Some(login)) => app
            .store
            .user_by_login(login)
            .ok_or_else(|| ApiError::not_found(format!("user `{login}`")))?
            .id,
        (None, None) => return Err(ApiError::format("either `user` or `login` is required")),
    };
    app.store.add_member(p, Some(caller.user), user, &body.role)?;
    Ok(json!({ "id": format!("{user}:{}", body.role), "user": user, "role": body.role }))
}

pub async fn add_member(
    State(app): State<AppState>,
    caller: Caller,
    Params(p): Params<ProjectId>,
    Body(body): Body<NewMember>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let out = blocking(move || add_member_blocking(&app, caller, p, body)).await?;
    Ok((StatusCode::CREATED, Json(out)))
}

pub async fn remove_member(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, user, role)): Params<(ProjectId, UserId, String)>,
) -> ApiResult<StatusCode> {
    blocking(move || Ok(app.store.remove_member(p, Some(caller.user), user, &role)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

// ---- screening ----

#[derive(Deserialize)]
pub struct SeedBody {
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Serialize)]
pub struct Seeded {
    seed: u64,
    assignments: Vec<engine::Assignment>,
}

pub async fn auto_assign(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, ph)): Params<(ProjectId, String)>,
    Body(body): Body<SeedBody>,
) -> ApiResult<Json<Seeded>> {
    let seed = body.seed.unwrap_or_else(|| rand::rng().random());
    let store = app.store.clone();
    let assignments = blocking(move || Ok(engine::auto_assign(&store, p, &ph, seed, caller.user)?)).await?;
    Ok(Json(Seeded { seed, assignments }))
}

#[derive(Deserialize)]
pub struct ManualAssignment {
    pub paper: RecordId,
    pub reviewer: UserId,
}

pub async fn manual_assign(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, ph)): Params<(ProjectId, String)>,
    Body(body): Body<ManualAssignment>,
) -> ApiResult<(StatusCode, Json<engine::Assignment>)> {
    let store = app.store.clone();
    let a = blocking(move || Ok(engine::manual_assign(&store, p, &ph, body.paper, body.reviewer, caller.user)?)).await?;
    Ok((StatusCode::CREATED, Json(a)))
}

pub async fn queue(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, ph)): Params<(ProjectId, String)>,
) -> ApiResult<Json<Vec<engine::Assignment>>> {
    let snap = app.store.snapshot(p)?;
    Ok(Json(engine::queue(&snap, &ph, caller.user)?))
}

pub async fn conflicts(
    State(app): State<AppState>,
    Params((p, ph)): Params<(ProjectId, String)>,
) -> ApiResult<Json<Vec<engine::ConflictCase>>> {
    let snap = app.store.snapshot(p)?;
    Ok(Json(engine::conflicts(&snap, &ph)?))
}

pub async fn resolve_conflicts(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, ph)): Params<(ProjectId, String)>,
) -> ApiResult<Json<Vec<engine::ConflictCase>>> {
    let store = app.store.clone();
    let out = blocking(move || Ok(engine::resolve_conflicts(&store, p, &ph, caller.user)?)).await?;
    Ok(Json(out))
}

pub async fn validate(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, ph)): Params<(ProjectId, String)>,
    Body(body): Body<SeedBody>,
) -> ApiResult<Json<Seeded>> {
    let seed = body.seed.unwrap_or_else(|| rand::rng().random());
    let store = app.store.clone();
    let assignments = blocking(move || Ok(engine::sample_validation(&store, p, &ph, seed, caller.user)?)).await?;
    Ok(Json(Seeded { seed, assignments }))
}

#[derive(Deserialize)]
pub struct CloseBody {
    #[serde(default = "yes")]
    closed: bool,
}

fn yes() -> bool {
    true
}

pub async fn close_phase(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, ph)): Params<(ProjectId, String)>,
    Body(body): Body<CloseBody>,
) -> ApiResult<Json<Value>> {
    let store = app.store.clone();
    let phase = ph.clone();
    blocking(move || Ok(engine::close_phase(&store, p, &phase, caller.user, body.closed)?)).await?;
    Ok(Json(json!({ "phase": ph, "closed": body.closed })))
}

pub async fn decide(
    State(app): State<AppState>,
    caller: Caller,
    Params(a): Params<RecordId>,
    Body(input): Body<DecisionInput>,
) -> ApiResult<Json<engine::ScreeningDecision>> {
    let store = app.store.clone();
    let d = blocking(move || Ok(engine::submit_decision(&store, a, caller.user, input)?)).await?;
    Ok(Json(d))
}

// ---- classification ----

pub async fn classification(
    State(app): State<AppState>,
    Params((p, paper)): Params<(ProjectId, RecordId)>,
) -> ApiResult<Json<engine::ClassificationRecord>> {
    let snap = app.store.snapshot(p)?;
    Ok(Json(engine::classification(&snap, paper)?))
}

pub async fn classify(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, paper)): Params<(ProjectId, RecordId)>,
    Body(input): Body<ClassificationInput>,
) -> ApiResult<Json<engine::ClassificationRecord>> {
    let store = app.store.clone();
    let out = blocking(move || Ok(engine::submit_classification(&store, p, paper, caller.user, input)?)).await?;
    Ok(Json(out))
}

#[derive(Deserialize)]
pub struct NewChoice {
    value: String,
}

pub async fn add_choice(
    State(app): State<AppState>,
    caller: Caller,
    Params((p, c)): Params<(ProjectId, String)>,
    Body(body): Body<NewChoice>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let store = app.store.clone();
    let category = c.clone();
    let choices = blocking(move || Ok(engine::add_dynamic_choice(&store, p, &category, &body.value, caller.user)?)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "category": c, "choices": choices }))))
}

// ---- statistics ----

fn report(app: &AppState, p: ProjectId) -> ApiResult<engine::StatsReport> {
    let snap: std::sync::Arc<ProjectState> = app.store.snapshot(p)?;
    Ok(engine::stats(&snap)?)
}

pub async fn stats(State(app): State<AppState>, Params(p): Params<ProjectId>) -> ApiResult<Json<engine::StatsReport>> {
    report(&app, p).map(Json)
}

pub async fn stats_json(State(app): State<AppState>, Params(p): Params<ProjectId>) -> ApiResult<Json<Value>> {
    Ok(Json(engine::export_json(&report(&app, p)?)))
}

pub async fn stats_csv(State(app): State<AppState>, Params(p): Params<ProjectId>) -> ApiResult<Response> {
    let csv = engine::export_csv(&report(&app, p)?)?;
    Ok(([(CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}
