use std::sync::Arc;
use std::time::Duration;

use axum::extract::{FromRequestParts, MatchedPath, RawPathParams, Request, State};
use axum::http::header::AUTHORIZATION;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use relis_core::store::Store;
use relis_core::ProjectId;

use crate::access::{self, Access};
use crate::entities;
use crate::error::{ApiError, ApiResult};
use crate::extract::{Caller, Token};
use crate::handlers as h;
use crate::session::Sessions;

#[derive(Clone)]
pub struct AppState {
    pub store: Store,
    pub sessions: Arc<Sessions>,
}

impl AppState {
    pub fn new(store: Store, session_ttl: Duration) -> Self {
        Self {
            store,
            sessions: Arc::new(Sessions::new(session_ttl)),
        }
    }
}

pub fn router(state: AppState) -> Router {
    let routes = Router::new()
        .route("/auth/login", post(h::login))
        .route("/auth/logout", post(h::logout))
        .route("/me", get(h::me))
        .route("/users", get(h::list_users).post(h::create_user))
        .route("/projects", get(h::list_projects).post(h::create_project))
        .route("/projects/{p}", get(h::project))
        .route("/projects/{p}/install", post(h::install))
        .route("/projects/{p}/schema", get(h::schema))
        .route("/projects/{p}/form", get(h::form))
        .route("/projects/{p}/configs", get(h::configs))
        .route("/projects/{p}/source", get(h::source))
        .route("/projects/{p}/papers/import", post(h::import))
        .route("/projects/{p}/papers", get(h::papers))
        .route("/projects/{p}/members", get(h::members).post(h::add_member))
        .route("/projects/{p}/members/{user}/{role}", axum::routing::delete(h::remove_member))
        .route("/projects/{p}/phases/{ph}/assign", post(h::auto_assign))
        .route("/projects/{p}/phases/{ph}/assignments", post(h::manual_assign))
        .route("/projects/{p}/phases/{ph}/queue", get(h::queue))
        .route("/projects/{p}/phases/{ph}/conflicts", get(h::conflicts))
        .route("/projects/{p}/phases/{ph}/conflicts/resolve", post(h::resolve_conflicts))
        .route("/projects/{p}/phases/{ph}/validate", post(h::validate))
        .route("/projects/{p}/phases/{ph}/close", post(h::close_phase))
        .route("/assignments/{a}/decision", post(h::decide))
        .route(
            "/projects/{p}/papers/{id}/classification",
            get(h::classification).put(h::classify),
        )
        .route("/projects/{p}/categories/{c}/choices", post(h::add_choice))
        .route("/projects/{p}/stats", get(h::stats))
        .route("/projects/{p}/stats.csv", get(h::stats_csv))
        .route("/projects/{p}/stats.json", get(h::stats_json))
        .route("/projects/{p}/entities/{entity}", get(entities::list).post(entities::add))
        .route(
            "/projects/{p}/entities/{entity}/{id}",
            get(entities::view).put(entities::modify).delete(entities::remove),
        )
        .route_layer(middleware::from_fn_with_state(state.clone(), authorize));
    routes
        .fallback(|| async { ApiError::new("E_NOT_FOUND", "no such route") })
        .method_not_allowed_fallback(|| async { ApiError::new("E_UNKNOWN_OP", "method not allowed on this route") })
        .with_state(state)
}

fn bearer(req: &Request) -> Option<String> {
    let value = req.headers().get(AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim().to_string())
}

/// Resolves the caller and enforces the route's entry of the matrix before
/// any body is read.
async fn authorize(State(app): State<AppState>, req: Request, next: Next) -> Response {
    match check(&app, req).await {
        Ok(req) => next.run(req).await,
        Err(e) => e.into_response(),
    }
}

async fn check(app: &AppState, req: Request) -> ApiResult<Request> {
    let path = req
        .extensions()
        .get::<MatchedPath>()
        .map(|m| m.as_str().to_string())
        .unwrap_or_default();
    // A route missing from the matrix is closed.
    let access = access::lookup(req.method().as_str(), &path).unwrap_or(Access::SiteAdmin);
    if access == Access::Public {
        return Ok(req);
    }
    let token = bearer(&req).ok_or_else(|| ApiError::new("E_BAD_CREDENTIALS", "missing bearer token"))?;
    let session = app.sessions.resolve(&token)?;
    let user = app.store.user(session.user).map_err(|_| ApiError::new("E_BAD_CREDENTIALS", "unknown user"))?;

    let (mut parts, body) = req.into_parts();
    let params = RawPathParams::from_request_parts(&mut parts, app)
        .await
        .map_err(|e| ApiError::new("E_NOT_FOUND", e.body_text()))?;
    let project = params.iter().find(|(k, _)| *k == "p").map(|(_, v)| v.to_string());
    let rank = match project {
        Some(p) => {
            let id: ProjectId = p.parse().map_err(|_| ApiError::not_found(format!("project {p}")))?;
            app.store.snapshot(id)?.effective_rank(user.id)
        }
        None => None,
    };
    if !access::allows(access, rank, user.site_admin) {
        return Err(match (access, rank) {
            (Access::Member(_), None) => ApiError::forbidden("caller is not a member of the project"),
            (Access::Member(need), Some(have)) => ApiError::forbidden(format!("requires {need} rank, caller is {have}")),
            _ => ApiError::forbidden("requires a site administrator"),
        });
    }
    parts.extensions.insert(Caller {
        user: user.id,
        site_admin: user.site_admin,
        rank,
    });
    parts.extensions.insert(Token(token));
    Ok(Request::from_parts(parts, body))
}
