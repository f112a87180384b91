//! Authorization matrix.
//!
//! Ranks are ordered reviewer < senior < admin and a member acts with the
//! highest rank among their roles. Reviewers work their own queue,
//! decisions and classifications; seniors add validation and conflict
//! resolution; admins add install, import, assignment and membership.

use relis_core::schema::Operation;
use relis_dsl::Rank;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Access {
    /// No session needed.
    Public,
    /// Any valid session.
    User,
    /// Valid session of a site administrator.
    SiteAdmin,
    /// Member of the project in the path holding at least this rank.
    Member(Rank),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Route {
    pub method: &'static str,
    pub path: &'static str,
    pub access: Access,
}

const fn route(method: &'static str, path: &'static str, access: Access) -> Route {
    Route { method, path, access }
}

const REVIEWER: Access = Access::Member(Rank::Reviewer);
const SENIOR: Access = Access::Member(Rank::Senior);
const ADMIN: Access = Access::Member(Rank::Admin);

/// Every route of the API with the access it requires.
pub const ROUTES: &[Route] = &[
    route("POST", "/auth/login", Access::Public),
    route("POST", "/auth/logout", Access::User),
    route("GET", "/me", Access::User),
    route("GET", "/users", Access::User),
    route("POST", "/users", Access::SiteAdmin),
    route("GET", "/projects", Access::User),
    route("POST", "/projects", Access::User),
    route("GET", "/projects/{p}", REVIEWER),
    route("POST", "/projects/{p}/install", ADMIN),
    route("GET", "/projects/{p}/schema", REVIEWER),
    route("GET", "/projects/{p}/form", REVIEWER),
    route("GET", "/projects/{p}/configs", REVIEWER),
    route("GET", "/projects/{p}/source", REVIEWER),
    route("POST", "/projects/{p}/papers/import", ADMIN),
    route("GET", "/projects/{p}/papers", REVIEWER),
    route("GET", "/projects/{p}/members", REVIEWER),
    route("POST", "/projects/{p}/members", ADMIN),
    route("DELETE", "/projects/{p}/members/{user}/{role}", ADMIN),
    route("POST", "/projects/{p}/phases/{ph}/assign", ADMIN),
    route("POST", "/projects/{p}/phases/{ph}/assignments", ADMIN),
    route("GET", "/projects/{p}/phases/{ph}/queue", REVIEWER),
    route("GET", "/projects/{p}/phases/{ph}/conflicts", SENIOR),
    route("POST", "/projects/{p}/phases/{ph}/conflicts/resolve", SENIOR),
    route("POST", "/projects/{p}/phases/{ph}/validate", SENIOR),
    route("POST", "/projects/{p}/phases/{ph}/close", ADMIN),
    // The assignment itself decides: only its reviewer may answer it.
    route("POST", "/assignments/{a}/decision", Access::User),
    route("GET", "/projects/{p}/papers/{id}/classification", REVIEWER),
    route("PUT", "/projects/{p}/papers/{id}/classification", REVIEWER),
    route("POST", "/projects/{p}/categories/{c}/choices", REVIEWER),
    route("GET", "/projects/{p}/stats", REVIEWER),
    route("GET", "/projects/{p}/stats.csv", REVIEWER),
    route("GET", "/projects/{p}/stats.json", REVIEWER),
    // Generic dispatch; the entity and operation refine the rank.
    route("GET", "/projects/{p}/entities/{entity}", REVIEWER),
    route("POST", "/projects/{p}/entities/{entity}", REVIEWER),
    route("GET", "/projects/{p}/entities/{entity}/{id}", REVIEWER),
    route("PUT", "/projects/{p}/entities/{entity}/{id}", REVIEWER),
    route("DELETE", "/projects/{p}/entities/{entity}/{id}", REVIEWER),
];

pub fn lookup(method: &str, path: &str) -> Option<Access> {
    ROUTES
        .iter()
        .find(|r| r.method == method && r.path == path)
        .map(|r| r.access)
}

/// Rank needed for `op` on a built-in entity or scheme element. `None`
/// when the entity is unknown.
pub fn entity_access(entity: &str, op: Operation) -> Option<Access> {
    use Operation::*;
    let read = matches!(op, List | View);
    Some(match entity {
        "paper" | "member" if read => REVIEWER,
        "paper" | "member" => ADMIN,
        "user" if read => REVIEWER,
        "user" => Access::SiteAdmin,
        "assignment" if read => REVIEWER,
        "assignment" => ADMIN,
        "decision" | "classification" => REVIEWER,
        "conflict" => SENIOR,
        _ if entity.starts_with("category.") => REVIEWER,
        _ => return None,
    })
}

/// Whether a caller of `rank` (or a non-member) passes `access`.
pub fn allows(access: Access, rank: Option<Rank>, site_admin: bool) -> bool {
    match access {
        Access::Public | Access::User => true,
        Access::SiteAdmin => site_admin,
        Access::Member(need) => rank.is_some_and(|r| r >= need),
    }
}
