//! Admin catalog and per-project record storage.
//!
//! Each project lives in its own namespace holding the installed schema,
//! the entity records, the memberships and the versioned configuration
//! documents. Writers on one project are serialized; readers take cheap
//! snapshots of the last committed state. With a data directory the layout
//! is:
//!
//! ```text
//! <data>/admin/catalog.json            users and projects
//! <data>/projects/<id>/state.json      one project namespace
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::Argon2;
use chrono::{DateTime, Utc};
use imbl::OrdMap;
use parking_lot::{Mutex, RwLock};
use rand::RngCore;
use relis_dsl::Rank;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::ids::{ElementId, ProjectId, RecordId, UserId};
use crate::schema::{
    builtin_attributes, ElementKind, ElementStatus, EntityConfig, FormDescriptor, ProjectSchema,
};

pub type Payload = Map<String, Value>;

/// Prefix of element ids naming built-in entities, e.g. `entity.paper`.
pub const BUILTIN_PREFIX: &str = "entity.";

pub fn builtin(entity: &str) -> String {
    format!("{BUILTIN_PREFIX}{entity}")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub login: String,
    pub display_name: String,
    pub password_hash: String,
    pub site_admin: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectInfo {
    pub id: ProjectId,
    pub name: String,
    pub label: String,
    pub schema_version: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Membership {
    pub user: UserId,
    pub role: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Catalog {
    pub users: BTreeMap<UserId, User>,
    pub projects: BTreeMap<ProjectId, ProjectInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Revision {
    pub record_version: u32,
    pub payload: Payload,
    pub refs: Vec<ElementId>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: RecordId,
    pub element_id: String,
    pub paper_id: Option<RecordId>,
    pub payload: Payload,
    /// Further schema elements this record holds data for.
    pub refs: Vec<ElementId>,
    pub record_version: u32,
    pub created_by: Option<UserId>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    /// Superseded payloads, oldest first.
    #[serde(default)]
    pub history: Vec<Revision>,
}

impl EntityRecord {
    pub fn str(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(Value::as_str)
    }

    pub fn u64(&self, key: &str) -> Option<u64> {
        self.payload.get(key).and_then(Value::as_u64)
    }

    pub fn bool(&self, key: &str) -> bool {
        self.payload.get(key).and_then(Value::as_bool).unwrap_or(false)
    }

    pub fn touches(&self, element: &ElementId) -> bool {
        self.element_id == element.as_str() || self.refs.contains(element)
    }
}

/// Record count per schema element.
pub type DataCounts = BTreeMap<ElementId, u64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VersionedDocuments {
    pub schema: ProjectSchema,
    pub configs: Vec<EntityConfig>,
    pub form: FormDescriptor,
    pub report: Value,
    pub source: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub offset: usize,
    pub limit: usize,
}

impl Page {
    pub const ALL: Page = Page {
        offset: 0,
        limit: usize::MAX,
    };

    pub fn new(offset: usize, limit: usize) -> Self {
        Self { offset, limit }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Paged<T> {
    pub items: Vec<T>,
    pub total: usize,
    pub offset: usize,
}

/// Committed state of one project namespace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectState {
    pub schema: ProjectSchema,
    // Persistent maps: a transaction clones the state in constant time.
    pub records: OrdMap<RecordId, EntityRecord>,
    pub memberships: Vec<Membership>,
    pub documents: OrdMap<u32, VersionedDocuments>,
}

impl ProjectState {
    fn new(id: ProjectId) -> Self {
        Self {
            schema: ProjectSchema::empty(id),
            records: OrdMap::new(),
            memberships: Vec::new(),
            documents: OrdMap::new(),
        }
    }

    pub fn project_id(&self) -> ProjectId {
        self.schema.project_id
    }

    pub fn record(&self, id: RecordId) -> Result<&EntityRecord> {
        self.records
            .get(&id)
            .ok_or_else(|| Error::not_found(format!("record {id}")))
    }

    fn check_element(&self, element: &str) -> Result<()> {
        if let Some(name) = element.strip_prefix(BUILTIN_PREFIX) {
            if builtin_attributes(name).is_some() {
                return Ok(());
            }
        }
        match self.schema.get_str(element) {
            Some(_) => Ok(()),
            None => Err(Error::not_found(format!("element `{element}`"))),
        }
    }

    /// Records of an element in (created_at, id) order.
    pub fn records_of<'a>(&'a self, element: &'a str) -> impl Iterator<Item = &'a EntityRecord> + 'a {
        // Ids and timestamps are both assigned under the writer lock, so id
        // order is creation order.
        self.records.values().filter(move |r| r.element_id == element)
    }

    pub fn list_records(
        &self,
        element: &str,
        filter: impl Fn(&EntityRecord) -> bool,
        page: Page,
    ) -> Result<Paged<EntityRecord>> {
        self.check_element(element)?;
        let mut all: Vec<&EntityRecord> = self.records_of(element).filter(|r| filter(r)).collect();
        all.sort_by_key(|r| (r.created_at, r.id));
        Ok(Paged {
            total: all.len(),
            offset: page.offset,
            items: all
                .into_iter()
                .skip(page.offset)
                .take(page.limit)
                .cloned()
                .collect(),
        })
    }

    pub fn count_records(&self, element: &str) -> Result<u64> {
        self.check_element(element)?;
        if element.starts_with(BUILTIN_PREFIX) {
            return Ok(self.records_of(element).count() as u64);
        }
        let id = ElementId::new(element);
        Ok(self.data_counts().get(&id).copied().unwrap_or(0))
    }

    /// Exact data count of every schema element. Roles count memberships.
    pub fn data_counts(&self) -> DataCounts {
        let mut counts: DataCounts = self
            .schema
            .elements
            .iter()
            .map(|e| (e.id.clone(), 0))
            .collect();
        for r in self.records.values() {
            let own = ElementId::new(r.element_id.clone());
            let mut seen = BTreeSet::new();
            for id in std::iter::once(&own).chain(&r.refs) {
                if seen.insert(id) {
                    if let Some(c) = counts.get_mut(id) {
                        *c += 1;
                    }
                }
            }
        }
        for e in &self.schema.elements {
            if e.kind == ElementKind::Role {
                let name = e.descriptor.name().unwrap_or_default();
                let n = self.memberships.iter().filter(|m| m.role == name).count() as u64;
                counts.insert(e.id.clone(), n);
            }
        }
        counts
    }

    /// Highest rank among the user's memberships in active roles.
    pub fn effective_rank(&self, user: UserId) -> Option<Rank> {
        self.memberships
            .iter()
            .filter(|m| m.user == user)
            .filter_map(|m| self.schema.rank_of_role(&m.role))
            .max()
    }

    /// Members holding an active role of at least `rank`, by id.
    pub fn members_with_rank(&self, rank: Rank) -> Vec<UserId> {
        let set: BTreeSet<UserId> = self
            .memberships
            .iter()
            .filter(|m| self.schema.rank_of_role(&m.role).is_some_and(|r| r >= rank))
            .map(|m| m.user)
            .collect();
        set.into_iter().collect()
    }

    /// Members holding exactly the active role `role`, by id.
    pub fn members_in_role(&self, role: &str) -> Vec<UserId> {
        if self.schema.rank_of_role(role).is_none() {
            return Vec::new();
        }
        let set: BTreeSet<UserId> = self
            .memberships
            .iter()
            .filter(|m| m.role == role)
            .map(|m| m.user)
            .collect();
        set.into_iter().collect()
    }

    pub fn has_admin(&self) -> bool {
        !self.members_with_rank(Rank::Admin).is_empty()
    }

    pub fn documents(&self, version: Option<u32>) -> Option<&VersionedDocuments> {
        match version {
            Some(v) => self.documents.get(&v),
            None => self.documents.values().next_back(),
        }
    }
}

/// An open transaction on one project. Changes become visible atomically
/// when the closure passed to [`Store::transact`] returns `Ok`.
pub struct Tx<'a> {
    state: ProjectState,
    actor: Option<UserId>,
    now: DateTime<Utc>,
    ids: &'a AtomicU64,
    created: Vec<RecordId>,
    removed: Vec<RecordId>,
}

impl std::ops::Deref for Tx<'_> {
    type Target = ProjectState;

    fn deref(&self) -> &ProjectState {
        &self.state
    }
}

impl Tx<'_> {
    pub fn now(&self) -> DateTime<Utc> {
        self.now
    }

    pub fn actor(&self) -> Option<UserId> {
        self.actor
    }

    /// Runs `f` as part of this transaction.
    pub fn nested<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        f(self)
    }

    fn check_writable(&self, element: &str, payload: &Payload) -> Result<()> {
        let allowed: &[&str] = if let Some(name) = element.strip_prefix(BUILTIN_PREFIX) {
            builtin_attributes(name).ok_or_else(|| Error::not_found(format!("element `{element}`")))?
        } else {
            let e = self
                .schema
                .get_str(element)
                .ok_or_else(|| Error::not_found(format!("element `{element}`")))?;
            if !e.is_active() {
                return Err(Error::ElementInactive(e.id.clone()));
            }
            if e.kind != ElementKind::Category {
                return Err(Error::InvalidPlan(format!("element `{element}` holds no records")));
            }
            &["values"]
        };
        match payload.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(key) => Err(Error::BadPayload {
                element: ElementId::new(element),
                key: key.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn add_record(
        &mut self,
        element: &str,
        paper_id: Option<RecordId>,
        payload: Payload,
        refs: Vec<ElementId>,
    ) -> Result<RecordId> {
        self.check_writable(element, &payload)?;
        let id = RecordId(self.ids.fetch_add(1, Ordering::SeqCst));
        self.created.push(id);
        self.state.records.insert(
            id,
            EntityRecord {
                id,
                element_id: element.to_string(),
                paper_id,
                payload,
                refs,
                record_version: 1,
                created_by: self.actor,
                created_at: self.now,
                updated_at: self.now,
                history: Vec::new(),
            },
        );
        Ok(id)
    }

    /// Replaces the payload of a record at `expected_version`.
    pub fn modify_record(
        &mut self,
        id: RecordId,
        expected_version: u32,
        payload: Payload,
        refs: Vec<ElementId>,
    ) -> Result<u32> {
        let element = self.record(id)?.element_id.clone();
        self.check_writable(&element, &payload)?;
        let now = self.now;
        let r = self.state.records.get_mut(&id).expect("checked above");
        if r.record_version != expected_version {
            return Err(Error::VersionStale {
                id,
                expected: expected_version,
                actual: r.record_version,
            });
        }
        let old_payload = std::mem::replace(&mut r.payload, payload);
        let old_refs = std::mem::replace(&mut r.refs, refs);
        r.history.push(Revision {
            record_version: r.record_version,
            payload: old_payload,
            refs: old_refs,
            updated_at: r.updated_at,
        });
        r.record_version += 1;
        r.updated_at = now;
        Ok(r.record_version)
    }

    /// Merges `changes` into the current payload.
    pub fn patch_record(&mut self, id: RecordId, changes: Payload) -> Result<u32> {
        let r = self.record(id)?;
        let (version, mut payload, refs) = (r.record_version, r.payload.clone(), r.refs.clone());
        payload.extend(changes);
        self.modify_record(id, version, payload, refs)
    }

    pub fn remove_record(&mut self, id: RecordId) -> Result<EntityRecord> {
        let element = self.record(id)?.element_id.clone();
        if let Some(e) = self.schema.get_str(&element) {
            if !e.is_active() {
                return Err(Error::ElementInactive(e.id.clone()));
            }
        }
        self.removed.push(id);
        Ok(self.state.records.remove(&id).expect("checked above"))
    }

    pub fn set_element_status(&mut self, id: &ElementId, status: ElementStatus) -> Result<()> {
        let version = self.state.schema.version;
        let e = self
            .state
            .schema
            .elements
            .iter_mut()
            .find(|e| &e.id == id)
            .ok_or_else(|| Error::not_found(format!("element `{id}`")))?;
        e.status = status;
        e.deactivated_in = match status {
            ElementStatus::Active => None,
            ElementStatus::Deactivated => Some(version),
        };
        Ok(())
    }

    pub(crate) fn schema_mut(&mut self) -> &mut ProjectSchema {
        &mut self.state.schema
    }

    pub(crate) fn put_documents(&mut self, docs: VersionedDocuments) {
        self.state.documents.insert(docs.schema.version, docs);
    }

    pub fn add_member(&mut self, user: UserId, role: &str) -> Result<()> {
        if self.schema.rank_of_role(role).is_none() {
            return Err(Error::not_found(format!("role `{role}`")));
        }
        let m = Membership {
            user,
            role: role.to_string(),
        };
        if self.state.memberships.contains(&m) {
            return Err(Error::Duplicate(format!("user {user} already holds role `{role}`")));
        }
        self.state.memberships.push(m);
        self.state.memberships.sort();
        Ok(())
    }

    pub fn remove_member(&mut self, user: UserId, role: &str) -> Result<()> {
        let before = self.state.memberships.len();
        self.state.memberships.retain(|m| !(m.user == user && m.role == role));
        if self.state.memberships.len() == before {
            return Err(Error::not_found(format!("membership of user {user} in `{role}`")));
        }
        if !self.state.has_admin() {
            return Err(Error::LastAdmin);
        }
        Ok(())
    }
}

struct Slot {
    state: RwLock<Arc<ProjectState>>,
    writer: Mutex<()>,
    install: Mutex<()>,
}

impl Slot {
    fn new(state: ProjectState) -> Arc<Self> {
        Arc::new(Self {
            state: RwLock::new(Arc::new(state)),
            writer: Mutex::new(()),
            install: Mutex::new(()),
        })
    }
}

struct Inner {
    dir: Option<PathBuf>,
    catalog: RwLock<Catalog>,
    projects: RwLock<BTreeMap<ProjectId, Arc<Slot>>>,
    /// Project of every committed record.
    owners: RwLock<HashMap<RecordId, ProjectId>>,
    ids: AtomicU64,
}

/// Thread-safe handle to all projects and the admin catalog.
#[derive(Clone)]
pub struct Store {
    inner: Arc<Inner>,
}

impl Default for Store {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Store {
    pub fn in_memory() -> Self {
        Self::build(None, Catalog::default(), BTreeMap::new())
    }

    /// Opens (or initializes) a store persisted under `dir`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join("admin")).map_err(storage)?;
        fs::create_dir_all(dir.join("projects")).map_err(storage)?;
        let catalog: Catalog = match fs::read(dir.join("admin/catalog.json")) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(storage)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Catalog::default(),
            Err(e) => return Err(storage(e)),
        };
        let mut states = BTreeMap::new();
        for &id in catalog.projects.keys() {
            let path = dir.join(format!("projects/{id}/state.json"));
            let state: ProjectState = match fs::read(&path) {
                Ok(bytes) => serde_json::from_slice(&bytes).map_err(storage)?,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => ProjectState::new(id),
                Err(e) => return Err(storage(e)),
            };
            states.insert(id, state);
        }
        Ok(Self::build(Some(dir), catalog, states))
    }

    fn build(dir: Option<PathBuf>, catalog: Catalog, states: BTreeMap<ProjectId, ProjectState>) -> Self {
        let max_id = catalog
            .users
            .keys()
            .map(|u| u.0)
            .chain(catalog.projects.keys().map(|p| p.0))
            .chain(states.values().flat_map(|s| s.records.keys().map(|r| r.0)))
            .max()
            .unwrap_or(0);
        let owners = states
            .iter()
            .flat_map(|(&p, s)| s.records.keys().map(move |&r| (r, p)))
            .collect();
        let projects = states.into_iter().map(|(id, s)| (id, Slot::new(s))).collect();
        Self {
            inner: Arc::new(Inner {
                dir,
                catalog: RwLock::new(catalog),
                projects: RwLock::new(projects),
                owners: RwLock::new(owners),
                ids: AtomicU64::new(max_id + 1),
            }),
        }
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.inner.dir.as_deref()
    }

    fn next_id(&self) -> u64 {
        self.inner.ids.fetch_add(1, Ordering::SeqCst)
    }

    fn persist_catalog(&self, catalog: &Catalog) -> Result<()> {
        match &self.inner.dir {
            Some(dir) => write_json(&dir.join("admin/catalog.json"), catalog),
            None => Ok(()),
        }
    }

    fn persist_project(&self, state: &ProjectState) -> Result<()> {
        match &self.inner.dir {
            Some(dir) => {
                let path = dir.join(format!("projects/{}/state.json", state.project_id()));
                write_json(&path, state)
            }
            None => Ok(()),
        }
    }

    // ---- users ----

    pub fn create_user(&self, login: &str, display_name: &str, password: &str, site_admin: bool) -> Result<UserId> {
        if login.trim().is_empty() {
            return Err(Error::Format("login must not be empty".into()));
        }
        let hash = hash_password(password)?;
        let mut cat = self.inner.catalog.write();
        if cat.users.values().any(|u| u.login == login) {
            return Err(Error::LoginTaken(login.to_string()));
        }
        let id = UserId(self.next_id());
        let mut next = cat.clone();
        next.users.insert(
            id,
            User {
                id,
                login: login.to_string(),
                display_name: display_name.to_string(),
                password_hash: hash,
                site_admin,
            },
        );
        self.persist_catalog(&next)?;
        *cat = next;
        Ok(id)
    }

    /// Checks a login/password pair. Unknown logins cost as much as wrong
    /// passwords.
    pub fn verify_login(&self, login: &str, password: &str) -> Result<UserId> {
        let found = self
            .inner
            .catalog
            .read()
            .users
            .values()
            .find(|u| u.login == login)
            .map(|u| (u.id, u.password_hash.clone()));
        match found {
            Some((id, hash)) if verify_password(password, &hash) => Ok(id),
            Some(_) => Err(Error::BadCredentials),
            None => {
                let _ = verify_password(password, dummy_hash());
                Err(Error::BadCredentials)
            }
        }
    }

    pub fn user(&self, id: UserId) -> Result<User> {
        self.inner
            .catalog
            .read()
            .users
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::not_found(format!("user {id}")))
    }

    pub fn user_by_login(&self, login: &str) -> Option<User> {
        self.inner.catalog.read().users.values().find(|u| u.login == login).cloned()
    }

    pub fn users(&self) -> Vec<User> {
        self.inner.catalog.read().users.values().cloned().collect()
    }

    // ---- projects ----

    /// Creates an empty project at schema version 0 with `creator` enrolled
    /// in `admin_role`, which the first install must declare.
    pub fn create_project(&self, name: &str, label: &str, creator: UserId, admin_role: &str) -> Result<ProjectId> {
        let mut cat = self.inner.catalog.write();
        if !cat.users.contains_key(&creator) {
            return Err(Error::not_found(format!("user {creator}")));
        }
        if cat.projects.values().any(|p| p.name == name) {
            return Err(Error::NameTaken(name.to_string()));
        }
        let id = ProjectId(self.next_id());
        let mut state = ProjectState::new(id);
        state.memberships.push(Membership {
            user: creator,
            role: admin_role.to_string(),
        });
        let mut next = cat.clone();
        next.projects.insert(
            id,
            ProjectInfo {
                id,
                name: name.to_string(),
                label: label.to_string(),
                schema_version: 0,
            },
        );
        self.persist_project(&state)?;
        self.persist_catalog(&next)?;
        self.inner.projects.write().insert(id, Slot::new(state));
        *cat = next;
        Ok(id)
    }

    /// Removes a project that was never installed.
    pub fn discard_project(&self, id: ProjectId) -> Result<()> {
        let mut cat = self.inner.catalog.write();
        let mut next = cat.clone();
        match next.projects.remove(&id) {
            Some(p) if p.schema_version == 0 => {}
            Some(_) => return Err(Error::Forbidden("installed projects cannot be discarded".into())),
            None => return Err(Error::not_found(format!("project {id}"))),
        }
        self.persist_catalog(&next)?;
        self.inner.projects.write().remove(&id);
        if let Some(dir) = &self.inner.dir {
            let _ = fs::remove_dir_all(dir.join(format!("projects/{id}")));
        }
        *cat = next;
        Ok(())
    }

    pub fn project(&self, id: ProjectId) -> Result<ProjectInfo> {
        self.inner
            .catalog
            .read()
            .projects
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::not_found(format!("project {id}")))
    }

    pub fn project_by_name(&self, name: &str) -> Option<ProjectInfo> {
        self.inner.catalog.read().projects.values().find(|p| p.name == name).cloned()
    }

    pub fn projects(&self) -> Vec<ProjectInfo> {
        self.inner.catalog.read().projects.values().cloned().collect()
    }

    fn slot(&self, id: ProjectId) -> Result<Arc<Slot>> {
        self.inner
            .projects
            .read()
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::not_found(format!("project {id}")))
    }

    /// Last committed state of a project.
    pub fn snapshot(&self, id: ProjectId) -> Result<Arc<ProjectState>> {
        Ok(self.slot(id)?.state.read().clone())
    }

    /// Project holding record `id`, if any.
    pub fn project_of_record(&self, id: RecordId) -> Option<ProjectId> {
        self.inner.owners.read().get(&id).copied()
    }

    /// Runs `f` holding the exclusive install lock of a project.
    pub fn with_install_lock<T>(&self, project: ProjectId, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let slot = self.slot(project)?;
        let _install = slot.install.lock();
        f()
    }

    /// Runs `f` atomically: either every change it made is committed or,
    /// when it fails, none is.
    pub fn transact<T>(
        &self,
        project: ProjectId,
        actor: Option<UserId>,
        f: impl FnOnce(&mut Tx<'_>) -> Result<T>,
    ) -> Result<T> {
        let slot = self.slot(project)?;
        let _writer = slot.writer.lock();
        let base = slot.state.read().clone();
        let mut tx = Tx {
            state: (*base).clone(),
            actor,
            now: Utc::now(),
            ids: &self.inner.ids,
            created: Vec::new(),
            removed: Vec::new(),
        };
        let out = f(&mut tx)?;
        let Tx { state, created, removed, .. } = tx;
        self.persist_project(&state)?;
        let version = state.schema.version;
        {
            let mut owners = self.inner.owners.write();
            for id in removed {
                owners.remove(&id);
            }
            owners.extend(created.into_iter().filter(|id| state.records.contains_key(id)).map(|id| (id, project)));
        }
        *slot.state.write() = Arc::new(state);
        if version != base.schema.version {
            let mut cat = self.inner.catalog.write();
            let mut next = cat.clone();
            if let Some(p) = next.projects.get_mut(&project) {
                p.schema_version = version;
            }
            self.persist_catalog(&next)?;
            *cat = next;
        }
        Ok(out)
    }

    pub fn add_member(&self, project: ProjectId, actor: Option<UserId>, user: UserId, role: &str) -> Result<()> {
        self.user(user)?;
        self.transact(project, actor, |tx| tx.add_member(user, role))
    }

    pub fn remove_member(&self, project: ProjectId, actor: Option<UserId>, user: UserId, role: &str) -> Result<()> {
        self.transact(project, actor, |tx| tx.remove_member(user, role))
    }
}

fn storage(e: impl std::fmt::Display) -> Error {
    Error::Storage(e.to_string())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(storage)?;
    }
    let tmp = path.with_extension("json.tmp");
    let bytes = serde_json::to_vec(value).map_err(storage)?;
    fs::write(&tmp, bytes).map_err(storage)?;
    fs::rename(&tmp, path).map_err(storage)
}

fn hash_password(password: &str) -> Result<String> {
    let mut salt = [0u8; 16];
    rand::rng().fill_bytes(&mut salt);
    let salt = SaltString::encode_b64(&salt).map_err(storage)?;
    Argon2::default()
        .hash_password(password.as_bytes(), &salt)
        .map(|h| h.to_string())
        .map_err(storage)
}

fn verify_password(password: &str, hash: &str) -> bool {
    PasswordHash::new(hash)
        .map(|h| Argon2::default().verify_password(password.as_bytes(), &h).is_ok())
        .unwrap_or(false)
}

fn dummy_hash() -> &'static str {
    static HASH: std::sync::OnceLock<String> = std::sync::OnceLock::new();
    HASH.get_or_init(|| hash_password("relis-dummy").unwrap_or_default())
}
