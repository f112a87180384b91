//! Turns validated models into schema migrations and applies them.

use std::collections::{BTreeMap, BTreeSet};

use relis_dsl::{
    dependency_graph, slug, CategoryDecl, CategoryKind, ConfigModel, Rank, ValidatedModel,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ids::{ElementId, ProjectId, UserId};
use crate::schema::{
    derive_entity_configs, derive_form, CategoryDescriptor, Dependency, Descriptor, ElementKind,
    ElementStatus, Origin, ProjectSchema, SchemaElement, Settings, Shape,
};
use crate::store::{DataCounts, ProjectState, Store, Tx, VersionedDocuments};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewElement {
    pub id: ElementId,
    pub key: String,
    pub descriptor: Descriptor,
    pub origin: Origin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum MigrationOp {
    Add {
        element: NewElement,
        /// Active element under the same key that this one supersedes.
        replaces: Option<ElementId>,
    },
    Drop { id: ElementId },
    Deactivate { id: ElementId },
    Reactivate { id: ElementId },
}

impl MigrationOp {
    pub fn target(&self) -> &ElementId {
        match self {
            MigrationOp::Add { element, .. } => &element.id,
            MigrationOp::Drop { id } | MigrationOp::Deactivate { id } | MigrationOp::Reactivate { id } => id,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MigrationOp::Add { .. } => "add",
            MigrationOp::Drop { .. } => "drop",
            MigrationOp::Deactivate { .. } => "deactivate",
            MigrationOp::Reactivate { .. } => "reactivate",
        }
    }

    pub fn reason(&self) -> &'static str {
        match self {
            MigrationOp::Add { replaces: None, .. } => "new→add",
            MigrationOp::Add { replaces: Some(_), .. } => "changed→add",
            MigrationOp::Drop { .. } => "empty→drop",
            MigrationOp::Deactivate { .. } => "has-data→deactivate",
            MigrationOp::Reactivate { .. } => "identical→reactivate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MigrationPlan {
    pub base_version: u32,
    pub ops: Vec<MigrationOp>,
    /// New project settings, when they differ from the installed ones.
    pub settings: Option<Settings>,
}

impl MigrationPlan {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty() && self.settings.is_none()
    }

    pub fn report(&self) -> PlanReport {
        PlanReport {
            base_version: self.base_version,
            empty: self.is_empty(),
            settings_changed: self.settings.is_some(),
            entries: self
                .ops
                .iter()
                .map(|op| ReportEntry {
                    op: op.name(),
                    id: op.target().clone(),
                    reason: op.reason(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportEntry {
    pub op: &'static str,
    pub id: ElementId,
    pub reason: &'static str,
}

/// Human-readable dry-run view of a plan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanReport {
    pub base_version: u32,
    pub empty: bool,
    pub settings_changed: bool,
    pub entries: Vec<ReportEntry>,
}

/// Plan installing `model` into a fresh project.
pub fn compile(model: &ValidatedModel) -> MigrationPlan {
    diff(&ProjectSchema::empty(ProjectId(0)), model, &DataCounts::new())
}

/// Like [`diff`], but rejects a schema that is no longer the project's
/// current one.
pub fn diff_current(state: &ProjectState, schema: &ProjectSchema, model: &ValidatedModel) -> Result<MigrationPlan> {
    if schema.version != state.schema.version {
        return Err(Error::StaleSchema {
            given: schema.version,
            current: state.schema.version,
        });
    }
    Ok(diff(schema, model, &state.data_counts()))
}

/// Plan moving `schema` to the declarations of `model` without losing data.
pub fn diff(schema: &ProjectSchema, model: &ValidatedModel, counts: &DataCounts) -> MigrationPlan {
    let mut d = Differ {
        schema,
        next_version: schema.version + 1,
        matched: BTreeSet::new(),
        used: schema.elements.iter().map(|e| e.id.clone()).collect(),
        declared_keys: BTreeSet::new(),
        reactivations: Vec::new(),
        adds: Vec::new(),
        layout: Vec::new(),
    };
    declare_all(&mut d, model);

    let mut removals = Vec::new();
    for e in schema.active() {
        if d.matched.contains(&e.id) || d.keeps_user_choice(e) {
            continue;
        }
        removals.push(if counts.get(&e.id).copied().unwrap_or(0) == 0 {
            MigrationOp::Drop { id: e.id.clone() }
        } else {
            MigrationOp::Deactivate { id: e.id.clone() }
        });
    }
    // User choices come back together with their reactivated category.
    let revived: Vec<&SchemaElement> = d
        .reactivations
        .iter()
        .filter_map(|id| schema.get(id))
        .filter(|e| e.kind == ElementKind::Category)
        .collect();
    let mut extra = Vec::new();
    for cat in revived {
        for e in &schema.elements {
            let Descriptor::Choice { category, .. } = &e.descriptor else { continue };
            if e.origin == Origin::User
                && !e.is_active()
                && category == &cat.id
                && e.deactivated_in == cat.deactivated_in
                && !d.declared_keys.contains(&e.key)
                && !d.reactivations.contains(&e.id)
            {
                extra.push(e.id.clone());
            }
        }
    }
    d.reactivations.extend(extra);

    let settings = Settings {
        label: model.project.label.clone(),
        assignment: model.screening.assignment.clone(),
        conflict: model.screening.conflict.clone(),
        validation: model.screening.validation.clone(),
        layout: d.layout,
    };
    let settings = (schema.settings.as_ref() != Some(&settings)).then_some(settings);

    let mut ops = removals;
    ops.extend(d.reactivations.into_iter().map(|id| MigrationOp::Reactivate { id }));
    ops.extend(d.adds);
    MigrationPlan {
        base_version: schema.version,
        ops,
        settings,
    }
}

struct Differ<'a> {
    schema: &'a ProjectSchema,
    next_version: u32,
    matched: BTreeSet<ElementId>,
    used: BTreeSet<ElementId>,
    declared_keys: BTreeSet<String>,
    reactivations: Vec<ElementId>,
    adds: Vec<MigrationOp>,
    layout: Vec<ElementId>,
}

impl Differ<'_> {
    /// Id under which `descriptor` is present after the plan.
    fn declare(&mut self, key: String, descriptor: Descriptor) -> ElementId {
        self.declared_keys.insert(key.clone());
        let same = |e: &&SchemaElement| e.key == key && e.descriptor == descriptor;
        let id = if let Some(e) = self.schema.active().find(same) {
            e.id.clone()
        } else if let Some(e) = self.schema.elements.iter().rev().filter(|e| !e.is_active()).find(same) {
            self.reactivations.push(e.id.clone());
            e.id.clone()
        } else {
            let candidate = ElementId::new(key.clone());
            let id = if self.used.contains(&candidate) {
                ElementId::new(format!("{key}@v{}", self.next_version))
            } else {
                candidate
            };
            self.used.insert(id.clone());
            let replaces = self.schema.active().find(|e| e.key == key).map(|e| e.id.clone());
            self.adds.push(MigrationOp::Add {
                element: NewElement {
                    id: id.clone(),
                    key,
                    descriptor,
                    origin: Origin::Model,
                },
                replaces,
            });
            id
        };
        self.matched.insert(id.clone());
        self.layout.push(id.clone());
        id
    }

    fn keeps_user_choice(&self, e: &SchemaElement) -> bool {
        match &e.descriptor {
            Descriptor::Choice { category, .. } => {
                e.origin == Origin::User && self.matched.contains(category) && !self.declared_keys.contains(&e.key)
            }
            _ => false,
        }
    }
}

fn declare_all(d: &mut Differ<'_>, model: &ValidatedModel) {
    let m: &ConfigModel = model;
    for r in &m.project.roles {
        d.declare(
            format!("role.{}", r.name),
            Descriptor::Role {
                name: r.name.clone(),
                rank: r.rank,
            },
        );
    }
    for p in &m.screening.phases {
        d.declare(
            format!("phase.{}", p.name),
            Descriptor::Phase {
                name: p.name.clone(),
                evidence: p.evidence,
            },
        );
    }
    for c in &m.screening.exclusion_criteria {
        d.declare(
            format!("criterion.{}", slug(&c.text)),
            Descriptor::Criterion { text: c.text.clone() },
        );
    }
    let mut containers = BTreeMap::new();
    fn walk<'m>(cats: &'m [CategoryDecl], parent: Option<&'m str>, out: &mut BTreeMap<&'m str, (Option<&'m str>, &'m CategoryDecl)>) {
        for c in cats {
            out.insert(c.name.as_str(), (parent, c));
            walk(&c.subcategories, Some(&c.name), out);
        }
    }
    walk(&m.scheme.categories, None, &mut containers);
    for name in dependency_graph(model) {
        let (container, c) = containers[name.as_str()];
        let id = d.declare(format!("category.{}", c.name), Descriptor::Category(describe(c, container)));
        for text in c.choices() {
            d.declare(
                format!("{id}.choice.{}", slug(text)),
                Descriptor::Choice {
                    category: id.clone(),
                    text: text.clone(),
                },
            );
        }
    }
}

fn describe(c: &CategoryDecl, container: Option<&str>) -> CategoryDescriptor {
    CategoryDescriptor {
        name: c.name.clone(),
        title: c.title.clone(),
        shape: match &c.kind {
            CategoryKind::Simple(s) => Shape::Simple(s.clone()),
            CategoryKind::List { .. } => Shape::List,
            CategoryKind::DynamicList { .. } => Shape::DynamicList,
        },
        mandatory: c.mandatory,
        multiplicity: c.multiplicity,
        container: container.map(str::to_string),
        depends_on: c.depends_on.as_ref().map(|d| Dependency {
            parent: d.parent.clone(),
            mapping: d.mapping.clone(),
        }),
    }
}

/// Applies `plan` to a project atomically under its install lock.
pub fn apply(
    store: &Store,
    project: ProjectId,
    plan: &MigrationPlan,
    actor: Option<UserId>,
    source: Option<&str>,
) -> Result<ProjectSchema> {
    store.with_install_lock(project, || {
        store.transact(project, actor, |tx| apply_in(tx, plan, source))
    })
}

/// Applies `plan` inside an open transaction; the caller holds the install
/// lock.
pub fn apply_in(tx: &mut Tx<'_>, plan: &MigrationPlan, source: Option<&str>) -> Result<ProjectSchema> {
    let current = tx.schema.version;
    if current != plan.base_version {
        return Err(Error::VersionConflict {
            project: tx.project_id(),
            expected: plan.base_version,
            actual: current,
        });
    }
    if plan.is_empty() {
        return Ok(tx.schema.clone());
    }
    let mut targets = BTreeSet::new();
    for op in &plan.ops {
        if !targets.insert(op.target()) {
            return Err(Error::InvalidPlan(format!("`{}` is targeted twice", op.target())));
        }
    }
    // Counts taken inside the transaction, so data written since the diff
    // is seen here.
    let counts = tx.data_counts();
    let version = current + 1;
    tx.schema_mut().version = version;
    for op in &plan.ops {
        let existing = tx.schema.get(op.target()).map(|e| e.status);
        match (op, existing) {
            (MigrationOp::Drop { id }, Some(ElementStatus::Active)) => {
                if counts.get(id).copied().unwrap_or(0) > 0 {
                    return Err(Error::IllegalDrop(id.clone()));
                }
                tx.schema_mut().elements.retain(|e| &e.id != id);
            }
            (MigrationOp::Deactivate { id }, Some(ElementStatus::Active)) => {
                tx.set_element_status(id, ElementStatus::Deactivated)?;
            }
            (MigrationOp::Reactivate { id }, Some(ElementStatus::Deactivated)) => {
                tx.set_element_status(id, ElementStatus::Active)?;
            }
            (MigrationOp::Add { element, .. }, None) => {
                if element.descriptor.kind() == ElementKind::Choice {
                    let Descriptor::Choice { category, .. } = &element.descriptor else { unreachable!() };
                    if !targets.contains(category) && tx.schema.get(category).is_none() {
                        return Err(Error::InvalidPlan(format!("choice `{}` has no category", element.id)));
                    }
                }
                tx.schema_mut().elements.push(SchemaElement {
                    id: element.id.clone(),
                    key: element.key.clone(),
                    kind: element.descriptor.kind(),
                    descriptor: element.descriptor.clone(),
                    status: ElementStatus::Active,
                    introduced_in: version,
                    deactivated_in: None,
                    origin: element.origin,
                });
            }
            (op, status) => {
                return Err(Error::InvalidPlan(format!(
                    "cannot {} `{}` in state {status:?}",
                    op.name(),
                    op.target()
                )))
            }
        }
    }
    let mut keys = BTreeSet::new();
    if let Some(e) = tx.schema.active().find(|e| !keys.insert(&e.key)) {
        return Err(Error::InvalidPlan(format!("two active elements share key `{}`", e.key)));
    }
    if let Some(s) = &plan.settings {
        tx.schema_mut().settings = Some(s.clone());
    }
    ensure_admin(tx)?;
    let schema = tx.schema.clone();
    let source = source
        .map(str::to_string)
        .or_else(|| tx.documents(None).and_then(|d| d.source.clone()));
    tx.put_documents(VersionedDocuments {
        configs: derive_entity_configs(&schema),
        form: derive_form(&schema),
        report: serde_json::to_value(plan.report()).unwrap_or(Value::Null),
        schema: schema.clone(),
        source,
    });
    Ok(schema)
}

/// A schema change can retire the role every admin member held; the
/// installing user then takes the new admin role.
fn ensure_admin(tx: &mut Tx<'_>) -> Result<()> {
    if tx.has_admin() {
        return Ok(());
    }
    let role = tx
        .schema
        .active()
        .find(|e| matches!(e.descriptor, Descriptor::Role { rank: Rank::Admin, .. }))
        .and_then(|e| e.descriptor.name().map(str::to_string));
    match (tx.actor(), role) {
        (Some(actor), Some(role)) => tx.add_member(actor, &role),
        _ => Err(Error::LastAdmin),
    }
}

/// Result of installing a model into a new project.
#[derive(Clone, Debug, Serialize)]
pub struct Installed {
    pub project: ProjectId,
    pub schema: ProjectSchema,
    pub report: PlanReport,
}

/// Validates `source`, creates its project and installs it at version 1.
pub fn install_new(store: &Store, creator: UserId, source: &str) -> Result<Installed> {
    let model = relis_dsl::check(source).map_err(Error::InvalidModel)?;
    let admin = model
        .project
        .roles
        .iter()
        .find(|r| r.rank == Rank::Admin)
        .map(|r| r.name.clone())
        .unwrap_or_default();
    let project = store.create_project(&model.project.name, &model.project.label, creator, &admin)?;
    let plan = compile(&model);
    match apply(store, project, &plan, Some(creator), Some(source)) {
        Ok(schema) => Ok(Installed {
            project,
            schema,
            report: plan.report(),
        }),
        Err(e) => {
            let _ = store.discard_project(project);
            Err(e)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Reinstall {
    pub plan: MigrationPlan,
    pub report: PlanReport,
    /// Schema after the install; for dry runs the unchanged current one.
    pub schema: ProjectSchema,
    pub applied: bool,
}

/// Diffs `source` against the installed schema and, unless `dry_run`,
/// applies the plan. `base_version` pins the schema version the caller saw.
pub fn reinstall(
    store: &Store,
    project: ProjectId,
    actor: Option<UserId>,
    source: &str,
    dry_run: bool,
    base_version: Option<u32>,
) -> Result<Reinstall> {
    let model = relis_dsl::check(source).map_err(Error::InvalidModel)?;
    let info = store.project(project)?;
    if model.project.name != info.name {
        return Err(Error::InvalidPlan(format!(
            "model declares project `{}`, not `{}`",
            model.project.name, info.name
        )));
    }
    store.with_install_lock(project, || {
        let snap = store.snapshot(project)?;
        if let Some(base) = base_version {
            if base != snap.schema.version {
                return Err(Error::VersionConflict {
                    project,
                    expected: base,
                    actual: snap.schema.version,
                });
            }
        }
        let plan = diff(&snap.schema, &model, &snap.data_counts());
        let report = plan.report();
        if dry_run || plan.is_empty() {
            return Ok(Reinstall {
                plan,
                report,
                schema: snap.schema.clone(),
                applied: false,
            });
        }
        let schema = store.transact(project, actor, |tx| apply_in(tx, &plan, Some(source)))?;
        Ok(Reinstall {
            plan,
            report,
            schema,
            applied: true,
        })
    })
}
