//! Installed schema of a project and the configuration documents derived
//! from it.

use std::collections::BTreeMap;

use relis_dsl::{
    AssignmentPolicy, ConflictPolicy, Evidence, Multiplicity, NumRange, Rank, SimpleSpec,
    ValidationPolicy, ValueType,
};
use serde::{Deserialize, Serialize};

use crate::ids::{ElementId, ProjectId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Role,
    Phase,
    Criterion,
    Category,
    Choice,
}

impl ElementKind {
    pub fn prefix(self) -> &'static str {
        match self {
            ElementKind::Role => "role",
            ElementKind::Phase => "phase",
            ElementKind::Criterion => "criterion",
            ElementKind::Category => "category",
            ElementKind::Choice => "choice",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementStatus {
    Active,
    Deactivated,
}

/// Whether an element came from the model or was added by users at runtime
/// (dynamic list choices).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Model,
    User,
}

/// Shape of a category without its choices or subcategories, which are
/// elements of their own.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Simple(SimpleSpec),
    List,
    DynamicList,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub parent: String,
    pub mapping: Vec<(String, Vec<String>)>,
}

impl Dependency {
    /// Choices allowed when the parent holds `parent_values`; `None` means
    /// unrestricted.
    pub fn allowed<'a>(&'a self, parent_values: &[&str]) -> Option<Vec<&'a str>> {
        let mut allowed = Vec::new();
        for v in parent_values {
            match self.mapping.iter().find(|(k, _)| k == v) {
                Some((_, subset)) => allowed.extend(subset.iter().map(String::as_str)),
                None => return None,
            }
        }
        Some(allowed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDescriptor {
    pub name: String,
    pub title: String,
    pub shape: Shape,
    pub mandatory: bool,
    pub multiplicity: Multiplicity,
    /// Name of the enclosing category.
    pub container: Option<String>,
    pub depends_on: Option<Dependency>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Descriptor {
    Role { name: String, rank: Rank },
    Phase { name: String, evidence: Evidence },
    Criterion { text: String },
    Category(CategoryDescriptor),
    Choice { category: ElementId, text: String },
}

impl Descriptor {
    pub fn kind(&self) -> ElementKind {
        match self {
            Descriptor::Role { .. } => ElementKind::Role,
            Descriptor::Phase { .. } => ElementKind::Phase,
            Descriptor::Criterion { .. } => ElementKind::Criterion,
            Descriptor::Category(_) => ElementKind::Category,
            Descriptor::Choice { .. } => ElementKind::Choice,
        }
    }

    /// Identifier-like name of role, phase and category elements.
    pub fn name(&self) -> Option<&str> {
        match self {
            Descriptor::Role { name, .. }
            | Descriptor::Phase { name, .. }
            | Descriptor::Category(CategoryDescriptor { name, .. }) => Some(name),
            _ => None,
        }
    }

    pub fn as_category(&self) -> Option<&CategoryDescriptor> {
        match self {
            Descriptor::Category(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaElement {
    pub id: ElementId,
    /// Qualified name shared by every version of the element.
    pub key: String,
    pub kind: ElementKind,
    pub descriptor: Descriptor,
    pub status: ElementStatus,
    pub introduced_in: u32,
    pub deactivated_in: Option<u32>,
    pub origin: Origin,
}

impl SchemaElement {
    pub fn is_active(&self) -> bool {
        self.status == ElementStatus::Active
    }
}

/// Project-wide settings carried by the model outside of elements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settings {
    pub label: String,
    pub assignment: AssignmentPolicy,
    pub conflict: ConflictPolicy,
    pub validation: Option<ValidationPolicy>,
    /// Ids of all declared elements in compile order.
    pub layout: Vec<ElementId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectSchema {
    pub project_id: ProjectId,
    pub version: u32,
    pub elements: Vec<SchemaElement>,
    pub settings: Option<Settings>,
}

impl ProjectSchema {
    pub fn empty(project_id: ProjectId) -> Self {
        Self {
            project_id,
            version: 0,
            elements: Vec::new(),
            settings: None,
        }
    }

    pub fn get(&self, id: &ElementId) -> Option<&SchemaElement> {
        self.elements.iter().find(|e| &e.id == id)
    }

    pub fn get_str(&self, id: &str) -> Option<&SchemaElement> {
        self.elements.iter().find(|e| e.id.as_str() == id)
    }

    pub fn active(&self) -> impl Iterator<Item = &SchemaElement> {
        self.elements.iter().filter(|e| e.is_active())
    }

    /// The active element of `kind` whose descriptor carries `name`.
    pub fn active_named(&self, kind: ElementKind, name: &str) -> Option<&SchemaElement> {
        self.active()
            .find(|e| e.kind == kind && e.descriptor.name() == Some(name))
    }

    fn layout_index(&self) -> BTreeMap<&ElementId, usize> {
        self.settings
            .iter()
            .flat_map(|s| s.layout.iter())
            .enumerate()
            .map(|(i, id)| (id, i))
            .collect()
    }

    /// Active elements of `kind` in declaration order, runtime additions last.
    pub fn ordered(&self, kind: ElementKind) -> Vec<&SchemaElement> {
        let index = self.layout_index();
        let mut v: Vec<(usize, usize, &SchemaElement)> = self
            .elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_active() && e.kind == kind)
            .map(|(pos, e)| (index.get(&e.id).copied().unwrap_or(usize::MAX), pos, e))
            .collect();
        v.sort_by_key(|&(l, p, _)| (l, p));
        v.into_iter().map(|(_, _, e)| e).collect()
    }

    pub fn phases(&self) -> Vec<&SchemaElement> {
        self.ordered(ElementKind::Phase)
    }

    pub fn categories(&self) -> Vec<&SchemaElement> {
        self.ordered(ElementKind::Category)
    }

    /// Active choices of a category in display order.
    pub fn choices_of(&self, category: &ElementId) -> Vec<&SchemaElement> {
        self.ordered(ElementKind::Choice)
            .into_iter()
            .filter(|e| matches!(&e.descriptor, Descriptor::Choice { category: c, .. } if c == category))
            .collect()
    }

    pub fn rank_of_role(&self, role: &str) -> Option<Rank> {
        match self.active_named(ElementKind::Role, role)?.descriptor {
            Descriptor::Role { rank, .. } => Some(rank),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Add,
    Modify,
    Remove,
    List,
    View,
}

impl Operation {
    pub const ALL: [Operation; 5] = [
        Operation::Add,
        Operation::Modify,
        Operation::Remove,
        Operation::List,
        Operation::View,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.as_str() == s)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Add => "add",
            Operation::Modify => "modify",
            Operation::Remove => "remove",
            Operation::List => "list",
            Operation::View => "view",
        }
    }

    pub fn writes(self) -> bool {
        matches!(self, Operation::Add | Operation::Modify)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticType {
    Text,
    Bool,
    Int,
    Real,
    Date,
    Choice,
    TextList,
    Reference,
    Values,
}

impl From<ValueType> for SemanticType {
    fn from(t: ValueType) -> Self {
        match t {
            ValueType::Text => SemanticType::Text,
            ValueType::Bool => SemanticType::Bool,
            ValueType::Int => SemanticType::Int,
            ValueType::Real => SemanticType::Real,
            ValueType::Date => SemanticType::Date,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub required: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_length: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pattern: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub range: Option<NumRange>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub multiplicity: Option<Multiplicity>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub choices: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeConfig {
    pub name: String,
    #[serde(rename = "type")]
    pub semantic_type: SemanticType,
    pub constraints: Constraints,
    /// Element backing the attribute, for scheme-derived attributes.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub element: Option<ElementId>,
    /// False for attributes of deactivated elements: shown, never written.
    pub writable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityConfig {
    pub entity: String,
    pub attributes: Vec<AttributeConfig>,
    pub operations: Vec<Operation>,
    pub page_bindings: BTreeMap<Operation, String>,
}

impl EntityConfig {
    fn new(entity: &str, attributes: Vec<AttributeConfig>, operations: &[Operation]) -> Self {
        let page_bindings = operations
            .iter()
            .map(|&op| (op, format!("page.{}.{}", page_family(op), entity)))
            .collect();
        Self {
            entity: entity.to_string(),
            attributes,
            operations: operations.to_vec(),
            page_bindings,
        }
    }

    pub fn supports(&self, op: Operation) -> bool {
        self.operations.contains(&op)
    }

    /// Attributes shown for `op`; write operations omit read-only ones.
    pub fn attributes_for(&self, op: Operation) -> Vec<&AttributeConfig> {
        self.attributes
            .iter()
            .filter(|a| !op.writes() || a.writable)
            .collect()
    }
}

fn page_family(op: Operation) -> &'static str {
    match op {
        Operation::Add | Operation::Modify => "form",
        Operation::Remove => "confirm",
        Operation::List => "table",
        Operation::View => "detail",
    }
}

fn attr(name: &str, t: SemanticType, required: bool) -> AttributeConfig {
    AttributeConfig {
        name: name.to_string(),
        semantic_type: t,
        constraints: Constraints {
            required,
            ..Constraints::default()
        },
        element: None,
        writable: true,
    }
}

/// Attribute names accepted in payloads of built-in entities.
pub fn builtin_attributes(entity: &str) -> Option<&'static [&'static str]> {
    Some(match entity {
        "paper" => &["bibkey", "title", "authors", "venue", "year", "abstract", "link"],
        "assignment" => &["paper", "reviewer", "phase", "kind", "status", "arbitration", "conflict"],
        "decision" => &[
            "assignment",
            "paper",
            "phase",
            "reviewer",
            "kind",
            "verdict",
            "criterion",
            "note",
            "decided_at",
        ],
        "conflict" => &["paper", "phase", "status", "decisions", "resolution", "escalation"],
        "classification" => &["paper", "complete"],
        "phase_state" => &["phase", "closed"],
        "audit" => &["action", "phase", "seed", "count", "detail"],
        _ => return None,
    })
}

const ALL_OPS: &[Operation] = &Operation::ALL;
const READ_OPS: &[Operation] = &[Operation::List, Operation::View];

/// Entity configurations of an installed schema. Built-in entities come
/// first and do not depend on the schema.
pub fn derive_entity_configs(schema: &ProjectSchema) -> Vec<EntityConfig> {
    use SemanticType::*;
    let mut out = vec![
        EntityConfig::new(
            "paper",
            vec![
                attr("bibkey", Text, false),
                attr("title", Text, true),
                attr("authors", TextList, false),
                attr("venue", Text, false),
                attr("year", Int, true),
                attr("abstract", Text, false),
                attr("link", Text, false),
            ],
            ALL_OPS,
        ),
        EntityConfig::new(
            "user",
            vec![attr("login", Text, true), attr("display_name", Text, false)],
            &[Operation::Add, Operation::List, Operation::View],
        ),
        EntityConfig::new(
            "member",
            vec![attr("user", Reference, true), attr("role", Text, true)],
            &[Operation::Add, Operation::Remove, Operation::List, Operation::View],
        ),
        EntityConfig::new(
            "assignment",
            vec![
                attr("paper", Reference, true),
                attr("reviewer", Reference, true),
                attr("phase", Reference, true),
                attr("kind", Text, true),
                attr("status", Text, false),
            ],
            &[Operation::Add, Operation::List, Operation::View],
        ),
        EntityConfig::new(
            "decision",
            vec![
                attr("assignment", Reference, true),
                attr("verdict", Text, true),
                attr("criterion", Reference, false),
                attr("note", Text, false),
            ],
            &[Operation::Add, Operation::Modify, Operation::List, Operation::View],
        ),
        EntityConfig::new(
            "conflict",
            vec![
                attr("paper", Reference, true),
                attr("phase", Reference, true),
                attr("status", Text, true),
            ],
            READ_OPS,
        ),
    ];

    let mut by_element = Vec::new();
    let mut classification = Vec::new();
    // Every category that ever held a column stays visible in views.
    let mut cats: Vec<&SchemaElement> = schema.categories();
    cats.extend(
        schema
            .elements
            .iter()
            .filter(|e| e.kind == ElementKind::Category && !e.is_active()),
    );
    for e in cats {
        let Descriptor::Category(c) = &e.descriptor else { continue };
        let a = category_attribute(schema, e, c);
        if e.is_active() {
            let mut values = a.clone();
            values.name = "values".to_string();
            by_element.push(EntityConfig::new(e.id.as_str(), vec![values], READ_OPS));
        }
        classification.push(a);
    }
    classification.push(attr("complete", Bool, false));
    out.push(EntityConfig::new(
        "classification",
        classification,
        &[Operation::Modify, Operation::List, Operation::View],
    ));
    out.extend(by_element);
    out
}

fn category_attribute(schema: &ProjectSchema, e: &SchemaElement, c: &CategoryDescriptor) -> AttributeConfig {
    let (semantic_type, mut constraints) = match &c.shape {
        Shape::Simple(spec) => (
            SemanticType::from(spec.value_type),
            Constraints {
                max_length: spec.max_length,
                pattern: spec.pattern.clone(),
                range: spec.range,
                ..Constraints::default()
            },
        ),
        Shape::List | Shape::DynamicList => (
            SemanticType::Choice,
            Constraints {
                choices: schema.choices_of(&e.id).iter().map(|c| choice_text(c).to_string()).collect(),
                ..Constraints::default()
            },
        ),
    };
    constraints.required = c.mandatory;
    constraints.multiplicity = Some(c.multiplicity);
    AttributeConfig {
        name: c.name.clone(),
        semantic_type,
        constraints,
        element: Some(e.id.clone()),
        writable: e.is_active(),
    }
}

pub(crate) fn choice_text(e: &SchemaElement) -> &str {
    match &e.descriptor {
        Descriptor::Choice { text, .. } => text,
        _ => "",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Widget {
    TextInput,
    NumberInput,
    Checkbox,
    DateInput,
    SingleSelect,
    DynamicSelect,
}

impl Widget {
    pub fn for_shape(shape: &Shape) -> Self {
        match shape {
            Shape::Simple(s) => match s.value_type {
                ValueType::Text => Widget::TextInput,
                ValueType::Int | ValueType::Real => Widget::NumberInput,
                ValueType::Bool => Widget::Checkbox,
                ValueType::Date => Widget::DateInput,
            },
            Shape::List => Widget::SingleSelect,
            Shape::DynamicList => Widget::DynamicSelect,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormOption {
    pub id: ElementId,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConstraints {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value_type: Option<ValueType>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_length: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pattern: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub range: Option<NumRange>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependencyWiring {
    pub parent_field: ElementId,
    pub mapping: Vec<(String, Vec<String>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormField {
    pub element_id: ElementId,
    pub name: String,
    pub title: String,
    pub widget: Widget,
    pub mandatory: bool,
    pub multiplicity: Multiplicity,
    /// Rendered as a group of rows that can be added and removed.
    pub repeatable: bool,
    pub constraints: FieldConstraints,
    pub options: Vec<FormOption>,
    pub allows_new_options: bool,
    pub dependency: Option<DependencyWiring>,
    pub children: Vec<FormField>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormDescriptor {
    pub project_id: ProjectId,
    pub schema_version: u32,
    pub fields: Vec<FormField>,
}

impl FormDescriptor {
    /// Fields in tree pre-order.
    pub fn flatten(&self) -> Vec<&FormField> {
        fn walk<'a>(fs: &'a [FormField], out: &mut Vec<&'a FormField>) {
            for f in fs {
                out.push(f);
                walk(&f.children, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.fields, &mut out);
        out
    }

    pub fn field(&self, id: &ElementId) -> Option<&FormField> {
        self.flatten().into_iter().find(|f| &f.element_id == id)
    }
}

/// Data extraction form of the active categories, in declaration order.
pub fn derive_form(schema: &ProjectSchema) -> FormDescriptor {
    let cats = schema.categories();
    let id_of = |name: &str| {
        schema
            .active_named(ElementKind::Category, name)
            .map(|e| e.id.clone())
    };
    // `cats` lists every container before its content, so each field can be
    // built with its children already attached by walking it in reverse.
    let mut built: Vec<(Option<ElementId>, FormField)> = Vec::new();
    for e in &cats {
        let Descriptor::Category(c) = &e.descriptor else { continue };
        let spec = match &c.shape {
            Shape::Simple(s) => Some(s),
            _ => None,
        };
        let field = FormField {
            element_id: e.id.clone(),
            name: c.name.clone(),
            title: c.title.clone(),
            widget: Widget::for_shape(&c.shape),
            mandatory: c.mandatory,
            multiplicity: c.multiplicity,
            repeatable: c.multiplicity.is_multi(),
            constraints: FieldConstraints {
                value_type: spec.map(|s| s.value_type),
                max_length: spec.and_then(|s| s.max_length),
                pattern: spec.and_then(|s| s.pattern.clone()),
                range: spec.and_then(|s| s.range),
            },
            options: schema
                .choices_of(&e.id)
                .into_iter()
                .map(|ch| FormOption {
                    id: ch.id.clone(),
                    text: choice_text(ch).to_string(),
                })
                .collect(),
            allows_new_options: c.shape == Shape::DynamicList,
            dependency: c.depends_on.as_ref().and_then(|d| {
                Some(DependencyWiring {
                    parent_field: id_of(&d.parent)?,
                    mapping: d.mapping.clone(),
                })
            }),
            children: Vec::new(),
        };
        built.push((c.container.as_deref().and_then(id_of), field));
    }
    let mut roots = Vec::new();
    while let Some((container, field)) = built.pop() {
        let slot = container.and_then(|cid| built.iter_mut().rev().find(|(_, f)| f.element_id == cid));
        match slot {
            Some((_, parent)) => parent.children.insert(0, field),
            None => roots.insert(0, field),
        }
    }
    FormDescriptor {
        project_id: schema.project_id,
        schema_version: schema.version,
        fields: roots,
    }
}
