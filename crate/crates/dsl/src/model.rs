//! Abstract syntax of a project configuration.
//!
//! Every declaration carries a [`Loc`] pointing at its first token. Locations
//! never take part in equality, so two models parsed from differently
//! formatted sources compare equal when they declare the same things.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One-based line/column position in a source text.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Loc {
    pub line: u32,
    pub column: u32,
}

impl Loc {
    pub fn new(line: u32, column: u32) -> Self {
        Self { line, column }
    }
}

impl PartialEq for Loc {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Loc {}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// A named piece of DSL source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceText {
    pub origin: String,
    pub content: String,
}

impl SourceText {
    pub fn new(origin: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            origin: origin.into(),
            content: content.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigModel {
    pub project: ProjectDecl,
    pub screening: ScreeningDecl,
    pub scheme: SchemeDecl,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectDecl {
    pub name: String,
    pub label: String,
    pub roles: Vec<RoleDecl>,
    #[serde(default)]
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleDecl {
    pub name: String,
    pub rank: Rank,
    #[serde(default)]
    pub loc: Loc,
}

/// Privilege level of a role. Ordered: `Reviewer < Senior < Admin`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rank {
    Reviewer,
    Senior,
    Admin,
}

impl Rank {
    pub const ALL: [Rank; 3] = [Rank::Reviewer, Rank::Senior, Rank::Admin];

    pub fn keyword(self) -> &'static str {
        match self {
            Rank::Reviewer => "reviewer",
            Rank::Senior => "senior",
            Rank::Admin => "admin",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.keyword() == s)
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreeningDecl {
    pub phases: Vec<PhaseDecl>,
    pub assignment: AssignmentPolicy,
    pub conflict: ConflictPolicy,
    pub validation: Option<ValidationPolicy>,
    pub exclusion_criteria: Vec<Criterion>,
    #[serde(default)]
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseDecl {
    pub name: String,
    pub evidence: Evidence,
    #[serde(default)]
    pub loc: Loc,
}

/// What a reviewer looks at when screening in a phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evidence {
    Metadata,
    Abstract,
    Fulltext,
}

impl Evidence {
    pub const ALL: [Evidence; 3] = [Evidence::Metadata, Evidence::Abstract, Evidence::Fulltext];

    pub fn keyword(self) -> &'static str {
        match self {
            Evidence::Metadata => "metadata",
            Evidence::Abstract => "abstract",
            Evidence::Fulltext => "fulltext",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.keyword() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentPolicy {
    pub mode: AssignmentMode,
    pub reviewers_per_paper: u32,
    #[serde(default)]
    pub loc: Loc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentMode {
    Automatic,
    Manual,
}

impl AssignmentMode {
    pub fn keyword(self) -> &'static str {
        match self {
            AssignmentMode::Automatic => "automatic",
            AssignmentMode::Manual => "manual",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictPolicy {
    pub strategy: ConflictStrategy,
    /// Present exactly when the strategy is `unanimity` or `arbiter`.
    pub arbiter_role: Option<String>,
    #[serde(default)]
    pub loc: Loc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictStrategy {
    Unanimity,
    Majority,
    Arbiter,
}

impl ConflictStrategy {
    pub const ALL: [ConflictStrategy; 3] = [
        ConflictStrategy::Unanimity,
        ConflictStrategy::Majority,
        ConflictStrategy::Arbiter,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            ConflictStrategy::Unanimity => "unanimity",
            ConflictStrategy::Majority => "majority",
            ConflictStrategy::Arbiter => "arbiter",
        }
    }

    pub fn needs_arbiter(self) -> bool {
        !matches!(self, ConflictStrategy::Majority)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationPolicy {
    pub percentage: Percentage,
    pub target: ValidationTarget,
    pub validator_role: String,
    #[serde(default)]
    pub loc: Loc,
}

/// A percentage stored exactly in hundredths of a percent (`20` is `2000`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Percentage(u32);

impl Percentage {
    pub const fn from_hundredths(h: u32) -> Self {
        Self(h)
    }

    pub const fn whole(p: u32) -> Self {
        Self(p * 100)
    }

    pub fn hundredths(self) -> u32 {
        self.0
    }

    /// `ceil(self / 100 * population)`, computed in integers.
    pub fn ceil_share(self, population: usize) -> usize {
        let num = self.0 as u128 * population as u128;
        num.div_ceil(10_000) as usize
    }
}

impl fmt::Display for Percentage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (int, frac) = (self.0 / 100, self.0 % 100);
        if frac == 0 {
            write!(f, "{int}")
        } else if frac % 10 == 0 {
            write!(f, "{int}.{}", frac / 10)
        } else {
            write!(f, "{int}.{frac:02}")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationTarget {
    Excluded,
    Included,
    All,
}

impl ValidationTarget {
    pub fn keyword(self) -> &'static str {
        match self {
            ValidationTarget::Excluded => "excluded",
            ValidationTarget::Included => "included",
            ValidationTarget::All => "all",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Criterion {
    pub text: String,
    #[serde(default)]
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeDecl {
    pub categories: Vec<CategoryDecl>,
    #[serde(default)]
    pub loc: Loc,
}

impl SchemeDecl {
    /// Pre-order walk over every category, nested ones included.
    pub fn flatten(&self) -> Vec<&CategoryDecl> {
        fn walk<'a>(cats: &'a [CategoryDecl], out: &mut Vec<&'a CategoryDecl>) {
            for c in cats {
                out.push(c);
                walk(&c.subcategories, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.categories, &mut out);
        out
    }

    pub fn find(&self, name: &str) -> Option<&CategoryDecl> {
        self.flatten().into_iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDecl {
    pub name: String,
    pub title: String,
    pub kind: CategoryKind,
    pub mandatory: bool,
    pub multiplicity: Multiplicity,
    pub subcategories: Vec<CategoryDecl>,
    pub depends_on: Option<DependencyRef>,
    #[serde(default)]
    pub loc: Loc,
}

impl CategoryDecl {
    /// Predefined choices for list kinds, empty for simple categories.
    pub fn choices(&self) -> &[String] {
        match &self.kind {
            CategoryKind::Simple(_) => &[],
            CategoryKind::List { choices } => choices,
            CategoryKind::DynamicList { initial_choices } => initial_choices,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CategoryKind {
    Simple(SimpleSpec),
    List { choices: Vec<String> },
    DynamicList { initial_choices: Vec<String> },
}

impl CategoryKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            CategoryKind::Simple(_) => "simple",
            CategoryKind::List { .. } => "list",
            CategoryKind::DynamicList { .. } => "dynamiclist",
        }
    }

    pub fn has_choices(&self) -> bool {
        !matches!(self, CategoryKind::Simple(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpleSpec {
    pub value_type: ValueType,
    pub max_length: Option<u32>,
    pub pattern: Option<String>,
    pub range: Option<NumRange>,
}

impl SimpleSpec {
    pub fn of(value_type: ValueType) -> Self {
        Self {
            value_type,
            max_length: None,
            pattern: None,
            range: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Text,
    Bool,
    Int,
    Real,
    Date,
}

impl ValueType {
    pub const ALL: [ValueType; 5] = [
        ValueType::Text,
        ValueType::Bool,
        ValueType::Int,
        ValueType::Real,
        ValueType::Date,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            ValueType::Text => "text",
            ValueType::Bool => "bool",
            ValueType::Int => "int",
            ValueType::Real => "real",
            ValueType::Date => "date",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.keyword() == s)
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ValueType::Int | ValueType::Real)
    }
}

/// Inclusive numeric bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumRange {
    pub min: f64,
    pub max: f64,
}

// Bounds come from decimal literals, so NaN never occurs.
impl Eq for NumRange {}

impl NumRange {
    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }
}

/// How many values a category holds per paper.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Multiplicity {
    Bounded(u32),
    Unbounded,
}

impl Multiplicity {
    /// `[0]` in the source means unbounded.
    pub fn from_suffix(n: u32) -> Self {
        if n == 0 {
            Multiplicity::Unbounded
        } else {
            Multiplicity::Bounded(n)
        }
    }

    pub fn suffix(self) -> u32 {
        match self {
            Multiplicity::Bounded(n) => n,
            Multiplicity::Unbounded => 0,
        }
    }

    pub fn allows(self, count: usize) -> bool {
        match self {
            Multiplicity::Bounded(n) => count <= n as usize,
            Multiplicity::Unbounded => true,
        }
    }

    pub fn is_multi(self) -> bool {
        self != Multiplicity::Bounded(1)
    }
}

impl Default for Multiplicity {
    fn default() -> Self {
        Multiplicity::Bounded(1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyRef {
    pub parent: String,
    /// Parent choice text to the subset of this category's choices it allows.
    pub mapping: Vec<(String, Vec<String>)>,
    #[serde(default)]
    pub loc: Loc,
}
