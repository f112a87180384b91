use std::collections::HashMap;
use std::ops::Deref;

use crate::diagnostic::{Code, Diagnostic};
use crate::model::*;
use crate::order::{model_nodes, order_categories, OrderError};

pub const MAX_IDENT_LEN: usize = 32;
pub const MAX_CATEGORY_DEPTH: usize = 5;

/// A model that satisfies every structural and semantic rule of the
/// language. Only [`validate`] constructs one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidatedModel(ConfigModel);

impl ValidatedModel {
    pub fn into_inner(self) -> ConfigModel {
        self.0
    }

    pub fn model(&self) -> &ConfigModel {
        &self.0
    }
}

impl Deref for ValidatedModel {
    type Target = ConfigModel;

    fn deref(&self) -> &ConfigModel {
        &self.0
    }
}

/// `[a-z][a-z0-9_]{0,31}`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z'))
        && s.len() <= MAX_IDENT_LEN
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Storage-safe key derived from free text. Texts that differ only in case
/// or punctuation share a slug, which is why choices and criteria are
/// checked for slug collisions.
pub fn slug(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if c.is_ascii() {
            if !out.ends_with('_') {
                out.push('_');
            }
        } else {
            for lc in c.to_lowercase() {
                out.push_str(&format!("u{:x}", lc as u32));
            }
        }
    }
    let trimmed = out.trim_matches('_');
    if trimmed.is_empty() {
        "_".into()
    } else {
        trimmed.to_string()
    }
}

/// Checks every rule and reports all violations at once.
pub fn validate(model: ConfigModel) -> Result<ValidatedModel, Vec<Diagnostic>> {
    let mut v = Validator { diags: Vec::new() };
    v.project(&model);
    v.screening(&model);
    v.scheme(&model);
    if v.diags.is_empty() {
        Ok(ValidatedModel(model))
    } else {
        v.diags.sort_by_key(|d| (d.line, d.column));
        Err(v.diags)
    }
}

struct Validator {
    diags: Vec<Diagnostic>,
}

impl Validator {
    fn err(&mut self, code: Code, loc: Loc, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(code, loc, msg));
    }

    fn ident(&mut self, what: &str, name: &str, loc: Loc) {
        if !is_identifier(name) {
            self.err(
                Code::BadIdent,
                loc,
                format!("{what} `{name}` must match [a-z][a-z0-9_]* and be at most {MAX_IDENT_LEN} characters"),
            );
        }
    }

    /// Reports every occurrence of a key that appears more than once.
    fn unique<'a>(&mut self, what: &str, items: impl IntoIterator<Item = (String, &'a str, Loc)>) {
        let mut seen: HashMap<String, Vec<(&str, Loc)>> = HashMap::new();
        let mut order = Vec::new();
        for (key, shown, loc) in items {
            if !seen.contains_key(&key) {
                order.push(key.clone());
            }
            seen.entry(key).or_default().push((shown, loc));
        }
        for key in order {
            let occurrences = &seen[&key];
            if occurrences.len() < 2 {
                continue;
            }
            let locs: Vec<String> = occurrences.iter().map(|(_, l)| l.to_string()).collect();
            for (shown, loc) in occurrences {
                self.diags.push(Diagnostic::error(
                    Code::DupName,
                    *loc,
                    format!("{what} `{shown}` is declared more than once (at {})", locs.join(", ")),
                ));
            }
        }
    }

    fn project(&mut self, m: &ConfigModel) {
        let p = &m.project;
        self.ident("project name", &p.name, p.loc);
        if p.roles.is_empty() {
            self.err(Code::EmptyBlock, p.loc, "at least one role must be declared");
        }
        for r in &p.roles {
            self.ident("role name", &r.name, r.loc);
        }
        self.unique("role", p.roles.iter().map(|r| (r.name.clone(), r.name.as_str(), r.loc)));
        let admins: Vec<&RoleDecl> = p.roles.iter().filter(|r| r.rank == Rank::Admin).collect();
        match admins.len() {
            0 => self.err(Code::NoAdmin, p.loc, "exactly one role must have rank admin, none does"),
            1 => {}
            _ => {
                for r in &admins[1..] {
                    self.err(
                        Code::MultipleAdmin,
                        r.loc,
                        format!("role `{}` is a second admin role; exactly one is allowed", r.name),
                    );
                }
            }
        }
    }

    fn role_ref(&mut self, m: &ConfigModel, name: &str, loc: Loc, purpose: &str) {
        match m.project.roles.iter().find(|r| r.name == name) {
            None => self.err(Code::UnknownRole, loc, format!("{purpose} role `{name}` is not declared")),
            Some(r) if r.rank < Rank::Senior => self.err(
                Code::RoleRank,
                loc,
                format!("{purpose} role `{name}` must have rank senior or admin, not {}", r.rank),
            ),
            Some(_) => {}
        }
    }

    fn screening(&mut self, m: &ConfigModel) {
        let s = &m.screening;
        if s.phases.is_empty() {
            self.err(Code::EmptyBlock, s.loc, "at least one screening phase must be declared");
        }
        for ph in &s.phases {
            self.ident("phase name", &ph.name, ph.loc);
        }
        self.unique("phase", s.phases.iter().map(|p| (p.name.clone(), p.name.as_str(), p.loc)));

        if s.assignment.reviewers_per_paper == 0 {
            self.err(Code::BadRange, s.assignment.loc, "reviewers per paper must be at least 1");
        }

        if let Some(role) = &s.conflict.arbiter_role {
            self.role_ref(m, role, s.conflict.loc, "arbiter");
        }

        if let Some(v) = &s.validation {
            let h = v.percentage.hundredths();
            if h == 0 || h > 10_000 {
                self.err(
                    Code::BadPercent,
                    v.loc,
                    format!("validation percentage {}% must be in (0, 100]", v.percentage),
                );
            }
            self.role_ref(m, &v.validator_role, v.loc, "validator");
        }

        if s.exclusion_criteria.is_empty() {
            self.err(Code::EmptyBlock, s.loc, "at least one exclusion criterion must be declared");
        }
        for c in &s.exclusion_criteria {
            if c.text.trim().is_empty() {
                self.err(Code::EmptyBlock, c.loc, "exclusion criterion text is empty");
            }
        }
        self.unique(
            "exclusion criterion",
            s.exclusion_criteria.iter().map(|c| (slug(&c.text), c.text.as_str(), c.loc)),
        );
    }

    fn scheme(&mut self, m: &ConfigModel) {
        let flat = m.scheme.flatten();
        self.unique("category", flat.iter().map(|c| (c.name.clone(), c.name.as_str(), c.loc)));
        for c in &m.scheme.categories {
            self.depth(c, 1);
        }
        let by_name: HashMap<&str, &CategoryDecl> = flat.iter().map(|c| (c.name.as_str(), *c)).collect();
        for c in &flat {
            self.category(c, &by_name);
        }

        match order_categories(&model_nodes(m)) {
            Ok(_) => {}
            Err(OrderError::Cycle(names)) => {
                let loc = by_name.get(names[0].as_str()).map_or(m.scheme.loc, |c| c.loc);
                self.err(
                    Code::DepCycle,
                    loc,
                    format!("categories depend on each other in a cycle: {}", names.join(" -> ")),
                );
            }
            Err(OrderError::Placement(names)) => {
                let loc = by_name.get(names[0].as_str()).map_or(m.scheme.loc, |c| c.loc);
                self.err(
                    Code::DepCycle,
                    loc,
                    format!(
                        "dependencies between {} conflict with their nesting; no form order puts every parent first",
                        names.join(", ")
                    ),
                );
            }
        }
    }

    fn depth(&mut self, c: &CategoryDecl, depth: usize) {
        if depth > MAX_CATEGORY_DEPTH {
            self.err(
                Code::TooDeep,
                c.loc,
                format!("category `{}` is nested {depth} levels deep; the limit is {MAX_CATEGORY_DEPTH}", c.name),
            );
            return;
        }
        for s in &c.subcategories {
            self.depth(s, depth + 1);
        }
    }

    fn category(&mut self, c: &CategoryDecl, by_name: &HashMap<&str, &CategoryDecl>) {
        self.ident("category name", &c.name, c.loc);
        match &c.kind {
            CategoryKind::Simple(spec) => {
                if let Some(n) = spec.max_length {
                    if spec.value_type != ValueType::Text {
                        self.err(
                            Code::BadConstraint,
                            c.loc,
                            format!("maximum length only applies to text, `{}` is {}", c.name, spec.value_type.keyword()),
                        );
                    } else if n == 0 {
                        self.err(Code::BadRange, c.loc, format!("maximum length of `{}` must be at least 1", c.name));
                    }
                }
                if let Some(p) = &spec.pattern {
                    if spec.value_type != ValueType::Text {
                        self.err(
                            Code::BadConstraint,
                            c.loc,
                            format!("pattern only applies to text, `{}` is {}", c.name, spec.value_type.keyword()),
                        );
                    } else if let Err(e) = regex::Regex::new(p) {
                        self.err(Code::BadPattern, c.loc, format!("pattern of `{}` is not a valid regular expression: {e}", c.name));
                    }
                }
                if let Some(r) = &spec.range {
                    if !spec.value_type.is_numeric() {
                        self.err(
                            Code::BadConstraint,
                            c.loc,
                            format!("range only applies to int or real, `{}` is {}", c.name, spec.value_type.keyword()),
                        );
                    } else if r.min > r.max {
                        self.err(
                            Code::BadRange,
                            c.loc,
                            format!("range of `{}` has minimum {} above maximum {}", c.name, r.min, r.max),
                        );
                    }
                }
            }
            CategoryKind::List { choices } => {
                if choices.len() < 2 {
                    self.err(
                        Code::EmptyChoices,
                        c.loc,
                        format!("list `{}` must offer at least 2 choices, it has {}", c.name, choices.len()),
                    );
                }
            }
            CategoryKind::DynamicList { .. } => {}
        }
        for choice in c.choices() {
            if choice.trim().is_empty() {
                self.err(Code::EmptyChoices, c.loc, format!("`{}` has an empty choice", c.name));
            }
        }
        self.unique(
            &format!("choice of `{}`", c.name),
            c.choices().iter().map(|ch| (slug(ch), ch.as_str(), c.loc)),
        );

        let Some(dep) = &c.depends_on else { return };
        let Some(parent) = by_name.get(dep.parent.as_str()) else {
            self.err(Code::DepUnresolved, dep.loc, format!("`{}` depends on unknown category `{}`", c.name, dep.parent));
            return;
        };
        if !parent.kind.has_choices() {
            self.err(
                Code::DepUnresolved,
                dep.loc,
                format!("`{}` depends on `{}`, which is not a list category", c.name, dep.parent),
            );
            return;
        }
        if !c.kind.has_choices() {
            self.err(
                Code::DepUnresolved,
                dep.loc,
                format!("`{}` is a simple category; only list categories can drill down", c.name),
            );
            return;
        }
        self.unique(
            &format!("dependency key of `{}`", c.name),
            dep.mapping.iter().map(|(k, _)| (k.clone(), k.as_str(), dep.loc)),
        );
        for (key, allowed) in &dep.mapping {
            if !parent.choices().contains(key) {
                self.err(
                    Code::DepUnresolved,
                    dep.loc,
                    format!("`{key}` is not a choice of parent category `{}`", dep.parent),
                );
            }
            for a in allowed {
                if !c.choices().contains(a) {
                    self.err(Code::DepUnresolved, dep.loc, format!("`{a}` is not a choice of `{}`", c.name));
                }
            }
        }
    }
}
