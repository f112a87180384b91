use std::fmt::Write;

use crate::model::*;

const INDENT: &str = "  ";

/// Formats a model in canonical layout: one declaration per line, two-space
/// indentation, optional parts omitted when absent.
pub fn pretty_print(model: &ConfigModel) -> String {
    let mut out = String::new();
    let p = &model.project;
    writeln!(out, "project {} {}", p.name, quote(&p.label)).unwrap();
    out.push('\n');

    out.push_str("roles {\n");
    for r in &p.roles {
        writeln!(out, "{INDENT}{} {}", r.name, r.rank).unwrap();
    }
    out.push_str("}\n\n");

    let s = &model.screening;
    out.push_str("screening {\n");
    writeln!(out, "{INDENT}phases {{").unwrap();
    for ph in &s.phases {
        writeln!(out, "{INDENT}{INDENT}{} {}", ph.name, ph.evidence.keyword()).unwrap();
    }
    writeln!(out, "{INDENT}}}").unwrap();
    writeln!(
        out,
        "{INDENT}assign {} {}",
        s.assignment.mode.keyword(),
        s.assignment.reviewers_per_paper
    )
    .unwrap();
    write!(out, "{INDENT}conflict {}", s.conflict.strategy.keyword()).unwrap();
    if let Some(role) = &s.conflict.arbiter_role {
        write!(out, " by {role}").unwrap();
    }
    out.push('\n');
    if let Some(v) = &s.validation {
        writeln!(
            out,
            "{INDENT}validation {}% of {} by {}",
            v.percentage,
            v.target.keyword(),
            v.validator_role
        )
        .unwrap();
    }
    writeln!(out, "{INDENT}exclusion {{").unwrap();
    for c in &s.exclusion_criteria {
        writeln!(out, "{INDENT}{INDENT}{}", quote(&c.text)).unwrap();
    }
    writeln!(out, "{INDENT}}}").unwrap();
    out.push_str("}\n\n");

    out.push_str("classification {\n");
    for c in &model.scheme.categories {
        print_category(&mut out, c, 1);
    }
    out.push_str("}\n");
    out
}

fn print_category(out: &mut String, c: &CategoryDecl, depth: usize) {
    let pad = INDENT.repeat(depth);
    write!(out, "{pad}{} {} {}: ", c.kind.keyword(), c.name, quote(&c.title)).unwrap();
    match &c.kind {
        CategoryKind::Simple(spec) => {
            out.push_str(spec.value_type.keyword());
            if let Some(n) = spec.max_length {
                write!(out, "({n})").unwrap();
            }
            if let Some(p) = &spec.pattern {
                write!(out, " pattern {}", quote(p)).unwrap();
            }
            if let Some(r) = &spec.range {
                write!(out, " range({}, {})", number(r.min), number(r.max)).unwrap();
            }
        }
        CategoryKind::List { choices } | CategoryKind::DynamicList { initial_choices: choices } => {
            write!(out, "({})", quoted_list(choices)).unwrap();
        }
    }
    if let Some(dep) = &c.depends_on {
        write!(out, " depends on {} (", dep.parent).unwrap();
        for (i, (key, allowed)) in dep.mapping.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write!(out, "{} -> {{{}}}", quote(key), quoted_list(allowed)).unwrap();
        }
        out.push(')');
    }
    if c.mandatory {
        out.push_str(" *");
    }
    if c.multiplicity != Multiplicity::default() {
        write!(out, " [{}]", c.multiplicity.suffix()).unwrap();
    }
    if c.subcategories.is_empty() {
        out.push('\n');
    } else {
        out.push_str(" {\n");
        for sub in &c.subcategories {
            print_category(out, sub, depth + 1);
        }
        writeln!(out, "{pad}}}").unwrap();
    }
}

fn quoted_list(items: &[String]) -> String {
    items.iter().map(|s| quote(s)).collect::<Vec<_>>().join(", ")
}

/// Renders a float so that the lexer reads back the same value. Rust's
/// shortest round-trip formatting never uses exponents for `Display`.
fn number(v: f64) -> String {
    let s = format!("{v}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
