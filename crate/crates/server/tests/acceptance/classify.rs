use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use relis_core::engine::{
    auto_assign, check_values, import_papers, submit_classification, submit_decision, ClassificationInput,
    DecisionInput, ImportFormat, Verdict,
};
use relis_core::installer::{apply, compile, install_new};
use relis_core::schema::{derive_form, FormDescriptor, FormField, Widget};
use relis_core::store::Store;
use relis_core::{ElementId, Error, UserId};
use relis_dsl::testkit::random_model;
use relis_dsl::{validate, Multiplicity, ValueType};
use serde_json::{json, Value};

use crate::common::corpus;

const BOUNDARY: &str = r#"
project boundary "Boundary"
roles {
  reviewer reviewer
  owner admin
}
screening {
  phases { titles metadata }
  assign automatic 1
  conflict majority
  exclusion { "Off topic" }
}
classification {
  simple name "Transformation name": text(100)
}
"#;

pub fn hundred_characters() -> String {
    let store = Store::in_memory();
    let owner = store.create_user("owner", "Owner", "secret", false).unwrap();
    let reviewer = store.create_user("rev", "Rev", "secret", false).unwrap();
    let p = install_new(&store, owner, BOUNDARY).unwrap().project;
    store.add_member(p, Some(owner), reviewer, "reviewer").unwrap();
    let paper = import_papers(&store, p, owner, &corpus(1), ImportFormat::Csv).unwrap().ids[0];
    let a = auto_assign(&store, p, "titles", 1, owner).unwrap().remove(0);
    let include = DecisionInput {
        verdict: Some(Verdict::Include),
        ..DecisionInput::default()
    };
    submit_decision(&store, a.id, reviewer, include).unwrap();

    let submit = |s: String| {
        let input = ClassificationInput {
            values: BTreeMap::from([("name".to_string(), vec![json!(s)])]),
            mark_complete: false,
            expected_version: None,
        };
        submit_classification(&store, p, paper, reviewer, input)
    };
    let mut accepted = 0;
    for (unit, len) in [("x", 99), ("x", 100), ("é", 100), ("🙂", 100)] {
        let s = unit.repeat(len);
        let r = submit(s.clone()).unwrap_or_else(|e| panic!("{len} x {unit:?} rejected: {e}"));
        assert_eq!(r.values[&ElementId::from("category.name")], vec![json!(s)]);
        accepted += 1;
    }
    let mut rejected = 0;
    for unit in ["x", "é", "🙂"] {
        match submit(unit.repeat(101)) {
            Err(Error::Classification(v)) => {
                assert!(
                    v.iter().any(|f| f.field == "category.name" && f.code == "E_CONSTRAINT"),
                    "101 x {unit:?}: {v:?}"
                );
            }
            other => panic!("101 x {unit:?}: expected E_CONSTRAINT, got {other:?}"),
        }
        rejected += 1;
    }
    format!("{accepted} values of at most 100 characters accepted, {rejected} of 101 rejected with E_CONSTRAINT")
}

/// Independent reading of the form rules, written against the descriptor
/// only. Returns (field, code) pairs.
fn naive(form: &FormDescriptor, values: &BTreeMap<ElementId, Vec<Value>>, complete: bool) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    let mut flag = |f: &FormField, code: &str| {
        out.insert((f.element_id.to_string(), code.to_string()));
    };
    let mut stack: Vec<&FormField> = form.fields.iter().rev().collect();
    while let Some(f) = stack.pop() {
        stack.extend(f.children.iter().rev());
        let vals: &[Value] = values.get(&f.element_id).map_or(&[], Vec::as_slice);
        if let Multiplicity::Bounded(n) = f.multiplicity {
            if vals.len() > n as usize {
                flag(f, "E_MULTIPLICITY");
            }
        }
        if complete && f.mandatory && vals.is_empty() {
            flag(f, "E_MANDATORY_MISSING");
        }
        for v in vals {
            let code = match f.widget {
                Widget::SingleSelect | Widget::DynamicSelect => match v {
                    Value::String(s) if f.options.iter().any(|o| &o.text == s) => None,
                    Value::String(_) => Some("E_CONSTRAINT"),
                    _ => Some("E_BAD_TYPE"),
                },
                Widget::TextInput => match v {
                    Value::String(s) => {
                        let too_long = f.constraints.max_length.is_some_and(|m| s.chars().count() > m as usize);
                        let mismatch = f.constraints.pattern.as_ref().is_some_and(|p| {
                            let re = Regex::new(&format!("^(?:{p})$")).unwrap();
                            !re.is_match(s)
                        });
                        (too_long || mismatch).then_some("E_CONSTRAINT")
                    }
                    _ => Some("E_BAD_TYPE"),
                },
                Widget::Checkbox => (!matches!(v, Value::Bool(_))).then_some("E_BAD_TYPE"),
                Widget::DateInput => match v {
                    Value::String(s) if NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok() => None,
                    _ => Some("E_BAD_TYPE"),
                },
                Widget::NumberInput => {
                    let int = f.constraints.value_type == Some(ValueType::Int);
                    let n = match v {
                        Value::Number(n) if int && (n.is_i64() || n.is_u64()) => n.as_f64(),
                        Value::Number(n) if !int => n.as_f64(),
                        _ => None,
                    };
                    match n {
                        None => Some("E_BAD_TYPE"),
                        Some(x) => f
                            .constraints
                            .range
                            .is_some_and(|r| x < r.min || x > r.max)
                            .then_some("E_CONSTRAINT"),
                    }
                }
            };
            if let Some(c) = code {
                flag(f, c);
            }
        }
        if let Some(dep) = &f.dependency {
            if !vals.is_empty() {
                let parent: Vec<&str> = values
                    .get(&dep.parent_field)
                    .into_iter()
                    .flatten()
                    .filter_map(|v| v.as_str())
                    .collect();
                if parent.is_empty() {
                    flag(f, "E_DEP_VIOLATION");
                } else if parent.iter().all(|p| dep.mapping.iter().any(|(k, _)| k == p)) {
                    let allowed: BTreeSet<&str> = dep
                        .mapping
                        .iter()
                        .filter(|(k, _)| parent.contains(&k.as_str()))
                        .flat_map(|(_, subset)| subset.iter().map(String::as_str))
                        .collect();
                    if vals.iter().filter_map(|v| v.as_str()).any(|s| !allowed.contains(s)) {
                        flag(f, "E_DEP_VIOLATION");
                    }
                }
            }
        }
    }
    out
}

fn random_value(f: &FormField, rng: &mut impl Rng) -> Value {
    let options: Vec<Value> = f.options.iter().map(|o| json!(o.text)).collect();
    let near = f.constraints.max_length.unwrap_or(10) as usize;
    let pool = [
        json!("A1"),
        json!("123"),
        json!("abab"),
        json!("\""),
        json!("Übersicht"),
        json!("x".repeat(near)),
        json!("x".repeat(near + 1)),
        json!(true),
        json!(false),
        json!(0),
        json!(7),
        json!(-3),
        json!(12.5),
        json!(1e9),
        json!("2020-02-29"),
        json!("2021-02-29"),
        json!("2020-1-5"),
        json!(null),
        json!(["nested"]),
    ];
    if !options.is_empty() && rng.random_bool(0.6) {
        return options.choose(rng).unwrap().clone();
    }
    if let Some(r) = f.constraints.range {
        if rng.random_bool(0.4) {
            let pick = [r.min, r.max, r.min - 1.0, r.max + 0.5, (r.min + r.max) / 2.0];
            let x = *pick.choose(rng).unwrap();
            return if x.fract() == 0.0 { json!(x as i64) } else { json!(x) };
        }
    }
    pool.choose(rng).unwrap().clone()
}

fn random_values(form: &FormDescriptor, rng: &mut impl Rng) -> BTreeMap<ElementId, Vec<Value>> {
    let mut out = BTreeMap::new();
    for f in form.flatten() {
        if !rng.random_bool(0.7) {
            continue;
        }
        let n = if rng.random_bool(0.1) { rng.random_range(4..8) } else { rng.random_range(0..3) };
        out.insert(f.element_id.clone(), (0..n).map(|_| random_value(f, rng)).collect());
    }
    out
}

fn random_form(store: &Store, owner: UserId, i: usize, rng: &mut ChaCha8Rng) -> FormDescriptor {
    let mut m = random_model(rng);
    m.project.name = format!("form{i}");
    let m = validate(m).unwrap();
    let p = store.create_project(&m.project.name, "", owner, "owner").unwrap();
    let schema = apply(store, p, &compile(&m), Some(owner), None).unwrap();
    derive_form(&schema)
}

pub fn validator_equivalence() -> String {
    let store = Store::in_memory();
    let owner = store.create_user("owner", "Owner", "secret", false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0008);
    let (mut accepted, mut rejected) = (0, 0);
    for i in 0..300 {
        let form = random_form(&store, owner, i, &mut rng);
        let values = random_values(&form, &mut rng);
        let complete = rng.random_bool(0.5);
        let got: BTreeSet<(String, String)> = check_values(&form, &values, complete)
            .into_iter()
            .map(|v| (v.field, v.code.to_string()))
            .collect();
        let want = naive(&form, &values, complete);
        assert_eq!(got, want, "pair {i}: {values:?}");
        if got.is_empty() {
            accepted += 1;
        } else {
            rejected += 1;
        }
    }
    format!("300 pairs agree: {accepted} accepted, {rejected} rejected with identical codes")
}
