mod common;

use std::collections::BTreeSet;

use common::{install, put, text, user, SAMPLE};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relis_core::installer::{apply, compile, diff, diff_current, reinstall, MigrationOp, MigrationPlan};
use relis_core::schema::{
    derive_entity_configs, derive_form, ElementKind, ElementStatus, Operation, Shape, Widget,
};
use relis_core::store::{DataCounts, Store};
use relis_core::{ElementId, Error};
use relis_dsl::testkit::random_model;
use relis_dsl::{check, validate, ConfigModel, ValidatedModel};
use serde_json::json;

const SMALL: &str = r#"
project small "Small"
roles {
  r reviewer
  s senior
  a admin
}
screening {
  phases { first metadata }
  assign automatic 1
  conflict majority
  exclusion { "Off topic" "Duplicate" }
}
classification {
  simple name "Name": text(100) *
  list scope "Scope": ("Model", "Metamodel", "Both")
  simple year "Year": int
}
"#;

fn ops(plan: &MigrationPlan) -> Vec<(&'static str, String)> {
    plan.ops.iter().map(|op| (op.name(), op.target().to_string())).collect()
}

fn reinstall_ok(store: &Store, p: relis_core::ProjectId, src: &str) -> relis_core::installer::Reinstall {
    reinstall(store, p, None, src, false, None).unwrap()
}

#[test]
fn compile_adds_every_declaration_once() {
    let m = check(SMALL).unwrap();
    let plan = compile(&m);
    assert_eq!(plan.base_version, 0);
    assert_eq!(plan.ops.len(), 12);
    assert!(plan.ops.iter().all(|op| matches!(op, MigrationOp::Add { replaces: None, .. })));
    let targets: BTreeSet<String> = plan.ops.iter().map(|op| op.target().to_string()).collect();
    assert_eq!(targets.len(), 12);
    for id in ["role.a", "phase.first", "category.scope", "category.scope.choice.both"] {
        assert!(targets.contains(id), "{id}");
    }
}

#[test]
fn compile_keeps_max_length() {
    let plan = compile(&check(SMALL).unwrap());
    let name = plan
        .ops
        .iter()
        .find_map(|op| match op {
            MigrationOp::Add { element, .. } if element.id == "category.name" => element.descriptor.as_category().cloned(),
            _ => None,
        })
        .unwrap();
    match name.shape {
        Shape::Simple(s) => assert_eq!(s.max_length, Some(100)),
        other => panic!("unexpected shape {other:?}"),
    }
}

#[test]
fn compile_without_categories() {
    let src = SMALL.split("classification").next().unwrap().to_string() + "classification {}\n";
    let plan = compile(&check(&src).unwrap());
    assert_eq!(plan.ops.len(), 6);
    assert!(plan.ops.iter().all(|op| !op.target().as_str().starts_with("category.")));
}

#[test]
fn fresh_install_mirrors_declarations() {
    let store = Store::in_memory();
    let (p, _) = install(&store, SAMPLE);
    let snap = store.snapshot(p).unwrap();
    assert_eq!(snap.schema.version, 1);
    let plan = compile(&check(SAMPLE).unwrap());
    let declared: BTreeSet<String> = plan.ops.iter().map(|op| op.target().to_string()).collect();
    let active: BTreeSet<String> = snap.schema.active().map(|e| e.id.to_string()).collect();
    assert_eq!(declared, active);
    assert!(snap.documents(Some(1)).is_some());
}

#[test]
fn removing_an_empty_category_drops_it() {
    let store = Store::in_memory();
    let (p, _) = install(&store, SAMPLE);
    let edited = SAMPLE.replace("  simple name \"Transformation name\": text(100) *\n", "");
    let r = reinstall_ok(&store, p, &edited);
    assert_eq!(ops(&r.plan), [("drop", "category.name".to_string())]);
    assert_eq!(r.report.entries[0].reason, "empty→drop");
    let snap = store.snapshot(p).unwrap();
    assert!(snap.schema.get_str("category.name").is_none());
    assert!(matches!(snap.count_records("category.name"), Err(Error::NotFound(_))));
}

#[test]
fn removing_a_category_with_data_deactivates_it() {
    let store = Store::in_memory();
    let (p, _) = install(&store, SAMPLE);
    let ids: Vec<_> = (0..5).map(|i| put(&store, p, "category.name", &[json!(format!("t{i}"))])).collect();
    let edited = SAMPLE.replace("  simple name \"Transformation name\": text(100) *\n", "");
    let r = reinstall_ok(&store, p, &edited);
    assert_eq!(ops(&r.plan), [("deactivate", "category.name".to_string())]);
    assert_eq!(r.report.entries[0].reason, "has-data→deactivate");

    let snap = store.snapshot(p).unwrap();
    let e = snap.schema.get_str("category.name").unwrap();
    assert_eq!(e.status, ElementStatus::Deactivated);
    assert_eq!(e.deactivated_in, Some(2));
    assert_eq!(snap.count_records("category.name").unwrap(), 5);
    for (i, id) in ids.iter().enumerate() {
        assert_eq!(snap.record(*id).unwrap().payload["values"], json!([format!("t{i}")]));
    }
    let err = store
        .transact(p, None, |tx| tx.add_record("category.name", None, common::values(&[text(3)]), vec![]))
        .unwrap_err();
    assert_eq!(err.code(), "E_ELEMENT_INACTIVE");

    // Reverting the edit brings the element and its data back.
    let r = reinstall_ok(&store, p, SAMPLE);
    assert_eq!(ops(&r.plan), [("reactivate", "category.name".to_string())]);
    assert_eq!(r.report.entries[0].reason, "identical→reactivate");
    let snap = store.snapshot(p).unwrap();
    assert!(snap.schema.get_str("category.name").unwrap().is_active());
    assert_eq!(snap.count_records("category.name").unwrap(), 5);
}

#[test]
fn renaming_a_category_with_data_is_delete_plus_add() {
    let store = Store::in_memory();
    let (p, _) = install(&store, SAMPLE);
    put(&store, p, "category.name", &[json!("ATL")]);
    let edited = SAMPLE.replace("simple name \"Transformation name\"", "simple label \"Transformation name\"");
    let r = reinstall_ok(&store, p, &edited);
    assert_eq!(
        ops(&r.plan),
        [("deactivate", "category.name".to_string()), ("add", "category.label".to_string())]
    );
}

#[test]
fn changed_descriptor_gets_a_versioned_id() {
    let store = Store::in_memory();
    let (p, _) = install(&store, SAMPLE);
    let old = put(&store, p, "category.name", &[json!("ATL")]);
    let edited = SAMPLE.replace("text(100) *", "text(200) *");
    let r = reinstall_ok(&store, p, &edited);
    assert_eq!(
        ops(&r.plan),
        [("deactivate", "category.name".to_string()), ("add", "category.name@v2".to_string())]
    );
    let snap = store.snapshot(p).unwrap();
    assert_eq!(snap.record(old).unwrap().element_id, "category.name");
    let form = derive_form(&snap.schema);
    let field = form.field(&ElementId::new("category.name@v2")).unwrap();
    assert_eq!(field.constraints.max_length, Some(200));
    assert!(form.field(&ElementId::new("category.name")).is_none());

    // Going back reactivates the original and retires the edited one.
    let r = reinstall_ok(&store, p, SAMPLE);
    assert_eq!(
        ops(&r.plan),
        [("drop", "category.name@v2".to_string()), ("reactivate", "category.name".to_string())]
    );
}

#[test]
fn identical_model_gives_an_empty_plan() {
    let store = Store::in_memory();
    let (p, _) = install(&store, SAMPLE);
    let r = reinstall_ok(&store, p, SAMPLE);
    assert!(r.plan.is_empty());
    assert!(!r.applied);
    assert_eq!(store.snapshot(p).unwrap().schema.version, 1);
}

#[test]
fn dry_run_changes_nothing() {
    let store = Store::in_memory();
    let (p, _) = install(&store, SAMPLE);
    let before = store.snapshot(p).unwrap();
    let edited = SAMPLE.replace("  simple name \"Transformation name\": text(100) *\n", "");
    let r = reinstall(&store, p, None, &edited, true, None).unwrap();
    assert!(!r.applied);
    assert_eq!(r.plan.ops.len(), 1);
    let after = store.snapshot(p).unwrap();
    assert_eq!(before.schema, after.schema);
    assert_eq!(before.records, after.records);
}

#[test]
fn stale_base_version_is_rejected() {
    let store = Store::in_memory();
    let (p, _) = install(&store, SAMPLE);
    let edited = SAMPLE.replace("  simple name \"Transformation name\": text(100) *\n", "");
    let plan = diff(&store.snapshot(p).unwrap().schema, &check(&edited).unwrap(), &DataCounts::new());
    apply(&store, p, &plan, None, None).unwrap();
    let before = store.snapshot(p).unwrap();
    let err = apply(&store, p, &plan, None, None).unwrap_err();
    assert_eq!(err.code(), "E_VERSION_CONFLICT");
    assert_eq!(store.snapshot(p).unwrap().schema, before.schema);

    let err = reinstall(&store, p, None, SAMPLE, false, Some(1)).unwrap_err();
    assert_eq!(err.code(), "E_VERSION_CONFLICT");
}

#[test]
fn diff_against_an_old_schema_is_stale() {
    let store = Store::in_memory();
    let (p, _) = install(&store, SAMPLE);
    let old = store.snapshot(p).unwrap().schema.clone();
    let edited = SAMPLE.replace("  simple name \"Transformation name\": text(100) *\n", "");
    reinstall_ok(&store, p, &edited);
    let snap = store.snapshot(p).unwrap();
    let err = diff_current(&snap, &old, &check(SAMPLE).unwrap()).unwrap_err();
    assert_eq!(err.code(), "E_STALE_SCHEMA");
}

#[test]
fn data_written_after_diff_blocks_the_drop() {
    let store = Store::in_memory();
    let (p, _) = install(&store, SAMPLE);
    let edited = SAMPLE.replace("  simple name \"Transformation name\": text(100) *\n", "");
    let snap = store.snapshot(p).unwrap();
    let plan = diff(&snap.schema, &check(&edited).unwrap(), &snap.data_counts());
    assert_eq!(ops(&plan), [("drop", "category.name".to_string())]);
    let id = put(&store, p, "category.name", &[json!("late")]);
    let err = apply(&store, p, &plan, None, None).unwrap_err();
    assert_eq!(err.code(), "E_ILLEGAL_DROP");
    let snap = store.snapshot(p).unwrap();
    assert_eq!(snap.schema.version, 1);
    assert!(snap.record(id).is_ok());
}

#[test]
fn entity_configs() {
    let store = Store::in_memory();
    let (p, _) = install(&store, SAMPLE);
    put(&store, p, "category.name", &[json!("kept")]);
    let configs = derive_entity_configs(&store.snapshot(p).unwrap().schema);
    let paper = configs.iter().find(|c| c.entity == "paper").unwrap();
    assert_eq!(paper.operations, Operation::ALL);
    for op in Operation::ALL {
        assert!(paper.page_bindings.contains_key(&op));
    }
    for c in &configs {
        assert!(c.operations.iter().all(|op| c.page_bindings.contains_key(op)), "{}", c.entity);
    }

    let edited = SAMPLE.replace("  simple name \"Transformation name\": text(100) *\n", "");
    reinstall_ok(&store, p, &edited);
    let configs = derive_entity_configs(&store.snapshot(p).unwrap().schema);
    let cls = configs.iter().find(|c| c.entity == "classification").unwrap();
    let names = |op| cls.attributes_for(op).iter().map(|a| a.name.clone()).collect::<Vec<_>>();
    assert!(!names(Operation::Modify).contains(&"name".to_string()));
    assert!(names(Operation::View).contains(&"name".to_string()));
    assert!(!cls.attributes.iter().find(|a| a.name == "name").unwrap().writable);
    assert!(configs.iter().all(|c| c.entity != "category.name"));
}

#[test]
fn identical_models_give_identical_configs() {
    let store = Store::in_memory();
    let (a, _) = install(&store, SAMPLE);
    let (b, _) = install(&store, &SAMPLE.replace("project mt_study", "project mt_study_copy"));
    let ca = derive_entity_configs(&store.snapshot(a).unwrap().schema);
    let cb = derive_entity_configs(&store.snapshot(b).unwrap().schema);
    assert_eq!(ca, cb);
    let mut fa = derive_form(&store.snapshot(a).unwrap().schema);
    let fb = derive_form(&store.snapshot(b).unwrap().schema);
    fa.project_id = fb.project_id;
    assert_eq!(fa, fb);
}

#[test]
fn form_widgets_follow_shapes() {
    let store = Store::in_memory();
    let (p, _) = install(&store, SAMPLE);
    let form = derive_form(&store.snapshot(p).unwrap().schema);
    let f = |id: &str| form.field(&ElementId::new(id)).unwrap().clone();

    let name = f("category.name");
    assert_eq!(name.widget, Widget::TextInput);
    assert_eq!(name.constraints.max_length, Some(100));
    assert!(name.mandatory);

    let scope = f("category.scope");
    assert_eq!(scope.widget, Widget::SingleSelect);
    let texts: Vec<_> = scope.options.iter().map(|o| o.text.as_str()).collect();
    assert_eq!(texts, ["Model level", "Metamodel level", "Both"]);

    let lang = f("category.language");
    assert_eq!(lang.widget, Widget::DynamicSelect);
    assert!(lang.allows_new_options);
    assert!(lang.repeatable);

    let gran = f("category.granularity");
    assert_eq!(gran.dependency.as_ref().unwrap().parent_field, "category.scope");

    assert_eq!(f("category.evaluated").widget, Widget::Checkbox);
    assert_eq!(f("category.subjects").widget, Widget::NumberInput);
    assert_eq!(f("category.venue_year").widget, Widget::DateInput);
    let evaluated = &form.fields.iter().find(|f| f.name == "evaluated").unwrap().children;
    assert_eq!(evaluated.len(), 2);
}

fn model(seed: u64) -> ValidatedModel {
    validate(random_model(&mut ChaCha8Rng::seed_from_u64(seed))).unwrap()
}

fn with_name(mut m: ConfigModel, name: &str) -> ValidatedModel {
    m.project.name = name.to_string();
    validate(m).unwrap()
}

fn fresh(store: &Store, m: &ValidatedModel) -> relis_core::ProjectId {
    let owner = user(store, &format!("u{}", store.users().len()));
    let p = store.create_project(&m.project.name, "", owner, "owner").unwrap();
    apply(store, p, &compile(m), Some(owner), None).unwrap();
    p
}

/// Active categories of a schema by id.
fn active_categories(store: &Store, p: relis_core::ProjectId) -> BTreeSet<ElementId> {
    let snap = store.snapshot(p).unwrap();
    snap.schema
        .active()
        .filter(|e| e.kind == ElementKind::Category)
        .map(|e| e.id.clone())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn compile_then_diff_is_empty(seed in any::<u64>()) {
        let store = Store::in_memory();
        let m = model(seed);
        let p = fresh(&store, &m);
        let snap = store.snapshot(p).unwrap();
        prop_assert!(diff(&snap.schema, &m, &DataCounts::new()).is_empty());
        let form: BTreeSet<ElementId> =
            derive_form(&snap.schema).flatten().iter().map(|f| f.element_id.clone()).collect();
        prop_assert_eq!(derive_form(&snap.schema).flatten().len(), form.len());
        prop_assert_eq!(form, active_categories(&store, p));
    }

    #[test]
    fn applying_a_diff_reaches_the_model(a in any::<u64>(), b in any::<u64>()) {
        let store = Store::in_memory();
        let m1 = model(a);
        let m2 = with_name(random_model(&mut ChaCha8Rng::seed_from_u64(b)), &m1.project.name);
        let p = fresh(&store, &m1);
        for _ in 0..2 {
            let snap = store.snapshot(p).unwrap();
            let plan = diff(&snap.schema, &m2, &snap.data_counts());
            apply(&store, p, &plan, None, None).unwrap();
            let snap = store.snapshot(p).unwrap();
            prop_assert!(diff(&snap.schema, &m2, &snap.data_counts()).is_empty());
            // Back to the first model, which can only reactivate or add.
            let plan = diff(&snap.schema, &m1, &snap.data_counts());
            apply(&store, p, &plan, None, None).unwrap();
            let snap = store.snapshot(p).unwrap();
            prop_assert!(diff(&snap.schema, &m1, &snap.data_counts()).is_empty());
            let form: BTreeSet<ElementId> =
                derive_form(&snap.schema).flatten().iter().map(|f| f.element_id.clone()).collect();
            prop_assert_eq!(form, active_categories(&store, p));
        }
        let versions = store.snapshot(p).unwrap().documents.keys().copied().collect::<Vec<_>>();
        let n = versions.len() as u32;
        prop_assert_eq!(versions, (1..=n).collect::<Vec<_>>());
    }
}
