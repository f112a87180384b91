use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relis_core::installer::{apply, compile, diff, MigrationOp};
use relis_core::schema::{Descriptor, ElementKind};
use relis_core::store::{Payload, ProjectState, Store};
use relis_core::{ElementId, ProjectId, RecordId, UserId};
use relis_dsl::testkit::random_model;
use relis_dsl::{validate, CategoryDecl, ConfigModel, ValidatedModel};
use serde_json::{json, Value};

fn values(vals: &[Value]) -> Payload {
    let mut p = Payload::new();
    p.insert("values".into(), Value::Array(vals.to_vec()));
    p
}

fn active_categories(snap: &ProjectState) -> Vec<ElementId> {
    snap.schema
        .active()
        .filter(|e| e.kind == ElementKind::Category)
        .map(|e| e.id.clone())
        .collect()
}

/// Writes one record into `cat`, holding one of its choices when it has any.
fn write(store: &Store, p: ProjectId, owner: UserId, snap: &ProjectState, cat: &ElementId, rng: &mut ChaCha8Rng) -> (RecordId, Payload) {
    let (value, refs) = match snap.schema.choices_of(cat).choose(rng) {
        Some(ch) => {
            let Descriptor::Choice { text, .. } = &ch.descriptor else { unreachable!() };
            (json!(text), vec![ch.id.clone()])
        }
        None => (json!(rng.random::<u32>()), Vec::new()),
    };
    let payload = values(&[value]);
    let id = store
        .transact(p, Some(owner), |tx| tx.add_record(cat.as_str(), None, payload.clone(), refs))
        .unwrap();
    (id, payload)
}

/// The `n`th category in pre-order.
fn nth_mut<'a>(cats: &'a mut [CategoryDecl], n: &mut usize) -> Option<&'a mut CategoryDecl> {
    for c in cats {
        if *n == 0 {
            return Some(c);
        }
        *n -= 1;
        if let Some(found) = nth_mut(&mut c.subcategories, n) {
            return Some(found);
        }
    }
    None
}

/// A valid edit of `m`: a fresh model, an earlier one, or a local change to
/// one category.
fn edit(m: &ConfigModel, history: &[ConfigModel], rng: &mut ChaCha8Rng) -> ValidatedModel {
    let mut next = m.clone();
    match rng.random_range(0..6) {
        0 => next = random_model(rng),
        1 => next = history.choose(rng).unwrap().clone(),
        2 if !next.scheme.categories.is_empty() => {
            let i = rng.random_range(0..next.scheme.categories.len());
            next.scheme.categories.remove(i);
        }
        k => {
            let total = next.scheme.flatten().len();
            let mut n = rng.random_range(0..total.max(1));
            if let Some(c) = nth_mut(&mut next.scheme.categories, &mut n) {
                match k {
                    3 => c.name.push_str("_r"),
                    4 => c.mandatory = !c.mandatory,
                    _ => c.title.push_str(" (rev)"),
                }
            }
        }
    }
    next.project.name = m.project.name.clone();
    validate(next).unwrap_or_else(|_| validate(m.clone()).unwrap())
}

struct Tally {
    writes: usize,
    plans: usize,
    deactivations: usize,
}

fn trial(seed: u64, steps: usize, tally: &mut Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let store = Store::in_memory();
    let owner = store.create_user("owner", "Owner", "secret", false).unwrap();
    let mut model = validate(random_model(&mut rng)).unwrap();
    let p = store.create_project(&model.project.name, "", owner, "owner").unwrap();
    apply(&store, p, &compile(&model), Some(owner), None).unwrap();
    let mut history: Vec<ConfigModel> = vec![model.clone().into_inner()];
    let mut written: BTreeMap<RecordId, Payload> = BTreeMap::new();

    for step in 0..steps {
        let snap = store.snapshot(p).unwrap();
        let cats = active_categories(&snap);
        for _ in 0..rng.random_range(0..4) {
            let Some(cat) = cats.choose(&mut rng) else { break };
            let (id, payload) = write(&store, p, owner, &snap, cat, &mut rng);
            written.insert(id, payload);
        }
        let rewritable: Vec<RecordId> = written
            .keys()
            .copied()
            .filter(|id| {
                snap.record(*id)
                    .is_ok_and(|r| snap.schema.get_str(&r.element_id).is_some_and(|e| e.is_active()))
            })
            .collect();
        if let Some(&id) = rewritable.choose(&mut rng) {
            let payload = values(&[json!(format!("rewritten {step}"))]);
            let v = snap.record(id).unwrap().record_version;
            store
                .transact(p, Some(owner), |tx| tx.modify_record(id, v, payload.clone(), Vec::new()))
                .unwrap();
            written.insert(id, payload);
        }

        model = edit(&model, &history, &mut rng);
        history.push(model.clone().into_inner());
        let snap = store.snapshot(p).unwrap();
        let counts = snap.data_counts();
        let plan = diff(&snap.schema, &model, &counts);
        for op in &plan.ops {
            match op {
                MigrationOp::Drop { id } => {
                    let n = counts.get(id).copied().unwrap_or(0);
                    assert_eq!(n, 0, "seed {seed} step {step}: plan drops {id} holding {n} records");
                }
                MigrationOp::Deactivate { .. } => tally.deactivations += 1,
                _ => {}
            }
        }
        apply(&store, p, &plan, Some(owner), None).unwrap();
        tally.plans += 1;
        let snap = store.snapshot(p).unwrap();
        let again = diff(&snap.schema, &model, &snap.data_counts());
        assert!(again.is_empty(), "seed {seed} step {step}: re-diff not empty: {:?}", again.ops);
    }

    let snap = store.snapshot(p).unwrap();
    for (id, payload) in &written {
        let r = snap.record(*id).unwrap_or_else(|e| panic!("seed {seed}: record {id} lost: {e}"));
        assert_eq!(&r.payload, payload, "seed {seed}: record {id} changed");
        assert!(snap.schema.get_str(&r.element_id).is_some(), "seed {seed}: element of {id} is gone");
    }
    tally.writes += written.len();
}

pub fn preservation() -> String {
    let mut tally = Tally {
        writes: 0,
        plans: 0,
        deactivations: 0,
    };
    for seed in 0..50 {
        trial(seed, 20, &mut tally);
    }
    format!(
        "50 trials x 20 edits: {} plans applied, {} deactivations, {} records all retrievable, no drop of data",
        tally.plans, tally.deactivations, tally.writes
    )
}

pub fn coherence() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0003);
    let store = Store::in_memory();
    let owner = store.create_user("owner", "Owner", "secret", false).unwrap();
    let install = |name: String, m: ConfigModel| -> (ProjectId, ValidatedModel) {
        let mut m = m;
        m.project.name = name;
        let m = validate(m).unwrap();
        let p = store.create_project(&m.project.name, "", owner, "owner").unwrap();
        apply(&store, p, &compile(&m), Some(owner), None).unwrap();
        (p, m)
    };

    for i in 0..100 {
        let (p, m) = install(format!("single{i}"), random_model(&mut rng));
        let snap = store.snapshot(p).unwrap();
        let plan = diff(&snap.schema, &m, &snap.data_counts());
        assert!(plan.is_empty(), "model {i}: diff after install is {:?}", plan.ops);
    }

    let mut ops = 0;
    for i in 0..100 {
        let name = format!("pair{i}");
        let (p, _) = install(name.clone(), random_model(&mut rng));
        // Half of the pairs carry data, so removals become deactivations.
        if i % 2 == 0 {
            let snap = store.snapshot(p).unwrap();
            for cat in active_categories(&snap) {
                write(&store, p, owner, &snap, &cat, &mut rng);
            }
        }
        let mut m2 = random_model(&mut rng);
        m2.project.name = name;
        let m2 = validate(m2).unwrap();
        let snap = store.snapshot(p).unwrap();
        let plan = diff(&snap.schema, &m2, &snap.data_counts());
        ops += plan.ops.len();
        apply(&store, p, &plan, Some(owner), None).unwrap();
        let snap = store.snapshot(p).unwrap();
        let again = diff(&snap.schema, &m2, &snap.data_counts());
        assert!(again.is_empty(), "pair {i}: re-diff is {:?}", again.ops);
    }
    format!("100 installs diff empty; 100 pairs converge after one plan ({ops} operations applied)")
}
