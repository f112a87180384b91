#![allow(dead_code)]

use relis_core::installer::install_new;
use relis_core::store::{Payload, Store};
use relis_core::{ProjectId, RecordId, UserId};
use serde_json::{json, Value};

pub const SAMPLE: &str = include_str!("../data/mapping_study.relis");

pub fn user(store: &Store, login: &str) -> UserId {
    store.create_user(login, login, "secret", false).unwrap()
}

/// Installs `source` into a new project owned by a fresh user.
pub fn install(store: &Store, source: &str) -> (ProjectId, UserId) {
    let owner = user(store, &format!("owner{}", store.users().len()));
    let installed = install_new(store, owner, source).unwrap();
    (installed.project, owner)
}

pub fn values(vals: &[Value]) -> Payload {
    let mut p = Payload::new();
    p.insert("values".into(), Value::Array(vals.to_vec()));
    p
}

/// Writes one category record holding `vals`.
pub fn put(store: &Store, project: ProjectId, element: &str, vals: &[Value]) -> RecordId {
    store
        .transact(project, None, |tx| tx.add_record(element, None, values(vals), Vec::new()))
        .unwrap()
}

pub fn text(n: usize) -> Value {
    json!("x".repeat(n))
}

/// An installed project with enrolled reviewers and seniors.
pub struct Team {
    pub store: Store,
    pub project: ProjectId,
    pub owner: UserId,
    pub reviewers: Vec<UserId>,
    pub seniors: Vec<UserId>,
}

/// Installs `source` and enrolls `reviewers` users in role `reviewer` and
/// `seniors` users in role `lead`.
pub fn team(source: &str, reviewers: usize, seniors: usize) -> Team {
    let store = Store::in_memory();
    let (project, owner) = install(&store, source);
    let enroll = |n: usize, role: &str| -> Vec<UserId> {
        (0..n)
            .map(|i| {
                let u = user(&store, &format!("{role}{i}"));
                store.add_member(project, Some(owner), u, role).unwrap();
                u
            })
            .collect()
    };
    let reviewers = enroll(reviewers, "reviewer");
    let seniors = enroll(seniors, "lead");
    Team {
        store,
        project,
        owner,
        reviewers,
        seniors,
    }
}

/// A CSV corpus of `n` distinct papers.
pub fn corpus(n: usize) -> String {
    let mut out = String::from("bibkey,title,authors,venue,year,abstract,link\n");
    for i in 0..n {
        out.push_str(&format!(
            "key{i},Paper number {i},Ann Author;Bob Writer,Venue {i},{},Abstract {i},https://example.org/{i}\n",
            2000 + i % 20
        ));
    }
    out
}
