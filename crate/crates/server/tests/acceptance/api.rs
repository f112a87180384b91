use std::collections::{BTreeMap, BTreeSet};

use relis_core::UserId;
use serde_json::{json, Value};

use crate::common::{corpus, Api, Project, SAMPLE};

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(8)
        .enable_all()
        .build()
        .unwrap()
}

async fn enroll(api: &Api, p: &Project, login: &str, role: &str) -> (UserId, String) {
    let u = api.user(login);
    api.post(&p.url("/members"), &p.token, json!({ "login": login, "role": role }))
        .await
        .ok();
    (u, api.token(u))
}

const ONE_PHASE: &str = r#"
project crowd "Concurrent screening"
roles {
  reviewer reviewer
  lead senior
  owner admin
}
screening {
  phases { titles metadata }
  assign automatic 1
  conflict majority
  exclusion { "Off topic" }
}
classification {
  simple name "Name": text(100)
}
"#;

pub fn concurrency() -> String {
    runtime().block_on(async {
        let api = Api::new();
        let p = api.install(SAMPLE).await;
        for round in 1..=20u32 {
            let a = SAMPLE.replace("\"Scope\"", &format!("\"Scope a{round}\""));
            let b = SAMPLE.replace("\"Scope\"", &format!("\"Scope b{round}\""));
            let url = p.url(&format!("/install?base_version={round}"));
            let spawn = |src: String| {
                let (api, url, t) = (api.clone(), url.clone(), p.token.clone());
                tokio::spawn(async move { api.post(&url, &t, src).await })
            };
            let (ra, rb) = tokio::join!(spawn(a), spawn(b));
            let results = [ra.unwrap(), rb.unwrap()];
            let won = results.iter().filter(|r| r.status == 200).count();
            let lost = results.iter().filter(|r| r.code() == "E_VERSION_CONFLICT").count();
            assert_eq!((won, lost), (1, 1), "round {round}: {results:?}");
        }

        let p = api.install(ONE_PHASE).await;
        let mut reviewers = BTreeMap::new();
        for i in 0..8 {
            let (u, t) = enroll(&api, &p, &format!("crowd{i}"), "reviewer").await;
            reviewers.insert(u.0, t);
        }
        api.post(&p.url("/papers/import"), &p.token, corpus(200)).await.ok();
        let r = api.post(&p.url("/phases/titles/assign"), &p.token, json!({ "seed": 9 })).await.ok();
        let mut work: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for a in r["assignments"].as_array().unwrap() {
            work.entry(a["reviewer"].as_u64().unwrap())
                .or_default()
                .push(a["id"].as_u64().unwrap());
        }
        assert!(work.values().all(|w| w.len() == 25), "loads {:?}", work.values().map(Vec::len).collect::<Vec<_>>());

        let mut tasks = Vec::new();
        for (reviewer, ids) in work {
            let (api, token) = (api.clone(), reviewers[&reviewer].clone());
            tasks.push(tokio::spawn(async move {
                for (i, id) in ids.into_iter().enumerate() {
                    let body = if i % 3 == 0 {
                        json!({ "verdict": "exclude", "criterion": "Off topic" })
                    } else {
                        json!({ "verdict": "include" })
                    };
                    api.post(&format!("/assignments/{id}/decision"), &token, body).await.ok();
                }
            }));
        }
        for t in tasks {
            t.await.unwrap();
        }

        let decisions = api.get(&p.url("/entities/decision?per_page=500"), &p.token).await.ok();
        assert_eq!(decisions["total"], 200);
        let s = &api.get(&p.url("/stats"), &p.token).await.ok()["phases"][0];
        let n = |k: &str| s[k].as_u64().unwrap();
        assert_eq!(n("total"), 200);
        assert_eq!(n("decided"), 200);
        assert_eq!(n("included") + n("excluded") + n("pending"), n("total"));
        assert_eq!((n("included"), n("excluded")), (8 * 16, 8 * 9));
        "20 racing install pairs: one success and one E_VERSION_CONFLICT each; 8 x 25 concurrent decisions all recorded, 128 + 72 + 0 = 200".to_string()
    })
}

const STUDY: &str = r#"
project e2e "End-to-end study"
roles {
  reviewer reviewer
  lead senior
  owner admin
}
screening {
  phases { titles metadata }
  assign automatic 2
  conflict majority
  exclusion {
    "Off topic"
    "Not peer reviewed"
  }
}
classification {
  simple name "Transformation name": text(100) *
  list scope "Scope": ("Model level", "Metamodel level", "Both")
  list granularity "Granularity": ("Element", "Fragment", "Whole model")
    depends on scope ("Model level" -> {"Element", "Fragment"}, "Both" -> {"Whole model"})
}
"#;

/// What a paper's screeners say, in assignment order.
#[derive(Clone, Copy)]
enum Plan {
    Include,
    Exclude(&'static str),
    /// One include and one exclude, settled by a third reviewer's include.
    Split,
}

fn verdicts(plan: Plan) -> [Value; 2] {
    let include = json!({ "verdict": "include" });
    match plan {
        Plan::Include => [include.clone(), include],
        Plan::Exclude(c) => {
            let v = json!({ "verdict": "exclude", "criterion": c });
            [v.clone(), v]
        }
        Plan::Split => [include, json!({ "verdict": "exclude", "criterion": "Off topic" })],
    }
}

/// Parses the CSV export into its tables, each a set of rows.
fn tables(text: &str) -> Vec<BTreeSet<Vec<String>>> {
    text.split("\n\n")
        .map(|block| {
            csv::Reader::from_reader(block.as_bytes())
                .records()
                .map(|r| r.unwrap().iter().map(str::to_string).collect())
                .collect()
        })
        .collect()
}

fn row(cells: &[&str]) -> Vec<String> {
    cells.iter().map(|s| s.to_string()).collect()
}

pub fn end_to_end() -> String {
    runtime().block_on(async {
        let api = Api::new();
        let p = api.install(STUDY).await;
        let form = api.get(&p.url("/form"), &p.token).await.ok();
        let fields = form["fields"].as_array().unwrap();
        assert_eq!(fields.len(), 3);
        assert_eq!(fields[1]["options"].as_array().unwrap().len(), 3);
        assert!(fields[2]["dependency"].is_object(), "{}", fields[2]);

        let mut tokens = BTreeMap::new();
        for i in 0..3 {
            let (u, t) = enroll(&api, &p, &format!("rev{i}"), "reviewer").await;
            tokens.insert(u.0, t);
        }
        let (_, lead) = enroll(&api, &p, "lead", "lead").await;

        let report = api.post(&p.url("/papers/import"), &p.token, corpus(10)).await.ok();
        assert_eq!(report["imported"], 10);
        let mut papers: Vec<u64> = report["ids"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
        papers.sort();

        let r = api.post(&p.url("/phases/titles/assign"), &p.token, json!({ "seed": 3 })).await.ok();
        let assignments = r["assignments"].as_array().unwrap().clone();
        assert_eq!(assignments.len(), 20);
        let mut per_paper: BTreeMap<u64, Vec<&Value>> = BTreeMap::new();
        let mut loads: BTreeMap<u64, usize> = BTreeMap::new();
        for a in &assignments {
            per_paper.entry(a["paper"].as_u64().unwrap()).or_default().push(a);
            *loads.entry(a["reviewer"].as_u64().unwrap()).or_default() += 1;
        }
        assert!(per_paper.values().all(|v| v.len() == 2 && v[0]["reviewer"] != v[1]["reviewer"]));
        let mut spread: Vec<usize> = loads.values().copied().collect();
        spread.sort();
        assert_eq!(spread, [6, 7, 7]);

        let plans: Vec<Plan> = (0..10)
            .map(|i| match i {
                0..4 => Plan::Include,
                4 => Plan::Split,
                5..8 => Plan::Exclude("Off topic"),
                _ => Plan::Exclude("Not peer reviewed"),
            })
            .collect();
        for (paper, plan) in papers.iter().zip(&plans) {
            for (a, body) in per_paper[paper].iter().zip(verdicts(*plan)) {
                let t = &tokens[&a["reviewer"].as_u64().unwrap()];
                api.post(&format!("/assignments/{}/decision", a["id"]), t, body).await.ok();
            }
        }

        // The split paper is the only conflict; a third reviewer breaks the tie.
        let split = papers[4];
        let open = api.get(&p.url("/phases/titles/conflicts"), &lead).await.ok();
        let open: Vec<u64> = open.as_array().unwrap().iter().map(|c| c["paper"].as_u64().unwrap()).collect();
        assert_eq!(open, [split]);
        let screeners: Vec<u64> = per_paper[&split].iter().map(|a| a["reviewer"].as_u64().unwrap()).collect();
        let third = *tokens.keys().find(|u| !screeners.contains(u)).unwrap();
        let extra = api
            .post(&p.url("/phases/titles/assignments"), &p.token, json!({ "paper": split, "reviewer": third }))
            .await
            .ok();
        api.post(&format!("/assignments/{}/decision", extra["id"]), &tokens[&third], json!({ "verdict": "include" }))
            .await
            .ok();
        let cases = api.post(&p.url("/phases/titles/conflicts/resolve"), &lead, json!({})).await.ok();
        let cases = cases.as_array().unwrap();
        assert_eq!(cases.len(), 1);
        assert_eq!(cases[0]["status"], "resolved");
        assert_eq!(cases[0]["resolution"]["verdict"], "include");

        let scopes = ["Model level", "Both", "Model level", "Metamodel level"];
        let grains = ["Element", "Whole model", "Fragment", "Element"];
        for i in 0..4 {
            let a = per_paper[&papers[i]][0];
            let t = &tokens[&a["reviewer"].as_u64().unwrap()];
            let body = json!({
                "values": { "name": [format!("T{i}")], "scope": [scopes[i]], "granularity": [grains[i]] },
                "mark_complete": true,
            });
            let url = p.url(&format!("/papers/{}/classification", papers[i]));
            let r = api.put(&url, t, body).await.ok();
            assert_eq!(r["completeness"], "complete");
        }

        // Recount from the script alone.
        let included = 5;
        let mut per_criterion: BTreeMap<&str, usize> = BTreeMap::new();
        for plan in &plans {
            if let Plan::Exclude(c) = plan {
                *per_criterion.entry(c).or_default() += 1;
            }
        }
        let mut dist: BTreeMap<&str, BTreeMap<String, usize>> = BTreeMap::new();
        for i in 0..4 {
            *dist.entry("name").or_default().entry(format!("T{i}")).or_default() += 1;
            *dist.entry("scope").or_default().entry(scopes[i].into()).or_default() += 1;
            *dist.entry("granularity").or_default().entry(grains[i].into()).or_default() += 1;
        }
        let excluded: usize = per_criterion.values().sum();
        let phase = ["titles", "10", "10", "10", &included.to_string(), &excluded.to_string(), "0", "1"];

        let mut want = vec![BTreeSet::from([row(&phase)])];
        want.push(per_criterion.iter().map(|(c, n)| row(&["titles", c, &n.to_string()])).collect());
        for (cat, values) in &dist {
            want.push(values.iter().map(|(v, n)| row(&[cat, v, &n.to_string()])).collect());
        }
        let csv = api.get(&p.url("/stats.csv"), &tokens.values().next().unwrap().clone()).await;
        assert_eq!(csv.status, 200);
        assert_eq!(tables(&csv.text), want, "{}", csv.text);

        let j = api.get(&p.url("/stats.json"), &lead).await.ok();
        let expected = json!({
            "phases": [{
                "phase": "titles", "total": 10, "assigned": 10, "decided": 10,
                "included": included, "excluded": excluded, "pending": 0, "conflicts": 1,
                "per_criterion": per_criterion,
            }],
            "distributions": dist,
        });
        assert_eq!(j, expected);
        "10 papers, 20 assignments, 1 conflict settled by majority, 4 classified; exports match the recount".to_string()
    })
}
