use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relis_core::engine::{
    auto_assign, balanced_assignment, import_papers, resolve, sample_validation, submit_decision, AssignmentKind,
    DecisionInput, ImportFormat, Outcome, Resolution, Verdict, Workflow,
};
use relis_core::installer::install_new;
use relis_core::store::Store;
use relis_core::{ProjectId, UserId};
use relis_dsl::ConflictStrategy;

use crate::common::corpus;

fn source(name: &str, k: u32, percent: u32) -> String {
    format!(
        r#"
project {name} "Validation"
roles {{
  reviewer reviewer
  lead senior
  owner admin
}}
screening {{
  phases {{ titles metadata }}
  assign automatic {k}
  conflict majority
  validation {percent}% of excluded by lead
  exclusion {{ "Off topic" }}
}}
classification {{
  simple name "Name": text(100)
}}
"#
    )
}

fn exclude() -> DecisionInput {
    DecisionInput {
        verdict: Some(Verdict::Exclude),
        criterion: Some("Off topic".into()),
        note: None,
    }
}

/// Installs a project, enrolls the given members, imports `n` papers and
/// has every screener exclude every paper.
#[allow(clippy::too_many_arguments)]
fn excluded_project(
    store: &Store,
    owner: UserId,
    name: &str,
    k: u32,
    percent: u32,
    members: &[(UserId, &str)],
    n: usize,
    seed: u64,
) -> ProjectId {
    let p = install_new(store, owner, &source(name, k, percent)).unwrap().project;
    for (u, role) in members {
        store.add_member(p, Some(owner), *u, role).unwrap();
    }
    import_papers(store, p, owner, &corpus(n), ImportFormat::Csv).unwrap();
    for a in auto_assign(store, p, "titles", seed, owner).unwrap() {
        submit_decision(store, a.id, a.data.reviewer, exclude()).unwrap();
    }
    p
}

fn ceil_percent(p: u32, n: usize) -> usize {
    (p as usize * n).div_ceil(100)
}

pub fn validation_sample() -> String {
    let store = Store::in_memory();
    let user = |login: &str| store.create_user(login, login, "secret", false).unwrap();
    let owner = user("owner");
    let reviewers: Vec<UserId> = (0..3).map(|i| user(&format!("rev{i}"))).collect();
    let lead = user("lead");

    // The first reviewer also holds the validating role, so validators and
    // screeners overlap.
    let mut members: Vec<(UserId, &str)> = reviewers.iter().map(|&r| (r, "reviewer")).collect();
    members.push((lead, "lead"));
    members.push((reviewers[0], "lead"));
    let validators = BTreeSet::from([lead, reviewers[0]]);
    let mut overlap = 0;
    for seed in 0..20 {
        let p = excluded_project(&store, owner, &format!("ten{seed}"), 2, 20, &members, 10, seed);
        let sample = sample_validation(&store, p, "titles", seed, lead).unwrap();
        assert_eq!(sample.len(), 2, "seed {seed}");
        let snap = store.snapshot(p).unwrap();
        let w = Workflow::new(&snap).unwrap();
        for a in &sample {
            let screeners = w.screeners(a.data.paper, &a.data.phase);
            assert_eq!(a.data.kind, AssignmentKind::Validation);
            assert!(validators.contains(&a.data.reviewer));
            assert!(!screeners.contains(&a.data.reviewer), "seed {seed}: validator screened the paper");
            assert_eq!(w.outcome(a.data.paper, &a.data.phase), Outcome::Exclude);
            overlap += usize::from(screeners.contains(&reviewers[0]));
        }
    }

    let rev = reviewers[1];
    let members = [(rev, "reviewer"), (lead, "lead")];
    let mut runs = 0;
    for percent in [5, 10, 20, 25, 33, 50, 100] {
        for n in 1..=100 {
            let p = excluded_project(&store, owner, &format!("grid_{percent}_{n}"), 1, percent, &members, n, n as u64);
            let got = sample_validation(&store, p, "titles", 7, lead).unwrap().len();
            assert_eq!(got, ceil_percent(percent, n), "{percent}% of {n}");
            runs += 1;
        }
    }
    format!(
        "10 excluded at 20% gives 2 validators outside the screeners over 20 seeds ({overlap} with the dual-role reviewer screening); {runs} grid points match ceil(p*N/100)"
    )
}

/// Smallest spread of final loads any assignment of `papers` papers to `k`
/// distinct reviewers can reach from `start`.
fn min_spread(start: &[usize], papers: usize, k: usize) -> usize {
    let n = start.len();
    let choices: Vec<Vec<usize>> = (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect();
    let mut sorted = start.to_vec();
    sorted.sort();
    let mut states = BTreeSet::from([sorted]);
    for _ in 0..papers {
        let mut next = BTreeSet::new();
        for s in &states {
            for c in &choices {
                let mut v = s.clone();
                for &i in c {
                    v[i] += 1;
                }
                v.sort();
                next.insert(v);
            }
        }
        states = next;
    }
    states.iter().map(|v| v[v.len() - 1] - v[0]).min().unwrap()
}

fn spread(l: &[usize]) -> usize {
    l.iter().max().unwrap() - l.iter().min().unwrap()
}

/// Runs the assignment from `start` and checks coverage, distinctness and
/// determinism. Returns the final loads.
fn checked_run(papers: usize, start: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut loads = start.to_vec();
    let picks = balanced_assignment(papers, &mut loads, k, &mut ChaCha8Rng::seed_from_u64(seed));
    assert_eq!(picks.len(), papers, "every paper is covered");
    let mut recount = start.to_vec();
    for p in &picks {
        let distinct: BTreeSet<usize> = p.iter().copied().collect();
        assert_eq!(distinct.len(), k, "{k} distinct reviewers per paper, got {p:?}");
        for &i in p {
            recount[i] += 1;
        }
    }
    assert_eq!(recount, loads, "reported loads match the picks");
    let mut again = start.to_vec();
    let same = balanced_assignment(papers, &mut again, k, &mut ChaCha8Rng::seed_from_u64(seed));
    assert_eq!(same, picks, "same seed, same assignment");
    loads
}

pub fn assignment() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0006);
    let mut brute = 0;
    for i in 0..500 {
        let papers = rng.random_range(0..=50);
        let n = rng.random_range(1..=7);
        let k = rng.random_range(1..=n);
        let seed = rng.random();
        let loads = checked_run(papers, &vec![0; n], k, seed);
        assert!(spread(&loads) <= 1, "instance {i}: loads {loads:?}");
        if papers <= 8 {
            assert_eq!(spread(&loads), min_spread(&vec![0; n], papers, k), "instance {i}");
            // Uneven prior loads: the oracle decides what is reachable.
            let start: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let loads = checked_run(papers, &start, k, seed);
            assert_eq!(spread(&loads), min_spread(&start, papers, k), "instance {i} from {start:?}");
            brute += 1;
        }
    }
    format!("500 instances covered, distinct, balanced and reproducible; {brute} small ones match exhaustive search")
}

/// Settles `votes` by looking at them directly: agreement needs no
/// settling, a strict majority settles under the majority strategy, and
/// anything else goes to a person.
fn oracle(strategy: ConflictStrategy, votes: &[Verdict]) -> Resolution {
    let includes = votes.iter().filter(|&&v| v == Verdict::Include).count();
    let excludes = votes.iter().filter(|&&v| v == Verdict::Exclude).count();
    if includes == votes.len() || excludes == votes.len() {
        Resolution::Agreed
    } else if strategy == ConflictStrategy::Majority && 2 * includes > votes.len() {
        Resolution::Decided(Verdict::Include)
    } else if strategy == ConflictStrategy::Majority && 2 * excludes > votes.len() {
        Resolution::Decided(Verdict::Exclude)
    } else {
        Resolution::Escalate
    }
}

pub fn conflict_oracle() -> String {
    let mut checked = 0;
    let mut longest = 0;
    for len in 0..=4 {
        for bits in 0..1u32 << len {
            let votes: Vec<Verdict> = (0..len)
                .map(|i| if bits & (1 << i) != 0 { Verdict::Exclude } else { Verdict::Include })
                .collect();
            for s in ConflictStrategy::ALL {
                assert_eq!(resolve(s, &votes), oracle(s, &votes), "{s:?} {votes:?}");
                checked += 1;
                longest += usize::from(len == 4);
            }
        }
    }
    assert_eq!((checked, longest), (93, 48));
    format!("{checked} vote vectors x strategies match, {longest} of them with four votes")
}
