//! Acceptance criteria. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any fails.

#[path = "../common/mod.rs"]
mod common;

mod api;
mod classify;
mod dsl;
mod install;
mod screening;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

struct Criterion {
    id: u32,
    name: &'static str,
    run: fn() -> String,
    budget: Option<Duration>,
}

const fn criterion(id: u32, name: &'static str, run: fn() -> String, budget_secs: Option<u64>) -> Criterion {
    let budget = match budget_secs {
        Some(s) => Some(Duration::from_secs(s)),
        None => None,
    };
    Criterion { id, name, run, budget }
}

const CRITERIA: &[Criterion] = &[
    criterion(1, "configuration language round trip", dsl::round_trip, Some(10)),
    criterion(2, "data preservation across re-installs", install::preservation, None),
    criterion(3, "install coherence and idempotence", install::coherence, None),
    criterion(4, "text(100) boundary", classify::hundred_characters, None),
    criterion(5, "validation sample size", screening::validation_sample, None),
    criterion(6, "assignment properties", screening::assignment, Some(30)),
    criterion(7, "conflict resolution oracle", screening::conflict_oracle, None),
    criterion(8, "classification validator equivalence", classify::validator_equivalence, None),
    criterion(9, "concurrency", api::concurrency, None),
    criterion(10, "end-to-end API", api::end_to_end, Some(5)),
];

fn message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panicked".into()
    }
}

fn main() -> ExitCode {
    // Failures are reported on the criterion line; the hook would repeat them.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in CRITERIA {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run));
        let took = start.elapsed();
        let verdict = match outcome {
            Ok(summary) => match c.budget {
                Some(b) if took > b => Err(format!("took {took:.2?}, budget {b:?}; {summary}")),
                _ => Ok(summary),
            },
            Err(payload) => Err(message(&*payload)),
        };
        match verdict {
            Ok(summary) => println!("PASS {:>2} {} ({took:.2?}): {summary}", c.id, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {} ({took:.2?}): {why}", c.id, c.name);
            }
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
