//! Runs every acceptance criterion, prints one PASS/FAIL line each, and fails
//! if any criterion fails.

mod common;

use common::criteria::{self, Outcome};

#[test]
fn acceptance() {
    let checks: [(&str, fn() -> Outcome); 8] = [
        ("1 enumeration oracle", criteria::enumeration_oracle),
        ("2 capacity oracle", criteria::capacity_oracle),
        ("3 depth bound", criteria::theorem1_bound),
        ("4 local vs global alpha", criteria::theorem3_ordering),
        ("5 gradient check", criteria::gradient_check),
        ("6 capacity decay", criteria::capacity_decay),
        ("7 ablation direction", criteria::ablation_direction),
        ("8 property suite", criteria::properties),
    ];
    let mut failed = Vec::new();
    for (name, check) in checks {
        match check() {
            Ok(msg) => println!("PASS  {name}: {msg}"),
            Err(msg) => {
                println!("FAIL  {name}: {msg}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
