use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relis_dsl::testkit::{mutate_invalid, random_model};
use relis_dsl::{check, parse_str, pretty_print};

pub fn round_trip() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0001);
    for i in 0..200 {
        let m = random_model(&mut rng);
        let printed = pretty_print(&m);
        if let Err(d) = check(&printed) {
            panic!("generated model {i} is invalid: {d:?}\n{printed}");
        }
        let back = parse_str(&printed).unwrap_or_else(|d| panic!("model {i} does not reparse: {d:?}"));
        assert!(back == m, "model {i} changed on round trip:\n{printed}");
    }
    let mut codes = BTreeSet::new();
    for i in 0..200 {
        let (bad, code) = mutate_invalid(random_model(&mut rng), &mut rng);
        let printed = pretty_print(&bad);
        let diags = match check(&printed) {
            Ok(_) => panic!("mutant {i} accepted, expected {code}:\n{printed}"),
            Err(d) => d,
        };
        assert!(
            diags.iter().any(|d| d.code == code),
            "mutant {i}: expected {code}, got {diags:?}"
        );
        codes.insert(code.to_string());
    }
    format!("200 models reparse equal, 200 mutants rejected with the expected code ({} distinct codes)", codes.len())
}
