use std::collections::BTreeSet;

use serde::Deserialize;
use sentqual_core::{diff_revisions, label_edit, Category, Mode};

#[derive(Deserialize)]
struct Expect {
    labels: BTreeSet<Category>,
    positives: usize,
}

#[derive(Deserialize)]
struct Fixture {
    name: String,
    old: String,
    new: String,
    comment: String,
    default: Expect,
    strict: Option<Expect>,
}

#[test]
fn golden_truth_table() {
    let raw = include_str!("data/rule_golden.json");
    let fixtures: Vec<Fixture> = serde_json::from_str(raw).unwrap();
    assert!(fixtures.len() >= 30);
    let mut failures = Vec::new();
    for f in &fixtures {
        let diff = diff_revisions(&f.old, &f.new, &f.comment);
        for (mode, expect) in [(Mode::Default, &f.default), (Mode::Strict, f.strict.as_ref().unwrap_or(&f.default))] {
            let v = label_edit(&diff, mode);
            if v.labels != expect.labels || v.positive_sentences.len() != expect.positives {
                failures.push(format!(
                    "{} [{mode:?}]: got {:?} with {} positives",
                    f.name,
                    v.labels,
                    v.positive_sentences.len()
                ));
            }
            assert_eq!(label_edit(&diff, mode), v, "{} is not deterministic", f.name);
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}
