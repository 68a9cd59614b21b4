use std::fs::File;
use std::io::BufReader;

use sentqual_core::corpus::{extract_positive_sentences, ExtractOptions, ExtractStats};
use sentqual_core::dump::parse_dump;
use sentqual_core::revision::sha1_hex;
use sentqual_core::{diff_pair, label_edit, Category, Mode, Store};

const ORIGINAL: &str = "While the exact cause is unknown, it is believed to involve a combination of genetic and environmental factors.";

fn fixture() -> BufReader<File> {
    BufReader::new(File::open(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/tourette.xml")).unwrap())
}

#[test]
fn dump_fields_read_back() {
    let mut reader = parse_dump(fixture());
    let revs: Vec<_> = reader.by_ref().collect::<Result<_, _>>().unwrap();
    assert_eq!(revs.len(), 2);
    assert_eq!(revs[0].rev_id, 1001);
    assert_eq!(revs[1].parent_id, Some(1001));
    assert_eq!(revs[0].page_id, 30712);
    assert_eq!(revs[0].page_title, "Tourette syndrome");
    assert_eq!(revs[1].comment, "clarify subject");
    assert_eq!(revs[0].timestamp.to_rfc3339(), "2019-04-02T10:00:00+00:00");
    for r in &revs {
        assert_eq!(r.sha1, sha1_hex(&r.text));
    }
}

#[test]
fn dump_to_store_to_positive() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    for rev in parse_dump(fixture()) {
        store.put(&rev.unwrap()).unwrap();
    }
    let history = store.scan(30712).unwrap();
    assert_eq!(history.len(), 2);

    let verdict = label_edit(&diff_pair(&history[0], &history[1]), Mode::Default);
    assert!(verdict.has(Category::Clarification));
    assert_eq!(verdict.diff_ref.new_rev_id, 1002);

    let mut stats = ExtractStats::default();
    let positives = extract_positive_sentences(&history, &ExtractOptions::default(), &mut stats).unwrap();
    assert_eq!(positives.len(), 1);
    assert_eq!(positives[0].text, ORIGINAL);
    assert_eq!(positives[0].section_title, "Causes");
    assert_eq!(positives[0].word_len, ORIGINAL.split_whitespace().count());
}
