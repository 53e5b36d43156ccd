use std::path::PathBuf;

use rfa_core::data::{align, load_long_csv, load_outcome_csv, load_wide_csv, prune_by_coverage, GroupLabel};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

#[test]
fn three_county_long_file_pivots_by_hand() {
    let t = load_long_csv(fixture("three_counties_long.csv"), GroupLabel::Ngrams).unwrap();
    // Ids in order of first appearance, features sorted.
    assert_eq!(t.instance_ids(), ["01003", "01001", "01005"]);
    assert_eq!(t.feature_names(), ["flu", "run", "the"]);
    let expected = [[0.002, 0.0, 0.049], [0.004, 0.001, 0.051], [0.0, 0.003, 0.047]];
    for (i, row) in expected.iter().enumerate() {
        assert_eq!(t.values().row(i), row.to_vec(), "row {i}");
    }
}

#[test]
fn three_county_wide_file_reads_as_written() {
    let t = load_wide_csv(fixture("three_counties_wide.csv"), GroupLabel::Factors).unwrap();
    assert_eq!(t.instance_ids(), ["01001", "01003", "01005"]);
    assert_eq!(t.feature_names(), ["median_age", "pct_bachelors"]);
    assert_eq!(t.values().row(0), vec![38.2, 27.5]);
    assert_eq!(t.values().row(1), vec![43.1, 31.9]);
    assert_eq!(t.values().row(2), vec![40.0, 12.8]);
}

#[test]
fn align_fixture_keeps_seven_of_ten() {
    let ngrams = load_long_csv(fixture("align/ngrams.csv"), GroupLabel::Ngrams).unwrap();
    let factors = load_wide_csv(fixture("align/factors.csv"), GroupLabel::Factors).unwrap();
    let outcome = load_outcome_csv(fixture("align/outcome.csv"), None).unwrap();
    let (data, drops) = align(&[ngrams, factors], &outcome).unwrap();

    assert_eq!(data.n_instances(), 7);
    assert_eq!(drops.kept, 7);
    assert_eq!(drops.counts(), vec![3, 3, 0]);
    assert_eq!(data.instance_ids(), ["c02", "c03", "c05", "c06", "c08", "c09", "c10"]);
    // Each source row follows its id: flu = id/10, age = 30 + id, rate = id.
    for (i, id) in data.instance_ids().iter().enumerate() {
        let k: f64 = id[1..].parse().unwrap();
        assert!((data.language()[0].values().get(i, 0) - k / 10.0).abs() < 1e-12);
        assert_eq!(data.factors().values().get(i, 0), 30.0 + k);
        assert_eq!(data.outcome().values()[i], k);
    }
}

#[test]
fn coverage_fixture_matches_hand_tally() {
    let t = load_wide_csv(fixture("coverage20.csv"), GroupLabel::Ngrams).unwrap();
    assert_eq!((t.n_instances(), t.n_features()), (10, 20));
    // Non-zero counts per column, tallied from the file:
    // f01 10, f02 9, f03 8, f04 7, f05 6, f06 5, f07 5, f08 4, f09 3, f10 2,
    // f11 1, f12 0, f13 10, f14 5, f15 6, f16 4, f17 7, f18 3, f19 9, f20 2.
    let kept = prune_by_coverage(&t, 0.5).unwrap();
    assert_eq!(
        kept.feature_names(),
        ["f01", "f02", "f03", "f04", "f05", "f06", "f07", "f13", "f14", "f15", "f17", "f19"]
    );
    let strict = prune_by_coverage(&t, 0.95).unwrap();
    assert_eq!(strict.feature_names(), ["f01", "f13"]);
    assert_eq!(prune_by_coverage(&t, 0.0).unwrap(), t);
}
