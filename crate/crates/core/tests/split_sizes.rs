use std::collections::BTreeSet;
use std::path::PathBuf;

use muscap_core::dataset::Genre;
use serde::Deserialize;

#[derive(Deserialize)]
struct Row {
    genre: String,
    train: usize,
    test: usize,
    test_all_2s: usize,
}

#[test]
fn split_size_fixture_covers_every_genre() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/split_sizes.json");
    let rows: Vec<Row> = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let genres: BTreeSet<Genre> = rows.iter().map(|r| r.genre.parse().unwrap()).collect();
    assert_eq!(genres.len(), rows.len());
    assert_eq!(genres, Genre::ALL.into_iter().collect());
    for r in &rows {
        assert_eq!(r.test, 80, "{}", r.genre);
        assert!(r.test_all_2s <= r.test);
        assert!(r.train > r.test);
    }
    assert_eq!(rows.iter().map(|r| r.test).sum::<usize>(), 1200);
}
