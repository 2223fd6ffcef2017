//! Fixture access and brute-force oracles shared by the integration tests.
//! The oracles are written independently of the library code they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rpys_core::ingest::{parse_export, CitingRecord, ImportConfig};
use rpys_core::store::Workspace;

// Spelled through `../core` so crates that include this module by path
// resolve the same directory.
pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn load(name: &str, cfg: &ImportConfig) -> Workspace {
    let (records, _) = parse_export(&read_fixture(name), cfg).unwrap();
    Workspace::aggregate(records, cfg.clone())
}

pub fn counts() -> serde_json::Value {
    serde_json::from_str(&read_fixture("synthetic_corpus.counts.json")).unwrap()
}

/// Full-table edit distance over chars.
pub fn dp_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = (d[i - 1][j] + 1)
                .min(d[i][j - 1] + 1)
                .min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

pub fn dp_similarity(a: &str, b: &str) -> f64 {
    let m = a.chars().count().max(b.chars().count());
    if m == 0 {
        1.0
    } else {
        1.0 - dp_levenshtein(a, b) as f64 / m as f64
    }
}

/// Median of the clipped five-value window by sorting a fresh copy.
pub fn brute_median_dev(series: &[usize]) -> Vec<f64> {
    (0..series.len())
        .map(|i| {
            let mut w: Vec<f64> = Vec::new();
            for k in -2i64..=2 {
                let j = i as i64 + k;
                if j >= 0 && (j as usize) < series.len() {
                    w.push(series[j as usize] as f64);
                }
            }
            w.sort_by(f64::total_cmp);
            let m = if w.len() % 2 == 1 {
                w[w.len() / 2]
            } else {
                (w[w.len() / 2 - 1] + w[w.len() / 2]) / 2.0
            };
            series[i] as f64 - m
        })
        .collect()
}

/// Records citing each raw string, straight from the record list.
pub fn citing_sets(records: &[CitingRecord]) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in records {
        for cr in &r.raw_cr_lines {
            out.entry(cr.clone())
                .or_default()
                .insert(r.record_id.0.clone());
        }
    }
    out
}

pub fn record(id: &str, crs: &[&str]) -> CitingRecord {
    CitingRecord {
        record_id: id.into(),
        py: Some(2000),
        source_title: "TEST".into(),
        raw_cr_lines: crs.iter().map(|s| s.to_string()).collect(),
        extra_fields: Vec::new(),
    }
}
