//! Deterministic inputs for the benchmarks in `benches/`.

use std::fmt::Write;
use std::path::PathBuf;

pub fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/toy")
}

/// N-Triples text for a synthetic graph of `people` people: each has a
/// label, a birth place among 50 cities, and a few acquaintances.
pub fn synthetic_ntriples(people: usize) -> String {
    let mut out = String::new();
    let r = "http://bench.example/resource/";
    let o = "http://bench.example/ontology/";
    let label = "http://www.w3.org/2000/01/rdf-schema#label";
    for c in 0..50 {
        let _ = writeln!(out, "<{r}City_{c}> <{label}> \"City {c}\"@en .");
        let _ = writeln!(out, "<{r}City_{c}> <{o}country> <{r}Country_{}> .", c % 7);
    }
    for p in 0..people {
        let _ = writeln!(out, "<{r}Person_{p}> <{label}> \"Person {p} of City {}\"@en .", p % 50);
        let _ = writeln!(out, "<{r}Person_{p}> <{o}birthPlace> <{r}City_{}> .", p % 50);
        for k in 1..=3 {
            let _ = writeln!(out, "<{r}Person_{p}> <{o}knows> <{r}Person_{}> .", (p * 31 + k * 17) % people);
        }
    }
    out
}
