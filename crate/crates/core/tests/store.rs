mod common;

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::sync::Arc;

use common::*;
use lexigraph_core::embeddings::{Embedder, FixtureEmbedder};
use lexigraph_core::llm::{Capabilities, ResponseElement, ResponseSchema, ValueKind};
use lexigraph_core::matcher::{MatchParams, REVIEW_HEADER};
use lexigraph_core::store::{DelimitedOptions, ImportRow, RunStatus, Store, Triple, ObjectKind, Finalization};
use lexigraph_core::Workbench;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bare_workbench() -> Workbench {
    let cfg = config();
    let embedder = Arc::new(FixtureEmbedder::hashing(cfg.embedder.model_id.clone(), cfg.embedder.dimension));
    let provider = Script::new(Capabilities::plain_text()).provider();
    Workbench::from_parts(Arc::new(Store::in_memory()), embedder, provider, cfg).unwrap()
}

#[test]
fn thousand_row_import_with_duplicates() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rows: Vec<(String, String, usize)> = (0..995)
        .map(|i| (format!("C{:03}", i % 100), format!("synthetic term {i}"), i / 100))
        .collect();
    let dupes: Vec<_> = rows.choose_multiple(&mut rng, 5).cloned().collect();
    rows.extend(dupes);
    rows.shuffle(&mut rng);
    assert_eq!(rows.len(), 1000);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("terms.tsv");
    let mut f = std::fs::File::create(&path).unwrap();
    for (c, s, r) in &rows {
        writeln!(f, "{c}\t{s}\t{r}").unwrap();
    }
    drop(f);

    // Oracle: distinct (code, string) pairs read back from the file.
    let text = std::fs::read_to_string(&path).unwrap();
    let distinct: HashSet<(&str, &str)> = text
        .lines()
        .map(|l| {
            let mut p = l.split('\t');
            (p.next().unwrap(), p.next().unwrap())
        })
        .collect();
    let codes: HashSet<&str> = distinct.iter().map(|(c, _)| *c).collect();

    let wb = bare_workbench();
    let summary = wb.import_file("synthetic", &path, &DelimitedOptions::default()).unwrap();
    assert_eq!(summary.strings, distinct.len());
    assert_eq!(summary.strings, 995);
    assert_eq!(summary.codes, codes.len());
    assert_eq!(summary.duplicates, 5);
    assert_eq!(summary.rejected, 0);
}

#[test]
fn code_set_subset_of_a_larger_terminology() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ids: Vec<String> = (0..50).map(|i| format!("D{i:03}")).chain((0..150).map(|i| format!("M{i:03}"))).collect();
    ids.shuffle(&mut rng);
    let rows: Vec<_> = ids.iter().map(|c| Ok(ImportRow::new(c.as_str(), format!("concept {c}"), 0))).collect();
    let wb = bare_workbench();
    wb.import_terminology("snomed-like", rows).unwrap();
    let cs = wb.create_code_set("snomed-like", "d-codes", "code_id starts_with \"D\"", None).unwrap();
    let oracle: BTreeSet<String> = ids.iter().filter(|c| c.as_bytes()[0] == b'D').cloned().collect();
    assert_eq!(cs.code_set.member_code_ids, oracle);
    assert_eq!(cs.code_set.member_code_ids.len(), 50);
}

#[test]
fn code_summary_is_the_mean_of_its_string_vectors() {
    let names = ["myocardial infarction", "heart attack", "MI", "cardiac infarction", "infarction of heart"];
    let rows: Vec<_> = names.iter().enumerate().map(|(i, s)| Ok(ImportRow::new("I21", *s, i as i64))).collect();
    let wb = bare_workbench();
    let summary = wb.import_terminology("mini", rows).unwrap();
    let term = wb.store().find_terminology("mini").unwrap();
    let got = wb.embeddings().code_summary_vector(&term.id, "I21").unwrap();
    assert_eq!(summary.embedded, 5);

    // Oracle: embed independently and average by hand.
    let cfg = config();
    let independent = FixtureEmbedder::hashing(cfg.embedder.model_id, cfg.embedder.dimension);
    let vectors: Vec<Vec<f64>> = names.iter().map(|s| independent.embed(s).unwrap().cls).collect();
    for (j, g) in got.values.iter().enumerate() {
        let mean = vectors.iter().map(|v| v[j]).sum::<f64>() / 5.0;
        assert!((g - mean).abs() < 1e-12);
    }
}

#[test]
fn second_embed_is_served_from_the_store() {
    let wb = bare_workbench();
    wb.embeddings().embed_string("x").unwrap();
    let calls = wb.embeddings().embedder_calls();
    wb.embeddings().embed_string("x").unwrap();
    assert_eq!(wb.embeddings().embedder_calls(), calls);
}

#[test]
fn materialized_join_matches_a_manual_join() {
    let wb = bare_workbench();
    wb.import_terminology("clinical", clinical_rows()).unwrap();
    let cs = wb.create_code_set("clinical", "cardiac", "code_id in [\"I21\", \"I50\"]", None).unwrap().code_set;
    let all = wb.create_code_set("clinical", "all", "all", None).unwrap().code_set;
    let run = wb.store().create_run(&all.id, vec!["p".into()]).unwrap();
    wb.store().set_run_status(&run.id, RunStatus::Running, None).unwrap();
    let triple = |s: &str, o: &str| Triple {
        subject_code_id: s.into(),
        predicate: "p".into(),
        object_value: o.into(),
        object_kind: ObjectKind::FreeText,
        run_id: run.id.clone(),
        finalization: Finalization::Single,
        replaced_parent: None,
    };
    let triples = vec![
        triple("I21", "chest pain"),
        triple("I21", "arrhythmia"),
        triple("I50", "edema"),
        triple("J18", "cough"),
        triple("N39", "dysuria"),
    ];
    assert_eq!(wb.store().insert_triples(&run.id, triples.clone()).unwrap(), 5);
    let q = format!(
        "SELECT t.subject_code_id, t.object_value FROM triples t JOIN code_set_members m \
         ON t.subject_code_id = m.code_id WHERE m.code_set_id = '{}'",
        cs.id
    );
    let table = wb.materialize(&"cardiac_objects", &q).unwrap();
    let oracle = triples.iter().filter(|t| cs.member_code_ids.contains(&t.subject_code_id)).count();
    assert_eq!(table.rows.len(), oracle);
}

#[test]
fn batch_matching_dedups_reuses_and_truncates() {
    let wb = bare_workbench();
    wb.import_terminology("clinical", clinical_rows()).unwrap();
    wb.create_code_set("clinical", "all", "all", None).unwrap();
    let mut objects = vec!["heart failure".to_string(), "broken finger".to_string()];
    objects.extend(std::iter::repeat("chest pain".to_string()).take(5));
    let out = wb.match_objects(&objects, "all", &MatchParams::default()).unwrap();
    assert_eq!(out.results.len(), 3);
    assert_eq!(out.computed, 3);

    let before = wb.matcher().distance_computations();
    let again = wb.match_objects(&objects, "all", &MatchParams::default()).unwrap();
    assert_eq!(again.reused, 3);
    assert_eq!(wb.matcher().distance_computations(), before);

    let two = MatchParams {
        n: 2,
        ..Default::default()
    };
    let out = wb.match_objects(&objects, "all", &two).unwrap();
    assert!(out.results.iter().all(|r| r.ranked.len() <= 2));
    let hf = out.results.iter().find(|r| r.object_text == "heart failure").unwrap();
    assert_eq!(hf.best.as_deref(), Some("I50"));
    assert!(hf.ranked[0].distance < 1e-12);

    let tsv = wb.review_export("all").unwrap();
    let mut lines = tsv.lines();
    assert_eq!(lines.next().unwrap(), REVIEW_HEADER.join("\t"));
    assert!(lines.any(|l| l.starts_with("heart failure\t1\tI50\tcongestive heart failure\t")));
}

#[test]
fn tight_threshold_leaves_no_best_code() {
    let wb = bare_workbench();
    wb.import_terminology("clinical", clinical_rows()).unwrap();
    wb.create_code_set("clinical", "all", "all", None).unwrap();
    let tight = MatchParams {
        z: 1e-6,
        ..Default::default()
    };
    let r = wb.match_one("completely unrelated words", "all", &tight).unwrap();
    assert!(r.best.is_none());
    assert!(r.ranked.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z: f64 = rng.gen_range(0.2..1.0);
    let r = wb.match_one("heart attack", "all", &MatchParams { z, ..Default::default() }).unwrap();
    assert!(r.ranked.iter().all(|c| c.distance < z));
}

#[test]
fn snapshot_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config();
    cfg.store_path = Some(dir.path().join("store.json"));
    let s = spec(
        "has_complication_of",
        "What are the complications of <<<concept>>>?",
        ResponseSchema::new(vec![ResponseElement::new("complications", ValueKind::FreeText).multi()]).unwrap(),
    );
    let mut script = Script::new(Capabilities::plain_text());
    script.on_concept(&s, "myocardial infarction", "complications: heart failure|cardiogenic shock");
    let wb = Workbench::from_parts(
        Arc::new(Store::open(cfg.store_path.as_deref().unwrap()).unwrap()),
        Arc::new(FixtureEmbedder::hashing(cfg.embedder.model_id.clone(), cfg.embedder.dimension)),
        script.provider(),
        cfg.clone(),
    )
    .unwrap();
    wb.import_terminology("clinical", clinical_rows()).unwrap();
    wb.create_code_set("clinical", "all", "all", None).unwrap();
    wb.create_code_set("clinical", "mi", "code_id = \"I21\"", None).unwrap();
    let report = wb.run_specs("mi", &[s], unlimited()).unwrap();
    assert_eq!(report.triples_written, 2);
    wb.match_one("heart failure", "all", &MatchParams::default()).unwrap();
    wb.persist().unwrap();
    let hash = wb.export_hash();
    drop(wb);
    let reopened = Workbench::open(cfg).unwrap();
    assert_eq!(reopened.export_hash(), hash);
}
