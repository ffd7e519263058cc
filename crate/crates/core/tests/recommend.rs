use std::io::Write;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use rekom_core::features::{derive_features, DeriveConfig, HopDistance};
use rekom_core::fixtures::{graph_from_edges, two_triangles};
use rekom_core::gnn::EmbeddingMatrix;
use rekom_core::linalg::Matrix;
use rekom_core::recommend::{
    build_recommendations, stratified_sample, Annotation, AnnotationStore, RecommendationRow,
    SampleSpec, Workbench,
};
use rekom_core::{AssetTypes, Error, LineageGraph};

/// A deterministic embedding with distinct rows, in graph order.
fn embedding_for(g: &LineageGraph) -> EmbeddingMatrix {
    let n = g.node_count();
    let data = (0..n * 3).map(|k| ((k as f64) * 0.731).sin()).collect();
    EmbeddingMatrix::new(Matrix::from_vec(n, 3, data), g.nodes().iter().map(|n| n.id.clone()).collect())
        .unwrap()
}

fn workbench(g: LineageGraph) -> Workbench {
    let f = derive_features(&g, &DeriveConfig::default()).unwrap();
    let e = embedding_for(&g);
    Workbench::new(g, f, e).unwrap()
}

fn by_destination(rows: &[RecommendationRow], id: &str) -> RecommendationRow {
    rows.iter().find(|r| r.destination == id).unwrap().clone()
}

#[test]
fn two_nodes_give_one_row() {
    let w = workbench(graph_from_edges(&["a", "b"], &[("a", "b")]));
    let rows = w.recommendations("a").unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].destination, "b");
    assert!(rows[0].existing_edge);
    assert_eq!(rows[0].hop_distance, HopDistance::Hops(1));
}

#[test]
fn path_hop_distances() {
    let w = workbench(graph_from_edges(&["a", "b", "c", "d", "z"], &[("a", "b"), ("b", "c"), ("c", "d")]));
    let rows = w.recommendations("a").unwrap();
    assert_eq!(rows.len(), 4);
    let hops: Vec<i64> = ["b", "c", "d", "z"]
        .iter()
        .map(|id| by_destination(&rows, id).hop_distance.to_i64())
        .collect();
    assert_eq!(hops, [1, 2, 3, -1]);
    assert!(by_destination(&rows, "b").existing_edge);
    assert!(!by_destination(&rows, "c").existing_edge);
    let json = serde_json::to_value(by_destination(&rows, "z")).unwrap();
    assert_eq!(json["hop_distance"], -1);
    assert_eq!(json["dest_asset_type"], "table");
}

#[test]
fn rows_join_features_and_rank_by_probability() {
    let g = two_triangles();
    let f = derive_features(&g, &DeriveConfig::default()).unwrap();
    let e = embedding_for(&g);
    let rows = build_recommendations(&g, &f, &e, "a").unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.windows(2).all(|w| w[0].probability >= w[1].probability));
    let src = f.get("a").unwrap();
    for r in &rows {
        let fr = f.get(&r.destination).unwrap();
        assert_eq!(r.dest_degree, fr.degree);
        assert_eq!(r.dest_centrality, fr.centrality);
        assert_eq!(r.same_community, fr.community == src.community);
        assert!((0.0..=1.0).contains(&r.probability));
        let expected = rekom_core::gnn::score_pair(&e, "a", &r.destination).unwrap();
        assert_eq!(r.probability, expected.probability);
        assert_eq!(r.existing_edge, g.neighbors("a").unwrap().contains(&r.destination.as_str()));
    }
    assert!(build_recommendations(&g, &f, &e, "nope").unwrap_err().is_not_found());
}

#[test]
fn inconsistent_artifacts_name_the_ids() {
    let g = two_triangles();
    let f = derive_features(&g, &DeriveConfig::default()).unwrap();
    let other = graph_from_edges(&["a", "b", "c", "d", "e", "x"], &[("a", "b")]);
    let e = embedding_for(&other);
    let err = Workbench::new(g.clone(), f.clone(), e).unwrap_err();
    assert!(matches!(err, Error::Inconsistent(_)));
    assert!(err.to_string().contains('f'), "{err}");

    let smaller = graph_from_edges(&["a", "b", "c", "d", "e"], &[("a", "b"), ("c", "d")]);
    let partial = derive_features(&smaller, &DeriveConfig::default()).unwrap();
    let err = Workbench::new(g.clone(), partial, embedding_for(&g)).unwrap_err();
    assert!(err.to_string().contains("without features: f"), "{err}");
}

fn synthetic_rows(probabilities: &[f64]) -> Vec<RecommendationRow> {
    let table = AssetTypes::default().get("table").unwrap().clone();
    probabilities
        .iter()
        .enumerate()
        .map(|(i, &p)| RecommendationRow {
            source: "s".into(),
            destination: format!("d{i:04}"),
            probability: p,
            dest_asset_type: table.clone(),
            dest_degree: 0,
            dest_centrality: 0.0,
            dest_community: 0,
            same_community: false,
            hop_distance: HopDistance::Unreachable,
            existing_edge: false,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn every_non_empty_bin_is_represented(
        probabilities in proptest::collection::vec(0.0f64..=1.0, 0..200),
        bins in 1usize..20,
        per_bin in 1usize..8,
        seed in any::<u64>(),
    ) {
        let rows = synthetic_rows(&probabilities);
        let spec = SampleSpec::new(bins, per_bin, seed).unwrap();
        let out = stratified_sample(&rows, &spec);
        let mut population = vec![0usize; bins];
        for r in &rows {
            population[spec.bin_of(r.probability)] += 1;
        }
        let mut drawn = vec![0usize; bins];
        for r in &out {
            drawn[spec.bin_of(r.probability)] += 1;
        }
        for b in 0..bins {
            prop_assert_eq!(drawn[b], population[b].min(per_bin));
        }
        let mut ids: Vec<&str> = out.iter().map(|r| r.destination.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), out.len(), "drawn without replacement");
        prop_assert!(out.windows(2).all(|w| w[0].probability >= w[1].probability));
        prop_assert_eq!(&out, &stratified_sample(&rows, &spec));
    }
}

#[test]
fn different_seeds_draw_differently() {
    let rows = synthetic_rows(&(0..1000).map(|i| i as f64 / 1000.0).collect::<Vec<_>>());
    let a = stratified_sample(&rows, &SampleSpec::new(10, 5, 1).unwrap());
    let b = stratified_sample(&rows, &SampleSpec::new(10, 5, 2).unwrap());
    assert_eq!(a.len(), 50);
    assert_ne!(a, b);
}

fn annotation(source: &str, destination: &str, stars: u8, note: &str, version: &str) -> Annotation {
    Annotation {
        source: source.into(),
        destination: destination.into(),
        stars,
        note: note.into(),
        model_version: version.into(),
        updated_at: Utc.with_ymd_and_hms(2024, 6, 3, 9, 30, 0).unwrap(),
    }
}

#[test]
fn journal_survives_reopen_and_compacts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("annotations.jsonl");
    {
        let mut store = AnnotationStore::open(&path).unwrap();
        store.annotate(annotation("s", "d", 1, "", "v1")).unwrap();
        store.annotate(annotation("s", "d", 4, "changed my mind", "v1")).unwrap();
        store.annotate(annotation("s", "d", 2, "", "v2")).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 3);
    }
    let store = AnnotationStore::open(&path).unwrap();
    assert_eq!(store.len(), 2);
    assert_eq!(store.get("s", "d", "v1").unwrap().stars, 4);
    assert_eq!(store.get("s", "d", "v1").unwrap().note, "changed my mind");
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
}

#[test]
fn torn_final_line_is_dropped_but_corruption_is_not() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("annotations.jsonl");
    {
        let mut store = AnnotationStore::open(&path).unwrap();
        store.annotate(annotation("s", "d", 3, "", "v1")).unwrap();
    }
    std::fs::OpenOptions::new()
        .append(true)
        .open(&path)
        .unwrap()
        .write_all(b"{\"source\":\"s\",\"dest")
        .unwrap();
    let store = AnnotationStore::open(&path).unwrap();
    assert_eq!(store.len(), 1);
    drop(store);

    std::fs::write(&path, "not json\n{}\n").unwrap();
    let err = AnnotationStore::open(&path).unwrap_err();
    assert!(err.to_string().contains("line 1"), "{err}");
}

#[test]
fn export_import_round_trip_is_byte_identical() {
    let mut store = AnnotationStore::in_memory();
    store.annotate(annotation("wb-2", "tbl-9", 5, "great, \"exact\" match", "v1")).unwrap();
    store.annotate(annotation("wb-1", "tbl-3", 2, "multi\nline", "v1")).unwrap();
    store.annotate(annotation("wb-1", "tbl-1", 4, "", "v1")).unwrap();
    let first = store.export_csv_string().unwrap();
    let body: Vec<&str> = first.split("\r\n").collect();
    assert!(body[1].starts_with("wb-1,tbl-1,"), "sorted by source then destination");
    assert!(first.contains("\"great, \"\"exact\"\" match\""));

    let mut copy = AnnotationStore::in_memory();
    let report = copy.import_csv(first.as_bytes()).unwrap();
    assert_eq!(report.imported, 3);
    assert!(report.rejected.is_empty());
    assert_eq!(copy.list(None), store.list(None));
    assert_eq!(copy.export_csv_string().unwrap(), first);

    // Re-importing into the original store changes nothing.
    assert_eq!(store.import_csv(first.as_bytes()).unwrap().imported, 3);
    assert_eq!(store.export_csv_string().unwrap(), first);
    assert_eq!(store.list(Some("wb-1")).len(), 2);
}
