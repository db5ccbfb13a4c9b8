//! End-to-end pipeline tests: experiment determinism, report consistency,
//! snapshot round-trips for every model variant, and property-based checks
//! of the core invariants.

use std::collections::BTreeSet;
use std::fs;

use proptest::prelude::*;

use proplearn::count::{train_count_model, CountMode, CountPriors};
use proplearn::data::{OccurrenceTable, PropertyNorms};
use proplearn::eval::{average_precision, cross_validate, eval_multishot};
use proplearn::experiment::{
    run_experiment, train_model, ExperimentConfig, ModelKind, TrainSettings,
};
use proplearn::ingest::write_norms;
use proplearn::ingest::write_pairs;
use proplearn::seeded_rng;
use proplearn::snapshot::{load_model, save_model};
use proplearn::synth::{generate, SynthSpec};

fn small_synth() -> proplearn::synth::SynthData {
    generate(&SynthSpec {
        topics: 3,
        concepts: 12,
        items: 12,
        properties: 8,
        tokens_per_concept: 40,
        seed: 7,
        ..SynthSpec::default()
    })
    .unwrap()
}

fn small_settings() -> TrainSettings {
    TrainSettings {
        topics: 3,
        burn_in: 30,
        post_samples: 3,
        k: 3,
        n_samples: 20,
        ..Default::default()
    }
}

fn write_dataset(dir: &std::path::Path, data: &proplearn::synth::SynthData) {
    write_norms(&data.inventory, &data.norms, dir.join("norms.tsv")).unwrap();
    write_pairs(&data.table, dir.join("pairs.tsv")).unwrap();
}

fn base_config(dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelKind::Baseline,
        folds: 2,
        runs: 1,
        seed: 11,
        train: small_settings(),
        min_prop_concepts: 1,
        min_ctx_freq: 1,
        norms_path: dir.join("norms.tsv"),
        pairs_path: Some(dir.join("pairs.tsv")),
        out_dir: dir.join("out"),
        ..Default::default()
    }
}

#[test]
fn experiment_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth();
    write_dataset(dir.path(), &data);

    let mut cfg = base_config(dir.path());
    cfg.model = ModelKind::CountMult;
    cfg.runs = 2;

    let report_a = run_experiment(&cfg).unwrap();
    let files = ["results.csv", "summary.txt", "report.json", "oneshot_records.csv"];
    let first: Vec<String> = files
        .iter()
        .map(|f| fs::read_to_string(cfg.out_dir.join(f)).unwrap())
        .collect();

    let report_b = run_experiment(&cfg).unwrap();
    assert_eq!(report_a, report_b);
    for (f, before) in files.iter().zip(&first) {
        let after = fs::read_to_string(cfg.out_dir.join(f)).unwrap();
        assert_eq!(&after, before, "{f} changed between identical runs");
    }
}

#[test]
fn experiment_matches_manual_pipeline() {
    // runs=1, folds=2, baseline: the report row must equal a by-hand
    // invocation of the same split, training and evaluation steps.
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth();
    write_dataset(dir.path(), &data);
    let cfg = base_config(dir.path());
    let report = run_experiment(&cfg).unwrap();

    let concepts: Vec<String> = data.norms.iter().map(|n| n.concept().to_string()).collect();
    let folds = cross_validate(&concepts, cfg.folds, cfg.seed).unwrap();
    for row in &report.rows {
        let fold = &folds[row.fold];
        let train_set: BTreeSet<String> = fold.train.iter().cloned().collect();
        let train_norms: Vec<PropertyNorms> = data
            .norms
            .iter()
            .filter(|n| train_set.contains(n.concept()))
            .cloned()
            .collect();
        let test_norms: Vec<PropertyNorms> = data
            .norms
            .iter()
            .filter(|n| !train_set.contains(n.concept()))
            .cloned()
            .collect();
        let model = proplearn::count::BaselineModel::fit(&train_norms).unwrap();
        let mut rng = seeded_rng(row.seed);
        let eval = eval_multishot(&model, &test_norms, &data.table, false, &mut rng).unwrap();
        assert_eq!(row.multishot_map, Some(eval.map));
        assert_eq!(row.multishot_gap, Some(eval.gap));
    }
}

#[test]
fn report_aggregates_equal_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth();
    write_dataset(dir.path(), &data);
    let mut cfg = base_config(dir.path());
    cfg.runs = 3;
    let report = run_experiment(&cfg).unwrap();

    let maps: Vec<f64> = report.rows.iter().filter_map(|r| r.multishot_map).collect();
    let mean = maps.iter().sum::<f64>() / maps.len() as f64;
    assert_eq!(report.multishot_map.as_ref().unwrap().mean, mean);
    let var = maps.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (maps.len() - 1) as f64;
    assert_eq!(report.multishot_map.as_ref().unwrap().std_dev, var.sqrt());
}

#[test]
fn unknown_model_fails_before_any_computation() {
    let mut cfg = ExperimentConfig::default();
    let err = cfg.apply("model", "count-quadratic").unwrap_err();
    assert!(matches!(err, proplearn::Error::Config(_)));
}

#[test]
fn missing_pairs_file_is_rejected_at_validation() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth();
    write_dataset(dir.path(), &data);
    let mut cfg = base_config(dir.path());
    cfg.pairs_path = Some(dir.path().join("does_not_exist.tsv"));
    assert!(matches!(
        run_experiment(&cfg),
        Err(proplearn::Error::Config(_))
    ));
}

#[test]
fn snapshots_round_trip_for_every_model_kind() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth();
    let settings = small_settings();
    let items: Vec<(&str, u64)> = data
        .table
        .contexts_of(data.norms[0].concept())
        .collect();

    for kind in ModelKind::ALL {
        let mut rng = seeded_rng(33);
        let model = train_model(
            kind,
            &data.table,
            &data.inventory,
            &data.norms,
            &settings,
            &mut rng,
        )
        .unwrap();
        let path = dir.path().join(format!("{}.json", kind.as_str()));
        let trained: Vec<String> = data.norms.iter().map(|n| n.concept().to_string()).collect();
        save_model(&path, &data.inventory, &trained, &model).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.model, model, "{} snapshot differs", kind.as_str());

        // Bitwise-identical predictions through the snapshot.
        let mut rng_a = seeded_rng(55);
        let mut rng_b = seeded_rng(55);
        let (before, _) = model.predictor().predict_contexts(&items, &mut rng_a).unwrap();
        let (after, _) = loaded
            .model
            .predictor()
            .predict_contexts(&items, &mut rng_b)
            .unwrap();
        assert_eq!(before, after, "{} predictions differ", kind.as_str());

        // Single-item predictions as well (skipped for items the model does
        // not know, which cannot happen here by construction).
        let item = items[0].0;
        let mut rng_a = seeded_rng(56);
        let mut rng_b = seeded_rng(56);
        let (s_before, _) = model.predictor().predict_single(item, &mut rng_a).unwrap();
        let (s_after, _) = loaded
            .model
            .predictor()
            .predict_single(item, &mut rng_b)
            .unwrap();
        assert_eq!(s_before, s_after);
    }
}

#[test]
fn oneshot_experiment_produces_records_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth();
    write_dataset(dir.path(), &data);
    let mut cfg = base_config(dir.path());
    cfg.model = ModelKind::Bitm;
    let report = run_experiment(&cfg).unwrap();
    assert!(report.oneshot_map.is_some());
    assert!(report.informativity.is_some());
    let records = fs::read_to_string(cfg.out_dir.join("oneshot_records.csv")).unwrap();
    let lines: usize = records.lines().count();
    let total: usize = report.rows.iter().map(|r| r.oneshot_records).sum();
    assert_eq!(lines, total + 1, "header plus one line per record");
}

#[test]
fn type_map_breakdowns_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_synth();
    write_dataset(dir.path(), &data);
    // Put half the properties in one group, half in another.
    let mut tm = String::new();
    for (i, p) in data.inventory.iter().enumerate() {
        let group = if i % 2 == 0 { "visual" } else { "function" };
        tm.push_str(&format!("{p}\t{group}\n"));
    }
    fs::write(dir.path().join("types.tsv"), tm).unwrap();

    let mut cfg = base_config(dir.path());
    cfg.type_map_path = Some(dir.path().join("types.tsv"));
    let report = run_experiment(&cfg).unwrap();
    let by_type = report.by_type_multishot.unwrap();
    assert!(!by_type.is_empty());
    for map in by_type.values() {
        assert!((0.0..=1.0).contains(map));
    }
    assert!(report.by_type_oneshot_top20.is_some());
}

// --- property-based invariants ---

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ap_agrees_with_quadratic_reference(
        scores in prop::collection::vec(0..8u8, 1..40),
        flips in prop::collection::vec(any::<bool>(), 1..40),
    ) {
        let n = scores.len().min(flips.len());
        let scores: Vec<f64> = scores[..n].iter().map(|&s| s as f64 / 8.0).collect();
        let mut gold = flips[..n].to_vec();
        if !gold.iter().any(|&g| g) {
            gold[0] = true;
        }
        let fast = average_precision(&scores, &gold).unwrap();
        // Rank-and-count reference, one positive at a time.
        let positives = gold.iter().filter(|&&g| g).count() as f64;
        let mut slow = 0.0;
        for i in 0..n {
            if !gold[i] { continue; }
            let mut rank = 0usize;
            let mut hits = 0usize;
            for j in 0..n {
                if scores[j] > scores[i] || (scores[j] == scores[i] && j <= i) {
                    rank += 1;
                    if gold[j] { hits += 1; }
                }
            }
            slow += hits as f64 / rank as f64;
        }
        slow /= positives;
        prop_assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn cross_validation_is_an_exact_partition(n in 2..40usize, folds in 2..10usize, seed in any::<u64>()) {
        let folds = folds.min(n);
        let concepts: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let splits = cross_validate(&concepts, folds, seed).unwrap();
        let mut seen = BTreeSet::new();
        let mut sizes = Vec::new();
        for fold in &splits {
            for t in &fold.test {
                prop_assert!(seen.insert(t.clone()), "test sets overlap");
                prop_assert!(!fold.train.contains(t));
            }
            prop_assert_eq!(fold.train.len() + fold.test.len(), n);
            sizes.push(fold.test.len());
        }
        prop_assert_eq!(seen.len(), n);
        let min = sizes.iter().min().unwrap();
        let max = sizes.iter().max().unwrap();
        prop_assert!(max - min <= 1);
    }

    #[test]
    fn occurrence_table_marginals_always_audit(
        adds in prop::collection::vec((0..6u8, 0..6u8, 1..5u64), 0..60),
    ) {
        let mut table = OccurrenceTable::new();
        for (c, w, n) in adds {
            table.add(&format!("c{c}"), &format!("w{w}"), n);
        }
        prop_assert!(table.audit());
    }

    #[test]
    fn gap_equals_ap_on_binary_weights(
        raw_scores in prop::collection::vec(0..16u8, 1..40),
        flips in prop::collection::vec(any::<bool>(), 1..40),
    ) {
        let n = raw_scores.len().min(flips.len());
        let scores: Vec<f64> = raw_scores[..n].iter().map(|&s| s as f64 / 16.0).collect();
        let mut gold = flips[..n].to_vec();
        if !gold.iter().any(|&g| g) {
            gold[0] = true;
        }
        let weights: Vec<f64> = gold.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
        let ap = average_precision(&scores, &gold).unwrap();
        let gap = proplearn::eval::gap(&scores, &weights).unwrap();
        prop_assert!((gap - ap).abs() < 1e-12);
    }

    #[test]
    fn unknown_concept_predictions_stay_in_unit_interval(
        counts in prop::collection::vec(1..4u64, 1..6),
        seed in any::<u64>(),
    ) {
        let inventory = proplearn::data::PropertyInventory::new(
            (0..4).map(|i| format!("q{i}")),
        ).unwrap();
        let norms = vec![
            PropertyNorms::new("c", vec![0.9, 0.4, 0.1, 0.6]).unwrap(),
        ];
        let mut table = OccurrenceTable::new();
        for (i, n) in counts.iter().enumerate() {
            table.add("c", &format!("w{i}"), *n);
        }
        let items: Vec<String> = table.items().map(|(w, _)| w.to_string()).collect();
        let mut rng = seeded_rng(seed);
        for mode in [CountMode::Independent, CountMode::Multinomial] {
            let model = train_count_model(
                &table, &items, &inventory, &norms,
                mode, &CountPriors::default(), &mut rng,
            ).unwrap();
            let contexts: Vec<(&str, u64)> = table.contexts_of("c").collect();
            let (pred, skipped) = model.learn_unknown(&contexts, &mut rng);
            prop_assert_eq!(skipped, 0);
            prop_assert!(pred.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }
}
