use std::collections::{BTreeMap, BTreeSet};
use std::sync::mpsc;
use std::time::Duration;

use spadal::al::*;
use spadal::classifier::TrainConfig;
use spadal::dataset::*;
use spadal::sampling::Strategy;

fn manifest(dir: &std::path::Path) -> Manifest {
    let opts = GenOptions {
        classes: ShapeClass::ALL[..3].to_vec(),
        per_class: 12,
        width: 12,
        height: 12,
        seed: 5,
        ..GenOptions::default()
    };
    generate_dataset(dir, &opts).unwrap()
}

fn dataset() -> Dataset {
    let dir = tempfile::tempdir().unwrap();
    build_dataset(&manifest(dir.path()), &default_variant_conditions(), &default_reference_condition(), 2).unwrap()
}

fn truth() -> BTreeMap<GroupId, usize> {
    let dir = tempfile::tempdir().unwrap();
    manifest(dir.path()).entries.iter().map(|e| (GroupId(e.id.clone()), e.label)).collect()
}

fn config(strategy: Strategy, rounds: usize) -> ALConfig {
    ALConfig {
        rounds,
        batch_size: 3,
        candidates: 6,
        strategy,
        train: TrainConfig { epochs: 4, ..TrainConfig::default() },
        seed: 11,
        ..ALConfig::default()
    }
}

fn csv(record: &RunRecord) -> String {
    let mut out = Vec::new();
    write_metrics_csv(&mut out, record).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn single_round_run() {
    let record = run(config(Strategy::Duis, 1), dataset(), &mut SimulatedOracle).unwrap();
    let entries: Vec<&RoundEntry> = record.entries().collect();
    assert_eq!(entries.len(), 2);
    assert_eq!((entries[0].round, entries[0].labeled_count), (0, 3));
    assert_eq!((entries[1].round, entries[1].labeled_count), (1, 6));
    let text = csv(&record);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("round,labeled_count,accuracy,precision,recall,f1,strategy,seed"));
    assert!(lines.next().unwrap().ends_with(",duis,11"));
    assert_eq!(lines.count(), 1);
}

#[test]
fn runs_are_reproducible_and_consistent() {
    let data = dataset();
    let truth = truth();
    let test_ids: BTreeSet<GroupId> = data.test.items.iter().map(|t| t.id.clone()).collect();
    for strategy in Strategy::ALL {
        let a = run(config(strategy, 3), data.clone(), &mut SimulatedOracle).unwrap();
        let b = run(config(strategy, 3), data.clone(), &mut SimulatedOracle).unwrap();
        assert_eq!(csv(&a), csv(&b), "{strategy}");

        let mut seen = BTreeSet::new();
        let mut previous = 0;
        for e in a.entries() {
            assert!(e.labeled_count > previous);
            assert_eq!(e.labeled_count, previous + e.selected.len());
            previous = e.labeled_count;
            for id in &e.selected {
                assert!(seen.insert(id.clone()), "{id} selected twice");
                assert!(!test_ids.contains(id));
            }
            for (id, &l) in e.selected.iter().zip(&e.labels) {
                assert_eq!(data.pools.group(id).unwrap().label, None);
                assert_eq!(l, truth[id]);
            }
            let m = e.metrics;
            for v in [m.accuracy, m.precision, m.recall, m.f1] {
                assert!((0.0..=100.0).contains(&v));
            }
            assert!(m.f1 <= m.precision.max(m.recall) + 1e-9);
        }
        assert_eq!(previous, config(strategy, 3).budget());
    }
}

#[test]
fn initial_set_is_shared_across_strategies() {
    let data = dataset();
    let mut first = None;
    for strategy in Strategy::ALL {
        let mut learner = ActiveLearner::new(config(strategy, 2), data.clone()).unwrap();
        let ids = learner.prepare_query().unwrap().unwrap().to_vec();
        match &first {
            None => first = Some(ids),
            Some(f) => assert_eq!(f, &ids),
        }
    }
}

#[test]
fn restored_learner_resumes_identically() {
    let data = dataset();
    let mut learner = ActiveLearner::new(config(Strategy::Margin, 3), data.clone()).unwrap();
    let mut oracle = SimulatedOracle;
    let ids = learner.prepare_query().unwrap().unwrap().to_vec();
    let labels = oracle.label(learner.pools(), &ids).unwrap();
    learner.submit(&labels).unwrap();
    let pending = learner.prepare_query().unwrap().unwrap().to_vec();

    let ckpt = learner.checkpoint();
    let json = serde_json::to_string(&ckpt).unwrap();
    let mut restored = ActiveLearner::restore(serde_json::from_str(&json).unwrap(), data).unwrap();
    assert_eq!(restored.pending(), Some(pending.as_slice()));
    assert_eq!(restored.prepare_query().unwrap().unwrap(), pending.as_slice());

    let labels = oracle.label(learner.pools(), &pending).unwrap();
    let a = learner.submit(&labels).unwrap().clone();
    let b = restored.submit(&labels).unwrap().clone();
    assert_eq!((a.metrics, a.labeled_count), (b.metrics, b.labeled_count));
    assert_eq!(learner.prepare_query().unwrap(), restored.prepare_query().unwrap());
}

#[test]
fn bad_answers_leave_the_learner_untouched() {
    let mut learner = ActiveLearner::new(config(Strategy::Random, 1), dataset()).unwrap();
    assert!(learner.submit(&[0, 0, 0]).is_err(), "nothing pending yet");
    learner.prepare_query().unwrap();
    assert!(learner.submit(&[0, 0]).is_err());
    assert!(learner.submit(&[0, 0, 3]).is_err());
    assert!(learner.pools().labeled_ids().is_empty());
    assert_eq!(learner.pending().unwrap().len(), 3);
}

#[test]
fn infeasible_budgets_are_rejected() {
    let data = dataset();
    let pool = data.pools.len();
    let too_long = ALConfig { rounds: pool, ..config(Strategy::Random, 1) };
    assert!(matches!(ActiveLearner::new(too_long, data.clone()), Err(spadal::Error::BudgetInfeasible { .. })));
    let zero = ALConfig { rounds: 0, ..config(Strategy::Random, 1) };
    assert!(ActiveLearner::new(zero, data.clone()).is_err());
    let mut labeled = data.clone();
    let id = labeled.pools.unlabeled_ids().iter().next().unwrap().clone();
    labeled.pools.move_to_labeled(&[id], &[0]).unwrap();
    assert!(ActiveLearner::new(config(Strategy::Random, 1), labeled).is_err());
}

#[test]
fn channel_oracle_drives_a_run() {
    let data = dataset();
    let truth = truth();
    let (qtx, qrx) = mpsc::channel::<QueryBatch>();
    let (atx, arx) = mpsc::channel();
    let labeler = std::thread::spawn(move || {
        let mut batches = 0;
        while let Ok(batch) = qrx.recv() {
            batches += 1;
            atx.send(batch.ids.iter().map(|id| (id.clone(), truth[id])).collect()).unwrap();
        }
        batches
    });
    let mut oracle = ChannelOracle::new(qtx, arx, Some(Duration::from_secs(30)));
    let human = run(config(Strategy::Entropy, 2), data.clone(), &mut oracle).unwrap();
    drop(oracle);
    assert_eq!(labeler.join().unwrap(), 3);
    let simulated = run(config(Strategy::Entropy, 2), data, &mut SimulatedOracle).unwrap();
    assert_eq!(csv(&human), csv(&simulated));
}

#[test]
fn silent_labeler_times_out() {
    let (qtx, _qrx) = mpsc::channel();
    let (_atx, arx) = mpsc::channel();
    let mut oracle = ChannelOracle::new(qtx, arx, Some(Duration::from_millis(20)));
    let err = run(config(Strategy::Random, 1), dataset(), &mut oracle).unwrap_err();
    assert!(matches!(err, spadal::Error::Oracle(_)));
}

#[test]
fn metrics_by_hand() {
    // 10 binary predictions: 3 TP, 1 FN, 1 FP, 5 TN (class 1 positive)
    let pairs = [(1, 1), (1, 1), (1, 1), (1, 0), (0, 1), (0, 0), (0, 0), (0, 0), (0, 0), (0, 0)];
    let cm = ConfusionMatrix::from_pairs(2, pairs).unwrap();
    let pos = cm.class_metrics(1);
    assert_eq!((pos.precision, pos.recall, pos.f1), (75.0, 75.0, 75.0));
    let m = cm.metrics().unwrap();
    assert!((m.accuracy - 80.0).abs() < 1e-12);
    let macro_p = (0.75 + 5.0 / 6.0) / 2.0 * 100.0;
    assert!((m.precision - macro_p).abs() < 1e-9);
    assert!((m.recall - macro_p).abs() < 1e-9);
    assert!(ConfusionMatrix::from_pairs(2, [(0, 2)]).is_err());
}

#[test]
fn aggregate_over_seeds() {
    let data = dataset();
    let records: Vec<RunRecord> = [1u64, 2]
        .iter()
        .map(|&seed| run(ALConfig { seed, ..config(Strategy::Random, 1) }, data.clone(), &mut SimulatedOracle).unwrap())
        .collect();
    let rows = aggregate(&records).unwrap();
    assert_eq!(rows.len(), 2);
    let accs: Vec<f64> = records.iter().map(|r| r.final_entry().unwrap().metrics.accuracy).collect();
    let (mean, std) = mean_std(&accs);
    assert_eq!(rows[1].accuracy_mean, mean);
    assert_eq!(rows[1].accuracy_std, std);
    assert_eq!(rows[1].runs, 2);
    assert_eq!(mean_std(&[2.0, 4.0]), (3.0, 2f64.sqrt()));

    let mut out = Vec::new();
    write_aggregate_csv(&mut out, &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("round,labeled_count,accuracy_mean,accuracy_std,"));
    assert_eq!(text.lines().count(), 3);
}
