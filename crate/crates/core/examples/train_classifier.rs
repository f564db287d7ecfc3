//! Trains the classifier on a fully labeled procedural pool and evaluates
//! it on the held-out test set.
//!
//! ```text
//! cargo run --release --example train_classifier -- [per_class=20] [epochs=60]
//! ```

use spadal::al::{confusion, Oracle, SimulatedOracle};
use spadal::classifier::{train, TrainConfig};
use spadal::dataset::{build_dataset, default_reference_condition, default_variant_conditions, generate_dataset, GenOptions, GroupId};

fn main() -> spadal::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("number"));
    let per_class = args.next().unwrap_or(20);
    let epochs = args.next().unwrap_or(60);

    let dir = tempfile::tempdir()?;
    let manifest = generate_dataset(dir.path(), &GenOptions { per_class, ..GenOptions::default() })?;
    let mut data = build_dataset(&manifest, &default_variant_conditions(), &default_reference_condition(), 0)?;
    let ids: Vec<GroupId> = data.pools.unlabeled_ids().iter().cloned().collect();
    let labels = SimulatedOracle.label(&data.pools, &ids)?;
    data.pools.move_to_labeled(&ids, &labels)?;

    let (model, report) = train(&data.pools, &TrainConfig { epochs, ..TrainConfig::default() })?;
    println!(
        "trained on {} groups, loss {:.3} -> {:.3}",
        ids.len(),
        report.epoch_loss[0],
        report.epoch_loss[report.epoch_loss.len() - 1],
    );
    let cm = confusion(&model, &data.test)?;
    let m = cm.metrics()?;
    println!("test accuracy {:.1}%  macro-F1 {:.1}%", m.accuracy, m.f1);
    for (c, name) in data.pools.class_names().iter().enumerate() {
        let cls = cm.class_metrics(c);
        println!("  {name:>9}: precision {:.1}% recall {:.1}%", cls.precision, cls.recall);
    }
    Ok(())
}
