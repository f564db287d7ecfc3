//! Desk-scale learning-curve benchmark: every strategy, several seeds, on a
//! 6-class procedural dataset (100 train + 50 test groups per class).
//!
//! ```text
//! cargo run --release --example learning_curves -- [seeds=0,1,2] [strategies=all]
//! ```

use std::time::Instant;

use spadal::al::{aggregate, run_with, ALConfig, SimulatedOracle};
use spadal::dataset::{build_dataset, default_reference_condition, default_variant_conditions, generate_dataset, GenOptions};
use spadal::sampling::Strategy;

fn main() -> spadal::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: Vec<u64> = args
        .next()
        .unwrap_or_else(|| "0,1,2".into())
        .split(',')
        .map(|s| s.parse().expect("seed"))
        .collect();
    let strategies: Vec<Strategy> = match args.next() {
        Some(list) => list.split(',').map(|s| s.parse()).collect::<spadal::Result<_>>()?,
        None => Strategy::ALL.to_vec(),
    };

    let dir = tempfile::tempdir()?;
    let t = Instant::now();
    let opts = GenOptions {
        per_class: 150,
        train_fraction: 2.0 / 3.0,
        ..GenOptions::default()
    };
    let manifest = generate_dataset(dir.path(), &opts)?;
    let data = build_dataset(&manifest, &default_variant_conditions(), &default_reference_condition(), 1)?;
    println!("dataset: {} pool groups, {} test images ({:.1?})", data.pools.len(), data.test.len(), t.elapsed());

    for strategy in strategies {
        let t = Instant::now();
        let mut records = Vec::new();
        for &seed in &seeds {
            let cfg = ALConfig { strategy, seed, ..ALConfig::default() };
            records.push(run_with(cfg, data.clone(), &mut SimulatedOracle, |e| {
                eprintln!("  {strategy} seed {seed} round {} labeled {} acc {:.1}%", e.round, e.labeled_count, e.metrics.accuracy);
            })?);
        }
        let rows = aggregate(&records)?;
        let curve: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.1}±{:.1}", r.accuracy_mean, r.accuracy_std))
            .collect();
        let auc = records.iter().filter_map(|r| r.area_under_curve()).sum::<f64>() / records.len() as f64;
        println!("{:>8}: {}  auc {auc:.2}  ({:.0?})", strategy.name(), curve.join(" "), t.elapsed());
    }
    Ok(())
}
