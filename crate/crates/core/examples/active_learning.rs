//! One active-learning run with a simulated oracle; writes the per-round
//! metrics CSV.
//!
//! ```text
//! cargo run --release --example active_learning -- [strategy=duis] [seed=0] [metrics.csv]
//! ```

use spadal::al::{run_with, write_metrics_csv, ALConfig, SimulatedOracle};
use spadal::dataset::{build_dataset, default_reference_condition, default_variant_conditions, generate_dataset, GenOptions};
use spadal::sampling::Strategy;

fn main() -> spadal::Result<()> {
    let mut args = std::env::args().skip(1);
    let strategy: Strategy = args.next().as_deref().unwrap_or("duis").parse()?;
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let out = args.next();

    let dir = tempfile::tempdir()?;
    let opts = GenOptions { per_class: 40, ..GenOptions::default() };
    let manifest = generate_dataset(dir.path(), &opts)?;
    let data = build_dataset(&manifest, &default_variant_conditions(), &default_reference_condition(), 1)?;
    let cfg = ALConfig { strategy, seed, rounds: 4, ..ALConfig::default() };
    let record = run_with(cfg, data, &mut SimulatedOracle, |e| {
        println!("round {} labeled {:>3} accuracy {:.1}%", e.round, e.labeled_count, e.metrics.accuracy);
    })?;
    if let Some(path) = out {
        write_metrics_csv(std::fs::File::create(&path)?, &record)?;
        println!("wrote {path}");
    }
    Ok(())
}
