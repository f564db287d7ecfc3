//! Trains on a small labeled seed set, then shows what each strategy would
//! query next; prints the DUIS candidate scores.
//!
//! ```text
//! cargo run --release --example select_batch -- [batch=5] [candidates=15]
//! ```

use spadal::al::{Oracle, SimulatedOracle};
use spadal::classifier::{train, TrainConfig};
use spadal::dataset::{build_dataset, default_reference_condition, default_variant_conditions, generate_dataset, GenOptions, GroupId};
use spadal::rng;
use spadal::sampling::{random_subset, select, write_scores_csv, SelectionRequest, Strategy};

fn main() -> spadal::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("number"));
    let batch = args.next().unwrap_or(5);
    let candidates = args.next().unwrap_or(15);

    let dir = tempfile::tempdir()?;
    let manifest = generate_dataset(dir.path(), &GenOptions::default())?;
    let mut data = build_dataset(&manifest, &default_variant_conditions(), &default_reference_condition(), 0)?;
    let seed_ids = random_subset(data.pools.unlabeled_ids(), 12, &mut rng::stream(0, &[1]));
    let labels = SimulatedOracle.label(&data.pools, &seed_ids)?;
    data.pools.move_to_labeled(&seed_ids, &labels)?;
    let (model, _) = train(&data.pools, &TrainConfig::default())?;

    for strategy in Strategy::ALL {
        let req = SelectionRequest { model: &model, pools: &data.pools, batch, candidates, strategy, seed: 0 };
        let sel = select(&req)?;
        let ids: Vec<&str> = sel.ids.iter().map(GroupId::as_str).collect();
        println!("{:>8}: {}", strategy.name(), ids.join(" "));
        if strategy == Strategy::Duis {
            write_scores_csv(std::io::stdout().lock(), &sel.scored)?;
        }
    }
    Ok(())
}
