//! Generates a procedural manifest and simulates it into a directory with
//! the same layout as `spadal gen` + `spadal simulate`.
//!
//! ```text
//! cargo run --release --example generate_dataset -- <out_dir> [per_class=10]
//! ```

use spadal::dataset::{
    default_reference_condition, default_variant_conditions, generate_dataset, simulate_to_dir, GenOptions, Split,
};

fn main() -> spadal::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().expect("usage: generate_dataset <out_dir> [per_class]");
    let per_class = args.next().map_or(10, |a| a.parse().expect("per_class"));

    let opts = GenOptions { per_class, ..GenOptions::default() };
    let manifest = generate_dataset(&out, &opts)?;
    let train = manifest.entries.iter().filter(|e| e.split == Split::Train).count();
    println!("{} scenes ({train} train) in {out}", manifest.entries.len());

    let conditions = default_variant_conditions();
    let data = simulate_to_dir(&manifest, &conditions, &default_reference_condition(), 0, &out)?;
    println!(
        "{} pool groups x {} images, {} test images, depth range {:?}",
        data.pools.len(),
        data.pools.variants_per_group() + 1,
        data.test.len(),
        data.pools.depth_range(),
    );
    Ok(())
}
