//! Simulates one procedural scene at a few flux levels and reports photon
//! statistics; optionally saves the last event list.
//!
//! ```text
//! cargo run --release --example simulate_photons -- [events.bin]
//! ```

use spadal::dataset::{gen_scene, ShapeClass};
use spadal::photon_sim::{simulate, SimulationCondition};
use spadal::rng;

fn main() -> spadal::Result<()> {
    let scene = gen_scene(&ShapeClass::ALL, 0, (32, 32), &mut rng::stream(7, &[0]))?;
    let mut last = None;
    for (msppp, sbr) in [(1.0, f64::INFINITY), (4.0, 4.0), (16.0, 1.0)] {
        let cond = SimulationCondition::default().with_flux(msppp, sbr);
        let events = simulate(&scene, &cond, 7)?;
        let counts = events.counts_per_pixel();
        let empty = counts.iter().filter(|&&c| c == 0).count();
        println!(
            "msppp {msppp:>4} sbr {sbr:>4}: {} photons, {:.2}/pixel, {empty} empty pixels",
            events.len(),
            events.len() as f64 / counts.len() as f64,
        );
        last = Some(events);
    }
    if let (Some(path), Some(events)) = (std::env::args().nth(1), last) {
        events.save(&path)?;
        println!("saved {path}");
    }
    Ok(())
}
