//! Depth-quality sweep over signal levels on procedural scenes, as CSV.
//!
//! ```text
//! cargo run --release --example quality_sweep -- [out.csv]
//! ```

use spadal::dataset::{gen_scene, ShapeClass};
use spadal::photon_sim::SimulationCondition;
use spadal::quality::{quality_sweep, write_quality_csv};
use spadal::rng;

fn main() -> spadal::Result<()> {
    let mut r = rng::stream(11, &[0]);
    let scenes = (0..12)
        .map(|i| gen_scene(&ShapeClass::ALL, i % 6, (32, 32), &mut r))
        .collect::<spadal::Result<Vec<_>>>()?;
    let rows = quality_sweep(&scenes, &SimulationCondition::default(), &[0.5, 1.0, 2.0, 4.0, 8.0, 16.0], 11)?;
    match std::env::args().nth(1) {
        Some(path) => write_quality_csv(std::fs::File::create(path)?, &rows)?,
        None => {
            for r in &rows {
                println!("msppp {:>5} sbr {}: rmse {:.3} m, ssim {:.3}", r.msppp, r.sbr, r.rmse_mean, r.ssim_mean);
            }
        }
    }
    Ok(())
}
