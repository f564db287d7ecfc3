//! Simulates a scene, reconstructs depth and prints quality plus an ASCII
//! rendering of truth and estimate.
//!
//! ```text
//! cargo run --release --example reconstruct_depth -- [msppp=4] [sbr=4]
//! ```

use spadal::dataset::{gen_scene, ShapeClass};
use spadal::photon_sim::{simulate, SimulationCondition};
use spadal::raster::Raster;
use spadal::recon::{image_quality, reconstruct};
use spadal::rng;

fn ascii(depth: &Raster<f64>, lo: f64, hi: f64) -> Vec<String> {
    const RAMP: &[u8] = b"@%#*+=-:. ";
    (0..depth.height())
        .map(|y| {
            (0..depth.width())
                .map(|x| {
                    let t = ((depth.get(x, y) - lo) / (hi - lo)).clamp(0.0, 1.0);
                    RAMP[(t * (RAMP.len() - 1) as f64).round() as usize] as char
                })
                .collect()
        })
        .collect()
}

fn main() -> spadal::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("number"));
    let msppp = args.next().unwrap_or(4.0);
    let sbr = args.next().unwrap_or(4.0);

    let scene = gen_scene(&ShapeClass::ALL, 2, (32, 32), &mut rng::stream(3, &[0]))?;
    let cond = SimulationCondition::default().with_flux(msppp, sbr);
    let image = reconstruct(&simulate(&scene, &cond, 3)?)?;
    let q = image_quality(&image, &scene)?;
    println!("msppp {msppp} sbr {sbr}: rmse {:.3} m, ssim {:.3}", q.rmse, q.ssim);

    let (lo, hi) = scene.depth_m.min_max();
    for (t, e) in ascii(&scene.depth_m, lo, hi).iter().zip(ascii(&image.depth_m, lo, hi)) {
        println!("{t}  {e}");
    }
    Ok(())
}
