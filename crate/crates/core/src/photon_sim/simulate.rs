//! The synthetic-imaging-variants forward model: Poisson signal and
//! background photon draws per pixel.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::condition::{depth_to_bin, SimulationCondition};
use super::events::{PhotonEvent, PhotonEvents};
use super::scene::SceneTruth;
use crate::error::{Error, Result};
use crate::rng;

fn poisson(mean: f64, rng: &mut impl Rng) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(mean)
        .expect("finite positive Poisson mean")
        .sample(rng);
    draw as u32
}

/// Draws the number of signal photons of a pixel,
/// `Poisson(n_pulses * msppp * reflectance)`.
pub fn sample_signal_count(cond: &SimulationCondition, reflectance: f64, rng: &mut impl Rng) -> u32 {
    poisson(cond.signal_mean(reflectance), rng)
}

/// Draws `count` signal arrival bins around `t_obs` with Gaussian jitter of
/// `sigma_bins()`, rounded and clamped to `[0, t_bin_max]`.
pub fn sample_signal_times(
    t_obs: f64,
    cond: &SimulationCondition,
    count: u32,
    rng: &mut impl Rng,
) -> Vec<u32> {
    let sigma = cond.sigma_bins();
    let max = cond.t_bin_max as f64;
    (0..count)
        .map(|_| {
            let t = if sigma > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                t_obs + sigma * z
            } else {
                t_obs
            };
            t.round().clamp(0.0, max) as u32
        })
        .collect()
}

/// Draws background photons: `Poisson(mean_signal / sbr)` of them, each
/// uniform on the integer bins `[0, t_bin_max]`.
pub fn sample_background(cond: &SimulationCondition, mean_signal: f64, rng: &mut impl Rng) -> Vec<u32> {
    if cond.sbr.is_infinite() {
        return Vec::new();
    }
    let n = poisson(mean_signal / cond.sbr, rng);
    (0..n).map(|_| rng.random_range(0..=cond.t_bin_max)).collect()
}

/// Simulates one acquisition of `scene` under `cond`.
///
/// Pixel `k` (row-major) draws from its own ChaCha stream keyed by `seed`, so
/// the result does not depend on the order pixels are processed in.
pub fn simulate(scene: &SceneTruth, cond: &SimulationCondition, seed: u64) -> Result<PhotonEvents> {
    cond.validate()?;
    let (width, height) = scene.dims();
    let mean_signal = cond.signal_mean(scene.reflectance.mean());
    let key = rng::derive_seed(seed, &[]);
    let mut events = Vec::new();
    let mut bins = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let t_obs = depth_to_bin(scene.depth_m.get(x, y), cond)?;
            let mut rng = rng::pixel_rng(key, (y * width + x) as u64);
            let n_sig = sample_signal_count(cond, scene.reflectance.get(x, y), &mut rng);
            bins.clear();
            bins.extend(sample_signal_times(t_obs, cond, n_sig, &mut rng));
            bins.extend(sample_background(cond, mean_signal, &mut rng));
            bins.sort_unstable();
            events.extend(bins.iter().map(|&bin| PhotonEvent {
                x: x as u16,
                y: y as u16,
                bin,
            }));
        }
    }
    Ok(PhotonEvents::from_sorted(width, height, events, cond.clone()))
}

/// Seed of the `index`-th variant derived from a master seed.
pub fn variant_seed(seed: u64, index: usize) -> u64 {
    rng::derive_seed(seed, &[index as u64 + 1])
}

/// One simulation per condition, each on an independent sub-stream.
pub fn generate_variants(
    scene: &SceneTruth,
    conditions: &[SimulationCondition],
    seed: u64,
) -> Result<Vec<PhotonEvents>> {
    if conditions.is_empty() {
        return Err(Error::EmptyConditions);
    }
    conditions
        .iter()
        .enumerate()
        .map(|(j, cond)| simulate(scene, cond, variant_seed(seed, j)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn cond() -> SimulationCondition {
        SimulationCondition {
            t_bin_max: 2000,
            ..Default::default()
        }
    }

    #[test]
    fn zero_reflectance_gives_no_signal() {
        let mut rng = stream(1, &[]);
        for _ in 0..1000 {
            assert_eq!(sample_signal_count(&cond(), 0.0, &mut rng), 0);
        }
    }

    #[test]
    fn signal_times_edge_cases() {
        let mut rng = stream(2, &[]);
        assert!(sample_signal_times(100.0, &cond(), 0, &mut rng).is_empty());
        let sharp = SimulationCondition {
            pulse_rms: 0.0,
            ..cond()
        };
        let t = sample_signal_times(100.4, &sharp, 50, &mut rng);
        assert!(t.iter().all(|&b| b == 100));
        // clamped into range
        let t = sample_signal_times(1999.9, &cond(), 2000, &mut rng);
        assert!(t.iter().all(|&b| b <= 2000));
        assert!(t.contains(&2000));
    }

    #[test]
    fn infinite_sbr_has_no_background() {
        let c = SimulationCondition {
            sbr: f64::INFINITY,
            ..cond()
        };
        let mut rng = stream(3, &[]);
        for _ in 0..100 {
            assert!(sample_background(&c, 1e3, &mut rng).is_empty());
        }
    }

    #[test]
    fn dark_scene_without_background_is_empty() {
        let scene = SceneTruth::uniform(8, 8, 10.0, 0.0).unwrap();
        let c = SimulationCondition {
            sbr: f64::INFINITY,
            ..cond()
        };
        assert!(simulate(&scene, &c, 5).unwrap().is_empty());
    }

    #[test]
    fn determinism_and_range_errors() {
        let scene = SceneTruth::uniform(8, 8, 10.0, 0.8).unwrap();
        let a = simulate(&scene, &cond(), 9).unwrap();
        let b = simulate(&scene, &cond(), 9).unwrap();
        assert_eq!(a.encode(), b.encode());
        assert_ne!(a, simulate(&scene, &cond(), 10).unwrap());

        let far = SceneTruth::uniform(2, 2, 500.0, 0.8).unwrap();
        assert!(matches!(simulate(&far, &cond(), 1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn variants() {
        let scene = SceneTruth::uniform(8, 8, 10.0, 0.8).unwrap();
        let conds = vec![cond(); 4];
        let v = generate_variants(&scene, &conds, 3).unwrap();
        assert_eq!(v.len(), 4);
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(v[i].events(), v[j].events());
            }
        }
        assert!(matches!(generate_variants(&scene, &[], 3), Err(Error::EmptyConditions)));
    }
}
