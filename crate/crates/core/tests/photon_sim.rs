use proptest::prelude::*;
use spadal::photon_sim::*;
use spadal::raster::Raster;
use spadal::rng;

fn cond() -> SimulationCondition {
    SimulationCondition::default()
}

fn mean_var(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for x in xs {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    (mean, m2 / (n - 1.0))
}

const DRAWS: usize = 1_000_000;

#[test]
fn depth_to_bin_examples() {
    assert!((depth_to_bin(14.989_622_9, &cond()).unwrap() - 1000.0).abs() < 1e-6);
    assert_eq!(depth_to_bin(0.0, &cond()).unwrap(), 0.0);
    assert!((depth_to_bin(7.494_811_45, &cond()).unwrap() - 500.0).abs() < 1e-6);
    assert!(matches!(
        depth_to_bin(200.0, &cond()),
        Err(spadal::Error::OutOfRange { .. })
    ));
}

#[test]
fn signal_count_mean_and_variance() {
    let c = SimulationCondition {
        n_pulses: 2.0,
        msppp: 1.5,
        ..cond()
    };
    let mut r = rng::stream(11, &[]);
    let (mean, _) = mean_var((0..DRAWS).map(|_| sample_signal_count(&c, 1.0, &mut r) as f64));
    assert!((2.99..=3.01).contains(&mean), "mean {mean}");

    let c = SimulationCondition { msppp: 4.0, ..cond() };
    let (_, var) = mean_var((0..DRAWS).map(|_| sample_signal_count(&c, 0.5, &mut r) as f64));
    assert!((1.98..=2.02).contains(&var), "variance {var}");

    for _ in 0..1000 {
        assert_eq!(sample_signal_count(&c, 0.0, &mut r), 0);
    }
}

#[test]
fn signal_time_dispersion() {
    let c = cond();
    assert_eq!(c.sigma_bins(), 7.5);
    let mut r = rng::stream(12, &[]);
    let times = sample_signal_times(1000.0, &c, DRAWS as u32, &mut r);
    let (mean, var) = mean_var(times.iter().map(|&t| t as f64));
    assert!((mean - 1000.0).abs() < 0.05);
    assert!((7.45..=7.55).contains(&var.sqrt()), "std {}", var.sqrt());

    assert!(sample_signal_times(1000.0, &c, 0, &mut r).is_empty());
    let sharp = SimulationCondition { pulse_rms: 0.0, ..c };
    assert!(sample_signal_times(1000.4, &sharp, 50, &mut r).iter().all(|&t| t == 1000));
}

#[test]
fn background_count_and_uniformity() {
    let c = SimulationCondition { sbr: 2.0, ..cond() };
    let mut r = rng::stream(13, &[]);
    let mut deciles = [0u64; 10];
    let mut total = 0u64;
    let (mean, _) = mean_var((0..DRAWS).map(|_| {
        let bins = sample_background(&c, 4.0, &mut r);
        for &b in &bins {
            let d = (b as usize * 10 / (c.t_bin_max as usize + 1)).min(9);
            deciles[d] += 1;
        }
        total += bins.len() as u64;
        bins.len() as f64
    }));
    assert!((1.99..=2.01).contains(&mean), "mean {mean}");
    for (i, &n) in deciles.iter().enumerate() {
        let share = n as f64 / total as f64;
        assert!((share - 0.1).abs() <= 0.005, "decile {i}: {share}");
    }

    let none = SimulationCondition { sbr: f64::INFINITY, ..cond() };
    for _ in 0..100 {
        assert!(sample_background(&none, 4.0, &mut r).is_empty());
    }
}

#[test]
fn background_to_signal_ratio_follows_sbr() {
    let scene = SceneTruth::uniform(100, 100, 30.0, 1.0).unwrap();
    for sbr in [1.0, 4.0] {
        let c = SimulationCondition { msppp: 5.0, sbr, pulse_rms: 0.0, ..cond() };
        let signal_bin = depth_to_bin(30.0, &c).unwrap().round() as u32;
        let (mut sig, mut bg) = (0u64, 0u64);
        for seed in 0..50 {
            let ev = simulate(&scene, &c, seed).unwrap();
            // With a zero-width pulse every signal photon lands on one bin; the
            // background share of that bin is negligible (1 / 8001).
            let on_peak = ev.events().iter().filter(|e| e.bin == signal_bin).count() as u64;
            sig += on_peak;
            bg += ev.len() as u64 - on_peak;
        }
        let ratio = bg as f64 / sig as f64;
        assert!((ratio * sbr - 1.0).abs() < 0.02, "sbr {sbr}: ratio {ratio}");
    }
}

#[test]
fn simulate_examples() {
    let dark = SceneTruth::uniform(8, 8, 20.0, 0.0).unwrap();
    let c = SimulationCondition { sbr: f64::INFINITY, ..cond() };
    assert!(simulate(&dark, &c, 1).unwrap().is_empty());

    let scene = SceneTruth::uniform(16, 16, 40.0, 0.7).unwrap();
    let a = simulate(&scene, &cond(), 9).unwrap();
    let b = simulate(&scene, &cond(), 9).unwrap();
    assert_eq!(a.encode(), b.encode());

    let far = SceneTruth::uniform(4, 4, 500.0, 0.7).unwrap();
    assert!(simulate(&far, &cond(), 0).is_err());
}

#[test]
fn simulated_event_total_matches_flux() {
    let scene = SceneTruth::uniform(64, 64, 50.0, 1.0).unwrap();
    let c = SimulationCondition { sbr: f64::INFINITY, ..cond() };
    let mean = (0..100).map(|s| simulate(&scene, &c, s).unwrap().len() as f64).sum::<f64>() / 100.0;
    assert!((16220.0..=16550.0).contains(&mean), "mean {mean}");
}

#[test]
fn variants_are_independent() {
    let scene = SceneTruth::uniform(8, 8, 20.0, 0.9).unwrap();
    let conds = vec![cond(); 4];
    let v = generate_variants(&scene, &conds, 5).unwrap();
    assert_eq!(v.len(), 4);
    for i in 0..4 {
        for j in i + 1..4 {
            assert_ne!(v[i].events(), v[j].events());
        }
    }
    assert!(matches!(
        generate_variants(&scene, &[], 5),
        Err(spadal::Error::EmptyConditions)
    ));
}

#[test]
fn expected_rate_examples() {
    let c = cond();
    let depth = Raster::filled(1, 1, 15.0);
    let bg = RateModel::new(&depth, &Raster::filled(1, 1, 0.0), &Raster::filled(1, 1, 0.5), &c).unwrap();
    assert_eq!(bg.expected_rate(0, 0, 7000), 0.5);
    let zero = RateModel::new(&depth, &Raster::filled(1, 1, 0.0), &Raster::filled(1, 1, 0.0), &c).unwrap();
    assert!((0..=c.t_bin_max).all(|t| zero.expected_rate(0, 0, t) == 0.0));

    let g = SimulationCondition { gain: 1.7, ..c.clone() };
    let m = RateModel::new(&depth, &Raster::filled(1, 1, 0.6), &Raster::filled(1, 1, 0.002), &g).unwrap();
    let sum: f64 = (0..=g.t_bin_max).map(|t| m.expected_rate(0, 0, t)).sum();
    let a = g.signal_mean(0.6);
    let expected = 1.7 * (a + 0.002 * g.n_bins() as f64);
    assert!((sum - expected).abs() < 1e-6, "{sum} vs {expected}");
}

#[test]
fn nll_single_bin_terms() {
    assert_eq!(poisson_nll_term(0, 1.0), 1.0);
    assert_eq!(poisson_nll_term(1, 1.0), 1.0);
    assert!((poisson_nll_term(3, 2.0) - (2.0 - 3.0 * 2f64.ln() + 6f64.ln())).abs() < 1e-12);
}

#[test]
fn nll_rejects_impossible_observation() {
    let c = SimulationCondition { sbr: f64::INFINITY, pulse_rms: 0.0, ..cond() };
    let scene = SceneTruth::uniform(2, 2, 30.0, 1.0).unwrap();
    let events = simulate(&scene, &SimulationCondition { msppp: 20.0, ..c.clone() }, 1).unwrap();
    let wrong = SceneTruth::uniform(2, 2, 60.0, 1.0).unwrap();
    let model = RateModel::from_scene(&wrong, &c).unwrap();
    assert!(matches!(
        neg_log_likelihood(&events, &model),
        Err(spadal::Error::ImpossibleObservation { .. })
    ));
}

#[test]
fn true_depth_minimizes_nll() {
    let c = SimulationCondition { msppp: 50.0, sbr: 10.0, ..cond() };
    let scene = SceneTruth::new(
        Raster::from_fn(16, 16, |x, y| 20.0 + 0.5 * x as f64 + 0.25 * y as f64),
        Raster::filled(16, 16, 0.8),
        None,
    )
    .unwrap();
    let shift = 5.0 * c.bin_depth();
    let shifted = SceneTruth::new(scene.depth_m.map(|d| d + shift), scene.reflectance.clone(), None).unwrap();
    let truth = RateModel::from_scene(&scene, &c).unwrap();
    let perturbed = RateModel::from_scene(&shifted, &c).unwrap();
    let (mut at_truth, mut at_shift) = (0.0, 0.0);
    for seed in 0..20 {
        let ev = simulate(&scene, &c, seed).unwrap();
        at_truth += neg_log_likelihood(&ev, &truth).unwrap();
        at_shift += neg_log_likelihood(&ev, &perturbed).unwrap();
    }
    assert!(at_truth < at_shift, "{at_truth} vs {at_shift}");
}

#[test]
fn event_file_roundtrip() {
    let scene = SceneTruth::uniform(5, 3, 25.0, 0.8).unwrap();
    let ev = simulate(&scene, &cond(), 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.phe");
    ev.save(&path).unwrap();
    assert_eq!(PhotonEvents::load(&path, cond()).unwrap(), ev);
    let bytes = ev.encode();
    assert_eq!(&bytes[..4], b"PHE1");
    assert_eq!(bytes.len(), 4 + 4 + 4 + 4 + 8 + 8 * ev.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn histogram_roundtrip_is_identity(
        w in 1usize..6, h in 1usize..6, t_max in 1u32..40,
        raw in prop::collection::vec((0usize..6, 0usize..6, 0u32..40), 0..60),
    ) {
        let c = SimulationCondition { t_bin_max: t_max, ..cond() };
        let events: Vec<PhotonEvent> = raw
            .into_iter()
            .map(|(x, y, b)| PhotonEvent { x: (x % w) as u16, y: (y % h) as u16, bin: b % (t_max + 1) })
            .collect();
        let ev = PhotonEvents::new(w, h, events.clone(), c.clone()).unwrap();
        let hist = ev.to_histogram();
        prop_assert_eq!(hist.counts.iter().map(|&n| n as usize).sum::<usize>(), events.len());
        for e in &events {
            prop_assert!(hist.get(e.x as usize, e.y as usize, e.bin as usize) >= 1);
        }
        prop_assert_eq!(PhotonEvents::from_histogram(&hist, c.clone()).unwrap(), ev.clone());
        prop_assert_eq!(PhotonEvents::decode(&ev.encode(), c).unwrap(), ev);
    }

    #[test]
    fn irf_has_unit_sum(sigma in 0.0f64..40.0, center in 0.0f64..100.0) {
        let irf = GaussianIrf::new(sigma);
        let (_, w) = irf.weights_around(center);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(w.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn simulation_is_deterministic_and_in_bounds(seed in any::<u64>(), depth in 1.0f64..110.0, refl in 0.0f64..1.0) {
        let scene = SceneTruth::uniform(4, 3, depth, refl).unwrap();
        let a = simulate(&scene, &cond(), seed).unwrap();
        prop_assert_eq!(a.encode(), simulate(&scene, &cond(), seed).unwrap().encode());
        for e in a.events() {
            prop_assert!((e.x as usize) < 4 && (e.y as usize) < 3 && e.bin <= cond().t_bin_max);
        }
    }

    #[test]
    fn rates_are_nonnegative(depth in 0.0f64..110.0, refl in 0.0f64..1.0, b in 0.0f64..0.01, t in 0u32..8001) {
        let m = RateModel::new(
            &Raster::filled(1, 1, depth), &Raster::filled(1, 1, refl), &Raster::filled(1, 1, b), &cond(),
        ).unwrap();
        prop_assert!(m.expected_rate(0, 0, t) >= 0.0);
    }
}
