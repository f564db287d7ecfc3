use proptest::prelude::*;
use spadal::dataset::*;
use spadal::photon_sim::SPEED_OF_LIGHT;
use spadal::rng;

fn small_manifest(dir: &std::path::Path, per_class: usize, classes: usize) -> Manifest {
    let opts = GenOptions {
        classes: ShapeClass::ALL[..classes].to_vec(),
        per_class,
        width: 12,
        height: 12,
        seed: 3,
        ..GenOptions::default()
    };
    generate_dataset(dir, &opts).unwrap()
}

#[test]
fn sphere_surface_satisfies_sphere_equation() {
    let quantum = SPEED_OF_LIGHT * 100e-12 / 2.0;
    for seed in 0..20 {
        let mut r = rng::stream(seed, &[]);
        let pose = ScenePose::random(ShapeClass::Sphere, 32, 32, &mut r);
        let scene = pose.render(Some(0));
        let radius = pose.radius_m();
        let meters_per_px = radius / pose.half_size;
        let mut covered = 0;
        for y in 0..32 {
            for x in 0..32 {
                let d = scene.depth_m.get(x, y);
                if d >= BACKGROUND_DEPTH_M {
                    continue;
                }
                covered += 1;
                let dx = (x as f64 + 0.5 - pose.center.0) * meters_per_px;
                let dy = (y as f64 + 0.5 - pose.center.1) * meters_per_px;
                let dz = pose.distance_m - d;
                let r_hat = (dx * dx + dy * dy + dz * dz).sqrt();
                assert!((r_hat - radius).abs() <= quantum, "seed {seed} ({x},{y}): {r_hat} vs {radius}");
            }
        }
        assert!(covered > 50);
    }
}

#[test]
fn scale_jitter_keeps_objects_large_enough() {
    let nominal_diameter = 2.0 * ScenePose::nominal_half_size(32, 32);
    let mut smallest = f64::INFINITY;
    for seed in 0..1000 {
        let s = gen_scene(&ShapeClass::ALL, 0, (32, 32), &mut rng::stream(seed, &[7])).unwrap();
        let (mut x0, mut x1, mut y0, mut y1) = (usize::MAX, 0, usize::MAX, 0);
        for y in 0..32 {
            for x in 0..32 {
                if s.depth_m.get(x, y) < BACKGROUND_DEPTH_M {
                    x0 = x0.min(x);
                    x1 = x1.max(x);
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                }
            }
        }
        let extent = ((x1 - x0 + 1).max(y1 - y0 + 1)) as f64;
        smallest = smallest.min(extent);
    }
    assert!(smallest >= 0.75 * nominal_diameter, "smallest bbox {smallest}");
}

#[test]
fn scenes_span_the_distance_range() {
    for seed in 0..200 {
        let pose = ScenePose::random(ShapeClass::Box, 16, 16, &mut rng::stream(seed, &[]));
        assert!((DISTANCE_RANGE_M.0..=DISTANCE_RANGE_M.1).contains(&pose.distance_m));
        assert!(pose.rotation.abs() <= MAX_ROTATION);
    }
}

#[test]
fn generation_is_reproducible_and_split_70_30() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = small_manifest(a.path(), 10, 6);
    let mb = small_manifest(b.path(), 10, 6);
    assert_eq!(ma.entries.len(), 60);
    assert_eq!(
        std::fs::read(a.path().join("manifest.json")).unwrap(),
        std::fs::read(b.path().join("manifest.json")).unwrap()
    );
    for e in &ma.entries {
        assert_eq!(ma.load_scene(e).unwrap(), mb.load_scene(e).unwrap());
    }
    let train = ma.entries.iter().filter(|e| e.split == Split::Train).count();
    assert_eq!((train, 60 - train), (42, 18));

    let c = tempfile::tempdir().unwrap();
    let hundred = GenOptions { classes: vec![ShapeClass::Ramp], per_class: 100, width: 4, height: 4, ..GenOptions::default() };
    let m = generate_dataset(c.path(), &hundred).unwrap();
    let train = m.entries.iter().filter(|e| e.split == Split::Train).count();
    assert_eq!((train, m.entries.len() - train), (70, 30));
}

#[test]
fn build_gives_every_group_m_variants() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = small_manifest(dir.path(), 5, 2);
    m.entries.truncate(10);
    let conds = default_variant_conditions();
    let data = build_dataset(&m, &conds, &default_reference_condition(), 1).unwrap();
    assert_eq!(data.pools.len() + data.test.len(), 10);
    for g in data.pools.all_groups() {
        assert_eq!(g.variants.len(), 4);
        assert!(g.images().all(|img| img.dims() == (12, 12)));
        assert!(g.label.is_none());
    }
    assert!(data.pools.labeled_ids().is_empty());

    m.entries.clear();
    assert!(build_dataset(&m, &conds, &default_reference_condition(), 1).is_err());
}

#[test]
fn rebuild_reproduces_groups_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let m = small_manifest(dir.path(), 4, 3);
    let conds = default_variant_conditions();
    let reference = default_reference_condition();
    let a = build_dataset(&m, &conds, &reference, 9).unwrap();
    let out = tempfile::tempdir().unwrap();
    let written = simulate_to_dir(&m, &conds, &reference, 9, out.path()).unwrap();
    let loaded = load_dataset(out.path()).unwrap();
    for ((ga, gw), gl) in a.pools.all_groups().zip(written.pools.all_groups()).zip(loaded.pools.all_groups()) {
        assert_eq!(ga, gw);
        assert_eq!(ga.id, gl.id);
        for (ia, il) in ga.images().zip(gl.images()) {
            assert_eq!(ia.depth_m, il.depth_m);
        }
    }
    assert_eq!(a.pools.depth_range(), loaded.pools.depth_range());
    assert_eq!(a.test.len(), loaded.test.len());
    assert!(dir.path().join("scenes").is_dir() && dir.path().join("manifest.json").is_file());
    assert!(out.path().join("events").is_dir() && out.path().join("images").is_dir());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_moves_preserve_pool_invariants(
        moves in prop::collection::vec((prop::collection::vec(0usize..30, 1..4), prop::collection::vec(0usize..4, 1..4)), 1..100),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(dir.path(), &GenOptions {
            classes: ShapeClass::ALL[..3].to_vec(), per_class: 10, width: 4, height: 4, train_fraction: 1.0, ..GenOptions::default()
        }).unwrap();
        let conds = vec![default_variant_conditions()[0].clone()];
        let mut pools = build_dataset(&m, &conds, &default_reference_condition(), 0).unwrap().pools;
        let ids: Vec<GroupId> = pools.all_groups().map(|g| g.id.clone()).collect();
        let total = pools.len();
        for (picks, labels) in moves {
            let batch: Vec<GroupId> = picks.iter().map(|&i| ids[i].clone()).collect();
            let labels: Vec<usize> = labels.iter().cycle().take(batch.len()).copied().collect();
            let before = (pools.labeled_ids().clone(), pools.unlabeled_ids().clone());
            match pools.move_to_labeled(&batch, &labels) {
                Ok(()) => {
                    for (id, &l) in batch.iter().zip(&labels) {
                        prop_assert_eq!(pools.group(id).unwrap().label, Some(l));
                    }
                }
                Err(_) => prop_assert_eq!(&before, &(pools.labeled_ids().clone(), pools.unlabeled_ids().clone())),
            }
            prop_assert_eq!(pools.labeled_ids().len() + pools.unlabeled_ids().len(), total);
            prop_assert!(pools.labeled_ids().is_disjoint(pools.unlabeled_ids()));
            for id in &ids {
                prop_assert!(pools.labeled_ids().contains(id) ^ pools.unlabeled_ids().contains(id));
            }
            for g in pools.labeled_groups() {
                prop_assert!(g.label.unwrap() < pools.class_count());
            }
        }
    }
}
