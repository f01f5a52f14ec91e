use tacfoot_core::harness::*;
use tacfoot_core::Error;

fn small_config() -> DatasetConfig {
    DatasetConfig {
        grid: GridSpec {
            theta_g: AngleRange::new(-3.0, 3.0, 3.0),
            theta_leg: AngleRange::new(80.0, 100.0, 20.0),
        },
        ..DatasetConfig::ci()
    }
}

#[test]
fn default_grid_yields_500_samples() {
    let ds = gen_dataset(&DatasetConfig::ci(), 7).unwrap();
    assert_eq!(ds.len(), 500);
    assert_eq!(ds.header.count, 500);
    assert!(ds.samples.iter().all(|s| s.field.dims() == (32, 28)));
    let gs: std::collections::BTreeSet<i32> = ds.samples.iter().map(|s| s.theta_g.round() as i32).collect();
    let ls: std::collections::BTreeSet<i32> = ds.samples.iter().map(|s| s.theta_leg.round() as i32).collect();
    assert_eq!((gs.len(), ls.len()), (25, 20));
    assert_eq!((*gs.first().unwrap(), *gs.last().unwrap()), (-12, 12));
    assert_eq!((*ls.first().unwrap(), *ls.last().unwrap()), (40, 135));
}

#[test]
fn single_point_round_trips_through_file() {
    let cfg = DatasetConfig {
        grid: GridSpec {
            theta_g: AngleRange::single(4.0),
            theta_leg: AngleRange::single(95.0),
        },
        ..DatasetConfig::ci()
    };
    let ds = gen_dataset(&cfg, 1).unwrap();
    assert_eq!(ds.len(), 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.tfds");
    ds.save(&path).unwrap();
    assert_eq!(Dataset::load(&path).unwrap(), ds);
    assert_eq!(Dataset::load_header(&path).unwrap(), ds.header);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let cfg = small_config();
    let bytes = |seed| {
        let mut buf = Vec::new();
        gen_dataset(&cfg, seed).unwrap().write_to(&mut buf).unwrap();
        buf
    };
    let a = bytes(5);
    assert_eq!(a, bytes(5));
    assert_ne!(a, bytes(6));
}

#[test]
fn label_noise_is_bounded() {
    let clean = gen_dataset(&small_config(), 2).unwrap();
    let noisy = gen_dataset(
        &DatasetConfig {
            label_noise: true,
            ..small_config()
        },
        2,
    )
    .unwrap();
    let mut moved = false;
    for (a, b) in clean.samples.iter().zip(&noisy.samples) {
        let d = (a.theta_f - b.theta_f).abs();
        assert!(d <= 0.2 + 1e-5);
        moved |= d > 0.0;
        assert_eq!(a.theta_g, b.theta_g);
        assert_eq!(a.field, b.field);
    }
    assert!(moved);
}

#[test]
fn corrupt_files_are_rejected_with_path() {
    let ds = gen_dataset(&small_config(), 3).unwrap();
    let mut buf = Vec::new();
    ds.write_to(&mut buf).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.tfds");
    std::fs::write(&path, &buf[..buf.len() - 3]).unwrap();
    match Dataset::load(&path) {
        Err(Error::Format { path: p, .. }) => assert_eq!(p, path),
        other => panic!("expected format error, got {other:?}"),
    }
    let mut extra = buf.clone();
    extra.push(0);
    assert!(Dataset::read_from(&extra[..]).is_err());
    let mut magic = buf;
    magic[0] = b'X';
    assert!(Dataset::read_from(&magic[..]).is_err());
    assert!(matches!(
        Dataset::load(dir.path().join("missing")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn invalid_configs_are_rejected() {
    let bad_grid = DatasetConfig {
        grid: GridSpec {
            theta_g: AngleRange::new(1.0, 0.0, 1.0),
            theta_leg: AngleRange::single(90.0),
        },
        ..small_config()
    };
    assert!(gen_dataset(&bad_grid, 0).is_err());
    let bad_field = DatasetConfig {
        field_width: 999,
        ..small_config()
    };
    assert!(gen_dataset(&bad_field, 0).is_err());
}

#[test]
fn split_is_disjoint_and_exhaustive() {
    for n in [1usize, 2, 7, 500] {
        let (tr, te) = split_indices(n, 0.8, 9).unwrap();
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
        assert_eq!(te.len(), ((1.0 - 0.8) * n as f64 + 1e-9).floor() as usize);
    }
    let (tr, te) = split_indices(500, 0.8, 0).unwrap();
    assert_eq!((tr.len(), te.len()), (400, 100));
    assert_eq!(split_indices(500, 0.8, 0).unwrap(), (tr, te));
}

#[test]
fn sensor_pattern_matches_dataset_pattern() {
    let cfg = small_config();
    let sensor = TactileSensor::new(&cfg, 5).unwrap();
    let state = tacfoot_core::ScenarioState::in_contact(-3.0, 80.0, &cfg.geometry, &cfg.skin);
    let pooled = sensor
        .pool(&sensor.sense(&state, tacfoot_core::mix_seed(5, 0)).unwrap())
        .unwrap();
    let ds = gen_dataset(&cfg, 5).unwrap();
    assert_eq!(ds.samples[0].field, pooled);
}
