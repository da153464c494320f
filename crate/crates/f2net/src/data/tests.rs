use super::*;

fn small_config(scenario: Scenario) -> DataConfig {
    DataConfig {
        width: 32,
        height: 32,
        frames: 6,
        count: 1,
        scenarios: vec![scenario],
        motion_scale: 1.0,
    }
}

#[test]
fn same_seed_gives_identical_samples() {
    for scenario in Scenario::ALL {
        let cfg = small_config(scenario);
        let a = gen_sequence(scenario, &cfg, 42, "s").unwrap();
        let b = gen_sequence(scenario, &cfg, 42, "s").unwrap();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            assert_eq!(fa.data, fb.data);
        }
        for (ma, mb) in a.masks.iter().zip(&b.masks) {
            assert_eq!(ma.data, mb.data);
        }
        assert_eq!(a.centers, b.centers);
    }
}

#[test]
fn static_plain_object_keeps_mask_constant() {
    let mut cfg = small_config(Scenario::Plain);
    cfg.motion_scale = 0.0;
    let sample = gen_sequence(Scenario::Plain, &cfg, 7, "static").unwrap();
    for mask in &sample.masks[1..] {
        assert_eq!(mask.data, sample.masks[0].data);
    }
}

#[test]
fn centers_are_mask_centroids_for_all_scenarios() {
    let cfg = DataConfig {
        count: 8,
        ..DataConfig::default()
    };
    let samples = gen_synthetic(&cfg, 11).unwrap();
    assert_eq!(samples.len(), 8);
    for sample in &samples {
        assert_eq!(sample.frames.len(), sample.masks.len());
        assert_eq!(sample.masks.len(), sample.centers.len());
        for (mask, &center) in sample.masks.iter().zip(&sample.centers) {
            assert!(mask.data.iter().any(|&v| v > 0.5), "{}: empty mask", sample.name);
            let (cx, cy) = mask_centroid(mask).unwrap();
            assert!((cx - center.0).abs() <= 0.5);
            assert!((cy - center.1).abs() <= 0.5);
        }
    }
}

#[test]
fn occlusion_masks_exclude_bar_pixels() {
    let cfg = small_config(Scenario::Occlusion);
    let sample = gen_sequence(Scenario::Occlusion, &cfg, 3, "occ").unwrap();
    let w = cfg.width;
    let mut some_frame_occluded = false;
    for (frame, mask) in sample.frames.iter().zip(&sample.masks) {
        for y in 0..cfg.height {
            for x in 0..w {
                // the bar is near-black; masked pixels must not be bar pixels
                if mask.data[y * w + x] > 0.5 {
                    let r = frame.data[(y * w + x) * 3];
                    assert!(r > 0.2, "mask includes occluded pixel at ({x},{y})");
                }
            }
        }
        let area: f64 = mask.data.iter().sum();
        let full_area = sample.masks[0].data.iter().sum::<f64>();
        if area < full_area {
            some_frame_occluded = true;
        }
    }
    assert!(some_frame_occluded, "bar never crossed the object");
}

#[test]
fn similarity_scenario_contains_a_lookalike() {
    let cfg = small_config(Scenario::Similarity);
    let plain = gen_sequence(Scenario::Plain, &cfg, 5, "p").unwrap();
    let sim = gen_sequence(Scenario::Similarity, &cfg, 5, "s").unwrap();
    // same seed, same object; the distractor must change background pixels
    let mut differs_outside_mask = false;
    for ((fp, fs), mask) in plain.frames.iter().zip(&sim.frames).zip(&sim.masks) {
        for y in 0..cfg.height {
            for x in 0..cfg.width {
                if mask.data[y * cfg.width + x] < 0.5
                    && (fp.data[(y * cfg.width + x) * 3] - fs.data[(y * cfg.width + x) * 3]).abs()
                        > 0.05
                {
                    differs_outside_mask = true;
                }
            }
        }
    }
    assert!(differs_outside_mask);
}

#[test]
fn appearance_change_shifts_foreground_color() {
    let cfg = DataConfig {
        frames: 8,
        ..small_config(Scenario::AppearanceChange)
    };
    let sample = gen_sequence(Scenario::AppearanceChange, &cfg, 19, "app").unwrap();
    let mean_fg = |i: usize| {
        let (frame, mask) = (&sample.frames[i], &sample.masks[i]);
        let mut acc = [0.0; 3];
        let mut n = 0.0;
        for p in 0..cfg.width * cfg.height {
            if mask.data[p] > 0.5 {
                for c in 0..3 {
                    acc[c] += frame.data[p * 3 + c];
                }
                n += 1.0;
            }
        }
        [acc[0] / n, acc[1] / n, acc[2] / n]
    };
    let first = mean_fg(0);
    let last = mean_fg(cfg.frames - 1);
    let shift: f64 = first
        .iter()
        .zip(&last)
        .map(|(a, b)| (a - b).abs())
        .sum();
    assert!(shift > 0.02, "foreground color did not change ({shift})");
}

#[test]
fn dataset_round_trip_preserves_masks_and_centers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DataConfig {
        width: 32,
        height: 32,
        frames: 3,
        count: 2,
        scenarios: vec![Scenario::Plain, Scenario::Occlusion],
        motion_scale: 1.0,
    };
    let samples = gen_synthetic(&cfg, 23).unwrap();
    write_dataset(dir.path(), &samples).unwrap();
    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded.len(), samples.len());
    for sample in &samples {
        let back = loaded.iter().find(|s| s.name == sample.name).unwrap();
        for (ma, mb) in sample.masks.iter().zip(&back.masks) {
            assert_eq!(ma.data, mb.data);
        }
        for (&ca, &cb) in sample.centers.iter().zip(&back.centers) {
            assert!((ca.0 - cb.0).abs() < 1e-9 && (ca.1 - cb.1).abs() < 1e-9);
        }
    }
}

#[test]
fn rejects_degenerate_geometry() {
    let cfg = DataConfig {
        width: 8,
        height: 8,
        ..DataConfig::default()
    };
    assert!(gen_synthetic(&cfg, 1).is_err());
    let cfg = DataConfig {
        frames: 0,
        ..DataConfig::default()
    };
    assert!(gen_synthetic(&cfg, 1).is_err());
}
