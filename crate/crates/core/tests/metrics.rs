mod common;

use common::rng;
use proptest::prelude::*;
use radmm_core::metrics::{detect_peaks, encode_csv, encode_pgm, gray_levels};
use radmm_core::{
    backprojection_image, export_image, image_entropy, make_uniform_clusters,
    normalized_sparsity, read_image_csv, support_f1, EntropyConfig, ImageFormat, RandomScene,
    SceneGrid, SimScenario,
};
use rand::Rng;

/// Pixel value whose gray level is `g` under the peak-relative dB mapping
/// (bin center in dB; the top level is the peak itself).
fn value_for_level(g: usize, cfg: &EntropyConfig) -> f64 {
    let top = (cfg.gray_levels - 1) as f64;
    if g == cfg.gray_levels - 1 {
        return 1.0;
    }
    let db = (g as f64 + 0.5) / top * cfg.dynamic_range_db - cfg.dynamic_range_db;
    10f64.powf(db / 20.0)
}

#[test]
fn uniform_gray_image_has_nearly_eight_bits() {
    let cfg = EntropyConfig::default();
    let mut r = rng(1);
    let mut img: Vec<f64> = (0..1024 * 1024)
        .map(|_| value_for_level(r.gen_range(0..256), &cfg))
        .collect();
    img[0] = 1.0;
    let levels = gray_levels(&img, &cfg).unwrap();
    let mut hist = [0usize; 256];
    levels.iter().for_each(|&g| hist[g] += 1);
    assert!(hist.iter().all(|&c| c > 0));
    let h = image_entropy(&img, &cfg).unwrap();
    assert!(h >= 7.9 && h <= 8.0, "entropy {h}");
}

#[test]
fn entropy_is_scale_invariant_on_random_images() {
    let cfg = EntropyConfig::default();
    let mut r = rng(2);
    for _ in 0..20 {
        let img: Vec<f64> = (0..4096).map(|_| r.gen_range(0.0..1.0f64).powi(4)).collect();
        let h = image_entropy(&img, &cfg).unwrap();
        for alpha in [0.25, 2.0, 1024.0, 3.0, 0.1, 7.5e3] {
            let scaled: Vec<f64> = img.iter().map(|v| v * alpha).collect();
            assert_eq!(image_entropy(&scaled, &cfg).unwrap(), h, "alpha {alpha}");
        }
    }
}

#[test]
fn exported_files_match_encoders_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let grid = SceneGrid::new(3, 2, 1.0, 1.0).unwrap();
    let img = [0.0, 0.5, 1.0, 1e-3, 0.25, 0.125];
    let cfg = EntropyConfig::default();
    let csv = dir.path().join("img.csv");
    let pgm = dir.path().join("img.pgm");
    export_image(&img, &grid, &csv, ImageFormat::Csv, &cfg).unwrap();
    export_image(&img, &grid, &pgm, ImageFormat::Pgm, &cfg).unwrap();
    assert_eq!(std::fs::read(&pgm).unwrap(), encode_pgm(&img, 3, 2, &cfg).unwrap());
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), encode_csv(&img, 3, 2).unwrap());
    let (back, nx, ny) = read_image_csv(&csv).unwrap();
    assert_eq!((back.as_slice(), nx, ny), (&img[..], 3, 2));

    let missing = dir.path().join("nope/img.csv");
    let err = export_image(&img, &grid, &missing, ImageFormat::Csv, &cfg).unwrap_err();
    assert!(err.to_string().contains("nope"));
}

/// Independent NMS + greedy matching written directly from the definition.
fn brute_force_f1(img: &[f64], grid: &SceneGrid, truth: &[usize], t: f64, r: usize) -> (usize, usize) {
    let peak = img.iter().copied().fold(0.0, f64::max);
    let dist = |a: usize, b: usize| {
        let (ax, ay) = (a % grid.nx, a / grid.nx);
        let (bx, by) = (b % grid.nx, b / grid.nx);
        ax.abs_diff(bx).max(ay.abs_diff(by))
    };
    let mut det: Vec<usize> = (0..img.len())
        .filter(|&i| img[i] > t * peak)
        .filter(|&i| {
            (0..img.len()).all(|j| {
                j == i || dist(i, j) > r || img[j] < img[i] || (img[j] == img[i] && j > i)
            })
        })
        .collect();
    det.sort_by(|&a, &b| img[b].partial_cmp(&img[a]).unwrap().then(a.cmp(&b)));
    let mut free: Vec<usize> = truth.to_vec();
    let mut matched = 0;
    for d in &det {
        let mut best: Option<(usize, usize)> = None;
        for (k, &tp) in free.iter().enumerate() {
            let dd = dist(*d, tp);
            if dd <= r && best.map_or(true, |(bd, bk)| (dd, tp) < (bd, free[bk])) {
                best = Some((dd, k));
            }
        }
        if let Some((_, k)) = best {
            free.remove(k);
            matched += 1;
        }
    }
    (det.len(), matched)
}

#[test]
fn backprojection_f1_matches_brute_force_oracle() {
    let grid = SceneGrid::new(32, 32, 7.0, 7.0).unwrap();
    let clusters =
        make_uniform_clusters(8, 2f64.to_radians(), 4, 30f64.to_radians(), 9.6e9, 600e6, 8)
            .unwrap();
    let scene = RandomScene {
        count: 10,
        amplitude: 1.0,
        min_separation_px: 3,
        margin_px: 2,
        visibility_width: std::f64::consts::TAU,
    }
    .generate(&grid, 42)
    .unwrap();
    let sim = SimScenario::new(grid.clone(), clusters, scene, 15.0, 42).unwrap();
    let ops = sim.operators().unwrap();
    let ys: Vec<_> = sim
        .synthesize_with(&ops)
        .unwrap()
        .into_iter()
        .map(|p| p.samples)
        .collect();
    let bp = backprojection_image(&ops, &ys).unwrap();
    let truth = sim.truth_support();
    for (t, r) in [(0.1, 1), (0.3, 1), (0.5, 2), (0.2, 0)] {
        let s = support_f1(&bp, &grid, &truth, t, r).unwrap();
        let (det, matched) = brute_force_f1(&bp, &grid, &truth, t, r);
        assert_eq!((s.detections, s.matched), (det, matched), "t={t} r={r}");
        let p = matched as f64 / det.max(1) as f64;
        let rc = matched as f64 / truth.len() as f64;
        assert!((s.precision - p).abs() < 1e-15 && (s.recall - rc).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn entropy_within_bounds(img in prop::collection::vec(0.0..10.0f64, 1..200), levels in 2usize..300) {
        let cfg = EntropyConfig { dynamic_range_db: 40.0, gray_levels: levels };
        let h = image_entropy(&img, &cfg).unwrap();
        prop_assert!(h >= 0.0 && h <= (levels as f64).log2() + 1e-12);
    }

    #[test]
    fn sparsity_non_increasing_in_threshold(img in prop::collection::vec(0.0..10.0f64, 1..200)) {
        let mut last = f64::INFINITY;
        for k in 0..10 {
            let s = normalized_sparsity(&img, k as f64 / 10.0);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= last);
            last = s;
        }
    }

    #[test]
    fn f1_invariant_to_power_of_two_scaling(
        img in prop::collection::vec(0.0..1.0f64, 64),
        truth in prop::collection::btree_set(0usize..64, 1..6),
        e in -20i32..20,
    ) {
        let grid = SceneGrid::new(8, 8, 1.0, 1.0).unwrap();
        let truth: Vec<usize> = truth.into_iter().collect();
        let alpha = 2f64.powi(e);
        let scaled: Vec<f64> = img.iter().map(|v| v * alpha).collect();
        let a = support_f1(&img, &grid, &truth, 0.3, 1).unwrap();
        let b = support_f1(&scaled, &grid, &truth, 0.3, 1).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(
            detect_peaks(&img, &grid, 0.3, 1).unwrap(),
            detect_peaks(&scaled, &grid, 0.3, 1).unwrap()
        );
    }
}
