//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.

mod common;

use std::time::Instant;

use blindmap::defocus::{render_defocus, CocModel};
use blindmap::flow::{dense_flow, FlowParams};
use blindmap::haze::{
    estimate_atmospheric_light, estimate_haze_amount, haze_ground_truth, invert_haze, synthesize_haze,
    transmission_from_depth, AtmosphericLight, HazeParams,
};
use blindmap::metrics::{
    accuracy, accuracy_variance, binarization_threshold, binarize, binarize_plane, f_measure, fuse_maps, mae_mse,
    measure_fps, miou, score_sample, BinaryMap, DEFAULT_ALPHA,
};
use blindmap::motion::{synthesize_motion_sample, DEFAULT_AUX_THRESHOLD, DEFAULT_V_MAX};
use blindmap::pipeline::{build_dataset, split_dataset, DatasetManifest, SampleRecord, Split};
use blindmap::scene::{textured_frame, toy_scene};
use blindmap::{BlindnessMap, BlindnessType, DepthMap, Plane, RasterImage};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn haze_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
    let mut worst = 0.0f32;
    for i in 0..50 {
        let scene = toy_scene(96, 128, i, 0.0);
        let beta = rng.random_range(0.01f32..0.1);
        let a = AtmosphericLight::new([0.0; 3].map(|_| rng.random_range(0.7f32..=1.0))).map_err(err)?;
        let t = transmission_from_depth(&scene.depth, beta).map_err(err)?;
        let hazy = synthesize_haze(&scene.image, &t, a).map_err(err)?;
        let j = invert_haze(&hazy, &t, a, 0.0).map_err(err)?;
        for (p, &tp) in t.data().iter().enumerate() {
            if tp > 0.05 {
                for c in 0..3 {
                    worst = worst.max((j[p * 3 + c] - scene.image.data()[p * 3 + c]).abs());
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst < 1e-4, format!("max error {worst:.2e}"))?;
    ensure(secs < 10.0, format!("took {secs:.1} s"))?;
    Ok(format!("50 images, max error {worst:.2e} where t > 0.05, {secs:.2} s"))
}

fn dcp_closed_loop() -> Outcome {
    let start = Instant::now();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
    let params = HazeParams::default();
    let mut total = 0.0;
    for i in 0..20 {
        let scene = toy_scene(120, 160, 1000 + i, 0.0);
        let beta = rng.random_range(0.01f32..=0.1);
        let a = estimate_atmospheric_light(&scene.image).map_err(err)?;
        let t = transmission_from_depth(&scene.depth, beta).map_err(err)?;
        let hazy = synthesize_haze(&scene.image, &t, a).map_err(err)?;
        let est = estimate_haze_amount(&hazy, &params).map_err(err)?;
        total += mae_mse(&est, &haze_ground_truth(&t)).map_err(err)?.0;
    }
    let mae = total / 20.0;
    let secs = start.elapsed().as_secs_f64();
    ensure(mae < 0.15, format!("MAE {mae:.4}"))?;
    ensure(secs < 30.0, format!("took {secs:.1} s"))?;
    Ok(format!("20 scenes, MAE {mae:.4}, {secs:.2} s"))
}

/// Uniform disk over integer offsets with i² + j² <= ((d - 1) / 2)², borders replicated.
fn disk_oracle(img: &RasterImage, d: usize) -> RasterImage {
    let r = (d as i64 - 1) / 2;
    let offsets: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|i| (-r..=r).map(move |j| (i, j)))
        .filter(|&(i, j)| 4 * (i * i + j * j) <= (d as i64 - 1).pow(2))
        .collect();
    let (h, w) = img.dims();
    RasterImage::from_fn(h, w, img.channels(), |y, x, c| {
        let s: f64 = offsets
            .iter()
            .map(|&(i, j)| {
                let yy = (y as i64 + i).clamp(0, h as i64 - 1) as usize;
                let xx = (x as i64 + j).clamp(0, w as i64 - 1) as usize;
                img.get(yy, xx, c) as f64
            })
            .sum();
        (s / offsets.len() as f64) as f32
    })
    .unwrap()
}

fn defocus_oracles() -> Outcome {
    let img = textured_frame(48, 40, 5, 0.0, 0.0);
    let varied = DepthMap::from_fn(48, 40, |y, x| 2.0 + ((y * 5 + x * 3) % 40) as f32);
    let sharp = CocModel::new(6.0, 0.0, 31).map_err(err)?;
    let (out, diam) = render_defocus(&img, &varied, &sharp, 16).map_err(err)?;
    ensure(diam.data().iter().all(|&d| d == 0.0), "nonzero diameter with kappa 0")?;
    let id_err = out.max_abs_diff(&img);
    ensure(id_err <= f32::EPSILON, format!("identity error {id_err:.2e}"))?;

    let mut worst = 0.0f32;
    // depth 10 m, focus 5 m: kappa * |1/5 - 1/10| = kappa / 10 pixels.
    for d in [3usize, 5, 9, 15, 21] {
        let flat = DepthMap::from_fn(48, 40, |_, _| 10.0);
        let model = CocModel::new(5.0, 10.0 * d as f32, 31).map_err(err)?;
        let (out, _) = render_defocus(&img, &flat, &model, 16).map_err(err)?;
        worst = worst.max(out.max_abs_diff(&disk_oracle(&img, d)));
    }
    ensure(worst < 1e-5, format!("single-layer error {worst:.2e}"))?;
    Ok(format!(
        "identity error {id_err:.1e}, single-layer max error {worst:.2e} over D in {{3,5,9,15,21}}"
    ))
}

fn flow_accuracy() -> Outcome {
    let shifts = [
        (1.0, 0.0),
        (0.0, 2.0),
        (3.0, 0.0),
        (2.0, 2.0),
        (0.0, -4.0),
        (5.0, 0.0),
        (-3.0, 3.0),
        (1.0, 4.0),
        (4.0, -1.0),
        (2.5, 1.5),
    ];
    let (h, w, margin) = (96, 96, 12);
    let mut worst = 0.0f32;
    for (i, &(dx, dy)) in shifts.iter().enumerate() {
        let f0 = textured_frame(h, w, 20 + i as u64, 0.0, 0.0);
        let f1 = textured_frame(h, w, 20 + i as u64, dx, dy);
        let flow = dense_flow(&f0, &f1, &FlowParams::default()).map_err(err)?;
        let mut epe = Vec::new();
        for y in margin..h - margin {
            for x in margin..w - margin {
                let (u, v) = flow.get(y, x);
                epe.push(((u - dx).powi(2) + (v - dy).powi(2)).sqrt());
            }
        }
        epe.sort_by(f32::total_cmp);
        let median = epe[epe.len() / 2];
        worst = worst.max(median);
    }
    ensure(worst < 0.5, format!("worst median EPE {worst:.3} px"))?;
    Ok(format!("10 images, worst interior median EPE {worst:.3} px"))
}

fn motion_static() -> Outcome {
    let mut worst_img = 0.0f32;
    let mut worst_gt = 0.0f32;
    for seed in 0..3 {
        let f = toy_scene(64, 80, seed, 0.0).image;
        let s = synthesize_motion_sample(&f, &f, &FlowParams::default(), DEFAULT_V_MAX, DEFAULT_AUX_THRESHOLD)
            .map_err(err)?;
        worst_img = worst_img.max(s.blurred.max_abs_diff(&f));
        worst_gt = worst_gt.max(s.ground_truth.plane().min_max().1);
    }
    ensure(worst_img < 1e-3, format!("blur differs from input by {worst_img:.2e}"))?;
    ensure(worst_gt < 0.01, format!("ground truth max {worst_gt:.2e}"))?;
    Ok(format!("blur error {worst_img:.2e}, ground-truth max {worst_gt:.2e}"))
}

fn bm(h: usize, w: usize, bits: &[u8]) -> BinaryMap {
    BinaryMap::from_bits(h, w, bits).unwrap()
}

fn map(h: usize, w: usize, v: &[f32]) -> BlindnessMap {
    BlindnessMap::from_vec(h, w, v.to_vec()).unwrap()
}

fn metric_suite() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    let r = (|| -> blindmap::Result<Vec<(&'static str, bool)>> {
        let mut c = Vec::new();
        let z = map(2, 2, &[0.0; 4]);
        let ones = map(2, 2, &[1.0; 4]);
        let b_mb = map(2, 2, &[0.2, 0.4, 0.6, 0.8]);
        c.push((
            "fuse single source",
            fuse_maps(&b_mb, &ones, 1.0, 0.0, &z, 0.0)? == b_mb,
        ));
        c.push(("fuse zeros", fuse_maps(&z, &z, 0.3, 0.7, &z, 0.0)? == z));
        let f = fuse_maps(
            &map(1, 1, &[0.5]),
            &map(1, 1, &[0.3]),
            0.8,
            0.2,
            &map(1, 1, &[1.0]),
            0.1,
        )?;
        c.push(("fuse scalar 0.56", (f.data()[0] - 0.56).abs() < 1e-6));

        c.push((
            "tau 0.455",
            (binarization_threshold(&map(1, 2, &[0.0, 1.0]), DEFAULT_ALPHA) - 0.455).abs() < 1e-7,
        ));
        c.push((
            "constant binarizes to zeros",
            binarize(&map(2, 2, &[0.4; 4]), DEFAULT_ALPHA).count_ones() == 0,
        ));
        let two = map(1, 2, &[0.2, 0.9]);
        c.push((
            "tau 0.5185",
            (binarization_threshold(&two, DEFAULT_ALPHA) - 0.5185).abs() < 1e-6,
        ));
        c.push(("binarize {0.2,0.9}", binarize(&two, DEFAULT_ALPHA) == bm(1, 2, &[0, 1])));

        let gt = bm(2, 2, &[1, 0, 1, 0]);
        c.push(("accuracy equal", accuracy(&gt, &gt)? == 1.0));
        c.push(("accuracy complement", accuracy(&gt.complement(), &gt)? == 0.0));
        c.push((
            "accuracy one pixel off",
            accuracy(&bm(2, 2, &[1, 1, 1, 0]), &gt)? == 0.75,
        ));

        c.push(("miou equal", miou(&gt, &gt)? == 1.0));
        c.push(("miou all ones", close(miou(&bm(2, 2, &[1, 1, 1, 1]), &gt)?, 0.25)));
        c.push(("miou disjoint", miou(&gt.complement(), &gt)? == 0.0));

        c.push(("f equal", f_measure(&gt, &gt, 1.0)? == 1.0));
        let p = bm(1, 4, &[1, 1, 0, 0]);
        let g = bm(1, 4, &[1, 0, 1, 0]);
        c.push(("f at P = R", close(f_measure(&p, &g, 1.0)?, 0.5)));
        let p = bm(1, 6, &[1, 1, 1, 0, 0, 0]);
        let g = bm(1, 6, &[1, 1, 0, 1, 1, 0]);
        c.push(("f 4/7", close(f_measure(&p, &g, 1.0)?, 4.0 / 7.0)));

        c.push(("mae/mse equal", mae_mse(&b_mb, &b_mb)? == (0.0, 0.0)));
        let (mae, mse) = mae_mse(&map(1, 2, &[0.3, 0.6]), &map(1, 2, &[0.2, 0.5]))?;
        c.push((
            "mae/mse constant 0.1",
            (mae - 0.1).abs() < 1e-6 && (mse - 0.01).abs() < 1e-6,
        ));
        c.push((
            "mae/mse two pixels",
            mae_mse(&map(1, 2, &[0.0, 1.0]), &map(1, 2, &[0.5, 0.5]))? == (0.5, 0.25),
        ));

        c.push(("variance equal", accuracy_variance(&[0.7, 0.7, 0.7])? == 0.0));
        c.push(("variance {0,1}", accuracy_variance(&[0.0, 1.0])? == 0.25));
        c.push((
            "variance {0.8,0.9,1.0}",
            (accuracy_variance(&[0.8, 0.9, 1.0])? - 0.02 / 3.0).abs() < 1e-9,
        ));

        let frames = vec![(); 15];
        let fps = measure_fps(&frames, |_| std::thread::sleep(std::time::Duration::from_millis(10)))?;
        c.push(("fps of 10 ms sleep", (90.0..=110.0).contains(&fps)));
        let tiny = vec![0u8; 20];
        c.push(("fps identity", measure_fps(&tiny, |x| *x)? > 1000.0));
        Ok(c)
    })()
    .map_err(err)?;
    let failed: Vec<_> = r.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    ensure(failed.is_empty(), format!("failed examples: {failed:?}"))?;

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(6);
    for i in 0..1000 {
        let (h, w) = (rng.random_range(2..16), rng.random_range(2..16));
        // Values on a dyadic grid so the rescaled map is computed exactly.
        let p = Plane::from_fn(h, w, |_, _| rng.random_range(0..=1024u32) as f32 / 1024.0);
        let a = 2f32.powi(rng.random_range(-4..=4));
        let b = rng.random_range(-2048..=2048) as f32 / 1024.0;
        let alpha = rng.random_range(0.05f32..0.95);
        let q = p.map(|v| a * v + b);
        ensure(
            binarize_plane(&q, alpha) == binarize_plane(&p, alpha),
            format!("affine invariance broke on map {i}"),
        )?;
    }
    Ok(format!("{} examples exact, affine invariance on 1000 maps", r.len()))
}

fn synthetic_manifest(counts: [usize; 4]) -> DatasetManifest {
    let mut m = DatasetManifest::default();
    for (t, n) in BlindnessType::ALL.into_iter().zip(counts) {
        for i in 0..n {
            m.records.push(SampleRecord {
                id: format!("{}_{i:06}", t.name()),
                blindness_type: t,
                clean_path: format!("clean/{i}.png").into(),
                degraded_path: format!("images/{}_{i:06}.png", t.name()).into(),
                gt_map_path: format!("maps/{}_{i:06}.png", t.name()).into(),
                aux_mask_path: None,
                params: Default::default(),
                split: Split::Train,
            });
        }
    }
    m
}

fn pipeline_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    common::write_corpus(dir.path(), 3);
    build_dataset(&common::config(dir.path(), "a", 2)).map_err(err)?;
    build_dataset(&common::config(dir.path(), "b", 2)).map_err(err)?;
    let a = common::tree_bytes(&dir.path().join("a"));
    let b = common::tree_bytes(&dir.path().join("b"));
    ensure(a.len() > 8 && a == b, "corpora differ")?;

    let m = synthetic_manifest([10_000; 4]);
    let s = split_dataset(&m, 0.98, 0).map_err(err)?;
    for t in BlindnessType::ALL {
        ensure(
            s.split_counts(t) == (9_800, 200),
            format!("{t}: {:?}", s.split_counts(t)),
        )?;
    }
    // Published corpus totals and their reported (train, test) per type.
    let table = [
        (BlindnessType::NoBlindness, 9_997, (9_799, 198)),
        (BlindnessType::Haze, 9_998, (9_798, 200)),
        (BlindnessType::DefocusBlur, 9_998, (9_799, 199)),
        (BlindnessType::MotionBlur, 9_998, (9_799, 199)),
    ];
    let mut counts = [0; 4];
    for &(t, n, _) in &table {
        counts[BlindnessType::ALL.iter().position(|&x| x == t).unwrap()] = n;
    }
    let s = split_dataset(&synthetic_manifest(counts), 0.98, 0).map_err(err)?;
    for (t, _, (train, test)) in table {
        let (a, b) = s.split_counts(t);
        ensure(
            a.abs_diff(train) <= 1 && b.abs_diff(test) <= 1,
            format!("{t}: got {a}/{b}, table {train}/{test}"),
        )?;
    }
    Ok(format!(
        "{} files byte-identical; 10,000/type -> 9,800/200; table totals within 1",
        a.len()
    ))
}

fn throughput() -> Outcome {
    let params = HazeParams::default();
    let mut frames = Vec::new();
    for i in 0..20 {
        let scene = toy_scene(256, 256, 300 + i, 0.0);
        let t = transmission_from_depth(&scene.depth, 0.03).map_err(err)?;
        let a = estimate_atmospheric_light(&scene.image).map_err(err)?;
        frames.push((
            synthesize_haze(&scene.image, &t, a).map_err(err)?,
            haze_ground_truth(&t),
        ));
    }
    let fps = measure_fps(&frames, |(img, gt)| {
        let est = estimate_haze_amount(img, &params).unwrap();
        score_sample(&est, gt, DEFAULT_ALPHA, 1.0).unwrap()
    })
    .map_err(err)?;
    ensure(fps > 30.0, format!("{fps:.1} fps"))?;
    Ok(format!("{fps:.1} fps at 256x256 (haze estimate + scoring)"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("haze round-trip", haze_round_trip),
        ("dark-channel closed loop", dcp_closed_loop),
        ("defocus identity and single-layer oracle", defocus_oracles),
        ("flow accuracy", flow_accuracy),
        ("motion static scene", motion_static),
        ("metric unit suite", metric_suite),
        ("pipeline determinism and split", pipeline_determinism),
        ("throughput", throughput),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
