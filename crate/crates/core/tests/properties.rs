use blindmap::io::{load_blindness_map, save_blindness_map};
use blindmap::metrics::{accuracy, binarize, binarize_plane, mae_mse, BinaryMap};
use blindmap::pipeline::{split_dataset, DatasetManifest, SampleRecord, Split};
use blindmap::{fill_depth, BlindnessMap, BlindnessType, DepthMap, Plane};
use proptest::prelude::*;

fn map_strategy() -> impl Strategy<Value = BlindnessMap> {
    (1usize..12, 1usize..12).prop_flat_map(|(h, w)| {
        prop::collection::vec(0.0f32..=1.0, h * w).prop_map(move |d| BlindnessMap::from_vec(h, w, d).unwrap())
    })
}

/// Values on a 1/1024 grid so affine maps with dyadic coefficients are exact.
fn dyadic_plane() -> impl Strategy<Value = Plane> {
    (2usize..10, 2usize..10).prop_flat_map(|(h, w)| {
        prop::collection::vec(0u32..=1024, h * w)
            .prop_map(move |k| Plane::from_vec(h, w, k.into_iter().map(|k| k as f32 / 1024.0).collect()).unwrap())
    })
}

fn sparse_depth() -> impl Strategy<Value = DepthMap> {
    (1usize..10, 1usize..10).prop_flat_map(|(h, w)| {
        prop::collection::vec(prop_oneof![Just(0.0f32), 1.0f32..80.0], h * w)
            .prop_filter("needs one valid pixel", |d| d.iter().any(|&v| v > 0.0))
            .prop_map(move |d| DepthMap::from_raw(h, w, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blindness_map_png_round_trip(map in map_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        save_blindness_map(&map, &p).unwrap();
        let back = load_blindness_map(&p).unwrap();
        prop_assert_eq!(back.dims(), map.dims());
        for (a, b) in map.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
        }
    }

    #[test]
    fn fill_depth_is_idempotent_and_keeps_valid_pixels(d in sparse_depth()) {
        let once = fill_depth(&d).unwrap();
        prop_assert!(once.is_dense());
        for (i, &v) in d.depths().iter().enumerate() {
            if v > 0.0 {
                prop_assert_eq!(once.depths()[i], v);
            }
        }
        prop_assert_eq!(fill_depth(&once).unwrap(), once);
    }

    #[test]
    fn binarize_is_invariant_under_increasing_affine_maps(
        p in dyadic_plane(),
        j in -3i32..=3,
        b in -1024i32..=1024,
        alpha in 0.05f32..0.95,
    ) {
        let a = 2f32.powi(j);
        let q = p.map(|v| a * v + b as f32 / 1024.0);
        prop_assert_eq!(binarize_plane(&q, alpha), binarize_plane(&p, alpha));
    }

    #[test]
    fn mse_never_exceeds_mae(pair in (1usize..10, 1usize..10).prop_flat_map(|(h, w)| (
        prop::collection::vec(0.0f32..=1.0, h * w).prop_map(move |d| BlindnessMap::from_vec(h, w, d).unwrap()),
        prop::collection::vec(0.0f32..=1.0, h * w).prop_map(move |d| BlindnessMap::from_vec(h, w, d).unwrap()),
    ))) {
        let (mae, mse) = mae_mse(&pair.0, &pair.1).unwrap();
        prop_assert!((0.0..=1.0).contains(&mae));
        prop_assert!(mse <= mae + 1e-12);
    }

    #[test]
    fn accuracy_of_prediction_and_complement_sums_to_one(
        bits in (1usize..10, 1usize..10).prop_flat_map(|(h, w)| (
            Just((h, w)),
            prop::collection::vec(any::<bool>(), h * w),
            prop::collection::vec(any::<bool>(), h * w),
        ))
    ) {
        let ((h, w), p, g) = bits;
        let p = BinaryMap::new(h, w, p).unwrap();
        let g = BinaryMap::new(h, w, g).unwrap();
        let s = accuracy(&p, &g).unwrap() + accuracy(&p.complement(), &g).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_counts_are_within_one_of_ratio(
        n in prop::array::uniform4(1usize..60),
        ratio in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let mut m = DatasetManifest::default();
        for (t, &count) in BlindnessType::ALL.iter().zip(&n) {
            for i in 0..count {
                m.records.push(SampleRecord {
                    id: format!("{}_{i:06}", t.name()),
                    blindness_type: *t,
                    clean_path: "c.png".into(),
                    degraded_path: "d.png".into(),
                    gt_map_path: "g.png".into(),
                    aux_mask_path: None,
                    params: Default::default(),
                    split: Split::Train,
                });
            }
        }
        let s = split_dataset(&m, ratio, seed).unwrap();
        prop_assert_eq!(&s, &split_dataset(&m, ratio, seed).unwrap());
        for (t, &count) in BlindnessType::ALL.iter().zip(&n) {
            let (train, test) = s.split_counts(*t);
            prop_assert_eq!(train + test, count);
            prop_assert!((train as f64 - ratio * count as f64).abs() <= 1.0);
            prop_assert!(train as f64 >= ratio * count as f64 - 1e-9);
        }
    }
}

#[test]
fn constant_maps_binarize_to_nothing() {
    let m = BlindnessMap::new(Plane::filled(4, 4, 0.3)).unwrap();
    assert_eq!(binarize(&m, 0.455).count_ones(), 0);
}
