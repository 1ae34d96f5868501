mod common;

use hybridloc::model::{
    build_axis_matrix, correlation_matrix, remove_dependent_columns, Axis, AxisEstimateMatrix,
    FingerprintDataset, FingerprintRecord, Position, DEFAULT_RANK_TOL,
};
use hybridloc::sim::{generate_corridor_dataset, CorridorConfig};
use hybridloc::Error;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn hallway_matrix_matches_simulator_rows() {
    let cfg = CorridorConfig {
        grid_step: 1.0,
        seed: 7,
        ..Default::default()
    };
    let ds = generate_corridor_dataset(&cfg).unwrap();
    assert_eq!(ds.len(), 61);
    let u = build_axis_matrix(&ds, Axis::X).unwrap();
    assert_eq!((u.num_fingerprints(), u.num_technologies()), (61, 3));
    for (j, rec) in ds.records().iter().enumerate() {
        assert_eq!(u.truth[j], rec.true_position.x);
        for i in 0..3 {
            assert_eq!(u.entries[(j, i)], rec.estimates[i].x);
        }
    }
}

#[test]
fn dependent_column_is_found_by_elimination() {
    let mut r = common::rng(11);
    let mut columns: Vec<Vec<f64>> = (0..3).map(|_| (0..8).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    columns.push((0..8).map(|j| 0.5 * columns[0][j] + 0.5 * columns[1][j]).collect());
    assert_eq!(common::gram_rank(&columns, 1e-10), 3);
    assert_eq!(common::gram_rank(&columns[..3], 1e-10), 3);

    let rows: Vec<Vec<f64>> = (0..8).map(|j| columns.iter().map(|c| c[j]).collect()).collect();
    let u = AxisEstimateMatrix::from_rows(Axis::X, &rows, &[0.0; 8]).unwrap();
    let (kept, removed) = remove_dependent_columns(&u, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(removed, [3]);
    assert_eq!(kept.columns, [0, 1, 2]);
    assert!(correlation_matrix(&kept).is_positive_definite());
    assert!(correlation_matrix(&u).min_eigenvalue().abs() < 1e-12);
}

#[test]
fn all_zero_matrix_is_degenerate() {
    let u = AxisEstimateMatrix::from_rows(Axis::Y, &vec![vec![0.0, 0.0]; 3], &[1.0, 2.0, 3.0]).unwrap();
    assert!(matches!(remove_dependent_columns(&u, DEFAULT_RANK_TOL), Err(Error::DegenerateInput(_))));
}

#[test]
fn empty_dataset_is_rejected() {
    assert!(FingerprintDataset::new(vec!["a".into()], vec![]).is_err());
    assert!(FingerprintDataset::new(vec![], vec![]).is_err());
}

fn random_dataset() -> impl Strategy<Value = FingerprintDataset> {
    (1usize..5, 1usize..12).prop_flat_map(|(n, m)| {
        prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3 * (n + 1)), m).prop_map(move |rows| {
            let records = rows
                .iter()
                .enumerate()
                .map(|(j, v)| FingerprintRecord {
                    point_id: format!("r{j}"),
                    true_position: Position::new(v[0], v[1], v[2]),
                    estimates: (0..n).map(|i| Position::new(v[3 + 3 * i], v[4 + 3 * i], v[5 + 3 * i])).collect(),
                })
                .collect();
            FingerprintDataset::new((0..n).map(|i| format!("t{i}")).collect(), records).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn axis_matrices_round_trip(ds in random_dataset()) {
        let axes = [
            build_axis_matrix(&ds, Axis::X).unwrap(),
            build_axis_matrix(&ds, Axis::Y).unwrap(),
            build_axis_matrix(&ds, Axis::Z).unwrap(),
        ];
        let ids = ds.records().iter().map(|r| r.point_id.clone()).collect();
        let back = FingerprintDataset::from_axis_matrices(ds.technologies().to_vec(), ids, &axes).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn correlation_is_positive_semidefinite(ds in random_dataset(), x in prop::collection::vec(-1.0f64..1.0, 4)) {
        let u = build_axis_matrix(&ds, Axis::X).unwrap();
        let c = correlation_matrix(&u);
        prop_assert!(c.is_symmetric(1e-12));
        let n = u.num_technologies();
        let x = &x[..n];
        let quad: f64 = (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).map(|(i, k)| x[i] * c.0[(i, k)] * x[k]).sum();
        let ux: f64 = (0..u.num_fingerprints())
            .map(|j| (0..n).map(|i| u.entries[(j, i)] * x[i]).sum::<f64>().powi(2))
            .sum();
        prop_assert!(quad >= -1e-9 * (1.0 + ux));
        prop_assert!((quad - ux).abs() <= 1e-9 * (1.0 + ux));
    }

    #[test]
    fn hygiene_leaves_full_rank(ds in random_dataset()) {
        let u = build_axis_matrix(&ds, Axis::X).unwrap();
        let (kept, removed) = remove_dependent_columns(&u, DEFAULT_RANK_TOL).unwrap();
        prop_assert!(correlation_matrix(&kept).is_positive_definite());
        prop_assert_eq!(kept.columns.len() + removed.len(), u.num_technologies());
        prop_assert!(kept.columns.windows(2).all(|w| w[0] < w[1]));
    }
}
