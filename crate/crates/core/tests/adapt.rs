use std::sync::Arc;

use dwr_core::adapt::{
    compute_marks, execute_adaptation, mark_largest, AdaptParams, AdaptationMarks,
};
use dwr_core::mesh::{QuadMesh, RefinementMarks};
use dwr_core::slab::{SlabList, StorageTag};
use dwr_core::sparse::DenseVector;
use proptest::prelude::*;

proptest! {
    #[test]
    fn marks_are_the_largest_values(
        values in prop::collection::vec(0.0f64..10.0, 0..30),
        theta in 0.0f64..=1.0,
    ) {
        let marked = mark_largest(&values, theta, false);
        let expected = (theta * values.len() as f64).ceil() as usize;
        prop_assert_eq!(marked.len(), expected);
        for &m in &marked {
            for u in (0..values.len()).filter(|u| !marked.contains(u)) {
                prop_assert!(values[m] > values[u] || (values[m] == values[u] && m < u));
            }
        }
    }

    #[test]
    fn skipping_zeros_only_removes_zeros(
        values in prop::collection::vec(prop_oneof![Just(0.0f64), 0.0f64..5.0], 0..30),
        theta in 0.0f64..=1.0,
    ) {
        let all = mark_largest(&values, theta, false);
        let skipped = mark_largest(&values, theta, true);
        prop_assert!(skipped.is_subset(&all));
        for i in all.difference(&skipped) {
            prop_assert_eq!(values[*i], 0.0);
        }
    }

    #[test]
    fn adaptation_preserves_the_time_partition(
        eta in prop::collection::vec(0.0f64..1.0, 1..8),
        theta in 0.0f64..=1.0,
    ) {
        let n = eta.len();
        let mut slabs = SlabList::uniform(Arc::new(QuadMesh::lshape()), 0.0, 1.25, n, 1, 2).unwrap();
        let params = AdaptParams { theta_tau: theta, ..AdaptParams::default() };
        let indicators: Vec<_> = eta.iter().map(|&e| vec![(0, e), (1, 0.5 * e), (2, 0.0)]).collect();
        let marks = compute_marks(&eta, &indicators, &params);
        execute_adaptation(&mut slabs, &marks).unwrap();
        prop_assert_eq!(slabs.len(), n + marks.time.len());
        prop_assert!(slabs.is_partition());
        prop_assert!((slabs.total_time() - 1.25).abs() < 1e-13);
    }
}

#[test]
fn space_marks_use_theta_h2_on_time_marked_slabs() {
    let params = AdaptParams {
        theta_tau: 0.5,
        theta_h1: 0.25,
        theta_h2: 1.0,
        ..AdaptParams::default()
    };
    let cells = vec![(0, 1.0), (1, 2.0), (2, 3.0), (3, 4.0)];
    let marks = compute_marks(&[1.0, 5.0], &[cells.clone(), cells], &params);
    assert_eq!(marks.time.into_iter().collect::<Vec<_>>(), vec![1]);
    assert_eq!(marks.space[0].cells.iter().copied().collect::<Vec<_>>(), vec![3]);
    assert_eq!(marks.space[1].len(), 4);
}

#[test]
fn split_halves_inherit_the_refined_mesh() {
    let mut slabs = SlabList::uniform(Arc::new(QuadMesh::lshape()), 0.0, 1.0, 3, 1, 2).unwrap();
    for s in slabs.slabs_mut() {
        s.attach_storage(StorageTag::GoalNormContribution, DenseVector::zeros(1)).unwrap();
    }
    let marks = AdaptationMarks {
        time: [0, 2].into_iter().collect(),
        space: vec![
            RefinementMarks::from_cells([0]),
            RefinementMarks::new(),
            RefinementMarks::from_cells([1, 2]),
        ],
    };
    execute_adaptation(&mut slabs, &marks).unwrap();
    let cells: Vec<usize> = slabs.slabs().iter().map(|s| s.mesh().n_active_cells()).collect();
    assert_eq!(cells, vec![6, 6, 3, 9, 9]);
    let taus: Vec<f64> = slabs.slabs().iter().map(|s| s.tau()).collect();
    let third = 1.0 / 3.0;
    for (t, e) in taus.iter().zip([third / 2.0, third / 2.0, third, third / 2.0, third / 2.0]) {
        assert!((t - e).abs() < 1e-15);
    }
    assert!(slabs
        .slabs()
        .iter()
        .all(|s| s.fetch_storage(StorageTag::GoalNormContribution).is_none()));
}

#[test]
fn default_parameters_are_valid_and_ranges_are_checked() {
    assert!(AdaptParams::default().validate().is_ok());
    let bad = AdaptParams {
        theta_h1: 1.5,
        ..AdaptParams::default()
    };
    assert!(bad.validate().is_err());
    let bad = AdaptParams {
        max_loops: 0,
        ..AdaptParams::default()
    };
    assert!(bad.validate().is_err());
}
