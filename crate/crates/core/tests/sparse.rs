use std::collections::BTreeMap;

use dwr_core::sparse::{
    apply_dirichlet, cg_solve, condense_hanging, ConstraintSet, DenseVector, LinAlgError,
    SolverControl, SparseMatrix,
};
use proptest::prelude::*;

fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// `B^T B + n I` from arbitrary entries, so always SPD.
fn spd_from(n: usize, entries: &[f64]) -> Vec<Vec<f64>> {
    let b = |i: usize, j: usize| entries[(i * n + j) % entries.len()];
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = (0..n).map(|k| b(k, i) * b(k, j)).sum::<f64>();
        }
        a[i][i] += n as f64;
    }
    a
}

fn to_sparse(a: &[Vec<f64>]) -> SparseMatrix {
    let n = a.len();
    let t: Vec<_> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| a[i][j] != 0.0)
        .map(|(i, j)| (i, j, a[i][j]))
        .collect();
    SparseMatrix::from_triplets(n, n, &t).unwrap()
}

proptest! {
    #[test]
    fn triplets_sum_duplicates(
        triplets in prop::collection::vec((0usize..6, 0usize..5, -10.0f64..10.0), 0..40)
    ) {
        let m = SparseMatrix::from_triplets(6, 5, &triplets).unwrap();
        let mut dense = vec![vec![0.0; 5]; 6];
        for &(r, c, v) in &triplets {
            dense[r][c] += v;
        }
        for r in 0..6 {
            for c in 0..5 {
                prop_assert!((m.get(r, c) - dense[r][c]).abs() < 1e-12);
            }
            prop_assert!(m.pattern().row(r).windows(2).all(|w| w[0] < w[1]));
        }
        let x: Vec<f64> = (0..5).map(|i| i as f64 - 2.0).collect();
        let y = m.spmv(&DenseVector::from_vec(x.clone())).unwrap();
        for (a, b) in y.0.iter().zip(dense_mul(&dense, &x)) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_solves_spd_systems(
        n in 1usize..12,
        entries in prop::collection::vec(-1.0f64..1.0, 1..50),
        rhs in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        let a = spd_from(n, &entries);
        let b = DenseVector::from_vec(rhs[..n].to_vec());
        let ctrl = SolverControl { relative_tolerance: 1e-13, ..Default::default() };
        let (x, _) = cg_solve(&to_sparse(&a), &b, &ctrl).unwrap();
        let r = dense_mul(&a, &x.0);
        for i in 0..n {
            prop_assert!((r[i] - b[i]).abs() <= 1e-10 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn dirichlet_elimination_keeps_free_equations(
        n in 2usize..10,
        entries in prop::collection::vec(-1.0f64..1.0, 1..40),
        fixed in prop::collection::btree_map(0usize..10, -3.0f64..3.0, 1..4),
    ) {
        let a = spd_from(n, &entries);
        let fixed: BTreeMap<usize, f64> = fixed.into_iter().filter(|(d, _)| *d < n).collect();
        prop_assume!(!fixed.is_empty() && fixed.len() < n);
        let b0: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut m = to_sparse(&a);
        let mut b = DenseVector::from_vec(b0.clone());
        apply_dirichlet(&mut m, &mut b, &fixed).unwrap();
        prop_assert!(m.relative_asymmetry() < 1e-14);
        let ctrl = SolverControl { relative_tolerance: 1e-13, ..Default::default() };
        let (x, _) = cg_solve(&m, &b, &ctrl).unwrap();
        for (&d, &g) in &fixed {
            prop_assert!((x[d] - g).abs() < 1e-12);
        }
        let r = dense_mul(&a, &x.0);
        for i in (0..n).filter(|i| !fixed.contains_key(i)) {
            prop_assert!((r[i] - b0[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn out_of_range_triplet_is_rejected() {
    let err = SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).unwrap_err();
    assert!(matches!(err, LinAlgError::IndexOutOfRange { row: 2, .. }));
}

#[test]
fn spmv_dimension_mismatch() {
    let m = SparseMatrix::identity(3);
    assert!(m.spmv(&DenseVector::zeros(2)).is_err());
}

#[test]
fn add_scaled_merges_patterns() {
    let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0)]).unwrap();
    let b = SparseMatrix::from_triplets(2, 2, &[(0, 1, 3.0), (1, 1, 1.0)]).unwrap();
    let c = a.add_scaled(2.0, &b).unwrap();
    assert_eq!(c.to_dense(), vec![vec![1.0, 6.0], vec![0.0, 4.0]]);
}

#[test]
fn cg_reports_non_convergence() {
    let a = to_sparse(&spd_from(8, &[0.3, -0.7, 0.9, 0.1, 0.5]));
    let b = DenseVector::from_vec(vec![1.0; 8]);
    let ctrl = SolverControl {
        max_iterations: 1,
        relative_tolerance: 1e-15,
        absolute_tolerance: 0.0,
    };
    assert!(matches!(cg_solve(&a, &b, &ctrl), Err(LinAlgError::NotConverged { .. })));
}

#[test]
fn condensed_system_matches_reduced_system() {
    // x1 = (x0 + x2) / 2 on a 1d Laplacian plus mass
    let a = vec![
        vec![3.0, -1.0, 0.0, 0.0],
        vec![-1.0, 3.0, -1.0, 0.0],
        vec![0.0, -1.0, 3.0, -1.0],
        vec![0.0, 0.0, -1.0, 3.0],
    ];
    let b = vec![1.0, 2.0, -1.0, 0.5];
    let mut c = ConstraintSet::new();
    c.add_line(1, vec![(0, 0.5), (2, 0.5)], 0.0);
    c.close().unwrap();
    let mut m = to_sparse(&a);
    let mut rhs = DenseVector::from_vec(b.clone());
    condense_hanging(&mut m, &mut rhs, &c).unwrap();
    let ctrl = SolverControl { relative_tolerance: 1e-15, ..Default::default() };
    let (mut x, _) = cg_solve(&m, &rhs, &ctrl).unwrap();
    c.distribute(&mut x.0);

    // reduced oracle: x = T y with y = (x0, x2, x3); solve T^T A T y = T^T b
    let t = [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut r = vec![vec![0.0; 3]; 3];
    let mut rb = vec![0.0; 3];
    for p in 0..3 {
        for i in 0..4 {
            rb[p] += t[i][p] * b[i];
            for q in 0..3 {
                for j in 0..4 {
                    r[p][q] += t[i][p] * a[i][j] * t[j][q];
                }
            }
        }
    }
    let (y, _) = cg_solve(&to_sparse(&r), &DenseVector::from_vec(rb), &ctrl).unwrap();
    let expect = [y[0], 0.5 * (y[0] + y[1]), y[1], y[2]];
    for i in 0..4 {
        assert!((x[i] - expect[i]).abs() < 1e-12, "{i}: {} vs {}", x[i], expect[i]);
    }
}

#[test]
fn chained_constraints_are_resolved_by_close() {
    let mut c = ConstraintSet::new();
    c.add_line(2, vec![(1, 0.5), (3, 0.5)], 0.0);
    c.add_line(1, vec![(0, 1.0)], 1.0);
    c.close().unwrap();
    let mut x = vec![2.0, 0.0, 0.0, 4.0];
    c.distribute(&mut x);
    assert_eq!(x[1], 3.0);
    assert_eq!(x[2], 3.5);
}
