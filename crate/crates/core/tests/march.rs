use std::collections::BTreeSet;
use std::sync::Arc;

use dwr_core::adapt::initial_mesh;
use dwr_core::dual::{
    assemble_goal_density, assemble_goal_rhs, march_backward, GoalContext,
};
use dwr_core::error::DwrError;
use dwr_core::estimator::{accumulate, estimate_slabs, TemporalRestriction};
use dwr_core::fe::{assemble_mass, assemble_stiffness, FeFunction};
use dwr_core::goal::{for_each_control_point, GoalQuadrature};
use dwr_core::mesh::{BoundaryColor, Point, QuadMesh, RefinementMarks};
use dwr_core::primal::{goal_norm, march_forward, GoalSpec};
use dwr_core::problem::{Coefficients, ControlVolume, ProblemData, RotatingCone};
use dwr_core::slab::{SlabList, StorageTag, TimeInterval};
use dwr_core::sparse::{DenseVector, SolverControl};

fn tight() -> SolverControl {
    SolverControl {
        max_iterations: 20_000,
        relative_tolerance: 1e-14,
        absolute_tolerance: 1e-16,
    }
}

fn solved(mesh: QuadMesh, n: usize) -> (SlabList, f64) {
    let p = RotatingCone::default();
    let cv = ControlVolume::default();
    let gq = GoalQuadrature::default();
    let mut slabs = SlabList::uniform(Arc::new(mesh), 0.0, 1.25, n, 1, 2).unwrap();
    let goal = GoalSpec {
        control_volume: &cv,
        quadrature: &gq,
    };
    march_forward(&mut slabs, &p, Some(goal), &tight()).unwrap();
    let norm = goal_norm(&slabs).unwrap();
    (slabs, norm)
}

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

#[test]
fn dual_steps_match_a_dense_solve() {
    let (mut slabs, norm) = solved(initial_mesh(1).unwrap(), 5);
    let p = RotatingCone::default();
    let cv = ControlVolume::default();
    let gq = GoalQuadrature::default();
    let ctx = GoalContext {
        control_volume: &cv,
        quadrature: &gq,
        problem: &p,
        norm,
    };
    march_backward(&mut slabs, &ctx, &tight()).unwrap();

    let c = p.coefficients;
    let mut z_next = vec![0.0; slabs.slabs()[0].dual_space().n_dofs()];
    for k in (0..slabs.len()).rev() {
        let slab = &slabs.slabs()[k];
        let space = slab.dual_space();
        assert!(space.constraints().is_empty());
        let tau = slab.tau();
        let m = assemble_mass(space, |_| 1.0).to_dense();
        let a = assemble_stiffness(space, |_| 1.0).to_dense();
        let j0 = assemble_goal_rhs(slab, k, &ctx).unwrap();
        let n = space.n_dofs();
        let mut lhs = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                lhs[i][j] = 2.0 * c.rho * m[i][j] + tau * c.epsilon * a[i][j];
                rhs[i] += 2.0 * c.rho * m[i][j] * z_next[j];
            }
            rhs[i] += tau * j0[i];
        }
        let fixed: BTreeSet<usize> = space.boundary_dofs(BoundaryColor::Dirichlet);
        for &d in &fixed {
            lhs[d] = vec![0.0; n];
            lhs[d][d] = 1.0;
            rhs[d] = 0.0;
        }
        let z = dense_solve(lhs, rhs);
        let stored = slab.fetch_storage(StorageTag::DualAtStart).unwrap();
        let scale = z.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            assert!(
                (stored[i] - z[i]).abs() <= 1e-9 * scale,
                "slab {k} dof {i}: {} vs {}",
                stored[i],
                z[i]
            );
        }
        z_next = z;
    }
}

#[test]
fn dual_vanishes_after_the_control_interval() {
    let (mut slabs, norm) = solved(QuadMesh::lshape(), 5);
    let p = RotatingCone::default();
    let cv = ControlVolume::default();
    let gq = GoalQuadrature::default();
    let ctx = GoalContext {
        control_volume: &cv,
        quadrature: &gq,
        problem: &p,
        norm,
    };
    march_backward(&mut slabs, &ctx, &SolverControl::default()).unwrap();
    let z_last = slabs.slabs()[4].fetch_storage(StorageTag::DualAtStart).unwrap();
    assert!(z_last.0.iter().all(|&v| v == 0.0));
    let z_first = slabs.slabs()[0].fetch_storage(StorageTag::DualAtStart).unwrap();
    assert!(z_first.norm() > 0.0);

    let est = accumulate(&estimate_slabs(&mut slabs, &p, TemporalRestriction::Mean).unwrap());
    assert_eq!(est.per_slab[4], 0.0);
    assert!(est.total > 0.0);
}

#[test]
fn goal_density_integrates_the_box_volume() {
    // on (0.5, 0.6) the box stays inside the domain, so the integral of 1 is tau * |box|
    let cv = ControlVolume::default();
    let gq = GoalQuadrature::default();
    let mesh = initial_mesh(2).unwrap();
    let slabs = SlabList::from_slabs(vec![dwr_core::slab::Slab::new(
        TimeInterval::new(0.5, 0.6).unwrap(),
        Arc::new(mesh),
        1,
        2,
    )
    .unwrap()])
    .unwrap();
    let b = assemble_goal_density(&slabs.slabs()[0], &cv, &gq, |_, _, _, _| 1.0);
    let total: f64 = b.0.iter().sum();
    // the box edges are resolved to the sub-cell width only
    assert!((total - 0.1 * 0.04).abs() < 1e-2 * 0.004, "{total}");
}

#[test]
fn dual_march_needs_the_primal_solution() {
    let mut slabs = SlabList::uniform(Arc::new(QuadMesh::lshape()), 0.0, 1.25, 2, 1, 2).unwrap();
    let p = RotatingCone::default();
    let cv = ControlVolume::default();
    let gq = GoalQuadrature::default();
    let ctx = GoalContext {
        control_volume: &cv,
        quadrature: &gq,
        problem: &p,
        norm: 1.0,
    };
    let err = march_backward(&mut slabs, &ctx, &SolverControl::default()).unwrap_err();
    assert!(matches!(err, DwrError::MissingStorage { slab: 1, .. }), "{err:?}");
}

#[test]
fn primal_march_on_hanging_meshes_stays_bounded() {
    // the cone is nonnegative and at most its height; the discrete solution
    // should not blow up on a mesh with hanging nodes
    let mesh = QuadMesh::lshape()
        .refine(&RefinementMarks::from_cells([0]))
        .unwrap();
    let (slabs, norm) = solved(mesh, 10);
    assert!(norm.is_finite() && norm > 0.0);
    for s in slabs.slabs() {
        let u = s.fetch_storage(StorageTag::PrimalSolution).unwrap();
        assert!(u.0.iter().all(|v| v.is_finite() && v.abs() < 10.0));
    }
}

/// Homogeneous data with a bump as initial value.
struct Decay;

impl ProblemData for Decay {
    fn coefficients(&self) -> Coefficients {
        Coefficients::default()
    }
    fn initial_value(&self, x: Point, _: f64) -> f64 {
        (-20.0 * ((x[0] - 0.25).powi(2) + (x[1] - 0.5).powi(2))).exp()
    }
    fn rhs(&self, _: Point, _: f64) -> f64 {
        0.0
    }
    fn dirichlet(&self, _: Point, _: f64) -> f64 {
        0.0
    }
    fn neumann(&self, _: Point, _: f64, _: Point) -> f64 {
        0.0
    }
    fn exact(&self, _: Point, _: f64) -> Option<f64> {
        None
    }
}

#[test]
fn homogeneous_data_dissipates_the_l2_norm() {
    let mesh = initial_mesh(1)
        .unwrap()
        .refine(&RefinementMarks::from_cells([3, 7]))
        .unwrap();
    let mut slabs = SlabList::uniform(Arc::new(mesh), 0.0, 0.5, 20, 1, 2).unwrap();
    march_forward(&mut slabs, &Decay, None, &tight()).unwrap();
    let space = slabs.slabs()[0].primal_space().clone();
    let m = assemble_mass(&space, |_| 1.0);
    let norm = |v: &DenseVector| v.dot(&m.spmv(v).unwrap()).sqrt();
    let mut last = f64::INFINITY;
    for s in slabs.slabs() {
        let u = s.fetch_storage(StorageTag::PrimalSolution).unwrap();
        let n = norm(&u);
        assert!(n <= last * (1.0 + 1e-12), "{n} > {last}");
        last = n;
    }
    assert!(last > 0.0);
}

#[test]
fn goal_norm_matches_a_monolithic_sum() {
    let (slabs, norm) = solved(initial_mesh(1).unwrap(), 7);
    let p = RotatingCone::default();
    let cv = ControlVolume::default();
    let gq = GoalQuadrature::default();
    let mut sum = 0.0;
    for s in slabs.slabs() {
        let u = s.fetch_storage(StorageTag::PrimalSolution).unwrap();
        let u_h = FeFunction::new(s.primal_space().clone(), (*u).clone()).unwrap();
        for_each_control_point(&gq, &cv, s.mesh(), &s.interval, 3, |cell, xi, x, t, w| {
            let e = p.exact_u(x, t) - u_h.value_in_cell(cell, xi);
            sum += w * e * e;
        });
    }
    assert!((norm - sum.sqrt()).abs() <= 1e-12 * norm, "{norm} vs {}", sum.sqrt());
}
