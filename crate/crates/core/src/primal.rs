//! dG(0) in time, `Q_p` in space: one linear system per slab,
//! `(M + tau A) u^n = tau (f0 + h0) + M I_h u^{n-1}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use log::debug;

use crate::error::DwrError;
use crate::fe::{
    assemble_boundary_functional, assemble_mass, assemble_stiffness, assemble_volume_functional,
    interpolate, transfer, FeFunction, FeSpace, MapPoint,
};
use crate::goal::{for_each_control_point, GoalQuadrature};
use crate::mesh::{BoundaryColor, Point};
use crate::problem::{ControlVolume, ProblemData};
use crate::quadrature::{Gauss1d, Quadrature};
use crate::slab::{Slab, SlabList, StorageTag};
use crate::sparse::{
    apply_dirichlet, cg_solve_with_guess, condense_hanging, DenseVector, LinAlgError,
    SolveReport, SolverControl, SparseMatrix,
};

/// Gauss points used to average `f` and `h` over a slab.
pub const LOAD_TIME_POINTS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalStepReport {
    pub slab: usize,
    pub iterations: usize,
    pub residual: f64,
    /// `int_{Q_c restricted to the slab} (u - u_h)^2`, if a goal was given.
    pub goal_norm_sq: Option<f64>,
}

/// Goal data needed while marching forward.
#[derive(Debug, Clone, Copy)]
pub struct GoalSpec<'a> {
    pub control_volume: &'a ControlVolume,
    pub quadrature: &'a GoalQuadrature,
}

/// Condenses hanging nodes, eliminates Dirichlet values, solves, and
/// restores the slave values.
pub(crate) fn solve_constrained(
    mut matrix: SparseMatrix,
    mut rhs: DenseVector,
    space: &FeSpace,
    dirichlet: &BTreeMap<usize, f64>,
    guess: Option<&DenseVector>,
    ctrl: &SolverControl,
) -> Result<(DenseVector, SolveReport), LinAlgError> {
    condense_hanging(&mut matrix, &mut rhs, space.constraints())?;
    apply_dirichlet(&mut matrix, &mut rhs, dirichlet)?;
    let (mut x, report) = cg_solve_with_guess(&matrix, &rhs, guess, ctrl)?;
    space.constraints().distribute(&mut x);
    Ok((x, report))
}

/// Time-averaged loads over the slab, `f0` and `h0`, with
/// [`LOAD_TIME_POINTS`] Gauss points.
pub fn averaged_loads(slab: &Slab, problem: &dyn ProblemData) -> DenseVector {
    let space = slab.primal_space();
    let times: Vec<(f64, f64)> = Gauss1d::new(LOAD_TIME_POINTS)
        .on_interval(0.0, 1.0)
        .map(|(s, w)| (slab.interval.map(s), w))
        .collect();
    let mut b = assemble_volume_functional(space, |x| {
        times.iter().map(|&(t, w)| w * problem.rhs(x, t)).sum()
    });
    let h = assemble_boundary_functional(space, BoundaryColor::Neumann, |x, n| {
        times.iter().map(|&(t, w)| w * problem.neumann(x, t, n)).sum()
    });
    b.axpy(1.0, &h);
    b
}

/// Unconstrained `(M + tau A, tau (f0 + h0) + M u_prev)` for one slab;
/// `u_prev` must live on the slab's primal space.
pub fn assemble_primal_system(
    slab: &Slab,
    problem: &dyn ProblemData,
    u_prev: &FeFunction,
) -> Result<(SparseMatrix, DenseVector), DwrError> {
    let space = slab.primal_space();
    let c = problem.coefficients();
    let tau = slab.tau();
    let mass = assemble_mass(space, |_| c.rho);
    let stiffness = assemble_stiffness(space, |_| c.epsilon);
    let matrix = mass.add_scaled(tau, &stiffness)?;
    let mut rhs = averaged_loads(slab, problem);
    rhs.scale(tau);
    rhs.axpy(1.0, &mass.spmv(u_prev.coefficients())?);
    Ok((matrix, rhs))
}

/// Solves one slab given the previous solution already on its primal space.
pub fn solve_primal_step(
    slab: &Slab,
    problem: &dyn ProblemData,
    u_prev: &FeFunction,
    ctrl: &SolverControl,
) -> Result<(FeFunction, SolveReport), DwrError> {
    let (matrix, rhs) = assemble_primal_system(slab, problem, u_prev)?;
    let space = slab.primal_space();
    let t_n = slab.interval.t_n;
    let dirichlet = space.boundary_values(BoundaryColor::Dirichlet, |x| problem.dirichlet(x, t_n));
    let (x, report) = solve_constrained(
        matrix,
        rhs,
        space,
        &dirichlet,
        Some(u_prev.coefficients()),
        ctrl,
    )?;
    Ok((FeFunction::new(space.clone(), x)?, report))
}

/// `I_h u_prev` on slab `k`: the initial value for the first slab, otherwise
/// the stored solution of slab `k-1` transferred onto the slab's space.
pub fn previous_solution(
    slabs: &SlabList,
    k: usize,
    problem: &dyn ProblemData,
) -> Result<FeFunction, DwrError> {
    let slab = &slabs.slabs()[k];
    let space = slab.primal_space();
    if k == 0 {
        let t0 = slab.interval.t_m;
        return Ok(interpolate(space, |x| problem.initial_value(x, t0)));
    }
    let prev = &slabs.slabs()[k - 1];
    let u = stored_function(prev, k - 1, StorageTag::PrimalSolution, prev.primal_space())?;
    Ok(transfer(&u, space)?)
}

pub(crate) fn stored_function(
    slab: &Slab,
    index: usize,
    tag: StorageTag,
    space: &Arc<FeSpace>,
) -> Result<FeFunction, DwrError> {
    let v = slab
        .fetch_storage(tag)
        .ok_or(DwrError::MissingStorage {
            slab: index,
            what: match tag {
                StorageTag::PrimalSolution => "primal solution",
                StorageTag::DualAtStart => "dual solution",
                StorageTag::CellIndicators => "cell indicators",
                StorageTag::GoalNormContribution => "goal norm contribution",
            },
        })?;
    Ok(FeFunction::new(space.clone(), (*v).clone())?)
}

/// Forward march over all slabs; stores `u^n` (and the goal-norm
/// contribution when `goal` is given) on every slab.
pub fn march_forward(
    slabs: &mut SlabList,
    problem: &dyn ProblemData,
    goal: Option<GoalSpec<'_>>,
    ctrl: &SolverControl,
) -> Result<Vec<PrimalStepReport>, DwrError> {
    let mut reports = Vec::with_capacity(slabs.len());
    for k in 0..slabs.len() {
        let u_prev = previous_solution(slabs, k, problem)?;
        let slab = &slabs.slabs()[k];
        let (u, solve) = solve_primal_step(slab, problem, &u_prev, ctrl).map_err(|e| match e {
            DwrError::LinAlg(source) => DwrError::PrimalSolve { slab: k, source },
            other => other,
        })?;
        let goal_norm_sq = match goal {
            Some(g) => Some(goal_error_sq(slab, &u, problem, g)?),
            None => None,
        };
        debug!(
            "primal slab {k}: {} dofs, {} CG iterations",
            u.space().n_dofs(),
            solve.iterations
        );
        let slab = &mut slabs.slabs_mut()[k];
        slab.attach_storage(StorageTag::PrimalSolution, u.into_coefficients())?;
        if let Some(e) = goal_norm_sq {
            slab.attach_storage(StorageTag::GoalNormContribution, DenseVector::from_vec(vec![e]))?;
        }
        reports.push(PrimalStepReport {
            slab: k,
            iterations: solve.iterations,
            residual: solve.residual,
            goal_norm_sq,
        });
    }
    Ok(reports)
}

/// `int_{Q_c restricted to the slab} (u - u_h)^2` with `(p+2)^2` points per sub-cell.
pub fn goal_error_sq(
    slab: &Slab,
    u_h: &FeFunction,
    problem: &dyn ProblemData,
    goal: GoalSpec<'_>,
) -> Result<f64, DwrError> {
    let n = u_h.space().degree() + 2;
    let mut sum = 0.0;
    let mut missing = false;
    for_each_control_point(
        goal.quadrature,
        goal.control_volume,
        slab.mesh(),
        &slab.interval,
        n,
        |cell, xi, x, t, w| match problem.exact(x, t) {
            Some(u) => {
                let e = u - u_h.value_in_cell(cell, xi);
                sum += w * e * e;
            }
            None => missing = true,
        },
    );
    if missing {
        return Err(DwrError::NoReferenceSolution);
    }
    Ok(sum)
}

/// `||u - u_h||^2_{L2(Q_c)}` from the stored per-slab contributions.
pub fn goal_norm(slabs: &SlabList) -> Option<f64> {
    let mut sum = 0.0;
    for s in slabs.slabs() {
        sum += s.fetch_storage(StorageTag::GoalNormContribution)?[0];
    }
    Some(sum.sqrt())
}

/// `int_{I_n} int_Omega (u - u_h)^2` with `n_space^2` Gauss points on
/// `refine x refine` sub-cells and `n_time` Gauss points in time.
pub fn slab_l2_error_sq(
    slab: &Slab,
    u_h: &FeFunction,
    exact: impl Fn(Point, f64) -> f64,
    n_space: usize,
    refine: usize,
    n_time: usize,
) -> f64 {
    let mesh = slab.mesh();
    let quad = Quadrature::composite(n_space, refine);
    let times: Vec<(f64, f64)> = Gauss1d::new(n_time)
        .on_interval(slab.interval.t_m, slab.interval.t_n)
        .collect();
    let mut sum = 0.0;
    for cell in mesh.active_cells() {
        for (xi, w) in quad.iter() {
            let mp = MapPoint::new(mesh, cell, xi);
            let uh = u_h.value_in_cell(cell, xi);
            for &(t, wt) in &times {
                let e = exact(mp.x, t) - uh;
                sum += w * mp.det * wt * e * e;
            }
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::QuadMesh;
    use crate::problem::Coefficients;

    /// `u = c` everywhere with no sources.
    struct Constant(f64);

    impl ProblemData for Constant {
        fn coefficients(&self) -> Coefficients {
            Coefficients::default()
        }
        fn initial_value(&self, _: Point, _: f64) -> f64 {
            self.0
        }
        fn rhs(&self, _: Point, _: f64) -> f64 {
            0.0
        }
        fn dirichlet(&self, _: Point, _: f64) -> f64 {
            self.0
        }
        fn neumann(&self, _: Point, _: f64, _: Point) -> f64 {
            0.0
        }
        fn exact(&self, _: Point, _: f64) -> Option<f64> {
            Some(self.0)
        }
    }

    #[test]
    fn constant_state_is_preserved() {
        let mut slabs = SlabList::uniform(Arc::new(QuadMesh::lshape()), 0.0, 1.0, 4, 1, 2).unwrap();
        let ctrl = SolverControl {
            relative_tolerance: 1e-14,
            ..Default::default()
        };
        march_forward(&mut slabs, &Constant(0.7), None, &ctrl).unwrap();
        for s in slabs.slabs() {
            let u = s.fetch_storage(StorageTag::PrimalSolution).unwrap();
            assert!(u.iter().all(|&v| (v - 0.7).abs() < 1e-12));
        }
    }

    #[test]
    fn dirichlet_values_are_exact() {
        let mut slabs = SlabList::uniform(Arc::new(QuadMesh::lshape()), 0.0, 0.5, 2, 1, 2).unwrap();
        let p = crate::problem::RotatingCone::default();
        march_forward(&mut slabs, &p, None, &SolverControl::default()).unwrap();
        let s = &slabs.slabs()[1];
        let u = s.fetch_storage(StorageTag::PrimalSolution).unwrap();
        let bv = s
            .primal_space()
            .boundary_values(BoundaryColor::Dirichlet, |x| p.dirichlet(x, 0.5));
        for (d, v) in bv {
            assert_eq!(u[d], v);
        }
    }

    #[test]
    fn missing_previous_solution_is_reported() {
        let slabs = SlabList::uniform(Arc::new(QuadMesh::lshape()), 0.0, 0.5, 2, 1, 2).unwrap();
        let p = crate::problem::RotatingCone::default();
        let err = previous_solution(&slabs, 1, &p).unwrap_err();
        assert!(matches!(err, DwrError::MissingStorage { slab: 0, .. }));
    }
}
