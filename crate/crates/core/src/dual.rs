//! Backward dual problem: continuous piecewise linear in time, `Q_q` in
//! space, solved slab by slab from `z(T) = 0` with
//! `(2M + tau A) z_m = tau J0 + 2M I_h z(t_n)`.

use std::collections::BTreeMap;

use log::debug;

use crate::error::DwrError;
use crate::fe::{assemble_mass, assemble_stiffness, transfer, FeFunction};
use crate::goal::{for_each_control_point, GoalQuadrature};
use crate::mesh::{CellId, Point};
use crate::primal::{solve_constrained, stored_function};
use crate::problem::{ControlVolume, ProblemData};
use crate::slab::{Slab, SlabList, StorageTag};
use crate::sparse::{DenseVector, SolverControl};

/// Everything the goal functional `J(phi) = (1/norm) int_{Q_c} phi (u - u_h)`
/// depends on.
#[derive(Clone, Copy)]
pub struct GoalContext<'a> {
    pub control_volume: &'a ControlVolume,
    pub quadrature: &'a GoalQuadrature,
    pub problem: &'a dyn ProblemData,
    /// `||u - u_h||_{L2(Q_c)}`, fixed for the current loop.
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualStepReport {
    pub slab: usize,
    pub iterations: usize,
    pub residual: f64,
}

/// `b_i = int_{I_n} int_{Omega_c(t)} phi_i density` over the dual space of
/// the slab, `(q+1)^2` points per sub-cell.
pub fn assemble_goal_density(
    slab: &Slab,
    cv: &ControlVolume,
    gq: &GoalQuadrature,
    mut density: impl FnMut(CellId, Point, Point, f64) -> f64,
) -> DenseVector {
    let space = slab.dual_space();
    let e = space.element();
    let mut b = DenseVector::zeros(space.n_dofs());
    for_each_control_point(
        gq,
        cv,
        slab.mesh(),
        &slab.interval,
        space.degree() + 1,
        |cell, xi, x, t, w| {
            let d = density(cell, xi, x, t) * w;
            if d == 0.0 {
                return;
            }
            for (phi, &dof) in e.values(xi).iter().zip(space.cell_dofs(cell)) {
                b[dof] += phi * d;
            }
        },
    );
    b
}

/// `J0 = (1/(tau norm)) int_{I_n} int_{Omega_c(t)} phi_i (u - u_h)` using
/// the primal solution stored on slab `index`.
pub fn assemble_goal_rhs(
    slab: &Slab,
    index: usize,
    ctx: &GoalContext<'_>,
) -> Result<DenseVector, DwrError> {
    let u_h = stored_function(slab, index, StorageTag::PrimalSolution, slab.primal_space())?;
    let mut missing = false;
    let mut b = assemble_goal_density(slab, ctx.control_volume, ctx.quadrature, |cell, xi, x, t| {
        match ctx.problem.exact(x, t) {
            Some(u) => u - u_h.value_in_cell(cell, xi),
            None => {
                missing = true;
                0.0
            }
        }
    });
    if missing {
        return Err(DwrError::NoReferenceSolution);
    }
    b.scale(1.0 / (slab.tau() * ctx.norm));
    Ok(b)
}

/// `z(t_n)` on slab `k`'s dual space: zero on the last slab, otherwise the
/// successor's stored `z(t_m)` transferred onto this mesh.
pub fn dual_at_end(slabs: &SlabList, k: usize) -> Result<FeFunction, DwrError> {
    let slab = &slabs.slabs()[k];
    match slabs.slabs().get(k + 1) {
        None => Ok(FeFunction::zero(slab.dual_space().clone())),
        Some(next) => {
            let z = stored_function(next, k + 1, StorageTag::DualAtStart, next.dual_space())?;
            Ok(transfer(&z, slab.dual_space())?)
        }
    }
}

/// The stored `z(t_m)` of slab `k`.
pub fn dual_at_start(slabs: &SlabList, k: usize) -> Result<FeFunction, DwrError> {
    let slab = &slabs.slabs()[k];
    stored_function(slab, k, StorageTag::DualAtStart, slab.dual_space())
}

/// Solves one slab given `z(t_n)` on its dual space.
pub fn solve_dual_step(
    slab: &Slab,
    index: usize,
    ctx: &GoalContext<'_>,
    z_end: &FeFunction,
    ctrl: &SolverControl,
) -> Result<(FeFunction, DualStepReport), DwrError> {
    let space = slab.dual_space();
    let c = ctx.problem.coefficients();
    let tau = slab.tau();
    let mass = assemble_mass(space, |_| 2.0 * c.rho);
    let stiffness = assemble_stiffness(space, |_| c.epsilon);
    let matrix = mass.add_scaled(tau, &stiffness)?;
    let mut rhs = assemble_goal_rhs(slab, index, ctx)?;
    rhs.scale(tau);
    rhs.axpy(1.0, &mass.spmv(z_end.coefficients())?);
    let dirichlet: BTreeMap<usize, f64> = space
        .boundary_dofs(crate::mesh::BoundaryColor::Dirichlet)
        .into_iter()
        .map(|d| (d, 0.0))
        .collect();
    let (z, report) =
        solve_constrained(matrix, rhs, space, &dirichlet, Some(z_end.coefficients()), ctrl)
            .map_err(|source| DwrError::DualSolve { slab: index, source })?;
    Ok((
        FeFunction::new(space.clone(), z)?,
        DualStepReport {
            slab: index,
            iterations: report.iterations,
            residual: report.residual,
        },
    ))
}

/// Backward march from `T`; stores `z(t_m)` on every slab.
pub fn march_backward(
    slabs: &mut SlabList,
    ctx: &GoalContext<'_>,
    ctrl: &SolverControl,
) -> Result<Vec<DualStepReport>, DwrError> {
    let mut reports = Vec::with_capacity(slabs.len());
    for k in (0..slabs.len()).rev() {
        let z_end = dual_at_end(slabs, k)?;
        let (z, report) = solve_dual_step(&slabs.slabs()[k], k, ctx, &z_end, ctrl)?;
        debug!("dual slab {k}: {} CG iterations", report.iterations);
        slabs.slabs_mut()[k].attach_storage(StorageTag::DualAtStart, z.into_coefficients())?;
        reports.push(report);
    }
    reports.reverse();
    Ok(reports)
}

/// Which function the goal functional is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalArgument {
    Exact,
    Discrete,
}

/// `J(u)` or `J(u_h)` on the stored primal solutions, using the same
/// quadrature as the goal norm so that `J(u) - J(u_h) = norm`.
pub fn goal_value(
    slabs: &SlabList,
    ctx: &GoalContext<'_>,
    argument: GoalArgument,
) -> Result<f64, DwrError> {
    let mut sum = 0.0;
    let mut missing = false;
    for (k, slab) in slabs.slabs().iter().enumerate() {
        let u_h = stored_function(slab, k, StorageTag::PrimalSolution, slab.primal_space())?;
        for_each_control_point(
            ctx.quadrature,
            ctx.control_volume,
            slab.mesh(),
            &slab.interval,
            u_h.space().degree() + 2,
            |cell, xi, x, t, w| {
                let Some(u) = ctx.problem.exact(x, t) else {
                    missing = true;
                    return;
                };
                let uh = u_h.value_in_cell(cell, xi);
                let phi = match argument {
                    GoalArgument::Exact => u,
                    GoalArgument::Discrete => uh,
                };
                sum += w * phi * (u - uh);
            },
        );
    }
    if missing {
        return Err(DwrError::NoReferenceSolution);
    }
    Ok(sum / ctx.norm)
}
