//! Dual weighted residual cell indicators.
//!
//! For every active cell `K` of a slab
//!
//! ```text
//! eta_K = int_{I_n} int_K (f + div(eps grad u_h)) w
//!       - 1/2 int_{I_n} int_{interior faces} [eps d_n u_h] w
//!       + int_{I_n} int_{Neumann faces} (h - eps d_n u_h) w
//!       - int_K rho (u_h - u_prev) w(t_m+)
//! ```
//!
//! with the weight `w = z - i_h z_bar`, where `z_bar` is a temporal
//! restriction of the dual solution and `i_h` the nodal interpolant into the
//! primal space.

use log::debug;

use crate::dual::{dual_at_end, dual_at_start};
use crate::error::DwrError;
use crate::fe::{transfer, FeFunction, MapPoint};
use crate::mesh::{BoundaryColor, CellId, FaceNeighbor, MeshError, Point};
use crate::primal::{previous_solution, stored_function};
use crate::problem::ProblemData;
use crate::quadrature::{Gauss1d, Quadrature};
use crate::slab::{time_basis, Slab, SlabList, StorageTag};
use crate::sparse::DenseVector;

const TIME_POINTS: usize = 2;

/// How the dual solution is restricted in time before spatial interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TemporalRestriction {
    /// `(z(t_m) + z(t_n)) / 2`.
    #[default]
    Mean,
    /// `z(t_n)`.
    RightEndpoint,
}

/// Indicators of one slab in active-cell order.
pub type CellIndicators = Vec<(CellId, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEstimate {
    /// `sum_K |eta_K|` per slab.
    pub per_slab: Vec<f64>,
    pub total: f64,
}

/// Indicators with an arbitrary weight `w(cell, xi, t)`.
pub fn cell_indicators_with_weight(
    slab: &Slab,
    problem: &dyn ProblemData,
    u: &FeFunction,
    u_prev: &FeFunction,
    quad_points: usize,
    weight: &dyn Fn(CellId, Point, f64) -> f64,
) -> Result<CellIndicators, DwrError> {
    let mesh = slab.mesh();
    let c = problem.coefficients();
    let times: Vec<(f64, f64)> = Gauss1d::new(TIME_POINTS)
        .on_interval(slab.interval.t_m, slab.interval.t_n)
        .collect();
    let t_m = slab.interval.t_m;
    let cell_quad = Quadrature::gauss(quad_points);
    let face_quad = Gauss1d::new(quad_points);
    let mut out = Vec::with_capacity(mesh.n_active_cells());

    for cell in mesh.active_cells() {
        let mut eta = 0.0;

        for (xi, w) in cell_quad.iter() {
            let mp = MapPoint::new(mesh, cell, xi);
            let jxw = w * mp.det;
            let lap = c.epsilon * u.laplacian_at(cell, xi, &mp);
            for &(t, wt) in &times {
                eta += jxw * wt * (problem.rhs(mp.x, t) + lap) * weight(cell, xi, t);
            }
            let jump = u.value_in_cell(cell, xi) - u_prev.value_in_cell(cell, xi);
            eta -= jxw * c.rho * jump * weight(cell, xi, t_m);
        }

        for f in 0..4 {
            let neighbor = mesh.face_neighbor(cell, f);
            // pieces of the face as (s_start, s_end, neighbor)
            let pieces: Vec<(f64, f64, Option<CellId>)> = match neighbor {
                FaceNeighbor::Boundary(BoundaryColor::Dirichlet) => continue,
                FaceNeighbor::Boundary(BoundaryColor::Neumann) => vec![(0.0, 1.0, None)],
                FaceNeighbor::Same(n) | FaceNeighbor::Coarser(n) => vec![(0.0, 1.0, Some(n))],
                FaceNeighbor::Finer([a, b]) => vec![(0.0, 0.5, Some(a)), (0.5, 1.0, Some(b))],
            };
            for (s0, s1, other) in pieces {
                for (s, ws) in face_quad.on_interval(s0, s1) {
                    let fp = mesh.face_point(cell, f, s);
                    let du = u.gradient_in_cell(cell, fp.xi);
                    let flux = c.epsilon * (du[0] * fp.normal[0] + du[1] * fp.normal[1]);
                    let dl = ws * fp.ds;
                    match other {
                        None => {
                            for &(t, wt) in &times {
                                let r = problem.neumann(fp.x, t, fp.normal) - flux;
                                eta += dl * wt * r * weight(cell, fp.xi, t);
                            }
                        }
                        Some(n) => {
                            let eta_n = mesh
                                .to_reference(n, fp.x)
                                .ok_or(MeshError::PointOutside(fp.x[0], fp.x[1]))?;
                            let dn = u.gradient_in_cell(n, eta_n);
                            let jump = flux
                                - c.epsilon * (dn[0] * fp.normal[0] + dn[1] * fp.normal[1]);
                            for &(t, wt) in &times {
                                eta -= 0.5 * dl * wt * jump * weight(cell, fp.xi, t);
                            }
                        }
                    }
                }
            }
        }
        out.push((cell, eta));
    }
    Ok(out)
}

/// Indicators of one slab with the weight `z - i_h z_bar` built from the
/// dual values at both slab ends.
pub fn compute_cell_indicators(
    slab: &Slab,
    problem: &dyn ProblemData,
    u: &FeFunction,
    u_prev: &FeFunction,
    z_start: &FeFunction,
    z_end: &FeFunction,
    restriction: TemporalRestriction,
) -> Result<CellIndicators, DwrError> {
    let z_bar = match restriction {
        TemporalRestriction::Mean => {
            let mut v = z_start.coefficients().clone();
            v.axpy(1.0, z_end.coefficients());
            v.scale(0.5);
            FeFunction::new(z_start.space().clone(), v)?
        }
        TemporalRestriction::RightEndpoint => z_end.clone(),
    };
    let i_h = transfer(&z_bar, slab.primal_space())?;
    let interval = slab.interval;
    let weight = |cell: CellId, xi: Point, t: f64| {
        let [a, b] = time_basis::dual(&interval, t);
        a * z_start.value_in_cell(cell, xi) + b * z_end.value_in_cell(cell, xi)
            - i_h.value_in_cell(cell, xi)
    };
    let q = z_start.space().degree();
    cell_indicators_with_weight(slab, problem, u, u_prev, q + 1, &weight)
}

/// Indicators on every slab from the stored primal and dual solutions; the
/// result is also attached to the slabs.
pub fn estimate_slabs(
    slabs: &mut SlabList,
    problem: &dyn ProblemData,
    restriction: TemporalRestriction,
) -> Result<Vec<CellIndicators>, DwrError> {
    let mut all = Vec::with_capacity(slabs.len());
    for k in 0..slabs.len() {
        let slab = &slabs.slabs()[k];
        let u = stored_function(slab, k, StorageTag::PrimalSolution, slab.primal_space())?;
        let u_prev = previous_solution(slabs, k, problem)?;
        let z_start = dual_at_start(slabs, k)?;
        let z_end = dual_at_end(slabs, k)?;
        let eta =
            compute_cell_indicators(slab, problem, &u, &u_prev, &z_start, &z_end, restriction)?;
        debug!("slab {k}: eta = {:.3e}", eta.iter().map(|e| e.1.abs()).sum::<f64>());
        let values = DenseVector::from_vec(eta.iter().map(|e| e.1).collect());
        slabs.slabs_mut()[k].attach_storage(StorageTag::CellIndicators, values)?;
        all.push(eta);
    }
    Ok(all)
}

/// `eta_n = sum_K |eta_K|` (ascending cell id) and `eta = sum_n eta_n`.
pub fn accumulate(indicators: &[CellIndicators]) -> ErrorEstimate {
    let per_slab: Vec<f64> = indicators
        .iter()
        .map(|slab| {
            let mut cells = slab.clone();
            cells.sort_by_key(|e| e.0);
            cells.iter().map(|e| e.1.abs()).sum()
        })
        .collect();
    let total = per_slab.iter().sum();
    ErrorEstimate { per_slab, total }
}

/// `I_eff = |eta / (J(u) - J(u_h))|`; `None` for a vanishing error.
pub fn effectivity(eta: f64, goal_error: f64) -> Option<f64> {
    (goal_error != 0.0).then(|| (eta / goal_error).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::QuadMesh;
    use crate::problem::Coefficients;
    use crate::slab::TimeInterval;
    use std::sync::Arc;

    struct NeumannOnly;

    impl ProblemData for NeumannOnly {
        fn coefficients(&self) -> Coefficients {
            Coefficients::default()
        }
        fn initial_value(&self, _: Point, _: f64) -> f64 {
            0.0
        }
        fn rhs(&self, _: Point, _: f64) -> f64 {
            0.0
        }
        fn dirichlet(&self, _: Point, _: f64) -> f64 {
            0.0
        }
        fn neumann(&self, _: Point, _: f64, _: Point) -> f64 {
            1.0
        }
        fn exact(&self, _: Point, _: f64) -> Option<f64> {
            None
        }
    }

    fn slab(tau: f64) -> Slab {
        Slab::new(
            TimeInterval::new(0.0, tau).unwrap(),
            Arc::new(QuadMesh::lshape()),
            1,
            2,
        )
        .unwrap()
    }

    #[test]
    fn pure_neumann_residual_gives_tau_times_length() {
        let s = slab(0.3);
        let zero = FeFunction::zero(s.primal_space().clone());
        let eta =
            cell_indicators_with_weight(&s, &NeumannOnly, &zero, &zero, 3, &|_, _, _| 1.0).unwrap();
        // Neumann boundary x = 0 has length 1; two cells carry half each
        let total: f64 = eta.iter().map(|e| e.1).sum();
        assert!((total - 0.3).abs() < 1e-14);
        assert!((eta[0].1 - 0.15).abs() < 1e-14 && (eta[2].1 - 0.15).abs() < 1e-14);
        assert_eq!(eta[1].1, 0.0);
    }

    #[test]
    fn dual_in_primal_space_gives_zero_weight() {
        let s = Slab::new(
            TimeInterval::new(0.0, 0.25).unwrap(),
            Arc::new(QuadMesh::lshape()),
            1,
            1,
        )
        .unwrap();
        let p = crate::problem::RotatingCone::default();
        let u = crate::fe::interpolate(s.primal_space(), |x| x[0] * x[1]);
        let z = crate::fe::interpolate(s.dual_space(), |x| x[0] - 2.0 * x[1]);
        let eta =
            compute_cell_indicators(&s, &p, &u, &u, &z, &z, TemporalRestriction::Mean).unwrap();
        assert!(eta.iter().all(|e| e.1.abs() < 1e-14));
    }

    #[test]
    fn accumulation_uses_absolute_values() {
        let est = accumulate(&[vec![(0, 1.0), (1, -2.0)], vec![(0, 3.0)]]);
        assert_eq!(est.per_slab, vec![3.0, 3.0]);
        assert_eq!(est.total, 6.0);
        let empty = accumulate(&[vec![], vec![]]);
        assert_eq!(empty.per_slab, vec![0.0, 0.0]);
        assert_eq!(empty.total, 0.0);
    }

    #[test]
    fn effectivity_matches_reference_rows() {
        let i1 = effectivity(1.994e-2, 6.070e-2).unwrap();
        let i2 = effectivity(2.451e-2, 2.634e-2).unwrap();
        assert!((i1 - 0.33).abs() < 5e-3);
        assert!((i2 - 0.93).abs() < 5e-3);
        assert_eq!(effectivity(1.0, 0.0), None);
        assert_eq!(effectivity(-1.0, 2.0), Some(0.5));
    }
}
