//! Space-time quadrature over the moving control volume `Q_c`.
//!
//! The indicator of `Q_c` is discontinuous inside cells and slabs, so the
//! integrals use composite Gauss rules: each cell is subdivided until the
//! sub-cells are no wider than `cell_width`, and `I_n` intersected with
//! `I_c` is split into pieces no longer than `time_width`.

use crate::mesh::{CellId, Point, QuadMesh};
use crate::problem::ControlVolume;
use crate::quadrature::{Gauss1d, Quadrature};
use crate::slab::TimeInterval;

const TIME_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalQuadrature {
    pub cell_width: f64,
    pub time_width: f64,
}

impl Default for GoalQuadrature {
    fn default() -> Self {
        Self {
            cell_width: 1.0 / 32.0,
            time_width: 1.0 / 64.0,
        }
    }
}

/// Temporal quadrature points `(t, weight)` over `I_n` intersected with `I_c`.
pub fn control_time_points(
    gq: &GoalQuadrature,
    cv: &ControlVolume,
    interval: &TimeInterval,
) -> Vec<(f64, f64)> {
    let Some((lo, hi)) = cv.overlap(interval) else {
        return Vec::new();
    };
    let pieces = ((hi - lo) / gq.time_width).ceil().max(1.0) as usize;
    let g = Gauss1d::new(TIME_POINTS);
    let h = (hi - lo) / pieces as f64;
    (0..pieces)
        .flat_map(|k| {
            let a = lo + k as f64 * h;
            let b = if k + 1 == pieces { hi } else { a + h };
            g.on_interval(a, b).collect::<Vec<_>>()
        })
        .collect()
}

/// Per-cell composite rule used at one instant.
pub struct CellRule {
    pub quad: Quadrature,
    bbox: (Point, Point),
}

impl CellRule {
    pub fn new(gq: &GoalQuadrature, mesh: &QuadMesh, cell: CellId, n_points: usize) -> Self {
        let m = (mesh.cell_diameter(cell) / gq.cell_width).ceil().max(1.0) as usize;
        let p = mesh.cell_points(cell);
        let lo = [
            p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min),
            p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min),
        ];
        let hi = [
            p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max),
            p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max),
        ];
        Self {
            quad: Quadrature::composite(n_points, m),
            bbox: (lo, hi),
        }
    }

    /// Cheap rejection: false if the control box misses the cell's bounding box at `t`.
    pub fn may_intersect(&self, cv: &ControlVolume, t: f64) -> bool {
        if !cv.active_at(t) {
            return false;
        }
        let c = cv.box_center(t);
        let (lo, hi) = self.bbox;
        (0..2).all(|d| c[d] + cv.lower[d] <= hi[d] && c[d] + cv.upper[d] >= lo[d])
    }
}

/// Visits every quadrature point `(cell, xi, x, t, weight)` of `Q_c`
/// restricted to one slab; `weight` includes the Jacobian and time weight.
pub fn for_each_control_point(
    gq: &GoalQuadrature,
    cv: &ControlVolume,
    mesh: &QuadMesh,
    interval: &TimeInterval,
    n_points: usize,
    mut visit: impl FnMut(CellId, Point, Point, f64, f64),
) {
    let times = control_time_points(gq, cv, interval);
    if times.is_empty() {
        return;
    }
    for cell in mesh.active_cells() {
        let rule = CellRule::new(gq, mesh, cell, n_points);
        let mut geometry: Option<Vec<(Point, f64)>> = None;
        for &(t, wt) in &times {
            if !rule.may_intersect(cv, t) {
                continue;
            }
            let geo = geometry.get_or_insert_with(|| {
                rule.quad
                    .iter()
                    .map(|(xi, w)| {
                        let j = mesh.jacobian(cell, xi);
                        (
                            mesh.map_to_physical(cell, xi),
                            w * (j[0][0] * j[1][1] - j[0][1] * j[1][0]),
                        )
                    })
                    .collect()
            });
            for ((xi, _), &(x, jxw)) in rule.quad.iter().zip(geo.iter()) {
                if cv.contains(x, t) {
                    visit(cell, xi, x, t, jxw * wt);
                }
            }
        }
    }
}
