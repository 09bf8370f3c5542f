//! Cellwise assembly of mass and stiffness matrices and load vectors. The
//! returned objects are unconstrained; hanging-node condensation and
//! Dirichlet elimination happen when a system is set up.

use super::function::MapPoint;
use super::space::FeSpace;
use crate::mesh::{BoundaryColor, Point};
use crate::quadrature::{Gauss1d, Quadrature};
use crate::sparse::{DenseVector, SparseMatrix};

fn assemble_bilinear(
    space: &FeSpace,
    quad: &Quadrature,
    kernel: impl Fn(&MapPoint, &[f64], &[Point], usize, usize) -> f64,
) -> SparseMatrix {
    let mesh = space.mesh();
    let e = space.element();
    let n = e.n_local();
    let values: Vec<Vec<f64>> = quad.points.iter().map(|&p| e.values(p)).collect();
    let ref_grads: Vec<Vec<Point>> = quad.points.iter().map(|&p| e.gradients(p)).collect();
    let mut triplets = Vec::with_capacity(mesh.n_active_cells() * n * n);
    let mut local = vec![0.0; n * n];
    for cell in mesh.active_cells() {
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, (&xi, &w)) in quad.points.iter().zip(&quad.weights).enumerate() {
            let mp = MapPoint::new(mesh, cell, xi);
            let grads: Vec<Point> = ref_grads[q].iter().map(|&g| mp.grad(g)).collect();
            let jxw = w * mp.det;
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += jxw * kernel(&mp, &values[q], &grads, i, j);
                }
            }
        }
        let dofs = space.cell_dofs(cell);
        for i in 0..n {
            for j in 0..n {
                triplets.push((dofs[i], dofs[j], local[i * n + j]));
            }
        }
    }
    SparseMatrix::from_triplets(space.n_dofs(), space.n_dofs(), &triplets)
        .expect("cell dofs are within the space")
}

/// `M_ij = sum_K int_K rho phi_i phi_j` with `(p+1)^2` Gauss points.
pub fn assemble_mass(space: &FeSpace, rho: impl Fn(Point) -> f64) -> SparseMatrix {
    let quad = Quadrature::gauss(space.degree() + 1);
    assemble_bilinear(space, &quad, |mp, phi, _, i, j| rho(mp.x) * phi[i] * phi[j])
}

/// `A_ij = sum_K int_K eps grad phi_i . grad phi_j` with `(p+1)^2` Gauss points.
pub fn assemble_stiffness(space: &FeSpace, eps: impl Fn(Point) -> f64) -> SparseMatrix {
    let quad = Quadrature::gauss(space.degree() + 1);
    assemble_bilinear(space, &quad, |mp, _, g, i, j| {
        eps(mp.x) * (g[i][0] * g[j][0] + g[i][1] * g[j][1])
    })
}

/// `b_i = int_Omega f phi_i` with `(p+2)^2` Gauss points per cell.
pub fn assemble_volume_functional(space: &FeSpace, f: impl Fn(Point) -> f64) -> DenseVector {
    let mesh = space.mesh();
    let e = space.element();
    let quad = Quadrature::gauss(space.degree() + 2);
    let values: Vec<Vec<f64>> = quad.points.iter().map(|&p| e.values(p)).collect();
    let mut b = DenseVector::zeros(space.n_dofs());
    for cell in mesh.active_cells() {
        let dofs = space.cell_dofs(cell);
        for (q, (&xi, &w)) in quad.points.iter().zip(&quad.weights).enumerate() {
            let mp = MapPoint::new(mesh, cell, xi);
            let fx = f(mp.x) * w * mp.det;
            for (k, &d) in dofs.iter().enumerate() {
                b[d] += fx * values[q][k];
            }
        }
    }
    b
}

/// `b_i = int_{Gamma} h(x, n) phi_i ds` over all boundary faces of `color`,
/// with `p+2` Gauss points per face. `h` receives the outward unit normal.
pub fn assemble_boundary_functional(
    space: &FeSpace,
    color: BoundaryColor,
    h: impl Fn(Point, Point) -> f64,
) -> DenseVector {
    let mesh = space.mesh();
    let e = space.element();
    let g = Gauss1d::new(space.degree() + 2);
    let mut b = DenseVector::zeros(space.n_dofs());
    for cell in mesh.active_cells() {
        let dofs = space.cell_dofs(cell);
        for f in 0..4 {
            if mesh.cell(cell).boundary[f] != Some(color) {
                continue;
            }
            for (&s, &w) in g.points.iter().zip(&g.weights) {
                let fp = mesh.face_point(cell, f, s);
                let hx = h(fp.x, fp.normal) * w * fp.ds;
                let phi = e.values(fp.xi);
                for (k, &d) in dofs.iter().enumerate() {
                    b[d] += hx * phi[k];
                }
            }
        }
    }
    b
}
