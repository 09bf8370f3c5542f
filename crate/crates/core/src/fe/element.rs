//! Tensor-product Lagrange elements `Q1` and `Q2` on the unit square.

use crate::mesh::Point;

/// Which geometric object of a cell a local dof is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalObject {
    /// Local vertex index.
    Vertex(usize),
    /// Local face index.
    Face(usize),
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagrangeElement {
    degree: usize,
}

impl LagrangeElement {
    pub fn new(degree: usize) -> Option<Self> {
        matches!(degree, 1 | 2).then_some(Self { degree })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Nodes per direction.
    pub fn n_1d(&self) -> usize {
        self.degree + 1
    }

    pub fn n_local(&self) -> usize {
        self.n_1d() * self.n_1d()
    }

    fn node_1d(&self, i: usize) -> f64 {
        i as f64 / self.degree as f64
    }

    /// Reference coordinates of local node `k` (lexicographic, x fastest).
    pub fn node(&self, k: usize) -> Point {
        let n = self.n_1d();
        [self.node_1d(k % n), self.node_1d(k / n)]
    }

    pub fn object(&self, k: usize) -> LocalObject {
        let n = self.n_1d();
        let p = self.degree;
        let (i, j) = (k % n, k / n);
        let i_end = i == 0 || i == p;
        let j_end = j == 0 || j == p;
        match (i_end, j_end) {
            (true, true) => LocalObject::Vertex((j / p) * 2 + i / p),
            (false, true) => LocalObject::Face(if j == 0 { 2 } else { 3 }),
            (true, false) => LocalObject::Face(if i == 0 { 0 } else { 1 }),
            (false, false) => LocalObject::Interior,
        }
    }

    /// Local dofs on face `f`, ordered from the face's first to its second vertex.
    pub fn face_dofs(&self, f: usize) -> Vec<usize> {
        let n = self.n_1d();
        let p = self.degree;
        (0..n)
            .map(|s| match f {
                0 => s * n,
                1 => s * n + p,
                2 => s,
                3 => p * n + s,
                _ => unreachable!("quadrilaterals have four faces"),
            })
            .collect()
    }

    fn basis_1d(&self, x: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
        match self.degree {
            1 => ([1.0 - x, x, 0.0], [-1.0, 1.0, 0.0], [0.0; 3]),
            _ => (
                [
                    (1.0 - x) * (1.0 - 2.0 * x),
                    4.0 * x * (1.0 - x),
                    x * (2.0 * x - 1.0),
                ],
                [4.0 * x - 3.0, 4.0 - 8.0 * x, 4.0 * x - 1.0],
                [4.0, -8.0, 4.0],
            ),
        }
    }

    /// Shape function values at `xi`.
    pub fn values(&self, xi: Point) -> Vec<f64> {
        let (vx, _, _) = self.basis_1d(xi[0]);
        let (vy, _, _) = self.basis_1d(xi[1]);
        let n = self.n_1d();
        (0..self.n_local()).map(|k| vx[k % n] * vy[k / n]).collect()
    }

    /// Reference gradients at `xi`.
    pub fn gradients(&self, xi: Point) -> Vec<Point> {
        let (vx, dx, _) = self.basis_1d(xi[0]);
        let (vy, dy, _) = self.basis_1d(xi[1]);
        let n = self.n_1d();
        (0..self.n_local())
            .map(|k| {
                let (i, j) = (k % n, k / n);
                [dx[i] * vy[j], vx[i] * dy[j]]
            })
            .collect()
    }

    /// Reference Hessians at `xi`.
    pub fn hessians(&self, xi: Point) -> Vec<[[f64; 2]; 2]> {
        let (vx, dx, ddx) = self.basis_1d(xi[0]);
        let (vy, dy, ddy) = self.basis_1d(xi[1]);
        let n = self.n_1d();
        (0..self.n_local())
            .map(|k| {
                let (i, j) = (k % n, k / n);
                let mixed = dx[i] * dy[j];
                [[ddx[i] * vy[j], mixed], [mixed, vx[i] * ddy[j]]]
            })
            .collect()
    }
}
