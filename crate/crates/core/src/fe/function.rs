use std::sync::Arc;

use super::space::FeSpace;
use super::FeError;
use crate::mesh::{CellId, Point, QuadMesh};
use crate::sparse::DenseVector;

/// Jacobian data of the bilinear cell map at one reference point.
#[derive(Debug, Clone, Copy)]
pub struct MapPoint {
    pub x: Point,
    pub det: f64,
    /// `d xi_r / d x_d`, indexed `[r][d]`.
    pub inv: [[f64; 2]; 2],
}

impl MapPoint {
    pub fn new(mesh: &QuadMesh, cell: CellId, xi: Point) -> Self {
        let j = mesh.jacobian(cell, xi);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inv = [
            [j[1][1] / det, -j[0][1] / det],
            [-j[1][0] / det, j[0][0] / det],
        ];
        Self {
            x: mesh.map_to_physical(cell, xi),
            det,
            inv,
        }
    }

    /// Physical gradient from a reference gradient.
    pub fn grad(&self, g: Point) -> Point {
        [
            g[0] * self.inv[0][0] + g[1] * self.inv[1][0],
            g[0] * self.inv[0][1] + g[1] * self.inv[1][1],
        ]
    }

    /// Physical Laplacian from a reference Hessian; ignores the derivative
    /// of the Jacobian, exact for parallelograms.
    pub fn laplacian(&self, h: [[f64; 2]; 2]) -> f64 {
        let mut lap = 0.0;
        for d in 0..2 {
            for r in 0..2 {
                for s in 0..2 {
                    lap += self.inv[r][d] * h[r][s] * self.inv[s][d];
                }
            }
        }
        lap
    }
}

/// Coefficient vector together with the space it lives in.
#[derive(Debug, Clone)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coefficients: DenseVector,
}

impl FeFunction {
    pub fn new(space: Arc<FeSpace>, coefficients: DenseVector) -> Result<Self, FeError> {
        if coefficients.len() != space.n_dofs() {
            return Err(FeError::LengthMismatch {
                expected: space.n_dofs(),
                actual: coefficients.len(),
            });
        }
        Ok(Self {
            space,
            coefficients,
        })
    }

    pub fn zero(space: Arc<FeSpace>) -> Self {
        let n = space.n_dofs();
        Self {
            space,
            coefficients: DenseVector::zeros(n),
        }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &DenseVector {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> DenseVector {
        self.coefficients
    }

    fn local(&self, cell: CellId) -> impl Iterator<Item = f64> + '_ {
        self.space
            .cell_dofs(cell)
            .iter()
            .map(|&d| self.coefficients[d])
    }

    pub fn value_in_cell(&self, cell: CellId, xi: Point) -> f64 {
        let phi = self.space.element().values(xi);
        self.local(cell).zip(phi).map(|(c, v)| c * v).sum()
    }

    pub fn gradient_in_cell(&self, cell: CellId, xi: Point) -> Point {
        let mp = MapPoint::new(self.space.mesh(), cell, xi);
        self.gradient_at(cell, xi, &mp)
    }

    pub fn gradient_at(&self, cell: CellId, xi: Point, mp: &MapPoint) -> Point {
        let grads = self.space.element().gradients(xi);
        let mut g = [0.0; 2];
        for (c, gr) in self.local(cell).zip(grads) {
            let p = mp.grad(gr);
            g[0] += c * p[0];
            g[1] += c * p[1];
        }
        g
    }

    pub fn laplacian_at(&self, cell: CellId, xi: Point, mp: &MapPoint) -> f64 {
        let hs = self.space.element().hessians(xi);
        self.local(cell)
            .zip(hs)
            .map(|(c, h)| c * mp.laplacian(h))
            .sum()
    }

    /// Point value; on shared faces the lowest active cell id is used.
    pub fn evaluate(&self, x: Point) -> Result<f64, FeError> {
        let (cell, xi) = self.space.mesh().locate_point(x)?;
        Ok(self.value_in_cell(cell, xi))
    }

    /// Overwrites constrained coefficients with their constrained values.
    pub fn apply_constraints(&mut self) {
        self.space.constraints().distribute(&mut self.coefficients);
    }
}

/// Nodal interpolation of `g`; constrained dofs are then overwritten so the
/// result is continuous.
pub fn interpolate(space: &Arc<FeSpace>, g: impl Fn(Point) -> f64) -> FeFunction {
    let coefficients: Vec<f64> = space.support_points().iter().map(|&x| g(x)).collect();
    let mut f = FeFunction {
        space: space.clone(),
        coefficients: coefficients.into(),
    };
    f.apply_constraints();
    f
}

/// Interpolates `source` onto `target` by point evaluation at the target
/// support points.
pub fn transfer(source: &FeFunction, target: &Arc<FeSpace>) -> Result<FeFunction, FeError> {
    let src_space = source.space();
    if src_space.same_as(target) {
        return Ok(FeFunction {
            space: target.clone(),
            coefficients: source.coefficients.clone(),
        });
    }
    let mut values = vec![0.0; target.n_dofs()];
    let same_mesh =
        Arc::ptr_eq(src_space.mesh(), target.mesh()) || **src_space.mesh() == **target.mesh();
    if same_mesh {
        // evaluate cell by cell without point location
        let e = target.element();
        for cell in target.mesh().active_cells() {
            for (k, &dof) in target.cell_dofs(cell).iter().enumerate() {
                values[dof] = source.value_in_cell(cell, e.node(k));
            }
        }
    } else {
        for (dof, &x) in target.support_points().iter().enumerate() {
            values[dof] = source.evaluate(x)?;
        }
    }
    let mut f = FeFunction {
        space: target.clone(),
        coefficients: values.into(),
    };
    f.apply_constraints();
    Ok(f)
}
