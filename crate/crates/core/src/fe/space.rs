use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use super::element::{LagrangeElement, LocalObject};
use super::FeError;
use crate::mesh::{BoundaryColor, CellId, FaceNeighbor, Point, QuadMesh, VertexId};
use crate::sparse::ConstraintSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum DofObject {
    Vertex(VertexId),
    Edge(VertexId, VertexId),
    Cell(CellId),
}

fn edge(a: VertexId, b: VertexId) -> DofObject {
    DofObject::Edge(a.min(b), a.max(b))
}

/// Continuous Lagrange space of degree 1 or 2 on a [`QuadMesh`].
///
/// Dofs are numbered in active-cell order, local dofs in lexicographic
/// order, first come first served. Dofs on refined sides of hanging faces
/// are constrained to the coarse side's trace.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<QuadMesh>,
    element: LagrangeElement,
    n_dofs: usize,
    cell_dofs: Vec<Vec<usize>>,
    support_points: Vec<Point>,
    constraints: ConstraintSet,
}

impl FeSpace {
    pub fn new(mesh: Arc<QuadMesh>, degree: usize) -> Result<Self, FeError> {
        let element = LagrangeElement::new(degree).ok_or(FeError::UnsupportedDegree(degree))?;
        let mut numbering: HashMap<DofObject, usize> = HashMap::new();
        let mut cell_dofs = vec![Vec::new(); mesh.n_cells_total()];
        let mut support_points = Vec::new();
        for id in mesh.active_cells() {
            let cell = mesh.cell(id);
            let mut dofs = Vec::with_capacity(element.n_local());
            for k in 0..element.n_local() {
                let obj = match element.object(k) {
                    LocalObject::Vertex(v) => DofObject::Vertex(cell.vertices[v]),
                    LocalObject::Face(f) => {
                        let [a, b] = mesh.face_vertices(id, f);
                        edge(a, b)
                    }
                    LocalObject::Interior => DofObject::Cell(id),
                };
                let next = numbering.len();
                let dof = *numbering.entry(obj).or_insert(next);
                if dof == next {
                    support_points.push(mesh.map_to_physical(id, element.node(k)));
                }
                dofs.push(dof);
            }
            cell_dofs[id] = dofs;
        }
        let n_dofs = numbering.len();
        let constraints = hanging_constraints(&mesh, element, &numbering)?;
        Ok(Self {
            mesh,
            element,
            n_dofs,
            cell_dofs,
            support_points,
            constraints,
        })
    }

    pub fn mesh(&self) -> &Arc<QuadMesh> {
        &self.mesh
    }

    pub fn element(&self) -> LagrangeElement {
        self.element
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// Global dofs of active cell `id` in local order.
    pub fn cell_dofs(&self, id: CellId) -> &[usize] {
        &self.cell_dofs[id]
    }

    pub fn support_points(&self) -> &[Point] {
        &self.support_points
    }

    pub fn support_point(&self, dof: usize) -> Point {
        self.support_points[dof]
    }

    /// Closed hanging-node constraints of this space.
    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    /// Dofs lying on boundary faces of the given color.
    pub fn boundary_dofs(&self, color: BoundaryColor) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for id in self.mesh.active_cells() {
            for f in 0..4 {
                if self.mesh.cell(id).boundary[f] == Some(color) {
                    for k in self.element.face_dofs(f) {
                        out.insert(self.cell_dofs[id][k]);
                    }
                }
            }
        }
        out
    }

    /// `dof -> g(support point)` for all dofs on boundary faces of `color`.
    pub fn boundary_values(
        &self,
        color: BoundaryColor,
        g: impl Fn(Point) -> f64,
    ) -> BTreeMap<usize, f64> {
        self.boundary_dofs(color)
            .into_iter()
            .map(|d| (d, g(self.support_points[d])))
            .collect()
    }

    /// True if both spaces have the same degree on structurally equal meshes.
    pub fn same_as(&self, other: &FeSpace) -> bool {
        self.degree() == other.degree()
            && (Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh)
    }
}

/// Values of the 1D quadratic Lagrange basis (nodes 0, 1, 1/2) at `s`.
fn quadratic_trace_weights(s: f64) -> [f64; 3] {
    [
        (1.0 - s) * (1.0 - 2.0 * s),
        s * (2.0 * s - 1.0),
        4.0 * s * (1.0 - s),
    ]
}

fn hanging_constraints(
    mesh: &QuadMesh,
    element: LagrangeElement,
    numbering: &HashMap<DofObject, usize>,
) -> Result<ConstraintSet, FeError> {
    let mut c = ConstraintSet::new();
    for id in mesh.active_cells() {
        for f in 0..4 {
            if !matches!(mesh.face_neighbor(id, f), FaceNeighbor::Finer(_)) {
                continue;
            }
            let [a, b] = mesh.face_vertices(id, f);
            let m = mesh
                .edge_midpoint(a, b)
                .expect("a face with finer neighbors is split");
            let da = numbering[&DofObject::Vertex(a)];
            let db = numbering[&DofObject::Vertex(b)];
            let dm = numbering[&DofObject::Vertex(m)];
            match element.degree() {
                1 => c.add_line(dm, vec![(da, 0.5), (db, 0.5)], 0.0),
                _ => {
                    let de = numbering[&edge(a, b)];
                    c.add_line(dm, vec![(de, 1.0)], 0.0);
                    for (sub, s) in [(edge(a, m), 0.25), (edge(m, b), 0.75)] {
                        let w = quadratic_trace_weights(s);
                        c.add_line(numbering[&sub], vec![(da, w[0]), (db, w[1]), (de, w[2])], 0.0);
                    }
                }
            }
        }
    }
    c.close()?;
    Ok(c)
}
