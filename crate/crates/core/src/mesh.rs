//! Two-dimensional quadrilateral mesh forest with isotropic refinement,
//! 1-irregularity closure, boundary colors and point location.
//!
//! Local vertex order of a cell is lower-left, lower-right, upper-left,
//! upper-right. Local faces are left (`xi = 0`), right (`xi = 1`),
//! bottom (`eta = 0`) and top (`eta = 1`).

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

pub type Point = [f64; 2];
pub type CellId = usize;
pub type VertexId = usize;

/// Vertex pairs of the four local faces.
pub const FACE_VERTICES: [[usize; 2]; 4] = [[0, 2], [1, 3], [0, 1], [2, 3]];

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 20;
const LOCATE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("point ({0}, {1}) lies outside the domain")]
    PointOutside(f64, f64),
    #[error("cell {0} is not an active cell")]
    InactiveCell(CellId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryColor {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub vertices: [VertexId; 4],
    pub level: usize,
    pub parent: Option<CellId>,
    pub children: Option<[CellId; 4]>,
    pub active: bool,
    /// Color per local face, `None` for interior faces.
    pub boundary: [Option<BoundaryColor>; 4],
}

/// What lies across a local face of an active cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceNeighbor {
    Boundary(BoundaryColor),
    /// An active cell sharing the whole face.
    Same(CellId),
    /// The face is split: two active cells cover the halves adjacent to the
    /// face's first and second vertex.
    Finer([CellId; 2]),
    /// The face is half of a face of a coarser active cell.
    Coarser(CellId),
}

#[derive(Debug, Clone, Default)]
pub struct RefinementMarks {
    pub cells: BTreeSet<CellId>,
}

impl RefinementMarks {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_cells(cells: impl IntoIterator<Item = CellId>) -> Self {
        Self {
            cells: cells.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }
}

fn edge_key(a: VertexId, b: VertexId) -> (VertexId, VertexId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone)]
pub struct QuadMesh {
    vertices: Vec<Point>,
    cells: Vec<Cell>,
    n_coarse: usize,
    /// Midpoint vertex of every split edge.
    midpoints: HashMap<(VertexId, VertexId), VertexId>,
    /// Split edge a half-edge was created from.
    parent_edge: HashMap<(VertexId, VertexId), (VertexId, VertexId)>,
    /// Active cells owning each edge; rebuilt after refinement.
    edge_cells: HashMap<(VertexId, VertexId), Vec<CellId>>,
}

impl PartialEq for QuadMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.cells == other.cells
    }
}

impl QuadMesh {
    /// Builds a coarse mesh; every boundary face gets `color(midpoint)`.
    pub fn from_cells(
        vertices: Vec<Point>,
        cells: Vec<[VertexId; 4]>,
        color: impl Fn(Point) -> BoundaryColor,
    ) -> Self {
        let n_coarse = cells.len();
        let mut mesh = QuadMesh {
            vertices,
            cells: cells
                .into_iter()
                .map(|v| Cell {
                    vertices: v,
                    level: 0,
                    parent: None,
                    children: None,
                    active: true,
                    boundary: [None; 4],
                })
                .collect(),
            n_coarse,
            midpoints: HashMap::new(),
            parent_edge: HashMap::new(),
            edge_cells: HashMap::new(),
        };
        mesh.rebuild_edge_cells();
        let mut colors = Vec::new();
        for (id, cell) in mesh.cells.iter().enumerate() {
            for (f, fv) in FACE_VERTICES.iter().enumerate() {
                let key = edge_key(cell.vertices[fv[0]], cell.vertices[fv[1]]);
                if mesh.edge_cells[&key].len() == 1 {
                    let a = mesh.vertices[key.0];
                    let b = mesh.vertices[key.1];
                    colors.push((id, f, color([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])])));
                }
            }
        }
        for (id, f, c) in colors {
            mesh.cells[id].boundary[f] = Some(c);
        }
        mesh
    }

    /// The L-shaped domain `(0,1)^2 \ [0.5,1)^2` as three half-unit cells;
    /// faces on `x_1 = 0` are Neumann, all other boundary faces Dirichlet.
    pub fn lshape() -> Self {
        let vertices = vec![
            [0.0, 0.0],
            [0.5, 0.0],
            [1.0, 0.0],
            [0.0, 0.5],
            [0.5, 0.5],
            [1.0, 0.5],
            [0.0, 1.0],
            [0.5, 1.0],
        ];
        let cells = vec![[0, 1, 3, 4], [1, 2, 4, 5], [3, 4, 6, 7]];
        Self::from_cells(vertices, cells, |x| {
            if x[0] == 0.0 {
                BoundaryColor::Neumann
            } else {
                BoundaryColor::Dirichlet
            }
        })
    }

    /// Unit square as a single cell with all faces Dirichlet.
    pub fn unit_square() -> Self {
        Self::from_cells(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            vec![[0, 1, 2, 3]],
            |_| BoundaryColor::Dirichlet,
        )
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: VertexId) -> Point {
        self.vertices[v]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id]
    }

    pub fn n_cells_total(&self) -> usize {
        self.cells.len()
    }

    /// Active cells in creation order.
    pub fn active_cells(&self) -> impl Iterator<Item = CellId> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.active)
            .map(|(i, _)| i)
    }

    pub fn n_active_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.active).count()
    }

    /// Number of vertices used by active cells.
    pub fn n_active_vertices(&self) -> usize {
        let mut used = vec![false; self.vertices.len()];
        for id in self.active_cells() {
            for &v in &self.cells[id].vertices {
                used[v] = true;
            }
        }
        used.iter().filter(|&&u| u).count()
    }

    pub fn cell_points(&self, id: CellId) -> [Point; 4] {
        self.cells[id].vertices.map(|v| self.vertices[v])
    }

    /// Vertex ids of local face `f`.
    pub fn face_vertices(&self, id: CellId, f: usize) -> [VertexId; 2] {
        let v = &self.cells[id].vertices;
        [v[FACE_VERTICES[f][0]], v[FACE_VERTICES[f][1]]]
    }

    /// Midpoint vertex of the edge `(a, b)` if that edge has been split.
    pub fn edge_midpoint(&self, a: VertexId, b: VertexId) -> Option<VertexId> {
        self.midpoints.get(&edge_key(a, b)).copied()
    }

    /// Bilinear map from the unit square onto cell `id`.
    pub fn map_to_physical(&self, id: CellId, xi: Point) -> Point {
        let p = self.cell_points(id);
        let n = bilinear_weights(xi);
        let mut x = [0.0; 2];
        for k in 0..4 {
            x[0] += n[k] * p[k][0];
            x[1] += n[k] * p[k][1];
        }
        x
    }

    /// Jacobian `d x / d xi` (rows: physical component, columns: reference direction).
    pub fn jacobian(&self, id: CellId, xi: Point) -> [[f64; 2]; 2] {
        let p = self.cell_points(id);
        let (s, t) = (xi[0], xi[1]);
        let dn_ds = [-(1.0 - t), 1.0 - t, -t, t];
        let dn_dt = [-(1.0 - s), -s, 1.0 - s, s];
        let mut j = [[0.0; 2]; 2];
        for k in 0..4 {
            for d in 0..2 {
                j[d][0] += dn_ds[k] * p[k][d];
                j[d][1] += dn_dt[k] * p[k][d];
            }
        }
        j
    }

    pub fn cell_area(&self, id: CellId) -> f64 {
        // exact for bilinear maps: 2-point Gauss on the Jacobian determinant
        let g = 0.5 / 3f64.sqrt();
        let pts = [0.5 - g, 0.5 + g];
        let mut a = 0.0;
        for &s in &pts {
            for &t in &pts {
                let j = self.jacobian(id, [s, t]);
                a += 0.25 * (j[0][0] * j[1][1] - j[0][1] * j[1][0]);
            }
        }
        a
    }

    /// Longest edge of a cell.
    pub fn cell_diameter(&self, id: CellId) -> f64 {
        let p = self.cell_points(id);
        FACE_VERTICES
            .iter()
            .map(|f| dist(p[f[0]], p[f[1]]))
            .fold(0.0, f64::max)
    }

    /// Reference coordinates of `x` with respect to cell `id`, by Newton
    /// iteration on the bilinear map. `None` if Newton fails.
    pub fn to_reference(&self, id: CellId, x: Point) -> Option<Point> {
        let mut xi = [0.5, 0.5];
        let scale = self.cell_diameter(id).max(f64::MIN_POSITIVE);
        for _ in 0..NEWTON_MAX_ITER {
            let fx = self.map_to_physical(id, xi);
            let r = [x[0] - fx[0], x[1] - fx[1]];
            if r[0].hypot(r[1]) <= NEWTON_TOL * scale {
                return Some(xi);
            }
            let j = self.jacobian(id, xi);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < f64::MIN_POSITIVE {
                return None;
            }
            xi[0] += (j[1][1] * r[0] - j[0][1] * r[1]) / det;
            xi[1] += (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        }
        let fx = self.map_to_physical(id, xi);
        ((x[0] - fx[0]).hypot(x[1] - fx[1]) <= 1e3 * NEWTON_TOL * scale).then_some(xi)
    }

    fn contains(&self, id: CellId, x: Point) -> Option<Point> {
        let p = self.cell_points(id);
        let tol = LOCATE_TOL.max(LOCATE_TOL * self.cell_diameter(id));
        let (lo, hi) = p.iter().fold(
            ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
            |(lo, hi), q| ([lo[0].min(q[0]), lo[1].min(q[1])], [hi[0].max(q[0]), hi[1].max(q[1])]),
        );
        if x[0] < lo[0] - tol || x[0] > hi[0] + tol || x[1] < lo[1] - tol || x[1] > hi[1] + tol {
            return None;
        }
        let xi = self.to_reference(id, x)?;
        let inside = xi.iter().all(|&c| (-LOCATE_TOL..=1.0 + LOCATE_TOL).contains(&c));
        inside.then(|| xi.map(|c| c.clamp(0.0, 1.0)))
    }

    /// Active cell containing `x` and the reference coordinates of `x` in
    /// it. On shared faces and vertices the lowest active cell id wins.
    pub fn locate_point(&self, x: Point) -> Result<(CellId, Point), MeshError> {
        let mut best: Option<(CellId, Point)> = None;
        let mut stack: Vec<CellId> = (0..self.n_coarse).rev().collect();
        while let Some(id) = stack.pop() {
            if self.contains(id, x).is_none() {
                continue;
            }
            match self.cells[id].children {
                Some(ch) => stack.extend(ch.iter().rev()),
                None => {
                    if best.is_none_or(|(b, _)| id < b) {
                        best = Some((id, self.contains(id, x).unwrap()));
                    }
                }
            }
        }
        best.ok_or(MeshError::PointOutside(x[0], x[1]))
    }

    /// Neighbor information across local face `f` of active cell `id`.
    pub fn face_neighbor(&self, id: CellId, f: usize) -> FaceNeighbor {
        if let Some(c) = self.cells[id].boundary[f] {
            return FaceNeighbor::Boundary(c);
        }
        let [a, b] = self.face_vertices(id, f);
        let key = edge_key(a, b);
        if let Some(owners) = self.edge_cells.get(&key) {
            if let Some(&other) = owners.iter().find(|&&c| c != id) {
                return FaceNeighbor::Same(other);
            }
        }
        if let Some(&m) = self.midpoints.get(&key) {
            let ca = self.edge_cells[&edge_key(a, m)][0];
            let cb = self.edge_cells[&edge_key(m, b)][0];
            return FaceNeighbor::Finer([ca, cb]);
        }
        let parent = self.parent_edge[&key];
        FaceNeighbor::Coarser(self.edge_cells[&parent][0])
    }

    /// True if every face of every active cell carries at most one hanging vertex.
    pub fn is_one_irregular(&self) -> bool {
        self.active_cells().all(|id| !self.violates_irregularity(id))
    }

    fn violates_irregularity(&self, id: CellId) -> bool {
        (0..4).any(|f| {
            let [a, b] = self.face_vertices(id, f);
            match self.midpoints.get(&edge_key(a, b)) {
                Some(&m) => {
                    self.midpoints.contains_key(&edge_key(a, m))
                        || self.midpoints.contains_key(&edge_key(m, b))
                }
                None => false,
            }
        })
    }

    /// Refines every marked cell isotropically and then keeps refining cells
    /// whose faces carry more than one hanging vertex until the mesh is
    /// 1-irregular again. Children are appended in creation order.
    pub fn refine(&self, marks: &RefinementMarks) -> Result<QuadMesh, MeshError> {
        let mut mesh = self.clone();
        for &id in &marks.cells {
            if id >= mesh.cells.len() || !mesh.cells[id].active {
                return Err(MeshError::InactiveCell(id));
            }
        }
        for &id in &marks.cells {
            mesh.split_cell(id);
        }
        loop {
            let violators: Vec<CellId> = mesh
                .active_cells()
                .filter(|&id| mesh.violates_irregularity(id))
                .collect();
            if violators.is_empty() {
                break;
            }
            for id in violators {
                mesh.split_cell(id);
            }
        }
        mesh.rebuild_edge_cells();
        Ok(mesh)
    }

    fn midpoint_of(&mut self, a: VertexId, b: VertexId) -> VertexId {
        let key = edge_key(a, b);
        if let Some(&m) = self.midpoints.get(&key) {
            return m;
        }
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let m = self.vertices.len();
        self.vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        self.midpoints.insert(key, m);
        self.parent_edge.insert(edge_key(a, m), key);
        self.parent_edge.insert(edge_key(m, b), key);
        m
    }

    fn split_cell(&mut self, id: CellId) {
        let parent = self.cells[id].clone();
        let [v0, v1, v2, v3] = parent.vertices;
        let mb = self.midpoint_of(v0, v1);
        let mt = self.midpoint_of(v2, v3);
        let ml = self.midpoint_of(v0, v2);
        let mr = self.midpoint_of(v1, v3);
        let center = self.map_to_physical(id, [0.5, 0.5]);
        let c = self.vertices.len();
        self.vertices.push(center);

        let verts = [
            [v0, mb, ml, c],
            [mb, v1, c, mr],
            [ml, c, v2, mt],
            [c, mr, mt, v3],
        ];
        // faces inherited from the parent: (left|right, bottom|top)
        let inherited = [[0, 2], [1, 2], [0, 3], [1, 3]];
        let first = self.cells.len();
        for (k, v) in verts.into_iter().enumerate() {
            let mut boundary = [None; 4];
            for &f in &inherited[k] {
                boundary[f] = parent.boundary[f];
            }
            self.cells.push(Cell {
                vertices: v,
                level: parent.level + 1,
                parent: Some(id),
                children: None,
                active: true,
                boundary,
            });
        }
        let cell = &mut self.cells[id];
        cell.active = false;
        cell.children = Some([first, first + 1, first + 2, first + 3]);
    }

    fn rebuild_edge_cells(&mut self) {
        let mut map: HashMap<(VertexId, VertexId), Vec<CellId>> = HashMap::new();
        for (id, cell) in self.cells.iter().enumerate().filter(|(_, c)| c.active) {
            for fv in FACE_VERTICES {
                map.entry(edge_key(cell.vertices[fv[0]], cell.vertices[fv[1]]))
                    .or_default()
                    .push(id);
            }
        }
        self.edge_cells = map;
    }

    /// Geometry at parameter `s` in `[0, 1]` along local face `f`, measured
    /// from the face's first vertex.
    pub fn face_point(&self, id: CellId, f: usize, s: f64) -> FacePoint {
        let xi = face_reference_point(f, s);
        let x = self.map_to_physical(id, xi);
        let j = self.jacobian(id, xi);
        let col = if f < 2 { 1 } else { 0 };
        let t = [j[0][col], j[1][col]];
        let ds = t[0].hypot(t[1]);
        let mut normal = [t[1] / ds, -t[0] / ds];
        let c = self.map_to_physical(id, [0.5, 0.5]);
        if normal[0] * (x[0] - c[0]) + normal[1] * (x[1] - c[1]) < 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        FacePoint { xi, x, ds, normal }
    }

    pub fn total_area(&self) -> f64 {
        self.active_cells().map(|id| self.cell_area(id)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacePoint {
    pub xi: Point,
    pub x: Point,
    /// Length element `|dx/ds|`.
    pub ds: f64,
    /// Outward unit normal.
    pub normal: Point,
}

/// Reference coordinates of parameter `s` on local face `f`.
pub fn face_reference_point(f: usize, s: f64) -> Point {
    match f {
        0 => [0.0, s],
        1 => [1.0, s],
        2 => [s, 0.0],
        _ => [s, 1.0],
    }
}

/// Q1 shape function values at `xi` in local vertex order.
pub fn bilinear_weights(xi: Point) -> [f64; 4] {
    let (s, t) = (xi[0], xi[1]);
    [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t]
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
