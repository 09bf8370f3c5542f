//! Compressed sparse row matrices, dense vectors and a Jacobi preconditioned
//! conjugate gradient solver, together with the symmetric elimination of
//! Dirichlet rows and hanging-node constraints used by every slab system.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Deref, DerefMut};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinAlgError {
    #[error("index ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("conjugate gradient did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("cyclic hanging-node constraint involving dof {0}")]
    CyclicConstraint(usize),
}

/// Coefficient vector of a finite element function or an assembled load.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(pub Vec<f64>);

impl DenseVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &DenseVector) {
        for (y, x) in self.0.iter_mut().zip(&other.0) {
            *y += alpha * x;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.0.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
}

impl SparsityPattern {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    /// Column indices of row `i`.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    fn find(&self, row: usize, col: usize) -> Option<usize> {
        let start = self.row_offsets[row];
        self.row(row).binary_search(&col).ok().map(|k| start + k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pattern: SparsityPattern,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinAlgError> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(LinAlgError::IndexOutOfRange {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, then sort and merge each row
        let mut buckets = vec![(0usize, 0.0f64); triplets.len()];
        let mut fill = counts.clone();
        for &(r, c, v) in triplets {
            buckets[fill[r]] = (c, v);
            fill[r] += 1;
        }
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        for r in 0..n_rows {
            let row = &mut buckets[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            pattern: SparsityPattern {
                n_rows,
                n_cols,
                row_offsets,
                col_indices,
            },
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &triplets).expect("identity indices are in range")
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored value at `(row, col)`, zero if the entry is not in the pattern.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.find(row, col).map_or(0.0, |k| self.values[k])
    }

    /// Iterates `(col, value)` over the stored entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.pattern.row_offsets[i]..self.pattern.row_offsets[i + 1];
        self.pattern.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n_rows())
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, i)).collect()
    }

    pub fn spmv(&self, x: &DenseVector) -> Result<DenseVector, LinAlgError> {
        if x.len() != self.n_cols() {
            return Err(LinAlgError::DimensionMismatch {
                expected: self.n_cols(),
                actual: x.len(),
            });
        }
        let mut y = DenseVector::zeros(self.n_rows());
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.pattern.row_offsets[i]..self.pattern.row_offsets[i + 1] {
                acc += self.values[k] * x[self.pattern.col_indices[k]];
            }
            *yi = acc;
        }
    }

    /// `self + alpha * other`; patterns are merged.
    pub fn add_scaled(&self, alpha: f64, other: &SparseMatrix) -> Result<SparseMatrix, LinAlgError> {
        if self.n_rows() != other.n_rows() || self.n_cols() != other.n_cols() {
            return Err(LinAlgError::DimensionMismatch {
                expected: self.n_rows(),
                actual: other.n_rows(),
            });
        }
        if self.pattern == other.pattern {
            return Ok(SparseMatrix {
                pattern: self.pattern.clone(),
                values: self
                    .values
                    .iter()
                    .zip(&other.values)
                    .map(|(a, b)| a + alpha * b)
                    .collect(),
            });
        }
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, alpha * v)));
        SparseMatrix::from_triplets(self.n_rows(), self.n_cols(), &t)
    }

    pub fn scaled(&self, alpha: f64) -> SparseMatrix {
        SparseMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `max |A_ij - A_ji| / max |A_ij|`, zero for the empty matrix.
    pub fn relative_asymmetry(&self) -> f64 {
        let max_abs = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_abs == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n_rows() {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / max_abs
    }

    /// Dense row-major copy, for small oracles and diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols()]; self.n_rows()];
        for i in 0..self.n_rows() {
            for (j, v) in self.row(i) {
                d[i][j] = v;
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverControl {
    pub max_iterations: usize,
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
}

impl Default for SolverControl {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            relative_tolerance: 1e-10,
            absolute_tolerance: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `A x = b` with Jacobi preconditioned CG starting from zero.
pub fn cg_solve(
    a: &SparseMatrix,
    b: &DenseVector,
    ctrl: &SolverControl,
) -> Result<(DenseVector, SolveReport), LinAlgError> {
    cg_solve_with_guess(a, b, None, ctrl)
}

/// Jacobi preconditioned CG. Rows whose only non-zero entry is the diagonal
/// (eliminated Dirichlet rows, condensed hanging rows) are solved directly in
/// the initial guess, so their values come out exactly `b_i / A_ii`.
pub fn cg_solve_with_guess(
    a: &SparseMatrix,
    b: &DenseVector,
    guess: Option<&DenseVector>,
    ctrl: &SolverControl,
) -> Result<(DenseVector, SolveReport), LinAlgError> {
    let n = a.n_rows();
    if a.n_cols() != n || b.len() != n {
        return Err(LinAlgError::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    let mut x = match guess {
        Some(g) if g.len() == n => g.clone(),
        Some(g) => {
            return Err(LinAlgError::DimensionMismatch {
                expected: n,
                actual: g.len(),
            })
        }
        None => DenseVector::zeros(n),
    };
    let diag = a.diagonal();
    for i in 0..n {
        let decoupled = a.row(i).all(|(j, v)| j == i || v == 0.0);
        if decoupled && diag[i] != 0.0 {
            x[i] = b[i] / diag[i];
        }
    }
    let inv_diag: Vec<f64> = diag
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let b_norm = b.norm();
    let target = (ctrl.relative_tolerance * b_norm).max(ctrl.absolute_tolerance);

    let mut r = vec![0.0; n];
    a.spmv_into(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut res = dot(&r, &r).sqrt();
    if res <= target {
        return Ok((x, SolveReport { iterations: 0, residual: res }));
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=ctrl.max_iterations {
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(LinAlgError::NotConverged {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt();
        if res <= target {
            return Ok((x, SolveReport { iterations: it, residual: res }));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinAlgError::NotConverged {
        iterations: ctrl.max_iterations,
        residual: res,
    })
}

/// Symmetric elimination of prescribed values: row and column of every
/// constrained dof are zeroed, the diagonal set to one and the right-hand
/// side corrected so the free equations see the boundary values.
pub fn apply_dirichlet(
    a: &mut SparseMatrix,
    b: &mut DenseVector,
    constraints: &BTreeMap<usize, f64>,
) -> Result<(), LinAlgError> {
    if constraints.is_empty() {
        return Ok(());
    }
    let n = a.n_rows();
    if b.len() != n {
        return Err(LinAlgError::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    if let Some((&d, _)) = constraints.range(n..).next() {
        return Err(LinAlgError::IndexOutOfRange {
            row: d,
            col: d,
            n_rows: n,
            n_cols: n,
        });
    }
    let offsets = a.pattern.row_offsets.clone();
    for i in 0..n {
        let row_constrained = constraints.get(&i);
        for k in offsets[i]..offsets[i + 1] {
            let j = a.pattern.col_indices[k];
            if let Some(&g) = constraints.get(&j) {
                if row_constrained.is_none() {
                    b[i] -= a.values[k] * g;
                }
                a.values[k] = 0.0;
            } else if row_constrained.is_some() {
                a.values[k] = 0.0;
            }
        }
    }
    for (&d, &g) in constraints {
        match a.pattern.find(d, d) {
            Some(k) => a.values[k] = 1.0,
            None => {
                // diagonal missing from the pattern: rebuild with it present
                let mut t = a.triplets();
                t.push((d, d, 1.0));
                *a = SparseMatrix::from_triplets(n, n, &t)?;
            }
        }
        b[d] = g;
    }
    Ok(())
}

/// Linear constraints `x_s = sum_k w_k x_{m_k} + c_s` tying slave dofs to
/// master dofs (hanging nodes on non-conforming faces).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    lines: BTreeMap<usize, ConstraintLine>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintLine {
    pub entries: Vec<(usize, f64)>,
    pub inhomogeneity: f64,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn add_line(&mut self, slave: usize, entries: Vec<(usize, f64)>, inhomogeneity: f64) {
        self.lines.insert(
            slave,
            ConstraintLine {
                entries,
                inhomogeneity,
            },
        );
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.lines.contains_key(&dof)
    }

    pub fn line(&self, dof: usize) -> Option<&ConstraintLine> {
        self.lines.get(&dof)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &ConstraintLine)> {
        self.lines.iter().map(|(&s, l)| (s, l))
    }

    /// Substitutes slaves appearing as masters until every line refers to
    /// unconstrained dofs only; duplicate masters are merged.
    pub fn close(&mut self) -> Result<(), LinAlgError> {
        let slaves: Vec<usize> = self.lines.keys().copied().collect();
        let mut done: BTreeMap<usize, ConstraintLine> = BTreeMap::new();
        for s in slaves {
            let mut visiting = BTreeSet::new();
            self.resolve(s, &mut done, &mut visiting)?;
        }
        self.lines = done;
        Ok(())
    }

    fn resolve(
        &self,
        s: usize,
        done: &mut BTreeMap<usize, ConstraintLine>,
        visiting: &mut BTreeSet<usize>,
    ) -> Result<ConstraintLine, LinAlgError> {
        if let Some(l) = done.get(&s) {
            return Ok(l.clone());
        }
        if !visiting.insert(s) {
            return Err(LinAlgError::CyclicConstraint(s));
        }
        let line = &self.lines[&s];
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        let mut inhom = line.inhomogeneity;
        for &(m, w) in &line.entries {
            if self.lines.contains_key(&m) {
                let sub = self.resolve(m, done, visiting)?;
                for (mm, ww) in sub.entries {
                    *acc.entry(mm).or_insert(0.0) += w * ww;
                }
                inhom += w * sub.inhomogeneity;
            } else {
                *acc.entry(m).or_insert(0.0) += w;
            }
        }
        visiting.remove(&s);
        let closed = ConstraintLine {
            entries: acc.into_iter().collect(),
            inhomogeneity: inhom,
        };
        done.insert(s, closed.clone());
        Ok(closed)
    }

    /// Overwrites every slave with its constrained value.
    pub fn distribute(&self, x: &mut [f64]) {
        for (&s, line) in &self.lines {
            x[s] = line
                .entries
                .iter()
                .map(|&(m, w)| w * x[m])
                .sum::<f64>()
                + line.inhomogeneity;
        }
    }

    fn expand(&self, i: usize) -> (Vec<(usize, f64)>, f64) {
        match self.lines.get(&i) {
            Some(l) => (l.entries.clone(), l.inhomogeneity),
            None => (vec![(i, 1.0)], 0.0),
        }
    }
}

/// Condenses `constraints` into `(a, b)`: every contribution of a slave is
/// distributed onto its masters and the slave row becomes `x_s = 0` with a
/// unit-scaled diagonal. The constraint set must be closed. After solving,
/// [`ConstraintSet::distribute`] restores the slave values, so
/// `slave = sum(weights * masters)` then holds exactly.
pub fn condense_hanging(
    a: &mut SparseMatrix,
    b: &mut DenseVector,
    constraints: &ConstraintSet,
) -> Result<(), LinAlgError> {
    if constraints.is_empty() {
        return Ok(());
    }
    let n = a.n_rows();
    if b.len() != n {
        return Err(LinAlgError::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    for (s, line) in constraints.iter() {
        for &(m, _) in &line.entries {
            if constraints.is_constrained(m) {
                return Err(LinAlgError::CyclicConstraint(s));
            }
        }
    }
    let mut triplets = Vec::with_capacity(a.nnz() * 2);
    let mut new_b = vec![0.0; n];
    for i in 0..n {
        let (rows, _) = constraints.expand(i);
        for &(ri, wi) in &rows {
            new_b[ri] += wi * b[i];
        }
        for (j, v) in a.row(i) {
            if v == 0.0 {
                continue;
            }
            let (cols, cj) = constraints.expand(j);
            for &(ri, wi) in &rows {
                for &(ci, wj) in &cols {
                    triplets.push((ri, ci, wi * wj * v));
                }
                if cj != 0.0 {
                    new_b[ri] -= wi * v * cj;
                }
            }
        }
    }
    // slave rows: keep the matrix scale so Jacobi stays balanced
    let diag_scale = {
        let d: Vec<f64> = a
            .diagonal()
            .into_iter()
            .enumerate()
            .filter(|(i, v)| !constraints.is_constrained(*i) && *v != 0.0)
            .map(|(_, v)| v.abs())
            .collect();
        if d.is_empty() {
            1.0
        } else {
            d.iter().sum::<f64>() / d.len() as f64
        }
    };
    triplets.retain(|&(r, c, _)| !constraints.is_constrained(r) && !constraints.is_constrained(c));
    for (s, _) in constraints.iter() {
        triplets.push((s, s, diag_scale));
        new_b[s] = 0.0;
    }
    *a = SparseMatrix::from_triplets(n, n, &triplets)?;
    b.0 = new_b;
    Ok(())
}
