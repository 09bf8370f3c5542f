//! Space-time slabs `Q_n = T_{h,n} x I_n` and the ordered slab list.
//!
//! Each slab owns its mesh, a primal space (dG(0) in time, `Q_p` in space)
//! and a dual space (cG(1) in time, `Q_q` in space), plus reference-counted
//! handles to the vectors computed on it.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::fe::{FeError, FeSpace};
use crate::mesh::QuadMesh;
use crate::sparse::DenseVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlabError {
    #[error("invalid time interval ({0}, {1})")]
    InvalidInterval(f64, f64),
    #[error("at least one slab is required")]
    NoSlabs,
    #[error("slab index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("{tag:?} vector has length {actual}, expected {expected}")]
    StorageLength {
        tag: StorageTag,
        expected: usize,
        actual: usize,
    },
    #[error(transparent)]
    Fe(#[from] FeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    pub t_m: f64,
    pub t_n: f64,
}

impl TimeInterval {
    pub fn new(t_m: f64, t_n: f64) -> Result<Self, SlabError> {
        if t_m < t_n && t_m.is_finite() && t_n.is_finite() {
            Ok(Self { t_m, t_n })
        } else {
            Err(SlabError::InvalidInterval(t_m, t_n))
        }
    }

    pub fn tau(&self) -> f64 {
        self.t_n - self.t_m
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.t_m + self.t_n)
    }

    /// Maps a reference time in `[0, 1]` onto the interval.
    pub fn map(&self, t_hat: f64) -> f64 {
        self.tau() * t_hat + self.t_m
    }
}

/// Temporal basis functions on a slab: one constant for the primal, two
/// hats for the dual.
pub mod time_basis {
    use super::TimeInterval;

    /// `zeta_0 = 1` on `I_n`.
    pub fn primal(_interval: &TimeInterval, _t: f64) -> f64 {
        1.0
    }

    /// `(xi_0(t), xi_1(t))` with `xi_0(t_m) = 1` and `xi_1(t_n) = 1`.
    pub fn dual(interval: &TimeInterval, t: f64) -> [f64; 2] {
        let s = (t - interval.t_m) / interval.tau();
        [1.0 - s, s]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StorageTag {
    /// dG(0) primal coefficients on `I_n`.
    PrimalSolution,
    /// Dual coefficients at `t_m`.
    DualAtStart,
    /// Signed cell indicators in active-cell order.
    CellIndicators,
    /// Squared goal-norm contribution of the slab (length 1).
    GoalNormContribution,
}

#[derive(Debug)]
pub struct Slab {
    pub interval: TimeInterval,
    mesh: Arc<QuadMesh>,
    primal: Arc<FeSpace>,
    dual: Arc<FeSpace>,
    storage: HashMap<StorageTag, Arc<DenseVector>>,
    fetches: AtomicUsize,
}

impl Clone for Slab {
    fn clone(&self) -> Self {
        Self {
            interval: self.interval,
            mesh: self.mesh.clone(),
            primal: self.primal.clone(),
            dual: self.dual.clone(),
            storage: self.storage.clone(),
            fetches: AtomicUsize::new(0),
        }
    }
}

impl Slab {
    pub fn new(
        interval: TimeInterval,
        mesh: Arc<QuadMesh>,
        primal_degree: usize,
        dual_degree: usize,
    ) -> Result<Self, SlabError> {
        let primal = Arc::new(FeSpace::new(mesh.clone(), primal_degree)?);
        let dual = Arc::new(FeSpace::new(mesh.clone(), dual_degree)?);
        Ok(Self {
            interval,
            mesh,
            primal,
            dual,
            storage: HashMap::new(),
            fetches: AtomicUsize::new(0),
        })
    }

    /// A slab on `interval` sharing mesh and spaces with `self`, without storage.
    pub fn with_interval(&self, interval: TimeInterval) -> Self {
        Self {
            interval,
            mesh: self.mesh.clone(),
            primal: self.primal.clone(),
            dual: self.dual.clone(),
            storage: HashMap::new(),
            fetches: AtomicUsize::new(0),
        }
    }

    pub fn mesh(&self) -> &Arc<QuadMesh> {
        &self.mesh
    }

    pub fn primal_space(&self) -> &Arc<FeSpace> {
        &self.primal
    }

    pub fn dual_space(&self) -> &Arc<FeSpace> {
        &self.dual
    }

    pub fn tau(&self) -> f64 {
        self.interval.tau()
    }

    /// Replaces the mesh, rebuilds both spaces and drops all storage.
    pub fn set_mesh(&mut self, mesh: Arc<QuadMesh>) -> Result<(), SlabError> {
        let p = self.primal.degree();
        let q = self.dual.degree();
        *self = Slab::new(self.interval, mesh, p, q)?;
        Ok(())
    }

    fn expected_len(&self, tag: StorageTag) -> usize {
        match tag {
            StorageTag::PrimalSolution => self.primal.n_dofs(),
            StorageTag::DualAtStart => self.dual.n_dofs(),
            StorageTag::CellIndicators => self.mesh.n_active_cells(),
            StorageTag::GoalNormContribution => 1,
        }
    }

    pub fn attach_storage(
        &mut self,
        tag: StorageTag,
        vector: impl Into<Arc<DenseVector>>,
    ) -> Result<(), SlabError> {
        let vector = vector.into();
        let expected = self.expected_len(tag);
        if vector.len() != expected {
            return Err(SlabError::StorageLength {
                tag,
                expected,
                actual: vector.len(),
            });
        }
        self.storage.insert(tag, vector);
        Ok(())
    }

    /// Shared handle to a stored vector, `None` if nothing is attached.
    pub fn fetch_storage(&self, tag: StorageTag) -> Option<Arc<DenseVector>> {
        self.fetches.fetch_add(1, Ordering::Relaxed);
        self.storage.get(&tag).cloned()
    }

    pub fn clear_storage(&mut self) {
        self.storage.clear();
    }

    /// Number of `fetch_storage` calls since the slab was created.
    pub fn fetch_count(&self) -> usize {
        self.fetches.load(Ordering::Relaxed)
    }
}

/// Slabs ordered by time, partitioning `(t0, T)` without gaps.
#[derive(Debug, Clone)]
pub struct SlabList {
    slabs: Vec<Slab>,
    pub loop_index: usize,
}

impl SlabList {
    /// `n` slabs of equal length, each on the coarse mesh.
    pub fn uniform(
        coarse: Arc<QuadMesh>,
        t0: f64,
        t_end: f64,
        n: usize,
        primal_degree: usize,
        dual_degree: usize,
    ) -> Result<Self, SlabError> {
        if n == 0 {
            return Err(SlabError::NoSlabs);
        }
        TimeInterval::new(t0, t_end)?;
        let tau = (t_end - t0) / n as f64;
        let endpoint = |k: usize| if k == n { t_end } else { t0 + k as f64 * tau };
        let first = Slab::new(
            TimeInterval::new(endpoint(0), endpoint(1))?,
            coarse,
            primal_degree,
            dual_degree,
        )?;
        let mut slabs = Vec::with_capacity(n);
        for k in 1..n {
            slabs.push(first.with_interval(TimeInterval::new(endpoint(k), endpoint(k + 1))?));
        }
        slabs.insert(0, first);
        Ok(Self {
            slabs,
            loop_index: 1,
        })
    }

    pub fn from_slabs(slabs: Vec<Slab>) -> Result<Self, SlabError> {
        if slabs.is_empty() {
            return Err(SlabError::NoSlabs);
        }
        Ok(Self {
            slabs,
            loop_index: 1,
        })
    }

    pub fn len(&self) -> usize {
        self.slabs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slabs.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<&Slab> {
        self.slabs.get(k)
    }

    pub fn get_mut(&mut self, k: usize) -> Option<&mut Slab> {
        self.slabs.get_mut(k)
    }

    pub fn slabs(&self) -> &[Slab] {
        &self.slabs
    }

    pub fn slabs_mut(&mut self) -> &mut [Slab] {
        &mut self.slabs
    }

    pub fn start(&self) -> f64 {
        self.slabs[0].interval.t_m
    }

    pub fn end(&self) -> f64 {
        self.slabs[self.slabs.len() - 1].interval.t_n
    }

    /// Bisects slab `k` in time; both halves share the slab's current mesh
    /// and start without storage.
    pub fn split_slab_in_time(&mut self, k: usize) -> Result<(), SlabError> {
        let slab = self.slabs.get(k).ok_or(SlabError::IndexOutOfRange(k))?;
        let TimeInterval { t_m, t_n } = slab.interval;
        let mid = 0.5 * (t_m + t_n);
        let first = slab.with_interval(TimeInterval::new(t_m, mid)?);
        let second = slab.with_interval(TimeInterval::new(mid, t_n)?);
        self.slabs.splice(k..=k, [first, second]);
        Ok(())
    }

    /// `(previous, current)` pairs by ascending `t_m`.
    pub fn iter_forward(&self) -> impl Iterator<Item = (Option<&Slab>, &Slab)> {
        self.slabs
            .iter()
            .enumerate()
            .map(move |(k, s)| (k.checked_sub(1).map(|p| &self.slabs[p]), s))
    }

    /// `(current, next)` pairs by descending `t_n`.
    pub fn iter_backward(&self) -> impl Iterator<Item = (&Slab, Option<&Slab>)> {
        self.slabs
            .iter()
            .enumerate()
            .rev()
            .map(move |(k, s)| (s, self.slabs.get(k + 1)))
    }

    /// Checks that consecutive intervals meet exactly.
    pub fn is_partition(&self) -> bool {
        self.slabs
            .windows(2)
            .all(|w| w[0].interval.t_n == w[1].interval.t_m)
    }

    pub fn total_time(&self) -> f64 {
        self.slabs.iter().map(|s| s.tau()).sum()
    }

    /// Largest active cell count over all slabs.
    pub fn max_cells(&self) -> usize {
        self.slabs
            .iter()
            .map(|s| s.mesh.n_active_cells())
            .max()
            .unwrap_or(0)
    }
}
