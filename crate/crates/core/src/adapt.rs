//! Marking, refinement and the outer adaptive loop.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use log::info;

use crate::dual::{march_backward, GoalContext};
use crate::error::DwrError;
use crate::estimator::{
    accumulate, effectivity, estimate_slabs, CellIndicators, ErrorEstimate, TemporalRestriction,
};
use crate::mesh::{QuadMesh, RefinementMarks};
use crate::output;
use crate::params::DwrConfig;
use crate::primal::{goal_norm, march_forward, GoalSpec};
use crate::slab::SlabList;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToleranceMode {
    Absolute,
    /// Relative to the goal error of the first loop.
    Relative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptParams {
    pub theta_tau: f64,
    /// Spatial fraction on slabs that are not split in time.
    pub theta_h1: f64,
    /// Spatial fraction on slabs that are also split in time.
    pub theta_h2: f64,
    pub tol_mode: ToleranceMode,
    pub tol: f64,
    pub max_loops: usize,
    /// Never mark slabs or cells whose indicator is exactly zero.
    pub skip_zero_indicators: bool,
    pub temporal_restriction: TemporalRestriction,
}

impl Default for AdaptParams {
    fn default() -> Self {
        Self {
            theta_tau: 0.5,
            theta_h1: 0.3,
            theta_h2: 0.15,
            tol_mode: ToleranceMode::Relative,
            tol: 1e-2,
            max_loops: 25,
            skip_zero_indicators: true,
            temporal_restriction: TemporalRestriction::Mean,
        }
    }
}

impl AdaptParams {
    pub fn validate(&self) -> Result<(), String> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.theta_tau) {
            return Err(format!("theta_tau = {} not in [0, 1]", self.theta_tau));
        }
        if !(unit(self.theta_h1) && unit(self.theta_h2) && self.theta_h2 <= self.theta_h1) {
            return Err(format!(
                "need 0 <= theta_h2 <= theta_h1 <= 1, got theta_h1 = {}, theta_h2 = {}",
                self.theta_h1, self.theta_h2
            ));
        }
        if !(self.tol >= 0.0) {
            return Err(format!("tol = {} must be non-negative", self.tol));
        }
        if self.max_loops == 0 {
            return Err("max_loops must be at least 1".into());
        }
        Ok(())
    }
}

/// Indices of the `ceil(theta N)` largest values; ties go to the lower index.
pub fn mark_largest(values: &[f64], theta: f64, skip_zero: bool) -> BTreeSet<usize> {
    let count = (theta * values.len() as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .take(count)
        .filter(|&i| !(skip_zero && values[i] == 0.0))
        .collect()
}

/// Slabs to split in time, by their `eta_n`.
pub fn mark_time_slabs(eta_slab: &[f64], theta_tau: f64, skip_zero: bool) -> BTreeSet<usize> {
    mark_largest(eta_slab, theta_tau, skip_zero)
}

/// Cells to refine, by `|eta_K|`.
pub fn mark_space_cells(indicators: &CellIndicators, theta: f64, skip_zero: bool) -> RefinementMarks {
    let values: Vec<f64> = indicators.iter().map(|e| e.1.abs()).collect();
    RefinementMarks::from_cells(
        mark_largest(&values, theta, skip_zero)
            .into_iter()
            .map(|i| indicators[i].0),
    )
}

#[derive(Debug, Clone, Default)]
pub struct AdaptationMarks {
    pub time: BTreeSet<usize>,
    /// One set per slab, indexed like the slab list before splitting.
    pub space: Vec<RefinementMarks>,
}

impl PartialEq for AdaptationMarks {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time
            && self.space.len() == other.space.len()
            && self.space.iter().zip(&other.space).all(|(a, b)| a.cells == b.cells)
    }
}

/// Time marks from `eta_n`, then space marks with `theta_h2` on time-marked
/// slabs and `theta_h1` elsewhere.
pub fn compute_marks(
    per_slab: &[f64],
    indicators: &[CellIndicators],
    params: &AdaptParams,
) -> AdaptationMarks {
    let time = mark_time_slabs(per_slab, params.theta_tau, params.skip_zero_indicators);
    let space = indicators
        .iter()
        .enumerate()
        .map(|(k, eta)| {
            let theta = if time.contains(&k) {
                params.theta_h2
            } else {
                params.theta_h1
            };
            mark_space_cells(eta, theta, params.skip_zero_indicators)
        })
        .collect();
    AdaptationMarks { time, space }
}

/// Refines each slab's mesh by its marks, then halves the time-marked slabs.
/// All slab storage is discarded.
pub fn execute_adaptation(slabs: &mut SlabList, marks: &AdaptationMarks) -> Result<(), DwrError> {
    for (slab, m) in slabs.slabs_mut().iter_mut().zip(&marks.space) {
        if !m.is_empty() {
            let mesh = slab.mesh().refine(m)?;
            slab.set_mesh(Arc::new(mesh))?;
        }
    }
    for &k in marks.time.iter().rev() {
        slabs.split_slab_in_time(k)?;
    }
    for slab in slabs.slabs_mut() {
        slab.clear_storage();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopRecord {
    pub loop_index: usize,
    pub n_slabs: usize,
    pub max_cells: usize,
    /// `||u - u_h||_{L2(Q_c)}`.
    pub goal_error: f64,
    pub eta: Option<f64>,
    pub i_eff: Option<f64>,
}

#[derive(Debug)]
pub struct DwrOutcome {
    pub records: Vec<LoopRecord>,
    /// Marks applied after each loop that refined.
    pub marks: Vec<AdaptationMarks>,
    /// True if the goal tolerance was reached.
    pub converged: bool,
    /// Slabs of the last loop, with their stored solutions.
    pub slabs: SlabList,
}

/// The coarse L-shape refined `global_refinements` times.
pub fn initial_mesh(global_refinements: usize) -> Result<QuadMesh, DwrError> {
    let mut mesh = QuadMesh::lshape();
    for _ in 0..global_refinements {
        mesh = mesh.refine(&RefinementMarks::from_cells(mesh.active_cells()))?;
    }
    Ok(mesh)
}

/// Runs the adaptive loop. With `out` set, writes the convergence table,
/// per-loop slab tables and the VTK files requested by the configuration.
pub fn dwr_loop(config: &DwrConfig, out: Option<&Path>) -> Result<DwrOutcome, DwrError> {
    dwr_loop_observed(config, out, |_| {})
}

/// State handed to the observer of [`dwr_loop_observed`] once per loop,
/// before any adaptation.
pub struct LoopState<'a> {
    pub record: &'a LoopRecord,
    pub slabs: &'a SlabList,
    /// `None` when the goal was met and no estimate was computed.
    pub estimate: Option<&'a ErrorEstimate>,
}

/// [`dwr_loop`] with a callback after every loop.
pub fn dwr_loop_observed(
    config: &DwrConfig,
    out: Option<&Path>,
    mut observe: impl FnMut(LoopState<'_>),
) -> Result<DwrOutcome, DwrError> {
    let d = &config.discretization;
    let mut slabs = SlabList::uniform(
        Arc::new(initial_mesh(d.global_refinements)?),
        config.time.t0,
        config.time.t_end,
        config.time.initial_slabs,
        d.primal_degree,
        d.dual_degree,
    )?;
    let params = &config.adapt;
    let problem = &config.problem;
    let goal = GoalSpec {
        control_volume: &config.control_volume,
        quadrature: &config.goal_quadrature,
    };
    let mut records = Vec::new();
    let mut all_marks = Vec::new();
    let mut threshold = None;
    let mut converged = false;

    for l in 1..=params.max_loops {
        let in_loop = |source: DwrError| DwrError::Loop {
            loop_index: l,
            source: Box::new(source),
        };
        slabs.loop_index = l;
        march_forward(&mut slabs, problem, Some(goal), &config.solver).map_err(in_loop)?;
        let norm = goal_norm(&slabs).ok_or(DwrError::NoReferenceSolution)?;
        let tol = *threshold.get_or_insert(match params.tol_mode {
            ToleranceMode::Absolute => params.tol,
            ToleranceMode::Relative => params.tol * norm,
        });
        let mut record = LoopRecord {
            loop_index: l,
            n_slabs: slabs.len(),
            max_cells: slabs.max_cells(),
            goal_error: norm,
            eta: None,
            i_eff: None,
        };
        let vtk = out.is_some()
            && config.output.vtk_every > 0
            && (l - 1) % config.output.vtk_every == 0;

        if norm < tol || norm == 0.0 {
            info!("loop {l}: goal error {norm:.4e} below {tol:.4e}");
            observe(LoopState {
                record: &record,
                slabs: &slabs,
                estimate: None,
            });
            records.push(record);
            if let Some(dir) = out {
                output::write_loop_outputs(dir, &slabs, None, vtk)?;
                output::write_convergence(dir, &records)?;
            }
            converged = true;
            break;
        }

        let ctx = GoalContext {
            control_volume: &config.control_volume,
            quadrature: &config.goal_quadrature,
            problem,
            norm,
        };
        march_backward(&mut slabs, &ctx, &config.solver).map_err(in_loop)?;
        let indicators =
            estimate_slabs(&mut slabs, problem, params.temporal_restriction).map_err(in_loop)?;
        let estimate = accumulate(&indicators);
        record.eta = Some(estimate.total);
        record.i_eff = effectivity(estimate.total, norm);
        info!(
            "loop {l}: {} slabs, {} max cells, goal error {norm:.4e}, eta {:.4e}",
            record.n_slabs, record.max_cells, estimate.total
        );
        observe(LoopState {
            record: &record,
            slabs: &slabs,
            estimate: Some(&estimate),
        });
        records.push(record);
        if let Some(dir) = out {
            output::write_loop_outputs(dir, &slabs, Some(&estimate.per_slab), vtk)?;
            output::write_convergence(dir, &records)?;
        }
        if l == params.max_loops {
            break;
        }
        let marks = compute_marks(&estimate.per_slab, &indicators, params);
        execute_adaptation(&mut slabs, &marks).map_err(in_loop)?;
        all_marks.push(marks);
    }
    Ok(DwrOutcome {
        records,
        marks: all_marks,
        converged,
        slabs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_the_lower_index() {
        let m = mark_largest(&[1.0, 3.0, 3.0, 2.0], 0.5, true);
        assert_eq!(m, BTreeSet::from([1, 2]));
        let m = mark_largest(&[3.0, 1.0, 3.0, 3.0], 0.5, true);
        assert_eq!(m, BTreeSet::from([0, 2]));
    }

    #[test]
    fn count_rounds_up() {
        assert_eq!(mark_largest(&[1.0; 5], 0.5, true).len(), 3);
        assert_eq!(mark_largest(&[1.0; 5], 0.0, true).len(), 0);
        assert_eq!(mark_largest(&[1.0; 5], 1.0, true).len(), 5);
        assert!(mark_largest(&[], 0.5, true).is_empty());
    }

    #[test]
    fn zero_indicators_are_skipped_on_request() {
        let v = [0.0, 0.0, 1.0, 0.0];
        assert_eq!(mark_largest(&v, 0.5, true), BTreeSet::from([2]));
        assert_eq!(mark_largest(&v, 0.5, false), BTreeSet::from([0, 2]));
    }

    #[test]
    fn space_marks_use_absolute_values() {
        let m = mark_space_cells(&vec![(4, 0.1), (7, -0.9), (9, 0.5)], 0.3, true);
        assert_eq!(m.cells, BTreeSet::from([7]));
    }

    #[test]
    fn stricter_fraction_on_time_marked_slabs() {
        let p = AdaptParams {
            theta_tau: 0.5,
            theta_h1: 1.0,
            theta_h2: 0.25,
            ..Default::default()
        };
        let eta: Vec<CellIndicators> = (0..2)
            .map(|_| (0..4).map(|c| (c, 1.0 + c as f64)).collect())
            .collect();
        let marks = compute_marks(&[2.0, 1.0], &eta, &p);
        assert_eq!(marks.time, BTreeSet::from([0]));
        assert_eq!(marks.space[0].len(), 1);
        assert_eq!(marks.space[1].len(), 4);
    }

    #[test]
    fn adaptation_refines_then_splits() {
        let mut slabs = SlabList::uniform(Arc::new(QuadMesh::lshape()), 0.0, 1.0, 2, 1, 2).unwrap();
        let marks = AdaptationMarks {
            time: BTreeSet::from([1]),
            space: vec![RefinementMarks::new(), RefinementMarks::from_cells([0])],
        };
        execute_adaptation(&mut slabs, &marks).unwrap();
        assert_eq!(slabs.len(), 3);
        assert!(slabs.is_partition());
        assert_eq!(slabs.slabs()[0].mesh().n_active_cells(), 3);
        assert_eq!(slabs.slabs()[1].mesh().n_active_cells(), 6);
        assert_eq!(slabs.slabs()[2].mesh().n_active_cells(), 6);
        assert_eq!(slabs.slabs()[1].interval.t_n, 0.75);
    }

    #[test]
    fn parameter_ranges() {
        assert!(AdaptParams::default().validate().is_ok());
        let bad = AdaptParams {
            theta_h2: 0.4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
