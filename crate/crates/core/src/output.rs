//! Convergence table, per-loop slab tables and legacy ASCII VTK files.
//! Every file is written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::adapt::LoopRecord;
use crate::error::DwrError;
use crate::fe::{transfer, FeFunction, FeSpace};
use crate::primal::stored_function;
use crate::slab::{Slab, SlabList, StorageTag};

pub const CONVERGENCE_HEADER: &str = "loop,n_slabs,max_cells,goal_error,eta,i_eff";

/// C-style `%e` with six digits, e.g. `6.070000e-02`.
pub fn format_sci(x: f64) -> String {
    let s = format!("{x:.6e}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let (sign, digits) = match exp.strip_prefix('-') {
                Some(d) => ('-', d),
                None => ('+', exp),
            };
            format!("{mantissa}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

fn io_error(path: &Path, source: std::io::Error) -> DwrError {
    DwrError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `contents` to `path` via a temporary file and a rename.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), DwrError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| io_error(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

pub fn convergence_csv(records: &[LoopRecord]) -> String {
    let mut s = String::from(CONVERGENCE_HEADER);
    s.push('\n');
    let opt = |v: Option<f64>| v.map(format_sci).unwrap_or_default();
    for r in records {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.loop_index,
            r.n_slabs,
            r.max_cells,
            format_sci(r.goal_error),
            opt(r.eta),
            opt(r.i_eff)
        )
        .unwrap();
    }
    s
}

/// `t_m  t_n  tau` per slab, tab separated.
pub fn tau_distribution(slabs: &SlabList) -> String {
    let mut s = String::from("t_m\tt_n\ttau\n");
    for slab in slabs.slabs() {
        let i = slab.interval;
        writeln!(s, "{}\t{}\t{}", format_sci(i.t_m), format_sci(i.t_n), format_sci(i.tau())).unwrap();
    }
    s
}

/// `t_m  t_n  eta_n` per slab, tab separated.
pub fn eta_table(slabs: &SlabList, per_slab: &[f64]) -> String {
    let mut s = String::from("t_m\tt_n\teta\n");
    for (slab, eta) in slabs.slabs().iter().zip(per_slab) {
        let i = slab.interval;
        writeln!(s, "{}\t{}\t{}", format_sci(i.t_m), format_sci(i.t_n), format_sci(*eta)).unwrap();
    }
    s
}

fn q1_values(f: &FeFunction, q1: &Arc<FeSpace>) -> Result<Vec<f64>, DwrError> {
    Ok(transfer(f, q1)?.into_coefficients().0)
}

/// Legacy ASCII VTK of one slab: Q1 vertices, quadrilateral cells and the
/// point fields `u` (at `t_n`) and `z` (at `t_m`, zero if not computed).
pub fn slab_vtk(slab: &Slab, index: usize) -> Result<String, DwrError> {
    let q1 = if slab.primal_space().degree() == 1 {
        slab.primal_space().clone()
    } else {
        Arc::new(FeSpace::new(slab.mesh().clone(), 1)?)
    };
    let u = stored_function(slab, index, StorageTag::PrimalSolution, slab.primal_space())?;
    let u = q1_values(&u, &q1)?;
    let z = match slab.fetch_storage(StorageTag::DualAtStart) {
        Some(v) => q1_values(&FeFunction::new(slab.dual_space().clone(), (*v).clone())?, &q1)?,
        None => vec![0.0; q1.n_dofs()],
    };
    let mesh = slab.mesh();
    let n = q1.n_dofs();
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "slab {index} t_m={} t_n={}", slab.interval.t_m, slab.interval.t_n).unwrap();
    writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {n} double").unwrap();
    for p in q1.support_points() {
        writeln!(s, "{} {} 0", p[0], p[1]).unwrap();
    }
    let cells: Vec<_> = mesh.active_cells().collect();
    writeln!(s, "CELLS {} {}", cells.len(), 5 * cells.len()).unwrap();
    for &c in &cells {
        let d = q1.cell_dofs(c);
        writeln!(s, "4 {} {} {} {}", d[0], d[1], d[3], d[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {}", cells.len()).unwrap();
    for _ in &cells {
        writeln!(s, "9").unwrap();
    }
    writeln!(s, "POINT_DATA {n}").unwrap();
    for (name, values) in [("u", &u), ("z", &z)] {
        writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
        for v in values {
            writeln!(s, "{v:e}").unwrap();
        }
    }
    Ok(s)
}

pub fn write_convergence(dir: &Path, records: &[LoopRecord]) -> Result<(), DwrError> {
    atomic_write(&dir.join("convergence.csv"), &convergence_csv(records))
}

/// Slab tables of the current loop and, if requested, one VTK file per slab.
pub fn write_loop_outputs(
    dir: &Path,
    slabs: &SlabList,
    per_slab: Option<&[f64]>,
    vtk: bool,
) -> Result<(), DwrError> {
    let l = slabs.loop_index;
    atomic_write(&dir.join(format!("tau_distribution_l{l}.tsv")), &tau_distribution(slabs))?;
    if let Some(eta) = per_slab {
        atomic_write(&dir.join(format!("eta_l{l}.tsv")), &eta_table(slabs, eta))?;
    }
    if vtk {
        for (k, slab) in slabs.slabs().iter().enumerate() {
            let path = dir.join(format!("solution_l{l}_s{k:04}.vtk"));
            atomic_write(&path, &slab_vtk(slab, k)?)?;
        }
    }
    Ok(())
}
