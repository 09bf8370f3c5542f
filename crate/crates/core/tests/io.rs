use std::sync::Arc;

use dwr_core::adapt::{LoopRecord, ToleranceMode};
use dwr_core::estimator::TemporalRestriction;
use dwr_core::mesh::QuadMesh;
use dwr_core::output::{
    atomic_write, convergence_csv, eta_table, format_sci, slab_vtk, tau_distribution,
    CONVERGENCE_HEADER,
};
use dwr_core::params::{parse_parameter_file, parse_parameters, DwrConfig, ParamError};
use dwr_core::slab::{SlabList, StorageTag};
use dwr_core::sparse::DenseVector;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn configs_survive_a_round_trip(
        rho in 0.1f64..5.0,
        eps in 0.1f64..5.0,
        a in 1.0f64..100.0,
        theta in 0.0f64..=1.0,
        tol in 1e-6f64..1.0,
        slabs in 1usize..40,
        loops in 1usize..50,
        absolute in any::<bool>(),
        right in any::<bool>(),
        skip in any::<bool>(),
    ) {
        let mut c = DwrConfig::default();
        c.problem.coefficients.rho = rho;
        c.problem.coefficients.epsilon = eps;
        c.problem.cone.a = a;
        c.adapt.theta_tau = theta;
        c.adapt.tol = tol;
        c.adapt.max_loops = loops;
        c.adapt.skip_zero_indicators = skip;
        if absolute {
            c.adapt.tol_mode = ToleranceMode::Absolute;
        }
        if right {
            c.adapt.temporal_restriction = TemporalRestriction::RightEndpoint;
        }
        c.time.initial_slabs = slabs;
        prop_assert_eq!(parse_parameters(&c.to_parameter_file()).unwrap(), c);
    }

    #[test]
    fn format_sci_parses_back(x in -1e30f64..1e30) {
        let s = format_sci(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-6 * x.abs());
        let exp = s.split_once('e').unwrap().1;
        prop_assert!(exp.starts_with('+') || exp.starts_with('-'));
        prop_assert!(exp.len() >= 3);
    }
}

#[test]
fn empty_file_gives_defaults() {
    assert_eq!(parse_parameters("# nothing\n\n").unwrap(), DwrConfig::default());
}

#[test]
fn parse_errors_carry_line_numbers() {
    let err = parse_parameters("subsection problem\n  set rho = abc\nend\n").unwrap_err();
    assert!(matches!(err, ParamError::InvalidValue { line: 2, .. }), "{err:?}");
    let err = parse_parameters("subsection problem\n  set mu = 1\nend\n").unwrap_err();
    assert!(matches!(err, ParamError::UnknownKey { line: 2, .. }), "{err:?}");
    let err = parse_parameters("subsection mesh\nend\n").unwrap_err();
    assert!(matches!(err, ParamError::UnknownSubsection { line: 1, .. }));
    let err = parse_parameters("set rho = 1\n").unwrap_err();
    assert!(matches!(err, ParamError::Syntax { line: 1, .. }));
    let err = parse_parameters("subsection problem\n").unwrap_err();
    assert!(matches!(err, ParamError::Syntax { .. }));
    let err = parse_parameters("subsection adaptivity\n set tol_mode = sometimes\nend\n").unwrap_err();
    assert!(matches!(err, ParamError::InvalidValue { .. }));
}

#[test]
fn out_of_range_values_are_rejected() {
    for text in [
        "subsection time\n set initial_slabs = 0\nend\n",
        "subsection adaptivity\n set theta_tau = 1.1\nend\n",
        "subsection discretization\n set dual_degree = 3\nend\n",
        "subsection time\n set T = -1\nend\n",
        "subsection discretization\n set primal_degree = 2\n set dual_degree = 1\nend\n",
    ] {
        assert!(matches!(parse_parameters(text), Err(ParamError::OutOfRange(_))), "{text}");
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err = parse_parameter_file(std::path::Path::new("/nonexistent/run.prm")).unwrap_err();
    assert!(matches!(err, ParamError::Io { .. }));
}

#[test]
fn sci_format_examples() {
    assert_eq!(format_sci(6.07e-2), "6.070000e-02");
    assert_eq!(format_sci(1.0), "1.000000e+00");
    assert_eq!(format_sci(-2.5e10), "-2.500000e+10");
    assert_eq!(format_sci(0.0), "0.000000e+00");
    assert_eq!(format_sci(1.5e-123), "1.500000e-123");
}

#[test]
fn convergence_table_leaves_missing_values_empty() {
    let records = vec![
        LoopRecord {
            loop_index: 1,
            n_slabs: 5,
            max_cells: 3,
            goal_error: 6.07e-2,
            eta: Some(1.994e-2),
            i_eff: Some(0.3285),
        },
        LoopRecord {
            loop_index: 2,
            n_slabs: 8,
            max_cells: 12,
            goal_error: 1e-4,
            eta: None,
            i_eff: None,
        },
    ];
    let csv = convergence_csv(&records);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CONVERGENCE_HEADER);
    assert_eq!(lines[1], "1,5,3,6.070000e-02,1.994000e-02,3.285000e-01");
    assert_eq!(lines[2], "2,8,12,1.000000e-04,,");
}

#[test]
fn slab_tables() {
    let slabs = SlabList::uniform(Arc::new(QuadMesh::lshape()), 0.0, 1.0, 2, 1, 2).unwrap();
    assert_eq!(
        tau_distribution(&slabs),
        "t_m\tt_n\ttau\n0.000000e+00\t5.000000e-01\t5.000000e-01\n5.000000e-01\t1.000000e+00\t5.000000e-01\n"
    );
    let eta = eta_table(&slabs, &[0.25, 0.0]);
    assert_eq!(eta.lines().nth(2), Some("5.000000e-01\t1.000000e+00\t0.000000e+00"));
}

#[test]
fn vtk_connectivity_is_counterclockwise() {
    let mut slabs = SlabList::uniform(Arc::new(QuadMesh::lshape()), 0.0, 1.0, 1, 1, 2).unwrap();
    let slab = &mut slabs.slabs_mut()[0];
    let n = slab.primal_space().n_dofs();
    slab.attach_storage(StorageTag::PrimalSolution, DenseVector::from_vec(vec![2.0; n])).unwrap();
    let vtk = slab_vtk(slab, 0).unwrap();
    let lines: Vec<&str> = vtk.lines().collect();
    let p0 = lines.iter().position(|l| l.starts_with("POINTS")).unwrap();
    let points: Vec<[f64; 2]> = lines[p0 + 1..p0 + 1 + n]
        .iter()
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|x| x.parse().unwrap()).collect();
            [v[0], v[1]]
        })
        .collect();
    let c0 = lines.iter().position(|l| l.starts_with("CELLS")).unwrap();
    for l in &lines[c0 + 1..c0 + 4] {
        let ids: Vec<usize> = l.split_whitespace().skip(1).map(|x| x.parse().unwrap()).collect();
        // shoelace area must be positive for VTK_QUAD ordering
        let area: f64 = (0..4)
            .map(|k| {
                let (a, b) = (points[ids[k]], points[ids[(k + 1) % 4]]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            / 2.0;
        assert!((area - 0.25).abs() < 1e-14, "{l}: area {area}");
    }
    let u0 = lines.iter().position(|l| *l == "SCALARS u double 1").unwrap();
    assert!(lines[u0 + 2..u0 + 2 + n].iter().all(|l| l.parse::<f64>().unwrap() == 2.0));
    let z0 = lines.iter().position(|l| *l == "SCALARS z double 1").unwrap();
    assert!(lines[z0 + 2..z0 + 2 + n].iter().all(|l| l.parse::<f64>().unwrap() == 0.0));
}

#[test]
fn atomic_write_replaces_and_leaves_no_temporary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/out.txt");
    atomic_write(&path, "first").unwrap();
    atomic_write(&path, "second").unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
    let names: Vec<_> = std::fs::read_dir(path.parent().unwrap())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names, vec![std::ffi::OsString::from("out.txt")]);
}
