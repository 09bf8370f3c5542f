//! Run configuration and its plain-text parameter file.
//!
//! The format groups `set key = value` lines into `subsection name` ... `end`
//! blocks; `#` starts a comment. Unknown subsections and keys are rejected.
//!
//! ```text
//! subsection adaptivity
//!   set theta_tau = 0.5
//!   set tol_mode  = relative   # or absolute
//! end
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::adapt::{AdaptParams, ToleranceMode};
use crate::estimator::TemporalRestriction;
use crate::goal::GoalQuadrature;
use crate::problem::{Coefficients, ConeSolution, ControlVolume, RotatingCone};
use crate::slab::TimeInterval;
use crate::sparse::SolverControl;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown subsection `{name}`")]
    UnknownSubsection { line: usize, name: String },
    #[error("line {line}: unknown parameter `{key}` in subsection `{section}`")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: invalid value `{value}` for `{key}`")]
    InvalidValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("{0}")]
    OutOfRange(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeParams {
    pub t0: f64,
    pub t_end: f64,
    pub initial_slabs: usize,
}

impl Default for TimeParams {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t_end: 1.25,
            initial_slabs: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub primal_degree: usize,
    pub dual_degree: usize,
    /// Uniform refinements of the coarse L-shape before the first loop.
    pub global_refinements: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            primal_degree: 1,
            dual_degree: 2,
            global_refinements: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputParams {
    pub directory: PathBuf,
    /// Write VTK files every `vtk_every` loops; 0 disables them.
    pub vtk_every: usize,
}

impl Default for OutputParams {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("output"),
            vtk_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DwrConfig {
    pub problem: RotatingCone,
    pub control_volume: ControlVolume,
    pub goal_quadrature: GoalQuadrature,
    pub time: TimeParams,
    pub discretization: Discretization,
    pub adapt: AdaptParams,
    pub solver: SolverControl,
    pub output: OutputParams,
}

const SECTIONS: [&str; 8] = [
    "problem",
    "control_volume",
    "time",
    "discretization",
    "adaptivity",
    "solver",
    "output",
    "goal_quadrature",
];

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ParamError> {
    value.parse().map_err(|_| ParamError::InvalidValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl DwrConfig {
    fn set(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<(), ParamError> {
        let f = |v: &str| parse::<f64>(line, key, v);
        let u = |v: &str| parse::<usize>(line, key, v);
        let cv = &mut self.control_volume;
        match (section, key) {
            ("problem", "rho") => self.problem.coefficients.rho = f(value)?,
            ("problem", "epsilon") => self.problem.coefficients.epsilon = f(value)?,
            ("problem", "a") => self.problem.cone.a = f(value)?,
            ("problem", "s") => self.problem.cone.s = f(value)?,
            ("control_volume", "lower_x1") => cv.lower[0] = f(value)?,
            ("control_volume", "lower_x2") => cv.lower[1] = f(value)?,
            ("control_volume", "upper_x1") => cv.upper[0] = f(value)?,
            ("control_volume", "upper_x2") => cv.upper[1] = f(value)?,
            ("control_volume", "r1") => cv.r1 = f(value)?,
            ("control_volume", "omega") => cv.omega = f(value)?,
            ("control_volume", "center_x1") => cv.center[0] = f(value)?,
            ("control_volume", "center_x2") => cv.center[1] = f(value)?,
            ("control_volume", "t_start") => cv.interval.t_m = f(value)?,
            ("control_volume", "t_end") => cv.interval.t_n = f(value)?,
            ("goal_quadrature", "cell_width") => self.goal_quadrature.cell_width = f(value)?,
            ("goal_quadrature", "time_width") => self.goal_quadrature.time_width = f(value)?,
            ("time", "t0") => self.time.t0 = f(value)?,
            ("time", "T") => self.time.t_end = f(value)?,
            ("time", "initial_slabs") => self.time.initial_slabs = u(value)?,
            ("discretization", "primal_degree") => self.discretization.primal_degree = u(value)?,
            ("discretization", "dual_degree") => self.discretization.dual_degree = u(value)?,
            ("discretization", "global_refinements") => {
                self.discretization.global_refinements = u(value)?
            }
            ("adaptivity", "theta_tau") => self.adapt.theta_tau = f(value)?,
            ("adaptivity", "theta_h1") => self.adapt.theta_h1 = f(value)?,
            ("adaptivity", "theta_h2") => self.adapt.theta_h2 = f(value)?,
            ("adaptivity", "tol") => self.adapt.tol = f(value)?,
            ("adaptivity", "max_loops") => self.adapt.max_loops = u(value)?,
            ("adaptivity", "tol_mode") => {
                self.adapt.tol_mode = match value {
                    "absolute" => ToleranceMode::Absolute,
                    "relative" => ToleranceMode::Relative,
                    _ => return Err(invalid(line, key, value)),
                }
            }
            ("adaptivity", "skip_zero_indicators") => {
                self.adapt.skip_zero_indicators = parse::<bool>(line, key, value)?
            }
            ("adaptivity", "temporal_restriction") => {
                self.adapt.temporal_restriction = match value {
                    "mean" => TemporalRestriction::Mean,
                    "right" => TemporalRestriction::RightEndpoint,
                    _ => return Err(invalid(line, key, value)),
                }
            }
            ("solver", "max_iterations") => self.solver.max_iterations = u(value)?,
            ("solver", "relative_tolerance") => self.solver.relative_tolerance = f(value)?,
            ("solver", "absolute_tolerance") => self.solver.absolute_tolerance = f(value)?,
            ("output", "directory") => self.output.directory = PathBuf::from(value),
            ("output", "vtk_every") => self.output.vtk_every = u(value)?,
            _ => {
                return Err(ParamError::UnknownKey {
                    line,
                    section: section.to_string(),
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Range and consistency checks.
    pub fn validate(&self) -> Result<(), ParamError> {
        let bad = |msg: String| Err(ParamError::OutOfRange(msg));
        let Coefficients { rho, epsilon } = self.problem.coefficients;
        if !(rho > 0.0 && epsilon > 0.0) {
            return bad(format!("rho = {rho} and epsilon = {epsilon} must be positive"));
        }
        let ConeSolution { a, .. } = self.problem.cone;
        if !(a > 0.0) {
            return bad(format!("a = {a} must be positive"));
        }
        if !(self.time.t_end > self.time.t0) {
            return bad("T must exceed t0".into());
        }
        if self.time.initial_slabs == 0 {
            return bad("initial_slabs must be at least 1".into());
        }
        let cv = &self.control_volume;
        if TimeInterval::new(cv.interval.t_m, cv.interval.t_n).is_err() {
            return bad("control volume needs t_start < t_end".into());
        }
        if !(cv.lower[0] < cv.upper[0] && cv.lower[1] < cv.upper[1]) {
            return bad("control volume box needs lower < upper".into());
        }
        let gq = &self.goal_quadrature;
        if !(gq.cell_width > 0.0 && gq.time_width > 0.0) {
            return bad("goal quadrature widths must be positive".into());
        }
        let d = &self.discretization;
        for p in [d.primal_degree, d.dual_degree] {
            if !(1..=2).contains(&p) {
                return bad(format!("polynomial degree {p} not in 1..=2"));
            }
        }
        if d.dual_degree < d.primal_degree {
            return bad("dual degree must not be below the primal degree".into());
        }
        self.adapt.validate().map_err(ParamError::OutOfRange)?;
        let s = &self.solver;
        if s.max_iterations == 0 || !(s.relative_tolerance >= 0.0 && s.absolute_tolerance >= 0.0) {
            return bad("solver needs max_iterations > 0 and non-negative tolerances".into());
        }
        Ok(())
    }

    /// Serialises every parameter in the file format.
    pub fn to_parameter_file(&self) -> String {
        let mut s = String::new();
        let mut section = |name: &str, entries: &[(&str, String)]| {
            writeln!(s, "subsection {name}").unwrap();
            for (k, v) in entries {
                writeln!(s, "  set {k} = {v}").unwrap();
            }
            writeln!(s, "end").unwrap();
        };
        let p = &self.problem;
        section(
            "problem",
            &[
                ("rho", p.coefficients.rho.to_string()),
                ("epsilon", p.coefficients.epsilon.to_string()),
                ("a", p.cone.a.to_string()),
                ("s", p.cone.s.to_string()),
            ],
        );
        let cv = &self.control_volume;
        section(
            "control_volume",
            &[
                ("lower_x1", cv.lower[0].to_string()),
                ("lower_x2", cv.lower[1].to_string()),
                ("upper_x1", cv.upper[0].to_string()),
                ("upper_x2", cv.upper[1].to_string()),
                ("r1", cv.r1.to_string()),
                ("omega", cv.omega.to_string()),
                ("center_x1", cv.center[0].to_string()),
                ("center_x2", cv.center[1].to_string()),
                ("t_start", cv.interval.t_m.to_string()),
                ("t_end", cv.interval.t_n.to_string()),
            ],
        );
        section(
            "goal_quadrature",
            &[
                ("cell_width", self.goal_quadrature.cell_width.to_string()),
                ("time_width", self.goal_quadrature.time_width.to_string()),
            ],
        );
        section(
            "time",
            &[
                ("t0", self.time.t0.to_string()),
                ("T", self.time.t_end.to_string()),
                ("initial_slabs", self.time.initial_slabs.to_string()),
            ],
        );
        let d = &self.discretization;
        section(
            "discretization",
            &[
                ("primal_degree", d.primal_degree.to_string()),
                ("dual_degree", d.dual_degree.to_string()),
                ("global_refinements", d.global_refinements.to_string()),
            ],
        );
        let a = &self.adapt;
        section(
            "adaptivity",
            &[
                ("theta_tau", a.theta_tau.to_string()),
                ("theta_h1", a.theta_h1.to_string()),
                ("theta_h2", a.theta_h2.to_string()),
                (
                    "tol_mode",
                    match a.tol_mode {
                        ToleranceMode::Absolute => "absolute",
                        ToleranceMode::Relative => "relative",
                    }
                    .to_string(),
                ),
                ("tol", a.tol.to_string()),
                ("max_loops", a.max_loops.to_string()),
                ("skip_zero_indicators", a.skip_zero_indicators.to_string()),
                (
                    "temporal_restriction",
                    match a.temporal_restriction {
                        TemporalRestriction::Mean => "mean",
                        TemporalRestriction::RightEndpoint => "right",
                    }
                    .to_string(),
                ),
            ],
        );
        let sc = &self.solver;
        section(
            "solver",
            &[
                ("max_iterations", sc.max_iterations.to_string()),
                ("relative_tolerance", sc.relative_tolerance.to_string()),
                ("absolute_tolerance", sc.absolute_tolerance.to_string()),
            ],
        );
        section(
            "output",
            &[
                ("directory", self.output.directory.display().to_string()),
                ("vtk_every", self.output.vtk_every.to_string()),
            ],
        );
        s
    }
}

fn invalid(line: usize, key: &str, value: &str) -> ParamError {
    ParamError::InvalidValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
    }
}

/// Parses parameter-file text on top of the defaults and validates the result.
pub fn parse_parameters(text: &str) -> Result<DwrConfig, ParamError> {
    let mut config = DwrConfig::default();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |message: &str| ParamError::Syntax {
            line,
            message: message.to_string(),
        };
        let mut words = content.splitn(2, char::is_whitespace);
        match (words.next(), words.next().map(str::trim)) {
            (Some("subsection"), Some(name)) if !name.is_empty() => {
                if section.is_some() {
                    return Err(syntax("nested subsections are not supported"));
                }
                if !SECTIONS.contains(&name) {
                    return Err(ParamError::UnknownSubsection {
                        line,
                        name: name.to_string(),
                    });
                }
                section = Some(name.to_string());
            }
            (Some("end"), None) => {
                if section.take().is_none() {
                    return Err(syntax("`end` without subsection"));
                }
            }
            (Some("set"), Some(rest)) => {
                let Some(name) = section.as_deref() else {
                    return Err(syntax("`set` outside a subsection"));
                };
                let Some((key, value)) = rest.split_once('=') else {
                    return Err(syntax("expected `set key = value`"));
                };
                let (key, value) = (key.trim(), value.trim());
                if key.is_empty() || value.is_empty() {
                    return Err(syntax("expected `set key = value`"));
                }
                config.set(name, key, value, line)?;
            }
            _ => return Err(syntax("expected `subsection`, `set` or `end`")),
        }
    }
    if section.is_some() {
        return Err(ParamError::Syntax {
            line: text.lines().count(),
            message: "missing `end`".into(),
        });
    }
    config.validate()?;
    Ok(config)
}

/// Reads and parses a parameter file.
pub fn parse_parameter_file(path: &Path) -> Result<DwrConfig, ParamError> {
    let text = std::fs::read_to_string(path).map_err(|e| ParamError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_parameters(&text)
}
