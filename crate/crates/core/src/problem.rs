//! Problem data: coefficients, the rotating-cone analytic solution with its
//! derived data `f`, `g`, `h`, `u0`, and the moving space-time control volume.

use std::f64::consts::PI;

use crate::mesh::{Point, QuadMesh};
use crate::slab::TimeInterval;

/// Constant mass density `rho` and permeability `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            rho: 0.8,
            epsilon: 1.2,
        }
    }
}

/// Data of an initial-boundary value problem.
pub trait ProblemData: Send + Sync {
    fn coefficients(&self) -> Coefficients;
    fn initial_value(&self, x: Point, t0: f64) -> f64;
    fn rhs(&self, x: Point, t: f64) -> f64;
    fn dirichlet(&self, x: Point, t: f64) -> f64;
    /// `eps grad u . n` on the Neumann boundary with outward normal `n`.
    fn neumann(&self, x: Point, t: f64, normal: Point) -> f64;
    /// Reference solution used by the goal functional, if known.
    fn exact(&self, x: Point, t: f64) -> Option<f64>;
}

/// `u = u1(x, t) * u2(t)`: a cone of width `~1/sqrt(a)` rotating on a
/// circle of radius 1/4 around (1/2, 1/2) with a time-periodic height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeSolution {
    pub a: f64,
    pub s: f64,
}

impl Default for ConeSolution {
    fn default() -> Self {
        Self { a: 50.0, s: -0.3333 }
    }
}

/// Cone center at time `t`.
pub fn cone_center(t: f64) -> Point {
    [
        0.5 + 0.25 * (2.0 * PI * t).cos(),
        0.5 + 0.25 * (2.0 * PI * t).sin(),
    ]
}

fn cone_center_dt(t: f64) -> Point {
    [
        -0.5 * PI * (2.0 * PI * t).sin(),
        0.5 * PI * (2.0 * PI * t).cos(),
    ]
}

/// True where the height factor has a kink (fractional part 0 or 1/2).
pub fn is_temporal_kink(t: f64) -> bool {
    let frac = t - t.floor();
    frac == 0.0 || frac == 0.5
}

impl ConeSolution {
    /// `(nu_1, nu_2)` for the fractional time; right-continuous at the kinks.
    fn branch(t: f64) -> (f64, f64) {
        let frac = t - t.floor();
        if frac < 0.5 {
            (-1.0, 5.0 * PI * (4.0 * frac - 1.0))
        } else {
            (1.0, 5.0 * PI * (4.0 * (frac - 0.5) - 1.0))
        }
    }

    pub fn height(&self, t: f64) -> f64 {
        let (nu1, nu2) = Self::branch(t);
        nu1 * self.s * nu2.atan()
    }

    pub fn height_dt(&self, t: f64) -> f64 {
        let (nu1, nu2) = Self::branch(t);
        nu1 * self.s * 20.0 * PI / (1.0 + nu2 * nu2)
    }

    fn q(&self, x: Point, t: f64) -> (f64, Point) {
        let m = cone_center(t);
        let d = [x[0] - m[0], x[1] - m[1]];
        (1.0 + self.a * (d[0] * d[0] + d[1] * d[1]), d)
    }

    pub fn profile(&self, x: Point, t: f64) -> f64 {
        1.0 / self.q(x, t).0
    }

    pub fn value(&self, x: Point, t: f64) -> f64 {
        self.profile(x, t) * self.height(t)
    }

    pub fn gradient(&self, x: Point, t: f64) -> Point {
        let (q, d) = self.q(x, t);
        let c = -2.0 * self.a / (q * q) * self.height(t);
        [c * d[0], c * d[1]]
    }

    /// One-sided (right) derivative at the kinks, see [`is_temporal_kink`].
    pub fn time_derivative(&self, x: Point, t: f64) -> f64 {
        let (q, d) = self.q(x, t);
        let md = cone_center_dt(t);
        let dq = -2.0 * self.a * (d[0] * md[0] + d[1] * md[1]);
        -dq / (q * q) * self.height(t) + self.height_dt(t) / q
    }

    pub fn laplacian(&self, x: Point, t: f64) -> f64 {
        let (q, d) = self.q(x, t);
        let r2 = d[0] * d[0] + d[1] * d[1];
        let a = self.a;
        (8.0 * a * a * r2 / (q * q * q) - 4.0 * a / (q * q)) * self.height(t)
    }
}

/// The benchmark: cone solution with constant coefficients; data derived
/// from the solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotatingCone {
    pub cone: ConeSolution,
    pub coefficients: Coefficients,
}

impl RotatingCone {
    pub fn new(cone: ConeSolution, coefficients: Coefficients) -> Self {
        Self { cone, coefficients }
    }

    pub fn exact_u(&self, x: Point, t: f64) -> f64 {
        self.cone.value(x, t)
    }

    pub fn exact_grad_u(&self, x: Point, t: f64) -> Point {
        self.cone.gradient(x, t)
    }

    pub fn exact_dt_u(&self, x: Point, t: f64) -> f64 {
        self.cone.time_derivative(x, t)
    }

    /// `f = rho du/dt - eps lap u`.
    pub fn rhs_f(&self, x: Point, t: f64) -> f64 {
        let c = self.coefficients;
        c.rho * self.cone.time_derivative(x, t) - c.epsilon * self.cone.laplacian(x, t)
    }
}

impl ProblemData for RotatingCone {
    fn coefficients(&self) -> Coefficients {
        self.coefficients
    }

    fn initial_value(&self, x: Point, t0: f64) -> f64 {
        self.cone.value(x, t0)
    }

    fn rhs(&self, x: Point, t: f64) -> f64 {
        self.rhs_f(x, t)
    }

    fn dirichlet(&self, x: Point, t: f64) -> f64 {
        self.cone.value(x, t)
    }

    fn neumann(&self, x: Point, t: f64, normal: Point) -> f64 {
        let g = self.cone.gradient(x, t);
        self.coefficients.epsilon * (g[0] * normal[0] + g[1] * normal[1])
    }

    fn exact(&self, x: Point, t: f64) -> Option<f64> {
        Some(self.cone.value(x, t))
    }
}

/// `Q_c = { (x, t) : t in I_c, x - center - r1 (cos wt, sin wt) in box }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlVolume {
    pub lower: Point,
    pub upper: Point,
    pub r1: f64,
    pub omega: f64,
    pub interval: TimeInterval,
    pub center: Point,
}

impl Default for ControlVolume {
    fn default() -> Self {
        Self {
            lower: [-0.1, -0.1],
            upper: [0.1, 0.1],
            r1: 0.25,
            omega: 2.0 * PI,
            interval: TimeInterval::new(0.25, 1.0).expect("valid interval"),
            center: [0.5, 0.5],
        }
    }
}

impl ControlVolume {
    /// Center of the moving box at time `t`.
    pub fn box_center(&self, t: f64) -> Point {
        [
            self.center[0] + self.r1 * (self.omega * t).cos(),
            self.center[1] + self.r1 * (self.omega * t).sin(),
        ]
    }

    pub fn active_at(&self, t: f64) -> bool {
        t > self.interval.t_m && t < self.interval.t_n
    }

    /// Membership test; lower box bounds inclusive, upper exclusive.
    pub fn contains(&self, x: Point, t: f64) -> bool {
        if !self.active_at(t) {
            return false;
        }
        let c = self.box_center(t);
        (0..2).all(|d| {
            let rel = x[d] - c[d];
            rel >= self.lower[d] && rel < self.upper[d]
        })
    }

    /// `I_n` intersected with `I_c`, if non-empty.
    pub fn overlap(&self, interval: &TimeInterval) -> Option<(f64, f64)> {
        let lo = interval.t_m.max(self.interval.t_m);
        let hi = interval.t_n.min(self.interval.t_n);
        (lo < hi).then_some((lo, hi))
    }

    /// Samples the box corners over `I_c` and reports the first time at
    /// which a corner leaves `mesh`'s domain.
    pub fn first_exit(&self, mesh: &QuadMesh, samples: usize) -> Option<f64> {
        let (t0, t1) = (self.interval.t_m, self.interval.t_n);
        (0..=samples)
            .map(|k| t0 + (t1 - t0) * k as f64 / samples as f64)
            .find(|&t| {
                let c = self.box_center(t);
                [
                    [self.lower[0], self.lower[1]],
                    [self.upper[0], self.lower[1]],
                    [self.lower[0], self.upper[1]],
                    [self.upper[0], self.upper[1]],
                ]
                .iter()
                .any(|o| mesh.locate_point([c[0] + o[0], c[1] + o[1]]).is_err())
            })
    }
}

/// Membership of `(x, t)` in the control volume.
pub fn in_control_volume(x: Point, t: f64, cv: &ControlVolume) -> bool {
    cv.contains(x, t)
}
