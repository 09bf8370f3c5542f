//! Gauss-Legendre rules on the unit interval and the unit square.

use crate::mesh::Point;

/// One-dimensional Gauss-Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gauss1d {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Gauss1d {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    ///
    /// # Panics
    /// If `n` is zero.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss rule needs at least one point");
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Newton on P_n from the Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map from [-1, 1] to [0, 1]
            points[i] = 0.5 * (1.0 - x);
            points[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { points, weights }
    }

    /// The rule mapped onto `(a, b)`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let len = b - a;
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&p, &w)| (a + len * p, len * w))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product Gauss rule on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// `n x n` tensor Gauss rule.
    pub fn gauss(n: usize) -> Self {
        let g = Gauss1d::new(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                points.push([g.points[i], g.points[j]]);
                weights.push(g.weights[i] * g.weights[j]);
            }
        }
        Self { points, weights }
    }

    /// The `n x n` Gauss rule repeated on an `m x m` subdivision of the unit square.
    pub fn composite(n: usize, m: usize) -> Self {
        let base = Self::gauss(n);
        if m <= 1 {
            return base;
        }
        let h = 1.0 / m as f64;
        let mut points = Vec::with_capacity(base.len() * m * m);
        let mut weights = Vec::with_capacity(base.len() * m * m);
        for by in 0..m {
            for bx in 0..m {
                for (p, w) in base.points.iter().zip(&base.weights) {
                    points.push([(bx as f64 + p[0]) * h, (by as f64 + p[1]) * h]);
                    weights.push(w * h * h);
                }
            }
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}
