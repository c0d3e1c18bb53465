#![allow(dead_code)]

use std::sync::Arc;

use natconv::stepper::{ProblemParams, TemperatureBoundary};

/// Dense bivariate polynomial, `c[i][j]` multiplies `x^i y^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly2 {
    c: Vec<Vec<f64>>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self { c: vec![vec![0.0]] }
    }

    pub fn constant(v: f64) -> Self {
        Self { c: vec![vec![v]] }
    }

    pub fn x() -> Self {
        Self { c: vec![vec![0.0], vec![1.0]] }
    }

    pub fn y() -> Self {
        Self { c: vec![vec![0.0, 1.0]] }
    }

    fn degree_x(&self) -> usize {
        self.c.len()
    }

    fn degree_y(&self) -> usize {
        self.c.iter().map(Vec::len).max().unwrap_or(1)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.c.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0)
    }

    fn from_fn(nx: usize, ny: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        Self { c: (0..nx.max(1)).map(|i| (0..ny.max(1)).map(|j| f(i, j)).collect()).collect() }
    }

    pub fn add(&self, o: &Poly2) -> Poly2 {
        let (nx, ny) = (self.degree_x().max(o.degree_x()), self.degree_y().max(o.degree_y()));
        Self::from_fn(nx, ny, |i, j| self.get(i, j) + o.get(i, j))
    }

    pub fn sub(&self, o: &Poly2) -> Poly2 {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly2 {
        Self::from_fn(self.degree_x(), self.degree_y(), |i, j| s * self.get(i, j))
    }

    pub fn mul(&self, o: &Poly2) -> Poly2 {
        let (nx, ny) = (self.degree_x() + o.degree_x() - 1, self.degree_y() + o.degree_y() - 1);
        let mut out = Self::from_fn(nx, ny, |_, _| 0.0);
        for i in 0..self.degree_x() {
            for j in 0..self.degree_y() {
                for k in 0..o.degree_x() {
                    for l in 0..o.degree_y() {
                        out.c[i + k][j + l] += self.get(i, j) * o.get(k, l);
                    }
                }
            }
        }
        out
    }

    pub fn dx(&self) -> Poly2 {
        Self::from_fn(self.degree_x().saturating_sub(1), self.degree_y(), |i, j| (i + 1) as f64 * self.get(i + 1, j))
    }

    pub fn dy(&self) -> Poly2 {
        Self::from_fn(self.degree_x(), self.degree_y().saturating_sub(1), |i, j| (j + 1) as f64 * self.get(i, j + 1))
    }

    pub fn laplacian(&self) -> Poly2 {
        self.dx().dx().add(&self.dy().dy())
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let mut s = 0.0;
        for i in (0..self.degree_x()).rev() {
            let mut row = 0.0;
            for j in (0..self.degree_y()).rev() {
                row = row * p[1] + self.get(i, j);
            }
            s = s * p[0] + row;
        }
        s
    }
}

/// `x - c` as a polynomial.
pub fn x_minus(c: f64) -> Poly2 {
    Poly2::x().sub(&Poly2::constant(c))
}

pub fn y_minus(c: f64) -> Poly2 {
    Poly2::y().sub(&Poly2::constant(c))
}

/// Strong-form residuals of a solution `s(t) (U, P)` with temperature
/// `s(t) Tq + T0`, where `s` has derivative `ds`.
pub struct SeparableSolution {
    pub u: [Poly2; 2],
    pub p: Poly2,
    /// Time-scaled part of the temperature.
    pub tq: Poly2,
    /// Time-independent part of the temperature.
    pub t0: Poly2,
}

impl SeparableSolution {
    pub fn momentum_residual_free(&self, x: [f64; 2], s: f64, ds: f64, pr: f64, ra: f64, xi: [f64; 2]) -> [f64; 2] {
        let u = [s * self.u[0].eval(x), s * self.u[1].eval(x)];
        let temp = s * self.tq.eval(x) + self.t0.eval(x);
        let grad_p = [s * self.p.dx().eval(x), s * self.p.dy().eval(x)];
        let mut out = [0.0; 2];
        for c in 0..2 {
            let g = [s * self.u[c].dx().eval(x), s * self.u[c].dy().eval(x)];
            out[c] = ds * self.u[c].eval(x) + u[0] * g[0] + u[1] * g[1] - pr * s * self.u[c].laplacian().eval(x)
                + grad_p[c]
                - pr * ra * xi[c] * temp;
        }
        out
    }

    pub fn heat_residual_free(&self, x: [f64; 2], s: f64, ds: f64) -> f64 {
        let u = [s * self.u[0].eval(x), s * self.u[1].eval(x)];
        let gx = s * self.tq.dx().eval(x) + self.t0.dx().eval(x);
        let gy = s * self.tq.dy().eval(x) + self.t0.dy().eval(x);
        let lap = s * self.tq.laplacian().eval(x) + self.t0.laplacian().eval(x);
        ds * self.tq.eval(x) + u[0] * gx + u[1] * gy - lap
    }

    pub fn velocity(&self, x: [f64; 2], s: f64) -> [f64; 2] {
        [s * self.u[0].eval(x), s * self.u[1].eval(x)]
    }

    pub fn temperature(&self, x: [f64; 2], s: f64) -> f64 {
        s * self.tq.eval(x) + self.t0.eval(x)
    }
}

/// A solution that P2-P1-P2 represents exactly in space, so discrete
/// errors measure time discretization only: `u = s(t) (y^2, x^2)`,
/// `p = s(t) (x + y - 1)`, `T = s(t) (x^2 + y)`, `s = 1 + sin(2t)/2`.
pub fn representable_solution() -> SeparableSolution {
    let (x, y) = (Poly2::x(), Poly2::y());
    SeparableSolution {
        u: [y.mul(&y), x.mul(&x)],
        p: x.add(&y).sub(&Poly2::constant(1.0)),
        tq: x.mul(&x).add(&y),
        t0: Poly2::zero(),
    }
}

pub fn s_of(t: f64) -> f64 {
    1.0 + 0.5 * (2.0 * t).sin()
}

pub fn ds_of(t: f64) -> f64 {
    (2.0 * t).cos()
}

/// Ensemble problem whose member `j` follows `scales[j] * s(t)`.
pub fn representable_params(pr: f64, ra: f64, scales: Vec<f64>) -> ProblemParams {
    let sol = Arc::new(representable_solution());
    let xi = [0.0, 1.0];
    let (s1, s2, s3, s4) = (sol.clone(), sol.clone(), sol.clone(), sol);
    let (k1, k2, k3, k4) = (scales.clone(), scales.clone(), scales.clone(), scales.clone());
    ProblemParams {
        pr,
        ra,
        xi,
        j: scales.len(),
        forcing: Some(Arc::new(move |x, t, j| s1.momentum_residual_free(x, k1[j] * s_of(t), k1[j] * ds_of(t), pr, ra, xi))),
        heat_source: Some(Arc::new(move |x, t, j| s2.heat_residual_free(x, k2[j] * s_of(t), k2[j] * ds_of(t)))),
        velocity_boundary: Some(Arc::new(move |x, t, j| s3.velocity(x, k3[j] * s_of(t)))),
        temperature_boundary: TemperatureBoundary::Prescribed(Arc::new(move |x, t, j| s4.temperature(x, k4[j] * s_of(t)))),
    }
}
