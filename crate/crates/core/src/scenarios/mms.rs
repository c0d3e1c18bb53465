//! Manufactured solution and its forcing.
//!
//! With `a(t) = 10 + t`, `F(x) = x^2 (x - 1)^2` and `G(y) = y^2 (y - 1)^2`:
//!
//! ```text
//! u1 = 5 a F G'        u2 = -5 a F' G        p = a (2x - 1)(2y - 1)
//! T  = u1 + u2 + 1 - x
//! ```
//!
//! which is `10 a x^2 (x-1)^2 y (y-1)(2y-1)` and
//! `-10 a x (x-1)(2x-1) y^2 (y-1)^2` written through `F' = 2x(x-1)(2x-1)`.
//! Derivatives used below:
//!
//! ```text
//! F' = 4x^3 - 6x^2 + 2x    F'' = 12x^2 - 12x + 2    F''' = 24x - 12
//! du1/dx = 5a F' G'        du1/dy = 5a F G''
//! du2/dx = -5a F'' G       du2/dy = -5a F' G'        (div u = 0)
//! lap u1 = 5a (F'' G' + F G''')
//! lap u2 = -5a (F''' G + F' G'')
//! dT/dx = du1/dx + du2/dx - 1    dT/dy = du1/dy + du2/dy
//! lap T = lap u1 + lap u2
//! grad p = 2a (2y - 1, 2x - 1)
//! d/dt of u, p, T - 1 + x is the field divided by a, since a' = 1.
//! ```

use crate::observables::ExactSolution;

/// `[F, F', F'', F''']` at `s`.
fn bump(s: f64) -> [f64; 4] {
    let s2 = s * s;
    [
        s2 * (s - 1.0) * (s - 1.0),
        4.0 * s2 * s - 6.0 * s2 + 2.0 * s,
        12.0 * s2 - 12.0 * s + 2.0,
        24.0 * s - 12.0,
    ]
}

fn amplitude(t: f64) -> f64 {
    10.0 * (1.0 + 0.1 * t)
}

/// The manufactured solution scaled by a member factor `1 + eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmsExact {
    pub scale: f64,
}

impl Default for MmsExact {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

/// Pointwise values of one member's exact solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmsPoint {
    pub u: [f64; 2],
    pub u_t: [f64; 2],
    /// `grad_u[c] = [d u_c/dx, d u_c/dy]`.
    pub grad_u: [[f64; 2]; 2],
    pub lap_u: [f64; 2],
    pub p: f64,
    pub grad_p: [f64; 2],
    pub temp: f64,
    pub temp_t: f64,
    pub grad_temp: [f64; 2],
    pub lap_temp: f64,
}

impl MmsExact {
    pub fn member(eps: f64) -> Self {
        Self { scale: 1.0 + eps }
    }

    pub fn eval(&self, x: [f64; 2], t: f64) -> MmsPoint {
        let s = self.scale;
        let a = amplitude(t);
        let [f, f1, f2, f3] = bump(x[0]);
        let [g, g1, g2, g3] = bump(x[1]);
        let k = 5.0 * a * s;
        let u = [k * f * g1, -k * f1 * g];
        let grad_u = [[k * f1 * g1, k * f * g2], [-k * f2 * g, -k * f1 * g1]];
        let lap_u = [k * (f2 * g1 + f * g3), -k * (f3 * g + f1 * g2)];
        let p = s * a * (2.0 * x[0] - 1.0) * (2.0 * x[1] - 1.0);
        let grad_p = [2.0 * s * a * (2.0 * x[1] - 1.0), 2.0 * s * a * (2.0 * x[0] - 1.0)];
        let temp = u[0] + u[1] + s * (1.0 - x[0]);
        MmsPoint {
            u,
            u_t: [u[0] / a, u[1] / a],
            grad_u,
            lap_u,
            p,
            grad_p,
            temp,
            temp_t: (u[0] + u[1]) / a,
            grad_temp: [grad_u[0][0] + grad_u[1][0] - s, grad_u[0][1] + grad_u[1][1]],
            lap_temp: lap_u[0] + lap_u[1],
        }
    }

    /// `f = u_t + u.grad u - Pr lap u + grad p - Pr Ra xi T`.
    pub fn momentum_forcing(&self, x: [f64; 2], t: f64, pr: f64, ra: f64, xi: [f64; 2]) -> [f64; 2] {
        let e = self.eval(x, t);
        let mut f = [0.0; 2];
        for c in 0..2 {
            let adv = e.u[0] * e.grad_u[c][0] + e.u[1] * e.grad_u[c][1];
            f[c] = e.u_t[c] + adv - pr * e.lap_u[c] + e.grad_p[c] - pr * ra * xi[c] * e.temp;
        }
        f
    }

    /// `gamma = T_t + u.grad T - lap T`.
    pub fn heat_forcing(&self, x: [f64; 2], t: f64) -> f64 {
        let e = self.eval(x, t);
        e.temp_t + e.u[0] * e.grad_temp[0] + e.u[1] * e.grad_temp[1] - e.lap_temp
    }
}

impl ExactSolution for MmsExact {
    fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.eval(x, t).u
    }

    fn velocity_gradient(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        self.eval(x, t).grad_u
    }

    fn temperature(&self, x: [f64; 2], t: f64) -> f64 {
        self.eval(x, t).temp
    }

    fn temperature_gradient(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.eval(x, t).grad_temp
    }

    fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        self.eval(x, t).p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_matches_the_expanded_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (x, y, t) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
            let a = 10.0 * (1.0 + 0.1 * t);
            let u1 = a * 10.0 * x * x * (x - 1.0).powi(2) * y * (y - 1.0) * (2.0 * y - 1.0);
            let u2 = -a * 10.0 * x * (x - 1.0) * (2.0 * x - 1.0) * y * y * (y - 1.0).powi(2);
            let e = MmsExact::default().eval([x, y], t);
            assert!((e.u[0] - u1).abs() < 1e-13 && (e.u[1] - u2).abs() < 1e-13);
            assert!((e.p - a * (2.0 * x - 1.0) * (2.0 * y - 1.0)).abs() < 1e-13);
            assert!((e.temp - (u1 + u2 + 1.0 - x)).abs() < 1e-13);
            assert!((e.grad_u[0][0] + e.grad_u[1][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn velocity_vanishes_on_the_boundary() {
        for s in [0.0, 0.3, 0.77, 1.0] {
            for p in [[0.0, s], [1.0, s], [s, 0.0], [s, 1.0]] {
                let u = MmsExact::member(0.01).eval(p, 0.4).u;
                assert!(u[0].abs() < 1e-14 && u[1].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn heat_forcing_at_corners_has_no_convection() {
        let e = MmsExact::member(-0.01);
        for p in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let v = e.eval(p, 0.6);
            assert!((e.heat_forcing(p, 0.6) - (v.temp_t - v.lap_temp)).abs() < 1e-13);
        }
    }

    #[test]
    fn member_forcing_average_carries_the_quadratic_correction() {
        let (x, t) = ([0.3, 0.6], 0.5);
        let eps = 0.01;
        let f0 = MmsExact::default().momentum_forcing(x, t, 1.0, 100.0, [0.0, 1.0]);
        let fp = MmsExact::member(eps).momentum_forcing(x, t, 1.0, 100.0, [0.0, 1.0]);
        let fm = MmsExact::member(-eps).momentum_forcing(x, t, 1.0, 100.0, [0.0, 1.0]);
        let e = MmsExact::default().eval(x, t);
        for c in 0..2 {
            let adv = e.u[0] * e.grad_u[c][0] + e.u[1] * e.grad_u[c][1];
            let avg = 0.5 * (fp[c] + fm[c]);
            assert!((avg - f0[c] - eps * eps * adv).abs() < 1e-10);
            assert!(adv.abs() > 1e-3);
        }
    }
}
