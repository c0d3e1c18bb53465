//! Wall heat flux, midline velocity maxima, space-time error norms and
//! convergence rates.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::quadrature::gauss_legendre_3;
use crate::fem::{FeSpace, FieldVector, QuadratureRule};
use crate::mesh::BoundaryTag;

/// Samples of `Nu_local` as `(y, value)`, sorted by `y`.
///
/// The value is `-dT/dx` from the one-sided element gradient, evaluated at
/// three Gauss points per wall edge. Both walls use the same sign so that
/// pure conduction gives `1` on each.
pub fn nusselt_local(space: &FeSpace, temperature: &FieldVector, wall: BoundaryTag) -> Result<Vec<(f64, f64)>> {
    Ok(wall_samples(space, temperature, wall)?.into_iter().map(|(y, _, nu)| (y, nu)).collect())
}

/// `(y, weight, Nu_local)` at the wall quadrature points.
fn wall_samples(space: &FeSpace, temperature: &FieldVector, wall: BoundaryTag) -> Result<Vec<(f64, f64, f64)>> {
    if wall == BoundaryTag::Insulated {
        return Err(Error::invalid("Nusselt number is defined on the hot and cold walls only"));
    }
    space.check(temperature)?;
    if space.kind().components() != 1 {
        return Err(Error::invalid("temperature must be a scalar field"));
    }
    let mesh = space.mesh();
    let (points, weights) = gauss_legendre_3();
    let mut out = Vec::new();
    for be in mesh.boundary_edges().iter().filter(|e| e.tag == wall) {
        let (t, _) = mesh.edge_triangles()[be.edge];
        let [a, b] = be.vertices.map(|v| mesh.vertices()[v]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        for (s, w) in points.iter().zip(weights) {
            let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let bary = mesh.barycentric(t, p);
            let g = space.gradient_in(&temperature.values, 0, t, &bary);
            out.push((p[1], w * len, -g[0]));
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(out)
}

/// `int_0^1 Nu_local dy` on the hot wall.
pub fn nusselt_avg(space: &FeSpace, temperature: &FieldVector) -> Result<f64> {
    Ok(wall_samples(space, temperature, BoundaryTag::HotWall)?.iter().map(|(_, w, nu)| w * nu).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Midline {
    /// `x = 0.5`, sampled in `y`.
    VerticalX05,
    /// `y = 0.5`, sampled in `x`.
    HorizontalY05,
}

pub const MIDLINE_SAMPLES: usize = 1025;

/// Largest value of one velocity component along a midline, with the
/// coordinate along the line where it occurs.
pub fn midline_max(space: &FeSpace, velocity: &FieldVector, component: usize, line: Midline) -> Result<(f64, f64)> {
    midline_max_sampled(space, velocity, component, line, MIDLINE_SAMPLES)
}

pub fn midline_max_sampled(
    space: &FeSpace,
    velocity: &FieldVector,
    component: usize,
    line: Midline,
    samples: usize,
) -> Result<(f64, f64)> {
    space.check(velocity)?;
    if component >= space.kind().components() {
        return Err(Error::invalid(format!("component {component} out of range")));
    }
    if samples < 2 {
        return Err(Error::invalid("midline sampling needs at least two points"));
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..samples {
        let s = i as f64 / (samples - 1) as f64;
        let p = match line {
            Midline::VerticalX05 => [0.5, s],
            Midline::HorizontalY05 => [s, 0.5],
        };
        let (t, bary) = space.mesh().locate(p).ok_or_else(|| Error::invalid(format!("point {p:?} outside mesh")))?;
        let v = space.value_in(&velocity.values, component, t, &bary);
        if v > best.0 {
            best = (v, s);
        }
    }
    Ok(best)
}

/// Closed-form fields to measure errors against.
pub trait ExactSolution: Sync {
    fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2];
    /// Rows are components: `[[du1/dx, du1/dy], [du2/dx, du2/dy]]`.
    fn velocity_gradient(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2];
    fn temperature(&self, x: [f64; 2], t: f64) -> f64;
    fn temperature_gradient(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn pressure(&self, x: [f64; 2], t: f64) -> f64;
}

/// Spatial errors at one time level.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LevelErrors {
    pub t: f64,
    pub u_l2: f64,
    pub u_h1: f64,
    pub t_l2: f64,
    pub t_h1: f64,
    /// `None` where no pressure is computed (the initial level).
    pub p_l2: Option<f64>,
}

/// L2 and H1-seminorm errors of `(u, T)` and the L2 error of `p`, by
/// degree-6 quadrature. `p_time` is the time the pressure approximates.
pub fn level_errors(
    spaces: [&FeSpace; 3],
    fields: [&FieldVector; 3],
    exact: &dyn ExactSolution,
    t: f64,
    p_time: Option<f64>,
) -> Result<LevelErrors> {
    let [vs, ts, ps] = spaces;
    let [u, temp, p] = fields;
    vs.check(u)?;
    ts.check(temp)?;
    ps.check(p)?;
    let mesh = vs.mesh();
    let rule = QuadratureRule::degree6();
    let mut acc = [0.0f64; 5];
    for e in 0..mesh.n_triangles() {
        let area = mesh.triangle_area(e);
        let verts = mesh.triangles()[e].map(|v| mesh.vertices()[v]);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = [
                l[0] * verts[0][0] + l[1] * verts[1][0] + l[2] * verts[2][0],
                l[0] * verts[0][1] + l[1] * verts[1][1] + l[2] * verts[2][1],
            ];
            let wa = 2.0 * area * w;
            let ue = exact.velocity(x, t);
            let ge = exact.velocity_gradient(x, t);
            for c in 0..2 {
                let d = vs.value_in(&u.values, c, e, l) - ue[c];
                acc[0] += wa * d * d;
                let g = vs.gradient_in(&u.values, c, e, l);
                acc[1] += wa * ((g[0] - ge[c][0]).powi(2) + (g[1] - ge[c][1]).powi(2));
            }
            let d = ts.value_in(&temp.values, 0, e, l) - exact.temperature(x, t);
            acc[2] += wa * d * d;
            let g = ts.gradient_in(&temp.values, 0, e, l);
            let gt = exact.temperature_gradient(x, t);
            acc[3] += wa * ((g[0] - gt[0]).powi(2) + (g[1] - gt[1]).powi(2));
            if let Some(tp) = p_time {
                let d = ps.value_in(&p.values, 0, e, l) - exact.pressure(x, tp);
                acc[4] += wa * d * d;
            }
        }
    }
    Ok(LevelErrors {
        t,
        u_l2: acc[0].sqrt(),
        u_h1: acc[1].sqrt(),
        t_l2: acc[2].sqrt(),
        t_h1: acc[3].sqrt(),
        p_l2: p_time.map(|_| acc[4].sqrt()),
    })
}

/// Errors at levels `0..=N` of a run with a fixed timestep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorHistory {
    pub dt: f64,
    pub levels: Vec<LevelErrors>,
}

/// Discrete space-time norms of an [`ErrorHistory`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorSummary {
    /// `max_n ||u^n - u(t^n)||`
    pub u_linf_l2: f64,
    /// `(dt sum_n ||grad(u^n - u(t^n))||^2)^(1/2)`
    pub u_l2_h1: f64,
    pub t_linf_l2: f64,
    pub t_l2_h1: f64,
    /// `(dt sum_n ||p^n - p||^2)^(1/2)` over levels carrying a pressure.
    pub p_l2_l2: f64,
}

impl ErrorHistory {
    pub fn new(dt: f64) -> Self {
        Self { dt, levels: Vec::new() }
    }

    pub fn push(&mut self, level: LevelErrors) {
        self.levels.push(level);
    }

    /// Final time of the history.
    pub fn t_star(&self) -> f64 {
        self.levels.last().map_or(0.0, |l| l.t)
    }

    /// `|||v|||_inf = max_n ||v^n||` and `|||v|||_2 = (dt sum_{n=0}^N ||v^n||^2)^(1/2)`.
    pub fn summary(&self) -> ErrorSummary {
        let max = |f: &dyn Fn(&LevelErrors) -> f64| self.levels.iter().map(f).fold(0.0, f64::max);
        let l2 = |f: &dyn Fn(&LevelErrors) -> Option<f64>| {
            (self.dt * self.levels.iter().filter_map(f).map(|v| v * v).sum::<f64>()).sqrt()
        };
        ErrorSummary {
            u_linf_l2: max(&|l| l.u_l2),
            u_l2_h1: l2(&|l| Some(l.u_h1)),
            t_linf_l2: max(&|l| l.t_l2),
            t_l2_h1: l2(&|l| Some(l.t_h1)),
            p_l2_l2: l2(&|l| l.p_l2),
        }
    }
}

/// `log2(e1 / e2) / log2(dt1 / dt2)`.
pub fn convergence_rate(e1: f64, e2: f64, dt1: f64, dt2: f64) -> Result<f64> {
    let ok = |v: f64| v > 0.0 && v.is_finite();
    if !(ok(e1) && ok(e2) && ok(dt1) && ok(dt2)) || dt1 == dt2 {
        return Err(Error::UndefinedRate { e1, e2, dt1, dt2 });
    }
    Ok((e1 / e2).log2() / (dt1 / dt2).log2())
}

/// One row per run: `Ra,Nu_avg,max_u1_x05,max_u2_y05`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub ra: f64,
    pub nu_avg: f64,
    pub max_u1_x05: f64,
    pub max_u2_y05: f64,
}

pub fn write_benchmark_csv<W: Write>(rows: &[BenchmarkRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "Ra,Nu_avg,max_u1_x05,max_u2_y05")?;
    for r in rows {
        writeln!(out, "{:e},{:.8},{:.8},{:.8}", r.ra, r.nu_avg, r.max_u1_x05, r.max_u2_y05)?;
    }
    Ok(())
}

pub fn write_profile_csv<W: Write>(profile: &[(f64, f64)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "y,Nu_local")?;
    for (y, nu) in profile {
        writeln!(out, "{y:.10},{nu:.10}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fem::SpaceKind;
    use crate::mesh::Mesh;
    use proptest::prelude::*;

    fn scalar(m: usize) -> FeSpace {
        FeSpace::new(Arc::new(Mesh::unit_square(m).unwrap()), SpaceKind::ScalarP2)
    }

    #[test]
    fn conduction_profile_has_unit_nusselt_number() {
        for m in [1, 3, 8] {
            let s = scalar(m);
            let t = s.interpolate_scalar(|p| 1.0 - p[0]).unwrap();
            assert!((nusselt_avg(&s, &t).unwrap() - 1.0).abs() < 1e-12);
            for wall in [BoundaryTag::HotWall, BoundaryTag::ColdWall] {
                let prof = nusselt_local(&s, &t, wall).unwrap();
                assert_eq!(prof.len(), 3 * m);
                assert!(prof.iter().all(|(_, nu)| (nu - 1.0).abs() < 1e-12));
                assert!(prof.windows(2).all(|w| w[0].0 <= w[1].0));
            }
        }
    }

    #[test]
    fn constant_temperature_has_zero_flux() {
        let s = scalar(4);
        let t = s.interpolate_scalar(|_| 0.3).unwrap();
        assert!(nusselt_avg(&s, &t).unwrap().abs() < 1e-13);
        assert!(nusselt_local(&s, &t, BoundaryTag::ColdWall).unwrap().iter().all(|(_, v)| v.abs() < 1e-13));
        assert!(nusselt_local(&s, &t, BoundaryTag::Insulated).is_err());
    }

    #[test]
    fn quadratic_wall_flux_is_integrated_exactly() {
        // T = 1 - x + x y + x^2: -dT/dx at x = 0 is 1 - y, integral 1/2.
        let s = scalar(5);
        let t = s.interpolate_scalar(|p| 1.0 - p[0] + p[0] * p[1] + p[0] * p[0]).unwrap();
        assert!((nusselt_avg(&s, &t).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn midline_maxima() {
        let v = FeSpace::new(Arc::new(Mesh::unit_square(8).unwrap()), SpaceKind::VectorP2);
        let zero = v.zeros();
        assert_eq!(midline_max(&v, &zero, 0, Midline::VerticalX05).unwrap().0, 0.0);
        // u1 = y(1 - y) peaks at y = 0.5 with value 0.25; u2 = x^2 at x = 1.
        let u = v.interpolate_vector(|p| [p[1] * (1.0 - p[1]), p[0] * p[0]]).unwrap();
        let (m1, y1) = midline_max(&v, &u, 0, Midline::VerticalX05).unwrap();
        assert!((m1 - 0.25).abs() < 1e-14 && (y1 - 0.5).abs() < 1e-14);
        let (m2, x2) = midline_max(&v, &u, 1, Midline::HorizontalY05).unwrap();
        assert!((m2 - 1.0).abs() < 1e-14 && x2 == 1.0);
        assert!(midline_max(&v, &u, 2, Midline::HorizontalY05).is_err());
    }

    #[test]
    fn rates() {
        assert_eq!(convergence_rate(4.0, 1.0, 0.2, 0.1).unwrap(), 2.0);
        assert_eq!(convergence_rate(8.0, 1.0, 0.2, 0.1).unwrap(), 3.0);
        let r = convergence_rate(0.0206808, 0.0046705, 1.0 / 8.0, 1.0 / 16.0).unwrap();
        assert!((r - 2.15).abs() < 0.005, "{r}");
        assert!(matches!(convergence_rate(0.0, 1.0, 0.2, 0.1), Err(Error::UndefinedRate { .. })));
        assert!(convergence_rate(1.0, -1.0, 0.2, 0.1).is_err());
        assert!(convergence_rate(1.0, 2.0, 0.1, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn rate_is_symmetric(e1 in 1e-8f64..1.0, e2 in 1e-8f64..1.0, dt1 in 1e-4f64..1.0, ratio in 1.1f64..4.0) {
            let dt2 = dt1 / ratio;
            let a = convergence_rate(e1, e2, dt1, dt2).unwrap();
            let b = convergence_rate(e2, e1, dt2, dt1).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    struct Poly;

    impl ExactSolution for Poly {
        fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
            [(1.0 + t) * x[0] * x[1], x[1] * x[1]]
        }
        fn velocity_gradient(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
            [[(1.0 + t) * x[1], (1.0 + t) * x[0]], [0.0, 2.0 * x[1]]]
        }
        fn temperature(&self, x: [f64; 2], _t: f64) -> f64 {
            x[0] * x[0] - x[1]
        }
        fn temperature_gradient(&self, x: [f64; 2], _t: f64) -> [f64; 2] {
            [2.0 * x[0], -1.0]
        }
        fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
            t * (x[0] + x[1] - 1.0)
        }
    }

    fn spaces(m: usize) -> [FeSpace; 3] {
        let mesh = Arc::new(Mesh::unit_square(m).unwrap());
        [
            FeSpace::new(mesh.clone(), SpaceKind::VectorP2),
            FeSpace::new(mesh.clone(), SpaceKind::ScalarP2),
            FeSpace::new(mesh, SpaceKind::ScalarP1),
        ]
    }

    #[test]
    fn representable_fields_have_zero_error() {
        let sp = spaces(4);
        let t = 0.3;
        let u = sp[0].interpolate_vector(|x| Poly.velocity(x, t)).unwrap();
        let temp = sp[1].interpolate_scalar(|x| Poly.temperature(x, t)).unwrap();
        let p = sp[2].interpolate_scalar(|x| Poly.pressure(x, t)).unwrap();
        let e = level_errors([&sp[0], &sp[1], &sp[2]], [&u, &temp, &p], &Poly, t, Some(t)).unwrap();
        for v in [e.u_l2, e.u_h1, e.t_l2, e.t_h1, e.p_l2.unwrap()] {
            assert!(v < 1e-13, "{e:?}");
        }
    }

    #[test]
    fn level_error_of_a_known_offset() {
        // Offset T by 1 on the unit square: L2 error 1, gradient error 0.
        let sp = spaces(3);
        let u = sp[0].interpolate_vector(|x| Poly.velocity(x, 0.0)).unwrap();
        let temp = sp[1].interpolate_scalar(|x| Poly.temperature(x, 0.0) + 1.0).unwrap();
        let p = sp[2].zeros();
        let e = level_errors([&sp[0], &sp[1], &sp[2]], [&u, &temp, &p], &Poly, 0.0, None).unwrap();
        assert!((e.t_l2 - 1.0).abs() < 1e-13 && e.t_h1 < 1e-12);
        assert_eq!(e.p_l2, None);
    }

    #[test]
    fn time_norms_follow_the_discrete_definitions() {
        // Constant error e at N + 1 levels: the sum runs over n = 0..N, so
        // |||e|||_2 = sqrt((N + 1) dt) e.
        let dt = 0.125;
        let mut h = ErrorHistory::new(dt);
        for n in 0..=8 {
            h.push(LevelErrors {
                t: n as f64 * dt,
                u_l2: 0.5,
                u_h1: 0.5,
                t_l2: 0.25,
                t_h1: 0.25,
                p_l2: (n > 0).then_some(2.0),
            });
        }
        let s = h.summary();
        assert_eq!(h.t_star(), 1.0);
        assert!((s.u_l2_h1 - (1.0f64 + dt).sqrt() * 0.5).abs() < 1e-15);
        assert!((s.t_l2_h1 - (1.0f64 + dt).sqrt() * 0.25).abs() < 1e-15);
        assert!((s.p_l2_l2 - 2.0).abs() < 1e-15);
        assert_eq!((s.u_linf_l2, s.t_linf_l2), (0.5, 0.25));
    }

    #[test]
    fn csv_outputs() {
        let mut buf = Vec::new();
        write_benchmark_csv(&[BenchmarkRow { ra: 1e4, nu_avg: 2.25, max_u1_x05: 16.18, max_u2_y05: 19.6 }], &mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("Ra,Nu_avg,max_u1_x05,max_u2_y05\n1e4,2.25"));
        let mut buf = Vec::new();
        write_profile_csv(&[(0.0, 1.0), (0.5, 2.0)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}
