//! Shared-matrix ensemble timestepping.
//!
//! Every member sees the same implicit operators, built from the ensemble
//! mean of the extrapolated velocity `2u^n - u^{n-1}`. Each member's
//! deviation from that mean enters explicitly on the right-hand side, so one
//! factorization per sub-problem serves the whole ensemble.

mod operators;

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

pub use operators::{Operators, SystemLayout, ThermalDirichlet, PINNED_PRESSURE_NODE};

use crate::error::{Error, Result};
use crate::fem::assembly::convection_values;
use crate::fem::{
    apply_convection, assemble_buoyancy, assemble_load_scalar, assemble_load_vector, FieldVector,
};
use crate::mesh::{BoundaryTag, Mesh};
use crate::sparse::CsrMatrix;
use operators::dot;

/// `(x, t, member) -> vector`
pub type VectorSource = Arc<dyn Fn([f64; 2], f64, usize) -> [f64; 2] + Send + Sync>;
/// `(x, t, member) -> scalar`
pub type ScalarSource = Arc<dyn Fn([f64; 2], f64, usize) -> f64 + Send + Sync>;

const STARTUP_TOL: f64 = 1e-10;
const STARTUP_MAX_ITER: usize = 50;

#[derive(Clone)]
pub enum TemperatureBoundary {
    /// `T = 1` on the hot wall, `T = 0` on the cold wall, insulated elsewhere.
    Cavity,
    /// Natural condition on the whole boundary.
    Insulated,
    /// Member-dependent values on the whole boundary.
    Prescribed(ScalarSource),
}

impl TemperatureBoundary {
    fn dirichlet(&self) -> ThermalDirichlet {
        match self {
            TemperatureBoundary::Cavity => ThermalDirichlet::VerticalWalls,
            TemperatureBoundary::Insulated => ThermalDirichlet::None,
            TemperatureBoundary::Prescribed(_) => ThermalDirichlet::AllWalls,
        }
    }

    fn value(&self, tag: BoundaryTag, x: [f64; 2], t: f64, member: usize) -> f64 {
        match self {
            TemperatureBoundary::Cavity => f64::from(u8::from(tag == BoundaryTag::HotWall)),
            TemperatureBoundary::Insulated => unreachable!("no Dirichlet temperature nodes"),
            TemperatureBoundary::Prescribed(g) => g(x, t, member),
        }
    }
}

#[derive(Clone)]
pub struct ProblemParams {
    pub pr: f64,
    pub ra: f64,
    /// Unit buoyancy direction; the momentum source is `+Pr Ra xi T`.
    pub xi: [f64; 2],
    pub j: usize,
    pub forcing: Option<VectorSource>,
    pub heat_source: Option<ScalarSource>,
    /// `None` means no-slip.
    pub velocity_boundary: Option<VectorSource>,
    pub temperature_boundary: TemperatureBoundary,
}

impl fmt::Debug for ProblemParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemParams")
            .field("pr", &self.pr)
            .field("ra", &self.ra)
            .field("xi", &self.xi)
            .field("j", &self.j)
            .field("forcing", &self.forcing.is_some())
            .field("heat_source", &self.heat_source.is_some())
            .finish_non_exhaustive()
    }
}

impl ProblemParams {
    /// Unforced cavity with no-slip walls.
    pub fn cavity(pr: f64, ra: f64, j: usize) -> Self {
        Self {
            pr,
            ra,
            xi: [0.0, 1.0],
            j,
            forcing: None,
            heat_source: None,
            velocity_boundary: None,
            temperature_boundary: TemperatureBoundary::Cavity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pr > 0.0) {
            return Err(Error::invalid(format!("Pr must be positive, got {}", self.pr)));
        }
        if !(self.ra >= 0.0) {
            return Err(Error::invalid(format!("Ra must be non-negative, got {}", self.ra)));
        }
        if ((self.xi[0].hypot(self.xi[1])) - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("buoyancy direction must be a unit vector"));
        }
        if self.j == 0 {
            return Err(Error::invalid("ensemble needs at least one member"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CflConfig {
    pub c_dagger: f64,
    pub enabled: bool,
}

impl Default for CflConfig {
    fn default() -> Self {
        Self { c_dagger: 1.0, enabled: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemberState {
    pub u_prev: FieldVector,
    pub u_curr: FieldVector,
    pub t_prev: FieldVector,
    pub t_curr: FieldVector,
    pub p_curr: FieldVector,
}

impl MemberState {
    pub fn u_extrapolated(&self) -> FieldVector {
        self.u_curr.combine(2.0, &self.u_prev, -1.0)
    }

    pub fn t_extrapolated(&self) -> FieldVector {
        self.t_curr.combine(2.0, &self.t_prev, -1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleState {
    pub members: Vec<MemberState>,
    /// Time of the current level.
    pub t: f64,
    pub dt: f64,
    pub step_index: usize,
    /// False until the startup step has produced level 1.
    pub two_levels: bool,
}

impl EnsembleState {
    /// Level-0 state; both stored levels hold the initial data.
    pub fn initial(ops: &Operators, data: Vec<(FieldVector, FieldVector)>, t0: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("timestep must be positive, got {dt}")));
        }
        if data.is_empty() {
            return Err(Error::invalid("ensemble needs at least one member"));
        }
        let members = data
            .into_iter()
            .map(|(u, t)| {
                ops.velocity.check(&u)?;
                ops.temperature.check(&t)?;
                Ok(MemberState {
                    u_prev: u.clone(),
                    u_curr: u,
                    t_prev: t.clone(),
                    t_curr: t,
                    p_curr: ops.pressure.zeros(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { members, t: t0, dt, step_index: 0, two_levels: false })
    }

    pub fn j(&self) -> usize {
        self.members.len()
    }

    /// Member average of the current velocity, temperature and pressure.
    pub fn member_average(&self) -> (FieldVector, FieldVector, FieldVector) {
        let avg = |get: &dyn Fn(&MemberState) -> &FieldVector| {
            let first = get(&self.members[0]);
            let mut values = vec![0.0; first.len()];
            for m in &self.members {
                for (a, v) in values.iter_mut().zip(&get(m).values) {
                    *a += v;
                }
            }
            let inv = 1.0 / self.members.len() as f64;
            first.with_values(values.into_iter().map(|v| v * inv).collect())
        };
        (avg(&|m| &m.u_curr), avg(&|m| &m.t_curr), avg(&|m| &m.p_curr))
    }
}

/// `<u>_e = (1/J) sum_j (2u_j^n - u_j^{n-1})` and `u'_j = 2u_j^n - u_j^{n-1} - <u>_e`.
pub fn mean_and_fluctuations(state: &EnsembleState) -> (FieldVector, Vec<FieldVector>) {
    let extrap: Vec<FieldVector> = state.members.iter().map(MemberState::u_extrapolated).collect();
    let mut sum = vec![0.0; extrap[0].len()];
    for e in &extrap {
        for (s, v) in sum.iter_mut().zip(&e.values) {
            *s += v;
        }
    }
    let inv = 1.0 / extrap.len() as f64;
    let mean = extrap[0].with_values(sum.into_iter().map(|s| s * inv).collect());
    let fluct = extrap.iter().map(|e| e.combine(1.0, &mean, -1.0)).collect();
    (mean, fluct)
}

/// Checks `C dt / h * max_j ||grad u'_j||^2 <= 1` and returns the left side.
pub fn cfl_ok(dt: f64, h: f64, fluctuations: &[FieldVector], cfl: &CflConfig, ops: &Operators) -> (bool, f64) {
    let max_grad = fluctuations.iter().map(|f| ops.h1_seminorm_sq(&f.values)).fold(0.0, f64::max);
    let value = cfl.c_dagger * dt / h * max_grad;
    (!cfl.enabled || value <= 1.0, value)
}

fn relative_change(new: &[f64], old: &[f64], norm_sq: impl Fn(&[f64]) -> f64) -> f64 {
    let diff: Vec<f64> = new.iter().zip(old).map(|(a, b)| a - b).collect();
    let denom = norm_sq(new);
    if denom > 0.0 {
        (norm_sq(&diff) / denom).sqrt()
    } else {
        f64::INFINITY
    }
}

/// Relative Euclidean update of a fixed-point iterate; absolute when the
/// new iterate is zero.
fn picard_change(new: &[f64], old: &[f64]) -> f64 {
    let diff = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm = dot(new, new).sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

/// Largest L2 relative increment of velocity and temperature over all
/// members. A zero denominator counts as not converged.
pub fn steady_state_change(ops: &Operators, prev: &EnsembleState, curr: &EnsembleState) -> f64 {
    prev.members
        .iter()
        .zip(&curr.members)
        .map(|(a, b)| {
            let du = relative_change(&b.u_curr.values, &a.u_curr.values, |v| ops.l2_norm_sq(v));
            let dt = relative_change(&b.t_curr.values, &a.t_curr.values, |v| ops.l2_norm_sq(v));
            du.max(dt)
        })
        .fold(0.0, f64::max)
}

pub fn steady_state_reached(ops: &Operators, prev: &EnsembleState, curr: &EnsembleState, tol: f64) -> bool {
    steady_state_change(ops, prev, curr) <= tol
}

/// Per-member discrete energy
/// `1/2 ||T^n||^2 + 1/2 ||2T^n - T^{n-1}||^2 + ||u^n||^2 + ||2u^n - u^{n-1}||^2`.
pub fn discrete_energy(ops: &Operators, state: &EnsembleState) -> Vec<f64> {
    state
        .members
        .iter()
        .map(|m| {
            0.5 * ops.l2_norm_sq(&m.t_curr.values)
                + 0.5 * ops.l2_norm_sq(&m.t_extrapolated().values)
                + ops.l2_norm_sq(&m.u_curr.values)
                + ops.l2_norm_sq(&m.u_extrapolated().values)
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    /// `max_j ||B u_j^{n+1}|| / ||u_j^{n+1}||` (Euclidean; 0 for a zero field).
    pub divergence_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct AdvanceConfig {
    pub t_final: Option<f64>,
    pub steady_tol: Option<f64>,
    pub max_steps: usize,
    pub dt_min: f64,
    pub cfl: CflConfig,
}

impl Default for AdvanceConfig {
    fn default() -> Self {
        Self { t_final: None, steady_tol: None, max_steps: 1_000_000, dt_min: 1e-9, cfl: CflConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepLogEntry {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub cfl_value: f64,
    pub halvings: usize,
    pub u_norms: Vec<f64>,
    pub t_norms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HalvingEvent {
    /// Index of the step being attempted.
    pub step: usize,
    pub t: f64,
    pub dt_before: f64,
    pub dt_after: f64,
    pub cfl_value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepLog {
    pub entries: Vec<StepLogEntry>,
    pub halvings: Vec<HalvingEvent>,
    pub steady: bool,
}

impl StepLog {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let j = self.entries.first().map_or(0, |e| e.u_norms.len());
        write!(out, "step,t,dt,cfl_value,halvings")?;
        for k in 0..j {
            write!(out, ",u_norm_{k}")?;
        }
        for k in 0..j {
            write!(out, ",T_norm_{k}")?;
        }
        writeln!(out)?;
        for e in &self.entries {
            write!(out, "{},{:.12e},{:.12e},{:.6e},{}", e.step, e.t, e.dt, e.cfl_value, e.halvings)?;
            for v in e.u_norms.iter().chain(&e.t_norms) {
                write!(out, ",{v:.12e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Operators plus problem data; advances [`EnsembleState`]s.
#[derive(Debug)]
pub struct Stepper {
    pub params: ProblemParams,
    pub ops: Arc<Operators>,
}

impl Stepper {
    pub fn new(params: ProblemParams, mesh: Arc<Mesh>) -> Result<Self> {
        params.validate()?;
        let ops = Arc::new(Operators::new(mesh, params.temperature_boundary.dirichlet())?);
        Ok(Self { params, ops })
    }

    /// Reuses operators built for another stepper on the same mesh.
    pub fn with_operators(params: ProblemParams, ops: Arc<Operators>) -> Result<Self> {
        params.validate()?;
        if params.temperature_boundary.dirichlet() != ThermalDirichlet::None
            && ops.thermal_dirichlet.is_empty()
        {
            return Err(Error::invalid("operators were built without temperature Dirichlet nodes"));
        }
        Ok(Self { params, ops })
    }

    fn check_state(&self, state: &EnsembleState) -> Result<()> {
        if state.members.len() != self.params.j {
            return Err(Error::invalid(format!(
                "state has {} members, problem expects {}",
                state.members.len(),
                self.params.j
            )));
        }
        Ok(())
    }

    /// The step's velocity-pressure and temperature matrices for a given
    /// extrapolated ensemble mean.
    pub fn step_matrices(&self, mean: &FieldVector, dt: f64) -> (CsrMatrix, CsrMatrix) {
        let ops = &self.ops;
        let conv = convection_values(&ops.temperature, &mean.values);
        let c0 = 1.5 / dt;
        (
            ops.saddle.assemble(&ops.combine(c0, &conv, 1.0, self.params.pr)),
            ops.thermal.assemble(&ops.combine(c0, &conv, 1.0, 1.0)),
        )
    }

    /// Matrices as member `member` would assemble them on its own. Only for
    /// checking that all members share one operator.
    pub fn member_step_matrices(&self, state: &EnsembleState, member: usize) -> (CsrMatrix, CsrMatrix) {
        assert!(member < state.members.len());
        let (mean, _) = mean_and_fluctuations(state);
        self.step_matrices(&mean, state.dt)
    }

    fn velocity_boundary(&self, x: [f64; 2], t: f64, member: usize) -> [f64; 2] {
        self.params.velocity_boundary.as_ref().map_or([0.0, 0.0], |g| g(x, t, member))
    }

    fn impose_velocity_bc(&self, rhs: &mut [f64], t: f64, member: usize) {
        let n = self.ops.n();
        for &d in &self.ops.velocity_dirichlet {
            let (c, s) = (d / n, d % n);
            rhs[d] = self.velocity_boundary(self.ops.velocity.nodes()[s], t, member)[c];
        }
    }

    fn impose_thermal_bc(&self, rhs: &mut [f64], t: f64, member: usize) {
        for &(s, tag) in &self.ops.thermal_dirichlet {
            rhs[s] = self.params.temperature_boundary.value(tag, self.ops.temperature.nodes()[s], t, member);
        }
    }

    /// Overwrites the Dirichlet dofs of a member's fields with boundary data.
    pub fn impose_boundary_values(&self, u: &mut FieldVector, temp: &mut FieldVector, t: f64, member: usize) {
        self.impose_velocity_bc(&mut u.values, t, member);
        self.impose_thermal_bc(&mut temp.values, t, member);
    }

    fn forcing_load(&self, t: f64, member: usize) -> Result<Option<FieldVector>> {
        self.params
            .forcing
            .as_ref()
            .map(|f| assemble_load_vector(&self.ops.velocity, |x| f(x, t, member)))
            .transpose()
    }

    fn heat_load(&self, t: f64, member: usize) -> Result<Option<FieldVector>> {
        self.params
            .heat_source
            .as_ref()
            .map(|g| assemble_load_scalar(&self.ops.temperature, |x| g(x, t, member)))
            .transpose()
    }

    fn velocity_rhs(
        &self,
        m: &MemberState,
        fluct: &FieldVector,
        dt: f64,
        t_new: f64,
        member: usize,
    ) -> Result<Vec<f64>> {
        let ops = &self.ops;
        let hist = m.u_curr.combine(4.0, &m.u_prev, -1.0);
        let mh = ops.apply_blocks(&ops.mass, &hist.values);
        let conv = apply_convection(fluct, &m.u_extrapolated(), &ops.velocity)?;
        let buoy = assemble_buoyancy(&m.t_extrapolated(), &ops.velocity, self.params.pr * self.params.ra, self.params.xi)?;
        let load = self.forcing_load(t_new, member)?;
        let scale = 0.5 / dt;
        let mut rhs: Vec<f64> = mh.iter().zip(&buoy.values).map(|(a, b)| a * scale + b).collect();
        if let Some(load) = load {
            rhs.iter_mut().zip(&load.values).for_each(|(r, l)| *r += l);
        }
        rhs.iter_mut().zip(&conv.values).for_each(|(r, c)| *r -= c);
        rhs.resize(ops.saddle.dim(), 0.0);
        self.impose_velocity_bc(&mut rhs, t_new, member);
        Ok(rhs)
    }

    fn thermal_rhs(&self, m: &MemberState, fluct: &FieldVector, dt: f64, t_new: f64, member: usize) -> Result<Vec<f64>> {
        let ops = &self.ops;
        let hist = m.t_curr.combine(4.0, &m.t_prev, -1.0);
        let mh = ops.mass.mul_vec(&hist.values);
        let conv = apply_convection(fluct, &m.t_extrapolated(), &ops.temperature)?;
        let load = self.heat_load(t_new, member)?;
        let scale = 0.5 / dt;
        let mut rhs: Vec<f64> = mh.iter().map(|a| a * scale).collect();
        if let Some(load) = load {
            rhs.iter_mut().zip(&load.values).for_each(|(r, l)| *r += l);
        }
        rhs.iter_mut().zip(&conv.values).for_each(|(r, c)| *r -= c);
        self.impose_thermal_bc(&mut rhs, t_new, member);
        Ok(rhs)
    }

    /// Splits a saddle solution into velocity and zero-mean pressure.
    fn split_saddle(&self, mut x: Vec<f64>) -> Result<(FieldVector, FieldVector)> {
        let nv = self.ops.velocity.dof_count();
        let mut p = x.split_off(nv);
        self.ops.remove_pressure_mean(&mut p);
        Ok((self.ops.velocity.field(x)?, self.ops.pressure.field(p)?))
    }

    fn divergence_ratio(&self, u: &FieldVector) -> f64 {
        let bu = self.ops.divergence.mul_vec(&u.values);
        let nu = dot(&u.values, &u.values).sqrt();
        if nu > 0.0 {
            dot(&bu, &bu).sqrt() / nu
        } else {
            dot(&bu, &bu).sqrt()
        }
    }

    /// One BDF2 step of every member from levels `n - 1`, `n` to `n + 1`.
    pub fn step(&self, state: &EnsembleState) -> Result<(EnsembleState, StepReport)> {
        let wrap = |e: Error| Error::Step { step: state.step_index + 1, source: Box::new(e) };
        self.check_state(state).map_err(wrap)?;
        if !state.two_levels {
            return Err(wrap(Error::invalid("BDF2 step needs two time levels; run the startup step first")));
        }
        let dt = state.dt;
        let t_new = state.t + dt;
        let (mean, fluct) = mean_and_fluctuations(state);
        let (a_u, a_t) = self.step_matrices(&mean, dt);

        let fact_u = self.ops.saddle.factorize(&a_u).map_err(wrap)?;
        let rhs_u: Vec<Vec<f64>> = state
            .members
            .par_iter()
            .zip(&fluct)
            .enumerate()
            .map(|(j, (m, f))| self.velocity_rhs(m, f, dt, t_new, j))
            .collect::<Result<_>>()
            .map_err(wrap)?;
        let sol_u = fact_u.solve_multi(&rhs_u).map_err(wrap)?;
        drop(fact_u);

        let fact_t = self.ops.thermal.factorize(&a_t).map_err(wrap)?;
        let rhs_t: Vec<Vec<f64>> = state
            .members
            .par_iter()
            .zip(&fluct)
            .enumerate()
            .map(|(j, (m, f))| self.thermal_rhs(m, f, dt, t_new, j))
            .collect::<Result<_>>()
            .map_err(wrap)?;
        let sol_t = fact_t.solve_multi(&rhs_t).map_err(wrap)?;

        let mut report = StepReport::default();
        let mut members = Vec::with_capacity(state.members.len());
        for ((m, xu), xt) in state.members.iter().zip(sol_u).zip(sol_t) {
            let (u, p) = self.split_saddle(xu).map_err(wrap)?;
            report.divergence_ratio = report.divergence_ratio.max(self.divergence_ratio(&u));
            members.push(MemberState {
                u_prev: m.u_curr.clone(),
                u_curr: u,
                t_prev: m.t_curr.clone(),
                t_curr: self.ops.temperature.field(xt).map_err(wrap)?,
                p_curr: p,
            });
        }
        let next = EnsembleState { members, t: t_new, dt, step_index: state.step_index + 1, two_levels: true };
        Ok((next, report))
    }

    /// Fills level 1 with one Crank-Nicolson step per member, solved by
    /// Picard iteration on the half-step averages. The stored pressure
    /// approximates `p` at the half step.
    pub fn startup_step(&self, state: &EnsembleState) -> Result<EnsembleState> {
        self.check_state(state)?;
        if state.two_levels {
            return Err(Error::invalid("startup step needs a single-level state"));
        }
        let results: Vec<(MemberState, f64)> = state
            .members
            .par_iter()
            .enumerate()
            .map(|(j, m)| self.startup_member(m, state.t, state.dt, j))
            .collect::<Result<_>>()?;
        let members = results.into_iter().map(|(m, _)| m).collect();
        Ok(EnsembleState { members, t: state.t + state.dt, dt: state.dt, step_index: 1, two_levels: true })
    }

    fn startup_member(&self, m: &MemberState, t0: f64, dt: f64, member: usize) -> Result<(MemberState, f64)> {
        let ops = &self.ops;
        let (pr, ra) = (self.params.pr, self.params.ra);
        let (u0, tt0) = (&m.u_curr, &m.t_curr);
        let t1 = t0 + dt;
        let t_half = t0 + 0.5 * dt;
        let inv_dt = 1.0 / dt;
        let f_half = self.forcing_load(t_half, member)?;
        let g_half = self.heat_load(t_half, member)?;
        let mu0 = ops.apply_blocks(&ops.mass, &u0.values);
        let ku0 = ops.apply_blocks(&ops.stiffness, &u0.values);
        let mt0 = ops.mass.mul_vec(&tt0.values);
        let kt0 = ops.stiffness.mul_vec(&tt0.values);

        let (mut u, mut temp) = (u0.clone(), tt0.clone());
        let mut update = f64::INFINITY;
        for iteration in 1..=STARTUP_MAX_ITER {
            let u_half = u0.combine(0.5, &u, 0.5);
            let t_half_field = tt0.combine(0.5, &temp, 0.5);

            let conv = convection_values(&ops.temperature, &u_half.values);
            let a_u = ops.saddle.assemble(&ops.combine(inv_dt, &conv, 0.5, 0.5 * pr));
            let n_mat = ops.temperature.pattern().template.with_values(conv)?;
            let nu0 = ops.apply_blocks(&n_mat, &u0.values);
            let buoy = assemble_buoyancy(&t_half_field, &ops.velocity, pr * ra, self.params.xi)?;
            let mut rhs: Vec<f64> = (0..mu0.len())
                .map(|i| inv_dt * mu0[i] - 0.5 * nu0[i] - 0.5 * pr * ku0[i] + buoy.values[i])
                .collect();
            if let Some(f) = &f_half {
                rhs.iter_mut().zip(&f.values).for_each(|(r, l)| *r += l);
            }
            rhs.resize(ops.saddle.dim(), 0.0);
            self.impose_velocity_bc(&mut rhs, t1, member);
            let x = ops.saddle.factorize(&a_u)?.solve(&rhs)?;
            let (u_new, p_new) = self.split_saddle(x)?;

            let u_half_new = u0.combine(0.5, &u_new, 0.5);
            let conv_t = convection_values(&ops.temperature, &u_half_new.values);
            let a_t = ops.thermal.assemble(&ops.combine(inv_dt, &conv_t, 0.5, 0.5));
            let nt0 = ops.temperature.pattern().template.with_values(conv_t)?.mul_vec(&tt0.values);
            let mut rhs_t: Vec<f64> =
                (0..mt0.len()).map(|i| inv_dt * mt0[i] - 0.5 * nt0[i] - 0.5 * kt0[i]).collect();
            if let Some(g) = &g_half {
                rhs_t.iter_mut().zip(&g.values).for_each(|(r, l)| *r += l);
            }
            self.impose_thermal_bc(&mut rhs_t, t1, member);
            let t_new = ops.temperature.field(ops.thermal.factorize(&a_t)?.solve(&rhs_t)?)?;

            update = picard_change(&u_new.values, &u.values).max(picard_change(&t_new.values, &temp.values));
            u = u_new;
            temp = t_new;
            if update < STARTUP_TOL {
                let next = MemberState { u_prev: u0.clone(), u_curr: u, t_prev: tt0.clone(), t_curr: temp, p_curr: p_new };
                return Ok((next, iteration as f64));
            }
        }
        Err(Error::StartupFailure { iterations: STARTUP_MAX_ITER, update })
    }

    /// Runs steps until `t_final`, steady state, or `max_steps`, halving `dt`
    /// whenever the fluctuation condition fails. `observer` sees every
    /// accepted step as `(before, after, report)`.
    pub fn advance<F>(&self, state: EnsembleState, config: &AdvanceConfig, mut observer: F) -> Result<(EnsembleState, StepLog)>
    where
        F: FnMut(&EnsembleState, &EnsembleState, &StepReport) -> Result<()>,
    {
        let mut state = state;
        if !state.two_levels {
            state = self.startup_step(&state)?;
        }
        let mut log = StepLog::default();
        let mut steps = 0usize;
        loop {
            if let Some(t_final) = config.t_final {
                if state.t >= t_final - 1e-9 * state.dt {
                    break;
                }
            }
            if steps >= config.max_steps {
                return Err(Error::Timeout { max_steps: config.max_steps });
            }
            let (_, fluct) = mean_and_fluctuations(&state);
            let mut halvings = 0;
            let cfl_value = loop {
                let (ok, value) = cfl_ok(state.dt, self.ops.h(), &fluct, &config.cfl, &self.ops);
                if ok {
                    break value;
                }
                let dt_after = 0.5 * state.dt;
                if dt_after < config.dt_min {
                    return Err(Error::TimestepUnderflow { dt: dt_after, dt_min: config.dt_min, t: state.t });
                }
                log.halvings.push(HalvingEvent {
                    step: state.step_index + 1,
                    t: state.t,
                    dt_before: state.dt,
                    dt_after,
                    cfl_value: value,
                });
                state.dt = dt_after;
                halvings += 1;
            };
            let (next, report) = self.step(&state)?;
            observer(&state, &next, &report)?;
            steps += 1;
            log.entries.push(StepLogEntry {
                step: next.step_index,
                t: next.t,
                dt: next.dt,
                cfl_value,
                halvings,
                u_norms: next.members.iter().map(|m| self.ops.l2_norm_sq(&m.u_curr.values).sqrt()).collect(),
                t_norms: next.members.iter().map(|m| self.ops.l2_norm_sq(&m.t_curr.values).sqrt()).collect(),
            });
            let steady = config.steady_tol.is_some_and(|tol| steady_state_reached(&self.ops, &state, &next, tol));
            state = next;
            if steady {
                log.steady = true;
                break;
            }
        }
        Ok((state, log))
    }
}
