//! The differentially heated cavity and the manufactured-solution study.

mod config;
mod mms;
pub mod vtk;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

pub use config::{Scenario, ScenarioConfig};
pub use mms::{MmsExact, MmsPoint};

use crate::error::{Error, Result};
use crate::fem::FieldVector;
use crate::mesh::{BoundaryTag, Mesh};
use crate::observables::{
    convergence_rate, level_errors, midline_max, nusselt_avg, nusselt_local, write_benchmark_csv, write_profile_csv,
    BenchmarkRow, ErrorHistory, ErrorSummary, Midline,
};
use crate::perturbation::{benchmark_initial_conditions, BenchmarkInitial};
use crate::stepper::{
    discrete_energy, AdvanceConfig, EnsembleState, ProblemParams, StepLog, Stepper, TemperatureBoundary,
};

/// Member amplitudes `+eps`, `-eps` of the MMS ensemble.
pub fn mms_members(eps: f64) -> [MmsExact; 2] {
    [MmsExact::member(eps), MmsExact::member(-eps)]
}

/// Problem data for the MMS ensemble: member `j` has solution
/// `(1 + eps_j) (u, T, p)` with matching forcing and Dirichlet data.
pub fn mms_params(pr: f64, ra: f64, eps: f64) -> ProblemParams {
    let members = mms_members(eps);
    let xi = [0.0, 1.0];
    ProblemParams {
        pr,
        ra,
        xi,
        j: 2,
        forcing: Some(Arc::new(move |x, t, j| members[j].momentum_forcing(x, t, pr, ra, xi))),
        heat_source: Some(Arc::new(move |x, t, j| members[j].heat_forcing(x, t))),
        velocity_boundary: Some(Arc::new(move |x, t, j| members[j].eval(x, t).u)),
        temperature_boundary: TemperatureBoundary::Prescribed(Arc::new(move |x, t, j| members[j].eval(x, t).temp)),
    }
}

/// Interpolated exact data of every member at `t0`.
pub fn mms_initial_state(stepper: &Stepper, eps: f64, t0: f64, dt: f64) -> Result<EnsembleState> {
    let ops = &stepper.ops;
    let data = mms_members(eps)
        .iter()
        .map(|e| {
            Ok((
                ops.velocity.interpolate_vector(|x| e.eval(x, t0).u)?,
                ops.temperature.interpolate_scalar(|x| e.eval(x, t0).temp)?,
            ))
        })
        .collect::<Result<_>>()?;
    EnsembleState::initial(ops, data, t0, dt)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmsRow {
    pub m: usize,
    pub dt: f64,
    pub steps: usize,
    pub summary: ErrorSummary,
}

/// Rates between consecutive rows, in the column order of [`MMS_COLUMNS`].
#[derive(Clone, Debug, PartialEq)]
pub struct MmsReport {
    pub rows: Vec<MmsRow>,
    pub rates: Vec<[f64; 5]>,
}

pub const MMS_COLUMNS: [&str; 5] = ["u_linf_l2", "grad_u_l2_l2", "T_linf_l2", "grad_T_l2_l2", "p_l2_l2"];

impl ErrorSummary {
    pub fn columns(&self) -> [f64; 5] {
        [self.u_linf_l2, self.u_l2_h1, self.t_linf_l2, self.t_l2_h1, self.p_l2_l2]
    }
}

impl MmsReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "m,dt")?;
        for c in MMS_COLUMNS {
            write!(out, ",{c},rate_{c}")?;
        }
        writeln!(out)?;
        for (i, row) in self.rows.iter().enumerate() {
            write!(out, "{},{:.10}", row.m, row.dt)?;
            for (k, e) in row.summary.columns().iter().enumerate() {
                match i.checked_sub(1).map(|r| self.rates[r][k]) {
                    Some(rate) => write!(out, ",{e:.7e},{rate:.4}")?,
                    None => write!(out, ",{e:.7e},")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// One MMS run on an `m x m` mesh to `t_final`, measuring member-average
/// errors at every level. The level-1 pressure is compared at the half step.
pub fn run_mms_level(config: &ScenarioConfig, m: usize) -> Result<MmsRow> {
    let dt = config.dt0.unwrap_or(1.0 / m as f64);
    let t_final = config.t_final.ok_or_else(|| Error::Config("MMS runs need t_final".into()))?;
    let mesh = Arc::new(Mesh::unit_square(m)?);
    let stepper = Stepper::new(mms_params(config.pr, config.ra, config.eps_mms), mesh)?;
    let ops = stepper.ops.clone();
    let exact = MmsExact::default();
    let spaces = [&ops.velocity, &ops.temperature, &ops.pressure];
    let measure = |state: &EnsembleState, p_time: Option<f64>| {
        let (u, t, p) = state.member_average();
        level_errors(spaces, [&u, &t, &p], &exact, state.t, p_time)
    };

    let mut history = ErrorHistory::new(dt);
    let s0 = mms_initial_state(&stepper, config.eps_mms, 0.0, dt)?;
    history.push(measure(&s0, None)?);
    let s1 = stepper.startup_step(&s0)?;
    history.push(measure(&s1, Some(0.5 * dt))?);
    let advance = AdvanceConfig {
        t_final: Some(t_final),
        steady_tol: None,
        max_steps: config.max_steps,
        dt_min: config.dt_min,
        cfl: config.cfl,
    };
    let (_, log) = stepper.advance(s1, &advance, |_, after, _| {
        history.push(measure(after, Some(after.t))?);
        Ok(())
    })?;
    Ok(MmsRow { m, dt, steps: log.entries.len() + 1, summary: history.summary() })
}

pub fn run_mms(config: &ScenarioConfig) -> Result<MmsReport> {
    config.validate()?;
    let rows = config.mms_ladder.iter().map(|&m| run_mms_level(config, m)).collect::<Result<Vec<_>>>()?;
    let rates = rows
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].summary.columns(), w[1].summary.columns());
            let mut r = [0.0; 5];
            for k in 0..5 {
                r[k] = convergence_rate(a[k], b[k], w[0].dt, w[1].dt)?;
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let report = MmsReport { rows, rates };
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir)?;
        report.write_csv(BufWriter::new(File::create(dir.join("mms_rates.csv"))?))?;
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct BenchmarkReport {
    pub ra: f64,
    pub m: usize,
    pub nu_avg: f64,
    /// `(max u1 on x = 0.5, y of the maximum)`
    pub max_u1_x05: (f64, f64),
    /// `(max u2 on y = 0.5, x of the maximum)`
    pub max_u2_y05: (f64, f64),
    pub hot_profile: Vec<(f64, f64)>,
    pub cold_profile: Vec<(f64, f64)>,
    pub steps: usize,
    pub t_final: f64,
    pub steady: bool,
    pub halvings: usize,
    /// Largest member discrete energy after each step.
    pub energy: Vec<f64>,
    pub max_divergence_ratio: f64,
    pub log: StepLog,
    pub initial: BenchmarkInitial,
    pub state: EnsembleState,
}

impl BenchmarkReport {
    pub fn row(&self) -> BenchmarkRow {
        BenchmarkRow { ra: self.ra, nu_avg: self.nu_avg, max_u1_x05: self.max_u1_x05.0, max_u2_y05: self.max_u2_y05.0 }
    }
}

pub fn cavity_stepper(config: &ScenarioConfig) -> Result<Stepper> {
    let mesh = Arc::new(Mesh::unit_square(config.m)?);
    Stepper::new(ProblemParams::cavity(config.pr, config.ra, 2), mesh)
}

/// Breeds the initial data, runs to the stopping condition and evaluates
/// the member-average observables.
pub fn run_benchmark(config: &ScenarioConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let stepper = cavity_stepper(config)?;
    let ops = stepper.ops.clone();
    let dt = config.dt0.unwrap_or(0.001);
    let initial = benchmark_initial_conditions(&stepper, dt, &config.bred_config(dt))?;
    let state = EnsembleState::initial(&ops, initial.members.clone(), 0.0, dt)?;
    let advance = AdvanceConfig {
        t_final: config.t_final,
        steady_tol: config.steady_tol,
        max_steps: config.max_steps,
        dt_min: config.dt_min,
        cfl: config.cfl,
    };
    let mut energy = Vec::new();
    let mut max_divergence_ratio = 0.0f64;
    let (state, log) = stepper.advance(state, &advance, |_, after, report| {
        let e = discrete_energy(&ops, after).into_iter().fold(0.0, f64::max);
        if !e.is_finite() {
            return Err(Error::invalid(format!("non-finite energy at step {}", after.step_index)));
        }
        energy.push(e);
        max_divergence_ratio = max_divergence_ratio.max(report.divergence_ratio);
        Ok(())
    })?;
    let (u, t, _) = state.member_average();
    let report = BenchmarkReport {
        ra: config.ra,
        m: config.m,
        nu_avg: nusselt_avg(&ops.temperature, &t)?,
        max_u1_x05: midline_max(&ops.velocity, &u, 0, Midline::VerticalX05)?,
        max_u2_y05: midline_max(&ops.velocity, &u, 1, Midline::HorizontalY05)?,
        hot_profile: nusselt_local(&ops.temperature, &t, BoundaryTag::HotWall)?,
        cold_profile: nusselt_local(&ops.temperature, &t, BoundaryTag::ColdWall)?,
        steps: log.entries.len() + 1,
        t_final: state.t,
        steady: log.steady,
        halvings: log.halvings.len(),
        energy,
        max_divergence_ratio,
        log,
        initial,
        state,
    };
    if let Some(dir) = &config.output_dir {
        write_benchmark_outputs(&stepper, &report, dir)?;
    }
    Ok(report)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Report CSV, wall profiles, step log, averaged fields and bred vectors.
pub fn write_benchmark_outputs(stepper: &Stepper, report: &BenchmarkReport, dir: &Path) -> Result<()> {
    let ops = &stepper.ops;
    fs::create_dir_all(dir)?;
    write_benchmark_csv(&[report.row()], create(dir, "benchmark.csv")?)?;
    write_profile_csv(&report.hot_profile, create(dir, "nusselt_hot.csv")?)?;
    write_profile_csv(&report.cold_profile, create(dir, "nusselt_cold.csv")?)?;
    report.log.write_csv(create(dir, "step_log.csv")?)?;
    let mut summary = create(dir, "summary.txt")?;
    writeln!(summary, "Ra = {:e}", report.ra)?;
    writeln!(summary, "m = {}", report.m)?;
    writeln!(summary, "steps = {}", report.steps)?;
    writeln!(summary, "t = {:.6}", report.t_final)?;
    writeln!(summary, "steady = {}", report.steady)?;
    writeln!(summary, "halvings = {}", report.halvings)?;
    writeln!(summary, "Nu_avg = {:.6}", report.nu_avg)?;
    writeln!(summary, "max_u1_x05 = {:.6} at y = {:.6}", report.max_u1_x05.0, report.max_u1_x05.1)?;
    writeln!(summary, "max_u2_y05 = {:.6} at x = {:.6}", report.max_u2_y05.0, report.max_u2_y05.1)?;
    writeln!(summary, "max_energy = {:.6e}", report.energy.iter().cloned().fold(0.0, f64::max))?;
    summary.flush()?;

    let (u, t, p) = report.state.member_average();
    vtk::write_vtk(
        create(dir, "average.vtk")?,
        &ops.temperature,
        &[("T", &ops.temperature, &t), ("u", &ops.velocity, &u), ("p", &ops.pressure, &p)],
    )?;
    let bred: Vec<(String, &FieldVector)> = report
        .initial
        .bred
        .iter()
        .flat_map(|pair| pair.iter().map(|b| (format!("bv_{}_{}", b.channel.name(), sign(b.epsilon)), &b.field)))
        .collect();
    let fields: Vec<_> = bred.iter().map(|(n, f)| (n.as_str(), &ops.temperature, *f)).collect();
    vtk::write_vtk(create(dir, "bred_vectors.vtk")?, &ops.temperature, &fields)?;
    Ok(())
}

fn sign(e: f64) -> &'static str {
    if e >= 0.0 {
        "plus"
    } else {
        "minus"
    }
}
