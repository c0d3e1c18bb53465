//! Bred-vector initial conditions.
//!
//! A bred vector grows a small perturbation of one scalar channel along a
//! short control trajectory, rescaling the control/perturbed difference to
//! the perturbation amplitude after every reinitialization interval.
//! Each cycle restarts both trajectories from single-level data, so the
//! control and perturbed runs always go through the same integrator path.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::FieldVector;
use crate::stepper::{EnsembleState, Operators, ProblemParams, Stepper};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    U1,
    U2,
    Temperature,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::U1, Channel::U2, Channel::Temperature];

    pub fn name(self) -> &'static str {
        match self {
            Channel::U1 => "u1",
            Channel::U2 => "u2",
            Channel::Temperature => "T",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BredVectorConfig {
    /// Amplitudes for `u1`, `u2`, `T`.
    pub epsilon: [f64; 3],
    /// Reinitialization interval.
    pub delta_t: f64,
    pub k_star: usize,
    pub rng_seed: u64,
}

impl BredVectorConfig {
    /// Draws each amplitude uniformly from `(0, 0.01)`.
    pub fn from_seed(rng_seed: u64, delta_t: f64, k_star: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut draw = || loop {
            let e: f64 = rng.random_range(0.0..0.01);
            if e > 0.0 {
                break e;
            }
        };
        let epsilon = [draw(), draw(), draw()];
        Self { epsilon, delta_t, k_star, rng_seed }
    }

    pub fn validate(&self, dt: f64) -> Result<()> {
        if self.epsilon.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::invalid(format!("perturbation amplitudes must be positive, got {:?}", self.epsilon)));
        }
        if !(dt > 0.0) || !(self.delta_t >= dt * (1.0 - 1e-12)) {
            return Err(Error::invalid(format!(
                "reinitialization interval {} must be at least the timestep {dt}",
                self.delta_t
            )));
        }
        if self.k_star == 0 {
            return Err(Error::invalid("at least one breeding cycle is required"));
        }
        Ok(())
    }

    /// Timesteps per reinitialization interval.
    pub fn steps_per_cycle(&self, dt: f64) -> usize {
        ((self.delta_t / dt).round() as usize).max(1)
    }
}

/// Control state of one cycle: `(u, T)` at `t^k`.
type Level = (FieldVector, FieldVector);

#[derive(Clone, Debug, PartialEq)]
pub struct BredVector {
    pub channel: Channel,
    /// Signed amplitude the vector was bred with.
    pub epsilon: f64,
    /// Scalar P2 field.
    pub field: FieldVector,
    /// L2 norm of the rescaled vector after each cycle.
    pub cycle_norms: Vec<f64>,
}

/// Single-member integrator with a cached control trajectory shared by
/// every bred vector.
pub struct Breeder {
    stepper: Stepper,
    dt: f64,
    steps_per_cycle: usize,
    control: Vec<Level>,
}

impl Breeder {
    /// Integrates the control from `control0` through `k_star` cycles.
    pub fn new(params: &ProblemParams, ops: Arc<Operators>, control0: Level, dt: f64, config: &BredVectorConfig) -> Result<Self> {
        config.validate(dt)?;
        let params = ProblemParams { j: 1, ..params.clone() };
        let stepper = Stepper::with_operators(params, ops)?;
        let mut breeder = Self { stepper, dt, steps_per_cycle: config.steps_per_cycle(dt), control: vec![control0] };
        for k in 0..config.k_star {
            let next = breeder.advance_cycle(&breeder.control[k], k)?;
            breeder.control.push(next);
        }
        Ok(breeder)
    }

    pub fn ops(&self) -> &Arc<Operators> {
        &self.stepper.ops
    }

    pub fn k_star(&self) -> usize {
        self.control.len() - 1
    }

    /// Control states at `t^0, ..., t^{k*}`.
    pub fn control(&self) -> &[Level] {
        &self.control
    }

    fn cycle_time(&self, k: usize) -> f64 {
        (k * self.steps_per_cycle) as f64 * self.dt
    }

    fn advance_cycle(&self, start: &Level, k: usize) -> Result<Level> {
        let ops = &self.stepper.ops;
        let mut state = EnsembleState::initial(ops, vec![start.clone()], self.cycle_time(k), self.dt)?;
        state = self.stepper.startup_step(&state)?;
        for _ in 1..self.steps_per_cycle {
            state = self.stepper.step(&state)?.0;
        }
        let m = state.members.swap_remove(0);
        Ok((m.u_curr, m.t_curr))
    }

    /// Dofs of `channel` that are not fixed by a Dirichlet condition.
    fn free_dofs(&self, channel: Channel) -> Vec<usize> {
        let ops = &self.stepper.ops;
        let n = ops.n();
        let mut fixed = vec![false; n];
        match channel {
            Channel::U1 | Channel::U2 => {
                let c = channel.index();
                for &d in &ops.velocity_dirichlet {
                    if d / n == c {
                        fixed[d % n] = true;
                    }
                }
            }
            Channel::Temperature => {
                for &(s, _) in &ops.thermal_dirichlet {
                    fixed[s] = true;
                }
            }
        }
        (0..n).filter(|&s| !fixed[s]).collect()
    }

    /// Breeds one channel with amplitude `epsilon` (either sign). The
    /// returned field has L2 norm `|epsilon|`.
    pub fn breed(&self, channel: Channel, epsilon: f64) -> Result<BredVector> {
        if !(epsilon != 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("perturbation amplitude must be finite and nonzero, got {epsilon}")));
        }
        let n = self.stepper.ops.n();
        let mut perturbed = self.control[0].clone();
        {
            let values = channel_values_mut(&mut perturbed, channel, n);
            for s in self.free_dofs(channel) {
                values[s] += epsilon;
            }
        }
        let amplitude = epsilon.abs();
        let mut cycle_norms = Vec::with_capacity(self.k_star());
        let mut bv = Vec::new();
        for k in 1..=self.k_star() {
            let advanced = self.advance_cycle(&perturbed, k - 1)?;
            let control = &self.control[k];
            let c = channel_values(control, channel, n);
            let d: Vec<f64> = channel_values(&advanced, channel, n).iter().zip(c).map(|(p, q)| p - q).collect();
            let norm = self.stepper.ops.l2_norm_sq(&d).sqrt();
            if !(norm > 0.0) {
                return Err(Error::DegenerateBreeding { cycle: k });
            }
            let scale = amplitude / norm;
            bv = d.into_iter().map(|v| v * scale).collect();
            cycle_norms.push(self.stepper.ops.l2_norm_sq(&bv).sqrt());

            perturbed = control.clone();
            channel_values_mut(&mut perturbed, channel, n).iter_mut().zip(&bv).for_each(|(p, b)| *p += b);
        }
        let field = self.stepper.ops.temperature.field(bv)?;
        Ok(BredVector { channel, epsilon, field, cycle_norms })
    }
}

fn channel_values(level: &Level, channel: Channel, n: usize) -> &[f64] {
    match channel {
        Channel::U1 => &level.0.values[..n],
        Channel::U2 => &level.0.values[n..],
        Channel::Temperature => &level.1.values,
    }
}

fn channel_values_mut(level: &mut Level, channel: Channel, n: usize) -> &mut [f64] {
    match channel {
        Channel::U1 => &mut level.0.values[..n],
        Channel::U2 => &mut level.0.values[n..],
        Channel::Temperature => &mut level.1.values,
    }
}

/// Two-member cavity data `u = (1 + bv(u1; +-e1), 1 + bv(u2; +-e2))`,
/// `T = 1 + bv(T; +-e3)`, with Dirichlet dofs reset to boundary values.
#[derive(Clone, Debug)]
pub struct BenchmarkInitial {
    /// `(u, T)` for the `+` and `-` members.
    pub members: Vec<Level>,
    /// Bred vectors indexed by `[channel][sign]`, sign 0 = `+`.
    pub bred: Vec<[BredVector; 2]>,
}

/// Uniform control state `u = (1, 1)`, `T = 1` with boundary values imposed.
pub fn uniform_control(stepper: &Stepper) -> Level {
    let ops = &stepper.ops;
    let mut u = ops.velocity.zeros();
    u.values.fill(1.0);
    let mut temp = ops.temperature.zeros();
    temp.values.fill(1.0);
    stepper.impose_boundary_values(&mut u, &mut temp, 0.0, 0);
    (u, temp)
}

pub fn benchmark_initial_conditions(stepper: &Stepper, dt: f64, config: &BredVectorConfig) -> Result<BenchmarkInitial> {
    if stepper.params.j != 2 {
        return Err(Error::invalid(format!("benchmark ensemble needs J = 2, got {}", stepper.params.j)));
    }
    let control0 = uniform_control(stepper);
    let breeder = Breeder::new(&stepper.params, stepper.ops.clone(), control0, dt, config)?;
    let bred = Channel::ALL
        .iter()
        .map(|&c| {
            let e = config.epsilon[c.index()];
            Ok([breeder.breed(c, e)?, breeder.breed(c, -e)?])
        })
        .collect::<Result<Vec<_>>>()?;

    let ops = &stepper.ops;
    let n = ops.n();
    let members = (0..2)
        .map(|sign| {
            let mut u = ops.velocity.zeros();
            let mut temp = ops.temperature.zeros();
            for (s, v) in u.values.iter_mut().enumerate() {
                *v = 1.0 + bred[s / n][sign].field.values[s % n];
            }
            for (v, b) in temp.values.iter_mut().zip(&bred[2][sign].field.values) {
                *v = 1.0 + b;
            }
            stepper.impose_boundary_values(&mut u, &mut temp, 0.0, sign);
            (u, temp)
        })
        .collect();
    Ok(BenchmarkInitial { members, bred })
}
