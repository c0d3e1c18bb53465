use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inconsistent mesh: {0}")]
    InconsistentMesh(String),

    /// A zero pivot was met while eliminating the given column.
    #[error("singular matrix: zero pivot at column {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("startup step did not converge after {iterations} fixed-point iterations (relative update {update:.3e})")]
    StartupFailure { iterations: usize, update: f64 },

    #[error("timestep {dt:.3e} fell below the minimum {dt_min:.3e} at t = {t:.6}")]
    TimestepUnderflow { dt: f64, dt_min: f64, t: f64 },

    #[error("degenerate breeding: control and perturbed trajectories coincide at cycle {cycle}")]
    DegenerateBreeding { cycle: usize },

    #[error("convergence rate undefined for errors ({e1}, {e2}) and timesteps ({dt1}, {dt2})")]
    UndefinedRate { e1: f64, e2: f64, dt1: f64, dt2: f64 },

    #[error("run did not reach its stopping condition within {max_steps} steps")]
    Timeout { max_steps: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
