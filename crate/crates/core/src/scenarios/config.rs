//! Flat `key = value` run configuration.

use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::perturbation::BredVectorConfig;
use crate::stepper::CflConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    DoublePaneWindow,
    Mms,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cavity" | "double_pane_window" => Ok(Scenario::DoublePaneWindow),
            "mms" => Ok(Scenario::Mms),
            _ => Err(Error::Config(format!("unknown scenario '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub ra: f64,
    pub pr: f64,
    /// Mesh subdivisions per side (cavity).
    pub m: usize,
    /// Initial timestep; for the MMS ladder `None` means `1/m`.
    pub dt0: Option<f64>,
    pub t_final: Option<f64>,
    pub steady_tol: Option<f64>,
    pub max_steps: usize,
    pub dt_min: f64,
    pub cfl: CflConfig,
    pub seed: u64,
    /// Explicit bred-vector amplitudes; drawn from `seed` when absent.
    pub epsilon: Option<[f64; 3]>,
    pub breed_interval: f64,
    pub k_star: usize,
    pub eps_mms: f64,
    pub mms_ladder: Vec<usize>,
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Cavity defaults: `Pr = 0.71`, `dt = 0.001`, steady tolerance `1e-5`,
    /// five breeding cycles of one step each.
    pub fn cavity(ra: f64, m: usize) -> Self {
        Self {
            scenario: Scenario::DoublePaneWindow,
            ra,
            pr: 0.71,
            m,
            dt0: Some(0.001),
            t_final: None,
            steady_tol: Some(1e-5),
            max_steps: 1_000_000,
            dt_min: 1e-9,
            cfl: CflConfig::default(),
            seed: 0,
            epsilon: None,
            breed_interval: 0.001,
            k_star: 5,
            eps_mms: 0.01,
            mms_ladder: Vec::new(),
            output_dir: None,
        }
    }

    /// MMS defaults: `Pr = 1`, `Ra = 100`, `t* = 1`, `m in {8, 16, 24}` with
    /// `dt = 1/m`, members scaled by `1 +- 0.01`.
    pub fn mms() -> Self {
        Self {
            scenario: Scenario::Mms,
            ra: 100.0,
            pr: 1.0,
            m: 8,
            dt0: None,
            t_final: Some(1.0),
            steady_tol: None,
            mms_ladder: vec![8, 16, 24],
            ..Self::cavity(100.0, 8)
        }
    }

    pub fn bred_config(&self, dt: f64) -> BredVectorConfig {
        let mut c = BredVectorConfig::from_seed(self.seed, self.breed_interval.max(dt), self.k_star);
        if let Some(e) = self.epsilon {
            c.epsilon = e;
        }
        c
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys not given keep
    /// the defaults of the named scenario.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let scenario = match pairs.iter().find(|(k, _)| k == "scenario") {
            Some((_, v)) => v.parse()?,
            None => Scenario::DoublePaneWindow,
        };
        let mut config = match scenario {
            Scenario::DoublePaneWindow => Self::cavity(1e4, 64),
            Scenario::Mms => Self::mms(),
        };
        for (k, v) in &pairs {
            config.set(k, v)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
        }
        fn opt(key: &str, v: &str) -> Result<Option<f64>> {
            if v == "none" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        match key {
            "scenario" => self.scenario = value.parse()?,
            "ra" => self.ra = num(key, value)?,
            "pr" => self.pr = num(key, value)?,
            "m" => self.m = num(key, value)?,
            "dt" => self.dt0 = opt(key, value)?,
            "t_final" => self.t_final = opt(key, value)?,
            "steady_tol" => self.steady_tol = opt(key, value)?,
            "max_steps" => self.max_steps = num(key, value)?,
            "dt_min" => self.dt_min = num(key, value)?,
            "c_dagger" => self.cfl.c_dagger = num(key, value)?,
            "cfl" => self.cfl.enabled = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "epsilon" => {
                let parts: Vec<f64> = value.split(',').map(|p| num(key, p.trim())).collect::<Result<_>>()?;
                let e: [f64; 3] =
                    parts.try_into().map_err(|_| Error::Config("epsilon: expected three comma-separated values".into()))?;
                self.epsilon = Some(e);
            }
            "breed_interval" => self.breed_interval = num(key, value)?,
            "k_star" => self.k_star = num(key, value)?,
            "eps_mms" => self.eps_mms = num(key, value)?,
            "mms_ladder" => {
                self.mms_ladder = value.split(',').map(|p| num(key, p.trim())).collect::<Result<_>>()?;
            }
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "j" => {
                if value != "2" {
                    return Err(Error::Config(format!("j: only two-member ensembles are supported, got {value}")));
                }
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.pr > 0.0) {
            return bad(format!("pr must be positive, got {}", self.pr));
        }
        if !(self.ra >= 0.0) {
            return bad(format!("ra must be non-negative, got {}", self.ra));
        }
        if self.m == 0 {
            return bad("m must be positive".into());
        }
        if let Some(dt) = self.dt0 {
            if !(dt > 0.0) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if self.t_final.is_none() && self.steady_tol.is_none() {
            return bad("either t_final or steady_tol is required".into());
        }
        if let Some(t) = self.t_final {
            if !(t > 0.0) {
                return bad(format!("t_final must be positive, got {t}"));
            }
        }
        if let Some(t) = self.steady_tol {
            if !(t > 0.0) {
                return bad(format!("steady_tol must be positive, got {t}"));
            }
        }
        if !(self.cfl.c_dagger > 0.0) {
            return bad(format!("c_dagger must be positive, got {}", self.cfl.c_dagger));
        }
        if !(self.dt_min > 0.0) || self.max_steps == 0 {
            return bad("dt_min and max_steps must be positive".into());
        }
        if let Some(e) = self.epsilon {
            if e.iter().any(|v| !(*v > 0.0)) {
                return bad(format!("epsilon entries must be positive, got {e:?}"));
            }
        }
        if self.k_star == 0 || !(self.breed_interval > 0.0) {
            return bad("k_star and breed_interval must be positive".into());
        }
        if self.scenario == Scenario::Mms {
            if self.mms_ladder.is_empty() || self.mms_ladder.contains(&0) {
                return bad("mms_ladder needs positive mesh sizes".into());
            }
            if !(self.eps_mms.abs() < 1.0) {
                return bad(format!("eps_mms must lie in (-1, 1), got {}", self.eps_mms));
            }
        }
        Ok(())
    }
}
