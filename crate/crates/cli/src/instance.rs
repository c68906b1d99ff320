//! Instance files: strict JSON with optional `solver` and `sim` blocks.

use std::path::Path;

use driftctl::bellman_ode::OdeOptions;
use driftctl::{ProblemInstance, SimConfig};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub theta0: f64,
    pub mu: Vec<f64>,
    pub c: Vec<f64>,
    pub sigma2: f64,
    pub h: f64,
    pub p: f64,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub sim: SimBlock,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub beta_tol: Option<f64>,
    pub ode_step: Option<f64>,
    pub x_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub burn_in_fraction: Option<f64>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
}

impl InstanceFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("malformed instance: {e}")))
    }

    pub fn instance(&self) -> Result<ProblemInstance, CliError> {
        Ok(ProblemInstance::new(
            self.theta0,
            self.mu.clone(),
            self.c.clone(),
            self.sigma2,
            self.h,
            self.p,
        )?)
    }

    /// Copy with one scalar parameter replaced.
    pub fn with_param(&self, name: SweepParam, value: f64) -> Self {
        let mut out = self.clone();
        match name {
            SweepParam::H => out.h = value,
            SweepParam::P => out.p = value,
            SweepParam::Sigma2 => out.sigma2 = value,
        }
        out
    }

    pub fn beta_tol(&self, inst: &ProblemInstance, flag: Option<f64>) -> f64 {
        flag.or(self.solver.beta_tol)
            .unwrap_or(1e-9 * inst.bracket_upper())
    }

    pub fn ode_options(&self, inst: &ProblemInstance) -> OdeOptions {
        let defaults = OdeOptions::for_instance(inst);
        OdeOptions {
            step: self.solver.ode_step.unwrap_or(defaults.step),
            x_max: self.solver.x_max.unwrap_or(defaults.x_max),
            ..defaults
        }
    }

    pub fn sim_config(&self, seed: Option<u64>) -> SimConfig {
        let d = SimConfig::default();
        SimConfig {
            dt: self.sim.dt.unwrap_or(d.dt),
            horizon: self.sim.horizon.unwrap_or(d.horizon),
            burn_in_fraction: self.sim.burn_in_fraction.unwrap_or(d.burn_in_fraction),
            replications: self.sim.replications.unwrap_or(d.replications),
            seed: seed.or(self.sim.seed).unwrap_or(d.seed),
            initial_state: d.initial_state,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    H,
    P,
    Sigma2,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::H => "h",
            SweepParam::P => "p",
            SweepParam::Sigma2 => "sigma2",
        }
    }
}
