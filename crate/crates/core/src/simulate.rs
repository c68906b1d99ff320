//! Euler Monte Carlo for the controlled reflected diffusion
//!
//! ```text
//! Z(t) = X(t) + int_0^t theta(Z(s)) ds + L(t),   Z >= 0
//! ```
//!
//! One step with `xi ~ N(0, 1)`:
//!
//! ```text
//! y   = Z + theta(Z) dt + sigma sqrt(dt) xi
//! dL  = max(0, -y)
//! Z'  = y + dL
//! ```
//!
//! After burn-in the three cost streams are accumulated: promotion
//! `c(theta(Z)) dt`, holding `h Z dt` and idleness `p dL`. Each replication
//! draws from its own ChaCha8 stream (`seed`, stream = replication index), so
//! reports do not depend on how replications are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::ProblemInstance;
use crate::policies::{DriftRule, Policy};

pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64(seed), stream = replication index";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub burn_in_fraction: f64,
    pub replications: usize,
    pub seed: u64,
    pub initial_state: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 2e4,
            burn_in_fraction: 0.1,
            replications: 20,
            seed: 20_240_601,
            initial_state: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail(format!("dt must be > 0 (got {})", self.dt));
        }
        if !(self.horizon.is_finite() && self.horizon >= 10.0 * self.dt) {
            return fail(format!(
                "horizon {} must be finite and at least 10 steps of dt = {}",
                self.horizon, self.dt
            ));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return fail(format!("burn_in_fraction {} not in [0, 1)", self.burn_in_fraction));
        }
        if self.replications == 0 {
            return fail("replications must be >= 1".into());
        }
        if !(self.initial_state >= 0.0 && self.initial_state.is_finite()) {
            return fail(format!("initial_state {} must be >= 0", self.initial_state));
        }
        Ok(())
    }

    fn steps(&self) -> (u64, u64) {
        let total = (self.horizon / self.dt).round() as u64;
        let burn = (total as f64 * self.burn_in_fraction).round() as u64;
        (total, burn)
    }
}

/// Per-replication time averages over the measured window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationStats {
    pub promotion: f64,
    pub holding: f64,
    pub idleness: f64,
    pub total: f64,
    pub mean_queue: f64,
    /// `L(t) / t` (reflection per unit time, before the penalty `p`).
    pub local_time_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub policy: String,
    pub mean_total_cost_rate: f64,
    pub promotion_cost_rate: f64,
    pub holding_cost_rate: f64,
    pub idleness_cost_rate: f64,
    /// Standard error of the total cost rate across replications.
    pub std_error: f64,
    /// Student-t 95% half-width across replications.
    pub ci95_half_width: f64,
    pub mean_queue_length: f64,
    pub mean_idleness_rate: f64,
    pub replications: usize,
    pub dt: f64,
    pub horizon: f64,
    pub burn_in_fraction: f64,
    pub seed: u64,
    pub rng: String,
    pub per_replication: Vec<ReplicationStats>,
}

fn replication_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn run_replication(inst: &ProblemInstance, rule: &DriftRule, cfg: &SimConfig, index: usize) -> ReplicationStats {
    let mut rng = replication_rng(cfg.seed, index);
    let (total_steps, burn) = cfg.steps();
    let dt = cfg.dt;
    let sd = (inst.sigma2() * dt).sqrt();
    let mut z = cfg.initial_state;

    let step = |z: f64, xi: f64| -> (f64, f64, f64) {
        let (drift, cost) = rule.at(z);
        let y = z + drift * dt + sd * xi;
        let dl = (-y).max(0.0);
        (y + dl, dl, cost)
    };

    for _ in 0..burn {
        let xi: f64 = StandardNormal.sample(&mut rng);
        z = step(z, xi).0;
    }
    let (mut promo, mut queue, mut local) = (0.0, 0.0, 0.0);
    for _ in burn..total_steps {
        let xi: f64 = StandardNormal.sample(&mut rng);
        let (next, dl, cost) = step(z, xi);
        promo += cost;
        queue += z;
        local += dl;
        z = next;
    }
    let measured = (total_steps - burn) as f64;
    let t = measured * dt;
    let promotion = promo / measured;
    let mean_queue = queue / measured;
    let local_time_rate = local / t;
    let holding = inst.h() * mean_queue;
    let idleness = inst.p() * local_time_rate;
    ReplicationStats {
        promotion,
        holding,
        idleness,
        total: promotion + holding + idleness,
        mean_queue,
        local_time_rate,
    }
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    xs.sum::<f64>() / n as f64
}

/// Simulate `policy` and report long-run average cost estimates.
pub fn simulate_policy(inst: &ProblemInstance, policy: &Policy, cfg: &SimConfig) -> Result<SimulationReport> {
    simulate_policy_with(inst, policy, cfg, Execution::default())
}

pub fn simulate_policy_with(
    inst: &ProblemInstance,
    policy: &Policy,
    cfg: &SimConfig,
    exec: Execution,
) -> Result<SimulationReport> {
    cfg.validate()?;
    let rule = policy.rule(inst);
    let reps = exec.map_indexed(cfg.replications, |i| run_replication(inst, &rule, cfg, i));
    let n = reps.len();
    let promotion = mean(reps.iter().map(|r| r.promotion), n);
    let holding = mean(reps.iter().map(|r| r.holding), n);
    let idleness = mean(reps.iter().map(|r| r.idleness), n);
    let total = promotion + holding + idleness;
    let (std_error, ci95_half_width) = if n > 1 {
        let var = reps.iter().map(|r| (r.total - total).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        (se, t * se)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(SimulationReport {
        policy: policy.label(),
        mean_total_cost_rate: total,
        promotion_cost_rate: promotion,
        holding_cost_rate: holding,
        idleness_cost_rate: idleness,
        std_error,
        ci95_half_width,
        mean_queue_length: mean(reps.iter().map(|r| r.mean_queue), n),
        mean_idleness_rate: mean(reps.iter().map(|r| r.local_time_rate), n),
        replications: n,
        dt: cfg.dt,
        horizon: cfg.horizon,
        burn_in_fraction: cfg.burn_in_fraction,
        seed: cfg.seed,
        rng: RNG_ALGORITHM.into(),
        per_replication: reps,
    })
}

/// Time-average queue length and `L(t)/t` under the static drift `theta`.
pub fn stationary_checks(inst: &ProblemInstance, theta: f64, cfg: &SimConfig) -> Result<(f64, f64)> {
    let policy = Policy::static_drift(inst, theta)?;
    let report = simulate_policy(inst, &policy, cfg)?;
    Ok((report.mean_queue_length, report.mean_idleness_rate))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: f64,
    pub z: f64,
    pub cumulative_l: f64,
}

/// Sample path of replication 0 (same stream as in [`simulate_policy`]),
/// recorded every `every` steps, burn-in included.
pub fn trace_first_replication(
    inst: &ProblemInstance,
    policy: &Policy,
    cfg: &SimConfig,
    every: usize,
) -> Result<Vec<TracePoint>> {
    cfg.validate()?;
    let every = every.max(1) as u64;
    let rule = policy.rule(inst);
    let mut rng = replication_rng(cfg.seed, 0);
    let (total_steps, _) = cfg.steps();
    let sd = (inst.sigma2() * cfg.dt).sqrt();
    let mut z = cfg.initial_state;
    let mut cum = 0.0;
    let mut out = Vec::with_capacity((total_steps / every) as usize + 1);
    out.push(TracePoint {
        t: 0.0,
        z,
        cumulative_l: 0.0,
    });
    for i in 1..=total_steps {
        let xi: f64 = StandardNormal.sample(&mut rng);
        let (drift, _) = rule.at(z);
        let y = z + drift * cfg.dt + sd * xi;
        let dl = (-y).max(0.0);
        z = y + dl;
        cum += dl;
        if i % every == 0 {
            out.push(TracePoint {
                t: i as f64 * cfg.dt,
                z,
                cumulative_l: cum,
            });
        }
    }
    Ok(out)
}
