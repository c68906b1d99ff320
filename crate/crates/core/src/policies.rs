//! Benchmark policies and the drift lookup used by the simulator.
//!
//! A static policy runs at a constant drift `theta < 0`; the queue is then a
//! reflected Brownian motion with mean `sigma2 / (2|theta|)` and idleness
//! rate `|theta|`, so its long-run average cost is
//!
//! ```text
//! beta(theta) = c(theta) + h sigma2 / (2|theta|) + p |theta|
//! ```

use serde::Serialize;

use crate::closedform::SolveResult;
use crate::error::{Error, Result};
use crate::model::ProblemInstance;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Policy {
    /// Nested thresholds: drift `levels[k-1]` on `[z_k, z_{k-1})`.
    Dynamic {
        /// `z_1..z_K`, non-increasing.
        thresholds: Vec<f64>,
        /// `theta_0..theta_K`
        levels: Vec<f64>,
    },
    Static { theta: f64 },
    /// Mixture over the ladder, operated at its mean drift.
    RandomizedStatic { weights: Vec<f64>, mean_drift: f64 },
}

impl Policy {
    pub fn dynamic(inst: &ProblemInstance, result: &SolveResult) -> Self {
        Policy::Dynamic {
            thresholds: result.thresholds.clone(),
            levels: inst.ladder().to_vec(),
        }
    }

    pub fn static_drift(inst: &ProblemInstance, theta: f64) -> Result<Self> {
        check_static(inst, theta)?;
        Ok(Policy::Static { theta })
    }

    /// `weights` are over `theta_0..theta_K`.
    pub fn randomized(inst: &ProblemInstance, weights: Vec<f64>) -> Result<Self> {
        let mean_drift = mixture_drift(inst, &weights)?;
        Ok(Policy::RandomizedStatic {
            weights,
            mean_drift,
        })
    }

    /// Drift applied at queue length `z`.
    pub fn drift_at(&self, z: f64) -> f64 {
        match self {
            Policy::Dynamic { thresholds, levels } => {
                let passed = thresholds.iter().filter(|&&zk| zk <= z).count();
                levels[thresholds.len() - passed]
            }
            Policy::Static { theta } => *theta,
            Policy::RandomizedStatic { mean_drift, .. } => *mean_drift,
        }
    }

    /// Precomputed `(drift, cost rate)` lookup for the simulator.
    pub fn rule(&self, inst: &ProblemInstance) -> DriftRule {
        match self {
            Policy::Dynamic { thresholds, levels } => DriftRule::Ladder {
                thresholds: thresholds.clone(),
                costs: levels.iter().map(|&t| inst.cost_in_domain(t)).collect(),
                drifts: levels.clone(),
            },
            Policy::Static { theta } => DriftRule::Constant {
                drift: *theta,
                cost: inst.cost_in_domain(*theta),
            },
            Policy::RandomizedStatic { mean_drift, .. } => DriftRule::Constant {
                drift: *mean_drift,
                cost: inst.cost_in_domain(*mean_drift),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            Policy::Dynamic { .. } => "dynamic".into(),
            Policy::Static { theta } => format!("static:{theta}"),
            Policy::RandomizedStatic { weights, .. } => {
                let w: Vec<String> = weights.iter().map(|w| w.to_string()).collect();
                format!("mix:{}", w.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DriftRule {
    Constant { drift: f64, cost: f64 },
    Ladder {
        thresholds: Vec<f64>,
        drifts: Vec<f64>,
        costs: Vec<f64>,
    },
}

impl DriftRule {
    #[inline]
    pub fn at(&self, z: f64) -> (f64, f64) {
        match self {
            DriftRule::Constant { drift, cost } => (*drift, *cost),
            DriftRule::Ladder {
                thresholds,
                drifts,
                costs,
            } => {
                let passed = thresholds.iter().filter(|&&zk| zk <= z).count();
                let i = thresholds.len() - passed;
                (drifts[i], costs[i])
            }
        }
    }
}

fn check_static(inst: &ProblemInstance, theta: f64) -> Result<()> {
    if theta >= inst.theta0() && theta < 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "static drift",
            value: theta,
            domain: format!("[{}, 0)", inst.theta0()),
        })
    }
}

/// The closed-form cost once the drift is known to be admissible.
fn static_cost_unchecked(inst: &ProblemInstance, theta: f64) -> f64 {
    let a = theta.abs();
    inst.cost_in_domain(theta) + inst.h() * inst.sigma2() / (2.0 * a) + inst.p() * a
}

/// Long-run average cost of always running at drift `theta`.
pub fn static_cost(inst: &ProblemInstance, theta: f64) -> Result<f64> {
    check_static(inst, theta)?;
    Ok(static_cost_unchecked(inst, theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticChoice {
    pub theta: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestStatic {
    /// Best rung of the ladder with negative drift.
    pub ladder: StaticChoice,
    /// Best drift anywhere in `[theta_0, 0)`.
    pub continuous: StaticChoice,
}

/// Minimize the static cost over the ladder and over `[theta_0, 0)`.
///
/// On the segment with slope `c_k` the cost is
/// `const + c_k theta + h sigma2 / (2|theta|) - p theta`, which is convex in
/// `theta < 0` with its stationary point at `|theta| = sqrt(h sigma2 / (2 (p - c_k)))`.
pub fn best_static(inst: &ProblemInstance) -> BestStatic {
    let ladder = inst
        .ladder()
        .iter()
        .filter(|&&t| t < 0.0)
        .map(|&t| StaticChoice {
            theta: t,
            cost: static_cost_unchecked(inst, t),
        })
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .expect("theta_0 < 0 is always on the ladder");

    let mut continuous = ladder;
    let hs = inst.h() * inst.sigma2();
    for (k, &ck) in inst.unit_costs().iter().enumerate() {
        if inst.p() <= ck {
            continue;
        }
        let (lo, hi) = (inst.theta(k), inst.theta(k + 1).min(0.0));
        let theta = -(hs / (2.0 * (inst.p() - ck))).sqrt();
        if theta > lo && theta <= hi && theta < 0.0 {
            let cost = static_cost_unchecked(inst, theta);
            if cost < continuous.cost {
                continuous = StaticChoice { theta, cost };
            }
        }
    }
    BestStatic { ladder, continuous }
}

/// Mean drift of a ladder mixture; must be negative.
pub fn mixture_drift(inst: &ProblemInstance, weights: &[f64]) -> Result<f64> {
    let n = inst.ladder().len();
    if weights.len() != n {
        return Err(Error::Validation(format!(
            "mixture needs {n} weights (one per ladder rung), got {}",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Validation("mixture weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("mixture weights sum to {total}, not 1")));
    }
    let mean: f64 = weights.iter().zip(inst.ladder()).map(|(w, t)| w * t).sum();
    if mean >= 0.0 {
        return Err(Error::Domain {
            what: "mixture drift",
            value: mean,
            domain: "(-inf, 0)".into(),
        });
    }
    Ok(mean)
}

/// Cost of a ladder mixture, read as running at its mean drift.
pub fn randomized_static_cost(inst: &ProblemInstance, weights: &[f64]) -> Result<f64> {
    let mean = mixture_drift(inst, weights)?;
    Ok(static_cost_unchecked(inst, mean.max(inst.theta0())))
}
