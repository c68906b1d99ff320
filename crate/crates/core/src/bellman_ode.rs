//! Numerical route for the average-cost Bellman equation: integrate
//!
//! ```text
//! v'(x) = (2 / sigma2) (beta - h x + phi(p - v(x))),    v(0) = 0
//! ```
//!
//! with fixed-step RK4 and classify `beta` by the shape of the solution.
//! The right-hand side is smooth except where `p - v` crosses a unit cost
//! `c_k`; steps that would cross such a level are shortened by bisection on
//! the step length so the solution lands exactly on the level and continues
//! on the next branch.
//!
//! Once `v >= p - c_1` the equation is linear with drift `theta_0`, and the
//! sign of the closed-form tail coefficient decides the class without
//! integrating the exponentially growing mode.

use serde::Serialize;

use crate::closedform::tail_coefficient;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::ProblemInstance;

/// `v'` from the Bellman IVP at `(x, v)`.
pub fn ivp_rhs(inst: &ProblemInstance, x: f64, v: f64, beta: f64) -> f64 {
    2.0 / inst.sigma2() * (beta - inst.h() * x + inst.phi(inst.p() - v))
}

/// Right-hand side with the branch of `phi` pinned to drift `theta_level`.
fn branch_rhs(inst: &ProblemInstance, beta: f64, level: usize, x: f64, v: f64) -> f64 {
    let theta = inst.theta(level);
    let phi = theta * (inst.p() - v) - inst.ladder_costs()[level];
    2.0 / inst.sigma2() * (beta - inst.h() * x + phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Increasing,
    TurnsDecreasing,
    Inconclusive,
}

/// Membership of `beta`: `v_beta` increases to infinity, or turns decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BetaClass {
    Increasing,
    TurnsDecreasing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub step: f64,
    pub x_max: f64,
    /// How many times `x_max` is doubled before giving up on a classification.
    pub max_doublings: u32,
}

impl OdeOptions {
    pub fn for_instance(inst: &ProblemInstance) -> Self {
        let a = inst.theta0().abs();
        let c_top = inst.unit_costs()[inst.num_activities() - 1];
        Self {
            step: inst.sigma2() / (400.0 * (1.0 + inst.lipschitz_bound())),
            x_max: 4.0 * (inst.p() + c_top) * a / inst.h() + 10.0 * inst.sigma2() / (2.0 * a),
            max_doublings: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeSolution {
    pub beta: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    pub classification: Classification,
    /// First grid point where `v' < 0`.
    pub turn_point: Option<f64>,
    /// `(x, v)` where the solution first entered the `theta_0` branch.
    pub tail_entry: Option<(f64, f64)>,
}

impl OdeSolution {
    /// Cubic Hermite interpolation between grid points.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return self.values[0];
        }
        if x >= self.grid[n - 1] {
            return self.values[n - 1];
        }
        let i = self.grid.partition_point(|&g| g <= x) - 1;
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let hh = x1 - x0;
        let t = (x - x0) / hh;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i]
            + h10 * hh * self.derivatives[i]
            + h01 * self.values[i + 1]
            + h11 * hh * self.derivatives[i + 1]
    }
}

/// RK4 stepper that keeps track of the active branch of `phi`.
struct Stepper<'a> {
    inst: &'a ProblemInstance,
    beta: f64,
    step: f64,
    x: f64,
    v: f64,
    level: usize,
}

impl<'a> Stepper<'a> {
    fn new(inst: &'a ProblemInstance, beta: f64, step: f64) -> Self {
        Self {
            inst,
            beta,
            step,
            x: 0.0,
            v: 0.0,
            level: inst.psi_index(inst.p()),
        }
    }

    fn rk4(&self, level: usize, s: f64) -> f64 {
        let f = |x: f64, v: f64| branch_rhs(self.inst, self.beta, level, x, v);
        let (x, v) = (self.x, self.v);
        let k1 = f(x, v);
        let k2 = f(x + 0.5 * s, v + 0.5 * s * k1);
        let k3 = f(x + 0.5 * s, v + 0.5 * s * k2);
        let k4 = f(x + s, v + s * k3);
        v + s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    /// `[lower, upper]` range of `v` on which the current branch applies.
    fn bounds(&self) -> (f64, f64) {
        let c = self.inst.unit_costs();
        let p = self.inst.p();
        let lower = if self.level == c.len() {
            f64::NEG_INFINITY
        } else {
            p - c[self.level]
        };
        let upper = if self.level == 0 {
            f64::INFINITY
        } else {
            p - c[self.level - 1]
        };
        (lower, upper)
    }

    fn derivative(&self) -> f64 {
        branch_rhs(self.inst, self.beta, self.level, self.x, self.v)
    }

    /// Shortest step length in `(0, s]` that carries `v` onto `level_value`.
    fn land_on(&self, s: f64, level_value: f64) -> f64 {
        let start_side = self.v - level_value;
        let (mut lo, mut hi) = (0.0, s);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (self.rk4(self.level, mid) - level_value) * start_side > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Advance by one step, at most up to `x_end`.
    fn advance(&mut self, x_end: f64) {
        let s = self.step.min(x_end - self.x);
        let next = self.rk4(self.level, s);
        let (lower, upper) = self.bounds();
        if next > upper {
            let s = self.land_on(s, upper);
            self.x += s;
            self.v = upper;
            self.level -= 1;
        } else if next < lower {
            let s = self.land_on(s, lower);
            self.x += s;
            self.v = lower;
            self.level += 1;
        } else {
            self.x += s;
            self.v = next;
        }
    }
}

fn check_beta(inst: &ProblemInstance, beta: f64) -> Result<()> {
    let lower = inst.bracket_lower();
    if beta > lower {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "beta",
            value: beta,
            domain: format!("({lower}, inf)"),
        })
    }
}

/// Integrate `v_beta` over `[0, x_max]`.
pub fn integrate_v(inst: &ProblemInstance, beta: f64, x_max: f64, step: f64) -> Result<OdeSolution> {
    check_beta(inst, beta)?;
    if !(x_max > 0.0 && step > 0.0) {
        return Err(Error::Domain {
            what: "step",
            value: step.min(x_max),
            domain: "x_max > 0 and step > 0".into(),
        });
    }
    // Far from beta* the theta_0 mode grows like exp(2|theta_0| x / sigma2).
    const OVERFLOW_GUARD: f64 = 1e150;

    let mut st = Stepper::new(inst, beta, step);
    let cap = (x_max / step).ceil() as usize + 2 * inst.num_activities() + 2;
    let mut grid = Vec::with_capacity(cap);
    let mut values = Vec::with_capacity(cap);
    let mut derivatives = Vec::with_capacity(cap);
    let mut turn_point = None;
    let mut tail_entry = (st.level == 0).then_some((0.0, 0.0));

    loop {
        let d = st.derivative();
        if turn_point.is_none() && d < 0.0 {
            turn_point = Some(st.x);
        }
        grid.push(st.x);
        values.push(st.v);
        derivatives.push(d);
        if st.x >= x_max {
            break;
        }
        st.advance(x_max);
        if !st.v.is_finite() || st.v.abs() > OVERFLOW_GUARD {
            return Err(Error::BlowUp {
                beta,
                x: st.x,
                v: st.v,
            });
        }
        if tail_entry.is_none() && st.level == 0 {
            tail_entry = Some((st.x, st.v));
        }
    }

    let classification = match (turn_point, tail_entry) {
        (Some(_), _) => Classification::TurnsDecreasing,
        (None, Some((z, vz))) if tail_coefficient(inst, beta, vz, z) >= 0.0 => {
            Classification::Increasing
        }
        (None, Some(_)) => Classification::TurnsDecreasing,
        (None, None) => Classification::Inconclusive,
    };
    Ok(OdeSolution {
        beta,
        grid,
        values,
        derivatives,
        classification,
        turn_point,
        tail_entry,
    })
}

/// Decide whether `v_beta` increases to infinity or turns decreasing.
pub fn classify_beta(inst: &ProblemInstance, beta: f64, x_max: f64, step: f64) -> Result<BetaClass> {
    classify_with(
        inst,
        beta,
        &OdeOptions {
            step,
            x_max,
            ..OdeOptions::for_instance(inst)
        },
    )
}

pub fn classify_with(inst: &ProblemInstance, beta: f64, opts: &OdeOptions) -> Result<BetaClass> {
    check_beta(inst, beta)?;
    let mut st = Stepper::new(inst, beta, opts.step);
    let mut limit = opts.x_max;
    for _ in 0..=opts.max_doublings {
        loop {
            if st.level == 0 {
                return Ok(if tail_coefficient(inst, beta, st.v, st.x) >= 0.0 {
                    BetaClass::Increasing
                } else {
                    BetaClass::TurnsDecreasing
                });
            }
            if st.derivative() < 0.0 {
                return Ok(BetaClass::TurnsDecreasing);
            }
            if st.x >= limit {
                break;
            }
            st.advance(limit);
        }
        limit *= 2.0;
    }
    Err(Error::Inconclusive {
        beta,
        x_max: limit / 2.0,
    })
}

/// Classify every `beta` in `betas`, possibly in parallel.
pub fn classify_many(
    inst: &ProblemInstance,
    betas: &[f64],
    opts: &OdeOptions,
    exec: Execution,
) -> Vec<Result<BetaClass>> {
    exec.map_slice(betas, |&b| classify_with(inst, b, opts))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeBetaStar {
    pub beta_star: f64,
    pub iterations: usize,
    /// Every `beta` that was classified, in order.
    pub probes: Vec<f64>,
}

/// `beta* = inf { beta : v_beta increases to infinity }` by bisection.
pub fn find_beta_star_ode(inst: &ProblemInstance, tol: f64) -> Result<OdeBetaStar> {
    find_beta_star_ode_with(inst, tol, &OdeOptions::for_instance(inst))
}

pub fn find_beta_star_ode_with(inst: &ProblemInstance, tol: f64, opts: &OdeOptions) -> Result<OdeBetaStar> {
    if !(tol > 0.0) {
        return Err(Error::Domain {
            what: "tol",
            value: tol,
            domain: "(0, inf)".into(),
        });
    }
    let upper = inst.bracket_upper();
    let guard = 1e-9_f64.max(1e-9 * upper);
    let mut lo = inst.bracket_lower() + guard;
    let mut hi = upper;
    let mut probes = Vec::new();
    let mut iterations = 0;
    while hi - lo >= tol && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        probes.push(mid);
        match classify_with(inst, mid, opts)? {
            BetaClass::Increasing => hi = mid,
            BetaClass::TurnsDecreasing => lo = mid,
        }
    }
    Ok(OdeBetaStar {
        beta_star: 0.5 * (lo + hi),
        iterations,
        probes,
    })
}

/// Step-doubling estimate of the error of the `step` solution on `[0, x_max]`.
pub fn integration_error_estimate(inst: &ProblemInstance, beta: f64, x_max: f64, step: f64) -> Result<f64> {
    let coarse = integrate_v(inst, beta, x_max, step)?;
    let fine = integrate_v(inst, beta, x_max, 0.5 * step)?;
    let diff = coarse
        .grid
        .iter()
        .zip(&coarse.values)
        .map(|(&x, &v)| (v - fine.value_at(x)).abs())
        .fold(0.0, f64::max);
    Ok(diff * 16.0 / 15.0)
}
