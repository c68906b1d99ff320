//! Problem primitives: the drift ladder, the piecewise-linear activation cost
//! `c(x)`, its convex conjugate `phi(y) = max_x { y x - c(x) }` and the
//! smallest maximizer `psi(y)`.
//!
//! The ladder is always derived from `(theta0, mu)`:
//!
//! ```text
//! theta_k = theta0 + mu_1 + ... + mu_k,       k = 0..K
//! c(x)    = c(theta_{k-1}) + c_k (x - theta_{k-1}),   theta_{k-1} < x <= theta_k
//! psi(y)  = theta_j,  j = #{ k : c_k < y }
//! phi(y)  = theta_j y - c(theta_j)
//! ```
//!
//! Interval membership is left-open, right-closed and uses exact comparisons
//! on the user-supplied breakpoints.

use serde::Serialize;

use crate::error::{Error, Result};

/// Immutable model instance with its derived drift ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemInstance {
    theta0: f64,
    mu: Vec<f64>,
    c: Vec<f64>,
    sigma2: f64,
    h: f64,
    p: f64,
    /// `theta_0..=theta_K`
    ladder: Vec<f64>,
    /// `c(theta_0)..=c(theta_K)`
    ladder_cost: Vec<f64>,
    j_star: usize,
}

fn check(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg.into()))
    }
}

impl ProblemInstance {
    pub fn new(theta0: f64, mu: Vec<f64>, c: Vec<f64>, sigma2: f64, h: f64, p: f64) -> Result<Self> {
        check(!mu.is_empty(), "at least one activity is required")?;
        check(
            mu.len() == c.len(),
            format!("mu has {} entries but c has {}", mu.len(), c.len()),
        )?;
        let finite = [theta0, sigma2, h, p]
            .iter()
            .chain(mu.iter())
            .chain(c.iter())
            .all(|x| x.is_finite());
        check(finite, "all parameters must be finite")?;
        check(theta0 < 0.0, format!("theta0 must be < 0 (got {theta0})"))?;
        check(mu.iter().all(|&m| m > 0.0), "every mu_k must be > 0")?;
        check(c[0] > 0.0, "c_1 must be > 0")?;
        check(c.windows(2).all(|w| w[0] < w[1]), "c not strictly increasing")?;
        check(sigma2 > 0.0, "sigma2 must be > 0")?;
        check(h > 0.0, "h must be > 0")?;
        check(p > 0.0, "p must be > 0")?;

        let mut ladder = Vec::with_capacity(mu.len() + 1);
        let mut ladder_cost = Vec::with_capacity(mu.len() + 1);
        ladder.push(theta0);
        ladder_cost.push(0.0);
        for (k, (&m, &ck)) in mu.iter().zip(&c).enumerate() {
            ladder.push(ladder[k] + m);
            ladder_cost.push(ladder_cost[k] + ck * m);
        }
        check(
            ladder.windows(2).all(|w| w[0] < w[1]),
            "drift ladder is not strictly increasing (mu_k lost to rounding)",
        )?;
        let j_star = ladder.iter().rposition(|&t| t < 0.0).unwrap_or(0);

        Ok(Self {
            theta0,
            mu,
            c,
            sigma2,
            h,
            p,
            ladder,
            ladder_cost,
            j_star,
        })
    }

    /// Number of promotion activities `K`.
    pub fn num_activities(&self) -> usize {
        self.mu.len()
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Unit cost rates `c_1..c_K`.
    pub fn unit_costs(&self) -> &[f64] {
        &self.c
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Drift ladder `theta_0..=theta_K`.
    pub fn ladder(&self) -> &[f64] {
        &self.ladder
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.ladder[k]
    }

    /// `c(theta_k)` for every rung.
    pub fn ladder_costs(&self) -> &[f64] {
        &self.ladder_cost
    }

    pub fn theta_top(&self) -> f64 {
        self.ladder[self.mu.len()]
    }

    /// Largest index whose drift is still negative.
    pub fn j_star(&self) -> usize {
        self.j_star
    }

    /// Upper end of the bracket for the optimal cost: the cost of never
    /// promoting, `p|theta0| + h sigma2 / (2|theta0|)`.
    pub fn bracket_upper(&self) -> f64 {
        let a = self.theta0.abs();
        self.p * a + self.h * self.sigma2 / (2.0 * a)
    }

    fn domain_tol(&self) -> f64 {
        1e-12 * self.lipschitz_bound().max(1.0)
    }

    fn check_drift(&self, x: f64) -> Result<f64> {
        let (lo, hi) = (self.theta0, self.theta_top());
        let tol = self.domain_tol();
        if !(x >= lo - tol && x <= hi + tol) {
            return Err(Error::Domain {
                what: "drift",
                value: x,
                domain: format!("[{lo}, {hi}]"),
            });
        }
        Ok(x.clamp(lo, hi))
    }

    /// Activation cost rate `c(x)` of running at drift `x`.
    pub fn cost_c(&self, x: f64) -> Result<f64> {
        let x = self.check_drift(x)?;
        Ok(self.cost_in_domain(x))
    }

    /// `c(x)` for `x` already known to lie in `[theta_0, theta_K]`.
    pub(crate) fn cost_in_domain(&self, x: f64) -> f64 {
        if x <= self.theta0 {
            return 0.0;
        }
        // first k >= 1 with x <= theta_k
        let k = self.ladder[1..].partition_point(|&t| t < x) + 1;
        let k = k.min(self.mu.len());
        self.ladder_cost[k - 1] + self.c[k - 1] * (x - self.ladder[k - 1])
    }

    /// Ladder index selected by `psi(y)`: the number of unit costs strictly below `y`.
    pub fn psi_index(&self, y: f64) -> usize {
        self.c.partition_point(|&ck| ck < y)
    }

    /// Smallest maximizer of `y x - c(x)` over the drift set.
    pub fn psi(&self, y: f64) -> f64 {
        self.ladder[self.psi_index(y)]
    }

    /// Convex conjugate `phi(y) = max_x { y x - c(x) }`.
    pub fn phi(&self, y: f64) -> f64 {
        let j = self.psi_index(y);
        self.ladder[j] * y - self.ladder_cost[j]
    }

    pub fn conjugate(&self) -> Result<ConjugatePair> {
        Ok(ConjugatePair {
            breakpoints_y: self.c.clone(),
            levels: self.ladder.clone(),
            phi_at_kinks: self.c.iter().map(|&ck| self.phi(ck)).collect(),
            beta_lower: self.beta_lower()?,
        })
    }

    /// `-inf_y phi(y)`.
    ///
    /// `phi` is convex and piecewise linear with slope `theta_0 < 0` on the left
    /// tail, so the infimum is attained at a kink unless the right tail keeps
    /// decreasing (`theta_K < 0`), in which case it is `-inf`.
    pub fn beta_lower(&self) -> Result<f64> {
        let top = self.theta_top();
        if top < 0.0 {
            return Err(Error::Unbounded { theta_top: top });
        }
        let min = self
            .c
            .iter()
            .map(|&ck| self.phi(ck))
            .fold(0.0_f64, f64::min);
        Ok(-min)
    }

    /// `-inf { phi(y) : y <= p }`, the open lower end of the `beta*` bracket.
    ///
    /// Along the optimal value function `p - v(x)` sweeps `(-inf, p]` with
    /// `v' > 0`, so the Bellman equation forces `beta* > -phi(y)` for every
    /// `y <= p`. Equals [`beta_lower`](Self::beta_lower) when `p > c_K` and
    /// `theta_K >= 0`; stays finite when `theta_K < 0`.
    pub fn bracket_lower(&self) -> f64 {
        let p = self.p;
        let min = self
            .c
            .iter()
            .filter(|&&ck| ck <= p)
            .map(|&ck| self.phi(ck))
            .fold(self.phi(p).min(0.0), f64::min);
        -min
    }

    /// Lipschitz constant of `phi`: `max_k |theta_k|`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.ladder.iter().fold(0.0_f64, |m, t| m.max(t.abs()))
    }

    /// Cheapest activation vector realizing drift `x`, filling activities in
    /// index order.
    pub fn theta_to_delta(&self, x: f64) -> Result<ControlVector> {
        let x = self.check_drift(x)?;
        let mut used = 0.0;
        let lift = x - self.theta0;
        let delta = self
            .mu
            .iter()
            .map(|&m| {
                let d = (((lift - used).max(0.0)) / m).min(1.0);
                used += m;
                d
            })
            .collect();
        Ok(ControlVector(delta))
    }

    /// `sum_k c_k mu_k delta_k`.
    pub fn delta_cost(&self, delta: &ControlVector) -> f64 {
        delta
            .0
            .iter()
            .zip(self.mu.iter().zip(&self.c))
            .map(|(d, (m, c))| c * m * d)
            .sum()
    }

    /// Drift produced by an activation vector.
    pub fn delta_drift(&self, delta: &ControlVector) -> f64 {
        self.theta0 + delta.0.iter().zip(&self.mu).map(|(d, m)| d * m).sum::<f64>()
    }

    /// Copy of the instance with `h`, `p` and every `c_k` multiplied by `factor`.
    pub fn scale_costs(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.theta0,
            self.mu.clone(),
            self.c.iter().map(|c| c * factor).collect(),
            self.sigma2,
            self.h * factor,
            self.p * factor,
        )
    }
}

/// Activation levels `delta_k` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector(Vec<f64>);

impl ControlVector {
    pub fn new(delta: Vec<f64>) -> Result<Self> {
        if let Some(d) = delta.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::Validation(format!(
                "activation level {d} is outside [0, 1]"
            )));
        }
        Ok(Self(delta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Tabulated conjugate pair: kinks of `psi`/`phi`, the drift levels taken by
/// `psi`, `phi` at each kink and the lower cost bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugatePair {
    pub breakpoints_y: Vec<f64>,
    pub levels: Vec<f64>,
    pub phi_at_kinks: Vec<f64>,
    pub beta_lower: f64,
}
