//! Analytic route for the average-cost Bellman equation.
//!
//! On every branch of `phi` the Bellman ODE
//!
//! ```text
//! beta = sigma2/2 v'(x) + h x - phi(p - v(x)),    v(0) = 0
//! ```
//!
//! is linear with constant coefficients, so `v` is glued together from
//! explicit pieces. With `theta` the drift active on a piece starting at
//! `(x_s, v_s)`:
//!
//! ```text
//! theta != 0:  v(x) = C exp(-2 theta (x - x_s) / sigma2) + A - (h / theta) x
//!              A    = (beta + theta p - c(theta)) / theta + h sigma2 / (2 theta^2)
//! theta == 0:  v(x) = v_s + b (x - x_s) - h (x^2 - x_s^2) / sigma2
//!              b    = 2 (beta - c(theta)) / sigma2
//! ```
//!
//! The pieces switch where `v` reaches `p - c_k`, which gives the thresholds
//! `z_k`. On the last branch (drift `theta_0`) the exponential grows, so the
//! sign of its coefficient decides whether `v` blows up or turns decreasing;
//! the optimal cost is the unique `beta` at which that coefficient vanishes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ProblemInstance;

/// Exact form of `v` on one piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PieceKind {
    /// `coef * exp(rate * (x - anchor)) + intercept + slope * x`
    ExponentialAffine {
        coef: f64,
        rate: f64,
        slope: f64,
        intercept: f64,
        /// Point where the exponential is normalized: the piece start when
        /// glued forward, its end when glued backward from the tail.
        anchor: f64,
        /// `v(anchor)`, kept so evaluation can expand around the anchor
        /// instead of cancelling `coef` against `intercept`.
        anchor_value: f64,
    },
    /// `start_value + lin * (x - start) - curv * (x^2 - start^2)`
    Quadratic { start_value: f64, lin: f64, curv: f64 },
}

/// `e^u - sum_{k<n} u^k / k!`, by its series when `u` is small.
fn exp_remainder(u: f64, n: u32) -> f64 {
    if u.abs() >= 1.0 {
        let mut rest = u.exp();
        let mut term = 1.0;
        for k in 0..n {
            if k > 0 {
                term *= u / k as f64;
            }
            rest -= term;
        }
        return rest;
    }
    let mut term = (1..=n).fold(1.0, |t, k| t * u / k as f64);
    let mut sum = term;
    for k in n + 1..n + 40 {
        term *= u / k as f64;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// One branch of the value function, valid on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Piece {
    /// Branch number `k`: drift `theta_{k-1}` applies.
    pub branch: usize,
    pub drift: f64,
    pub start: f64,
    pub end: f64,
    pub kind: PieceKind,
}

impl Piece {
    /// Piece on ladder `level` through `(start, start_value)`.
    fn new(inst: &ProblemInstance, beta: f64, level: usize, start: f64, start_value: f64) -> Self {
        Self::through(inst, beta, level, start, start_value, start)
    }

    /// Piece on ladder `level` through `(anchor, anchor_value)`, valid from `start`.
    fn through(inst: &ProblemInstance, beta: f64, level: usize, anchor: f64, anchor_value: f64, start: f64) -> Self {
        let theta = inst.theta(level);
        let cost = inst.ladder_costs()[level];
        let (s2, h, p) = (inst.sigma2(), inst.h(), inst.p());
        let kind = if theta == 0.0 {
            debug_assert_eq!(anchor, start);
            PieceKind::Quadratic {
                start_value: anchor_value,
                lin: 2.0 * (beta - cost) / s2,
                curv: h / s2,
            }
        } else {
            let intercept = (beta + theta * p - cost) / theta + h * s2 / (2.0 * theta * theta);
            let slope = -h / theta;
            PieceKind::ExponentialAffine {
                coef: anchor_value - intercept - slope * anchor,
                rate: -2.0 * theta / s2,
                slope,
                intercept,
                anchor,
                anchor_value,
            }
        };
        Self {
            branch: level + 1,
            drift: theta,
            start,
            end: f64::INFINITY,
            kind,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.kind {
            PieceKind::ExponentialAffine {
                coef,
                rate,
                slope,
                intercept,
                anchor,
                anchor_value,
            } => {
                if coef == 0.0 {
                    return intercept + slope * x;
                }
                let d = x - anchor;
                anchor_value + coef * exp_remainder(rate * d, 2) + (coef * rate + slope) * d
            }
            PieceKind::Quadratic {
                start_value,
                lin,
                curv,
            } => start_value + lin * (x - self.start) - curv * (x * x - self.start * self.start),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            PieceKind::ExponentialAffine {
                coef,
                rate,
                slope,
                anchor,
                ..
            } => {
                if coef == 0.0 {
                    return slope;
                }
                (coef * rate + slope) + coef * rate * (rate * (x - anchor)).exp_m1()
            }
            PieceKind::Quadratic { lin, curv, .. } => lin - 2.0 * curv * x,
        }
    }

    /// `int_{start}^{x} v(s) ds`
    pub fn integral(&self, x: f64) -> f64 {
        let d = x - self.start;
        let sq = x * x - self.start * self.start;
        match self.kind {
            PieceKind::ExponentialAffine {
                coef,
                rate,
                slope,
                intercept,
                anchor,
                anchor_value,
            } => {
                if coef == 0.0 {
                    return intercept * d + 0.5 * slope * sq;
                }
                // antiderivative vanishing at the anchor
                let from_anchor = |y: f64| {
                    let e = y - anchor;
                    anchor_value * e + coef * exp_remainder(rate * e, 3) / rate + 0.5 * (coef * rate + slope) * e * e
                };
                if anchor == self.start {
                    from_anchor(x)
                } else {
                    from_anchor(x) - from_anchor(self.start)
                }
            }
            PieceKind::Quadratic {
                start_value,
                lin,
                curv,
            } => {
                let cube = x * x * x - self.start.powi(3);
                start_value * d + 0.5 * lin * d * d - curv * (cube / 3.0 - self.start * self.start * d)
            }
        }
    }

    /// First `x >= start` with `v'(x) = 0`, if any. `v'` is monotone on a
    /// piece, so there is at most one.
    fn turn_point(&self) -> Option<f64> {
        if self.derivative(self.start) <= 0.0 {
            return Some(self.start);
        }
        match self.kind {
            PieceKind::ExponentialAffine {
                coef,
                rate,
                slope,
                anchor,
                ..
            } => {
                if coef == 0.0 {
                    return None;
                }
                // rate * coef * exp(rate (x - anchor)) = -slope
                let ratio = -slope / (rate * coef);
                if ratio <= 0.0 {
                    return None;
                }
                let x = anchor + ratio.ln() / rate;
                (x > self.start).then_some(x)
            }
            PieceKind::Quadratic { lin, curv, .. } => Some(lin / (2.0 * curv)),
        }
    }
}

/// Piecewise value function `v` on `[0, inf)`, pieces ordered by `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueFunction {
    pub beta: f64,
    pub pieces: Vec<Piece>,
    /// `z_1..z_K` (index `k-1` holds `z_k`); non-increasing in `k`.
    pub thresholds: Vec<f64>,
    /// `int_0^{start}` of `v` for every piece.
    prefix_integrals: Vec<f64>,
}

impl ValueFunction {
    fn piece_index(&self, x: f64) -> usize {
        self.pieces
            .partition_point(|pc| pc.start <= x)
            .saturating_sub(1)
    }

    pub fn piece_at(&self, x: f64) -> &Piece {
        &self.pieces[self.piece_index(x)]
    }

    pub fn value(&self, x: f64) -> f64 {
        self.piece_at(x).value(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.piece_at(x).derivative(x)
    }

    /// `int_0^x v(s) ds`
    pub fn integral(&self, x: f64) -> f64 {
        let i = self.piece_index(x);
        self.prefix_integrals[i] + self.pieces[i].integral(x)
    }

    /// The final (drift `theta_0`) piece.
    pub fn tail(&self) -> &Piece {
        self.pieces.last().expect("value function has at least one piece")
    }

    /// Largest threshold `z_1`, which is where the tail piece begins.
    pub fn z1(&self) -> f64 {
        self.tail().start
    }

    fn finish(mut pieces: Vec<Piece>, thresholds: Vec<f64>, beta: f64) -> Self {
        for i in 1..pieces.len() {
            pieces[i - 1].end = pieces[i].start;
        }
        let mut prefix_integrals = Vec::with_capacity(pieces.len());
        let mut acc = 0.0;
        for pc in &pieces {
            prefix_integrals.push(acc);
            if pc.end.is_finite() {
                acc += pc.integral(pc.end);
            }
        }
        Self {
            beta,
            pieces,
            thresholds,
            prefix_integrals,
        }
    }
}

/// Result of gluing pieces at a trial `beta`.
#[derive(Debug, Clone, PartialEq)]
pub enum BuildOutcome {
    /// `v` increases through every threshold. `tail_coefficient` is the
    /// exponential coefficient of the last piece (signed).
    Complete {
        value_function: ValueFunction,
        tail_coefficient: f64,
    },
    /// `v'` reaches zero on branch `branch` at `x_turn`.
    TurnsDecreasing { branch: usize, x_turn: f64 },
}

/// Exponential coefficient of the final branch entered at `(z1, v_entry)`.
///
/// Positive: `v` grows exponentially (beta is too large). Negative: `v`
/// eventually decreases (beta is too small). Zero: `v` is the linear tail.
pub fn tail_coefficient(inst: &ProblemInstance, beta: f64, v_entry: f64, z1: f64) -> f64 {
    let t0 = inst.theta0();
    let (h, s2, p) = (inst.h(), inst.sigma2(), inst.p());
    v_entry - (beta / t0 + p) + (h / t0) * z1 - h * s2 / (2.0 * t0 * t0)
}

/// Smallest `x` in `[start, limit]` with `piece.value(x) >= level`, given
/// that the piece is increasing there and starts below `level`.
///
/// Bisects down to adjacent floats. Stopping at a tolerance in `v` is not
/// enough: the error in `z_k` seeds the next piece's exponential, which a
/// negative-drift branch amplifies by `exp(2|theta| (z_{k-1} - z_k) / sigma2)`.
fn bisect_level(piece: &Piece, level: f64, limit: Option<f64>, scale: f64) -> Option<f64> {
    let mut lo = piece.start;
    let mut hi = match limit {
        Some(hi) => hi,
        None => {
            let mut width = scale;
            let mut hi = lo + width;
            let mut tries = 0;
            while piece.value(hi) < level {
                lo = hi;
                width *= 2.0;
                hi = piece.start + width;
                tries += 1;
                if tries > 2000 {
                    return None;
                }
            }
            hi
        }
    };
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if piece.value(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Glue the pieces of `v_beta` from `x = 0` outward.
pub fn build_value_function(inst: &ProblemInstance, beta: f64) -> Result<BuildOutcome> {
    glue(inst, beta, true)
}

fn glue(inst: &ProblemInstance, beta: f64, stop_on_negative_tail: bool) -> Result<BuildOutcome> {
    let lower = inst.bracket_lower();
    if !(beta > lower) {
        return Err(Error::Domain {
            what: "beta",
            value: beta,
            domain: format!("({lower}, inf)"),
        });
    }
    let k_total = inst.num_activities();
    let c = inst.unit_costs();
    let p = inst.p();

    // Branches whose level p - c_k is not positive are never entered.
    let first = inst.psi_index(p);
    let mut thresholds = vec![0.0; k_total];
    let mut pieces = Vec::with_capacity(first + 1);
    let (mut x, mut v) = (0.0, 0.0);

    for level in (1..=first).rev() {
        let piece = Piece::new(inst, beta, level, x, v);
        let target = p - c[level - 1];
        let turn = piece.turn_point();
        if let Some(xt) = turn {
            if piece.value(xt) < target {
                return Ok(BuildOutcome::TurnsDecreasing {
                    branch: level + 1,
                    x_turn: xt,
                });
            }
        }
        let scale = inst.sigma2() / (2.0 * piece.drift.abs().max(inst.theta0().abs()));
        let z = bisect_level(&piece, target, turn, scale).ok_or(Error::Inconclusive {
            beta,
            x_max: f64::INFINITY,
        })?;
        thresholds[level - 1] = z;
        pieces.push(piece);
        x = z;
        v = target;
    }

    let tail = Piece::new(inst, beta, 0, x, v);
    let coef = tail_coefficient(inst, beta, v, x);
    if coef < 0.0 && stop_on_negative_tail {
        let x_turn = tail.turn_point().unwrap_or(x);
        return Ok(BuildOutcome::TurnsDecreasing { branch: 1, x_turn });
    }
    pieces.push(tail);
    Ok(BuildOutcome::Complete {
        value_function: ValueFunction::finish(pieces, thresholds, beta),
        tail_coefficient: coef,
    })
}

/// How `beta*` was pinned down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Shooting {
    /// Glue from `x = 0` outward and zero the tail coefficient.
    Forward,
    /// Glue the nonnegative-drift branches forward from `x = 0` and the
    /// negative-drift branches backward from the linear tail, and match
    /// where they meet. Used when forward errors grow past double precision.
    TwoSided,
}

/// Largest `max_bellman_residual / beta*` accepted from [`Shooting::TwoSided`].
const TWO_SIDED_RESIDUAL: f64 = 1e-7;

/// Bisection settings for [`find_beta_star_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Absolute tolerance on the bracket width for `beta`.
    pub beta_tol: f64,
    /// Tolerance on `|C| / (p + c_K)` at the accepted `beta`.
    pub tail_tol: f64,
    pub max_iterations: usize,
}

impl SolverOptions {
    pub fn for_instance(inst: &ProblemInstance) -> Self {
        Self {
            beta_tol: 1e-9 * inst.bracket_upper(),
            tail_tol: 1e-9,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub beta_star: f64,
    /// `-inf phi`, `None` when `phi` is unbounded below.
    pub beta_lower: Option<f64>,
    /// Open lower end of the bisection bracket, see
    /// [`ProblemInstance::bracket_lower`].
    pub bracket_lower: f64,
    pub bracket_upper: f64,
    pub value_function: ValueFunction,
    /// `z_1..z_K`
    pub thresholds: Vec<f64>,
    /// Tail coefficient at `beta_star` before it was zeroed, or for
    /// [`Shooting::TwoSided`] the jump in `v` where the two sweeps meet.
    pub tail_coefficient_residual: f64,
    pub method: Shooting,
    pub max_bellman_residual: f64,
    pub iterations: usize,
    /// Every `beta` the bisection evaluated, in order.
    pub probes: Vec<f64>,
}

impl SolveResult {
    pub fn v_eval(&self, x: f64) -> f64 {
        self.value_function.value(x)
    }

    pub fn v_derivative(&self, x: f64) -> f64 {
        self.value_function.derivative(x)
    }

    /// Relative value `f(z) = int_0^z v - p z`.
    pub fn f_eval(&self, inst: &ProblemInstance, z: f64) -> f64 {
        self.value_function.integral(z) - inst.p() * z
    }

    /// Threshold lookup: `theta_{k-1}` on `[z_k, z_{k-1})` with
    /// `z_{K+1} = 0` and `z_0 = inf`.
    pub fn policy_eval(&self, inst: &ProblemInstance, z: f64) -> f64 {
        let passed = self.thresholds.iter().filter(|&&zk| zk <= z).count();
        inst.theta(self.thresholds.len() - passed)
    }

    /// `beta* - [sigma2/2 v'(z) + h z - phi(p - v(z))]`
    pub fn bellman_residual(&self, inst: &ProblemInstance, z: f64) -> f64 {
        let v = self.v_eval(z);
        let dv = self.v_derivative(z);
        self.beta_star - (0.5 * inst.sigma2() * dv + inst.h() * z - inst.phi(inst.p() - v))
    }

    /// Right end of the default diagnostic grid: `2 z_1`, or a few
    /// relaxation lengths when every threshold is zero.
    pub fn diagnostic_span(&self, inst: &ProblemInstance) -> f64 {
        let z1 = self.value_function.z1();
        if z1 > 0.0 {
            2.0 * z1
        } else {
            5.0 * inst.sigma2() / (2.0 * inst.theta0().abs())
        }
    }

    /// Largest `|bellman_residual|` over `n` evenly spaced points of `[0, span]`.
    pub fn max_residual_on(&self, inst: &ProblemInstance, span: f64, n: usize) -> f64 {
        (0..n)
            .map(|i| span * i as f64 / (n - 1).max(1) as f64)
            .map(|z| self.bellman_residual(inst, z).abs())
            .fold(0.0, f64::max)
    }
}

/// Optimal long-run average cost and the value function, with default options.
pub fn find_beta_star(inst: &ProblemInstance, beta_tol: f64) -> Result<SolveResult> {
    let opts = SolverOptions {
        beta_tol,
        ..SolverOptions::for_instance(inst)
    };
    find_beta_star_with(inst, &opts)
}

pub fn find_beta_star_with(inst: &ProblemInstance, opts: &SolverOptions) -> Result<SolveResult> {
    if !(opts.beta_tol > 0.0) {
        return Err(Error::Domain {
            what: "beta_tol",
            value: opts.beta_tol,
            domain: "(0, inf)".into(),
        });
    }
    let beta_lower = inst.beta_lower().ok();
    let bracket_lower = inst.bracket_lower();
    let upper = inst.bracket_upper();
    let tail_scale = inst.p() + inst.unit_costs()[inst.num_activities() - 1];

    // Promotion never pays: v stays in the theta_0 branch from the start.
    // C(upper) is zero analytically; rounding may leave it just below zero.
    if inst.p() <= inst.unit_costs()[0] {
        let (vf, coef) = expect_complete(glue(inst, upper, false)?);
        return Ok(finalize(
            inst,
            vf,
            coef,
            Shooting::Forward,
            beta_lower,
            bracket_lower,
            upper,
            0,
            vec![upper],
        ));
    }

    let guard = 1e-9_f64.max(1e-9 * upper);
    let mut lo = bracket_lower + guard;
    let mut hi = upper;
    let mut probes = vec![hi];
    match build_value_function(inst, hi)? {
        BuildOutcome::Complete {
            tail_coefficient, ..
        } if tail_coefficient >= -opts.tail_tol * tail_scale => {}
        _ => return Err(Error::Bracket { beta: hi }),
    }

    let mut iterations = 0;
    let mut hi_coef = f64::INFINITY;
    while iterations < opts.max_iterations {
        if hi - lo < opts.beta_tol && hi_coef.abs() <= opts.tail_tol * tail_scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        probes.push(mid);
        match build_value_function(inst, mid)? {
            BuildOutcome::Complete {
                tail_coefficient, ..
            } => {
                hi = mid;
                hi_coef = tail_coefficient;
            }
            BuildOutcome::TurnsDecreasing { .. } => lo = mid,
        }
    }

    // Polish: C is smooth across the final bracket, so one secant step on it
    // usually lands much closer to C = 0 than the midpoint. Keep whichever
    // candidate has the smallest |C|; every candidate lies in [lo, hi].
    // `lo` may turn decreasing before the tail; such candidates are skipped.
    let complete = |beta: f64| -> Result<Option<(ValueFunction, f64)>> {
        Ok(match glue(inst, beta, false)? {
            outcome @ BuildOutcome::Complete { .. } => Some(expect_complete(outcome)),
            BuildOutcome::TurnsDecreasing { .. } => None,
        })
    };
    let mut best = expect_complete(glue(inst, hi, false)?);
    let c_hi = best.1;
    let mut candidates = vec![0.5 * (lo + hi)];
    if let Some(at_lo) = complete(lo)? {
        let c_lo = at_lo.1;
        if c_hi != c_lo {
            let secant = lo + (hi - lo) * (-c_lo / (c_hi - c_lo));
            if secant > lo && secant < hi {
                candidates.push(secant);
            }
        }
        if c_lo.abs() < best.1.abs() {
            best = at_lo;
        }
    }
    for beta in candidates {
        probes.push(beta);
        if let Some(candidate) = complete(beta)? {
            if candidate.1.abs() < best.1.abs() {
                best = candidate;
            }
        }
    }
    let (vf, coef) = best;
    let tolerance = opts.tail_tol * tail_scale;
    if coef.abs() <= tolerance {
        return Ok(finalize(
            inst,
            vf,
            coef,
            Shooting::Forward,
            beta_lower,
            bracket_lower,
            upper,
            iterations,
            probes,
        ));
    }
    // Forward errors outgrew double precision on a negative-drift branch.
    let two_sided = solve_two_sided(inst, opts, guard, iterations, probes)?;
    if two_sided.max_bellman_residual <= TWO_SIDED_RESIDUAL * two_sided.beta_star {
        Ok(two_sided)
    } else {
        Err(Error::IllConditioned {
            beta: vf.beta,
            tail_coefficient: coef,
            tolerance,
        })
    }
}

/// One evaluation of the two-sided match at a fixed `beta`.
struct Sweeps {
    /// Forward crossing of the junction level minus the backward one.
    mismatch: f64,
    forward: Vec<Piece>,
    /// Left to right; the last one is the tail.
    backward: Vec<Piece>,
    thresholds: Vec<f64>,
    junction: f64,
}

/// Largest `x <= anchor` with `piece.value(x) <= level`, for a piece that
/// increases on `(-inf, anchor]`.
fn bisect_level_left(piece: &Piece, level: f64, anchor: f64, scale: f64) -> Option<f64> {
    let mut hi = anchor;
    let mut width = scale;
    let mut lo = anchor - width;
    let mut tries = 0;
    while piece.value(lo) > level {
        hi = lo;
        width *= 2.0;
        lo = anchor - width;
        tries += 1;
        if tries > 2000 {
            return None;
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if piece.value(mid) <= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// `None` when the forward sweep turns decreasing (`beta` too small).
fn sweeps(inst: &ProblemInstance, beta: f64) -> Result<Option<Sweeps>> {
    let c = inst.unit_costs();
    let p = inst.p();
    let first = inst.psi_index(p);
    let split = inst.j_star().min(first);
    let mut thresholds = vec![0.0; inst.num_activities()];
    let relax = |drift: f64| inst.sigma2() / (2.0 * drift.abs().max(inst.theta0().abs()));

    // Backward: linear tail through (z_1, p - c_1), then down the
    // negative-drift branches.
    let mut tail = Piece::new(inst, beta, 0, 0.0, 0.0);
    let (intercept, slope) = match tail.kind {
        PieceKind::ExponentialAffine { intercept, slope, .. } => (intercept, slope),
        PieceKind::Quadratic { .. } => unreachable!("theta_0 < 0"),
    };
    let z1 = (p - c[0] - intercept) / slope;
    tail.start = z1;
    tail.kind = PieceKind::ExponentialAffine {
        coef: 0.0,
        rate: -2.0 * inst.theta0() / inst.sigma2(),
        slope,
        intercept,
        anchor: z1,
        anchor_value: p - c[0],
    };
    thresholds[0] = z1;
    let mut backward = vec![tail];
    let (mut x, mut v) = (z1, p - c[0]);
    for level in 1..=split {
        let mut piece = Piece::through(inst, beta, level, x, v, x);
        let target = if level == first { 0.0 } else { p - c[level] };
        let left = bisect_level_left(&piece, target, x, relax(piece.drift)).ok_or(Error::Inconclusive {
            beta,
            x_max: f64::NEG_INFINITY,
        })?;
        piece.start = left;
        if level < first {
            thresholds[level] = left;
        }
        backward.push(piece);
        x = left;
        v = target;
    }
    backward.reverse();
    let backward_end = x;

    // Forward: from (0, 0) up the nonnegative-drift branches.
    let mut forward = Vec::new();
    let (mut xf, mut vf) = (0.0, 0.0);
    for level in (split + 1..=first).rev() {
        let piece = Piece::new(inst, beta, level, xf, vf);
        let target = p - c[level - 1];
        let turn = piece.turn_point();
        if let Some(xt) = turn {
            if piece.value(xt) < target {
                return Ok(None);
            }
        }
        let z = bisect_level(&piece, target, turn, relax(piece.drift)).ok_or(Error::Inconclusive {
            beta,
            x_max: f64::INFINITY,
        })?;
        thresholds[level - 1] = z;
        forward.push(piece);
        xf = z;
        vf = target;
    }
    Ok(Some(Sweeps {
        mismatch: xf - backward_end,
        forward,
        backward,
        thresholds,
        junction: xf,
    }))
}

impl Sweeps {
    /// Join at the forward crossing; returns the value jump there.
    fn into_value_function(self, beta: f64) -> (ValueFunction, f64) {
        let Sweeps {
            forward,
            mut backward,
            thresholds,
            junction,
            ..
        } = self;
        let below = backward[0].value(junction);
        let level = forward.last().map_or(0.0, |pc| pc.value(pc.end.min(junction)));
        let jump = below - level;
        backward[0].start = junction;
        let mut pieces = forward;
        pieces.extend(backward);
        (ValueFunction::finish(pieces, thresholds, beta), jump)
    }
}

fn solve_two_sided(
    inst: &ProblemInstance,
    opts: &SolverOptions,
    guard: f64,
    iterations_so_far: usize,
    mut probes: Vec<f64>,
) -> Result<SolveResult> {
    let bracket_lower = inst.bracket_lower();
    let upper = inst.bracket_upper();
    let mut lo = bracket_lower + guard;
    let mut hi = upper;
    // mismatch decreases in beta: positive (or no forward crossing) below beta*
    let above = |m: &Option<Sweeps>| m.as_ref().is_some_and(|s| s.mismatch <= 0.0);
    if !above(&sweeps(inst, hi)?) {
        return Err(Error::Bracket { beta: hi });
    }
    let mut iterations = iterations_so_far;
    for _ in 0..opts.max_iterations {
        if hi - lo < opts.beta_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        probes.push(mid);
        if above(&sweeps(inst, mid)?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // secant polish on the mismatch, as in the forward route
    let at_hi = sweeps(inst, hi)?.expect("hi is above beta*");
    let mut candidates = vec![0.5 * (lo + hi)];
    if let Some(at_lo) = sweeps(inst, lo)? {
        if at_lo.mismatch != at_hi.mismatch {
            let t = at_lo.mismatch / (at_lo.mismatch - at_hi.mismatch);
            candidates.push(lo + (hi - lo) * t);
        }
    }
    let mut best = (hi, at_hi);
    for beta in candidates {
        if !(beta > lo && beta < hi) {
            continue;
        }
        probes.push(beta);
        if let Some(sw) = sweeps(inst, beta)? {
            if sw.mismatch.abs() < best.1.mismatch.abs() {
                best = (beta, sw);
            }
        }
    }
    let (beta, sw) = best;
    let (vf, jump) = sw.into_value_function(beta);
    Ok(finalize(
        inst,
        vf,
        jump,
        Shooting::TwoSided,
        inst.beta_lower().ok(),
        bracket_lower,
        upper,
        iterations,
        probes,
    ))
}

fn expect_complete(outcome: BuildOutcome) -> (ValueFunction, f64) {
    match outcome {
        BuildOutcome::Complete {
            value_function,
            tail_coefficient,
        } => (value_function, tail_coefficient),
        BuildOutcome::TurnsDecreasing { branch, x_turn } => {
            unreachable!("branch {branch} turned at {x_turn} after passing the bracket check")
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finalize(
    inst: &ProblemInstance,
    mut vf: ValueFunction,
    coef: f64,
    method: Shooting,
    beta_lower: Option<f64>,
    bracket_lower: f64,
    bracket_upper: f64,
    iterations: usize,
    probes: Vec<f64>,
) -> SolveResult {
    // Linear tail: zero the growing exponential.
    if let Some(tail) = vf.pieces.last_mut() {
        if let PieceKind::ExponentialAffine { ref mut coef, .. } = tail.kind {
            *coef = 0.0;
        }
    }
    let thresholds = vf.thresholds.clone();
    let beta_star = vf.beta;
    let mut result = SolveResult {
        beta_star,
        beta_lower,
        bracket_lower,
        bracket_upper,
        value_function: vf,
        thresholds,
        tail_coefficient_residual: coef,
        method,
        max_bellman_residual: 0.0,
        iterations,
        probes,
    };
    let span = result.diagnostic_span(inst);
    result.max_bellman_residual = result.max_residual_on(inst, span, 10_000);
    result
}
