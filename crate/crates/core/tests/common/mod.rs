//! Shared instance sets for the integration tests.
#![allow(dead_code)]

use driftctl::closedform::{build_value_function, BuildOutcome, ValueFunction};
use driftctl::{find_beta_star, ProblemInstance, SolveResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RANDOM_SET_SEED: u64 = 0x5eed_2024;
pub const RANDOM_SET_SIZE: usize = 25;

pub fn reference() -> ProblemInstance {
    driftctl::reference_instance()
}

/// `K` in `1..=5`, `theta_0 < 0 <= theta_K`, `p > c_K`.
pub fn random_instance(rng: &mut impl Rng) -> ProblemInstance {
    let k = rng.random_range(1..=5);
    let theta0 = -rng.random_range(0.5..3.0);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.5)).collect();
    let total = -theta0 + rng.random_range(0.0..2.0);
    let scale = total / raw.iter().sum::<f64>();
    let mu = raw.iter().map(|m| m * scale).collect();
    let mut c = Vec::with_capacity(k);
    let mut ck = rng.random_range(1.0..10.0);
    for _ in 0..k {
        c.push(ck);
        ck += rng.random_range(0.5..10.0);
    }
    let p = c[k - 1] * rng.random_range(1.2..3.0);
    ProblemInstance::new(
        theta0,
        mu,
        c,
        rng.random_range(0.5..5.0),
        rng.random_range(0.5..5.0),
        p,
    )
    .expect("generated instance is valid")
}

/// Random instance whose first promotion lands exactly on drift zero.
pub fn zero_drift_instance(rng: &mut impl Rng) -> ProblemInstance {
    loop {
        let base = random_instance(rng);
        if base.num_activities() < 2 {
            continue;
        }
        let mut mu = base.mu().to_vec();
        mu[0] = -base.theta0();
        return ProblemInstance::new(
            base.theta0(),
            mu,
            base.unit_costs().to_vec(),
            base.sigma2(),
            base.h(),
            base.p(),
        )
        .expect("valid");
    }
}

/// 25 randomized instances; the first two have a rung at drift exactly zero.
pub fn random_set() -> Vec<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_SET_SEED);
    let mut out = vec![
        ProblemInstance::new(-1.0, vec![1.0, 1.5], vec![3.0, 9.0], 2.0, 1.5, 20.0).unwrap(),
        zero_drift_instance(&mut rng),
    ];
    while out.len() < RANDOM_SET_SIZE {
        out.push(random_instance(&mut rng));
    }
    out
}

/// Reference instance followed by the random set.
pub fn all_instances() -> Vec<ProblemInstance> {
    let mut v = vec![reference()];
    v.extend(random_set());
    v
}

pub fn solve(inst: &ProblemInstance) -> SolveResult {
    find_beta_star(inst, 1e-9 * inst.bracket_upper()).expect("solvable")
}

/// Closed-form `v_beta` for a `beta` in the increasing class.
pub fn closed_form_at(inst: &ProblemInstance, beta: f64) -> ValueFunction {
    match build_value_function(inst, beta).expect("beta in domain") {
        BuildOutcome::Complete { value_function, .. } => value_function,
        other => panic!("beta = {beta} is not in the increasing class: {other:?}"),
    }
}

pub fn has_zero_rung(inst: &ProblemInstance) -> bool {
    inst.ladder().contains(&0.0)
}

/// Steep negative-drift branch (rate 2|theta|/sigma2 near 17) where forward
/// shooting from `x = 0` cannot zero the tail coefficient in double precision.
pub fn stiff_instance() -> ProblemInstance {
    ProblemInstance::new(
        -2.884_6,
        vec![0.375_8, 2.508_8],
        vec![0.5, 7.577],
        0.3,
        0.3,
        8.334_6,
    )
    .expect("valid")
}

/// Long-run cost of a threshold policy from its stationary density.
///
/// With piecewise-constant drift the density is `exp((2/sigma2) int_0^z theta)`
/// up to normalization and the pushing rate at zero is `sigma2 pi(0) / 2`.
pub fn threshold_policy_cost(inst: &ProblemInstance, thresholds: &[f64]) -> f64 {
    let policy = driftctl::Policy::Dynamic {
        thresholds: thresholds.to_vec(),
        levels: inst.ladder().to_vec(),
    };
    let mut cuts: Vec<f64> = thresholds.iter().copied().filter(|&z| z > 0.0).collect();
    cuts.push(0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let s2 = inst.sigma2();
    // (start, end, drift, log density at start)
    let mut segs = Vec::new();
    let mut log_start = 0.0;
    for w in cuts.windows(2) {
        let theta = policy.drift_at(0.5 * (w[0] + w[1]));
        segs.push((w[0], w[1], theta, log_start));
        log_start += 2.0 * theta * (w[1] - w[0]) / s2;
    }
    let z1 = *cuts.last().unwrap();
    let shift = segs.iter().map(|s| s.3).chain([log_start]).fold(f64::NEG_INFINITY, f64::max)
        + segs.iter().map(|s| 2.0 * s.2.max(0.0) * (s.1 - s.0) / s2).fold(0.0, f64::max);

    let (mut mass, mut moment, mut cost) = (0.0, 0.0, 0.0);
    for &(a, b, theta, l0) in &segs {
        // composite Simpson, step small against the exponential rate
        let n = 2 * ((theta.abs() * (b - a) / (s2 * 0.005)).ceil() as usize).max(1000);
        let dx = (b - a) / n as f64;
        let (mut m, mut mm) = (0.0, 0.0);
        for i in 0..=n {
            let x = a + i as f64 * dx;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let d = (l0 + 2.0 * theta * (x - a) / s2 - shift).exp();
            m += w * d;
            mm += w * d * x;
        }
        m *= dx / 3.0;
        mm *= dx / 3.0;
        mass += m;
        moment += mm;
        cost += m * inst.cost_c(theta).unwrap();
    }
    // tail at theta_0 < 0, exactly
    let q = 2.0 * inst.theta0().abs() / s2;
    let e = (log_start - shift).exp();
    mass += e / q;
    moment += e * (z1 / q + 1.0 / (q * q));
    let density0 = (-shift).exp() / mass;
    cost / mass + inst.h() * moment / mass + inst.p() * 0.5 * s2 * density0
}
