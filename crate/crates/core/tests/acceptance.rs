//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

mod common;

use std::time::Instant;

use common::{all_instances, has_zero_rung, reference, solve};
use driftctl::bellman_ode::{classify_many, find_beta_star_ode, integrate_v, BetaClass, OdeOptions};
use driftctl::policies::{best_static, randomized_static_cost, static_cost};
use driftctl::{find_beta_star, simulate_policy, Execution, Policy, ProblemInstance, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn relaxation(inst: &ProblemInstance) -> f64 {
    inst.sigma2() / (2.0 * inst.theta0().abs())
}

fn optimal_cost() -> Check {
    let inst = reference();
    let start = Instant::now();
    let tol = 1e-6;
    let r = find_beta_star(&inst, tol).map_err(|e| e.to_string())?;
    let ode = find_beta_star_ode(&inst, tol).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let rel = (ode.beta_star - r.beta_star).abs() / r.beta_star;
    ensure((r.beta_star - 41.4).abs() <= 0.05, || format!("beta* = {}", r.beta_star))?;
    ensure(rel <= 1e-6, || format!("ode {} vs closed form {}", ode.beta_star, r.beta_star))?;
    ensure(secs < 1.0, || format!("took {secs:.3} s"))?;
    Ok(format!(
        "beta* = {:.6}, ode relative gap {rel:.1e}, {secs:.3} s",
        r.beta_star
    ))
}

fn static_benchmark() -> Check {
    let inst = reference();
    let cost = static_cost(&inst, -0.3).map_err(|e| e.to_string())?;
    ensure((cost - 58.1).abs() <= 1e-9, || format!("static(-0.3) = {cost}"))?;
    let scan: Vec<(f64, f64)> = inst
        .ladder()
        .iter()
        .filter(|&&t| t < 0.0)
        .map(|&t| (t, static_cost(&inst, t).unwrap()))
        .collect();
    let best = best_static(&inst).ladder;
    ensure(best.theta == inst.theta(2), || format!("best rung {}", best.theta))?;
    let listed: Vec<String> = scan.iter().map(|(t, c)| format!("{t:.4}:{c:.4}")).collect();
    Ok(format!("static(-0.3) = {cost}, ladder scan {}", listed.join(" ")))
}

fn savings() -> Check {
    let inst = reference();
    let beta = find_beta_star(&inst, 1e-6).map_err(|e| e.to_string())?.beta_star;
    let pct = 100.0 * (58.1 - beta) / 58.1;
    ensure((pct - 29.0).abs() <= 0.5, || format!("savings {pct:.3}%"))?;
    let mix = randomized_static_cost(&inst, &[0.0, 0.0, 0.85, 0.15, 0.0]).map_err(|e| e.to_string())?;
    ensure((mix - 57.9).abs() <= 0.05, || format!("mixture cost {mix}"))?;
    Ok(format!("savings {pct:.2}%, mixture cost {mix:.4}"))
}

fn simulation() -> Check {
    let inst = reference();
    let r = solve(&inst);
    let cfg = SimConfig {
        dt: 1e-3,
        horizon: 2e4,
        replications: 20,
        ..SimConfig::default()
    };
    let start = Instant::now();
    let dynamic = simulate_policy(&inst, &Policy::dynamic(&inst, &r), &cfg).map_err(|e| e.to_string())?;
    let fixed = simulate_policy(&inst, &Policy::static_drift(&inst, -0.3).unwrap(), &cfg).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let d_err = dynamic.mean_total_cost_rate / r.beta_star - 1.0;
    let s_err = fixed.mean_total_cost_rate / 58.1 - 1.0;
    ensure(d_err.abs() <= 0.02, || format!("dynamic {} vs {}", dynamic.mean_total_cost_rate, r.beta_star))?;
    ensure(s_err.abs() <= 0.02, || format!("static {} vs 58.1", fixed.mean_total_cost_rate))?;
    ensure(secs < 60.0, || format!("two simulations took {secs:.1} s"))?;

    let steep = simulate_policy(&inst, &Policy::static_drift(&inst, -1.5).unwrap(), &cfg).map_err(|e| e.to_string())?;
    let mut checks = Vec::new();
    for (theta, rep) in [(-0.3_f64, &fixed), (-1.5, &steep)] {
        let queue = inst.sigma2() / (2.0 * theta.abs());
        let q_err = rep.mean_queue_length / queue - 1.0;
        let i_err = rep.mean_idleness_rate / theta.abs() - 1.0;
        ensure(q_err.abs() <= 0.03, || format!("theta {theta}: mean queue {} vs {queue}", rep.mean_queue_length))?;
        ensure(i_err.abs() <= 0.03, || format!("theta {theta}: idleness {} vs {}", rep.mean_idleness_rate, -theta))?;
        checks.push(format!("theta {theta}: queue {:+.2}% idleness {:+.2}%", 100.0 * q_err, 100.0 * i_err));
    }
    Ok(format!(
        "dynamic {:+.2}%, static(-0.3) {:+.2}%, {secs:.1} s; {}",
        100.0 * d_err,
        100.0 * s_err,
        checks.join(", ")
    ))
}

fn bellman_properties() -> Check {
    let set = all_instances();
    ensure(set.iter().any(has_zero_rung), || "no zero-drift rung in the set".into())?;
    for (n, inst) in set.iter().enumerate() {
        let fail = |what: String| format!("instance {n}: {what}");
        let r = solve(inst);
        let opts = OdeOptions::for_instance(inst);
        let lo = inst.bracket_lower();
        let hi = inst.bracket_upper();

        // (a) v increases with beta
        let x_max = r.value_function.z1().max(relaxation(inst)) + 3.0 * relaxation(inst);
        let pairs = [
            (lo + 0.25 * (r.beta_star - lo), lo + 0.5 * (r.beta_star - lo)),
            (lo + 0.9 * (r.beta_star - lo), r.beta_star),
            (r.beta_star, r.beta_star + 1e-3),
            (r.beta_star + 1e-3, 0.5 * (r.beta_star + hi)),
            (lo + 1e-3 * (r.beta_star - lo), hi),
        ];
        for (b1, b2) in pairs {
            let s1 = integrate_v(inst, b1, x_max, opts.step).map_err(|e| fail(e.to_string()))?;
            let s2 = integrate_v(inst, b2, x_max, opts.step).map_err(|e| fail(e.to_string()))?;
            for i in 1..=400 {
                let x = x_max * i as f64 / 400.0;
                ensure(s2.value_at(x) > s1.value_at(x), || fail(format!("(a) v not increasing at x = {x}")))?;
            }
        }

        // (b) classification flips once across a 20-point ladder
        let betas: Vec<f64> = (1..=20).map(|i| lo + (hi - lo) * i as f64 / 20.0).collect();
        let classes = classify_many(inst, &betas, &opts, Execution::default());
        let classes: Vec<BetaClass> = classes.into_iter().collect::<Result<_, _>>().map_err(|e| fail(e.to_string()))?;
        let first = classes.iter().position(|&c| c == BetaClass::Increasing);
        ensure(
            first.is_some_and(|f| classes[f..].iter().all(|&c| c == BetaClass::Increasing)),
            || fail(format!("(b) classes {classes:?}")),
        )?;

        // (c) bracket
        ensure(lo < r.beta_star && r.beta_star <= hi, || fail(format!("(c) beta* {} outside ({lo}, {hi}]", r.beta_star)))?;

        // (d) tail slope on the final decade of [0, z_1 + 5 sigma2 / (2|theta_0|)]
        let ode = find_beta_star_ode(inst, 1e-14 * hi).map_err(|e| fail(e.to_string()))?;
        let z1 = r.value_function.z1();
        let end = z1 + 5.0 * relaxation(inst);
        let sol = integrate_v(inst, ode.beta_star, end, opts.step).map_err(|e| fail(e.to_string()))?;
        let a = (0.9 * end).max(z1);
        let slope = (sol.value_at(end) - sol.value_at(a)) / (end - a);
        let target = inst.h() / inst.theta0().abs();
        ensure((slope / target - 1.0).abs() < 0.01, || fail(format!("(d) tail slope {slope} vs {target}")))?;

        // (e) residual on 10^4 points of [0, 2 z_1]
        let span = if z1 > 0.0 { 2.0 * z1 } else { r.diagnostic_span(inst) };
        let res = r.max_residual_on(inst, span, 10_000);
        ensure(res <= 1e-7 * r.beta_star, || fail(format!("(e) residual {res}")))?;

        // (f) 0 < z_K < ... < z_1
        let z = &r.thresholds;
        ensure(z[z.len() - 1] > 0.0 && z.windows(2).all(|w| w[0] > w[1]), || fail(format!("(f) thresholds {z:?}")))?;
    }
    Ok(format!("(a)-(f) on {} instances, {} with a zero-drift rung", set.len(), set.iter().filter(|i| has_zero_rung(i)).count()))
}

fn duality() -> Check {
    let set = all_instances();
    for (n, inst) in set.iter().enumerate() {
        let fail = |what: String| format!("instance {n}: {what}");
        let (lo, hi) = (inst.theta0(), inst.theta_top());
        let mut xs: Vec<f64> = (0..2000).map(|i| lo + (hi - lo) * i as f64 / 1999.0).collect();
        xs.extend_from_slice(inst.ladder());
        let costs: Vec<f64> = xs.iter().map(|&x| inst.cost_c(x).unwrap()).collect();
        let top = inst.unit_costs()[inst.num_activities() - 1];
        let (ya, yb) = (-0.5 * top - 1.0, 1.5 * top + 1.0);
        let l = inst.lipschitz_bound();
        let mut prev: Option<f64> = None;
        for i in 0..400 {
            let y = ya + (yb - ya) * i as f64 / 399.0;
            let phi = inst.phi(y);
            let scale = 1.0 + y.abs() * l;
            let brute = xs.iter().zip(&costs).map(|(x, c)| y * x - c).fold(f64::NEG_INFINITY, f64::max);
            ensure(brute <= phi + 1e-12 * scale && phi - brute <= 1e-12 * scale, || fail(format!("conjugacy at y = {y}")))?;
            let psi = inst.psi(y);
            ensure((y * psi - inst.cost_c(psi).unwrap() - phi).abs() <= 1e-12 * scale, || fail(format!("equality at psi({y})")))?;
            if let Some(p) = prev {
                let dy = (yb - ya) / 399.0;
                ensure((phi - inst.phi(p)).abs() <= l * dy * (1.0 + 1e-12) + 1e-12, || fail(format!("Lipschitz at {y}")))?;
            }
            prev = Some(y);
        }
        // phi = int psi, midpoint rule
        let m = 200_000;
        let dy = (yb - ya) / m as f64;
        let integral: f64 = (0..m).map(|i| inst.psi(ya + (i as f64 + 0.5) * dy) * dy).sum();
        let exact = inst.phi(yb) - inst.phi(ya);
        let bound = inst.num_activities() as f64 * 2.0 * l * dy + 1e-9 * (1.0 + exact.abs());
        ensure((integral - exact).abs() <= bound, || fail(format!("int psi {integral} vs {exact}")))?;
        // delta round trip
        for i in 0..1000 {
            let x = lo + (hi - lo) * i as f64 / 999.0;
            let delta = inst.theta_to_delta(x).map_err(|e| fail(e.to_string()))?;
            let c = inst.cost_c(x).unwrap();
            ensure((inst.delta_cost(&delta) - c).abs() <= 1e-12 * c.abs().max(1.0), || fail(format!("round trip at {x}")))?;
        }
    }
    Ok(format!("conjugacy, int psi, Lipschitz, round trip on {} instances", set.len()))
}

fn dominance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let set = all_instances();
    let mut margin = f64::INFINITY;
    for (n, inst) in set.iter().enumerate() {
        let r = solve(inst);
        let mut thetas: Vec<f64> = inst.ladder().iter().copied().filter(|&t| t < 0.0).collect();
        thetas.extend((0..100).map(|_| rng.random_range(inst.theta0()..0.0)));
        for theta in thetas.into_iter().filter(|&t| t < 0.0) {
            let cost = static_cost(inst, theta).unwrap();
            ensure(r.beta_star <= cost + 1e-9 * r.beta_star, || {
                format!("instance {n}: beta* {} > static({theta}) = {cost}", r.beta_star)
            })?;
            margin = margin.min(cost / r.beta_star - 1.0);
        }
    }
    Ok(format!("{} instances, smallest static excess {:.2e}", set.len(), margin))
}

fn edge_cases() -> Check {
    let inst = ProblemInstance::new(-1.0, vec![1.0], vec![20.0], 1.0, 1.0, 10.0).unwrap();
    let r = find_beta_star(&inst, 1e-9 * inst.bracket_upper()).map_err(|e| e.to_string())?;
    let a = inst.theta0().abs();
    let expected = inst.p() * a + inst.h() * inst.sigma2() / (2.0 * a);
    ensure((r.beta_star - expected).abs() <= 1e-9, || format!("p <= c_1: {} vs {expected}", r.beta_star))?;
    ensure(r.thresholds.iter().all(|&z| z == 0.0), || format!("thresholds {:?}", r.thresholds))?;

    let mut probes = 0;
    for (n, inst) in all_instances().iter().enumerate() {
        let lo = inst.bracket_lower();
        let r = solve(inst);
        let ode = find_beta_star_ode(inst, 1e-9 * inst.bracket_upper()).map_err(|e| e.to_string())?;
        probes += r.probes.len() + ode.probes.len();
        ensure(r.probes.iter().chain(&ode.probes).all(|&b| b > lo), || format!("instance {n}: probe at or below {lo}"))?;
    }
    Ok(format!("p <= c_1 gives {expected} with zero thresholds; {probes} probes all above the lower bracket"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("optimal cost", optimal_cost),
        ("static benchmark", static_benchmark),
        ("savings", savings),
        ("simulation consistency", simulation),
        ("Bellman properties", bellman_properties),
        ("duality", duality),
        ("dominance", dominance),
        ("edge cases", edge_cases),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
