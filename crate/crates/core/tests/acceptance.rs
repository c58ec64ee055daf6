//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use crp_core::asymptotics::{
    approx_clt_zone, approx_crp_pmf, approx_renewal, drift_identities, i_alpha,
};
use crp_core::deviation::{clt_local, solve_saddle};
use crp_core::oracle::{
    crp_pmf_all, crp_pmf_path_dp, jump_power, renewal_measure_exact, simulate, SamplingMode,
};
use crp_core::second_deviation::{alpha_bounds, d_two_arg, domain, lambda_of_alpha};
use crp_core::{CrpError, JumpDistribution};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// `|r(2n) - 1| < |r(n) - 1|` down the list and a final error below `tol`.
fn ratio_trend(ratios: &[(u64, f64)], tol: f64) -> (bool, String) {
    let errs: Vec<f64> = ratios.iter().map(|(_, r)| (r - 1.0).abs()).collect();
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let last = *errs.last().unwrap();
    let text = ratios
        .iter()
        .map(|(n, r)| format!("n={n}:{r:.5}"))
        .collect::<Vec<_>>()
        .join(" ");
    (
        monotone && last < tol,
        format!("{text} monotone={monotone}"),
    )
}

fn fixtures() -> Vec<(&'static str, JumpDistribution)> {
    vec![
        ("four-atom", four_atom()),
        ("three-atom", three_atom()),
        ("flat-tail", flat_tail()),
    ]
}

fn drift_identity_residuals() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    let mut parts = Vec::new();
    for (name, d) in fixtures() {
        match drift_identities(&d) {
            Ok((r1, r2)) => {
                worst = (worst.0.max(r1), worst.1.max(r2));
                parts.push(format!("{name}: {r1:.1e}/{r2:.1e}"));
            }
            Err(e) => return outcome(false, format!("{name}: {e}")),
        }
    }
    outcome(
        worst.0 < 1e-6 && worst.1 < 1e-5,
        format!("residuals CI/sigma2 D'' {}", parts.join(", ")),
    )
}

/// Maximises `lambda theta + mu alpha - A` over a box by repeated grid zooms.
/// The objective is concave, so each zoom keeps the maximiser.
fn brute_legendre(d: &JumpDistribution, theta: f64, alpha: f64) -> f64 {
    let f = |l: f64, m: f64| match direct_cgf(d, l, m) {
        Some(a) => l * theta + m * alpha - a,
        None => f64::NEG_INFINITY,
    };
    let (mut cl, mut cm, mut half) = (0.0f64, 0.0f64, 20.0f64);
    let grid = 200;
    let mut best = f(cl, cm);
    while half > 1e-11 {
        let (mut bl, mut bm) = (cl, cm);
        for i in 0..=grid {
            let l = cl - half + 2.0 * half * i as f64 / grid as f64;
            for j in 0..=grid {
                let m = cm - half + 2.0 * half * j as f64 / grid as f64;
                let v = f(l, m);
                if v > best {
                    best = v;
                    bl = l;
                    bm = m;
                }
            }
        }
        cl = bl;
        cm = bm;
        half *= 4.0 / grid as f64;
    }
    best
}

fn convex_duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let models = fixtures();
    let mut worst_grad = 0.0f64;
    let mut points = Vec::new();
    let mut failures = 0;
    for i in 0..1000 {
        let (_, d) = &models[i % models.len()];
        // A random tilt maps to a random interior point of the domain.
        let (l, m) = loop {
            let l: f64 = rng.random_range(-2.0..1.5);
            let m: f64 = rng.random_range(-2.5..2.5);
            if d.in_domain(l + 0.2, m) {
                break (l, m);
            }
        };
        let (theta, alpha) = d.cgf(l, m).unwrap().grad;
        match solve_saddle(d, theta, alpha) {
            Ok(s) => {
                let g = d.cgf(s.lambda, s.mu).unwrap().grad;
                worst_grad = worst_grad.max((g.0 - theta).abs()).max((g.1 - alpha).abs());
                if i % 50 == 0 {
                    points.push((i % models.len(), theta, alpha, s.value));
                }
            }
            Err(_) => failures += 1,
        }
    }
    let mut worst_legendre = 0.0f64;
    for &(k, theta, alpha, value) in &points {
        let brute = brute_legendre(&models[k].1, theta, alpha);
        worst_legendre = worst_legendre.max((brute - value).abs());
    }
    outcome(
        failures == 0 && worst_grad < 1e-8 && worst_legendre < 1e-6 && points.len() == 20,
        format!(
            "max |grad A - target| = {worst_grad:.2e} over 1000, max |Lambda - brute| = {worst_legendre:.2e} over {}, solver failures {failures}",
            points.len()
        ),
    )
}

/// Golden-section minimum of `r Lambda(theta / r, alpha / r)` after a log grid.
fn brute_ray(d: &JumpDistribution, theta: f64, alpha: f64) -> Option<f64> {
    let g = |r: f64| match solve_saddle(d, theta / r, alpha / r) {
        Ok(s) => r * s.value,
        Err(_) => f64::INFINITY,
    };
    let grid: Vec<f64> = (0..=600)
        .map(|i| (-4.0 + 8.0 * i as f64 / 600.0f64).exp2())
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&r| g(r)).collect();
    let (imin, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
    if !vals[imin].is_finite() {
        return None;
    }
    let mut a = grid[imin.saturating_sub(1)];
    let mut b = grid[(imin + 1).min(grid.len() - 1)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (g(x1), g(x2));
    for _ in 0..200 {
        if b - a < 1e-13 * b {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = g(x2);
        }
    }
    Some(f1.min(f2))
}

fn ray_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let models = fixtures();
    let mut worst = 0.0f64;
    let mut count = 0;
    for i in 0..100 {
        let (_, d) = &models[i % models.len()];
        let (lo, hi) = alpha_bounds(d);
        let hi = hi.min(3.0);
        let theta: f64 = rng.random_range(0.5..2.0);
        let slope = rng.random_range(lo + 0.05 * (hi - lo)..hi - 0.05 * (hi - lo));
        let alpha = slope * theta;
        let cone = match d_two_arg(d, theta, alpha) {
            Ok(c) => c.value,
            Err(e) => return outcome(false, format!("D({theta}, {alpha}): {e}")),
        };
        let Some(brute) = brute_ray(d, theta, alpha) else {
            return outcome(false, format!("brute ray failed at ({theta}, {alpha})"));
        };
        worst = worst.max((cone - brute).abs());
        count += 1;
    }
    outcome(
        worst < 1e-7 && count == 100,
        format!("max |D(theta, alpha) - min_r| = {worst:.2e} over {count} points"),
    )
}

fn sums_local_limit() -> Outcome {
    let d = four_atom();
    let mut pass = true;
    let mut parts = Vec::new();
    for (gamma, beta) in [(1.5, 0.5), (1.4, 0.6)] {
        let mut ratios = Vec::new();
        for n in [16u64, 32, 64, 128] {
            let t = (gamma * n as f64).round() as i64;
            let x = (beta * n as f64).round() as i64;
            let exact = jump_power(&d, n as usize, t).get(t, x);
            let approx = clt_local(&d, n, t, x).unwrap();
            ratios.push((n, exact / approx));
        }
        let (ok, text) = ratio_trend(&ratios, 0.05);
        pass &= ok;
        parts.push(format!("({gamma},{beta}) {text}"));
    }
    outcome(pass, parts.join("; "))
}

fn renewal_local() -> Outcome {
    let hom = homogeneous(four_atom());
    let delayed = delayed_four_atom();
    let ns = [32u64, 64, 128, 256];
    let h_hom = renewal_measure_exact(&hom, 256);
    let h_del = renewal_measure_exact(&delayed, 256);
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [1.0 / 3.0, 0.45] {
        let mut ratios = Vec::new();
        for &n in &ns {
            let x = (alpha * n as f64).round() as i64;
            let est = approx_renewal(&hom, n, n as i64, x).unwrap();
            ratios.push((n, h_hom.get(n as i64, x) / est.value));
        }
        let (ok, text) = ratio_trend(&ratios, 0.05);
        pass &= ok;
        let x = (alpha * 256.0).round() as i64;
        let psi1 = approx_renewal(&delayed, 256, 256, x).unwrap().psi1_factor;
        let table_ratio = h_del.get(256, x) / h_hom.get(256, x);
        let psi_err = rel(table_ratio, psi1).abs();
        pass &= psi_err < 0.02;
        parts.push(format!(
            "ray (1,{alpha:.4}) {text}; delayed/plain = {table_ratio:.5} vs psi1 {psi1:.5}"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn pmf_local() -> Outcome {
    let model = homogeneous(four_atom());
    let ns = [32u64, 64, 128, 256];
    let exact = crp_pmf_all(&model, 256);
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [1.0 / 3.0, 0.40, 0.45] {
        let mut ratios = Vec::new();
        for &n in &ns {
            let x = (alpha * n as f64).round() as i64;
            let p = exact[n as usize - 1].get(&x).copied().unwrap_or(0.0);
            let est = approx_crp_pmf(&model, n, x).unwrap();
            ratios.push((n, p / est.value));
        }
        let (ok, text) = ratio_trend(&ratios, 0.05);
        pass &= ok;
        parts.push(format!("alpha={alpha:.4} {text}"));
    }
    // At alpha = a exactly: the n below make a n an integer for a = 1/3.
    let a = model.step().moments().a;
    let central = |ns: &[u64]| {
        ns.iter()
            .map(|&n| {
                let x = (a * n as f64).round() as i64;
                let full = approx_crp_pmf(&model, n, x).unwrap().value;
                rel(approx_clt_zone(&model, n, x).unwrap(), full).abs()
            })
            .fold(0.0f64, f64::max)
    };
    let on_a = central(&[66, 96, 129, 192, 258]);
    let nearest = central(&[64, 128, 256]);
    pass &= on_a < 0.005;
    parts.push(format!(
        "central-zone vs full at alpha=a: max rel {on_a:.1e} (nearest-lattice n=64,128,256: {nearest:.1e}, informational)"
    ));
    outcome(pass, parts.join("; "))
}

fn oracle_consistency() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();

    let models = [
        ("four-atom", homogeneous(four_atom())),
        ("three-atom", homogeneous(three_atom())),
        ("delayed", delayed_four_atom()),
        ("flat-tail", homogeneous(flat_tail())),
    ];
    let mut worst_dp = 0.0f64;
    for (_, m) in &models {
        for n in 1..=32u64 {
            let a = crp_pmf_all(m, n).pop().unwrap();
            let b = crp_pmf_path_dp(m, n);
            for x in a.keys().chain(b.keys()) {
                let d = a.get(x).unwrap_or(&0.0) - b.get(x).unwrap_or(&0.0);
                worst_dp = worst_dp.max(d.abs());
            }
        }
    }
    pass &= worst_dp <= 1e-12;
    parts.push(format!("path DP max diff {worst_dp:.1e}"));

    let mut worst_mass = 0.0f64;
    for (_, m) in &models[..3] {
        for pmf in crp_pmf_all(m, 512) {
            worst_mass = worst_mass.max((pmf.values().sum::<f64>() - 1.0).abs());
        }
    }
    pass &= worst_mass <= 1e-9;
    parts.push(format!("mass error up to n=512 {worst_mass:.1e}"));

    let m = &models[0].1;
    let exact: BTreeMap<i64, f64> = crp_pmf_all(m, 16).pop().unwrap();
    let sim = simulate(m, 16, 1_000_000, 20240601, SamplingMode::Naive).unwrap();
    let mut worst_z = 0.0f64;
    let mut cells = 0;
    for (x, c) in &sim.cells {
        if c.estimate > 1e-4 {
            let p = exact.get(x).copied().unwrap_or(0.0);
            worst_z = worst_z.max((c.estimate - p).abs() / c.std_error);
            cells += 1;
        }
    }
    pass &= worst_z <= 3.0;
    parts.push(format!(
        "simulation max |z| {worst_z:.2} over {cells} cells"
    ));
    outcome(pass, parts.join("; "))
}

fn divergence_guard() -> Outcome {
    // Raise q until the tail wall drops below D(0).
    let mut chosen = None;
    for i in 0..=400 {
        let q = 0.5 + 0.49 * i as f64 / 400.0;
        let d = sloped_tail(q);
        let summary = domain(&d);
        if let Some(d0) = summary.d0 {
            if d0 - summary.lambda_plus > 0.02 {
                chosen = Some((q, d, summary));
                break;
            }
        }
    }
    let Some((q, d, summary)) = chosen else {
        return outcome(false, "no q in [0.5, 0.99] puts lambda_plus below D(0)");
    };
    let Some((lo, hi)) = summary.beta_interval() else {
        return outcome(false, format!("q = {q}: beta-interval empty"));
    };
    let edge_err = [lo, hi]
        .iter()
        .map(|&b| (lambda_of_alpha(&d, b).unwrap() - summary.lambda_plus).abs())
        .fold(0.0, f64::max);
    let model = homogeneous(d.clone());
    let n = 200u64;
    let x_inside = (0.5 * (lo + hi) * n as f64).round() as i64;
    let inside = approx_crp_pmf(&model, n, x_inside);
    let inside_ok = matches!(inside, Err(CrpError::Divergent { .. }));
    let outside_alpha = hi + 0.5 * (summary.alpha_plus - hi);
    let i_out = i_alpha(&d, outside_alpha);
    let outside_ok = matches!(i_out, Ok(v) if v.is_finite() && v > 0.0);
    outcome(
        inside_ok && outside_ok && edge_err < 1e-8,
        format!(
            "q = {q:.4}, lambda_plus = {:.5}, D(0) = {:.5}, beta = [{lo:.5}, {hi:.5}], |lambda(beta) - lambda_plus| = {edge_err:.1e}, inside -> {}, I({outside_alpha:.3}) = {}",
            summary.lambda_plus,
            summary.d0.unwrap(),
            match &inside {
                Err(e) => e.to_string(),
                Ok(v) => format!("Ok({})", v.value),
            },
            match &i_out {
                Ok(v) => format!("{v:.5}"),
                Err(e) => e.to_string(),
            }
        ),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        (
            "1 drift identities",
            Duration::from_secs(1),
            drift_identity_residuals,
        ),
        ("2 convex duality", Duration::from_secs(30), convex_duality),
        ("3 ray identity", Duration::from_secs(30), ray_identity),
        (
            "4 sums local limit",
            Duration::from_secs(10),
            sums_local_limit,
        ),
        (
            "5 renewal local theorem",
            Duration::from_secs(60),
            renewal_local,
        ),
        ("6 pmf local theorem", Duration::from_secs(60), pmf_local),
        (
            "7 oracle self-consistency",
            Duration::from_secs(120),
            oracle_consistency,
        ),
        (
            "8 divergence guard",
            Duration::from_secs(5),
            divergence_guard,
        ),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.2}s / {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
