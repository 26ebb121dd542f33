//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riscov_cli::commands::{cmd_compare, cmd_sweep};
use riscov_cli::config::{load_str, parse_override, OutputFormat, RunSpec};
use riscov_core::analytic::{cov_handset, cov_no_ris, cov_total, cov_vehicle, evaluate, inner_integral, outage_gain, outage_ratio};
use riscov_core::montecarlo::{
    estimate_no_ris, estimate_populations, estimate_total, run_trial_vehicle, Population, TrialStreams,
};
use riscov_core::params::{db_to_linear, per_km2_to_per_m2, per_km_to_per_m};
use riscov_core::quadrature::{integrate, Tolerance};
use riscov_core::{derived_thresholds, AnalyticOptions, Estimator, NetworkParams, SimConfig, Variant};
use riscov_validation::*;

fn table() -> NetworkParams {
    NetworkParams::table_defaults()
}

fn opts(variant: Variant) -> AnalyticOptions {
    AnalyticOptions::with_variant(variant)
}

fn sim(trials: u64, estimator: Estimator) -> SimConfig {
    SimConfig { trials, seed: 20_240_601, estimator, ..SimConfig::default() }
}

fn closed_form_vs_simulation() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut pass = true;
    let mut parts = Vec::new();
    for bs in [4.0, 10.0, 20.0, 40.0] {
        let p = NetworkParams { lambda_bs: per_km2_to_per_m2(bs), ..table() };
        let exact = cov_no_ris(&p, &opts(Variant::Consistent)).unwrap();
        let e = estimate_no_ris(&p, &sim(NO_RIS_TRIALS, Estimator::Bernoulli)).unwrap();
        let gap = (e.p_hat - exact).abs();
        let ok = gap <= agree_tol(e.ci95_halfwidth);
        pass &= ok;
        worst = worst.max(gap);
        parts.push(format!("λ={bs}: {:.4} vs {exact:.4}", e.p_hat));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < TIME_LIMIT;
    Outcome { pass, detail: format!("{}; max gap {worst:.4}; {:.1}s", parts.join(", "), elapsed.as_secs_f64()) }
}

fn oracle_equivalence() -> Outcome {
    let t = table();
    let points: Vec<(&str, NetworkParams)> = vec![
        ("defaults", t),
        ("μ×0.25", NetworkParams { mu: t.mu * 0.25, ..t }),
        ("μ×2", NetworkParams { mu: t.mu * 2.0, ..t }),
        ("N_r=16", NetworkParams { n_r: 16, ..t }),
        ("N_r=100", NetworkParams { n_r: 100, ..t }),
        ("τ=-5dB", NetworkParams { tau: db_to_linear(-5.0), ..t }),
        ("τ=5dB", NetworkParams { tau: db_to_linear(5.0), ..t }),
        ("α₁=2.0", NetworkParams { alpha_1: 2.0, ..t }),
        ("α₁=3.0", NetworkParams { alpha_1: 3.0, ..t }),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut slowest = Duration::ZERO;
    for (name, p) in points {
        let start = Instant::now();
        let e = estimate_total(&p, &sim(ORACLE_TRIALS, Estimator::Conditional)).unwrap();
        let elapsed = start.elapsed();
        let exact = cov_total(&p, &opts(Variant::Consistent)).unwrap();
        let gap = e.p_hat - exact;
        let ok = gap.abs() <= agree_tol(e.ci95_halfwidth) && elapsed < TIME_LIMIT;
        pass &= ok;
        slowest = slowest.max(elapsed);
        parts.push(format!("{name} {gap:+.4}{}", if ok { "" } else { " (!)" }));
    }
    Outcome { pass, detail: format!("mc − consistent: {}; slowest point {:.1}s", parts.join(", "), slowest.as_secs_f64()) }
}

/// One reproduction target: value per variant and whether it is within tolerance.
fn check_target(name: &str, target: f64, tol: f64, values: [f64; 2], lines: &mut Vec<String>) -> bool {
    let hits: Vec<bool> = values.iter().map(|v| (v - target).abs() <= tol).collect();
    let verdict = match (hits[0], hits[1]) {
        (true, true) => "both variants match".to_string(),
        (true, false) => "paper variant matches, consistent does not".to_string(),
        (false, true) => "consistent variant matches, paper does not".to_string(),
        (false, false) => "neither variant matches".to_string(),
    };
    lines.push(format!(
        "{name}: target {target}±{tol}, paper {:.4}, consistent {:.4} ({verdict})",
        values[0], values[1]
    ));
    hits[0] || hits[1]
}

fn per_variant<F: Fn(Variant) -> f64>(f: F) -> [f64; 2] {
    [f(Variant::Paper), f(Variant::Consistent)]
}

fn reference_figures() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let no_ris = NetworkParams { tau: db_to_linear(-5.0), ..table() };
    pass &= check_target(
        "no-RIS coverage (τ=-5 dB)",
        NO_RIS_TARGET,
        NO_RIS_TOL,
        per_variant(|v| cov_no_ris(&no_ris, &opts(v)).unwrap()),
        &mut lines,
    );
    for (n_r, lo, hi, rel_target) in [(16, 0.32, 0.42, 0.31), (100, 0.41, 0.59, 0.43)] {
        let at = |mu_km: f64| NetworkParams { n_r, mu: per_km_to_per_m(mu_km), ..table() };
        let low = per_variant(|v| cov_total(&at(1.0), &opts(v)).unwrap());
        let high = per_variant(|v| cov_total(&at(5.0), &opts(v)).unwrap());
        pass &= check_target(&format!("total coverage N_r={n_r}, μ=1/km"), lo, CURVE_TOL, low, &mut lines);
        pass &= check_target(&format!("total coverage N_r={n_r}, μ=5/km"), hi, CURVE_TOL, high, &mut lines);
        let rel = [high[0] / low[0] - 1.0, high[1] / low[1] - 1.0];
        pass &= check_target(&format!("relative gain N_r={n_r}"), rel_target, REL_GAIN_TOL, rel, &mut lines);
    }
    let gain_case = NetworkParams { mu: per_km_to_per_m(4.0), n_r: 1, tau: db_to_linear(-20.0), ..table() };
    pass &= check_target(
        "outage gain (μ=4/km, N_r=1, τ=-20 dB)",
        GAIN_TARGET,
        GAIN_TOL,
        per_variant(|v| outage_gain(&gain_case, &opts(v)).unwrap()),
        &mut lines,
    );
    Outcome { pass, detail: lines.join("\n        ") }
}

fn reductions() -> Outcome {
    let mut pass = true;
    let mut worst = 0.0f64;
    for variant in Variant::ALL {
        for p in [NetworkParams { mu: 0.0, ..table() }, NetworkParams { mu: 0.0, n_r: 100, tau: 0.1, ..table() }] {
            let o = opts(variant);
            let base = cov_no_ris(&p, &o).unwrap();
            for v in [cov_vehicle(&p, &o).unwrap(), cov_handset(&p, &o).unwrap()] {
                worst = worst.max((v - base).abs());
            }
        }
    }
    pass &= worst <= REDUCTION_TOL;

    let dark = NetworkParams { lambda_bs: 0.0, ..table() };
    let cons = evaluate(&dark, &opts(Variant::Consistent)).unwrap();
    let paper = evaluate(&dark, &opts(Variant::Paper)).unwrap();
    pass &= cons.vehicle == 0.0 && cons.handset == 0.0;
    pass &= paper.vehicle > 0.0;
    let mc = estimate_populations(&dark, &sim(LAMBDA_ZERO_TRIALS, Estimator::Bernoulli)).unwrap();
    let mc_zero = mc.total.p_hat == 0.0
        && mc.vehicle.is_some_and(|e| e.p_hat == 0.0)
        && mc.handset.is_some_and(|e| e.p_hat == 0.0);
    pass &= mc_zero;
    Outcome {
        pass,
        detail: format!(
            "μ=0 max |Δ| {worst:.1e}; λ=0: consistent vehicle {} handset {}, MC total {} ({} trials), paper vehicle {:.4} (> 0 as expected)",
            cons.vehicle, cons.handset, mc.total.p_hat, LAMBDA_ZERO_TRIALS, paper.vehicle
        ),
    }
}

fn ordering_and_ratio() -> Outcome {
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    let mut order_violations = 0;
    for p in random_grid(GRID_POINTS, 7) {
        for variant in Variant::ALL {
            let o = opts(variant);
            let s = evaluate(&p, &o).unwrap();
            if s.vehicle < s.handset {
                order_violations += 1;
            }
            let ratio = outage_ratio(&p, &o).unwrap();
            let direct = (1.0 - s.vehicle) / (1.0 - s.handset);
            worst_ratio = worst_ratio.max(((direct - ratio) / ratio).abs());
        }
    }
    pass &= order_violations == 0 && worst_ratio <= RATIO_REL_TOL;
    Outcome {
        pass,
        detail: format!(
            "{GRID_POINTS} points × 2 variants: {order_violations} ordering violations, max ratio rel. error {worst_ratio:.1e}"
        ),
    }
}

fn monotonicity() -> Outcome {
    // Each perturbation moves one coordinate in the direction that should help (+1) or hurt (-1).
    type Perturb = fn(&NetworkParams) -> NetworkParams;
    let moves: [(&str, Perturb, f64); 8] = [
        ("λ", |p| NetworkParams { lambda_bs: p.lambda_bs * 1.3, ..*p }, 1.0),
        ("μ", |p| NetworkParams { mu: p.mu * 1.3, ..*p }, 1.0),
        ("N_r", |p| NetworkParams { n_r: p.n_r * 2, ..*p }, 1.0),
        ("γ", |p| NetworkParams { gamma: p.gamma * 2.0, ..*p }, 1.0),
        ("η₁", |p| NetworkParams { eta_1: p.eta_1 * 1.3, ..*p }, 1.0),
        ("η₂", |p| NetworkParams { eta_2: p.eta_2 * 1.3, ..*p }, 1.0),
        ("τ", |p| NetworkParams { tau: p.tau * 2.0, ..*p }, -1.0),
        ("α₁", |p| NetworkParams { alpha_1: p.alpha_1 + 0.2, ..*p }, -1.0),
    ];
    let slack = 1e-9;
    let mut violations = Vec::new();
    for (i, p) in random_grid(GRID_POINTS, 7).iter().enumerate() {
        for variant in Variant::ALL {
            let o = opts(variant);
            let base = cov_total(p, &o).unwrap();
            for (name, f, sign) in &moves {
                let moved = cov_total(&f(p), &o).unwrap();
                if sign * (moved - base) < -slack {
                    violations.push(format!("{name} at point {i} ({}): {:+.2e}", variant.name(), moved - base));
                }
            }
        }
    }
    let analytic_ok = violations.is_empty();

    // Paired-seed coupling: more RISs or more elements never lowers a trial's conditional coverage.
    let c = sim(1, Estimator::Conditional);
    let mut coupling_violations = 0;
    let trials = 3_000;
    for p in [table(), random_grid(GRID_POINTS, 7)[3]] {
        let th = derived_thresholds(&p);
        let more_mu = NetworkParams { mu: p.mu * 2.0, ..p };
        let more_nr = NetworkParams { n_r: p.n_r * 2, ..p };
        let (th_mu, th_nr) = (derived_thresholds(&more_mu), derived_thresholds(&more_nr));
        for i in 0..trials {
            let s = TrialStreams::new(c.seed, Population::Vehicle, i);
            let base = run_trial_vehicle(&p, &th, &c, &s).total();
            if run_trial_vehicle(&more_mu, &th_mu, &c, &s).total() < base - 1e-15 {
                coupling_violations += 1;
            }
            if run_trial_vehicle(&more_nr, &th_nr, &c, &s).total() < base - 1e-15 {
                coupling_violations += 1;
            }
        }
    }
    let mut detail = format!(
        "analytic: {} violations over {GRID_POINTS} points × 8 coordinates × 2 variants; MC coupling (μ, N_r): {coupling_violations} violations over {} paired trials",
        violations.len(),
        2 * 2 * trials
    );
    if !violations.is_empty() {
        detail.push_str(&format!("; first: {}", violations[..violations.len().min(4)].join(", ")));
    }
    Outcome { pass: analytic_ok && coupling_violations == 0, detail }
}

fn numeric_infrastructure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_inner = 0.0f64;
    for _ in 0..INNER_SAMPLES {
        let eta = rng.random_range(5.0..200.0);
        let x = eta * 10f64.powf(rng.random_range(-3.0..1.5));
        let q = integrate(|r| r * (-r / eta).exp(), 0.0, x, Tolerance::new(0.0, 1e-13)).unwrap().value;
        worst_inner = worst_inner.max(((inner_integral(x, eta) - q) / q).abs());
    }

    let mut worst_quad = 0.0f64;
    let grid = random_grid(GRID_POINTS, 7);
    for p in std::iter::once(table()).chain(grid.iter().take(6).copied()) {
        for variant in Variant::ALL {
            let o = opts(variant);
            let half = AnalyticOptions { rel_tol: o.rel_tol / 2.0, abs_tol: o.abs_tol / 2.0, ..o };
            let (a, b) = (evaluate(&p, &o).unwrap(), evaluate(&p, &half).unwrap());
            for (x, y) in [(a.vehicle, b.vehicle), (a.handset, b.handset), (a.total.unwrap(), b.total.unwrap())] {
                worst_quad = worst_quad.max((x - y).abs());
            }
        }
    }

    let base = sim(50_000, Estimator::Conditional);
    let halved = SimConfig { epsilon_trunc: base.epsilon_trunc / 2.0, ..base };
    let e1 = estimate_total(&table(), &base).unwrap();
    let e2 = estimate_total(&table(), &halved).unwrap();
    let shift = (e1.p_hat - e2.p_hat).abs();
    let pass = worst_inner <= INNER_REL_TOL && worst_quad < QUAD_HALVING_TOL && shift < e1.ci95_halfwidth;
    Outcome {
        pass,
        detail: format!(
            "inner integral max rel. error {worst_inner:.1e} ({INNER_SAMPLES} samples); tolerance halving max shift {worst_quad:.1e}; ε halving shift {shift:.1e} vs CI {:.1e}",
            e1.ci95_halfwidth
        ),
    }
}

fn spec_with(workers: usize) -> RunSpec {
    let text = r#"{"sim": {"trials": 2000, "seed": 5, "estimator": "bernoulli"},
        "sweep": {"param": "ris_per_km", "values": [1, 3], "param2": "n_ris_elements", "values2": [16, 100]},
        "output": {"path": "unused.csv"}}"#;
    let sets = vec![parse_override(&format!("sim.workers={workers}")).unwrap()];
    load_str(text, &sets).unwrap().spec
}

fn render(spec: &RunSpec) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let table = cmd_sweep(spec).unwrap();
    let (mut csv, mut jsonl) = (Vec::new(), Vec::new());
    table.write(&mut csv, OutputFormat::Csv).unwrap();
    table.write(&mut jsonl, OutputFormat::Jsonl).unwrap();
    let compare_spec = RunSpec { sim: SimConfig { trials: 10_000, ..spec.sim }, ..spec.clone() };
    let report = serde_json::to_vec_pretty(&cmd_compare(&compare_spec).unwrap()).unwrap();
    (csv, jsonl, report)
}

fn determinism() -> Outcome {
    let first = render(&spec_with(1));
    let again = render(&spec_with(1));
    let wide = render(&spec_with(3));
    let pool = render(&spec_with(0));
    let same = first == again && first == wide && first == pool;
    Outcome {
        pass: same && !first.0.is_empty(),
        detail: format!(
            "sweep CSV ({} bytes), JSON lines ({} bytes) and compare report ({} bytes) identical across reruns and 1/3/default workers: {same}",
            first.0.len(),
            first.1.len(),
            first.2.len()
        ),
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("closed-form no-RIS coverage vs simulation", closed_form_vs_simulation),
        ("consistent formulas vs conditional simulation", oracle_equivalence),
        ("reference figure reproduction", reference_figures),
        ("reduction identities", reductions),
        ("ordering and outage ratio", ordering_and_ratio),
        ("monotonicity and paired coupling", monotonicity),
        ("numeric infrastructure", numeric_infrastructure),
        ("determinism of outputs", determinism),
    ];
    if run_criteria(&criteria) > 0 {
        std::process::exit(1);
    }
}
