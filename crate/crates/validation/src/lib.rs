//! Shared pieces of the acceptance suite: pinned tolerances, the random
//! parameter grid and a small PASS/FAIL runner.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riscov_core::params::{db_to_linear, per_km2_to_per_m2, per_km_to_per_m};
use riscov_core::NetworkParams;

/// Simulation and closed form agree when |Δ| ≤ max(3·CI95, 0.01).
pub const AGREE_CI_FACTOR: f64 = 3.0;
pub const AGREE_FLOOR: f64 = 0.01;
pub const NO_RIS_TRIALS: u64 = 100_000;
pub const ORACLE_TRIALS: u64 = 200_000;
pub const TIME_LIMIT: Duration = Duration::from_secs(60);
pub const NO_RIS_TARGET: f64 = 0.27;
pub const NO_RIS_TOL: f64 = 0.01;
pub const CURVE_TOL: f64 = 0.05;
pub const REL_GAIN_TOL: f64 = 0.10;
pub const GAIN_TARGET: f64 = 1.1;
pub const GAIN_TOL: f64 = 0.05;
pub const REDUCTION_TOL: f64 = 1e-9;
pub const LAMBDA_ZERO_TRIALS: u64 = 100_000;
pub const RATIO_REL_TOL: f64 = 1e-6;
pub const GRID_POINTS: usize = 20;
pub const INNER_REL_TOL: f64 = 1e-9;
pub const INNER_SAMPLES: usize = 100;
pub const QUAD_HALVING_TOL: f64 = 1e-5;

pub fn agree_tol(ci95: f64) -> f64 {
    (AGREE_CI_FACTOR * ci95).max(AGREE_FLOOR)
}

/// `n` random valid parameter sets drawn from a fixed seed.
pub fn random_grid(n: usize, seed: u64) -> Vec<NetworkParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let alpha_1 = rng.random_range(2.0..3.5);
            NetworkParams {
                lambda_bs: per_km2_to_per_m2(rng.random_range(5.0..80.0)),
                lambda_l: per_km_to_per_m(rng.random_range(0.5..5.0)),
                mu: per_km_to_per_m(rng.random_range(0.5..10.0)),
                nu: per_km_to_per_m(rng.random_range(1.0..50.0)),
                lambda_2: per_km2_to_per_m2(rng.random_range(50.0..500.0)),
                alpha_1,
                alpha_2: rng.random_range(alpha_1.max(2.5)..4.0),
                eta_1: rng.random_range(20.0..100.0),
                eta_2: rng.random_range(15.0..80.0),
                tau: db_to_linear(rng.random_range(-10.0..10.0)),
                gamma: db_to_linear(rng.random_range(80.0..100.0)),
                n_r: rng.random_range(1..=128),
            }
            .validated()
            .expect("grid ranges are valid")
        })
        .collect()
}

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

pub type Criterion = (&'static str, fn() -> Outcome);

/// Run every criterion, printing one PASS/FAIL line each; returns the number of failures.
pub fn run_criteria(criteria: &[Criterion]) -> usize {
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome { pass: false, detail: format!("panicked: {msg}") }
        });
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "[{}] {}/{} {name} ({:.1}s)\n        {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            i + 1,
            criteria.len(),
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    failed
}
