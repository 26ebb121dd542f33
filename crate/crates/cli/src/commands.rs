//! Subcommand implementations. Each returns data; writing is left to the caller.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use riscov_core::analytic::{cov_no_ris, evaluate, outage_gain_from_outages};
use riscov_core::geometry::{sample_bs, sample_cox_on_lines, sample_scenario, write_lines_csv, write_points_csv};
use riscov_core::montecarlo::{estimate_no_ris, estimate_populations, CoverageEstimate};
use riscov_core::{AnalyticError, NetworkParams, Variant};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, OutputFormat, RunSpec};

/// Rows of named values, rendered as CSV or JSON lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn write<W: Write>(&self, w: W, format: OutputFormat) -> Result<()> {
        match format {
            OutputFormat::Csv => {
                let mut csv = csv::Writer::from_writer(w);
                csv.write_record(&self.columns)?;
                for row in &self.rows {
                    csv.write_record(row.iter().map(cell))?;
                }
                csv.flush()?;
            }
            OutputFormat::Jsonl => {
                let mut w = w;
                for row in &self.rows {
                    let obj: serde_json::Map<String, Value> =
                        self.columns.iter().cloned().zip(row.iter().cloned()).collect();
                    serde_json::to_writer(&mut w, &Value::Object(obj))?;
                    writeln!(w)?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn num(x: f64) -> Value {
    json!(x)
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

/// Write to `path`, or to stdout when there is none.
pub fn emit<F: FnOnce(&mut dyn Write) -> Result<()>>(path: Option<&Path>, f: F) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
        }
    }
    Ok(())
}

/// Monte Carlo and the consistent variant disagree beyond tolerance.
#[derive(Debug, Error)]
#[error("Monte Carlo and the consistent analytic variant disagree beyond tolerance")]
pub struct CompareFailed;

/// Process exit status for an error: 2 validation, 3 numeric, 4 failed comparison, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<CompareFailed>() {
            return 4;
        }
        if cause.is::<ConfigError>() || cause.is::<riscov_core::SimError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<AnalyticError>() {
            return match e {
                AnalyticError::Quadrature(_) | AnalyticError::OutOfRange { .. } => 3,
                _ => 2,
            };
        }
    }
    1
}

pub fn cmd_analytic(spec: &RunSpec) -> Result<Table> {
    let mut t = Table::new(&[
        "variant",
        "cov_no_ris",
        "cov_vehicle",
        "cov_handset",
        "cov_total",
        "outage_ratio",
        "gain",
        "exponent_direct",
        "exponent_on_line",
        "exponent_off_line",
    ]);
    for &variant in spec.variants.variants() {
        let s = evaluate(&spec.params, &spec.analytic_for(variant))?;
        t.rows.push(vec![
            json!(variant.name()),
            num(s.no_ris),
            num(s.vehicle),
            num(s.handset),
            opt(s.total),
            num(s.outage_ratio),
            opt(s.gain),
            num(s.exponents.direct),
            num(s.exponents.on_line),
            num(s.exponents.off_line),
        ]);
    }
    Ok(t)
}

fn estimate_row(population: &str, e: &CoverageEstimate, seed: u64) -> Vec<Value> {
    vec![
        json!(population),
        num(e.p_hat),
        num(e.ci95_halfwidth),
        json!(e.trials),
        json!(seed),
        json!(e.estimator),
        num(e.breakdown.direct),
        num(e.breakdown.on_line),
        num(e.breakdown.off_line),
    ]
}

pub fn cmd_simulate(spec: &RunSpec) -> Result<Table> {
    let sim = spec.sim_or_default();
    let mut t = Table::new(&[
        "population", "p_hat", "ci95", "trials", "seed", "estimator", "direct", "on_line", "off_line",
    ]);
    let base = estimate_no_ris(&spec.params, &sim)?;
    t.rows.push(estimate_row("no_ris", &base, sim.seed));
    let all = estimate_populations(&spec.params, &sim)?;
    if let Some(v) = &all.vehicle {
        t.rows.push(estimate_row("vehicle", v, sim.seed));
    }
    if let Some(h) = &all.handset {
        t.rows.push(estimate_row("handset", h, sim.seed));
    }
    t.rows.push(estimate_row("total", &all.total, sim.seed));
    Ok(t)
}

/// Minimum trial count for a comparison to be meaningful.
pub const COMPARE_MIN_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub mc: f64,
    pub ci95: f64,
    pub trials: u64,
    pub seed: u64,
    pub paper_variant: f64,
    pub consistent_variant: f64,
    pub delta_paper: f64,
    pub delta_consistent: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// Tolerance for MC-vs-analytic agreement: max(3·ci95, 0.01).
pub fn agreement_tolerance(ci95: f64) -> f64 {
    (3.0 * ci95).max(0.01)
}

pub fn cmd_compare(spec: &RunSpec) -> Result<CompareReport> {
    let sim = spec.sim_or_default();
    if sim.trials < COMPARE_MIN_TRIALS {
        return Err(ConfigError::Invalid {
            key: "sim.trials".into(),
            reason: format!("compare needs at least {COMPARE_MIN_TRIALS} trials (got {})", sim.trials),
        }
        .into());
    }
    let mc = estimate_populations(&spec.params, &sim)?.total;
    let total = |variant| -> Result<f64> {
        evaluate(&spec.params, &spec.analytic_for(variant))?
            .total
            .ok_or_else(|| AnalyticError::DegenerateMixture.into())
    };
    let paper = total(Variant::Paper)?;
    let consistent = total(Variant::Consistent)?;
    let tolerance = agreement_tolerance(mc.ci95_halfwidth);
    let delta_paper = paper - mc.p_hat;
    let delta_consistent = consistent - mc.p_hat;
    let pass = delta_consistent.abs() <= tolerance;
    let mut notes = Vec::new();
    for (name, delta) in [("paper", delta_paper), ("consistent", delta_consistent)] {
        if delta.abs() > tolerance {
            notes.push(format!(
                "{name} variant differs from Monte Carlo by {delta:+.6} (tolerance {tolerance:.6})"
            ));
        }
    }
    if pass && delta_paper.abs() > tolerance {
        notes.push("consistent variant matches Monte Carlo; the paper variant does not".into());
    }
    Ok(CompareReport {
        mc: mc.p_hat,
        ci95: mc.ci95_halfwidth,
        trials: mc.trials,
        seed: sim.seed,
        paper_variant: paper,
        consistent_variant: consistent,
        delta_paper,
        delta_consistent,
        tolerance,
        pass,
        notes,
    })
}

pub fn cmd_gain(spec: &RunSpec) -> Result<Table> {
    let mut t = Table::new(&["variant", "gain", "gain_from_outages", "outage_ratio", "cov_no_ris", "cov_total"]);
    for &variant in spec.variants.variants() {
        let opts = spec.analytic_for(variant);
        let s = evaluate(&spec.params, &opts)?;
        let gain = s.gain.ok_or(AnalyticError::DegenerateMixture)?;
        t.rows.push(vec![
            json!(variant.name()),
            num(gain),
            num(outage_gain_from_outages(&spec.params, &opts)?),
            num(s.outage_ratio),
            num(s.no_ris),
            opt(s.total),
        ]);
    }
    Ok(t)
}

fn sweep_row(spec: &RunSpec, params: &NetworkParams) -> Result<Vec<Value>> {
    let paper = evaluate(params, &spec.analytic_for(Variant::Paper))?;
    let consistent = evaluate(params, &spec.analytic_for(Variant::Consistent))?;
    let mixture = |x: Option<f64>| x.ok_or(AnalyticError::DegenerateMixture);
    let mut row = vec![
        mixture(paper.total)?,
        mixture(consistent.total)?,
        paper.vehicle,
        consistent.vehicle,
        paper.handset,
        consistent.handset,
        cov_no_ris(params, &spec.analytic)?,
        mixture(paper.gain)?,
        mixture(consistent.gain)?,
    ];
    if spec.sim.trials > 0 {
        let mc = estimate_populations(params, &spec.sim)?.total;
        row.extend([mc.p_hat, mc.ci95_halfwidth]);
    }
    if let Some(bad) = row.iter().find(|x| !x.is_finite()) {
        bail!("non-finite result {bad}");
    }
    let mut out: Vec<Value> = row.into_iter().map(num).collect();
    if spec.sim.trials > 0 {
        out.extend([json!(spec.sim.trials), json!(spec.sim.seed)]);
    }
    Ok(out)
}

/// Evaluate every grid point (in parallel) and return rows in grid order.
pub fn cmd_sweep(spec: &RunSpec) -> Result<Table> {
    let sweep = spec.sweep.as_ref().context("no sweep configured")?;
    let second = match (&sweep.param2, &sweep.values2) {
        (Some(p), Some(v)) if !v.is_empty() => Some((p.as_str(), v.as_slice())),
        _ => None,
    };
    let mut columns = vec!["param", "value"];
    if second.is_some() {
        columns.extend(["param2", "value2"]);
    }
    columns.extend([
        "cov_total_paper",
        "cov_total_consistent",
        "cov_vehicle_paper",
        "cov_vehicle_consistent",
        "cov_handset_paper",
        "cov_handset_consistent",
        "cov_no_ris",
        "gain_paper",
        "gain_consistent",
    ]);
    if spec.sim.trials > 0 {
        columns.extend(["mc_total", "mc_ci95", "trials", "seed"]);
    }

    let mut grid = Vec::new();
    for &v in &sweep.values {
        match second {
            Some((_, values2)) => grid.extend(values2.iter().map(|&v2| (v, Some(v2)))),
            None => grid.push((v, None)),
        }
    }
    let rows = grid
        .par_iter()
        .map(|&(v, v2)| -> Result<Vec<Value>> {
            let mut doc = spec.document.clone();
            doc.set_model_value(&sweep.param, v)?;
            let mut row = vec![json!(sweep.param), num(v)];
            if let (Some((p2, _)), Some(v2)) = (second, v2) {
                doc.set_model_value(p2, v2)?;
                row.extend([json!(p2), num(v2)]);
            }
            let params = doc.network_params()?;
            row.extend(sweep_row(spec, &params)?);
            Ok(row)
        })
        .enumerate()
        .map(|(i, r)| {
            r.with_context(|| {
                let (v, v2) = grid[i];
                match (second, v2) {
                    (Some((p2, _)), Some(v2)) => format!("sweep row {i} ({} = {v}, {p2} = {v2})", sweep.param),
                    _ => format!("sweep row {i} ({} = {v})", sweep.param),
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&columns);
    t.rows = rows;
    Ok(t)
}

/// File names written by [`cmd_scene`], in order.
pub const SCENE_FILES: [&str; 5] = ["bs.csv", "lines.csv", "ris.csv", "vehicles.csv", "handsets.csv"];

/// Sample one snapshot in a disk of `radius` m and write one CSV per element class into `dir`.
pub fn cmd_scene(spec: &RunSpec, dir: &Path, radius: f64) -> Result<Vec<PathBuf>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(ConfigError::Invalid { key: "radius-m".into(), reason: format!("must be positive (got {radius})") }.into());
    }
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let p = &spec.params;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.sim.seed);
    let scene = sample_scenario(p.lambda_bs, p.lambda_l, p.mu, radius, spec.sim.angle_mode, &mut rng);
    let vehicles = sample_cox_on_lines(&scene.lines, p.nu, radius, &mut rng);
    let handsets = sample_bs(p.lambda_2, radius, &mut rng);

    let paths: Vec<PathBuf> = SCENE_FILES.iter().map(|f| dir.join(f)).collect();
    write_file(&paths[0], |w| write_points_csv(w, "bs", scene.bs_points.iter().map(|&x| (x, None))))?;
    write_file(&paths[1], |w| write_lines_csv(w, "road", &scene.lines))?;
    write_file(&paths[2], |w| write_points_csv(w, "ris", scene.ris_points.iter().map(|c| (c.position, Some(c.line)))))?;
    write_file(&paths[3], |w| write_points_csv(w, "vehicle", vehicles.iter().map(|c| (c.position, Some(c.line)))))?;
    write_file(&paths[4], |w| write_points_csv(w, "handset", handsets.iter().map(|&x| (x, None))))?;
    Ok(paths)
}

fn write_file<F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>>(path: &Path, f: F) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).with_context(|| format!("cannot write {}", path.display()))
}
