//! Monte Carlo estimates of the LOS coverage probability.
//!
//! A trial places the typical user at the origin, samples base stations,
//! roads and RISs in windows bounded by blockage truncation, and declares
//! coverage iff some direct BS link, or some RIS (own link LOS and at least
//! one LOS feeding BS), clears the SNR threshold. Every link is blocked
//! independently.
//!
//! Randomness is counter-based: trial `i` of a run keyed by `(seed, population)`
//! reads ChaCha8 stream `i`, and each element class owns a fixed word offset
//! inside it. Results therefore do not depend on scheduling or worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{feed_radius, truncation_distance, LinkClass};
use crate::geometry::{sample_cox_on_lines, sample_lines, typical_line, AngleMode, Line, Point, RadialPpp};
use crate::params::{derived_thresholds, NetworkParams, ParamError, Thresholds};

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Indicator of coverage with all blockages sampled.
    #[default]
    Bernoulli,
    /// Coverage probability given the sampled geometry (blockages integrated out).
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub estimator: Estimator,
    /// Links whose LOS probability is below this are dropped from the windows.
    pub epsilon_trunc: f64,
    pub angle_mode: AngleMode,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    /// Fix the typical road to θ = 0 instead of sampling it.
    pub pin_typical_angle: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 1,
            estimator: Estimator::Bernoulli,
            epsilon_trunc: 1e-9,
            angle_mode: AngleMode::Isotropic,
            workers: 0,
            pin_typical_angle: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials < 1 {
            return Err(SimError::Config("trials must be at least 1"));
        }
        if !(self.epsilon_trunc > 0.0 && self.epsilon_trunc < 1.0) {
            return Err(SimError::Config("epsilon_trunc must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid parameters: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Params(Vec<ParamError>),
    #[error("invalid simulation config: {0}")]
    Config(&'static str),
    #[error("user mixture undefined: vehicle and handset densities are both zero")]
    DegenerateMixture,
    #[error("cannot build worker pool: {0}")]
    ThreadPool(String),
}

/// Coverage split by the first mechanism that succeeds, in the order
/// direct → RIS on the user's road → RIS elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Breakdown {
    pub direct: f64,
    pub on_line: f64,
    pub off_line: f64,
}

impl Breakdown {
    pub fn total(&self) -> f64 {
        self.direct + self.on_line + self.off_line
    }

    fn scaled(&self, k: f64) -> Breakdown {
        Breakdown { direct: k * self.direct, on_line: k * self.on_line, off_line: k * self.off_line }
    }

    fn add(&self, o: &Breakdown) -> Breakdown {
        Breakdown {
            direct: self.direct + o.direct,
            on_line: self.on_line + o.on_line,
            off_line: self.off_line + o.off_line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageEstimate {
    pub p_hat: f64,
    pub ci95_halfwidth: f64,
    pub trials: u64,
    pub breakdown: Breakdown,
    pub estimator: Estimator,
}

/// Which typical user a run simulates; also separates the random keys of runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    Vehicle,
    Handset,
    NoRis,
}

impl Population {
    fn tag(self) -> u64 {
        match self {
            Population::Vehicle => 0x7665_6869_636c_6501,
            Population::Handset => 0x6861_6e64_7365_7402,
            Population::NoRis => 0x6e6f_7269_7300_0003,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stream {
    BaseStations = 0,
    Lines = 1,
    TypicalAngle = 2,
    DirectBlockage = 3,
    OnLineRis = 4,
    OffLineRis = 5,
}

/// Random substreams of one trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialStreams {
    key: [u8; 32],
    trial: u64,
}

impl TrialStreams {
    pub fn new(seed: u64, population: Population, trial: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&population.tag().to_le_bytes());
        Self { key, trial }
    }

    fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(self.trial);
        // 68-bit word counter: 2^60 words per element class.
        rng.set_word_pos((stream as u128) << 60);
        rng
    }
}

/// Per-trial contribution: coverage probability (conditional) or indicator
/// (bernoulli), attributed to the first successful mechanism.
pub type TrialOutcome = Breakdown;

struct Site {
    position: Point,
    /// LOS probability of the RIS-to-user link.
    los: f64,
    feed_radius_sq: f64,
    mark: u64,
}

struct Ctx<'a> {
    params: &'a NetworkParams,
    th: &'a Thresholds,
    config: &'a SimConfig,
    /// Truncation distance of planar links.
    reach: f64,
}

impl Ctx<'_> {
    fn new<'a>(params: &'a NetworkParams, th: &'a Thresholds, config: &'a SimConfig) -> Ctx<'a> {
        Ctx { params, th, config, reach: truncation_distance(params.eta_2, config.epsilon_trunc) }
    }

    fn site(&self, position: Point, d2: f64, class: LinkClass, mark: u64) -> Site {
        let eta = class.blockage(self.params);
        let r = feed_radius(d2, class, self.params);
        Site { position, los: (-d2 / eta).exp(), feed_radius_sq: r * r, mark }
    }

    fn sample_bs(&self, streams: &TrialStreams, radius: f64) -> Vec<Point> {
        let mut rng = streams.rng(Stream::BaseStations);
        RadialPpp::new(self.params.lambda_bs, &mut rng)
            .take_while(|p| p.norm() <= radius)
            .collect()
    }

    fn off_line_sites(&self, streams: &TrialStreams) -> Vec<Site> {
        let p = self.params;
        let window = self.th.c2.min(self.reach);
        let lines = sample_lines(p.lambda_l, window, self.config.angle_mode, &mut streams.rng(Stream::Lines));
        sample_cox_on_lines(&lines, p.mu, window, &mut streams.rng(Stream::OffLineRis))
            .into_iter()
            .map(|c| self.site(c.position, c.position.norm(), LinkClass::Planar, c.mark))
            .collect()
    }

    fn on_line_sites(&self, streams: &TrialStreams) -> Vec<Site> {
        let line = if self.config.pin_typical_angle {
            Line::new(0.0, 0.0)
        } else {
            typical_line(self.config.angle_mode, &mut streams.rng(Stream::TypicalAngle))
        };
        let window = self.th.c1.min(truncation_distance(self.params.eta_1, self.config.epsilon_trunc));
        sample_cox_on_lines(&[line], self.params.mu, window, &mut streams.rng(Stream::OnLineRis))
            .into_iter()
            .map(|c| self.site(c.position, c.offset.abs(), LinkClass::Linear, c.mark))
            .collect()
    }

    /// Radius holding every BS that can serve directly or feed one of `sites`.
    fn bs_window(&self, groups: &[&[Site]]) -> f64 {
        let direct = self.th.c0.min(self.reach);
        groups
            .iter()
            .flat_map(|g| g.iter())
            .map(|s| s.position.norm() + self.reach)
            .fold(direct, f64::max)
    }

    fn evaluate(&self, streams: &TrialStreams, bs: &[Point], groups: [&[Site]; 2]) -> TrialOutcome {
        match self.config.estimator {
            Estimator::Conditional => self.conditional(bs, groups),
            Estimator::Bernoulli => self.bernoulli(streams, bs, groups),
        }
    }

    fn conditional(&self, bs: &[Point], groups: [&[Site]; 2]) -> TrialOutcome {
        let eta = self.params.eta_2;
        let reach_sq = self.reach * self.reach;
        let mut direct_fail = 1.0;
        for x in bs {
            let d = x.norm();
            if d < self.th.c0 && d < self.reach {
                direct_fail *= 1.0 - (-d / eta).exp();
            }
        }
        let mut group_fail = [1.0; 2];
        for (fail, sites) in group_fail.iter_mut().zip(groups) {
            for s in sites {
                let limit = s.feed_radius_sq.min(reach_sq);
                let mut feed_fail = 1.0;
                for x in bs {
                    let d_sq = x.dist_sq(&s.position);
                    if d_sq < limit {
                        feed_fail *= 1.0 - (-d_sq.sqrt() / eta).exp();
                    }
                }
                *fail *= 1.0 - s.los * (1.0 - feed_fail);
            }
        }
        Breakdown {
            direct: 1.0 - direct_fail,
            on_line: direct_fail * (1.0 - group_fail[0]),
            off_line: direct_fail * group_fail[0] * (1.0 - group_fail[1]),
        }
    }

    fn bernoulli(&self, streams: &TrialStreams, bs: &[Point], groups: [&[Site]; 2]) -> TrialOutcome {
        let eta = self.params.eta_2;
        let reach_sq = self.reach * self.reach;
        let mut rng = streams.rng(Stream::DirectBlockage);
        let mut covered = false;
        for x in bs {
            let d = x.norm();
            if d < self.reach {
                let u: f64 = rng.random();
                covered |= d < self.th.c0 && u < (-d / eta).exp();
            }
        }
        if covered {
            return Breakdown { direct: 1.0, ..Breakdown::default() };
        }
        for (g, sites) in groups.into_iter().enumerate() {
            if sites.iter().any(|s| self.site_serves(s, bs, reach_sq)) {
                return if g == 0 {
                    Breakdown { on_line: 1.0, ..Breakdown::default() }
                } else {
                    Breakdown { off_line: 1.0, ..Breakdown::default() }
                };
            }
        }
        Breakdown::default()
    }

    fn site_serves(&self, s: &Site, bs: &[Point], reach_sq: f64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(s.mark);
        if rng.random::<f64>() >= s.los {
            return false;
        }
        let mut fed = false;
        for x in bs {
            let d_sq = x.dist_sq(&s.position);
            if d_sq < reach_sq {
                let u: f64 = rng.random();
                fed |= d_sq < s.feed_radius_sq && u < (-d_sq.sqrt() / self.params.eta_2).exp();
            }
        }
        fed
    }
}

/// One trial for the typical vehicle user (on a road through the origin).
pub fn run_trial_vehicle(
    params: &NetworkParams,
    th: &Thresholds,
    config: &SimConfig,
    streams: &TrialStreams,
) -> TrialOutcome {
    let ctx = Ctx::new(params, th, config);
    let on_line = ctx.on_line_sites(streams);
    let off_line = ctx.off_line_sites(streams);
    let bs = ctx.sample_bs(streams, ctx.bs_window(&[&on_line, &off_line]));
    ctx.evaluate(streams, &bs, [&on_line, &off_line])
}

/// One trial for the typical handset user; every RIS link is planar.
pub fn run_trial_handset(
    params: &NetworkParams,
    th: &Thresholds,
    config: &SimConfig,
    streams: &TrialStreams,
) -> TrialOutcome {
    let ctx = Ctx::new(params, th, config);
    let off_line = ctx.off_line_sites(streams);
    let bs = ctx.sample_bs(streams, ctx.bs_window(&[&off_line]));
    ctx.evaluate(streams, &bs, [&[], &off_line])
}

/// One trial of a network without RISs.
pub fn run_trial_no_ris(
    params: &NetworkParams,
    th: &Thresholds,
    config: &SimConfig,
    streams: &TrialStreams,
) -> TrialOutcome {
    let ctx = Ctx::new(params, th, config);
    let bs = ctx.sample_bs(streams, ctx.bs_window(&[]));
    ctx.evaluate(streams, &bs, [&[], &[]])
}

type TrialFn = fn(&NetworkParams, &Thresholds, &SimConfig, &TrialStreams) -> TrialOutcome;

fn summarize(outcomes: &[TrialOutcome], estimator: Estimator) -> CoverageEstimate {
    let n = outcomes.len() as f64;
    // Sequential sums in trial order keep the result bit-reproducible.
    let mut sum = Breakdown::default();
    for o in outcomes {
        sum = sum.add(o);
    }
    let breakdown = sum.scaled(1.0 / n);
    let p_hat = outcomes.iter().map(Breakdown::total).sum::<f64>() / n;
    let ci95_halfwidth = match estimator {
        Estimator::Bernoulli => wilson_halfwidth(p_hat, n),
        Estimator::Conditional => {
            if outcomes.len() < 2 {
                0.0
            } else {
                let var = outcomes.iter().map(|o| (o.total() - p_hat).powi(2)).sum::<f64>() / (n - 1.0);
                Z95 * (var / n).sqrt()
            }
        }
    };
    CoverageEstimate { p_hat, ci95_halfwidth, trials: outcomes.len() as u64, breakdown, estimator }
}

/// Half-width of the 95% Wilson score interval.
pub fn wilson_halfwidth(p: f64, n: f64) -> f64 {
    let z2 = Z95 * Z95;
    Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

fn run_population(
    params: &NetworkParams,
    config: &SimConfig,
    population: Population,
    trial: TrialFn,
) -> Result<CoverageEstimate, SimError> {
    params.validate().map_err(SimError::Params)?;
    config.validate()?;
    let th = derived_thresholds(params);
    let run = || -> Vec<TrialOutcome> {
        (0..config.trials)
            .into_par_iter()
            .map(|i| trial(params, &th, config, &TrialStreams::new(config.seed, population, i)))
            .collect()
    };
    let outcomes = if config.workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| SimError::ThreadPool(e.to_string()))?
            .install(run)
    };
    Ok(summarize(&outcomes, config.estimator))
}

pub fn estimate_no_ris(params: &NetworkParams, config: &SimConfig) -> Result<CoverageEstimate, SimError> {
    run_population(params, config, Population::NoRis, run_trial_no_ris)
}

pub fn estimate_vehicle(params: &NetworkParams, config: &SimConfig) -> Result<CoverageEstimate, SimError> {
    run_population(params, config, Population::Vehicle, run_trial_vehicle)
}

pub fn estimate_handset(params: &NetworkParams, config: &SimConfig) -> Result<CoverageEstimate, SimError> {
    run_population(params, config, Population::Handset, run_trial_handset)
}

/// Vehicle, handset and mixture estimates from independent runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationEstimates {
    /// `None` when vehicles carry zero weight.
    pub vehicle: Option<CoverageEstimate>,
    /// `None` when handsets carry zero weight.
    pub handset: Option<CoverageEstimate>,
    pub total: CoverageEstimate,
    pub weights: (f64, f64),
}

pub fn estimate_populations(params: &NetworkParams, config: &SimConfig) -> Result<PopulationEstimates, SimError> {
    params.validate().map_err(SimError::Params)?;
    let (w1, w2) = params.user_weights().ok_or(SimError::DegenerateMixture)?;
    let vehicle = if w1 > 0.0 { Some(estimate_vehicle(params, config)?) } else { None };
    let handset = if w2 > 0.0 { Some(estimate_handset(params, config)?) } else { None };
    let total = match (vehicle, handset) {
        (Some(v), None) => v,
        (None, Some(h)) => h,
        (Some(v), Some(h)) => CoverageEstimate {
            p_hat: w1 * v.p_hat + w2 * h.p_hat,
            ci95_halfwidth: ((w1 * v.ci95_halfwidth).powi(2) + (w2 * h.ci95_halfwidth).powi(2)).sqrt(),
            trials: v.trials,
            breakdown: v.breakdown.scaled(w1).add(&h.breakdown.scaled(w2)),
            estimator: config.estimator,
        },
        (None, None) => return Err(SimError::DegenerateMixture),
    };
    Ok(PopulationEstimates { vehicle, handset, total, weights: (w1, w2) })
}

/// Mixture w₁·vehicle + w₂·handset of the typical user's coverage.
pub fn estimate_total(params: &NetworkParams, config: &SimConfig) -> Result<CoverageEstimate, SimError> {
    estimate_populations(params, config).map(|e| e.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{cov_no_ris, AnalyticOptions};

    fn table() -> NetworkParams {
        NetworkParams::table_defaults()
    }

    fn config(trials: u64, estimator: Estimator) -> SimConfig {
        SimConfig { trials, seed: 7, estimator, ..SimConfig::default() }
    }

    fn within(a: &CoverageEstimate, b: &CoverageEstimate) -> bool {
        let sigma = ((a.ci95_halfwidth / Z95).powi(2) + (b.ci95_halfwidth / Z95).powi(2)).sqrt();
        (a.p_hat - b.p_hat).abs() <= 3.0 * sigma.max(1e-12)
    }

    #[test]
    fn no_base_stations_never_covered() {
        let p = NetworkParams { lambda_bs: 0.0, ..table() };
        let th = derived_thresholds(&p);
        for estimator in [Estimator::Bernoulli, Estimator::Conditional] {
            let c = config(1, estimator);
            for i in 0..200 {
                let s = TrialStreams::new(3, Population::Vehicle, i);
                assert_eq!(run_trial_vehicle(&p, &th, &c, &s).total(), 0.0);
                assert_eq!(run_trial_handset(&p, &th, &c, &s).total(), 0.0);
            }
            assert_eq!(estimate_no_ris(&p, &config(500, estimator)).unwrap().p_hat, 0.0);
        }
    }

    #[test]
    fn no_ris_matches_closed_form() {
        let p = table();
        let exact = cov_no_ris(&p, &AnalyticOptions::default()).unwrap();
        let e = estimate_no_ris(&p, &config(40_000, Estimator::Bernoulli)).unwrap();
        assert!((e.p_hat - exact).abs() <= e.ci95_halfwidth * 3.0 / Z95 * 1.0 + 1e-12, "{} vs {exact}", e.p_hat);
        assert_eq!(e.breakdown.total(), e.p_hat);
    }

    #[test]
    fn unblocked_limit() {
        let p = NetworkParams { eta_2: 1e6, ..table() };
        let th = derived_thresholds(&p);
        let expect = 1.0 - (-p.lambda_bs * std::f64::consts::PI * th.c0 * th.c0).exp();
        let e = estimate_no_ris(&p, &config(20_000, Estimator::Bernoulli)).unwrap();
        assert!((e.p_hat - expect).abs() <= 3.0 * e.ci95_halfwidth / Z95, "{} vs {expect}", e.p_hat);
    }

    #[test]
    fn ris_free_reductions() {
        let c = config(20_000, Estimator::Bernoulli);
        let base = estimate_no_ris(&table(), &c).unwrap();
        for p in [NetworkParams { mu: 0.0, ..table() }, NetworkParams { lambda_l: 0.0, ..table() }] {
            assert!(within(&estimate_vehicle(&p, &c).unwrap(), &base) || p.lambda_l == 0.0);
            assert!(within(&estimate_handset(&p, &c).unwrap(), &base));
        }
    }

    #[test]
    fn vehicle_dominates_handset_per_trial() {
        let p = table();
        let th = derived_thresholds(&p);
        for estimator in [Estimator::Bernoulli, Estimator::Conditional] {
            let c = config(1, estimator);
            for i in 0..300 {
                let s = TrialStreams::new(11, Population::Vehicle, i);
                let v = run_trial_vehicle(&p, &th, &c, &s).total();
                let h = run_trial_handset(&p, &th, &c, &s).total();
                assert!(v >= h - 1e-15, "trial {i}: {v} < {h}");
            }
        }
    }

    #[test]
    fn breakdown_sums_to_estimate() {
        let e = estimate_vehicle(&table(), &config(2_000, Estimator::Bernoulli)).unwrap();
        assert!((e.breakdown.total() - e.p_hat).abs() < 1e-12);
        assert!(e.breakdown.on_line > 0.0);
        let e = estimate_handset(&table(), &config(2_000, Estimator::Conditional)).unwrap();
        assert!((e.breakdown.total() - e.p_hat).abs() < 1e-12);
        assert_eq!(e.breakdown.on_line, 0.0);
    }

    #[test]
    fn estimators_agree_and_conditioning_reduces_variance() {
        let p = table();
        let b = estimate_vehicle(&p, &config(20_000, Estimator::Bernoulli)).unwrap();
        let c = estimate_vehicle(&p, &config(20_000, Estimator::Conditional)).unwrap();
        assert!(within(&b, &c), "{} vs {}", b.p_hat, c.p_hat);
        assert!(c.ci95_halfwidth < b.ci95_halfwidth);
    }

    #[test]
    fn angle_modes_agree() {
        let iso = estimate_handset(&table(), &config(20_000, Estimator::Conditional)).unwrap();
        let man = SimConfig { angle_mode: AngleMode::Manhattan, ..config(20_000, Estimator::Conditional) };
        let man = estimate_handset(&table(), &man).unwrap();
        assert!(within(&iso, &man), "{} vs {}", iso.p_hat, man.p_hat);
    }

    #[test]
    fn mixture_weights_and_degenerate() {
        let c = config(500, Estimator::Conditional);
        let p = NetworkParams { nu: 0.0, ..table() };
        let all = estimate_populations(&p, &c).unwrap();
        assert!(all.vehicle.is_none());
        assert_eq!(all.total, all.handset.unwrap());
        let p = NetworkParams { lambda_2: 0.0, ..table() };
        let all = estimate_populations(&p, &c).unwrap();
        assert_eq!(all.total, all.vehicle.unwrap());
        let p = NetworkParams { nu: 0.0, lambda_2: 0.0, ..table() };
        assert_eq!(estimate_total(&p, &c), Err(SimError::DegenerateMixture));
        let (w1, w2) = table().user_weights().unwrap();
        assert!((w1 - 0.2).abs() < 1e-12 && (w2 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn deterministic_across_workers() {
        let base = SimConfig { workers: 1, ..config(300, Estimator::Bernoulli) };
        let a = estimate_vehicle(&table(), &base).unwrap();
        let b = estimate_vehicle(&table(), &SimConfig { workers: 3, ..base }).unwrap();
        let c = estimate_vehicle(&table(), &base).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.p_hat.to_bits(), b.p_hat.to_bits());
    }

    #[test]
    fn config_validation() {
        let p = table();
        assert!(estimate_no_ris(&p, &SimConfig { trials: 0, ..SimConfig::default() }).is_err());
        assert!(estimate_no_ris(&p, &SimConfig { epsilon_trunc: 1.0, ..SimConfig::default() }).is_err());
        let bad = NetworkParams { tau: -1.0, ..p };
        assert!(matches!(estimate_no_ris(&bad, &SimConfig::default()), Err(SimError::Params(_))));
    }

    #[test]
    fn wilson_interval() {
        // p = 0.5, n = 100: z/(1+z²/n)·sqrt(0.0025 + z²/40000)
        let h = wilson_halfwidth(0.5, 100.0);
        assert!((h - 0.096_168_469_634_004_37).abs() < 1e-9, "{h}");
        assert!(wilson_halfwidth(0.0, 1e5) > 0.0);
    }
}
