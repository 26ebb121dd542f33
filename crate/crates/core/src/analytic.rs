//! Deterministic coverage formulas evaluated by nested adaptive quadrature.
//!
//! Every coverage probability has the form 1 − exp(−(A + B + C)) where
//!
//! * `A` is the direct-link exponent (closed form),
//! * `B` is the contribution of RISs on the typical vehicle's own road,
//! * `C` is the contribution of RISs on all other roads.
//!
//! Two variants are provided. [`Variant::Paper`] evaluates the published
//! expressions as printed. [`Variant::Consistent`] applies the PGFL of the
//! point processes to the simulated event (an RIS serves the user iff its own
//! link is LOS *and* at least one feeding BS link is LOS), counts RISs on
//! both sides of each road and uses the signed line parameterization; it is
//! the variant the Monte Carlo engine is expected to match.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::truncation_distance;
use crate::params::{derived_thresholds, NetworkParams, ParamError, Thresholds};
use crate::quadrature::{geometric_breakpoints, integrate_panels, QuadError, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Paper,
    Consistent,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Paper, Variant::Consistent];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Paper => "paper",
            Variant::Consistent => "consistent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticOptions {
    pub variant: Variant,
    /// Relative tolerance of the outer integrals; inner integrals use a tenth of it.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Integrands carrying exp(−t/η) are cut at η·ln(1/epsilon_int).
    pub epsilon_int: f64,
}

impl Default for AnalyticOptions {
    fn default() -> Self {
        Self { variant: Variant::Consistent, rel_tol: 1e-7, abs_tol: 1e-13, epsilon_int: 1e-12 }
    }
}

impl AnalyticOptions {
    pub fn with_variant(variant: Variant) -> Self {
        Self { variant, ..Self::default() }
    }

    fn outer(&self) -> Tolerance {
        Tolerance::new(self.abs_tol, self.rel_tol)
    }

    fn inner(&self) -> Tolerance {
        Tolerance::new(self.abs_tol, self.rel_tol / 10.0)
    }

    fn validate(&self) -> Result<(), AnalyticError> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.epsilon_int > 0.0
            && self.epsilon_int < 1.0;
        if ok {
            Ok(())
        } else {
            Err(AnalyticError::Options)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("invalid parameters: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Params(Vec<ParamError>),
    #[error("tolerances must be positive and epsilon_int in (0, 1)")]
    Options,
    #[error("{function} is defined for t > 0 (got {t})")]
    Domain { function: &'static str, t: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("user mixture undefined: vehicle and handset densities are both zero")]
    DegenerateMixture,
    #[error("outage ratio undefined: handset coverage is 1")]
    UndefinedRatio,
    #[error("{name} = {value} is not a probability")]
    OutOfRange { name: &'static str, value: f64 },
}

/// ∫₀^X r·e^{−r/η} dr = η²·(1 − e^{−X/η}(1 + X/η)).
pub fn inner_integral(x: f64, eta: f64) -> f64 {
    if x.is_infinite() {
        return eta * eta;
    }
    let z = x / eta;
    let shape = if z < 0.1 {
        // Σ_{k≥2} (−1)^k (k−1) z^k / k!, avoiding the cancellation near 0.
        let mut term = -z; // (−z)^k / k! for k = 1
        let mut sum = 0.0;
        for k in 2..20 {
            term *= -z / k as f64;
            sum += (k - 1) as f64 * term;
        }
        sum
    } else {
        -(-z).exp_m1() - z * (-z).exp()
    };
    eta * eta * shape
}

/// Exponent 2πλ·∫₀^X r e^{−r/η₂} dr of the "every BS within X is blocked" probability.
fn blocked_exponent(radius: f64, params: &NetworkParams) -> f64 {
    2.0 * PI * params.lambda_bs * inner_integral(radius, params.eta_2)
}

/// P(some BS within `radius` of a point has a LOS link to it).
fn fed_probability(radius: f64, params: &NetworkParams) -> f64 {
    -(-blocked_exponent(radius, params)).exp_m1()
}

fn on_line_feed_radius(t: f64, th: &Thresholds) -> f64 {
    th.c2 / t.powf(th.rho)
}

fn off_line_feed_radius(d: f64, th: &Thresholds) -> f64 {
    th.c2 / d
}

/// `1 − f1(t)`: per-RIS success term for an RIS on the typical road at distance t.
fn on_line_success(t: f64, params: &NetworkParams, th: &Thresholds, variant: Variant) -> f64 {
    let fed = fed_probability(on_line_feed_radius(t, th), params);
    let los = (-t / params.eta_1).exp();
    match variant {
        // 1 − (1 − e^{−t/η₁})(1 − fed)
        Variant::Paper => fed + los * (1.0 - fed),
        Variant::Consistent => los * fed,
    }
}

/// `1 − f2(d)` for an RIS off the typical road at distance d.
fn off_line_success(d: f64, params: &NetworkParams, th: &Thresholds, variant: Variant) -> f64 {
    let fed = fed_probability(off_line_feed_radius(d, th), params);
    let los = (-d / params.eta_2).exp();
    match variant {
        Variant::Paper => fed + los * (1.0 - fed),
        Variant::Consistent => los * fed,
    }
}

fn check_params(params: &NetworkParams) -> Result<Thresholds, AnalyticError> {
    params.validate().map_err(AnalyticError::Params)?;
    Ok(derived_thresholds(params))
}

/// Paper variant: (1 − e^{−t/η₁})·exp(−2πλ·I(c₂/t^ρ, η₂)).
/// Consistent variant: probability that an on-road RIS at distance t fails to serve.
pub fn f1(t: f64, params: &NetworkParams, opts: &AnalyticOptions) -> Result<f64, AnalyticError> {
    if !(t > 0.0) {
        return Err(AnalyticError::Domain { function: "f1", t });
    }
    let th = check_params(params)?;
    Ok(1.0 - on_line_success(t, params, &th, opts.variant))
}

/// As [`f1`] for an RIS off the typical road at distance t (η₂, feed radius c₂/t).
pub fn f2(t: f64, params: &NetworkParams, opts: &AnalyticOptions) -> Result<f64, AnalyticError> {
    if !(t > 0.0) {
        return Err(AnalyticError::Domain { function: "f2", t });
    }
    let th = check_params(params)?;
    Ok(1.0 - off_line_success(t, params, &th, opts.variant))
}

/// The three outage exponents A (direct), B (typical road) and C (other roads).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutageExponents {
    pub direct: f64,
    pub on_line: f64,
    pub off_line: f64,
}

impl OutageExponents {
    pub fn vehicle(&self) -> f64 {
        self.direct + self.on_line + self.off_line
    }

    pub fn handset(&self) -> f64 {
        self.direct + self.off_line
    }
}

fn on_line_exponent(params: &NetworkParams, th: &Thresholds, opts: &AnalyticOptions) -> Result<f64, AnalyticError> {
    if params.mu == 0.0 {
        return Ok(0.0);
    }
    let variant = opts.variant;
    let integrand = |t: f64| on_line_success(t, params, th, variant);
    let (coefficient, upper) = match variant {
        // The feed term has no exponential factor, so the full range to c₁ is kept.
        Variant::Paper => (params.mu, th.c1),
        Variant::Consistent => (
            2.0 * params.mu,
            th.c1.min(truncation_distance(params.eta_1, opts.epsilon_int)),
        ),
    };
    let scale = params.eta_1.min(params.eta_2);
    let r = integrate_panels(integrand, &geometric_breakpoints(upper, scale), opts.outer())?;
    Ok(coefficient * r.value)
}

fn off_line_exponent(params: &NetworkParams, th: &Thresholds, opts: &AnalyticOptions) -> Result<f64, AnalyticError> {
    if params.mu == 0.0 || params.lambda_l == 0.0 {
        return Ok(0.0);
    }
    let variant = opts.variant;
    let (coefficient, limit) = match variant {
        Variant::Paper => (params.lambda_l, f64::INFINITY),
        Variant::Consistent => (2.0 * params.lambda_l, truncation_distance(params.eta_2, opts.epsilon_int)),
    };
    let c2 = th.c2;
    let inner_tol = opts.inner();
    let mut failure: Option<QuadError> = None;

    // For a road at perpendicular distance u, 1 − exp(−2μ ∫ (1 − f2(√(u²+t²))) dt).
    let per_line = |u: f64| -> f64 {
        if failure.is_some() {
            return 0.0;
        }
        let reach = (c2 * c2 - u * u).max(0.0).sqrt().min(limit);
        let along = |t: f64| off_line_success(u.hypot(t), params, th, variant);
        match integrate_panels(along, &geometric_breakpoints(reach, params.eta_2), inner_tol) {
            Ok(r) => -(-2.0 * params.mu * r.value).exp_m1(),
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    };
    let upper = c2.min(limit);
    let outer = integrate_panels(per_line, &geometric_breakpoints(upper, params.eta_2), opts.outer());
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(coefficient * outer?.value)
}

pub fn outage_exponents(params: &NetworkParams, opts: &AnalyticOptions) -> Result<OutageExponents, AnalyticError> {
    opts.validate()?;
    let th = check_params(params)?;
    Ok(OutageExponents {
        direct: blocked_exponent(th.c0, params),
        on_line: on_line_exponent(params, &th, opts)?,
        off_line: off_line_exponent(params, &th, opts)?,
    })
}

fn probability(name: &'static str, value: f64) -> Result<f64, AnalyticError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(AnalyticError::OutOfRange { name, value })
    }
}

fn coverage_from_exponent(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// Everything derived from one set of outage exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub variant: Variant,
    pub exponents: OutageExponents,
    pub no_ris: f64,
    pub vehicle: f64,
    pub handset: f64,
    /// `None` when both user densities are zero.
    pub total: Option<f64>,
    pub outage_ratio: f64,
    pub gain: Option<f64>,
}

/// Evaluate all coverage quantities with a single pass over the integrals.
pub fn evaluate(params: &NetworkParams, opts: &AnalyticOptions) -> Result<CoverageSummary, AnalyticError> {
    let e = outage_exponents(params, opts)?;
    let no_ris = probability("cov_no_ris", coverage_from_exponent(e.direct))?;
    let vehicle = probability("cov_vehicle", coverage_from_exponent(e.vehicle()))?;
    let handset = probability("cov_handset", coverage_from_exponent(e.handset()))?;
    let weights = params.user_weights();
    let total = match weights {
        Some((w1, w2)) => Some(probability("cov_total", w1 * vehicle + w2 * handset)?),
        None => None,
    };
    let gain = weights.map(|(w1, w2)| 1.0 / (w1 * (-e.on_line - e.off_line).exp() + w2 * (-e.off_line).exp()));
    Ok(CoverageSummary {
        variant: opts.variant,
        exponents: e,
        no_ris,
        vehicle,
        handset,
        total,
        outage_ratio: (-e.on_line).exp(),
        gain,
    })
}

/// Coverage without RISs: 1 − exp(−2πλ·I(c₀, η₂)). Identical in both variants.
pub fn cov_no_ris(params: &NetworkParams, _opts: &AnalyticOptions) -> Result<f64, AnalyticError> {
    let th = check_params(params)?;
    probability("cov_no_ris", coverage_from_exponent(blocked_exponent(th.c0, params)))
}

pub fn cov_vehicle(params: &NetworkParams, opts: &AnalyticOptions) -> Result<f64, AnalyticError> {
    let e = outage_exponents(params, opts)?;
    probability("cov_vehicle", coverage_from_exponent(e.vehicle()))
}

pub fn cov_handset(params: &NetworkParams, opts: &AnalyticOptions) -> Result<f64, AnalyticError> {
    let e = outage_exponents(params, opts)?;
    probability("cov_handset", coverage_from_exponent(e.handset()))
}

pub fn cov_total(params: &NetworkParams, opts: &AnalyticOptions) -> Result<f64, AnalyticError> {
    if params.user_weights().is_none() {
        return Err(AnalyticError::DegenerateMixture);
    }
    evaluate(params, opts)?.total.ok_or(AnalyticError::DegenerateMixture)
}

/// (1 − cov_vehicle)/(1 − cov_handset) = exp(−B).
pub fn outage_ratio(params: &NetworkParams, opts: &AnalyticOptions) -> Result<f64, AnalyticError> {
    let e = outage_exponents(params, opts)?;
    if (-e.handset()).exp() == 0.0 {
        return Err(AnalyticError::UndefinedRatio);
    }
    Ok((-e.on_line).exp())
}

/// Outage without RISs over outage with RISs, from the RIS exponents alone:
/// (w₁·e^{−B−C} + w₂·e^{−C})^{−1}.
pub fn outage_gain(params: &NetworkParams, opts: &AnalyticOptions) -> Result<f64, AnalyticError> {
    if params.user_weights().is_none() {
        return Err(AnalyticError::DegenerateMixture);
    }
    evaluate(params, opts)?.gain.ok_or(AnalyticError::DegenerateMixture)
}

/// The same gain computed as (1 − cov_no_ris)/(1 − cov_total).
pub fn outage_gain_from_outages(params: &NetworkParams, opts: &AnalyticOptions) -> Result<f64, AnalyticError> {
    let s = evaluate(params, opts)?;
    let (w1, w2) = params.user_weights().ok_or(AnalyticError::DegenerateMixture)?;
    let e = s.exponents;
    let without = (-e.direct).exp();
    let with = w1 * (-e.vehicle()).exp() + w2 * (-e.handset()).exp();
    Ok(without / with)
}
