//! LOS probabilities and SNR predicates for the two link classes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{NetworkParams, Thresholds};

/// Which path-loss exponent and blockage parameter apply to a link.
///
/// Only an on-road RIS serving a vehicle on the same road is `Linear`.
/// Base-station links (to users and to RISs) are always `Planar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkClass {
    Linear,
    Planar,
}

impl LinkClass {
    pub fn exponent(self, params: &NetworkParams) -> f64 {
        match self {
            LinkClass::Linear => params.alpha_1,
            LinkClass::Planar => params.alpha_2,
        }
    }

    pub fn blockage(self, params: &NetworkParams) -> f64 {
        match self {
            LinkClass::Linear => params.eta_1,
            LinkClass::Planar => params.eta_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("degenerate link geometry: d1 = {d1} m, d2 = {d2} m")]
pub struct DegenerateLink {
    pub d1: f64,
    pub d2: f64,
}

/// Probability that a link of length `d` is not blocked: exp(−d/η).
#[inline]
pub fn los_probability(d: f64, eta: f64) -> f64 {
    (-d / eta).exp()
}

/// Direct BS link clears the threshold iff d < c0.
#[inline]
pub fn direct_snr_ok(d: f64, th: &Thresholds) -> bool {
    d < th.c0
}

/// Two-hop SNR γ·N_r²·d1^{−α₂}·d2^{−α} against τ.
pub fn reflected_snr_ok(
    d1: f64,
    d2: f64,
    class: LinkClass,
    params: &NetworkParams,
) -> Result<bool, DegenerateLink> {
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(DegenerateLink { d1, d2 });
    }
    let alpha = class.exponent(params);
    // Compare in the log domain so tiny thresholds and long links stay finite.
    let log_snr = params.reflected_budget().ln() - params.alpha_2 * d1.ln() - alpha * d2.ln();
    Ok(log_snr > 0.0)
}

/// Largest BS-to-RIS distance that still clears τ when the RIS is `d2` from the user:
/// (γN_r²/τ · d2^{−α})^{1/α₂}. `reflected_snr_ok(d1, d2, ..)` holds iff d1 < this.
pub fn feed_radius(d2: f64, class: LinkClass, params: &NetworkParams) -> f64 {
    let alpha = class.exponent(params);
    ((params.reflected_budget().ln() - alpha * d2.ln()) / params.alpha_2).exp()
}

/// Distance beyond which the LOS probability drops below `epsilon`: η·ln(1/ε).
pub fn truncation_distance(eta: f64, epsilon: f64) -> f64 {
    eta * (1.0 / epsilon).ln()
}
