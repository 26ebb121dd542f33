//! Model parameters, unit conversions and the threshold radii derived from them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Convert a dB (or dBm) quantity to its linear value.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a linear power ratio to dB.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Densities as written in network tables: per km² and per km.
pub fn per_km2_to_per_m2(v: f64) -> f64 {
    v * 1e-6
}

pub fn per_km_to_per_m(v: f64) -> f64 {
    v * 1e-3
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("densities must be nonnegative ({name} = {value})")]
    NegativeDensity { name: &'static str, value: f64 },
    #[error("{name} must be at least 2 (got {value})")]
    PathLossExponent { name: &'static str, value: f64 },
    #[error("{name} must be positive (got {value})")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be finite (got {value})")]
    NotFinite { name: &'static str, value: f64 },
    #[error("n_r must be at least 1 (got {0})")]
    ElementCount(u32),
    #[error("link budget yields a non-finite gain")]
    InvalidBudget,
}

/// Transmit/receive chain constants that determine the link-budget gain.
///
/// Powers and gains are in dB/dBm, frequencies and bandwidths in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    pub p_t_dbm: f64,
    pub g_t_db: f64,
    pub g_r_db: f64,
    pub f_c_hz: f64,
    #[serde(default)]
    pub l_p_db: f64,
    #[serde(default)]
    pub l_r_db: f64,
    #[serde(default = "default_noise_psd")]
    pub n0_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
}

fn default_noise_psd() -> f64 {
    -174.0
}

impl LinkBudget {
    /// The budget used for the no-RIS coverage figures (23 dBm, 5 dB antennas,
    /// 6 GHz, 10 MHz, 6 dB noise figure). Both loss terms default to 0 dB.
    pub fn reference() -> Self {
        Self {
            p_t_dbm: 23.0,
            g_t_db: 5.0,
            g_r_db: 5.0,
            f_c_hz: 6e9,
            l_p_db: 0.0,
            l_r_db: 0.0,
            n0_dbm_per_hz: -174.0,
            bandwidth_hz: 10e6,
            noise_figure_db: 6.0,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.f_c_hz > 0.0) {
            return Err(ParamError::NotPositive { name: "f_c_hz", value: self.f_c_hz });
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(ParamError::NotPositive { name: "bandwidth_hz", value: self.bandwidth_hz });
        }
        let finite = [
            ("p_t_dbm", self.p_t_dbm),
            ("g_t_db", self.g_t_db),
            ("g_r_db", self.g_r_db),
            ("l_p_db", self.l_p_db),
            ("l_r_db", self.l_r_db),
            ("n0_dbm_per_hz", self.n0_dbm_per_hz),
            ("noise_figure_db", self.noise_figure_db),
            ("f_c_hz", self.f_c_hz),
            ("bandwidth_hz", self.bandwidth_hz),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(ParamError::NotFinite { name, value });
            }
        }
        Ok(())
    }

    /// Noise floor N0 + 10·log10(B_W) + F, dBm.
    pub fn noise_floor_dbm(&self) -> f64 {
        self.n0_dbm_per_hz + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c_hz
    }

    /// Link-budget gain in dB.
    pub fn gamma_db(&self) -> f64 {
        let spreading = 20.0 * (self.wavelength_m() / 4.0).log10();
        self.p_t_dbm + self.g_t_db + self.g_r_db + spreading
            - self.l_p_db
            - self.l_r_db
            - self.noise_floor_dbm()
    }
}

/// Linear gain γ = p_t·G_t·G_r·(λ_c/4)² / (L_p·L_r·N_0·B_W·F).
pub fn gamma_from_budget(budget: &LinkBudget) -> Result<f64, ParamError> {
    budget.validate()?;
    let gamma = db_to_linear(budget.gamma_db());
    if gamma.is_finite() && gamma > 0.0 {
        Ok(gamma)
    } else {
        Err(ParamError::InvalidBudget)
    }
}

/// Every model constant, in SI units (meters, per m, per m²) and linear scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Base-station density, per m².
    pub lambda_bs: f64,
    /// Road length per unit area, m per m².
    pub lambda_l: f64,
    /// RISs per m of road.
    pub mu: f64,
    /// Vehicle users per m of road.
    pub nu: f64,
    /// Handset users per m².
    pub lambda_2: f64,
    /// Path-loss exponent of on-road RIS-to-vehicle links.
    pub alpha_1: f64,
    /// Path-loss exponent of every other link.
    pub alpha_2: f64,
    /// Blockage parameter of on-road links, m.
    pub eta_1: f64,
    /// Blockage parameter of every other link, m.
    pub eta_2: f64,
    /// SNR threshold, linear.
    pub tau: f64,
    /// Link-budget gain, linear.
    pub gamma: f64,
    /// Number of RIS elements.
    pub n_r: u32,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self::table_defaults()
    }
}

impl NetworkParams {
    /// Benchmark network: 40 BS/km², 2 km of road per km², 4 RIS/km,
    /// 25 vehicles/km, 200 handsets/km², α = 2.4/3.7, η = 48/36 m,
    /// γ = 97 dB, τ = 0 dB, 64 elements.
    pub fn table_defaults() -> Self {
        Self {
            lambda_bs: per_km2_to_per_m2(40.0),
            lambda_l: per_km_to_per_m(2.0),
            mu: per_km_to_per_m(4.0),
            nu: per_km_to_per_m(25.0),
            lambda_2: per_km2_to_per_m2(200.0),
            alpha_1: 2.4,
            alpha_2: 3.7,
            eta_1: 48.0,
            eta_2: 36.0,
            tau: 1.0,
            gamma: db_to_linear(97.0),
            n_r: 64,
        }
    }

    /// Check every invariant, collecting all violations.
    pub fn validate(&self) -> Result<(), Vec<ParamError>> {
        let mut errors = Vec::new();
        let densities = [
            ("lambda_bs", self.lambda_bs),
            ("lambda_l", self.lambda_l),
            ("mu", self.mu),
            ("nu", self.nu),
            ("lambda_2", self.lambda_2),
        ];
        for (name, value) in densities {
            if !value.is_finite() {
                errors.push(ParamError::NotFinite { name, value });
            } else if value < 0.0 {
                errors.push(ParamError::NegativeDensity { name, value });
            }
        }
        for (name, value) in [("alpha_1", self.alpha_1), ("alpha_2", self.alpha_2)] {
            if !value.is_finite() {
                errors.push(ParamError::NotFinite { name, value });
            } else if value < 2.0 {
                errors.push(ParamError::PathLossExponent { name, value });
            }
        }
        let positive = [
            ("eta_1", self.eta_1),
            ("eta_2", self.eta_2),
            ("tau", self.tau),
            ("gamma", self.gamma),
        ];
        for (name, value) in positive {
            if !value.is_finite() {
                errors.push(ParamError::NotFinite { name, value });
            } else if value <= 0.0 {
                errors.push(ParamError::NotPositive { name, value });
            }
        }
        if self.n_r < 1 {
            errors.push(ParamError::ElementCount(self.n_r));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn validated(self) -> Result<Self, Vec<ParamError>> {
        self.validate().map(|()| self)
    }

    /// Mixture weights (vehicle, handset) of the typical user.
    pub fn user_weights(&self) -> Option<(f64, f64)> {
        let vehicles = self.lambda_l * self.nu;
        let total = vehicles + self.lambda_2;
        if total > 0.0 {
            Some((vehicles / total, self.lambda_2 / total))
        } else {
            None
        }
    }

    /// γ·N_r²/τ, the largest tolerable two-hop path loss.
    pub fn reflected_budget(&self) -> f64 {
        let n = f64::from(self.n_r);
        self.gamma * n * n / self.tau
    }
}

/// Distances beyond which a link class cannot reach the SNR threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Maximum direct-serve distance, m.
    pub c0: f64,
    /// Maximum on-road RIS distance, m.
    pub c1: f64,
    /// Maximum planar RIS distance, m.
    pub c2: f64,
    /// α₁/α₂.
    pub rho: f64,
}

pub fn derived_thresholds(params: &NetworkParams) -> Thresholds {
    let reflected = params.reflected_budget();
    Thresholds {
        c0: (params.gamma / params.tau).powf(1.0 / params.alpha_2),
        c1: reflected.powf(1.0 / params.alpha_1),
        c2: reflected.powf(1.0 / params.alpha_2),
        rho: params.alpha_1 / params.alpha_2,
    }
}
