//! Coverage of cellular networks whose roads carry reconfigurable intelligent
//! surfaces (RISs).
//!
//! Two independent engines evaluate the LOS coverage probability of a typical
//! vehicle user, a typical handset user and their population mixture:
//! [`montecarlo`] simulates the spatial model directly, [`analytic`] evaluates
//! the closed-form/integral expressions by nested adaptive quadrature.

pub mod analytic;
pub mod channel;
pub mod geometry;
pub mod montecarlo;
pub mod params;
pub mod quadrature;

pub use analytic::{AnalyticError, AnalyticOptions, CoverageSummary, Variant};
pub use geometry::AngleMode;
pub use montecarlo::{estimate_handset, estimate_no_ris, estimate_populations, estimate_total, estimate_vehicle, CoverageEstimate, Estimator, SimConfig, SimError};

pub use params::{derived_thresholds, gamma_from_budget, LinkBudget, NetworkParams, Thresholds};
