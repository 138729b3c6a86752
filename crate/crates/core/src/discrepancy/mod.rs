//! Local and star discrepancy of point sets on the grid `Q^s(q^m)`.
//!
//! [`star`] counts points directly; [`spectral`] evaluates the exact Walsh
//! expansion of the local discrepancy of a digital Kronecker sequence;
//! [`lambda`] holds the `theta` coefficients and the test functional
//! `Lambda(k*) = sum_x D(x, N) wal_{k*}(x)` computed by both routes.

pub mod lambda;
pub mod spectral;
pub mod star;

pub use lambda::{beta_offset, lambda_functional, theta, theta_by_definition, LambdaReport};
pub use spectral::{
    character_sum, g_factor, j_coefficient, local_discrepancy_walsh, localize_failure, DigitPairing,
    Localization, SpectralTable, SpectralTerm,
};
pub use star::{
    local_discrepancy_brute, local_discrepancy_exact, local_grid_values, star_discrepancy_grid,
    star_discrepancy_sampled, DiscrepancyReport, LocalGrid, Method, PointSetView,
};

/// Default cap on the number of grid cells touched by an exact evaluation.
pub const DEFAULT_GRID_BUDGET: u128 = 1 << 26;
