//! Analytic models and simulators for base-station-assisted device-to-device
//! (D2D) video caching in a single square cell.
//!
//! The cell is split into square clusters of side `r` (the collaboration
//! distance). At most one D2D link can be active per cluster, so the figure of
//! merit is the expected number of active clusters `E[A]`. This crate provides:
//!
//! * [`popularity`]: truncated Zipf request and caching distributions.
//! * [`cell`]: the cell configuration and the binomial cluster occupancy law.
//! * [`analytic_det`]: closed-form `E[A]`, self-requests and download delay
//!   under deterministic (top-k, no repetition) caching.
//! * [`analytic_rand`]: `E[A]` under random Zipf caching, by exact enumeration
//!   or stratified Monte Carlo.
//! * [`optimize`]: collaboration-distance and caching-exponent search, and
//!   asymptotic scaling fits.
//! * [`geo_sim`]: a protocol-model geometric simulator used as an independent
//!   oracle for the analytic expressions.
//! * [`phy_sim`]: a pathloss/shadowing/SINR simulator with iterative link
//!   scheduling.
//!
//! The crate is `no_std` (with `alloc`) when built without the `std` feature.
//! The `parallel` feature spreads independent Monte Carlo work over rayon
//! without changing any result bit.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![warn(rust_2018_idioms, missing_debug_implementations)]

extern crate alloc;

pub mod analytic_det;
pub mod analytic_rand;
pub mod cell;
mod error;
mod exec;
pub mod geo_sim;
pub mod numeric;
pub mod optimize;
pub mod phy_sim;
pub mod popularity;
mod stream;

pub use analytic_det::{
    det_active_given_k, det_delay_objective, det_expected_active, DelayWeights, DetPoint,
};
pub use analytic_rand::{
    rand_active_given_profile, rand_expected_active_exact, rand_expected_active_mc, CacheProfile,
    RandCachingParams, RandEstimate, RandVariant,
};
pub use cell::{cluster_occupancy_pmf, CellConfig, OccupancyPmf};
pub use error::{Error, Result};
pub use geo_sim::{run_trials, CachingMode, ClusterGrid, ClusterRealization, GeoSummary};
pub use optimize::{
    fit_asymptotics, optimize_r_deterministic, optimize_r_gamma_random, AsymptoticFit,
    DetObjective, ObjectiveKind, OptimumReport, SweepGrid,
};
pub use phy_sim::{
    rate_vs_r_sweep, schedule_links, ChannelParams, NoiseFloor, PhyLinkSchedule, RateSweep,
};
pub use popularity::PopularityModel;

/// Side of the simulated square cell. Chosen so that a grid of clusters of
/// side `r` has `2 / r^2` clusters and each covers a fraction `r^2 / 2` of
/// the cell, exactly as the analytic model counts them.
pub const CELL_SIDE: f64 = core::f64::consts::SQRT_2;

/// Human-readable statement of the geometry convention, stamped into outputs.
pub const GEOMETRY_CONVENTION: &str = "square cell of side sqrt(2); \
    floor(sqrt(2)/r)^2 square clusters of side r; users outside the cluster grid are BS-served; \
    analytic cluster count 2/r^2 used as a real number";
