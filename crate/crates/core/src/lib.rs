//! Voting in a stochastic environment.
//!
//! A society of `n` egoist agents repeatedly votes on random proposals; a
//! proposal passes when the share of supporters exceeds a relative
//! threshold alpha. This crate computes the statistics of that process for
//! four proposal-generating environments (uniform, normal, symmetrized
//! Pareto, Laplace): expected one-step capital increments under any
//! threshold, the socially optimal threshold alpha0 with its finite-n
//! ladder, curve tables behind the usual figures, and a reproducible
//! Monte Carlo engine for cross-checking the closed forms.

pub mod environments;
pub mod montecarlo;
pub mod numerics;
pub mod voting;

pub use environments::{
    standardize_by_quartile, DistributionSpec, EnvironmentStats, Family, FamilySweep, SpecError,
};
pub use montecarlo::{
    estimate_expected_increment, run_dynamics, simulate_step, RngStream, SimulationError,
    SimulationReport, Trajectory,
};
pub use numerics::{CompensatedSum, NumericsError, Tolerance};
pub use voting::{
    expected_increment, optimal_absolute_threshold, optimal_threshold_closed_form,
    optimal_threshold_general, Degeneracy, OptimalThreshold, ThresholdLadder, ThresholdMode,
    VotingError, VotingRule,
};
