//! The alpha-majority rule and the welfare analysis built on it.
//!
//! A proposal passes when the number of agents who gain from it strictly
//! exceeds `alpha * n`. Everything of interest about that rule reduces to
//! the absolute threshold `n0 = floor(alpha * n)`: the proposal is
//! accepted iff at least `n0 + 1` components are positive, `n0 = -1`
//! accepts everything and `n0 = n` rejects everything.
//!
//! The expected one-step utility increment of an agent has three
//! equivalent analytic forms (a binomial sum, a Beta-CDF pairing, and a
//! single regularized-incomplete-beta expression); all three are
//! implemented and tested against each other. On top of them sit the
//! optimal relative threshold `alpha0`, its closed forms per family, the
//! finite-`n` ladder of optimal absolute thresholds, and the curve
//! tables the command-line front end emits.

use serde::Serialize;

use crate::environments::{DistributionSpec, EnvironmentStats, Family, FamilySweep, SpecError};
use crate::numerics::{self, CompensatedSum, NumericsError};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Errors from rule construction and expectation evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VotingError {
    #[error("{0}")]
    InvalidRule(String),
    #[error("n0 must lie in -1..={n}, got {n0}")]
    ThresholdOutOfRange { n0: i64, n: u64 },
    #[error("degenerate environment: {0}")]
    DegenerateEnvironment(String),
    #[error("proposal has {got} components, rule expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// An alpha-majority rule for a society of `n` agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VotingRule {
    pub n: u64,
    pub alpha: f64,
    /// Absolute threshold `floor(alpha * n)`; acceptance needs at least
    /// `n0 + 1` supporting votes.
    pub n0: i64,
}

// floor(alpha * n) with a snap window: products that land within
// 1e-9 * n of an integer are taken as that integer, so thresholds meant
// as x/n survive the rounding of alpha (0.3 * 10.0 multiplies out to
// 2.9999999999999996, and 11/21 scaled back by 21 overshoots 11).
fn absolute_threshold(alpha: f64, n: u64) -> i64 {
    let t = alpha * n as f64;
    let nearest = t.round();
    let snapped = if (t - nearest).abs() <= 1e-9 * n as f64 {
        nearest
    } else {
        t.floor()
    };
    (snapped as i64).clamp(-1, n as i64)
}

impl VotingRule {
    /// Builds the rule for relative threshold `alpha` in `[-1/n, 1]`.
    pub fn new(n: u64, alpha: f64) -> Result<Self, VotingError> {
        if n == 0 {
            return Err(VotingError::InvalidRule(
                "society size must be positive".into(),
            ));
        }
        let lo = -1.0 / n as f64;
        if !alpha.is_finite() || alpha < lo - 1e-9 || alpha > 1.0 {
            return Err(VotingError::InvalidRule(format!(
                "alpha must lie in [{lo}, 1], got {alpha}"
            )));
        }
        Ok(VotingRule {
            n,
            alpha,
            n0: absolute_threshold(alpha, n),
        })
    }

    /// Builds the rule from an absolute threshold, with `alpha` placed at
    /// the center of the half-open interval that maps onto `n0`.
    pub fn from_absolute(n: u64, n0: i64) -> Result<Self, VotingError> {
        check_threshold(n, n0)?;
        Ok(VotingRule {
            n,
            alpha: (n0 as f64 + 0.5) / n as f64,
            n0,
        })
    }

    /// The acceptance indicator: true iff the count of strictly positive
    /// components exceeds `alpha * n`.
    pub fn indicator(&self, proposal: &[f64]) -> Result<bool, VotingError> {
        if proposal.len() != self.n as usize {
            return Err(VotingError::LengthMismatch {
                expected: self.n as usize,
                got: proposal.len(),
            });
        }
        let support = proposal.iter().filter(|&&z| z > 0.0).count() as i64;
        Ok(support > self.n0)
    }
}

fn check_threshold(n: u64, n0: i64) -> Result<(), VotingError> {
    if n == 0 {
        return Err(VotingError::InvalidRule(
            "society size must be positive".into(),
        ));
    }
    if n0 < -1 || n0 > n as i64 {
        return Err(VotingError::ThresholdOutOfRange { n0, n });
    }
    Ok(())
}

fn check_interior_threshold(n: u64, n0: i64) -> Result<(), VotingError> {
    check_threshold(n, n0)?;
    if n0 < 1 || n0 > n as i64 - 1 {
        return Err(VotingError::ThresholdOutOfRange { n0, n });
    }
    Ok(())
}

// x * ln(y) with the 0 * (-inf) = 0 convention for vanishing exponents.
fn xlny(x: f64, ln_y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * ln_y
    }
}

/// Expected one-step increment as the explicit binomial sum
/// `sum_{x=n0+1}^{n} ((E+ + E-) x/n - E-) C(n,x) p^x q^{n-x}`.
///
/// Terms are assembled in log space with one exponentiation each and
/// accumulated compensated, so thin tails at n in the hundreds keep
/// their digits. `n0 = -1` returns `mu` and `n0 = n` returns 0 exactly.
pub fn expected_increment_sum(
    stats: &EnvironmentStats,
    n: u64,
    n0: i64,
) -> Result<f64, VotingError> {
    check_threshold(n, n0)?;
    if n0 == -1 {
        return Ok(stats.mu);
    }
    if n0 == n as i64 {
        return Ok(0.0);
    }
    let ln_p = stats.p.ln();
    let ln_q = stats.q.ln();
    let nf = n as f64;
    let span = stats.e_plus + stats.e_minus;
    let mut sum = CompensatedSum::new();
    for x in (n0 + 1)..=(n as i64) {
        let xf = x as f64;
        let ln_weight =
            numerics::log_binomial_coefficient(n, x) + xlny(xf, ln_p) + xlny(nf - xf, ln_q);
        sum.add((span * xf / nf - stats.e_minus) * ln_weight.exp());
    }
    Ok(sum.value())
}

/// Closed form for the zero relative threshold (`n0 = 0`):
/// `mu + E- q^n`.
pub fn expected_increment_zero_threshold(stats: &EnvironmentStats, n: u64) -> f64 {
    stats.mu + stats.e_minus * stats.q.powf(n as f64)
}

/// Expected increment through two Beta CDFs:
/// `p (E+ + E-) I_p(n0, n-n0) - E- I_p(n0+1, n-n0)`.
///
/// Stated for interior thresholds only; the edges have exact short
/// circuits and are rejected here.
pub fn expected_increment_beta(
    stats: &EnvironmentStats,
    n: u64,
    n0: i64,
) -> Result<f64, VotingError> {
    check_interior_threshold(n, n0)?;
    let a = n0 as f64;
    let b = (n as i64 - n0) as f64;
    let i_lo = numerics::regularized_incomplete_beta(stats.p, a, b)?;
    let i_hi = numerics::regularized_incomplete_beta(stats.p, a + 1.0, b)?;
    Ok(stats.p * (stats.e_plus + stats.e_minus) * i_lo - stats.e_minus * i_hi)
}

/// Expected increment as a single regularized-incomplete-beta expression:
/// `mu I_p(n0, n-n0) + E- p^{n0} q^{n-n0} / (n0 B(n0, n-n0))`.
pub fn expected_increment_incomplete_beta(
    stats: &EnvironmentStats,
    n: u64,
    n0: i64,
) -> Result<f64, VotingError> {
    check_interior_threshold(n, n0)?;
    let a = n0 as f64;
    let b = (n as i64 - n0) as f64;
    let i_lo = numerics::regularized_incomplete_beta(stats.p, a, b)?;
    let ln_tail = a * stats.p.ln() + b * stats.q.ln() - a.ln() - numerics::log_beta_function(a, b)?;
    Ok(stats.mu * i_lo + stats.e_minus * ln_tail.exp())
}

/// Expected increment for any admissible threshold, routing the edges to
/// their exact short circuits and the interior to the Beta form.
pub fn expected_increment(stats: &EnvironmentStats, n: u64, n0: i64) -> Result<f64, VotingError> {
    check_threshold(n, n0)?;
    if n0 == -1 {
        Ok(stats.mu)
    } else if n0 == 0 {
        Ok(expected_increment_zero_threshold(stats, n))
    } else if n0 == n as i64 {
        Ok(0.0)
    } else {
        expected_increment_beta(stats, n, n0)
    }
}

/// Why an optimal threshold collapsed to a pure policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Degeneracy {
    /// Every proposal gains every agent; the optimum accepts without voting.
    AcceptAll,
    /// No proposal ever gains anyone; the optimum rejects without voting.
    RejectAll,
}

/// The optimal relative threshold, with a flag for environments where
/// the defining ratio is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalThreshold {
    pub alpha0: f64,
    pub degeneracy: Option<Degeneracy>,
}

/// Optimal relative threshold `alpha0 = E- / (E+ + E-)`.
///
/// For `p = 0` or `p = 1` one conditional mean is undefined and the
/// welfare-maximizing policy is a pure one; that is reported through the
/// degeneracy flag instead of a silent number.
pub fn optimal_threshold_general(stats: &EnvironmentStats) -> OptimalThreshold {
    if stats.p <= 0.0 {
        OptimalThreshold {
            alpha0: 1.0,
            degeneracy: Some(Degeneracy::RejectAll),
        }
    } else if stats.p >= 1.0 {
        OptimalThreshold {
            alpha0: 0.0,
            degeneracy: Some(Degeneracy::AcceptAll),
        }
    } else {
        OptimalThreshold {
            alpha0: stats.e_minus / (stats.e_plus + stats.e_minus),
            degeneracy: None,
        }
    }
}

/// Closed-form `alpha0` for the uniform family: affine in `rho` on
/// `(-sqrt3, sqrt3)` and clamped to the pure policies outside.
pub fn alpha0_uniform(rho: f64) -> f64 {
    if rho <= -SQRT_3 {
        1.0
    } else if rho >= SQRT_3 {
        0.0
    } else {
        0.5 * (1.0 - rho / SQRT_3)
    }
}

/// Closed-form `alpha0` for the normal family.
pub fn alpha0_normal(rho: f64) -> f64 {
    // Beyond |rho| ~ 37 the density underflows; the limits are exact there.
    if rho <= -37.0 {
        return 1.0;
    }
    if rho >= 37.0 {
        return 0.0;
    }
    let cdf = numerics::std_normal_cdf(rho);
    cdf * (1.0 - rho * numerics::std_normal_cdf(-rho) / numerics::std_normal_pdf(rho))
}

/// Closed-form `alpha0` for the symmetrized Pareto family with shape `k`.
/// `sign(0)` is taken as 0, making the two signed branches meet at 1/2.
pub fn alpha0_symmetrized_pareto(k: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.5;
    }
    let c = ((k - 1.0) * (k - 2.0) / 2.0).sqrt();
    let rh = (rho / c).abs();
    let t = (1.0 - (k - 2.0) * rh - (1.0 + rh).powf(1.0 - k)) / (1.0 + k * rh);
    0.5 * (1.0 + rho.signum() * t)
}

/// Closed-form `alpha0` for the Laplace family; `sign(0)` taken as 0.
pub fn alpha0_laplace(rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.5;
    }
    let r = std::f64::consts::SQRT_2 * rho.abs();
    0.5 * (1.0 + rho.signum() * (1.0 - r - (-r).exp()) / (1.0 + r))
}

/// d alpha0 / d rho for the Laplace family. Even in `rho`, non-positive
/// everywhere, and zero only at `rho = 0`.
pub fn laplace_alpha0_derivative(rho: f64) -> f64 {
    let r = rho.abs();
    let s = std::f64::consts::SQRT_2;
    ((-s * r).exp() * (s + r) - s) / (1.0 + s * r).powi(2)
}

fn alpha0_for_family(family: Family, rho: f64) -> f64 {
    match family {
        Family::Uniform => alpha0_uniform(rho),
        Family::Normal => alpha0_normal(rho),
        Family::SymmetrizedPareto { k } => alpha0_symmetrized_pareto(k, rho),
        Family::Laplace => alpha0_laplace(rho),
    }
}

/// Closed-form optimal threshold dispatched on the spec's family.
pub fn optimal_threshold_closed_form(spec: &DistributionSpec) -> Result<f64, SpecError> {
    let stats = spec.stats()?;
    Ok(alpha0_for_family(spec.family(), stats.rho))
}

/// The ladder step of optimal absolute thresholds for a finite society.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdLadder {
    pub n: u64,
    pub n0_star: i64,
    /// Half-open interval `[interval_lo, interval_hi)` of relative
    /// thresholds that all map onto `n0_star`; one step is `1/n` wide.
    pub interval_lo: f64,
    pub interval_hi: f64,
    /// Interval center, the canonical finite-`n` threshold.
    pub center: f64,
}

/// Optimal absolute threshold for a society of `n`, by counting the
/// summands of the expectation that are strictly worth keeping.
///
/// A term at `x/n = alpha0` exactly contributes zero; leaving it inside
/// the accepted range keeps `n0` at the smaller of the tied optima.
pub fn optimal_absolute_threshold(
    stats: &EnvironmentStats,
    n: u64,
) -> Result<ThresholdLadder, VotingError> {
    if n == 0 {
        return Err(VotingError::InvalidRule(
            "society size must be positive".into(),
        ));
    }
    if !(stats.p > 0.0 && stats.p < 1.0) {
        return Err(VotingError::DegenerateEnvironment(format!(
            "p = {} leaves no voting tradeoff",
            stats.p
        )));
    }
    let alpha0 = stats.e_minus / (stats.e_plus + stats.e_minus);
    let nf = n as f64;
    let n0_star = (1..=n).filter(|&x| (x as f64) / nf < alpha0).count() as i64;
    let interval_lo = n0_star as f64 / nf;
    let interval_hi = (n0_star + 1) as f64 / nf;
    Ok(ThresholdLadder {
        n,
        n0_star,
        interval_lo,
        interval_hi,
        center: 0.5 * (interval_lo + interval_hi),
    })
}

/// Closed-form `alpha0` along a rho grid with the family's shape frozen.
pub fn alpha0_curve(sweep: FamilySweep, rho_grid: &[f64]) -> Result<Vec<(f64, f64)>, SpecError> {
    sweep.validate()?;
    let family = sweep.family();
    Ok(rho_grid
        .iter()
        .map(|&rho| (rho, alpha0_for_family(family, rho)))
        .collect())
}

/// Ladder centers along a rho grid. Grid points the family cannot
/// realize (a uniform sweep beyond |rho| = sqrt3) carry `None`.
pub fn ladder_curve(
    sweep: FamilySweep,
    n: u64,
    rho_grid: &[f64],
) -> Result<Vec<(f64, Option<f64>)>, VotingError> {
    sweep.validate().map_err(VotingError::from)?;
    rho_grid
        .iter()
        .map(|&rho| match sweep.spec_at_rho(rho) {
            None => Ok((rho, None)),
            Some(spec) => {
                let stats = spec.stats()?;
                optimal_absolute_threshold(&stats, n).map(|ladder| (rho, Some(ladder.center)))
            }
        })
        .collect()
}

/// How the acceptance threshold is chosen along an expectation curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// One relative threshold for the whole sweep.
    Fixed(f64),
    /// The per-point optimal absolute threshold.
    Optimal,
}

/// Expected increment along a mu grid, under a fixed relative threshold
/// or the per-point optimal one. Unrealizable grid points carry `None`.
pub fn expectation_curve(
    sweep: FamilySweep,
    n: u64,
    mode: ThresholdMode,
    mu_grid: &[f64],
) -> Result<Vec<(f64, Option<f64>)>, VotingError> {
    sweep.validate().map_err(VotingError::from)?;
    let fixed_n0 = match mode {
        ThresholdMode::Fixed(alpha) => Some(VotingRule::new(n, alpha)?.n0),
        ThresholdMode::Optimal => None,
    };
    mu_grid
        .iter()
        .map(|&mu| match sweep.spec_at_mu(mu) {
            None => Ok((mu, None)),
            Some(spec) => {
                let stats = spec.stats()?;
                let n0 = match fixed_n0 {
                    Some(n0) => n0,
                    None => optimal_absolute_threshold(&stats, n)?.n0_star,
                };
                expected_increment(&stats, n, n0).map(|value| (mu, Some(value)))
            }
        })
        .collect()
}
