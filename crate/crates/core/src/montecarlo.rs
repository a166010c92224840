//! Seedable Monte Carlo simulation of the voting process.
//!
//! Streams are counter-based: every variate is a pure function of
//! (seed, stream id, counter), so replications can run in any order or
//! in parallel and still reproduce bit for bit. On top of the streams
//! sit a one-proposal step, an expectation estimator that serves as an
//! independent check on the analytic formulas, and a utility-trajectory
//! generator.

use rayon::prelude::*;
use serde::Serialize;

use crate::environments::{DistributionSpec, SpecError};
use crate::numerics::CompensatedSum;
use crate::voting::{VotingError, VotingRule};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

// Finalizer from splitmix64; full-period bijection on u64.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A splittable counter-based random stream.
///
/// Identical `(seed, stream_id)` pairs yield identical sequences;
/// distinct stream ids decorrelate through the mixing rounds.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    counter: u64,
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let key = mix64(seed.wrapping_add(mix64(stream_id.wrapping_mul(GOLDEN))));
        RngStream {
            key,
            counter: 0,
            seed,
            stream_id,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        let x = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter += 1;
        x
    }

    /// Uniform variate strictly inside (0, 1): the top 53 bits centered
    /// on the representable grid, so inverse-CDF transforms never see an
    /// endpoint.
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }
}

/// Errors from the simulation drivers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("replications must be at least 2, got {0}")]
    TooFewReplications(u64),
    #[error("steps must be at least 1, got {0}")]
    TooFewSteps(u64),
    #[error(transparent)]
    Voting(#[from] VotingError),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// Summary of a replicated one-step estimation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub mean_increment: f64,
    /// Sample standard deviation divided by sqrt(replications).
    pub std_error: f64,
    pub acceptance_rate: f64,
    pub replications: u64,
    pub n: u64,
    pub alpha: f64,
    pub seed: u64,
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Cumulative utilities of every agent over a run of votes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub steps: u64,
    pub n: u64,
    /// Row t holds each agent's cumulative utility after step t+1; rows
    /// differ by the accepted proposal vector or by nothing at all.
    pub utilities: Vec<Vec<f64>>,
    pub accepted: Vec<bool>,
}

impl Trajectory {
    /// One row per step: `step,agent_1,..,agent_n,accepted` with the
    /// acceptance flag as 0/1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step");
        for i in 1..=self.n {
            out.push_str(&format!(",agent_{i}"));
        }
        out.push_str(",accepted\n");
        for (t, row) in self.utilities.iter().enumerate() {
            out.push_str(&format!("{}", t + 1));
            for u in row {
                out.push_str(&format!(",{u:.11e}"));
            }
            out.push_str(if self.accepted[t] { ",1\n" } else { ",0\n" });
        }
        out
    }
}

/// Draws one proposal and puts it to the vote.
///
/// Consumes exactly `rule.n` variates from the stream, in component
/// order. Returns the acceptance flag and the realized increments: the
/// proposal itself when accepted, zeros when rejected.
pub fn simulate_step(
    spec: &DistributionSpec,
    rule: &VotingRule,
    stream: &mut RngStream,
) -> (bool, Vec<f64>) {
    let mut proposal = Vec::with_capacity(rule.n as usize);
    for _ in 0..rule.n {
        proposal.push(spec.sample(stream));
    }
    let accepted = rule
        .indicator(&proposal)
        .expect("proposal length matches the rule");
    if !accepted {
        proposal.iter_mut().for_each(|z| *z = 0.0);
    }
    (accepted, proposal)
}

// Replications per parallel work unit. Partial sums are formed per
// block and folded in block order, so the result is bit-identical for
// any thread count, including one.
const REPLICATION_BLOCK: u64 = 8192;

/// Estimates the expected one-step increment by replicated simulation.
///
/// Each replication runs on its own stream keyed by (seed, replication
/// index) and contributes the first agent's realized increment; agents
/// are exchangeable, and a fixed index keeps the replicates i.i.d. so
/// the standard error is the plain sample formula.
pub fn estimate_expected_increment(
    spec: &DistributionSpec,
    n: u64,
    alpha: f64,
    replications: u64,
    seed: u64,
) -> Result<SimulationReport, SimulationError> {
    if replications < 2 {
        return Err(SimulationError::TooFewReplications(replications));
    }
    spec.validate()?;
    let rule = VotingRule::new(n, alpha)?;
    let blocks = replications.div_ceil(REPLICATION_BLOCK);
    let partials: Vec<(f64, f64, u64)> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let lo = block * REPLICATION_BLOCK;
            let hi = ((block + 1) * REPLICATION_BLOCK).min(replications);
            let mut sum = CompensatedSum::new();
            let mut sum_sq = CompensatedSum::new();
            let mut accepted_count = 0u64;
            for replication in lo..hi {
                let mut stream = RngStream::new(seed, replication);
                let (accepted, increments) = simulate_step(spec, &rule, &mut stream);
                let x = increments[0];
                sum.add(x);
                sum_sq.add(x * x);
                accepted_count += u64::from(accepted);
            }
            (sum.value(), sum_sq.value(), accepted_count)
        })
        .collect();
    let mut sum = CompensatedSum::new();
    let mut sum_sq = CompensatedSum::new();
    let mut accepted_count = 0u64;
    for &(s, ss, c) in &partials {
        sum.add(s);
        sum_sq.add(ss);
        accepted_count += c;
    }
    let reps = replications as f64;
    let mean = sum.value() / reps;
    let variance = ((sum_sq.value() - reps * mean * mean) / (reps - 1.0)).max(0.0);
    Ok(SimulationReport {
        mean_increment: mean,
        std_error: (variance / reps).sqrt(),
        acceptance_rate: accepted_count as f64 / reps,
        replications,
        n,
        alpha,
        seed,
    })
}

/// Runs the voting process for `steps` votes, accumulating utilities
/// from zero. Step t draws from the stream keyed by (seed, t), so any
/// step of a trajectory can be replayed in isolation.
pub fn run_dynamics(
    spec: &DistributionSpec,
    n: u64,
    alpha: f64,
    steps: u64,
    seed: u64,
) -> Result<Trajectory, SimulationError> {
    if steps < 1 {
        return Err(SimulationError::TooFewSteps(steps));
    }
    spec.validate()?;
    let rule = VotingRule::new(n, alpha)?;
    let mut utilities = Vec::with_capacity(steps as usize);
    let mut accepted = Vec::with_capacity(steps as usize);
    let mut current = vec![0.0; n as usize];
    for step in 0..steps {
        let mut stream = RngStream::new(seed, step);
        let (ok, increments) = simulate_step(spec, &rule, &mut stream);
        for (utility, increment) in current.iter_mut().zip(&increments) {
            *utility += increment;
        }
        utilities.push(current.clone());
        accepted.push(ok);
    }
    Ok(Trajectory {
        steps,
        n,
        utilities,
        accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::DistributionSpec as Spec;
    use crate::numerics;
    use crate::voting::expected_increment;

    #[test]
    fn streams_reproduce_and_differ() {
        let mut a = RngStream::new(42, 3);
        let mut b = RngStream::new(42, 3);
        let mut c = RngStream::new(42, 4);
        let mut d = RngStream::new(43, 3);
        let mut any_c = false;
        let mut any_d = false;
        for _ in 0..64 {
            let x = a.next_u64();
            assert_eq!(x, b.next_u64());
            any_c |= x != c.next_u64();
            any_d |= x != d.next_u64();
        }
        assert!(any_c && any_d);
    }

    #[test]
    fn uniform_variates_stay_strictly_inside_unit_interval() {
        let mut s = RngStream::new(0, 0);
        let mut lo = 1.0f64;
        let mut hi = 0.0f64;
        for _ in 0..100_000 {
            let u = s.next_uniform();
            assert!(u > 0.0 && u < 1.0);
            lo = lo.min(u);
            hi = hi.max(u);
        }
        // coverage sanity: both tails visited
        assert!(lo < 1e-3 && hi > 1.0 - 1e-3);
    }

    #[test]
    fn uniform_mean_and_variance_match_theory() {
        let mut s = RngStream::new(99, 7);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let u = s.next_uniform();
            sum += u;
            sumsq += u * u;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        // 4-sigma CLT bands
        assert!((mean - 0.5).abs() < 4.0 * (1.0 / 12.0f64).sqrt() / (n as f64).sqrt());
        assert!((var - 1.0 / 12.0).abs() < 1e-3);
    }

    #[test]
    fn step_consumes_exactly_n_variates_and_replays() {
        let spec = Spec::Normal {
            mu: 0.2,
            sigma: 1.3,
        };
        let rule = VotingRule::new(9, 0.5).unwrap();
        let mut walked = RngStream::new(5, 11);
        let (_, increments) = simulate_step(&spec, &rule, &mut walked);
        let mut skipped = RngStream::new(5, 11);
        for _ in 0..9 {
            skipped.next_u64();
        }
        assert_eq!(walked.next_u64(), skipped.next_u64());

        let mut replay = RngStream::new(5, 11);
        let (_, again) = simulate_step(&spec, &rule, &mut replay);
        assert_eq!(increments, again);
    }

    #[test]
    fn pure_rules_accept_and_reject_unconditionally() {
        let spec = Spec::Laplace {
            mu: -0.4,
            lambda: 1.0,
        };
        let accept_all = VotingRule::new(4, -0.25).unwrap();
        let reject_all = VotingRule::new(4, 1.0).unwrap();
        for stream_id in 0..50 {
            let mut manual = RngStream::new(1, stream_id);
            let proposal: Vec<f64> = (0..4).map(|_| spec.sample(&mut manual)).collect();

            let mut stream = RngStream::new(1, stream_id);
            let (ok, increments) = simulate_step(&spec, &accept_all, &mut stream);
            assert!(ok);
            assert_eq!(increments, proposal);

            let mut stream = RngStream::new(1, stream_id);
            let (ok, increments) = simulate_step(&spec, &reject_all, &mut stream);
            assert!(!ok);
            assert!(increments.iter().all(|&z| z == 0.0));
        }
    }

    #[test]
    fn estimator_is_deterministic_and_validates() {
        let spec = Spec::Uniform { a: 1.0, b: 2.0 };
        // replications straddle several parallel blocks
        let a = estimate_expected_increment(&spec, 5, 0.6, 20_000, 77).unwrap();
        let b = estimate_expected_increment(&spec, 5, 0.6, 20_000, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(
            (a.replications, a.n, a.alpha, a.seed),
            (20_000, 5, 0.6, 77)
        );
        let c = estimate_expected_increment(&spec, 5, 0.6, 20_000, 78).unwrap();
        assert_ne!(a.mean_increment, c.mean_increment);

        assert!(matches!(
            estimate_expected_increment(&spec, 5, 0.6, 1, 77),
            Err(SimulationError::TooFewReplications(1))
        ));
        let bad_spec = Spec::SymmetrizedPareto {
            k: 2.0,
            mu: 0.0,
            sigma: 1.0,
        };
        assert!(estimate_expected_increment(&bad_spec, 5, 0.6, 100, 7).is_err());
        assert!(estimate_expected_increment(&spec, 5, 3.0, 100, 7).is_err());
    }

    #[test]
    fn reject_all_estimate_is_exactly_zero() {
        let spec = Spec::Normal {
            mu: 0.1,
            sigma: 1.0,
        };
        let report = estimate_expected_increment(&spec, 7, 1.0, 5000, 3).unwrap();
        assert_eq!(report.mean_increment, 0.0);
        assert_eq!(report.std_error, 0.0);
        assert_eq!(report.acceptance_rate, 0.0);
    }

    #[test]
    fn estimate_brackets_analytic_value_within_four_standard_errors() {
        let spec = Spec::Uniform { a: 1.0, b: 1.0 };
        let stats = spec.stats().unwrap();
        let report = estimate_expected_increment(&spec, 2, 0.5, 1_000_000, 20240819).unwrap();
        assert!((report.mean_increment - 0.125).abs() <= 4.0 * report.std_error);
        let g = numerics::binomial_upper_tail(2, stats.p, 1).unwrap();
        let acceptance_se = (g * (1.0 - g) / 1.0e6).sqrt();
        assert!((report.acceptance_rate - g).abs() <= 4.0 * acceptance_se);

        let normal = Spec::Normal {
            mu: 0.5,
            sigma: 1.0,
        };
        let analytic = expected_increment(&normal.stats().unwrap(), 21, 10).unwrap();
        let report = estimate_expected_increment(&normal, 21, 0.5, 200_000, 7).unwrap();
        assert!((report.mean_increment - analytic).abs() <= 4.0 * report.std_error);
    }

    #[test]
    fn component_positivity_matches_the_environment() {
        let spec = Spec::SymmetrizedPareto {
            k: 8.0,
            mu: 0.3,
            sigma: 1.0,
        };
        let p = spec.stats().unwrap().p;
        let rule = VotingRule::new(6, -1.0 / 6.0).unwrap();
        let m = 40_000u64;
        let mut positive = vec![0u64; 6];
        for replication in 0..m {
            let mut stream = RngStream::new(314, replication);
            let (_, increments) = simulate_step(&spec, &rule, &mut stream);
            for (count, &z) in positive.iter_mut().zip(&increments) {
                *count += u64::from(z > 0.0);
            }
        }
        let se = (p * (1.0 - p) / m as f64).sqrt();
        for &count in &positive {
            assert!((count as f64 / m as f64 - p).abs() <= 4.0 * se);
        }
    }

    #[test]
    fn dynamics_accumulate_replayable_steps() {
        let spec = Spec::Normal {
            mu: -0.2,
            sigma: 0.8,
        };
        let trajectory = run_dynamics(&spec, 3, 0.5, 40, 555).unwrap();
        assert_eq!(trajectory.steps, 40);
        assert_eq!(trajectory.n, 3);
        assert_eq!(trajectory.utilities.len(), 40);
        assert_eq!(trajectory.accepted.len(), 40);

        let rule = VotingRule::new(3, 0.5).unwrap();
        let mut expected = vec![0.0f64; 3];
        for step in 0..40u64 {
            let mut stream = RngStream::new(555, step);
            let (ok, increments) = simulate_step(&spec, &rule, &mut stream);
            for (utility, increment) in expected.iter_mut().zip(&increments) {
                *utility += increment;
            }
            let t = step as usize;
            assert_eq!(trajectory.utilities[t], expected);
            assert_eq!(trajectory.accepted[t], ok);
            if !ok && t > 0 {
                assert_eq!(trajectory.utilities[t], trajectory.utilities[t - 1]);
            }
        }
        // this threshold leaves both outcomes represented
        assert!(trajectory.accepted.iter().any(|&b| b));
        assert!(trajectory.accepted.iter().any(|&b| !b));
    }

    #[test]
    fn degenerate_rules_give_flat_or_free_running_trajectories() {
        let spec = Spec::Uniform { a: 1.0, b: 2.0 };
        let flat = run_dynamics(&spec, 4, 1.0, 25, 9).unwrap();
        assert!(flat
            .utilities
            .iter()
            .all(|row| row.iter().all(|&u| u == 0.0)));
        assert!(flat.accepted.iter().all(|&b| !b));

        let centered = Spec::Uniform { a: 1.0, b: 1.0 };
        let steps = 4_000u64;
        let free = run_dynamics(&centered, 2, -0.5, steps, 10).unwrap();
        assert!(free.accepted.iter().all(|&b| b));
        // zero-mean accumulation stays inside the 4-sigma diffusion band
        let sigma = centered.stats().unwrap().sigma;
        let band = 4.0 * sigma * (steps as f64).sqrt();
        for &utility in free.utilities.last().unwrap() {
            assert!(utility.abs() <= band);
        }

        assert!(matches!(
            run_dynamics(&centered, 2, 0.5, 0, 1),
            Err(SimulationError::TooFewSteps(0))
        ));
    }

    #[test]
    fn trajectory_csv_is_rectangular_and_flagged() {
        let spec = Spec::Laplace {
            mu: 0.1,
            lambda: 2.0,
        };
        let trajectory = run_dynamics(&spec, 3, 0.4, 12, 77).unwrap();
        let csv = trajectory.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "step,agent_1,agent_2,agent_3,accepted");
        let mut rows = 0;
        for (t, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 5);
            assert_eq!(fields[0].parse::<usize>().unwrap(), t + 1);
            for field in &fields[1..4] {
                assert!(field.parse::<f64>().unwrap().is_finite());
            }
            assert_eq!(fields[4], if trajectory.accepted[t] { "1" } else { "0" });
            rows += 1;
        }
        assert_eq!(rows, 12);
    }

    #[test]
    fn report_json_carries_every_field() {
        let spec = Spec::Normal {
            mu: 0.0,
            sigma: 1.0,
        };
        let report = estimate_expected_increment(&spec, 3, 0.5, 100, 42).unwrap();
        let value: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(value["replications"], 100);
        assert_eq!(value["n"], 3);
        assert_eq!(value["seed"], 42);
        assert_eq!(value["alpha"], 0.5);
        assert!(value["mean_increment"].is_number());
        assert!(value["std_error"].is_number());
        assert!(value["acceptance_rate"].is_number());
    }
}
