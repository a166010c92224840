//! Proposal environments: the four distribution families a proposal
//! component can be drawn from, their summary statistics, and
//! quartile-based standardization for cross-family comparisons.
//!
//! Every family is parameterized the way it is normally written down
//! (uniform by its support bounds, normal by mean and deviation, the
//! symmetrized Pareto by shape/mode/deviation, Laplace by location and
//! rate). [`EnvironmentStats`] collects the quantities the voting
//! analysis consumes: the positivity probability `p` and the conditional
//! win/loss magnitudes `E+` and `E-`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::montecarlo::RngStream;
use crate::numerics::{self, NumericsError};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Families of proposal-component distributions.
///
/// The symmetrized Pareto glues two Pareto tails back to back so the
/// density is symmetric about its mode `mu`; `k > 2` keeps the variance
/// finite. For the uniform family the support is `[-a, b]` with both
/// bounds strictly positive, so losses and gains are always possible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DistributionSpec {
    Uniform { a: f64, b: f64 },
    Normal { mu: f64, sigma: f64 },
    #[serde(rename = "pareto")]
    SymmetrizedPareto { k: f64, mu: f64, sigma: f64 },
    Laplace { mu: f64, lambda: f64 },
}

/// Family selector without location or scale, used where only the shape
/// of the distribution matters (standardization, figure presets).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Uniform,
    Normal,
    SymmetrizedPareto { k: f64 },
    Laplace,
}

/// A family with its scale frozen, exposing one-parameter slices along
/// the mean. Curve generation sweeps these over mu or rho grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilySweep {
    /// Total support width `a + b` held fixed.
    Uniform { width: f64 },
    Normal { sigma: f64 },
    SymmetrizedPareto { k: f64, sigma: f64 },
    Laplace { lambda: f64 },
}

/// Summary statistics of a proposal environment.
///
/// `e_plus` is the expected gain given the component is positive,
/// `e_minus` the expected magnitude of the loss given it is not;
/// `p` and `q = 1 - p` are the respective probabilities, and
/// `rho = mu / sigma` is the adjusted mean. `c_const` and `rho_hat`
/// are populated for the symmetrized Pareto family only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvironmentStats {
    pub mu: f64,
    pub sigma: f64,
    pub rho: f64,
    pub p: f64,
    pub q: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    pub c_const: Option<f64>,
    pub rho_hat: Option<f64>,
}

impl EnvironmentStats {
    /// Win/loss magnitude ratio `R = E+ / E-`, or `None` when the
    /// environment carries no loss mass.
    pub fn win_loss_ratio(&self) -> Option<f64> {
        (self.e_minus > 0.0).then(|| self.e_plus / self.e_minus)
    }
}

/// Errors constructing or parsing a distribution spec.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    /// A parameter violates its family's constraint.
    #[error("{0}")]
    Parameter(String),
    /// Family tag is not one of uniform, normal, pareto, laplace.
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    /// Key-value spec text failed to parse.
    #[error("{0}")]
    Parse(String),
}

fn require_positive(name: &str, v: f64) -> Result<(), SpecError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SpecError::Parameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn require_finite(name: &str, v: f64) -> Result<(), SpecError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SpecError::Parameter(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

impl DistributionSpec {
    /// Checks every family-specific parameter constraint.
    pub fn validate(&self) -> Result<(), SpecError> {
        match *self {
            DistributionSpec::Uniform { a, b } => {
                require_positive("a", a)?;
                require_positive("b", b)
            }
            DistributionSpec::Normal { mu, sigma } => {
                require_finite("mu", mu)?;
                require_positive("sigma", sigma)
            }
            DistributionSpec::SymmetrizedPareto { k, mu, sigma } => {
                if !(k > 2.0) || !k.is_finite() {
                    return Err(SpecError::Parameter(format!("k must exceed 2, got {k}")));
                }
                require_finite("mu", mu)?;
                require_positive("sigma", sigma)
            }
            DistributionSpec::Laplace { mu, lambda } => {
                require_finite("mu", mu)?;
                require_positive("lambda", lambda)
            }
        }
    }

    /// Environment statistics in closed form.
    ///
    /// `p + q = 1` holds exactly: the smaller tail is computed directly
    /// and the other side by complement. The Pareto and Laplace rows
    /// mirror around `mu = 0`, so each sign gets its exact branch.
    pub fn stats(&self) -> Result<EnvironmentStats, SpecError> {
        self.validate()?;
        Ok(match *self {
            DistributionSpec::Uniform { a, b } => {
                let width = a + b;
                let mu = (b - a) / 2.0;
                let sigma = width / (2.0 * SQRT_3);
                EnvironmentStats {
                    mu,
                    sigma,
                    rho: mu / sigma,
                    p: b / width,
                    q: 1.0 - b / width,
                    e_plus: b / 2.0,
                    e_minus: a / 2.0,
                    c_const: None,
                    rho_hat: None,
                }
            }
            DistributionSpec::Normal { mu, sigma } => {
                let rho = mu / sigma;
                let p = numerics::std_normal_cdf(rho);
                let density = numerics::std_normal_pdf(rho);
                EnvironmentStats {
                    mu,
                    sigma,
                    rho,
                    p,
                    q: 1.0 - p,
                    e_plus: mu + sigma * density / p,
                    e_minus: -mu + sigma * density / numerics::std_normal_cdf(-rho),
                    c_const: None,
                    rho_hat: None,
                }
            }
            DistributionSpec::SymmetrizedPareto { k, mu, sigma } => {
                let c = ((k - 1.0) * (k - 2.0) / 2.0).sqrt();
                let rho = mu / sigma;
                let (p, q, e_plus, e_minus);
                if mu > 0.0 {
                    q = 0.5 * (c / (c + rho)).powf(k);
                    p = 1.0 - q;
                    e_minus = sigma * (c + rho) / (k - 1.0);
                    e_plus = sigma * (rho + q * (c + rho) / (k - 1.0)) / p;
                } else {
                    p = 0.5 * (c / (c - rho)).powf(k);
                    q = 1.0 - p;
                    e_plus = sigma * (c - rho) / (k - 1.0);
                    e_minus = sigma * (-rho + p * (c - rho) / (k - 1.0)) / q;
                }
                EnvironmentStats {
                    mu,
                    sigma,
                    rho,
                    p,
                    q,
                    e_plus,
                    e_minus,
                    c_const: Some(c),
                    rho_hat: Some((rho / c).abs()),
                }
            }
            DistributionSpec::Laplace { mu, lambda } => {
                let sigma = std::f64::consts::SQRT_2 / lambda;
                let rho = mu / sigma;
                let (p, q, e_plus, e_minus);
                if mu > 0.0 {
                    let tail = (-lambda * mu).exp();
                    q = 0.5 * tail;
                    p = 1.0 - q;
                    e_minus = 1.0 / lambda;
                    e_plus = (mu + tail / (2.0 * lambda)) / p;
                } else {
                    let tail = (lambda * mu).exp();
                    p = 0.5 * tail;
                    q = 1.0 - p;
                    e_plus = 1.0 / lambda;
                    e_minus = (-mu + tail / (2.0 * lambda)) / q;
                }
                EnvironmentStats {
                    mu,
                    sigma,
                    rho,
                    p,
                    q,
                    e_plus,
                    e_minus,
                    c_const: None,
                    rho_hat: None,
                }
            }
        })
    }

    /// Probability density at `x`. Assumes a validated spec.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            DistributionSpec::Uniform { a, b } => {
                if (-a..=b).contains(&x) {
                    1.0 / (a + b)
                } else {
                    0.0
                }
            }
            DistributionSpec::Normal { mu, sigma } => {
                numerics::std_normal_pdf((x - mu) / sigma) / sigma
            }
            DistributionSpec::SymmetrizedPareto { k, mu, sigma } => {
                let a = pareto_scale(k, sigma);
                (k / (2.0 * a)) * ((x - mu).abs() / a + 1.0).powf(-(k + 1.0))
            }
            DistributionSpec::Laplace { mu, lambda } => {
                0.5 * lambda * (-lambda * (x - mu).abs()).exp()
            }
        }
    }

    /// Cumulative distribution function at `x`. Assumes a validated spec.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            DistributionSpec::Uniform { a, b } => ((x + a) / (a + b)).clamp(0.0, 1.0),
            DistributionSpec::Normal { mu, sigma } => numerics::std_normal_cdf((x - mu) / sigma),
            DistributionSpec::SymmetrizedPareto { k, mu, sigma } => {
                let a = pareto_scale(k, sigma);
                if x <= mu {
                    0.5 * (a / (a + mu - x)).powf(k)
                } else {
                    1.0 - 0.5 * (a / (a + x - mu)).powf(k)
                }
            }
            DistributionSpec::Laplace { mu, lambda } => {
                if x <= mu {
                    0.5 * (lambda * (x - mu)).exp()
                } else {
                    1.0 - 0.5 * (-lambda * (x - mu)).exp()
                }
            }
        }
    }

    /// Inverse of [`cdf`](Self::cdf). For the unbounded families the
    /// endpoints `u = 0` and `u = 1` have no finite preimage and are
    /// reported as domain errors; the uniform family maps them to its
    /// support bounds.
    pub fn quantile(&self, u: f64) -> Result<f64, NumericsError> {
        match *self {
            DistributionSpec::Uniform { a, b } => {
                if !(0.0..=1.0).contains(&u) {
                    return Err(NumericsError::Domain(format!(
                        "quantile requires u in [0, 1], got {u}"
                    )));
                }
                Ok(-a + u * (a + b))
            }
            DistributionSpec::Normal { mu, sigma } => {
                Ok(mu + sigma * numerics::std_normal_quantile(u)?)
            }
            DistributionSpec::SymmetrizedPareto { k, mu, sigma } => {
                require_open_unit(u)?;
                let a = pareto_scale(k, sigma);
                Ok(if u <= 0.5 {
                    mu + a - a * (2.0 * u).powf(-1.0 / k)
                } else {
                    mu - a + a * (2.0 * (1.0 - u)).powf(-1.0 / k)
                })
            }
            DistributionSpec::Laplace { mu, lambda } => {
                require_open_unit(u)?;
                Ok(if u <= 0.5 {
                    mu + (2.0 * u).ln() / lambda
                } else {
                    mu - (2.0 * (1.0 - u)).ln() / lambda
                })
            }
        }
    }

    /// One inverse-CDF draw, consuming exactly one variate from `stream`.
    pub fn sample(&self, stream: &mut RngStream) -> f64 {
        let u = stream.next_uniform();
        // The stream's variates lie strictly inside (0, 1), so the
        // quantile is always finite.
        self.quantile(u)
            .expect("uniform variate lies strictly inside (0, 1)")
    }

    /// First quartile, `cdf(q1) = 1/4`.
    pub fn first_quartile(&self) -> f64 {
        self.quantile(0.25)
            .expect("0.25 is an interior probability")
    }

    /// The family tag with shape parameters, dropping location and scale.
    pub fn family(&self) -> Family {
        match *self {
            DistributionSpec::Uniform { .. } => Family::Uniform,
            DistributionSpec::Normal { .. } => Family::Normal,
            DistributionSpec::SymmetrizedPareto { k, .. } => Family::SymmetrizedPareto { k },
            DistributionSpec::Laplace { .. } => Family::Laplace,
        }
    }
}

// Pareto tail scale: the half-width a for which the variance works out
// to sigma^2. Defined for k > 2.
fn pareto_scale(k: f64, sigma: f64) -> f64 {
    ((k - 1.0) * (k - 2.0) / 2.0).sqrt() * sigma
}

fn require_open_unit(u: f64) -> Result<(), NumericsError> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(NumericsError::Domain(format!(
            "quantile requires 0 < u < 1 on unbounded support, got {u}"
        )))
    }
}

/// Builds a zero-mean spec of the given family whose first quartile
/// equals `reference_q1_offset` (the reference's own `Q1 - mu`, negative).
///
/// Matching quartiles instead of variances keeps the central bulk of
/// heavy-tailed families visually comparable to the normal reference.
pub fn standardize_by_quartile(
    family: Family,
    reference_q1_offset: f64,
) -> Result<DistributionSpec, SpecError> {
    if !(reference_q1_offset < 0.0) || !reference_q1_offset.is_finite() {
        return Err(SpecError::Parameter(format!(
            "reference quartile offset must be negative, got {reference_q1_offset}"
        )));
    }
    let t = reference_q1_offset;
    let spec = match family {
        // Uniform[-a, a]: Q1 = -a/2.
        Family::Uniform => {
            let a = -2.0 * t;
            DistributionSpec::Uniform { a, b: a }
        }
        Family::Normal => {
            let z = numerics::std_normal_quantile(0.25).expect("0.25 is interior");
            DistributionSpec::Normal {
                mu: 0.0,
                sigma: t / z,
            }
        }
        // Q1 = C (1 - 2^{1/k}) sigma, negative since 2^{1/k} > 1.
        Family::SymmetrizedPareto { k } => {
            if !(k > 2.0) || !k.is_finite() {
                return Err(SpecError::Parameter(format!("k must exceed 2, got {k}")));
            }
            let c = ((k - 1.0) * (k - 2.0) / 2.0).sqrt();
            DistributionSpec::SymmetrizedPareto {
                k,
                mu: 0.0,
                sigma: t / (c * (1.0 - 2f64.powf(1.0 / k))),
            }
        }
        // Q1 = -ln2 / lambda.
        Family::Laplace => DistributionSpec::Laplace {
            mu: 0.0,
            lambda: -std::f64::consts::LN_2 / t,
        },
    };
    spec.validate()?;
    Ok(spec)
}

impl FamilySweep {
    /// Checks the frozen shape and scale parameters.
    pub fn validate(&self) -> Result<(), SpecError> {
        match *self {
            FamilySweep::Uniform { width } => require_positive("width", width),
            FamilySweep::Normal { sigma } => require_positive("sigma", sigma),
            FamilySweep::SymmetrizedPareto { k, sigma } => {
                if !(k > 2.0) || !k.is_finite() {
                    return Err(SpecError::Parameter(format!("k must exceed 2, got {k}")));
                }
                require_positive("sigma", sigma)
            }
            FamilySweep::Laplace { lambda } => require_positive("lambda", lambda),
        }
    }

    /// Standard deviation implied by the frozen scale parameter.
    pub fn sigma(&self) -> f64 {
        match *self {
            FamilySweep::Uniform { width } => width / (2.0 * SQRT_3),
            FamilySweep::Normal { sigma } => sigma,
            FamilySweep::SymmetrizedPareto { sigma, .. } => sigma,
            FamilySweep::Laplace { lambda } => std::f64::consts::SQRT_2 / lambda,
        }
    }

    /// The spec at mean `mu`, or `None` where the family cannot realize
    /// it (a uniform with fixed width only reaches |mu| < width/2).
    pub fn spec_at_mu(&self, mu: f64) -> Option<DistributionSpec> {
        match *self {
            FamilySweep::Uniform { width } => {
                let half = width / 2.0;
                (mu.abs() < half).then(|| DistributionSpec::Uniform {
                    a: half - mu,
                    b: half + mu,
                })
            }
            FamilySweep::Normal { sigma } => Some(DistributionSpec::Normal { mu, sigma }),
            FamilySweep::SymmetrizedPareto { k, sigma } => {
                Some(DistributionSpec::SymmetrizedPareto { k, mu, sigma })
            }
            FamilySweep::Laplace { lambda } => Some(DistributionSpec::Laplace { mu, lambda }),
        }
    }

    /// The spec at adjusted mean `rho = mu / sigma`; `None` where
    /// unrealizable (uniform needs |rho| < sqrt(3)).
    pub fn spec_at_rho(&self, rho: f64) -> Option<DistributionSpec> {
        self.spec_at_mu(rho * self.sigma())
    }

    pub fn family(&self) -> Family {
        match *self {
            FamilySweep::Uniform { .. } => Family::Uniform,
            FamilySweep::Normal { .. } => Family::Normal,
            FamilySweep::SymmetrizedPareto { k, .. } => Family::SymmetrizedPareto { k },
            FamilySweep::Laplace { .. } => Family::Laplace,
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DistributionSpec::Uniform { a, b } => write!(f, "family=uniform a={a} b={b}"),
            DistributionSpec::Normal { mu, sigma } => {
                write!(f, "family=normal mu={mu} sigma={sigma}")
            }
            DistributionSpec::SymmetrizedPareto { k, mu, sigma } => {
                write!(f, "family=pareto k={k} mu={mu} sigma={sigma}")
            }
            DistributionSpec::Laplace { mu, lambda } => {
                write!(f, "family=laplace mu={mu} lambda={lambda}")
            }
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = SpecError;

    /// Parses the flat key-value form, e.g. `family=normal mu=0.5 sigma=1.0`.
    /// Keys may appear in any order; the result is validated.
    fn from_str(s: &str) -> Result<Self, SpecError> {
        let mut family = None;
        let mut params: Vec<(&str, f64)> = Vec::new();
        for token in s.split_whitespace() {
            let (key, value) = token.split_once('=').ok_or_else(|| {
                SpecError::Parse(format!("expected key=value pairs, got `{token}`"))
            })?;
            if key == "family" {
                if family.replace(value).is_some() {
                    return Err(SpecError::Parse("family given twice".into()));
                }
            } else {
                let parsed = value
                    .parse::<f64>()
                    .map_err(|_| SpecError::Parse(format!("`{key}` is not a number: `{value}`")))?;
                if params.iter().any(|(k, _)| *k == key) {
                    return Err(SpecError::Parse(format!("`{key}` given twice")));
                }
                params.push((key, parsed));
            }
        }
        let family = family.ok_or_else(|| SpecError::Parse("missing `family=` key".into()))?;

        let mut take = |key: &str| -> Result<f64, SpecError> {
            let pos = params
                .iter()
                .position(|(k, _)| *k == key)
                .ok_or_else(|| SpecError::Parse(format!("family {family} needs `{key}=`")))?;
            Ok(params.remove(pos).1)
        };
        let spec = match family {
            "uniform" => DistributionSpec::Uniform {
                a: take("a")?,
                b: take("b")?,
            },
            "normal" => DistributionSpec::Normal {
                mu: take("mu")?,
                sigma: take("sigma")?,
            },
            "pareto" => DistributionSpec::SymmetrizedPareto {
                k: take("k")?,
                mu: take("mu")?,
                sigma: take("sigma")?,
            },
            "laplace" => DistributionSpec::Laplace {
                mu: take("mu")?,
                lambda: take("lambda")?,
            },
            other => return Err(SpecError::UnknownFamily(other.to_string())),
        };
        if let Some((key, _)) = params.first() {
            return Err(SpecError::Parse(format!(
                "unexpected key `{key}` for family {family}"
            )));
        }
        spec.validate()?;
        Ok(spec)
    }
}
