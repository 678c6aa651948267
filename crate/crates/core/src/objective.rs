//! L_p-aggregated social utility and social cost objectives.
//!
//! Three conventions exist for lifting a pointwise objective to a random
//! facility location:
//!
//! - [`Convention::ExpectedAggregate`]: `E[su_p(y, x)]`.
//! - [`Convention::ExpectedPower`]: `(E[sum_i u_i(y)^p])^(1/p)`, the p-th root
//!   of the expected homogeneous form. For the geometric mean the form is the
//!   product of utilities and the root is the n-th; for max and min it is the
//!   aggregate itself, so this coincides with `ExpectedAggregate`.
//! - [`Convention::AggregateOfExpectations`]: aggregate the per-agent expected
//!   utilities (or costs).
//!
//! All three agree on deterministic outputs, and all three agree for `p = 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::profile::{agent_utility, FacilityDistribution, Profile};
use crate::quadrature;

/// Largest finite exponent accepted; use the max variants beyond this.
pub const MAX_P: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    ExpectedAggregate,
    ExpectedPower,
    AggregateOfExpectations,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::ExpectedAggregate => "expected_aggregate",
            Convention::ExpectedPower => "expected_power",
            Convention::AggregateOfExpectations => "aggregate_of_expectations",
        })
    }
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expected_aggregate" | "expected-aggregate" => Ok(Self::ExpectedAggregate),
            "expected_power" | "expected-power" => Ok(Self::ExpectedPower),
            "aggregate_of_expectations" | "aggregate-of-expectations" => {
                Ok(Self::AggregateOfExpectations)
            }
            other => Err(Error::InvalidArgument(format!("unknown convention `{other}`"))),
        }
    }
}

/// Which objective to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveSpec {
    /// `(sum |x_i - y|^p)^(1/p)`, `0 < p <= MAX_P`.
    Su(f64),
    SuMax,
    SuMin,
    /// Geometric mean of utilities, the `p -> 0+` limit of the power mean.
    SuGeoMean,
    /// `(sum (1 - |x_i - y|)^p)^(1/p)`, `1 <= p <= MAX_P`.
    Sc(f64),
    ScMax,
}

impl ObjectiveSpec {
    pub fn su(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= MAX_P) {
            return Err(Error::InvalidObjective(format!(
                "su requires 0 < p <= {MAX_P}, got {p}"
            )));
        }
        Ok(Self::Su(p))
    }

    pub fn sc(p: f64) -> Result<Self> {
        if !(1.0..=MAX_P).contains(&p) {
            return Err(Error::InvalidObjective(format!(
                "sc requires 1 <= p <= {MAX_P}, got {p}"
            )));
        }
        Ok(Self::Sc(p))
    }

    pub fn sense(&self) -> Sense {
        match self {
            Self::Su(_) | Self::SuMax | Self::SuMin | Self::SuGeoMean => Sense::Max,
            Self::Sc(_) | Self::ScMax => Sense::Min,
        }
    }

    pub fn is_utility(&self) -> bool {
        self.sense() == Sense::Max
    }

    /// Finite exponent, if any.
    pub fn exponent(&self) -> Option<f64> {
        match self {
            Self::Su(p) | Self::Sc(p) => Some(*p),
            _ => None,
        }
    }

    /// The exponent as printed in reports.
    pub fn p_label(&self) -> String {
        match self {
            Self::Su(p) | Self::Sc(p) => format!("{p}"),
            Self::SuMax | Self::ScMax => "inf".into(),
            Self::SuMin => "-inf".into(),
            Self::SuGeoMean => "0+".into(),
        }
    }

    pub fn default_convention(&self) -> Convention {
        match self {
            Self::Su(_) | Self::Sc(_) => Convention::ExpectedPower,
            Self::SuGeoMean => Convention::AggregateOfExpectations,
            Self::SuMax | Self::SuMin | Self::ScMax => Convention::ExpectedAggregate,
        }
    }

    /// Per-agent quantity aggregated by this objective: utility or cost.
    #[inline]
    pub fn agent_value(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        if self.is_utility() {
            d
        } else {
            1.0 - d
        }
    }

    /// Aggregates per-agent utilities (or costs, for sc objectives).
    pub fn aggregate(&self, values: &[f64]) -> f64 {
        match self {
            Self::Su(p) | Self::Sc(p) => lp_aggregate(values, *p),
            Self::SuMax | Self::ScMax => values.iter().copied().fold(0.0, f64::max),
            Self::SuMin => values.iter().copied().fold(f64::INFINITY, f64::min),
            Self::SuGeoMean => geometric_mean(values),
        }
    }

    /// The homogeneous form at a point: `sum v_i^p` for finite p, the product
    /// for the geometric mean, the aggregate itself otherwise. Linear in the
    /// facility distribution once averaged.
    pub fn power_form_at_point(&self, x: &Profile, y: f64) -> f64 {
        match self {
            Self::Su(p) | Self::Sc(p) => x
                .locations()
                .iter()
                .map(|&xi| self.agent_value(xi, y).powf(*p))
                .sum(),
            Self::SuGeoMean => x.locations().iter().map(|&xi| (xi - y).abs()).product(),
            _ => eval_at_point(self, x, y),
        }
    }

    /// Inverse of the homogeneous form for `n` agents.
    pub fn from_power_form(&self, value: f64, n: usize) -> f64 {
        match self {
            Self::Su(p) | Self::Sc(p) => value.max(0.0).powf(1.0 / p),
            Self::SuGeoMean => value.max(0.0).powf(1.0 / n as f64),
            _ => value,
        }
    }

    /// Maps an aggregate value into the homogeneous form.
    pub fn to_power_form(&self, value: f64, n: usize) -> f64 {
        match self {
            Self::Su(p) | Self::Sc(p) => value.powf(*p),
            Self::SuGeoMean => value.powi(n as i32),
            _ => value,
        }
    }
}

impl fmt::Display for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Su(p) => write!(f, "su:{p}"),
            Self::SuMax => f.write_str("su:max"),
            Self::SuMin => f.write_str("su:min"),
            Self::SuGeoMean => f.write_str("su:geomean"),
            Self::Sc(p) => write!(f, "sc:{p}"),
            Self::ScMax => f.write_str("sc:max"),
        }
    }
}

impl Serialize for ObjectiveSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for ObjectiveSpec {
    type Err = Error;

    /// Grammar: `su:<p>`, `su:max`, `su:min`, `su:geomean`, `sc:<p>`, `sc:max`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidObjective(format!("cannot parse objective `{s}`"));
        let (family, arg) = s.split_once(':').ok_or_else(bad)?;
        match (family.trim(), arg.trim()) {
            ("su", "max" | "inf" | "+inf") => Ok(Self::SuMax),
            ("su", "min" | "-inf") => Ok(Self::SuMin),
            ("su", "geomean" | "0+") => Ok(Self::SuGeoMean),
            ("sc", "max" | "inf" | "+inf") => Ok(Self::ScMax),
            ("su", p) => Self::su(p.parse().map_err(|_| bad())?),
            ("sc", p) => Self::sc(p.parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

/// `(sum v^p)^(1/p)` computed with the largest entry factored out so large
/// exponents neither overflow nor underflow.
fn lp_aggregate(values: &[f64], p: f64) -> f64 {
    let m = values.iter().copied().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = values.iter().map(|v| (v / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

fn geometric_mean(values: &[f64]) -> f64 {
    if values.iter().any(|&v| v <= 0.0) {
        return 0.0;
    }
    let mean_log = values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64;
    mean_log.exp()
}

/// Stable `ln(sum_k exp(terms_k))`.
fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// A value together with the randomized-objective convention that produced
/// it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub convention: Convention,
}

/// Objective at a deterministic facility location.
pub fn eval_at_point(spec: &ObjectiveSpec, x: &Profile, y: f64) -> f64 {
    let locs = x.locations();
    match spec {
        ObjectiveSpec::SuMax => locs.iter().map(|&xi| (xi - y).abs()).fold(0.0, f64::max),
        ObjectiveSpec::SuMin => locs
            .iter()
            .map(|&xi| (xi - y).abs())
            .fold(f64::INFINITY, f64::min),
        ObjectiveSpec::ScMax => locs
            .iter()
            .map(|&xi| 1.0 - (xi - y).abs())
            .fold(0.0, f64::max),
        _ => {
            let values: Vec<f64> = locs.iter().map(|&xi| spec.agent_value(xi, y)).collect();
            spec.aggregate(&values)
        }
    }
}

/// Interior points where objectives over `x` may have kinks.
pub fn kink_points(x: &Profile) -> Vec<f64> {
    let locs = x.locations();
    let mut pts = locs.to_vec();
    pts.extend(locs.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    pts.push(0.5 * (x.first() + x.last()));
    pts
}

fn expect_uniform<F: Fn(f64) -> f64>(f: F, x: &Profile) -> Result<f64> {
    quadrature::integrate(
        f,
        0.0,
        1.0,
        &kink_points(x),
        quadrature::DEFAULT_TOLERANCE,
        quadrature::DEFAULT_MAX_SPLITS,
    )
}

/// `E[f(y)]` for a pointwise function of the facility location.
pub fn expect_pointwise<F: Fn(f64) -> f64>(
    f: F,
    x: &Profile,
    dist: &FacilityDistribution,
) -> Result<f64> {
    match dist {
        FacilityDistribution::Point { y } => Ok(f(*y)),
        FacilityDistribution::Discrete { support } => {
            Ok(support.iter().map(|&(y, p)| p * f(y)).sum())
        }
        FacilityDistribution::UniformUnit => expect_uniform(f, x),
    }
}

/// `E_{y ~ dist}[objective(y, x)]`.
pub fn eval_expected_aggregate(
    spec: &ObjectiveSpec,
    x: &Profile,
    dist: &FacilityDistribution,
) -> Result<ObjectiveValue> {
    let value = expect_pointwise(|y| eval_at_point(spec, x, y), x, dist)?;
    Ok(ObjectiveValue {
        value,
        convention: Convention::ExpectedAggregate,
    })
}

/// `(E[sum_i v_i^p])^(1/p)`; see the module docs.
pub fn eval_expected_power(
    spec: &ObjectiveSpec,
    x: &Profile,
    dist: &FacilityDistribution,
) -> Result<ObjectiveValue> {
    let convention = Convention::ExpectedPower;
    let value = match (spec, dist) {
        (_, FacilityDistribution::Point { y }) => eval_at_point(spec, x, *y),
        (ObjectiveSpec::Su(p) | ObjectiveSpec::Sc(p), FacilityDistribution::Discrete { support }) => {
            // ln E[sum v^p] = logsumexp(ln w + p ln v), stable for large p.
            let terms = support.iter().flat_map(|&(y, w)| {
                x.locations()
                    .iter()
                    .map(move |&xi| w.ln() + p * spec.agent_value(xi, y).ln())
            });
            (log_sum_exp(terms) / p).exp()
        }
        (ObjectiveSpec::Su(p), FacilityDistribution::UniformUnit) => {
            // E|x - y|^p = (x^(p+1) + (1-x)^(p+1)) / (p+1)
            let terms = x.locations().iter().flat_map(|&xi| {
                [(p + 1.0) * xi.ln(), (p + 1.0) * (1.0 - xi).ln()]
            });
            ((log_sum_exp(terms) - (p + 1.0).ln()) / p).exp()
        }
        (ObjectiveSpec::Sc(p), FacilityDistribution::UniformUnit) => {
            // E(1 - |x - y|)^p = (2 - x^(p+1) - (1-x)^(p+1)) / (p+1)
            let s: f64 = x
                .locations()
                .iter()
                .map(|&xi| 2.0 - xi.powf(p + 1.0) - (1.0 - xi).powf(p + 1.0))
                .sum();
            (s / (p + 1.0)).powf(1.0 / p)
        }
        (ObjectiveSpec::SuGeoMean, _) => {
            let product = expect_pointwise(|y| spec.power_form_at_point(x, y), x, dist)?;
            spec.from_power_form(product, x.len())
        }
        _ => eval_expected_aggregate(spec, x, dist)?.value,
    };
    Ok(ObjectiveValue { value, convention })
}

/// Aggregate of the per-agent expected utilities (or costs).
pub fn eval_aggregate_of_expectations(
    spec: &ObjectiveSpec,
    x: &Profile,
    dist: &FacilityDistribution,
) -> ObjectiveValue {
    let values: Vec<f64> = x
        .locations()
        .iter()
        .map(|&xi| {
            let u = agent_utility(xi, dist);
            if spec.is_utility() {
                u
            } else {
                1.0 - u
            }
        })
        .collect();
    ObjectiveValue {
        value: spec.aggregate(&values),
        convention: Convention::AggregateOfExpectations,
    }
}

pub fn eval_distribution(
    spec: &ObjectiveSpec,
    x: &Profile,
    dist: &FacilityDistribution,
    convention: Convention,
) -> Result<ObjectiveValue> {
    match convention {
        Convention::ExpectedAggregate => eval_expected_aggregate(spec, x, dist),
        Convention::ExpectedPower => eval_expected_power(spec, x, dist),
        Convention::AggregateOfExpectations => Ok(eval_aggregate_of_expectations(spec, x, dist)),
    }
}

/// Evaluates under the objective's default convention.
pub fn eval_default(
    spec: &ObjectiveSpec,
    x: &Profile,
    dist: &FacilityDistribution,
) -> Result<ObjectiveValue> {
    eval_distribution(spec, x, dist, spec.default_convention())
}
