//! Mechanisms mapping a reported profile to a facility distribution.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::objective::MAX_P;
use crate::profile::{FacilityDistribution, Profile, SideCounts};

/// Exponent of the power-weighted mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinite => f.write_str("inf"),
        }
    }
}

type MechanismFn = dyn Fn(&Profile) -> FacilityDistribution + Send + Sync;

/// An opaque, re-entrant profile-to-distribution map registered by name.
#[derive(Clone)]
pub struct CustomMechanism {
    name: String,
    deterministic: bool,
    f: Arc<MechanismFn>,
}

impl CustomMechanism {
    pub fn new<F>(name: impl Into<String>, deterministic: bool, f: F) -> Self
    where
        F: Fn(&Profile) -> FacilityDistribution + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            deterministic,
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMechanism").field("name", &self.name).finish()
    }
}

/// Built-in custom mechanisms that are deliberately not strategyproof.
pub fn custom_by_name(name: &str) -> Option<CustomMechanism> {
    match name {
        "dictator" => Some(CustomMechanism::new("dictator", true, |x| {
            FacilityDistribution::Point { y: x.first() }
        })),
        "average" => Some(CustomMechanism::new("average", true, |x| {
            let mean = x.locations().iter().sum::<f64>() / x.len() as f64;
            FacilityDistribution::Point { y: mean.clamp(0.0, 1.0) }
        })),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub enum MechanismSpec {
    MajorityVote,
    UniformUnit,
    SquareWeighted,
    PowerWeighted(Exponent),
    TwoCandidateThreshold { a: f64, b: f64, cutoff: usize },
    Custom(CustomMechanism),
}

impl MechanismSpec {
    pub fn power_weighted(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            return Ok(Self::PowerWeighted(Exponent::Infinite));
        }
        if !(p > 0.0 && p <= MAX_P) {
            return Err(Error::InvalidMechanism(format!(
                "power-weighted exponent must lie in (0, {MAX_P}] or be inf, got {p}"
            )));
        }
        Ok(Self::PowerWeighted(Exponent::Finite(p)))
    }

    pub fn threshold(a: f64, b: f64, cutoff: usize) -> Result<Self> {
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::InvalidMechanism(format!(
                "threshold candidates need 0 <= a < b <= 1, got a={a}, b={b}"
            )));
        }
        Ok(Self::TwoCandidateThreshold { a, b, cutoff })
    }

    pub fn run(&self, x: &Profile) -> Result<FacilityDistribution> {
        Ok(match self {
            Self::MajorityVote => run_majority_vote(x),
            Self::UniformUnit => run_uniform(x),
            Self::SquareWeighted => run_square_weighted(x),
            Self::PowerWeighted(p) => run_power_weighted(x, *p),
            Self::TwoCandidateThreshold { a, b, cutoff } => {
                run_two_candidate_threshold(x, *a, *b, *cutoff)?
            }
            Self::Custom(c) => (c.f)(x),
        })
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            Self::MajorityVote | Self::TwoCandidateThreshold { .. } => true,
            Self::Custom(c) => c.deterministic,
            _ => false,
        }
    }

    /// Finite set of locations the mechanism can ever output, if there is
    /// one.
    pub fn candidates(&self) -> Option<Vec<f64>> {
        match self {
            Self::MajorityVote | Self::SquareWeighted | Self::PowerWeighted(_) => {
                Some(vec![0.0, 1.0])
            }
            Self::TwoCandidateThreshold { a, b, .. } => Some(vec![*a, *b]),
            Self::UniformUnit | Self::Custom(_) => None,
        }
    }
}

impl fmt::Display for MechanismSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MajorityVote => f.write_str("majority-vote"),
            Self::UniformUnit => f.write_str("uniform"),
            Self::SquareWeighted => f.write_str("square-weighted"),
            Self::PowerWeighted(p) => write!(f, "power-weighted:{p}"),
            Self::TwoCandidateThreshold { a, b, cutoff } => write!(f, "threshold:{a},{b},{cutoff}"),
            Self::Custom(c) => write!(f, "custom:{}", c.name),
        }
    }
}

impl Serialize for MechanismSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for MechanismSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidMechanism(format!("`{s}`: {why}"));
        match s.split_once(':') {
            None => match s {
                "majority-vote" => Ok(Self::MajorityVote),
                "uniform" => Ok(Self::UniformUnit),
                "square-weighted" => Ok(Self::SquareWeighted),
                _ => Err(bad("unknown mechanism")),
            },
            Some(("power-weighted", p)) => {
                let p = match p {
                    "inf" | "+inf" | "infinity" => f64::INFINITY,
                    other => other.parse().map_err(|_| bad("bad exponent"))?,
                };
                Self::power_weighted(p)
            }
            Some(("threshold", args)) => {
                let parts: Vec<&str> = args.split(',').map(str::trim).collect();
                let [a, b, c] = parts.as_slice() else {
                    return Err(bad("expected threshold:<a>,<b>,<cutoff>"));
                };
                Self::threshold(
                    a.parse().map_err(|_| bad("bad candidate a"))?,
                    b.parse().map_err(|_| bad("bad candidate b"))?,
                    c.parse().map_err(|_| bad("bad cutoff"))?,
                )
            }
            Some(("custom", name)) => custom_by_name(name)
                .map(Self::Custom)
                .ok_or_else(|| bad("unknown custom mechanism")),
            Some(_) => Err(bad("unknown mechanism")),
        }
    }
}

/// Endpoint 0 when no more agents sit in `[0, 1/2]` than in `(1/2, 1]`,
/// endpoint 1 otherwise.
pub fn run_majority_vote(x: &Profile) -> FacilityDistribution {
    let SideCounts { n1, n2 } = x.side_counts();
    FacilityDistribution::Point {
        y: if n1 <= n2 { 0.0 } else { 1.0 },
    }
}

pub fn run_uniform(_x: &Profile) -> FacilityDistribution {
    FacilityDistribution::UniformUnit
}

fn endpoint_mixture(prob_zero: f64) -> FacilityDistribution {
    if prob_zero >= 1.0 {
        FacilityDistribution::Point { y: 0.0 }
    } else if prob_zero <= 0.0 {
        FacilityDistribution::Point { y: 1.0 }
    } else {
        FacilityDistribution::Discrete {
            support: vec![(0.0, prob_zero), (1.0, 1.0 - prob_zero)],
        }
    }
}

/// `P(y = 0) = n2^2 / (n1^2 + n2^2)`, otherwise `y = 1`.
pub fn run_square_weighted(x: &Profile) -> FacilityDistribution {
    let SideCounts { n1, n2 } = x.side_counts();
    let (n1, n2) = (n1 as f64, n2 as f64);
    endpoint_mixture(n2 * n2 / (n1 * n1 + n2 * n2))
}

/// Probability of endpoint 0 under the power-weighted mechanism.
pub fn power_weighted_prob_zero(counts: SideCounts, p: Exponent) -> f64 {
    let (n1, n2) = (counts.n1 as f64, counts.n2 as f64);
    if counts.n1 == 0 {
        return 1.0;
    }
    if counts.n2 == 0 {
        return 0.0;
    }
    match p {
        Exponent::Infinite => 0.5,
        Exponent::Finite(p) => {
            // (n2^2 + 2^p n1 n2) / (n1^2 + n2^2 + 2^(p+1) n1 n2), divided
            // through by 2^p so large p stays finite.
            let s = (-p).exp2();
            (n2 * n2 * s + n1 * n2) / ((n1 * n1 + n2 * n2) * s + 2.0 * n1 * n2)
        }
    }
}

pub fn run_power_weighted(x: &Profile, p: Exponent) -> FacilityDistribution {
    endpoint_mixture(power_weighted_prob_zero(x.side_counts(), p))
}

/// Two-candidate threshold mechanism.
///
/// Agents strictly closer to `b` prefer the facility at `a`; let `k` be their
/// number. Returns `a` iff `k >= cutoff`, else `b`. Agents equidistant from
/// both candidates are not counted, which makes Majority Vote the member with
/// `a = 0`, `b = 1`, `cutoff = ceil(n / 2)`.
pub fn run_two_candidate_threshold(
    x: &Profile,
    a: f64,
    b: f64,
    cutoff: usize,
) -> Result<FacilityDistribution> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::InvalidMechanism(format!(
            "threshold candidates need 0 <= a < b <= 1, got a={a}, b={b}"
        )));
    }
    if cutoff > x.len() + 1 {
        return Err(Error::InvalidMechanism(format!(
            "cutoff {cutoff} exceeds n + 1 = {}",
            x.len() + 1
        )));
    }
    let k = x
        .locations()
        .iter()
        .filter(|&&xi| (xi - b).abs() < (xi - a).abs())
        .count();
    Ok(FacilityDistribution::Point {
        y: if k >= cutoff { a } else { b },
    })
}
