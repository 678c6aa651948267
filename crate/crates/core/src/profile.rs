//! Profiles of reported locations and the distributions mechanisms return.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability mass may drift from one by at most this much before
/// [`FacilityDistribution::discrete`] refuses to renormalise.
pub const NORMALIZE_TOLERANCE: f64 = 1e-9;

/// Reported agent locations, sorted ascending, all inside [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Profile {
    locations: Vec<f64>,
}

impl Profile {
    pub fn new(mut raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(&bad) = raw.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(bad));
        }
        raw.sort_by(f64::total_cmp);
        Ok(Self { locations: raw })
    }

    /// Builds a profile from values the caller has already checked.
    ///
    /// Only sorts; out-of-range values are a logic error and trip a debug
    /// assertion.
    pub(crate) fn from_trusted(mut raw: Vec<f64>) -> Self {
        debug_assert!(!raw.is_empty());
        debug_assert!(raw.iter().all(|v| (0.0..=1.0).contains(v)));
        raw.sort_by(f64::total_cmp);
        Self { locations: raw }
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> f64 {
        self.locations[0]
    }

    pub fn last(&self) -> f64 {
        self.locations[self.locations.len() - 1]
    }

    /// The mirror image `x -> 1 - x`, re-sorted.
    pub fn reflected(&self) -> Self {
        Self::from_trusted(self.locations.iter().rev().map(|x| 1.0 - x).collect())
    }

    pub fn side_counts(&self) -> SideCounts {
        let left = self.locations.iter().filter(|&&x| x <= 0.5).count();
        SideCounts {
            n1: left,
            n2: self.locations.len() - left,
        }
    }
}

impl TryFrom<Vec<f64>> for Profile {
    type Error = Error;

    fn try_from(raw: Vec<f64>) -> Result<Self> {
        Profile::new(raw)
    }
}

impl From<Profile> for Vec<f64> {
    fn from(p: Profile) -> Self {
        p.locations
    }
}

/// Convenience wrapper around [`Profile::new`].
pub fn make_profile(raw: &[f64]) -> Result<Profile> {
    Profile::new(raw.to_vec())
}

/// Number of agents in the closed left half `[0, 1/2]` and the open right
/// half `(1/2, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SideCounts {
    pub n1: usize,
    pub n2: usize,
}

impl SideCounts {
    pub fn total(&self) -> usize {
        self.n1 + self.n2
    }
}

/// Output of a mechanism: where the facility goes, possibly at random.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FacilityDistribution {
    Point { y: f64 },
    /// Finitely supported distribution; support sorted ascending, pairwise
    /// distinct, probabilities strictly positive and summing to one.
    Discrete { support: Vec<(f64, f64)> },
    UniformUnit,
}

impl FacilityDistribution {
    pub fn point(y: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfRange(y));
        }
        Ok(Self::Point { y })
    }

    /// Validates and normalises a finite distribution.
    ///
    /// Zero-probability atoms are dropped and a single remaining atom
    /// collapses to [`FacilityDistribution::Point`].
    pub fn discrete(support: Vec<(f64, f64)>) -> Result<Self> {
        let mut atoms = Vec::with_capacity(support.len());
        let mut total = 0.0;
        for (y, prob) in support {
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::OutOfRange(y));
            }
            if !prob.is_finite() || prob < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "probability {prob} at {y} is not a valid mass"
                )));
            }
            total += prob;
            if prob > 0.0 {
                atoms.push((y, prob));
            }
        }
        if (total - 1.0).abs() > NORMALIZE_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDistribution(
                "support points must be distinct".into(),
            ));
        }
        for atom in &mut atoms {
            atom.1 /= total;
        }
        match atoms.as_slice() {
            [] => Err(Error::InvalidDistribution("empty support".into())),
            [(y, _)] => Ok(Self::Point { y: *y }),
            _ => Ok(Self::Discrete { support: atoms }),
        }
    }

    /// Mixture of two locations with mass `prob_a` on `a`.
    pub fn two_point(a: f64, prob_a: f64, b: f64) -> Result<Self> {
        Self::discrete(vec![(a, prob_a), (b, 1.0 - prob_a)])
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::Point { .. })
    }

    /// `P(y = at)`; zero for the continuous uniform distribution.
    pub fn mass_at(&self, at: f64) -> f64 {
        match self {
            Self::Point { y } => {
                if *y == at {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Discrete { support } => support
                .iter()
                .filter(|(y, _)| *y == at)
                .map(|(_, p)| p)
                .sum(),
            Self::UniformUnit => 0.0,
        }
    }

    /// `E[y]`.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Point { y } => *y,
            Self::Discrete { support } => support.iter().map(|(y, p)| y * p).sum(),
            Self::UniformUnit => 0.5,
        }
    }
}

/// Expected distance from `x` to the facility.
pub fn agent_utility(x: f64, dist: &FacilityDistribution) -> f64 {
    match dist {
        FacilityDistribution::Point { y } => (x - y).abs(),
        FacilityDistribution::Discrete { support } => {
            support.iter().map(|(y, p)| p * (x - y).abs()).sum()
        }
        FacilityDistribution::UniformUnit => (2.0 * x * x - 2.0 * x + 1.0) / 2.0,
    }
}

/// Expected cost `1 - distance`.
pub fn agent_cost(x: f64, dist: &FacilityDistribution) -> f64 {
    1.0 - agent_utility(x, dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn make_profile_sorts_and_validates() {
        assert_eq!(make_profile(&[0.7, 0.3]).unwrap().locations(), &[0.3, 0.7]);
        assert_eq!(make_profile(&[0.5]).unwrap().locations(), &[0.5]);
        assert_eq!(make_profile(&[0.2, 1.3]), Err(Error::OutOfRange(1.3)));
        assert_eq!(make_profile(&[]), Err(Error::Empty));
        assert!(make_profile(&[f64::NAN]).is_err());
    }

    #[test]
    fn side_counts_closed_left() {
        let c = |v: &[f64]| make_profile(v).unwrap().side_counts();
        assert_eq!(c(&[0.3, 0.7]), SideCounts { n1: 1, n2: 1 });
        assert_eq!(c(&[0.5, 0.5]), SideCounts { n1: 2, n2: 0 });
        assert_eq!(c(&[0.51, 0.9, 1.0]), SideCounts { n1: 0, n2: 3 });
    }

    #[test]
    fn utility_examples() {
        let p0 = FacilityDistribution::point(0.0).unwrap();
        assert_eq!(agent_utility(0.75, &p0), 0.75);
        assert_abs_diff_eq!(
            agent_utility(0.75, &FacilityDistribution::UniformUnit),
            0.3125,
            epsilon = 1e-15
        );
        let d = FacilityDistribution::discrete(vec![(0.0, 0.75), (2.0 / 3.0, 0.25)]).unwrap();
        assert_abs_diff_eq!(agent_utility(1.0 / 3.0, &d), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn discrete_utility_matches_sampling() {
        let d = FacilityDistribution::discrete(vec![(0.0, 0.75), (2.0 / 3.0, 0.25)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples = 200_000;
        let mean: f64 = (0..samples)
            .map(|_| {
                let y: f64 = if rng.gen::<f64>() < 0.75 { 0.0 } else { 2.0 / 3.0 };
                (1.0 / 3.0 - y).abs()
            })
            .sum::<f64>()
            / samples as f64;
        assert_abs_diff_eq!(mean, agent_utility(1.0 / 3.0, &d), epsilon = 1e-3);
    }

    #[test]
    fn cost_examples() {
        let p0 = FacilityDistribution::point(0.0).unwrap();
        assert_eq!(agent_cost(1.0, &p0), 0.0);
        let half = FacilityDistribution::point(0.5).unwrap();
        assert_eq!(agent_cost(0.5, &half), 1.0);
        let coin = FacilityDistribution::two_point(0.0, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(agent_cost(1.0, &coin), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn discrete_normalises_small_drift_only() {
        let d = FacilityDistribution::discrete(vec![(0.0, 0.5), (1.0, 0.5 + 5e-10)]).unwrap();
        match d {
            FacilityDistribution::Discrete { support } => {
                assert_abs_diff_eq!(support[0].1 + support[1].1, 1.0, epsilon = 1e-15)
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(FacilityDistribution::discrete(vec![(0.0, 0.5), (1.0, 0.6)]).is_err());
        assert!(FacilityDistribution::discrete(vec![(0.2, 0.5), (0.2, 0.5)]).is_err());
        assert!(FacilityDistribution::discrete(vec![(1.5, 1.0)]).is_err());
        assert_eq!(
            FacilityDistribution::two_point(0.0, 1.0, 1.0).unwrap(),
            FacilityDistribution::Point { y: 0.0 }
        );
    }

    #[test]
    fn uniform_utility_matches_integral() {
        // Simpson on [0, x] and [x, 1] separately: the integrand is linear on
        // each side, so the rule is exact up to rounding.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x: f64 = rng.gen();
            let simpson = |a: f64, b: f64| {
                let f = |y: f64| (y - x).abs();
                (b - a) / 6.0 * (f(a) + 4.0 * f((a + b) / 2.0) + f(b))
            };
            let integral = simpson(0.0, x) + simpson(x, 1.0);
            assert_abs_diff_eq!(
                integral,
                agent_utility(x, &FacilityDistribution::UniformUnit),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn reflection_round_trips() {
        let p = make_profile(&[0.1, 0.5, 0.75]).unwrap();
        let r = p.reflected();
        assert_eq!(r.locations(), &[0.25, 0.5, 0.9]);
        let back = r.reflected();
        for (a, b) in back.locations().iter().zip(p.locations()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }
}
