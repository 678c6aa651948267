//! Exhaustive grid search for profitable misreports.
//!
//! A clean result only means no witness exists on the searched grid; it is not
//! a proof of strategyproofness. Because cost is one minus distance, a
//! misreport is profitable in the cost model exactly when it is profitable in
//! the utility model, so only expected distances are compared.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::MechanismSpec;
use crate::profile::{agent_utility, Profile};

/// A deviator must gain strictly more than this.
pub const GAIN_TOLERANCE: f64 = 1e-9;
/// Largest number of grid divisions accepted.
pub const MAX_DIVISIONS: u32 = 200;
/// Evaluation budget when the caller does not supply one.
pub const DEFAULT_BUDGET: u64 = 2_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationWitness {
    pub profile: Profile,
    /// Indices into the sorted profile.
    pub agents: Vec<usize>,
    pub misreports: Vec<f64>,
    /// Increase in expected distance for each deviator.
    pub gains: Vec<f64>,
}

/// The grid `{0, 1/k, ..., 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    divisions: u32,
}

impl Grid {
    pub fn new(divisions: u32) -> Result<Self> {
        if divisions == 0 || divisions > MAX_DIVISIONS {
            return Err(Error::InvalidArgument(format!(
                "grid divisions must lie in 1..={MAX_DIVISIONS}, got {divisions}"
            )));
        }
        Ok(Self { divisions })
    }

    /// Accepts steps of the form `1/k`.
    pub fn from_step(step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::InvalidArgument(format!("grid step {step} not in (0, 1]")));
        }
        let k = (1.0 / step).round();
        if (1.0 / k - step).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "grid step {step} is not of the form 1/k"
            )));
        }
        Self::new(k as u32)
    }

    pub fn divisions(&self) -> u32 {
        self.divisions
    }

    pub fn point(&self, i: u32) -> f64 {
        i as f64 / self.divisions as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.divisions).map(|i| self.point(i))
    }
}

struct Counter {
    used: u64,
    cap: u64,
}

impl Counter {
    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.cap {
            return Err(Error::BudgetExceeded { cap: self.cap });
        }
        Ok(())
    }
}

/// Calls `visit` on every sorted index tuple of length `n` over
/// `0..=divisions`, in lexicographic order, until it returns `Some`.
fn for_each_sorted_tuple<T>(
    n: usize,
    divisions: u32,
    mut visit: impl FnMut(&[u32]) -> Result<Option<T>>,
) -> Result<Option<T>> {
    let mut idx = vec![0u32; n];
    loop {
        if let Some(found) = visit(&idx)? {
            return Ok(Some(found));
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(None);
            }
            pos -= 1;
            if idx[pos] < divisions {
                idx[pos] += 1;
                let v = idx[pos];
                for later in &mut idx[pos + 1..] {
                    *later = v;
                }
                break;
            }
        }
    }
}

/// Calls `visit` on every k-subset of `0..n` in lexicographic order.
fn for_each_subset<T>(
    n: usize,
    k: usize,
    mut visit: impl FnMut(&[usize]) -> Result<Option<T>>,
) -> Result<Option<T>> {
    if k == 0 || k > n {
        return Ok(None);
    }
    let mut s: Vec<usize> = (0..k).collect();
    loop {
        if let Some(found) = visit(&s)? {
            return Ok(Some(found));
        }
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(None);
            }
            i -= 1;
            if s[i] < n - k + i {
                s[i] += 1;
                for j in i + 1..k {
                    s[j] = s[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Searches for a coalition of size at most `max_coalition` at one fixed
/// profile, with misreports drawn from `grid`.
fn search_profile(
    mech: &MechanismSpec,
    x: &Profile,
    grid: Grid,
    max_coalition: usize,
    counter: &mut Counter,
) -> Result<Option<DeviationWitness>> {
    let truth = mech.run(x)?;
    counter.tick()?;
    let locs = x.locations();
    let base: Vec<f64> = locs.iter().map(|&xi| agent_utility(xi, &truth)).collect();
    let n = locs.len();

    for size in 1..=max_coalition.min(n) {
        let found = for_each_subset(n, size, |coalition| {
            for_each_sorted_or_free_tuple(size, grid.divisions(), |reports| {
                let mut deviated = locs.to_vec();
                for (&agent, &r) in coalition.iter().zip(reports) {
                    deviated[agent] = grid.point(r);
                }
                let out = mech.run(&Profile::from_trusted(deviated))?;
                counter.tick()?;
                let mut gains = Vec::with_capacity(size);
                for &agent in coalition {
                    let g = agent_utility(locs[agent], &out) - base[agent];
                    if g <= GAIN_TOLERANCE {
                        return Ok(None);
                    }
                    gains.push(g);
                }
                Ok(Some(DeviationWitness {
                    profile: x.clone(),
                    agents: coalition.to_vec(),
                    misreports: reports.iter().map(|&r| grid.point(r)).collect(),
                    gains,
                }))
            })
        })?;
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

/// Every tuple in `{0..=divisions}^k` in lexicographic order (coalition
/// members misreport independently, so order matters here).
fn for_each_sorted_or_free_tuple<T>(
    k: usize,
    divisions: u32,
    mut visit: impl FnMut(&[u32]) -> Result<Option<T>>,
) -> Result<Option<T>> {
    let mut idx = vec![0u32; k];
    loop {
        if let Some(found) = visit(&idx)? {
            return Ok(Some(found));
        }
        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok(None);
            }
            pos -= 1;
            if idx[pos] < divisions {
                idx[pos] += 1;
                for later in &mut idx[pos + 1..] {
                    *later = 0;
                }
                break;
            }
        }
    }
}

fn search(
    mech: &MechanismSpec,
    n: usize,
    grid: Grid,
    max_coalition: usize,
    budget: u64,
) -> Result<Option<DeviationWitness>> {
    let mut counter = Counter { used: 0, cap: budget };
    for_each_sorted_tuple(n, grid.divisions(), |idx| {
        let x = Profile::from_trusted(idx.iter().map(|&i| grid.point(i)).collect());
        search_profile(mech, &x, grid, max_coalition, &mut counter)
    })
}

/// Single-agent manipulation search over all sorted profiles of `n` agents on
/// the grid. Returns the lexicographically first witness.
pub fn check_sp(
    mech: &MechanismSpec,
    n: usize,
    grid_step: f64,
    budget: u64,
) -> Result<Option<DeviationWitness>> {
    if !(1..=4).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "exhaustive SP check supports 1 <= n <= 4, got {n}"
        )));
    }
    search(mech, n, Grid::from_step(grid_step)?, 1, budget)
}

/// Coalition manipulation search: every member of the coalition must gain
/// strictly.
pub fn check_gsp(
    mech: &MechanismSpec,
    n: usize,
    grid_step: f64,
    max_coalition: usize,
    budget: u64,
) -> Result<Option<DeviationWitness>> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "exhaustive GSP check supports 1 <= n <= 3, got {n}"
        )));
    }
    if max_coalition == 0 || max_coalition > n {
        return Err(Error::InvalidArgument(format!(
            "coalition size must lie in 1..={n}, got {max_coalition}"
        )));
    }
    search(mech, n, Grid::from_step(grid_step)?, max_coalition, budget)
}

/// Searches a single profile for a witness; misreports range over the grid.
pub fn deviation_at(
    mech: &MechanismSpec,
    x: &Profile,
    grid_step: f64,
    max_coalition: usize,
) -> Result<Option<DeviationWitness>> {
    let mut counter = Counter { used: 0, cap: DEFAULT_BUDGET };
    search_profile(mech, x, Grid::from_step(grid_step)?, max_coalition, &mut counter)
}

/// Recomputes each deviator's gain from scratch.
pub fn replay(mech: &MechanismSpec, w: &DeviationWitness) -> Result<Vec<f64>> {
    let truth = mech.run(&w.profile)?;
    let mut deviated = w.profile.locations().to_vec();
    for (&agent, &r) in w.agents.iter().zip(&w.misreports) {
        deviated[agent] = r;
    }
    let out = mech.run(&Profile::new(deviated)?)?;
    Ok(w.agents
        .iter()
        .map(|&agent| {
            let xi = w.profile.locations()[agent];
            agent_utility(xi, &out) - agent_utility(xi, &truth)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{custom_by_name, Exponent};
    use crate::profile::make_profile;

    #[test]
    fn grid_validation() {
        assert_eq!(Grid::from_step(0.02).unwrap().divisions(), 50);
        assert_eq!(Grid::from_step(0.25).unwrap().divisions(), 4);
        assert!(Grid::from_step(0.3).is_err());
        assert!(Grid::from_step(1.0 / 400.0).is_err());
    }

    #[test]
    fn sorted_tuples_are_multisets() {
        let mut seen = Vec::new();
        for_each_sorted_tuple::<()>(2, 2, |t| {
            seen.push(t.to_vec());
            Ok(None)
        })
        .unwrap();
        assert_eq!(
            seen,
            vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 1], vec![1, 2], vec![2, 2]]
        );
    }

    #[test]
    fn subsets_in_order() {
        let mut seen = Vec::new();
        for_each_subset::<()>(3, 2, |s| {
            seen.push(s.to_vec());
            Ok(None)
        })
        .unwrap();
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn majority_vote_has_no_witness() {
        let w = check_sp(&MechanismSpec::MajorityVote, 2, 1.0 / 20.0, DEFAULT_BUDGET).unwrap();
        assert!(w.is_none());
    }

    #[test]
    fn square_weighted_has_no_witness() {
        let w = check_sp(&MechanismSpec::SquareWeighted, 3, 0.1, DEFAULT_BUDGET).unwrap();
        assert!(w.is_none());
    }

    #[test]
    fn power_weighted_gsp_small() {
        let m = MechanismSpec::PowerWeighted(Exponent::Finite(2.0));
        assert!(check_gsp(&m, 2, 0.1, 2, DEFAULT_BUDGET).unwrap().is_none());
        assert!(check_gsp(&MechanismSpec::UniformUnit, 3, 0.25, 3, DEFAULT_BUDGET)
            .unwrap()
            .is_none());
    }

    #[test]
    fn dictator_is_manipulable() {
        let m = MechanismSpec::Custom(custom_by_name("dictator").unwrap());
        let w = check_sp(&m, 2, 0.25, DEFAULT_BUDGET).unwrap().expect("witness");
        assert_eq!(w.profile.locations(), &[0.0, 0.25]);
        let gains = replay(&m, &w).unwrap();
        for (a, b) in gains.iter().zip(&w.gains) {
            assert!((a - b).abs() <= 1e-12);
            assert!(*a > GAIN_TOLERANCE);
        }

        // Agent 0 at 0.25 reports 1.0 and the facility moves to 0.5.
        let x = make_profile(&[0.25, 0.5]).unwrap();
        let w = DeviationWitness {
            profile: x,
            agents: vec![0],
            misreports: vec![1.0],
            gains: vec![],
        };
        let g = replay(&m, &w).unwrap();
        assert!((g[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn average_is_group_manipulable() {
        let m = MechanismSpec::Custom(custom_by_name("average").unwrap());
        let w = check_gsp(&m, 2, 0.25, 2, DEFAULT_BUDGET).unwrap().expect("witness");
        assert!(w.gains.iter().all(|&g| g > GAIN_TOLERANCE));
    }

    #[test]
    fn threshold_family_is_group_strategyproof() {
        for cutoff in 0..=3 {
            let m = MechanismSpec::threshold(0.2, 0.7, cutoff).unwrap();
            assert!(check_gsp(&m, 2, 0.1, 2, DEFAULT_BUDGET).unwrap().is_none(), "cutoff {cutoff}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let r = check_sp(&MechanismSpec::MajorityVote, 3, 0.02, 1000);
        assert_eq!(r, Err(Error::BudgetExceeded { cap: 1000 }));
    }

    #[test]
    fn rejects_out_of_range_sizes() {
        assert!(check_sp(&MechanismSpec::MajorityVote, 5, 0.5, DEFAULT_BUDGET).is_err());
        assert!(check_gsp(&MechanismSpec::MajorityVote, 4, 0.5, 2, DEFAULT_BUDGET).is_err());
        assert!(check_gsp(&MechanismSpec::MajorityVote, 2, 0.5, 3, DEFAULT_BUDGET).is_err());
    }
}
