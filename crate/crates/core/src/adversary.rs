//! Worst-case approximation ratio search and the catalog of claimed bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt::{serialize_f64, serialize_opt_f64};
use crate::mechanism::{Exponent, MechanismSpec};
use crate::objective::{eval_default, ObjectiveSpec, Sense};
use crate::optima::optimum;
use crate::profile::{FacilityDistribution, Profile};

/// A found ratio may exceed a claimed bound by this much before it counts as
/// a falsification.
pub const BOUND_TOLERANCE: f64 = 1e-7;
/// Smallest perturbation used by local refinement.
pub const MIN_STEP: f64 = 1e-6;
/// Largest `n` accepted by the search.
pub const MAX_AGENTS: usize = 8;
/// Coarsest grid used for the exhaustive three-agent phase.
pub const THREE_AGENT_STEP: f64 = 1.0 / 20.0;
/// Number of phase-one profiles handed to local refinement.
const SEEDS_FROM_GRID: usize = 16;
/// Sweeps over all coordinates per step size.
const MAX_SWEEPS: usize = 100;

/// `OPT / ALG` for utilities, `ALG / OPT` for costs. A zero denominator gives
/// `+inf` unless the numerator is zero too, in which case the ratio is 1.
pub fn ratio_value(sense: Sense, alg: f64, opt: f64) -> f64 {
    let (num, den) = match sense {
        Sense::Max => (opt, alg),
        Sense::Min => (alg, opt),
    };
    if den == 0.0 {
        if num == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Ratio of a given facility distribution against the optimum.
pub fn ratio_of(spec: &ObjectiveSpec, x: &Profile, dist: &FacilityDistribution) -> Result<f64> {
    let alg = eval_default(spec, x, dist)?.value;
    let opt = optimum(spec, x).value;
    Ok(ratio_value(spec.sense(), alg, opt))
}

/// Approximation ratio of `mech` on `x`.
pub fn ratio_at(mech: &MechanismSpec, spec: &ObjectiveSpec, x: &Profile) -> Result<f64> {
    ratio_of(spec, x, &mech.run(x)?)
}

/// What the literature claims about a (mechanism, objective) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Claim {
    Bound(#[serde(serialize_with = "serialize_f64")] f64),
    Conjecture(#[serde(serialize_with = "serialize_f64")] f64),
    Unbounded,
    Unclaimed,
}

impl Claim {
    pub fn bound(&self) -> Option<f64> {
        match self {
            Claim::Bound(b) => Some(*b),
            _ => None,
        }
    }
}

/// `(2^p + 1)^{1/p}`.
pub fn deterministic_bound(p: f64) -> f64 {
    // (2^p + 1)^{1/p} = 2 (1 + 2^{-p})^{1/p}, stable for large p.
    2.0 * (1.0 + (-p).exp2()).powf(1.0 / p)
}

/// Upper bound for the power-weighted mechanism under `Su(p)`.
pub fn power_weighted_bound(p: f64) -> f64 {
    if p < 1.0 {
        2f64.powf(1.0 / p)
    } else {
        // ((2^p + 1) / (2^{p-1} + 1))^{1/p}, divided through by 2^p.
        let s = (-p).exp2();
        ((1.0 + s) / (0.5 + s)).powf(1.0 / p)
    }
}

/// The bound catalog.
pub fn claimed_bound(mech: &MechanismSpec, spec: &ObjectiveSpec) -> Claim {
    use ObjectiveSpec::*;
    match (mech, spec) {
        (MechanismSpec::MajorityVote, Su(p) | Sc(p)) => Claim::Bound(deterministic_bound(*p)),
        (MechanismSpec::MajorityVote, SuMax | ScMax) => Claim::Bound(2.0),
        (MechanismSpec::MajorityVote, SuMin | SuGeoMean) => Claim::Unbounded,
        (MechanismSpec::PowerWeighted(Exponent::Finite(q)), Su(p)) if q == p => {
            Claim::Bound(power_weighted_bound(*p))
        }
        (MechanismSpec::PowerWeighted(Exponent::Infinite), SuMax) => Claim::Bound(4.0 / 3.0),
        (MechanismSpec::SquareWeighted, ScMax) => Claim::Bound(2.0),
        (MechanismSpec::SquareWeighted, Sc(p)) if *p == 1.0 => Claim::Bound(2.0),
        (MechanismSpec::SquareWeighted, Sc(_)) => Claim::Conjecture(2.0),
        (MechanismSpec::UniformUnit, SuGeoMean) => Claim::Bound(2f64.sqrt() + 1.0),
        (MechanismSpec::UniformUnit, SuMin) => Claim::Unbounded,
        _ => Claim::Unclaimed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub grid_step: f64,
    /// Random starting profiles per `n`.
    pub restarts: usize,
    pub seed: u64,
    /// Cap on ratio evaluations.
    pub budget: u64,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.n_min && self.n_min <= self.n_max && self.n_max <= MAX_AGENTS) {
            return Err(Error::InvalidArgument(format!(
                "n range {}..={} must lie within 1..={MAX_AGENTS}",
                self.n_min, self.n_max
            )));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "grid step {} not in (0, 0.5]",
                self.grid_step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub mechanism: String,
    pub objective: String,
    #[serde(serialize_with = "serialize_f64")]
    pub worst_ratio: f64,
    pub witness: Profile,
    pub claim: Claim,
    #[serde(serialize_with = "serialize_opt_f64")]
    pub claimed_bound: Option<f64>,
    #[serde(serialize_with = "serialize_opt_f64")]
    pub slack: Option<f64>,
    pub falsified: bool,
    pub conjecture: bool,
    pub unbounded: bool,
    pub evaluations: u64,
    pub search_config: SearchConfig,
}

/// `true` if `(r, w)` beats the incumbent: larger ratio, or equal ratio with
/// a lexicographically smaller witness.
fn beats(r: f64, w: &[f64], best_r: f64, best_w: &[f64]) -> bool {
    if r != best_r {
        return r > best_r;
    }
    lex_less(w, best_w)
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    a.len() < b.len()
}

/// Points `0, step, 2 step, ...` up to and including 1.
pub fn grid_points(step: f64) -> Vec<f64> {
    let k = (1.0 / step).round();
    if (k * step - 1.0).abs() < 1e-9 {
        let k = k as u64;
        return (0..=k).map(|i| i as f64 / k as f64).collect();
    }
    let mut pts: Vec<f64> = (0..)
        .map(|i| i as f64 * step)
        .take_while(|&y| y < 1.0)
        .collect();
    pts.push(1.0);
    pts
}

struct Searcher<'a> {
    mech: &'a MechanismSpec,
    spec: &'a ObjectiveSpec,
    used: u64,
    budget: u64,
    best_r: f64,
    best_w: Vec<f64>,
}

impl Searcher<'_> {
    fn eval(&mut self, locs: Vec<f64>) -> Result<(f64, Vec<f64>)> {
        self.used += 1;
        if self.used > self.budget {
            return Err(Error::BudgetExceeded { cap: self.budget });
        }
        let x = Profile::new(locs)?;
        let r = ratio_at(self.mech, self.spec, &x)?;
        let w = x.locations().to_vec();
        if beats(r, &w, self.best_r, &self.best_w) {
            self.best_r = r;
            self.best_w = w.clone();
        }
        Ok((r, w))
    }

    /// Greedy coordinate perturbation with step halving from `start_step`
    /// down to [`MIN_STEP`]. Only strict improvements are accepted.
    fn refine(&mut self, mut locs: Vec<f64>, mut r: f64, start_step: f64) -> Result<()> {
        let mut h = start_step;
        while h >= MIN_STEP && r.is_finite() {
            for _ in 0..MAX_SWEEPS {
                let mut improved = false;
                for i in 0..locs.len() {
                    for dir in [-1.0, 1.0] {
                        let moved = (locs[i] + dir * h).clamp(0.0, 1.0);
                        if moved == locs[i] {
                            continue;
                        }
                        let mut cand = locs.clone();
                        cand[i] = moved;
                        let (cr, cw) = self.eval(cand)?;
                        if cr > r {
                            r = cr;
                            locs = cw;
                            improved = true;
                            break;
                        }
                    }
                    if !r.is_finite() {
                        return Ok(());
                    }
                }
                if !improved {
                    break;
                }
            }
            h *= 0.5;
        }
        Ok(())
    }
}

type Scored = (f64, Vec<f64>);

fn keep_top(top: &mut Vec<Scored>, r: f64, w: &[f64]) {
    if top.len() == SEEDS_FROM_GRID && top.last().is_some_and(|(lr, _)| r <= *lr) {
        return;
    }
    let pos = top.partition_point(|(tr, _)| *tr >= r);
    top.insert(pos, (r, w.to_vec()));
    top.truncate(SEEDS_FROM_GRID);
}

/// Two-phase search for the largest ratio over profiles with `n` in the
/// configured range.
///
/// Phase 1 enumerates every sorted profile on the grid for `n = 2`, and for
/// `n = 3` on a grid no finer than [`THREE_AGENT_STEP`]. Phase 2 refines the
/// best phase-1 profiles and `restarts` random profiles per `n`.
pub fn search_worst_ratio(
    mech: &MechanismSpec,
    spec: &ObjectiveSpec,
    cfg: &SearchConfig,
) -> Result<RatioReport> {
    cfg.validate()?;
    let mut s = Searcher {
        mech,
        spec,
        used: 0,
        budget: cfg.budget,
        best_r: f64::NEG_INFINITY,
        best_w: Vec::new(),
    };
    let mut top: Vec<Scored> = Vec::new();

    if (cfg.n_min..=cfg.n_max).contains(&2) {
        let pts = grid_points(cfg.grid_step);
        for (i, &a) in pts.iter().enumerate() {
            for &b in &pts[i..] {
                let (r, w) = s.eval(vec![a, b])?;
                keep_top(&mut top, r, &w);
            }
        }
    }
    if (cfg.n_min..=cfg.n_max).contains(&3) {
        let pts = grid_points(cfg.grid_step.max(THREE_AGENT_STEP));
        for (i, &a) in pts.iter().enumerate() {
            for (j, &b) in pts.iter().enumerate().skip(i) {
                for &c in &pts[j..] {
                    let (r, w) = s.eval(vec![a, b, c])?;
                    keep_top(&mut top, r, &w);
                }
            }
        }
    }
    for (r, w) in top {
        s.refine(w, r, cfg.grid_step)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for n in cfg.n_min..=cfg.n_max {
        for _ in 0..cfg.restarts {
            let locs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let (r, w) = s.eval(locs)?;
            s.refine(w, r, cfg.grid_step)?;
        }
    }

    if s.best_w.is_empty() {
        return Err(Error::InvalidArgument(
            "search visited no profiles; raise restarts or include n = 2 or 3".into(),
        ));
    }
    Ok(report(mech, spec, s.best_r, Profile::new(s.best_w)?, s.used, *cfg))
}

fn report(
    mech: &MechanismSpec,
    spec: &ObjectiveSpec,
    worst_ratio: f64,
    witness: Profile,
    evaluations: u64,
    search_config: SearchConfig,
) -> RatioReport {
    let claim = claimed_bound(mech, spec);
    let claimed = claim.bound();
    RatioReport {
        mechanism: mech.to_string(),
        objective: spec.to_string(),
        worst_ratio,
        witness,
        claim,
        claimed_bound: claimed,
        slack: claimed.map(|b| b - worst_ratio),
        falsified: claimed.is_some_and(|b| worst_ratio > b + BOUND_TOLERANCE),
        conjecture: matches!(claim, Claim::Conjecture(_)),
        unbounded: worst_ratio.is_infinite(),
        evaluations,
        search_config,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveFamily {
    Su,
    Sc,
}

impl std::str::FromStr for ObjectiveFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "su" => Ok(Self::Su),
            "sc" => Ok(Self::Sc),
            other => Err(Error::InvalidObjective(format!("unknown family `{other}`"))),
        }
    }
}

/// Member of a family at exponent `p`; `inf` selects the max objective and,
/// for utilities, `-inf` the min objective.
pub fn family_member(family: ObjectiveFamily, p: f64) -> Result<ObjectiveSpec> {
    match (family, p) {
        (ObjectiveFamily::Su, p) if p == f64::INFINITY => Ok(ObjectiveSpec::SuMax),
        (ObjectiveFamily::Su, p) if p == f64::NEG_INFINITY => Ok(ObjectiveSpec::SuMin),
        (ObjectiveFamily::Su, p) => ObjectiveSpec::su(p),
        (ObjectiveFamily::Sc, p) if p == f64::INFINITY => Ok(ObjectiveSpec::ScMax),
        (ObjectiveFamily::Sc, p) => ObjectiveSpec::sc(p),
    }
}

/// One search per exponent, each annotated from the bound catalog.
pub fn bound_curve(
    mech: &MechanismSpec,
    family: ObjectiveFamily,
    p_values: &[f64],
    cfg: &SearchConfig,
) -> Result<Vec<RatioReport>> {
    let specs = p_values
        .iter()
        .map(|&p| family_member(family, p))
        .collect::<Result<Vec<_>>>()?;
    specs
        .iter()
        .map(|spec| search_worst_ratio(mech, spec, cfg))
        .collect()
}
