//! Executable lower-bound constructions.
//!
//! Most randomized lower bounds reduce to one question: given a profile and a
//! moment constraint `E|y - anchor| <= budget` that strategyproofness forces
//! on the facility distribution, how well can any distribution do? The
//! objective's homogeneous form is linear in the distribution, so this is a
//! linear program with a normalisation row and one inequality. Its optimum is
//! attained at a vertex: a single point, or two points with the constraint
//! tight. [`solve_extremal_distribution`] enumerates exactly those vertices.

use serde::Serialize;

use crate::adversary::{ratio_at, ratio_of, ratio_value};
use crate::error::{Error, Result};
use crate::fmt::serialize_f64;
use crate::mechanism::MechanismSpec;
use crate::objective::{ObjectiveSpec, Sense};
use crate::optima::{golden_section, optimum};
use crate::profile::{FacilityDistribution, Profile};

/// Number of equally spaced points in the default support grid.
pub const DEFAULT_SUPPORT_POINTS: usize = 201;
/// Convergence width for the one-dimensional parameter optimisations.
pub const PARAM_TOLERANCE: f64 = 1e-9;
/// One-sided offset used where a proof takes a limit from above.
pub const LIMIT_OFFSET: f64 = 1e-9;
/// Distance from 1/2 of the first agent in the two-candidate witness.
pub const TWO_CANDIDATE_EPS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedDistProblem {
    pub profile: Profile,
    pub objective: ObjectiveSpec,
    pub anchor: f64,
    pub budget: f64,
    pub sense: Sense,
    pub support: Vec<f64>,
}

impl ConstrainedDistProblem {
    /// Uses the default support: the 201-point grid, every agent and the
    /// anchor. The sense follows the objective.
    pub fn new(profile: Profile, objective: ObjectiveSpec, anchor: f64, budget: f64) -> Result<Self> {
        let mut support: Vec<f64> = (0..DEFAULT_SUPPORT_POINTS)
            .map(|i| i as f64 / (DEFAULT_SUPPORT_POINTS - 1) as f64)
            .collect();
        support.extend_from_slice(profile.locations());
        support.push(anchor);
        Self::with_support(profile, objective, anchor, budget, support)
    }

    pub fn with_support(
        profile: Profile,
        objective: ObjectiveSpec,
        anchor: f64,
        budget: f64,
        mut support: Vec<f64>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&anchor) {
            return Err(Error::OutOfRange(anchor));
        }
        if !(budget >= 0.0 && budget <= anchor.max(1.0 - anchor)) {
            return Err(Error::InvalidArgument(format!(
                "budget {budget} must lie in [0, max(anchor, 1 - anchor)]"
            )));
        }
        if let Some(&bad) = support.iter().find(|y| !(0.0..=1.0).contains(*y)) {
            return Err(Error::OutOfRange(bad));
        }
        support.sort_by(f64::total_cmp);
        support.dedup();
        if support.is_empty() {
            return Err(Error::InvalidArgument("empty support grid".into()));
        }
        Ok(Self {
            sense: objective.sense(),
            profile,
            objective,
            anchor,
            budget,
            support,
        })
    }
}

/// Optimal distribution over the support under the moment constraint, with
/// its value in the objective's homogeneous form.
pub fn solve_extremal_distribution(
    prob: &ConstrainedDistProblem,
) -> Result<(FacilityDistribution, f64)> {
    let ys = &prob.support;
    let c: Vec<f64> = ys
        .iter()
        .map(|&y| prob.objective.power_form_at_point(&prob.profile, y))
        .collect();
    let g: Vec<f64> = ys.iter().map(|&y| (y - prob.anchor).abs()).collect();
    let better = |a: f64, b: f64| match prob.sense {
        Sense::Max => a > b,
        Sense::Min => a < b,
    };

    let mut best: Option<(Vec<(f64, f64)>, f64)> = None;
    for i in 0..ys.len() {
        if g[i] <= prob.budget && best.as_ref().is_none_or(|b| better(c[i], b.1)) {
            best = Some((vec![(ys[i], 1.0)], c[i]));
        }
    }
    if best.is_none() {
        return Err(Error::Infeasible);
    }
    for i in 0..ys.len() {
        if g[i] >= prob.budget {
            continue;
        }
        for j in 0..ys.len() {
            if g[j] <= prob.budget {
                continue;
            }
            let q = (g[j] - prob.budget) / (g[j] - g[i]);
            let v = q * c[i] + (1.0 - q) * c[j];
            if better(v, best.as_ref().map_or(f64::NAN, |b| b.1)) {
                best = Some((vec![(ys[i], q), (ys[j], 1.0 - q)], v));
            }
        }
    }
    let (support, value) = best.expect("feasible");
    Ok((FacilityDistribution::discrete(support)?, value))
}

/// An extremal distribution compared against the optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalRatio {
    pub objective: String,
    pub distribution: FacilityDistribution,
    /// Best achievable value in homogeneous form.
    pub alg_power: f64,
    pub alg: f64,
    pub opt: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub ratio: f64,
}

pub fn extremal_ratio(prob: &ConstrainedDistProblem) -> Result<ExtremalRatio> {
    let (distribution, alg_power) = solve_extremal_distribution(prob)?;
    let alg = prob.objective.from_power_form(alg_power, prob.profile.len());
    let opt = optimum(&prob.objective, &prob.profile).value;
    Ok(ExtremalRatio {
        objective: prob.objective.to_string(),
        distribution,
        alg_power,
        alg,
        opt,
        ratio: ratio_value(prob.objective.sense(), alg, opt),
    })
}

/// The profile `(1/3, 1)` with the constraint `E|y - 2/3| <= 1/2`.
pub fn third_one_problem(objective: ObjectiveSpec) -> Result<ConstrainedDistProblem> {
    let x = Profile::new(vec![1.0 / 3.0, 1.0])?;
    ConstrainedDistProblem::new(x, objective, 2.0 / 3.0, 0.5)
}

/// `r(p) = (4(3^p + 1) / (3(3^p + 1) + 2))^{1/p}`.
pub fn su_lower_bound_closed_form(p: f64) -> f64 {
    // Divided through by 3^p.
    let s = (-p * 3f64.ln()).exp();
    (4.0 * (1.0 + s) / (3.0 * (1.0 + s) + 2.0 * s)).powf(1.0 / p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundRow {
    #[serde(serialize_with = "serialize_f64")]
    pub p: f64,
    pub closed_form: f64,
    pub from_lp: f64,
}

/// Randomized su lower bound per exponent, from the closed form and from the
/// extremal LP. `p = inf` uses the max objective, whose limit is 6/5.
pub fn lower_bound_curve_su(p_values: &[f64]) -> Result<Vec<LowerBoundRow>> {
    p_values
        .iter()
        .map(|&p| {
            if p == f64::INFINITY {
                let r = extremal_ratio(&third_one_problem(ObjectiveSpec::SuMax)?)?;
                return Ok(LowerBoundRow {
                    p,
                    closed_form: 6.0 / 5.0,
                    from_lp: r.ratio,
                });
            }
            let r = extremal_ratio(&third_one_problem(ObjectiveSpec::su(p)?)?)?;
            Ok(LowerBoundRow {
                p,
                closed_form: su_lower_bound_closed_form(p),
                from_lp: r.ratio,
            })
        })
        .collect()
}

/// Randomized sc lower bound from the extremal LP; `(5/4)^{1/p}`.
pub fn sc_lower_bound(p: f64) -> Result<ExtremalRatio> {
    extremal_ratio(&third_one_problem(ObjectiveSpec::sc(p)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeoMeanScan {
    /// Probability on 0; the rest sits on 2/3.
    pub q: f64,
    /// Product of expected utilities.
    pub alg_squared: f64,
    pub opt_squared: f64,
    pub ratio_squared: f64,
}

/// Scans two-point distributions on `{0, 2/3}` for profile `(1/3, 1)` under
/// `E|y - 2/3| <= 1/2`, maximising the product of expected utilities.
/// `steps` grid values of `q` are tried together with the tight boundary.
pub fn geomean_extremal_scan(steps: usize) -> Result<GeoMeanScan> {
    let x = Profile::new(vec![1.0 / 3.0, 1.0])?;
    let (anchor, budget) = (2.0 / 3.0, 0.5);
    let product = |q: f64| {
        x.locations()
            .iter()
            .map(|&xi| q * xi + (1.0 - q) * (xi - anchor).abs())
            .product::<f64>()
    };
    let q_max = (budget / anchor).min(1.0);
    let steps = steps.max(1);
    let mut best = (0.0, product(0.0));
    for q in (0..=steps).map(|k| k as f64 / steps as f64).chain([q_max]) {
        if q > q_max {
            continue;
        }
        let v = product(q);
        if v > best.1 {
            best = (q, v);
        }
    }
    let opt = optimum(&ObjectiveSpec::SuGeoMean, &x).value;
    let opt_squared = opt * opt;
    Ok(GeoMeanScan {
        q: best.0,
        alg_squared: best.1,
        opt_squared,
        ratio_squared: opt_squared / best.1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinUtilityBound {
    pub delta: f64,
    pub epsilon: f64,
    pub p0: f64,
    pub x2_prime: f64,
}

/// `P0 = 3 / (4 (1 - 2 delta))`.
fn chain_p0(delta: f64) -> f64 {
    3.0 / (4.0 * (1.0 - 2.0 * delta))
}

/// `eps(delta) = x2' / (x2' - 2 delta (1 - P0)) - 1` with
/// `x2' = 2 (1 + delta) / 3` approached from above.
pub fn min_utility_epsilon(delta: f64) -> f64 {
    let x2 = 2.0 * (1.0 + delta) / 3.0 + LIMIT_OFFSET;
    x2 / (x2 - 2.0 * delta * (1.0 - chain_p0(delta))) - 1.0
}

/// Maximises the two-agent min-utility lower bound over `delta in (0, 1/8)`.
pub fn min_utility_n2_bound() -> MinUtilityBound {
    let (delta, epsilon) =
        golden_section(min_utility_epsilon, Sense::Max, 0.0, 0.125, PARAM_TOLERANCE);
    MinUtilityBound {
        delta,
        epsilon,
        p0: chain_p0(delta),
        x2_prime: 2.0 * (1.0 + delta) / 3.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxCostBound {
    /// Ratio at `delta = 0.026`, `P0 = 0.79`, `x2' = 0.684`.
    pub at_reference_point: f64,
    pub optimized_delta: f64,
    pub optimized: f64,
}

/// `r = (1 - ALG2) / (1 - OPT2)` with `OPT2 = x2'/2` and
/// `ALG2 = x2'/2 - (1 - P0) delta`.
pub fn max_cost_ratio(delta: f64, p0: f64, x2_prime: f64) -> f64 {
    let opt2 = x2_prime / 2.0;
    let alg2 = opt2 - (1.0 - p0) * delta;
    (1.0 - alg2) / (1.0 - opt2)
}

/// Max-cost randomized lower bound at the reference parameters and
/// re-optimised along the chain `x2' = 2(1 + delta)/3`,
/// `P0 = 3 / (4 (1 - 2 delta))`.
pub fn max_cost_lower_bound() -> MaxCostBound {
    let at_reference_point = max_cost_ratio(0.026, 0.79, 0.684);
    let chain = |d: f64| max_cost_ratio(d, chain_p0(d), 2.0 * (1.0 + d) / 3.0);
    let (optimized_delta, optimized) =
        golden_section(chain, Sense::Max, 0.0, 0.125, PARAM_TOLERANCE);
    MaxCostBound {
        at_reference_point,
        optimized_delta,
        optimized,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoCandidateBound {
    pub objective: String,
    /// Closed-form bound on the ratio.
    pub bound: f64,
    /// Ratio of the even endpoint mixture on the witness profile.
    pub evaluated: f64,
    pub witness: Profile,
}

/// Two-candidate sc lower bound `(2^{p-1} + 1)^{1/p}`, checked by evaluating
/// the even mixture on `{0, 1}` at `(1/2 - eps, 1)`.
pub fn two_candidate_sc_bound(p: f64) -> Result<TwoCandidateBound> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("two-candidate bound needs p >= 1, got {p}")));
    }
    let spec = ObjectiveSpec::sc(p)?;
    let witness = Profile::new(vec![0.5 - TWO_CANDIDATE_EPS, 1.0])?;
    let mix = FacilityDistribution::two_point(0.0, 0.5, 1.0)?;
    Ok(TwoCandidateBound {
        objective: spec.to_string(),
        bound: (1.0 + (p - 1.0).exp2()).powf(1.0 / p),
        evaluated: ratio_of(&spec, &witness, &mix)?,
        witness,
    })
}

/// Max-cost analog: the even mixture on `(0, 1)` has ratio 2.
pub fn two_candidate_sc_max_bound() -> Result<TwoCandidateBound> {
    let witness = Profile::new(vec![0.0, 1.0])?;
    let mix = FacilityDistribution::two_point(0.0, 0.5, 1.0)?;
    Ok(TwoCandidateBound {
        objective: ObjectiveSpec::ScMax.to_string(),
        bound: 2.0,
        evaluated: ratio_of(&ObjectiveSpec::ScMax, &witness, &mix)?,
        witness,
    })
}

/// `max(x, 1 - x) / E_uniform|x - y|`, the per-agent geometric-mean ratio of
/// the uniform mechanism.
pub fn uniform_agent_ratio(x: f64) -> f64 {
    x.max(1.0 - x) / ((2.0 * x * x - 2.0 * x + 1.0) / 2.0)
}

/// Grid maximum of [`uniform_agent_ratio`]; returns `(x, ratio)`. The ratio
/// is symmetric about 1/2, so `x` is reported in `[1/2, 1]`.
pub fn uniform_geomean_agent_bound(grid_step: f64) -> (f64, f64) {
    let k = (1.0 / grid_step).round() as u64;
    let (x, r) = (0..=k)
        .map(|i| i as f64 / k as f64)
        .map(|x| (x, uniform_agent_ratio(x)))
        .fold((0.0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    (x.max(1.0 - x), r)
}

/// `x_1 = 1/sqrt(n)` and the remaining agents spread evenly up to 1.
pub fn uniform_min_utility_family(n: usize) -> Result<Profile> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("family needs n >= 2, got {n}")));
    }
    let x1 = 1.0 / (n as f64).sqrt();
    let gap = (1.0 - x1) / (n - 1) as f64;
    Profile::new((0..n).map(|i| (x1 + i as f64 * gap).min(1.0)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub ns: Vec<usize>,
    pub ratios: Vec<f64>,
    /// Least-squares slope of log ratio against log n.
    pub exponent: f64,
}

/// Ratios of the uniform mechanism on the min-utility family and their
/// log-log growth exponent.
pub fn uniform_min_utility_growth(ns: &[usize]) -> Result<GrowthFit> {
    let ratios = ns
        .iter()
        .map(|&n| {
            let x = uniform_min_utility_family(n)?;
            ratio_at(&MechanismSpec::UniformUnit, &ObjectiveSpec::SuMin, &x)
        })
        .collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    Ok(GrowthFit {
        ns: ns.to_vec(),
        exponent: slope(&lx, &ly),
        ratios,
    })
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// One line of the witness suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessCheck {
    pub name: String,
    pub expected: f64,
    pub found: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl WitnessCheck {
    fn new(name: impl Into<String>, expected: f64, found: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            expected,
            found,
            tolerance,
            passed: (found - expected).abs() <= tolerance,
        }
    }

    fn at_least(name: impl Into<String>, floor: f64, found: f64) -> Self {
        Self {
            name: name.into(),
            expected: floor,
            found,
            tolerance: 0.0,
            passed: found >= floor,
        }
    }
}

/// Runs every construction and compares against its reference value.
pub fn run_suite() -> Result<Vec<WitnessCheck>> {
    let mut out = Vec::new();
    for row in lower_bound_curve_su(&[0.5, 1.0, 2.0, 4.0, f64::INFINITY])? {
        out.push(WitnessCheck::new(
            format!("su lower bound lp p={}", crate::fmt::g12(row.p)),
            row.closed_form,
            row.from_lp,
            1e-9,
        ));
    }
    for p in [1.0, 2.0] {
        let r = sc_lower_bound(p)?;
        out.push(WitnessCheck::new(
            format!("sc lower bound lp p={p}"),
            1.25f64.powf(1.0 / p),
            r.ratio,
            1e-9,
        ));
    }
    let g = geomean_extremal_scan(1000)?;
    out.push(WitnessCheck::new("geomean extremal scan", 1.2, g.ratio_squared, 1e-9));

    let m = min_utility_n2_bound();
    out.push(WitnessCheck::new("min utility n=2 delta", 0.065153, m.delta, 1e-4));
    out.push(WitnessCheck::new("min utility n=2 epsilon", 0.025909, m.epsilon, 1e-5));

    let c = max_cost_lower_bound();
    out.push(WitnessCheck::new("max cost chain at reference point", 1.008, c.at_reference_point, 1e-3));
    out.push(WitnessCheck::at_least("max cost chain optimized", 1.007, c.optimized));

    for p in [1.0, 2.0] {
        let t = two_candidate_sc_bound(p)?;
        out.push(WitnessCheck::new(format!("two-candidate sc p={p}"), t.bound, t.evaluated, 0.01));
    }
    let t = two_candidate_sc_max_bound()?;
    out.push(WitnessCheck::new("two-candidate sc max", t.bound, t.evaluated, 1e-12));

    let (x, r) = uniform_geomean_agent_bound(1e-5);
    out.push(WitnessCheck::new("uniform geomean agent ratio", 2f64.sqrt() + 1.0, r, 1e-4));
    out.push(WitnessCheck::new("uniform geomean agent argmax", 0.5f64.sqrt(), x, 1e-4));

    let fit = uniform_min_utility_growth(&[4, 16, 64, 256])?;
    out.push(WitnessCheck::new("uniform min utility growth exponent", 0.5, fit.exponent, 0.1));
    Ok(out)
}
