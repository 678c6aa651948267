use approx::assert_abs_diff_eq;
use ofl_core::adversary::{ratio_at, search_worst_ratio, SearchConfig};
use ofl_core::mechanism::{power_weighted_prob_zero, Exponent};
use ofl_core::objective::{
    eval_at_point, eval_distribution, eval_expected_aggregate, eval_expected_power,
};
use ofl_core::optima::{opt_convex_candidates, opt_grid, opt_su_min, optimum};
use ofl_core::profile::{agent_cost, agent_utility};
use ofl_core::witnesses::{
    lower_bound_curve_su, solve_extremal_distribution, third_one_problem,
    ConstrainedDistProblem,
};
use ofl_core::{
    Convention, FacilityDistribution, MechanismSpec, ObjectiveSpec, Profile, SideCounts,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn locations(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, 1..=max_n)
}

fn distribution() -> impl Strategy<Value = FacilityDistribution> {
    prop_oneof![
        (0.0..=1.0f64).prop_map(|y| FacilityDistribution::Point { y }),
        Just(FacilityDistribution::UniformUnit),
        prop::collection::vec((0.0..=1.0f64, 0.01..1.0f64), 1..5).prop_map(|mut atoms| {
            atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
            atoms.dedup_by(|a, b| a.0 == b.0);
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            FacilityDistribution::discrete(atoms.into_iter().map(|(y, w)| (y, w / total)).collect())
                .unwrap()
        }),
    ]
}

fn convex_specs() -> Vec<ObjectiveSpec> {
    vec![
        ObjectiveSpec::Su(1.0),
        ObjectiveSpec::Su(2.5),
        ObjectiveSpec::SuMax,
        ObjectiveSpec::Sc(1.0),
        ObjectiveSpec::Sc(2.0),
        ObjectiveSpec::Sc(4.0),
        ObjectiveSpec::ScMax,
    ]
}

fn no_half(v: &[f64]) -> bool {
    v.iter().all(|&x| (x - 0.5).abs() > 1e-9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn utility_plus_cost_is_one(x in 0.0..=1.0f64, d in distribution()) {
        prop_assert!((agent_utility(x, &d) + agent_cost(x, &d) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn side_counts_are_total_and_order_free(mut v in locations(8)) {
        let a = Profile::new(v.clone()).unwrap().side_counts();
        v.reverse();
        let b = Profile::new(v.clone()).unwrap().side_counts();
        prop_assert_eq!(a, b);
        prop_assert_eq!(a.total(), v.len());
    }

    #[test]
    fn conventions_agree_on_points(v in locations(6), y in 0.0..=1.0f64) {
        let x = Profile::new(v).unwrap();
        let d = FacilityDistribution::Point { y };
        for spec in convex_specs().into_iter().chain([ObjectiveSpec::SuMin, ObjectiveSpec::SuGeoMean, ObjectiveSpec::Su(0.5)]) {
            let a = eval_distribution(&spec, &x, &d, Convention::ExpectedAggregate).unwrap().value;
            let b = eval_distribution(&spec, &x, &d, Convention::ExpectedPower).unwrap().value;
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn conventions_agree_for_linear_objectives(v in locations(6), d in distribution()) {
        let x = Profile::new(v).unwrap();
        for spec in [ObjectiveSpec::Su(1.0), ObjectiveSpec::Sc(1.0)] {
            let a = eval_expected_aggregate(&spec, &x, &d).unwrap().value;
            let b = eval_expected_power(&spec, &x, &d).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-10, "{spec}: {a} vs {b}");
        }
    }

    #[test]
    fn lp_aggregate_non_increasing_in_p(v in prop::collection::vec(0.0..=1.0f64, 2..6), y in 0.0..=1.0f64) {
        let x = Profile::new(v).unwrap();
        let ps = [0.25, 0.5, 1.0, 1.5, 2.0, 4.0, 8.0, 32.0];
        for spec_of in [ObjectiveSpec::Su as fn(f64) -> ObjectiveSpec, ObjectiveSpec::Sc] {
            let vals: Vec<f64> = ps
                .iter()
                .filter(|&&p| p >= 1.0 || spec_of(1.0).is_utility())
                .map(|&p| eval_at_point(&spec_of(p), &x, y))
                .collect();
            for w in vals.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-10, "{vals:?}");
            }
        }
    }

    #[test]
    fn su64_is_close_to_max(v in locations(5), y in 0.0..=1.0f64) {
        let x = Profile::new(v).unwrap();
        let a = eval_at_point(&ObjectiveSpec::Su(64.0), &x, y);
        let b = eval_at_point(&ObjectiveSpec::SuMax, &x, y);
        prop_assert!((a - b).abs() <= 0.05);
    }

    #[test]
    fn optimum_is_reflection_invariant(v in locations(6)) {
        let x = Profile::new(v).unwrap();
        let r = x.reflected();
        for spec in convex_specs().into_iter().chain([ObjectiveSpec::SuMin, ObjectiveSpec::SuGeoMean, ObjectiveSpec::Su(0.5)]) {
            let a = optimum(&spec, &x);
            let b = optimum(&spec, &r);
            prop_assert!((a.value - b.value).abs() <= 1e-10, "{spec}: {} vs {}", a.value, b.value);
            let mirrored = eval_at_point(&spec, &x, 1.0 - b.location);
            prop_assert!((mirrored - a.value).abs() <= 1e-9, "{spec}");
        }
    }

    #[test]
    fn majority_vote_is_a_threshold_mechanism(v in locations(7)) {
        let x = Profile::new(v).unwrap();
        let cutoff = x.len().div_ceil(2);
        let t = MechanismSpec::threshold(0.0, 1.0, cutoff).unwrap();
        prop_assert_eq!(MechanismSpec::MajorityVote.run(&x).unwrap(), t.run(&x).unwrap());
    }

    #[test]
    fn majority_vote_matches_strict_majority_cutoff_for_odd_n(
        v in prop::collection::vec(0.0..=1.0f64, 1..4).prop_map(|mut v| { if v.len() % 2 == 0 { v.pop(); } v })
    ) {
        prop_assume!(!v.is_empty() && no_half(&v));
        let x = Profile::new(v).unwrap();
        let t = MechanismSpec::threshold(0.0, 1.0, x.len() / 2 + 1).unwrap();
        prop_assert_eq!(MechanismSpec::MajorityVote.run(&x).unwrap(), t.run(&x).unwrap());
    }

    #[test]
    fn weighted_mechanisms_are_reflection_equivariant(v in locations(7), p in 0.1..8.0f64) {
        prop_assume!(no_half(&v));
        let x = Profile::new(v).unwrap();
        for m in [MechanismSpec::SquareWeighted, MechanismSpec::power_weighted(p).unwrap(), MechanismSpec::PowerWeighted(Exponent::Infinite)] {
            let a = m.run(&x).unwrap();
            let b = m.run(&x.reflected()).unwrap();
            prop_assert!((a.mass_at(0.0) - b.mass_at(1.0)).abs() <= 1e-12);
            let total = a.mass_at(0.0) + a.mass_at(1.0);
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn p0_decreases_as_agents_move_left(n1 in 0usize..8, n2 in 1usize..8, p in 0.1..8.0f64) {
        let before = SideCounts { n1, n2 };
        let after = SideCounts { n1: n1 + 1, n2: n2 - 1 };
        for e in [Exponent::Finite(2.0), Exponent::Finite(p), Exponent::Infinite] {
            prop_assert!(power_weighted_prob_zero(after, e) <= power_weighted_prob_zero(before, e) + 1e-15);
        }
    }

    #[test]
    fn lp_matches_exhaustive_mixture_scan(
        v in prop::collection::vec(0.0..=1.0f64, 1..4),
        anchor in 0.0..=1.0f64,
        frac in 0.05..0.95f64,
        k in 5usize..30,
        spec_ix in 0usize..4,
    ) {
        let specs = [ObjectiveSpec::Su(1.0), ObjectiveSpec::Su(2.0), ObjectiveSpec::Sc(1.0), ObjectiveSpec::SuMax];
        let spec = specs[spec_ix];
        let x = Profile::new(v).unwrap();
        let budget = frac * anchor.max(1.0 - anchor);
        let support: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        let prob = ConstrainedDistProblem::with_support(x.clone(), spec, anchor, budget, support.clone()).unwrap();
        let Ok((_, value)) = solve_extremal_distribution(&prob) else { return Ok(()); };
        // Brute force over two-point mixtures with weights on a fine grid.
        let c: Vec<f64> = support.iter().map(|&y| spec.power_form_at_point(&x, y)).collect();
        let g: Vec<f64> = support.iter().map(|&y| (y - anchor).abs()).collect();
        let max = spec.is_utility();
        let mut best = if max { f64::NEG_INFINITY } else { f64::INFINITY };
        for i in 0..support.len() {
            for j in 0..support.len() {
                for s in 0..=200 {
                    let q = s as f64 / 200.0;
                    if q * g[i] + (1.0 - q) * g[j] <= budget + 1e-15 {
                        let val = q * c[i] + (1.0 - q) * c[j];
                        best = if max { best.max(val) } else { best.min(val) };
                    }
                }
            }
        }
        // The LP optimum dominates every feasible mixture.
        if max {
            prop_assert!(value >= best - 1e-12);
        } else {
            prop_assert!(value <= best + 1e-12);
        }
    }
}

#[test]
fn uniform_utility_matches_numeric_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x: f64 = rng.gen();
        let n = 200_000;
        // Midpoint rule is exact away from the kink and O(h^2) near it.
        let h = 1.0 / n as f64;
        let integral: f64 = (0..n).map(|i| ((i as f64 + 0.5) * h - x).abs() * h).sum();
        assert_abs_diff_eq!(
            agent_utility(x, &FacilityDistribution::UniformUnit),
            integral,
            epsilon = 1e-9
        );
    }
}

#[test]
fn quadrature_agrees_with_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let specs = [
        ObjectiveSpec::Su(1.0),
        ObjectiveSpec::Su(0.5),
        ObjectiveSpec::Su(3.0),
        ObjectiveSpec::SuMax,
        ObjectiveSpec::SuMin,
        ObjectiveSpec::Sc(2.0),
        ObjectiveSpec::ScMax,
    ];
    for case in 0..20 {
        let n = rng.gen_range(1..=5);
        let x = Profile::new((0..n).map(|_| rng.gen()).collect()).unwrap();
        let spec = specs[case % specs.len()];
        let exact =
            eval_expected_aggregate(&spec, &x, &FacilityDistribution::UniformUnit).unwrap().value;
        let samples = 1_000_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let v = eval_at_point(&spec, &x, rng.gen());
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / samples as f64;
        let se = ((sum_sq / samples as f64 - mean * mean) / samples as f64).sqrt();
        assert!(
            (mean - exact).abs() <= 3.0 * se + 1e-12,
            "{spec} on {:?}: quadrature {exact}, sampled {mean} ± {se}",
            x.locations()
        );
    }
}

#[test]
fn candidate_sets_match_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let x = Profile::new((0..n).map(|_| rng.gen()).collect()).unwrap();
        for spec in convex_specs() {
            let a = opt_convex_candidates(&spec, &x).unwrap().value;
            let b = opt_grid(&spec, &x, 1e-4).unwrap().value;
            assert!((a - b).abs() <= 1e-6, "{spec} on {:?}: {a} vs {b}", x.locations());
        }
        let a = opt_su_min(&x).value;
        let b = opt_grid(&ObjectiveSpec::SuMin, &x, 1e-4).unwrap().value;
        assert!((a - b).abs() <= 1e-6, "su:min on {:?}: {a} vs {b}", x.locations());
    }
}

#[test]
fn piecewise_optimum_matches_grid_for_nonconvex_objectives() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let x = Profile::new((0..n).map(|_| rng.gen()).collect()).unwrap();
        for spec in [ObjectiveSpec::Su(0.5), ObjectiveSpec::Su(0.2), ObjectiveSpec::SuGeoMean] {
            let a = optimum(&spec, &x).value;
            let b = opt_grid(&spec, &x, 1e-4).unwrap().value;
            assert!(a >= b - 1e-9, "{spec} on {:?}: {a} vs {b}", x.locations());
            assert!((a - b).abs() <= 1e-6, "{spec} on {:?}: {a} vs {b}", x.locations());
        }
    }
}

#[test]
fn extremal_support_sits_on_zero_and_two_thirds() {
    let specs = [
        ObjectiveSpec::Su(0.5),
        ObjectiveSpec::Su(1.0),
        ObjectiveSpec::Su(2.0),
        ObjectiveSpec::Su(4.0),
        ObjectiveSpec::Sc(1.0),
        ObjectiveSpec::Sc(2.0),
    ];
    for spec in specs {
        let (d, _) = solve_extremal_distribution(&third_one_problem(spec).unwrap()).unwrap();
        let FacilityDistribution::Discrete { support } = &d else {
            panic!("{spec}: expected a mixture, got {d:?}");
        };
        for &(y, _) in support {
            assert!(y == 0.0 || (y - 2.0 / 3.0).abs() < 1e-12, "{spec}: atom at {y}");
        }
        assert_abs_diff_eq!(d.mass_at(0.0), 0.75, epsilon = 1e-12);
    }
}

#[test]
fn lp_matches_dense_pair_scan() {
    // Every support pair on a 3001-point grid, with the best feasible weight.
    let spec = ObjectiveSpec::Su(2.0);
    let prob = third_one_problem(spec).unwrap();
    let (_, lp) = solve_extremal_distribution(&prob).unwrap();
    let k = 3000usize;
    let pts: Vec<(f64, f64)> = (0..=k)
        .map(|i| {
            let y = i as f64 / k as f64;
            (spec.power_form_at_point(&prob.profile, y), (y - prob.anchor).abs())
        })
        .collect();
    let mut best_v = f64::NEG_INFINITY;
    for &(fa, ga) in &pts {
        for &(fb, gb) in &pts {
            let mut qs = vec![0.0, 1.0];
            if ga != gb {
                qs.push(((prob.budget - gb) / (ga - gb)).clamp(0.0, 1.0));
            }
            for q in qs {
                if q * ga + (1.0 - q) * gb <= prob.budget + 1e-12 {
                    best_v = best_v.max(q * fa + (1.0 - q) * fb);
                }
            }
        }
    }
    assert!((lp - best_v).abs() <= 1e-9, "lp {lp} vs scan {best_v}");
}

#[test]
fn su_lower_bound_curve_is_continuous_and_converges() {
    // r(p)^p tends to 4/3, so r(p) itself tends to 1; the max objective's
    // 6/5 is a separate limit.
    let ps = [8.0, 16.0, 32.0, 64.0];
    let rows = lower_bound_curve_su(&ps).unwrap();
    let gaps: Vec<f64> = rows
        .iter()
        .zip(ps)
        .map(|(r, p)| (r.from_lp.powf(p) - 4.0 / 3.0).abs())
        .collect();
    for w in gaps.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{gaps:?}");
    }
    assert!(gaps[3] < 1e-9, "{gaps:?}");
    for r in &rows {
        assert_abs_diff_eq!(r.from_lp, r.closed_form, epsilon = 1e-9);
    }
    let fine: Vec<f64> = (1..=400)
        .map(|i| lower_bound_curve_su(&[i as f64 * 0.02]).unwrap()[0].from_lp)
        .collect();
    for w in fine.windows(2) {
        assert!((w[1] - w[0]).abs() < 0.05, "jump in r(p): {w:?}");
    }
    let inf = lower_bound_curve_su(&[f64::INFINITY]).unwrap();
    assert_abs_diff_eq!(inf[0].from_lp, 1.2, epsilon = 1e-12);
}

#[test]
fn search_reports_reproduce_from_witness() {
    let cfg = SearchConfig {
        n_min: 2,
        n_max: 4,
        grid_step: 0.02,
        restarts: 30,
        seed: 11,
        budget: 50_000_000,
    };
    let cases = [
        (MechanismSpec::MajorityVote, ObjectiveSpec::Su(2.0)),
        (MechanismSpec::SquareWeighted, ObjectiveSpec::Sc(2.0)),
        (MechanismSpec::UniformUnit, ObjectiveSpec::SuGeoMean),
        (MechanismSpec::power_weighted(0.5).unwrap(), ObjectiveSpec::Su(0.5)),
    ];
    for (m, spec) in cases {
        let a = search_worst_ratio(&m, &spec, &cfg).unwrap();
        let b = search_worst_ratio(&m, &spec, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(!a.falsified, "{m} {spec}: {a:?}");
        let again = ratio_at(&m, &spec, &a.witness).unwrap();
        assert!((again - a.worst_ratio).abs() <= 1e-7);
    }
}
