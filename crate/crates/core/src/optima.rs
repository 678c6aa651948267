//! Optimal objective values `OPT(x)` and optimal facility locations.
//!
//! Between consecutive breakpoints `0, x_1, ..., x_n, 1` every supported
//! objective is unimodal in `y`: sums of `|x_i - y|^p` are convex (p >= 1) or
//! concave (p < 1) on each piece, the product of distances is log-concave,
//! and the max/min aggregates are piecewise linear tents. That makes
//! per-piece golden-section search exact up to its tolerance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::{eval_at_point, ObjectiveSpec, Sense};
use crate::profile::Profile;

/// Width below which golden-section refinement stops.
pub const REFINE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptMethod {
    ClosedForm,
    CandidateSet,
    /// Breakpoints plus golden-section search inside every piece.
    PiecewiseUnimodal,
    GridRefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptResult {
    pub value: f64,
    pub location: f64,
    pub method: OptMethod,
}

fn better(sense: Sense, candidate: f64, incumbent: f64) -> bool {
    match sense {
        Sense::Max => candidate > incumbent,
        Sense::Min => candidate < incumbent,
    }
}

/// Best of `(y, value)` pairs; ties go to the smallest `y`.
fn pick_best(sense: Sense, mut scored: Vec<(f64, f64)>) -> (f64, f64) {
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = scored[0];
    for &(y, v) in &scored[1..] {
        if better(sense, v, best.1) {
            best = (y, v);
        }
    }
    best
}

fn score_candidates(spec: &ObjectiveSpec, x: &Profile, ys: &[f64]) -> (f64, f64) {
    let scored = ys.iter().map(|&y| (y, eval_at_point(spec, x, y))).collect();
    pick_best(spec.sense(), scored)
}

/// Golden-section search for the optimum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(
    f: F,
    sense: Sense,
    mut lo: f64,
    mut hi: f64,
    tolerance: f64,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let key = |v: f64| match sense {
        Sense::Max => v,
        Sense::Min => -v,
    };
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = key(f(c));
    let mut fd = key(f(d));
    while hi - lo > tolerance {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = key(f(c));
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = key(f(d));
        }
    }
    let y = 0.5 * (lo + hi);
    (y, f(y))
}

/// Optimal minimum utility: the largest of `x_1`, `1 - x_n` and half of the
/// widest gap between neighbours.
pub fn opt_su_min(x: &Profile) -> OptResult {
    let locs = x.locations();
    let mut scored = vec![(0.0, x.first()), (1.0, 1.0 - x.last())];
    scored.extend(
        locs.windows(2)
            .map(|w| (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]))),
    );
    let (location, value) = pick_best(Sense::Max, scored);
    OptResult {
        value,
        location,
        method: OptMethod::ClosedForm,
    }
}

/// Optimal max cost. `max_i (1 - |x_i - y|) = 1 - min_i |x_i - y|`, so the
/// minimiser is the maximiser of the minimum utility.
pub fn opt_sc_max(x: &Profile) -> OptResult {
    let inner = opt_su_min(x);
    OptResult {
        value: 1.0 - inner.value,
        ..inner
    }
}

fn breakpoints(x: &Profile) -> Vec<f64> {
    let mut pts = Vec::with_capacity(x.len() + 2);
    pts.push(0.0);
    pts.extend_from_slice(x.locations());
    pts.push(1.0);
    pts.dedup();
    pts
}

/// Finite candidate sets for objectives whose optimum provably lies on one.
///
/// - `Su(p >= 1)`, `SuMax`: convex in `y`, so the maximum is at 0 or 1.
/// - `Sc(1)`: piecewise linear, so the minimum is at a breakpoint.
/// - `ScMax`: breakpoints plus neighbour midpoints.
/// - `Sc(p > 1)`: convex per piece, so the minimum may be interior; the
///   breakpoints are scored and every piece is refined by golden section.
pub fn opt_convex_candidates(spec: &ObjectiveSpec, x: &Profile) -> Result<OptResult> {
    match spec {
        ObjectiveSpec::Su(p) if *p >= 1.0 => Ok(from_candidates(spec, x, &[0.0, 1.0])),
        ObjectiveSpec::SuMax => Ok(from_candidates(spec, x, &[0.0, 1.0])),
        ObjectiveSpec::Sc(p) if *p == 1.0 => Ok(from_candidates(spec, x, &breakpoints(x))),
        ObjectiveSpec::ScMax => {
            let mut ys = breakpoints(x);
            ys.extend(x.locations().windows(2).map(|w| 0.5 * (w[0] + w[1])));
            Ok(from_candidates(spec, x, &ys))
        }
        ObjectiveSpec::Sc(_) => Ok(opt_piecewise(spec, x)),
        other => Err(Error::SpecNotSupported(other.to_string())),
    }
}

fn from_candidates(spec: &ObjectiveSpec, x: &Profile, ys: &[f64]) -> OptResult {
    let (location, value) = score_candidates(spec, x, ys);
    OptResult {
        value,
        location,
        method: OptMethod::CandidateSet,
    }
}

/// Scores every breakpoint and golden-section refines every piece between
/// consecutive breakpoints. Valid for every objective because each is
/// unimodal on each piece.
pub fn opt_piecewise(spec: &ObjectiveSpec, x: &Profile) -> OptResult {
    let pts = breakpoints(x);
    let sense = spec.sense();
    let mut scored: Vec<(f64, f64)> = pts.iter().map(|&y| (y, eval_at_point(spec, x, y))).collect();
    for w in pts.windows(2) {
        if w[1] - w[0] > REFINE_TOLERANCE {
            scored.push(golden_section(
                |y| eval_at_point(spec, x, y),
                sense,
                w[0],
                w[1],
                REFINE_TOLERANCE,
            ));
        }
    }
    let (location, value) = pick_best(sense, scored);
    OptResult {
        value,
        location,
        method: OptMethod::PiecewiseUnimodal,
    }
}

/// Brute-force oracle: a uniform grid plus every `x_i` and every pairwise
/// midpoint, followed by golden-section refinement around the best point.
pub fn opt_grid(spec: &ObjectiveSpec, x: &Profile, grid_step: f64) -> Result<OptResult> {
    if !(grid_step > 0.0 && grid_step <= 0.01) {
        return Err(Error::InvalidArgument(format!(
            "grid step must lie in (0, 0.01], got {grid_step}"
        )));
    }
    let steps = (1.0 / grid_step).ceil() as usize;
    let locs = x.locations();
    let mut ys: Vec<f64> = (0..=steps).map(|k| (k as f64 * grid_step).min(1.0)).collect();
    ys.push(1.0);
    ys.extend_from_slice(locs);
    for i in 0..locs.len() {
        for j in i + 1..locs.len() {
            ys.push(0.5 * (locs[i] + locs[j]));
        }
    }
    let sense = spec.sense();
    let (best_y, best_v) = score_candidates(spec, x, &ys);
    let lo = (best_y - grid_step).max(0.0);
    let hi = (best_y + grid_step).min(1.0);
    let refined = golden_section(|y| eval_at_point(spec, x, y), sense, lo, hi, REFINE_TOLERANCE);
    let (location, value) = if better(sense, refined.1, best_v) {
        refined
    } else {
        (best_y, best_v)
    };
    Ok(OptResult {
        value,
        location,
        method: OptMethod::GridRefined,
    })
}

/// The strongest available method for each objective.
pub fn optimum(spec: &ObjectiveSpec, x: &Profile) -> OptResult {
    match spec {
        ObjectiveSpec::SuMin => opt_su_min(x),
        ObjectiveSpec::ScMax => opt_sc_max(x),
        ObjectiveSpec::Su(p) if *p >= 1.0 => from_candidates(spec, x, &[0.0, 1.0]),
        ObjectiveSpec::SuMax => from_candidates(spec, x, &[0.0, 1.0]),
        ObjectiveSpec::Sc(p) if *p == 1.0 => from_candidates(spec, x, &breakpoints(x)),
        _ => opt_piecewise(spec, x),
    }
}
