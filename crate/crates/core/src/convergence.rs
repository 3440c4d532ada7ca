//! Intersections of consecutive trends, the ε bound sequence, proximity
//! conditions, the stop level and look-ahead tuning.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anchoring::AnchoringStrategy;
use crate::curve::PowerLawCurve;
use crate::error::ConvergenceError;
use crate::par::{self, Parallelism};
use crate::trace::{LearningScheme, LearningTrace, Observation, TraceParams};

/// Geometric cells scanned between `x_min` and `x_max`.
pub const GRID_CELLS: usize = 2048;
/// Scan range is this factor times the largest observed size.
pub const X_MAX_FACTOR: f64 = 1e3;
/// Slack used when comparing backbone values.
pub const BACKBONE_TOL: f64 = 1e-9;
const COINCIDENT_TOL: f64 = 1e-12;
const ROOT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

/// Roots of `c1 - c2` at or beyond `x_min`, summarized by the first and last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionSet {
    pub first: Option<Point>,
    pub last: Option<Point>,
    pub count: u8,
}

impl IntersectionSet {
    fn from_roots(c1: &PowerLawCurve, roots: &[f64]) -> Self {
        let point = |x: f64| Point { x, y: c1.value(x) };
        Self {
            first: roots.first().map(|&x| point(x)),
            last: roots.last().map(|&x| point(x)),
            count: roots.len() as u8,
        }
    }
}

/// Single stationary point of `c1 - c2`, if any.
fn critical_point(c1: &PowerLawCurve, c2: &PowerLawCurve) -> Option<f64> {
    // d'(x) = a1 b1 x^(-b1-1) - a2 b2 x^(-b2-1)
    if c1.b == c2.b {
        return None;
    }
    let ratio = (c2.a * c2.b) / (c1.a * c1.b);
    if !(ratio > 0.0 && ratio.is_finite()) {
        return None;
    }
    let x = ratio.powf(1.0 / (c2.b - c1.b));
    (x.is_finite() && x > 0.0).then_some(x)
}

fn bisect(d: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let lo_sign = d(lo) > 0.0;
    while (hi - lo) / lo >= ROOT_REL_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = d(mid);
        if v == 0.0 {
            return mid;
        }
        if (v > 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All roots of `c1 - c2` on `[x_min, inf)`, ascending. The scan covers
/// `[x_min, x_max]` on a geometric grid; the tail is settled from the
/// asymptotes.
pub fn roots(
    c1: &PowerLawCurve,
    c2: &PowerLawCurve,
    x_min: f64,
    x_max: f64,
) -> Result<Vec<f64>, ConvergenceError> {
    if !(x_min > 0.0 && x_max > x_min && x_max.is_finite()) {
        return Err(ConvergenceError::Precondition(format!(
            "scan interval [{x_min}, {x_max}] is invalid"
        )));
    }
    if c1 == c2 {
        return Err(ConvergenceError::CoincidentCurves);
    }
    let d = |x: f64| c1.value(x) - c2.value(x);
    let ratio = x_max / x_min;
    let mut xs: Vec<f64> = (0..=GRID_CELLS)
        .map(|k| x_min * ratio.powf(k as f64 / GRID_CELLS as f64))
        .collect();
    *xs.last_mut().unwrap() = x_max;
    let values: Vec<f64> = xs.iter().map(|&x| d(x)).collect();
    if values.iter().all(|v| v.abs() < COINCIDENT_TOL) {
        return Err(ConvergenceError::CoincidentCurves);
    }
    // d is monotone on each side of its critical point, so adding it as a
    // breakpoint makes the sign scan exact
    let mut grid: Vec<(f64, f64)> = xs.into_iter().zip(values).collect();
    if let Some(xc) = critical_point(c1, c2).filter(|&x| x > x_min) {
        let pos = grid.partition_point(|&(x, _)| x < xc);
        if grid.get(pos).is_none_or(|&(x, _)| x != xc) {
            grid.insert(pos, (xc, d(xc)));
        }
    }

    let mut found = Vec::new();
    for (k, &(x, v)) in grid.iter().enumerate() {
        if v == 0.0 {
            found.push(x);
            continue;
        }
        if let Some(&(nx, nv)) = grid.get(k + 1) {
            if nv != 0.0 && (v > 0.0) != (nv > 0.0) {
                found.push(bisect(&d, x, nx));
            }
        }
    }

    // one more sign change past the last breakpoint when d(inf) = c1.c - c2.c
    // disagrees with the last sampled sign
    let (x_last, v_last) = *grid.last().unwrap();
    let at_infinity = c1.c - c2.c;
    if v_last != 0.0 && at_infinity != 0.0 && (v_last > 0.0) != (at_infinity > 0.0) {
        let mut lo = x_last;
        let mut hi = x_last * 2.0;
        while hi.is_finite() && (d(hi) > 0.0) == (v_last > 0.0) && d(hi) != 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        if hi.is_finite() {
            found.push(if d(hi) == 0.0 { hi } else { bisect(&d, lo, hi) });
        }
    }

    found.dedup_by(|a, b| (*a - *b).abs() <= ROOT_REL_TOL * b.abs());
    if found.len() > 2 {
        return Err(ConvergenceError::Precondition(format!(
            "found {} roots of a power-law difference; the curves are numerically coincident",
            found.len()
        )));
    }
    Ok(found)
}

pub fn intersect(
    c1: &PowerLawCurve,
    c2: &PowerLawCurve,
    x_min: f64,
    x_max: f64,
) -> Result<IntersectionSet, ConvergenceError> {
    let found = roots(c1, c2, x_min, x_max)?;
    Ok(IntersectionSet::from_roots(c1, &found))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRecord {
    pub level: u32,
    /// `|q_y - α_level|`; carried over from the previous record on
    /// ruptures without a usable intersection.
    pub epsilon: f64,
    /// Last intersection with the previous trend.
    pub q: Option<Point>,
    pub count: u8,
    pub is_rupture: bool,
    pub alpha: f64,
}

/// ε bound per level, for levels `i >= max(4, ω + 2)`. Empty while ω is
/// unresolved.
pub fn epsilon_sequence(trace: &LearningTrace) -> Result<Vec<EpsilonRecord>, ConvergenceError> {
    let Some(omega) = trace.wlevel() else {
        return Ok(Vec::new());
    };
    let start = (omega + 2).max(4);
    let trends = trace.effective_trends();
    let strategy = trace.strategy();

    if !strategy.is_fixed() {
        let backbone = trace.backbone();
        for w in backbone.windows(2) {
            if w[1].level >= start && w[1].alpha > w[0].alpha + BACKBONE_TOL {
                return Err(ConvergenceError::NotDecreasing {
                    level: w[1].level,
                    previous: w[0].alpha,
                    current: w[1].alpha,
                });
            }
        }
    }

    let x_min = trace.observations().first().map_or(1.0, |o| o.x);
    let x_max = trace.observations().last().map_or(1.0, |o| o.x) * X_MAX_FACTOR;

    let pairs: Vec<_> = trends
        .windows(2)
        .filter(|w| w[1].0 + 1 >= start)
        .map(|w| (w[1].0, w[0].1.curve, w[1].1.curve))
        .collect();

    let mut records = Vec::new();
    let mut previous_count: Option<u8> = None;
    let mut carried: Option<f64> = None;
    for (level, prev_curve, curve) in pairs {
        let set = intersect(&curve, &prev_curve, x_min, x_max).ok();
        let count = set.map_or(0, |s| s.count);
        let counted = previous_count;
        previous_count = Some(count);
        if level < start {
            continue;
        }
        let transition = matches!((counted, count), (Some(1), 2) | (Some(2), 1));
        let anchor_changed = strategy.is_fixed()
            && trace.anchor_at(level) != trace.anchor_at(level - 1)
            && level > omega + 1;
        let alpha = curve.c;
        let q = set.and_then(|s| s.last);
        let record = match q {
            Some(point) if count > 0 => {
                let epsilon = (point.y - alpha).abs();
                EpsilonRecord {
                    level,
                    epsilon,
                    q: Some(point),
                    count,
                    is_rupture: transition || anchor_changed,
                    alpha,
                }
            }
            _ => EpsilonRecord {
                level,
                epsilon: carried.unwrap_or(f64::INFINITY),
                q: None,
                count,
                is_rupture: true,
                alpha,
            },
        };
        carried = Some(record.epsilon);
        records.push(record);
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    Absolute,
    Relative,
}

impl FromStr for ConditionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absolute" => Ok(Self::Absolute),
            "relative" => Ok(Self::Relative),
            _ => Err(format!("unknown condition '{s}' (absolute|relative)")),
        }
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Absolute => "absolute",
            Self::Relative => "relative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProximityCondition {
    pub kind: ConditionKind,
    pub tau: f64,
}

impl ProximityCondition {
    pub fn new(kind: ConditionKind, tau: f64) -> Result<Self, ConvergenceError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ConvergenceError::Precondition(format!("tau must be > 0, got {tau}")));
        }
        Ok(Self { kind, tau })
    }

    pub fn absolute(tau: f64) -> Self {
        Self { kind: ConditionKind::Absolute, tau }
    }

    pub fn relative(tau: f64) -> Self {
        Self { kind: ConditionKind::Relative, tau }
    }

    pub fn rule(&self) -> &'static dyn ProximityRule {
        match self.kind {
            ConditionKind::Absolute => &EpsilonRule,
            ConditionKind::Relative => &AsymptoteGapRule,
        }
    }
}

/// A condition's distance estimate at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub level: u32,
    pub value: f64,
    /// Whether the level may serve as a stop level.
    pub eligible: bool,
}

/// How a proximity condition measures the remaining distance to the limit
/// and when it stops.
pub trait ProximityRule: Sync {
    fn distances(&self, trace: &LearningTrace) -> Result<Vec<Distance>, ConvergenceError>;

    fn stop_level(&self, trace: &LearningTrace, distances: &[Distance], tau: f64) -> Option<u32>;
}

/// ε-based absolute condition.
pub struct EpsilonRule;

impl ProximityRule for EpsilonRule {
    fn distances(&self, trace: &LearningTrace) -> Result<Vec<Distance>, ConvergenceError> {
        Ok(epsilon_sequence(trace)?
            .into_iter()
            .map(|r| Distance {
                level: r.level,
                value: r.epsilon,
                eligible: !r.is_rupture,
            })
            .collect())
    }

    fn stop_level(&self, _trace: &LearningTrace, distances: &[Distance], tau: f64) -> Option<u32> {
        distances
            .iter()
            .find(|d| d.eligible && d.value <= tau)
            .map(|d| d.level)
    }
}

/// Gap between consecutive asymptotes, sustained over the trace's λ window.
pub struct AsymptoteGapRule;

impl ProximityRule for AsymptoteGapRule {
    fn distances(&self, trace: &LearningTrace) -> Result<Vec<Distance>, ConvergenceError> {
        let plevel = trace.plevel();
        Ok(trace
            .backbone()
            .windows(2)
            .map(|w| Distance {
                level: w[1].level,
                value: (w[1].alpha - w[0].alpha).abs(),
                eligible: plevel.is_some_and(|p| w[1].level > p),
            })
            .collect())
    }

    fn stop_level(&self, trace: &LearningTrace, distances: &[Distance], tau: f64) -> Option<u32> {
        let span = trace.params().lambda as usize + 1;
        let mut run = 0usize;
        for d in distances {
            run = if d.eligible && d.value <= tau { run + 1 } else { 0 };
            if run >= span {
                return Some(d.level);
            }
        }
        None
    }
}

/// Level at which `condition` first holds on `trace`.
pub fn clevel(
    trace: &LearningTrace,
    condition: &ProximityCondition,
) -> Result<Option<u32>, ConvergenceError> {
    let rule = condition.rule();
    let distances = rule.distances(trace)?;
    Ok(rule.stop_level(trace, &distances, condition.tau))
}

/// Absolute threshold equivalent to a relative one: ε where the relative
/// condition stops (or at the first later level with a usable ε).
pub fn normalize_threshold(trace: &LearningTrace, tau_r: f64) -> Result<f64, ConvergenceError> {
    let relative = ProximityCondition::new(ConditionKind::Relative, tau_r)?;
    let stop = clevel(trace, &relative)?.ok_or(ConvergenceError::NotReached)?;
    epsilon_sequence(trace)?
        .into_iter()
        .find(|r| r.level >= stop && !r.is_rupture)
        .map(|r| r.epsilon)
        .ok_or(ConvergenceError::NotReached)
}

/// `100 (d_ℓ - τ) / (d_{℘+2} - τ)` when `d_ℓ >= τ`, else 0.
pub fn put_value(d_level: f64, d_reference: f64, tau: f64) -> f64 {
    let numerator = d_level - tau;
    if numerator <= 0.0 {
        return 0.0;
    }
    let denominator = d_reference - tau;
    if denominator <= 0.0 {
        return 100.0;
    }
    (100.0 * numerator / denominator).clamp(0.0, 100.0)
}

fn put_context(
    trace: &LearningTrace,
    condition: &ProximityCondition,
) -> Result<(u32, Vec<Distance>), ConvergenceError> {
    if !trace.strategy().is_fixed() {
        return Err(ConvergenceError::Precondition(
            "PUT is defined on traces with fixed anchoring".into(),
        ));
    }
    let plevel = trace.plevel().ok_or_else(|| {
        ConvergenceError::Precondition("PUT needs a resolved prediction level".into())
    })?;
    let distances = condition.rule().distances(trace)?;
    Ok((plevel, distances))
}

/// `(ℓ, PUT(ℓ))` for every level `ℓ > ℘ + 1` with a distance estimate.
pub fn put_series(
    trace: &LearningTrace,
    condition: &ProximityCondition,
) -> Result<Vec<(u32, f64)>, ConvergenceError> {
    let (plevel, distances) = put_context(trace, condition)?;
    let reference = distances
        .iter()
        .find(|d| d.level == plevel + 2)
        .ok_or_else(|| {
            ConvergenceError::Precondition(format!(
                "no distance estimate at level {}",
                plevel + 2
            ))
        })?
        .value;
    Ok(distances
        .iter()
        .filter(|d| d.level > plevel + 1)
        .map(|d| (d.level, put_value(d.value, reference, condition.tau)))
        .collect())
}

pub fn put(
    trace: &LearningTrace,
    condition: &ProximityCondition,
    level: u32,
) -> Result<f64, ConvergenceError> {
    let plevel = trace.plevel().ok_or_else(|| {
        ConvergenceError::Precondition("PUT needs a resolved prediction level".into())
    })?;
    if level <= plevel + 1 {
        return Err(ConvergenceError::Precondition(format!(
            "PUT is defined past level {}, got {level}",
            plevel + 1
        )));
    }
    put_series(trace, condition)?
        .into_iter()
        .find(|&(l, _)| l == level)
        .map(|(_, v)| v)
        .ok_or_else(|| ConvergenceError::Precondition(format!("no distance estimate at level {level}")))
}

/// Smallest `ℓ - ℘` with `ℓ > ℘ + 1` and `PUT(ℓ) <= ζ`.
pub fn minimal_look_ahead(
    trace: &LearningTrace,
    condition: &ProximityCondition,
    zeta: f64,
) -> Result<u32, ConvergenceError> {
    if !(0.0..=100.0).contains(&zeta) {
        return Err(ConvergenceError::Precondition(format!("zeta must lie in [0, 100], got {zeta}")));
    }
    let plevel = trace.plevel().ok_or_else(|| {
        ConvergenceError::Precondition("PUT needs a resolved prediction level".into())
    })?;
    put_series(trace, condition)?
        .into_iter()
        .find(|&(_, v)| v <= zeta)
        .map(|(l, _)| l - plevel)
        .ok_or(ConvergenceError::NotReached)
}

/// Everything needed to build and cost candidate runs.
#[derive(Debug, Clone)]
pub struct TuningInputs {
    pub observations: Vec<Observation>,
    pub params: TraceParams,
    pub scheme: Option<LearningScheme>,
    pub condition: ProximityCondition,
    /// Stop level of the frame's baseline run.
    pub baseline_clevel: u32,
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningCandidate {
    pub zeta: f64,
    pub look_ahead: Option<u32>,
    /// PUT of the tentative fixed trace at `℘ + look_ahead`.
    pub put: Option<f64>,
    pub clevel: Option<u32>,
    pub rc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub beta: f64,
    pub plevel: Option<u32>,
    pub candidates: Vec<TuningCandidate>,
    /// Index into `candidates`.
    pub selected: Option<usize>,
}

impl TuningReport {
    pub fn selected_candidate(&self) -> Option<&TuningCandidate> {
        self.selected.map(|i| &self.candidates[i])
    }
}

/// PUT grid swept during tuning, from 100 down to 0.
pub fn zeta_grid() -> Vec<f64> {
    (0..=10).rev().map(|k| f64::from(k) * 10.0).collect()
}

/// Turning point of an RC sequence: the candidate from which the run of
/// strictly increasing RCs is longest. Ties go to the smaller look-ahead.
pub fn select_turning_point(candidates: &[TuningCandidate]) -> Option<usize> {
    let costed: Vec<(usize, f64, u32)> = candidates
        .iter()
        .enumerate()
        .filter_map(|(i, c)| Some((i, c.rc?, c.look_ahead?)))
        .collect();
    let mut best: Option<(usize, usize, u32)> = None;
    for (k, &(index, _, look_ahead)) in costed.iter().enumerate() {
        let window = costed[k..]
            .windows(2)
            .take_while(|w| w[1].1 > w[0].1)
            .count();
        let better = match best {
            None => true,
            Some((_, w, la)) => window > w || (window == w && look_ahead < la),
        };
        if better {
            best = Some((index, window, look_ahead));
        }
    }
    best.map(|(i, _, _)| i)
}

fn build_trace(inputs: &TuningInputs, strategy: AnchoringStrategy) -> Option<LearningTrace> {
    LearningTrace::from_observations(
        &inputs.observations,
        inputs.params,
        strategy,
        inputs.scheme.clone(),
        Parallelism::Sequential,
    )
    .ok()
}

/// Sweeps ζ over [`zeta_grid`], builds the look-ahead run each ζ asks for,
/// costs it against the baseline and picks the turning point.
pub fn find_optimal_look_ahead(inputs: &TuningInputs, beta: f64) -> TuningReport {
    let tentative = build_trace(inputs, AnchoringStrategy::fixed(beta));
    let plevel = tentative.as_ref().and_then(|t| t.plevel());
    let puts = tentative
        .as_ref()
        .and_then(|t| put_series(t, &inputs.condition).ok())
        .unwrap_or_default();

    let grid = zeta_grid();
    let picks: Vec<Option<(u32, f64)>> = grid
        .iter()
        .map(|&zeta| {
            let p = plevel?;
            puts.iter()
                .find(|&&(_, v)| v <= zeta)
                .map(|&(l, v)| (l - p, v))
        })
        .collect();

    let mut distinct: Vec<u32> = picks.iter().flatten().map(|&(la, _)| la).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let stops: Vec<Option<u32>> = par::map(inputs.parallelism, &distinct, |&la| {
        let trace = build_trace(inputs, AnchoringStrategy::fixed_look_ahead(beta, la))?;
        clevel(&trace, &inputs.condition).ok().flatten()
    });

    let candidates: Vec<TuningCandidate> = grid
        .iter()
        .zip(&picks)
        .map(|(&zeta, pick)| {
            let look_ahead = pick.map(|(la, _)| la);
            let clevel = look_ahead.and_then(|la| {
                let k = distinct.binary_search(&la).expect("look-ahead was costed");
                stops[k]
            });
            TuningCandidate {
                zeta,
                look_ahead,
                put: pick.map(|(_, v)| v),
                clevel,
                rc: clevel.map(|c| f64::from(c) / f64::from(inputs.baseline_clevel)),
            }
        })
        .collect();
    let selected = select_turning_point(&candidates);
    TuningReport {
        beta,
        plevel,
        candidates,
        selected,
    }
}
