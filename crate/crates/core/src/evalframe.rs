//! Runs, local testing frames and the cost/accuracy/performance metrics
//! measured against a horizon oracle.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::anchoring::AnchoringStrategy;
use crate::convergence::{
    clevel, find_optimal_look_ahead, normalize_threshold, put, ConditionKind, ProximityCondition,
    TuningInputs,
};
use crate::error::{ConvergenceError, EvalError};
use crate::fit::{fit, FitConfig, FitProblem, FitResult};
use crate::par::{self, Parallelism};
use crate::trace::{LearningScheme, LearningTrace, Observation, TraceParams};

/// Default number of horizon observations.
pub const DEFAULT_HORIZON_LEN: usize = 160;

/// Long observation log standing in for the true learning curve.
#[derive(Debug, Clone, Serialize)]
pub struct Horizon {
    pub observations: Vec<Observation>,
    pub limit_trend: FitResult,
    pub alpha_dinfty: f64,
    #[serde(skip)]
    fit_config: FitConfig,
    #[serde(skip)]
    running: OnceLock<Vec<Option<f64>>>,
}

impl Horizon {
    /// Fits the limit trend to the whole log.
    pub fn from_observations(
        observations: Vec<Observation>,
        config: &FitConfig,
    ) -> Result<Self, EvalError> {
        if observations.len() < 3 {
            return Err(EvalError::MissingHorizon);
        }
        let points = observations.iter().map(|o| (o.x, o.accuracy)).collect();
        let limit_trend = fit(&FitProblem::new(points), config)?;
        let alpha_dinfty = limit_trend.curve.c;
        Ok(Self {
            observations,
            limit_trend,
            alpha_dinfty,
            fit_config: *config,
            running: OnceLock::new(),
        })
    }

    /// Value at `x_i` of the trend fitted to the first `i` horizon
    /// observations.
    fn running_values(&self) -> &[Option<f64>] {
        self.running.get_or_init(|| {
            (0..self.observations.len())
                .map(|k| {
                    if k < 2 {
                        return None;
                    }
                    let points = self.observations[..=k]
                        .iter()
                        .map(|o| (o.x, o.accuracy))
                        .collect();
                    fit(&FitProblem::new(points), &self.fit_config)
                        .ok()
                        .map(|r| r.curve.value(self.observations[k].x))
                })
                .collect()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccuracyMode {
    Convergence,
    Error,
}

/// What the error accuracy compares against at finite sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorTarget {
    /// The horizon observations themselves.
    #[default]
    Raw,
    /// The horizon's running trend at each level.
    Fitted,
}

impl FromStr for ErrorTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Self::Raw),
            "fitted" => Ok(Self::Fitted),
            other => Err(format!("unknown error target '{other}' (expected raw or fitted)")),
        }
    }
}

impl fmt::Display for ErrorTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Raw => "raw",
            Self::Fitted => "fitted",
        })
    }
}

/// One learning trace monitored under one proximity condition.
#[derive(Debug, Clone)]
pub struct Run {
    pub name: String,
    pub condition: ProximityCondition,
    pub trace: LearningTrace,
    pub clevel: Option<u32>,
    /// Why the stop level could not be computed, when it could not.
    pub failure: Option<String>,
}

impl Run {
    pub fn new(name: impl Into<String>, trace: LearningTrace, condition: ProximityCondition) -> Self {
        let (clevel, failure) = match clevel(&trace, &condition) {
            Ok(c) => (c, None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            name: name.into(),
            condition,
            trace,
            clevel,
            failure,
        }
    }

    pub fn strategy(&self) -> &AnchoringStrategy {
        self.trace.strategy()
    }

    pub fn plevel(&self) -> Option<u32> {
        self.trace.plevel()
    }

    pub fn tau(&self) -> f64 {
        self.condition.tau
    }

    /// Runs are similar when they use the same kind of condition.
    pub fn similar(&self, other: &Run) -> bool {
        self.condition.kind == other.condition.kind
    }

    fn resolved_clevel(&self) -> Result<u32, EvalError> {
        self.clevel
            .ok_or_else(|| EvalError::UnresolvedCLevel(self.name.clone()))
    }
}

pub fn rc(clevel: u32, baseline_clevel: u32) -> f64 {
    f64::from(clevel) / f64::from(baseline_clevel)
}

pub fn relative_cost(run: &Run, baseline: &Run) -> Result<f64, EvalError> {
    Ok(rc(run.resolved_clevel()?, baseline.resolved_clevel()?))
}

/// Accuracy per unit of relative cost.
pub fn performance(accuracy: f64, rc: f64) -> f64 {
    accuracy / rc
}

/// Accuracy of `run` against the horizon for threshold `tau`:
/// 0 if some divergence from the threshold level on exceeds `tau`,
/// otherwise `100 max δ / tau`.
pub fn accuracy(
    run: &Run,
    horizon: &Horizon,
    mode: AccuracyMode,
    target: ErrorTarget,
    tau: f64,
) -> Result<f64, EvalError> {
    let stop = run.resolved_clevel()?;
    let trend = run
        .trace
        .effective_trend(stop)
        .ok_or_else(|| EvalError::UnresolvedCLevel(run.name.clone()))?
        .curve;
    let iota = threshold_level(&run.trace, tau).unwrap_or(stop);

    let running = match (mode, target) {
        (AccuracyMode::Error, ErrorTarget::Fitted) => Some(horizon.running_values()),
        _ => None,
    };
    let mut worst = (horizon.alpha_dinfty - trend.c).abs();
    for (k, obs) in horizon.observations.iter().enumerate() {
        if obs.level < iota {
            continue;
        }
        let reference = match mode {
            AccuracyMode::Convergence => Some(horizon.limit_trend.curve.value(obs.x)),
            AccuracyMode::Error => match running {
                Some(values) => values[k],
                None => Some(obs.accuracy),
            },
        };
        if let Some(y) = reference {
            worst = worst.max((y - trend.value(obs.x)).abs());
        }
    }
    Ok(accuracy_value(worst, tau))
}

pub fn accuracy_value(max_divergence: f64, tau: f64) -> f64 {
    if max_divergence > tau {
        0.0
    } else {
        100.0 * max_divergence / tau
    }
}

/// First level whose ε bound reaches `tau`, if the trace has ε bounds.
pub fn threshold_level(trace: &LearningTrace, tau: f64) -> Option<u32> {
    clevel(trace, &ProximityCondition::absolute(tau)).ok().flatten()
}

pub fn relative_performance(
    run: &Run,
    baseline: &Run,
    horizon: &Horizon,
    mode: AccuracyMode,
    target: ErrorTarget,
    tau: f64,
) -> Result<f64, EvalError> {
    let a = accuracy(run, horizon, mode, target, tau)?;
    Ok(performance(a, relative_cost(run, baseline)?))
}

/// Compares two conditions through their stop levels on paired runs
/// (unresolved counts as never stopping). `Less` means `a` is strictly
/// faster, `Equal` that each is faster than the other, `None` that the
/// runs are incomparable.
pub fn faster_than(a: &[Option<u32>], b: &[Option<u32>]) -> Option<Ordering> {
    if a.len() != b.len() {
        return None;
    }
    let key = |c: Option<u32>| c.map_or(u64::MAX, u64::from);
    let a_le = a.iter().zip(b).all(|(&x, &y)| key(x) <= key(y));
    let b_le = a.iter().zip(b).all(|(&x, &y)| key(y) <= key(x));
    match (a_le, b_le) {
        (true, true) => Some(Ordering::Equal),
        (true, false) => Some(Ordering::Less),
        (false, true) => Some(Ordering::Greater),
        (false, false) => None,
    }
}

/// Rounds to two decimals, half to even, after fixing six decimals.
pub fn round2(value: f64) -> f64 {
    if !value.is_finite() {
        return value;
    }
    let micros = (value.abs() * 1e6).round() as i128;
    let (mut q, r) = (micros / 10_000, micros % 10_000);
    if r > 5_000 || (r == 5_000 && q % 2 == 1) {
        q += 1;
    }
    value.signum() * q as f64 / 100.0
}

pub fn format2(value: f64) -> String {
    format!("{:.2}", round2(value))
}

/// Where the absolute threshold comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsoluteThreshold {
    Explicit(f64),
    /// ε at the level where the relative condition stops on a trace built
    /// with this strategy.
    NormalizeOn(AnchoringStrategy),
}

/// Everything needed to build a frame from one observation log.
#[derive(Debug, Clone)]
pub struct FrameInputs {
    pub observations: Vec<Observation>,
    pub scheme: Option<LearningScheme>,
    pub params: TraceParams,
    pub tau_r: f64,
    pub tau_a: AbsoluteThreshold,
    pub strategies: Vec<AnchoringStrategy>,
    pub conditions: Vec<ConditionKind>,
    /// Adds a tuned look-ahead run for every fixed strategy.
    pub tune: bool,
    pub error_target: ErrorTarget,
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone)]
pub struct LocalTestingFrame {
    pub tau_r: f64,
    pub tau_a: f64,
    pub runs: Vec<Run>,
    /// Index of the baseline in `runs`.
    pub baseline: usize,
    /// PUT at the switch level for look-ahead runs, keyed by run index.
    pub puts: Vec<Option<f64>>,
}

fn build(inputs: &FrameInputs, strategy: AnchoringStrategy) -> Result<LearningTrace, EvalError> {
    Ok(LearningTrace::from_observations(
        &inputs.observations,
        inputs.params,
        strategy,
        inputs.scheme.clone(),
        Parallelism::Sequential,
    )?)
}

impl LocalTestingFrame {
    pub fn build(inputs: &FrameInputs) -> Result<Self, EvalError> {
        if inputs.strategies.is_empty() || inputs.conditions.is_empty() {
            return Err(EvalError::InvalidFrame(
                "a frame needs at least one strategy and one condition".into(),
            ));
        }
        if !inputs.strategies.contains(&AnchoringStrategy::None) {
            return Err(EvalError::InvalidFrame(
                "the baseline needs an anchor-free strategy".into(),
            ));
        }
        let tau_a = match &inputs.tau_a {
            AbsoluteThreshold::Explicit(t) => *t,
            AbsoluteThreshold::NormalizeOn(s) => {
                normalize_threshold(&build(inputs, *s)?, inputs.tau_r)?
            }
        };
        let tau_for = |kind| match kind {
            ConditionKind::Absolute => tau_a,
            ConditionKind::Relative => inputs.tau_r,
        };
        let conditions: Vec<ProximityCondition> = inputs
            .conditions
            .iter()
            .map(|&k| ProximityCondition::new(k, tau_for(k)))
            .collect::<Result<_, ConvergenceError>>()?;

        let traces = par::map(inputs.parallelism, &inputs.strategies, |s| {
            build(inputs, *s)
        });
        let mut runs = Vec::new();
        for (strategy, trace) in inputs.strategies.iter().zip(traces) {
            let trace = trace?;
            for cond in &conditions {
                runs.push(Run::new(format!("{strategy}+{}", cond.kind), trace.clone(), *cond));
            }
        }
        let mut puts = vec![None; runs.len()];
        let baseline = Self::pick_baseline(&runs, inputs.strategies.len(), &conditions)?;

        if inputs.tune {
            let base_clevel = runs[baseline].resolved_clevel()?;
            for strategy in &inputs.strategies {
                let AnchoringStrategy::Fixed { beta } = *strategy else {
                    continue;
                };
                for cond in &conditions {
                    let tuning = TuningInputs {
                        observations: inputs.observations.clone(),
                        params: inputs.params,
                        scheme: inputs.scheme.clone(),
                        condition: *cond,
                        baseline_clevel: base_clevel,
                        parallelism: inputs.parallelism,
                    };
                    let report = find_optimal_look_ahead(&tuning, beta);
                    let Some(best) = report.selected_candidate() else {
                        continue;
                    };
                    let Some(la) = best.look_ahead else { continue };
                    let tuned = AnchoringStrategy::fixed_look_ahead(beta, la);
                    let trace = build(inputs, tuned)?;
                    runs.push(Run::new(format!("{tuned}+{}", cond.kind), trace, *cond));
                    puts.push(best.put);
                }
            }
        }
        for (k, run) in runs.iter().enumerate() {
            if puts[k].is_some() {
                continue;
            }
            if let AnchoringStrategy::FixedLookAhead { beta, look_ahead } = *run.strategy() {
                puts[k] = switch_put(inputs, beta, look_ahead, &run.condition);
            }
        }
        Ok(Self {
            tau_r: inputs.tau_r,
            tau_a,
            runs,
            baseline,
            puts,
        })
    }

    /// The anchor-free run of the condition that is faster than every other
    /// condition over all strategies.
    fn pick_baseline(
        runs: &[Run],
        strategies: usize,
        conditions: &[ProximityCondition],
    ) -> Result<usize, EvalError> {
        let per = conditions.len();
        let stops = |c: usize| -> Vec<Option<u32>> {
            (0..strategies).map(|s| runs[s * per + c].clevel).collect()
        };
        let fastest = (0..per).find(|&c| {
            (0..per).all(|o| {
                matches!(faster_than(&stops(c), &stops(o)), Some(Ordering::Less | Ordering::Equal))
            })
        });
        let Some(c) = fastest else {
            return Err(EvalError::NoFastestCondition(
                "conditions are incomparable across strategies".into(),
            ));
        };
        let index = runs
            .iter()
            .position(|r| *r.strategy() == AnchoringStrategy::None && r.condition == conditions[c])
            .expect("every strategy has a run per condition");
        runs[index].resolved_clevel()?;
        Ok(index)
    }

    pub fn baseline(&self) -> &Run {
        &self.runs[self.baseline]
    }

    /// Metrics for every run. Accuracies use the frame's absolute threshold;
    /// runs without a stop level get empty metrics.
    pub fn report(&self, horizon: &Horizon, target: ErrorTarget, mode: Parallelism) -> FrameReport {
        let base = self.baseline().clevel.expect("baseline is resolved");
        let indices: Vec<usize> = (0..self.runs.len()).collect();
        let rows = par::map(mode, &indices, |&k| {
            let run = &self.runs[k];
            let rc = run.clevel.map(|c| rc(c, base));
            let acc = |m| accuracy(run, horizon, m, target, self.tau_a).ok();
            let a_c = acc(AccuracyMode::Convergence);
            let a_e = acc(AccuracyMode::Error);
            let look_ahead = match *run.strategy() {
                AnchoringStrategy::FixedLookAhead { look_ahead, .. } => Some(look_ahead),
                _ => None,
            };
            ReportRow {
                name: run.name.clone(),
                strategy: run.strategy().to_string(),
                condition: run.condition.kind.to_string(),
                tau: Some(run.tau()),
                plevel: run.plevel(),
                clevel: run.clevel,
                look_ahead,
                put: self.puts[k],
                rc,
                a_c,
                a_e,
                rp_c: a_c.zip(rc).map(|(a, r)| performance(a, r)),
                rp_e: a_e.zip(rc).map(|(a, r)| performance(a, r)),
                note: run.failure.clone().or_else(|| {
                    rc.filter(|&r| r < 1.0).map(|_| "stops before the baseline".to_string())
                }),
            }
        });
        FrameReport {
            tau_r: self.tau_r,
            tau_a: self.tau_a,
            baseline: self.baseline().name.clone(),
            alpha_dinfty: Some(horizon.alpha_dinfty),
            rows,
        }
    }
}

fn switch_put(inputs: &FrameInputs, beta: f64, look_ahead: u32, cond: &ProximityCondition) -> Option<f64> {
    let tentative = build(inputs, AnchoringStrategy::fixed(beta)).ok()?;
    let p = tentative.plevel()?;
    put(&tentative, cond, p + look_ahead).ok()
}

/// One line of a frame report; unrounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub strategy: String,
    pub condition: String,
    pub tau: Option<f64>,
    pub plevel: Option<u32>,
    pub clevel: Option<u32>,
    pub look_ahead: Option<u32>,
    pub put: Option<f64>,
    pub rc: Option<f64>,
    pub a_c: Option<f64>,
    pub a_e: Option<f64>,
    pub rp_c: Option<f64>,
    pub rp_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub tau_r: f64,
    pub tau_a: f64,
    pub baseline: String,
    pub alpha_dinfty: Option<f64>,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_COLUMNS: [&str; 13] = [
    "run", "strategy", "condition", "tau", "plevel", "clevel", "look_ahead", "put", "rc", "a_c",
    "a_e", "rp_c", "rp_e",
];

impl FrameReport {
    /// Table cells with metrics at two decimals.
    pub fn table(&self) -> Vec<Vec<String>> {
        let opt = |v: Option<f64>| v.map(format2).unwrap_or_default();
        let lvl = |v: Option<u32>| v.map(|l| l.to_string()).unwrap_or_default();
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.name.clone(),
                    r.strategy.clone(),
                    r.condition.clone(),
                    opt(r.tau),
                    lvl(r.plevel),
                    lvl(r.clevel),
                    lvl(r.look_ahead),
                    opt(r.put),
                    opt(r.rc),
                    opt(r.a_c),
                    opt(r.a_e),
                    opt(r.rp_c),
                    opt(r.rp_e),
                ]
            })
            .collect()
    }
}

/// A run whose stop level and accuracies were measured elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedRun {
    pub name: String,
    #[serde(default)]
    pub strategy: Option<String>,
    #[serde(default)]
    pub condition: Option<String>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub plevel: Option<u32>,
    pub clevel: u32,
    #[serde(default)]
    pub look_ahead: Option<u32>,
    #[serde(default)]
    pub put: Option<f64>,
    #[serde(default)]
    pub a_c: Option<f64>,
    #[serde(default)]
    pub a_e: Option<f64>,
}

/// Frame given directly as stop levels and accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordedFrame {
    pub baseline_clevel: u32,
    #[serde(default)]
    pub tau_r: f64,
    #[serde(default)]
    pub tau_a: f64,
    pub runs: Vec<RecordedRun>,
}

impl RecordedFrame {
    pub fn report(&self) -> Result<FrameReport, EvalError> {
        if self.baseline_clevel == 0 {
            return Err(EvalError::InvalidFrame("baseline CLevel must be positive".into()));
        }
        let rows = self
            .runs
            .iter()
            .map(|r| {
                let cost = rc(r.clevel, self.baseline_clevel);
                ReportRow {
                    name: r.name.clone(),
                    strategy: r.strategy.clone().unwrap_or_default(),
                    condition: r.condition.clone().unwrap_or_default(),
                    tau: r.tau,
                    plevel: r.plevel,
                    clevel: Some(r.clevel),
                    look_ahead: r.look_ahead,
                    put: r.put,
                    rc: Some(cost),
                    a_c: r.a_c,
                    a_e: r.a_e,
                    rp_c: r.a_c.map(|a| performance(a, cost)),
                    rp_e: r.a_e.map(|a| performance(a, cost)),
                    note: None,
                }
            })
            .collect();
        Ok(FrameReport {
            tau_r: self.tau_r,
            tau_a: self.tau_a,
            baseline: format!("clevel {}", self.baseline_clevel),
            alpha_dinfty: None,
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::PowerLawCurve;
    use crate::synth::{generate, GeneratorSpec};

    #[test]
    fn relative_cost_matches_printed_rows() {
        assert_eq!(format2(rc(100, 58)), "1.72");
        assert_eq!(format2(rc(80, 46)), "1.74");
        assert_eq!(format2(rc(58, 58)), "1.00");
    }

    #[test]
    fn performance_uses_unrounded_cost() {
        assert_eq!(format2(performance(4.24, rc(100, 58))), "2.46");
        assert_eq!(format2(performance(5.09, rc(100, 58))), "2.95");
        assert_eq!(performance(0.0, 3.0), 0.0);
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(round2(2.465), 2.46);
        assert_eq!(round2(2.475), 2.48);
        assert_eq!(round2(2.4651), 2.47);
        assert_eq!(round2(-1.005), -1.0);
    }

    #[test]
    fn accuracy_branches() {
        assert_eq!(accuracy_value(0.6, 0.5), 0.0);
        assert_eq!(accuracy_value(0.5, 0.5), 100.0);
        assert!((accuracy_value(0.0212, 0.5) - 4.24).abs() < 1e-12);
    }

    #[test]
    fn faster_than_cases() {
        let a = [Some(10), Some(12)];
        let b = [Some(11), Some(12)];
        assert_eq!(faster_than(&a, &b), Some(Ordering::Less));
        assert_eq!(faster_than(&b, &a), Some(Ordering::Greater));
        assert_eq!(faster_than(&a, &a), Some(Ordering::Equal));
        assert_eq!(faster_than(&[Some(3), Some(9)], &[Some(4), Some(8)]), None);
        assert_eq!(faster_than(&[Some(3)], &[None]), Some(Ordering::Less));
    }

    fn noiseless_frame(tune: bool) -> (LocalTestingFrame, Horizon) {
        let truth = PowerLawCurve::new(300.0, 0.5, 99.0).unwrap();
        let obs = generate(&GeneratorSpec::noiseless(truth, 160)).unwrap();
        let horizon = Horizon::from_observations(obs.clone(), &FitConfig::default()).unwrap();
        let inputs = FrameInputs {
            observations: obs[..120].to_vec(),
            scheme: None,
            params: TraceParams::default(),
            tau_r: 0.05,
            tau_a: AbsoluteThreshold::Explicit(1.0),
            strategies: vec![AnchoringStrategy::None, AnchoringStrategy::fixed(100.0)],
            conditions: vec![ConditionKind::Relative, ConditionKind::Absolute],
            tune,
            error_target: ErrorTarget::Raw,
            parallelism: Parallelism::Sequential,
        };
        (LocalTestingFrame::build(&inputs).unwrap(), horizon)
    }

    #[test]
    fn noiseless_frame_has_unit_baseline() {
        let (frame, horizon) = noiseless_frame(false);
        let report = frame.report(&horizon, ErrorTarget::Raw, Parallelism::Sequential);
        let base = report.rows.iter().find(|r| r.name == report.baseline).unwrap();
        assert_eq!(base.rc, Some(1.0));
        assert_eq!(base.rp_c, base.a_c);
        for row in &report.rows {
            if let Some(rc) = row.rc {
                assert!(rc >= 1.0, "{row:?}");
            }
            for v in [row.a_c, row.a_e, row.rp_c, row.rp_e].into_iter().flatten() {
                assert!((0.0..=100.0).contains(&v), "{row:?}");
            }
        }
        assert!((horizon.alpha_dinfty - 99.0).abs() < 1e-6);
    }

    #[test]
    fn missing_anchor_free_strategy_is_rejected() {
        let truth = PowerLawCurve::new(300.0, 0.5, 99.0).unwrap();
        let obs = generate(&GeneratorSpec::noiseless(truth, 40)).unwrap();
        let inputs = FrameInputs {
            observations: obs,
            scheme: None,
            params: TraceParams::default(),
            tau_r: 0.05,
            tau_a: AbsoluteThreshold::Explicit(1.0),
            strategies: vec![AnchoringStrategy::fixed(100.0)],
            conditions: vec![ConditionKind::Absolute],
            tune: false,
            error_target: ErrorTarget::Raw,
            parallelism: Parallelism::Sequential,
        };
        assert!(matches!(LocalTestingFrame::build(&inputs), Err(EvalError::InvalidFrame(_))));
    }

    #[test]
    fn recorded_frame_single_baseline() {
        let frame = RecordedFrame {
            baseline_clevel: 58,
            tau_r: 0.0,
            tau_a: 0.0,
            runs: vec![RecordedRun {
                name: "base".into(),
                strategy: None,
                condition: None,
                tau: None,
                plevel: None,
                clevel: 58,
                look_ahead: None,
                put: None,
                a_c: Some(14.39),
                a_e: None,
            }],
        };
        let r = frame.report().unwrap();
        assert_eq!(r.rows[0].rc, Some(1.0));
        assert_eq!(r.rows[0].rp_c, Some(14.39));
    }
}
