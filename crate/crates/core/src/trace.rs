//! Learning schemes, observation logs and learning traces.
//!
//! A trace holds, per level, the plain (reference) trend fitted to all
//! observations so far and, once the working level ω is known, the anchored
//! trend for every level past ω. The effective trend of a level is the
//! anchored one when it exists and the plain one otherwise; the asymptotic
//! backbone is the sequence of effective asymptotes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::anchoring::{anchor_for_level, AnchoringStrategy, PLevelSource};
use crate::error::{FitError, TraceError};
use crate::fit::{fit, FitConfig, FitProblem, FitResult};
use crate::par::{self, Parallelism};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub level: u32,
    /// Training-set size x_i.
    pub x: f64,
    /// Accuracy in percentage points.
    pub accuracy: f64,
}

impl Observation {
    pub fn new(level: u32, x: f64, accuracy: f64) -> Self {
        Self { level, x, accuracy }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Uniform(u64),
    /// Step sizes σ(2), σ(3), ...
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningScheme {
    pub kernel_size: u64,
    pub step: Step,
    pub description: String,
}

impl LearningScheme {
    pub fn uniform(kernel_size: u64, step: u64) -> Self {
        Self {
            kernel_size,
            step: Step::Uniform(step),
            description: format!("kernel {kernel_size}, uniform step {step}"),
        }
    }

    /// x_level, or `None` past the end of an explicit schedule.
    pub fn position(&self, level: u32) -> Option<f64> {
        if level == 0 {
            return None;
        }
        let k = u64::from(level - 1);
        match &self.step {
            Step::Uniform(s) => Some((self.kernel_size + s * k) as f64),
            Step::Explicit(steps) => {
                let k = k as usize;
                (k <= steps.len()).then(|| (self.kernel_size + steps[..k].iter().sum::<u64>()) as f64)
            }
        }
    }

    pub fn positions(&self, levels: u32) -> Vec<f64> {
        (1..=levels).map_while(|l| self.position(l)).collect()
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let zero_step = match &self.step {
            Step::Uniform(s) => *s == 0,
            Step::Explicit(steps) => steps.contains(&0),
        };
        if self.kernel_size == 0 || zero_step {
            return Err(TraceError::InvalidParameters(
                "kernel size and steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for LearningScheme {
    fn default() -> Self {
        Self::uniform(5000, 5000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    /// Verticality threshold ν in (0, 1).
    pub nu: f64,
    /// Slowdown ς >= 1.
    pub slowdown: u32,
    /// Look-ahead window λ of the working level.
    pub lambda: u32,
    /// Bound on accuracies and on the prediction-level asymptote.
    pub upper_bound: f64,
    pub anchor_weight: f64,
    pub fit: FitConfig,
    pub plevel_source: PLevelSource,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self {
            nu: 2e-5,
            slowdown: 1,
            lambda: 5,
            upper_bound: 100.0,
            anchor_weight: 1.0,
            fit: FitConfig::default(),
            plevel_source: PLevelSource::Reference,
        }
    }
}

impl TraceParams {
    pub fn validate(&self) -> Result<(), TraceError> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(TraceError::InvalidParameters(format!(
                "nu must lie in (0, 1), got {}",
                self.nu
            )));
        }
        if self.slowdown < 1 {
            return Err(TraceError::InvalidParameters("slowdown must be >= 1".into()));
        }
        if !(self.upper_bound > 0.0) {
            return Err(TraceError::InvalidParameters("upper bound must be positive".into()));
        }
        if !(self.anchor_weight > 0.0 && self.anchor_weight.is_finite()) {
            return Err(TraceError::InvalidParameters("anchor weight must be positive".into()));
        }
        if !(self.fit.sse_tol > 0.0 && self.fit.step_tol > 0.0) {
            return Err(TraceError::InvalidParameters("fit tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackboneEntry {
    pub level: u32,
    pub x: f64,
    pub alpha: f64,
}

/// ν^(1/ς) / (1 - ν): the largest slope a backbone may show inside the
/// working window.
pub fn verticality_threshold(nu: f64, slowdown: u32) -> f64 {
    nu.powf(1.0 / f64::from(slowdown)) / (1.0 - nu)
}

/// Maps slopes in `[0, inf)` onto `[0, 1)`; `N(s) < ν` iff `s < ν/(1-ν)`.
pub fn normalized_slope(slope: f64) -> Result<f64, TraceError> {
    if !(slope >= 0.0) {
        return Err(TraceError::InvalidParameters(format!(
            "slope must be non-negative, got {slope}"
        )));
    }
    if slope.is_infinite() {
        return Ok(1.0);
    }
    Ok(slope / (slope + 1.0))
}

/// Smallest ω such that the slopes between consecutive backbone entries
/// ω..ω+λ+1 all stay under the verticality threshold. Also returns the
/// level of the entry that completed the window.
pub fn working_level_resolution(
    backbone: &[BackboneEntry],
    nu: f64,
    slowdown: u32,
    lambda: u32,
) -> Option<(u32, u32)> {
    let threshold = verticality_threshold(nu, slowdown);
    let span = lambda as usize + 1;
    if backbone.len() <= span {
        return None;
    }
    let ok: Vec<bool> = backbone
        .windows(2)
        .map(|w| (w[1].alpha - w[0].alpha).abs() / (w[1].x - w[0].x) <= threshold)
        .collect();
    // run length of satisfied slopes ending at each index
    let mut run = 0usize;
    for (j, &good) in ok.iter().enumerate() {
        run = if good { run + 1 } else { 0 };
        if run >= span {
            let k = j + 1 - span;
            return Some((backbone[k].level, backbone[j + 1].level));
        }
    }
    None
}

pub fn working_level(backbone: &[BackboneEntry], nu: f64, slowdown: u32, lambda: u32) -> Option<u32> {
    working_level_resolution(backbone, nu, slowdown, lambda).map(|(w, _)| w)
}

/// Smallest level ℘ >= ω whose asymptote is within the bound.
pub fn prediction_level(backbone: &[BackboneEntry], omega: u32, upper_bound: f64) -> Option<u32> {
    backbone
        .iter()
        .find(|e| e.level >= omega && e.alpha <= upper_bound)
        .map(|e| e.level)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningTrace {
    params: TraceParams,
    strategy: AnchoringStrategy,
    scheme: Option<LearningScheme>,
    observations: Vec<Observation>,
    reference: BTreeMap<u32, FitResult>,
    anchored: BTreeMap<u32, FitResult>,
    anchors: BTreeMap<u32, f64>,
    skipped_reference: BTreeMap<u32, String>,
    skipped_anchored: BTreeMap<u32, String>,
    wlevel: Option<u32>,
    plevel: Option<u32>,
    wlevel_resolved_at: Option<u32>,
}

impl LearningTrace {
    pub fn new(params: TraceParams, strategy: AnchoringStrategy) -> Result<Self, TraceError> {
        params.validate()?;
        strategy.validate()?;
        Ok(Self {
            params,
            strategy,
            scheme: None,
            observations: Vec::new(),
            reference: BTreeMap::new(),
            anchored: BTreeMap::new(),
            anchors: BTreeMap::new(),
            skipped_reference: BTreeMap::new(),
            skipped_anchored: BTreeMap::new(),
            wlevel: None,
            plevel: None,
            wlevel_resolved_at: None,
        })
    }

    /// Declares the scheme observations must follow.
    pub fn with_scheme(mut self, scheme: LearningScheme) -> Result<Self, TraceError> {
        scheme.validate()?;
        self.scheme = Some(scheme);
        Ok(self)
    }

    /// Builds a trace from a complete log. Produces the same trace as
    /// extending observation by observation; independent fits run through
    /// `mode`.
    pub fn from_observations(
        observations: &[Observation],
        params: TraceParams,
        strategy: AnchoringStrategy,
        scheme: Option<LearningScheme>,
        mode: Parallelism,
    ) -> Result<Self, TraceError> {
        let mut trace = Self::new(params, strategy)?;
        if let Some(s) = scheme {
            trace = trace.with_scheme(s)?;
        }
        if observations.len() < 3 {
            return Err(TraceError::TooFewObservations(observations.len()));
        }
        for obs in observations {
            trace.check_next(obs)?;
            trace.observations.push(*obs);
        }
        let n = trace.last_level();

        let levels: Vec<u32> = (3..=n).collect();
        let fits = par::map(mode, &levels, |&l| trace.fit_level(l, None));
        for (l, r) in levels.iter().zip(fits) {
            trace.store_reference(*l, r);
        }

        let Some((omega, at)) = working_level_resolution(
            &trace.reference_backbone(),
            params.nu,
            params.slowdown,
            params.lambda,
        ) else {
            return Ok(trace);
        };
        trace.wlevel = Some(omega);
        trace.wlevel_resolved_at = Some(at);
        trace.update_plevel();
        if !strategy.is_anchored() {
            return Ok(trace);
        }

        let batchable = match strategy {
            AnchoringStrategy::Fixed { .. } => true,
            AnchoringStrategy::FixedLookAhead { .. } => params.plevel_source == PLevelSource::Reference,
            _ => false,
        };
        if batchable {
            // anchors depend only on ω, ℘ and the frozen look-ahead value
            let switch = match strategy {
                AnchoringStrategy::FixedLookAhead { look_ahead, .. } => {
                    trace.plevel.map(|p| p + look_ahead + 1)
                }
                _ => None,
            };
            let first_stage_end = switch.map_or(n, |s| s.saturating_sub(1).min(n));
            trace.fit_anchored_batch(omega + 1, first_stage_end, mode)?;
            if let Some(s) = switch {
                trace.fit_anchored_batch(s.max(omega + 1), n, mode)?;
            }
        } else {
            for l in omega + 1..=n {
                trace.fit_anchored(l)?;
                trace.update_plevel();
            }
        }
        Ok(trace)
    }

    fn fit_anchored_batch(&mut self, from: u32, to: u32, mode: Parallelism) -> Result<(), TraceError> {
        if from > to {
            return Ok(());
        }
        // every level of a batch stage shares one anchor
        let anchor = anchor_for_level(&self.strategy, from, self)?;
        let jobs: Vec<(u32, Option<f64>)> = (from..=to).map(|l| (l, anchor)).collect();
        let fits = par::map(mode, &jobs, |&(l, a)| self.fit_level(l, a));
        for ((l, a), r) in jobs.into_iter().zip(fits) {
            self.store_anchored(l, a, r);
        }
        Ok(())
    }

    fn check_next(&self, obs: &Observation) -> Result<(), TraceError> {
        let last = self.last_level();
        if obs.level != last + 1 {
            return Err(TraceError::LevelGap {
                expected_after: last,
                got: obs.level,
            });
        }
        if !(obs.accuracy > 0.0 && obs.accuracy <= self.params.upper_bound) {
            return Err(TraceError::AccuracyOutOfRange {
                level: obs.level,
                accuracy: obs.accuracy,
            });
        }
        if !(obs.x > 0.0 && obs.x.is_finite()) {
            return Err(TraceError::NonIncreasingSize {
                level: obs.level,
                x: obs.x,
                previous: 0.0,
            });
        }
        if let Some(prev) = self.observations.last() {
            if !(obs.x > prev.x) {
                return Err(TraceError::NonIncreasingSize {
                    level: obs.level,
                    x: obs.x,
                    previous: prev.x,
                });
            }
        }
        if let Some(scheme) = &self.scheme {
            let expected = scheme.position(obs.level);
            if expected.is_none_or(|e| (e - obs.x).abs() > 1e-9 * e) {
                return Err(TraceError::SchemeMismatch {
                    level: obs.level,
                    x: obs.x,
                    expected: expected.unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }

    /// Appends one observation and brings every derived quantity up to date.
    pub fn extend(&mut self, obs: Observation) -> Result<(), TraceError> {
        self.check_next(&obs)?;
        self.observations.push(obs);
        let n = obs.level;
        if n < 3 {
            return Ok(());
        }
        let r = self.fit_level(n, None);
        self.store_reference(n, r);

        match self.wlevel {
            None => {
                let found = working_level_resolution(
                    &self.reference_backbone(),
                    self.params.nu,
                    self.params.slowdown,
                    self.params.lambda,
                );
                if let Some((omega, at)) = found {
                    self.wlevel = Some(omega);
                    self.wlevel_resolved_at = Some(at);
                    self.update_plevel();
                    if self.strategy.is_anchored() {
                        // anchored trends start right after ω, fitted retroactively
                        for l in omega + 1..=n {
                            self.fit_anchored(l)?;
                            self.update_plevel();
                        }
                    }
                }
            }
            Some(_) => {
                self.update_plevel();
                if self.strategy.is_anchored() {
                    self.fit_anchored(n)?;
                    self.update_plevel();
                }
            }
        }
        Ok(())
    }

    fn fit_level(&self, level: u32, anchor: Option<f64>) -> Result<FitResult, FitError> {
        let mut problem = FitProblem::new(self.points_up_to(level));
        if let Some(a) = anchor {
            problem = problem.with_anchor(a, self.params.anchor_weight);
        }
        fit(&problem, &self.params.fit)
    }

    fn fit_anchored(&mut self, level: u32) -> Result<(), TraceError> {
        let anchor = anchor_for_level(&self.strategy, level, self)?;
        let r = self.fit_level(level, anchor);
        self.store_anchored(level, anchor, r);
        Ok(())
    }

    fn store_reference(&mut self, level: u32, r: Result<FitResult, FitError>) {
        match r {
            Ok(r) => {
                self.reference.insert(level, r);
            }
            Err(e) => {
                self.skipped_reference.insert(level, e.to_string());
            }
        }
    }

    fn store_anchored(&mut self, level: u32, anchor: Option<f64>, r: Result<FitResult, FitError>) {
        if let Some(a) = anchor {
            self.anchors.insert(level, a);
        }
        match r {
            Ok(r) => {
                self.anchored.insert(level, r);
            }
            Err(e) => {
                self.skipped_anchored.insert(level, e.to_string());
            }
        }
    }

    fn update_plevel(&mut self) {
        if self.plevel.is_some() {
            return;
        }
        let Some(omega) = self.wlevel else { return };
        let backbone = match self.params.plevel_source {
            PLevelSource::Reference => self.reference_backbone(),
            PLevelSource::Anchored => self.backbone(),
        };
        self.plevel = prediction_level(&backbone, omega, self.params.upper_bound);
    }

    pub fn params(&self) -> &TraceParams {
        &self.params
    }

    pub fn strategy(&self) -> &AnchoringStrategy {
        &self.strategy
    }

    pub fn scheme(&self) -> Option<&LearningScheme> {
        self.scheme.as_ref()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn last_level(&self) -> u32 {
        self.observations.last().map_or(0, |o| o.level)
    }

    pub fn wlevel(&self) -> Option<u32> {
        self.wlevel
    }

    pub fn plevel(&self) -> Option<u32> {
        self.plevel
    }

    /// Level whose observation completed the working-level window; the
    /// earliest point at which anchored quantities are available.
    pub fn wlevel_resolved_at(&self) -> Option<u32> {
        self.wlevel_resolved_at
    }

    pub fn reference_fits(&self) -> &BTreeMap<u32, FitResult> {
        &self.reference
    }

    pub fn anchored_fits(&self) -> &BTreeMap<u32, FitResult> {
        &self.anchored
    }

    pub fn anchors(&self) -> &BTreeMap<u32, f64> {
        &self.anchors
    }

    pub fn anchor_at(&self, level: u32) -> Option<f64> {
        self.anchors.get(&level).copied()
    }

    pub fn skipped_reference(&self) -> &BTreeMap<u32, String> {
        &self.skipped_reference
    }

    pub fn skipped_anchored(&self) -> &BTreeMap<u32, String> {
        &self.skipped_anchored
    }

    pub fn x_at(&self, level: u32) -> Option<f64> {
        level
            .checked_sub(1)
            .and_then(|i| self.observations.get(i as usize))
            .map(|o| o.x)
    }

    pub fn points_up_to(&self, level: u32) -> Vec<(f64, f64)> {
        self.observations
            .iter()
            .take(level as usize)
            .map(|o| (o.x, o.accuracy))
            .collect()
    }

    pub fn reference_alpha(&self, level: u32) -> Option<f64> {
        self.reference.get(&level).map(|r| r.curve.c)
    }

    fn uses_anchored(&self, level: u32) -> bool {
        self.strategy.is_anchored() && self.wlevel.is_some_and(|w| level > w)
    }

    /// Anchored trend past ω, plain trend otherwise.
    pub fn effective_trend(&self, level: u32) -> Option<&FitResult> {
        if self.uses_anchored(level) {
            self.anchored.get(&level)
        } else {
            self.reference.get(&level)
        }
    }

    pub fn effective_alpha(&self, level: u32) -> Option<f64> {
        self.effective_trend(level).map(|r| r.curve.c)
    }

    /// Effective asymptote of the last successfully fitted level <= `level`.
    pub fn effective_alpha_at_or_before(&self, level: u32) -> Option<f64> {
        (3..=level.min(self.last_level()))
            .rev()
            .find_map(|l| self.effective_alpha(l))
    }

    /// `(level, trend)` for every level with an effective trend, ascending.
    pub fn effective_trends(&self) -> Vec<(u32, &FitResult)> {
        (3..=self.last_level())
            .filter_map(|l| self.effective_trend(l).map(|r| (l, r)))
            .collect()
    }

    fn entries<'a>(&'a self, trends: impl Iterator<Item = (u32, &'a FitResult)>) -> Vec<BackboneEntry> {
        trends
            .map(|(level, r)| BackboneEntry {
                level,
                x: self.x_at(level).expect("fitted levels have observations"),
                alpha: r.curve.c,
            })
            .collect()
    }

    /// Asymptotic backbone of the effective trends.
    pub fn backbone(&self) -> Vec<BackboneEntry> {
        self.entries(self.effective_trends().into_iter())
    }

    /// Asymptotic backbone of the plain trends.
    pub fn reference_backbone(&self) -> Vec<BackboneEntry> {
        self.entries(self.reference.iter().map(|(l, r)| (*l, r)))
    }
}
