//! Anchoring strategies and the sufficient-condition diagnostic.
//!
//! An anchor is the value a trend is asked to reach at infinity. Anchors
//! apply only to levels past the working level ω.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::AnchorError;
use crate::fit::{fit, FitProblem};
use crate::trace::LearningTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnchoringStrategy {
    None,
    Canonical,
    Fixed { beta: f64 },
    FixedLookAhead { beta: f64, look_ahead: u32 },
}

impl AnchoringStrategy {
    pub fn fixed(beta: f64) -> Self {
        Self::Fixed { beta }
    }

    pub fn fixed_look_ahead(beta: f64, look_ahead: u32) -> Self {
        Self::FixedLookAhead { beta, look_ahead }
    }

    pub fn validate(&self) -> Result<(), AnchorError> {
        match *self {
            Self::Fixed { beta } | Self::FixedLookAhead { beta, .. } => {
                if !(beta.is_finite() && beta >= 100.0) {
                    return Err(AnchorError::InvalidStrategy(format!(
                        "fixed anchors need beta >= 100, got {beta}"
                    )));
                }
                Ok(())
            }
            Self::None | Self::Canonical => Ok(()),
        }
    }

    /// Fixed kinds, with or without look-ahead.
    pub fn is_fixed(&self) -> bool {
        matches!(self, Self::Fixed { .. } | Self::FixedLookAhead { .. })
    }

    pub fn is_anchored(&self) -> bool {
        !matches!(self, Self::None)
    }

    pub fn beta(&self) -> Option<f64> {
        match *self {
            Self::Fixed { beta } | Self::FixedLookAhead { beta, .. } => Some(beta),
            _ => None,
        }
    }
}

impl fmt::Display for AnchoringStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::Canonical => f.write_str("canonical"),
            Self::Fixed { beta } => write!(f, "fixed:{beta}"),
            Self::FixedLookAhead { beta, look_ahead } => write!(f, "fixed:{beta}+{look_ahead}"),
        }
    }
}

impl FromStr for AnchoringStrategy {
    type Err = AnchorError;

    /// `none` | `canonical` | `fixed:<beta>` | `fixed:<beta>+<look-ahead>`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AnchorError::InvalidStrategy(format!("cannot parse strategy '{s}'"));
        let strategy = match s.trim() {
            "none" => Self::None,
            "canonical" => Self::Canonical,
            other => {
                let spec = other.strip_prefix("fixed:").ok_or_else(bad)?;
                match spec.split_once('+') {
                    Some((beta, la)) => Self::FixedLookAhead {
                        beta: beta.trim().parse().map_err(|_| bad())?,
                        look_ahead: la.trim().parse().map_err(|_| bad())?,
                    },
                    None => Self::Fixed {
                        beta: spec.trim().parse().map_err(|_| bad())?,
                    },
                }
            }
        };
        strategy.validate()?;
        Ok(strategy)
    }
}

/// Which backbone decides the prediction level used by the look-ahead switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PLevelSource {
    #[default]
    Reference,
    Anchored,
}

impl FromStr for PLevelSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reference" => Ok(Self::Reference),
            "anchored" => Ok(Self::Anchored),
            _ => Err(format!("unknown plevel source '{s}' (reference|anchored)")),
        }
    }
}

/// Anchor for `level` under `strategy`, given the state of `trace` at the
/// moment the level is fitted. `None` means the level is fitted plain.
pub fn anchor_for_level(
    strategy: &AnchoringStrategy,
    level: u32,
    trace: &LearningTrace,
) -> Result<Option<f64>, AnchorError> {
    if !strategy.is_anchored() {
        return Ok(None);
    }
    let omega = trace.wlevel().ok_or(AnchorError::MissingWLevel)?;
    if level <= omega {
        return Ok(None);
    }
    match *strategy {
        AnchoringStrategy::None => Ok(None),
        AnchoringStrategy::Fixed { beta } => Ok(Some(beta)),
        AnchoringStrategy::Canonical => {
            let alpha_omega = trace
                .reference_alpha(omega)
                .ok_or(AnchorError::MissingWLevel)?;
            if level == omega + 1 {
                return Ok(Some(alpha_omega));
            }
            // previous anchored asymptote; on fit failures the last success
            let previous = trace
                .anchored_fits()
                .range(omega + 1..level)
                .next_back()
                .map(|(_, r)| r.curve.c);
            Ok(Some(previous.unwrap_or(alpha_omega)))
        }
        AnchoringStrategy::FixedLookAhead { beta, look_ahead } => match trace.plevel() {
            Some(p) if level > p + look_ahead => {
                frozen_look_ahead_anchor(beta, p + look_ahead, omega, trace).map(Some)
            }
            Some(_) => Ok(Some(beta)),
            // unresolved ℘ is known to lie at or beyond the last level seen
            None if trace.last_level() + 1 >= level => Ok(Some(beta)),
            None => Err(AnchorError::MissingPLevel(level)),
        },
    }
}

/// β-anchored asymptote at the switch level `℘ + ℓ`. When the switch level
/// is ω itself there is no anchored trend yet, so one is fitted with β.
fn frozen_look_ahead_anchor(
    beta: f64,
    switch: u32,
    omega: u32,
    trace: &LearningTrace,
) -> Result<f64, AnchorError> {
    if switch > omega {
        return trace
            .effective_alpha_at_or_before(switch)
            .ok_or(AnchorError::MissingPLevel(switch + 1));
    }
    let params = trace.params();
    let problem = FitProblem::new(trace.points_up_to(switch)).with_anchor(beta, params.anchor_weight);
    fit(&problem, &params.fit)
        .map(|r| r.curve.c)
        .map_err(|_| AnchorError::MissingPLevel(switch + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyCheck {
    pub level: u32,
    pub anchor: f64,
    /// Reference asymptote α_i.
    pub reference_alpha: f64,
    /// Anchored asymptote α̂_i.
    pub anchored_alpha: f64,
    /// `anchor - α_i`; required non-negative only past ℘.
    pub upper_margin: f64,
    pub upper_required: bool,
    /// `(Â_i - Â_{i+1}) - (ρ̂_i(∞) - ρ̂_{i+1}(∞))`, absent on the last level.
    pub step_margin: Option<f64>,
}

impl SufficiencyCheck {
    pub fn passes_upper(&self) -> bool {
        !self.upper_required || self.upper_margin >= 0.0
    }

    pub fn passes_step(&self, tol: f64) -> bool {
        self.step_margin.is_none_or(|m| m >= -tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyReport {
    pub checks: Vec<SufficiencyCheck>,
    /// Levels whose anchored fit failed and were left out.
    pub skipped: Vec<u32>,
}

impl SufficiencyReport {
    pub fn all_pass(&self, tol: f64) -> bool {
        self.checks
            .iter()
            .all(|c| c.passes_upper() && c.passes_step(tol))
    }
}

/// Checks the two sufficient conditions for a decreasing anchored backbone
/// with the given anchors: `Â_i >= α_i` for `i > ℘`, and
/// `Â_i - Â_{i+1} >= ρ̂_i(∞) - ρ̂_{i+1}(∞)`. Each anchored trend is refitted
/// from the trace's observations.
pub fn verify_sufficiency(trace: &LearningTrace, anchors: &BTreeMap<u32, f64>) -> SufficiencyReport {
    let plevel = trace.plevel();
    let params = trace.params();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (&level, &anchor) in anchors {
        let Some(reference_alpha) = trace.reference_alpha(level) else {
            skipped.push(level);
            continue;
        };
        let problem = FitProblem::new(trace.points_up_to(level))
            .with_anchor(anchor, params.anchor_weight);
        match fit(&problem, &params.fit) {
            Ok(r) => rows.push((level, anchor, reference_alpha, r.curve.c)),
            Err(_) => skipped.push(level),
        }
    }
    let mut checks = Vec::with_capacity(rows.len());
    for (k, &(level, anchor, reference_alpha, anchored_alpha)) in rows.iter().enumerate() {
        let step_margin = rows.get(k + 1).filter(|next| next.0 == level + 1).map(|next| {
            let rho_i = anchor - anchored_alpha;
            let rho_next = next.1 - next.3;
            (anchor - next.1) - (rho_i - rho_next)
        });
        checks.push(SufficiencyCheck {
            level,
            anchor,
            reference_alpha,
            anchored_alpha,
            upper_margin: anchor - reference_alpha,
            upper_required: plevel.is_some_and(|p| level > p),
            step_margin,
        });
    }
    SufficiencyReport { checks, skipped }
}
