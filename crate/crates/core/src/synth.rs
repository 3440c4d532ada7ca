//! Seeded synthetic learning curves with known ground truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::curve::PowerLawCurve;
use crate::error::SynthError;
use crate::trace::{LearningScheme, Observation};

/// Smallest accuracy a generated observation may take.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub level: u32,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub truth: PowerLawCurve,
    #[serde(default)]
    pub scheme: LearningScheme,
    pub levels: u32,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub perturbations: Vec<Spike>,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn noiseless(truth: PowerLawCurve, levels: u32) -> Self {
        Self {
            truth,
            scheme: LearningScheme::default(),
            levels,
            noise_sd: 0.0,
            perturbations: Vec::new(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd must be >= 0, got {}", self.noise_sd));
        }
        if self.truth.a <= 0.0 || self.truth.b <= 0.0 || !self.truth.c.is_finite() {
            return bad(format!("truth is not a power-law pattern: {:?}", self.truth));
        }
        if self.scheme.validate().is_err() {
            return bad("scheme needs a positive kernel and steps".into());
        }
        if self.scheme.positions(self.levels).len() < self.levels as usize {
            return bad(format!("scheme does not reach level {}", self.levels));
        }
        if let Some(s) = self.perturbations.iter().find(|s| !s.delta.is_finite()) {
            return bad(format!("spike at level {} is not finite", s.level));
        }
        Ok(())
    }
}

/// `truth(x_i) + N(0, sd) + spikes`, clamped into `(0, 100]`.
pub fn generate(spec: &GeneratorSpec) -> Result<Vec<Observation>, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise_sd > 0.0)
        .then(|| Normal::new(0.0, spec.noise_sd).expect("sd validated"));
    Ok(spec
        .scheme
        .positions(spec.levels)
        .into_iter()
        .zip(1u32..)
        .map(|(x, level)| {
            let mut y = spec.truth.value(x);
            if let Some(n) = &noise {
                y += n.sample(&mut rng);
            }
            y += spec
                .perturbations
                .iter()
                .filter(|s| s.level == level)
                .map(|s| s.delta)
                .sum::<f64>();
            Observation::new(level, x, y.clamp(FLOOR, 100.0))
        })
        .collect())
}
