//! Synthetic trace families shared by the integration tests.
#![allow(dead_code)]

use convergema::anchoring::AnchoringStrategy;
use convergema::curve::PowerLawCurve;
use convergema::par::Parallelism;
use convergema::synth::{generate, GeneratorSpec, Spike};
use convergema::trace::{BackboneEntry, LearningScheme, LearningTrace, Observation, TraceParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn trace(obs: &[Observation], strategy: AnchoringStrategy) -> LearningTrace {
    LearningTrace::from_observations(obs, TraceParams::default(), strategy, None, Parallelism::Parallel)
        .expect("synthetic logs build a trace")
}

/// Largest increase between consecutive backbone entries from `from` on.
pub fn max_increase(backbone: &[BackboneEntry], from: u32) -> f64 {
    backbone
        .windows(2)
        .filter(|w| w[0].level >= from)
        .map(|w| w[1].alpha - w[0].alpha)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Noisy curve saturating below 100, as a learner would produce.
pub fn noisy_log(rng: &mut ChaCha8Rng, levels: u32) -> Vec<Observation> {
    let truth = PowerLawCurve::new_unchecked(
        rng.random_range(100.0..1000.0),
        rng.random_range(0.3..0.6),
        rng.random_range(90.0..99.5),
    );
    let spec = GeneratorSpec {
        noise_sd: rng.random_range(0.0..=0.2),
        seed: rng.random(),
        ..GeneratorSpec::noiseless(truth, levels)
    };
    generate(&spec).expect("valid spec")
}

/// Noiseless curve whose asymptote sits close to 100, so small absolute
/// thresholds become reachable.
pub fn near_ceiling(rng: &mut ChaCha8Rng, levels: u32) -> (PowerLawCurve, Vec<Observation>) {
    let truth = PowerLawCurve::new_unchecked(
        rng.random_range(5.0..200.0),
        rng.random_range(0.3..0.7),
        rng.random_range(98.5..99.9),
    );
    let obs = generate(&GeneratorSpec::noiseless(truth, levels)).expect("valid spec");
    (truth, obs)
}

/// Noiseless curve that levels off at its value at a random level, which
/// gives a plain backbone that decreases towards the cap. Returns the log
/// and its limit.
pub fn capped(rng: &mut ChaCha8Rng, levels: u32) -> (Vec<Observation>, f64) {
    let truth = PowerLawCurve::new_unchecked(
        rng.random_range(100.0..1000.0),
        rng.random_range(0.3..0.6),
        rng.random_range(96.0..99.5),
    );
    let xs = LearningScheme::default().positions(levels);
    let k = rng.random_range(15..40usize.min(levels as usize - 1));
    let cap = truth.value(xs[k]);
    let obs = xs
        .iter()
        .enumerate()
        .map(|(j, &x)| Observation::new(j as u32 + 1, x, truth.value(x).min(cap)))
        .collect();
    (obs, cap)
}

/// Early observations pushed up, still increasing, so the plain backbone
/// rises before it settles.
pub fn early_spikes(levels: u32) -> Vec<Observation> {
    let truth = PowerLawCurve::new_unchecked(800.0, 0.5, 97.0);
    let spec = GeneratorSpec {
        perturbations: vec![
            Spike { level: 1, delta: 1.0 },
            Spike { level: 2, delta: 0.6 },
            Spike { level: 3, delta: 0.3 },
        ],
        ..GeneratorSpec::noiseless(truth, levels)
    };
    generate(&spec).expect("valid spec")
}
