use convergema::curve::PowerLawCurve;
use convergema::fit::{fit, oracle_fit, FitConfig, FitProblem, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_problem(rng: &mut ChaCha8Rng) -> (PowerLawCurve, FitProblem) {
    loop {
        let truth = PowerLawCurve::new_unchecked(
            rng.random_range(0.1..1000.0),
            rng.random_range(0.1..2.0),
            rng.random_range(50.0..100.0),
        );
        let n = rng.random_range(10..=30);
        let pts: Vec<(f64, f64)> = (1..=n)
            .map(|k| {
                let x = 5000.0 * k as f64;
                (x, truth.value(x))
            })
            .collect();
        if pts.iter().all(|&(_, y)| y > 0.0 && y <= 100.0) {
            return (truth, FitProblem::new(pts));
        }
    }
}

#[test]
fn random_noiseless_problems_recover_asymptote() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let (truth, problem) = random_problem(&mut rng);
        let r = fit(&problem, &FitConfig::default()).unwrap();
        let err = (r.curve.c - truth.c).abs();
        worst = worst.max(err);
        assert!(err < 1e-6, "{truth:?} -> {:?}", r.curve);
    }
    eprintln!("worst asymptote error {worst:e}");
}

#[test]
fn fit_is_never_worse_than_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = rand_distr::Normal::new(0.0, 0.3).unwrap();
    for i in 0..60 {
        let (_, mut problem) = random_problem(&mut rng);
        for p in problem.points.iter_mut() {
            p.1 += rng.sample(normal);
        }
        if i % 2 == 0 {
            problem = problem.with_anchor(100.0, 1.0);
        }
        let r = fit(&problem, &FitConfig::default()).unwrap();
        let o = oracle_fit(&problem, &GridSpec::default());
        assert!(r.sse <= o.sse * (1.0 + 1e-9) + 1e-12, "fit {} oracle {}", r.sse, o.sse);
    }
}

#[test]
fn unanchored_residuals_sum_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = rand_distr::Normal::new(0.0, 0.05).unwrap();
    for _ in 0..40 {
        let (_, mut problem) = random_problem(&mut rng);
        for p in problem.points.iter_mut() {
            p.1 += rng.sample(normal);
        }
        let r = fit(&problem, &FitConfig::default()).unwrap();
        let s: f64 = r.residuals.iter().sum();
        assert!(s.abs() < 1e-6 * r.residuals.len() as f64, "sum {s}");
    }
}

/// Curves shaped like real learning curves: a visible rise over the
/// scheme, saturating a little below 100.
fn realistic_problem(rng: &mut ChaCha8Rng) -> FitProblem {
    let truth = PowerLawCurve::new_unchecked(
        rng.random_range(100.0..1000.0),
        rng.random_range(0.3..0.6),
        rng.random_range(90.0..99.5),
    );
    let n = rng.random_range(10..=30);
    FitProblem::new(
        (1..=n)
            .map(|k| {
                let x = 5000.0 * k as f64;
                (x, truth.value(x))
            })
            .collect(),
    )
}

#[test]
fn anchored_residual_at_infinity_is_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let normal = rand_distr::Normal::new(0.0, 0.2).unwrap();
    for _ in 0..100 {
        let mut problem = realistic_problem(&mut rng);
        for p in problem.points.iter_mut() {
            p.1 = (p.1 + rng.sample(normal)).min(100.0);
        }
        let problem = problem.with_anchor(100.0, 1.0);
        let r = fit(&problem, &FitConfig::default()).unwrap();
        assert!(r.residual_at_infinity.unwrap() >= 0.0, "{:?}", r.curve);
    }
}

