//! Brute-force reference fitter.
//!
//! For fixed `b` the model `c - a x^-b` is linear in `(a, c)`, so the SSE can
//! be minimized exactly over those two and scanned over `b` alone. A dense
//! grid over `ln b` followed by golden-section refinement gives a global
//! answer on small problems without sharing any code with the main fitter.

use serde::{Deserialize, Serialize};

use super::{FitProblem, FitResult};
use crate::curve::PowerLawCurve;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub b_min: f64,
    pub b_max: f64,
    pub steps: usize,
    pub refine_iterations: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            b_min: 1e-3,
            b_max: 8.0,
            steps: 400,
            refine_iterations: 120,
        }
    }
}

/// Exact minimizer over `(a >= 0, c)` for fixed `b`, returned as `(sse, a, c)`.
fn profile(problem: &FitProblem, b: f64) -> (f64, f64, f64) {
    let x0 = problem.points[0].0;
    // t_i = (x_i / x0)^-b keeps the normal equations well scaled
    let ts: Vec<f64> = problem.points.iter().map(|&(x, _)| (x / x0).powf(-b)).collect();
    let w_inf = problem.anchor.map_or(0.0, |_| problem.anchor_weight);
    let anchor = problem.anchor.unwrap_or(0.0);

    let n = problem.points.len() as f64 + w_inf;
    let sy = problem.points.iter().map(|p| p.1).sum::<f64>() + w_inf * anchor;
    let st: f64 = ts.iter().sum();
    let stt: f64 = ts.iter().map(|t| t * t).sum();
    let sty: f64 = ts.iter().zip(&problem.points).map(|(t, p)| t * p.1).sum();

    // minimize sum (y - c + s t)^2 over s = scaled a, then c
    let det = stt * n - st * st;
    let (mut s, mut c) = if det.abs() > 0.0 {
        ((st * sy - n * sty) / det, (stt * sy - st * sty) / det)
    } else {
        (0.0, sy / n)
    };
    if !(s > 0.0) {
        s = 0.0;
        c = sy / n;
    }
    let a = (s * x0.powf(b)).max(f64::MIN_POSITIVE);
    let curve = PowerLawCurve::new_unchecked(a, b, c);
    (problem.sse(&curve), a, c)
}

pub fn oracle_fit(problem: &FitProblem, grid: &GridSpec) -> FitResult {
    let (lo, hi) = (grid.b_min.ln(), grid.b_max.ln());
    let h = (hi - lo) / grid.steps as f64;
    let at = |ln_b: f64| profile(problem, ln_b.exp()).0;

    let mut best_k = 0;
    let mut best = f64::INFINITY;
    for k in 0..=grid.steps {
        let v = at(lo + h * k as f64);
        if v < best {
            best = v;
            best_k = k;
        }
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut l = lo + h * best_k.saturating_sub(1) as f64;
    let mut r = lo + h * (best_k + 1).min(grid.steps) as f64;
    let mut m1 = r - inv_phi * (r - l);
    let mut m2 = l + inv_phi * (r - l);
    let (mut f1, mut f2) = (at(m1), at(m2));
    for _ in 0..grid.refine_iterations {
        if f1 <= f2 {
            r = m2;
            m2 = m1;
            f2 = f1;
            m1 = r - inv_phi * (r - l);
            f1 = at(m1);
        } else {
            l = m1;
            m1 = m2;
            f1 = f2;
            m2 = l + inv_phi * (r - l);
            f2 = at(m2);
        }
    }

    let mut ln_b = lo + h * best_k as f64;
    for cand in [m1, m2] {
        if at(cand) < at(ln_b) {
            ln_b = cand;
        }
    }
    let (_, a, c) = profile(problem, ln_b.exp());
    let evaluations = grid.steps + 1 + grid.refine_iterations + 2;
    FitResult::from_curve(
        problem,
        PowerLawCurve::new_unchecked(a, ln_b.exp(), c),
        true,
        evaluations,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_samples_reach_zero() {
        let truth = PowerLawCurve::new_unchecked(2.0, 0.5, 95.0);
        let pts = (1..=10)
            .map(|k| {
                let x = 1000.0 * k as f64;
                (x, truth.value(x))
            })
            .collect();
        let r = oracle_fit(&FitProblem::new(pts), &GridSpec::default());
        assert!(r.sse < 1e-6, "sse {}", r.sse);
        assert!((r.curve.c - 95.0).abs() < 1e-3);
    }

    #[test]
    fn interpolates_three_points() {
        let truth = PowerLawCurve::new_unchecked(1.0, 1.0, 10.0);
        let pts = [1.0, 2.0, 4.0].iter().map(|&x| (x, truth.value(x))).collect();
        let r = oracle_fit(&FitProblem::new(pts), &GridSpec::default());
        assert!(r.sse < 1e-12);
        assert!((r.curve.b - 1.0).abs() < 1e-5);
    }

    #[test]
    fn decreasing_data_falls_back_to_mean() {
        let pts = vec![(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)];
        let r = oracle_fit(&FitProblem::new(pts), &GridSpec::default());
        assert!((r.curve.c - 2.0).abs() < 1e-12);
        assert!(r.curve.a > 0.0);
    }
}
