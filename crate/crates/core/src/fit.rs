//! Least-squares fitting of power-law trends.
//!
//! The optimizer is a Levenberg-Marquardt trust-region iteration over
//! `(ln A, ln b, c)` where the model is written on the rescaled axis
//! `u = x / x_1` as `c - A u^-b`. Working in logs keeps every iterate inside
//! the pattern family; rescaling keeps the Jacobian columns comparable.
//!
//! An anchor is a target for the value at infinity. Since the curve tends to
//! `c`, it enters the objective as one more residual `sqrt(w) (anchor - c)`.

#![allow(clippy::needless_range_loop)]

use serde::{Deserialize, Serialize};

use crate::curve::PowerLawCurve;
use crate::error::FitError;

pub mod oracle;

pub use oracle::{oracle_fit, GridSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitProblem {
    /// `(x, y)` pairs with `x` strictly increasing.
    pub points: Vec<(f64, f64)>,
    pub anchor: Option<f64>,
    pub anchor_weight: f64,
}

impl FitProblem {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        Self {
            points,
            anchor: None,
            anchor_weight: 1.0,
        }
    }

    pub fn with_anchor(mut self, anchor: f64, weight: f64) -> Self {
        self.anchor = Some(anchor);
        self.anchor_weight = weight;
        self
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if self.points.len() < 3 {
            return Err(FitError::InvalidProblem(format!(
                "need at least 3 points, got {}",
                self.points.len()
            )));
        }
        let mut prev = 0.0;
        for (i, &(x, y)) in self.points.iter().enumerate() {
            if !(x.is_finite() && y.is_finite()) {
                return Err(FitError::InvalidProblem(format!("point {i} is not finite")));
            }
            if !(x > prev) {
                return Err(FitError::InvalidProblem(format!(
                    "x must be positive and strictly increasing (point {i}: {x})"
                )));
            }
            prev = x;
        }
        if let Some(anchor) = self.anchor {
            if !anchor.is_finite() {
                return Err(FitError::InvalidProblem("anchor is not finite".into()));
            }
        }
        if !(self.anchor_weight > 0.0 && self.anchor_weight.is_finite()) {
            return Err(FitError::InvalidProblem(format!(
                "anchor weight must be positive, got {}",
                self.anchor_weight
            )));
        }
        let y0 = self.points[0].1;
        if self.points.iter().all(|&(_, y)| y == y0) {
            return Err(FitError::DegenerateData(y0));
        }
        Ok(())
    }

    /// Weighted SSE of `curve` on this problem, infinity term included.
    pub fn sse(&self, curve: &PowerLawCurve) -> f64 {
        let mut s: f64 = self
            .points
            .iter()
            .map(|&(x, y)| {
                let r = y - curve.value(x);
                r * r
            })
            .sum();
        if let Some(anchor) = self.anchor {
            let r = anchor - curve.c;
            s += self.anchor_weight * r * r;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Stop when an accepted step improves the SSE by less than this fraction.
    pub sse_tol: f64,
    /// Stop when the parameter step norm falls below this value.
    pub step_tol: f64,
    pub max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            sse_tol: 1e-12,
            step_tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub curve: PowerLawCurve,
    /// Observed minus fitted, one per finite point.
    pub residuals: Vec<f64>,
    /// `anchor - c`, present iff the problem is anchored.
    pub residual_at_infinity: Option<f64>,
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub(crate) fn from_curve(
        problem: &FitProblem,
        curve: PowerLawCurve,
        converged: bool,
        iterations: usize,
    ) -> Self {
        let residuals: Vec<f64> = problem
            .points
            .iter()
            .map(|&(x, y)| y - curve.value(x))
            .collect();
        let residual_at_infinity = problem.anchor.map(|anchor| anchor - curve.c);
        let sse = residuals.iter().map(|r| r * r).sum::<f64>()
            + residual_at_infinity.map_or(0.0, |r| problem.anchor_weight * r * r);
        Self {
            curve,
            residuals,
            residual_at_infinity,
            sse,
            converged,
            iterations,
        }
    }
}

/// Fits a power law to the problem. Two starting points are tried, the
/// heuristic one and the best point of a profile scan over `b`; the result
/// with the lower SSE is returned.
pub fn fit(problem: &FitProblem, config: &FitConfig) -> Result<FitResult, FitError> {
    problem.validate()?;
    let model = Scaled::new(problem);

    let mut best: Option<Lm> = None;
    let starts = [Some(model.heuristic_start()), model.profile_start()];
    for start in starts.into_iter().flatten() {
        let run = model.levenberg_marquardt(start, config);
        best = match best {
            Some(b) if better(&b, &run) => Some(b),
            _ => Some(run),
        };
    }
    let run = best.expect("heuristic start is always present");
    let result = FitResult::from_curve(problem, model.curve(&run.p), run.converged, run.iterations);
    if result.converged {
        Ok(result)
    } else {
        Err(FitError::Diverged(Box::new(result)))
    }
}

fn better(a: &Lm, b: &Lm) -> bool {
    match (a.converged, b.converged) {
        (true, false) => true,
        (false, true) => false,
        _ => a.sse <= b.sse,
    }
}

struct Lm {
    p: [f64; 3],
    sse: f64,
    converged: bool,
    iterations: usize,
}

struct Scaled<'a> {
    problem: &'a FitProblem,
    x_scale: f64,
    u: Vec<f64>,
    ln_u: Vec<f64>,
    sqrt_w: f64,
    ln_a_min: f64,
}

impl<'a> Scaled<'a> {
    fn new(problem: &'a FitProblem) -> Self {
        let x_scale = problem.points[0].0;
        let u: Vec<f64> = problem.points.iter().map(|&(x, _)| x / x_scale).collect();
        let ln_u = u.iter().map(|v| v.ln()).collect();
        let scale = problem.points.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
        Self {
            ln_a_min: (A_FLOOR * scale).max(f64::MIN_POSITIVE).ln(),
            problem,
            x_scale,
            u,
            ln_u,
            sqrt_w: problem.anchor_weight.sqrt(),
        }
    }

    fn project(&self, p: [f64; 3]) -> [f64; 3] {
        [
            p[0].clamp(self.ln_a_min, LN_A_MAX),
            p[1].clamp(LN_B_RANGE.0, LN_B_RANGE.1),
            p[2],
        ]
    }

    /// Coordinates sitting on a bound whose descent direction points
    /// outward. `g` is the gradient of half the SSE, so descent is `-g`.
    fn active_bounds(&self, p: &[f64; 3], g: &[f64; 3]) -> [bool; 3] {
        let at = |v: f64, lo: f64, hi: f64, gj: f64| (v <= lo && gj > 0.0) || (v >= hi && gj < 0.0);
        [
            at(p[0], self.ln_a_min, LN_A_MAX, g[0]),
            at(p[1], LN_B_RANGE.0, LN_B_RANGE.1, g[1]),
            false,
        ]
    }

    fn curve(&self, p: &[f64; 3]) -> PowerLawCurve {
        let big_a = p[0].exp();
        let b = p[1].exp();
        PowerLawCurve::new_unchecked(big_a * self.x_scale.powf(b), b, p[2])
    }

    fn residuals(&self, p: &[f64; 3], out: &mut Vec<f64>) -> f64 {
        out.clear();
        let (big_a, b, c) = (p[0].exp(), p[1].exp(), p[2]);
        for (&l, &(_, y)) in self.ln_u.iter().zip(&self.problem.points) {
            out.push(y - c + big_a * (-b * l).exp());
        }
        if let Some(anchor) = self.problem.anchor {
            out.push(self.sqrt_w * (anchor - c));
        }
        out.iter().map(|r| r * r).sum()
    }

    /// Accumulates `J^T J` and `J^T r` for the residual Jacobian.
    fn normal_equations(&self, p: &[f64; 3], r: &[f64]) -> ([[f64; 3]; 3], [f64; 3]) {
        let (big_a, b) = (p[0].exp(), p[1].exp());
        let mut h = [[0.0; 3]; 3];
        let mut g = [0.0; 3];
        let mut add = |row: [f64; 3], ri: f64| {
            for j in 0..3 {
                g[j] += row[j] * ri;
                for k in 0..3 {
                    h[j][k] += row[j] * row[k];
                }
            }
        };
        for i in 0..self.u.len() {
            let t = big_a * (-b * self.ln_u[i]).exp();
            add([t, -t * b * self.ln_u[i], -1.0], r[i]);
        }
        if self.problem.anchor.is_some() {
            add([0.0, 0.0, -self.sqrt_w], r[self.u.len()]);
        }
        (h, g)
    }

    fn heuristic_start(&self) -> [f64; 3] {
        let mut ys: Vec<f64> = self.problem.points.iter().map(|p| p.1).collect();
        ys.sort_by(f64::total_cmp);
        let max = ys[ys.len() - 1];
        let median = if ys.len() % 2 == 1 {
            ys[ys.len() / 2]
        } else {
            0.5 * (ys[ys.len() / 2 - 1] + ys[ys.len() / 2])
        };
        let spread = max - ys[0];
        let mut c0 = max + 0.5 * (max - median);
        if let Some(anchor) = self.problem.anchor {
            c0 = c0.min(anchor);
        }
        let y1 = self.problem.points[0].1;
        let a0 = (c0 - y1).max(1e-3 * spread);
        [a0.ln(), 0.5f64.ln(), c0]
    }

    /// SSE at `ln b` with `A` and `c` solved exactly under `A >= A_min`.
    fn profiled(&self, ln_b: f64) -> Option<(f64, [f64; 3])> {
        let b = ln_b.exp();
        // y = c - A t, anchor row: t = 0 with weight w. Centered sums keep
        // the slope accurate when t is nearly constant (small b).
        let t: Vec<f64> = self.ln_u.iter().map(|&l| (-b * l).exp()).collect();
        let ys = self.problem.points.iter().map(|p| p.1);
        let mut n = self.u.len() as f64;
        let mut st: f64 = t.iter().sum();
        let mut sy: f64 = ys.clone().sum();
        let anchor = self.problem.anchor.map(|v| (v, self.problem.anchor_weight));
        if let Some((v, w)) = anchor {
            n += w;
            sy += w * v;
        }
        let (t_mean, y_mean) = (st / n, sy / n);
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (&ti, y) in t.iter().zip(ys) {
            sxx += (ti - t_mean) * (ti - t_mean);
            sxy += (ti - t_mean) * (y - y_mean);
        }
        if let Some((v, w)) = anchor {
            sxx += w * t_mean * t_mean;
            sxy += w * (-t_mean) * (v - y_mean);
        }
        st = t_mean * n;
        let a_min = self.ln_a_min.exp();
        let (mut big_a, mut c) = if sxx > 0.0 {
            let big_a = -sxy / sxx;
            (big_a, y_mean + big_a * t_mean)
        } else {
            (a_min, f64::NAN)
        };
        if !(big_a > a_min) || !c.is_finite() {
            // constrained optimum sits on the floor of A
            big_a = a_min;
            c = (sy + big_a * st) / n;
        }
        if !(big_a.is_finite() && c.is_finite()) {
            return None;
        }
        let p = self.project([big_a.ln(), ln_b, c]);
        let (big_a, c) = (p[0].exp(), p[2]);
        let mut sse: f64 = t
            .iter()
            .zip(&self.problem.points)
            .map(|(&ti, &(_, y))| (y - c + big_a * ti).powi(2))
            .sum();
        if let Some((v, w)) = anchor {
            sse += w * (v - c).powi(2);
        }
        Some((sse, p))
    }

    /// Minimizes the profiled SSE over `ln b`: a grid scan over the whole
    /// admissible range, then golden-section search in the best cell pair.
    /// Eliminating `A` and `c` removes the curved valley along which the
    /// full iteration crawls on nearly flat data.
    fn profile_start(&self) -> Option<[f64; 3]> {
        const STEPS: usize = 120;
        let (lo, hi) = LN_B_RANGE;
        let h = (hi - lo) / STEPS as f64;
        let sse_at = |ln_b: f64| self.profiled(ln_b).map_or(f64::INFINITY, |(s, _)| s);

        let mut best_k = None;
        let mut best = f64::INFINITY;
        for k in 0..=STEPS {
            let v = sse_at(lo + h * k as f64);
            if v < best {
                best = v;
                best_k = Some(k);
            }
        }
        let k = best_k?;
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut l = lo + h * k.saturating_sub(1) as f64;
        let mut r = lo + h * (k + 1).min(STEPS) as f64;
        let mut m1 = r - inv_phi * (r - l);
        let mut m2 = l + inv_phi * (r - l);
        let (mut f1, mut f2) = (sse_at(m1), sse_at(m2));
        while r - l > 1e-9 {
            if f1 <= f2 {
                r = m2;
                m2 = m1;
                f2 = f1;
                m1 = r - inv_phi * (r - l);
                f1 = sse_at(m1);
            } else {
                l = m1;
                m1 = m2;
                f1 = f2;
                m2 = l + inv_phi * (r - l);
                f2 = sse_at(m2);
            }
        }
        let grid_best = lo + h * k as f64;
        let ln_b = if f1.min(f2) < best {
            if f1 <= f2 { m1 } else { m2 }
        } else {
            grid_best
        };
        self.profiled(ln_b).map(|(_, p)| p)
    }

    fn levenberg_marquardt(&self, start: [f64; 3], cfg: &FitConfig) -> Lm {
        let mut p = self.project(start);
        let mut r = Vec::with_capacity(self.u.len() + 1);
        let mut r_try = Vec::with_capacity(self.u.len() + 1);
        let mut sse = self.residuals(&p, &mut r);
        if !sse.is_finite() {
            return Lm {
                p,
                sse,
                converged: false,
                iterations: 0,
            };
        }
        let mut mu: f64 = 1e-3;
        let mut iterations = 0;
        while iterations < cfg.max_iter {
            iterations += 1;
            if sse == 0.0 {
                return Lm { p, sse, converged: true, iterations };
            }
            let (h, g) = self.normal_equations(&p, &r);
            let active = self.active_bounds(&p, &g);
            loop {
                let mut damped = h;
                let mut rhs = [-g[0], -g[1], -g[2]];
                for j in 0..3 {
                    damped[j][j] += mu * h[j][j].max(1e-12);
                    if active[j] {
                        // pinned to its bound: drop the coordinate from the step
                        for k in 0..3 {
                            damped[j][k] = 0.0;
                            damped[k][j] = 0.0;
                        }
                        damped[j][j] = 1.0;
                        rhs[j] = 0.0;
                    }
                }
                let step = solve3(damped, rhs);
                let Some(step) = step else {
                    mu *= 10.0;
                    if mu > 1e30 {
                        return Lm { p, sse, converged: false, iterations };
                    }
                    continue;
                };
                let step_norm = norm3(&step);
                let small_step = step_norm < cfg.step_tol * (norm3(&p) + cfg.step_tol);
                let candidate = self.project([p[0] + step[0], p[1] + step[1], p[2] + step[2]]);
                let sse_try = self.residuals(&candidate, &mut r_try);
                if sse_try.is_finite() && sse_try < sse {
                    let improvement = (sse - sse_try) / sse;
                    p = candidate;
                    sse = sse_try;
                    std::mem::swap(&mut r, &mut r_try);
                    mu = (mu * 0.3).max(1e-12);
                    if improvement < cfg.sse_tol || small_step {
                        return Lm { p, sse, converged: true, iterations };
                    }
                    break;
                }
                if small_step {
                    return Lm { p, sse, converged: true, iterations };
                }
                mu *= 10.0;
                if mu > 1e30 {
                    return Lm { p, sse, converged: true, iterations };
                }
            }
        }
        Lm { p, sse, converged: false, iterations }
    }
}

/// Upper limit on `ln A` and the box on `ln b`; they keep `a = A x_1^b`
/// and `x^-b` finite.
const LN_A_MAX: f64 = 60.0;
const LN_B_RANGE: (f64, f64) = (-9.2, 2.8);
/// `A` below this fraction of the data scale is a flat trend for all
/// practical purposes. Bounding it lets flat data converge instead of
/// crawling towards `A = 0`, which lies outside the family.
const A_FLOOR: f64 = 1e-10;

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if !(m[pivot][col].abs() > 0.0) || !m[pivot][col].is_finite() {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = rhs[row];
        for k in row + 1..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(curve: &PowerLawCurve, xs: impl IntoIterator<Item = f64>) -> Vec<(f64, f64)> {
        xs.into_iter().map(|x| (x, curve.value(x))).collect()
    }

    fn thousands() -> Vec<(f64, f64)> {
        samples(
            &PowerLawCurve::new_unchecked(2.0, 0.5, 95.0),
            (1..=10).map(|k| 1000.0 * k as f64),
        )
    }

    #[test]
    fn solve3_matches_known_system() {
        let m = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let x = solve3(m, [1.0, 2.0, 3.0]).unwrap();
        for (row, rhs) in m.iter().zip([1.0, 2.0, 3.0]) {
            let lhs: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-14);
        }
        assert!(solve3([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]], [1.0; 3]).is_none());
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let r = fit(&FitProblem::new(thousands()), &FitConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.sse < 1e-12, "sse {}", r.sse);
        assert!((r.curve.a - 2.0).abs() < 1e-5, "{:?}", r.curve);
        assert!((r.curve.b - 0.5).abs() < 1e-6);
        assert!((r.curve.c - 95.0).abs() < 1e-8);
        assert_eq!(r.residual_at_infinity, None);
    }

    #[test]
    fn anchor_pulls_asymptote_up() {
        let p = FitProblem::new(thousands()).with_anchor(100.0, 1.0);
        let r = fit(&p, &FitConfig::default()).unwrap();
        assert!(r.curve.c > 95.0 && r.curve.c < 100.0, "c = {}", r.curve.c);
        assert_eq!(r.residual_at_infinity, Some(100.0 - r.curve.c));
        let o = oracle_fit(&p, &GridSpec::default());
        assert!((o.curve.c - r.curve.c).abs() < 0.05, "{} vs {}", o.curve.c, r.curve.c);
        assert!(r.sse <= o.sse * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn three_point_interpolation() {
        let truth = PowerLawCurve::new_unchecked(1.0, 1.0, 10.0);
        let r = fit(&FitProblem::new(samples(&truth, [1.0, 2.0, 4.0])), &FitConfig::default())
            .unwrap();
        assert!((r.curve.c - 10.0).abs() < 1e-8);
        assert!((r.curve.a - 1.0).abs() < 1e-8);
        assert!((r.curve.b - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sse_includes_weighted_infinity_term() {
        let p = FitProblem::new(thousands()).with_anchor(100.0, 2.5);
        let r = fit(&p, &FitConfig::default()).unwrap();
        let direct: f64 = r.residuals.iter().map(|v| v * v).sum::<f64>()
            + 2.5 * r.residual_at_infinity.unwrap().powi(2);
        assert!((direct - r.sse).abs() <= 1e-12 * r.sse.max(1.0));
        assert!((p.sse(&r.curve) - r.sse).abs() <= 1e-12 * r.sse.max(1.0));
    }

    #[test]
    fn flat_data_is_degenerate() {
        let pts = vec![(1.0, 90.0), (2.0, 90.0), (3.0, 90.0)];
        assert_eq!(
            fit(&FitProblem::new(pts), &FitConfig::default()),
            Err(FitError::DegenerateData(90.0))
        );
    }

    #[test]
    fn invalid_problems() {
        let cfg = FitConfig::default();
        assert!(matches!(
            fit(&FitProblem::new(vec![(1.0, 1.0), (2.0, 2.0)]), &cfg),
            Err(FitError::InvalidProblem(_))
        ));
        assert!(matches!(
            fit(&FitProblem::new(vec![(1.0, 1.0), (1.0, 2.0), (3.0, 3.0)]), &cfg),
            Err(FitError::InvalidProblem(_))
        ));
        let p = FitProblem::new(thousands()).with_anchor(100.0, 0.0);
        assert!(matches!(fit(&p, &cfg), Err(FitError::InvalidProblem(_))));
    }

    #[test]
    fn iteration_cap_reports_divergence() {
        let cfg = FitConfig {
            max_iter: 0,
            ..FitConfig::default()
        };
        let noisy: Vec<(f64, f64)> = thousands()
            .into_iter()
            .enumerate()
            .map(|(i, (x, y))| (x, y + if i % 2 == 0 { 0.01 } else { -0.01 }))
            .collect();
        match fit(&FitProblem::new(noisy), &cfg) {
            Err(FitError::Diverged(r)) => {
                assert!(!r.converged);
                assert_eq!(r.iterations, 0);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn deterministic() {
        let p = FitProblem::new(thousands()).with_anchor(100.0, 1.0);
        let a = fit(&p, &FitConfig::default()).unwrap();
        let b = fit(&p, &FitConfig::default()).unwrap();
        assert_eq!(a.curve.a.to_bits(), b.curve.a.to_bits());
        assert_eq!(a.curve.b.to_bits(), b.curve.b.to_bits());
        assert_eq!(a.curve.c.to_bits(), b.curve.c.to_bits());
    }
}
