//! Deflated damped Newton on the discrete action gradient.

use crate::linalg::solve_cyclic_real;
use crate::potential::PotentialSpec;

use super::functional::{action_gradient, action_hessian_cyclic, DiscreteLoop};

/// Additive shift in the deflation operator `prod_r (1 / d_r^2 + shift)`.
const DEFLATION_SHIFT: f64 = 1.0;
/// Largest sup-norm Newton step, in units of the circle.
const MAX_STEP: f64 = 0.25;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Gradient norm relative to the loop norm.
pub fn relative_residual(lp: &DiscreteLoop, gradient: &[f64]) -> f64 {
    norm(gradient) / norm(&lp.y).max(1.0)
}

/// Mean-square distance to the nearest integer translate of `root`, and the translate.
fn deflation_distance(y: &[f64], root: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().zip(root).map(|(a, b)| a - b).sum::<f64>() / n;
    let k = mean.round();
    let d2 = y.iter().zip(root).map(|(a, b)| (a - b - k).powi(2)).sum::<f64>() / n;
    (d2, k)
}

/// `log m(y)` and its gradient for the deflation operator over `roots`.
fn deflation(y: &[f64], roots: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = y.len();
    let mut log_m = 0.0;
    let mut grad = vec![0.0; n];
    for root in roots {
        let (d2, k) = deflation_distance(y, root);
        let d2 = d2.max(1e-300);
        log_m += (1.0 / d2 + DEFLATION_SHIFT).ln();
        // d/dy log(1/D + s) = -grad D / (D + s D^2), grad D = 2 (y - r - k) / n.
        let coef = -1.0 / (d2 + DEFLATION_SHIFT * d2 * d2) * 2.0 / n as f64;
        for ((g, a), b) in grad.iter_mut().zip(y).zip(root) {
            *g += coef * (a - b - k);
        }
    }
    (log_m, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonOutcome {
    Converged,
    Stalled,
    Diverged,
}

/// Runs deflated Newton from `lp`. On success the loop is polished with plain Newton
/// steps and returned with its relative residual.
pub fn deflated_newton(
    spec: &PotentialSpec,
    mut lp: DiscreteLoop,
    roots: &[Vec<f64>],
    max_iter: usize,
    tol: f64,
) -> (NewtonOutcome, DiscreteLoop, f64) {
    let mut g = action_gradient(&lp, spec);
    let mut res = relative_residual(&lp, &g);
    for _ in 0..max_iter {
        if res <= tol {
            break;
        }
        let Some(d) = newton_direction(spec, &lp, &g) else {
            return (NewtonOutcome::Stalled, lp, res);
        };
        let (log_m, grad_log_m) = deflation(&lp.y, roots);
        let denom = 1.0 - grad_log_m.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        if !denom.is_finite() || denom.abs() < 1e-12 {
            return (NewtonOutcome::Stalled, lp, res);
        }
        let mut step: Vec<f64> = d.iter().map(|v| v / denom).collect();
        let sup = step.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if sup > MAX_STEP {
            step.iter_mut().for_each(|v| *v *= MAX_STEP / sup);
        }
        // Backtracking on the deflated merit log(m) + log|g|.
        let merit = log_m + norm(&g).max(1e-300).ln();
        let mut alpha = 1.0;
        let mut chosen = None;
        for attempt in 0..8 {
            let y: Vec<f64> = lp.y.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
            let trial = DiscreteLoop { class: lp.class, y };
            let tg = action_gradient(&trial, spec);
            let (tlog_m, _) = deflation(&trial.y, roots);
            let tmerit = tlog_m + norm(&tg).max(1e-300).ln();
            if (tmerit.is_finite() && tmerit < merit) || attempt == 7 {
                chosen = Some((trial, tg));
                break;
            }
            alpha *= 0.5;
        }
        let (trial, tg) = chosen.expect("line search always yields a trial");
        if trial.y.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
            return (NewtonOutcome::Diverged, lp, res);
        }
        lp = trial;
        g = tg;
        res = relative_residual(&lp, &g);
    }
    if res > tol {
        // A few undeflated steps can finish a run that stopped just short.
        if res < 1e-6 {
            polish(spec, &mut lp, &mut g, &mut res, tol);
        }
        if res > tol {
            return (NewtonOutcome::Stalled, lp, res);
        }
    }
    polish(spec, &mut lp, &mut g, &mut res, tol * 1e-3);
    (NewtonOutcome::Converged, lp, res)
}

fn newton_direction(spec: &PotentialSpec, lp: &DiscreteLoop, g: &[f64]) -> Option<Vec<f64>> {
    let hess = action_hessian_cyclic(lp, spec);
    let upper: Vec<f64> = hess.upper.iter().map(|z| z.re).collect();
    let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
    solve_cyclic_real(&hess.diag, &upper, &rhs).or_else(|| {
        // Nearly singular: shift the spectrum slightly.
        let shift = 1e-10 * hess.norm_bound();
        let diag: Vec<f64> = hess.diag.iter().map(|d| d + shift).collect();
        solve_cyclic_real(&diag, &upper, &rhs)
    })
}

/// Plain Newton steps while the residual keeps decreasing.
fn polish(spec: &PotentialSpec, lp: &mut DiscreteLoop, g: &mut Vec<f64>, res: &mut f64, target: f64) {
    for _ in 0..6 {
        if *res <= target {
            break;
        }
        let Some(d) = newton_direction(spec, lp, g) else { break };
        let y: Vec<f64> = lp.y.iter().zip(&d).map(|(a, s)| a + s).collect();
        let trial = DiscreteLoop { class: lp.class, y };
        let tg = action_gradient(&trial, spec);
        let tres = relative_residual(&trial, &tg);
        if !(tres < *res) {
            break;
        }
        *lp = trial;
        *g = tg;
        *res = tres;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit_search::functional::OrbitClass;
    use crate::potential::PENDULUM_AMPLITUDE;

    #[test]
    fn converges_to_equilibria_from_straight_seeds() {
        let spec = PotentialSpec::pendulum(1.0, PENDULUM_AMPLITUDE).unwrap();
        let class = OrbitClass::new(0, 1, 1.0).unwrap();
        let seed = DiscreteLoop::straight(class, 64, 0.1).unwrap();
        let (outcome, lp, res) = deflated_newton(&spec, seed, &[], 50, 1e-10);
        assert_eq!(outcome, NewtonOutcome::Converged);
        assert!(res <= 1e-10);
        let x0 = lp.y[0].rem_euclid(1.0);
        assert!(x0.min(1.0 - x0) < 1e-9 || (x0 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn deflation_pushes_away_from_known_root() {
        let spec = PotentialSpec::pendulum(1.0, PENDULUM_AMPLITUDE).unwrap();
        let class = OrbitClass::new(0, 1, 1.0).unwrap();
        let seed = DiscreteLoop::straight(class, 64, 0.05).unwrap();
        let (_, first, _) = deflated_newton(&spec, seed.clone(), &[], 50, 1e-10);
        let (outcome, second, _) = deflated_newton(&spec, seed, &[first.y.clone()], 80, 1e-10);
        assert_eq!(outcome, NewtonOutcome::Converged);
        let (d2, _) = deflation_distance(&second.y, &first.y);
        assert!(d2 > 1e-4);
    }
}
