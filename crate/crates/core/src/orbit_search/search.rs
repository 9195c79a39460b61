//! Multi-start deflated Newton search with shooting refinement.
//!
//! Seeds are straight loops `y = const` and projected trajectories of the flow started
//! from a grid of `(x0, v0)`. Every converged root is added, together with its images
//! under time shifts by `T0`, to the deflation set shared by all workers. Distinct roots
//! are refined by single shooting on the period map and classified.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{flow, flow_with_jacobian, monodromy_with_tolerance, State, TOL_DEGENERATE};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

use super::dedup::{deduplicate, loop_distance};
use super::functional::{action, DiscreteLoop, OrbitClass};
use super::newton::{deflated_newton, NewtonOutcome};
use super::PeriodicOrbit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub straight_seeds: usize,
    pub shooting_offsets: usize,
    pub shooting_velocities: usize,
    pub max_newton: usize,
    /// Grid size; `None` means 256 nodes per `T0`.
    pub grid: Option<usize>,
    pub workers: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            straight_seeds: 32,
            shooting_offsets: 32,
            shooting_velocities: 32,
            max_newton: 60,
            grid: None,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative gradient norm accepted as critical.
    pub residual: f64,
    /// `|mu - 1|` below which an orbit is resonant.
    pub degenerate: f64,
    /// Sup-norm distance below which two loops are the same orbit.
    pub dedup: f64,
    /// Period-map residual required after shooting refinement.
    pub shooting: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { residual: 1e-10, degenerate: TOL_DEGENERATE, dedup: 1e-6, shooting: 1e-9 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchDiagnostics {
    pub seeds: usize,
    pub converged_runs: usize,
    pub distinct_roots: usize,
    pub refinement_failures: usize,
    pub degenerate: usize,
}

enum Seed {
    Straight(f64),
    Shooting(State),
}

fn build_seeds(spec: &PotentialSpec, class: &OrbitClass, budget: &SearchBudget, rng_seed: u64) -> Vec<Seed> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut seeds = Vec::new();
    for i in 0..budget.straight_seeds {
        seeds.push(Seed::Straight(i as f64 / budget.straight_seeds as f64));
    }
    let rho = class.rho();
    let vmax = 2.0 * (2.0 * spec.amplitude_bound()).sqrt();
    let nv = budget.shooting_velocities;
    for i in 0..budget.shooting_offsets {
        for j in 0..nv {
            let x0 = (i as f64 + rng.gen_range(0.0..1.0)) / budget.shooting_offsets as f64;
            let u = if nv > 1 {
                (j as f64 + rng.gen_range(-0.5..0.5)) / (nv - 1) as f64
            } else {
                0.5
            };
            seeds.push(Seed::Shooting(State::new(x0, rho + vmax * (2.0 * u - 1.0))));
        }
    }
    seeds
}

/// Projects a trajectory sampled at `N + 1` nodes onto a loop of the class by removing
/// the linear drift of its endpoint.
fn project_trajectory(class: OrbitClass, samples: &[State]) -> Option<DiscreteLoop> {
    let n = samples.len() - 1;
    let h = class.period() / n as f64;
    let drift = samples[n].x - samples[0].x - class.k1 as f64;
    let rho = class.rho();
    let y: Vec<f64> = (0..n)
        .map(|i| samples[i].x - rho * i as f64 * h - drift * i as f64 / n as f64)
        .collect();
    DiscreteLoop::new(class, y).ok()
}

/// Images of a root under time shifts by multiples of `T0`.
fn t0_images(lp: &DiscreteLoop) -> Vec<DiscreteLoop> {
    let k2 = lp.class.k2 as usize;
    let n = lp.len();
    (0..k2).map(|j| lp.time_shifted(j * n / k2)).collect()
}

/// Single-shooting Newton on the period map, started from the loop's initial state.
fn refine_shooting(
    spec: &PotentialSpec,
    lp: &DiscreteLoop,
    tol: f64,
) -> Option<(State, f64, Vec<State>)> {
    let n = lp.len();
    let period = lp.class.period();
    let k1 = lp.class.k1 as f64;
    let h = lp.step();
    let mut s0 = State::new(lp.x(0), (lp.x(1) - (lp.x(n - 1) - k1)) / (2.0 * h));
    let residual_of = |s0: State| -> Result<(Vector2<f64>, Matrix2<f64>)> {
        let (s1, w) = flow_with_jacobian(spec, s0, 0.0, period, n)?;
        Ok((Vector2::new(s1.x - s0.x - k1, s1.v - s0.v), w))
    };
    let (mut f, mut w) = residual_of(s0).ok()?;
    for _ in 0..40 {
        if f.norm() <= 1e-13 * (1.0 + s0.x.abs()) {
            break;
        }
        let jac = w - Matrix2::identity();
        let step = match jac.try_inverse() {
            Some(inv) if jac.determinant().abs() > 1e-14 => -(inv * f),
            _ => {
                // Regularized least squares for (nearly) resonant orbits.
                let jt = jac.transpose();
                let reg = jt * jac + Matrix2::identity() * 1e-12;
                -(reg.try_inverse()? * jt * f)
            }
        };
        let next = State::new(s0.x + step[0], s0.v + step[1]);
        let (nf, nw) = residual_of(next).ok()?;
        if !(nf.norm() < f.norm()) {
            break;
        }
        s0 = next;
        f = nf;
        w = nw;
    }
    let res = f.norm();
    if res > tol {
        return None;
    }
    let (_, samples) = flow(spec, s0, 0.0, period, n).ok()?;
    // The refined orbit must be the continuum counterpart of this discrete root.
    let gap = (0..n).map(|i| (samples[i].x - lp.x(i)).abs()).fold(0.0, f64::max);
    if gap > 1e-3 {
        return None;
    }
    Some((s0, res, samples))
}

struct Shared {
    roots: Vec<Vec<f64>>,
    distinct: Vec<DiscreteLoop>,
    converged_runs: usize,
}

fn run_seed(
    spec: &PotentialSpec,
    class: OrbitClass,
    n: usize,
    seed: &Seed,
    budget: &SearchBudget,
    tol: &Tolerances,
    shared: &Mutex<Shared>,
) {
    let start = match seed {
        Seed::Straight(y0) => DiscreteLoop::straight(class, n, *y0).ok(),
        Seed::Shooting(s0) => flow(spec, *s0, 0.0, class.period(), n)
            .ok()
            .and_then(|(_, samples)| project_trajectory(class, &samples)),
    };
    let Some(start) = start else { return };
    let snapshot = shared.lock().expect("search state lock").roots.clone();
    let (outcome, root, res) = deflated_newton(spec, start, &snapshot, budget.max_newton, tol.residual);
    if outcome != NewtonOutcome::Converged || res > tol.residual {
        return;
    }
    let mut state = shared.lock().expect("search state lock");
    state.converged_runs += 1;
    for image in t0_images(&root) {
        if state.distinct.iter().all(|d| loop_distance(d, &image) > tol.dedup) {
            state.roots.push(image.y.clone());
            state.distinct.push(image);
        }
    }
}

/// Searches `class` for periodic orbits. Returns deduplicated orbits sorted by action,
/// with Floquet data; index reports are attached separately.
pub fn find_orbits(
    spec: &PotentialSpec,
    class: OrbitClass,
    budget: &SearchBudget,
    tol: &Tolerances,
    rng_seed: u64,
) -> Result<(Vec<PeriodicOrbit>, SearchDiagnostics)> {
    if (class.t0 - spec.t0()).abs() > 1e-12 * spec.t0() {
        return Err(Error::Precondition(format!(
            "class period T0 = {} differs from potential T0 = {}",
            class.t0,
            spec.t0()
        )));
    }
    let n = budget.grid.unwrap_or_else(|| class.default_grid());
    if n < 16 || n % class.k2 as usize != 0 {
        return Err(Error::Validation(format!("grid {n} must be >= 16 and divisible by k2")));
    }
    let seeds = build_seeds(spec, &class, budget, rng_seed);
    let shared = Mutex::new(Shared { roots: Vec::new(), distinct: Vec::new(), converged_runs: 0 });
    let workers = budget.workers.max(1);
    if workers == 1 {
        for seed in &seeds {
            run_seed(spec, class, n, seed, budget, tol, &shared);
        }
    } else {
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(seed) = seeds.get(i) else { break };
                    run_seed(spec, class, n, seed, budget, tol, &shared);
                });
            }
        });
    }
    let shared = shared.into_inner().expect("search state lock");

    let mut diagnostics = SearchDiagnostics {
        seeds: seeds.len(),
        converged_runs: shared.converged_runs,
        distinct_roots: shared.distinct.len(),
        ..Default::default()
    };
    let mut orbits = Vec::new();
    for lp in shared.distinct {
        let Some((initial_state, shooting_residual, trajectory)) = refine_shooting(spec, &lp, tol.shooting) else {
            diagnostics.refinement_failures += 1;
            continue;
        };
        let residual = super::newton::relative_residual(&lp, &super::functional::action_gradient(&lp, spec));
        let mut orbit = PeriodicOrbit {
            action: action(&lp, spec),
            residual,
            initial_state,
            shooting_residual,
            trajectory,
            discrete: lp,
            floquet: crate::dynamics::MonodromyResult {
                w: [[1.0, 0.0], [0.0, 1.0]],
                multipliers: [num_complex::Complex64::new(1.0, 0.0); 2],
                floquet_class: crate::dynamics::FloquetClass::Degenerate,
                l: 0,
            },
            fundamental: true,
            family_size: 1,
            index: None,
        };
        orbit.floquet = monodromy_with_tolerance(&orbit.coefficient_path(spec), n, tol.degenerate)?;
        orbits.push(orbit);
    }
    let orbits = deduplicate(spec, orbits, tol.dedup, tol.degenerate)?;
    diagnostics.degenerate = orbits.iter().filter(|o| o.is_degenerate()).count();
    Ok((orbits, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PENDULUM_AMPLITUDE;

    fn small_budget() -> SearchBudget {
        SearchBudget { straight_seeds: 8, shooting_offsets: 4, shooting_velocities: 4, grid: Some(64), ..Default::default() }
    }

    #[test]
    fn pendulum_class_zero_has_two_equilibria() {
        let spec = PotentialSpec::pendulum(1.0, PENDULUM_AMPLITUDE).unwrap();
        let class = OrbitClass::new(0, 1, 1.0).unwrap();
        let (orbits, diag) = find_orbits(&spec, class, &small_budget(), &Tolerances::default(), 0).unwrap();
        assert_eq!(orbits.len(), 2, "{diag:?}");
        let c = PENDULUM_AMPLITUDE;
        assert!((orbits[0].action + c).abs() < 1e-12);
        assert!((orbits[1].action - c).abs() < 1e-12);
        assert!(orbits.iter().all(|o| o.residual <= 1e-10 && o.shooting_residual <= 1e-9));
    }

    #[test]
    fn free_rotation_is_degenerate() {
        let spec = PotentialSpec::zero(1.0).unwrap();
        let class = OrbitClass::new(1, 1, 1.0).unwrap();
        let (orbits, _) = find_orbits(&spec, class, &small_budget(), &Tolerances::default(), 0).unwrap();
        assert!(!orbits.is_empty());
        for o in &orbits {
            assert!(o.is_degenerate());
            let spread = o.discrete.y.iter().fold(0.0f64, |a, b| a.max((b - o.discrete.y[0]).abs()));
            assert!(spread < 1e-12);
        }
        assert_eq!(orbits.len(), 1);
    }

    #[test]
    fn class_period_must_match_potential() {
        let spec = PotentialSpec::zero(2.0).unwrap();
        let class = OrbitClass::new(0, 1, 1.0).unwrap();
        assert!(find_orbits(&spec, class, &small_budget(), &Tolerances::default(), 0).is_err());
    }

    #[test]
    fn worker_count_does_not_change_the_catalog() {
        let spec = PotentialSpec::forced_pendulum(1.0, 0.5, PENDULUM_AMPLITUDE).unwrap();
        let class = OrbitClass::new(1, 1, 1.0).unwrap();
        let one = find_orbits(&spec, class, &small_budget(), &Tolerances::default(), 5).unwrap().0;
        let four = find_orbits(&spec, class, &SearchBudget { workers: 4, ..small_budget() }, &Tolerances::default(), 5)
            .unwrap()
            .0;
        assert_eq!(one.len(), four.len());
        for (a, b) in one.iter().zip(&four) {
            assert!(loop_distance(&a.discrete, &b.discrete) <= 1e-6);
        }
    }
}
