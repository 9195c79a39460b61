//! Periodic orbits in a winding class as critical points of the discrete action.

pub mod dedup;
pub mod functional;
pub mod newton;
pub mod search;

pub use dedup::{deduplicate, family_members, is_fundamental, loop_distance};
pub use functional::{
    action, action_gradient, action_hessian, action_hessian_cyclic, gcd, DiscreteLoop, OrbitClass,
};
pub use search::{find_orbits, SearchBudget, SearchDiagnostics, Tolerances};

use serde::{Deserialize, Serialize};

use crate::dynamics::{linearize_samples, monodromy_with_tolerance, CoefficientPath, FloquetClass, MonodromyResult, State};
use crate::error::Result;
use crate::potential::PotentialSpec;
use crate::spectral_index::IndexReport;

/// A converged periodic solution with its Floquet and index data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// Critical point of the discrete action.
    pub discrete: DiscreteLoop,
    pub action: f64,
    /// Relative gradient norm at `discrete`.
    pub residual: f64,
    /// Initial state of the shooting-refined RK4 orbit.
    pub initial_state: State,
    /// `|state(T) - state(0) - (k1, 0)|` of the refined orbit.
    pub shooting_residual: f64,
    /// Refined trajectory at the `N + 1` grid nodes.
    pub trajectory: Vec<State>,
    pub floquet: MonodromyResult,
    pub fundamental: bool,
    pub family_size: usize,
    pub index: Option<IndexReport>,
}

impl PeriodicOrbit {
    pub fn class(&self) -> OrbitClass {
        self.discrete.class
    }

    pub fn is_degenerate(&self) -> bool {
        self.floquet.floquet_class == FloquetClass::Degenerate
    }

    pub fn morse_index(&self) -> Option<usize> {
        self.index.as_ref().map(|r| r.morse_index)
    }

    pub fn tau(&self) -> Option<f64> {
        self.index.as_ref().map(|r| r.tau)
    }

    /// `A(t) = V''(t, x(t))` along the refined trajectory.
    pub fn coefficient_path(&self, spec: &PotentialSpec) -> CoefficientPath {
        let xs: Vec<f64> = self.trajectory.iter().map(|s| s.x).collect();
        linearize_samples(spec, self.class().period(), &xs)
    }

    /// The same orbit with time origin moved forward by `shift` grid nodes. Only a
    /// solution when the shift is a multiple of `T0`. The index report is carried over.
    pub fn time_shifted(&self, spec: &PotentialSpec, shift: usize, tol_degenerate: f64) -> Result<Self> {
        let n = self.discrete.len();
        let k1 = self.class().k1 as f64;
        let s = shift % n;
        let discrete = self.discrete.time_shifted(s);
        let trajectory: Vec<State> = (0..=n)
            .map(|i| {
                let j = i + s;
                if j <= n {
                    self.trajectory[j]
                } else {
                    let st = self.trajectory[j - n];
                    State::new(st.x + k1, st.v)
                }
            })
            .collect();
        let mut out = Self {
            action: action(&discrete, spec),
            residual: newton::relative_residual(&discrete, &action_gradient(&discrete, spec)),
            initial_state: trajectory[0],
            shooting_residual: self.shooting_residual,
            trajectory,
            discrete,
            floquet: self.floquet.clone(),
            fundamental: self.fundamental,
            family_size: self.family_size,
            index: self.index.clone(),
        };
        out.floquet = monodromy_with_tolerance(&out.coefficient_path(spec), n, tol_degenerate)?;
        Ok(out)
    }
}

/// `A(t_i) = V''(t_i, x(t_i))` on the orbit's grid.
pub fn linearize_along(spec: &PotentialSpec, orbit: &PeriodicOrbit) -> CoefficientPath {
    orbit.coefficient_path(spec)
}
