//! Orbit catalogs: search plus index attachment, JSON records and CSV samples.
//!
//! Floats are written with 17 significant digits so that catalogs round-trip exactly;
//! integers are written as integers.

use std::fmt::Write as _;
use std::io;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{flow, monodromy_with_tolerance, FloquetClass, State};
use crate::error::{Error, Result};
use crate::orbit_search::{
    action, action_gradient, find_orbits, newton::relative_residual, DiscreteLoop, OrbitClass, PeriodicOrbit,
    SearchBudget, SearchDiagnostics, Tolerances,
};
use crate::potential::PotentialSpec;
use crate::spectral_index::{attach_indices, IndexReport};

/// JSON formatter writing every float as `d.dddddddddddddddde±x`.
#[derive(Debug, Default, Clone, Copy)]
pub struct RoundTripFormatter;

impl serde_json::ser::Formatter for RoundTripFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` with [`RoundTripFormatter`], followed by a newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, RoundTripFormatter);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitRecord {
    pub id: usize,
    pub class: OrbitClass,
    /// Periodic part `y_i` of `x(t_i) = rho t_i + y_i`.
    pub samples: Vec<f64>,
    pub action: f64,
    pub residual: f64,
    pub multipliers: [Complex64; 2],
    pub floquet_class: FloquetClass,
    pub morse_index: Option<usize>,
    pub tau: Option<f64>,
    pub fundamental: bool,
    pub family_size: usize,
    pub degenerate: bool,
    pub shooting_residual: f64,
    pub initial_state: State,
    pub index: Option<IndexReport>,
}

impl OrbitRecord {
    pub fn from_orbit(id: usize, orbit: &PeriodicOrbit) -> Self {
        Self {
            id,
            class: orbit.class(),
            samples: orbit.discrete.y.clone(),
            action: orbit.action,
            residual: orbit.residual,
            multipliers: orbit.floquet.multipliers,
            floquet_class: orbit.floquet.floquet_class,
            morse_index: orbit.morse_index(),
            tau: orbit.tau(),
            fundamental: orbit.fundamental,
            family_size: orbit.family_size,
            degenerate: orbit.is_degenerate(),
            shooting_residual: orbit.shooting_residual,
            initial_state: orbit.initial_state,
            index: orbit.index.clone(),
        }
    }

    /// Rebuilds the orbit: the trajectory is re-integrated from `initial_state` and the
    /// Floquet data recomputed.
    pub fn to_orbit(&self, spec: &PotentialSpec, tol_degenerate: f64) -> Result<PeriodicOrbit> {
        let discrete = DiscreteLoop::new(self.class, self.samples.clone())?;
        let n = discrete.len();
        let (end, trajectory) = flow(spec, self.initial_state, 0.0, self.class.period(), n)?;
        let shooting_residual = ((end.x - self.initial_state.x - self.class.k1 as f64).powi(2)
            + (end.v - self.initial_state.v).powi(2))
        .sqrt();
        let mut orbit = PeriodicOrbit {
            action: action(&discrete, spec),
            residual: relative_residual(&discrete, &action_gradient(&discrete, spec)),
            initial_state: self.initial_state,
            shooting_residual,
            trajectory,
            discrete,
            floquet: crate::dynamics::MonodromyResult {
                w: [[1.0, 0.0], [0.0, 1.0]],
                multipliers: self.multipliers,
                floquet_class: self.floquet_class,
                l: 0,
            },
            fundamental: self.fundamental,
            family_size: self.family_size,
            index: self.index.clone(),
        };
        orbit.floquet = monodromy_with_tolerance(&orbit.coefficient_path(spec), n, tol_degenerate)?;
        Ok(orbit)
    }
}

pub fn records(orbits: &[PeriodicOrbit]) -> Vec<OrbitRecord> {
    orbits.iter().enumerate().map(|(i, o)| OrbitRecord::from_orbit(i, o)).collect()
}

pub fn parse_records(text: &str) -> Result<Vec<OrbitRecord>> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// `t,x,v` rows of the refined trajectory, endpoint included.
pub fn trajectory_csv(orbit: &PeriodicOrbit) -> String {
    let n = orbit.trajectory.len() - 1;
    let h = orbit.class().period() / n as f64;
    let mut out = String::from("t,x,v\n");
    for (i, s) in orbit.trajectory.iter().enumerate() {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", i as f64 * h, s.x, s.v);
    }
    out
}

/// A searched class with indices attached where possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub class: OrbitClass,
    pub orbits: Vec<PeriodicOrbit>,
    pub diagnostics: SearchDiagnostics,
    /// `(position, message)` for orbits whose index identities failed.
    pub index_failures: Vec<(usize, String)>,
}

impl Catalog {
    pub fn non_degenerate(&self) -> Vec<PeriodicOrbit> {
        self.orbits.iter().filter(|o| !o.is_degenerate()).cloned().collect()
    }

    pub fn all_degenerate(&self) -> bool {
        !self.orbits.is_empty() && self.orbits.iter().all(|o| o.is_degenerate())
    }
}

/// Attaches index reports to the non-degenerate orbits, collecting failures.
pub fn attach_all(spec: &PotentialSpec, orbits: &mut [PeriodicOrbit], angles: usize) -> Vec<(usize, String)> {
    let mut failures = Vec::new();
    for (i, orbit) in orbits.iter_mut().enumerate() {
        if orbit.is_degenerate() {
            orbit.index = None;
            continue;
        }
        match attach_indices(orbit, spec, angles) {
            Ok(report) => orbit.index = Some(report),
            Err(e) => {
                orbit.index = None;
                failures.push((i, e.to_string()));
            }
        }
    }
    failures
}

/// Searches `class` and attaches index data.
pub fn build_catalog(
    spec: &PotentialSpec,
    class: OrbitClass,
    budget: &SearchBudget,
    tol: &Tolerances,
    rng_seed: u64,
    angles: usize,
) -> Result<Catalog> {
    let (mut orbits, diagnostics) = find_orbits(spec, class, budget, tol, rng_seed)?;
    let index_failures = attach_all(spec, &mut orbits, angles);
    Ok(Catalog { class, orbits, diagnostics, index_failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PENDULUM_AMPLITUDE;

    #[test]
    fn floats_use_seventeen_significant_digits() {
        assert_eq!(to_json(&0.1f64), "1.0000000000000001e-1\n");
        assert_eq!(to_json(&vec![1.0f64, -2.5]), "[1.0000000000000000e0,-2.5000000000000000e0]\n");
        assert_eq!(to_json(&7usize), "7\n");
        let back: f64 = serde_json::from_str(to_json(&(1.0f64 / 3.0)).trim()).unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn catalog_round_trip_is_idempotent() {
        let spec = PotentialSpec::pendulum(1.0, PENDULUM_AMPLITUDE).unwrap();
        let class = OrbitClass::new(0, 1, 1.0).unwrap();
        let budget = SearchBudget {
            straight_seeds: 8,
            shooting_offsets: 2,
            shooting_velocities: 2,
            grid: Some(64),
            ..Default::default()
        };
        let catalog = build_catalog(&spec, class, &budget, &Tolerances::default(), 0, 90).unwrap();
        assert!(catalog.index_failures.is_empty(), "{:?}", catalog.index_failures);
        let text = to_json(&records(&catalog.orbits));
        let parsed = parse_records(&text).unwrap();
        assert_eq!(to_json(&parsed), text);
        let rebuilt: Vec<PeriodicOrbit> =
            parsed.iter().map(|r| r.to_orbit(&spec, 1e-6).unwrap()).collect();
        assert_eq!(to_json(&records(&rebuilt)), text);
    }

    #[test]
    fn trajectory_csv_has_header_and_closing_row() {
        let spec = PotentialSpec::pendulum(1.0, PENDULUM_AMPLITUDE).unwrap();
        let class = OrbitClass::new(0, 1, 1.0).unwrap();
        let budget = SearchBudget { straight_seeds: 4, shooting_offsets: 0, grid: Some(32), ..Default::default() };
        let catalog = build_catalog(&spec, class, &budget, &Tolerances::default(), 0, 32).unwrap();
        let csv = trajectory_csv(&catalog.orbits[0]);
        assert!(csv.starts_with("t,x,v\n"));
        assert_eq!(csv.lines().count(), 34);
    }
}
