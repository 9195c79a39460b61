//! Identification of equivalent orbits and time-shift families.
//!
//! Two loops are the same orbit when they agree after an integer spatial translation.
//! In a non-primitive class `(p k1, p k2)` the shifts `x(t + j k2 T0)` of a solution are
//! again solutions; they are grouped into one family and represented by a canonical
//! member (smallest action, then lexicographically smallest samples).

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

use super::functional::{DiscreteLoop, OrbitClass};
use super::PeriodicOrbit;

/// Sup-norm distance between the positions of two loops after the best integer
/// spatial translation.
pub fn loop_distance(a: &DiscreteLoop, b: &DiscreteLoop) -> f64 {
    let n = a.len() as f64;
    let mean = a.y.iter().zip(&b.y).map(|(u, v)| u - v).sum::<f64>() / n;
    let k0 = mean.round();
    [k0 - 1.0, k0, k0 + 1.0]
        .iter()
        .map(|k| a.y.iter().zip(&b.y).map(|(u, v)| (u - v - k).abs()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

/// Sup-norm distance after removing the best constant offset.
fn distance_mod_constant(a: &DiscreteLoop, b: &DiscreteLoop) -> f64 {
    let diffs: Vec<f64> = a.y.iter().zip(&b.y).map(|(u, v)| u - v).collect();
    let lo = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    0.5 * (hi - lo)
}

/// Grid shifts `j N / g`, `j = 0..g`, where `g = gcd(|k1|, k2)` is the class multiple.
fn family_shifts(lp: &DiscreteLoop) -> Vec<usize> {
    let g = lp.class.gcd().max(1) as usize;
    let n = lp.len();
    (0..g).map(|j| j * n / g).collect()
}

/// Distinct members of the time-shift family of `lp`, as `(shift, loop)` pairs.
pub fn family_members(lp: &DiscreteLoop, tol: f64) -> Vec<(usize, DiscreteLoop)> {
    let mut members: Vec<(usize, DiscreteLoop)> = Vec::new();
    for s in family_shifts(lp) {
        let shifted = lp.time_shifted(s);
        if members.iter().all(|(_, m)| loop_distance(m, &shifted) > tol) {
            members.push((s, shifted));
        }
    }
    members
}

/// Whether an orbit of class `(p k1, p k2)` is already `k2 T0`-periodic with `k1` windings.
pub fn is_fundamental(lp: &DiscreteLoop, primitive: &OrbitClass, p: u32, tol: f64) -> Result<bool> {
    let expected = primitive.multiple(p);
    if lp.class.k1 != expected.k1 || lp.class.k2 != expected.k2 {
        return Err(Error::Precondition(format!(
            "loop class ({}, {}) is not ({}, {}) times {p}",
            lp.class.k1, lp.class.k2, primitive.k1, primitive.k2
        )));
    }
    let n = lp.len();
    if n % p as usize != 0 {
        return Err(Error::Precondition(format!(
            "grid of {n} nodes is not commensurate with k2 T0 = {}",
            primitive.period()
        )));
    }
    let shift = n / p as usize;
    let k1 = primitive.k1 as f64;
    let gap = (0..n)
        .map(|i| (lp.x(i + shift) - lp.x(i) - k1).abs())
        .fold(0.0, f64::max);
    Ok(gap <= tol)
}

fn compare_loops(a_action: f64, a: &DiscreteLoop, b_action: f64, b: &DiscreteLoop) -> Ordering {
    let scale = a_action.abs().max(b_action.abs()).max(1.0);
    if (a_action - b_action).abs() > 1e-12 * scale {
        return a_action.total_cmp(&b_action);
    }
    for (u, v) in a.y.iter().zip(&b.y) {
        match u.total_cmp(v) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Collapses equivalent orbits and annotates time-shift families.
///
/// Degenerate orbits that differ only by a constant offset with equal action are treated
/// as points of one critical manifold and collapsed as well.
pub fn deduplicate(
    spec: &PotentialSpec,
    orbits: Vec<PeriodicOrbit>,
    tol: f64,
    tol_degenerate: f64,
) -> Result<Vec<PeriodicOrbit>> {
    struct Group {
        orbit: PeriodicOrbit,
        members: Vec<(usize, DiscreteLoop)>,
    }
    let mut groups: Vec<Group> = Vec::new();
    'next: for orbit in orbits {
        for group in &groups {
            let same = group
                .members
                .iter()
                .any(|(_, m)| loop_distance(m, &orbit.discrete) <= tol);
            let same_manifold = orbit.is_degenerate()
                && group.orbit.is_degenerate()
                && (orbit.action - group.orbit.action).abs() <= tol
                && distance_mod_constant(&group.orbit.discrete, &orbit.discrete) <= tol;
            if same || same_manifold {
                continue 'next;
            }
        }
        let members = family_members(&orbit.discrete, tol);
        groups.push(Group { orbit, members });
    }

    let mut out = Vec::with_capacity(groups.len());
    for group in groups {
        let family_size = group.members.len();
        let (best_shift, _) = group
            .members
            .iter()
            .map(|(s, m)| (*s, super::functional::action(m, spec), m))
            .min_by(|a, b| compare_loops(a.1, a.2, b.1, b.2))
            .map(|(s, a, _)| (s, a))
            .expect("family contains the orbit itself");
        let mut canonical = if best_shift == 0 {
            group.orbit
        } else {
            group.orbit.time_shifted(spec, best_shift, tol_degenerate)?
        };
        canonical.family_size = family_size;
        let (primitive, p) = canonical.class().primitive();
        canonical.fundamental = is_fundamental(&canonical.discrete, &primitive, p, tol)?;
        out.push(canonical);
    }
    out.sort_by(|a, b| compare_loops(a.action, &a.discrete, b.action, &b.discrete));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class(k1: i64, k2: u32) -> OrbitClass {
        OrbitClass::new(k1, k2, 1.0).unwrap()
    }

    #[test]
    fn integer_translates_are_identified() {
        let y: Vec<f64> = (0..32).map(|i| 0.2 * (i as f64 * 0.3).sin()).collect();
        let a = DiscreteLoop::new(class(1, 1), y).unwrap();
        assert!(loop_distance(&a, &a.translated(1.0)) < 1e-15);
        assert!(loop_distance(&a, &a.translated(-3.0)) < 1e-14);
        assert!(loop_distance(&a, &a.translated(0.5)) > 0.49);
    }

    #[test]
    fn equilibrium_is_fundamental_in_doubled_class() {
        let lp = DiscreteLoop::straight(class(0, 2), 64, 0.0).unwrap();
        assert!(is_fundamental(&lp, &class(0, 1), 2, 1e-6).unwrap());
        assert_eq!(family_members(&lp, 1e-6).len(), 1);
    }

    #[test]
    fn exact_rotation_is_fundamental() {
        let lp = DiscreteLoop::straight(class(2, 2), 64, 0.3).unwrap();
        assert!(is_fundamental(&lp, &class(1, 1), 2, 1e-6).unwrap());
    }

    #[test]
    fn subharmonic_has_family_of_size_p() {
        // y(t) = 0.1 sin(pi t) over T = 2 is not 1-periodic.
        let n = 64;
        let y: Vec<f64> = (0..n).map(|i| 0.1 * (std::f64::consts::PI * 2.0 * i as f64 / n as f64).sin()).collect();
        let lp = DiscreteLoop::new(class(0, 2), y).unwrap();
        assert!(!is_fundamental(&lp, &class(0, 1), 2, 1e-6).unwrap());
        let members = family_members(&lp, 1e-6);
        assert_eq!(members.len(), 2);
        assert!(loop_distance(&members[0].1, &members[1].1) > 1e-6);
    }

    #[test]
    fn fundamental_check_validates_class_and_grid() {
        let lp = DiscreteLoop::straight(class(0, 2), 64, 0.0).unwrap();
        assert!(is_fundamental(&lp, &class(0, 1), 3, 1e-6).is_err());
        let odd = DiscreteLoop::straight(class(0, 3), 48, 0.0).unwrap();
        assert!(is_fundamental(&odd, &class(0, 1), 3, 1e-6).unwrap());
    }
}
