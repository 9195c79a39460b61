//! Multiplicity functions of fundamental solutions and mod-p subharmonic bounds.
//!
//! `chi(tau) = n_alpha - n_beta` tallies fundamental solutions by twisting frequency;
//! `nu` and `eta` are its partial sums with `<=` and `<` semantics. For a prime `p`, the
//! number of solutions of Morse index `2n` in the class `(p k1, p k2)` is at least
//! `nu(2n / (p k2 T0)) mod p`, and of index `2n + 1` at least `-eta((2n + 2) / (p k2 T0)) mod p`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::FloquetClass;
use crate::error::{Error, Result};
use crate::orbit_search::{OrbitClass, PeriodicOrbit};

/// Relative tolerance for deciding that two twisting frequencies coincide at a boundary.
const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiEntry {
    pub tau: f64,
    pub chi: i64,
    pub n_alpha: usize,
    pub n_beta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiTable {
    pub rho: f64,
    pub tol_tau: f64,
    /// Sorted by `tau`.
    pub entries: Vec<ChiEntry>,
}

/// `tol_tau = 0.5 / (p_max k2 T0)`.
pub fn default_tol_tau(class: &OrbitClass, p_max: u32) -> f64 {
    0.5 / (p_max as f64 * class.period())
}

fn same_boundary(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_TOL * a.abs().max(b.abs()).max(1.0)
}

impl ChiTable {
    pub fn empty(rho: f64, tol_tau: f64) -> Self {
        Self { rho, tol_tau, entries: Vec::new() }
    }

    /// `nu(tau) = sum of chi(zeta) over zeta <= tau`.
    pub fn nu(&self, tau: f64) -> i64 {
        self.entries
            .iter()
            .filter(|e| e.tau < tau || same_boundary(e.tau, tau))
            .map(|e| e.chi)
            .sum()
    }

    /// `eta(tau) = sum of chi(zeta) over zeta < tau`.
    pub fn eta(&self, tau: f64) -> i64 {
        self.entries
            .iter()
            .filter(|e| e.tau < tau && !same_boundary(e.tau, tau))
            .map(|e| e.chi)
            .sum()
    }

    /// `chi` at `tau` (zero off the table).
    pub fn chi(&self, tau: f64) -> i64 {
        self.entries.iter().filter(|e| same_boundary(e.tau, tau)).map(|e| e.chi).sum()
    }

    pub fn tau_max(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.tau)
    }

    /// Sum of all `chi`; zero for a complete search.
    pub fn total(&self) -> i64 {
        self.entries.iter().map(|e| e.chi).sum()
    }
}

pub fn nu(table: &ChiTable, tau: f64) -> i64 {
    table.nu(tau)
}

pub fn eta(table: &ChiTable, tau: f64) -> i64 {
    table.eta(tau)
}

/// Tallies fundamental, non-degenerate orbits of one primitive class by twisting
/// frequency. Type-alpha orbits sit exactly on the grid `m / (k2 T0)`; type-beta
/// frequencies are merged within `tol_tau`.
pub fn build_chi(orbits: &[PeriodicOrbit], class: &OrbitClass, tol_tau: f64) -> Result<ChiTable> {
    if !(tol_tau > 0.0) {
        return Err(Error::Validation(format!("tol_tau must be positive, got {tol_tau}")));
    }
    if !class.is_primitive() {
        return Err(Error::Precondition(format!("class ({}, {}) is not primitive", class.k1, class.k2)));
    }
    let period = class.period();
    let mut alpha: Vec<(f64, usize)> = Vec::new();
    let mut beta: Vec<(f64, usize)> = Vec::new();
    for orbit in orbits {
        let oc = orbit.class();
        if oc.k1 != class.k1 || oc.k2 != class.k2 {
            return Err(Error::Precondition(format!(
                "orbit of class ({}, {}) in a ({}, {}) table",
                oc.k1, oc.k2, class.k1, class.k2
            )));
        }
        if !orbit.fundamental || orbit.is_degenerate() {
            return Err(Error::Precondition("chi tables take fundamental non-degenerate orbits".into()));
        }
        let report = orbit
            .index
            .as_ref()
            .ok_or_else(|| Error::Precondition("orbit has no index report".into()))?;
        match report.floquet_class {
            FloquetClass::Alpha => {
                let tau = report.morse_index as f64 / period;
                match alpha.iter_mut().find(|(t, _)| same_boundary(*t, tau)) {
                    Some(slot) => slot.1 += 1,
                    None => alpha.push((tau, 1)),
                }
            }
            FloquetClass::Beta => {
                let tau = report.tau;
                match beta.iter_mut().find(|(t, _)| (*t - tau).abs() <= tol_tau) {
                    Some(slot) => slot.1 += 1,
                    None => beta.push((tau, 1)),
                }
            }
            FloquetClass::Degenerate => unreachable!("degenerate orbits rejected above"),
        }
    }
    for &(tb, _) in &beta {
        if let Some(&(ta, _)) = alpha.iter().find(|(ta, _)| (ta - tb).abs() <= tol_tau) {
            return Err(Error::TableStructure(format!(
                "type-beta frequency {tb} falls within tol_tau = {tol_tau} of type-alpha grid value {ta}"
            )));
        }
    }
    let mut entries: Vec<ChiEntry> = alpha
        .into_iter()
        .map(|(tau, n)| ChiEntry { tau, chi: n as i64, n_alpha: n, n_beta: 0 })
        .chain(beta.into_iter().map(|(tau, n)| ChiEntry { tau, chi: -(n as i64), n_alpha: 0, n_beta: n }))
        .collect();
    entries.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(ChiTable { rho: class.rho(), tol_tau, entries })
}

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d.saturating_mul(d) <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub morse_index: usize,
    pub predicted_type: FloquetClass,
    pub lower_bound: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub p: u32,
    pub primitive: OrbitClass,
    pub class: OrbitClass,
    pub bounds: Vec<Bound>,
}

/// `ceil(p k2 T0 tau_max) + 2`: every index that can carry a nonzero bound.
pub fn default_max_index(table: &ChiTable, p: u32, primitive: &OrbitClass) -> usize {
    (p as f64 * primitive.period() * table.tau_max()).ceil().max(0.0) as usize + 2
}

pub fn predict(table: &ChiTable, p: u32, primitive: &OrbitClass, max_index: usize) -> Result<PredictionReport> {
    if !is_prime(p) {
        return Err(Error::Validation(format!("p = {p} is not prime")));
    }
    if !primitive.is_primitive() {
        return Err(Error::Precondition(format!(
            "class ({}, {}) is not primitive",
            primitive.k1, primitive.k2
        )));
    }
    let scale = p as f64 * primitive.period();
    let modp = |v: i64| v.rem_euclid(p as i64) as u32;
    let bounds = (0..=max_index)
        .map(|j| {
            let n = (j / 2) as f64;
            if j % 2 == 0 {
                Bound {
                    morse_index: j,
                    predicted_type: FloquetClass::Alpha,
                    lower_bound: modp(table.nu(2.0 * n / scale)),
                }
            } else {
                Bound {
                    morse_index: j,
                    predicted_type: FloquetClass::Beta,
                    lower_bound: modp(-table.eta((2.0 * n + 2.0) / scale)),
                }
            }
        })
        .collect();
    Ok(PredictionReport { p, primitive: *primitive, class: primitive.multiple(p), bounds })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorsePolynomial {
    /// `a_j`: number of critical points of Morse index `j`.
    pub coefficients: Vec<u64>,
}

impl MorsePolynomial {
    pub fn from_counts(coefficients: Vec<u64>) -> Self {
        let mut c = coefficients;
        while c.last() == Some(&0) {
            c.pop();
        }
        Self { coefficients: c }
    }

    /// Counts every member of each shift family as a separate critical point.
    pub fn from_orbits(orbits: &[PeriodicOrbit]) -> Result<Self> {
        let mut c: Vec<u64> = Vec::new();
        for orbit in orbits {
            let j = orbit
                .morse_index()
                .ok_or_else(|| Error::Precondition("orbit has no index report".into()))?;
            if c.len() <= j {
                c.resize(j + 1, 0);
            }
            c[j] += orbit.family_size as u64;
        }
        Ok(Self::from_counts(c))
    }

    pub fn total(&self) -> u64 {
        self.coefficients.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorseRelationReport {
    pub polynomial: MorsePolynomial,
    /// Quotient by `1 + lambda` when the division is exact.
    pub quotient: Option<Vec<i64>>,
    pub divisible: bool,
    pub nonnegative: bool,
    pub has_minimum: bool,
    pub even_total: bool,
    pub passed: bool,
}

/// Divides `sum a_j lambda^j` by `1 + lambda`: `q_0 = a_0`, `q_j = a_j - q_{j-1}`.
pub fn morse_relation_check_polynomial(polynomial: MorsePolynomial) -> MorseRelationReport {
    let a = &polynomial.coefficients;
    let mut q: Vec<i64> = Vec::new();
    let mut prev = 0i64;
    let mut divisible = a.is_empty();
    for (j, &aj) in a.iter().enumerate() {
        let qj = aj as i64 - prev;
        if j + 1 == a.len() {
            divisible = qj == 0;
        } else {
            q.push(qj);
        }
        prev = qj;
    }
    let nonnegative = q.iter().all(|v| *v >= 0);
    let has_minimum = a.first().copied().unwrap_or(0) >= 1;
    let even_total = polynomial.total() % 2 == 0;
    let passed = divisible && nonnegative && has_minimum && even_total;
    MorseRelationReport {
        quotient: divisible.then_some(q),
        polynomial,
        divisible,
        nonnegative,
        has_minimum,
        even_total,
        passed,
    }
}

/// Morse relations with `P_lambda = 1 + lambda` for the orbits of one class.
pub fn morse_relation_check(orbits: &[PeriodicOrbit]) -> Result<MorseRelationReport> {
    if orbits.iter().any(|o| o.is_degenerate()) {
        return Err(Error::Precondition("Morse relations need non-degenerate orbits".into()));
    }
    if let Some(first) = orbits.first() {
        let c = first.class();
        if orbits.iter().any(|o| o.class().k1 != c.k1 || o.class().k2 != c.k2) {
            return Err(Error::Precondition("Morse relations need orbits of one class".into()));
        }
    }
    Ok(morse_relation_check_polynomial(MorsePolynomial::from_orbits(orbits)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Vacuous,
    Violated,
    InconclusiveDegenerate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Vacuous => "vacuous",
            Verdict::Violated => "violated",
            Verdict::InconclusiveDegenerate => "inconclusive_degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub morse_index: usize,
    pub predicted_type: FloquetClass,
    pub lower_bound: u32,
    pub found: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictTable {
    pub p: u32,
    pub class: OrbitClass,
    pub rows: Vec<VerdictRow>,
}

impl VerdictTable {
    pub fn any_violated(&self) -> bool {
        self.rows.iter().any(|r| r.verdict == Verdict::Violated)
    }

    /// CSV with header `j,type,bound,found,verdict`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,type,bound,found,verdict\n");
        for r in &self.rows {
            let ty = if r.predicted_type == FloquetClass::Alpha { "alpha" } else { "beta" };
            let _ = writeln!(out, "{},{},{},{},{}", r.morse_index, ty, r.lower_bound, r.found, r.verdict.as_str());
        }
        out
    }
}

/// Compares each bound with the number of solutions found at that index, counting every
/// member of a shift family. Degenerate or unindexed orbits make a shortfall inconclusive.
pub fn confront(predictions: &PredictionReport, found: &[PeriodicOrbit]) -> Result<VerdictTable> {
    let class = predictions.class;
    if let Some(o) = found.iter().find(|o| o.class().k1 != class.k1 || o.class().k2 != class.k2) {
        return Err(Error::Precondition(format!(
            "found orbit of class ({}, {}) but predictions are for ({}, {})",
            o.class().k1,
            o.class().k2,
            class.k1,
            class.k2
        )));
    }
    let unresolved = found.iter().any(|o| o.is_degenerate() || o.index.is_none());
    let rows = predictions
        .bounds
        .iter()
        .map(|b| {
            let count = found
                .iter()
                .filter(|o| !o.is_degenerate() && o.morse_index() == Some(b.morse_index))
                .map(|o| o.family_size)
                .sum::<usize>();
            let verdict = if b.lower_bound == 0 {
                Verdict::Vacuous
            } else if count >= b.lower_bound as usize {
                Verdict::Satisfied
            } else if unresolved {
                Verdict::InconclusiveDegenerate
            } else {
                Verdict::Violated
            };
            VerdictRow {
                morse_index: b.morse_index,
                predicted_type: b.predicted_type,
                lower_bound: b.lower_bound,
                found: count,
                verdict,
            }
        })
        .collect();
    Ok(VerdictTable { p: predictions.p, class, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn table(entries: &[(f64, i64)]) -> ChiTable {
        ChiTable {
            rho: 0.0,
            tol_tau: 1.0 / 6.0,
            entries: entries
                .iter()
                .map(|&(tau, chi)| ChiEntry {
                    tau,
                    chi,
                    n_alpha: chi.max(0) as usize,
                    n_beta: (-chi).max(0) as usize,
                })
                .collect(),
        }
    }

    fn pendulum() -> ChiTable {
        table(&[(0.0, 1), (1.0 / PI, -1)])
    }

    fn base() -> OrbitClass {
        OrbitClass::new(0, 1, 1.0).unwrap()
    }

    #[test]
    fn pendulum_partial_sums() {
        let t = pendulum();
        assert_eq!(t.nu(0.0), 1);
        assert_eq!(t.eta(0.0), 0);
        assert_eq!(t.nu(0.2), 1);
        assert_eq!(t.nu(1.0 / PI), 0);
        assert_eq!(t.eta(1.0 / PI), 1);
        assert_eq!(t.nu(10.0), 0);
        for tau in [-1.0, 0.0, 0.1, 1.0 / PI, 0.5, 3.0] {
            assert_eq!(t.nu(tau) - t.eta(tau), t.chi(tau));
        }
    }

    #[test]
    fn empty_table_is_zero() {
        let t = ChiTable::empty(0.0, 0.1);
        assert_eq!(t.nu(1.0), 0);
        assert_eq!(t.eta(1.0), 0);
        let report = predict(&t, 5, &base(), 4).unwrap();
        assert!(report.bounds.iter().all(|b| b.lower_bound == 0));
    }

    #[test]
    fn pendulum_predictions_for_p3() {
        let report = predict(&pendulum(), 3, &base(), 3).unwrap();
        assert_eq!(report.class.k2, 3);
        assert_eq!(report.bounds[0].lower_bound, 1);
        assert_eq!(report.bounds[0].predicted_type, FloquetClass::Alpha);
        assert_eq!(report.bounds[1].lower_bound, 0);
        assert_eq!(report.bounds[1].predicted_type, FloquetClass::Beta);
    }

    #[test]
    fn composite_p_is_rejected() {
        assert!(predict(&pendulum(), 4, &base(), 3).is_err());
        assert!(predict(&pendulum(), 1, &base(), 3).is_err());
        assert!([2, 3, 5, 7, 11, 9973].iter().all(|&p| is_prime(p)));
        assert!([0, 1, 4, 9, 15, 9999].iter().all(|&p| !is_prime(p)));
    }

    #[test]
    fn morse_relation_examples() {
        let ok = morse_relation_check_polynomial(MorsePolynomial::from_counts(vec![1, 1]));
        assert!(ok.passed);
        assert_eq!(ok.quotient, Some(vec![1]));
        let two = morse_relation_check_polynomial(MorsePolynomial::from_counts(vec![2, 2]));
        assert!(two.passed);
        assert_eq!(two.quotient, Some(vec![2]));
        assert_eq!(two.polynomial.total(), 4);
        let bad = morse_relation_check_polynomial(MorsePolynomial::from_counts(vec![1, 0]));
        assert!(!bad.passed);
        assert!(!bad.divisible);
        let negative = morse_relation_check_polynomial(MorsePolynomial::from_counts(vec![1, 0, 1, 2]));
        assert!(negative.divisible && !negative.nonnegative && !negative.passed);
    }

    #[test]
    fn verdict_csv_layout() {
        let v = VerdictTable {
            p: 3,
            class: OrbitClass::new(0, 3, 1.0).unwrap(),
            rows: vec![VerdictRow {
                morse_index: 0,
                predicted_type: FloquetClass::Alpha,
                lower_bound: 1,
                found: 1,
                verdict: Verdict::Satisfied,
            }],
        };
        assert_eq!(v.to_csv(), "j,type,bound,found,verdict\n0,alpha,1,1,satisfied\n");
    }

    #[test]
    fn zero_bounds_are_vacuous() {
        let report = predict(&ChiTable::empty(0.0, 0.1), 2, &base(), 2).unwrap();
        let table = confront(&report, &[]).unwrap();
        assert!(table.rows.iter().all(|r| r.verdict == Verdict::Vacuous));
        let pend = predict(&pendulum(), 2, &base(), 2).unwrap();
        let table = confront(&pend, &[]).unwrap();
        assert_eq!(table.rows[0].verdict, Verdict::Violated);
    }
}
