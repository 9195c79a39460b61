//! Doubly periodic potentials `V(t, x)` given as finite Fourier series.
//!
//! A potential is `T0`-periodic in time and 1-periodic in space:
//!
//! ```text
//! V(t, x) = sum_k a_k cos(2 pi (m_k t / T0 + n_k x)) + b_k sin(2 pi (m_k t / T0 + n_k x))
//! ```
//!
//! Because every term is a trigonometric monomial, derivatives in `x` are exact.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One Fourier mode of the potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    /// Temporal harmonic.
    pub m: i64,
    /// Spatial winding.
    pub n: i64,
    /// Cosine coefficient.
    #[serde(default)]
    pub a: f64,
    /// Sine coefficient.
    #[serde(default)]
    pub b: f64,
}

/// Value and first two spatial derivatives of `V` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub vx: f64,
    pub vxx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialDocument {
    #[serde(rename = "T0")]
    t0: f64,
    #[serde(default)]
    terms: Vec<FourierTerm>,
}

/// A validated Fourier potential. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    t0: f64,
    terms: Vec<FourierTerm>,
}

/// Default amplitude of the forced pendulum family, chosen so that the
/// linearization around the equilibria has unit-size coefficients.
pub const PENDULUM_AMPLITUDE: f64 = 1.0 / (4.0 * PI * PI);

impl PotentialSpec {
    /// Builds a spec, canonicalizing aliased modes and merging duplicates.
    ///
    /// `(m, n)` and `(-m, -n)` describe the same frequency; they are folded onto the
    /// representative with `n > 0` (or `n == 0, m >= 0`) with the sine coefficient negated.
    pub fn new(t0: f64, terms: Vec<FourierTerm>) -> Result<Self> {
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::Validation(format!("T0 must be positive, got {t0}")));
        }
        let mut merged: BTreeMap<(i64, i64), (f64, f64)> = BTreeMap::new();
        for term in terms {
            if !(term.a.is_finite() && term.b.is_finite()) {
                return Err(Error::Validation(format!(
                    "non-finite coefficient in term (m={}, n={})",
                    term.m, term.n
                )));
            }
            let flip = term.n < 0 || (term.n == 0 && term.m < 0);
            let (key, a, b) = if flip {
                ((-term.m, -term.n), term.a, -term.b)
            } else {
                ((term.m, term.n), term.a, term.b)
            };
            let entry = merged.entry(key).or_insert((0.0, 0.0));
            entry.0 += a;
            entry.1 += b;
        }
        let terms = merged
            .into_iter()
            .map(|((m, n), (a, b))| FourierTerm { m, n, a, b })
            .collect();
        Ok(Self { t0, terms })
    }

    /// The zero potential with period `t0`.
    pub fn zero(t0: f64) -> Result<Self> {
        Self::new(t0, Vec::new())
    }

    /// The autonomous pendulum `V = c cos(2 pi x)`.
    pub fn pendulum(t0: f64, c: f64) -> Result<Self> {
        Self::new(t0, vec![FourierTerm { m: 0, n: 1, a: c, b: 0.0 }])
    }

    /// The forced pendulum `V = c (1 + eps cos(2 pi t / T0)) cos(2 pi x)`, as three modes.
    pub fn forced_pendulum(t0: f64, eps: f64, c: f64) -> Result<Self> {
        let half = 0.5 * eps * c;
        Self::new(
            t0,
            vec![
                FourierTerm { m: 0, n: 1, a: c, b: 0.0 },
                FourierTerm { m: 1, n: 1, a: half, b: 0.0 },
                FourierTerm { m: -1, n: 1, a: half, b: 0.0 },
            ],
        )
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn terms(&self) -> &[FourierTerm] {
        &self.terms
    }

    /// `V`, `dV/dx`, `d2V/dx2` at `(t, x)`.
    pub fn eval_jet(&self, t: f64, x: f64) -> Jet {
        let mut jet = Jet { v: 0.0, vx: 0.0, vxx: 0.0 };
        // Reduce to one period first so large arguments do not lose phase accuracy.
        let tau = (t / self.t0).rem_euclid(1.0);
        let xi = x.rem_euclid(1.0);
        for term in &self.terms {
            let phase = 2.0 * PI * (term.m as f64 * tau + term.n as f64 * xi);
            let (s, c) = phase.sin_cos();
            let k = 2.0 * PI * term.n as f64;
            let value = term.a * c + term.b * s;
            jet.v += value;
            jet.vx += k * (term.b * c - term.a * s);
            jet.vxx -= k * k * value;
        }
        jet
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.eval_jet(t, x).v
    }

    /// Upper bound on `|V|` from the coefficient magnitudes.
    pub fn amplitude_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.a.hypot(t.b)).sum()
    }

    /// Parses the JSON document `{"T0": .., "terms": [{m, n, a, b}, ..]}`.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: PotentialDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::new(doc.t0, doc.terms)
    }

    pub fn to_json(&self) -> String {
        let doc = PotentialDocument { t0: self.t0, terms: self.terms.clone() };
        serde_json::to_string_pretty(&doc).expect("potential serializes")
    }

    /// Accepts either a JSON document or a built-in family name such as
    /// `forced_pendulum(0.5)`, `forced_pendulum(0.5, 0.02)`, `pendulum` or `zero`.
    pub fn from_descriptor(descriptor: &str) -> Option<Result<Self>> {
        let d = descriptor.trim();
        let (name, args) = match d.find('(') {
            Some(open) if d.ends_with(')') => (&d[..open], &d[open + 1..d.len() - 1]),
            None => (d, ""),
            _ => return None,
        };
        let args: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            match args.split(',').map(|a| a.trim().parse::<f64>()).collect() {
                Ok(v) => v,
                Err(_) => return Some(Err(Error::Validation(format!("bad arguments in '{d}'")))),
            }
        };
        let built = match (name.trim(), args.as_slice()) {
            ("zero", []) => Self::zero(1.0),
            ("pendulum", []) => Self::pendulum(1.0, PENDULUM_AMPLITUDE),
            ("pendulum", [c]) => Self::pendulum(1.0, *c),
            ("forced_pendulum", [eps]) => Self::forced_pendulum(1.0, *eps, PENDULUM_AMPLITUDE),
            ("forced_pendulum", [eps, c]) => Self::forced_pendulum(1.0, *eps, *c),
            ("zero" | "pendulum" | "forced_pendulum", _) => {
                Err(Error::Validation(format!("wrong number of arguments in '{d}'")))
            }
            _ => return None,
        };
        Some(built)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_potential_is_zero() {
        let spec = PotentialSpec::zero(1.0).unwrap();
        let jet = spec.eval_jet(0.37, 0.81);
        assert_eq!(jet, Jet { v: 0.0, vx: 0.0, vxx: 0.0 });
    }

    #[test]
    fn single_term_calculus() {
        let spec = PotentialSpec::pendulum(1.0, 1.0).unwrap();
        let jet = spec.eval_jet(0.0, 0.25);
        assert!(jet.v.abs() < 1e-15);
        assert_relative_eq!(jet.vx, -2.0 * PI, max_relative = 1e-14);
        assert!(jet.vxx.abs() < 1e-13);
    }

    #[test]
    fn forced_pendulum_derivative_matches_finite_difference() {
        let spec = PotentialSpec::forced_pendulum(1.0, 0.5, PENDULUM_AMPLITUDE).unwrap();
        let (t, x, h) = (0.3, 0.7, 1e-5);
        let fd = (spec.value(t, x + h) - spec.value(t, x - h)) / (2.0 * h);
        let jet = spec.eval_jet(t, x);
        assert!(((jet.vx - fd) / jet.vx).abs() <= 1e-8);
    }

    #[test]
    fn parse_single_term() {
        let spec = PotentialSpec::parse(r#"{"T0": 1, "terms": [{"m": 0, "n": 1, "a": 1, "b": 0}]}"#)
            .unwrap();
        assert_eq!(spec.terms().len(), 1);
        assert_eq!(spec.t0(), 1.0);
    }

    #[test]
    fn parse_rejects_nonpositive_period() {
        let err = PotentialSpec::parse(r#"{"T0": 0, "terms": []}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn parse_merges_duplicates() {
        let spec = PotentialSpec::parse(
            r#"{"T0": 1, "terms": [{"m": 0, "n": 1, "a": 1}, {"m": 0, "n": 1, "a": 1}]}"#,
        )
        .unwrap();
        assert_eq!(spec.terms(), &[FourierTerm { m: 0, n: 1, a: 2.0, b: 0.0 }]);
    }

    #[test]
    fn parse_folds_aliased_modes() {
        let spec = PotentialSpec::parse(
            r#"{"T0": 2, "terms": [{"m": 1, "n": -1, "a": 1, "b": 0.5}, {"m": -1, "n": 1, "a": 1}]}"#,
        )
        .unwrap();
        assert_eq!(spec.terms(), &[FourierTerm { m: -1, n: 1, a: 2.0, b: -0.5 }]);
    }

    #[test]
    fn parse_reports_line_context_and_unknown_fields() {
        let err = PotentialSpec::parse("{\n  \"T0\": 1,\n  \"terms\": [ {\"m\": 0, \"n\": 1, \"a\": } ]\n}")
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = PotentialSpec::parse(r#"{"T0": 1, "terms": [], "extra": 3}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn descriptor_builds_families() {
        let fp = PotentialSpec::from_descriptor("forced_pendulum(0.5)").unwrap().unwrap();
        assert_eq!(fp, PotentialSpec::forced_pendulum(1.0, 0.5, PENDULUM_AMPLITUDE).unwrap());
        assert!(PotentialSpec::from_descriptor("/tmp/potential.json").is_none());
        assert!(PotentialSpec::from_descriptor("forced_pendulum()").unwrap().is_err());
    }

    #[test]
    fn json_round_trip() {
        let fp = PotentialSpec::forced_pendulum(1.5, 0.25, 0.1).unwrap();
        assert_eq!(PotentialSpec::parse(&fp.to_json()).unwrap(), fp);
    }
}
