//! Morse index, Bott index `j(T, sigma)` and twisting frequency.
//!
//! The Bott operator `-y'' - A(t) y` with `y(t + T) = sigma y(t)` is discretized by central
//! differences on a uniform grid, giving a Hermitian cyclic tridiagonal matrix whose
//! wrap-around entries carry the twist. Negative eigenvalues are counted either densely
//! or by an O(N) inertia count; both routes are exposed so they can check each other.

use std::f64::consts::PI;

use nalgebra::linalg::SymmetricTridiagonal;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{CoefficientPath, FloquetClass};
use crate::error::{Error, Result};
use crate::linalg::CyclicTridiagonal;
use crate::orbit_search::{action_hessian_cyclic, PeriodicOrbit};
use crate::potential::PotentialSpec;

/// Relative size of the zero band used to flag degenerate operators.
pub const TOL_ZERO: f64 = 1e-8;
/// Default number of quadrature angles on `[0, pi]`.
pub const DEFAULT_ANGLES: usize = 720;
/// Number of twist angles stored in an [`IndexReport`].
pub const REPORT_ANGLES: usize = 16;
/// Allowed gap between `tau T` and the Morse index of an even-index orbit.
pub const TAU_GRID_TOL: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct TwistedOperator {
    pub path: CoefficientPath,
    pub sigma: Complex64,
    pub n: usize,
}

impl TwistedOperator {
    pub fn new(path: CoefficientPath, sigma: Complex64, n: usize) -> Result<Self> {
        if (sigma.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("twist {sigma} is not on the unit circle")));
        }
        if n < 32 {
            return Err(Error::Validation(format!("twisted operator needs N >= 32, got {n}")));
        }
        if !(path.period > 0.0) || path.samples.iter().any(|a| !a.is_finite()) {
            return Err(Error::Validation("coefficient path must be finite with positive period".into()));
        }
        Ok(Self { path, sigma, n })
    }

    pub fn at_angle(path: CoefficientPath, theta: f64, n: usize) -> Result<Self> {
        Self::new(path, Complex64::from_polar(1.0, theta), n)
    }

    pub fn period(&self) -> f64 {
        self.path.period
    }

    /// Finite-difference matrix with `M[N-1][0] = -sigma / h^2`.
    pub fn matrix(&self) -> CyclicTridiagonal {
        twisted_matrix(&self.path.resampled(self.n), self.sigma)
    }
}

fn twisted_matrix(path: &CoefficientPath, sigma: Complex64) -> CyclicTridiagonal {
    let n = path.intervals();
    let h = path.step();
    let inv_h2 = 1.0 / (h * h);
    let diag = path.nodes().iter().map(|a| 2.0 * inv_h2 - a).collect();
    let mut upper = vec![Complex64::new(-inv_h2, 0.0); n];
    upper[n - 1] = -sigma * inv_h2;
    CyclicTridiagonal::new(diag, upper)
}

fn zero_band(m: &CyclicTridiagonal) -> f64 {
    TOL_ZERO * m.norm_bound()
}

/// Number of negative eigenvalues of a symmetric matrix, by dense decomposition, cross-checked
/// against a Sturm count on its Householder tridiagonal form.
pub fn morse_index(h: &DMatrix<f64>) -> Result<usize> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::Validation("Hessian must be a non-empty square matrix".into()));
    }
    let values = SymmetricEigen::new(h.clone()).eigenvalues;
    // Spectral norm, read off the computed spectrum.
    let norm = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = TOL_ZERO * norm;
    if let Some(&near) = values.iter().filter(|v| v.abs() <= tol).min_by(|a, b| a.abs().total_cmp(&b.abs())) {
        return Err(Error::Degenerate { eigenvalue: near, tolerance: tol });
    }
    let dense = values.iter().filter(|v| **v < 0.0).count();
    let sturm = sturm_count(h);
    if dense != sturm {
        return Err(Error::Consistency {
            what: "dense and Sturm negative-eigenvalue counts".into(),
            left: dense as f64,
            right: sturm as f64,
        });
    }
    Ok(dense)
}

/// Negative pivots of `T = Q^T H Q` after Householder tridiagonalization.
fn sturm_count(h: &DMatrix<f64>) -> usize {
    if h.nrows() == 1 {
        return usize::from(h[(0, 0)] < 0.0);
    }
    let (d, e) = SymmetricTridiagonal::new(h.clone()).unpack_tridiagonal();
    let tiny = f64::EPSILON * h.norm().max(f64::MIN_POSITIVE);
    let mut count = 0;
    let mut q = d[0];
    for i in 0..d.len() {
        if i > 0 {
            let prev = if q == 0.0 { tiny } else { q };
            q = d[i] - e[i - 1] * e[i - 1] / prev;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Morse index of a cyclic tridiagonal Hessian: dense count checked against inertia.
pub fn morse_index_cyclic(h: &CyclicTridiagonal) -> Result<usize> {
    let dense = morse_index(&h.to_dense_real())?;
    let inertia = h.count_below(0.0);
    if dense != inertia {
        return Err(Error::Consistency {
            what: "dense and inertia Morse index".into(),
            left: dense as f64,
            right: inertia as f64,
        });
    }
    Ok(dense)
}

/// `j(T, sigma)` by dense Hermitian eigendecomposition.
pub fn bott_index(op: &TwistedOperator) -> Result<usize> {
    let m = op.matrix();
    let tol = zero_band(&m);
    let values = m.dense_eigenvalues();
    if let Some(&near) = values.iter().filter(|v| v.abs() <= tol).min_by(|a, b| a.abs().total_cmp(&b.abs())) {
        return Err(Error::Degenerate { eigenvalue: near, tolerance: tol });
    }
    Ok(values.iter().filter(|v| **v < 0.0).count())
}

/// `j(T, sigma)` by O(N) inertia counts at `0` and `+-tol_zero`.
pub fn bott_index_inertia(op: &TwistedOperator) -> Result<usize> {
    inertia_count(&op.matrix())
}

fn inertia_count(m: &CyclicTridiagonal) -> Result<usize> {
    let tol = zero_band(m);
    let below = m.count_below(-tol);
    let above = m.count_below(tol);
    if below != above {
        return Err(Error::Degenerate { eigenvalue: 0.0, tolerance: tol });
    }
    Ok(below)
}

fn j_at(path: &CoefficientPath, theta: f64) -> Result<usize> {
    inertia_count(&twisted_matrix(path, Complex64::from_polar(1.0, theta)))
}

/// `j` at `theta`, nudged by `delta` (then `-delta`) if `theta` is a degenerate angle.
fn j_perturbed(path: &CoefficientPath, theta: f64, delta: f64) -> (f64, usize) {
    for t in [theta, theta + delta, theta - delta, theta + 0.5 * delta] {
        if let Ok(j) = j_at(path, t) {
            return (t, j);
        }
    }
    // Multipliers cluster around theta; count from just below the zero band.
    let m = twisted_matrix(path, Complex64::from_polar(1.0, theta));
    (theta, m.count_below(0.0))
}

/// Twisting frequency `tau = (1 / 2 pi T) int j(T, e^{i theta}) d theta`.
///
/// Midpoint samples on `[0, pi]` are doubled by conjugation symmetry; jumps between
/// neighbouring samples are located by bisection.
pub fn twisting_frequency(path: &CoefficientPath, m: usize, n: usize) -> Result<f64> {
    if m < 8 {
        return Err(Error::Validation(format!("twisting frequency needs M >= 8 angles, got {m}")));
    }
    if n < 32 {
        return Err(Error::Validation(format!("twisting frequency needs N >= 32, got {n}")));
    }
    let path = path.resampled(n);
    let dtheta = PI / m as f64;
    let samples: Vec<(f64, usize)> = (0..m)
        .map(|k| j_perturbed(&path, (k as f64 + 0.5) * dtheta, 0.5 * dtheta))
        .collect();

    let mut integral = samples[0].0 * samples[0].1 as f64;
    for pair in samples.windows(2) {
        let ((ta, ja), (tb, jb)) = (pair[0], pair[1]);
        if ja == jb {
            integral += (tb - ta) * ja as f64;
            continue;
        }
        let (mut lo, mut hi) = (ta, tb);
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            match j_at(&path, mid) {
                Ok(j) if j == ja => lo = mid,
                Ok(j) if j == jb => hi = mid,
                // A third value or a degenerate point: the jump is within [lo, hi].
                _ => break,
            }
        }
        let split = 0.5 * (lo + hi);
        integral += (split - ta) * ja as f64 + (tb - split) * jb as f64;
    }
    let (tl, jl) = samples[m - 1];
    integral += (PI - tl) * jl as f64;
    Ok(integral / (PI * path.period))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JSample {
    pub theta: f64,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub morse_index: usize,
    pub bott_at_one: usize,
    pub tau: f64,
    pub l: u32,
    #[serde(rename = "class")]
    pub floquet_class: FloquetClass,
    pub j_samples: Vec<JSample>,
}

/// `REPORT_ANGLES` angles symmetric about the real axis, none equal to `0` or `pi`.
pub fn report_angles() -> Vec<f64> {
    (0..REPORT_ANGLES)
        .map(|k| 2.0 * PI * (k as f64 + 0.5) / REPORT_ANGLES as f64)
        .collect()
}

/// Computes the index data of a non-degenerate orbit and checks the identities linking
/// the Morse index, Bott index, Floquet type and twisting frequency.
pub fn attach_indices(orbit: &PeriodicOrbit, spec: &PotentialSpec, angles: usize) -> Result<IndexReport> {
    if orbit.is_degenerate() {
        return Err(Error::Precondition("indices are undefined on a degenerate orbit".into()));
    }
    let morse = morse_index_cyclic(&action_hessian_cyclic(&orbit.discrete, spec))?;
    let path = orbit.coefficient_path(spec);
    let n = path.intervals();
    let bott_at_one = bott_index(&TwistedOperator::new(path.clone(), Complex64::new(1.0, 0.0), n)?)?;
    let tau = twisting_frequency(&path, angles, n)?;
    let period = path.period;
    let l = orbit.floquet.l;

    let mut j_samples = Vec::with_capacity(REPORT_ANGLES);
    let delta = 0.25 * PI / REPORT_ANGLES as f64;
    for theta in report_angles() {
        let (theta, j) = j_perturbed(&path, theta, delta);
        j_samples.push(JSample { theta, j });
    }

    if morse != bott_at_one {
        return Err(Error::Consistency {
            what: "Morse index vs j(T, 1)".into(),
            left: morse as f64,
            right: bott_at_one as f64,
        });
    }
    let parity_class = if morse % 2 == 0 { FloquetClass::Alpha } else { FloquetClass::Beta };
    if parity_class != orbit.floquet.floquet_class {
        return Err(Error::Consistency {
            what: format!("index parity vs Floquet type {:?}", orbit.floquet.floquet_class),
            left: morse as f64,
            right: f64::from(u8::from(orbit.floquet.floquet_class == FloquetClass::Beta)),
        });
    }
    for s in &j_samples {
        let gap = (period * tau - s.j as f64).abs();
        if gap > l as f64 + TAU_GRID_TOL {
            return Err(Error::Consistency {
                what: format!("mean-index bound at theta = {}", s.theta),
                left: period * tau,
                right: s.j as f64,
            });
        }
    }
    if morse % 2 == 0 && (period * tau - morse as f64).abs() > TAU_GRID_TOL {
        return Err(Error::Consistency {
            what: "tau T vs even Morse index".into(),
            left: period * tau,
            right: morse as f64,
        });
    }
    Ok(IndexReport { morse_index: morse, bott_at_one, tau, l, floquet_class: orbit.floquet.floquet_class, j_samples })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub witnesses: Vec<String>,
}

impl PropertyCheck {
    fn new(name: &str) -> Self {
        Self { name: name.into(), passed: true, checked: 0, witnesses: Vec::new() }
    }

    fn record(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.passed = false;
            self.witnesses.push(witness());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub k: usize,
    pub l: u32,
    pub tau: f64,
    pub checks: Vec<PropertyCheck>,
    /// Angles skipped because the operator is degenerate there.
    pub skipped_angles: Vec<f64>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn on_real_axis(theta: f64) -> bool {
    let r = theta.rem_euclid(PI);
    r < 1e-9 || PI - r < 1e-9
}

/// Checks the Bott-index identities on a path spanning one base period:
/// the `k`-fold sum rule, conjugation symmetry, the `l` bound on index differences and
/// the mean-index bound `|T tau - j| <= l`.
pub fn verify_index_properties(
    path: &CoefficientPath,
    k: usize,
    sample_angles: &[f64],
    angles: usize,
) -> Result<PropertyReport> {
    if ![2, 3, 5].contains(&k) {
        return Err(Error::Validation(format!("k must be 2, 3 or 5, got {k}")));
    }
    let n = path.intervals();
    if n < 32 {
        return Err(Error::Validation(format!("path needs at least 32 intervals, got {n}")));
    }
    let base = path.clone();
    let long = path.repeated(k);
    let l = crate::dynamics::monodromy(&base, n)?.l;
    let tau = twisting_frequency(&base, angles, n)?;
    let j = |p: &CoefficientPath, theta: f64| j_at(p, theta);

    let mut sum = PropertyCheck::new("sum");
    let mut conj = PropertyCheck::new("conjugation");
    let mut spread = PropertyCheck::new("difference_bound");
    let mut mean = PropertyCheck::new("mean_index_bound");
    let mut skipped = Vec::new();
    let mut off_axis: Vec<(f64, usize)> = Vec::new();

    for &theta in sample_angles {
        let long_j = j(&long, theta);
        let roots: Result<Vec<usize>> = (0..k)
            .map(|r| j(&base, (theta + 2.0 * PI * r as f64) / k as f64))
            .collect();
        let here = j(&base, theta);
        let there = j(&base, -theta);
        let (Ok(long_j), Ok(roots), Ok(here), Ok(there)) = (long_j, roots, here, there) else {
            skipped.push(theta);
            continue;
        };
        let total: usize = roots.iter().sum();
        sum.record(long_j == total, || format!("theta={theta}: j(kT)={long_j}, sum={total} {roots:?}"));
        conj.record(here == there, || format!("theta={theta}: j={here}, conjugate j={there}"));
        if !on_real_axis(theta) {
            off_axis.push((theta, here));
        }
    }
    for (i, &(ta, ja)) in off_axis.iter().enumerate() {
        for &(tb, jb) in &off_axis[i + 1..] {
            spread.record(ja.abs_diff(jb) as u32 <= l, || format!("theta={ta}: j={ja}; theta={tb}: j={jb}; l={l}"));
        }
        let gap = (base.period * tau - ja as f64).abs();
        mean.record(gap <= l as f64 + TAU_GRID_TOL, || {
            format!("theta={ta}: T tau={}, j={ja}, l={l}", base.period * tau)
        });
    }
    Ok(PropertyReport { k, l, tau, checks: vec![sum, conj, spread, mean], skipped_angles: skipped })
}
