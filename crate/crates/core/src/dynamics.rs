//! Equation of motion `x'' + V_x(t, x) = 0`, its linearization, and Floquet data.
//!
//! Everything is integrated with fixed-step classical RK4. The linearized system is
//! integrated in the convention `y' = v, v' = -A(t) y`; the alternative co-state
//! convention `v = -y'` gives a fundamental matrix conjugate by `diag(1, -1)`, so the
//! multipliers and the classification are the same.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

/// Default RK4 steps per base period `T0`.
pub const STEPS_PER_PERIOD: usize = 256;
/// Default distance of a multiplier from 1 below which an orbit counts as resonant.
pub const TOL_DEGENERATE: f64 = 1e-6;
/// Largest tolerated `|det W - 1|` before the monodromy is rejected.
pub const TOL_SYMPLECTIC: f64 = 1e-6;

/// Position on the covering line and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub v: f64,
}

impl State {
    pub fn new(x: f64, v: f64) -> Self {
        Self { x, v }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.v.is_finite()
    }
}

fn rk4_step(spec: &PotentialSpec, t: f64, s: State, h: f64) -> State {
    let acc = |t: f64, x: f64| -spec.eval_jet(t, x).vx;
    let (k1x, k1v) = (s.v, acc(t, s.x));
    let (k2x, k2v) = (s.v + 0.5 * h * k1v, acc(t + 0.5 * h, s.x + 0.5 * h * k1x));
    let (k3x, k3v) = (s.v + 0.5 * h * k2v, acc(t + 0.5 * h, s.x + 0.5 * h * k2x));
    let (k4x, k4v) = (s.v + h * k3v, acc(t + h, s.x + h * k3x));
    State {
        x: s.x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        v: s.v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    }
}

/// Integrates from `t0` to `t1` in `steps` RK4 steps. `samples` holds the state at every
/// node, starting with `s0`, so it has `steps + 1` entries.
pub fn flow(
    spec: &PotentialSpec,
    s0: State,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<(State, Vec<State>)> {
    if steps == 0 {
        return Err(Error::Precondition("flow needs at least one step".into()));
    }
    let h = (t1 - t0) / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut s = s0;
    samples.push(s);
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        s = rk4_step(spec, t, s, h);
        if !s.is_finite() {
            return Err(Error::NonFinite { t: t + h });
        }
        samples.push(s);
    }
    Ok((s, samples))
}

/// Flow together with the Jacobian of the RK4 map with respect to the initial state.
///
/// The variational equations are stepped with the same stages as the state, so the
/// returned matrix is the exact derivative of the discrete map.
pub fn flow_with_jacobian(
    spec: &PotentialSpec,
    s0: State,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<(State, Matrix2<f64>)> {
    if steps == 0 {
        return Err(Error::Precondition("flow needs at least one step".into()));
    }
    let h = (t1 - t0) / steps as f64;
    let mut s = s0;
    let mut w = Matrix2::identity();
    // Augmented field: (x, v, W) -> (v, -Vx, [W row 2; -Vxx * W row 1]).
    let field = |t: f64, s: State, w: &Matrix2<f64>| {
        let jet = spec.eval_jet(t, s.x);
        let dw = Matrix2::new(w[(1, 0)], w[(1, 1)], -jet.vxx * w[(0, 0)], -jet.vxx * w[(0, 1)]);
        (State::new(s.v, -jet.vx), dw)
    };
    let add = |s: State, k: State, c: f64| State::new(s.x + c * k.x, s.v + c * k.v);
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let (k1, d1) = field(t, s, &w);
        let (k2, d2) = field(t + 0.5 * h, add(s, k1, 0.5 * h), &(w + d1 * (0.5 * h)));
        let (k3, d3) = field(t + 0.5 * h, add(s, k2, 0.5 * h), &(w + d2 * (0.5 * h)));
        let (k4, d4) = field(t + h, add(s, k3, h), &(w + d3 * h));
        s = State::new(
            s.x + h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
            s.v + h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
        );
        w += (d1 + d2 * 2.0 + d3 * 2.0 + d4) * (h / 6.0);
        if !s.is_finite() || w.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite { t: t + h });
        }
    }
    Ok((s, w))
}

/// Uniform samples of `A(t)` over `[0, T]`; `samples.len() == N + 1` with the last node
/// identified with the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPath {
    pub period: f64,
    pub samples: Vec<f64>,
}

impl CoefficientPath {
    /// Path from the `N` distinct nodes; the closing node is appended.
    pub fn from_periodic(period: f64, nodes: Vec<f64>) -> Self {
        let mut samples = nodes;
        samples.push(samples[0]);
        Self { period, samples }
    }

    pub fn constant(a: f64, period: f64, n: usize) -> Self {
        Self { period, samples: vec![a; n + 1] }
    }

    /// Number of grid intervals.
    pub fn intervals(&self) -> usize {
        self.samples.len() - 1
    }

    /// The `N` distinct nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.samples[..self.intervals()]
    }

    pub fn step(&self) -> f64 {
        self.period / self.intervals() as f64
    }

    /// `|A(0) - A(T)|`.
    pub fn closure_gap(&self) -> f64 {
        (self.samples[0] - self.samples[self.intervals()]).abs()
    }

    /// Linear interpolation, periodic in `t`.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.intervals();
        let u = (t / self.period).rem_euclid(1.0) * n as f64;
        let i = (u.floor() as usize).min(n - 1);
        let frac = u - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    /// The same coefficient over `k` consecutive periods.
    pub fn repeated(&self, k: usize) -> Self {
        let nodes = self.nodes();
        let mut out = Vec::with_capacity(nodes.len() * k + 1);
        for _ in 0..k {
            out.extend_from_slice(nodes);
        }
        out.push(self.samples[self.intervals()]);
        Self { period: self.period * k as f64, samples: out }
    }

    /// Cyclic shift of the time origin by `shift` grid nodes.
    pub fn shifted(&self, shift: usize) -> Self {
        let nodes = self.nodes();
        let n = nodes.len();
        let rotated: Vec<f64> = (0..n).map(|i| nodes[(i + shift) % n]).collect();
        Self::from_periodic(self.period, rotated)
    }

    /// Linear resampling onto `n` intervals.
    pub fn resampled(&self, n: usize) -> Self {
        if n == self.intervals() {
            return self.clone();
        }
        let h = self.period / n as f64;
        Self::from_periodic(self.period, (0..n).map(|i| self.at(i as f64 * h)).collect())
    }
}

/// Floquet type of a 2x2 symplectic monodromy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FloquetClass {
    /// Real, positive, distinct multipliers.
    Alpha,
    /// Non-real or negative real multipliers.
    Beta,
    /// A multiplier at (or numerically at) 1.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyResult {
    /// Row-major fundamental matrix at the end of the period.
    pub w: [[f64; 2]; 2],
    pub multipliers: [Complex64; 2],
    pub floquet_class: FloquetClass,
    /// Half the number of non-real multipliers (0 or 1).
    pub l: u32,
}

impl MonodromyResult {
    pub fn det(&self) -> f64 {
        self.w[0][0] * self.w[1][1] - self.w[0][1] * self.w[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.w[0][0] + self.w[1][1]
    }
}

/// Eigenvalues of a 2x2 real matrix. Discriminants within `1e-14` (relative) of zero are
/// treated as a double real root.
pub fn multipliers_of(w: &Matrix2<f64>) -> [Complex64; 2] {
    let tr = w[(0, 0)] + w[(1, 1)];
    let det = w.determinant();
    let disc = tr * tr - 4.0 * det;
    let scale = (tr * tr).max(det.abs()).max(1.0);
    if disc.abs() <= 1e-14 * scale {
        let r = Complex64::new(0.5 * tr, 0.0);
        [r, r]
    } else if disc > 0.0 {
        // Stable form: larger root first, smaller by det / larger.
        let big = 0.5 * (tr + tr.signum() * disc.sqrt());
        let big = if tr == 0.0 { 0.5 * disc.sqrt() } else { big };
        [Complex64::new(big, 0.0), Complex64::new(det / big, 0.0)]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(0.5 * tr, im), Complex64::new(0.5 * tr, -im)]
    }
}

/// Floquet classification of a monodromy matrix.
pub fn classify_floquet(w: &Matrix2<f64>, tol_degenerate: f64) -> Result<(FloquetClass, u32)> {
    let det = w.determinant();
    if !det.is_finite() || (det - 1.0).abs() > TOL_SYMPLECTIC {
        return Err(Error::Symplecticity { det });
    }
    let mu = multipliers_of(w);
    let non_real = mu[0].im != 0.0;
    let l = u32::from(non_real);
    let one = Complex64::new(1.0, 0.0);
    let class = if mu.iter().any(|m| (m - one).norm() <= tol_degenerate) {
        FloquetClass::Degenerate
    } else if non_real || mu[0].re < 0.0 {
        FloquetClass::Beta
    } else {
        FloquetClass::Alpha
    };
    Ok((class, l))
}

/// Fundamental matrix of `y'' + A(t) y = 0` over one period of `path`, its multipliers and
/// classification. `A` is linearly interpolated between nodes.
pub fn monodromy(path: &CoefficientPath, steps: usize) -> Result<MonodromyResult> {
    monodromy_with_tolerance(path, steps, TOL_DEGENERATE)
}

pub fn monodromy_with_tolerance(
    path: &CoefficientPath,
    steps: usize,
    tol_degenerate: f64,
) -> Result<MonodromyResult> {
    if steps == 0 {
        return Err(Error::Precondition("monodromy needs at least one step".into()));
    }
    if path.samples.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite { t: 0.0 });
    }
    let h = path.period / steps as f64;
    let mut w = Matrix2::<f64>::identity();
    let field = |a: f64, w: &Matrix2<f64>| {
        Matrix2::new(w[(1, 0)], w[(1, 1)], -a * w[(0, 0)], -a * w[(0, 1)])
    };
    for i in 0..steps {
        let t = i as f64 * h;
        let (a0, am, a1) = (path.at(t), path.at(t + 0.5 * h), path.at(t + h));
        let k1 = field(a0, &w);
        let k2 = field(am, &(w + k1 * (0.5 * h)));
        let k3 = field(am, &(w + k2 * (0.5 * h)));
        let k4 = field(a1, &(w + k3 * h));
        w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if w.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite { t: t + h });
        }
    }
    let (floquet_class, l) = classify_floquet(&w, tol_degenerate)?;
    Ok(MonodromyResult {
        w: [[w[(0, 0)], w[(0, 1)]], [w[(1, 0)], w[(1, 1)]]],
        multipliers: multipliers_of(&w),
        floquet_class,
        l,
    })
}

/// `A(t_i) = V''(t_i, x(t_i))` along positions sampled at the `N + 1` uniform nodes of
/// `[0, period]` (endpoint included, so the closure gap reflects the trajectory).
pub fn linearize_samples(spec: &PotentialSpec, period: f64, xs: &[f64]) -> CoefficientPath {
    let n = xs.len() - 1;
    let h = period / n as f64;
    let samples = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| spec.eval_jet(i as f64 * h, x).vxx)
        .collect();
    CoefficientPath { period, samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PENDULUM_AMPLITUDE;
    use std::f64::consts::PI;

    #[test]
    fn free_motion_is_exact() {
        let spec = PotentialSpec::zero(1.0).unwrap();
        let (s1, samples) = flow(&spec, State::new(0.0, 1.0), 0.0, 1.0, 64).unwrap();
        assert!((s1.x - 1.0).abs() < 1e-14 && (s1.v - 1.0).abs() < 1e-15);
        assert_eq!(samples.len(), 65);
    }

    #[test]
    fn equilibrium_stays_fixed() {
        let spec = PotentialSpec::pendulum(1.0, PENDULUM_AMPLITUDE).unwrap();
        let (s1, _) = flow(&spec, State::new(0.0, 0.0), 0.0, 1.0, 256).unwrap();
        assert!(s1.x.abs() < 1e-15 && s1.v.abs() < 1e-15);
    }

    #[test]
    fn flow_rejects_zero_steps() {
        let spec = PotentialSpec::zero(1.0).unwrap();
        assert!(flow(&spec, State::new(0.0, 0.0), 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let spec = PotentialSpec::forced_pendulum(1.0, 0.5, PENDULUM_AMPLITUDE).unwrap();
        let s0 = State::new(0.1, 0.0);
        let run = |steps| flow(&spec, s0, 0.0, 1.0, steps).unwrap().0;
        let (a, b, c) = (run(256), run(512), run(1024));
        let ratio = (a.x - b.x).hypot(a.v - b.v) / (b.x - c.x).hypot(b.v - c.v);
        assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let spec = PotentialSpec::forced_pendulum(1.0, 0.5, PENDULUM_AMPLITUDE).unwrap();
        let s0 = State::new(0.3, 0.4);
        let (_, w) = flow_with_jacobian(&spec, s0, 0.0, 2.0, 300).unwrap();
        let h = 1e-6;
        for (col, ds) in [(0, State::new(h, 0.0)), (1, State::new(0.0, h))] {
            let plus = flow(&spec, State::new(s0.x + ds.x, s0.v + ds.v), 0.0, 2.0, 300).unwrap().0;
            let minus = flow(&spec, State::new(s0.x - ds.x, s0.v - ds.v), 0.0, 2.0, 300).unwrap().0;
            assert!(((plus.x - minus.x) / (2.0 * h) - w[(0, col)]).abs() < 1e-6);
            assert!(((plus.v - minus.v) / (2.0 * h) - w[(1, col)]).abs() < 1e-6);
        }
    }

    #[test]
    fn monodromy_of_free_particle() {
        let m = monodromy(&CoefficientPath::constant(0.0, 1.0, 64), 64).unwrap();
        assert_eq!(m.w, [[1.0, 1.0], [0.0, 1.0]]);
        assert_eq!(m.floquet_class, FloquetClass::Degenerate);
        assert!(m.multipliers.iter().all(|z| (z - 1.0).norm() < 1e-12));
    }

    #[test]
    fn monodromy_of_harmonic_oscillator_half_turn() {
        let m = monodromy(&CoefficientPath::constant(1.0, PI, 256), 256).unwrap();
        assert!((m.trace() + 2.0).abs() < 1e-8);
        assert_eq!(m.floquet_class, FloquetClass::Beta);
        assert!(m.multipliers.iter().all(|z| (z + 1.0).norm() < 1e-4));
    }

    #[test]
    fn monodromy_of_hyperbolic_equilibrium() {
        let m = monodromy(&CoefficientPath::constant(-1.0, 1.0, 256), 256).unwrap();
        let e = std::f64::consts::E;
        assert!((m.multipliers[0].re - e).abs() < 1e-9);
        assert!((m.multipliers[1].re - 1.0 / e).abs() < 1e-9);
        assert_eq!(m.floquet_class, FloquetClass::Alpha);
        assert_eq!(m.l, 0);
    }

    #[test]
    fn classify_examples() {
        let (c, l) = classify_floquet(&Matrix2::new(2.0, 0.0, 0.0, 0.5), 1e-6).unwrap();
        assert_eq!((c, l), (FloquetClass::Alpha, 0));
        let r = Matrix2::new(1f64.cos(), -1f64.sin(), 1f64.sin(), 1f64.cos());
        assert_eq!(classify_floquet(&r, 1e-6).unwrap(), (FloquetClass::Beta, 1));
        let d = 1.0 + 1e-9;
        let near = Matrix2::new(d, 1.0, 0.0, 1.0 / d);
        assert_eq!(classify_floquet(&near, 1e-6).unwrap().0, FloquetClass::Degenerate);
        let neg = Matrix2::new(-2.0, 0.0, 0.0, -0.5);
        assert_eq!(classify_floquet(&neg, 1e-6).unwrap(), (FloquetClass::Beta, 0));
    }

    #[test]
    fn classify_rejects_non_symplectic() {
        let err = classify_floquet(&Matrix2::new(2.0, 0.0, 0.0, 2.0), 1e-6).unwrap_err();
        assert!(matches!(err, Error::Symplecticity { .. }));
    }

    #[test]
    fn co_state_convention_is_conjugate() {
        // W' = D W D with D = diag(1, -1) has the same spectrum and class.
        let path = CoefficientPath::from_periodic(1.0, (0..128).map(|i| 3.0 + (i as f64 * 0.1).sin()).collect());
        let m = monodromy(&path, 128).unwrap();
        let w = Matrix2::new(m.w[0][0], m.w[0][1], m.w[1][0], m.w[1][1]);
        let d = Matrix2::new(1.0, 0.0, 0.0, -1.0);
        let conj = d * w * d;
        assert_eq!(classify_floquet(&conj, 1e-6).unwrap(), (m.floquet_class, m.l));
        let mu = multipliers_of(&conj);
        for (a, b) in mu.iter().zip(&m.multipliers) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_path_linearizations() {
        let c = PENDULUM_AMPLITUDE;
        let spec = PotentialSpec::pendulum(1.0, c).unwrap();
        let low = linearize_samples(&spec, 1.0, &vec![0.0; 33]);
        assert!(low.samples.iter().all(|a| (a + 4.0 * PI * PI * c).abs() < 1e-12));
        let high = linearize_samples(&spec, 1.0, &vec![0.5; 33]);
        assert!(high.samples.iter().all(|a| (a - 4.0 * PI * PI * c).abs() < 1e-12));
    }
}
