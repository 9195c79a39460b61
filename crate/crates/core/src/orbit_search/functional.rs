//! Discrete action functional on loops of a winding class.
//!
//! A loop in class `(k1, k2)` is `x(t) = rho t + y(t)` with `rho = k1 / (k2 T0)` and `y`
//! periodic with period `T = k2 T0`. On the grid `t_i = i h`, `h = T / N`, the action is
//!
//! ```text
//! f(y) = (1/T) sum_i h [ 1/2 ((x_{i+1} - x_i) / h)^2 - V(t_i, x_i) ]
//! ```
//!
//! i.e. the periodic trapezoidal rule with velocities differenced at the half nodes.
//! Gradient and Hessian below are exact derivatives of this finite sum.

use serde::{Deserialize, Serialize};

use crate::dynamics::STEPS_PER_PERIOD;
use crate::error::{Error, Result};
use crate::linalg::CyclicTridiagonal;
use crate::potential::PotentialSpec;
use num_complex::Complex64;

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Winding class: `k1` net windings in time `k2 T0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitClass {
    pub k1: i64,
    pub k2: u32,
    #[serde(rename = "T0")]
    pub t0: f64,
}

impl OrbitClass {
    pub fn new(k1: i64, k2: u32, t0: f64) -> Result<Self> {
        if k2 == 0 {
            return Err(Error::Validation("k2 must be at least 1".into()));
        }
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::Validation(format!("T0 must be positive, got {t0}")));
        }
        Ok(Self { k1, k2, t0 })
    }

    /// Full period `k2 T0`.
    pub fn period(&self) -> f64 {
        self.k2 as f64 * self.t0
    }

    /// Rotation frequency `k1 / (k2 T0)`.
    pub fn rho(&self) -> f64 {
        self.k1 as f64 / self.period()
    }

    pub fn gcd(&self) -> u64 {
        gcd(self.k1.unsigned_abs(), self.k2 as u64)
    }

    pub fn is_primitive(&self) -> bool {
        self.gcd() == 1
    }

    /// The coprime class with the same rotation frequency, and the multiple `p`.
    pub fn primitive(&self) -> (OrbitClass, u32) {
        let g = self.gcd();
        let prim = OrbitClass {
            k1: self.k1 / g as i64,
            k2: self.k2 / g as u32,
            t0: self.t0,
        };
        (prim, g as u32)
    }

    /// `(p k1, p k2)`.
    pub fn multiple(&self, p: u32) -> OrbitClass {
        OrbitClass { k1: self.k1 * p as i64, k2: self.k2 * p, t0: self.t0 }
    }

    /// Default grid: constant resolution per base period.
    pub fn default_grid(&self) -> usize {
        STEPS_PER_PERIOD * self.k2 as usize
    }
}

/// Periodic part `y` of a loop, sampled on `N` uniform nodes of `[0, k2 T0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLoop {
    pub class: OrbitClass,
    pub y: Vec<f64>,
}

impl DiscreteLoop {
    pub fn new(class: OrbitClass, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n < 16 || n % class.k2 as usize != 0 {
            return Err(Error::Validation(format!(
                "grid size {n} must be at least 16 and divisible by k2 = {}",
                class.k2
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("loop samples must be finite".into()));
        }
        Ok(Self { class, y })
    }

    /// Straight loop `x = rho t + offset`.
    pub fn straight(class: OrbitClass, n: usize, offset: f64) -> Result<Self> {
        Self::new(class, vec![offset; n])
    }

    /// Samples `x(t_i) = rho t_i + y_i`, reconstructed from an array of positions.
    pub fn from_positions(class: OrbitClass, xs: &[f64]) -> Result<Self> {
        let h = class.period() / xs.len() as f64;
        let rho = class.rho();
        Self::new(class, xs.iter().enumerate().map(|(i, x)| x - rho * i as f64 * h).collect())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.class.period() / self.len() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step()
    }

    /// `x(t_i)` for `i` in `0..=N`; index `N` is `x(0) + k1`.
    pub fn x(&self, i: usize) -> f64 {
        let n = self.len();
        let wraps = (i / n) as f64;
        let j = i % n;
        self.class.rho() * self.time(j) + self.y[j] + wraps * self.class.k1 as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Positions at all `N + 1` nodes including the closing one.
    pub fn closed_positions(&self) -> Vec<f64> {
        (0..=self.len()).map(|i| self.x(i)).collect()
    }

    /// Same loop with `y` shifted by a constant (spatial translation).
    pub fn translated(&self, dx: f64) -> Self {
        Self { class: self.class, y: self.y.iter().map(|v| v + dx).collect() }
    }

    /// Time-shifted loop `x(t + s h) - (winding correction)`, as a loop of the same class.
    pub fn time_shifted(&self, s: usize) -> Self {
        let n = self.len();
        let rho = self.class.rho();
        let h = self.step();
        let y = (0..n)
            .map(|i| {
                let x = self.x(i + s % n);
                x - rho * i as f64 * h
            })
            .collect();
        Self { class: self.class, y }
    }
}

/// Discrete action of a loop.
pub fn action(lp: &DiscreteLoop, spec: &PotentialSpec) -> f64 {
    let n = lp.len();
    let h = lp.step();
    let period = lp.class.period();
    let mut sum = 0.0;
    for i in 0..n {
        let (xi, xn) = (lp.x(i), lp.x(i + 1));
        let vel = (xn - xi) / h;
        sum += h * (0.5 * vel * vel - spec.value(lp.time(i), xi));
    }
    sum / period
}

/// Exact gradient of [`action`] with respect to the samples `y`.
pub fn action_gradient(lp: &DiscreteLoop, spec: &PotentialSpec) -> Vec<f64> {
    let n = lp.len();
    let h = lp.step();
    let period = lp.class.period();
    let y = &lp.y;
    (0..n)
        .map(|i| {
            let (prev, next) = (y[(i + n - 1) % n], y[(i + 1) % n]);
            let lap = (next - 2.0 * y[i] + prev) / h;
            let vx = spec.eval_jet(lp.time(i), lp.x(i)).vx;
            (-lap - h * vx) / period
        })
        .collect()
}

/// Exact Hessian of [`action`] in cyclic tridiagonal form.
pub fn action_hessian_cyclic(lp: &DiscreteLoop, spec: &PotentialSpec) -> CyclicTridiagonal {
    let n = lp.len();
    let h = lp.step();
    let period = lp.class.period();
    let diag = (0..n)
        .map(|i| (2.0 / h - h * spec.eval_jet(lp.time(i), lp.x(i)).vxx) / period)
        .collect();
    let off = Complex64::new(-1.0 / (h * period), 0.0);
    CyclicTridiagonal::new(diag, vec![off; n])
}

/// Exact Hessian of [`action`] as a dense symmetric matrix.
pub fn action_hessian(lp: &DiscreteLoop, spec: &PotentialSpec) -> nalgebra::DMatrix<f64> {
    action_hessian_cyclic(lp, spec).to_dense_real()
}
