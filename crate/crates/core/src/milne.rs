//! Integration of the Milne-Pinney amplitude equation
//! `A'' + 2(E - V)A = A^-3` together with its phase `p' = A^-2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, StepControl};
use crate::potential::PotentialModel;

/// Amplitude, its slope and the accumulated phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeState {
    pub a: f64,
    pub a_prime: f64,
    pub phase: f64,
}

impl AmplitudeState {
    pub const fn new(a: f64, a_prime: f64, phase: f64) -> Self {
        Self { a, a_prime, phase }
    }

    /// Real solutions `C = A cos p` and `S = A sin p` with their slopes.
    pub fn principal_pair(&self) -> [f64; 4] {
        let (s, c) = self.phase.sin_cos();
        let inv = 1.0 / self.a;
        [
            self.a * c,
            self.a * s,
            self.a_prime * c - inv * s,
            self.a_prime * s + inv * c,
        ]
    }

    fn to_array(self) -> [f64; 3] {
        [self.a, self.a_prime, self.phase]
    }

    fn from_array(y: [f64; 3]) -> Self {
        Self::new(y[0], y[1], y[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Record the trajectory on a uniform grid of spacing `sample_step`.
    pub dense_output: bool,
    pub sample_step: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-11,
            max_step: PI / 8.0,
            dense_output: false,
            sample_step: 1e-3,
        }
    }
}

impl IntegrationSettings {
    pub fn dense(sample_step: f64) -> Self {
        Self {
            dense_output: true,
            sample_step,
            ..Self::default()
        }
    }

    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            rel_tol: tol,
            abs_tol: tol,
            ..Self::default()
        }
    }

    /// Same settings with both tolerances scaled by `factor`, floored at
    /// `1e-14`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: (self.rel_tol * factor).max(1e-14),
            abs_tol: (self.abs_tol * factor).max(1e-14),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tol_ok = |t: f64| t > 0.0 && t <= 1e-2;
        if !tol_ok(self.rel_tol) || !tol_ok(self.abs_tol) {
            return Err(Error::InvalidSettings(format!(
                "tolerances ({}, {}) must lie in (0, 1e-2]",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.max_step > 0.0 && self.max_step <= PI / 8.0 + 1e-15) {
            return Err(Error::InvalidSettings(format!(
                "max_step = {} must lie in (0, pi/8]",
                self.max_step
            )));
        }
        if self.dense_output && !(self.sample_step > 0.0) {
            return Err(Error::InvalidSettings(format!(
                "sample_step = {} must be positive",
                self.sample_step
            )));
        }
        Ok(())
    }

    fn step_control(&self) -> StepControl {
        // Global error runs a few times the local bound; the controller
        // works at a quarter of the requested tolerance.
        StepControl {
            rel_tol: 0.25 * self.rel_tol,
            abs_tol: 0.25 * self.abs_tol,
            max_step: self.max_step,
            sample_step: self.dense_output.then_some(self.sample_step),
        }
    }
}

/// Sampled amplitude trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub states: Vec<AmplitudeState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Wronskian `C S' - S C'` of the reconstructed principal solutions,
    /// with both slopes taken by fourth-order central differences of the
    /// sampled `C` and `S`. Returns the largest deviation from one.
    /// Stencils that straddle unevenly spaced samples are skipped.
    pub fn wronskian_defect(&self) -> f64 {
        let pairs: Vec<[f64; 4]> = self.states.iter().map(|s| s.principal_pair()).collect();
        let mut worst: f64 = 0.0;
        for i in 2..self.len().saturating_sub(2) {
            let h = self.x[i + 1] - self.x[i];
            if (i - 2..i + 2).any(|k| ((self.x[k + 1] - self.x[k]) - h).abs() > 1e-9 * h.abs()) {
                continue;
            }
            let d = |k: usize| {
                (pairs[i - 2][k] - 8.0 * pairs[i - 1][k] + 8.0 * pairs[i + 1][k] - pairs[i + 2][k])
                    / (12.0 * h)
            };
            let (c, s) = (pairs[i][0], pairs[i][1]);
            let w = c * d(1) - s * d(0);
            worst = worst.max((w - 1.0).abs());
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub end: AmplitudeState,
    pub trajectory: Option<Trajectory>,
}

/// Integrates the amplitude system from `x0` to `x1` at energy `energy`.
///
/// The phase is the raw integral of `A^-2` starting from `init.phase`.
pub fn integrate(
    model: &PotentialModel,
    energy: f64,
    x0: f64,
    x1: f64,
    init: AmplitudeState,
    settings: &IntegrationSettings,
) -> Result<Integration> {
    if !energy.is_finite() || !x0.is_finite() || !x1.is_finite() {
        return Err(Error::Domain(format!(
            "integration request E = {energy}, [{x0}, {x1}]"
        )));
    }
    if !(init.a > 0.0) {
        return Err(Error::SingularAmplitude { x: x0 });
    }
    settings.validate()?;

    let two_e = 2.0 * energy;
    let rhs = |x: f64, y: &[f64; 3]| {
        let inv = 1.0 / y[0];
        let inv2 = inv * inv;
        [
            y[1],
            inv2 * inv - (two_e - 2.0 * model.value(x)) * y[0],
            inv2,
        ]
    };

    let mut trajectory = settings.dense_output.then(Trajectory::default);
    let end = ode::integrate(
        rhs,
        x0,
        x1,
        init.to_array(),
        &settings.step_control(),
        |x, y| {
            if !(y[0] > 0.0) {
                return Err(Error::SingularAmplitude { x });
            }
            if let Some(t) = trajectory.as_mut() {
                t.x.push(x);
                t.states.push(AmplitudeState::from_array(*y));
            }
            Ok(())
        },
    )?;

    Ok(Integration {
        end: AmplitudeState::from_array(end),
        trajectory,
    })
}

/// Convenience wrapper returning only the end state.
pub fn integrate_to(
    model: &PotentialModel,
    energy: f64,
    x0: f64,
    x1: f64,
    init: AmplitudeState,
    settings: &IntegrationSettings,
) -> Result<AmplitudeState> {
    let plain = IntegrationSettings {
        dense_output: false,
        ..*settings
    };
    integrate(model, energy, x0, x1, init, &plain).map(|r| r.end)
}

/// Largest residual `|A'' + 2(E - V)A - A^-3|` over interior samples.
///
/// `A''` comes from fourth-order differences: the five-point central stencil
/// inside, six-point one-sided stencils next to the ends. Samples whose neighbours are not evenly spaced, such as those next
/// to a clipped final step, are skipped.
pub fn milne_residual(model: &PotentialModel, energy: f64, trajectory: &Trajectory) -> f64 {
    let x = &trajectory.x;
    let a: Vec<f64> = trajectory.states.iter().map(|s| s.a).collect();
    let even = |lo: usize, hi: usize| {
        let h = x[lo + 1] - x[lo];
        (lo..hi).all(|k| ((x[k + 1] - x[k]) - h).abs() <= 1e-9 * h.abs())
    };
    let mut worst: f64 = 0.0;
    for i in 1..x.len().saturating_sub(1) {
        let h = x[i + 1] - x[i];
        let one_sided = |f: [f64; 6]| {
            (10.0 * f[0] - 15.0 * f[1] - 4.0 * f[2] + 14.0 * f[3] - 6.0 * f[4] + f[5]) / (12.0 * h * h)
        };
        let second = if i >= 2 && i + 2 < x.len() && even(i - 2, i + 2) {
            (-a[i - 2] + 16.0 * a[i - 1] - 30.0 * a[i] + 16.0 * a[i + 1] - a[i + 2]) / (12.0 * h * h)
        } else if i + 4 < x.len() && even(i - 1, i + 4) {
            one_sided([a[i - 1], a[i], a[i + 1], a[i + 2], a[i + 3], a[i + 4]])
        } else if i >= 4 && i + 1 < x.len() && even(i - 4, i + 1) {
            one_sided([a[i + 1], a[i], a[i - 1], a[i - 2], a[i - 3], a[i - 4]])
        } else if even(i - 1, i + 1) {
            (a[i + 1] - 2.0 * a[i] + a[i - 1]) / (h * h)
        } else {
            continue;
        };
        let r = second + 2.0 * (energy - model.value(x[i])) * a[i] - a[i].powi(-3);
        worst = worst.max(r.abs());
    }
    worst
}
