//! Reference transmission from the linear Schrödinger equation
//! `F'' + 2 (E - V) F = 0`, integrated with fixed-step classical RK4 and
//! matched to plane waves. Nothing here uses amplitudes or phases.
//!
//! The complex solution starts as the pure outgoing wave `e^{-ikx}` at the
//! left cutoff; its real and imaginary parts are the two real solutions of
//! the sweep. At the right cutoff `F = a e^{-ikx} + b e^{ikx}` and
//! `T = 1/|a|^2`, `R = |b|^2/|a|^2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{PotentialModel, TAIL_CUTOFF};

/// Growth beyond which the matching is flagged as low confidence.
pub const ILL_CONDITIONED: f64 = 1e12;

pub const DEFAULT_STEPS_PER_CELL: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub energy: f64,
    pub t: f64,
    pub r: f64,
    /// Growth factor of the solution across the sweep.
    pub condition_estimate: f64,
}

impl OracleResult {
    pub fn low_confidence(&self) -> bool {
        !(self.condition_estimate < ILL_CONDITIONED)
    }
}

/// Potential values cached at the RK4 nodes and half-nodes.
///
/// The grid is independent of energy, so one instance serves a whole scan.
#[derive(Debug, Clone)]
pub struct OracleGrid {
    x0: f64,
    h: f64,
    /// `v[2i]` at node `i`, `v[2i + 1]` at the midpoint after it.
    v: Vec<f64>,
    /// Node index of each cell boundary, where the solution is rescaled.
    boundaries: Vec<usize>,
}

impl OracleGrid {
    pub fn new(model: &PotentialModel, x_cut: f64, steps_per_cell: usize) -> Result<Self> {
        model.validate()?;
        if !(x_cut > 0.0) || steps_per_cell < 8 {
            return Err(Error::InvalidSettings(format!(
                "oracle grid with x_cut = {x_cut}, {steps_per_cell} steps per cell"
            )));
        }
        let h = PI / steps_per_cell as f64;
        let tail_steps = (x_cut / h).ceil() as usize;
        let core_steps = model.n * steps_per_cell;
        let total = 2 * tail_steps + core_steps;
        let x0 = -(tail_steps as f64) * h;
        let v = (0..=2 * total)
            .map(|i| model.value(x0 + 0.5 * h * i as f64))
            .collect();
        let mut boundaries = vec![tail_steps];
        boundaries.extend((1..=model.n).map(|c| tail_steps + c * steps_per_cell));
        boundaries.push(total);
        Ok(Self {
            x0,
            h,
            v,
            boundaries,
        })
    }

    fn steps(&self) -> usize {
        (self.v.len() - 1) / 2
    }

    fn x_end(&self) -> f64 {
        self.x0 + self.h * self.steps() as f64
    }

    pub fn transmission(&self, energy: f64) -> Result<OracleResult> {
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::NonPositiveEnergy(energy));
        }
        let k = (2.0 * energy).sqrt();
        let start = Complex64::from_polar(1.0, -k * self.x0);
        let (f, fp, log_scale) = self.sweep(energy, start, Complex64::new(0.0, -k) * start);

        let x1 = self.x_end();
        let ik = Complex64::new(0.0, 1.0) / k;
        let a = 0.5 * (f + ik * fp) * Complex64::from_polar(1.0, k * x1);
        let b = 0.5 * (f - ik * fp) * Complex64::from_polar(1.0, -k * x1);
        let a2 = a.norm_sqr();
        // |a_true|^2 = e^{2 log_scale} |a|^2.
        let t = (-2.0 * log_scale).exp() / a2;
        Ok(OracleResult {
            energy,
            t,
            r: b.norm_sqr() / a2,
            condition_estimate: (log_scale + 0.5 * a2.ln()).exp(),
        })
    }

    /// RK4 across the whole grid, rescaling at cell boundaries.
    fn sweep(&self, energy: f64, f0: Complex64, fp0: Complex64) -> (Complex64, Complex64, f64) {
        let h = self.h;
        let rhs = |vi: f64, f: Complex64| -2.0 * (energy - vi) * f;
        let (mut f, mut fp) = (f0, fp0);
        let mut log_scale = 0.0;
        let mut next = 0;
        for i in 0..self.steps() {
            let (va, vm, vb) = (self.v[2 * i], self.v[2 * i + 1], self.v[2 * i + 2]);
            let k1f = fp;
            let k1p = rhs(va, f);
            let k2f = fp + 0.5 * h * k1p;
            let k2p = rhs(vm, f + 0.5 * h * k1f);
            let k3f = fp + 0.5 * h * k2p;
            let k3p = rhs(vm, f + 0.5 * h * k2f);
            let k4f = fp + h * k3p;
            let k4p = rhs(vb, f + h * k3f);
            f += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
            fp += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            if next < self.boundaries.len() && i + 1 == self.boundaries[next] {
                next += 1;
                let scale = f.norm().max(fp.norm());
                if scale > 0.0 && scale.is_finite() {
                    f /= scale;
                    fp /= scale;
                    log_scale += scale.ln();
                }
            }
        }
        (f, fp, log_scale)
    }

    /// Modulus of the left asymptotic solution `k^{-1/2} e^{ikx}` and its
    /// slope at grid node `node`.
    fn amplitude_at_node(&self, energy: f64, node: usize) -> (f64, f64) {
        let k = (2.0 * energy).sqrt();
        let partial = Self {
            x0: self.x0,
            h: self.h,
            v: self.v[..=2 * node].to_vec(),
            boundaries: Vec::new(),
        };
        let psi0 = Complex64::from_polar(k.powf(-0.5), k * self.x0);
        let (psi, dpsi, _) = partial.sweep(energy, psi0, Complex64::new(0.0, k) * psi0);
        let a = psi.norm();
        (a, (psi.conj() * dpsi).re / a)
    }
}

pub fn oracle_transmission(model: &PotentialModel, energy: f64) -> Result<OracleResult> {
    oracle_transmission_with(model, energy, TAIL_CUTOFF, DEFAULT_STEPS_PER_CELL)
}

pub fn oracle_transmission_with(
    model: &PotentialModel,
    energy: f64,
    x_cut: f64,
    steps_per_cell: usize,
) -> Result<OracleResult> {
    OracleGrid::new(model, x_cut, steps_per_cell)?.transmission(energy)
}

/// `(v, v')` reconstructed as the modulus of the left asymptotic plane-wave
/// solution at `x = 0`.
pub fn oracle_exterior(model: &PotentialModel, energy: f64) -> Result<(f64, f64)> {
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::NonPositiveEnergy(energy));
    }
    let grid = OracleGrid::new(&model.with_cells(0), TAIL_CUTOFF, DEFAULT_STEPS_PER_CELL)?;
    let origin = grid.boundaries[0];
    Ok(grid.amplitude_at_node(energy, origin))
}

/// `(u, u', beta)` after one cell from the real principal solutions:
/// `A^2 = C^2 + S^2`, `A A' = C C' + S S'`, and `beta` the unwrapped angle
/// of `C + iS`.
pub fn oracle_cell(model: &PotentialModel, energy: f64) -> Result<(f64, f64, f64)> {
    let steps = DEFAULT_STEPS_PER_CELL;
    let h = PI / steps as f64;
    let cell = model.with_cells(1);
    let rhs = |x: f64, y: Complex64| -2.0 * (energy - cell.value(x)) * y;
    // psi = C + iS with C(0) = 1, C'(0) = 0, S(0) = 0, S'(0) = 1.
    let (mut f, mut fp) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    let mut beta = 0.0;
    let mut last_angle = 0.0;
    for i in 0..steps {
        let x = i as f64 * h;
        let k1f = fp;
        let k1p = rhs(x, f);
        let k2f = fp + 0.5 * h * k1p;
        let k2p = rhs(x + 0.5 * h, f + 0.5 * h * k1f);
        let k3f = fp + 0.5 * h * k2p;
        let k3p = rhs(x + 0.5 * h, f + 0.5 * h * k2f);
        let k4f = fp + h * k3p;
        let k4p = rhs(x + h, f + h * k3f);
        f += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        fp += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        let angle = f.arg();
        let mut d = angle - last_angle;
        if d < -PI {
            d += 2.0 * PI;
        } else if d > PI {
            d -= 2.0 * PI;
        }
        beta += d;
        last_angle = angle;
    }
    let u = f.norm();
    Ok((u, (f.conj() * fp).re / u, beta))
}
