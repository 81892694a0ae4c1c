//! The embedded locally periodic potential.
//!
//! The potential has three pieces joined with continuous value and slope:
//!
//! ```text
//! V(x) = D [exp(4x) - 2 exp(2x)]                    x < 0
//! V(x) = V0 sin^q(x) - D                            0 <= x <= n pi
//! V(x) = D [exp(-4(x - n pi)) - 2 exp(-2(x - n pi))]  x > n pi
//! ```
//!
//! Both tails approach zero away from the core and equal `-D` at the joins.
//! The right tail is the exact mirror image of the left one.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length of one period cell.
pub const PERIOD: f64 = PI;

/// Distance from a join beyond which the tails are treated as zero.
pub const TAIL_CUTOFF: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialModel {
    /// Cell strength.
    pub v0: f64,
    /// Exterior extreme energy; `D > 0` embeds the cells in a well.
    pub d: f64,
    /// Number of period cells.
    pub n: usize,
    /// Even exponent of the cell shape `sin^q`.
    pub q: u32,
}

impl PotentialModel {
    pub fn new(v0: f64, d: f64, n: usize, q: u32) -> Result<Self> {
        let model = Self { v0, d, n, q };
        model.validate()?;
        Ok(model)
    }

    /// Multi-well cells in a repulsive surrounding, `(V0, D) = (-0.5, -0.22)`.
    pub fn repulsive_reference(n: usize) -> Self {
        Self { v0: -0.5, d: -0.22, n, q: 4 }
    }

    /// Multi-barrier cells in an attractive surrounding, `(V0, D) = (0.5, 0.15)`.
    pub fn attractive_reference(n: usize) -> Self {
        Self { v0: 0.5, d: 0.15, n, q: 4 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.v0.is_finite() || !self.d.is_finite() {
            return Err(Error::InvalidModel(format!(
                "v0 = {} and d = {} must be finite",
                self.v0, self.d
            )));
        }
        if self.q < 2 || self.q % 2 != 0 {
            return Err(Error::InvalidModel(format!(
                "cell exponent q = {} must be an even integer >= 2",
                self.q
            )));
        }
        Ok(())
    }

    /// Same model with a different number of cells.
    pub fn with_cells(&self, n: usize) -> Self {
        Self { n, ..*self }
    }

    /// Right end of the periodic core, `n pi`.
    pub fn core_length(&self) -> f64 {
        self.n as f64 * PERIOD
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("potential evaluated at x = {x}")));
        }
        Ok(self.value(x))
    }

    /// Unchecked evaluation used on integration hot paths.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let right = self.core_length();
        if x < 0.0 {
            self.tail(-x)
        } else if x > right {
            self.tail(x - right)
        } else {
            self.core(x)
        }
    }

    /// Analytic slope `dV/dx`.
    pub fn slope(&self, x: f64) -> f64 {
        let right = self.core_length();
        if x < 0.0 {
            -self.tail_slope(-x)
        } else if x > right {
            self.tail_slope(x - right)
        } else {
            self.core_slope(x)
        }
    }

    /// Tail value at distance `s >= 0` outside the core.
    #[inline]
    fn tail(&self, s: f64) -> f64 {
        let e2 = (-2.0 * s).exp();
        self.d * (e2 * e2 - 2.0 * e2)
    }

    /// Derivative of the tail with respect to the outward distance `s`.
    fn tail_slope(&self, s: f64) -> f64 {
        let e2 = (-2.0 * s).exp();
        self.d * (-4.0 * e2 * e2 + 4.0 * e2)
    }

    #[inline]
    fn core(&self, x: f64) -> f64 {
        self.v0 * x.sin().powi(self.q as i32) - self.d
    }

    fn core_slope(&self, x: f64) -> f64 {
        let q = self.q as i32;
        self.v0 * q as f64 * x.sin().powi(q - 1) * x.cos()
    }

    /// Measures the value and slope discontinuities at both joins.
    pub fn check_joins(&self) -> Result<JoinReport> {
        self.validate()?;
        let right = self.core_length();

        // Analytic: each piece evaluated at the join itself.
        let value_jump = (self.tail(0.0) - self.core(0.0))
            .abs()
            .max((self.core(right) - self.tail(0.0)).abs());
        let slope_jump = (-self.tail_slope(0.0) - self.core_slope(0.0))
            .abs()
            .max((self.core_slope(right) - self.tail_slope(0.0)).abs());

        // Finite differences: second-order one-sided stencils extrapolated to the join.
        let h = 1e-5;
        let mut fd_value_jump: f64 = 0.0;
        let mut fd_slope_jump: f64 = 0.0;
        for x in [0.0, right] {
            let (l1, l2) = (self.value(x - h), self.value(x - 2.0 * h));
            let (r1, r2) = (self.value(x + h), self.value(x + 2.0 * h));
            let left_value = 2.0 * l1 - l2;
            let right_value = 2.0 * r1 - r2;
            let left_slope = (3.0 * self.value(x) - 4.0 * l1 + l2) / (2.0 * h);
            let right_slope = (-3.0 * self.value(x) + 4.0 * r1 - r2) / (2.0 * h);
            fd_value_jump = fd_value_jump.max((left_value - right_value).abs());
            fd_slope_jump = fd_slope_jump.max((left_slope - right_slope).abs());
        }

        Ok(JoinReport {
            value_jump,
            slope_jump,
            fd_value_jump,
            fd_slope_jump,
        })
    }
}

/// Discontinuities found at the joins `x = 0` and `x = n pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JoinReport {
    pub value_jump: f64,
    pub slope_jump: f64,
    pub fd_value_jump: f64,
    pub fd_slope_jump: f64,
}

impl JoinReport {
    pub fn is_smooth(&self) -> bool {
        self.value_jump < 1e-10
            && self.slope_jump < 1e-10
            && self.fd_value_jump < 1e-6
            && self.fd_slope_jump < 1e-6
    }
}
