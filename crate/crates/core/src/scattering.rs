//! Connection-matrix elements `Lambda` and `Delta` by every route, and the
//! transmission quantities built from them.
//!
//! All routes share the exterior amplitude values `v = A_L(0)` and
//! `v' = A_L'(0)`, obtained by integrating in from the left tail with the
//! asymptotic free amplitude `k^{-1/2}`. Symmetric tails give
//! `v_R = v`, `v_R' = -v'`. `T = 1 / (1 + |Lambda|^2)` throughout.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{self, FloquetQuantities, Monodromy};
use crate::milne::{self, AmplitudeState, IntegrationSettings};
use crate::potential::{PotentialModel, TAIL_CUTOFF};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Edge-condition magnitude below which intrinsic quantities are refused.
pub const INTRINSIC_EDGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExteriorQuantities {
    pub energy: f64,
    pub v: f64,
    pub v_prime: f64,
}

impl ExteriorQuantities {
    /// `J_X = v v'`.
    pub fn jx(&self) -> f64 {
        self.v * self.v_prime
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MidpointQuantities {
    pub energy: f64,
    pub w: f64,
    pub w_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub lambda: Complex64,
    pub delta: Complex64,
}

impl Connection {
    /// `|Delta|^2 - 1 - |Lambda|^2`, zero for exact connections.
    pub fn unimodularity_defect(&self) -> f64 {
        self.delta.norm_sqr() - 1.0 - self.lambda.norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Single sweep to the midpoint, `Lambda = -i w w'`.
    Full,
    /// Matching through `M^n`.
    MatrixPower,
    /// Integration of `A` across all `n` cells, `Lambda` from `U, U', eta`.
    Direct,
    /// Intrinsic quantities `alpha`, `u_p^2` and the factors `J_X`, `J_p`.
    Intrinsic,
    /// Same integration as `Direct`, symmetric closed form.
    General,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Full,
        Method::MatrixPower,
        Method::Direct,
        Method::Intrinsic,
        Method::General,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::MatrixPower => "matrix_power",
            Method::Direct => "direct",
            Method::Intrinsic => "intrinsic",
            Method::General => "general",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidSettings(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionResult {
    pub energy: f64,
    pub lambda: Complex64,
    pub t: f64,
    pub r: f64,
    pub method: Method,
}

impl TransmissionResult {
    pub fn from_lambda(energy: f64, lambda: Complex64, method: Method) -> Self {
        let l2 = lambda.norm_sqr();
        Self {
            energy,
            lambda,
            t: 1.0 / (1.0 + l2),
            r: l2 / (1.0 + l2),
            method,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JFactors {
    pub jx: f64,
    pub jp: f64,
}

fn wave_number(energy: f64) -> Result<f64> {
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::NonPositiveEnergy(energy));
    }
    Ok((2.0 * energy).sqrt())
}

fn asymptotic_state(energy: f64) -> Result<AmplitudeState> {
    Ok(AmplitudeState::new(wave_number(energy)?.powf(-0.5), 0.0, 0.0))
}

pub fn exterior_quantities(
    model: &PotentialModel,
    energy: f64,
    settings: &IntegrationSettings,
) -> Result<ExteriorQuantities> {
    exterior_quantities_with_cutoff(model, energy, TAIL_CUTOFF, settings)
}

/// Exterior values with the left tail truncated at `-x_cut`.
pub fn exterior_quantities_with_cutoff(
    model: &PotentialModel,
    energy: f64,
    x_cut: f64,
    settings: &IntegrationSettings,
) -> Result<ExteriorQuantities> {
    let init = asymptotic_state(energy)?;
    let end = milne::integrate_to(model, energy, -x_cut, 0.0, init, settings)?;
    Ok(ExteriorQuantities {
        energy,
        v: end.a,
        v_prime: end.a_prime,
    })
}

/// One sweep from the left tail to the potential's midpoint `n pi / 2`.
pub fn midpoint_quantities(
    model: &PotentialModel,
    energy: f64,
    settings: &IntegrationSettings,
) -> Result<MidpointQuantities> {
    let init = asymptotic_state(energy)?;
    let mid = 0.5 * model.core_length();
    let end = milne::integrate_to(model, energy, -TAIL_CUTOFF, mid, init, settings)?;
    Ok(MidpointQuantities {
        energy,
        w: end.a,
        w_prime: end.a_prime,
    })
}

/// First route: `Lambda = -i w w'`, `Delta = 1 + i w w'`.
pub fn lambda_full(
    model: &PotentialModel,
    energy: f64,
    settings: &IntegrationSettings,
) -> Result<Connection> {
    let mid = midpoint_quantities(model, energy, settings)?;
    let ww = mid.w * mid.w_prime;
    Ok(Connection {
        lambda: -I * ww,
        delta: 1.0 + I * ww,
    })
}

/// `Omega = Psi_R^{-1}(n pi) N Psi_L(0)` for a core matrix `N`, with the
/// exterior fundamental matrices built from `A e^{+-ip}`.
pub fn connect(ext: &ExteriorQuantities, core: &Monodromy) -> Connection {
    let (v, vp) = (ext.v, ext.v_prime);
    let iv = I / v;
    let psi_l = [[Complex64::from(v), Complex64::from(v)], [vp + iv, vp - iv]];
    let psi_r = [[Complex64::from(v), Complex64::from(v)], [-vp + iv, -vp - iv]];
    let n = [[core.m11, core.m12], [core.m21, core.m22]];

    let mut np = [[Complex64::default(); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            np[r][c] = n[r][0] * psi_l[0][c] + n[r][1] * psi_l[1][c];
        }
    }
    // det Psi_R = v(-v' - i/v) - v(-v' + i/v) = -2i.
    let det = psi_r[0][0] * psi_r[1][1] - psi_r[0][1] * psi_r[1][0];
    let inv = [
        [psi_r[1][1] / det, -psi_r[0][1] / det],
        [-psi_r[1][0] / det, psi_r[0][0] / det],
    ];
    let omega = |r: usize, c: usize| inv[r][0] * np[0][c] + inv[r][1] * np[1][c];
    Connection {
        lambda: omega(0, 1),
        delta: omega(1, 1),
    }
}

/// Second route through `M^n`. Inside bands `M^n` is the binary power of the
/// numerical monodromy; in gaps it comes from the complex-branch intrinsic
/// form.
pub fn lambda_matrix(
    model: &PotentialModel,
    energy: f64,
    n: usize,
    settings: &IntegrationSettings,
) -> Result<Connection> {
    if n == 0 {
        return Err(Error::Domain("matrix-power route needs n >= 1".into()));
    }
    let ext = exterior_quantities(model, energy, settings)?;
    let cell = floquet::cell_quantities(model, energy, settings)?;
    let m = floquet::monodromy(&cell);
    let power = if cell.in_band() {
        m.pow(n)
    } else {
        match floquet::intrinsic_quantities(&cell) {
            Ok(fq) => floquet::monodromy_power(&fq, n),
            Err(Error::EdgeSingularity { .. }) => m.pow(n),
            Err(e) => return Err(e),
        }
    };
    Ok(connect(&ext, &power))
}

/// `U = A(n pi)`, `U' = A'(n pi)`, `eta = p(n pi)` from `(1, 0, 0)` at 0.
fn core_sweep(
    model: &PotentialModel,
    energy: f64,
    n: usize,
    settings: &IntegrationSettings,
) -> Result<AmplitudeState> {
    if n == 0 {
        return Err(Error::Domain("direct route needs n >= 1".into()));
    }
    let core = model.with_cells(n);
    milne::integrate_to(
        &core,
        energy,
        0.0,
        core.core_length(),
        AmplitudeState::new(1.0, 0.0, 0.0),
        settings,
    )
}

/// Direct integration across the core,
/// `Lambda = -i (v v'/U + v^2 U'/2) cos eta
///           + i ((v^2/U - U (1 + (v v')^2)/v^2)/2 - v v' U') sin eta`.
pub fn lambda_direct(
    model: &PotentialModel,
    energy: f64,
    n: usize,
    settings: &IntegrationSettings,
) -> Result<Complex64> {
    let ext = exterior_quantities(model, energy, settings)?;
    let end = core_sweep(model, energy, n, settings)?;
    Ok(direct_formula(&ext, &end))
}

fn direct_formula(ext: &ExteriorQuantities, end: &AmplitudeState) -> Complex64 {
    let (v, jx) = (ext.v, ext.jx());
    let (u, up) = (end.a, end.a_prime);
    let (s, c) = end.phase.sin_cos();
    let cos_coef = jx / u + 0.5 * v * v * up;
    let sin_coef = 0.5 * (v * v / u - u * (1.0 + jx * jx) / (v * v)) - jx * up;
    I * (sin_coef * s - cos_coef * c)
}

/// The same integration with `N11 = U cos eta` used symmetrically,
/// `Lambda = -i v v' U cos eta
///           + (i/2) (v^2 (sin eta / U - U' cos eta) - (1 + (v v')^2) U sin eta / v^2)`.
pub fn lambda_general(
    model: &PotentialModel,
    energy: f64,
    n: usize,
    settings: &IntegrationSettings,
) -> Result<Complex64> {
    let ext = exterior_quantities(model, energy, settings)?;
    let end = core_sweep(model, energy, n, settings)?;
    Ok(general_formula(&ext, &end))
}

fn general_formula(ext: &ExteriorQuantities, end: &AmplitudeState) -> Complex64 {
    let (v, jx) = (ext.v, ext.jx());
    let (u, up) = (end.a, end.a_prime);
    let (s, c) = end.phase.sin_cos();
    let bracket = v * v * (s / u - up * c) - (1.0 + jx * jx) * u * s / (v * v);
    I * (0.5 * bracket - jx * u * c)
}

fn checked_intrinsic(
    model: &PotentialModel,
    energy: f64,
    settings: &IntegrationSettings,
) -> Result<FloquetQuantities> {
    let cell = floquet::cell_quantities(model, energy, settings)?;
    if cell.sine_condition().abs() < INTRINSIC_EDGE_EPS
        || cell.cosine_condition().abs() < INTRINSIC_EDGE_EPS
    {
        return Err(Error::EdgeSingularity { energy });
    }
    floquet::intrinsic_quantities(&cell)
}

/// `cos n alpha` and `sin n alpha`, with the real part of `n alpha` reduced
/// exactly in gaps.
fn n_phase(fq: &FloquetQuantities, n: usize) -> (Complex64, Complex64) {
    let phase = if fq.in_band {
        Complex64::new(n as f64 * fq.alpha.re, 0.0)
    } else {
        let r = (fq.alpha.re / PI).round() as i64;
        let odd = (r * n as i64).rem_euclid(2) == 1;
        Complex64::new(if odd { PI } else { 0.0 }, n as f64 * fq.alpha.im)
    };
    (phase.cos(), phase.sin())
}

/// Third route:
/// `Lambda_p = -i v v' cos n alpha + (i/2)(v^2/u_p^2 - u_p^2 (1 + (v v')^2)/v^2) sin n alpha`,
/// i.e. `i (J_p sin n alpha - J_X cos n alpha)` inside bands. `n = 0` is
/// allowed and gives `-i v v'`.
pub fn lambda_intrinsic(
    model: &PotentialModel,
    energy: f64,
    n: usize,
    settings: &IntegrationSettings,
) -> Result<Complex64> {
    let ext = exterior_quantities(model, energy, settings)?;
    let fq = checked_intrinsic(model, energy, settings)?;
    Ok(intrinsic_formula(&ext, &fq, n))
}

pub(crate) fn intrinsic_formula(
    ext: &ExteriorQuantities,
    fq: &FloquetQuantities,
    n: usize,
) -> Complex64 {
    let (v, jx) = (ext.v, ext.jx());
    let (cos_n, sin_n) = n_phase(fq, n);
    let jp = 0.5 * (v * v / fq.up_sq - fq.up_sq * (1.0 + jx * jx) / (v * v));
    I * (jp * sin_n - jx * cos_n)
}

pub(crate) fn jp_from(ext: &ExteriorQuantities, up_sq: f64) -> f64 {
    let (v, jx) = (ext.v, ext.jx());
    0.5 * (v * v / up_sq - up_sq * (1.0 + jx * jx) / (v * v))
}

/// `J_X` and `J_p`; defined only inside bands.
pub fn j_factors(
    model: &PotentialModel,
    energy: f64,
    settings: &IntegrationSettings,
) -> Result<JFactors> {
    let ext = exterior_quantities(model, energy, settings)?;
    let fq = checked_intrinsic(model, energy, settings)?;
    if !fq.in_band {
        return Err(Error::OutOfBand { energy });
    }
    Ok(JFactors {
        jx: ext.jx(),
        jp: jp_from(&ext, fq.up_sq.re),
    })
}

/// Minimal transmission inside a band, `1 / (1 + J_p^2 + J_X^2)`.
pub fn t_min(model: &PotentialModel, energy: f64, settings: &IntegrationSettings) -> Result<f64> {
    let j = j_factors(model, energy, settings)?;
    Ok(1.0 / (1.0 + j.jp * j.jp + j.jx * j.jx))
}

/// `T` and `R` through the chosen route. `n` is taken from the model.
pub fn transmission(
    model: &PotentialModel,
    energy: f64,
    method: Method,
    settings: &IntegrationSettings,
) -> Result<TransmissionResult> {
    let n = model.n;
    let lambda = match method {
        Method::Full => lambda_full(model, energy, settings)?.lambda,
        Method::MatrixPower => lambda_matrix(model, energy, n, settings)?.lambda,
        Method::Direct => lambda_direct(model, energy, n, settings)?,
        Method::Intrinsic => lambda_intrinsic(model, energy, n, settings)?,
        Method::General => lambda_general(model, energy, n, settings)?,
    };
    Ok(TransmissionResult::from_lambda(energy, lambda, method))
}

/// Everything a scan row needs from one cell and one exterior integration:
/// intrinsic `T` away from edges, matrix-power `T` at edges, and `T_min`
/// inside bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub result: TransmissionResult,
    pub t_min: Option<f64>,
}

pub fn scan_point(
    model: &PotentialModel,
    energy: f64,
    settings: &IntegrationSettings,
) -> Result<ScanPoint> {
    let ext = exterior_quantities(model, energy, settings)?;
    let cell = floquet::cell_quantities(model, energy, settings)?;
    let near_edge = cell.sine_condition().abs() < INTRINSIC_EDGE_EPS
        || cell.cosine_condition().abs() < INTRINSIC_EDGE_EPS;
    if model.n == 0 {
        let lambda = Complex64::new(0.0, -ext.jx());
        return Ok(ScanPoint {
            result: TransmissionResult::from_lambda(energy, lambda, Method::Intrinsic),
            t_min: None,
        });
    }
    if near_edge {
        let conn = connect(&ext, &floquet::monodromy(&cell).pow(model.n));
        return Ok(ScanPoint {
            result: TransmissionResult::from_lambda(energy, conn.lambda, Method::MatrixPower),
            t_min: None,
        });
    }
    let fq = floquet::intrinsic_quantities(&cell)?;
    let lambda = intrinsic_formula(&ext, &fq, model.n);
    let t_min = fq.in_band.then(|| {
        let jp = jp_from(&ext, fq.up_sq.re);
        let jx = ext.jx();
        1.0 / (1.0 + jp * jp + jx * jx)
    });
    Ok(ScanPoint {
        result: TransmissionResult::from_lambda(energy, lambda, Method::Intrinsic),
        t_min,
    })
}
