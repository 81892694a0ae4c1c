//! Total-transmission energies (`Lambda = 0`) and their quantum numbers.
//!
//! Inside a band the zeros of `Lambda_p = i (J_p sin n alpha - J_X cos n alpha)`
//! satisfy `n alpha - atan(J_X / J_p) = (j n + nu) pi`, which labels each
//! peak by `(n, j, nu)`. A sign `+-` (from `sgn(J_X / J_p)`) separates the
//! two peaks sharing one `nu` in bands where `J_p` changes sign.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{self, BandInfo};
use crate::milne::IntegrationSettings;
use crate::potential::PotentialModel;
use crate::roots;
use crate::scattering::{self, Method};

/// Largest `|Lambda|` accepted at a polished root.
pub const PEAK_LAMBDA_TOL: f64 = 1e-6;

/// Largest distance of the `nu` expression from an integer.
pub const NU_RESIDUAL_TOL: f64 = 1e-3;

/// Default number of points for the general-route scan.
pub const GENERAL_GRID_POINTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PeakSign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl fmt::Display for PeakSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PeakSign::Plus => "+",
            PeakSign::Minus => "-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumNumbers {
    pub j: u32,
    pub nu: i64,
    pub sign: Option<PeakSign>,
    /// Distance of `n (alpha/pi - j) - atan(J_X/J_p)/pi` from `nu`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub energy: f64,
    pub n: usize,
    pub j: u32,
    pub nu: i64,
    pub sign: Option<PeakSign>,
    pub in_band: bool,
    pub method: Method,
    /// `|Lambda|` at the recorded energy.
    pub lambda_abs: f64,
}

impl PeakRecord {
    /// Label in the form `(n,j,nu)` with an optional sign after `nu`.
    pub fn label(&self) -> String {
        let sign = self.sign.map_or(String::new(), |s| s.to_string());
        format!("({},{},{}{})", self.n, self.j, self.nu, sign)
    }
}

/// Quantum numbers at an in-band energy.
///
/// `affected` lists the `(j, nu)` pairs that occur twice because `J_p`
/// changes sign; only those receive a `+-` label.
pub fn quantum_numbers(
    model: &PotentialModel,
    energy: f64,
    affected: &[(u32, i64)],
    settings: &IntegrationSettings,
) -> Result<QuantumNumbers> {
    let cell = floquet::cell_quantities(model, energy, settings)?;
    let fq = floquet::intrinsic_quantities(&cell)?;
    if !fq.in_band {
        return Err(Error::OutOfBand { energy });
    }
    let jf = scattering::j_factors(model, energy, settings)?;
    let alpha = fq.alpha.re;
    let j = (alpha / PI).floor().max(0.0);
    let ratio = jf.jx / jf.jp;
    let raw = model.n as f64 * (alpha / PI - j) - ratio.atan() / PI;
    let nu = raw.round();
    let (j, nu_int) = (j as u32, nu as i64);
    let sign = affected.contains(&(j, nu_int)).then(|| {
        if ratio >= 0.0 {
            PeakSign::Plus
        } else {
            PeakSign::Minus
        }
    });
    Ok(QuantumNumbers {
        j,
        nu: nu_int,
        sign,
        residual: (raw - nu).abs(),
    })
}

/// Quantum numbers of a peak, locating its band first to find the `nu`
/// values that need a sign label.
pub fn assign_quantum_numbers(
    model: &PotentialModel,
    energy: f64,
    settings: &IntegrationSettings,
) -> Result<QuantumNumbers> {
    let band = band_containing(model, energy, settings)?;
    let affected = doubled_nus(model, &band, settings)?;
    quantum_numbers(model, energy, &affected, settings)
}

/// The band holding `energy`, found by widening a band scan around it.
pub fn band_containing(
    model: &PotentialModel,
    energy: f64,
    settings: &IntegrationSettings,
) -> Result<BandInfo> {
    const FLOOR: f64 = 1e-4;
    let mut width = 0.25;
    for _ in 0..8 {
        let lo = (energy - width).max(FLOOR);
        let hi = energy + width;
        let bands = floquet::find_band_edges(model, lo, hi, 1e-3, settings)?;
        match bands.into_iter().find(|b| b.e_lo <= energy && energy <= b.e_hi) {
            None => return Err(Error::OutOfBand { energy }),
            Some(b) if b.hi_type.is_some() && (b.lo_type.is_some() || lo == FLOOR) => {
                return Ok(b)
            }
            Some(_) => width *= 2.0,
        }
    }
    Err(Error::OutOfBand { energy })
}

/// Chebyshev points on the open interval; they crowd towards the edges
/// where `alpha` varies like the square root of the distance.
fn edge_clustered(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    (0..count)
        .map(|i| mid - half * (PI * (i as f64 + 0.5) / count as f64).cos())
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct BandSample {
    im_lambda: f64,
    jp: f64,
}

fn band_sample(model: &PotentialModel, energy: f64, settings: &IntegrationSettings) -> BandSample {
    let nan = BandSample {
        im_lambda: f64::NAN,
        jp: f64::NAN,
    };
    let Ok(ext) = scattering::exterior_quantities(model, energy, settings) else {
        return nan;
    };
    let Ok(cell) = floquet::cell_quantities(model, energy, settings) else {
        return nan;
    };
    match floquet::intrinsic_quantities(&cell) {
        Ok(fq) if fq.in_band => BandSample {
            im_lambda: scattering::intrinsic_formula(&ext, &fq, model.n).im,
            jp: scattering::jp_from(&ext, fq.up_sq.re),
        },
        _ => nan,
    }
}

fn band_samples(
    model: &PotentialModel,
    band: &BandInfo,
    count: usize,
    settings: &IntegrationSettings,
) -> (Vec<f64>, Vec<BandSample>) {
    let grid = edge_clustered(band.e_lo, band.e_hi, count);
    let samples = grid
        .par_iter()
        .map(|&e| band_sample(model, e, settings))
        .collect();
    (grid, samples)
}

/// Energies inside the band where `J_p` changes sign.
pub fn jp_sign_changes(
    model: &PotentialModel,
    band: &BandInfo,
    settings: &IntegrationSettings,
) -> Result<Vec<f64>> {
    let (grid, samples) = band_samples(model, band, 128, settings);
    jp_zeros(model, &grid, &samples, settings)
}

fn jp_zeros(
    model: &PotentialModel,
    grid: &[f64],
    samples: &[BandSample],
    settings: &IntegrationSettings,
) -> Result<Vec<f64>> {
    let jp: Vec<f64> = samples.iter().map(|s| s.jp).collect();
    roots::sign_changes(&jp)
        .map(|i| {
            roots::brent_known(
                |e| scattering::j_factors(model, e, settings).map(|j| j.jp),
                (grid[i], jp[i]),
                (grid[i + 1], jp[i + 1]),
                1e-12,
            )
        })
        .collect()
}

/// As `J_p` passes through zero, `atan(J_X / J_p)` jumps by `pi` and the
/// `nu` expression falls back by one, so the integer nearest to
/// `n (alpha/pi - j)` at the crossing occurs on both sides.
fn affected_nus(
    model: &PotentialModel,
    zeros: &[f64],
    settings: &IntegrationSettings,
) -> Result<Vec<(u32, i64)>> {
    zeros
        .iter()
        .map(|&e| {
            let fq = floquet::intrinsic_quantities(&floquet::cell_quantities(model, e, settings)?)?;
            let j = (fq.alpha.re / PI).floor().max(0.0);
            let x0 = model.n as f64 * (fq.alpha.re / PI - j);
            Ok((j as u32, x0.round() as i64))
        })
        .collect()
}

/// `(j, nu)` pairs shared by two peaks of the band.
pub fn doubled_nus(
    model: &PotentialModel,
    band: &BandInfo,
    settings: &IntegrationSettings,
) -> Result<Vec<(u32, i64)>> {
    let zeros = jp_sign_changes(model, band, settings)?;
    affected_nus(model, &zeros, settings)
}

/// Zeros of `Im Lambda_p` inside one band.
///
/// The band is sampled at `16 n + 64` edge-clustered points, sign changes
/// are polished with Brent's method, and roots with `|Lambda_p|` above
/// [`PEAK_LAMBDA_TOL`] are discarded.
pub fn find_band_peaks(
    model: &PotentialModel,
    band: &BandInfo,
    settings: &IntegrationSettings,
) -> Result<Vec<PeakRecord>> {
    if band.truncated() {
        return Err(Error::Domain(format!(
            "band {} is truncated by the scan range",
            band.j
        )));
    }
    let n = model.n;
    if n == 0 {
        return Ok(Vec::new());
    }
    let (grid, samples) = band_samples(model, band, 16 * n + 64, settings);
    let im: Vec<f64> = samples.iter().map(|s| s.im_lambda).collect();
    let affected = affected_nus(model, &jp_zeros(model, &grid, &samples, settings)?, settings)?;

    let brackets: Vec<usize> = roots::sign_changes(&im).collect();
    let found: Vec<Option<PeakRecord>> = brackets
        .par_iter()
        .map(|&i| -> Result<Option<PeakRecord>> {
            let f = |e: f64| scattering::lambda_intrinsic(model, e, n, settings).map(|l| l.im);
            let e = roots::brent_known(f, (grid[i], im[i]), (grid[i + 1], im[i + 1]), 1e-12)?;
            let lambda = scattering::lambda_intrinsic(model, e, n, settings)?;
            if lambda.norm() >= PEAK_LAMBDA_TOL {
                return Ok(None);
            }
            let qn = quantum_numbers(model, e, &affected, settings)?;
            Ok(Some(PeakRecord {
                energy: e,
                n,
                j: qn.j,
                nu: qn.nu,
                sign: qn.sign,
                in_band: true,
                method: Method::Intrinsic,
                lambda_abs: lambda.norm(),
            }))
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

/// All peaks in `(e_min, e_max)`: the general-route scan of `Im Lambda`
/// from direct integration merged with per-band searches.
///
/// General-route roots outside every band get `in_band = false` and are
/// labelled `(j, 0)` with `j = Int(Re alpha / pi)`.
pub fn find_all_peaks(
    model: &PotentialModel,
    e_min: f64,
    e_max: f64,
    settings: &IntegrationSettings,
) -> Result<Vec<PeakRecord>> {
    find_all_peaks_with_grid(model, e_min, e_max, GENERAL_GRID_POINTS, settings)
}

pub fn find_all_peaks_with_grid(
    model: &PotentialModel,
    e_min: f64,
    e_max: f64,
    points: usize,
    settings: &IntegrationSettings,
) -> Result<Vec<PeakRecord>> {
    let n = model.n;
    if n == 0 {
        return Err(Error::Domain("peak search needs n >= 1".into()));
    }
    if !(e_min > 0.0 && e_max > e_min && points >= 2) {
        return Err(Error::Domain(format!(
            "peak search over [{e_min}, {e_max}] with {points} points"
        )));
    }
    let bands = floquet::find_band_edges(model, e_min, e_max, 1e-3, settings)?;
    let mut peaks = Vec::new();
    let mut doubled = Vec::new();
    for band in &bands {
        doubled.push(doubled_nus(model, band, settings)?);
        if !band.truncated() {
            peaks.extend(find_band_peaks(model, band, settings)?);
        }
    }

    let grid: Vec<f64> = (0..points)
        .map(|i| e_min + (e_max - e_min) * i as f64 / (points - 1) as f64)
        .collect();
    let im: Vec<f64> = grid
        .par_iter()
        .map(|&e| scattering::lambda_direct(model, e, n, settings).map_or(f64::NAN, |l| l.im))
        .collect();
    let brackets: Vec<usize> = roots::sign_changes(&im).collect();
    let general: Vec<Option<(f64, f64)>> = brackets
        .par_iter()
        .map(|&i| -> Result<Option<(f64, f64)>> {
            let f = |e: f64| scattering::lambda_direct(model, e, n, settings).map(|l| l.im);
            let e = roots::brent_known(f, (grid[i], im[i]), (grid[i + 1], im[i + 1]), 1e-12)?;
            let lambda = scattering::lambda_direct(model, e, n, settings)?.norm();
            Ok((lambda < PEAK_LAMBDA_TOL).then_some((e, lambda)))
        })
        .collect::<Result<_>>()?;

    for (e, lambda_abs) in general.into_iter().flatten() {
        if peaks.iter().any(|p: &PeakRecord| (p.energy - e).abs() < 1e-7) {
            continue;
        }
        let band = bands.iter().position(|b| b.contains(e));
        let record = match band {
            Some(k) => {
                let qn = quantum_numbers(model, e, &doubled[k], settings)?;
                PeakRecord {
                    energy: e,
                    n,
                    j: qn.j,
                    nu: qn.nu,
                    sign: qn.sign,
                    in_band: true,
                    method: Method::Direct,
                    lambda_abs,
                }
            }
            None => {
                let cell = floquet::cell_quantities(model, e, settings)?;
                let j = floquet::intrinsic_quantities(&cell)
                    .map(|fq| fq.band_index().max(0) as u32)
                    .unwrap_or_else(|_| (cell.beta / PI).floor().max(0.0) as u32);
                PeakRecord {
                    energy: e,
                    n,
                    j,
                    nu: 0,
                    sign: None,
                    in_band: false,
                    method: Method::Direct,
                    lambda_abs,
                }
            }
        };
        peaks.push(record);
    }
    peaks.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(peaks)
}
