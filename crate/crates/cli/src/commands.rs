//! The table each subcommand emits.

use std::f64::consts::PI;

use amphase::floquet::{self, BandInfo};
use amphase::milne::{self, AmplitudeState};
use amphase::oracle::{self, OracleGrid};
use amphase::peaks::{self, PeakRecord};
use amphase::potential::TAIL_CUTOFF;
use amphase::scattering::{self, Method, TransmissionResult};
use amphase::IntegrationSettings;
use anyhow::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "R")]
    pub r: f64,
    /// Filled inside bands only.
    #[serde(rename = "T_min")]
    pub t_min: Option<f64>,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    /// Band number, or `(j,j+1)` for a fused band.
    pub j: String,
    pub e_lo: f64,
    pub e_hi: f64,
    /// Empty where the band runs into the end of the range.
    pub lo_type: Option<String>,
    pub hi_type: Option<String>,
    pub fused: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRow {
    #[serde(rename = "E")]
    pub energy: f64,
    pub n: usize,
    pub j: u32,
    pub nu: i64,
    pub sign: Option<String>,
    pub in_band: bool,
    pub label: String,
    pub method: String,
    pub lambda_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionRow {
    pub q: u32,
    pub j_pair: String,
    #[serde(rename = "V_f")]
    pub v_f: f64,
    #[serde(rename = "E_f_plus_D")]
    pub e_f_plus_d: f64,
    pub u_p: f64,
    pub sine_residual: f64,
    pub slope_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub check: String,
    pub samples: usize,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl VerifyRow {
    fn new(check: &str, samples: usize, value: f64, tolerance: f64) -> Self {
        Self {
            check: check.to_string(),
            samples,
            value,
            tolerance,
            passed: value < tolerance,
        }
    }
}

fn transmission_row(result: &TransmissionResult, t_min: Option<f64>) -> ScanRow {
    ScanRow {
        energy: result.energy,
        t: result.t,
        r: result.r,
        t_min,
        method: result.method.name().to_string(),
    }
}

pub fn scan(config: &RunConfig) -> Result<Vec<ScanRow>> {
    let (model, s) = (&config.model, &config.settings);
    let forced = config.method.forced();
    config
        .energies()
        .par_iter()
        .map(|&e| {
            let point = scattering::scan_point(model, e, s)?;
            let result = match forced {
                Some(m) => scattering::transmission(model, e, m, s)?,
                None => point.result,
            };
            Ok(transmission_row(&result, point.t_min))
        })
        .collect()
}

/// Edge search step: the scan spacing, at most `1e-3`.
fn edge_step(config: &RunConfig) -> f64 {
    ((config.e_max - config.e_min) / (config.points - 1) as f64).min(1e-3)
}

fn band_list(config: &RunConfig) -> Result<Vec<BandInfo>> {
    Ok(floquet::find_band_edges(
        &config.model,
        config.e_min,
        config.e_max,
        edge_step(config),
        &config.settings,
    )?)
}

pub fn bands(config: &RunConfig) -> Result<Vec<BandRow>> {
    Ok(band_list(config)?
        .iter()
        .map(|b| BandRow {
            j: b.j.to_string(),
            e_lo: b.e_lo,
            e_hi: b.e_hi,
            lo_type: b.lo_type.map(|t| t.to_string()),
            hi_type: b.hi_type.map(|t| t.to_string()),
            fused: b.fused(),
        })
        .collect())
}

fn peak_row(p: &PeakRecord) -> PeakRow {
    PeakRow {
        energy: p.energy,
        n: p.n,
        j: p.j,
        nu: p.nu,
        sign: p.sign.map(|s| s.to_string()),
        in_band: p.in_band,
        label: p.label(),
        method: p.method.name().to_string(),
        lambda_abs: p.lambda_abs,
    }
}

/// Band peaks, plus general-route peaks when `general_points > 0`.
pub fn peaks(config: &RunConfig, general_points: usize) -> Result<Vec<PeakRow>> {
    let (model, s) = (&config.model, &config.settings);
    let found = if general_points > 0 {
        peaks::find_all_peaks_with_grid(model, config.e_min, config.e_max, general_points, s)?
    } else {
        let mut found = Vec::new();
        for band in band_list(config)?.iter().filter(|b| !b.truncated()) {
            found.extend(peaks::find_band_peaks(model, band, s)?);
        }
        found
    };
    Ok(found.iter().map(peak_row).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionSearch {
    pub j: Option<u32>,
    pub v0_min: f64,
    pub v0_max: f64,
    pub v0_step: f64,
}

/// Fusions of bands `(j, j+1)` for the configured `q` and `D`; both `j = 1`
/// and `j = 2` unless one is given.
pub fn fusion(config: &RunConfig, search: &FusionSearch) -> Result<Vec<FusionRow>> {
    let js = search.j.map_or(vec![1, 2], |j| vec![j]);
    let mut rows = Vec::new();
    for j in js {
        let found = floquet::scan_fusions(
            config.model.q,
            j,
            config.model.d,
            (search.v0_min, search.v0_max),
            search.v0_step,
            &config.settings,
        )?;
        rows.extend(found.iter().map(|f| FusionRow {
            q: f.q,
            j_pair: format!("({},{})", f.j_pair.0, f.j_pair.1),
            v_f: f.v_f,
            e_f_plus_d: f.e_f_plus_d,
            u_p: f.up_at_fusion,
            sine_residual: f.sine_residual,
            slope_residual: f.slope_residual,
            iterations: f.iterations,
        }));
    }
    Ok(rows)
}

/// Up to `count` energies spread over the interiors of the bands in range.
fn in_band_energies(bands: &[BandInfo], count: usize) -> Vec<f64> {
    if bands.is_empty() {
        return Vec::new();
    }
    let per_band = count.div_ceil(bands.len());
    bands
        .iter()
        .flat_map(|b| {
            let inset = 0.01 * (b.e_hi - b.e_lo);
            let (lo, hi) = (b.e_lo + inset, b.e_hi - inset);
            (0..per_band).map(move |i| lo + (hi - lo) * (i as f64 + 0.5) / per_band as f64)
        })
        .take(count)
        .collect()
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Cross-method, oracle and structural checks on the configured model.
pub fn verify(config: &RunConfig) -> Result<Vec<VerifyRow>> {
    let (model, s) = (&config.model, &config.settings);
    let n = model.n;
    let bands = band_list(config)?;
    let mut rows = Vec::new();

    let grid = config.energies();
    let cells: Vec<floquet::CellQuantities> = grid
        .par_iter()
        .map(|&e| floquet::cell_quantities(model, e, s))
        .collect::<amphase::Result<_>>()?;
    let det = max_of(cells.iter().map(|c| (floquet::monodromy(c).det() - 1.0).abs()));
    rows.push(VerifyRow::new("monodromy determinant", cells.len(), det, 1e-10));

    let inside = in_band_energies(&bands, 200);
    let powers: Vec<f64> = inside
        .par_iter()
        .map(|&e| -> amphase::Result<f64> {
            let cell = floquet::cell_quantities(model, e, s)?;
            let fq = floquet::intrinsic_quantities(&cell)?;
            let m = floquet::monodromy(&cell);
            Ok(max_of([1, n.max(1), 100].into_iter().map(|k| {
                floquet::monodromy_power(&fq, k).max_abs_diff(&floquet::monodromy_power_direct(&m, k))
            })))
        })
        .collect::<amphase::Result<_>>()?;
    rows.push(VerifyRow::new("intrinsic vs repeated monodromy power", powers.len(), max_of(powers), 1e-8));

    let routes: Vec<(f64, f64)> = inside
        .par_iter()
        .map(|&e| -> amphase::Result<(f64, f64)> {
            let full = scattering::lambda_full(model, e, s)?;
            let matrix = scattering::lambda_matrix(model, e, n, s)?;
            let ts = [
                TransmissionResult::from_lambda(e, full.lambda, Method::Full).t,
                TransmissionResult::from_lambda(e, matrix.lambda, Method::MatrixPower).t,
                scattering::transmission(model, e, Method::Direct, s)?.t,
                scattering::transmission(model, e, Method::Intrinsic, s)?.t,
            ];
            let spread = ts.iter().cloned().fold(f64::MIN, f64::max) - ts.iter().cloned().fold(f64::MAX, f64::min);
            Ok((spread, full.unimodularity_defect().max(matrix.unimodularity_defect())))
        })
        .collect::<amphase::Result<_>>()?;
    rows.push(VerifyRow::new("route spread in T", routes.len(), max_of(routes.iter().map(|r| r.0)), 1e-7));
    rows.push(VerifyRow::new("unimodularity |Delta|^2 - 1 - |Lambda|^2", routes.len(), max_of(routes.iter().map(|r| r.1)), 1e-9));

    let scanned = scan(&RunConfig { method: Default::default(), ..*config })?;
    let envelope = max_of(scanned.iter().filter_map(|r| r.t_min.map(|t_min| t_min - r.t)));
    let in_band = scanned.iter().filter(|r| r.t_min.is_some()).count();
    rows.push(VerifyRow::new("envelope T_min - T", in_band, envelope.max(0.0), 1e-9));

    let oracle_grid = OracleGrid::new(model, TAIL_CUTOFF, oracle::DEFAULT_STEPS_PER_CELL)?;
    let oracle: Vec<Option<f64>> = scanned
        .par_iter()
        .map(|r| -> amphase::Result<Option<f64>> {
            let o = oracle_grid.transmission(r.energy)?;
            Ok((!o.low_confidence()).then(|| (o.t - r.t).abs()))
        })
        .collect::<amphase::Result<_>>()?;
    let confident: Vec<f64> = oracle.into_iter().flatten().collect();
    rows.push(VerifyRow::new("oracle |T - T_oracle|", confident.len(), max_of(confident.iter().cloned()), 1e-6));

    let dense = IntegrationSettings {
        dense_output: true,
        sample_step: 1e-3,
        ..*s
    };
    let cell = model.with_cells(1);
    let probes: Vec<f64> = (0..6).map(|i| config.e_min + (config.e_max - config.e_min) * (i as f64 + 0.5) / 6.0).collect();
    let mut wronskian: f64 = 0.0;
    let mut residual: f64 = 0.0;
    for &e in &probes {
        let traj = milne::integrate(&cell, e, 0.0, PI, AmplitudeState::new(1.0, 0.0, 0.0), &dense)?
            .trajectory
            .unwrap_or_default();
        wronskian = wronskian.max(traj.wronskian_defect());
        residual = residual.max(milne::milne_residual(&cell, e, &traj));
    }
    rows.push(VerifyRow::new("Wronskian of (C, S)", probes.len(), wronskian, 1e-9));
    rows.push(VerifyRow::new("Milne residual", probes.len(), residual, 1e-5));
    Ok(rows)
}
