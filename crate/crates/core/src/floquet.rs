//! One-cell quantities, intrinsic Floquet/Bloch quantities, monodromy
//! matrices, band edges and band fusion.
//!
//! A single cell is integrated from `(A, A', p) = (1, 0, 0)` at `x = 0` to
//! `x = pi`, giving `u = A(pi)`, `u' = A'(pi)` and `beta = p(pi)`. The
//! monodromy matrix built from these is
//!
//! ```text
//! M = | u cos b               u sin b             |
//!     | u' cos b - sin b / u  u' sin b + cos b / u |
//! ```
//!
//! and, written with the periodic amplitude value `u_p` and the intrinsic
//! phase `alpha`,
//!
//! ```text
//! M = | cos a            u_p^2 sin a |
//!     | -sin a / u_p^2   cos a       |
//! ```
//!
//! Band edges are the zeros of `sin b` (S-edges, `u_p -> 0`) and of
//! `sin b - u' u cos b` (C-edges, `u_p -> infinity`).

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milne::{self, AmplitudeState, IntegrationSettings};
use crate::potential::PotentialModel;
use crate::roots;

/// Below this magnitude an edge condition counts as exactly satisfied.
pub const EDGE_EPS: f64 = 1e-14;

/// S- and C-roots closer than this are one fused interior point.
pub const FUSION_MERGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellQuantities {
    pub energy: f64,
    pub u: f64,
    pub u_prime: f64,
    pub beta: f64,
}

impl CellQuantities {
    /// `sin beta`; zero at S-edges.
    pub fn sine_condition(&self) -> f64 {
        self.beta.sin()
    }

    /// `sin beta - u' u cos beta`; zero at C-edges.
    pub fn cosine_condition(&self) -> f64 {
        let (s, c) = self.beta.sin_cos();
        s - self.u_prime * self.u * c
    }

    /// `u cos beta`, which equals `cos alpha`.
    pub fn half_trace(&self) -> f64 {
        self.u * self.beta.cos()
    }

    pub fn in_band(&self) -> bool {
        self.half_trace().abs() <= 1.0
    }
}

/// Cell values are raised to the `n`-th power, and near band edges that
/// amplifies their error by orders of magnitude.
pub const CELL_TOLERANCE_FACTOR: f64 = 0.01;

/// Integrates one period cell at `energy`, at [`CELL_TOLERANCE_FACTOR`]
/// times the requested tolerance.
pub fn cell_quantities(
    model: &PotentialModel,
    energy: f64,
    settings: &IntegrationSettings,
) -> Result<CellQuantities> {
    let cell = model.with_cells(1);
    let settings = &settings.tightened(CELL_TOLERANCE_FACTOR);
    let end = milne::integrate_to(
        &cell,
        energy,
        0.0,
        PI,
        AmplitudeState::new(1.0, 0.0, 0.0),
        settings,
    )?;
    Ok(CellQuantities {
        energy,
        u: end.a,
        u_prime: end.a_prime,
        beta: end.phase,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloquetQuantities {
    pub energy: f64,
    pub alpha: Complex64,
    pub up_sq: Complex64,
    pub in_band: bool,
}

impl FloquetQuantities {
    /// Band quantum number `Int(alpha / pi)` (real part in gaps).
    pub fn band_index(&self) -> i64 {
        (self.alpha.re / PI).floor() as i64
    }

    /// Periodic amplitude value `u_p`, defined inside bands only.
    pub fn up(&self) -> Option<f64> {
        self.in_band.then(|| self.up_sq.re.sqrt())
    }
}

/// Intrinsic phase and periodic amplitude from one-cell quantities.
///
/// Inside bands `alpha` is real with the same `pi`-branch as `beta`'s
/// floor and `u_p^2 > 0`. In gaps `u_p^2 = i |u_p^2|`, `Re alpha` is the
/// integer multiple of `pi` fixed by the sign of `u cos beta`, and the sign
/// of `Im alpha` is the one for which `u_p^2 sin alpha = u sin beta`.
pub fn intrinsic_quantities(cell: &CellQuantities) -> Result<FloquetQuantities> {
    let (s, c) = cell.beta.sin_cos();
    let den = s - cell.u_prime * cell.u * c;
    if s.abs() < EDGE_EPS || den.abs() < EDGE_EPS {
        return Err(Error::EdgeSingularity {
            energy: cell.energy,
        });
    }
    let ratio = cell.u * cell.u * s / den;
    let half = cell.u * c;
    let m = (cell.beta / PI).floor();
    let parity = if (m as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };

    if half.abs() <= 1.0 && ratio > 0.0 {
        let alpha = m * PI + (parity * half).acos();
        return Ok(FloquetQuantities {
            energy: cell.energy,
            alpha: Complex64::new(alpha, 0.0),
            up_sq: Complex64::new(ratio.sqrt(), 0.0),
            in_band: true,
        });
    }

    // Gap zone. Rounding right at an edge can leave one of the two tests
    // on the band side; the imaginary parts are then tiny.
    let growth = half.abs().max(1.0).acosh();
    let r = if parity * half > 0.0 { m } else { m + 1.0 };
    let r_parity = if (r as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let sigma = -s.signum() * r_parity;
    Ok(FloquetQuantities {
        energy: cell.energy,
        alpha: Complex64::new(r * PI, sigma * growth),
        up_sq: Complex64::new(0.0, ratio.abs().sqrt()),
        in_band: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monodromy {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl Monodromy {
    pub const IDENTITY: Self = Self {
        m11: 1.0,
        m12: 0.0,
        m21: 0.0,
        m22: 1.0,
    };

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            m11: self.m11 * rhs.m11 + self.m12 * rhs.m21,
            m12: self.m11 * rhs.m12 + self.m12 * rhs.m22,
            m21: self.m21 * rhs.m11 + self.m22 * rhs.m21,
            m22: self.m21 * rhs.m12 + self.m22 * rhs.m22,
        }
    }

    /// `M^n` by binary exponentiation.
    pub fn pow(&self, mut n: usize) -> Self {
        let mut base = *self;
        let mut acc = Self::IDENTITY;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            n >>= 1;
        }
        acc
    }

    pub fn elements(&self) -> [f64; 4] {
        [self.m11, self.m12, self.m21, self.m22]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.elements()
            .iter()
            .zip(other.elements())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Principal fundamental matrix after one cell.
pub fn monodromy(cell: &CellQuantities) -> Monodromy {
    let (s, c) = cell.beta.sin_cos();
    let inv = 1.0 / cell.u;
    Monodromy {
        m11: cell.u * c,
        m12: cell.u * s,
        m21: cell.u_prime * c - inv * s,
        m22: cell.u_prime * s + inv * c,
    }
}

/// `M^n` by repeated multiplication.
pub fn monodromy_power_direct(m: &Monodromy, n: usize) -> Monodromy {
    (0..n).fold(Monodromy::IDENTITY, |acc, _| acc.mul(m))
}

/// `M^n` from the intrinsic form with `cos n alpha` and `u_p^2 sin n alpha`.
///
/// In gaps the complex quantities are combined with the real part of
/// `n alpha` reduced modulo `2 pi` exactly; the imaginary residue of every
/// element is checked and dropped.
pub fn monodromy_power(fq: &FloquetQuantities, n: usize) -> Monodromy {
    let phase = if fq.in_band {
        Complex64::new(n as f64 * fq.alpha.re, 0.0)
    } else {
        let r = (fq.alpha.re / PI).round() as i64;
        let odd = (r * n as i64).rem_euclid(2) == 1;
        Complex64::new(if odd { PI } else { 0.0 }, n as f64 * fq.alpha.im)
    };
    let (cos_n, sin_n) = (phase.cos(), phase.sin());
    let elems = [
        cos_n,
        fq.up_sq * sin_n,
        -sin_n / fq.up_sq,
        cos_n,
    ];
    for e in &elems {
        debug_assert!(
            e.im.abs() <= 1e-9 * e.re.abs().max(1.0),
            "imaginary residue {e} in intrinsic M^n"
        );
    }
    Monodromy {
        m11: elems[0].re,
        m12: elems[1].re,
        m21: elems[2].re,
        m22: elems[3].re,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    /// `sin beta = 0`, `u_p -> 0`.
    S,
    /// `sin beta - u' u cos beta = 0`, `u_p -> infinity`.
    C,
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeType::S => "S",
            EdgeType::C => "C",
        })
    }
}

/// Band quantum number; fused bands carry two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandIndex {
    Single(u32),
    Fused(u32, u32),
}

impl BandIndex {
    pub fn lowest(&self) -> u32 {
        match *self {
            BandIndex::Single(j) | BandIndex::Fused(j, _) => j,
        }
    }

    pub fn contains(&self, j: u32) -> bool {
        match *self {
            BandIndex::Single(k) => k == j,
            BandIndex::Fused(a, b) => (a..=b).contains(&j),
        }
    }
}

impl fmt::Display for BandIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandIndex::Single(j) => write!(f, "{j}"),
            BandIndex::Fused(a, b) => write!(f, "({a},{b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandInfo {
    pub j: BandIndex,
    pub e_lo: f64,
    pub e_hi: f64,
    /// `None` where the band runs into the end of the scanned range.
    pub lo_type: Option<EdgeType>,
    pub hi_type: Option<EdgeType>,
    /// Coincident S/C roots inside the band.
    pub fused_points: Vec<f64>,
}

impl BandInfo {
    pub fn truncated(&self) -> bool {
        self.lo_type.is_none() || self.hi_type.is_none()
    }

    pub fn fused(&self) -> bool {
        !self.fused_points.is_empty()
    }

    pub fn contains(&self, energy: f64) -> bool {
        energy > self.e_lo && energy < self.e_hi
    }

    /// Edge-type label such as `(CS)`; `?` marks a truncated side.
    pub fn band_type(&self) -> String {
        let show = |t: Option<EdgeType>| t.map_or("?".to_string(), |t| t.to_string());
        format!("({}{})", show(self.lo_type), show(self.hi_type))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EdgeRoot {
    energy: f64,
    kind: EdgeType,
}

/// Locates band edges in `[e_min, e_max]` and assembles bands.
///
/// Both edge conditions are sampled every `grid_step`, sign changes are
/// polished with Brent's method, and S/C roots that coincide within
/// [`FUSION_MERGE`] become fused interior points.
pub fn find_band_edges(
    model: &PotentialModel,
    e_min: f64,
    e_max: f64,
    grid_step: f64,
    settings: &IntegrationSettings,
) -> Result<Vec<BandInfo>> {
    if !(e_min > 0.0 && e_max > e_min && grid_step > 0.0) {
        return Err(Error::Domain(format!(
            "band scan over [{e_min}, {e_max}] with step {grid_step}"
        )));
    }
    let points = ((e_max - e_min) / grid_step).ceil() as usize + 1;
    let energies: Vec<f64> = (0..points)
        .map(|i| e_min + (e_max - e_min) * i as f64 / (points - 1) as f64)
        .collect();
    let cells: Vec<CellQuantities> = energies
        .par_iter()
        .map(|&e| cell_quantities(model, e, settings))
        .collect::<Result<_>>()?;

    let mut roots_found = Vec::new();
    for kind in [EdgeType::S, EdgeType::C] {
        let cond = |c: &CellQuantities| match kind {
            EdgeType::S => c.sine_condition(),
            EdgeType::C => c.cosine_condition(),
        };
        let values: Vec<f64> = cells.iter().map(cond).collect();
        for i in roots::sign_changes(&values) {
            let energy = roots::brent_known(
                |e| cell_quantities(model, e, settings).map(|c| cond(&c)),
                (energies[i], values[i]),
                (energies[i + 1], values[i + 1]),
                1e-10,
            )?;
            roots_found.push(EdgeRoot { energy, kind });
        }
    }
    roots_found.sort_by(|a, b| a.energy.total_cmp(&b.energy));

    // Coincident S and C roots are not edges.
    let mut edges: Vec<EdgeRoot> = Vec::new();
    let mut fused_points = Vec::new();
    let mut i = 0;
    while i < roots_found.len() {
        if i + 1 < roots_found.len()
            && roots_found[i].kind != roots_found[i + 1].kind
            && roots_found[i + 1].energy - roots_found[i].energy < FUSION_MERGE
        {
            fused_points.push(0.5 * (roots_found[i].energy + roots_found[i + 1].energy));
            i += 2;
        } else {
            edges.push(roots_found[i]);
            i += 1;
        }
    }

    // Segments between consecutive edges, classified at their midpoints.
    let mut bounds: Vec<(f64, Option<EdgeType>)> = vec![(e_min, None)];
    bounds.extend(edges.iter().map(|e| (e.energy, Some(e.kind))));
    bounds.push((e_max, None));
    let mut bands: Vec<BandInfo> = Vec::new();
    let mut open: Option<BandInfo> = None;
    for w in bounds.windows(2) {
        let ((lo, lo_kind), (hi, hi_kind)) = (w[0], w[1]);
        if hi - lo <= 0.0 {
            continue;
        }
        let mid = cell_quantities(model, 0.5 * (lo + hi), settings)?;
        if mid.in_band() {
            match open.as_mut() {
                // Band on both sides of a single root: treat it as fused.
                Some(band) => {
                    band.fused_points.push(lo);
                    band.e_hi = hi;
                    band.hi_type = hi_kind;
                }
                None => {
                    open = Some(BandInfo {
                        j: BandIndex::Single(0),
                        e_lo: lo,
                        e_hi: hi,
                        lo_type: lo_kind,
                        hi_type: hi_kind,
                        fused_points: Vec::new(),
                    });
                }
            }
        } else if let Some(band) = open.take() {
            bands.push(band);
        }
    }
    bands.extend(open);

    for band in &mut bands {
        band.fused_points.extend(
            fused_points
                .iter()
                .copied()
                .filter(|&e| e > band.e_lo && e < band.e_hi),
        );
        band.fused_points.sort_by(f64::total_cmp);
        band.j = label_band(model, band, settings)?;
    }
    Ok(bands)
}

/// `Int(alpha / pi)` at the middle of each stretch between fused points.
fn label_band(
    model: &PotentialModel,
    band: &BandInfo,
    settings: &IntegrationSettings,
) -> Result<BandIndex> {
    let mut cuts = vec![band.e_lo];
    cuts.extend(&band.fused_points);
    cuts.push(band.e_hi);
    let mut labels = Vec::new();
    for w in cuts.windows(2) {
        let cell = cell_quantities(model, 0.5 * (w[0] + w[1]), settings)?;
        let fq = intrinsic_quantities(&cell)?;
        labels.push(fq.band_index().max(0) as u32);
    }
    let (lo, hi) = (labels[0], *labels.last().unwrap());
    Ok(if labels.len() == 1 {
        BandIndex::Single(lo)
    } else {
        BandIndex::Fused(lo, hi)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionRecord {
    pub q: u32,
    pub j_pair: (u32, u32),
    pub v_f: f64,
    pub e_f_plus_d: f64,
    pub up_at_fusion: f64,
    /// Residuals `sin beta` and `u u'` at the fusion point.
    pub sine_residual: f64,
    pub slope_residual: f64,
    pub iterations: usize,
}

/// Energy where `beta(E) = target` for the single-cell model.
fn solve_phase(
    model: &PotentialModel,
    target: f64,
    guess: f64,
    settings: &IntegrationSettings,
) -> Result<(f64, CellQuantities)> {
    let g = |e: f64| cell_quantities(model, e, settings).map(|c| c.beta - target);
    let g0 = g(guess)?;
    if g0 == 0.0 {
        return Ok((guess, cell_quantities(model, guess, settings)?));
    }
    // beta increases with E: walk towards the sign change.
    let dir = if g0 < 0.0 { 1.0 } else { -1.0 };
    let mut step = 0.02 * (1.0 + guess.abs());
    let (mut a, mut ga) = (guess, g0);
    let mut bracket = None;
    for _ in 0..60 {
        let b = a + dir * step;
        let gb = g(b)?;
        if ga * gb <= 0.0 {
            bracket = Some(((a, ga), (b, gb)));
            break;
        }
        a = b;
        ga = gb;
        step *= 1.6;
    }
    let (lo, hi) = bracket.ok_or_else(|| {
        Error::FusionFailed(format!("no energy with beta = {target} near E = {guess}"))
    })?;
    let (lo, hi) = if lo.0 < hi.0 { (lo, hi) } else { (hi, lo) };
    let e = roots::brent_known(g, lo, hi, 1e-14)?;
    let cell = cell_quantities(model, e, settings)?;
    if (cell.beta - target).abs() > 1e-10 {
        return Err(Error::FusionFailed(format!(
            "phase residual {} at E = {e}",
            cell.beta - target
        )));
    }
    Ok((e, cell))
}

/// Fusion of bands `(j, j + 1)` for cells `V0 sin^q(x) - D`.
///
/// The inner loop solves `beta(E) = (j + 1) pi` in energy; the outer secant
/// iteration drives `u'(pi)` to zero in `V0`.
pub fn find_fusion(
    q: u32,
    j: u32,
    v0_guess: f64,
    d: f64,
    settings: &IntegrationSettings,
) -> Result<FusionRecord> {
    let model_at = |v0: f64| PotentialModel::new(v0, d, 1, q);
    let target = (j + 1) as f64 * PI;
    // Free-particle estimate shifted by the mean cell potential.
    let mean_sin_q = mean_sin_power(q);
    let mut e_guess = 0.5 * ((j + 1) as f64).powi(2) + v0_guess * mean_sin_q - d;

    let eval = |v0: f64, e_guess: f64| -> Result<(f64, CellQuantities)> {
        let m = model_at(v0)?;
        solve_phase(&m, target, e_guess, settings)
    };

    let (mut x0, mut x1) = (v0_guess, v0_guess + 1e-4);
    let (e0, c0) = eval(x0, e_guess)?;
    e_guess = e0;
    let (e1, c1) = eval(x1, e_guess)?;
    let (mut f0, mut f1) = (c0.u_prime, c1.u_prime);
    let (mut e_best, mut c_best) = (e1, c1);
    let mut iterations = 0;
    while f1.abs() >= 1e-8 {
        iterations += 1;
        if iterations > 60 || f1 == f0 {
            return Err(Error::FusionFailed(format!(
                "q = {q}, j = {j}: secant stalled at V0 = {x1}, u' = {f1:e} after {iterations} iterations"
            )));
        }
        let step = (-f1 * (x1 - x0) / (f1 - f0)).clamp(-0.5, 0.5);
        let x2 = x1 + step;
        let (e2, c2) = eval(x2, e_best)?;
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = c2.u_prime;
        e_best = e2;
        c_best = c2;
    }

    let model = model_at(x1)?;
    let up_at_fusion = fused_up(&model, e_best, settings)?;
    Ok(FusionRecord {
        q,
        j_pair: (j, j + 1),
        v_f: x1,
        e_f_plus_d: e_best + d,
        up_at_fusion,
        sine_residual: c_best.sine_condition().abs(),
        slope_residual: (c_best.u * c_best.u_prime).abs(),
        iterations,
    })
}

/// All fusions of bands `(j, j + 1)` with `V0` between `v0_min` and `v0_max`.
///
/// `u'` at the energy where `beta = (j + 1) pi` is sampled every `v0_step`;
/// each sign change seeds [`find_fusion`]. The trivial root `V0 = 0` is
/// skipped.
pub fn scan_fusions(
    q: u32,
    j: u32,
    d: f64,
    (v0_min, v0_max): (f64, f64),
    v0_step: f64,
    settings: &IntegrationSettings,
) -> Result<Vec<FusionRecord>> {
    if !(v0_max > v0_min && v0_step > 0.0) {
        return Err(Error::Domain(format!(
            "fusion scan over [{v0_min}, {v0_max}] with step {v0_step}"
        )));
    }
    let target = (j + 1) as f64 * PI;
    let mean_sin_q = mean_sin_power(q);
    let count = ((v0_max - v0_min) / v0_step).ceil() as usize + 1;
    let grid: Vec<f64> = (0..count)
        .map(|i| v0_min + (v0_max - v0_min) * i as f64 / (count - 1) as f64)
        .filter(|v| v.abs() > 0.5 * v0_step)
        .collect();
    let slopes: Vec<f64> = grid
        .par_iter()
        .map(|&v0| {
            let model = PotentialModel::new(v0, d, 1, q)?;
            let guess = 0.5 * ((j + 1) as f64).powi(2) + v0 * mean_sin_q - d;
            solve_phase(&model, target, guess, settings).map(|(_, c)| c.u_prime)
        })
        .map(|r| r.unwrap_or(f64::NAN))
        .collect();
    let mut found: Vec<FusionRecord> = Vec::new();
    for i in roots::sign_changes(&slopes) {
        // A sign change across V0 = 0 is the trivial fusion.
        if grid[i] * grid[i + 1] < 0.0 {
            continue;
        }
        let guess = if slopes[i].abs() < slopes[i + 1].abs() { grid[i] } else { grid[i + 1] };
        let record = find_fusion(q, j, guess, d, settings)?;
        if !found.iter().any(|f| (f.v_f - record.v_f).abs() < 1e-6) {
            found.push(record);
        }
    }
    Ok(found)
}

/// `u_p` at a fused point, where its formula is 0/0: Richardson
/// extrapolation of symmetric averages at `E_f +- h`.
fn fused_up(model: &PotentialModel, e_f: f64, settings: &IntegrationSettings) -> Result<f64> {
    let avg = |h: f64| -> Result<f64> {
        let mut total = 0.0;
        for e in [e_f - h, e_f + h] {
            let fq = intrinsic_quantities(&cell_quantities(model, e, settings)?)?;
            total += fq.up().ok_or(Error::OutOfBand { energy: e })?;
        }
        Ok(0.5 * total)
    };
    let (a, b) = (avg(1e-3)?, avg(2e-3)?);
    Ok((4.0 * a - b) / 3.0)
}

/// Average of `sin^q` over a period: `(q-1)!! / q!!` for even `q`.
fn mean_sin_power(q: u32) -> f64 {
    (1..=q / 2).map(|k| (2 * k - 1) as f64 / (2 * k) as f64).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualPeriodicReport {
    pub energy: f64,
    pub up: f64,
    /// `max(|A(pi) - 1|, |A'(pi)|)` for the amplitude started at `(1, 0)`.
    pub a_period_defect: f64,
    /// `max(|A_p(pi) - u_p|, |A_p'(pi)|)` for the amplitude started at `(u_p, 0)`.
    pub ap_period_defect: f64,
    /// `|p_p(pi) - alpha|`.
    pub phase_defect: f64,
    pub cosine_mismatch: f64,
    pub sine_mismatch: f64,
}

impl DualPeriodicReport {
    pub const TOL: f64 = 1e-6;

    pub fn a_periodic(&self) -> bool {
        self.a_period_defect < Self::TOL
    }

    pub fn ap_periodic(&self) -> bool {
        self.ap_period_defect < Self::TOL
    }

    pub fn solutions_agree(&self) -> bool {
        self.cosine_mismatch < Self::TOL && self.sine_mismatch < Self::TOL
    }

    pub fn passed(&self) -> bool {
        self.a_periodic() && self.ap_periodic() && self.solutions_agree()
    }
}

/// Integrates both amplitudes across one cell and compares the principal
/// solutions they represent.
pub fn verify_dual_periodic(
    model: &PotentialModel,
    energy: f64,
    fq: &FloquetQuantities,
    settings: &IntegrationSettings,
) -> Result<DualPeriodicReport> {
    let up = fq.up().ok_or(Error::OutOfBand { energy })?;
    let cell = model.with_cells(1);
    let dense = IntegrationSettings {
        dense_output: true,
        ..*settings
    };
    let run = |a0: f64| -> Result<milne::Trajectory> {
        milne::integrate(&cell, energy, 0.0, PI, AmplitudeState::new(a0, 0.0, 0.0), &dense)
            .map(|r| r.trajectory.unwrap_or_default())
    };
    let plain = run(1.0)?;
    let periodic = run(up)?;

    let mut cosine_mismatch: f64 = 0.0;
    let mut sine_mismatch: f64 = 0.0;
    for (s, p) in plain.states.iter().zip(&periodic.states) {
        let (ps, pc) = p.phase.sin_cos();
        let (ss, sc) = s.phase.sin_cos();
        cosine_mismatch = cosine_mismatch.max((s.a * sc - p.a / up * pc).abs());
        sine_mismatch = sine_mismatch.max((s.a * ss - up * p.a * ps).abs());
    }
    let (a_end, p_end) = (plain.states.last().unwrap(), periodic.states.last().unwrap());
    Ok(DualPeriodicReport {
        energy,
        up,
        a_period_defect: (a_end.a - 1.0).abs().max(a_end.a_prime.abs()),
        ap_period_defect: (p_end.a - up).abs().max(p_end.a_prime.abs()),
        phase_defect: (p_end.phase - fq.alpha.re).abs(),
        cosine_mismatch,
        sine_mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> IntegrationSettings {
        IntegrationSettings::default()
    }

    #[test]
    fn free_particle_cell() {
        let m = PotentialModel::new(0.0, 0.0, 1, 4).unwrap();
        let c = cell_quantities(&m, 0.5, &settings()).unwrap();
        assert!((c.u - 1.0).abs() < 1e-10);
        assert!(c.u_prime.abs() < 1e-10);
        assert!((c.beta - PI).abs() < 1e-10);
    }

    #[test]
    fn identity_like_cell() {
        let c = CellQuantities {
            energy: 0.0,
            u: 1.0,
            u_prime: 0.0,
            beta: PI / 2.0,
        };
        let fq = intrinsic_quantities(&c).unwrap();
        assert!(fq.in_band);
        assert!((fq.alpha.re - PI / 2.0).abs() < 1e-15);
        assert!((fq.up_sq.re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_edge_is_singular() {
        let c = CellQuantities {
            energy: 0.5,
            u: 1.0,
            u_prime: 0.0,
            beta: 0.0,
        };
        assert!(matches!(
            intrinsic_quantities(&c),
            Err(Error::EdgeSingularity { .. })
        ));
    }

    #[test]
    fn monodromy_special_cases() {
        let half_turn = monodromy(&CellQuantities {
            energy: 0.0,
            u: 1.0,
            u_prime: 0.0,
            beta: PI,
        });
        assert!(half_turn.max_abs_diff(&Monodromy { m11: -1.0, m12: 0.0, m21: 0.0, m22: -1.0 }) < 1e-15);
        let full_turn = monodromy(&CellQuantities {
            energy: 0.0,
            u: 1.0,
            u_prime: 0.0,
            beta: 2.0 * PI,
        });
        assert!(full_turn.max_abs_diff(&Monodromy::IDENTITY) < 1e-15);
        assert!(monodromy_power_direct(&Monodromy::IDENTITY, 37).max_abs_diff(&Monodromy::IDENTITY) == 0.0);
    }

    #[test]
    fn intrinsic_power_quarter_turn() {
        let fq = FloquetQuantities {
            energy: 0.0,
            alpha: Complex64::new(PI / 2.0, 0.0),
            up_sq: Complex64::new(1.0, 0.0),
            in_band: true,
        };
        let m2 = monodromy_power(&fq, 2);
        assert!(m2.max_abs_diff(&Monodromy { m11: -1.0, m12: 0.0, m21: 0.0, m22: -1.0 }) < 1e-15);
    }

    #[test]
    fn binary_and_repeated_powers_agree() {
        let cell = cell_quantities(&PotentialModel::attractive_reference(1), 0.2, &settings()).unwrap();
        let m = monodromy(&cell);
        for n in [1, 2, 7, 64, 100] {
            assert!(m.pow(n).max_abs_diff(&monodromy_power_direct(&m, n)) < 1e-10);
        }
    }

    #[test]
    fn gap_branch_reconstructs_monodromy() {
        for (model, e) in [
            (PotentialModel::attractive_reference(1), 0.5),
            (PotentialModel::repulsive_reference(1), 0.5),
            (PotentialModel::repulsive_reference(1), 0.01),
        ] {
            let cell = cell_quantities(&model, e, &settings()).unwrap();
            let fq = intrinsic_quantities(&cell).unwrap();
            assert!(!fq.in_band);
            assert!(fq.up_sq.im > 0.0 && fq.up_sq.re == 0.0);
            let r = fq.alpha.re / PI;
            assert!((r - r.round()).abs() < 1e-15);
            let m = monodromy(&cell);
            assert!(monodromy_power(&fq, 1).max_abs_diff(&m) < 1e-10);
        }
    }

    #[test]
    fn attractive_first_gap_branch() {
        let cell = cell_quantities(&PotentialModel::attractive_reference(1), 0.5, &settings()).unwrap();
        let fq = intrinsic_quantities(&cell).unwrap();
        assert!(fq.up_sq.im > 0.0);
        assert_eq!((fq.alpha.re / PI).round(), 1.0);
        // ]CS[ gap: beta lies in (pi/2, pi) so Im alpha must be positive
        // for u_p^2 sin alpha to equal u sin beta.
        assert!(cell.beta > PI / 2.0 && cell.beta < PI);
        let lhs = fq.up_sq * fq.alpha.sin();
        assert!((lhs.re - cell.u * cell.beta.sin()).abs() < 1e-10);
        assert!(lhs.im.abs() < 1e-12);
    }

    #[test]
    fn mean_sin_powers() {
        assert!((mean_sin_power(2) - 0.5).abs() < 1e-15);
        assert!((mean_sin_power(4) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn band_index_display() {
        assert_eq!(BandIndex::Fused(1, 2).to_string(), "(1,2)");
        assert_eq!(BandIndex::Single(3).to_string(), "3");
        assert!(BandIndex::Fused(1, 2).contains(2));
    }
}
