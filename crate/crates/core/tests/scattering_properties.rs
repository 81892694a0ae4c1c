use amphase::floquet;
use amphase::oracle;
use amphase::scattering::{self, Method};
use amphase::{IntegrationSettings, PotentialModel};

fn settings() -> IntegrationSettings {
    IntegrationSettings::default()
}

fn band_energies(model: &PotentialModel, per_band: usize) -> Vec<f64> {
    let bands = floquet::find_band_edges(&model.with_cells(1), 1e-3, 2.1, 1e-3, &settings()).unwrap();
    bands
        .iter()
        .filter(|b| !b.truncated())
        .flat_map(|b| {
            let (lo, hi) = (b.e_lo + 1e-3, b.e_hi - 1e-3);
            (0..per_band).map(move |i| lo + (hi - lo) * (i as f64 + 0.5) / per_band as f64)
        })
        .collect()
}

#[test]
fn exterior_matches_linear_reconstruction() {
    for (model, e) in [
        (PotentialModel::repulsive_reference(3), 0.2),
        (PotentialModel::attractive_reference(3), 0.05),
        (PotentialModel::attractive_reference(3), 1.1),
    ] {
        let ext = scattering::exterior_quantities(&model, e, &settings()).unwrap();
        let (v, vp) = oracle::oracle_exterior(&model, e).unwrap();
        assert!(ext.v > 0.0);
        assert!((ext.v - v).abs() < 1e-8, "v {} vs {v}", ext.v);
        assert!((ext.v_prime - vp).abs() < 1e-8, "v' {} vs {vp}", ext.v_prime);
    }
}

#[test]
fn exterior_close_to_semiclassical_estimate() {
    // For D = -0.22 the local kinetic energy at the join is E + D.
    let model = PotentialModel::repulsive_reference(3);
    let ext = scattering::exterior_quantities(&model, 0.2, &settings()).unwrap();
    let (v, _) = oracle::oracle_exterior(&model, 0.2).unwrap();
    assert!((ext.v - v).abs() < 0.02 * v);
}

#[test]
fn cutoff_doubling_leaves_exterior_unchanged() {
    for model in [
        PotentialModel::repulsive_reference(2),
        PotentialModel::attractive_reference(2),
    ] {
        for e in [0.01, 0.3, 1.7] {
            let a = scattering::exterior_quantities_with_cutoff(&model, e, 20.0, &settings()).unwrap();
            let b = scattering::exterior_quantities_with_cutoff(&model, e, 40.0, &settings()).unwrap();
            assert!((a.v - b.v).abs() < 1e-10 && (a.v_prime - b.v_prime).abs() < 1e-10);
        }
    }
}

#[test]
fn routes_agree_pairwise_across_cell_counts() {
    let s = settings();
    for base in [
        PotentialModel::repulsive_reference(1),
        PotentialModel::attractive_reference(1),
    ] {
        let energies = band_energies(&base, 6);
        for n in [1, 3, 20, 100] {
            let model = base.with_cells(n);
            for &e in &energies {
                let mut moduli = Vec::new();
                for method in [Method::MatrixPower, Method::Direct, Method::Intrinsic, Method::General] {
                    moduli.push(scattering::transmission(&model, e, method, &s).unwrap().lambda.norm());
                }
                if n <= 20 {
                    moduli.push(scattering::lambda_full(&model, e, &s).unwrap().lambda.norm());
                }
                let spread = moduli.iter().fold(f64::MIN, |a, &b| a.max(b))
                    - moduli.iter().fold(f64::MAX, |a, &b| a.min(b));
                let scale = moduli[0].max(1.0);
                assert!(spread < 1e-7 * scale, "n = {n}, E = {e}: {moduli:?}");
            }
        }
    }
}

#[test]
fn lambda_is_imaginary_in_bands() {
    let model = PotentialModel::attractive_reference(10);
    for e in band_energies(&model, 20) {
        let l = scattering::lambda_intrinsic(&model, e, 10, &settings()).unwrap();
        assert!(l.re.abs() < 1e-10);
    }
}

#[test]
fn gap_routes_agree() {
    let s = settings();
    let model = PotentialModel::repulsive_reference(1);
    for n in [1, 5, 12, 20] {
        let m = model.with_cells(n);
        for e in [0.45, 0.5, 0.6, 2.04] {
            let intrinsic = scattering::lambda_intrinsic(&m, e, n, &s).unwrap();
            let direct = scattering::lambda_direct(&m, e, n, &s).unwrap();
            assert!(
                (intrinsic - direct).norm() < 1e-6 * intrinsic.norm().max(1.0),
                "n = {n}, E = {e}: {intrinsic} vs {direct}"
            );
        }
    }
}

#[test]
fn gap_suppression_matches_oracle() {
    let model = PotentialModel::repulsive_reference(10);
    // T(0.5) = 1.0007e-3 by every route and the oracle.
    let t = scattering::transmission(&model, 0.5, Method::Full, &settings()).unwrap();
    assert!(t.t < 1.001e-3, "{t:?}");
    let o = oracle::oracle_transmission(&model, 0.5).unwrap();
    assert!((o.t - t.t).abs() < 1e-6);
    let gap_mid = 0.5 * (0.401483 + 0.655134);
    let t = scattering::transmission(&model, gap_mid, Method::MatrixPower, &settings()).unwrap();
    let o = oracle::oracle_transmission(&model, gap_mid).unwrap();
    assert!((o.t - t.t).abs() < 1e-6, "{} vs {}", o.t, t.t);
}

#[test]
fn high_energy_limit() {
    for model in [
        PotentialModel::repulsive_reference(10),
        PotentialModel::attractive_reference(10),
    ] {
        for e in [20.5, 25.0, 40.0] {
            let t = scattering::transmission(&model, e, Method::MatrixPower, &settings()).unwrap();
            assert!(t.t > 0.99, "E = {e}: {}", t.t);
        }
    }
}

#[test]
fn known_peaks_have_small_lambda() {
    let s = settings();
    let full = scattering::lambda_full(&PotentialModel::attractive_reference(10), 0.380714, &s).unwrap();
    assert!(full.lambda.norm() < 1e-4);
    // At n = 100 the first peak is too sharp for its six-digit value:
    // |Lambda(0.022141)| = 0.23, so the root near it is polished first.
    let m100 = PotentialModel::attractive_reference(100);
    let e = amphase::roots::brent(
        |e| scattering::lambda_matrix(&m100, e, 100, &s).map(|c| c.lambda.im),
        0.0221400,
        0.0221412,
        1e-13,
    )
    .unwrap();
    assert!((e - 0.022141).abs() < 5e-7, "{e}");
    assert!(scattering::lambda_matrix(&m100, e, 100, &s).unwrap().lambda.norm() < 1e-3);
    let direct = scattering::lambda_direct(&PotentialModel::attractive_reference(2), 0.001970, 2, &s).unwrap();
    assert!(direct.norm() < 1e-3);
    let direct = scattering::lambda_direct(&PotentialModel::repulsive_reference(10), 0.373860, 10, &s).unwrap();
    assert!(direct.norm() < 1e-3);
    let intrinsic = scattering::lambda_intrinsic(&PotentialModel::attractive_reference(10), 0.695647, 10, &s).unwrap();
    assert!(intrinsic.norm() < 1e-4);
}

#[test]
fn flat_exterior_intrinsic_form() {
    let model = PotentialModel::new(0.5, 0.0, 4, 4).unwrap();
    let s = settings();
    for e in [0.05, 0.2, 0.8, 1.5] {
        let ext = scattering::exterior_quantities(&model, e, &s).unwrap();
        let c = floquet::cell_quantities(&model, e, &s).unwrap();
        let Ok(fq) = floquet::intrinsic_quantities(&c) else { continue };
        if !fq.in_band {
            continue;
        }
        assert!(ext.v_prime.abs() < 1e-12);
        let (v2, up2) = (ext.v * ext.v, fq.up_sq.re);
        let expected = 0.5 * (v2 / up2 - up2 / v2) * (4.0 * fq.alpha.re).sin();
        let l = scattering::lambda_intrinsic(&model, e, 4, &s).unwrap();
        assert!((l.im - expected).abs() < 1e-12 && l.re.abs() < 1e-12);
        let j = scattering::j_factors(&model, e, &s).unwrap();
        assert_eq!(j.jx, ext.v * ext.v_prime);
        assert!(j.jx.abs() < 1e-12);
    }
}

#[test]
fn jp_sign_change_in_repulsive_first_band() {
    let model = PotentialModel::repulsive_reference(1);
    let jp: Vec<f64> = (0..=70)
        .map(|i| {
            let e = 0.02 + 0.001 * i as f64;
            scattering::j_factors(&model, e, &settings()).unwrap().jp
        })
        .collect();
    let changes = jp.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    assert_eq!(changes, 1);
}

#[test]
fn attractive_first_band_factors_are_negative() {
    let model = PotentialModel::attractive_reference(1);
    for i in 1..100 {
        let e = 0.0221 + (0.4103 - 0.0221) * i as f64 / 100.0;
        let j = scattering::j_factors(&model, e, &settings()).unwrap();
        assert!(j.jx < 0.0 && j.jp < 0.0, "E = {e}: {j:?}");
    }
}

#[test]
fn jp_diverges_with_edge_dependent_sign() {
    let model = PotentialModel::repulsive_reference(1);
    let s = settings();
    // (CS) band: C-edge at 0.016373, S-edge at 0.401483.
    let near_c = scattering::j_factors(&model, 0.016373 + 1e-3, &s).unwrap();
    let near_s = scattering::j_factors(&model, 0.401483 - 1e-3, &s).unwrap();
    assert!(near_c.jp < 0.0 && near_s.jp > 0.0, "{near_c:?} {near_s:?}");
    let gap = scattering::j_factors(&model, 0.5, &s);
    assert!(gap.is_err());
}

#[test]
fn envelope_and_minima_at_ten_cells() {
    let model = PotentialModel::repulsive_reference(10);
    let s = settings();
    for e in band_energies(&model, 120) {
        let t = scattering::transmission(&model, e, Method::Intrinsic, &s).unwrap().t;
        let tmin = scattering::t_min(&model, e, &s).unwrap();
        assert!(t >= tmin - 1e-9, "E = {e}: {t} < {tmin}");
    }
}

#[test]
fn t_min_is_one_without_factors() {
    // D = 0 removes J_X; J_p vanishes where u_p = v.
    let model = PotentialModel::new(0.5, 0.0, 3, 4).unwrap();
    let s = settings();
    let e_grid: Vec<f64> = (1..200).map(|i| 0.0221 + 0.39 * i as f64 / 200.0).collect();
    let jp: Vec<(f64, f64)> = e_grid
        .iter()
        .filter_map(|&e| scattering::j_factors(&model, e, &s).ok().map(|j| (e, j.jp)))
        .collect();
    let w = jp.windows(2).find(|w| w[0].1 * w[1].1 < 0.0);
    if let Some(w) = w {
        let e0 = amphase::roots::brent(
            |e| scattering::j_factors(&model, e, &s).map(|j| j.jp),
            w[0].0,
            w[1].0,
            1e-13,
        )
        .unwrap();
        assert!((scattering::t_min(&model, e0, &s).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn intrinsic_route_tracks_oracle_at_ten_cells() {
    let model = PotentialModel::attractive_reference(10);
    let grid = oracle::OracleGrid::new(&model, 20.0, oracle::DEFAULT_STEPS_PER_CELL).unwrap();
    for i in 0..500 {
        let e = 0.01 + 2.09 * (i as f64 + 0.5) / 500.0;
        let point = scattering::scan_point(&model, e, &settings()).unwrap();
        let o = grid.transmission(e).unwrap();
        if o.low_confidence() {
            continue;
        }
        assert!((point.result.t - o.t).abs() < 1e-6, "E = {e}: {} vs {}", point.result.t, o.t);
    }
}

#[test]
fn oracle_confirms_known_peak() {
    let o = oracle::oracle_transmission(&PotentialModel::attractive_reference(10), 0.027824).unwrap();
    assert!(o.t > 1.0 - 1e-5);
    let x20 = oracle::oracle_transmission_with(&PotentialModel::attractive_reference(10), 0.3, 20.0, 2048).unwrap();
    let x40 = oracle::oracle_transmission_with(&PotentialModel::attractive_reference(10), 0.3, 40.0, 2048).unwrap();
    assert!((x20.t - x40.t).abs() < 1e-8);
}
