//! Acceptance suite. Each criterion runs as its own test and prints one
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Tolerances and thresholds are pinned here, in code. Initial states for
//! the quench criteria: the FSC-overlapping state is the occupied site at
//! the chain end (the state seeding the big sector, with 1/sqrt(L) overlap
//! on the uniform cage); the zero-overlap state is an adjacent pair in the
//! middle (even occupation parity, hence exactly orthogonal to the cage).

use fsc_core::cages::{compose, fsc_multi, fsc_o1, fsc_single};
use fsc_core::dynamics::{
    diagonal_ensemble, evolve_chebyshev, evolve_dense, evolve_series, saturation, Spacing,
    TimeGrid,
};
use fsc_core::graph::{
    biadjacency, build_krylov_graph, full_census, imbalance_bound, Parity, DEFAULT_SITE_CAP,
};
use fsc_core::model::{
    build_multi_cage, build_o1_cage, build_single_cage, BasisState, Boundary, ModelSpec,
};
use fsc_core::spectral::{
    dense_spectrum, entanglement_of_sector_vector, gap_ratio, reflection_parity_spectra,
    DEFAULT_DENSE_CAP, ZERO_EIGENVALUE_TOL,
};
use fsc_core::zeromodes::{
    backtracking_search, charge_flow_search, kernel_dimensions, solution_to_cage,
    verify_zero_mode, SearchOptions,
};
use std::time::Instant;

const DYN_GRID: TimeGrid = TimeGrid { t_max: 2000.0, samples: 1200, spacing: Spacing::Log };
const DENSE_EVOLVE_CAP: usize = 1 << 12;

fn edge_dot(l: usize) -> BasisState {
    BasisState::new(1, l).unwrap()
}

fn mid_pair(l: usize) -> BasisState {
    BasisState::new(0b11 << (l / 2 - 1), l).unwrap()
}

fn even_pair(l: usize) -> BasisState {
    let p = (l / 2) & !1;
    BasisState::new(0b11 << p, l).unwrap()
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

#[test]
fn criterion_1_annihilation_suite() {
    let t0 = Instant::now();
    let mut checks = 0usize;

    // uniform singles cage, open boundaries, L = 4..=16
    for l in 4..=16 {
        let spec = build_single_cage(l, Boundary::Open).unwrap();
        let cage = fsc_single(l).unwrap();
        let rep = verify_zero_mode(&spec, &cage).unwrap();
        assert!(rep.ok, "uniform singles L={l}: residual {:?}", rep.violations);
        checks += 1;
    }

    // alternating cages, periodic boundaries, even L = 4..=14
    for l in (4..=14).step_by(2) {
        let spec = build_multi_cage(l, Boundary::Periodic).unwrap();
        for family in [1u8, 2] {
            let cage = fsc_multi(l, family, 0).unwrap();
            let rep = verify_zero_mode(&spec, &cage).unwrap();
            assert!(rep.ok, "family {family} L={l}: residual {:?}", rep.violations);
            checks += 1;
        }
        // the antipodal loop exists only at L = 6; elsewhere the
        // constructor documents its absence (no sign assignment on that
        // support is annihilated, verified by restricted-kernel analysis)
        if l == 6 {
            let cage = fsc_multi(l, 3, 0).unwrap();
            assert!(verify_zero_mode(&spec, &cage).unwrap().ok);
            checks += 1;
        } else {
            assert!(fsc_multi(l, 3, 0).is_err());
        }
        // no independent sign-pattern variants exist on these supports
        assert!(fsc_multi(l, 1, 1).is_err());
        assert!(fsc_multi(l, 2, 1).is_err());
    }

    // two-node cages and composites, periodic cluster model, even L = 8..=16
    for l in (8..=16).step_by(2) {
        let spec = build_o1_cage(l, Boundary::Periodic).unwrap();
        for p in (0..l).step_by(2) {
            let cage = fsc_o1(l, p).unwrap();
            let rep = verify_zero_mode(&spec, &cage).unwrap();
            assert!(rep.ok, "two-node cage L={l} p={p}");
            checks += 1;
        }
        // cage plus a far frozen occupied even site
        if l >= 12 {
            let cage = fsc_o1(l, 0).unwrap();
            let frozen = l / 2 - (l / 2) % 2;
            let composite = compose(&[cage], &[frozen]).unwrap();
            assert!(verify_zero_mode(&spec, &composite).unwrap().ok);
            checks += 1;
        }
        // two disjoint cages
        if l >= 14 {
            let a = fsc_o1(l, 0).unwrap();
            let b = fsc_o1(l, (l / 2) & !1).unwrap();
            let composite = compose(&[a, b], &[]).unwrap();
            assert_eq!(composite.support(), 4);
            assert!(verify_zero_mode(&spec, &composite).unwrap().ok);
            checks += 1;
        }
    }

    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 10.0, "annihilation suite took {dt:?}");
    println!("criterion 1: PASS — {checks} catalog states annihilated exactly in {dt:?}");
}

#[test]
fn criterion_2_krylov_census() {
    let t0 = Instant::now();
    for l in 4..=14 {
        let spec = build_single_cage(l, Boundary::Open).unwrap();
        let c = full_census(&spec, DEFAULT_SITE_CAP).unwrap();
        assert_eq!(c.sizes(), vec![1, (1 << l) - 1], "single-cage L={l}");

        let spec = build_multi_cage(l, Boundary::Periodic).unwrap();
        let c = full_census(&spec, DEFAULT_SITE_CAP).unwrap();
        assert_eq!(c.sizes(), vec![1, (1 << l) - 1], "multi-cage L={l}");
    }
    for l in (8..=14).step_by(2) {
        let spec = build_o1_cage(l, Boundary::Periodic).unwrap();
        let c = full_census(&spec, DEFAULT_SITE_CAP).unwrap();
        assert_eq!(c.singleton_count(), 1 << (l / 2), "cluster model L={l}");
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "census took {dt:?}");
    println!("criterion 2: PASS — census sizes match for all models in {dt:?}");
}

#[test]
fn criterion_3_zero_mode_counting() {
    let t0 = Instant::now();
    let cases: Vec<(ModelSpec, BasisState)> = {
        let mut v = Vec::new();
        for l in [4usize, 6, 8, 10, 12] {
            v.push((build_single_cage(l, Boundary::Open).unwrap(), edge_dot(l)));
            v.push((build_multi_cage(l, Boundary::Periodic).unwrap(), edge_dot(l)));
            if l >= 6 {
                v.push((
                    build_o1_cage(l, Boundary::Periodic).unwrap(),
                    BasisState::new(0b11, l).unwrap(),
                ));
            }
        }
        v
    };
    for (spec, seed) in &cases {
        let g = build_krylov_graph(spec, *seed, DEFAULT_SITE_CAP).unwrap();
        let m = biadjacency(&g);
        let report = kernel_dimensions(&m, 42);
        let s = dense_spectrum(&g, spec, false, DEFAULT_DENSE_CAP).unwrap();
        let zeros = s.zero_count(ZERO_EIGENVALUE_TOL);
        assert_eq!(report.dim_ker_h, zeros, "{} L={}", spec.name, spec.l);
        assert!(report.dim_ker_h >= imbalance_bound(&g));
    }

    // regression goldens from the rank oracle, cross-checked spectrally above
    let dzero = |spec: &ModelSpec, seed: BasisState| -> usize {
        let g = build_krylov_graph(spec, seed, DEFAULT_SITE_CAP).unwrap();
        kernel_dimensions(&biadjacency(&g), 42).dim_ker_h
    };
    let multi: Vec<usize> = (4..=12)
        .step_by(2)
        .map(|l| dzero(&build_multi_cage(l, Boundary::Periodic).unwrap(), edge_dot(l)))
        .collect();
    assert_eq!(multi, vec![5, 11, 29, 55, 127]);
    let o1: Vec<usize> = (8..=12)
        .step_by(2)
        .map(|l| {
            dzero(&build_o1_cage(l, Boundary::Periodic).unwrap(), BasisState::new(0b11, l).unwrap())
        })
        .collect();
    assert_eq!(o1, vec![40, 52, 202]);

    // exponential growth: positive slope of log2(d_zero) against L
    let ls: Vec<f64> = (4..=12).step_by(2).map(|l| l as f64).collect();
    let logs: Vec<f64> = multi.iter().map(|&d| (d as f64).log2()).collect();
    let slope_multi = fit_slope(&ls, &logs);
    let ls_o1: Vec<f64> = (8..=12).step_by(2).map(|l| l as f64).collect();
    let logs_o1: Vec<f64> = o1.iter().map(|&d| (d as f64).log2()).collect();
    let slope_o1 = fit_slope(&ls_o1, &logs_o1);
    assert!(slope_multi > 0.0 && slope_o1 > 0.0);

    let dt = t0.elapsed();
    println!(
        "criterion 3: PASS — rank == spectral zero count for all models L<=12; \
         growth slopes {slope_multi:.2}, {slope_o1:.2} bits/site in {dt:?}"
    );
}

#[test]
fn criterion_4_chaos_diagnostics() {
    let t0 = Instant::now();
    let l = 12;
    let spec = build_single_cage(l, Boundary::Open).unwrap();
    let g = build_krylov_graph(&spec, edge_dot(l), DEFAULT_SITE_CAP).unwrap();

    // gap ratio inside the reflection*parity blocks, pooled
    let (plus, minus) = reflection_parity_spectra(&g, &spec).unwrap();
    let mut pooled = Vec::new();
    for block in [&plus, &minus] {
        pooled.extend(gap_ratio(&block.eigenvalues, true, 20).unwrap().r_values);
    }
    let mean_r = pooled.iter().sum::<f64>() / pooled.len() as f64;
    assert!(
        (mean_r - 0.53).abs() <= 0.02,
        "mean gap ratio {mean_r:.4} outside 0.53 +- 0.02"
    );

    // cage entanglement: exactly ln 2 at the half cut
    let cage = fsc_single(l).unwrap();
    let mut vec = vec![0.0; g.len()];
    let norm = (cage.norm_sq() as f64).sqrt();
    for (s, a) in cage.states() {
        vec[g.index_of(s).unwrap() as usize] = a as f64 / norm;
    }
    let s_cage = entanglement_of_sector_vector(&g, &vec, l / 2).unwrap();
    assert!(
        (s_cage - std::f64::consts::LN_2).abs() < 1e-9,
        "cage entropy {s_cage} != ln 2"
    );

    // median mid-spectrum entanglement well above the cage value
    let spectrum = dense_spectrum(&g, &spec, true, DEFAULT_DENSE_CAP).unwrap();
    let n = spectrum.dim();
    let vectors = spectrum.vectors.as_ref().unwrap();
    let mid: Vec<usize> = ((2 * n) / 5..(3 * n) / 5).step_by(4).collect();
    let mut entropies: Vec<f64> = mid
        .iter()
        .map(|&k| {
            let col: Vec<f64> = (0..n).map(|i| vectors[(i, k)]).collect();
            entanglement_of_sector_vector(&g, &col, l / 2).unwrap()
        })
        .collect();
    entropies.sort_by(f64::total_cmp);
    let median = entropies[entropies.len() / 2];
    assert!(
        median > 3.0 * std::f64::consts::LN_2,
        "median mid-spectrum entropy {median:.3} not an outlier-separated Page value"
    );

    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 300.0, "chaos diagnostics took {dt:?}");
    println!(
        "criterion 4: PASS — resolved mean r = {mean_r:.4}, cage S = ln 2 exactly, \
         mid-spectrum median S = {median:.3} in {dt:?}"
    );
}

fn sat_of(spec: &ModelSpec, psi0: BasisState) -> f64 {
    let series = evolve_series(spec, psi0, &DYN_GRID, DENSE_EVOLVE_CAP, DEFAULT_SITE_CAP).unwrap();
    assert!(series.max_norm_drift < 1e-9, "norm drift {}", series.max_norm_drift);
    assert!(series.max_energy_drift < 1e-8, "energy drift {}", series.max_energy_drift);
    saturation(&series.return_prob, 0.5).unwrap()
}

#[test]
fn criterion_5_single_cage_dynamics() {
    let t0 = Instant::now();
    let ls = [8usize, 10, 12, 14];

    let mut overlap_sats = Vec::new();
    let mut orthogonal_sats = Vec::new();
    for &l in &ls {
        let spec = build_single_cage(l, Boundary::Open).unwrap();
        overlap_sats.push(sat_of(&spec, edge_dot(l)));
        orthogonal_sats.push(sat_of(&spec, mid_pair(l)));
    }

    let xs: Vec<f64> = ls.iter().map(|&l| (l as f64).ln()).collect();
    let ys: Vec<f64> = overlap_sats.iter().map(|s| s.ln()).collect();
    let slope = fit_slope(&xs, &ys);
    assert!(
        (slope + 2.0).abs() <= 0.3,
        "saturation slope {slope:.3} outside -2 +- 0.3 (sats {overlap_sats:?})"
    );

    let ratio = orthogonal_sats[0] / orthogonal_sats[3];
    assert!(ratio >= 10.0, "zero-overlap L=14 only {ratio:.1}x below L=8");
    for i in 0..ls.len() {
        assert!(
            orthogonal_sats[i] < overlap_sats[i],
            "L={} zero-overlap {} not below overlapping {}",
            ls[i],
            orthogonal_sats[i],
            overlap_sats[i]
        );
    }

    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 600.0, "single-cage dynamics took {dt:?}");
    println!(
        "criterion 5: PASS — slope {slope:.3}, zero-overlap suppression {ratio:.0}x in {dt:?}"
    );
}

#[test]
fn criterion_6a_o1_return_probability() {
    let t0 = Instant::now();
    let mut sats = Vec::new();
    for l in [8usize, 10, 12, 14] {
        let spec = build_o1_cage(l, Boundary::Periodic).unwrap();
        let sat = sat_of(&spec, even_pair(l));
        assert!(
            (sat - 0.25).abs() <= 0.03,
            "pair-state saturation {sat:.4} at L={l} outside 0.25 +- 0.03"
        );
        sats.push(sat);
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 600.0);
    println!("criterion 6a: PASS — pair-state saturations {sats:?} in {dt:?}");
}

#[test]
fn criterion_6b_o1_magnetization_plateau() {
    let t0 = Instant::now();
    let ls = [8usize, 10, 12, 14];
    let mut zsats = Vec::new();
    for &l in &ls {
        let spec = build_o1_cage(l, Boundary::Periodic).unwrap();
        let series =
            evolve_series(&spec, even_pair(l), &DYN_GRID, DENSE_EVOLVE_CAP, DEFAULT_SITE_CAP)
                .unwrap();
        zsats.push(saturation(&series.z_total, 0.5).unwrap() / l as f64);
    }
    let mean = zsats.iter().sum::<f64>() / zsats.len() as f64;
    let max_dev = zsats.iter().map(|z| (z - mean).abs()).fold(0.0, f64::max);
    let dt = t0.elapsed();
    println!(
        "criterion 6b: {} — Z_total/L saturations {zsats:?}, max deviation {max_dev:.3} \
         (allowed 0.05) in {dt:?}",
        if max_dev <= 0.05 { "PASS" } else { "FAIL" }
    );
    assert!(
        max_dev <= 0.05,
        "Z_total/L not L-independent within +-0.05: {zsats:?} (max deviation {max_dev:.3})"
    );
}

#[test]
fn criterion_7_solver_recovery() {
    let t0 = Instant::now();

    // backtracking re-discovers the uniform singles cage
    let spec = build_single_cage(6, Boundary::Open).unwrap();
    let g = build_krylov_graph(&spec, edge_dot(6), DEFAULT_SITE_CAP).unwrap();
    let m = biadjacency(&g);
    let out = backtracking_search(
        &m,
        Parity::B,
        &SearchOptions { max_support: 6, ..Default::default() },
    );
    assert!(out.complete);
    assert_eq!(out.solutions.len(), 1);
    let cage = solution_to_cage(&g, &m, &out.solutions[0]).unwrap();
    assert_eq!(cage.amplitudes(), fsc_single(6).unwrap().amplitudes());
    assert!(verify_zero_mode(&spec, &cage).unwrap().ok);

    // and the alternating singles cage of the periodic model
    let spec = build_multi_cage(6, Boundary::Periodic).unwrap();
    let g = build_krylov_graph(&spec, edge_dot(6), DEFAULT_SITE_CAP).unwrap();
    let m = biadjacency(&g);
    let out = backtracking_search(
        &m,
        Parity::B,
        &SearchOptions { max_support: 6, ..Default::default() },
    );
    assert_eq!(out.solutions.len(), 1);
    let cage = solution_to_cage(&g, &m, &out.solutions[0]).unwrap();
    assert_eq!(cage.amplitudes(), fsc_multi(6, 1, 0).unwrap().amplitudes());
    assert!(verify_zero_mode(&spec, &cage).unwrap().ok);

    // charge flow finds a two-node cage of the cluster model
    let spec = build_o1_cage(8, Boundary::Periodic).unwrap();
    let g = build_krylov_graph(&spec, BasisState::new(0b11, 8).unwrap(), DEFAULT_SITE_CAP)
        .unwrap();
    let m = biadjacency(&g);
    let sol = charge_flow_search(&m, Parity::A, 1, 10_000, 100, 2).expect("within 100 restarts");
    let cage = solution_to_cage(&g, &m, &sol).unwrap();
    assert!(verify_zero_mode(&spec, &cage).unwrap().ok);
    assert_eq!(cage.support(), 2);

    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "solver recovery took {dt:?}");
    println!("criterion 7: PASS — both searches recover verified cages in {dt:?}");
}

#[test]
fn criterion_8_cross_path_agreement() {
    let t0 = Instant::now();
    let l = 10;
    let spec = build_single_cage(l, Boundary::Open).unwrap();
    let psi0 = edge_dot(l);
    let g = build_krylov_graph(&spec, psi0, DEFAULT_SITE_CAP).unwrap();
    let grid = TimeGrid { t_max: 100.0, samples: 200, spacing: Spacing::Linear };
    let dense = evolve_dense(&g, psi0, &grid).unwrap();
    let cheb = evolve_chebyshev(&g, psi0, &grid).unwrap();
    let mut max_diff = 0.0f64;
    for i in 0..grid.samples {
        max_diff = max_diff.max((dense.return_prob[i] - cheb.return_prob[i]).abs());
    }
    assert!(max_diff < 1e-6, "paths disagree by {max_diff}");
    for series in [&dense, &cheb] {
        assert!(series.max_norm_drift < 1e-9);
        assert!(series.max_energy_drift < 1e-8);
    }

    // diagonal-ensemble prediction against the measured plateau
    let pred = diagonal_ensemble(&spec, psi0, DEFAULT_DENSE_CAP, DEFAULT_SITE_CAP).unwrap();
    let long = TimeGrid { t_max: 10_000.0, samples: 1600, spacing: Spacing::Log };
    let series = evolve_series(&spec, psi0, &long, DENSE_EVOLVE_CAP, DEFAULT_SITE_CAP).unwrap();
    let sat = saturation(&series.return_prob, 0.5).unwrap();
    assert!(
        (sat - pred).abs() / pred < 0.02,
        "diagonal ensemble {pred:.5} vs measured {sat:.5}"
    );

    let dt = t0.elapsed();
    println!(
        "criterion 8: PASS — max path difference {max_diff:.2e}, diagonal ensemble within \
         {:.2}% in {dt:?}",
        100.0 * (sat - pred).abs() / pred
    );
}
