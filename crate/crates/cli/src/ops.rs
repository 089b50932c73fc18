//! Command implementations. Every command resolves its configuration,
//! writes its artifacts under the output directory, and finishes with a
//! `manifest.json` capturing the resolved configuration and a content hash
//! of the model, so a run can be reproduced exactly.

use fsc_core::cages::{compose, fsc_multi, fsc_o1, fsc_single, CageState};
use fsc_core::dynamics::{
    dynamics_csv, evolve_series, saturation, Spacing, TimeGrid, DEFAULT_DENSE_EVOLVE_CAP,
};
use fsc_core::graph::{
    biadjacency, bipartition_counts, build_krylov_graph, export_dot, export_graphml, export_json,
    full_census, imbalance_bound, Highlight, Parity,
};
use fsc_core::model::{preset, BasisState, Boundary, ModelSpec};
use fsc_core::spectral::{
    dense_spectrum, eigenvalues_csv, entanglement_csv, entanglement_profile, gap_ratio,
    momentum_sectors, reflection_parity_spectra, rstats_csv, GapRatioStats,
};
use fsc_core::zeromodes::{
    backtracking_search, charge_flow_search, kernel_dimensions, solution_json, solution_to_cage,
    verify_zero_mode, SearchOptions,
};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub enum CmdError {
    /// Bad configuration: exit code 2.
    Config(String),
    /// A verification run found a counterexample: exit code 1.
    Verification(String),
}

impl From<fsc_core::FscError> for CmdError {
    fn from(e: fsc_core::FscError) -> Self {
        CmdError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Config(format!("io error: {e}"))
    }
}

type Result<T> = std::result::Result<T, CmdError>;

fn parse_bc(s: &str) -> Result<Boundary> {
    match s {
        "open" => Ok(Boundary::Open),
        "periodic" => Ok(Boundary::Periodic),
        other => Err(CmdError::Config(format!("unknown boundary condition {other:?}"))),
    }
}

/// Resolve a model argument: preset name or JSON file path. A model file
/// fixes its own L and bc; presets take them from the flags.
fn resolve_model(model: &str, l: usize, bc: Option<&str>) -> Result<ModelSpec> {
    if matches!(model, "single_cage" | "multi_cage" | "o1_cage") {
        let default_bc = if model == "single_cage" { Boundary::Open } else { Boundary::Periodic };
        let bc = match bc {
            Some(s) => parse_bc(s)?,
            None => default_bc,
        };
        Ok(preset(model, l, bc)?)
    } else if Path::new(model).exists() {
        let text = std::fs::read_to_string(model)?;
        let spec = ModelSpec::from_json(&text)?;
        if spec.l != l {
            return Err(CmdError::Config(format!(
                "model file fixes L = {}, flag requested {l}",
                spec.l
            )));
        }
        Ok(spec)
    } else {
        Err(CmdError::Config(format!(
            "model {model:?} is neither a preset (single_cage | multi_cage | o1_cage) \
             nor an existing file"
        )))
    }
}

fn lengths(ls: &[usize]) -> Result<Vec<usize>> {
    if ls.is_empty() {
        return Err(CmdError::Config("at least one --L value required".into()));
    }
    Ok(ls.to_vec())
}

fn default_seed(spec: &ModelSpec) -> BasisState {
    if spec.name == "o1_cage" {
        BasisState::new(0b11, spec.l).expect("pair fits")
    } else {
        BasisState::new(1, spec.l).expect("single site fits")
    }
}

fn named_state(name: &str, spec: &ModelSpec) -> Result<BasisState> {
    let l = spec.l;
    let state = match name {
        "edge_dot" => BasisState::new(1, l),
        "mid_dot" => BasisState::new(1 << (l / 2), l),
        "mid_pair" => BasisState::new(0b11 << (l / 2 - 1), l),
        "even_pair" => BasisState::new(0b11 << ((l / 2) & !1), l),
        bits => BasisState::parse(bits),
    };
    state.map_err(|e| CmdError::Config(format!("bad seed state {name:?}: {e}")))
}

fn model_hash(spec: &ModelSpec) -> String {
    let mut hasher = Sha256::new();
    hasher.update(spec.to_json().as_bytes());
    let digest = hasher.finalize();
    digest.iter().fold(String::new(), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    })
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, content)?;
    Ok(path)
}

fn write_manifest(
    dir: &Path,
    command: &str,
    config: serde_json::Value,
    models: &[&ModelSpec],
    outputs: &[PathBuf],
) -> Result<()> {
    let manifest = json!({
        "command": command,
        "config": config,
        "models": models.iter().map(|m| json!({
            "name": m.name,
            "L": m.l,
            "bc": m.bc.to_string(),
            "hash": model_hash(m),
        })).collect::<Vec<_>>(),
        "outputs": outputs.iter().map(|p| p.file_name().unwrap().to_string_lossy())
            .collect::<Vec<_>>(),
    });
    write_out(dir, "manifest.json", &serde_json::to_string_pretty(&manifest).unwrap())?;
    Ok(())
}

pub fn cmd_graph(
    margs: &super::ModelArgs,
    seed_state: Option<&str>,
    format: &str,
    site_cap: usize,
    out: &Path,
) -> Result<()> {
    let ls = lengths(&margs.l)?;
    let mut outputs = Vec::new();
    let mut models = Vec::new();
    for &l in &ls {
        let spec = resolve_model(&margs.model, l, margs.bc.as_deref())?;
        let seed = match seed_state {
            Some(s) => named_state(s, &spec)?,
            None => default_seed(&spec),
        };
        let census = full_census(&spec, site_cap)?;
        let graph = build_krylov_graph(&spec, seed, site_cap)?;
        let (n_a, n_b) = bipartition_counts(&graph);

        let census_json = json!({
            "model": spec.name,
            "L": l,
            "bc": spec.bc.to_string(),
            "components": census.components.iter().map(|c| json!({
                "size": c.size,
                "representative": c.representative.to_string(),
                "frozen": c.frozen,
            })).collect::<Vec<_>>(),
            "sector": {
                "seed": seed.to_string(),
                "size": graph.len(),
                "n_a": n_a,
                "n_b": n_b,
                "imbalance": imbalance_bound(&graph),
            },
        });
        outputs.push(write_out(
            out,
            &format!("census_L{l}.json"),
            &serde_json::to_string_pretty(&census_json).unwrap(),
        )?);

        let highlight_cage = catalog_highlight(&spec);
        let highlight = highlight_cage.as_ref().map(|c| Highlight {
            amplitudes: c.amplitudes(),
            label: "cage",
        });
        let (name, content) = match format {
            "dot" => (format!("graph_L{l}.dot"), export_dot(&graph, highlight.as_ref())),
            "graphml" => {
                (format!("graph_L{l}.graphml"), export_graphml(&graph, highlight.as_ref()))
            }
            "json" => (format!("graph_L{l}.json"), export_json(&graph)),
            other => return Err(CmdError::Config(format!("unknown format {other:?}"))),
        };
        outputs.push(write_out(out, &name, &content)?);
        models.push(spec);
    }
    let config = json!({
        "model": margs.model, "L": ls, "bc": margs.bc, "seed_state": seed_state,
        "format": format, "site_cap": site_cap,
    });
    write_manifest(out, "graph", config, &models.iter().collect::<Vec<_>>(), &outputs)
}

/// The natural catalog cage for highlighting, when one exists at this size.
fn catalog_highlight(spec: &ModelSpec) -> Option<CageState> {
    match spec.name.as_str() {
        "single_cage" => fsc_single(spec.l).ok(),
        "multi_cage" => fsc_multi(spec.l, 1, 0).ok(),
        "o1_cage" => fsc_o1(spec.l, 0).ok(),
        _ => None,
    }
}

pub fn cmd_zeromodes(
    margs: &super::ModelArgs,
    search: &str,
    max_support: usize,
    max_solutions: usize,
    rng_seed: u64,
    out: &Path,
) -> Result<()> {
    let ls = lengths(&margs.l)?;
    let mut dzero_csv = String::from("L,n_A,n_B,dim_ker_M,dim_ker_Mdagger,dim_ker_H,bound,method\n");
    let mut solutions = Vec::new();
    let mut reports = Vec::new();
    let mut models = Vec::new();
    let mut outputs = Vec::new();
    for &l in &ls {
        let spec = resolve_model(&margs.model, l, margs.bc.as_deref())?;
        let seed = default_seed(&spec);
        let graph = build_krylov_graph(&spec, seed, 20)?;
        let m = biadjacency(&graph);
        let report = kernel_dimensions(&m, rng_seed);
        let _ = write!(
            dzero_csv,
            "{l},{},{},{},{},{},{},{}\n",
            report.n_a,
            report.n_b,
            report.dim_ker_m,
            report.dim_ker_mdagger,
            report.dim_ker_h,
            report.bound,
            report.method.label()
        );
        reports.push(json!({
            "L": l, "n_A": report.n_a, "n_B": report.n_b, "rank": report.rank,
            "dim_ker_M": report.dim_ker_m, "dim_ker_Mdagger": report.dim_ker_mdagger,
            "dim_ker_H": report.dim_ker_h, "bound": report.bound,
            "method": report.method.label(),
        }));

        let mut incomplete = false;
        match search {
            "backtracking" => {
                let opts = SearchOptions {
                    max_solutions,
                    max_support,
                    max_steps: 50_000_000,
                    ..Default::default()
                };
                for sub in [Parity::A, Parity::B] {
                    let outcome = backtracking_search(&m, sub, &opts);
                    incomplete |= !outcome.complete;
                    for sol in &outcome.solutions {
                        let cage = solution_to_cage(&graph, &m, sol)?;
                        let ok = verify_zero_mode(&spec, &cage)?.ok;
                        solutions.push(solution_json(&spec, &cage, ok));
                    }
                }
            }
            "chargeflow" => {
                for sub in [Parity::A, Parity::B] {
                    if let Some(sol) = charge_flow_search(&m, sub, rng_seed, 100_000, 200, max_support) {
                        let cage = solution_to_cage(&graph, &m, &sol)?;
                        let ok = verify_zero_mode(&spec, &cage)?.ok;
                        solutions.push(solution_json(&spec, &cage, ok));
                    }
                }
            }
            "none" => {}
            other => return Err(CmdError::Config(format!("unknown search {other:?}"))),
        }
        if incomplete {
            // caps reached: results are flagged, not an error
            solutions.push(json!({"model": spec.name, "L": l, "incomplete": true}));
        }
        models.push(spec);
    }
    outputs.push(write_out(out, "dzero.csv", &dzero_csv)?);
    outputs.push(write_out(
        out,
        "kernel_report.json",
        &serde_json::to_string_pretty(&serde_json::Value::Array(reports)).unwrap(),
    )?);
    outputs.push(write_out(
        out,
        "solutions.json",
        &serde_json::to_string_pretty(&serde_json::Value::Array(solutions)).unwrap(),
    )?);
    let config = json!({
        "model": margs.model, "L": ls, "bc": margs.bc, "search": search,
        "max_support": max_support, "max_solutions": max_solutions, "rng_seed": rng_seed,
    });
    write_manifest(out, "zeromodes", config, &models.iter().collect::<Vec<_>>(), &outputs)
}

pub fn cmd_spectrum(
    margs: &super::ModelArgs,
    seed_state: Option<&str>,
    cut: Option<usize>,
    momentum: bool,
    reflection: bool,
    dense_cap: usize,
    out: &Path,
) -> Result<()> {
    let ls = lengths(&margs.l)?;
    let mut models = Vec::new();
    let mut outputs = Vec::new();
    let mut summary = Vec::new();
    for &l in &ls {
        let spec = resolve_model(&margs.model, l, margs.bc.as_deref())?;
        let seed = match seed_state {
            Some(s) => named_state(s, &spec)?,
            None => default_seed(&spec),
        };
        let graph = build_krylov_graph(&spec, seed, 20)?;
        let spectrum = dense_spectrum(&graph, &spec, true, dense_cap)?;
        outputs.push(write_out(
            out,
            &format!("eigenvalues_L{l}.csv"),
            &eigenvalues_csv(&spectrum.eigenvalues),
        )?);

        let raw = gap_ratio(&spectrum.eigenvalues, false, 20)?;
        let collapsed = gap_ratio(&spectrum.eigenvalues, true, 20)?;
        outputs.push(write_out(out, &format!("rstats_L{l}.csv"), &rstats_csv(&raw, &collapsed))?);

        let cut = cut.unwrap_or(l / 2);
        let profile = entanglement_profile(&spectrum, &graph, cut)?;
        outputs.push(write_out(
            out,
            &format!("entanglement_L{l}.csv"),
            &entanglement_csv(&profile),
        )?);

        let mut resolved_mean = None;
        if momentum {
            let blocks = momentum_sectors(&spec, dense_cap).map_err(CmdError::from)?;
            let mut csv = String::from("m,E\n");
            let mut pooled: Vec<f64> = Vec::new();
            for b in &blocks {
                for &e in &b.eigenvalues {
                    let _ = write!(csv, "{},{e:.12e}\n", b.meta.momentum.unwrap());
                }
                if b.dim() >= 10 {
                    pooled.extend(gap_ratio(&b.eigenvalues, true, 20)?.r_values);
                }
            }
            outputs.push(write_out(out, &format!("momentum_L{l}.csv"), &csv)?);
            resolved_mean = Some(pooled.iter().sum::<f64>() / pooled.len() as f64);
        }
        if reflection {
            let (p, m) = reflection_parity_spectra(&graph, &spec)?;
            let mut pooled: Vec<f64> = Vec::new();
            let mut stats: Vec<GapRatioStats> = Vec::new();
            for b in [&p, &m] {
                let st = gap_ratio(&b.eigenvalues, true, 20)?;
                pooled.extend(st.r_values.iter().copied());
                stats.push(st);
            }
            outputs.push(write_out(
                out,
                &format!("rstats_resolved_L{l}.csv"),
                &rstats_csv(&stats[0], &stats[1]),
            )?);
            resolved_mean = Some(pooled.iter().sum::<f64>() / pooled.len() as f64);
        }
        summary.push(json!({
            "L": l,
            "dim": spectrum.dim(),
            "zero_count": spectrum.zero_count(1e-10),
            "mean_r_raw": raw.mean_r,
            "mean_r_zero_collapsed": collapsed.mean_r,
            "mean_r_resolved": resolved_mean,
            "cut": cut,
            "page_reference": profile.page_reference,
        }));
        models.push(spec);
    }
    outputs.push(write_out(
        out,
        "spectrum_summary.json",
        &serde_json::to_string_pretty(&serde_json::Value::Array(summary)).unwrap(),
    )?);
    let config = json!({
        "model": margs.model, "L": ls, "bc": margs.bc, "seed_state": seed_state,
        "cut": cut, "momentum": momentum, "reflection": reflection, "dense_cap": dense_cap,
    });
    write_manifest(out, "spectrum", config, &models.iter().collect::<Vec<_>>(), &outputs)
}

pub fn cmd_dynamics(
    margs: &super::ModelArgs,
    seed_state: &str,
    tmax: f64,
    samples: usize,
    spacing: &str,
    window: f64,
    out: &Path,
) -> Result<()> {
    let ls = lengths(&margs.l)?;
    let spacing = match spacing {
        "log" => Spacing::Log,
        "linear" => Spacing::Linear,
        other => return Err(CmdError::Config(format!("unknown spacing {other:?}"))),
    };
    let grid = TimeGrid { t_max: tmax, samples, spacing };
    let mut models = Vec::new();
    let mut outputs = Vec::new();
    let mut sat_csv = String::from("L,seed_state,return_saturation,z_total_saturation\n");
    let mut sats = Vec::new();
    for &l in &ls {
        let spec = resolve_model(&margs.model, l, margs.bc.as_deref())?;
        let psi0 = named_state(seed_state, &spec)?;
        let series = evolve_series(&spec, psi0, &grid, DEFAULT_DENSE_EVOLVE_CAP, 20)?;
        outputs.push(write_out(out, &format!("dynamics_L{l}.csv"), &dynamics_csv(&series))?);
        let sat_l = saturation(&series.return_prob, window).map_err(CmdError::from)?;
        let sat_z = saturation(&series.z_total, window).map_err(CmdError::from)?;
        let _ = write!(sat_csv, "{l},{},{sat_l:.12e},{sat_z:.12e}\n", psi0);
        sats.push((l, sat_l));
        models.push(spec);
    }
    outputs.push(write_out(out, "saturation.csv", &sat_csv)?);

    // log-log slope of the return-probability saturation when L is a list
    let slope = if sats.len() >= 2 {
        let xs: Vec<f64> = sats.iter().map(|&(l, _)| (l as f64).ln()).collect();
        let ys: Vec<f64> = sats.iter().map(|&(_, s)| s.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        Some(cov / var)
    } else {
        None
    };
    let config = json!({
        "model": margs.model, "L": ls, "bc": margs.bc, "seed_state": seed_state,
        "tmax": tmax, "samples": samples,
        "spacing": if spacing == Spacing::Log { "log" } else { "linear" },
        "window": window,
        "z_convention": "Z|empty> = +|empty>, so the empty chain has Z_total = L",
        "saturation_slope_loglog": slope,
    });
    write_manifest(out, "dynamics", config, &models.iter().collect::<Vec<_>>(), &outputs)
}

pub fn cmd_verify(l_max: usize, out: Option<&Path>) -> Result<()> {
    let mut lines = Vec::new();
    let mut failures = 0usize;
    let mut check = |model: &ModelSpec, cage: &CageState| {
        let ok = verify_zero_mode(model, cage).map(|r| r.ok).unwrap_or(false);
        if !ok {
            failures += 1;
        }
        let line = format!(
            "{} family={} L={} support={}: {}",
            model.name,
            cage.family.label(),
            model.l,
            cage.support(),
            if ok { "ok" } else { "FAILED" }
        );
        println!("{line}");
        lines.push(line);
    };

    for l in 4..=l_max.max(4) {
        let spec = preset("single_cage", l, Boundary::Open).map_err(CmdError::from)?;
        check(&spec, &fsc_single(l).map_err(CmdError::from)?);
    }
    for l in (4..=l_max.max(4)).step_by(2) {
        let spec = preset("multi_cage", l, Boundary::Periodic).map_err(CmdError::from)?;
        check(&spec, &fsc_multi(l, 1, 0).map_err(CmdError::from)?);
        check(&spec, &fsc_multi(l, 2, 0).map_err(CmdError::from)?);
        if l == 6 {
            check(&spec, &fsc_multi(l, 3, 0).map_err(CmdError::from)?);
        }
    }
    for l in (8..=l_max.max(8)).step_by(2) {
        let spec = preset("o1_cage", l, Boundary::Periodic).map_err(CmdError::from)?;
        for p in (0..l).step_by(2) {
            check(&spec, &fsc_o1(l, p).map_err(CmdError::from)?);
        }
        if l >= 14 {
            let a = fsc_o1(l, 0).map_err(CmdError::from)?;
            let b = fsc_o1(l, l / 2).map_err(CmdError::from)?;
            let joined = compose(&[a, b], &[]).map_err(CmdError::from)?;
            check(&spec, &joined);
        }
    }

    if let Some(dir) = out {
        let report = json!({ "l_max": l_max, "failures": failures, "checks": lines });
        write_out(dir, "verify.json", &serde_json::to_string_pretty(&report).unwrap())?;
    }
    if failures > 0 {
        return Err(CmdError::Verification(format!("{failures} catalog states failed")));
    }
    println!("all catalog states annihilated exactly (l_max = {l_max})");
    Ok(())
}
