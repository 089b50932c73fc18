//! Dense diagonalization of sector Hamiltonians and the associated
//! diagnostics: adjacent-gap-ratio statistics, eigenstate entanglement, and
//! symmetry-resolved blocks (momentum for periodic chains, combined
//! reflection-and-parity for open ones).

use crate::error::FscError;
use crate::graph::FockGraph;
use crate::model::{BasisState, Boundary, ModelSpec};
use faer::{c64, Mat, Side};
use rayon::prelude::*;

pub const DEFAULT_DENSE_CAP: usize = 1 << 14;
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Default)]
pub struct SpectrumMeta {
    pub model: String,
    pub l: usize,
    pub bc: String,
    /// Momentum index m (k = 2 pi m / L) when momentum-resolved.
    pub momentum: Option<usize>,
    /// Block label for other symmetry resolutions.
    pub block: Option<String>,
}

pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors in the sector node basis.
    pub vectors: Option<Mat<f64>>,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn zero_count(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|e| e.abs() < tol).count()
    }
}

/// Dense symmetric sector Hamiltonian (J = 1).
pub fn assemble_dense(graph: &FockGraph) -> Mat<f64> {
    let n = graph.len();
    let mut h = Mat::<f64>::zeros(n, n);
    for e in &graph.edges {
        h[(e.i as usize, e.j as usize)] = e.amp as f64;
        h[(e.j as usize, e.i as usize)] = e.amp as f64;
    }
    h
}

/// Full eigendecomposition of the sector Hamiltonian.
pub fn dense_spectrum(
    graph: &FockGraph,
    spec: &ModelSpec,
    want_vectors: bool,
    cap: usize,
) -> Result<Spectrum, FscError> {
    let n = graph.len();
    if n > cap {
        return Err(FscError::CapExceeded { dim: n, cap });
    }
    let meta = SpectrumMeta {
        model: spec.name.clone(),
        l: spec.l,
        bc: spec.bc.to_string(),
        ..Default::default()
    };
    if n == 0 {
        return Ok(Spectrum { eigenvalues: vec![], vectors: None, meta });
    }
    let h = assemble_dense(graph);
    if want_vectors {
        let evd = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| FscError::Eigen(format!("{e:?}")))?;
        let eigenvalues: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
        Ok(Spectrum { eigenvalues, vectors: Some(evd.U().to_owned()), meta })
    } else {
        let eigenvalues = h
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| FscError::Eigen(format!("{e:?}")))?;
        Ok(Spectrum { eigenvalues, vectors: None, meta })
    }
}

#[derive(Clone, Debug)]
pub struct GapRatioStats {
    pub r_values: Vec<f64>,
    pub mean_r: f64,
    /// Histogram over [0, 1]: `(bin_lo, bin_hi, count)`.
    pub histogram: Vec<(f64, f64, usize)>,
}

/// Adjacent-gap ratios r_n = min(g_n, g_{n+1}) / max(g_n, g_{n+1}) over the
/// sorted spectrum. With `drop_zero_multiplet` the eigenvalues inside the
/// zero window collapse to a single level first, so an exactly degenerate
/// kernel contributes one level instead of a run of zero gaps.
pub fn gap_ratio(
    eigenvalues: &[f64],
    drop_zero_multiplet: bool,
    bins: usize,
) -> Result<GapRatioStats, FscError> {
    let mut ev: Vec<f64> = eigenvalues.to_vec();
    ev.sort_by(f64::total_cmp);
    if drop_zero_multiplet {
        let mut kept = Vec::with_capacity(ev.len());
        let mut seen_zero = false;
        for e in ev {
            if e.abs() < ZERO_EIGENVALUE_TOL {
                if seen_zero {
                    continue;
                }
                seen_zero = true;
            }
            kept.push(e);
        }
        ev = kept;
    }
    if ev.len() < 3 {
        return Err(FscError::Dynamics(format!(
            "need at least 3 levels for gap ratios, got {}",
            ev.len()
        )));
    }
    let gaps: Vec<f64> = ev.windows(2).map(|w| w[1] - w[0]).collect();
    let mut r_values = Vec::with_capacity(gaps.len() - 1);
    for w in gaps.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a <= 0.0 && b <= 0.0 {
            r_values.push(0.0);
        } else {
            r_values.push(a.min(b) / a.max(b));
        }
    }
    let mean_r = r_values.iter().sum::<f64>() / r_values.len() as f64;
    let mut counts = vec![0usize; bins];
    for &r in &r_values {
        let k = ((r * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (k as f64 / bins as f64, (k + 1) as f64 / bins as f64, c))
        .collect();
    Ok(GapRatioStats { r_values, mean_r, histogram })
}

#[derive(Clone, Debug)]
pub struct EntanglementProfile {
    /// `(E_n, S_n)` per eigenstate, in eigenvalue order.
    pub pairs: Vec<(f64, f64)>,
    pub cut: usize,
    /// Half-cut reference for thermal states: `min(cut, L-cut) ln 2 - 1/2`.
    pub page_reference: f64,
}

/// Von Neumann entropy of the reduced state on sites `0..cut`, for a sector
/// vector embedded into the full product space.
pub fn entanglement_of_sector_vector(
    graph: &FockGraph,
    vec: &[f64],
    cut: usize,
) -> Result<f64, FscError> {
    let l = graph.l;
    if cut == 0 || cut >= l {
        return Err(FscError::Dynamics(format!("cut {cut} outside 1..{}", l - 1)));
    }
    let rows = 1usize << cut;
    let cols = 1usize << (l - cut);
    let mask = (rows - 1) as u64;
    let mut m = Mat::<f64>::zeros(rows, cols);
    for (n, s) in graph.nodes.iter().enumerate() {
        let b = s.bits();
        m[((b & mask) as usize, (b >> cut) as usize)] = vec[n];
    }
    let sv = m
        .singular_values()
        .map_err(|e| FscError::Eigen(format!("{e:?}")))?;
    let mut s = 0.0;
    for sigma in sv {
        let p = sigma * sigma;
        if p > 1e-14 {
            s -= p * p.ln();
        }
    }
    Ok(s)
}

pub fn page_reference(l: usize, cut: usize) -> f64 {
    (cut.min(l - cut) as f64) * std::f64::consts::LN_2 - 0.5
}

/// Entanglement of every eigenstate at the given cut.
pub fn entanglement_profile(
    spectrum: &Spectrum,
    graph: &FockGraph,
    cut: usize,
) -> Result<EntanglementProfile, FscError> {
    let vectors = spectrum.vectors.as_ref().ok_or(FscError::MissingVectors)?;
    let n = spectrum.dim();
    let entropies: Result<Vec<f64>, FscError> = (0..n)
        .into_par_iter()
        .map(|k| {
            let col: Vec<f64> = (0..n).map(|i| vectors[(i, k)]).collect();
            entanglement_of_sector_vector(graph, &col, cut)
        })
        .collect();
    let pairs = spectrum.eigenvalues.iter().copied().zip(entropies?).collect();
    Ok(EntanglementProfile { pairs, cut, page_reference: page_reference(graph.l, cut) })
}

fn translate(bits: u64, l: usize) -> u64 {
    ((bits << 1) | (bits >> (l - 1))) & ((1u64 << l) - 1)
}

fn orbit_representative(bits: u64, l: usize) -> (u64, usize) {
    let mut rep = bits;
    let mut t = bits;
    let mut period = l;
    for step in 1..=l {
        t = translate(t, l);
        if t < rep {
            rep = t;
        }
        if t == bits {
            period = step;
            break;
        }
    }
    (rep, period)
}

/// Momentum-resolved spectra of a translation-invariant periodic model over
/// the nonempty configurations. Returns one block per momentum index
/// m = 0..L-1; the multiset union of block eigenvalues equals the spectrum
/// over all nonempty states.
pub fn momentum_sectors(spec: &ModelSpec, cap: usize) -> Result<Vec<Spectrum>, FscError> {
    if spec.bc != Boundary::Periodic {
        return Err(FscError::InvalidModel(
            "momentum resolution needs periodic boundaries".into(),
        ));
    }
    let l = spec.l;
    if l > 20 || (1usize << l) / l > cap {
        return Err(FscError::CapExceeded { dim: 1 << l, cap });
    }
    // orbits of nonempty states
    let mut seen = vec![false; 1 << l];
    let mut orbits: Vec<(u64, usize)> = Vec::new(); // (representative, period)
    for s in 1..(1u64 << l) {
        if seen[s as usize] {
            continue;
        }
        let (rep, period) = orbit_representative(s, l);
        let mut t = s;
        loop {
            seen[t as usize] = true;
            t = translate(t, l);
            if t == s {
                break;
            }
        }
        orbits.push((rep, period));
    }
    orbits.sort_unstable();

    let blocks: Result<Vec<Spectrum>, FscError> = (0..l)
        .into_par_iter()
        .map(|m| {
            let k = 2.0 * std::f64::consts::PI * m as f64 / l as f64;
            let basis: Vec<(u64, usize)> =
                orbits.iter().copied().filter(|&(_, p)| (m * p) % l == 0).collect();
            let n = basis.len();
            let mut index = std::collections::HashMap::new();
            for (i, &(rep, _)) in basis.iter().enumerate() {
                index.insert(rep, i);
            }
            let mut hk = Mat::<c64>::zeros(n, n);
            for (col, &(rep_a, period_a)) in basis.iter().enumerate() {
                let norm_a = (l * l) as f64 / period_a as f64;
                let mut targets: std::collections::BTreeMap<u64, i64> = Default::default();
                spec.for_each_term(rep_a, |t, sign| {
                    *targets.entry(t).or_insert(0) += sign as i64;
                });
                for (t, amp) in targets {
                    if amp == 0 {
                        continue;
                    }
                    let (rep_b, period_b) = orbit_representative(t, l);
                    let Some(&row) = index.get(&rep_b) else { continue };
                    // shift d with T^d rep_b = t
                    let mut d = 0usize;
                    let mut u = rep_b;
                    while u != t {
                        u = translate(u, l);
                        d += 1;
                    }
                    let norm_b = (l * l) as f64 / period_b as f64;
                    let phase = c64::new(0.0, k * d as f64).exp();
                    let w = phase * (norm_b / norm_a).sqrt() * amp as f64;
                    hk[(row, col)] += w;
                }
            }
            let eigenvalues = hk
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| FscError::Eigen(format!("{e:?}")))?;
            Ok(Spectrum {
                eigenvalues,
                vectors: None,
                meta: SpectrumMeta {
                    model: spec.name.clone(),
                    l,
                    bc: spec.bc.to_string(),
                    momentum: Some(m),
                    block: None,
                },
            })
        })
        .collect();
    blocks
}

/// Count of translation orbits of nonempty L-bit configurations via the
/// cycle-index (necklace) formula; used to cross-check the enumeration.
pub fn necklace_orbit_count(l: usize) -> u64 {
    let phi = |mut n: u64| -> u64 {
        let mut result = n;
        let mut p = 2;
        while p * p <= n {
            if n % p == 0 {
                while n % p == 0 {
                    n /= p;
                }
                result -= result / p;
            }
            p += 1;
        }
        if n > 1 {
            result -= result / n;
        }
        result
    };
    let l64 = l as u64;
    let mut total = 0u64;
    for d in 1..=l64 {
        if l64 % d == 0 {
            total += phi(d) * (1u64 << (l64 / d));
        }
    }
    total / l64 - 1 // exclude the empty configuration's orbit
}

/// Split an open-chain sector under the product of spatial reflection and
/// the occupation-parity sign, which commutes with the Hamiltonian when
/// every family changes sign under reflection. Gap statistics match random
/// matrix expectations only inside these blocks.
pub fn reflection_parity_spectra(
    graph: &FockGraph,
    spec: &ModelSpec,
) -> Result<(Spectrum, Spectrum), FscError> {
    let l = graph.l;
    let n = graph.len();
    let reflect = |bits: u64| -> u64 {
        let mut r = 0u64;
        for i in 0..l {
            if (bits >> i) & 1 == 1 {
                r |= 1 << (l - 1 - i);
            }
        }
        r
    };
    let sign = |s: &BasisState| if s.parity_even() { 1.0 } else { -1.0 };

    // the block construction is valid only when reflection*parity commutes
    // with H: every edge must map to an edge of equal amplitude times the
    // product of endpoint parity signs
    for e in &graph.edges {
        let (si, sj) = (graph.nodes[e.i as usize], graph.nodes[e.j as usize]);
        let ri = graph
            .index_of(BasisState::new(reflect(si.bits()), l)?)
            .ok_or_else(|| FscError::InvalidModel("sector not reflection-closed".into()))?;
        let rj = graph
            .index_of(BasisState::new(reflect(sj.bits()), l)?)
            .ok_or_else(|| FscError::InvalidModel("sector not reflection-closed".into()))?;
        let reflected_amp = graph
            .neighbors(ri)
            .iter()
            .find(|&&(t, _, _)| t == rj)
            .map(|&(_, a, _)| a)
            .unwrap_or(0);
        let g = sign(&si) * sign(&sj);
        if (g * reflected_amp as f64 - e.amp as f64).abs() > 0.0 {
            return Err(FscError::InvalidModel(
                "reflection*parity does not commute with this model".into(),
            ));
        }
    }

    // adapted basis: palindromes alone, others in symmetric/antisymmetric pairs
    #[derive(Clone)]
    struct Combo {
        a: usize,
        b: usize,
        coef_b: f64, // 0 for palindromes
    }
    let mut plus: Vec<Combo> = Vec::new();
    let mut minus: Vec<Combo> = Vec::new();
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        let s = graph.nodes[i];
        let r_bits = reflect(s.bits());
        let g = sign(&s);
        if r_bits == s.bits() {
            done[i] = true;
            let combo = Combo { a: i, b: i, coef_b: 0.0 };
            if g > 0.0 {
                plus.push(combo);
            } else {
                minus.push(combo);
            }
        } else {
            let j = graph
                .index_of(BasisState::new(r_bits, l)?)
                .ok_or_else(|| FscError::InvalidModel("sector not reflection-closed".into()))?
                as usize;
            done[i] = true;
            done[j] = true;
            let c = std::f64::consts::FRAC_1_SQRT_2;
            plus.push(Combo { a: i, b: j, coef_b: g * c });
            minus.push(Combo { a: i, b: j, coef_b: -g * c });
        }
    }

    let h = assemble_dense(graph);
    let project = |combos: &[Combo], label: &str| -> Result<Spectrum, FscError> {
        let nb = combos.len();
        // U: n x nb adapted basis, columns orthonormal
        let mut u = Mat::<f64>::zeros(n, nb);
        for (c, combo) in combos.iter().enumerate() {
            if combo.coef_b == 0.0 {
                u[(combo.a, c)] = 1.0;
            } else {
                u[(combo.a, c)] = std::f64::consts::FRAC_1_SQRT_2;
                u[(combo.b, c)] = combo.coef_b;
            }
        }
        let hu = &h * &u;
        let hb = u.transpose() * &hu;
        let eigenvalues = hb
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| FscError::Eigen(format!("{e:?}")))?;
        Ok(Spectrum {
            eigenvalues,
            vectors: None,
            meta: SpectrumMeta {
                model: spec.name.clone(),
                l,
                bc: spec.bc.to_string(),
                momentum: None,
                block: Some(label.to_string()),
            },
        })
    };
    Ok((project(&plus, "reflection_parity_+")?, project(&minus, "reflection_parity_-")?))
}

/// CSV with a single `E` column.
pub fn eigenvalues_csv(eigenvalues: &[f64]) -> String {
    let mut out = String::from("E\n");
    for e in eigenvalues {
        out.push_str(&format!("{e:.12e}\n"));
    }
    out
}

/// CSV histogram of gap ratios: both zero-multiplet conventions side by side.
pub fn rstats_csv(raw: &GapRatioStats, collapsed: &GapRatioStats) -> String {
    let mut out = String::from("bin_lo,bin_hi,count_raw,count_zero_collapsed\n");
    for (i, &(lo, hi, c)) in raw.histogram.iter().enumerate() {
        let c2 = collapsed.histogram.get(i).map(|&(_, _, c)| c).unwrap_or(0);
        out.push_str(&format!("{lo:.4},{hi:.4},{c},{c2}\n"));
    }
    out
}

/// CSV with `E,S` rows.
pub fn entanglement_csv(profile: &EntanglementProfile) -> String {
    let mut out = String::from("E,S\n");
    for &(e, s) in &profile.pairs {
        out.push_str(&format!("{e:.12e},{s:.12e}\n"));
    }
    out
}
