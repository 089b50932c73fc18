//! Closed-form zero-energy cage states: sparse integer-amplitude vectors
//! over basis states, annihilated exactly by their model Hamiltonian.
//!
//! Every constructor here is locked in by the exact annihilation check in
//! the test suite; validity domains follow what that check proves rather
//! than what symmetry arguments might suggest.

use crate::error::FscError;
use crate::model::BasisState;
use std::collections::BTreeMap;

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum CageFamily {
    /// Uniform-sign superposition of all single-occupied states.
    UniformSingles,
    /// Alternating-sign superposition of single-occupied states.
    AlternatingSingles,
    /// Alternating-sign superposition of adjacent pairs around the ring.
    AlternatingPairs,
    /// All-ones state plus antipodal pairs minus their complements.
    AntipodalLoop,
    /// Difference of two adjacent-pair states shifted by one site.
    PairShift,
    /// Product of spatially separated cages and frozen occupied sites.
    Composite,
    /// Produced by a search rather than a closed-form constructor.
    Found,
}

impl CageFamily {
    pub fn label(&self) -> &'static str {
        match self {
            CageFamily::UniformSingles => "uniform_singles",
            CageFamily::AlternatingSingles => "alternating_singles",
            CageFamily::AlternatingPairs => "alternating_pairs",
            CageFamily::AntipodalLoop => "antipodal_loop",
            CageFamily::PairShift => "pair_shift",
            CageFamily::Composite => "composite",
            CageFamily::Found => "search",
        }
    }
}

/// A sparse integer-amplitude state. Amplitudes are reduced so their gcd is
/// one and the first nonzero amplitude (by ascending encoding) is positive.
#[derive(Clone, Debug)]
pub struct CageState {
    pub l: usize,
    pub family: CageFamily,
    amplitudes: BTreeMap<u64, i64>,
}

impl CageState {
    pub fn from_amplitudes(
        l: usize,
        family: CageFamily,
        amplitudes: BTreeMap<u64, i64>,
    ) -> Result<Self, FscError> {
        let mut amps: BTreeMap<u64, i64> = amplitudes.into_iter().filter(|&(_, a)| a != 0).collect();
        if amps.is_empty() {
            return Err(FscError::InvalidCage("empty support".into()));
        }
        for &bits in amps.keys() {
            BasisState::new(bits, l)?;
        }
        let mut g: u64 = 0;
        for &a in amps.values() {
            g = gcd(g, a.unsigned_abs());
        }
        if g > 1 {
            for a in amps.values_mut() {
                *a /= g as i64;
            }
        }
        // gauge: first amplitude positive
        if amps.values().next().copied().unwrap_or(0) < 0 {
            for a in amps.values_mut() {
                *a = -*a;
            }
        }
        Ok(Self { l, family, amplitudes: amps })
    }

    pub fn amplitudes(&self) -> &BTreeMap<u64, i64> {
        &self.amplitudes
    }

    pub fn support(&self) -> usize {
        self.amplitudes.len()
    }

    /// Sum of squared integer amplitudes; the normalization factor is its
    /// square root.
    pub fn norm_sq(&self) -> i64 {
        self.amplitudes.values().map(|a| a * a).sum()
    }

    pub fn states(&self) -> impl Iterator<Item = (BasisState, i64)> + '_ {
        let l = self.l;
        self.amplitudes
            .iter()
            .map(move |(&b, &a)| (BasisState::new(b, l).expect("validated"), a))
    }

    /// Exact integer inner product with another cage state.
    pub fn dot(&self, other: &CageState) -> i64 {
        self.amplitudes
            .iter()
            .filter_map(|(b, a)| other.amplitudes.get(b).map(|c| a * c))
            .sum()
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = b;
        b = a % b;
        a = t;
    }
    a
}

/// Uniform cage over all L single-occupied states. Zero mode of the
/// single-cage model with open boundaries.
pub fn fsc_single(l: usize) -> Result<CageState, FscError> {
    if l < 4 {
        return Err(FscError::InvalidCage(format!("needs L >= 4, got {l}")));
    }
    let amps = (0..l).map(|i| (1u64 << i, 1i64)).collect();
    CageState::from_amplitudes(l, CageFamily::UniformSingles, amps)
}

/// Closed-form cages of the nearest-neighbor (multi-cage) model with
/// periodic boundaries. Families:
///
/// 1. alternating singles: `sum_i (-1)^i |2^i>`
/// 2. alternating adjacent pairs: `sum_i (-1)^i |2^i + 2^((i+1) mod L)>`
/// 3. all-ones plus antipodal pairs minus complements (valid at L = 6 only;
///    the exact annihilation check rules it out at every other even L, with
///    any sign assignment on that support)
///
/// `variant = 1` is rejected: on each family's support the space of exact
/// zero modes is one-dimensional, so no independent alternate sign pattern
/// exists. Families 2 and 3 are themselves the two independent pair-type
/// solutions at L = 6.
pub fn fsc_multi(l: usize, family: u8, variant: u8) -> Result<CageState, FscError> {
    if l % 2 != 0 || l < 4 {
        return Err(FscError::InvalidCage(format!(
            "alternating sign patterns need even L >= 4, got {l}"
        )));
    }
    if variant != 0 {
        return Err(FscError::InvalidCage(
            "no independent sign-pattern variant exists: the exact zero-mode \
             space restricted to each family's support is one-dimensional"
                .into(),
        ));
    }
    match family {
        1 => {
            let amps = (0..l).map(|i| (1u64 << i, if i % 2 == 0 { 1i64 } else { -1 })).collect();
            CageState::from_amplitudes(l, CageFamily::AlternatingSingles, amps)
        }
        2 => {
            let amps = (0..l)
                .map(|i| {
                    let bits = (1u64 << i) | (1u64 << ((i + 1) % l));
                    (bits, if i % 2 == 0 { 1i64 } else { -1 })
                })
                .collect();
            CageState::from_amplitudes(l, CageFamily::AlternatingPairs, amps)
        }
        3 => {
            if l != 6 {
                return Err(FscError::InvalidCage(format!(
                    "the antipodal-loop cage is annihilated only at L = 6 \
                     (no sign assignment works on its support elsewhere); got L = {l}"
                )));
            }
            let full = (1u64 << l) - 1;
            let mut amps = BTreeMap::from([(full, 1i64)]);
            for i in 0..l / 2 {
                let pair = (1u64 << i) | (1u64 << (i + l / 2));
                *amps.entry(pair).or_insert(0) += 1;
                *amps.entry(full ^ pair).or_insert(0) -= 1;
            }
            CageState::from_amplitudes(l, CageFamily::AntipodalLoop, amps)
        }
        other => Err(FscError::InvalidCage(format!("unknown cage family {other}"))),
    }
}

/// Two-node cage of the cluster model with periodic boundaries: the pair at
/// `(p, p+1)` minus the pair at `(p+1, p+2)`. The anchor `p` must sit on an
/// even site; the annihilation check fails for odd anchors.
pub fn fsc_o1(l: usize, p: usize) -> Result<CageState, FscError> {
    if l % 2 != 0 || l < 6 {
        return Err(FscError::InvalidCage(format!("needs even L >= 6, got {l}")));
    }
    if p >= l {
        return Err(FscError::InvalidCage(format!("anchor {p} out of range for L = {l}")));
    }
    if p % 2 != 0 {
        return Err(FscError::InvalidCage(format!(
            "anchor must be even (odd anchors are not annihilated), got {p}"
        )));
    }
    let pair = |a: usize| (1u64 << (a % l)) | (1u64 << ((a + 1) % l));
    let amps = BTreeMap::from([(pair(p), 1i64), (pair(p + 1), -1)]);
    CageState::from_amplitudes(l, CageFamily::PairShift, amps)
}

/// Interaction radius of the cluster model: the farthest control offset.
pub const O1_INTERACTION_RADIUS: usize = 3;

fn occupied_sites(bits: u64, l: usize) -> Vec<usize> {
    (0..l).filter(|&i| (bits >> i) & 1 == 1).collect()
}

fn cyclic_distance(a: usize, b: usize, l: usize) -> usize {
    let d = a.abs_diff(b) % l;
    d.min(l - d)
}

/// Product of spatially separated cages plus isolated occupied even sites,
/// for the cluster model with periodic boundaries. Every component's
/// occupied sites must keep a cyclic distance greater than the interaction
/// radius from every other cage's sites and from the frozen sites, so no
/// term can straddle two components.
pub fn compose(cages: &[CageState], frozen_even_sites: &[usize]) -> Result<CageState, FscError> {
    let Some(first) = cages.first() else {
        return Err(FscError::InvalidCage("empty composition".into()));
    };
    let l = first.l;
    if cages.iter().any(|c| c.l != l) {
        return Err(FscError::InvalidCage("mixed chain lengths".into()));
    }
    for &q in frozen_even_sites {
        if q >= l {
            return Err(FscError::InvalidCage(format!("frozen site {q} out of range")));
        }
        if q % 2 != 0 {
            return Err(FscError::InvalidCage(format!(
                "frozen sites must be even (odd occupation is not frozen), got {q}"
            )));
        }
    }

    // footprint = all sites occupied in any support state of the component
    let footprints: Vec<Vec<usize>> = cages
        .iter()
        .map(|c| {
            let mut sites: Vec<usize> =
                c.amplitudes.keys().flat_map(|&b| occupied_sites(b, l)).collect();
            sites.sort_unstable();
            sites.dedup();
            sites
        })
        .collect();
    let min_sep = O1_INTERACTION_RADIUS + 1;
    for (i, fi) in footprints.iter().enumerate() {
        for fj in footprints.iter().skip(i + 1) {
            for &a in fi {
                for &b in fj {
                    if cyclic_distance(a, b, l) < min_sep {
                        return Err(FscError::InvalidCage(format!(
                            "cage footprints too close: sites {a} and {b}"
                        )));
                    }
                }
            }
        }
        for &q in frozen_even_sites {
            for &a in fi {
                if cyclic_distance(a, q, l) < min_sep {
                    return Err(FscError::InvalidCage(format!(
                        "frozen site {q} too close to cage site {a}"
                    )));
                }
            }
        }
    }

    let mut frozen_bits = 0u64;
    for &q in frozen_even_sites {
        frozen_bits |= 1 << q;
    }
    let mut amps: BTreeMap<u64, i64> = BTreeMap::from([(frozen_bits, 1i64)]);
    for c in cages {
        let mut next = BTreeMap::new();
        for (&b0, &a0) in &amps {
            for (&b1, &a1) in &c.amplitudes {
                next.insert(b0 | b1, a0 * a1);
            }
        }
        amps = next;
    }
    CageState::from_amplitudes(l, CageFamily::Composite, amps)
}
