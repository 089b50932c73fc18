//! Constrained spin-flip Hamiltonians defined symbolically as sums of
//! projector-controlled X terms, applied to occupation bitstrings on demand.
//!
//! A model is a list of term families. Each family contributes, for every
//! flip site `i` passing its site filter, the operator
//! `sign * X_i * prod_c P(i + c.offset)` where `P` projects onto the
//! required occupation of the control site. Under open boundaries a term is
//! dropped whenever any of its control sites falls outside the chain; under
//! periodic boundaries control offsets wrap modulo L.

use crate::error::FscError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// An L-site occupation configuration. Bit `i` of `bits` is site `i`;
/// a set bit is an occupied site. A single occupied site at position `i`
/// encodes to the integer `2^i`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisState {
    bits: u64,
    len: u8,
}

impl BasisState {
    pub fn new(bits: u64, l: usize) -> Result<Self, FscError> {
        if l == 0 || l > 63 {
            return Err(FscError::InvalidModel(format!("unsupported site count {l}")));
        }
        if bits >> l != 0 {
            return Err(FscError::InvalidModel(format!(
                "state {bits:#b} does not fit in {l} sites"
            )));
        }
        Ok(Self { bits, len: l as u8 })
    }

    pub fn empty(l: usize) -> Self {
        Self { bits: 0, len: l as u8 }
    }

    /// Parse a ket-style bitstring, most significant site first, so that
    /// `"0001"` is the state with site 0 occupied.
    pub fn parse(s: &str) -> Result<Self, FscError> {
        let l = s.len();
        let bits = u64::from_str_radix(s, 2)
            .map_err(|_| FscError::InvalidModel(format!("bad bitstring {s:?}")))?;
        Self::new(bits, l)
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    #[inline]
    pub fn occupied(&self, site: usize) -> bool {
        (self.bits >> site) & 1 == 1
    }

    /// Number of occupied sites.
    #[inline]
    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Even occupation parity (sublattice A) or odd (sublattice B).
    #[inline]
    pub fn parity_even(&self) -> bool {
        self.weight() % 2 == 0
    }

    #[inline]
    pub fn flipped(&self, site: usize) -> Self {
        Self { bits: self.bits ^ (1 << site), len: self.len }
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$b}", self.bits, width = self.len as usize)
    }
}

impl fmt::Debug for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{self}>")
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Open => write!(f, "open"),
            Boundary::Periodic => write!(f, "periodic"),
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Occupied,
    Empty,
}

/// A projector condition on a site displaced from the flip site.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ProjectorControl {
    pub offset: i32,
    pub polarity: Polarity,
}

impl ProjectorControl {
    pub fn occupied(offset: i32) -> Self {
        Self { offset, polarity: Polarity::Occupied }
    }
}

/// Which flip sites a family sums over.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteFilter {
    All,
    Even,
    Odd,
}

impl SiteFilter {
    #[inline]
    fn admits(&self, site: usize) -> bool {
        match self {
            SiteFilter::All => true,
            SiteFilter::Even => site % 2 == 0,
            SiteFilter::Odd => site % 2 == 1,
        }
    }
}

/// One family of constrained flip terms, summed over its admitted sites.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TermFamily {
    pub controls: Vec<ProjectorControl>,
    #[serde(with = "sign_pm1")]
    pub sign: i8,
    #[serde(rename = "sites")]
    pub site_filter: SiteFilter,
}

mod sign_pm1 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(sign: &i8, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(*sign)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<i8, D::Error> {
        let v = i8::deserialize(d)?;
        if v == 1 || v == -1 {
            Ok(v)
        } else {
            Err(serde::de::Error::custom(format!("sign must be +1 or -1, got {v}")))
        }
    }
}

/// A complete model: chain length, boundary condition, coupling, and the
/// term families that make up the Hamiltonian (in units of the coupling J).
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(rename = "L")]
    pub l: usize,
    pub bc: Boundary,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    pub families: Vec<TermFamily>,
}

fn default_coupling() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), FscError> {
        if self.l < 2 {
            return Err(FscError::InvalidModel(format!("L must be >= 2, got {}", self.l)));
        }
        if self.l > 63 {
            return Err(FscError::InvalidModel(format!("L = {} exceeds 63 sites", self.l)));
        }
        for fam in &self.families {
            for c in &fam.controls {
                if c.offset == 0 {
                    return Err(FscError::InvalidModel(
                        "control offset 0 would project the flip site itself".into(),
                    ));
                }
                if c.offset.unsigned_abs() as usize >= self.l {
                    return Err(FscError::InvalidModel(format!(
                        "control offset {} out of range for L = {}",
                        c.offset, self.l
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, FscError> {
        let spec: ModelSpec =
            serde_json::from_str(s).map_err(|e| FscError::InvalidModel(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    /// Visit every term acting nontrivially on `bits`: calls `f(target, sign)`
    /// once per surviving term whose controls are all satisfied.
    #[inline]
    pub fn for_each_term<F: FnMut(u64, i8)>(&self, bits: u64, mut f: F) {
        let l = self.l;
        for fam in &self.families {
            let sign = fam.sign;
            'site: for i in 0..l {
                if !fam.site_filter.admits(i) {
                    continue;
                }
                for c in &fam.controls {
                    let j = i as i64 + c.offset as i64;
                    let j = match self.bc {
                        Boundary::Open => {
                            if j < 0 || j >= l as i64 {
                                continue 'site;
                            }
                            j as usize
                        }
                        Boundary::Periodic => j.rem_euclid(l as i64) as usize,
                    };
                    let occ = (bits >> j) & 1 == 1;
                    let want = matches!(c.polarity, Polarity::Occupied);
                    if occ != want {
                        continue 'site;
                    }
                }
                f(bits ^ (1 << i), sign);
            }
        }
    }
}

/// Model with nearest- and next-nearest-neighbor controls of opposite sign
/// on each side: `X_i (P_{i-1} - P_{i+1}) + X_i (P_{i-2} - P_{i+2})`.
pub fn build_single_cage(l: usize, bc: Boundary) -> Result<ModelSpec, FscError> {
    if l < 4 {
        return Err(FscError::InvalidModel(format!(
            "single-cage model needs L >= 4 (next-nearest offsets), got {l}"
        )));
    }
    let spec = ModelSpec {
        name: "single_cage".into(),
        l,
        bc,
        coupling: 1.0,
        families: vec![
            TermFamily {
                controls: vec![ProjectorControl::occupied(-1)],
                sign: 1,
                site_filter: SiteFilter::All,
            },
            TermFamily {
                controls: vec![ProjectorControl::occupied(1)],
                sign: -1,
                site_filter: SiteFilter::All,
            },
            TermFamily {
                controls: vec![ProjectorControl::occupied(-2)],
                sign: 1,
                site_filter: SiteFilter::All,
            },
            TermFamily {
                controls: vec![ProjectorControl::occupied(2)],
                sign: -1,
                site_filter: SiteFilter::All,
            },
        ],
    };
    spec.validate()?;
    Ok(spec)
}

/// Model with symmetric nearest-neighbor facilitation:
/// `X_i (P_{i-1} + P_{i+1})` summed over all sites.
pub fn build_multi_cage(l: usize, bc: Boundary) -> Result<ModelSpec, FscError> {
    if l < 3 {
        return Err(FscError::InvalidModel(format!(
            "nearest-neighbor model needs L >= 3, got {l}"
        )));
    }
    let spec = ModelSpec {
        name: "multi_cage".into(),
        l,
        bc,
        coupling: 1.0,
        families: vec![
            TermFamily {
                controls: vec![ProjectorControl::occupied(-1)],
                sign: 1,
                site_filter: SiteFilter::All,
            },
            TermFamily {
                controls: vec![ProjectorControl::occupied(1)],
                sign: 1,
                site_filter: SiteFilter::All,
            },
        ],
    };
    spec.validate()?;
    Ok(spec)
}

/// Model whose nearest-neighbor term acts on even sites only, plus a
/// three-site cluster term on all sites:
/// `sum_{i even} X_i (P_{i-1} + P_{i+1})
///  + sum_i X_i (P_{i-1} P_{i-2} P_{i-3} + P_{i+1} P_{i+2} P_{i+3})`.
pub fn build_o1_cage(l: usize, bc: Boundary) -> Result<ModelSpec, FscError> {
    match bc {
        Boundary::Open if l < 7 => {
            return Err(FscError::InvalidModel(format!(
                "cluster model needs L >= 7 with open boundaries, got {l}"
            )))
        }
        Boundary::Periodic if l < 4 => {
            return Err(FscError::InvalidModel(format!(
                "cluster model needs L >= 4 with periodic boundaries, got {l}"
            )))
        }
        _ => {}
    }
    let tri = |s: i32| -> Vec<ProjectorControl> {
        vec![
            ProjectorControl::occupied(s),
            ProjectorControl::occupied(2 * s),
            ProjectorControl::occupied(3 * s),
        ]
    };
    let spec = ModelSpec {
        name: "o1_cage".into(),
        l,
        bc,
        coupling: 1.0,
        families: vec![
            TermFamily {
                controls: vec![ProjectorControl::occupied(-1)],
                sign: 1,
                site_filter: SiteFilter::Even,
            },
            TermFamily {
                controls: vec![ProjectorControl::occupied(1)],
                sign: 1,
                site_filter: SiteFilter::Even,
            },
            TermFamily { controls: tri(-1), sign: 1, site_filter: SiteFilter::All },
            TermFamily { controls: tri(1), sign: 1, site_filter: SiteFilter::All },
        ],
    };
    spec.validate()?;
    Ok(spec)
}

/// Look up one of the named preset models.
pub fn preset(name: &str, l: usize, bc: Boundary) -> Result<ModelSpec, FscError> {
    match name {
        "single_cage" => build_single_cage(l, bc),
        "multi_cage" => build_multi_cage(l, bc),
        "o1_cage" => build_o1_cage(l, bc),
        other => Err(FscError::InvalidModel(format!(
            "unknown preset {other:?} (expected single_cage, multi_cage, or o1_cage)"
        ))),
    }
}

/// Apply the Hamiltonian to a basis state, returning the connected states
/// with their exact integer amplitudes (in units of J). Terms connecting to
/// the same target accumulate; exact cancellations are removed.
pub fn apply_terms(spec: &ModelSpec, s: BasisState) -> Result<BTreeMap<BasisState, i64>, FscError> {
    if s.len() != spec.l {
        return Err(FscError::SizeMismatch { expected: spec.l, got: s.len() });
    }
    let mut out: BTreeMap<u64, i64> = BTreeMap::new();
    spec.for_each_term(s.bits(), |t, sign| {
        *out.entry(t).or_insert(0) += sign as i64;
    });
    Ok(out
        .into_iter()
        .filter(|&(_, a)| a != 0)
        .map(|(b, a)| (BasisState { bits: b, len: s.len }, a))
        .collect())
}

/// Assemble the dense matrix over the full 2^L space and test it against
/// its transpose entry by entry (exact integer comparison).
pub fn hermiticity_check(spec: &ModelSpec, l_max: usize) -> Result<bool, FscError> {
    if spec.l > l_max || spec.l > 24 {
        return Err(FscError::CapExceeded { dim: 1 << spec.l, cap: 1 << l_max.min(24) });
    }
    let dim = 1usize << spec.l;
    let mut h = vec![0i64; dim * dim];
    for s in 0..dim as u64 {
        spec.for_each_term(s, |t, sign| {
            h[t as usize * dim + s as usize] += sign as i64;
        });
    }
    for a in 0..dim {
        for b in 0..a {
            if h[a * dim + b] != h[b * dim + a] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
