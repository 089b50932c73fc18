//! Exact zero-mode counting and explicit cage construction.
//!
//! Counting goes through the integer rank of the biadjacency block: with
//! `r = rank(M)`, the kernel splits as `dim ker = (|A| - r) + (|B| - r)`,
//! at least the sublattice imbalance. Construction uses two searches over
//! one sublattice with the other held at zero: exhaustive backtracking with
//! forward checking over ternary assignments, and a local charge-flow walk
//! that grows a neutral assignment outward from a seed row.

use crate::cages::{CageFamily, CageState};
use crate::error::FscError;
use crate::graph::{BiadjacencyMatrix, FockGraph, Parity};
use crate::intmat::{exact_rank, modular_rank, random_prime, SparseIntMatrix};
use crate::model::{apply_terms, BasisState, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Above this dimension the exact fraction-free route is skipped and the
/// rank is taken from two independent random-prime eliminations.
pub const EXACT_RANK_CAP: usize = 600;

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum RankMethod {
    ExactInteger,
    ModularPrime,
}

impl RankMethod {
    pub fn label(&self) -> &'static str {
        match self {
            RankMethod::ExactInteger => "exact-integer",
            RankMethod::ModularPrime => "modular-prime",
        }
    }
}

#[derive(Clone, Debug)]
pub struct KernelReport {
    pub n_a: usize,
    pub n_b: usize,
    pub rank: usize,
    pub dim_ker_m: usize,
    pub dim_ker_mdagger: usize,
    pub dim_ker_h: usize,
    pub bound: usize,
    pub method: RankMethod,
}

fn biadjacency_to_sparse(m: &BiadjacencyMatrix) -> SparseIntMatrix {
    let rows = m
        .rows
        .iter()
        .map(|r| r.iter().filter(|&&(_, a, _)| a != 0).map(|&(c, a, _)| (c, a)).collect())
        .collect();
    SparseIntMatrix::from_rows(m.n_cols(), rows)
}

/// Kernel dimensions of the sector Hamiltonian from the exact rank of the
/// biadjacency block. A modular-prime elimination always runs first; the
/// fraction-free route confirms it when the matrix is small enough,
/// otherwise a second independent prime must agree.
pub fn kernel_dimensions(m: &BiadjacencyMatrix, rng_seed: u64) -> KernelReport {
    let n_a = m.n_cols();
    let n_b = m.n_rows();
    let sparse = biadjacency_to_sparse(m);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let p1 = random_prime(&mut rng);
    let r1 = modular_rank(&sparse, p1);
    let (rank, method) = if n_a.max(n_b) <= EXACT_RANK_CAP {
        let re = exact_rank(&sparse);
        debug_assert_eq!(re, r1, "modular pre-pass disagrees with exact rank");
        (re, RankMethod::ExactInteger)
    } else {
        let mut p2 = random_prime(&mut rng);
        while p2 == p1 {
            p2 = random_prime(&mut rng);
        }
        let r2 = modular_rank(&sparse, p2);
        // rank mod p never exceeds the rational rank, so on disagreement
        // the larger value is the correct one
        (r1.max(r2), RankMethod::ModularPrime)
    };

    KernelReport {
        n_a,
        n_b,
        rank,
        dim_ker_m: n_a - rank,
        dim_ker_mdagger: n_b - rank,
        dim_ker_h: (n_a - rank) + (n_b - rank),
        bound: n_a.abs_diff(n_b),
        method,
    }
}

/// One ternary-vector solution over a single sublattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TernaryVector {
    pub sublattice: Parity,
    /// `(column index in the search orientation, value)` with value in
    /// {-1, +1}; zeros are implicit.
    pub entries: Vec<(u32, i8)>,
}

impl TernaryVector {
    pub fn support(&self) -> usize {
        self.entries.len()
    }
}

/// Variable ordering for the backtracking assignment.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Default)]
pub enum NodeOrder {
    /// Ascending graph degree, ties by index: low-degree variables trigger
    /// full row checks soonest.
    #[default]
    DegreeAscending,
    /// Plain discovery-index order.
    Index,
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub max_solutions: usize,
    pub max_support: usize,
    /// Signed row sums (true) or the binary-connectivity simplification.
    /// On models whose amplitudes are all positive the two agree; with
    /// mixed signs they genuinely differ (signed is the physical kernel).
    pub signed: bool,
    pub node_order: NodeOrder,
    /// Hard cap on explored assignments; exceeded means the result is
    /// flagged incomplete.
    pub max_steps: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_solutions: 64,
            max_support: usize::MAX,
            signed: true,
            node_order: NodeOrder::DegreeAscending,
            max_steps: 200_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub solutions: Vec<TernaryVector>,
    /// False when a cap stopped the enumeration before exhausting the tree.
    pub complete: bool,
}

struct CheckSystem {
    /// For each variable, the rows touching it as `(row, amplitude)`.
    var_rows: Vec<Vec<(u32, i64)>>,
    n_rows: usize,
}

impl CheckSystem {
    fn from_matrix(m: &BiadjacencyMatrix, sublattice: Parity, signed: bool) -> Self {
        // variables on A: columns of M checked by B rows; variables on B:
        // transpose orientation
        let flip = sublattice == Parity::B;
        let n_vars = if flip { m.n_rows() } else { m.n_cols() };
        let n_rows = if flip { m.n_cols() } else { m.n_rows() };
        let mut var_rows = vec![Vec::new(); n_vars];
        for (r, row) in m.rows.iter().enumerate() {
            for &(c, amp, terms) in row {
                let w = if signed { amp } else { (terms > 0) as i64 };
                if w == 0 {
                    continue;
                }
                if flip {
                    var_rows[r].push((c, w));
                } else {
                    var_rows[c as usize].push((r as u32, w));
                }
            }
        }
        Self { var_rows, n_rows }
    }
}

/// Exhaustive ternary search for vectors whose every check-row sum is zero.
///
/// Variables are assigned in ascending-degree order (ties by index), values
/// tried in the order 0, +1, -1. After each assignment every fully assigned
/// row is tested, and a branch is abandoned as soon as a row sum cannot be
/// brought back to zero by its remaining unassigned neighbors. The global
/// sign is gauged by forcing the first nonzero entry to +1.
pub fn backtracking_search(
    m: &BiadjacencyMatrix,
    sublattice: Parity,
    opts: &SearchOptions,
) -> SearchOutcome {
    let sys = CheckSystem::from_matrix(m, sublattice, opts.signed);
    let n_vars = sys.var_rows.len();
    let mut order: Vec<u32> = (0..n_vars as u32).collect();
    if opts.node_order == NodeOrder::DegreeAscending {
        order.sort_by_key(|&v| (sys.var_rows[v as usize].len(), v));
    }

    let mut state = SearchState {
        order,
        remaining: vec![0u32; sys.n_rows],
        budget: vec![0i64; sys.n_rows],
        sums: vec![0i64; sys.n_rows],
        values: vec![0i8; n_vars],
        gauge_var: None,
        solutions: Vec::new(),
        steps: 0,
        stopped: false,
        sublattice,
        opts,
    };
    for rows in &sys.var_rows {
        for &(r, w) in rows {
            state.remaining[r as usize] += 1;
            state.budget[r as usize] += w.abs();
        }
    }
    state.descend(&sys, 0, 0);
    let stopped = state.stopped;
    SearchOutcome { solutions: state.solutions, complete: !stopped }
}

struct SearchState<'a> {
    order: Vec<u32>,
    /// Per row: unassigned-variable count and absolute-amplitude budget of
    /// the unassigned variables; a row whose partial sum exceeds its budget
    /// can never be brought back to zero.
    remaining: Vec<u32>,
    budget: Vec<i64>,
    sums: Vec<i64>,
    values: Vec<i8>,
    gauge_var: Option<u32>,
    solutions: Vec<TernaryVector>,
    steps: u64,
    stopped: bool,
    sublattice: Parity,
    opts: &'a SearchOptions,
}

impl SearchState<'_> {
    fn descend(&mut self, sys: &CheckSystem, k: usize, support: usize) {
        if self.stopped {
            return;
        }
        if k == self.order.len() {
            if support > 0 {
                let entries: Vec<(u32, i8)> = (0..self.values.len() as u32)
                    .filter(|&i| self.values[i as usize] != 0)
                    .map(|i| (i, self.values[i as usize]))
                    .collect();
                self.solutions.push(TernaryVector { sublattice: self.sublattice, entries });
                if self.solutions.len() >= self.opts.max_solutions {
                    self.stopped = true;
                }
            }
            return;
        }
        let v = self.order[k];
        let var_rows = &sys.var_rows[v as usize];
        for val in [0i8, 1, -1] {
            if self.stopped {
                return;
            }
            self.steps += 1;
            if self.steps > self.opts.max_steps {
                self.stopped = true;
                return;
            }
            if val != 0 {
                if support >= self.opts.max_support {
                    continue;
                }
                // gauge: the first nonzero entry is +1
                if val == -1 && self.gauge_var.is_none() {
                    continue;
                }
            }
            if val != 0 {
                self.values[v as usize] = val;
                if self.gauge_var.is_none() {
                    self.gauge_var = Some(v);
                }
                for &(r, w) in var_rows {
                    self.sums[r as usize] += w * val as i64;
                }
            }
            let mut ok = true;
            for &(r, w) in var_rows {
                let r = r as usize;
                let rem = self.remaining[r] - 1;
                let bud = self.budget[r] - w.abs();
                if (rem == 0 && self.sums[r] != 0) || self.sums[r].abs() > bud {
                    ok = false;
                    break;
                }
            }
            if ok {
                for &(r, w) in var_rows {
                    self.remaining[r as usize] -= 1;
                    self.budget[r as usize] -= w.abs();
                }
                self.descend(sys, k + 1, support + (val != 0) as usize);
                for &(r, w) in var_rows {
                    self.remaining[r as usize] += 1;
                    self.budget[r as usize] += w.abs();
                }
            }
            if val != 0 {
                for &(r, w) in var_rows {
                    self.sums[r as usize] -= w * val as i64;
                }
                self.values[v as usize] = 0;
                if self.gauge_var == Some(v) {
                    self.gauge_var = None;
                }
            }
        }
    }
}

/// Convert a search solution into a cage state using the matrix column (or
/// row) node identities.
pub fn solution_to_cage(
    graph: &FockGraph,
    m: &BiadjacencyMatrix,
    sol: &TernaryVector,
) -> Result<CageState, FscError> {
    let nodes = match sol.sublattice {
        Parity::A => &m.col_nodes,
        Parity::B => &m.row_nodes,
    };
    let amps: BTreeMap<u64, i64> = sol
        .entries
        .iter()
        .map(|&(i, v)| (graph.nodes[nodes[i as usize] as usize].bits(), v as i64))
        .collect();
    CageState::from_amplitudes(graph.l, CageFamily::Found, amps)
}

/// Local search: seed one check row, put opposite unit charges on two of
/// its variables, then repeatedly neutralize charged rows by assigning
/// compensating values on their unassigned variables, backtracking one
/// assignment (or restarting) when a row cannot be neutralized. Any result
/// is verified against every row before being returned.
pub fn charge_flow_search(
    m: &BiadjacencyMatrix,
    sublattice: Parity,
    rng_seed: u64,
    max_steps: usize,
    restarts: usize,
    max_support: usize,
) -> Option<TernaryVector> {
    let sys = CheckSystem::from_matrix(m, sublattice, true);
    let n_vars = sys.var_rows.len();
    if n_vars == 0 || sys.n_rows == 0 {
        return None;
    }
    // row -> variables view
    let mut row_vars: Vec<Vec<(u32, i64)>> = vec![Vec::new(); sys.n_rows];
    for (v, rows) in sys.var_rows.iter().enumerate() {
        for &(r, w) in rows {
            row_vars[r as usize].push((v as u32, w));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    'restart: for _ in 0..restarts {
        let seed_row = rng.gen_range(0..sys.n_rows);
        let vars = &row_vars[seed_row];
        if vars.len() < 2 {
            continue; // degenerate seed
        }
        // pick the two lowest-degree neighbors with matching amplitude
        // magnitude; low-degree states are where small cages live
        let mut ranked: Vec<(u32, i64)> = vars.clone();
        ranked.sort_by_key(|&(v, _)| (sys.var_rows[v as usize].len(), v));
        let (va, wa) = ranked[0];
        let Some(&(vb, wb)) = ranked[1..].iter().find(|&&(_, w)| w.abs() == wa.abs()) else {
            continue;
        };

        let mut values = vec![0i8; n_vars];
        let mut sums = vec![0i64; sys.n_rows];
        let mut trail: Vec<u32> = Vec::new();
        let assign = |v: u32, val: i8, values: &mut Vec<i8>, sums: &mut Vec<i64>, trail: &mut Vec<u32>| {
            values[v as usize] = val;
            trail.push(v);
            for &(r, w) in &sys.var_rows[v as usize] {
                sums[r as usize] += w * val as i64;
            }
        };
        // opposite charges neutralizing the seed row
        assign(va, 1, &mut values, &mut sums, &mut trail);
        let vb_val: i8 = if wa * wb > 0 { -1 } else { 1 };
        assign(vb, vb_val, &mut values, &mut sums, &mut trail);

        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > max_steps {
                continue 'restart;
            }
            // most charged row first keeps the walk local
            let charged = (0..sys.n_rows).filter(|&r| sums[r] != 0).max_by_key(|&r| sums[r].abs());
            let Some(r) = charged else {
                // neutral everywhere: emit if nontrivial
                let entries: Vec<(u32, i8)> = (0..n_vars as u32)
                    .filter(|&v| values[v as usize] != 0)
                    .map(|v| (v, values[v as usize]))
                    .collect();
                if entries.is_empty() || entries.len() > max_support {
                    continue 'restart;
                }
                let mut sol = TernaryVector { sublattice, entries };
                gauge_fix(&mut sol);
                return Some(sol);
            };
            if trail.len() > max_support {
                continue 'restart;
            }
            // neutralize row r: prefer a variable cancelling it outright,
            // low graph degree first (cage states sit on the sparse fringe
            // of the graph, so this keeps the walk on cage manifolds)
            let need = -sums[r];
            let mut free: Vec<(u32, i64)> = row_vars[r]
                .iter()
                .copied()
                .filter(|&(v, w)| values[v as usize] == 0 && w.abs() <= need.abs())
                .collect();
            free.sort_by_key(|&(v, w)| {
                (w.abs() != need.abs(), sys.var_rows[v as usize].len(), v)
            });
            if let Some(&(v, w)) = free.first() {
                let val: i8 = if w.signum() == need.signum() { 1 } else { -1 };
                assign(v, val, &mut values, &mut sums, &mut trail);
                continue;
            }
            // stuck: retract the most recent assignment; restart when empty
            let Some(v) = trail.pop() else { continue 'restart };
            let val = values[v as usize];
            values[v as usize] = 0;
            for &(rr, w) in &sys.var_rows[v as usize] {
                sums[rr as usize] -= w * val as i64;
            }
            if trail.len() < 2 {
                continue 'restart;
            }
        }
    }
    None
}

fn gauge_fix(sol: &mut TernaryVector) {
    sol.entries.sort_by_key(|&(i, _)| i);
    if let Some(&(_, first)) = sol.entries.first() {
        if first < 0 {
            for e in &mut sol.entries {
                e.1 = -e.1;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub ok: bool,
    /// Basis states where the image amplitude failed to cancel.
    pub violations: Vec<(BasisState, i64)>,
}

/// Apply the Hamiltonian to the cage in exact integer arithmetic and check
/// that every image amplitude cancels.
pub fn verify_zero_mode(spec: &ModelSpec, cage: &CageState) -> Result<VerifyReport, FscError> {
    if cage.l != spec.l {
        return Err(FscError::SizeMismatch { expected: spec.l, got: cage.l });
    }
    let mut acc: BTreeMap<u64, i64> = BTreeMap::new();
    for (state, amp) in cage.states() {
        for (target, w) in apply_terms(spec, state)? {
            *acc.entry(target.bits()).or_insert(0) += amp * w;
        }
    }
    let violations: Vec<(BasisState, i64)> = acc
        .into_iter()
        .filter(|&(_, a)| a != 0)
        .map(|(b, a)| (BasisState::new(b, spec.l).expect("image fits"), a))
        .collect();
    Ok(VerifyReport { ok: violations.is_empty(), violations })
}

/// JSON record for an emitted solution, shared by searches and the catalog.
pub fn solution_json(spec: &ModelSpec, cage: &CageState, verified: bool) -> serde_json::Value {
    let entries: Vec<(String, i64)> =
        cage.states().map(|(s, a)| (s.to_string(), a)).collect();
    let sublattice = if cage
        .states()
        .next()
        .map(|(s, _)| s.parity_even())
        .unwrap_or(true)
    {
        "A"
    } else {
        "B"
    };
    serde_json::json!({
        "sublattice": sublattice,
        "entries": entries,
        "verified": verified,
        "model": spec.name,
        "L": spec.l,
        "bc": spec.bc.to_string(),
        "family": cage.family.label(),
        "norm_sq": cage.norm_sq(),
    })
}
