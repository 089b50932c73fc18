//! Materialized state-space graphs: breadth-first closure of a seed under
//! the model terms, occupation-parity bipartition, biadjacency extraction,
//! and a census of connected components over the full 2^L space.
//!
//! Node discovery follows *binary connectivity*: two states are adjacent if
//! at least one term connects them, regardless of whether the signed
//! amplitudes sum to zero. Each edge records both the summed signed
//! amplitude (the Hamiltonian matrix element) and the number of connecting
//! terms, so the binary view is always recoverable.

use crate::error::FscError;
use crate::model::{BasisState, ModelSpec};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

pub const DEFAULT_SITE_CAP: usize = 20;

/// Sublattice label by occupation parity: `A` even, `B` odd.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum Parity {
    A,
    B,
}

#[derive(Copy, Clone, Debug)]
pub struct Edge {
    /// Dense node indices, `i < j`.
    pub i: u32,
    pub j: u32,
    /// Summed signed amplitude in units of J. May be zero when connecting
    /// terms cancel exactly.
    pub amp: i64,
    /// Number of individual terms connecting the pair.
    pub terms: u32,
}

/// The state-space graph of one connected sector.
pub struct FockGraph {
    pub l: usize,
    pub nodes: Vec<BasisState>,
    node_index: HashMap<u64, u32>,
    pub edges: Vec<Edge>,
    pub partition: Vec<Parity>,
    /// CSR-style adjacency: for node n, `adj[adj_off[n]..adj_off[n+1]]`
    /// lists `(neighbor, amp, terms)`.
    adj_off: Vec<u32>,
    adj: Vec<(u32, i64, u32)>,
}

impl FockGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, s: BasisState) -> Option<u32> {
        self.node_index.get(&s.bits()).copied()
    }

    pub fn neighbors(&self, n: u32) -> &[(u32, i64, u32)] {
        &self.adj[self.adj_off[n as usize] as usize..self.adj_off[n as usize + 1] as usize]
    }

    /// Permutation sorting nodes by ascending integer encoding; `perm[k]`
    /// is the node index that comes k-th in encoding order. Useful for
    /// stable golden files independent of discovery order.
    pub fn encoding_order(&self) -> Vec<u32> {
        let mut perm: Vec<u32> = (0..self.len() as u32).collect();
        perm.sort_by_key(|&n| self.nodes[n as usize].bits());
        perm
    }
}

/// Breadth-first closure of `seed` under the model terms. Discovery order:
/// FIFO over frontier nodes, neighbors of each node visited in ascending
/// integer encoding.
pub fn build_krylov_graph(
    spec: &ModelSpec,
    seed: BasisState,
    site_cap: usize,
) -> Result<FockGraph, FscError> {
    if seed.len() != spec.l {
        return Err(FscError::SizeMismatch { expected: spec.l, got: seed.len() });
    }
    if spec.l > site_cap {
        return Err(FscError::CapExceeded { dim: spec.l, cap: site_cap });
    }

    let mut nodes: Vec<BasisState> = vec![seed];
    let mut index: HashMap<u64, u32> = HashMap::new();
    index.insert(seed.bits(), 0);

    // per-node accumulated (target, amp, terms), built during BFS
    let mut rows: Vec<Vec<(u32, i64, u32)>> = Vec::new();
    let mut head = 0usize;
    while head < nodes.len() {
        let s = nodes[head];
        let mut amps: BTreeMap<u64, (i64, u32)> = BTreeMap::new();
        spec.for_each_term(s.bits(), |t, sign| {
            let e = amps.entry(t).or_insert((0, 0));
            e.0 += sign as i64;
            e.1 += 1;
        });
        let mut row = Vec::with_capacity(amps.len());
        for (t, (amp, terms)) in amps {
            let ti = *index.entry(t).or_insert_with(|| {
                nodes.push(BasisState::new(t, spec.l).expect("target fits L"));
                (nodes.len() - 1) as u32
            });
            row.push((ti, amp, terms));
        }
        rows.push(row);
        head += 1;
    }

    let partition: Vec<Parity> = nodes
        .iter()
        .map(|s| if s.parity_even() { Parity::A } else { Parity::B })
        .collect();

    // symmetric edge list from the upper triangle of the rows
    let mut edges = Vec::new();
    for (n, row) in rows.iter().enumerate() {
        for &(t, amp, terms) in row {
            if (n as u32) < t {
                edges.push(Edge { i: n as u32, j: t, amp, terms });
            }
        }
    }
    edges.sort_by_key(|e| (e.i, e.j));

    let mut adj_off = vec![0u32; nodes.len() + 1];
    let mut adj = Vec::new();
    for (n, row) in rows.iter().enumerate() {
        adj_off[n] = adj.len() as u32;
        adj.extend(row.iter().copied());
    }
    adj_off[nodes.len()] = adj.len() as u32;

    // bipartiteness: every connecting term flips exactly one site
    for e in &edges {
        debug_assert!(partition[e.i as usize] != partition[e.j as usize]);
    }

    Ok(FockGraph { l: spec.l, nodes, node_index: index, edges, partition, adj_off, adj })
}

/// Counts of even- and odd-parity nodes, `(|A|, |B|)`.
pub fn bipartition_counts(graph: &FockGraph) -> (usize, usize) {
    let a = graph.partition.iter().filter(|p| **p == Parity::A).count();
    (a, graph.len() - a)
}

/// `||A| - |B||`: a lower bound on the number of zero-energy states in the
/// sector, by rank-nullity of the biadjacency block.
pub fn imbalance_bound(graph: &FockGraph) -> usize {
    let (a, b) = bipartition_counts(graph);
    a.abs_diff(b)
}

/// The off-diagonal block of the sector Hamiltonian in the parity-ordered
/// basis: rows are B nodes, columns are A nodes.
pub struct BiadjacencyMatrix {
    /// Graph node index of each row (B side).
    pub row_nodes: Vec<u32>,
    /// Graph node index of each column (A side).
    pub col_nodes: Vec<u32>,
    /// Sparse rows: `(col, signed amplitude, term count)`, sorted by col.
    pub rows: Vec<Vec<(u32, i64, u32)>>,
}

impl BiadjacencyMatrix {
    pub fn n_rows(&self) -> usize {
        self.row_nodes.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_nodes.len()
    }

    /// Transposed copy (rows become the A side). The zero-mode search runs
    /// the same code on either sublattice by flipping orientation.
    pub fn transposed(&self) -> BiadjacencyMatrix {
        let mut rows = vec![Vec::new(); self.col_nodes.len()];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, amp, terms) in row {
                rows[c as usize].push((r as u32, amp, terms));
            }
        }
        for row in &mut rows {
            row.sort_by_key(|&(c, _, _)| c);
        }
        BiadjacencyMatrix {
            row_nodes: self.col_nodes.clone(),
            col_nodes: self.row_nodes.clone(),
            rows,
        }
    }

    /// Dense signed integer matrix, row-major.
    pub fn to_dense(&self) -> Vec<Vec<i64>> {
        let mut m = vec![vec![0i64; self.n_cols()]; self.n_rows()];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, amp, _) in row {
                m[r][c as usize] = amp;
            }
        }
        m
    }
}

/// Extract the biadjacency block (rows = B, columns = A).
pub fn biadjacency(graph: &FockGraph) -> BiadjacencyMatrix {
    let mut col_of = vec![u32::MAX; graph.len()];
    let mut row_of = vec![u32::MAX; graph.len()];
    let mut col_nodes = Vec::new();
    let mut row_nodes = Vec::new();
    for (n, p) in graph.partition.iter().enumerate() {
        match p {
            Parity::A => {
                col_of[n] = col_nodes.len() as u32;
                col_nodes.push(n as u32);
            }
            Parity::B => {
                row_of[n] = row_nodes.len() as u32;
                row_nodes.push(n as u32);
            }
        }
    }
    let mut rows = vec![Vec::new(); row_nodes.len()];
    for e in &graph.edges {
        let (bn, an) = if graph.partition[e.i as usize] == Parity::B {
            (e.i, e.j)
        } else {
            (e.j, e.i)
        };
        rows[row_of[bn as usize] as usize].push((col_of[an as usize], e.amp, e.terms));
    }
    for row in &mut rows {
        row.sort_by_key(|&(c, _, _)| c);
    }
    BiadjacencyMatrix { row_nodes, col_nodes, rows }
}

#[derive(Clone, Debug)]
pub struct ComponentInfo {
    pub size: usize,
    /// Smallest integer encoding in the component.
    pub representative: BasisState,
    /// Singleton component with no incident terms.
    pub frozen: bool,
}

pub struct SectorCensus {
    pub l: usize,
    pub components: Vec<ComponentInfo>,
}

impl SectorCensus {
    pub fn sizes(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.size).collect()
    }

    pub fn singleton_count(&self) -> usize {
        self.components.iter().filter(|c| c.size == 1).count()
    }

    pub fn frozen_states(&self) -> Vec<BasisState> {
        self.components.iter().filter(|c| c.frozen).map(|c| c.representative).collect()
    }
}

/// Connected components of the full 2^L space under binary connectivity.
/// Components are reported sorted by (size, representative encoding).
pub fn full_census(spec: &ModelSpec, site_cap: usize) -> Result<SectorCensus, FscError> {
    if spec.l > site_cap {
        return Err(FscError::CapExceeded { dim: spec.l, cap: site_cap });
    }
    let dim = 1u64 << spec.l;
    let mut comp = vec![u32::MAX; dim as usize];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for s in 0..dim {
        if comp[s as usize] != u32::MAX {
            continue;
        }
        let id = components.len() as u32;
        comp[s as usize] = id;
        stack.push(s);
        let mut size = 0usize;
        let mut any_terms = false;
        while let Some(x) = stack.pop() {
            size += 1;
            spec.for_each_term(x, |t, _| {
                any_terms = true;
                if comp[t as usize] == u32::MAX {
                    comp[t as usize] = id;
                    stack.push(t);
                }
            });
        }
        components.push(ComponentInfo {
            size,
            representative: BasisState::new(s, spec.l)?,
            frozen: size == 1 && !any_terms,
        });
    }
    components.sort_by_key(|c| (c.size, c.representative.bits()));
    debug_assert_eq!(components.iter().map(|c| c.size).sum::<usize>(), dim as usize);
    Ok(SectorCensus { l: spec.l, components })
}

/// Optional highlight attached to exported graphs: a sparse amplitude map
/// over node encodings.
pub struct Highlight<'a> {
    pub amplitudes: &'a BTreeMap<u64, i64>,
    pub label: &'a str,
}

fn highlight_of(h: Option<&Highlight>, bits: u64) -> i64 {
    h.and_then(|h| h.amplitudes.get(&bits).copied()).unwrap_or(0)
}

/// GraphViz DOT export with parity and highlight attributes. Node order is
/// ascending integer encoding so output is independent of discovery order.
pub fn export_dot(graph: &FockGraph, highlight: Option<&Highlight>) -> String {
    let mut out = String::new();
    out.push_str("graph fock {\n  node [shape=circle];\n");
    for &n in &graph.encoding_order() {
        let s = graph.nodes[n as usize];
        let p = if graph.partition[n as usize] == Parity::A { "A" } else { "B" };
        let amp = highlight_of(highlight, s.bits());
        let color = match amp.signum() {
            1 => "red",
            -1 => "blue",
            _ => "gray",
        };
        let _ = writeln!(
            out,
            "  \"{s}\" [parity={p}, amp={amp}, color={color}];"
        );
    }
    let mut edges: Vec<&Edge> = graph.edges.iter().collect();
    edges.sort_by_key(|e| {
        let (a, b) = (graph.nodes[e.i as usize].bits(), graph.nodes[e.j as usize].bits());
        (a.min(b), a.max(b))
    });
    for e in edges {
        let (si, sj) = (graph.nodes[e.i as usize], graph.nodes[e.j as usize]);
        let (si, sj) = if si.bits() <= sj.bits() { (si, sj) } else { (sj, si) };
        let _ = writeln!(out, "  \"{si}\" -- \"{sj}\" [amp={}];", e.amp);
    }
    out.push_str("}\n");
    out
}

/// GraphML export mirroring the DOT attributes.
pub fn export_graphml(graph: &FockGraph, highlight: Option<&Highlight>) -> String {
    let mut out = String::new();
    out.push_str(concat!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n",
        "<key id=\"parity\" for=\"node\" attr.name=\"parity\" attr.type=\"string\"/>\n",
        "<key id=\"amp\" for=\"node\" attr.name=\"amp\" attr.type=\"long\"/>\n",
        "<key id=\"w\" for=\"edge\" attr.name=\"amp\" attr.type=\"long\"/>\n",
        "<graph edgedefault=\"undirected\">\n"
    ));
    for &n in &graph.encoding_order() {
        let s = graph.nodes[n as usize];
        let p = if graph.partition[n as usize] == Parity::A { "A" } else { "B" };
        let amp = highlight_of(highlight, s.bits());
        let _ = writeln!(
            out,
            "<node id=\"{s}\"><data key=\"parity\">{p}</data><data key=\"amp\">{amp}</data></node>"
        );
    }
    let mut edges: Vec<&Edge> = graph.edges.iter().collect();
    edges.sort_by_key(|e| {
        let (a, b) = (graph.nodes[e.i as usize].bits(), graph.nodes[e.j as usize].bits());
        (a.min(b), a.max(b))
    });
    for e in edges {
        let (si, sj) = (graph.nodes[e.i as usize], graph.nodes[e.j as usize]);
        let (si, sj) = if si.bits() <= sj.bits() { (si, sj) } else { (sj, si) };
        let _ = writeln!(
            out,
            "<edge source=\"{si}\" target=\"{sj}\"><data key=\"w\">{}</data></edge>",
            e.amp
        );
    }
    out.push_str("</graph>\n</graphml>\n");
    out
}

/// JSON adjacency dump: `{nodes, edges: [[i, j, amp]...], partition}` with
/// nodes listed as bitstrings in graph (discovery) order.
pub fn export_json(graph: &FockGraph) -> String {
    let nodes: Vec<String> = graph.nodes.iter().map(|s| s.to_string()).collect();
    let edges: Vec<(u32, u32, i64)> = graph.edges.iter().map(|e| (e.i, e.j, e.amp)).collect();
    let partition: Vec<u8> = graph
        .partition
        .iter()
        .map(|p| if *p == Parity::A { 0 } else { 1 })
        .collect();
    serde_json::json!({
        "nodes": nodes,
        "edges": edges,
        "partition": partition,
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_multi_cage, build_o1_cage, build_single_cage, Boundary};

    fn st(s: &str) -> BasisState {
        BasisState::parse(s).unwrap()
    }

    #[test]
    fn single_cage_l4_sector_is_everything_nonempty() {
        let spec = build_single_cage(4, Boundary::Open).unwrap();
        let g = build_krylov_graph(&spec, st("0001"), DEFAULT_SITE_CAP).unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(bipartition_counts(&g), (7, 8));
        assert_eq!(imbalance_bound(&g), 1);
    }

    #[test]
    fn cancelled_amplitude_keeps_binary_edge() {
        // at L=4 the state 1001 is connected by terms whose signed
        // amplitudes cancel exactly; it must still be discovered
        let spec = build_single_cage(4, Boundary::Open).unwrap();
        let g = build_krylov_graph(&spec, st("0001"), DEFAULT_SITE_CAP).unwrap();
        let n = g.index_of(st("1001")).expect("discovered");
        assert!(g.neighbors(n).iter().all(|&(_, amp, _)| amp == 0));
        assert!(g.neighbors(n).iter().all(|&(_, _, terms)| terms > 0));
    }

    #[test]
    fn empty_seed_graph_is_one_node() {
        let spec = build_multi_cage(6, Boundary::Periodic).unwrap();
        let g = build_krylov_graph(&spec, BasisState::empty(6), DEFAULT_SITE_CAP).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.edges.is_empty());
        assert_eq!(bipartition_counts(&g), (1, 0));
    }

    #[test]
    fn multi_cage_l6_counts() {
        let spec = build_multi_cage(6, Boundary::Periodic).unwrap();
        let g = build_krylov_graph(&spec, st("000001"), DEFAULT_SITE_CAP).unwrap();
        assert_eq!(g.len(), 63);
        assert_eq!(bipartition_counts(&g), (31, 32));
        assert_eq!(imbalance_bound(&g), 1);
        let m = biadjacency(&g);
        assert_eq!((m.n_rows(), m.n_cols()), (32, 31));
        // periodic boundaries connect some pairs through two terms
        let amps: Vec<i64> = m
            .rows
            .iter()
            .flat_map(|r| r.iter().map(|&(_, a, _)| a))
            .collect();
        assert!(amps.iter().all(|&a| a == 1 || a == 2));
        assert!(amps.iter().any(|&a| a == 2));
    }

    #[test]
    fn bipartiteness_holds_on_build() {
        for spec in [
            build_single_cage(8, Boundary::Open).unwrap(),
            build_multi_cage(8, Boundary::Periodic).unwrap(),
            build_o1_cage(8, Boundary::Periodic).unwrap(),
        ] {
            let g = build_krylov_graph(&spec, st("00000001"), DEFAULT_SITE_CAP).unwrap();
            for e in &g.edges {
                assert_ne!(g.partition[e.i as usize], g.partition[e.j as usize]);
            }
        }
    }

    #[test]
    fn o1_seed_component_size() {
        let spec = build_o1_cage(8, Boundary::Periodic).unwrap();
        let g = build_krylov_graph(&spec, st("00000110"), DEFAULT_SITE_CAP).unwrap();
        assert_eq!(g.len(), 240); // 2^8 minus the 16 isolated states
    }

    #[test]
    fn census_single_and_multi() {
        let spec = build_single_cage(8, Boundary::Open).unwrap();
        let c = full_census(&spec, DEFAULT_SITE_CAP).unwrap();
        assert_eq!(c.sizes(), vec![1, 255]);

        let spec = build_multi_cage(6, Boundary::Periodic).unwrap();
        let c = full_census(&spec, DEFAULT_SITE_CAP).unwrap();
        assert_eq!(c.sizes(), vec![1, 63]);
    }

    #[test]
    fn census_o1_frozen_states() {
        let spec = build_o1_cage(8, Boundary::Periodic).unwrap();
        let c = full_census(&spec, DEFAULT_SITE_CAP).unwrap();
        assert_eq!(c.singleton_count(), 16); // 2^(L/2)
        assert_eq!(c.components.len(), 17);
        // frozen states are exactly the configurations with all odd sites empty
        let frozen = c.frozen_states();
        assert_eq!(frozen.len(), 16);
        for s in frozen {
            assert_eq!(s.bits() & 0b10101010, 0);
        }
    }

    #[test]
    fn census_cap_guard() {
        let spec = build_multi_cage(12, Boundary::Periodic).unwrap();
        assert!(matches!(full_census(&spec, 10), Err(FscError::CapExceeded { .. })));
    }

    #[test]
    fn dot_export_highlights_support() {
        let spec = build_single_cage(6, Boundary::Open).unwrap();
        let g = build_krylov_graph(&spec, st("000001"), DEFAULT_SITE_CAP).unwrap();
        let amps: BTreeMap<u64, i64> = (0..6).map(|i| (1u64 << i, 1i64)).collect();
        let dot = export_dot(&g, Some(&Highlight { amplitudes: &amps, label: "cage" }));
        assert_eq!(dot.matches("color=red").count(), 6);
        assert_eq!(dot.matches("color=gray").count(), 63 - 6);
    }

    #[test]
    fn exports_are_deterministic() {
        let spec = build_multi_cage(6, Boundary::Periodic).unwrap();
        let g1 = build_krylov_graph(&spec, st("000001"), DEFAULT_SITE_CAP).unwrap();
        let g2 = build_krylov_graph(&spec, st("000001"), DEFAULT_SITE_CAP).unwrap();
        assert_eq!(export_dot(&g1, None), export_dot(&g2, None));
        assert_eq!(export_json(&g1), export_json(&g2));
        assert!(export_graphml(&g1, None).contains("graphml"));
    }
}
