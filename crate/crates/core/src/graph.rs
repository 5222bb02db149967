//! Configuration-model graphs built by uniform half-edge pairing.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{NetdiffError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    /// Keep self-loops and parallel edges exactly as paired.
    Multigraph,
    /// Pair, then drop self-loops and collapse parallel edges.
    #[default]
    Erased,
    /// Re-pair from scratch until the result is simple.
    RejectionSimple,
}

impl std::str::FromStr for GraphMode {
    type Err = NetdiffError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multigraph" => Ok(GraphMode::Multigraph),
            "erased" => Ok(GraphMode::Erased),
            "rejection_simple" | "rejection" => Ok(GraphMode::RejectionSimple),
            other => Err(NetdiffError::param("graph_mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// Undirected (multi)graph in compressed adjacency form.
///
/// A self-loop at `i` lists `i` twice in its own neighbour list, so the
/// realised degree is always the neighbour-list length.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    mode: GraphMode,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    /// Self-loops produced by the final pairing (removed in erased mode).
    self_loops: usize,
    /// Surplus parallel edges produced by the final pairing (removed in erased mode).
    multi_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub n: usize,
    pub edge_count: usize,
    pub max_degree: u32,
    pub self_loops: usize,
    pub multi_edge_pairs: usize,
    pub mean_degree: f64,
    /// Realised degree frequencies, index = degree.
    pub degree_pmf: Vec<f64>,
}

impl Graph {
    /// Builds a graph from an explicit edge list, keeping every edge.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u as usize >= n || v as usize >= n) {
            return Err(NetdiffError::param(
                "edges",
                format!("edge ({u},{v}) out of range for n={n}"),
            ));
        }
        let (self_loops, multi_edges) = pairing_defects(edges);
        Ok(Self::assemble(n, edges, GraphMode::Multigraph, self_loops, multi_edges))
    }

    fn assemble(n: usize, edges: &[(u32, u32)], mode: GraphMode, self_loops: usize, multi_edges: usize) -> Self {
        let mut deg = vec![0usize; n];
        for &(u, v) in edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &deg {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut targets = vec![0u32; offsets[n]];
        for &(u, v) in edges {
            targets[fill[u as usize]] = v;
            fill[u as usize] += 1;
            targets[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Graph {
            mode,
            offsets,
            targets,
            self_loops,
            multi_edges,
        }
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn degree(&self, i: usize) -> u32 {
        (self.offsets[i + 1] - self.offsets[i]) as u32
    }

    pub fn degrees(&self) -> Vec<u32> {
        (0..self.n()).map(|i| self.degree(i)).collect()
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    /// Each undirected edge once, as `(u, v)` with `u <= v`.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.n() {
            let mut loop_ends = 0;
            for &v in self.neighbors(u) {
                if (u as u32) < v {
                    out.push((u as u32, v));
                } else if v as usize == u {
                    loop_ends += 1;
                    if loop_ends % 2 == 0 {
                        out.push((v, v));
                    }
                }
            }
        }
        out
    }

    pub fn stats(&self) -> GraphStats {
        let n = self.n();
        let degrees = self.degrees();
        let max_degree = degrees.iter().copied().max().unwrap_or(0);
        let mut degree_pmf = vec![0.0; max_degree as usize + 1];
        for &d in &degrees {
            degree_pmf[d as usize] += 1.0 / n as f64;
        }
        GraphStats {
            n,
            edge_count: self.edge_count(),
            max_degree,
            self_loops: self.self_loops,
            multi_edge_pairs: self.multi_edges,
            mean_degree: if n == 0 {
                0.0
            } else {
                self.targets.len() as f64 / n as f64
            },
            degree_pmf,
        }
    }

    /// Short stable hash of the adjacency structure.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        for &o in &self.offsets {
            h.update((o as u64).to_le_bytes());
        }
        for &t in &self.targets {
            h.update(t.to_le_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Edge list as CSV, header `u,v`.
    pub fn edge_list_csv(&self) -> String {
        let mut s = String::from("u,v\n");
        for (u, v) in self.edges() {
            s.push_str(&format!("{u},{v}\n"));
        }
        s
    }
}

/// Self-loop count and surplus parallel-edge count of an edge list.
fn pairing_defects(edges: &[(u32, u32)]) -> (usize, usize) {
    let mut sorted: Vec<(u32, u32)> = edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
    sorted.sort_unstable();
    let self_loops = sorted.iter().filter(|(u, v)| u == v).count();
    let multi = sorted.windows(2).filter(|w| w[0] == w[1]).count();
    (self_loops, multi)
}

fn random_pairing<R: Rng + ?Sized>(stubs: &mut [u32], rng: &mut R) -> Vec<(u32, u32)> {
    stubs.shuffle(rng);
    stubs.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

/// Configuration model on the given degree sequence.
pub fn build_configuration_model<R: Rng + ?Sized>(degrees: &[u32], mode: GraphMode, rng: &mut R) -> Result<Graph> {
    let total: u64 = degrees.iter().map(|&d| d as u64).sum();
    if !total.is_multiple_of(2) {
        return Err(NetdiffError::OddDegreeSum(format!("degree total {total} is odd")));
    }
    let n = degrees.len();
    let mut stubs: Vec<u32> = Vec::with_capacity(total as usize);
    for (i, &d) in degrees.iter().enumerate() {
        stubs.extend(std::iter::repeat_n(i as u32, d as usize));
    }
    match mode {
        GraphMode::Multigraph => {
            let edges = random_pairing(&mut stubs, rng);
            let (loops, multi) = pairing_defects(&edges);
            Ok(Graph::assemble(n, &edges, mode, loops, multi))
        }
        GraphMode::Erased => {
            let edges = random_pairing(&mut stubs, rng);
            let (loops, multi) = pairing_defects(&edges);
            let mut simple: Vec<(u32, u32)> = edges
                .iter()
                .filter(|(u, v)| u != v)
                .map(|&(u, v)| (u.min(v), u.max(v)))
                .collect();
            simple.sort_unstable();
            simple.dedup();
            Ok(Graph::assemble(n, &simple, mode, loops, multi))
        }
        GraphMode::RejectionSimple => {
            let cap = (10 * n).max(1);
            for _ in 0..cap {
                let edges = random_pairing(&mut stubs, rng);
                if pairing_defects(&edges) == (0, 0) {
                    return Ok(Graph::assemble(n, &edges, mode, 0, 0));
                }
            }
            Err(NetdiffError::RejectionCapExceeded { attempts: cap })
        }
    }
}
