//! Domain graphs: construction, the statistics the equilibrium theory is
//! phrased in, hop distances, and node-embedding pretraining.

mod embed;
mod io;

pub use embed::{pretrain_embeddings, random_table, reconstruction_loss, roc_auc, NodeEmbeddingTable, PretrainConfig};

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{GrdaError, Result};
use crate::rng::SeededRng;
use crate::tensor::scalar::binary_entropy_unchecked;

/// Distance reported by [`DomainGraph::bfs_hops`] for domains no source reaches.
pub const UNREACHABLE: usize = usize::MAX;

/// Undirected, unweighted graph over `n` domains with no self-loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "io::GraphDoc", into = "io::GraphDoc")]
pub struct DomainGraph {
    n: usize,
    adj: Vec<bool>,
}

impl DomainGraph {
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(GrdaError::input("a domain graph needs at least one node"));
        }
        Ok(Self {
            n,
            adj: vec![false; n * n],
        })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n)?;
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    /// From a full 0/1 matrix; rejects asymmetry, self-loops and other values.
    pub fn from_adjacency(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut g = Self::empty(n)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(GrdaError::dim(format!("adjacency row {i} has {} entries", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 && v != 1.0 {
                    return Err(GrdaError::input(format!("A[{i}][{j}] = {v} is not 0/1")));
                }
                if v != rows[j][i] {
                    return Err(GrdaError::input(format!("adjacency not symmetric at ({i}, {j})")));
                }
                if i == j && v == 1.0 {
                    return Err(GrdaError::input(format!("self-loop at {i}")));
                }
                g.adj[i * n + j] = v == 1.0;
            }
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(GrdaError::input(format!("edge ({i}, {j}) outside 0..{}", self.n)));
        }
        if i == j {
            return Err(GrdaError::input(format!("self-loop at {i}")));
        }
        self.adj[i * self.n + j] = true;
        self.adj[j * self.n + i] = true;
        Ok(())
    }

    fn checked_n(n: usize) -> Result<()> {
        if n < 2 {
            return Err(GrdaError::input(format!("graph needs n >= 2, got {n}")));
        }
        Ok(())
    }

    pub fn clique(n: usize) -> Result<Self> {
        Self::checked_n(n)?;
        let mut g = Self::empty(n)?;
        for i in 0..n {
            for j in 0..n {
                g.adj[i * n + j] = i != j;
            }
        }
        Ok(g)
    }

    /// Star with node 0 at the center.
    pub fn star(n: usize) -> Result<Self> {
        Self::checked_n(n)?;
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::from_edges(n, &edges)
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn chain(n: usize) -> Result<Self> {
        Self::checked_n(n)?;
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    /// `A[i][j]` as 0.0 or 1.0.
    pub fn a(&self, i: usize, j: usize) -> f64 {
        if self.has_edge(i, j) {
            1.0
        } else {
            0.0
        }
    }

    pub fn adjacency_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.a(i, j)).collect())
            .collect()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_edge(i, j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn is_clique(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.has_edge(i, j) == (i != j)))
    }

    /// Star centered at node 0.
    pub fn is_star(&self) -> bool {
        self.n >= 2 && Self::star(self.n).is_ok_and(|s| &s == self)
    }

    /// Path in index order `0 - 1 - ... - (n-1)`.
    pub fn is_chain(&self) -> bool {
        self.n >= 2 && Self::chain(self.n).is_ok_and(|c| &c == self)
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_hops(&[0])
            .map(|d| d.iter().all(|&h| h != UNREACHABLE))
            .unwrap_or(false)
    }

    /// Mean of `A[i][j]` over all `n²` ordered pairs, the zero diagonal
    /// included.
    pub fn mean_edge_density(&self) -> f64 {
        let ones = self.adj.iter().filter(|&&b| b).count();
        ones as f64 / (self.n * self.n) as f64
    }

    /// `H(E[A_ij])`: the discriminator loss at the encoder's optimum.
    pub fn optimum_disc_loss(&self) -> f64 {
        binary_entropy_unchecked(self.mean_edge_density())
    }

    /// Multi-source hop distance; [`UNREACHABLE`] where no path exists.
    pub fn bfs_hops(&self, sources: &[usize]) -> Result<Vec<usize>> {
        if sources.is_empty() {
            return Err(GrdaError::input("bfs needs at least one source"));
        }
        let mut dist = vec![UNREACHABLE; self.n];
        let mut queue = VecDeque::new();
        for &s in sources {
            if s >= self.n {
                return Err(GrdaError::input(format!("source {s} outside 0..{}", self.n)));
            }
            if dist[s] != 0 {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            for w in self.neighbors(v) {
                if dist[w] == UNREACHABLE {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        Ok(dist)
    }

    /// Grow a connected node set of up to `size` nodes from a random start,
    /// adding a uniformly chosen frontier node at each step.
    pub fn random_connected_subgraph(&self, size: usize, rng: &mut SeededRng) -> Vec<usize> {
        let start = rng.below(self.n);
        let mut inside = vec![false; self.n];
        inside[start] = true;
        let mut nodes = vec![start];
        while nodes.len() < size {
            let frontier: Vec<usize> = (0..self.n)
                .filter(|&w| !inside[w] && nodes.iter().any(|&v| self.has_edge(v, w)))
                .collect();
            if frontier.is_empty() {
                break;
            }
            let w = frontier[rng.below(frontier.len())];
            inside[w] = true;
            nodes.push(w);
        }
        nodes
    }

    /// Connected set of `k` nodes found by BFS from `start`, neighbors visited
    /// in a seeded random order.
    pub fn connected_set_from(&self, start: usize, k: usize, rng: &mut SeededRng) -> Result<Vec<usize>> {
        if start >= self.n {
            return Err(GrdaError::input(format!("start {start} outside 0..{}", self.n)));
        }
        let mut seen = vec![false; self.n];
        let mut order = vec![start];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            if order.len() >= k {
                break;
            }
            let mut nbrs: Vec<usize> = self.neighbors(v).filter(|&w| !seen[w]).collect();
            rng.shuffle(&mut nbrs);
            for w in nbrs {
                if order.len() >= k {
                    break;
                }
                seen[w] = true;
                order.push(w);
                queue.push_back(w);
            }
        }
        if order.len() < k {
            return Err(GrdaError::input(format!(
                "component of node {start} has only {} nodes, {k} requested",
                order.len()
            )));
        }
        Ok(order)
    }
}

/// Natural-log binary entropy, `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GrdaError::input(format!("entropy argument {p} outside [0, 1]")));
    }
    Ok(binary_entropy_unchecked(p))
}

/// Per-domain unit vectors `(a_i, b_i) = (cos ω_i, sin ω_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitVectorSet {
    pub omega: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl UnitVectorSet {
    pub fn from_angles(omega: Vec<f64>) -> Self {
        let a = omega.iter().map(|w| w.cos()).collect();
        let b = omega.iter().map(|w| w.sin()).collect();
        Self { omega, a, b }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// `0.5 a_i a_j + 0.5 b_i b_j + 0.5`, clamped against rounding.
    pub fn edge_probability(&self, i: usize, j: usize) -> f64 {
        (0.5 * self.a[i] * self.a[j] + 0.5 * self.b[i] * self.b[j] + 0.5).clamp(0.0, 1.0)
    }
}

const DG_GRAPH_RETRIES: usize = 1000;

/// Random unit vectors and a Bernoulli graph over them, resampled until
/// connected. Angles are uniform on `(-π/2, π/2)`.
pub fn sample_dg_graph(n: usize, seed: u64) -> Result<(DomainGraph, UnitVectorSet)> {
    if n < 2 {
        return Err(GrdaError::input(format!("graph needs n >= 2, got {n}")));
    }
    let mut rng = SeededRng::stream(seed, "dg-graph");
    for _ in 0..DG_GRAPH_RETRIES {
        let omega: Vec<f64> = (0..n)
            .map(|_| loop {
                let w = rng.uniform_range(-FRAC_PI_2, FRAC_PI_2);
                if w > -FRAC_PI_2 {
                    break w;
                }
            })
            .collect();
        let vecs = UnitVectorSet::from_angles(omega);
        let g = bernoulli_graph(&vecs, &mut rng)?;
        if g.is_connected() {
            return Ok((g, vecs));
        }
    }
    Err(GrdaError::input(format!(
        "no connected graph on {n} nodes after {DG_GRAPH_RETRIES} draws"
    )))
}

/// One Bernoulli draw per unordered pair.
pub fn bernoulli_graph(vecs: &UnitVectorSet, rng: &mut SeededRng) -> Result<DomainGraph> {
    let n = vecs.len();
    let mut g = DomainGraph::empty(n)?;
    for i in 0..n {
        for j in i + 1..n {
            if rng.bernoulli(vecs.edge_probability(i, j)) {
                g.add_edge(i, j)?;
            }
        }
    }
    Ok(g)
}
