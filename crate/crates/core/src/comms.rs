//! Networked communication: radius graphs over agent positions, softmax
//! adoption of (σ, policy) pairs, temperature schedules and consensus
//! diagnostics.

use std::collections::VecDeque;

use rand::Rng;

use crate::types::GridSpec;

/// Undirected graph without self-loops; adjacency lists are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    adjacency: Vec<Vec<usize>>,
}

impl CommGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
        }
    }

    pub fn complete(n: usize) -> Self {
        Self {
            adjacency: (0..n)
                .map(|i| (0..n).filter(|&j| j != i).collect())
                .collect(),
        }
    }

    /// Builds a graph from an edge list. Self-loops and duplicates are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            assert!(i < n && j < n, "edge ({i}, {j}) out of range for {n} nodes");
            if i != j {
                g.adjacency[i].push(j);
                g.adjacency[j].push(i);
            }
        }
        for adj in &mut g.adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        g
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }
}

/// Temperature as configured (annealing resolves against the run length).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSetting {
    Annealed,
    Fixed(f64),
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSchedule {
    Fixed(f64),
    /// Starts at `10^4 / 10^⌈(K-1)/10⌉` and grows tenfold whenever `k mod 10 == 1`.
    Annealed { iterations: usize },
    /// Limit τ → 0: argmax selection, ties to the lowest agent index.
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Max,
    Softmax(f64),
}

impl Temperature {
    /// Numerical temperature; the max mode reports 0.
    pub fn value(self) -> f64 {
        match self {
            Temperature::Max => 0.0,
            Temperature::Softmax(t) => t,
        }
    }
}

pub fn tau_at(schedule: &TauSchedule, k: usize) -> Temperature {
    match *schedule {
        TauSchedule::Fixed(v) => Temperature::Softmax(v),
        TauSchedule::Max => Temperature::Max,
        TauSchedule::Annealed { iterations } => {
            let start_exp = ((iterations as f64 - 1.0) / 10.0).ceil() as i32;
            let steps = if k >= 1 { (k - 1) / 10 + 1 } else { 0 } as i32;
            Temperature::Softmax(10f64.powi(4 - start_exp + steps))
        }
    }
}

/// Agents are adjacent when their cell centres lie within
/// `radius_fraction` of the grid diagonal. Co-located agents are always adjacent.
pub fn build_graph(states: &[usize], grid: &GridSpec, radius_fraction: f64) -> CommGraph {
    let n = states.len();
    let threshold = radius_fraction * grid.diagonal();
    let limit2 = threshold * threshold * (1.0 + 1e-12);
    let coords: Vec<(f64, f64)> = states
        .iter()
        .map(|&s| {
            let (x, y) = grid.coords(s);
            (x as f64, y as f64)
        })
        .collect();
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = coords[i].0 - coords[j].0;
            let dy = coords[i].1 - coords[j].1;
            let d2 = dx * dx + dy * dy;
            if d2 == 0.0 || d2 <= limit2 {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }
    CommGraph { adjacency }
}

/// `{i} ∪ neighbours(i)`, ascending.
pub fn neighbourhood(i: usize, g: &CommGraph) -> Vec<usize> {
    let adj = g.neighbours(i);
    let mut out = Vec::with_capacity(adj.len() + 1);
    let split = adj.partition_point(|&j| j < i);
    out.extend_from_slice(&adj[..split]);
    out.push(i);
    out.extend_from_slice(&adj[split..]);
    out
}

/// Picks one agent from `candidates` (pairs of agent index and σ) with
/// probability `exp(σ/τ) / Σ exp(σ/τ)`, or the argmax in max mode.
pub fn softmax_adopt<R: Rng + ?Sized>(
    candidates: &[(usize, f64)],
    temp: Temperature,
    rng: &mut R,
) -> usize {
    assert!(!candidates.is_empty(), "adoption from an empty neighbourhood");
    let mut best = candidates[0];
    for &c in &candidates[1..] {
        if c.1 > best.1 || (c.1 == best.1 && c.0 < best.0) {
            best = c;
        }
    }
    let tau = match temp {
        Temperature::Max => return best.0,
        Temperature::Softmax(t) => t,
    };
    let weights: Vec<f64> = candidates
        .iter()
        .map(|&(_, s)| ((s - best.1) / tau).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (&(j, _), &w) in candidates.iter().zip(&weights) {
        if u < w {
            return j;
        }
        u -= w;
    }
    // rounding fell off the end; the max always carries weight 1
    best.0
}

/// For every agent, the index of the neighbour (or itself) it adopts from.
/// All agents choose from the same pre-round snapshot.
pub fn select_sources<R: Rng>(
    sigmas: &[f64],
    g: &CommGraph,
    temp: Temperature,
    rngs: &mut [R],
) -> Vec<usize> {
    assert_eq!(sigmas.len(), g.n());
    assert_eq!(rngs.len(), g.n());
    rngs.iter_mut()
        .enumerate()
        .map(|(i, rng)| {
            let candidates: Vec<(usize, f64)> = neighbourhood(i, g)
                .into_iter()
                .map(|j| (j, sigmas[j]))
                .collect();
            softmax_adopt(&candidates, temp, rng)
        })
        .collect()
}

/// One synchronous broadcast-and-adopt round.
pub fn communication_round<P: Clone, R: Rng>(
    payloads: &[P],
    sigmas: &[f64],
    g: &CommGraph,
    temp: Temperature,
    rngs: &mut [R],
) -> (Vec<P>, Vec<f64>) {
    assert_eq!(payloads.len(), sigmas.len());
    let sources = select_sources(sigmas, g, temp, rngs);
    let policies = sources.iter().map(|&j| payloads[j].clone()).collect();
    let new_sigmas = sources.iter().map(|&j| sigmas[j]).collect();
    (policies, new_sigmas)
}

fn bfs_distances(g: &CommGraph, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap();
        for &w in g.neighbours(v) {
            if dist[w].is_none() {
                dist[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Longest shortest path from `v`; `None` if some node is unreachable.
pub fn eccentricity(g: &CommGraph, v: usize) -> Option<usize> {
    bfs_distances(g, v)
        .into_iter()
        .try_fold(0, |acc, d| d.map(|d| acc.max(d)))
}

/// Longest shortest path over all pairs; `None` for a disconnected graph.
pub fn graph_diameter(g: &CommGraph) -> Option<usize> {
    (0..g.n()).try_fold(0, |acc, v| eccentricity(g, v).map(|e| acc.max(e)))
}

/// `(1 - 1/d)^C` when `C < d`, else 0.
pub fn f_of(c: usize, d: usize) -> f64 {
    assert!(d >= 1, "diameter must be at least 1");
    if c >= d {
        0.0
    } else {
        (1.0 - 1.0 / d as f64).powi(c as i32)
    }
}
