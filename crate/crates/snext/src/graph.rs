//! Network topologies and doubly stochastic mixing matrices.
//!
//! Agents communicate over a directed, strongly connected graph. Mixing
//! weights are built with the Metropolis rule on the symmetrized graph,
//! which yields a symmetric doubly stochastic matrix whose sparsity pattern
//! matches the (symmetrized) topology.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Directed communication graph. An edge `(j, i)` means agent `j` can send
/// to agent `i`. Self-loops are implicit: every agent's neighborhood
/// contains itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    agent_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Topology {
    /// Builds a topology from non-self directed edges `(j, i)`.
    pub fn new(agent_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if agent_count == 0 {
            return Err(Error::Graph("agent_count must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        for (j, i) in edges {
            if j >= agent_count || i >= agent_count {
                return Err(Error::Graph(format!(
                    "edge ({j}, {i}) out of range for {agent_count} agents"
                )));
            }
            if j != i {
                set.insert((j, i));
            }
        }
        Ok(Self {
            agent_count,
            edges: set,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.agent_count
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from == to || self.edges.contains(&(from, to))
    }

    /// In-neighborhood of agent `i`, including `i` itself.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.agent_count)
            .filter(|&j| j != i && self.edges.contains(&(j, i)))
            .collect();
        out.push(i);
        out.sort_unstable();
        out
    }

    /// Number of distinct neighbors of `i` in the symmetrized graph,
    /// excluding `i` itself.
    pub fn symmetric_degree(&self, i: usize) -> usize {
        (0..self.agent_count)
            .filter(|&j| j != i && (self.edges.contains(&(j, i)) || self.edges.contains(&(i, j))))
            .count()
    }

    /// Returns the topology with every edge mirrored.
    pub fn symmetrized(&self) -> Topology {
        let mut edges = self.edges.clone();
        for &(j, i) in &self.edges {
            edges.insert((i, j));
        }
        Topology {
            agent_count: self.agent_count,
            edges,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|&(j, i)| self.edges.contains(&(i, j)))
    }

    /// Strong connectivity: every agent reachable from agent 0 along edge
    /// direction and against it.
    pub fn is_strongly_connected(&self) -> bool {
        if self.agent_count == 1 {
            return true;
        }
        self.reaches_all(false) && self.reaches_all(true)
    }

    fn reaches_all(&self, reversed: bool) -> bool {
        let mut seen = vec![false; self.agent_count];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(a, b) in &self.edges {
                let (from, to) = if reversed { (b, a) } else { (a, b) };
                if from == u && !seen[to] {
                    seen[to] = true;
                    count += 1;
                    queue.push_back(to);
                }
            }
        }
        count == self.agent_count
    }

    /// Serializes as a 0/1 adjacency matrix, one row per line. Diagonal
    /// entries are 1 (self-loops).
    pub fn to_adjacency_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.agent_count {
            let row: Vec<String> = (0..self.agent_count)
                .map(|j| if self.has_edge(i, j) { "1".into() } else { "0".into() })
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_adjacency_text(text: &str) -> Result<Self> {
        let matrix = crate::io::parse_matrix(text)?;
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Graph(format!(
                "adjacency matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = matrix.nrows();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && matrix[(i, j)] != 0.0 {
                    edges.push((i, j));
                }
            }
        }
        Topology::new(n, edges)
    }
}

/// Doubly stochastic mixing matrix matching a topology.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    weights: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn from_matrix(weights: DMatrix<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(Error::Dimension {
                expected: weights.nrows(),
                actual: weights.ncols(),
            });
        }
        Ok(Self { weights })
    }

    pub fn agent_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn to_text(&self) -> String {
        crate::io::format_matrix(&self.weights)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_matrix(crate::io::parse_matrix(text)?)
    }
}

/// Outcome of [`validate_weights`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub pass: bool,
    pub violations: Vec<String>,
}

/// Generates a random strongly connected directed graph on `agent_count`
/// nodes. Each ordered pair is an edge with probability `edge_probability`;
/// after 100 rejected samples the last draw is augmented with a
/// bidirectional ring, which makes it strongly connected.
pub fn random_connected_graph(
    agent_count: usize,
    edge_probability: f64,
    seed: u64,
) -> Result<Topology> {
    if agent_count == 0 {
        return Err(Error::Graph("agent_count must be at least 1".into()));
    }
    if !(edge_probability > 0.0 && edge_probability <= 1.0) {
        return Err(Error::Graph(format!(
            "edge_probability must be in (0, 1], got {edge_probability}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..100 {
        let mut edges = Vec::new();
        for j in 0..agent_count {
            for i in 0..agent_count {
                if j != i && rng.gen::<f64>() < edge_probability {
                    edges.push((j, i));
                }
            }
        }
        let topo = Topology::new(agent_count, edges)?;
        if topo.is_strongly_connected() {
            return Ok(topo);
        }
        last = Some(topo);
    }
    // Ring augmentation keeps generation time bounded.
    let mut topo = last.expect("at least one sample drawn");
    for i in 0..agent_count {
        let next = (i + 1) % agent_count;
        if next != i {
            topo.edges.insert((i, next));
            topo.edges.insert((next, i));
        }
    }
    debug_assert!(topo.is_strongly_connected());
    Ok(topo)
}

/// Metropolis weights on the symmetrized topology:
/// `w_ij = 1 / (1 + max(deg_i, deg_j))` for neighbors `j != i`, and the
/// diagonal absorbs the remainder. The result is symmetric and doubly
/// stochastic.
pub fn metropolis_weights(topology: &Topology) -> Result<WeightMatrix> {
    if topology.agent_count() == 0 {
        return Err(Error::Graph("empty topology".into()));
    }
    let sym = topology.symmetrized();
    if !sym.is_strongly_connected() {
        return Err(Error::Graph(
            "topology must be strongly connected".into(),
        ));
    }
    let n = sym.agent_count();
    let deg: Vec<usize> = (0..n).map(|i| sym.symmetric_degree(i)).collect();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut off_sum = 0.0;
        for j in 0..n {
            if j != i && sym.has_edge(j, i) {
                let v = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
                w[(i, j)] = v;
                off_sum += v;
            }
        }
        w[(i, i)] = 1.0 - off_sum;
    }
    WeightMatrix::from_matrix(w)
}

/// Checks the doubly stochastic invariants of `weights` against `topology`.
/// A dimension mismatch is an error; constraint violations are reported in
/// the returned [`ValidationReport`].
pub fn validate_weights(
    weights: &WeightMatrix,
    topology: &Topology,
    tolerance: f64,
) -> Result<ValidationReport> {
    let n = topology.agent_count();
    if weights.agent_count() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: weights.agent_count(),
        });
    }
    let w = weights.as_matrix();
    let mut violations = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = w[(i, j)];
            if v < 0.0 {
                violations.push(format!("negative weight w[{i}][{j}] = {v}"));
            }
            let neighbor = topology.has_edge(j, i);
            if neighbor && v <= 0.0 {
                violations.push(format!(
                    "sparsity: w[{i}][{j}] must be positive for neighbor {j} of {i}"
                ));
            }
            if !neighbor && v != 0.0 {
                violations.push(format!(
                    "sparsity: w[{i}][{j}] = {v} but {j} is not a neighbor of {i}"
                ));
            }
        }
    }
    for i in 0..n {
        let row_sum: f64 = (0..n).map(|j| w[(i, j)]).sum();
        if (row_sum - 1.0).abs() > tolerance {
            violations.push(format!("row-stochasticity: row {i} sums to {row_sum}"));
        }
    }
    for j in 0..n {
        let col_sum: f64 = (0..n).map(|i| w[(i, j)]).sum();
        if (col_sum - 1.0).abs() > tolerance {
            violations.push(format!(
                "column-stochasticity: column {j} sums to {col_sum}"
            ));
        }
    }
    Ok(ValidationReport {
        pass: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn complete(n: usize) -> Topology {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    edges.push((i, j));
                }
            }
        }
        Topology::new(n, edges).unwrap()
    }

    fn path3() -> Topology {
        Topology::new(3, [(0, 1), (1, 0), (1, 2), (2, 1)]).unwrap()
    }

    #[test]
    fn single_node_graph() {
        let t = random_connected_graph(1, 0.5, 7).unwrap();
        assert_eq!(t.agent_count(), 1);
        assert_eq!(t.in_neighbors(0), vec![0]);
        assert!(t.is_strongly_connected());
    }

    #[test]
    fn six_node_graph_strongly_connected() {
        let t = random_connected_graph(6, 0.5, 42).unwrap();
        // Oracle: breadth-first reachability from every node.
        for start in 0..6 {
            let mut seen = vec![false; 6];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                for (j, i) in t.edges() {
                    if j == u && !seen[i] {
                        seen[i] = true;
                        stack.push(i);
                    }
                }
            }
            assert!(seen.iter().all(|&s| s), "node {start} cannot reach all");
        }
    }

    #[test]
    fn probability_one_gives_complete_graph() {
        let t = random_connected_graph(3, 1.0, 0).unwrap();
        assert_eq!(t, complete(3));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = random_connected_graph(8, 0.3, 123).unwrap();
        let b = random_connected_graph(8, 0.3, 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn metropolis_on_complete_graph_is_uniform() {
        let w = metropolis_weights(&complete(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((w.get(i, j) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn metropolis_on_path_matches_hand_computation() {
        // Degrees 1, 2, 1. w_01 = w_10 = 1/3, w_12 = w_21 = 1/3,
        // diagonal 2/3, 1/3, 2/3.
        let w = metropolis_weights(&path3()).unwrap();
        assert!((w.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((w.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((w.get(1, 2) - 1.0 / 3.0).abs() < 1e-15);
        assert!((w.get(2, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((w.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((w.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((w.get(2, 2) - 2.0 / 3.0).abs() < 1e-15);
        let report = validate_weights(&w, &path3(), 1e-12).unwrap();
        assert!(report.pass, "{:?}", report.violations);
    }

    #[test]
    fn metropolis_single_agent() {
        let t = Topology::new(1, []).unwrap();
        let w = metropolis_weights(&t).unwrap();
        assert_eq!(w.get(0, 0), 1.0);
    }

    #[test]
    fn identity_fails_sparsity_on_path() {
        let w = WeightMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        let report = validate_weights(&w, &path3(), 1e-12).unwrap();
        assert!(!report.pass);
        assert!(report.violations.iter().any(|v| v.contains("sparsity")));
    }

    #[test]
    fn broken_column_sum_reports_column_stochasticity() {
        let mut m = metropolis_weights(&path3()).unwrap().as_matrix().clone();
        m[(0, 0)] += 0.1;
        let w = WeightMatrix::from_matrix(m).unwrap();
        let report = validate_weights(&w, &path3(), 1e-12).unwrap();
        assert!(!report.pass);
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("column-stochasticity")));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let w = WeightMatrix::from_matrix(DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            validate_weights(&w, &path3(), 1e-12),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn weight_powers_converge_to_uniform() {
        for n in [2usize, 5, 10] {
            let t = random_connected_graph(n, 0.4, n as u64);
            let w = metropolis_weights(&t.unwrap()).unwrap();
            let mut p = w.as_matrix().clone();
            for _ in 0..49 {
                p = &p * w.as_matrix();
            }
            let target = 1.0 / n as f64;
            let max_dev = p.iter().map(|v| (v - target).abs()).fold(0.0, f64::max);
            assert!(max_dev < 1e-6, "n={n}, max deviation {max_dev}");
        }
    }

    #[test]
    fn topology_adjacency_round_trip() {
        let t = random_connected_graph(5, 0.5, 9).unwrap();
        let back = Topology::from_adjacency_text(&t.to_adjacency_text()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn weight_matrix_text_round_trip() {
        let w = metropolis_weights(&random_connected_graph(4, 0.6, 3).unwrap()).unwrap();
        let back = WeightMatrix::from_text(&w.to_text()).unwrap();
        let diff = (w.as_matrix() - back.as_matrix()).abs().max();
        assert!(diff < 1e-15);
    }

    proptest! {
        #[test]
        fn metropolis_is_symmetric_doubly_stochastic(
            n in 1usize..9,
            p in 0.1f64..1.0,
            seed in 0u64..500,
        ) {
            let t = random_connected_graph(n, p, seed).unwrap();
            let w = metropolis_weights(&t).unwrap();
            let m = w.as_matrix();
            // Exact symmetry of the construction.
            prop_assert_eq!(m, &m.transpose());
            for i in 0..n {
                let row: f64 = (0..n).map(|j| m[(i, j)]).sum();
                let col: f64 = (0..n).map(|j| m[(j, i)]).sum();
                prop_assert!((row - 1.0).abs() < 1e-12);
                prop_assert!((col - 1.0).abs() < 1e-12);
            }
            let report = validate_weights(&w, &t.symmetrized(), 1e-12).unwrap();
            prop_assert!(report.pass);
        }
    }
}
