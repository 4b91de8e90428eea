//! Undirected simple networks, topology generators and connectivity queries.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label given to removed nodes by [`Network::components_without`].
pub const REMOVED: u32 = u32::MAX;

/// Undirected simple graph on nodes `0..n`.
///
/// Stored as sorted adjacency lists; the 0/1 adjacency matrix is available
/// through [`Network::adjacency_matrix`] and [`Network::has_edge`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    neighbors: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Network {
    /// Builds a network from an edge list. Duplicate edges (in either
    /// orientation) are merged.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTopology(
                "network needs at least one node".into(),
            ));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, k) in edges {
            for idx in [i, k] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
            if i == k {
                return Err(Error::SelfLoop(i));
            }
            neighbors[i].push(k);
            neighbors[k].push(i);
        }
        let mut edge_count = 0;
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
            edge_count += list.len();
        }
        Ok(Self {
            neighbors,
            edge_count: edge_count / 2,
        })
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, i: usize, k: usize) -> bool {
        self.neighbors[i].binary_search(&k).is_ok()
    }

    /// Edges as `(i, k)` with `i < k`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (i, list) in self.neighbors.iter().enumerate() {
            out.extend(list.iter().filter(|&&k| k > i).map(|&k| (i, k)));
        }
        out
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.n();
        let mut a = vec![vec![0u8; n]; n];
        for (i, list) in self.neighbors.iter().enumerate() {
            for &k in list {
                a[i][k] = 1;
            }
        }
        a
    }

    pub(crate) fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            Err(Error::IndexOutOfRange {
                index: i,
                n: self.n(),
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            Err(Error::DimensionMismatch {
                expected: self.n(),
                got: len,
            })
        } else {
            Ok(())
        }
    }

    /// Connected-component labels of the subgraph induced by nodes with
    /// `keep[i] == true`. Dropped nodes get [`REMOVED`]. Labels are assigned in
    /// increasing order of the smallest node of each component.
    pub fn components_where(&self, keep: &[bool]) -> Vec<u32> {
        let n = self.n();
        let mut label = vec![REMOVED; n];
        let mut queue = VecDeque::new();
        let mut next = 0u32;
        for start in 0..n {
            if !keep[start] || label[start] != REMOVED {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &w in &self.neighbors[v] {
                    if keep[w] && label[w] == REMOVED {
                        label[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Component labels of `G \ removed`.
    pub fn components_without(&self, removed: &[usize]) -> Vec<u32> {
        let mut keep = vec![true; self.n()];
        for &r in removed {
            keep[r] = false;
        }
        self.components_where(&keep)
    }

    pub fn component_labels(&self) -> Vec<u32> {
        self.components_where(&vec![true; self.n()])
    }

    pub fn is_connected(&self) -> bool {
        self.component_labels().iter().all(|&c| c == 0)
    }

    /// True when the graph has no cycles.
    pub fn is_forest(&self) -> bool {
        let components = self
            .component_labels()
            .iter()
            .max()
            .map_or(0, |&c| c as usize + 1);
        self.edge_count + components == self.n()
    }

    /// Whether a path from `i` to `k` survives the removal of `removed`.
    pub fn connected_without(&self, i: usize, k: usize, removed: &[usize]) -> Result<bool> {
        self.check_node(i)?;
        self.check_node(k)?;
        let mut keep = vec![true; self.n()];
        for &r in removed {
            self.check_node(r)?;
            keep[r] = false;
        }
        if !keep[i] {
            return Err(Error::NodeRemoved(i));
        }
        if !keep[k] {
            return Err(Error::NodeRemoved(k));
        }
        if i == k {
            return Ok(true);
        }
        let mut seen = keep.iter().map(|&k| !k).collect::<Vec<_>>();
        let mut stack = vec![i];
        seen[i] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.neighbors[v] {
                if w == k {
                    return Ok(true);
                }
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        Ok(false)
    }

    /// Parses the plain-text edge-list format: a header line `n <count>`
    /// followed by one `i k` pair per line. Blank lines and `#` comments are
    /// ignored.
    pub fn from_edge_list_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (no, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let mut parts = header.split_whitespace();
        let n = match (parts.next(), parts.next(), parts.next()) {
            (Some("n"), Some(count), None) => count
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("line {no}: bad node count: {e}")))?,
            _ => {
                return Err(Error::Parse(format!(
                    "line {no}: expected header 'n <count>'"
                )))
            }
        };
        let mut edges = Vec::new();
        for (no, line) in lines {
            let nums = line
                .split_whitespace()
                .map(str::parse::<usize>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("line {no}: {e}")))?;
            match nums.as_slice() {
                [i, k] => edges.push((*i, *k)),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {no}: expected two node indices"
                    )))
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut out = format!("n {}\n", self.n());
        for (i, k) in self.edges() {
            let _ = writeln!(out, "{i} {k}");
        }
        out
    }
}

/// Topology families used by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Topology {
    Explicit {
        n: usize,
        edges: Vec<(usize, usize)>,
    },
    /// Sparse G(n, p) with `p = c / (n - 1)`.
    ErdosRenyi { n: usize, c: f64 },
    /// Complete `branching`-ary tree with `levels` levels below the root.
    Tree { branching: usize, levels: usize },
    /// Complete groups of the given sizes, joined by explicit bridge edges.
    Community {
        sizes: Vec<usize>,
        bridges: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    #[serde(flatten)]
    pub topology: Topology,
    #[serde(default)]
    pub seed: u64,
}

impl TopologySpec {
    pub fn new(topology: Topology, seed: u64) -> Self {
        Self { topology, seed }
    }

    /// The 30-node, three-community network with bridges 9–10 and 19–20.
    pub fn three_communities() -> Self {
        Self::new(
            Topology::Community {
                sizes: vec![10, 10, 10],
                bridges: vec![(9, 10), (19, 20)],
            },
            0,
        )
    }
}

/// Builds the network described by `spec`. Random variants are a pure
/// function of the seed.
pub fn generate_topology(spec: &TopologySpec) -> Result<Network> {
    match &spec.topology {
        Topology::Explicit { n, edges } => Network::from_edges(*n, edges),
        Topology::ErdosRenyi { n, c } => erdos_renyi(*n, *c, spec.seed),
        Topology::Tree { branching, levels } => tree(*branching, *levels),
        Topology::Community { sizes, bridges } => community(sizes, bridges),
    }
}

fn erdos_renyi(n: usize, c: f64, seed: u64) -> Result<Network> {
    if n < 2 {
        return Err(Error::InvalidTopology("erdos_renyi needs n >= 2".into()));
    }
    if !(c > 0.0 && c <= (n - 1) as f64) {
        return Err(Error::InvalidTopology(format!(
            "connectivity c = {c} outside (0, {}]",
            n - 1
        )));
    }
    let p = c / (n - 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, k));
            }
        }
    }
    Network::from_edges(n, &edges)
}

/// Number of nodes of a complete `branching`-ary tree with `levels` levels
/// below the root.
pub fn tree_size(branching: usize, levels: usize) -> usize {
    (0..=levels).map(|l| branching.pow(l as u32)).sum()
}

/// Node range of tree level `level` (root is level 0) under breadth-first
/// numbering.
pub fn tree_level_nodes(branching: usize, level: usize) -> Range<usize> {
    let start = if level == 0 {
        0
    } else {
        tree_size(branching, level - 1)
    };
    start..start + branching.pow(level as u32)
}

fn tree(branching: usize, levels: usize) -> Result<Network> {
    if branching == 0 {
        return Err(Error::InvalidTopology(
            "tree branching ratio must be positive".into(),
        ));
    }
    let n = tree_size(branching, levels);
    // breadth-first numbering: children of v are b*v+1 ..= b*v+b
    let edges = (1..n).map(|v| ((v - 1) / branching, v)).collect::<Vec<_>>();
    Network::from_edges(n, &edges)
}

fn community(sizes: &[usize], bridges: &[(usize, usize)]) -> Result<Network> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidTopology(
            "community sizes must be positive".into(),
        ));
    }
    let n = sizes.iter().sum();
    let mut edges = Vec::new();
    let mut offset = 0;
    for &size in sizes {
        for i in offset..offset + size {
            for k in i + 1..offset + size {
                edges.push((i, k));
            }
        }
        offset += size;
    }
    edges.extend_from_slice(bridges);
    Network::from_edges(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fig2() -> Network {
        Network::from_edges(6, &[(0, 1), (0, 2), (0, 3), (1, 4), (3, 4), (4, 5)]).unwrap()
    }

    #[test]
    fn k2_adjacency() {
        let net = Network::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(net.adjacency_matrix(), vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn fig2_degrees() {
        assert_eq!(fig2().degrees(), vec![3, 2, 1, 2, 3, 1]);
    }

    #[test]
    fn rejects_self_loop_and_out_of_range() {
        assert_eq!(Network::from_edges(1, &[(0, 0)]), Err(Error::SelfLoop(0)));
        assert_eq!(
            Network::from_edges(2, &[(0, 2)]),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        );
    }

    #[test]
    fn duplicates_merged() {
        let net = Network::from_edges(3, &[(0, 1), (1, 0), (0, 1), (1, 2)]).unwrap();
        assert_eq!(net.edge_count(), 2);
        assert_eq!(net.edges(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn tree_shapes() {
        let spec = TopologySpec::new(
            Topology::Tree {
                branching: 3,
                levels: 4,
            },
            0,
        );
        let net = generate_topology(&spec).unwrap();
        assert_eq!(net.n(), 121);
        assert_eq!(net.degree(0), 3);
        assert_eq!(net.degree(120), 1);
        assert!(net.is_forest() && net.is_connected());
        assert_eq!(tree_level_nodes(3, 4), 40..121);

        let star = generate_topology(&TopologySpec::new(
            Topology::Tree {
                branching: 2,
                levels: 1,
            },
            0,
        ))
        .unwrap();
        assert_eq!(star.edges(), vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn erdos_renyi_deterministic() {
        let spec = TopologySpec::new(Topology::ErdosRenyi { n: 100, c: 3.0 }, 7);
        assert_eq!(
            generate_topology(&spec).unwrap(),
            generate_topology(&spec).unwrap()
        );
        let other = TopologySpec::new(Topology::ErdosRenyi { n: 100, c: 3.0 }, 8);
        assert_ne!(
            generate_topology(&spec).unwrap(),
            generate_topology(&other).unwrap()
        );
    }

    #[test]
    fn erdos_renyi_mean_degree() {
        let mut total = 0.0;
        for seed in 0..50 {
            let spec = TopologySpec::new(Topology::ErdosRenyi { n: 200, c: 4.0 }, seed);
            let net = generate_topology(&spec).unwrap();
            total += 2.0 * net.edge_count() as f64 / 200.0;
        }
        let mean = total / 50.0;
        assert!((mean - 4.0).abs() < 0.5, "mean degree {mean}");
    }

    #[test]
    fn invalid_parameters() {
        for topology in [
            Topology::ErdosRenyi { n: 10, c: 0.0 },
            Topology::ErdosRenyi { n: 10, c: 9.5 },
            Topology::Community {
                sizes: vec![3, 0],
                bridges: vec![],
            },
            Topology::Tree {
                branching: 0,
                levels: 2,
            },
        ] {
            assert!(generate_topology(&TopologySpec::new(topology, 1)).is_err());
        }
    }

    #[test]
    fn three_communities_bridges_are_cuts() {
        let net = generate_topology(&TopologySpec::three_communities()).unwrap();
        assert_eq!(net.n(), 30);
        assert_eq!(net.edge_count(), 3 * 45 + 2);
        assert!(!net.connected_without(0, 29, &[9]).unwrap());
        assert!(net.connected_without(0, 8, &[9]).unwrap());
    }

    #[test]
    fn fig2_connectivity() {
        let net = fig2();
        assert!(!net.connected_without(2, 5, &[4]).unwrap());
        assert!(net.connected_without(2, 5, &[1]).unwrap());
        assert_eq!(
            net.connected_without(2, 5, &[2]),
            Err(Error::NodeRemoved(2))
        );
    }

    #[test]
    fn removing_all_neighbors_disconnects() {
        let net = fig2();
        for k in 0..6 {
            let removed = net.neighbors(k).to_vec();
            for i in (0..6).filter(|&i| i != k && !removed.contains(&i)) {
                assert!(!net.connected_without(i, k, &removed).unwrap());
            }
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let net = fig2();
        let text = net.to_edge_list_string();
        assert!(text.starts_with("n 6\n"));
        assert_eq!(Network::from_edge_list_str(&text).unwrap(), net);
        assert!(Network::from_edge_list_str("6\n0 1\n").is_err());
        assert!(Network::from_edge_list_str("n 3\n0 1 2\n").is_err());
    }

    proptest::proptest! {
        #[test]
        fn generated_graphs_are_simple_and_symmetric(n in 2usize..40, c in 0.5f64..4.0, seed in 0u64..1000) {
            let c = c.min((n - 1) as f64);
            let net = generate_topology(&TopologySpec::new(Topology::ErdosRenyi { n, c }, seed)).unwrap();
            for i in 0..n {
                proptest::prop_assert!(!net.has_edge(i, i));
                for &k in net.neighbors(i) {
                    proptest::prop_assert!(net.has_edge(k, i));
                }
            }
            proptest::prop_assert_eq!(Network::from_edge_list_str(&net.to_edge_list_string()).unwrap(), net);
        }

        #[test]
        fn component_labels_match_reachability(n in 1usize..15, c in 0.5f64..3.0, seed in 0u64..1000, cut in 0usize..15) {
            let c = c.min((n as f64 - 1.0).max(0.5));
            let net = if n == 1 {
                Network::from_edges(1, &[]).unwrap()
            } else {
                generate_topology(&TopologySpec::new(Topology::ErdosRenyi { n, c }, seed)).unwrap()
            };
            let removed = if cut < n { vec![cut] } else { vec![] };
            let labels = net.components_without(&removed);
            for i in (0..n).filter(|i| !removed.contains(i)) {
                for k in (0..n).filter(|k| !removed.contains(k)) {
                    proptest::prop_assert_eq!(labels[i] == labels[k], net.connected_without(i, k, &removed).unwrap());
                }
            }
        }
    }
}
