//! 1-point and 2-point protection tensors.
//!
//! `a^j_{ik} = 1` when `i` and `k` are connected in `G` but not in `G \ {j}`,
//! with the conventions `a^j_{ii} = 0` for `i != j` and `a^j_{ij} = a^j_{ji} = 1`
//! for every `i`, including `a^j_{jj} = 1` (an immune seed infects nobody, and
//! an immune node is never reached).
//!
//! `b^{(i,j)}_{ks} = 1` when `k` and `s` are connected in `G`, neither `i` nor
//! `j` alone separates them, but removing both does. Entries with
//! `{k, s} ∩ {i, j} != ∅` are zero.
//!
//! Both tensors are stored sparsely: per removal set, the sorted list of
//! separated pairs `(k, s)` with `k < s`, excluding convention entries.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Network, REMOVED};

#[derive(Debug, Clone, PartialEq)]
pub struct OnePointTensor {
    n: usize,
    /// `cuts[j]`: pairs separated by removing `j`, both endpoints `!= j`.
    cuts: Vec<Vec<(u32, u32)>>,
    connected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointTensor {
    n: usize,
    /// keyed by `(i, j)` with `i < j`
    cuts: BTreeMap<(u32, u32), Vec<(u32, u32)>>,
}

#[inline]
fn ordered(i: usize, k: usize) -> (u32, u32) {
    if i < k {
        (i as u32, k as u32)
    } else {
        (k as u32, i as u32)
    }
}

/// Pairs `(k, s)`, `k < s`, sharing a key in `group` but not in `split`.
/// Nodes with a `None` key are skipped.
fn split_pairs(
    n: usize,
    group: impl Fn(usize) -> Option<(u32, u32, u32)>,
    split: &[u32],
) -> Vec<(u32, u32)> {
    let mut keyed: Vec<((u32, u32, u32), u32, usize)> = (0..n)
        .filter_map(|v| group(v).map(|key| (key, split[v], v)))
        .collect();
    keyed.sort_unstable();
    let mut out = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start + 1;
        while end < keyed.len() && keyed[end].0 == keyed[start].0 {
            end += 1;
        }
        let block = &keyed[start..end];
        if block.first().map(|b| b.1) != block.last().map(|b| b.1) {
            for (x, a) in block.iter().enumerate() {
                for b in &block[x + 1..] {
                    if a.1 != b.1 {
                        out.push(ordered(a.2, b.2));
                    }
                }
            }
        }
        start = end;
    }
    out.sort_unstable();
    out
}

impl OnePointTensor {
    pub fn build(net: &Network) -> Self {
        Self::build_with_labels(net).0
    }

    /// Also returns the component labels of `G \ {j}` for every `j`.
    fn build_with_labels(net: &Network) -> (Self, Vec<Vec<u32>>) {
        let n = net.n();
        let base = net.component_labels();
        let labels: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|j| net.components_without(&[j]))
            .collect();
        let cuts = labels
            .par_iter()
            .enumerate()
            .map(|(j, without)| split_pairs(n, |v| (v != j).then_some((base[v], 0, 0)), without))
            .collect();
        let connected = base.iter().all(|&c| c == 0);
        (Self { n, cuts, connected }, labels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// False when the source network was disconnected; the conventions
    /// `a^j_{ij} = 1` are applied regardless.
    pub fn source_connected(&self) -> bool {
        self.connected
    }

    /// Non-convention pairs separated by removing `j`.
    pub fn cut_pairs(&self, j: usize) -> &[(u32, u32)] {
        &self.cuts[j]
    }

    pub fn get(&self, j: usize, i: usize, k: usize) -> bool {
        if i == j || k == j {
            return true;
        }
        if i == k {
            return false;
        }
        self.cuts[j].binary_search(&ordered(i, k)).is_ok()
    }

    /// Calls `f(i, k)` for every ordered pair with `a^j_{ik} = 1`.
    pub fn for_each_entry(&self, j: usize, mut f: impl FnMut(usize, usize)) {
        f(j, j);
        for x in (0..self.n).filter(|&x| x != j) {
            f(j, x);
            f(x, j);
        }
        for &(i, k) in &self.cuts[j] {
            f(i as usize, k as usize);
            f(k as usize, i as usize);
        }
    }

    fn check(&self, node: usize, vectors: &[&[f64]]) -> Result<()> {
        if node >= self.n {
            return Err(Error::IndexOutOfRange {
                index: node,
                n: self.n,
            });
        }
        for v in vectors {
            if v.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }

    /// `a^j_i(v) = Σ_k a^j_{ik} v_k` for every `i`.
    pub fn reduce_vec(&self, j: usize, v: &[f64]) -> Result<Vec<f64>> {
        self.check(j, &[v])?;
        let mut out = vec![v[j]; self.n];
        out[j] = v.iter().sum();
        for &(i, k) in &self.cuts[j] {
            out[i as usize] += v[k as usize];
            out[k as usize] += v[i as usize];
        }
        Ok(out)
    }

    /// `a^i(v, w) = Σ_{jk} a^i_{jk} v_j w_k`.
    pub fn reduce_scalar(&self, i: usize, v: &[f64], w: &[f64]) -> Result<f64> {
        self.check(i, &[v, w])?;
        let reduced = self.reduce_vec(i, w)?;
        Ok(reduced.iter().zip(v).map(|(r, x)| r * x).sum())
    }

    /// JSON lines `{"j":..,"i":..,"k":..}`, one per unordered pair `i <= k`
    /// with `a^j_{ik} = 1`, convention entries included.
    pub fn to_json_lines(&self) -> String {
        #[derive(Serialize)]
        struct Entry {
            j: usize,
            i: usize,
            k: usize,
        }
        let mut out = String::new();
        for j in 0..self.n {
            let mut pairs = Vec::new();
            self.for_each_entry(j, |i, k| {
                if i <= k {
                    pairs.push((i, k));
                }
            });
            pairs.sort_unstable();
            for (i, k) in pairs {
                out.push_str(&serde_json::to_string(&Entry { j, i, k }).expect("serializable"));
                out.push('\n');
            }
        }
        out
    }
}

impl TwoPointTensor {
    pub fn build(net: &Network, a: &OnePointTensor) -> Result<Self> {
        if a.n() != net.n() {
            return Err(Error::DimensionMismatch {
                expected: net.n(),
                got: a.n(),
            });
        }
        let n = net.n();
        let base = net.component_labels();
        let single: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|j| net.components_without(&[j]))
            .collect();
        Ok(Self::from_labels(net, &base, &single))
    }

    /// Builds both tensors, sharing the single-removal component labels.
    pub fn build_both(net: &Network) -> (OnePointTensor, TwoPointTensor) {
        let base = net.component_labels();
        let (a, single) = OnePointTensor::build_with_labels(net);
        let b = Self::from_labels(net, &base, &single);
        (a, b)
    }

    fn from_labels(net: &Network, base: &[u32], single: &[Vec<u32>]) -> Self {
        let n = net.n();
        let removal_pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let cuts = removal_pairs
            .par_iter()
            .filter_map(|&(i, j)| {
                let without = net.components_without(&[i, j]);
                let pairs = split_pairs(
                    n,
                    |v| (without[v] != REMOVED).then(|| (base[v], single[i][v], single[j][v])),
                    &without,
                );
                (!pairs.is_empty()).then_some(((i as u32, j as u32), pairs))
            })
            .collect();
        Self { n, cuts }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize, s: usize) -> bool {
        if i == j {
            return false;
        }
        self.cuts
            .get(&ordered(i, j))
            .is_some_and(|pairs| pairs.binary_search(&ordered(k, s)).is_ok())
    }

    pub fn cut_pairs(&self, i: usize, j: usize) -> &[(u32, u32)] {
        self.cuts.get(&ordered(i, j)).map_or(&[], Vec::as_slice)
    }

    /// Number of stored unordered `(pair, pair)` entries.
    pub fn nnz(&self) -> usize {
        self.cuts.values().map(Vec::len).sum()
    }

    /// `b_ij(v, w) = (1 - δ_ij) Σ_{ks} (b^{(i,j)}_{ks} - a^i_{ks} a^j_{ks}) v_k w_s`.
    pub fn reduce(
        &self,
        a: &OnePointTensor,
        i: usize,
        j: usize,
        v: &[f64],
        w: &[f64],
    ) -> Result<f64> {
        a.check(i, &[v, w])?;
        a.check(j, &[])?;
        if a.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: a.n(),
            });
        }
        if i == j {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for &(k, s) in self.cut_pairs(i, j) {
            let (k, s) = (k as usize, s as usize);
            total += v[k] * w[s] + v[s] * w[k];
        }
        let mut overlap = 0.0;
        a.for_each_entry(i, |k, s| {
            if a.get(j, k, s) {
                overlap += v[k] * w[s];
            }
        });
        Ok(total - overlap)
    }

    /// JSON lines `{"i":..,"j":..,"k":..,"s":..}` with `i < j`, `k < s`.
    pub fn to_json_lines(&self) -> String {
        #[derive(Serialize)]
        struct Entry {
            i: u32,
            j: u32,
            k: u32,
            s: u32,
        }
        let mut out = String::new();
        for (&(i, j), pairs) in &self.cuts {
            for &(k, s) in pairs {
                out.push_str(&serde_json::to_string(&Entry { i, j, k, s }).expect("serializable"));
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_topology, Topology, TopologySpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig2() -> Network {
        Network::from_edges(6, &[(0, 1), (0, 2), (0, 3), (1, 4), (3, 4), (4, 5)]).unwrap()
    }

    fn k2() -> Network {
        Network::from_edges(2, &[(0, 1)]).unwrap()
    }

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    /// Direct evaluation of the definitions by repeated connectivity queries.
    fn naive_a(net: &Network, j: usize, i: usize, k: usize) -> bool {
        if i == j || k == j {
            return true;
        }
        if i == k {
            return false;
        }
        net.connected_without(i, k, &[]).unwrap() && !net.connected_without(i, k, &[j]).unwrap()
    }

    fn naive_b(net: &Network, i: usize, j: usize, k: usize, s: usize) -> bool {
        if i == j || [i, j].contains(&k) || [i, j].contains(&s) || k == s {
            return false;
        }
        net.connected_without(k, s, &[]).unwrap()
            && !naive_a(net, i, k, s)
            && !naive_a(net, j, k, s)
            && !net.connected_without(k, s, &[i, j]).unwrap()
    }

    #[test]
    fn fig2_one_point_entries() {
        let a = OnePointTensor::build(&fig2());
        assert!(a.get(4, 2, 5));
        assert!(a.get(0, 2, 5));
        assert!(!a.get(1, 2, 5));
        assert!(!a.get(3, 2, 5));
        assert!(a.get(4, 5, 2));
    }

    #[test]
    fn fig2_two_point_entries() {
        let net = fig2();
        let (a, b) = TwoPointTensor::build_both(&net);
        assert!(b.get(1, 3, 2, 5));
        assert!(b.get(3, 1, 5, 2));
        assert!(!b.get(0, 4, 2, 5));
        assert_eq!(TwoPointTensor::build(&net, &a).unwrap(), b);
    }

    #[test]
    fn triangle_has_only_conventions() {
        let net = Network::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let a = OnePointTensor::build(&net);
        assert!((0..3).all(|j| a.cut_pairs(j).is_empty()));
        let (_, b) = TwoPointTensor::build_both(&net);
        assert_eq!(b.nnz(), 0);
    }

    #[test]
    fn four_cycle_needs_both_opposite_nodes() {
        let net = Network::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let (a, b) = TwoPointTensor::build_both(&net);
        assert!(b.get(1, 3, 0, 2));
        assert!(b.get(0, 2, 1, 3));
        assert!(!b.get(0, 1, 2, 3));
        assert!((0..4).all(|j| a.cut_pairs(j).is_empty()));
        assert_eq!(b.nnz(), 2);
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = OnePointTensor::build(&k2());
        assert!(TwoPointTensor::build(&fig2(), &a).is_err());
        assert!(a.reduce_vec(0, &[1.0]).is_err());
    }

    #[test]
    fn reduce_vec_examples() {
        let a = OnePointTensor::build(&fig2());
        assert_eq!(
            a.reduce_vec(4, &e(6, 5)).unwrap(),
            vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.0]
        );
        assert_eq!(a.reduce_vec(2, &[0.0; 6]).unwrap(), vec![0.0; 6]);
        let a2 = OnePointTensor::build(&k2());
        assert_eq!(a2.reduce_vec(1, &e(2, 1)).unwrap(), vec![1.0, 1.0]);
        assert_eq!(a2.reduce_vec(1, &e(2, 0)).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn reduce_scalar_examples() {
        let a = OnePointTensor::build(&fig2());
        let u = vec![1.0 / 6.0; 6];
        let got = a.reduce_scalar(4, &u, &e(6, 5)).unwrap();
        assert!((got - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(a.reduce_scalar(4, &[0.0; 6], &u).unwrap(), 0.0);
        // K2, removed node 0: entries (0,0), (0,1), (1,0)
        let a2 = OnePointTensor::build(&k2());
        assert_eq!(a2.reduce_scalar(0, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 3.0);
    }

    #[test]
    fn reduce_b_examples() {
        let (a, b) = TwoPointTensor::build_both(&k2());
        assert_eq!(b.reduce(&a, 0, 0, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(b.reduce(&a, 0, 1, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), -2.0);
        let (a, b) = TwoPointTensor::build_both(&fig2());
        assert_eq!(b.reduce(&a, 1, 3, &e(6, 2), &e(6, 5)).unwrap(), 1.0);
    }

    #[test]
    fn leaf_removal_separates_nothing() {
        let net = fig2();
        let a = OnePointTensor::build(&net);
        assert!(a.cut_pairs(2).is_empty());
        assert!(a.cut_pairs(5).is_empty());
    }

    #[test]
    fn tree_cut_iff_on_path() {
        let net = generate_topology(&TopologySpec::new(
            Topology::Tree {
                branching: 2,
                levels: 3,
            },
            0,
        ))
        .unwrap();
        let a = OnePointTensor::build(&net);
        let n = net.n();
        let parent = |v: usize| (v - 1) / 2;
        let ancestors = |mut v: usize| {
            let mut out = vec![v];
            while v != 0 {
                v = parent(v);
                out.push(v);
            }
            out
        };
        let path = |i: usize, k: usize| {
            let (ai, ak) = (ancestors(i), ancestors(k));
            let lca = *ai.iter().find(|x| ak.contains(x)).unwrap();
            let mut p: Vec<usize> = ai.iter().take_while(|&&x| x != lca).copied().collect();
            p.extend(ak.iter().take_while(|&&x| x != lca));
            p.push(lca);
            p
        };
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    if i != j && k != j && i != k {
                        assert_eq!(a.get(j, i, k), path(i, k).contains(&j), "j={j} i={i} k={k}");
                    }
                }
            }
        }
    }

    fn random_connected(n: usize, rng: &mut ChaCha8Rng) -> Network {
        loop {
            let p = rng.random_range(0.25..0.8);
            let mut edges = Vec::new();
            for i in 0..n {
                for k in i + 1..n {
                    if rng.random::<f64>() < p {
                        edges.push((i, k));
                    }
                }
            }
            let net = Network::from_edges(n, &edges).unwrap();
            if net.is_connected() {
                return net;
            }
        }
    }

    #[test]
    fn matches_naive_oracle_on_small_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(2..=6);
            let net = random_connected(n, &mut rng);
            let (a, b) = TwoPointTensor::build_both(&net);
            for j in 0..n {
                for i in 0..n {
                    for k in 0..n {
                        assert_eq!(a.get(j, i, k), naive_a(&net, j, i, k));
                        assert_eq!(a.get(j, i, k), a.get(j, k, i));
                        for s in 0..n {
                            assert_eq!(b.get(j, i, k, s), naive_b(&net, j, i, k, s));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn json_dump_contains_fig2_entries() {
        let (a, b) = TwoPointTensor::build_both(&fig2());
        let one = a.to_json_lines();
        assert!(one.contains(r#"{"j":4,"i":2,"k":5}"#));
        assert!(one.contains(r#"{"j":0,"i":2,"k":5}"#));
        assert!(!one.contains(r#"{"j":1,"i":2,"k":5}"#));
        assert!(b.to_json_lines().contains(r#"{"i":1,"j":3,"k":2,"s":5}"#));
        let single = OnePointTensor::build(&Network::from_edges(1, &[]).unwrap());
        assert_eq!(single.to_json_lines(), "{\"j\":0,\"i\":0,\"k\":0}\n");
    }

    proptest! {
        #[test]
        fn reductions_symmetric(seed in 0u64..500, n in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_connected(n, &mut rng);
            let (a, b) = TwoPointTensor::build_both(&net);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for i in 0..n {
                let x = a.reduce_scalar(i, &v, &w).unwrap();
                let y = a.reduce_scalar(i, &w, &v).unwrap();
                prop_assert!((x - y).abs() < 1e-12);
                for j in 0..n {
                    let bij = b.reduce(&a, i, j, &v, &w).unwrap();
                    prop_assert!((bij - b.reduce(&a, j, i, &v, &w).unwrap()).abs() < 1e-12);
                    prop_assert!((bij - b.reduce(&a, i, j, &w, &v).unwrap()).abs() < 1e-12);
                }
            }
        }
    }
}
